mod props;

#[test]
fn total_derivatives_commute() {
    props::total_derivatives_commute().unwrap();
}

#[test]
fn leibniz_rule() {
    props::leibniz_rule().unwrap();
}

#[test]
fn normalize_is_idempotent() {
    props::normalize_is_idempotent().unwrap();
}

#[test]
fn print_parse_round_trip() {
    props::print_parse_round_trip().unwrap();
}

#[test]
fn prolongation_matches_flow() {
    props::prolongation_matches_flow().unwrap();
}

#[test]
fn change_variables_round_trip() {
    props::change_variables_round_trip().unwrap();
}

#[test]
fn symmetries_transport() {
    props::symmetries_transport().unwrap();
}
