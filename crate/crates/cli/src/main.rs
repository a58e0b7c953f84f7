use std::io::Write;

fn main() {
    let report = symkit_cli::run_args(std::env::args_os());
    print!("{}", report.stdout);
    eprint!("{}", report.stderr);
    let _ = std::io::stdout().flush();
    std::process::exit(report.code);
}
