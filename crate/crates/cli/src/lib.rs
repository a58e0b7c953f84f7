//! Command-line front end for symkit: reads system documents, runs one
//! library operation per invocation and reports in text, LaTeX or JSON.

pub mod corpus;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use symkit::construct::{
    classify_nonlocal, exclude_variable, ips_from_symmetry, is_conservation_form, ClassifyOptions,
    Link,
};
use symkit::detsys::{find_symmetries, Ansatz};
use symkit::dsl::{read_document, system_to_dsl, system_to_latex, Document};
use symkit::expr::print::to_latex;
use symkit::expr::Name;
use symkit::transform::{canonical_for, change_variables, verify_canonical};
use symkit::vfield::{is_symmetry, SymmetryVerdict};
use symkit::{Error, PdeSystem};

pub use corpus::{Corpus, Outcome};

/// Version of the JSON report layout.
pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "symkit", version, about = "Lie point symmetries and nonlocally related PDE systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Polynomial degree of the symmetry ansatz.
    #[arg(long, global = true)]
    pub degree: Option<u32>,
    /// Extra ansatz atoms, separated by `,` or `;`.
    #[arg(long, global = true)]
    pub atoms: Option<String>,
    #[arg(long, global = true, conflicts_with = "json")]
    pub latex: bool,
    #[arg(long, global = true)]
    pub json: bool,
    /// Highest derivative order of non-point extensions in `classify`.
    #[arg(long, global = true)]
    pub order: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Checks that generators are point symmetries.
    Check {
        file: PathBuf,
        #[arg(long)]
        gen: Option<String>,
    },
    /// Finds point symmetries within a polynomial ansatz.
    Find { file: PathBuf },
    /// Verifies a map as canonical coordinates of a generator, or builds some.
    Canonical {
        file: PathBuf,
        #[arg(long)]
        gen: String,
        #[arg(long)]
        map: Option<String>,
        /// Coordinate the generator should translate (with --map).
        #[arg(long)]
        var: Option<String>,
    },
    /// Rewrites the system in the coordinates of a map.
    Transform {
        file: PathBuf,
        #[arg(long)]
        map: String,
    },
    /// Inverse potential system from a point symmetry.
    Ips {
        file: PathBuf,
        #[arg(long)]
        sym: String,
        #[arg(long)]
        map: Option<String>,
        /// Names for the new derivative variables, comma separated.
        #[arg(long)]
        names: Option<String>,
    },
    /// Removes a dependent variable.
    Exclude {
        file: PathBuf,
        #[arg(long)]
        var: String,
    },
    /// Recognizes equations written as a divergence.
    Clform { file: PathBuf },
    /// Builds the tree described by a tree document.
    Tree { file: PathBuf },
    /// Decides locality of a generator as recorded by `classify` lines.
    Classify {
        file: PathBuf,
        #[arg(long)]
        gen: Option<String>,
    },
    /// Runs every check in the corpus, or in one of its subdirectories.
    VerifyCorpus { dir: Option<PathBuf> },
}

/// Output of one invocation.
#[derive(Debug)]
pub struct Report {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn with_code(code: i32, stdout: String) -> Self {
        Report {
            code,
            stdout,
            stderr: String::new(),
        }
    }

    fn input_error(msg: impl std::fmt::Display) -> Self {
        Report {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Format {
    Text,
    Latex,
    Json,
}

/// Corpus root: `SYMKIT_CORPUS` if set, else the corpus shipped with the crate.
pub fn corpus_root() -> PathBuf {
    std::env::var_os("SYMKIT_CORPUS")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus"))
}

/// Parses arguments and runs the command.
pub fn run_args<I, T>(args: I) -> Report
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                Report::ok(text)
            } else {
                Report {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            }
        }
    }
}

pub fn run(cli: &Cli) -> Report {
    let fmt = if cli.json {
        Format::Json
    } else if cli.latex {
        Format::Latex
    } else {
        Format::Text
    };
    let ansatz = match ansatz(cli) {
        Ok(a) => a,
        Err(e) => return Report::input_error(e),
    };
    let res = match &cli.command {
        Command::VerifyCorpus { dir } => return verify_corpus(dir.as_deref(), fmt),
        Command::Check { file, gen } => load(file).and_then(|d| check(&d, gen.as_deref(), fmt)),
        Command::Find { file } => load(file).and_then(|d| find(&d, &ansatz, fmt)),
        Command::Canonical { file, gen, map, var } => {
            load(file).and_then(|d| canonical(&d, gen, map.as_deref(), var.as_deref(), fmt))
        }
        Command::Transform { file, map } => load(file).and_then(|d| {
            let tr = d.map(map)?;
            Ok(Report::ok(emit_system(&change_variables(&d.system, &tr)?, fmt)))
        }),
        Command::Ips {
            file,
            sym,
            map,
            names,
        } => load(file).and_then(|d| {
            let tr = map.as_deref().map(|m| d.map(m)).transpose()?;
            let names: Option<Vec<Name>> = names
                .as_deref()
                .map(|n| n.split(',').map(|s| Name::new(s.trim())).collect());
            let p = ips_from_symmetry(&d.system, d.gen(sym)?, tr.as_ref(), names.as_deref())?;
            Ok(Report::ok(emit_system(&p.ips, fmt)))
        }),
        Command::Exclude { file, var } => load(file).and_then(|d| {
            let ex = exclude_variable(&d.system, &Name::new(var))?;
            let mut out = emit_system(&ex.system, fmt);
            if fmt == Format::Text {
                let rel = if ex.nonlocal { "nonlocally" } else { "locally" };
                out.push_str(&format!("# {rel} related subsystem\n"));
            }
            Ok(Report::ok(out))
        }),
        Command::Clform { file } => load(file).and_then(|d| clform(&d, fmt)),
        Command::Tree { file } => load(file).and_then(|d| tree(&d, fmt)),
        Command::Classify { file, gen } => {
            load(file).and_then(|d| classify(&d, gen.as_deref(), &ansatz, cli.order, fmt))
        }
    };
    res.unwrap_or_else(Report::input_error)
}

fn ansatz(cli: &Cli) -> symkit::Result<Option<Ansatz>> {
    if cli.degree.is_none() && cli.atoms.is_none() {
        return Ok(None);
    }
    let atoms = match &cli.atoms {
        Some(a) => corpus::parse_atoms(a)?,
        None => Vec::new(),
    };
    Ok(Some(
        Ansatz::degree(cli.degree.unwrap_or(corpus::DEFAULT_DEGREE)).with_atoms(atoms),
    ))
}

fn load(path: &Path) -> symkit::Result<Document> {
    read_document(path)
}

fn emit_system(sys: &PdeSystem, fmt: Format) -> String {
    match fmt {
        Format::Text => system_to_dsl(sys),
        Format::Latex => format!("{}\n", system_to_latex(sys)),
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "system": system_json(sys),
        })),
    }
}

fn system_json(sys: &PdeSystem) -> Value {
    json!({
        "indep": sys.space.indep.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
        "dep": sys.space.deps.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
        "equations": sys.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
    })
}

fn json_line(v: Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(&v).expect("json values serialize"))
}

fn check(d: &Document, gen: Option<&str>, fmt: Format) -> symkit::Result<Report> {
    let gens: Vec<_> = match gen {
        Some(g) => vec![d.gen(g)?.clone()],
        None if d.gens.is_empty() => {
            return Err(Error::Invalid(format!("{} declares no generators", d.name)))
        }
        None => d.gens.clone(),
    };
    let mut rows = Vec::new();
    let mut all = true;
    for g in &gens {
        let v = is_symmetry(&d.system, g);
        all &= v == SymmetryVerdict::Yes;
        let word = match v {
            SymmetryVerdict::Yes => "yes",
            SymmetryVerdict::No => "no",
            SymmetryVerdict::Undetermined => "undetermined",
        };
        rows.push((g.name.clone(), word));
    }
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "symmetries": rows.iter().map(|(n, w)| json!({"gen": n, "symmetry": w})).collect::<Vec<_>>(),
        })),
        _ if rows.len() == 1 => format!("symmetry: {}\n", rows[0].1),
        _ => rows
            .iter()
            .map(|(n, w)| format!("{n}: symmetry: {w}\n"))
            .collect(),
    };
    Ok(Report::with_code(if all { EXIT_OK } else { EXIT_FAILED }, out))
}

fn find(d: &Document, a: &Option<Ansatz>, fmt: Format) -> symkit::Result<Report> {
    let a = a.clone().unwrap_or_else(|| {
        let atoms = d
            .meta_value("atoms")
            .and_then(|s| corpus::parse_atoms(s).ok())
            .unwrap_or_default();
        let degree = d
            .meta_value("degree")
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(corpus::DEFAULT_DEGREE);
        Ansatz::degree(degree).with_atoms(atoms)
    });
    let atoms = a
        .atoms
        .iter()
        .map(|t| d.expand_defines(t))
        .collect::<symkit::Result<Vec<_>>>()?;
    let a = Ansatz { atoms, ..a };
    let found = find_symmetries(&d.system, &a)?;
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "degree": a.degree,
            "count": found.len(),
            "generators": found.iter().map(|g| g.to_dsl()).collect::<Vec<_>>(),
        })),
        Format::Latex => found
            .iter()
            .map(|g| format!("{}\n", g.to_operator(&d.system.space, true)))
            .collect(),
        Format::Text => {
            let mut s = format!("# {} point symmetries at degree {}\n", found.len(), a.degree);
            for g in &found {
                s.push_str(&g.to_dsl());
                s.push('\n');
            }
            s
        }
    };
    Ok(Report::ok(out))
}

fn canonical(
    d: &Document,
    gen: &str,
    map: Option<&str>,
    var: Option<&str>,
    fmt: Format,
) -> symkit::Result<Report> {
    let g = d.gen(gen)?;
    let (tr, var, built) = match map {
        Some(m) => {
            let var = var.ok_or_else(|| Error::Invalid("--map needs --var".into()))?;
            (d.map(m)?, Name::new(var), false)
        }
        None => {
            let (tr, v) = canonical_for(g, &d.system.space)?;
            (tr, v, true)
        }
    };
    let ok = tr.check_inverse().is_ok() && verify_canonical(g, &tr, &var);
    let assignments = |pairs: &[(Name, symkit::Rf)]| {
        pairs
            .iter()
            .map(|(n, e)| format!("{n} = {e}"))
            .collect::<Vec<_>>()
            .join("; ")
    };
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "gen": gen,
            "translated": var.as_str(),
            "forward": assignments(&tr.forward),
            "inverse": assignments(&tr.inverse),
            "verified": ok,
        })),
        Format::Latex => tr
            .forward
            .iter()
            .map(|(n, e)| format!("{n}={}\n", to_latex(e)))
            .collect(),
        Format::Text => {
            let mut s = String::new();
            if built {
                let _ = writeln!(
                    s,
                    "map {}: {} inverse {}",
                    tr.name,
                    assignments(&tr.forward),
                    assignments(&tr.inverse)
                );
            }
            let _ = writeln!(
                s,
                "canonical: {} (translates {var})",
                if ok { "yes" } else { "no" }
            );
            s
        }
    };
    Ok(Report::with_code(if ok { EXIT_OK } else { EXIT_FAILED }, out))
}

fn clform(d: &Document, fmt: Format) -> symkit::Result<Report> {
    let mut rows = Vec::new();
    for e in &d.system.equations {
        rows.push((e.clone(), is_conservation_form(e, &d.system.space)));
    }
    let t = d.system.space.indep.last().cloned();
    let x = d.system.space.indep.first().cloned();
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "equations": rows.iter().map(|(e, cl)| json!({
                "equation": e.to_string(),
                "conserved": cl.is_some(),
                "density": cl.as_ref().map(|c| c.density.to_string()),
                "flux": cl.as_ref().map(|c| c.flux.to_string()),
            })).collect::<Vec<_>>(),
        })),
        _ => rows
            .iter()
            .map(|(e, cl)| match cl {
                Some(c) if fmt == Format::Latex => format!(
                    "D_{{{}}}\\left({}\\right)+D_{{{}}}\\left({}\\right)\n",
                    t.as_ref().map(Name::as_str).unwrap_or("t"),
                    to_latex(&c.density),
                    x.as_ref().map(Name::as_str).unwrap_or("x"),
                    to_latex(&c.flux)
                ),
                Some(c) => format!("{e} = 0: density {}, flux {}\n", c.density, c.flux),
                None => format!("{e} = 0: not in conservation form\n"),
            })
            .collect(),
    };
    Ok(Report::ok(out))
}

fn tree(d: &Document, fmt: Format) -> symkit::Result<Report> {
    let corpus = Corpus::load(&corpus_root())?;
    let (tree, labels) = corpus.tree_for(d)?;
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "nodes": tree.nodes.iter().zip(&labels).map(|(n, l)| json!({
                "id": n.label,
                "label": l,
                "equations": n.system.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "edges": tree.edges.iter().map(|e| json!({
                "from": tree.nodes[e.from].label,
                "to": tree.nodes[e.to].label,
                "type": e.kind.to_string(),
                "provenance": e.provenance,
            })).collect::<Vec<_>>(),
        })),
        Format::Latex => tree
            .nodes
            .iter()
            .zip(&labels)
            .map(|(n, l)| format!("% {} {l}\n{}\n", n.label, system_to_latex(&n.system)))
            .collect(),
        Format::Text => {
            let mut s = String::new();
            for (n, l) in tree.nodes.iter().zip(&labels) {
                let _ = writeln!(s, "{} [{l}]", n.label);
                for e in &n.system.equations {
                    let _ = writeln!(s, "    {e} = 0");
                }
            }
            for e in &tree.edges {
                let _ = writeln!(
                    s,
                    "{} -> {} {} ({})",
                    tree.nodes[e.from].label, tree.nodes[e.to].label, e.kind, e.provenance
                );
            }
            s
        }
    };
    Ok(Report::ok(out))
}

/// Runs the file's `classify` lines, or classifies `gen` as a potential
/// system symmetry when the file has none for it.
fn classify(
    d: &Document,
    gen: Option<&str>,
    a: &Option<Ansatz>,
    order: Option<usize>,
    fmt: Format,
) -> symkit::Result<Report> {
    let corpus = Corpus::load(&corpus_root())?;
    let lines: Vec<_> = d
        .meta("classify")
        .filter(|m| gen.is_none_or(|g| m.value.split_whitespace().next() == Some(g)))
        .collect();
    let mut rows = Vec::new();
    if lines.is_empty() {
        let g = gen.ok_or_else(|| Error::Invalid("no classify lines; pass --gen".into()))?;
        let v = d.gen(g)?;
        let potentials: Vec<Name> = d.system.space.deps.iter().skip(1).cloned().collect();
        let mut opts = ClassifyOptions::default();
        if let Some(a) = a {
            opts.ansatz = a.clone();
        }
        if let Some(o) = order {
            opts.order = o;
        }
        let base = PdeSystem::new(
            symkit::JetSpace {
                indep: d.system.space.indep.clone(),
                deps: d.system.space.deps.iter().take(1).cloned().collect(),
            },
            Vec::new(),
        );
        let r = classify_nonlocal(&base, &d.system, v, &Link::Potential { potentials }, &opts);
        rows.push((g.to_string(), r.to_string(), true));
    } else {
        let stem = d.name.clone();
        for o in corpus_rows(&corpus, d, &stem) {
            if lines.iter().any(|m| o.check.starts_with(&format!("classify {}", first_word(&m.value)))) {
                let got = o.detail.split_whitespace().next().unwrap_or("").to_string();
                rows.push((o.check.trim_start_matches("classify ").to_string(), got, o.pass));
            }
        }
    }
    let all = rows.iter().all(|r| r.2);
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "results": rows.iter().map(|(g, r, ok)| json!({"gen": g, "locality": r, "as_expected": ok})).collect::<Vec<_>>(),
        })),
        _ => rows.iter().map(|(g, r, _)| format!("{g}: {r}\n")).collect(),
    };
    Ok(Report::with_code(if all { EXIT_OK } else { EXIT_FAILED }, out))
}

fn first_word(s: &str) -> &str {
    s.split_whitespace().next().unwrap_or("")
}

/// Rows for a document that may live outside the corpus.
fn corpus_rows(corpus: &Corpus, d: &Document, stem: &str) -> Vec<Outcome> {
    match corpus.doc(stem) {
        Ok(c) if c.source == d.source => corpus.verify_file(stem),
        _ => corpus.verify_document(stem, d),
    }
}

fn verify_corpus(dir: Option<&Path>, fmt: Format) -> Report {
    let path = match dir {
        // A bare `tables/` names a subdirectory of the corpus.
        Some(d) if !d.exists() && d.is_relative() => corpus_root().join(d),
        Some(d) => d.to_path_buf(),
        None => corpus_root(),
    };
    let path = std::fs::canonicalize(&path).unwrap_or(path);
    let sub = path
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| corpus::SUBDIRS.contains(n))
        .map(str::to_string);
    let root = match (&sub, path.parent()) {
        (Some(_), Some(p)) => p.to_path_buf(),
        _ => path.clone(),
    };
    let corpus = match Corpus::load(&root) {
        Ok(c) => c,
        Err(e) => return Report::input_error(e),
    };
    let rows = corpus.verify(sub.as_deref());
    let failed = rows.iter().filter(|r| !r.pass).count();
    let out = match fmt {
        Format::Json => json_line(json!({
            "schema": SCHEMA,
            "passed": rows.len() - failed,
            "failed": failed,
            "rows": rows.iter().map(|r| json!({
                "file": r.file, "check": r.check, "pass": r.pass, "detail": r.detail,
            })).collect::<Vec<_>>(),
        })),
        _ => {
            let mut s = String::new();
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{} {} :: {} :: {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.file,
                    r.check,
                    r.detail.replace('\n', "\n    ")
                );
            }
            let _ = writeln!(s, "{} passed, {} failed", rows.len() - failed, failed);
            s
        }
    };
    Report::with_code(if failed == 0 { EXIT_OK } else { EXIT_FAILED }, out)
}
