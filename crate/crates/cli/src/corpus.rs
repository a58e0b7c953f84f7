//! Data-driven verification of the corpus directory.
//!
//! The corpus holds system documents in three subdirectories: `tables`
//! (systems with their listed generators), `golden` (systems produced by a
//! recorded `recipe`) and `trees` (tree shapes built from a seed). Every
//! metadata line of a document is one checked row.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use symkit::construct::{
    build_tree, classify_nonlocal, exclude_variable, ips_from_symmetry, potential_system, rename,
    systems_equivalent, ClassifyOptions, ConservationLaw, Link, Locality, Move, SystemTree,
};
use symkit::detsys::{find_cl_multipliers, find_symmetries, span_contains, Ansatz};
use symkit::dsl::{read_document, system_to_dsl, Document, Meta};
use symkit::expr::{parse_rf, Name, Q};
use symkit::transform::{canonical_for, change_variables, hodograph, verify_canonical};
use symkit::vfield::{is_symmetry, SymmetryVerdict, VectorField};
use symkit::{Error, PdeSystem, Result, Rf};

pub const SUBDIRS: &[&str] = &["tables", "golden", "trees"];

/// Default polynomial degree of symmetry ansatzes.
pub const DEFAULT_DEGREE: u32 = 3;

pub struct Corpus {
    pub root: PathBuf,
    /// Documents by file stem, with the subdirectory they came from.
    docs: BTreeMap<String, (String, Document)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub file: String,
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

impl Corpus {
    pub fn load(root: &Path) -> Result<Corpus> {
        let mut docs = BTreeMap::new();
        for sub in SUBDIRS {
            let dir = root.join(sub);
            if !dir.is_dir() {
                continue;
            }
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| Error::Invalid(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "sys"))
                .collect();
            paths.sort();
            for p in paths {
                let doc = read_document(&p)?;
                let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
                if docs.insert(stem.clone(), (sub.to_string(), doc)).is_some() {
                    return Err(Error::Invalid(format!("corpus file {stem} appears twice")));
                }
            }
        }
        if docs.is_empty() {
            return Err(Error::Invalid(format!("no corpus files under {}", root.display())));
        }
        Ok(Corpus {
            root: root.to_path_buf(),
            docs,
        })
    }

    pub fn doc(&self, stem: &str) -> Result<&Document> {
        self.docs
            .get(stem)
            .map(|(_, d)| d)
            .ok_or_else(|| Error::Invalid(format!("no corpus file named {stem}")))
    }

    /// Stems in corpus order: tables, then goldens, then trees.
    pub fn stems(&self, only: Option<&str>) -> Vec<String> {
        let mut out = Vec::new();
        for sub in SUBDIRS {
            if only.is_some_and(|o| o != *sub) {
                continue;
            }
            out.extend(
                self.docs
                    .iter()
                    .filter(|(_, (s, _))| s == sub)
                    .map(|(k, _)| k.clone()),
            );
        }
        out
    }

    /// Runs every check of the selected files. Files are processed in
    /// parallel; the result order follows the corpus order.
    pub fn verify(&self, only: Option<&str>) -> Vec<Outcome> {
        let stems = self.stems(only);
        let slots: Vec<Mutex<Vec<Outcome>>> = stems.iter().map(|_| Mutex::new(Vec::new())).collect();
        let next = AtomicUsize::new(0);
        let workers = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
            .min(stems.len().max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(stem) = stems.get(i) else { break };
                    *slots[i].lock().unwrap() = self.verify_file(stem);
                });
            }
        });
        slots.into_iter().flat_map(|m| m.into_inner().unwrap()).collect()
    }

    pub fn verify_file(&self, stem: &str) -> Vec<Outcome> {
        match self.doc(stem) {
            Ok(d) => self.verify_document(stem, d),
            Err(e) => vec![fail(stem, "load", e.to_string())],
        }
    }

    /// Checks of one document, which need not belong to the corpus; other
    /// files it refers to are resolved in the corpus.
    pub fn verify_document(&self, stem: &str, doc: &Document) -> Vec<Outcome> {
        let mut out = Vec::new();
        if doc.meta_value("seed").is_some() {
            out.push(self.check_tree(stem, doc));
            return out;
        }
        let instances = match instance_docs(doc) {
            Ok(i) => i,
            Err(e) => {
                out.push(fail(stem, "instances", e.to_string()));
                return out;
            }
        };
        for (tag, d) in &instances {
            for g in &d.gens {
                let verdict = is_symmetry(&d.system, g);
                out.push(Outcome {
                    file: stem.into(),
                    check: format!("symmetry {}{tag}", g.name),
                    pass: verdict == SymmetryVerdict::Yes,
                    detail: format!("{verdict:?}").to_lowercase(),
                });
            }
        }
        let in_tables = self.docs.get(stem).is_some_and(|(s, _)| s == "tables");
        for m in &doc.meta {
            match m.key.as_str() {
                "count" | "span" => {
                    for (tag, d) in &instances {
                        if !selected(m, tag) {
                            continue;
                        }
                        out.push(check_dimension(stem, d, m, tag));
                    }
                }
                "canonical" => out.push(check_canonical(stem, doc, m)),
                "recipe" => out.push(self.check_recipe(stem, doc, m)),
                "classify" => {
                    for (tag, d) in &instances {
                        if selected(m, tag) {
                            out.push(self.check_classify(stem, d, m, tag));
                        }
                    }
                }
                "multipliers" => out.push(check_multipliers(stem, doc, m)),
                _ => {}
            }
        }
        if in_tables {
            if let Some((tag, d)) = instances.first() {
                for g in d.gens.iter().filter(|g| is_translation_or_scaling(g)) {
                    out.push(check_canonical_for(stem, d, g, tag));
                }
            }
        }
        out
    }

    fn check_recipe(&self, stem: &str, doc: &Document, m: &Meta) -> Outcome {
        let check = format!("recipe {}", m.value);
        match self.run_recipe(doc, &m.value) {
            Ok(sys) => {
                if systems_equivalent(&sys, &doc.system) {
                    pass(stem, &check, "equivalent")
                } else {
                    fail(stem, &check, diff(&doc.system, &sys))
                }
            }
            Err(e) => fail(stem, &check, e.to_string()),
        }
    }

    /// Executes `SOURCE | step | step ...`; the document's own defines are
    /// applied to the source system first.
    pub fn run_recipe(&self, doc: &Document, recipe: &str) -> Result<PdeSystem> {
        let mut parts = recipe.split('|').map(str::trim);
        let src_name = parts.next().unwrap_or_default();
        let src = self.doc(src_name)?;
        let mut sys = doc.apply_defines(&src.system)?;
        for step in parts {
            sys = apply_step(src, &sys, step)?;
        }
        Ok(sys)
    }

    fn check_classify(&self, stem: &str, d: &Document, m: &Meta, tag: &str) -> Outcome {
        let (pos, kv) = split_args(&m.value);
        let gen = pos.first().cloned().unwrap_or_default();
        let check = format!("classify {gen}{tag}");
        let res = (|| -> Result<(Locality, Locality)> {
            let expect = match kv.get("expect").map(String::as_str) {
                Some("local") => Locality::Local,
                Some("nonlocal") => Locality::Nonlocal,
                Some("undetermined") => Locality::Undetermined,
                other => return Err(Error::Invalid(format!("bad expect value {other:?}"))),
            };
            let v = d.gen(&gen)?;
            let base_doc = self.doc(required(&kv, "base")?)?;
            let base = d.apply_defines(&base_doc.system)?;
            let potentials = names_list(kv.get("potentials").map(String::as_str).unwrap_or(""));
            let link = match kv.get("lifted") {
                None => Link::Potential { potentials },
                Some(l) => {
                    let ldoc = self.doc(l)?;
                    let lifted = d.apply_defines(&ldoc.system)?;
                    let back = kv.get("back").map(|b| ldoc.map(b)).transpose()?;
                    Link::Extension {
                        lifted,
                        back,
                        potentials,
                    }
                }
            };
            let mut opts = ClassifyOptions {
                ansatz: ansatz_from(d, &kv)?,
                ..ClassifyOptions::default()
            };
            if let Some(o) = kv.get("order") {
                opts.order = o
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad order {o}")))?;
            }
            Ok((classify_nonlocal(&base, &d.system, v, &link, &opts), expect))
        })();
        match res {
            Ok((got, want)) => Outcome {
                file: stem.into(),
                check,
                pass: got == want,
                detail: format!("{got} (expected {want})"),
            },
            Err(e) => fail(stem, &check, e.to_string()),
        }
    }

    fn check_tree(&self, stem: &str, doc: &Document) -> Outcome {
        let check = "tree shape".to_string();
        match self.tree_for(doc) {
            Ok((tree, labels)) => {
                let mut got: Vec<String> = tree
                    .edges
                    .iter()
                    .map(|e| format!("{} {}", labels[e.from], labels[e.to]))
                    .collect();
                got.sort();
                let mut want: Vec<String> = doc
                    .meta("edge")
                    .map(|m| m.value.split_whitespace().collect::<Vec<_>>().join(" "))
                    .collect();
                want.sort();
                let nodes_ok = doc
                    .meta_value("nodes")
                    .map(|n| n.trim() == tree.nodes.len().to_string())
                    .unwrap_or(true);
                let detail = format!(
                    "{} nodes; edges: {}",
                    tree.nodes.len(),
                    got.join(", ")
                );
                Outcome {
                    file: stem.into(),
                    check,
                    pass: nodes_ok && got == want,
                    detail,
                }
            }
            Err(e) => fail(stem, &check, e.to_string()),
        }
    }

    /// Builds the tree of a tree document and names each node by the
    /// matching `label` file, or `?N` when none matches.
    pub fn tree_for(&self, doc: &Document) -> Result<(SystemTree, Vec<String>)> {
        let seed_name = doc.meta_value("seed").unwrap_or_default().trim().to_string();
        let seed = self.doc(&seed_name)?;
        let mut moves = Vec::new();
        for m in &doc.meta {
            match m.key.as_str() {
                "ips" => moves.push(ips_move(seed, &m.value)?),
                "exclude" => {
                    let (pos, _) = split_args(&m.value);
                    let [at, var] = pos.as_slice() else {
                        return Err(Error::Invalid(format!("bad exclude move `{}`", m.value)));
                    };
                    moves.push(Move::Exclude {
                        at: node_index(at)?,
                        var: Name::new(var),
                    });
                }
                _ => {}
            }
        }
        let tree = build_tree(&seed.system, &moves)?;
        let mut candidates = Vec::new();
        for m in doc.meta("label") {
            let stem = m.value.trim();
            candidates.push((stem.to_string(), seed.apply_defines(&self.doc(stem)?.system)?));
        }
        let labels = tree
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                if i == 0 {
                    return seed_name.clone();
                }
                candidates
                    .iter()
                    .find(|(_, s)| systems_equivalent(s, &n.system))
                    .map(|(l, _)| l.clone())
                    .unwrap_or_else(|| format!("?{i}"))
            })
            .collect();
        Ok((tree, labels))
    }
}

fn pass(file: &str, check: &str, detail: impl Into<String>) -> Outcome {
    Outcome {
        file: file.into(),
        check: check.into(),
        pass: true,
        detail: detail.into(),
    }
}

fn fail(file: &str, check: &str, detail: impl Into<String>) -> Outcome {
    Outcome {
        file: file.into(),
        check: check.into(),
        pass: false,
        detail: detail.into(),
    }
}

/// Expected and obtained equations as a line diff.
pub fn diff(expected: &PdeSystem, got: &PdeSystem) -> String {
    let e = system_to_dsl(expected);
    let g = system_to_dsl(got);
    let mut out = String::from("not equivalent\n");
    for l in e.lines().filter(|l| !g.lines().any(|x| x == *l)) {
        out.push_str(&format!("  - {l}\n"));
    }
    for l in g.lines().filter(|l| !e.lines().any(|x| x == *l)) {
        out.push_str(&format!("  + {l}\n"));
    }
    out.trim_end().to_string()
}

/// Instances of a document tagged like ` [a=-2]`, or the document itself.
fn instance_docs(doc: &Document) -> Result<Vec<(String, Document)>> {
    let inst = doc.instances()?;
    match inst.as_slice() {
        [] => Ok(vec![(String::new(), doc.clone())]),
        [(p, vals)] => vals
            .iter()
            .map(|v| Ok((format!(" [{p}={v}]"), doc.instantiate(p, v)?)))
            .collect(),
        _ => Err(Error::Invalid("at most one instance line is supported".into())),
    }
}

/// Honors a `when=v1,v2` restriction to some instance values.
fn selected(m: &Meta, tag: &str) -> bool {
    let (_, kv) = split_args(&m.value);
    let Some(when) = kv.get("when") else {
        return true;
    };
    let Some(val) = tag
        .trim()
        .trim_start_matches('[')
        .trim_end_matches(']')
        .split_once('=')
        .map(|(_, v)| v)
    else {
        return true;
    };
    let val = parse_q(val);
    when.split(',').any(|w| parse_q(w).is_some() && parse_q(w) == val)
}

fn parse_q(s: &str) -> Option<Q> {
    parse_rf(s.trim()).ok()?.as_constant()
}

/// Positional words and `key=value` options of a metadata value.
pub fn split_args(s: &str) -> (Vec<String>, BTreeMap<String, String>) {
    let mut pos = Vec::new();
    let mut kv = BTreeMap::new();
    for w in s.split_whitespace() {
        match w.split_once('=') {
            Some((k, v)) if !k.is_empty() && k.chars().all(|c| c.is_ascii_alphabetic()) => {
                kv.insert(k.to_string(), v.to_string());
            }
            _ => pos.push(w.to_string()),
        }
    }
    (pos, kv)
}

fn required<'a>(kv: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    kv.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Invalid(format!("missing {key}=")))
}

fn names_list(s: &str) -> Vec<Name> {
    s.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Name::new)
        .collect()
}

/// Parses atom expressions separated by `,` or `;` outside parentheses.
pub fn parse_atoms(s: &str) -> Result<Vec<Rf>> {
    let mut items = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' | ';' if depth == 0 => {
                items.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    items.push(&s[start..]);
    items
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_rf)
        .collect()
}

/// Ansatz from `degree=`/`atoms=` options, falling back to the document's
/// `degree` and `atoms` lines. Atoms see the document's defines.
fn ansatz_from(doc: &Document, kv: &BTreeMap<String, String>) -> Result<Ansatz> {
    let degree = match kv.get("degree").map(String::as_str).or(doc.meta_value("degree")) {
        Some(d) => d
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("bad degree {d}")))?,
        None => DEFAULT_DEGREE,
    };
    let atoms = match kv.get("atoms").map(String::as_str).or(doc.meta_value("atoms")) {
        Some(a) => parse_atoms(a)?
            .iter()
            .map(|a| doc.expand_defines(a))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    Ok(Ansatz::degree(degree).with_atoms(atoms))
}

fn check_dimension(stem: &str, d: &Document, m: &Meta, tag: &str) -> Outcome {
    let (pos, kv) = split_args(&m.value);
    let check = match m.key.as_str() {
        "count" => format!("count {}{tag}", pos.join(" ")),
        _ => format!("span{tag}"),
    };
    let res = (|| -> Result<(bool, String)> {
        let a = ansatz_from(d, &kv)?;
        let found = find_symmetries(&d.system, &a)?;
        if m.key == "count" {
            let want: usize = pos
                .first()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::Invalid(format!("bad count `{}`", m.value)))?;
            let ok = found.len() == want;
            let mut detail = format!("found {} at degree {}", found.len(), a.degree);
            if ok {
                let missing: Vec<&str> = d
                    .gens
                    .iter()
                    .filter(|g| !span_contains(&found, g))
                    .map(|g| g.name.as_str())
                    .collect();
                if !missing.is_empty() {
                    detail.push_str(&format!("; span misses {}", missing.join(", ")));
                    return Ok((false, detail));
                }
            }
            Ok((ok, detail))
        } else {
            let missing: Vec<&str> = d
                .gens
                .iter()
                .filter(|g| !span_contains(&found, g))
                .map(|g| g.name.as_str())
                .collect();
            let detail = format!("dimension {} at degree {}", found.len(), a.degree);
            if missing.is_empty() {
                Ok((true, detail))
            } else {
                Ok((false, format!("{detail}; span misses {}", missing.join(", "))))
            }
        }
    })();
    match res {
        Ok((ok, detail)) => Outcome {
            file: stem.into(),
            check,
            pass: ok,
            detail,
        },
        Err(e) => fail(stem, &check, e.to_string()),
    }
}

fn check_canonical(stem: &str, doc: &Document, m: &Meta) -> Outcome {
    let (pos, _) = split_args(&m.value);
    let check = format!("canonical {}", pos.join(" "));
    let res = (|| -> Result<bool> {
        let [g, map, var] = pos.as_slice() else {
            return Err(Error::Invalid("expected `canonical GEN MAP VAR`".into()));
        };
        let tr = doc.map(map)?;
        tr.check_inverse()?;
        Ok(verify_canonical(doc.gen(g)?, &tr, &Name::new(var)))
    })();
    match res {
        Ok(true) => pass(stem, &check, "verified"),
        Ok(false) => fail(stem, &check, "generator is not the translation in the given coordinate"),
        Err(e) => fail(stem, &check, e.to_string()),
    }
}

/// Constant fields and diagonal linear scalings.
pub fn is_translation_or_scaling(g: &VectorField) -> bool {
    let constant = g
        .xi
        .values()
        .chain(g.eta.values())
        .all(|c| c.as_constant().is_some());
    let scaling = g
        .xi
        .iter()
        .chain(g.eta.iter())
        .all(|(n, c)| {
            let own = Rf::sym(symkit::Symbol::Var(n.clone()));
            c.div(&own).ok().and_then(|q| q.as_constant()).is_some()
        });
    !g.is_zero() && (constant || scaling)
}

fn check_canonical_for(stem: &str, d: &Document, g: &VectorField, tag: &str) -> Outcome {
    let check = format!("canonical_for {}{tag}", g.name);
    match canonical_for(g, &d.system.space) {
        Ok((tr, var)) => {
            if tr.check_inverse().is_ok() && verify_canonical(g, &tr, &var) {
                pass(stem, &check, format!("translates {var}"))
            } else {
                fail(stem, &check, "constructed coordinates fail verification")
            }
        }
        Err(e) => fail(stem, &check, e.to_string()),
    }
}

fn check_multipliers(stem: &str, doc: &Document, m: &Meta) -> Outcome {
    let (pos, kv) = split_args(&m.value);
    let check = format!("multipliers {}", m.value);
    let res = (|| -> Result<(bool, String)> {
        let want: usize = pos
            .first()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Error::Invalid("expected a multiplier count".into()))?;
        let degrees: Vec<u32> = required(&kv, "degrees")?
            .split(',')
            .map(|d| d.trim().parse().map_err(|_| Error::Invalid(format!("bad degree {d}"))))
            .collect::<Result<_>>()?;
        let mut details = Vec::new();
        let mut ok = true;
        for deg in degrees {
            let a = ansatz_from(doc, &BTreeMap::new())?;
            let found = find_cl_multipliers(&doc.system, &Ansatz { degree: deg, ..a })?;
            ok &= found.len() == want;
            details.push(format!("degree {deg}: {}", found.len()));
        }
        Ok((ok, details.join(", ")))
    })();
    match res {
        Ok((ok, detail)) => Outcome {
            file: stem.into(),
            check,
            pass: ok,
            detail,
        },
        Err(e) => fail(stem, &check, e.to_string()),
    }
}

fn node_index(s: &str) -> Result<usize> {
    s.trim_start_matches('n')
        .parse()
        .map_err(|_| Error::Invalid(format!("bad node reference {s}")))
}

/// `AT GEN [map M] [exclude w ...] [names a b ...]`
fn ips_move(seed: &Document, text: &str) -> Result<Move> {
    let words: Vec<&str> = text.split_whitespace().collect();
    let [at, gen, rest @ ..] = words.as_slice() else {
        return Err(Error::Invalid(format!("bad ips move `{text}`")));
    };
    let opts = ips_options(seed, rest)?;
    Ok(Move::Ips {
        at: node_index(at)?,
        symmetry: seed.gen(gen)?.clone(),
        map: opts.map,
        exclude: opts.exclude,
        names: opts.names,
    })
}

struct IpsOptions {
    map: Option<symkit::transform::PointTransformation>,
    exclude: Vec<Name>,
    names: Option<Vec<Name>>,
}

fn ips_options(doc: &Document, words: &[&str]) -> Result<IpsOptions> {
    let mut out = IpsOptions {
        map: None,
        exclude: Vec::new(),
        names: None,
    };
    let mut mode = "";
    for w in words {
        match *w {
            "map" | "exclude" | "names" => mode = w,
            _ => match mode {
                "map" => out.map = Some(doc.map(w)?),
                "exclude" => out.exclude.push(Name::new(w)),
                "names" => out.names.get_or_insert_with(Vec::new).push(Name::new(w)),
                _ => return Err(Error::Invalid(format!("unexpected `{w}`"))),
            },
        }
    }
    Ok(out)
}

/// One recipe step; generators and maps are looked up in `src`.
fn apply_step(src: &Document, sys: &PdeSystem, step: &str) -> Result<PdeSystem> {
    let words: Vec<&str> = step.split_whitespace().collect();
    match words.as_slice() {
        ["hodograph", pairs @ ..] if !pairs.is_empty() && pairs.len() % 2 == 0 => {
            let pairs: Vec<(Name, Name)> = pairs
                .chunks(2)
                .map(|c| (Name::new(c[0]), Name::new(c[1])))
                .collect();
            hodograph(sys, &pairs)
        }
        ["ips", gen, rest @ ..] => {
            let opts = ips_options(src, rest)?;
            let mut s = sys.clone();
            for w in &opts.exclude {
                s = exclude_variable(&s, w)?.system;
            }
            Ok(ips_from_symmetry(&s, src.gen(gen)?, opts.map.as_ref(), opts.names.as_deref())?.ips)
        }
        ["exclude", vars @ ..] if !vars.is_empty() => {
            let mut s = sys.clone();
            for w in vars {
                s = exclude_variable(&s, &Name::new(w))?.system;
            }
            Ok(s)
        }
        ["transform", map] => change_variables(sys, &src.map(map)?),
        ["potential", v, rest @ ..] => {
            let (_, kv) = split_args(&rest.join(" "));
            let cl = ConservationLaw {
                density: parse_rf(required(&kv, "density")?)?,
                flux: parse_rf(required(&kv, "flux")?)?,
            };
            potential_system(sys, &cl, &Name::new(v))
        }
        ["rename", pairs @ ..] => {
            let map = pairs
                .iter()
                .map(|p| {
                    p.split_once('=')
                        .map(|(a, b)| (Name::new(a), Name::new(b)))
                        .ok_or_else(|| Error::Invalid(format!("bad rename `{p}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            rename(sys, &map)
        }
        _ => Err(Error::Invalid(format!("unknown recipe step `{step}`"))),
    }
}
