//! Line-oriented document format for systems, generators and maps.
//!
//! ```text
//! # reaction-diffusion with a cubic source
//! indep x t
//! dep u
//! func Q(u)
//! param lambda
//! eq u_t = u_xx + u^3
//! gen X3: xi_x = -x; xi_t = -2*t; eta_u = u
//! map scale: X = x*u; T = t/x^2; U = -ln(x); inverse x = exp(-U); t = T*exp(-2*U); u = X*exp(U)
//! count 3
//! ```
//!
//! A trailing `\` continues a line. Directives other than the declarations
//! above are kept as metadata for the corpus runner.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::{parse_with, Decls, Name, Rf, Symbol, Q};
use crate::jet::{JetSpace, PdeSystem};
use crate::transform::PointTransformation;
use crate::vfield::VectorField;

/// Metadata keys understood by the corpus runner and tree builder.
pub const META_KEYS: &[&str] = &[
    "count", "degree", "atoms", "instance", "span", "recipe", "canonical", "seed", "ips",
    "exclude", "edge", "label", "classify", "multipliers", "nodes",
];

#[derive(Clone, Debug, PartialEq)]
pub struct MapSpec {
    pub name: String,
    pub forward: Vec<(Name, Rf)>,
    pub inverse: Vec<(Name, Rf)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Meta {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug)]
pub struct Document {
    pub name: String,
    /// Text the document was parsed from, kept for re-parsing instances.
    pub source: String,
    pub system: PdeSystem,
    pub gens: Vec<VectorField>,
    pub maps: Vec<MapSpec>,
    pub meta: Vec<Meta>,
    /// `define` bindings already applied to this document, kept so they can
    /// be applied to other systems stated with the generic function.
    pub defines: Vec<(Name, Vec<Symbol>, Rf)>,
}

impl Document {
    pub fn gen(&self, name: &str) -> Result<&VectorField> {
        self.gens
            .iter()
            .find(|g| g.name == name)
            .ok_or_else(|| Error::Invalid(format!("no generator named {name} in {}", self.name)))
    }

    pub fn map_spec(&self, name: &str) -> Result<&MapSpec> {
        self.maps
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Invalid(format!("no map named {name} in {}", self.name)))
    }

    /// The named map as a transformation of this document's coordinates.
    pub fn map(&self, name: &str) -> Result<PointTransformation> {
        let m = self.map_spec(name)?;
        PointTransformation::new(
            &m.name,
            &self.system.space,
            m.forward.clone(),
            m.inverse.clone(),
        )
    }

    pub fn meta(&self, key: &str) -> impl Iterator<Item = &Meta> {
        let key = key.to_string();
        self.meta.iter().filter(move |m| m.key == key)
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta(key).next().map(|m| m.value.as_str())
    }

    /// `sys` with this document's defined functions substituted.
    pub fn apply_defines(&self, sys: &PdeSystem) -> Result<PdeSystem> {
        let eqs = sys
            .equations
            .iter()
            .map(|e| self.expand_defines(e))
            .collect::<Result<Vec<_>>>()?;
        let mut funcs = sys.funcs.clone();
        funcs.retain(|(g, _)| !self.defines.iter().any(|(f, _, _)| f == g));
        Ok(PdeSystem::new(sys.space.clone(), eqs).with_decls(sys.params.clone(), funcs))
    }

    /// `e` with this document's defined functions substituted.
    pub fn expand_defines(&self, e: &Rf) -> Result<Rf> {
        let mut e = e.clone();
        for (f, params, body) in &self.defines {
            e = e.subs_func(f, params, body)?;
        }
        Ok(e)
    }

    /// Values listed by `instance NAME = v1, v2, ...`, one entry per parameter.
    pub fn instances(&self) -> Result<Vec<(Name, Vec<Q>)>> {
        self.meta("instance")
            .map(|m| {
                let (name, vals) = m.value.split_once('=').ok_or_else(|| Error::Syntax {
                    line: m.line,
                    col: 1,
                    msg: "expected `instance NAME = values`".into(),
                })?;
                let vals = vals
                    .split(',')
                    .map(|v| {
                        crate::expr::parse_rf(v.trim())?
                            .as_constant()
                            .ok_or_else(|| Error::Syntax {
                                line: m.line,
                                col: 1,
                                msg: format!("instance value `{}` is not a constant", v.trim()),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((Name::new(name.trim()), vals))
            })
            .collect()
    }

    /// Re-parses the document with `param` replaced by a constant, so that
    /// parametric exponents such as `u^mu` become concrete.
    pub fn instantiate(&self, param: &Name, value: &Q) -> Result<Document> {
        let mut doc = parse_with_values(&self.source, &self.name, &[(param.clone(), value.clone())])?;
        doc.name = format!("{}[{param}={value}]", self.name);
        Ok(doc)
    }

    /// One document per instance value, or just this one without instances.
    pub fn expand_instances(&self) -> Result<Vec<Document>> {
        let inst = self.instances()?;
        match inst.as_slice() {
            [] => Ok(vec![self.clone()]),
            [(p, vals)] => vals.iter().map(|v| self.instantiate(p, v)).collect(),
            _ => Err(Error::Invalid(format!(
                "{}: at most one instance line is supported",
                self.name
            ))),
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        col: 1,
        msg: msg.into(),
    }
}

/// Shifts an expression-level syntax error to its place in the file.
fn relocate(e: Error, line: usize, col: usize) -> Error {
    match e {
        Error::Syntax { line: l, col: c, msg } => Error::Syntax {
            line: line + l - 1,
            col: if l == 1 { col + c - 1 } else { c },
            msg,
        },
        other => other,
    }
}

#[derive(Default)]
struct Builder {
    indep: Vec<Name>,
    deps: Vec<Name>,
    params: Vec<Name>,
    funcs: Vec<(Name, usize)>,
    eqs: Vec<(String, usize, usize)>,
    gens: Vec<(String, String, usize, usize)>,
    maps: Vec<(String, String, usize, usize)>,
    meta: Vec<Meta>,
    label: Option<String>,
    defines: Vec<(String, usize, usize)>,
    values: Vec<(Name, Q)>,
}

impl Builder {
    fn decls(&self, vars: &[Name], deps: &[Name], indep: &[Name]) -> Decls {
        let mut d = Decls::default();
        d.vars.extend(vars.iter().cloned());
        d.vars.extend(self.params.iter().cloned());
        d.deps.extend(deps.iter().cloned());
        d.indep.extend(indep.iter().cloned());
        d.funcs.extend(self.funcs.iter().map(|(f, _)| f.clone()));
        d
    }

    fn expr(&self, text: &str, d: &Decls, line: usize, col: usize) -> Result<Rf> {
        let text = replace_identifiers(text, &self.values);
        let e = parse_with(&text, d).map_err(|e| relocate(e, line, col))?;
        Rf::from_expr(&e).map_err(|e| relocate(e, line, col))
    }
}

/// Replaces whole identifiers by parenthesized constants.
fn replace_identifiers(text: &str, values: &[(Name, Q)]) -> String {
    if values.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        match values.iter().find(|(n, _)| n.as_str() == word) {
            Some((_, v)) => out.push_str(&format!("({v})")),
            None => out.push_str(word),
        }
        word.clear();
    };
    for c in text.chars() {
        if c.is_ascii_alphanumeric() || (c == '_' && !word.is_empty()) {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn names(rest: &str, line: usize) -> Result<Vec<Name>> {
    rest.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            if is_ident(s) {
                Ok(Name::new(s))
            } else {
                Err(syntax(line, format!("`{s}` is not an identifier")))
            }
        })
        .collect()
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|h| h.is_ascii_alphabetic()) && c.all(|h| h.is_ascii_alphanumeric())
}

/// `Q(u), K(u)` or `c(u)` with arity taken from the argument list.
fn func_decls(rest: &str, line: usize) -> Result<Vec<(Name, usize)>> {
    let mut out = Vec::new();
    let mut s = rest.trim();
    while !s.is_empty() {
        let open = s
            .find('(')
            .ok_or_else(|| syntax(line, "expected `name(args)`"))?;
        let close = s[open..]
            .find(')')
            .map(|c| c + open)
            .ok_or_else(|| syntax(line, "unclosed `(`"))?;
        let name = s[..open].trim();
        if !is_ident(name) {
            return Err(syntax(line, format!("`{name}` is not a function name")));
        }
        let arity = names(&s[open + 1..close], line)?.len();
        if arity == 0 {
            return Err(syntax(line, format!("{name} needs at least one argument")));
        }
        out.push((Name::new(name), arity));
        s = s[close + 1..].trim_start_matches(|c: char| c == ',' || c.is_whitespace());
    }
    Ok(out)
}

/// `lhs = rhs` as `lhs - rhs`; a lone expression means `expr = 0`.
fn equation_text(s: &str, line: usize) -> Result<String> {
    let parts: Vec<&str> = s.split('=').collect();
    match parts.as_slice() {
        [e] => Ok(e.to_string()),
        [l, r] => Ok(format!("({}) - ({})", l.trim(), r.trim())),
        _ => Err(syntax(line, "an equation has at most one `=`")),
    }
}

/// Parses a document. A parametric document with `instance` lines stands
/// for its first instance, since a symbolic parameter may sit where only a
/// constant is allowed (an exponent, say).
pub fn parse_document(text: &str, name: &str) -> Result<Document> {
    parse_with_values(text, name, &first_instance(text))
}

fn first_instance(text: &str) -> Vec<(Name, Q)> {
    text.lines()
        .filter_map(|l| l.split('#').next()?.trim().strip_prefix("instance "))
        .filter_map(|rest| {
            let (n, vals) = rest.split_once('=')?;
            let v = crate::expr::parse_rf(vals.split(',').next()?.trim()).ok()?;
            Some((Name::new(n.trim()), v.as_constant()?))
        })
        .take(1)
        .collect()
}

fn parse_with_values(text: &str, name: &str, values: &[(Name, Q)]) -> Result<Document> {
    let mut b = Builder {
        values: values.to_vec(),
        ..Default::default()
    };
    let mut pending = String::new();
    let mut start = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if pending.is_empty() {
            start = line_no;
        }
        if let Some(head) = content.trim_end().strip_suffix('\\') {
            pending.push_str(head);
            pending.push(' ');
            continue;
        }
        pending.push_str(content);
        let logical = std::mem::take(&mut pending);
        let trimmed = logical.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (key, rest) = trimmed
            .split_once(char::is_whitespace)
            .map(|(k, r)| (k, r.trim()))
            .unwrap_or((trimmed, ""));
        let col = logical.find(rest).map(|c| c + 1).unwrap_or(1);
        match key {
            "system" => b.label = Some(rest.to_string()),
            "indep" => b.indep.extend(names(rest, start)?),
            "dep" => b.deps.extend(names(rest, start)?),
            "param" => b.params.extend(names(rest, start)?),
            "func" => b.funcs.extend(func_decls(rest, start)?),
            "eq" => b.eqs.push((equation_text(rest, start)?, start, col)),
            "define" => b.defines.push((rest.to_string(), start, col)),
            "gen" | "map" => {
                let (n, body) = rest
                    .split_once(':')
                    .ok_or_else(|| syntax(start, format!("expected `{key} NAME: ...`")))?;
                let n = n.trim();
                if n.is_empty() || n.contains(char::is_whitespace) {
                    return Err(syntax(start, format!("bad {key} name `{n}`")));
                }
                let entry = (n.to_string(), body.to_string(), start, col);
                if key == "gen" {
                    b.gens.push(entry);
                } else {
                    b.maps.push(entry);
                }
            }
            k if META_KEYS.contains(&k) => b.meta.push(Meta {
                key: k.to_string(),
                value: rest.to_string(),
                line: start,
            }),
            k => return Err(syntax(start, format!("unknown directive `{k}`"))),
        }
    }
    if !pending.trim().is_empty() {
        return Err(syntax(start, "file ends inside a continued line"));
    }
    finish(b, name, text)
}

fn assignments(body: &str, line: usize) -> Result<Vec<(String, String)>> {
    body.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|a| {
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| syntax(line, format!("expected `name = expr` in `{a}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

/// `K(s) = body`: the function name, its formal parameters and the body.
fn parse_define(b: &Builder, text: &str, line: usize, col: usize) -> Result<(Name, Vec<Symbol>, Rf)> {
    let (head, body) = text
        .split_once('=')
        .ok_or_else(|| syntax(line, "expected `define F(args) = expr`"))?;
    let (f, arity) = func_decls(head, line)?
        .into_iter()
        .next()
        .ok_or_else(|| syntax(line, "expected a function head"))?;
    if !b.funcs.iter().any(|(g, n)| *g == f && *n == arity) {
        return Err(syntax(line, format!("define of undeclared function {f}")));
    }
    let open = head.find('(').unwrap_or(0);
    let params = names(head[open + 1..].trim_end().trim_end_matches(')'), line)?;
    let mut d = b.decls(&params, &[], &[]);
    d.vars.extend(b.indep.iter().cloned());
    d.funcs.remove(&f);
    let value = b.expr(body.trim(), &d, line, col)?;
    Ok((f, params.into_iter().map(Symbol::Var).collect(), value))
}

fn finish(mut b: Builder, name: &str, source: &str) -> Result<Document> {
    if let Some((n, _)) = b.values.iter().find(|(n, _)| !b.params.contains(n)) {
        return Err(Error::Invalid(format!("{n} is not a declared parameter")));
    }
    let values: Vec<Name> = b.values.iter().map(|(n, _)| n.clone()).collect();
    b.params.retain(|p| !values.contains(p));
    let mut seen = std::collections::BTreeSet::new();
    for n in b.indep.iter().chain(&b.deps).chain(&b.params) {
        if !seen.insert(n.clone()) {
            return Err(Error::Invalid(format!("{n} is declared twice")));
        }
    }
    let space = JetSpace {
        indep: b.indep.clone(),
        deps: b.deps.clone(),
    };
    let coords: Vec<Name> = b.indep.iter().chain(&b.deps).cloned().collect();
    let d = b.decls(&b.indep, &b.deps, &b.indep);
    let eqs = b
        .eqs
        .iter()
        .map(|(t, l, c)| b.expr(t, &d, *l, *c))
        .collect::<Result<Vec<_>>>()?;
    let point = b.decls(&coords, &[], &[]);
    let mut gens = Vec::new();
    for (gname, body, line, col) in &b.gens {
        let mut v = VectorField::new(gname);
        for (k, e) in assignments(body, *line)? {
            let value = b.expr(&e, &point, *line, *col)?;
            if let Some(x) = k.strip_prefix("xi_").filter(|x| space.is_indep(&Name::new(x))) {
                v.set_xi(&Name::new(x), value);
            } else if let Some(u) = k
                .strip_prefix("eta_")
                .filter(|u| space.dep_index(&Name::new(u)).is_some())
            {
                v.set_eta(&Name::new(u), value);
            } else {
                return Err(syntax(*line, format!("unknown component `{k}` in {gname}")));
            }
        }
        gens.push(v);
    }
    let mut maps = Vec::new();
    for (mname, body, line, col) in &b.maps {
        let (fwd, inv) = match body.split_once("inverse") {
            Some((f, i)) => (f, i),
            None => return Err(syntax(*line, format!("map {mname} needs an `inverse` part"))),
        };
        let forward = assignments(fwd, *line)?
            .into_iter()
            .map(|(k, e)| Ok((Name::new(&k), b.expr(&e, &point, *line, *col)?)))
            .collect::<Result<Vec<_>>>()?;
        let new_coords: Vec<Name> = forward.iter().map(|(k, _)| k.clone()).collect();
        let new_decls = b.decls(&new_coords, &[], &[]);
        let inverse = assignments(inv, *line)?
            .into_iter()
            .map(|(k, e)| Ok((Name::new(&k), b.expr(&e, &new_decls, *line, *col)?)))
            .collect::<Result<Vec<_>>>()?;
        maps.push(MapSpec {
            name: mname.clone(),
            forward,
            inverse,
        });
    }
    let mut eqs = eqs;
    let mut funcs = b.funcs.clone();
    let mut defines = Vec::new();
    for (text, line, col) in &b.defines {
        let (f, params, body) = parse_define(&b, text, *line, *col)?;
        defines.push((f.clone(), params.clone(), body.clone()));
        for e in eqs.iter_mut() {
            *e = e.subs_func(&f, &params, &body)?;
        }
        for g in gens.iter_mut() {
            *g = g.subs_func(&f, &params, &body)?;
        }
        for m in maps.iter_mut() {
            for (_, e) in m.forward.iter_mut().chain(m.inverse.iter_mut()) {
                *e = e.subs_func(&f, &params, &body)?;
            }
        }
        funcs.retain(|(g, _)| *g != f);
    }
    let system = PdeSystem::new(space, eqs).with_decls(b.params.clone(), funcs);
    Ok(Document {
        name: b.label.unwrap_or_else(|| name.to_string()),
        source: source.to_string(),
        system,
        gens,
        maps,
        meta: b.meta,
        defines,
    })
}

pub fn read_document(path: &std::path::Path) -> Result<Document> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_document(&text, &stem).map_err(|e| match e {
        Error::Syntax { line, col, msg } => {
            Error::Invalid(format!("{}:{line}:{col}: {msg}", path.display()))
        }
        other => Error::Invalid(format!("{}: {other}", path.display())),
    })
}

/// Declarations and equations of a system in document syntax.
pub fn system_to_dsl(sys: &PdeSystem) -> String {
    let mut out = String::new();
    let join = |v: &[Name]| {
        v.iter()
            .map(Name::as_str)
            .collect::<Vec<_>>()
            .join(" ")
    };
    let _ = writeln!(out, "indep {}", join(&sys.space.indep));
    let _ = writeln!(out, "dep {}", join(&sys.space.deps));
    let mut funcs = sys.funcs.clone();
    for e in &sys.equations {
        for f in e.func_names() {
            if !funcs.iter().any(|(g, _)| *g == f) {
                funcs.push((f, 1));
            }
        }
    }
    for (f, n) in &funcs {
        let args: Vec<String> = (0..*n).map(|i| format!("a{}", i + 1)).collect();
        let _ = writeln!(out, "func {f}({})", args.join(", "));
    }
    if !sys.params.is_empty() {
        let _ = writeln!(out, "param {}", join(&sys.params));
    }
    for e in &sys.equations {
        let _ = writeln!(out, "eq {e} = 0");
    }
    out
}

/// Equations as aligned LaTeX.
pub fn system_to_latex(sys: &PdeSystem) -> String {
    let lines: Vec<String> = sys
        .equations
        .iter()
        .map(|e| format!("{}=0", crate::expr::print::to_latex(e)))
        .collect();
    if lines.len() == 1 {
        return lines[0].clone();
    }
    let body: Vec<String> = lines.iter().map(|l| format!("  &{l}")).collect();
    format!("\\begin{{aligned}}\n{}\n\\end{{aligned}}", body.join(" \\\\\n"))
}
