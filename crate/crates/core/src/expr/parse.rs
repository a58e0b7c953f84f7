use std::collections::BTreeSet;

use num_bigint::BigInt;

use super::atom::{Name, Symbol};
use super::poly::Q;
use super::rf::Rf;
use super::tree::Expr;
use crate::error::{Error, Result};

/// Declared names for strict parsing. Unknown identifiers are rejected.
#[derive(Clone, Debug, Default)]
pub struct Decls {
    pub vars: BTreeSet<Name>,
    /// Names that may carry jet indices.
    pub deps: BTreeSet<Name>,
    /// Letters allowed as jet indices.
    pub indep: BTreeSet<Name>,
    pub funcs: BTreeSet<Name>,
}

impl Decls {
    fn check_symbol(&self, s: &Symbol) -> std::result::Result<(), String> {
        match s {
            Symbol::Var(n)
                if self.vars.contains(n) || self.deps.contains(n) || self.indep.contains(n) =>
            {
                Ok(())
            }
            Symbol::Var(n) => Err(n.to_string()),
            Symbol::Jet { dep, idx } => {
                if !self.deps.contains(dep) {
                    return Err(s.to_string());
                }
                match idx.iter().find(|i| !self.indep.contains(*i)) {
                    Some(_) => Err(s.to_string()),
                    None => Ok(()),
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Prime(u32),
    Op(char),
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize, usize)>,
}

fn pos_of(src: &str, byte: usize) -> (usize, usize) {
    let before = &src[..byte];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rsplit('\n')
        .next()
        .map(|l| l.chars().count())
        .unwrap_or(0)
        + 1;
    (line, col)
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize, usize)>> {
        let mut lx = Lexer {
            src,
            toks: Vec::new(),
        };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            let (line, col) = pos_of(src, i);
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n: BigInt = src[start..i].parse().unwrap();
                lx.toks.push((Tok::Num(n), line, col));
            } else if c.is_ascii_alphabetic() {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                lx.toks
                    .push((Tok::Ident(src[start..i].to_string()), line, col));
            } else if c == '\'' {
                let mut k = 0;
                while i < bytes.len() && bytes[i] == b'\'' {
                    i += 1;
                    k += 1;
                }
                lx.toks.push((Tok::Prime(k), line, col));
            } else if "+-*/^(),[]".contains(c) {
                lx.toks.push((Tok::Op(c), line, col));
                i += 1;
            } else {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!(
                        "unexpected character `{}`",
                        lx.src[i..].chars().next().unwrap()
                    ),
                });
            }
        }
        Ok(lx.toks)
    }
}

struct Parser<'d> {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
    decls: Option<&'d Decls>,
}

/// Parses an expression, accepting any identifier. `name_x...` denotes a jet.
pub fn parse(text: &str) -> Result<Expr> {
    parse_inner(text, None)
}

/// Parses against declared names; undeclared identifiers are an error.
pub fn parse_with(text: &str, decls: &Decls) -> Result<Expr> {
    parse_inner(text, Some(decls))
}

/// Parses straight into normal form.
pub fn parse_rf(text: &str) -> Result<Rf> {
    Rf::from_expr(&parse(text)?)
}

fn parse_inner(text: &str, decls: Option<&Decls>) -> Result<Expr> {
    let toks = Lexer::run(text)?;
    let end = pos_of(text, text.len());
    let mut p = Parser {
        toks,
        pos: 0,
        end,
        decls,
    };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn err(&self, msg: &str) -> Error {
        let (line, col) = self
            .toks
            .get(self.pos)
            .map(|t| (t.1, t.2))
            .unwrap_or(self.end);
        Error::Syntax {
            line,
            col,
            msg: msg.to_string(),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                terms.push(self.term()?.neg());
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::Add(terms)
        })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat('*') {
                factors.push(self.unary()?);
            } else if self.eat('/') {
                let d = self.unary()?;
                factors.push(Expr::Pow(Box::new(d), Q::from_integer((-1).into())));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            Expr::Mul(factors)
        })
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let euler = matches!(self.peek(), Some(Tok::Ident(n)) if n == "e");
        let base = self.primary()?;
        if self.eat('^') {
            let at = self.pos;
            let ex = self.unary()?;
            // A bare `e` raised to anything is the exponential.
            if euler {
                return Ok(Expr::Exp(Box::new(ex)));
            }
            let r = Rf::from_expr(&ex)?.as_constant().ok_or_else(|| {
                let (line, col) = (self.toks[at].1, self.toks[at].2);
                Error::Syntax {
                    line,
                    col,
                    msg: "exponent must be a rational constant".into(),
                }
            })?;
            return Ok(Expr::Pow(Box::new(base), r));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Expr>> {
        self.expect('(')?;
        let mut out = vec![self.expr()?];
        while self.eat(',') {
            out.push(self.expr()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err("unexpected end of input"));
        };
        match tok {
            Tok::Num(n) => {
                self.pos += 1;
                Ok(Expr::Num(Q::from_integer(n)))
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let at = self.pos;
                self.pos += 1;
                self.ident(name, at)
            }
            _ => Err(self.err("expected an operand")),
        }
    }

    fn ident(&mut self, name: String, at: usize) -> Result<Expr> {
        let builtin1 = |e: Expr, n: &str| match n {
            "exp" => Expr::Exp(Box::new(e)),
            "ln" | "log" => Expr::Ln(Box::new(e)),
            "arctan" => Expr::Atan(Box::new(e)),
            _ => Expr::Pow(Box::new(e), Q::new(1.into(), 2.into())),
        };
        match (name.as_str(), self.peek()) {
            ("exp" | "ln" | "log" | "arctan" | "sqrt", Some(Tok::Op('('))) => {
                let mut a = self.args()?;
                if a.len() != 1 {
                    return Err(self.err_at(at, &format!("`{name}` takes one argument")));
                }
                return Ok(builtin1(a.pop().unwrap(), &name));
            }
            ("int", Some(Tok::Op('('))) => {
                // The integration variable is bound, so names are checked after parsing.
                let decls = self.decls.take();
                let a = self.args();
                self.decls = decls;
                let a = a?;
                let [body, var, arg]: [Expr; 3] = a
                    .try_into()
                    .map_err(|_| self.err_at(at, "`int` takes (body, variable, upper limit)"))?;
                let Expr::Sym(var) = var else {
                    return Err(self.err_at(at, "integration variable must be a symbol"));
                };
                if let Some(d) = self.decls {
                    let mut symbols = Rf::from_expr(&body)?.symbols();
                    symbols.remove(&var);
                    symbols.extend(Rf::from_expr(&arg)?.symbols());
                    for s in &symbols {
                        d.check_symbol(s).map_err(Error::UnknownSymbol)?;
                    }
                    for f in Rf::from_expr(&body)?.func_names() {
                        if !d.funcs.contains(&f) {
                            return Err(Error::UnknownSymbol(f.to_string()));
                        }
                    }
                }
                return Ok(Expr::Integral {
                    body: Box::new(body),
                    var,
                    arg: Box::new(arg),
                });
            }
            _ => {}
        }
        let mut derivs: Option<Vec<u32>> = None;
        if let Some(Tok::Prime(k)) = self.peek().cloned() {
            self.pos += 1;
            derivs = Some(vec![k]);
        } else if self.peek() == Some(&Tok::Op('[')) && self.is_func_call_after_bracket() {
            self.pos += 1;
            let mut ds = Vec::new();
            loop {
                match self.peek().cloned() {
                    Some(Tok::Num(n)) => {
                        self.pos += 1;
                        ds.push(
                            u32::try_from(n).map_err(|_| self.err("derivative order too large"))?,
                        );
                    }
                    _ => return Err(self.err("expected a derivative order")),
                }
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(']')?;
            derivs = Some(ds);
        }
        if self.peek() == Some(&Tok::Op('(')) {
            if let Some(d) = self.decls {
                if !d.funcs.contains(&Name::new(&name)) {
                    return Err(Error::UnknownSymbol(name));
                }
            }
            let args = self.args()?;
            let derivs = match derivs {
                Some(ds) if ds.len() == args.len() => ds,
                Some(ds) if ds.len() == 1 && args.len() > 1 => {
                    return Err(self.err_at(
                        at,
                        &format!(
                            "primes need a single argument, got {} for {name}",
                            args.len() + ds.len() - 1
                        ),
                    ))
                }
                Some(_) => return Err(self.err_at(at, "derivative orders do not match arguments")),
                None => vec![0; args.len()],
            };
            return Ok(Expr::Func {
                name: Name::from(name),
                derivs,
                args,
            });
        }
        if derivs.is_some() {
            return Err(self.err("expected `(` after derivative marker"));
        }
        let sym = Symbol::parse_name(&name);
        if let Some(d) = self.decls {
            d.check_symbol(&sym).map_err(Error::UnknownSymbol)?;
        }
        Ok(Expr::Sym(sym))
    }

    fn is_func_call_after_bracket(&self) -> bool {
        let mut i = self.pos + 1;
        while let Some((t, _, _)) = self.toks.get(i) {
            match t {
                Tok::Op(']') => return matches!(self.toks.get(i + 1), Some((Tok::Op('('), _, _))),
                Tok::Num(_) | Tok::Op(',') => i += 1,
                _ => return false,
            }
        }
        false
    }

    fn err_at(&self, at: usize, msg: &str) -> Error {
        let (line, col) = self.toks.get(at).map(|t| (t.1, t.2)).unwrap_or(self.end);
        Error::Syntax {
            line,
            col,
            msg: msg.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jets_sort_indices() {
        assert_eq!(parse_rf("u_xt").unwrap(), parse_rf("u_tx").unwrap());
    }

    #[test]
    fn reports_position() {
        match parse("u_t +\n  * u") {
            Err(Error::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_unknown() {
        let mut d = Decls::default();
        d.deps.insert("u".into());
        d.indep.insert("x".into());
        assert!(parse_with("u_x + u", &d).is_ok());
        assert!(matches!(
            parse_with("u_t", &d),
            Err(Error::UnknownSymbol(_))
        ));
        assert!(matches!(
            parse_with("Q(u)", &d),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn exponent_must_be_constant() {
        assert!(parse("u^x").is_err());
        assert!(parse("u^(-4/3)").is_ok());
    }

    #[test]
    fn e_power_is_exponential() {
        assert_eq!(parse_rf("e^t").unwrap(), parse_rf("exp(t)").unwrap());
        assert_eq!(parse_rf("e^(2*u)").unwrap(), parse_rf("exp(u)^2").unwrap());
    }

    #[test]
    fn formal_derivatives() {
        let e = parse_rf("Q''(u) + F[1,0](x, y)").unwrap();
        assert_eq!(e.to_string(), "F[1,0](x, y) + Q''(u)");
    }
}
