use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::atom::{Name, Symbol};
use super::poly::Q;
use super::rf::Rf;
use super::tree::{is_negative_term, Expr};

const ADD: u8 = 1;
const MUL: u8 = 2;
const POW: u8 = 4;
const ATOM: u8 = 5;

pub fn to_dsl(r: &Rf) -> String {
    expr_to_dsl(&r.to_expr())
}

pub fn to_latex(r: &Rf) -> String {
    expr_to_latex(&r.to_expr())
}

pub fn expr_to_dsl(e: &Expr) -> String {
    Printer { latex: false }.go(e).0
}

pub fn expr_to_latex(e: &Expr) -> String {
    Printer { latex: true }.go(e).0
}

struct Printer {
    latex: bool,
}

fn negate(e: &Expr) -> Expr {
    match e {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Mul(xs) => {
            let mut xs = xs.clone();
            if let Some(Expr::Num(c)) = xs.first_mut() {
                *c = -c.clone();
                if c.is_one() && xs.len() > 1 {
                    xs.remove(0);
                }
                if xs.len() == 1 {
                    return xs.pop().unwrap();
                }
                return Expr::Mul(xs);
            }
            Expr::Mul(std::iter::once(Expr::int(-1)).chain(xs).collect())
        }
        other => Expr::Mul(vec![Expr::int(-1), other.clone()]),
    }
}

impl Printer {
    fn wrap(&self, (s, p): (String, u8), need: u8) -> String {
        if p < need {
            if self.latex {
                format!("\\left({s}\\right)")
            } else {
                format!("({s})")
            }
        } else {
            s
        }
    }

    fn go(&self, e: &Expr) -> (String, u8) {
        match e {
            Expr::Num(c) => self.num(c),
            Expr::Sym(s) => (self.sym(s), ATOM),
            Expr::Func { name, derivs, args } => {
                let args: Vec<String> = args.iter().map(|a| self.go(a).0).collect();
                let head = self.func_head(name, derivs);
                (format!("{head}({})", args.join(", ")), ATOM)
            }
            Expr::Add(xs) => {
                let mut out = String::new();
                for (i, x) in xs.iter().enumerate() {
                    if i == 0 {
                        out.push_str(&self.wrap(self.go(x), ADD));
                    } else if is_negative_term(x) {
                        out.push_str(if self.latex { "-" } else { " - " });
                        out.push_str(&self.wrap(self.go(&negate(x)), MUL));
                    } else {
                        out.push_str(if self.latex { "+" } else { " + " });
                        out.push_str(&self.wrap(self.go(x), MUL));
                    }
                }
                (out, ADD)
            }
            Expr::Mul(xs) => self.mul(xs),
            Expr::Pow(b, r) => {
                if r.is_negative() && r.is_integer() {
                    return self.mul(std::slice::from_ref(e));
                }
                let base = self.wrap(self.go(b), ATOM);
                let ex = if r.is_integer() {
                    r.to_string()
                } else if self.latex {
                    format!("{}/{}", r.numer(), r.denom())
                } else {
                    format!("({}/{})", r.numer(), r.denom())
                };
                if self.latex {
                    (format!("{base}^{{{ex}}}"), POW)
                } else {
                    (format!("{base}^{ex}"), POW)
                }
            }
            Expr::Exp(a) => {
                if self.latex {
                    (format!("e^{{{}}}", self.go(a).0), POW)
                } else {
                    (format!("exp({})", self.go(a).0), ATOM)
                }
            }
            Expr::Ln(a) => {
                let head = if self.latex { "\\ln" } else { "ln" };
                (format!("{head}({})", self.go(a).0), ATOM)
            }
            Expr::Atan(a) => {
                let head = if self.latex { "\\arctan" } else { "arctan" };
                (format!("{head}({})", self.go(a).0), ATOM)
            }
            Expr::Integral { body, var, arg } => {
                if self.latex {
                    (
                        format!(
                            "\\int^{{{}}} {}\\,d{}",
                            self.go(arg).0,
                            self.go(body).0,
                            self.sym(var)
                        ),
                        MUL,
                    )
                } else {
                    (
                        format!("int({}, {}, {})", self.go(body).0, var, self.go(arg).0),
                        ATOM,
                    )
                }
            }
        }
    }

    fn num(&self, c: &Q) -> (String, u8) {
        if c.is_integer() {
            let s = c.numer().to_string();
            let p = if c.is_negative() { MUL } else { ATOM };
            return (s, p);
        }
        if self.latex {
            let sign = if c.is_negative() { "-" } else { "" };
            (
                format!("{sign}\\frac{{{}}}{{{}}}", c.numer().abs(), c.denom()),
                MUL,
            )
        } else {
            (format!("{}/{}", c.numer(), c.denom()), MUL)
        }
    }

    fn mul(&self, xs: &[Expr]) -> (String, u8) {
        let mut coeff = Q::one();
        let mut top: Vec<String> = Vec::new();
        let mut bottom: Vec<(String, u8)> = Vec::new();
        for x in xs {
            match x {
                Expr::Num(c) => coeff *= c,
                Expr::Pow(b, r) if r.is_negative() && r.is_integer() => {
                    let k = -r;
                    if k.is_one() {
                        bottom.push(self.go(b));
                    } else {
                        bottom.push(self.go(&Expr::Pow(b.clone(), k)));
                    }
                }
                _ => {
                    let s = self.go(x);
                    let s = if s.0.starts_with('-') { (s.0, 0) } else { s };
                    top.push(self.wrap(s, if self.latex { MUL } else { MUL + 1 }));
                }
            }
        }
        let neg = coeff.is_negative();
        let cn: BigInt = coeff.numer().abs();
        let cd: BigInt = coeff.denom().clone();
        if !cn.is_one() || top.is_empty() {
            top.insert(0, cn.to_string());
        }
        if !cd.is_one() {
            bottom.insert(0, (cd.to_string(), ATOM));
        }
        let sep = if self.latex { " " } else { "*" };
        let top_s = top.join(sep);
        let sign = if neg { "-" } else { "" };
        if bottom.is_empty() {
            return (format!("{sign}{top_s}"), MUL);
        }
        if self.latex {
            let bot: Vec<String> = bottom.into_iter().map(|b| self.wrap(b, MUL + 1)).collect();
            return (format!("{sign}\\frac{{{top_s}}}{{{}}}", bot.join(" ")), MUL);
        }
        let bot = if bottom.len() == 1 {
            self.wrap(bottom.pop().unwrap(), POW)
        } else {
            let parts: Vec<String> = bottom.into_iter().map(|b| self.wrap(b, MUL + 1)).collect();
            format!("({})", parts.join("*"))
        };
        (format!("{sign}{top_s}/{bot}"), MUL)
    }

    fn name(&self, n: &Name) -> String {
        if !self.latex {
            return n.to_string();
        }
        const GREEK: &[&str] = &[
            "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "kappa",
            "lambda", "mu", "nu", "xi", "rho", "sigma", "tau", "phi", "chi", "psi", "omega", "Phi",
            "Psi",
        ];
        if GREEK.contains(&n.as_str()) {
            format!("\\{n}")
        } else {
            n.to_string()
        }
    }

    fn sym(&self, s: &Symbol) -> String {
        match s {
            Symbol::Var(n) => self.name(n),
            Symbol::Jet { dep, idx } => {
                let idx: String = idx.iter().map(|n| n.as_str()).collect();
                if self.latex {
                    format!("{}_{{{idx}}}", self.name(dep))
                } else {
                    format!("{dep}_{idx}")
                }
            }
        }
    }

    fn func_head(&self, name: &Name, derivs: &[u32]) -> String {
        let n = self.name(name);
        if derivs.iter().all(|d| *d == 0) {
            return n;
        }
        if derivs.len() == 1 {
            return format!("{n}{}", "'".repeat(derivs[0] as usize));
        }
        let ds: Vec<String> = derivs.iter().map(u32::to_string).collect();
        if self.latex {
            format!("{n}^{{({})}}", ds.join(","))
        } else {
            format!("{n}[{}]", ds.join(","))
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn round(s: &str) -> String {
        parse(s).unwrap().normalize().unwrap().to_string()
    }

    #[test]
    fn prints_quotients_and_powers() {
        assert_eq!(round("u_t - u_xx - Q(u)"), "u_t - u_xx - Q(u)");
        assert_eq!(round("u^(-4/3)*u_x"), "u^(-4/3)*u_x");
        assert_eq!(round("x/2"), "x/2");
        assert_eq!(round("-x^2/(4*y)"), "-x^2/(4*y)");
    }

    #[test]
    fn latex_forms() {
        let e = parse("u_t - u_xx - Q(u)").unwrap().normalize().unwrap();
        assert_eq!(super::expr_to_latex(&e), "u_{t}-u_{xx}-Q(u)");
        let e = parse("u^(-4/3)").unwrap().normalize().unwrap();
        assert_eq!(super::expr_to_latex(&e), "u^{-4/3}");
    }
}
