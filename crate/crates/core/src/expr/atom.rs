use std::fmt;
use std::sync::Arc;

use super::rf::Rf;

/// Interned-by-value identifier. Cloning is a reference-count bump.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s.as_str()))
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// A plain symbol or a jet coordinate `u_J`.
///
/// The multi-index of a jet is kept sorted so that mixed partials commute:
/// `u_xt` and `u_tx` are the same symbol.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Symbol {
    Var(Name),
    Jet { dep: Name, idx: Vec<Name> },
}

impl Symbol {
    pub fn var(name: &str) -> Self {
        Symbol::Var(Name::new(name))
    }

    /// Builds `dep_J`; an empty multi-index yields the plain variable.
    pub fn jet<I: IntoIterator<Item = Name>>(dep: &Name, idx: I) -> Self {
        let mut idx: Vec<Name> = idx.into_iter().collect();
        if idx.is_empty() {
            return Symbol::Var(dep.clone());
        }
        idx.sort();
        Symbol::Jet {
            dep: dep.clone(),
            idx,
        }
    }

    /// Parses `u_tx` style names; anything without an underscore is a plain variable.
    /// Every character after the underscore is one single-letter index.
    pub fn parse_name(s: &str) -> Self {
        match s.split_once('_') {
            Some((dep, idx)) if !dep.is_empty() && !idx.is_empty() => Symbol::jet(
                &Name::new(dep),
                idx.chars().map(|c| Name::new(&c.to_string())),
            ),
            _ => Symbol::Var(Name::new(s)),
        }
    }

    /// Base name: the variable itself, or the dependent variable of a jet.
    pub fn base(&self) -> &Name {
        match self {
            Symbol::Var(n) => n,
            Symbol::Jet { dep, .. } => dep,
        }
    }

    pub fn idx(&self) -> &[Name] {
        match self {
            Symbol::Var(_) => &[],
            Symbol::Jet { idx, .. } => idx,
        }
    }

    pub fn order(&self) -> usize {
        self.idx().len()
    }

    /// `u_J -> u_{J+x}`.
    pub fn differentiate(&self, x: &Name) -> Symbol {
        let mut idx = self.idx().to_vec();
        idx.push(x.clone());
        Symbol::jet(self.base(), idx)
    }

    pub fn count(&self, x: &Name) -> usize {
        self.idx().iter().filter(|n| *n == x).count()
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Var(n) => write!(f, "{n}"),
            Symbol::Jet { dep, idx } => {
                write!(f, "{dep}_")?;
                for i in idx {
                    write!(f, "{i}")?;
                }
                Ok(())
            }
        }
    }
}

/// Algebraically independent building blocks of rational-function normal forms.
///
/// Variant order fixes the atom ordering used for printing and canonical forms:
/// symbols first, then opaque functions, then elementary atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AtomKind {
    Sym(Symbol),
    /// Opaque function with a formal derivative order per argument.
    Func {
        name: Name,
        derivs: Vec<u32>,
        args: Vec<Rf>,
    },
    Exp(Rf),
    Ln(Rf),
    Atan(Rf),
    /// `base^(1/q)`.
    Root {
        base: Rf,
        q: u32,
    },
    /// Antiderivative `∫^arg body(var) d var`, differentiating to `body(arg)·arg'`.
    Integral {
        body: Rf,
        var: Symbol,
        arg: Rf,
    },
}

pub type Atom = Arc<AtomKind>;

pub fn sym_atom(s: Symbol) -> Atom {
    Arc::new(AtomKind::Sym(s))
}

impl AtomKind {
    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            AtomKind::Sym(s) => Some(s),
            _ => None,
        }
    }
}
