//! Tagged-record text form of distributions and losses.
//!
//! ```text
//! categorical(0.25,0.75)   gaussian(0,1)   student_t(0,1,4)   truncnorm(-1,0.3,-inf,0)
//! mixture(0.5:gaussian(-1,1),0.5:gaussian(1,1))
//! dirichlet(2,2)   nig(0,1,2,1)   dirac(0.5:categorical(1,0),0.5:categorical(0,1))
//! convex(0.3,dirichlet(1,1),dirichlet(4,4))
//! bayes-ce(0)   bayes-brier(1)   der(1)   mean(brier)   affine(3.7,0,0,1,der(1))
//! ```
//!
//! Numbers are written with the shortest representation that parses back to
//! the same value, so printing then parsing is lossless.

use std::fmt::{self, Display, Formatter};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::first_order::{Categorical, FiniteMixture, FirstOrderDist, FirstOrderLoss, Gaussian, StudentT, TruncatedGaussian};
use crate::losses::{LossSpec, Quadratic};
use crate::scalar::Real;
use crate::second_order::{mix, DiracMix, Dirichlet, Nig, SecondOrderDist};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(String),
    Word(String),
    Call(String, Vec<Node>),
    Weighted(String, Box<Node>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn atom(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_alphanumeric() || matches!(c, '.' | '-' | '+' | '_') {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if start == self.pos {
            return Err(Error::Parse(format!("expected a name or number at offset {start} of {:?}", self.src)));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn node(&mut self) -> Result<Node> {
        let head = self.atom()?;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.peek() == Some(')') {
                    self.pos += 1;
                    return Ok(Node::Call(head, args));
                }
                loop {
                    args.push(self.node()?);
                    match self.peek() {
                        Some(',') => self.pos += 1,
                        Some(')') => {
                            self.pos += 1;
                            break;
                        }
                        other => {
                            return Err(Error::Parse(format!("expected ',' or ')' at offset {}, found {other:?}", self.pos)))
                        }
                    }
                }
                Ok(Node::Call(head, args))
            }
            Some(':') => {
                self.pos += 1;
                Ok(Node::Weighted(head, Box::new(self.node()?)))
            }
            _ => {
                let numeric = head.starts_with(|c: char| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'))
                    || matches!(head.to_ascii_lowercase().as_str(), "inf" | "infinity");
                Ok(if numeric { Node::Num(head) } else { Node::Word(head) })
            }
        }
    }
}

fn parse_tree(src: &str) -> Result<Node> {
    let mut p = Parser { src, pos: 0 };
    let node = p.node()?;
    if p.peek().is_some() {
        return Err(Error::Parse(format!("trailing input at offset {} of {src:?}", p.pos)));
    }
    Ok(node)
}

fn num<T: Real>(node: &Node) -> Result<T> {
    match node {
        Node::Num(s) => s.parse::<T>().map_err(|_| Error::Parse(format!("invalid number {s:?}"))),
        other => Err(Error::Parse(format!("expected a number, found {other:?}"))),
    }
}

fn nums<T: Real>(args: &[Node]) -> Result<Vec<T>> {
    args.iter().map(num).collect()
}

fn arity(name: &str, args: &[Node], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::Parse(format!("{name} takes {n} arguments, got {}", args.len())))
    }
}

fn weighted<T: Real>(args: &[Node], allow_bare: bool) -> Result<(Vec<T>, Vec<FirstOrderDist<T>>)> {
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    for a in args {
        match a {
            Node::Weighted(w, inner) => {
                weights.push(num(&Node::Num(w.clone()))?);
                atoms.push(first_order_from(inner)?);
            }
            bare if allow_bare && args.len() == 1 => {
                weights.push(T::one());
                atoms.push(first_order_from(bare)?);
            }
            other => return Err(Error::Parse(format!("expected weight:distribution, found {other:?}"))),
        }
    }
    Ok((weights, atoms))
}

fn first_order_from<T: Real>(node: &Node) -> Result<FirstOrderDist<T>> {
    let Node::Call(name, args) = node else {
        return Err(Error::Parse(format!("expected a first-order distribution, found {node:?}")));
    };
    Ok(match name.as_str() {
        "categorical" => Categorical::new(nums(args)?)?.into(),
        "gaussian" => {
            arity(name, args, 2)?;
            let v = nums::<T>(args)?;
            Gaussian::new(v[0], v[1])?.into()
        }
        "student_t" => {
            arity(name, args, 3)?;
            let v = nums::<T>(args)?;
            StudentT::new(v[0], v[1], v[2])?.into()
        }
        "truncnorm" => {
            arity(name, args, 4)?;
            let v = nums::<T>(args)?;
            TruncatedGaussian::new(v[0], v[1], v[2], v[3])?.into()
        }
        "mixture" => {
            let (w, c) = weighted(args, false)?;
            FiniteMixture::new(w, c)?.into()
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown first-order family {other:?}; expected one of categorical, gaussian, student_t, truncnorm, mixture"
            )))
        }
    })
}

fn second_order_from<T: Real>(node: &Node) -> Result<SecondOrderDist<T>> {
    let Node::Call(name, args) = node else {
        return Err(Error::Parse(format!("expected a second-order distribution, found {node:?}")));
    };
    Ok(match name.as_str() {
        "dirichlet" => Dirichlet::new(nums(args)?)?.into(),
        "nig" => {
            arity(name, args, 4)?;
            let v = nums::<T>(args)?;
            Nig::new(v[0], v[1], v[2], v[3])?.into()
        }
        "dirac" => {
            let (w, a) = weighted(args, true)?;
            DiracMix::new(w, a)?.into()
        }
        "convex" => {
            arity(name, args, 3)?;
            mix(&second_order_from(&args[1])?, &second_order_from(&args[2])?, num(&args[0])?)?
        }
        other => {
            return Err(Error::Parse(format!("unknown second-order family {other:?}; expected one of {}", SECOND_ORDER_FAMILIES.join(", "))))
        }
    })
}

pub const SECOND_ORDER_FAMILIES: [&str; 4] = ["dirichlet", "nig", "dirac", "convex"];
pub const LOSS_NAMES: [&str; 5] = ["bayes-ce", "bayes-brier", "der", "mean", "affine"];

fn loss_from<T: Real>(node: &Node) -> Result<LossSpec<T>> {
    let Node::Call(name, args) = node else {
        return Err(Error::Parse(format!("expected a loss descriptor, found {node:?}")));
    };
    let spec = match name.as_str() {
        "bayes-ce" | "bayes-brier" | "der" => {
            arity(name, args, 1)?;
            let lambda = num(&args[0])?;
            match name.as_str() {
                "bayes-ce" => LossSpec::BayesCe { lambda },
                "bayes-brier" => LossSpec::BayesBrier { lambda },
                _ => LossSpec::Der { lambda },
            }
        }
        "mean" => {
            arity(name, args, 1)?;
            let kind = match &args[0] {
                Node::Word(w) => FirstOrderLoss::from_name(w),
                _ => None,
            }
            .ok_or_else(|| Error::Parse(format!("mean(...) takes one of brier, ce, linear, sq-mean; got {:?}", args[0])))?;
            LossSpec::MeanComposed(kind)
        }
        "affine" => {
            arity(name, args, 5)?;
            let v = nums::<T>(&args[..4])?;
            LossSpec::affine(loss_from(&args[4])?, v[0], Quadratic::new(v[1], v[2], v[3]))?
        }
        other => return Err(Error::Parse(format!("unknown loss {other:?}; expected one of {}", LOSS_NAMES.join(", ")))),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_first_order<T: Real>(s: &str) -> Result<FirstOrderDist<T>> {
    first_order_from(&parse_tree(s)?)
}

pub fn parse_second_order<T: Real>(s: &str) -> Result<SecondOrderDist<T>> {
    second_order_from(&parse_tree(s)?)
}

pub fn parse_loss<T: Real>(s: &str) -> Result<LossSpec<T>> {
    loss_from(&parse_tree(s)?)
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl<T: Real> Display for FirstOrderDist<T> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            FirstOrderDist::Categorical(c) => write!(f, "categorical({})", join(c.probs())),
            FirstOrderDist::Gaussian(g) => write!(f, "gaussian({},{})", g.mu, g.sigma),
            FirstOrderDist::StudentT(t) => write!(f, "student_t({},{},{})", t.loc, t.scale, t.dof),
            FirstOrderDist::Truncated(t) => write!(f, "truncnorm({},{},{},{})", t.mu, t.sigma, t.lo, t.hi),
            FirstOrderDist::Mixture(m) => {
                let items: Vec<String> = m.weights().iter().zip(m.components()).map(|(w, c)| format!("{w}:{c}")).collect();
                write!(f, "mixture({})", items.join(","))
            }
        }
    }
}

impl<T: Real> Display for SecondOrderDist<T> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            SecondOrderDist::Dirichlet(d) => write!(f, "dirichlet({})", join(d.alpha())),
            SecondOrderDist::Nig(n) => write!(f, "nig({},{},{},{})", n.m1, n.m2, n.m3, n.m4),
            SecondOrderDist::Dirac(d) => {
                let items: Vec<String> = d.weights().iter().zip(d.atoms()).map(|(w, a)| format!("{w}:{a}")).collect();
                write!(f, "dirac({})", items.join(","))
            }
            SecondOrderDist::ConvexMix { lambda, first, second } => write!(f, "convex({lambda},{first},{second})"),
        }
    }
}

impl<T: Real> Display for LossSpec<T> {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::BayesCe { lambda } => write!(f, "bayes-ce({lambda})"),
            LossSpec::BayesBrier { lambda } => write!(f, "bayes-brier({lambda})"),
            LossSpec::Der { lambda } => write!(f, "der({lambda})"),
            LossSpec::MeanComposed(kind) => write!(f, "mean({})", kind.name()),
            LossSpec::Affine { c, g, inner } => {
                let [g0, g1, g2] = g.coeffs;
                write!(f, "affine({c},{g0},{g1},{g2},{inner})")
            }
        }
    }
}

impl<T: Real> FromStr for SecondOrderDist<T> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_second_order(s)
    }
}

impl<T: Real> FromStr for FirstOrderDist<T> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_first_order(s)
    }
}

impl<T: Real> FromStr for LossSpec<T> {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_loss(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_documented_forms() {
        for s in [
            "categorical(0.25,0.75)",
            "gaussian(0,1)",
            "student_t(0,1,4)",
            "truncnorm(-1,0.3,-inf,0)",
            "mixture(0.5:gaussian(-1,1),0.5:gaussian(1,1))",
        ] {
            let d: FirstOrderDist<f64> = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        for s in ["dirichlet(2,2)", "nig(0,1,2,1)", "dirac(0.5:categorical(1,0),0.5:categorical(0,1))", "convex(0.3,dirichlet(1,1),dirichlet(4,4))"] {
            let d: SecondOrderDist<f64> = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        for s in ["bayes-ce(0)", "bayes-brier(1)", "der(0.1)", "mean(brier)", "mean(sq-mean)", "affine(3.7,0,0,1,der(1))"] {
            let l: LossSpec<f64> = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        let single: SecondOrderDist<f64> = "dirac(categorical(1,0))".parse().unwrap();
        assert_eq!(single.to_string(), "dirac(1:categorical(1,0))");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!("poisson(1)".parse::<SecondOrderDist<f64>>(), Err(Error::Parse(m)) if m.contains("dirichlet")));
        assert!("dirichlet(1,".parse::<SecondOrderDist<f64>>().is_err());
        assert!("dirichlet(1,-2)".parse::<SecondOrderDist<f64>>().is_err());
        assert!("nig(0,1,2)".parse::<SecondOrderDist<f64>>().is_err());
        assert!("mean(hinge)".parse::<LossSpec<f64>>().is_err());
        assert!("der(-1)".parse::<LossSpec<f64>>().is_err());
        assert!("dirichlet(1,1) x".parse::<SecondOrderDist<f64>>().is_err());
    }

    proptest! {
        #[test]
        fn second_order_round_trip(a in prop::collection::vec(1e-3f64..1e3, 2..5), m in (-1e3f64..1e3, 1e-3f64..1e3, 1.0f64..1e3, 1e-3f64..1e3), lam in 0.0f64..=1.0) {
            let d: SecondOrderDist<f64> = Dirichlet::new(a.clone()).unwrap().into();
            let n: SecondOrderDist<f64> = Nig::new(m.0, m.1, m.2, m.3).unwrap().into();
            let atoms = SecondOrderDist::dirac(Categorical::uniform(a.len()).unwrap());
            let c = mix(&d, &atoms, lam).unwrap();
            for q in [d, n, c] {
                let back: SecondOrderDist<f64> = q.to_string().parse().unwrap();
                prop_assert_eq!(back, q);
            }
        }

        #[test]
        fn loss_round_trip(lambda in 0.0f64..100.0, c in 1e-3f64..1e3, g in (-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3)) {
            for inner in [LossSpec::BayesCe { lambda }, LossSpec::BayesBrier { lambda }, LossSpec::Der { lambda }] {
                let l = LossSpec::affine(inner, c, Quadratic::new(g.0, g.1, g.2)).unwrap();
                let back: LossSpec<f64> = l.to_string().parse().unwrap();
                prop_assert_eq!(back, l);
            }
        }
    }
}
