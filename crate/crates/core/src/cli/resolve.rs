//! Resolution of textual loss names and grids.

use crate::error::{Error, Result};
use crate::first_order::FirstOrderLoss;
use crate::losses::LossSpec;
use crate::text::parse_loss;

const VALID_LOSSES: &str = "bayes-ce, bayes-brier, der, brier, ce, linear, sq-mean, mean(<kind>), affine(c,g0,g1,g2,<loss>)";

/// A bare loss name (taking `lambda` for the regularised losses, default 0) or a
/// full descriptor.
pub fn resolve_loss(name: &str, lambda: Option<f64>) -> Result<LossSpec<f64>> {
    let name = name.trim();
    if name.contains('(') {
        if lambda.is_some() {
            return Err(Error::arg("--lambda applies to bare loss names only; put the weight inside the descriptor"));
        }
        return parse_loss(name).map_err(|e| Error::arg(format!("{e}; valid losses: {VALID_LOSSES}")));
    }
    let lambda = lambda.unwrap_or(0.0);
    let spec = match name {
        "bayes-ce" => LossSpec::BayesCe { lambda },
        "bayes-brier" => LossSpec::BayesBrier { lambda },
        "der" => LossSpec::Der { lambda },
        other => match FirstOrderLoss::from_name(other.strip_prefix("mean-").unwrap_or(other)) {
            Some(kind) => LossSpec::MeanComposed(kind),
            None => return Err(Error::arg(format!("unknown loss '{other}'; valid losses: {VALID_LOSSES}"))),
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn number(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::arg(format!("'{s}' is not a number")))
}

/// Parses a positive, strictly increasing grid.
///
/// * `a:b:N` — `N` equally spaced points from `a` to `b`;
/// * `a:b:logN` — the doubling grid `a, 2a, 4a, …, b`, where `N = b/a`;
/// * `a:b:geomN` — `N` geometrically spaced points from `a` to `b`;
/// * `x1,x2,…` — an explicit list.
pub fn parse_c_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = match parts.as_slice() {
        [list] => list.split(',').map(number).collect::<Result<Vec<_>>>()?,
        [a, b, n] => {
            let (a, b) = (number(a)?, number(b)?);
            if !(a > 0.0 && a < b && b.is_finite()) {
                return Err(Error::arg(format!("grid bounds need 0 < a < b, got {a}:{b}")));
            }
            let count = |s: &str| -> Result<usize> { s.parse::<usize>().map_err(|_| Error::arg(format!("bad grid count '{s}'"))) };
            if let Some(n) = n.strip_prefix("log") {
                let span = count(n)?;
                let ratio = b / a;
                if (ratio - span as f64).abs() > 1e-9 * ratio || !span.is_power_of_two() {
                    return Err(Error::arg(format!("doubling grid a:b:logN needs N = b/a a power of two, got N = {span}, b/a = {ratio}")));
                }
                let steps = span.trailing_zeros() as i32;
                (0..=steps).map(|i| a * 2f64.powi(i)).collect()
            } else if let Some(n) = n.strip_prefix("geom") {
                let n = count(n)?;
                if n < 2 {
                    return Err(Error::arg("geometric grids need at least 2 points"));
                }
                let (la, lb) = (a.ln(), b.ln());
                (0..n).map(|i| if i + 1 == n { b } else { (la + (lb - la) * i as f64 / (n - 1) as f64).exp() }).collect()
            } else {
                let n = count(n)?;
                if n < 2 {
                    return Err(Error::arg("linear grids need at least 2 points"));
                }
                (0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
            }
        }
        _ => return Err(Error::arg(format!("cannot parse grid '{spec}'"))),
    };
    if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::arg(format!("grid '{spec}' must be positive and strictly increasing")));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_c_grid("1:16:log16").unwrap(), vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert_eq!(parse_c_grid("1:3:3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_c_grid("0.5,1,4").unwrap(), vec![0.5, 1.0, 4.0]);
        let g = parse_c_grid("1:100:geom3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && g[2] == 100.0);
        assert!(parse_c_grid("1:16:log10").is_err());
        assert!(parse_c_grid("2,1").is_err());
        assert!(parse_c_grid("0:1:3").is_err());
    }

    #[test]
    fn loss_names() {
        assert_eq!(resolve_loss("bayes-ce", Some(0.0)).unwrap(), LossSpec::BayesCe { lambda: 0.0 });
        assert_eq!(resolve_loss("brier", None).unwrap(), LossSpec::MeanComposed(FirstOrderLoss::Brier));
        assert_eq!(resolve_loss("der(1)", None).unwrap(), LossSpec::Der { lambda: 1.0 });
        let err = resolve_loss("hinge", None).unwrap_err().to_string();
        assert!(err.contains("bayes-ce") && err.contains("sq-mean"));
    }
}
