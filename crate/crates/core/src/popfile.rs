//! Line-oriented text format for populations.
//!
//! ```text
//! # comments and blank lines are ignored
//! dim 2
//! mu 1
//! ell 10
//! c_radius 1
//! client
//! weight 0.5
//! a 4
//! a 0 1
//! c 0.5 -0.5
//! end
//! ```
//!
//! `a` lines give the lower triangle of `A_i` row by row (row `r` has `r + 1`
//! entries). Values are written with 17 significant digits, so a write/read
//! cycle reproduces every float bit for bit.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{SpectrumBounds, SymmetricMatrix};
use crate::world::{ClientModel, Population};

pub fn write_population(pop: &Population) -> String {
    let mut out = String::new();
    let b = pop.bounds();
    let _ = writeln!(out, "dim {}", pop.dim());
    let _ = writeln!(out, "mu {:.16e}", b.mu);
    let _ = writeln!(out, "ell {:.16e}", b.ell);
    let _ = writeln!(out, "c_radius {:.16e}", b.c_radius);
    for (client, w) in pop.clients().iter().zip(pop.weights()) {
        out.push_str("client\n");
        let _ = writeln!(out, "weight {w:.16e}");
        let lower = client.a_matrix().lower_triangle();
        let mut offset = 0;
        for row in 0..pop.dim() {
            out.push('a');
            for v in &lower[offset..offset + row + 1] {
                let _ = write!(out, " {v:.16e}");
            }
            out.push('\n');
            offset += row + 1;
        }
        out.push('c');
        for v in client.center() {
            let _ = write!(out, " {v:.16e}");
        }
        out.push_str("\nend\n");
    }
    out
}

#[derive(Default)]
struct PendingClient {
    start: usize,
    weight: Option<f64>,
    lower: Vec<f64>,
    rows: usize,
    center: Option<Vec<f64>>,
}

pub fn read_population(text: &str) -> Result<Population> {
    let mut dim: Option<usize> = None;
    let (mut mu, mut ell, mut c_radius) = (None, None, None);
    let mut current: Option<PendingClient> = None;
    let mut clients = Vec::new();
    let mut weights = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let err = |message: String| Error::Parse { line, message };

        match (key, current.as_mut()) {
            ("dim", None) => dim = Some(single(&rest, line)?.parse().map_err(|_| err("dim must be a positive integer".into()))?),
            ("mu", None) => mu = Some(number(single(&rest, line)?, line)?),
            ("ell", None) => ell = Some(number(single(&rest, line)?, line)?),
            ("c_radius", None) => c_radius = Some(number(single(&rest, line)?, line)?),
            ("client", None) => {
                if dim.is_none() {
                    return Err(err("`dim` must precede the first client".into()));
                }
                expect_empty(&rest, line)?;
                current = Some(PendingClient { start: line, ..Default::default() });
            }
            ("weight", Some(c)) => c.weight = Some(number(single(&rest, line)?, line)?),
            ("a", Some(c)) => {
                let d = dim.unwrap_or(0);
                if c.rows >= d {
                    return Err(err(format!("too many `a` rows for dim {d}")));
                }
                if rest.len() != c.rows + 1 {
                    return Err(err(format!("row {} of A needs {} entries, found {}", c.rows, c.rows + 1, rest.len())));
                }
                for v in &rest {
                    c.lower.push(number(v, line)?);
                }
                c.rows += 1;
            }
            ("c", Some(c)) => {
                let d = dim.unwrap_or(0);
                if rest.len() != d {
                    return Err(err(format!("center needs {d} entries, found {}", rest.len())));
                }
                c.center = Some(rest.iter().map(|v| number(v, line)).collect::<Result<_>>()?);
            }
            ("end", Some(_)) => {
                expect_empty(&rest, line)?;
                let c = current.take().expect("matched Some");
                let d = dim.unwrap_or(0);
                let missing = |what: &str| Error::Parse { line: c.start, message: format!("client is missing {what}") };
                let weight = c.weight.ok_or_else(|| missing("`weight`"))?;
                if c.rows != d {
                    return Err(missing("rows of `a`"));
                }
                let center = c.center.ok_or_else(|| missing("`c`"))?;
                let a = SymmetricMatrix::from_lower_triangle(d, &c.lower).map_err(|e| Error::Parse { line, message: e.to_string() })?;
                let client = ClientModel::new(a, center).map_err(|e| Error::Parse { line, message: e.to_string() })?;
                clients.push(client);
                weights.push(weight);
            }
            ("dim" | "mu" | "ell" | "c_radius" | "client", Some(_)) => {
                return Err(err(format!("`{key}` is not allowed inside a client block")));
            }
            ("weight" | "a" | "c" | "end", None) => {
                return Err(err(format!("`{key}` is only allowed inside a client block")));
            }
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }
    let last = text.lines().count();
    if let Some(c) = current {
        return Err(Error::Parse { line: c.start, message: "client block is not closed with `end`".into() });
    }
    let missing = |what: &str| Error::Parse { line: last, message: format!("missing `{what}`") };
    let d = dim.ok_or_else(|| missing("dim"))?;
    if d == 0 {
        return Err(Error::Parse { line: last, message: "dim must be positive".into() });
    }
    let bounds = SpectrumBounds::new(mu.ok_or_else(|| missing("mu"))?, ell.ok_or_else(|| missing("ell"))?, c_radius.ok_or_else(|| missing("c_radius"))?)?;
    Population::new(clients, weights, bounds)
}

fn single<'a>(rest: &[&'a str], line: usize) -> Result<&'a str> {
    match rest {
        [v] => Ok(v),
        _ => Err(Error::Parse { line, message: format!("expected one value, found {}", rest.len()) }),
    }
}

fn expect_empty(rest: &[&str], line: usize) -> Result<()> {
    if rest.is_empty() {
        Ok(())
    } else {
        Err(Error::Parse { line, message: "unexpected trailing values".into() })
    }
}

fn number(v: &str, line: usize) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Parse { line, message: format!("`{v}` is not a number") })?;
    if !x.is_finite() {
        return Err(Error::Parse { line, message: format!("`{v}` is not finite") });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{random_population, PopulationSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = PopulationSpec {
            dim: 4,
            clients: 3,
            bounds: SpectrumBounds::new(1.0, 10.0, 2.0).unwrap(),
            examples_per_client: None,
            uniform_weights: false,
        };
        let pop = random_population(&spec, 5).unwrap();
        let text = write_population(&pop);
        let back = read_population(&text).unwrap();
        assert_eq!(back.weights(), pop.weights());
        for (a, b) in back.clients().iter().zip(pop.clients()) {
            assert_eq!(a.a_matrix(), b.a_matrix());
            assert_eq!(a.center(), b.center());
        }
        assert_eq!(write_population(&back), text);
    }

    #[test]
    fn parses_documented_example() {
        let text = "dim 2\nmu 1\nell 10\nc_radius 1\nclient\nweight 1\na 4\na 0 1\nc 0.5 -1e-1 # note\nend\n";
        let pop = read_population(text).unwrap();
        assert_eq!(pop.clients()[0].a_matrix().get(1, 1), 1.0);
        assert_eq!(pop.clients()[0].center(), &[0.5, -0.1]);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("dim 1\nmu 1\nell 2\nc_radius 1\nclient\nweight 1\na x\nc 0\nend\n", 7),
            ("dim 1\nmu 1\nell 2\nbogus 3\n", 4),
            ("dim 1\nmu 1\nell 2\nc_radius 1\nclient\nweight 1\na 1 2\n", 7),
            ("dim 1\nmu 1\nell 2\nc_radius 1\nclient\nweight 1\n", 5),
            ("weight 1\n", 1),
        ];
        for (text, want) in cases {
            match read_population(text) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text}"),
                other => panic!("expected parse error, got {other:?}"),
            }
        }
    }

    #[test]
    fn validates_assumptions() {
        let text = "dim 1\nmu 1\nell 2\nc_radius 1\nclient\nweight 1\na 5\nc 0\nend\n";
        assert!(matches!(read_population(text), Err(Error::AssumptionViolated { .. })));
    }
}
