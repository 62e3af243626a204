//! Text formats: the `CBICL 1` instance file and the `SOLUTION 1` file.
//!
//! Instance layout (whitespace separated, 1-based indices):
//!
//! ```text
//! CBICL 1
//! n m k
//! <n lines of m weights>
//! ML_U p
//! <p lines "i j">
//! CL_U p
//! ...
//! ML_V p
//! ...
//! CL_V p
//! ...
//! ```

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Biclustering, Instance, PairwiseConstraints, Side, WeightMatrix};

const SECTIONS: [(&str, Side, bool); 4] = [
    ("ML_U", Side::U, true),
    ("CL_U", Side::U, false),
    ("ML_V", Side::V, true),
    ("CL_V", Side::V, false),
];

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line as tokens, with its 1-based line number.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (idx, line) in self.inner.by_ref() {
            self.last = idx + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if !toks.is_empty() {
                return Some((idx + 1, toks));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_tokens().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of input, expected {what}"),
        })
    }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected integer, got {tok:?}"),
    })
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let x: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("expected number, got {tok:?}"),
    })?;
    if !x.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite weight {tok:?}"),
        });
    }
    Ok(x)
}

fn check_header(toks: &[&str], line: usize, magic: &str) -> Result<()> {
    if toks.first() != Some(&magic) || toks.len() != 2 {
        return Err(Error::Parse {
            line,
            msg: format!("expected header \"{magic} 1\""),
        });
    }
    if toks[1] != "1" {
        return Err(Error::UnsupportedVersion(toks[1].to_string()));
    }
    Ok(())
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let mut lines = Lines::new(text);
    let (ln, toks) = lines.expect("header")?;
    check_header(&toks, ln, "CBICL")?;

    let (ln, toks) = lines.expect("dimensions")?;
    if toks.len() != 3 {
        return Err(Error::Parse {
            line: ln,
            msg: "expected \"n m k\"".into(),
        });
    }
    let n = parse_usize(toks[0], ln)?;
    let m = parse_usize(toks[1], ln)?;
    let k = parse_usize(toks[2], ln)?;
    if n == 0 || m == 0 {
        return Err(Error::Parse {
            line: ln,
            msg: "n and m must be positive".into(),
        });
    }

    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        let (ln, toks) = lines.expect(&format!("weight row {}", r + 1))?;
        if SECTIONS.iter().any(|(name, ..)| toks[0] == *name) {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {n} weight rows, found {r}"),
            });
        }
        if toks.len() != m {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {m} weights, found {}", toks.len()),
            });
        }
        rows.push(
            toks.iter()
                .map(|t| parse_f64(t, ln))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let weights = WeightMatrix::from_rows(&rows)?;

    let mut con = PairwiseConstraints::new();
    for (name, side, is_ml) in SECTIONS {
        let (ln, toks) = lines.expect(name)?;
        if toks[0] != name {
            let msg = if SECTIONS.iter().any(|(s, ..)| *s == toks[0]) {
                format!(
                    "duplicate or out-of-order section {}, expected {name}",
                    toks[0]
                )
            } else if toks.len() == m {
                format!("expected {n} weight rows, found more")
            } else {
                format!("expected section header {name}")
            };
            return Err(Error::Parse { line: ln, msg });
        }
        if toks.len() != 2 {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected \"{name} p\""),
            });
        }
        let p = parse_usize(toks[1], ln)?;
        let size = if side == Side::U { n } else { m };
        for _ in 0..p {
            let (ln, toks) = lines.expect(&format!("{name} pair"))?;
            if toks.len() != 2 {
                return Err(Error::Parse {
                    line: ln,
                    msg: "expected \"i j\"".into(),
                });
            }
            let i = parse_usize(toks[0], ln)?;
            let j = parse_usize(toks[1], ln)?;
            if i == 0 || j == 0 || i > size || j > size {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("index out of range 1..={size} in pair ({i}, {j})"),
                });
            }
            if i == j {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("self-pair ({i}, {j})"),
                });
            }
            if is_ml {
                con.add_must_link(side, i - 1, j - 1);
            } else {
                con.add_cannot_link(side, i - 1, j - 1);
            }
        }
    }
    if let Some((ln, toks)) = lines.next_tokens() {
        let msg = if SECTIONS.iter().any(|(s, ..)| *s == toks[0]) {
            format!("duplicate section {}", toks[0])
        } else {
            "trailing content after CL_V section".to_string()
        };
        return Err(Error::Parse { line: ln, msg });
    }
    Instance::new(weights, con, k)
}

pub fn serialize_instance(inst: &Instance) -> String {
    let a = &inst.weights;
    let mut out = String::new();
    writeln!(out, "CBICL 1").unwrap();
    writeln!(out, "{} {} {}", a.n(), a.m(), inst.k).unwrap();
    for i in 0..a.n() {
        let row: Vec<String> = (0..a.m()).map(|j| format!("{:?}", a.get(i, j))).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    let c = &inst.constraints;
    for (name, set) in [
        ("ML_U", &c.ml_u),
        ("CL_U", &c.cl_u),
        ("ML_V", &c.ml_v),
        ("CL_V", &c.cl_v),
    ] {
        writeln!(out, "{name} {}", set.len()).unwrap();
        for &(i, j) in set {
            writeln!(out, "{} {}", i + 1, j + 1).unwrap();
        }
    }
    out
}

/// Contents of a `SOLUTION 1` file.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFile {
    pub objective: f64,
    /// 1-based labels as written in the file.
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl SolutionFile {
    pub fn from_biclustering(sol: &Biclustering, objective: f64) -> Self {
        Self {
            objective,
            rows: sol.rows().iter().map(|l| l + 1).collect(),
            cols: sol.cols().iter().map(|l| l + 1).collect(),
        }
    }

    /// Converts to a validated biclustering with `k` labels.
    pub fn to_biclustering(&self, k: usize) -> Result<Biclustering> {
        let zero_based = |ls: &[usize]| -> Result<Vec<usize>> {
            ls.iter()
                .map(|&l| {
                    if l == 0 || l > k {
                        Err(Error::LabelOutOfRange { label: l, k })
                    } else {
                        Ok(l - 1)
                    }
                })
                .collect()
        };
        Biclustering::new(k, zero_based(&self.rows)?, zero_based(&self.cols)?)
    }
}

pub fn serialize_solution(sol: &SolutionFile) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "SOLUTION 1\nobjective {:?}\nrows {}\ncols {}\n",
        sol.objective,
        join(&sol.rows),
        join(&sol.cols)
    )
}

pub fn parse_solution(text: &str) -> Result<SolutionFile> {
    let mut lines = Lines::new(text);
    let (ln, toks) = lines.expect("header")?;
    check_header(&toks, ln, "SOLUTION")?;
    let (ln, toks) = lines.expect("objective")?;
    if toks.len() != 2 || toks[0] != "objective" {
        return Err(Error::Parse {
            line: ln,
            msg: "expected \"objective <value>\"".into(),
        });
    }
    let objective = toks[1].parse::<f64>().map_err(|_| Error::Parse {
        line: ln,
        msg: format!("bad objective {:?}", toks[1]),
    })?;
    let mut labels = |key: &str| -> Result<Vec<usize>> {
        let (ln, toks) = lines.expect(key)?;
        if toks[0] != key {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected \"{key} ...\""),
            });
        }
        toks[1..].iter().map(|t| parse_usize(t, ln)).collect()
    };
    let rows = labels("rows")?;
    let cols = labels("cols")?;
    Ok(SolutionFile {
        objective,
        rows,
        cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_round_trip() {
        let inst = Instance::new(
            WeightMatrix::from_rows(&[vec![0.1]]).unwrap(),
            PairwiseConstraints::new(),
            2,
        )
        .unwrap();
        let text = serialize_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn constraints_round_trip() {
        let mut con = PairwiseConstraints::new();
        con.add_must_link(Side::U, 0, 1);
        con.add_cannot_link(Side::V, 2, 0);
        let inst = Instance::new(
            WeightMatrix::from_rows(&[vec![1.5, -2.0, 1e-300], vec![3.0, 0.1 + 0.2, 7.0]]).unwrap(),
            con,
            2,
        )
        .unwrap();
        let back = parse_instance(&serialize_instance(&inst)).unwrap();
        assert_eq!(back, inst);
        assert!(back.constraints.ml_u.contains(&(0, 1)));
    }

    #[test]
    fn rejects_other_versions() {
        let err =
            parse_instance("CBICL 2\n1 1 2\n0\nML_U 0\nCL_U 0\nML_V 0\nCL_V 0\n").unwrap_err();
        assert_eq!(err, Error::UnsupportedVersion("2".into()));
    }

    #[test]
    fn parse_errors() {
        let bad_header = parse_instance("CBX 1\n");
        assert!(matches!(bad_header, Err(Error::Parse { line: 1, .. })));

        let short = parse_instance("CBICL 1\n2 1 2\n0.5\nML_U 0\nCL_U 0\nML_V 0\nCL_V 0\n");
        assert!(
            matches!(short, Err(Error::Parse { line: 4, .. })),
            "{short:?}"
        );

        let range = parse_instance("CBICL 1\n2 1 2\n0.5\n1\nML_U 1\n1 3\nCL_U 0\nML_V 0\nCL_V 0\n");
        assert!(
            matches!(range, Err(Error::Parse { line: 6, .. })),
            "{range:?}"
        );

        let dup = parse_instance("CBICL 1\n1 1 2\n1\nML_U 0\nML_U 0\nML_V 0\nCL_V 0\n");
        assert!(matches!(dup, Err(Error::Parse { line: 5, .. })), "{dup:?}");

        let extra = parse_instance("CBICL 1\n1 1 2\n1\nML_U 0\nCL_U 0\nML_V 0\nCL_V 0\nCL_V 0\n");
        assert!(
            matches!(extra, Err(Error::Parse { line: 8, .. })),
            "{extra:?}"
        );
    }

    #[test]
    fn scientific_weights() {
        let inst = parse_instance("CBICL 1\n1 2 2\n1e-3 -2.5E2\nML_U 0\nCL_U 0\nML_V 0\nCL_V 0\n")
            .unwrap();
        assert_eq!(inst.weights.get(0, 1), -250.0);
    }

    #[test]
    fn solution_round_trip() {
        let sol = Biclustering::new(2, vec![0, 1, 1], vec![1, 0]).unwrap();
        let file = SolutionFile::from_biclustering(&sol, 3.25);
        let text = serialize_solution(&file);
        assert_eq!(text, "SOLUTION 1\nobjective 3.25\nrows 1 2 2\ncols 2 1\n");
        let back = parse_solution(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_biclustering(2).unwrap(), sol);
    }
}
