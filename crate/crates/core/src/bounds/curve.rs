//! Bound curves over a crossover grid at fixed erasure probability.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{upper_bound_eq4_j2_with, upper_bound_eq5_with, OptimizerConfig};
use super::lower_bound_theorem1;
use crate::channel::{make_bsec, BsecParams};
use crate::error::{Error, Result};

/// Which upper bounds to evaluate alongside the lower bounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpperBoundSet {
    pub eq4_j2: bool,
    pub eq5: bool,
}

impl UpperBoundSet {
    pub const ALL: Self = Self {
        eq4_j2: true,
        eq5: true,
    };

    /// Parses a comma-separated list such as `eq4j2,eq5`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = Self::default();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "eq4j2" | "eq4_J2" | "eq4" => set.eq4_j2 = true,
                "eq5" => set.eq5 = true,
                _ => return Err(Error::param("ub", format!("unknown upper bound `{item}` (use eq4j2, eq5)"))),
            }
        }
        Ok(set)
    }
}

/// Parses `start:stop:step` into an inclusive grid, or a single value.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::param("qgrid", format!("`{s}` is not a number")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let (start, stop, step) = match parts.as_slice() {
        [v] => return Ok(vec![num(v)?]),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(Error::param("qgrid", "must be `start:stop:step` or a single value")),
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::param("qgrid", "needs step > 0 and stop ≥ start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    // round to 12 decimals so 0.01:0.99:0.01 yields the literal decimals
    Ok((0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub p1: f64,
    pub q1: Vec<f64>,
    /// `lower[t-1][i]`: the `t`-round lower bound at `q1[i]`.
    pub lower: Vec<Vec<f64>>,
    pub ub_eq4_j2: Option<Vec<f64>>,
    pub ub_eq5: Option<Vec<f64>>,
}

impl BoundCurve {
    /// Evaluates every point in parallel on the current rayon pool.
    pub fn compute(
        p1: f64,
        q1: &[f64],
        rounds: usize,
        which: UpperBoundSet,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        let rows: Vec<(Vec<f64>, Option<f64>, Option<f64>)> = q1
            .par_iter()
            .map(|&q| {
                let lower = (1..=rounds)
                    .map(|t| lower_bound_theorem1(p1, q, t))
                    .collect::<Result<Vec<_>>>()?;
                let channel = make_bsec(BsecParams::new(p1, q)?);
                let eq4 = which.eq4_j2.then(|| upper_bound_eq4_j2_with(&channel, cfg));
                let hints: Vec<Vec<f64>> = eq4.iter().map(|o| o.px.clone()).collect();
                let eq5 = which.eq5.then(|| upper_bound_eq5_with(&channel, cfg, &hints).value);
                Ok((lower, eq4.map(|o| o.value), eq5))
            })
            .collect::<Result<_>>()?;
        let lower = (0..rounds)
            .map(|t| rows.iter().map(|r| r.0[t]).collect())
            .collect();
        Ok(Self {
            p1,
            q1: q1.to_vec(),
            lower,
            ub_eq4_j2: which.eq4_j2.then(|| rows.iter().map(|r| r.1.unwrap_or(f64::NAN)).collect()),
            ub_eq5: which.eq5.then(|| rows.iter().map(|r| r.2.unwrap_or(f64::NAN)).collect()),
        })
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["q1".to_string()];
        cols.extend((1..=self.lower.len()).map(|t| format!("lb_T{t}")));
        if self.ub_eq4_j2.is_some() {
            cols.push("ub_eq4_J2".into());
        }
        if self.ub_eq5.is_some() {
            cols.push("ub_eq5".into());
        }
        cols
    }

    /// Columns `q1, lb_T1..lb_TT`, then `ub_eq4_J2` and `ub_eq5` when present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(self.header()).map_err(io)?;
        for (i, q) in self.q1.iter().enumerate() {
            let mut row = vec![q.to_string()];
            row.extend(self.lower.iter().map(|col| col[i].to_string()));
            for col in [&self.ub_eq4_j2, &self.ub_eq5].into_iter().flatten() {
                row.push(col[i].to_string());
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0.01:0.99:0.01").unwrap();
        assert_eq!(g.len(), 99);
        assert_eq!((g[0], g[6], g[98]), (0.01, 0.07, 0.99));
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        assert!(parse_grid("0.5:0.1:0.1").is_err());
        assert!(parse_grid("a:b").is_err());
    }

    #[test]
    fn upper_bound_names() {
        assert_eq!(UpperBoundSet::parse("eq4j2,eq5").unwrap(), UpperBoundSet::ALL);
        assert_eq!(UpperBoundSet::parse("").unwrap(), UpperBoundSet::default());
        assert!(UpperBoundSet::parse("eq6").is_err());
    }

    #[test]
    fn csv_layout() {
        let curve = BoundCurve::compute(
            0.1,
            &[0.5, 0.2],
            3,
            UpperBoundSet::default(),
            &OptimizerConfig::default(),
        )
        .unwrap();
        let text = curve.to_csv().unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "q1,lb_T1,lb_T2,lb_T3");
        assert_eq!(lines[1], "0.5,0,0,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn bsc_point_two_rounds() {
        let curve =
            BoundCurve::compute(0.0, &[0.1], 2, UpperBoundSet::default(), &OptimizerConfig::default()).unwrap();
        assert_eq!(curve.lower[0][0], 0.0);
        let (p2, q2) = crate::channel::emulated_params(0.1);
        let expected = p2 / 2.0 * (1.0 - crate::ir_pa::binary_entropy(q2));
        assert!((curve.lower[1][0] - expected).abs() < 1e-15);
    }
}
