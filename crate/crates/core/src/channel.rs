//! Discrete memoryless channels and the pairwise erasure-emulation transform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional label of the erasure output.
pub const ERASURE: &str = "e";

const ROW_TOLERANCE: f64 = 1e-12;

/// A finite channel `W(y|x)` with labelled alphabets.
///
/// Serialized as `{"inputs": [...], "outputs": [...], "matrix": [[...]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct ChannelSpec {
    inputs: Vec<String>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ChannelDoc {
    inputs: Vec<String>,
    outputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<ChannelDoc> for ChannelSpec {
    type Error = Error;

    fn try_from(doc: ChannelDoc) -> Result<Self> {
        ChannelSpec::new(doc.inputs, doc.outputs, doc.matrix)
    }
}

impl From<ChannelSpec> for ChannelDoc {
    fn from(spec: ChannelSpec) -> Self {
        ChannelDoc {
            inputs: spec.inputs,
            outputs: spec.outputs,
            matrix: spec.matrix,
        }
    }
}

fn check_unique(labels: &[String], which: &str) -> Result<()> {
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::InvalidChannel(format!(
                "duplicate {which} label {a:?}"
            )));
        }
    }
    Ok(())
}

impl ChannelSpec {
    pub fn new(inputs: Vec<String>, outputs: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidChannel("alphabets must be non-empty".into()));
        }
        check_unique(&inputs, "input")?;
        check_unique(&outputs, "output")?;
        if matrix.len() != inputs.len() {
            return Err(Error::InvalidChannel(format!(
                "{} rows for {} inputs",
                matrix.len(),
                inputs.len()
            )));
        }
        let mut cumulative = Vec::with_capacity(matrix.len());
        for (x, row) in matrix.iter().enumerate() {
            if row.len() != outputs.len() {
                return Err(Error::InvalidChannel(format!(
                    "row {x} has {} entries for {} outputs",
                    row.len(),
                    outputs.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidChannel(format!(
                    "row {x} has entry {bad} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidChannel(format!("row {x} sums to {sum}")));
            }
            let mut acc = 0.0;
            cumulative.push(
                row.iter()
                    .map(|v| {
                        acc += v;
                        acc
                    })
                    .collect(),
            );
        }
        Ok(Self {
            inputs,
            outputs,
            matrix,
            cumulative,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// `W(y|x)` by index.
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.matrix[x][y]
    }

    pub fn input_index(&self, label: &str) -> Result<usize> {
        self.inputs
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownInput {
                symbol: label.to_string(),
            })
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        self.outputs.iter().position(|l| l == label)
    }

    /// One channel use on input index `x`.
    pub fn sample_one<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let row = &self.cumulative[x];
        let u: f64 = rng.gen();
        row.iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| {
                // u landed in the float slack above the last partial sum
                self.matrix[x].iter().rposition(|&v| v > 0.0).unwrap_or(0)
            })
    }

    /// Memoryless use of the channel on every input index.
    pub fn sample<R: Rng + ?Sized>(&self, inputs: &[usize], rng: &mut R) -> Result<ChannelSample> {
        if let Some(&bad) = inputs.iter().find(|&&x| x >= self.num_inputs()) {
            return Err(Error::UnknownInput {
                symbol: format!("#{bad}"),
            });
        }
        let outputs = inputs.iter().map(|&x| self.sample_one(x, rng)).collect();
        Ok(ChannelSample {
            inputs: inputs.to_vec(),
            outputs,
        })
    }

    /// Like [`ChannelSpec::sample`] but addressed by label.
    pub fn sample_labels<R: Rng + ?Sized, S: AsRef<str>>(
        &self,
        inputs: &[S],
        rng: &mut R,
    ) -> Result<ChannelSample> {
        let idx = inputs
            .iter()
            .map(|s| self.input_index(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        self.sample(&idx, rng)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Inputs and outputs of `n` channel uses, as alphabet indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelSample {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

impl ChannelSample {
    pub fn output_labels<'a>(&self, spec: &'a ChannelSpec) -> Vec<&'a str> {
        self.outputs.iter().map(|&y| spec.outputs[y].as_str()).collect()
    }
}

/// Erasure and crossover probabilities of a binary symmetric erasure channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsecParams {
    p: f64,
    q: f64,
}

impl BsecParams {
    /// `p = 0` is a plain BSC. `p > 1/2` is rejected: the discard rule only
    /// covers the regime `p ≤ 1/2`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::param("p", format!("must satisfy 0 ≤ p ≤ 0.5 (got {p})")));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::param("q", format!("must satisfy 0 ≤ q ≤ 1 (got {q})")));
        }
        Ok(Self { p, q })
    }

    pub fn erasure_prob(&self) -> f64 {
        self.p
    }

    pub fn crossover_prob(&self) -> f64 {
        self.q
    }
}

/// Output symbols of the BSEC, indexed as in [`make_bsec`]'s alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BsecSymbol {
    Zero,
    One,
    Erasure,
}

impl BsecSymbol {
    pub fn from_bit(b: bool) -> Self {
        if b {
            BsecSymbol::One
        } else {
            BsecSymbol::Zero
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            BsecSymbol::Zero => Some(false),
            BsecSymbol::One => Some(true),
            BsecSymbol::Erasure => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            BsecSymbol::Zero => 0,
            BsecSymbol::One => 1,
            BsecSymbol::Erasure => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(BsecSymbol::Zero),
            1 => Some(BsecSymbol::One),
            2 => Some(BsecSymbol::Erasure),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            BsecSymbol::Zero => BsecSymbol::One,
            BsecSymbol::One => BsecSymbol::Zero,
            BsecSymbol::Erasure => BsecSymbol::Erasure,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BsecSymbol::Zero => "0",
            BsecSymbol::One => "1",
            BsecSymbol::Erasure => ERASURE,
        }
    }
}

/// Inputs `["0","1"]`, outputs `["0","1","e"]`.
pub fn make_bsec(params: BsecParams) -> ChannelSpec {
    let (p, q) = (params.p, params.q);
    let keep = (1.0 - p) * (1.0 - q);
    let cross = (1.0 - p) * q;
    ChannelSpec::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into(), ERASURE.into()],
        vec![vec![keep, cross, p], vec![cross, keep, p]],
    )
    .expect("BSEC rows are stochastic by construction")
}

fn pair_label(a: &str, b: &str) -> String {
    format!("{a}{b}")
}

/// Index of output `(a, b)` in the example channel's alphabet, where each
/// coordinate is `0`, `1` or `2` (erasure).
pub fn example1_output_index(a: BsecSymbol, b: BsecSymbol) -> usize {
    3 * a.index() + b.index()
}

pub fn example1_output_symbols(y: usize) -> (BsecSymbol, BsecSymbol) {
    (
        BsecSymbol::from_index(y / 3).expect("output index < 9"),
        BsecSymbol::from_index(y % 3).expect("output index < 9"),
    )
}

/// Index of input `(x1, x2)`: `2·x1 + x2`.
pub fn example1_input_index(x1: bool, x2: bool) -> usize {
    2 * x1 as usize + x2 as usize
}

/// The two-bit channel with erasure-pattern outputs.
///
/// For input `(x1, x2)`: `(x1,e)`, `(e,x2)` and `(x1,x2)` each with 1/4, and
/// the single-coordinate flips `(x1,x2⊕1)`, `(x1⊕1,x2)` each with 1/8.
pub fn make_example1() -> ChannelSpec {
    let syms = [BsecSymbol::Zero, BsecSymbol::One, BsecSymbol::Erasure];
    let outputs: Vec<String> = syms
        .iter()
        .flat_map(|a| syms.iter().map(move |b| pair_label(a.label(), b.label())))
        .collect();
    let mut inputs = Vec::new();
    let mut matrix = Vec::new();
    for x1 in [false, true] {
        for x2 in [false, true] {
            inputs.push(pair_label(
                BsecSymbol::from_bit(x1).label(),
                BsecSymbol::from_bit(x2).label(),
            ));
            let (s1, s2) = (BsecSymbol::from_bit(x1), BsecSymbol::from_bit(x2));
            let mut row = vec![0.0; 9];
            row[example1_output_index(s1, BsecSymbol::Erasure)] += 0.25;
            row[example1_output_index(BsecSymbol::Erasure, s2)] += 0.25;
            row[example1_output_index(s1, s2)] += 0.25;
            row[example1_output_index(s1, s2.flipped())] += 0.125;
            row[example1_output_index(s1.flipped(), s2)] += 0.125;
            matrix.push(row);
        }
    }
    ChannelSpec::new(inputs, outputs, matrix).expect("example channel rows are stochastic")
}

/// Relabels an aligned pair of channel uses into one emulated BSEC use.
///
/// The sender's pair must already be equal (`(0,0) → 0`, `(1,1) → 1`); pass
/// `None` when only the receiver side is being evaluated. The receiver maps
/// equal bits to that bit and unequal bits to an erasure. Pairs containing a
/// real erasure are outside this transform's domain.
pub fn emulate_bsec_pair(
    x_pair: Option<(bool, bool)>,
    y_pair: (BsecSymbol, BsecSymbol),
) -> Result<(Option<bool>, BsecSymbol)> {
    let x = match x_pair {
        Some((a, b)) if a != b => {
            return Err(Error::Contract(format!(
                "sender pair ({}, {}) is not aligned",
                a as u8, b as u8
            )))
        }
        Some((a, _)) => Some(a),
        None => None,
    };
    let (ya, yb) = match (y_pair.0.bit(), y_pair.1.bit()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Contract(
                "erased position in a pair handed to the emulation transform".into(),
            ))
        }
    };
    let y = if ya == yb {
        BsecSymbol::from_bit(ya)
    } else {
        BsecSymbol::Erasure
    };
    Ok((x, y))
}

/// Erasure and crossover probability of the channel emulated from two uses
/// of a BSC with crossover `q`: `(2q(1−q), q²/((1−q)²+q²))`.
pub fn emulated_params(q: f64) -> (f64, f64) {
    let p_next = 2.0 * q * (1.0 - q);
    let q_next = q * q / ((1.0 - q) * (1.0 - q) + q * q);
    (p_next, q_next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Role};

    fn bsec(p: f64, q: f64) -> ChannelSpec {
        make_bsec(BsecParams::new(p, q).unwrap())
    }

    #[test]
    fn bsec_rows() {
        let w = bsec(0.1, 0.2);
        let row = &w.matrix()[0];
        assert!((row[0] - 0.72).abs() < 1e-15);
        assert!((row[1] - 0.18).abs() < 1e-15);
        assert!((row[2] - 0.10).abs() < 1e-15);

        let w = bsec(0.0, 0.3);
        assert_eq!(w.prob(0, 2), 0.0);
        assert_eq!(w.prob(1, 2), 0.0);
        assert!((w.prob(0, 1) - 0.3).abs() < 1e-15);

        let w = bsec(0.5, 0.5);
        for x in 0..2 {
            assert_eq!(w.matrix()[x], vec![0.25, 0.25, 0.5]);
        }
    }

    #[test]
    fn bsec_symmetry() {
        let w = bsec(0.17, 0.31);
        assert_eq!(w.prob(0, 0), w.prob(1, 1));
        assert_eq!(w.prob(0, 1), w.prob(1, 0));
        assert_eq!(w.prob(0, 2), w.prob(1, 2));
    }

    #[test]
    fn bsec_rejects_large_erasure() {
        assert!(BsecParams::new(0.6, 0.1).is_err());
        assert!(BsecParams::new(0.5, 0.1).is_ok());
        assert!(BsecParams::new(-0.1, 0.1).is_err());
    }

    #[test]
    fn example1_rows() {
        let w = make_example1();
        assert_eq!(w.num_inputs(), 4);
        assert_eq!(w.num_outputs(), 9);
        let x = w.input_index("00").unwrap();
        let p = |label: &str| w.prob(x, w.output_index(label).unwrap());
        assert_eq!(p("0e"), 0.25);
        assert_eq!(p("e0"), 0.25);
        assert_eq!(p("00"), 0.25);
        assert_eq!(p("01"), 0.125);
        assert_eq!(p("10"), 0.125);
        assert_eq!(p("ee"), 0.0);
        assert_eq!(p("11"), 0.0);
        for row in w.matrix() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert_eq!(row.iter().filter(|&&v| v > 0.0).count(), 5);
        }
    }

    #[test]
    fn spec_validation() {
        let bad_sum = ChannelSpec::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec![vec![0.5, 0.4]],
        );
        assert!(bad_sum.is_err());
        let dup = ChannelSpec::new(
            vec!["a".into(), "a".into()],
            vec!["x".into()],
            vec![vec![1.0], vec![1.0]],
        );
        assert!(dup.is_err());
        let neg = ChannelSpec::new(
            vec!["a".into()],
            vec!["x".into(), "y".into()],
            vec![vec![1.5, -0.5]],
        );
        assert!(neg.is_err());
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let w = make_example1();
        let text = w.to_json().unwrap();
        assert_eq!(ChannelSpec::from_json(&text).unwrap(), w);
        let doc = r#"{"inputs":["0"],"outputs":["0","e"],"matrix":[[0.5,0.6]]}"#;
        assert!(ChannelSpec::from_json(doc).is_err());
    }

    #[test]
    fn noiseless_sample() {
        let w = bsec(0.0, 0.0);
        let mut rng = stream(1, 0, Role::Channel);
        let s = w.sample_labels(&["0", "1", "0", "1"], &mut rng).unwrap();
        assert_eq!(s.output_labels(&w), vec!["0", "1", "0", "1"]);
    }

    #[test]
    fn unknown_input_is_rejected() {
        let w = bsec(0.1, 0.1);
        let mut rng = stream(1, 0, Role::Channel);
        assert!(matches!(
            w.sample_labels(&["0", "2"], &mut rng),
            Err(Error::UnknownInput { .. })
        ));
        assert!(w.sample(&[0, 5], &mut rng).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let w = bsec(0.3, 0.1);
        let inputs: Vec<usize> = (0..500).map(|i| i % 2).collect();
        let a = w.sample(&inputs, &mut stream(9, 1, Role::Channel)).unwrap();
        let b = w.sample(&inputs, &mut stream(9, 1, Role::Channel)).unwrap();
        assert_eq!(a, b);
        assert!(a.outputs.iter().all(|&y| y < 3));
        assert_eq!(a.inputs.len(), a.outputs.len());
    }

    #[test]
    fn erasure_frequency() {
        let w = bsec(0.3, 0.1);
        let mut rng = stream(11, 0, Role::Channel);
        let mut input_rng = stream(11, 0, Role::Sender);
        let n = 1_000_000;
        let inputs: Vec<usize> = (0..n).map(|_| input_rng.gen_range(0..2)).collect();
        let s = w.sample(&inputs, &mut rng).unwrap();
        let erased = s.outputs.iter().filter(|&&y| y == 2).count();
        let freq = erased as f64 / n as f64;
        assert!((freq - 0.3).abs() < 0.005, "erasure frequency {freq}");
    }

    #[test]
    fn crossover_among_non_erased() {
        let w = bsec(0.5, 0.2);
        let mut rng = stream(12, 0, Role::Channel);
        let mut input_rng = stream(12, 0, Role::Sender);
        let n = 1_000_000;
        let inputs: Vec<usize> = (0..n).map(|_| input_rng.gen_range(0..2)).collect();
        let s = w.sample(&inputs, &mut rng).unwrap();
        let (mut kept, mut flipped) = (0usize, 0usize);
        for (&x, &y) in s.inputs.iter().zip(&s.outputs) {
            if y != 2 {
                kept += 1;
                flipped += (x != y) as usize;
            }
        }
        let freq = flipped as f64 / kept as f64;
        assert!((freq - 0.2).abs() < 0.005, "crossover frequency {freq}");
    }

    #[test]
    fn emulation_relabels() {
        use BsecSymbol::*;
        assert_eq!(
            emulate_bsec_pair(Some((true, true)), (One, One)).unwrap(),
            (Some(true), One)
        );
        assert_eq!(
            emulate_bsec_pair(Some((false, false)), (Zero, One)).unwrap(),
            (Some(false), Erasure)
        );
        assert_eq!(
            emulate_bsec_pair(None, (One, Zero)).unwrap(),
            (None, Erasure)
        );
        assert!(emulate_bsec_pair(Some((true, false)), (One, One)).is_err());
        assert!(emulate_bsec_pair(Some((true, true)), (Erasure, One)).is_err());
    }

    #[test]
    fn emulated_params_values() {
        assert_eq!(emulated_params(0.5), (0.5, 0.5));
        let (p, q) = emulated_params(0.1);
        assert!((p - 0.18).abs() < 1e-15);
        assert!((q - 0.01 / 0.82).abs() < 1e-15);
        let (p, q) = emulated_params(0.25);
        assert!((p - 0.375).abs() < 1e-15);
        assert!((q - 0.1).abs() < 1e-15);
    }

    #[test]
    fn emulated_params_mass_balance() {
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let (p2, q2) = emulated_params(q);
            let total = p2 + (1.0 - p2) * (1.0 - q2) + (1.0 - p2) * q2;
            assert!((total - 1.0).abs() < 1e-12);
            // the non-erased mass splits as (1-q)^2 and q^2
            assert!(((1.0 - p2) * q2 - q * q).abs() < 1e-12);
        }
    }
}
