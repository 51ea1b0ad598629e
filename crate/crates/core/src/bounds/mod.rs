//! Information measures and capacity bounds for OT over noisy channels.
//!
//! All quantities are in bits.

mod curve;
mod optimize;

pub use curve::{parse_grid, BoundCurve, UpperBoundSet};
pub use optimize::{
    eq4_objective, upper_bound_eq4_j2, upper_bound_eq4_j2_with, upper_bound_eq5,
    upper_bound_eq5_with, Eq4Optimum, Eq5Optimum, OptimizerConfig,
};

use serde::Serialize;

use crate::channel::{emulated_params, ChannelSpec};
use crate::error::{Error, Result};
use crate::ir_pa::binary_entropy;

/// Shannon entropy of a (possibly unnormalised) probability vector, with
/// `0 log 0 = 0`.
pub fn entropy<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// `P_X` together with the channel and the joint `P(x, y) = P_X(x) W(y|x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JointDist {
    px: Vec<f64>,
    channel: ChannelSpec,
    joint: Vec<Vec<f64>>,
}

impl JointDist {
    pub fn new(px: Vec<f64>, channel: &ChannelSpec) -> Result<Self> {
        if px.len() != channel.num_inputs() {
            return Err(Error::param(
                "px",
                format!("must have {} entries, got {}", channel.num_inputs(), px.len()),
            ));
        }
        if px.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::param("px", "entries must lie in [0, 1]"));
        }
        let total: f64 = px.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param("px", format!("must sum to 1 (sums to {total})")));
        }
        let joint = px
            .iter()
            .zip(channel.matrix())
            .map(|(&p, row)| row.iter().map(|&w| p * w).collect())
            .collect();
        Ok(Self {
            px,
            channel: channel.clone(),
            joint,
        })
    }

    pub fn uniform(channel: &ChannelSpec) -> Self {
        let k = channel.num_inputs();
        let mut px = vec![1.0 / k as f64; k];
        // absorb rounding so the entries sum to 1 within tolerance
        let rest: f64 = px[1..].iter().sum();
        px[0] = 1.0 - rest;
        Self::new(px, channel).expect("uniform input is valid")
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn channel(&self) -> &ChannelSpec {
        &self.channel
    }

    pub fn joint(&self) -> &[Vec<f64>] {
        &self.joint
    }

    pub fn py(&self) -> Vec<f64> {
        let mut py = vec![0.0; self.channel.num_outputs()];
        for row in &self.joint {
            for (acc, &p) in py.iter_mut().zip(row) {
                *acc += p;
            }
        }
        py
    }

    fn joint_entropy(&self) -> f64 {
        entropy(self.joint.iter().flatten().copied())
    }
}

pub fn mutual_information(j: &JointDist) -> f64 {
    entropy(j.px.iter().copied()) + entropy(j.py()) - j.joint_entropy()
}

pub fn conditional_entropy_x_given_y(j: &JointDist) -> f64 {
    j.joint_entropy() - entropy(j.py())
}

fn check_bsec_point(p1: f64, q1: f64, rounds: usize) -> Result<()> {
    if !(0.0..=0.5).contains(&p1) {
        return Err(Error::param("p1", format!("must be ≤ 0.5 and ≥ 0 (got {p1})")));
    }
    if !(0.0..=1.0).contains(&q1) {
        return Err(Error::param("q1", format!("must be in [0, 1] (got {q1})")));
    }
    if rounds == 0 {
        return Err(Error::param("T", "must be at least 1"));
    }
    Ok(())
}

/// Per-round contributions `∏_{j<t} (1−2p_j)/2 · p_t (1−H(q_t))`.
pub fn lower_bound_terms(p1: f64, q1: f64, rounds: usize) -> Result<Vec<f64>> {
    check_bsec_point(p1, q1, rounds)?;
    let (mut p, mut q, mut weight) = (p1, q1, 1.0);
    let mut terms = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        terms.push(weight * p * (1.0 - binary_entropy(q)));
        weight *= (1.0 - 2.0 * p) / 2.0;
        (p, q) = emulated_params(q);
    }
    Ok(terms)
}

/// Achievable OT rate of the `T`-round recursive protocol on BSEC(p1, q1).
pub fn lower_bound_theorem1(p1: f64, q1: f64, rounds: usize) -> Result<f64> {
    Ok(lower_bound_terms(p1, q1, rounds)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_bsec, make_example1, BsecParams};
    use proptest::prelude::*;

    fn bsc(q: f64) -> ChannelSpec {
        make_bsec(BsecParams::new(0.0, q).unwrap())
    }

    fn h(q: f64) -> f64 {
        if q == 0.0 || q == 1.0 {
            0.0
        } else {
            -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
        }
    }

    #[test]
    fn bsc_closed_forms() {
        for q in [0.01, 0.1, 0.25, 0.37, 0.5] {
            let j = JointDist::uniform(&bsc(q));
            assert!((mutual_information(&j) - (1.0 - h(q))).abs() < 1e-12);
            assert!((conditional_entropy_x_given_y(&j) - h(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn independence_and_noiseless() {
        let j = JointDist::new(vec![0.3, 0.7], &bsc(0.5)).unwrap();
        assert!(mutual_information(&j).abs() < 1e-15);
        let j = JointDist::new(vec![0.3, 0.7], &bsc(0.0)).unwrap();
        assert!(conditional_entropy_x_given_y(&j).abs() < 1e-15);
    }

    #[test]
    fn example_channel_three_quarters() {
        let j = JointDist::uniform(&make_example1());
        assert!((mutual_information(&j) - 0.75).abs() < 1e-12);
        let total: f64 = j.joint().iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(JointDist::new(vec![0.5, 0.6], &bsc(0.1)).is_err());
        assert!(JointDist::new(vec![1.0], &bsc(0.1)).is_err());
        assert!(lower_bound_theorem1(0.6, 0.1, 1).is_err());
        assert!(lower_bound_theorem1(0.1, 1.2, 1).is_err());
        assert!(lower_bound_theorem1(0.1, 0.2, 0).is_err());
    }

    #[test]
    fn single_round_and_bsc_reductions() {
        for k in 1..=50 {
            let (p, q) = (0.5 * k as f64 / 50.0, k as f64 / 51.0);
            let lb = lower_bound_theorem1(p, q, 1).unwrap();
            assert!((lb - p * (1.0 - h(q))).abs() < 1e-12);
            let lb = lower_bound_theorem1(0.0, q, 2).unwrap();
            let p2 = 2.0 * q * (1.0 - q);
            let q2 = q * q / ((1.0 - q).powi(2) + q * q);
            assert!((lb - p2 / 2.0 * (1.0 - h(q2))).abs() < 1e-12);
        }
    }

    #[test]
    fn two_round_expression() {
        // p1(1−H(q1)) + (1−2p1)/2 · p2(1−H(q2)), term by term
        let (p1, q1) = (0.1, 0.05);
        let p2 = 2.0 * 0.05 * 0.95;
        let q2 = 0.0025 / (0.9025 + 0.0025);
        let expected = p1 * (1.0 - h(q1)) + (1.0 - 2.0 * p1) / 2.0 * p2 * (1.0 - h(q2));
        assert!((lower_bound_theorem1(p1, q1, 2).unwrap() - expected).abs() < 1e-15);
        // frozen reference value
        assert!((expected - 0.108_316_821_515_259_73).abs() < 1e-15, "{expected}");
    }

    #[test]
    fn half_crossover_gives_zero() {
        for t in 1..6 {
            assert_eq!(lower_bound_theorem1(0.3, 0.5, t).unwrap(), 0.0);
        }
    }

    proptest! {
        #[test]
        fn monotone_in_rounds(p in 0.0f64..=0.5, q in 0.0f64..=1.0, t in 1usize..6) {
            let a = lower_bound_theorem1(p, q, t).unwrap();
            let b = lower_bound_theorem1(p, q, t + 1).unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn symmetric_in_crossover(p in 0.0f64..=0.5, q in 0.0f64..=1.0, t in 1usize..5) {
            let a = lower_bound_theorem1(p, q, t).unwrap();
            let b = lower_bound_theorem1(p, 1.0 - q, t).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn entropy_identity(a in 0.0f64..=1.0, q in 0.0f64..=1.0, p in 0.0f64..=0.5) {
            let j = JointDist::new(vec![a, 1.0 - a], &make_bsec(BsecParams::new(p, q).unwrap())).unwrap();
            let hx = entropy([a, 1.0 - a]);
            prop_assert!((conditional_entropy_x_given_y(&j) - (hx - mutual_information(&j))).abs() < 1e-12);
            prop_assert!(mutual_information(&j) >= -1e-12);
        }
    }
}
