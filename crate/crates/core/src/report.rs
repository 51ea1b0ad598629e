//! Deterministic JSON reports for protocol runs.

use serde::{Deserialize, Serialize};

use crate::bounds::lower_bound_theorem1;
use crate::error::Result;
use crate::protocol::{
    estimate_correctness, ChannelKind, CorrectnessEstimate, ExamplePlan, Mutation, ProtocolKind,
    RoundPlan, TrialSpec,
};

/// Rate the example-channel protocol approaches as `Δ → 0`.
pub const EXAMPLE_RATE: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub rounds: usize,
    pub delta: f64,
    pub channel: ChannelKind,
    pub mutation: Option<Mutation>,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub schedule: Option<Vec<RoundPlan>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub example_plan: Option<ExamplePlan>,
    /// Asymptotic rate of the protocol at these channel parameters.
    pub reference_rate: f64,
    /// More than half of the trials aborted.
    pub abort_dominated: bool,
    pub estimate: CorrectnessEstimate,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }
}

pub fn run_report(spec: &TrialSpec, trials: usize, seed: u64) -> Result<RunReport> {
    let (rounds, schedule, example_plan, reference_rate) = match (spec.kind, spec.channel) {
        (ProtocolKind::Example, _) => (2, None, Some(ExamplePlan::new(spec.n, spec.delta)), EXAMPLE_RATE),
        (_, ChannelKind::Bsec(ch)) => (
            spec.rounds,
            Some(spec.params(seed, 0)?.schedule()?),
            None,
            lower_bound_theorem1(ch.erasure_prob(), ch.crossover_prob(), spec.rounds)?,
        ),
        (_, ChannelKind::Example1) => (spec.rounds, None, None, f64::NAN),
    };
    let estimate = estimate_correctness(spec, trials, seed)?;
    Ok(RunReport {
        protocol: spec.kind,
        n: spec.n,
        rounds,
        delta: spec.delta,
        channel: spec.channel,
        mutation: spec.mutation,
        trials,
        seed,
        schedule,
        example_plan,
        reference_rate,
        abort_dominated: 2 * estimate.aborts > trials,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BsecParams;

    #[test]
    fn report_is_byte_identical() {
        let spec = TrialSpec::new(
            ProtocolKind::Recursive,
            600,
            2,
            0.05,
            ChannelKind::Bsec(BsecParams::new(0.25, 0.01).unwrap()),
        );
        let a = run_report(&spec, 6, 3).unwrap().to_json().unwrap();
        let b = run_report(&spec, 6, 3).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        let back: RunReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back.schedule.as_ref().map(Vec::len), Some(2));
        assert!((back.reference_rate - lower_bound_theorem1(0.25, 0.01, 2).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn example_report_has_plan() {
        let spec = TrialSpec::new(ProtocolKind::Example, 2000, 2, 0.01, ChannelKind::Example1);
        let r = run_report(&spec, 3, 1).unwrap();
        assert_eq!(r.example_plan.unwrap().erased_len, 480);
        assert!(r.schedule.is_none());
        assert!(!r.abort_dominated);
    }
}
