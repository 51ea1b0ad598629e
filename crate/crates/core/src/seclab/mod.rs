//! Security checks: exact enumeration for the receiver's choice, Monte-Carlo
//! tests for the sender's unchosen key, and correctness estimates.

mod exact;
mod statistical;

pub use exact::{
    atom_count, exact_receiver_privacy, exact_v_symmetry, parse_rational, sender_view_joint,
    ExactDist, ExactInstance, ExactPrivacy, VSymmetry, ATOM_LIMIT,
};
pub use statistical::{
    chi_square_independence, plugin_dvar, sender_security, DependenceTest, SenderSecurityConfig,
    SenderSecurityOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocol::{estimate_correctness, TrialSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Correctness,
    SenderSecurity,
    ReceiverPrivacy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Enumeration,
    MonteCarlo,
}

/// A confidence interval, or the label `"exact"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Confidence {
    Interval([f64; 2]),
    Label(String),
}

impl Confidence {
    pub fn exact() -> Self {
        Confidence::Label("exact".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub criterion: Criterion,
    pub method: Method,
    pub value: f64,
    /// Exact rational value for enumeration results.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact_value: Option<String>,
    pub interval: Confidence,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    /// Whether the property held; absent when there is no pass criterion.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null", default)]
    pub details: serde_json::Value,
}

impl SecurityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn receiver_privacy_report(inst: &ExactInstance) -> Result<SecurityReport> {
    let out = exact_receiver_privacy(inst)?;
    Ok(SecurityReport {
        criterion: Criterion::ReceiverPrivacy,
        method: Method::Enumeration,
        value: out.distance_f64,
        exact_value: Some(out.distance.clone()),
        interval: Confidence::exact(),
        trials: None,
        seed: None,
        passed: Some(out.distance == "0"),
        warnings: Vec::new(),
        details: serde_json::json!({
            "n": inst.n,
            "p": inst.p.to_string(),
            "q": inst.q.to_string(),
            "mutation": inst.mutation,
            "atoms": out.atoms.to_string(),
            "outcomes": out.outcomes,
            "abort_probability": out.abort_probability,
        }),
    })
}

pub fn sender_security_test(cfg: &SenderSecurityConfig) -> Result<SecurityReport> {
    let out = sender_security(cfg)?;
    let worst = out
        .tests
        .iter()
        .max_by(|a, b| a.d_var.total_cmp(&b.d_var))
        .cloned();
    Ok(SecurityReport {
        criterion: Criterion::SenderSecurity,
        method: Method::MonteCarlo,
        value: worst.as_ref().map_or(0.0, |t| t.d_var),
        exact_value: None,
        interval: Confidence::Interval(worst.as_ref().map_or([0.0, 0.0], |t| t.d_var_interval)),
        trials: Some(cfg.trials as u64),
        seed: Some(cfg.seed),
        passed: Some(!out.rejected),
        warnings: out.warnings.clone(),
        details: serde_json::to_value(&out)?,
    })
}

pub fn correctness_report(spec: &TrialSpec, trials: usize, seed: u64) -> Result<SecurityReport> {
    let est = estimate_correctness(spec, trials, seed)?;
    Ok(SecurityReport {
        criterion: Criterion::Correctness,
        method: Method::MonteCarlo,
        value: est.estimate,
        exact_value: None,
        interval: Confidence::Interval(est.interval),
        trials: Some(trials as u64),
        seed: Some(seed),
        passed: None,
        warnings: Vec::new(),
        details: serde_json::json!({
            "failures": est.failures,
            "aborts": est.aborts,
            "decode_failures": est.decode_failures,
            "key_mismatches": est.key_mismatches,
            "mean_rate": est.mean_rate,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::BsecParams;
    use crate::protocol::{ChannelKind, ProtocolKind};
    use num::BigRational;

    #[test]
    fn exact_report_shape() {
        let inst = ExactInstance {
            n: 2,
            p: BigRational::new(1.into(), 4.into()),
            q: BigRational::new(1.into(), 4.into()),
            mutation: None,
        };
        let report = receiver_privacy_report(&inst).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(v["criterion"], "receiver_privacy");
        assert_eq!(v["method"], "enumeration");
        assert_eq!(v["interval"], "exact");
        assert_eq!(v["value"], 0.0);
        assert!(v["trials"].is_null() && v["seed"].is_null());
    }

    #[test]
    fn correctness_report_noiseless() {
        let spec = TrialSpec::new(
            ProtocolKind::Standard,
            400,
            1,
            0.05,
            ChannelKind::Bsec(BsecParams::new(0.25, 0.0).unwrap()),
        );
        let r = correctness_report(&spec, 10, 1).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.criterion, Criterion::Correctness);
        let back: SecurityReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
