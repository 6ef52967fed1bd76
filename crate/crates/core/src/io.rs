//! JSON files: instances, solver output and policies.
//!
//! Instance: `{"S", "A", "gamma", "P0"[s][a][s'], "R0"[s][a], "mu"[s]}`;
//! `mu` may be omitted on read (uniform), unknown fields are rejected.
//! Solution: `{"value", "policy", "iterations", "residual", "chi"}`.
//! Policy input: any object with a `"policy"` matrix `[s][a]`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{MdpError, Result};
use crate::mdp::{MdpInstance, StochasticPolicy};
use crate::scalar::Scalar;
use crate::solver::SolveReport;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub gamma: f64,
    #[serde(rename = "P0")]
    pub kernel: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R0")]
    pub reward: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl InstanceFile {
    pub fn from_instance<T: Scalar>(inst: &MdpInstance<T>) -> Self {
        let (ns, na) = (inst.num_states, inst.num_actions);
        let kernel = (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| inst.kernel_row(s, a).iter().map(|x| x.to_f64_lossy()).collect())
                    .collect()
            })
            .collect();
        let reward = (0..ns)
            .map(|s| (0..na).map(|a| inst.reward_at(s, a).to_f64_lossy()).collect())
            .collect();
        Self {
            num_states: ns,
            num_actions: na,
            gamma: inst.gamma.to_f64_lossy(),
            kernel,
            reward,
            mu: Some(inst.initial_dist.iter().map(|x| x.to_f64_lossy()).collect()),
        }
    }

    /// Shape-check the nested arrays, then build and validate the instance.
    pub fn into_instance<T: Scalar>(self) -> Result<MdpInstance<T>> {
        let (ns, na) = (self.num_states, self.num_actions);
        check_len("P0", ns, self.kernel.len())?;
        check_len("R0", ns, self.reward.len())?;
        let mut kernel = Vec::with_capacity(ns * na * ns);
        for rows in &self.kernel {
            check_len("P0[s]", na, rows.len())?;
            for row in rows {
                check_len("P0[s][a]", ns, row.len())?;
                kernel.extend(row.iter().map(|&x| T::lit(x)));
            }
        }
        let mut reward = Vec::with_capacity(ns * na);
        for row in &self.reward {
            check_len("R0[s]", na, row.len())?;
            reward.extend(row.iter().map(|&x| T::lit(x)));
        }
        let mu = self.mu.map(|m| m.into_iter().map(T::lit).collect());
        MdpInstance::new(ns, na, kernel, reward, T::lit(self.gamma), mu)
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(MdpError::DimensionMismatch { what, expected, got });
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> MdpError {
    MdpError::InvalidConfig(format!("malformed JSON: {e}"))
}

fn policy_rows<T: Scalar>(policy: &StochasticPolicy<T>) -> Vec<Vec<f64>> {
    (0..policy.num_states())
        .map(|s| policy.row(s).iter().map(|x| x.to_f64_lossy()).collect())
        .collect()
}

pub fn read_instance<T: Scalar, R: Read>(reader: R) -> Result<MdpInstance<T>> {
    let file: InstanceFile = serde_json::from_reader(reader).map_err(json_err)?;
    file.into_instance()
}

pub fn write_instance<T: Scalar, W: Write>(inst: &MdpInstance<T>, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, &InstanceFile::from_instance(inst)).map_err(json_err)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SolutionFile {
    pub value: Vec<f64>,
    pub policy: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
    pub chi: Vec<usize>,
}

impl SolutionFile {
    pub fn from_report<T: Scalar>(report: &SolveReport<T>) -> Self {
        Self {
            value: report.value.0.iter().map(|x| x.to_f64_lossy()).collect(),
            policy: policy_rows(&report.policy),
            iterations: report.iterations,
            residual: report.final_residual.to_f64_lossy(),
            chi: report.chi_per_state.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolicyFile {
    pub policy: Vec<Vec<f64>>,
}

impl PolicyFile {
    pub fn from_policy<T: Scalar>(policy: &StochasticPolicy<T>) -> Self {
        Self { policy: policy_rows(policy) }
    }

    pub fn into_policy<T: Scalar>(self) -> Result<StochasticPolicy<T>> {
        let ns = self.policy.len();
        let na = self.policy.first().map_or(0, Vec::len);
        let mut probs = Vec::with_capacity(ns * na);
        for row in &self.policy {
            check_len("policy[s]", na, row.len())?;
            probs.extend(row.iter().map(|&x| T::lit(x)));
        }
        StochasticPolicy::new(ns, na, probs)
    }
}

/// Reads the `"policy"` matrix; other fields (e.g. a whole solution file)
/// are ignored.
pub fn read_policy<T: Scalar, R: Read>(reader: R) -> Result<StochasticPolicy<T>> {
    let file: PolicyFile = serde_json::from_reader(reader).map_err(json_err)?;
    file.into_policy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::random_instance;

    #[test]
    fn instance_round_trip() {
        let inst: MdpInstance<f64> = random_instance(3, 2, 7, 1.0).unwrap();
        let mut buf = Vec::new();
        write_instance(&inst, &mut buf).unwrap();
        let back: MdpInstance<f64> = read_instance(buf.as_slice()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn mu_optional_and_unknown_fields_rejected() {
        let ok = r#"{"S":1,"A":1,"gamma":0.5,"P0":[[[1.0]]],"R0":[[1.0]]}"#;
        let inst: MdpInstance<f64> = read_instance(ok.as_bytes()).unwrap();
        assert_eq!(inst.initial_dist, vec![1.0]);
        let bad = r#"{"S":1,"A":1,"gamma":0.5,"P0":[[[1.0]]],"R0":[[1.0]],"extra":1}"#;
        assert!(read_instance::<f64, _>(bad.as_bytes()).is_err());
        let lower = r#"{"s":1,"A":1,"gamma":0.5,"P0":[[[1.0]]],"R0":[[1.0]]}"#;
        assert!(read_instance::<f64, _>(lower.as_bytes()).is_err());
    }

    #[test]
    fn ragged_arrays_rejected() {
        let bad = r#"{"S":2,"A":1,"gamma":0.5,"P0":[[[1.0,0.0]],[[1.0]]],"R0":[[1.0],[0.0]]}"#;
        assert!(matches!(
            read_instance::<f64, _>(bad.as_bytes()),
            Err(MdpError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn policy_reads_from_solution_file() {
        let text = r#"{"value":[1.0],"policy":[[0.25,0.75]],"iterations":3,"residual":0.0,"chi":[2]}"#;
        let p: StochasticPolicy<f64> = read_policy(text.as_bytes()).unwrap();
        assert_eq!(p.row(0), &[0.25, 0.75]);
        assert!(read_policy::<f64, _>(r#"{"policy":[[0.5,0.6]]}"#.as_bytes()).is_err());
    }
}
