//! Lp-ball uncertainty sets around the nominal model.

use crate::error::{MdpError, Result};
use crate::mdp::MdpInstance;
use crate::norm::NormIndex;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rectangularity {
    NonRobust,
    /// Independent noise per state-action pair.
    SA,
    /// Noise coupled across actions within a state.
    S,
}

impl std::fmt::Display for Rectangularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Rectangularity::NonRobust => "none",
            Rectangularity::SA => "sa",
            Rectangularity::S => "s",
        })
    }
}

impl std::str::FromStr for Rectangularity {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "nr" | "nonrobust" | "non-robust" => Ok(Rectangularity::NonRobust),
            "sa" => Ok(Rectangularity::SA),
            "s" => Ok(Rectangularity::S),
            other => Err(MdpError::InvalidConfig(format!(
                "unknown rectangularity '{other}' (expected none, sa or s)"
            ))),
        }
    }
}

/// Reward radii `alpha`, kernel radii `beta` and an optional forbidden
/// transition mask.
///
/// Shapes: `SA` uses `S*A` radii and an `S*A*S` mask (`[s][a][s']`); `S` uses
/// `S` radii and an `S*S` mask (`[s][s']`); `NonRobust` carries no radii.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintySpec<T> {
    pub rect: Rectangularity,
    pub p: NormIndex,
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    pub forbidden: Option<Vec<bool>>,
}

impl<T: Scalar> UncertaintySpec<T> {
    pub fn non_robust() -> Self {
        Self {
            rect: Rectangularity::NonRobust,
            p: NormIndex::Two,
            alpha: Vec::new(),
            beta: Vec::new(),
            forbidden: None,
        }
    }

    pub fn sa(p: NormIndex, alpha: Vec<T>, beta: Vec<T>) -> Self {
        Self {
            rect: Rectangularity::SA,
            p,
            alpha,
            beta,
            forbidden: None,
        }
    }

    pub fn s(p: NormIndex, alpha: Vec<T>, beta: Vec<T>) -> Self {
        Self {
            rect: Rectangularity::S,
            p,
            alpha,
            beta,
            forbidden: None,
        }
    }

    /// Same radius everywhere for the given rectangularity.
    pub fn uniform(
        rect: Rectangularity,
        p: NormIndex,
        num_states: usize,
        num_actions: usize,
        alpha: T,
        beta: T,
    ) -> Self {
        match rect {
            Rectangularity::NonRobust => Self::non_robust(),
            Rectangularity::SA => {
                let n = num_states * num_actions;
                Self::sa(p, vec![alpha; n], vec![beta; n])
            }
            Rectangularity::S => Self::s(p, vec![alpha; num_states], vec![beta; num_states]),
        }
    }

    /// Forbid every transition the nominal kernel already rules out. For
    /// `S` rectangularity a next state is forbidden only when it is
    /// unreachable under every action.
    pub fn with_forbidden_from_kernel(mut self, inst: &MdpInstance<T>) -> Self {
        let (ns, na) = (inst.num_states, inst.num_actions);
        self.forbidden = match self.rect {
            Rectangularity::NonRobust => None,
            Rectangularity::SA => Some(inst.kernel.iter().map(|&p| p == T::zero()).collect()),
            Rectangularity::S => {
                let mut mask = vec![true; ns * ns];
                for s in 0..ns {
                    for a in 0..na {
                        for (t, &p) in inst.kernel_row(s, a).iter().enumerate() {
                            if p != T::zero() {
                                mask[s * ns + t] = false;
                            }
                        }
                    }
                }
                Some(mask)
            }
        };
        self
    }

    /// Check radii and mask against an instance.
    pub fn validate(&self, inst: &MdpInstance<T>) -> Result<()> {
        let (ns, na) = (inst.num_states, inst.num_actions);
        let (radius_len, mask_len) = match self.rect {
            Rectangularity::NonRobust => {
                if self.alpha.iter().chain(&self.beta).any(|&x| x != T::zero())
                    || self.forbidden.is_some()
                {
                    return Err(MdpError::NonZeroRadius);
                }
                return Ok(());
            }
            Rectangularity::SA => (ns * na, ns * na * ns),
            Rectangularity::S => (ns, ns * ns),
        };
        for (what, radii) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if radii.len() != radius_len {
                return Err(MdpError::DimensionMismatch {
                    what,
                    expected: radius_len,
                    got: radii.len(),
                });
            }
            if radii.iter().any(|r| !r.is_finite()) {
                return Err(MdpError::NonFinite(what));
            }
            if radii.iter().any(|&r| r < T::zero()) {
                return Err(MdpError::NegativeRadius(what));
            }
        }
        if let Some(mask) = &self.forbidden {
            if mask.len() != mask_len {
                return Err(MdpError::DimensionMismatch {
                    what: "forbidden mask",
                    expected: mask_len,
                    got: mask.len(),
                });
            }
            self.check_mask(inst, mask)?;
        }
        Ok(())
    }

    fn check_mask(&self, inst: &MdpInstance<T>, mask: &[bool]) -> Result<()> {
        let (ns, na) = (inst.num_states, inst.num_actions);
        match self.rect {
            Rectangularity::SA => {
                for s in 0..ns {
                    for a in 0..na {
                        let m = &mask[(s * na + a) * ns..(s * na + a + 1) * ns];
                        check_row(s, m, inst.kernel_row(s, a))?;
                    }
                }
            }
            Rectangularity::S => {
                for s in 0..ns {
                    let m = &mask[s * ns..(s + 1) * ns];
                    for a in 0..na {
                        check_row(s, m, inst.kernel_row(s, a))?;
                    }
                }
            }
            Rectangularity::NonRobust => {}
        }
        Ok(())
    }

    /// Kernel radii larger than the smallest nominal mass admit signed
    /// kernels; the operators stay well defined but the model is unusual.
    pub(crate) fn warn_large_beta(&self, inst: &MdpInstance<T>) {
        let min_mass = inst
            .kernel
            .iter()
            .filter(|&&p| p > T::zero())
            .fold(T::infinity(), |m, &p| m.min(p));
        if let Some(b) = self.beta.iter().find(|&&b| b > min_mass) {
            log::warn!(
                "kernel radius {b} exceeds smallest nonzero nominal probability {min_mass}; \
                 the uncertainty set contains signed kernels"
            );
        }
    }

    /// Allowed next states for the penalty of `(s, a)` (`a` ignored for `S`).
    pub fn allowed_next(&self, num_states: usize, num_actions: usize, s: usize, a: usize) -> Option<Vec<bool>> {
        let mask = self.forbidden.as_ref()?;
        let slice = match self.rect {
            Rectangularity::SA => {
                let start = (s * num_actions + a) * num_states;
                &mask[start..start + num_states]
            }
            Rectangularity::S => &mask[s * num_states..(s + 1) * num_states],
            Rectangularity::NonRobust => return None,
        };
        Some(slice.iter().map(|f| !f).collect())
    }
}

fn check_row<T: Scalar>(s: usize, forbidden: &[bool], row: &[T]) -> Result<()> {
    if forbidden.iter().all(|&f| f) {
        return Err(MdpError::AllForbidden { state: s });
    }
    for (t, (&f, &p)) in forbidden.iter().zip(row).enumerate() {
        if f && p != T::zero() {
            return Err(MdpError::ForbiddenNotZero { state: s, next: t });
        }
    }
    Ok(())
}
