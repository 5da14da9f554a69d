//! Annealing noise levels and the Langevin step-size rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of `sigma0` used for the first annealing level by default.
pub const DEFAULT_SIGMA1_FRACTION: f64 = 0.9;
/// Fraction of `sigma0` used for the last annealing level by default.
pub const DEFAULT_SIGMAT_FRACTION: f64 = 0.01;
pub const DEFAULT_LEVELS: usize = 1000;
/// Default step scale expressed relative to `σ_T²`: `ε = ratio·σ_T²`.
///
/// With `α_t = ε σ_t²/σ_T²` the prior term's per-step contraction is
/// `ε/σ_T²` divided by the pixel intensity, independent of `t`, so the
/// ratio (not the absolute ε) is what controls stability.
pub const DEFAULT_EPS_RATIO: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Geometric,
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        }
    }
}

/// `σ_0 > σ_1 ≥ … ≥ σ_T > 0` plus the step scale ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSchedule {
    sigma0: f64,
    sigmas: Vec<f64>,
    eps: f64,
}

impl SigmaSchedule {
    /// Validates an explicit level list. `eps = 0` is accepted and freezes the
    /// sampler at its initial state.
    pub fn new(sigma0: f64, sigmas: Vec<f64>, eps: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Schedule(format!("sigma0 must be positive, got {sigma0}")));
        }
        if sigmas.is_empty() {
            return Err(Error::Schedule("schedule needs at least one level".into()));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Schedule(format!("eps must be non-negative, got {eps}")));
        }
        if !(sigmas[0] < sigma0) {
            return Err(Error::Schedule(format!(
                "sigma_1 = {} must be strictly below sigma0 = {sigma0}",
                sigmas[0]
            )));
        }
        for w in sigmas.windows(2) {
            if w[1] > w[0] {
                return Err(Error::Schedule(format!(
                    "levels must be non-increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        let last = *sigmas.last().unwrap();
        if !(last > 0.0) || sigmas.iter().any(|s| !s.is_finite()) {
            return Err(Error::Schedule(format!("sigma_T must be positive, got {last}")));
        }
        Ok(Self {
            sigma0,
            sigmas,
            eps,
        })
    }

    /// The default annealing schedule for a given measurement noise level:
    /// geometric from `0.9·σ_0` to `0.01·σ_0` over 1000 levels.
    pub fn default_for(sigma0: f64) -> Result<Self> {
        let s1 = DEFAULT_SIGMA1_FRACTION * sigma0;
        let st = DEFAULT_SIGMAT_FRACTION * sigma0;
        make_schedule(
            sigma0,
            s1,
            st,
            DEFAULT_LEVELS,
            ScheduleKind::Geometric,
            DEFAULT_EPS_RATIO * st * st,
        )
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma_last(&self) -> f64 {
        *self.sigmas.last().unwrap()
    }

    /// `σ_t` for a 1-based level index.
    pub fn sigma(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.sigmas.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.sigmas.len(),
            });
        }
        Ok(self.sigmas[t - 1])
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::new(self.sigma0, self.sigmas.clone(), eps)
    }
}

/// Interpolates `t_count` levels from `sigma1` down to `sigma_t`.
pub fn make_schedule(
    sigma0: f64,
    sigma1: f64,
    sigma_t: f64,
    t_count: usize,
    kind: ScheduleKind,
    eps: f64,
) -> Result<SigmaSchedule> {
    if t_count == 0 {
        return Err(Error::Schedule("t_count must be at least 1".into()));
    }
    if !(sigma0 > sigma1 && sigma1 >= sigma_t && sigma_t > 0.0) {
        return Err(Error::Schedule(format!(
            "need sigma0 > sigma1 >= sigmaT > 0, got {sigma0}, {sigma1}, {sigma_t}"
        )));
    }
    let sigmas = if t_count == 1 {
        if sigma1 != sigma_t {
            return Err(Error::Schedule(
                "a single-level schedule needs sigma1 == sigmaT".into(),
            ));
        }
        vec![sigma1]
    } else {
        let last = (t_count - 1) as f64;
        let mut v: Vec<f64> = (0..t_count)
            .map(|i| {
                let f = i as f64 / last;
                match kind {
                    ScheduleKind::Geometric => sigma1 * (sigma_t / sigma1).powf(f),
                    ScheduleKind::Linear => sigma1 + (sigma_t - sigma1) * f,
                }
            })
            .collect();
        v[0] = sigma1;
        v[t_count - 1] = sigma_t;
        v
    };
    SigmaSchedule::new(sigma0, sigmas, eps)
}

/// `α_t = ε·σ_t²/σ_T²` for a 1-based level index.
pub fn step_size(schedule: &SigmaSchedule, t: usize) -> Result<f64> {
    let s = schedule.sigma(t)?;
    let st = schedule.sigma_last();
    Ok(schedule.eps * (s * s) / (st * st))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_level() {
        let s = make_schedule(0.1, 0.09, 0.09, 1, ScheduleKind::Geometric, 1e-5).unwrap();
        assert_eq!(s.sigmas(), &[0.09]);
    }

    #[test]
    fn geometric_three_levels() {
        let s = make_schedule(0.1, 0.08, 0.02, 3, ScheduleKind::Geometric, 1e-5).unwrap();
        let expected = [0.08, 0.04, 0.02];
        for (a, b) in s.sigmas().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_levels() {
        let s = make_schedule(1.0, 0.5, 0.1, 5, ScheduleKind::Linear, 1e-5).unwrap();
        let expected = [0.5, 0.4, 0.3, 0.2, 0.1];
        for (a, b) in s.sigmas().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ordering_violation() {
        assert!(matches!(
            make_schedule(0.1, 0.2, 0.01, 5, ScheduleKind::Geometric, 1e-5),
            Err(Error::Schedule(_))
        ));
        assert!(make_schedule(0.1, 0.1, 0.01, 5, ScheduleKind::Geometric, 1e-5).is_err());
        assert!(make_schedule(0.1, 0.05, 0.0, 5, ScheduleKind::Geometric, 1e-5).is_err());
        assert!(make_schedule(0.1, 0.05, 0.06, 5, ScheduleKind::Geometric, 1e-5).is_err());
        assert!(SigmaSchedule::new(0.1, vec![0.05, 0.06], 1e-5).is_err());
    }

    #[test]
    fn step_sizes() {
        let s = make_schedule(0.1, 0.08, 0.02, 3, ScheduleKind::Geometric, 1e-5).unwrap();
        assert!((step_size(&s, 3).unwrap() - 1e-5).abs() < 1e-20);
        assert!((step_size(&s, 1).unwrap() - 1.6e-4).abs() < 1e-15);
        assert!(matches!(step_size(&s, 0), Err(Error::IndexOutOfRange { .. })));
        assert!(step_size(&s, 4).is_err());
    }

    #[test]
    fn default_schedule_shape() {
        let s = SigmaSchedule::default_for(0.1).unwrap();
        assert_eq!(s.len(), DEFAULT_LEVELS);
        assert!((s.sigmas()[0] - 0.09).abs() < 1e-15);
        assert!((s.sigma_last() - 0.001).abs() < 1e-15);
        for &sig in s.sigmas() {
            assert!(s.sigma0() * s.sigma0() - sig * sig > 0.0);
        }
    }

    proptest::proptest! {
        #[test]
        fn step_size_non_increasing(
            sigma0 in 0.01f64..1.0,
            f1 in 0.05f64..0.99,
            ft in 0.001f64..1.0,
            n in 1usize..200,
            linear in proptest::bool::ANY,
        ) {
            let s1 = sigma0 * f1;
            let st = if n == 1 { s1 } else { s1 * ft };
            let kind = if linear { ScheduleKind::Linear } else { ScheduleKind::Geometric };
            let s = make_schedule(sigma0, s1, st, n, kind, 1e-5).unwrap();
            let mut prev = f64::INFINITY;
            for t in 1..=s.len() {
                let a = step_size(&s, t).unwrap();
                proptest::prop_assert!(a <= prev);
                prev = a;
                let sig = s.sigma(t).unwrap();
                proptest::prop_assert!(sigma0 * sigma0 - sig * sig > 0.0);
            }
        }
    }
}
