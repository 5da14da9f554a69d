//! Annealed Langevin sampling for the real Poisson branch and the complex
//! branch, plus ensemble statistics over independent runs.
//!
//! Each level `t = 1..=T` performs `steps_per_level` updates
//! `x ← x + α_t Δ + √(2α_t) n` where `Δ` is the likelihood score plus the
//! prior score at `σ_t` and `n` is standard normal (independently on Re and
//! Im for complex states). The estimate is the state after level `T`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forward::ForwardModel;
use crate::hio::{hio_solve, HioConfig, Support};
use crate::image::{ComplexImage, RealImage};
use crate::likelihood::{complex_score_general, poisson_implicit_step, remaining_variance, X_FLOOR};
use crate::measurement::MeasurementStack;
use crate::prior::ScoreProvider;
use crate::rng::RngStream;
use crate::schedule::{step_size, SigmaSchedule};

/// How the sampler's initial state is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `max(y, floor)` for real runs; `√y` with zero phase for complex runs.
    FromMeasurement,
    /// HIO reconstruction plus complex Gaussian noise with per-component
    /// standard deviation `noise_scale·σ_1`. Fourier-magnitude model only.
    NoisyHio { noise_scale: f64, hio: HioConfig },
    /// `H^H √y` scaled to unit peak amplitude.
    Adjoint,
    ProvidedReal(RealImage),
    ProvidedComplex(ComplexImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub schedule: SigmaSchedule,
    pub steps_per_level: usize,
    /// Lower bound applied to real states after every update.
    pub clamp_floor: f64,
    pub init: Init,
    /// Keep the state after every level.
    pub record_trajectory: bool,
}

impl SamplerConfig {
    pub fn new(schedule: SigmaSchedule) -> Self {
        Self {
            schedule,
            steps_per_level: 1,
            clamp_floor: X_FLOOR,
            init: Init::FromMeasurement,
            record_trajectory: false,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.steps_per_level == 0 {
            return Err(Error::Config("steps_per_level must be at least 1".into()));
        }
        if !(self.clamp_floor.is_finite() && self.clamp_floor > 0.0) {
            return Err(Error::Config(format!(
                "clamp_floor must be positive, got {}",
                self.clamp_floor
            )));
        }
        Ok(())
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Mean of `‖α_t Δ‖₂` over the updates of each level.
    pub drift_norms: Vec<f64>,
    /// Real-branch pixel updates that landed below the clamp floor.
    pub likelihood_clamps: usize,
    /// Residual of the HIO initializer, when used.
    pub hio_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub estimate: T,
    pub trajectory: Vec<T>,
    pub diagnostics: Diagnostics,
}

fn divergence_check<'a>(mut values: impl Iterator<Item = &'a f64>, iteration: usize) -> Result<()> {
    if values.any(|v| !v.is_finite()) {
        return Err(Error::Divergence { iteration });
    }
    Ok(())
}

/// Initial state of a real run.
pub fn init_real(cfg: &SamplerConfig, y: &RealImage) -> Result<RealImage> {
    let floor = cfg.clamp_floor;
    match &cfg.init {
        Init::FromMeasurement => Ok(y.map(|v| v.max(floor))),
        Init::ProvidedReal(x) => {
            x.ensure_same_dims(y.dims())?;
            Ok(x.map(|v| v.max(floor)))
        }
        other => Err(Error::Config(format!(
            "initialization {other:?} is not available for real runs"
        ))),
    }
}

/// Initial state of a complex run, and the HIO residual if HIO was used.
pub fn init_complex(
    cfg: &SamplerConfig,
    stack: &MeasurementStack,
    model: &ForwardModel,
    rng: &mut RngStream,
) -> Result<(ComplexImage, Option<f64>)> {
    let object_dims = model.object_dims(stack.dims())?;
    let sqrt_y = |img: &RealImage| img.map(f64::sqrt).to_complex();
    match &cfg.init {
        Init::FromMeasurement => {
            if stack.dims() != object_dims || stack.m() != 1 {
                return Err(Error::Config(
                    "measurement initialization needs a single measurement on the object grid"
                        .into(),
                ));
            }
            Ok((sqrt_y(&stack.images()[0]), None))
        }
        Init::Adjoint => {
            let fields: Vec<ComplexImage> = stack.images().iter().map(sqrt_y).collect();
            let back = model.adjoint(&fields)?;
            let peak = back.amplitude().max();
            let out = if peak > 0.0 {
                back.scale(Complex64::new(1.0 / peak, 0.0))
            } else {
                back
            };
            Ok((out, None))
        }
        Init::NoisyHio { noise_scale, hio } => {
            if !(noise_scale.is_finite() && *noise_scale >= 0.0) {
                return Err(Error::Config(format!(
                    "noise_scale must be non-negative, got {noise_scale}"
                )));
            }
            let (start, residual) = hio_start(stack, model, hio, rng)?;
            let std = noise_scale * cfg.schedule.sigma(1)?;
            Ok((perturb(&start, std, rng), Some(residual)))
        }
        Init::ProvidedComplex(o) => {
            o.ensure_same_dims(object_dims)?;
            Ok((o.clone(), None))
        }
        Init::ProvidedReal(x) => {
            x.ensure_same_dims(object_dims)?;
            Ok((x.to_complex(), None))
        }
    }
}

/// HIO reconstruction of a Fourier-magnitude measurement, cropped to the
/// object grid, with its residual. The support is the unpadded object box.
pub fn hio_start(
    stack: &MeasurementStack,
    model: &ForwardModel,
    hio: &HioConfig,
    rng: &mut RngStream,
) -> Result<(ComplexImage, f64)> {
    if !matches!(model, ForwardModel::FourierMagnitude { .. }) {
        return Err(Error::Config(
            "HIO initialization requires the Fourier-magnitude model".into(),
        ));
    }
    let (gh, gw) = stack.dims();
    let (oh, ow) = model.object_dims(stack.dims())?;
    let mags = stack.images()[0].map(f64::sqrt);
    let support = Support::top_left(gh, gw, oh, ow)?;
    let result = hio_solve(&mags, &support, hio, rng)?;
    let out = ComplexImage::from_fn(oh, ow, |r, c| result.best.get(r, c));
    Ok((out, result.residual))
}

/// Adds complex Gaussian noise with per-component standard deviation `std`.
pub fn perturb(o: &ComplexImage, std: f64, rng: &mut RngStream) -> ComplexImage {
    let mut out = o.clone();
    if std > 0.0 {
        for v in out.as_mut_slice() {
            *v += Complex64::new(rng.standard_normal(), rng.standard_normal()) * std;
        }
    }
    out
}

/// Real branch: Poisson likelihood score plus a real prior score.
pub fn run_real(
    y: &RealImage,
    provider: &ScoreProvider,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<RunOutput<RealImage>> {
    cfg.validate()?;
    if let Some(i) = y.as_slice().iter().position(|&v| v < 0.0) {
        return Err(Error::Domain(format!("negative measurement at index {i}")));
    }
    let schedule = &cfg.schedule;
    let sigma0 = schedule.sigma0();
    let mut x = init_real(cfg, y)?;
    let mut diag = Diagnostics::default();
    let mut trajectory = Vec::new();
    let mut iteration = 0;
    for t in 1..=schedule.len() {
        let sigma_t = schedule.sigma(t)?;
        let alpha = step_size(schedule, t)?;
        let noise_std = (2.0 * alpha).sqrt();
        let mut drift_sum = 0.0;
        for _ in 0..cfg.steps_per_level {
            iteration += 1;
            if alpha == 0.0 {
                continue;
            }
            let s2 = remaining_variance(sigma0, sigma_t)?;
            let prior = provider.score_real(&x, sigma_t)?;
            let mut drift_sq = 0.0;
            // prior and noise explicit, likelihood implicit
            for ((xv, &yv), p) in x
                .as_mut_slice()
                .iter_mut()
                .zip(y.as_slice())
                .zip(prior.as_slice())
            {
                let kicked = *xv + noise_std * rng.standard_normal();
                let next = poisson_implicit_step(yv, kicked + alpha * p, alpha, s2);
                let drift = next - kicked;
                drift_sq += drift * drift;
                if next < cfg.clamp_floor {
                    diag.likelihood_clamps += 1;
                }
                *xv = next.max(cfg.clamp_floor);
            }
            // max() drops NaN, so check the drift as well as the state
            if !drift_sq.is_finite() {
                return Err(Error::Divergence { iteration });
            }
            divergence_check(x.as_slice().iter(), iteration)?;
            drift_sum += drift_sq.sqrt();
        }
        diag.drift_norms.push(drift_sum / cfg.steps_per_level as f64);
        if cfg.record_trajectory {
            trajectory.push(x.clone());
        }
    }
    Ok(RunOutput {
        estimate: x,
        trajectory,
        diagnostics: diag,
    })
}

/// Complex branch: relaxed complex likelihood score through `model` plus a
/// complex prior score.
pub fn run_complex(
    stack: &MeasurementStack,
    model: &ForwardModel,
    provider: &ScoreProvider,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> Result<RunOutput<ComplexImage>> {
    cfg.validate()?;
    let schedule = &cfg.schedule;
    let sigma0 = schedule.sigma0();
    let (mut o, hio_residual) = init_complex(cfg, stack, model, rng)?;
    let mut diag = Diagnostics {
        hio_residual,
        ..Diagnostics::default()
    };
    let mut trajectory = Vec::new();
    let mut iteration = 0;
    for t in 1..=schedule.len() {
        let sigma_t = schedule.sigma(t)?;
        let alpha = step_size(schedule, t)?;
        let noise_std = (2.0 * alpha).sqrt();
        let mut drift_sum = 0.0;
        for _ in 0..cfg.steps_per_level {
            iteration += 1;
            if alpha == 0.0 {
                continue;
            }
            let lik = complex_score_general(stack, &o, model, sigma0, sigma_t)?;
            let prior = provider.score_complex(&o, sigma_t)?;
            let mut drift_sq = 0.0;
            for ((ov, l), p) in o
                .as_mut_slice()
                .iter_mut()
                .zip(lik.as_slice())
                .zip(prior.as_slice())
            {
                let drift = (l + p) * alpha;
                drift_sq += drift.norm_sqr();
                let n = Complex64::new(rng.standard_normal(), rng.standard_normal());
                *ov += drift + n * noise_std;
            }
            if !drift_sq.is_finite() || !o.is_all_finite() {
                return Err(Error::Divergence { iteration });
            }
            drift_sum += drift_sq.sqrt();
        }
        diag.drift_norms.push(drift_sum / cfg.steps_per_level as f64);
        if cfg.record_trajectory {
            trajectory.push(o.clone());
        }
    }
    Ok(RunOutput {
        estimate: o,
        trajectory,
        diagnostics: diag,
    })
}

/// Mergeable per-pixel count/mean/M2 accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn from_sample(values: &[f64]) -> Self {
        Self {
            count: 1,
            mean: values.to_vec(),
            m2: vec![0.0; values.len()],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.merge(&Self::from_sample(values));
    }

    /// Combines two accumulators as if all samples had been pushed into one.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.m2.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|m| m / d).collect()
    }
}

/// Reduces samples with a fixed pairwise tree, so the result is independent
/// of how the samples were produced.
fn pairwise_moments(samples: &[Vec<f64>]) -> Moments {
    match samples.len() {
        0 => Moments::new(0),
        1 => Moments::from_sample(&samples[0]),
        n => {
            let (a, b) = samples.split_at(n / 2);
            let mut left = pairwise_moments(a);
            left.merge(&pairwise_moments(b));
            left
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealEnsemble {
    pub mean: RealImage,
    pub variance: RealImage,
    pub samples: Vec<RealImage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnsemble {
    pub amplitude_mean: RealImage,
    pub amplitude_variance: RealImage,
    /// Per-pixel circular mean of the phase.
    pub phase_mean: RealImage,
    /// Unbiased variance of the phase wrapped about its circular mean.
    pub phase_variance: RealImage,
    /// Per-pixel mean resultant length `|mean(e^{jφ})|` in `[0, 1]`.
    pub phase_concentration: RealImage,
    pub samples: Vec<ComplexImage>,
}

fn check_runs(n_runs: usize) -> Result<()> {
    if n_runs < 2 {
        return Err(Error::Config(format!(
            "an ensemble needs at least 2 runs, got {n_runs}"
        )));
    }
    Ok(())
}

/// Runs `run(stream_id)` for stream ids `0..n_runs` on up to `jobs` threads
/// (`0` = rayon default) and returns the results in stream order.
pub fn run_streams<T, F>(n_runs: usize, jobs: usize, run: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n_runs as u64).into_par_iter().map(&run).collect())
}

pub fn ensemble_real<F>(n_runs: usize, jobs: usize, run: F) -> Result<RealEnsemble>
where
    F: Fn(u64) -> Result<RealImage> + Sync,
{
    check_runs(n_runs)?;
    let samples = run_streams(n_runs, jobs, run)?;
    Ok(summarize_real(samples))
}

pub fn summarize_real(samples: Vec<RealImage>) -> RealEnsemble {
    let (h, w) = samples[0].dims();
    let values: Vec<Vec<f64>> = samples.iter().map(|s| s.as_slice().to_vec()).collect();
    let m = pairwise_moments(&values);
    RealEnsemble {
        mean: RealImage::from_vec_unchecked(h, w, m.mean().to_vec()),
        variance: RealImage::from_vec_unchecked(h, w, m.variance()),
        samples,
    }
}

pub fn ensemble_complex<F>(n_runs: usize, jobs: usize, run: F) -> Result<ComplexEnsemble>
where
    F: Fn(u64) -> Result<ComplexImage> + Sync,
{
    check_runs(n_runs)?;
    let samples = run_streams(n_runs, jobs, run)?;
    Ok(summarize_complex(samples))
}

fn wrap(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

pub fn summarize_complex(samples: Vec<ComplexImage>) -> ComplexEnsemble {
    let (h, w) = samples[0].dims();
    let n = samples.len();
    let amps: Vec<Vec<f64>> = samples.iter().map(|s| s.amplitude().into_vec()).collect();
    let amp = pairwise_moments(&amps);
    let len = h * w;
    let mut resultant = vec![Complex64::new(0.0, 0.0); len];
    for s in &samples {
        for (r, v) in resultant.iter_mut().zip(s.as_slice()) {
            *r += Complex64::from_polar(1.0, v.arg());
        }
    }
    let phase_mean: Vec<f64> = resultant.iter().map(|r| r.arg()).collect();
    let concentration: Vec<f64> = resultant.iter().map(|r| r.norm() / n as f64).collect();
    let deviations: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            s.as_slice()
                .iter()
                .zip(&phase_mean)
                .map(|(v, m)| wrap(v.arg() - m))
                .collect()
        })
        .collect();
    let dev = pairwise_moments(&deviations);
    ComplexEnsemble {
        amplitude_mean: RealImage::from_vec_unchecked(h, w, amp.mean().to_vec()),
        amplitude_variance: RealImage::from_vec_unchecked(h, w, amp.variance()),
        phase_mean: RealImage::from_vec_unchecked(h, w, phase_mean),
        phase_variance: RealImage::from_vec_unchecked(h, w, dev.variance()),
        phase_concentration: RealImage::from_vec_unchecked(h, w, concentration),
        samples,
    }
}
