//! Command-line front end: argument parsing, config layering, file I/O and
//! run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{ConfigMap, PriorSpec};
use crate::container::{self, ArrayStack};
use crate::error::{Error, Result};
use crate::forward::ForwardSpec;
use crate::hio::{align_ambiguities, HioConfig};
use crate::image::{ComplexImage, RealImage};
use crate::measurement::{MeasurementStack, NoiseParams};
use crate::metrics::{report_complex, report_real, MetricsReport};
use crate::noise_sim::{simulate_intensity_measurements, simulate_measurement};
use crate::prior::{ComplexMixture, ScoreProvider};
use crate::protocol::{Endpoint, ScoreClient, ScoreFrame};
use crate::rng::RngStream;
use crate::sampler::{
    hio_start, perturb, run_complex, run_real, run_streams, summarize_complex, summarize_real,
    Diagnostics, Init, RunOutput, SamplerConfig,
};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const SEED_ENV: &str = "CVL_SEED";
const DEFAULT_OUTPUT: &str = "cvl-output";
/// Keys describing how a measurement was made; `simulate` writes these to a
/// config file that the reconstruction commands can load.
const MEASUREMENT_KEYS: &[&str] = &[
    "fwc",
    "sigma0",
    "quant_bits",
    "model",
    "pad_factor",
    "leds",
    "led_spacing",
    "pupil_radius",
    "rho",
];
/// Stream id reserved for draws made once per command (simulation, HIO).
const COMMAND_STREAM: u64 = u64::MAX;

#[derive(Debug, Parser)]
#[command(name = "cvl", version, about = "Posterior sampling for photon-limited imaging")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate noisy intensity measurements of a clean image or object.
    Simulate(SimulateArgs),
    /// Poisson denoising of a single real measurement.
    Denoise(SampleArgs),
    /// Phase retrieval from an oversampled Fourier-magnitude measurement.
    PhaseRetrieval(SampleArgs),
    /// Fourier ptychography from an LED-array measurement stack.
    Ptychography(SampleArgs),
    /// Standalone HIO phase retrieval.
    Hio(HioArgs),
    /// Compare an estimate with ground truth and print JSON.
    Metrics(MetricsArgs),
    /// Send one request to a score endpoint and validate the response.
    ProtocolCheck(ProtocolArgs),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles and HIO restarts (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Rerun with the seed, config and inputs recorded in a manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Clean real image (PNG or container) or complex object (container).
    #[arg(long)]
    input: Option<PathBuf>,
    /// identity, fourier-magnitude or ptychography.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[command(flatten)]
    common: Common,
    /// Measurement stack written by `simulate`.
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Ground truth for metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// zero, discrete:<path> or external:<command or host:port>.
    #[arg(long)]
    prior: Option<String>,
    /// measurement, hio, adjoint or file.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long)]
    hio_restarts: Option<usize>,
}

#[derive(Debug, Args)]
struct HioArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    measurements: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    hio_restarts: Option<usize>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Debug, Args)]
struct ProtocolArgs {
    /// `host:port` or a shell command speaking the protocol on stdio.
    #[arg(long)]
    endpoint: String,
    #[arg(long)]
    complex: bool,
    #[arg(long, default_value_t = 8)]
    size: u32,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => finish(cmd_simulate(a)?, out),
        Command::Denoise(a) => finish(cmd_sample(Branch::Denoise, a)?, out),
        Command::PhaseRetrieval(a) => finish(cmd_sample(Branch::PhaseRetrieval, a)?, out),
        Command::Ptychography(a) => finish(cmd_sample(Branch::Ptychography, a)?, out),
        Command::Hio(a) => finish(cmd_hio(a)?, out),
        Command::Metrics(a) => print_json(&cmd_metrics(&a)?, out),
        Command::ProtocolCheck(a) => print_json(&cmd_protocol_check(&a)?, out),
    }
}

fn print_json(value: &Value, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{value}")?;
    Ok(())
}

fn finish(manifest_path: PathBuf, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "wrote {}", manifest_path.display())?;
    Ok(())
}

/// Seed, config and inputs after layering defaults, command defaults, a
/// recorded manifest, the config file, `--set` and dedicated flags.
struct Resolved {
    command: &'static str,
    config: ConfigMap,
    seed: u64,
    jobs: usize,
    output: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

fn resolve(
    command: &'static str,
    common: &Common,
    implied: &[(&str, &str)],
    flags: &[(&str, Option<String>)],
    inputs: &[(&str, Option<&PathBuf>)],
) -> Result<Resolved> {
    let mut config = ConfigMap::default();
    for (k, v) in implied {
        config.set(k, v)?;
    }
    let mut recorded_inputs = BTreeMap::new();
    if let Some(path) = &common.from_manifest {
        let manifest = read_manifest(path)?;
        if manifest.command != command {
            return Err(Error::Config(format!(
                "manifest {} records command `{}`, not `{command}`",
                path.display(),
                manifest.command
            )));
        }
        config = ConfigMap::from_map(manifest.config)?;
        recorded_inputs = manifest.inputs;
    }
    if let Some(path) = &common.config {
        config.apply_file(path)?;
    }
    for s in &common.set {
        config.apply_assignment(s)?;
    }
    for (k, v) in flags {
        if let Some(v) = v {
            config.set(k, v)?;
        }
    }
    let seed = match common.seed {
        Some(s) => s,
        None => match config.get_opt::<u64>("seed")? {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    Error::Config(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))
                })?,
                Err(_) => 0,
            },
        },
    };
    config.set("seed", &seed.to_string())?;
    if let Some(j) = common.jobs {
        config.set("jobs", &j.to_string())?;
    }
    let jobs = config.get("jobs")?;
    let mut resolved_inputs = BTreeMap::new();
    for (name, given) in inputs {
        let value = match given {
            Some(p) => Some(p.to_string_lossy().into_owned()),
            None => recorded_inputs.get(*name).cloned(),
        };
        if let Some(v) = value {
            resolved_inputs.insert(name.to_string(), v);
        }
    }
    Ok(Resolved {
        command,
        config,
        seed,
        jobs,
        output: common
            .output
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        inputs: resolved_inputs,
        outputs: Vec::new(),
    })
}

impl Resolved {
    fn input(&self, name: &str) -> Result<PathBuf> {
        self.inputs
            .get(name)
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config(format!("missing required input --{name}")))
    }

    fn optional_input(&self, name: &str) -> Option<PathBuf> {
        self.inputs.get(name).map(PathBuf::from)
    }

    fn prepare_output(&self) -> Result<()> {
        fs::create_dir_all(&self.output).map_err(|e| {
            Error::Config(format!("creating {}: {e}", self.output.display()))
        })
    }

    fn save(&mut self, name: &str, stack: &ArrayStack) -> Result<()> {
        container::save(&self.output.join(name), stack)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn save_png(&mut self, name: &str, img: &RealImage, range: Option<(f64, f64)>) -> Result<()> {
        container::save_png(&self.output.join(name), img, range)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_manifest(mut self, results: Value) -> Result<PathBuf> {
        self.outputs.push(MANIFEST_NAME.to_string());
        let manifest = json!({
            "tool": "cvl",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "config": self.config.as_map(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": results,
        });
        let path = self.output.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(format!("serializing manifest: {e}")))?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

/// The parts of a manifest needed to rerun it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRun {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
}

pub fn read_manifest(path: &Path) -> Result<RecordedRun> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("parsing {}: {e}", path.display())))?;
    let field = |name: &str| -> Result<BTreeMap<String, String>> {
        serde_json::from_value(value.get(name).cloned().unwrap_or(Value::Null))
            .map_err(|e| Error::Config(format!("manifest field `{name}`: {e}")))
    };
    let command = value
        .get("command")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Config("manifest has no command".into()))?
        .to_string();
    Ok(RecordedRun {
        command,
        config: field("config")?,
        inputs: field("inputs")?,
    })
}

enum Loaded {
    Real(RealImage),
    Complex(ComplexImage),
}

impl Loaded {
    fn into_complex(self) -> ComplexImage {
        match self {
            Loaded::Real(x) => x.to_complex(),
            Loaded::Complex(o) => o,
        }
    }
}

/// First frame of a container, or a PNG as real intensities.
fn load_image(path: &Path) -> Result<Loaded> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        return container::load_png(path).map(Loaded::Real);
    }
    let stack = container::load(path)?;
    let first = |n: usize| -> Result<()> {
        if n == 0 {
            Err(Error::Format(format!("{} holds no frames", path.display())))
        } else {
            Ok(())
        }
    };
    first(stack.count())?;
    match stack {
        ArrayStack::Complex(mut v) => Ok(Loaded::Complex(v.swap_remove(0))),
        other => Ok(Loaded::Real(other.into_real()?.swap_remove(0))),
    }
}

fn load_real_stack(path: &Path) -> Result<Vec<RealImage>> {
    let frames = container::load(path)?.into_real()?;
    if frames.is_empty() {
        return Err(Error::Format(format!("{} holds no frames", path.display())));
    }
    Ok(frames)
}

fn cmd_simulate(args: SimulateArgs) -> Result<PathBuf> {
    let mut r = resolve(
        "simulate",
        &args.common,
        &[],
        &[("model", args.model.clone())],
        &[("input", args.input.as_ref())],
    )?;
    let input = r.input("input")?;
    let noise = r.config.noise()?;
    let spec = r.config.forward_spec()?;
    let object = load_image(&input)?;
    let mut rng = RngStream::new(r.seed, COMMAND_STREAM);
    let stack = match (&spec, object) {
        (ForwardSpec::Identity, Loaded::Real(x)) => {
            let y = simulate_measurement(&x, &noise, &mut rng)?;
            MeasurementStack::new(vec![y], noise, 1.0)?
        }
        (spec, object) => {
            let o = object.into_complex();
            let model = spec.build(o.dims())?;
            simulate_intensity_measurements(&o, &model, &noise, &mut rng)?
        }
    };
    let (h, w) = stack.dims();
    let results = json!({
        "sigma0": noise.sigma0(),
        "fwc": noise.fwc(),
        "quant_bits": noise.quant_bits(),
        "m": stack.m(),
        "rho": stack.rho(),
        "height": h,
        "width": w,
    });
    r.prepare_output()?;
    let first = stack.images()[0].clone();
    r.save("measurements.cvl", &ArrayStack::Real(stack.into_images()))?;
    r.save_png("measurement.png", &first, Some((0.0, 1.0)))?;
    let measurement_keys: String = MEASUREMENT_KEYS
        .iter()
        .map(|k| format!("{k} = {}\n", r.config.raw(k)))
        .collect();
    fs::write(r.output.join("config.txt"), measurement_keys)?;
    r.outputs.push("config.txt".into());
    r.write_manifest(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Denoise,
    PhaseRetrieval,
    Ptychography,
}

impl Branch {
    fn command(self) -> &'static str {
        match self {
            Branch::Denoise => "denoise",
            Branch::PhaseRetrieval => "phase-retrieval",
            Branch::Ptychography => "ptychography",
        }
    }

    fn implied(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Branch::Denoise => &[("model", "identity"), ("init", "measurement")],
            Branch::PhaseRetrieval => &[("model", "fourier-magnitude"), ("init", "hio")],
            Branch::Ptychography => &[("model", "ptychography"), ("init", "adjoint")],
        }
    }

    fn accepts(self, spec: &ForwardSpec) -> bool {
        matches!(
            (self, spec),
            (Branch::Denoise, ForwardSpec::Identity)
                | (Branch::PhaseRetrieval, ForwardSpec::FourierMagnitude { .. })
                | (Branch::Ptychography, ForwardSpec::Ptychography { .. })
        )
    }
}

fn sampler_config(config: &ConfigMap, noise: &NoiseParams) -> Result<SamplerConfig> {
    let mut cfg = SamplerConfig::new(config.schedule(noise.sigma0())?);
    cfg.steps_per_level = config.get("steps_per_level")?;
    cfg.clamp_floor = config.get("clamp_floor")?;
    Ok(cfg)
}

fn diagnostics_json(runs: &[Diagnostics]) -> Value {
    let per_run: Vec<Value> = runs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            json!({
                "stream": i,
                "likelihood_clamps": d.likelihood_clamps,
                "final_drift_norm": d.drift_norms.last().copied(),
            })
        })
        .collect();
    json!({ "runs": per_run })
}

fn metrics_json(report: Option<MetricsReport>) -> Result<Value> {
    match report {
        Some(r) => serde_json::to_value(r)
            .map_err(|e| Error::Format(format!("serializing metrics: {e}"))),
        None => Ok(Value::Null),
    }
}

fn save_trajectory<T>(
    r: &mut Resolved,
    trajectory: &[T],
    to_stack: impl Fn(&T) -> ArrayStack,
) -> Result<()> {
    if trajectory.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(r.output.join("trajectory"))?;
    for (i, state) in trajectory.iter().enumerate() {
        r.save(&format!("trajectory/level_{:05}.cvl", i + 1), &to_stack(state))?;
    }
    Ok(())
}

fn cmd_sample(branch: Branch, args: SampleArgs) -> Result<PathBuf> {
    let flags = [
        ("prior", args.prior.clone()),
        ("init", args.init.clone()),
        ("n_runs", args.n_runs.map(|n| n.to_string())),
        ("hio_restarts", args.hio_restarts.map(|n| n.to_string())),
    ];
    let r = resolve(
        branch.command(),
        &args.common,
        branch.implied(),
        &flags,
        &[
            ("measurements", args.measurements.as_ref()),
            ("truth", args.truth.as_ref()),
        ],
    )?;
    let spec = r.config.forward_spec()?;
    if !branch.accepts(&spec) {
        return Err(Error::Config(format!(
            "model `{}` does not fit the {} command",
            r.config.raw("model"),
            branch.command()
        )));
    }
    let n_runs: usize = r.config.get("n_runs")?;
    if n_runs == 0 {
        return Err(Error::Config("n_runs must be at least 1".into()));
    }
    let images = load_real_stack(&r.input("measurements")?)?;
    let truth = r.optional_input("truth").map(|p| load_image(&p)).transpose()?;
    let noise = r.config.noise()?;
    let cfg = sampler_config(&r.config, &noise)?;
    let prior = r.config.prior()?;
    r.prepare_output()?;
    match branch {
        Branch::Denoise => sample_real(r, images, truth, noise, cfg, prior, n_runs),
        _ => sample_complex(r, branch, &spec, images, truth, noise, cfg, prior, n_runs),
    }
}

fn uniform_or(weights: Option<Vec<f64>>, n: usize) -> Vec<f64> {
    weights.unwrap_or_else(|| vec![1.0; n])
}

fn real_provider(r: &Resolved, prior: PriorSpec) -> Result<ScoreProvider> {
    Ok(match prior {
        PriorSpec::Zero => ScoreProvider::Zero,
        PriorSpec::Discrete(path) => {
            let atoms = load_real_stack(Path::new(&path))?;
            let w = uniform_or(r.config.prior_weights()?, atoms.len());
            ScoreProvider::discrete_real(atoms, &w)?
        }
        PriorSpec::External(ep) => ScoreProvider::external(ep),
    })
}

fn complex_provider(r: &Resolved, prior: PriorSpec) -> Result<ScoreProvider> {
    Ok(match prior {
        PriorSpec::Zero => ScoreProvider::Zero,
        PriorSpec::Discrete(path) => {
            let atoms = match container::load(Path::new(&path))? {
                ArrayStack::Complex(v) => v,
                other => other.into_real()?.iter().map(RealImage::to_complex).collect(),
            };
            let w = uniform_or(r.config.prior_weights()?, atoms.len());
            let mixture = ComplexMixture::new(atoms, &w, r.config.complex_variance()?)?;
            ScoreProvider::DiscreteComplex(mixture)
        }
        PriorSpec::External(ep) => ScoreProvider::external(ep),
    })
}

fn sample_real(
    mut r: Resolved,
    images: Vec<RealImage>,
    truth: Option<Loaded>,
    _noise: NoiseParams,
    mut cfg: SamplerConfig,
    prior: PriorSpec,
    n_runs: usize,
) -> Result<PathBuf> {
    if images.len() != 1 {
        return Err(Error::Config(format!(
            "denoise expects a single measurement, got {}",
            images.len()
        )));
    }
    let y = &images[0];
    cfg.init = match r.config.raw("init") {
        "measurement" => Init::FromMeasurement,
        "file" => match load_image(&r.input_from_config("init_path")?)? {
            Loaded::Real(x) => Init::ProvidedReal(x),
            Loaded::Complex(_) => {
                return Err(Error::Config("denoise needs a real initial image".into()))
            }
        },
        other => return Err(Error::Config(format!("init `{other}` not available for denoise"))),
    };
    let provider = real_provider(&r, prior)?;
    let record = r.config.get::<bool>("record_trajectory")?;
    let seed = r.seed;
    let runs: Vec<RunOutput<RealImage>> = run_streams(n_runs, r.jobs, |i| {
        let mut run_cfg = cfg.clone();
        run_cfg.record_trajectory = record && i == 0;
        run_real(y, &provider, &run_cfg, &mut RngStream::new(seed, i))
    })?;
    let diagnostics = diagnostics_json(&runs.iter().map(|o| o.diagnostics.clone()).collect::<Vec<_>>());
    save_trajectory(&mut r, &runs[0].trajectory, |x| ArrayStack::Real(vec![x.clone()]))?;
    let samples: Vec<RealImage> = runs.into_iter().map(|o| o.estimate).collect();
    r.save("estimate.cvl", &ArrayStack::Real(samples.clone()))?;
    r.save_png("estimate.png", &samples[0], Some((0.0, 1.0)))?;
    let point = if n_runs > 1 {
        let ens = summarize_real(samples);
        r.save("mean.cvl", &ArrayStack::Real(vec![ens.mean.clone()]))?;
        r.save("variance.cvl", &ArrayStack::Real(vec![ens.variance.clone()]))?;
        r.save_png("mean.png", &ens.mean, Some((0.0, 1.0)))?;
        r.save_png("variance.png", &ens.variance, None)?;
        ens.mean
    } else {
        samples.into_iter().next().expect("one run")
    };
    let peak: f64 = r.config.get("peak")?;
    let metrics = match truth {
        Some(Loaded::Real(t)) => Some(report_real(&point, &t, peak)?),
        Some(Loaded::Complex(_)) => {
            return Err(Error::Config("denoise needs a real ground truth".into()))
        }
        None => None,
    };
    let results = json!({
        "n_runs": n_runs,
        "metrics": metrics_json(metrics)?,
        "diagnostics": diagnostics,
    });
    r.write_manifest(results)
}

impl Resolved {
    fn input_from_config(&mut self, key: &str) -> Result<PathBuf> {
        if !self.config.is_set(key) {
            return Err(Error::Config(format!("`{key}` must be set")));
        }
        let path = self.config.raw(key).to_string();
        self.inputs.insert(key.to_string(), path.clone());
        Ok(PathBuf::from(path))
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_complex(
    mut r: Resolved,
    branch: Branch,
    spec: &ForwardSpec,
    images: Vec<RealImage>,
    truth: Option<Loaded>,
    noise: NoiseParams,
    mut cfg: SamplerConfig,
    prior: PriorSpec,
    n_runs: usize,
) -> Result<PathBuf> {
    let meas_dims = images[0].dims();
    // only ptychography depends on the grid, and its object grid is the
    // measurement grid
    let model = spec.build(meas_dims)?;
    if images.len() != model.measurement_count() {
        return Err(Error::Config(format!(
            "model expects {} measurements, stack holds {}",
            model.measurement_count(),
            images.len()
        )));
    }
    let stack = MeasurementStack::new(images, noise, model.rho())?;
    let seed = r.seed;
    let mut hio_residual = None;
    let mut hio_start_state = None;
    match r.config.raw("init") {
        "measurement" => cfg.init = Init::FromMeasurement,
        "adjoint" => cfg.init = Init::Adjoint,
        "hio" => {
            let hio = r.config.hio()?;
            let mut rng = RngStream::new(seed, COMMAND_STREAM);
            let (start, residual) = in_pool(r.jobs, || hio_start(&stack, &model, &hio, &mut rng))?;
            hio_residual = Some(residual);
            hio_start_state = Some(start);
        }
        "file" => cfg.init = Init::ProvidedComplex(load_image(&r.input_from_config("init_path")?)?.into_complex()),
        other => return Err(Error::Config(format!("unknown init `{other}`"))),
    }
    let noise_std = r.config.get::<f64>("init_noise_scale")? * cfg.schedule.sigma(1)?;
    let provider = complex_provider(&r, prior)?;
    let record = r.config.get::<bool>("record_trajectory")?;
    let runs: Vec<RunOutput<ComplexImage>> = run_streams(n_runs, r.jobs, |i| {
        let mut rng = RngStream::new(seed, i);
        let mut run_cfg = cfg.clone();
        run_cfg.record_trajectory = record && i == 0;
        if let Some(start) = &hio_start_state {
            run_cfg.init = Init::ProvidedComplex(perturb(start, noise_std, &mut rng));
        }
        run_complex(&stack, &model, &provider, &run_cfg, &mut rng)
    })?;
    let diagnostics = diagnostics_json(&runs.iter().map(|o| o.diagnostics.clone()).collect::<Vec<_>>());
    save_trajectory(&mut r, &runs[0].trajectory, |o| ArrayStack::Complex(vec![o.clone()]))?;
    let samples: Vec<ComplexImage> = runs.into_iter().map(|o| o.estimate).collect();
    r.save("estimate.cvl", &ArrayStack::Complex(samples.clone()))?;
    r.save_png("amplitude.png", &samples[0].amplitude(), None)?;
    r.save_png("phase.png", &samples[0].phase(), Some((-std::f64::consts::PI, std::f64::consts::PI)))?;
    let point = if n_runs > 1 {
        let ens = summarize_complex(samples);
        let maps = [
            ("amplitude_mean", &ens.amplitude_mean),
            ("amplitude_variance", &ens.amplitude_variance),
            ("phase_mean", &ens.phase_mean),
            ("phase_variance", &ens.phase_variance),
        ];
        for (name, map) in maps {
            r.save(&format!("{name}.cvl"), &ArrayStack::Real(vec![map.clone()]))?;
            r.save_png(&format!("{name}.png"), map, None)?;
        }
        ComplexImage::from_polar(&ens.amplitude_mean, &ens.phase_mean)?
    } else {
        samples.into_iter().next().expect("one run")
    };
    let peak: f64 = r.config.get("peak")?;
    let mut alignment = Value::Null;
    let metrics = match truth {
        Some(t) => {
            let t = t.into_complex();
            let est = if branch == Branch::PhaseRetrieval {
                let a = align_ambiguities(&point, &t)?;
                alignment = json!({
                    "correlation": a.correlation,
                    "shift": [a.shift.0, a.shift.1],
                    "flipped": a.flipped,
                    "phase": a.phase,
                });
                a.image
            } else {
                point
            };
            Some(report_complex(&est, &t, peak)?)
        }
        None => None,
    };
    let results = json!({
        "n_runs": n_runs,
        "m": stack.m(),
        "hio_residual": hio_residual,
        "alignment": alignment,
        "metrics": metrics_json(metrics)?,
        "diagnostics": diagnostics,
    });
    r.write_manifest(results)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?
        .install(f)
}

fn cmd_hio(args: HioArgs) -> Result<PathBuf> {
    let mut r = resolve(
        "hio",
        &args.common,
        &[("model", "fourier-magnitude")],
        &[("hio_restarts", args.hio_restarts.map(|n| n.to_string()))],
        &[
            ("measurements", args.measurements.as_ref()),
            ("truth", args.truth.as_ref()),
        ],
    )?;
    let spec = r.config.forward_spec()?;
    let ForwardSpec::FourierMagnitude { .. } = spec else {
        return Err(Error::Config("hio needs the fourier-magnitude model".into()));
    };
    let images = load_real_stack(&r.input("measurements")?)?;
    let truth = r.optional_input("truth").map(|p| load_image(&p)).transpose()?;
    let noise = r.config.noise()?;
    let model = spec.build(images[0].dims())?;
    let stack = MeasurementStack::new(images, noise, 1.0)?;
    let hio: HioConfig = r.config.hio()?;
    let mut rng = RngStream::new(r.seed, COMMAND_STREAM);
    let (estimate, residual) = in_pool(r.jobs, || hio_start(&stack, &model, &hio, &mut rng))?;
    r.prepare_output()?;
    r.save("hio.cvl", &ArrayStack::Complex(vec![estimate.clone()]))?;
    r.save_png("amplitude.png", &estimate.amplitude(), None)?;
    let peak: f64 = r.config.get("peak")?;
    let (correlation, metrics) = match truth {
        Some(t) => {
            let t = t.into_complex();
            let a = align_ambiguities(&estimate, &t)?;
            (Some(a.correlation), Some(report_complex(&a.image, &t, peak)?))
        }
        None => (None, None),
    };
    let results = json!({
        "hio_residual": residual,
        "correlation": correlation,
        "metrics": metrics_json(metrics)?,
    });
    r.write_manifest(results)
}

fn cmd_metrics(args: &MetricsArgs) -> Result<Value> {
    let est = load_image(&args.estimate)?;
    let truth = load_image(&args.truth)?;
    let report = match (est, truth) {
        (Loaded::Real(e), Loaded::Real(t)) => report_real(&e, &t, args.peak)?,
        (e, t) => report_complex(&e.into_complex(), &t.into_complex(), args.peak)?,
    };
    metrics_json(Some(report))
}

/// Deterministic probe values for a protocol check.
fn probe_values(n: usize) -> Vec<f32> {
    (0..n).map(|i| 0.25 + (i % 17) as f32 / 32.0).collect()
}

fn cmd_protocol_check(args: &ProtocolArgs) -> Result<Value> {
    if args.size == 0 {
        return Err(Error::Config("size must be positive".into()));
    }
    let endpoint = Endpoint::parse(&args.endpoint)?;
    let mut request = ScoreFrame {
        complex: args.complex,
        height: args.size,
        width: args.size,
        sigma: args.sigma,
        values: Vec::new(),
    };
    request.values = probe_values(request.expected_len());
    let mut client = ScoreClient::connect(&endpoint)?;
    let response = client.request(request.clone())?;
    let payload_bytes = response.values.len() * 4;
    let expected_bytes = request.expected_len() * 4;
    if payload_bytes != expected_bytes {
        return Err(Error::Transport(format!(
            "response payload has {payload_bytes} bytes, expected {expected_bytes}"
        )));
    }
    let finite = response.values.iter().all(|v| v.is_finite());
    Ok(json!({
        "endpoint": endpoint.to_string(),
        "ok": true,
        "complex": response.complex,
        "height": response.height,
        "width": response.width,
        "payload_bytes": payload_bytes,
        "finite": finite,
    }))
}
