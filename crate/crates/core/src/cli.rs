//! Batch front end: configuration, simulate/analyze pipelines and output files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curvature::{self, PhaseTracker, SegmentOptions, VarianceMode};
use crate::diagnostics::{self, InitialState, Otoc, OtocChoice};
use crate::error::{exit_code, Error, Result};
use crate::gates::{self, DeviationSpec, LogicalGate, SweepParameter, SweepRow, TargetKind};
use crate::hilbert::{dressed_basis, DressedBasis, FockLabel, Mode, ModeDims, SystemConfig};
use crate::linalg::{self, OperatorMatrix};
use crate::propagator::{self, CacheReader, CacheWriter, Propagator, TimeGrid, DEFAULT_DT};
use crate::pulse::{synth_test_pulse, Pulse, SynthSpec};
use crate::spectral::{self, BinnedDistribution, EigenphaseFrame, KlReference};

pub const ENV_PREFIX: &str = "TRANSMON_";

/// Checkpoint frames diagonalized together before being consumed in order.
const FRAME_CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Spectra,
    Curvature,
    Populations,
    Otoc,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Spacing of stored unitaries; must be a whole number of steps.
    #[serde(default = "default_checkpoint_ns")]
    pub checkpoint_ns: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: default_t1(),
            dt: default_dt(),
            checkpoint_ns: default_checkpoint_ns(),
        }
    }
}

impl GridConfig {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        let ratio = self.checkpoint_ns / self.dt;
        let every = ratio.round();
        if !(every >= 1.0) || (ratio - every).abs() > 1e-6 * ratio {
            return Err(Error::InvalidConfig(format!(
                "checkpoint_ns = {} is not a whole number of dt = {} steps",
                self.checkpoint_ns, self.dt
            )));
        }
        TimeGrid::new(self.t0, self.t1, self.dt, every as usize)
    }
}

/// Pulse from a CSV file, from a synthetic spec, or zero if neither is given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub file: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtocConfig {
    #[serde(default = "default_otoc_choices")]
    pub choices: Vec<OtocChoice>,
    /// Two-qubit label of the initial computational state, e.g. `"10"`.
    #[serde(default = "default_otoc_initial")]
    pub initial: String,
}

impl Default for OtocConfig {
    fn default() -> Self {
        Self {
            choices: default_otoc_choices(),
            initial: default_otoc_initial(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Named target (`bgate`, `sqrtiswap`, `cnot`, `identity`, `weyl(c1,c2,c3)`).
    #[serde(default = "default_target")]
    pub target: String,
    /// 4×4 matrix file; takes precedence over `target`.
    pub target_file: Option<PathBuf>,
    #[serde(default = "default_sweep_parameters")]
    pub parameters: Vec<SweepParameter>,
    #[serde(default = "default_factors")]
    pub factors: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            target: default_target(),
            target_file: None,
            parameters: default_sweep_parameters(),
            factors: default_factors(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Loaded instead of `[system]` when present.
    pub system_file: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_analyses")]
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    /// Store checkpoint unitaries on disk (16·N² bytes each) and reuse them.
    #[serde(default = "default_true")]
    pub cache: bool,
    #[serde(default = "default_windows")]
    pub kl_windows: usize,
    #[serde(default = "default_bins")]
    pub kl_bins: usize,
    #[serde(default = "default_segment")]
    pub curvature_segment_ns: f64,
    #[serde(default = "default_k_min")]
    pub curvature_k_min: f64,
    #[serde(default)]
    pub curvature_per_track_variance: bool,
    #[serde(default = "default_match")]
    pub match_threshold: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Use bare Fock states instead of dressed states as initial states.
    #[serde(default)]
    pub fock_initial: bool,
    #[serde(default)]
    pub seed: u64,
    pub threads: Option<usize>,
    #[serde(default)]
    pub otoc: OtocConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_t1() -> f64 {
    15.0
}
fn default_true() -> bool {
    true
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_checkpoint_ns() -> f64 {
    0.01
}
fn default_otoc_choices() -> Vec<OtocChoice> {
    vec![OtocChoice::Quadrature, OtocChoice::Number]
}
fn default_otoc_initial() -> String {
    "10".into()
}
fn default_target() -> String {
    "bgate".into()
}
fn default_sweep_parameters() -> Vec<SweepParameter> {
    SweepParameter::ALL.to_vec()
}
fn default_factors() -> Vec<f64> {
    (-5..=5).map(|k| k as f64 / 100.0).collect()
}
fn default_analyses() -> Vec<Analysis> {
    vec![Analysis::Spectra, Analysis::Curvature, Analysis::Populations, Analysis::Otoc]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_windows() -> usize {
    spectral::DEFAULT_WINDOWS
}
fn default_bins() -> usize {
    spectral::DEFAULT_BINS
}
fn default_segment() -> f64 {
    curvature::DEFAULT_SEGMENT_NS
}
fn default_k_min() -> f64 {
    curvature::DEFAULT_K_MIN
}
fn default_match() -> f64 {
    curvature::DEFAULT_MATCH_THRESHOLD
}
fn default_threshold() -> f64 {
    diagnostics::DEFAULT_THRESHOLD
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl RunConfig {
    /// Parses TOML text after applying `TRANSMON_*` overrides from `env`.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        apply_env_overrides(&mut table, env)?;
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load<I>(path: Option<&Path>, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, env)
    }

    pub fn validate(&self) -> Result<()> {
        if self.analyses.is_empty() {
            return Err(Error::InvalidConfig("analyses must not be empty".into()));
        }
        if self.kl_windows == 0 || self.kl_bins == 0 {
            return Err(Error::InvalidConfig("kl_windows and kl_bins must be positive".into()));
        }
        if !(self.threshold >= 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!("threshold {} outside [0, 1)", self.threshold)));
        }
        if self.pulse.file.is_some() && self.pulse.synth.is_some() {
            return Err(Error::InvalidConfig("give either pulse.file or pulse.synth, not both".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        self.grid.time_grid()?;
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join("cache"))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// `TRANSMON_GRID__DT=0.002` sets `grid.dt`; `__` separates nested keys.
/// Values are parsed as TOML, falling back to a bare string.
pub fn apply_env_overrides<I>(table: &mut toml::Table, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    for (key, raw) in env {
        let Some(path) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let parts: Vec<String> = path.split("__").map(|p| p.to_ascii_lowercase()).collect();
        if parts.iter().any(String::is_empty) {
            return Err(Error::InvalidConfig(format!("malformed override variable {key}")));
        }
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw.clone()));
        let mut node = &mut *table;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| Error::InvalidConfig(format!("{key}: `{part}` is not a table")))?;
        }
        node.insert(parts[parts.len() - 1].clone(), value);
    }
    Ok(())
}

/// A configuration with its inputs loaded and its hash fixed.
pub struct Resolved {
    pub config: RunConfig,
    pub system: SystemConfig,
    pub pulse: Pulse,
    pub grid: TimeGrid,
    /// Key of the unitary cache for (system, pulse, grid).
    pub cache_hash: String,
    /// Hash of everything that affects any output.
    pub config_hash: String,
}

impl Resolved {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let system = match &config.system_file {
            Some(p) => SystemConfig::load(p)
                .map_err(|e| Error::InvalidConfig(format!("system file {}: {e}", p.display())))?,
            None => config.system.clone(),
        };
        system.validate()?;
        let pulse = match (&config.pulse.file, &config.pulse.synth) {
            (Some(p), _) => {
                if !p.exists() {
                    return Err(Error::InvalidConfig(format!("pulse file {} not found", p.display())));
                }
                Pulse::load(p)?
            }
            (None, Some(spec)) => synth_test_pulse(spec)?,
            (None, None) => Pulse::zero(),
        };
        let grid = config.grid.time_grid()?;
        let cache_hash = propagator::cache_key(&system, &pulse, &grid);
        let mut stripped = config.clone();
        stripped.system_file = None;
        stripped.system = system.clone();
        stripped.pulse = PulseConfig::default();
        stripped.analyses.clear();
        stripped.output_dir = PathBuf::new();
        stripped.cache_dir = None;
        stripped.cache = true;
        stripped.threads = None;
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&stripped).expect("config serializes"));
        h.update(cache_hash.as_bytes());
        let config_hash = hex::encode(h.finalize());
        Ok(Self {
            config,
            system,
            pulse,
            grid,
            cache_hash,
            config_hash,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn initial_states(&self) -> Vec<InitialState> {
        InitialState::computational(self.config.fock_initial)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub cache_hash: String,
    pub checkpoints: usize,
    pub max_unitarity_defect: f64,
    pub cache_hit: bool,
}

/// Headline numbers of every analysis run so far against this output directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectra: Option<SpectraSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<Vec<SegmentSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<PopulationSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub otoc: Option<Vec<OtocSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepSummary>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectraSummary {
    pub windows: usize,
    pub max_d_gue_t_mid: f64,
    pub max_d_gue: f64,
    pub min_d_poi: f64,
    pub max_d_poi: f64,
    /// Windows where the ratios sit closer to GUE than to Poisson.
    pub windows_gue_closer: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub index: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub beta_tilde: Option<f64>,
    pub stderr: Option<f64>,
    pub d_poi: f64,
    pub d_gue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub min_p_sub: f64,
    pub t_min_p_sub: f64,
    pub max_level_fraction: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocSummary {
    pub choice: String,
    pub initial_state: String,
    pub initial: f64,
    pub min: f64,
    pub last: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub parameter: String,
    pub baseline_error: f64,
    pub max_error: f64,
    /// `max_error / baseline_error`.
    pub error_ratio: f64,
    pub failed_rows: usize,
}

fn update_report(r: &Resolved, f: impl FnOnce(&mut Report)) -> Result<()> {
    let path = r.out("report.json");
    let mut report = std::fs::read_to_string(&path)
        .ok()
        .and_then(|s| serde_json::from_str::<Report>(&s).ok())
        .filter(|rep| rep.config_hash == r.config_hash)
        .unwrap_or_else(|| Report {
            config_hash: r.config_hash.clone(),
            ..Report::default()
        });
    f(&mut report);
    write_json(&path, &report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// CSV file starting with a `# config_hash:` line and a header row.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, config_hash: &str, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "# config_hash: {config_hash}").map_err(|e| Error::io(path, e))?;
        let mut out = Self {
            path: path.to_owned(),
            writer: csv::Writer::from_writer(buf),
        };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| Error::io(&self.path, std::io::Error::other(e)))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// One checkpoint as seen by the analyses.
pub struct Checkpoint<'a> {
    pub index: usize,
    pub t: f64,
    pub u: &'a OperatorMatrix,
    /// Present when an analysis needs eigenvectors.
    pub frame: Option<&'a EigenphaseFrame>,
    pub phases: &'a [f64],
}

struct SpectraSink {
    times: Vec<f64>,
    phases: Vec<Vec<f64>>,
    eigenphases: CsvOut,
}

impl SpectraSink {
    fn new(r: &Resolved) -> Result<Self> {
        Ok(Self {
            times: Vec::new(),
            phases: Vec::new(),
            eigenphases: CsvOut::create(&r.out("eigenphases.csv"), &r.config_hash, &["t", "n", "phase"])?,
        })
    }

    fn push(&mut self, c: &Checkpoint<'_>) -> Result<()> {
        for (n, p) in c.phases.iter().enumerate() {
            self.eigenphases.row([fmt(c.t), n.to_string(), fmt(*p)])?;
        }
        self.times.push(c.t);
        self.phases.push(c.phases.to_vec());
        Ok(())
    }

    fn finish(self, r: &Resolved) -> Result<SpectraSummary> {
        self.eigenphases.finish()?;
        let reference = KlReference::new(r.config.kl_bins);
        let kl = spectral::windowed_kl_from_phases(&self.times, &self.phases, r.config.kl_windows, &reference)?;
        let mut out = CsvOut::create(&r.out("spectra_kl.csv"), &r.config_hash, &["t_mid_ns", "d_poi", "d_gue", "n_samples"])?;
        for i in 0..kl.len() {
            out.row([fmt(kl.t_mid[i]), fmt(kl.d_poi[i]), fmt(kl.d_gue[i]), kl.n_samples[i].to_string()])?;
        }
        out.finish()?;

        // U(t0) = I carries no spectral information
        let mut pooled = Vec::new();
        for ph in self.phases.iter().skip(1) {
            pooled.extend(spectral::ratio_samples(ph)?.values);
        }
        let edges = reference.edges().to_vec();
        let hist = BinnedDistribution::from_samples(&pooled, &edges)?;
        let mut out = CsvOut::create(&r.out("spectra_hist.csv"), &r.config_hash, &["bin_lo", "bin_hi", "mass"])?;
        for (i, m) in hist.masses.iter().enumerate() {
            out.row([fmt(edges[i]), fmt(edges[i + 1]), fmt(*m)])?;
        }
        out.finish()?;

        let imax = (0..kl.len())
            .max_by(|&a, &b| kl.d_gue[a].total_cmp(&kl.d_gue[b]))
            .expect("at least one window");
        Ok(SpectraSummary {
            windows: kl.len(),
            max_d_gue_t_mid: kl.t_mid[imax],
            max_d_gue: kl.d_gue[imax],
            min_d_poi: kl.d_poi.iter().copied().fold(f64::INFINITY, f64::min),
            max_d_poi: kl.d_poi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            windows_gue_closer: (0..kl.len()).filter(|&i| kl.d_gue[i] < kl.d_poi[i]).count(),
        })
    }
}

struct CurvatureSink {
    tracker: PhaseTracker,
}

impl CurvatureSink {
    fn push(&mut self, c: &Checkpoint<'_>) -> Result<()> {
        // U(t0) = I is fully degenerate, so tracking starts one checkpoint later.
        if c.index == 0 {
            return Ok(());
        }
        self.tracker.push(c.frame.expect("curvature needs frames").clone())
    }

    fn finish(self, r: &Resolved) -> Result<Vec<curvature::SegmentResult>> {
        let spectrum = self.tracker.finish();
        let opts = SegmentOptions {
            segment_len: r.config.curvature_segment_ns,
            k_min: r.config.curvature_k_min,
            variance: if r.config.curvature_per_track_variance {
                VarianceMode::PerTrack
            } else {
                VarianceMode::Pooled
            },
            bins: r.config.kl_bins,
            span: Some((r.grid.t0, r.grid.t1)),
        };
        let segments = curvature::segment_analysis(&spectrum, &opts)?;
        let mut out = CsvOut::create(
            &r.out("curvature.csv"),
            &r.config_hash,
            &["segment_idx", "t_lo", "t_hi", "bin_lo_k", "bin_hi_k", "mass", "d_poi"],
        )?;
        for s in &segments {
            for (lo, hi, mass) in &s.histogram {
                out.row([
                    s.index.to_string(),
                    fmt(s.t_lo),
                    fmt(s.t_hi),
                    fmt(*lo),
                    fmt(*hi),
                    fmt(*mass),
                    fmt(s.d_poi),
                ])?;
            }
        }
        out.finish()?;
        write_json(&r.out("curvature_tails.json"), &segments)?;
        Ok(segments)
    }
}

struct PopulationSink {
    dims: ModeDims,
    dressed: DressedBasis,
    initials: Vec<InitialState>,
    psis: Vec<faer::Col<linalg::c64>>,
    threshold: f64,
    p_sub: CsvOut,
    fractions: CsvOut,
    occupations: Vec<CsvOut>,
    spectra: Vec<CsvOut>,
    conditional: Vec<[CsvOut; 3]>,
    min_p_sub: (f64, f64),
    max_fraction: BTreeMap<String, f64>,
}

impl PopulationSink {
    fn new(r: &Resolved, dressed: DressedBasis) -> Result<Self> {
        let hash = &r.config_hash;
        let initials = r.initial_states();
        let psis = initials.iter().map(|s| s.vector(&dressed)).collect();
        let mut occupations = Vec::new();
        let mut spectra = Vec::new();
        let mut conditional = Vec::new();
        for s in &initials {
            let tag = s.tag();
            occupations.push(CsvOut::create(&r.out(&format!("occupations_{tag}.csv")), hash, &["t", "mode", "level", "population"])?);
            spectra.push(CsvOut::create(&r.out(&format!("spectrum_{tag}.csv")), hash, &["t", "n", "phase", "p_n"])?);
            let cond = |mode: &str, col: &str, pcol: &str| {
                CsvOut::create(&r.out(&format!("conditional_{mode}_{tag}.csv")), hash, &["t", col, pcol])
            };
            conditional.push([cond("q1", "i1", "P_i1")?, cond("q2", "i2", "P_i2")?, cond("cavity", "ic", "P_ic")?]);
        }
        Ok(Self {
            dims: r.system.dims,
            dressed,
            initials,
            psis,
            threshold: r.config.threshold,
            p_sub: CsvOut::create(&r.out("p_sub.csv"), hash, &["t", "p_sub"])?,
            fractions: CsvOut::create(&r.out("level_fraction.csv"), hash, &["t", "initial_state", "fraction"])?,
            occupations,
            spectra,
            conditional,
            min_p_sub: (f64::INFINITY, 0.0),
            max_fraction: BTreeMap::new(),
        })
    }

    fn push(&mut self, c: &Checkpoint<'_>) -> Result<()> {
        let frame = c.frame.expect("populations need frames");
        let t = c.t;
        let p = diagnostics::subspace_weight_at(c.u.as_ref(), &self.dressed);
        if p < self.min_p_sub.0 {
            self.min_p_sub = (p, t);
        }
        self.p_sub.row([fmt(t), fmt(p)])?;
        for (k, s) in self.initials.iter().enumerate() {
            let evolved = linalg::apply(c.u.as_ref(), &self.psis[k]);
            let red = diagnostics::reduced_occupations(&evolved, self.dims, t);
            for mode in [Mode::Q1, Mode::Q2, Mode::Cavity] {
                for (level, pop) in red.mode(mode).iter().enumerate() {
                    self.occupations[k].row([fmt(t), mode_name(mode).to_string(), level.to_string(), fmt(*pop)])?;
                }
            }
            let os = diagnostics::occupation_spectrum(frame, &evolved);
            for (n, (ph, pn)) in frame.phases.iter().zip(&os.p).enumerate() {
                self.spectra[k].row([fmt(t), n.to_string(), fmt(*ph), fmt(*pn)])?;
            }
            let frac = diagnostics::level_count_fraction(&os, self.threshold);
            self.fractions.row([fmt(t), s.tag(), fmt(frac)])?;
            let e = self.max_fraction.entry(s.tag()).or_insert(0.0);
            *e = e.max(frac);
            let fc = diagnostics::fock_conditional(frame, &os, self.dims);
            for (m, marg) in [&fc.q1, &fc.q2, &fc.cavity].into_iter().enumerate() {
                for (level, pm) in marg.iter().enumerate() {
                    self.conditional[k][m].row([fmt(t), level.to_string(), fmt(*pm)])?;
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<PopulationSummary> {
        self.p_sub.finish()?;
        self.fractions.finish()?;
        for f in self.occupations.into_iter().chain(self.spectra).chain(self.conditional.into_iter().flatten()) {
            f.finish()?;
        }
        Ok(PopulationSummary {
            min_p_sub: self.min_p_sub.0,
            t_min_p_sub: self.min_p_sub.1,
            max_level_fraction: self.max_fraction,
        })
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Q1 => "q1",
        Mode::Q2 => "q2",
        Mode::Cavity => "cavity",
    }
}

/// Parses a two-qubit label such as `"10"` into the Fock label with an empty
/// cavity; three digits set the cavity level too.
pub fn parse_qubit_label(s: &str) -> Result<FockLabel> {
    let digits: Vec<usize> = s
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidConfig(format!("bad state label `{s}`")))?;
    match digits[..] {
        [a, b] => Ok(FockLabel::new(a, b, 0)),
        [a, b, c] => Ok(FockLabel::new(a, b, c)),
        _ => Err(Error::InvalidConfig(format!("bad state label `{s}`"))),
    }
}

struct OtocSink {
    initial: InitialState,
    correlators: Vec<(OtocChoice, Otoc, Vec<f64>)>,
    times: Vec<f64>,
}

impl OtocSink {
    fn new(r: &Resolved, dressed: &DressedBasis) -> Result<Self> {
        let dims = r.system.dims;
        let label = parse_qubit_label(&r.config.otoc.initial)?;
        if !dims.contains(label) {
            return Err(Error::InvalidConfig(format!("initial state {label} outside the truncated space")));
        }
        let initial = if r.config.fock_initial {
            InitialState::Fock(label)
        } else {
            InitialState::Dressed(label)
        };
        let psi = initial.vector(dressed);
        let correlators = r
            .config
            .otoc
            .choices
            .iter()
            .map(|&choice| {
                let (v, w) = diagnostics::builtin_otoc_operators(dims, choice);
                Ok((choice, Otoc::new(v, w, psi.clone())?, Vec::new()))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            initial,
            correlators,
            times: Vec::new(),
        })
    }

    fn push(&mut self, c: &Checkpoint<'_>) {
        self.times.push(c.t);
        for (_, otoc, values) in &mut self.correlators {
            values.push(otoc.at(c.u.as_ref()));
        }
    }

    fn finish(self, r: &Resolved) -> Result<Vec<OtocSummary>> {
        let tag = self.initial.tag();
        let mut summaries = Vec::new();
        for (choice, _, values) in &self.correlators {
            let name = choice.name();
            let mut out = CsvOut::create(
                &r.out(&format!("otoc_{}.csv", name.to_ascii_lowercase())),
                &r.config_hash,
                &["t", "F", "choice", "initial_state"],
            )?;
            for (t, f) in self.times.iter().zip(values) {
                out.row([fmt(*t), fmt(*f), name.to_string(), tag.clone()])?;
            }
            out.finish()?;
            summaries.push(OtocSummary {
                choice: name.into(),
                initial_state: tag.clone(),
                initial: values[0],
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                last: *values.last().expect("non-empty"),
            });
        }
        Ok(summaries)
    }
}

/// Per-checkpoint consumers for the requested analyses.
struct Sinks {
    spectra: Option<SpectraSink>,
    curvature: Option<CurvatureSink>,
    populations: Option<PopulationSink>,
    otoc: Option<OtocSink>,
    next_index: usize,
}

impl Sinks {
    fn new(r: &Resolved, analyses: &[Analysis]) -> Result<Self> {
        let wants = |a| analyses.contains(&a);
        let dressed = if wants(Analysis::Populations) || wants(Analysis::Otoc) {
            Some(dressed_basis(Propagator::new(&r.system)?.drift(), r.system.dims)?)
        } else {
            None
        };
        Ok(Self {
            spectra: wants(Analysis::Spectra).then(|| SpectraSink::new(r)).transpose()?,
            curvature: wants(Analysis::Curvature).then(|| CurvatureSink {
                tracker: PhaseTracker::new(r.config.match_threshold),
            }),
            otoc: match (&dressed, wants(Analysis::Otoc)) {
                (Some(d), true) => Some(OtocSink::new(r, d)?),
                _ => None,
            },
            populations: match (dressed, wants(Analysis::Populations)) {
                (Some(d), true) => Some(PopulationSink::new(r, d)?),
                _ => None,
            },
            next_index: 0,
        })
    }

    fn is_empty(&self) -> bool {
        self.spectra.is_none() && self.curvature.is_none() && self.populations.is_none() && self.otoc.is_none()
    }

    /// Diagonalizes the buffered checkpoints in parallel, then feeds them to
    /// every sink in time order.
    fn drain(&mut self, chunk: &mut Vec<(f64, OperatorMatrix)>) -> Result<()> {
        if chunk.is_empty() {
            return Ok(());
        }
        let need_frames = self.curvature.is_some() || self.populations.is_some();
        let need_phases = need_frames || self.spectra.is_some();
        let frames: Vec<Option<EigenphaseFrame>> = if need_frames {
            chunk
                .par_iter()
                .map(|(t, u)| spectral::eigenphases(u.as_ref(), *t).map(Some))
                .collect::<Result<_>>()?
        } else {
            vec![None; chunk.len()]
        };
        let phases: Vec<Vec<f64>> = if need_frames {
            frames.iter().map(|f| f.as_ref().expect("computed").phases.clone()).collect()
        } else if need_phases {
            chunk
                .par_iter()
                .map(|(_, u)| spectral::eigenphases_only(u.as_ref()))
                .collect::<Result<_>>()?
        } else {
            vec![Vec::new(); chunk.len()]
        };
        for (k, (t, u)) in chunk.iter().enumerate() {
            let c = Checkpoint {
                index: self.next_index,
                t: *t,
                u,
                frame: frames[k].as_ref(),
                phases: &phases[k],
            };
            if let Some(s) = &mut self.spectra {
                s.push(&c)?;
            }
            if let Some(s) = &mut self.curvature {
                s.push(&c)?;
            }
            if let Some(s) = &mut self.populations {
                s.push(&c)?;
            }
            if let Some(s) = &mut self.otoc {
                s.push(&c);
            }
            self.next_index += 1;
        }
        chunk.clear();
        Ok(())
    }

    fn finish(self, r: &Resolved) -> Result<Outputs> {
        let mut outputs = Outputs::default();
        if let Some(s) = self.spectra {
            outputs.spectra = Some(s.finish(r)?);
        }
        if let Some(s) = self.curvature {
            outputs.curvature = Some(s.finish(r)?);
        }
        if let Some(s) = self.populations {
            outputs.populations = Some(s.finish()?);
        }
        if let Some(s) = self.otoc {
            outputs.otoc = Some(s.finish(r)?);
        }
        let summary = outputs.clone();
        update_report(r, move |rep| {
            if let Some(s) = summary.spectra {
                rep.spectra = Some(s);
            }
            if let Some(segs) = summary.curvature {
                rep.curvature = Some(segs.iter().map(SegmentSummary::from).collect());
            }
            if let Some(s) = summary.populations {
                rep.populations = Some(s);
            }
            if let Some(s) = summary.otoc {
                rep.otoc = Some(s);
            }
        })?;
        Ok(outputs)
    }
}

impl From<&curvature::SegmentResult> for SegmentSummary {
    fn from(s: &curvature::SegmentResult) -> Self {
        SegmentSummary {
            index: s.index,
            t_lo: s.t_lo,
            t_hi: s.t_hi,
            beta_tilde: s.tail.map(|t| t.beta_tilde),
            stderr: s.tail.map(|t| t.stderr),
            d_poi: s.d_poi,
            d_gue: s.d_gue,
        }
    }
}

/// Results of one pass over the checkpoints.
#[derive(Clone, Debug, Default)]
pub struct Outputs {
    pub manifest: Option<Manifest>,
    pub spectra: Option<SpectraSummary>,
    pub curvature: Option<Vec<curvature::SegmentResult>>,
    pub populations: Option<PopulationSummary>,
    pub otoc: Option<Vec<OtocSummary>>,
}

/// Streams the checkpoints of this configuration, from the cache when one
/// exists and from a fresh evolution otherwise, through the requested
/// analyses. Only a chunk of unitaries is held in memory at a time.
pub fn run_analyses(r: &Resolved, analyses: &[Analysis]) -> Result<Outputs> {
    let analyses: Vec<Analysis> = analyses.iter().copied().filter(|a| *a != Analysis::Sweep).collect();
    let mut sinks = Sinks::new(r, &analyses)?;
    let active = !sinks.is_empty();
    let dir = r.config.cache_dir();
    let mut chunk: Vec<(f64, OperatorMatrix)> = Vec::with_capacity(FRAME_CHUNK);
    let reader = if r.config.cache {
        CacheReader::open(&dir, &r.cache_hash)?
    } else {
        None
    };
    let (checkpoints, max_defect, hit) = match reader {
        Some(mut reader) => {
            if active {
                while let Some(item) = reader.next_unitary()? {
                    chunk.push(item);
                    if chunk.len() == FRAME_CHUNK {
                        sinks.drain(&mut chunk)?;
                    }
                }
            }
            (reader.header.times.len(), reader.header.max_defect, true)
        }
        None => {
            let prop = Propagator::new(&r.system)?;
            let mut writer = if r.config.cache {
                Some(CacheWriter::create(&dir, &r.cache_hash, r.system.dims)?)
            } else {
                None
            };
            let mut count = 0;
            let max_defect = prop.evolve_with(&r.pulse, &r.grid, None, |_, t, u| {
                count += 1;
                if let Some(w) = &mut writer {
                    w.push(t, u)?;
                }
                if active {
                    chunk.push((t, u.clone()));
                    if chunk.len() == FRAME_CHUNK {
                        sinks.drain(&mut chunk)?;
                    }
                }
                Ok(())
            })?;
            if let Some(w) = writer {
                w.finish(&r.grid, max_defect)?;
            }
            (count, max_defect, false)
        }
    };
    sinks.drain(&mut chunk)?;
    let manifest = Manifest {
        config_hash: r.config_hash.clone(),
        cache_hash: r.cache_hash.clone(),
        checkpoints,
        max_unitarity_defect: max_defect,
        cache_hit: hit,
    };
    write_json(&r.out("manifest.json"), &manifest)?;
    let mut outputs = sinks.finish(r)?;
    outputs.manifest = Some(manifest);
    Ok(outputs)
}

pub fn cmd_simulate(r: &Resolved) -> Result<Manifest> {
    Ok(run_analyses(r, &[])?.manifest.expect("manifest is always written"))
}

pub fn cmd_spectra(r: &Resolved) -> Result<SpectraSummary> {
    Ok(run_analyses(r, &[Analysis::Spectra])?.spectra.expect("requested"))
}

pub fn cmd_curvature(r: &Resolved) -> Result<Vec<curvature::SegmentResult>> {
    Ok(run_analyses(r, &[Analysis::Curvature])?.curvature.expect("requested"))
}

pub fn cmd_populations(r: &Resolved) -> Result<PopulationSummary> {
    Ok(run_analyses(r, &[Analysis::Populations])?.populations.expect("requested"))
}

pub fn cmd_otoc(r: &Resolved) -> Result<Vec<OtocSummary>> {
    Ok(run_analyses(r, &[Analysis::Otoc])?.otoc.expect("requested"))
}

pub fn sweep_target(cfg: &SweepConfig) -> Result<LogicalGate> {
    match &cfg.target_file {
        Some(p) => {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!("target file {} not found", p.display())));
            }
            LogicalGate::load_csv(p)
        }
        None => Ok(gates::make_target(cfg.target.parse::<TargetKind>()?)),
    }
}

pub fn cmd_sweep(r: &Resolved) -> Result<Vec<SweepRow>> {
    let target = sweep_target(&r.config.sweep)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &param in &r.config.sweep.parameters {
        let spec = DeviationSpec::new(param, r.config.sweep.factors.clone())?;
        let part = gates::robustness_sweep(&r.system, &r.pulse, &r.grid, &target, &spec)?;
        let baseline = part
            .iter()
            .find(|row| row.deviation == 0.0)
            .map_or(f64::NAN, |row| row.li_error);
        let max_error = part
            .iter()
            .filter(|row| row.ok())
            .map(|row| row.li_error)
            .fold(f64::NAN, f64::max);
        summaries.push(SweepSummary {
            parameter: param.name().into(),
            baseline_error: baseline,
            max_error,
            error_ratio: max_error / baseline,
            failed_rows: part.iter().filter(|row| !row.ok()).count(),
        });
        rows.extend(part);
    }
    let mut out = CsvOut::create(
        &r.out("sweep.csv"),
        &r.config_hash,
        &["parameter", "deviation", "li_error", "leakage", "avg_fidelity", "status"],
    )?;
    for row in &rows {
        out.row([
            row.parameter.clone(),
            fmt(row.deviation),
            fmt(row.li_error),
            fmt(row.leakage),
            fmt(row.avg_fidelity),
            row.status.clone(),
        ])?;
    }
    out.finish()?;
    update_report(r, |rep| rep.sweep = Some(summaries))?;
    Ok(rows)
}

#[derive(Debug, Parser)]
#[command(name = "transmon-chaos", version, about = "Driven two-transmon chaos diagnostics")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Integration step (ns).
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Number of KL windows.
    #[arg(long, global = true)]
    pub windows: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every analysis listed in the configuration.
    Run,
    /// Evolve (or load from cache) and write the manifest.
    Simulate,
    /// Windowed eigenphase-ratio statistics.
    Spectra,
    /// Level-curvature distributions per segment.
    Curvature,
    /// Occupations, eigenphase weights and conditional Fock populations.
    Populations,
    /// Out-of-time-ordered correlators.
    Otoc,
    /// Gate robustness against parameter deviations.
    Sweep {
        /// Named target gate, overriding the configuration.
        #[arg(long)]
        target: Option<String>,
        /// 4×4 target matrix file, overriding the configuration.
        #[arg(long)]
        target_file: Option<PathBuf>,
    },
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

impl Cli {
    /// File, then environment, then flags.
    pub fn resolve_config<I>(&self, env: I) -> Result<RunConfig>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = RunConfig::load(self.config.as_deref(), env)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(dt) = self.dt {
            cfg.grid.dt = dt;
        }
        if let Some(w) = self.windows {
            cfg.kl_windows = w;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Command::Sweep { target, target_file } = &self.command {
            if let Some(t) = target {
                cfg.sweep.target = t.clone();
                cfg.sweep.target_file = None;
            }
            if let Some(f) = target_file {
                cfg.sweep.target_file = Some(f.clone());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Executes a parsed command line; `env` supplies the override variables.
pub fn execute<I>(cli: &Cli, env: I) -> Result<()>
where
    I: IntoIterator<Item = (String, String)>,
{
    let cfg = cli.resolve_config(env)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let resolved = Resolved::new(cfg)?;
    std::fs::create_dir_all(&resolved.config.output_dir).map_err(|e| Error::io(&resolved.config.output_dir, e))?;
    pool.install(|| dispatch(&cli.command, &resolved))
}

fn dispatch(command: &Command, r: &Resolved) -> Result<()> {
    let analyses: Vec<Analysis> = match command {
        Command::Run => r.config.analyses.clone(),
        Command::Simulate => Vec::new(),
        Command::Spectra => vec![Analysis::Spectra],
        Command::Curvature => vec![Analysis::Curvature],
        Command::Populations => vec![Analysis::Populations],
        Command::Otoc => vec![Analysis::Otoc],
        Command::Sweep { .. } => vec![Analysis::Sweep],
        Command::ShowConfig => unreachable!("handled before dispatch"),
    };
    if analyses.is_empty() || analyses.iter().any(|a| *a != Analysis::Sweep) {
        let out = run_analyses(r, &analyses)?;
        let m = out.manifest.expect("manifest is always written");
        eprintln!(
            "simulate: {} checkpoints, max defect {:.2e}{}",
            m.checkpoints,
            m.max_unitarity_defect,
            if m.cache_hit { " (cache hit)" } else { "" }
        );
        if let Some(s) = out.spectra {
            eprintln!("spectra: max d_gue {:.3} at t = {:.3} ns", s.max_d_gue, s.max_d_gue_t_mid);
        }
        if let Some(segs) = out.curvature {
            let fitted = segs.iter().filter(|s| s.tail.is_some()).count();
            eprintln!("curvature: {} segments, {fitted} with tail fits", segs.len());
        }
        if let Some(s) = out.populations {
            eprintln!("populations: min p_sub {:.4} at t = {:.3} ns", s.min_p_sub, s.t_min_p_sub);
        }
        if let Some(s) = out.otoc {
            eprintln!("otoc: {} correlators", s.len());
        }
    }
    if analyses.contains(&Analysis::Sweep) {
        let rows = cmd_sweep(r)?;
        let failed = rows.iter().filter(|r| !r.ok()).count();
        eprintln!("sweep: {} rows, {failed} failed", rows.len());
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit_code::CONFIG } else { exit_code::OK };
        }
    };
    match execute(&cli, std::env::vars()) {
        Ok(()) => exit_code::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.kl_windows, 250);
        assert_eq!(c.threshold, 0.01);
        assert_eq!(c.curvature_segment_ns, 0.5);
        assert_eq!(c.system, SystemConfig::default());
        let g = c.grid.time_grid().unwrap();
        assert_eq!(g.checkpoint_every, 10);
        assert_eq!(c.sweep.factors.len(), 11);
    }

    #[test]
    fn env_overrides_nested_and_top_level_keys() {
        let text = "kl_windows = 10\n[grid]\nt1 = 2.0\n";
        let c = RunConfig::from_toml_with_env(
            text,
            env(&[
                ("TRANSMON_KL_WINDOWS", "40"),
                ("TRANSMON_GRID__DT", "0.002"),
                ("TRANSMON_SYSTEM__G_GHZ", "0.05"),
                ("TRANSMON_OUTPUT_DIR", "elsewhere"),
                ("TRANSMON_SWEEP__PARAMETERS", "[\"g\"]"),
                ("PATH", "/usr/bin"),
            ]),
        )
        .unwrap();
        assert_eq!(c.kl_windows, 40);
        assert_eq!(c.grid.dt, 0.002);
        assert_eq!(c.grid.t1, 2.0);
        assert_eq!(c.system.g_ghz, 0.05);
        assert_eq!(c.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(c.sweep.parameters, vec![SweepParameter::G]);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = RunConfig::from_toml_with_env("", env(&[("TRANSMON_NOPE", "1")])).unwrap_err();
        assert_eq!(e.exit_code(), exit_code::CONFIG);
        let e = RunConfig::from_toml_with_env("[grid]\nstep = 1\n", env(&[])).unwrap_err();
        assert_eq!(e.exit_code(), exit_code::CONFIG);
        let e = RunConfig::from_toml_with_env("analyses = []\n", env(&[])).unwrap_err();
        assert_eq!(e.exit_code(), exit_code::CONFIG);
    }

    #[test]
    fn checkpoint_spacing_must_divide() {
        let e = RunConfig::from_toml_with_env("[grid]\ndt = 0.003\ncheckpoint_ns = 0.05\n", env(&[])).unwrap_err();
        assert!(matches!(e, Error::InvalidConfig(_)));
    }

    #[test]
    fn hash_ignores_output_location() {
        let mut a = RunConfig::default();
        a.grid.t1 = 1.0;
        let mut b = a.clone();
        b.output_dir = PathBuf::from("other");
        b.threads = Some(3);
        let (ra, rb) = (Resolved::new(a.clone()).unwrap(), Resolved::new(b).unwrap());
        assert_eq!(ra.config_hash, rb.config_hash);
        a.kl_windows = 7;
        assert_ne!(Resolved::new(a).unwrap().config_hash, ra.config_hash);
    }

    #[test]
    fn missing_pulse_file_names_path() {
        let mut c = RunConfig::default();
        c.pulse.file = Some(PathBuf::from("/nonexistent/pulse.csv"));
        let e = Resolved::new(c).err().unwrap();
        assert_eq!(e.exit_code(), exit_code::CONFIG);
        assert!(e.to_string().contains("/nonexistent/pulse.csv"));
    }

    #[test]
    fn qubit_labels() {
        assert_eq!(parse_qubit_label("10").unwrap(), FockLabel::new(1, 0, 0));
        assert_eq!(parse_qubit_label("012").unwrap(), FockLabel::new(0, 1, 2));
        assert!(parse_qubit_label("x1").is_err());
        assert!(parse_qubit_label("1").is_err());
    }

    #[test]
    fn flags_override_env_and_file() {
        let cli = Cli::try_parse_from(["transmon-chaos", "--windows", "12", "--dt", "0.01", "spectra"]).unwrap();
        let c = cli.resolve_config(env(&[("TRANSMON_KL_WINDOWS", "99")])).unwrap();
        assert_eq!(c.kl_windows, 12);
        assert_eq!(c.grid.dt, 0.01);
    }
}
