//! Time-evolution operator U(t) by the midpoint exponential rule
//! `U(t + dt) = exp(−i2π H(t + dt/2) dt) U(t)`.

use std::f64::consts::PI;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::{Col, Mat, MatRef};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hilbert::{self, ModeDims, SystemConfig};
use crate::linalg::{self, c64, OperatorMatrix};
use crate::pulse::Pulse;

pub const DEFAULT_DT: f64 = 0.001;
pub const DEFAULT_UNITARITY_TOL: f64 = 1e-9;

/// Integration grid. Checkpoints are every `checkpoint_every` steps plus the
/// final step, so they always include `t0` and `t1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    pub checkpoint_every: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, dt: f64, checkpoint_every: usize) -> Result<Self> {
        let g = Self {
            t0,
            t1,
            dt,
            checkpoint_every,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with the largest checkpoint stride giving at least `min_checkpoints`
    /// intervals.
    pub fn with_min_checkpoints(t0: f64, t1: f64, dt: f64, min_checkpoints: usize) -> Result<Self> {
        let steps = Self::new(t0, t1, dt, 1)?.n_steps();
        let every = (steps / min_checkpoints.max(1)).max(1);
        Self::new(t0, t1, dt, every)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t0.is_finite() && self.t1.is_finite() && self.t1 > self.t0) {
            return Err(Error::InvalidConfig(format!(
                "time span [{}, {}] is empty",
                self.t0, self.t1
            )));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::InvalidConfig("checkpoint_every must be at least 1".into()));
        }
        let x = (self.t1 - self.t0) / self.dt;
        if (x - x.round()).abs() > 1e-9 * x.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "span {} ns is not an integer number of steps of {} ns",
                self.t1 - self.t0,
                self.dt
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round() as usize
    }

    pub fn time(&self, step: usize) -> f64 {
        if step == self.n_steps() {
            self.t1
        } else {
            self.t0 + step as f64 * self.dt
        }
    }

    pub fn is_checkpoint(&self, step: usize) -> bool {
        step % self.checkpoint_every == 0 || step == self.n_steps()
    }

    pub fn checkpoint_steps(&self) -> Vec<usize> {
        (0..=self.n_steps()).filter(|&s| self.is_checkpoint(s)).collect()
    }

    pub fn checkpoint_times(&self) -> Vec<f64> {
        self.checkpoint_steps().into_iter().map(|s| self.time(s)).collect()
    }

    /// Spacing between regular checkpoints.
    pub fn checkpoint_spacing(&self) -> f64 {
        self.checkpoint_every as f64 * self.dt
    }
}

/// U(t) at each checkpoint.
#[derive(Clone, Debug)]
pub struct UnitarySeries {
    pub dims: ModeDims,
    pub times: Vec<f64>,
    pub unitaries: Vec<OperatorMatrix>,
    /// Largest `max |U†U − I|` seen over all checkpoints.
    pub max_defect: f64,
}

impl UnitarySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.times
            .iter()
            .position(|&tk| (tk - t).abs() <= 1e-9 * (1.0 + tk.abs()))
            .ok_or(Error::UnknownCheckpoint(t))
    }

    pub fn at(&self, t: f64) -> Result<&OperatorMatrix> {
        Ok(&self.unitaries[self.index_of(t)?])
    }

    pub fn last(&self) -> &OperatorMatrix {
        self.unitaries.last().expect("series is never empty")
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &OperatorMatrix)> {
        self.times.iter().copied().zip(self.unitaries.iter())
    }
}

/// `exp(−i2π H dt)` via the Hermitian eigendecomposition of `H`.
pub fn step(h_mid: MatRef<'_, c64>, dt: f64) -> Result<OperatorMatrix> {
    let (e, v) = linalg::hermitian_eigen(h_mid)?;
    if e.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure("non-finite eigenvalue".into()));
    }
    let phases: Vec<c64> = e.iter().map(|&x| c64::from_polar(1.0, -2.0 * PI * x * dt)).collect();
    Ok(linalg::reconstruct(v.as_ref(), &phases))
}

/// Drift Hamiltonian plus cavity drive, ready to integrate any pulse.
#[derive(Clone, Debug)]
pub struct Propagator {
    pub dims: ModeDims,
    h_drift: OperatorMatrix,
    a: OperatorMatrix,
    pub unitarity_tol: f64,
}

impl Propagator {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let (a, _) = hilbert::drive_operator(cfg);
        Self::from_operators(cfg.dims, hilbert::drift_hamiltonian(cfg), a)
    }

    /// Custom model `H(t) = h_drift + ½𝓔 a + ½𝓔* a†`.
    pub fn from_operators(dims: ModeDims, h_drift: OperatorMatrix, a: OperatorMatrix) -> Result<Self> {
        let n = dims.total();
        if h_drift.nrows() != n || h_drift.ncols() != n || a.nrows() != n || a.ncols() != n {
            return Err(Error::InvalidParams(format!("operators must be {n}x{n}")));
        }
        let defect = linalg::hermiticity_defect(h_drift.as_ref());
        if defect > 1e-12 * linalg::max_abs(h_drift.as_ref()).max(1.0) {
            return Err(Error::NotHermitian {
                name: "drift Hamiltonian".into(),
                defect,
            });
        }
        Ok(Self {
            dims,
            h_drift,
            a,
            unitarity_tol: DEFAULT_UNITARITY_TOL,
        })
    }

    pub fn drift(&self) -> &OperatorMatrix {
        &self.h_drift
    }

    pub fn hamiltonian(&self, field: c64) -> OperatorMatrix {
        hilbert::driven_hamiltonian(&self.h_drift, &self.a, field)
    }

    /// Integrates from `initial` (identity if `None`), calling `visit(index, t, U)`
    /// at every checkpoint. Returns the largest unitarity defect seen.
    pub fn evolve_with<F>(
        &self,
        pulse: &Pulse,
        grid: &TimeGrid,
        initial: Option<&OperatorMatrix>,
        mut visit: F,
    ) -> Result<f64>
    where
        F: FnMut(usize, f64, &OperatorMatrix) -> Result<()>,
    {
        grid.validate()?;
        let n = self.dims.total();
        let mut u = match initial {
            Some(u0) => u0.clone(),
            None => Mat::<c64>::identity(n, n),
        };
        let mut next = Mat::<c64>::zeros(n, n);
        let mut cached: Option<(c64, OperatorMatrix)> = None;
        let mut max_defect = 0.0_f64;
        let mut index = 0;

        let mut check = |u: &OperatorMatrix, step_idx: usize, index: &mut usize| -> Result<()> {
            let t = grid.time(step_idx);
            let defect = linalg::unitarity_defect(u.as_ref());
            max_defect = max_defect.max(defect);
            if !(defect <= self.unitarity_tol) {
                return Err(Error::UnitarityLost {
                    t,
                    defect,
                    tolerance: self.unitarity_tol,
                });
            }
            visit(*index, t, u)?;
            *index += 1;
            Ok(())
        };

        check(&u, 0, &mut index)?;
        for s in 0..grid.n_steps() {
            let t_mid = grid.t0 + (s as f64 + 0.5) * grid.dt;
            let field = pulse.evaluate(t_mid);
            let reuse = matches!(&cached, Some((f, _)) if f.re.to_bits() == field.re.to_bits() && f.im.to_bits() == field.im.to_bits());
            if !reuse {
                let h = self.hamiltonian(field);
                cached = Some((field, step(h.as_ref(), grid.dt)?));
            }
            let (_, us) = cached.as_ref().expect("step computed above");
            linalg::mul_into(&mut next, us.as_ref(), u.as_ref());
            std::mem::swap(&mut u, &mut next);
            if grid.is_checkpoint(s + 1) {
                check(&u, s + 1, &mut index)?;
            }
        }
        Ok(max_defect)
    }

    /// Full series of checkpoint unitaries (≈ 16·N² bytes each).
    pub fn evolve(&self, pulse: &Pulse, grid: &TimeGrid) -> Result<UnitarySeries> {
        let mut times = Vec::new();
        let mut unitaries = Vec::new();
        let max_defect = self.evolve_with(pulse, grid, None, |_, t, u| {
            times.push(t);
            unitaries.push(u.clone());
            Ok(())
        })?;
        Ok(UnitarySeries {
            dims: self.dims,
            times,
            unitaries,
            max_defect,
        })
    }

    /// U(t1) only.
    pub fn final_unitary(&self, pulse: &Pulse, grid: &TimeGrid) -> Result<OperatorMatrix> {
        let mut last = None;
        self.evolve_with(pulse, grid, None, |_, _, u| {
            last = Some(u.clone());
            Ok(())
        })?;
        Ok(last.expect("grid has at least one checkpoint"))
    }
}

/// Convenience wrapper: build the model from `cfg` and evolve.
pub fn evolve(cfg: &SystemConfig, pulse: &Pulse, grid: &TimeGrid) -> Result<UnitarySeries> {
    Propagator::new(cfg)?.evolve(pulse, grid)
}

/// `U(t)|ψ⟩` at a stored checkpoint. No renormalization.
pub fn apply(series: &UnitarySeries, state: &Col<c64>, t: f64) -> Result<Col<c64>> {
    let u = series.at(t)?;
    Ok(linalg::apply(u.as_ref(), state))
}

/// Hex SHA-256 over the model, pulse, and grid. Analytic pulses are hashed by
/// their parameters and sampled pulses by the exact bits of their samples.
pub fn cache_key(cfg: &SystemConfig, pulse: &Pulse, grid: &TimeGrid) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update(serde_json::to_vec(grid).expect("grid serializes"));
    match pulse {
        Pulse::Analytic(a) => {
            h.update(b"analytic");
            h.update(serde_json::to_vec(a).expect("pulse serializes"));
        }
        Pulse::Sampled { times, values } => {
            h.update(b"sampled");
            for (t, v) in times.iter().zip(values) {
                h.update(t.to_le_bytes());
                h.update(v.re.to_le_bytes());
                h.update(v.im.to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub dims: ModeDims,
    pub grid: TimeGrid,
    pub hash: String,
    pub times: Vec<f64>,
    pub max_defect: f64,
}

pub fn cache_paths(dir: &Path, hash: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{hash}.bin")), dir.join(format!("{hash}.json")))
}

/// Incremental writer for `<hash>.bin` (little-endian `re, im` pairs,
/// row-major, one matrix per checkpoint). The data goes to a temporary file
/// that is renamed, and the `<hash>.json` sidecar written, only on
/// [`CacheWriter::finish`], so an interrupted run leaves no valid cache.
pub struct CacheWriter {
    dir: PathBuf,
    hash: String,
    tmp: PathBuf,
    w: BufWriter<std::fs::File>,
    dims: ModeDims,
    times: Vec<f64>,
}

impl CacheWriter {
    pub fn create(dir: &Path, hash: &str, dims: ModeDims) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = dir.join(format!("{hash}.bin.partial"));
        let file = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        Ok(Self {
            dir: dir.to_owned(),
            hash: hash.to_owned(),
            tmp,
            w: BufWriter::new(file),
            dims,
            times: Vec::new(),
        })
    }

    pub fn push(&mut self, t: f64, u: &OperatorMatrix) -> Result<()> {
        let n = self.dims.total();
        let mut write = || -> std::io::Result<()> {
            for i in 0..n {
                for j in 0..n {
                    let z = u[(i, j)];
                    self.w.write_all(&z.re.to_le_bytes())?;
                    self.w.write_all(&z.im.to_le_bytes())?;
                }
            }
            Ok(())
        };
        write().map_err(|e| Error::io(&self.tmp, e))?;
        self.times.push(t);
        Ok(())
    }

    pub fn finish(mut self, grid: &TimeGrid, max_defect: f64) -> Result<CacheHeader> {
        self.w.flush().map_err(|e| Error::io(&self.tmp, e))?;
        let (bin, side) = cache_paths(&self.dir, &self.hash);
        std::fs::rename(&self.tmp, &bin).map_err(|e| Error::io(&bin, e))?;
        let header = CacheHeader {
            dims: self.dims,
            grid: *grid,
            hash: self.hash,
            times: self.times,
            max_defect,
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
        Ok(header)
    }
}

pub fn save_cache(series: &UnitarySeries, grid: &TimeGrid, hash: &str, dir: &Path) -> Result<CacheHeader> {
    let mut w = CacheWriter::create(dir, hash, series.dims)?;
    for (t, u) in series.iter() {
        w.push(t, u)?;
    }
    w.finish(grid, series.max_defect)
}

/// Sequential reader over a validated cache file.
pub struct CacheReader {
    pub header: CacheHeader,
    path: PathBuf,
    r: BufReader<std::fs::File>,
    next: usize,
}

impl CacheReader {
    /// `Ok(None)` if no cache for `hash` exists.
    pub fn open(dir: &Path, hash: &str) -> Result<Option<Self>> {
        let (bin, side) = cache_paths(dir, hash);
        if !bin.exists() || !side.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        let header: CacheHeader = serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?;
        if header.hash != hash {
            return Err(Error::Serde(format!("sidecar hash {} does not match {hash}", header.hash)));
        }
        let n = header.dims.total();
        let expected = header.times.len() as u64 * (n * n * 16) as u64;
        let len = std::fs::metadata(&bin).map_err(|e| Error::io(&bin, e))?.len();
        if len != expected {
            return Err(Error::Serde(format!("cache {} has {len} bytes, expected {expected}", bin.display())));
        }
        let file = std::fs::File::open(&bin).map_err(|e| Error::io(&bin, e))?;
        Ok(Some(Self {
            header,
            path: bin,
            r: BufReader::new(file),
            next: 0,
        }))
    }

    /// Next `(t, U)`, or `None` after the last checkpoint.
    pub fn next_unitary(&mut self) -> Result<Option<(f64, OperatorMatrix)>> {
        if self.next >= self.header.times.len() {
            return Ok(None);
        }
        let n = self.header.dims.total();
        let mut bytes = vec![0u8; n * n * 16];
        self.r.read_exact(&mut bytes).map_err(|e| Error::io(&self.path, e))?;
        let val = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes"));
        let u = Mat::from_fn(n, n, |i, j| {
            let k = 2 * (i * n + j);
            c64::new(val(k), val(k + 1))
        });
        let t = self.header.times[self.next];
        self.next += 1;
        Ok(Some((t, u)))
    }
}

/// Loads a whole cached series, or `Ok(None)` if no cache for `hash` exists.
pub fn load_cache(dir: &Path, hash: &str) -> Result<Option<(CacheHeader, UnitarySeries)>> {
    let Some(mut reader) = CacheReader::open(dir, hash)? else {
        return Ok(None);
    };
    let mut unitaries = Vec::with_capacity(reader.header.times.len());
    while let Some((_, u)) = reader.next_unitary()? {
        unitaries.push(u);
    }
    let header = reader.header;
    let series = UnitarySeries {
        dims: header.dims,
        times: header.times.clone(),
        unitaries,
        max_defect: header.max_defect,
    };
    Ok(Some((header, series)))
}
