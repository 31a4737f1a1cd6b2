//! File formats: volume files, covariate CSVs, run configurations and chain
//! directories.
//!
//! A volume file is little-endian throughout:
//!
//! ```text
//! "STMV"            4 bytes
//! version           u32 = 1
//! ndim              u8
//! dims              ndim × u32
//! n_subjects        u32
//! payload           n_subjects × N_D × f64, subject-major, voxels in scan order
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boxcox;
use crate::error::{Result, StmError};
use crate::gibbs::{Chain, ChainMeta, InitStrategy, SamplerConfig};
use crate::model::{Hyperparams, ModelState};

pub const VOLUME_MAGIC: &[u8; 4] = b"STMV";
pub const VOLUME_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFile {
    pub dims: Vec<usize>,
    pub n_subjects: usize,
    /// Subject-major: record `s` occupies `s*N_D .. (s+1)*N_D`.
    pub data: Vec<f64>,
}

impl VolumeFile {
    pub fn new(dims: Vec<usize>, n_subjects: usize, data: Vec<f64>) -> Result<Self> {
        let nd: usize = dims.iter().product();
        if data.len() != nd * n_subjects {
            return Err(StmError::Dimension(format!(
                "volume payload has {} values, expected {} × {}",
                data.len(),
                n_subjects,
                nd
            )));
        }
        Ok(VolumeFile {
            dims,
            n_subjects,
            data,
        })
    }

    pub fn n_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn record(&self, s: usize) -> &[f64] {
        let nd = self.n_voxels();
        &self.data[s * nd..(s + 1) * nd]
    }

    /// Records as matrix columns (`N_D × n_subjects`).
    pub fn to_voxel_major(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n_voxels(), self.n_subjects, &self.data)
    }

    /// Records as matrix rows (`n_subjects × N_D`).
    pub fn to_subject_major(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_subjects, self.n_voxels(), &self.data)
    }

    pub fn from_columns(dims: Vec<usize>, m: &DMatrix<f64>) -> Result<Self> {
        VolumeFile::new(dims, m.ncols(), m.as_slice().to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 4 * self.dims.len() + 8 * self.data.len());
        out.extend_from_slice(VOLUME_MAGIC);
        out.extend_from_slice(&VOLUME_VERSION.to_le_bytes());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.n_subjects as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |msg: String| StmError::format(path, msg);
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4).ok_or_else(|| err("truncated header".into()))?;
        if magic != VOLUME_MAGIC {
            return Err(err(format!("bad magic {magic:?}")));
        }
        let version = cur.u32().ok_or_else(|| err("truncated header".into()))?;
        if version != VOLUME_VERSION {
            return Err(err(format!("unsupported version {version}")));
        }
        let ndim = cur.take(1).ok_or_else(|| err("truncated header".into()))?[0] as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(cur.u32().ok_or_else(|| err("truncated dims".into()))? as usize);
        }
        let n_subjects = cur.u32().ok_or_else(|| err("truncated header".into()))? as usize;
        let nd: usize = dims.iter().product();
        let expected = nd
            .checked_mul(n_subjects)
            .and_then(|v| v.checked_mul(8))
            .ok_or_else(|| err("payload size overflows".into()))?;
        let payload = &bytes[cur.pos..];
        if payload.len() != expected {
            return Err(err(format!(
                "payload is {} bytes, header implies {expected}",
                payload.len()
            )));
        }
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(VolumeFile {
            dims,
            n_subjects,
            data,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| StmError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| StmError::io(path, e))?;
        VolumeFile::from_bytes(&bytes, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.bytes.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Reads a covariate CSV (header row, numeric cells, no intercept) and
/// prepends the intercept column.
pub fn load_covariates(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| StmError::io(path, e))?;
    parse_covariates(&text, path)
}

pub fn parse_covariates(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let width = rdr.headers()?.len();
    if width == 0 || text.trim().is_empty() {
        return Err(StmError::format(path, "empty file"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != width {
            return Err(StmError::format(
                path,
                format!("ragged row at line {line}: {} cells, header has {width}", rec.len()),
            ));
        }
        let mut row = Vec::with_capacity(width + 1);
        row.push(1.0);
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                StmError::format(path, format!("non-numeric cell {cell:?} at line {line}, column {}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(StmError::format(path, format!("non-finite cell at line {line}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(StmError::format(path, "no data rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), width + 1, |i, j| rows[i][j]))
}

/// Writes covariates (without intercept) with the given header names.
pub fn write_covariates(path: impl AsRef<Path>, names: &[&str], x: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(names)?;
    for i in 0..x.nrows() {
        w.write_record(x.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(|e| StmError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftSpec {
    /// `max(0, 1e-3 - min y)`.
    Auto,
    Fixed(f64),
}

pub const AUTO_SHIFT_EPS: f64 = 1e-3;

impl ShiftSpec {
    pub fn resolve<'a>(&self, ys: impl IntoIterator<Item = &'a f64>) -> f64 {
        match *self {
            ShiftSpec::Fixed(c) => c,
            ShiftSpec::Auto => boxcox::default_shift(ys.into_iter().copied(), AUTO_SHIFT_EPS),
        }
    }
}

/// Key, default, meaning. The defaults are the simulation-study settings.
pub const CONFIG_KEYS: &[(&str, &str, &str)] = &[
    ("c0", "auto", "Box-Cox shift; 'auto' = max(0, 0.001 - min y)"),
    ("delta0", "0.001", "tau prior Gamma(delta0/2, gamma0/2), shape part"),
    ("gamma0", "0.001", "tau prior Gamma(delta0/2, gamma0/2), rate part"),
    ("n_nu", "0.001", "nu prior Gamma(n_nu/2, n_nu*s_nu_sq/2)"),
    ("s_nu_sq", "1", "nu prior scale"),
    ("a", "3", "lambda prior U(-a, b), lower"),
    ("b", "3", "lambda prior U(-a, b), upper"),
    ("phi", "10", "spatial parameter: one value for all covariates or a comma list of length p"),
    ("delta_lambda", "0.1", "standard deviation of the random-walk proposal for lambda"),
    ("r0", "2", "neighborhood radius in voxels"),
    ("iterations", "1000", "total Gibbs sweeps"),
    ("burn_in", "50", "sweeps discarded before retaining draws"),
    ("thin", "1", "keep every thin-th sweep after burn-in"),
    ("seed", "0", "root random seed"),
    ("level", "0.95", "credible level for summaries"),
    ("adapt_lambda", "false", "tune per-voxel lambda proposal scales during burn-in"),
    ("init", "profile", "starting lambda: 'profile' (per-voxel Box-Cox likelihood maximum) or 'identity' (1)"),
];

pub fn config_help() -> String {
    let mut s = String::from("Config keys (key = value, '#' starts a comment):\n");
    for (k, d, m) in CONFIG_KEYS {
        let _ = writeln!(s, "  {k:<13} default {d:<6} {m}");
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhiSpec {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub c0: ShiftSpec,
    pub delta0: f64,
    pub gamma0: f64,
    pub n_nu: f64,
    pub s_nu_sq: f64,
    pub a: f64,
    pub b: f64,
    pub phi: PhiSpec,
    pub delta_lambda: f64,
    pub r0: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub level: f64,
    pub adapt_lambda: bool,
    pub init: InitStrategy,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::parse("").expect("defaults parse")
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| StmError::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| StmError::Config(format!("{key}: expected a non-negative integer, got {v:?}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: Vec<(&str, String)> = CONFIG_KEYS
            .iter()
            .map(|(k, d, _)| (*k, d.to_string()))
            .collect();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| StmError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = values
                .iter_mut()
                .find(|(name, _)| *name == k)
                .ok_or_else(|| StmError::Config(format!("line {}: unknown key {k:?}", lineno + 1)))?;
            if !seen.insert(k.to_string()) {
                return Err(StmError::Config(format!("line {}: duplicate key {k:?}", lineno + 1)));
            }
            slot.1 = v.to_string();
        }
        let get = |key: &str| -> &str {
            &values.iter().find(|(k, _)| *k == key).expect("known key").1
        };
        let c0 = match get("c0") {
            "auto" => ShiftSpec::Auto,
            v => ShiftSpec::Fixed(parse_f64("c0", v)?),
        };
        let phi_text = get("phi");
        let phi = if phi_text.contains(',') {
            PhiSpec::List(
                phi_text
                    .split(',')
                    .map(|p| parse_f64("phi", p.trim()))
                    .collect::<Result<_>>()?,
            )
        } else {
            PhiSpec::Scalar(parse_f64("phi", phi_text)?)
        };
        let adapt_lambda = match get("adapt_lambda") {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            v => return Err(StmError::Config(format!("adapt_lambda: expected true/false, got {v:?}"))),
        };
        let cfg = RunConfig {
            c0,
            delta0: parse_f64("delta0", get("delta0"))?,
            gamma0: parse_f64("gamma0", get("gamma0"))?,
            n_nu: parse_f64("n_nu", get("n_nu"))?,
            s_nu_sq: parse_f64("s_nu_sq", get("s_nu_sq"))?,
            a: parse_f64("a", get("a"))?,
            b: parse_f64("b", get("b"))?,
            phi,
            delta_lambda: parse_f64("delta_lambda", get("delta_lambda"))?,
            r0: parse_f64("r0", get("r0"))?,
            iterations: parse_usize("iterations", get("iterations"))?,
            burn_in: parse_usize("burn_in", get("burn_in"))?,
            thin: parse_usize("thin", get("thin"))?,
            seed: get("seed")
                .parse()
                .map_err(|_| StmError::Config(format!("seed: expected a u64, got {:?}", get("seed"))))?,
            level: parse_f64("level", get("level"))?,
            adapt_lambda,
            init: get("init").parse().map_err(|e: StmError| StmError::Config(e.to_string()))?,
        };
        cfg.sampler_config().validate().map_err(|e| StmError::Config(e.to_string()))?;
        if !(cfg.level > 0.0 && cfg.level < 1.0) {
            return Err(StmError::Config(format!("level must lie in (0, 1), got {}", cfg.level)));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| StmError::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn hyperparams(&self, p: usize) -> Result<Hyperparams> {
        let phi = match &self.phi {
            PhiSpec::Scalar(v) => vec![*v; p],
            PhiSpec::List(v) if v.len() == p => v.clone(),
            PhiSpec::List(v) => {
                return Err(StmError::Config(format!(
                    "phi lists {} values for {p} covariates",
                    v.len()
                )))
            }
        };
        let hp = Hyperparams {
            delta0: self.delta0,
            gamma0: self.gamma0,
            n_nu: self.n_nu,
            s_nu_sq: self.s_nu_sq,
            a: self.a,
            b: self.b,
            phi,
            delta_lambda: self.delta_lambda,
            r0: self.r0,
        };
        hp.validate().map_err(|e| StmError::Config(e.to_string()))?;
        Ok(hp)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            seed: self.seed,
            thin: self.thin,
            adapt_lambda: self.adapt_lambda,
            init: self.init,
            ..SamplerConfig::default()
        }
    }

    /// Every key with its effective value; parsing the echo gives back the
    /// same configuration. A resolved shift replaces `auto`.
    pub fn echo(&self, resolved_c0: Option<f64>) -> String {
        let c0 = match (resolved_c0, self.c0) {
            (Some(c), _) | (None, ShiftSpec::Fixed(c)) => format!("{c:?}"),
            (None, ShiftSpec::Auto) => "auto".into(),
        };
        let phi = match &self.phi {
            PhiSpec::Scalar(v) => format!("{v:?}"),
            PhiSpec::List(v) => v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(","),
        };
        let mut s = String::new();
        let _ = writeln!(s, "c0 = {c0}");
        let _ = writeln!(s, "delta0 = {:?}", self.delta0);
        let _ = writeln!(s, "gamma0 = {:?}", self.gamma0);
        let _ = writeln!(s, "n_nu = {:?}", self.n_nu);
        let _ = writeln!(s, "s_nu_sq = {:?}", self.s_nu_sq);
        let _ = writeln!(s, "a = {:?}", self.a);
        let _ = writeln!(s, "b = {:?}", self.b);
        let _ = writeln!(s, "phi = {phi}");
        let _ = writeln!(s, "delta_lambda = {:?}", self.delta_lambda);
        let _ = writeln!(s, "r0 = {:?}", self.r0);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "burn_in = {}", self.burn_in);
        let _ = writeln!(s, "thin = {}", self.thin);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "level = {:?}", self.level);
        let _ = writeln!(s, "adapt_lambda = {}", self.adapt_lambda);
        let _ = writeln!(s, "init = {}", self.init.as_str());
        s
    }
}

pub const CHAIN_INDEX: &str = "index.json";
pub const CHAIN_META: &str = "chain_meta.json";
pub const CHECKPOINT_DRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub draws: usize,
    pub beta: String,
    pub tau: String,
    pub lambda: String,
    pub nu: String,
}

/// Chain directory index. Holds nothing timing-dependent, so identical runs
/// write identical indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainIndex {
    pub format_version: u32,
    pub dims: Vec<usize>,
    pub n_covariates: usize,
    pub n_draws: usize,
    pub lambda_accept: Vec<u64>,
    pub checkpoints: Vec<Checkpoint>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| StmError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| StmError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| StmError::format(path, e.to_string()))
}

/// Writes draws in checkpoints of [`CHECKPOINT_DRAWS`]: per checkpoint one
/// volume file each for β (`draws × p` records), τ, λ (one record per draw)
/// and ν (`dims = [p]`).
pub fn write_chain(dir: impl AsRef<Path>, chain: &Chain) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| StmError::io(dir, e))?;
    let dims = chain.meta.dims.clone();
    let p = chain.meta.n_covariates;
    let mut checkpoints = Vec::new();
    for (c, block) in chain.draws.chunks(CHECKPOINT_DRAWS).enumerate() {
        let name = |what: &str| format!("{what}_{c:04}.stmv");
        let mut beta = Vec::new();
        let mut tau = Vec::new();
        let mut lambda = Vec::new();
        let mut nu = Vec::new();
        for st in block {
            beta.extend_from_slice(st.beta.as_slice());
            tau.extend_from_slice(st.tau.as_slice());
            lambda.extend_from_slice(st.lambda.as_slice());
            nu.extend_from_slice(st.nu.as_slice());
        }
        let m = block.len();
        VolumeFile::new(dims.clone(), m * p, beta)?.write(dir.join(name("beta")))?;
        VolumeFile::new(dims.clone(), m, tau)?.write(dir.join(name("tau")))?;
        VolumeFile::new(dims.clone(), m, lambda)?.write(dir.join(name("lambda")))?;
        VolumeFile::new(vec![p], m, nu)?.write(dir.join(name("nu")))?;
        checkpoints.push(Checkpoint {
            draws: m,
            beta: name("beta"),
            tau: name("tau"),
            lambda: name("lambda"),
            nu: name("nu"),
        });
    }
    let index = ChainIndex {
        format_version: VOLUME_VERSION,
        dims,
        n_covariates: p,
        n_draws: chain.draws.len(),
        lambda_accept: chain.lambda_accept.clone(),
        checkpoints,
    };
    write_json(&dir.join(CHAIN_INDEX), &index)?;
    write_json(&dir.join(CHAIN_META), &chain.meta)
}

pub fn read_chain(dir: impl AsRef<Path>) -> Result<Chain> {
    let dir = dir.as_ref();
    let index: ChainIndex = read_json(&dir.join(CHAIN_INDEX))?;
    let meta: ChainMeta = read_json(&dir.join(CHAIN_META))?;
    let nd: usize = index.dims.iter().product();
    let p = index.n_covariates;
    let mut draws = Vec::with_capacity(index.n_draws);
    for cp in &index.checkpoints {
        let load = |name: &str, dims: &[usize], records: usize| -> Result<VolumeFile> {
            let path = dir.join(name);
            let v = VolumeFile::read(&path)?;
            if v.dims != dims || v.n_subjects != records {
                return Err(StmError::format(&path, "shape disagrees with chain index"));
            }
            Ok(v)
        };
        let beta = load(&cp.beta, &index.dims, cp.draws * p)?;
        let tau = load(&cp.tau, &index.dims, cp.draws)?;
        let lambda = load(&cp.lambda, &index.dims, cp.draws)?;
        let nu = load(&cp.nu, &[p], cp.draws)?;
        for t in 0..cp.draws {
            draws.push(ModelState {
                beta: DMatrix::from_column_slice(nd, p, &beta.data[t * nd * p..(t + 1) * nd * p]),
                tau: DVector::from_column_slice(tau.record(t)),
                lambda: DVector::from_column_slice(lambda.record(t)),
                nu: DVector::from_column_slice(nu.record(t)),
            });
        }
    }
    if draws.len() != index.n_draws {
        return Err(StmError::format(
            dir.join(CHAIN_INDEX),
            format!("index lists {} draws, checkpoints hold {}", index.n_draws, draws.len()),
        ));
    }
    Ok(Chain {
        draws,
        lambda_accept: index.lambda_accept,
        meta,
    })
}

/// Run metadata written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub stm_version: String,
    pub format_version: u32,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub config: Option<String>,
    pub c0: Option<f64>,
    pub method: Option<String>,
    pub data_fingerprint: Option<String>,
    pub wall_seconds: f64,
    pub mean_sweep_seconds: Option<f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

pub const METADATA_FILE: &str = "metadata.json";

impl RunMetadata {
    pub fn new(command: &str) -> Self {
        RunMetadata {
            command: command.into(),
            stm_version: env!("CARGO_PKG_VERSION").into(),
            format_version: VOLUME_VERSION,
            seed: None,
            inputs: Vec::new(),
            config: None,
            c0: None,
            method: None,
            data_fingerprint: None,
            wall_seconds: 0.0,
            mean_sweep_seconds: None,
            notes: Vec::new(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        write_json(&dir.as_ref().join(METADATA_FILE), self)
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        read_json(&dir.as_ref().join(METADATA_FILE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let v = VolumeFile::new(vec![2, 3], 1, vec![1.5; 6]).unwrap();
        let b = v.to_bytes();
        assert_eq!(&b[..4], b"STMV");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(b[8], 2);
        assert_eq!(&b[9..13], &[2, 0, 0, 0]);
        assert_eq!(&b[13..17], &[3, 0, 0, 0]);
        assert_eq!(&b[17..21], &[1, 0, 0, 0]);
        assert_eq!(&b[21..29], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 21 + 48);
    }

    #[test]
    fn rejects_bad_payload_and_magic() {
        let v = VolumeFile::new(vec![2, 2], 2, (0..8).map(f64::from).collect()).unwrap();
        let mut b = v.to_bytes();
        b.pop();
        assert!(matches!(VolumeFile::from_bytes(&b, Path::new("x")), Err(StmError::Format { .. })));
        let mut b = v.to_bytes();
        b.extend_from_slice(&[0; 8]);
        assert!(VolumeFile::from_bytes(&b, Path::new("x")).is_err());
        let mut b = v.to_bytes();
        b[0] = b'X';
        assert!(VolumeFile::from_bytes(&b, Path::new("x")).is_err());
        let mut b = v.to_bytes();
        b[4] = 2;
        assert!(VolumeFile::from_bytes(&b, Path::new("x")).is_err());
        assert!(VolumeFile::new(vec![2, 2], 2, vec![0.0; 7]).is_err());
    }

    #[test]
    fn covariates_prepend_intercept() {
        let m = parse_covariates("a,b,c\n1,2,3\n4,5,6\n", Path::new("c.csv")).unwrap();
        assert_eq!(m.shape(), (2, 4));
        assert_eq!(m.column(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert_eq!(m[(1, 3)], 6.0);
    }

    #[test]
    fn adhd_style_covariates() {
        let text = "gender,age_std,diagnosis\n1,0.3,1\n0,-1.2,-1\n1,0.9,-1\n";
        let m = parse_covariates(text, Path::new("c.csv")).unwrap();
        assert_eq!(m.shape(), (3, 4));
        assert_eq!(m[(1, 3)], -1.0);
    }

    #[test]
    fn covariate_errors() {
        let p = Path::new("c.csv");
        let e = parse_covariates("a,b\n", p).unwrap_err();
        assert!(e.to_string().contains("no data rows"), "{e}");
        assert!(parse_covariates("", p).is_err());
        assert!(parse_covariates("a,b\n1,2\n3\n", p).unwrap_err().to_string().contains("ragged"));
        assert!(parse_covariates("a,b\n1,x\n", p).unwrap_err().to_string().contains("non-numeric"));
    }

    #[test]
    fn config_defaults_and_errors() {
        let c = RunConfig::default();
        assert_eq!(c.c0, ShiftSpec::Auto);
        assert_eq!(c.phi, PhiSpec::Scalar(10.0));
        assert_eq!((c.a, c.b, c.iterations, c.burn_in), (3.0, 3.0, 1000, 50));
        let hp = c.hyperparams(4).unwrap();
        assert_eq!(hp, Hyperparams::simulation_defaults(4));

        assert!(matches!(RunConfig::parse("alpha = 2"), Err(StmError::Config(_))));
        assert!(RunConfig::parse("a = 2\na = 3").is_err());
        assert!(RunConfig::parse("init = random").is_err());
        assert!(RunConfig::parse("iterations = 10\nburn_in = 10").is_err());
        assert!(RunConfig::parse("phi = 1,2,3").unwrap().hyperparams(4).is_err());
        assert!(RunConfig::parse("delta0 = -1").unwrap().hyperparams(2).is_err());

        let c = RunConfig::parse("# real data\na = 2\nb = 2 # symmetric\nphi = 1, 2\nc0 = 0.5").unwrap();
        assert_eq!((c.a, c.b), (2.0, 2.0));
        assert_eq!(c.c0, ShiftSpec::Fixed(0.5));
        assert_eq!(c.hyperparams(2).unwrap().phi, vec![1.0, 2.0]);
    }

    #[test]
    fn config_echo_round_trips() {
        let c = RunConfig::parse("phi = 1.5,2\nseed = 99\ndelta_lambda = 0.05\nadapt_lambda = true\ninit = identity").unwrap();
        assert_eq!(c.init, InitStrategy::Identity);
        assert_eq!(RunConfig::parse(&c.echo(None)).unwrap(), c);
        let resolved = RunConfig::parse(&c.echo(Some(0.25))).unwrap();
        assert_eq!(resolved.c0, ShiftSpec::Fixed(0.25));
    }

    #[test]
    fn help_lists_every_key() {
        let h = config_help();
        for (k, _, _) in CONFIG_KEYS {
            assert!(h.contains(k));
        }
    }

    proptest! {
        #[test]
        fn volume_round_trip_is_bit_exact(
            dims in prop::collection::vec(1usize..5, 1..4),
            n in 0usize..4,
            seed in any::<u64>(),
        ) {
            let nd: usize = dims.iter().product();
            let data: Vec<f64> = (0..nd * n)
                .map(|i| f64::from_bits(seed.wrapping_mul(6364136223846793005).wrapping_add((i as u64).wrapping_mul(1442695040888963407)) >> 2))
                .collect();
            let v = VolumeFile::new(dims, n, data).unwrap();
            let back = VolumeFile::from_bytes(&v.to_bytes(), Path::new("p")).unwrap();
            prop_assert_eq!(back.dims, v.dims);
            prop_assert_eq!(back.n_subjects, v.n_subjects);
            let same = back.data.iter().zip(&v.data).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
