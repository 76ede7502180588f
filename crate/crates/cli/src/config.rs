//! Experiment configuration: one JSON document per run, with weight and
//! cube literals in the library's text forms. Parsing round-trips and all
//! referenced files are checked at validation time.

use serde::{Deserialize, Serialize};
use sparse_embed::dyadic::{DyadicCube, GridId, Window};
use sparse_embed::embedding::EmbeddingProblem;
use sparse_embed::sparse::{assign_esets, KernelMap, SparseFamily};
use sparse_embed::weights::{parse_weight, Weight};
use sparse_embed::Mesh;
use std::collections::HashMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Invalid(String),
    #[error("referenced file missing: {0}")]
    MissingFile(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConfigFile {
    pub problem: ProblemCfg,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extremize: Option<ExtremizeCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<ApCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bessel: Option<BesselCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_trials() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Tolerances {
    #[serde(default = "default_quad_rel")]
    pub quad_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad_rel: default_quad_rel(),
        }
    }
}

fn default_quad_rel() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemCfg {
    pub d: usize,
    pub p: Vec<f64>,
    pub weights: Vec<String>,
    pub kernel: KernelCfg,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub family: FamilyCfg,
    pub window: WindowCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelCfg {
    Riesz { alpha: f64 },
    Bessel { alpha: f64, lambda: f64 },
    Tabulated { file: String },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum FamilyCfg {
    File {
        file: String,
    },
    Generator {
        generator: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_min: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_max: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        depth: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<i64>,
        mesh_level: i32,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WindowCfg {
    pub k_min: i32,
    pub k_max: i32,
    pub radius: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyCfg {
    #[serde(default)]
    pub dilations: Option<(i32, i32)>,
    #[serde(default = "default_resolution")]
    pub resolution: i32,
    #[serde(default)]
    pub theta_variant: bool,
}

fn default_resolution() -> i32 {
    8
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtremizeCfg {
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub mesh_level: i32,
}

fn default_cycles() -> usize {
    12
}

fn default_restarts() -> usize {
    3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ApCfg {
    pub p: f64,
    pub weight: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infinity_proxy_p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesCfg {
    /// Decay exponent, given as a multiple of `-1/r` (so `2.0` means
    /// `rho = -2/r`).
    pub rho_over_minus_inv_r: f64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_growth_ratio")]
    pub growth_ratio: f64,
}

fn default_tail_tol() -> f64 {
    1e-3
}

fn default_growth_ratio() -> f64 {
    1.5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BesselCfg {
    pub alpha: f64,
    pub d: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<(Vec<f64>, Vec<f64>)>,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_samples() -> usize {
    120
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProfileCfg {
    PowerLaw { c0: f64, exponent: f64 },
    Constant { c0: f64 },
    Empirical,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionsCfg {
    pub v: String,
    pub p: f64,
    pub q: f64,
    pub alpha: f64,
    #[serde(default = "default_n_param")]
    pub n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
}

fn default_n_param() -> f64 {
    2.0
}

impl ConfigFile {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::MissingFile(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_canonical_string(&self) -> String {
        // serialize through Value so keys come out sorted
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&v).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.p.len() != self.problem.weights.len() {
            return Err(ConfigError::Invalid(format!(
                "got {} exponents but {} weights",
                self.problem.p.len(),
                self.problem.weights.len()
            )));
        }
        if self.problem.p.len() < 2 {
            return Err(ConfigError::Invalid(
                "need at least 2 slots (n >= 2)".into(),
            ));
        }
        if let FamilyCfg::File { file } = &self.problem.family {
            if !Path::new(file).exists() {
                return Err(ConfigError::MissingFile(file.clone()));
            }
        }
        if let KernelCfg::Tabulated { file } = &self.problem.kernel {
            if !Path::new(file).exists() {
                return Err(ConfigError::MissingFile(file.clone()));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> Result<Window, ConfigError> {
        Window::with_radius_int(
            self.problem.window.k_min,
            self.problem.window.k_max,
            self.problem.window.radius,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_weights(&self) -> Result<Vec<Weight>, ConfigError> {
        self.problem
            .weights
            .iter()
            .map(|lit| build_weight(lit, self.problem.d))
            .collect()
    }

    pub fn build_kernel(&self) -> Result<KernelMap, ConfigError> {
        let n = self.problem.p.len();
        let d = self.problem.d;
        match &self.problem.kernel {
            KernelCfg::Riesz { alpha } => {
                KernelMap::riesz(*alpha, n, d).map_err(|e| ConfigError::Invalid(e.to_string()))
            }
            KernelCfg::Bessel { alpha, lambda } => KernelMap::bessel(*alpha, *lambda, n, d)
                .map_err(|e| ConfigError::Invalid(e.to_string())),
            KernelCfg::Tabulated { file } => {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| ConfigError::MissingFile(format!("{file}: {e}")))?;
                let mut map = HashMap::new();
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (cube, value) = line.rsplit_once(',').ok_or_else(|| {
                        ConfigError::Parse(format!("tabulated kernel line `{line}`"))
                    })?;
                    let cube: DyadicCube = cube
                        .trim()
                        .parse()
                        .map_err(|e| ConfigError::Parse(format!("{e}")))?;
                    let value: f64 = value
                        .trim()
                        .parse()
                        .map_err(|e| ConfigError::Parse(format!("kernel value: {e}")))?;
                    map.insert(cube, value);
                }
                Ok(KernelMap::tabulated(map))
            }
        }
    }

    pub fn build_family(&self) -> Result<SparseFamily, ConfigError> {
        build_family(&self.problem.family, self.problem.d)
    }

    pub fn build_problem(&self) -> Result<EmbeddingProblem, ConfigError> {
        let mut prob = EmbeddingProblem::new(
            self.problem.d,
            self.problem.p.clone(),
            self.build_weights()?,
            self.build_kernel()?,
            self.build_family()?,
            self.problem.theta,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        prob.rel_tol = self.tolerances.quad_rel;
        Ok(prob)
    }
}

pub fn build_weight(literal: &str, d: usize) -> Result<Weight, ConfigError> {
    if let Some(path) = literal.strip_prefix("sampled:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::MissingFile(format!("{path}: {e}")))?;
        return parse_sampled_csv(&text).map_err(ConfigError::Parse);
    }
    parse_weight(literal, d).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// Sampled-weight CSV: header `# tau=..; level=..; lo=..; hi=..`, then
/// rows `m1,..,md,value`; omitted cells are zero.
pub fn parse_sampled_csv(text: &str) -> Result<Weight, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty sampled CSV")?;
    let header = header.trim_start_matches('#').trim();
    let mut tau = None;
    let mut level = None;
    let mut lo = None;
    let mut hi = None;
    for part in header.split(';') {
        let part = part.trim();
        if let Some(v) = part.strip_prefix("tau=") {
            let vals: Result<Vec<i8>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            tau = Some(vals.map_err(|e| format!("tau: {e}"))?);
        } else if let Some(v) = part.strip_prefix("level=") {
            level = Some(v.trim().parse::<i32>().map_err(|e| format!("level: {e}"))?);
        } else if let Some(v) = part.strip_prefix("lo=") {
            let vals: Result<Vec<i64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            lo = Some(vals.map_err(|e| format!("lo: {e}"))?);
        } else if let Some(v) = part.strip_prefix("hi=") {
            let vals: Result<Vec<i64>, _> = v.split(',').map(|t| t.trim().parse()).collect();
            hi = Some(vals.map_err(|e| format!("hi: {e}"))?);
        }
    }
    let (tau, level, lo, hi) = match (tau, level, lo, hi) {
        (Some(t), Some(k), Some(l), Some(h)) => (t, k, l, h),
        _ => return Err("sampled CSV header needs tau=, level=, lo=, hi=".into()),
    };
    // normalize the grid id from the shift at this level
    let grid = if level.rem_euclid(2) == 0 {
        GridId(tau)
    } else {
        GridId(tau.iter().map(|s| -s).collect())
    };
    let mesh = Mesh::from_bounds(grid, level, sparse_embed::CellBox::new(lo, hi))
        .map_err(|e| e.to_string())?;
    let mut values = vec![0.0; mesh.len()];
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts: Vec<&str> = line.split(',').collect();
        let value: f64 = parts
            .pop()
            .ok_or("short row")?
            .trim()
            .parse()
            .map_err(|e| format!("value: {e}"))?;
        let idx: Result<Vec<i64>, _> = parts.iter().map(|t| t.trim().parse()).collect();
        let idx = idx.map_err(|e| format!("index: {e}"))?;
        let flat = mesh
            .flat(&idx)
            .ok_or_else(|| format!("cell {idx:?} outside mesh"))?;
        values[flat] = value;
    }
    Weight::sampled(mesh, values).map_err(|e| e.to_string())
}

pub fn build_family(cfg: &FamilyCfg, d: usize) -> Result<SparseFamily, ConfigError> {
    match cfg {
        FamilyCfg::File { file } => {
            let text = std::fs::read_to_string(file)
                .map_err(|e| ConfigError::MissingFile(format!("{file}: {e}")))?;
            text.parse()
                .map_err(|e: sparse_embed::sparse::SparseError| ConfigError::Parse(e.to_string()))
        }
        FamilyCfg::Generator {
            generator,
            k_min,
            k_max,
            depth,
            level,
            count,
            mesh_level,
        } => {
            let cubes = match generator.as_str() {
                // nested tower [0, 2^-k)^d
                "origin_tower" => {
                    let lo = k_min.unwrap_or(0);
                    let hi = k_max
                        .or(*depth)
                        .ok_or_else(|| ConfigError::Invalid("origin_tower needs k_max".into()))?;
                    (lo..=hi)
                        .map(|k| DyadicCube::standard(k, vec![0; d]))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?
                }
                // diagonal annuli [2^-k-1, 2^-k)^d
                "annuli" => {
                    let lo = k_min.unwrap_or(0);
                    let hi = k_max
                        .or(*depth)
                        .ok_or_else(|| ConfigError::Invalid("annuli needs k_max".into()))?;
                    (lo..=hi)
                        .map(|k| DyadicCube::standard(k + 1, vec![1; d]))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?
                }
                // all subcubes of the unit cube down to `depth`
                "full_tree" => {
                    let depth = depth
                        .ok_or_else(|| ConfigError::Invalid("full_tree needs depth".into()))?;
                    let mut cubes = Vec::new();
                    let mut stack = vec![DyadicCube::unit(d)];
                    while let Some(c) = stack.pop() {
                        if c.level() < depth {
                            stack.extend(
                                c.children()
                                    .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                            );
                        }
                        cubes.push(c);
                    }
                    cubes.sort();
                    cubes
                }
                // `count` pairwise disjoint cubes in a row at `level`
                "disjoint_row" => {
                    let level = level
                        .ok_or_else(|| ConfigError::Invalid("disjoint_row needs level".into()))?;
                    let count =
                        count.ok_or_else(|| ConfigError::Invalid("disjoint_row needs count".into()))?;
                    (0..count)
                        .map(|m| {
                            let mut idx = vec![0; d];
                            idx[0] = m;
                            DyadicCube::standard(level, idx)
                        })
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?
                }
                other => {
                    return Err(ConfigError::Invalid(format!("unknown generator `{other}`")))
                }
            };
            assign_esets(&cubes, *mesh_level).map_err(|e| ConfigError::Invalid(e.to_string()))
        }
    }
}
