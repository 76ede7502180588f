//! Batch front end: config ingestion, experiment orchestration, and
//! deterministic JSON/CSV report emission.
//!
//! Exit codes: 0 success, 2 config or validation error, 3 numeric failure.

use clap::{Parser, Subcommand};
use sparse_embed_cli::config::{self, ConfigError, ConfigFile, ProfileCfg};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use sparse_embed::bessel::{
    a0_lambda, bessel_kernel, conditions_series, conditions_sup, kernel_bounds_check,
    kernel_radial, majorant_sum, select_lambda0, BesselError, BesselSettings, DecayProfile,
    FinitenessVerdict, VanishingVerdict,
};
use sparse_embed::dyadic::GridId;
use sparse_embed::embedding::{
    a0_series, a0_series_theta, a0_sup, a0_sup_theta, a2_ratio_check, eset_decay_series,
    extremize, verify_embedding, EmbeddingError, ExtremizeOptions, Regime, SeriesVerdict,
    VerifyOptions,
};
use sparse_embed::sparse::test_function_to_csv;
use sparse_embed::weights::{a_infinity_proxy, ap_constant, WeightError};
use sparse_embed::Mesh;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sparse-embed",
    version,
    about = "Embedding constants and verification for fractional sparse operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports (default: `reports`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for internal parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the window depth (`window.k_max`).
    #[arg(long, global = true)]
    window_depth: Option<i32>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the sufficient-condition constant for the configured
    /// problem, with a truncation-stability table.
    A0,
    /// Probe the embedding inequality with random and structured
    /// candidates over a dilation sweep.
    Verify,
    /// Alternating-maximization search for near-extremal functions.
    Extremize,
    /// Muckenhoupt constant estimate over the family cubes.
    Ap,
    /// Two-weight per-cube ratio check against the Muckenhoupt estimate.
    A2check,
    /// Tail-weight series partial sums and convergence verdict.
    Series,
    /// Bessel kernel diagnostics.
    Bessel {
        #[command(subcommand)]
        sub: BesselSub,
    },
    /// Relative-bound condition evaluators.
    Conditions {
        #[command(subcommand)]
        sub: CondSub,
    },
}

#[derive(Subcommand)]
enum BesselSub {
    /// Check the kernel scaling identity across lambda values.
    Scaling,
    /// Fit-then-verify pointwise decay bounds; dumps a kernel table CSV.
    Bounds,
    /// Constructive scale selection certifying `A0(lambda0) < eps`.
    Lambda0,
    /// Kernel-level majorant probe at a pair of points.
    Majorant,
}

#[derive(Subcommand)]
enum CondSub {
    /// Conditions for the `p <= q` application.
    Thm41,
    /// Conditions for the `q < p` application.
    Thm42,
}

#[derive(Debug, thiserror::Error)]
enum AppError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Numeric(_) | AppError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<EmbeddingError> for AppError {
    fn from(e: EmbeddingError) -> Self {
        match e {
            EmbeddingError::NeedsSumAtLeastOne(_)
            | EmbeddingError::NeedsSumBelowOne(_)
            | EmbeddingError::BadExponent(_)
            | EmbeddingError::BadTheta(_)
            | EmbeddingError::BadArity(_)
            | EmbeddingError::SlotMismatch { .. }
            | EmbeddingError::DegenerateEsets
            | EmbeddingError::NotInFamily => AppError::Config(e.to_string()),
            other => AppError::Numeric(other.to_string()),
        }
    }
}

impl From<BesselError> for AppError {
    fn from(e: BesselError) -> Self {
        match e {
            BesselError::BadSettings { .. }
            | BesselError::BadExponents(_)
            | BesselError::ExponentRelation(_)
            | BesselError::NeedsUnitLambda
            | BesselError::KernelMismatch => AppError::Config(e.to_string()),
            other => AppError::Numeric(other.to_string()),
        }
    }
}

impl From<WeightError> for AppError {
    fn from(e: WeightError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

impl From<sparse_embed::sparse::SparseError> for AppError {
    fn from(e: sparse_embed::sparse::SparseError) -> Self {
        AppError::Numeric(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), AppError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .ok();
    }
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| AppError::Config("--config <path> is required".into()))?;
    let mut cfg = ConfigFile::from_path(config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(depth) = cli.window_depth {
        cfg.problem.window.k_max = depth;
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"));
    std::fs::create_dir_all(&out_dir).map_err(|e| AppError::Io(e.to_string()))?;
    match &cli.command {
        Command::A0 => cmd_a0(&cfg, &out_dir),
        Command::Verify => cmd_verify(&cfg, &out_dir),
        Command::Extremize => cmd_extremize(&cfg, &out_dir),
        Command::Ap => cmd_ap(&cfg, &out_dir),
        Command::A2check => cmd_a2check(&cfg, &out_dir),
        Command::Series => cmd_series(&cfg, &out_dir),
        Command::Bessel { sub } => match sub {
            BesselSub::Scaling => cmd_bessel_scaling(&cfg, &out_dir),
            BesselSub::Bounds => cmd_bessel_bounds(&cfg, &out_dir),
            BesselSub::Lambda0 => cmd_bessel_lambda0(&cfg, &out_dir),
            BesselSub::Majorant => cmd_bessel_majorant(&cfg, &out_dir),
        },
        Command::Conditions { sub } => match sub {
            CondSub::Thm41 => cmd_conditions_sup(&cfg, &out_dir),
            CondSub::Thm42 => cmd_conditions_series(&cfg, &out_dir),
        },
    }
}

// ---------------------------------------------------------------------------
// report plumbing

/// JSON-safe float: infinities and NaN become tagged strings.
fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn family_hash(fam: &sparse_embed::SparseFamily) -> String {
    let mut hasher = Sha256::new();
    hasher.update(fam.to_string().as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Attach the resolved config, compute the canonical hash (wall-clock data
/// excluded), write `<out>/<name>.json` and print a one-line summary.
fn finalize(
    name: &str,
    cfg: &ConfigFile,
    mut body: Map<String, Value>,
    out_dir: &Path,
    summary: &str,
) -> Result<(), AppError> {
    body.insert("command".into(), json!(name));
    body.insert(
        "config".into(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    let canonical = serde_json::to_string(&Value::Object(body.clone()))
        .expect("report serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    body.insert("canonical_hash".into(), json!(hex_string(&hasher.finalize())));
    body.insert(
        "generated_unix".into(),
        json!(std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)),
    );
    let path = out_dir.join(format!("{name}.json"));
    let text = serde_json::to_string_pretty(&Value::Object(body)).expect("report serializes");
    std::fs::write(&path, text).map_err(|e| AppError::Io(e.to_string()))?;
    println!("{name}: {summary}");
    println!("report: {}", path.display());
    Ok(())
}

fn window_value(cfg: &ConfigFile) -> Value {
    json!({
        "k_min": cfg.problem.window.k_min,
        "k_max": cfg.problem.window.k_max,
        "radius": cfg.problem.window.radius,
    })
}

/// Every supremum or sum is taken over the truncated grid only; reports
/// carry this caveat next to the window that defines the truncation.
const TRUNCATION_NOTE: &str =
    "suprema and sums range over the truncated dyadic window only; the untruncated constant is not certified";

// ---------------------------------------------------------------------------
// commands

fn cmd_a0(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let prob = cfg.build_problem()?;
    let theta_variant = cfg.verify.as_ref().map(|v| v.theta_variant).unwrap_or(false);
    let mut body = Map::new();
    let depth = prob
        .family
        .cubes()
        .iter()
        .map(|c| c.level())
        .max()
        .unwrap_or(0);
    let mut stability = Vec::new();
    let value = match (prob.regime(), theta_variant) {
        (Regime::SumAtLeastOne, false) => {
            let r = a0_sup(&prob)?;
            body.insert("variant".into(), json!("sup"));
            if let Some(c) = &r.attaining {
                body.insert("attaining".into(), json!(c.to_string()));
            }
            for cut in [depth - 8, depth - 4, depth] {
                let truncated = prob.family.truncate_levels(cut);
                if truncated.is_empty() {
                    continue;
                }
                let sub = sparse_embed::EmbeddingProblem {
                    family: truncated,
                    ..prob.clone()
                };
                stability.push(json!({"k_max": cut, "a0": jnum(a0_sup(&sub)?.value)}));
            }
            r.value
        }
        (Regime::SumAtLeastOne, true) => {
            let r = a0_sup_theta(&prob)?;
            body.insert("variant".into(), json!("sup_theta"));
            if let Some(c) = &r.attaining {
                body.insert("attaining".into(), json!(c.to_string()));
            }
            for cut in [depth - 8, depth - 4, depth] {
                let truncated = prob.family.truncate_levels(cut);
                if truncated.is_empty() {
                    continue;
                }
                let sub = sparse_embed::EmbeddingProblem {
                    family: truncated,
                    ..prob.clone()
                };
                stability.push(json!({"k_max": cut, "a0": jnum(a0_sup_theta(&sub)?.value)}));
            }
            r.value
        }
        (Regime::SumBelowOne { .. }, variant) => {
            let r = if variant {
                body.insert("variant".into(), json!("series_theta"));
                a0_series_theta(&prob)?
            } else {
                body.insert("variant".into(), json!("series"));
                a0_series(&prob)?
            };
            body.insert(
                "partial_sums_tail".into(),
                Value::Array(
                    r.partial_sums
                        .iter()
                        .rev()
                        .take(8)
                        .rev()
                        .map(|v| jnum(*v))
                        .collect(),
                ),
            );
            for cut in [depth - 8, depth - 4, depth] {
                let truncated = prob.family.truncate_levels(cut);
                if truncated.is_empty() {
                    continue;
                }
                let sub = sparse_embed::EmbeddingProblem {
                    family: truncated,
                    ..prob.clone()
                };
                let v = if variant {
                    a0_series_theta(&sub)?.value
                } else {
                    a0_series(&sub)?.value
                };
                stability.push(json!({"k_max": cut, "a0": jnum(v)}));
            }
            r.value
        }
    };
    body.insert("a0".into(), jnum(value));
    body.insert("stability".into(), Value::Array(stability));
    body.insert("window".into(), window_value(cfg));
    body.insert("family_hash".into(), json!(family_hash(&prob.family)));
    body.insert("family_size".into(), json!(prob.family.len()));
    body.insert("truncation_note".into(), json!(TRUNCATION_NOTE));
    finalize("a0", cfg, body, out_dir, &format!("a0 = {value}"))
}

fn cmd_verify(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let prob = cfg.build_problem()?;
    let vcfg = cfg.verify.clone().unwrap_or(config::VerifyCfg {
        dilations: None,
        resolution: 8,
        theta_variant: false,
    });
    let opts = VerifyOptions {
        trials: cfg.trials,
        seed: cfg.seed,
        dilations: vcfg.dilations.unwrap_or((0, 0)),
        resolution: vcfg.resolution,
        theta_variant: vcfg.theta_variant,
    };
    let report = verify_embedding(&prob, &opts)?;
    let mut body = Map::new();
    body.insert("variant".into(), json!(report.variant));
    body.insert("a0".into(), jnum(report.a0));
    body.insert("best_ratio".into(), jnum(report.best_ratio));
    body.insert("ratio_over_a0".into(), jnum(report.ratio_over_a0));
    body.insert("trials".into(), json!(report.trials));
    body.insert("seed".into(), json!(report.seed));
    body.insert("window".into(), window_value(cfg));
    body.insert("family_hash".into(), json!(family_hash(&prob.family)));
    body.insert(
        "within_coarse_cap".into(),
        json!(report.ratio_over_a0.is_finite() && report.ratio_over_a0 <= 1e3),
    );
    body.insert("truncation_note".into(), json!(TRUNCATION_NOTE));
    body.insert(
        "per_dilation".into(),
        Value::Array(
            report
                .per_dilation
                .iter()
                .map(|d| {
                    json!({
                        "dilation": d.dilation,
                        "best_ratio": jnum(d.best_ratio),
                        "best_candidate": d.best_candidate,
                    })
                })
                .collect(),
        ),
    );
    finalize(
        "verify",
        cfg,
        body,
        out_dir,
        &format!(
            "best_ratio = {}, ratio/a0 = {}",
            report.best_ratio, report.ratio_over_a0
        ),
    )
}

fn cmd_extremize(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let prob = cfg.build_problem()?;
    let ecfg = cfg
        .extremize
        .clone()
        .ok_or_else(|| AppError::Config("config needs an `extremize` section".into()))?;
    let mesh = Mesh::from_window(prob.family.grid(), &cfg.window()?, ecfg.mesh_level)
        .map_err(|e| AppError::Config(e.to_string()))?;
    let result = extremize(
        &prob,
        &ExtremizeOptions {
            cycles: ecfg.cycles,
            restarts: ecfg.restarts,
            seed: cfg.seed,
            mesh,
        },
    )?;
    let a0 = match prob.regime() {
        Regime::SumAtLeastOne => a0_sup(&prob)?.value,
        Regime::SumBelowOne { .. } => a0_series(&prob)?.value,
    };
    let mut dumps = Vec::new();
    for (i, f) in result.best_fns.iter().enumerate() {
        let path = out_dir.join(format!("extremizer_slot{i}.csv"));
        std::fs::write(&path, test_function_to_csv(f)).map_err(|e| AppError::Io(e.to_string()))?;
        dumps.push(path.display().to_string());
    }
    let mut body = Map::new();
    body.insert("best_ratio".into(), jnum(result.best_ratio));
    body.insert("a0".into(), jnum(a0));
    body.insert("ratio_over_a0".into(), jnum(result.best_ratio / a0));
    body.insert(
        "history".into(),
        Value::Array(result.history.iter().map(|v| jnum(*v)).collect()),
    );
    body.insert("cycles_used".into(), json!(result.cycles_used));
    body.insert("seed".into(), json!(cfg.seed));
    body.insert("extremizer_dumps".into(), json!(dumps));
    body.insert("family_hash".into(), json!(family_hash(&prob.family)));
    let summary = format!("best_ratio = {}", result.best_ratio);
    finalize("extremize", cfg, body, out_dir, &summary)
}

fn cmd_ap(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let fam = cfg.build_family()?;
    let acfg = cfg
        .ap
        .clone()
        .ok_or_else(|| AppError::Config("config needs an `ap` section".into()))?;
    let w = config::build_weight(&acfg.weight, cfg.problem.d)?;
    let est = ap_constant(&w, acfg.p, fam.cubes(), cfg.tolerances.quad_rel)?;
    let proxy = a_infinity_proxy(
        &w,
        fam.cubes(),
        acfg.infinity_proxy_p,
        cfg.tolerances.quad_rel,
    )?;
    let mut body = Map::new();
    body.insert("p".into(), json!(est.p));
    body.insert("value".into(), jnum(est.value));
    body.insert("family_size".into(), json!(est.family_size));
    if let Some(c) = &est.attaining {
        body.insert("attaining".into(), json!(c.to_string()));
    }
    body.insert(
        "a_infinity_proxy".into(),
        json!({
            "label": "A_p estimate at large p, finite surrogate only",
            "p": proxy.p,
            "value": jnum(proxy.value),
        }),
    );
    body.insert("family_hash".into(), json!(family_hash(&fam)));
    let summary = format!("[w]_Ap estimate = {} over {} cubes", est.value, est.family_size);
    finalize("ap", cfg, body, out_dir, &summary)
}

fn cmd_a2check(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let fam = cfg.build_family()?;
    let acfg = cfg
        .ap
        .clone()
        .ok_or_else(|| AppError::Config("config needs an `ap` section".into()))?;
    let w = config::build_weight(&acfg.weight, cfg.problem.d)?;
    let report = a2_ratio_check(&w, acfg.p, &fam, cfg.tolerances.quad_rel)?;
    let mut body = Map::new();
    body.insert("sup_ratio".into(), jnum(report.sup_ratio));
    if let Some(c) = &report.attaining {
        body.insert("attaining".into(), json!(c.to_string()));
    }
    body.insert("ap_estimate".into(), jnum(report.ap.value));
    body.insert("normalized".into(), jnum(report.normalized));
    body.insert("eta_cap".into(), jnum(report.eta_cap));
    body.insert("eta".into(), jnum(fam.eta()));
    body.insert("family_hash".into(), json!(family_hash(&fam)));
    let summary = format!(
        "sup T_p = {}, normalized {} <= cap {}",
        report.sup_ratio, report.normalized, report.eta_cap
    );
    finalize("a2check", cfg, body, out_dir, &summary)
}

fn cmd_series(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let prob = cfg.build_problem()?;
    let scfg = cfg
        .series
        .clone()
        .ok_or_else(|| AppError::Config("config needs a `series` section".into()))?;
    let r = match prob.regime() {
        Regime::SumBelowOne { r } => r,
        Regime::SumAtLeastOne => {
            return Err(AppError::Config(
                "series diagnostics need exponents with sum 1/p_i < 1".into(),
            ))
        }
    };
    let rho = -scfg.rho_over_minus_inv_r / r;
    let report = eset_decay_series(&prob.family, r, rho, scfg.tail_tol, scfg.growth_ratio);
    // CSV partial-sum dump
    let csv_path = out_dir.join("series_partial_sums.csv");
    let mut csv = String::from("index,term,partial_sum\n");
    for (i, (t, p)) in report.terms.iter().zip(&report.partial_sums).enumerate() {
        csv.push_str(&format!("{i},{t},{p}\n"));
    }
    std::fs::write(&csv_path, csv).map_err(|e| AppError::Io(e.to_string()))?;
    let mut body = Map::new();
    body.insert("r".into(), jnum(r));
    body.insert("rho".into(), jnum(rho));
    body.insert(
        "verdict".into(),
        json!(match report.verdict {
            SeriesVerdict::Convergent => "CONVERGENT",
            SeriesVerdict::DivergentTrend => "DIVERGENT-TREND",
            SeriesVerdict::Inconclusive => "INCONCLUSIVE",
        }),
    );
    body.insert("tail_fraction".into(), jnum(report.tail_fraction));
    body.insert(
        "total".into(),
        jnum(report.partial_sums.last().copied().unwrap_or(0.0)),
    );
    body.insert("terms".into(), json!(report.terms.len()));
    body.insert("csv".into(), json!(csv_path.display().to_string()));
    body.insert("family_hash".into(), json!(family_hash(&prob.family)));
    let summary = format!("verdict {:?}, tail fraction {}", report.verdict, report.tail_fraction);
    finalize("series", cfg, body, out_dir, &summary)
}

fn bessel_cfg(cfg: &ConfigFile) -> Result<config::BesselCfg, AppError> {
    cfg.bessel
        .clone()
        .ok_or_else(|| AppError::Config("config needs a `bessel` section".into()))
}

fn cmd_bessel_scaling(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let bcfg = bessel_cfg(cfg)?;
    let unit = BesselSettings::new(bcfg.alpha, bcfg.d, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let lambdas = [0.25, 0.5, 2.0, 4.0];
    for &lambda in &lambdas {
        let scaled = BesselSettings::new(bcfg.alpha, bcfg.d, lambda)?;
        for _ in 0..50 {
            let x: Vec<f64> = (0..bcfg.d).map(|_| rng.gen_range(0.05..3.0)).collect();
            let lhs = bessel_kernel(&scaled, &x)?;
            let xl: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let rhs = lambda.powf(bcfg.d as f64 - bcfg.alpha) * bessel_kernel(&unit, &xl)?;
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    let pass = worst <= 1e-6;
    let mut body = Map::new();
    body.insert("alpha".into(), json!(bcfg.alpha));
    body.insert("d".into(), json!(bcfg.d));
    body.insert("lambdas".into(), json!(lambdas));
    body.insert("points_per_lambda".into(), json!(50));
    body.insert("max_rel_error".into(), jnum(worst));
    body.insert("pass".into(), json!(pass));
    body.insert("seed".into(), json!(cfg.seed));
    let summary = format!("max relative error {worst:.3e}, pass = {pass}");
    finalize("bessel_scaling", cfg, body, out_dir, &summary)
}

fn cmd_bessel_bounds(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let bcfg = bessel_cfg(cfg)?;
    let settings = BesselSettings::new(bcfg.alpha, bcfg.d, 1.0)?;
    let report = kernel_bounds_check(&settings, bcfg.samples)?;
    // kernel table for plotting: radius, value with strictly falling values
    let table_path = out_dir.join("bessel_kernel_table.csv");
    let mut csv = String::from("radius,value\n");
    for i in 0..200 {
        let r = 0.01 * (1000f64).powf(i as f64 / 199.0); // 0.01 .. 10
        let v = kernel_radial(&settings, r)?;
        csv.push_str(&format!("{r},{v}\n"));
    }
    std::fs::write(&table_path, csv).map_err(|e| AppError::Io(e.to_string()))?;
    let mut body = Map::new();
    body.insert("far_constant".into(), jnum(report.far_constant));
    body.insert("near_constant".into(), jnum(report.near_constant));
    body.insert("holdout_violations".into(), json!(report.holdout_violations));
    body.insert("pass".into(), json!(report.pass));
    body.insert("near_slope".into(), jnum(report.near_slope));
    body.insert("far_rate".into(), jnum(report.far_rate));
    body.insert("samples".into(), json!(bcfg.samples));
    body.insert("kernel_table".into(), json!(table_path.display().to_string()));
    let summary = format!("pass = {}, near slope {:.3}", report.pass, report.near_slope);
    finalize("bessel_bounds", cfg, body, out_dir, &summary)
}

fn cmd_bessel_lambda0(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let bcfg = bessel_cfg(cfg)?;
    let eps = bcfg
        .eps
        .ok_or_else(|| AppError::Config("bessel.eps is required for lambda0".into()))?;
    let profile_cfg = bcfg
        .profile
        .clone()
        .ok_or_else(|| AppError::Config("bessel.profile is required for lambda0".into()))?;
    let mut body = Map::new();
    let (profile, empirical) = match profile_cfg {
        ProfileCfg::PowerLaw { c0, exponent } => (DecayProfile::power_law(c0, exponent), false),
        ProfileCfg::Constant { c0 } => (DecayProfile::constant(c0), false),
        ProfileCfg::Empirical => {
            let prob = cfg.build_problem()?;
            let p = DecayProfile::from_problem(&prob)?;
            (p, true)
        }
    };
    let sel = select_lambda0(&profile, bcfg.alpha, eps, 200)?;
    body.insert("eps".into(), json!(eps));
    body.insert("n1".into(), json!(sel.n1));
    body.insert("n0".into(), json!(sel.n0));
    body.insert("lambda0".into(), jnum(sel.lambda0));
    body.insert(
        "case_bounds".into(),
        Value::Array(sel.case_bounds.iter().map(|b| jnum(*b)).collect()),
    );
    body.insert("certified".into(), json!(sel.certified));
    if let Some(finest) = profile.finest_scale() {
        // the chosen scale must stay above what the family resolves,
        // otherwise the vanishing came from the truncation alone
        let resolved = ((sel.n1 - sel.n0) as f64).exp2() >= finest;
        body.insert("finest_family_side".into(), jnum(finest));
        body.insert("scale_resolved_by_family".into(), json!(resolved));
    }
    if empirical {
        let prob = cfg.build_problem()?;
        let direct = a0_lambda(&prob, sel.lambda0)?;
        body.insert("direct_a0_at_lambda0".into(), jnum(direct.value));
        body.insert("direct_below_eps".into(), json!(direct.value < eps));
    }
    let summary = format!("lambda0 = {}, certified = {}", sel.lambda0, sel.certified);
    finalize("bessel_lambda0", cfg, body, out_dir, &summary)
}

fn cmd_bessel_majorant(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let bcfg = bessel_cfg(cfg)?;
    let (x, y) = bcfg
        .points
        .clone()
        .ok_or_else(|| AppError::Config("bessel.points is required for majorant".into()))?;
    if x.len() != bcfg.d || y.len() != bcfg.d {
        return Err(AppError::Config("majorant points must have length d".into()));
    }
    let settings = BesselSettings::new(bcfg.alpha, bcfg.d, bcfg.lambda)?;
    let window = cfg.window()?;
    let report = majorant_sum(&settings, &x, &y, &window)?;
    let mut body = Map::new();
    body.insert("x".into(), json!(x));
    body.insert("y".into(), json!(y));
    body.insert("sum".into(), jnum(report.sum));
    body.insert("kernel".into(), jnum(report.kernel));
    body.insert("ratio".into(), jnum(report.ratio));
    body.insert("cubes_hit".into(), json!(report.cubes_hit));
    body.insert("window".into(), window_value(cfg));
    let summary = format!("ratio = {}, cubes hit = {}", report.ratio, report.cubes_hit);
    finalize("bessel_majorant", cfg, body, out_dir, &summary)
}

fn conditions_cfg(cfg: &ConfigFile) -> Result<config::ConditionsCfg, AppError> {
    cfg.conditions
        .clone()
        .ok_or_else(|| AppError::Config("config needs a `conditions` section".into()))
}

fn verdict_value(fin: FinitenessVerdict) -> Value {
    json!(match fin {
        FinitenessVerdict::Finite => "FINITE",
        FinitenessVerdict::InfiniteTrend => "INFINITE-TREND",
    })
}

fn vanishing_value(v: VanishingVerdict) -> Value {
    json!(match v {
        VanishingVerdict::Vanishes => "VANISHES",
        VanishingVerdict::Persists => "PERSISTS",
    })
}

fn cmd_conditions_sup(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let ccfg = conditions_cfg(cfg)?;
    let v = config::build_weight(&ccfg.v, cfg.problem.d)?;
    let grid = GridId::standard(cfg.problem.d);
    let window = cfg.window()?;
    let report = conditions_sup(
        &v,
        ccfg.p,
        ccfg.q,
        ccfg.alpha,
        ccfg.n,
        ccfg.theta,
        &grid,
        &window,
        cfg.tolerances.quad_rel,
    )?;
    let mut body = Map::new();
    body.insert(
        "small_cube".into(),
        json!({
            "condition": "small-cube sup",
            "value": jnum(report.small_cube.value),
            "verdict": verdict_value(report.small_cube.verdict),
            "attaining": report.small_cube.attaining.as_ref().map(|c| c.to_string()),
        }),
    );
    body.insert(
        "large_cube".into(),
        json!({
            "condition": "large-cube sup",
            "value": jnum(report.large_cube.value),
            "verdict": verdict_value(report.large_cube.verdict),
            "attaining": report.large_cube.attaining.as_ref().map(|c| c.to_string()),
        }),
    );
    body.insert(
        "lambda_sweep".into(),
        Value::Array(
            report
                .lambda_sweep
                .iter()
                .map(|(l, v)| json!({"lambda": jnum(*l), "value": jnum(*v)}))
                .collect(),
        ),
    );
    body.insert("vanishing".into(), vanishing_value(report.vanishing));
    body.insert("window".into(), window_value(cfg));
    let summary = format!(
        "small {:?}, vanishing {:?}",
        report.small_cube.verdict, report.vanishing
    );
    finalize("conditions_thm41", cfg, body, out_dir, &summary)
}

fn cmd_conditions_series(cfg: &ConfigFile, out_dir: &Path) -> Result<(), AppError> {
    let ccfg = conditions_cfg(cfg)?;
    let (theta1, theta2) = match (ccfg.theta1, ccfg.theta2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(AppError::Config(
                "conditions.theta1 and conditions.theta2 are required".into(),
            ))
        }
    };
    let v = config::build_weight(&ccfg.v, cfg.problem.d)?;
    let grid = GridId::standard(cfg.problem.d);
    let window = cfg.window()?;
    let report = conditions_series(
        &v,
        ccfg.p,
        ccfg.q,
        ccfg.alpha,
        theta1,
        theta2,
        ccfg.theta,
        &grid,
        &window,
        cfg.tolerances.quad_rel,
    )?;
    let mut body = Map::new();
    body.insert("norm".into(), jnum(report.norm));
    body.insert("norm_pow".into(), jnum(report.norm_pow));
    body.insert(
        "small_cube".into(),
        json!({
            "condition": "small-cube sup",
            "value": jnum(report.small_cube.value),
            "verdict": verdict_value(report.small_cube.verdict),
            "attaining": report.small_cube.attaining.as_ref().map(|c| c.to_string()),
        }),
    );
    body.insert(
        "lambda_sweep".into(),
        Value::Array(
            report
                .lambda_sweep
                .iter()
                .map(|(l, v)| json!({"lambda": jnum(*l), "value": jnum(*v)}))
                .collect(),
        ),
    );
    body.insert("vanishing".into(), vanishing_value(report.vanishing));
    body.insert(
        "composite_bound".into(),
        Value::Array(
            report
                .composite_bound
                .iter()
                .map(|(l, v)| json!({"lambda": jnum(*l), "bound": jnum(*v)}))
                .collect(),
        ),
    );
    body.insert("window".into(), window_value(cfg));
    let summary = format!(
        "norm^~ = {}, vanishing {:?}",
        report.norm_pow, report.vanishing
    );
    finalize("conditions_thm42", cfg, body, out_dir, &summary)
}
