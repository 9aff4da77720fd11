//! Experiment configuration (TOML).
//!
//! Only `seed` and `[ifs]` are mandatory; every subcommand section falls
//! back to the defaults below when absent.

use std::path::PathBuf;

use ifs_decay::{Conjugacy, Error as CoreError, Ifs, IfsMap, Interval};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; defaults to the available parallelism.
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub ifs: IfsConfig,
    #[serde(default)]
    pub fourier: FourierConfig,
    #[serde(default)]
    pub decay_fit: DecayFitConfig,
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default)]
    pub clt: CltConfig,
    #[serde(default)]
    pub llt: LltConfig,
    #[serde(default)]
    pub smooth_llt: SmoothLltConfig,
    #[serde(default)]
    pub cllt: CondLltConfig,
    #[serde(default)]
    pub operator_eigen: EigenConfig,
    #[serde(default)]
    pub dolgopyat: DolgopyatConfig,
    #[serde(default)]
    pub dio: DioConfig,
    #[serde(default)]
    pub linearity: LinearityConfig,
    #[serde(default)]
    pub conjugate: ConjugateConfig,
    #[serde(default)]
    pub decay_pipeline: PipelineConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsConfig {
    pub interval: [f64; 2],
    pub probabilities: Vec<f64>,
    pub maps: Vec<MapConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    /// `affine`, `polynomial` or `conjugated-affine`.
    pub kind: String,
    /// Affine: `[ratio, offset]`. Polynomial: `[a0, a1, ..]`, degree at most 4.
    pub coefficients: Vec<f64>,
    /// `exp` or `quadratic`, for `conjugated-affine` maps.
    pub conjugacy: Option<String>,
    /// Rate of `exp`, curvature of `quadratic`.
    pub conjugacy_param: Option<f64>,
}

/// Statistics shared by the walk-based subcommands.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    pub samples: usize,
    pub n: usize,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            n: 100,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierConfig {
    pub q: Vec<f64>,
    pub samples: usize,
    /// Coding depth; chosen from the largest `|q|` when absent.
    pub depth: Option<usize>,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            q: (1..=20).map(f64::from).collect(),
            samples: 100_000,
            depth: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecayFitConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
    pub samples: usize,
}

impl Default for DecayFitConfig {
    fn default() -> Self {
        Self {
            q_min: 1e2,
            q_max: 1e6,
            points: 13,
            samples: 100_000,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub trajectories: usize,
    pub n: Vec<usize>,
    pub k: f64,
    pub h_prime: f64,
    pub cell_samples: usize,
    pub stats: StatsConfig,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            trajectories: 1000,
            n: vec![10, 100],
            k: 20.0,
            h_prime: 7.0,
            cell_samples: 10_000,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltConfig {
    pub n: Vec<usize>,
    /// `exact` (two-map affine only) or `mc`.
    pub method: String,
    pub samples: usize,
    pub stats: StatsConfig,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            n: vec![100, 400, 1600],
            method: "exact".into(),
            samples: 100_000,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LltConfig {
    pub n: Vec<usize>,
    pub c_lo: f64,
    pub c_hi: f64,
    pub v: f64,
    /// Tail word `ω`, 1-based symbols.
    pub tail: Vec<u8>,
    pub samples: usize,
    /// `R` in `|v| ≤ √(R n log n)`.
    pub r_const: f64,
    /// `standard` or `literal`.
    pub convention: String,
    pub stats: StatsConfig,
}

impl Default for LltConfig {
    fn default() -> Self {
        Self {
            n: vec![20, 40, 80],
            c_lo: -0.25,
            c_hi: 0.25,
            v: 0.0,
            tail: vec![1; 20],
            samples: 100_000,
            r_const: 1.0,
            convention: "standard".into(),
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmoothLltConfig {
    pub n: Vec<usize>,
    pub c_lo: f64,
    pub c_hi: f64,
    pub eps: f64,
    pub tail: Vec<u8>,
    pub samples: usize,
    pub stats: StatsConfig,
}

impl Default for SmoothLltConfig {
    fn default() -> Self {
        Self {
            n: vec![30],
            c_lo: -0.5,
            c_hi: 0.5,
            eps: 0.1,
            tail: vec![1; 20],
            samples: 100_000,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CondLltConfig {
    pub k: Vec<f64>,
    pub h_prime: f64,
    /// `J` as fractions of `[kχ, kχ + D′]`.
    pub j_lo_frac: f64,
    pub j_hi_frac: f64,
    pub samples: usize,
    pub gamma_samples: usize,
    pub min_cell: usize,
    pub stats: StatsConfig,
}

impl Default for CondLltConfig {
    fn default() -> Self {
        Self {
            k: vec![20.0, 50.0, 80.0],
            h_prime: 7.0,
            j_lo_frac: 0.0,
            j_hi_frac: 0.5,
            samples: 200_000,
            gamma_samples: 20_000,
            min_cell: 1000,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenConfig {
    pub theta: Vec<f64>,
    pub depth: Option<usize>,
    pub recentred: bool,
    pub stats: StatsConfig,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self {
            theta: vec![0.0, 0.01, 0.05, 0.1],
            depth: None,
            recentred: false,
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DolgopyatConfig {
    pub theta: Vec<f64>,
    pub beta: f64,
    pub depth: Option<usize>,
    pub probes: usize,
    /// Largest power checked during `C₆` calibration.
    pub calibration_n: usize,
    /// Skip calibration and use this `C₆`.
    pub c6: Option<f64>,
}

impl Default for DolgopyatConfig {
    fn default() -> Self {
        Self {
            theta: (1..=128).map(|i| 2.0 * i as f64).collect(),
            beta: 2.0,
            depth: None,
            probes: 64,
            calibration_n: 4,
            c6: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DioConfig {
    /// Ratio logs; the fixed-point log-derivatives of the IFS when absent.
    pub t: Option<Vec<f64>>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    /// `inf` (infimum over shifts) or `ls` (no shift).
    pub mode: String,
}

impl Default for DioConfig {
    fn default() -> Self {
        Self {
            t: None,
            x_min: 10.0,
            x_max: 1e4,
            points: 4096,
            mode: "inf".into(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearityConfig {
    pub n: Vec<usize>,
    pub samples: usize,
    pub temporal_n: usize,
    pub temporal_samples: usize,
    /// Dyadic box scales `2^-from ..= 2^-to`.
    pub scale_from: i32,
    pub scale_to: i32,
}

impl Default for LinearityConfig {
    fn default() -> Self {
        Self {
            n: vec![2, 4, 8, 16],
            samples: 1024,
            temporal_n: 20,
            temporal_samples: 10_000,
            scale_from: 4,
            scale_to: 10,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugateConfig {
    pub grid: usize,
    /// Run even when the linearity test shows no decay.
    pub force: bool,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        Self {
            grid: 1001,
            force: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub q_min: f64,
    pub q_max: f64,
    pub points: usize,
    /// Rate exponent in `|q| = k^{δ₀/4} e^{(k + √k) χ}`.
    pub delta0: f64,
    pub samples: usize,
    pub stats: StatsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q_min: 1e2,
            q_max: 1e6,
            points: 13,
            delta0: 0.5,
            samples: 100_000,
            stats: StatsConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let grids: [(&str, usize); 12] = [
            ("fourier.q", self.fourier.q.len()),
            ("walk.n", self.walk.n.len()),
            ("clt.n", self.clt.n.len()),
            ("llt.n", self.llt.n.len()),
            ("smooth_llt.n", self.smooth_llt.n.len()),
            ("cllt.k", self.cllt.k.len()),
            ("operator_eigen.theta", self.operator_eigen.theta.len()),
            ("dolgopyat.theta", self.dolgopyat.theta.len()),
            ("linearity.n", self.linearity.n.len()),
            ("decay_fit.points", self.decay_fit.points),
            ("decay_pipeline.points", self.decay_pipeline.points),
            ("ifs.maps", self.ifs.maps.len()),
        ];
        if let Some((name, _)) = grids.iter().find(|(_, len)| *len == 0) {
            return Err(CliError::Config(format!("{name} must not be empty")));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if !["exact", "mc"].contains(&self.clt.method.as_str()) {
            return Err(CliError::Config(format!(
                "clt.method must be \"exact\" or \"mc\", got {:?}",
                self.clt.method
            )));
        }
        if !["standard", "literal"].contains(&self.llt.convention.as_str()) {
            return Err(CliError::Config(format!(
                "llt.convention must be \"standard\" or \"literal\", got {:?}",
                self.llt.convention
            )));
        }
        if !["inf", "ls"].contains(&self.dio.mode.as_str()) {
            return Err(CliError::Config(format!(
                "dio.mode must be \"inf\" or \"ls\", got {:?}",
                self.dio.mode
            )));
        }
        Ok(())
    }

    /// Builds the IFS without the hypothesis checks.
    pub fn ifs_unchecked(&self) -> Result<Ifs, CliError> {
        let (maps, probs, iv) = self.ifs_parts()?;
        Ifs::new_unchecked(maps, probs, iv).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Builds and validates the IFS.
    pub fn ifs(&self) -> Result<Ifs, CliError> {
        let (maps, probs, iv) = self.ifs_parts()?;
        Ifs::new(maps, probs, iv).map_err(|e| match e {
            CoreError::Validation(rep) => CliError::Validation(rep.to_string()),
            other => CliError::Config(other.to_string()),
        })
    }

    fn ifs_parts(&self) -> Result<(Vec<IfsMap>, Vec<f64>, Interval), CliError> {
        let cfg = &self.ifs;
        let bad = |e: CoreError| CliError::Config(e.to_string());
        let iv = Interval::new(cfg.interval[0], cfg.interval[1]).map_err(bad)?;
        let maps = cfg
            .maps
            .iter()
            .enumerate()
            .map(|(i, m)| build_map(m, iv).map_err(|e| CliError::Config(format!("map {}: {e}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((maps, cfg.probabilities.clone(), iv))
    }
}

fn build_map(m: &MapConfig, iv: Interval) -> Result<IfsMap, String> {
    let c = &m.coefficients;
    let affine_pair = || -> Result<(f64, f64), String> {
        match c.as_slice() {
            [r, b] => Ok((*r, *b)),
            _ => Err(format!("{} needs [ratio, offset], got {} numbers", m.kind, c.len())),
        }
    };
    match m.kind.as_str() {
        "affine" => {
            let (r, b) = affine_pair()?;
            IfsMap::affine(r, b, iv).map_err(|e| e.to_string())
        }
        "polynomial" => IfsMap::polynomial(c.clone(), iv).map_err(|e| e.to_string()),
        "conjugated-affine" => {
            let (r, b) = affine_pair()?;
            let param = m.conjugacy_param.ok_or("conjugacy_param is required")?;
            let conj = match m.conjugacy.as_deref() {
                Some("exp") => Conjugacy::Exp { rate: param },
                Some("quadratic") => Conjugacy::Quadratic { curvature: param },
                other => return Err(format!("unknown conjugacy {other:?}")),
            };
            IfsMap::conjugated_affine(r, b, conj, iv).map_err(|e| e.to_string())
        }
        other => Err(format!("unknown map kind {other:?}")),
    }
}
