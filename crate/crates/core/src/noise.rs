//! Multiplicative gate noise, seeded Monte-Carlo trials and log-log fits of
//! infidelity against noise strength.
//!
//! Trial `k` of a run seeded with `master_seed` draws its randomness from
//! stream `k` of a ChaCha generator keyed by `master_seed`, so outcomes do not
//! depend on scheduling or thread count. The same trial seeds are reused for
//! every point of a `v` grid, which makes the sweeps use common random numbers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::echo::{run_echo, EchoConfig};
use crate::error::{invalid, Result};
use crate::transfer::{run_transfer, TransferConfig};

/// Gate errors `J → J(1 + η)` with `η ~ Normal(0, v²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseModelDoc")]
pub struct NoiseModel {
    pub v: f64,
    /// Also perturb single-site field phases. Off by default: the error model
    /// only touches exchange couplings.
    #[serde(default)]
    pub perturb_fields: bool,
    #[serde(skip)]
    normal: Option<Normal<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseModelDoc {
    v: f64,
    #[serde(default)]
    perturb_fields: bool,
}

impl TryFrom<NoiseModelDoc> for NoiseModel {
    type Error = crate::Error;

    fn try_from(doc: NoiseModelDoc) -> Result<Self> {
        Ok(NoiseModel::new(doc.v)?.with_field_noise(doc.perturb_fields))
    }
}

impl NoiseModel {
    pub fn new(v: f64) -> Result<Self> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid!("noise strength must be finite and nonnegative, got {v}"));
        }
        let normal = if v > 0.0 {
            Some(Normal::new(0.0, v).map_err(|e| invalid!("{e}"))?)
        } else {
            None
        };
        Ok(Self {
            v,
            perturb_fields: false,
            normal,
        })
    }

    pub fn with_field_noise(mut self, on: bool) -> Self {
        self.perturb_fields = on;
        self
    }

    pub fn is_noise_free(&self) -> bool {
        self.v == 0.0
    }

    /// A fresh `η`. With `v = 0` nothing is drawn and the result is 0.
    pub fn sample_eta<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.normal {
            Some(normal) => normal.sample(rng),
            None => 0.0,
        }
    }
}

/// Seed of trial `trial` under `master_seed`: the first word of ChaCha
/// stream `trial`.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng.next_u64()
}

/// A protocol configuration whose noise and seed are filled in per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "kebab-case")]
pub enum ProtocolTemplate {
    Echo(EchoConfig),
    Transfer(TransferConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Echo,
    Transfer,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProtocolKind::Echo => "echo",
            ProtocolKind::Transfer => "transfer",
        })
    }
}

impl ProtocolTemplate {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolTemplate::Echo(_) => ProtocolKind::Echo,
            ProtocolTemplate::Transfer(_) => ProtocolKind::Transfer,
        }
    }

    pub fn num_sites(&self) -> usize {
        match self {
            ProtocolTemplate::Echo(c) => c.n,
            ProtocolTemplate::Transfer(c) => c.n,
        }
    }

    pub fn time(&self) -> f64 {
        match self {
            ProtocolTemplate::Echo(c) => c.t,
            ProtocolTemplate::Transfer(c) => c.t,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            ProtocolTemplate::Echo(c) => c.n_steps,
            ProtocolTemplate::Transfer(c) => c.n_steps,
        }
    }

    fn perturb_fields(&self) -> bool {
        match self {
            ProtocolTemplate::Echo(c) => c.noise.is_some_and(|m| m.perturb_fields),
            ProtocolTemplate::Transfer(c) => c.noise.is_some_and(|m| m.perturb_fields),
        }
    }

    /// Runs one noisy instance and returns its outcome.
    pub fn run_once(&self, noise: NoiseModel, seed: u64) -> Result<RunOutcome> {
        match self {
            ProtocolTemplate::Echo(c) => {
                let r = run_echo(&EchoConfig {
                    noise: Some(noise),
                    seed,
                    ..c.clone()
                })?;
                Ok(RunOutcome {
                    fidelity: r.fidelity,
                    norm_error: r.conservation.norm_error,
                    sz_drift: r.conservation.sz_drift,
                })
            }
            ProtocolTemplate::Transfer(c) => {
                let r = run_transfer(&TransferConfig {
                    noise: Some(noise),
                    seed,
                    ..c.clone()
                })?;
                Ok(RunOutcome {
                    fidelity: r.fidelity,
                    norm_error: r.conservation.norm_error,
                    sz_drift: r.conservation.sz_drift,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub fidelity: f64,
    pub norm_error: f64,
    pub sz_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub infidelity: f64,
    pub norm_error: f64,
    pub sz_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialStats {
    pub protocol: ProtocolKind,
    pub n: usize,
    pub v: f64,
    pub trials: usize,
    pub mean_infidelity: f64,
    /// Sample standard deviation; 0 for a single trial.
    pub std_infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSet {
    pub stats: TrialStats,
    pub records: Vec<TrialRecord>,
}

/// Runs `trials` noisy instances of `template` at strength `v`.
pub fn run_trials(template: &ProtocolTemplate, v: f64, trials: usize, master_seed: u64) -> Result<TrialSet> {
    if trials == 0 {
        return Err(invalid!("at least one trial is required"));
    }
    let noise = NoiseModel::new(v)?.with_field_noise(template.perturb_fields());
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(master_seed, trial);
            let out = template.run_once(noise, seed)?;
            Ok(TrialRecord {
                trial,
                seed,
                infidelity: 1.0 - out.fidelity,
                norm_error: out.norm_error,
                sz_drift: out.sz_drift,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let count = records.len() as f64;
    let mean = records.iter().map(|r| r.infidelity).sum::<f64>() / count;
    let std = if records.len() > 1 {
        let ss: f64 = records.iter().map(|r| (r.infidelity - mean).powi(2)).sum();
        (ss / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(TrialSet {
        stats: TrialStats {
            protocol: template.kind(),
            n: template.num_sites(),
            v,
            trials,
            mean_infidelity: mean,
            std_infidelity: std,
        },
        records,
    })
}

/// Minimum coefficient of determination for a slope to count as a
/// robustness exponent.
pub const MIN_R_SQUARED: f64 = 0.95;

/// `ln I = a + b ln v`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub a: f64,
    pub b: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn is_reliable(&self) -> bool {
        self.r_squared >= MIN_R_SQUARED
    }

    pub fn predict(&self, v: f64) -> f64 {
        (self.a + self.b * v.ln()).exp()
    }
}

/// Ordinary least squares on `(ln v, ln I)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(invalid!("a log-log fit needs at least 3 points, got {}", points.len()));
    }
    if let Some(&(v, i)) = points.iter().find(|(v, i)| !(*v > 0.0 && *i > 0.0)) {
        return Err(invalid!("log undefined for point (v = {v}, infidelity = {i})"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid!("all v values are equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let residuals: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| y - (a + b * x)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(FitResult {
        a,
        b,
        r_squared,
        residuals,
    })
}

/// `n` points log-spaced over `[lo, hi]`, both ends included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 {
        return Err(invalid!("need 0 < lo <= hi and at least one point"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect())
}

/// Trials, per-`v` statistics and the fit for one chain length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopePoint {
    pub n: usize,
    pub sweep: Vec<TrialSet>,
    /// `None` when fewer than three points had positive mean infidelity.
    pub fit: Option<FitResult>,
}

impl SlopePoint {
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.sweep
            .iter()
            .map(|s| (s.stats.v, s.stats.mean_infidelity))
            .filter(|&(v, i)| v > 0.0 && i > 0.0)
            .collect()
    }
}

/// Noise sweep over `v_grid` for every chain length, each followed by a
/// log-log fit. `template_for(n)` supplies the protocol for length `n`.
pub fn slope_vs_n<F>(
    template_for: F,
    n_values: &[usize],
    v_grid: &[f64],
    trials: usize,
    master_seed: u64,
) -> Result<Vec<SlopePoint>>
where
    F: Fn(usize) -> Result<ProtocolTemplate>,
{
    n_values
        .iter()
        .map(|&n| {
            let template = template_for(n)?;
            let sweep = v_grid
                .iter()
                .map(|&v| run_trials(&template, v, trials, master_seed))
                .collect::<Result<Vec<_>>>()?;
            let mut point = SlopePoint { n, sweep, fit: None };
            point.fit = loglog_fit(&point.fit_points()).ok();
            Ok(point)
        })
        .collect()
}

/// `(even n, odd n)`.
pub fn split_by_parity(points: &[SlopePoint]) -> (Vec<&SlopePoint>, Vec<&SlopePoint>) {
    points.iter().partition(|p| p.n % 2 == 0)
}
