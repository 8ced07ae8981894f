//! Perfect state transfer of a singlet from sites (1, 2) to sites (n-1, n)
//! along the engineered ferromagnetic chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::chain::{transfer_chain, ExactPropagator};
use crate::echo::Conservation;
use crate::error::{invalid, Error, Result};
use crate::noise::{trial_seed, NoiseModel};
use crate::statevec::{singlet, StateVector};
use crate::trotter::{execute_plan, three_term_plan, TrotterMode};

/// Time at which the engineered chain mirrors its state.
pub const TRANSFER_TIME: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferEngine {
    Exact,
    TrotterDirect,
    #[serde(rename = "trotter-simfm")]
    TrotterSimulatedFm,
}

impl std::fmt::Display for TransferEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TransferEngine::Exact => "exact",
            TransferEngine::TrotterDirect => "trotter-direct",
            TransferEngine::TrotterSimulatedFm => "trotter-simfm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    pub n: usize,
    pub t: f64,
    pub n_steps: usize,
    pub engine: TransferEngine,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

impl TransferConfig {
    pub fn noise_free(n: usize, t: f64, n_steps: usize, engine: TransferEngine) -> Self {
        Self {
            n,
            t,
            n_steps,
            engine,
            noise: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid!("transfer needs at least 2 sites, got {}", self.n));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(invalid!("evolution time must be finite and nonnegative, got {}", self.t));
        }
        if self.n_steps == 0 {
            return Err(invalid!("at least one Trotter step is required"));
        }
        if self.engine == TransferEngine::Exact && self.noise.is_some_and(|m| !m.is_noise_free()) {
            return Err(invalid!("the exact engine has no gates to perturb"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferResult {
    pub fidelity: f64,
    pub infidelity: f64,
    pub conservation: Conservation,
    pub config: TransferConfig,
}

fn finish(config: &TransferConfig, initial: &StateVector, state: &StateVector) -> Result<TransferResult> {
    let n = config.n;
    let fidelity = state.pair_projection_fidelity((n - 1, n), &singlet())?;
    Ok(TransferResult {
        fidelity,
        infidelity: 1.0 - fidelity,
        conservation: Conservation::between(initial, state),
        config: config.clone(),
    })
}

fn run_with(config: &TransferConfig, propagator: Option<&ExactPropagator>) -> Result<TransferResult> {
    config.validate()?;
    let spec = transfer_chain(config.n)?;
    let initial = StateVector::prepare_singlet_head(config.n)?;
    let state = match config.engine {
        TransferEngine::Exact => match propagator {
            Some(p) => p.evolve(&initial, config.t)?,
            None => ExactPropagator::new(&spec)?.evolve(&initial, config.t)?,
        },
        TransferEngine::TrotterDirect | TransferEngine::TrotterSimulatedFm => {
            let mode = if config.engine == TransferEngine::TrotterDirect {
                TrotterMode::Direct
            } else {
                TrotterMode::SimulatedFerromagnet
            };
            let plan = three_term_plan(&spec, config.t, config.n_steps, mode)?;
            let mut state = initial.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            execute_plan(&plan, &mut state, config.noise.as_ref(), &mut rng)?;
            state
        }
    };
    finish(config, &initial, &state)
}

pub fn run_transfer(config: &TransferConfig) -> Result<TransferResult> {
    run_with(config, None)
}

/// One transfer per grid point; the exact engine diagonalizes once for the
/// whole grid. Point `k` is seeded with `trial_seed(config.seed, k)`.
pub fn transfer_fidelity_curve(config: &TransferConfig, t_grid: &[f64]) -> Result<Vec<TransferResult>> {
    config.validate()?;
    let propagator = match config.engine {
        TransferEngine::Exact => Some(ExactPropagator::new(&transfer_chain(config.n)?)?),
        _ => None,
    };
    t_grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let point = TransferConfig {
                t,
                seed: trial_seed(config.seed, k as u64),
                ..config.clone()
            };
            run_with(&point, propagator.as_ref())
        })
        .collect()
}

/// Smallest power-of-two step count whose noise-free trotterized transfer
/// infidelity at `t` is below `target`.
pub fn calibrate_steps(n: usize, t: f64, target: f64) -> Result<usize> {
    const MAX_STEPS: usize = 1 << 16;
    let mut steps = 1;
    while steps <= MAX_STEPS {
        let config = TransferConfig::noise_free(n, t, steps, TransferEngine::TrotterSimulatedFm);
        match run_transfer(&config) {
            Ok(r) if r.infidelity < target => return Ok(steps),
            Ok(_) | Err(Error::OutOfRange(_)) => steps *= 2,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ResourceLimit(format!(
        "no step count up to {MAX_STEPS} reaches infidelity {target} for n = {n}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{exact_evolve, transfer_chain};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_site_singlet_is_stationary() {
        for t in [0.0, 0.4, 1.3, 5.0] {
            let r = run_transfer(&TransferConfig::noise_free(2, t, 1, TransferEngine::Exact)).unwrap();
            assert_abs_diff_eq!(r.fidelity, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nothing_arrives_at_time_zero() {
        for engine in [TransferEngine::Exact, TransferEngine::TrotterDirect, TransferEngine::TrotterSimulatedFm] {
            for n in 4..=7 {
                let r = run_transfer(&TransferConfig::noise_free(n, 0.0, 2, engine)).unwrap();
                assert_abs_diff_eq!(r.fidelity, 0.0, epsilon = 1e-12);
            }
        }
        let r = run_transfer(&TransferConfig::noise_free(3, 0.0, 1, TransferEngine::Exact)).unwrap();
        assert_abs_diff_eq!(r.fidelity, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn exact_transfer_is_perfect() {
        for n in 2..=9 {
            let r = run_transfer(&TransferConfig::noise_free(n, TRANSFER_TIME, 1, TransferEngine::Exact)).unwrap();
            assert!(r.fidelity > 1.0 - 1e-9, "n={n}: {}", r.fidelity);
        }
    }

    #[test]
    fn simulated_and_direct_engines_agree() {
        for n in [3, 4, 6] {
            let f = |engine| {
                run_transfer(&TransferConfig::noise_free(n, TRANSFER_TIME, 6, engine))
                    .unwrap()
                    .fidelity
            };
            assert_abs_diff_eq!(
                f(TransferEngine::TrotterDirect),
                f(TransferEngine::TrotterSimulatedFm),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn trotter_fidelity_converges() {
        let n = 6;
        let gap = |steps| {
            let r = run_transfer(&TransferConfig::noise_free(n, TRANSFER_TIME, steps, TransferEngine::TrotterDirect))
                .unwrap();
            (r.fidelity - 1.0).abs()
        };
        let (a, b, c) = (gap(8), gap(16), gap(32));
        assert!(a > b && b > c);
        assert!(b / c > 3.0, "ratio {}", b / c);
    }

    #[test]
    fn curve_matches_pointwise_runs() {
        let cfg = TransferConfig::noise_free(5, 0.0, 1, TransferEngine::Exact);
        let curve = transfer_fidelity_curve(&cfg, &[0.0]).unwrap();
        assert_abs_diff_eq!(curve[0].fidelity, 0.0, epsilon = 1e-12);

        let cfg = TransferConfig::noise_free(6, 0.0, 1, TransferEngine::Exact);
        let grid: Vec<f64> = (0..=10).map(|k| TRANSFER_TIME * k as f64 / 10.0).collect();
        let curve = transfer_fidelity_curve(&cfg, &grid).unwrap();
        let spec = transfer_chain(6).unwrap();
        let psi = StateVector::prepare_singlet_head(6).unwrap();
        for (r, &t) in curve.iter().zip(&grid) {
            let direct = exact_evolve(&spec, &psi, t)
                .unwrap()
                .pair_projection_fidelity((5, 6), &singlet())
                .unwrap();
            assert_abs_diff_eq!(r.fidelity, direct, epsilon = 1e-12);
        }
        assert!(curve.last().unwrap().fidelity > 0.999);
    }

    #[test]
    fn exact_engine_rejects_noise() {
        let cfg = TransferConfig {
            noise: Some(NoiseModel::new(0.1).unwrap()),
            ..TransferConfig::noise_free(4, 1.0, 1, TransferEngine::Exact)
        };
        assert!(run_transfer(&cfg).is_err());
    }

    #[test]
    fn calibration() {
        let steps = calibrate_steps(6, TRANSFER_TIME, 1e-4).unwrap();
        let r = run_transfer(&TransferConfig::noise_free(6, TRANSFER_TIME, steps, TransferEngine::TrotterDirect)).unwrap();
        assert!(r.infidelity < 1e-4);
        if steps > 1 {
            let r = run_transfer(&TransferConfig::noise_free(6, TRANSFER_TIME, steps / 2, TransferEngine::TrotterDirect))
                .unwrap();
            assert!(r.infidelity >= 1e-4);
        }
    }
}
