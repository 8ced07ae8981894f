//! Loschmidt echo: forward under the simulated ferromagnet, back under the
//! native antiferromagnet, then project sites 1 and 2 on the singlet.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{exact_evolve, uniform_echo_chain};
use crate::error::{invalid, Result};
use crate::noise::{trial_seed, NoiseModel};
use crate::statevec::{singlet, StateVector};
use crate::trotter::{execute_plan, second_order_plan, TrotterMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackwardMode {
    /// Same second-order product formula as the forward leg, so the two
    /// legs' Trotter errors cancel.
    Trotterized,
    /// Exact `exp(-iH_a t)`; the echo then exposes the forward Trotter error.
    ExactContinuous,
}

impl std::fmt::Display for BackwardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackwardMode::Trotterized => "trotterized",
            BackwardMode::ExactContinuous => "exact-continuous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoConfig {
    pub n: usize,
    pub j: f64,
    /// Duration of each leg.
    pub t: f64,
    pub n_steps: usize,
    pub backward: BackwardMode,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
}

impl EchoConfig {
    pub fn noise_free(n: usize, j: f64, t: f64, n_steps: usize) -> Self {
        Self {
            n,
            j,
            t,
            n_steps,
            backward: BackwardMode::Trotterized,
            noise: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(invalid!("the echo needs at least 3 sites, got {}", self.n));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(invalid!("leg duration must be finite and nonnegative, got {}", self.t));
        }
        if self.n_steps == 0 {
            return Err(invalid!("at least one Trotter step is required"));
        }
        Ok(())
    }
}

/// Norm and total-`S^z` drift over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Conservation {
    pub norm_error: f64,
    pub sz_drift: f64,
}

impl Conservation {
    pub fn between(initial: &StateVector, fin: &StateVector) -> Self {
        Self {
            norm_error: (fin.norm() - 1.0).abs(),
            sz_drift: (fin.total_sz() - initial.total_sz()).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EchoResult {
    pub fidelity: f64,
    pub infidelity: f64,
    /// Total simulated time `2t`.
    pub elapsed: f64,
    pub conservation: Conservation,
    pub config: EchoConfig,
}

pub fn run_echo(config: &EchoConfig) -> Result<EchoResult> {
    config.validate()?;
    let spec = uniform_echo_chain(config.n, config.j)?;
    let initial = StateVector::prepare_singlet_head(config.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = config.noise.as_ref();

    let mut state = initial.clone();
    let forward = second_order_plan(&spec, config.t, config.n_steps, TrotterMode::SimulatedFerromagnet)?;
    execute_plan(&forward, &mut state, noise, &mut rng)?;
    match config.backward {
        BackwardMode::Trotterized => {
            let backward = second_order_plan(&spec, config.t, config.n_steps, TrotterMode::Direct)?;
            execute_plan(&backward, &mut state, noise, &mut rng)?;
        }
        BackwardMode::ExactContinuous => {
            state = exact_evolve(&spec, &state, config.t)?;
        }
    }

    let fidelity = state.pair_projection_fidelity((1, 2), &singlet())?;
    Ok(EchoResult {
        fidelity,
        infidelity: 1.0 - fidelity,
        elapsed: 2.0 * config.t,
        conservation: Conservation::between(&initial, &state),
        config: config.clone(),
    })
}

/// One echo per grid point. Point `k` is seeded with
/// `trial_seed(config.seed, k)`.
pub fn echo_fidelity_curve(config: &EchoConfig, t_grid: &[f64]) -> Result<Vec<EchoResult>> {
    t_grid
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            run_echo(&EchoConfig {
                t,
                seed: trial_seed(config.seed, k as u64),
                ..config.clone()
            })
        })
        .collect()
}
