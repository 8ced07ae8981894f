//! Second-order product formulas over the odd/even bond layers.
//!
//! A plan is a flat list of commuting layers. Exchange layers hold
//! `exp(-iθ S_a·S_b)` gates on disjoint bonds; field layers hold single-site
//! `exp(-iφσ^z)` phases. In [`TrotterMode::SimulatedFerromagnet`] every
//! exchange gate is an antiferromagnetic pulse whose singlet phase wraps
//! through `2π`, standing in for the ferromagnetic step of the same length.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{partition_odd_even, ChainSpec};
use crate::error::{invalid, Result};
use crate::gates::{afm_duration_for_fm, exchange_unitary, field_phase};
use crate::noise::NoiseModel;
use crate::statevec::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrotterMode {
    /// Gates are the exact bond exponentials of the chain's own Hamiltonian.
    Direct,
    /// The chain's couplings are read as ferromagnetic strengths
    /// `J̃ = prefactor · J` and every step is realized as an antiferromagnetic
    /// pulse of strength `J̃` and mapped duration.
    SimulatedFerromagnet,
}

/// Which part of the Hamiltonian a layer evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerRole {
    OddHalf,
    Even,
    EvenHalf,
    Field,
}

/// One exchange gate `exp(-iθ S_a·S_b)`, physically a pulse of `strength`
/// lasting `duration` with `θ = strength · duration`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeOp {
    pub sites: (usize, usize),
    pub theta: f64,
    pub strength: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOp {
    pub site: usize,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Layer {
    Exchange { role: LayerRole, gates: Vec<ExchangeOp> },
    Field { phases: Vec<FieldOp> },
}

impl Layer {
    pub fn role(&self) -> LayerRole {
        match self {
            Layer::Exchange { role, .. } => *role,
            Layer::Field { .. } => LayerRole::Field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrotterPlan {
    pub num_sites: usize,
    pub steps: usize,
    pub total_time: f64,
    pub mode: TrotterMode,
    pub layers: Vec<Layer>,
}

impl TrotterPlan {
    pub fn exchange_gates(&self) -> impl Iterator<Item = &ExchangeOp> {
        self.layers.iter().flat_map(|layer| match layer {
            Layer::Exchange { gates, .. } => gates.as_slice(),
            Layer::Field { .. } => &[],
        })
    }
}

struct Builder<'a> {
    spec: &'a ChainSpec,
    mode: TrotterMode,
}

impl Builder<'_> {
    fn gate(&self, (a, b): (usize, usize), duration: f64) -> Result<ExchangeOp> {
        match self.mode {
            TrotterMode::Direct => {
                let strength = self.spec.bond_coefficient(a);
                Ok(ExchangeOp {
                    sites: (a, b),
                    theta: strength * duration,
                    strength,
                    duration,
                })
            }
            TrotterMode::SimulatedFerromagnet => {
                let j_fm = self.spec.prefactor() * self.spec.couplings()[a - 1];
                let pulse = afm_duration_for_fm(duration, j_fm, j_fm)?;
                Ok(ExchangeOp {
                    sites: (a, b),
                    theta: j_fm * pulse,
                    strength: j_fm,
                    duration: pulse,
                })
            }
        }
    }

    fn exchange_layer(&self, role: LayerRole, bonds: &[(usize, usize)], duration: f64) -> Result<Layer> {
        let gates = bonds
            .iter()
            .map(|&bond| self.gate(bond, duration))
            .collect::<Result<_>>()?;
        Ok(Layer::Exchange { role, gates })
    }

    fn field_layer(&self, duration: f64) -> Layer {
        let phases = self
            .spec
            .fields()
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != 0.0)
            .map(|(k, &b)| FieldOp {
                site: k + 1,
                phi: field_phase(b, duration),
            })
            .collect();
        Layer::Field { phases }
    }
}

fn check_args(t: f64, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(invalid!("at least one Trotter step is required"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid!("evolution time must be finite and nonnegative, got {t}"));
    }
    Ok(())
}

/// `(e^{-iH_o τ/2} e^{-iH_e τ} e^{-iH_o τ/2})^N` with `τ = t/N` for a chain
/// without fields.
pub fn second_order_plan(spec: &ChainSpec, t: f64, n_steps: usize, mode: TrotterMode) -> Result<TrotterPlan> {
    check_args(t, n_steps)?;
    if spec.has_fields() {
        return Err(invalid!("chain has fields; use the three-term plan"));
    }
    let partition = partition_odd_even(spec);
    let builder = Builder { spec, mode };
    let tau = t / n_steps as f64;
    let odd = builder.exchange_layer(LayerRole::OddHalf, &partition.odd, tau / 2.0)?;
    let even = builder.exchange_layer(LayerRole::Even, &partition.even, tau)?;
    let step = [odd.clone(), even, odd];
    Ok(TrotterPlan {
        num_sites: spec.num_sites(),
        steps: n_steps,
        total_time: t,
        mode,
        layers: step.iter().cycle().take(3 * n_steps).cloned().collect(),
    })
}

/// Symmetric three-term step `(H_o/2, H_e/2, H_B, H_e/2, H_o/2)` repeated
/// `N` times. Field phases are applied directly in both modes.
pub fn three_term_plan(spec: &ChainSpec, t: f64, n_steps: usize, mode: TrotterMode) -> Result<TrotterPlan> {
    check_args(t, n_steps)?;
    let partition = partition_odd_even(spec);
    let builder = Builder { spec, mode };
    let tau = t / n_steps as f64;
    let odd = builder.exchange_layer(LayerRole::OddHalf, &partition.odd, tau / 2.0)?;
    let even = builder.exchange_layer(LayerRole::EvenHalf, &partition.even, tau / 2.0)?;
    let field = builder.field_layer(tau);
    let step = [odd.clone(), even.clone(), field, even, odd];
    Ok(TrotterPlan {
        num_sites: spec.num_sites(),
        steps: n_steps,
        total_time: t,
        mode,
        layers: step.iter().cycle().take(5 * n_steps).cloned().collect(),
    })
}

/// Runs `plan` on `state` in place. With `noise`, every exchange angle (and
/// every field phase if the model asks for it) is scaled by `1 + η` with a
/// fresh `η` per gate, drawn in plan order.
pub fn execute_plan<R: Rng + ?Sized>(
    plan: &TrotterPlan,
    state: &mut StateVector,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<()> {
    if plan.num_sites != state.num_sites() {
        return Err(invalid!(
            "plan is for {} sites but the state has {}",
            plan.num_sites,
            state.num_sites()
        ));
    }
    let mut scale = |perturb: bool| match noise {
        Some(model) if perturb => 1.0 + model.sample_eta(rng),
        _ => 1.0,
    };
    for layer in &plan.layers {
        match layer {
            Layer::Exchange { gates, .. } => {
                for op in gates {
                    let gate = exchange_unitary(op.theta * scale(true))?;
                    state.apply_two_site(op.sites.0, op.sites.1, &gate)?;
                }
            }
            Layer::Field { phases } => {
                let perturb = noise.is_some_and(|m| m.perturb_fields);
                for op in phases {
                    state.apply_single_site_phase(op.site, op.phi * scale(perturb))?;
                }
            }
        }
    }
    Ok(())
}

/// `min_φ ‖a - e^{iφ} b‖ = √(2 - 2|<a|b>|)` for normalized states.
pub fn phase_insensitive_distance(a: &StateVector, b: &StateVector) -> Result<f64> {
    let overlap = a.inner(b)?.norm();
    Ok((2.0 - 2.0 * overlap).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{exact_evolve, transfer_chain, uniform_echo_chain, Interaction};
    use crate::error::Error;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        StateVector::from_amplitudes(n, raw.into_iter().map(|a| a / norm).collect()).unwrap()
    }

    fn run(plan: &TrotterPlan, psi: &StateVector) -> StateVector {
        let mut out = psi.clone();
        execute_plan(plan, &mut out, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        out
    }

    fn gates(layer: &Layer) -> &[ExchangeOp] {
        match layer {
            Layer::Exchange { gates, .. } => gates,
            Layer::Field { .. } => panic!("expected an exchange layer"),
        }
    }

    #[test]
    fn three_site_echo_plan() {
        let spec = uniform_echo_chain(3, 1.0).unwrap();
        let plan = second_order_plan(&spec, 1.0, 1, TrotterMode::Direct).unwrap();
        assert_eq!(plan.layers.len(), 3);
        assert!(gates(&plan.layers[0]).is_empty());
        assert!(gates(&plan.layers[2]).is_empty());
        let even = gates(&plan.layers[1]);
        assert_eq!(even.len(), 1);
        assert_eq!(even[0].sites, (2, 3));
        assert_eq!(even[0].theta, 1.0);
    }

    #[test]
    fn simulated_ferromagnet_durations() {
        let spec = uniform_echo_chain(4, 1.0).unwrap();
        let plan = second_order_plan(&spec, PI, 2, TrotterMode::SimulatedFerromagnet).unwrap();
        assert_eq!(plan.layers.len(), 6);
        for layer in &plan.layers {
            let expected = match layer.role() {
                LayerRole::Even => TAU - PI / 2.0,
                LayerRole::OddHalf => TAU - PI / 4.0,
                _ => unreachable!(),
            };
            for g in gates(layer) {
                assert_abs_diff_eq!(g.duration, expected, epsilon = 1e-14);
                assert_abs_diff_eq!(g.theta, expected, epsilon = 1e-14);
                assert!(g.theta >= 0.0);
            }
        }
    }

    #[test]
    fn wrap_period_violation() {
        let spec = uniform_echo_chain(4, 1.0).unwrap();
        let err = second_order_plan(&spec, 7.0, 1, TrotterMode::SimulatedFerromagnet).unwrap_err();
        assert!(matches!(err, Error::OutOfRange(_)));
        assert!(second_order_plan(&spec, 7.0, 2, TrotterMode::SimulatedFerromagnet).is_ok());
    }

    #[test]
    fn argument_errors() {
        let spec = uniform_echo_chain(4, 1.0).unwrap();
        assert!(second_order_plan(&spec, 1.0, 0, TrotterMode::Direct).is_err());
        assert!(second_order_plan(&spec, -1.0, 1, TrotterMode::Direct).is_err());
        assert!(second_order_plan(&transfer_chain(4).unwrap(), 1.0, 1, TrotterMode::Direct).is_err());
        let plan = second_order_plan(&spec, 1.0, 1, TrotterMode::Direct).unwrap();
        let mut wrong = StateVector::prepare_singlet_head(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(execute_plan(&plan, &mut wrong, None, &mut rng).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = uniform_echo_chain(5, 1.0).unwrap();
        let plan = second_order_plan(&spec, 0.0, 3, TrotterMode::Direct).unwrap();
        assert!(plan.exchange_gates().all(|g| g.theta == 0.0));
        let psi = random_state(5, 1);
        assert_eq!(run(&plan, &psi), psi);

        let plan = three_term_plan(&transfer_chain(4).unwrap(), 0.0, 2, TrotterMode::Direct).unwrap();
        let psi = random_state(4, 2);
        assert_eq!(run(&plan, &psi), psi);
    }

    #[test]
    fn three_term_structure() {
        let plan = three_term_plan(&transfer_chain(2).unwrap(), 0.8, 1, TrotterMode::Direct).unwrap();
        let roles: Vec<LayerRole> = plan.layers.iter().map(Layer::role).collect();
        assert_eq!(
            roles,
            [LayerRole::OddHalf, LayerRole::EvenHalf, LayerRole::Field, LayerRole::EvenHalf, LayerRole::OddHalf]
        );
        assert_eq!(gates(&plan.layers[0]).len(), 1);
        assert!(gates(&plan.layers[1]).is_empty());
        match &plan.layers[2] {
            Layer::Field { phases } => assert_eq!(phases.len(), 2),
            _ => panic!(),
        }

        let plan = three_term_plan(&transfer_chain(5).unwrap(), FRAC_PI_2, 10, TrotterMode::Direct).unwrap();
        assert_eq!(plan.layers.len(), 50);
        for layer in &plan.layers {
            if let Layer::Exchange { gates, .. } = layer {
                for g in gates {
                    let i = g.sites.0 as f64;
                    let full = 2.0 * (i * (5.0 - i)).sqrt() * (PI / 20.0);
                    // Ferromagnetic: the direct gate angle is negative.
                    assert_abs_diff_eq!(g.theta, -full / 2.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn plan_serializes_to_json() {
        let plan = three_term_plan(&transfer_chain(3).unwrap(), 0.5, 1, TrotterMode::SimulatedFerromagnet).unwrap();
        let text = serde_json::to_string(&plan).unwrap();
        assert!(text.contains("\"kind\":\"exchange\""));
        assert!(text.contains("\"mode\":\"simulated-ferromagnet\""));
        let back: TrotterPlan = serde_json::from_str(&text).unwrap();
        assert_eq!(back, plan);
    }

    #[test]
    fn direct_plan_tracks_exact_evolution() {
        let spec = uniform_echo_chain(6, 1.0).unwrap();
        let psi = StateVector::prepare_singlet_head(6).unwrap();
        let plan = second_order_plan(&spec, 1.0, 64, TrotterMode::Direct).unwrap();
        let exact = exact_evolve(&spec, &psi, 1.0).unwrap();
        let overlap = run(&plan, &psi).inner(&exact).unwrap().norm();
        assert!(overlap >= 1.0 - 1e-4, "overlap {overlap}");
    }

    #[test]
    fn simulated_ferromagnet_converges_quadratically() {
        let spec = ChainSpec::new(4, vec![1.0; 3], vec![0.0; 4], Interaction::Antiferromagnetic, 1.0).unwrap();
        let fm = spec.with_interaction(Interaction::Ferromagnetic);
        let psi = random_state(4, 11);
        let exact = exact_evolve(&fm, &psi, 1.0).unwrap();
        let err = |n| {
            let plan = second_order_plan(&spec, 1.0, n, TrotterMode::SimulatedFerromagnet).unwrap();
            phase_insensitive_distance(&run(&plan, &psi), &exact).unwrap()
        };
        let ratio = err(32) / err(64);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn second_order_scaling() {
        let spec = uniform_echo_chain(6, 1.0).unwrap();
        let psi = random_state(6, 5);
        let exact = exact_evolve(&spec, &psi, 2.0).unwrap();
        let err = |n| {
            let plan = second_order_plan(&spec, 2.0, n, TrotterMode::Direct).unwrap();
            run(&plan, &psi).distance(&exact).unwrap()
        };
        let errs: Vec<f64> = [8, 16, 32, 64].iter().map(|&n| err(n)).collect();
        assert!(errs[0] < 0.1);
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn gates_within_a_layer_commute() {
        let spec = transfer_chain(7).unwrap();
        let plan = three_term_plan(&spec, 0.9, 2, TrotterMode::Direct).unwrap();
        let mut reversed = plan.clone();
        for layer in &mut reversed.layers {
            match layer {
                Layer::Exchange { gates, .. } => gates.reverse(),
                Layer::Field { phases } => phases.reverse(),
            }
        }
        let psi = random_state(7, 3);
        assert!(run(&plan, &psi).distance(&run(&reversed, &psi)).unwrap() < 1e-12);
    }

    #[test]
    fn noisy_execution_conserves_norm_and_sz() {
        let spec = transfer_chain(6).unwrap();
        let plan = three_term_plan(&spec, FRAC_PI_2, 8, TrotterMode::SimulatedFerromagnet).unwrap();
        let noise = NoiseModel::new(0.05).unwrap().with_field_noise(true);
        let psi = StateVector::prepare_singlet_head(6).unwrap();
        let mut out = psi.clone();
        execute_plan(&plan, &mut out, Some(&noise), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        assert!((out.total_sz() - psi.total_sz()).abs() < 1e-10);
        assert!(out.distance(&run(&plan, &psi)).unwrap() > 1e-3);
    }
}
