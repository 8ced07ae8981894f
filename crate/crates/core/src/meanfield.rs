//! Classical mean-field baseline for the echo.
//!
//! The state is a product of an exactly treated pair (sites 1, 2) and single
//! spins on sites 3..n. Each factor evolves under the local field
//! `h_i = sign · Σ_neighbours J <S_neighbour>`, integrated with classical RK4.
//! The bond between sites 1 and 2 is always off, so site 1 never moves.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{uniform_echo_chain, ChainSpec};
use crate::error::{invalid, Result};
use crate::statevec::{singlet, PairState};
use crate::trotter::{second_order_plan, Layer, TrotterMode, TrotterPlan};

pub type SpinState = [Complex64; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub pair: PairState,
    /// Sites 3..=n, basis `|up>, |down>`.
    pub spins: Vec<SpinState>,
    pub time: f64,
}

/// `<S>` of a single spin.
pub fn spin_expectation(s: &SpinState) -> Vector3<f64> {
    let c = s[0].conj() * s[1];
    Vector3::new(c.re, c.im, (s[0].norm_sqr() - s[1].norm_sqr()) / 2.0)
}

impl MeanFieldState {
    /// Singlet on the pair, every other spin up.
    pub fn echo_initial(n: usize) -> Result<Self> {
        Self::new(singlet(), vec![[ONE, ZERO]; n.saturating_sub(2)])
    }

    pub fn new(pair: PairState, spins: Vec<SpinState>) -> Result<Self> {
        if spins.is_empty() {
            return Err(invalid!("the mean-field chain needs at least 3 sites"));
        }
        let state = Self { pair, spins, time: 0.0 };
        let pair_norm = state.pair.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (pair_norm - 1.0).abs() > 1e-8 || state.spins.iter().any(|s| (spin_norm(s) - 1.0).abs() > 1e-8) {
            return Err(invalid!("mean-field factors must be normalized"));
        }
        let mut y = state.to_flat();
        normalize_flat(&mut y);
        Ok(Self::from_flat(&y, 0.0))
    }

    pub fn num_sites(&self) -> usize {
        self.spins.len() + 2
    }

    /// `<S_site>` for `site >= 2`; site 2 uses the reduced state of the pair.
    pub fn expectation(&self, site: usize) -> Vector3<f64> {
        match site {
            2 => {
                let p = &self.pair;
                let c = p[0].conj() * p[1] + p[2].conj() * p[3];
                let up = p[0].norm_sqr() + p[2].norm_sqr();
                let down = p[1].norm_sqr() + p[3].norm_sqr();
                Vector3::new(c.re, c.im, (up - down) / 2.0)
            }
            s => spin_expectation(&self.spins[s - 3]),
        }
    }

    /// `|<ψ_12|s>|²`.
    pub fn singlet_fidelity(&self) -> f64 {
        let s = singlet();
        let overlap: Complex64 = s.iter().zip(&self.pair).map(|(a, b)| a.conj() * b).sum();
        overlap.norm_sqr().min(1.0)
    }

    fn to_flat(&self) -> Vec<Complex64> {
        let mut y = self.pair.to_vec();
        y.extend(self.spins.iter().flatten());
        y
    }

    fn from_flat(y: &[Complex64], time: f64) -> Self {
        Self {
            pair: [y[0], y[1], y[2], y[3]],
            spins: y[4..].chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            time,
        }
    }
}

fn spin_norm(s: &SpinState) -> f64 {
    (s[0].norm_sqr() + s[1].norm_sqr()).sqrt()
}

/// `<S_site>` read from the flattened state (pair amplitudes, then one
/// amplitude pair per spin from site 3 on).
#[inline]
fn flat_expectation(y: &[Complex64], site: usize) -> Vector3<f64> {
    if site == 2 {
        let c = y[0].conj() * y[1] + y[2].conj() * y[3];
        let up = y[0].norm_sqr() + y[2].norm_sqr();
        let down = y[1].norm_sqr() + y[3].norm_sqr();
        Vector3::new(c.re, c.im, (up - down) / 2.0)
    } else {
        let k = 4 + 2 * (site - 3);
        spin_expectation(&[y[k], y[k + 1]])
    }
}

/// `h_site` for `site >= 2` given the couplings `J_{i,i+1}` active now.
#[inline]
fn field_at(y: &[Complex64], couplings: &[f64], sign: f64, site: usize) -> Vector3<f64> {
    let n = couplings.len() + 1;
    let mut field = Vector3::zeros();
    if site > 2 && couplings[site - 2] != 0.0 {
        field += couplings[site - 2] * flat_expectation(y, site - 1);
    }
    if site < n && couplings[site - 1] != 0.0 {
        field += couplings[site - 1] * flat_expectation(y, site + 1);
    }
    sign * field
}

/// `h_i` for sites `1..=n` (index `i - 1`). `h_1` is always zero.
fn fields_from(state: &MeanFieldState, couplings: &[f64], sign: f64) -> Vec<Vector3<f64>> {
    let y = state.to_flat();
    std::iter::once(Vector3::zeros())
        .chain((2..=state.num_sites()).map(|site| field_at(&y, couplings, sign, site)))
        .collect()
}

/// Mean fields for `spec`'s couplings (scaled by its prefactor).
pub fn mean_fields(state: &MeanFieldState, spec: &ChainSpec, sign: f64) -> Result<Vec<Vector3<f64>>> {
    check_spec(state, spec)?;
    let couplings: Vec<f64> = spec.couplings().iter().map(|j| j * spec.prefactor()).collect();
    Ok(fields_from(state, &couplings, sign))
}

fn check_spec(state: &MeanFieldState, spec: &ChainSpec) -> Result<()> {
    if spec.num_sites() != state.num_sites() {
        return Err(invalid!(
            "chain has {} sites, mean-field state has {}",
            spec.num_sites(),
            state.num_sites()
        ));
    }
    if spec.couplings()[0] != 0.0 {
        return Err(invalid!("the pair bond (1, 2) must be off in the mean-field model"));
    }
    Ok(())
}

/// `(h·S) ψ` for a spin-1/2 amplitude pair.
#[inline]
fn apply_field(h: &Vector3<f64>, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let plus = Complex64::new(h.x, -h.y);
    let minus = Complex64::new(h.x, h.y);
    ((h.z * a + plus * b) * 0.5, (minus * a - h.z * b) * 0.5)
}

/// `dψ/dt = -i H(ψ) ψ` for the flattened product state.
fn derivative(y: &[Complex64], couplings: &[f64], sign: f64, dy: &mut [Complex64]) {
    // Pair: the field acts on site 2, the low bit of the pair index.
    let h = field_at(y, couplings, sign, 2);
    for q1 in 0..2 {
        let (a, b) = apply_field(&h, y[2 * q1], y[2 * q1 + 1]);
        dy[2 * q1] = -I * a;
        dy[2 * q1 + 1] = -I * b;
    }
    for k in 0..(y.len() - 4) / 2 {
        let h = field_at(y, couplings, sign, k + 3);
        let (a, b) = apply_field(&h, y[4 + 2 * k], y[5 + 2 * k]);
        dy[4 + 2 * k] = -I * a;
        dy[5 + 2 * k] = -I * b;
    }
}

/// Classical fourth-order Runge-Kutta with reusable stage buffers.
pub(crate) struct Rk4 {
    k: [Vec<Complex64>; 4],
    tmp: Vec<Complex64>,
}

impl Rk4 {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![ZERO; len]),
            tmp: vec![ZERO; len],
        }
    }

    /// Advances `y` by `dt` under `dy/dt = f(y)`; `f` writes into its second
    /// argument.
    pub(crate) fn step<F>(&mut self, y: &mut [Complex64], dt: f64, f: F)
    where
        F: Fn(&[Complex64], &mut [Complex64]),
    {
        let [k1, k2, k3, k4] = &mut self.k;
        let tmp = &mut self.tmp;
        f(y, k1);
        tmp.iter_mut().zip(y.iter().zip(k1.iter())).for_each(|(t, (a, b))| *t = a + b * (dt / 2.0));
        f(tmp, k2);
        tmp.iter_mut().zip(y.iter().zip(k2.iter())).for_each(|(t, (a, b))| *t = a + b * (dt / 2.0));
        f(tmp, k3);
        tmp.iter_mut().zip(y.iter().zip(k3.iter())).for_each(|(t, (a, b))| *t = a + b * dt);
        f(tmp, k4);
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
    }
}

/// Renormalizes the pair and every spin of a flattened state.
fn normalize_flat(y: &mut [Complex64]) {
    let (pair, spins) = y.split_at_mut(4);
    let pn = pair.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    pair.iter_mut().for_each(|z| *z /= pn);
    for s in spins.chunks_exact_mut(2) {
        let norm = (s[0].norm_sqr() + s[1].norm_sqr()).sqrt();
        s.iter_mut().for_each(|z| *z /= norm);
    }
}

fn step_with(state: &MeanFieldState, couplings: &[f64], sign: f64, dt: f64) -> MeanFieldState {
    let mut y = state.to_flat();
    Rk4::new(y.len()).step(&mut y, dt, |y, dy| derivative(y, couplings, sign, dy));
    normalize_flat(&mut y);
    MeanFieldState::from_flat(&y, state.time + dt)
}

/// Advances `state` by `dt` with fields recomputed at every RK4 stage, then
/// renormalizes each factor.
pub fn rk4_step(state: &MeanFieldState, spec: &ChainSpec, sign: f64, dt: f64) -> Result<MeanFieldState> {
    check_spec(state, spec)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid!("step size must be positive, got {dt}"));
    }
    let couplings: Vec<f64> = spec.couplings().iter().map(|j| j * spec.prefactor()).collect();
    Ok(step_with(state, &couplings, sign, dt))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Upper bound on the RK4 step; each segment is split into equal steps.
    pub dt: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 1e-3 }
    }
}

/// Sign placed in front of the mean fields during the ferromagnetic leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConvention {
    /// `-J` for the ferromagnetic leg, matching its Hamiltonian.
    Hamiltonian,
    /// `+J` in both legs, as the mean-field equations are commonly written.
    Literal,
}

impl SignConvention {
    fn forward_sign(self) -> f64 {
        match self {
            SignConvention::Hamiltonian => -1.0,
            SignConvention::Literal => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "kebab-case")]
pub enum Schedule {
    /// All bonds on for `t` under the ferromagnetic mean field, then for `t`
    /// under the antiferromagnetic one.
    Continuous,
    /// The exact pulse train of the quantum protocol with `steps` Trotter
    /// steps: wrapped antiferromagnetic pulses forward, short ones back. All
    /// pulses are physically antiferromagnetic, so the sign convention does
    /// not apply.
    MirroredPulse { steps: usize },
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::Continuous => f.write_str("continuous"),
            Schedule::MirroredPulse { .. } => f.write_str("mirrored-pulse"),
        }
    }
}

impl std::fmt::Display for SignConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignConvention::Hamiltonian => "hamiltonian",
            SignConvention::Literal => "literal",
        })
    }
}

/// A stretch of time with fixed couplings.
#[derive(Debug, Clone, PartialEq)]
struct Segment {
    couplings: Vec<f64>,
    sign: f64,
    duration: f64,
}

fn pulse_segments(plan: &TrotterPlan, n: usize) -> Vec<Segment> {
    let mut out = Vec::new();
    for layer in &plan.layers {
        let Layer::Exchange { gates, .. } = layer else { continue };
        let mut ends: Vec<f64> = gates.iter().map(|g| g.duration).filter(|&d| d > 0.0).collect();
        ends.sort_by(f64::total_cmp);
        ends.dedup();
        let mut start = 0.0;
        for end in ends {
            let mut couplings = vec![0.0; n - 1];
            for g in gates.iter().filter(|g| g.duration >= end) {
                couplings[g.sites.0 - 1] = g.strength.abs();
            }
            out.push(Segment {
                couplings,
                sign: 1.0,
                duration: end - start,
            });
            start = end;
        }
    }
    out
}

fn integrate(state: &mut MeanFieldState, seg: &Segment, dt: f64) -> Trace {
    let mut trace = Trace::default();
    if seg.duration <= 0.0 {
        return trace;
    }
    let steps = (seg.duration / dt).ceil().max(1.0) as usize;
    let h = seg.duration / steps as f64;
    let mut y = state.to_flat();
    let mut rk = Rk4::new(y.len());
    for _ in 0..steps {
        rk.step(&mut y, h, |y, dy| derivative(y, &seg.couplings, seg.sign, dy));
        normalize_flat(&mut y);
        trace.observe_flat(&y);
    }
    *state = MeanFieldState::from_flat(&y, state.time + seg.duration);
    trace
}

/// Largest deviations of the conserved quantities seen during a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Trace {
    /// `max | |<S_i>| - 1/2 |` over sites `i >= 3`.
    pub spin_length_error: f64,
    /// `max |<S_2>|`.
    pub pair_site_polarization: f64,
}

impl Trace {
    fn observe_flat(&mut self, y: &[Complex64]) {
        for site in 3..=y.len() / 2 {
            let err = (flat_expectation(y, site).norm() - 0.5).abs();
            self.spin_length_error = self.spin_length_error.max(err);
        }
        self.pair_site_polarization = self.pair_site_polarization.max(flat_expectation(y, 2).norm());
    }

    fn merge(&mut self, other: Trace) {
        self.spin_length_error = self.spin_length_error.max(other.spin_length_error);
        self.pair_site_polarization = self.pair_site_polarization.max(other.pair_site_polarization);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldEchoResult {
    pub n: usize,
    pub j: f64,
    pub t: f64,
    pub schedule: Schedule,
    pub convention: SignConvention,
    pub dt: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub trace: Trace,
}

/// Mean-field Loschmidt echo of duration `t` per leg on the uniform echo
/// chain of strength `j`.
pub fn run_meanfield_echo(
    n: usize,
    j: f64,
    t: f64,
    integrator: IntegratorConfig,
    schedule: Schedule,
    convention: SignConvention,
) -> Result<MeanFieldEchoResult> {
    if !(integrator.dt > 0.0 && integrator.dt.is_finite()) {
        return Err(invalid!("step size must be positive, got {}", integrator.dt));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid!("leg duration must be finite and nonnegative, got {t}"));
    }
    let spec = uniform_echo_chain(n, j)?;
    let segments = match schedule {
        Schedule::Continuous => {
            let couplings = spec.couplings().to_vec();
            vec![
                Segment {
                    couplings: couplings.clone(),
                    sign: convention.forward_sign(),
                    duration: t,
                },
                Segment {
                    couplings,
                    sign: 1.0,
                    duration: t,
                },
            ]
        }
        Schedule::MirroredPulse { steps } => {
            let forward = second_order_plan(&spec, t, steps, TrotterMode::SimulatedFerromagnet)?;
            let backward = second_order_plan(&spec, t, steps, TrotterMode::Direct)?;
            let mut segments = pulse_segments(&forward, n);
            segments.extend(pulse_segments(&backward, n));
            segments
        }
    };

    let mut state = MeanFieldState::echo_initial(n)?;
    let mut trace = Trace::default();
    trace.observe_flat(&state.to_flat());
    for seg in &segments {
        trace.merge(integrate(&mut state, seg, integrator.dt));
    }
    let fidelity = state.singlet_fidelity();
    Ok(MeanFieldEchoResult {
        n,
        j,
        t,
        schedule,
        convention,
        dt: integrator.dt,
        fidelity,
        infidelity: 1.0 - fidelity,
        trace,
    })
}
