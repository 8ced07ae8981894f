//! Dense state vectors for chains of spin-1/2 sites.
//!
//! Sites are 1-based. Site `i` of an `n`-site chain lives on bit `n - i` of the
//! amplitude index, so site 1 is the most significant bit. A bit value of 0 is
//! spin-up.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{invalid, Error, Result};

/// Tolerance for the unitarity check performed when a [`TwoSiteGate`] is built.
pub const UNITARITY_TOL: f64 = 1e-12;
/// Allowed drift of the state norm before a state is considered corrupted.
pub const NORM_TOL: f64 = 1e-10;

/// Largest supported chain. 2^30 amplitudes is already 16 GiB.
pub const MAX_SITES: usize = 30;

/// Below this many sites the gate kernels always run on one thread.
const PARALLEL_MIN_SITES: usize = 16;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A two-spin state in the basis order `|00>, |01>, |10>, |11>`.
pub type PairState = [Complex64; 4];

/// The singlet `(|01> - |10>)/√2`.
pub fn singlet() -> PairState {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [ZERO, a, -a, ZERO]
}

/// The `m = 0` triplet `(|01> + |10>)/√2`.
pub fn triplet_zero() -> PairState {
    let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [ZERO, a, a, ZERO]
}

/// The `m = +1` triplet `|00>` (both spins up).
pub fn triplet_up() -> PairState {
    [ONE, ZERO, ZERO, ZERO]
}

/// The `m = -1` triplet `|11>`.
pub fn triplet_down() -> PairState {
    [ZERO, ZERO, ZERO, ONE]
}

/// A 4×4 unitary acting on an ordered pair of sites `(a, b)` in the basis
/// `|q_a q_b> ∈ {00, 01, 10, 11}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSiteGate(Matrix4<Complex64>);

impl TwoSiteGate {
    /// Wraps `matrix` after checking `U†U = I` entrywise within [`UNITARITY_TOL`].
    pub fn new(matrix: Matrix4<Complex64>) -> Result<Self> {
        let defect = (matrix.adjoint() * matrix - Matrix4::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !defect.is_finite() || defect > UNITARITY_TOL {
            return Err(Error::InvalidGate(format!(
                "matrix is not unitary (max |U†U - I| = {defect:e})"
            )));
        }
        Ok(Self(matrix))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn swap() -> Self {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = ONE;
        m[(1, 2)] = ONE;
        m[(2, 1)] = ONE;
        m[(3, 3)] = ONE;
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }
}

/// Full `2^n` amplitude vector of an `n`-site chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_sites: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state. `bits[k]` is the state of site `k + 1`.
    pub fn basis_state(n: usize, bits: &[u8]) -> Result<Self> {
        check_sites(n)?;
        if bits.len() != n {
            return Err(invalid!("expected {n} bits, got {}", bits.len()));
        }
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(invalid!("bit values must be 0 or 1, got {b}"));
            }
            index = (index << 1) | b as usize;
        }
        let mut amplitudes = vec![ZERO; 1 << n];
        amplitudes[index] = ONE;
        Ok(Self {
            num_sites: n,
            amplitudes,
        })
    }

    /// Singlet on sites 1 and 2, every other site spin-up.
    pub fn prepare_singlet_head(n: usize) -> Result<Self> {
        check_sites(n)?;
        let mut amplitudes = vec![ZERO; 1 << n];
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        amplitudes[1 << (n - 2)] = a;
        amplitudes[1 << (n - 1)] = -a;
        Ok(Self {
            num_sites: n,
            amplitudes,
        })
    }

    /// Builds a state from raw amplitudes; the vector must already be normalized.
    pub fn from_amplitudes(n: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_sites(n)?;
        if amplitudes.len() != 1 << n {
            return Err(invalid!(
                "expected {} amplitudes for {n} sites, got {}",
                1usize << n,
                amplitudes.len()
            ));
        }
        let state = Self {
            num_sites: n,
            amplitudes,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(invalid!("state is not normalized (norm = {norm})"));
        }
        Ok(state)
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_size(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Euclidean distance `‖self - other‖`, sensitive to global phase.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        self.check_same_size(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    fn check_same_size(&self, other: &StateVector) -> Result<()> {
        if self.num_sites != other.num_sites {
            return Err(invalid!(
                "site count mismatch: {} vs {}",
                self.num_sites,
                other.num_sites
            ));
        }
        Ok(())
    }

    fn mask(&self, site: usize) -> Result<usize> {
        if site == 0 || site > self.num_sites {
            return Err(invalid!(
                "site {site} outside 1..={}",
                self.num_sites
            ));
        }
        Ok(1 << (self.num_sites - site))
    }

    fn pair_masks(&self, a: usize, b: usize) -> Result<(usize, usize)> {
        if a == b {
            return Err(invalid!("gate sites must differ, got ({a}, {b})"));
        }
        Ok((self.mask(a)?, self.mask(b)?))
    }

    /// Applies `gate` to sites `(a, b)`. The first site of the pair is the
    /// high bit of the gate's 2-bit basis index.
    pub fn apply_two_site(&mut self, a: usize, b: usize, gate: &TwoSiteGate) -> Result<()> {
        let (ma, mb) = self.pair_masks(a, b)?;
        let u = &gate.0;
        let chunk = 2 * ma.max(mb);
        if self.num_sites >= PARALLEL_MIN_SITES && self.amplitudes.len() / chunk >= 2 {
            self.amplitudes
                .par_chunks_mut(chunk)
                .for_each(|block| two_site_kernel(block, ma, mb, u));
        } else {
            two_site_kernel(&mut self.amplitudes, ma, mb, u);
        }
        Ok(())
    }

    /// Applies `exp(-iφσ^z)` on `site`: amplitudes with the site up pick up
    /// `e^{-iφ}`, those with it down pick up `e^{+iφ}`.
    pub fn apply_single_site_phase(&mut self, site: usize, phi: f64) -> Result<()> {
        let m = self.mask(site)?;
        let up = Complex64::from_polar(1.0, -phi);
        let down = Complex64::from_polar(1.0, phi);
        let apply = |offset: usize, block: &mut [Complex64]| {
            for (k, amp) in block.iter_mut().enumerate() {
                *amp *= if (offset + k) & m == 0 { up } else { down };
            }
        };
        if self.num_sites >= PARALLEL_MIN_SITES {
            let chunk = 1 << 12;
            self.amplitudes
                .par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, block)| apply(c * chunk, block));
        } else {
            apply(0, &mut self.amplitudes);
        }
        Ok(())
    }

    /// `<ψ| P_target ⊗ 1 |ψ>` where `P_target` projects the ordered pair
    /// `(a, b)` onto `target`.
    pub fn pair_projection_fidelity(&self, pair: (usize, usize), target: &PairState) -> Result<f64> {
        let (ma, mb) = self.pair_masks(pair.0, pair.1)?;
        let target_norm: f64 = target.iter().map(|z| z.norm_sqr()).sum();
        if (target_norm - 1.0).abs() > UNITARITY_TOL {
            return Err(invalid!("target pair state is not normalized"));
        }
        let (lo, hi) = if ma < mb { (ma, mb) } else { (mb, ma) };
        let offsets = [0, mb, ma, ma | mb];
        let mut total = 0.0;
        for k in 0..self.amplitudes.len() / 4 {
            let base = insert_zero_bit(insert_zero_bit(k, lo), hi);
            let overlap: Complex64 = offsets
                .iter()
                .zip(target)
                .map(|(&off, t)| t.conj() * self.amplitudes[base | off])
                .sum();
            total += overlap.norm_sqr();
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// `Σ_i <S^z_i>`.
    pub fn total_sz(&self) -> f64 {
        let n = self.num_sites as i64;
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(index, a)| {
                let down = index.count_ones() as i64;
                a.norm_sqr() * (n - 2 * down) as f64 / 2.0
            })
            .sum()
    }
}

fn check_sites(n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid!("a chain needs at least 2 sites, got {n}"));
    }
    if n > MAX_SITES {
        return Err(Error::ResourceLimit(format!(
            "{n} sites exceeds the supported maximum of {MAX_SITES}"
        )));
    }
    Ok(())
}

/// Inserts a zero at the position of the single-bit `mask`, shifting the
/// higher bits of `k` up by one.
#[inline]
fn insert_zero_bit(k: usize, mask: usize) -> usize {
    let low = k & (mask - 1);
    ((k ^ low) << 1) | low
}

/// `block.len()` must be a multiple of `2 * max(ma, mb)` so every amplitude
/// quadruple lies inside it.
fn two_site_kernel(block: &mut [Complex64], ma: usize, mb: usize, u: &Matrix4<Complex64>) {
    let (lo, hi) = if ma < mb { (ma, mb) } else { (mb, ma) };
    for k in 0..block.len() / 4 {
        let base = insert_zero_bit(insert_zero_bit(k, lo), hi);
        let idx = [base, base | mb, base | ma, base | ma | mb];
        let v = idx.map(|i| block[i]);
        for (r, &i) in idx.iter().enumerate() {
            block[i] = u[(r, 0)] * v[0] + u[(r, 1)] * v[1] + u[(r, 2)] * v[2] + u[(r, 3)] * v[3];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn basis_state_encoding() {
        let s = StateVector::basis_state(2, &[0, 0]).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        let s = StateVector::basis_state(2, &[0, 1]).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ONE, ZERO, ZERO]);
        let s = StateVector::basis_state(3, &[1, 0, 0]).unwrap();
        assert_eq!(s.amplitudes()[4], ONE);
        assert_eq!(s.amplitudes().iter().filter(|a| **a != ZERO).count(), 1);
    }

    #[test]
    fn basis_state_rejects_bad_input() {
        assert!(matches!(StateVector::basis_state(1, &[0]), Err(Error::InvalidArgument(_))));
        assert!(matches!(StateVector::basis_state(3, &[0, 1]), Err(Error::InvalidArgument(_))));
        assert!(matches!(StateVector::basis_state(2, &[0, 2]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn singlet_head_layout() {
        let r = FRAC_1_SQRT_2;
        let s = StateVector::prepare_singlet_head(2).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, c(r, 0.0), c(-r, 0.0), ZERO]);

        let s = StateVector::prepare_singlet_head(3).unwrap();
        assert_eq!(s.amplitudes()[2], c(r, 0.0));
        assert_eq!(s.amplitudes()[4], c(-r, 0.0));

        let s = StateVector::prepare_singlet_head(4).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            match i {
                4 | 8 => assert_abs_diff_eq!(a.norm(), r, epsilon = 1e-15),
                _ => assert_eq!(*a, ZERO),
            }
        }
        assert!(StateVector::prepare_singlet_head(1).is_err());
    }

    #[test]
    fn identity_and_swap() {
        let mut s = StateVector::prepare_singlet_head(4).unwrap();
        let before = s.clone();
        s.apply_two_site(2, 4, &TwoSiteGate::identity()).unwrap();
        assert_eq!(s, before);

        let mut s = StateVector::basis_state(2, &[0, 1]).unwrap();
        s.apply_two_site(1, 2, &TwoSiteGate::swap()).unwrap();
        assert_eq!(s, StateVector::basis_state(2, &[1, 0]).unwrap());
    }

    #[test]
    fn two_site_basis_order_follows_argument_order() {
        // CNOT with the first argument as control.
        let mut m = Matrix4::zeros();
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        let cnot = TwoSiteGate::new(m).unwrap();

        let mut s = StateVector::basis_state(3, &[0, 0, 1]).unwrap();
        s.apply_two_site(3, 1, &cnot).unwrap();
        assert_eq!(s, StateVector::basis_state(3, &[1, 0, 1]).unwrap());

        let mut s = StateVector::basis_state(3, &[0, 0, 1]).unwrap();
        s.apply_two_site(1, 3, &cnot).unwrap();
        assert_eq!(s, StateVector::basis_state(3, &[0, 0, 1]).unwrap());
    }

    #[test]
    fn gate_errors() {
        let mut s = StateVector::prepare_singlet_head(3).unwrap();
        let g = TwoSiteGate::identity();
        assert!(matches!(s.apply_two_site(2, 2, &g), Err(Error::InvalidArgument(_))));
        assert!(matches!(s.apply_two_site(0, 2, &g), Err(Error::InvalidArgument(_))));
        assert!(matches!(s.apply_two_site(1, 4, &g), Err(Error::InvalidArgument(_))));
        let mut m = Matrix4::identity();
        m[(0, 0)] = c(1.0 + 1e-9, 0.0);
        assert!(matches!(TwoSiteGate::new(m), Err(Error::InvalidGate(_))));
        assert!(matches!(s.apply_single_site_phase(4, 0.1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn single_site_phase() {
        let mut s = StateVector::prepare_singlet_head(3).unwrap();
        let before = s.clone();
        s.apply_single_site_phase(2, 0.0).unwrap();
        assert_eq!(s, before);

        let mut s = StateVector::basis_state(2, &[0, 0]).unwrap();
        s.apply_single_site_phase(1, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[0].im, 0.0, epsilon = 1e-15);

        // (|0> + |1>)/√2 on site 2, site 1 up.
        let r = FRAC_1_SQRT_2;
        let amps = vec![c(r, 0.0), c(r, 0.0), ZERO, ZERO];
        let mut s = StateVector::from_amplitudes(2, amps).unwrap();
        s.apply_single_site_phase(2, std::f64::consts::FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].im, -r, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].im, r, epsilon = 1e-15);
    }

    #[test]
    fn projections() {
        let s = StateVector::prepare_singlet_head(4).unwrap();
        assert_abs_diff_eq!(s.pair_projection_fidelity((1, 2), &singlet()).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.pair_projection_fidelity((1, 2), &triplet_zero()).unwrap(), 0.0, epsilon = 1e-15);
        let s = StateVector::prepare_singlet_head(3).unwrap();
        assert_abs_diff_eq!(s.pair_projection_fidelity((2, 3), &singlet()).unwrap(), 0.25, epsilon = 1e-15);
        assert!(s.pair_projection_fidelity((2, 2), &singlet()).is_err());
        let bad = [ONE, ONE, ZERO, ZERO];
        assert!(s.pair_projection_fidelity((1, 2), &bad).is_err());
    }

    #[test]
    fn projections_over_pair_basis_sum_to_one() {
        let mut s = StateVector::prepare_singlet_head(5).unwrap();
        let mut m = Matrix4::identity();
        let (cs, sn) = (0.3f64.cos(), 0.3f64.sin());
        m[(1, 1)] = c(cs, 0.0);
        m[(1, 2)] = c(0.0, -sn);
        m[(2, 1)] = c(0.0, -sn);
        m[(2, 2)] = c(cs, 0.0);
        let g = TwoSiteGate::new(m).unwrap();
        s.apply_two_site(2, 3, &g).unwrap();
        s.apply_two_site(4, 3, &g).unwrap();
        let total: f64 = [singlet(), triplet_zero(), triplet_up(), triplet_down()]
            .iter()
            .map(|t| s.pair_projection_fidelity((4, 2), t).unwrap())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn magnetization() {
        assert_eq!(StateVector::basis_state(3, &[0, 0, 0]).unwrap().total_sz(), 1.5);
        assert_abs_diff_eq!(StateVector::prepare_singlet_head(2).unwrap().total_sz(), 0.0);
        assert_abs_diff_eq!(StateVector::prepare_singlet_head(5).unwrap().total_sz(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn parallel_kernel_matches_sequential() {
        let n = PARALLEL_MIN_SITES;
        let len = 1usize << n;
        let raw: Vec<Complex64> = (0..len)
            .map(|i| c(((i * 7919) % 101) as f64 - 50.0, ((i * 104_729) % 97) as f64 - 48.0))
            .collect();
        let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = raw.iter().map(|a| a / norm).collect();
        let mut m = Matrix4::identity();
        let (cs, sn) = (0.7f64.cos(), 0.7f64.sin());
        m[(1, 1)] = c(cs, 0.0);
        m[(1, 2)] = c(0.0, -sn);
        m[(2, 1)] = c(0.0, -sn);
        m[(2, 2)] = c(cs, 0.0);
        let g = TwoSiteGate::new(m).unwrap();

        let mut par = StateVector::from_amplitudes(n, amps.clone()).unwrap();
        par.apply_two_site(9, 10, &g).unwrap();
        par.apply_single_site_phase(3, 0.4).unwrap();

        let mut seq = amps;
        two_site_kernel(&mut seq, 1 << (n - 9), 1 << (n - 10), g.matrix());
        let m3 = 1 << (n - 3);
        for (i, a) in seq.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, if i & m3 == 0 { -0.4 } else { 0.4 });
        }
        assert_eq!(par.amplitudes(), &seq[..]);
    }
}
