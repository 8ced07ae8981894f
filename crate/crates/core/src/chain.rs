//! Chain specifications, the odd/even bond partition and the exact
//! eigendecomposition oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::statevec::StateVector;

/// Largest chain the dense oracle accepts.
pub const ORACLE_MAX_SITES: usize = 14;

/// Sign of the exchange term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interaction {
    #[serde(rename = "fm")]
    Ferromagnetic,
    #[serde(rename = "afm")]
    Antiferromagnetic,
}

impl Interaction {
    /// `+1` for antiferromagnetic, `-1` for ferromagnetic.
    pub fn sign(self) -> f64 {
        match self {
            Interaction::Ferromagnetic => -1.0,
            Interaction::Antiferromagnetic => 1.0,
        }
    }
}

/// `H = sign · prefactor · Σ_i J_{i,i+1} S_i·S_{i+1} + Σ_i B_i σ^z_i`.
///
/// `couplings[k]` is the bond between sites `k + 1` and `k + 2`; `fields[k]`
/// acts on site `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainSpecDoc", into = "ChainSpecDoc")]
pub struct ChainSpec {
    n: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    interaction: Interaction,
    prefactor: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainSpecDoc {
    n: usize,
    couplings: Vec<f64>,
    fields: Vec<f64>,
    sign: Interaction,
    prefactor: f64,
}

impl TryFrom<ChainSpecDoc> for ChainSpec {
    type Error = Error;

    fn try_from(doc: ChainSpecDoc) -> Result<Self> {
        ChainSpec::new(doc.n, doc.couplings, doc.fields, doc.sign, doc.prefactor)
    }
}

impl From<ChainSpec> for ChainSpecDoc {
    fn from(spec: ChainSpec) -> Self {
        ChainSpecDoc {
            n: spec.n,
            couplings: spec.couplings,
            fields: spec.fields,
            sign: spec.interaction,
            prefactor: spec.prefactor,
        }
    }
}

impl ChainSpec {
    pub fn new(
        n: usize,
        couplings: Vec<f64>,
        fields: Vec<f64>,
        interaction: Interaction,
        prefactor: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(invalid!("a chain needs at least 2 sites, got {n}"));
        }
        if couplings.len() != n - 1 {
            return Err(invalid!("expected {} couplings, got {}", n - 1, couplings.len()));
        }
        if fields.len() != n {
            return Err(invalid!("expected {n} fields, got {}", fields.len()));
        }
        if let Some(j) = couplings.iter().find(|j| !(j.is_finite() && **j >= 0.0)) {
            return Err(invalid!("couplings must be finite and nonnegative, got {j}"));
        }
        if let Some(b) = fields.iter().find(|b| !b.is_finite()) {
            return Err(invalid!("fields must be finite, got {b}"));
        }
        if !(prefactor > 0.0 && prefactor.is_finite()) {
            return Err(invalid!("exchange prefactor must be positive, got {prefactor}"));
        }
        Ok(Self {
            n,
            couplings,
            fields,
            interaction,
            prefactor,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Same couplings and fields with a different exchange sign.
    pub fn with_interaction(&self, interaction: Interaction) -> Self {
        Self {
            interaction,
            ..self.clone()
        }
    }

    pub fn has_fields(&self) -> bool {
        self.fields.iter().any(|&b| b != 0.0)
    }

    /// Coefficient of `S_i·S_{i+1}` for the bond starting at `site`.
    pub fn bond_coefficient(&self, site: usize) -> f64 {
        self.interaction.sign() * self.prefactor * self.couplings[site - 1]
    }
}

/// Echo chain: uniform antiferromagnet of strength `j` with the bond between
/// sites 1 and 2 switched off.
pub fn uniform_echo_chain(n: usize, j: f64) -> Result<ChainSpec> {
    if n < 3 {
        return Err(invalid!("an echo chain needs at least 3 sites, got {n}"));
    }
    if !(j > 0.0 && j.is_finite()) {
        return Err(invalid!("coupling must be positive, got {j}"));
    }
    let mut couplings = vec![j; n - 1];
    couplings[0] = 0.0;
    ChainSpec::new(n, couplings, vec![0.0; n], Interaction::Antiferromagnetic, 1.0)
}

/// Engineered transfer chain: ferromagnetic exchange `-2 J_i S_i·S_{i+1}` with
/// `J_i = √(i(n-i))` and fields `B_i = (J_{i,i+1} + J_{i-1,i}) / 2`, taking
/// `J_{0,1} = J_{n,n+1} = 0`.
pub fn transfer_chain(n: usize) -> Result<ChainSpec> {
    if n < 2 {
        return Err(invalid!("a transfer chain needs at least 2 sites, got {n}"));
    }
    let couplings: Vec<f64> = (1..n).map(|i| ((i * (n - i)) as f64).sqrt()).collect();
    let bond = |k: isize| -> f64 {
        if k < 0 || k as usize >= couplings.len() {
            0.0
        } else {
            couplings[k as usize]
        }
    };
    let fields = (0..n as isize)
        .map(|k| (bond(k) + bond(k - 1)) / 2.0)
        .collect();
    ChainSpec::new(n, couplings, fields, Interaction::Ferromagnetic, 2.0)
}

/// Bonds grouped into two layers of mutually disjoint (hence commuting) pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BondPartition {
    /// Bonds `(i, i+1)` with odd `i`.
    pub odd: Vec<(usize, usize)>,
    /// Bonds `(i, i+1)` with even `i`.
    pub even: Vec<(usize, usize)>,
}

/// Splits the bonds with nonzero coupling by the parity of their first site.
pub fn partition_odd_even(spec: &ChainSpec) -> BondPartition {
    let (odd, even) = spec
        .couplings
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != 0.0)
        .map(|(k, _)| (k + 1, k + 2))
        .partition(|(i, _)| i % 2 == 1);
    BondPartition { odd, even }
}

fn check_oracle_size(n: usize) -> Result<()> {
    if n > ORACLE_MAX_SITES {
        return Err(Error::ResourceLimit(format!(
            "{n} sites exceeds the exact-oracle limit of {ORACLE_MAX_SITES}"
        )));
    }
    Ok(())
}

/// Nonzero matrix elements `<row|H|col>` for a fixed column. The Hamiltonian
/// is real in the computational basis.
fn for_each_element(spec: &ChainSpec, col: usize, mut emit: impl FnMut(usize, f64)) {
    let n = spec.n;
    let mask = |site: usize| 1usize << (n - site);
    let mut diag = 0.0;
    for site in 1..n {
        let c = spec.bond_coefficient(site);
        if c == 0.0 {
            continue;
        }
        let (ma, mb) = (mask(site), mask(site + 1));
        let aligned = (col & ma == 0) == (col & mb == 0);
        if aligned {
            diag += 0.25 * c;
        } else {
            diag -= 0.25 * c;
            emit(col ^ ma ^ mb, 0.5 * c);
        }
    }
    for (k, &b) in spec.fields.iter().enumerate() {
        diag += if col & mask(k + 1) == 0 { b } else { -b };
    }
    emit(col, diag);
}

/// The full `2^n × 2^n` Hamiltonian. Memory grows as `8 · 4^n` bytes, so this
/// is meant for small chains; [`ExactPropagator`] works sector by sector.
pub fn dense_hamiltonian(spec: &ChainSpec) -> Result<DMatrix<f64>> {
    check_oracle_size(spec.n)?;
    let dim = 1usize << spec.n;
    let mut h = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for_each_element(spec, col, |row, v| h[(row, col)] += v);
    }
    Ok(h)
}

struct Sector {
    indices: Vec<usize>,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Exact `exp(-iHt)` from the eigendecomposition of `H`, block by block over
/// the sectors of fixed total `S^z` (the Hamiltonian never couples them).
pub struct ExactPropagator {
    n: usize,
    sectors: Vec<Sector>,
}

impl ExactPropagator {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        check_oracle_size(spec.n)?;
        let n = spec.n;
        let dim = 1usize << n;
        let mut by_count: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for index in 0..dim {
            by_count[index.count_ones() as usize].push(index);
        }
        let mut position = vec![0usize; dim];
        let sectors = by_count
            .into_iter()
            .map(|indices| {
                for (p, &index) in indices.iter().enumerate() {
                    position[index] = p;
                }
                let d = indices.len();
                let mut block = DMatrix::zeros(d, d);
                for (c, &col) in indices.iter().enumerate() {
                    for_each_element(spec, col, |row, v| block[(position[row], c)] += v);
                }
                let eig = SymmetricEigen::new(block);
                Sector {
                    indices,
                    energies: eig.eigenvalues.iter().copied().collect(),
                    vectors: eig.eigenvectors,
                }
            })
            .collect();
        Ok(Self { n, sectors })
    }

    /// All eigenvalues, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.sectors.iter().flat_map(|s| s.energies.iter().copied()).collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if state.num_sites() != self.n {
            return Err(invalid!(
                "state has {} sites, propagator expects {}",
                state.num_sites(),
                self.n
            ));
        }
        if !t.is_finite() {
            return Err(invalid!("time must be finite, got {t}"));
        }
        let psi = state.amplitudes();
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for sector in &self.sectors {
            let v = &sector.vectors;
            let d = sector.indices.len();
            let coeffs: Vec<Complex64> = (0..d)
                .map(|k| {
                    let c: Complex64 = sector
                        .indices
                        .iter()
                        .enumerate()
                        .map(|(a, &index)| psi[index] * v[(a, k)])
                        .sum();
                    c * Complex64::from_polar(1.0, -sector.energies[k] * t)
                })
                .collect();
            for (a, &index) in sector.indices.iter().enumerate() {
                out[index] = coeffs.iter().enumerate().map(|(k, c)| c * v[(a, k)]).sum();
            }
        }
        StateVector::from_amplitudes(self.n, out)
    }
}

/// `exp(-iHt)|ψ>` via exact diagonalization.
pub fn exact_evolve(spec: &ChainSpec, state: &StateVector, t: f64) -> Result<StateVector> {
    ExactPropagator::new(spec)?.evolve(state, t)
}
