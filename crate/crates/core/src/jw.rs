//! Exact diagonalization of open spin-1/2 chains
//!
//! H = Σ_α h₀ σᶻ_α + h₁(σˣ_α σˣ_{α+1} + σʸ_α σʸ_{α+1}) + h₂(σˣ_α σʸ_{α+1} − σʸ_α σˣ_{α+1})
//!
//! used as an independent oracle for free-fermion block entropies.
//!
//! Convention: c_j = [∏_{i<j} (−σᶻ_i)] σ⁻_j with n_j = (1 + σᶻ_j)/2, so spin
//! up is an occupied site. With `t1` the amplitude of c†_j c_{j+1} this gives
//! h₀ = T₀/2, h₁ = Re t1 / 2, h₂ = Im t1 / 2, and the spin energies equal the
//! fermion energies minus N·T₀/2.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::entropy::{LogBase, Spectrum};
use crate::error::{Error, Result};
use crate::model::HoppingModel;

pub const MAX_SITES: usize = 14;
pub const MAX_DENSE_SITES: usize = 8;
pub const MAX_FERMION_SITES: usize = 2000;
/// Eigenvalues closer than this to the ground energy count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;
pub const FERMI_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Couplings {
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
}

/// Spin couplings of an open chain with on-site energy `t0` and
/// nearest-neighbour amplitude `t1` (coefficient of c†_j c_{j+1}).
pub fn couplings_from_hopping(t0: f64, t1: Complex64) -> Couplings {
    Couplings {
        h0: t0 / 2.0,
        h1: t1.re / 2.0,
        h2: t1.im / 2.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinChainSpec {
    n: usize,
    couplings: Couplings,
}

impl SpinChainSpec {
    pub fn new(n: usize, couplings: Couplings) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&n) {
            return Err(Error::Size {
                what: "spin chain length".into(),
                size: n,
                cap: MAX_SITES,
            });
        }
        let c = couplings;
        if ![c.h0, c.h1, c.h2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("couplings must be finite".into()));
        }
        Ok(SpinChainSpec { n, couplings })
    }

    /// Spin image of a one-dimensional nearest-neighbour model on `n` sites.
    pub fn from_model(model: &HoppingModel, n: usize) -> Result<Self> {
        if model.dim() != 1 {
            return Err(Error::Capability(
                "the spin mapping is one-dimensional".into(),
            ));
        }
        if model.range_along(0) > 1 {
            return Err(Error::Capability(
                "Jordan–Wigner strings for hopping range > 1 are not implemented".into(),
            ));
        }
        let (t0, t1) = chain_amplitudes(model);
        SpinChainSpec::new(n, couplings_from_hopping(t0, t1))
    }

    pub fn sites(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> Couplings {
        self.couplings
    }

    /// Amplitude of c†_j c_{j+1} reconstructed from the couplings.
    pub fn hopping(&self) -> Complex64 {
        Complex64::new(2.0 * self.couplings.h1, 2.0 * self.couplings.h2)
    }

    /// On-site energy T₀ reconstructed from h₀.
    pub fn onsite(&self) -> f64 {
        2.0 * self.couplings.h0
    }

    /// Single-particle matrix of the corresponding open fermion chain.
    pub fn single_particle(&self) -> DMatrix<Complex64> {
        open_chain(self.n, self.onsite(), self.hopping())
    }
}

/// On-site energy and c†_j c_{j+1} amplitude of a 1-D model.
pub fn chain_amplitudes(model: &HoppingModel) -> (f64, Complex64) {
    (model.hopping(&[0]).re + model.mu(), model.hopping(&[-1]))
}

/// Open chain with `T_jj = t0`, `T_{j,j+1} = t1`, `T_{j+1,j} = conj(t1)`.
pub fn open_chain(n: usize, t0: f64, t1: Complex64) -> DMatrix<Complex64> {
    let mut t = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for j in 0..n {
        t[(j, j)] = Complex64::new(t0, 0.0);
        if j + 1 < n {
            t[(j, j + 1)] = t1;
            t[(j + 1, j)] = t1.conj();
        }
    }
    t
}

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn pauli(which: char) -> DMatrix<Complex64> {
    let (o, l) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    // basis order (down, up): bit value 0 then 1
    match which {
        'x' => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        'y' => DMatrix::from_row_slice(2, 2, &[o, I, -I, o]),
        'z' => DMatrix::from_row_slice(2, 2, &[-l, o, o, l]),
        _ => DMatrix::identity(2, 2),
    }
}

// Operator acting as `ops` on the listed sites; site j is bit j of the index.
fn embed(n: usize, ops: &[(usize, char)]) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for site in (0..n).rev() {
        let op = ops
            .iter()
            .find(|(s, _)| *s == site)
            .map_or_else(|| pauli('1'), |&(_, c)| pauli(c));
        m = m.kronecker(&op);
    }
    m
}

/// Full 2^N Hamiltonian assembled from Kronecker products of Pauli matrices.
pub fn dense_hamiltonian(spec: &SpinChainSpec) -> Result<DMatrix<Complex64>> {
    let n = spec.n;
    if n > MAX_DENSE_SITES {
        return Err(Error::Size {
            what: "dense spin Hamiltonian sites".into(),
            size: n,
            cap: MAX_DENSE_SITES,
        });
    }
    let c = spec.couplings;
    let dim = 1usize << n;
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for a in 0..n {
        h += embed(n, &[(a, 'z')]) * Complex64::new(c.h0, 0.0);
        if a + 1 < n {
            let b = a + 1;
            let xx = embed(n, &[(a, 'x'), (b, 'x')]);
            let yy = embed(n, &[(a, 'y'), (b, 'y')]);
            let xy = embed(n, &[(a, 'x'), (b, 'y')]);
            let yx = embed(n, &[(a, 'y'), (b, 'x')]);
            h += (xx + yy) * Complex64::new(c.h1, 0.0) + (xy - yx) * Complex64::new(c.h2, 0.0);
        }
    }
    Ok(h)
}

/// Sorted spectrum of [`dense_hamiltonian`].
pub fn dense_spectrum(spec: &SpinChainSpec) -> Result<Vec<f64>> {
    let mut e: Vec<f64> = dense_hamiltonian(spec)?
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Sorted many-body energies Σ_{ν∈occ} ε_ν − N·T₀/2 over all subsets of
/// single-particle modes.
pub fn free_fermion_spectrum(spec: &SpinChainSpec) -> Result<Vec<f64>> {
    let n = spec.n;
    if n > MAX_DENSE_SITES {
        return Err(Error::Size {
            what: "free-fermion many-body spectrum sites".into(),
            size: n,
            cap: MAX_DENSE_SITES,
        });
    }
    let eps: Vec<f64> = spec
        .single_particle()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    let shift = -(n as f64) * spec.onsite() / 2.0;
    let mut e: Vec<f64> = (0..1usize << n)
        .map(|occ| {
            shift
                + (0..n)
                    .filter(|&v| occ >> v & 1 == 1)
                    .map(|v| eps[v])
                    .sum::<f64>()
        })
        .collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Basis of the sector with `m` up spins, and the inverse index.
struct Sector {
    states: Vec<usize>,
    index: Vec<usize>,
}

impl Sector {
    fn new(n: usize, m: usize) -> Self {
        let states: Vec<usize> = (0..1usize << n)
            .filter(|s| s.count_ones() as usize == m)
            .collect();
        let mut index = vec![usize::MAX; 1 << n];
        for (i, &s) in states.iter().enumerate() {
            index[s] = i;
        }
        Sector { states, index }
    }
}

fn is_up(s: usize, j: usize) -> bool {
    s >> j & 1 == 1
}

// H restricted to one magnetization sector, from the action of σᶻ and σ±.
fn sector_hamiltonian(spec: &SpinChainSpec, sector: &Sector) -> DMatrix<Complex64> {
    let n = spec.n;
    let c = spec.couplings;
    // bond = t σ⁺_j σ⁻_{j+1} + conj(t) σ⁻_j σ⁺_{j+1}, t = 2(h₁ + i h₂)
    let t = Complex64::new(2.0 * c.h1, 2.0 * c.h2);
    let dim = sector.states.len();
    let mut h = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
    for (col, &s) in sector.states.iter().enumerate() {
        let up = s.count_ones() as f64;
        h[(col, col)] += Complex64::new(c.h0 * (2.0 * up - n as f64), 0.0);
        for j in 0..n.saturating_sub(1) {
            let (a, b) = (is_up(s, j), is_up(s, j + 1));
            if a == b {
                continue;
            }
            let flipped = s ^ (1 << j) ^ (1 << (j + 1));
            let row = sector.index[flipped];
            // σ⁺_j σ⁻_{j+1} raises j and lowers j+1
            h[(row, col)] += if b { t } else { t.conj() };
        }
    }
    h
}

/// Reduced state of a block.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
    eigenvalues: Vec<f64>,
}

pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-12;

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Numeric("density matrix must be square".into()));
        }
        let herm = (&matrix - matrix.adjoint()).camax();
        if herm > 1e-12 {
            return Err(Error::Numeric(format!(
                "density matrix not Hermitian ({herm:.3e})"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::Numeric(format!(
                "density matrix trace {trace} differs from 1"
            )));
        }
        let eigenvalues: Vec<f64> = matrix.symmetric_eigenvalues().iter().copied().collect();
        if let Some(&min) = eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -POSITIVITY_TOL {
                return Err(Error::Numeric(format!(
                    "density matrix eigenvalue {min:.3e} < 0"
                )));
            }
        }
        Ok(DensityMatrix {
            matrix,
            eigenvalues,
        })
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// von Neumann entropy −tr ρ log ρ.
    pub fn entropy(&self, base: LogBase) -> f64 {
        let nats: f64 = self
            .eigenvalues
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum();
        base.from_nats(nats)
    }
}

/// Reduced state of the first `block` sites of a sector vector.
fn reduced_state(
    n: usize,
    block: usize,
    sector: &Sector,
    psi: &[Complex64],
) -> Result<DensityMatrix> {
    let rows = 1usize << block;
    let cols = 1usize << (n - block);
    let mut m = DMatrix::from_element(rows, cols, Complex64::new(0.0, 0.0));
    for (&s, &amp) in sector.states.iter().zip(psi) {
        m[(s & (rows - 1), s >> block)] = amp;
    }
    let rho = &m * m.adjoint();
    DensityMatrix::new(rho)
}

/// Ground state of the spin chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpinGround {
    pub energy: f64,
    /// Number of up spins (equivalently fermions).
    pub filling: usize,
    pub degeneracy: usize,
}

struct GroundVector {
    filling: usize,
    vector: Vec<Complex64>,
}

fn ground_space(spec: &SpinChainSpec) -> (f64, Vec<GroundVector>, Vec<Sector>) {
    let n = spec.n;
    let sectors: Vec<Sector> = (0..=n).map(|m| Sector::new(n, m)).collect();
    let hamiltonians: Vec<DMatrix<Complex64>> = sectors
        .iter()
        .map(|s| sector_hamiltonian(spec, s))
        .collect();
    let lowest: Vec<f64> = hamiltonians
        .iter()
        .map(|h| {
            h.symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let energy = lowest.iter().copied().fold(f64::INFINITY, f64::min);
    let mut vectors = Vec::new();
    for (m, h) in hamiltonians.into_iter().enumerate() {
        if lowest[m] > energy + DEGENERACY_TOL {
            continue;
        }
        let eig = h.symmetric_eigen();
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            if e <= energy + DEGENERACY_TOL {
                vectors.push(GroundVector {
                    filling: m,
                    vector: eig.eigenvectors.column(k).iter().copied().collect(),
                });
            }
        }
    }
    (energy, vectors, sectors)
}

pub fn spin_ground(spec: &SpinChainSpec) -> SpinGround {
    let (energy, vectors, _) = ground_space(spec);
    SpinGround {
        energy,
        filling: vectors[0].filling,
        degeneracy: vectors.len(),
    }
}

/// Entropy of the first `block` sites in the spin ground state.
///
/// A degenerate ground space is accepted only when every basis vector found
/// gives the same block entropy.
pub fn spin_ground_entropy(
    spec: &SpinChainSpec,
    block: usize,
    base: LogBase,
) -> Result<(f64, SpinGround)> {
    let ground = ground_space(spec);
    Ok((
        ground_block_entropy(spec, &ground, block, base)?,
        summary(&ground),
    ))
}

fn summary(ground: &(f64, Vec<GroundVector>, Vec<Sector>)) -> SpinGround {
    SpinGround {
        energy: ground.0,
        filling: ground.1[0].filling,
        degeneracy: ground.1.len(),
    }
}

fn ground_block_entropy(
    spec: &SpinChainSpec,
    (_, vectors, sectors): &(f64, Vec<GroundVector>, Vec<Sector>),
    block: usize,
    base: LogBase,
) -> Result<f64> {
    let n = spec.n;
    if block == 0 || block > n / 2 + 1 {
        return Err(Error::Domain(format!(
            "block of {block} sites outside 1..={} for N = {n}",
            n / 2 + 1
        )));
    }
    let entropies: Vec<f64> = vectors
        .iter()
        .map(|g| Ok(reduced_state(n, block, &sectors[g.filling], &g.vector)?.entropy(base)))
        .collect::<Result<_>>()?;
    let first = entropies[0];
    if entropies.iter().any(|s| (s - first).abs() > 1e-9) {
        return Err(Error::Ambiguity(format!(
            "ground space of dimension {} has block entropies from {:.6} to {:.6}",
            vectors.len(),
            entropies.iter().copied().fold(f64::INFINITY, f64::min),
            entropies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        )));
    }
    Ok(first)
}

/// Block entropy of the Slater determinant filling the `m` lowest modes of
/// the single-particle matrix `t`.
pub fn fermion_chain_entropy(
    t: &DMatrix<Complex64>,
    m: usize,
    block: usize,
    base: LogBase,
) -> Result<f64> {
    let n = t.nrows();
    if !t.is_square() || n == 0 {
        return Err(Error::InvalidModel(
            "single-particle matrix must be square and nonempty".into(),
        ));
    }
    if n > MAX_FERMION_SITES {
        return Err(Error::Size {
            what: "fermion chain sites".into(),
            size: n,
            cap: MAX_FERMION_SITES,
        });
    }
    let herm = (t - t.adjoint()).camax();
    if herm > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "single-particle matrix not Hermitian ({herm:.3e})"
        )));
    }
    if m > n || block == 0 || block > n {
        return Err(Error::Domain(format!(
            "filling {m} and block {block} must satisfy m <= N and 1 <= block <= N = {n}"
        )));
    }
    let eig = t.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    if m > 0 && m < n {
        let (below, above) = (eig.eigenvalues[order[m - 1]], eig.eigenvalues[order[m]]);
        if (above - below).abs() <= FERMI_TIE_TOL {
            return Err(Error::Ambiguity(format!(
                "modes {} and {} are degenerate at the Fermi level ({below})",
                m - 1,
                m
            )));
        }
    }
    let mut gamma = DMatrix::<Complex64>::identity(block, block);
    for &nu in &order[..m] {
        let phi = eig.eigenvectors.column(nu);
        for a in 0..block {
            for b in 0..block {
                gamma[(a, b)] -= 2.0 * phi[a] * phi[b].conj();
            }
        }
    }
    let values: Vec<f64> = gamma.symmetric_eigenvalues().iter().copied().collect();
    Ok(Spectrum::from_values(values)?.entropy(base))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JwRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub block: usize,
    pub spin: f64,
    pub fermion: f64,
    pub deviation: f64,
}

/// Spin vs fermion block entropies for blocks 1..=N/2 of the spin ground state.
pub fn jw_check(spec: &SpinChainSpec, base: LogBase) -> Result<Vec<JwRow>> {
    let n = spec.n;
    let t = spec.single_particle();
    let space = ground_space(spec);
    let ground = summary(&space);
    (1..=n / 2)
        .map(|block| {
            let spin = ground_block_entropy(spec, &space, block, base)?;
            let fermion = fermion_chain_entropy(&t, ground.filling, block, base)?;
            Ok(JwRow {
                n,
                m: ground.filling,
                block,
                spin,
                fermion,
                deviation: (spin - fermion).abs(),
            })
        })
        .collect()
}

/// Largest gap between the sorted spin and free-fermion spectra.
pub fn spectrum_deviation(spec: &SpinChainSpec) -> Result<f64> {
    let a = dense_spectrum(spec)?;
    let b = free_fermion_spectrum(spec)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn xx(n: usize) -> SpinChainSpec {
        SpinChainSpec::new(n, couplings_from_hopping(0.0, Complex64::new(1.0, 0.0))).unwrap()
    }

    #[test]
    fn coupling_examples() {
        let c = couplings_from_hopping(0.0, Complex64::new(1.0, 0.0));
        assert_eq!((c.h0, c.h1, c.h2), (0.0, 0.5, 0.0));
        let c = couplings_from_hopping(2.0, Complex64::new(0.0, 0.0));
        assert_eq!((c.h0, c.h1, c.h2), (1.0, 0.0, 0.0));
        let c = couplings_from_hopping(0.0, Complex64::new(0.0, 1.0));
        assert_eq!((c.h0, c.h1, c.h2), (0.0, 0.0, 0.5));
    }

    #[test]
    fn from_model_rejects_long_range() {
        let m = HoppingModel::nearest_neighbor(1, 1.0, 0.3).unwrap();
        let s = SpinChainSpec::from_model(&m, 6).unwrap();
        assert_eq!(
            s.couplings(),
            Couplings {
                h0: 0.15,
                h1: 0.5,
                h2: 0.0
            }
        );
        let long = HoppingModel::new(
            1,
            vec![
                (vec![2], Complex64::new(1.0, 0.0)),
                (vec![-2], Complex64::new(1.0, 0.0)),
            ],
            0.0,
        )
        .unwrap();
        assert!(matches!(
            SpinChainSpec::from_model(&long, 6),
            Err(Error::Capability(_))
        ));
        assert!(matches!(
            SpinChainSpec::new(15, c0()),
            Err(Error::Size { .. })
        ));
        assert!(matches!(
            SpinChainSpec::new(1, c0()),
            Err(Error::Size { .. })
        ));
    }

    fn c0() -> Couplings {
        Couplings {
            h0: 0.0,
            h1: 0.5,
            h2: 0.0,
        }
    }

    #[test]
    fn sector_blocks_match_dense_matrix() {
        let spec = SpinChainSpec::new(
            5,
            Couplings {
                h0: 0.3,
                h1: -0.7,
                h2: 0.4,
            },
        )
        .unwrap();
        let dense = dense_hamiltonian(&spec).unwrap();
        for m in 0..=5 {
            let sector = Sector::new(5, m);
            let h = sector_hamiltonian(&spec, &sector);
            for (i, &si) in sector.states.iter().enumerate() {
                for (j, &sj) in sector.states.iter().enumerate() {
                    assert!((h[(i, j)] - dense[(si, sj)]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn product_ground_state_has_no_entropy() {
        let spec = SpinChainSpec::new(
            6,
            Couplings {
                h0: 1.0,
                h1: 0.0,
                h2: 0.0,
            },
        )
        .unwrap();
        for block in 1..=3 {
            let (s, g) = spin_ground_entropy(&spec, block, LogBase::BITS).unwrap();
            assert!(s.abs() < 1e-12);
            assert_eq!(g.filling, 0);
        }
    }

    #[test]
    fn two_site_singlet() {
        let (s, g) = spin_ground_entropy(&xx(2), 1, LogBase::BITS).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(g.filling, 1);
    }

    #[test]
    fn fermion_examples() {
        let t = open_chain(2, 0.0, Complex64::new(1.0, 0.0));
        assert!((fermion_chain_entropy(&t, 1, 1, LogBase::BITS).unwrap() - 1.0).abs() < 1e-12);
        let t = open_chain(7, 0.2, Complex64::new(0.3, -0.8));
        for block in 1..=7 {
            assert!(
                fermion_chain_entropy(&t, 0, block, LogBase::BITS)
                    .unwrap()
                    .abs()
                    < 1e-12
            );
            assert!(
                fermion_chain_entropy(&t, 7, block, LogBase::BITS)
                    .unwrap()
                    .abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn fermi_level_ties_are_ambiguous() {
        // every mode of the identity is degenerate
        let t = DMatrix::<Complex64>::identity(4, 4);
        assert!(matches!(
            fermion_chain_entropy(&t, 2, 1, LogBase::BITS),
            Err(Error::Ambiguity(_))
        ));
    }

    #[test]
    fn degenerate_ground_space_is_reported() {
        // N = 3 XX chain: the zero mode makes fillings 1 and 2 degenerate
        let r = spin_ground_entropy(&xx(3), 1, LogBase::BITS);
        match r {
            Ok((_, g)) => assert!(g.degeneracy >= 2),
            Err(e) => assert!(matches!(e, Error::Ambiguity(_))),
        }
    }

    #[test]
    fn spectrum_equivalence_small_chains() {
        for n in 2..=6 {
            let spec = SpinChainSpec::new(
                n,
                Couplings {
                    h0: 0.35,
                    h1: 0.5,
                    h2: -0.25,
                },
            )
            .unwrap();
            assert!(spectrum_deviation(&spec).unwrap() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn entropy_equivalence_xx_chain() {
        for n in [4, 6, 8] {
            for row in jw_check(&xx(n), LogBase::BITS).unwrap() {
                assert!(row.deviation < 1e-9, "{row:?}");
                assert_eq!(row.m, n / 2);
            }
        }
    }

    #[test]
    fn density_matrix_checks() {
        let bad = DMatrix::from_element(2, 2, Complex64::new(0.5, 0.0)) * Complex64::new(1.5, 0.0);
        assert!(DensityMatrix::new(bad).is_err());
        let neg = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.5, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(-0.5, 0.0),
            ],
        );
        assert!(DensityMatrix::new(neg).is_err());
        let mixed = DMatrix::<Complex64>::identity(4, 4) * Complex64::new(0.25, 0.0);
        let rho = DensityMatrix::new(mixed).unwrap();
        assert!((rho.entropy(LogBase::BITS) - 2.0).abs() < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_couplings_agree(
            h0 in -1.0f64..1.0, h1 in -1.0f64..1.0, h2 in -1.0f64..1.0, n in 4usize..8
        ) {
            let spec = SpinChainSpec::new(n, Couplings { h0, h1, h2 }).unwrap();
            prop_assert!(spectrum_deviation(&spec).unwrap() < 1e-9);
            match jw_check(&spec, LogBase::NATS) {
                Ok(rows) => for r in rows { prop_assert!(r.deviation < 1e-9, "{:?}", r) },
                Err(Error::Ambiguity(_)) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
    }
}
