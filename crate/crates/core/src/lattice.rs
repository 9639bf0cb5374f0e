//! Hubbard chains: potential shapes, fixed-number Fock bases and many-body
//! Hamiltonian matrices.
//!
//! Fermionic ordering: modes are ordered as all spin-up sites in ascending
//! order followed by all spin-down sites, and a configuration `(up, down)`
//! stands for the state `Π_{i∈up} c†_{i↑} Π_{j∈down} c†_{j↓} |0⟩` with the
//! creation operators ordered by ascending mode index. Site `i` (0-based)
//! of a spin species is bit `i` of its occupation mask.
//!
//! With open boundaries every nearest-neighbour hop carries the same sign,
//! so all hopping matrix elements are `-J`. The dimer matrix quoted in the
//! literature uses a different basis order and has a `±J` pattern; the two
//! agree spectrally.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::Mat;

use crate::error::{Error, Result};

/// Largest sector dimension we diagonalize densely. Covers half-filled
/// chains up to eight sites (dimension 4900).
pub const MAX_EXACT_DIM: usize = 10_000;

/// Largest Fock basis we are willing to enumerate at all.
pub const MAX_BASIS_DIM: usize = 1_000_000;

/// Spatial profile `f_i` of the external potential, `V_i = f_i v0`.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialShape {
    /// `f_i = 1 - 2(i-1)/(L-1)`, decreasing from +1 to -1.
    Linear,
    /// `f_i = (i - (L+1)/2)^2 / 2`, zero at the chain centre.
    Harmonic,
    /// `f_i = 1`.
    Uniform,
    /// Explicit dimensionless factors, one per site.
    Custom(Vec<f64>),
}

impl PotentialShape {
    /// Per-site factors `f_i` for a chain of `sites` sites.
    pub fn factors(&self, sites: usize) -> Result<Vec<f64>> {
        if sites == 0 {
            return Err(Error::NoSites);
        }
        let centre = (sites as f64 + 1.0) / 2.0;
        match self {
            PotentialShape::Linear => {
                if sites < 2 {
                    return Err(Error::LinearNeedsTwoSites);
                }
                let span = (sites - 1) as f64;
                Ok((0..sites).map(|i| 1.0 - 2.0 * i as f64 / span).collect())
            }
            PotentialShape::Harmonic => Ok((0..sites)
                .map(|i| {
                    let x = (i + 1) as f64 - centre;
                    0.5 * x * x
                })
                .collect()),
            PotentialShape::Uniform => Ok(vec![1.0; sites]),
            PotentialShape::Custom(f) => {
                if f.len() != sites {
                    return Err(Error::LengthMismatch {
                        expected: sites,
                        found: f.len(),
                    });
                }
                if let Some(bad) = f.iter().find(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "shape",
                        reason: format!("non-finite factor {bad}"),
                    });
                }
                Ok(f.clone())
            }
        }
    }
}

impl fmt::Display for PotentialShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialShape::Linear => write!(f, "linear"),
            PotentialShape::Harmonic => write!(f, "harmonic"),
            PotentialShape::Uniform => write!(f, "uniform"),
            PotentialShape::Custom(v) => {
                write!(f, "custom:")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for PotentialShape {
    type Err = Error;

    /// Accepts `linear`, `harmonic`, `uniform` or `custom:f1;f2;...`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "linear" => return Ok(PotentialShape::Linear),
            "harmonic" => return Ok(PotentialShape::Harmonic),
            "uniform" => return Ok(PotentialShape::Uniform),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("custom:") {
            let factors = rest
                .split(';')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter {
                    name: "shape",
                    reason: e.to_string(),
                })?;
            return Ok(PotentialShape::Custom(factors));
        }
        Err(Error::InvalidParameter {
            name: "shape",
            reason: format!("unknown shape `{s}`"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Open,
    /// Ring closure between the last and first site. Ignored for `L <= 2`,
    /// where it would only duplicate the single bond.
    Periodic,
}

/// Full parameterization of a Hubbard chain in a fixed particle sector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub sites: usize,
    pub hopping: f64,
    pub interaction: f64,
    pub shape: PotentialShape,
    pub amplitude: f64,
    pub n_up: usize,
    pub n_down: usize,
    pub boundary: Boundary,
}

impl ChainSpec {
    /// Half-filled, `S_z = 0` chain with open boundaries and `J = 1`.
    pub fn half_filled(
        sites: usize,
        interaction: f64,
        shape: PotentialShape,
        amplitude: f64,
    ) -> Result<Self> {
        if sites == 0 || !sites.is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                name: "sites",
                reason: format!("half filling needs an even, positive site count (got {sites})"),
            });
        }
        let spec = ChainSpec {
            sites,
            hopping: 1.0,
            interaction,
            shape,
            amplitude,
            n_up: sites / 2,
            n_down: sites / 2,
            boundary: Boundary::Open,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::NoSites);
        }
        if !(self.hopping.is_finite() && self.hopping > 0.0) {
            return Err(Error::InvalidParameter {
                name: "hopping",
                reason: format!("must be positive and finite, got {}", self.hopping),
            });
        }
        if !(self.interaction.is_finite() && self.interaction >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "interaction",
                reason: format!("must be non-negative and finite, got {}", self.interaction),
            });
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!("must be finite, got {}", self.amplitude),
            });
        }
        if self.n_up > self.sites || self.n_down > self.sites {
            return Err(Error::SectorOutOfRange {
                sites: self.sites,
                n_up: self.n_up,
                n_down: self.n_down,
            });
        }
        self.shape.factors(self.sites)?;
        Ok(())
    }

    pub fn particles(&self) -> usize {
        self.n_up + self.n_down
    }

    pub fn factors(&self) -> Result<Vec<f64>> {
        self.shape.factors(self.sites)
    }

    /// Site potentials `V_i = f_i v0`.
    pub fn potential(&self) -> Result<Vec<f64>> {
        build_potential(&self.shape, self.sites, self.amplitude)
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        ChainSpec {
            amplitude,
            ..self.clone()
        }
    }

    pub fn with_interaction(&self, interaction: f64) -> Self {
        ChainSpec {
            interaction,
            ..self.clone()
        }
    }

    /// Same geometry, hopping and particle sector.
    pub fn same_sector(&self, other: &ChainSpec) -> bool {
        self.sites == other.sites
            && self.n_up == other.n_up
            && self.n_down == other.n_down
            && self.boundary == other.boundary
            && self.hopping == other.hopping
    }
}

pub fn build_potential(shape: &PotentialShape, sites: usize, amplitude: f64) -> Result<Vec<f64>> {
    Ok(shape
        .factors(sites)?
        .into_iter()
        .map(|f| f * amplitude)
        .collect())
}

/// Occupation-number basis of a fixed `(N_up, N_down)` sector.
///
/// Configurations are ordered lexicographically on `(up-mask, down-mask)`,
/// each mask list sorted by numeric value; index `k` maps to
/// `(up[k / n_down_masks], down[k % n_down_masks])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    n_up: usize,
    n_down: usize,
    up: Vec<u32>,
    down: Vec<u32>,
}

impl FockBasis {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn dim(&self) -> usize {
        self.up.len() * self.down.len()
    }

    pub fn config(&self, k: usize) -> (u32, u32) {
        let nd = self.down.len();
        (self.up[k / nd], self.down[k % nd])
    }

    pub fn index_of(&self, up: u32, down: u32) -> Option<usize> {
        let iu = self.up.binary_search(&up).ok()?;
        let id = self.down.binary_search(&down).ok()?;
        Some(iu * self.down.len() + id)
    }

    pub fn configs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.up
            .iter()
            .flat_map(move |&u| self.down.iter().map(move |&d| (u, d)))
    }

    /// Total occupation (0, 1 or 2) of `site` in configuration `k`.
    pub fn site_density(&self, k: usize, site: usize) -> u8 {
        let (u, d) = self.config(k);
        (((u >> site) & 1) + ((d >> site) & 1)) as u8
    }

    pub fn doubly_occupied(&self, k: usize) -> u32 {
        let (u, d) = self.config(k);
        (u & d).count_ones()
    }

    pub fn matches(&self, spec: &ChainSpec) -> bool {
        self.sites == spec.sites && self.n_up == spec.n_up && self.n_down == spec.n_down
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `sites`-bit masks with `count` bits set, in ascending numeric order.
fn masks_with_popcount(sites: usize, count: usize) -> Vec<u32> {
    if count == 0 {
        return vec![0];
    }
    let limit = 1u64 << sites;
    let mut out = Vec::with_capacity(binomial(sites, count) as usize);
    let mut m: u64 = (1u64 << count) - 1;
    while m < limit {
        out.push(m as u32);
        // Gosper's hack: next integer with the same popcount.
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
    out
}

pub fn build_fock_basis(sites: usize, n_up: usize, n_down: usize) -> Result<FockBasis> {
    if sites == 0 {
        return Err(Error::NoSites);
    }
    if n_up > sites || n_down > sites || sites > 32 {
        return Err(Error::SectorOutOfRange {
            sites,
            n_up,
            n_down,
        });
    }
    let dim = binomial(sites, n_up) * binomial(sites, n_down);
    if dim > MAX_BASIS_DIM as u128 {
        return Err(Error::SectorTooLarge {
            dim: dim.min(usize::MAX as u128) as usize,
            limit: MAX_BASIS_DIM,
        });
    }
    Ok(FockBasis {
        sites,
        n_up,
        n_down,
        up: masks_with_popcount(sites, n_up),
        down: masks_with_popcount(sites, n_down),
    })
}

/// Single-species hops out of `mask` as `(new_mask, fermionic sign)`.
fn spin_hops(mask: u32, sites: usize, boundary: Boundary) -> Vec<(u32, f64)> {
    let mut bonds: Vec<(usize, usize)> = (0..sites.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if boundary == Boundary::Periodic && sites > 2 {
        bonds.push((0, sites - 1));
    }
    let mut out = Vec::new();
    for (a, b) in bonds {
        let occ_a = (mask >> a) & 1 == 1;
        let occ_b = (mask >> b) & 1 == 1;
        if occ_a == occ_b {
            continue;
        }
        let between = if b > a + 1 {
            let window = ((1u64 << b) - 1) & !((1u64 << (a + 1)) - 1);
            (mask as u64 & window).count_ones()
        } else {
            0
        };
        let sign = if between % 2 == 0 { 1.0 } else { -1.0 };
        out.push((mask ^ (1 << a) ^ (1 << b), sign));
    }
    out
}

/// All hops out of configuration `k` as `(target index, sign)`; the matrix
/// element is `-J * sign`.
fn config_hops(basis: &FockBasis, boundary: Boundary, k: usize) -> Vec<(usize, f64)> {
    let (u, d) = basis.config(k);
    let mut out = Vec::new();
    for (nu, s) in spin_hops(u, basis.sites, boundary) {
        if let Some(t) = basis.index_of(nu, d) {
            out.push((t, s));
        }
    }
    for (nd, s) in spin_hops(d, basis.sites, boundary) {
        if let Some(t) = basis.index_of(u, nd) {
            out.push((t, s));
        }
    }
    out
}

fn check_sector(spec: &ChainSpec, basis: &FockBasis) -> Result<()> {
    spec.validate()?;
    if !basis.matches(spec) {
        return Err(Error::DimensionMismatch {
            expected: spec.sites,
            found: basis.sites,
        });
    }
    if basis.dim() > MAX_EXACT_DIM {
        return Err(Error::SectorTooLarge {
            dim: basis.dim(),
            limit: MAX_EXACT_DIM,
        });
    }
    Ok(())
}

/// Dense many-body Hamiltonian in the full Fock basis of the sector.
pub fn build_hamiltonian(spec: &ChainSpec, basis: &FockBasis) -> Result<Mat<f64>> {
    let potential = spec.potential()?;
    build_hamiltonian_with_potential(spec, basis, &potential)
}

/// Like [`build_hamiltonian`] but with explicit site potentials, ignoring
/// `spec.shape` and `spec.amplitude`.
pub fn build_hamiltonian_with_potential(
    spec: &ChainSpec,
    basis: &FockBasis,
    potential: &[f64],
) -> Result<Mat<f64>> {
    check_sector(spec, basis)?;
    if potential.len() != spec.sites {
        return Err(Error::LengthMismatch {
            expected: spec.sites,
            found: potential.len(),
        });
    }
    let dim = basis.dim();
    let mut h = Mat::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let onsite: f64 = (0..spec.sites)
            .map(|i| potential[i] * basis.site_density(k, i) as f64)
            .sum();
        h[(k, k)] = onsite + spec.interaction * basis.doubly_occupied(k) as f64;
        for (t, s) in config_hops(basis, spec.boundary, k) {
            h[(t, k)] += -spec.hopping * s;
        }
    }
    Ok(h)
}

/// Transformation of a block under the up/down exchange of all spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// No symmetry reduction: the block is the whole sector.
    None,
    Even,
    Odd,
}

/// One symmetry block of a sector. Every block state is either a single
/// configuration or the (anti)symmetric combination of a configuration
/// and its spin-flipped partner; both share the same site occupations, so
/// all density operators are diagonal in the block basis.
#[derive(Debug, Clone)]
pub struct BlockLayout {
    parity: Parity,
    sites: usize,
    /// Representative configuration index of each block state.
    members: Vec<usize>,
    /// Site occupations of each block state, row-major `states × sites`.
    occupations: Vec<u8>,
    doubles: Vec<u32>,
    /// Hopping matrix in units of `J`, as `(row, col, value)` triplets.
    hops: Vec<(usize, usize, f64)>,
}

impl BlockLayout {
    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn occupation(&self, state: usize, site: usize) -> u8 {
        self.occupations[state * self.sites + site]
    }

    pub fn occupations(&self, state: usize) -> &[u8] {
        &self.occupations[state * self.sites..(state + 1) * self.sites]
    }

    /// Representative Fock configuration of a block state.
    pub fn representative(&self, state: usize) -> usize {
        self.members[state]
    }

    /// Eigenvalue of `Σ_i d_i n_i` on every block state.
    pub fn diagonal_of(&self, site_weights: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|s| {
                self.occupations(s)
                    .iter()
                    .zip(site_weights)
                    .map(|(&n, &d)| n as f64 * d)
                    .sum()
            })
            .collect()
    }

    pub fn matrix(&self, hopping: f64, interaction: f64, potential: &[f64]) -> Mat<f64> {
        let n = self.len();
        let onsite = self.diagonal_of(potential);
        let mut h = Mat::<f64>::zeros(n, n);
        for s in 0..n {
            h[(s, s)] = onsite[s] + interaction * self.doubles[s] as f64;
        }
        for &(r, c, v) in &self.hops {
            h[(r, c)] += hopping * v;
        }
        h
    }
}

/// A sector split into spin-flip symmetry blocks (when `N_up = N_down`).
#[derive(Debug, Clone)]
pub struct SectorLayout {
    basis: FockBasis,
    boundary: Boundary,
    blocks: Vec<BlockLayout>,
}

impl SectorLayout {
    /// Builds the block structure. With `reduce` false, or for unequal
    /// spin populations, the layout is a single block equal to the basis.
    pub fn new(basis: FockBasis, boundary: Boundary, reduce: bool) -> Result<Self> {
        if basis.dim() > MAX_EXACT_DIM {
            return Err(Error::SectorTooLarge {
                dim: basis.dim(),
                limit: MAX_EXACT_DIM,
            });
        }
        let blocks = if reduce && basis.n_up == basis.n_down {
            vec![
                spin_flip_block(&basis, boundary, Parity::Even),
                spin_flip_block(&basis, boundary, Parity::Odd),
            ]
        } else {
            vec![trivial_block(&basis, boundary)]
        };
        Ok(SectorLayout {
            basis,
            boundary,
            blocks: blocks.into_iter().filter(|b| !b.is_empty()).collect(),
        })
    }

    pub fn for_spec(spec: &ChainSpec) -> Result<Self> {
        spec.validate()?;
        let basis = build_fock_basis(spec.sites, spec.n_up, spec.n_down)?;
        SectorLayout::new(basis, spec.boundary, true)
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn blocks(&self) -> &[BlockLayout] {
        &self.blocks
    }

    pub fn sites(&self) -> usize {
        self.basis.sites
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(BlockLayout::len).sum()
    }
}

fn block_from_members(
    basis: &FockBasis,
    boundary: Boundary,
    parity: Parity,
    members: Vec<Vec<(usize, f64)>>,
) -> BlockLayout {
    let sites = basis.sites;
    // config -> (block state, coefficient)
    let mut lookup: Vec<Option<(usize, f64)>> = vec![None; basis.dim()];
    for (s, m) in members.iter().enumerate() {
        for &(k, a) in m {
            lookup[k] = Some((s, a));
        }
    }
    let mut hops = Vec::new();
    for (col, m) in members.iter().enumerate() {
        for &(k, a) in m {
            for (t, sign) in config_hops(basis, boundary, k) {
                if let Some((row, b)) = lookup[t] {
                    hops.push((row, col, -sign * a * b));
                }
            }
        }
    }
    let mut occupations = Vec::with_capacity(members.len() * sites);
    let mut doubles = Vec::with_capacity(members.len());
    let reps: Vec<usize> = members.iter().map(|m| m[0].0).collect();
    for &k in &reps {
        occupations.extend((0..sites).map(|i| basis.site_density(k, i)));
        doubles.push(basis.doubly_occupied(k));
    }
    BlockLayout {
        parity,
        sites,
        members: reps,
        occupations,
        doubles,
        hops,
    }
}

fn trivial_block(basis: &FockBasis, boundary: Boundary) -> BlockLayout {
    let members = (0..basis.dim()).map(|k| vec![(k, 1.0)]).collect();
    block_from_members(basis, boundary, Parity::None, members)
}

fn spin_flip_block(basis: &FockBasis, boundary: Boundary, parity: Parity) -> BlockLayout {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut members = Vec::new();
    for k in 0..basis.dim() {
        let (u, d) = basis.config(k);
        let partner = basis
            .index_of(d, u)
            .expect("spin flip stays inside an N_up = N_down sector");
        if partner == k {
            if parity == Parity::Even {
                members.push(vec![(k, 1.0)]);
            }
        } else if k < partner {
            let sign = if parity == Parity::Even { 1.0 } else { -1.0 };
            members.push(vec![(k, r), (partner, sign * r)]);
        }
    }
    block_from_members(basis, boundary, parity, members)
}

/// Writes a matrix as `row col value` triplets (0-based indices, nonzero
/// entries only) after a `# dim=... L=... Nup=... Ndown=...` header.
pub fn write_matrix_triplets<W: Write>(
    out: &mut W,
    matrix: &Mat<f64>,
    basis: &FockBasis,
) -> Result<()> {
    writeln!(
        out,
        "# dim={} L={} Nup={} Ndown={}",
        matrix.nrows(),
        basis.sites,
        basis.n_up,
        basis.n_down
    )?;
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            let v = matrix[(r, c)];
            if v != 0.0 {
                writeln!(out, "{r} {c} {v:.16e}")?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dimer(u: f64, v1: f64, v2: f64, j: f64) -> ChainSpec {
        ChainSpec {
            sites: 2,
            hopping: j,
            interaction: u,
            shape: PotentialShape::Custom(vec![v1, v2]),
            amplitude: 1.0,
            n_up: 1,
            n_down: 1,
            boundary: Boundary::Open,
        }
    }

    #[test]
    fn potential_examples() {
        assert_eq!(build_potential(&PotentialShape::Linear, 2, 5.0).unwrap(), vec![5.0, -5.0]);
        assert_eq!(
            build_potential(&PotentialShape::Harmonic, 3, 2.0).unwrap(),
            vec![1.0, 0.0, 1.0]
        );
        assert_eq!(build_potential(&PotentialShape::Uniform, 4, 0.3).unwrap(), vec![0.3; 4]);
    }

    #[test]
    fn potential_errors() {
        assert!(matches!(
            build_potential(&PotentialShape::Linear, 1, 1.0),
            Err(Error::LinearNeedsTwoSites)
        ));
        assert!(matches!(
            build_potential(&PotentialShape::Custom(vec![1.0, 2.0]), 3, 1.0),
            Err(Error::LengthMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn shape_identities() {
        for l in 2..=20 {
            let f = PotentialShape::Linear.factors(l).unwrap();
            assert!(f.iter().sum::<f64>().abs() < 1e-12);
            let h = PotentialShape::Harmonic.factors(l).unwrap();
            for i in 0..l {
                assert_eq!(h[i], h[l - 1 - i]);
            }
        }
    }

    #[test]
    fn shape_parse_round_trip() {
        for s in ["linear", "harmonic", "uniform", "custom:1;-0.5;2"] {
            let shape: PotentialShape = s.parse().unwrap();
            assert_eq!(shape.to_string(), s);
        }
        assert!("wobbly".parse::<PotentialShape>().is_err());
    }

    #[test]
    fn basis_dimensions() {
        assert_eq!(build_fock_basis(2, 1, 1).unwrap().dim(), 4);
        assert_eq!(build_fock_basis(8, 4, 4).unwrap().dim(), 4900);
        assert_eq!(build_fock_basis(1, 1, 1).unwrap().dim(), 1);
        assert!(build_fock_basis(3, 4, 1).is_err());
    }

    #[test]
    fn basis_is_ordered_and_exhaustive() {
        let b = build_fock_basis(6, 2, 3).unwrap();
        let configs: Vec<_> = b.configs().collect();
        assert_eq!(configs.len(), 15 * 20);
        for w in configs.windows(2) {
            assert!(w[0] < w[1]);
        }
        for (k, &(u, d)) in configs.iter().enumerate() {
            assert_eq!(u.count_ones(), 2);
            assert_eq!(d.count_ones(), 3);
            assert_eq!(b.index_of(u, d), Some(k));
            let total: u32 = (0..6).map(|i| b.site_density(k, i) as u32).sum();
            assert_eq!(total, 5);
        }
    }

    #[test]
    fn hamiltonian_is_symmetric() {
        let spec = ChainSpec {
            boundary: Boundary::Periodic,
            n_up: 2,
            n_down: 1,
            ..ChainSpec::half_filled(4, 2.5, PotentialShape::Linear, 1.3).unwrap()
        };
        let basis = build_fock_basis(4, 2, 1).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        for r in 0..h.nrows() {
            for c in 0..h.ncols() {
                assert_eq!(h[(r, c)], h[(c, r)]);
            }
        }
    }

    #[test]
    fn dimer_diagonal_and_hops() {
        let spec = dimer(3.0, 0.7, -0.4, 1.0);
        let basis = build_fock_basis(2, 1, 1).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        // configs: (up=01, dn=01) (01,10) (10,01) (10,10): site 0 is bit 0
        assert_eq!(h[(0, 0)], 3.0 + 2.0 * 0.7);
        assert_eq!(h[(1, 1)], 0.7 - 0.4);
        assert_eq!(h[(2, 2)], 0.7 - 0.4);
        assert_eq!(h[(3, 3)], 3.0 - 0.8);
        let off: Vec<f64> = [(0, 1), (0, 2), (1, 3), (2, 3), (0, 3), (1, 2)]
            .iter()
            .map(|&(r, c)| h[(r, c)])
            .collect();
        assert_eq!(off, vec![-1.0, -1.0, -1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn triplet_dump_header() {
        let spec = dimer(1.0, 0.0, 0.0, 1.0);
        let basis = build_fock_basis(2, 1, 1).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let mut buf = Vec::new();
        write_matrix_triplets(&mut buf, &h, &basis).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# dim=4 L=2 Nup=1 Ndown=1"));
        assert_eq!(lines.count(), 2 + 8);
    }

    #[test]
    fn block_layout_covers_sector() {
        for (l, nu, nd) in [(2, 1, 1), (4, 2, 2), (6, 3, 3), (4, 1, 2)] {
            let basis = build_fock_basis(l, nu, nd).unwrap();
            let dim = basis.dim();
            let layout = SectorLayout::new(basis, Boundary::Open, true).unwrap();
            assert_eq!(layout.dim(), dim);
            let expected_blocks = if nu == nd { 2 } else { 1 };
            assert_eq!(layout.blocks().len(), expected_blocks);
        }
    }

    #[test]
    fn block_matrices_are_symmetric() {
        let spec = ChainSpec::half_filled(4, 2.0, PotentialShape::Linear, 1.5).unwrap();
        let layout = SectorLayout::for_spec(&spec).unwrap();
        let v = spec.potential().unwrap();
        for block in layout.blocks() {
            let h = block.matrix(1.0, 2.0, &v);
            for r in 0..h.nrows() {
                for c in 0..h.ncols() {
                    assert!((h[(r, c)] - h[(c, r)]).abs() < 1e-15);
                }
            }
        }
    }
}
