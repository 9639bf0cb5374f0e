//! Exact diagonalization, Gibbs states, thermal densities and free energies.
//!
//! Spectra are kept per spin-flip block (see [`crate::lattice::SectorLayout`]);
//! every trace over the sector is a sum over blocks. All exponentials are
//! taken after shifting by the lowest eigenvalue of the whole sector.

use std::sync::Arc;

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::lattice::{ChainSpec, SectorLayout};

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending,
/// column `k` of `eigenvectors` belonging to `eigenvalues[k]`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Mat<f64>,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

const RESIDUAL_TOL: f64 = 1e-10;
/// Columns whose residual is checked after each decomposition.
const RESIDUAL_SAMPLES: usize = 24;

pub fn diagonalize(h: &Mat<f64>) -> Result<SpectralData> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.ncols(),
        });
    }
    if n == 0 {
        return Ok(SpectralData {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }
    let mut scale = 0.0f64;
    for c in 0..n {
        for r in 0..n {
            let v = h[(r, c)];
            if !v.is_finite() {
                return Err(Error::Eigensolver(format!("non-finite entry at ({r}, {c})")));
            }
            scale = scale.max(v.abs());
        }
    }
    for c in 0..n {
        for r in (c + 1)..n {
            if (h[(r, c)] - h[(c, r)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Eigensolver(format!("matrix is not symmetric at ({r}, {c})")));
            }
        }
    }
    let eig = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let eigenvalues: Vec<f64> = (0..n).map(|k| s[k]).collect();
    let eigenvectors = eig.U().to_owned();

    // Spot-check the residual on a deterministic subset of columns.
    let norm = scale.max(f64::MIN_POSITIVE) * n as f64;
    let stride = (n / RESIDUAL_SAMPLES).max(1);
    for k in (0..n).step_by(stride).chain(std::iter::once(n - 1)) {
        let mut worst = 0.0f64;
        for r in 0..n {
            let mut acc = -eigenvalues[k] * eigenvectors[(r, k)];
            for c in 0..n {
                acc += h[(r, c)] * eigenvectors[(c, k)];
            }
            worst = worst.max(acc.abs());
        }
        if worst > RESIDUAL_TOL * norm {
            return Err(Error::Eigensolver(format!(
                "residual {worst:e} for eigenpair {k} exceeds tolerance"
            )));
        }
    }
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
    })
}

/// Spectra of every symmetry block of a sector Hamiltonian.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    layout: Arc<SectorLayout>,
    blocks: Vec<SpectralData>,
}

impl EigenSystem {
    pub fn solve(
        layout: &Arc<SectorLayout>,
        hopping: f64,
        interaction: f64,
        potential: &[f64],
    ) -> Result<Self> {
        if potential.len() != layout.sites() {
            return Err(Error::LengthMismatch {
                expected: layout.sites(),
                found: potential.len(),
            });
        }
        let blocks = layout
            .blocks()
            .iter()
            .map(|b| diagonalize(&b.matrix(hopping, interaction, potential)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EigenSystem {
            layout: Arc::clone(layout),
            blocks,
        })
    }

    pub fn layout(&self) -> &Arc<SectorLayout> {
        &self.layout
    }

    pub fn blocks(&self) -> &[SpectralData] {
        &self.blocks
    }

    pub fn ground_energy(&self) -> f64 {
        self.blocks
            .iter()
            .filter_map(|b| b.eigenvalues.first().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues of the sector, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.eigenvalues.iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Whether both systems were built on the same block layout.
    pub fn same_layout(&self, other: &EigenSystem) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
            || (self.layout.basis() == other.layout.basis()
                && self.layout.boundary() == other.layout.boundary()
                && self.blocks.len() == other.blocks.len()
                && self
                    .blocks
                    .iter()
                    .zip(&other.blocks)
                    .all(|(a, b)| a.dim() == b.dim()))
    }
}

/// Per-site thermal densities `n_i = Tr{ρ n_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub n: Vec<f64>,
}

impl DensityProfile {
    pub fn new(n: Vec<f64>) -> Self {
        DensityProfile { n }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.n.iter().sum()
    }
}

/// Canonical Gibbs state of a diagonalized sector.
#[derive(Debug, Clone)]
pub struct ThermalEquilibrium {
    pub beta: f64,
    pub log_z: f64,
    /// Boltzmann probabilities, one vector per block in eigenvalue order.
    pub probs: Vec<Vec<f64>>,
    pub free_energy: f64,
    pub densities: DensityProfile,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

/// `(log Z, p_n)` for a list of levels with the minimum shifted out first.
pub fn boltzmann_weights(levels: &[f64], beta: f64) -> Result<(f64, Vec<f64>)> {
    check_beta(beta)?;
    let e0 = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = levels.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(((z.ln()) - beta * e0, w.into_iter().map(|x| x / z).collect()))
}

/// Log partition function of a sector from its eigenvalues alone.
pub fn log_partition(system: &EigenSystem, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let e0 = system.ground_energy();
    let z: f64 = system
        .blocks
        .iter()
        .flat_map(|b| b.eigenvalues.iter())
        .map(|e| (-beta * (e - e0)).exp())
        .sum();
    Ok(z.ln() - beta * e0)
}

pub fn gibbs(system: &EigenSystem, beta: f64) -> Result<ThermalEquilibrium> {
    check_beta(beta)?;
    let e0 = system.ground_energy();
    let mut probs: Vec<Vec<f64>> = system
        .blocks
        .iter()
        .map(|b| b.eigenvalues.iter().map(|e| (-beta * (e - e0)).exp()).collect())
        .collect();
    let z: f64 = probs.iter().flatten().sum();
    for p in probs.iter_mut().flatten() {
        *p /= z;
    }
    let log_z = z.ln() - beta * e0;
    let mut eq = ThermalEquilibrium {
        beta,
        log_z,
        probs,
        free_energy: -log_z / beta,
        densities: DensityProfile::new(Vec::new()),
    };
    eq.densities = thermal_density(&eq, system)?;
    Ok(eq)
}

/// Diagonal of the Gibbs state in each block basis: `Σ_n p_n |U_bn|^2`.
pub fn state_weights(eq: &ThermalEquilibrium, system: &EigenSystem) -> Result<Vec<Vec<f64>>> {
    if eq.probs.len() != system.blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: system.blocks.len(),
            found: eq.probs.len(),
        });
    }
    system
        .blocks
        .iter()
        .zip(&eq.probs)
        .map(|(spec, p)| {
            let d = spec.dim();
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.len(),
                });
            }
            let u = &spec.eigenvectors;
            let mut w = vec![0.0; d];
            for (n, &pn) in p.iter().enumerate() {
                if pn == 0.0 {
                    continue;
                }
                let col = u.col(n);
                for (b, wb) in w.iter_mut().enumerate() {
                    let a = col[b];
                    *wb += pn * a * a;
                }
            }
            Ok(w)
        })
        .collect()
}

pub fn thermal_density(eq: &ThermalEquilibrium, system: &EigenSystem) -> Result<DensityProfile> {
    let weights = state_weights(eq, system)?;
    let sites = system.layout.sites();
    let mut n = vec![0.0; sites];
    for (block, w) in system.layout.blocks().iter().zip(&weights) {
        for (s, &ws) in w.iter().enumerate() {
            for (i, &occ) in block.occupations(s).iter().enumerate() {
                n[i] += ws * occ as f64;
            }
        }
    }
    Ok(DensityProfile::new(n))
}

/// Thermal expectation of `(Σ_i d_i n_i)^k`. The operator is diagonal in
/// every block basis, so this is a weighted sum over block states.
pub fn diagonal_moment(
    eq: &ThermalEquilibrium,
    system: &EigenSystem,
    site_weights: &[f64],
    k: i32,
) -> Result<f64> {
    if site_weights.len() != system.layout.sites() {
        return Err(Error::LengthMismatch {
            expected: system.layout.sites(),
            found: site_weights.len(),
        });
    }
    let weights = state_weights(eq, system)?;
    Ok(system
        .layout
        .blocks()
        .iter()
        .zip(&weights)
        .map(|(block, w)| {
            block
                .diagonal_of(site_weights)
                .iter()
                .zip(w)
                .map(|(d, ws)| ws * d.powi(k))
                .sum::<f64>()
        })
        .sum())
}

/// A chain prepared for repeated exact solves at different potentials.
#[derive(Debug, Clone)]
pub struct ExactChain {
    spec: ChainSpec,
    layout: Arc<SectorLayout>,
}

impl ExactChain {
    pub fn new(spec: &ChainSpec) -> Result<Self> {
        Ok(ExactChain {
            spec: spec.clone(),
            layout: Arc::new(SectorLayout::for_spec(spec)?),
        })
    }

    pub fn spec(&self) -> &ChainSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<SectorLayout> {
        &self.layout
    }

    pub fn solve(&self, potential: &[f64]) -> Result<EigenSystem> {
        EigenSystem::solve(
            &self.layout,
            self.spec.hopping,
            self.spec.interaction,
            potential,
        )
    }

    pub fn thermal(&self, potential: &[f64], beta: f64) -> Result<(EigenSystem, ThermalEquilibrium)> {
        let sys = self.solve(potential)?;
        let eq = gibbs(&sys, beta)?;
        Ok((sys, eq))
    }

    pub fn densities(&self, potential: &[f64], beta: f64) -> Result<DensityProfile> {
        Ok(self.thermal(potential, beta)?.1.densities)
    }

    /// Central-difference derivative of the densities along `direction`,
    /// `Σ_j (∂n_i/∂V_j) d_j`. The uniform part of `direction` is dropped
    /// (a constant shift leaves canonical densities unchanged) and the
    /// step moves the largest remaining component by `h`.
    pub fn response_along(
        &self,
        potential: &[f64],
        beta: f64,
        direction: &[f64],
        h: f64,
    ) -> Result<Vec<f64>> {
        directional_fd(potential, &without_mean(direction), h, |v| {
            self.densities(v, beta).map(|d| d.n)
        })
    }

    /// Full `L × L` matrix `∂n_i/∂V_j` by central differences.
    pub fn response_matrix(&self, potential: &[f64], beta: f64, h: f64) -> Result<Mat<f64>> {
        check_step(h)?;
        let l = self.spec.sites;
        let mut r = Mat::<f64>::zeros(l, l);
        for j in 0..l {
            let mut plus = potential.to_vec();
            let mut minus = potential.to_vec();
            plus[j] += h;
            minus[j] -= h;
            let np = self.densities(&plus, beta)?;
            let nm = self.densities(&minus, beta)?;
            for i in 0..l {
                r[(i, j)] = (np.n[i] - nm.n[i]) / (2.0 * h);
            }
        }
        Ok(r)
    }
}

/// `d − mean(d)`, exactly zero when `d` is uniform.
pub(crate) fn without_mean(d: &[f64]) -> Vec<f64> {
    if d.is_empty() {
        return Vec::new();
    }
    let first = d[0];
    if d.iter().all(|&x| x == first) {
        return vec![0.0; d.len()];
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| x - mean).collect()
}

pub(crate) fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidStep(h))
    }
}

/// Central difference of a vector-valued map along a direction, scaled so
/// the result approximates the directional derivative along `direction`
/// itself (not its normalization).
pub(crate) fn directional_fd<F>(
    point: &[f64],
    direction: &[f64],
    h: f64,
    mut f: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    check_step(h)?;
    if direction.len() != point.len() {
        return Err(Error::LengthMismatch {
            expected: point.len(),
            found: direction.len(),
        });
    }
    let scale = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if scale == 0.0 {
        return Ok(vec![0.0; point.len()]);
    }
    let plus: Vec<f64> = point
        .iter()
        .zip(direction)
        .map(|(p, d)| p + h * d / scale)
        .collect();
    let minus: Vec<f64> = point
        .iter()
        .zip(direction)
        .map(|(p, d)| p - h * d / scale)
        .collect();
    let fp = f(&plus)?;
    let fm = f(&minus)?;
    Ok(fp
        .iter()
        .zip(&fm)
        .map(|(a, b)| scale * (a - b) / (2.0 * h))
        .collect())
}

/// Diagonalize the sector of `spec` and build its Gibbs state.
pub fn exact_thermal(spec: &ChainSpec, beta: f64) -> Result<(EigenSystem, ThermalEquilibrium)> {
    let chain = ExactChain::new(spec)?;
    chain.thermal(&spec.potential()?, beta)
}

pub fn density_response(spec: &ChainSpec, beta: f64, h: f64) -> Result<Mat<f64>> {
    check_step(h)?;
    check_beta(beta)?;
    let chain = ExactChain::new(spec)?;
    chain.response_matrix(&spec.potential()?, beta, h)
}

pub fn free_energy_difference(initial: &ChainSpec, fin: &ChainSpec, beta: f64) -> Result<f64> {
    if !initial.same_sector(fin) {
        return Err(Error::SectorMismatch);
    }
    let chain = ExactChain::new(initial)?;
    let f0 = chain.solve(&initial.potential()?)?;
    let ff = EigenSystem::solve(chain.layout(), fin.hopping, fin.interaction, &fin.potential()?)?;
    Ok(-(log_partition(&ff, beta)? - log_partition(&f0, beta)?) / beta)
}
