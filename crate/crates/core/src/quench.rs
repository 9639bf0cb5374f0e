//! Work and entropy statistics of sudden potential quenches.
//!
//! A sudden quench replaces `H_0` by `H_f = H_0 + Σ_i δV_i n_i` with the
//! evolution operator reducing to the identity, so the two energy
//! measurements give outcome `w = ε_m(f) − ε_n(0)` with probability
//! `p_n |⟨m_f|n_0⟩|^2`.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exact::{
    check_beta, check_step, diagonal_moment, gibbs, log_partition, DensityProfile, EigenSystem,
    ExactChain, ThermalEquilibrium,
};
use crate::lattice::ChainSpec;

/// Work values closer than this are reported as one outcome.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Transitions with squared overlap below this are treated as rounding
/// noise and dropped from outcome tables.
pub const OVERLAP_FLOOR: f64 = 1e-26;

/// Largest sector for which full outcome tables are built.
pub const PDW_MAX_DIM: usize = 1024;

/// Default step of the finite-difference density response.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct QuenchSpec {
    pub initial: ChainSpec,
    pub dv0: f64,
    pub beta: f64,
}

impl QuenchSpec {
    pub fn new(initial: ChainSpec, dv0: f64, beta: f64) -> Result<Self> {
        initial.validate()?;
        check_beta(beta)?;
        if !dv0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dv0",
                reason: format!("quench amplitude must be finite, got {dv0}"),
            });
        }
        Ok(QuenchSpec { initial, dv0, beta })
    }

    pub fn final_spec(&self) -> ChainSpec {
        self.initial.with_amplitude(self.initial.amplitude + self.dv0)
    }

    /// `δV_i = f_i δv0`.
    pub fn deltas(&self) -> Result<Vec<f64>> {
        Ok(self.initial.factors()?.iter().map(|f| f * self.dv0).collect())
    }

    /// Post-quench potential `V_i + δV_i`.
    pub fn final_potential(&self) -> Result<Vec<f64>> {
        let v = self.initial.potential()?;
        Ok(v.iter().zip(self.deltas()?).map(|(a, d)| a + d).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkOutcome {
    pub w: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct WorkDistribution {
    pub outcomes: Vec<WorkOutcome>,
    pub delta_f: f64,
    pub beta: f64,
}

impl WorkDistribution {
    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.p).sum()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.outcomes.iter().map(|o| o.p * o.w.powi(k)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2) - m * m
    }

    /// `|⟨e^{-β(w − ΔF)}⟩ − 1|`.
    pub fn jarzynski_residual(&self) -> f64 {
        let s: f64 = self
            .outcomes
            .iter()
            .map(|o| o.p * (-self.beta * (o.w - self.delta_f)).exp())
            .sum();
        (s - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyOutcome {
    pub s: f64,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct EntropyDistribution {
    pub outcomes: Vec<EntropyOutcome>,
}

impl EntropyDistribution {
    pub fn moment(&self, k: i32) -> f64 {
        self.outcomes.iter().map(|o| o.p * o.s.powi(k)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }
}

fn check_pair(sys0: &EigenSystem, sysf: &EigenSystem, eq0: &ThermalEquilibrium) -> Result<()> {
    if !sys0.same_layout(sysf) {
        return Err(Error::SectorMismatch);
    }
    if eq0.probs.len() != sys0.blocks().len() {
        return Err(Error::DimensionMismatch {
            expected: sys0.blocks().len(),
            found: eq0.probs.len(),
        });
    }
    Ok(())
}

/// Visit every transition `(log p_n, w, |O_mn|^2)` block by block.
fn for_each_transition<F>(sys0: &EigenSystem, sysf: &EigenSystem, beta: f64, mut visit: F) -> Result<()>
where
    F: FnMut(f64, f64, f64),
{
    let log_z = log_partition(sys0, beta)?;
    for (b0, bf) in sys0.blocks().iter().zip(sysf.blocks()) {
        let overlap: Mat<f64> = bf.eigenvectors.transpose() * &b0.eigenvectors;
        for (n, &e0) in b0.eigenvalues.iter().enumerate() {
            let log_p = -beta * e0 - log_z;
            let col = overlap.col(n);
            for (m, &ef) in bf.eigenvalues.iter().enumerate() {
                let o = col[m];
                visit(log_p, ef - e0, o * o);
            }
        }
    }
    Ok(())
}

/// Full two-point-measurement outcome table, with the default merge
/// tolerance.
pub fn work_distribution(
    sys0: &EigenSystem,
    sysf: &EigenSystem,
    eq0: &ThermalEquilibrium,
) -> Result<WorkDistribution> {
    work_distribution_with(sys0, sysf, eq0, MERGE_TOLERANCE)
}

pub fn work_distribution_with(
    sys0: &EigenSystem,
    sysf: &EigenSystem,
    eq0: &ThermalEquilibrium,
    merge_tolerance: f64,
) -> Result<WorkDistribution> {
    check_pair(sys0, sysf, eq0)?;
    if sys0.dim() > PDW_MAX_DIM {
        return Err(Error::InvalidParameter {
            name: "sector",
            reason: format!(
                "outcome tables are limited to dimension {PDW_MAX_DIM}, got {}",
                sys0.dim()
            ),
        });
    }
    let beta = eq0.beta;
    let delta_f = -(log_partition(sysf, beta)? - eq0.log_z) / beta;
    let mut raw = Vec::new();
    for_each_transition(sys0, sysf, beta, |log_p, w, o2| {
        if o2 > OVERLAP_FLOOR {
            raw.push(WorkOutcome {
                w,
                p: log_p.exp() * o2,
            });
        }
    })?;
    raw.sort_by(|a, b| a.w.total_cmp(&b.w));

    let mut outcomes: Vec<WorkOutcome> = Vec::new();
    let mut start = f64::NAN;
    for o in raw {
        match outcomes.last_mut() {
            Some(last) if o.w - start <= merge_tolerance => {
                let p = last.p + o.p;
                if p > 0.0 {
                    last.w = (last.w * last.p + o.w * o.p) / p;
                }
                last.p = p;
            }
            _ => {
                start = o.w;
                outcomes.push(o);
            }
        }
    }
    Ok(WorkDistribution {
        outcomes,
        delta_f,
        beta,
    })
}

/// Moments of the work distribution accumulated without storing outcomes.
#[derive(Debug, Clone, Copy)]
pub struct WorkSummary {
    pub total_probability: f64,
    pub mean: f64,
    pub second: f64,
    pub delta_f: f64,
    pub jarzynski_residual: f64,
}

pub fn work_summary(
    sys0: &EigenSystem,
    sysf: &EigenSystem,
    eq0: &ThermalEquilibrium,
) -> Result<WorkSummary> {
    check_pair(sys0, sysf, eq0)?;
    let beta = eq0.beta;
    let delta_f = -(log_partition(sysf, beta)? - eq0.log_z) / beta;
    let (mut total, mut mean, mut second, mut jar) = (0.0, 0.0, 0.0, 0.0);
    for_each_transition(sys0, sysf, beta, |log_p, w, o2| {
        let p = log_p.exp() * o2;
        total += p;
        mean += p * w;
        second += p * w * w;
        jar += (log_p - beta * (w - delta_f)).exp() * o2;
    })?;
    Ok(WorkSummary {
        total_probability: total,
        mean,
        second,
        delta_f,
        jarzynski_residual: (jar - 1.0).abs(),
    })
}

/// `χ(ν) = Σ p e^{iνw}`.
pub fn characteristic_function(dist: &WorkDistribution, nu: &[f64]) -> Vec<Complex64> {
    nu.iter()
        .map(|&v| {
            dist.outcomes
                .iter()
                .map(|o| Complex64::from_polar(o.p, v * o.w))
                .sum()
        })
        .collect()
}

/// Outcomes of `s = β(w − ΔF)`.
pub fn entropy_distribution(dist: &WorkDistribution) -> EntropyDistribution {
    EntropyDistribution {
        outcomes: dist
            .outcomes
            .iter()
            .map(|o| EntropyOutcome {
                s: dist.beta * o.w - dist.beta * dist.delta_f,
                p: o.p,
            })
            .collect(),
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨w⟩ = Σ_i δV_i n_i`. Extracted work is `−⟨w⟩`.
pub fn avg_work_functional(n0: &DensityProfile, deltas: &[f64]) -> Result<f64> {
    check_len(n0.len(), deltas.len())?;
    Ok(dot(&n0.n, deltas))
}

/// `R δV` for a full response matrix `R_ij = ∂n_i/∂V_j`.
pub fn project_response(response: &Mat<f64>, deltas: &[f64]) -> Result<Vec<f64>> {
    check_len(response.ncols(), deltas.len())?;
    Ok((0..response.nrows())
        .map(|i| (0..deltas.len()).map(|j| response[(i, j)] * deltas[j]).sum())
        .collect())
}

/// `⟨S_irr⟩ = −(β/2) δV·RδV`, given the projected response `RδV`.
pub fn sirr_functional(projected: &[f64], deltas: &[f64], beta: f64) -> Result<f64> {
    check_len(deltas.len(), projected.len())?;
    Ok(-0.5 * beta * dot(deltas, projected))
}

/// Matrix form of [`sirr_functional`].
pub fn sirr_from_matrix(response: &Mat<f64>, deltas: &[f64], beta: f64) -> Result<f64> {
    sirr_functional(&project_response(response, deltas)?, deltas, beta)
}

/// `⟨w²⟩_c = (Σ δV_i n_i)² − (1/β) δV·RδV`.
pub fn w2_commuting(n0: &DensityProfile, projected: &[f64], deltas: &[f64], beta: f64) -> Result<f64> {
    check_len(n0.len(), deltas.len())?;
    check_len(deltas.len(), projected.len())?;
    let w = dot(&n0.n, deltas);
    Ok(w * w - dot(deltas, projected) / beta)
}

/// `Θ₂ = Tr{(ΔH)² ρ_0} − ⟨w²⟩_c`, with `ΔH = Σ δV_i n_i`.
pub fn theta2_exact(
    sys0: &EigenSystem,
    eq0: &ThermalEquilibrium,
    deltas: &[f64],
    w2_c: f64,
) -> Result<f64> {
    Ok(diagonal_moment(eq0, sys0, deltas, 2)? - w2_c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentsReport {
    /// First moment of the work distribution.
    pub mean_w: f64,
    /// `Σ δV_i n_i`.
    pub mean_w_functional: f64,
    /// `Tr{(ΔH)² ρ_0}`.
    pub w2: f64,
    /// Second moment of the work distribution.
    pub w2_pdw: f64,
    pub var_w: f64,
    pub w2_c: f64,
    pub theta2: f64,
    /// `β(⟨w⟩ − ΔF)`.
    pub s_irr_exact: f64,
    pub s_irr_functional: f64,
    pub delta_f: f64,
    pub jarzynski_residual: f64,
    pub fdr_residual: f64,
    pub beta: f64,
}

impl MomentsReport {
    pub fn extracted_work(&self) -> f64 {
        -self.mean_w
    }
}

/// `⟨S_irr⟩ − (β²/2)(σ²_w − Θ₂)`.
pub fn fdr_residual(report: &MomentsReport) -> f64 {
    report.s_irr_exact - 0.5 * report.beta * report.beta * (report.var_w - report.theta2)
}

/// Densities and moments of one exactly solved quench.
#[derive(Debug, Clone)]
pub struct QuenchAnalysis {
    pub densities: DensityProfile,
    /// `∂n_i/∂v0 = Σ_j R_ij f_j` at the initial amplitude.
    pub amplitude_response: Vec<f64>,
    pub moments: MomentsReport,
}

/// Every moment of a quench from exact diagonalization.
pub fn exact_quench(quench: &QuenchSpec, fd_step: f64) -> Result<QuenchAnalysis> {
    check_step(fd_step)?;
    let chain = ExactChain::new(&quench.initial)?;
    exact_quench_on(&chain, quench, fd_step)
}

/// [`exact_quench`] on a prepared chain with the same sector.
pub fn exact_quench_on(chain: &ExactChain, quench: &QuenchSpec, fd_step: f64) -> Result<QuenchAnalysis> {
    check_step(fd_step)?;
    if !chain.spec().same_sector(&quench.initial) {
        return Err(Error::SectorMismatch);
    }
    let beta = quench.beta;
    let v0 = quench.initial.potential()?;
    let deltas = quench.deltas()?;
    let sys0 = chain.solve(&v0)?;
    let eq0 = gibbs(&sys0, beta)?;
    let sysf = chain.solve(&quench.final_potential()?)?;
    let summary = work_summary(&sys0, &sysf, &eq0)?;
    let amplitude_response = chain.response_along(&v0, beta, &quench.initial.factors()?, fd_step)?;
    let projected: Vec<f64> = amplitude_response.iter().map(|r| r * quench.dv0).collect();

    let mean_w_functional = avg_work_functional(&eq0.densities, &deltas)?;
    let w2 = diagonal_moment(&eq0, &sys0, &deltas, 2)?;
    let w2_c = w2_commuting(&eq0.densities, &projected, &deltas, beta)?;
    let mut report = MomentsReport {
        mean_w: summary.mean,
        mean_w_functional,
        w2,
        w2_pdw: summary.second,
        var_w: w2 - summary.mean * summary.mean,
        w2_c,
        theta2: w2 - w2_c,
        s_irr_exact: beta * (summary.mean - summary.delta_f),
        s_irr_functional: sirr_functional(&projected, &deltas, beta)?,
        delta_f: summary.delta_f,
        jarzynski_residual: summary.jarzynski_residual,
        fdr_residual: 0.0,
        beta,
    };
    report.fdr_residual = fdr_residual(&report);
    Ok(QuenchAnalysis {
        densities: eq0.densities,
        amplitude_response,
        moments: report,
    })
}
