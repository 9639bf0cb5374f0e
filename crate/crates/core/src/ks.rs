//! Finite-temperature Kohn-Sham scheme in the canonical ensemble.
//!
//! The H-XC potential is the local functional built from an isolated
//! Hubbard site, whose thermal density at potential `v` is
//!
//! ```text
//! n(v) = 2 (x + x² y) / (1 + 2x + x² y),   x = e^{-βv}, y = e^{-βU}.
//! ```
//!
//! Inverting this relation and subtracting the non-interacting inverse
//! `V_ks[n] = −(1/β) ln(n / (2 − n))` gives
//!
//! ```text
//! V_hxc[n] = U + (1/β) ln Γ,   Γ = [δ + sqrt(δ² + e^{-βU} n (2 − n))] / n,   δ = n − 1.
//! ```

use faer::Mat;

use crate::canonical::{solve_canonical, CanonicalTable, SingleParticleSpectrum};
use crate::error::{Error, Result};
use crate::exact::{
    check_beta, check_step, diagonal_moment, directional_fd, gibbs, without_mean, DensityProfile,
    ExactChain,
};
use crate::lattice::{Boundary, ChainSpec, MAX_EXACT_DIM};
use crate::quench::{avg_work_functional, sirr_functional, w2_commuting, QuenchSpec};

/// Default density guard for the H-XC evaluation.
pub const DEFAULT_CLAMP: f64 = 1e-12;

/// Local H-XC functional at fixed `U` and `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HxcFunctional {
    pub interaction: f64,
    pub beta: f64,
    pub clamp: f64,
}

impl HxcFunctional {
    pub fn new(interaction: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if !(interaction.is_finite() && interaction >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "interaction",
                reason: format!("must be finite and non-negative, got {interaction}"),
            });
        }
        Ok(HxcFunctional {
            interaction,
            beta,
            clamp: DEFAULT_CLAMP,
        })
    }

    /// `n` moved into `[ε, 2 − ε]`, and whether it had to move.
    pub fn clamp_density(&self, n: f64) -> Result<(f64, bool)> {
        if !n.is_finite() {
            return Err(Error::NonFiniteDensity(n));
        }
        let c = n.clamp(self.clamp, 2.0 - self.clamp);
        Ok((c, c != n))
    }

    pub fn potential(&self, n: f64) -> Result<f64> {
        let (n, _) = self.clamp_density(n)?;
        if self.interaction == 0.0 {
            return Ok(0.0);
        }
        let delta = n - 1.0;
        if delta == 0.0 {
            return Ok(0.5 * self.interaction);
        }
        let a = -self.beta * self.interaction + (n * (2.0 - n)).ln();
        let ln_num = if delta > 0.0 {
            let s = (delta * delta + a.exp()).sqrt();
            (delta + s).ln()
        } else {
            let s = (delta * delta + a.exp()).sqrt();
            a - (s - delta).ln()
        };
        Ok(self.interaction + (ln_num - n.ln()) / self.beta)
    }
}

/// `V_hxc[n]` with the default clamp.
pub fn hxc_single_site(n: f64, interaction: f64, beta: f64) -> Result<f64> {
    HxcFunctional::new(interaction, beta)?.potential(n)
}

/// Thermal density of an isolated Hubbard site at potential `v`.
pub fn single_site_density(v: f64, interaction: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let a = -beta * v;
    let t1 = std::f64::consts::LN_2 + a;
    let t2 = 2.0 * a - beta * interaction;
    let top = t1.max(t2).max(0.0);
    let (e0, e1, e2) = ((-top).exp(), (t1 - top).exp(), (t2 - top).exp());
    Ok((e1 + 2.0 * e2) / (e0 + e1 + e2))
}

/// Potential of a non-interacting site with thermal density `n`.
pub fn ks_single_site_potential(n: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if !n.is_finite() {
        return Err(Error::NonFiniteDensity(n));
    }
    Ok(-(n.ln() - (2.0 - n).ln()) / beta)
}

/// One-body hopping matrix with diagonal `vks`.
pub fn ks_matrix(vks: &[f64], hopping: f64, boundary: Boundary) -> Mat<f64> {
    let l = vks.len();
    let mut h = Mat::<f64>::zeros(l, l);
    for (i, &v) in vks.iter().enumerate() {
        h[(i, i)] = v;
    }
    for i in 0..l.saturating_sub(1) {
        h[(i, i + 1)] = -hopping;
        h[(i + 1, i)] = -hopping;
    }
    if boundary == Boundary::Periodic && l > 2 {
        h[(0, l - 1)] -= hopping;
        h[(l - 1, 0)] -= hopping;
    }
    h
}

pub fn ks_single_particle(vks: &[f64], hopping: f64, boundary: Boundary) -> Result<SingleParticleSpectrum> {
    if vks.is_empty() {
        return Err(Error::NoSites);
    }
    if let Some(v) = vks.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "vks",
            reason: format!("non-finite potential {v}"),
        });
    }
    SingleParticleSpectrum::from_matrix(&ks_matrix(vks, hopping, boundary))
}

/// Canonical tables of a KS spectrum for both spins.
#[derive(Debug, Clone)]
pub struct KsState {
    pub spectrum: SingleParticleSpectrum,
    pub up: CanonicalTable,
    pub down: CanonicalTable,
    pub densities: DensityProfile,
}

impl KsState {
    pub fn free_energy(&self) -> Result<f64> {
        crate::canonical::canonical_free_energy(&self.up, &self.down)
    }
}

pub fn ks_state(spectrum: SingleParticleSpectrum, n_up: usize, n_down: usize, beta: f64) -> Result<KsState> {
    let up = solve_canonical(&spectrum.eps, n_up, beta)?;
    let down = if n_down == n_up {
        up.clone()
    } else {
        solve_canonical(&spectrum.eps, n_down, beta)?
    };
    let l = spectrum.levels();
    let mut n = vec![0.0; l];
    for k in 0..l {
        let occ = up.occ[k] + down.occ[k];
        if occ == 0.0 {
            continue;
        }
        for (i, ni) in n.iter_mut().enumerate() {
            let a = spectrum.amps[(i, k)];
            *ni += occ * a * a;
        }
    }
    Ok(KsState {
        spectrum,
        up,
        down,
        densities: DensityProfile::new(n),
    })
}

/// `n_i = Σ_k (⟨n_k⟩_↑ + ⟨n_k⟩_↓) |φ_k(i)|²`.
pub fn ks_density(spectrum: &SingleParticleSpectrum, n_up: usize, n_down: usize, beta: f64) -> Result<DensityProfile> {
    if spectrum.amps.nrows() != spectrum.levels() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.levels(),
            found: spectrum.amps.nrows(),
        });
    }
    Ok(ks_state(spectrum.clone(), n_up, n_down, beta)?.densities)
}

fn kohn_sham_densities(spec: &ChainSpec, vks: &[f64], beta: f64) -> Result<(SingleParticleSpectrum, DensityProfile)> {
    let spectrum = ks_single_particle(vks, spec.hopping, spec.boundary)?;
    let n = ks_density(&spectrum, spec.n_up, spec.n_down, beta)?;
    Ok((spectrum, n))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScfInit {
    /// Densities of the non-interacting chain in the bare potential.
    NonInteracting,
    /// `(N_up + N_down) / L` on every site.
    Uniform,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfConfig {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub init: ScfInit,
    pub clamp: f64,
    /// Halve the mixing whenever a window of iterations makes no progress,
    /// or only slow progress while the iterates alternate.
    pub adaptive: bool,
}

/// Iterations per progress check of the adaptive mixing.
pub const MIXING_WINDOW: usize = 25;

/// Smallest mixing the adaptive scheme backs off to.
pub const MIN_ALPHA: f64 = 1e-3;

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            alpha: 0.3,
            tol: 1e-8,
            max_iter: 5000,
            init: ScfInit::NonInteracting,
            clamp: DEFAULT_CLAMP,
            adaptive: true,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("mixing must lie in (0, 1], got {}", self.alpha),
            });
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tol",
                reason: format!("must be positive, got {}", self.tol),
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.clamp > 0.0 && self.clamp < 1.0) {
            return Err(Error::InvalidParameter {
                name: "clamp",
                reason: format!("must lie in (0, 1), got {}", self.clamp),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScfReport {
    pub converged: bool,
    pub iterations: usize,
    /// `max_i |n_out − n_in|` per iteration.
    pub residual_history: Vec<f64>,
    pub ks_potential: Vec<f64>,
    pub hxc_potential: Vec<f64>,
    pub densities: DensityProfile,
    pub spectrum: SingleParticleSpectrum,
    pub clamp_events: usize,
    /// Set when the iteration ended stuck in a two-cycle.
    pub oscillating: bool,
    /// Mixing in use at the last iteration.
    pub alpha_final: f64,
}

impl ScfReport {
    pub fn residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                residual: self.residual(),
            })
        }
    }
}

fn check_ks_sector(spec: &ChainSpec) -> Result<()> {
    spec.validate()?;
    if spec.n_up != spec.n_down {
        return Err(Error::SpinPolarized {
            n_up: spec.n_up,
            n_down: spec.n_down,
        });
    }
    Ok(())
}

pub fn scf_solve(spec: &ChainSpec, beta: f64, cfg: &ScfConfig) -> Result<ScfReport> {
    scf_solve_potential(spec, &spec.potential()?, beta, cfg)
}

/// Self-consistent KS densities of `spec` in an arbitrary potential.
pub fn scf_solve_potential(spec: &ChainSpec, potential: &[f64], beta: f64, cfg: &ScfConfig) -> Result<ScfReport> {
    check_ks_sector(spec)?;
    check_beta(beta)?;
    cfg.validate()?;
    let l = spec.sites;
    if potential.len() != l {
        return Err(Error::LengthMismatch {
            expected: l,
            found: potential.len(),
        });
    }
    let hxc = HxcFunctional {
        clamp: cfg.clamp,
        ..HxcFunctional::new(spec.interaction, beta)?
    };

    let mut n_in = match &cfg.init {
        ScfInit::NonInteracting => kohn_sham_densities(spec, potential, beta)?.1.n,
        ScfInit::Uniform => vec![spec.particles() as f64 / l as f64; l],
        ScfInit::Given(n) => {
            if n.len() != l {
                return Err(Error::LengthMismatch {
                    expected: l,
                    found: n.len(),
                });
            }
            n.clone()
        }
    };

    let mut history = Vec::new();
    let mut clamp_events = 0;
    let mut previous: Option<Vec<f64>> = None;
    let mut two_back_gap = f64::INFINITY;
    let mut alpha = cfg.alpha;
    let mut window_start = f64::INFINITY;
    loop {
        let mut vhxc = Vec::with_capacity(l);
        for &n in &n_in {
            if hxc.clamp_density(n)?.1 {
                clamp_events += 1;
            }
            vhxc.push(hxc.potential(n)?);
        }
        let vks: Vec<f64> = potential.iter().zip(&vhxc).map(|(v, h)| v + h).collect();
        let (spectrum, n_out) = kohn_sham_densities(spec, &vks, beta)?;
        let residual = n_out
            .n
            .iter()
            .zip(&n_in)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !residual.is_finite() {
            return Err(Error::NonFiniteDensity(residual));
        }
        history.push(residual);
        let converged = residual <= cfg.tol;
        if converged || history.len() >= cfg.max_iter {
            let oscillating = !converged && two_back_gap < 1e-3 * residual;
            return Ok(ScfReport {
                converged,
                iterations: history.len(),
                residual_history: history,
                ks_potential: vks,
                hxc_potential: vhxc,
                densities: DensityProfile::new(n_in),
                spectrum,
                clamp_events,
                oscillating,
                alpha_final: alpha,
            });
        }
        if cfg.adaptive && history.len() % MIXING_WINDOW == 0 {
            let stalled = residual >= window_start;
            let slow_period_two = residual > 0.5 * window_start && two_back_gap < 0.5 * alpha * residual;
            if (stalled || slow_period_two) && alpha > MIN_ALPHA {
                alpha = (alpha * 0.5).max(MIN_ALPHA);
            }
            window_start = residual;
        }
        let next: Vec<f64> = n_in
            .iter()
            .zip(&n_out.n)
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        two_back_gap = match &previous {
            Some(p) => next.iter().zip(p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            None => f64::INFINITY,
        };
        previous = Some(std::mem::replace(&mut n_in, next));
    }
}

/// `D = (1/2N) Σ_i |n_i − n'_i|`.
pub fn density_metric(a: &DensityProfile, b: &DensityProfile, particles: usize) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if particles == 0 {
        return Err(Error::InvalidParameter {
            name: "particles",
            reason: "density metric needs at least one particle".into(),
        });
    }
    let s: f64 = a.n.iter().zip(&b.n).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / (2.0 * particles as f64))
}

/// Tolerance used for SCF solves inside finite differences.
pub const RESPONSE_TOLERANCE: f64 = 1e-13;

/// `Σ_j (∂n_i/∂V_j) d_j` of the self-consistent KS densities.
pub fn ks_response_along(
    spec: &ChainSpec,
    potential: &[f64],
    beta: f64,
    direction: &[f64],
    h: f64,
    cfg: &ScfConfig,
    warm_start: &[f64],
) -> Result<Vec<f64>> {
    let inner = ScfConfig {
        tol: cfg.tol.min(RESPONSE_TOLERANCE),
        init: ScfInit::Given(warm_start.to_vec()),
        max_iter: cfg.max_iter.max(20_000),
        ..cfg.clone()
    };
    directional_fd(potential, &without_mean(direction), h, |v| {
        Ok(scf_solve_potential(spec, v, beta, &inner)?.into_result()?.densities.n)
    })
}

/// Response of the non-interacting KS system, `Σ_j (∂n_i/∂V^ks_j) d_j`.
pub fn noninteracting_response_along(
    spec: &ChainSpec,
    vks: &[f64],
    beta: f64,
    direction: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    directional_fd(vks, &without_mean(direction), h, |v| {
        Ok(kohn_sham_densities(spec, v, beta)?.1.n)
    })
}

/// How the post-quench KS Hamiltonian is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PostQuench {
    /// Fresh self-consistent solve at the final amplitude.
    #[default]
    Relaxed,
    /// Initial H-XC potential kept, bare potential shifted by `δV`.
    Frozen,
}

/// Quantum second-moment term evaluated inside the KS world.
#[derive(Debug, Clone)]
pub struct Theta2Ks {
    pub theta2: f64,
    /// `Tr{(ΔH^ks)² ρ^ks}`.
    pub w2: f64,
    pub w2_c: f64,
    pub delta_vks: Vec<f64>,
}

fn sector_dim(spec: &ChainSpec) -> usize {
    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
    }
    binom(spec.sites, spec.n_up).saturating_mul(binom(spec.sites, spec.n_down))
}

/// Whether [`theta2_ks`] can build the KS Fock space of `spec`.
pub fn theta2_feasible(spec: &ChainSpec) -> bool {
    sector_dim(spec) <= MAX_EXACT_DIM
}

/// `Θ₂^KS` from the converged initial report.
pub fn theta2_ks(
    quench: &QuenchSpec,
    initial: &ScfReport,
    mode: PostQuench,
    cfg: &ScfConfig,
    fd_step: f64,
) -> Result<Theta2Ks> {
    check_step(fd_step)?;
    let spec = &quench.initial;
    let beta = quench.beta;
    let deltas = quench.deltas()?;
    let vks0 = &initial.ks_potential;
    let vks_f: Vec<f64> = match mode {
        PostQuench::Frozen => vks0.iter().zip(&deltas).map(|(a, d)| a + d).collect(),
        PostQuench::Relaxed => {
            let post = ScfConfig {
                init: ScfInit::Given(initial.densities.n.clone()),
                tol: cfg.tol.min(1e-12),
                max_iter: cfg.max_iter.max(20_000),
                ..cfg.clone()
            };
            scf_solve_potential(spec, &quench.final_potential()?, beta, &post)?
                .into_result()?
                .ks_potential
        }
    };
    let dvks: Vec<f64> = vks_f.iter().zip(vks0).map(|(a, b)| a - b).collect();

    let free = spec.with_interaction(0.0);
    let chain = ExactChain::new(&free)?;
    let sys = chain.solve(vks0)?;
    let eq = gibbs(&sys, beta)?;
    let w2 = diagonal_moment(&eq, &sys, &dvks, 2)?;

    let (_, n_ks) = kohn_sham_densities(spec, vks0, beta)?;
    let projected = noninteracting_response_along(spec, vks0, beta, &dvks, fd_step)?;
    let w2_c = w2_commuting(&n_ks, &projected, &dvks, beta)?;
    Ok(Theta2Ks {
        theta2: w2 - w2_c,
        w2,
        w2_c,
        delta_vks: dvks,
    })
}

/// Quench moments along the KS route.
#[derive(Debug, Clone)]
pub struct KsMoments {
    pub mean_w: f64,
    pub w2_c: f64,
    pub s_irr_functional: f64,
    /// `∂n_i/∂v0` of the self-consistent densities.
    pub amplitude_response: Vec<f64>,
    /// Present when the KS Fock space is small enough.
    pub theta2: Option<Theta2Ks>,
    pub beta: f64,
}

impl KsMoments {
    pub fn extracted_work(&self) -> f64 {
        -self.mean_w
    }

    /// `⟨w²⟩_c + Θ₂^KS`.
    pub fn w2(&self) -> Option<f64> {
        self.theta2.as_ref().map(|t| self.w2_c + t.theta2)
    }

    pub fn var_w(&self) -> Option<f64> {
        self.w2().map(|w2| w2 - self.mean_w * self.mean_w)
    }
}

#[derive(Debug, Clone)]
pub struct KsQuenchOptions {
    pub scf: ScfConfig,
    pub fd_step: f64,
    pub post_quench: PostQuench,
    /// Skip `Θ₂^KS` even when feasible.
    pub skip_theta2: bool,
}

impl Default for KsQuenchOptions {
    fn default() -> Self {
        KsQuenchOptions {
            scf: ScfConfig::default(),
            fd_step: crate::quench::DEFAULT_FD_STEP,
            post_quench: PostQuench::Relaxed,
            skip_theta2: false,
        }
    }
}

/// KS moments of a quench from a converged initial SCF report.
pub fn ks_moments(quench: &QuenchSpec, scf: &ScfReport, opts: &KsQuenchOptions) -> Result<KsMoments> {
    check_step(opts.fd_step)?;
    if !scf.converged {
        return Err(Error::NotConverged {
            iterations: scf.iterations,
            residual: scf.residual(),
        });
    }
    let spec = &quench.initial;
    let beta = quench.beta;
    let v0 = spec.potential()?;
    let deltas = quench.deltas()?;
    let amplitude_response = ks_response_along(
        spec,
        &v0,
        beta,
        &spec.factors()?,
        opts.fd_step,
        &opts.scf,
        &scf.densities.n,
    )?;
    let projected: Vec<f64> = amplitude_response.iter().map(|r| r * quench.dv0).collect();
    let theta2 = if opts.skip_theta2 || !theta2_feasible(spec) {
        None
    } else {
        Some(theta2_ks(quench, scf, opts.post_quench, &opts.scf, opts.fd_step)?)
    };
    Ok(KsMoments {
        mean_w: avg_work_functional(&scf.densities, &deltas)?,
        w2_c: w2_commuting(&scf.densities, &projected, &deltas, beta)?,
        s_irr_functional: sirr_functional(&projected, &deltas, beta)?,
        amplitude_response,
        theta2,
        beta,
    })
}

#[derive(Debug, Clone)]
pub struct KsQuench {
    pub scf: ScfReport,
    pub moments: Option<KsMoments>,
}

/// SCF at the initial amplitude followed by every KS moment. An
/// unconverged initial SCF is returned without moments.
pub fn ks_quench(quench: &QuenchSpec, opts: &KsQuenchOptions) -> Result<KsQuench> {
    let scf = scf_solve(&quench.initial, quench.beta, &opts.scf)?;
    if !scf.converged {
        return Ok(KsQuench { scf, moments: None });
    }
    let moments = ks_moments(quench, &scf, opts)?;
    Ok(KsQuench {
        scf,
        moments: Some(moments),
    })
}
