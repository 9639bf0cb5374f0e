//! Reference implementations built from scratch, sharing nothing with the
//! library beyond the dense eigensolver.

#![allow(dead_code)]

use faer::{Mat, Side};

/// All `(up, down)` occupation masks of an `sites`-site chain.
pub fn fock_states(sites: usize, n_up: usize, n_down: usize) -> Vec<(u32, u32)> {
    let masks = |n: usize| -> Vec<u32> {
        (0u32..1 << sites).filter(|m| m.count_ones() as usize == n).collect()
    };
    let mut out = Vec::new();
    for &u in &masks(n_up) {
        for &d in &masks(n_down) {
            out.push((u, d));
        }
    }
    out
}

/// Open-chain Hubbard Hamiltonian in the full sector, no symmetry use.
pub fn hubbard(
    sites: usize,
    n_up: usize,
    n_down: usize,
    hopping: f64,
    interaction: f64,
    potential: &[f64],
) -> (Vec<(u32, u32)>, Mat<f64>) {
    let states = fock_states(sites, n_up, n_down);
    let index = |s: (u32, u32)| states.iter().position(|&t| t == s).unwrap();
    let dim = states.len();
    let mut h = Mat::<f64>::zeros(dim, dim);
    for (a, &(u, d)) in states.iter().enumerate() {
        let mut diag = 0.0;
        for i in 0..sites {
            let nu = ((u >> i) & 1) as f64;
            let nd = ((d >> i) & 1) as f64;
            diag += potential[i] * (nu + nd) + interaction * nu * nd;
        }
        h[(a, a)] = diag;
        for i in 0..sites - 1 {
            let pair = (1u32 << i) | (1u32 << (i + 1));
            // neighbouring modes of one spin: no fermion sign
            if (u & pair).count_ones() == 1 {
                let b = index((u ^ pair, d));
                h[(b, a)] -= hopping;
            }
            if (d & pair).count_ones() == 1 {
                let b = index((u, d ^ pair));
                h[(b, a)] -= hopping;
            }
        }
    }
    (states, h)
}

pub struct Thermal {
    pub states: Vec<(u32, u32)>,
    pub energies: Vec<f64>,
    pub vectors: Mat<f64>,
    pub probs: Vec<f64>,
    pub log_z: f64,
    /// Diagonal of the Gibbs state in the occupation basis.
    pub rho_diag: Vec<f64>,
    pub densities: Vec<f64>,
}

pub fn thermal(
    sites: usize,
    n_up: usize,
    n_down: usize,
    hopping: f64,
    interaction: f64,
    potential: &[f64],
    beta: f64,
) -> Thermal {
    let (states, h) = hubbard(sites, n_up, n_down, hopping, interaction, potential);
    let eig = h.self_adjoint_eigen(Side::Lower).unwrap();
    let dim = states.len();
    let energies: Vec<f64> = (0..dim).map(|k| eig.S().column_vector()[k]).collect();
    let vectors = eig.U().to_owned();
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let mut rho_diag = vec![0.0; dim];
    for k in 0..dim {
        for s in 0..dim {
            rho_diag[s] += probs[k] * vectors[(s, k)] * vectors[(s, k)];
        }
    }
    let mut densities = vec![0.0; sites];
    for (s, &(u, d)) in states.iter().enumerate() {
        for (i, n) in densities.iter_mut().enumerate() {
            *n += rho_diag[s] * (((u >> i) & 1) + ((d >> i) & 1)) as f64;
        }
    }
    Thermal {
        states,
        energies,
        vectors,
        probs,
        log_z: z.ln() - beta * e0,
        rho_diag,
        densities,
    }
}

/// `Tr{(Σ_i δV_i n_i)^k ρ}`; the operator is diagonal in occupations.
pub fn diagonal_trace(t: &Thermal, deltas: &[f64], k: i32) -> f64 {
    t.states
        .iter()
        .zip(&t.rho_diag)
        .map(|(&(u, d), r)| {
            let dh: f64 = deltas
                .iter()
                .enumerate()
                .map(|(i, dv)| dv * (((u >> i) & 1) + ((d >> i) & 1)) as f64)
                .sum();
            r * dh.powi(k)
        })
        .sum()
}

/// Two-point-measurement moments `(⟨e^{-βw}⟩, ⟨w⟩, ⟨w²⟩)` and `ΔF`.
pub fn tpm_moments(t0: &Thermal, tf: &Thermal, beta: f64) -> (f64, f64, f64, f64) {
    let dim = t0.states.len();
    let (mut jar, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for n in 0..dim {
        for m in 0..dim {
            let mut o = 0.0;
            for s in 0..dim {
                o += tf.vectors[(s, m)] * t0.vectors[(s, n)];
            }
            let p = t0.probs[n] * o * o;
            let w = tf.energies[m] - t0.energies[n];
            jar += p * (-beta * w).exp();
            m1 += p * w;
            m2 += p * w * w;
        }
    }
    (jar, m1, m2, -(tf.log_z - t0.log_z) / beta)
}

/// `ln Z_N` by summing over every `N`-subset of the levels.
pub fn enumerate_log_z(eps: &[f64], n: usize, beta: f64) -> f64 {
    let e0 = eps.iter().copied().fold(f64::INFINITY, f64::min);
    let l = eps.len();
    let mut z = 0.0;
    for mask in 0u32..1 << l {
        if mask.count_ones() as usize != n {
            continue;
        }
        let e: f64 = (0..l).filter(|k| mask >> k & 1 == 1).map(|k| eps[k] - e0).sum();
        z += (-beta * e).exp();
    }
    z.ln() - beta * n as f64 * e0
}

/// Single-particle levels of an open tight-binding chain.
pub fn chain_levels(potential: &[f64], hopping: f64) -> Vec<f64> {
    let l = potential.len();
    let mut h = Mat::<f64>::zeros(l, l);
    for i in 0..l {
        h[(i, i)] = potential[i];
        if i + 1 < l {
            h[(i, i + 1)] = -hopping;
            h[(i + 1, i)] = -hopping;
        }
    }
    let eig = h.self_adjoint_eigen(Side::Lower).unwrap();
    (0..l).map(|k| eig.S().column_vector()[k]).collect()
}

pub fn linear_factors(sites: usize) -> Vec<f64> {
    (0..sites)
        .map(|i| 1.0 - 2.0 * i as f64 / (sites - 1) as f64)
        .collect()
}
