//! Canonical statistics of non-interacting fermions from a single-particle
//! spectrum.
//!
//! The partition function of `N` fermions follows the alternating-sign
//! recursion
//!
//! ```text
//! Z_N(β) = (1/N) Σ_{m=1..N} (-1)^(m-1) Z_1(mβ) Z_{N-m}(β),   Z_0 = 1,
//! ```
//!
//! with `Z_1(mβ) = Σ_k exp(-mβ ε_k)`. Energies are shifted so that the
//! lowest level sits at zero before anything is exponentiated; the stored
//! `log_z` values refer to the shifted spectrum and
//! [`CanonicalTable::log_z_n`] restores the shift.
//!
//! The recursion cancels badly once `β × bandwidth` grows. Fillings above
//! half are taken from the hole spectrum, `Z_m(ε) = e^{-βΣε} Z_{L-m}(-ε)`,
//! so it never runs past `L/2` particles. It is evaluated in double-double
//! arithmetic with a running forward-error bound, and when
//! that bound exceeds [`RECURSION_TOLERANCE`] the table is rebuilt from the
//! elementary symmetric sums `Σ_{k1<...<kN} x_k1 ... x_kN` (all terms
//! positive, accumulated in log space), which is exact enumeration carried
//! out level by level.

use faer::{Mat, Side};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::exact::check_beta;

/// Relative error bound above which the recursion result is discarded.
pub const RECURSION_TOLERANCE: f64 = 1e-12;

/// Unit roundoff of double-double arithmetic, rounded up.
const DD_EPS: f64 = 1.0e-31;

/// Single-particle eigenpairs, eigenvalues ascending; `amps[(i, k)]` is the
/// amplitude of orbital `k` on site `i`.
#[derive(Debug, Clone)]
pub struct SingleParticleSpectrum {
    pub eps: Vec<f64>,
    pub amps: Mat<f64>,
}

impl SingleParticleSpectrum {
    pub fn levels(&self) -> usize {
        self.eps.len()
    }

    /// Eigen-decomposition of a symmetric one-body matrix.
    pub fn from_matrix(h: &Mat<f64>) -> Result<Self> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.ncols(),
            });
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        Ok(SingleParticleSpectrum {
            eps: (0..n).map(|k| s[k]).collect(),
            amps: eig.U().to_owned(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionMethod {
    /// Alternating-sign recursion in particle number.
    Recursion,
    /// Positive elementary symmetric sums, used when the recursion cancels.
    ProductSum,
}

/// `Z_m(β)` for `m = 0..=N` and, once filled, orbital occupations.
#[derive(Debug, Clone)]
pub struct CanonicalTable {
    pub beta: f64,
    pub particles: usize,
    /// Lowest single-particle level, subtracted before exponentiation.
    pub shift: f64,
    /// `ln Z_m` of the shifted spectrum, `m = 0..=particles`.
    pub log_z: Vec<f64>,
    pub method: PartitionMethod,
    /// Estimated relative error of the recursion for `Z_N` (before any
    /// fallback).
    pub recursion_error: f64,
    /// `⟨n_k⟩`, empty until [`canonical_occupations`] has been applied.
    pub occ: Vec<f64>,
}

impl CanonicalTable {
    /// Shifted `Z_m`.
    pub fn z(&self, m: usize) -> f64 {
        self.log_z[m].exp()
    }

    /// `ln Z_N` of the unshifted spectrum.
    pub fn log_z_n(&self) -> f64 {
        self.log_z[self.particles] - self.beta * self.particles as f64 * self.shift
    }
}

fn lowest(eps: &[f64]) -> f64 {
    eps.iter().copied().fold(f64::INFINITY, f64::min)
}

/// `Z_1(mβ) = Σ_k exp(-mβ ε_k)`, accumulated on the shifted spectrum.
pub fn z1(eps: &[f64], m: usize, beta: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let e0 = lowest(eps);
    let mb = m as f64 * beta;
    let shifted: f64 = eps.iter().map(|e| (-mb * (e - e0)).exp()).sum();
    shifted * (-mb * e0).exp()
}

fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln e_m(x)` for `m = 0..=n`, with `ln x_k` given, skipping level `skip`.
fn log_symmetric_sums(log_x: &[f64], n: usize, skip: Option<usize>) -> Vec<f64> {
    let mut out = vec![f64::NEG_INFINITY; n + 1];
    out[0] = 0.0;
    let mut seen = 0usize;
    for (k, &lx) in log_x.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        seen += 1;
        for m in (1..=n.min(seen)).rev() {
            out[m] = logaddexp(out[m], lx + out[m - 1]);
        }
    }
    out
}

/// `e^a` to double-double accuracy for `a ≤ 0`.
fn exp_dd(a: TwoFloat) -> TwoFloat {
    if a.hi() < -740.0 {
        return TwoFloat::from(0.0);
    }
    let k = (a.hi() / std::f64::consts::LN_2).round();
    let r = (a - twofloat::consts::LN_2 * k) / 256.0;
    let mut term = TwoFloat::from(1.0);
    let mut sum = TwoFloat::from(1.0);
    for i in 1..=12 {
        term = term * r / i as f64;
        sum += term;
    }
    for _ in 0..8 {
        sum = sum * sum;
    }
    // two steps keep 2^k normal down to the underflow edge
    let half = (k / 2.0).trunc() as i32;
    sum * 2f64.powi(half) * 2f64.powi(k as i32 - half)
}

/// Recursion in double-double arithmetic. Returns `Z_m` and a forward
/// error bound on each.
fn recursion_dd(x: &[TwoFloat], n: usize) -> (Vec<TwoFloat>, Vec<f64>) {
    let mut power: Vec<TwoFloat> = x.to_vec();
    let mut p = vec![TwoFloat::from(0.0); n + 1];
    for m in 1..=n {
        if m > 1 {
            for (pw, &v) in power.iter_mut().zip(x) {
                *pw *= v;
            }
        }
        p[m] = power.iter().fold(TwoFloat::from(0.0), |acc, &v| acc + v);
    }
    let mut z = vec![TwoFloat::from(0.0); n + 1];
    let mut err = vec![0.0f64; n + 1];
    z[0] = TwoFloat::from(1.0);
    for k in 1..=n {
        let mut sum = TwoFloat::from(0.0);
        let mut magnitude = 0.0f64;
        let mut propagated = 0.0f64;
        for m in 1..=k {
            let term = p[m] * z[k - m];
            magnitude += f64::from(term).abs();
            propagated += f64::from(p[m]) * err[k - m];
            if m % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        z[k] = sum / k as f64;
        let rounding = 4.0 * DD_EPS * (k + x.len()) as f64 * magnitude;
        err[k] = (propagated + rounding) / k as f64;
    }
    (z, err)
}

fn dd_ln(v: TwoFloat) -> f64 {
    let hi = v.hi();
    if hi > 0.0 {
        hi.ln() + (v.lo() / hi).ln_1p()
    } else {
        f64::NAN
    }
}

/// Shifted `ln Z_m` for `m = 0..=n` and relative error bounds. Fillings
/// above half use the hole picture `Z_m(ε) = e^{-βΣε} Z_{L-m}(-ε)`, so
/// neither recursion runs past `L/2` particles.
fn recursion_log_table(eps: &[f64], n: usize, beta: f64, shift: f64) -> (Vec<f64>, Vec<f64>) {
    let l = eps.len();
    let half = l / 2;
    let d: Vec<f64> = eps.iter().map(|e| e - shift).collect();
    let top = d.iter().copied().fold(0.0, f64::max);
    let x: Vec<TwoFloat> = d.iter().map(|&v| exp_dd(TwoFloat::new_mul(-beta, v))).collect();
    let xh: Vec<TwoFloat> = d
        .iter()
        .map(|&v| exp_dd(TwoFloat::new_add(top, -v) * -beta))
        .collect();
    let total: f64 = d.iter().sum();

    let (zp, ep) = recursion_dd(&x, n.min(half));
    let holes = if n > half { l - (half + 1) } else { 0 };
    let (zh, eh) = recursion_dd(&xh, holes);

    let mut log_z = Vec::with_capacity(n + 1);
    let mut rel = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let (v, e, offset) = if m <= half {
            (zp[m], ep[m], 0.0)
        } else {
            let j = l - m;
            (zh[j], eh[j], -beta * (total - j as f64 * top))
        };
        let hi = f64::from(v);
        log_z.push(dd_ln(v) + offset);
        rel.push(if hi > 0.0 && hi.is_finite() {
            e / hi + 2.0 * f64::EPSILON * offset.abs()
        } else {
            f64::INFINITY
        });
    }
    (log_z, rel)
}

/// Canonical partition functions `Z_0..Z_N` of `n` fermions in `eps`.
pub fn canonical_partition(eps: &[f64], n: usize, beta: f64) -> Result<CanonicalTable> {
    build_table(eps, n, beta, None)
}

/// [`canonical_partition`] with the evaluation method forced. A forced
/// recursion is returned even when its error bound is poor.
pub fn canonical_partition_with(
    eps: &[f64],
    n: usize,
    beta: f64,
    method: PartitionMethod,
) -> Result<CanonicalTable> {
    build_table(eps, n, beta, Some(method))
}

fn build_table(
    eps: &[f64],
    n: usize,
    beta: f64,
    forced: Option<PartitionMethod>,
) -> Result<CanonicalTable> {
    check_beta(beta)?;
    if n > eps.len() {
        return Err(Error::PauliExclusion {
            particles: n,
            levels: eps.len(),
        });
    }
    if let Some(e) = eps.iter().find(|e| !e.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eps",
            reason: format!("non-finite level {e}"),
        });
    }
    let shift = if eps.is_empty() { 0.0 } else { lowest(eps) };
    let (log_rec, rel_err) = recursion_log_table(eps, n, beta, shift);
    let recursion_error = rel_err[n];
    let usable = (0..=n).all(|m| log_rec[m].is_finite() && rel_err[m] <= RECURSION_TOLERANCE);

    let recursion = match forced {
        Some(m) => m == PartitionMethod::Recursion,
        None => usable,
    };
    let (log_z, method) = if recursion {
        (log_rec, PartitionMethod::Recursion)
    } else {
        let log_x: Vec<f64> = eps.iter().map(|e| -beta * (e - shift)).collect();
        (log_symmetric_sums(&log_x, n, None), PartitionMethod::ProductSum)
    };
    Ok(CanonicalTable {
        beta,
        particles: n,
        shift,
        log_z,
        method,
        recursion_error,
        occ: Vec::new(),
    })
}

/// Orbital occupations `⟨n_k⟩ = x_k e_{N-1}(x without k) / e_N(x)`.
///
/// All sums are positive and accumulated in log space, so the result is
/// stable at any temperature; it equals `-(1/β) ∂ ln Z_N / ∂ε_k`.
pub fn canonical_occupations(table: &CanonicalTable, eps: &[f64]) -> Result<Vec<f64>> {
    let n = table.particles;
    if n > eps.len() || table.log_z.len() != n + 1 {
        return Err(Error::InvalidParameter {
            name: "table",
            reason: "canonical table does not match the spectrum".into(),
        });
    }
    if n == 0 {
        return Ok(vec![0.0; eps.len()]);
    }
    let log_x: Vec<f64> = eps.iter().map(|e| -table.beta * (e - table.shift)).collect();
    let full = log_symmetric_sums(&log_x, n, None)[n];
    Ok((0..eps.len())
        .map(|k| {
            let without = log_symmetric_sums(&log_x, n - 1, Some(k))[n - 1];
            (log_x[k] + without - full).exp().min(1.0)
        })
        .collect())
}

/// Table plus occupations in one call.
pub fn solve_canonical(eps: &[f64], n: usize, beta: f64) -> Result<CanonicalTable> {
    let mut table = canonical_partition(eps, n, beta)?;
    table.occ = canonical_occupations(&table, eps)?;
    Ok(table)
}

/// `F = -(1/β) (ln Z_{N↑} + ln Z_{N↓})`.
pub fn canonical_free_energy(up: &CanonicalTable, down: &CanonicalTable) -> Result<f64> {
    if up.beta != down.beta {
        return Err(Error::BetaMismatch(up.beta, down.beta));
    }
    Ok(-(up.log_z_n() + down.log_z_n()) / up.beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_dd_is_multiplicative() {
        for &(a, b) in &[(-0.3f64, -5.0f64), (-27.5, -1e-3), (-12.25, -0.125), (-100.0, -3.7)] {
            let lhs = exp_dd(TwoFloat::from(a) + TwoFloat::from(b));
            let rhs = exp_dd(TwoFloat::from(a)) * exp_dd(TwoFloat::from(b));
            assert!(f64::from((lhs - rhs) / rhs).abs() < 1e-29, "{a} {b}");
            assert!((f64::from(exp_dd(TwoFloat::from(a))) / a.exp() - 1.0).abs() < 1e-15);
        }
        assert_eq!(f64::from(exp_dd(TwoFloat::from(0.0))), 1.0);
        assert_eq!(f64::from(exp_dd(TwoFloat::from(-800.0))), 0.0);
    }

    /// Brute-force enumeration of all N-subsets of the levels.
    fn enumerate_z(eps: &[f64], n: usize, beta: f64) -> f64 {
        let l = eps.len();
        (0u32..(1 << l))
            .filter(|m| m.count_ones() as usize == n)
            .map(|m| {
                let e: f64 = (0..l).filter(|k| m >> k & 1 == 1).map(|k| eps[k]).sum();
                (-beta * e).exp()
            })
            .sum()
    }

    fn open_chain_levels(l: usize) -> Vec<f64> {
        let mut e: Vec<f64> = (1..=l)
            .map(|k| -2.0 * (k as f64 * std::f64::consts::PI / (l + 1) as f64).cos())
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn z1_examples() {
        assert_eq!(z1(&[0.0, 1.0], 0, 1.0), 1.0);
        assert!((z1(&[0.0, 1.0], 1, 1.0) - (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((z1(&[0.0, 1.0], 2, 1.0) - (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!((z1(&[0.0, 1.0], 1, 1.0) - 1.3679).abs() < 1e-4);
        assert!((z1(&[0.0, 1.0], 2, 1.0) - 1.1353).abs() < 1e-4);
    }

    #[test]
    fn partition_examples() {
        let t = canonical_partition(&[0.0, 0.0], 2, 3.7).unwrap();
        assert!((t.z(2) - 1.0).abs() < 1e-15);
        assert_eq!(t.z(0), 1.0);

        let t = canonical_partition(&[0.0, 1.0], 2, 1.0).unwrap();
        let by_hand = 0.5 * ((1.0 + (-1.0f64).exp()).powi(2) - (1.0 + (-2.0f64).exp()));
        assert!((t.z(2) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((by_hand - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(t.method, PartitionMethod::Recursion);
    }

    #[test]
    fn pauli_exclusion_is_an_error() {
        assert!(matches!(
            canonical_partition(&[0.0, 1.0], 3, 1.0),
            Err(Error::PauliExclusion { particles: 3, levels: 2 })
        ));
    }

    #[test]
    fn eight_level_chain_matches_enumeration() {
        let eps = open_chain_levels(8);
        let t = canonical_partition(&eps, 4, 1.0).unwrap();
        let brute = enumerate_z(&eps, 4, 1.0);
        assert!(((t.log_z_n().exp() - brute) / brute).abs() < 1e-12);
    }

    #[test]
    fn occupation_examples() {
        let t = solve_canonical(&[0.0, 1.0], 1, 1.0).unwrap();
        assert!((t.occ[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);
        assert!((t.occ[0] - 0.7311).abs() < 1e-4);

        let t = solve_canonical(&open_chain_levels(5), 5, 2.0).unwrap();
        assert!(t.occ.iter().all(|&o| (o - 1.0).abs() < 1e-15));

        let eps = open_chain_levels(6);
        let t = solve_canonical(&eps, 3, 200.0).unwrap();
        for (k, o) in t.occ.iter().enumerate() {
            let ground = if k < 3 { 1.0 } else { 0.0 };
            assert!((o - ground).abs() < 1e-6);
        }
    }

    #[test]
    fn free_energy_examples() {
        let empty = solve_canonical(&[0.3, 1.0], 0, 1.0).unwrap();
        assert_eq!(canonical_free_energy(&empty, &empty).unwrap(), 0.0);

        let one = solve_canonical(&[-0.4], 1, 2.5).unwrap();
        assert!((canonical_free_energy(&one, &one).unwrap() + 0.8).abs() < 1e-15);

        let eps = open_chain_levels(4);
        let t = solve_canonical(&eps, 2, 1.0).unwrap();
        let brute = enumerate_z(&eps, 2, 1.0);
        let f = canonical_free_energy(&t, &t).unwrap();
        assert!((f + (brute * brute).ln()).abs() < 1e-12);

        let hot = solve_canonical(&eps, 2, 0.5).unwrap();
        assert!(matches!(
            canonical_free_energy(&t, &hot),
            Err(Error::BetaMismatch(..))
        ));
    }

    #[test]
    fn wide_spectra_fall_back_to_product_sums() {
        let eps: Vec<f64> = (0..16).map(|k| k as f64 * 1.5).collect();
        let t = solve_canonical(&eps, 8, 5.0).unwrap();
        assert_eq!(t.method, PartitionMethod::ProductSum);
        let total: f64 = t.occ.iter().sum();
        assert!((total - 8.0).abs() < 1e-10);
        // dominated by the lowest configuration
        let ground: f64 = eps[..8].iter().sum();
        assert!((t.log_z_n() + 5.0 * ground).abs() < 1e-3);
    }

    #[test]
    fn shift_invariance() {
        let eps = open_chain_levels(7);
        let c = 3.25;
        let moved: Vec<f64> = eps.iter().map(|e| e + c).collect();
        let a = solve_canonical(&eps, 3, 1.0).unwrap();
        let b = solve_canonical(&moved, 3, 1.0).unwrap();
        assert!((b.log_z_n() - (a.log_z_n() - 1.0 * 3.0 * c)).abs() < 1e-12);
        for (x, y) in a.occ.iter().zip(&b.occ) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
