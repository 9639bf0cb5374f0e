mod common;

use qtherm::canonical::canonical_free_energy;
use qtherm::ks::{ks_single_particle, ks_state};
use qtherm::quench::{work_summary, QuenchSpec};
use qtherm::{Boundary, ChainSpec, ExactChain, PotentialShape};

fn spec(sites: usize, n_up: usize, n_down: usize, u: f64, j: f64, shape: PotentialShape, v0: f64) -> ChainSpec {
    let s = ChainSpec {
        sites,
        hopping: j,
        interaction: u,
        shape,
        amplitude: v0,
        n_up,
        n_down,
        boundary: Boundary::Open,
    };
    s.validate().unwrap();
    s
}

#[test]
fn sectors_match_reference_hamiltonian() {
    let cases = [
        (3, 2, 1, 2.0, 1.0, PotentialShape::Linear, 1.5),
        (5, 3, 2, 4.0, 0.7, PotentialShape::Harmonic, 0.4),
        (6, 3, 3, 6.0, 1.0, PotentialShape::Custom(vec![0.3, -1.0, 0.2, 0.9, -0.4, 0.0]), 1.0),
        (6, 4, 1, 1.0, 1.3, PotentialShape::Linear, 2.0),
        (4, 2, 2, 0.0, 1.0, PotentialShape::Uniform, 3.0),
    ];
    for (l, nu, nd, u, j, shape, v0) in cases {
        let s = spec(l, nu, nd, u, j, shape, v0);
        let pot = s.potential().unwrap();
        for beta in [0.3, 1.0, 4.0] {
            let (_, eq) = ExactChain::new(&s).unwrap().thermal(&pot, beta).unwrap();
            let r = common::thermal(l, nu, nd, j, u, &pot, beta);
            assert!((eq.log_z - r.log_z).abs() < 1e-10, "L={l} ({nu},{nd}) β={beta}");
            for (a, b) in eq.densities.n.iter().zip(&r.densities) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn streamed_work_summary_matches_reference() {
    let s = spec(6, 3, 3, 3.0, 1.0, PotentialShape::Linear, 1.0);
    let q = QuenchSpec::new(s.clone(), 0.2, 0.7).unwrap();
    let chain = ExactChain::new(&s).unwrap();
    let (s0, e0) = chain.thermal(&s.potential().unwrap(), 0.7).unwrap();
    let sf = chain.solve(&q.final_potential().unwrap()).unwrap();
    let w = work_summary(&s0, &sf, &e0).unwrap();
    let t0 = common::thermal(6, 3, 3, 1.0, 3.0, &s.potential().unwrap(), 0.7);
    let tf = common::thermal(6, 3, 3, 1.0, 3.0, &q.final_potential().unwrap(), 0.7);
    let (jar, m1, m2, df) = common::tpm_moments(&t0, &tf, 0.7);
    assert!((w.total_probability - 1.0).abs() < 1e-12);
    assert!((w.mean - m1).abs() < 1e-10);
    assert!((w.second - m2).abs() < 1e-10);
    assert!((w.delta_f - df).abs() < 1e-10);
    assert!((jar * (0.7 * df).exp() - 1.0).abs() < 1e-10);
    assert!(w.jarzynski_residual < 1e-10);
}

#[test]
fn noninteracting_free_energy_matches_fock_reference() {
    let v = [0.4, -0.2, 1.1, -0.9, 0.3];
    let beta = 1.7;
    let sp = ks_single_particle(&v, 1.0, Boundary::Open).unwrap();
    let st = ks_state(sp, 3, 2, beta).unwrap();
    let r = common::thermal(5, 3, 2, 1.0, 0.0, &v, beta);
    assert!((st.free_energy().unwrap() + r.log_z / beta).abs() < 1e-11);
    assert!((canonical_free_energy(&st.up, &st.down).unwrap() + r.log_z / beta).abs() < 1e-11);
    for (a, b) in st.densities.n.iter().zip(&r.densities) {
        assert!((a - b).abs() < 1e-11);
    }
}
