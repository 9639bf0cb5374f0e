//! Parameter sweeps, figure presets and CSV output.
//!
//! Grid points run on a worker pool and are written back in grid order
//! (sites, then `U`, then `v0`, then `β`), so the number of workers never
//! changes the bytes on disk.

pub mod config;
pub mod presets;

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{parse_config, parse_config_str, ExperimentConfig, Grid, Level, Method};
pub use presets::{preset, PRESETS};

use crate::error::{Error, Result};
use crate::exact::{density_response, DensityProfile, ExactChain};
use crate::ks::{density_metric, ks_moments, scf_solve, KsMoments, KsQuenchOptions, ScfReport};
use crate::quench::{
    avg_work_functional, exact_quench_on, work_distribution, MomentsReport, QuenchSpec,
};

/// Name of the provenance file written into every output directory.
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";

#[derive(Debug, Clone)]
pub struct ExactPoint {
    pub densities: DensityProfile,
    pub mean_w: f64,
    pub amplitude_response: Option<Vec<f64>>,
    pub moments: Option<MomentsReport>,
}

#[derive(Debug, Clone)]
pub struct KsPoint {
    pub scf: ScfReport,
    pub mean_w: f64,
    pub moments: Option<KsMoments>,
    /// SCF converged, and so did every SCF inside the moments.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PointResult {
    pub sites: usize,
    pub interaction: f64,
    pub amplitude: f64,
    pub beta: f64,
    pub exact: Option<ExactPoint>,
    pub ks: Option<KsPoint>,
    pub metric: Option<f64>,
}

impl PointResult {
    pub fn converged(&self) -> bool {
        self.ks.as_ref().is_none_or(|k| k.converged)
    }

    pub fn label(&self) -> String {
        format!(
            "L={} U={} v0={} beta={}",
            self.sites, self.interaction, self.amplitude, self.beta
        )
    }
}

/// Every grid point in output order.
pub fn grid_points(cfg: &ExperimentConfig) -> Vec<(usize, f64, f64, f64)> {
    let mut out = Vec::with_capacity(cfg.points());
    for &l in &cfg.sites {
        for &u in cfg.interaction.values() {
            for &v in cfg.amplitude.values() {
                for &b in cfg.beta.values() {
                    out.push((l, u, v, b));
                }
            }
        }
    }
    out
}

fn ks_options(cfg: &ExperimentConfig) -> KsQuenchOptions {
    KsQuenchOptions {
        scf: cfg.scf.clone(),
        fd_step: cfg.fd_step,
        post_quench: cfg.post_quench,
        skip_theta2: false,
    }
}

pub fn evaluate_point(
    cfg: &ExperimentConfig,
    sites: usize,
    interaction: f64,
    amplitude: f64,
    beta: f64,
) -> Result<PointResult> {
    let spec = cfg.chain(sites, interaction, amplitude)?;
    let quench = QuenchSpec::new(spec.clone(), cfg.dv0, beta)?;
    let deltas = quench.deltas()?;

    let exact = if cfg.method.exact() {
        let chain = ExactChain::new(&spec)?;
        Some(match cfg.level {
            Level::Densities => {
                let densities = chain.densities(&spec.potential()?, beta)?;
                ExactPoint {
                    mean_w: avg_work_functional(&densities, &deltas)?,
                    densities,
                    amplitude_response: None,
                    moments: None,
                }
            }
            Level::Moments => {
                let a = exact_quench_on(&chain, &quench, cfg.fd_step)?;
                ExactPoint {
                    mean_w: a.moments.mean_w,
                    densities: a.densities,
                    amplitude_response: Some(a.amplitude_response),
                    moments: Some(a.moments),
                }
            }
        })
    } else {
        None
    };

    let ks = if cfg.method.ks() {
        let scf = scf_solve(&spec, beta, &cfg.scf)?;
        let mean_w = avg_work_functional(&scf.densities, &deltas)?;
        let mut converged = scf.converged;
        let moments = if cfg.level == Level::Moments && scf.converged {
            match ks_moments(&quench, &scf, &ks_options(cfg)) {
                Ok(m) => Some(m),
                Err(Error::NotConverged { .. }) => {
                    converged = false;
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        Some(KsPoint {
            scf,
            mean_w,
            moments,
            converged,
        })
    } else {
        None
    };

    let metric = match (&exact, &ks) {
        (Some(e), Some(k)) => Some(density_metric(&e.densities, &k.scf.densities, spec.particles())?),
        _ => None,
    };
    Ok(PointResult {
        sites,
        interaction,
        amplitude,
        beta,
        exact,
        ks,
        metric,
    })
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "threads",
                reason: "need at least one worker".into(),
            });
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::InvalidParameter {
        name: "threads",
        reason: e.to_string(),
    })
}

/// Evaluate every grid point, results in grid order.
pub fn run_points(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    faer::set_global_parallelism(faer::Par::Seq);
    let points = grid_points(cfg);
    pool(threads)?.install(|| {
        points
            .par_iter()
            .map(|&(l, u, v, b)| evaluate_point(cfg, l, u, v, b))
            .collect()
    })
}

/// CSV text with a header row and 17-significant-digit floats.
struct Table {
    writer: csv::Writer<Vec<u8>>,
}

enum Cell {
    F(f64),
    I(usize),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

fn fmt_cell(c: &Cell) -> String {
    match c {
        Cell::F(v) => format!("{v:.16e}"),
        Cell::I(v) => v.to_string(),
        Cell::B(v) => v.to_string(),
    }
}

impl Table {
    fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Table { writer })
    }

    fn row(&mut self, cells: Vec<Cell>) -> Result<()> {
        self.writer
            .write_record(cells.iter().map(fmt_cell))
            .map_err(csv_error)
    }

    fn save(self, dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<()> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        files.push(path);
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn opt(v: Option<f64>) -> Cell {
    Cell::F(v.unwrap_or(f64::NAN))
}

fn point_cells(p: &PointResult) -> Vec<Cell> {
    vec![p.sites.into(), p.interaction.into(), p.amplitude.into(), p.beta.into()]
}

/// Resolved configuration plus the library version.
pub fn write_provenance(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(RESOLVED_CONFIG);
    fs::write(
        &path,
        format!("# qtherm {}\n{}", crate::VERSION, cfg.resolved()),
    )?;
    Ok(path)
}

/// Write every table the configuration asks for.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[PointResult], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = vec![write_provenance(cfg, dir)?];
    let dv0 = cfg.dv0;

    if cfg.method.exact() {
        let mut t = Table::new(&["L", "U", "v0", "beta", "site", "n"])?;
        for p in results {
            if let Some(e) = &p.exact {
                for (i, n) in e.densities.n.iter().enumerate() {
                    let mut row = point_cells(p);
                    row.extend([(i + 1).into(), (*n).into()]);
                    t.row(row)?;
                }
            }
        }
        t.save(dir, "densities.csv", &mut files)?;
    }

    if cfg.method.exact() && cfg.level == Level::Moments {
        let mut t = Table::new(&[
            "U",
            "v0",
            "beta",
            "dv0",
            "mean_w",
            "w2",
            "w2_c",
            "theta2",
            "s_irr",
            "s_irr_func",
            "deltaF",
            "jarzynski_residual",
            "fdr_residual",
        ])?;
        for p in results {
            if let Some(m) = p.exact.as_ref().and_then(|e| e.moments.as_ref()) {
                t.row(vec![
                    p.interaction.into(),
                    p.amplitude.into(),
                    p.beta.into(),
                    dv0.into(),
                    m.mean_w.into(),
                    m.w2.into(),
                    m.w2_c.into(),
                    m.theta2.into(),
                    m.s_irr_exact.into(),
                    m.s_irr_functional.into(),
                    m.delta_f.into(),
                    m.jarzynski_residual.into(),
                    m.fdr_residual.into(),
                ])?;
            }
        }
        t.save(dir, "moments.csv", &mut files)?;
    }

    if cfg.method.ks() {
        let mut t = Table::new(&[
            "L",
            "U",
            "v0",
            "beta",
            "site",
            "n_ks",
            "V_ks",
            "iterations",
            "converged",
        ])?;
        for p in results {
            if let Some(k) = &p.ks {
                for (i, (n, v)) in k.scf.densities.n.iter().zip(&k.scf.ks_potential).enumerate() {
                    let mut row = point_cells(p);
                    row.extend([
                        (i + 1).into(),
                        (*n).into(),
                        (*v).into(),
                        k.scf.iterations.into(),
                        k.scf.converged.into(),
                    ]);
                    t.row(row)?;
                }
            }
        }
        t.save(dir, "scf.csv", &mut files)?;

        let mut t = Table::new(&[
            "L",
            "U",
            "v0",
            "beta",
            "dv0",
            "mean_w",
            "w2",
            "w2_c",
            "theta2",
            "s_irr_func",
            "converged",
        ])?;
        for p in results {
            if let Some(k) = &p.ks {
                let m = k.moments.as_ref();
                let mut row = point_cells(p);
                row.extend([
                    dv0.into(),
                    k.mean_w.into(),
                    opt(m.and_then(|m| m.w2())),
                    opt(m.map(|m| m.w2_c)),
                    opt(m.and_then(|m| m.theta2.as_ref().map(|t| t.theta2))),
                    opt(m.map(|m| m.s_irr_functional)),
                    k.converged.into(),
                ]);
                t.row(row)?;
            }
        }
        t.save(dir, "moments_ks.csv", &mut files)?;
    }

    if cfg.amplitude_response {
        let mut exact = Table::new(&["L", "U", "v0", "beta", "site", "dn_dv0"])?;
        let mut ks = Table::new(&["L", "U", "v0", "beta", "site", "dn_dv0"])?;
        for p in results {
            if let Some(r) = p.exact.as_ref().and_then(|e| e.amplitude_response.as_ref()) {
                for (i, d) in r.iter().enumerate() {
                    let mut row = point_cells(p);
                    row.extend([(i + 1).into(), (*d).into()]);
                    exact.row(row)?;
                }
            }
            if let Some(m) = p.ks.as_ref().and_then(|k| k.moments.as_ref()) {
                for (i, d) in m.amplitude_response.iter().enumerate() {
                    let mut row = point_cells(p);
                    row.extend([(i + 1).into(), (*d).into()]);
                    ks.row(row)?;
                }
            }
        }
        if cfg.method.exact() {
            exact.save(dir, "dn_dv0.csv", &mut files)?;
        }
        if cfg.method.ks() {
            ks.save(dir, "dn_dv0_ks.csv", &mut files)?;
        }
    }

    if cfg.method == Method::Both {
        write_comparison(cfg, results, dir, &mut files)?;
    }
    Ok(files)
}

fn write_comparison(
    cfg: &ExperimentConfig,
    results: &[PointResult],
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut metric = Table::new(&["L", "U", "v0", "beta", "D"])?;
    let mut dens = Table::new(&["L", "U", "v0", "beta", "site", "n_exact", "n_ks", "abs_diff"])?;
    let mut cmp = Table::new(&[
        "L",
        "U",
        "v0",
        "beta",
        "dv0",
        "D",
        "mean_w_exact",
        "mean_w_ks",
        "mean_w_diff",
        "s_irr_exact",
        "s_irr_ks",
        "s_irr_diff",
        "w2_exact",
        "w2_ks",
        "w2_diff",
        "theta2_exact",
        "theta2_ks",
        "theta2_diff",
        "converged",
    ])?;
    let diff = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    for p in results {
        let (Some(e), Some(k), Some(d)) = (&p.exact, &p.ks, p.metric) else {
            continue;
        };
        let mut row = point_cells(p);
        row.push(d.into());
        metric.row(row)?;

        for (i, (a, b)) in e.densities.n.iter().zip(&k.scf.densities.n).enumerate() {
            let mut row = point_cells(p);
            row.extend([(i + 1).into(), (*a).into(), (*b).into(), (a - b).abs().into()]);
            dens.row(row)?;
        }

        let em = e.moments.as_ref();
        let km = k.moments.as_ref();
        let s_e = em.map(|m| m.s_irr_exact);
        let s_k = km.map(|m| m.s_irr_functional);
        let w2_e = em.map(|m| m.w2);
        let w2_k = km.and_then(|m| m.w2());
        let t_e = em.map(|m| m.theta2);
        let t_k = km.and_then(|m| m.theta2.as_ref().map(|t| t.theta2));
        let mut row = point_cells(p);
        row.extend([
            cfg.dv0.into(),
            d.into(),
            e.mean_w.into(),
            k.mean_w.into(),
            (e.mean_w - k.mean_w).abs().into(),
            opt(s_e),
            opt(s_k),
            opt(diff(s_e, s_k)),
            opt(w2_e),
            opt(w2_k),
            opt(diff(w2_e, w2_k)),
            opt(t_e),
            opt(t_k),
            opt(diff(t_e, t_k)),
            k.converged.into(),
        ]);
        cmp.row(row)?;
    }
    metric.save(dir, "metric.csv", files)?;
    dens.save(dir, "compare_densities.csv", files)?;
    cmp.save(dir, "compare.csv", files)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub points: usize,
    /// Labels of grid points whose KS solve did not converge.
    pub unconverged: Vec<String>,
    pub files: Vec<PathBuf>,
    pub results: Vec<PointResult>,
}

impl RunSummary {
    pub fn all_converged(&self) -> bool {
        self.unconverged.is_empty()
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> Result<RunSummary> {
    let results = run_points(cfg, threads)?;
    let files = write_outputs(cfg, &results, dir)?;
    Ok(RunSummary {
        points: results.len(),
        unconverged: results
            .iter()
            .filter(|p| !p.converged())
            .map(PointResult::label)
            .collect(),
        files,
        results,
    })
}

pub fn run_preset(name: &str, dir: &Path, threads: Option<usize>) -> Result<RunSummary> {
    run_experiment(&preset(name)?, dir, threads)
}

/// Exact and KS results side by side.
pub fn compare_methods(cfg: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> Result<RunSummary> {
    let cfg = ExperimentConfig {
        method: Method::Both,
        ..cfg.clone()
    };
    run_experiment(&cfg, dir, threads)
}

/// Outcome table and full density response at the first grid point.
pub fn write_pdw(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (l, u, v, b) = grid_points(cfg)[0];
    let spec = cfg.chain(l, u, v)?;
    let quench = QuenchSpec::new(spec.clone(), cfg.dv0, b)?;
    let chain = ExactChain::new(&spec)?;
    let (sys0, eq0) = chain.thermal(&spec.potential()?, b)?;
    let sysf = chain.solve(&quench.final_potential()?)?;
    let dist = work_distribution(&sys0, &sysf, &eq0)?;

    fs::create_dir_all(dir)?;
    let single = ExperimentConfig {
        sites: vec![l],
        interaction: Grid::single(u),
        amplitude: Grid::single(v),
        beta: Grid::single(b),
        ..cfg.clone()
    };
    let mut files = vec![write_provenance(&single, dir)?];
    let mut t = Table::new(&["w", "p"])?;
    for o in &dist.outcomes {
        t.row(vec![o.w.into(), o.p.into()])?;
    }
    t.save(dir, "pdw.csv", &mut files)?;

    let r = density_response(&spec, b, cfg.fd_step)?;
    let mut t = Table::new(&["i", "j", "dn_dV"])?;
    for i in 0..r.nrows() {
        for j in 0..r.ncols() {
            t.row(vec![(i + 1).into(), (j + 1).into(), r[(i, j)].into()])?;
        }
    }
    t.save(dir, "response.csv", &mut files)?;
    Ok(files)
}
