use super::config::{ExperimentConfig, Grid, Level, Method};
use crate::error::{Error, Result};
use crate::lattice::PotentialShape;

pub const PRESETS: &[&str] = &[
    "fig1", "fig2", "figd", "fig3a", "fig3b", "fig6", "fig7", "fig8", "fig9",
];

/// Dimer heat map over `U ∈ [0, 10]`, `v0 ∈ [0, 5]` at `β = 1`.
fn dimer_map(name: &str, method: Method) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        sites: vec![2],
        interaction: Grid::linspace(0.0, 10.0, 41),
        amplitude: Grid::linspace(0.0, 5.0, 41),
        beta: Grid::single(1.0),
        dv0: 0.05,
        method,
        level: Level::Moments,
        amplitude_response: true,
        ..ExperimentConfig::default()
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "fig1" => dimer_map(name, Method::Exact),
        "fig2" => dimer_map(name, Method::Ks),
        "figd" => ExperimentConfig {
            name: name.into(),
            sites: vec![2, 4, 6, 8],
            interaction: Grid::linspace(0.0, 10.0, 21),
            amplitude: Grid::single(5.0),
            method: Method::Both,
            level: Level::Densities,
            ..ExperimentConfig::default()
        },
        "fig3a" => ExperimentConfig {
            name: name.into(),
            interaction: Grid::linspace(0.0, 10.0, 41),
            amplitude: Grid::single(2.0),
            method: Method::Both,
            level: Level::Moments,
            ..ExperimentConfig::default()
        },
        "fig3b" => ExperimentConfig {
            name: name.into(),
            interaction: Grid::single(3.0),
            amplitude: Grid::single(2.0),
            beta: Grid::linspace(0.1, 10.0, 41),
            method: Method::Both,
            level: Level::Moments,
            ..ExperimentConfig::default()
        },
        "fig6" => ExperimentConfig {
            name: name.into(),
            sites: vec![8],
            interaction: Grid::linspace(0.0, 10.0, 21),
            amplitude: Grid::list(&[0.5, 2.5, 5.0]),
            method: Method::Both,
            level: Level::Densities,
            ..ExperimentConfig::default()
        },
        "fig7" => ExperimentConfig {
            name: name.into(),
            sites: vec![16],
            interaction: Grid::linspace(0.0, 10.0, 21),
            amplitude: Grid::linspace(0.0, 5.0, 21),
            method: Method::Ks,
            level: Level::Moments,
            ..ExperimentConfig::default()
        },
        "fig8" => ExperimentConfig {
            name: name.into(),
            sites: vec![20],
            shape: PotentialShape::Harmonic,
            interaction: Grid::linspace(0.0, 10.0, 21),
            amplitude: Grid::linspace(0.015, 0.3, 20),
            method: Method::Ks,
            level: Level::Moments,
            ..ExperimentConfig::default()
        },
        "fig9" => ExperimentConfig {
            name: name.into(),
            sites: vec![20],
            shape: PotentialShape::Harmonic,
            interaction: Grid::list(&[0.0, 2.0, 5.0, 10.0]),
            amplitude: Grid::single(0.175),
            method: Method::Ks,
            level: Level::Densities,
            ..ExperimentConfig::default()
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.name, *name);
        }
        assert!(matches!(preset("fig4"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn fig1_grid() {
        let cfg = preset("fig1").unwrap();
        assert_eq!(cfg.points(), 41 * 41);
        assert_eq!(cfg.amplitude.values()[40], 5.0);
        assert_eq!(cfg.dv0, 0.05);
        assert_eq!(cfg.method, Method::Exact);
    }
}
