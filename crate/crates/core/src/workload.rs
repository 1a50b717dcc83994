//! Arrival traces for the three load regimes, SLO settings, and the built-in
//! functions and applications.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{ApplicationDag, Configuration, FunctionSpec, ProfileTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time_ms: f64,
    /// Index into the scenario's application list.
    pub app: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Heavy,
    Normal,
    Light,
}

impl Regime {
    /// Bounds of the uniform inter-arrival gap.
    pub fn interval_range_ms(self) -> (f64, f64) {
        match self {
            Regime::Heavy => (10.0, 16.8),
            Regime::Normal => (20.0, 33.6),
            Regime::Light => (40.0, 67.2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Heavy => "heavy",
            Regime::Normal => "normal",
            Regime::Light => "light",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "heavy" => Ok(Regime::Heavy),
            "normal" => Ok(Regime::Normal),
            "light" => Ok(Regime::Light),
            _ => Err(format!("unknown regime `{s}` (expected heavy, normal or light)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SloMode {
    Strict,
    Moderate,
    Relaxed,
}

impl SloMode {
    pub fn factor(self) -> f64 {
        match self {
            SloMode::Strict => 0.8,
            SloMode::Moderate => 1.0,
            SloMode::Relaxed => 1.2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SloMode::Strict => "strict",
            SloMode::Moderate => "moderate",
            SloMode::Relaxed => "relaxed",
        }
    }
}

impl std::str::FromStr for SloMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "strict" => Ok(SloMode::Strict),
            "moderate" => Ok(SloMode::Moderate),
            "relaxed" => Ok(SloMode::Relaxed),
            _ => Err(format!("unknown SLO mode `{s}` (expected strict, moderate or relaxed)")),
        }
    }
}

/// Uniform gaps in `[lo, hi]` and a uniform application pick per arrival.
pub fn generate_trace<R: Rng + ?Sized>(
    interval_range_ms: (f64, f64),
    n_apps: usize,
    horizon_ms: f64,
    rng: &mut R,
) -> Vec<Arrival> {
    let (lo, hi) = interval_range_ms;
    let mut out = Vec::new();
    if n_apps == 0 || !(horizon_ms > 0.0) || !(lo > 0.0) {
        return out;
    }
    let mut t = 0.0;
    loop {
        t += if hi > lo { rng.random_range(lo..=hi) } else { lo };
        if t >= horizon_ms {
            return out;
        }
        out.push(Arrival { time_ms: t, app: rng.random_range(0..n_apps) });
    }
}

/// Critical path of `app` at the minimum configuration, cold starts excluded.
pub fn min_config_latency(app: &ApplicationDag, profiles: &ProfileTable) -> Result<f64> {
    let times = (0..app.len())
        .map(|i| profiles.exec_ms(app.name(i), Configuration::MIN))
        .collect::<Result<Vec<f64>>>()?;
    Ok(app.critical_path(|i| times[i]))
}

pub fn slo_for(app: &ApplicationDag, mode: SloMode, profiles: &ProfileTable) -> Result<f64> {
    Ok(mode.factor() * min_config_latency(app, profiles)?)
}

/// The six DNN functions: base time at `(1,1,1)`, cold start, input size.
pub fn builtin_functions() -> Vec<FunctionSpec> {
    vec![
        FunctionSpec::new("super_resolution", 86.0, 3503.0, 2.7),
        FunctionSpec::new("segmentation", 293.0, 16510.0, 2.5),
        FunctionSpec::new("deblur", 319.0, 22343.0, 1.1),
        FunctionSpec::new("classification", 147.0, 18299.0, 0.147),
        FunctionSpec::new("background_removal", 1047.0, 3729.0, 2.5),
        FunctionSpec::new("depth_recognition", 828.0, 16479.0, 0.648),
    ]
}

/// Stage lists of the four built-in applications.
pub fn builtin_app_chains() -> Vec<(&'static str, Vec<&'static str>)> {
    vec![
        ("image_classification", vec!["super_resolution", "segmentation", "classification"]),
        ("depth_recognition", vec!["deblur", "super_resolution", "depth_recognition"]),
        ("background_elimination", vec!["super_resolution", "deblur", "background_removal"]),
        (
            "expanded_image_classification",
            vec!["deblur", "super_resolution", "background_removal", "segmentation", "classification"],
        ),
    ]
}

/// The built-in applications with SLOs set by `mode`.
pub fn builtin_apps(profiles: &ProfileTable, mode: SloMode) -> Result<Vec<ApplicationDag>> {
    builtin_app_chains()
        .into_iter()
        .map(|(id, stages)| {
            let dag = ApplicationDag::chain(id, &stages, 1.0)?;
            let slo = slo_for(&dag, mode, profiles)?;
            dag.with_slo(slo)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConfigGrid, ProfileModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn profiles() -> ProfileTable {
        ProfileTable::synthesize(&builtin_functions(), &ConfigGrid::default(), &ProfileModel::default()).unwrap()
    }

    #[test]
    fn empty_and_degenerate_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(generate_trace((10.0, 16.8), 4, 0.0, &mut rng).is_empty());
        let t = generate_trace((10.0, 10.0), 1, 55.0, &mut rng);
        let times: Vec<f64> = t.iter().map(|a| a.time_ms).collect();
        assert_eq!(times, vec![10.0, 20.0, 30.0, 40.0, 50.0]);
    }

    #[test]
    fn image_classification_slo() {
        let p = profiles();
        let dag = ApplicationDag::chain("ic", &["super_resolution", "segmentation", "classification"], 1.0).unwrap();
        assert_eq!(slo_for(&dag, SloMode::Moderate, &p).unwrap(), 526.0);
        assert!((slo_for(&dag, SloMode::Strict, &p).unwrap() - 420.8).abs() < 1e-9);
        let single = ApplicationDag::chain("one", &["deblur"], 1.0).unwrap();
        assert!((slo_for(&single, SloMode::Relaxed, &p).unwrap() - 1.2 * 319.0).abs() < 1e-9);
    }

    #[test]
    fn builtin_apps_are_valid() {
        let apps = builtin_apps(&profiles(), SloMode::Moderate).unwrap();
        assert_eq!(apps.len(), 4);
        assert_eq!(apps[3].len(), 5);
    }
}
