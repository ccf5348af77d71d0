//! Bundled experiment presets: the batch-size sweeps, schedule variants,
//! and projection toggles of the reference experiment suite.

use serde_json::json;

use super::{EnvironmentConfig, ExperimentConfig, ScheduleConfig};
use crate::sgd::ScheduleFamily;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// A named bundle of experiments sharing one environment setting.
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub experiments: Vec<ExperimentConfig>,
}

fn inventory_preset(name: &'static str, alpha: f64, summary: &'static str) -> Preset {
    let env = EnvironmentConfig {
        name: "inventory".into(),
        params: json!({ "alpha": alpha }),
    };
    let base = ExperimentConfig {
        id: String::new(),
        environment: env,
        schedule: ScheduleConfig { family: ScheduleFamily::InverseT, eta0: 2.0 },
        batches: vec![1, 10, 100],
        horizon: 10_000,
        replications: 100,
        averaging: false,
        projection: true,
        seed: DEFAULT_SEED,
        reference_slope: -1.0,
    };
    let mut invt = base.clone();
    invt.id = format!("{name}-invt");
    let mut sqrt = base;
    sqrt.id = format!("{name}-sqrt");
    sqrt.schedule.family = ScheduleFamily::InverseSqrt;
    sqrt.averaging = true;
    Preset { name, summary, experiments: vec![invt, sqrt] }
}

fn queue_env() -> EnvironmentConfig {
    EnvironmentConfig { name: "queue".into(), params: json!({}) }
}

fn queue_mm1_preset() -> Preset {
    let base = ExperimentConfig {
        id: String::new(),
        environment: queue_env(),
        schedule: ScheduleConfig { family: ScheduleFamily::InverseT, eta0: 1.0 },
        batches: vec![1, 10, 100],
        horizon: 100_000,
        replications: 100,
        averaging: false,
        projection: true,
        seed: DEFAULT_SEED,
        reference_slope: -1.0,
    };
    let mut invt = base.clone();
    invt.id = "queue-mm1-invt".into();
    let mut sqrt = base;
    sqrt.id = "queue-mm1-sqrt".into();
    sqrt.schedule.family = ScheduleFamily::InverseSqrt;
    sqrt.averaging = true;
    sqrt.reference_slope = -0.5;
    Preset {
        name: "queue-mm1",
        summary: "M/M/1 pricing and capacity sizing, projected, both schedules",
        experiments: vec![invt, sqrt],
    }
}

fn queue_unprojected_preset() -> Preset {
    let base = ExperimentConfig {
        id: String::new(),
        environment: queue_env(),
        schedule: ScheduleConfig { family: ScheduleFamily::InverseSqrt, eta0: 1.0 },
        batches: vec![1, 10, 100],
        horizon: 100_000,
        replications: 100,
        averaging: false,
        projection: false,
        seed: DEFAULT_SEED,
        reference_slope: -0.5,
    };
    let mut raw = base.clone();
    raw.id = "queue-unprojected-raw".into();
    let mut avg = base;
    avg.id = "queue-unprojected-avg".into();
    avg.averaging = true;
    Preset {
        name: "queue-unprojected",
        summary: "instability demo: no projection, with and without averaging",
        experiments: vec![raw, avg],
    }
}

fn rl_preset(name: &'static str, states: usize, summary: &'static str) -> Preset {
    let cfg = ExperimentConfig {
        id: format!("{name}-sqrt"),
        environment: EnvironmentConfig {
            name: "rl".into(),
            params: json!({ "n_states": states, "n_actions": states }),
        },
        schedule: ScheduleConfig { family: ScheduleFamily::InverseSqrt, eta0: 2.0 },
        batches: vec![1, 10, 100],
        horizon: 100_000,
        replications: 100,
        averaging: true,
        projection: false,
        seed: DEFAULT_SEED,
        reference_slope: -0.5,
    };
    Preset { name, summary, experiments: vec![cfg] }
}

/// Every bundled preset.
pub fn presets() -> Vec<Preset> {
    vec![
        inventory_preset(
            "inventory-0.8",
            0.8,
            "stock-out-damped inventory, AR coefficient 0.8",
        ),
        inventory_preset(
            "inventory-0.9",
            0.9,
            "stock-out-damped inventory, AR coefficient 0.9 (slow mixing)",
        ),
        queue_mm1_preset(),
        queue_unprojected_preset(),
        rl_preset("rl-5x5", 5, "actor-critic on 100 random 5x5 MDPs"),
        rl_preset("rl-10x10", 10, "actor-critic on 100 random 10x10 MDPs"),
    ]
}

pub fn find_preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_serialize_round_trip() {
        for preset in presets() {
            for cfg in &preset.experiments {
                let parsed = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
                assert_eq!(*cfg, parsed, "preset {} drifted through JSON", cfg.id);
                super::super::validate_config(cfg).unwrap();
            }
        }
    }

    #[test]
    fn preset_names_are_unique() {
        let mut names: Vec<_> = presets().iter().map(|p| p.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), presets().len());
    }

    #[test]
    fn lookup() {
        assert!(find_preset("queue-mm1").is_some());
        assert!(find_preset("queue-mm2").is_none());
    }
}
