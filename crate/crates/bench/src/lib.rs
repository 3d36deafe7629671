//! Shared fixtures for the benchmarks.

use skyplace::evt::{gev_quantile, GevParams};
use skyplace::gpr::ZoneModel;
use skyplace::harness::{run_offline_pipeline, vue_snapshot, PipelineOptions};
use skyplace::placement::{vue_contexts, VueContext};
use skyplace::scenario::{Distribution, ExperimentConfig};

/// Small configuration whose offline stage trains in about a second.
pub fn toy_config() -> ExperimentConfig {
    ExperimentConfig {
        num_vues: 20,
        samples_per_position: 400,
        training_positions: 9,
        gpr_restarts: 2,
        evaluation_blocks: 200,
        ..ExperimentConfig::default()
    }
}

/// `n` GEV variates at evenly spaced probabilities, so the set is the same
/// on every run without touching a random generator.
pub fn gev_sample(n: usize, params: &GevParams) -> Vec<f64> {
    (0..n)
        .map(|k| gev_quantile((k as f64 + 0.5) / n as f64, params).expect("probability in (0, 1)"))
        .collect()
}

/// Trained zone models and a biased vehicle snapshot for `config`.
pub fn trained(config: &ExperimentConfig) -> (Vec<ZoneModel>, Vec<VueContext>) {
    let out = run_offline_pipeline(config, &PipelineOptions::default()).expect("offline pipeline");
    let d = Distribution::Biased(config.biased_zone_weights.clone());
    let vehicles = vue_snapshot(config, &d, config.master_seed).expect("snapshot");
    let vues = vue_contexts(&vehicles, config).expect("vehicle contexts");
    (out.models, vues)
}
