//! Picks a representative subset of records: per-lead features, PCA,
//! k-means (or DBSCAN) clustering and proportional stratified sampling.
//!
//! cargo run --example sample

use ecg_byte::sampler::{extract_features, fit_cluster_model, quotas, stratified_sample, SamplerConfig};
use ecg_byte::synth::{synthetic_corpus, SynthConfig};

fn main() -> ecg_byte::Result<()> {
    let records = synthetic_corpus(120, 11, &SynthConfig::default())?;
    let features = records
        .iter()
        .enumerate()
        .map(|(i, r)| extract_features(r, i))
        .collect::<ecg_byte::Result<Vec<_>>>()?;
    println!("{} records, {} features each", features.len(), features[0].values.len());

    let cfg = SamplerConfig { seed: 42, ..Default::default() };
    let model = fit_cluster_model(&features, &cfg)?;
    let summary = model.summary();
    println!(
        "{} PCA components ({:.1}% variance), {:?} with k = {}",
        model.pca.num_components(),
        100.0 * summary.retained_variance,
        summary.method,
        summary.k
    );
    println!("cluster sizes: {:?}", summary.cluster_sizes);

    let sizes: Vec<usize> = summary.cluster_sizes.values().copied().collect();
    println!("quotas for 30: {:?}", quotas(&sizes, 30)?);
    let picked = stratified_sample(model.assignments(), 30, cfg.seed)?;
    println!("picked records: {picked:?}");
    Ok(())
}
