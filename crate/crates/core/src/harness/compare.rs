use serde::Serialize;

use super::episode::run_episode;
use super::metrics::Metrics;
use super::scenario::{ScenarioConfig, ScenarioError, Variant};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub results: Vec<Metrics>,
}

impl Comparison {
    pub fn get(&self, variant: Variant) -> Option<&Metrics> {
        self.results.iter().find(|m| m.variant == variant)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "variant",
            "outcome",
            "collision",
            "arrival_time",
            "min_clearance",
            "linear_speed_variance",
            "angular_speed_variance",
            "path_length",
        ])?;
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for m in &self.results {
            w.write_record([
                m.variant.name().to_string(),
                serde_json::to_value(m.outcome)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_owned))
                    .unwrap_or_default(),
                m.collision.to_string(),
                opt(m.arrival_time),
                opt(m.min_clearance),
                m.linear_speed_variance.to_string(),
                m.angular_speed_variance.to_string(),
                m.path_length.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `cfg` once per variant with identical seeds, one thread each.
pub fn compare(cfg: &ScenarioConfig, variants: &[Variant]) -> Result<Comparison, ScenarioError> {
    let mut unique: Vec<Variant> = Vec::new();
    for &v in variants {
        if !unique.contains(&v) {
            unique.push(v);
        }
    }
    if unique.len() < 2 {
        return Err(ScenarioError::Validation {
            field: "variants".into(),
            message: format!("need at least two distinct variants, got {}", unique.len()),
        });
    }
    let results = std::thread::scope(|s| {
        let handles: Vec<_> = unique
            .iter()
            .map(|&v| {
                let run = cfg.for_variant(v);
                s.spawn(move || run_episode(&run).metrics)
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("episode thread panicked"))
            .collect()
    });
    Ok(Comparison {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        results,
    })
}
