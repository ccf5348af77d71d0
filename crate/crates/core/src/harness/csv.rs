//! CSV output: one row per (batch, checkpoint), sorted by (B, samples).
//! UTF-8, header row, `.` decimal separator, deterministic formatting.

use super::ExperimentResult;

pub const CSV_HEADER: &str =
    "experiment_id,env,B,samples,mean_gap,stderr,n_replications,diverged_count";

pub fn render_csv(result: &ExperimentResult) -> String {
    let mut out = String::with_capacity(1 << 16);
    out.push_str(CSV_HEADER);
    out.push('\n');
    let mut batches: Vec<_> = result.per_batch.iter().collect();
    batches.sort_by_key(|b| b.batch);
    for b in batches {
        debug_assert!(
            b.curve.sample_counts.windows(2).all(|w| w[0] < w[1]),
            "samples must strictly increase within a batch group"
        );
        for (i, &samples) in b.curve.sample_counts.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{:.12e},{:.12e},{},{}\n",
                result.config.id,
                result.config.environment.name,
                b.batch,
                samples,
                b.curve.mean_gap[i],
                b.curve.stderr[i],
                b.replications.len(),
                b.diverged_count,
            ));
        }
    }
    out
}

/// Parsed CSV row, used by the output consistency tests.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment_id: String,
    pub env: String,
    pub batch: u64,
    pub samples: u64,
    pub mean_gap: f64,
    pub stderr: f64,
    pub n_replications: u32,
    pub diverged_count: u32,
}

pub fn parse_csv(body: &str) -> Result<Vec<CsvRow>, String> {
    let mut lines = body.lines();
    let header = lines.next().ok_or("empty document")?;
    if header != CSV_HEADER {
        return Err(format!("unexpected header: {header}"));
    }
    let mut rows = Vec::new();
    for (no, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(format!("line {}: expected 8 fields", no + 2));
        }
        let parse_err = |field: &str| format!("line {}: bad {field}", no + 2);
        rows.push(CsvRow {
            experiment_id: parts[0].to_string(),
            env: parts[1].to_string(),
            batch: parts[2].parse().map_err(|_| parse_err("B"))?,
            samples: parts[3].parse().map_err(|_| parse_err("samples"))?,
            mean_gap: parts[4].parse().map_err(|_| parse_err("mean_gap"))?,
            stderr: parts[5].parse().map_err(|_| parse_err("stderr"))?,
            n_replications: parts[6].parse().map_err(|_| parse_err("n_replications"))?,
            diverged_count: parts[7].parse().map_err(|_| parse_err("diverged_count"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{BatchResult, EnvironmentConfig, ExperimentConfig, ScheduleConfig};
    use crate::oracles::rates::LossCurve;
    use crate::sgd::ScheduleFamily;

    fn fake_result() -> ExperimentResult {
        let curve = |scale: f64| LossCurve {
            sample_counts: vec![1, 10, 100],
            mean_gap: vec![scale, scale / 10.0, scale / 100.0],
            stderr: vec![0.01; 3],
        };
        ExperimentResult {
            config: ExperimentConfig {
                id: "unit".into(),
                environment: EnvironmentConfig {
                    name: "queue".into(),
                    params: serde_json::json!({}),
                },
                schedule: ScheduleConfig { family: ScheduleFamily::InverseT, eta0: 1.0 },
                batches: vec![10, 1],
                horizon: 100,
                replications: 2,
                averaging: false,
                projection: true,
                seed: 1,
                reference_slope: -1.0,
            },
            checkpoints: vec![1, 10, 100],
            per_batch: vec![
                BatchResult {
                    batch: 10,
                    curve: curve(2.0),
                    fit: Err("n/a".into()),
                    diverged_count: 1,
                    replications: vec![],
                },
                BatchResult {
                    batch: 1,
                    curve: curve(1.0),
                    fit: Err("n/a".into()),
                    diverged_count: 0,
                    replications: vec![],
                },
            ],
            optimum_report: String::new(),
            warnings: vec![],
        }
    }

    #[test]
    fn rows_sorted_and_parse_back() {
        let body = render_csv(&fake_result());
        let rows = parse_csv(&body).unwrap();
        assert_eq!(rows.len(), 6);
        // Sorted by (B, samples) even though config listed B=10 first.
        let order: Vec<(u64, u64)> = rows.iter().map(|r| (r.batch, r.samples)).collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(order, sorted);
        assert_eq!(rows[0].diverged_count, 0);
        assert_eq!(rows[3].diverged_count, 1);
        assert!((rows[1].mean_gap - 0.1).abs() < 1e-15);
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b,c\n").is_err());
        let body = format!("{CSV_HEADER}\nx,queue,1,10,nope,0,1,0\n");
        assert!(parse_csv(&body).is_err());
    }
}
