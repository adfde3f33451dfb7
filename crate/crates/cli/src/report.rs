//! Evaluation report files and the aggregate table grouped by T60 buckets.

use serde::{Deserialize, Serialize};

use tracksep_core::metrics::EvalReport;

/// Written into every report a CLI run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: u64,
    pub components: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(seed: u64, components: &str, config_bytes: &[u8]) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            components: components.to_string(),
            config_sha256: crate::config::sha256_hex(config_bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub entry: String,
    pub t60: f64,
    pub report: EvalReport,
}

/// The reverberation buckets mirror the T60 sampling range 0.2–1.0 s.
pub const T60_BUCKETS: [(f64, f64); 4] =
    [(0.2, 0.4), (0.4, 0.6), (0.6, 0.8), (0.8, 1.0)];

pub fn t60_bucket(t60: f64) -> usize {
    match t60 {
        t if t < 0.4 => 0,
        t if t < 0.6 => 1,
        t if t < 0.8 => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub n_sources: usize,
    pub snr_db: f64,
    pub si_snr_db: f64,
    pub sdr_db: f64,
    pub ewrmsae_deg: f64,
}

impl MetricMeans {
    fn from_sums(n: usize, sums: [f64; 4]) -> Self {
        let d = n.max(1) as f64;
        Self {
            n_sources: n,
            snr_db: sums[0] / d,
            si_snr_db: sums[1] / d,
            sdr_db: sums[2] / d,
            ewrmsae_deg: sums[3] / d,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketStats {
    pub t60_lo: f64,
    pub t60_hi: f64,
    pub means: MetricMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub provenance: Provenance,
    pub overall: MetricMeans,
    pub buckets: Vec<BucketStats>,
    pub entries: Vec<EntryReport>,
}

pub fn aggregate(provenance: Provenance, entries: Vec<EntryReport>) -> AggregateReport {
    let mut bucket_sums = [[0.0f64; 4]; 4];
    let mut bucket_counts = [0usize; 4];
    let mut total = [0.0f64; 4];
    let mut count = 0usize;
    for e in &entries {
        let b = t60_bucket(e.t60);
        for s in &e.report.per_source {
            let vals = [s.snr_db, s.si_snr_db, s.sdr_db, s.ewrmsae_deg];
            for (acc, v) in bucket_sums[b].iter_mut().zip(vals) {
                *acc += v;
            }
            for (acc, v) in total.iter_mut().zip(vals) {
                *acc += v;
            }
            bucket_counts[b] += 1;
            count += 1;
        }
    }
    let buckets = T60_BUCKETS
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| BucketStats {
            t60_lo: lo,
            t60_hi: hi,
            means: MetricMeans::from_sums(bucket_counts[i], bucket_sums[i]),
        })
        .collect();
    AggregateReport {
        provenance,
        overall: MetricMeans::from_sums(count, total),
        buckets,
        entries,
    }
}

/// Plain-text table for the terminal.
pub fn render_table(agg: &AggregateReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "components: {}  seed: {}  config: {}\n",
        agg.provenance.components,
        agg.provenance.seed,
        &agg.provenance.config_sha256[..12.min(agg.provenance.config_sha256.len())],
    ));
    out.push_str(&format!(
        "{:<12} {:>8} {:>10} {:>10} {:>10} {:>12}\n",
        "t60 bucket", "sources", "SNR dB", "SI-SNR dB", "SDR dB", "EWRMSAE deg"
    ));
    for b in &agg.buckets {
        if b.means.n_sources == 0 {
            out.push_str(&format!(
                "{:<12} {:>8} {:>10} {:>10} {:>10} {:>12}\n",
                format!("{:.1}-{:.1}", b.t60_lo, b.t60_hi),
                0,
                "-",
                "-",
                "-",
                "-"
            ));
        } else {
            out.push_str(&format!(
                "{:<12} {:>8} {:>10.2} {:>10.2} {:>10.2} {:>12.2}\n",
                format!("{:.1}-{:.1}", b.t60_lo, b.t60_hi),
                b.means.n_sources,
                b.means.snr_db,
                b.means.si_snr_db,
                b.means.sdr_db,
                b.means.ewrmsae_deg
            ));
        }
    }
    out.push_str(&format!(
        "{:<12} {:>8} {:>10.2} {:>10.2} {:>10.2} {:>12.2}\n",
        "overall",
        agg.overall.n_sources,
        agg.overall.snr_db,
        agg.overall.si_snr_db,
        agg.overall.sdr_db,
        agg.overall.ewrmsae_deg
    ));
    out
}
