//! Metrics CSV, summary JSON and binary chain dumps.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptation::AdaptEvent;
use crate::diagnostics::{Metric, MetricRecord};
use crate::error::{Error, Result};
use crate::sampler::ChainRecord;

/// Bumped whenever the CSV columns, summary layout or chain format change.
pub const SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 5] = ["repetition", "metric", "component", "n", "value"];

const CHAIN_MAGIC: &[u8; 8] = b"PMCHAIN\x01";

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Renders records as CSV. Components are 1-based, `joint` marks joint
/// metrics, and absent `n`/`value` fields are left empty.
pub fn metrics_csv(records: &[MetricRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.repetition.to_string(),
            r.metric.as_str().to_string(),
            r.component.map_or_else(|| "joint".to_string(), |k| (k + 1).to_string()),
            r.n.map_or_else(String::new, |n| n.to_string()),
            r.value.map_or_else(String::new, |v| v.to_string()),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn read_metrics_csv(bytes: &[u8]) -> Result<Vec<MetricRecord>> {
    let mut rd = csv::Reader::from_reader(bytes);
    let header = rd.headers().map_err(csv_err)?;
    if header.iter().ne(METRICS_HEADER) {
        return Err(Error::ChainFormat("unexpected metrics header".into()));
    }
    let parse_err = |s: &str| Error::ChainFormat(format!("bad metrics field `{s}`"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let f = |i: usize| row.get(i).unwrap_or("");
        out.push(MetricRecord {
            repetition: f(0).parse().map_err(|_| parse_err(f(0)))?,
            metric: f(1).parse()?,
            component: match f(2) {
                "joint" => None,
                s => Some(s.parse::<usize>().map_err(|_| parse_err(s))? - 1),
            },
            n: opt(f(3)).map(|s| s.parse().map_err(|_| parse_err(s))).transpose()?,
            value: opt(f(4)).map(|s| s.parse().map_err(|_| parse_err(s))).transpose()?,
        });
    }
    Ok(out)
}

fn opt(s: &str) -> Option<&str> {
    (!s.is_empty()).then_some(s)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Empirical quantile by linear interpolation between order statistics
/// (`h = (n - 1) p`), i.e. the type 7 rule.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: Metric,
    /// 1-based; absent for joint metrics.
    pub component: Option<usize>,
    pub n: Option<u64>,
    pub count: usize,
    /// Records without a value, such as chains that never hit.
    pub missing: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub q025: Option<f64>,
    pub q975: Option<f64>,
}

type GroupKey = (Metric, Option<usize>, Option<u64>);

/// Mean, median and 2.5%/97.5% quantiles per (metric, component, n).
pub fn summarize(records: &[MetricRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::Contract("nothing to summarise".into()));
    }
    // values and count of missing entries per key
    let mut groups: BTreeMap<GroupKey, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let g = groups.entry((r.metric, r.component, r.n)).or_default();
        match r.value {
            Some(v) => g.0.push(v),
            None => g.1 += 1,
        }
    }
    Ok(groups
        .into_iter()
        .map(|((metric, component, n), (mut vals, missing))| {
            vals.sort_by(f64::total_cmp);
            let stat = |p: f64| (!vals.is_empty()).then(|| quantile_sorted(&vals, p));
            SummaryRow {
                metric,
                component: component.map(|k| k + 1),
                n,
                count: vals.len() + missing,
                missing,
                mean: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                median: stat(0.5),
                q025: stat(0.025),
                q975: stat(0.975),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_hash: String,
    pub target: String,
    pub sampler: String,
    pub repetitions: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub mean_acceptance_rate: f64,
    /// Target log-density evaluations per repetition.
    pub target_evaluations: Vec<u64>,
    pub adaptation_events: usize,
    pub stats: Vec<SummaryRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ChainHeader {
    schema_version: u32,
    dim: usize,
    iterations: usize,
    repetition: u64,
    seed: u64,
    config_hash: String,
    /// Full experiment config as TOML.
    config: String,
    has_selected: bool,
    target_evals: u64,
    events: Vec<AdaptEvent>,
}

/// Serialises a chain: magic, header length (u64 LE), JSON header, then the
/// states as f64 LE, acceptance flags as bytes and selections as u16 LE.
pub fn encode_chain(chain: &ChainRecord, config_toml: &str) -> Result<Vec<u8>> {
    let header = ChainHeader {
        schema_version: SCHEMA_VERSION,
        dim: chain.dim,
        iterations: chain.iterations(),
        repetition: chain.repetition,
        seed: chain.seed,
        config_hash: chain.config_hash.clone(),
        config: config_toml.to_string(),
        has_selected: !chain.selected.is_empty(),
        target_evals: chain.target_evals,
        events: chain.events.clone(),
    };
    let h = serde_json::to_vec(&header).map_err(|e| Error::ChainFormat(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + h.len() + chain.states.len() * 8 + chain.accepted.len() * 3);
    out.extend_from_slice(CHAIN_MAGIC);
    out.extend_from_slice(&(h.len() as u64).to_le_bytes());
    out.extend_from_slice(&h);
    for v in &chain.states {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(chain.accepted.iter().map(|a| *a as u8));
    for s in &chain.selected {
        out.extend_from_slice(&s.to_le_bytes());
    }
    Ok(out)
}

/// Inverse of [`encode_chain`]; returns the chain and its embedded config.
pub fn decode_chain(bytes: &[u8]) -> Result<(ChainRecord, String)> {
    let fmt = |m: &str| Error::ChainFormat(m.to_string());
    let mut rd = bytes;
    let mut magic = [0u8; 8];
    rd.read_exact(&mut magic).map_err(|_| fmt("truncated chain file"))?;
    if &magic != CHAIN_MAGIC {
        return Err(fmt("not a chain file"));
    }
    let mut len = [0u8; 8];
    rd.read_exact(&mut len).map_err(|_| fmt("truncated chain file"))?;
    let len = u64::from_le_bytes(len) as usize;
    if rd.len() < len {
        return Err(fmt("truncated chain header"));
    }
    let (h, body) = rd.split_at(len);
    let header: ChainHeader = serde_json::from_slice(h).map_err(|e| Error::ChainFormat(e.to_string()))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(fmt("unsupported chain schema version"));
    }
    let d = header.dim;
    let n_states = (header.iterations + 1) * d;
    let n_updates = header.iterations * d;
    let n_sel = if header.has_selected { n_updates } else { 0 };
    if body.len() != n_states * 8 + n_updates + n_sel * 2 {
        return Err(fmt("chain body has the wrong length"));
    }
    let (s, rest) = body.split_at(n_states * 8);
    let (a, sel) = rest.split_at(n_updates);
    let chain = ChainRecord {
        dim: d,
        states: s.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect(),
        selected: sel.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect(),
        accepted: a.iter().map(|b| *b != 0).collect(),
        events: header.events,
        target_evals: header.target_evals,
        seed: header.seed,
        repetition: header.repetition,
        config_hash: header.config_hash,
    };
    Ok((chain, header.config))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(rep: u64, metric: Metric, component: Option<usize>, n: Option<u64>, value: Option<f64>) -> MetricRecord {
        MetricRecord {
            repetition: rep,
            metric,
            component,
            n,
            value,
        }
    }

    #[test]
    fn csv_golden() {
        let rows = vec![
            rec(1, Metric::Act, Some(0), None, Some(3.25)),
            rec(1, Metric::Asjd, Some(1), None, Some(0.1)),
            rec(2, Metric::CoverageJoint, None, Some(100), Some(0.01)),
            rec(2, Metric::HittingTime, None, None, None),
            rec(3, Metric::HittingTime, None, None, Some(37.0)),
        ];
        let bytes = metrics_csv(&rows).unwrap();
        let golden = "repetition,metric,component,n,value\n\
                      1,act,1,,3.25\n\
                      1,asjd,2,,0.1\n\
                      2,coverage_joint,joint,100,0.01\n\
                      2,hitting_time,joint,,\n\
                      3,hitting_time,joint,,37\n";
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), golden);
        assert_eq!(read_metrics_csv(&bytes).unwrap(), rows);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_sorted(&v, 0.025) - 3.475).abs() < 1e-12);
        assert_eq!(quantile_sorted(&v, 0.5), 50.5);
        assert_eq!(quantile_sorted(&[4.0], 0.975), 4.0);
    }

    #[test]
    fn summary_of_single_record() {
        let s = summarize(&[rec(1, Metric::Act, Some(2), None, Some(7.5))]).unwrap();
        assert_eq!(s.len(), 1);
        let r = &s[0];
        assert_eq!(r.component, Some(3));
        for v in [r.mean, r.median, r.q025, r.q975] {
            assert_eq!(v, Some(7.5));
        }
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summary_counts_missing_values() {
        let s = summarize(&[
            rec(1, Metric::HittingTime, None, None, None),
            rec(2, Metric::HittingTime, None, None, Some(10.0)),
        ])
        .unwrap();
        assert_eq!((s[0].count, s[0].missing, s[0].median), (2, 1, Some(10.0)));
    }

    #[test]
    fn chain_round_trip() {
        let chain = ChainRecord {
            dim: 2,
            states: vec![0.0, 1.0, 0.5, -2.0, 0.25, 3.0],
            selected: vec![1, 0, 5, 2],
            accepted: vec![true, false, true, true],
            events: vec![AdaptEvent {
                iteration: 50,
                component: 1,
                old: 1.0,
                new: 2.0,
            }],
            target_evals: 19,
            seed: 9,
            repetition: 3,
            config_hash: "abc".into(),
        };
        let bytes = encode_chain(&chain, "x = 1").unwrap();
        let (back, cfg) = decode_chain(&bytes).unwrap();
        assert_eq!(back, chain);
        assert_eq!(cfg, "x = 1");
        assert!(decode_chain(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_chain(b"garbage!garbage!").is_err());
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
    }
}
