//! End-to-end audit: ingest query outputs, estimate advantage and per-sample
//! risk, compare against DP bounds, and write a report.
//!
//! A report is reproducible from its own config echo. Everything that varies
//! between runs (wall-clock time, stage durations) sits under the single
//! `timing` field.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::advantage::{
    advantage_continuous, advantage_discrete, advantage_from_individual, advantage_generalized,
    AdvantageEstimate, DEFAULT_GRID, MIN_MC_SAMPLES,
};
use crate::density::{DensityModel, DensityPair, DensitySpec};
use crate::error::{Error, Result};
use crate::experiment::{
    build_labeled_set, check_delta, check_prior, ExperimentConfig, LabeledQuerySet, QueryOutput, DEFAULT_DELTA,
};
use crate::individual::{dp_bound, individual_risk_batch, DpBound, DpComparison, IndividualRiskEstimate};
use crate::io::{ingest_query_csv, write_atomic, QueryPools};
use crate::metrics::named_metric;

pub const SCHEMA: &str = "mace-report/1";

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Query CSV with `m,q1,...` columns.
    pub input: PathBuf,
    pub prior_p: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Resample this many points with replacement from the pools. When
    /// absent, the file's rows are used as the sample directly.
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub density: DensitySpec,
    /// Generalized metrics to estimate empirically, e.g. `AM`, `WA(1,2,2,1)`.
    #[serde(default)]
    pub metrics: Vec<String>,
    /// Compute per-sample risk for every input row and the advantage implied
    /// by their mixture mean.
    #[serde(default)]
    pub per_sample: bool,
    /// Privacy budgets to compare the estimates against.
    #[serde(default)]
    pub dp_epsilon: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub per_sample_csv: Option<PathBuf>,
    #[serde(default)]
    pub plot_csv: Option<PathBuf>,
}

impl AuditConfig {
    pub fn new(input: impl Into<PathBuf>, prior_p: f64) -> Self {
        Self {
            input: input.into(),
            prior_p,
            delta: DEFAULT_DELTA,
            n_samples: None,
            density: DensitySpec::default(),
            metrics: Vec::new(),
            per_sample: false,
            dp_epsilon: Vec::new(),
            seed: 0,
            mc_samples: None,
            grid: DEFAULT_GRID,
            output: None,
            per_sample_csv: None,
            plot_csv: None,
        }
    }

    /// Checks every parameter without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        check_prior(self.prior_p)?;
        check_delta(self.delta)?;
        self.density.validate()?;
        if self.n_samples == Some(0) {
            return Err(Error::invalid("n_samples", "must be positive"));
        }
        for m in &self.metrics {
            named_metric(m, self.prior_p)?;
        }
        if let Some(m) = self.mc_samples {
            if m < MIN_MC_SAMPLES {
                return Err(Error::invalid(
                    "mc_samples",
                    format!("{m} is below the minimum of {MIN_MC_SAMPLES}"),
                ));
            }
        }
        if self.grid == 0 {
            return Err(Error::invalid("grid", "need at least one threshold"));
        }
        for &e in &self.dp_epsilon {
            dp_bound(e, self.prior_p)?;
        }
        if self.per_sample_csv.is_some() && !self.per_sample {
            return Err(Error::invalid("per_sample_csv", "requires per_sample"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub member_rows: usize,
    pub nonmember_rows: usize,
    pub n: usize,
    pub n_members: usize,
    pub n_nonmembers: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    Member,
    Nonmember,
    /// A point supplied directly rather than read from the input rows.
    Query,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerSampleRecord {
    pub pool: Pool,
    /// Position within its pool, in file order.
    pub index: usize,
    #[serde(flatten)]
    pub risk: IndividualRiskEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpCheck {
    pub bound: DpBound,
    /// Primary advantage estimate against the bound, lower end taken as the
    /// point minus the stability radius.
    pub advantage: DpComparison,
    /// Samples whose risk interval lies entirely above the bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample_witnesses: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub millis: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub stages: Vec<StageTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: String,
    pub tool_version: String,
    pub config: AuditConfig,
    pub data: DataSummary,
    pub results: Vec<AdvantageEstimate>,
    pub dp: Vec<DpCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<PerSampleRecord>>,
    pub warnings: Vec<String>,
    pub timing: Timing,
}

struct Clock {
    stages: Vec<StageTime>,
}

impl Clock {
    fn run<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage));
        self.stages.push(StageTime {
            stage: stage.to_string(),
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

fn labeled_set(pools: &QueryPools, cfg: &AuditConfig) -> Result<LabeledQuerySet> {
    match cfg.n_samples {
        Some(n) => {
            let mut exp = ExperimentConfig::new(cfg.prior_p, n, cfg.seed);
            exp.confidence_delta = cfg.delta;
            build_labeled_set(&pools.members, &pools.nonmembers, &exp)
        }
        None => LabeledQuerySet::from_parts(pools.members.clone(), pools.nonmembers.clone(), cfg.prior_p),
    }
}

/// Runs the configured pipeline and writes whichever outputs the config names.
pub fn run_audit(cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis());
    let mut clock = Clock { stages: Vec::new() };
    let mut warnings = Vec::new();

    let pools = clock.run("ingest", || ingest_query_csv(&cfg.input))?;
    let set = clock.run("sample", || labeled_set(&pools, cfg))?;
    let pair = clock.run("density", || DensityPair::fit(&set, &cfg.density))?;

    let mut results = Vec::new();
    let primary = clock.run("advantage", || match &cfg.density {
        DensitySpec::Discrete { .. } => {
            let scheme = match &pair.members {
                DensityModel::Discrete(d) => d.scheme().cloned(),
                DensityModel::Kde(_) => None,
            };
            advantage_discrete(&set, scheme.as_ref(), cfg.delta)
        }
        DensitySpec::Continuous(kde) => advantage_continuous(&set, kde, cfg.delta, cfg.mc_samples, cfg.seed),
    })?;
    results.push(primary.clone());

    for name in &cfg.metrics {
        let metric = named_metric(name, cfg.prior_p)?;
        let est = clock.run("generalized", || {
            advantage_generalized(&set, &metric, &cfg.density, cfg.delta, cfg.grid, cfg.seed)
        })?;
        warnings.extend(est.warnings.iter().map(|w| format!("{name}: {w}")));
        results.push(est);
    }

    let per_sample = if cfg.per_sample {
        let (records, from_individual) = clock.run("individual", || {
            let points: Vec<QueryOutput> = pools.members.iter().chain(&pools.nonmembers).cloned().collect();
            let batch = individual_risk_batch(&points, &pair.members, &pair.nonmembers, cfg.prior_p, None, cfg.delta)?;
            warnings.extend(batch.warnings);
            let records: Vec<PerSampleRecord> = batch
                .estimates
                .into_iter()
                .enumerate()
                .map(|(i, risk)| {
                    let (pool, index) = if i < pools.members.len() {
                        (Pool::Member, i)
                    } else {
                        (Pool::Nonmember, i - pools.members.len())
                    };
                    PerSampleRecord { pool, index, risk }
                })
                .collect();
            let adv = advantage_from_individual(&set, &pair.members, &pair.nonmembers, cfg.prior_p)?;
            Ok((records, adv))
        })?;
        results.push(from_individual);
        Some(records)
    } else {
        None
    };

    let dp = cfg
        .dp_epsilon
        .iter()
        .map(|&eps| {
            let bound = dp_bound(eps, cfg.prior_p)?;
            let lower = primary.concentration_radius.map(|r| (primary.point - r).max(0.0));
            Ok(DpCheck {
                bound,
                advantage: bound.compare(primary.point, lower),
                per_sample_witnesses: per_sample
                    .as_ref()
                    .map(|recs| recs.iter().filter(|r| bound.compare_risk(&r.risk).witness).count()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = AuditReport {
        schema: SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        data: DataSummary {
            member_rows: pools.members.len(),
            nonmember_rows: pools.nonmembers.len(),
            n: set.len(),
            n_members: set.n_members(),
            n_nonmembers: set.n_nonmembers(),
            dim: set.dim(),
        },
        results,
        dp,
        per_sample,
        warnings,
        timing: Timing {
            started_unix_ms,
            stages: clock.stages,
        },
    };

    if let Some(path) = &cfg.output {
        write_report(path, &report).map_err(|e| e.in_stage("write"))?;
    }
    if let (Some(path), Some(records)) = (&cfg.per_sample_csv, &report.per_sample) {
        write_per_sample_csv(path, records).map_err(|e| e.in_stage("write"))?;
    }
    if let Some(path) = &cfg.plot_csv {
        write_plot_csv(path, &report.results).map_err(|e| e.in_stage("write"))?;
    }
    Ok(report)
}

pub fn report_json(report: &AuditReport) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| Error::Degenerate(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_report(path: &Path, report: &AuditReport) -> Result<()> {
    write_atomic(path, &report_json(report)?)
}

pub fn read_report(path: &Path) -> Result<AuditReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>, path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::parse(path, e.to_string()))
}

/// One row per sample: pool, index, risk, interval, signed contrast, flag,
/// then the query coordinates.
pub fn write_per_sample_csv(path: &Path, records: &[PerSampleRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.risk.query_point.dim());
    let mut header: Vec<String> = ["pool", "index", "point", "lower", "upper", "f_p_signed", "uninformative"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=dim).map(|k| format!("q{k}")));
    let rows = std::iter::once(header).chain(records.iter().map(|r| {
        let mut row = vec![
            match r.pool {
                Pool::Member => "member".to_string(),
                Pool::Nonmember => "nonmember".to_string(),
                Pool::Query => "query".to_string(),
            },
            r.index.to_string(),
            r.risk.point.to_string(),
            r.risk.ci.lower.to_string(),
            r.risk.ci.upper.to_string(),
            r.risk.f_p_signed.to_string(),
            r.risk.uninformative.to_string(),
        ];
        row.extend(r.risk.query_point.values().iter().map(|v| v.to_string()));
        row
    }));
    write_atomic(path, &csv_bytes(rows, path)?)
}

/// Plot-ready rows: estimate with the band `point ± radius` where a radius
/// exists.
pub fn write_plot_csv(path: &Path, results: &[AdvantageEstimate]) -> Result<()> {
    let header = ["estimator", "metric", "n", "point", "radius", "lower", "upper"]
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>();
    let rows = std::iter::once(header).chain(results.iter().map(|r| {
        let kind = serde_json::to_value(r.estimator_kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let metric = r.config.metric.clone().unwrap_or_else(|| "ACC".to_string());
        let (radius, lower, upper) = match r.concentration_radius {
            Some(rad) => (rad.to_string(), (r.point - rad).to_string(), (r.point + rad).to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        vec![kind, metric, r.n_used.to_string(), r.point.to_string(), radius, lower, upper]
    }));
    write_atomic(path, &csv_bytes(rows, path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::ErrorKind;
    use std::fs;

    fn toy_csv(dir: &Path) -> PathBuf {
        let mut text = String::from("m,q1\n");
        for i in 0..200 {
            text.push_str(&format!("1,{}\n", if i % 10 == 0 { 1 } else { 0 }));
            text.push_str(&format!("-1,{}\n", if i % 10 == 0 { 0 } else { 1 }));
        }
        let p = dir.join("q.csv");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn invalid_prior_fails_before_reading() {
        let cfg = AuditConfig::new("/does/not/exist.csv", 1.2);
        let err = run_audit(&cfg).unwrap_err();
        assert_eq!(err.kind(), ErrorKind::Validation);
    }

    #[test]
    fn discrete_audit_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = AuditConfig::new(toy_csv(dir.path()), 0.5);
        cfg.density = DensitySpec::Discrete { bins: None };
        cfg.n_samples = Some(20_000);
        cfg.metrics = vec!["AM".into()];
        cfg.per_sample = true;
        cfg.dp_epsilon = vec![1.0];
        cfg.output = Some(dir.path().join("report.json"));
        cfg.per_sample_csv = Some(dir.path().join("risk.csv"));
        cfg.plot_csv = Some(dir.path().join("plot.csv"));
        let report = run_audit(&cfg).unwrap();
        assert_eq!(report.schema, SCHEMA);
        assert_eq!(report.data.n, 20_000);
        assert_eq!((report.data.member_rows, report.data.nonmember_rows), (200, 200));
        let w = &report.results[0];
        assert!((w.point - 0.8).abs() < 0.03);
        assert!((w.concentration_radius.unwrap() - 0.019_21).abs() < 1e-4);
        // W_N is above the ε = 1 cap of about 0.462.
        assert!(report.dp[0].advantage.witness);
        assert_eq!(report.per_sample.as_ref().unwrap().len(), 400);

        let back = read_report(cfg.output.as_ref().unwrap()).unwrap();
        assert_eq!(back, report);
        let plot = fs::read_to_string(cfg.plot_csv.as_ref().unwrap()).unwrap();
        assert_eq!(plot.lines().count(), 1 + report.results.len());
        let risk = fs::read_to_string(cfg.per_sample_csv.as_ref().unwrap()).unwrap();
        assert!(risk.starts_with("pool,index,point,lower,upper,f_p_signed,uninformative,q1\n"));
        assert_eq!(risk.lines().count(), 401);
    }

    #[test]
    fn stage_is_named_in_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "m,q1\n1,0.1\n1,0.2\n").unwrap();
        let err = run_audit(&AuditConfig::new(&p, 0.5)).unwrap_err();
        assert!(err.to_string().contains("sample"), "{err}");
        assert_eq!(err.kind(), ErrorKind::Data);
    }

    #[test]
    fn config_round_trip() {
        let mut cfg = AuditConfig::new("x.csv", 0.3);
        cfg.metrics = vec!["WA(1,2,2,1)".into()];
        cfg.density = DensitySpec::Continuous(Default::default());
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<AuditConfig>(&json).unwrap(), cfg);
        assert!(serde_json::from_str::<AuditConfig>(r#"{"input":"x","prior_p":0.5,"typo":1}"#).is_err());
    }
}
