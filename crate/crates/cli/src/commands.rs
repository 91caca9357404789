use std::io::Write;
use std::path::Path;

use mace_core::audit::{report_json, run_audit, write_per_sample_csv, AuditConfig, PerSampleRecord, Pool};
use mace_core::density::{Bandwidth, DensityPair, DensitySpec, KdeConfig, Kernel};
use mace_core::experiment::class_sizes;
use mace_core::individual::{dp_bound as cap, individual_risk_batch};
use mace_core::io::{ingest_query_csv, ingest_vectors, write_atomic, write_query_csv, QueryPools};
use mace_core::oracle::{exact_advantage, normal_advantage_quadrature, sample_toy, FiniteToyDistribution, ToySpec};
use mace_core::queries::{epsilon_ball_batch, nn_distance_batch, DistanceMetric, SyntheticDataset};
use mace_core::{named_metric, Error, LabeledQuerySet, QueryOutput, Result};
use serde_json::json;

use crate::{AuditArgs, DensityArgs, DpBoundArgs, QueryInputs, RiskArgs, SimulateArgs};

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Degenerate(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn emit(bytes: &[u8], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    }
}

fn parse_list(text: &str, name: &'static str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::invalid(name, format!("`{v}` is not a number")))
        })
        .collect()
}

impl DensityArgs {
    fn spec(&self) -> Result<DensitySpec> {
        let kde_flags = self.bandwidth.is_some() || self.kernel.is_some();
        let continuous = match self.density.as_deref().map(str::to_ascii_lowercase).as_deref() {
            None => kde_flags,
            Some("continuous") | Some("kde") => true,
            Some("discrete") if kde_flags => {
                return Err(Error::invalid("density", "--bandwidth and --kernel need the continuous path"))
            }
            Some("discrete") => false,
            Some(other) => return Err(Error::invalid("density", format!("unknown density path `{other}`"))),
        };
        let spec = if continuous {
            if self.bins.is_some() {
                return Err(Error::invalid("bins", "only applies to the discrete path"));
            }
            DensitySpec::Continuous(KdeConfig {
                bandwidth: self.bandwidth.as_deref().map_or(Ok(Bandwidth::Auto), str::parse)?,
                kernel: self.kernel.as_deref().map_or(Ok(Kernel::default()), str::parse)?,
            })
        } else {
            match self.bins.as_deref() {
                None => DensitySpec::default(),
                Some("exact") => DensitySpec::Discrete { bins: None },
                Some(b) => DensitySpec::Discrete {
                    bins: Some(b.parse().map_err(|_| Error::invalid("bins", format!("`{b}` is not a count")))?),
                },
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn audit(a: AuditArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str::<AuditConfig>(&text).map_err(|e| Error::invalid("config", e.to_string()))?
        }
        None => {
            // Both are required by clap when no config is given.
            let input = a.input.clone().expect("input");
            let mut cfg = AuditConfig::new(input, a.prior.expect("prior"));
            cfg.metrics = a.metric.clone();
            cfg.density = a.density.spec()?;
            cfg
        }
    };
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.mc_samples {
        cfg.mc_samples = Some(m);
    }
    if let Some(g) = a.grid {
        cfg.grid = g;
    }
    if a.n_samples.is_some() {
        cfg.n_samples = a.n_samples;
    }
    cfg.per_sample |= a.per_sample;
    if a.per_sample_csv.is_some() {
        cfg.per_sample_csv = a.per_sample_csv;
    }
    if a.plot_csv.is_some() {
        cfg.plot_csv = a.plot_csv;
    }
    if !a.dp_epsilon.is_empty() {
        cfg.dp_epsilon = a.dp_epsilon;
    }
    if a.out.is_some() {
        cfg.output = a.out;
    }

    let report = run_audit(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.output {
        Some(path) => {
            for r in &report.results {
                let metric = r.config.metric.as_deref().unwrap_or("ACC");
                let kind = serde_json::to_value(r.estimator_kind).unwrap_or_default();
                let kind = kind.as_str().unwrap_or("?");
                match r.concentration_radius {
                    Some(rad) => println!("{kind} {metric}: {:.6} ± {:.6} (N = {})", r.point, rad, r.n_used),
                    None => println!("{kind} {metric}: {:.6} (N = {})", r.point, r.n_used),
                }
            }
            for d in &report.dp {
                if d.advantage.witness {
                    println!("ε = {}: advantage exceeds the DP cap {:.6}", d.bound.epsilon, d.bound.bound);
                }
            }
            println!("report written to {}", path.display());
            Ok(())
        }
        None => emit(&report_json(&report)?, None),
    }
}

pub fn risk(a: RiskArgs) -> Result<()> {
    let spec = a.density.spec()?;
    let metric = a.metric.as_deref().map(|m| named_metric(m, a.prior)).transpose()?;
    let query_points: Option<Vec<QueryOutput>> = if a.at.is_empty() {
        None
    } else {
        Some(
            a.at.iter()
                .map(|s| parse_list(s, "at").and_then(QueryOutput::new))
                .collect::<Result<_>>()?,
        )
    };
    let pools = ingest_query_csv(&a.input)?;
    let set = LabeledQuerySet::from_parts(pools.members.clone(), pools.nonmembers.clone(), a.prior)?;
    let pair = DensityPair::fit(&set, &spec)?;
    let points = query_points
        .clone()
        .unwrap_or_else(|| pools.members.iter().chain(&pools.nonmembers).cloned().collect());
    let batch = individual_risk_batch(&points, &pair.members, &pair.nonmembers, a.prior, metric.as_ref(), a.delta)?;
    for w in &batch.warnings {
        eprintln!("warning: {w}");
    }

    let csv_out = a.out.as_deref().filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    if let Some(path) = csv_out {
        let n_members = if query_points.is_some() { 0 } else { pools.members.len() };
        let records: Vec<PerSampleRecord> = batch
            .estimates
            .into_iter()
            .enumerate()
            .map(|(i, risk)| {
                let (pool, index) = match query_points {
                    Some(_) => (Pool::Query, i),
                    None if i < n_members => (Pool::Member, i),
                    None => (Pool::Nonmember, i - n_members),
                };
                PerSampleRecord { pool, index, risk }
            })
            .collect();
        return write_per_sample_csv(path, &records);
    }
    let body = json!({ "estimates": batch.estimates, "warnings": batch.warnings });
    emit(&to_json(&body)?, a.out.as_deref())
}

pub fn dp_bound(a: DpBoundArgs) -> Result<()> {
    let rows = a
        .epsilon
        .iter()
        .map(|&eps| {
            let b = cap(eps, a.prior)?;
            Ok(match a.advantage {
                Some(adv) => json!({ "bound": b, "comparison": b.compare(adv, a.lower) }),
                None => json!({ "bound": b }),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    emit(&to_json(&rows)?, None)
}

pub fn query(q: QueryInputs, radius: Option<f64>) -> Result<()> {
    let d: DistanceMetric = q.distance.parse()?;
    if let Some(r) = radius {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid("radius", "must be positive"));
        }
    }
    let members = ingest_vectors(&q.members)?;
    let nonmembers = ingest_vectors(&q.nonmembers)?;
    let syn = SyntheticDataset::new(ingest_vectors(&q.synthetic)?)?;
    let pools = match radius {
        None => QueryPools {
            members: nn_distance_batch(&members, &syn, d)?,
            nonmembers: nn_distance_batch(&nonmembers, &syn, d)?,
        },
        Some(r) => {
            let (m, fm) = epsilon_ball_batch(&members, &syn, d, r)?;
            let (n, fn_) = epsilon_ball_batch(&nonmembers, &syn, d, r)?;
            if fm + fn_ > 0 {
                eprintln!("warning: {} of {} queries had an empty ball and were floored", fm + fn_, m.len() + n.len());
            }
            QueryPools {
                members: m,
                nonmembers: n,
            }
        }
    };
    write_query_csv(&q.out, &pools)
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let (pools, truth) = if let Some(normal) = &a.normal {
        let mu = parse_list(normal, "normal")?;
        let [mu1, mu2] = mu[..] else {
            return Err(Error::invalid("normal", "expected `mu1,mu2`"));
        };
        let truth = normal_advantage_quadrature(mu1, mu2, a.sigma, a.prior)?;
        let (n1, n2) = class_sizes(a.n, a.prior);
        if n1 == 0 || n2 == 0 {
            return Err(Error::invalid("n", "too small for both classes at this prior"));
        }
        let pools = QueryPools {
            members: sample_toy(&ToySpec::normal(mu1, a.sigma), n1, a.seed.wrapping_mul(2))?,
            nonmembers: sample_toy(&ToySpec::normal(mu2, a.sigma), n2, a.seed.wrapping_mul(2).wrapping_add(1))?,
        };
        (pools, truth)
    } else {
        let (Some(m), Some(n)) = (&a.member_pmf, &a.nonmember_pmf) else {
            return Err(Error::invalid("simulate", "give --normal or both pmfs"));
        };
        let toy = FiniteToyDistribution::new(parse_list(m, "member_pmf")?, parse_list(n, "nonmember_pmf")?, a.prior)?;
        let set = toy.sample_set(a.n, a.seed)?;
        let pools = QueryPools {
            members: set.members().cloned().collect(),
            nonmembers: set.nonmembers().cloned().collect(),
        };
        (pools, exact_advantage(&toy))
    };
    write_query_csv(&a.out, &pools)?;
    emit(
        &to_json(&json!({
            "exact_advantage": truth,
            "members": pools.members.len(),
            "nonmembers": pools.nonmembers.len(),
        }))?,
        None,
    )
}
