use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use simlab::flow::{self, Channel, Dataset, FlowStatus, FlowSummary, LossFn};
use simlab::liegeom::{lie_span_rank, LieSpanReport};
use simlab::model::{Activation, ActivationInfo, Model, TwoLayer};
use simlab::symmetry::{
    classify_partition, enumerate_leaves, predicted_leaf_dim, NeuronPartition, PartitionMode, DEFAULT_CLASSIFY_TOL,
};
use simlab::verify::{degeneracy_report, theorem_suite, DegeneracyReport, ScenarioResult, SuiteConfig, SuiteName};
use simlab::VERSION;

use crate::config::{RandomTheta, RunConfig, Size, SweepCommand, ThetaSource};
use crate::output::{emit_json, ensure_dir, json_bytes, write_atomic};
use crate::{CliError, Outcome};

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub version: &'static str,
    pub config: RunConfig,
    pub lie: LieSpanReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition: Option<NeuronPartition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leaf: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilizer_order: Option<u128>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_dim: Option<usize>,
    /// Rank equals the predicted leaf dimension.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matches: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy: Option<DegeneracyReport>,
}

fn analyze_point(cfg: &RunConfig) -> Result<AnalyzeReport, CliError> {
    let model = cfg.require_model()?;
    let theta = cfg.resolve_theta(model)?;
    let resolved = cfg.resolved_for_analysis(model, &theta);
    let lie = lie_span_rank(model, &theta, &cfg.lie_config(model))?;
    let mut report = AnalyzeReport {
        version: VERSION,
        config: resolved.clone(),
        lie,
        partition: None,
        leaf: None,
        stabilizer_order: None,
        predicted_dim: None,
        matches: None,
        degeneracy: None,
    };
    if let Some(net) = model.as_two_layer() {
        let a = resolved.analysis.as_ref().expect("resolved analysis block");
        let mode = a.mode.unwrap_or(PartitionMode::Equality);
        let p = classify_partition(net, &theta, mode, a.classify_tol.unwrap_or(DEFAULT_CLASSIFY_TOL))?;
        let predicted = predicted_leaf_dim(&p, net.d);
        report.matches = Some(report.lie.rank == predicted);
        report.predicted_dim = Some(predicted);
        report.leaf = Some(p.label());
        report.stabilizer_order = Some(p.stabilizer_order());
        report.partition = Some(p);
        report.degeneracy = Some(degeneracy_report(
            net,
            &theta,
            a.degeneracy_tol.unwrap_or(DEFAULT_CLASSIFY_TOL),
        )?);
    }
    Ok(report)
}

pub fn analyze(config: &Path, out: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let report = analyze_point(&cfg)?;
    emit_json(&report, out)?;
    Ok(Outcome::Ok)
}

#[derive(Debug, Serialize)]
struct FlowReport {
    version: &'static str,
    config: RunConfig,
    summary: FlowSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    condensation: Option<FinalCondensation>,
    final_theta: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct FinalCondensation {
    effective_neurons: f64,
    max_pair_alignment: f64,
}

fn status_outcome(status: FlowStatus) -> Outcome {
    match status {
        FlowStatus::Completed => Outcome::Ok,
        FlowStatus::BlewUp => Outcome::BlewUp,
        FlowStatus::Ambiguous => Outcome::Ambiguous,
    }
}

pub fn flow(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let model = cfg.require_model()?;
    let block = cfg
        .flow
        .as_ref()
        .ok_or_else(|| CliError::Config("flow command needs a flow block".into()))?;
    let theta = cfg.resolve_theta(model)?;
    let mut data = Dataset::generate(&block.dataset, model.input_dim())?;
    if block.loss == LossFn::Logistic {
        data = data.with_sign_targets();
    }
    let fc = block.flow_config();
    fc.validate()?;
    let mut traj = flow::integrate(model, &theta, &data, block.loss, &fc)?;
    let mut condensation = None;
    if let Some(net) = model.as_two_layer() {
        let c = flow::condensation_metrics(net, &traj, block.tol_angle)?;
        condensation = Some(FinalCondensation {
            effective_neurons: c.effective_neurons.last().copied().unwrap_or(f64::NAN),
            max_pair_alignment: c.max_pair_alignment.last().copied().unwrap_or(f64::NAN),
        });
        traj.channels.push(Channel {
            name: "effective_neurons".into(),
            values: c.effective_neurons,
        });
        traj.channels.push(Channel {
            name: "max_pair_alignment".into(),
            values: c.max_pair_alignment,
        });
    }

    ensure_dir(out)?;
    let mut csv = Vec::new();
    flow::write_csv(&traj, &mut csv).map_err(|e| CliError::Io(format!("csv: {e}")))?;
    write_atomic(&out.join("trajectory.csv"), &csv)?;

    let mut resolved = cfg.clone();
    resolved.theta = Some(ThetaSource::Values(theta));
    let report = FlowReport {
        version: VERSION,
        config: resolved,
        summary: traj.summary(),
        condensation,
        final_theta: traj.final_theta().to_vec(),
    };
    write_atomic(&out.join("summary.json"), &json_bytes(&report))?;
    Ok(status_outcome(traj.status))
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    version: &'static str,
    suite: SuiteName,
    config: SuiteConfig,
    result: ScenarioResult,
}

fn parse_suite(name: &str) -> Result<SuiteName, CliError> {
    name.parse().map_err(|e: simlab::Error| CliError::Config(e.to_string()))
}

fn run_suite(suite: SuiteName, params: &SuiteConfig) -> Result<VerifyReport, CliError> {
    let result = theorem_suite(suite, params)?;
    Ok(VerifyReport {
        version: VERSION,
        suite,
        config: params.resolved(suite),
        result,
    })
}

pub fn verify(config: Option<&Path>, suite: Option<&str>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let block = cfg.verify.clone().unwrap_or_default();
    let name = suite
        .map(str::to_string)
        .or(block.suite)
        .ok_or_else(|| CliError::Config("no suite given (--suite or verify.suite)".into()))?;
    let suite = parse_suite(&name)?;
    let report = run_suite(suite, &block.params)?;
    emit_json(&report, out)?;
    Ok(if report.result.passed {
        Outcome::Ok
    } else {
        Outcome::SuiteFailed
    })
}

#[derive(Debug, Serialize)]
struct LeafCount {
    version: &'static str,
    m: usize,
    mode: PartitionMode,
    n_leaves: usize,
    leaves: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
struct IndexEntry {
    point: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_leaves: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct SweepIndex {
    version: &'static str,
    config: RunConfig,
    points: Vec<IndexEntry>,
    n_ok: usize,
    n_failed: usize,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    seed: Option<u64>,
    size: Option<Size>,
}

fn grid(seeds: &[u64], sizes: &[Size]) -> Vec<Point> {
    let seeds: Vec<Option<u64>> = if seeds.is_empty() { vec![None] } else { seeds.iter().copied().map(Some).collect() };
    let sizes: Vec<Option<Size>> = if sizes.is_empty() { vec![None] } else { sizes.iter().copied().map(Some).collect() };
    sizes
        .iter()
        .flat_map(|&size| seeds.iter().map(move |&seed| Point { seed, size }))
        .collect()
}

fn point_config(base: &RunConfig, p: Point) -> Result<RunConfig, CliError> {
    let mut c = base.clone();
    if let Some(seed) = p.seed {
        c.seed = seed;
    }
    if let Some(size) = p.size {
        let net = match c.model.as_ref() {
            Some(Model::TwoLayer(n)) => n,
            _ => return Err(CliError::Config("sweep sizes need a two_layer model".into())),
        };
        c.model = Some(Model::TwoLayer(TwoLayer::new(net.activation, size.m, size.d)?));
    }
    c.theta = match c.theta.take() {
        None => Some(ThetaSource::Random {
            random: RandomTheta { seed: None, scale: 1.0 },
        }),
        Some(ThetaSource::Values(_)) => {
            return Err(CliError::Config("explicit theta cannot be swept; use random or leaf".into()))
        }
        Some(ThetaSource::Random { random }) => Some(ThetaSource::Random {
            random: RandomTheta {
                seed: p.seed.or(random.seed),
                scale: random.scale,
            },
        }),
        Some(ThetaSource::Leaf { mut leaf }) => {
            leaf.seed = p.seed.or(leaf.seed);
            Some(ThetaSource::Leaf { leaf })
        }
    };
    if let Some(mode) = base.sweep.as_ref().and_then(|s| s.mode) {
        c.analysis.get_or_insert_with(Default::default).mode = Some(mode);
    }
    c.sweep = None;
    Ok(c)
}

type PointResult = Result<(Outcome, Vec<u8>, Option<usize>), CliError>;

fn run_point(base: &RunConfig, cmd: SweepCommand, p: Point) -> PointResult {
    match cmd {
        SweepCommand::Analyze => {
            let report = analyze_point(&point_config(base, p)?)?;
            let outcome = if report.matches == Some(false) {
                Outcome::SuiteFailed
            } else {
                Outcome::Ok
            };
            Ok((outcome, json_bytes(&report), None))
        }
        SweepCommand::Verify => {
            let block = base.verify.clone().unwrap_or_default();
            let name = block
                .suite
                .ok_or_else(|| CliError::Config("verify sweep needs verify.suite".into()))?;
            let mut params = block.params;
            if let Some(seed) = p.seed {
                params.seed = seed;
            }
            if let Some(size) = p.size {
                params.m = Some(size.m);
                params.d = Some(size.d);
            }
            let report = run_suite(parse_suite(&name)?, &params)?;
            let outcome = if report.result.passed {
                Outcome::Ok
            } else {
                Outcome::SuiteFailed
            };
            Ok((outcome, json_bytes(&report), None))
        }
        SweepCommand::Leaves => {
            let size = p
                .size
                .ok_or_else(|| CliError::Config("leaf sweep needs sizes".into()))?;
            let mode = base
                .sweep
                .as_ref()
                .and_then(|s| s.mode)
                .unwrap_or(PartitionMode::Equality);
            let leaves = enumerate_leaves(size.m, mode)?;
            let report = LeafCount {
                version: VERSION,
                m: size.m,
                mode,
                n_leaves: leaves.len(),
                leaves: leaves.iter().map(NeuronPartition::label).collect(),
            };
            Ok((Outcome::Ok, json_bytes(&report), Some(leaves.len())))
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var("SIMLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("SIMLAB_THREADS must be a non-negative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(format!("thread pool: {e}")))
}

pub fn sweep(config: &Path, out: &Path) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let block = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep command needs a sweep block".into()))?;
    if block.seeds.is_empty() && block.sizes.is_empty() {
        return Err(CliError::Config("sweep grid is empty".into()));
    }
    let points = grid(&block.seeds, &block.sizes);
    let pool = thread_pool()?;
    let results: Vec<PointResult> =
        pool.install(|| points.par_iter().map(|&p| run_point(&cfg, block.command, p)).collect());

    ensure_dir(out)?;
    let mut overall = Outcome::Ok;
    let mut entries = Vec::with_capacity(points.len());
    for (k, (p, r)) in points.iter().zip(results).enumerate() {
        let mut e = IndexEntry {
            point: k,
            seed: p.seed,
            m: p.size.map(|s| s.m),
            d: p.size.map(|s| s.d),
            outcome: "ok",
            file: None,
            n_leaves: None,
            error: None,
        };
        match r {
            Ok((outcome, bytes, n_leaves)) => {
                let name = format!("point_{k:04}.json");
                write_atomic(&out.join(&name), &bytes)?;
                e.file = Some(name);
                e.n_leaves = n_leaves;
                e.outcome = match outcome {
                    Outcome::Ok => "ok",
                    _ => "failed",
                };
                overall = overall.worst(outcome);
            }
            Err(CliError::Config(m)) => return Err(CliError::Config(m)),
            Err(err) => {
                let outcome = match &err {
                    CliError::Lib(simlab::Error::Ambiguous { .. }) => Outcome::Ambiguous,
                    _ => Outcome::SuiteFailed,
                };
                e.outcome = if outcome == Outcome::Ambiguous { "ambiguous" } else { "error" };
                e.error = Some(err.to_string());
                overall = overall.worst(outcome);
            }
        }
        entries.push(e);
    }
    let n_ok = entries.iter().filter(|e| e.outcome == "ok").count();
    let index = SweepIndex {
        version: VERSION,
        config: cfg,
        n_failed: entries.len() - n_ok,
        n_ok,
        points: entries,
    };
    write_atomic(&out.join("index.json"), &json_bytes(&index))?;
    Ok(overall)
}

#[derive(Debug, Serialize)]
struct ActivationList {
    version: &'static str,
    activations: Vec<ActivationInfo>,
}

pub fn list_activations(out: Option<&Path>) -> Result<Outcome, CliError> {
    let list = ActivationList {
        version: VERSION,
        activations: Activation::ALL.iter().map(|a| a.info()).collect(),
    };
    emit_json(&list, out)?;
    Ok(Outcome::Ok)
}
