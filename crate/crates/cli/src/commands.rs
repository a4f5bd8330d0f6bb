use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use muxrisk::ingest::{generate_synthetic, parse_records, write_records, LoanRecord, SynthConfig};
use muxrisk::netmodel::Attribute;
use muxrisk::pagerank::{scores_json, write_scores_csv, PageRankParams};
use muxrisk::tsa::{
    dtw_kmeans, elbow_select, pair_comparison, write_clusters_csv, write_inertia_csv,
    write_pair_csv, KMeansParams,
};
use muxrisk::windows::{
    enumerate_windows, read_series_csv, run_sequence, write_series_csv, RunOptions, SequenceRun,
    SeriesTable, WindowSpec,
};
use serde::Serialize;
use serde_json::json;

use crate::cli::{ClusterArgs, CompareArgs, RunArgs, SynthArgs};
use crate::error::CliError;
use crate::output::{slug, Staging};

/// Every parameter a run depends on, recorded verbatim in its manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_months: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_months: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_range: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

impl RunConfig {
    fn new(subcommand: &'static str, out: &Path) -> Self {
        Self {
            subcommand,
            input: None,
            output_dir: out.to_path_buf(),
            window_months: None,
            step_months: None,
            restart: None,
            tol: None,
            max_iter: None,
            k: None,
            k_range: None,
            seed: None,
            jobs: None,
        }
    }

    fn for_run(subcommand: &'static str, out: &Path, args: &RunArgs) -> Self {
        Self {
            input: Some(args.input.clone()),
            window_months: Some(args.window.window_months),
            step_months: Some(args.window.step_months),
            restart: Some(args.solver.restart),
            tol: Some(args.solver.tol),
            max_iter: Some(args.solver.max_iter),
            jobs: Some(args.jobs),
            ..Self::new(subcommand, out)
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    parameters: &'a RunConfig,
    outputs: Vec<String>,
    #[serde(flatten)]
    details: T,
}

fn manifest<'a, T: Serialize>(
    cfg: &'a RunConfig,
    outputs: Vec<String>,
    details: T,
) -> Manifest<'a, T> {
    Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        parameters: cfg,
        outputs,
        details,
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_records(path: &Path) -> Result<Vec<LoanRecord>, CliError> {
    parse_records(open(path)?).map_err(|e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load_series(path: &Path) -> Result<SeriesTable, CliError> {
    read_series_csv(open(path)?).map_err(|e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn cmd_synth(out: &Path, args: &SynthArgs) -> Result<(), CliError> {
    let mut synth: SynthConfig = match &args.config {
        Some(path) => serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => SynthConfig::default(),
    };
    if let Some(v) = args.n_loans {
        synth.n_loans = v;
    }
    if let Some(v) = args.n_products {
        synth.n_products = v;
    }
    if let Some(v) = args.n_districts {
        synth.n_districts = v;
    }
    if let Some(v) = args.span_months {
        synth.span_months = v;
    }
    if let Some(v) = args.base_default_rate {
        synth.base_default_rate = v;
    }
    if let Some(v) = args.seed {
        synth.seed = v;
    }
    let records = generate_synthetic(&synth)?;

    let cfg = RunConfig {
        input: args.config.clone(),
        seed: Some(synth.seed),
        ..RunConfig::new("synth", out)
    };
    let mut staging = Staging::new(out)?;
    let mut w = staging.create("loans.csv")?;
    write_records(&mut w, &records)?;
    w.flush()?;
    let defaulted = records.iter().filter(|r| r.defaulted).count();
    staging.write_json(
        "manifest_synth.json",
        &manifest(
            &cfg,
            vec!["loans.csv".into()],
            json!({ "synth_config": synth, "n_loans": records.len(), "n_defaulted": defaulted }),
        ),
    )?;
    staging.promote()
}

fn solve_all(args: &RunArgs) -> Result<SequenceRun, CliError> {
    if args.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let params = PageRankParams {
        restart: args.solver.restart,
        tolerance: args.solver.tol,
        max_iterations: args.solver.max_iter,
        parallel_chunks: None,
    };
    params
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let records = load_records(&args.input)?;
    let spec = WindowSpec::covering(&records, args.window.window_months, args.window.step_months)?;
    let options = RunOptions {
        layers: Attribute::DEFAULT_LAYERS.to_vec(),
        jobs: args.jobs,
    };
    let run = run_sequence(&records, &spec, &params, &options)?;
    let stalled: Vec<usize> = run
        .windows
        .iter()
        .filter(|w| w.result.as_ref().is_some_and(|r| !r.converged))
        .map(|w| w.window.index)
        .collect();
    if let Some(first) = stalled.first() {
        return Err(CliError::Convergence(format!(
            "no convergence within {} iterations in {} of {} windows (first: window {first})",
            args.solver.max_iter,
            stalled.len(),
            run.windows.len(),
        )));
    }
    Ok(run)
}

fn run_details(run: &SequenceRun) -> serde_json::Value {
    json!({
        "window_spec": run.spec,
        "n_windows": run.windows.len(),
        "skipped_windows": run.skipped(),
        "windows": run.diagnostics(),
    })
}

pub fn cmd_score(out: &Path, args: &RunArgs) -> Result<(), CliError> {
    let run = solve_all(args)?;
    let cfg = RunConfig::for_run("score", out, args);
    let mut staging = Staging::new(out)?;
    let mut outputs = Vec::new();
    for outcome in &run.windows {
        let Some(result) = &outcome.result else {
            continue;
        };
        let stem = format!("scores/window_{:04}", outcome.window.index);
        let mut w = staging.create(&format!("{stem}.csv"))?;
        write_scores_csv(&mut w, &outcome.network, result)?;
        w.flush()?;
        staging.write_json(
            &format!("{stem}.json"),
            &scores_json(&outcome.network, result),
        )?;
        outputs.push(format!("{stem}.csv"));
        outputs.push(format!("{stem}.json"));
    }
    staging.write_json(
        "manifest_score.json",
        &manifest(&cfg, outputs, run_details(&run)),
    )?;
    staging.promote()
}

pub fn cmd_series(out: &Path, args: &RunArgs) -> Result<(), CliError> {
    let run = solve_all(args)?;
    let cfg = RunConfig::for_run("series", out, args);
    let mut staging = Staging::new(out)?;
    let mut w = staging.create("series.csv")?;
    write_series_csv(&mut w, &run)?;
    w.flush()?;
    staging.write_json(
        "manifest_series.json",
        &manifest(&cfg, vec!["series.csv".into()], run_details(&run)),
    )?;
    staging.promote()
}

pub fn cmd_cluster(out: &Path, args: &ClusterArgs) -> Result<(), CliError> {
    let table = load_series(&args.series)?;
    let series = table.of_kind(args.kind);
    if series.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no {} series",
            args.series.display(),
            args.kind
        )));
    }
    let (k, curve, elbow) = match (&args.k, &args.k_range) {
        (Some(k), _) => (*k, None, None),
        (None, Some(range)) => {
            let e = elbow_select(&series, range.clone(), args.seed, args.max_iter)?;
            (e.chosen_k, Some(e.curve.clone()), Some(e))
        }
        (None, None) => {
            return Err(CliError::Validation(
                "one of --k or --k-range is required".into(),
            ))
        }
    };
    let params = KMeansParams {
        max_iter: args.max_iter,
        ..KMeansParams::new(k, args.seed)
    };
    let result = dtw_kmeans(&series, &params)?;
    let curve = curve.unwrap_or_else(|| vec![(k, result.inertia)]);

    let cfg = RunConfig {
        input: Some(args.series.clone()),
        max_iter: Some(args.max_iter),
        k: args.k,
        k_range: args.k_range.as_ref().map(|r| (*r.start(), *r.end())),
        seed: Some(args.seed),
        ..RunConfig::new("cluster", out)
    };
    let kind = args.kind.name();
    let clusters_name = format!("clusters_{kind}.csv");
    let inertia_name = format!("inertia_{kind}.csv");
    let mut staging = Staging::new(out)?;
    let mut w = staging.create(&clusters_name)?;
    write_clusters_csv(&mut w, &result)?;
    w.flush()?;
    let mut w = staging.create(&inertia_name)?;
    write_inertia_csv(&mut w, &curve)?;
    w.flush()?;
    staging.write_json(
        &format!("manifest_cluster_{kind}.json"),
        &manifest(
            &cfg,
            vec![clusters_name, inertia_name],
            json!({
                "node_kind": kind,
                "n_series": series.len(),
                "chosen_k": k,
                "elbow_degenerate": elbow.map(|e| e.degenerate),
                "iterations": result.iterations,
                "converged": result.converged,
                "inertia_history": result.inertia_history,
            }),
        ),
    )?;
    staging.promote()
}

pub fn cmd_compare(out: &Path, args: &CompareArgs) -> Result<(), CliError> {
    let records = load_records(&args.input)?;
    let table = load_series(&args.series)?;
    let spec = WindowSpec::covering(&records, args.window.window_months, args.window.step_months)?;
    let windows = enumerate_windows(&spec);
    let starts: Vec<_> = windows.iter().map(|w| w.start).collect();
    if starts != table.window_starts {
        return Err(CliError::Validation(format!(
            "{} has {} windows starting {}, but --window {} --step {} over {} gives {} starting {}",
            args.series.display(),
            table.window_starts.len(),
            table
                .window_starts
                .first()
                .map_or("-".into(), |m| m.to_string()),
            spec.window_months,
            spec.step_months,
            args.input.display(),
            starts.len(),
            starts.first().map_or("-".into(), |m| m.to_string()),
        )));
    }
    let cmp = pair_comparison(
        &records,
        &windows,
        &table.series,
        &args.district,
        &args.product,
    )?;

    let cfg = RunConfig {
        input: Some(args.input.clone()),
        window_months: Some(spec.window_months),
        step_months: Some(spec.step_months),
        ..RunConfig::new("compare", out)
    };
    let stem = format!("compare_{}_{}", slug(&args.district), slug(&args.product));
    let csv_name = format!("{stem}.csv");
    let mut staging = Staging::new(out)?;
    let mut w = staging.create(&csv_name)?;
    write_pair_csv(&mut w, &cmp)?;
    w.flush()?;
    staging.write_json(
        &format!("manifest_{stem}.json"),
        &manifest(
            &cfg,
            vec![csv_name],
            json!({
                "series": args.series,
                "district": args.district,
                "product": args.product,
                "window_spec": spec,
                "window_starts": starts,
            }),
        ),
    )?;
    staging.promote()
}
