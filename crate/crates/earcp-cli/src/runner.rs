//! Experiment orchestration: expands (aggregator, grid cell, seed) jobs,
//! runs independent jobs in parallel, and writes traces plus one summary.
//!
//! All results are computed in memory before anything is written, and a
//! failed write removes the files already produced, so an output directory
//! never holds a partial experiment. Jobs are expanded and written in a
//! fixed order, which makes reruns of the same config byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use earcp::metrics::{render_trace_csv, StepRecord};
use earcp::simulator::{run_scenario, Aggregator, AggregatorSpec};
use earcp::wire::render_f64;
use earcp::{regret, segment_regret, EarcpSession, LossKind, SerializedState};

use crate::config::{grid_cells, ExperimentConfig, ScenarioSource};
use crate::csv_io::{ingest_csv, render_stream_csv, IngestedStream};

/// Column layout of `summary.csv`; `segment_regrets` holds one value per
/// change-point segment, joined with `;`.
pub const SUMMARY_HEADER: &str =
    "aggregator,cell,seed,final_regret,cumulative_loss,mean_entropy,min_entropy,segment_regrets";

/// One unit of work: a single aggregator variant over a single seeded stream.
#[derive(Debug, Clone)]
pub struct Job {
    pub aggregator: String,
    pub cell: String,
    pub seed: u64,
    pub spec: AggregatorSpec,
}

impl Job {
    pub fn trace_file_name(&self) -> String {
        format!("{}__{}__seed{}.csv", self.aggregator, self.cell, self.seed)
    }
}

/// What a completed `run` or `sweep` produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub summary_rows: usize,
}

/// What a completed `replay` produced.
#[derive(Debug)]
pub struct ReplayOutcome {
    pub trace_path: PathBuf,
    pub state_path: PathBuf,
    pub steps_replayed: u64,
}

/// Expands the config into jobs: grid cells apply to every `earcp`
/// aggregator, while baselines (which have none of the swept parameters) run
/// once per seed in the `default` cell.
pub fn expand_jobs(config: &ExperimentConfig) -> Vec<Job> {
    let cells = grid_cells(&config.grid);
    let mut jobs = Vec::new();
    for (name, spec) in &config.aggregators {
        match spec {
            AggregatorSpec::Earcp(base) => {
                for cell in &cells {
                    let spec = AggregatorSpec::Earcp(cell.apply(base));
                    for &seed in &config.seeds {
                        jobs.push(Job {
                            aggregator: name.clone(),
                            cell: cell.label.clone(),
                            seed,
                            spec: spec.clone(),
                        });
                    }
                }
            }
            other => {
                for &seed in &config.seeds {
                    jobs.push(Job {
                        aggregator: name.clone(),
                        cell: "default".to_string(),
                        seed,
                        spec: other.clone(),
                    });
                }
            }
        }
    }
    jobs
}

/// Feeds an ingested stream through a session in lockstep (predict, then
/// immediately update), returning one record per step.
pub fn run_ingested(
    session: &mut Aggregator,
    stream: &IngestedStream,
) -> earcp::Result<Vec<StepRecord>> {
    let mut records = Vec::with_capacity(stream.steps.len());
    for step in &stream.steps {
        session.predict(&step.predictions)?;
        let at = session.steps_completed() + 1;
        let outcome = session.update(at, &step.target)?;
        records.push(StepRecord {
            step: at,
            ensemble_loss: outcome.ensemble_loss,
            entropy: outcome.entropy,
            weights: outcome.new_weights,
            expert_losses: outcome.per_expert_losses,
            scores: outcome.scores,
        });
    }
    Ok(records)
}

fn run_job(
    job: &Job,
    config: &ExperimentConfig,
    stream: Option<&IngestedStream>,
) -> Result<Vec<StepRecord>> {
    let records = match (&config.scenario, stream) {
        (ScenarioSource::Synthetic(spec), _) => {
            let mut spec = spec.clone();
            spec.seed = job.seed;
            run_scenario(&spec, &job.spec, &config.loss)
        }
        (ScenarioSource::Csv { expert_count, mode, .. }, Some(stream)) => {
            let mut session =
                job.spec
                    .build(*expert_count, *mode, config.loss.clone(), job.seed)?;
            run_ingested(&mut session, stream)
        }
        (ScenarioSource::Csv { .. }, None) => {
            unreachable!("csv scenarios are ingested before jobs run")
        }
    };
    records.with_context(|| {
        format!(
            "aggregator \"{}\", cell \"{}\", seed {}",
            job.aggregator, job.cell, job.seed
        )
    })
}

fn summary_row(job: &Job, records: &[StepRecord], change_points: &[u64]) -> Result<String> {
    let ensemble: Vec<f64> = records.iter().map(|r| r.ensemble_loss).collect();
    let per_expert: Vec<Vec<f64>> = records.iter().map(|r| r.expert_losses.clone()).collect();
    let final_regret = regret(&ensemble, &per_expert)?;
    let segments = segment_regret(&ensemble, &per_expert, change_points)?;
    let cumulative_loss: f64 = ensemble.iter().sum();
    let mean_entropy = records.iter().map(|r| r.entropy).sum::<f64>() / records.len() as f64;
    let min_entropy = records
        .iter()
        .map(|r| r.entropy)
        .fold(f64::INFINITY, f64::min);
    Ok(format!(
        "{},{},{},{},{},{},{},{}",
        job.aggregator,
        job.cell,
        job.seed,
        render_f64(final_regret),
        render_f64(cumulative_loss),
        render_f64(mean_entropy),
        render_f64(min_entropy),
        segments
            .iter()
            .map(|&r| render_f64(r))
            .collect::<Vec<_>>()
            .join(";")
    ))
}

/// Writes `files` in order; if any write fails, removes the ones already
/// written before returning the error.
fn write_all(files: &[(PathBuf, String)]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(files.len());
    for (path, text) in files {
        if let Err(e) = fs::write(path, text) {
            for done in &written {
                let _ = fs::remove_file(done);
            }
            return Err(anyhow!(e).context(format!("writing {}", path.display())));
        }
        written.push(path.clone());
    }
    Ok(written)
}

fn load_stream(config: &ExperimentConfig) -> Result<Option<IngestedStream>> {
    let ScenarioSource::Csv {
        path,
        mode,
        expert_count,
        dimension,
    } = &config.scenario
    else {
        return Ok(None);
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading stream {}", path.display()))?;
    let stream = ingest_csv(&text, *mode, *expert_count, *dimension)
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
    Ok(Some(stream))
}

/// Runs every job of the config and writes one trace per job plus
/// `summary.csv`, all under the config's output directory.
pub fn run_experiment(config: &ExperimentConfig, quiet: bool) -> Result<RunOutcome> {
    let stream = load_stream(config)?;
    let jobs = expand_jobs(config);
    let results: Vec<Vec<StepRecord>> = jobs
        .par_iter()
        .map(|job| run_job(job, config, stream.as_ref()))
        .collect::<Result<_>>()?;

    let mut files = Vec::with_capacity(jobs.len() + 1);
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (job, records) in jobs.iter().zip(&results) {
        let trace = render_trace_csv(records).with_context(|| {
            format!("rendering trace for {}", job.trace_file_name())
        })?;
        files.push((config.output_dir.join(job.trace_file_name()), trace));
        summary.push_str(&summary_row(job, records, config.scenario.change_points())?);
        summary.push('\n');
    }
    let summary_path = config.output_dir.join("summary.csv");
    files.push((summary_path.clone(), summary));

    fs::create_dir_all(&config.output_dir).with_context(|| {
        format!("creating output directory {}", config.output_dir.display())
    })?;
    let mut trace_paths = write_all(&files)?;
    trace_paths.pop();
    if !quiet {
        for path in &trace_paths {
            println!("wrote {}", path.display());
        }
        println!("wrote {} ({} rows)", summary_path.display(), jobs.len());
    }
    Ok(RunOutcome {
        trace_paths,
        summary_path,
        summary_rows: jobs.len(),
    })
}

/// Renders the synthetic stream once per seed as `stream__seed{K}.csv`
/// without running any aggregator.
pub fn simulate_streams(config: &ExperimentConfig, quiet: bool) -> Result<Vec<PathBuf>> {
    let ScenarioSource::Synthetic(base) = &config.scenario else {
        bail!("simulate needs a synthetic [scenario], not csv_input");
    };
    let mut files = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut spec = base.clone();
        spec.seed = seed;
        let text = render_stream_csv(&spec)
            .with_context(|| format!("generating stream for seed {seed}"))?;
        files.push((
            config.output_dir.join(format!("stream__seed{seed}.csv")),
            text,
        ));
    }
    fs::create_dir_all(&config.output_dir).with_context(|| {
        format!("creating output directory {}", config.output_dir.display())
    })?;
    let paths = write_all(&files)?;
    if !quiet {
        for path in &paths {
            println!("wrote {}", path.display());
        }
    }
    Ok(paths)
}

/// Expands the ablation grid; identical to `run` except that a grid must be
/// present.
pub fn sweep(config: &ExperimentConfig, quiet: bool) -> Result<RunOutcome> {
    if config.grid.is_empty() {
        bail!("sweep needs a [grid] section; use run for single-cell configs");
    }
    run_experiment(config, quiet)
}

fn sniff_dimension(text: &str) -> Result<usize> {
    let first = text
        .lines()
        .next()
        .ok_or_else(|| anyhow!("the stream contains no rows"))?;
    let fields = first.split(',').count();
    if fields < 3 {
        bail!("line 1: expected at least 3 comma-separated fields, got {fields}");
    }
    Ok(fields - 2)
}

/// Restores a session from a snapshot, feeds it a CSV stream, and writes the
/// continued trace plus the final state.
pub fn replay(
    snapshot_path: &Path,
    csv_path: &Path,
    loss: LossKind,
    seed: u64,
    out_dir: &Path,
    quiet: bool,
) -> Result<ReplayOutcome> {
    let snapshot_text = fs::read_to_string(snapshot_path)
        .with_context(|| format!("reading snapshot {}", snapshot_path.display()))?;
    let state = SerializedState::from_json(&snapshot_text)
        .with_context(|| format!("parsing snapshot {}", snapshot_path.display()))?;
    let session = EarcpSession::restore(&state, loss, seed)
        .with_context(|| format!("restoring snapshot {}", snapshot_path.display()))?;

    let csv_text = fs::read_to_string(csv_path)
        .with_context(|| format!("reading stream {}", csv_path.display()))?;
    let dimension = sniff_dimension(&csv_text)
        .map_err(|e| anyhow!("{}: {e}", csv_path.display()))?;
    let stream = ingest_csv(&csv_text, session.mode(), session.expert_count(), dimension)
        .map_err(|e| anyhow!("{}: {e}", csv_path.display()))?;

    let mut session = Aggregator::Earcp(session);
    let records = run_ingested(&mut session, &stream)
        .with_context(|| format!("replaying {}", csv_path.display()))?;
    let trace = render_trace_csv(&records)?;
    let final_state = session
        .as_earcp()
        .expect("replay sessions are always earcp sessions")
        .snapshot()
        .to_json();

    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let trace_path = out_dir.join("replay_trace.csv");
    let state_path = out_dir.join("final_state.json");
    write_all(&[
        (trace_path.clone(), trace),
        (state_path.clone(), final_state),
    ])?;
    if !quiet {
        println!("wrote {}", trace_path.display());
        println!("wrote {}", state_path.display());
    }
    Ok(ReplayOutcome {
        trace_path,
        state_path,
        steps_replayed: records.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const BASE: &str = r#"
seeds = [1, 2, 3]
loss = "zero_one"
output_dir = "out"

[scenario]
mode = "classification"
expert_count = 2
dimension = 3
horizon = 10

[[scenario.experts]]
behavior = "accurate"
noise = 0.0

[[scenario.experts]]
behavior = "random_guess"

[aggregator.main]
kind = "earcp"

[aggregator.base]
kind = "uniform"
"#;

    #[test]
    fn jobs_expand_in_name_cell_seed_order() {
        let config = parse_config(BASE).unwrap();
        let jobs = expand_jobs(&config);
        assert_eq!(jobs.len(), 6);
        // BTreeMap ordering puts "base" before "main".
        assert_eq!(jobs[0].aggregator, "base");
        assert_eq!(jobs[0].seed, 1);
        assert_eq!(jobs[2].seed, 3);
        assert_eq!(jobs[3].aggregator, "main");
        assert_eq!(jobs[0].cell, "default");
        assert_eq!(jobs[0].trace_file_name(), "base__default__seed1.csv");
    }

    #[test]
    fn grids_multiply_earcp_jobs_but_not_baselines() {
        let text = format!("{BASE}\n[grid]\nbeta = [0.0, 0.5, 1.0]\n");
        let config = parse_config(&text).unwrap();
        let jobs = expand_jobs(&config);
        // 3 cells x 3 seeds for main, 3 seeds for the uniform baseline.
        assert_eq!(jobs.len(), 12);
        let main_cells: Vec<&str> = jobs
            .iter()
            .filter(|j| j.aggregator == "main" && j.seed == 1)
            .map(|j| j.cell.as_str())
            .collect();
        assert_eq!(main_cells, vec!["beta=0.0", "beta=0.5", "beta=1.0"]);
        assert!(jobs
            .iter()
            .filter(|j| j.aggregator == "base")
            .all(|j| j.cell == "default"));
    }

    #[test]
    fn summary_rows_have_the_documented_shape() {
        let config = parse_config(BASE).unwrap();
        let jobs = expand_jobs(&config);
        let records = run_job(&jobs[0], &config, None).unwrap();
        assert_eq!(records.len(), 10);
        let row = summary_row(&jobs[0], &records, &[]).unwrap();
        assert!(row.starts_with("base,default,1,"), "{row}");
        assert_eq!(row.split(',').count(), SUMMARY_HEADER.split(',').count());
        // One change point means two ;-joined segment values.
        let row = summary_row(&jobs[0], &records, &[5]).unwrap();
        let segments = row.rsplit(',').next().unwrap();
        assert_eq!(segments.split(';').count(), 2);
    }

    #[test]
    fn sweep_refuses_configs_without_a_grid() {
        let config = parse_config(BASE).unwrap();
        let err = sweep(&config, true).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }
}
