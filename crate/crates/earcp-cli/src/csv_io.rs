//! Long-format CSV streams of expert predictions.
//!
//! Each step is a block of rows sharing one step number: one row per expert,
//! `step,expert_id,p_0,...,p_{d-1}`, plus exactly one target row,
//! `step,target,y_0,...,y_{d-1}`. Rows inside a block may appear in any
//! order; step numbers must be strictly increasing from block to block. This
//! long layout keeps large ensembles readable instead of spreading one step
//! over thousands of columns.

use earcp::simulator::{generate_step, ScenarioSpec};
use earcp::wire::render_f64;
use earcp::{PredictionVector, TaskMode};

/// How far a classification row's probabilities may drift off the simplex
/// before ingestion rejects the row.
pub const INGEST_SIMPLEX_TOLERANCE: f64 = 1e-6;

/// One fully assembled step of an ingested stream.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedStep {
    pub step: u64,
    pub predictions: Vec<PredictionVector>,
    pub target: PredictionVector,
}

/// A validated stream of steps, in increasing step order.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestedStream {
    pub steps: Vec<IngestedStep>,
}

/// One step block in the middle of being assembled.
struct OpenBlock {
    step: u64,
    predictions: Vec<Option<PredictionVector>>,
    target: Option<PredictionVector>,
}

impl OpenBlock {
    fn new(step: u64, expert_count: usize) -> Self {
        OpenBlock {
            step,
            predictions: vec![None; expert_count],
            target: None,
        }
    }

    /// Converts the block into a step, reporting what is still missing.
    fn close(self, line: usize) -> Result<IngestedStep, String> {
        let step = self.step;
        let mut predictions = Vec::with_capacity(self.predictions.len());
        for (i, p) in self.predictions.into_iter().enumerate() {
            match p {
                Some(p) => predictions.push(p),
                None => return Err(format!("line {line}: step {step} is missing expert {i}")),
            }
        }
        match self.target {
            Some(target) => Ok(IngestedStep {
                step,
                predictions,
                target,
            }),
            None => Err(format!("line {line}: step {step} is missing its target row")),
        }
    }
}

fn parse_values(fields: &[&str], line: usize) -> Result<Vec<f64>, String> {
    let mut values = Vec::with_capacity(fields.len());
    for (j, field) in fields.iter().enumerate() {
        let value: f64 = field.trim().parse().map_err(|_| {
            format!("line {line}: column {}: expected a number, got \"{field}\"", j + 3)
        })?;
        if !value.is_finite() {
            return Err(format!(
                "line {line}: column {}: non-finite value {value}",
                j + 3
            ));
        }
        values.push(value);
    }
    Ok(values)
}

fn check_simplex_row(values: &[f64], line: usize, what: &str) -> Result<(), String> {
    let mut sum = 0.0;
    for &v in values {
        if !(-INGEST_SIMPLEX_TOLERANCE..=1.0 + INGEST_SIMPLEX_TOLERANCE).contains(&v) {
            return Err(format!(
                "line {line}: {what} component {v} is outside [0, 1]"
            ));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > INGEST_SIMPLEX_TOLERANCE {
        return Err(format!(
            "line {line}: {what} sums to {sum}, which is off the probability simplex"
        ));
    }
    Ok(())
}

/// Parses a long-format CSV document into an ordered stream.
///
/// `expert_count` and `dimension` fix the expected shape; every violation is
/// reported with its 1-based line number. In classification mode every row
/// must lie on the probability simplex within [`INGEST_SIMPLEX_TOLERANCE`].
pub fn ingest_csv(
    text: &str,
    mode: TaskMode,
    expert_count: usize,
    dimension: usize,
) -> Result<IngestedStream, String> {
    if expert_count < 2 {
        return Err(format!("need at least 2 experts, got {expert_count}"));
    }
    if dimension == 0 {
        return Err("dimension must be at least 1".to_string());
    }
    let mut steps: Vec<IngestedStep> = Vec::new();
    let mut open: Option<OpenBlock> = None;
    let mut line_count = 0usize;

    for (index, raw_line) in text.lines().enumerate() {
        let line = index + 1;
        line_count = line;
        if raw_line.trim().is_empty() {
            return Err(format!("line {line}: empty line inside the stream"));
        }
        let fields: Vec<&str> = raw_line.split(',').collect();
        if fields.len() != dimension + 2 {
            return Err(format!(
                "line {line}: expected {} comma-separated fields, got {}",
                dimension + 2,
                fields.len()
            ));
        }
        let step: u64 = fields[0].trim().parse().map_err(|_| {
            format!("line {line}: column 1: expected a step number, got \"{}\"", fields[0])
        })?;
        let values = parse_values(&fields[2..], line)?;

        // Close or reject blocks when the step number moves.
        let block = match open.take() {
            None => OpenBlock::new(step, expert_count),
            Some(block) if step == block.step => block,
            Some(block) if step > block.step => {
                steps.push(block.close(line)?);
                OpenBlock::new(step, expert_count)
            }
            Some(block) => {
                return Err(format!(
                    "line {line}: step went backwards ({step} after {})",
                    block.step
                ));
            }
        };
        let mut block = block;

        let id_field = fields[1].trim();
        if id_field == "target" {
            if mode == TaskMode::Classification {
                check_simplex_row(&values, line, "target")?;
            }
            if block.target.is_some() {
                return Err(format!("line {line}: duplicate target row for step {step}"));
            }
            block.target = Some(values.into());
        } else {
            let expert: usize = id_field.parse().map_err(|_| {
                format!(
                    "line {line}: column 2: expected an expert id in [0, {expert_count}) \
                     or the literal \"target\", got \"{id_field}\""
                )
            })?;
            if expert >= expert_count {
                return Err(format!(
                    "line {line}: expert id {expert} is out of range for {expert_count} experts"
                ));
            }
            if mode == TaskMode::Classification {
                check_simplex_row(&values, line, "prediction")?;
            }
            if block.predictions[expert].is_some() {
                return Err(format!(
                    "line {line}: duplicate row for expert {expert} at step {step}"
                ));
            }
            block.predictions[expert] = Some(values.into());
        }
        open = Some(block);
    }

    match open {
        Some(block) => steps.push(block.close(line_count)?),
        None => return Err("the stream contains no rows".to_string()),
    }
    Ok(IngestedStream { steps })
}

/// Renders every step of a synthetic scenario in the long CSV layout, expert
/// rows `0..expert_count` first, then the target row, with exact decimal
/// float rendering so ingestion reproduces the stream bit for bit.
pub fn render_stream_csv(spec: &ScenarioSpec) -> earcp::Result<String> {
    let mut out = String::new();
    for t in 1..=spec.horizon {
        let (predictions, target) = generate_step(spec, t)?;
        for (i, p) in predictions.iter().enumerate() {
            render_row(&mut out, t, &i.to_string(), &p.values);
        }
        render_row(&mut out, t, "target", &target.values);
    }
    Ok(out)
}

fn render_row(out: &mut String, step: u64, id: &str, values: &[f64]) {
    out.push_str(&step.to_string());
    out.push(',');
    out.push_str(id);
    for &v in values {
        out.push(',');
        out.push_str(&render_f64(v));
    }
    out.push('\n');
}
