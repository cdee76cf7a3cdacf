//! On-disk formats: JSON-lines corpora, hierarchy files, the binary model
//! container, CSV loss traces, and JSON evaluation / experiment reports.
//!
//! Every writer is deterministic: the same inputs produce byte-identical
//! files, so reruns of a command can be compared with `cmp`.

use std::fs;
use std::path::Path;

use pan_core::data::RawRecord;
use pan_core::encoder::{EncoderKind, Vocab};
use pan_core::hierarchy::TypeHierarchy;
use pan_core::model::{Dims, ModelParams};
use pan_core::pipeline::{EpochStats, EvalReport, ExperimentTable};
use pan_core::Mode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

fn read_input(path: &Path, what: &str) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(format!("{what} not found: {}", path.display()))
        } else {
            CliError::Usage(format!("cannot read {what} {}: {e}", path.display()))
        }
    })
}

fn write_output(path: &Path, bytes: &[u8], what: &str) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {what} {}: {e}", path.display())))
}

// ---------------------------------------------------------------- hierarchy

pub fn read_hierarchy(path: &Path) -> Result<TypeHierarchy, CliError> {
    let text = read_input(path, "hierarchy file")?;
    TypeHierarchy::parse(text.lines())
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn write_hierarchy(path: &Path, hierarchy: &TypeHierarchy) -> Result<(), CliError> {
    write_output(path, hierarchy.canonical_text().as_bytes(), "hierarchy file")
}

/// Digest of the hierarchy's canonical text; stored in model files so that
/// evaluation can refuse a hierarchy the model was not trained on.
pub fn hierarchy_digest(hierarchy: &TypeHierarchy) -> [u8; 32] {
    let out = Sha256::digest(hierarchy.canonical_text().as_bytes());
    let mut sha = [0u8; 32];
    sha.copy_from_slice(out.as_slice());
    sha
}

// ------------------------------------------------------------------ corpora

/// One mention record as stored in a JSON-lines corpus file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordJson {
    entity: String,
    tokens: Vec<String>,
    span: [usize; 2],
    types: Vec<String>,
}

pub fn read_corpus(path: &Path) -> Result<Vec<RawRecord>, CliError> {
    let text = read_input(path, "corpus file")?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordJson = serde_json::from_str(line).map_err(|e| {
            CliError::Usage(format!("{}:{}: bad record: {e}", path.display(), i + 1))
        })?;
        records.push(RawRecord {
            entity: rec.entity,
            tokens: rec.tokens,
            span: (rec.span[0], rec.span[1]),
            types: rec.types,
        });
    }
    Ok(records)
}

pub fn write_corpus(path: &Path, records: &[RawRecord]) -> Result<(), CliError> {
    let mut out = String::new();
    for r in records {
        let rec = RecordJson {
            entity: r.entity.clone(),
            tokens: r.tokens.clone(),
            span: [r.span.0, r.span.1],
            types: r.types.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialization cannot fail"));
        out.push('\n');
    }
    write_output(path, out.as_bytes(), "corpus file")
}

/// A corpus record plus the model's predicted types, one JSON object per line.
#[derive(Serialize)]
struct PredictionJson<'a> {
    entity: &'a str,
    tokens: &'a [String],
    span: [usize; 2],
    types: &'a [String],
    predicted: &'a [String],
}

pub fn write_predictions(
    path: &Path,
    records: &[RawRecord],
    predicted: &[Vec<String>],
) -> Result<(), CliError> {
    debug_assert_eq!(records.len(), predicted.len());
    let mut out = String::new();
    for (r, p) in records.iter().zip(predicted) {
        let rec = PredictionJson {
            entity: &r.entity,
            tokens: &r.tokens,
            span: [r.span.0, r.span.1],
            types: &r.types,
            predicted: p,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serialization cannot fail"));
        out.push('\n');
    }
    write_output(path, out.as_bytes(), "predictions file")
}

// -------------------------------------------------------------- model files

const MODEL_MAGIC: [u8; 8] = *b"PANMODEL";
const MODEL_VERSION: u32 = 1;

/// Everything needed to score new mentions: the parameters, the attention
/// mode they were trained with, the token vocabulary, and a digest of the
/// type hierarchy.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub params: ModelParams,
    pub mode: Mode,
    pub vocab: Vocab,
    pub hierarchy_sha: [u8; 32],
}

fn mode_code(mode: Mode) -> u8 {
    match mode {
        Mode::PanA => 0,
        Mode::PanM => 1,
        Mode::An => 2,
        Mode::Uniform => 3,
    }
}

fn mode_from_code(code: u8) -> Option<Mode> {
    match code {
        0 => Some(Mode::PanA),
        1 => Some(Mode::PanM),
        2 => Some(Mode::An),
        3 => Some(Mode::Uniform),
        _ => None,
    }
}

fn encoder_code(kind: EncoderKind) -> u8 {
    match kind {
        EncoderKind::Lstm => 0,
        EncoderKind::MeanPool => 1,
    }
}

fn encoder_from_code(code: u8) -> Option<EncoderKind> {
    match code {
        0 => Some(EncoderKind::Lstm),
        1 => Some(EncoderKind::MeanPool),
        _ => None,
    }
}

fn push_u32(buf: &mut Vec<u8>, v: usize) -> Result<(), CliError> {
    let v = u32::try_from(v)
        .map_err(|_| CliError::Runtime(format!("value {v} too large for the model file format")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<(), CliError> {
    if model.vocab.len() != model.params.vocab_size() {
        return Err(CliError::Runtime(format!(
            "internal: vocabulary has {} tokens but the model embeds {}",
            model.vocab.len(),
            model.params.vocab_size()
        )));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&model.hierarchy_sha);
    buf.push(mode_code(model.mode));
    buf.push(encoder_code(model.params.encoder_kind()));
    let dims = model.params.dims();
    push_u32(&mut buf, dims.d_w)?;
    push_u32(&mut buf, dims.d_h)?;
    push_u32(&mut buf, dims.d)?;
    push_u32(&mut buf, model.params.n_types())?;
    push_u32(&mut buf, model.vocab.len())?;
    for token in model.vocab.tokens() {
        push_u32(&mut buf, token.len())?;
        buf.extend_from_slice(token.as_bytes());
    }
    let tensors = model.params.tensors();
    push_u32(&mut buf, tensors.len())?;
    for (_, tensor) in tensors {
        buf.push(tensor.rank() as u8);
        for &extent in tensor.shape() {
            push_u32(&mut buf, extent)?;
        }
        for &x in tensor.data() {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    write_output(path, &buf, "model file")
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        Some(self.take(1)?[0])
    }

    fn u32(&mut self) -> Option<usize> {
        self.take(4)
            .map(|s| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Option<f64> {
        self.take(8)
            .map(|s| f64::from_le_bytes(s.try_into().expect("8 bytes")))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub fn load_model(path: &Path) -> Result<ModelFile, CliError> {
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Usage(format!("model file not found: {}", path.display()))
        } else {
            CliError::Usage(format!("cannot read model file {}: {e}", path.display()))
        }
    })?;
    let corrupt =
        |what: &str| CliError::Usage(format!("model file {} is corrupt: {what}", path.display()));

    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(8) != Some(&MODEL_MAGIC[..]) {
        return Err(CliError::Usage(format!(
            "{} is not a model file",
            path.display()
        )));
    }
    let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    if version != MODEL_VERSION as usize {
        return Err(CliError::Usage(format!(
            "model file {} has unsupported version {version}",
            path.display()
        )));
    }
    let mut hierarchy_sha = [0u8; 32];
    hierarchy_sha.copy_from_slice(r.take(32).ok_or_else(|| corrupt("truncated digest"))?);
    let mode = r
        .u8()
        .and_then(mode_from_code)
        .ok_or_else(|| corrupt("unknown attention mode"))?;
    let kind = r
        .u8()
        .and_then(encoder_from_code)
        .ok_or_else(|| corrupt("unknown encoder kind"))?;
    let d_w = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    let d_h = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    let d = r.u32().ok_or_else(|| corrupt("truncated header"))?;
    let n_types = r.u32().ok_or_else(|| corrupt("truncated header"))?;

    let vocab_len = r.u32().ok_or_else(|| corrupt("truncated vocabulary"))?;
    let mut tokens = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let len = r.u32().ok_or_else(|| corrupt("truncated vocabulary"))?;
        let raw = r.take(len).ok_or_else(|| corrupt("truncated vocabulary"))?;
        let token = core::str::from_utf8(raw)
            .map_err(|_| corrupt("vocabulary token is not UTF-8"))?
            .to_string();
        tokens.push(token);
    }
    let vocab =
        Vocab::from_tokens(tokens).map_err(|e| corrupt(&format!("bad vocabulary: {e}")))?;

    if d_w == 0 || d == 0 || n_types == 0 || (kind == EncoderKind::Lstm && d_h == 0) {
        return Err(corrupt("zero dimension"));
    }
    let dims = Dims { d_w, d_h, d };
    let mut params = ModelParams::init(0, vocab.len(), n_types, dims, kind, mode);

    let tensor_count = r.u32().ok_or_else(|| corrupt("truncated tensor table"))?;
    {
        let mut slots = params.tensors_mut();
        if tensor_count != slots.len() {
            return Err(corrupt(&format!(
                "expected {} tensors, found {tensor_count}",
                slots.len()
            )));
        }
        for (group, tensor) in &mut slots {
            let rank = r.u8().ok_or_else(|| corrupt("truncated tensor table"))? as usize;
            if rank != tensor.rank() {
                return Err(corrupt(&format!(
                    "{} tensor has rank {rank}, expected {}",
                    group.name(),
                    tensor.rank()
                )));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32().ok_or_else(|| corrupt("truncated tensor table"))?);
            }
            if shape.as_slice() != tensor.shape() {
                return Err(corrupt(&format!(
                    "{} tensor shaped {shape:?}, expected {:?}",
                    group.name(),
                    tensor.shape()
                )));
            }
            for x in tensor.data_mut().iter_mut() {
                *x = r.f64().ok_or_else(|| corrupt("truncated tensor data"))?;
            }
        }
    }
    if !r.done() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(ModelFile {
        params,
        mode,
        vocab,
        hierarchy_sha,
    })
}

// ------------------------------------------------------- traces and reports

/// CSV loss trace, one row per epoch. Floats use the shortest representation
/// that round-trips, so the file is a faithful record of the run.
pub fn write_trace(path: &Path, trace: &[EpochStats]) -> Result<(), CliError> {
    let mut out = String::from("epoch,total_loss,mean_loss\n");
    for s in trace {
        out.push_str(&format!("{},{:?},{:?}\n", s.epoch, s.total_loss, s.mean_loss));
    }
    write_output(path, out.as_bytes(), "trace file")
}

/// Evaluation report as written to JSON: the three headline metrics plus the
/// pooled counts behind the micro score.
#[derive(Debug, Serialize)]
struct ReportJson {
    strict_acc: f64,
    loose_macro_f1: f64,
    loose_micro_f1: f64,
    mention_count: usize,
    pooled_intersection: usize,
    pooled_predicted: usize,
    pooled_gold: usize,
}

impl From<&EvalReport> for ReportJson {
    fn from(r: &EvalReport) -> Self {
        ReportJson {
            strict_acc: r.strict_acc,
            loose_macro_f1: r.loose_macro_f1,
            loose_micro_f1: r.loose_micro_f1,
            mention_count: r.mention_count,
            pooled_intersection: r.pooled_intersection,
            pooled_predicted: r.pooled_predicted,
            pooled_gold: r.pooled_gold,
        }
    }
}

pub fn render_report(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(&ReportJson::from(report))
        .expect("report serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<(), CliError> {
    write_output(path, render_report(report).as_bytes(), "report file")
}

#[derive(Serialize)]
struct ExperimentRowJson {
    mode: String,
    seed: u64,
    strict_acc: f64,
    loose_macro_f1: f64,
    loose_micro_f1: f64,
}

#[derive(Serialize)]
struct ModeSummaryJson {
    mode: String,
    runs: usize,
    strict_mean: f64,
    strict_std: f64,
    macro_mean: f64,
    macro_std: f64,
    micro_mean: f64,
    micro_std: f64,
}

#[derive(Serialize)]
struct ExperimentJson {
    rows: Vec<ExperimentRowJson>,
    summaries: Vec<ModeSummaryJson>,
}

pub fn render_experiment(table: &ExperimentTable) -> String {
    let json = ExperimentJson {
        rows: table
            .rows
            .iter()
            .map(|r| ExperimentRowJson {
                mode: r.mode.as_str().to_string(),
                seed: r.seed,
                strict_acc: r.report.strict_acc,
                loose_macro_f1: r.report.loose_macro_f1,
                loose_micro_f1: r.report.loose_micro_f1,
            })
            .collect(),
        summaries: table
            .summaries
            .iter()
            .map(|s| ModeSummaryJson {
                mode: s.mode.as_str().to_string(),
                runs: s.runs,
                strict_mean: s.strict_mean,
                strict_std: s.strict_std,
                macro_mean: s.macro_mean,
                macro_std: s.macro_std,
                micro_mean: s.micro_mean,
                micro_std: s.micro_std,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&json).expect("table serialization cannot fail");
    s.push('\n');
    s
}

pub fn write_experiment(path: &Path, table: &ExperimentTable) -> Result<(), CliError> {
    write_output(path, render_experiment(table).as_bytes(), "report file")
}
