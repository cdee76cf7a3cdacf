//! The six subcommands. Each takes a resolved job description from
//! [`crate::config`] and drives `pan-core` plus the file formats.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use pan_core::data;
use pan_core::encoder::{EncodedSentence, Vocab};
use pan_core::hierarchy::TypeHierarchy;
use pan_core::model::ModelParams;
use pan_core::numerics::grad_check;
use pan_core::pipeline;
use pan_core::SentenceBag;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::config::{EvalJob, ExperimentJob, GradcheckJob, PredictJob, SynthJob, TrainJob};
use crate::formats::{self, ModelFile};
use crate::CliError;

pub fn train(job: TrainJob) -> Result<(), CliError> {
    let hierarchy = formats::read_hierarchy(&job.hierarchy)?;
    let records = formats::read_corpus(&job.train_corpus)?;
    let mut vocab = Vocab::new();
    let assembled = data::assemble_bags(&records, &hierarchy, &mut vocab)?;
    if assembled.closure_added > 0 {
        eprintln!(
            "note: added {} ancestor types to close label sets upward",
            assembled.closure_added
        );
    }
    let (params, trace) = pipeline::train(&hierarchy, vocab.len(), &assembled.bags, &job.cfg)?;
    let model = ModelFile {
        params,
        mode: job.cfg.mode,
        vocab,
        hierarchy_sha: formats::hierarchy_digest(&hierarchy),
    };
    formats::save_model(&job.model, &model)?;
    if let Some(path) = &job.trace {
        formats::write_trace(path, &trace)?;
    }
    let last = trace.last().expect("training validates epochs >= 1");
    println!(
        "trained {} ({}, {}) for {} epochs on {} bags ({} types, {} tokens)",
        job.cfg.mode.as_str(),
        job.cfg.encoder.as_str(),
        job.cfg.optimizer.as_str(),
        trace.len(),
        assembled.bags.len(),
        hierarchy.len(),
        model.vocab.len()
    );
    println!("final mean loss per entity: {:.6}", last.mean_loss);
    println!("model written to {}", job.model.display());
    if let Some(path) = &job.trace {
        println!("trace written to {}", path.display());
    }
    Ok(())
}

/// Refuse to score with a hierarchy the model was not trained on: first by
/// type count (the clearer message), then by content digest.
fn check_model_matches(
    model: &ModelFile,
    hierarchy: &TypeHierarchy,
    model_path: &Path,
) -> Result<(), CliError> {
    if model.params.n_types() != hierarchy.len() {
        return Err(CliError::Usage(format!(
            "model {} scores {} types but the hierarchy defines {}",
            model_path.display(),
            model.params.n_types(),
            hierarchy.len()
        )));
    }
    if model.hierarchy_sha != formats::hierarchy_digest(hierarchy) {
        return Err(CliError::Usage(format!(
            "model {} was trained on a different hierarchy (digest mismatch)",
            model_path.display()
        )));
    }
    Ok(())
}

pub fn eval(job: EvalJob) -> Result<(), CliError> {
    let hierarchy = formats::read_hierarchy(&job.hierarchy)?;
    let model = formats::load_model(&job.model)?;
    check_model_matches(&model, &hierarchy, &job.model)?;
    let records = formats::read_corpus(&job.test_corpus)?;
    let mentions = data::assemble_mentions(&records, &hierarchy, &model.vocab)?;
    let report = pipeline::evaluate(&model.params, &hierarchy, model.mode, &mentions)?;
    print!("{}", formats::render_report(&report));
    if let Some(path) = &job.report {
        formats::write_report(path, &report)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

pub fn predict(job: PredictJob) -> Result<(), CliError> {
    let hierarchy = formats::read_hierarchy(&job.hierarchy)?;
    let model = formats::load_model(&job.model)?;
    check_model_matches(&model, &hierarchy, &job.model)?;
    let records = formats::read_corpus(&job.test_corpus)?;
    let mentions = data::assemble_mentions(&records, &hierarchy, &model.vocab)?;
    let preds = pipeline::predict_mentions(&model.params, &hierarchy, model.mode, &mentions)?;
    let names: Vec<Vec<String>> = preds
        .iter()
        .map(|set| set.iter().map(|&t| hierarchy.name(t).to_string()).collect())
        .collect();
    formats::write_predictions(&job.predictions, &records, &names)?;
    println!(
        "predictions for {} mentions written to {}",
        names.len(),
        job.predictions.display()
    );
    Ok(())
}

pub fn synth(job: SynthJob) -> Result<(), CliError> {
    let corpus = data::synth_corpus(&job.cfg)?;
    fs::create_dir_all(&job.out_dir).map_err(|e| {
        CliError::Runtime(format!(
            "cannot create output directory {}: {e}",
            job.out_dir.display()
        ))
    })?;
    formats::write_hierarchy(&job.out_dir.join("hierarchy.txt"), &corpus.hierarchy)?;
    formats::write_corpus(&job.out_dir.join("train.jsonl"), &corpus.train_records)?;
    formats::write_corpus(&job.out_dir.join("test.jsonl"), &corpus.test_records)?;
    println!(
        "hierarchy: {} types ({} roots, branching {}, depth {})",
        corpus.hierarchy.len(),
        job.cfg.roots,
        job.cfg.branching,
        job.cfg.depth
    );
    println!(
        "train: {} bags in {} records ({} noisy entities, noise rate {})",
        corpus.train.len(),
        corpus.train_records.len(),
        corpus.noisy_entities,
        job.cfg.noise_rate
    );
    println!("test: {} mentions", corpus.test.len());
    println!("written to {}", job.out_dir.display());
    Ok(())
}

/// Built-in probe tree for `gradcheck` runs without a hierarchy file:
/// one root, two middle types, four leaves.
const PROBE_HIERARCHY: [&str; 4] = ["/a/b/c", "/a/b/d", "/a/e/f", "/a/e/g"];

/// Small token space for probe sentences; ids 0 and 1 stay reserved for the
/// padding and unknown tokens as in real corpora.
const PROBE_VOCAB: usize = 12;

fn probe_bag(hierarchy: &TypeHierarchy, sentences: usize, seed: u64) -> SentenceBag {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xBA6);
    let leaves: Vec<usize> = hierarchy.leaves().collect();
    let leaf = leaves[rng.random_range(0..leaves.len())];
    let labels: BTreeSet<usize> = hierarchy.path_of(leaf).into_iter().collect();
    let mut sents = Vec::with_capacity(sentences);
    for _ in 0..sentences.max(1) {
        let len = rng.random_range(4..=7);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(2..PROBE_VOCAB)).collect();
        sents.push(EncodedSentence::new(ids, (0, 1)).expect("probe sentences are non-empty"));
    }
    SentenceBag {
        entity: "probe".to_string(),
        sentences: sents,
        labels,
    }
}

pub fn gradcheck(job: GradcheckJob) -> Result<(), CliError> {
    let hierarchy = match &job.hierarchy {
        Some(path) => formats::read_hierarchy(path)?,
        None => TypeHierarchy::parse(PROBE_HIERARCHY).expect("built-in probe tree is well formed"),
    };
    let params = ModelParams::init(
        job.seed,
        PROBE_VOCAB,
        hierarchy.len(),
        job.dims,
        job.encoder,
        job.mode,
    );
    let bag = probe_bag(&hierarchy, job.sentences, job.seed);
    let report = grad_check(&params, &hierarchy, job.mode, &bag, job.eps, job.tol)
        .map_err(|e| CliError::Runtime(format!("gradient check could not run: {e}")))?;
    println!(
        "{:<20} {:>8} {:>14} {:>14} {:>5}",
        "group", "checked", "worst-rel-err", "worst-analytic", "pass"
    );
    for g in &report.groups {
        println!(
            "{:<20} {:>8} {:>14.3e} {:>14.3e} {:>5}",
            g.group.name(),
            g.checked,
            g.worst_rel_err,
            g.worst_analytic,
            if g.pass { "yes" } else { "NO" }
        );
    }
    if report.pass {
        println!(
            "overall: PASS (worst {:.3e}, eps {:e}, tol {:e})",
            report.worst(),
            report.eps,
            report.tol
        );
        Ok(())
    } else {
        Err(CliError::Runtime(format!(
            "gradient check failed: worst relative error {:.3e} exceeds {:e}",
            report.worst(),
            report.tol
        )))
    }
}

pub fn experiment(job: ExperimentJob) -> Result<(), CliError> {
    let table = pipeline::run_noise_experiment(&job.synth, &job.train, &job.modes, &job.seeds)?;
    println!(
        "{:<8} {:>6} {:>8} {:>13} {:>13}",
        "mode", "seed", "strict", "loose-macro", "loose-micro"
    );
    for row in &table.rows {
        println!(
            "{:<8} {:>6} {:>8.4} {:>13.4} {:>13.4}",
            row.mode.as_str(),
            row.seed,
            row.report.strict_acc,
            row.report.loose_macro_f1,
            row.report.loose_micro_f1
        );
    }
    println!();
    println!(
        "{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "mode", "runs", "strict", "±std", "macro", "±std", "micro", "±std"
    );
    for s in &table.summaries {
        println!(
            "{:<8} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            s.mode.as_str(),
            s.runs,
            s.strict_mean,
            s.strict_std,
            s.macro_mean,
            s.macro_std,
            s.micro_mean,
            s.micro_std
        );
    }
    if let Some(path) = &job.report {
        formats::write_experiment(path, &table)?;
        println!();
        println!("report written to {}", path.display());
    }
    Ok(())
}
