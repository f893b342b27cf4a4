//! End-to-end runs and their on-disk artifacts.
//!
//! An output directory holds `manifest.json`, `ranked.json`, `prompt.txt`,
//! `eval.json` and `eval.txt` (whichever the command produces). Every JSON and
//! text report carries the SHA-256 of `manifest.json`; the manifest in turn
//! pins the digests of its input files and of the selected prompt.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::cne_eval::{evaluate, EvalConfig, EvalReport};
use crate::consensus::{rank, CandidatePrompt, RankedPromptList};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::example_pool::{load_cne_dataset, load_pool, ExamplePair, ExamplePool, Language};
use crate::llm_backend::{fan_out, BackendError, GenerationConfig, ItemFailure, LlmBackend, Usage};
use crate::meta_prompt::{
    assemble_task_prompt, render, MetaPromptTemplate, RenderedMetaPrompt, Variant,
};
use crate::sampler::{build_samples, draw_single, SampleLabel, SamplerConfig};
use crate::similarity::SimilarityParams;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RANKED_FILE: &str = "ranked.json";
pub const PROMPT_FILE: &str = "prompt.txt";
pub const EVAL_JSON_FILE: &str = "eval.json";
pub const EVAL_TEXT_FILE: &str = "eval.txt";

/// Demonstrations shown to the instruction-induction baseline.
pub const BASELINE_SAMPLE_SIZE: usize = 5;
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub language: Language,
    pub variant: Variant,
    pub sampler: SamplerConfig,
    pub generation: GenerationConfig,
    pub similarity: SimilarityParams,
    pub top_k: usize,
}

impl GenerateOptions {
    pub fn new(language: Language, seed: u64) -> Self {
        Self {
            language,
            variant: Variant::Ours,
            sampler: SamplerConfig::new(seed),
            generation: GenerationConfig::default(),
            similarity: SimilarityParams::default(),
            top_k: DEFAULT_TOP_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub label: SampleLabel,
    pub example_ids: Vec<String>,
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub label: SampleLabel,
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedCompletion {
    pub label: SampleLabel,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOutcome {
    pub rendered: Vec<RenderedMetaPrompt>,
    pub ranked: RankedPromptList,
    pub shortfalls: Vec<Shortfall>,
    pub discarded: Vec<DiscardedCompletion>,
    pub usage: Usage,
}

impl GenerateOutcome {
    pub fn selected(&self) -> &str {
        &self.ranked.top().candidate.text
    }
}

/// Samples demonstrations, renders the meta-prompts, collects candidates and
/// ranks them. The baseline variant renders one five-example prompt and takes
/// a single greedy completion instead.
pub fn generate_prompt(
    pool: &ExamplePool,
    backend: &dyn LlmBackend,
    opts: &GenerateOptions,
) -> Result<GenerateOutcome> {
    let template = MetaPromptTemplate::builtin(opts.language, opts.variant)?;
    match opts.variant {
        Variant::Ours => generate_consensus(pool, backend, opts, &template),
        Variant::InstructionInductionBaseline => generate_baseline(pool, backend, opts, &template),
    }
}

fn generate_consensus(
    pool: &ExamplePool,
    backend: &dyn LlmBackend,
    opts: &GenerateOptions,
    template: &MetaPromptTemplate,
) -> Result<GenerateOutcome> {
    opts.generation.validate()?;
    let triple = build_samples(pool, &opts.sampler)?;
    let rendered = triple
        .labelled()
        .into_iter()
        .map(|(label, _)| render(template, &triple.examples(pool, label), label))
        .collect::<Result<Vec<_>, _>>()?;

    let batches = fan_out(&rendered, opts.generation.max_in_flight, |r| {
        backend.generate(&r.text, &opts.generation)
    });

    let mut candidates = Vec::new();
    let mut shortfalls = Vec::new();
    let mut discarded = Vec::new();
    let mut usage = Usage::default();
    for (r, batch) in rendered.iter().zip(batches) {
        let batch = match batch {
            Ok(b) => b,
            Err(BackendError::PartialBatch { batch, failures }) => {
                shortfalls.push(Shortfall {
                    label: r.sample_label,
                    failures,
                });
                batch
            }
            Err(e) => return Err(e.into()),
        };
        usage += batch.usage;
        for (index, raw) in batch.completions.into_iter().enumerate() {
            match assemble_task_prompt(&raw, opts.language) {
                Ok(text) => candidates.push(CandidatePrompt {
                    text,
                    sample_label: r.sample_label,
                    index,
                    raw_completion: raw,
                }),
                Err(e) => discarded.push(DiscardedCompletion {
                    label: r.sample_label,
                    index,
                    reason: e.to_string(),
                }),
            }
        }
    }

    let ranked = rank(&candidates, &opts.similarity)?;
    Ok(GenerateOutcome {
        rendered,
        ranked,
        shortfalls,
        discarded,
        usage,
    })
}

fn generate_baseline(
    pool: &ExamplePool,
    backend: &dyn LlmBackend,
    opts: &GenerateOptions,
    template: &MetaPromptTemplate,
) -> Result<GenerateOutcome> {
    let ids = draw_single(pool, BASELINE_SAMPLE_SIZE, opts.sampler.seed)?;
    let examples: Vec<&ExamplePair> = ids
        .iter()
        .map(|id| pool.get(id).expect("drawn from pool"))
        .collect();
    let rendered = render(template, &examples, SampleLabel::A)?;
    let raw = backend.infer(&rendered.text, &opts.generation)?;
    let text = assemble_task_prompt(&raw, opts.language)?;
    let ranked = RankedPromptList::single(CandidatePrompt {
        text,
        sample_label: SampleLabel::A,
        index: 0,
        raw_completion: raw,
    });
    Ok(GenerateOutcome {
        rendered: vec![rendered],
        ranked,
        shortfalls: Vec::new(),
        discarded: Vec::new(),
        usage: Usage::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSummary {
    pub text: String,
    pub score: f64,
    pub sample_label: SampleLabel,
    pub index: usize,
}

impl RankedSummary {
    fn list(ranked: &RankedPromptList, limit: usize) -> Vec<Self> {
        ranked
            .entries
            .iter()
            .take(limit)
            .map(|e| RankedSummary {
                text: e.candidate.text.clone(),
                score: e.score,
                sample_label: e.candidate.sample_label,
                index: e.candidate.index,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub seed: Option<u64>,
    pub language: Option<Language>,
    pub variant: Option<Variant>,
    pub sampler: Option<SamplerConfig>,
    pub generation: GenerationConfig,
    pub similarity: SimilarityParams,
    pub evaluation: Option<EvalConfig>,
    pub demonstrations: usize,
    pub backend_id: String,
    pub model_id: String,
    pub pool_file: Option<FileRecord>,
    pub dataset_file: Option<FileRecord>,
    pub prompt_file: Option<FileRecord>,
    pub samples: Vec<SampleRecord>,
    pub shortfalls: Vec<Shortfall>,
    pub discarded: Vec<DiscardedCompletion>,
    pub usage: Usage,
    pub top_k: Vec<RankedSummary>,
    pub selected_prompt_sha256: Option<String>,
    pub timestamps: Option<Timestamps>,
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub eval: EvalConfig,
    pub generation: GenerationConfig,
    /// Demonstrations prepended to every task prompt; zero means zero-shot.
    pub demonstrations: usize,
    pub seed: u64,
    pub system_name: Option<String>,
}

/// Where a run writes its files, and whether wall-clock times are recorded.
/// Offline backends leave timestamps out so reruns are byte-identical.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub record_timestamps: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub manifest_sha256: String,
    pub selected_prompt: Option<String>,
    pub report: Option<EvalReport>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn file_record(path: &Path) -> Result<FileRecord> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FileRecord {
        name: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: sha256_hex(bytes),
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io { path, source })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn base_manifest(
    command: &str,
    backend: &dyn LlmBackend,
    generation: &GenerationConfig,
) -> RunManifest {
    RunManifest {
        tool: concat!("autoprompt ", env!("CARGO_PKG_VERSION")).to_string(),
        command: command.to_string(),
        seed: None,
        language: None,
        variant: None,
        sampler: None,
        generation: generation.clone(),
        similarity: SimilarityParams::default(),
        evaluation: None,
        demonstrations: 0,
        backend_id: backend.backend_id(),
        model_id: generation.model_id.clone(),
        pool_file: None,
        dataset_file: None,
        prompt_file: None,
        samples: Vec::new(),
        shortfalls: Vec::new(),
        discarded: Vec::new(),
        usage: Usage::default(),
        top_k: Vec::new(),
        selected_prompt_sha256: None,
        timestamps: None,
    }
}

fn apply_generation(manifest: &mut RunManifest, opts: &GenerateOptions, outcome: &GenerateOutcome) {
    manifest.seed = Some(opts.sampler.seed);
    manifest.language = Some(opts.language);
    manifest.variant = Some(opts.variant);
    manifest.sampler = Some(opts.sampler);
    manifest.similarity = opts.similarity;
    manifest.samples = outcome
        .rendered
        .iter()
        .map(|r| SampleRecord {
            label: r.sample_label,
            example_ids: r.example_ids.clone(),
            prompt_sha256: sha256_hex(&r.text),
        })
        .collect();
    manifest.shortfalls = outcome.shortfalls.clone();
    manifest.discarded = outcome.discarded.clone();
    manifest.usage = outcome.usage;
    manifest.top_k = RankedSummary::list(&outcome.ranked, opts.top_k);
    manifest.selected_prompt_sha256 = Some(sha256_hex(outcome.selected()));
}

#[derive(Serialize)]
struct RankedFile<'a> {
    manifest_sha256: &'a str,
    selected: &'a RankedSummary,
    ranking: &'a [RankedSummary],
}

#[derive(Serialize)]
struct EvalFile<'a> {
    manifest_sha256: &'a str,
    system: &'a str,
    dataset: &'a str,
    accuracy_percent: String,
    report: &'a EvalReport,
}

fn finish_manifest(ctx: &RunContext, manifest: &mut RunManifest, started: u64) -> Result<String> {
    if ctx.record_timestamps {
        manifest.timestamps = Some(Timestamps {
            started_unix: started,
            finished_unix: now_unix(),
        });
    }
    fs::create_dir_all(&ctx.out_dir).map_err(|source| Error::Io {
        path: ctx.out_dir.clone(),
        source,
    })?;
    let text = to_json(manifest);
    write(&ctx.out_dir, MANIFEST_FILE, &text)?;
    Ok(sha256_hex(text))
}

fn write_generation(ctx: &RunContext, digest: &str, outcome: &GenerateOutcome) -> Result<()> {
    let ranking = RankedSummary::list(&outcome.ranked, usize::MAX);
    let ranked = RankedFile {
        manifest_sha256: digest,
        selected: &ranking[0],
        ranking: &ranking,
    };
    write(&ctx.out_dir, RANKED_FILE, &to_json(&ranked))?;
    write(
        &ctx.out_dir,
        PROMPT_FILE,
        &format!("{}\n", outcome.selected()),
    )
}

fn write_evaluation(
    ctx: &RunContext,
    digest: &str,
    system: &str,
    dataset: &str,
    report: &EvalReport,
) -> Result<()> {
    let file = EvalFile {
        manifest_sha256: digest,
        system,
        dataset,
        accuracy_percent: report.accuracy_percent(),
        report,
    };
    write(&ctx.out_dir, EVAL_JSON_FILE, &to_json(&file))?;
    let mut text = report.summary(system, dataset);
    text.push_str(&format!("manifest sha256: {digest}\n"));
    write(&ctx.out_dir, EVAL_TEXT_FILE, &text)
}

fn demonstrations(
    pool: Option<&ExamplePool>,
    count: usize,
    seed: u64,
) -> Result<Vec<&ExamplePair>> {
    match (pool, count) {
        (_, 0) => Ok(Vec::new()),
        (None, _) => Err(Error::MissingDemonstrationPool),
        (Some(pool), n) => Ok(draw_single(pool, n, seed)?
            .iter()
            .map(|id| pool.get(id).expect("drawn from pool"))
            .collect()),
    }
}

/// `generate`: pool file in, ranked candidates and selected prompt out.
pub fn run_generate(
    pool_path: &Path,
    backend: &dyn LlmBackend,
    opts: &GenerateOptions,
    ctx: &RunContext,
) -> Result<RunOutput> {
    let started = now_unix();
    let pool = load_pool(pool_path, opts.language)?;
    let outcome = generate_prompt(&pool, backend, opts)?;

    let mut manifest = base_manifest("generate", backend, &opts.generation);
    manifest.pool_file = Some(file_record(pool_path)?);
    apply_generation(&mut manifest, opts, &outcome);
    let digest = finish_manifest(ctx, &mut manifest, started)?;
    write_generation(ctx, &digest, &outcome)?;
    Ok(RunOutput {
        manifest,
        manifest_sha256: digest,
        selected_prompt: Some(outcome.selected().to_string()),
        report: None,
    })
}

/// Reads an instruction file written by `generate` (or by hand).
pub fn read_prompt_file(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::EmptyPromptFile(path.to_path_buf()));
    }
    Ok(text.to_string())
}

/// `evaluate`: scores an existing instruction on a gold-annotated dataset.
pub fn run_evaluate(
    dataset_path: &Path,
    prompt_path: &Path,
    demo_pool: Option<(&Path, Language)>,
    backend: &dyn LlmBackend,
    opts: &EvaluateOptions,
    ctx: &RunContext,
) -> Result<RunOutput> {
    let started = now_unix();
    let dataset = load_cne_dataset(dataset_path)?;
    let instruction = read_prompt_file(prompt_path)?;
    let pool = demo_pool
        .map(|(path, language)| load_pool(path, language))
        .transpose()?;
    let demos = demonstrations(pool.as_ref(), opts.demonstrations, opts.seed)?;
    let report = evaluate(
        &dataset.tables,
        backend,
        &instruction,
        &demos,
        &opts.generation,
        &opts.eval,
    )?;

    let mut manifest = base_manifest("evaluate", backend, &opts.generation);
    manifest.seed = (opts.demonstrations > 0).then_some(opts.seed);
    manifest.language = demo_pool.map(|(_, l)| l);
    manifest.evaluation = Some(opts.eval);
    manifest.similarity = opts.eval.similarity;
    manifest.demonstrations = opts.demonstrations;
    manifest.dataset_file = Some(file_record(dataset_path)?);
    manifest.prompt_file = Some(file_record(prompt_path)?);
    if let Some((path, _)) = demo_pool {
        manifest.pool_file = Some(file_record(path)?);
    }
    manifest.selected_prompt_sha256 = Some(sha256_hex(&instruction));
    let digest = finish_manifest(ctx, &mut manifest, started)?;

    let system = opts
        .system_name
        .clone()
        .unwrap_or_else(|| stem(prompt_path));
    write_evaluation(ctx, &digest, &system, &stem(dataset_path), &report)?;
    Ok(RunOutput {
        manifest,
        manifest_sha256: digest,
        selected_prompt: Some(instruction),
        report: Some(report),
    })
}

/// `pipeline`: generate, then evaluate the selected prompt.
pub fn run_pipeline(
    pool_path: &Path,
    dataset_path: &Path,
    backend: &dyn LlmBackend,
    gen_opts: &GenerateOptions,
    eval_opts: &EvaluateOptions,
    ctx: &RunContext,
) -> Result<RunOutput> {
    let started = now_unix();
    let pool = load_pool(pool_path, gen_opts.language)?;
    let dataset = load_cne_dataset(dataset_path)?;
    let outcome = generate_prompt(&pool, backend, gen_opts)?;
    let demos = demonstrations(Some(&pool), eval_opts.demonstrations, gen_opts.sampler.seed)?;
    let report = evaluate(
        &dataset.tables,
        backend,
        outcome.selected(),
        &demos,
        &eval_opts.generation,
        &eval_opts.eval,
    )?;

    let mut manifest = base_manifest("pipeline", backend, &gen_opts.generation);
    manifest.pool_file = Some(file_record(pool_path)?);
    manifest.dataset_file = Some(file_record(dataset_path)?);
    manifest.evaluation = Some(eval_opts.eval);
    manifest.demonstrations = eval_opts.demonstrations;
    apply_generation(&mut manifest, gen_opts, &outcome);
    let digest = finish_manifest(ctx, &mut manifest, started)?;
    write_generation(ctx, &digest, &outcome)?;

    let system = eval_opts
        .system_name
        .clone()
        .unwrap_or_else(|| gen_opts.variant.to_string());
    write_evaluation(ctx, &digest, &system, &stem(dataset_path), &report)?;
    Ok(RunOutput {
        manifest,
        manifest_sha256: digest,
        selected_prompt: Some(outcome.selected().to_string()),
        report: Some(report),
    })
}
