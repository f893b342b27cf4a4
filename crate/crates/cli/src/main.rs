use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use autoprompt_core::cne_eval::{EvalConfig, Normalization, DEFAULT_MATCH_THRESHOLD};
use autoprompt_core::example_pool::{
    load_cne_dataset, pool_from_dataset, save_pool, CneTable, Language,
};
use autoprompt_core::llm_backend::{
    GenerationConfig, HttpBackend, LlmBackend, MockBackend, RecordingBackend, ReplayBackend,
    DEFAULT_MODEL_ID,
};
use autoprompt_core::meta_prompt::Variant;
use autoprompt_core::pipeline::{
    run_evaluate, run_generate, run_pipeline, EvaluateOptions, GenerateOptions, RunContext,
    RunOutput, DEFAULT_TOP_K,
};
use autoprompt_core::sampler::{entropy_seed, SamplerConfig, DEFAULT_SAMPLE_SIZE};
use autoprompt_core::similarity::SimilarityParams;
use autoprompt_core::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "autoprompt",
    version,
    about = "Generate task instructions from a few examples and score them on column name expansion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample demonstrations, collect candidate instructions, rank them.
    Generate {
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        gen: GenerateFlags,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score an instruction on a gold-annotated dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        prompt: PathBuf,
        /// Pool to draw demonstrations from when --demonstrations > 0.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Lang::En)]
        language: Lang,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        eval: EvalFlags,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate, then evaluate the selected instruction.
    Pipeline {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        gen: GenerateFlags,
        #[command(flatten)]
        eval: EvalFlags,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Turn a gold-annotated dataset into a demonstration pool file.
    MakePool {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Lang::En)]
        language: Lang,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Lang {
    En,
    De,
}

impl From<Lang> for Language {
    fn from(l: Lang) -> Self {
        match l {
            Lang::En => Language::English,
            Lang::De => Language::German,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Ours,
    Instinduc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Http,
    Mock,
    Replay,
}

#[derive(Args)]
struct GenerateFlags {
    #[arg(long, value_enum, default_value_t = Lang::En)]
    language: Lang,
    #[arg(long, value_enum, default_value_t = VariantArg::Ours)]
    variant: VariantArg,
    /// Defaults to a fresh random seed, which is recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    sample_size: usize,
    #[arg(long, default_value_t = 10)]
    num_candidates: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 1.0)]
    top_p: f64,
    #[arg(long, default_value_t = 0.1)]
    prefix_scale: f64,
    #[arg(long, default_value_t = 4)]
    max_prefix: usize,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
}

#[derive(Args)]
struct EvalFlags {
    #[arg(long, default_value_t = DEFAULT_MATCH_THRESHOLD)]
    threshold: f64,
    /// Compare expansions without lowercasing.
    #[arg(long)]
    case_sensitive: bool,
    /// Compare expansions without collapsing whitespace.
    #[arg(long)]
    keep_whitespace: bool,
    /// Demonstrations prepended to each task prompt (0 = zero-shot).
    #[arg(long, default_value_t = 0)]
    demonstrations: usize,
    /// Name shown in the summary table.
    #[arg(long)]
    system_name: Option<String>,
}

#[derive(Args)]
struct BackendFlags {
    #[arg(long, value_enum, default_value_t = BackendKind::Mock)]
    backend: BackendKind,
    #[arg(long, default_value = "http://localhost:8000/v1")]
    base_url: String,
    #[arg(long, default_value = DEFAULT_MODEL_ID)]
    model: String,
    /// Fixture file read by the replay backend.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Write every completion received to this fixture file.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    max_new_tokens: u32,
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
}

impl BackendFlags {
    fn generation(&self, num_candidates: usize, temperature: f64, top_p: f64) -> GenerationConfig {
        GenerationConfig {
            num_candidates_per_sample: num_candidates,
            temperature,
            top_p,
            max_new_tokens: self.max_new_tokens,
            model_id: self.model.clone(),
            request_timeout: Duration::from_secs(self.timeout_secs),
            max_retries: self.max_retries,
            max_in_flight: self.max_in_flight,
        }
    }

    fn build(&self, seed: u64, gold_tables: &[CneTable]) -> Result<Box<dyn LlmBackend>, Error> {
        Ok(match self.backend {
            BackendKind::Http => Box::new(HttpBackend::from_env(&self.base_url)?),
            BackendKind::Mock => Box::new(MockBackend::new(seed).primed_with(gold_tables)),
            BackendKind::Replay => {
                let path = self.fixtures.as_deref().ok_or_else(|| {
                    autoprompt_core::llm_backend::BackendError::InvalidConfig(
                        "--backend replay needs --fixtures".into(),
                    )
                })?;
                Box::new(ReplayBackend::load(path)?)
            }
        })
    }

    /// Runs `f` against the configured backend, saving recorded fixtures
    /// afterwards when `--record` is set.
    fn with_backend<T>(
        &self,
        seed: u64,
        gold_tables: &[CneTable],
        f: impl FnOnce(&dyn LlmBackend) -> Result<T, Error>,
    ) -> Result<T, Error> {
        let backend = self.build(seed, gold_tables)?;
        match &self.record {
            None => f(backend.as_ref()),
            Some(path) => {
                let recorder = RecordingBackend::new(backend);
                let result = f(&recorder);
                recorder.save(path)?;
                result
            }
        }
    }
}

impl GenerateFlags {
    fn options(&self, backend: &BackendFlags, seed: u64) -> Result<GenerateOptions, Error> {
        Ok(GenerateOptions {
            language: self.language.into(),
            variant: match self.variant {
                VariantArg::Ours => Variant::Ours,
                VariantArg::Instinduc => Variant::InstructionInductionBaseline,
            },
            sampler: SamplerConfig {
                sample_size: self.sample_size,
                seed,
            },
            generation: backend.generation(self.num_candidates, self.temperature, self.top_p),
            similarity: SimilarityParams::new(self.prefix_scale, self.max_prefix)?,
            top_k: self.top_k,
        })
    }
}

impl EvalFlags {
    fn options(&self, backend: &BackendFlags, seed: u64) -> EvaluateOptions {
        EvaluateOptions {
            eval: EvalConfig {
                match_threshold: self.threshold,
                normalize: Normalization {
                    lowercase: !self.case_sensitive,
                    collapse_whitespace: !self.keep_whitespace,
                },
                similarity: SimilarityParams::default(),
            },
            generation: backend.generation(1, 1.0, 1.0),
            demonstrations: self.demonstrations,
            seed,
            system_name: self.system_name.clone(),
        }
    }
}

fn context(out: &Path, backend: &BackendFlags) -> RunContext {
    RunContext {
        out_dir: out.to_path_buf(),
        record_timestamps: backend.backend == BackendKind::Http,
    }
}

fn report(output: &RunOutput, out: &Path) {
    if let Some(prompt) = &output.selected_prompt {
        println!("selected prompt: {prompt}");
    }
    if let Some(report) = &output.report {
        println!(
            "accuracy: {}% ({} of {} columns, {} unparsed tables)",
            report.accuracy_percent(),
            report.matched_columns,
            report.total_columns,
            report.unparsed_tables
        );
    }
    if let Some(seed) = output.manifest.seed {
        println!("seed: {seed}");
    }
    println!(
        "artifacts: {} (manifest sha256 {})",
        out.display(),
        output.manifest_sha256
    );
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate {
            pool,
            gen,
            backend,
            out,
        } => {
            let seed = gen.seed.unwrap_or_else(entropy_seed);
            let opts = gen.options(&backend, seed)?;
            let output = backend.with_backend(seed, &[], |b| {
                run_generate(&pool, b, &opts, &context(&out, &backend))
            })?;
            report(&output, &out);
        }
        Command::Evaluate {
            dataset,
            prompt,
            pool,
            language,
            seed,
            eval,
            backend,
            out,
        } => {
            let tables = load_cne_dataset(&dataset)?.tables;
            let seed = seed.unwrap_or_else(entropy_seed);
            let opts = eval.options(&backend, seed);
            let demo_pool = pool.as_deref().map(|p| (p, Language::from(language)));
            let output = backend.with_backend(seed, &tables, |b| {
                run_evaluate(
                    &dataset,
                    &prompt,
                    demo_pool,
                    b,
                    &opts,
                    &context(&out, &backend),
                )
            })?;
            report(&output, &out);
        }
        Command::Pipeline {
            pool,
            dataset,
            gen,
            eval,
            backend,
            out,
        } => {
            let tables = load_cne_dataset(&dataset)?.tables;
            let seed = gen.seed.unwrap_or_else(entropy_seed);
            let gen_opts = gen.options(&backend, seed)?;
            let eval_opts = eval.options(&backend, seed);
            let output = backend.with_backend(seed, &tables, |b| {
                run_pipeline(
                    &pool,
                    &dataset,
                    b,
                    &gen_opts,
                    &eval_opts,
                    &context(&out, &backend),
                )
            })?;
            report(&output, &out);
        }
        Command::MakePool {
            dataset,
            language,
            out,
        } => {
            let ds = load_cne_dataset(&dataset)?;
            let source = dataset
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let pool = pool_from_dataset(&ds, &source, language.into())?;
            save_pool(&pool, &out)?;
            println!("wrote {} examples to {}", pool.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
