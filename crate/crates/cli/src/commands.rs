//! The `encode`, `train`, `sample`, `evaluate` and `pipeline` commands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use maxent_debias_core::metrics::{
    covariance_difference_norm, fairness_bound, fairness_report_empirical, fairness_report_exact,
    kl_dataset_vs_dataset, kl_model_vs_dataset, prior_model, KL_ENUMERATION_LIMIT,
};
use maxent_debias_core::solver::MaxEntModel;
use maxent_debias_core::{
    bounding_radius, mix_prior, reweight, sample_dataset, sample_points, solve, target_marginal,
    validate_interior, Dataset, DomainSchema, Error as CoreError, DEFAULT_ETA_MIN,
};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::formats::dataset::{read_dataset, read_raw_csv, write_decoded_csv, write_encoded_csv, EncodeSummary};
use crate::formats::model::{load_model, mode_name, ModelFile};
use crate::formats::report::{BoundReport, Closeness, ColumnReport, EvaluationReport};
use crate::formats::schema::load_schema;
use crate::formats::{sha256_hex, write_atomic, write_json};

pub const ENCODED_FILE: &str = "encoded.csv";
pub const ENCODE_SUMMARY_FILE: &str = "encode_summary.json";
pub const MODEL_FILE: &str = "model.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const SAMPLES_META_FILE: &str = "samples.meta.json";
pub const REPORT_FILE: &str = "report.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub encoded: PathBuf,
    pub summary: EncodeSummary,
}

pub fn encode(schema_path: &Path, input: &Path, out_dir: &Path, skip_bad_rows: bool) -> Result<EncodeOutput> {
    let schema = load_schema(schema_path)?;
    let (ds, skipped) = read_raw_csv(&schema, input, skip_bad_rows)?;
    let summary = EncodeSummary::new(&schema, &ds, skipped)?;
    let encoded = out_dir.join(ENCODED_FILE);
    write_encoded_csv(&schema, &ds, &encoded)?;
    write_json(&out_dir.join(ENCODE_SUMMARY_FILE), &summary)?;
    Ok(EncodeOutput { encoded, summary })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub rows: u64,
    pub distinct_points: usize,
    pub dimension: usize,
    pub domain_size: f64,
    pub c: f64,
    pub tau: f64,
    pub marginal_kind: String,
    pub solver_mode: String,
    pub iterations: usize,
    pub converged: bool,
    pub dual_value: f64,
    pub final_gradient_norm: f64,
    pub lambda_norm: f64,
    pub eta: f64,
    pub bounding_radius: f64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model_path: PathBuf,
    pub model: MaxEntModel,
    pub report: TrainReport,
}

/// Reweights the data, mixes in the uniform prior, picks the target
/// marginal and solves the dual.
pub fn train(cfg: &PipelineConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let schema = load_schema(&cfg.schema_path)?;
    let ds = read_dataset(&schema, &cfg.data_path, cfg.skip_bad_rows)?;
    let start = Instant::now();
    let w = reweight(&ds, &schema, cfg.tau)?;
    let q = mix_prior(&schema, cfg.c, w.clone())?;
    let theta = target_marginal(&schema, &ds, &w, cfg.marginal_kind.kind())?;
    let solver_cfg = cfg.solver_config();
    let result = solve(&q, &theta, &solver_cfg)?;
    let elapsed = start.elapsed().as_secs_f64();

    let eta = validate_interior(&theta, DEFAULT_ETA_MIN)?;
    let report = TrainReport {
        rows: ds.total(),
        distinct_points: ds.len(),
        dimension: schema.dim(),
        domain_size: schema.domain_size(),
        c: cfg.c,
        tau: cfg.tau,
        marginal_kind: cfg.marginal_kind.name().to_string(),
        solver_mode: mode_name(solver_cfg.mode).to_string(),
        iterations: result.iterations,
        converged: result.converged,
        dual_value: result.model.dual_value,
        final_gradient_norm: result.final_gradient_norm,
        lambda_norm: result.model.lambda.iter().map(|x| x * x).sum::<f64>().sqrt(),
        eta,
        bounding_radius: bounding_radius(schema.dim(), eta.min(0.5), cfg.c)?,
        wall_clock_seconds: elapsed,
    };
    let file = ModelFile::from_result(&result, &solver_cfg, Some(cfg.marginal_kind.name()));
    let model_path = cfg.output_dir.join(MODEL_FILE);
    let json = file.to_json();
    write_atomic(&model_path, |w| w.write_all(json.as_bytes()).map_err(|e| CliError::io(&model_path, e)))?;
    write_json(&cfg.output_dir.join(TRAIN_REPORT_FILE), &report)?;
    log::info!(
        "trained in {:.3}s: {} iterations, dual value {:.6}, gradient norm {:.2e}",
        elapsed,
        report.iterations,
        report.dual_value,
        report.final_gradient_norm
    );
    Ok(TrainOutput {
        model_path,
        model: result.model,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub count: u64,
    pub model_sha256: String,
    pub generator: String,
}

#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub samples: PathBuf,
    pub meta: SampleMeta,
}

pub fn sample(model_path: &Path, count: u64, seed: u64, out_dir: &Path) -> Result<SampleOutput> {
    if count == 0 {
        return Err(CliError::config("sample count must be at least 1"));
    }
    let (_, model, hash) = load_model(model_path)?;
    let points = sample_points(&model, count, seed)?;
    let samples = out_dir.join(SAMPLES_FILE);
    write_decoded_csv(&model.schema, &points, &samples)?;
    let meta = SampleMeta {
        seed,
        count,
        model_sha256: hash,
        generator: "chacha8, stream = sample index".to_string(),
    };
    write_json(&out_dir.join(SAMPLES_META_FILE), &meta)?;
    Ok(SampleOutput { samples, meta })
}

#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub model: Option<PathBuf>,
    pub samples: Option<PathBuf>,
    /// Needed when no model is given.
    pub schema: Option<PathBuf>,
    pub reference: PathBuf,
    pub label_value: Option<String>,
    /// Overrides the tau stored in the model for the fairness bound.
    pub tau: Option<f64>,
    pub seed: u64,
    /// Draws used for the covariance metric of exact distributions.
    pub covariance_samples: u64,
    pub kl_floor: f64,
    pub skip_bad_rows: bool,
}

impl EvaluateArgs {
    pub fn new(reference: PathBuf) -> Self {
        Self {
            model: None,
            samples: None,
            schema: None,
            reference,
            label_value: None,
            tau: None,
            seed: 0,
            covariance_samples: 10_000,
            kl_floor: maxent_debias_core::metrics::DEFAULT_KL_FLOOR,
            skip_bad_rows: false,
        }
    }
}

/// Label category given by name, or by index if no category has that name.
pub fn resolve_label(schema: &DomainSchema, value: &str) -> Result<u32> {
    let yb = schema.label_block()?;
    let block = &schema.blocks()[yb];
    if let Some(v) = block.value_of(value) {
        return Ok(v);
    }
    match value.parse::<u32>() {
        Ok(v) if (v as usize) < block.values() => Ok(v),
        _ => Err(CliError::config(format!(
            "`{value}` is not a category of label block `{}`",
            block.name
        ))),
    }
}

struct Closer<'a> {
    schema: &'a DomainSchema,
    reference: &'a Dataset,
    kind: Closeness,
    floor: f64,
    draws: u64,
    seed: u64,
}

impl Closer<'_> {
    fn exact(&self, m: &MaxEntModel) -> Result<f64> {
        Ok(match self.kind {
            Closeness::Kl => kl_model_vs_dataset(m, self.reference, self.floor)?,
            Closeness::Covariance => {
                let s = sample_dataset(m, self.draws, self.seed)?;
                covariance_difference_norm(self.schema, &s, self.reference, false)?
            }
        })
    }

    fn empirical(&self, ds: &Dataset) -> Result<f64> {
        Ok(match self.kind {
            Closeness::Kl => kl_dataset_vs_dataset(self.schema, ds, self.reference, self.floor)?,
            Closeness::Covariance => covariance_difference_norm(self.schema, ds, self.reference, false)?,
        })
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let loaded = args.model.as_deref().map(load_model).transpose()?;
    let schema = match (&loaded, &args.schema) {
        (Some((_, m, _)), _) => m.schema.clone(),
        (None, Some(p)) => load_schema(p)?,
        (None, None) => return Err(CliError::config("evaluate needs --model or --schema")),
    };
    if args.model.is_none() && args.samples.is_none() {
        return Err(CliError::config("evaluate needs --model or --samples"));
    }
    let reference = read_dataset(&schema, &args.reference, args.skip_bad_rows)?;
    let label = resolve_label(&schema, args.label_value.as_deref().unwrap_or("1"))?;
    let mut notices = Vec::new();
    let kind = if schema.domain_size() > KL_ENUMERATION_LIMIT {
        notices.push(format!(
            "domain has {:.3e} points, reporting the covariance difference norm instead of KL",
            schema.domain_size()
        ));
        Closeness::Covariance
    } else {
        Closeness::Kl
    };
    let closer = Closer {
        schema: &schema,
        reference: &reference,
        kind: kind.clone(),
        floor: args.kl_floor,
        draws: args.covariance_samples.max(2),
        seed: args.seed,
    };

    let mut columns = vec![ColumnReport::new(
        "raw",
        &fairness_report_empirical(&schema, &reference, label)?,
        None,
    )];
    let mut bound = None;
    if let Some((_, model, _)) = &loaded {
        let prior = prior_model(&model.prior)?;
        columns.push(ColumnReport::new(
            "prior",
            &fairness_report_exact(&prior, label)?,
            Some(closer.exact(&prior)?),
        ));
        columns.push(ColumnReport::new(
            "model",
            &fairness_report_exact(model, label)?,
            Some(closer.exact(model)?),
        ));
        if let Some(tau) = args.tau.or(model.prior.weighted().tau()) {
            match fairness_bound(model, &model.prior, label, tau) {
                Ok(b) => bound = Some(BoundReport::new(tau, model.prior.c(), &b)),
                Err(CoreError::NonBinaryProtected(name)) => {
                    notices.push(format!("no fairness bound: protected block `{name}` is not binary"))
                }
                Err(e) => return Err(e.into()),
            }
        }
    }
    if let Some(path) = &args.samples {
        let ds = read_dataset(&schema, path, args.skip_bad_rows)?;
        columns.push(ColumnReport::new(
            "samples",
            &fairness_report_empirical(&schema, &ds, label)?,
            Some(closer.empirical(&ds)?),
        ));
    }
    let zb = schema.protected_block()?;
    let yb = schema.label_block()?;
    Ok(EvaluationReport {
        protected: schema.blocks()[zb].name.clone(),
        label: schema.blocks()[yb].name.clone(),
        label_value: schema.blocks()[yb].labels[label as usize].clone(),
        closeness: kind,
        columns,
        fairness_bound: bound,
        notices,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub encoded: String,
    pub model: String,
    pub model_sha256: String,
    pub train_report: String,
    pub samples: String,
    pub samples_meta: String,
    pub report: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: Manifest,
    pub train: TrainReport,
    pub report: EvaluationReport,
}

/// encode, train, sample and evaluate in one go, all under `output_dir`.
pub fn pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let enc = encode(&cfg.schema_path, &cfg.data_path, out, cfg.skip_bad_rows)?;
    let mut train_cfg = cfg.clone();
    train_cfg.data_path = enc.encoded.clone();
    let trained = train(&train_cfg)?;
    let sampled = sample(&trained.model_path, cfg.sample_count, cfg.seed, out)?;
    let mut args = EvaluateArgs::new(cfg.data_path.clone());
    args.model = Some(trained.model_path.clone());
    args.samples = Some(sampled.samples.clone());
    args.label_value = Some(cfg.label_value.clone());
    args.seed = cfg.seed;
    args.covariance_samples = cfg.sample_count;
    args.kl_floor = cfg.kl_floor;
    args.skip_bad_rows = cfg.skip_bad_rows;
    let report = evaluate(&args)?;
    write_json(&out.join(REPORT_FILE), &report)?;
    let manifest = Manifest {
        config: cfg.clone(),
        encoded: ENCODED_FILE.to_string(),
        model: MODEL_FILE.to_string(),
        model_sha256: sampled.meta.model_sha256.clone(),
        train_report: TRAIN_REPORT_FILE.to_string(),
        samples: SAMPLES_FILE.to_string(),
        samples_meta: SAMPLES_META_FILE.to_string(),
        report: REPORT_FILE.to_string(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(PipelineOutput {
        manifest,
        train: trained.report,
        report,
    })
}

/// SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
