//! Model JSON: the schema, the prior (C, tau, support and weights), the
//! target marginal, the dual solution and solver diagnostics. Every real
//! number is stored as a decimal string with 17 significant digits.

use std::path::Path;

use maxent_debias_core::solver::{MaxEntModel, SolverResult};
use maxent_debias_core::{mix_prior, DataPoint, ReweightedDistribution, SolverConfig, SolverMode};
use serde::{Deserialize, Serialize};

use super::schema::SchemaFile;
use super::{fmt_f64, parse_f64};
use crate::error::{CliError, Result};

pub const MODEL_FORMAT: &str = "maxent-debias-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverMeta {
    pub mode: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: String,
    pub epsilon: String,
    pub gradient_tolerance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub schema: SchemaFile,
    pub c: String,
    pub tau: Option<String>,
    pub marginal_kind: Option<String>,
    /// Support of the weighted prior as bit strings.
    pub support: Vec<String>,
    pub weights: Vec<String>,
    pub theta: Vec<String>,
    pub lambda: Vec<String>,
    pub dual_value: String,
    pub solver: Option<SolverMeta>,
}

pub fn mode_name(mode: SolverMode) -> &'static str {
    match mode {
        SolverMode::BoxNewton => "box-newton",
        SolverMode::DampedNewton => "damped-newton",
    }
}

fn strings(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| fmt_f64(x)).collect()
}

fn numbers(xs: &[String], what: &str) -> Result<Vec<f64>> {
    xs.iter().map(|s| parse_f64(s, what)).collect()
}

impl ModelFile {
    pub fn from_model(model: &MaxEntModel, marginal_kind: Option<&str>) -> Self {
        let w = model.prior.weighted();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            schema: SchemaFile::from_schema(&model.schema),
            c: fmt_f64(model.prior.c()),
            tau: w.tau().map(fmt_f64),
            marginal_kind: marginal_kind.map(str::to_string),
            support: w.support().iter().map(|p| p.to_string()).collect(),
            weights: strings(w.weights()),
            theta: strings(&model.theta),
            lambda: strings(&model.lambda),
            dual_value: fmt_f64(model.dual_value),
            solver: None,
        }
    }

    pub fn from_result(result: &SolverResult, cfg: &SolverConfig, marginal_kind: Option<&str>) -> Self {
        let mut f = Self::from_model(&result.model, marginal_kind);
        f.solver = Some(SolverMeta {
            mode: mode_name(cfg.mode).to_string(),
            iterations: result.iterations,
            converged: result.converged,
            final_gradient_norm: fmt_f64(result.final_gradient_norm),
            epsilon: fmt_f64(cfg.epsilon),
            gradient_tolerance: fmt_f64(cfg.gradient_tolerance),
        });
        f
    }

    /// Rebuilds the model. The dual value is recomputed and must agree with
    /// the stored one.
    pub fn to_model(&self) -> Result<MaxEntModel> {
        if self.format != MODEL_FORMAT || self.version != MODEL_VERSION {
            return Err(CliError::data(format!(
                "unsupported model format `{}` version {}",
                self.format, self.version
            )));
        }
        let schema = self.schema.to_schema().map_err(|e| CliError::data(e.to_string()))?;
        let d = schema.dim();
        let mut support = Vec::with_capacity(self.support.len());
        for s in &self.support {
            let bits: Vec<u8> = s
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(CliError::data(format!("support point `{s}` is not a bit string"))),
                })
                .collect::<Result<_>>()?;
            if bits.len() != d {
                return Err(CliError::data(format!("support point `{s}` has the wrong length")));
            }
            support.push(DataPoint::from_bits(bits));
        }
        let tau = self.tau.as_deref().map(|t| parse_f64(t, "tau")).transpose()?;
        let w = ReweightedDistribution::from_parts(support, numbers(&self.weights, "weights")?, tau)?;
        let prior = mix_prior(&schema, parse_f64(&self.c, "c")?, w)?;
        let theta = numbers(&self.theta, "theta")?;
        let lambda = numbers(&self.lambda, "lambda")?;
        if theta.len() != d || lambda.len() != d {
            return Err(CliError::data("theta or lambda has the wrong length"));
        }
        let model = MaxEntModel::new(prior, theta, lambda)?;
        let stored = parse_f64(&self.dual_value, "dual_value")?;
        if (model.dual_value - stored).abs() > 1e-9 * stored.abs().max(1.0) {
            return Err(CliError::data(format!(
                "stored dual value {stored} does not match the recomputed {}",
                model.dual_value
            )));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }
}

pub fn parse_model(text: &str) -> Result<(ModelFile, MaxEntModel)> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| CliError::data(format!("model JSON: {e}")))?;
    let model = file.to_model()?;
    Ok((file, model))
}

/// Loads a model and returns it with the SHA-256 of the file bytes.
pub fn load_model(path: &Path) -> Result<(ModelFile, MaxEntModel, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::data(format!("{}: not UTF-8", path.display())))?;
    let (file, model) = parse_model(&text).map_err(|e| match e {
        CliError::Data(m) => CliError::data(format!("{}: {m}", path.display())),
        CliError::Core(c) => CliError::data(format!("{}: {c}", path.display())),
        other => other,
    })?;
    Ok((file, model, super::sha256_hex(&bytes)))
}
