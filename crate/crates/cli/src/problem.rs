//! Line-oriented problem files.
//!
//! ```text
//! problem dcdc
//! model dcdc.model
//! R [1.55,2.15]x[1.0,1.4]
//! S [1.54,2.16]x[0.99,1.41]
//! B none
//! K 6
//! D 3
//! ```
//!
//! Optional keys: `target <box>`, `split longest|all`, `scheme euler|heun|rk4`,
//! `lte_tol <float>`. The model path is relative to the problem file.

use std::path::{Path, PathBuf};

use switchsynth::{BoxF64, IntegratorConfig, ModelError, SwitchedSystem, SynthesisError, SynthesisProblem};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemFileError {
    #[error("{path}:{line}:{col}: {message}")]
    Syntax {
        path: String,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Model {
        path: String,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: SynthesisError,
    },
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub name: String,
    pub path: PathBuf,
    pub model_path: PathBuf,
    pub problem: SynthesisProblem,
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<(Self, SwitchedSystem), ProblemFileError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ProblemFileError::Io {
            path: shown.clone(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let raw = parse(&text, &shown)?;
        let model_path = base.join(&raw.model);
        let model_shown = model_path.display().to_string();
        let model_text = std::fs::read_to_string(&model_path).map_err(|source| ProblemFileError::Io {
            path: model_shown.clone(),
            source,
        })?;
        let sys = switchsynth::parse_model(&model_text).map_err(|source| ProblemFileError::Model {
            path: model_shown,
            source,
        })?;
        let invalid = |source| ProblemFileError::Invalid {
            path: shown.clone(),
            source,
        };
        let problem = raw.build().map_err(invalid)?;
        problem.check_system(&sys).map_err(invalid)?;
        Ok((
            Self {
                name: raw.name,
                path: path.to_path_buf(),
                model_path,
                problem,
            },
            sys,
        ))
    }
}

#[derive(Debug, Default)]
struct Raw {
    name: String,
    model: String,
    r: Option<BoxF64>,
    target: Option<BoxF64>,
    s: Option<BoxF64>,
    b: Option<Option<BoxF64>>,
    k: Option<usize>,
    d: Option<usize>,
    split: switchsynth::SplitStrategy,
    cfg: IntegratorConfig,
}

impl Raw {
    fn build(&self) -> Result<SynthesisProblem, SynthesisError> {
        let (r, s) = (self.r.clone().unwrap(), self.s.clone().unwrap());
        let p = SynthesisProblem::new(r, s, self.b.clone().flatten(), self.k.unwrap(), self.d.unwrap())?;
        let p = match &self.target {
            Some(t) => p.with_target(t.clone())?,
            None => p,
        };
        Ok(p.with_split(self.split).with_integrator(self.cfg.clone()))
    }
}

fn parse(text: &str, path: &str) -> Result<Raw, ProblemFileError> {
    let err = |line: usize, col: usize, message: String| ProblemFileError::Syntax {
        path: path.to_string(),
        line,
        col,
        message,
    };
    let mut raw = Raw::default();
    let mut seen = std::collections::HashSet::new();
    for (i, full) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = full.split('#').next().unwrap_or("");
        let trimmed = line.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let key_col = line.len() - trimmed.len() + 1;
        let (key, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let value = rest.trim();
        let val_col = if value.is_empty() {
            key_col + key.len()
        } else {
            line.len() - rest.trim_start().len() + 1
        };
        if !seen.insert(key.to_string()) {
            return Err(err(line_no, key_col, format!("duplicate key '{key}'")));
        }
        if value.is_empty() {
            return Err(err(line_no, val_col, format!("missing value for '{key}'")));
        }
        let boxed = |v: &str| v.parse::<BoxF64>().map_err(|e| err(line_no, val_col, e.to_string()));
        let int = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| err(line_no, val_col, format!("expected a non-negative integer, got '{v}'")))
        };
        match key {
            "problem" => raw.name = value.to_string(),
            "model" => raw.model = value.to_string(),
            "R" => raw.r = Some(boxed(value)?),
            "target" => raw.target = Some(boxed(value)?),
            "S" => raw.s = Some(boxed(value)?),
            "B" => raw.b = Some(if value == "none" { None } else { Some(boxed(value)?) }),
            "K" => raw.k = Some(int(value)?),
            "D" => raw.d = Some(int(value)?),
            "split" => raw.split = value.parse().map_err(|e| err(line_no, val_col, e))?,
            "scheme" => raw.cfg.scheme = value.parse().map_err(|e| err(line_no, val_col, e))?,
            "lte_tol" => {
                raw.cfg.lte_tol = match value.parse::<f64>() {
                    Ok(v) if v > 0.0 && v.is_finite() => v,
                    _ => {
                        return Err(err(
                            line_no,
                            val_col,
                            format!("expected a positive tolerance, got '{value}'"),
                        ))
                    }
                }
            }
            _ => return Err(err(line_no, key_col, format!("unknown key '{key}'"))),
        }
    }
    let end = text.lines().count().max(1);
    for key in ["problem", "model", "R", "S", "K", "D"] {
        if !seen.contains(key) {
            return Err(err(end, 1, format!("missing required key '{key}'")));
        }
    }
    Ok(raw)
}
