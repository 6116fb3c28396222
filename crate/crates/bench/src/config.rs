//! Experiment configuration files.
//!
//! The format is line based:
//!
//! ```text
//! # comment
//! problems = max-of-linear, norm-distance
//! d = 10
//! eps = 0.2, 0.1, 0.05
//! seeds = 0..5
//! lipschitz = 1
//! radius = 1
//!
//! [baseline]
//! kind = baseline
//!
//! [full]
//! kind = parsco
//! outer = accel
//! ```
//!
//! Keys before the first section describe the grid. Each `[name]` section
//! declares a method; its name is the `method` column of the output. `kind`
//! defaults to the section name when that is `baseline` or `parsco`. Lists are
//! comma separated and `a..b` is the half-open integer range.

use std::hash::Hasher;
use std::str::FromStr;

use parsco::ball_oracle::EffortProfile;
use parsco::outer::{OuterMode, PipelineConfig};
use parsco::rank1::MatmulBackend;

use crate::error::{BenchError, Result};
use crate::problems::ProblemKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ParscoSettings {
    pub outer: OuterMode,
    pub c_ba: f64,
    pub sgd_iters: usize,
    pub newton_iters: usize,
    pub chunk_c: f64,
    pub backend: MatmulBackend,
    pub gradient_batch: usize,
    pub max_steps: usize,
}

impl Default for ParscoSettings {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            outer: p.mode,
            c_ba: p.c_ba,
            sgd_iters: p.effort.sgd_max_iters,
            newton_iters: p.effort.newton_max_iters,
            chunk_c: p.effort.chunk_c,
            backend: p.effort.backend,
            gradient_batch: p.gradient_batch,
            max_steps: p.max_steps,
        }
    }
}

impl ParscoSettings {
    pub fn pipeline(&self) -> PipelineConfig {
        let effort = EffortProfile {
            newton_max_iters: self.newton_iters,
            chunk_c: self.chunk_c,
            backend: self.backend,
            ..EffortProfile::practical().with_sgd_iters(self.sgd_iters)
        };
        PipelineConfig {
            mode: self.outer,
            c_ba: self.c_ba,
            effort,
            max_steps: self.max_steps,
            gradient_batch: self.gradient_batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodKind {
    /// Projected SGD with T = t_scale·(LR/ε)².
    Baseline { t_scale: f64 },
    Parsco(ParscoSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub kind: MethodKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problems: Vec<ProblemKind>,
    pub dims: Vec<usize>,
    pub eps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub lipschitz: f64,
    pub radius: f64,
    pub methods: Vec<MethodSpec>,
}

/// Command-line settings applied on top of every parsco method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub outer: Option<OuterMode>,
    pub chunk_c: Option<f64>,
    pub backend: Option<MatmulBackend>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        for m in &mut self.methods {
            if let MethodKind::Parsco(s) = &mut m.kind {
                if let Some(v) = o.outer {
                    s.outer = v;
                }
                if let Some(v) = o.chunk_c {
                    s.chunk_c = v;
                }
                if let Some(v) = o.backend {
                    s.backend = v;
                }
            }
        }
    }

    /// FNV-1a hash of the normalized configuration.
    pub fn hash(&self, master_seed: u64) -> u64 {
        let mut h = fnv::FnvHasher::default();
        h.write(format!("{self:?}|{master_seed}").as_bytes());
        h.finish()
    }

    pub fn cells(&self) -> usize {
        self.methods.len() * self.problems.len() * self.dims.len() * self.eps.len() * self.seeds.len()
    }
}

pub fn parse_backend(s: &str) -> std::result::Result<MatmulBackend, String> {
    match s {
        "naive" => Ok(MatmulBackend::Naive),
        "strassen" => Ok(MatmulBackend::strassen()),
        other => Err(format!("unknown backend `{other}`")),
    }
}

fn err(line: usize, message: impl Into<String>) -> BenchError {
    BenchError::Config {
        line,
        message: message.into(),
    }
}

fn scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| err(line, format!("cannot parse `{value}` for `{key}`")))
}

fn list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(|v| scalar(line, key, v.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(err(line, format!("`{key}` is empty")));
    }
    Ok(items)
}

fn seeds(line: usize, value: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = value.split_once("..") {
        let a: u64 = scalar(line, "seeds", a.trim())?;
        let b: u64 = scalar(line, "seeds", b.trim())?;
        if b <= a {
            return Err(err(line, "empty seed range"));
        }
        Ok((a..b).collect())
    } else {
        list(line, "seeds", value)
    }
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<(usize, String, String)>,
}

impl Section {
    fn into_method(self) -> Result<MethodSpec> {
        let kind = self
            .entries
            .iter()
            .find(|(_, k, _)| k == "kind")
            .map(|(_, _, v)| v.clone())
            .unwrap_or_else(|| self.name.clone());
        let kind = match kind.as_str() {
            "baseline" => {
                let mut t_scale = 1.0;
                for (line, k, v) in &self.entries {
                    match k.as_str() {
                        "kind" => {}
                        "t_scale" => t_scale = scalar(*line, k, v)?,
                        _ => return Err(err(*line, format!("unknown key `{k}` for a baseline method"))),
                    }
                }
                if !(t_scale > 0.0) {
                    return Err(err(self.line, "t_scale must be positive"));
                }
                MethodKind::Baseline { t_scale }
            }
            "parsco" => {
                let mut s = ParscoSettings::default();
                for (line, k, v) in &self.entries {
                    let line = *line;
                    match k.as_str() {
                        "kind" => {}
                        "outer" => s.outer = v.parse().map_err(|e: parsco::Error| err(line, e.to_string()))?,
                        "c_ba" => s.c_ba = scalar(line, k, v)?,
                        "sgd_iters" => s.sgd_iters = scalar(line, k, v)?,
                        "newton_iters" => s.newton_iters = scalar(line, k, v)?,
                        "chunk_c" => s.chunk_c = scalar(line, k, v)?,
                        "backend" => s.backend = parse_backend(v).map_err(|e| err(line, e))?,
                        "gradient_batch" => s.gradient_batch = scalar(line, k, v)?,
                        "max_steps" => s.max_steps = scalar(line, k, v)?,
                        _ => return Err(err(line, format!("unknown key `{k}` for a parsco method"))),
                    }
                }
                if s.sgd_iters == 0 || s.newton_iters == 0 || s.max_steps == 0 || !(s.c_ba > 0.0) || !(s.chunk_c >= 1.0) {
                    return Err(err(self.line, "parsco settings out of range"));
                }
                MethodKind::Parsco(s)
            }
            other => return Err(err(self.line, format!("unknown method kind `{other}`"))),
        };
        Ok(MethodSpec { name: self.name, kind })
    }
}

impl FromStr for ExperimentConfig {
    type Err = BenchError;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            problems: vec![ProblemKind::MaxOfLinear],
            dims: vec![10],
            eps: vec![0.05],
            seeds: vec![0],
            lipschitz: 1.0,
            radius: 1.0,
            methods: Vec::new(),
        };
        let mut sections: Vec<Section> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header"))?
                    .trim();
                if name.is_empty() || name.contains(char::is_whitespace) || name.contains(',') {
                    return Err(err(line, format!("bad method name `{name}`")));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(err(line, format!("duplicate method `{name}`")));
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| err(line, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(err(line, "expected `key = value`"));
            }
            if let Some(s) = sections.last_mut() {
                s.entries.push((line, key.to_string(), value.to_string()));
                continue;
            }
            match key {
                "problems" | "problem" => cfg.problems = list(line, key, value)?,
                "d" => cfg.dims = list(line, key, value)?,
                "eps" => cfg.eps = list(line, key, value)?,
                "seeds" => cfg.seeds = seeds(line, value)?,
                "lipschitz" => cfg.lipschitz = scalar(line, key, value)?,
                "radius" => cfg.radius = scalar(line, key, value)?,
                _ => return Err(err(line, format!("unknown key `{key}`"))),
            }
            let bad = match key {
                "d" => cfg.dims.contains(&0),
                "eps" => cfg.eps.iter().any(|e| !(*e > 0.0)),
                "lipschitz" => !(cfg.lipschitz > 0.0),
                "radius" => !(cfg.radius > 0.0),
                _ => false,
            };
            if bad {
                return Err(err(line, format!("`{key}` must be positive")));
            }
        }
        if sections.is_empty() {
            return Err(err(text.lines().count().max(1), "no methods declared"));
        }
        cfg.methods = sections.into_iter().map(Section::into_method).collect::<Result<_>>()?;
        Ok(cfg)
    }
}
