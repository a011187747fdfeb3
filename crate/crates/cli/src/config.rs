//! Plain-text run configuration: `key = value` lines under `[problem]`,
//! `[solver]`, and `[grid]` sections. Unknown sections or keys are errors —
//! a typo must never silently change an experiment.

use fracbv::denoise::Variant;
use sha2::{Digest, Sha256};
use std::fmt;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
pub struct Config {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub domain_file: Option<String>,
    pub tol: f64,
    pub max_iter: usize,
    pub accelerated: bool,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            variant: Variant::Riesz,
            alpha: 0.5,
            beta: 0.1,
            gamma: 1.0,
            p: 2.0,
            domain_file: None,
            tol: 1e-6,
            max_iter: 5000,
            accelerated: true,
            seed: 0,
            log_every: 10,
        }
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, ConfigError> {
    match s {
        "riesz" => Ok(Variant::Riesz),
        "gagliardo" => Ok(Variant::Gagliardo),
        other => Err(ConfigError(format!(
            "unknown variant '{other}' (expected riesz or gagliardo)"
        ))),
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                match name {
                    "problem" | "solver" | "grid" => section = name.to_string(),
                    other => {
                        return Err(ConfigError(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad_key = || {
                ConfigError(format!(
                    "line {}: unknown key '{key}' in section [{section}]",
                    lineno + 1
                ))
            };
            let bad_value =
                |what: &str| ConfigError(format!("line {}: bad {what} '{value}'", lineno + 1));
            match (section.as_str(), key) {
                ("problem", "variant") => cfg.variant = parse_variant(value)?,
                ("problem", "alpha") => {
                    cfg.alpha = value.parse().map_err(|_| bad_value("number"))?
                }
                ("problem", "beta") => cfg.beta = value.parse().map_err(|_| bad_value("number"))?,
                ("problem", "gamma") => {
                    cfg.gamma = value.parse().map_err(|_| bad_value("number"))?
                }
                ("problem", "p") => cfg.p = value.parse().map_err(|_| bad_value("number"))?,
                ("grid", "domain") => cfg.domain_file = Some(value.to_string()),
                ("solver", "tol") => cfg.tol = value.parse().map_err(|_| bad_value("number"))?,
                ("solver", "max_iter") => {
                    cfg.max_iter = value.parse().map_err(|_| bad_value("integer"))?
                }
                ("solver", "accelerated") => {
                    cfg.accelerated = value.parse().map_err(|_| bad_value("boolean"))?
                }
                ("solver", "seed") => cfg.seed = value.parse().map_err(|_| bad_value("integer"))?,
                ("solver", "log_every") => {
                    cfg.log_every = value.parse().map_err(|_| bad_value("integer"))?
                }
                _ => return Err(bad_key()),
            }
        }
        Ok(cfg)
    }

    /// Canonical serialization of the effective configuration; the digest is
    /// the SHA-256 of this text, so identical configs hash identically no
    /// matter how they were written or which flags supplied them.
    pub fn canonical_text(&self) -> String {
        let variant = match self.variant {
            Variant::Riesz => "riesz",
            Variant::Gagliardo => "gagliardo",
        };
        format!(
            "problem.alpha={}\nproblem.beta={}\nproblem.gamma={}\nproblem.p={}\n\
             problem.variant={}\ngrid.domain={}\nsolver.accelerated={}\n\
             solver.log_every={}\nsolver.max_iter={}\nsolver.seed={}\nsolver.tol={}\n",
            self.alpha,
            self.beta,
            self.gamma,
            self.p,
            variant,
            self.domain_file.as_deref().unwrap_or(""),
            self.accelerated,
            self.log_every,
            self.max_iter,
            self.seed,
            self.tol,
        )
    }

    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
