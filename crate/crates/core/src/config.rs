//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment. Lists are comma
//! separated. Complex numbers are written `re+imi` (`0.5`, `-0.25i`,
//! `1e-3-2i`, `i`). Matrices are row-major complex lists. Unknown or
//! repeated keys are errors.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::models::{build, ModelParams, NonReciprocalParams, ReciprocalParams};
use crate::syscore::SensorSystem;

pub const KNOWN_KEYS: &[&str] = &[
    // system
    "n_modes", "h0", "v", "k1", "k2", "beta1", "beta2",
    // two-mode presets
    "model", "gamma1", "gamma2", "j", "nu2", "p",
    // single evaluation
    "delta",
    // sweep
    "delta_min", "delta_max", "delta_step",
    // feasibility
    "eta_min", "eta_max", "p_min", "p_max", "search_delta_min", "search_delta_max", "grid_points", "budget",
    "feasibility_tol",
    // convergence
    "j_ladder", "p_ladder", "rate_ladder", "eta",
    // oracle
    "dt", "t_total", "t_burn", "n_traj", "seed", "tau", "window",
];

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    raw: String,
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::config(line_no, format!("expected `key = value`, got `{body}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::config(line_no, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(Error::config(line_no, format!("`{key}` has no value")));
            }
            if let Some(prev) = entries.insert(
                key.to_string(),
                Entry {
                    line: line_no,
                    raw: value.to_string(),
                },
            ) {
                return Err(Error::config(line_no, format!("`{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Sets or replaces a key, as if it appeared on line 0.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::config(0, format!("unknown key `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                line: 0,
                raw: value.into(),
            },
        );
        Ok(())
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.raw.as_str())
    }

    fn typed<T>(&self, key: &str, what: &str, f: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => f(&e.raw)
                .map(Some)
                .ok_or_else(|| Error::config(e.line, format!("`{key}` is not a valid {what}: `{}`", e.raw))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, "number", |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "count", |s| s.parse().ok())
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, "integer", |s| s.parse().ok())
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.typed(key, "number list", |s| {
            s.split(',')
                .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect()
        })
    }

    pub fn complex_list(&self, key: &str) -> Result<Option<Vec<C64>>> {
        self.typed(key, "complex list", |s| s.split(',').map(parse_complex).collect())
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }
}

/// Parses `re`, `imi`, or `re±imi`; a bare `i` means unit magnitude.
pub fn parse_complex(s: &str) -> Option<C64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let bytes = s.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re_part, im_part) = match (s.strip_suffix('i'), split) {
        (Some(_), Some(k)) => (&s[..k], Some(&s[k..s.len() - 1])),
        (Some(body), None) => ("", Some(body)),
        (None, _) => (s.as_str(), None),
    };
    let re = if re_part.is_empty() { 0.0 } else { re_part.parse::<f64>().ok()? };
    let im = match im_part {
        None => 0.0,
        Some("") | Some("+") => 1.0,
        Some("-") => -1.0,
        Some(t) => t.parse::<f64>().ok()?,
    };
    (re.is_finite() && im.is_finite()).then(|| C64::new(re, im))
}

/// Formats a complex number so that [`parse_complex`] round-trips it.
pub fn format_complex(z: C64) -> String {
    format!("{:e}{:+e}i", z.re, z.im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Reciprocal,
    NonReciprocal,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "reciprocal" => Ok(Self::Reciprocal),
            "nonreciprocal" => Ok(Self::NonReciprocal),
            other => Err(format!("unknown model `{other}` (expected reciprocal or nonreciprocal)")),
        }
    }
}

/// Caption parameters of the two shipped figures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelDefaults {
    pub params: ModelParams,
    pub k2: f64,
    pub p: f64,
}

pub fn model_defaults(kind: ModelKind) -> ModelDefaults {
    match kind {
        ModelKind::Reciprocal => ModelDefaults {
            params: ModelParams::Reciprocal(ReciprocalParams {
                gamma1: -0.99,
                gamma2: -0.011,
                j: 0.16,
            }),
            k2: 0.01,
            p: 30.0,
        },
        ModelKind::NonReciprocal => ModelDefaults {
            params: ModelParams::NonReciprocal(NonReciprocalParams {
                gamma1: 1.0,
                gamma2: 0.5,
                nu2: 0.0,
                j: 1.5,
            }),
            k2: 0.001,
            p: 5.0,
        },
    }
}

/// A system plus the two-mode preset it came from, if any.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub system: SensorSystem,
    pub model: Option<ModelParams>,
    /// Drive ratio used for two-drive quantities.
    pub p: f64,
}

impl SystemSpec {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        match cfg.str("model") {
            Some(name) => Self::from_model(cfg, name),
            None => Self::from_matrices(cfg),
        }
    }

    fn from_model(cfg: &Config, name: &str) -> Result<Self> {
        let kind: ModelKind = name.parse().map_err(|m| Error::config(cfg.line_of("model"), m))?;
        for key in ["h0", "v", "n_modes"] {
            if cfg.contains(key) {
                return Err(Error::config(cfg.line_of(key), format!("`{key}` conflicts with `model`")));
            }
        }
        if cfg.contains("p") && cfg.contains("beta2") {
            return Err(Error::config(cfg.line_of("beta2"), "set either `p` or `beta2`, not both"));
        }
        let d = model_defaults(kind);
        let params = match d.params {
            ModelParams::Reciprocal(r) => {
                if cfg.contains("nu2") {
                    return Err(Error::config(cfg.line_of("nu2"), "`nu2` only applies to the nonreciprocal model"));
                }
                ModelParams::Reciprocal(ReciprocalParams {
                    gamma1: cfg.f64_or("gamma1", r.gamma1)?,
                    gamma2: cfg.f64_or("gamma2", r.gamma2)?,
                    j: cfg.f64_or("j", r.j)?,
                })
            }
            ModelParams::NonReciprocal(r) => ModelParams::NonReciprocal(NonReciprocalParams {
                gamma1: cfg.f64_or("gamma1", r.gamma1)?,
                gamma2: cfg.f64_or("gamma2", r.gamma2)?,
                nu2: cfg.f64_or("nu2", r.nu2)?,
                j: cfg.f64_or("j", r.j)?,
            }),
        };
        let k1 = cfg.f64_or("k1", 1.0)?;
        let k2 = cfg.f64_or("k2", d.k2 * k1)?;
        let beta1 = cfg.f64_or("beta1", 1.0)?;
        let p = match cfg.f64("beta2")? {
            Some(b2) if beta1 > 0.0 => b2 / beta1,
            Some(_) => 0.0,
            None => cfg.f64_or("p", d.p)?,
        };
        if p < 0.0 {
            return Err(Error::config(cfg.line_of("p"), "`p` must be non-negative"));
        }
        // Model parameters are given in units of k1.
        let scaled = match params {
            ModelParams::Reciprocal(r) => ModelParams::Reciprocal(ReciprocalParams {
                gamma1: r.gamma1 * k1,
                gamma2: r.gamma2 * k1,
                j: r.j * k1,
            }),
            ModelParams::NonReciprocal(r) => ModelParams::NonReciprocal(NonReciprocalParams {
                gamma1: r.gamma1 * k1,
                gamma2: r.gamma2 * k1,
                nu2: r.nu2 * k1,
                j: r.j * k1,
            }),
        };
        let system = build(scaled, k1, k2, beta1, p * beta1).map_err(|e| Error::config(0, e.to_string()))?;
        Ok(Self {
            system,
            model: Some(params),
            p,
        })
    }

    fn from_matrices(cfg: &Config) -> Result<Self> {
        for key in ["gamma1", "gamma2", "j", "nu2", "p"] {
            if cfg.contains(key) {
                return Err(Error::config(cfg.line_of(key), format!("`{key}` requires `model`")));
            }
        }
        let h0 = cfg
            .complex_list("h0")?
            .ok_or_else(|| Error::config(0, "missing `h0` (or `model`)"))?;
        let n = match cfg.usize("n_modes")? {
            Some(n) => n,
            None => (h0.len() as f64).sqrt().round() as usize,
        };
        if n == 0 || n * n != h0.len() {
            return Err(Error::config(
                cfg.line_of("h0"),
                format!("`h0` has {} entries, expected n_modes² = {}", h0.len(), n * n),
            ));
        }
        let h0 = ComplexMatrix::from_row_major(n, n, h0).map_err(|e| Error::config(cfg.line_of("h0"), e.to_string()))?;
        let v = match cfg.complex_list("v")? {
            Some(v) => ComplexMatrix::from_row_major(n, n, v).map_err(|e| Error::config(cfg.line_of("v"), e.to_string()))?,
            None if n == 2 => ComplexMatrix::half_sigma_x(),
            None => return Err(Error::config(0, "missing `v` (only two-mode systems default to σx/2)")),
        };
        let beta1 = cfg.f64_or("beta1", 1.0)?;
        let beta2 = cfg.f64_or("beta2", 0.0)?;
        let system = SensorSystem::new(
            h0,
            v,
            cfg.f64_or("k1", 1.0)?,
            cfg.f64_or("k2", 0.0)?,
            beta1,
            beta2,
        )
        .map_err(|e| Error::config(0, e.to_string()))?;
        let p = if system.beta1() > 0.0 {
            system.beta2() / system.beta1()
        } else {
            0.0
        };
        Ok(Self {
            system,
            model: None,
            p,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("0.5"), Some(c(0.5, 0.0)));
        assert_eq!(parse_complex("-0.25i"), Some(c(0.0, -0.25)));
        assert_eq!(parse_complex("1e-3-2i"), Some(c(1e-3, -2.0)));
        assert_eq!(parse_complex("1e-3+2e-2i"), Some(c(1e-3, 2e-2)));
        assert_eq!(parse_complex(" 3 + 4i "), Some(c(3.0, 4.0)));
        assert_eq!(parse_complex("i"), Some(c(0.0, 1.0)));
        assert_eq!(parse_complex("-i"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("2+i"), Some(c(2.0, 1.0)));
        assert_eq!(parse_complex("-1.5E+2"), Some(c(-150.0, 0.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex(""), None);
        let z = c(-1.234567890123e-7, 9.87654321e12);
        assert_eq!(parse_complex(&format_complex(z)), Some(z));
    }

    #[test]
    fn parses_system() {
        let text = "# T0\nn_modes = 2\nh0 = 0, 0, 0, -0.5i\nk1 = 1  # unit\nbeta1 = 1\n";
        let spec = SystemSpec::from_config(&Config::parse(text).unwrap()).unwrap();
        assert_eq!(spec.system.n_modes(), 2);
        assert_eq!(spec.system.h0()[(1, 1)], c(0.0, -0.5));
        assert!(spec.model.is_none());
    }

    #[test]
    fn model_defaults_follow_captions() {
        let spec = SystemSpec::from_config(&Config::parse("model = reciprocal").unwrap()).unwrap();
        assert_eq!(spec.p, 30.0);
        assert_eq!(spec.system.k2(), 0.01);
        let spec = SystemSpec::from_config(&Config::parse("model = nonreciprocal\np = 2").unwrap()).unwrap();
        assert_eq!(spec.p, 2.0);
        assert_eq!(spec.system.k2(), 0.001);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = Config::parse("k1 = 1\nbogus = 3").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }), "{err}");
        let err = Config::parse("k1 = 1\nk1 = 2").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = Config::parse("just words").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let cfg = Config::parse("\n\nk1 = one").unwrap();
        assert!(matches!(cfg.f64("k1"), Err(Error::Config { line: 3, .. })));
        let cfg = Config::parse("h0 = 1, 2, 3").unwrap();
        assert!(SystemSpec::from_config(&cfg).is_err());
        let cfg = Config::parse("model = reciprocal\nh0 = 0").unwrap();
        assert!(SystemSpec::from_config(&cfg).is_err());
        let cfg = Config::parse("model = triangle").unwrap();
        assert!(SystemSpec::from_config(&cfg).is_err());
    }
}
