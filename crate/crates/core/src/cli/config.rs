//! Run configuration: presets, `key = value` files and command-line overrides.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::{Mode, SpectralDensity};

/// Keys accepted in config files and `--set`.
const KEYS: &[&str] = &[
    "model",
    "eta",
    "s",
    "omega_c",
    "g",
    "zeta",
    "band_center",
    "modes",
    "omega0",
    "beta_s",
    "beta_b",
    "t_end",
    "n_steps",
    "richardson",
    "l_max",
    "xi_points",
    "oracle_modes",
    "oracle_omega_max",
    "range",
];

/// Keys that only make sense for one bath model.
const OHMIC_KEYS: &[&str] = &["eta", "s", "omega_c", "oracle_omega_max"];
const SEMICIRCLE_KEYS: &[&str] = &["g", "zeta", "band_center"];
const DISCRETE_KEYS: &[&str] = &["modes"];

/// Keys a sweep may vary.
const SWEEPABLE: &[&str] = &[
    "eta",
    "s",
    "omega_c",
    "g",
    "zeta",
    "band_center",
    "omega0",
    "beta_s",
    "beta_b",
    "t_end",
];

pub fn preset(name: &str) -> Result<Vec<(&'static str, &'static str)>> {
    Ok(match name {
        "fig2" => vec![
            ("model", "ohmic"),
            ("s", "1"),
            ("omega_c", "10"),
            ("omega0", "1"),
            ("beta_s", "1.2"),
            ("beta_b", "0.2"),
            ("t_end", "20"),
            ("n_steps", "4000"),
            ("richardson", "2"),
            ("range", "eta=0.02:0.2:37"),
        ],
        "fig3" => vec![
            ("model", "semicircle"),
            ("zeta", "0.03"),
            ("band_center", "1"),
            ("omega0", "1.05"),
            ("beta_s", "1"),
            ("beta_b", "5"),
            ("t_end", "600"),
            ("n_steps", "15000"),
            ("richardson", "1"),
            ("range", "g=0.02:0.2:37"),
        ],
        "sm1" => vec![
            ("model", "semicircle"),
            ("zeta", "0.08"),
            ("band_center", "1"),
            ("omega0", "1.05"),
            ("beta_s", "0.5"),
            ("beta_b", "0.2"),
            ("t_end", "200"),
            ("n_steps", "5000"),
            ("richardson", "1"),
            ("range", "g=0.02:0.2:37"),
        ],
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected fig2, fig3 or sm1)"
            )))
        }
    })
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{}'", n + 1, raw.trim()))
        })?;
        out.push((checked_key(k.trim())?, v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `key=value` override.
pub fn parse_assignment(text: &str) -> Result<(String, String)> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, got '{text}'")))?;
    Ok((checked_key(k.trim())?, v.trim().to_string()))
}

fn checked_key(key: &str) -> Result<String> {
    if KEYS.contains(&key) {
        Ok(key.to_string())
    } else {
        Err(Error::Config(format!("unknown key '{key}'")))
    }
}

/// Inclusive linear range of `points` values of one key.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRange {
    pub key: String,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SweepRange {
    /// Parses `key=lo:hi:n`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Config(format!("expected key=lo:hi:n, got '{text}'"));
        let (key, spec) = text.split_once('=').ok_or_else(bad)?;
        let key = key.trim();
        if !SWEEPABLE.contains(&key) {
            return Err(Error::Config(format!("key '{key}' cannot be swept")));
        }
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let lo: f64 = lo.parse().map_err(|_| bad())?;
        let hi: f64 = hi.parse().map_err(|_| bad())?;
        let points: usize = n.parse().map_err(|_| bad())?;
        if points == 0 || !lo.is_finite() || !hi.is_finite() || (points > 1 && hi < lo) {
            return Err(bad());
        }
        if points == 1 && lo != hi {
            return Err(Error::Config(format!("a one-point range needs lo = hi, got '{text}'")));
        }
        Ok(SweepRange {
            key: key.to_string(),
            lo,
            hi,
            points,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.hi } else { self.lo + step * k as f64 })
            .collect()
    }

    pub fn describe(&self) -> String {
        format!("{}={}:{}:{}", self.key, self.lo, self.hi, self.points)
    }
}

/// Bath model parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Ohmic { eta: f64, s: f64, omega_c: f64 },
    Semicircle { g: f64, zeta: f64, band_center: f64 },
    Discrete { modes: Vec<Mode> },
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub omega0: f64,
    pub beta_s: f64,
    pub beta_b: f64,
    pub t_end: f64,
    pub n_steps: usize,
    pub richardson: u32,
    /// `None` selects the tail rule per state.
    pub l_max: Option<usize>,
    pub xi_points: usize,
    pub oracle_modes: usize,
    pub oracle_omega_max: f64,
    pub range: Option<SweepRange>,
}

/// Layered raw key/value settings, later layers winning.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("key '{key}': cannot parse '{v}' as a number")))
            })
            .transpose()
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        match self.number(key)? {
            Some(x) if x <= 0.0 => Err(Error::Config(format!("key '{key}' must be positive, got {x}"))),
            other => Ok(other),
        }
    }

    fn required_positive(&self, key: &str) -> Result<f64> {
        self.required(key)?;
        Ok(self.positive(key)?.expect("present"))
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}' as a count")))
            })
            .transpose()
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let model_name = self.required("model")?;
        let (model, own_keys) = match model_name {
            "ohmic" => (
                ModelConfig::Ohmic {
                    eta: self.required_positive("eta")?,
                    s: self.positive("s")?.unwrap_or(1.0),
                    omega_c: self.required_positive("omega_c")?,
                },
                OHMIC_KEYS,
            ),
            "semicircle" => (
                ModelConfig::Semicircle {
                    g: self.required_positive("g")?,
                    zeta: self.required_positive("zeta")?,
                    band_center: self.positive("band_center")?.unwrap_or(1.0),
                },
                SEMICIRCLE_KEYS,
            ),
            "discrete" => (
                ModelConfig::Discrete {
                    modes: parse_modes(self.required("modes")?)?,
                },
                DISCRETE_KEYS,
            ),
            other => {
                return Err(Error::Config(format!(
                    "unknown model '{other}' (expected ohmic, semicircle or discrete)"
                )))
            }
        };
        for key in OHMIC_KEYS.iter().chain(SEMICIRCLE_KEYS).chain(DISCRETE_KEYS) {
            if self.get(key).is_some() && !own_keys.contains(key) {
                return Err(Error::Config(format!(
                    "key '{key}' does not apply to model '{model_name}'"
                )));
            }
        }
        let range = self.get("range").map(SweepRange::parse).transpose()?;
        if let Some(r) = &range {
            let applies = own_keys.contains(&r.key.as_str())
                || !OHMIC_KEYS.iter().chain(SEMICIRCLE_KEYS).any(|k| *k == r.key);
            if !applies {
                return Err(Error::Config(format!(
                    "swept key '{}' does not apply to model '{model_name}'",
                    r.key
                )));
            }
        }
        let n_steps = self
            .count("n_steps")?
            .ok_or_else(|| Error::Config("missing required key 'n_steps'".into()))?;
        if n_steps == 0 {
            return Err(Error::Config("key 'n_steps' must be at least 1".into()));
        }
        let xi_points = self.count("xi_points")?.unwrap_or(41);
        if xi_points < 2 {
            return Err(Error::Config("key 'xi_points' must be at least 2".into()));
        }
        let oracle_omega_max = match &model {
            ModelConfig::Ohmic { omega_c, .. } => {
                self.positive("oracle_omega_max")?.unwrap_or(2.0 * omega_c)
            }
            _ => 0.0,
        };
        let richardson = self.count("richardson")?.unwrap_or(0);
        if richardson > 6 {
            return Err(Error::Config(format!("key 'richardson' must be at most 6, got {richardson}")));
        }
        Ok(RunConfig {
            model,
            omega0: self.required_positive("omega0")?,
            beta_s: self.required_positive("beta_s")?,
            beta_b: self.required_positive("beta_b")?,
            t_end: self.required_positive("t_end")?,
            n_steps,
            richardson: richardson as u32,
            l_max: self.count("l_max")?.filter(|&l| l > 0),
            xi_points,
            oracle_modes: self.count("oracle_modes")?.unwrap_or(400).max(1),
            oracle_omega_max,
            range,
        })
    }
}

/// Parses `omega:g` pairs separated by commas; `none` is the empty bath.
fn parse_modes(text: &str) -> Result<Vec<Mode>> {
    if text.trim() == "none" {
        return Ok(Vec::new());
    }
    let modes = text
        .split(',')
        .map(|pair| {
            let bad = || Error::Config(format!("mode '{pair}': expected omega:g"));
            let (w, g) = pair.split_once(':').ok_or_else(bad)?;
            let omega: f64 = w.trim().parse().map_err(|_| bad())?;
            let g: f64 = g.trim().parse().map_err(|_| bad())?;
            Ok(Mode { omega, g })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(modes)
}

impl RunConfig {
    pub fn density(&self) -> Result<SpectralDensity> {
        match &self.model {
            ModelConfig::Ohmic { eta, s, omega_c } => SpectralDensity::ohmic(*eta, *s, *omega_c),
            ModelConfig::Semicircle {
                g,
                zeta,
                band_center,
            } => SpectralDensity::semicircle(*g, *zeta, *band_center),
            ModelConfig::Discrete { modes } => SpectralDensity::discrete(modes.clone()),
        }
    }

    /// Coupling strength labelling a spectrum row.
    pub fn coupling(&self) -> Option<f64> {
        match self.model {
            ModelConfig::Ohmic { eta, .. } => Some(eta),
            ModelConfig::Semicircle { g, .. } => Some(g),
            ModelConfig::Discrete { .. } => None,
        }
    }

    /// Sorted `key=value` pairs of every setting in effect.
    pub fn resolved_pairs(&self) -> Vec<(String, String)> {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        match &self.model {
            ModelConfig::Ohmic { eta, s, omega_c } => {
                m.insert("model", "ohmic".into());
                m.insert("eta", eta.to_string());
                m.insert("s", s.to_string());
                m.insert("omega_c", omega_c.to_string());
                m.insert("oracle_omega_max", self.oracle_omega_max.to_string());
            }
            ModelConfig::Semicircle {
                g,
                zeta,
                band_center,
            } => {
                m.insert("model", "semicircle".into());
                m.insert("g", g.to_string());
                m.insert("zeta", zeta.to_string());
                m.insert("band_center", band_center.to_string());
            }
            ModelConfig::Discrete { modes } => {
                m.insert("model", "discrete".into());
                let list: Vec<String> = modes.iter().map(|md| format!("{}:{}", md.omega, md.g)).collect();
                m.insert("modes", if list.is_empty() { "none".into() } else { list.join(",") });
            }
        }
        m.insert("omega0", self.omega0.to_string());
        m.insert("beta_s", self.beta_s.to_string());
        m.insert("beta_b", self.beta_b.to_string());
        m.insert("t_end", self.t_end.to_string());
        m.insert("n_steps", self.n_steps.to_string());
        m.insert("richardson", self.richardson.to_string());
        m.insert("l_max", self.l_max.map_or("auto".into(), |l| l.to_string()));
        m.insert("xi_points", self.xi_points.to_string());
        m.insert("oracle_modes", self.oracle_modes.to_string());
        if let Some(r) = &self.range {
            m.insert("range", r.describe());
        }
        m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(pairs: &[(&str, &str)]) -> RawConfig {
        let mut r = RawConfig::default();
        for (k, v) in pairs {
            r.set(k, v);
        }
        r
    }

    #[test]
    fn fig2_preset_resolves_with_eta() {
        let mut r = raw(&preset("fig2").unwrap());
        r.set("eta", "0.15");
        let cfg = r.resolve().unwrap();
        assert_eq!(
            cfg.model,
            ModelConfig::Ohmic {
                eta: 0.15,
                s: 1.0,
                omega_c: 10.0
            }
        );
        assert_eq!((cfg.omega0, cfg.beta_s, cfg.beta_b), (1.0, 1.2, 0.2));
        assert_eq!(cfg.oracle_omega_max, 20.0);
    }

    #[test]
    fn missing_coupling_is_reported() {
        let err = raw(&preset("fig3").unwrap()).resolve().unwrap_err();
        assert_eq!(err, Error::Config("missing required key 'g'".into()));
    }

    #[test]
    fn foreign_keys_are_rejected() {
        let mut r = raw(&preset("fig2").unwrap());
        r.set("eta", "0.1");
        r.set("g", "0.1");
        assert!(matches!(r.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn config_text_comments_and_unknown_keys() {
        let parsed = parse_config_text("# bath\nmodel = ohmic  # trailing\n\neta=0.1\n").unwrap();
        assert_eq!(
            parsed,
            vec![("model".to_string(), "ohmic".to_string()), ("eta".to_string(), "0.1".to_string())]
        );
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("eta 0.1").is_err());
    }

    #[test]
    fn range_values_hit_both_ends() {
        let r = SweepRange::parse("g=0.02:0.2:37").unwrap();
        let v = r.values();
        assert_eq!(v.len(), 37);
        assert_eq!(v[0], 0.02);
        assert_eq!(v[36], 0.2);
        assert!((v[16] - 0.1).abs() < 1e-15);
        assert!(SweepRange::parse("g=0.2:0.02:3").is_err());
        assert!(SweepRange::parse("n_steps=1:2:2").is_err());
    }

    #[test]
    fn discrete_modes_parse() {
        let r = raw(&[
            ("model", "discrete"),
            ("modes", "0.9:0.05, 1.1:0.07"),
            ("omega0", "1"),
            ("beta_s", "1"),
            ("beta_b", "1"),
            ("t_end", "10"),
            ("n_steps", "100"),
        ]);
        let cfg = r.resolve().unwrap();
        assert_eq!(
            cfg.model,
            ModelConfig::Discrete {
                modes: vec![Mode { omega: 0.9, g: 0.05 }, Mode { omega: 1.1, g: 0.07 }]
            }
        );
        assert_eq!(cfg.l_max, None);
    }
}
