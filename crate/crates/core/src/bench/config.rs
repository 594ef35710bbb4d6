use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::encoders::{EncoderSpec, PromptOptions};
use crate::error::{Error, Result};
use crate::instances::GenConfig;
use crate::trainer::{Mode, Normalize, PpoHyper, RewardConfig, TrainConfig};

/// Environment variable that, when set, selects the remote text encoder at
/// this URL regardless of the config file.
pub const ENCODER_URL_ENV: &str = "LUCA_ENCODER_URL";

/// Every recognised key with its default value.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("batch_period", "20"),
    ("batch_size", "20"),
    ("check_period", "50"),
    ("checkpoints", ""),
    ("clip_ratio", "0.2"),
    ("coef_entropy", "0.01"),
    ("coef_policy", "1.0"),
    ("coef_value", "0.5"),
    ("count", "200"),
    ("dataset", "data"),
    ("e_max", "2"),
    ("e_min", "1"),
    ("encoder", "builtin"),
    ("encoder_fallback", "true"),
    ("encoder_timeout_ms", "10000"),
    ("encoder_url", ""),
    ("epochs", "4"),
    ("explicit_rates", "false"),
    ("files", ""),
    ("flexibility", "0.35"),
    ("gamma", "1.0"),
    ("hint_period", "20"),
    ("hint_quantile", "0.75"),
    ("input", ""),
    ("iterations", "1000"),
    ("lambda", "0.5"),
    ("lambdas", "0.3,0.4,0.5,0.6,0.7"),
    ("lr", "0.0002"),
    ("methods", "fifo,spt,mor,mwkr"),
    ("mode", "luca"),
    ("n_jobs", "10"),
    ("n_machines", "5"),
    ("normalize", "returns"),
    ("ops_max", "6"),
    ("ops_min", "4"),
    ("oracle_max_ops", "12"),
    ("oracle_seconds", "60"),
    ("out", "out"),
    ("ratio", ""),
    ("ratios", "2,4,8,16"),
    ("runs", "10"),
    ("seed", "0"),
    ("split", "0.6,0.2,0.2"),
    ("time_max", "20"),
    ("time_min", "1"),
];

/// Flat `key=value` settings.
///
/// Sources apply in order: defaults, config file, command-line overrides,
/// then the encoder URL environment variable. Every numeric setting is
/// range-checked when the configuration is built.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn bad(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    /// Parses `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_overrides(text: &str) -> Result<Vec<(String, String)>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .map(|(i, l)| {
                let (k, v) = l
                    .split_once('=')
                    .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, got {l:?}")))?;
                Ok((k.trim().to_string(), v.trim().to_string()))
            })
            .collect()
    }

    pub fn from_sources(
        file: Option<&Path>,
        overrides: &[(String, String)],
        encoder_url_env: Option<String>,
    ) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (k, v) in Self::parse_overrides(&text)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        if let Some(url) = encoder_url_env.filter(|u| !u.is_empty()) {
            cfg.set("encoder", "remote")?;
            cfg.set("encoder_url", &url)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown setting {key:?}"))),
        }
    }

    /// Builder form of [`RunConfig::set`] for known-good keys.
    pub fn with(mut self, key: &str, value: impl ToString) -> Result<Self> {
        self.set(key, &value.to_string())?;
        self.check()?;
        Ok(self)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("unknown key {key}"))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key).parse().map_err(|e| bad(key, e))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key).parse().map_err(|e| bad(key, e))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key).parse().map_err(|e| bad(key, e))?;
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(v)
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(bad(key, format!("expected true or false, got {other:?}"))),
        }
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.list(key)
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| bad(key, e)))
            .collect()
    }

    pub fn path(&self, key: &str) -> PathBuf {
        PathBuf::from(self.get(key))
    }

    fn in_range(&self, key: &str, lo: f64, hi: f64) -> Result<f64> {
        let v = self.f64(key)?;
        if !(lo..=hi).contains(&v) {
            return Err(bad(key, format!("{v} outside [{lo}, {hi}]")));
        }
        Ok(v)
    }

    fn positive(&self, key: &str) -> Result<usize> {
        let v = self.usize(key)?;
        if v == 0 {
            return Err(bad(key, "must be positive"));
        }
        Ok(v)
    }

    /// Emission range: `ratio=1:r` overrides `e_min`/`e_max`.
    pub fn emission_range(&self) -> Result<(f64, f64)> {
        let ratio = self.get("ratio");
        if ratio.is_empty() {
            return Ok((self.f64("e_min")?, self.f64("e_max")?));
        }
        parse_ratio(ratio).map(|r| (1.0, r)).map_err(|e| bad("ratio", e))
    }

    pub fn gen_config(&self) -> Result<GenConfig> {
        let (e_min, e_max) = self.emission_range()?;
        let g = GenConfig::new(
            self.positive("n_jobs")?,
            self.positive("n_machines")?,
            (self.positive("ops_min")?, self.positive("ops_max")?),
            (self.f64("time_min")?, self.f64("time_max")?),
            self.in_range("flexibility", f64::MIN_POSITIVE, 1.0)?,
            e_min,
            e_max,
        );
        g.validate()?;
        Ok(g)
    }

    pub fn split(&self) -> Result<(f64, f64, f64)> {
        match self.f64_list("split")?.as_slice() {
            &[a, b, c] if [a, b, c].iter().all(|f| (0.0..=1.0).contains(f)) && (a + b + c - 1.0).abs() < 1e-9 => {
                Ok((a, b, c))
            }
            _ => Err(bad("split", "expected three fractions summing to 1")),
        }
    }

    pub fn mode(&self) -> Result<Mode> {
        self.get("mode").parse()
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            mode: self.mode()?,
            reward: RewardConfig {
                lambda: self.in_range("lambda", 0.0, 1.0)?,
                gamma: self.in_range("gamma", 0.0, 1.0)?,
                zscore_eps: 1e-8,
                normalize: self.get("normalize").parse::<Normalize>()?,
            },
            ppo: PpoHyper {
                clip_ratio: self.f64("clip_ratio")?,
                coef_policy: self.f64("coef_policy")?,
                coef_value: self.f64("coef_value")?,
                coef_entropy: self.f64("coef_entropy")?,
                epochs: self.positive("epochs")?,
                lr: self.f64("lr")?,
            },
            iterations: self.positive("iterations")?,
            batch_size: self.positive("batch_size")?,
            batch_period: self.positive("batch_period")?,
            check_period: self.positive("check_period")?,
            hint_period: self.positive("hint_period")?,
            hint_quantile: self.in_range("hint_quantile", 0.0, 1.0)?,
            prompt: self.prompt_options()?,
            seed: self.u64("seed")?,
            checkpoint_dir: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn prompt_options(&self) -> Result<PromptOptions> {
        Ok(PromptOptions {
            explicit_rates: self.bool("explicit_rates")?,
        })
    }

    pub fn encoder_spec(&self) -> Result<EncoderSpec> {
        match self.get("encoder") {
            "builtin" => Ok(EncoderSpec::Builtin),
            "remote" => {
                let url = self.get("encoder_url");
                if url.is_empty() {
                    return Err(bad("encoder_url", format!("required for the remote encoder (or set {ENCODER_URL_ENV})")));
                }
                Ok(EncoderSpec::Remote {
                    url: url.to_string(),
                    timeout: Duration::from_millis(self.positive("encoder_timeout_ms")? as u64),
                    fallback: self.bool("encoder_fallback")?,
                })
            }
            other => Err(bad("encoder", format!("expected builtin or remote, got {other:?}"))),
        }
    }

    /// Validates every typed setting.
    pub fn check(&self) -> Result<()> {
        self.gen_config()?;
        self.split()?;
        self.train_config()?;
        self.encoder_spec()?;
        self.positive("count")?;
        self.positive("runs")?;
        self.positive("oracle_max_ops")?;
        if !(self.f64("oracle_seconds")? > 0.0) {
            return Err(bad("oracle_seconds", "must be positive"));
        }
        for l in self.f64_list("lambdas")? {
            if !(0.0..=1.0).contains(&l) {
                return Err(bad("lambdas", format!("{l} outside [0, 1]")));
            }
        }
        for r in self.list("ratios") {
            parse_ratio(&r).map_err(|e| bad("ratios", e))?;
        }
        Ok(())
    }

    /// Sorted `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }
}

/// Accepts `r` or `1:r` with `r >= 1`.
pub fn parse_ratio(s: &str) -> std::result::Result<f64, String> {
    let r = s.trim().strip_prefix("1:").unwrap_or(s.trim());
    let v: f64 = r.parse().map_err(|_| format!("bad emission ratio {s:?}"))?;
    if !(v.is_finite() && v >= 1.0) {
        return Err(format!("emission ratio {s:?} must be at least 1"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.check().unwrap();
        assert_eq!(c.train_config().unwrap(), TrainConfig::default());
        assert_eq!(c.gen_config().unwrap(), GenConfig::default());
        assert_eq!(c.to_text().lines().count(), DEFAULTS.len());
    }

    #[test]
    fn layered_sources() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.cfg");
        std::fs::write(&f, "# comment\nlambda = 0.3\nseed=4\n\n").unwrap();
        let c = RunConfig::from_sources(Some(&f), &[("lambda".into(), "0.7".into())], None).unwrap();
        assert_eq!(c.f64("lambda").unwrap(), 0.7);
        assert_eq!(c.u64("seed").unwrap(), 4);
        let c = RunConfig::from_sources(None, &[], Some("http://127.0.0.1:9/e".into())).unwrap();
        assert!(matches!(c.encoder_spec().unwrap(), EncoderSpec::Remote { .. }));
    }

    #[test]
    fn range_checks() {
        let o = |k: &str, v: &str| RunConfig::from_sources(None, &[(k.into(), v.into())], None);
        assert!(o("lambda", "1.5").is_err());
        assert!(o("flexibility", "0").is_err());
        assert!(o("batch_size", "0").is_err());
        assert!(o("mode", "greedy").is_err());
        assert!(o("nonsense", "1").is_err());
        assert!(o("split", "0.5,0.5,0.5").is_err());
        assert!(o("ratios", "2,0.5").is_err());
        assert!(o("encoder", "remote").is_err());
        assert!(o("lr", "NaN").is_err());
    }

    #[test]
    fn ratio_syntax() {
        assert_eq!(parse_ratio("1:16"), Ok(16.0));
        assert_eq!(parse_ratio("8"), Ok(8.0));
        assert!(parse_ratio("1:0.5").is_err());
        let c = RunConfig::default().with("ratio", "1:16").unwrap();
        assert_eq!(c.emission_range().unwrap(), (1.0, 16.0));
    }
}
