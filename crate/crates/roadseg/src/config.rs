//! Pipeline configuration: a line-oriented `section.key = value` file with a
//! canonical rendering and a content digest for report provenance.

use sha2::{Digest, Sha256};

use crate::rainsnow::GuidedFilterParams;
use crate::specular::SpecularParams;
use crate::svm::SeedLayout;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    OutOfDomain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Shadow,
    RainSnow,
    Specular,
}

impl FilterKind {
    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Shadow => "shadow",
            FilterKind::RainSnow => "rainsnow",
            FilterKind::Specular => "specular",
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text {
            "shadow" => Some(FilterKind::Shadow),
            "rainsnow" => Some(FilterKind::RainSnow),
            "specular" => Some(FilterKind::Specular),
            _ => None,
        }
    }
}

/// Every tunable of the detection pipeline. Defaults reproduce the standard
/// run; the CLI loads overrides from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub rng_seed: u64,
    /// Order in which enabled filters run.
    pub filter_order: [FilterKind; 3],
    pub shadow_enabled: bool,
    pub rainsnow_enabled: bool,
    pub specular_enabled: bool,
    pub buffer_width: usize,
    pub guided: GuidedFilterParams,
    pub specular: SpecularParams,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub seeds: SeedLayout,
    pub group_size: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            // Highlight correction runs before streak removal: smoothing
            // smears highlight boundaries below the detection threshold,
            // while bright streaks are achromatic and pass through the
            // highlight stage untouched.
            filter_order: [FilterKind::Shadow, FilterKind::Specular, FilterKind::RainSnow],
            shadow_enabled: true,
            rainsnow_enabled: true,
            specular_enabled: true,
            buffer_width: 5,
            guided: GuidedFilterParams::default(),
            specular: SpecularParams::default(),
            svm_c: 10.0,
            svm_tol: 1e-3,
            seeds: SeedLayout::default(),
            group_size: 3,
        }
    }
}

impl PipelineConfig {
    /// All three filters off; the comparison baseline.
    pub fn without_filters(mut self) -> Self {
        self.shadow_enabled = false;
        self.rainsnow_enabled = false;
        self.specular_enabled = false;
        self
    }

    pub fn enabled(&self, kind: FilterKind) -> bool {
        match kind {
            FilterKind::Shadow => self.shadow_enabled,
            FilterKind::RainSnow => self.rainsnow_enabled,
            FilterKind::Specular => self.specular_enabled,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: &str| Err(ConfigError::OutOfDomain(msg.to_string()));
        if self.buffer_width < 1 {
            return fail("shadow.buffer_width must be >= 1");
        }
        if self.guided.radius < 1 {
            return fail("rainsnow.radius must be >= 1");
        }
        if self.guided.epsilon < 0.0 {
            return fail("rainsnow.epsilon must be >= 0");
        }
        if !(self.specular.achromatic_delta > 0.0 && self.specular.achromatic_delta < 1.0 / 3.0) {
            return fail("specular.achromatic_delta must lie in (0, 1/3)");
        }
        if !(self.specular.chroma_percentile > 0.0 && self.specular.chroma_percentile <= 1.0) {
            return fail("specular.chroma_percentile must lie in (0, 1]");
        }
        if self.svm_c <= 0.0 {
            return fail("svm.c must be positive");
        }
        if self.svm_tol <= 0.0 {
            return fail("svm.tol must be positive");
        }
        if !self.seeds.validate() {
            return fail("seed layout regions must be valid fractions");
        }
        if self.group_size < 1 {
            return fail("eval.group_size must be >= 1");
        }
        let mut seen = [false; 3];
        for kind in self.filter_order {
            let idx = kind as usize;
            if seen[idx] {
                return fail("pipeline.filter_order repeats a filter");
            }
            seen[idx] = true;
        }
        Ok(())
    }

    /// Canonical rendering: every key, fixed order, shortest float form.
    pub fn render(&self) -> String {
        let order = self
            .filter_order
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "pipeline.rng_seed = {}\n\
             pipeline.filter_order = {}\n\
             filters.shadow = {}\n\
             filters.rainsnow = {}\n\
             filters.specular = {}\n\
             shadow.buffer_width = {}\n\
             rainsnow.radius = {}\n\
             rainsnow.epsilon = {}\n\
             specular.patch_radius = {}\n\
             specular.achromatic_delta = {}\n\
             specular.chroma_percentile = {}\n\
             svm.c = {}\n\
             svm.tol = {}\n\
             seeds.samples_per_class = {}\n\
             seeds.road_top_y = {}\n\
             seeds.road_bottom_y = {}\n\
             seeds.road_top_half_width = {}\n\
             seeds.road_bottom_half_width = {}\n\
             seeds.nonroad_top_fraction = {}\n\
             seeds.nonroad_strip_width = {}\n\
             eval.group_size = {}\n",
            self.rng_seed,
            order,
            self.shadow_enabled,
            self.rainsnow_enabled,
            self.specular_enabled,
            self.buffer_width,
            self.guided.radius,
            self.guided.epsilon,
            self.specular.patch_radius,
            self.specular.achromatic_delta,
            self.specular.chroma_percentile,
            self.svm_c,
            self.svm_tol,
            self.seeds.samples_per_class,
            self.seeds.road_top_y,
            self.seeds.road_bottom_y,
            self.seeds.road_top_half_width,
            self.seeds.road_bottom_half_width,
            self.seeds.nonroad_top_fraction,
            self.seeds.nonroad_strip_width,
            self.group_size,
        )
    }

    /// Hex digest of the canonical rendering, recorded in reports.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.render().as_bytes());
        let bytes = hasher.finalize();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses overrides on top of the defaults. Blank lines and `#` comments
    /// are allowed; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no + 1,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            seen.push(key.to_string());
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
            ConfigError::InvalidValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: reason.to_string(),
            }
        }
        fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
            value.parse::<T>().map_err(|_| bad(key, value, "not a number"))
        }
        fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
            match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad(key, value, "expected true or false")),
            }
        }
        match key {
            "pipeline.rng_seed" => self.rng_seed = parse_num(key, value)?,
            "pipeline.filter_order" => {
                let kinds: Vec<FilterKind> = value
                    .split(',')
                    .map(|t| FilterKind::parse(t.trim()))
                    .collect::<Option<_>>()
                    .ok_or_else(|| bad(key, value, "unknown filter name"))?;
                if kinds.len() != 3 {
                    return Err(bad(key, value, "expected three filters"));
                }
                self.filter_order = [kinds[0], kinds[1], kinds[2]];
            }
            "filters.shadow" => self.shadow_enabled = parse_bool(key, value)?,
            "filters.rainsnow" => self.rainsnow_enabled = parse_bool(key, value)?,
            "filters.specular" => self.specular_enabled = parse_bool(key, value)?,
            "shadow.buffer_width" => self.buffer_width = parse_num(key, value)?,
            "rainsnow.radius" => self.guided.radius = parse_num(key, value)?,
            "rainsnow.epsilon" => self.guided.epsilon = parse_num(key, value)?,
            "specular.patch_radius" => self.specular.patch_radius = parse_num(key, value)?,
            "specular.achromatic_delta" => {
                self.specular.achromatic_delta = parse_num(key, value)?
            }
            "specular.chroma_percentile" => {
                self.specular.chroma_percentile = parse_num(key, value)?
            }
            "svm.c" => self.svm_c = parse_num(key, value)?,
            "svm.tol" => self.svm_tol = parse_num(key, value)?,
            "seeds.samples_per_class" => self.seeds.samples_per_class = parse_num(key, value)?,
            "seeds.road_top_y" => self.seeds.road_top_y = parse_num(key, value)?,
            "seeds.road_bottom_y" => self.seeds.road_bottom_y = parse_num(key, value)?,
            "seeds.road_top_half_width" => {
                self.seeds.road_top_half_width = parse_num(key, value)?
            }
            "seeds.road_bottom_half_width" => {
                self.seeds.road_bottom_half_width = parse_num(key, value)?
            }
            "seeds.nonroad_top_fraction" => {
                self.seeds.nonroad_top_fraction = parse_num(key, value)?
            }
            "seeds.nonroad_strip_width" => {
                self.seeds.nonroad_strip_width = parse_num(key, value)?
            }
            "eval.group_size" => self.group_size = parse_num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_round_trip_is_identity() {
        let cfg = PipelineConfig::default();
        let rendered = cfg.render();
        let parsed = PipelineConfig::parse(&rendered).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.render(), rendered);
    }

    #[test]
    fn round_trip_survives_odd_floats() {
        let mut cfg = PipelineConfig::default();
        cfg.guided.epsilon = 0.017_345_678_912_345;
        cfg.svm_tol = 3.5e-7;
        cfg.seeds.nonroad_strip_width = 1.0 / 3.0;
        let parsed = PipelineConfig::parse(&cfg.render()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = PipelineConfig::parse("svm.gamma = 2\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey("svm.gamma".to_string()));
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let err = PipelineConfig::parse("svm.c = 1\nsvm.c = 2\n").unwrap_err();
        assert_eq!(err, ConfigError::DuplicateKey("svm.c".to_string()));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cfg = PipelineConfig::parse("# tuning\n\nsvm.c = 5\n").unwrap();
        assert_eq!(cfg.svm_c, 5.0);
    }

    #[test]
    fn bad_values_name_the_key() {
        match PipelineConfig::parse("svm.c = fast\n").unwrap_err() {
            ConfigError::InvalidValue { key, .. } => assert_eq!(key, "svm.c"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_domain_values_fail_validation() {
        assert!(matches!(
            PipelineConfig::parse("svm.c = -1\n"),
            Err(ConfigError::OutOfDomain(_))
        ));
        assert!(matches!(
            PipelineConfig::parse("pipeline.filter_order = shadow,shadow,specular\n"),
            Err(ConfigError::OutOfDomain(_))
        ));
    }

    #[test]
    fn digest_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        assert_eq!(a.digest(), b.digest());
        b.rng_seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn filter_order_parses() {
        let cfg =
            PipelineConfig::parse("pipeline.filter_order = specular,shadow,rainsnow\n").unwrap();
        assert_eq!(
            cfg.filter_order,
            [FilterKind::Specular, FilterKind::Shadow, FilterKind::RainSnow]
        );
    }
}
