//! Flat `key = value` configuration.
//!
//! Every parameter group has a key prefix (`extraction.`, `association.`,
//! ...). Missing keys keep their defaults, unknown or repeated keys are
//! errors, `#` starts a comment. The label dictionary is given by
//! `label.<class_id> = <name> <label>` lines; when any are present they
//! replace the built-in dictionary. [`Config::to_text`] writes every key
//! with its current value.

use polemap_core::cluster::{LabelDictionary, LabelEntry};
use polemap_core::extraction::ExtractionParams;
use polemap_core::localization::{PipelineConfig, PipelineParams};
use polemap_core::registration::RegistrationParams;
use polemap_core::relocalization::RelocParams;
use polemap_core::sim::{DriftSpec, RelocEvalSpec, RouteSpec, SceneSpec};
use polemap_core::{AssociationParams, SemanticLabel};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub extraction: ExtractionParams,
    pub registration: RegistrationParams,
    pub association: AssociationParams,
    pub reloc: RelocParams,
    pub pipeline: PipelineConfig,
    pub scene: SceneSpec,
    pub drift: DriftSpec,
    pub route: RouteSpec,
    pub eval: RelocEvalSpec,
    pub labels: LabelDictionary,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            extraction: ExtractionParams::default(),
            registration: RegistrationParams::default(),
            association: AssociationParams::default(),
            reloc: RelocParams::default(),
            pipeline: PipelineConfig::default(),
            scene: SceneSpec::standard(0),
            drift: DriftSpec::default(),
            route: RouteSpec::standard(),
            eval: RelocEvalSpec { drift: DriftSpec::default(), ..RelocEvalSpec::default() },
            labels: LabelDictionary::default(),
        }
    }
}

mod parse {
    pub fn f64(s: &str) -> Result<f64, String> {
        let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() { Ok(v) } else { Err(format!("`{s}` is not finite")) }
    }

    pub fn usize(s: &str) -> Result<usize, String> {
        s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
    }

    pub fn u64(s: &str) -> Result<u64, String> {
        s.parse().map_err(|_| format!("`{s}` is not a non-negative integer"))
    }

    pub fn bool(s: &str) -> Result<bool, String> {
        match s {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("`{s}` is not true or false")),
        }
    }

    pub fn opt_f64(s: &str) -> Result<Option<f64>, String> {
        if s == "none" { Ok(None) } else { f64(s).map(Some) }
    }

    pub fn f64_list(s: &str) -> Result<Vec<f64>, String> {
        s.split(',').map(|v| f64(v.trim())).collect()
    }

    pub fn waypoints(s: &str) -> Result<Vec<[f64; 2]>, String> {
        s.split(';')
            .map(|p| match p.split(',').map(|v| f64(v.trim())).collect::<Result<Vec<_>, _>>()?.as_slice() {
                [x, y] => Ok([*x, *y]),
                _ => Err(format!("`{p}` is not an x,y pair")),
            })
            .collect()
    }
}

mod show {
    pub fn f64(v: &f64) -> String {
        v.to_string()
    }

    pub fn usize(v: &usize) -> String {
        v.to_string()
    }

    pub fn u64(v: &u64) -> String {
        v.to_string()
    }

    pub fn bool(v: &bool) -> String {
        v.to_string()
    }

    pub fn opt_f64(v: &Option<f64>) -> String {
        v.map_or_else(|| "none".into(), |x| x.to_string())
    }

    pub fn f64_list(v: &[f64]) -> String {
        v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn waypoints(v: &[[f64; 2]]) -> String {
        v.iter().map(|p| format!("{},{}", p[0], p[1])).collect::<Vec<_>>().join(";")
    }
}

macro_rules! keys {
    ($($key:literal => $($field:ident).+ : $kind:ident),* $(,)?) => {
        const KEYS: &[&str] = &[$($key),*];

        fn set(cfg: &mut Config, key: &str, value: &str) -> Option<Result<(), String>> {
            match key {
                $($key => Some(parse::$kind(value).map(|v| cfg.$($field).+ = v)),)*
                _ => None,
            }
        }

        fn render(cfg: &Config, out: &mut String) {
            $(out.push_str(&format!("{} = {}\n", $key, show::$kind(&cfg.$($field).+)));)*
        }
    };
}

keys! {
    "extraction.cluster_distance" => extraction.cluster_distance: f64,
    "extraction.min_points" => extraction.min_points: usize,
    "registration.merge_radius" => registration.merge_radius: f64,
    "registration.strict_labels" => registration.strict_labels: bool,
    "association.search_radius" => association.search_radius: f64,
    "association.max_length_error" => association.max_length_error: f64,
    "association.max_angle_error_deg" => association.max_angle_error_deg: f64,
    "association.max_sub_edge_distance" => association.max_sub_edge_distance: f64,
    "association.max_edge_distance" => association.max_edge_distance: f64,
    "association.min_sub_edge_matches" => association.min_sub_edge_matches: usize,
    "association.min_edge_matches" => association.min_edge_matches: usize,
    "association.candidates" => association.candidates: usize,
    "reloc.epsilon" => reloc.epsilon: f64,
    "reloc.ransac_threshold" => reloc.ransac_threshold: f64,
    "reloc.ransac_iterations" => reloc.ransac_iterations: usize,
    "reloc.min_pairs" => reloc.min_pairs: usize,
    "reloc.icp_max_iterations" => reloc.icp_max_iterations: usize,
    "reloc.icp_convergence" => reloc.icp_convergence: f64,
    "reloc.icp_max_points_per_cluster" => reloc.icp_max_points_per_cluster: usize,
    "reloc.seed" => reloc.seed: u64,
    "reloc.ransac_first" => reloc.ransac_first: bool,
    "pipeline.reloc_period" => pipeline.reloc_period: f64,
    "pipeline.relocalization_enabled" => pipeline.relocalization_enabled: bool,
    "pipeline.fix_latency_frames" => pipeline.fix_latency_frames: usize,
    "pipeline.max_fix_jump" => pipeline.max_fix_jump: opt_f64,
    "scene.width" => scene.width: f64,
    "scene.height" => scene.height: f64,
    "scene.n_clusters" => scene.n_clusters: usize,
    "scene.pole_fraction" => scene.pole_fraction: f64,
    "scene.min_spacing" => scene.min_spacing: f64,
    "scene.points_per_cluster" => scene.points_per_cluster: usize,
    "scene.map_points_per_cluster" => scene.map_points_per_cluster: usize,
    "scene.point_noise_sigma" => scene.point_noise_sigma: f64,
    "scene.label_flip_rate" => scene.label_flip_rate: f64,
    "scene.clutter_points" => scene.clutter_points: usize,
    "scene.sensor_range" => scene.sensor_range: f64,
    "scene.seed" => scene.seed: u64,
    "drift.translational_drift" => drift.translational_drift: f64,
    "drift.rotational_drift" => drift.rotational_drift: f64,
    "drift.noise_sigma" => drift.noise_sigma: f64,
    "drift.seed" => drift.seed: u64,
    "route.waypoints" => route.waypoints: waypoints,
    "route.speed" => route.speed: f64,
    "route.frame_rate" => route.frame_rate: f64,
    "eval.retentions" => eval.retentions: f64_list,
    "eval.trials" => eval.trials: usize,
    "eval.delta" => eval.delta: f64,
    "eval.max_distance" => eval.max_distance: f64,
    "eval.step" => eval.step: f64,
    "eval.seed" => eval.seed: u64,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut seen: Vec<String> = Vec::new();
        let mut labels: Vec<LabelEntry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else { return Err(ConfigError::Syntax { line }) };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line });
            }
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            seen.push(key.into());
            let bad = |message: String| ConfigError::Value { line, key: key.into(), message };
            if let Some(id) = key.strip_prefix("label.") {
                let class_id: u16 = id.parse().map_err(|_| ConfigError::UnknownKey { line, key: key.into() })?;
                let [name, label] = value.split_whitespace().collect::<Vec<_>>()[..] else {
                    return Err(bad("expected `<name> <label>`".into()));
                };
                let label = SemanticLabel::parse(label).ok_or_else(|| bad(format!("unknown label `{label}`")))?;
                labels.push(LabelEntry { class_id, name: name.into(), label });
                continue;
            }
            match set(&mut cfg, key, value) {
                None => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                Some(r) => r.map_err(bad)?,
            }
        }
        if !labels.is_empty() {
            cfg.labels = LabelDictionary::new(labels).expect("duplicate label keys already rejected");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |group: &'static str, message: String| ConfigError::Invalid { group, message };
        self.extraction.validate().map_err(|e| invalid("extraction", e.to_string()))?;
        if !(self.registration.merge_radius > 0.0) {
            return Err(invalid("registration", "merge_radius must be > 0".into()));
        }
        self.association.validate().map_err(|e| invalid("association", e.into()))?;
        self.reloc.validate().map_err(|e| invalid("reloc", e.into()))?;
        self.pipeline.validate().map_err(|e| invalid("pipeline", e.into()))?;
        self.scene.validate().map_err(|e| invalid("scene", e.to_string()))?;
        self.drift.validate().map_err(|e| invalid("drift", e.to_string()))?;
        if self.route.waypoints.len() < 2 || !(self.route.speed > 0.0) || !(self.route.frame_rate > 0.0) {
            return Err(invalid("route", "need two waypoints and positive speed and frame_rate".into()));
        }
        let e = &self.eval;
        if e.retentions.is_empty() || e.retentions.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("eval", "retentions must lie in [0, 1]".into()));
        }
        if e.trials == 0 || !(e.delta > 0.0) || !(e.step > 0.0) || !(e.max_distance >= 0.0) {
            return Err(invalid("eval", "trials, delta and step must be > 0".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        render(self, &mut out);
        for e in self.labels.entries() {
            out.push_str(&format!("label.{} = {} {}\n", e.class_id, e.name, e.label));
        }
        out
    }

    pub fn keys() -> &'static [&'static str] {
        KEYS
    }

    pub fn pipeline_params(&self) -> PipelineParams {
        PipelineParams { pipeline: self.pipeline, extraction: self.extraction, association: self.association, reloc: self.reloc }
    }

    /// Relocalization evaluation settings, driving with `drift`.
    pub fn eval_spec(&self) -> RelocEvalSpec {
        RelocEvalSpec { drift: self.drift, ..self.eval.clone() }
    }
}
