//! Run configuration: TOML or JSON, with CLI flag overrides.
//!
//! Every block is optional and defaults to the library's standard
//! parameters; unknown fields are rejected by name so typos surface at load
//! time. Relative paths inside a config resolve against the config file's
//! directory. The whole structure round-trips losslessly through either
//! format.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use viewplan::error::{Error, Result};
use viewplan::gating::GateParams;
use viewplan::geometry::{scene_from_boxes, BoxSpec, CoverageParams, Intrinsics, Scene};
use viewplan::io::{obj, tables, tum};
use viewplan::pose::Pose;
use viewplan::proxy::{ClearanceEstimator, EpisodeConfig};
use viewplan::sampling::SamplerParams;
use viewplan::selection::{
    Policy, SelectionParams, DEFAULT_LAMBDA_YAW, DEFAULT_SIGMA, DEFAULT_STOCH_EPSILON,
    DEFAULT_UNIQUE_CAP,
};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "VIEWPLAN_OUT_DIR";
const OUT_DIR_FALLBACK: &str = "viewplan-out";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneBlock,
    pub trajectory: TrajectoryBlock,
    pub camera: CameraBlock,
    pub coverage: CoverageBlock,
    pub sampler: SamplerBlock,
    pub selection: SelectionBlock,
    pub gate: GateBlock,
    pub episodes: EpisodesBlock,
    pub estimator: EstimatorBlock,
    pub report: ReportBlock,
    pub run: RunBlock,
}

/// Scene source: a mesh file or a procedural box list, never both.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraBlock {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraBlock {
    fn default() -> Self {
        CameraBlock {
            fx: 525.0,
            fy: 525.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageBlock {
    pub voxel_size: f64,
    pub depth_stride: u32,
    pub max_range: f64,
}

impl Default for CoverageBlock {
    fn default() -> Self {
        let p = CoverageParams::default();
        CoverageBlock {
            voxel_size: p.voxel_size,
            depth_stride: p.depth_stride,
            max_range: p.max_range,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerBlock {
    pub trans_sigma: [f64; 3],
    pub yaw_sigma_deg: f64,
    pub arc_radius_range: [f64; 2],
    pub arc_heading_range_deg: [f64; 2],
    pub z_jitter: f64,
    pub pool_size: usize,
    pub random_fraction: f64,
}

impl Default for SamplerBlock {
    fn default() -> Self {
        let p = SamplerParams::default();
        SamplerBlock {
            trans_sigma: p.trans_sigma,
            yaw_sigma_deg: p.yaw_sigma_deg,
            arc_radius_range: p.arc_radius_range,
            arc_heading_range_deg: p.arc_heading_range_deg,
            z_jitter: p.z_jitter,
            pool_size: p.pool_size,
            random_fraction: p.random_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionBlock {
    pub sigma: f64,
    pub lambda_yaw: f64,
    pub unique_cap: usize,
    pub stoch_epsilon: f64,
    pub use_lazy: bool,
}

impl Default for SelectionBlock {
    fn default() -> Self {
        SelectionBlock {
            sigma: DEFAULT_SIGMA,
            lambda_yaw: DEFAULT_LAMBDA_YAW,
            unique_cap: DEFAULT_UNIQUE_CAP,
            stoch_epsilon: DEFAULT_STOCH_EPSILON,
            use_lazy: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateBlock {
    pub k: f64,
    pub tau: f64,
    pub psnr_div: f64,
    pub ssim_div: f64,
    pub lpips_num: f64,
}

impl Default for GateBlock {
    fn default() -> Self {
        let p = GateParams::default();
        GateBlock {
            k: p.k,
            tau: p.tau,
            psnr_div: p.psnr_div,
            ssim_div: p.ssim_div,
            lpips_num: p.lpips_num,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodesBlock {
    pub n_episodes: usize,
    pub horizon: usize,
    pub step_length: f64,
    pub clearance_threshold: f64,
    pub min_separation: f64,
    pub progress_success_fraction: f64,
    pub clearance_max_range: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_z: Option<f64>,
    pub collisions_per_attempt: bool,
    /// Also write a per-episode CSV next to the metrics JSON.
    pub write_episode_csv: bool,
}

impl Default for EpisodesBlock {
    fn default() -> Self {
        let c = EpisodeConfig::default();
        EpisodesBlock {
            n_episodes: c.n_episodes,
            horizon: c.horizon,
            step_length: c.step_length,
            clearance_threshold: c.clearance_threshold,
            min_separation: c.min_separation,
            progress_success_fraction: c.progress_success_fraction,
            clearance_max_range: c.clearance_max_range,
            agent_z: c.agent_z,
            collisions_per_attempt: c.collisions_per_attempt,
            write_episode_csv: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorBlock {
    /// `oracle`, `additive_noise`, `multiplicative_bias`, or `scripted`.
    pub kind: String,
    pub sigma: f64,
    pub bias: f64,
    pub factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
}

impl Default for EstimatorBlock {
    fn default() -> Self {
        EstimatorBlock {
            kind: "oracle".to_string(),
            sigma: 0.0,
            bias: 0.0,
            factor: 1.0,
            script: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<PathBuf>,
    pub stability_floor: usize,
    pub novelty_bin_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_method: Option<String>,
}

impl Default for ReportBlock {
    fn default() -> Self {
        ReportBlock {
            runs: None,
            frames: None,
            quality: None,
            stability_floor: 200,
            novelty_bin_count: 5,
            target_method: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub seed: u64,
    pub budgets: Vec<usize>,
    pub policies: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// 0 lets the worker pool size itself.
    pub threads: usize,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            seed: 0,
            budgets: vec![0, 25, 50, 100, 200, 500, 1000, 2000],
            policies: vec!["cn_coverage".to_string()],
            out_dir: None,
            threads: 0,
        }
    }
}

/// Flag-level overrides applied on top of the loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budgets: Option<Vec<usize>>,
    pub policies: Option<Vec<String>>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub sigma: Option<f64>,
    pub unique_cap: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(budgets) = &self.budgets {
            cfg.run.budgets = budgets.clone();
        }
        if let Some(policies) = &self.policies {
            cfg.run.policies = policies.clone();
        }
        if let Some(out) = &self.out {
            cfg.run.out_dir = Some(out.clone());
        }
        if let Some(threads) = self.threads {
            cfg.run.threads = threads;
        }
        if let Some(sigma) = self.sigma {
            cfg.selection.sigma = sigma;
        }
        if let Some(cap) = self.unique_cap {
            cfg.selection.unique_cap = cap;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigFormat {
    Toml,
    Json,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses config text in the given format; errors carry line numbers and
/// name the offending field.
pub fn parse_config(text: &str, format: ConfigFormat) -> Result<RunConfig> {
    match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| line_of_offset(text, s.start))
                .unwrap_or(0);
            Error::parse("config", line, e.message().to_string())
        }),
        ConfigFormat::Json => serde_json::from_str(text)
            .map_err(|e| Error::parse("config", e.line(), e.to_string())),
    }
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

/// Loads a `.toml` or `.json` config file.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => ConfigFormat::Toml,
        Some("json") => ConfigFormat::Json,
        other => {
            return Err(Error::param(
                "config",
                format!("unsupported config extension {other:?}; use .toml or .json"),
            ))
        }
    };
    let text = std::fs::read_to_string(path)?;
    let config = parse_config(&text, format)?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    Ok(LoadedConfig { config, base })
}

impl LoadedConfig {
    pub fn new(config: RunConfig, base: impl Into<PathBuf>) -> Self {
        LoadedConfig {
            config,
            base: base.into(),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    /// Output directory: config `run.out_dir` (flag overrides land there),
    /// then the environment variable, then a fixed fallback.
    pub fn out_dir(&self) -> PathBuf {
        if let Some(dir) = &self.config.run.out_dir {
            return self.resolve(dir);
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(OUT_DIR_FALLBACK)
    }

    /// Scene id without loading geometry: explicit id, else the mesh stem.
    pub fn scene_id(&self) -> Result<String> {
        if let Some(id) = &self.config.scene.id {
            return Ok(id.clone());
        }
        if let Some(mesh) = &self.config.scene.mesh {
            if let Some(stem) = mesh.file_stem() {
                return Ok(stem.to_string_lossy().into_owned());
            }
        }
        Err(Error::param(
            "scene.id",
            "required when the scene has no mesh path to take a name from",
        ))
    }

    pub fn scene(&self) -> Result<Scene> {
        let block = &self.config.scene;
        match (&block.mesh, block.boxes.is_empty()) {
            (Some(_), false) => Err(Error::param(
                "scene",
                "set either `mesh` or `boxes`, not both",
            )),
            (Some(mesh), true) => {
                let path = self.resolve(mesh);
                let scene = obj::load_obj(&path)?;
                Ok(match &block.id {
                    Some(id) => Scene::new(id.clone(), scene.triangles().to_vec()),
                    None => scene,
                })
            }
            (None, false) => Ok(scene_from_boxes(self.scene_id()?, &block.boxes)),
            (None, true) => Err(Error::param(
                "scene",
                "set `mesh` or at least one [[scene.boxes]] entry",
            )),
        }
    }

    pub fn train_poses(&self) -> Result<Vec<Pose>> {
        let Some(path) = &self.config.trajectory.path else {
            return Err(Error::param(
                "trajectory.path",
                "required for this command",
            ));
        };
        let traj = tum::load_tum(&self.resolve(path))?;
        if traj.is_empty() {
            return Err(Error::param("trajectory.path", "trajectory file is empty"));
        }
        Ok(tum::poses(&traj))
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        let c = &self.config.camera;
        Intrinsics::new(c.fx, c.fy, c.cx, c.cy, c.width, c.height)
    }

    pub fn coverage_params(&self) -> Result<CoverageParams> {
        let c = &self.config.coverage;
        CoverageParams::new(c.voxel_size, c.depth_stride, c.max_range)
    }

    pub fn sampler_params(&self) -> Result<SamplerParams> {
        let s = &self.config.sampler;
        let params = SamplerParams {
            trans_sigma: s.trans_sigma,
            yaw_sigma_deg: s.yaw_sigma_deg,
            arc_radius_range: s.arc_radius_range,
            arc_heading_range_deg: s.arc_heading_range_deg,
            z_jitter: s.z_jitter,
            pool_size: s.pool_size,
            random_fraction: s.random_fraction,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn selection_params(&self, policy: Policy, budget: usize) -> SelectionParams {
        let s = &self.config.selection;
        SelectionParams {
            policy,
            budget,
            sigma: s.sigma,
            lambda_yaw: s.lambda_yaw,
            unique_cap: s.unique_cap,
            stoch_epsilon: s.stoch_epsilon,
            use_lazy: s.use_lazy,
        }
    }

    pub fn gate_params(&self) -> GateParams {
        let g = &self.config.gate;
        GateParams {
            k: g.k,
            tau: g.tau,
            psnr_div: g.psnr_div,
            ssim_div: g.ssim_div,
            lpips_num: g.lpips_num,
        }
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        let e = &self.config.episodes;
        EpisodeConfig {
            n_episodes: e.n_episodes,
            horizon: e.horizon,
            step_length: e.step_length,
            clearance_threshold: e.clearance_threshold,
            min_separation: e.min_separation,
            progress_success_fraction: e.progress_success_fraction,
            clearance_max_range: e.clearance_max_range,
            agent_z: e.agent_z,
            collisions_per_attempt: e.collisions_per_attempt,
            seed: self.config.run.seed,
        }
    }

    pub fn estimator(&self) -> Result<ClearanceEstimator> {
        let e = &self.config.estimator;
        match e.kind.as_str() {
            "oracle" => Ok(ClearanceEstimator::Oracle),
            "additive_noise" => Ok(ClearanceEstimator::AdditiveNoise {
                sigma: e.sigma,
                bias: e.bias,
            }),
            "multiplicative_bias" => Ok(ClearanceEstimator::MultiplicativeBias { factor: e.factor }),
            "scripted" => {
                let Some(script) = &e.script else {
                    return Err(Error::param(
                        "estimator.script",
                        "required for the scripted estimator",
                    ));
                };
                Ok(ClearanceEstimator::Scripted {
                    table: tables::load_scripted(&self.resolve(script))?,
                })
            }
            other => Err(Error::param(
                "estimator.kind",
                format!("unknown estimator `{other}`"),
            )),
        }
    }

    pub fn policies(&self) -> Result<Vec<Policy>> {
        if self.config.run.policies.is_empty() {
            return Err(Error::param("run.policies", "need at least one policy"));
        }
        self.config
            .run
            .policies
            .iter()
            .map(|name| name.parse())
            .collect()
    }
}
