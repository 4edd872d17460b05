//! Run configuration: defaults, JSON loading, flag overrides, validation,
//! and the configuration hash embedded in every report.
//!
//! A configuration file is a JSON object with the field names below;
//! omitted fields keep their defaults and unknown fields are rejected, so
//! a typo fails loudly instead of silently running with defaults.  Flags
//! override the file.  Validation enforces the cheap global invariants
//! (positive tolerances, resolution within 32..=512, an integer reciprocal
//! for the dilation parameter) before any solver runs, so malformed input
//! exits with status 2 and never with a half-written report.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;

use heis::coset::scale_from_t;
use heis::geodesic::Metric;
use heis::group::Model;
use heis::mra::{MraTestFunction, MraTolerances};
use heis::voxel::Bounds3;

use crate::{CliError, GlobalFlags};

/// Distance selector shared by the `--metric` flag and config fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricTag {
    /// Sub-Riemannian Carnot-Caratheodory distance
    Cc,
    /// Riemannian contraction distance
    Contraction,
}

impl MetricTag {
    pub fn metric(self) -> Metric {
        match self {
            MetricTag::Cc => Metric::Cc,
            MetricTag::Contraction => Metric::Contraction,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricTag::Cc => "cc",
            MetricTag::Contraction => "contraction",
        }
    }
}

/// Everything a run needs.  One file can drive the full pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Coordinate model for points given on the command line.
    pub model: Model,
    /// Dilation parameter of the tiling system; 1/t must be an integer.
    pub t: f64,
    pub grid: GridConfig,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    /// Distance used by `dist pair`.
    pub metric: MetricTag,
    pub group: GroupSection,
    pub dist: DistSection,
    pub iso: IsoSection,
    pub dirichlet: DirichletSection,
    pub tile: TileSection,
    pub mra: MraSection,
}

/// Shared grid: the box samples distance pairs, the resolution sizes every
/// voxel grid (per axis).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "box")]
    pub bounds: Bounds3,
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupSection {
    /// Random triples checked per property.
    pub checks: usize,
    /// Max coordinate residual accepted as machine precision.
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistSection {
    /// Pairs sampled by `dist estimate`.
    pub pairs: usize,
    /// Control-polygon segments for the cross-check solver.
    pub segments: usize,
    /// Max relative gap between the shooting and control solvers.
    pub agreement_tol: f64,
}

/// Rotation-group checks.  Center and probe are symmetric-model
/// coordinates; the rotations fix the vertical axis through the center.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsoSection {
    pub rotation_order: usize,
    pub center: [f64; 3],
    /// Sample points per element for the cometric identity.
    pub samples: usize,
    pub cometric_tol: f64,
    /// Start point for the fixed-point search.
    pub probe: [f64; 3],
    /// A-priori bound on the distance from the probe to the fixed point.
    pub radius_bound: f64,
    /// Certified max displacement of the center, contraction metric.
    pub tol_contraction: f64,
    /// Certified max displacement of the center, CC metric.
    pub tol_cc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirichletSection {
    /// Grid box; must contain the enumeration ball around the base point.
    #[serde(rename = "box")]
    pub bounds: Bounds3,
    /// Base point in polarized coordinates.
    pub base_point: [f64; 3],
    pub metric: MetricTag,
    pub enumeration_radius: f64,
    /// Sampling window for the fundamental-set axioms.
    pub window: Bounds3,
    pub lattice_range: i64,
    pub covering_min: f64,
    pub overlap_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileSection {
    pub max_iter: usize,
    /// Convergence tolerance for the symmetric difference, in units of one
    /// grid cell volume.
    pub symdiff_tol_cells: f64,
    /// Self-similarity residual gate; the honest residual is a half-cell
    /// rasterization band that halves per resolution doubling (about 0.05
    /// at 64^3 and 0.026 at 128^3).
    pub self_similarity_max: f64,
    pub measure_tol: f64,
    /// Sampling window for translate multiplicity.
    pub tiling_window: Bounds3,
    pub lattice_range: i64,
    /// Gate on the fraction of window samples covered exactly once; the
    /// interface band puts the honest fraction near 1 - 2.2/res.
    pub multiplicity_one_min: f64,
    pub mean_multiplicity_tol: f64,
    /// Accepted band for the per-sweep boundary-width contraction ratio.
    pub decay_band: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MraSection {
    pub gram_range: i64,
    pub density_levels: Vec<i32>,
    pub triviality_levels: Vec<i32>,
    /// Probed by the density and nesting checks; `mra project` uses the
    /// first entry.
    pub test_functions: Vec<MraTestFunction>,
    /// Indicator projected at the triviality levels.
    pub triviality_box: Bounds3,
    /// Probe window; when absent, a window framing the standard tile.
    pub window: Option<Bounds3>,
    pub tolerances: MraTolerances,
    /// Level for `mra project` when `--level` is not given.
    pub project_level: i32,
}

// DEFAULTS ############################################################

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: Model::Polarized,
            t: 0.5,
            grid: GridConfig::default(),
            seed: 17,
            threads: 0,
            metric: MetricTag::Cc,
            group: GroupSection::default(),
            dist: DistSection::default(),
            iso: IsoSection::default(),
            dirichlet: DirichletSection::default(),
            tile: TileSection::default(),
            mra: MraSection::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { bounds: Bounds3::unit(), resolution: 128 }
    }
}

impl Default for GroupSection {
    fn default() -> Self {
        GroupSection { checks: 100_000, tol: 1e-12 }
    }
}

impl Default for DistSection {
    fn default() -> Self {
        DistSection { pairs: 300, segments: 64, agreement_tol: 0.02 }
    }
}

impl Default for IsoSection {
    fn default() -> Self {
        IsoSection {
            rotation_order: 4,
            center: [0.0, 0.0, 0.0],
            samples: 200,
            cometric_tol: 1e-6,
            probe: [0.1, 0.0, 0.0],
            radius_bound: 1.0,
            tol_contraction: 1e-6,
            tol_cc: 1e-4,
        }
    }
}

impl Default for DirichletSection {
    fn default() -> Self {
        DirichletSection {
            // frames the enumeration ball about (0.5, 0.5, 0.5) with slack
            bounds: Bounds3::new([-1.1, -1.1, -1.9], [2.1, 2.1, 2.9]),
            base_point: [0.5, 0.5, 0.5],
            metric: MetricTag::Contraction,
            enumeration_radius: 0.9,
            window: Bounds3::new([-0.5, -0.5, -0.5], [1.5, 1.5, 1.5]),
            lattice_range: 3,
            // the boundary rasterization gap thins with the grid: the
            // covering sits near 0.98 at 64^3 and clears 0.99 from 96^3 up
            covering_min: 0.97,
            overlap_max: 0.01,
        }
    }
}

impl Default for TileSection {
    fn default() -> Self {
        TileSection {
            max_iter: 40,
            symdiff_tol_cells: 1.5,
            self_similarity_max: 0.08,
            measure_tol: 0.02,
            tiling_window: Bounds3::new([-0.2, -0.2, -0.2], [1.2, 1.2, 1.4]),
            lattice_range: 3,
            multiplicity_one_min: 0.95,
            mean_multiplicity_tol: 0.03,
            decay_band: [0.4, 0.6],
        }
    }
}

impl Default for MraSection {
    fn default() -> Self {
        MraSection {
            gram_range: 2,
            density_levels: vec![0, 1, 2],
            triviality_levels: vec![-1, -2, -3],
            test_functions: vec![MraTestFunction::Gaussian {
                center: [0.5, 0.5, 0.6],
                sigma: 0.22,
            }],
            triviality_box: Bounds3::unit(),
            window: None,
            tolerances: MraTolerances::default(),
            project_level: 1,
        }
    }
}

// LOADING AND VALIDATION ##############################################

/// Resolve the effective configuration: defaults, then the file, then the
/// flags, then validation.
pub fn effective(flags: &GlobalFlags) -> Result<RunConfig, CliError> {
    let mut cfg = match &flags.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("malformed config {}: {e}", path.display()))
            })?
        }
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(r) = flags.res {
        cfg.grid.resolution = r;
    }
    if let Some(t) = flags.t {
        cfg.t = t;
    }
    if let Some(m) = flags.metric {
        cfg.metric = m;
    }
    if let Some(n) = flags.threads {
        cfg.threads = n;
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn check_box(name: &str, b: &Bounds3) -> Result<(), CliError> {
    for a in 0..3 {
        if !(b.lo[a].is_finite() && b.hi[a].is_finite() && b.lo[a] < b.hi[a]) {
            return Err(usage(format!(
                "{name}: axis {a} needs finite lo < hi, got [{}, {}]",
                b.lo[a], b.hi[a]
            )));
        }
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(usage(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_coords(name: &str, v: &[f64; 3]) -> Result<(), CliError> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(usage(format!("{name} has a non-finite coordinate: {v:?}")));
    }
    Ok(())
}

pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    scale_from_t(cfg.t).map_err(|e| usage(e.to_string()))?;
    let r = cfg.grid.resolution;
    if !(32..=512).contains(&r) {
        return Err(usage(format!("grid resolution must lie in 32..=512, got {r}")));
    }
    check_box("grid.box", &cfg.grid.bounds)?;

    if cfg.group.checks == 0 {
        return Err(usage("group.checks must be at least 1".into()));
    }
    check_positive("group.tol", cfg.group.tol)?;

    if cfg.dist.pairs < 100 {
        return Err(usage(format!(
            "dist.pairs must be at least 100 for a stable estimate, got {}",
            cfg.dist.pairs
        )));
    }
    if cfg.dist.segments < 8 {
        return Err(usage("dist.segments must be at least 8".into()));
    }
    check_positive("dist.agreement_tol", cfg.dist.agreement_tol)?;

    if cfg.iso.rotation_order == 0 {
        return Err(usage("iso.rotation_order must be at least 1".into()));
    }
    if cfg.iso.samples == 0 {
        return Err(usage("iso.samples must be at least 1".into()));
    }
    check_coords("iso.center", &cfg.iso.center)?;
    check_coords("iso.probe", &cfg.iso.probe)?;
    check_positive("iso.cometric_tol", cfg.iso.cometric_tol)?;
    check_positive("iso.radius_bound", cfg.iso.radius_bound)?;
    check_positive("iso.tol_contraction", cfg.iso.tol_contraction)?;
    check_positive("iso.tol_cc", cfg.iso.tol_cc)?;

    check_box("dirichlet.box", &cfg.dirichlet.bounds)?;
    check_box("dirichlet.window", &cfg.dirichlet.window)?;
    check_coords("dirichlet.base_point", &cfg.dirichlet.base_point)?;
    check_positive("dirichlet.enumeration_radius", cfg.dirichlet.enumeration_radius)?;
    if cfg.dirichlet.lattice_range < 1 {
        return Err(usage("dirichlet.lattice_range must be at least 1".into()));
    }
    check_positive("dirichlet.covering_min", cfg.dirichlet.covering_min)?;
    if cfg.dirichlet.covering_min > 1.0 {
        return Err(usage("dirichlet.covering_min cannot exceed 1".into()));
    }
    check_positive("dirichlet.overlap_max", cfg.dirichlet.overlap_max)?;

    if cfg.tile.max_iter == 0 {
        return Err(usage("tile.max_iter must be at least 1".into()));
    }
    check_positive("tile.symdiff_tol_cells", cfg.tile.symdiff_tol_cells)?;
    check_positive("tile.self_similarity_max", cfg.tile.self_similarity_max)?;
    check_positive("tile.measure_tol", cfg.tile.measure_tol)?;
    check_box("tile.tiling_window", &cfg.tile.tiling_window)?;
    if cfg.tile.lattice_range < 1 {
        return Err(usage("tile.lattice_range must be at least 1".into()));
    }
    check_positive("tile.multiplicity_one_min", cfg.tile.multiplicity_one_min)?;
    check_positive("tile.mean_multiplicity_tol", cfg.tile.mean_multiplicity_tol)?;
    let [dlo, dhi] = cfg.tile.decay_band;
    if !(dlo.is_finite() && dhi.is_finite() && 0.0 < dlo && dlo < dhi) {
        return Err(usage(format!(
            "tile.decay_band must satisfy 0 < lo < hi, got [{dlo}, {dhi}]"
        )));
    }

    if cfg.mra.gram_range < 1 {
        return Err(usage("mra.gram_range must be at least 1".into()));
    }
    if cfg.mra.density_levels.is_empty() || cfg.mra.triviality_levels.is_empty() {
        return Err(usage("mra level lists must be nonempty".into()));
    }
    if cfg.mra.test_functions.is_empty() {
        return Err(usage("mra.test_functions must be nonempty".into()));
    }
    check_box("mra.triviality_box", &cfg.mra.triviality_box)?;
    if let Some(w) = &cfg.mra.window {
        check_box("mra.window", w)?;
    }
    let tol = &cfg.mra.tolerances;
    for (name, v) in [
        ("mra.tolerances.refinement", tol.refinement),
        ("mra.tolerances.riesz_deviation", tol.riesz_deviation),
        ("mra.tolerances.off_diagonal", tol.off_diagonal),
        ("mra.tolerances.norm_identity", tol.norm_identity),
        ("mra.tolerances.nesting", tol.nesting),
        ("mra.tolerances.invariance", tol.invariance),
    ] {
        check_positive(name, v)?;
    }
    Ok(())
}

/// SHA-256 of the effective configuration's canonical JSON form, embedded
/// in every report so artifacts can be traced to their exact inputs.
pub fn sha256_hex(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        validate(&RunConfig::default()).unwrap();
    }

    #[test]
    fn resolution_outside_band_is_usage_error() {
        let mut cfg = RunConfig::default();
        cfg.grid.resolution = 16;
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
        cfg.grid.resolution = 513;
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn non_reciprocal_dilation_is_usage_error() {
        let mut cfg = RunConfig::default();
        cfg.t = 0.3;
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn zero_tolerance_is_usage_error() {
        let mut cfg = RunConfig::default();
        cfg.mra.tolerances.refinement = 0.0;
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
        let mut cfg = RunConfig::default();
        cfg.dist.agreement_tol = -0.1;
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn inverted_box_is_usage_error() {
        let mut cfg = RunConfig::default();
        cfg.grid.bounds = Bounds3 { lo: [0.0, 0.0, 1.0], hi: [1.0, 1.0, 0.5] };
        assert!(matches!(validate(&cfg), Err(CliError::Usage(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"grid": {"resolution": 64}, "bogus": 1}"#);
        assert!(err.is_err());
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"seed": 99, "mra": {"tolerances": {"refinement": 0.06}}}"#)
                .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.mra.tolerances.refinement, 0.06);
        // untouched siblings keep their defaults
        assert_eq!(cfg.mra.tolerances.off_diagonal, MraTolerances::default().off_diagonal);
        assert_eq!(cfg.grid.resolution, 128);
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let a = sha256_hex(&RunConfig::default());
        let b = sha256_hex(&RunConfig::default());
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        let mut cfg = RunConfig::default();
        cfg.seed = 18;
        assert_ne!(sha256_hex(&cfg), a);
    }
}
