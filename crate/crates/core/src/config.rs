//! Run configuration: a TOML file with sections `domain`, `grid`, `time`, `g`,
//! `initial`, `checks` and `output`. Every key has a default, so an empty file
//! is a valid configuration; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::grid::VelocityGrid;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Slab,
    Disk,
}

impl DomainKind {
    pub fn name(self) -> &'static str {
        match self {
            DomainKind::Slab => "slab",
            DomainKind::Disk => "disk",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    /// Slab width.
    pub length: f64,
    /// Disk radius.
    pub radius: f64,
    /// Slab: cells along `x₁`; disk: cells per side of the bounding square.
    pub cells: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            kind: DomainKind::Slab,
            length: 1.0,
            radius: 1.0,
            cells: 16,
        }
    }
}

impl DomainSection {
    pub fn domain(&self) -> Domain {
        match self.kind {
            DomainKind::Slab => Domain::Slab {
                length: self.length,
                cells: self.cells,
            },
            DomainKind::Disk => Domain::Disk {
                radius: self.radius,
                cells: self.cells,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_per_axis: usize,
    pub v_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_per_axis: 16,
            v_max: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    /// Relative residual for the implicit collision solve.
    pub solver_tol: f64,
    /// `false` switches the collision step off (free transport).
    pub collisions: bool,
    /// Restore the conserved moments after each transport half step by adding
    /// the smallest correction in the span of the conserved modes.
    pub moment_fix: bool,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            dt: 0.02,
            t_end: 1.0,
            solver_tol: 1e-10,
            collisions: true,
            moment_fix: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GKind {
    Zero,
    /// `g(x, v) = ε (1+|v|)^{-m-1} s(x)` with a fixed smooth `|s| ≤ 1`.
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GSection {
    pub kind: GKind,
    pub epsilon: f64,
    pub m: f64,
}

impl Default for GSection {
    fn default() -> Self {
        Self {
            kind: GKind::Zero,
            epsilon: 0.01,
            m: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Low spatial modes times polynomial-times-`√μ` velocity profiles.
    Random,
    /// `(I - P)` of a random field.
    Microscopic,
    /// `P` of a random field.
    Macroscopic,
    /// Spatially uniform, even in `v₁` (steady under transport in the slab).
    XIndependent,
    /// Disk only: the rigid rotation plus `noise` times a random field.
    Rotation,
    Zero,
}

impl InitialKind {
    pub fn name(self) -> &'static str {
        match self {
            InitialKind::Random => "random",
            InitialKind::Microscopic => "microscopic",
            InitialKind::Macroscopic => "macroscopic",
            InitialKind::XIndependent => "x_independent",
            InitialKind::Rotation => "rotation",
            InitialKind::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// Target `‖f₀‖²_{2,θ}` with `θ = scale_theta`.
    pub energy: f64,
    pub scale_theta: f64,
    pub remove_conserved: bool,
    /// Relative size of the random part for `kind = "rotation"`.
    pub noise: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            kind: InitialKind::Random,
            energy: 1.0,
            scale_theta: 0.0,
            remove_conserved: true,
            noise: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSection {
    /// Velocity weights `θ` tracked in the ledger.
    pub theta: Vec<f64>,
    /// Exponents of the polynomial decay envelope.
    pub k_list: Vec<u32>,
    /// Weights `l` of the Grönwall checks.
    pub l_list: Vec<f64>,
    pub positivity_samples: usize,
    pub null_space_sizes: Vec<usize>,
    pub positivity_sizes: Vec<usize>,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            theta: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
            k_list: vec![1, 2],
            l_list: vec![-1.0, -0.5],
            positivity_samples: 100,
            null_space_sizes: vec![8, 16],
            positivity_sizes: vec![16, 24],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotPolicy {
    None,
    Ends,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Ledger rows (and snapshots under `snapshots = "all"`) every this many steps.
    pub snapshot_stride: usize,
    pub snapshots: SnapshotPolicy,
    /// Also write `(a, b, c)` per cell next to each snapshot.
    pub macro_fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            snapshot_stride: 1,
            snapshots: SnapshotPolicy::Ends,
            macro_fields: false,
        }
    }
}

/// Validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub seed: u64,
    pub domain: DomainSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub g: GSection,
    pub initial: InitialSection,
    pub checks: ChecksSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION.to_string(),
            seed: 0,
            domain: DomainSection::default(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            g: GSection::default(),
            initial: InitialSection::default(),
            checks: ChecksSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn fail(key: &str, message: impl Into<String>) -> Error {
    Error::config(key, None, message)
}

impl RunConfig {
    pub fn domain(&self) -> Domain {
        self.domain.domain()
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        VelocityGrid::new(self.grid.n_per_axis, self.grid.v_max)
    }

    /// Number of time steps, `t_end / dt`.
    pub fn steps(&self) -> usize {
        (self.time.t_end / self.time.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(fail("version", format!("unsupported schema version {:?}, expected {SCHEMA_VERSION:?}", self.version)));
        }
        if self.seed > i64::MAX as u64 {
            return Err(fail("seed", format!("must be at most {}, got {}", i64::MAX, self.seed)));
        }
        let d = &self.domain;
        let size = match d.kind {
            DomainKind::Slab => ("domain.length", d.length),
            DomainKind::Disk => ("domain.radius", d.radius),
        };
        if !(size.1.is_finite() && size.1 > 0.0) {
            return Err(fail(size.0, format!("must be positive, got {}", size.1)));
        }
        if d.cells < 2 {
            return Err(fail("domain.cells", format!("must be at least 2, got {}", d.cells)));
        }
        if self.grid.n_per_axis < 4 {
            return Err(fail("grid.n_per_axis", format!("must be at least 4, got {}", self.grid.n_per_axis)));
        }
        if !(self.grid.v_max.is_finite() && self.grid.v_max > 0.0) {
            return Err(fail("grid.v_max", format!("must be positive, got {}", self.grid.v_max)));
        }
        let t = &self.time;
        if !(t.dt.is_finite() && t.dt > 0.0) {
            return Err(fail("time.dt", format!("must be positive, got {}", t.dt)));
        }
        if !(t.t_end.is_finite() && (t.t_end == 0.0 || t.t_end >= t.dt)) {
            return Err(fail("time.t_end", format!("must be 0 or at least time.dt, got {}", t.t_end)));
        }
        let steps = (t.t_end / t.dt).round();
        if (steps * t.dt - t.t_end).abs() > 1e-9 * t.t_end.max(t.dt) {
            return Err(fail("time.t_end", format!("{} is not a whole number of steps of {}", t.t_end, t.dt)));
        }
        if !(t.solver_tol > 0.0 && t.solver_tol <= 1e-4) {
            return Err(fail("time.solver_tol", format!("must lie in (0, 1e-4], got {}", t.solver_tol)));
        }
        if !(self.g.epsilon.is_finite() && self.g.epsilon >= 0.0) {
            return Err(fail("g.epsilon", format!("must be nonnegative, got {}", self.g.epsilon)));
        }
        if !(self.g.m.is_finite() && self.g.m > 1.5) {
            return Err(fail("g.m", format!("must exceed 3/2, got {}", self.g.m)));
        }
        let i = &self.initial;
        if !(i.energy.is_finite() && i.energy >= 0.0) {
            return Err(fail("initial.energy", format!("must be nonnegative, got {}", i.energy)));
        }
        if !i.scale_theta.is_finite() {
            return Err(fail("initial.scale_theta", "must be finite"));
        }
        if !(i.noise.is_finite() && i.noise >= 0.0) {
            return Err(fail("initial.noise", format!("must be nonnegative, got {}", i.noise)));
        }
        if i.kind == InitialKind::Rotation && d.kind != DomainKind::Disk {
            return Err(fail("initial.kind", "the rotation mode exists only in the disk"));
        }
        let c = &self.checks;
        if c.theta.is_empty() || c.theta.iter().any(|x| !x.is_finite()) {
            return Err(fail("checks.theta", "must be a nonempty list of finite weights"));
        }
        if c.theta.windows(2).any(|w| w[0] >= w[1]) {
            return Err(fail("checks.theta", "must be strictly increasing"));
        }
        if c.l_list.iter().any(|l| !(-1.0..=0.0).contains(l)) {
            return Err(fail("checks.l_list", "weights must lie in [-1, 0]"));
        }
        if c.k_list.iter().any(|&k| k == 0) {
            return Err(fail("checks.k_list", "exponents must be positive"));
        }
        if c.positivity_samples < 10 {
            return Err(fail("checks.positivity_samples", "needs at least 10 samples"));
        }
        if self.output.snapshot_stride == 0 {
            return Err(fail("output.snapshot_stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

/// 1-based line holding `key` inside `[section]` (or at top level).
fn find_key_line(text: &str, path: &str) -> Option<usize> {
    let (section, key) = match path.rsplit_once('.') {
        Some((s, k)) => (s, k),
        None => ("", path),
    };
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn section_at_line(text: &str, line: usize) -> String {
    let mut current = String::new();
    for l in text.lines().take(line) {
        if let Some(rest) = l.trim().strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
        }
    }
    current
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text.as_bytes()[..s.start.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1);
        let section = line.map(|l| section_at_line(text, l)).unwrap_or_default();
        let message = e.message().to_string();
        let field = message
            .split('`')
            .nth(1)
            .filter(|_| message.starts_with("unknown field") || message.starts_with("missing field"))
            .map(str::to_string);
        let key = match (section.is_empty(), field) {
            (true, Some(f)) => f,
            (false, Some(f)) => format!("{section}.{f}"),
            (true, None) => "<root>".to_string(),
            (false, None) => section,
        };
        Error::Config { key, line, message }
    })?;
    config.validate().map_err(|e| match e {
        Error::Config { key, message, .. } => Error::Config {
            line: find_key_line(text, &key),
            key,
            message,
        },
        other => other,
    })?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn negative_dt_names_key_and_line() {
        let text = "seed = 3\n\n[time]\nt_end = 1.0\ndt = -1\n";
        match parse_config_str(text).unwrap_err() {
            Error::Config { key, line, message } => {
                assert_eq!(key, "time.dt");
                assert_eq!(line, Some(5));
                assert!(message.contains("positive"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let text = "[grid]\nn_per_axis = 8\nvmax = 3.0\n";
        match parse_config_str(text).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key, "grid.vmax");
                assert_eq!(line, Some(3));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn round_trip_is_identical() {
        let mut c = RunConfig::default();
        c.domain.kind = DomainKind::Disk;
        c.time.dt = 0.05;
        c.time.t_end = 10.0;
        c.g.kind = GKind::Profile;
        c.initial.kind = InitialKind::Rotation;
        c.checks.theta = vec![0.0, 0.1 + 0.2];
        let text = c.to_toml();
        let back = parse_config_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn t_end_must_be_whole_steps() {
        let err = parse_config_str("[time]\ndt = 0.3\nt_end = 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "time.t_end"), "{err}");
        assert_eq!(parse_config_str("[time]\ndt = 0.1\nt_end = 0\n").unwrap().steps(), 0);
    }

    #[test]
    fn rotation_requires_disk() {
        assert!(parse_config_str("[initial]\nkind = \"rotation\"\n").is_err());
        assert!(parse_config_str("[domain]\nkind = \"disk\"\n[initial]\nkind = \"rotation\"\n").is_ok());
    }
}
