//! Batch runner behind the `ldgl` binary: TOML configuration, sweeps over
//! `(ε, s or N, h_ex, pad)`, one directory per sweep point and an aggregated
//! CSV/JSON table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    asymptotic_report, compare_interpolation, f2d_decomposition, interpolate_layers,
    slice_energies, theorem2_bundle, vorticity, AsymptoticReport,
};
use crate::construction::{assemble_with, ConstructionOptions};
use crate::domain::{build_domain, m_eps, Domain, Mesh, ModelParams};
use crate::energy::{agl_energy, ld_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::fields::{LayeredConfiguration, C64};
use crate::io::{atomic_write, decode_agl, decode_ld, encode_agl, encode_ld, layer_csv};
use crate::minimize::{
    minimize_agl, minimize_ld, random_agl_state, random_ld_state, MinimizeOptions, StopReason,
};
use crate::potentials::{representation_residual, supercurrent_density, trace_deviation};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ConstructUpperBound,
    MinimizeLd,
    MinimizeAgl,
    CompareLdAgl,
    Diagnostics,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::ConstructUpperBound => "construct-upper-bound",
            Task::MinimizeLd => "minimize-ld",
            Task::MinimizeAgl => "minimize-agl",
            Task::CompareLdAgl => "compare-ld-agl",
            Task::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HexRule {
    /// `h_ex = (ln ε)²`
    LnEpsSquared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SRule {
    /// `s = ε`, i.e. `N = L/ε`
    EqualEpsilon,
}

fn one() -> f64 {
    1.0
}
fn unit_square() -> [f64; 2] {
    [1.0, 1.0]
}
fn pad_default() -> f64 {
    1.5
}
fn grading_default() -> f64 {
    1.25
}
fn two() -> f64 {
    2.0
}
fn planes_default() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    pub n_x: Option<usize>,
    pub n_y: Option<usize>,
    pub n_z: Option<usize>,
    /// nodes per `ε` when `n_x`/`n_y` are not given (2 meets `h ≤ ε/2`)
    #[serde(default = "two")]
    pub nodes_per_eps: f64,
    /// grid planes per interlayer distance when `n_z` is not given
    #[serde(default = "planes_default")]
    pub planes_per_layer: usize,
    #[serde(default = "grading_default")]
    pub grading: f64,
}

impl Default for MeshBlock {
    fn default() -> Self {
        MeshBlock {
            n_x: None,
            n_y: None,
            n_z: None,
            nodes_per_eps: two(),
            planes_per_layer: planes_default(),
            grading: grading_default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub epsilon: Option<f64>,
    pub n_layers: Option<usize>,
    pub s_rule: Option<SRule>,
    #[serde(default = "one")]
    pub height: f64,
    pub h_ex: Option<f64>,
    pub h_ex_rule: Option<HexRule>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "unit_square")]
    pub omega_extent: [f64; 2],
    #[serde(default = "pad_default")]
    pub pad: f64,
    #[serde(default = "one")]
    pub cutoff_d: f64,
    #[serde(default)]
    pub mesh: MeshBlock,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub epsilon: Option<Vec<f64>>,
    pub n_layers: Option<Vec<usize>>,
    pub s: Option<Vec<f64>>,
    pub h_ex: Option<Vec<f64>>,
    pub pad: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    /// seeded random `|u| ∈ [0.5,1)`, random phases, noisy background
    Random,
    /// `u ≡ 0`, background potential
    Normal,
    /// `u ≡ 1`, background potential
    Superconducting,
    /// the assembled vortex-lattice test configuration
    Construction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitBlock {
    pub kind: InitKind,
    pub noise: f64,
}

impl Default for InitBlock {
    fn default() -> Self {
        InitBlock {
            kind: InitKind::Random,
            noise: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareBlock {
    /// `C` in the hypothesis `s ≤ C·ε`
    pub s_over_eps_max: f64,
    /// also minimize AGL from the interpolated warm start
    pub minimize_agl: bool,
}

impl Default for CompareBlock {
    fn default() -> Self {
        CompareBlock {
            s_over_eps_max: 1.0,
            minimize_agl: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema")]
    pub schema_version: u32,
    pub task: Option<Task>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<String>,
    /// require `h_ex ≥ |ln ε|` at every point
    #[serde(default)]
    pub mixed_regime: bool,
    #[serde(default)]
    pub dump_fields: bool,
    pub model: ModelBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub init: InitBlock,
    #[serde(default)]
    pub minimize: MinimizeOptions,
    #[serde(default)]
    pub construction: ConstructionOptions,
    #[serde(default)]
    pub compare: CompareBlock,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// One resolved sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub seed: u64,
    pub params: ModelParams,
}

fn axis<T: Clone>(name: &str, values: &Option<Vec<T>>, base: Option<T>) -> Result<Vec<Option<T>>> {
    match values {
        Some(v) if v.is_empty() => Err(Error::Config(format!("sweep axis `{name}` is empty"))),
        Some(v) => Ok(v.iter().cloned().map(Some).collect()),
        None => Ok(vec![base]),
    }
}

fn n_from_s(height: f64, s: f64, what: &str) -> Result<usize> {
    let n = (height / s).round();
    if !(s > 0.0) || n < 1.0 || (n * s - height).abs() > 1e-9 * height {
        return Err(Error::Config(format!(
            "{what}: s = {s} does not divide L = {height}"
        )));
    }
    Ok(n as usize)
}

/// Expands the sweep and checks every point; errors name the violated rule.
pub fn sweep_points(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    let m = &cfg.model;
    let sw = &cfg.sweep;
    if sw.s.is_some() && sw.n_layers.is_some() {
        return Err(Error::Config(
            "sweep over either `s` or `n_layers`, not both".into(),
        ));
    }
    let eps_axis = axis("epsilon", &sw.epsilon, m.epsilon)?;
    let layer_axis: Vec<Option<f64>> = if sw.s.is_some() {
        axis("s", &sw.s, None)?
    } else {
        axis("n_layers", &sw.n_layers, m.n_layers)?
            .into_iter()
            .map(|n| n.map(|n| m.height / n as f64))
            .collect()
    };
    let h_axis = axis("h_ex", &sw.h_ex, m.h_ex)?;
    let pad_axis = axis("pad", &sw.pad, Some(m.pad))?;
    let mut out = Vec::new();
    for eps in &eps_axis {
        let eps = eps.ok_or_else(|| Error::Config("model.epsilon is missing".into()))?;
        for s in &layer_axis {
            let n_layers = match (s, m.s_rule) {
                (_, Some(SRule::EqualEpsilon)) => {
                    n_from_s(m.height, eps, "s_rule = equal_epsilon")?
                }
                (Some(s), None) => n_from_s(m.height, *s, "sweep.s")?,
                (None, None) => {
                    return Err(Error::Config(
                        "model.n_layers (or s_rule) is missing".into(),
                    ))
                }
            };
            for h in &h_axis {
                let h_ex = match (h, m.h_ex_rule) {
                    (_, Some(HexRule::LnEpsSquared)) => eps.ln().powi(2),
                    (Some(h), None) => *h,
                    (None, None) => {
                        return Err(Error::Config("model.h_ex (or h_ex_rule) is missing".into()))
                    }
                };
                for pad in &pad_axis {
                    let pad = pad.unwrap_or(m.pad);
                    let index = out.len();
                    let params = point_params(cfg, eps, n_layers, h_ex, pad).map_err(|e| {
                        let msg = match e {
                            Error::Config(m) => m,
                            other => other.to_string(),
                        };
                        Error::Config(format!("sweep point {index}: {msg}"))
                    })?;
                    out.push(SweepPoint {
                        index,
                        seed: cfg.seed.wrapping_add(index as u64),
                        params,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn point_params(
    cfg: &ExperimentConfig,
    eps: f64,
    n_layers: usize,
    h_ex: f64,
    pad: f64,
) -> Result<ModelParams> {
    let m = &cfg.model;
    let mb = &m.mesh;
    let nodes = |w: f64| (mb.nodes_per_eps * w / eps - 1e-9).ceil() as usize + 1;
    let mesh = Mesh {
        n_x: mb.n_x.unwrap_or_else(|| nodes(m.omega_extent[0])),
        n_y: mb.n_y.unwrap_or_else(|| nodes(m.omega_extent[1])),
        n_z: mb.n_z.unwrap_or(n_layers * mb.planes_per_layer + 1),
        grading: mb.grading,
    };
    let p = ModelParams {
        epsilon: eps,
        s: m.height / n_layers as f64,
        n_layers,
        height: m.height,
        lambda: m.lambda,
        h_ex,
        omega_extent: m.omega_extent,
        pad,
        cutoff_d: m.cutoff_d,
        mesh,
    };
    p.validate()?;
    p.check_resolution()?;
    let q = eps * h_ex.sqrt();
    if !(h_ex > 0.0 && q < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < eps*sqrt(h_ex) < 1 for M_eps, got eps = {eps}, h_ex = {h_ex}"
        )));
    }
    if cfg.mixed_regime && h_ex < eps.ln().abs() {
        return Err(Error::Config(format!(
            "mixed regime requires h_ex >= |ln eps| = {}, got {h_ex}",
            eps.ln().abs()
        )));
    }
    Ok(p)
}

/// Checks everything that can be checked before running.
pub fn validate(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.minimize
        .validate()
        .map_err(|e| Error::Config(format!("minimize: {e}")))?;
    if !(cfg.compare.s_over_eps_max > 0.0) {
        return Err(Error::Config("compare.s_over_eps_max must be > 0".into()));
    }
    sweep_points(cfg)
}

// ---------------------------------------------------------------------------
// results

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    Failed,
    Skipped,
}

impl PointStatus {
    fn name(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Failed => "failed",
            PointStatus::Skipped => "skipped",
        }
    }
}

/// One aggregated table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub point: usize,
    pub status: PointStatus,
    pub reason: Option<String>,
    pub epsilon: f64,
    pub s: f64,
    pub n_layers: usize,
    pub h_ex: f64,
    pub pad: f64,
    pub m_eps: f64,
    pub asymptotic: Option<AsymptoticReport>,
    pub construction_total: Option<f64>,
    pub construction_ratio: Option<f64>,
    pub c_required: Option<f64>,
    pub ld_total: Option<f64>,
    pub agl_warm_total: Option<f64>,
    pub agl_min_total: Option<f64>,
    pub gap: Option<f64>,
    pub gap_trapezoid: Option<f64>,
    pub gap_ratio: Option<f64>,
    pub comparison_bound: Option<f64>,
    pub comparison_holds: Option<bool>,
    pub iterations: Option<usize>,
    pub stop_reason: Option<StopReason>,
}

impl ReportRow {
    fn new(p: &SweepPoint) -> Self {
        let prm = &p.params;
        ReportRow {
            point: p.index,
            status: PointStatus::Ok,
            reason: None,
            epsilon: prm.epsilon,
            s: prm.s,
            n_layers: prm.n_layers,
            h_ex: prm.h_ex,
            pad: prm.pad,
            m_eps: m_eps(prm.volume_d(), prm.epsilon, prm.h_ex).unwrap_or(f64::NAN),
            asymptotic: None,
            construction_total: None,
            construction_ratio: None,
            c_required: None,
            ld_total: None,
            agl_warm_total: None,
            agl_min_total: None,
            gap: None,
            gap_trapezoid: None,
            gap_ratio: None,
            comparison_bound: None,
            comparison_holds: None,
            iterations: None,
            stop_reason: None,
        }
    }

    pub fn csv_header() -> String {
        let a: Vec<String> = AsymptoticReport::CSV_HEADER
            .split(',')
            .skip(6)
            .map(|c| format!("a_{c}"))
            .collect();
        format!(
            "point,status,reason,epsilon,s,n_layers,h_ex,pad,m_eps,{},construction_total,construction_ratio,c_required,ld_total,agl_warm_total,agl_min_total,gap,gap_trapezoid,gap_ratio,comparison_bound,comparison_holds,iterations,stop_reason",
            a.join(",")
        )
    }

    pub fn csv_row(&self) -> String {
        let f = |x: f64| format!("{x:e}");
        let o = |x: Option<f64>| x.map(f).unwrap_or_default();
        let mut v = vec![
            self.point.to_string(),
            self.status.name().to_string(),
            self.reason
                .clone()
                .unwrap_or_default()
                .replace([',', '\n'], ";"),
            f(self.epsilon),
            f(self.s),
            self.n_layers.to_string(),
            f(self.h_ex),
            f(self.pad),
            f(self.m_eps),
        ];
        let n_asym = AsymptoticReport::CSV_HEADER.split(',').count() - 6;
        match &self.asymptotic {
            Some(a) => v.extend(a.csv_row().split(',').skip(6).map(String::from)),
            None => v.extend(std::iter::repeat(String::new()).take(n_asym)),
        }
        v.extend([
            o(self.construction_total),
            o(self.construction_ratio),
            o(self.c_required),
            o(self.ld_total),
            o(self.agl_warm_total),
            o(self.agl_min_total),
            o(self.gap),
            o(self.gap_trapezoid),
            o(self.gap_ratio),
            o(self.comparison_bound),
            self.comparison_holds
                .map(|b| b.to_string())
                .unwrap_or_default(),
            self.iterations.map(|i| i.to_string()).unwrap_or_default(),
            self.stop_reason
                .map(|r| {
                    serde_json::to_value(r)
                        .unwrap()
                        .as_str()
                        .unwrap()
                        .to_string()
                })
                .unwrap_or_default(),
        ]);
        v.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub task: Task,
    pub seed: u64,
    pub n_points: usize,
    pub n_ok: usize,
    pub n_failed: usize,
    pub n_skipped: usize,
    pub rows: Vec<ReportRow>,
}

impl RunSummary {
    /// Rows of non-skipped points.
    pub fn csv(&self) -> String {
        let mut s = ReportRow::csv_header();
        s.push('\n');
        for r in self
            .rows
            .iter()
            .filter(|r| r.status != PointStatus::Skipped)
        {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn point_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("point_{index:03}"))
}

#[derive(Serialize, Deserialize)]
struct PointEcho {
    schema_version: u32,
    task: Task,
    point: SweepPoint,
}

// ---------------------------------------------------------------------------
// per-point work

fn initial_ld(
    cfg: &ExperimentConfig,
    dom: &Domain,
    p: &SweepPoint,
) -> Result<LayeredConfiguration> {
    if let Some(path) = &cfg.minimize.warm_start {
        let st = decode_ld(&fs::read(path)?)?;
        st.check(dom)?;
        return Ok(st);
    }
    let h = p.params.h_ex;
    Ok(match cfg.init.kind {
        InitKind::Random => random_ld_state(dom, p.seed, cfg.init.noise),
        InitKind::Normal => LayeredConfiguration::normal_state(dom),
        InitKind::Superconducting => LayeredConfiguration {
            layers: crate::fields::LayerStack::constant(dom, C64::new(1.0, 0.0)),
            pot: crate::fields::Potential3D::background(dom, h),
        },
        InitKind::Construction => {
            let mut opts = cfg.construction.clone();
            opts.assemble = true;
            assemble_with(&p.params, p.params.cutoff_d, &opts)?
                .config
                .ok_or_else(|| Error::Argument("construction produced no configuration".into()))?
        }
    })
}

fn dump_ld(dir: &Path, name: &str, dom: &Domain, st: &LayeredConfiguration) -> Result<()> {
    atomic_write(&dir.join(format!("{name}.ldf")), &encode_ld(st)?)?;
    let g = dom.omega_plane();
    atomic_write(
        &dir.join(format!("{name}_layer0.csv")),
        layer_csv(&g.xs, &g.ys, &st.layers.u[0]).as_bytes(),
    )
}

fn run_point(cfg: &ExperimentConfig, task: Task, p: &SweepPoint, dir: &Path) -> Result<ReportRow> {
    fs::create_dir_all(dir)?;
    write_json(
        &dir.join("point.json"),
        &PointEcho {
            schema_version: SCHEMA_VERSION,
            task,
            point: p.clone(),
        },
    )?;
    let mut row = ReportRow::new(p);
    let dom = build_domain(&p.params)?;
    let mut opts = cfg.minimize.clone();
    opts.seed = p.seed;
    match task {
        Task::ConstructUpperBound => {
            let mut copts = cfg.construction.clone();
            copts.assemble = true;
            let rep = assemble_with(&p.params, p.params.cutoff_d, &copts)?;
            write_json(&dir.join("construction.json"), &rep)?;
            row.construction_total = Some(rep.total);
            row.construction_ratio = rep.ratio;
            row.c_required = rep.c_required;
            if let Some(st) = &rep.config {
                let b = ld_energy(&dom, st)?;
                write_json(&dir.join("breakdown.json"), &b)?;
                row.ld_total = Some(b.total);
                row.asymptotic = Some(asymptotic_report(&dom, st)?);
                if cfg.dump_fields {
                    dump_ld(dir, "state", &dom, st)?;
                }
            }
        }
        Task::MinimizeLd | Task::Diagnostics => {
            let init = initial_ld(cfg, &dom, p)?;
            let (st, trace) = minimize_ld(&dom, &init, &opts)?;
            atomic_write(&dir.join("trace.csv"), trace.csv().as_bytes())?;
            write_json(&dir.join("breakdown.json"), &trace.breakdown)?;
            row.ld_total = Some(trace.breakdown.total);
            row.iterations = Some(trace.iterations);
            row.stop_reason = Some(trace.stop_reason);
            row.asymptotic = Some(asymptotic_report(&dom, &st)?);
            if task == Task::Diagnostics {
                write_json(&dir.join("diagnostics.json"), &diagnostics(&dom, &st)?)?;
            }
            if cfg.dump_fields {
                dump_ld(dir, "state", &dom, &st)?;
            }
        }
        Task::MinimizeAgl => {
            let init = match &cfg.minimize.warm_start {
                Some(path) => decode_agl(&fs::read(path)?)?,
                None => match cfg.init.kind {
                    InitKind::Random => random_agl_state(&dom, p.seed, cfg.init.noise),
                    _ => interpolate_layers(&dom, &initial_ld(cfg, &dom, p)?)?,
                },
            };
            let (st, trace) = minimize_agl(&dom, &init, &opts)?;
            atomic_write(&dir.join("trace.csv"), trace.csv().as_bytes())?;
            write_json(&dir.join("breakdown.json"), &trace.breakdown)?;
            row.agl_min_total = Some(trace.breakdown.total);
            row.iterations = Some(trace.iterations);
            row.stop_reason = Some(trace.stop_reason);
            let sl = slice_energies(&dom, &st)?;
            write_json(&dir.join("slices.json"), &sl)?;
            if cfg.dump_fields {
                atomic_write(&dir.join("state_agl.ldf"), &encode_agl(&st)?)?;
            }
        }
        Task::CompareLdAgl => {
            let prm = &p.params;
            if prm.s > cfg.compare.s_over_eps_max * prm.epsilon * (1.0 + 1e-12) {
                row.status = PointStatus::Skipped;
                row.reason = Some(format!(
                    "hypothesis s <= C*eps violated: s = {}, C*eps = {}",
                    prm.s,
                    cfg.compare.s_over_eps_max * prm.epsilon
                ));
                write_json(&dir.join("row.json"), &row)?;
                return Ok(row);
            }
            let init = initial_ld(cfg, &dom, p)?;
            let (st, trace) = minimize_ld(&dom, &init, &opts)?;
            atomic_write(&dir.join("trace.csv"), trace.csv().as_bytes())?;
            write_json(&dir.join("breakdown.json"), &trace.breakdown)?;
            let cmp = compare_interpolation(&dom, &st)?;
            write_json(&dir.join("comparison.json"), &cmp)?;
            row.iterations = Some(trace.iterations);
            row.stop_reason = Some(trace.stop_reason);
            row.ld_total = Some(cmp.ld.total);
            row.agl_warm_total = Some(cmp.agl.total);
            row.gap = Some(cmp.gap);
            row.gap_trapezoid = Some(cmp.gap_trapezoid);
            row.gap_ratio = Some(cmp.gap.abs() / row.m_eps);
            row.comparison_bound = Some(cmp.bound);
            row.comparison_holds = Some(cmp.holds);
            let mut asym = asymptotic_report(&dom, &st)?;
            asym.agl_ld_gap_ratio = row.gap_ratio;
            row.asymptotic = Some(asym);
            if cfg.compare.minimize_agl {
                let warm = interpolate_layers(&dom, &st)?;
                let (agl, atrace) = minimize_agl(&dom, &warm, &opts)?;
                atomic_write(&dir.join("trace_agl.csv"), atrace.csv().as_bytes())?;
                row.agl_min_total = Some(atrace.breakdown.total);
                if cfg.dump_fields {
                    atomic_write(&dir.join("state_agl.ldf"), &encode_agl(&agl)?)?;
                }
            }
            if cfg.dump_fields {
                dump_ld(dir, "state", &dom, &st)?;
            }
        }
    }
    write_json(&dir.join("row.json"), &row)?;
    Ok(row)
}

/// Diagnostics of an LD state; potentials-related values under
/// `"potentials"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub breakdown: EnergyBreakdown,
    pub bundle: f64,
    pub circulation: Vec<f64>,
    pub f2d_per_layer: Vec<f64>,
    pub f2d_weighted_sum: f64,
    pub slice_integral: f64,
    pub agl_of_interpolation: EnergyBreakdown,
    pub potentials: PotentialDiagnostics,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialDiagnostics {
    pub representation_residual: Vec<f64>,
    pub trace_deviation: f64,
    pub density_l2: Vec<[f64; 2]>,
}

pub fn diagnostics(dom: &Domain, st: &LayeredConfiguration) -> Result<Diagnostics> {
    let b = ld_energy(dom, st)?;
    let v = vorticity(dom, st)?;
    let f2d = f2d_decomposition(dom, st)?;
    let interp = interpolate_layers(dom, st)?;
    let dens = supercurrent_density(dom, st)?;
    let l2 = |f: &[f64]| {
        let mut a = 0.0;
        for j in 0..dom.ny {
            for i in 0..dom.nx {
                a += dom.wx[i] * dom.wy[j] * f[j * dom.nx + i].powi(2);
            }
        }
        a.sqrt()
    };
    Ok(Diagnostics {
        breakdown: b,
        bundle: theorem2_bundle(&b),
        circulation: v.circulation,
        f2d_per_layer: f2d.per_layer,
        f2d_weighted_sum: f2d.weighted_sum,
        slice_integral: slice_energies(dom, &interp)?.integral,
        agl_of_interpolation: agl_energy(dom, &interp)?,
        potentials: PotentialDiagnostics {
            representation_residual: representation_residual(dom, st)?,
            trace_deviation: trace_deviation(dom, st)?,
            density_l2: dens
                .h1
                .iter()
                .zip(&dens.h2)
                .map(|(a, b)| [l2(a), l2(b)])
                .collect(),
        },
    })
}

// ---------------------------------------------------------------------------
// orchestration

fn check_writable(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("output directory {}: {e}", out.display())))?;
    let probe = out.join(".write_probe");
    fs::write(&probe, b"")
        .and_then(|_| fs::remove_file(&probe))
        .map_err(|e| {
            Error::Config(format!(
                "output directory {} is not writable: {e}",
                out.display()
            ))
        })
}

/// Runs every sweep point on a pool of `workers` threads. Config errors are
/// returned as `Error::Config`; failures of single points are recorded in
/// their rows.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<RunSummary> {
    let task = cfg
        .task
        .ok_or_else(|| Error::Config("no task given".into()))?;
    let points = validate(cfg)?;
    check_writable(out)?;
    atomic_write(&out.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let rows: Vec<ReportRow> = pool.install(|| {
        use rayon::prelude::*;
        points
            .par_iter()
            .map(|p| {
                let dir = point_dir(out, p.index);
                run_point(cfg, task, p, &dir).unwrap_or_else(|e| {
                    let mut r = ReportRow::new(p);
                    r.status = PointStatus::Failed;
                    r.reason = Some(e.to_string());
                    let _ = write_json(&dir.join("row.json"), &r);
                    r
                })
            })
            .collect()
    });
    let count = |s| rows.iter().filter(|r| r.status == s).count();
    let summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        task,
        seed: cfg.seed,
        n_points: rows.len(),
        n_ok: count(PointStatus::Ok),
        n_failed: count(PointStatus::Failed),
        n_skipped: count(PointStatus::Skipped),
        rows,
    };
    write_json(&out.join("summary.json"), &summary)?;
    atomic_write(&out.join("report.csv"), summary.csv().as_bytes())?;
    Ok(summary)
}

/// Loads the summaries of several run directories and writes one table.
pub fn aggregate_reports(runs: &[PathBuf], out: &Path) -> Result<usize> {
    let mut csv = format!("run,{}\n", ReportRow::csv_header());
    let mut all: BTreeMap<String, RunSummary> = BTreeMap::new();
    let mut n = 0;
    for r in runs {
        let s: RunSummary = read_json(&r.join("summary.json"))?;
        let name = r.display().to_string();
        for row in s.rows.iter().filter(|x| x.status != PointStatus::Skipped) {
            csv.push_str(&format!("{},{}\n", name.replace(',', ";"), row.csv_row()));
            n += 1;
        }
        all.insert(name, s);
    }
    fs::create_dir_all(out)?;
    atomic_write(&out.join("report.csv"), csv.as_bytes())?;
    write_json(
        &out.join("report.json"),
        &serde_json::json!({ "schema_version": SCHEMA_VERSION, "runs": all }),
    )?;
    Ok(n)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0) || (a.is_nan() && b.is_nan())
}

fn compare_json(path: &str, a: &serde_json::Value, b: &serde_json::Value, out: &mut Vec<String>) {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            if !close(x, y) {
                out.push(format!("{path}: stored {x:e}, recomputed {y:e}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, v) in x {
                match y.get(k) {
                    Some(w) => compare_json(&format!("{path}.{k}"), v, w, out),
                    None => out.push(format!("{path}.{k}: missing after recompute")),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (v, w)) in x.iter().zip(y).enumerate() {
                compare_json(&format!("{path}[{i}]"), v, w, out);
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: stored {a}, recomputed {b}")),
    }
}

/// Recomputes the stored scalars of a run directory. Points with a dumped
/// LD state are re-evaluated from the fields; the others are re-run from the
/// echoed configuration.
pub fn verify_run(run: &Path) -> Result<VerifyReport> {
    let summary: RunSummary = read_json(&run.join("summary.json"))?;
    let cfg = ExperimentConfig::from_toml(&fs::read_to_string(run.join("config.toml"))?)?;
    let mut rep = VerifyReport::default();
    for row in &summary.rows {
        let dir = point_dir(run, row.point);
        let stored: ReportRow = read_json(&dir.join("row.json"))?;
        if stored != *row {
            rep.mismatches.push(format!(
                "point {}: row.json differs from summary",
                row.point
            ));
        }
        if row.status != PointStatus::Ok {
            continue;
        }
        let echo: PointEcho = read_json(&dir.join("point.json"))?;
        let dom = build_domain(&echo.point.params)?;
        let state = dir.join("state.ldf");
        let fresh = if state.exists() && summary.task != Task::MinimizeAgl {
            let st = decode_ld(&fs::read(&state)?)?;
            let b = ld_energy(&dom, &st)?;
            let stored_b: EnergyBreakdown = read_json(&dir.join("breakdown.json"))?;
            if summary.task != Task::MinimizeAgl {
                compare_json(
                    &format!("point {} breakdown", row.point),
                    &serde_json::to_value(stored_b)?,
                    &serde_json::to_value(b)?,
                    &mut rep.mismatches,
                );
            }
            let mut r = row.clone();
            let mut a = asymptotic_report(&dom, &st)?;
            if let Some(old) = &row.asymptotic {
                a.agl_ld_gap_ratio = old.agl_ld_gap_ratio;
            }
            r.asymptotic = Some(a);
            r
        } else {
            let tmp = tempdir_in(run)?;
            let r = run_point(&cfg, summary.task, &echo.point, &tmp);
            let _ = fs::remove_dir_all(&tmp);
            r?
        };
        compare_json(
            &format!("point {}", row.point),
            &serde_json::to_value(row)?,
            &serde_json::to_value(&fresh)?,
            &mut rep.mismatches,
        );
        rep.checked += 1;
    }
    Ok(rep)
}

fn tempdir_in(run: &Path) -> Result<PathBuf> {
    for i in 0.. {
        let p = run.join(format!(".verify_{i}"));
        if !p.exists() {
            fs::create_dir_all(&p)?;
            return Ok(p);
        }
    }
    unreachable!()
}
