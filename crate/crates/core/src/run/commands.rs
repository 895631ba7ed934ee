use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::expr::Expr;
use crate::gauge::{
    boundary_residual, curve_forward_sweep, depth_null_generator, fixed_theta_sweep, flat_forward_sweep, gauge_fixed_theta, gauge_forward_constant,
    gauge_forward_curve, gauge_forward_general, potential_from_null_general, potentials_from_null_constant, GaugeError, GaugeReport, GaugeSetting,
    PotentialOptions,
};
use crate::geometry::{Box2, Box3};
use crate::inversion::{invert_2d_constant, invert_2d_variable, invert_curve, invert_fixed_theta, DataSource, InversionError, LineIntegrals, Method, Recon1D};
use crate::scene::{Field, FlatContent, HyperContent, HyperplaneScene, Profile, Scene, VectorField2, DEFAULT_LATTICE, EPS_COND};
use crate::transform::{
    analytic_derivatives, hwt_curve, hwt_curve_reduced, hwt_fixed_theta, hwt_fixed_theta_geometric, hwt_flat2d, hwt_flat2d_reduced, sweep, Axis, DataGrid,
    Forward, TransformError,
};

use super::config::{GaugeConfig, GaugeKind, MethodChoice, Mode, RunConfig};
use super::{RunError, RunOptions};

/// Step of the callback finite differences used by `verify`.
const FD_STEP: f64 = 1e-4;
/// Bound on |FD − analytic| for callback derivatives.
const IDENTITY_TOL: f64 = 1e-6;

macro_rules! say {
    ($w:expr, $($t:tt)*) => {
        writeln!($w, $($t)*).map_err(io)?
    };
}

fn io(e: std::io::Error) -> RunError {
    RunError::Io(e.to_string())
}

fn cfg_err(key: &str, message: impl Into<String>) -> RunError {
    RunError::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn from_transform(e: TransformError) -> RunError {
    match e {
        TransformError::Grid(m) => cfg_err("grid", m),
        TransformError::Io(m) => RunError::Io(m),
        other => RunError::Numerical(other.to_string()),
    }
}

fn from_inversion(e: InversionError) -> RunError {
    match e {
        InversionError::DegenerateDenominator { x, value } => {
            RunError::Degenerate(format!("denominator {value:e} at x = {x}; margin {:e} below {EPS_COND:e}", EPS_COND - value.abs()))
        }
        InversionError::SingularCoefficient(m) => RunError::Degenerate(m),
        InversionError::InsufficientGrid(m) | InversionError::InvalidInput(m) => cfg_err("data", m),
        InversionError::MissingLineIntegral { offset } => cfg_err("task.total_integral", format!("no line integral for offset {offset}")),
        e @ InversionError::NonMonotoneGamma1 { .. } => RunError::Assumption(e.to_string()),
        InversionError::Transform(t) => from_transform(t),
        other => RunError::Numerical(other.to_string()),
    }
}

fn from_gauge(e: GaugeError) -> RunError {
    match e {
        GaugeError::InvalidInput(m) => cfg_err("gauge", m),
        e @ (GaugeError::Parse(_) | GaugeError::Diff(_)) => cfg_err("gauge", e.to_string()),
        e @ (GaugeError::Quadrature(_) | GaugeError::Eval(_) | GaugeError::Transform(_)) => RunError::Numerical(e.to_string()),
        other => RunError::Gauge(other.to_string()),
    }
}

fn has_profile(scene: &Scene) -> bool {
    match scene {
        Scene::Flat(s) => s.profile().is_some(),
        Scene::Hyperplane(s) => s.profile().is_some(),
        Scene::Curve(_) => true,
    }
}

fn mode_of(cfg: &RunConfig) -> Mode {
    cfg.task.mode.unwrap_or(if has_profile(&cfg.scene) { Mode::Reduced } else { Mode::Geometric })
}

type BoxedForward<'a> = Box<dyn Forward + 'a>;

/// The forward evaluator selected by the scene kind and `mode`.
pub fn forward_fn(cfg: &RunConfig, mode: Mode) -> Result<BoxedForward<'_>, RunError> {
    if mode == Mode::Reduced && !has_profile(&cfg.scene) {
        return Err(cfg_err("task.mode", "reduced evaluation needs a profile scene"));
    }
    let q = cfg.quad;
    let c = cfg.line_offset;
    Ok(match (&cfg.scene, mode) {
        (Scene::Flat(s), Mode::Reduced) => Box::new(move |x: f64, d: f64| hwt_flat2d_reduced(s, x, d, &q)),
        (Scene::Flat(s), Mode::Geometric) => Box::new(move |x: f64, d: f64| hwt_flat2d(s, x, d, &q)),
        (Scene::Hyperplane(s), Mode::Reduced) => Box::new(move |x: f64, d: f64| hwt_fixed_theta(s, s.line_point(c, x), d, &q)),
        (Scene::Hyperplane(s), Mode::Geometric) => Box::new(move |x: f64, d: f64| Ok(hwt_fixed_theta_geometric(s, s.line_point(c, x), d, &q)?.total())),
        (Scene::Curve(s), Mode::Reduced) => Box::new(move |x: f64, d: f64| hwt_curve_reduced(s, x, d, &q)),
        (Scene::Curve(s), Mode::Geometric) => Box::new(move |x: f64, d: f64| hwt_curve(s, x, d, &q)),
    })
}

/// The sweep `forward` writes, computed in process.
pub fn forward_grid(cfg: &RunConfig) -> Result<DataGrid, RunError> {
    let (x, d) = cfg.grid()?;
    let f = forward_fn(cfg, mode_of(cfg))?;
    let g = sweep(&*f, x, d).map_err(from_transform)?.with_meta(cfg.scene_hash, cfg.quad.abs_tol);
    Ok(match cfg.scene {
        Scene::Hyperplane(_) => g.with_line_offset(cfg.line_offset),
        _ => g,
    })
}

fn validate(cfg: &RunConfig, err: &mut dyn Write) -> Result<(), RunError> {
    let report = cfg.scene.validate(DEFAULT_LATTICE).map_err(|e| RunError::Numerical(e.to_string()))?;
    if !report.geometry_ok() {
        write!(err, "{report}").map_err(io)?;
        let failed: Vec<&str> = report.failures().filter(|c| c.assumption.is_geometric()).map(|c| c.assumption.label()).collect();
        return Err(RunError::Assumption(failed.join("; ")));
    }
    for c in report.failures() {
        say!(err, "note: {} does not hold; operations that need it will be rejected", c.assumption.label());
    }
    Ok(())
}

fn output_path(cfg: &RunConfig, opts: &RunOptions) -> Option<PathBuf> {
    opts.out.clone().or_else(|| cfg.output.clone())
}

/// `path` with `tag` inserted before the extension.
fn tagged(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

pub fn forward(cfg: &RunConfig, opts: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), RunError> {
    validate(cfg, err)?;
    let path = output_path(cfg, opts).ok_or_else(|| cfg_err("output.path", "missing; pass --out"))?;
    let grid = forward_grid(cfg)?;
    grid.write_csv(&path).map_err(from_transform)?;
    let (lo, hi) = grid.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    say!(out, "command=forward");
    say!(out, "scene_kind={}", cfg.scene.kind());
    say!(out, "scene_hash={:016x}", cfg.scene_hash);
    say!(out, "mode={}", if mode_of(cfg) == Mode::Reduced { "reduced" } else { "geometric" });
    say!(out, "nodes={} ({} x {})", grid.values.len(), grid.x.n, grid.d.n);
    say!(out, "min={lo:.6e}");
    say!(out, "max={hi:.6e}");
    say!(out, "quad_abs_tol={:.3e}", cfg.quad.abs_tol);
    say!(out, "quad_rel_tol={:.3e}", cfg.quad.rel_tol);
    say!(out, "output={}", path.display());
    Ok(())
}

/// f̃ as a function of the reconstruction coordinate, when the scene has a profile.
fn profile_truth(cfg: &RunConfig, offset: f64) -> Option<Box<dyn Fn(f64) -> f64 + Sync + '_>> {
    match &cfg.scene {
        Scene::Flat(s) => s.profile().map(|p| Box::new(move |x: f64| p.eval(x).unwrap_or(f64::NAN)) as Box<dyn Fn(f64) -> f64 + Sync>),
        Scene::Hyperplane(s) => s
            .profile()
            .map(|f| Box::new(move |x: f64| f.eval(&s.line_point(offset, x)).unwrap_or(f64::NAN)) as Box<dyn Fn(f64) -> f64 + Sync>),
        Scene::Curve(s) => Some(Box::new(move |x: f64| s.profile().eval(x).unwrap_or(f64::NAN))),
    }
}

/// ∫f̃ computed from the scene's own profile (along the line for hyperplanes).
fn true_total(cfg: &RunConfig, offset: f64) -> Result<f64, RunError> {
    let q = &cfg.quad;
    let num = |e: crate::quad::QuadError<crate::expr::EvalError>| RunError::Numerical(e.to_string());
    match &cfg.scene {
        Scene::Flat(s) => s.profile().ok_or_else(|| cfg_err("scene.field", "inversion needs a profile scene"))?.total(q).map_err(num),
        Scene::Hyperplane(s) => {
            let f = s.profile().ok_or_else(|| cfg_err("scene.field", "inversion needs a profile scene"))?;
            let th = s.theta0();
            let p = s.line_point(offset, 0.0);
            Ok(f.ray_integral(&p, &th, q).map_err(num)? + f.ray_integral(&p, &[-th[0], -th[1]], q).map_err(num)?)
        }
        Scene::Curve(s) => s.profile().total(q).map_err(num),
    }
}

fn total_integral(cfg: &RunConfig, opts: &RunOptions, offset: f64) -> Result<f64, RunError> {
    match opts.total_integral.or(cfg.task.total_integral) {
        Some(t) => Ok(t),
        None if cfg.task.compare => true_total(cfg, offset),
        None => Err(cfg_err("task.total_integral", "missing; pass --total-integral")),
    }
}

const CONSTANT_METHODS: [Method; 3] = [Method::Rmk22First, Method::Rmk22Second, Method::Rmk22Third];

/// Run the inversion formulas selected by `choice` on `data`.
pub fn reconstruct(cfg: &RunConfig, data: DataSource<'_>, offset: f64, total: f64, choice: MethodChoice) -> Result<Vec<Recon1D>, RunError> {
    let wrong = |m: &str| cfg_err("task.method", format!("{m} does not apply to a {} scene", cfg.scene.kind()));
    let recons: Result<Vec<Recon1D>, InversionError> = match &cfg.scene {
        Scene::Flat(s) => {
            if s.profile().is_none() {
                return Err(cfg_err("scene.field", "inversion needs a profile scene"));
            }
            let constant = s.is_constant();
            let methods: Vec<Method> = match choice {
                MethodChoice::Auto if constant => CONSTANT_METHODS.to_vec(),
                MethodChoice::Auto => vec![Method::Thm21],
                MethodChoice::All if constant => CONSTANT_METHODS.to_vec(),
                MethodChoice::One(Method::Thm21) => vec![Method::Thm21],
                MethodChoice::One(m) if constant && CONSTANT_METHODS.contains(&m) => vec![m],
                MethodChoice::All => return Err(cfg_err("task.method", "all needs constant u1 and v1")),
                MethodChoice::One(m) if CONSTANT_METHODS.contains(&m) => return Err(cfg_err("task.method", format!("{m} needs constant u1 and v1"))),
                MethodChoice::One(m) => return Err(wrong(m.tag())),
            };
            let (u1, v1) = (s.u1(0.0).map_err(|e| RunError::Numerical(e.to_string()))?, s.v1(0.0).map_err(|e| RunError::Numerical(e.to_string()))?);
            methods
                .into_iter()
                .map(|m| match m {
                    Method::Thm21 => invert_2d_variable(s, data, total),
                    m => invert_2d_constant(data, u1, v1, m),
                })
                .collect()
        }
        Scene::Hyperplane(s) => {
            match choice {
                MethodChoice::Auto | MethodChoice::One(Method::Thm31) => {}
                MethodChoice::All => return Err(wrong("all")),
                MethodChoice::One(m) => return Err(wrong(m.tag())),
            }
            if s.profile().is_none() {
                return Err(cfg_err("scene.field", "inversion needs a profile scene"));
            }
            invert_fixed_theta(s, &[(offset, data)], &LineIntegrals::from_iter([(offset, total)]))
        }
        Scene::Curve(s) => {
            match choice {
                MethodChoice::Auto | MethodChoice::One(Method::Thm41) => {}
                MethodChoice::All => return Err(wrong("all")),
                MethodChoice::One(m) => return Err(wrong(m.tag())),
            }
            invert_curve(s, data, total).map(|r| vec![r])
        }
    };
    Ok(recons.map_err(from_inversion)?.into_iter().map(|r| r.with_meta(cfg.scene_hash, cfg.quad.abs_tol)).collect())
}

fn check_hash(cfg: &RunConfig, grid: &DataGrid, opts: &RunOptions, err: &mut dyn Write) -> Result<(), RunError> {
    if grid.scene_hash == cfg.scene_hash {
        return Ok(());
    }
    if !opts.override_hash {
        return Err(RunError::HashMismatch {
            data: grid.scene_hash,
            config: cfg.scene_hash,
        });
    }
    say!(
        err,
        "WARNING: scene hash mismatch (data {:016x}, config {:016x}); continuing because --override-hash was given",
        grid.scene_hash,
        cfg.scene_hash
    );
    Ok(())
}

fn read_data(cfg: &RunConfig, opts: &RunOptions) -> Result<Option<(PathBuf, DataGrid)>, RunError> {
    let Some(path) = opts.data.clone().or_else(|| cfg.task.data.clone()) else { return Ok(None) };
    let grid = DataGrid::read_csv(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
    Ok(Some((path, grid)))
}

pub fn invert(cfg: &RunConfig, opts: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), RunError> {
    let (path, grid) = read_data(cfg, opts)?.ok_or_else(|| cfg_err("task.data", "missing; pass --data"))?;
    check_hash(cfg, &grid, opts, err)?;
    let offset = grid.line_offset.unwrap_or(cfg.line_offset);
    let total = total_integral(cfg, opts, offset)?;
    let recons = reconstruct(cfg, DataSource::Grid(&grid), offset, total, cfg.task.method)?;
    let truth = if cfg.task.compare { profile_truth(cfg, offset) } else { None };
    let dest = output_path(cfg, opts);
    say!(out, "command=invert");
    say!(out, "scene_kind={}", cfg.scene.kind());
    say!(out, "data={}", path.display());
    say!(out, "total_integral={total:.16e}");
    say!(out, "nodes={}", grid.x.n);
    for r in &recons {
        let tag = r.method.tag();
        say!(out, "{tag}.denom_min={:.6e}", r.denom_min);
        if let Some(t) = &truth {
            let (max, mean) = r.errors(t);
            say!(out, "{tag}.max_abs_err={max:.6e}");
            say!(out, "{tag}.mean_abs_err={mean:.6e}");
        }
        if let Some(p) = &dest {
            let p = if recons.len() > 1 { tagged(p, tag) } else { p.clone() };
            r.write_csv(&p, truth.as_deref().map(|t| t as &dyn Fn(f64) -> f64)).map_err(from_inversion)?;
            say!(out, "{tag}.output={}", p.display());
        }
    }
    for (i, a) in recons.iter().enumerate() {
        for b in &recons[i + 1..] {
            say!(out, "pairwise_max_diff[{},{}]={:.6e}", a.method, b.method, a.max_diff(b));
        }
    }
    Ok(())
}

fn merge(a: &mut GaugeReport, b: &GaugeReport) {
    let m = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    a.max_forward_residual = m(a.max_forward_residual, b.max_forward_residual);
    a.closedness_residual = m(a.closedness_residual, b.closedness_residual);
    a.boundary_residual = m(a.boundary_residual, b.boundary_residual);
    a.path_discrepancy = m(a.path_discrepancy, b.path_discrepancy);
    a.div_residual = m(a.div_residual, b.div_residual);
    a.ordering_discrepancy = m(a.ordering_discrepancy, b.ordering_discrepancy);
    a.pde_residuals = match (a.pde_residuals, b.pde_residuals) {
        (Some(x), Some(y)) => Some((x.0.max(y.0), x.1.max(y.1))),
        (x, y) => x.or(y),
    };
}

/// n × n points strictly inside `bbox`.
fn interior_points(bbox: &Box2, n: usize) -> Vec<[f64; 2]> {
    let at = |k: usize, i: usize| bbox.lo[k] + (i + 1) as f64 / (n + 1) as f64 * bbox.width(k);
    (0..n).flat_map(|i| (0..n).map(move |j| [at(0, i), at(1, j)])).collect()
}

fn need<'a, T>(v: &'a Option<T>, key: &str) -> Result<&'a T, RunError> {
    v.as_ref().ok_or_else(|| cfg_err(key, "missing"))
}

fn extensions(g: &GaugeConfig, constant: Option<([f64; 2], [f64; 2])>) -> Result<(VectorField2, VectorField2), RunError> {
    match (&g.u_ext, &g.v_ext, constant) {
        (Some(u), Some(v), _) => Ok((u.clone(), v.clone())),
        (None, None, Some((u, v))) => Ok((VectorField2::constant(u), VectorField2::constant(v))),
        (None, _, _) => Err(cfg_err("gauge.u_x", "missing")),
        (_, None, _) => Err(cfg_err("gauge.v_x", "missing")),
    }
}

fn gauge_inner(cfg: &RunConfig, g: &GaugeConfig) -> Result<(GaugeReport, Vec<DataGrid>), RunError> {
    let (xs, ds) = cfg.grid()?;
    let q = cfg.quad;
    let mut report = GaugeReport::default();
    let scene_err = |want: &str| cfg_err("scene.kind", format!("gauge kind needs a {want} scene"));
    let grids = match g.kind {
        GaugeKind::Constant | GaugeKind::General => {
            let Scene::Flat(s) = &cfg.scene else { return Err(scene_err("flat")) };
            let phi = need(&g.phi, "gauge.phi")?;
            let bbox = *need(&g.bbox2, "gauge.box")?;
            let num = |e: crate::expr::EvalError| RunError::Numerical(e.to_string());
            let frame = if s.is_constant() { Some((s.u(0.0).map_err(num)?, s.v(0.0).map_err(num)?)) } else { None };
            let (f, u_ext, v_ext) = if g.kind == GaugeKind::Constant {
                let (u0, v0) = frame.ok_or_else(|| cfg_err("scene.u1", "constant gauge needs constant u1 and v1"))?;
                (gauge_forward_constant(phi, u0, v0, &bbox).map_err(from_gauge)?, VectorField2::constant(u0), VectorField2::constant(v0))
            } else {
                let (u, v) = extensions(g, frame)?;
                let gg = gauge_forward_general(phi, &u, &v, &bbox).map_err(from_gauge)?;
                report.ordering_discrepancy = Some(gg.ordering_discrepancy(&bbox, 16).map_err(from_gauge)?);
                (gg.f, u, v)
            };
            report.boundary_residual = Some(boundary_residual(phi, &f, &bbox).map_err(from_gauge)?);
            let field = Field::new(f, bbox).map_err(|e| cfg_err("gauge.box", e.to_string()))?;
            let grid = flat_forward_sweep(s, &|p| field.eval(p), &bbox, xs, ds, &q).map_err(from_gauge)?;
            report.max_forward_residual = Some(grid.max_abs());
            if g.recover {
                let points = interior_points(&bbox, g.check_points);
                let rebuilt = if g.kind == GaugeKind::Constant {
                    let (u0, v0) = frame.expect("checked above");
                    let pots = potentials_from_null_constant(&field, u0, v0, &q).map_err(from_gauge)?;
                    pots.report(&points, 1e-4 * bbox.width(0)).map_err(from_gauge)?
                } else {
                    let opts = PotentialOptions {
                        check_points: points,
                        ..PotentialOptions::default()
                    };
                    potential_from_null_general(&field, &u_ext, &v_ext, GaugeSetting::Flat(s), &opts).map_err(from_gauge)?.1
                };
                merge(&mut report, &rebuilt);
            }
            vec![grid.with_meta(cfg.scene_hash, q.abs_tol)]
        }
        GaugeKind::Curve => {
            let Scene::Curve(s) = &cfg.scene else { return Err(scene_err("curve")) };
            let phi = need(&g.phi, "gauge.phi")?;
            let bbox = *need(&g.bbox2, "gauge.box")?;
            let (u, v) = extensions(g, None)?;
            let gg = gauge_forward_curve(phi, &u, &v, s.curve(), &bbox).map_err(from_gauge)?;
            report.ordering_discrepancy = Some(gg.ordering_discrepancy(&bbox, 16).map_err(from_gauge)?);
            let field = Field::new(gg.f, bbox).map_err(|e| cfg_err("gauge.box", e.to_string()))?;
            let grid = curve_forward_sweep(s, &|p| field.eval(p), &bbox, xs, ds, &q).map_err(from_gauge)?;
            report.max_forward_residual = Some(grid.max_abs());
            if g.recover {
                let opts = PotentialOptions {
                    check_points: interior_points(&bbox, g.check_points),
                    ..PotentialOptions::default()
                };
                let (_, rebuilt) = potential_from_null_general(&field, &u, &v, GaugeSetting::Curve(s), &opts).map_err(from_gauge)?;
                merge(&mut report, &rebuilt);
            }
            vec![grid.with_meta(cfg.scene_hash, q.abs_tol)]
        }
        GaugeKind::FixedTheta | GaugeKind::DepthNull => {
            let Scene::Hyperplane(s) = &cfg.scene else { return Err(scene_err("hyperplane")) };
            let field = if g.kind == GaugeKind::FixedTheta {
                let phi = need(&g.phi, "gauge.phi")?;
                let bbox = *need(&g.bbox3, "gauge.box")?;
                Field::new(gauge_fixed_theta(phi, s, &bbox).map_err(from_gauge)?, bbox)
            } else {
                if !(g.x3_max > 0.0) {
                    return Err(cfg_err("gauge.x3_max", "must be positive"));
                }
                let inf = f64::INFINITY;
                let h = need(&g.h, "gauge.h")?;
                Field::new(depth_null_generator(h).map_err(from_gauge)?, Box3::new([-inf, -inf, 0.0], [inf, inf, g.x3_max]))
            }
            .map_err(|e| cfg_err("gauge.box", e.to_string()))?;
            let grids = fixed_theta_sweep(s, &field, &g.offsets, xs, ds, &q).map_err(from_gauge)?;
            report.max_forward_residual = Some(grids.iter().map(DataGrid::max_abs).fold(0.0, f64::max));
            grids
                .into_iter()
                .zip(&g.offsets)
                .map(|(gr, c)| gr.with_meta(cfg.scene_hash, q.abs_tol).with_line_offset(*c))
                .collect()
        }
    };
    Ok((report, grids))
}

pub fn gauge(cfg: &RunConfig, opts: &RunOptions, out: &mut dyn Write, _err: &mut dyn Write) -> Result<(), RunError> {
    let g = cfg.gauge.as_ref().ok_or_else(|| cfg_err("gauge", "missing section"))?;
    let (report, grids) = gauge_inner(cfg, g)?;
    say!(out, "command=gauge");
    write!(out, "{report}").map_err(io)?;
    if let Some(p) = output_path(cfg, opts) {
        for (k, gr) in grids.iter().enumerate() {
            let p = if grids.len() > 1 { tagged(&p, &format!("line{k}")) } else { p.clone() };
            gr.write_csv(&p).map_err(from_transform)?;
            say!(out, "residual_csv={}", p.display());
        }
    }
    match report.exceeded() {
        Some((k, v, tol)) => Err(RunError::Gauge(format!("{k} = {v:e} exceeds {tol:e}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "skip",
        })
    }
}

/// One line of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub status: CheckStatus,
    pub value: f64,
    pub tol: f64,
    pub note: String,
}

impl CheckRow {
    fn measured(name: &'static str, value: f64, tol: f64, note: impl Into<String>) -> Self {
        CheckRow {
            name,
            status: if value <= tol { CheckStatus::Pass } else { CheckStatus::Fail },
            value,
            tol,
            note: note.into(),
        }
    }

    fn skip(name: &'static str, note: impl Into<String>) -> Self {
        CheckRow {
            name,
            status: CheckStatus::Skip,
            value: f64::NAN,
            tol: f64::NAN,
            note: note.into(),
        }
    }

    fn failed(name: &'static str, e: impl fmt::Display) -> Self {
        CheckRow {
            name,
            status: CheckStatus::Fail,
            value: f64::NAN,
            tol: f64::NAN,
            note: e.to_string(),
        }
    }

    fn from_result(name: &'static str, r: Result<CheckRow, RunError>) -> Self {
        r.unwrap_or_else(|e| CheckRow::failed(name, e))
    }
}

/// Up to k × k grid nodes spread evenly over the axes.
fn sample_nodes(x: Axis, d: Axis, k: usize) -> Vec<(f64, f64)> {
    let pick = |a: Axis| {
        let mut v: Vec<usize> = (0..k).map(|i| ((i * (a.n - 1)) as f64 / (k - 1) as f64).round() as usize).collect();
        v.dedup();
        v.into_iter().map(move |i| a.at(i)).collect::<Vec<f64>>()
    };
    let ds = pick(d);
    pick(x).into_iter().flat_map(|x| ds.iter().map(move |&d| (x, d))).collect()
}

/// Nodes where the glide and FD stencils stay inside the curve range.
fn node_ok(cfg: &RunConfig, x: f64, d: f64, h: f64) -> bool {
    match &cfg.scene {
        Scene::Curve(s) => {
            let (lo, hi) = s.curve().range();
            x - h >= lo && x + d + 2.0 * h <= hi
        }
        _ => true,
    }
}

fn quad_scale(cfg: &RunConfig, value: f64) -> f64 {
    cfg.quad.abs_tol + cfg.quad.rel_tol * value.abs()
}

fn check_reduced_vs_geometric(cfg: &RunConfig, nodes: &[(f64, f64)]) -> Result<CheckRow, RunError> {
    const NAME: &str = "reduced_vs_geometric";
    if !has_profile(&cfg.scene) {
        return Ok(CheckRow::skip(NAME, "needs a profile scene"));
    }
    if matches!(cfg.scene, Scene::Curve(_)) {
        return Ok(CheckRow::skip(NAME, "curved gliding: the tube-frame field differs from the reduced model"));
    }
    let red = forward_fn(cfg, Mode::Reduced)?;
    let geo = forward_fn(cfg, Mode::Geometric)?;
    let rows: Result<Vec<(f64, f64)>, TransformError> = nodes
        .par_iter()
        .map(|&(x, d)| {
            let (a, b) = (red.eval(x, d)?, geo.eval(x, d)?);
            Ok(((a - b).abs(), 10.0 * quad_scale(cfg, a)))
        })
        .collect();
    let worst = rows.map_err(from_transform)?.iter().map(|r| r.0 / r.1).fold(0.0, f64::max);
    Ok(CheckRow::measured(NAME, worst, 1.0, format!("{} nodes; value is error / (10 quad_tol)", nodes.len())))
}

fn check_identities_callback(cfg: &RunConfig, nodes: &[(f64, f64)]) -> Result<CheckRow, RunError> {
    const NAME: &str = "derivative_identities";
    if !has_profile(&cfg.scene) {
        return Ok(CheckRow::skip(NAME, "needs a profile scene"));
    }
    let h = FD_STEP;
    let r = forward_fn(cfg, Mode::Reduced)?;
    let nodes: Vec<(f64, f64)> = nodes.iter().copied().filter(|&(x, d)| node_ok(cfg, x, d, h)).collect();
    let errs: Result<Vec<f64>, TransformError> = nodes
        .par_iter()
        .map(|&(x, d)| {
            let (ax, ad) = analytic_derivatives(&cfg.scene, cfg.line_offset, x, d, &cfg.quad)?;
            let fx = (r.eval(x + h, d)? - r.eval(x - h, d)?) / (2.0 * h);
            let fd = if d >= h {
                (r.eval(x, d + h)? - r.eval(x, d - h)?) / (2.0 * h)
            } else {
                (-3.0 * r.eval(x, d)? + 4.0 * r.eval(x, d + h)? - r.eval(x, d + 2.0 * h)?) / (2.0 * h)
            };
            Ok((fx - ax).abs().max((fd - ad).abs()))
        })
        .collect();
    let max = errs.map_err(from_transform)?.into_iter().fold(0.0, f64::max);
    let tol = IDENTITY_TOL + 4.0 * cfg.quad.abs_tol / h;
    Ok(CheckRow::measured(NAME, max, tol, format!("{} nodes, FD step {h:e}", nodes.len())))
}

/// Grid FD against the analytic right sides. The bound at each node is
/// 1e-6 plus half the second difference of the analytic derivative (three
/// times the central-difference truncation term) plus quadrature noise; the
/// value reported is the worst error-to-bound ratio.
fn check_identities_data(cfg: &RunConfig, grid: &DataGrid, offset: f64) -> Result<CheckRow, RunError> {
    const NAME: &str = "derivative_identities_data";
    if !has_profile(&cfg.scene) {
        return Ok(CheckRow::skip(NAME, "needs a profile scene"));
    }
    let (nx, nd) = (grid.x.n, grid.d.n);
    if nx < 3 || nd < 3 {
        return Ok(CheckRow::skip(NAME, "grid needs at least 3 nodes per axis"));
    }
    let (hx, hd) = (grid.x.step(), grid.d.step());
    let analytic: Vec<Option<(f64, f64)>> = (0..nx * nd)
        .into_par_iter()
        .map(|k| {
            let (x, d) = (grid.x.at(k / nd), grid.d.at(k % nd));
            if !node_ok(cfg, x, d, 0.0) {
                return None;
            }
            analytic_derivatives(&cfg.scene, offset, x, d, &cfg.quad).ok()
        })
        .collect();
    let a = |i: usize, j: usize| analytic[i * nd + j];
    let noise = 2.0 * grid.quad_tol.max(cfg.quad.abs_tol);
    let mut worst = 0.0_f64;
    let mut count = 0;
    for i in 1..nx - 1 {
        for j in 1..nd - 1 {
            let (Some(c), Some(l), Some(r), Some(dn), Some(up)) = (a(i, j), a(i - 1, j), a(i + 1, j), a(i, j - 1), a(i, j + 1)) else { continue };
            let fx = (grid.get(i + 1, j) - grid.get(i - 1, j)) / (2.0 * hx);
            let fd = (grid.get(i, j + 1) - grid.get(i, j - 1)) / (2.0 * hd);
            let tx = IDENTITY_TOL + 0.5 * (r.0 - 2.0 * c.0 + l.0).abs() + noise / hx;
            let td = IDENTITY_TOL + 0.5 * (up.1 - 2.0 * c.1 + dn.1).abs() + noise / hd;
            worst = worst.max((fx - c.0).abs() / tx).max((fd - c.1).abs() / td);
            count += 1;
        }
    }
    if count == 0 {
        return Ok(CheckRow::skip(NAME, "no interior nodes"));
    }
    Ok(CheckRow::measured(NAME, worst, 1.0, format!("{count} interior nodes; value is error / bound")))
}

/// The scene with its profile replaced by `e`.
fn with_profile_expr(scene: &Scene, e: Expr) -> Result<Scene, RunError> {
    let se = |e: crate::scene::SceneError| RunError::Numerical(e.to_string());
    Ok(match scene {
        Scene::Flat(s) => {
            let support = s.profile().expect("profile scene").support();
            Scene::Flat(s.with_content(FlatContent::Profile(Profile::new(e, support).map_err(se)?)))
        }
        Scene::Hyperplane(s) => {
            let b = *s.profile().expect("profile scene").bbox();
            Scene::Hyperplane(
                HyperplaneScene::new(s.lambda_u_expr().clone(), s.lambda_v_expr().clone(), s.theta0(), HyperContent::Profile(Field::new(e, b).map_err(se)?), *s.domain())
                    .map_err(se)?,
            )
        }
        Scene::Curve(s) => Scene::Curve(s.with_profile(Profile::new(e, s.profile().support()).map_err(se)?)),
    })
}

fn check_linearity(cfg: &RunConfig, nodes: &[(f64, f64)]) -> Result<CheckRow, RunError> {
    const NAME: &str = "linearity";
    let (f, other_src, vars): (&Expr, String, &[&str]) = match &cfg.scene {
        Scene::Flat(s) => match s.profile() {
            Some(p) => {
                let (a, b) = p.support();
                (p.expr(), format!("exp(-((x - {})/{})^2)", a + 0.55 * (b - a), 0.15 * (b - a)), &["x"])
            }
            None => return Ok(CheckRow::skip(NAME, "needs a profile scene")),
        },
        Scene::Hyperplane(s) => match s.profile() {
            Some(p) => {
                let b = p.bbox();
                let mid = |k: usize| b.lo[k] + 0.55 * b.width(k);
                let wid = |k: usize| 0.15 * b.width(k);
                (p.expr(), format!("exp(-((x1 - {})/{})^2 - ((x2 - {})/{})^2)", mid(0), wid(0), mid(1), wid(1)), &["x1", "x2"])
            }
            None => return Ok(CheckRow::skip(NAME, "needs a profile scene")),
        },
        Scene::Curve(s) => {
            let (a, b) = s.profile().support();
            (s.profile().expr(), format!("exp(-((x - {})/{})^2)", a + 0.55 * (b - a), 0.15 * (b - a)), &["x"])
        }
    };
    let bad = |e: &dyn fmt::Display| RunError::Numerical(e.to_string());
    let g = crate::expr::parse(&other_src, vars).map_err(|e| bad(&e))?;
    let k = |c: f64| Expr::constant(c, vars).map_err(|e| bad(&e));
    let combo = f.mul(&k(2.0)?).map_err(|e| bad(&e))?.sub(&g.mul(&k(3.0)?).map_err(|e| bad(&e))?).map_err(|e| bad(&e))?;
    let mk = |e: Expr| -> Result<RunConfig, RunError> {
        Ok(RunConfig {
            scene: with_profile_expr(&cfg.scene, e)?,
            ..cfg.clone()
        })
    };
    let (cg, ch) = (mk(g)?, mk(combo)?);
    let mode = mode_of(cfg);
    let (rf, rg, rh) = (forward_fn(cfg, mode)?, forward_fn(&cg, mode)?, forward_fn(&ch, mode)?);
    let rows: Result<Vec<(f64, f64)>, TransformError> = nodes
        .par_iter()
        .filter(|&&(x, d)| node_ok(cfg, x, d, 0.0))
        .map(|&(x, d)| {
            let (a, b, c) = (rf.eval(x, d)?, rg.eval(x, d)?, rh.eval(x, d)?);
            Ok(((c - (2.0 * a - 3.0 * b)).abs(), 10.0 * (2.0 * quad_scale(cfg, a) + 3.0 * quad_scale(cfg, b) + quad_scale(cfg, c))))
        })
        .collect();
    let rows = rows.map_err(from_transform)?;
    let worst = rows.iter().map(|r| r.0 / r.1).fold(0.0, f64::max);
    Ok(CheckRow::measured(NAME, worst, 1.0, "R(2f - 3g) vs 2Rf - 3Rg; value is error / bound"))
}

fn check_round_trip(cfg: &RunConfig) -> Result<CheckRow, RunError> {
    const NAME: &str = "round_trip";
    if !has_profile(&cfg.scene) {
        return Ok(CheckRow::skip(NAME, "needs a profile scene"));
    }
    let (xs, _) = cfg.grid()?;
    let n = xs.n.max(3);
    let (nodes, tol) = match &cfg.scene {
        Scene::Flat(s) => (Axis::new(s.domain().0, s.domain().1, n), 1e-4),
        Scene::Hyperplane(_) => (Ok(xs), 1e-3),
        Scene::Curve(s) => (Axis::new(s.domain().0, s.domain().1, n), 5e-4),
    };
    let nodes = nodes.map_err(from_transform)?;
    let fwd = forward_fn(cfg, Mode::Reduced)?;
    let total = true_total(cfg, cfg.line_offset)?;
    let recons = reconstruct(cfg, DataSource::callback(&*fwd, nodes), cfg.line_offset, total, MethodChoice::Auto)?;
    let truth = profile_truth(cfg, cfg.line_offset).expect("profile scene");
    let max = recons.iter().map(|r| r.errors(&truth).0).fold(0.0, f64::max);
    let tags: Vec<&str> = recons.iter().map(|r| r.method.tag()).collect();
    Ok(CheckRow::measured(NAME, max, tol, format!("{} on {} nodes", tags.join(", "), nodes.n)))
}

/// Every verification applicable to the configured scene.
pub fn verify_rows(cfg: &RunConfig, data: Option<&DataGrid>) -> Result<Vec<CheckRow>, RunError> {
    let (xs, ds) = cfg.grid()?;
    let nodes = sample_nodes(xs, ds, 5);
    let mut rows = vec![
        CheckRow::from_result("reduced_vs_geometric", check_reduced_vs_geometric(cfg, &nodes)),
        CheckRow::from_result("derivative_identities", check_identities_callback(cfg, &nodes)),
    ];
    if let Some(g) = data {
        let offset = g.line_offset.unwrap_or(cfg.line_offset);
        rows.push(CheckRow::from_result("derivative_identities_data", check_identities_data(cfg, g, offset)));
    }
    rows.push(CheckRow::from_result("linearity", check_linearity(cfg, &nodes)));
    rows.push(CheckRow::from_result("round_trip", check_round_trip(cfg)));
    Ok(rows)
}

pub fn verify(cfg: &RunConfig, opts: &RunOptions, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), RunError> {
    let data = read_data(cfg, opts)?;
    if let Some((_, g)) = &data {
        check_hash(cfg, g, opts, err)?;
    }
    let rows = verify_rows(cfg, data.as_ref().map(|d| &d.1))?;
    say!(out, "{:<28} {:<6} {:>12} {:>12}  note", "check", "status", "value", "bound");
    for r in &rows {
        say!(out, "{:<28} {:<6} {:>12.3e} {:>12.3e}  {}", r.name, r.status, r.value, r.tol, r.note);
    }
    match rows.iter().find(|r| r.status == CheckStatus::Fail) {
        Some(r) => Err(RunError::Verify(format!("{}: {:e} > {:e} {}", r.name, r.value, r.tol, r.note))),
        None => Ok(()),
    }
}

pub fn check(cfg: &RunConfig, out: &mut dyn Write) -> Result<(), RunError> {
    let report = cfg.scene.validate(DEFAULT_LATTICE).map_err(|e| RunError::Numerical(e.to_string()))?;
    write!(out, "{report}").map_err(io)?;
    if report.geometry_ok() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.failures().filter(|c| c.assumption.is_geometric()).map(|c| c.assumption.label()).collect();
        Err(RunError::Assumption(failed.join("; ")))
    }
}
