use std::cell::RefCell;
use std::collections::BTreeSet;
use std::hash::Hasher;
use std::path::{Path, PathBuf};

use fnv::FnvHasher;
use ini::{Ini, ParseOption};

use crate::expr::{parse, Expr};
use crate::geometry::{Box2, Box3};
use crate::quad::QuadOptions;
use crate::scene::{Curve, CurveScene, Field, FlatContent, FlatScene2D, HyperContent, HyperplaneScene, Profile, Scene, VectorField2};
use crate::transform::Axis;

use super::RunError;

/// How the forward transform is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One-dimensional profile integrals.
    Reduced,
    /// Quadrature along the three legs.
    Geometric,
}

/// Requested inversion formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    /// Pick from the scene kind; constant flat scenes run all three formulas.
    Auto,
    /// All three constant-field formulas.
    All,
    One(crate::inversion::Method),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub mode: Option<Mode>,
    pub method: MethodChoice,
    /// Treat the scene profile as ground truth and report errors against it.
    pub compare: bool,
    pub data: Option<PathBuf>,
    pub total_integral: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GaugeKind {
    Constant,
    General,
    Curve,
    FixedTheta,
    DepthNull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeConfig {
    pub kind: GaugeKind,
    /// Potential φ; variables (x, y) in the plane, (x1, x2, x3) for fixed θ.
    pub phi: Option<Expr>,
    /// Depth profile h(s) for depth-null fields.
    pub h: Option<Expr>,
    pub bbox2: Option<Box2>,
    pub bbox3: Option<Box3>,
    pub u_ext: Option<VectorField2>,
    pub v_ext: Option<VectorField2>,
    pub offsets: Vec<f64>,
    pub x3_max: f64,
    /// Rebuild the potential from f and report its residuals.
    pub recover: bool,
    /// Points per side of the residual lattice used by `recover`.
    pub check_points: usize,
}

/// A parsed configuration file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: Scene,
    /// FNV-1a 64 of the canonical [scene] section.
    pub scene_hash: u64,
    /// Line offset c for hyperplane scenes (x′ = sθ0 + cθ0⊥).
    pub line_offset: f64,
    pub grid: Option<(Axis, Axis)>,
    pub quad: QuadOptions,
    pub task: TaskConfig,
    pub gauge: Option<GaugeConfig>,
    pub output: Option<PathBuf>,
}

fn cfg_err(key: impl Into<String>, message: impl Into<String>) -> RunError {
    RunError::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn unquote(v: &str) -> &str {
    let v = v.trim();
    for q in ['"', '\''] {
        if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
            return &v[1..v.len() - 1];
        }
    }
    v
}

/// FNV-1a 64 over `key=value` lines with all whitespace removed, sorted by key.
pub fn scene_hash<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> u64 {
    let strip = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
    let mut lines: Vec<String> = pairs.into_iter().map(|(k, v)| format!("{}={}", strip(k), strip(unquote(v)))).collect();
    lines.sort();
    let mut h = FnvHasher::default();
    h.write(lines.join("\n").as_bytes());
    h.finish()
}

/// One INI section with tracking of the keys that were read.
struct Section {
    name: &'static str,
    props: Vec<(String, String)>,
    used: RefCell<BTreeSet<String>>,
}

impl Section {
    fn new(ini: &Ini, name: &'static str) -> Result<Self, RunError> {
        let mut props: Vec<(String, String)> = Vec::new();
        for (_, p) in ini.iter().filter(|(s, _)| *s == Some(name)) {
            for (k, v) in p.iter() {
                if props.iter().any(|(q, _)| q == k) {
                    return Err(cfg_err(format!("{name}.{k}"), "key given more than once"));
                }
                props.push((k.to_string(), unquote(v).to_string()));
            }
        }
        Ok(Section {
            name,
            props,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.name)
    }

    fn get(&self, k: &str) -> Option<&str> {
        let v = self.props.iter().find(|(q, _)| q == k).map(|(_, v)| v.as_str());
        if v.is_some() {
            self.used.borrow_mut().insert(k.to_string());
        }
        v
    }

    fn req(&self, k: &str) -> Result<&str, RunError> {
        self.get(k).ok_or_else(|| cfg_err(self.key(k), "missing"))
    }

    fn expr(&self, k: &str, vars: &[&str]) -> Result<Option<Expr>, RunError> {
        self.get(k).map(|s| parse(s, vars).map_err(|e| cfg_err(self.key(k), e.to_string()))).transpose()
    }

    fn num(&self, k: &str) -> Result<Option<f64>, RunError> {
        self.get(k).map(|s| number(s).map_err(|m| cfg_err(self.key(k), m))).transpose()
    }

    fn list(&self, k: &str, n: Option<usize>) -> Result<Option<Vec<f64>>, RunError> {
        let Some(s) = self.get(k) else { return Ok(None) };
        let v = s.split(',').map(number).collect::<Result<Vec<_>, _>>().map_err(|m| cfg_err(self.key(k), m))?;
        if let Some(n) = n {
            if v.len() != n {
                return Err(cfg_err(self.key(k), format!("expected {n} comma-separated numbers, got {}", v.len())));
            }
        }
        Ok(Some(v))
    }

    fn pair(&self, k: &str) -> Result<Option<(f64, f64)>, RunError> {
        Ok(self.list(k, Some(2))?.map(|v| (v[0], v[1])))
    }

    fn flag(&self, k: &str) -> Result<Option<bool>, RunError> {
        self.get(k)
            .map(|s| match s.trim() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(cfg_err(self.key(k), format!("expected true or false, got '{other}'"))),
            })
            .transpose()
    }

    fn axis(&self, k: &str) -> Result<Option<Axis>, RunError> {
        let Some(v) = self.list(k, Some(3))? else { return Ok(None) };
        if !(v[2] >= 2.0 && v[2].fract() == 0.0) {
            return Err(cfg_err(self.key(k), format!("node count must be an integer ≥ 2, got {}", v[2])));
        }
        Axis::new(v[0], v[1], v[2] as usize).map(Some).map_err(|e| cfg_err(self.key(k), e.to_string()))
    }

    /// Every key must have been read.
    fn finish(&self) -> Result<(), RunError> {
        let used = self.used.borrow();
        match self.props.iter().find(|(k, _)| !used.contains(k)) {
            Some((k, _)) => Err(cfg_err(self.key(k), "unknown key")),
            None => Ok(()),
        }
    }
}

/// A number written as a constant expression, e.g. `1e-12` or `pi/4`.
fn number(s: &str) -> Result<f64, String> {
    let e = parse(s.trim(), &[]).map_err(|e| e.to_string())?;
    let v = e.eval(&[]).map_err(|e| e.to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{}' is not a finite number", s.trim()))
    }
}

fn box2(sec: &Section, k: &str) -> Result<Option<Box2>, RunError> {
    let Some(v) = sec.list(k, Some(4))? else { return Ok(None) };
    let b = Box2::new([v[0], v[2]], [v[1], v[3]]);
    if !b.is_valid() {
        return Err(cfg_err(sec.key(k), "expected x_lo, x_hi, y_lo, y_hi with lo < hi"));
    }
    Ok(Some(b))
}

fn box3(sec: &Section, k: &str) -> Result<Option<Box3>, RunError> {
    let Some(v) = sec.list(k, Some(6))? else { return Ok(None) };
    let b = Box3::new([v[0], v[2], v[4]], [v[1], v[3], v[5]]);
    if !b.is_valid() {
        return Err(cfg_err(sec.key(k), "expected x1_lo, x1_hi, x2_lo, x2_hi, x3_lo, x3_hi with lo < hi"));
    }
    Ok(Some(b))
}

fn vector_field(sec: &Section, a: &str, b: &str) -> Result<Option<VectorField2>, RunError> {
    match (sec.expr(a, &["x", "y"])?, sec.expr(b, &["x", "y"])?) {
        (Some(c1), Some(c2)) => VectorField2::new(c1, c2).map(Some).map_err(|e| cfg_err(sec.key(a), e.to_string())),
        (None, None) => Ok(None),
        (Some(_), None) => Err(cfg_err(sec.key(b), "missing")),
        (None, Some(_)) => Err(cfg_err(sec.key(a), "missing")),
    }
}

const SECTIONS: [&str; 6] = ["scene", "grid", "quad", "task", "gauge", "output"];

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err("config", format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, RunError> {
        let opt = ParseOption {
            enabled_escape: false,
            ..ParseOption::default()
        };
        let ini = Ini::load_from_str_opt(text, opt).map_err(|e| cfg_err("config", e.to_string()))?;
        for (name, props) in ini.iter() {
            match name {
                Some(n) if SECTIONS.contains(&n) => {}
                Some(n) => return Err(cfg_err(n, "unknown section")),
                None if props.is_empty() => {}
                None => return Err(cfg_err(props.iter().next().map(|(k, _)| k).unwrap_or("config"), "key outside any section")),
            }
        }
        let scene_sec = Section::new(&ini, "scene")?;
        if scene_sec.is_empty() {
            return Err(cfg_err("scene", "missing section"));
        }
        let hash = scene_hash(scene_sec.props.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        let (scene, line_offset) = parse_scene(&scene_sec)?;
        scene_sec.finish()?;

        let grid_sec = Section::new(&ini, "grid")?;
        let grid = match (grid_sec.axis("x")?, grid_sec.axis("d")?) {
            (Some(x), Some(d)) => Some((x, d)),
            (None, None) => None,
            (Some(_), None) => return Err(cfg_err("grid.d", "missing")),
            (None, Some(_)) => return Err(cfg_err("grid.x", "missing")),
        };
        grid_sec.finish()?;

        let quad_sec = Section::new(&ini, "quad")?;
        let mut quad = QuadOptions::default();
        if let Some(a) = quad_sec.num("abs_tol")? {
            if !(a > 0.0) {
                return Err(cfg_err("quad.abs_tol", "must be positive"));
            }
            quad = quad.with_abs_tol(a);
        }
        if let Some(r) = quad_sec.num("rel_tol")? {
            if !(r >= 0.0) {
                return Err(cfg_err("quad.rel_tol", "must be non-negative"));
            }
            quad = quad.with_rel_tol(r);
        }
        if let Some(p) = quad_sec.num("pieces")? {
            if !(p >= 1.0 && p.fract() == 0.0) {
                return Err(cfg_err("quad.pieces", "must be a positive integer"));
            }
            quad = quad.with_pieces(p as usize);
        }
        quad_sec.finish()?;

        let task = parse_task(&Section::new(&ini, "task")?)?;

        let gauge_sec = Section::new(&ini, "gauge")?;
        let gauge = if gauge_sec.is_empty() { None } else { Some(parse_gauge(&gauge_sec)?) };

        let out_sec = Section::new(&ini, "output")?;
        let output = out_sec.get("path").map(PathBuf::from);
        out_sec.finish()?;

        Ok(RunConfig {
            scene,
            scene_hash: hash,
            line_offset,
            grid,
            quad,
            task,
            gauge,
            output,
        })
    }

    /// The (x, d) grid, required by sweeping commands.
    pub fn grid(&self) -> Result<(Axis, Axis), RunError> {
        let (x, d) = self.grid.ok_or_else(|| cfg_err("grid", "missing section"))?;
        if d.lo != 0.0 {
            return Err(cfg_err("grid.d", format!("must start at 0, starts at {}", d.lo)));
        }
        Ok((x, d))
    }
}

fn scene_err(sec: &Section, k: &str) -> impl Fn(crate::scene::SceneError) -> RunError {
    let key = sec.key(k);
    move |e| cfg_err(key.clone(), e.to_string())
}

fn parse_scene(sec: &Section) -> Result<(Scene, f64), RunError> {
    let kind = sec.req("kind")?;
    match kind {
        "flat" | "flat2d" => {
            let u1 = sec.expr("u1", &["x"])?.ok_or_else(|| cfg_err("scene.u1", "missing"))?;
            let v1 = sec.expr("v1", &["x"])?.ok_or_else(|| cfg_err("scene.v1", "missing"))?;
            let domain = sec.pair("domain")?.ok_or_else(|| cfg_err("scene.domain", "missing"))?;
            let support = sec.pair("support")?;
            let content = match sec.expr("field", &["x", "y"])? {
                Some(f) => {
                    if sec.get("profile").is_some() {
                        return Err(cfg_err("scene.field", "give either profile or field, not both"));
                    }
                    let b = box2(sec, "field_box")?.ok_or_else(|| cfg_err("scene.field_box", "missing"))?;
                    FlatContent::Field(Field::new(f, b).map_err(scene_err(sec, "field"))?)
                }
                None => {
                    let p = sec.expr("profile", &["x"])?.unwrap_or(Expr::constant(0.0, &["x"]).expect("constant"));
                    FlatContent::Profile(Profile::new(p, support.unwrap_or(domain)).map_err(scene_err(sec, "support"))?)
                }
            };
            let s = FlatScene2D::new(u1, v1, content, domain).map_err(scene_err(sec, "kind"))?;
            Ok((Scene::Flat(s), 0.0))
        }
        "hyperplane" => {
            const V: [&str; 2] = ["x1", "x2"];
            let lu = sec.expr("lambda_u", &V)?.ok_or_else(|| cfg_err("scene.lambda_u", "missing"))?;
            let lv = sec.expr("lambda_v", &V)?.ok_or_else(|| cfg_err("scene.lambda_v", "missing"))?;
            let th = sec.list("theta0", Some(2))?.ok_or_else(|| cfg_err("scene.theta0", "missing"))?;
            let norm = th[0].hypot(th[1]);
            if !(norm > 0.0) {
                return Err(cfg_err("scene.theta0", "must be a non-zero vector"));
            }
            let theta0 = [th[0] / norm, th[1] / norm];
            let domain = box2(sec, "domain")?.ok_or_else(|| cfg_err("scene.domain", "missing"))?;
            let content = match sec.expr("field", &["x1", "x2", "x3"])? {
                Some(f) => {
                    if sec.get("profile").is_some() {
                        return Err(cfg_err("scene.field", "give either profile or field, not both"));
                    }
                    let b = box3(sec, "field_box")?.ok_or_else(|| cfg_err("scene.field_box", "missing"))?;
                    HyperContent::Field(Field::new(f, b).map_err(scene_err(sec, "field"))?)
                }
                None => {
                    let p = sec.expr("profile", &V)?.unwrap_or(Expr::constant(0.0, &V).expect("constant"));
                    let support = box2(sec, "support")?.unwrap_or(domain);
                    HyperContent::Profile(Field::new(p, support).map_err(scene_err(sec, "support"))?)
                }
            };
            let c = sec.num("line_offset")?.unwrap_or(0.0);
            let s = HyperplaneScene::new(lu, lv, theta0, content, domain).map_err(scene_err(sec, "kind"))?;
            Ok((Scene::Hyperplane(s), c))
        }
        "curve" => {
            let gx = sec.req("gamma_x")?;
            let gy = sec.req("gamma_y")?;
            let range = sec.pair("t_range")?.ok_or_else(|| cfg_err("scene.t_range", "missing"))?;
            let tube = sec.num("tube_radius")?.ok_or_else(|| cfg_err("scene.tube_radius", "missing"))?;
            let curve = Curve::parse(gx, gy, range, tube).map_err(scene_err(sec, "gamma_x"))?;
            let tu = sec.expr("theta_u", &["t"])?.ok_or_else(|| cfg_err("scene.theta_u", "missing"))?;
            let tv = sec.expr("theta_v", &["t"])?.ok_or_else(|| cfg_err("scene.theta_v", "missing"))?;
            let domain = sec.pair("domain")?.ok_or_else(|| cfg_err("scene.domain", "missing"))?;
            let p = sec.expr("profile", &["x"])?.unwrap_or(Expr::constant(0.0, &["x"]).expect("constant"));
            let support = sec.pair("support")?.unwrap_or(domain);
            let profile = Profile::new(p, support).map_err(scene_err(sec, "support"))?;
            let s = CurveScene::new(curve, tu, tv, profile, domain).map_err(scene_err(sec, "domain"))?;
            Ok((Scene::Curve(s), 0.0))
        }
        other => Err(cfg_err("scene.kind", format!("expected flat, hyperplane or curve, got '{other}'"))),
    }
}

fn parse_task(sec: &Section) -> Result<TaskConfig, RunError> {
    let mode = match sec.get("mode") {
        None => None,
        Some("reduced") => Some(Mode::Reduced),
        Some("geometric") => Some(Mode::Geometric),
        Some(other) => return Err(cfg_err("task.mode", format!("expected reduced or geometric, got '{other}'"))),
    };
    let method = match sec.get("method") {
        None | Some("auto") => MethodChoice::Auto,
        Some("all") => MethodChoice::All,
        Some(tag) => MethodChoice::One(crate::inversion::Method::from_tag(tag).ok_or_else(|| cfg_err("task.method", format!("unknown method '{tag}'")))?),
    };
    let t = TaskConfig {
        mode,
        method,
        compare: sec.flag("compare")?.unwrap_or(false),
        data: sec.get("data").map(PathBuf::from),
        total_integral: sec.num("total_integral")?,
    };
    sec.finish()?;
    Ok(t)
}

fn parse_gauge(sec: &Section) -> Result<GaugeConfig, RunError> {
    let kind = match sec.req("kind")? {
        "constant" => GaugeKind::Constant,
        "general" => GaugeKind::General,
        "curve" => GaugeKind::Curve,
        "fixed_theta" => GaugeKind::FixedTheta,
        "depth_null" => GaugeKind::DepthNull,
        other => {
            return Err(cfg_err(
                "gauge.kind",
                format!("expected constant, general, curve, fixed_theta or depth_null, got '{other}'"),
            ))
        }
    };
    let phi_vars: &[&str] = if kind == GaugeKind::FixedTheta { &["x1", "x2", "x3"] } else { &["x", "y"] };
    let (bbox2, bbox3) = if kind == GaugeKind::FixedTheta { (None, box3(sec, "box")?) } else { (box2(sec, "box")?, None) };
    let cp = sec.num("check_points")?.unwrap_or(3.0);
    if !(cp >= 1.0 && cp.fract() == 0.0) {
        return Err(cfg_err("gauge.check_points", "must be a positive integer"));
    }
    let g = GaugeConfig {
        kind,
        phi: sec.expr("phi", phi_vars)?,
        h: sec.expr("h", &["s"])?,
        bbox2,
        bbox3,
        u_ext: vector_field(sec, "u_x", "u_y")?,
        v_ext: vector_field(sec, "v_x", "v_y")?,
        offsets: sec.list("offsets", None)?.unwrap_or_else(|| vec![0.0]),
        x3_max: sec.num("x3_max")?.unwrap_or(12.0),
        recover: sec.flag("recover")?.unwrap_or(false),
        check_points: cp as usize,
    };
    sec.finish()?;
    Ok(g)
}
