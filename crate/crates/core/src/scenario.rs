//! Floor-plan link scenarios, coverage maps and blockage Monte-Carlo.
//!
//! The floor plan is 2-D. Paths are the direct line of sight, one specular
//! bounce per environment reflector (image method), one relayed path per
//! surface and, for baseline comparisons, one specular bounce per metal
//! sheet. Segments crossed by a leg add their penetration loss or block it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{element_pattern, steering_command, SurfaceArray, DEFAULT_Q};
use crate::budget::{
    expand_columns, friis, received_power_exact, LinkGeometry, RadioParams, SurfacePose, Vec3,
};
use crate::consts::to_db;
use crate::error::{Error, Result};
use crate::lut::{Mode, ModeTables};

/// Leg crossings closer than this to a leg endpoint are ignored.
const ENDPOINT_EPS: f64 = 1e-6;
/// Steering command grid (deg).
const STEER_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P2 {
    pub x: f64,
    pub y: f64,
}

impl P2 {
    pub const fn new(x: f64, y: f64) -> Self {
        P2 { x, y }
    }
    fn sub(self, o: P2) -> P2 {
        P2::new(self.x - o.x, self.y - o.y)
    }
    fn add(self, o: P2) -> P2 {
        P2::new(self.x + o.x, self.y + o.y)
    }
    fn scale(self, s: f64) -> P2 {
        P2::new(self.x * s, self.y * s)
    }
    fn dot(self, o: P2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    fn cross(self, o: P2) -> f64 {
        self.x * o.y - self.y * o.x
    }
    pub fn dist(self, o: P2) -> f64 {
        self.sub(o).dot(self.sub(o)).sqrt()
    }
    fn to3(self) -> Vec3 {
        Vec3::new(self.x, self.y, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Material {
    Window,
    ExteriorWall,
    /// Blocks any leg that crosses it.
    Opaque,
    /// Explicit penetration loss (dB).
    Custom(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: P2,
    pub b: P2,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub a: P2,
    pub b: P2,
    pub loss_db: f64,
}

/// Flat conductor of the same aperture as the surface array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetalSheet {
    pub center: P2,
    /// Direction of the normal from +x (deg).
    pub normal_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSite {
    pub name: String,
    pub center: P2,
    pub normal_deg: f64,
    /// Largest steering angle the surface accepts (deg).
    pub steer_range: f64,
}

impl SurfaceSite {
    pub fn pose(&self) -> SurfacePose {
        SurfacePose::planar(self.center.x, self.center.y, self.normal_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub pos: P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub window_db: f64,
    pub exterior_wall_db: f64,
}

impl Default for Losses {
    fn default() -> Self {
        Losses {
            window_db: 4.5,
            exterior_wall_db: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier {
    pub name: String,
    pub min_snr_db: f64,
}

pub fn default_tiers() -> Vec<Tier> {
    vec![
        Tier {
            name: "128-QAM".into(),
            min_snr_db: 24.0,
        },
        Tier {
            name: "64-QAM".into(),
            min_snr_db: 19.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Bounding polygon of the floor plan.
    pub room: Vec<P2>,
    #[serde(default)]
    pub segments: Vec<Segment>,
    #[serde(default)]
    pub reflectors: Vec<Reflector>,
    #[serde(default)]
    pub metal_sheets: Vec<MetalSheet>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceSite>,
    pub txs: Vec<Node>,
    pub rxs: Vec<Node>,
    #[serde(default)]
    pub losses: Losses,
    #[serde(default = "default_tiers")]
    pub tiers: Vec<Tier>,
    /// SNR (dB) below which a link counts as failed.
    #[serde(default = "default_outage")]
    pub outage_threshold_db: f64,
}

fn default_outage() -> f64 {
    10.0
}

const BUNDLED: &str = include_str!("../data/office.json");

impl Scenario {
    /// Approximate office testbed layout shipped with the crate.
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED).expect("bundled scenario parses")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("scenario: {e}")))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rxs.is_empty() {
            return Err(Error::Config("scenario has no receivers".into()));
        }
        for s in &self.segments {
            if let Material::Custom(l) = s.material {
                if !(l >= 0.0) {
                    return Err(Error::Config(format!("negative segment loss {l} dB")));
                }
            }
        }
        for r in &self.reflectors {
            if !(r.loss_db >= 0.0) {
                return Err(Error::Config(format!(
                    "negative reflection loss {} dB",
                    r.loss_db
                )));
            }
        }
        Ok(())
    }

    fn material_loss(&self, m: Material) -> Option<f64> {
        match m {
            Material::Window => Some(self.losses.window_db),
            Material::ExteriorWall => Some(self.losses.exterior_wall_db),
            Material::Opaque => None,
            Material::Custom(l) => Some(l),
        }
    }

    /// Total penetration loss along `p → q` (dB), `None` when blocked.
    pub fn leg_loss(&self, p: P2, q: P2) -> Option<f64> {
        let mut total = 0.0;
        for s in &self.segments {
            if let Some(t) = crossing(p, q, s.a, s.b) {
                if t > ENDPOINT_EPS && t < 1.0 - ENDPOINT_EPS {
                    total += self.material_loss(s.material)?;
                }
            }
        }
        Some(total)
    }
}

/// Parameter along `p → q` where it crosses segment `a–b`, if it does.
fn crossing(p: P2, q: P2, a: P2, b: P2) -> Option<f64> {
    let r = q.sub(p);
    let s = b.sub(a);
    let den = r.cross(s);
    if den.abs() < 1e-15 {
        return None;
    }
    let ap = a.sub(p);
    let t = ap.cross(s) / den;
    let u = ap.cross(r) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Specular point on segment `a–b` for `tx → rx`, if both lie on the same
/// side and the point falls within the segment.
fn specular_point(tx: P2, rx: P2, a: P2, b: P2) -> Option<P2> {
    let d = b.sub(a);
    let len2 = d.dot(d);
    let side = |p: P2| d.cross(p.sub(a));
    let (st, sr) = (side(tx), side(rx));
    if st * sr <= 0.0 {
        return None;
    }
    let foot = a.add(d.scale(tx.sub(a).dot(d) / len2));
    let image = foot.scale(2.0).sub(tx);
    let t = crossing(image, rx, a, b)?;
    Some(image.add(rx.sub(image).scale(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    LoS,
    EnvReflection,
    SurfaceLens,
    SurfaceMirror,
    MetalSheet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCandidate {
    pub kind: PathKind,
    /// Stable identity for blockage draws: 0 LoS, then reflectors, then
    /// surfaces, then metal sheets.
    pub slot: usize,
    /// Turning point (reflection point or surface centre).
    pub via: Option<P2>,
    /// Incidence and departure angles from the normal at `via` (deg).
    pub theta_in: Option<f64>,
    pub theta_out: Option<f64>,
    /// Surface steering command (deg), relayed paths only.
    pub steer: Option<f64>,
    pub snr: f64,
    pub blocked: bool,
}

/// Which candidates to consider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathOptions {
    /// Number of surfaces enabled, in scenario order.
    pub surfaces: usize,
    pub reflectors: bool,
    pub metal_sheets: bool,
}

impl PathOptions {
    pub fn all() -> Self {
        PathOptions {
            surfaces: usize::MAX,
            reflectors: true,
            metal_sheets: false,
        }
    }

    pub fn without_surfaces() -> Self {
        PathOptions {
            surfaces: 0,
            ..PathOptions::all()
        }
    }
}

/// Everything a path evaluation needs besides the floor plan.
#[derive(Debug, Clone)]
pub struct LinkContext<'a> {
    pub radio: RadioParams,
    pub array: SurfaceArray,
    pub tables: &'a ModeTables,
    pub q: f64,
}

impl<'a> LinkContext<'a> {
    pub fn new(tables: &'a ModeTables) -> Self {
        LinkContext {
            radio: RadioParams::default(),
            array: SurfaceArray::default(),
            tables,
            q: DEFAULT_Q,
        }
    }
}

fn off_normal(normal: P2, from: P2, to: P2) -> f64 {
    let d = to.sub(from);
    let c = (d.dot(normal) / d.dot(d).sqrt()).abs().min(1.0);
    c.acos().to_degrees()
}

fn surface_path(
    scn: &Scenario,
    ctx: &LinkContext,
    site: &SurfaceSite,
    slot: usize,
    tx: P2,
    rx: P2,
) -> Result<Option<PathCandidate>> {
    let c = site.center;
    let (Some(l1), Some(l2)) = (scn.leg_loss(tx, c), scn.leg_loss(c, rx)) else {
        return Ok(None);
    };
    let pose = site.pose();
    let n = P2::new(pose.normal.x, pose.normal.y);
    let (st, sr) = (n.dot(tx.sub(c)), n.dot(rx.sub(c)));
    if st == 0.0 || sr == 0.0 {
        return Ok(None);
    }
    let mode = if st * sr < 0.0 {
        Mode::Lens
    } else {
        Mode::Mirror
    };
    // Coherent relay needs column phase slope k·(s_i + s_s); a steering
    // command θ produces slope −k·sin θ.
    let g = pose.col_sine(tx.to3()) + pose.col_sine(rx.to3());
    if g.abs() > 1.0 {
        return Ok(None);
    }
    let theta = (-g).asin().to_degrees();
    if theta.abs() > site.steer_range {
        return Ok(None);
    }
    let geom = LinkGeometry {
        tx: tx.to3(),
        rx: rx.to3(),
        pose,
    };
    let lut = ctx.tables.get(mode);
    let base = (theta / STEER_STEP).floor() * STEER_STEP;
    let mut best: Option<(f64, f64)> = None;
    for cmd in [
        base - STEER_STEP,
        base,
        base + STEER_STEP,
        base + 2.0 * STEER_STEP,
    ] {
        if cmd.abs() > site.steer_range {
            continue;
        }
        let bc = steering_command(&ctx.array, lut, cmd)?;
        let coefs = expand_columns(&ctx.array, &bc.coefficients);
        let p = received_power_exact(&ctx.radio, &geom, &ctx.array, &coefs, ctx.q)?;
        if best.is_none_or(|(bp, _)| p > bp) {
            best = Some((p, cmd));
        }
    }
    let Some((p, cmd)) = best else {
        return Ok(None);
    };
    Ok(Some(PathCandidate {
        kind: if mode == Mode::Lens {
            PathKind::SurfaceLens
        } else {
            PathKind::SurfaceMirror
        },
        slot,
        via: Some(c),
        theta_in: Some(off_normal(n, c, tx)),
        theta_out: Some(off_normal(n, c, rx)),
        steer: Some(cmd),
        snr: p - l1 - l2 - ctx.radio.noise_floor_dbm,
        blocked: false,
    }))
}

fn sheet_path(
    scn: &Scenario,
    ctx: &LinkContext,
    sheet: &MetalSheet,
    slot: usize,
    tx: P2,
    rx: P2,
) -> Result<Option<PathCandidate>> {
    let a = sheet.normal_deg.to_radians();
    let n = P2::new(a.cos(), a.sin());
    let along = P2::new(a.sin(), -a.cos());
    let half = ctx.array.width() / 2.0;
    let (pa, pb) = (
        sheet.center.sub(along.scale(half)),
        sheet.center.add(along.scale(half)),
    );
    let Some(r) = specular_point(tx, rx, pa, pb) else {
        return Ok(None);
    };
    let (Some(l1), Some(l2)) = (scn.leg_loss(tx, r), scn.leg_loss(r, rx)) else {
        return Ok(None);
    };
    let (d_i, d_s) = (tx.dist(r), rx.dist(r));
    let (ti, ts) = (off_normal(n, r, tx), off_normal(n, r, rx));
    let nm = (ctx.array.n_cols * ctx.array.m_rows) as f64;
    let amp = ctx.array.cell_area() / (4.0 * std::f64::consts::PI * d_i * d_s);
    let f = element_pattern(ti, ctx.q) * element_pattern(ts, ctx.q);
    let lin = amp * amp * f * nm * nm;
    let rx_dbm = ctx.radio.p_t_dbm + ctx.radio.g_t_dbi + ctx.radio.g_r_dbi + to_db(lin);
    Ok(Some(PathCandidate {
        kind: PathKind::MetalSheet,
        slot,
        via: Some(r),
        theta_in: Some(ti),
        theta_out: Some(ts),
        steer: None,
        snr: rx_dbm - l1 - l2 - ctx.radio.noise_floor_dbm,
        blocked: false,
    }))
}

/// All geometrically valid paths from `tx` to `rx`.
pub fn enumerate_paths(
    scn: &Scenario,
    ctx: &LinkContext,
    tx: P2,
    rx: P2,
    opts: PathOptions,
) -> Result<Vec<PathCandidate>> {
    let noise = ctx.radio.noise_floor_dbm;
    let mut out = Vec::new();
    if let Some(l) = scn.leg_loss(tx, rx) {
        out.push(PathCandidate {
            kind: PathKind::LoS,
            slot: 0,
            via: None,
            theta_in: None,
            theta_out: None,
            steer: None,
            snr: friis(&ctx.radio, tx.dist(rx))? - l - noise,
            blocked: false,
        });
    }
    let nr = scn.reflectors.len();
    if opts.reflectors {
        for (i, refl) in scn.reflectors.iter().enumerate() {
            let Some(r) = specular_point(tx, rx, refl.a, refl.b) else {
                continue;
            };
            let (Some(l1), Some(l2)) = (scn.leg_loss(tx, r), scn.leg_loss(r, rx)) else {
                continue;
            };
            let d = refl.b.sub(refl.a);
            let n = P2::new(-d.y, d.x).scale(1.0 / d.dot(d).sqrt());
            out.push(PathCandidate {
                kind: PathKind::EnvReflection,
                slot: 1 + i,
                via: Some(r),
                theta_in: Some(off_normal(n, r, tx)),
                theta_out: Some(off_normal(n, r, rx)),
                steer: None,
                snr: friis(&ctx.radio, tx.dist(r) + r.dist(rx))? - refl.loss_db - l1 - l2 - noise,
                blocked: false,
            });
        }
    }
    let ns = scn.surfaces.len();
    for (j, site) in scn.surfaces.iter().enumerate().take(opts.surfaces) {
        if let Some(p) = surface_path(scn, ctx, site, 1 + nr + j, tx, rx)? {
            out.push(p);
        }
    }
    if opts.metal_sheets {
        for (k, sheet) in scn.metal_sheets.iter().enumerate() {
            if let Some(p) = sheet_path(scn, ctx, sheet, 1 + nr + ns + k, tx, rx)? {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Best unblocked candidate; `-inf` SNR when none exists.
pub fn best_of(paths: &[PathCandidate]) -> (f64, Option<&PathCandidate>) {
    let mut best: (f64, Option<&PathCandidate>) = (f64::NEG_INFINITY, None);
    for p in paths.iter().filter(|p| !p.blocked) {
        if p.snr > best.0 {
            best = (p.snr, Some(p));
        }
    }
    best
}

pub fn best_link_snr(
    scn: &Scenario,
    ctx: &LinkContext,
    tx: P2,
    rx: P2,
    with_surfaces: bool,
) -> Result<(f64, Option<PathCandidate>)> {
    let opts = if with_surfaces {
        PathOptions::all()
    } else {
        PathOptions::without_surfaces()
    };
    let paths = enumerate_paths(scn, ctx, tx, rx, opts)?;
    let (snr, p) = best_of(&paths);
    Ok((snr, p.cloned()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub rx: String,
    pub pos: P2,
    pub snr: f64,
    pub tier: Option<String>,
    pub path: Option<PathKind>,
}

pub fn tier_for(tiers: &[Tier], snr: f64) -> Option<String> {
    tiers
        .iter()
        .filter(|t| snr >= t.min_snr_db)
        .max_by(|a, b| a.min_snr_db.total_cmp(&b.min_snr_db))
        .map(|t| t.name.clone())
}

/// SNR and modulation tier at every receiver for one transmitter.
pub fn coverage_map(
    scn: &Scenario,
    ctx: &LinkContext,
    tx: P2,
    opts: PathOptions,
) -> Result<Vec<CoveragePoint>> {
    scn.rxs
        .par_iter()
        .map(|rx| {
            let paths = enumerate_paths(scn, ctx, tx, rx.pos, opts)?;
            let (snr, p) = best_of(&paths);
            Ok(CoveragePoint {
                rx: rx.name.clone(),
                pos: rx.pos,
                snr,
                tier: tier_for(&scn.tiers, snr),
                path: p.map(|p| p.kind),
            })
        })
        .collect()
}

/// Fraction of points with SNR at or above `threshold`.
pub fn coverage_fraction(points: &[CoveragePoint], threshold: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    points.iter().filter(|p| p.snr >= threshold).count() as f64 / points.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockageEstimate {
    pub beta: f64,
    pub surfaces: usize,
    pub failure_rate: f64,
    /// Half-width of the 95% confidence interval.
    pub ci95: f64,
}

/// Per-link candidate SNRs by slot, computed once for Monte-Carlo reuse.
#[derive(Debug, Clone)]
struct LinkCandidates {
    /// (slot, snr, surface index if relayed)
    paths: Vec<(usize, f64, Option<usize>)>,
}

/// Monte-Carlo link failure rate over all transmitter/receiver pairs.
///
/// Each trial draws one uniform number per (link, path slot) from a stream
/// keyed by `(seed, trial)`; a path is blocked when its number is below β.
/// The same numbers serve every β and surface count, so estimates are
/// monotone in β and nested across configurations by construction.
pub fn blockage_failure_rate(
    scn: &Scenario,
    ctx: &LinkContext,
    betas: &[f64],
    surface_counts: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<BlockageEstimate>> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    for &b in betas {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Invalid(format!(
                "blockage probability {b} outside [0, 1]"
            )));
        }
    }
    let nr = scn.reflectors.len();
    let slots = 1 + nr + scn.surfaces.len();
    let mut links = Vec::new();
    for tx in &scn.txs {
        for rx in &scn.rxs {
            let paths = enumerate_paths(scn, ctx, tx.pos, rx.pos, PathOptions::all())?;
            links.push(LinkCandidates {
                paths: paths
                    .iter()
                    .map(|p| {
                        let surf = (p.slot > nr).then(|| p.slot - 1 - nr);
                        (p.slot, p.snr, surf)
                    })
                    .collect(),
            });
        }
    }
    let thr = scn.outage_threshold_db;
    let nconf = betas.len() * surface_counts.len();
    // Per trial: failed-link count per (beta, config).
    let per_trial: Vec<Vec<u32>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut fails = vec![0u32; nconf];
            let mut u = vec![0.0f64; slots];
            for link in &links {
                for v in u.iter_mut() {
                    *v = rng.random::<f64>();
                }
                for (bi, &beta) in betas.iter().enumerate() {
                    for (ci, &k) in surface_counts.iter().enumerate() {
                        let ok = link.paths.iter().any(|&(slot, snr, surf)| {
                            surf.is_none_or(|s| s < k) && snr >= thr && !(u[slot] < beta)
                        });
                        if !ok {
                            fails[bi * surface_counts.len() + ci] += 1;
                        }
                    }
                }
            }
            fails
        })
        .collect();
    let nl = links.len().max(1) as f64;
    let mut out = Vec::with_capacity(nconf);
    for (bi, &beta) in betas.iter().enumerate() {
        for (ci, &k) in surface_counts.iter().enumerate() {
            let idx = bi * surface_counts.len() + ci;
            let xs: Vec<f64> = per_trial.iter().map(|f| f[idx] as f64 / nl).collect();
            let mean = xs.iter().sum::<f64>() / trials as f64;
            let var = if trials > 1 {
                xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
            } else {
                0.0
            };
            out.push(BlockageEstimate {
                beta,
                surfaces: k,
                failure_rate: mean,
                ci95: 1.96 * (var / trials as f64).sqrt(),
            });
        }
    }
    Ok(out)
}

/// Fraction of links in outage with no blockage.
pub fn outage_fraction(scn: &Scenario, ctx: &LinkContext, surfaces: usize) -> Result<f64> {
    let mut fails = 0usize;
    let mut total = 0usize;
    let opts = PathOptions {
        surfaces,
        ..PathOptions::all()
    };
    for tx in &scn.txs {
        for rx in &scn.rxs {
            let paths = enumerate_paths(scn, ctx, tx.pos, rx.pos, opts)?;
            if best_of(&paths).0 < scn.outage_threshold_db {
                fails += 1;
            }
            total += 1;
        }
    }
    Ok(fails as f64 / total.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_detects_interior_hits() {
        let t = crossing(
            P2::new(0.0, -1.0),
            P2::new(0.0, 1.0),
            P2::new(-1.0, 0.0),
            P2::new(1.0, 0.0),
        );
        assert_eq!(t, Some(0.5));
        assert!(crossing(
            P2::new(2.0, -1.0),
            P2::new(2.0, 1.0),
            P2::new(-1.0, 0.0),
            P2::new(1.0, 0.0)
        )
        .is_none());
    }

    #[test]
    fn specular_point_obeys_mirror_law() {
        let (a, b) = (P2::new(-5.0, 0.0), P2::new(5.0, 0.0));
        let r = specular_point(P2::new(-1.0, 2.0), P2::new(3.0, 1.0), a, b).unwrap();
        let n = P2::new(0.0, 1.0);
        let ti = off_normal(n, r, P2::new(-1.0, 2.0));
        let ts = off_normal(n, r, P2::new(3.0, 1.0));
        assert!((ti - ts).abs() < 1e-9);
        assert!(specular_point(P2::new(0.0, 1.0), P2::new(0.0, -1.0), a, b).is_none());
    }

    #[test]
    fn tiers_pick_highest_met_threshold() {
        let t = default_tiers();
        assert_eq!(tier_for(&t, 30.0).as_deref(), Some("128-QAM"));
        assert_eq!(tier_for(&t, 20.0).as_deref(), Some("64-QAM"));
        assert_eq!(tier_for(&t, 5.0), None);
    }

    #[test]
    fn bundled_scenario_is_valid() {
        let s = Scenario::bundled();
        s.validate().unwrap();
        assert_eq!(s.rxs.len(), 23);
    }
}
