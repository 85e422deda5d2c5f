//! End-to-end acceptance checks, shared by the test suite and `selftest`.
//!
//! Each check returns a [`Criterion`] rather than panicking so callers can
//! report every result before deciding the exit status.

use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beam::{
    angle_grid, multibeam_command, peak_detect, radiation_pattern, steering_command, Arm,
    SurfaceArray,
};
use crate::budget::{
    aperture_capacity, expand_columns, friis, matched_coefficients, received_power_exact,
    received_power_farfield, surface_gain, surface_path_loss, LinkGeometry, RadioParams,
    SurfacePose,
};
use crate::cell::{
    loop_inductance, resonant_frequency, strip_inductance, varactor_capacitance, CellModel, Side,
    UnitCellGeometry,
};
use crate::config::RunConfig;
use crate::consts::{from_db, wavelength};
use crate::error::{Error, Result};
use crate::lut::{bandwidth_profile, linspace, HuygensPattern, Mode, ModeTables};
use crate::protocol::{
    cold_start_align, multiarm_search, refine_align, steady_state_align, uplink_from_downlink,
    LinkTruth, Session,
};
use crate::scenario::{blockage_failure_rate, coverage_map, LinkContext, PathOptions};

pub const COUNT: u8 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Pattern and tables built once and shared by every check.
pub struct Fixture {
    pub cfg: RunConfig,
    pub pattern: HuygensPattern,
    pub tables: ModeTables,
}

impl Fixture {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let (pattern, tables) = cfg.tables()?;
        Ok(Fixture {
            cfg,
            pattern,
            tables,
        })
    }
}

pub fn name(id: u8) -> &'static str {
    match id {
        1 => "energy conservation",
        2 => "phase coverage",
        3 => "steering accuracy",
        4 => "two-beam splits",
        5 => "path-loss scaling",
        6 => "aperture capacity bound",
        7 => "reciprocity",
        8 => "exact vs far-field",
        9 => "beam-search probe counts",
        10 => "coverage and blockage",
        11 => "phase bandwidth",
        12 => "golden values",
        _ => "unknown",
    }
}

/// Runs one check; errors count as failures.
pub fn run(id: u8, fx: &Fixture) -> Criterion {
    let t0 = Instant::now();
    let out = match id {
        1 => energy_conservation(),
        2 => phase_coverage(fx),
        3 => steering_accuracy(fx),
        4 => two_beam_splits(fx),
        5 => path_loss_scaling(fx),
        6 => capacity_bound(fx),
        7 => reciprocity(fx),
        8 => farfield_agreement(fx),
        9 => probe_counts(fx),
        10 => coverage_and_blockage(fx),
        11 => phase_bandwidth(fx),
        12 => golden_values(),
        _ => Err(Error::Invalid(format!("no criterion {id}"))),
    };
    let (passed, detail) = match out {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Criterion {
        id,
        name: name(id),
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn run_all(cfg: RunConfig) -> Result<Vec<Criterion>> {
    let fx = Fixture::new(cfg)?;
    Ok((1..=COUNT).map(|id| run(id, &fx)).collect())
}

type Outcome = Result<(bool, String)>;

fn modes() -> [Mode; 2] {
    [Mode::Lens, Mode::Mirror]
}

fn random_geometry(rng: &mut ChaCha8Rng, side: Side) -> UnitCellGeometry {
    let r = rng.random_range(1.0e-3..6.0e-3);
    UnitCellGeometry {
        r,
        w: rng.random_range(20e-6..200e-6),
        g: rng.random_range(0.0..300e-6),
        t: rng.random_range(10e-6..70e-6),
        eps_r: rng.random_range(1.0..10.0),
        side,
    }
}

fn energy_conservation() -> Outcome {
    const N: usize = 100_000;
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut poles, mut checked) = (0.0f64, 0usize, 0usize);
    for _ in 0..N {
        let model = CellModel {
            magnetic: random_geometry(&mut rng, Side::Magnetic),
            electric: random_geometry(&mut rng, Side::Electric),
            ..CellModel::default()
        };
        let f = rng.random_range(10e9..40e9);
        let (um, ue) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        match model.coefficient(f, um, ue) {
            Ok(c) => {
                checked += 1;
                worst = worst.max((c.t_coef.norm_sqr() + c.gamma_coef.norm_sqr() - 1.0).abs());
            }
            Err(Error::Pole { .. }) => poles += 1,
            Err(e) => return Err(e),
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst < 1e-9 && secs < 1.0 && checked + poles == N,
        format!("{checked} cells, {poles} exact poles skipped, worst |T|²+|Γ|²-1 = {worst:.2e}, {secs:.3} s"),
    ))
}

fn phase_coverage(fx: &Fixture) -> Outcome {
    let again = Fixture::new(fx.cfg.clone())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in modes() {
        let t = fx.tables.get(m);
        let same = t.to_json("", "") == again.tables.get(m).to_json("", "");
        ok &= t.bins() == 24 && t.flagged_count() == 0 && same;
        parts.push(format!(
            "{m:?}: {} bins, {} flagged, min |C| {:.3}, rerun identical {same}",
            t.bins(),
            t.flagged_count(),
            t.min_magnitude()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn steering_accuracy(fx: &Fixture) -> Outcome {
    let t0 = Instant::now();
    let array = fx.cfg.array;
    let grid = angle_grid(-90.0, 90.0, 0.5);
    let mut worst = 0.0f64;
    for m in modes() {
        for cmd in angle_grid(-60.0, 60.0, 5.0) {
            let c = steering_command(&array, fx.tables.get(m), cmd)?;
            let p = radiation_pattern(&array, &c.coefficients, 0.0, &grid, fx.cfg.q);
            let peak = peak_detect(&p, 1)
                .first()
                .map(|p| p.angle)
                .ok_or(Error::EmptyPattern)?;
            worst = worst.max((peak - cmd).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst <= 3.0 && secs < 10.0,
        format!("worst peak error {worst:.2} deg, {secs:.2} s"),
    ))
}

fn two_beam_splits(fx: &Fixture) -> Outcome {
    let array = fx.cfg.array;
    let grid = angle_grid(-90.0, 90.0, 0.5);
    let (mut worst_err, mut worst_imb) = (0.0f64, 0.0f64);
    let mut ok = true;
    for m in modes() {
        for (a, b) in [(-45.0, 15.0), (-30.0, 30.0), (-15.0, 45.0)] {
            let arms = [
                Arm {
                    angle: a,
                    weight: 1.0,
                },
                Arm {
                    angle: b,
                    weight: 1.0,
                },
            ];
            let c = multibeam_command(&array, fx.tables.get(m), arms)?;
            let p = radiation_pattern(&array, &c.coefficients, 0.0, &grid, fx.cfg.q);
            let peaks = peak_detect(&p, 2);
            if peaks.len() < 2 {
                ok = false;
                continue;
            }
            let (mut lo, mut hi) = (peaks[0], peaks[1]);
            if lo.angle > hi.angle {
                std::mem::swap(&mut lo, &mut hi);
            }
            worst_err = worst_err
                .max((lo.angle - a).abs())
                .max((hi.angle - b).abs());
            worst_imb = worst_imb.max((lo.power_db - hi.power_db).abs());
        }
    }
    ok &= worst_err <= 3.0 && worst_imb <= 1.0;
    Ok((
        ok,
        format!("worst arm error {worst_err:.2} deg, worst arm imbalance {worst_imb:.2} dB"),
    ))
}

fn ones(array: &SurfaceArray) -> Vec<Complex64> {
    vec![Complex64::new(1.0, 0.0); array.n_cols * array.m_rows]
}

fn path_loss_scaling(fx: &Fixture) -> Outcome {
    let a = fx.cfg.array;
    let b = SurfaceArray {
        n_cols: 2 * a.n_cols,
        m_rows: 2 * a.m_rows,
        ..a
    };
    let q = fx.cfg.q;
    let la = surface_path_loss(3.0, 3.0, 0.0, 0.0, &a, &ones(&a), q)?;
    let lb = surface_path_loss(3.0, 3.0, 0.0, 0.0, &b, &ones(&b), q)?;
    let delta = la - lb;
    Ok((
        (delta - 12.04).abs() <= 0.2,
        format!("doubling N and M gains {delta:.4} dB"),
    ))
}

fn capacity_bound(fx: &Fixture) -> Outcome {
    let base = fx.cfg.array;
    let lambda = base.wavelength();
    let lut = fx.tables.get(Mode::Lens);
    let mut ok = true;
    let mut worst_gap = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for cm in [10, 20, 30, 40, 50] {
        let size = cm as f64 / 100.0;
        let array = SurfaceArray {
            n_cols: (size / base.col_spacing).round() as usize,
            m_rows: (size / base.row_spacing).round() as usize,
            ..base
        };
        let cap = aperture_capacity(array.area(), lambda)?;
        for cmd in angle_grid(-60.0, 60.0, 15.0) {
            let c = expand_columns(&array, &steering_command(&array, lut, cmd)?.coefficients);
            let g = surface_gain(&array, &c, cmd, fx.cfg.q, lambda);
            ok &= g <= cap + 1e-6;
            worst_margin = worst_margin.min(cap - g);
            if cmd == 0.0 {
                worst_gap = worst_gap.max(cap - g);
            }
        }
    }
    ok &= worst_gap <= 3.0;
    Ok((
        ok,
        format!("closest approach to capacity {worst_margin:.3} dB, broadside shortfall at most {worst_gap:.3} dB"),
    ))
}

fn reciprocity(fx: &Fixture) -> Outcome {
    let array = fx.cfg.array;
    let radio = fx.cfg.radio;
    let mut worst = 0.0f64;
    for m in modes() {
        for cmd in [-40.0, 0.0, 25.0] {
            let c = expand_columns(
                &array,
                &steering_command(&array, fx.tables.get(m), cmd)?.coefficients,
            );
            for (di, ds, ti, ts) in [
                (2.0, 5.0, 10.0, -30.0),
                (4.0, 1.5, -50.0, 20.0),
                (3.0, 3.0, 0.0, 45.0),
            ] {
                let p = from_db(received_power_farfield(
                    &radio, di, ds, ti, ts, &array, &c, fx.cfg.q,
                )?);
                let r = from_db(received_power_farfield(
                    &radio, ds, di, ts, ti, &array, &c, fx.cfg.q,
                )?);
                worst = worst.max(((p - r) / p).abs());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut exact, mut zero) = (true, true);
    for k in 0..10 {
        let mode = if k % 2 == 0 { Mode::Lens } else { Mode::Mirror };
        let truth = LinkTruth::random(&mut rng, 55.0, mode, 4.0, 3.0);
        let mut s = Session::new(fx.cfg.protocol, truth, &fx.tables, k);
        s.array = array;
        s.q = fx.cfg.q;
        let down = steady_state_align(&mut s, truth.enodeb_angle, 25, 25)?;
        let up = uplink_from_downlink(&mut s, &down)?;
        exact &= up.achieved_snr == down.achieved_snr;
        zero &= up.probes_used == 0;
    }
    Ok((
        worst <= 1e-9 && exact && zero,
        format!("far-field swap relative error {worst:.1e}; uplink SNR identical {exact}, zero probes {zero}"),
    ))
}

/// `|exact − far-field|` (dB) at `k` aperture lengths, each with its own
/// matched coefficients.
pub fn farfield_gap(fx: &Fixture, k: f64) -> Result<f64> {
    let array = fx.cfg.array;
    let radio = fx.cfg.radio;
    let d = k * array.extent();
    let pose = SurfacePose::planar(0.0, 0.0, 90.0);
    let at = |theta: f64| {
        let t = theta.to_radians();
        pose.origin
            .add(pose.col_axis.scale(d * t.sin()))
            .add(pose.normal.scale(d * t.cos()))
    };
    let (ti, ts) = (20.0, -35.0);
    let geom = LinkGeometry {
        tx: at(ti),
        rx: at(ts),
        pose,
    };
    let matched = matched_coefficients(&geom, &array, radio.wavelength())?;
    let exact = received_power_exact(&radio, &geom, &array, &matched, fx.cfg.q)?;
    Ok((exact - farfield_matched(fx, d, ti, ts)?).abs())
}

/// Far-field power with coefficients that cancel the plane-wave phase.
fn farfield_matched(fx: &Fixture, d: f64, ti: f64, ts: f64) -> Result<f64> {
    let array = fx.cfg.array;
    let k = array.wavenumber();
    let g = ti.to_radians().sin() + ts.to_radians().sin();
    let n0 = (array.n_cols as f64 - 1.0) / 2.0;
    let cols: Vec<Complex64> = (0..array.n_cols)
        .map(|n| Complex64::from_polar(1.0, k * (n as f64 - n0) * array.col_spacing * g))
        .collect();
    received_power_farfield(
        &fx.cfg.radio,
        d,
        d,
        ti,
        ts,
        &array,
        &expand_columns(&array, &cols),
        fx.cfg.q,
    )
}

fn farfield_agreement(fx: &Fixture) -> Outcome {
    let ks = [5.0, 10.0, 20.0, 40.0];
    let gaps = ks
        .iter()
        .map(|&k| farfield_gap(fx, k))
        .collect::<Result<Vec<_>>>()?;
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok((
        gaps[2] <= 0.1 && monotone,
        format!(
            "gap at 5/10/20/40x aperture: {}",
            gaps.iter()
                .map(|g| format!("{g:.4}"))
                .collect::<Vec<_>>()
                .join("/")
        ),
    ))
}

fn probe_counts(fx: &Fixture) -> Outcome {
    let p = fx.cfg.protocol;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let session = |truth: LinkTruth, seed: u64| {
        let mut s = Session::new(p, truth, &fx.tables, seed);
        s.array = fx.cfg.array;
        s.q = fx.cfg.q;
        s
    };
    let truth = LinkTruth::random(&mut rng, 55.0, Mode::Lens, 4.0, 3.0);
    let n = 10;
    let cold = cold_start_align(&mut session(truth, 0), n, n, n)?.probes_used;
    let steady = steady_state_align(&mut session(truth, 0), truth.enodeb_angle, n, n)?.probes_used;
    let mut counts_ok = cold == n * n * n && steady == n * n;

    let (n_w, n_u) = (64, 25);
    let bound = 2 * (n_w as f64).log2().ceil() as usize;
    let (mut cold_ok, mut multi_ok, mut max_search, mut worst_gap) = (0, 0, 0, 0.0f64);
    let trials = 100;
    for k in 0..trials {
        let mode = if k % 2 == 0 { Mode::Lens } else { Mode::Mirror };
        let truth = LinkTruth::random(&mut rng, 55.0, mode, 4.0, 3.0);
        let mut s = session(truth, k as u64);
        let coarse = cold_start_align(&mut s, 25, 25, 25)?;
        let exhaustive = refine_align(&mut s, &coarse, p.refine_levels)?;
        cold_ok += exhaustive.success as usize;

        let mut s = session(truth, k as u64);
        let coarse = multiarm_search(&mut s, truth.enodeb_angle, n_w, n_u)?;
        let refined = refine_align(&mut s, &coarse, p.refine_levels)?;
        let refine_cost = p.refine_levels * 3 * p.refine_beams;
        counts_ok &= coarse.fell_back || coarse.search_probes <= bound;
        counts_ok &= refined.probes_used == coarse.probes_used + refine_cost;
        max_search = max_search.max(coarse.search_probes);
        if refined.success && !coarse.fell_back {
            multi_ok += 1;
            worst_gap = worst_gap.max(exhaustive.achieved_snr - refined.achieved_snr);
        }
    }
    Ok((
        counts_ok && cold_ok == trials && multi_ok == trials && worst_gap <= 1.0,
        format!(
            "cold {cold}, steady {steady} (n = {n}); multi-arm search at most {max_search} probes (bound {bound}); \
             {cold_ok}/{trials} exhaustive and {multi_ok}/{trials} multi-arm trials within 3 deg; \
             multi-arm worst shortfall vs exhaustive {worst_gap:.2} dB"
        ),
    ))
}

/// Share of all transmitter/receiver pairs at or above `threshold` dB.
pub fn pooled_coverage(fx: &Fixture, opts: PathOptions, threshold: f64) -> Result<f64> {
    let scn = fx.cfg.scenario()?;
    let ctx = link_context(fx);
    let (mut hit, mut total) = (0usize, 0usize);
    for tx in &scn.txs {
        for p in coverage_map(&scn, &ctx, tx.pos, opts)? {
            total += 1;
            hit += (p.snr >= threshold) as usize;
        }
    }
    Ok(hit as f64 / total.max(1) as f64)
}

fn link_context(fx: &Fixture) -> LinkContext<'_> {
    LinkContext {
        radio: fx.cfg.radio,
        array: fx.cfg.array,
        tables: &fx.tables,
        q: fx.cfg.q,
    }
}

/// Coverage threshold for the surface/sheet comparison (dB).
pub const COVERAGE_THRESHOLD_DB: f64 = 30.0;

fn coverage_and_blockage(fx: &Fixture) -> Outcome {
    let t0 = Instant::now();
    let scn = fx.cfg.scenario()?;
    let ctx = link_context(fx);
    let sim = &fx.cfg.sim;
    let counts: Vec<usize> = (0..=scn.surfaces.len()).collect();
    let est = blockage_failure_rate(&scn, &ctx, &sim.betas, &counts, sim.trials, sim.seed)?;
    let rate = |bi: usize, k: usize| est[bi * counts.len() + k].failure_rate;
    let mut monotone = true;
    let mut nested = true;
    for k in 0..counts.len() {
        for bi in 1..sim.betas.len() {
            monotone &= rate(bi, k) >= rate(bi - 1, k);
        }
    }
    for bi in 0..sim.betas.len() {
        for k in 1..counts.len() {
            nested &= rate(bi, k) <= rate(bi, 0);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let surface = pooled_coverage(
        fx,
        PathOptions {
            surfaces: 1,
            reflectors: true,
            metal_sheets: false,
        },
        COVERAGE_THRESHOLD_DB,
    )?;
    let sheet = pooled_coverage(
        fx,
        PathOptions {
            surfaces: 0,
            reflectors: true,
            metal_sheets: true,
        },
        COVERAGE_THRESHOLD_DB,
    )?;
    Ok((
        monotone && nested && sheet < surface && secs < 60.0,
        format!(
            "{} trials in {secs:.2} s; monotone in beta {monotone}; surfaces never worse {nested}; \
             coverage at {COVERAGE_THRESHOLD_DB} dB: surface {surface:.3}, metal sheet {sheet:.3}",
            sim.trials
        ),
    ))
}

fn phase_bandwidth(fx: &Fixture) -> Outcome {
    let c = fx.cfg.lut.center_freq;
    let w = fx.cfg.lut.bandwidth_window;
    let freqs = linspace(c - w, c + w, 21);
    let mut worst = 0.0f64;
    for m in modes() {
        let prof = bandwidth_profile(&fx.cfg.cell, fx.tables.get(m), &freqs, w)?;
        worst = worst.max(prof.worst_phase_dev());
    }
    Ok((
        worst <= 15.0,
        format!(
            "worst entry phase drift {worst:.2} deg over ±{:.0} MHz",
            w / 1e6
        ),
    ))
}

struct Golden {
    name: &'static str,
    got: f64,
    want: f64,
}

fn golden_values() -> Outcome {
    let cell = CellModel::default();
    let c_var = varactor_capacitance(&cell.varactor, 4.0)?;
    let (mag, elec) = cell.circuits(4.0, 4.0)?;
    let lambda = wavelength(24.5e9);
    let e = &cell.electric;
    let radio0 = RadioParams {
        p_t_dbm: 0.0,
        g_t_dbi: 0.0,
        g_r_dbi: 0.0,
        ..RadioParams::default()
    };
    let array = SurfaceArray::default();
    let incr = crate::beam::steering_phases(&array, 30.0)[1];
    let p = 1.0 - e.g / (2.0 * std::f64::consts::PI * e.r);
    let table = [
        Golden {
            name: "C_var(4 V)",
            got: c_var,
            want: 2.525894366e-15,
        },
        Golden {
            name: "L_m",
            got: mag.l,
            want: 1.987877099e-8,
        },
        Golden {
            name: "C_m",
            got: mag.c,
            want: 2.122562607e-15,
        },
        Golden {
            name: "f_m",
            got: resonant_frequency(&mag),
            want: 24.50163760e9,
        },
        Golden {
            name: "L_e",
            got: elec.l,
            want: 1.819438391e-8,
        },
        Golden {
            name: "C_e",
            got: elec.c,
            want: 2.319453288e-15,
        },
        Golden {
            name: "f_e",
            got: resonant_frequency(&elec),
            want: 24.49958000e9,
        },
        Golden {
            name: "L_strip",
            got: strip_inductance(2.0 * e.r, e.w),
            want: 1.077096871e-8,
        },
        Golden {
            name: "L_curve",
            got: p * loop_inductance(e.r, e.t, e.w)? / 2.0,
            want: 1.484683039e-8,
        },
        Golden {
            name: "wavelength",
            got: lambda,
            want: 0.012236426857,
        },
        Golden {
            name: "column increment at 30 deg",
            got: incr,
            want: -38.24646,
        },
        Golden {
            name: "1 m Friis",
            got: friis(&radio0, 1.0)?,
            want: -60.23110,
        },
        Golden {
            name: "capacity 0.02 m²",
            got: aperture_capacity(0.02, lambda)?,
            want: 32.24931,
        },
        Golden {
            name: "path loss 3 m/3 m broadside",
            got: surface_path_loss(3.0, 3.0, 0.0, 0.0, &array, &ones(&array), 0.5611)?,
            want: 73.99948,
        },
        Golden {
            name: "F(60 deg)",
            got: crate::beam::element_pattern(60.0, 0.5611),
            want: 0.677785181,
        },
    ];
    let bad: Vec<String> = table
        .iter()
        .filter(|g| !(((g.got - g.want) / g.want).abs() < 1e-4))
        .map(|g| format!("{} = {:.6e} (want {:.6e})", g.name, g.got, g.want))
        .collect();
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} values match to 4 significant figures", table.len())
        } else {
            bad.join("; ")
        },
    ))
}
