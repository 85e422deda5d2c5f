//! One function per subcommand. Each renders its outputs into a [`Bundle`].

use std::path::{Path, PathBuf};

use log::info;
use metarelay_core::acceptance;
use metarelay_core::beam::{
    angle_grid, multibeam_command, peak_detect, radiation_pattern, scan_grating_lobes,
    steering_command, Arm,
};
use metarelay_core::budget::{
    expand_columns, friis, matched_coefficients, received_power_exact, received_power_farfield,
    surface_path_loss, LinkGeometry, SurfacePose, Vec3,
};
use metarelay_core::config::RunConfig;
use metarelay_core::lut::{bandwidth_profile, linspace, Mode, PhaseLookupTable};
use metarelay_core::protocol::{
    cold_start_align, multiarm_search, refine_align, steady_state_align, uplink_from_downlink,
    AlignmentResult, LinkTruth, Session, TraceEvent,
};
use metarelay_core::scenario::{
    blockage_failure_rate, coverage_fraction, coverage_map, BlockageEstimate, LinkContext,
    PathOptions,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::output::{num, Bundle};
use crate::{CliError, ModeArg, SearchArg};

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("config: {}: {e}", path.display())))
}

pub fn pattern(cfg: &RunConfig, out: &mut Bundle) -> Result<(), CliError> {
    let freqs = cfg.sweep_freqs();
    info!("sweeping {} frequencies", freqs.len());
    let p = cfg.pattern(&freqs)?;
    let mut rows = Vec::with_capacity(p.coefs.len());
    for (fi, f) in p.freqs.iter().enumerate() {
        for (i, um) in p.u_m.iter().enumerate() {
            for (j, ue) in p.u_e.iter().enumerate() {
                let c = p.get(fi, i, j);
                rows.push(vec![
                    num(*f),
                    num(*um),
                    num(*ue),
                    num(c.t_coef.norm()),
                    num(c.t_coef.arg().to_degrees()),
                    num(c.gamma_coef.norm()),
                    num(c.gamma_coef.arg().to_degrees()),
                ]);
            }
        }
    }
    out.csv(
        "pattern.csv",
        &[
            "freq_hz",
            "u_m_v",
            "u_e_v",
            "t_mag",
            "t_phase_deg",
            "gamma_mag",
            "gamma_phase_deg",
        ],
        rows,
    )?;
    Ok(())
}

#[derive(Serialize)]
struct LutSummary {
    mode: Mode,
    bins: usize,
    flagged: usize,
    min_magnitude: f64,
    bandwidth_window_hz: f64,
    worst_phase_dev_deg: f64,
}

pub fn lut(cfg: &RunConfig, out: &mut Bundle) -> Result<(), CliError> {
    let (_, tables) = cfg.tables()?;
    let f0 = cfg.lut.center_freq;
    let w = cfg.lut.bandwidth_window;
    let freqs = linspace(f0 - w, f0 + w, 21);
    let mut summary = Vec::new();
    for m in [Mode::Lens, Mode::Mirror] {
        let t = tables.get(m);
        let name = format!("lut_{}.json", mode_name(m));
        let mut s = t.to_json(out.config_hash(), crate::output::VERSION);
        s.push('\n');
        out.raw(&name, s.into_bytes());
        let bw = bandwidth_profile(&cfg.cell, t, &freqs, w)?;
        summary.push(LutSummary {
            mode: m,
            bins: t.bins(),
            flagged: t.flagged_count(),
            min_magnitude: t.min_magnitude(),
            bandwidth_window_hz: w,
            worst_phase_dev_deg: bw.worst_phase_dev(),
        });
    }
    out.json("lut_summary.json", "lut_summary", &summary)?;
    Ok(())
}

pub struct BeamArgs {
    pub lut: Option<PathBuf>,
    pub mode: ModeArg,
    pub arms: Vec<Arm>,
    pub theta_i: f64,
    pub grid: (f64, f64, f64),
}

#[derive(Serialize)]
struct BeamSummary {
    mode: Mode,
    arms: Vec<Arm>,
    theta_i: f64,
    peaks: Vec<metarelay_core::beam::Peak>,
    amplitude_error: f64,
    grating_lobes: Vec<f64>,
    per_column_phase_deg: Vec<f64>,
    controls: Vec<metarelay_core::lut::ControlState>,
}

pub fn beam(cfg: &RunConfig, args: &BeamArgs, out: &mut Bundle) -> Result<(), CliError> {
    let mode: Mode = args.mode.into();
    let table: PhaseLookupTable = match &args.lut {
        Some(p) => PhaseLookupTable::from_json(&read_input(p)?)
            .map_err(|e| CliError::Config(e.to_string()))?,
        None => cfg.tables()?.1.get(mode).clone(),
    };
    if table.mode != mode {
        return Err(CliError::Config(format!(
            "config: LUT is for {:?} mode but {:?} was requested",
            table.mode, mode
        )));
    }
    let a = &cfg.array;
    let cmd = match args.arms.as_slice() {
        [] => steering_command(a, &table, 0.0)?,
        [one] => steering_command(a, &table, one.angle)?,
        [x, y] => multibeam_command(a, &table, [*x, *y])?,
        _ => {
            return Err(CliError::Config(
                "config: at most two arms are supported".into(),
            ))
        }
    };
    let (lo, hi, step) = args.grid;
    if !(step > 0.0 && hi >= lo) {
        return Err(CliError::Config(format!(
            "config: bad angle grid {lo}:{hi}:{step}"
        )));
    }
    let angles = angle_grid(lo, hi, step);
    let pat = radiation_pattern(a, &cmd.coefficients, args.theta_i, &angles, cfg.q);
    let arms = cmd.arms.iter().filter(|x| x.weight > 0.0).count().max(1);
    let mut grating = Vec::new();
    for arm in &cmd.arms {
        grating.extend(scan_grating_lobes(a, arm.angle));
    }
    out.csv(
        "beam_pattern.csv",
        &["angle_deg", "power_db"],
        pat.angles
            .iter()
            .zip(&pat.power_db)
            .map(|(t, p)| vec![num(*t), num(*p)]),
    )?;
    out.json(
        "beam_summary.json",
        "beam",
        &BeamSummary {
            mode,
            arms: cmd.arms.clone(),
            theta_i: args.theta_i,
            peaks: peak_detect(&pat, arms),
            amplitude_error: cmd.amplitude_error(),
            grating_lobes: grating,
            per_column_phase_deg: cmd.per_column_phase.clone(),
            controls: cmd.controls.clone(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct BudgetReport {
    geometry: LinkGeometry,
    d_i_m: f64,
    d_s_m: f64,
    theta_i_deg: f64,
    theta_s_deg: f64,
    exact_dbm: f64,
    farfield_dbm: f64,
    path_loss_db: f64,
    direct_dbm: f64,
    surface_snr_db: f64,
    direct_snr_db: f64,
}

/// Tx 3 m in front of a broadside surface, Rx 3 m behind it.
fn default_geometry() -> LinkGeometry {
    LinkGeometry {
        tx: Vec3::new(0.0, -3.0, 0.0),
        rx: Vec3::new(0.0, 3.0, 0.0),
        pose: SurfacePose::planar(0.0, 0.0, 90.0),
    }
}

pub fn budget(cfg: &RunConfig, geometry: Option<&Path>, out: &mut Bundle) -> Result<(), CliError> {
    let geom: LinkGeometry = match geometry {
        Some(p) => serde_json::from_str(&read_input(p)?)
            .map_err(|e| CliError::Config(format!("config: {}: {e}", p.display())))?,
        None => default_geometry(),
    };
    let (a, r) = (&cfg.array, &cfg.radio);
    let lambda = r.wavelength();
    let matched = matched_coefficients(&geom, a, lambda)?;
    let exact = received_power_exact(r, &geom, a, &matched, cfg.q)?;

    // Signed angles along the column axis for the plane-wave model.
    let signed = |p: Vec3| geom.pose.col_sine(p).clamp(-1.0, 1.0).asin().to_degrees();
    let (ti, ts) = (signed(geom.tx), signed(geom.rx));
    let (di, ds) = (geom.d_i(), geom.d_s());
    let k = 2.0 * std::f64::consts::PI / lambda;
    let g = ti.to_radians().sin() + ts.to_radians().sin();
    let n0 = (a.n_cols as f64 - 1.0) / 2.0;
    let cols: Vec<Complex64> = (0..a.n_cols)
        .map(|n| Complex64::from_polar(1.0, k * (n as f64 - n0) * a.col_spacing * g))
        .collect();
    let ideal = expand_columns(a, &cols);
    let farfield = received_power_farfield(r, di, ds, ti, ts, a, &ideal, cfg.q)?;
    let loss = surface_path_loss(di, ds, ti, ts, a, &ideal, cfg.q)?;
    let direct = friis(r, geom.tx.sub(geom.rx).norm())?;
    let rep = BudgetReport {
        geometry: geom,
        d_i_m: di,
        d_s_m: ds,
        theta_i_deg: ti,
        theta_s_deg: ts,
        exact_dbm: exact,
        farfield_dbm: farfield,
        path_loss_db: loss,
        direct_dbm: direct,
        surface_snr_db: exact - r.noise_floor_dbm,
        direct_snr_db: direct - r.noise_floor_dbm,
    };
    out.csv(
        "budget.csv",
        &["quantity", "value"],
        [
            ("exact_dbm", exact),
            ("farfield_dbm", farfield),
            ("path_loss_db", loss),
            ("direct_dbm", direct),
            ("surface_snr_db", rep.surface_snr_db),
            ("direct_snr_db", rep.direct_snr_db),
        ]
        .map(|(k, v)| vec![k.to_string(), num(v)]),
    )?;
    out.json("budget.json", "budget", &rep)?;
    Ok(())
}

#[derive(Serialize)]
struct CoverageSummary {
    label: &'static str,
    surfaces: usize,
    /// Fraction of receivers at or above each tier threshold, pooled over
    /// transmitters.
    tiers: Vec<(String, f64, f64)>,
}

#[derive(Serialize)]
struct ScenarioSummary {
    scenario: String,
    transmitters: usize,
    receivers: usize,
    coverage: Vec<CoverageSummary>,
    trials: usize,
    seed: u64,
    blockage: Vec<BlockageEstimate>,
}

pub fn scenario(cfg: &RunConfig, out: &mut Bundle) -> Result<(), CliError> {
    let scn = cfg.scenario()?;
    let (_, tables) = cfg.tables()?;
    let mut ctx = LinkContext::new(&tables);
    ctx.radio = cfg.radio;
    ctx.array = cfg.array;
    ctx.q = cfg.q;

    let configs: [(&'static str, PathOptions); 3] = [
        ("no_surface", PathOptions::without_surfaces()),
        ("surfaces", PathOptions::all()),
        (
            "metal_sheets",
            PathOptions {
                metal_sheets: true,
                ..PathOptions::without_surfaces()
            },
        ),
    ];
    let mut rows = Vec::new();
    let mut coverage = Vec::new();
    for (label, opts) in configs {
        let mut pooled = Vec::new();
        for tx in &scn.txs {
            let map = coverage_map(&scn, &ctx, tx.pos, opts)?;
            for p in &map {
                rows.push(vec![
                    label.to_string(),
                    tx.name.clone(),
                    p.rx.clone(),
                    num(p.pos.x),
                    num(p.pos.y),
                    num(p.snr),
                    p.tier.clone().unwrap_or_default(),
                    p.path.map(|k| format!("{k:?}")).unwrap_or_default(),
                ]);
            }
            pooled.extend(map);
        }
        coverage.push(CoverageSummary {
            label,
            surfaces: opts.surfaces.min(scn.surfaces.len()),
            tiers: scn
                .tiers
                .iter()
                .map(|t| {
                    (
                        t.name.clone(),
                        t.min_snr_db,
                        coverage_fraction(&pooled, t.min_snr_db),
                    )
                })
                .collect(),
        });
    }
    let counts: Vec<usize> = (0..=scn.surfaces.len()).collect();
    info!("running {} blockage trials", cfg.sim.trials);
    let blockage = blockage_failure_rate(
        &scn,
        &ctx,
        &cfg.sim.betas,
        &counts,
        cfg.sim.trials,
        cfg.sim.seed,
    )?;

    out.csv(
        "coverage.csv",
        &["config", "tx", "rx", "x_m", "y_m", "snr_db", "tier", "path"],
        rows,
    )?;
    out.csv(
        "blockage.csv",
        &["beta", "surfaces", "failure_rate", "ci95"],
        blockage.iter().map(|b| {
            vec![
                num(b.beta),
                b.surfaces.to_string(),
                num(b.failure_rate),
                num(b.ci95),
            ]
        }),
    )?;
    out.json(
        "scenario_summary.json",
        "scenario",
        &ScenarioSummary {
            scenario: scn.name.clone(),
            transmitters: scn.txs.len(),
            receivers: scn.rxs.len(),
            coverage,
            trials: cfg.sim.trials,
            seed: cfg.sim.seed,
            blockage,
        },
    )?;
    Ok(())
}

pub struct ProtocolArgs {
    pub mode: ModeArg,
    pub search: SearchArg,
    pub n: usize,
    pub n_w: usize,
    pub refine: bool,
    pub trials: usize,
    pub d_enodeb: f64,
    pub d_ue: f64,
}

#[derive(Serialize)]
struct TrialRecord {
    trial: usize,
    truth: LinkTruth,
    surface_truth_deg: f64,
    downlink: AlignmentResult,
    uplink: AlignmentResult,
}

#[derive(Serialize)]
struct TrialTrace {
    trial: usize,
    events: Vec<TraceEvent>,
}

#[derive(Serialize)]
struct ProtocolSummary {
    search: String,
    trials: usize,
    successes: usize,
    mean_probes: f64,
    max_probes: usize,
    results: Vec<TrialRecord>,
}

pub fn protocol(
    cfg: &RunConfig,
    args: &ProtocolArgs,
    seed: u64,
    out: &mut Bundle,
) -> Result<(), CliError> {
    if args.trials == 0 {
        return Err(CliError::Config(
            "config: --trials must be at least 1".into(),
        ));
    }
    let (_, tables) = cfg.tables()?;
    let mode: Mode = args.mode.into();
    let pc = cfg.protocol;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(args.trials);
    let mut traces = Vec::with_capacity(args.trials);
    for trial in 0..args.trials {
        let truth = LinkTruth::random(&mut rng, pc.codebook_span, mode, args.d_enodeb, args.d_ue);
        let mut s = Session::new(pc, truth, &tables, seed.wrapping_add(trial as u64));
        s.array = cfg.array;
        s.q = cfg.q;
        let n = args.n;
        let coarse = match args.search {
            SearchArg::Cold => cold_start_align(&mut s, n, n, n)?,
            // Steady state and multi-arm assume the eNodeB beam is known.
            SearchArg::Steady => steady_state_align(&mut s, truth.enodeb_angle, n, n)?,
            SearchArg::Multiarm => multiarm_search(&mut s, truth.enodeb_angle, args.n_w, n)?,
        };
        let down = if args.refine {
            refine_align(&mut s, &coarse, pc.refine_levels)?
        } else {
            coarse
        };
        let up = uplink_from_downlink(&mut s, &down)?;
        results.push(TrialRecord {
            trial,
            truth,
            surface_truth_deg: truth.surface_angle(),
            downlink: down,
            uplink: up,
        });
        traces.push(TrialTrace {
            trial,
            events: std::mem::take(&mut s.trace),
        });
    }
    let probes: Vec<usize> = results.iter().map(|r| r.downlink.probes_used).collect();
    let summary = ProtocolSummary {
        search: format!("{:?}", args.search).to_lowercase(),
        trials: args.trials,
        successes: results.iter().filter(|r| r.downlink.success).count(),
        mean_probes: probes.iter().sum::<usize>() as f64 / probes.len() as f64,
        max_probes: probes.iter().copied().max().unwrap_or(0),
        results,
    };
    out.json("protocol_trace.json", "protocol_trace", &traces)?;
    out.json("protocol_summary.json", "protocol", &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct SelftestLine {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
}

/// Runs the acceptance suite. Returns whether every criterion passed.
pub fn selftest(cfg: &RunConfig, out: &mut Bundle) -> Result<bool, CliError> {
    let results = acceptance::run_all(cfg.clone())?;
    for c in &results {
        println!("{c}");
    }
    let all = results.iter().all(|c| c.passed);
    let lines: Vec<SelftestLine> = results
        .into_iter()
        .map(|c| SelftestLine {
            id: c.id,
            name: c.name,
            passed: c.passed,
            detail: c.detail,
            seconds: c.seconds,
        })
        .collect();
    out.json("selftest.json", "selftest", &lines)?;
    Ok(all)
}

pub fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Lens => "lens",
        Mode::Mirror => "mirror",
    }
}
