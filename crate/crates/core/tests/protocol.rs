use std::sync::OnceLock;

use metarelay_core::beam::{multibeam_command, Arm};
use metarelay_core::cell::CellModel;
use metarelay_core::lut::{sweep_pattern, voltage_grid, Mode, ModeTables};
use metarelay_core::protocol::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tables() -> &'static ModeTables {
    static T: OnceLock<ModeTables> = OnceLock::new();
    T.get_or_init(|| {
        let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
        let p = sweep_pattern(&CellModel::default(), &[24.5e9], &v, &v).unwrap();
        ModeTables::build(&p, 24.5e9, 15.0).unwrap()
    })
}

/// Every leg sits on a 25-beam codebook entry.
fn on_grid(mode: Mode) -> LinkTruth {
    LinkTruth {
        enodeb_angle: 10.0,
        theta_i: 0.0,
        theta_s: 15.0,
        ue_angle: -20.0,
        d_enodeb: 3.0,
        d_ue: 3.0,
        mode,
    }
}

fn session(truth: LinkTruth, seed: u64) -> Session<'static> {
    Session::new(ProtocolConfig::default(), truth, tables(), seed)
}

#[test]
fn exhaustive_probe_counts() {
    let mut s = session(on_grid(Mode::Lens), 0);
    assert_eq!(cold_start_align(&mut s, 8, 8, 8).unwrap().probes_used, 512);
    let mut s = session(on_grid(Mode::Lens), 0);
    assert_eq!(
        steady_state_align(&mut s, 10.0, 16, 16)
            .unwrap()
            .probes_used,
        256
    );
    assert_eq!(s.probes(), 256);
}

#[test]
fn on_grid_truth_is_found_exactly() {
    for mode in [Mode::Lens, Mode::Mirror] {
        let t = on_grid(mode);
        let mut s = session(t, 0);
        let r = cold_start_align(&mut s, 25, 25, 25).unwrap();
        assert!(r.success, "{mode:?}");
        assert_eq!(
            (r.enodeb_angle, r.surface_angle, r.ue_angle),
            (10.0, 15.0, -20.0)
        );
        let mut s = session(t, 0);
        let st = steady_state_align(&mut s, 10.0, 25, 25).unwrap();
        assert_eq!(
            (st.surface_angle, st.ue_angle),
            (r.surface_angle, r.ue_angle)
        );
        assert_eq!(st.achieved_snr, r.achieved_snr);
    }
}

#[test]
fn disabled_surface_fails_but_still_spends_probes() {
    let mut s = session(on_grid(Mode::Lens), 0);
    s.surface_enabled = false;
    let r = cold_start_align(&mut s, 8, 8, 8).unwrap();
    assert!(!r.success);
    assert_eq!(r.probes_used, 512);
    assert_eq!(r.achieved_snr, f64::NEG_INFINITY);
}

#[test]
fn refinement_costs_thirty_probes_and_holds_exact_alignment() {
    let mut s = session(on_grid(Mode::Lens), 0);
    let coarse = cold_start_align(&mut s, 25, 25, 25).unwrap();
    let fine = refine_align(&mut s, &coarse, 2).unwrap();
    assert_eq!(fine.probes_used, coarse.probes_used + 30);
    assert_eq!(s.probes(), fine.probes_used);
    assert!(!fine.reverted && fine.success);
    assert_eq!((fine.enodeb_angle, fine.ue_angle), (10.0, -20.0));
    assert!((fine.surface_angle - 15.0).abs() <= 1.25);
    assert!(fine.achieved_snr >= coarse.achieved_snr);
    assert!(fine.resolution < coarse.resolution);
}

#[test]
fn refinement_recovers_an_off_grid_truth() {
    let t = LinkTruth {
        enodeb_angle: 12.3,
        ue_angle: -21.7,
        theta_s: 17.2,
        ..on_grid(Mode::Mirror)
    };
    let mut s = session(t, 0);
    let coarse = cold_start_align(&mut s, 25, 25, 25).unwrap();
    let fine = refine_align(&mut s, &coarse, 2).unwrap();
    assert!(fine.achieved_snr > coarse.achieved_snr);
    assert!(
        fine.oracle_snr - fine.achieved_snr < 1.0,
        "{} vs {}",
        fine.achieved_snr,
        fine.oracle_snr
    );
}

#[test]
fn uplink_reuses_downlink_angles() {
    let mut s = session(on_grid(Mode::Lens), 0);
    let down = cold_start_align(&mut s, 25, 25, 25).unwrap();
    let before = s.probes();
    let up = uplink_from_downlink(&mut s, &down).unwrap();
    assert_eq!(up.probes_used, 0);
    assert_eq!(s.probes(), before);
    assert!((up.achieved_snr - down.achieved_snr).abs() < 1e-9);
}

#[test]
fn multiarm_search_stays_logarithmic() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..20 {
        let t = LinkTruth::random(&mut rng, 60.0, Mode::Lens, 3.0, 3.0);
        let mut s = session(t, k);
        let r = multiarm_search(&mut s, t.enodeb_angle, 64, 25).unwrap();
        assert!(!r.fell_back);
        assert!(r.search_probes <= 12, "{}", r.search_probes);
        assert_eq!(r.probes_used, r.search_probes + 25);
        assert!(
            (r.surface_angle - t.surface_angle()).abs() <= 3.0,
            "{t:?} -> {}",
            r.surface_angle
        );
    }
}

#[test]
fn multiarm_falls_back_when_nothing_is_heard() {
    let mut s = session(on_grid(Mode::Lens), 0);
    s.cfg.detection_db = 500.0;
    let r = multiarm_search(&mut s, 10.0, 16, 16).unwrap();
    assert!(r.fell_back);
    assert_eq!(r.search_probes, 2);
    assert_eq!(r.probes_used, 2 + 256);
    assert!(!r.success);
}

#[test]
fn wide_split_costs_more_than_narrow() {
    // Truth relays towards -45; the second arm moves away from it.
    let t = LinkTruth {
        theta_s: -45.0,
        ..on_grid(Mode::Lens)
    };
    let mut s = session(t, 0);
    s.ue_command(ControlMessage::SetMode(Mode::Lens));
    let mut arm_snr = |sep: f64| {
        let arms = [
            Arm {
                angle: -45.0,
                weight: 1.0,
            },
            Arm {
                angle: -45.0 + sep,
                weight: 1.0,
            },
        ];
        let coefs = multibeam_command(&s.array, &tables().lens, arms)
            .unwrap()
            .coefficients;
        s.evaluate(
            10.0,
            &SurfaceBeam::Custom {
                label: format!("{sep}"),
                coefs,
            },
            UeBeam::Steer(-20.0),
        )
        .unwrap()
    };
    let (narrow, wide) = (arm_snr(15.0), arm_snr(120.0));
    assert!(wide < narrow, "{wide} vs {narrow}");
}

#[test]
fn only_the_ue_may_switch_mode() {
    let mut s = session(on_grid(Mode::Mirror), 0);
    s.send(Role::ENodeB, ControlMessage::SetMode(Mode::Mirror));
    assert_eq!(s.surface.mode, Some(Mode::Lens));
    assert_eq!(
        s.evaluate(10.0, &SurfaceBeam::Steer(15.0), UeBeam::Steer(-20.0))
            .unwrap(),
        f64::NEG_INFINITY
    );
    s.ue_command(ControlMessage::SetMode(Mode::Mirror));
    assert_eq!(s.surface.mode, Some(Mode::Mirror));
    assert!(s
        .evaluate(10.0, &SurfaceBeam::Steer(15.0), UeBeam::Steer(-20.0))
        .unwrap()
        .is_finite());
    let accepted: Vec<bool> = s
        .trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Control { accepted, .. } => Some(*accepted),
            _ => None,
        })
        .collect();
    assert_eq!(accepted, vec![false, true]);
}

#[test]
fn noisy_traces_repeat_per_seed() {
    let run = |seed| {
        let mut s = session(on_grid(Mode::Lens), seed);
        s.cfg.noise_sigma_db = 2.0;
        let r = steady_state_align(&mut s, 10.0, 8, 8).unwrap();
        (r, s.trace)
    };
    let (a, ta) = run(4);
    let (b, tb) = run(4);
    let (_, tc) = run(5);
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);

    let mut quiet = session(on_grid(Mode::Lens), 4);
    steady_state_align(&mut quiet, 10.0, 8, 8).unwrap();
    let snrs = |t: &[TraceEvent]| -> Vec<f64> {
        t.iter()
            .filter_map(|e| match e {
                TraceEvent::Probe { snr, .. } => Some(*snr),
                _ => None,
            })
            .collect()
    };
    assert_ne!(snrs(&ta), snrs(&quiet.trace));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uplink_equals_downlink(e in -45.0..45.0f64, ti in -45.0..45.0f64, ts in -45.0..45.0f64, u in -45.0..45.0f64) {
        let t = LinkTruth { enodeb_angle: e, theta_i: ti, theta_s: ts, ue_angle: u, ..on_grid(Mode::Mirror) };
        prop_assume!((ti.to_radians().sin() + ts.to_radians().sin()).abs() < 0.95);
        let mut s = session(t, 0);
        s.ue_command(ControlMessage::SetMode(Mode::Mirror));
        let w = t.surface_angle();
        let down = s.evaluate(e, &SurfaceBeam::Steer(w), UeBeam::Steer(u)).unwrap();
        let up = s.evaluate_uplink(e, w, u).unwrap();
        prop_assert!((down - up).abs() < 1e-9, "{} {}", down, up);
    }
}
