use std::sync::OnceLock;

use metarelay_core::beam::SurfaceArray;
use metarelay_core::budget::friis;
use metarelay_core::cell::CellModel;
use metarelay_core::lut::{sweep_pattern, voltage_grid, ModeTables};
use metarelay_core::scenario::*;

fn tables() -> &'static ModeTables {
    static T: OnceLock<ModeTables> = OnceLock::new();
    T.get_or_init(|| {
        let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
        let p = sweep_pattern(&CellModel::default(), &[24.5e9], &v, &v).unwrap();
        ModeTables::build(&p, 24.5e9, 15.0).unwrap()
    })
}

fn ctx() -> LinkContext<'static> {
    LinkContext::new(tables())
}

fn node(name: &str, x: f64, y: f64) -> Node {
    Node {
        name: name.into(),
        pos: P2::new(x, y),
    }
}

fn empty_room() -> Scenario {
    Scenario {
        name: "empty".into(),
        room: vec![
            P2::new(-5.0, -5.0),
            P2::new(5.0, -5.0),
            P2::new(5.0, 5.0),
            P2::new(-5.0, 5.0),
        ],
        segments: vec![],
        reflectors: vec![],
        metal_sheets: vec![],
        surfaces: vec![],
        txs: vec![node("tx", -1.0, 2.0)],
        rxs: vec![node("rx", 1.0, 2.0)],
        losses: Losses::default(),
        tiers: default_tiers(),
        outage_threshold_db: 10.0,
    }
}

fn pooled(scn: &Scenario, opts: PathOptions, thr: f64) -> f64 {
    let mut hit = 0;
    let mut total = 0;
    for tx in &scn.txs {
        let map = coverage_map(scn, &ctx(), tx.pos, opts).unwrap();
        total += map.len();
        hit += map.iter().filter(|p| p.snr >= thr).count();
    }
    hit as f64 / total as f64
}

#[test]
fn clear_room_has_one_friis_path() {
    let scn = empty_room();
    let c = ctx();
    let paths =
        enumerate_paths(&scn, &c, scn.txs[0].pos, scn.rxs[0].pos, PathOptions::all()).unwrap();
    assert_eq!(paths.len(), 1);
    assert_eq!(paths[0].kind, PathKind::LoS);
    let expect = friis(&c.radio, 2.0).unwrap() - c.radio.noise_floor_dbm;
    assert!((paths[0].snr - expect).abs() < 1e-12);
}

#[test]
fn metal_sheet_reflects_only_inside_its_specular_cone() {
    let mut scn = empty_room();
    scn.metal_sheets.push(MetalSheet {
        center: P2::new(0.0, 0.0),
        normal_deg: 90.0,
    });
    let opts = PathOptions {
        surfaces: 0,
        reflectors: false,
        metal_sheets: true,
    };
    let c = ctx();
    let inside = enumerate_paths(&scn, &c, P2::new(-1.0, 2.0), P2::new(1.0, 2.0), opts).unwrap();
    assert!(inside.iter().any(|p| p.kind == PathKind::MetalSheet));

    // 10 deg beyond the mirror direction.
    let incidence = (1.0f64 / 2.0).atan();
    let out_angle = incidence + 10f64.to_radians();
    let r = 5f64.sqrt();
    let rx = P2::new(r * out_angle.sin(), r * out_angle.cos());
    let outside = enumerate_paths(&scn, &c, P2::new(-1.0, 2.0), rx, opts).unwrap();
    assert!(!outside.iter().any(|p| p.kind == PathKind::MetalSheet));
}

#[test]
fn lens_beats_the_wall_by_twenty_db() {
    let mut scn = empty_room();
    scn.segments.push(Segment {
        a: P2::new(-5.0, 0.0),
        b: P2::new(5.0, 0.0),
        material: Material::ExteriorWall,
    });
    scn.surfaces.push(SurfaceSite {
        name: "s".into(),
        center: P2::new(0.0, 0.0),
        normal_deg: 90.0,
        steer_range: 60.0,
    });
    let c = ctx();
    let paths = enumerate_paths(
        &scn,
        &c,
        P2::new(0.0, -3.0),
        P2::new(0.0, 3.0),
        PathOptions::all(),
    )
    .unwrap();
    let los = paths.iter().find(|p| p.kind == PathKind::LoS).unwrap().snr;
    let lens = paths
        .iter()
        .find(|p| p.kind == PathKind::SurfaceLens)
        .unwrap()
        .snr;
    assert!(lens - los > 20.0, "{lens} vs {los}");
}

#[test]
fn more_candidates_never_hurt() {
    let scn = Scenario::bundled();
    let c = ctx();
    let configs = [
        PathOptions {
            surfaces: 0,
            reflectors: false,
            metal_sheets: false,
        },
        PathOptions {
            surfaces: 0,
            reflectors: true,
            metal_sheets: false,
        },
        PathOptions {
            surfaces: 1,
            reflectors: true,
            metal_sheets: false,
        },
        PathOptions {
            surfaces: 2,
            reflectors: true,
            metal_sheets: false,
        },
        PathOptions {
            surfaces: 2,
            reflectors: true,
            metal_sheets: true,
        },
    ];
    for tx in &scn.txs {
        for rx in &scn.rxs {
            let snrs: Vec<f64> = configs
                .iter()
                .map(|&o| best_of(&enumerate_paths(&scn, &c, tx.pos, rx.pos, o).unwrap()).0)
                .collect();
            assert!(
                snrs.windows(2).all(|w| w[1] >= w[0]),
                "{} -> {}: {snrs:?}",
                tx.name,
                rx.name
            );
            let with = best_link_snr(&scn, &c, tx.pos, rx.pos, true).unwrap().0;
            let without = best_link_snr(&scn, &c, tx.pos, rx.pos, false).unwrap().0;
            assert!(with >= without);
        }
    }
}

#[test]
fn outdoor_links_fail_without_a_surface() {
    let scn = Scenario::bundled();
    let c = ctx();
    let outdoor: Vec<&Node> = scn.txs.iter().filter(|t| t.pos.y < 0.0).collect();
    assert!(!outdoor.is_empty());
    for tx in outdoor {
        let failed = scn
            .rxs
            .iter()
            .filter(|rx| {
                best_link_snr(&scn, &c, tx.pos, rx.pos, false).unwrap().0 == f64::NEG_INFINITY
            })
            .count();
        assert!(failed > 0, "{}", tx.name);
    }
}

#[test]
fn surface_raises_modulation_coverage() {
    let scn = Scenario::bundled();
    let top = scn
        .tiers
        .iter()
        .map(|t| t.min_snr_db)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        pooled(&scn, PathOptions::all(), top) > pooled(&scn, PathOptions::without_surfaces(), top)
    );
}

#[test]
fn second_surface_adds_less_than_the_first() {
    let scn = Scenario::bundled();
    for thr in [10.0, 19.0, 24.0, 30.0] {
        let f = |k| {
            pooled(
                &scn,
                PathOptions {
                    surfaces: k,
                    ..PathOptions::all()
                },
                thr,
            )
        };
        let (f0, f1, f2) = (f(0), f(1), f(2));
        assert!(f2 - f1 <= f1 - f0, "{thr}: {f0} {f1} {f2}");
    }
}

#[test]
fn metal_sheet_covers_less_than_a_surface() {
    let scn = Scenario::bundled();
    let surface = pooled(
        &scn,
        PathOptions {
            surfaces: 1,
            reflectors: true,
            metal_sheets: false,
        },
        30.0,
    );
    let sheet = pooled(
        &scn,
        PathOptions {
            surfaces: 0,
            reflectors: true,
            metal_sheets: true,
        },
        30.0,
    );
    assert!(sheet < surface, "{sheet} vs {surface}");
}

#[test]
fn sheet_paths_are_specular() {
    let scn = Scenario::bundled();
    let c = ctx();
    let opts = PathOptions {
        surfaces: 0,
        reflectors: true,
        metal_sheets: true,
    };
    let mut seen = 0;
    for tx in &scn.txs {
        for rx in &scn.rxs {
            for p in enumerate_paths(&scn, &c, tx.pos, rx.pos, opts).unwrap() {
                if matches!(p.kind, PathKind::MetalSheet | PathKind::EnvReflection) {
                    seen += 1;
                    assert!((p.theta_in.unwrap() - p.theta_out.unwrap()).abs() < 1e-9);
                }
            }
        }
    }
    assert!(seen > 0);
}

#[test]
fn surface_paths_respect_the_steer_range() {
    let scn = Scenario::bundled();
    let c = ctx();
    for tx in &scn.txs {
        for rx in &scn.rxs {
            for p in enumerate_paths(&scn, &c, tx.pos, rx.pos, PathOptions::all()).unwrap() {
                if let Some(s) = p.steer {
                    assert!(s.abs() <= 60.0);
                }
            }
        }
    }
}

#[test]
fn coverage_never_below_a_valid_surface_path() {
    let scn = Scenario::bundled();
    let c = ctx();
    let tx = scn.txs[0].pos;
    let map = coverage_map(&scn, &c, tx, PathOptions::all()).unwrap();
    for (pt, rx) in map.iter().zip(&scn.rxs) {
        for p in enumerate_paths(&scn, &c, tx, rx.pos, PathOptions::all()).unwrap() {
            if p.steer.is_some() {
                assert!(pt.snr >= p.snr);
            }
        }
    }
}

#[test]
fn silent_transmitter_covers_nothing() {
    let scn = Scenario::bundled();
    let mut c = ctx();
    c.radio.p_t_dbm = f64::NEG_INFINITY;
    for tx in &scn.txs {
        let map = coverage_map(&scn, &c, tx.pos, PathOptions::all()).unwrap();
        assert!(map
            .iter()
            .all(|p| p.snr == f64::NEG_INFINITY && p.tier.is_none()));
    }
}

#[test]
fn blockage_examples_and_properties() {
    let scn = Scenario::bundled();
    let c = ctx();
    let betas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let counts = [0, 1, 2];
    let est = blockage_failure_rate(&scn, &c, &betas, &counts, 2000, 9).unwrap();
    let rate = |bi: usize, k: usize| est[bi * counts.len() + k].failure_rate;
    for (k, &n) in counts.iter().enumerate() {
        assert!((rate(0, k) - outage_fraction(&scn, &c, n).unwrap()).abs() < 1e-12);
        assert_eq!(rate(betas.len() - 1, k), 1.0);
        for bi in 1..betas.len() {
            assert!(rate(bi, k) >= rate(bi - 1, k));
        }
    }
    for bi in 0..betas.len() {
        assert!(rate(bi, 2) <= rate(bi, 1) && rate(bi, 1) <= rate(bi, 0));
    }
    let again = blockage_failure_rate(&scn, &c, &betas, &counts, 2000, 9).unwrap();
    assert_eq!(est, again);
    let other = blockage_failure_rate(&scn, &c, &betas, &counts, 2000, 10).unwrap();
    assert_ne!(est, other);
}

#[test]
fn invalid_scenarios_are_config_errors() {
    let mut scn = empty_room();
    scn.rxs.clear();
    let s = serde_json::to_string(&scn).unwrap();
    assert!(Scenario::from_json(&s).unwrap_err().is_config());
    let mut scn = empty_room();
    scn.reflectors.push(Reflector {
        a: P2::new(0.0, 0.0),
        b: P2::new(1.0, 0.0),
        loss_db: -1.0,
    });
    let s = serde_json::to_string(&scn).unwrap();
    assert!(Scenario::from_json(&s).unwrap_err().is_config());
    let c = ctx();
    assert!(blockage_failure_rate(&Scenario::bundled(), &c, &[1.5], &[0], 10, 0).is_err());
}

#[test]
fn sheet_width_follows_the_array() {
    // A narrower array shrinks the sheet so the same geometry loses its bounce.
    let mut scn = empty_room();
    scn.metal_sheets.push(MetalSheet {
        center: P2::new(0.0, 0.0),
        normal_deg: 90.0,
    });
    let opts = PathOptions {
        surfaces: 0,
        reflectors: false,
        metal_sheets: true,
    };
    let mut c = ctx();
    let (tx, rx) = (P2::new(-1.0, 2.0), P2::new(1.1, 2.0));
    assert!(enumerate_paths(&scn, &c, tx, rx, opts)
        .unwrap()
        .iter()
        .any(|p| p.kind == PathKind::MetalSheet));
    c.array = SurfaceArray {
        n_cols: 10,
        ..SurfaceArray::default()
    };
    assert!(!enumerate_paths(&scn, &c, tx, rx, opts)
        .unwrap()
        .iter()
        .any(|p| p.kind == PathKind::MetalSheet));
}
