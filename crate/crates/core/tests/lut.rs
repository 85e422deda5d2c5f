use std::sync::OnceLock;

use metarelay_core::cell::{CellModel, UnitCellGeometry};
use metarelay_core::consts::wrap_deg;
use metarelay_core::lut::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F0: f64 = 24.5e9;

fn pattern() -> &'static HuygensPattern {
    static P: OnceLock<HuygensPattern> = OnceLock::new();
    P.get_or_init(|| {
        let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
        sweep_pattern(&CellModel::default(), &[F0, 26e9], &v, &v).unwrap()
    })
}

fn tables() -> &'static ModeTables {
    static T: OnceLock<ModeTables> = OnceLock::new();
    T.get_or_init(|| ModeTables::build(pattern(), F0, 15.0).unwrap())
}

/// Smallest arc (deg) containing every phase.
fn circular_span(mut phases: Vec<f64>) -> f64 {
    phases.sort_by(f64::total_cmp);
    let mut gap = 360.0 - (phases[phases.len() - 1] - phases[0]);
    for w in phases.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    360.0 - gap
}

#[test]
fn both_tables_cover_every_bin() {
    for m in [Mode::Lens, Mode::Mirror] {
        let t = tables().get(m);
        assert_eq!(t.bins(), 24);
        assert_eq!(t.flagged_count(), 0, "{m:?}");
    }
}

#[test]
fn magnitude_floor_matches_oracle() {
    // Exhaustive Python sweep of the same grid.
    assert!((tables().lens.min_magnitude() - 0.9189).abs() < 5e-4);
    assert!((tables().mirror.min_magnitude() - 0.9092).abs() < 5e-4);
}

#[test]
fn entries_sit_within_half_a_bin_of_target() {
    for m in [Mode::Lens, Mode::Mirror] {
        let t = tables().get(m);
        for e in &t.entries {
            let got = e.coefficient(m).arg().to_degrees();
            assert!(wrap_deg(got - e.target_phase).abs() <= t.phase_step / 2.0 + 1e-9);
        }
    }
}

#[test]
fn entries_are_optimal_on_the_grid() {
    let p = pattern();
    let fi = p.freq_index(F0).unwrap();
    for m in [Mode::Lens, Mode::Mirror] {
        let t = tables().get(m);
        for (_, _, c) in p.slice(fi) {
            let z = m.pick(c);
            if z.norm() < 1e-12 {
                continue;
            }
            let e = t.lookup(z.arg().to_degrees());
            assert!(
                z.norm() <= e.coefficient(m).norm(),
                "{m:?} bin {}",
                e.target_phase
            );
        }
    }
}

#[test]
fn rebuild_is_bitwise_identical() {
    let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
    let p = sweep_pattern(&CellModel::default(), &[F0], &v, &v).unwrap();
    let t = ModeTables::build(&p, F0, 15.0).unwrap();
    for m in [Mode::Lens, Mode::Mirror] {
        assert_eq!(
            t.get(m).to_json("h", "v"),
            tables().get(m).to_json("h", "v")
        );
    }
}

#[test]
fn json_reload_is_exact() {
    let s = tables().lens.to_json("abc", "0.1.0");
    assert_eq!(PhaseLookupTable::from_json(&s).unwrap(), tables().lens);
}

proptest! {
    #[test]
    fn dac_round_trip_within_one_lsb(v in 0.0..=10.0f64) {
        prop_assert!((code_to_voltage(voltage_to_code(v)) - v).abs() <= 10.0 / 65536.0);
    }
}

#[test]
fn diagonal_neighbourhood_spans_full_turn() {
    let p = pattern();
    let fi = p.freq_index(F0).unwrap();
    let near: Vec<f64> = p
        .slice(fi)
        .filter(|&(i, j, _)| (p.u_m[i] - p.u_e[j]).abs() <= 1.0 + 1e-9)
        .map(|(_, _, c)| c.t_coef.arg().to_degrees())
        .collect();
    let far: Vec<f64> = p
        .slice(fi)
        .filter(|&(i, j, _)| (p.u_m[i] - p.u_e[j]).abs() >= 8.0 - 1e-9)
        .map(|(_, _, c)| c.t_coef.arg().to_degrees())
        .collect();
    let (sn, sf) = (circular_span(near), circular_span(far));
    assert!(sn >= 350.0, "{sn}");
    assert!(sf <= 200.0, "{sf}");
}

#[test]
fn efficiency_matches_oracle_and_falls_off_band() {
    let p = pattern();
    let (a, b) = (p.freq_index(F0).unwrap(), p.freq_index(26e9).unwrap());
    let lens = (
        efficiency(p, a, Mode::Lens).norm(),
        efficiency(p, b, Mode::Lens).norm(),
    );
    let mirror = (
        efficiency(p, a, Mode::Mirror).norm(),
        efficiency(p, b, Mode::Mirror).norm(),
    );
    assert!(
        (lens.0 - 0.8572).abs() < 5e-4 && (lens.1 - 0.8543).abs() < 5e-4,
        "{lens:?}"
    );
    assert!(
        (mirror.0 - 0.6752).abs() < 5e-4 && (mirror.1 - 0.6549).abs() < 5e-4,
        "{mirror:?}"
    );
    assert!(lens.0 >= lens.1 && mirror.0 >= mirror.1);
}

#[test]
fn bandwidth_profile_examples() {
    let model = CellModel::default();
    let freqs = linspace(F0 - 100e6, F0 + 100e6, 21);
    let lens = bandwidth_profile(&model, &tables().lens, &freqs, 100e6).unwrap();
    let mirror = bandwidth_profile(&model, &tables().mirror, &freqs, 100e6).unwrap();
    assert!(
        (lens.worst_phase_dev() - 7.74).abs() < 0.05,
        "{}",
        lens.worst_phase_dev()
    );
    assert!(
        (mirror.worst_phase_dev() - 9.31).abs() < 0.05,
        "{}",
        mirror.worst_phase_dev()
    );

    // The centre sample reproduces the stored coefficient exactly.
    let centre = freqs.iter().position(|&f| f == F0).unwrap();
    for (e, curve) in tables().lens.entries.iter().zip(&lens.curves) {
        assert_eq!(curve[centre], e.coefficient(Mode::Lens));
    }

    let wide = linspace(20e9, 30e9, 41);
    let prof = bandwidth_profile(&model, &tables().lens, &wide, 100e6).unwrap();
    assert_eq!(prof.curves.len(), 24);
    assert!(prof.curves.iter().all(|c| c.len() == 41));
    assert!(prof.freqs.windows(2).all(|w| w[1] > w[0]));
}

fn perturb(g: UnitCellGeometry, rng: &mut ChaCha8Rng) -> UnitCellGeometry {
    let mut s = || 1.0 + rng.random_range(-0.02..0.02);
    UnitCellGeometry {
        r: g.r * s(),
        w: g.w * s(),
        g: g.g * s(),
        t: g.t * s(),
        eps_r: g.eps_r * s(),
        ..g
    }
}

#[test]
fn perturbed_cells_still_cover_the_circle() {
    let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..3 {
        let base = CellModel::default();
        let model = CellModel {
            magnetic: perturb(base.magnetic, &mut rng),
            electric: perturb(base.electric, &mut rng),
            ..base
        };
        let p = sweep_pattern(&model, &[F0], &v, &v).unwrap();
        let t = build_lut(&p, Mode::Lens, F0, 15.0).unwrap();
        let good = t
            .entries
            .iter()
            .filter(|e| {
                !e.flagged
                    && wrap_deg(e.achieved.t_coef.arg().to_degrees() - e.target_phase).abs() <= 7.5
            })
            .count();
        assert!(good >= 22, "{good}/24");
    }
}
