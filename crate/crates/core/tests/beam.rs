use std::sync::OnceLock;

use metarelay_core::beam::*;
use metarelay_core::cell::CellModel;
use metarelay_core::consts::wrap_deg;
use metarelay_core::lut::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn tables() -> &'static ModeTables {
    static T: OnceLock<ModeTables> = OnceLock::new();
    T.get_or_init(|| {
        let v = voltage_grid(0.0, 10.0, 0.1).unwrap();
        let p = sweep_pattern(&CellModel::default(), &[24.5e9], &v, &v).unwrap();
        ModeTables::build(&p, 24.5e9, 15.0).unwrap()
    })
}

fn grid() -> Vec<f64> {
    angle_grid(-90.0, 90.0, 0.5)
}

fn peak_field(coefs: &[Complex64]) -> f64 {
    let a = SurfaceArray::default();
    radiation_pattern(&a, coefs, 0.0, &grid(), DEFAULT_Q).peak_field()
}

#[test]
fn broadside_puts_every_column_in_one_bin() {
    let a = SurfaceArray::default();
    let c = steering_command(&a, &tables().lens, 0.0).unwrap();
    let first = c.controls[0];
    assert!(c.controls.iter().all(|s| *s == first));
}

#[test]
fn opposite_commands_negate_phases() {
    let a = SurfaceArray::default();
    for t in [5.0, 22.5, 45.0, 60.0] {
        let p = steering_command(&a, &tables().lens, t)
            .unwrap()
            .per_column_phase;
        let n = steering_command(&a, &tables().lens, -t)
            .unwrap()
            .per_column_phase;
        for (x, y) in p.iter().zip(&n) {
            assert!(wrap_deg(x + y).abs() < 1e-9, "{t}: {x} {y}");
        }
    }
}

#[test]
fn forty_five_degree_command_peaks_there() {
    let a = SurfaceArray::default();
    for m in [Mode::Lens, Mode::Mirror] {
        let c = steering_command(&a, tables().get(m), 45.0).unwrap();
        let p = radiation_pattern(&a, &c.coefficients, 0.0, &grid(), DEFAULT_Q);
        assert!((peak_detect(&p, 1)[0].angle - 45.0).abs() <= 3.0);
    }
}

#[test]
fn every_command_steers_within_three_degrees() {
    let a = SurfaceArray::default();
    for m in [Mode::Lens, Mode::Mirror] {
        for cmd in angle_grid(-60.0, 60.0, 5.0) {
            let c = steering_command(&a, tables().get(m), cmd).unwrap();
            let p = radiation_pattern(&a, &c.coefficients, 0.0, &grid(), DEFAULT_Q);
            let got = peak_detect(&p, 1)[0].angle;
            assert!((got - cmd).abs() <= 3.0, "{m:?} {cmd} -> {got}");
        }
    }
}

#[test]
fn peak_gain_falls_with_steering_angle() {
    let a = SurfaceArray::default();
    for m in [Mode::Lens, Mode::Mirror] {
        let peaks: Vec<f64> = angle_grid(0.0, 60.0, 5.0)
            .iter()
            .map(|&t| {
                peak_field(
                    &steering_command(&a, tables().get(m), t)
                        .unwrap()
                        .coefficients,
                )
            })
            .collect();
        for w in peaks.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{m:?} {peaks:?}");
        }
    }
}

#[test]
fn degenerate_second_arm_matches_single_beam() {
    let a = SurfaceArray::default();
    let arms = [
        Arm {
            angle: 20.0,
            weight: 1.0,
        },
        Arm {
            angle: -35.0,
            weight: 0.0,
        },
    ];
    let multi = multibeam_command(&a, &tables().lens, arms).unwrap();
    let single = steering_command(&a, &tables().lens, 20.0).unwrap();
    assert_eq!(multi.controls, single.controls);
}

#[test]
fn symmetric_split_is_symmetric() {
    let a = SurfaceArray::default();
    let arms = [
        Arm {
            angle: -30.0,
            weight: 1.0,
        },
        Arm {
            angle: 30.0,
            weight: 1.0,
        },
    ];
    let c = multibeam_command(&a, &tables().lens, arms).unwrap();
    let p = radiation_pattern(&a, &c.coefficients, 0.0, &grid(), DEFAULT_Q);
    let peaks = peak_detect(&p, 2);
    assert_eq!(peaks.len(), 2);
    assert!((peaks[0].angle + peaks[1].angle).abs() <= 0.5);
    assert!((peaks[0].power_db - peaks[1].power_db).abs() <= 1.0);
}

#[test]
fn coincident_arms_are_rejected() {
    let a = SurfaceArray::default();
    let arms = [
        Arm {
            angle: 10.0,
            weight: 1.0,
        },
        Arm {
            angle: 10.0,
            weight: 0.5,
        },
    ];
    assert!(matches!(
        multibeam_command(&a, &tables().lens, arms),
        Err(metarelay_core::Error::CoincidentArms(_))
    ));
}

#[test]
fn split_arms_cost_three_to_five_db() {
    // Window fixed by a brute-force oracle of the same synthesis.
    let a = SurfaceArray::default();
    for m in [Mode::Lens, Mode::Mirror] {
        for (x, y) in [(-45.0, 15.0), (-30.0, 30.0), (-15.0, 45.0)] {
            let arms = [
                Arm {
                    angle: x,
                    weight: 1.0,
                },
                Arm {
                    angle: y,
                    weight: 1.0,
                },
            ];
            let split = multibeam_command(&a, tables().get(m), arms).unwrap();
            for t in [x, y] {
                let single = steering_command(&a, tables().get(m), t).unwrap();
                let s = array_field(&a, &single.coefficients, 0.0, t, DEFAULT_Q).norm();
                let d = array_field(&a, &split.coefficients, 0.0, t, DEFAULT_Q).norm();
                let loss = 20.0 * (s / d).log10();
                assert!((3.0..=5.0).contains(&loss), "{m:?} {x}/{y} arm {t}: {loss}");
            }
        }
    }
}

#[test]
fn phase_quantisation_costs_under_a_third_of_a_db() {
    let a = SurfaceArray::default();
    for t in [0.0, 17.0, 33.0, 51.0] {
        let ideal: Vec<Complex64> = steering_phases(&a, t)
            .iter()
            .map(|p| Complex64::from_polar(1.0, p.to_radians()))
            .collect();
        let quant: Vec<Complex64> = steering_command(&a, &tables().lens, t)
            .unwrap()
            .coefficients
            .iter()
            .map(|c| c / c.norm())
            .collect();
        let loss = 20.0 * (peak_field(&ideal) / peak_field(&quant)).log10();
        assert!(loss < 0.3, "{t}: {loss}");
    }
}

#[test]
fn unity_broadside_field_is_column_count() {
    let a = SurfaceArray::default();
    let c = vec![Complex64::new(1.0, 0.0); a.n_cols];
    assert!((array_field(&a, &c, 0.0, 0.0, DEFAULT_Q).norm() - a.n_cols as f64).abs() < 1e-9);
}

#[test]
fn default_spacing_has_no_grating_lobes() {
    let a = SurfaceArray::default();
    for t in angle_grid(-60.0, 60.0, 5.0) {
        assert!(grating_lobe_free(a.col_spacing / a.wavelength(), t));
        assert!(scan_grating_lobes(&a, t).is_empty(), "{t}");
    }
}

#[test]
fn wavelength_spacing_shows_a_grating_lobe() {
    let base = SurfaceArray::default();
    let a = SurfaceArray {
        col_spacing: base.wavelength(),
        ..base
    };
    assert!(!grating_lobe_free(1.0, 30.0));
    assert!(!scan_grating_lobes(&a, 30.0).is_empty());
}

proptest! {
    #[test]
    fn field_is_reciprocal(ti in -89.0..89.0f64, t in -89.0..89.0f64, cmd in -60.0..60.0f64) {
        let a = SurfaceArray::default();
        let c = steering_command(&a, &tables().mirror, cmd).unwrap().coefficients;
        let f = array_field(&a, &c, ti, t, DEFAULT_Q);
        let r = array_field(&a, &c, t, ti, DEFAULT_Q);
        prop_assert!((f - r).norm() <= 1e-9 * f.norm().max(1e-300));
    }

    #[test]
    fn pattern_is_normalised(cmd in -60.0..60.0f64) {
        let a = SurfaceArray::default();
        let c = steering_command(&a, &tables().lens, cmd).unwrap();
        let p = radiation_pattern(&a, &c.coefficients, 0.0, &grid(), DEFAULT_Q);
        let max = p.power_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(max.abs() < 1e-12);
    }
}
