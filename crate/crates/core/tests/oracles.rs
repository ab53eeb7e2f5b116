use std::f64::consts::FRAC_PI_4;

use halfres::discretize::{
    assemble_bs, build_product_rule, fourier_grid_eigenvalues, radial_grid_eigenvalues, EigenOracle, Potential,
    RadialEigenOracle,
};
use halfres::resonances::singular_value_profile;
use halfres::validate::{dz_check, kernel_constants_check, kernel_fourier_check, riesz_check, sheet_jump_sample};
use halfres::SheetPoint;
use num_complex::Complex64;

fn step_well() -> Potential {
    Potential::ball_step(Complex64::new(-3.0, 0.0), 1.0, 0.2).unwrap()
}

#[test]
fn radial_and_cartesian_eigen_oracles_agree() {
    let v = step_well();
    let radial = radial_grid_eigenvalues(&v, &RadialEigenOracle::default(), 1).unwrap()[0];
    assert!((radial + 0.574505).abs() < 1e-5, "{radial}");
    let cfg = EigenOracle {
        grid: 96,
        side: 16.0,
        ..Default::default()
    };
    let grid = fourier_grid_eigenvalues(&v, &cfg, 1).unwrap()[0];
    assert!(((grid - radial) / radial).abs() < 2e-2, "{grid} vs {radial}");
}

#[test]
fn kernel_matches_the_fourier_multiplier_on_a_coarse_grid() {
    let r = kernel_fourier_check(Complex64::new(1.0, 1.0), 0.5, 64, 24.0, 1).unwrap();
    assert!(r.relative_l2_error < 1e-2, "{}", r.relative_l2_error);
}

#[test]
fn kernel_identities_hold_in_both_dimensions() {
    for d in [3, 5] {
        assert!(kernel_constants_check(d).unwrap() < 1e-10);
        assert!(sheet_jump_sample(d, 20, 7).unwrap().max_error < 1e-9);
        assert!(riesz_check(d).unwrap() < 1e-5);
        assert!(dz_check(d).unwrap() < 1e-6);
    }
    assert!(kernel_constants_check(4).is_err());
}

/// The discrete spectrum of K must not depend on how the ball is cut up.
#[test]
fn singular_values_do_not_depend_on_rule_shape() {
    let v = step_well();
    let z = SheetPoint::new(2.0, FRAC_PI_4).unwrap();
    let breaks = v.radial_breakpoints();
    let mut counts = Vec::new();
    for shape in [[8, 8, 16], [12, 6, 12], [6, 12, 24]] {
        let q = build_product_rule(1.0, shape, &breaks, 16).unwrap();
        let s = singular_value_profile(&assemble_bs(z, &v, &q).unwrap());
        counts.push((s[0], s.iter().filter(|x| **x > 0.3).count()));
    }
    // spurious near-diagonal singular values used to inflate this count 2–10×
    let top = counts[0].0;
    let lo = counts.iter().map(|c| c.1).min().unwrap() as f64;
    let hi = counts.iter().map(|c| c.1).max().unwrap() as f64;
    assert!(counts.iter().all(|c| (c.0 - top).abs() < 0.02 * top), "{counts:?}");
    assert!(hi / lo < 1.15, "{counts:?}");
}
