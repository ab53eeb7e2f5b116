use std::f64::consts::PI;

use halfres::discretize::{assemble_bs, build_quadrature_for, Potential};
use halfres::resonances::{
    count_in_rect, counting_envelope, counting_function, counting_table, det_i_plus_k, first_obstruction_amplitude, locate_poles,
    zero_energy_obstruction, Rect, RegionSpec, SearchOptions, ZeroEnergy,
};
use halfres::{Error, SheetPoint};
use num_complex::Complex64;

fn well(depth: f64) -> Potential {
    Potential::ball_step(Complex64::new(-depth, 0.0), 1.0, 0.2).unwrap()
}

#[test]
fn free_determinant_is_one_and_counts_nothing() {
    let v = Potential::zero(1.0).unwrap();
    let q = build_quadrature_for(&v, 1.0, 8).unwrap();
    for arg in [-4.0, 0.5, PI, 7.0] {
        let d = det_i_plus_k(SheetPoint::new(0.8, arg).unwrap(), &v, &q).unwrap();
        assert_eq!(d.log_abs, 0.0);
    }
    let rect = Rect::new(0.2, 2.0, -5.0, 5.0).unwrap();
    let c = count_in_rect(&rect, &v, &q, &SearchOptions::default()).unwrap();
    assert_eq!(c.count, 0);
    assert!(c.distance_to_integer() < 1e-12);
}

#[test]
fn real_potential_determinant_reflects_about_the_negative_axis() {
    let v = well(3.0);
    let q = build_quadrature_for(&v, 1.0, 8).unwrap();
    for (r, arg) in [(0.4, 0.7), (1.3, -1.2), (2.0, 2.5), (0.9, 8.0)] {
        let a = det_i_plus_k(SheetPoint::new(r, arg).unwrap(), &v, &q).unwrap();
        let b = det_i_plus_k(SheetPoint::new(r, 2.0 * PI - arg).unwrap(), &v, &q).unwrap();
        assert!((a.log_abs - b.log_abs).abs() < 1e-10 * (1.0 + a.log_abs.abs()), "{a:?} vs {b:?}");
        assert!((a.phase - b.phase.conj()).norm() < 1e-9, "{a:?} vs {b:?}");
    }
}

/// `log det(I + εK) = ε tr K + O(ε²)`: the remainder quarters when ε halves.
#[test]
fn weak_coupling_determinant_follows_the_trace() {
    let q = build_quadrature_for(&well(1.0), 1.0, 8).unwrap();
    let z = SheetPoint::new(1.1, 0.9).unwrap();
    let remainder = |eps: f64| {
        let v = well(eps);
        let d = det_i_plus_k(z, &v, &q).unwrap();
        let tr = assemble_bs(z, &v, &q).unwrap().trace();
        let log_det = Complex64::new(d.log_abs, d.phase.arg());
        (log_det - tr).norm()
    };
    let (a, b) = (remainder(1e-2), remainder(5e-3));
    assert!((a / b - 4.0).abs() < 0.05, "ratio {}", a / b);
}

#[test]
fn bound_state_is_a_simple_pole_on_the_negative_axis() {
    let v = well(3.0);
    let q = build_quadrature_for(&v, 1.0, 12).unwrap();
    let region = RegionSpec {
        r_min: 0.4,
        r_max: 0.8,
        arg_min: PI - 0.15,
        arg_max: PI + 0.15,
        exclusion_radius: 0.05,
    };
    let set = locate_poles(&region, &v, &q, &SearchOptions::default()).unwrap();
    assert_eq!(set.poles.len(), 1, "{:?}", set.poles);
    let p = &set.poles[0];
    assert_eq!(p.multiplicity, 1);
    assert!((p.location.arg_total - PI).abs() < 1e-6, "{:?}", p.location);
    assert!((p.location.modulus - 0.5745).abs() < 0.03, "{:?}", p.location);
    assert!(set.audits.iter().all(|a| a.children_sum == a.parent_count));
}

#[test]
fn direct_counts_agree_with_located_poles() {
    let v = well(3.0);
    let q = build_quadrature_for(&v, 1.0, 8).unwrap();
    let opts = SearchOptions::default();
    let a = 2.0;
    let region = RegionSpec {
        r_min: 0.1,
        r_max: 2.0,
        arg_min: -a - 0.01,
        arg_max: a + 0.01,
        exclusion_radius: 0.1,
    };
    let set = locate_poles(&region, &v, &q, &opts).unwrap();
    let tab = counting_table(&[2.0, 0.8], &[a, PI], 0.1, &v, &q, &opts).unwrap();
    assert_eq!(tab.radii, [0.8, 2.0]);
    for (i, r) in tab.radii.iter().enumerate() {
        assert_eq!(tab.counts[i][0], counting_function(*r, a, &set).unwrap(), "{tab:?}");
        assert!(tab.counts[i][1] >= tab.counts[i][0]);
    }
    // the bound state sits on arg = π and is counted there
    assert!(tab.counts[0][1] > tab.counts[0][0], "{tab:?}");
    assert!(tab.worst_distance <= 0.1);
    assert!(counting_table(&[0.05], &[PI], 0.1, &v, &q, &opts).is_err());
}

#[test]
fn counting_refuses_what_was_not_searched() {
    let v = well(3.0);
    let q = build_quadrature_for(&v, 1.0, 8).unwrap();
    let region = RegionSpec {
        r_min: 0.3,
        r_max: 0.8,
        arg_min: 2.9,
        arg_max: 3.4,
        exclusion_radius: 0.3,
    };
    let set = locate_poles(&region, &v, &q, &SearchOptions::default()).unwrap();
    assert!(matches!(counting_function(1.0, 3.0, &set), Err(Error::Coverage(_))));
    assert!(matches!(counting_function(0.5, 3.3, &set), Err(Error::Coverage(_))));
    assert!(counting_function(0.5, 0.0, &set).is_err());
}

#[test]
fn envelope_grows_in_both_arguments() {
    let mut last = 0.0;
    for r in [0.5, 1.0, 2.0, 4.0] {
        let e = counting_envelope(r, PI);
        assert!(e > last);
        last = e;
        assert!(counting_envelope(r, 5.0 * PI) > counting_envelope(r, 3.0 * PI));
    }
}

#[test]
fn shallow_well_is_regular_at_zero_energy() {
    let v = well(0.2);
    let q = build_quadrature_for(&v, 1.0, 8).unwrap();
    let rep = zero_energy_obstruction(&v, &q).unwrap();
    assert_eq!(rep.status, ZeroEnergy::Regular);
    assert!(rep.smallest_eigenvalue.unwrap() > 0.0);

    let absorbing = Potential::ball_step(Complex64::new(-0.2, -0.3), 1.0, 0.2).unwrap();
    assert_eq!(zero_energy_obstruction(&absorbing, &q).unwrap().smallest_eigenvalue, None);
}

#[test]
fn critical_depth_is_bracketed_and_validated() {
    let shape = well(1.0);
    let q = build_quadrature_for(&shape, 1.0, 8).unwrap();
    let c = first_obstruction_amplitude(&shape, &q, 0.5, 10.0, 1e-6).unwrap();
    // a bound state exists at depth 3
    assert!(c > 0.5 && c < 3.0, "{c}");
    // just below the threshold the operator is still positive, just above it is not
    let below = zero_energy_obstruction(&well(0.99 * c), &q).unwrap().smallest_eigenvalue.unwrap();
    let above = zero_energy_obstruction(&well(1.01 * c), &q).unwrap().smallest_eigenvalue.unwrap();
    assert!(below > 0.0 && above < 0.0);

    assert!(first_obstruction_amplitude(&shape, &q, 0.1, 0.2, 1e-6).is_err());
    let complex = Potential::ball_step(Complex64::new(-1.0, 0.5), 1.0, 0.2).unwrap();
    assert!(first_obstruction_amplitude(&complex, &q, 0.5, 10.0, 1e-6).is_err());
}
