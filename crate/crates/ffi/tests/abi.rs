use std::ffi::CStr;
use std::ptr;

use solarcast_ffi::*;

fn last_error() -> String {
    let p = solarcast_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

/// y = 3 + 2·x₀ − x₁ exactly, on a non-collinear grid.
fn exact_plane() -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..12 {
        let a = i as f64;
        let b = ((i * 7) % 5) as f64;
        x.extend([a, b]);
        y.push(3.0 + 2.0 * a - b);
    }
    (x, y)
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(solarcast_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn linear_fit_recovers_exact_plane() {
    let (x, y) = exact_plane();
    let mut model = ptr::null_mut();
    unsafe {
        let s = solarcast_linear_fit(x.as_ptr(), 12, 2, y.as_ptr(), true, &mut model);
        assert_eq!(s, SolarcastStatus::Ok);
        assert!(solarcast_last_error_message().is_null());
        assert_eq!(solarcast_linear_n_weights(model), 3);
        let mut w = [0.0; 3];
        assert_eq!(solarcast_linear_weights(model, w.as_mut_ptr(), 3), SolarcastStatus::Ok);
        for (got, want) in w.iter().zip([3.0, 2.0, -1.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        let mut p = 0.0;
        let s = solarcast_linear_predict(model, [10.0, 4.0].as_ptr(), 2, &mut p);
        assert_eq!(s, SolarcastStatus::Ok);
        assert!((p - 19.0).abs() < 1e-9);

        let s = solarcast_linear_predict(model, [1.0].as_ptr(), 1, &mut p);
        assert_eq!(s, SolarcastStatus::DimensionMismatch);
        assert!(last_error().contains("expected 2"));
        solarcast_linear_free(model);
    }
}

#[test]
fn collinear_design_reports_singular_fit() {
    let x: Vec<f64> = (0..10).flat_map(|i| [i as f64, 2.0 * i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
    let mut model = ptr::null_mut();
    let s = unsafe { solarcast_linear_fit(x.as_ptr(), 10, 2, y.as_ptr(), true, &mut model) };
    assert_eq!(s, SolarcastStatus::SingularFit);
    assert!(model.is_null());
    assert!(last_error().contains("singular"));
}

#[test]
fn null_pointers_are_rejected() {
    let (x, y) = exact_plane();
    unsafe {
        let s = solarcast_linear_fit(x.as_ptr(), 12, 2, y.as_ptr(), true, ptr::null_mut());
        assert_eq!(s, SolarcastStatus::NullPointer);
        let mut model = ptr::null_mut();
        let s = solarcast_linear_fit(ptr::null(), 12, 2, y.as_ptr(), true, &mut model);
        assert_eq!(s, SolarcastStatus::NullPointer);
        assert!(last_error().contains('x'));
        let mut p = 0.0;
        assert_eq!(
            solarcast_linear_predict(ptr::null(), x.as_ptr(), 2, &mut p),
            SolarcastStatus::NullPointer
        );
        assert_eq!(solarcast_linear_n_weights(ptr::null()), 0);
        solarcast_linear_free(ptr::null_mut());
        solarcast_quantile_free(ptr::null_mut());
        solarcast_bayes_free(ptr::null_mut());
    }
}

#[test]
fn quantile_model_orders_levels() {
    // y = x + u with u cycling through -2..=2
    let x: Vec<f64> = (0..200).map(|i| (i / 5) as f64).collect();
    let y: Vec<f64> = (0..200).map(|i| (i / 5) as f64 + ((i % 5) as f64 - 2.0)).collect();
    let levels = [0.1, 0.5, 0.9];
    let mut model = ptr::null_mut();
    unsafe {
        let s = solarcast_quantile_fit(x.as_ptr(), 200, 1, y.as_ptr(), true, levels.as_ptr(), 3, &mut model);
        assert_eq!(s, SolarcastStatus::Ok, "{}", last_error());
        assert_eq!(solarcast_quantile_n_levels(model), 3);
        let mut out = [0.0; 3];
        let s = solarcast_quantile_predict(model, [20.0].as_ptr(), 1, out.as_mut_ptr(), 3);
        assert_eq!(s, SolarcastStatus::Ok);
        assert!(out[0] <= out[1] && out[1] <= out[2]);
        assert!((out[1] - 20.0).abs() < 0.5);
        let s = solarcast_quantile_predict(model, [20.0].as_ptr(), 1, out.as_mut_ptr(), 2);
        assert_eq!(s, SolarcastStatus::DimensionMismatch);
        solarcast_quantile_free(model);

        let bad = [0.5, 0.1];
        let mut model = ptr::null_mut();
        let s = solarcast_quantile_fit(x.as_ptr(), 200, 1, y.as_ptr(), true, bad.as_ptr(), 2, &mut model);
        assert_eq!(s, SolarcastStatus::InvalidParameter);
    }
}

#[test]
fn bayes_flat_prior_matches_least_squares() {
    let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.3).collect();
    let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| 1.0 + 2.0 * v + if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
    unsafe {
        let mut bayes = ptr::null_mut();
        let s = solarcast_bayes_fit(x.as_ptr(), 50, 1, y.as_ptr(), true, 1e6, f64::NAN, &mut bayes);
        assert_eq!(s, SolarcastStatus::Ok, "{}", last_error());
        let mut linear = ptr::null_mut();
        assert_eq!(solarcast_linear_fit(x.as_ptr(), 50, 1, y.as_ptr(), true, &mut linear), SolarcastStatus::Ok);

        let mut mu = [0.0; 2];
        let mut w = [0.0; 2];
        assert_eq!(solarcast_bayes_posterior_mean(bayes, mu.as_mut_ptr(), 2), SolarcastStatus::Ok);
        assert_eq!(solarcast_linear_weights(linear, w.as_mut_ptr(), 2), SolarcastStatus::Ok);
        assert!((mu[0] - w[0]).abs() < 1e-6 && (mu[1] - w[1]).abs() < 1e-6);

        let (mut m, mut sd) = (0.0, 0.0);
        assert_eq!(solarcast_bayes_predict(bayes, [5.0].as_ptr(), 1, &mut m, &mut sd), SolarcastStatus::Ok);
        assert!((m - 11.0).abs() < 0.1);
        // predictive spread never falls below the likelihood noise
        assert!(sd >= 0.5);

        let s = solarcast_bayes_fit(x.as_ptr(), 50, 1, y.as_ptr(), true, -1.0, 1.0, &mut bayes);
        assert_eq!(s, SolarcastStatus::InvalidParameter);
        solarcast_bayes_free(bayes);
        solarcast_linear_free(linear);
    }
}

#[test]
fn scoring_rules() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(solarcast_crps_gaussian(0.0, 1.0, 0.0, &mut v), SolarcastStatus::Ok);
        assert!((v - 0.233_694_977_255_109_13).abs() < 1e-12);
        assert_eq!(solarcast_crps_gaussian(0.0, 0.0, 0.0, &mut v), SolarcastStatus::InvalidParameter);
        assert_eq!(solarcast_pinball(0.9, 10.0, 20.0, &mut v), SolarcastStatus::Ok);
        assert_eq!(v, 9.0);
        assert_eq!(solarcast_pinball(1.5, 10.0, 20.0, &mut v), SolarcastStatus::InvalidParameter);
    }
}

#[test]
fn clear_sky_at_orlando_noon() {
    let mut out = SolarcastClearSky::default();
    unsafe {
        let s = solarcast_clear_sky(28.54, -81.38, -5.0, 2022, 4, 26, 12, 23, 3.0, &mut out);
        assert_eq!(s, SolarcastStatus::Ok);
        assert!((out.ghi - 985.1).abs() < 1.0, "ghi {}", out.ghi);
        assert!((out.dni - 971.4).abs() < 1.0, "dni {}", out.dni);
        assert!(out.zenith_deg < 20.0);
        let s = solarcast_clear_sky(28.54, -81.38, -5.0, 2022, 2, 30, 12, 0, 3.0, &mut out);
        assert_eq!(s, SolarcastStatus::InvalidParameter);
        let s = solarcast_clear_sky(28.54, -81.38, -5.0, 2022, 4, 26, 12, 0, 0.5, &mut out);
        assert_eq!(s, SolarcastStatus::InvalidParameter);
    }
}

#[test]
fn errors_are_thread_local() {
    let mut v = 0.0;
    unsafe { solarcast_pinball(2.0, 0.0, 0.0, &mut v) };
    let other = std::thread::spawn(|| solarcast_last_error_message().is_null()).join().unwrap();
    assert!(other);
    assert!(!solarcast_last_error_message().is_null());
}
