use wavepacket::bands_dump::{band_header, band_rows};
use wavepacket::cache::CachedBand;
use wavepacket::fit::{fit_line, fit_loglog, fit_semilog};
use wavepacket::geometry::{geometry_checks, run_geometry_suite};
use wavepacket::scenario;
use wavepacket_core::bands::BandOracle;

#[test]
fn exact_line_is_recovered() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
    let f = fit_line(&x, &y).unwrap();
    assert!((f.slope + 2.0).abs() < 1e-14 && (f.intercept - 0.5).abs() < 1e-14);
    assert!((f.slope_ci[0] - f.slope).abs() < 1e-12 && (f.slope_ci[1] - f.slope).abs() < 1e-12);
    assert!(fit_line(&x[..2], &y[..2]).is_none());
    assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
}

#[test]
fn power_law_and_growth_fits() {
    let eps = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let err: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
    assert!((fit_loglog(&eps, &err).unwrap().slope - 1.5).abs() < 1e-12);
    let t = [0.1, 0.2, 0.3];
    let eta: Vec<f64> = t.iter().map(|s: &f64| 1e-3 * (0.7 * s).exp()).collect();
    assert!((fit_semilog(&t, &eta).unwrap().slope - 0.7).abs() < 1e-12);
    let noisy = [1.0, 2.1, 2.9, 4.2];
    let f = fit_line(&[1.0, 2.0, 3.0, 4.0], &noisy).unwrap();
    assert!(f.slope_ci[0] < f.slope && f.slope < f.slope_ci[1]);
}

#[test]
fn cache_returns_the_computed_point() {
    let model = scenario::mathieu_1d().band_model().unwrap();
    let cached = CachedBand::new(model.clone());
    let a = cached.point(&[0.3]).unwrap();
    let b = cached.point(&[0.3]).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, model.point(&[0.3]).unwrap());
    assert_eq!(cached.len(), 1);
    cached.first_order(&[0.3]).unwrap();
    cached.point(&[0.3 + 1e-14]).unwrap();
    assert_eq!(cached.len(), 2);
    assert_eq!(cached.point(&[0.3 + 1e-14]).unwrap().p[0], 0.3 + 1e-14);
}

#[test]
fn band_table_shape() {
    let cfg = scenario::mathieu_1d();
    let rows = band_rows(&cfg).unwrap();
    let header = band_header(1, 2);
    assert_eq!(header, ["p1", "E_1", "E_2", "gap", "A1"]);
    assert_eq!(rows.len(), 64);
    for r in &rows {
        assert_eq!(r.len(), header.len());
        let e1: f64 = r[1].parse().unwrap();
        let e2: f64 = r[2].parse().unwrap();
        let gap: f64 = r[3].parse().unwrap();
        assert!(e1 < e2);
        assert!((gap - (e2 - e1)).abs() < 1e-12);
    }
}

#[test]
fn one_dimensional_geometry_suite() {
    let report = run_geometry_suite(&scenario::mathieu_1d()).unwrap();
    assert_eq!(report.samples, 64);
    assert_eq!(report.curvature_max, 0.0);
    assert!(report.plaquette_relative.is_none() && report.anomalous.is_none());
    assert!(report.gauge.connection_change > 0.1);
    let checks = geometry_checks(&report);
    assert!(checks.iter().all(|c| c.passed), "{checks:?}");
}
