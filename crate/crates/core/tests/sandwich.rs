mod common;

use common::{fitted_dataset, rel_diff};
use nalgebra::{DMatrix, DVector};
use psvar::data::{Dataset, DesignMatrix};
use psvar::estimators::{compute_weights, hajek_means, OutcomeModelSpec, WeightScheme};
use psvar::estimators::fit_outcome_models;
use psvar::sandwich::{
    appendix_oracle_ms, appendix_oracle_pes, build_stack, variance_fixed, variance_ms_ate, variance_pes_ate, StackInputs,
};

/// Influence-function variance of the IPTW ATE derived directly from the
/// stacked equations: β score, then the two unnormalized mean equations.
/// `empirical` selects the sample bread for the mean block; otherwise it is
/// the identity.
fn first_principles(d: &Dataset, e: &[f64], dm: &DesignMatrix, empirical: bool) -> f64 {
    let (n, k) = (d.n(), dm.cols());
    let nf = n as f64;
    let (y, z) = (d.y(), d.z());
    let w: Vec<f64> = (0..n).map(|i| if z[i] == 1.0 { 1.0 / e[i] } else { 1.0 / (1.0 - e[i]) }).collect();
    let mu1 = (0..n).map(|i| z[i] * w[i] * y[i]).sum::<f64>() / (0..n).map(|i| z[i] * w[i]).sum::<f64>();
    let mu0 = (0..n).map(|i| (1.0 - z[i]) * w[i] * y[i]).sum::<f64>() / (0..n).map(|i| (1.0 - z[i]) * w[i]).sum::<f64>();

    let x = DMatrix::from_fn(n, k, |i, j| dm.row(i)[j]);
    let mut a11 = DMatrix::<f64>::zeros(k, k);
    let mut dmu = DMatrix::<f64>::zeros(2, k);
    let (mut s1, mut s0) = (0.0, 0.0);
    for i in 0..n {
        let xi = x.row(i).transpose();
        a11 += &xi * xi.transpose() * (e[i] * (1.0 - e[i]) / nf);
        // d/dβ of z(y−μ1)/e and (1−z)(y−μ0)/(1−e)
        let g1 = -z[i] * (y[i] - mu1) * (1.0 - e[i]) / e[i];
        let g0 = (1.0 - z[i]) * (y[i] - mu0) * e[i] / (1.0 - e[i]);
        for j in 0..k {
            dmu[(0, j)] += g1 * xi[j] / nf;
            dmu[(1, j)] += g0 * xi[j] / nf;
        }
        s1 += z[i] / e[i] / nf;
        s0 += (1.0 - z[i]) / (1.0 - e[i]) / nf;
    }
    let a11_inv = a11.try_inverse().unwrap();
    let a22_inv = if empirical { DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / s1, 1.0 / s0])) } else { DMatrix::identity(2, 2) };
    let mut total = 0.0;
    for i in 0..n {
        let xi = x.row(i).transpose();
        let psi_beta = &xi * (z[i] - e[i]);
        let psi_mu = DVector::from_vec(vec![z[i] * (y[i] - mu1) / e[i], (1.0 - z[i]) * (y[i] - mu0) / (1.0 - e[i])]);
        // θ block of A⁻¹ψ with A = −E ∂ψ/∂θ (lower block is −dmu).
        let corr: DVector<f64> = &dmu * (&a11_inv * psi_beta);
        let infl: DVector<f64> = &a22_inv * (psi_mu + corr);
        let phi = infl[0] - infl[1];
        total += phi * phi;
    }
    total / nf
}

#[test]
fn oracle_matches_analytic_forms_on_random_data() {
    for s in 0..200u64 {
        let n = 50 + (s as usize * 37) % 151;
        let (d, dm, fit) = fitted_dataset(1000 + s, n, 5);
        let w = compute_weights(&fit.fitted, d.z(), WeightScheme::Iptw).unwrap();
        let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice()).unwrap();
        let pes = variance_pes_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let ms = variance_ms_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let opes = appendix_oracle_pes(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let oms = appendix_oracle_ms(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        assert!(rel_diff(pes.sigma, opes.sigma) < 1e-10, "pes seed {s}: {} vs {}", pes.sigma, opes.sigma);
        assert!(rel_diff(ms.sigma, oms.sigma) < 1e-10, "ms seed {s}: {} vs {}", ms.sigma, oms.sigma);
        assert!(pes.sigma >= 0.0 && ms.sigma >= 0.0);
        assert!((pes.se - pes.variance.sqrt()).abs() == 0.0);
    }
}

#[test]
fn analytic_forms_match_first_principles_derivation() {
    for s in 0..40u64 {
        let (d, dm, fit) = fitted_dataset(5000 + s, 120, 5);
        let w = compute_weights(&fit.fitted, d.z(), WeightScheme::Iptw).unwrap();
        let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice()).unwrap();
        let pes = variance_pes_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let ms = variance_ms_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let fp_pes = first_principles(&d, &fit.fitted, &dm, true);
        let fp_ms = first_principles(&d, &fit.fitted, &dm, false);
        assert!(rel_diff(pes.sigma, fp_pes) < 1e-9, "pes {s}: {} vs {fp_pes}", pes.sigma);
        assert!(rel_diff(ms.sigma, fp_ms) < 1e-9, "ms {s}: {} vs {fp_ms}", ms.sigma);
    }
}

#[test]
fn numeric_sandwich_tracks_analytic_and_fixed_forms() {
    for s in 0..50u64 {
        let (d, dm, fit) = fitted_dataset(9000 + s, 80 + 2 * s as usize, 5);
        let w = compute_weights(&fit.fitted, d.z(), WeightScheme::Iptw).unwrap();
        let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice()).unwrap();
        let pes = variance_pes_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
        let inputs = || StackInputs { data: &d, ps_design: &dm, ps_fit: &fit, outcome: None };
        let stack = build_stack(WeightScheme::Iptw, false, inputs()).unwrap();
        assert!(stack.residuals().iter().all(|r| r.abs() < 1e-6));
        let ns = stack.variance().unwrap();
        assert!(rel_diff(ns.variance, pes.variance) < 1e-4, "ns {s}: {} vs {}", ns.variance, pes.variance);

        for scheme in [WeightScheme::Iptw, WeightScheme::Overlap] {
            let masked = build_stack(scheme, true, inputs()).unwrap().variance().unwrap();
            let fs = variance_fixed(&d, &compute_weights(&fit.fitted, d.z(), scheme).unwrap()).unwrap();
            assert!(rel_diff(masked.variance, fs.variance) < 1e-8, "{scheme:?} {s}: {} vs {}", masked.variance, fs.variance);
        }
    }
}

#[test]
fn augmented_stack_is_solved_at_fitted_values() {
    for s in 0..10u64 {
        let (d, dm, fit) = fitted_dataset(300 + s, 150, 5);
        let spec = OutcomeModelSpec::pooled((0..5).collect());
        let Ok(om) = fit_outcome_models(&d, &spec) else { continue };
        for scheme in [WeightScheme::Iptw, WeightScheme::Overlap] {
            let st = build_stack(scheme, false, StackInputs { data: &d, ps_design: &dm, ps_fit: &fit, outcome: Some((&spec, &om)) })
                .unwrap();
            assert!(st.residuals().iter().all(|r| r.abs() < 1e-6));
            let v = st.variance().unwrap();
            assert!(v.sigma > 0.0 && v.se.is_finite());
        }
    }
}

#[test]
fn binomial_reduction_with_intercept_only_propensity() {
    let root = psvar::rng::StreamKey::new(77);
    let mut checked = 0;
    for s in 0..100u64 {
        let (d, _, _) = fitted_dataset(root.child(s).value(), 30 + s as usize, 2);
        let (n1, n0) = (d.n_treated() as f64, d.n_control() as f64);
        let e = vec![n1 / (n1 + n0); d.n()];
        let fs = variance_fixed(&d, &compute_weights(&e, d.z(), WeightScheme::Iptw).unwrap()).unwrap();
        let p1 = (0..d.n()).filter(|&i| d.z()[i] == 1.0).map(|i| d.y()[i]).sum::<f64>() / n1;
        let p0 = (0..d.n()).filter(|&i| d.z()[i] == 0.0).map(|i| d.y()[i]).sum::<f64>() / n0;
        let expected = p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0;
        assert!((fs.variance - expected).abs() <= 1e-15 * expected.max(1e-300) * 16.0, "{s}: {} vs {expected}", fs.variance);
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn variances_are_invariant_to_row_order() {
    let (d, dm, fit) = fitted_dataset(42, 120, 5);
    let perm: Vec<usize> = (0..d.n()).rev().collect();
    let dp = d.select_rows(&perm);
    let dmp = DesignMatrix::with_intercept(&dp);
    let ep: Vec<f64> = perm.iter().map(|&i| fit.fitted[i]).collect();
    let w = compute_weights(&fit.fitted, d.z(), WeightScheme::Iptw).unwrap();
    let (mu1, mu0) = hajek_means(d.y(), d.z(), w.as_slice()).unwrap();
    let a = variance_pes_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
    let b = variance_pes_ate(&dp, &ep, &dmp, mu1, mu0).unwrap();
    assert!(rel_diff(a.sigma, b.sigma) < 1e-12);
    let a = variance_ms_ate(&d, &fit.fitted, &dm, mu1, mu0).unwrap();
    let b = variance_ms_ate(&dp, &ep, &dmp, mu1, mu0).unwrap();
    assert!(rel_diff(a.sigma, b.sigma) < 1e-12);
    let fa = variance_fixed(&d, &w).unwrap();
    let fb = variance_fixed(&dp, &compute_weights(&ep, dp.z(), WeightScheme::Iptw).unwrap()).unwrap();
    assert!(rel_diff(fa.sigma, fb.sigma) < 1e-12);
}
