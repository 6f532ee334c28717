use valueboost::io::write_dataset;
use valueboost::simgen::{treatment_term, uses_s2};
use valueboost::{sample_covariates, simulate, true_membership, Arm, SimConfig};

fn covariances(x: &valueboost::Covariates) -> Vec<Vec<f64>> {
    let (n, p) = (x.n_rows(), x.n_cols());
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let cov = |a: usize, b: usize| {
        (0..n).map(|i| (x.get(i, a) - mean[a]) * (x.get(i, b) - mean[b])).sum::<f64>() / (n - 1) as f64
    };
    (0..p).map(|a| (0..p).map(|b| cov(a, b)).collect()).collect()
}

#[test]
fn independent_covariates() {
    let x = sample_covariates(10_000, 6, 0.0, 3).unwrap();
    let c = covariances(&x);
    for a in 0..6 {
        assert!((c[a][a] - 1.0).abs() < 0.05);
        for b in 0..a {
            assert!(c[a][b].abs() < 0.05, "({a},{b}) = {}", c[a][b]);
        }
    }
}

#[test]
fn compound_symmetric_covariates() {
    let x = sample_covariates(10_000, 8, 1.0 / 3.0, 4).unwrap();
    let c = covariances(&x);
    let mut off = 0.0;
    for a in 0..8 {
        assert!((c[a][a] - 1.0).abs() < 0.05);
        for b in 0..a {
            assert!((c[a][b] - 1.0 / 3.0).abs() < 0.05, "({a},{b}) = {}", c[a][b]);
            off += c[a][b] / (c[a][a] * c[b][b]).sqrt() / 28.0;
        }
    }
    // mean correlation; the shared factor keeps its sd near 0.007
    assert!((off - 1.0 / 3.0).abs() < 0.02, "mean off-diagonal {off}");
}

#[test]
fn simulated_covariance_matches() {
    let d = simulate(&SimConfig { q: 6, ..SimConfig::new(6, 2, 10_000, 5) }).unwrap();
    assert_eq!(d.n_features(), 8);
    let c = covariances(d.covariates());
    for a in 0..8 {
        for b in 0..8 {
            let want = if a == b { 1.0 } else { 1.0 / 3.0 };
            assert!((c[a][b] - want).abs() < 0.05);
        }
    }
}

#[test]
fn invalid_parameters() {
    assert!(sample_covariates(10, 0, 0.2, 1).is_err());
    assert!(sample_covariates(10, 3, 1.0, 1).is_err());
    assert!(sample_covariates(10, 3, -0.1, 1).is_err());
    assert!(simulate(&SimConfig::new(7, 1, 10, 1)).is_err());
    assert!(simulate(&SimConfig::new(1, 3, 10, 1)).is_err());
    assert!(true_membership(9, 0.0, Some(0.0)).is_err());
    assert!(true_membership(2, 0.0, None).is_err());
}

#[test]
fn deterministic_bytes() {
    let cfg = SimConfig::new(3, 2, 300, 77);
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_dataset(&simulate(&cfg).unwrap(), &mut a).unwrap();
    write_dataset(&simulate(&cfg).unwrap(), &mut b).unwrap();
    assert_eq!(a, b);
    let mut c = Vec::new();
    write_dataset(&simulate(&SimConfig { seed: 78, ..cfg }).unwrap(), &mut c).unwrap();
    assert_ne!(a, c);
    assert_eq!(
        sample_covariates(50, 4, 0.3, 9).unwrap(),
        sample_covariates(50, 4, 0.3, 9).unwrap()
    );
}

#[test]
fn arm_balance_and_study_bound() {
    for scenario in [1, 4] {
        let d = simulate(&SimConfig::new(scenario, 1, 10_000, 21)).unwrap();
        let frac = d.arm_count(Arm::Experimental) as f64 / d.len() as f64;
        assert!((frac - 0.5).abs() < 0.02);
        assert!(d.observations().iter().all(|o| o.time_months <= 30.0 && o.time_months > 0.0));
    }
}

#[test]
fn feature_layout() {
    let one = simulate(&SimConfig::new(1, 1, 10, 1)).unwrap();
    assert_eq!(one.n_features(), 51);
    assert_eq!(one.feature_names()[0], "S1");
    assert_eq!(one.feature_names()[1], "Z1");
    let two = simulate(&SimConfig::new(2, 1, 10, 1)).unwrap();
    assert_eq!(&two.feature_names()[..3], &["S1", "S2", "Z1"]);
    assert_eq!(two.n_features(), 52);
}

#[test]
fn membership_follows_treatment_term_sign() {
    let grid: Vec<f64> = (-12..=12).map(|k| f64::from(k) * 0.25).collect();
    for scenario in 1..=6u8 {
        for &s1 in &grid {
            for &s2 in &grid {
                let m = true_membership(scenario, s1, uses_s2(scenario).then_some(s2)).unwrap();
                assert_eq!(m, treatment_term(scenario, s1, s2).unwrap() > 0.0);
            }
        }
    }
    // spot checks against the region descriptions
    assert!(true_membership(2, 1.0, Some(0.5)).unwrap());
    assert!(!true_membership(2, 0.5, Some(1.0)).unwrap());
    assert!(true_membership(3, 0.0, None).unwrap());
    assert!(true_membership(3, 0.6, None).unwrap()); // exp(-0.36) = 0.698 > 0.4
    assert!(!true_membership(3, 1.0, None).unwrap()); // exp(-1) < 0.8
    assert!(true_membership(4, -1.07, Some(1.0)).unwrap());
    assert!(!true_membership(4, 1.07, Some(0.0)).unwrap());
    assert!(true_membership(5, 0.67, None).unwrap());
    assert!(true_membership(5, -0.5, None).unwrap());
    assert!(!true_membership(5, 0.3, None).unwrap());
    assert!(!true_membership(5, -1.0, None).unwrap());
    assert!(true_membership(6, 0.0, Some(-0.67)).unwrap());
    assert!(true_membership(6, -1.0, Some(-1.0)).unwrap());
    assert!(!true_membership(6, -1.0, Some(0.0)).unwrap());
}

#[test]
fn constant_effect_removes_interaction() {
    let cfg = SimConfig {
        constant_treatment_effect: Some(0.0),
        yearly_dropout: 0.0,
        followup_months: 1e9,
        ..SimConfig::new(1, 1, 4000, 3)
    };
    let d = simulate(&cfg).unwrap();
    let mean_log = |arm: Arm, positive: bool| {
        let v: Vec<f64> = d
            .observations()
            .iter()
            .enumerate()
            .filter(|(i, o)| o.arm == arm && (d.covariates().get(*i, 0) > 0.0) == positive)
            .map(|(_, o)| o.time_months.ln())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    for positive in [true, false] {
        let gap = mean_log(Arm::Experimental, positive) - mean_log(Arm::Control, positive);
        assert!(gap.abs() < 0.05, "gap {gap}");
    }
}
