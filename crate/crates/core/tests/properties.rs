use proptest::prelude::*;

use valueboost::eval::fold_assignment;
use valueboost::{
    classify, fit_tree, km_curve, value_hat, value_itr_hat, weighted_survival_curve, Arm,
    BoostConfig, Covariates, Dataset, MembershipState, SurvivalObservation, TimeHorizon,
};

prop_compose! {
    /// Two-arm data on a half-month grid (so times tie) with random weights.
    fn trial(max_n: usize)(
        rows in prop::collection::vec((1u32..40, any::<bool>(), any::<bool>(), 0.0f64..1.0), 4..max_n)
    ) -> (Dataset, Vec<f64>) {
        let n = rows.len();
        let obs = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, e, a, _))| {
                let arm = match i {
                    0 => Arm::Control,
                    1 => Arm::Experimental,
                    _ if a => Arm::Experimental,
                    _ => Arm::Control,
                };
                SurvivalObservation::new(f64::from(t) * 0.5, e, arm)
            })
            .collect();
        let x = Covariates::from_row_major(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let d = Dataset::new(obs, x, vec!["x".into()], None).unwrap();
        (d, rows.iter().map(|r| r.3).collect())
    }
}

fn horizon(d: &Dataset) -> TimeHorizon {
    TimeHorizon::auto(d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn curves_are_nonincreasing((d, w) in trial(40)) {
        for arm in Arm::BOTH {
            for c in [weighted_survival_curve(&d, &w, arm).unwrap(), km_curve(&d, &w, arm).unwrap()] {
                let mut prev = 1.0;
                for &s in &c.survival_values {
                    prop_assert!(s <= prev && s >= 0.0);
                    prev = s;
                }
            }
        }
    }

    #[test]
    fn curves_are_scale_invariant((d, w) in trial(40), c in 0.01f64..1.0) {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        for arm in Arm::BOTH {
            let a = weighted_survival_curve(&d, &w, arm).unwrap();
            let b = weighted_survival_curve(&d, &scaled, arm).unwrap();
            prop_assert_eq!(&a.jump_times, &b.jump_times);
            for (x, y) in a.survival_values.iter().zip(&b.survival_values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn antisymmetry((d, w) in trial(40)) {
        let s = MembershipState::from_scores(&w);
        let h = horizon(&d);
        let v = value_hat(&d, &s, h).unwrap().value;
        let u = value_hat(&d, &s.complement(), h).unwrap().value;
        prop_assert!((v + u).abs() < 1e-9);
    }

    #[test]
    fn report_identities((d, w) in trial(40)) {
        let s = MembershipState::from_scores(&w);
        let h = horizon(&d);
        let r = value_hat(&d, &s, h).unwrap();
        prop_assert!((r.soft_size_perform + r.soft_size_nonperform - d.len() as f64).abs() < 1e-9);
        let direct = r.soft_size_perform * (r.rmst_arm1_perform - r.rmst_arm0_perform)
            - r.soft_size_nonperform * (r.rmst_arm1_nonperform - r.rmst_arm0_nonperform);
        prop_assert!((r.value - direct).abs() < 1e-9);
        for x in [r.rmst_arm1_perform, r.rmst_arm0_perform, r.rmst_arm1_nonperform, r.rmst_arm0_nonperform] {
            prop_assert!((0.0..=h.t_star() + 1e-12).contains(&x));
        }
        // value = itr value minus the value of the opposite assignment
        let itr = value_itr_hat(&d, &s, h).unwrap();
        let opposite = r.soft_size_perform * r.rmst_arm0_perform
            + r.soft_size_nonperform * r.rmst_arm1_nonperform;
        prop_assert!((r.value - (itr - opposite)).abs() < 1e-9);
    }

    #[test]
    fn hard_weights_match_subset_curves((d, w) in trial(40)) {
        let members: Vec<bool> = w.iter().map(|&x| x > 0.5).collect();
        let weights: Vec<f64> = members.iter().map(|&m| f64::from(u8::from(m))).collect();
        let idx: Vec<usize> = (0..d.len()).filter(|&i| members[i]).collect();
        if let Ok(sub) = d.subset(&idx) {
            for arm in Arm::BOTH {
                let a = weighted_survival_curve(&d, &weights, arm).unwrap();
                let b = weighted_survival_curve(&sub, &vec![1.0; sub.len()], arm).unwrap();
                prop_assert_eq!(&a.jump_times, &b.jump_times);
                for (x, y) in a.survival_values.iter().zip(&b.survival_values) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn value_ignores_patient_order((d, w) in trial(30), seed in any::<u64>()) {
        let n = d.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| (i as u64).wrapping_mul(seed | 1).rotate_left(17));
        let shuffled = d.subset(&perm).unwrap();
        let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
        let h = horizon(&d);
        let a = value_hat(&d, &MembershipState::from_scores(&w), h).unwrap().value;
        let b = value_hat(&shuffled, &MembershipState::from_scores(&pw), h).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn trees_respect_depth_and_leaf_formula(
        n in 2usize..40,
        depth in 1usize..4,
        lambda in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x = Covariates::from_row_major(n, 2, (0..2 * n).map(|_| next()).collect()).unwrap();
        let g: Vec<f64> = (0..n).map(|_| next() * 5.0).collect();
        let cfg = BoostConfig { max_depth: depth, lambda_l2: lambda, ..Default::default() };
        let tree = fit_tree(&x, &g, &cfg).unwrap();
        prop_assert!(tree.depth() <= depth);
        // route every row to its leaf and recompute the leaf value
        let mut leaf_rows = vec![Vec::new(); tree.nodes.len()];
        for i in 0..n {
            let mut k = 0;
            while let Some(f) = tree.nodes[k].split_feature {
                k = if x.get(i, f) < tree.nodes[k].threshold { tree.nodes[k].left } else { tree.nodes[k].right };
            }
            leaf_rows[k].push(i);
        }
        for (k, rows) in leaf_rows.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let gs: f64 = rows.iter().map(|&i| g[i]).sum();
            let w = -gs / (cfg.hessian_const * rows.len() as f64 + lambda);
            prop_assert!((tree.nodes[k].leaf_value - w).abs() <= 1e-9 * w.abs().max(1.0));
        }
        for nd in &tree.nodes {
            if nd.split_feature.is_some() {
                prop_assert!(nd.gain > 0.0);
            }
        }
    }

    #[test]
    fn classify_is_strict(scores in prop::collection::vec(0.0f64..1.0, 1..50), c in 0.01f64..0.99) {
        let s = MembershipState::from_scores(&scores);
        let m = classify(&s, c).unwrap();
        for (p, k) in s.scores().iter().zip(&m) {
            prop_assert_eq!(*k, *p > c);
        }
    }

    #[test]
    fn folds_partition_indices(n in 2usize..300, k in 2usize..10, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_assignment(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}
