use valueboost::boost::Booster;
use valueboost::{
    boost_fit, fit_tree, predict_scores, simulate, variable_importance, value_hat, BoostConfig,
    BoostedModel, Covariates, MembershipState, SimConfig, TimeHorizon,
};

fn data() -> valueboost::Dataset {
    simulate(&SimConfig { q: 5, ..SimConfig::new(1, 1, 300, 12) }).unwrap()
}

#[test]
fn zero_trees_gives_half_scores() {
    let d = data();
    let cfg = BoostConfig { num_trees: 0, ..Default::default() };
    let m = boost_fit(&d, &cfg, TimeHorizon::auto(&d)).unwrap();
    assert!(m.trees.is_empty());
    let s = predict_scores(&m, d.covariates()).unwrap();
    assert!(s.scores().iter().all(|&p| p == 0.5));
    assert!(variable_importance(&m).is_err());
}

#[test]
fn loss_decreases() {
    let d = data();
    let cfg = BoostConfig { num_trees: 20, learning_rate: 0.05, ..Default::default() };
    let m = boost_fit(&d, &cfg, TimeHorizon::auto(&d)).unwrap();
    assert_eq!(m.training_loss.len(), 21);
    assert_eq!(m.training_loss[0], 0.0);
    assert!(m.training_loss[20] < m.training_loss[0]);
}

#[test]
fn prediction_replays_training_logits() {
    let d = data();
    let h = TimeHorizon::auto(&d);
    let cfg = BoostConfig { num_trees: 15, learning_rate: 0.002, max_depth: 3, ..Default::default() };
    let mut b = Booster::new(&d, cfg, h).unwrap();
    for _ in 0..15 {
        b.step().unwrap();
    }
    let logits = b.logits().to_vec();
    let m = b.finish();
    let s = predict_scores(&m, d.covariates()).unwrap();
    assert_eq!(s.logits(), &logits[..]);
    let last = *m.training_loss.last().unwrap();
    let v = value_hat(&d, &s, h).unwrap().value;
    assert_eq!(-v, last);
    assert_eq!(boost_fit(&d, &cfg, h).unwrap(), m);
}

#[test]
fn model_json_round_trip_is_exact() {
    let d = data();
    let h = TimeHorizon::auto(&d);
    let cfg = BoostConfig { num_trees: 10, learning_rate: 0.003, ..Default::default() };
    let m = boost_fit(&d, &cfg, h).unwrap();
    let back = BoostedModel::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    let a = predict_scores(&m, d.covariates()).unwrap();
    let b = predict_scores(&back, d.covariates()).unwrap();
    assert_eq!(a.logits(), b.logits());
    assert!(BoostedModel::from_json(r#"{"trees": [], "extra": 1}"#).is_err());
}

#[test]
fn shrinkage_to_zero() {
    let d = data();
    let h = TimeHorizon::auto(&d);
    let mut prev = f64::INFINITY;
    for eta in [1e-3, 1e-5, 1e-7] {
        let cfg = BoostConfig { num_trees: 5, learning_rate: eta, ..Default::default() };
        let m = boost_fit(&d, &cfg, h).unwrap();
        let s = predict_scores(&m, d.covariates()).unwrap();
        let max = s.logits().iter().map(|f| f.abs()).fold(0.0, f64::max);
        assert!(max < prev);
        prev = max;
    }
    assert!(prev < 1e-2);
}

#[test]
fn tree_examples() {
    let x = Covariates::from_row_major(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
    let cfg = BoostConfig { lambda_l2: 0.0, ..Default::default() };
    let t = fit_tree(&x, &[-2.0, -2.0, 4.0], &cfg).unwrap();
    assert_eq!(t.nodes[0].split_feature, Some(0));
    assert_eq!(t.nodes[0].threshold, 2.5);
    assert!((t.nodes[0].gain - 12000.0).abs() < 1e-6);
    assert!((t.nodes[t.nodes[0].left].leaf_value - 2000.0).abs() < 1e-9);
    assert!((t.nodes[t.nodes[0].right].leaf_value + 4000.0).abs() < 1e-9);

    let flat = fit_tree(&x, &[1.0, 1.0, 1.0], &BoostConfig::default()).unwrap();
    assert_eq!(flat.nodes.len(), 1);
    assert!((flat.nodes[0].leaf_value + 3.0 / 1.003).abs() < 1e-12);

    let penalized = BoostConfig { lambda_l2: 0.0, gamma_split: 1e5, ..Default::default() };
    assert_eq!(fit_tree(&x, &[-2.0, -2.0, 4.0], &penalized).unwrap().nodes.len(), 1);

    // equal gains: lower feature wins
    let x2 = Covariates::from_row_major(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]).unwrap();
    let t2 = fit_tree(&x2, &[-2.0, -2.0, 4.0], &cfg).unwrap();
    assert_eq!(t2.nodes[0].split_feature, Some(0));

    assert!(fit_tree(&x, &[1.0, f64::NAN, 0.0], &cfg).is_err());
    assert!(fit_tree(&Covariates::from_row_major(0, 1, vec![]).unwrap(), &[], &cfg).is_err());
}

#[test]
fn importance_ranks() {
    let x = Covariates::from_row_major(3, 4, vec![0., 0., 0., 1., 0., 0., 0., 2., 0., 0., 0., 3.]).unwrap();
    let cfg = BoostConfig { lambda_l2: 0.0, max_depth: 1, ..Default::default() };
    let tree = fit_tree(&x, &[-2.0, -2.0, 4.0], &cfg).unwrap();
    let d = data();
    let mut m = BoostedModel::empty(cfg, TimeHorizon::auto(&d), vec!["a".into(), "b".into(), "c".into(), "d".into()]);
    m.trees.push(tree);
    let imp = variable_importance(&m).unwrap();
    assert!((imp.gain[3] - 12000.0).abs() < 1e-6);
    assert_eq!(imp.rank_of("d"), Some(1.0));
    // three zero-gain features share 1 + median(1, 2, 3)
    assert_eq!(imp.rank_of("a"), Some(3.0));
}

#[test]
fn clipped_state_is_stable_under_boosting() {
    let d = data();
    let h = TimeHorizon::auto(&d);
    let s = MembershipState::constant(d.len(), 40.0);
    assert!(value_hat(&d, &s, h).unwrap().value.is_finite());
}
