use mindscreen_core::preprocess::FeatureVector;
use mindscreen_core::schema::DisorderLabel;
use mindscreen_core::svm::{dual_objective, hinge_objective, kkt_residual, train_binary, MulticlassSvmModel, SvmParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two 2-D blobs on either side of a random line through the origin region,
/// with every point at least `margin / 2` away from it.
fn separable_blobs(seed: u64, n: usize, margin: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let normal = [angle.cos(), angle.sin()];
    let offset: f64 = rng.random_range(-0.3..0.3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    while x.len() < n {
        let p = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        let side = p[0] * normal[0] + p[1] * normal[1] - offset;
        if side.abs() < margin / 2.0 {
            continue;
        }
        // keep the classes balanced
        let label = side.signum();
        let have = y.iter().filter(|&&v| v == label).count();
        if have >= n / 2 {
            continue;
        }
        x.push(p.to_vec());
        y.push(label);
    }
    (x, y)
}

#[test]
fn separable_blobs_are_fit_exactly() {
    let (x, y) = separable_blobs(1, 20, 0.5);
    let m = train_binary(&x, &y, &SvmParams::default()).unwrap();
    assert!(m.converged);
    let correct = x.iter().zip(&y).filter(|(xi, yi)| m.decision(xi).signum() == **yi).count();
    assert_eq!(correct, 20);
}

#[test]
fn kkt_and_duality_on_random_separable_problems() {
    let params = SvmParams::default();
    for seed in 0..20 {
        let (x, y) = separable_blobs(100 + seed, 20, 0.5);
        let m = train_binary(&x, &y, &params).unwrap();
        assert!(m.converged, "seed {seed}");
        let kkt = kkt_residual(&m, &x, &y);
        assert!(kkt <= params.tol, "seed {seed}: KKT residual {kkt}");
        let primal = hinge_objective(&m, &x, &y, params.c);
        let dual = dual_objective(&m, &x, &y);
        assert!(primal >= dual - 1e-12, "seed {seed}: weak duality violated");
        assert!(primal - dual <= 1e-3, "seed {seed}: gap {}", primal - dual);
        let eq: f64 = m.alphas.iter().zip(&y).map(|(a, yi)| a * yi).sum();
        assert!(eq.abs() <= 1e-9);
    }
}

#[test]
fn kkt_holds_on_overlapping_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..120).map(|_| (0..5).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| if r[0] + r[1] + 0.3 * rng.random::<f64>() > 1.1 { 1.0 } else { -1.0 })
        .collect();
    for c in [0.1, 1.0, 10.0] {
        let p = SvmParams { c, ..SvmParams::default() };
        let m = train_binary(&x, &y, &p).unwrap();
        assert!(m.converged);
        assert!(kkt_residual(&m, &x, &y) <= p.tol, "C={c}");
        assert!(m.alphas.iter().all(|&a| (0.0..=c).contains(&a)));
        assert!(hinge_objective(&m, &x, &y, c) >= dual_objective(&m, &x, &y) - 1e-12);
    }
}

#[test]
fn zero_slack_objective_and_scaling() {
    let (x, y) = separable_blobs(7, 20, 0.8);
    // large C so the soft-margin optimum is the hard-margin one
    let c = 1000.0;
    let m = train_binary(&x, &y, &SvmParams { c, tol: 1e-8, ..SvmParams::default() }).unwrap();
    let half_norm: f64 = 0.5 * m.weights.iter().map(|w| w * w).sum::<f64>();
    let obj = hinge_objective(&m, &x, &y, c);
    let slack: f64 = x.iter().zip(&y).map(|(xi, yi)| (1.0 - yi * m.decision(xi)).max(0.0)).sum();
    assert!(slack < 1e-6, "slack {slack}");
    assert!((obj - half_norm).abs() < 1e-6);

    let mut scaled = m.clone();
    scaled.weights.iter_mut().for_each(|w| *w *= 2.0);
    scaled.bias *= 2.0;
    assert!(hinge_objective(&scaled, &x, &y, c) > obj);
}

#[test]
fn training_is_deterministic() {
    let (x, y) = separable_blobs(3, 40, 0.2);
    let a = train_binary(&x, &y, &SvmParams::default()).unwrap();
    let b = train_binary(&x, &y, &SvmParams::default()).unwrap();
    assert_eq!(a, b);
}

fn fv(values: Vec<f64>) -> FeatureVector {
    FeatureVector { values, source_id: String::new() }
}

fn clusters(seed: u64) -> Vec<(FeatureVector, DisorderLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]];
    let mut out = Vec::new();
    for (label, c) in DisorderLabel::ALL.into_iter().zip(centers) {
        for _ in 0..15 {
            let p = vec![c[0] + rng.random_range(-0.05..0.05), c[1] + rng.random_range(-0.05..0.05)];
            out.push((fv(p), label));
        }
    }
    out
}

#[test]
fn multiclass_separates_clusters() {
    let train = clusters(2);
    let m = MulticlassSvmModel::train(&train, &SvmParams::default()).unwrap();
    assert_eq!(m.models.len(), 3);
    assert!(m.converged());
    for (x, l) in &train {
        assert_eq!(m.predict(&x.values).unwrap().label, *l);
    }
    let p = m.predict(&[0.1, 0.1]).unwrap();
    assert_eq!(p.label, DisorderLabel::Depression);
    assert!(p.decision_values[0] > p.decision_values[1] && p.decision_values[0] > p.decision_values[2]);
}

#[test]
fn mirrored_classes_get_equal_decisions_on_the_axis() {
    // classes 1 and 2 are mirror images across x = 0.5; class 3 sits on the axis
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut train = Vec::new();
    for _ in 0..12 {
        let p = [rng.random_range(0.05..0.25), rng.random_range(0.0..0.4)];
        train.push((fv(vec![p[0], p[1]]), DisorderLabel::Depression));
        train.push((fv(vec![1.0 - p[0], p[1]]), DisorderLabel::InternetAddiction));
    }
    for _ in 0..6 {
        let d = rng.random_range(0.0..0.1);
        let h = rng.random_range(0.8..1.0);
        train.push((fv(vec![0.5 - d, h]), DisorderLabel::Anxiety));
        train.push((fv(vec![0.5 + d, h]), DisorderLabel::Anxiety));
    }
    let params = SvmParams { tol: 1e-10, ..SvmParams::default() };
    let m = MulticlassSvmModel::train(&train, &params).unwrap();
    for y in [0.0, 0.3, 0.7] {
        let p = m.predict(&[0.5, y]).unwrap();
        assert!(
            (p.decision_values[0] - p.decision_values[1]).abs() <= 1e-6,
            "{:?}",
            p.decision_values
        );
    }
}
