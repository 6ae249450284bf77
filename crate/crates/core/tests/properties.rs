mod common;

use std::sync::Arc;
use std::thread;

use cbrn::learning::{train_u, train_v, train_w};
use cbrn::{
    chain_recall, cosine, default_chains, learn_u, learn_v, learn_w, load_weights, save_weights,
    synth_pattern, vectorize, CbrnSystem, CrossLink, CueBall, Group, SystemConfig,
};
use proptest::prelude::*;

#[test]
fn default_labels_are_separable() {
    let config = SystemConfig::default();
    let dataset = common::default_dataset(&config);
    let vectors: Vec<_> = dataset
        .balls()
        .iter()
        .flat_map(|(_, imgs)| imgs.iter().map(|i| vectorize(i).unwrap()))
        .collect();
    assert_eq!(vectors.len(), 35);
    for (i, p) in vectors.iter().enumerate() {
        let own = cosine(p, p).unwrap();
        assert!((own - 1.0).abs() < 1e-12);
        for q in &vectors[i + 1..] {
            let c = cosine(p, q).unwrap();
            assert!(c < 0.9 && c < own, "{} vs {}: {c}", p.source_label(), q.source_label());
        }
    }
}

#[test]
fn training_order_does_not_matter() {
    let config = SystemConfig {
        image_width: 24,
        image_height: 24,
        ..SystemConfig::default()
    };
    let dataset = common::default_dataset(&config);
    let chains = default_chains(&config).unwrap();

    let mut forward = CbrnSystem::new(config.clone()).unwrap();
    cbrn::train_system(&mut forward, &dataset, &chains).unwrap();

    // Same learnings, balls and neurons visited backwards, groups swapped.
    let mut backward = CbrnSystem::new(config.clone()).unwrap();
    for (name, images) in dataset.balls().iter().rev() {
        let ball = backward.ball_mut(name).unwrap();
        for (i, img) in images.iter().enumerate().rev() {
            learn_w(ball, i, &vectorize(img).unwrap(), 1.0).unwrap();
        }
        for i in (0..images.len()).rev() {
            learn_v(ball, i, 100.0, 1.0).unwrap();
        }
    }
    for chain in chains.iter().rev() {
        let mut edges = chain.edges(&config);
        edges.reverse();
        for (from, to, k, l, theta) in edges {
            learn_u(backward.link_mut(&from, &to).unwrap(), k, l, 1.0, theta, 1.0).unwrap();
        }
    }
    assert!(common::bit_identical(&forward, &backward));
}

#[test]
fn reloaded_system_recalls_identically() {
    let (system, dataset, _) = common::trained_default();
    let reloaded = load_weights(&save_weights(&system)).unwrap();
    for (group, label) in [(Group::Forward, "red"), (Group::Reverse, "Andromeda")] {
        let (ball, i) = dataset.find_label(label).unwrap();
        let v = vectorize(&dataset.images(ball).unwrap()[i]).unwrap();
        let before = chain_recall(&system, group, &v).unwrap();
        let after = chain_recall(&reloaded, group, &v).unwrap();
        assert_eq!(before, after);
        assert_eq!(before, chain_recall(&system, group, &v).unwrap());
    }
}

#[test]
fn concurrent_readers_agree() {
    let (system, dataset, _) = common::trained_default();
    let system = Arc::new(system);
    let v = Arc::new(vectorize(&dataset.images("Color").unwrap()[0]).unwrap());
    let expected = chain_recall(&system, Group::Forward, &v).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let (s, v) = (Arc::clone(&system), Arc::clone(&v));
            thread::spawn(move || chain_recall(&s, Group::Forward, &v).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
}

#[test]
fn training_report_and_csv() {
    let (_, _, report) = common::trained_default();
    let per_group = |g| report.records.iter().filter(|r| r.group == Some(g)).count();
    assert_eq!(per_group(Group::Forward), 8);
    assert_eq!(per_group(Group::Reverse), 8);
    assert!(report.max_q_error() < 1e-6);
    assert!(report.records.iter().all(|r| r.final_error >= 0.0));
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + 35 + 35 + 16);
    assert!(csv.contains("u,Color->Shape,0->4,1,0,110\n"));
}

#[test]
fn rerunning_phases_on_trained_system_is_stable() {
    let (system, dataset, _) = common::trained_default();
    let mut again = system.clone();
    train_w(&mut again, &dataset).unwrap();
    train_v(&mut again).unwrap();
    train_u(&mut again, &default_chains(system.config()).unwrap()).unwrap();
    assert_eq!(common::max_weight_delta(&system, &again), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Unit rates from zero converge in one update for w, v and u.
    #[test]
    fn one_step_convergence(
        bits in proptest::collection::vec(any::<bool>(), 1..40),
        theta in 72.0f64..500.0,
    ) {
        prop_assume!(bits.iter().any(|&b| b));
        let n = bits.len();
        let img = cbrn::PatternImage::new(n, 1, bits, "p").unwrap();
        let d = vectorize(&img).unwrap();
        let mut ball = CueBall::new("A", 1, n);
        let rw = learn_w(&mut ball, 0, &d, 1.0).unwrap();
        prop_assert_eq!(rw.iterations, 1);
        prop_assert!(rw.final_error <= 1e-9);
        let rv = learn_v(&mut ball, 0, theta, 1.0).unwrap();
        prop_assert!(rv.iterations <= 1);
        prop_assert!((rv.final_q.unwrap() - theta).abs() <= 1e-9);

        let mut link = CrossLink::new("A", "B", 2);
        let ru = learn_u(&mut link, 1, 0, 1.0, theta, 1.0).unwrap();
        prop_assert_eq!(ru.iterations, 1);
        prop_assert_eq!(ru.final_q, Some(theta));
    }

    #[test]
    fn synth_is_pure(label in "[a-zA-Z]{1,12}", w in 1usize..40, h in 1usize..40) {
        let a = synth_pattern(&label, w, h).unwrap();
        prop_assert_eq!(&a, &synth_pattern(&label, w, h).unwrap());
        prop_assert!(a.dark_count() > 0);
    }
}
