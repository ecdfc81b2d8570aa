use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use splitmetric::databench::{
    bench_table, load_dataset, optimal_policy_p, parse_dataset, permutation_loss, Dataset, LoadOptions,
};
use splitmetric::Error;
use std::io::Write;

fn synthetic(m: usize, n: usize, noise: f64, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) + 3.0);
    let b = DVector::from_fn(n, |i, _| 1.0 + i as f64);
    let e = DVector::from_fn(m, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
    let y = &x * b + e;
    (x, y)
}

fn to_csv(x: &DMatrix<f64>, y: &DVector<f64>) -> String {
    let mut s = String::new();
    for i in 0..x.nrows() {
        let mut cells = vec![format!("{:.17e}", y[i])];
        cells.extend(x.row(i).iter().map(|v| format!("{v:.17e}")));
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[test]
fn load_from_file_and_report_missing_path() {
    let (x, y) = synthetic(30, 3, 0.5, 1);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    file.write_all(to_csv(&x, &y).as_bytes()).unwrap();
    let data = load_dataset(file.path(), &LoadOptions::default()).unwrap();
    assert_eq!((data.m(), data.n()), (30, 3));
    assert_eq!(data.provenance().source.as_deref(), Some(file.path()));

    let missing = file.path().with_extension("does-not-exist");
    match load_dataset(&missing, &LoadOptions::default()) {
        Err(e @ Error::Io { .. }) => {
            assert!(e.to_string().contains(missing.to_str().unwrap()));
            assert!(e.is_usage());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn parsed_matches_in_memory_construction() {
    let (x, y) = synthetic(25, 4, 1.0, 2);
    let parsed = parse_dataset(to_csv(&x, &y).as_bytes(), &LoadOptions::default(), None).unwrap();
    let direct = Dataset::from_raw(x, y).unwrap();
    assert!((parsed.features() - direct.features()).amax() < 1e-12);
    assert!((parsed.target() - direct.target()).amax() < 1e-12);
}

#[test]
fn noise_free_target_gives_zero_loss() {
    let (x, y) = synthetic(40, 3, 0.0, 3);
    let data = Dataset::from_raw(x, y).unwrap();
    let scale = data.target().norm_squared() / data.m() as f64;
    for p in [4, 10, 20, 39] {
        let loss = permutation_loss(&data, p, 200, 0).unwrap();
        assert!(loss.mean_loss < 1e-16 * scale, "p={p}: {}", loss.mean_loss);
        assert_eq!(loss.rank_deficient_fits, 0);
    }
}

#[test]
fn same_seed_same_result() {
    let (x, y) = synthetic(50, 4, 1.0, 4);
    let data = Dataset::from_raw(x, y).unwrap();
    let run = |threads: usize, seed| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bench_table(&data, 700, seed).unwrap())
    };
    assert_eq!(run(1, 5), run(3, 5));
    assert_ne!(run(1, 5).half.loss.mean_loss, run(1, 6).half.loss.mean_loss);
}

#[test]
fn row_order_does_not_matter_in_distribution() {
    let (x, y) = synthetic(60, 5, 1.0, 7);
    let data = Dataset::from_raw(x.clone(), y.clone()).unwrap();
    let mut order: Vec<usize> = (0..60).collect();
    order.reverse();
    order.rotate_left(17);
    let xs = DMatrix::from_fn(60, 5, |i, j| x[(order[i], j)]);
    let ys = DVector::from_fn(60, |i, _| y[order[i]]);
    let shuffled = Dataset::from_raw(xs, ys).unwrap();
    for p in [10, 30, 45] {
        let a = permutation_loss(&data, p, 2000, 1).unwrap();
        let b = permutation_loss(&shuffled, p, 2000, 2).unwrap();
        let se = a.std_err.hypot(b.std_err);
        assert!((a.mean_loss - b.mean_loss).abs() < 3.0 * se, "p={p}");
    }
}

#[test]
fn centering_is_idempotent() {
    let (x, y) = synthetic(33, 3, 2.0, 8);
    let once = Dataset::from_raw(x, y).unwrap();
    let twice = Dataset::from_raw(once.features().clone(), once.target().clone()).unwrap();
    assert!((once.features() - twice.features()).amax() < 1e-12);
    assert!((once.target() - twice.target()).amax() < 1e-12);
    for col in twice.features().column_iter() {
        assert!(col.mean().abs() < 1e-12);
    }
}

#[test]
fn optimal_ratio_depends_only_on_shape() {
    let a = Dataset::from_raw(synthetic(80, 6, 0.1, 1).0, synthetic(80, 6, 0.1, 1).1).unwrap();
    let (x, _) = synthetic(80, 6, 5.0, 2);
    let b = Dataset::from_raw(x.clone(), DVector::from_fn(80, |i, _| (i as f64).sin())).unwrap();
    let ra = bench_table(&a, 50, 0).unwrap();
    let rb = bench_table(&b, 50, 9).unwrap();
    assert_eq!(ra.optimal_ratio, rb.optimal_ratio);
    assert_eq!(ra.optimal.p, rb.optimal.p);
}

#[test]
fn policy_sizes() {
    let (x, y) = synthetic(299, 12, 1.0, 3);
    let data = Dataset::from_raw(x, y).unwrap();
    let r = bench_table(&data, 100, 0).unwrap();
    assert_eq!((r.half.p, r.three_quarter.p, r.optimal.p), (150, 224, 161));
    assert!((r.optimal_ratio - 0.5385).abs() < 5e-5);
    assert!(r.half.p < r.optimal.p && r.optimal.p < r.three_quarter.p);
    assert!(r.notes.is_empty());

    for m in [20u64, 21, 22, 23] {
        let (x, y) = synthetic(m as usize, 2, 1.0, m);
        let r = bench_table(&Dataset::from_raw(x, y).unwrap(), 10, 0).unwrap();
        assert_eq!(r.half.p, (m as f64 / 2.0).round() as u64);
    }
}

#[test]
fn fallback_when_analytic_domain_is_empty() {
    assert_eq!(optimal_policy_p(20, 2).unwrap(), (12, None));
    let (p, note) = optimal_policy_p(9, 5).unwrap();
    assert_eq!(p, 8);
    assert!(note.is_some());
    let (x, y) = synthetic(12, 8, 1.0, 0);
    assert!(bench_table(&Dataset::from_raw(x, y).unwrap(), 10, 0).is_err());
}
