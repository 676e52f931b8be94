use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use regime_langevin::data::*;
use regime_langevin::models::sigmoid;
use regime_langevin::numerics::RngStream;

fn iris_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.data")
}

#[test]
fn linreg_generator_moments() {
    let n = 100_000;
    let p = gen_linreg(n, 1.0, &mut RngStream::new(50));
    let noise: Vec<f64> = (0..n)
        .map(|j| p.responses[j] - p.features.row(j).iter().zip(LINREG_TRUE_COEFFICIENTS).map(|(a, c)| a * c).sum::<f64>())
        .collect();
    let noise_var = noise.iter().map(|e| e * e).sum::<f64>() / n as f64;
    assert!((noise_var / 0.25 - 1.0).abs() < 0.02, "{noise_var}");
    for a in 0..3 {
        for b in 0..3 {
            let cov = (0..n).map(|j| p.features[(j, a)] * p.features[(j, b)]).sum::<f64>() / n as f64;
            if a == b {
                assert!((cov / 0.5 - 1.0).abs() < 0.02, "var {a}: {cov}");
            } else {
                assert!(cov.abs() < 0.01, "cov {a}{b}: {cov}");
            }
        }
    }
    let single = gen_linreg(1, 1.0, &mut RngStream::new(0));
    assert_eq!((single.features.rows(), single.features.cols(), single.responses.len()), (1, 3, 1));
}

#[test]
fn logreg_generator_examples() {
    let flat = gen_logreg_with_coefficients(100_000, vec![0.0; 3], 2.0, &mut RngStream::new(51));
    assert!((flat.problem.positive_fraction() - 0.5).abs() < 0.01);

    let full_size = gen_logreg(20_000, 3, 2.0, &mut RngStream::new(52));
    assert_eq!((full_size.problem.n(), full_size.problem.d()), (20_000, 3));
    assert_eq!(full_size.coefficients.len(), 3);
}

#[test]
fn logreg_labels_are_calibrated() {
    let synth = gen_logreg_with_coefficients(100_000, vec![0.8, -0.5, 0.3], 2.0, &mut RngStream::new(53));
    let p = &synth.problem;
    let mut bins = vec![(0.0, 0.0, 0usize); 12];
    for j in 0..p.n() {
        let s: f64 = p.features.row(j).iter().zip(&synth.coefficients).map(|(a, b)| a * b).sum();
        let k = ((s + 3.0) / 0.5).floor();
        if (0.0..12.0).contains(&k) {
            let bin = &mut bins[k as usize];
            bin.0 += p.labels[j];
            bin.1 += sigmoid(s);
            bin.2 += 1;
        }
    }
    for (labels, probs, count) in bins.into_iter().filter(|b| b.2 >= 1000) {
        let (freq, expected) = (labels / count as f64, probs / count as f64);
        assert!((freq - expected).abs() < 0.03, "{freq} vs {expected} over {count}");
    }
}

#[test]
fn generators_are_seed_reproducible() {
    assert_eq!(gen_linreg(500, 1.0, &mut RngStream::new(7)), gen_linreg(500, 1.0, &mut RngStream::new(7)));
    assert_eq!(gen_logreg(500, 4, 2.0, &mut RngStream::new(7)), gen_logreg(500, 4, 2.0, &mut RngStream::new(7)));
    assert_ne!(gen_linreg(500, 1.0, &mut RngStream::new(7)), gen_linreg(500, 1.0, &mut RngStream::new(8)));
}

#[test]
fn iris_file_loads_and_binarizes() {
    let ds = load_csv(&iris_path(), &Schema::iris()).unwrap();
    assert_eq!((ds.n(), ds.d()), (150, 4));
    let again = load_csv(&iris_path(), &Schema::iris()).unwrap();
    assert_eq!(ds, again);
    let setosa = binarize_labels(&ds, "Iris-setosa").unwrap();
    let Labels::Numeric(y) = &setosa.labels else { panic!("numeric labels expected") };
    assert_eq!(y.len(), 150);
    assert_eq!(y.iter().sum::<f64>(), 50.0);
    let Labels::Categorical(names) = &ds.labels else { panic!("categorical labels expected") };
    for (name, label) in names.iter().zip(y) {
        assert_eq!(*label == 1.0, name == "Iris-setosa");
    }
    assert_eq!(setosa.features, ds.features);
    assert!(matches!(binarize_labels(&ds, "Iris-unknown"), Err(DataError::UnknownClass(_))));
    assert!(setosa.to_logreg(2.0).is_ok());
    assert!(ds.to_logreg(2.0).is_err());
}

#[test]
fn standardization_examples() {
    let ds = load_csv(&iris_path(), &Schema::iris()).unwrap();
    let (scaled, t) = standardize(&ds);
    assert!(t.invert(&scaled.features).sub(&ds.features).max_abs() < 1e-10);
    let (twice, t2) = standardize(&scaled);
    assert!(twice.features.sub(&scaled.features).max_abs() < 1e-12);
    assert!(t2.means.iter().all(|m| m.abs() < 1e-12));
    assert!(t2.scales.iter().all(|s| (s - 1.0).abs() < 1e-12));
    let with_intercept = add_intercept(&scaled);
    assert_eq!(with_intercept.d(), 5);
    let (re, t3) = standardize(&with_intercept);
    assert_eq!(t3.scales[4], 1.0);
    assert!((0..re.n()).all(|i| re.features[(i, 4)] == 0.0));
}

fn magic_fixture(dir: &Path, rows: usize) -> (PathBuf, usize) {
    let mut rng = RngStream::new(54);
    let mut text = String::new();
    let mut gammas = 0;
    for _ in 0..rows {
        for _ in 0..10 {
            write!(text, "{:.4},", 50.0 * rng.normal()).unwrap();
        }
        let class = if rng.uniform() < 0.65 { gammas += 1; "g" } else { "h" };
        writeln!(text, "{class}").unwrap();
    }
    let path = dir.join("magic04.data");
    fs::write(&path, text).unwrap();
    (path, gammas)
}

#[test]
fn magic_layout_loads() {
    let dir = tempfile::tempdir().unwrap();
    let (path, gammas) = magic_fixture(dir.path(), 19_020);
    let ds = load_csv(&path, &Schema::magic()).unwrap();
    assert_eq!((ds.n(), ds.d()), (19_020, 10));
    let bin = binarize_labels(&ds, "g").unwrap();
    let Labels::Numeric(y) = &bin.labels else { panic!("numeric labels expected") };
    assert_eq!(y.iter().sum::<f64>() as usize, gammas);
    let Provenance::File { fnv1a64: hash, .. } = ds.provenance else { panic!("file provenance expected") };
    assert_eq!(hash, fnv1a64(&fs::read(&path).unwrap()));

    let (short, _) = magic_fixture(dir.path(), 100);
    assert!(matches!(load_csv(&short, &Schema::magic()), Err(DataError::SchemaMismatch(_))));
}

#[test]
fn loader_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing.csv");
    assert!(matches!(load_csv(&missing, &Schema::iris()), Err(DataError::FileNotFound(p)) if p == missing));

    let mut text = fs::read_to_string(iris_path()).unwrap();
    text = text.replacen("4.9,3.0,1.4,0.2", "4.9,abc,1.4,0.2", 1);
    let bad = dir.path().join("bad.data");
    fs::write(&bad, &text).unwrap();
    match load_csv(&bad, &Schema::iris()) {
        Err(DataError::ParseError { row, column, value }) => {
            assert_eq!((row, column, value.as_str()), (2, 2, "abc"));
        }
        other => panic!("unexpected {other:?}"),
    }

    let ragged = dir.path().join("ragged.data");
    fs::write(&ragged, "5.1,3.5,1.4,Iris-setosa\n").unwrap();
    assert!(matches!(load_csv(&ragged, &Schema::iris()), Err(DataError::SchemaMismatch(_))));
}
