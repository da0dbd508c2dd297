use super::*;
use std::fs;

fn idx_images(n: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let mut b = 0x0803u32.to_be_bytes().to_vec();
    for d in [n, rows, cols] {
        b.extend(d.to_be_bytes());
    }
    b.extend(pixels);
    b
}

fn idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut b = 0x0801u32.to_be_bytes().to_vec();
    b.extend((labels.len() as u32).to_be_bytes());
    b.extend(labels);
    b
}

fn write_pair(dir: &Path, images: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
    let (ip, lp) = (dir.join("images"), dir.join("labels"));
    fs::write(&ip, images).unwrap();
    fs::write(&lp, labels).unwrap();
    (ip, lp)
}

#[test]
fn idx_pair_pixel_order() {
    let dir = tempfile::tempdir().unwrap();
    let pixels = [0, 51, 102, 153, 204, 255, 0, 255];
    let (ip, lp) = write_pair(dir.path(), &idx_images(2, 2, 2, &pixels), &idx_labels(&[3, 9]));
    let d = load_idx(&ip, &lp).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.sample_shape(), &[1, 2, 2]);
    assert_eq!(d.labels(), &[3, 9]);
    assert_eq!(d.inputs().to_f64_vec(), vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 0.0, 1.0]);
    assert_eq!(load_idx(&ip, &lp).unwrap(), d);
}

#[test]
fn idx_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut wrong = idx_images(1, 1, 1, &[0]);
    wrong[3] = 0x01;
    let (ip, lp) = write_pair(dir.path(), &wrong, &idx_labels(&[0]));
    assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));

    let mut short = idx_labels(&[0, 1]);
    short.pop();
    let (ip, lp) = write_pair(dir.path(), &idx_images(2, 1, 1, &[0, 0]), &short);
    assert!(matches!(load_idx(&ip, &lp), Err(Error::Truncated { expected: 10, actual: 9, .. })));

    let (ip, lp) = write_pair(dir.path(), &idx_images(2, 1, 1, &[0, 0]), &idx_labels(&[0]));
    assert!(matches!(load_idx(&ip, &lp), Err(Error::CountMismatch { images: 2, labels: 1 })));

    let missing = load_idx(dir.path().join("nope"), &lp).unwrap_err();
    assert!(missing.to_string().contains("nope"));
}

#[test]
fn cifar_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut one = vec![7u8];
    one.extend(std::iter::repeat_n(0u8, 3072));
    let p = dir.path().join("one.bin");
    fs::write(&p, &one).unwrap();
    let d = load_cifar10(&[&p]).unwrap();
    assert_eq!((d.len(), d.labels()[0]), (1, 7));
    assert_eq!(d.sample_shape(), &[3, 32, 32]);
    assert!(d.inputs().data().iter().all(|&v| v == 0.0));

    let mut two = one.clone();
    two.push(2);
    two.extend((0..3072).map(|i| (i % 256) as u8));
    fs::write(&p, &two).unwrap();
    let d = load_cifar10(&[&p]).unwrap();
    assert_eq!(d.labels(), &[7, 2]);
    assert_eq!(d.inputs().get(3072 + 255), 1.0);
    assert_eq!(d.inputs().get(3072 + 1), 1.0 / 255.0);

    fs::write(&p, vec![0u8; 3072]).unwrap();
    assert!(matches!(load_cifar10(&[&p]), Err(Error::Format { .. })));
}

#[test]
fn synthetic_is_deterministic_and_normalized() {
    for kind in [SyntheticKind::Blobs, SyntheticKind::Spirals] {
        let a = make_synthetic(kind, 300, 3, 0.1, 4).unwrap();
        assert_eq!(a, make_synthetic(kind, 300, 3, 0.1, 4).unwrap());
        assert_ne!(a, make_synthetic(kind, 300, 3, 0.1, 5).unwrap());
        assert!(a.inputs().data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(make_synthetic(SyntheticKind::Blobs, 1, 2, 0.0, 0).is_err());
    assert!(make_synthetic(SyntheticKind::Blobs, 10, 2, -1.0, 0).is_err());
}

#[test]
fn noiseless_blobs_are_separable_by_hand() {
    let d = make_synthetic(SyntheticKind::Blobs, 40, 2, 0.0, 0).unwrap();
    // centres sit at angle 0 and π, so the first feature separates them.
    for (i, &l) in d.labels().iter().enumerate() {
        let x = d.inputs().get(2 * i);
        assert_eq!(x > 0.5, l == 0);
        assert!((x - 0.5).abs() >= 0.5);
    }
}

#[test]
fn subsets() {
    let d = make_synthetic(SyntheticKind::Blobs, 90, 3, 0.2, 1).unwrap();
    assert_eq!(d.first(10).labels(), &[0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
    let b = d.balanced(30, 9);
    assert_eq!(b, d.balanced(30, 9));
    for c in 0..3 {
        assert_eq!(b.labels().iter().filter(|&&l| l == c).count(), 10);
    }
    let (train, test) = d.train_test_split(0.2, 3);
    assert_eq!((train.len(), test.len()), (72, 18));
    assert_eq!((train.split(), test.split()), (Split::Train, Split::Test));
}

#[test]
fn csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = make_synthetic(SyntheticKind::Spirals, 4, 2, 0.0, 0).unwrap();
    let p = dir.path().join("d.csv");
    d.write_csv(&p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "x0,x1,label");
    assert!(lines[1].ends_with(",0") && lines[2].ends_with(",1"));
}
