use std::fs;

use shallow_core::arch::{build_lenet, build_vgg16, build_vgg16_enhanced, conservation_report, ArchSpec};
use shallow_core::complexity::{madds, CountMode};
use shallow_core::data_io::{emit_table, load_batch_file, load_cifar10, load_cifar10_with, parse_table, LoadOptions, IMAGE_LEN, RECORD_LEN};
use shallow_core::Error;

fn records(n: usize, salt: u8) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(n * RECORD_LEN);
    for r in 0..n {
        bytes.push((r % 10) as u8);
        bytes.extend((0..IMAGE_LEN).map(|p| (p as u8).wrapping_mul(3).wrapping_add(r as u8).wrapping_add(salt)));
    }
    bytes
}

#[test]
fn loads_nested_archive_layout() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("cifar-10-batches-bin");
    fs::create_dir(&root).unwrap();
    for i in 1..=5 {
        fs::write(root.join(format!("data_batch_{i}.bin")), records(20, i)).unwrap();
    }
    fs::write(root.join("test_batch.bin"), records(10, 99)).unwrap();

    assert!(matches!(load_cifar10(dir.path()), Err(Error::RecordCount { .. })));
    let (train, test) = load_cifar10_with(dir.path(), LoadOptions { strict_counts: false }).unwrap();
    assert_eq!((train.len(), test.len()), (100, 10));
    assert_eq!(train.class_counts(), [10; 10]);
    assert_eq!(test.raw_image(3)[..2], [99u8.wrapping_add(3), 99u8.wrapping_add(6)]);

    let batch = train.batch(&[0, 21]).unwrap();
    assert_eq!(batch.shape(), &[2, 3, 32, 32]);
    assert!(batch.data().iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn truncated_file_reports_last_record_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.bin");
    let mut bytes = records(3, 0);
    bytes.truncate(2 * RECORD_LEN + 100);
    fs::write(&path, bytes).unwrap();
    match load_batch_file(&path, None) {
        Err(Error::Truncated { offset, .. }) => assert_eq!(offset, 2 * RECORD_LEN as u64),
        other => panic!("{other:?}"),
    }
}

#[test]
fn spec_text_round_trip_keeps_counts() {
    for spec in [
        build_lenet(6, 8.0 / 3.0, None).unwrap(),
        build_lenet(3, 16.0 / 3.0, None).unwrap(),
        build_vgg16(4, 1.5).unwrap(),
        build_vgg16_enhanced(2).unwrap(),
    ] {
        let back = ArchSpec::from_text(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
        let (a, b) = (madds(&spec, CountMode::Forward).unwrap(), madds(&back, CountMode::ForwardBackward).unwrap());
        assert_eq!(3 * a.total, b.total);
    }
    assert!(conservation_report(&build_vgg16_enhanced(8).unwrap()).unwrap().max_deviation < 1e-12);
}

#[test]
fn tables_round_trip() {
    let cols = vec!["d".to_string(), "epsilon".to_string()];
    let rows = vec![vec!["8".to_string(), "0.1496".to_string()], vec!["16".to_string(), "0.1097".to_string()]];
    let text = emit_table(&cols, &rows).unwrap();
    assert_eq!(parse_table(&format!("# comment\n{text}")).unwrap(), (cols.clone(), rows));
    assert!(emit_table(&cols, &[vec!["1".to_string()]]).is_err());
}
