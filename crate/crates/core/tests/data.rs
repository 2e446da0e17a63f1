use mlcsearch::data::{label_stats, load_csv, load_meka_arff, parse_meka_arff, split_indices, write_csv, DataError};
use mlcsearch::synth::{generate, SynthKind};
use mlcsearch::LabelPosition;

#[test]
fn csv_round_trips_for_both_label_positions() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [SynthKind::Blobs, SynthKind::XorDependence, SynthKind::CopyLabel] {
        let ds = generate(kind, 40, 3, 2, 7).unwrap();
        for pos in [LabelPosition::Prefix, LabelPosition::Suffix] {
            let path = dir.path().join(format!("{}-{pos:?}.csv", kind.name()));
            write_csv(&ds, &path, pos).unwrap();
            assert_eq!(load_csv(&path, 2, pos).unwrap(), ds);
        }
    }
}

#[test]
fn missing_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_csv(dir.path().join("absent.csv"), 1, LabelPosition::Suffix).unwrap_err();
    assert!(matches!(err, DataError::MissingFile(_)));
    assert!(matches!(
        load_meka_arff(dir.path().join("absent.arff")),
        Err(DataError::MissingFile(_))
    ));
}

#[test]
fn meka_arff_labels_come_first() {
    let text = "% comment\n@relation 'scene: -C 2'\n@attribute sea {0,1}\n@attribute 'beach front' {0,1}\n\
                @attribute f1 numeric\n@attribute f2 real\n@data\n1,0,0.5,2\n0,1,-1,3\n";
    let ds = parse_meka_arff(text).unwrap();
    assert_eq!((ds.n_rows(), ds.n_features(), ds.n_labels()), (2, 2, 2));
    assert_eq!(ds.label_names, vec!["sea", "beach front"]);
    assert_eq!(ds.labels[[1, 1]], 1);
    assert_eq!(ds.features[[0, 1]], 2.0);
    let stats = label_stats(&ds);
    assert_eq!(stats.cardinality, 1.0);
    assert_eq!(stats.density, 0.5);
    assert_eq!(stats.distinct_labelsets, 2);
}

#[test]
fn malformed_arff_is_rejected() {
    let no_marker = "@relation scene\n@attribute a {0,1}\n@attribute f numeric\n@data\n1,2\n";
    assert!(matches!(
        parse_meka_arff(no_marker),
        Err(DataError::MissingRelationMarker)
    ));
    let nominal = "@relation 'x: -C 1'\n@attribute a {0,1}\n@attribute f {red,blue}\n@data\n1,red\n";
    assert!(matches!(
        parse_meka_arff(nominal),
        Err(DataError::UnsupportedAttributeType(_))
    ));
    let sparse = "@relation 'x: -C 1'\n@attribute a {0,1}\n@attribute f numeric\n@data\n{0 1}\n";
    assert!(parse_meka_arff(sparse).is_err());
    let too_many = "@relation 'x: -C 2'\n@attribute a {0,1}\n@attribute f numeric\n@data\n1,2\n";
    assert!(matches!(
        parse_meka_arff(too_many),
        Err(DataError::LabelCountExceedsColumns { .. })
    ));
}

#[test]
fn splits_are_seeded_partitions() {
    for seed in 0..10 {
        let (a, b) = split_indices(50, 0.7, seed).unwrap();
        assert_eq!((a.len(), b.len()), (35, 15));
        let mut all = [a.clone(), b].concat();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(split_indices(50, 0.7, seed).unwrap().0, a);
    }
    assert!(split_indices(1, 0.5, 0).is_err());
    assert!(split_indices(10, 1.0, 0).is_err());
}
