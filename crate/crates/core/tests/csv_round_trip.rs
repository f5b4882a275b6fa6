use alphareg::ingestion::write_dataset;
use alphareg::{csv_header, generate, load_csv, load_predictors, DatasetSchema, SimSpec};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[test]
fn written_datasets_load_back_exactly() {
    let d = generate::<f64>(&SimSpec::segmented(150, 5, 8)).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    write_dataset(std::fs::File::create(file.path()).unwrap(), &d.x, &d.u, &names("z", 1), &names("y", 5)).unwrap();
    assert_eq!(csv_header(file.path(), b',').unwrap(), ["z1", "y1", "y2", "y3", "y4", "y5"]);
    let back = load_csv::<f64>(file.path(), &DatasetSchema::new(names("y", 5), names("z", 1))).unwrap();
    assert_eq!(back.x.as_flat(), d.x.as_flat());
    assert_eq!(back.u.as_flat(), d.u.as_flat());
    assert_eq!(back.response_names, names("y", 5));
}

#[test]
fn predictors_load_without_responses() {
    let file = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(file.path(), "a;b\n1.5;2\n-3;4e-2\n").unwrap();
    let schema = DatasetSchema::new(vec![], vec!["b".into(), "a".into()]).with_delimiter(b';');
    let (x, u) = load_predictors::<f64>(file.path(), &schema).unwrap();
    assert!(u.is_none());
    assert_eq!(x.as_flat(), &[2.0, 1.5, 0.04, -3.0]);
}

#[test]
fn bad_cells_name_their_line() {
    let file = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(file.path(), "x,a,b\n1,0.5,0.5\n2,oops,0.5\n").unwrap();
    let err = load_csv::<f64>(file.path(), &DatasetSchema::new(vec!["a".into(), "b".into()], vec!["x".into()]))
        .unwrap_err()
        .to_string();
    assert!(err.contains("line 3") && err.contains("oops"), "{err}");
}
