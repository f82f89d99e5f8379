use relaxbc::harness::{convergence_study, emit_report, ExperimentSpec, NormKind, PresetId, ProblemRef, ReportFormats, RateTable};

fn small_study() -> RateTable {
    let mut spec = ExperimentSpec::new(ProblemRef::Preset(PresetId::ScalarLEqN), vec![4e-2, 2e-2, 1e-2]);
    spec.samples = 2;
    convergence_study(&spec).unwrap()
}

#[test]
fn identical_specs_give_identical_reports() {
    let (a, b) = (small_study(), small_study());
    let dir = tempfile::tempdir().unwrap();
    let pa = emit_report(&a, dir.path(), "a", ReportFormats { svg: true }).unwrap();
    let pb = emit_report(&b, dir.path(), "b", ReportFormats { svg: true }).unwrap();
    assert_eq!(pa.len(), 3);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn errors_decrease_with_eps_and_slopes_are_stable() {
    let table = small_study();
    assert_eq!(table.rows.len(), 3);
    for k in [NormKind::L2, NormKind::L2VsU0bar] {
        let fit = table.fit(k).unwrap();
        assert!(fit.monotone, "{k:?}");
        assert_eq!(fit.rows_used, 3);
        assert!(fit.slope.unwrap() > k.theory());
    }
    for r in &table.rows {
        assert!(r.refined_cells > r.n_cells);
        assert!(r.entries.iter().all(|e| e.refinement_ok), "{r:?}");
    }
}

#[test]
fn csv_report_lists_rows_and_slopes() {
    let table = small_study();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&table, dir.path(), "rates", ReportFormats::default()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("slope,")).count(), table.norms.len());
    let json: RateTable = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rates.json")).unwrap()).unwrap();
    assert_eq!(json.rows.len(), 3);
    assert!(!dir.path().join("rates.svg").exists());
}
