use goalrec_core::bench::{problems_csv, rows_csv, rows_table, run_bench, strip_timing, BenchConfig, BenchError, Recognizer, ROWS_HEADER};
use goalrec_core::dataset::{build_dataset, DatasetConfig};
use goalrec_core::domains::DomainKind;

fn hanoi_bench(recognizers: Vec<Recognizer>) -> Result<goalrec_core::bench::BenchOutput, BenchError> {
    let ds = build_dataset(&DatasetConfig::for_domain(DomainKind::Hanoi34)).unwrap();
    run_bench(&ds, None, &BenchConfig { recognizers, ..BenchConfig::default() })
}

#[test]
fn rows_cover_every_level_and_theta() {
    let out = hanoi_bench(vec![Recognizer::PomGc, Recognizer::Rg]).unwrap();
    // 5 levels x (2 thetas + rg)
    assert_eq!(out.rows.len(), 15);
    assert_eq!(out.problems.len(), 6 * 15);
    for r in &out.rows {
        assert_eq!(r.problems, 6);
        assert!((0.0..=100.0).contains(&r.accuracy));
        assert!(r.strict_accuracy <= r.accuracy);
        assert!(r.mean_spread >= 1.0);
    }
    let full: Vec<_> = out.rows.iter().filter(|r| r.level == 100 && r.theta.unwrap_or(0.0) == 0.0).collect();
    assert!(full.iter().all(|r| r.accuracy == 100.0), "{full:?}");
    let table = rows_table(&out.rows);
    assert!(table.contains("pom_gc θ=10") && table.contains("hanoi34"));
}

#[test]
fn csv_minus_timing_is_reproducible() {
    let a = hanoi_bench(vec![Recognizer::PomUniq, Recognizer::Rg]).unwrap();
    let b = hanoi_bench(vec![Recognizer::PomUniq, Recognizer::Rg]).unwrap();
    let csv = rows_csv(&a.rows);
    assert!(csv.starts_with(ROWS_HEADER));
    assert!(csv.lines().next().unwrap().ends_with("mean_time_s"));
    assert_eq!(strip_timing(&csv), strip_timing(&rows_csv(&b.rows)));
    assert_eq!(strip_timing(&problems_csv(&a.problems)), strip_timing(&problems_csv(&b.problems)));
    assert!(!strip_timing(&csv).contains("mean_time_s"));
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(hanoi_bench(Vec::new()), Err(BenchError::Config(_))));
    assert!(matches!(hanoi_bench(vec![Recognizer::Lstm]), Err(BenchError::MissingCheckpoint)));
    assert_eq!("pom_uniq".parse::<Recognizer>().unwrap(), Recognizer::PomUniq);
    assert!("pom".parse::<Recognizer>().is_err());
}
