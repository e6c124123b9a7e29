use std::path::Path;

use tailtopo::ingest::{write_feature_panel, write_manifest, ManifestEntry};
use tailtopo::pipeline::{run_pipeline, run_report_export, Method, PipelineConfig};
use tailtopo::simgen::{simulate_panel, SimulationSpec};
use tailtopo::spectral::BandPeriodogramPanel;

/// Fourteen simulated subjects with D = 12 written as raw feature CSVs.
fn write_study(dir: &Path) -> std::path::PathBuf {
    let mut spec = SimulationSpec::new(14, 6, 6, 0.0, 77).unwrap();
    spec.n_blocks = 600;
    let sim = simulate_panel(&spec).unwrap();
    let mut entries = Vec::new();
    for s in &sim.subjects {
        let file = dir.join(format!("{}.csv", s.id));
        write_feature_panel(&file, &BandPeriodogramPanel::from_matrix(s.id.clone(), sim.channels.clone(), s.raw.clone()))
            .unwrap();
        entries.push(ManifestEntry { subject_id: s.id.clone(), path: file, label: Some(s.label as u32) });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &entries).unwrap();
    manifest
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn export_schema_and_rerun_stability() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_study(tmp.path());
    let config = PipelineConfig { fuzziness_grid: vec![1.1, 2.0], ..PipelineConfig::default() };

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_report_export(&run_pipeline(&config, &manifest).unwrap(), &a).unwrap();
    run_report_export(&run_pipeline(&config, &manifest).unwrap(), &b).unwrap();

    let topo = read(&a.join("topologies.csv"));
    let lines: Vec<&str> = topo.lines().collect();
    assert_eq!(lines.len(), 15);
    assert!(lines.iter().all(|l| l.split(',').count() == 13));

    let members = read(&a.join("memberships_m1.1.csv"));
    assert_eq!(members.lines().next().unwrap(), "subject_id,u_1,u_2,hard_label,fuzzy_flag");
    assert_eq!(members.lines().count(), 15);
    for row in members.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let total: f64 = f[1].parse::<f64>().unwrap() + f[2].parse::<f64>().unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    assert_eq!(read(&a.join("summary.json")), read(&b.join("summary.json")));
    assert_eq!(topo, read(&b.join("topologies.csv")));
    let timings = read(&a.join("timings.csv"));
    assert!(timings.lines().next().unwrap().starts_with("subject_id"));
    assert!(timings.lines().count() > 14);
}

#[test]
fn every_method_runs_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_study(tmp.path());
    for method in [Method::Ctd, Method::Cca, Method::Raw] {
        let config = PipelineConfig { method, fuzziness_grid: vec![2.0], ..PipelineConfig::default() };
        let report = run_pipeline(&config, &manifest).unwrap();
        let acc = report.accuracy_by_m()[0].1.unwrap();
        assert!((0.5..=1.0).contains(&acc), "{}: {acc}", method.as_str());
    }
}
