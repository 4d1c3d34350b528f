//! Database behavior through the public command API.

use std::fs;

use bianchi_core::commands::{
    cmd_homology, cmd_polyhedron, cmd_table, complex_path, index_path, polyhedron_path, RunConfig,
    Source,
};
use bianchi_core::AbelianGroup;

fn group(s: &str) -> AbelianGroup {
    s.parse().unwrap()
}

#[test]
fn small_table_has_the_first_rows() {
    let dir = tempfile::tempdir().unwrap();
    let table = cmd_table(24, &RunConfig::new(dir.path())).unwrap();
    let discs: Vec<i64> = table.lines.iter().map(|l| l.disc).collect();
    assert_eq!(discs, vec![-7, -8, -11, -15, -19, -20, -23, -24]);
    assert_eq!(table.failures(), 0);
    let text = table.render_text();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().nth(6).unwrap().contains("(Z/2)^2 ⊕ Z/3"));
}

#[test]
fn empty_range_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = cmd_table(5, &RunConfig::new(dir.path())).unwrap();
    assert!(table.lines.is_empty());
    assert_eq!(table.render_text().lines().count(), 1);
    let json: serde_json::Value = serde_json::from_str(&table.render_json()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 0);
}

#[test]
fn homology_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(dir.path());
    let row = cmd_homology(7, &cfg).unwrap().row;
    assert!(row.class_group.is_trivial());
    assert!(row.h1_cusp.is_trivial());
    assert_eq!(row.farrell_supplement, group("Z/2"));
    let row = cmd_homology(35, &cfg).unwrap().row;
    assert_eq!(row.h1_cusp, group("Z"));
}

#[test]
fn round_trip_is_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cmd_homology(15, &RunConfig::new(a.path())).unwrap();
    cmd_homology(15, &RunConfig::new(b.path())).unwrap();
    for path in [polyhedron_path, complex_path] {
        assert_eq!(
            fs::read(path(a.path(), 15)).unwrap(),
            fs::read(path(b.path(), 15)).unwrap()
        );
    }
    assert_eq!(
        fs::read(index_path(a.path())).unwrap(),
        fs::read(index_path(b.path())).unwrap()
    );
}

#[test]
fn polyhedron_then_homology_reuses_the_polyhedron() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(dir.path());
    assert_eq!(cmd_polyhedron(5, &cfg).unwrap().source, Source::Computed);
    let out = cmd_homology(5, &cfg).unwrap();
    assert_eq!(out.polyhedron, Source::Cached);
    assert_eq!(out.complex, Source::Computed);
}

#[test]
fn truncated_polyhedron_is_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(dir.path());
    cmd_polyhedron(6, &cfg).unwrap();
    let path = polyhedron_path(dir.path(), 6);
    let good = fs::read(&path).unwrap();
    fs::write(&path, &good[..good.len() / 2]).unwrap();
    assert_eq!(cmd_polyhedron(6, &cfg).unwrap().source, Source::Computed);
    assert_eq!(fs::read(&path).unwrap(), good);
}

#[test]
fn fresh_runs_ignore_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::new(dir.path());
    cmd_homology(11, &cfg).unwrap();
    let fresh = RunConfig {
        resume: false,
        ..cfg
    };
    let out = cmd_homology(11, &fresh).unwrap();
    assert_eq!(out.polyhedron, Source::Computed);
    assert_eq!(out.complex, Source::Computed);
}

#[test]
fn max_norm_respects_the_class_number_one_bound() {
    let dir = tempfile::tempdir().unwrap();
    let poly = cmd_polyhedron(2, &RunConfig::new(dir.path()))
        .unwrap()
        .polyhedron;
    // |disc| = 8
    assert!(poly.list.max_norm() <= 16);
}
