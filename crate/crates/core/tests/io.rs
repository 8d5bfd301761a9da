//! File round trips for every emitted format.

use chrono::NaiveDate;
use episcale::coupling::TargetCurve;
use episcale::estimation::ObservationSeries;
use episcale::io::{
    load_buildings, load_observations, load_target, read_table, write_buildings, write_counts_csv,
    write_observations_csv, write_svg_chart, write_table, write_target_csv, ChartSeries, IoError, Table,
};
use episcale::town::{synthetic_layout, Counts, LayoutCounts};

#[test]
fn observations_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.csv");
    let values = [[1.5, 0.25, 0.0], [2.0, 1.0 / 3.0, 1e-7], [2.5, 0.5, 3.0]];
    let series = ObservationSeries::from_values(NaiveDate::from_ymd_opt(2020, 3, 17).unwrap(), &values).unwrap();
    write_observations_csv(&series, &path).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("date,H,U,D\n"));
    assert_eq!(load_observations(&path).unwrap(), series);
}

#[test]
fn target_and_tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("target.csv");
    let curve = TargetCurve::new(NaiveDate::from_ymd_opt(2020, 10, 30), vec![27.0, 0.1 + 0.2, 3.0]).unwrap();
    write_target_csv(&curve, &path).unwrap();
    assert_eq!(load_target(&path).unwrap(), curve);

    let mut t = Table::new(&["a", "b"]);
    t.push(vec!["1".into(), "x,y".into()]);
    t.push(vec!["2".into(), "\"q\"".into()]);
    let tp = dir.path().join("t.csv");
    write_table(&tp, &t).unwrap();
    assert_eq!(read_table(&tp).unwrap(), t);

    let counts = vec![Counts { susceptible: 9, asymptomatic: 1, symptomatic: 0, recovered: 0 }; 289];
    let cp = dir.path().join("counts.csv");
    write_counts_csv(&cp, &counts, 144).unwrap();
    let back = read_table(&cp).unwrap();
    assert_eq!(back.header, ["tick", "day", "S", "Ia", "Is", "R"]);
    assert_eq!(back.rows.len(), 3);
    assert_eq!(back.rows[2], ["288", "2", "9", "1", "0", "0"]);
}

#[test]
fn buildings_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("town.geojson");
    let town = synthetic_layout(&LayoutCounts::default(), 5);
    write_buildings(&path, &town).unwrap();
    let back = load_buildings(&path).unwrap();
    assert_eq!(back.len(), town.len());
    assert!(town.iter().zip(&back).all(|(a, b)| a.category == b.category && a.footprint == b.footprint));
}

#[test]
fn charts_have_one_polyline_per_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.svg");
    let s = vec![
        ChartSeries::new("model", vec![(0.0, 1.0), (1.0, 4.0)]),
        ChartSeries::new("data", vec![(0.0, 2.0), (1.0, 3.0)]),
    ];
    write_svg_chart(&path, "two", "day", "value", &s).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().matches("<polyline").count(), 2);
    write_svg_chart(&path, "none", "day", "value", &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap().matches("<polyline").count(), 0);
}

#[test]
fn missing_files_name_the_path() {
    let err = load_observations(std::path::Path::new("/nonexistent/obs.csv")).unwrap_err();
    assert!(matches!(err, IoError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/obs.csv"));
}
