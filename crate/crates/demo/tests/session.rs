use mgcn::DenseMatrix;
use mgcn_demo::{principal_plane, Session};
use serde_json::Value;

fn session() -> Session {
    Session::new(r#"{"nodes": 60, "communities": 3, "p_in": 0.2, "p_out": 0.02, "seed": 4}"#)
        .unwrap()
}

#[test]
fn training_extends_curve_and_scores() {
    let mut s = session();
    let first: Value =
        serde_json::from_str(&s.train(r#"{"epochs": 20, "dim": 8}"#).unwrap()).unwrap();
    assert_eq!(first["total"].as_array().unwrap().len(), 20);
    let more: Value =
        serde_json::from_str(&s.train(r#"{"epochs": 30, "dim": 8}"#).unwrap()).unwrap();
    assert_eq!(more["epochs"], 50);
    let total = more["total"].as_array().unwrap();
    assert_eq!(total.len(), 50);
    assert!(total[49].as_f64().unwrap() < total[0].as_f64().unwrap());
    let micro = more["micro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&micro));
    // A new dimension starts over.
    let reset: Value =
        serde_json::from_str(&s.train(r#"{"epochs": 5, "dim": 4}"#).unwrap()).unwrap();
    assert_eq!(reset["total"].as_array().unwrap().len(), 5);
}

#[test]
fn projection_and_heatmap_shapes() {
    let mut s = session();
    assert!(s.project(0).is_err());
    s.train(r#"{"epochs": 10}"#).unwrap();
    let p: Value = serde_json::from_str(&s.project(1).unwrap()).unwrap();
    assert_eq!(p["points"].as_array().unwrap().len(), 60);
    assert_eq!(p["community"].as_array().unwrap().len(), 60);
    // Layer 2 is unlabeled by default, so none of its nodes train.
    assert!(p["train"].as_array().unwrap().iter().all(|t| t == false));

    let h: Value = serde_json::from_str(&s.heatmap(1, 0).unwrap()).unwrap();
    assert_eq!(
        (h["rows"].as_u64(), h["cols"].as_u64()),
        (Some(60), Some(60))
    );
    assert_eq!(h["probability"].as_array().unwrap().len(), 3600);
    assert!(h["edge"].as_array().unwrap().iter().any(|e| e == 1));
    assert!(s.heatmap(0, 5).is_err());
}

#[test]
fn same_options_same_results() {
    let run = || {
        let mut s = session();
        s.train(r#"{"epochs": 15, "dim": 6, "use_between_edges": false}"#)
            .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn bad_options_are_reported() {
    assert!(Session::new(r#"{"p_in": 2.0}"#).is_err());
    assert!(Session::new(r#"{"layers": 9}"#).is_err());
    assert!(Session::new("not json").is_err());
    assert!(session().train(r#"{"epochs": 0}"#).is_err());
}

#[test]
fn plane_recovers_dominant_axes() {
    // Spread 10 along the first feature, 1 along the second, none on the third.
    let z = DenseMatrix::from_rows(&[
        [10.0, 1.0, 0.0],
        [-10.0, 1.0, 0.0],
        [10.0, -1.0, 0.0],
        [-10.0, -1.0, 0.0],
    ]);
    let pts = principal_plane(&z);
    for (p, row) in pts
        .iter()
        .zip([[10.0, 1.0], [-10.0, 1.0], [10.0, -1.0], [-10.0, -1.0]])
    {
        assert!(
            (p[0].abs() - 10.0).abs() < 1e-9 && (p[1].abs() - 1.0).abs() < 1e-9,
            "{p:?} {row:?}"
        );
    }
}
