use noma_coexist::geometry::Position;
use noma_web::{focus_map, rate_curve_json, solve_json};

const DOC: &str = r#"{
  "method": "sca",
  "system": { "beams_per_user": 2 },
  "pdbm": 30,
  "near_users": [{"x": 9.0, "y": 1.0}, {"x": 7.0, "y": -3.0}, {"x": 11.0, "y": 4.0}, {"x": 6.0, "y": 2.5}],
  "far_users": [{"x": 120.0, "y": 15.0}]
}"#;

#[test]
fn focus_map_peaks_at_the_focus() {
    let (cols, rows) = (40, 40);
    let (x_max, y_max) = (20.0, 10.0);
    let focus = Position::new(4.25, 0.25);
    let map = focus_map(64, 28e9, focus, x_max, y_max, cols, rows).unwrap();
    assert_eq!(map.len(), cols * rows);
    assert!(map.iter().all(|g| (0.0..=1.0 + 1e-6).contains(g)));
    let (best, _) = map.iter().enumerate().fold((0, f32::MIN), |a, (i, &g)| if g > a.1 { (i, g) } else { a });
    let (r, c) = (best / cols, best % cols);
    // cell centres at 0.25 + 0.5 i; the focus is cell (19, 8)
    assert_eq!((r, c), (19, 8));
    assert!(map[best] > 0.999);
    // the beam focuses in range, not only in angle
    let far = (19, 39);
    assert!(map[far.0 * cols + far.1] < 0.2);
}

#[test]
fn solve_round_trips_json() {
    let text = solve_json(DOC).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["method"], "sca");
    assert!(v["report"]["objective"].as_f64().unwrap() > 0.0);
    assert!(solve_json("{}").is_err());
}

#[test]
fn rate_curve_rises_with_power() {
    let text = rate_curve_json(DOC, &[10.0, 20.0, 30.0]).unwrap();
    let pts: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(pts.len(), 6);
    let sca: Vec<f64> = pts
        .iter()
        .filter(|p| p["method"] == "sca")
        .map(|p| p["sum_rate"].as_f64().unwrap())
        .collect();
    assert!(sca.windows(2).all(|w| w[1] > w[0]), "{sca:?}");
    for pair in pts.chunks(2) {
        assert!(pair[1]["sum_rate"].as_f64().unwrap() >= pair[0]["sum_rate"].as_f64().unwrap() - 1e-9);
    }
}

