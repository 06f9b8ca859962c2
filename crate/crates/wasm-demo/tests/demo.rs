use rashgam_wasm_demo::DemoCore;

#[test]
fn bundled_artifacts_load() {
    let d = DemoCore::demo();
    let v = d.view().unwrap();
    assert_eq!(v.feature_names.len(), 8);
    assert_eq!(v.blocks.last().unwrap().1, v.center.len());
    let (q, inside) = d.contains(&v.center).unwrap();
    assert_eq!(q, 0.0);
    assert!(inside);
}

#[test]
fn dragged_step_flips_badge_and_projection_restores_it() {
    let d = DemoCore::demo();
    let v = d.view().unwrap();
    let mut w = v.center.clone();
    let (a, _) = v.blocks[1];
    w[a] += 10.0;
    assert!(!d.contains(&w).unwrap().1);
    let p = d.project(&w).unwrap();
    assert!(!p.inside_already);
    let (q, _) = d.contains(&p.omega).unwrap();
    assert!((q - 1.0).abs() < 1e-8);

    let same = d.project(&v.center).unwrap();
    assert!(same.inside_already);
    assert_eq!(same.omega, v.center);
}

#[test]
fn monotone_repair_is_ordered() {
    let d = DemoCore::demo();
    let v = d.view().unwrap();
    for (j, &(a, b)) in v.blocks.iter().enumerate() {
        let r = d.monotone(j, true).unwrap();
        assert!(r.omega[a..b].windows(2).all(|p| p[0] <= p[1] + 1e-10), "feature {j}");
        let (q, inside) = d.contains(&r.omega).unwrap();
        assert!((q - r.q).abs() < 1e-9);
        assert_eq!(inside, r.feasible);
    }
}

#[test]
fn band_is_reproducible_and_sized() {
    let d = DemoCore::demo();
    let v = d.view().unwrap();
    let b1 = d.band(1, 12, 7).unwrap();
    let b2 = d.band(1, 12, 7).unwrap();
    assert_eq!(b1.curves, b2.curves);
    assert_eq!(b1.curves.len(), 12);
    assert_eq!(b1.curves[0].len(), v.blocks[1].1 - v.blocks[1].0);
    assert!(d.band(99, 1, 0).is_err());
}

#[test]
fn mismatched_documents_are_rejected() {
    let m: serde_json::Value = serde_json::from_str(rashgam_wasm_demo::DEMO_MODEL).unwrap();
    let mut e: serde_json::Value = serde_json::from_str(rashgam_wasm_demo::DEMO_ELLIPSOID).unwrap();
    e["dim"] = 3.into();
    e["center"] = serde_json::json!([0.0, 0.0, 0.0]);
    e["Q"] = serde_json::json!([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(DemoCore::from_json(&m.to_string(), &e.to_string()).is_err());
}
