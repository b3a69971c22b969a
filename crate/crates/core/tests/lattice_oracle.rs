use deltagas_core::evolution::{GaussianPacket, InitialState};
use deltagas_core::lattice::*;

fn config(l: f64, n_x: usize, c: f64) -> LatticeConfig {
    let h = 2.0 * l / (n_x - 1) as f64;
    LatticeConfig {
        l,
        n_x,
        dt: h * h,
        w: 4.0 * h,
        c,
    }
}

#[test]
fn free_gaussian_after_100_steps() {
    let state = InitialState::new(vec![
        GaussianPacket::new(1.2, -3.0, 0.0).unwrap(),
        GaussianPacket::new(1.2, 3.0, 0.0).unwrap(),
    ])
    .unwrap();
    let cfg = config(14.0, 449, 0.0);
    let mut s = init_from_packets(&cfg, &state).unwrap();
    let stats = run(&cfg, &mut s, 100.0 * cfg.dt).unwrap();
    assert_eq!(stats.steps, 100);
    let exact = free_reference(&cfg, &state, s.t).unwrap();
    let d = relative_l2_ordered(&cfg, &s.psi, &exact);
    assert!(d <= 1e-4, "{d}");
}

#[test]
fn norm_and_symmetry_over_1000_steps() {
    let state = InitialState::new(vec![
        GaussianPacket::new(0.5, -1.5, 1.0).unwrap(),
        GaussianPacket::new(0.5, 1.5, -1.0).unwrap(),
    ])
    .unwrap();
    let cfg = config(6.0, 97, 3.0);
    let mut s = init_from_packets(&cfg, &state).unwrap();
    let stats = run(&cfg, &mut s, 1000.0 * cfg.dt).unwrap();
    assert_eq!(stats.steps, 1000);
    assert!(stats.max_step_norm_drift <= 1e-12, "{stats:?}");
    assert!((norm(&cfg, &s.psi) - 1.0).abs() <= 1e-9);
    assert!(stats.max_symmetry_residual <= 1e-10);
}

#[test]
fn packets_touching_the_walls_are_rejected() {
    let state = InitialState::new(vec![
        GaussianPacket::new(0.5, -1.5, 0.0).unwrap(),
        GaussianPacket::new(0.5, 1.5, 0.0).unwrap(),
    ])
    .unwrap();
    assert!(init_from_packets(&config(3.0, 65, 1.0), &state).is_err());
    let three = InitialState::new(vec![
        GaussianPacket::new(0.5, -3.0, 0.0).unwrap(),
        GaussianPacket::new(0.5, 0.0, 0.0).unwrap(),
        GaussianPacket::new(0.5, 3.0, 0.0).unwrap(),
    ])
    .unwrap();
    assert!(init_from_packets(&config(12.0, 65, 1.0), &three).is_err());
}

#[test]
fn config_round_trips_through_json() {
    let cfg = config(8.0, 513, 1.0);
    let text = serde_json::to_string(&cfg).unwrap();
    assert!(text.contains("\"L\""));
    let back: LatticeConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert!(serde_json::from_str::<LatticeConfig>(r#"{"L":8,"n_x":513,"dt":0.001,"w":0.1,"extra":1}"#).is_err());
}
