mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use bsopt::domain::{BsConfig, Deployment, Orientation};
use bsopt::radio::{
    antenna_gain_db, heatmap, objective, received_power_dbm, sinr, AntennaKind, AntennaPattern,
    Scene,
};
use proptest::prelude::*;

use common::*;

fn station() -> impl Strategy<Value = BsConfig> {
    (
        0.0..1000.0,
        0.0..1000.0,
        10.0..40.0,
        -PI..PI,
        -FRAC_PI_2..FRAC_PI_2,
        -PI..PI,
    )
        .prop_map(|(x_m, y_m, power_dbm, yaw, pitch, roll)| BsConfig {
            x_m,
            y_m,
            power_dbm,
            orientation: Orientation::new(yaw, pitch, roll),
        })
}

fn small_scene() -> Scene {
    Scene {
        grid_resolution: 8,
        ..Scene::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn single_station_matches_oracle(bs in station()) {
        let scene = small_scene();
        let oracle = RadioOracle::default_scene(8);
        let o = bs.orientation;
        let want = oracle.single_station(bs.x_m, bs.y_m, bs.power_dbm, o.yaw(), o.pitch(), o.roll());
        let got = objective(&Deployment::new(vec![bs]), &scene);
        prop_assert!(rel_err(got, want) < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn own_power_raises_own_received_power(bs in station(), extra in 0.0..10.0f64, rx in (0.0..1000.0f64, 0.0..1000.0f64)) {
        let scene = Scene::default();
        let louder = BsConfig { power_dbm: bs.power_dbm + extra, ..bs };
        prop_assert!(received_power_dbm(&louder, rx, &scene) >= received_power_dbm(&bs, rx, &scene));
    }

    #[test]
    fn interferer_power_lowers_sinr(a in station(), b in station(), extra in 0.5..10.0f64, rx in (0.0..1000.0f64, 0.0..1000.0f64)) {
        let scene = Scene::default();
        let base = Deployment::new(vec![a, b]);
        let louder = base.with_station(1, BsConfig { power_dbm: b.power_dbm + extra, ..b });
        let (s0, s1) = (sinr(0, rx, &base, &scene), sinr(0, rx, &louder, &scene));
        prop_assert!(s1 < s0, "{s1} !< {s0}");
    }

    #[test]
    fn omni_ignores_orientation(a in station(), b in station(), yaw in -PI..PI, pitch in -FRAC_PI_2..FRAC_PI_2, roll in -PI..PI) {
        let scene = small_scene().with_antenna_kind(AntennaKind::Omni);
        let dep = Deployment::new(vec![a, b]);
        let turned = dep.with_station(0, BsConfig { orientation: Orientation::new(yaw, pitch, roll), ..a });
        prop_assert_eq!(objective(&dep, &scene), objective(&turned, &scene));
    }

    #[test]
    fn heatmap_mean_is_objective(a in station(), b in station(), c in station()) {
        let scene = small_scene();
        let dep = Deployment::new(vec![a, b, c]);
        let map = heatmap(&dep, &scene);
        prop_assert_eq!(map.values().len(), 64);
        prop_assert!(rel_err(map.mean(), objective(&dep, &scene)) <= 1e-9);
    }

    #[test]
    fn roll_invariance_iff_equal_beamwidths(theta in 0.05..1.5f64, psi in -PI..PI, roll in 0.2..3.0f64) {
        // gain toward a fixed local direction, rolled about boresight
        let dir = [theta.cos(), theta.sin() * psi.cos(), theta.sin() * psi.sin()];
        let (s, c) = roll.sin_cos();
        let rolled = [dir[0], c * dir[1] - s * dir[2], s * dir[1] + c * dir[2]];
        let iso = AntennaPattern { az_3db: 0.7, el_3db: 0.7, ..AntennaPattern::default() };
        prop_assert!((antenna_gain_db(&iso, &dir) - antenna_gain_db(&iso, &rolled)).abs() < 1e-9);
    }
}

#[test]
fn roll_changes_anisotropic_objective() {
    let scene = small_scene();
    let bs = BsConfig {
        x_m: 500.0,
        y_m: 500.0,
        power_dbm: 30.0,
        orientation: Orientation::new(0.3, 0.2, 0.0),
    };
    let rolled = BsConfig {
        orientation: Orientation::new(0.3, 0.2, 1.0),
        ..bs
    };
    let a = objective(&Deployment::new(vec![bs]), &scene);
    let b = objective(&Deployment::new(vec![rolled]), &scene);
    assert!((a - b).abs() > 1e-6 * a);
}

#[test]
fn objective_is_bit_reproducible() {
    let scene = Scene::default();
    let dep = Deployment::new(
        (0..9)
            .map(|i| BsConfig {
                x_m: 100.0 * i as f64,
                y_m: 1000.0 - 90.0 * i as f64,
                power_dbm: 10.0 + 3.0 * i as f64,
                orientation: Orientation::new(0.1 * i as f64, -0.05 * i as f64, 0.2),
            })
            .collect(),
    );
    assert_eq!(
        objective(&dep, &scene).to_bits(),
        objective(&dep, &scene).to_bits()
    );
}
