use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qbattery::config::{parse_config, to_toml};
use qbattery::integrate::{evolve, IntegratorOptions};
use qbattery::linalg::{hermiticity_defect, trace};
use qbattery::metrics::{energy, ergotropy, purity, trace_distance};
use qbattery::output::format_number;
use qbattery::protocol::{Mode, ProtocolConfig};
use qbattery::state::random_density_matrix;
use qbattery::validate::random_open_system;
use qbattery::{master_rhs, Battery, NoiseAxis, NoiseChannel, SpinChainParams};

fn chain() -> impl Strategy<Value = SpinChainParams> {
    (
        2usize..=4,
        prop_oneof![0.2f64..2.0, -2.0f64..-0.2],
        -1.5f64..1.5,
        0.0f64..=1.0,
        -1.0f64..1.0,
    )
        .prop_map(|(n, h, j, g, jz)| SpinChainParams::new(n, h, j, g, jz).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metrics_stay_in_their_ranges(p in chain(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let battery = Battery::new(&p).unwrap();
        let rho = random_density_matrix(p.dim(), &mut rng);
        let sigma = random_density_matrix(p.dim(), &mut rng);
        let e = energy(&rho, &battery.h0).unwrap();
        let w = ergotropy(&rho, &battery.h0, &battery.spectrum).unwrap();
        prop_assert!(-1e-12 <= w && w <= e + 1e-12 && e <= 1.0 + 1e-12);
        let pur = purity(&rho);
        prop_assert!(pur >= 1.0 / p.dim() as f64 - 1e-12 && pur <= 1.0 + 1e-12);
        let d = trace_distance(&rho, &sigma).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
        prop_assert!((d - trace_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
        prop_assert!(trace_distance(&rho, &rho).unwrap() < 1e-10);
    }

    #[test]
    fn generator_is_traceless_and_hermiticity_preserving(n in 2usize..=3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, terms, rho) = random_open_system(&mut rng, n).unwrap();
        let d = master_rhs(rho.entries(), &h, &terms).unwrap();
        prop_assert!(trace(&d).norm() < 1e-12);
        prop_assert!(hermiticity_defect(&d) < 1e-12);
    }

    #[test]
    fn evolution_keeps_states_physical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, terms, rho) = random_open_system(&mut rng, 2).unwrap();
        let traj = evolve(&rho, &h, &terms, &[0.0, 0.5, 1.0, 2.0], &IntegratorOptions::default()).unwrap();
        for r in &traj {
            let d = r.defects();
            prop_assert!(d.trace_error < 1e-9);
            prop_assert!(d.hermiticity < 1e-10);
            prop_assert!(d.min_eigenvalue >= -1e-8);
        }
    }

    #[test]
    fn configs_survive_a_toml_round_trip(
        n in 2usize..=8,
        omega in 0.0f64..1.0,
        rate in 0.0f64..0.5,
        strength in 0.0f64..=1.0,
        axis in prop_oneof![Just(NoiseAxis::X), Just(NoiseAxis::Y), Just(NoiseAxis::Z)],
        discharge in any::<bool>(),
        t_max in 0.1f64..50.0,
    ) {
        let noise = NoiseChannel::new(axis, strength).unwrap();
        let mut cfg = if discharge {
            let mut c = ProtocolConfig::reference_discharging(n, noise).unwrap();
            c.gamma_minus = rate;
            c
        } else {
            let mut c = ProtocolConfig::reference_charging(n).unwrap();
            c.gamma_plus = rate;
            c.noise = vec![noise];
            c
        };
        cfg.omega = omega;
        cfg.t_max = t_max;
        prop_assert_eq!(cfg.mode == Mode::Discharging, discharge);
        prop_assert_eq!(parse_config(&to_toml(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn formatted_numbers_read_back_to_twelve_digits(x in prop::num::f64::NORMAL) {
        let s = format_number(x).unwrap();
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs(), "{} -> {}", x, s);
        prop_assert_eq!(format_number(back).unwrap(), s);
    }
}
