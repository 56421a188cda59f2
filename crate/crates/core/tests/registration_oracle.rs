use frechet_spc::ewma::{init_state, EwmaConfig, Session};
use frechet_spc::frechet::{estimate_frechet_mean, FrechetConfig};
use frechet_spc::sim::{apply_deformation, register};
use frechet_spc::synth::{
    brute_force_register, generate_ic_set, generate_stream, BaseCurve, BruteGrid, ParamLaw, ParamLaws, SynthSpec,
};
use frechet_spc::{RegisterConfig, SimParams, TimeGrid};
use proptest::prelude::*;

fn base(family: u8) -> BaseCurve {
    match family % 3 {
        0 => BaseCurve::Sine {
            amplitude: 1.0,
            offset: 2.0,
        },
        1 => BaseCurve::Sigmoid {
            steepness: 12.0,
            midpoint: 0.5,
        },
        _ => BaseCurve::DoublePeak {
            first: 0.33,
            second: 0.8,
            width: 0.08,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // The local search never loses to an exhaustive phase grid by more than
    // the grid's own resolution error.
    #[test]
    fn search_matches_exhaustive_grid(
        family in 0u8..3,
        alpha in 0.5f64..2.0,
        beta in -1.0f64..1.0,
        kappa in 0.8f64..1.25,
        zeta in -0.2f64..0.2,
    ) {
        let grid = TimeGrid::new(61).unwrap();
        let f0 = base(family).sample(grid).unwrap();
        let truth = SimParams::new(alpha, beta, kappa, zeta).unwrap();
        let fj = apply_deformation(&f0, &truth).unwrap();
        let cfg = RegisterConfig::default();
        let found = register(&fj, &f0, &cfg).unwrap();
        let brute = brute_force_register(&fj, &f0, &BruteGrid::matching(&cfg, 151, 201)).unwrap();
        prop_assert!(found.objective <= brute.objective + 1e-10,
            "search {} vs grid {}", found.objective, brute.objective);
        prop_assert!(found.objective < 1e-10);
    }
}

#[test]
fn pinned_phase_grid_agrees_with_search() {
    let grid = TimeGrid::new(81).unwrap();
    let f0 = base(2).sample(grid).unwrap();
    let cfg = RegisterConfig {
        fix_kappa: true,
        ..RegisterConfig::default()
    };
    let fj = apply_deformation(&f0, &SimParams::new(1.3, 0.2, 1.0, 0.1).unwrap()).unwrap();
    let found = register(&fj, &f0, &cfg).unwrap();
    let brute = brute_force_register(&fj, &f0, &BruteGrid::matching(&cfg, 1, 1001)).unwrap();
    assert!((found.params.zeta - brute.params.zeta).abs() <= 1e-3);
    assert_eq!(brute.params.kappa, 1.0);
}

#[test]
fn in_control_stream_stays_mostly_quiet() {
    let reg = RegisterConfig {
        fix_kappa: true,
        ..RegisterConfig::default()
    };
    let laws = ParamLaws {
        alpha: ParamLaw::Uniform { low: 0.9, high: 1.1 },
        beta: ParamLaw::Uniform { low: -0.1, high: 0.1 },
        kappa: ParamLaw::Fixed { value: 1.0 },
        zeta: ParamLaw::Uniform { low: -0.03, high: 0.03 },
    };
    let train = SynthSpec {
        n: 60,
        laws,
        noise_sigma: 0.05,
        grid_points: 51,
        seed: 2,
        ..SynthSpec::default()
    };
    let ic = estimate_frechet_mean(
        &generate_ic_set(&train).unwrap().curves,
        &FrechetConfig {
            registration: reg.clone(),
            ..FrechetConfig::default()
        },
    )
    .unwrap();
    assert!(ic.converged);
    let cfg = EwmaConfig {
        lambda: 0.2,
        registration: reg,
        replicates: 10,
        ..EwmaConfig::default()
    };
    let (state, limits) = init_state(&ic.f0, &ic, &cfg).unwrap();
    assert!(limits.deviance_ucl > state.d_tilde);
    let mut session = Session::new(&ic, cfg).unwrap();
    let stream = generate_stream(&SynthSpec { n: 100, seed: 8, ..train }).unwrap();
    let alarms = stream
        .curves
        .iter()
        .filter(|c| session.step(c).unwrap().ooc)
        .count();
    // Limits from a small training set are loose; this only guards against
    // a chart that fires on everything.
    assert!(alarms < 50, "{alarms} alarms on 100 in-control days");
}
