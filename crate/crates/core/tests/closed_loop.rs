//! The reflex on the simulated hand, without any learning.

use proptest::prelude::*;
use tacsyn_core::harness::{run_rollout, Task};
use tacsyn_core::plant::Plant;
use tacsyn_core::policy::{random_policy, RandomPolicySpec};
use tacsyn_core::reactive::{combine, control_error, reactive_correction};
use tacsyn_core::{Condition, Control, Event, ExperimentConfig, Policy, PlantConfig, ReactiveGain, SlipCalibration, FINGERS};

fn quiet(grip_offset: f64) -> PlantConfig {
    PlantConfig { process_noise_std: [0.0; 4], grip_offset, ..PlantConfig::default() }
}

/// Ticks until `|alpha - alpha_des| <= 0.05` under a frozen policy command,
/// or `None` if that does not happen within `limit` ticks or the object falls.
fn settle(plant: &mut Plant, u_p: Control, limit: usize) -> Option<usize> {
    let cal = SlipCalibration::default();
    let gain = ReactiveGain::default();
    let bounds = plant.config().motor_bounds;
    for t in 0..=limit {
        let alpha = plant.alpha();
        if (alpha - cal.alpha_des).abs() <= 0.05 {
            return Some(t);
        }
        let e = control_error(alpha, &cal).unwrap();
        let u = combine(&u_p, &reactive_correction(e, &gain), &bounds);
        if plant.step(&u).unwrap() == Event::Fell {
            return None;
        }
    }
    None
}

#[test]
fn reflex_settles_near_the_target_from_held_starts() {
    let mut worst = 0;
    for grip in [0.2, 0.24, 0.3, 0.4] {
        for yaw_deg in [-80.0f64, -30.0, 0.0, 40.0, 70.0, 90.0] {
            for shift in [[0.0, 0.0, 0.0], [0.1, -0.05, -0.05], [-0.1, 0.05, 0.05], [-0.2, -0.2, -0.2]] {
                let cfg = quiet(grip);
                let Ok(mut plant) = Plant::reset(cfg, yaw_deg.to_radians()) else { continue };
                let g = plant.grasp_command().motors;
                let u_p = Control { motors: core::array::from_fn(|i| g[i] + shift[i]) };
                let ticks = settle(&mut plant, u_p, 100);
                assert!(ticks.is_some(), "grip {grip} yaw {yaw_deg} shift {shift:?}: alpha {}", plant.alpha());
                worst = worst.max(ticks.unwrap());
                // And it stays there.
                let mut rest = plant.clone();
                for _ in 0..200 {
                    let a = rest.alpha();
                    let e = control_error(a, &SlipCalibration::default()).unwrap();
                    let u = combine(&u_p, &reactive_correction(e, &ReactiveGain::default()), &rest.config().motor_bounds);
                    assert_eq!(rest.step(&u).unwrap(), Event::None);
                }
                assert!((rest.alpha() - 0.25).abs() <= 0.05, "drifted to {}", rest.alpha());
            }
        }
    }
    assert!(worst <= 100);
}

fn config(condition: Condition, reactive: bool) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(condition, Task::Cup);
    cfg.reactive_enabled = reactive;
    cfg
}

#[test]
fn open_hand_without_reflex_drops_the_object() {
    let cfg = config(Condition::VisualOnly, false);
    let mut plant = Plant::reset(cfg.plant.clone(), cfg.task.initial_yaw()).unwrap();
    let lo: [f64; FINGERS] = core::array::from_fn(|i| cfg.plant.motor_bounds[i].lo);
    let policy = Policy::constant(1, lo, cfg.plant.motor_bounds);
    let trace = run_rollout(&mut plant, &policy, &cfg).unwrap();
    assert!(trace.fell());
}

#[test]
fn reflex_catches_the_open_hand() {
    let cfg = config(Condition::Synergy, true);
    let mut plant = Plant::reset(cfg.plant.clone(), cfg.task.initial_yaw()).unwrap();
    let lo: [f64; FINGERS] = core::array::from_fn(|i| cfg.plant.motor_bounds[i].lo);
    let policy = Policy::constant(4, lo, cfg.plant.motor_bounds);
    let trace = run_rollout(&mut plant, &policy, &cfg).unwrap();
    assert!(!trace.fell());
}

/// Policies several times wider than the learner's initial draws. Much wider
/// ones can turn the object far enough from the grasp yaw that the contact
/// recedes past what the reflex can close on.
#[test]
fn reflex_keeps_random_policies_from_dropping_the_object() {
    let cfg = config(Condition::Synergy, true);
    for k in 0..10u64 {
        let mut plant_cfg = cfg.plant.clone();
        plant_cfg.rng_seed = k;
        let mut plant = Plant::reset(plant_cfg, cfg.task.initial_yaw()).unwrap();
        let x0 = cfg.project(&plant.observe());
        let spec = RandomPolicySpec { gain_std: 0.05, offset_std: 0.1 };
        let policy = random_policy(&x0, &plant.grasp_command(), cfg.plant.motor_bounds, spec, 1000 + k).unwrap();
        let trace = run_rollout(&mut plant, &policy, &cfg).unwrap();
        assert!(!trace.fell(), "policy {k} dropped the object");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forces_stay_in_the_box_and_classes_match(
        seed_ in any::<u64>(),
        yaw_deg in -90.0f64..90.0,
        commands in prop::collection::vec(prop::array::uniform3(0.0f64..1.5), 1..40),
    ) {
        let cfg = PlantConfig { rng_seed: seed_, ..PlantConfig::default() };
        let sat = cfg.force_saturation;
        let cal = cfg.slip_classes;
        let mut plant = Plant::reset(cfg, yaw_deg.to_radians()).unwrap();
        'outer: for u in commands {
            for _ in 0..10 {
                let ev = plant.step(&Control { motors: u }).unwrap();
                let s = plant.state();
                prop_assert!(s.forces.iter().all(|f| (0.0..=sat).contains(f)));
                prop_assert!(s.yaw.is_finite());
                prop_assert_eq!(s.class, cal.class(plant.alpha()).unwrap());
                if ev == Event::Fell {
                    let again = plant.step(&Control { motors: u });
                    prop_assert!(again.is_err());
                    break 'outer;
                }
            }
        }
    }

    #[test]
    fn same_seed_same_rollout(seed_ in any::<u64>(), b in prop::array::uniform3(0.3f64..1.1)) {
        let cfg = config(Condition::Synergy, true);
        let plant_cfg = PlantConfig { rng_seed: seed_, ..cfg.plant.clone() };
        let policy = Policy::constant(4, b, cfg.plant.motor_bounds);
        let mut p1 = Plant::reset(plant_cfg.clone(), 0.3).unwrap();
        let mut p2 = Plant::reset(plant_cfg, 0.3).unwrap();
        let a = run_rollout(&mut p1, &policy, &cfg).unwrap();
        let c = run_rollout(&mut p2, &policy, &cfg).unwrap();
        prop_assert_eq!(a, c);
    }
}
