use boing_core::baselines::{BaselineConfig, ModelBo, RandomSearch};
use boing_core::boing::{Boing, BoingConfig};
use boing_core::boing_plus::{switch_probability, BoingPlus, BoingPlusConfig, Side, SwitchState};
use boing_core::optimizer::{run_loop, AskTell, Origin, Phase};
use boing_core::sobol::sobol_init;
use boing_core::turbo::{region_weights, TrustRegion, Turbo, TurboConfig};
use boing_core::{AxisBox, Error, RngState, SearchSpace};
use std::f64::consts::PI;

fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x[1] - b * x[0] * x[0] + c * x[0] - 6.0).powi(2) + 10.0 * (1.0 - t) * x[0].cos() + 10.0
}

fn branin_space() -> SearchSpace {
    SearchSpace::new(&[(-5.0, 10.0), (0.0, 15.0)]).unwrap()
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
}

fn fast_boing() -> BoingConfig {
    let mut c = BoingConfig::default();
    c.gp_fit.restarts = 2;
    c.lgpga.fit.restarts = 2;
    c
}

#[test]
fn boing_phases_follow_dataset_size() {
    let mut opt = Boing::new(branin_space(), fast_boing(), 3).unwrap();
    assert_eq!((opt.init_size(), opt.n_min()), (4, 10));
    for n in 0..16 {
        let expected = match n {
            0..=3 => Phase::Init,
            4..=9 => Phase::FullGp,
            _ => Phase::TwoStage,
        };
        assert_eq!(opt.phase(), expected, "n = {n}");
        let x = opt.suggest().unwrap();
        assert_eq!(opt.last_step().phase, expected);
        opt.tell(&x, branin(&x)).unwrap();
    }
}

#[test]
fn first_suggestion_is_first_sobol_point() {
    let space = branin_space();
    let design = sobol_init(&space, 4, &mut RngState::new(11));
    let mut opt = Boing::new(space, fast_boing(), 11).unwrap();
    assert_eq!(opt.suggest().unwrap(), design[0]);
}

#[test]
fn two_stage_suggestions_stay_in_subregion() {
    let mut opt = Boing::new(branin_space(), fast_boing(), 5).unwrap();
    let mut checked = 0;
    for _ in 0..30 {
        let x = opt.suggest().unwrap();
        if opt.last_step().phase == Phase::TwoStage {
            let region = opt.last_subregion().unwrap();
            assert!(region.contains(&x));
            assert!(opt.last_step().inside_count >= opt.n_min());
            checked += 1;
        }
        opt.tell(&x, branin(&x)).unwrap();
    }
    assert_eq!(checked, 20);
}

#[test]
fn clustered_data_gives_a_proper_subregion() {
    let space = SearchSpace::unit(2).unwrap();
    let mut opt = Boing::new(space, fast_boing(), 1).unwrap();
    let mut rng = RngState::new(4);
    // 3·n_min points packed near (0.2, 0.2) with low costs, a sparse background elsewhere
    for _ in 0..30 {
        let x = [0.15 + 0.1 * rng.uniform(), 0.15 + 0.1 * rng.uniform()];
        opt.tell(&x, sphere(&[x[0] + 0.1, x[1] + 0.1])).unwrap();
    }
    for _ in 0..10 {
        let x = [0.4 + 0.6 * rng.uniform(), 0.4 + 0.6 * rng.uniform()];
        opt.tell(&x, 1.0 + sphere(&x)).unwrap();
    }
    opt.suggest().unwrap();
    let step = opt.last_step();
    assert_eq!(step.phase, Phase::TwoStage);
    assert!(step.inside_count >= 10);
    assert!(step.volume_fraction < 1.0);
}

#[test]
fn non_finite_cost_is_rejected_without_side_effects() {
    let mut opt = Boing::new(branin_space(), fast_boing(), 0).unwrap();
    let x = opt.suggest().unwrap();
    assert!(matches!(opt.tell(&x, f64::NAN), Err(Error::NonFiniteCost(_))));
    assert!(opt.tell(&x, f64::INFINITY).is_err());
    assert!(opt.dataset().is_empty());
    assert!(opt.tell(&[100.0, 0.0], 1.0).is_err());
    assert!(opt.dataset().is_empty());
    opt.tell(&x, 2.0).unwrap();
    opt.tell(&x, 1.0).unwrap();
    assert_eq!(opt.dataset().best_cost(), Some(1.0));
}

#[test]
fn same_seed_same_trajectory() {
    let run = |seed| {
        let mut opt = Boing::new(branin_space(), fast_boing(), seed).unwrap();
        run_loop(&mut opt, branin, 18, || 0.0).unwrap()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn trajectory_rows_are_contiguous_and_monotone() {
    let mut opt = Boing::new(branin_space(), fast_boing(), 2).unwrap();
    let rows = run_loop(&mut opt, branin, 20, || 0.0).unwrap();
    assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), (1..=20).collect::<Vec<_>>());
    assert!(rows.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
    assert!(opt.suggest().is_ok());
}

#[test]
fn budget_is_enforced() {
    let config = BoingConfig { budget: Some(3), ..fast_boing() };
    let mut opt = Boing::new(branin_space(), config, 0).unwrap();
    run_loop(&mut opt, branin, 3, || 0.0).unwrap();
    assert!(matches!(opt.suggest(), Err(Error::BudgetExhausted(3))));
    let err = run_loop(&mut opt, branin, 1, || 0.0).unwrap_err();
    assert!(matches!(err, Error::AtIteration { t: 1, .. }));
}

fn region(config: &TurboConfig) -> TrustRegion {
    TrustRegion::new(AxisBox::unit(2), Vec::new(), config, &mut RngState::new(0))
}

#[test]
fn trust_region_doubles_and_halves() {
    let config = TurboConfig::default();
    let mut tr = region(&config);
    assert_eq!(tr.length(), 0.8);
    for _ in 0..3 {
        tr.record_outcome(true, &config);
    }
    assert_eq!(tr.length(), 1.6);
    for _ in 0..3 {
        tr.record_outcome(true, &config);
    }
    assert_eq!(tr.length(), 1.6);
    assert_eq!(config.failure_tol(2), 4);
    assert_eq!(config.failure_tol(10), 10);
    for _ in 0..3 {
        tr.record_outcome(false, &config);
    }
    assert_eq!(tr.length(), 1.6);
    tr.record_outcome(false, &config);
    assert_eq!(tr.length(), 0.8);
    // a success resets the failure streak
    tr.record_outcome(false, &config);
    tr.record_outcome(true, &config);
    for _ in 0..3 {
        tr.record_outcome(false, &config);
    }
    assert_eq!(tr.length(), 0.8);
}

#[test]
fn trust_region_requests_restart_below_minimum() {
    let config = TurboConfig::default();
    let mut tr = region(&config);
    let mut halvings = 0;
    while !tr.needs_restart(&config) {
        for _ in 0..4 {
            tr.record_outcome(false, &config);
        }
        halvings += 1;
    }
    // 0.8 → 0.4 → 0.2 → 0.1 → 0.05 < 1/16
    assert_eq!(halvings, 4);
    assert!(tr.length() < 1.0 / 16.0);
}

#[test]
fn region_weights_have_unit_geometric_mean() {
    let w = region_weights(&[0.1, 0.4, 1e3]);
    let g: f64 = w.iter().map(|v| v.ln()).sum::<f64>() / 3.0;
    assert!(g.abs() < 1e-12);
    assert!((w[2] / w[1] - 5.0).abs() < 1e-12);
}

#[test]
fn turbo_runs_and_restarts() {
    let config =
        TurboConfig { fit: boing_core::gp::FitOptions { restarts: 1, ..Default::default() }, ..Default::default() };
    let mut opt = Turbo::new(SearchSpace::unit(2).unwrap(), config, 1).unwrap();
    let rows = run_loop(&mut opt, |x| (10.0 * x[0]).sin() + x[1], 80, || 0.0).unwrap();
    assert!(rows.iter().all(|r| r.step.origin == Origin::Turbo));
    assert!(rows.iter().all(|r| r.point.iter().all(|v| (0.0..=1.0).contains(v))));
    assert!(opt.restarts() >= 1);
}

#[test]
fn switch_probability_values() {
    assert_eq!(switch_probability(0), 0.0);
    assert_eq!(switch_probability(3), 0.3);
    assert_eq!(switch_probability(10), 1.0);
    assert_eq!(switch_probability(25), 1.0);
}

#[test]
fn counters_grow_every_d_failures_and_halve_on_switch() {
    let mut s = SwitchState::new(3);
    for k in 1..=9 {
        s.update_failure_counter(false);
        assert_eq!(s.counter(Side::Boing), k / 3);
    }
    s.update_failure_counter(true);
    assert_eq!(s.counter(Side::Boing), 2);
    assert_eq!(s.since_improvement[0], 0);
    s.c_fail = [6, 4];
    s.switch();
    assert_eq!(s.active, Side::Turbo);
    assert_eq!((s.counter(Side::Boing), s.counter(Side::Turbo)), (3, 2));
    s.switch();
    assert_eq!((s.counter(Side::Boing), s.counter(Side::Turbo)), (1, 1));
    // clocks are per side
    s.since_improvement = [2, 0];
    s.update_failure_counter(false);
    assert_eq!(s.since_improvement, [3, 0]);
}

fn fast_plus() -> BoingPlusConfig {
    let boing = fast_boing();
    let turbo = TurboConfig { fit: boing.gp_fit.clone(), ..Default::default() };
    BoingPlusConfig { boing, turbo, ..Default::default() }
}

#[test]
fn trust_region_improvement_forces_switch_back() {
    let mut opt = BoingPlus::new(branin_space(), fast_plus(), 4).unwrap();
    run_loop(&mut opt, branin, 12, || 0.0).unwrap();
    opt.switch_to(Side::Turbo).unwrap();
    assert_eq!(opt.active_side(), Side::Turbo);
    let tr = opt.trust_region().unwrap();
    assert!(tr.local().len() >= 10);
    for &i in tr.local() {
        assert!(tr.bounds().contains(
            &opt.dataset()
                .get(i)
                .point
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let s = branin_space();
                    (v - s.lower()[j]) / s.width(j)
                })
                .collect::<Vec<_>>()
        ));
    }
    // one non-improving evaluation keeps the trust region active
    let x = opt.suggest().unwrap();
    assert_eq!(opt.last_step().origin, Origin::Turbo);
    let worst = opt.dataset().costs().into_iter().fold(f64::MIN, f64::max);
    opt.tell(&x, worst + 1.0).unwrap();
    assert_eq!(opt.active_side(), Side::Turbo);
    let switches = opt.switches();
    let x = opt.suggest().unwrap();
    assert_eq!(opt.switch_state().counter(Side::Turbo), 0);
    assert_eq!(opt.active_side(), Side::Turbo);
    opt.tell(&x, -1e6).unwrap();
    assert_eq!(opt.active_side(), Side::Boing);
    assert_eq!(opt.switches(), switches + 1);
}

#[test]
fn origins_partition_the_trajectory() {
    let mut opt = BoingPlus::new(SearchSpace::unit(2).unwrap(), fast_plus(), 9).unwrap();
    let rows = run_loop(&mut opt, |x| (8.0 * x[0]).sin() * (5.0 * x[1]).cos() + x[0], 70, || 0.0).unwrap();
    let boing = rows.iter().filter(|r| r.step.origin == Origin::Boing).count();
    let turbo = rows.iter().filter(|r| r.step.origin == Origin::Turbo).count();
    assert_eq!(boing + turbo, rows.len());
    assert!(boing > 0);
    if turbo > 0 {
        assert!(opt.switches() >= 1);
        assert!(opt.region_builds() >= 1);
    }
    assert!(rows.iter().all(|r| (r.step.phase == Phase::Turbo) == (r.step.origin == Origin::Turbo)));
}

#[test]
fn random_search_is_uniform_running_min() {
    let space = branin_space();
    let mut opt = RandomSearch::new(space.clone(), Some(200), 5);
    let rows = run_loop(&mut opt, branin, 200, || 0.0).unwrap();
    let mut best = f64::INFINITY;
    for r in &rows {
        assert!(space.contains(&r.point));
        best = best.min(r.cost);
        assert_eq!(r.incumbent, best);
        assert_eq!(r.step.origin, Origin::Random);
    }
    let mean_x0 = rows.iter().map(|r| r.point[0]).sum::<f64>() / 200.0;
    assert!((mean_x0 - 2.5).abs() < 1.0);
}

#[test]
fn gp_baseline_beats_random_search_on_branin_at_thirty_evaluations() {
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        0.5 * (v[14] + v[15])
    };
    let mut gp = Vec::new();
    let mut rs = Vec::new();
    for seed in 0..30 {
        let config = BaselineConfig {
            fit: boing_core::gp::FitOptions { restarts: 2, ..Default::default() },
            ..Default::default()
        };
        let mut opt = ModelBo::gp(branin_space(), config, seed);
        gp.push(run_loop(&mut opt, branin, 30, || 0.0).unwrap().last().unwrap().incumbent);
        let mut opt = RandomSearch::new(branin_space(), None, seed);
        rs.push(run_loop(&mut opt, branin, 30, || 0.0).unwrap().last().unwrap().incumbent);
    }
    assert!(median(gp) < median(rs));
}

#[test]
fn rf_baseline_improves_on_its_design() {
    let mut opt = ModelBo::rf(branin_space(), BaselineConfig::default(), 0);
    let rows = run_loop(&mut opt, branin, 40, || 0.0).unwrap();
    assert!(rows[4..].iter().all(|r| r.step.phase == Phase::Rf));
    assert!(rows[39].incumbent < rows[3].incumbent);
}
