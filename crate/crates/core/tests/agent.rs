use lvrep::agent::{
    collect_offline, collect_rollout, evaluate_policy, plan, run_offline, run_online, AgentConfig,
    BonusTable, Datasets, PlannerConfig, Shaping,
};
use lvrep::latent::LatentModel;
use lvrep::pomdp::{exact_value_iteration, ValueTarget, DEFAULT_NODE_BUDGET};
use lvrep::{TabularPomdp, Window, WindowPolicy};

fn exact_plan(p: &TabularPomdp, len: usize, bonuses: &BonusTable) -> lvrep::agent::Plan {
    let model = LatentModel::from_pomdp(p, len, DEFAULT_NODE_BUDGET).unwrap();
    plan(
        &model,
        p.reward_table(),
        bonuses,
        Shaping::Optimistic,
        &p.initial_obs_prob(),
        p.horizon(),
        &PlannerConfig::default(),
    )
    .unwrap()
}

#[test]
fn first_rollout_window_is_fully_padded() {
    let p = TabularPomdp::lock(2, 3).unwrap();
    let r = collect_rollout(&p, &WindowPolicy::uniform(2, 2), 0, 2, 4).unwrap();
    let main = r.main.unwrap();
    assert_eq!(main.window, Window::initial(2, r.initial_obs));
    assert_eq!(r.aux.len(), 1);
    assert_eq!(r.aux[0].0, 1);
}

#[test]
fn single_step_windows_fill_no_aux_buffer() {
    let p = TabularPomdp::flip(1.0, 3).unwrap();
    for h in 0..3 {
        let r = collect_rollout(&p, &WindowPolicy::uniform(2, 1), h, 1, 9).unwrap();
        assert!(r.main.is_some());
        assert!(r.aux.is_empty());
    }
}

#[test]
fn rollouts_are_deterministic() {
    let p = TabularPomdp::gridmask(4, 5).unwrap();
    let pi = WindowPolicy::random(4, 3, 2, 5, 1);
    for h in 0..5 {
        assert_eq!(
            collect_rollout(&p, &pi, h, 2, 77).unwrap(),
            collect_rollout(&p, &pi, h, 2, 77).unwrap()
        );
    }
}

/// `|D_h| = k` for `h ≤ H - L`; auxiliary buffer at `j` gets
/// `k (min(j, L - 1) + [j > H - L])`.
#[test]
fn dataset_golden_counts() {
    for (p, len) in [
        (TabularPomdp::lock(2, 3).unwrap(), 2usize),
        (TabularPomdp::lock(3, 3).unwrap(), 3),
        (TabularPomdp::flip(1.0, 3).unwrap(), 1),
    ] {
        let horizon = p.horizon();
        let mut cfg = AgentConfig::new(len, 2, 3, 11);
        cfg.fit.max_iters = 5;
        let run = run_online(&p, &cfg).unwrap();
        let k = 3;
        for h in 0..horizon {
            let main = if h + len <= horizon { k } else { 0 };
            let aux = k * (h.min(len - 1) + usize::from(h + len > horizon));
            assert_eq!(run.datasets.main(h).len(), main, "main {h}");
            assert_eq!(run.datasets.aux(h).len(), aux, "aux {h}");
        }
        assert_eq!(run.datasets.initial_obs_counts().iter().sum::<usize>(), k * horizon);
    }
}

#[test]
fn exact_model_plans_optimal_flip() {
    let p = TabularPomdp::flip(1.0, 2).unwrap();
    let plan = exact_plan(&p, 1, &BonusTable::zeros(2));
    assert!((plan.value - 1.5).abs() < 1e-12);
    // steer to state 1: flip from 0, stay at 1
    assert_eq!(plan.policy.greedy_action(0, &"0".parse().unwrap()), 1);
    assert_eq!(plan.policy.greedy_action(0, &"1".parse().unwrap()), 0);
    let v = exact_value_iteration(&p, ValueTarget::Optimal, DEFAULT_NODE_BUDGET).unwrap();
    assert!((plan.value - v.value()).abs() < 1e-12);
}

#[test]
fn exact_model_plans_optimal_lock() {
    for (w, c) in [(2, 3), (3, 3)] {
        let p = TabularPomdp::lock(w, c).unwrap();
        let plan = exact_plan(&p, w, &BonusTable::zeros(p.horizon()));
        let v = exact_value_iteration(&p, ValueTarget::Optimal, DEFAULT_NODE_BUDGET).unwrap();
        assert!((plan.value - v.value()).abs() < 1e-9);
        assert!((evaluate_policy(&p, &plan.policy, 200, 0).mean - v.value()).abs() < 1e-12);
    }
}

#[test]
fn zero_reward_plans_action_zero() {
    let p = TabularPomdp::lock(2, 3).unwrap().with_zero_reward();
    let plan = exact_plan(&p, 2, &BonusTable::zeros(p.horizon()));
    assert_eq!(plan.value, 0.0);
    for (h, vs) in plan.v.iter().enumerate() {
        for x in vs.keys() {
            assert_eq!(plan.policy.greedy_action(h, x), 0);
        }
    }
}

#[test]
fn large_bonus_attracts_the_planner() {
    let p = TabularPomdp::flip(1.0, 2).unwrap().with_zero_reward();
    let x1: Window = "1".parse().unwrap();
    let mut bonuses = BonusTable::zeros(2);
    bonuses.insert(1, x1.clone(), 1, 2.0);
    let plan = exact_plan(&p, 1, &bonuses);
    assert_eq!(plan.policy.greedy_action(0, &"0".parse().unwrap()), 1);
    assert_eq!(plan.policy.greedy_action(0, &x1), 0);
    assert_eq!(plan.policy.greedy_action(1, &x1), 1);
    assert!((plan.value - 2.0).abs() < 1e-12);
}

#[test]
fn no_single_step_deviation_improves_planned_q() {
    let p = TabularPomdp::gridmask(3, 4).unwrap();
    let mut bonuses = BonusTable::zeros(4);
    for (i, x) in Window::enumerate(2, 2, 3, 3).into_iter().enumerate() {
        bonuses.insert(2, x, i % 3, 0.1 * (i % 7) as f64);
    }
    let plan = exact_plan(&p, 2, &bonuses);
    for (h, vs) in plan.v.iter().enumerate() {
        for (x, v) in vs {
            let chosen = plan.policy.greedy_action(h, x);
            assert_eq!(plan.q_value(h, x, chosen), Some(*v));
            for a in 0..3 {
                assert!(plan.q_value(h, x, a).unwrap() <= v + 1e-12);
            }
        }
    }
    let zero = exact_plan(&p, 2, &BonusTable::zeros(4));
    assert!(plan.value >= zero.value);
}

#[test]
fn planner_budget_is_enforced() {
    let p = TabularPomdp::gridmask(4, 6).unwrap();
    let model = LatentModel::from_pomdp(&p, 2, DEFAULT_NODE_BUDGET).unwrap();
    let err = plan(
        &model,
        p.reward_table(),
        &BonusTable::zeros(6),
        Shaping::Optimistic,
        &p.initial_obs_prob(),
        6,
        &PlannerConfig { window_budget: 10 },
    )
    .unwrap_err();
    assert_eq!(err, lvrep::Error::BudgetExceeded { budget: 10 });
}

#[test]
fn online_single_episode_smoke_and_determinism() {
    let p = TabularPomdp::lock(2, 3).unwrap();
    let mut cfg = AgentConfig::new(2, 4, 1, 5);
    cfg.track_model_tv = true;
    let a = run_online(&p, &cfg).unwrap();
    assert_eq!(a.logs.len(), 1);
    assert_eq!(a.policies.len(), 1);
    assert!(a.logs[0].model_tv.is_some());
    cfg.episodes = 4;
    let b = run_online(&p, &cfg).unwrap();
    let c = run_online(&p, &cfg).unwrap();
    assert_eq!(b.logs, c.logs);
    assert_eq!(b.policies, c.policies);
    assert_eq!(b.model, c.model);
    for l in &b.logs {
        assert!((0.0..=p.horizon() as f64).contains(&l.episode_return));
    }
}

#[test]
fn evaluation_examples() {
    let p = TabularPomdp::flip(1.0, 2).unwrap();
    let zero = evaluate_policy(&p.with_zero_reward(), &WindowPolicy::uniform(2, 1), 500, 1);
    assert_eq!((zero.mean, zero.std_error), (0.0, 0.0));
    let opt = exact_plan(&p, 1, &BonusTable::zeros(2)).policy;
    let e = evaluate_policy(&p, &opt, 10_000, 3);
    assert!((e.mean - 1.5).abs() < 0.02);
    assert_eq!(e, evaluate_policy(&p, &opt, 10_000, 3));
}

#[test]
fn offline_rejects_empty_data() {
    let p = TabularPomdp::flip(1.0, 2).unwrap();
    let data = Datasets::new(&p, 1);
    let err = run_offline(&p, &data, &AgentConfig::new(1, 2, 1, 0)).unwrap_err();
    assert_eq!(err, lvrep::Error::EmptyDataset { step: 0 });
}

#[test]
fn offline_penalty_avoids_uncovered_actions() {
    let p = TabularPomdp::flip(1.0, 3).unwrap();
    let opt = exact_plan(&p, 1, &BonusTable::zeros(3)).policy;
    let data = collect_offline(&p, &opt, 500, 2).unwrap();
    let res = run_offline(&p, &data, &AgentConfig::new(1, 2, 1, 0)).unwrap();
    let (x0, x1): (Window, Window) = ("0".parse().unwrap(), "1".parse().unwrap());
    // after step 0 the data only ever shows o = 1 followed by "stay"
    for h in 1..3 {
        let covered = res.penalties.get(h, &x1, 0);
        for (x, a) in [(&x0, 0), (&x0, 1), (&x1, 1)] {
            assert!(res.penalties.get(h, x, a) > covered, "h={h} x={x} a={a}");
        }
    }
    let v = evaluate_policy(&p, &res.policy, 2000, 1);
    assert!((v.mean - 2.5).abs() < 0.05, "{}", v.mean);
    assert!(res.pessimistic_value <= v.mean + 3.0 * v.std_error);

    let mut capped = AgentConfig::new(1, 2, 1, 0);
    capped.bonus.c_alpha = 1e6;
    let res = run_offline(&p, &data, &capped).unwrap();
    assert!(res.penalties.step(1).values().all(|b| *b == 2.0));
    assert_eq!(res.pessimistic_value, 0.0);
}
