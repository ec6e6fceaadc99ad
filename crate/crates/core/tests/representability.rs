use lvrep::linear_value::{exact_backup_weights, policy_evaluate, RepresentabilityCheck};
use lvrep::latent::LatentModel;
use lvrep::pomdp::{exact_value_iteration, ValueTarget, DEFAULT_NODE_BUDGET};
use lvrep::{TabularPomdp, WindowPolicy};

fn policies(p: &TabularPomdp, len: usize) -> Vec<WindowPolicy> {
    let mut out = vec![
        WindowPolicy::uniform(p.n_actions(), len),
        WindowPolicy::constant(p.n_actions(), len, 1).unwrap(),
    ];
    for seed in 0..3 {
        out.push(WindowPolicy::random(p.n_obs(), p.n_actions(), len, p.horizon(), seed));
    }
    out
}

#[test]
fn exact_feature_represents_q_on_decodable_fixtures() {
    for (p, len) in [
        (TabularPomdp::flip(1.0, 4).unwrap(), 1),
        (TabularPomdp::lock(2, 3).unwrap(), 2),
    ] {
        for pi in policies(&p, len) {
            let check = RepresentabilityCheck::new(&p, &pi, DEFAULT_NODE_BUDGET).unwrap();
            for h in 0..p.horizon() {
                let r = check.step(h).unwrap();
                assert!(r.max_residual <= 1e-6, "step {h}: {}", r.max_residual);
                assert!(r.n_points > 0);
            }
        }
    }
}

#[test]
fn exact_backup_on_true_model_recovers_policy_value() {
    for (p, len) in [
        (TabularPomdp::flip(1.0, 4).unwrap(), 1),
        (TabularPomdp::lock(2, 3).unwrap(), 2),
    ] {
        let model = LatentModel::from_pomdp(&p, len, DEFAULT_NODE_BUDGET).unwrap();
        for pi in policies(&p, len) {
            let exact = exact_value_iteration(&p, ValueTarget::Policy(&pi), DEFAULT_NODE_BUDGET)
                .unwrap();
            let q = exact.q_by_window(len);
            let w = exact_backup_weights(&p, &model, &pi, 1e-10).unwrap();
            for h in 0..p.horizon() {
                for ((x, a), qv) in &q[h] {
                    let got = lvrep::linear_value::action_value(&p, &model, &w[h], x, *a);
                    assert!((got - qv).abs() < 1e-6, "h={h} x={x} a={a}: {got} vs {qv}");
                }
            }
        }
    }
}

#[test]
fn sampled_evaluation_is_close_to_exact_value() {
    let p = TabularPomdp::lock(2, 3).unwrap();
    let model = LatentModel::from_pomdp(&p, 2, DEFAULT_NODE_BUDGET).unwrap();
    let pi = WindowPolicy::uniform(2, 2);
    let exact = exact_value_iteration(&p, ValueTarget::Policy(&pi), DEFAULT_NODE_BUDGET).unwrap();
    let est = policy_evaluate(&p, &model, &pi, 4000, 9, 1e-6).unwrap();
    assert!((est.value_estimate - exact.value()).abs() < 0.05, "{} vs {}", est.value_estimate, exact.value());
}
