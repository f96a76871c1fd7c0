use super::*;
use rand::rngs::StdRng;

fn tiny_cfg(actions: usize) -> NetworkConfig {
    NetworkConfig {
        seq_lens: [4, 4, 4, 4, 4],
        vec_lens: [4, 4, 1],
        conv_filters: 1,
        conv_kernel: 2,
        linear_width: 1,
        hidden: 4,
        actions,
    }
}

fn tiny_obs() -> Observation {
    Observation {
        throughput: vec![0.5, 0.4, 0.6, 0.3],
        download_time: vec![0.2, 0.3, 0.1, 0.4],
        view_prob: vec![1.0, 0.5, 0.25, 0.0],
        ladder: vec![0.0, 0.2, 0.5, 1.0],
        last_levels: vec![0.1, 0.4, 0.2, 0.0],
        class_counts: vec![0.3, 0.05, 0.06, 0.59],
        remaining: vec![0.3, 0.05, 0.0, 0.0],
        buffer: vec![0.6],
    }
}

fn random_obs(rng: &mut StdRng) -> Observation {
    use rand::Rng;
    let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.05..1.0)).collect() };
    Observation {
        throughput: v(4),
        download_time: v(4),
        view_prob: v(4),
        ladder: v(4),
        last_levels: v(4),
        class_counts: v(4),
        remaining: v(4),
        buffer: v(1),
    }
}

fn seg_offset(cfg: &NetworkConfig, head_dim: usize, name: &str) -> usize {
    let mut off = 0;
    for (n, shape) in cfg.segments(head_dim) {
        if n == name {
            return off;
        }
        off += shape.iter().product::<usize>();
    }
    panic!("no segment {name}");
}

#[test]
fn zero_parameters_give_uniform_policy_and_zero_value() {
    let p = PolicyParameters::zeros(tiny_cfg(6)).unwrap();
    let probs = policy_forward(&p, &tiny_obs()).unwrap();
    for pr in &probs {
        assert!((pr - 1.0 / 6.0).abs() < 1e-15);
    }
    assert_eq!(value_forward(&p, &tiny_obs()).unwrap(), 0.0);
}

#[test]
fn forward_passes_are_deterministic() {
    let p = PolicyParameters::init(tiny_cfg(6), 42).unwrap();
    let obs = tiny_obs();
    assert_eq!(
        policy_forward(&p, &obs).unwrap(),
        policy_forward(&p, &obs).unwrap()
    );
    assert_eq!(
        value_forward(&p, &obs).unwrap(),
        value_forward(&p, &obs).unwrap()
    );
}

#[test]
fn hand_sized_network_matches_hand_computation() {
    // All widths 1: one conv filter of kernel 1, one linear unit, one
    // hidden unit, two actions, every input of length 1.
    let cfg = NetworkConfig {
        seq_lens: [1, 1, 1, 1, 1],
        vec_lens: [1, 1, 1],
        conv_filters: 1,
        conv_kernel: 1,
        linear_width: 1,
        hidden: 1,
        actions: 2,
    };
    let mut p = PolicyParameters::zeros(cfg.clone()).unwrap();
    // conv weights 0.1·(i+1), biases 0.01; linear weights 0.2·(j+1),
    // biases −0.02; hidden all 0.5 with bias 0.1; head rows (1, −1)·h.
    let obs = Observation {
        throughput: vec![0.4],
        download_time: vec![0.3],
        view_prob: vec![0.9],
        ladder: vec![0.5],
        last_levels: vec![0.2],
        class_counts: vec![0.7],
        remaining: vec![0.6],
        buffer: vec![0.8],
    };
    let xs = [0.4, 0.3, 0.9, 0.5, 0.2];
    let vs = [0.7, 0.6, 0.8];
    let mut concat = Vec::new();
    for i in 0..5 {
        let w = 0.1 * (i as f64 + 1.0);
        p.actor[seg_offset(&cfg, 2, &format!("conv{i}.w"))] = w;
        p.actor[seg_offset(&cfg, 2, &format!("conv{i}.b"))] = 0.01;
        concat.push((w * xs[i] + 0.01).max(0.0));
    }
    for j in 0..3 {
        let w = 0.2 * (j as f64 + 1.0);
        p.actor[seg_offset(&cfg, 2, &format!("linear{j}.w"))] = w;
        p.actor[seg_offset(&cfg, 2, &format!("linear{j}.b"))] = -0.02;
        concat.push((w * vs[j] - 0.02).max(0.0));
    }
    let hw = seg_offset(&cfg, 2, "hidden.w");
    for k in 0..8 {
        p.actor[hw + k] = 0.5;
    }
    p.actor[seg_offset(&cfg, 2, "hidden.b")] = 0.1;
    let hidden = (0.5 * concat.iter().sum::<f64>() + 0.1).max(0.0);
    let hdw = seg_offset(&cfg, 2, "head.w");
    p.actor[hdw] = 1.0;
    p.actor[hdw + 1] = -1.0;
    let logits = [hidden, -hidden];
    let denom = logits[0].exp() + logits[1].exp();
    let expected = [logits[0].exp() / denom, logits[1].exp() / denom];

    let probs = policy_forward(&p, &obs).unwrap();
    assert!((probs[0] - expected[0]).abs() < 1e-12);
    assert!((probs[1] - expected[1]).abs() < 1e-12);

    // Same construction for the critic's scalar head.
    let trunk_len = p.critic.len() - cfg.hidden - 1;
    p.critic[..trunk_len].copy_from_slice(&p.actor[..trunk_len]);
    let chw = seg_offset(&cfg, 1, "head.w");
    p.critic[chw] = 2.0;
    p.critic[seg_offset(&cfg, 1, "head.b")] = 0.05;
    let v = value_forward(&p, &obs).unwrap();
    assert!((v - (2.0 * hidden + 0.05)).abs() < 1e-12);
}

#[test]
fn advantage_matches_substitution() {
    let cfg = tiny_cfg(2);
    // Zero critic: V ≡ 0, so the advantage is the reward.
    let p = PolicyParameters::zeros(cfg.clone()).unwrap();
    let tr = Transition {
        state: tiny_obs(),
        action: 0,
        reward: 1.0,
        next_state: tiny_obs(),
        done: false,
    };
    assert_eq!(advantage(&p, &tr, 0.99).unwrap(), 1.0);

    // A critic that reads the buffer level: V(s) = b_t.
    let mut p = PolicyParameters::zeros(cfg.clone()).unwrap();
    p.critic[seg_offset(&cfg, 1, "linear2.w")] = 1.0;
    // linear2's output sits last in the concat vector.
    let hidden_w = seg_offset(&cfg, 1, "hidden.w");
    p.critic[hidden_w + cfg.concat_len() - 1] = 1.0;
    p.critic[seg_offset(&cfg, 1, "head.w")] = 1.0;
    let mut s = tiny_obs();
    s.buffer = vec![1.0];
    let mut s_next = tiny_obs();
    s_next.buffer = vec![2.0];
    assert_eq!(value_forward(&p, &s).unwrap(), 1.0);
    assert_eq!(value_forward(&p, &s_next).unwrap(), 2.0);
    let tr = Transition {
        state: s.clone(),
        action: 0,
        reward: 0.0,
        next_state: s_next.clone(),
        done: false,
    };
    assert!((advantage(&p, &tr, 0.99).unwrap() - 0.98).abs() < 1e-12);
    // Terminal transitions bootstrap from zero.
    let term = Transition {
        done: true,
        ..tr.clone()
    };
    assert!((advantage(&p, &term, 0.99).unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn zero_advantage_and_zero_entropy_give_zero_actor_gradient() {
    let p = PolicyParameters::init(tiny_cfg(6), 3).unwrap();
    let batch: Vec<(Transition, f64)> = (0..4)
        .map(|k| {
            (
                Transition {
                    state: tiny_obs(),
                    action: k % 6,
                    reward: 0.0,
                    next_state: tiny_obs(),
                    done: k == 3,
                },
                0.0,
            )
        })
        .collect();
    let g = actor_gradient(&p, &batch, 0.0).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn entropy_term_pushes_dominant_logit_down() {
    let cfg = tiny_cfg(2);
    let mut p = PolicyParameters::zeros(cfg.clone()).unwrap();
    // Bias the head toward action 0: π ≈ (0.88, 0.12).
    let head_b = seg_offset(&cfg, 2, "head.b");
    p.actor[head_b] = 2.0;
    let batch = vec![(
        Transition {
            state: tiny_obs(),
            action: 0,
            reward: 0.0,
            next_state: tiny_obs(),
            done: true,
        },
        0.0,
    )];
    let g = actor_gradient(&p, &batch, 1.0).unwrap();
    // Ascending this gradient must reduce the dominant logit's bias.
    assert!(
        g[head_b] < 0.0,
        "entropy ascent should push the max logit down, got {}",
        g[head_b]
    );
    assert!(g[head_b + 1] > 0.0);
}

#[test]
fn critic_gradient_is_zero_at_zero_td_error() {
    let cfg = tiny_cfg(2);
    let p = PolicyParameters::zeros(cfg).unwrap();
    // V ≡ 0 and reward 0 on a non-terminal step: δ = 0 everywhere.
    let batch = vec![Transition {
        state: tiny_obs(),
        action: 0,
        reward: 0.0,
        next_state: tiny_obs(),
        done: false,
    }];
    let g = critic_gradient(&p, &batch, 0.99).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn critic_gradient_matches_linear_closed_form() {
    // A critic that is linear in its head (everything upstream zero except
    // the buffer path): V = w_head · relu(b_t), so for one transition the
    // fixed-target loss gradient w.r.t. w_head is 2·(V − target)·relu(b_t).
    let cfg = tiny_cfg(2);
    let mut p = PolicyParameters::zeros(cfg.clone()).unwrap();
    p.critic[seg_offset(&cfg, 1, "linear2.w")] = 1.0;
    let hidden_w = seg_offset(&cfg, 1, "hidden.w");
    p.critic[hidden_w + cfg.concat_len() - 1] = 1.0;
    let head_w = seg_offset(&cfg, 1, "head.w");
    p.critic[head_w] = 0.5;
    let mut s = tiny_obs();
    s.buffer = vec![0.8];
    let tr = Transition {
        state: s,
        action: 0,
        reward: 0.3,
        next_state: tiny_obs(),
        done: true,
    };
    let v = 0.5 * 0.8;
    let delta = v - 0.3; // V − target
    let g = critic_gradient(&p, &[tr], 0.99).unwrap();
    assert!((g[head_w] - 2.0 * delta * 0.8).abs() < 1e-12);
}

fn rel_err(a: f64, b: f64) -> f64 {
    if (a - b).abs() < 1e-8 {
        0.0
    } else {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-7)
    }
}

#[test]
fn gradients_agree_with_finite_differences_once() {
    use rand::Rng;
    let cfg = tiny_cfg(3);
    let mut rng = StdRng::seed_from_u64(12);
    let p = PolicyParameters::init(cfg.clone(), 9).unwrap();
    let batch: Vec<(Transition, f64)> = (0..3)
        .map(|k| {
            (
                Transition {
                    state: random_obs(&mut rng),
                    action: k % 3,
                    reward: rng.gen_range(-1.0..1.0),
                    next_state: random_obs(&mut rng),
                    done: k == 2,
                },
                rng.gen_range(-1.0..1.0),
            )
        })
        .collect();
    let beta = 0.4;
    let eps = 1e-5;

    let actor_obj = |pp: &PolicyParameters| -> f64 {
        batch
            .iter()
            .map(|(tr, adv)| {
                let probs = policy_forward(pp, &tr.state).unwrap();
                probs[tr.action].ln() * adv + beta * entropy(&probs)
            })
            .sum()
    };
    let g = actor_gradient(&p, &batch, beta).unwrap();
    let mut worst = 0.0f64;
    let mut probe = p.clone();
    for i in 0..p.actor.len() {
        probe.actor[i] = p.actor[i] + eps;
        let up = actor_obj(&probe);
        probe.actor[i] = p.actor[i] - eps;
        let down = actor_obj(&probe);
        probe.actor[i] = p.actor[i];
        worst = worst.max(rel_err((up - down) / (2.0 * eps), g[i]));
    }
    assert!(worst < 1e-4, "actor gradient max rel error {worst}");

    let transitions: Vec<Transition> = batch.iter().map(|(t, _)| t.clone()).collect();
    // Targets frozen at the unperturbed parameters (semi-gradient).
    let targets: Vec<f64> = transitions
        .iter()
        .map(|tr| {
            let v_next = if tr.done {
                0.0
            } else {
                value_forward(&p, &tr.next_state).unwrap()
            };
            tr.reward + 0.99 * v_next
        })
        .collect();
    let critic_loss = |pp: &PolicyParameters| -> f64 {
        transitions
            .iter()
            .zip(&targets)
            .map(|(tr, target)| {
                let v = value_forward(pp, &tr.state).unwrap();
                (target - v) * (target - v)
            })
            .sum()
    };
    let g = critic_gradient(&p, &transitions, 0.99).unwrap();
    let mut worst = 0.0f64;
    for i in 0..p.critic.len() {
        probe.critic[i] = p.critic[i] + eps;
        let up = critic_loss(&probe);
        probe.critic[i] = p.critic[i] - eps;
        let down = critic_loss(&probe);
        probe.critic[i] = p.critic[i];
        worst = worst.max(rel_err((up - down) / (2.0 * eps), g[i]));
    }
    assert!(worst < 1e-4, "critic gradient max rel error {worst}");
}

#[test]
fn softmax_is_invariant_to_constant_logit_shifts() {
    let cfg = tiny_cfg(6);
    let p = PolicyParameters::init(cfg.clone(), 21).unwrap();
    let mut shifted = p.clone();
    let head_b = seg_offset(&cfg, 6, "head.b");
    for k in 0..6 {
        shifted.actor[head_b + k] += 3.7;
    }
    let obs = tiny_obs();
    let a = policy_forward(&p, &obs).unwrap();
    let b = policy_forward(&shifted, &obs).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    let mut rng = StdRng::seed_from_u64(0);
    assert_eq!(
        act(&p, &obs, ActionMode::Greedy, &mut rng).unwrap(),
        act(&shifted, &obs, ActionMode::Greedy, &mut rng).unwrap()
    );
}

#[test]
fn entropy_stays_within_bounds() {
    let mut rng = StdRng::seed_from_u64(33);
    for seed in 0..50 {
        let p = PolicyParameters::init(tiny_cfg(6), seed).unwrap();
        let probs = policy_forward(&p, &random_obs(&mut rng)).unwrap();
        let h = entropy(&probs);
        assert!((0.0..=6.0f64.ln() + 1e-12).contains(&h));
    }
}

#[test]
fn greedy_act_breaks_ties_low_and_follows_one_hot() {
    let p = PolicyParameters::zeros(tiny_cfg(6)).unwrap();
    let mut rng = StdRng::seed_from_u64(1);
    // Uniform policy: greedy takes index 0.
    assert_eq!(act(&p, &tiny_obs(), ActionMode::Greedy, &mut rng).unwrap(), 0);

    let cfg = tiny_cfg(4);
    let mut p = PolicyParameters::zeros(cfg.clone()).unwrap();
    let head_b = seg_offset(&cfg, 4, "head.b");
    p.actor[head_b + 2] = 50.0; // effectively one-hot on action 2
    for _ in 0..20 {
        assert_eq!(act(&p, &tiny_obs(), ActionMode::Greedy, &mut rng).unwrap(), 2);
        assert_eq!(act(&p, &tiny_obs(), ActionMode::Sample, &mut rng).unwrap(), 2);
    }
}

#[test]
fn sampled_frequencies_match_the_policy() {
    let p = PolicyParameters::init(tiny_cfg(6), 77).unwrap();
    let obs = tiny_obs();
    let probs = policy_forward(&p, &obs).unwrap();
    let mut counts = [0usize; 6];
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    for _ in 0..n {
        counts[act(&p, &obs, ActionMode::Sample, &mut rng).unwrap()] += 1;
    }
    for (k, &c) in counts.iter().enumerate() {
        let expected = probs[k] * n as f64;
        let sigma = (n as f64 * probs[k] * (1.0 - probs[k])).sqrt();
        assert!(
            (c as f64 - expected).abs() <= 3.0 * sigma,
            "action {k}: {c} vs {expected} ± 3·{sigma}"
        );
    }
}

/// A two-armed bandit: reward 1 for action 0, 0 for action 1, one step
/// per episode.
struct BanditEnv {
    obs: Observation,
}

impl BanditEnv {
    fn new() -> Self {
        BanditEnv { obs: tiny_obs() }
    }
}

impl Env for BanditEnv {
    fn reset(&mut self) -> crate::Result<Observation> {
        Ok(self.obs.clone())
    }

    fn step(&mut self, action: usize) -> crate::Result<(Observation, f64, bool)> {
        let reward = if action == 0 { 1.0 } else { 0.0 };
        Ok((self.obs.clone(), reward, true))
    }
}

fn bandit_training_config(episodes: u64) -> TrainingConfig {
    TrainingConfig {
        discount: 0.99,
        actor_lr: 0.1,
        critic_lr: 0.05,
        entropy_start: 1.0,
        entropy_end: 0.1,
        workers: 1,
        episodes,
        grad_clip: 40.0,
        seed: 11,
    }
}

#[test]
fn training_solves_the_bandit() {
    let init = PolicyParameters::init(tiny_cfg(2), 1).unwrap();
    let cfg = bandit_training_config(500);
    let (trained, log) = train(&cfg, init, |_| Ok(BanditEnv::new())).unwrap();
    let probs = policy_forward(&trained, &tiny_obs()).unwrap();
    assert!(
        probs[0] > 0.9,
        "bandit policy should prefer the rewarding arm, got {probs:?}"
    );
    assert_eq!(log.len(), 500);
    assert!((log[0].entropy_weight - 1.0).abs() < 1e-12);
    assert!((log.last().unwrap().entropy_weight - 0.1).abs() < 1e-12);
}

#[test]
fn zero_episodes_return_initialization() {
    let init = PolicyParameters::init(tiny_cfg(2), 5).unwrap();
    let cfg = bandit_training_config(0);
    let (params, log) = train(&cfg, init.clone(), |_| Ok(BanditEnv::new())).unwrap();
    assert_eq!(params, init);
    assert!(log.is_empty());
}

#[test]
fn single_worker_training_is_reproducible() {
    let run = || {
        let init = PolicyParameters::init(tiny_cfg(2), 1).unwrap();
        train(&bandit_training_config(50), init, |_| Ok(BanditEnv::new())).unwrap()
    };
    let (p1, l1) = run();
    let (p2, l2) = run();
    assert_eq!(p1, p2);
    assert_eq!(l1, l2);
}

#[test]
fn multi_worker_training_completes() {
    let init = PolicyParameters::init(tiny_cfg(2), 1).unwrap();
    let mut cfg = bandit_training_config(120);
    cfg.workers = 4;
    let (trained, log) = train(&cfg, init, |_| Ok(BanditEnv::new())).unwrap();
    assert_eq!(log.len(), 120);
    // Log is sorted by episode regardless of completion order.
    assert!(log.windows(2).all(|w| w[0].episode < w[1].episode));
    let probs = policy_forward(&trained, &tiny_obs()).unwrap();
    assert!(probs[0] > 0.5);
}

#[test]
fn checkpoint_round_trip() {
    let p = PolicyParameters::init(tiny_cfg(6), 8).unwrap();
    let c = p.to_container();
    let back = PolicyParameters::from_container(&c, tiny_cfg(6)).unwrap();
    assert_eq!(p, back);
    // A mismatched shape is a configuration error.
    assert!(PolicyParameters::from_container(&c, tiny_cfg(4)).is_err());
}
