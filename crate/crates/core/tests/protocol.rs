//! End-to-end protocol behavior on short runs.

use rrl_core::protocol::{
    run_experiment, EvalMode, MessageKind, RunConfig, Scheme, Transport,
};

fn tiny(scheme: Scheme, seed: u64) -> RunConfig {
    RunConfig {
        scheme,
        run_seed: seed,
        total_steps: 512,
        batch_size: 128,
        eval_interval: 256,
        eval_episodes: 5,
        ..Default::default()
    }
}

#[test]
fn grasp_run_completes_with_lockstep() {
    let ledger = run_experiment(&tiny(Scheme::Grasp, 1)).unwrap();
    assert_eq!(ledger.bit_rows.len(), 512);
    assert_eq!(ledger.epoch_rows.len(), 4);
    assert!(ledger
        .epoch_rows
        .iter()
        .all(|e| e.digest_match == Some(true)));
    // identically initialized policies mean the first epoch's messages are
    // all index one at the prior's floor cost
    let floor = ledger.bit_rows[0].bits_ideal;
    assert!(ledger.bit_rows[..128]
        .iter()
        .all(|r| (r.bits_ideal - floor).abs() < 1e-12));
    assert!(ledger.bit_rows[..128].iter().all(|r| r.bits_wire == 1));
    // no reward ever crosses to the actors
    assert_eq!(ledger.msg_counts[MessageKind::Reward as usize], 0);
    assert_eq!(ledger.msg_counts[MessageKind::OrcIndex as usize], 512);
}

#[test]
fn asc_bits_are_constant_and_reward_free() {
    let ledger = run_experiment(&tiny(Scheme::Asc, 2)).unwrap();
    // gridworld has four actions: two bits per step
    assert!(ledger.bit_rows.iter().all(|r| r.bits_wire == 2));
    assert_eq!(ledger.total_wire_bits(), 2 * 512);
    assert_eq!(ledger.msg_counts[MessageKind::Reward as usize], 0);
    assert_eq!(ledger.msg_counts[MessageKind::AscAction as usize], 512);
}

#[test]
fn fr_accounting_is_exactly_32_per_step() {
    let ledger = run_experiment(&tiny(Scheme::Fr, 3)).unwrap();
    assert_eq!(ledger.bit_rows.len(), 512);
    assert!(ledger.bit_rows.iter().all(|r| r.bits_wire == 32));
    assert_eq!(ledger.total_wire_bits(), 32 * 512);
    assert_eq!(ledger.msg_counts[MessageKind::Reward as usize], 512);
}

#[test]
fn qr4_accounting() {
    let ledger = run_experiment(&tiny(Scheme::Qr4, 3)).unwrap();
    assert_eq!(ledger.total_wire_bits(), 4 * 512);
}

#[test]
fn fr_and_asc_aligned_seeds_produce_identical_returns() {
    let asc = run_experiment(&tiny(Scheme::Asc, 7)).unwrap();
    let fr = run_experiment(&tiny(Scheme::Fr, 7)).unwrap();
    assert_eq!(asc.eval_rows.len(), fr.eval_rows.len());
    for (a, f) in asc.eval_rows.iter().zip(&fr.eval_rows) {
        assert_eq!(a.controller_return_mean.to_bits(), f.controller_return_mean.to_bits());
        assert_eq!(a.controller_return_std.to_bits(), f.controller_return_std.to_bits());
    }
}

#[test]
fn runs_are_deterministic() {
    let a = run_experiment(&tiny(Scheme::Grasp, 11)).unwrap();
    let b = run_experiment(&tiny(Scheme::Grasp, 11)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn stream_transport_matches_in_process() {
    let mut cfg = tiny(Scheme::Grasp, 5);
    let in_process = run_experiment(&cfg).unwrap();
    cfg.transport = Transport::Stream;
    let stream = run_experiment(&cfg).unwrap();
    assert_eq!(in_process, stream);
}

#[test]
fn stream_transport_matches_for_reward_scheme() {
    let mut cfg = tiny(Scheme::Qr8, 6);
    let in_process = run_experiment(&cfg).unwrap();
    cfg.transport = Transport::Stream;
    let stream = run_experiment(&cfg).unwrap();
    assert_eq!(in_process, stream);
}

#[test]
fn multi_actor_grasp_accounts_per_actor() {
    let mut cfg = tiny(Scheme::Grasp, 9);
    cfg.env = "spreadlite".into();
    cfg.total_steps = 256;
    cfg.batch_size = 128;
    cfg.eval_interval = 256;
    let ledger = run_experiment(&cfg).unwrap();
    assert_eq!(ledger.num_actors, 3);
    assert_eq!(ledger.bit_rows.len(), 256 * 3);
    // per-actor ledgers sum to the reported total exactly
    let per_actor: Vec<f64> = (0..3u16)
        .map(|i| {
            ledger
                .bit_rows
                .iter()
                .filter(|r| r.actor == i)
                .map(|r| r.bits_ideal)
                .sum()
        })
        .collect();
    let total: f64 = per_actor.iter().sum();
    assert_eq!(total.to_bits(), ledger.total_ideal_bits().to_bits());
    assert!(ledger.epoch_rows.iter().all(|e| e.digest_match == Some(true)));
}

#[test]
fn shared_policy_lockstep_holds() {
    let mut cfg = tiny(Scheme::Grasp, 13);
    cfg.env = "spreadlite".into();
    cfg.total_steps = 256;
    cfg.batch_size = 128;
    cfg.eval_interval = 256;
    cfg.shared_policy = true;
    let ledger = run_experiment(&cfg).unwrap();
    assert!(ledger.epoch_rows.iter().all(|e| e.digest_match == Some(true)));
    let mut stream_cfg = cfg.clone();
    stream_cfg.transport = Transport::Stream;
    assert_eq!(run_experiment(&stream_cfg).unwrap(), ledger);
}

#[test]
fn shared_policy_rejected_for_reward_schemes() {
    let mut cfg = tiny(Scheme::Fr, 1);
    cfg.shared_policy = true;
    assert!(run_experiment(&cfg).is_err());
}

#[test]
fn continuous_grasp_runs() {
    let mut cfg = tiny(Scheme::Grasp, 21);
    cfg.env = "pointnav".into();
    cfg.total_steps = 256;
    cfg.batch_size = 128;
    cfg.eval_interval = 256;
    cfg.orc_n = 64;
    cfg.orc_zipf_alpha = 1.0 + 1.0 / 64.0;
    let ledger = run_experiment(&cfg).unwrap();
    assert_eq!(ledger.bit_rows.len(), 256);
    assert!(ledger.epoch_rows.iter().all(|e| e.digest_match == Some(true)));
    // clone eval present for action-sending schemes
    assert!(ledger.eval_rows.iter().all(|r| r.clone_return_mean.is_some()));
}

#[test]
fn eval_rows_follow_cadence() {
    let ledger = run_experiment(&tiny(Scheme::Grasp, 31)).unwrap();
    let steps: Vec<u32> = ledger.eval_rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 256, 512]);
    // at step zero the clone equals the controller policy, so paired
    // evaluation gives identical returns
    let first = &ledger.eval_rows[0];
    assert_eq!(
        first.controller_return_mean.to_bits(),
        first.clone_return_mean.unwrap().to_bits()
    );
}

#[test]
fn mode_eval_differs_from_stochastic() {
    let mut cfg = tiny(Scheme::Asc, 17);
    cfg.eval_mode = EvalMode::Mode;
    let a = run_experiment(&cfg).unwrap();
    cfg.eval_mode = EvalMode::Stochastic;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(
        a.eval_rows.last().unwrap().controller_return_mean,
        b.eval_rows.last().unwrap().controller_return_mean
    );
}
