use std::collections::BTreeMap;

use commitguard::engine::{map_action, EngineError, SocialNetwork, DefaultAuthority};
use commitguard::golden;
use commitguard::model::{AgentId, Condition, ModelError};
use commitguard::oracle::reference_schedule_with;
use commitguard::report::{state_counts, waited_count, waited_in_log};
use commitguard::workload::{generate_synthetic, SyntheticSpec};
use commitguard::*;
use proptest::prelude::*;

fn registered(services: &[&str]) -> Vec<SimEvent> {
    services.iter().map(|s| SimEvent::register(0, "facebook", s)).collect()
}

fn narrative_of(events: &[SimEvent], cfg: &SimConfig) -> String {
    render_narrative(&run(events, cfg).unwrap().log)
}

#[test]
fn action_mapping() {
    use ResponsibilityId::*;
    assert_eq!(map_action(Action::Share), &[Resp6, Resp2]);
    assert_eq!(map_action(Action::Collect), &[Resp1]);
    assert_eq!(map_action(Action::PostActivity), &[Resp7]);
    assert_eq!(map_action(Action::NotTamper), &[Resp3]);
    assert_eq!(map_action(Action::SignOff), &[Resp4]);
    assert_eq!(map_action(Action::NotReveal), &[Resp5]);
    assert_eq!(map_action(Action::Post), &[Resp2]);
    assert!(map_action(Action::Register).is_empty());
}

#[test]
fn registration_gate() {
    let mut net = SocialNetwork::new("facebook", Policy::Fcfs, ClassificationTable::default());
    let svc = AgentId::service("sws_youtube");
    assert!(net.register_service(&svc, b"token", &DefaultAuthority));
    assert!(net.registered_services.contains(&svc));
    assert!(net.register_service(&svc, b"", &DefaultAuthority), "re-registration is idempotent");
    assert_eq!(net.registered_services.len(), 1);
    assert!(!net.register_service(&AgentId::service("sws_x"), b"", &DefaultAuthority));
    assert!(!net.register_service(&AgentId::non_member("nm"), b"token", &DefaultAuthority));
}

#[test]
fn unregistered_service_cannot_commit() {
    let events = vec![SimEvent::new(0, "facebook", "alice", Action::Collect, "sws_ghost")];
    let err = run(&events, &SimConfig::default()).unwrap_err();
    assert_eq!(
        err,
        EngineError::Model { index: 0, source: ModelError::UnregisteredDebtor("sws_ghost".into()) }
    );
    let mut rejected = SimEvent::register(0, "facebook", "sws_ghost");
    rejected.content.detail.clear();
    let err = run(&[rejected, events[0].clone()], &SimConfig::default()).unwrap_err();
    assert!(matches!(err, EngineError::Model { index: 1, .. }));
}

#[test]
fn custom_authority_hook() {
    let only_youtube = |_: &str, svc: &AgentId, _: &[u8]| svc.name == "sws_youtube";
    let mut events = registered(&["sws_youtube", "sws_spam"]);
    events.push(SimEvent::new(1, "facebook", "alice", Action::Post, "sws_spam"));
    let err = Simulator::new(SimConfig::default())
        .with_authority(&only_youtube)
        .run(&events)
        .unwrap_err();
    assert!(matches!(err, EngineError::Model { source: ModelError::UnregisteredDebtor(_), .. }));
}

#[test]
fn uncontended_collect() {
    let mut events = registered(&["sws_linkedin"]);
    events.push(SimEvent::new(3, "facebook", "alice", Action::Collect, "sws_linkedin").with_duration(2));
    let out = run(&events, &SimConfig::default()).unwrap();
    let transitions: Vec<_> = out.log.iter().map(|r| (r.tick, r.old_state, r.new_state)).collect();
    use LifecycleState::*;
    assert_eq!(transitions, [(3, Created, Active), (5, Active, Deactivated)]);
    assert_eq!(waited_count(&out.metrics), 0);
    assert_eq!(state_counts(&out.metrics), (0, 0, 0));
}

#[test]
fn sharing_walkthrough_order() {
    let g = golden::sharing_walkthrough();
    let out = run(&g.events, &SimConfig::default()).unwrap();
    let order: Vec<u8> = out.log.activation_order().iter().map(|(_, r)| r.number()).collect();
    assert_eq!(order, [6, 2, 7, 1]);
    assert_eq!(render_narrative(&out.log), g.narrative);
    // Resp2 waits on Resp6; Resp7 and Resp1 wait behind them.
    assert_eq!(waited_count(&out.metrics), 3);
    let relations: BTreeMap<u8, Option<Relation>> = out
        .log
        .iter()
        .filter(|r| r.old_state == LifecycleState::Created)
        .map(|r| (r.responsibility.number(), r.relation))
        .collect();
    assert_eq!(relations[&7], Some(Relation::Family));
    assert_eq!(relations[&1], Some(Relation::Strange));
}

#[test]
fn golden_narratives_match() {
    for g in golden::all() {
        assert_eq!(narrative_of(&g.events, &SimConfig::default()), g.narrative, "{}", g.name);
        let reference = reference_schedule(&g.events, &SimConfig::default()).unwrap();
        assert_eq!(render_narrative(&reference), g.narrative, "reference {}", g.name);
    }
}

#[test]
fn trace_row1_waits_twice() {
    let g = golden::trace_row1();
    let out = run(&g.events, &SimConfig::default()).unwrap();
    assert_eq!(waited_count(&out.metrics), 2);
    assert_eq!(out.log.len(), 10);
}

#[test]
fn reader_override_changes_friendly_schedule() {
    let g = golden::friendly_readers();
    let mut cfg = SimConfig::default();
    cfg.classification_overrides.insert(ResponsibilityId::Resp1, AccessClass::Writer);
    assert_ne!(narrative_of(&g.events, &cfg), g.narrative);
}

#[test]
fn state_counts_reader_reader_writer() {
    let mut events = registered(&["sws_a"]);
    events.extend([
        SimEvent::new(0, "facebook", "alice", Action::Collect, "sws_a").with_duration(10),
        SimEvent::new(1, "facebook", "alice", Action::NotTamper, "sws_a").with_duration(10),
        SimEvent::new(2, "facebook", "alice", Action::Post, "sws_a").with_duration(10),
    ]);
    let out = run(&events, &SimConfig::default()).unwrap();
    assert_eq!(state_counts(&out.metrics), (1, 0, 2));
}

#[test]
fn state_counts_sequential_and_all_readers() {
    let mut events = registered(&["sws_a"]);
    events.extend([
        SimEvent::new(0, "facebook", "alice", Action::Post, "sws_a").with_duration(2),
        SimEvent::new(5, "facebook", "alice", Action::Post, "sws_a").with_duration(2),
    ]);
    assert_eq!(state_counts(&run(&events, &SimConfig::default()).unwrap().metrics), (0, 0, 0));

    let readers = generate_synthetic(3, 300, 2, 1.0, 2);
    let (_, family, strange) = state_counts(&run(&readers, &SimConfig::default()).unwrap().metrics);
    assert_eq!((family, strange), (0, 0));
}

#[test]
fn arrival_and_completion_on_same_tick() {
    // Arrivals at a tick see the active set before that tick's completions.
    let mut events = registered(&["sws_a"]);
    events.extend([
        SimEvent::new(0, "facebook", "alice", Action::Post, "sws_a").with_duration(4),
        SimEvent::new(4, "facebook", "alice", Action::Collect, "sws_a").with_duration(4),
    ]);
    let out = run(&events, &SimConfig::default()).unwrap();
    let reader: Vec<_> = out.log.iter().filter(|r| r.responsibility == ResponsibilityId::Resp1).collect();
    assert_eq!(reader[0].new_state, LifecycleState::Waiting);
    assert_eq!(reader[2].tick, 4, "signaled at the completing tick");
    assert!(check_log(&out.log).unwrap().is_consistent());
}

#[test]
fn reader_joins_running_batch_while_writer_waits() {
    let mut events = registered(&["sws_a"]);
    events.extend([
        SimEvent::new(0, "facebook", "alice", Action::Collect, "sws_a").with_duration(10),
        SimEvent::new(1, "facebook", "alice", Action::Post, "sws_a").with_duration(2),
        SimEvent::new(2, "facebook", "alice", Action::NotTamper, "sws_a").with_duration(10),
    ]);
    let out = run(&events, &SimConfig::default()).unwrap();
    let order: Vec<u8> = out.log.activation_order().iter().map(|(_, r)| r.number()).collect();
    assert_eq!(order, [1, 3, 2]);
    let post_active = out
        .log
        .iter()
        .find(|r| r.responsibility == ResponsibilityId::Resp2 && r.new_state == LifecycleState::Active)
        .unwrap();
    assert_eq!(post_active.tick, 12);
}

#[test]
fn failed_goal_check_suppresses_post() {
    let g = golden::sharing_walkthrough();
    let deny = |c: &Condition, _: &Commitment| c.predicate != "valid" || c.args[0] != "p_share_video";
    let out = Simulator::new(SimConfig::default()).with_conditions(&deny).run(&g.events).unwrap();
    let failed: Vec<_> = out.log.iter().filter(|r| r.failed).map(|r| r.responsibility.number()).collect();
    assert_eq!(failed, [6, 2]);
    let text = render_narrative(&out.log);
    assert!(text.starts_with(
        "C_Resp6 : Checks Sharing Goal is Active\nC_Resp2 : Shares Information is Waiting\n"
    ));
    assert!(text.contains("C_Resp6 : Checks Sharing Goal is Deactivate (Failed)\n"));
    assert!(text.contains("C_Resp2 : Shares Information is Deactivate (Failed)\n"));
    assert_eq!(out.metrics.failed, 2);
    // The failed pair takes no time, so PostActivity finds the account idle.
    let r7 = out
        .log
        .iter()
        .find(|r| r.responsibility == ResponsibilityId::Resp7 && r.new_state == LifecycleState::Active)
        .unwrap();
    assert_eq!(r7.tick, 1);
    let reference = reference_schedule_with(&g.events, &SimConfig::default(), &DefaultAuthority, &deny).unwrap();
    assert_eq!(reference, out.log);
    assert!(check_log(&out.log).unwrap().is_consistent());
}

#[test]
fn watchdog_fires_on_long_wait() {
    let g = golden::trace_row1();
    let cfg = SimConfig { max_wait: 1, ..SimConfig::default() };
    let err = run(&g.events, &cfg).unwrap_err();
    // Resp2 arrived at 2 and is signaled at 4.
    assert_eq!(err, EngineError::WatchdogExpired { cid: CommitmentId(1), waited: 2, max_wait: 1 });
    assert_eq!(reference_schedule(&g.events, &cfg).unwrap_err(), err);
}

#[test]
fn unsorted_and_invalid_inputs() {
    let mut events = registered(&["sws_a"]);
    events.push(SimEvent::new(5, "facebook", "a", Action::Post, "sws_a"));
    events.push(SimEvent::new(3, "facebook", "a", Action::Post, "sws_a"));
    assert_eq!(
        run(&events, &SimConfig::default()).unwrap_err(),
        EngineError::UnsortedEvents { index: 2, at: 3 }
    );
    let zero = vec![SimEvent::new(0, "facebook", "a", Action::Post, "sws_a").with_duration(0)];
    assert!(matches!(run(&zero, &SimConfig::default()), Err(EngineError::InvalidEvent { .. })));
    let cfg = SimConfig { default_duration: 0, ..SimConfig::default() };
    assert!(matches!(run(&[], &cfg), Err(EngineError::InvalidConfig(_))));
}

#[test]
fn empty_workload() {
    let out = run(&[], &SimConfig::default()).unwrap();
    assert!(out.log.is_empty());
    assert!(reference_schedule(&[], &SimConfig::default()).unwrap().is_empty());
}

#[test]
fn metrics_agree_with_log() {
    for policy in [Policy::Fcfs, Policy::Priority] {
        let events = generate_synthetic(11, 2000, 3, 0.5, 3);
        let out = run(&events, &SimConfig::default().with_policy(policy)).unwrap();
        assert_eq!(out.metrics.waited_total, waited_in_log(&out.log));
        let admissions_against_active = out.log.iter().filter(|r| r.relation.is_some()).count() as u64;
        let (f, fa, s) = state_counts(&out.metrics);
        assert!(f + fa + s >= admissions_against_active);
        let per_resp: u64 = out.metrics.per_responsibility_counts.values().sum();
        assert_eq!(per_resp, out.metrics.commitments);
        assert!(out.metrics.waited_total <= out.metrics.commitments);
        let last: BTreeMap<_, _> = out
            .metrics
            .queue_length_series
            .iter()
            .map(|s| (s.account.clone(), s.length))
            .collect();
        assert!(last.values().all(|l| *l == 0), "queues drain by the end");
    }
}

#[test]
fn differential_small_seeds() {
    for seed in 0..10 {
        for policy in [Policy::Fcfs, Policy::Priority] {
            let events = generate_synthetic(seed, 300, 3, 0.5, 3);
            let cfg = SimConfig::default().with_policy(policy);
            assert_eq!(run(&events, &cfg).unwrap().log, reference_schedule(&events, &cfg).unwrap());
        }
    }
}

fn relabel_per_account(log: &ExecutionLog, account: &AccountRef) -> Vec<String> {
    let mut ids = BTreeMap::new();
    log.for_account(account)
        .map(|r| {
            let n = ids.len();
            let local = *ids.entry(r.cid).or_insert(n);
            format!("{}:{}:{}:{}>{}", r.tick, local, r.responsibility, r.old_state, r.new_state)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_is_deterministic_and_sound(seed in any::<u64>(), readers in 0.0f64..=1.0, priority in any::<bool>()) {
        let spec = SyntheticSpec { seed, n_events: 400, n_accounts: 3, reader_fraction: readers, ..SyntheticSpec::default() };
        let events = spec.generate();
        let policy = if priority { Policy::Priority } else { Policy::Fcfs };
        let cfg = SimConfig::default().with_policy(policy);
        let a = run(&events, &cfg).unwrap();
        let b = run(&events, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(check_log(&a.log).unwrap().is_consistent());
        prop_assert!(a.log.iter().zip(a.log.iter().skip(1)).all(|(x, y)| x.tick <= y.tick));
        prop_assert_eq!(reference_schedule(&events, &cfg).unwrap(), a.log);
    }

    #[test]
    fn disjoint_accounts_are_isolated(seed in any::<u64>()) {
        let one = SyntheticSpec { seed, n_events: 120, n_accounts: 1, network: "facebook".into(), ..SyntheticSpec::default() }.generate();
        let two = SyntheticSpec { seed: seed ^ 1, n_events: 120, n_accounts: 1, network: "linkedin".into(), ..SyntheticSpec::default() }.generate();
        let merged = |first: &[SimEvent], second: &[SimEvent]| {
            let mut all: Vec<SimEvent> = first.iter().chain(second).cloned().collect();
            all.sort_by_key(|e| e.at);
            all
        };
        // Same events, other interleaving of same-tick arrivals across accounts.
        let a = merged(&one, &two);
        let b = merged(&two, &one);
        let cfg = SimConfig::default();
        let la = run(&a, &cfg).unwrap().log;
        let lb = run(&b, &cfg).unwrap().log;
        for acct in [AccountRef::new("facebook", "acct0"), AccountRef::new("linkedin", "acct0")] {
            prop_assert_eq!(relabel_per_account(&la, &acct), relabel_per_account(&lb, &acct));
        }
    }
}
