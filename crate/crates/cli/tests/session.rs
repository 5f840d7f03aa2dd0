use std::sync::{Arc, OnceLock};

use clutch_driver::{ClutchError, ClutchEvent, ClutchPattern, Transition};
use inflation_solver::{apex, MembraneModel, SolverConfig};
use membrane_cli::protocol::{DeltaKind, RejectReason};
use membrane_cli::{Command, LogEntry, Session, SessionError, SharedSession};
use membrane_core::design::{build_default_design, ClutchId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model() -> Arc<MembraneModel> {
    static MODEL: OnceLock<Arc<MembraneModel>> = OnceLock::new();
    MODEL
        .get_or_init(|| {
            let config = SolverConfig { mesh_edge_length: 0.01, ..SolverConfig::default() };
            Arc::new(MembraneModel::new(&build_default_design(), &config).unwrap())
        })
        .clone()
}

fn clutch(clutch: ClutchId, transition: Transition) -> Command {
    Command::ClutchEvent { clutch, transition }
}

#[test]
fn set_pressure_on_a_fresh_session_is_the_pyramid_equilibrium() {
    let m = model();
    let mut s = Session::new("a", m.clone());
    let applied = s.apply(Command::SetPressure { pa: 3100.0 }).unwrap();
    let direct = m.solve_equilibrium(&ClutchPattern::pyramid(), 3100.0, None).unwrap();
    assert_eq!(s.state().displacement, direct.displacement);
    let [d] = applied.deltas.as_slice() else { panic!("one delta") };
    assert_eq!(d.kind, DeltaKind::Equilibrium);
    assert_eq!(d.apex_mm, apex(&direct).height * 1e3);
    assert_eq!(d.seq, 1);
    assert_eq!(d.surface.as_ref().unwrap().vertices.len(), m.mesh.vertex_count());
}

#[test]
fn release_transient_matches_dynamic_transient() {
    let m = model();
    let mut s = Session::new("b", m.clone());
    s.apply(clutch(ClutchId::Inboard, Transition::Activate)).unwrap();
    s.apply(Command::SetPressure { pa: 3100.0 }).unwrap();
    let round = s.state().clone();
    assert_eq!(round.pattern, ClutchPattern::round());

    let pattern = s.apply(clutch(ClutchId::Inboard, Transition::Deactivate)).unwrap();
    assert_eq!(pattern.deltas[0].kind, DeltaKind::Pattern);
    assert!(pattern.deltas[0].surface.is_none());
    assert_eq!(s.state(), &round, "clutch events alone do not move the membrane");

    let applied = s.apply(Command::TriggerTransient { duration: 0.2 }).unwrap();
    let event = ClutchEvent::new(0.0, ClutchId::Inboard, Transition::Deactivate);
    let frames = m.dynamic_transient(&round, &event, 0.2).unwrap();
    assert_eq!(applied.deltas.len(), frames.len());
    for (i, (d, f)) in applied.deltas.iter().zip(&frames).enumerate() {
        assert_eq!(d.frame, Some([i, frames.len()]));
        assert_eq!(d.apex_mm, apex(f).height * 1e3);
        assert_eq!(d.time, f.time);
    }
    assert_eq!(s.state().displacement, frames.last().unwrap().displacement);
    assert!((s.clock() - 0.2).abs() < 1e-15);
    // The inboard clutch let go, so the dome rises during the transient.
    assert!(applied.deltas.last().unwrap().apex_mm > applied.deltas[0].apex_mm);
}

#[test]
fn illegal_commands_leave_the_session_untouched() {
    let mut s = Session::new("c", model());
    let before = s.clone();
    let err = s.apply(clutch(ClutchId::OutboardN, Transition::Deactivate)).unwrap_err();
    assert!(matches!(err, SessionError::Clutch(ClutchError::IllegalTransition { .. })));
    assert_eq!(err.reason(), RejectReason::Illegal);
    for bad in [Command::SetPressure { pa: -1.0 }, Command::SetPressure { pa: f64::NAN }, Command::TriggerTransient { duration: 0.0 }] {
        assert_eq!(s.apply(bad).unwrap_err().reason(), RejectReason::Malformed);
    }
    assert!(s.log().is_empty());
    assert_eq!(s.state(), before.state());
}

#[test]
fn second_concurrent_command_is_rejected_with_a_retry_hint() {
    let shared = SharedSession::new(Session::new("d", model()));
    let first = shared.try_begin().unwrap();
    assert!(shared.summary().busy);
    let worker = std::thread::spawn(move || first.run(Command::SetPressure { pa: 3100.0 }).map(|a| a.entry.seq));
    let err = shared.try_begin().unwrap_err();
    assert_eq!(err.reason(), RejectReason::Busy);
    assert!(err.retry_after_ms().unwrap() > 0);
    assert_eq!(worker.join().unwrap().unwrap(), 1);
    assert!(!shared.is_busy());
    let summary = shared.summary();
    assert_eq!(summary.log.len(), 1);
    assert_eq!(summary.pressure_pa, 3100.0);
    // Free again once the ticket is gone.
    let again = shared.try_begin().unwrap();
    again.run(Command::Reset).unwrap();
    drop(again);
    assert_eq!(shared.summary().log.len(), 2);
}

fn assert_same(a: &Session, b: &Session) {
    assert_eq!(a.state().displacement, b.state().displacement);
    assert_eq!(a.state().velocity, b.state().velocity);
    assert_eq!(a.state().pressure.to_bits(), b.state().pressure.to_bits());
    assert_eq!(a.pattern(), b.pattern());
    assert_eq!(a.log(), b.log());
    assert_eq!(a.clock().to_bits(), b.clock().to_bits());
}

#[test]
fn replaying_the_log_is_bit_identical() {
    let m = model();
    let mut s = Session::new("e", m.clone());
    for c in [
        clutch(ClutchId::OutboardE, Transition::Activate),
        Command::SetPressure { pa: 1200.0 },
        clutch(ClutchId::Inboard, Transition::Activate),
        Command::SetPressure { pa: 2500.0 },
        clutch(ClutchId::OutboardE, Transition::Deactivate),
        Command::TriggerTransient { duration: 0.03 },
        Command::SetPressure { pa: 2000.0 },
        Command::Reset,
        Command::SetPressure { pa: 800.0 },
    ] {
        s.apply(c).unwrap();
    }
    let log: Vec<LogEntry> = serde_json::from_str(&serde_json::to_string(s.log()).unwrap()).unwrap();
    assert!(log.windows(2).all(|w| w[1].seq == w[0].seq + 1 && w[1].time >= w[0].time));
    assert_eq!(log[4].clutch_event(), Some(ClutchEvent::new(0.0, ClutchId::OutboardE, Transition::Deactivate)));
    let replayed = Session::replay("e2", m, &log).unwrap();
    assert_same(&s, &replayed);
}

#[test]
fn random_command_sequences_replay_bit_identically() {
    let m = model();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let mut s = Session::new("f", m.clone());
        for _ in 0..5 {
            let c = match rng.random_range(0..4) {
                0 => Command::SetPressure { pa: rng.random_range(0.0..3000.0f64).round() },
                1 => {
                    let id = ClutchId::ALL[rng.random_range(0..5)];
                    let t = if s.pattern().is_engaged(id) { Transition::Deactivate } else { Transition::Activate };
                    clutch(id, t)
                }
                2 => Command::TriggerTransient { duration: 0.01 },
                _ => Command::Reset,
            };
            s.apply(c).unwrap();
        }
        let replayed = Session::replay("f2", m.clone(), s.log()).unwrap();
        assert_same(&s, &replayed);
    }
}

#[test]
fn replay_rejects_a_tampered_log() {
    let m = model();
    let mut s = Session::new("g", m.clone());
    s.apply(clutch(ClutchId::Inboard, Transition::Activate)).unwrap();
    let mut log = s.log().to_vec();
    log[0].seq = 5;
    assert!(matches!(Session::replay("g2", m.clone(), &log), Err(SessionError::Replay { seq: 5, .. })));
    log[0].seq = 1;
    log.push(LogEntry { seq: 2, time: 0.0, command: clutch(ClutchId::Inboard, Transition::Activate) });
    assert!(matches!(Session::replay("g3", m, &log), Err(SessionError::Clutch(_))));
}
