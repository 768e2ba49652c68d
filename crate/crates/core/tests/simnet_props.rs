use capsim::{caps_multiply, make_strassen_winograd, MachineParams, Matrix, PhaseKind, SimMachine};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
enum Op {
    Flops(usize, u64),
    Send(usize, usize, u64),
}

fn phases(p: usize) -> impl Strategy<Value = Vec<(bool, Vec<Op>)>> {
    let op = prop_oneof![
        (0..p, 0u64..1000).prop_map(|(q, f)| Op::Flops(q, f)),
        (0..p, 0..p, 0u64..500).prop_map(|(a, b, w)| Op::Send(a, b, w)),
    ];
    prop::collection::vec((any::<bool>(), prop::collection::vec(op, 0..12)), 0..8)
}

fn replay(p: usize, script: &[(bool, Vec<Op>)], perm: &[usize]) -> capsim::CostReport {
    let mut m = SimMachine::new(MachineParams::new(p, None, 0.5, 0.25, 0.125)).unwrap();
    for (compute, ops) in script {
        let kind = if *compute {
            PhaseKind::Compute
        } else {
            PhaseKind::Communicate
        };
        m.begin_phase(kind).unwrap();
        for op in ops {
            match *op {
                Op::Flops(q, f) if *compute => m.add_flops(perm[q], f).unwrap(),
                Op::Send(a, b, w) if !*compute => m.send(perm[a], perm[b], w).unwrap(),
                _ => {}
            }
        }
        m.end_phase().unwrap();
    }
    m.report().unwrap()
}

proptest! {
    #[test]
    fn critical_path_ignores_processor_names(
        script in phases(9),
        seed in any::<u64>(),
    ) {
        let id: Vec<usize> = (0..9).collect();
        let mut perm = id.clone();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let r1 = replay(9, &script, &id);
        let r2 = replay(9, &script, &perm);
        prop_assert_eq!(r1, r2);
        let params = MachineParams::new(9, None, 0.5, 0.25, 0.125);
        prop_assert!(r1.check_invariants(&params).is_ok());
        let t = 0.5 * r1.messages_critical as f64
            + 0.25 * r1.words_critical as f64
            + 0.125 * r1.flops_critical as f64;
        prop_assert_eq!(r1.modeled_time_seconds, t);
    }

    #[test]
    fn peak_never_exceeds_capacity(cap in 1u64..200, sizes in prop::collection::vec(0u64..80, 1..20)) {
        let mut m = SimMachine::new(MachineParams::new(2, Some(cap), 1.0, 1.0, 1.0)).unwrap();
        let mut held = Vec::new();
        for s in sizes {
            if m.alloc(1, s).is_ok() {
                held.push(s);
            } else if let Some(h) = held.pop() {
                m.free(1, h).unwrap();
            }
            prop_assert!(m.peak_memory(1) <= cap);
        }
        prop_assert!(m.report().unwrap().peak_memory_words <= cap);
    }
}

#[test]
fn identical_runs_are_bit_identical() {
    let sw = make_strassen_winograd();
    let mut outs = Vec::new();
    for _ in 0..2 {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = Matrix::random_uniform(112, 112, &mut rng);
        let b = Matrix::random_uniform(112, 112, &mut rng);
        let mut m = SimMachine::new(MachineParams::new(7, Some(20000), 1e-6, 1e-9, 1e-10)).unwrap();
        outs.push(caps_multiply(&mut m, &a, &b, &"DB".parse().unwrap(), &sw, 7).unwrap());
    }
    assert!(outs[0].0.bit_eq(&outs[1].0));
    assert_eq!(outs[0].1, outs[1].1);
    assert!(outs[0].1.peak_memory_words <= 20000);
}
