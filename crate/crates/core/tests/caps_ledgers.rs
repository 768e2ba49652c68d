use capsim::caps::{auto_schedule, compute_ell, validate_schedule};
use capsim::costmodel::{bw_um, caps_cost, caps_schedule_ledger, l_um, mem_um, CapsVariant};
use capsim::{
    caps_multiply, make_strassen_winograd, BilinearAlgorithm, CostReport, Layout, MachineParams,
    Matrix, Schedule, SimMachine,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn inputs(n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        Matrix::random_uniform(n, n, &mut rng),
        Matrix::random_uniform(n, n, &mut rng),
    )
}

fn simulate(
    alg: &BilinearAlgorithm,
    n: usize,
    p: usize,
    m: Option<u64>,
    schedule: &Schedule,
    cutoff: usize,
) -> (Matrix, CostReport, f64) {
    let (a, b) = inputs(n, n as u64 ^ p as u64);
    let mut machine = SimMachine::new(MachineParams::new(p, m, 1.0, 1.0, 1.0)).unwrap();
    machine.set_message_log(false);
    let (c, r) = caps_multiply(&mut machine, &a, &b, schedule, alg, cutoff).unwrap();
    let want = a.classical_mul(&b).unwrap();
    let err = c.max_abs_diff(&want) / (n as f64 * a.max_abs() * b.max_abs());
    (c, r, err)
}

/// `12n²/4^k − 12n²/P` in integers.
fn bw_um_int(n: u64, p: u64, k: u32) -> u64 {
    12 * n * n / 4u64.pow(k) - 12 * n * n / p
}

#[test]
fn um_ledgers_are_exact() {
    let sw = make_strassen_winograd();
    for (p, k) in [(7u64, 1u32), (49, 2)] {
        for n in [56u64, 112, 224] {
            let sched = Schedule::all_bfs(k);
            let (_, r, err) = simulate(&sw, n as usize, p as usize, None, &sched, 8);
            assert!(err <= 1e-10);
            assert_eq!(r.words_critical, bw_um_int(n, p, k), "n={n} P={p}");
            assert_eq!(r.messages_critical, 36 * k as u64);
            assert_eq!(r.peak_memory_words, 7 * n * n / 4u64.pow(k) - 4 * n * n / p);
            let model = caps_cost(n as f64, p as f64, None, CapsVariant::Um).unwrap();
            assert_eq!(model.bandwidth_words, r.words_critical as f64);
            assert_eq!(model.latency_messages, r.messages_critical as f64);
            assert_eq!(mem_um(n as f64, p as f64), r.peak_memory_words as f64);
        }
    }
}

#[test]
fn lm_ledgers_are_exact() {
    let sw = make_strassen_winograd();
    for ell in [1u32, 2] {
        for n in [56usize, 112] {
            let sched = Schedule::dfs_then_bfs(ell, 1);
            let (_, r, err) = simulate(&sw, n, 7, None, &sched, 7);
            assert!(err <= 1e-10);
            let sub = (n >> ell) as u64;
            assert_eq!(r.words_critical, 7u64.pow(ell) * bw_um_int(sub, 7, 1));
            assert_eq!(r.messages_critical, 7u64.pow(ell) * 36);
            assert_eq!(
                r.words_critical as f64,
                7f64.powi(ell as i32) * bw_um(sub as f64, 7.0)
            );
            assert_eq!(r.messages_critical as f64, 7f64.powi(ell as i32) * l_um(7.0));
        }
    }
}

#[test]
fn flops_follow_the_telescoped_count() {
    let sw = make_strassen_winograd();
    // Local size 8 at every leaf: F = (1280/343·n^{ω0} − 5n²)/P.
    for (n, p, sched) in [(56usize, 7usize, "B"), (112, 7, "DB"), (112, 49, "BB")] {
        let s: Schedule = sched.parse().unwrap();
        let leaf = n >> s.len();
        let (_, r, _) = simulate(&sw, n, p, None, &s, leaf);
        let ledger = caps_schedule_ledger(&sw, n, p, &s, leaf).unwrap();
        assert_eq!(r.flops_critical, ledger.flops);
        if leaf.is_multiple_of(8) && (leaf / 8).is_power_of_two() {
            let t = (n / 8).trailing_zeros();
            let f = 1280 * 7u64.pow(t) - 5 * (n * n) as u64;
            assert_eq!(r.flops_critical * p as u64, f);
        }
    }
    let (_, r, _) = simulate(&sw, 56, 7, None, &"B".parse().unwrap(), 28);
    assert_eq!(r.flops_critical, 44800);
}

#[test]
fn interleavings_agree_on_flops_and_product() {
    let sw = make_strassen_winograd();
    for (n, p, base) in [(112usize, 7usize, "DDB"), (112, 49, "DBB")] {
        let schedule: Schedule = base.parse().unwrap();
        let mut first: Option<(Matrix, CostReport)> = None;
        for s in schedule.interleavings() {
            let (c, r, err) = simulate(&sw, n, p, None, &s, 7);
            assert!(err <= 1e-10);
            let predicted = caps_schedule_ledger(&sw, n, p, &s, 7).unwrap();
            assert_eq!(
                (r.flops_critical, r.words_critical, r.messages_critical, r.peak_memory_words),
                (predicted.flops, predicted.words, predicted.messages, predicted.peak_memory),
                "{s}"
            );
            if let Some((c0, r0)) = &first {
                assert!(c.bit_eq(c0), "{s}");
                assert_eq!(r.flops_critical, r0.flops_critical);
            } else {
                first = Some((c, r));
            }
        }
    }
}

#[test]
fn cost_model_matches_simulator_over_memory_sweep() {
    let sw = make_strassen_winograd();
    for (n, p) in [(112usize, 7usize), (224, 7), (112, 49), (224, 49)] {
        let lo = (9 * n * n).div_ceil(p) as u64;
        // At P = 7 the UM peak is already below 9n²/P.
        let hi = (mem_um(n as f64, p as f64) as u64).max(lo) + 10;
        for i in 0..6u64 {
            let m = lo + (hi - lo) * i / 5;
            let schedule = auto_schedule(n, p, Some(m)).unwrap();
            let s = n >> schedule.len();
            if Layout::new(n, p, schedule.len() as u32).is_err() || s == 0 {
                continue;
            }
            let (_, r, err) = simulate(&sw, n, p, Some(m), &schedule, s.max(1));
            assert!(err <= 1e-10);
            let model = caps_cost(n as f64, p as f64, Some(m as f64), CapsVariant::Auto).unwrap();
            assert_eq!(model.bandwidth_words, r.words_critical as f64, "n={n} P={p} M={m}");
            assert_eq!(model.latency_messages, r.messages_critical as f64);
            assert!(r.peak_memory_words <= m);
        }
    }
}

#[test]
fn lm_peak_is_within_bound() {
    // Peak of DFS^ell BFS^k with ell from compute_ell stays below 127/144 of M
    // wherever ell ≥ 1.
    for (n, p) in [(224usize, 7usize), (448, 7), (448, 49), (896, 49), (3136, 343)] {
        let k = capsim::layout::log7_exact(p).unwrap();
        let lo = (9 * n * n).div_ceil(p) as u64;
        let hi = (16 * n * n / 4usize.pow(k)) as u64 - 1;
        for i in 0..=20u64 {
            let m = lo + (hi - lo) * i / 20;
            let ell = compute_ell(n, p, m).unwrap();
            assert!(ell >= 1);
            let s = Schedule::dfs_then_bfs(ell, k);
            let peak = validate_schedule(&s, n, p, None).unwrap();
            assert!(144 * peak <= 127 * m, "n={n} P={p} M={m} peak={peak}");
        }
    }
}

#[test]
fn bfs_partners_differ_in_one_digit() {
    let sw = make_strassen_winograd();
    let (a, b) = inputs(112, 3);
    for sched in ["BB", "DBB", "BDB"] {
        let mut m = SimMachine::new(MachineParams::unit(49)).unwrap();
        let s: Schedule = sched.parse().unwrap();
        caps_multiply(&mut m, &a, &b, &s, &sw, 7).unwrap();
        let log = m.message_log();
        assert!(!log.is_empty());
        // Every message of a phase joins ranks that differ in exactly one
        // base-7 digit, the same digit for the whole phase. The first
        // exchange uses digit 0 and every digit below k is used.
        let mut digit_of_phase = std::collections::BTreeMap::new();
        for rec in log {
            let differing: Vec<u32> = (0..s.k())
                .filter(|&d| rec.from / 7usize.pow(d) % 7 != rec.to / 7usize.pow(d) % 7)
                .collect();
            assert_eq!(differing.len(), 1, "{sched}: {} -> {}", rec.from, rec.to);
            let d = *digit_of_phase.entry(rec.phase).or_insert(differing[0]);
            assert_eq!(d, differing[0], "{sched}: phase {}", rec.phase);
        }
        assert_eq!(digit_of_phase.values().next(), Some(&0));
        let used: std::collections::BTreeSet<u32> = digit_of_phase.values().copied().collect();
        assert_eq!(used.len(), s.k() as usize);
    }
}
