//! Baselines on the simulated machine: Cannon's algorithm, Cannon with a fast
//! local multiply, and Strassen steps on top of Cannon.
//!
//! Processors form a `g × g` grid with `g = √P`; rank `r·g + c` sits at row
//! `r`, column `c`. Every message charges both endpoints, so one Cannon round
//! (one block of `A` and one of `B` moving) costs a processor 4 messages.

use crate::bilinear::{recursive_multiply_counted, BilinearAlgorithm};
use crate::error::BaselineError;
use crate::matrix::{classical_mul_acc, Matrix};
use crate::simnet::{CostReport, PhaseKind, SimMachine};

/// `Some(g)` if `p = g²`.
pub fn exact_sqrt(p: usize) -> Option<usize> {
    let g = (p as f64).sqrt().round() as usize;
    (g * g == p).then_some(g)
}

#[derive(Clone, Copy)]
enum Kernel<'a> {
    Classical,
    Fast(&'a BilinearAlgorithm, usize),
}

fn check_inputs(a: &Matrix, b: &Matrix) -> Result<usize, BaselineError> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(BaselineError::Shape {
            a: (a.rows(), a.cols()),
            b: (b.rows(), b.cols()),
        });
    }
    Ok(a.rows())
}

fn grid_of(machine: &SimMachine, n: usize, ell: u32) -> Result<usize, BaselineError> {
    let p = machine.p();
    let g = exact_sqrt(p).ok_or(BaselineError::NotPerfectSquare(p))?;
    let required = g << ell;
    if n == 0 || !n.is_multiple_of(required) {
        return Err(BaselineError::Indivisible {
            n,
            required,
            nearest: n.div_ceil(required).max(1) * required,
        });
    }
    Ok(g)
}

/// Per-processor packed locals: the matrix is cut into `2^ell × 2^ell`
/// submatrices, each block-distributed on the grid; local block `(u, v)` of
/// rank `r·g + c` is block `(r, c)` of submatrix `(u, v)`.
fn pack(m: &Matrix, g: usize, ell: u32) -> Vec<Matrix> {
    let subs = 1usize << ell;
    let sub = m.rows() / subs;
    let bs = sub / g;
    (0..g * g)
        .map(|rank| {
            let (r, c) = (rank / g, rank % g);
            let mut local = Matrix::zeros(subs * bs, subs * bs);
            for u in 0..subs {
                for v in 0..subs {
                    let blk = m.submatrix(u * sub + r * bs, v * sub + c * bs, bs, bs);
                    local.set_submatrix(u * bs, v * bs, &blk);
                }
            }
            local
        })
        .collect()
}

fn unpack(locals: &[Matrix], n: usize, g: usize, ell: u32) -> Matrix {
    let subs = 1usize << ell;
    let sub = n / subs;
    let bs = sub / g;
    let mut out = Matrix::zeros(n, n);
    for (rank, local) in locals.iter().enumerate() {
        let (r, c) = (rank / g, rank % g);
        for u in 0..subs {
            for v in 0..subs {
                let blk = local.submatrix(u * bs, v * bs, bs, bs);
                out.set_submatrix(u * sub + r * bs, v * sub + c * bs, &blk);
            }
        }
    }
    out
}

/// Moves block `(r, c)` to `dest(r, c)` for both operands in one phase.
fn shift(
    machine: &mut SimMachine,
    g: usize,
    a: &mut Vec<Matrix>,
    b: &mut Vec<Matrix>,
    dest_a: impl Fn(usize, usize) -> (usize, usize),
    dest_b: impl Fn(usize, usize) -> (usize, usize),
) -> Result<(), BaselineError> {
    let words = a[0].len() as u64;
    machine.begin_phase(PhaseKind::Communicate)?;
    let mut na = vec![Matrix::default(); g * g];
    let mut nb = vec![Matrix::default(); g * g];
    for rank in 0..g * g {
        let (r, c) = (rank / g, rank % g);
        let (ar, ac) = dest_a(r, c);
        let (br, bc) = dest_b(r, c);
        let (ta, tb) = (ar * g + ac, br * g + bc);
        if ta != rank {
            machine.send(rank, ta, words)?;
        }
        if tb != rank {
            machine.send(rank, tb, words)?;
        }
        na[ta] = std::mem::take(&mut a[rank]);
        nb[tb] = std::mem::take(&mut b[rank]);
    }
    machine.end_phase()?;
    *a = na;
    *b = nb;
    Ok(())
}

/// Cannon on per-processor blocks: a skew, then `g` multiply rounds separated
/// by `g − 1` single-step shifts.
fn cannon_blocks(
    machine: &mut SimMachine,
    g: usize,
    mut a: Vec<Matrix>,
    mut b: Vec<Matrix>,
    kernel: Kernel,
) -> Result<Vec<Matrix>, BaselineError> {
    let bs = a[0].rows();
    shift(
        machine,
        g,
        &mut a,
        &mut b,
        |r, c| (r, (c + g - r) % g),
        |r, c| ((r + g - c) % g, c),
    )?;
    let mut acc: Vec<Matrix> = vec![Matrix::zeros(bs, bs); g * g];
    for round in 0..g {
        machine.begin_phase(PhaseKind::Compute)?;
        for rank in 0..g * g {
            let flops = match kernel {
                Kernel::Classical => {
                    classical_mul_acc(&a[rank], &b[rank], &mut acc[rank]);
                    let b3 = 2 * (bs as u64).pow(3);
                    if round == 0 {
                        b3 - (bs as u64).pow(2)
                    } else {
                        b3
                    }
                }
                Kernel::Fast(alg, cutoff) => {
                    let (prod, f) = recursive_multiply_counted(alg, &a[rank], &b[rank], cutoff)?;
                    if round == 0 {
                        acc[rank] = prod;
                        f
                    } else {
                        for (x, y) in acc[rank].as_mut_slice().iter_mut().zip(prod.as_slice()) {
                            *x += y;
                        }
                        f + (bs as u64).pow(2)
                    }
                }
            };
            machine.add_flops(rank, flops)?;
        }
        machine.end_phase()?;
        if round + 1 < g {
            shift(
                machine,
                g,
                &mut a,
                &mut b,
                |r, c| (r, (c + g - 1) % g),
                |r, c| ((r + g - 1) % g, c),
            )?;
        }
    }
    Ok(acc)
}

fn run_grid(
    machine: &mut SimMachine,
    a: &Matrix,
    b: &Matrix,
    ell: u32,
    alg: Option<&BilinearAlgorithm>,
    kernel: Kernel,
) -> Result<(Matrix, CostReport), BaselineError> {
    let n = check_inputs(a, b)?;
    let g = grid_of(machine, n, ell)?;
    let la = pack(a, g, ell);
    let lb = pack(b, g, ell);
    let shard_words = 3 * la[0].len() as u64;
    for q in 0..g * g {
        machine.alloc(q, shard_words)?;
    }
    let lc = dfs_levels(machine, g, la, lb, ell, alg, kernel)?;
    for q in 0..g * g {
        machine.free(q, shard_words)?;
    }
    Ok((unpack(&lc, n, g, ell), machine.report()?))
}

/// `ell` communication-free Strassen levels over the grid, then Cannon on each leaf.
fn dfs_levels(
    machine: &mut SimMachine,
    g: usize,
    a: Vec<Matrix>,
    b: Vec<Matrix>,
    ell: u32,
    alg: Option<&BilinearAlgorithm>,
    kernel: Kernel,
) -> Result<Vec<Matrix>, BaselineError> {
    let Some(alg) = alg.filter(|_| ell > 0) else {
        return cannon_blocks(machine, g, a, b, kernel);
    };
    let p = g * g;
    let quad = (a[0].len() / 4) as u64;
    for q in 0..p {
        machine.alloc(q, 3 * quad)?;
    }
    machine.begin_phase(PhaseKind::Compute)?;
    let mut t = Vec::with_capacity(p);
    let mut s = Vec::with_capacity(p);
    for q in 0..p {
        let mut flops = 0;
        t.push(alg.a_program().eval_all(a[q].split_blocks(2), &mut flops));
        s.push(alg.b_program().eval_all(b[q].split_blocks(2), &mut flops));
        machine.add_flops(q, flops)?;
    }
    machine.end_phase()?;
    let mut products: Vec<Vec<Matrix>> = vec![Vec::with_capacity(alg.q()); p];
    for i in 0..alg.q() {
        let ti: Vec<Matrix> = t.iter_mut().map(|tq| std::mem::take(&mut tq[i])).collect();
        let si: Vec<Matrix> = s.iter_mut().map(|sq| std::mem::take(&mut sq[i])).collect();
        let qi = dfs_levels(machine, g, ti, si, ell - 1, Some(alg), kernel)?;
        for (q, m) in qi.into_iter().enumerate() {
            products[q].push(m);
        }
    }
    machine.begin_phase(PhaseKind::Compute)?;
    let mut out = Vec::with_capacity(p);
    for (q, qs) in products.into_iter().enumerate() {
        let mut flops = 0;
        let blocks = alg.c_program().eval_all(qs, &mut flops);
        machine.add_flops(q, flops)?;
        out.push(Matrix::join_blocks(&blocks, 2));
    }
    machine.end_phase()?;
    for q in 0..p {
        machine.free(q, 3 * quad)?;
    }
    Ok(out)
}

/// Classical 2D multiplication with Cannon's algorithm.
pub fn cannon_multiply(
    machine: &mut SimMachine,
    a: &Matrix,
    b: &Matrix,
) -> Result<(Matrix, CostReport), BaselineError> {
    run_grid(machine, a, b, 0, None, Kernel::Classical)
}

/// Cannon's communication with `alg` as the local multiply.
pub fn two_d_strassen(
    machine: &mut SimMachine,
    a: &Matrix,
    b: &Matrix,
    alg: &BilinearAlgorithm,
    cutoff: usize,
) -> Result<(Matrix, CostReport), BaselineError> {
    if cutoff == 0 {
        return Err(crate::error::BilinearError::ZeroCutoff.into());
    }
    run_grid(machine, a, b, 0, None, Kernel::Fast(alg, cutoff))
}

/// `ell` Strassen steps taken on all processors without communication, then
/// Cannon on each of the `7^ell` subproblems.
pub fn strassen_two_d(
    machine: &mut SimMachine,
    a: &Matrix,
    b: &Matrix,
    ell: u32,
    alg: &BilinearAlgorithm,
) -> Result<(Matrix, CostReport), BaselineError> {
    if !alg.is_strassen_like() {
        return Err(BaselineError::UnsupportedAlgorithm {
            n0: alg.n0(),
            q: alg.q(),
        });
    }
    run_grid(machine, a, b, ell, Some(alg), Kernel::Classical)
}

/// Exact ledgers of the baselines, computed from their closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineLedger {
    pub flops: u64,
    pub words: u64,
    pub messages: u64,
    pub peak_memory: u64,
}

/// Cannon: `4√P` messages and `4√P·n²/P` words per processor,
/// `(2n³ − n²)/P` flops, `3n²/P` memory.
pub fn cannon_ledger(n: u64, p: u64) -> Option<BaselineLedger> {
    let g = exact_sqrt(p as usize)? as u64;
    if !n.is_multiple_of(g) {
        return None;
    }
    let b = n / g;
    let comm = if g > 1 { 4 * g } else { 0 };
    Some(BaselineLedger {
        flops: g * 2 * b * b * b - b * b,
        words: comm * b * b,
        messages: comm,
        peak_memory: 3 * b * b,
    })
}

/// Cannon's communication plus `√P` local fast multiplies and `√P − 1` block additions.
pub fn two_d_strassen_ledger(
    alg: &BilinearAlgorithm,
    n: u64,
    p: u64,
    cutoff: usize,
) -> Option<BaselineLedger> {
    let base = cannon_ledger(n, p)?;
    let g = exact_sqrt(p as usize)? as u64;
    let b = n / g;
    let local = crate::bilinear::flop_count(alg, b as usize, cutoff).ok()?;
    Some(BaselineLedger {
        flops: g * local + (g - 1) * b * b,
        ..base
    })
}

/// `7^ell` Cannons at size `n/2^ell`, plus the additions of the top `ell` levels.
pub fn strassen_two_d_ledger(alg: &BilinearAlgorithm, n: u64, p: u64, ell: u32) -> Option<BaselineLedger> {
    let g = exact_sqrt(p as usize)? as u64;
    if !n.is_multiple_of(g << ell) {
        return None;
    }
    let leaf = cannon_ledger(n >> ell, p)?;
    let sevens = 7u64.pow(ell);
    let mut adds = 0;
    let mut peak = 3 * n * n / p;
    for i in 0..ell {
        let half = n >> (i + 1);
        adds += 7u64.pow(i) * alg.add_count() * half * half / p;
        peak += 3 * half * half / p;
    }
    Some(BaselineLedger {
        flops: sevens * leaf.flops + adds,
        words: sevens * leaf.words,
        messages: sevens * leaf.messages,
        peak_memory: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::{make_strassen_winograd, recursive_multiply};
    use crate::simnet::MachineParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inputs(n: usize) -> (Matrix, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        (
            Matrix::random_uniform(n, n, &mut rng),
            Matrix::random_uniform(n, n, &mut rng),
        )
    }

    fn machine(p: usize) -> SimMachine {
        SimMachine::new(MachineParams::unit(p)).unwrap()
    }

    #[test]
    fn cannon_small() {
        let (a, b) = inputs(4);
        let (c, r) = cannon_multiply(&mut machine(4), &a, &b).unwrap();
        assert_eq!((r.words_critical, r.messages_critical), (32, 8));
        assert!(c.max_abs_diff(&a.classical_mul(&b).unwrap()) < 1e-14);
        let l = cannon_ledger(4, 4).unwrap();
        assert_eq!((l.words, l.messages, l.flops), (32, 8, r.flops_critical));
        assert_eq!(r.peak_memory_words, l.peak_memory);
    }

    #[test]
    fn cannon_one_processor() {
        let (a, b) = inputs(6);
        let (c, r) = cannon_multiply(&mut machine(1), &a, &b).unwrap();
        assert_eq!(r.words_critical + r.messages_critical, 0);
        assert_eq!(r.flops_critical, 2 * 216 - 36);
        assert!(c.bit_eq(&a.classical_mul(&b).unwrap()));
    }

    #[test]
    fn cannon_32_16() {
        let (a, b) = inputs(32);
        let (c, r) = cannon_multiply(&mut machine(16), &a, &b).unwrap();
        let tol = 1e-12 * 32.0 * a.max_abs() * b.max_abs();
        assert!(c.max_abs_diff(&a.classical_mul(&b).unwrap()) <= tol);
        let l = cannon_ledger(32, 16).unwrap();
        assert_eq!(
            (r.flops_critical, r.words_critical, r.messages_critical),
            (l.flops, l.words, l.messages)
        );
    }

    #[test]
    fn cannon_errors() {
        let (a, b) = inputs(6);
        assert!(matches!(
            cannon_multiply(&mut machine(7), &a, &b),
            Err(BaselineError::NotPerfectSquare(7))
        ));
        assert!(matches!(
            cannon_multiply(&mut machine(16), &a, &b),
            Err(BaselineError::Indivisible { nearest: 8, .. })
        ));
    }

    #[test]
    fn two_d_strassen_56_4() {
        let sw = make_strassen_winograd();
        let (a, b) = inputs(56);
        let (c, r) = two_d_strassen(&mut machine(4), &a, &b, &sw, 7).unwrap();
        assert_eq!(r.words_critical, 2 * 3136);
        let l = two_d_strassen_ledger(&sw, 56, 4, 7).unwrap();
        assert_eq!(r.flops_critical, l.flops);
        assert!(c.max_abs_diff(&a.classical_mul(&b).unwrap()) < 1e-10 * 56.0);
    }

    #[test]
    fn two_d_strassen_one_processor() {
        let sw = make_strassen_winograd();
        let (a, b) = inputs(32);
        let (c, _) = two_d_strassen(&mut machine(1), &a, &b, &sw, 4).unwrap();
        assert!(c.bit_eq(&recursive_multiply(&sw, &a, &b, 4).unwrap()));
    }

    #[test]
    fn strassen_two_d_ledgers() {
        let sw = make_strassen_winograd();
        let (a, b) = inputs(8);
        let (_, r0) = strassen_two_d(&mut machine(4), &a, &b, 0, &sw).unwrap();
        let (_, rc) = cannon_multiply(&mut machine(4), &a, &b).unwrap();
        assert_eq!(r0, rc);
        let (c1, r1) = strassen_two_d(&mut machine(4), &a, &b, 1, &sw).unwrap();
        assert_eq!(r1.words_critical * 4, r0.words_critical * 7);
        assert_eq!(r1.words_critical, 7 * 4 * 2 * 4);
        let l1 = strassen_two_d_ledger(&sw, 8, 4, 1).unwrap();
        assert_eq!(
            (r1.flops_critical, r1.words_critical, r1.messages_critical, r1.peak_memory_words),
            (l1.flops, l1.words, l1.messages, l1.peak_memory)
        );
        assert!(c1.max_abs_diff(&a.classical_mul(&b).unwrap()) < 1e-12);
        let (a, b) = inputs(16);
        let (_, r2) = strassen_two_d(&mut machine(4), &a, &b, 2, &sw).unwrap();
        assert_eq!(r2.messages_critical, 49 * 4 * 2);
    }
}
