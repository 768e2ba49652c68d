//! SPMD execution of a schedule on the simulated machine.
//!
//! After `j` BFS steps processor `q` belongs to subproblem group `q mod 7^j`
//! and has sub-rank `q / 7^j`. All groups run the same step at the same time,
//! so every phase spans the whole machine. Data is carried as one packed local
//! matrix per processor, indexed by global rank.

use super::{validate_schedule, Schedule, Step};
use crate::bilinear::{recursive_multiply_counted, BilinearAlgorithm, ProgramEval};
use crate::error::CapsError;
use crate::layout::Layout;
use crate::matrix::Matrix;
use crate::simnet::{CostReport, PhaseKind, SimMachine};

/// Multiplies `a · b` with CAPS under `schedule`, charging all work to
/// `machine`. The local base case uses `alg` recursively down to `cutoff`.
pub fn caps_multiply(
    machine: &mut SimMachine,
    a: &Matrix,
    b: &Matrix,
    schedule: &Schedule,
    alg: &BilinearAlgorithm,
    cutoff: usize,
) -> Result<(Matrix, CostReport), CapsError> {
    if !alg.is_strassen_like() {
        return Err(CapsError::UnsupportedAlgorithm {
            n0: alg.n0(),
            q: alg.q(),
        });
    }
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(CapsError::Shape {
            a: (a.rows(), a.cols()),
            b: (b.rows(), b.cols()),
        });
    }
    if cutoff == 0 {
        return Err(crate::error::BilinearError::ZeroCutoff.into());
    }
    let (n, p) = (a.rows(), machine.p());
    validate_schedule(schedule, n, p, machine.params().m)?;
    let layout = Layout::new(n, p, schedule.len() as u32)?;
    let la = layout.pack(a)?;
    let lb = layout.pack(b)?;
    let shard_words = 3 * layout.words_per_processor() as u64;
    for q in 0..p {
        machine.alloc(q, shard_words)?;
    }
    let mut run = Run {
        machine,
        alg,
        cutoff,
    };
    let lc = run.step(layout, 0, la, lb, schedule.steps())?;
    for q in 0..p {
        run.machine.free(q, shard_words)?;
    }
    let c = layout.unpack(&lc)?;
    Ok((c, run.machine.report()?))
}

struct Run<'m, 'a> {
    machine: &'m mut SimMachine,
    alg: &'a BilinearAlgorithm,
    cutoff: usize,
}

impl Run<'_, '_> {
    fn step(
        &mut self,
        layout: Layout,
        bfs_done: u32,
        a: Vec<Matrix>,
        b: Vec<Matrix>,
        steps: &[Step],
    ) -> Result<Vec<Matrix>, CapsError> {
        match steps.first() {
            None => self.local(a, b),
            Some(Step::Bfs) => self.bfs(layout, bfs_done, a, b, &steps[1..]),
            Some(Step::Dfs) => self.dfs(layout, bfs_done, a, b, &steps[1..]),
        }
    }

    fn local(&mut self, a: Vec<Matrix>, b: Vec<Matrix>) -> Result<Vec<Matrix>, CapsError> {
        self.machine.begin_phase(PhaseKind::Compute)?;
        let mut out = Vec::with_capacity(a.len());
        for (q, (aq, bq)) in a.iter().zip(&b).enumerate() {
            let (c, flops) = recursive_multiply_counted(self.alg, aq, bq, self.cutoff)?;
            self.machine.add_flops(q, flops)?;
            out.push(c);
        }
        self.machine.end_phase()?;
        Ok(out)
    }

    /// Exchange groups of the BFS step after `bfs_done` earlier ones: the
    /// seven ranks that differ only in base-7 digit `bfs_done`.
    fn groups(&self, bfs_done: u32) -> Vec<[usize; 7]> {
        let stride = 7usize.pow(bfs_done);
        (0..self.machine.p())
            .filter(|q| (q / stride).is_multiple_of(7))
            .map(|q| std::array::from_fn(|d| q + d * stride))
            .collect()
    }

    fn all_to_all(&mut self, groups: &[[usize; 7]], words: u64) -> Result<(), CapsError> {
        let payload = vec![vec![words; 7]; 7];
        self.machine.begin_phase(PhaseKind::Communicate)?;
        for g in groups {
            self.machine.exchange(g, &payload)?;
        }
        self.machine.end_phase()?;
        Ok(())
    }

    fn bfs(
        &mut self,
        layout: Layout,
        bfs_done: u32,
        a: Vec<Matrix>,
        b: Vec<Matrix>,
        rest: &[Step],
    ) -> Result<Vec<Matrix>, CapsError> {
        let p = self.machine.p();
        let quad = (a[0].len() / 4) as u64;
        for q in 0..p {
            self.machine.alloc(q, 21 * quad)?;
        }

        self.machine.begin_phase(PhaseKind::Compute)?;
        let mut t = Vec::with_capacity(p);
        let mut s = Vec::with_capacity(p);
        for q in 0..p {
            let mut flops = 0;
            t.push(self.alg.a_program().eval_all(a[q].split_blocks(2), &mut flops));
            s.push(self.alg.b_program().eval_all(b[q].split_blocks(2), &mut flops));
            self.machine.add_flops(q, flops)?;
        }
        self.machine.end_phase()?;
        drop((a, b));

        let groups = self.groups(bfs_done);
        let merge = |parts: &mut [Vec<Matrix>], g: &[usize; 7], i: usize| {
            let pieces: Vec<Matrix> = g
                .iter()
                .map(|&member| std::mem::take(&mut parts[member][i]))
                .collect();
            layout.bfs_merge(&pieces)
        };
        self.all_to_all(&groups, quad)?;
        let mut child_a = vec![Matrix::zeros(0, 0); p];
        for g in &groups {
            for i in 0..7 {
                child_a[g[i]] = merge(&mut t, g, i);
            }
        }
        self.all_to_all(&groups, quad)?;
        let mut child_b = vec![Matrix::zeros(0, 0); p];
        for g in &groups {
            for i in 0..7 {
                child_b[g[i]] = merge(&mut s, g, i);
            }
        }
        drop((t, s));

        let child_c = self.step(layout.bfs_child()?, bfs_done + 1, child_a, child_b, rest)?;

        self.all_to_all(&groups, quad)?;
        let mut products: Vec<Vec<Matrix>> = vec![vec![Matrix::zeros(0, 0); 7]; p];
        for g in &groups {
            for i in 0..7 {
                for (d, piece) in layout.bfs_split(&child_c[g[i]]).into_iter().enumerate() {
                    products[g[d]][i] = piece;
                }
            }
        }
        drop(child_c);

        self.machine.begin_phase(PhaseKind::Compute)?;
        let mut out = Vec::with_capacity(p);
        for (q, qs) in products.into_iter().enumerate() {
            let mut flops = 0;
            let blocks = self.alg.c_program().eval_all(qs, &mut flops);
            self.machine.add_flops(q, flops)?;
            out.push(Matrix::join_blocks(&blocks, 2));
        }
        self.machine.end_phase()?;
        for q in 0..p {
            self.machine.free(q, 21 * quad)?;
        }
        Ok(out)
    }

    fn dfs(
        &mut self,
        layout: Layout,
        bfs_done: u32,
        a: Vec<Matrix>,
        b: Vec<Matrix>,
        rest: &[Step],
    ) -> Result<Vec<Matrix>, CapsError> {
        let p = self.machine.p();
        let quad = (a[0].len() / 4) as u64;
        for q in 0..p {
            self.machine.alloc(q, 3 * quad)?;
        }
        let alg = self.alg;
        let mut ev_a: Vec<ProgramEval> = Vec::with_capacity(p);
        let mut ev_b: Vec<ProgramEval> = Vec::with_capacity(p);
        let mut ev_c: Vec<ProgramEval> = Vec::with_capacity(p);
        for q in 0..p {
            let mut ea = ProgramEval::new(alg.a_program());
            let mut eb = ProgramEval::new(alg.b_program());
            for (x, blk) in a[q].split_blocks(2).into_iter().enumerate() {
                ea.set_input(x, blk);
            }
            for (x, blk) in b[q].split_blocks(2).into_iter().enumerate() {
                eb.set_input(x, blk);
            }
            ev_a.push(ea);
            ev_b.push(eb);
            ev_c.push(ProgramEval::new(alg.c_program()));
        }
        drop((a, b));
        let mut blocks: Vec<Vec<Option<Matrix>>> = vec![vec![None; 4]; p];
        let mut scratch = vec![0u64; p];
        let child = layout.dfs_child()?;

        for i in 0..alg.q() {
            self.machine.begin_phase(PhaseKind::Compute)?;
            let mut ta = Vec::with_capacity(p);
            let mut sb = Vec::with_capacity(p);
            for q in 0..p {
                let before = ev_a[q].flops() + ev_b[q].flops();
                ta.push(ev_a[q].demand(i));
                sb.push(ev_b[q].demand(i));
                let after = ev_a[q].flops() + ev_b[q].flops();
                self.machine.add_flops(q, after - before)?;
            }
            self.machine.end_phase()?;
            self.track_scratch(&mut scratch, &ev_a, &ev_b, &ev_c)?;

            let prod = self.step(child, bfs_done, ta, sb, rest)?;

            self.machine.begin_phase(PhaseKind::Compute)?;
            for (q, pq) in prod.into_iter().enumerate() {
                let before = ev_c[q].flops();
                ev_c[q].set_input(i, pq);
                ev_c[q].run_ready();
                for (o, slot) in blocks[q].iter_mut().enumerate() {
                    if slot.is_none() {
                        *slot = ev_c[q].take_output(o);
                    }
                }
                self.machine.add_flops(q, ev_c[q].flops() - before)?;
            }
            self.machine.end_phase()?;
            self.track_scratch(&mut scratch, &ev_a, &ev_b, &ev_c)?;
        }

        let mut out = Vec::with_capacity(p);
        for (q, blk) in blocks.into_iter().enumerate() {
            let blk: Vec<Matrix> = blk
                .into_iter()
                .map(|m| m.expect("every output block is produced after the last product"))
                .collect();
            out.push(Matrix::join_blocks(&blk, 2));
            self.machine.scratch_free(q, scratch[q])?;
            self.machine.free(q, 3 * quad)?;
        }
        Ok(out)
    }

    /// Charges intermediate values still held by the evaluators to the scratch ledger.
    fn track_scratch(
        &mut self,
        current: &mut [u64],
        ev_a: &[ProgramEval],
        ev_b: &[ProgramEval],
        ev_c: &[ProgramEval],
    ) -> Result<(), CapsError> {
        for q in 0..current.len() {
            let now = ev_a[q].retained_value_words()
                + ev_b[q].retained_value_words()
                + ev_c[q].retained_value_words()
                + ev_c[q].retained_input_words();
            if now > current[q] {
                self.machine.scratch_alloc(q, now - current[q])?;
            } else {
                self.machine.scratch_free(q, current[q] - now)?;
            }
            current[q] = now;
        }
        Ok(())
    }
}
