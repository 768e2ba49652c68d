//! The `(n, P, s)` block-cyclic layout.
//!
//! Processors form a `7^⌊k/2⌋ × 7^⌈k/2⌉` grid (`k = log7 P`). The matrix is cut
//! into a `2^s × 2^s` grid of submatrices of size `n/2^s`, and every submatrix
//! is cut into a `grid_rows × grid_cols` grid of blocks with one block per
//! processor. All submatrices share the same owner pattern, so the four
//! quadrants of any level are aligned and their linear combinations are local.
//!
//! Rank digits: a rank is written with `k` base-7 digits `d0` (lowest) to
//! `d(k-1)`. Digit `j` is a grid-row digit iff `k − j` is even, otherwise a
//! grid-column digit; within each axis the digits are consumed low-first. For
//! `k ≤ 2` this puts the row digit in the lowest position. The lowest digit is
//! always the one merged by the next BFS step.
//!
//! Processor `p` stores its blocks packed in a local `(n/grid_rows) ×
//! (n/grid_cols)` matrix: local block `(u, v)` holds `p`'s block of submatrix
//! `(u, v)`. Global quadrants map to local quadrants.

use serde::{Deserialize, Serialize};

use crate::error::LayoutError;
use crate::matrix::Matrix;

/// Returns `log7 p` if `p` is a power of 7.
pub fn log7_exact(p: usize) -> Option<u32> {
    if p == 0 {
        return None;
    }
    let mut k = 0;
    let mut x = p;
    while x.is_multiple_of(7) {
        x /= 7;
        k += 1;
    }
    (x == 1).then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawLayout", into = "RawLayout")]
pub struct Layout {
    n: usize,
    p: usize,
    s: u32,
    k: u32,
}

#[derive(Serialize, Deserialize)]
struct RawLayout {
    n: usize,
    #[serde(rename = "P")]
    p: usize,
    s: u32,
}

impl TryFrom<RawLayout> for Layout {
    type Error = LayoutError;
    fn try_from(raw: RawLayout) -> Result<Self, Self::Error> {
        Layout::new(raw.n, raw.p, raw.s)
    }
}

impl From<Layout> for RawLayout {
    fn from(l: Layout) -> Self {
        RawLayout {
            n: l.n,
            p: l.p,
            s: l.s,
        }
    }
}

impl Layout {
    pub fn new(n: usize, p: usize, s: u32) -> Result<Self, LayoutError> {
        let k = log7_exact(p).ok_or(LayoutError::NotPowerOfSeven(p))?;
        let required = Self::required_multiple(p, s)?;
        if n == 0 || !n.is_multiple_of(required) {
            return Err(LayoutError::Indivisible {
                n,
                required,
                nearest: n.div_ceil(required).max(1) * required,
            });
        }
        Ok(Self { n, p, s, k })
    }

    /// `2^s · 7^⌈k/2⌉`, the granularity `n` must be a multiple of.
    pub fn required_multiple(p: usize, s: u32) -> Result<usize, LayoutError> {
        let k = log7_exact(p).ok_or(LayoutError::NotPowerOfSeven(p))?;
        Ok((1usize << s) * 7usize.pow(k.div_ceil(2)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn grid_rows(&self) -> usize {
        7usize.pow(self.k / 2)
    }

    pub fn grid_cols(&self) -> usize {
        7usize.pow(self.k.div_ceil(2))
    }

    pub fn submatrix_size(&self) -> usize {
        self.n >> self.s
    }

    pub fn block_rows(&self) -> usize {
        self.submatrix_size() / self.grid_rows()
    }

    pub fn block_cols(&self) -> usize {
        self.submatrix_size() / self.grid_cols()
    }

    pub fn local_rows(&self) -> usize {
        self.n / self.grid_rows()
    }

    pub fn local_cols(&self) -> usize {
        self.n / self.grid_cols()
    }

    /// Words of one matrix held by each processor.
    pub fn words_per_processor(&self) -> usize {
        self.local_rows() * self.local_cols()
    }

    fn is_row_digit(&self, j: u32) -> bool {
        (self.k - j).is_multiple_of(2)
    }

    /// Grid coordinates `(bx, by)` of rank `p`.
    pub fn grid_coords(&self, p: usize) -> (usize, usize) {
        let (mut bx, mut by) = (0, 0);
        let (mut rw, mut cw) = (1, 1);
        let mut rest = p;
        for j in 0..self.k {
            let d = rest % 7;
            rest /= 7;
            if self.is_row_digit(j) {
                bx += d * rw;
                rw *= 7;
            } else {
                by += d * cw;
                cw *= 7;
            }
        }
        (bx, by)
    }

    /// Rank owning grid position `(bx, by)`.
    pub fn rank_at(&self, mut bx: usize, mut by: usize) -> usize {
        let mut p = 0;
        let mut w = 1;
        for j in 0..self.k {
            let d = if self.is_row_digit(j) {
                let d = bx % 7;
                bx /= 7;
                d
            } else {
                let d = by % 7;
                by /= 7;
                d
            };
            p += d * w;
            w *= 7;
        }
        p
    }

    /// Processor owning global entry `(i, j)`.
    pub fn owner(&self, i: usize, j: usize) -> Result<usize, LayoutError> {
        if i >= self.n || j >= self.n {
            return Err(LayoutError::IndexOutOfRange { i, j, n: self.n });
        }
        let sub = self.submatrix_size();
        let bx = (i % sub) / self.block_rows();
        let by = (j % sub) / self.block_cols();
        Ok(self.rank_at(bx, by))
    }

    /// Global coordinates of local entry `(li, lj)` on processor `p`.
    pub fn local_to_global(&self, p: usize, li: usize, lj: usize) -> (usize, usize) {
        let (bx, by) = self.grid_coords(p);
        let (br, bc) = (self.block_rows(), self.block_cols());
        let sub = self.submatrix_size();
        let (u, x) = (li / br, li % br);
        let (v, y) = (lj / bc, lj % bc);
        (u * sub + bx * br + x, v * sub + by * bc + y)
    }

    fn check_matrix(&self, m: &Matrix) -> Result<(), LayoutError> {
        if m.rows() != self.n || m.cols() != self.n {
            return Err(LayoutError::MatrixShape {
                expected: self.n,
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        Ok(())
    }

    /// Packed local matrix of every processor.
    pub fn pack(&self, m: &Matrix) -> Result<Vec<Matrix>, LayoutError> {
        self.check_matrix(m)?;
        let (br, bc) = (self.block_rows(), self.block_cols());
        let sub = self.submatrix_size();
        let subs = 1usize << self.s;
        Ok((0..self.p)
            .map(|p| {
                let (bx, by) = self.grid_coords(p);
                let mut local = Matrix::zeros(self.local_rows(), self.local_cols());
                for u in 0..subs {
                    for v in 0..subs {
                        let blk = m.submatrix(u * sub + bx * br, v * sub + by * bc, br, bc);
                        local.set_submatrix(u * br, v * bc, &blk);
                    }
                }
                local
            })
            .collect())
    }

    /// Inverse of [`Layout::pack`].
    pub fn unpack(&self, locals: &[Matrix]) -> Result<Matrix, LayoutError> {
        if locals.len() != self.p {
            return Err(LayoutError::ShardMismatch(format!(
                "{} local matrices for P = {}",
                locals.len(),
                self.p
            )));
        }
        let (br, bc) = (self.block_rows(), self.block_cols());
        let sub = self.submatrix_size();
        let subs = 1usize << self.s;
        let mut out = Matrix::zeros(self.n, self.n);
        for (p, local) in locals.iter().enumerate() {
            if (local.rows(), local.cols()) != (self.local_rows(), self.local_cols()) {
                return Err(LayoutError::ShardMismatch(format!(
                    "processor {p} holds a {}x{} local matrix",
                    local.rows(),
                    local.cols()
                )));
            }
            let (bx, by) = self.grid_coords(p);
            for u in 0..subs {
                for v in 0..subs {
                    let blk = local.submatrix(u * br, v * bc, br, bc);
                    out.set_submatrix(u * sub + bx * br, v * sub + by * bc, &blk);
                }
            }
        }
        Ok(out)
    }

    /// Layout of each of the seven subproblems after a BFS step: `(n/2, P/7, s−1)`.
    pub fn bfs_child(&self) -> Result<Layout, LayoutError> {
        if self.s == 0 {
            return Err(LayoutError::NoStepsLeft);
        }
        if self.p < 7 {
            return Err(LayoutError::SingleProcessorBfs);
        }
        Layout::new(self.n / 2, self.p / 7, self.s - 1)
    }

    /// Layout of each subproblem after a DFS step: `(n/2, P, s−1)`.
    pub fn dfs_child(&self) -> Result<Layout, LayoutError> {
        if self.s == 0 {
            return Err(LayoutError::NoStepsLeft);
        }
        Layout::new(self.n / 2, self.p, self.s - 1)
    }

    /// Whether the next BFS step merges along grid rows (else columns).
    pub fn bfs_merges_rows(&self) -> bool {
        self.k.is_multiple_of(2)
    }

    /// The seven ranks sharing all digits of `p` except the lowest, ordered by that digit.
    pub fn bfs_group(&self, p: usize) -> [usize; 7] {
        let base = p - p % 7;
        std::array::from_fn(|d| base + d)
    }

    /// All BFS groups of this layout, in increasing order of their smallest member.
    pub fn bfs_groups(&self) -> Vec<[usize; 7]> {
        (0..self.p / 7).map(|g| self.bfs_group(g * 7)).collect()
    }

    /// Merges the seven quadrant-sized pieces sent to one group member into
    /// its packed local matrix in the BFS child layout. `pieces[d]` comes from
    /// the member whose lowest digit is `d`.
    pub fn bfs_merge(&self, pieces: &[Matrix]) -> Matrix {
        assert_eq!(pieces.len(), 7);
        let subs = 1usize << (self.s - 1);
        let (br, bc) = (self.block_rows(), self.block_cols());
        let (pr, pc) = (pieces[0].rows(), pieces[0].cols());
        if self.bfs_merges_rows() {
            let mut out = Matrix::zeros(7 * pr, pc);
            for u in 0..subs {
                for (d, piece) in pieces.iter().enumerate() {
                    let rows = piece.submatrix(u * br, 0, br, pc);
                    out.set_submatrix(u * 7 * br + d * br, 0, &rows);
                }
            }
            out
        } else {
            let mut out = Matrix::zeros(pr, 7 * pc);
            for v in 0..subs {
                for (d, piece) in pieces.iter().enumerate() {
                    let cols = piece.submatrix(0, v * bc, pr, bc);
                    out.set_submatrix(0, v * 7 * bc + d * bc, &cols);
                }
            }
            out
        }
    }

    /// Inverse of [`Layout::bfs_merge`].
    pub fn bfs_split(&self, merged: &Matrix) -> Vec<Matrix> {
        let subs = 1usize << (self.s - 1);
        let (br, bc) = (self.block_rows(), self.block_cols());
        if self.bfs_merges_rows() {
            let (pr, pc) = (merged.rows() / 7, merged.cols());
            (0..7)
                .map(|d| {
                    let mut piece = Matrix::zeros(pr, pc);
                    for u in 0..subs {
                        let rows = merged.submatrix(u * 7 * br + d * br, 0, br, pc);
                        piece.set_submatrix(u * br, 0, &rows);
                    }
                    piece
                })
                .collect()
        } else {
            let (pr, pc) = (merged.rows(), merged.cols() / 7);
            (0..7)
                .map(|d| {
                    let mut piece = Matrix::zeros(pr, pc);
                    for v in 0..subs {
                        let cols = merged.submatrix(0, v * 7 * bc + d * bc, pr, bc);
                        piece.set_submatrix(0, v * bc, &cols);
                    }
                    piece
                })
                .collect()
        }
    }

    /// Words each processor must send to each other processor to move a
    /// matrix from an arbitrary owner map into this layout. Entry `[from][to]`.
    pub fn rearrangement_words(
        &self,
        source_owner: impl Fn(usize, usize) -> usize,
        source_p: usize,
    ) -> Result<Vec<Vec<u64>>, LayoutError> {
        let mut words = vec![vec![0u64; self.p]; source_p];
        for i in 0..self.n {
            for j in 0..self.n {
                let from = source_owner(i, j);
                if from >= source_p {
                    return Err(LayoutError::ShardMismatch(format!(
                        "source owner {from} out of range for {source_p} processors"
                    )));
                }
                let to = self.owner(i, j)?;
                if from != to {
                    words[from][to] += 1;
                }
            }
        }
        Ok(words)
    }
}

/// Split of the top-level matrix into the quadrant-aligned local form.
/// Returns the local quadrants `(X11, X12, X21, X22)` of a packed local matrix.
pub fn local_quadrants(local: &Matrix) -> Vec<Matrix> {
    local.split_blocks(2)
}

/// One block owned by a processor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardBlock {
    /// Submatrix position `(u, v)` in the `2^s × 2^s` grid.
    pub submatrix: (usize, usize),
    /// Block position `(bx, by)` inside the submatrix.
    pub block: (usize, usize),
    pub data: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shard {
    pub owner: usize,
    pub blocks: Vec<ShardBlock>,
}

impl Shard {
    pub fn word_count(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    /// Builds the shard of processor `owner` from its packed local matrix.
    pub fn from_local(layout: &Layout, owner: usize, local: &Matrix) -> Self {
        let subs = 1usize << layout.s();
        let (br, bc) = (layout.block_rows(), layout.block_cols());
        let block = layout.grid_coords(owner);
        let mut blocks = Vec::with_capacity(subs * subs);
        for u in 0..subs {
            for v in 0..subs {
                blocks.push(ShardBlock {
                    submatrix: (u, v),
                    block,
                    data: local.submatrix(u * br, v * bc, br, bc),
                });
            }
        }
        Shard { owner, blocks }
    }

    /// Packed local matrix of this shard.
    pub fn to_local(&self, layout: &Layout) -> Result<Matrix, LayoutError> {
        let (br, bc) = (layout.block_rows(), layout.block_cols());
        let subs = 1usize << layout.s();
        if self.blocks.len() != subs * subs {
            return Err(LayoutError::ShardMismatch(format!(
                "shard {} has {} blocks, expected {}",
                self.owner,
                self.blocks.len(),
                subs * subs
            )));
        }
        let mut local = Matrix::zeros(layout.local_rows(), layout.local_cols());
        for b in &self.blocks {
            let (u, v) = b.submatrix;
            if u >= subs
                || v >= subs
                || (b.data.rows(), b.data.cols()) != (br, bc)
                || b.block != layout.grid_coords(self.owner)
            {
                return Err(LayoutError::ShardMismatch(format!(
                    "block {:?} of shard {} does not fit the layout",
                    b.submatrix, self.owner
                )));
            }
            local.set_submatrix(u * br, v * bc, &b.data);
        }
        Ok(local)
    }
}

/// Distributes `m` according to `layout`, one shard per processor.
pub fn shard(m: &Matrix, layout: &Layout) -> Result<Vec<Shard>, LayoutError> {
    let locals = layout.pack(m)?;
    Ok(locals
        .iter()
        .enumerate()
        .map(|(p, local)| Shard::from_local(layout, p, local))
        .collect())
}

/// Reassembles the global matrix from its shards (any order).
pub fn unshard(shards: &[Shard], layout: &Layout) -> Result<Matrix, LayoutError> {
    let mut locals: Vec<Option<Matrix>> = vec![None; layout.p()];
    for sh in shards {
        let slot = locals.get_mut(sh.owner).ok_or_else(|| {
            LayoutError::ShardMismatch(format!("owner {} out of range", sh.owner))
        })?;
        if slot.is_some() {
            return Err(LayoutError::ShardMismatch(format!(
                "duplicate shard for owner {}",
                sh.owner
            )));
        }
        *slot = Some(sh.to_local(layout)?);
    }
    let locals: Vec<Matrix> = locals
        .into_iter()
        .enumerate()
        .map(|(p, m)| m.ok_or_else(|| LayoutError::ShardMismatch(format!("missing shard {p}"))))
        .collect::<Result<_, _>>()?;
    layout.unpack(&locals)
}
