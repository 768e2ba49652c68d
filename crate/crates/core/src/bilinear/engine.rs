use super::BilinearAlgorithm;
use crate::error::{BilinearError, MatrixError};
use crate::matrix::{classical_mul_acc, Matrix};

/// Smallest `m · n0^t ≥ n` with `m ≤ cutoff`.
pub fn admissible_size(n: usize, n0: usize, cutoff: usize) -> usize {
    let mut scale = 1usize;
    while n.div_ceil(scale) > cutoff {
        scale *= n0;
    }
    n.div_ceil(scale) * scale
}

fn check_square_pair(a: &Matrix, b: &Matrix) -> Result<usize, BilinearError> {
    if !a.is_square() {
        return Err(MatrixError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        }
        .into());
    }
    if !b.is_square() {
        return Err(MatrixError::NotSquare {
            rows: b.rows(),
            cols: b.cols(),
        }
        .into());
    }
    if a.rows() != b.rows() {
        return Err(MatrixError::DimensionMismatch {
            left: (a.rows(), a.cols()),
            right: (b.rows(), b.cols()),
        }
        .into());
    }
    Ok(a.rows())
}

/// Recursive multiply; see [`recursive_multiply_counted`].
pub fn recursive_multiply(
    alg: &BilinearAlgorithm,
    a: &Matrix,
    b: &Matrix,
    cutoff: usize,
) -> Result<Matrix, BilinearError> {
    recursive_multiply_counted(alg, a, b, cutoff).map(|(c, _)| c)
}

/// Multiplies by recursing while the size exceeds `cutoff` and finishing with
/// the classical loop. Sizes that do not reach the base case by exact
/// splitting are zero-padded first and stripped afterwards. Also returns the
/// number of flops executed (on the padded problem).
pub fn recursive_multiply_counted(
    alg: &BilinearAlgorithm,
    a: &Matrix,
    b: &Matrix,
    cutoff: usize,
) -> Result<(Matrix, u64), BilinearError> {
    if cutoff == 0 {
        return Err(BilinearError::ZeroCutoff);
    }
    let n = check_square_pair(a, b)?;
    let padded = admissible_size(n, alg.n0(), cutoff);
    let mut flops = 0;
    let c = if padded == n {
        multiply_rec(alg, a, b, cutoff, &mut flops)
    } else {
        let c = multiply_rec(
            alg,
            &a.padded(padded, padded),
            &b.padded(padded, padded),
            cutoff,
            &mut flops,
        );
        c.submatrix(0, 0, n, n)
    };
    Ok((c, flops))
}

pub(crate) fn multiply_rec(
    alg: &BilinearAlgorithm,
    a: &Matrix,
    b: &Matrix,
    cutoff: usize,
    flops: &mut u64,
) -> Matrix {
    let n = a.rows();
    if n <= cutoff {
        let mut c = Matrix::zeros(n, n);
        classical_mul_acc(a, b, &mut c);
        *flops += classical_flops(n as u64);
        return c;
    }
    let n0 = alg.n0();
    let t = alg.a_program().eval_all(a.split_blocks(n0), flops);
    let s = alg.b_program().eval_all(b.split_blocks(n0), flops);
    let q: Vec<Matrix> = t
        .iter()
        .zip(&s)
        .map(|(ti, si)| multiply_rec(alg, ti, si, cutoff, flops))
        .collect();
    drop((t, s));
    let blocks = alg.c_program().eval_all(q, flops);
    Matrix::join_blocks(&blocks, n0)
}

pub(crate) fn classical_flops(m: u64) -> u64 {
    2 * m * m * m - m * m
}

/// Exact flops of [`recursive_multiply`] at size `n`:
/// `F(n) = q·F(n/n0) + adds·(n/n0)²`, `F(m) = 2m³ − m²` for `m ≤ cutoff`.
pub fn flop_count(alg: &BilinearAlgorithm, n: usize, cutoff: usize) -> Result<u64, BilinearError> {
    if cutoff == 0 {
        return Err(BilinearError::ZeroCutoff);
    }
    let unreachable = BilinearError::UnreachableSize {
        n,
        cutoff,
        n0: alg.n0(),
    };
    if n == 0 {
        return Err(unreachable);
    }
    let mut size = n;
    let mut levels = 0u32;
    while size > cutoff {
        if !size.is_multiple_of(alg.n0()) {
            return Err(unreachable);
        }
        size /= alg.n0();
        levels += 1;
    }
    let (q, adds) = (alg.q() as u64, alg.add_count());
    let mut f = classical_flops(size as u64);
    let mut m = size as u64;
    for _ in 0..levels {
        f = q * f + adds * m * m;
        m *= alg.n0() as u64;
    }
    Ok(f)
}

/// Closed form for a 2×2 / 7-product scheme with `adds` additions per level
/// at `n = 2^t · nb`: `7^t·nb²·(2nb − 1 + adds/3) − (adds/3)·n²`, written so it
/// stays integral (`7^t − 4^t` is a multiple of 3). `None` if `n` is not of that form.
pub fn closed_form_flops(adds: u64, n: u64, nb: u64) -> Option<u64> {
    if nb == 0 || !n.is_multiple_of(nb) || !(n / nb).is_power_of_two() {
        return None;
    }
    let t = (n / nb).trailing_zeros();
    let (p7, p4) = (7u64.pow(t), 4u64.pow(t));
    Some(p7 * classical_flops(nb) + adds * nb * nb * (p7 - p4) / 3)
}

/// Leading constant `c_s` with `F(n) = c_s·n^{log2 7} − (adds/3)·n²` for base size `nb`.
pub fn leading_constant(adds: u64, nb: u64) -> f64 {
    let omega0 = 7f64.log2();
    (2.0 * nb as f64 - 1.0 + adds as f64 / 3.0) / (nb as f64).powf(omega0 - 2.0)
}
