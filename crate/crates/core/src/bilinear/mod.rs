//! Bilinear recursive matrix multiplication.
//!
//! A [`BilinearAlgorithm`] splits each operand into an `n0 × n0` grid of
//! blocks, forms `q` products of linear combinations of those blocks and
//! recombines the products into the blocks of `C`. Strassen-Winograd,
//! Strassen's original scheme and classical blocking are all instances.

mod engine;
pub mod program;

pub use engine::{
    admissible_size, closed_form_flops, flop_count, leading_constant, recursive_multiply,
    recursive_multiply_counted,
};
pub use program::{Coeff, LinearProgram, Operand, ProgramEval, Statement};

use num_traits::{One, Zero};

use crate::error::BilinearError;

/// Block index of `(i, j)` in an `n0 × n0` grid, row-major.
#[inline]
pub fn block_index(n0: usize, i: usize, j: usize) -> usize {
    i * n0 + j
}

#[derive(Debug, Clone, PartialEq)]
pub struct BilinearAlgorithm {
    name: String,
    n0: usize,
    q: usize,
    a_program: LinearProgram,
    b_program: LinearProgram,
    c_program: LinearProgram,
    a_coeffs: Vec<Vec<Coeff>>,
    b_coeffs: Vec<Vec<Coeff>>,
    c_coeffs: Vec<Vec<Coeff>>,
}

fn int(v: i64) -> Coeff {
    Coeff::from_integer(v)
}

fn st(terms: &[(i64, Operand)]) -> Statement {
    Statement::new(terms.iter().map(|&(c, op)| (int(c), op)).collect())
}

use Operand::{Input as I, Value as V};

impl BilinearAlgorithm {
    /// Builds an algorithm from three straight-line programs. The programs fix
    /// the evaluation order; coefficient tables are derived from them.
    pub fn from_programs(
        name: impl Into<String>,
        n0: usize,
        a_program: LinearProgram,
        b_program: LinearProgram,
        c_program: LinearProgram,
    ) -> Result<Self, BilinearError> {
        if n0 < 2 {
            return Err(BilinearError::InvalidSplit(n0));
        }
        let q = a_program.num_outputs();
        if q == 0 {
            return Err(BilinearError::NoProducts);
        }
        let blocks = n0 * n0;
        let shape = |table, prog: &LinearProgram, ins: usize, outs: usize| {
            if prog.num_inputs() == ins && prog.num_outputs() == outs {
                Ok(())
            } else {
                Err(BilinearError::MalformedShape {
                    table,
                    expected_rows: outs,
                    expected_cols: ins,
                    rows: prog.num_outputs(),
                    cols: prog.num_inputs(),
                })
            }
        };
        shape("a", &a_program, blocks, q)?;
        shape("b", &b_program, blocks, q)?;
        shape("c", &c_program, q, blocks)?;
        Ok(Self {
            name: name.into(),
            n0,
            q,
            a_coeffs: a_program.expand(),
            b_coeffs: b_program.expand(),
            c_coeffs: c_program.expand(),
            a_program,
            b_program,
            c_program,
        })
    }

    /// Builds an algorithm from coefficient tables (`q × n0²`, `q × n0²`,
    /// `n0² × q`). Each row is evaluated independently, terms in block order.
    pub fn from_coefficients(
        name: impl Into<String>,
        n0: usize,
        a: Vec<Vec<Coeff>>,
        b: Vec<Vec<Coeff>>,
        c: Vec<Vec<Coeff>>,
    ) -> Result<Self, BilinearError> {
        if n0 < 2 {
            return Err(BilinearError::InvalidSplit(n0));
        }
        let q = a.len();
        if q == 0 {
            return Err(BilinearError::NoProducts);
        }
        check_shapes(n0, q, &a, &b, &c)?;
        let blocks = n0 * n0;
        Self::from_programs(
            name,
            n0,
            LinearProgram::from_rows(blocks, &a)?,
            LinearProgram::from_rows(blocks, &b)?,
            LinearProgram::from_rows(q, &c)?,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn a_coeffs(&self) -> &[Vec<Coeff>] {
        &self.a_coeffs
    }

    pub fn b_coeffs(&self) -> &[Vec<Coeff>] {
        &self.b_coeffs
    }

    pub fn c_coeffs(&self) -> &[Vec<Coeff>] {
        &self.c_coeffs
    }

    pub fn a_program(&self) -> &LinearProgram {
        &self.a_program
    }

    pub fn b_program(&self) -> &LinearProgram {
        &self.b_program
    }

    pub fn c_program(&self) -> &LinearProgram {
        &self.c_program
    }

    pub fn add_count_a(&self) -> u64 {
        self.a_program.cost()
    }

    pub fn add_count_b(&self) -> u64 {
        self.b_program.cost()
    }

    pub fn add_count_c(&self) -> u64 {
        self.c_program.cost()
    }

    pub fn add_count(&self) -> u64 {
        self.add_count_a() + self.add_count_b() + self.add_count_c()
    }

    /// `log_{n0} q`.
    pub fn omega0(&self) -> f64 {
        (self.q as f64).ln() / (self.n0 as f64).ln()
    }

    pub fn is_fast(&self) -> bool {
        self.q < self.n0.pow(3)
    }

    /// Shape of the 2×2 / 7-product family the distributed engine handles.
    pub fn is_strassen_like(&self) -> bool {
        self.n0 == 2 && self.q == 7
    }
}

/// Strassen-Winograd: 7 products, 15 additions (4 + 4 + 7).
///
/// ```text
/// T0 = A11        S0 = B11        U1  = Q0 + Q3
/// T1 = A12        S1 = B21        U2  = U1 + Q4
/// T2 = A21 + A22  S2 = B12 - B11  U3  = U1 + Q2
/// T3 = T2 - A11   S3 = B22 - S2   C11 = Q0 + Q1
/// T4 = A11 - A21  S4 = B22 - B12  C12 = U3 + Q5
/// T5 = A12 - T3   S5 = B22        C21 = U2 - Q6
/// T6 = A22        S6 = S3 - B21   C22 = U2 + Q2
/// ```
pub fn make_strassen_winograd() -> BilinearAlgorithm {
    let a = LinearProgram::new(
        4,
        vec![
            st(&[(1, I(2)), (1, I(3))]),
            st(&[(1, V(0)), (-1, I(0))]),
            st(&[(1, I(0)), (-1, I(2))]),
            st(&[(1, I(1)), (-1, V(1))]),
        ],
        vec![I(0), I(1), V(0), V(1), V(2), V(3), I(3)],
    )
    .expect("well-formed");
    let b = LinearProgram::new(
        4,
        vec![
            st(&[(1, I(1)), (-1, I(0))]),
            st(&[(1, I(3)), (-1, V(0))]),
            st(&[(1, I(3)), (-1, I(1))]),
            st(&[(1, V(1)), (-1, I(2))]),
        ],
        vec![I(0), I(2), V(0), V(1), V(2), I(3), V(3)],
    )
    .expect("well-formed");
    let c = LinearProgram::new(
        7,
        vec![
            st(&[(1, I(0)), (1, I(3))]),
            st(&[(1, V(0)), (1, I(4))]),
            st(&[(1, V(0)), (1, I(2))]),
            st(&[(1, I(0)), (1, I(1))]),
            st(&[(1, V(2)), (1, I(5))]),
            st(&[(1, V(1)), (-1, I(6))]),
            st(&[(1, V(1)), (1, I(2))]),
        ],
        vec![V(3), V(4), V(5), V(6)],
    )
    .expect("well-formed");
    BilinearAlgorithm::from_programs("strassen-winograd", 2, a, b, c).expect("well-formed")
}

/// Strassen's original scheme: 7 products, 18 additions (5 + 5 + 8).
pub fn make_strassen() -> BilinearAlgorithm {
    let a = LinearProgram::new(
        4,
        vec![
            st(&[(1, I(0)), (1, I(3))]),
            st(&[(1, I(2)), (1, I(3))]),
            st(&[(1, I(0)), (1, I(1))]),
            st(&[(1, I(2)), (-1, I(0))]),
            st(&[(1, I(1)), (-1, I(3))]),
        ],
        vec![V(0), V(1), I(0), I(3), V(2), V(3), V(4)],
    )
    .expect("well-formed");
    let b = LinearProgram::new(
        4,
        vec![
            st(&[(1, I(0)), (1, I(3))]),
            st(&[(1, I(1)), (-1, I(3))]),
            st(&[(1, I(2)), (-1, I(0))]),
            st(&[(1, I(0)), (1, I(1))]),
            st(&[(1, I(2)), (1, I(3))]),
        ],
        vec![V(0), I(0), V(1), V(2), I(3), V(3), V(4)],
    )
    .expect("well-formed");
    let c = LinearProgram::new(
        7,
        vec![
            st(&[(1, I(0)), (1, I(3)), (-1, I(4)), (1, I(6))]),
            st(&[(1, I(2)), (1, I(4))]),
            st(&[(1, I(1)), (1, I(3))]),
            st(&[(1, I(0)), (-1, I(1)), (1, I(2)), (1, I(5))]),
        ],
        vec![V(0), V(1), V(2), V(3)],
    )
    .expect("well-formed");
    BilinearAlgorithm::from_programs("strassen", 2, a, b, c).expect("well-formed")
}

/// Classical `n0 × n0` blocking. Product `(i·n0 + j)·n0 + l` is `A_il · B_lj`
/// and `C_ij` sums its `n0` products in increasing `l`.
pub fn make_classical(n0: usize) -> Result<BilinearAlgorithm, BilinearError> {
    if n0 < 2 {
        return Err(BilinearError::InvalidSplit(n0));
    }
    let blocks = n0 * n0;
    let mut t_out = Vec::with_capacity(blocks * n0);
    let mut s_out = Vec::with_capacity(blocks * n0);
    let mut c_stmts = Vec::with_capacity(blocks);
    for i in 0..n0 {
        for j in 0..n0 {
            let mut terms = Vec::with_capacity(n0);
            for l in 0..n0 {
                t_out.push(I(block_index(n0, i, l)));
                s_out.push(I(block_index(n0, l, j)));
                terms.push((Coeff::one(), I(t_out.len() - 1)));
            }
            c_stmts.push(Statement::new(terms));
        }
    }
    let q = t_out.len();
    let a = LinearProgram::new(blocks, vec![], t_out)?;
    let b = LinearProgram::new(blocks, vec![], s_out)?;
    let c = LinearProgram::new(q, c_stmts, (0..blocks).map(V).collect())?;
    BilinearAlgorithm::from_programs(format!("classical-{n0}"), n0, a, b, c)
}

fn check_shapes(
    n0: usize,
    q: usize,
    a: &[Vec<Coeff>],
    b: &[Vec<Coeff>],
    c: &[Vec<Coeff>],
) -> Result<(), BilinearError> {
    let blocks = n0 * n0;
    let check = |table, m: &[Vec<Coeff>], rows: usize, cols: usize| {
        let bad_col = m.iter().map(Vec::len).find(|&l| l != cols);
        if m.len() != rows || bad_col.is_some() {
            return Err(BilinearError::MalformedShape {
                table,
                expected_rows: rows,
                expected_cols: cols,
                rows: m.len(),
                cols: bad_col.unwrap_or(cols),
            });
        }
        Ok(())
    };
    check("a", a, q, blocks)?;
    check("b", b, q, blocks)?;
    check("c", c, blocks, q)
}

/// Checks the bilinear identity on raw coefficient tables by brute force over
/// all pairs of elementary basis matrices, in exact rational arithmetic.
#[allow(clippy::needless_range_loop)]
pub fn check_bilinear_identity(
    n0: usize,
    q: usize,
    a: &[Vec<Coeff>],
    b: &[Vec<Coeff>],
    c: &[Vec<Coeff>],
) -> Result<bool, BilinearError> {
    if n0 < 2 {
        return Err(BilinearError::InvalidSplit(n0));
    }
    check_shapes(n0, q, a, b, c)?;
    let blocks = n0 * n0;
    for x in 0..blocks {
        let (i, j) = (x / n0, x % n0);
        for y in 0..blocks {
            let (k, l) = (y / n0, y % n0);
            let products: Vec<Coeff> = (0..q).map(|r| a[r][x] * b[r][y]).collect();
            for (out, row) in c.iter().enumerate() {
                let got = row
                    .iter()
                    .zip(&products)
                    .fold(Coeff::zero(), |acc, (cc, p)| acc + cc * p);
                let want = if j == k && out == block_index(n0, i, l) {
                    Coeff::one()
                } else {
                    Coeff::zero()
                };
                if got != want {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// One recursion level reproduces `E_ij · E_kl` for every basis pair.
pub fn validate_bilinear(alg: &BilinearAlgorithm) -> Result<bool, BilinearError> {
    check_bilinear_identity(alg.n0, alg.q, &alg.a_coeffs, &alg.b_coeffs, &alg.c_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winograd_shape_and_adds() {
        let sw = make_strassen_winograd();
        assert_eq!((sw.n0(), sw.q()), (2, 7));
        assert_eq!(
            (sw.add_count_a(), sw.add_count_b(), sw.add_count_c()),
            (4, 4, 7)
        );
        assert_eq!(sw.add_count(), 15);
        assert!(sw.is_fast());
        assert!((sw.omega0() - 7f64.log2()).abs() < 1e-15);
        assert!(validate_bilinear(&sw).unwrap());
    }

    #[test]
    fn strassen_has_eighteen_adds() {
        let s = make_strassen();
        assert_eq!(s.add_count(), 18);
        assert!(validate_bilinear(&s).unwrap());
    }

    #[test]
    fn classical_instances() {
        let c2 = make_classical(2).unwrap();
        assert_eq!(c2.q(), 8);
        assert_eq!(c2.omega0(), 3.0);
        assert!(!c2.is_fast());
        assert_eq!(c2.add_count_c(), 4);
        assert!(validate_bilinear(&c2).unwrap());
        let c3 = make_classical(3).unwrap();
        assert_eq!(c3.q(), 27);
        assert!(validate_bilinear(&c3).unwrap());
        assert!(make_classical(1).is_err());
    }

    #[test]
    fn flipped_sign_is_detected() {
        let sw = make_strassen_winograd();
        let mut c = sw.c_coeffs().to_vec();
        let pos = c[1].iter().position(|v| !v.is_zero()).unwrap();
        c[1][pos] = -c[1][pos];
        assert!(!check_bilinear_identity(2, 7, sw.a_coeffs(), sw.b_coeffs(), &c).unwrap());
        let broken = BilinearAlgorithm::from_coefficients(
            "broken",
            2,
            sw.a_coeffs().to_vec(),
            sw.b_coeffs().to_vec(),
            c,
        )
        .unwrap();
        assert!(!validate_bilinear(&broken).unwrap());
    }

    #[test]
    fn malformed_tables_are_errors() {
        let sw = make_strassen_winograd();
        let mut a = sw.a_coeffs().to_vec();
        a.pop();
        assert!(matches!(
            check_bilinear_identity(2, 7, &a, sw.b_coeffs(), sw.c_coeffs()),
            Err(BilinearError::MalformedShape { table: "a", .. })
        ));
        let mut c = sw.c_coeffs().to_vec();
        c[0].push(Coeff::one());
        assert!(check_bilinear_identity(2, 7, sw.a_coeffs(), sw.b_coeffs(), &c).is_err());
    }

    #[test]
    fn coefficient_roundtrip_preserves_the_tensor() {
        let sw = make_strassen_winograd();
        let naive = BilinearAlgorithm::from_coefficients(
            "naive",
            2,
            sw.a_coeffs().to_vec(),
            sw.b_coeffs().to_vec(),
            sw.c_coeffs().to_vec(),
        )
        .unwrap();
        assert_eq!(naive.a_coeffs(), sw.a_coeffs());
        assert_eq!(naive.c_coeffs(), sw.c_coeffs());
        assert!(validate_bilinear(&naive).unwrap());
        // Without shared subexpressions the naive evaluation costs more.
        assert!(naive.add_count() > sw.add_count());
    }
}
