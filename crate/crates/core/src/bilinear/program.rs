//! Straight-line programs of linear combinations.
//!
//! Each side of a bilinear algorithm (forming the left factors from blocks of
//! `A`, the right factors from blocks of `B`, and the output blocks from the
//! products) is a short sequence of statements. Every statement is a linear
//! combination of program inputs and earlier statements. The order of the
//! statements and of the terms inside each statement fixes the floating-point
//! evaluation order, so any two evaluations of one program on equal inputs are
//! bit-identical no matter when each statement runs.

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};

use crate::error::BilinearError;
use crate::matrix::Matrix;

pub type Coeff = Rational64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operand {
    Input(usize),
    Value(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub terms: Vec<(Coeff, Operand)>,
}

impl Statement {
    pub fn new(terms: Vec<(Coeff, Operand)>) -> Self {
        Self { terms }
    }

    /// Flops per output word: one per add/sub, plus one per non-unit scaling
    /// (a leading `-1` counts as a negation).
    pub fn cost(&self) -> u64 {
        let mut cost = 0;
        for (idx, (c, _)) in self.terms.iter().enumerate() {
            if idx > 0 {
                cost += 1;
            }
            let unit = c.abs().is_one();
            if !unit || (idx == 0 && c.is_negative()) {
                cost += 1;
            }
        }
        cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    inputs: usize,
    statements: Vec<Statement>,
    outputs: Vec<Operand>,
}

impl LinearProgram {
    pub fn new(
        inputs: usize,
        statements: Vec<Statement>,
        outputs: Vec<Operand>,
    ) -> Result<Self, BilinearError> {
        let check = |op: &Operand, defined: usize| -> Result<(), BilinearError> {
            let ok = match *op {
                Operand::Input(i) => i < inputs,
                Operand::Value(v) => v < defined,
            };
            if ok {
                Ok(())
            } else {
                Err(BilinearError::UndefinedOperand {
                    operand: format!("{op:?}"),
                })
            }
        };
        for (idx, st) in statements.iter().enumerate() {
            for (_, op) in &st.terms {
                check(op, idx)?;
            }
        }
        for op in &outputs {
            check(op, statements.len())?;
        }
        Ok(Self {
            inputs,
            statements,
            outputs,
        })
    }

    /// One statement per output row, terms in input order; rows that are a
    /// single input with coefficient one become plain references.
    pub fn from_rows(inputs: usize, rows: &[Vec<Coeff>]) -> Result<Self, BilinearError> {
        let mut statements = Vec::new();
        let mut outputs = Vec::with_capacity(rows.len());
        for row in rows {
            let terms: Vec<(Coeff, Operand)> = row
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (*c, Operand::Input(i)))
                .collect();
            if terms.len() == 1 && terms[0].0.is_one() {
                outputs.push(terms[0].1);
            } else {
                outputs.push(Operand::Value(statements.len()));
                statements.push(Statement::new(terms));
            }
        }
        Self::new(inputs, statements, outputs)
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn outputs(&self) -> &[Operand] {
        &self.outputs
    }

    /// Flops per word of one block for evaluating the whole program.
    pub fn cost(&self) -> u64 {
        self.statements.iter().map(Statement::cost).sum()
    }

    /// Symbolic expansion: row `o` holds the coefficient of each input in output `o`.
    pub fn expand(&self) -> Vec<Vec<Coeff>> {
        let mut values: Vec<Vec<Coeff>> = Vec::with_capacity(self.statements.len());
        let unit = |i: usize| {
            let mut row = vec![Coeff::zero(); self.inputs];
            row[i] = Coeff::one();
            row
        };
        let resolve = |op: &Operand, values: &[Vec<Coeff>]| match *op {
            Operand::Input(i) => unit(i),
            Operand::Value(v) => values[v].clone(),
        };
        for st in &self.statements {
            let mut row = vec![Coeff::zero(); self.inputs];
            for (c, op) in &st.terms {
                for (acc, x) in row.iter_mut().zip(resolve(op, &values)) {
                    *acc += *c * x;
                }
            }
            values.push(row);
        }
        self.outputs.iter().map(|op| resolve(op, &values)).collect()
    }

    /// Evaluates every output at once.
    pub fn eval_all(&self, inputs: Vec<Matrix>, flops: &mut u64) -> Vec<Matrix> {
        assert_eq!(inputs.len(), self.inputs);
        let mut ev = ProgramEval::new(self);
        for (i, m) in inputs.into_iter().enumerate() {
            ev.set_input(i, m);
        }
        ev.run_ready();
        let outs = (0..self.outputs.len())
            .map(|o| ev.take_output(o).expect("all inputs were provided"))
            .collect();
        *flops += ev.flops();
        outs
    }
}

fn coeff_f64(c: &Coeff) -> f64 {
    *c.numer() as f64 / *c.denom() as f64
}

/// Incremental evaluator with use counting.
///
/// Inputs may arrive in any order; statements run either eagerly
/// ([`ProgramEval::run_ready`]) or on demand ([`ProgramEval::demand`]).
/// A value is dropped as soon as every statement and output that reads it
/// has been served.
pub struct ProgramEval<'p> {
    prog: &'p LinearProgram,
    inputs: Vec<Option<Matrix>>,
    values: Vec<Option<Matrix>>,
    evaluated: Vec<bool>,
    input_uses: Vec<usize>,
    value_uses: Vec<usize>,
    taken: Vec<bool>,
    shape: Option<(usize, usize)>,
    flops: u64,
}

impl<'p> ProgramEval<'p> {
    pub fn new(prog: &'p LinearProgram) -> Self {
        let mut input_uses = vec![0; prog.inputs];
        let mut value_uses = vec![0; prog.statements.len()];
        let mut bump = |op: &Operand| match *op {
            Operand::Input(i) => input_uses[i] += 1,
            Operand::Value(v) => value_uses[v] += 1,
        };
        for st in &prog.statements {
            st.terms.iter().for_each(|(_, op)| bump(op));
        }
        prog.outputs.iter().for_each(&mut bump);
        Self {
            prog,
            inputs: vec![None; prog.inputs],
            values: vec![None; prog.statements.len()],
            evaluated: vec![false; prog.statements.len()],
            input_uses,
            value_uses,
            taken: vec![false; prog.outputs.len()],
            shape: None,
            flops: 0,
        }
    }

    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn set_input(&mut self, i: usize, m: Matrix) {
        self.shape.get_or_insert((m.rows(), m.cols()));
        if self.input_uses[i] > 0 {
            self.inputs[i] = Some(m);
        }
    }

    fn available(&self, op: &Operand) -> bool {
        match *op {
            Operand::Input(i) => self.inputs[i].is_some(),
            Operand::Value(v) => self.evaluated[v],
        }
    }

    fn get(&self, op: &Operand) -> &Matrix {
        match *op {
            Operand::Input(i) => self.inputs[i].as_ref().expect("input released early"),
            Operand::Value(v) => self.values[v].as_ref().expect("value released early"),
        }
    }

    fn release(&mut self, op: &Operand) {
        match *op {
            Operand::Input(i) => {
                self.input_uses[i] -= 1;
                if self.input_uses[i] == 0 {
                    self.inputs[i] = None;
                }
            }
            Operand::Value(v) => {
                self.value_uses[v] -= 1;
                if self.value_uses[v] == 0 {
                    self.values[v] = None;
                }
            }
        }
    }

    fn eval_statement(&mut self, idx: usize) {
        let st = &self.prog.statements[idx];
        let (rows, cols) = self.shape.expect("no input provided yet");
        let mut acc = Matrix::zeros(rows, cols);
        let words = (rows * cols) as u64;
        for (t, (c, op)) in st.terms.iter().enumerate() {
            let x = self.get(op).as_slice();
            let dst = acc.as_mut_slice();
            let cf = coeff_f64(c);
            match (t, cf) {
                (0, 1.0) => dst.copy_from_slice(x),
                (0, -1.0) => dst.iter_mut().zip(x).for_each(|(d, v)| *d = -v),
                (0, _) => dst.iter_mut().zip(x).for_each(|(d, v)| *d = cf * v),
                (_, 1.0) => dst.iter_mut().zip(x).for_each(|(d, v)| *d += v),
                (_, -1.0) => dst.iter_mut().zip(x).for_each(|(d, v)| *d -= v),
                _ => dst.iter_mut().zip(x).for_each(|(d, v)| *d += cf * v),
            }
        }
        self.flops += st.cost() * words;
        let operands: Vec<Operand> = st.terms.iter().map(|(_, op)| *op).collect();
        for op in &operands {
            self.release(op);
        }
        self.evaluated[idx] = true;
        if self.value_uses[idx] > 0 {
            self.values[idx] = Some(acc);
        }
    }

    /// Runs every statement whose operands are available, in program order.
    pub fn run_ready(&mut self) {
        for idx in 0..self.prog.statements.len() {
            if !self.evaluated[idx]
                && self.prog.statements[idx]
                    .terms
                    .iter()
                    .all(|(_, op)| self.available(op))
            {
                self.eval_statement(idx);
            }
        }
    }

    fn ensure(&mut self, op: Operand) {
        if let Operand::Value(v) = op {
            if self.evaluated[v] {
                return;
            }
            let deps: Vec<Operand> = self.prog.statements[v]
                .terms
                .iter()
                .map(|(_, o)| *o)
                .collect();
            for d in deps {
                self.ensure(d);
            }
            self.eval_statement(v);
        }
    }

    /// Evaluates exactly what output `o` depends on and hands it over.
    pub fn demand(&mut self, o: usize) -> Matrix {
        let op = self.prog.outputs[o];
        self.ensure(op);
        self.take_output(o).expect("inputs for demanded output missing")
    }

    /// Takes output `o` if it can be produced now. Each output is taken once.
    pub fn take_output(&mut self, o: usize) -> Option<Matrix> {
        assert!(!self.taken[o], "output {o} taken twice");
        let op = self.prog.outputs[o];
        if !self.available(&op) {
            return None;
        }
        let m = self.get(&op).clone();
        self.taken[o] = true;
        self.release(&op);
        Some(m)
    }

    pub fn output_taken(&self, o: usize) -> bool {
        self.taken[o]
    }

    /// Words held in intermediate values that later statements or outputs still read.
    pub fn retained_value_words(&self) -> u64 {
        self.values.iter().flatten().map(|m| m.len() as u64).sum()
    }

    /// Words held in inputs that are still needed.
    pub fn retained_input_words(&self) -> u64 {
        self.inputs.iter().flatten().map(|m| m.len() as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: i64) -> Coeff {
        Coeff::from_integer(v)
    }

    #[test]
    fn statement_costs() {
        let add = Statement::new(vec![(r(1), Operand::Input(0)), (r(-1), Operand::Input(1))]);
        assert_eq!(add.cost(), 1);
        let neg = Statement::new(vec![(r(-1), Operand::Input(0))]);
        assert_eq!(neg.cost(), 1);
        let scaled = Statement::new(vec![(r(1), Operand::Input(0)), (r(2), Operand::Input(1))]);
        assert_eq!(scaled.cost(), 2);
    }

    #[test]
    fn forward_references_are_rejected() {
        let st = Statement::new(vec![(r(1), Operand::Value(0))]);
        assert!(LinearProgram::new(1, vec![st], vec![Operand::Value(0)]).is_err());
    }

    #[test]
    fn expand_follows_chains() {
        // v0 = x0 + x1, v1 = v0 - x0  => outputs (x0 + x1, x1)
        let prog = LinearProgram::new(
            2,
            vec![
                Statement::new(vec![(r(1), Operand::Input(0)), (r(1), Operand::Input(1))]),
                Statement::new(vec![(r(1), Operand::Value(0)), (r(-1), Operand::Input(0))]),
            ],
            vec![Operand::Value(0), Operand::Value(1)],
        )
        .unwrap();
        assert_eq!(prog.expand(), vec![vec![r(1), r(1)], vec![r(0), r(1)]]);
    }

    #[test]
    fn demand_and_eager_agree_bitwise() {
        let prog = LinearProgram::new(
            2,
            vec![
                Statement::new(vec![(r(1), Operand::Input(0)), (r(1), Operand::Input(1))]),
                Statement::new(vec![(r(1), Operand::Value(0)), (r(-1), Operand::Input(0))]),
            ],
            vec![Operand::Input(0), Operand::Value(1), Operand::Value(0)],
        )
        .unwrap();
        let x0 = Matrix::from_rows(&[[0.1, 0.7]]);
        let x1 = Matrix::from_rows(&[[0.2, 1e-17]]);
        let mut f = 0;
        let eager = prog.eval_all(vec![x0.clone(), x1.clone()], &mut f);
        let mut ev = ProgramEval::new(&prog);
        ev.set_input(0, x0);
        ev.set_input(1, x1);
        let lazy: Vec<Matrix> = (0..3).map(|o| ev.demand(o)).collect();
        for (a, b) in eager.iter().zip(&lazy) {
            assert!(a.bit_eq(b));
        }
        assert_eq!(f, ev.flops());
        assert_eq!(ev.retained_value_words(), 0);
        assert_eq!(ev.retained_input_words(), 0);
    }
}
