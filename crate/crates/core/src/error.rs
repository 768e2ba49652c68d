use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatrixError {
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadLength { rows: usize, cols: usize, len: usize },
    #[error("dimension mismatch: {left:?} times {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BilinearError {
    #[error("{table} coefficients: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    MalformedShape {
        table: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("block split n0 must be at least 2, got {0}")]
    InvalidSplit(usize),
    #[error("an algorithm needs at least one product")]
    NoProducts,
    #[error("cutoff must be at least 1")]
    ZeroCutoff,
    #[error("size {n} is not reachable from a base case <= {cutoff} by splitting into {n0} parts")]
    UnreachableSize { n: usize, cutoff: usize, n0: usize },
    #[error("program references {operand} which is not yet defined")]
    UndefinedOperand { operand: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("processor count {0} is not a power of 7")]
    NotPowerOfSeven(usize),
    #[error("matrix dimension {n} must be a positive multiple of {required} (nearest admissible: {nearest})")]
    Indivisible {
        n: usize,
        required: usize,
        nearest: usize,
    },
    #[error("index ({i}, {j}) outside a {n}x{n} matrix")]
    IndexOutOfRange { i: usize, j: usize, n: usize },
    #[error("layout expects a {expected}x{expected} matrix, got {rows}x{cols}")]
    MatrixShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("shard set does not match the layout: {0}")]
    ShardMismatch(String),
    #[error("no distributed recursion steps left (s = 0)")]
    NoStepsLeft,
    #[error("a BFS step needs at least 7 processors")]
    SingleProcessorBfs,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid machine parameters: {0}")]
    InvalidParams(String),
    #[error("a phase is already open")]
    PhaseAlreadyOpen,
    #[error("no phase is open")]
    NoOpenPhase,
    #[error("operation requires a {expected} phase, but a {actual} phase is open")]
    WrongPhaseKind {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("exchange groups must have exactly 7 members, got {0}")]
    GroupSize(usize),
    #[error("processor {0} appears twice in one exchange group")]
    DuplicateMember(usize),
    #[error("processor {processor} out of range for P = {p}")]
    ProcessorOutOfRange { processor: usize, p: usize },
    #[error("payload table must be {expected}x{expected}")]
    PayloadShape { expected: usize },
    #[error("processor {processor} out of simulated memory: {in_use} in use + {requested} requested > capacity {capacity}")]
    OutOfSimulatedMemory {
        processor: usize,
        requested: u64,
        in_use: u64,
        capacity: u64,
    },
    #[error("processor {processor} freed {words} words but only {in_use} are in use")]
    FreeUnderflow {
        processor: usize,
        words: u64,
        in_use: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CapsError {
    #[error("memory constraint 9n^2 <= M*P violated for n = {n}, P = {p}, M = {m}")]
    InsufficientMemory { n: usize, p: usize, m: u64 },
    #[error("schedule needs {peak} words per processor but only {capacity} are available")]
    ScheduleExceedsMemory { peak: u64, capacity: u64 },
    #[error("schedule has {got} BFS steps, but P = {p} needs exactly {expected}")]
    BfsCount { expected: u32, got: u32, p: usize },
    #[error("invalid schedule string {0:?}: expected only 'B' and 'D'")]
    BadSchedule(String),
    #[error("the distributed engine needs a 2x2 / 7-product algorithm, got n0 = {n0}, q = {q}")]
    UnsupportedAlgorithm { n0: usize, q: usize },
    #[error("inputs must be square and equally sized, got {a:?} and {b:?}")]
    Shape { a: (usize, usize), b: (usize, usize) },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("processor count {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("n = {n} must be a positive multiple of {required} (nearest admissible: {nearest})")]
    Indivisible {
        n: usize,
        required: usize,
        nearest: usize,
    },
    #[error("inputs must be square and equally sized, got {a:?} and {b:?}")]
    Shape { a: (usize, usize), b: (usize, usize) },
    #[error("the DFS steps need a 2x2 / 7-product algorithm, got n0 = {n0}, q = {q}")]
    UnsupportedAlgorithm { n0: usize, q: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostModelError {
    #[error("memory constraint 9n^2 <= M*P violated for n = {n}, P = {p}, M = {m}")]
    InsufficientMemory { n: f64, p: f64, m: f64 },
    #[error("unlimited-memory scheme needs {needed} words per processor, M = {m}")]
    UmDoesNotFit { needed: f64, m: f64 },
    #[error("row {0} needs the number of Strassen steps (ell)")]
    MissingEll(&'static str),
    #[error("unknown cost-model row {0:?}")]
    UnknownRow(String),
    #[error("M = {m} is below the input size n^2/P = {min}")]
    MemoryBelowInput { m: f64, min: f64 },
    #[error("P = {0} is not a power of 7")]
    NotPowerOfSeven(f64),
    #[error("arguments must be positive and finite")]
    NonPositive,
}
