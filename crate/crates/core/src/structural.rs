//! Structural controllability of the pattern pair ([A], [B]).

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::matching::hopcroft_karp;
use crate::sparse::{CsrMatrix, SparseColumn};
use crate::wq::StateIndex;

/// Entries at or below this magnitude count as structural zeros.
pub const ZERO_THRESHOLD: f64 = 1e-300;

/// Source of a sparsity pattern.
pub trait NonzeroPattern {
    fn shape(&self) -> (usize, usize);
    fn for_each_entry(&self, f: &mut dyn FnMut(usize, usize, f64));
}

impl NonzeroPattern for CsrMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        for (r, c, v) in self.iter() {
            f(r, c, v);
        }
    }
}

impl NonzeroPattern for DMatrix<f64> {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        for c in 0..self.ncols() {
            for r in 0..self.nrows() {
                f(r, c, self[(r, c)]);
            }
        }
    }
}

impl NonzeroPattern for [SparseColumn] {
    fn shape(&self) -> (usize, usize) {
        (self.first().map_or(0, |c| c.len()), self.len())
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        for (j, col) in self.iter().enumerate() {
            for &(r, v) in col.entries() {
                f(r, j, v);
            }
        }
    }
}

impl NonzeroPattern for Vec<SparseColumn> {
    fn shape(&self) -> (usize, usize) {
        self.as_slice().shape()
    }

    fn for_each_entry(&self, f: &mut dyn FnMut(usize, usize, f64)) {
        self.as_slice().for_each_entry(f)
    }
}

/// Binary patterns F_A (n × n) and F_B (n × m), stored by row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructurePair {
    n: usize,
    m: usize,
    a_rows: Vec<Vec<usize>>,
    b_rows: Vec<Vec<usize>>,
}

impl StructurePair {
    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn n_inputs(&self) -> usize {
        self.m
    }

    pub fn a(&self, i: usize, k: usize) -> bool {
        self.a_rows[i].binary_search(&k).is_ok()
    }

    pub fn b(&self, i: usize, j: usize) -> bool {
        self.b_rows[i].binary_search(&j).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.a_rows.iter().chain(&self.b_rows).map(Vec::len).sum()
    }
}

/// Exact nonzero patterns of A and B.
pub fn binarize<PA, PB>(a: &PA, b: &PB) -> StructurePair
where
    PA: NonzeroPattern + ?Sized,
    PB: NonzeroPattern + ?Sized,
{
    let (n, n2) = a.shape();
    assert_eq!(n, n2, "A must be square");
    let (bn, m) = b.shape();
    assert!(bn == n || m == 0, "B has {bn} rows, A has {n}");
    let mut a_rows = vec![Vec::new(); n];
    let mut b_rows = vec![Vec::new(); n];
    a.for_each_entry(&mut |r, c, v| {
        if v.abs() > ZERO_THRESHOLD {
            a_rows[r].push(c);
        }
    });
    b.for_each_entry(&mut |r, c, v| {
        if v.abs() > ZERO_THRESHOLD {
            b_rows[r].push(c);
        }
    });
    for row in a_rows.iter_mut().chain(b_rows.iter_mut()) {
        row.sort_unstable();
        row.dedup();
    }
    StructurePair { n, m, a_rows, b_rows }
}

/// Marks states reachable from any input along edges x_k → x_i (F_A(i,k))
/// and u_j → x_i (F_B(i,j)).
pub fn reachable_states(sp: &StructurePair) -> Vec<bool> {
    // Out-edges of each state: column k of F_A.
    let mut out = vec![Vec::new(); sp.n];
    for (i, row) in sp.a_rows.iter().enumerate() {
        for &k in row {
            out[k].push(i);
        }
    }
    let mut seen = vec![false; sp.n];
    let mut queue = VecDeque::new();
    for (i, row) in sp.b_rows.iter().enumerate() {
        if !row.is_empty() && !seen[i] {
            seen[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(k) = queue.pop_front() {
        for &i in &out[k] {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputConnectivity {
    pub connected: bool,
    /// Unreached states in increasing index order.
    pub unreachable: Vec<usize>,
}

impl InputConnectivity {
    pub fn labels(&self, index: &StateIndex) -> Vec<String> {
        self.unreachable.iter().map(|&s| String::from(index.label(s))).collect()
    }
}

pub fn is_input_connected(sp: &StructurePair) -> InputConnectivity {
    let seen = reachable_states(sp);
    let unreachable: Vec<usize> = (0..sp.n).filter(|&i| !seen[i]).collect();
    InputConnectivity { connected: unreachable.is_empty(), unreachable }
}

/// Maximum matching between the rows of [F_A F_B] in `rows` and its
/// columns for which `keep_column` holds (columns `0..n` are states,
/// `n..n+m` inputs).
fn restricted_rank(sp: &StructurePair, rows: &[bool], keep_column: impl Fn(usize) -> bool) -> usize {
    let mut adjacency = Vec::new();
    for i in 0..sp.n {
        if !rows[i] {
            continue;
        }
        let mut cols: Vec<usize> = sp.a_rows[i].iter().copied().filter(|&k| keep_column(k)).collect();
        cols.extend(sp.b_rows[i].iter().map(|&j| sp.n + j).filter(|&c| keep_column(c)));
        adjacency.push(cols);
    }
    hopcroft_karp(&adjacency, sp.n + sp.m).size
}

/// Structural rank of [F_A F_B].
pub fn s_rank(sp: &StructurePair) -> usize {
    restricted_rank(sp, &vec![true; sp.n], |_| true)
}

/// Input-connected and s-rank([F_A F_B]) = n.
pub fn is_structurally_controllable(sp: &StructurePair) -> bool {
    is_input_connected(sp).connected && s_rank(sp) == sp.n
}

/// Generic dimension of the reachable subspace: the structural rank of
/// [F_A F_B] restricted to reachable rows and to reachable-state plus input
/// columns.
pub fn dimsrs(sp: &StructurePair) -> usize {
    let reach = reachable_states(sp);
    restricted_rank(sp, &reach, |c| c >= sp.n || reach[c])
}

/// Convenience wrapper: binarize then test.
pub fn sc<PA, PB>(a: &PA, b: &PB) -> bool
where
    PA: NonzeroPattern + ?Sized,
    PB: NonzeroPattern + ?Sized,
{
    is_structurally_controllable(&binarize(a, b))
}
