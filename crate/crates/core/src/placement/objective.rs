use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{sort_by_name, PlacementError};
use crate::controllability::{gramian, gramian_trace, logdet_epsilon, normalized_logdet, MetricKind};
use crate::network::{NodeId, Topology};
use crate::sparse::{columns_to_dense, SparseColumn};
use crate::structural::{binarize, dimsrs, is_structurally_controllable, StructurePair};
use crate::wq::{InputScaling, StateSpace};

/// Set function f(S) of one hydraulic step over a fixed candidate universe.
///
/// Trace: f(S) = trace W([B_exo B_S]), evaluated as a sum of per-column
/// traces. LogDet: f(S) = log det(εI + W_exo + Σ W_α) − n log ε with ε
/// fixed from the Gramian of the whole universe, which keeps f monotone
/// and submodular across the greedy iterations of one step.
#[derive(Clone, Debug)]
pub struct StepProblem {
    space: StateSpace,
    metric: MetricKind,
    horizon: usize,
    nodes: Vec<usize>,
    names: Vec<NodeId>,
    columns: Vec<SparseColumn>,
    exogenous: Vec<SparseColumn>,
    traces: Vec<f64>,
    exo_trace: f64,
    epsilon: Option<f64>,
    grams: Vec<DMatrix<f64>>,
    exo_gram: Option<DMatrix<f64>>,
}

impl StepProblem {
    /// `candidates` are node indices; they are reordered by name, and the
    /// indices accepted by the other methods refer to that order.
    pub fn new(
        topology: &Topology,
        space: StateSpace,
        candidates: &[usize],
        metric: MetricKind,
        scaling: InputScaling,
        horizon: usize,
    ) -> Result<Self, PlacementError> {
        let mut nodes = candidates.to_vec();
        sort_by_name(topology, &mut nodes);
        let n = space.n_states();
        let mut names = Vec::with_capacity(nodes.len());
        let mut columns = Vec::with_capacity(nodes.len());
        for &node in &nodes {
            let id = &topology.node(node).id;
            let col = space
                .input_column(node, scaling)
                .ok_or_else(|| PlacementError::OutOfScope(id.as_str().into()))?;
            names.push(id.clone());
            columns.push(col);
        }
        let exogenous: Vec<SparseColumn> = space.exogenous_inputs().iter().map(|e| e.column.clone()).collect();
        let exo_b = columns_to_dense(n, &exogenous.iter().collect::<Vec<_>>());

        let mut traces = Vec::with_capacity(columns.len());
        let mut grams = Vec::new();
        let mut exo_gram = None;
        let exo_trace;
        let mut epsilon = None;
        match metric {
            MetricKind::Trace => {
                for col in &columns {
                    traces.push(gramian_trace(space.a(), &columns_to_dense(n, &[col]), horizon)?);
                }
                exo_trace = if exogenous.is_empty() { 0.0 } else { gramian_trace(space.a(), &exo_b, horizon)? };
            }
            MetricKind::LogDet => {
                let mut total = DMatrix::zeros(n, n);
                for col in &columns {
                    let g = gramian(space.a(), &columns_to_dense(n, &[col]), horizon)?;
                    traces.push(g.trace());
                    total += &g.w;
                    grams.push(g.w);
                }
                let g = if exogenous.is_empty() { DMatrix::zeros(n, n) } else { gramian(space.a(), &exo_b, horizon)?.w };
                exo_trace = g.trace();
                total += &g;
                exo_gram = Some(g);
                epsilon = Some(logdet_epsilon(total.trace(), n));
            }
        }
        Ok(Self { space, metric, horizon, nodes, names, columns, exogenous, traces, exo_trace, epsilon, grams, exo_gram })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    /// Topology node index of candidate `i`.
    pub fn node(&self, i: usize) -> usize {
        self.nodes[i]
    }

    pub fn candidate(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.as_str() == name)
    }

    pub fn column(&self, i: usize) -> &SparseColumn {
        &self.columns[i]
    }

    /// Log-det regularization used for this step.
    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    /// trace W(A, b_i) of a single candidate.
    pub fn single_trace(&self, i: usize) -> f64 {
        self.traces[i]
    }

    pub fn exogenous_count(&self) -> usize {
        self.exogenous.len()
    }

    /// f(S) for a set of candidate indices.
    pub fn value(&self, set: &[usize]) -> Result<f64, PlacementError> {
        match self.metric {
            MetricKind::Trace => Ok(self.exo_trace + set.iter().map(|&i| self.traces[i]).sum::<f64>()),
            MetricKind::LogDet => {
                let base = self.base_gramian(set);
                self.logdet(&base, None)
            }
        }
    }

    /// W_exo + Σ_{i ∈ set} W_i (log-det problems only).
    pub(crate) fn base_gramian(&self, set: &[usize]) -> DMatrix<f64> {
        let mut w = self.exo_gram.clone().expect("log-det problem");
        for &i in set {
            w += &self.grams[i];
        }
        w
    }

    /// Normalized log-det of `base` (+ W_extra).
    pub(crate) fn logdet(&self, base: &DMatrix<f64>, extra: Option<usize>) -> Result<f64, PlacementError> {
        let eps = self.epsilon.expect("log-det problem");
        let v = match extra {
            Some(i) => normalized_logdet(&(base + &self.grams[i]), eps)?,
            None => normalized_logdet(base, eps)?,
        };
        Ok(v)
    }

    /// Structure of (A, [B_exo B_S]).
    pub fn structure(&self, set: &[usize]) -> StructurePair {
        let mut cols: Vec<SparseColumn> = self.exogenous.clone();
        cols.extend(set.iter().map(|&i| self.columns[i].clone()));
        if cols.is_empty() {
            cols.push(SparseColumn::new(self.space.n_states(), vec![]));
        }
        binarize(self.space.a(), &cols)
    }

    pub fn sc(&self, set: &[usize]) -> bool {
        is_structurally_controllable(&self.structure(set))
    }

    pub fn dimsrs(&self, set: &[usize]) -> usize {
        dimsrs(&self.structure(set))
    }
}
