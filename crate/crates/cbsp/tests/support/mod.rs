//! Test-only reference implementations. Nothing here calls the state-space
//! builder, the Gramian routines or the placement code; each oracle works
//! from the network description and plain dense linear algebra.

#![allow(dead_code)]

use cbsp_core::hydraulics::HydraulicProfile;
use cbsp_core::network::{LinkKind, NodeKind, Topology};
use cbsp_core::wq::StateKind;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Water-quality simulation, component by component.

const ZERO_FLOW: f64 = 1e-12;
const MAX_SEGMENTS: usize = 5000;

/// Straight-line upwind simulator. Pipe cells are kept in declared order
/// (cell 0 at the `from` end) whatever the flow direction.
pub struct Simulator<'a> {
    topo: &'a Topology,
    profile: &'a HydraulicProfile,
    dt: f64,
    per_step: usize,
    steps_done: usize,
    pub node: Vec<f64>,
    pub link: Vec<f64>,
    pub cells: Vec<Vec<f64>>,
    courant: Vec<f64>,
    reversed: Vec<bool>,
}

impl<'a> Simulator<'a> {
    pub fn new(topo: &'a Topology, profile: &'a HydraulicProfile, dt: f64) -> Self {
        let per_step = (profile.step() / dt).round() as usize;
        assert!((per_step as f64 * dt - profile.step()).abs() < 1e-9 * profile.step());
        Self {
            topo,
            profile,
            dt,
            per_step,
            steps_done: 0,
            node: vec![0.0; topo.nodes().len()],
            link: vec![0.0; topo.links().len()],
            cells: vec![Vec::new(); topo.links().len()],
            courant: vec![0.0; topo.links().len()],
            reversed: vec![false; topo.links().len()],
        }
    }

    pub fn time(&self) -> f64 {
        self.profile.start_time() + self.steps_done as f64 * self.dt
    }

    fn hydraulic_step(&self) -> usize {
        (self.steps_done / self.per_step).min(self.profile.step_count() - 1)
    }

    fn flow(&self, l: usize) -> f64 {
        let q = self.profile.snapshot(self.hydraulic_step()).flow(l);
        if q.abs() < ZERO_FLOW {
            0.0
        } else {
            q
        }
    }

    fn tank_volume(&self, tank: usize, t: f64) -> f64 {
        let snaps = self.profile.snapshots();
        let h = self.profile.step();
        let k = (((t - snaps[0].time()) / h + 1e-12).floor() as usize).min(snaps.len() - 1);
        let s = &snaps[k];
        let frac = (t - s.time()) / h;
        match snaps.get(k + 1) {
            Some(next) => s.volume(tank) + frac * (next.volume(tank) - s.volume(tank)),
            None => {
                let mut net = 0.0;
                for (l, _) in self.topo.links().iter().enumerate() {
                    let (from, to) = self.topo.endpoints(l);
                    if to == tank {
                        net += s.flow(l);
                    }
                    if from == tank {
                        net -= s.flow(l);
                    }
                }
                s.volume(tank) + net * (t - s.time())
            }
        }
    }

    /// Called at the start of every hydraulic step: re-segment pipes and
    /// carry their contents over by length-weighted averaging.
    fn resegment(&mut self) {
        for (l, link) in self.topo.links().iter().enumerate() {
            let Some(p) = link.pipe else { continue };
            let q = self.flow(l);
            let v = q.abs() / (std::f64::consts::PI * p.radius * p.radius);
            let (n, lambda) = if q == 0.0 {
                (1, 0.0)
            } else {
                let travel = v * self.dt;
                assert!(travel <= p.length, "oracle: pipe {} too short for the step", link.id);
                let n = ((p.length / travel * (1.0 + 1e-12)).floor() as usize).clamp(1, MAX_SEGMENTS);
                (n, (travel / (p.length / n as f64)).min(1.0))
            };
            self.courant[l] = lambda;
            self.reversed[l] = q < 0.0;
            let old = std::mem::take(&mut self.cells[l]);
            self.cells[l] = if old.is_empty() { vec![0.0; n] } else { average_onto(&old, n) };
        }
    }

    /// Concentration leaving link `l` at its downstream end.
    fn outlet(&self, l: usize, q: f64) -> f64 {
        match self.topo.link(l).kind {
            LinkKind::Pipe => {
                let c = &self.cells[l];
                if q > 0.0 {
                    c[c.len() - 1]
                } else {
                    c[0]
                }
            }
            _ => self.link[l],
        }
    }

    /// One water-quality step; `inject[i]` is added to node i afterwards.
    pub fn step(&mut self, inject: &[f64]) {
        if self.steps_done.is_multiple_of(self.per_step) {
            self.resegment();
        }
        let topo = self.topo;
        let dt = self.dt;
        let t = self.time();
        let snap = self.profile.snapshot(self.hydraulic_step());
        let kb = topo.bulk_rate();
        let mut node = self.node.clone();
        for (i, n) in topo.nodes().iter().enumerate() {
            let mut q_out = 0.0;
            let mut mass_in = 0.0;
            for (l, _) in topo.links().iter().enumerate() {
                let (from, to) = topo.endpoints(l);
                if from != i && to != i {
                    continue;
                }
                let q = self.flow(l);
                if q == 0.0 {
                    continue;
                }
                let upstream = if q > 0.0 { from } else { to };
                if upstream == i {
                    q_out += q.abs();
                } else {
                    mass_in += q.abs() * self.outlet(l, q);
                }
            }
            let c = self.node[i];
            node[i] = match n.kind {
                NodeKind::Reservoir => c,
                NodeKind::Junction => {
                    let d = snap.demand(i) + q_out;
                    if d < 1e-12 {
                        c
                    } else {
                        mass_in / d
                    }
                }
                NodeKind::Tank => {
                    let v0 = self.tank_volume(i, t);
                    let v1 = self.tank_volume(i, t + dt);
                    (v0 * c - q_out * dt * c - v0 * kb * dt * c + mass_in * dt) / v1
                }
            };
        }
        let mut link = self.link.clone();
        let mut cells = self.cells.clone();
        for (l, lk) in topo.links().iter().enumerate() {
            let q = self.flow(l);
            let (from, to) = topo.endpoints(l);
            let upstream = if q >= 0.0 { from } else { to };
            match lk.pipe {
                None => {
                    if q != 0.0 {
                        link[l] = self.node[upstream];
                    }
                }
                Some(p) => {
                    let kw = p.wall_coefficient;
                    let kf = p.mass_transfer;
                    let wall = if kw + kf > 0.0 { 2.0 * kw * kf / (p.radius * (kw + kf)) } else { 0.0 };
                    let decay = (kb + wall) * dt;
                    let lam = self.courant[l];
                    let old = &self.cells[l];
                    let n = old.len();
                    let new = &mut cells[l];
                    for j in 0..n {
                        // j counts from the upstream end of the current flow.
                        let here = if q >= 0.0 { j } else { n - 1 - j };
                        let feed = if j == 0 {
                            self.node[upstream]
                        } else if q >= 0.0 {
                            old[here - 1]
                        } else {
                            old[here + 1]
                        };
                        new[here] = (1.0 - lam - decay) * old[here] + lam * feed;
                    }
                }
            }
        }
        for (i, u) in inject.iter().enumerate() {
            node[i] += u;
        }
        self.node = node;
        self.link = link;
        self.cells = cells;
        self.steps_done += 1;
    }

    /// Value of a builder state, translating flow-ordered segment ordinals
    /// back to declared order using the flow of the last step taken.
    pub fn value(&self, kind: StateKind) -> f64 {
        match kind {
            StateKind::Node { node } => self.node[node],
            StateKind::Link { link } => self.link[link],
            StateKind::Segment { pipe, ordinal } => {
                let c = &self.cells[pipe];
                if self.reversed[pipe] {
                    c[c.len() - 1 - ordinal]
                } else {
                    c[ordinal]
                }
            }
        }
    }

    pub fn courant(&self, pipe: usize) -> f64 {
        self.courant[pipe]
    }
}

/// Piecewise-constant profile on `old.len()` equal cells averaged onto `m`.
pub fn average_onto(old: &[f64], m: usize) -> Vec<f64> {
    let n = old.len();
    (0..m)
        .map(|j| {
            let (a, b) = (j as f64 / m as f64, (j + 1) as f64 / m as f64);
            let mut acc = 0.0;
            for (i, c) in old.iter().enumerate() {
                let (lo, hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let overlap = b.min(hi) - a.max(lo);
                if overlap > 0.0 {
                    acc += overlap * c;
                }
            }
            acc * m as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense linear algebra.

pub fn dense(a: impl Iterator<Item = (usize, usize, f64)>, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (r, c, v) in a {
        m[(r, c)] += v;
    }
    m
}

/// C = [B, AB, …, A^{N−1}B] by repeated dense products.
pub fn krylov(a: &DMatrix<f64>, b: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let (n, m) = b.shape();
    let mut c = DMatrix::zeros(n, m * horizon);
    let mut x = b.clone();
    for tau in 0..horizon {
        c.columns_mut(tau * m, m).copy_from(&x);
        x = a * &x;
    }
    c
}

/// W = C Cᵀ.
pub fn explicit_gramian(a: &DMatrix<f64>, b: &DMatrix<f64>, horizon: usize) -> DMatrix<f64> {
    let c = krylov(a, b, horizon);
    &c * c.transpose()
}

/// Rank of `m` after normalizing its columns, by SVD with the usual
/// `max(rows, cols) · ε · σ_max` cut.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let mut m = m.clone();
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let sv = m.singular_values();
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * top;
    sv.iter().filter(|s| **s > tol).count()
}

pub fn unit_columns(n: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, rows.len());
    for (j, &r) in rows.iter().enumerate() {
        b[(r, j)] = 1.0;
    }
    b
}

/// log det(W + εI) − n log ε by Cholesky.
pub fn normalized_logdet(w: &DMatrix<f64>, eps: f64) -> f64 {
    let n = w.nrows();
    let m = w + DMatrix::identity(n, n) * eps;
    let l = m.cholesky().expect("regularized Gramian is positive definite").l();
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>() - n as f64 * eps.ln()
}

// ---------------------------------------------------------------------------
// Exhaustive placement.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    Trace,
    LogDet { eps: f64 },
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// f(S) from per-candidate Gramians.
pub fn set_value(grams: &[DMatrix<f64>], set: &[usize], objective: Objective) -> f64 {
    match objective {
        Objective::Trace => set.iter().map(|&i| grams[i].trace()).sum(),
        Objective::LogDet { eps } => {
            let n = grams[0].nrows();
            let mut w = DMatrix::zeros(n, n);
            for &i in set {
                w += &grams[i];
            }
            normalized_logdet(&w, eps)
        }
    }
}

/// Every k-subset with its value, in lexicographic order.
pub fn enumerate(grams: &[DMatrix<f64>], k: usize, objective: Objective) -> Vec<(Vec<usize>, f64)> {
    assert!(binomial(grams.len(), k) <= 1_000_000, "combinatorial budget exceeded");
    let mut out = Vec::new();
    let mut set: Vec<usize> = (0..k).collect();
    loop {
        out.push((set.clone(), set_value(grams, &set, objective)));
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if set[i] < grams.len() - k + i {
                set[i] += 1;
                for j in i + 1..k {
                    set[j] = set[j - 1] + 1;
                }
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random systems.

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense A scaled so its powers stay bounded, and dense B.
pub fn random_system(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let density = rng.random_range(0.1..=1.0);
    let scale = 1.0 / (n as f64).sqrt();
    let a = DMatrix::from_fn(n, n, |_, _| {
        if rng.random_bool(density) {
            rng.random_range(-1.0..1.0) * scale
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
    (a, b)
}

/// Block-diagonal system of weighted cycles with small in-block coupling.
/// Blocks without an input, duplicated blocks driven by a common input and
/// short horizons give exactly uncontrollable cases; the rest are
/// well-conditioned controllable ones.
pub fn cyclic_system(rng: &mut ChaCha8Rng, max_n: usize) -> (DMatrix<f64>, DMatrix<f64>, usize) {
    let n = rng.random_range(2..=max_n);
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = rng.random_range(1..=left.min(6));
        sizes.push(s);
        left -= s;
    }
    let mut a = DMatrix::zeros(n, n);
    let mut starts = Vec::new();
    let mut at = 0;
    let twin = sizes.len() >= 2 && sizes[0] == sizes[1] && rng.random_bool(0.5);
    let mut first_block: Option<DMatrix<f64>> = None;
    for (bi, &s) in sizes.iter().enumerate() {
        starts.push(at);
        let block = if twin && bi == 1 {
            first_block.clone().unwrap()
        } else {
            let mut blk = DMatrix::zeros(s, s);
            for i in 0..s {
                blk[((i + 1) % s, i)] = rng.random_range(0.8..1.25);
                if s > 2 && rng.random_bool(0.3) {
                    blk[(rng.random_range(0..s), rng.random_range(0..s))] += rng.random_range(-0.05..0.05);
                }
            }
            blk
        };
        if bi == 0 {
            first_block = Some(block.clone());
        }
        a.view_mut((at, at), (s, s)).copy_from(&block);
        at += s;
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (bi, &s) in sizes.iter().enumerate() {
        if twin && bi == 1 {
            continue;
        }
        if rng.random_bool(0.8) {
            let mut col = vec![0.0; n];
            col[starts[bi] + rng.random_range(0..s)] = rng.random_range(0.5..2.0);
            if twin && bi == 0 {
                for i in 0..s {
                    col[starts[1] + i] = col[starts[0] + i];
                }
            }
            cols.push(col);
        }
    }
    if cols.is_empty() {
        let mut col = vec![0.0; n];
        col[0] = 1.0;
        cols.push(col);
    }
    let b = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let horizon = if rng.random_bool(0.2) { rng.random_range(1..=n) } else { n + rng.random_range(0..=5) };
    (a, b, horizon)
}

/// Random nonzero pattern with `realize` filling it with values.
pub struct Pattern {
    pub n: usize,
    pub m: usize,
    pub a: Vec<(usize, usize)>,
    pub b: Vec<(usize, usize)>,
}

impl Pattern {
    pub fn random(rng: &mut ChaCha8Rng, max_n: usize) -> Self {
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(1..=3.min(n));
        let density = rng.random_range(0.05..0.35);
        let mut a = Vec::new();
        for i in 0..n {
            for k in 0..n {
                if rng.random_bool(density) {
                    a.push((i, k));
                }
            }
        }
        let mut b = Vec::new();
        for j in 0..m {
            b.push((rng.random_range(0..n), j));
            if rng.random_bool(0.3) {
                b.push((rng.random_range(0..n), j));
            }
        }
        b.sort();
        b.dedup();
        Self { n, m, a, b }
    }

    pub fn realize(&self, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut value = || {
            let v: f64 = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) {
                -v
            } else {
                v
            }
        };
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, k) in &self.a {
            a[(i, k)] = value();
        }
        let mut b = DMatrix::zeros(self.n, self.m);
        for &(i, j) in &self.b {
            b[(i, j)] = value();
        }
        (a, b)
    }
}

/// Generic controllability by the numerical rank of C over a few random
/// realizations of a pattern.
pub fn generically_controllable(p: &Pattern, rng: &mut ChaCha8Rng, realizations: usize) -> bool {
    (0..realizations).any(|_| {
        let (a, b) = p.realize(rng);
        numerical_rank(&krylov(&a, &b, p.n)) == p.n
    })
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

// ---------------------------------------------------------------------------
// Bundles and small networks.

/// Writes a fixture's shipped files into `dir`; returns the manifest path.
pub fn write_bundle(dir: &std::path::Path, f: &cbsp::fixtures::Fixture) -> std::path::PathBuf {
    let mut manifest = None;
    for (name, text) in cbsp::fixtures::bundle_files(f) {
        let path = dir.join(&name);
        std::fs::write(&path, text).unwrap();
        if name.ends_with(".json") {
            manifest = Some(path);
        }
    }
    manifest.expect("bundle has a manifest")
}

/// Two tanks joined through a junction pair and a loop with a valve; no
/// sources, no demand, no decay. `q[k]` is the flow leaving TK1 in hour k
/// (negative drains TK2 back into TK1).
pub fn closed_loop(q: &[f64]) -> (Topology, HydraulicProfile) {
    use cbsp_core::hydraulics::Snapshot;
    use cbsp_core::network::{Link, Node, PipeProperties};
    let topo = Topology::new(
        vec![
            Node::tank("TK1", 0.0, 1.0, 1e4),
            Node::junction("J1", 0.0),
            Node::junction("J2", 0.0),
            Node::junction("J3", 0.0),
            Node::tank("TK2", 0.0, 1.0, 1e4),
        ],
        vec![
            Link::pipe("P1", "TK1", "J1", PipeProperties::new(400.0, 0.1)),
            Link::pipe("P2", "J1", "J2", PipeProperties::new(250.0, 0.08)),
            Link::pipe("P3", "J2", "TK2", PipeProperties::new(300.0, 0.1)),
            Link::pipe("P4", "J1", "J3", PipeProperties::new(180.0, 0.06)),
            Link::valve("V1", "J3", "J2"),
        ],
        0.0,
    )
    .unwrap();
    let h = 3600.0;
    let mut v = (1000.0, 1000.0);
    let mut snaps = Vec::new();
    for (k, &qk) in q.iter().enumerate() {
        let split = 0.3 + 0.04 * (k % 5) as f64;
        let flow = vec![qk, qk * (1.0 - split), qk, qk * split, qk * split];
        snaps.push(Snapshot::new(&topo, k as f64 * h, flow, vec![0.0; 5], vec![v.0, 0.0, 0.0, 0.0, v.1]).unwrap());
        v = (v.0 - qk * h, v.1 + qk * h);
    }
    let profile = HydraulicProfile::new("loop", h, snaps).unwrap();
    (topo, profile)
}
