//! Gaussian belief propagation on the radix-2 FFT factor graph.
//!
//! The graph has `log2 N` stages of `N/2` butterfly nodes. Edges are laid out
//! in `log2 N + 1` layers of `N` positions: layer 0 carries the time-domain
//! components in bit-reversed order, layer `log2 N` the frequency-domain
//! components in natural order. The butterfly of stage `s` joins positions
//! `p` and `p + 2^(s-1)` of layers `s-1` and `s`.
//!
//! Every directed edge carries a 2x2 real Gaussian message in moment form.

use num_complex::Complex64;

use crate::dft::{is_power_of_two, twiddle, DiagonalSiteSet, Domain};
use crate::error::{Error, Result};
use crate::gaussian::{
    is_positive_semidefinite, CanonGauss2, ComplexScalar, Mat2, MomentGauss2, RealVec2,
};

/// Stand-in variance for "no information".
pub const V_LARGE: f64 = 1e12;

/// Default relative convergence tolerance on message parameters.
pub const TAU_CONV: f64 = 1e-5;

/// `omega_n^k = exp(-j 2 pi k / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Twiddle {
    pub n: usize,
    pub k: usize,
}

impl Twiddle {
    pub fn value(self) -> ComplexScalar {
        twiddle(self.n, self.k)
    }
}

/// Position of an edge in the layered layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeId {
    pub layer: usize,
    pub pos: usize,
}

/// `y0 = x0 + w x1`, `y1 = x0 - w x1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ButterflyNode {
    pub stage: usize,
    pub index: usize,
    pub twiddle: Twiddle,
    /// `twiddle.value()`, cached.
    pub omega: ComplexScalar,
    pub x0: EdgeId,
    pub x1: EdgeId,
    pub y0: EdgeId,
    pub y1: EdgeId,
}

impl ButterflyNode {
    /// The 2x2 complex map from `(x0, x1)` to `(y0, y1)`.
    pub fn forward_map(&self) -> [[ComplexScalar; 2]; 2] {
        let w = self.omega;
        let one = Complex64::new(1.0, 0.0);
        [[one, w], [one, -w]]
    }

    /// The 2x2 complex map from `(y0, y1)` back to `(x0, x1)`.
    pub fn backward_map(&self) -> [[ComplexScalar; 2]; 2] {
        let w = self.omega.conj() * 0.5;
        let half = Complex64::new(0.5, 0.0);
        [[half, half], [w, -w]]
    }
}

#[derive(Clone, Debug)]
pub struct FftGraph {
    n: usize,
    stages: usize,
    nodes: Vec<ButterflyNode>,
}

/// Reverse the lowest `bits` binary digits of `i`.
pub fn bit_reverse(i: usize, bits: u32) -> usize {
    debug_assert!(bits == usize::BITS || i < (1usize << bits));
    if bits == 0 {
        return 0;
    }
    i.reverse_bits() >> (usize::BITS - bits)
}

/// Wire up the radix-2 decimation-in-time graph for `n = 2^m`, `m >= 1`.
pub fn build_graph(n: usize) -> Result<FftGraph> {
    if n < 2 || !is_power_of_two(n) {
        return Err(Error::NotPowerOfTwo(n));
    }
    let stages = n.trailing_zeros() as usize;
    let mut nodes = Vec::with_capacity(n / 2 * stages);
    for stage in 1..=stages {
        let half = 1 << (stage - 1);
        let span = half * 2;
        let mut index = 0;
        for start in (0..n).step_by(span) {
            for j in 0..half {
                let (p0, p1) = (start + j, start + j + half);
                nodes.push(ButterflyNode {
                    stage,
                    index,
                    twiddle: Twiddle { n: span, k: j },
                    omega: twiddle(span, j),
                    x0: EdgeId {
                        layer: stage - 1,
                        pos: p0,
                    },
                    x1: EdgeId {
                        layer: stage - 1,
                        pos: p1,
                    },
                    y0: EdgeId {
                        layer: stage,
                        pos: p0,
                    },
                    y1: EdgeId {
                        layer: stage,
                        pos: p1,
                    },
                });
                index += 1;
            }
        }
    }
    Ok(FftGraph { n, stages, nodes })
}

impl FftGraph {
    pub fn size(&self) -> usize {
        self.n
    }

    /// `log2 N`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn nodes(&self) -> &[ButterflyNode] {
        &self.nodes
    }

    /// Nodes of stage `s` (1-based).
    pub fn stage(&self, s: usize) -> &[ButterflyNode] {
        let per = self.n / 2;
        &self.nodes[(s - 1) * per..s * per]
    }

    /// BP iterations in one layered sweep.
    pub fn bp_per_layered(&self) -> usize {
        2 * self.stages - 1
    }

    /// Edge carrying time component `n`.
    pub fn time_edge(&self, n: usize) -> EdgeId {
        EdgeId {
            layer: 0,
            pos: bit_reverse(n, self.stages as u32),
        }
    }

    /// Edge carrying frequency component `k`.
    pub fn freq_edge(&self, k: usize) -> EdgeId {
        EdgeId {
            layer: self.stages,
            pos: k,
        }
    }

    /// Push point values through the graph without any uncertainty.
    pub fn transform(&self, x: &[ComplexScalar]) -> Result<Vec<ComplexScalar>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut layer: Vec<ComplexScalar> = (0..self.n)
            .map(|p| x[bit_reverse(p, self.stages as u32)])
            .collect();
        for s in 1..=self.stages {
            let mut next = layer.clone();
            for node in self.stage(s) {
                let t = node.forward_map();
                let (a, b) = (layer[node.x0.pos], layer[node.x1.pos]);
                next[node.y0.pos] = t[0][0] * a + t[0][1] * b;
                next[node.y1.pos] = t[1][0] * a + t[1][1] * b;
            }
            layer = next;
        }
        Ok(layer)
    }

    fn index(&self, e: EdgeId) -> usize {
        e.layer * self.n + e.pos
    }
}

/// Messages in both directions on one edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeState {
    /// Toward the frequency side.
    pub forward: MomentGauss2,
    /// Toward the time side.
    pub backward: MomentGauss2,
}

impl EdgeState {
    pub fn belief(&self, v_large: f64) -> MomentGauss2 {
        self.forward
            .fuse(&self.backward)
            .unwrap_or(MomentGauss2::flat(v_large))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Schedule {
    #[default]
    Flooding,
    Layered,
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Schedule::Flooding => "flooding",
            Schedule::Layered => "layered",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub bp_iterations: usize,
    /// `bp_iterations / (2 log2 N - 1)`.
    pub layered_iterations: f64,
    /// Largest relative parameter change at each convergence check.
    pub delta_trace: Vec<f64>,
}

fn embed(z: ComplexScalar) -> Mat2 {
    Mat2::from_complex(z)
}

fn sanitize(m: MomentGauss2, node: &ButterflyNode) -> Result<MomentGauss2> {
    let cov = m.cov.symmetrize().project_psd();
    let out = MomentGauss2::new(m.mean, cov);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NonFiniteMessage {
            stage: node.stage,
            node: node.index,
        })
    }
}

/// Extrinsic messages for the destination side of `v = T u`, given the
/// joint moments of `v` induced by the source messages: means, diagonal
/// blocks `p00`, `p11` and cross block `p01`. Output `i` conditions `v_i`
/// on the opposite message of `v_(1-i)`.
fn condition_pair(
    mean: [RealVec2; 2],
    p00: Mat2,
    p11: Mat2,
    p01: Mat2,
    opp: [&MomentGauss2; 2],
    node: &ButterflyNode,
) -> Result<[MomentGauss2; 2]> {
    let p10 = p01.transpose();
    let condition = |prior_mean: RealVec2,
                     prior_cov: Mat2,
                     other_mean: RealVec2,
                     other_cov: Mat2,
                     to_other: Mat2,
                     obs: &MomentGauss2|
     -> Result<MomentGauss2> {
        let s = (other_cov + obs.cov).symmetrize();
        let s_inv = s.inverse().ok_or(Error::NonFiniteMessage {
            stage: node.stage,
            node: node.index,
        })?;
        let gain = to_other * s_inv;
        let mean = prior_mean + gain * (obs.mean - other_mean);
        let cov = prior_cov - gain * to_other.transpose();
        sanitize(MomentGauss2::new(mean, cov), node)
    };
    let out1 = condition(mean[1], p11, mean[0], p00, p10, opp[0])?;
    let out0 = condition(mean[0], p00, mean[1], p11, p01, opp[1])?;
    Ok([out0, out1])
}

/// Stage-`s` forward update: new messages on `(y0, y1)` toward the
/// frequency side.
pub fn butterfly_forward(
    node: &ButterflyNode,
    nu_x0: &MomentGauss2,
    nu_x1: &MomentGauss2,
    nu_y0: &MomentGauss2,
    nu_y1: &MomentGauss2,
) -> Result<(MomentGauss2, MomentGauss2)> {
    // y0 = x0 + w x1, y1 = x0 - w x1 with w a rotation.
    let r = embed(node.omega);
    let m1 = r * nu_x1.mean;
    let c1 = nu_x1.cov.congruence(r);
    let sum = (nu_x0.cov + c1).symmetrize();
    let diff = (nu_x0.cov - c1).symmetrize();
    let mean = [nu_x0.mean + m1, nu_x0.mean - m1];
    let [a, b] = condition_pair(mean, sum, sum, diff, [nu_y0, nu_y1], node)?;
    Ok((a, b))
}

/// Stage-`s` backward update: new messages on `(x0, x1)` toward the time
/// side.
pub fn butterfly_backward(
    node: &ButterflyNode,
    nu_x0: &MomentGauss2,
    nu_x1: &MomentGauss2,
    nu_y0: &MomentGauss2,
    nu_y1: &MomentGauss2,
) -> Result<(MomentGauss2, MomentGauss2)> {
    // x0 = (y0 + y1) / 2, x1 = conj(w) (y0 - y1) / 2.
    let r = embed(node.omega.conj());
    let mean = [
        (nu_y0.mean + nu_y1.mean) * 0.5,
        r * ((nu_y0.mean - nu_y1.mean) * 0.5),
    ];
    let p00 = ((nu_y0.cov + nu_y1.cov) * 0.25).symmetrize();
    let p11 = p00.congruence(r).symmetrize();
    let p01 = (nu_y0.cov - nu_y1.cov) * 0.25 * r.transpose();
    let [a, b] = condition_pair(mean, p00, p11, p01, [nu_x0, nu_x1], node)?;
    Ok((a, b))
}

/// Message standing in for a boundary site. Rank-deficient sites are
/// regularized by `1 / v_large`; indefinite ones become flat.
pub fn site_message(site: &CanonGauss2, v_large: f64) -> MomentGauss2 {
    if let Ok(m) = site.to_moment() {
        return m;
    }
    if site.prec.sym_eigenvalues().0 >= 0.0 {
        let reg = CanonGauss2::new(site.info, site.prec + Mat2::scalar(1.0 / v_large));
        if let Ok(m) = reg.to_moment() {
            return m;
        }
    }
    MomentGauss2::flat(v_large)
}

fn rel_delta(new: &MomentGauss2, old: &MomentGauss2) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..2 {
        let d = (new.mean[i] - old.mean[i]).abs() / (1.0 + old.mean[i].abs());
        worst = worst.max(d);
        for j in 0..2 {
            let d = (new.cov[(i, j)] - old.cov[(i, j)]).abs() / (1.0 + old.cov[(i, j)].abs());
            worst = worst.max(d);
        }
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}

/// Beliefs and convergence information of one GaBP run.
#[derive(Clone, Debug)]
pub struct GabpOutput {
    pub time: Vec<MomentGauss2>,
    pub freq: Vec<MomentGauss2>,
    pub report: ConvergenceReport,
}

impl GabpOutput {
    /// Turn a run that hit the iteration cap into an error.
    pub fn ensure_converged(self) -> Result<Self> {
        if self.report.converged {
            Ok(self)
        } else {
            Err(Error::MaxItersExceeded {
                iterations: self.report.bp_iterations,
            })
        }
    }
}

/// GaBP run parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GabpConfig {
    pub schedule: Schedule,
    pub max_layered_iters: usize,
    pub tau_conv: f64,
    pub v_large: f64,
}

impl Default for GabpConfig {
    fn default() -> Self {
        GabpConfig {
            schedule: Schedule::Flooding,
            max_layered_iters: 100,
            tau_conv: TAU_CONV,
            v_large: V_LARGE,
        }
    }
}

/// Message store of one graph. Persisting it between runs gives warm
/// starts.
#[derive(Clone, Debug)]
pub struct GabpState {
    graph: FftGraph,
    v_large: f64,
    forward: Vec<MomentGauss2>,
    backward: Vec<MomentGauss2>,
    psd_violations: usize,
}

impl GabpState {
    /// All messages flat.
    pub fn new(graph: FftGraph, v_large: f64) -> Self {
        let len = (graph.stages + 1) * graph.n;
        let flat = MomentGauss2::flat(v_large);
        GabpState {
            graph,
            v_large,
            forward: vec![flat; len],
            backward: vec![flat; len],
            psd_violations: 0,
        }
    }

    pub fn graph(&self) -> &FftGraph {
        &self.graph
    }

    /// Fix the boundary messages to the given sites.
    pub fn set_sites(&mut self, time: &DiagonalSiteSet, freq: &DiagonalSiteSet) -> Result<()> {
        let n = self.graph.n;
        if time.domain != Domain::Time || freq.domain != Domain::Frequency {
            return Err(Error::InvalidConfig(
                "expected time sites first and frequency sites second".into(),
            ));
        }
        for set in [time, freq] {
            if set.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: set.len(),
                });
            }
        }
        for (i, site) in time.sites.iter().enumerate() {
            let e = self.graph.index(self.graph.time_edge(i));
            self.forward[e] = site_message(site, self.v_large);
        }
        for (k, site) in freq.sites.iter().enumerate() {
            let e = self.graph.index(self.graph.freq_edge(k));
            self.backward[e] = site_message(site, self.v_large);
        }
        Ok(())
    }

    pub fn edge(&self, e: EdgeId) -> EdgeState {
        let i = self.graph.index(e);
        EdgeState {
            forward: self.forward[i],
            backward: self.backward[i],
        }
    }

    /// Update the given nodes, reading from `(src_f, src_b)` and writing to
    /// `(self.forward, self.backward)`. Returns the largest relative change
    /// of a written message.
    ///
    /// Within one stage no node reads what another writes, so in-place
    /// updates (`src` = current store) equal a synchronous update.
    fn update_nodes(
        &mut self,
        nodes: std::ops::Range<usize>,
        fwd: bool,
        bwd: bool,
        src: Option<(&[MomentGauss2], &[MomentGauss2])>,
    ) -> Result<f64> {
        let n = self.graph.n;
        let mut delta = 0.0f64;
        let mut bad = 0usize;
        let mut write =
            |store: &mut [MomentGauss2], i: usize, m: MomentGauss2, old: &MomentGauss2| {
                delta = delta.max(rel_delta(&m, old));
                if !is_positive_semidefinite(m.cov) {
                    bad += 1;
                }
                store[i] = m;
            };
        for node in &self.graph.nodes[nodes] {
            let at = |e: EdgeId| e.layer * n + e.pos;
            let (x0, x1, y0, y1) = (at(node.x0), at(node.x1), at(node.y0), at(node.y1));
            let (sf, sb) = src.unwrap_or((&self.forward, &self.backward));
            let (nx0, nx1, ny0, ny1) = (sf[x0], sf[x1], sb[y0], sb[y1]);
            let (of0, of1, ob0, ob1) = (sf[y0], sf[y1], sb[x0], sb[x1]);
            if fwd {
                let (a, b) = butterfly_forward(node, &nx0, &nx1, &ny0, &ny1)?;
                write(&mut self.forward, y0, a, &of0);
                write(&mut self.forward, y1, b, &of1);
            }
            if bwd {
                let (a, b) = butterfly_backward(node, &nx0, &nx1, &ny0, &ny1)?;
                write(&mut self.backward, x0, a, &ob0);
                write(&mut self.backward, x1, b, &ob1);
            }
        }
        self.psd_violations += bad;
        Ok(delta)
    }

    /// Number of updated message covariances that left the PSD cone.
    pub fn psd_violations(&self) -> usize {
        self.psd_violations
    }

    fn layered_sweep(&mut self) -> Result<f64> {
        let m = self.graph.stages;
        let per = self.graph.n / 2;
        let stage = |s: usize| (s - 1) * per..s * per;
        let mut delta = 0.0f64;
        for s in 1..m {
            delta = delta.max(self.update_nodes(stage(s), true, false, None)?);
        }
        delta = delta.max(self.update_nodes(stage(m), true, true, None)?);
        for s in (1..m).rev() {
            delta = delta.max(self.update_nodes(stage(s), false, true, None)?);
        }
        Ok(delta)
    }

    /// One synchronous update of every node. `spare` holds a copy of the
    /// boundary messages; it swaps roles with the store each step, and
    /// every internal message is rewritten.
    fn flooding_step(&mut self, spare: &mut (Vec<MomentGauss2>, Vec<MomentGauss2>)) -> Result<f64> {
        std::mem::swap(&mut self.forward, &mut spare.0);
        std::mem::swap(&mut self.backward, &mut spare.1);
        let all = 0..self.graph.nodes.len();
        self.update_nodes(all, true, true, Some((&spare.0, &spare.1)))
    }

    /// Iterate until convergence or until the budget of
    /// `max_layered_iters` layered sweeps (or the same number of BP
    /// iterations under flooding) is spent.
    ///
    /// The change measured per iteration covers every message written in
    /// it, i.e. all internal messages and the outgoing boundary messages.
    pub fn run(&mut self, cfg: &GabpConfig) -> Result<ConvergenceReport> {
        if cfg.max_layered_iters == 0 {
            return Err(Error::InvalidConfig(
                "max_layered_iters must be at least 1".into(),
            ));
        }
        let per = self.graph.bp_per_layered();
        let mut trace = Vec::new();
        let mut bp = 0;
        let mut converged = false;
        match cfg.schedule {
            Schedule::Flooding => {
                let mut spare = (self.forward.clone(), self.backward.clone());
                while bp < cfg.max_layered_iters * per {
                    let d = self.flooding_step(&mut spare)?;
                    bp += 1;
                    trace.push(d);
                    if d <= cfg.tau_conv {
                        converged = true;
                        break;
                    }
                }
            }
            Schedule::Layered => {
                for _ in 0..cfg.max_layered_iters {
                    let d = self.layered_sweep()?;
                    bp += per;
                    trace.push(d);
                    if d <= cfg.tau_conv {
                        converged = true;
                        break;
                    }
                }
            }
        }
        Ok(ConvergenceReport {
            converged,
            bp_iterations: bp,
            layered_iterations: bp as f64 / per as f64,
            delta_trace: trace,
        })
    }

    /// Beliefs on all boundary edges, both in natural order.
    pub fn beliefs(&self) -> (Vec<MomentGauss2>, Vec<MomentGauss2>) {
        let g = &self.graph;
        let time = (0..g.n)
            .map(|i| self.edge(g.time_edge(i)).belief(self.v_large))
            .collect();
        let freq = (0..g.n)
            .map(|k| self.edge(g.freq_edge(k)).belief(self.v_large))
            .collect();
        (time, freq)
    }
}

/// Beliefs on every boundary edge of a graph with populated messages.
pub fn compute_beliefs(state: &GabpState) -> (Vec<MomentGauss2>, Vec<MomentGauss2>) {
    state.beliefs()
}

/// Cold-start GaBP with the given sites as boundary factors.
///
/// Hitting the iteration cap is not an error here: the best-effort beliefs
/// come back with `report.converged == false`. See
/// [`GabpOutput::ensure_converged`].
pub fn run_gabp(
    graph: &FftGraph,
    time_sites: &DiagonalSiteSet,
    freq_sites: &DiagonalSiteSet,
    cfg: &GabpConfig,
) -> Result<GabpOutput> {
    let mut state = GabpState::new(graph.clone(), cfg.v_large);
    state.set_sites(time_sites, freq_sites)?;
    let report = state.run(cfg)?;
    let (time, freq) = state.beliefs();
    Ok(GabpOutput { time, freq, report })
}
