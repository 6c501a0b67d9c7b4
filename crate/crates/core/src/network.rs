//! Symmetric doubly stochastic mixing matrices, the random processes that
//! produce them, and the spectral quantities the bounds depend on.

use std::borrow::Cow;
use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{dot, norm, SquareMatrix};

/// Tolerance for symmetry, row sums, and probability sums.
pub const MATRIX_TOL: f64 = 1e-12;
/// Off-diagonal weights above this count as edges when checking connectivity.
pub const EDGE_THRESHOLD: f64 = 1e-12;

pub const SIGMA2_REL_TOL: f64 = 1e-10;
pub const SIGMA2_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("matrix is empty or not square")]
    NotSquare,
    #[error("entry ({i}, {j}) = {value} is negative or not finite")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("row {row} sums to {sum}, expected 1")]
    BadRowSum { row: usize, sum: f64 },
    #[error("edge ({0}, {0}) is a self-loop")]
    SelfLoop(usize),
    #[error("edge ({i}, {j}) references an agent outside 0..{n}")]
    VertexOutOfRange { i: usize, j: usize, n: usize },
    #[error("agent {0} has no neighbors; gossip cannot pick a partner")]
    IsolatedAgent(usize),
    #[error("support probabilities must be positive and sum to 1 (got {0})")]
    BadProbabilities(f64),
    #[error("finite-support process has no matrices")]
    EmptySupport,
    #[error("dimension mismatch: expected {expected} agents, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expected network is not connected")]
    NotConnected,
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Nonnegative, symmetric, row-stochastic (hence doubly stochastic) weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MixingMatrix(SquareMatrix);

impl MixingMatrix {
    pub fn new(matrix: SquareMatrix) -> Result<Self, NetworkError> {
        let n = matrix.dim();
        if n < 2 {
            return Err(NetworkError::TooFewAgents(n));
        }
        for i in 0..n {
            for j in 0..n {
                let value = matrix[(i, j)];
                if !value.is_finite() || value < 0.0 {
                    return Err(NetworkError::NegativeEntry { i, j, value });
                }
                if j > i && (value - matrix[(j, i)]).abs() > MATRIX_TOL {
                    return Err(NetworkError::NotSymmetric { i, j });
                }
            }
            let sum: f64 = matrix.row(i).iter().sum();
            if (sum - 1.0).abs() > MATRIX_TOL {
                return Err(NetworkError::BadRowSum { row: i, sum });
            }
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NetworkError> {
        Self::new(SquareMatrix::from_rows(rows).ok_or(NetworkError::NotSquare)?)
    }

    pub fn identity(n: usize) -> Self {
        Self(SquareMatrix::identity(n))
    }

    /// `(1/n) 𝟙𝟙ᵀ`, the perfect-averaging matrix.
    pub fn averaging(n: usize) -> Self {
        Self(SquareMatrix::uniform(n))
    }

    /// `I − ½ (e_i − e_j)(e_i − e_j)ᵀ`: agents `i` and `j` replace their
    /// values by the pair average, everyone else keeps theirs.
    pub fn pairwise_averaging(n: usize, i: usize, j: usize) -> Self {
        let mut m = SquareMatrix::identity(n);
        m[(i, i)] = 0.5;
        m[(j, j)] = 0.5;
        m[(i, j)] = 0.5;
        m[(j, i)] = 0.5;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }
}

/// Undirected simple graph on agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    #[serde(skip)]
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Edges are unordered; duplicates collapse.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, NetworkError> {
        if n < 2 {
            return Err(NetworkError::TooFewAgents(n));
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(NetworkError::VertexOutOfRange { i, j, n });
            }
            if i == j {
                return Err(NetworkError::SelfLoop(i));
            }
            set.insert((i.min(j), i.max(j)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: set,
            neighbors,
        })
    }

    pub fn path(n: usize) -> Result<Self, NetworkError> {
        Self::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn cycle(n: usize) -> Result<Self, NetworkError> {
        if n < 3 {
            return Self::path(n);
        }
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self, NetworkError> {
        Self::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
    }

    pub fn star(n: usize) -> Result<Self, NetworkError> {
        Self::new(n, (1..n).map(|i| (0, i)))
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    fn first_isolated(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.degree(i) == 0)
    }
}

/// Metropolis weights: edge `(i, j)` gets `1 / (1 + max(deg i, deg j))` and
/// the diagonal takes what is left of each row.
pub fn metropolis_matrix(g: &Graph) -> MixingMatrix {
    let n = g.num_agents();
    let mut m = SquareMatrix::zeros(n);
    for (i, j) in g.edges() {
        let w = 1.0 / (1 + g.degree(i).max(g.degree(j))) as f64;
        m[(i, j)] = w;
        m[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        m[(i, i)] = 1.0 - off;
    }
    MixingMatrix(m)
}

/// One gossip round: a uniformly chosen agent averages with a uniformly
/// chosen neighbor.
pub fn gossip_draw(g: &Graph, rng: &mut impl Rng) -> Result<MixingMatrix, NetworkError> {
    if let Some(i) = g.first_isolated() {
        return Err(NetworkError::IsolatedAgent(i));
    }
    Ok(gossip_draw_unchecked(g, rng))
}

fn gossip_draw_unchecked(g: &Graph, rng: &mut impl Rng) -> MixingMatrix {
    let n = g.num_agents();
    let i = rng.gen_range(0..n);
    let nbrs = g.neighbors(i);
    let j = nbrs[rng.gen_range(0..nbrs.len())];
    MixingMatrix::pairwise_averaging(n, i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Fixed { matrix: MixingMatrix },
    Gossip { graph: Graph },
    FiniteSupport { support: Vec<(MixingMatrix, f64)> },
}

/// A stationary distribution over mixing matrices, sampled i.i.d. per step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkProcess {
    kind: ProcessKind,
    n: usize,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl NetworkProcess {
    /// Validates the process and requires connectivity in expectation.
    pub fn new(kind: ProcessKind) -> Result<Self, NetworkError> {
        let process = Self::without_connectivity_check(kind)?;
        if !check_expected_connectivity(&process) {
            return Err(NetworkError::NotConnected);
        }
        Ok(process)
    }

    /// Structural validation only, for inspecting networks whose expectation may be disconnected.
    pub fn without_connectivity_check(kind: ProcessKind) -> Result<Self, NetworkError> {
        let (n, cumulative) = match &kind {
            ProcessKind::Fixed { matrix } => (matrix.dim(), Vec::new()),
            ProcessKind::Gossip { graph } => {
                if let Some(i) = graph.first_isolated() {
                    return Err(NetworkError::IsolatedAgent(i));
                }
                (graph.num_agents(), Vec::new())
            }
            ProcessKind::FiniteSupport { support } => {
                let first = support.first().ok_or(NetworkError::EmptySupport)?;
                let n = first.0.dim();
                let mut cumulative = Vec::with_capacity(support.len());
                let mut acc = 0.0;
                for (m, p) in support {
                    if m.dim() != n {
                        return Err(NetworkError::DimensionMismatch {
                            expected: n,
                            got: m.dim(),
                        });
                    }
                    if !(p.is_finite() && *p > 0.0) {
                        return Err(NetworkError::BadProbabilities(*p));
                    }
                    acc += p;
                    cumulative.push(acc);
                }
                if (acc - 1.0).abs() > MATRIX_TOL {
                    return Err(NetworkError::BadProbabilities(acc));
                }
                (n, cumulative)
            }
        };
        Ok(Self {
            kind,
            n,
            cumulative,
        })
    }

    pub fn fixed(matrix: MixingMatrix) -> Result<Self, NetworkError> {
        Self::new(ProcessKind::Fixed { matrix })
    }

    pub fn gossip(graph: Graph) -> Result<Self, NetworkError> {
        Self::new(ProcessKind::Gossip { graph })
    }

    pub fn finite_support(support: Vec<(MixingMatrix, f64)>) -> Result<Self, NetworkError> {
        Self::new(ProcessKind::FiniteSupport { support })
    }

    pub fn kind(&self) -> &ProcessKind {
        &self.kind
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self.kind, ProcessKind::Fixed { .. })
    }

    /// Draws `W(t)`. Fixed processes consume no randomness.
    pub fn draw(&self, rng: &mut impl Rng) -> Cow<'_, MixingMatrix> {
        match &self.kind {
            ProcessKind::Fixed { matrix } => Cow::Borrowed(matrix),
            ProcessKind::Gossip { graph } => Cow::Owned(gossip_draw_unchecked(graph, rng)),
            ProcessKind::FiniteSupport { support } => {
                let u: f64 = rng.gen();
                let idx = self
                    .cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(support.len() - 1);
                Cow::Borrowed(&support[idx].0)
            }
        }
    }
}

/// `W = E[W(t)]`, exact for every process kind.
pub fn expected_matrix(p: &NetworkProcess) -> MixingMatrix {
    match &p.kind {
        ProcessKind::Fixed { matrix } => matrix.clone(),
        ProcessKind::FiniteSupport { support } => {
            let mut acc = SquareMatrix::zeros(p.n);
            for (m, prob) in support {
                acc.scale_add(*prob, m.matrix());
            }
            MixingMatrix(acc)
        }
        ProcessKind::Gossip { graph } => {
            let n = p.n;
            let nf = n as f64;
            let mut m = SquareMatrix::identity(n);
            for (i, j) in graph.edges() {
                // P(pair {i,j}) = P(pick i)P(j | i) + P(pick j)P(i | j)
                let q = (1.0 / graph.degree(i) as f64 + 1.0 / graph.degree(j) as f64) / nf;
                let h = 0.5 * q;
                m[(i, i)] -= h;
                m[(j, j)] -= h;
                m[(i, j)] += h;
                m[(j, i)] += h;
            }
            MixingMatrix(m)
        }
    }
}

/// Breadth-first reachability over entries above [`EDGE_THRESHOLD`].
pub fn is_connected(w: &SquareMatrix) -> bool {
    let n = w.dim();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if !seen[j] && j != i && w[(i, j)] > EDGE_THRESHOLD {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// Whether the expected matrix links every pair of agents by some path.
pub fn check_expected_connectivity(p: &NetworkProcess) -> bool {
    is_connected(expected_matrix(p).matrix())
}

fn centered_apply(w: &SquareMatrix, x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    w.matvec(x).into_iter().map(|v| v - mean).collect()
}

/// Second-largest singular value of a mixing matrix.
///
/// Computed as the spectral norm of `W − (1/n)𝟙𝟙ᵀ` by power iteration on its
/// square, stopping once the eigen-residual is within [`SIGMA2_REL_TOL`] of
/// the iterate norm.
pub fn sigma2(w: &MixingMatrix) -> Result<f64, NetworkError> {
    let m = w.matrix();
    let n = m.dim();
    // Deterministic start with no special symmetry: fractional parts of
    // multiples of the golden ratio, projected off 𝟙.
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let mut x: Vec<f64> = (1..=n).map(|j| (j as f64 * GOLDEN).fract() - 0.5).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);

    for _ in 0..SIGMA2_MAX_ITER {
        let y = centered_apply(m, &centered_apply(m, &x));
        let ny = norm(&y);
        if ny <= f64::MIN_POSITIVE {
            return Ok(0.0);
        }
        let lambda = dot(&x, &y);
        let residual = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= SIGMA2_REL_TOL * ny {
            return Ok(lambda.max(0.0).sqrt().min(1.0));
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Err(NetworkError::NoConvergence(SIGMA2_MAX_ITER))
}

/// Cumulative sums `S(t) = Σ_{p=0}^{t-1} Σ_j |[W^p]_{ij} − 1/n|` for
/// `t = 1..=t_max`.
pub fn mixing_deviation_profile(w: &MixingMatrix, i: usize, t_max: usize) -> Vec<f64> {
    let n = w.dim();
    let inv_n = 1.0 / n as f64;
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    let mut total = 0.0;
    let mut out = Vec::with_capacity(t_max);
    for _ in 0..t_max {
        total += v.iter().map(|x| (x - inv_n).abs()).sum::<f64>();
        out.push(total);
        // W symmetric: row i of W^{p+1} is W times row i of W^p.
        v = w.matrix().matvec(&v);
    }
    out
}

/// `Σ_{τ=1}^{t} Σ_j |[W^{t−τ}]_{ij} − 1/n|`.
pub fn mixing_deviation_sum(w: &MixingMatrix, i: usize, t: usize) -> f64 {
    assert!(t >= 1, "t must be at least 1");
    mixing_deviation_profile(w, i, t)[t - 1]
}
