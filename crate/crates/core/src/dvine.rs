//! Ordered D-vines with the path order 1–2–…–d.
//!
//! Edge (ℓ, k), 1-based, is the pair-copula of tree ℓ joining variables k and
//! k+ℓ given the ones in between. Edges are stored tree-major: all of tree 1,
//! then tree 2, and so on. A vector shorter than d is evaluated under the
//! embedded sub-vine made of the edges with k + ℓ ≤ its length.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bicop::{clamp_unit, BivariateCopula, CopulaFamily};
use crate::error::{domain, Error, Result};

/// Floor applied to a cluster log-likelihood contribution that would
/// otherwise be −∞ or NaN.
pub const LOGLIK_SENTINEL: f64 = -1e6;

/// Status of the last observed coordinate of a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Event,
    Censored,
}

impl Status {
    pub fn from_indicator(delta: bool) -> Self {
        if delta {
            Status::Event
        } else {
            Status::Censored
        }
    }

    pub fn is_event(self) -> bool {
        self == Status::Event
    }
}

/// Number of edges of a d-dimensional vine.
pub fn n_edges(d: usize) -> usize {
    d * (d.saturating_sub(1)) / 2
}

/// Tree-major index of edge (tree, pos), both 1-based.
#[inline]
pub fn edge_index(d: usize, tree: usize, pos: usize) -> usize {
    (tree - 1) * d - (tree - 1) * tree / 2 + pos - 1
}

/// Inverse of [`edge_index`].
pub fn edge_of_index(d: usize, idx: usize) -> (usize, usize) {
    let mut rem = idx;
    for tree in 1..d {
        let len = d - tree;
        if rem < len {
            return (tree, rem + 1);
        }
        rem -= len;
    }
    panic!("edge index {idx} out of range for d = {d}");
}

/// Pair-copula families of a D-vine without parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VineLayout {
    d: usize,
    families: Vec<CopulaFamily>,
}

impl VineLayout {
    pub fn new(d: usize, families: Vec<CopulaFamily>) -> Result<Self> {
        if d < 2 {
            return domain(format!("a vine needs d >= 2, got {d}"));
        }
        if families.len() != n_edges(d) {
            return Err(Error::Invalid(format!(
                "a {d}-dimensional D-vine has {} edges, got {}",
                n_edges(d),
                families.len()
            )));
        }
        Ok(Self { d, families })
    }

    /// All edges of one family.
    pub fn uniform(d: usize, family: CopulaFamily) -> Result<Self> {
        Self::new(d, vec![family; n_edges(d)])
    }

    /// Tree-1 families as given, every higher-tree edge `upper`.
    pub fn with_first_tree(first: &[CopulaFamily], upper: CopulaFamily) -> Result<Self> {
        let d = first.len() + 1;
        let mut families = first.to_vec();
        families.resize(n_edges(d), upper);
        Self::new(d, families)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn families(&self) -> &[CopulaFamily] {
        &self.families
    }

    pub fn family(&self, tree: usize, pos: usize) -> CopulaFamily {
        self.families[edge_index(self.d, tree, pos)]
    }

    /// Number of dependence parameters.
    pub fn n_params(&self) -> usize {
        self.families.iter().map(|f| f.n_params()).sum()
    }

    /// Compact code such as "CFG|FF|F".
    pub fn code(&self) -> String {
        (1..self.d)
            .map(|t| (1..=self.d - t).map(|k| self.family(t, k).letter()).collect::<String>())
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl fmt::Display for VineLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for VineLayout {
    type Err = Error;

    /// Accepts the compact code ("CFG|FF|F"), or the long form
    /// "tree1=[clayton,frank,gumbel];tree2=[frank,frank];tree3=[frank]".
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let trees: Vec<Vec<CopulaFamily>> = if s.contains('=') {
            let mut trees = Vec::new();
            for (i, part) in s.split(';').filter(|p| !p.trim().is_empty()).enumerate() {
                let (key, val) = part
                    .split_once('=')
                    .ok_or_else(|| Error::Invalid(format!("expected treeN=[...], got '{part}'")))?;
                if key.trim() != format!("tree{}", i + 1) {
                    return Err(Error::Invalid(format!(
                        "expected tree{} in vine specification, got '{}'",
                        i + 1,
                        key.trim()
                    )));
                }
                let val = val.trim().trim_start_matches('[').trim_end_matches(']');
                trees.push(val.split(',').map(|f| f.parse()).collect::<Result<Vec<_>>>()?);
            }
            trees
        } else {
            s.split('|')
                .map(|t| {
                    t.trim()
                        .chars()
                        .map(|c| {
                            CopulaFamily::from_letter(c)
                                .ok_or_else(|| Error::Invalid(format!("unknown family letter '{c}' in '{s}'")))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?
        };
        let d = trees.first().map_or(0, |t| t.len() + 1);
        if d < 2 {
            return Err(Error::Invalid(format!("empty vine specification '{s}'")));
        }
        if trees.len() != d - 1 || trees.iter().enumerate().any(|(i, t)| t.len() != d - 1 - i) {
            return Err(Error::Invalid(format!("vine specification '{s}' is not a triangle of {} trees", d - 1)));
        }
        Self::new(d, trees.concat())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DVineModel {
    d: usize,
    edges: Vec<BivariateCopula>,
}

impl DVineModel {
    /// Builds a vine from tree-major edges.
    pub fn new(d: usize, edges: Vec<BivariateCopula>) -> Result<Self> {
        if d < 2 {
            return domain(format!("a vine needs d >= 2, got {d}"));
        }
        if edges.len() != n_edges(d) {
            return Err(Error::Invalid(format!(
                "a {d}-dimensional D-vine has {} edges, got {}",
                n_edges(d),
                edges.len()
            )));
        }
        Ok(Self { d, edges })
    }

    pub fn independence(d: usize) -> Result<Self> {
        Self::new(d, vec![BivariateCopula::independence(); n_edges(d)])
    }

    /// Builds a vine from a layout and one θ per edge (ignored for
    /// independence edges).
    pub fn from_layout(layout: &VineLayout, thetas: &[f64]) -> Result<Self> {
        if thetas.len() != layout.families.len() {
            return Err(Error::Invalid("one parameter per edge required".into()));
        }
        let edges =
            layout.families.iter().zip(thetas).map(|(&f, &t)| BivariateCopula::new(f, t)).collect::<Result<_>>()?;
        Self::new(layout.d, edges)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[BivariateCopula] {
        &self.edges
    }

    pub fn edge(&self, tree: usize, pos: usize) -> &BivariateCopula {
        &self.edges[edge_index(self.d, tree, pos)]
    }

    pub fn layout(&self) -> VineLayout {
        VineLayout { d: self.d, families: self.edges.iter().map(|e| e.family()).collect() }
    }

    /// The embedded sub-vine on the first `dt` variables.
    pub fn restrict(&self, dt: usize) -> Result<Self> {
        if dt < 2 || dt > self.d {
            return domain(format!("cannot restrict a {}-vine to {dt} variables", self.d));
        }
        let mut edges = Vec::with_capacity(n_edges(dt));
        for tree in 1..dt {
            for pos in 1..=dt - tree {
                edges.push(*self.edge(tree, pos));
            }
        }
        Self::new(dt, edges)
    }

    fn check(&self, u: &[f64], min_len: usize) -> Result<()> {
        if u.len() < min_len || u.len() > self.d {
            return domain(format!("expected between {min_len} and {} coordinates, got {}", self.d, u.len()));
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return domain(format!("coordinate {x} outside [0, 1]"));
        }
        Ok(())
    }

    /// Log density of the embedded vine at u (length 2..=d).
    pub fn log_pdf(&self, u: &[f64]) -> Result<f64> {
        self.check(u, 2)?;
        Ok(self.eval(u, u.len(), false).0)
    }

    /// C_{m|1:m−1}(u_m | u_1, …, u_{m−1}) with m = u.len() ≥ 2.
    pub fn cond_cdf(&self, u: &[f64]) -> Result<f64> {
        self.check(u, 2)?;
        let last = u[u.len() - 1];
        if last == 0.0 {
            return Ok(0.0);
        }
        if last == 1.0 {
            return Ok(1.0);
        }
        Ok(self.eval(u, u.len() - 1, true).1)
    }

    /// Copula part of a cluster's log-likelihood: the log density for an
    /// event, log c_{1:m−1} + log C_{m|1:m−1} when the last coordinate is
    /// censored. Size-1 clusters carry no copula information.
    pub fn cluster_loglik(&self, u: &[f64], status: Status) -> Result<f64> {
        self.check(u, 1)?;
        if u.len() == 1 {
            return Ok(0.0);
        }
        let v = match status {
            Status::Event => self.eval(u, u.len(), false).0,
            Status::Censored => {
                let (dens, cdf) = self.eval(u, u.len() - 1, true);
                dens + cdf.ln()
            }
        };
        Ok(if v.is_nan() || v < LOGLIK_SENTINEL { LOGLIK_SENTINEL } else { v })
    }

    /// Single pass over the trees. Sums log densities of the edges with
    /// k + ℓ ≤ `dens_upto`, and, if `want_cdf`, returns the conditional CDF of
    /// the last coordinate given the others.
    fn eval(&self, u: &[f64], dens_upto: usize, want_cdf: bool) -> (f64, f64) {
        let m = u.len();
        let mut stack = [0.0; 32];
        let mut heap;
        let (a, b) = if 2 * m <= stack.len() {
            stack.split_at_mut(m)
        } else {
            heap = vec![0.0; 2 * m];
            heap.split_at_mut(m)
        };
        for k in 0..m - 1 {
            a[k] = clamp_unit(u[k]);
            b[k] = clamp_unit(u[k + 1]);
        }
        let mut logd = 0.0;
        let mut cdf = f64::NAN;
        for tree in 1..m {
            let len = m - tree;
            let base = edge_index(self.d, tree, 1);
            for k in 0..len {
                let e = &self.edges[base + k];
                // 1-based position k+1: k + 1 + tree ≤ dens_upto
                if k + 1 + tree <= dens_upto {
                    logd += e.log_pdf_clamped(a[k], b[k]);
                }
                if tree + 1 < m && k + 1 < len {
                    let na = clamp_unit(e.hfun_clamped(a[k], b[k]));
                    let e2 = &self.edges[base + k + 1];
                    let nb = clamp_unit(e2.hfun_clamped(b[k + 1], a[k + 1]));
                    a[k] = na;
                    b[k] = nb;
                }
            }
            if tree == m - 1 && want_cdf {
                cdf = self.edges[base].hfun_clamped(b[0], a[0]);
            }
        }
        (logd, cdf)
    }

    /// Draws n vectors of length d by inverting the vine's conditional
    /// distributions one coordinate at a time.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let d = self.d;
        // a[ℓ][k] = F(u_k | u_{k+1..k+ℓ−1}), 0-based ℓ and k
        let mut a = vec![vec![0.0; d]; d];
        let mut u = vec![0.0; d];
        for j in 0..d {
            let w: f64 = clamp_unit(rng.random());
            if j == 0 {
                u[0] = w;
                a[0][0] = w;
                continue;
            }
            // invert from the top tree down; bs[ℓ − 1] = b at tree ℓ, position j − ℓ
            let mut bs = vec![0.0; j];
            let mut p = w;
            for tree in (1..=j).rev() {
                let k = j - tree;
                p = clamp_unit(self.edge(tree, k + 1).hinv_clamped(p, a[tree - 1][k])?);
                bs[tree - 1] = p;
            }
            u[j] = p;
            a[0][j] = p;
            for tree in 1..=j.min(d - 2) {
                let k = j - tree;
                a[tree][k] = clamp_unit(self.edge(tree, k + 1).hfun_clamped(a[tree - 1][k], bs[tree - 1]));
            }
        }
        Ok(u)
    }
}

impl fmt::Display for DVineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for tree in 1..self.d {
            if tree > 1 {
                f.write_str("; ")?;
            }
            write!(f, "tree{tree}=[")?;
            for pos in 1..=self.d - tree {
                if pos > 1 {
                    f.write_str(", ")?;
                }
                write!(f, "{}", self.edge(tree, pos))?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

/// The D-vine representation of the d-dimensional Clayton copula: every edge
/// Clayton, tree ℓ with parameter θ / ((ℓ − 1)θ + 1).
pub fn clayton_vine_of(theta: f64, d: usize) -> Result<DVineModel> {
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("Clayton parameter must be positive, got {theta}"));
    }
    let mut edges = Vec::with_capacity(n_edges(d));
    for tree in 1..d {
        let th = theta / ((tree as f64 - 1.0) * theta + 1.0);
        for _ in 1..=d - tree {
            edges.push(BivariateCopula::new(CopulaFamily::Clayton, th)?);
        }
    }
    DVineModel::new(d, edges)
}
