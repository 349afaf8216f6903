//! Sublevel-set topology of the potential: connected components of
//! {V <= threshold} and the isolating subdomain around a zero of V, i.e. a
//! connected neighborhood Ω₀ of the zero with V >= η > 0 on its boundary.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ZerosetError {
    #[error("the zero component containing node {node} touches the domain boundary at every threshold")]
    ZeroTouchesBoundary { node: usize },
    #[error("V({node}) = {value} is not zero within 1e-12")]
    NotAZero { node: usize, value: f64 },
    #[error("node index {node} out of range for grid of {len}")]
    OutOfRange { node: usize, len: usize },
}

// ---------------------------------------------------------------------------
// RegionMask
// ---------------------------------------------------------------------------

/// Boolean subset of the 1D grid. Connectivity is axis adjacency
/// (2-neighbor); diagonal adjacency never arises on these grids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegionMask {
    pub inside: Vec<bool>,
}

impl RegionMask {
    pub fn empty(len: usize) -> Self {
        RegionMask {
            inside: vec![false; len],
        }
    }

    pub fn from_predicate<F: Fn(usize) -> bool>(len: usize, pred: F) -> Self {
        RegionMask {
            inside: (0..len).map(pred).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inside.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.inside.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.inside.get(i).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.inside.len()).filter(move |&i| self.inside[i])
    }

    /// Mask nodes adjacent to a non-mask node or sitting on the domain
    /// boundary (the inner boundary of the region).
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let n = self.inside.len();
        self.indices()
            .filter(|&i| {
                i == 0
                    || i == n - 1
                    || !self.inside[i - 1]
                    || !self.inside[i + 1]
            })
            .collect()
    }

    /// Non-mask nodes adjacent to the mask (the outer ring).
    pub fn outer_ring(&self) -> Vec<usize> {
        let n = self.inside.len();
        (0..n)
            .filter(|&i| {
                !self.inside[i]
                    && ((i > 0 && self.inside[i - 1]) || (i + 1 < n && self.inside[i + 1]))
            })
            .collect()
    }

    pub fn touches_domain_boundary(&self) -> bool {
        self.inside[0] || self.inside[self.inside.len() - 1]
    }

    pub fn is_connected(&self) -> bool {
        let mut runs = 0;
        let mut prev = false;
        for &b in &self.inside {
            if b && !prev {
                runs += 1;
            }
            prev = b;
        }
        runs <= 1
    }

    /// How many nodes separate the mask from the domain boundary.
    pub fn distance_to_boundary(&self) -> usize {
        let n = self.inside.len();
        self.indices()
            .map(|i| i.min(n - 1 - i))
            .min()
            .unwrap_or(n)
    }

    /// 0/1 grid rendering for export.
    pub fn to_csv(&self, grid: &[f64]) -> String {
        let mut out = String::from("x,inside\n");
        for (i, &x) in grid.iter().enumerate() {
            out.push_str(&format!("{},{}\n", x, u8::from(self.inside[i])));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Union-find over grid nodes
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            size: vec![1; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            self.parent[root] = self.parent[self.parent[root]];
            root = self.parent[root];
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
    }
}

// ---------------------------------------------------------------------------
// Sublevel components
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentInfo {
    pub label: usize,
    pub size: usize,
    pub touches_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDecomposition {
    pub threshold: f64,
    /// Component label per node; None outside the sublevel set.
    pub labels: Vec<Option<usize>>,
    pub components: Vec<ComponentInfo>,
}

impl ComponentDecomposition {
    pub fn component_of(&self, node: usize) -> Option<usize> {
        self.labels.get(node).copied().flatten()
    }

    pub fn mask_of(&self, label: usize) -> RegionMask {
        RegionMask::from_predicate(self.labels.len(), |i| self.labels[i] == Some(label))
    }
}

/// Union-find labeling of {V <= threshold} under axis adjacency.
pub fn sublevel_components(v: &[f64], threshold: f64) -> ComponentDecomposition {
    let n = v.len();
    let mut uf = UnionFind::new(n);
    for i in 1..n {
        if v[i] <= threshold && v[i - 1] <= threshold {
            uf.union(i, i - 1);
        }
    }
    let mut labels = vec![None; n];
    let mut root_to_label: Vec<(usize, usize)> = Vec::new();
    let mut components: Vec<ComponentInfo> = Vec::new();
    for i in 0..n {
        if v[i] > threshold {
            continue;
        }
        let root = uf.find(i);
        let label = match root_to_label.iter().find(|(r, _)| *r == root) {
            Some(&(_, l)) => l,
            None => {
                let l = components.len();
                root_to_label.push((root, l));
                components.push(ComponentInfo {
                    label: l,
                    size: 0,
                    touches_boundary: false,
                });
                l
            }
        };
        labels[i] = Some(label);
        components[label].size += 1;
        if i == 0 || i == n - 1 {
            components[label].touches_boundary = true;
        }
    }
    ComponentDecomposition {
        threshold,
        labels,
        components,
    }
}

// ---------------------------------------------------------------------------
// Isolating subdomain
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsolatingSubdomain {
    pub omega0: RegionMask,
    /// min of V over the inner boundary of omega0; at least (1/m) minus one
    /// grid cell's worth of variation of V.
    pub eta: f64,
    /// First admissible threshold index: omega0 is the strict sublevel
    /// component of {V < 1/m}.
    pub m: u64,
}

/// Finds the isolating subdomain around the zero `x0` of the sampled
/// potential: doubles m until the component of x0 in {V <= 1/m} avoids the
/// domain boundary, then returns the strict-sublevel component {V < 1/m}
/// containing x0 together with eta = min V over its boundary nodes.
///
/// Both ends of the sample window count as domain boundary; radial grids
/// whose left end is the symmetry center should use
/// [`isolating_subdomain_with_ends`].
pub fn isolating_subdomain(
    v: &[f64],
    x0: usize,
) -> Result<IsolatingSubdomain, ZerosetError> {
    isolating_subdomain_with_ends(v, x0, true, true)
}

pub fn isolating_subdomain_with_ends(
    v: &[f64],
    x0: usize,
    left_is_boundary: bool,
    right_is_boundary: bool,
) -> Result<IsolatingSubdomain, ZerosetError> {
    let n = v.len();
    if x0 >= n {
        return Err(ZerosetError::OutOfRange { node: x0, len: n });
    }
    if v[x0].abs() > crate::problem::ZERO_TOL {
        return Err(ZerosetError::NotAZero {
            node: x0,
            value: v[x0],
        });
    }

    let touches = |decomp: &ComponentDecomposition, label: usize| {
        let mask = decomp.mask_of(label);
        (left_is_boundary && mask.inside[0]) || (right_is_boundary && mask.inside[n - 1])
    };

    // If the exact zero component of x0 reaches the boundary, every
    // sublevel component contains it and the search cannot succeed.
    let zero_comp = sublevel_components(v, crate::problem::ZERO_TOL);
    let label = zero_comp.component_of(x0).expect("x0 is in its own zero set");
    if touches(&zero_comp, label) {
        return Err(ZerosetError::ZeroTouchesBoundary { node: x0 });
    }

    let mut m: u64 = 1;
    for _ in 0..200 {
        let threshold = 1.0 / m as f64;
        let closed = sublevel_components(v, threshold);
        let label = closed
            .component_of(x0)
            .expect("x0 is below every positive threshold");
        if !touches(&closed, label) {
            // strict sublevel component of x0
            let mut strict = RegionMask::empty(n);
            // flood from x0 within {V < threshold}
            let mut stack = vec![x0];
            strict.inside[x0] = true;
            while let Some(i) = stack.pop() {
                if i > 0 && !strict.inside[i - 1] && v[i - 1] < threshold {
                    strict.inside[i - 1] = true;
                    stack.push(i - 1);
                }
                if i + 1 < n && !strict.inside[i + 1] && v[i + 1] < threshold {
                    strict.inside[i + 1] = true;
                    stack.push(i + 1);
                }
            }
            let eta = strict
                .boundary_nodes()
                .iter()
                .filter(|&&i| (i != 0 || left_is_boundary) && (i != n - 1 || right_is_boundary))
                .map(|&i| v[i])
                .fold(f64::INFINITY, f64::min);
            return Ok(IsolatingSubdomain {
                omega0: strict,
                eta,
                m,
            });
        }
        m = m.saturating_mul(2);
    }
    Err(ZerosetError::ZeroTouchesBoundary { node: x0 })
}
