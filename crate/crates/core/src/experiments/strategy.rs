use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of the query graph placed on sampled indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryShape {
    Clique,
    Path,
    Star,
    RandomGnm,
    Grid,
}

impl QueryShape {
    pub const ALL: [QueryShape; 5] = [
        QueryShape::Clique,
        QueryShape::Path,
        QueryShape::Star,
        QueryShape::RandomGnm,
        QueryShape::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryShape::Clique => "clique",
            QueryShape::Path => "path",
            QueryShape::Star => "star",
            QueryShape::RandomGnm => "random_gnm",
            QueryShape::Grid => "grid",
        }
    }

    /// Number of vertices the shape uses for budget `m` on `n` points.
    pub fn vertex_count(self, n: usize, m: usize) -> usize {
        match self {
            QueryShape::Clique => clique_size(m).min(n),
            QueryShape::Path | QueryShape::Star => (m + 1).min(n),
            QueryShape::RandomGnm => (2 * clique_size(m)).min(n),
            QueryShape::Grid => {
                let a = grid_side(m);
                (a * a).min(n)
            }
        }
    }

    /// Builds the query graph on the prefix of `order` (a random arrangement
    /// of the points). Prefixes nest as `m` grows for clique, path and star.
    pub fn build<R: Rng + ?Sized>(self, order: &[usize], m: usize, rng: &mut R) -> QueryGraph {
        let n = order.len();
        let s = self.vertex_count(n, m);
        let vertices = order[..s].to_vec();
        let mut edges = Vec::new();
        match self {
            QueryShape::Clique => {
                for a in 0..s {
                    for b in a + 1..s {
                        edges.push((a, b));
                    }
                }
            }
            QueryShape::Path => edges.extend((1..s).map(|b| (b - 1, b))),
            QueryShape::Star => edges.extend((1..s).map(|b| (0, b))),
            QueryShape::RandomGnm => {
                let total = s * s.saturating_sub(1) / 2;
                let want = m.min(total);
                let mut picked: Vec<usize> = index::sample(rng, total, want).into_vec();
                picked.sort_unstable();
                edges.extend(picked.into_iter().map(|k| unrank_pair(k, s)));
            }
            QueryShape::Grid => {
                let a = grid_side(m);
                for r in 0..a {
                    for c in 0..a {
                        let v = r * a + c;
                        if v >= s {
                            continue;
                        }
                        if c + 1 < a && v + 1 < s {
                            edges.push((v, v + 1));
                        }
                        if r + 1 < a && v + a < s {
                            edges.push((v, v + a));
                        }
                    }
                }
            }
        }
        debug_assert!(edges.len() <= m);
        QueryGraph { vertices, edges }
    }
}

impl std::str::FromStr for QueryShape {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        QueryShape::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| crate::error::Error::param(format!("unknown query shape {s:?}")))
    }
}

/// Largest `s` with `C(s, 2) <= m`.
pub fn clique_size(m: usize) -> usize {
    let mut s = ((2.0 * m as f64).sqrt() as usize).max(1) + 1;
    while s * (s - 1) / 2 > m {
        s -= 1;
    }
    s
}

/// Largest `a` with `2a(a-1) <= m`.
fn grid_side(m: usize) -> usize {
    let mut a = 1;
    while 2 * (a + 1) * a <= m {
        a += 1;
    }
    a
}

/// Colex unranking of the `k`-th pair `(a, b)`, `a < b < s`.
fn unrank_pair(k: usize, s: usize) -> (usize, usize) {
    let mut b = ((((8 * k + 1) as f64).sqrt() + 1.0) / 2.0) as usize;
    while b * (b - 1) / 2 > k {
        b -= 1;
    }
    while (b + 1) * b / 2 <= k {
        b += 1;
    }
    debug_assert!(b < s);
    (k - b * (b - 1) / 2, b)
}

/// Query graph over local vertex ids `0..vertices.len()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub vertices: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
}

impl QueryGraph {
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let s = self.vertices.len();
        let mut adj = vec![vec![false; s]; s];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }
}
