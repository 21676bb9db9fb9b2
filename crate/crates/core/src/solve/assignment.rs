//! Minimum-weight perfect matching in a weighted bipartite graph, by
//! successive shortest augmenting paths with dual potentials. Weights are
//! non-negative integers; missing edges are unusable.

use thiserror::Error;

/// A bipartite graph with integer edge weights.
#[derive(Clone, Debug)]
pub struct WeightedBipartiteGraph {
    left_count: usize,
    right_count: usize,
    edges: Vec<(usize, usize, u64)>,
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum AssignmentError {
    #[error("left vertex {0} out of range")]
    LeftOutOfRange(usize),
    #[error("right vertex {0} out of range")]
    RightOutOfRange(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("perfect matching needs equal sides, got {left} and {right}")]
    NotSquare { left: usize, right: usize },
    #[error("no perfect matching exists")]
    NoPerfectMatching,
}

impl WeightedBipartiteGraph {
    pub fn new(
        left_count: usize,
        right_count: usize,
        edges: Vec<(usize, usize, u64)>,
    ) -> Result<Self, AssignmentError> {
        let mut seen = std::collections::HashSet::new();
        for &(l, r, _) in &edges {
            if l >= left_count {
                return Err(AssignmentError::LeftOutOfRange(l));
            }
            if r >= right_count {
                return Err(AssignmentError::RightOutOfRange(r));
            }
            if !seen.insert((l, r)) {
                return Err(AssignmentError::DuplicateEdge(l, r));
            }
        }
        Ok(Self {
            left_count,
            right_count,
            edges,
        })
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    pub fn edges(&self) -> &[(usize, usize, u64)] {
        &self.edges
    }
}

/// A perfect matching over graph indices together with its total weight.
///
/// The total weight of an optimal matching is unique even when the matching
/// itself is not; ties are broken deterministically by the column scan order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Assignment {
    pub left_to_right: Vec<usize>,
    pub total_weight: u64,
}

const INF: i64 = i64::MAX / 4;

/// Computes a minimum-weight perfect matching, or an error when none exists.
pub fn min_weight_perfect_matching(
    g: &WeightedBipartiteGraph,
) -> Result<Assignment, AssignmentError> {
    if g.left_count != g.right_count {
        return Err(AssignmentError::NotSquare {
            left: g.left_count,
            right: g.right_count,
        });
    }
    let n = g.left_count;
    if n == 0 {
        return Ok(Assignment {
            left_to_right: vec![],
            total_weight: 0,
        });
    }

    let mut cost = vec![vec![INF; n]; n];
    for &(l, r, w) in &g.edges {
        cost[l][r] = w as i64;
    }

    // Row and column potentials; `job[w]` is the row matched to column w,
    // with a virtual column at index n used as the augmentation source.
    let mut ys = vec![0i64; n];
    let mut yt = vec![0i64; n + 1];
    let mut job: Vec<Option<usize>> = vec![None; n + 1];

    for row in 0..n {
        let mut w_cur = n;
        job[n] = Some(row);
        let mut min_to = vec![INF; n + 1];
        let mut prev = vec![n; n + 1];
        let mut in_tree = vec![false; n + 1];

        while let Some(j) = job[w_cur] {
            in_tree[w_cur] = true;
            let mut delta = INF;
            let mut w_next = n;
            for w in 0..n {
                if in_tree[w] {
                    continue;
                }
                if cost[j][w] < INF {
                    let diff = cost[j][w] - ys[j] - yt[w];
                    if diff < min_to[w] {
                        min_to[w] = diff;
                        prev[w] = w_cur;
                    }
                }
                if min_to[w] < delta {
                    delta = min_to[w];
                    w_next = w;
                }
            }
            if delta >= INF {
                return Err(AssignmentError::NoPerfectMatching);
            }
            for w in 0..=n {
                if in_tree[w] {
                    ys[job[w].unwrap()] += delta;
                    yt[w] -= delta;
                } else if min_to[w] < INF {
                    min_to[w] -= delta;
                }
            }
            w_cur = w_next;
        }

        // Augment along the alternating path back to the virtual column.
        while w_cur != n {
            let w_prev = prev[w_cur];
            job[w_cur] = job[w_prev];
            w_cur = w_prev;
        }
    }

    let mut left_to_right = vec![0usize; n];
    let mut total = 0u64;
    for w in 0..n {
        let j = job[w].expect("perfect after n augmentations");
        left_to_right[j] = w;
        debug_assert!(cost[j][w] < INF);
        total += cost[j][w] as u64;
    }
    Ok(Assignment {
        left_to_right,
        total_weight: total,
    })
}
