//! Maximum bipartite matching (Hopcroft–Karp, O(E √V)).

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

const NIL: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// Right vertex matched to each left vertex.
    pub left: Vec<Option<usize>>,
    /// Left vertex matched to each right vertex.
    pub right: Vec<Option<usize>>,
    pub size: usize,
}

/// `adjacency[u]` lists the right vertices adjacent to left vertex `u`.
pub fn hopcroft_karp(adjacency: &[Vec<usize>], n_right: usize) -> Matching {
    let n_left = adjacency.len();
    let mut pair_u = vec![NIL; n_left];
    let mut pair_v = vec![NIL; n_right];
    let mut dist = vec![0usize; n_left];
    let mut size = 0;
    let mut queue = VecDeque::new();

    loop {
        // Layer the free left vertices and everything reachable by
        // alternating paths.
        queue.clear();
        let mut found = false;
        for u in 0..n_left {
            if pair_u[u] == NIL {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                let w = pair_v[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = vec![0usize; n_left];
        for u in 0..n_left {
            if pair_u[u] == NIL && augment(u, adjacency, &mut pair_u, &mut pair_v, &mut dist, &mut cursor) {
                size += 1;
            }
        }
    }

    let opt = |x: usize| if x == NIL { None } else { Some(x) };
    Matching { left: pair_u.into_iter().map(opt).collect(), right: pair_v.into_iter().map(opt).collect(), size }
}

/// Iterative layered DFS from a free left vertex; avoids deep recursion on
/// long pipe chains.
fn augment(
    root: usize,
    adjacency: &[Vec<usize>],
    pair_u: &mut [usize],
    pair_v: &mut [usize],
    dist: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    let mut stack: Vec<usize> = vec![root];
    while let Some(&u) = stack.last() {
        if cursor[u] < adjacency[u].len() {
            let v = adjacency[u][cursor[u]];
            cursor[u] += 1;
            let w = pair_v[v];
            if w == NIL {
                // Flip the path root → … → u → v.
                let mut v = v;
                while let Some(u) = stack.pop() {
                    let next = pair_u[u];
                    pair_u[u] = v;
                    pair_v[v] = u;
                    v = next;
                }
                return true;
            }
            if dist[w] == dist[u] + 1 {
                stack.push(w);
            }
        } else {
            dist[u] = usize::MAX;
            stack.pop();
        }
    }
    false
}
