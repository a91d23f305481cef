//! Minimum linear arrangement of a feature graph.
//!
//! The cost of an arrangement equals the sum, over every gap between two
//! consecutive positions, of the weight crossing that gap. The exact solver
//! runs a dynamic program over vertex subsets on that identity; the
//! heuristic orders each connected component by its Fiedler vector and then
//! improves the order with pairwise swaps.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{dispersion_cost, FeatureGraph, OrderingError, Permutation, Result};

/// Largest vertex count accepted by [`minla_exact`].
pub const MAX_EXACT_VERTICES: usize = 10;

fn tie_eps(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

/// Optimal arrangement; among optimal orders the lexicographically smallest
/// sequence of feature indices is returned.
pub fn minla_exact(g: &FeatureGraph) -> Result<Permutation> {
    let n = g.len();
    if n > MAX_EXACT_VERTICES {
        return Err(OrderingError::TooLargeForExact { n, max: MAX_EXACT_VERTICES });
    }
    if n == 0 {
        return Ok(Permutation::global(Vec::new()).with_cost(0.0));
    }
    let w = g.weight_matrix();
    let full = (1usize << n) - 1;

    // cut[s]: weight between s and its complement.
    let mut cut = vec![0.0; full + 1];
    for (s, c) in cut.iter_mut().enumerate() {
        for a in 0..n {
            if s & (1 << a) == 0 {
                continue;
            }
            for b in 0..n {
                if s & (1 << b) == 0 {
                    *c += w[a][b];
                }
            }
        }
    }

    // rest[s]: cheapest way to lay out the set s after all other vertices.
    let mut rest = vec![f64::INFINITY; full + 1];
    rest[0] = 0.0;
    for s in 1..=full {
        let placed = full & !s;
        let mut best = f64::INFINITY;
        for v in 0..n {
            if s & (1 << v) != 0 {
                best = best.min(cut[placed | (1 << v)] + rest[s & !(1 << v)]);
            }
        }
        rest[s] = best;
    }

    let eps = tie_eps(rest[full]);
    let mut order = Vec::with_capacity(n);
    let mut s = full;
    while s != 0 {
        let placed = full & !s;
        let v = (0..n)
            .find(|&v| s & (1 << v) != 0 && cut[placed | (1 << v)] + rest[s & !(1 << v)] <= rest[s] + eps)
            .expect("some vertex attains the minimum");
        order.push(g.vertices()[v]);
        s &= !(1 << v);
    }
    let p = Permutation::global(order);
    let cost = dispersion_cost(g, &p)?;
    Ok(p.with_cost(cost))
}

/// Connected components over positive-weight edges, each sorted, ordered by
/// their smallest local index.
fn components(w: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let n = w.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if !seen[b] && w[a][b] > 0.0 {
                    seen[b] = true;
                    comp.push(b);
                    stack.push(b);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Orders a connected component by the eigenvector of the second smallest
/// Laplacian eigenvalue.
fn spectral_order(comp: &[usize], w: &[Vec<f64>]) -> Vec<usize> {
    let k = comp.len();
    if k <= 2 {
        return comp.to_vec();
    }
    let lap = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            comp.iter().map(|&o| if o == comp[r] { 0.0 } else { w[comp[r]][o] }).sum()
        } else {
            -w[comp[r]][comp[c]]
        }
    });
    let eig = SymmetricEigen::new(lap);
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let fiedler = eig.eigenvectors.column(idx[1]);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| fiedler[a].total_cmp(&fiedler[b]).then(a.cmp(&b)));
    let order: Vec<usize> = order.into_iter().map(|i| comp[i]).collect();
    // The eigenvector sign is arbitrary; fix the orientation.
    let rev: Vec<usize> = order.iter().rev().copied().collect();
    order.min(rev)
}

fn arrangement_cost(order: &[usize], adj: &[Vec<(usize, f64)>], pos: &[usize]) -> f64 {
    order
        .iter()
        .flat_map(|&a| adj[a].iter().filter(move |&&(b, _)| b > a).map(move |&(b, wt)| wt * pos[a].abs_diff(pos[b]) as f64))
        .sum()
}

/// Pairwise-swap descent: apply the best improving swap until none is left.
fn swap_descent(order: &mut [usize], adj: &[Vec<(usize, f64)>], pos: &mut [usize]) {
    let len = order.len();
    let edge_cost = |v: usize, p: usize, other: usize, other_p: usize, pos: &[usize]| -> f64 {
        adj[v]
            .iter()
            .map(|&(b, wt)| {
                let pb = if b == other { other_p } else { pos[b] };
                wt * p.abs_diff(pb) as f64
            })
            .sum()
    };
    let scale = arrangement_cost(order, adj, pos);
    let eps = tie_eps(scale);
    loop {
        let mut best = (0.0, 0, 0);
        for x in 0..len {
            for y in (x + 1)..len {
                let (u, v) = (order[x], order[y]);
                let before = edge_cost(u, x, v, y, pos) + edge_cost(v, y, u, x, pos);
                let after = edge_cost(u, y, v, x, pos) + edge_cost(v, x, u, y, pos);
                let delta = after - before;
                if delta < best.0 - eps {
                    best = (delta, x, y);
                }
            }
        }
        if best.0 >= -eps {
            break;
        }
        let (_, x, y) = best;
        order.swap(x, y);
        pos[order[x]] = x;
        pos[order[y]] = y;
    }
}

/// Spectral seed followed by swap descent, applied per connected
/// component; components are concatenated by smallest member.
pub fn minla_heuristic(g: &FeatureGraph) -> Result<Permutation> {
    let w = g.weight_matrix();
    let n = w.len();
    let adj: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|a| (0..n).filter(|&b| b != a && w[a][b] > 0.0).map(|b| (b, w[a][b])).collect())
        .collect();
    let mut local = Vec::with_capacity(n);
    for comp in components(&w) {
        let mut order = spectral_order(&comp, &w);
        // Positions are only compared within one component, so offsets do
        // not matter here.
        let mut pos = vec![0usize; n];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        swap_descent(&mut order, &adj, &mut pos);
        local.extend(order);
    }
    let p = Permutation::global(local.into_iter().map(|i| g.vertices()[i]).collect());
    let cost = dispersion_cost(g, &p)?;
    Ok(p.with_cost(cost))
}

/// Exact solver when the graph is small enough, heuristic otherwise.
pub fn minla_auto(g: &FeatureGraph) -> Result<Permutation> {
    if g.len() <= MAX_EXACT_VERTICES {
        minla_exact(g)
    } else {
        minla_heuristic(g)
    }
}

/// Cost of the seed order alone, exposed for tests of the descent step.
#[cfg(test)]
pub(crate) fn spectral_seed(g: &FeatureGraph) -> Permutation {
    let w = g.weight_matrix();
    let order: Vec<usize> = components(&w).iter().flat_map(|c| spectral_order(c, &w)).collect();
    Permutation::global(order.into_iter().map(|i| g.vertices()[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordering::graph::Edge;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every permutation of `0..n`, by Heap's algorithm.
    fn all_orders(n: usize) -> Vec<Vec<usize>> {
        let mut a: Vec<usize> = (0..n).collect();
        let mut out = vec![a.clone()];
        let mut c = vec![0; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    a.swap(0, i);
                } else {
                    a.swap(c[i], i);
                }
                out.push(a.clone());
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        out
    }

    fn brute_min(g: &FeatureGraph) -> (f64, Vec<usize>) {
        let mut best = (f64::INFINITY, Vec::new());
        let mut orders: Vec<Vec<usize>> = all_orders(g.len())
            .into_iter()
            .map(|o| o.into_iter().map(|i| g.vertices()[i]).collect())
            .collect();
        orders.sort();
        for o in orders {
            let c: f64 = g
                .edges()
                .iter()
                .map(|e| {
                    let pi = o.iter().position(|&v| v == e.i).unwrap();
                    let pj = o.iter().position(|&v| v == e.j).unwrap();
                    e.weight * pi.abs_diff(pj) as f64
                })
                .sum();
            if c < best.0 - 1e-9 {
                best = (c, o);
            }
        }
        best
    }

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> FeatureGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_bool(p) {
                    edges.push(Edge { i, j, weight: rng.gen_range(0.05..1.0) });
                }
            }
        }
        FeatureGraph::new((0..n).collect(), edges).unwrap()
    }

    #[test]
    fn path_star_and_single() {
        let path = FeatureGraph::unweighted(vec![0, 1, 2], &[(0, 1), (1, 2)]).unwrap();
        let p = minla_exact(&path).unwrap();
        assert_eq!(p.order(), &[0, 1, 2]);
        assert_eq!(p.cost(), Some(2.0));

        let star = FeatureGraph::unweighted(vec![0, 1, 2, 3], &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let p = minla_exact(&star).unwrap();
        assert_eq!(p.cost(), Some(4.0));
        let center = p.order().iter().position(|&v| v == 0).unwrap();
        assert!(center == 1 || center == 2);
        assert_eq!(p.order(), &[1, 0, 2, 3]);

        let one = FeatureGraph::new(vec![5], vec![]).unwrap();
        let p = minla_exact(&one).unwrap();
        assert_eq!((p.order(), p.cost()), (&[5][..], Some(0.0)));
    }

    #[test]
    fn exact_rejects_large_graphs() {
        let g = FeatureGraph::new((0..11).collect(), vec![]).unwrap();
        assert!(matches!(minla_exact(&g), Err(OrderingError::TooLargeForExact { n: 11, .. })));
    }

    #[test]
    fn exact_matches_enumeration_with_lexicographic_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..60 {
            let n = rng.gen_range(1..=7);
            let g = random_graph(&mut rng, n, 0.5);
            let (best, lex) = brute_min(&g);
            let p = minla_exact(&g).unwrap();
            assert!((p.cost().unwrap() - best).abs() < 1e-9);
            assert_eq!(p.order(), &lex[..]);
        }
        // Unit weights produce many exact ties.
        for _ in 0..30 {
            let n = rng.gen_range(2..=6);
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.5) {
                        pairs.push((i, j));
                    }
                }
            }
            let g = FeatureGraph::unweighted((0..n).collect(), &pairs).unwrap();
            let (best, lex) = brute_min(&g);
            let p = minla_exact(&g).unwrap();
            assert_eq!(p.cost().unwrap(), best);
            assert_eq!(p.order(), &lex[..]);
        }
    }

    #[test]
    fn exact_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let n = rng.gen_range(2..=8);
            let g = random_graph(&mut rng, n, 0.6);
            let a = minla_exact(&g).unwrap();
            let b = minla_exact(&g.scaled(3.5).unwrap()).unwrap();
            assert_eq!(a.order(), b.order());
            assert!((b.cost().unwrap() - 3.5 * a.cost().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn heuristic_within_factor_of_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..200 {
            let n = rng.gen_range(1..=10);
            let density = rng.gen_range(0.1..0.9);
            let g = random_graph(&mut rng, n, density);
            let exact = minla_exact(&g).unwrap().cost().unwrap();
            let h = minla_heuristic(&g).unwrap();
            h.check_covers(g.vertices()).unwrap();
            let seed_cost = dispersion_cost(&g, &spectral_seed(&g)).unwrap();
            assert!(h.cost().unwrap() <= seed_cost + 1e-9);
            assert!(h.cost().unwrap() <= 1.5 * exact + 1e-9, "{} vs {exact}", h.cost().unwrap());
        }
    }

    #[test]
    fn heuristic_edgeless_and_path() {
        let g = FeatureGraph::new((0..6).collect(), vec![]).unwrap();
        let p = minla_heuristic(&g).unwrap();
        assert_eq!(p.order(), &[0, 1, 2, 3, 4, 5]);
        assert_eq!(p.cost(), Some(0.0));

        let pairs: Vec<(usize, usize)> = (0..19).map(|i| (i, i + 1)).collect();
        let path = FeatureGraph::unweighted((0..20).collect(), &pairs).unwrap();
        assert_eq!(minla_heuristic(&path).unwrap().cost(), Some(19.0));
        for n in 2..=8 {
            let pairs: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
            let p = FeatureGraph::unweighted((0..n).collect(), &pairs).unwrap();
            assert_eq!(brute_min(&p).0, (n - 1) as f64);
        }
    }

    #[test]
    fn disconnected_components_are_concatenated() {
        let g = FeatureGraph::unweighted(vec![0, 1, 2, 3, 4], &[(0, 3), (1, 4)]).unwrap();
        let p = minla_heuristic(&g).unwrap();
        assert_eq!(p.order(), &[0, 3, 1, 4, 2]);
        assert_eq!(p.cost(), Some(2.0));
    }
}
