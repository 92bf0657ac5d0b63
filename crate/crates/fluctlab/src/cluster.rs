//! Brute-force verification of the cluster-expansion machinery: Mayer
//! functions, connected-graph sums, the Penrose tree-graph identity, Cayley
//! counts via Pruefer sequences, exact truncated cluster coefficients and the
//! subset-sum bound.
//!
//! Everything here is deliberately small (k <= 5 vertices, d = 1 quadrature)
//! and exhaustive; these routines are the oracles that certify the analytic
//! identities, not production samplers.

use crate::error::{Error, Result};
use crate::gibbs::exact_z_small_n;
use crate::kernels::FourierKernel;

/// Symmetric edge weight matrix h_e on the complete graph over k vertices.
#[derive(Debug, Clone)]
pub struct EdgeWeights {
    pub k: usize,
    h: Vec<f64>,
}

impl EdgeWeights {
    pub fn new(k: usize, h: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=5).contains(&k) {
            return Err(Error::Unsupported("EdgeWeights needs 2 <= k <= 5".into()));
        }
        if h.len() != k || h.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("edge weight matrix must be k x k"));
        }
        let mut flat = vec![0.0; k * k];
        for i in 0..k {
            if h[i][i] != 0.0 {
                return Err(Error::invalid("edge weight diagonal must be zero"));
            }
            for j in 0..k {
                if h[i][j] != h[j][i] {
                    return Err(Error::invalid("edge weights must be symmetric"));
                }
                flat[i * k + j] = h[i][j];
            }
        }
        Ok(EdgeWeights { k, h: flat })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.h[i * self.k + j]
    }
}

/// All edges {i, j}, i < j, of the complete graph on k vertices, in a fixed
/// order used consistently by the bitmask enumeration.
pub fn edge_list(k: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            edges.push((i, j));
        }
    }
    edges
}

fn connected(k: usize, edges: &[(usize, usize)], mask: u64) -> bool {
    let mut adj = vec![0u64; k];
    for (e, &(i, j)) in edges.iter().enumerate() {
        if mask >> e & 1 == 1 {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
    }
    let mut seen: u64 = 1;
    let mut frontier: u64 = 1;
    while frontier != 0 {
        let mut next = 0u64;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v] & !seen;
        }
        seen |= next;
        frontier = next;
    }
    seen.count_ones() as usize == k
}

/// All connected simple graphs on vertex set {0..k-1}, each as an edge-index
/// bitmask over `edge_list(k)`.
///
/// Counts: 1, 4, 38, 728 for k = 2..5.
pub fn enumerate_connected_graphs(k: usize) -> Result<Vec<u64>> {
    if !(2..=5).contains(&k) {
        return Err(Error::Unsupported(
            "graph enumeration capped at k <= 5".into(),
        ));
    }
    let edges = edge_list(k);
    let m = edges.len();
    let mut out = Vec::new();
    for mask in 0..(1u64 << m) {
        if connected(k, &edges, mask) {
            out.push(mask);
        }
    }
    Ok(out)
}

/// Sum over connected graphs of prod_{e in G} h_e.
pub fn connected_graph_sum(w: &EdgeWeights) -> Result<f64> {
    let edges = edge_list(w.k);
    let graphs = enumerate_connected_graphs(w.k)?;
    let mut acc = 0.0;
    for mask in graphs {
        let mut prod = 1.0;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                prod *= w.get(i, j);
            }
        }
        acc += prod;
    }
    Ok(acc)
}

/// A labeled tree on {0..k-1} as a parent array (parent[0] unused, root = 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub k: usize,
    pub parent: Vec<usize>,
}

impl Tree {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (1..self.k)
            .map(|v| {
                let p = self.parent[v];
                (p.min(v), p.max(v))
            })
            .collect()
    }

    fn depths(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.k];
        for v in 1..self.k {
            let mut u = v;
            let mut depth = 0;
            while u != 0 {
                u = self.parent[u];
                depth += 1;
            }
            d[v] = depth;
        }
        d
    }
}

/// Decode a Pruefer sequence over alphabet {0..k-1} into the corresponding
/// labeled tree (rooted afterwards at vertex 0 for bookkeeping).
pub fn pruefer_decode(k: usize, seq: &[usize]) -> Tree {
    assert_eq!(seq.len(), k.saturating_sub(2));
    let mut degree = vec![1usize; k];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(k - 1);
    let mut degree_work = degree.clone();
    let mut used = vec![false; k];
    for &s in seq {
        // Smallest leaf not yet consumed.
        let leaf = (0..k)
            .find(|&v| degree_work[v] == 1 && !used[v])
            .expect("valid pruefer sequence");
        edges.push((leaf.min(s), leaf.max(s)));
        used[leaf] = true;
        degree_work[leaf] -= 1;
        degree_work[s] -= 1;
    }
    let rest: Vec<usize> = (0..k).filter(|&v| !used[v] && degree_work[v] >= 1).collect();
    debug_assert_eq!(rest.len(), 2);
    edges.push((rest[0].min(rest[1]), rest[0].max(rest[1])));

    // Root at 0 via BFS to build the parent array.
    let mut adj = vec![Vec::new(); k];
    for &(i, j) in &edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut parent = vec![usize::MAX; k];
    parent[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    Tree { k, parent }
}

/// Enumerate all labeled trees on k vertices via Pruefer sequences, verifying
/// distinctness, and return them. The count equals k^{k-2} (Cayley).
pub fn enumerate_trees(k: usize) -> Result<Vec<Tree>> {
    if !(2..=7).contains(&k) {
        return Err(Error::Unsupported("tree enumeration capped at k <= 7".into()));
    }
    if k == 2 {
        return Ok(vec![Tree {
            k,
            parent: vec![0, 0],
        }]);
    }
    let len = k - 2;
    let total = (k as u64).pow(len as u32);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(total as usize);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len {
            seq.push((c % k as u64) as usize);
            c /= k as u64;
        }
        let tree = pruefer_decode(k, &seq);
        let mut edges = tree.edges();
        edges.sort_unstable();
        if !seen.insert(edges) {
            return Err(Error::invalid(
                "pruefer decoding produced a duplicate tree".to_string(),
            ));
        }
        out.push(tree);
    }
    Ok(out)
}

/// Number of labeled trees on k vertices obtained by enumeration; equals
/// k^{k-2} by Cayley's formula.
pub fn cayley_count(k: usize) -> Result<u64> {
    Ok(enumerate_trees(k)?.len() as u64)
}

/// Residual edge set R(T) of the Penrose partition scheme used here:
/// root = vertex 0, depths = BFS layers of T, parent(v) = unique tree
/// neighbor one layer up. A non-tree edge {i, j} is admissible iff its
/// endpoints sit in the same layer, or in adjacent layers with the shallower
/// endpoint ordered strictly after the deeper endpoint's parent. With the
/// min-index-parent BFS map m(G), the connected graphs with m(G) = T are
/// exactly the G with E(T) subset of G subset of E(T) + R(T).
pub fn penrose_residual_edges(tree: &Tree) -> Vec<(usize, usize)> {
    let d = tree.depths();
    let mut out = Vec::new();
    let tree_edges: std::collections::HashSet<(usize, usize)> =
        tree.edges().into_iter().collect();
    for i in 0..tree.k {
        for j in (i + 1)..tree.k {
            if tree_edges.contains(&(i, j)) {
                continue;
            }
            let admissible = if d[i] == d[j] {
                true
            } else if d[i] + 1 == d[j] {
                i > tree.parent[j]
            } else if d[j] + 1 == d[i] {
                j > tree.parent[i]
            } else {
                false
            };
            if admissible {
                out.push((i, j));
            }
        }
    }
    out
}

/// Penrose tree sum: sum over labeled trees of
/// (prod_{e in E(T)} h_e) * (prod_{e in R(T)} (1 + h_e)).
/// Equals `connected_graph_sum` for every symmetric weight matrix.
pub fn penrose_tree_sum(w: &EdgeWeights) -> Result<f64> {
    let trees = enumerate_trees(w.k)?;
    let mut acc = 0.0;
    for tree in &trees {
        let mut prod = 1.0;
        for (i, j) in tree.edges() {
            prod *= w.get(i, j);
        }
        for (i, j) in penrose_residual_edges(tree) {
            prod *= 1.0 + w.get(i, j);
        }
        acc += prod;
    }
    Ok(acc)
}

/// Mayer functions of a kernel at (N, beta), tabulated on a uniform d=1 grid:
/// f = e^{-(beta/N) W} - 1, c0 = int f, h = (f - c0)/(1 + c0).
///
/// c0 is the same quadrature sum, so the grid sum of h vanishes to rounding,
/// which makes the bare-tree cancellation exact on the grid.
#[derive(Debug, Clone)]
pub struct MayerFunctions {
    pub beta: f64,
    pub n: usize,
    pub grid_size: usize,
    pub c0: f64,
    /// h sampled at i/grid_size.
    pub h: Vec<f64>,
    pub h_l1: f64,
    pub h_l2: f64,
}

pub fn mayer_functions(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    grid_size: usize,
) -> Result<MayerFunctions> {
    if kernel.dimension() != 1 {
        return Err(Error::Unsupported("mayer_functions needs d=1".into()));
    }
    if (grid_size as i64) < 4 * kernel.cutoff() {
        return Err(Error::invalid("grid_size must be >= 4 * cutoff"));
    }
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let g = grid_size;
    let f: Vec<f64> = (0..g)
        .map(|i| (-(beta / n as f64) * kernel.potential(&[i as f64 / g as f64])).exp() - 1.0)
        .collect();
    let c0 = f.iter().sum::<f64>() / g as f64;
    let h: Vec<f64> = f.iter().map(|fi| (fi - c0) / (1.0 + c0)).collect();
    let h_l1 = h.iter().map(|v| v.abs()).sum::<f64>() / g as f64;
    let h_l2 = (h.iter().map(|v| v * v).sum::<f64>() / g as f64).sqrt();
    Ok(MayerFunctions {
        beta,
        n,
        grid_size: g,
        c0,
        h,
        h_l1,
        h_l2,
    })
}

impl MayerFunctions {
    /// Grid mean of h (should vanish to rounding).
    pub fn h_mean(&self) -> f64 {
        self.h.iter().sum::<f64>() / self.grid_size as f64
    }

    #[inline]
    fn h_idx(&self, i: usize, j: usize) -> f64 {
        self.h[(i + self.grid_size - j) % self.grid_size]
    }
}

/// Cluster coefficient phi([k]) = sum over connected graphs G on [k] of
/// int prod_{{i,j} in G} h(x_i - x_j) dx, by tensor quadrature over k-1 free
/// variables (translation invariance fixes x_k = 0). Computed through both the
/// connected-graph route and the Penrose tree route (which drops the
/// exactly-vanishing bare tree terms); the two must agree.
#[derive(Debug, Clone, Copy)]
pub struct PhiK {
    pub connected_route: f64,
    pub tree_route: f64,
}

pub fn phi_k(mayer: &MayerFunctions, k: usize, grid_size: usize) -> Result<PhiK> {
    if !(2..=4).contains(&k) {
        return Err(Error::Unsupported("phi_k covers k in {2,3,4}".into()));
    }
    let g = grid_size;
    if g > mayer.grid_size || mayer.grid_size % g != 0 {
        return Err(Error::invalid(
            "phi_k grid must divide the Mayer tabulation grid",
        ));
    }
    let stride = mayer.grid_size / g;
    let h_at = |i: usize, j: usize| mayer.h_idx(i * stride, j * stride);

    let edges = edge_list(k);
    let graphs = enumerate_connected_graphs(k)?;
    let trees = enumerate_trees(k)?;
    let tree_data: Vec<(Vec<(usize, usize)>, Vec<(usize, usize)>)> = trees
        .iter()
        .map(|t| (t.edges(), penrose_residual_edges(t)))
        .collect();

    let mut connected_route = 0.0;
    let mut tree_route = 0.0;
    // Iterate over the (k-1)-dim tensor grid with x_{k-1} fixed to index 0.
    let total = g.pow((k - 1) as u32);
    let mut idx = vec![0usize; k];
    for flat in 0..total {
        let mut rem = flat;
        for slot in idx.iter_mut().take(k - 1) {
            *slot = rem % g;
            rem /= g;
        }
        idx[k - 1] = 0;

        let mut local_conn = 0.0;
        for &mask in &graphs {
            let mut prod = 1.0;
            for (e, &(i, j)) in edges.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    prod *= h_at(idx[i], idx[j]);
                }
            }
            local_conn += prod;
        }
        connected_route += local_conn;

        let mut local_tree = 0.0;
        for (tedges, redges) in &tree_data {
            let mut base = 1.0;
            for &(i, j) in tedges {
                base *= h_at(idx[i], idx[j]);
            }
            let mut residual = 1.0;
            for &(i, j) in redges {
                residual *= 1.0 + h_at(idx[i], idx[j]);
            }
            local_tree += base * (residual - 1.0);
        }
        tree_route += local_tree;
    }
    let cell = 1.0 / total as f64;
    Ok(PhiK {
        connected_route: connected_route * cell,
        tree_route: tree_route * cell,
    })
}

/// Truncated cluster series for log Z_h: sum_{k=2}^{kmax} binom(N,k) phi([k]),
/// using exchangeability to collapse subsets of equal size.
#[derive(Debug, Clone)]
pub struct TruncatedLogZh {
    pub log_zh: f64,
    pub per_order: Vec<(usize, f64)>,
}

pub fn log_zh_truncated(
    mayer: &MayerFunctions,
    kmax: usize,
    n: usize,
    grid_size: usize,
) -> Result<TruncatedLogZh> {
    if !(3..=4).contains(&kmax) {
        return Err(Error::Unsupported("kmax must be 3 or 4".into()));
    }
    let mut log_zh = 0.0;
    let mut per_order = Vec::new();
    for k in 2..=kmax.min(n) {
        let phi = phi_k(mayer, k, grid_size)?;
        let binom = binomial(n, k);
        log_zh += binom * phi.connected_route;
        per_order.push((k, binom * phi.connected_route));
    }
    Ok(TruncatedLogZh { log_zh, per_order })
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Both sides of the subset-sum bound at order k:
/// lhs = binom(N,k) |phi([k])|,
/// rhs = e^{beta k ||W_-||_inf} C^k N^2 ||h||_2^2 (N ||h||_1)^{k-2};
/// also reports the minimal C for which lhs <= rhs.
#[derive(Debug, Clone, Copy)]
pub struct VarphiBound {
    pub lhs: f64,
    pub rhs: f64,
    pub minimal_c: f64,
}

pub fn varphi_bound_check(
    mayer: &MayerFunctions,
    kernel: &FourierKernel,
    k: usize,
    c: f64,
    grid_size: usize,
) -> Result<VarphiBound> {
    let phi = phi_k(mayer, k, grid_size)?;
    let n = mayer.n;
    let norms = kernel.norms(mayer.grid_size)?;
    let lhs = binomial(n, k) * phi.connected_route.abs();
    let prefactor = (mayer.beta * k as f64 * norms.neg_sup).exp()
        * (n * n) as f64
        * mayer.h_l2
        * mayer.h_l2
        * (n as f64 * mayer.h_l1).powi(k as i32 - 2);
    let rhs = c.powi(k as i32) * prefactor;
    let minimal_c = if lhs == 0.0 {
        0.0
    } else {
        (lhs / prefactor).powf(1.0 / k as f64)
    };
    Ok(VarphiBound {
        lhs,
        rhs,
        minimal_c,
    })
}

/// Z_h for N in {2,3} by direct quadrature of int prod_{i<j} (1 + h(x_i-x_j)).
pub fn zh_direct_small_n(mayer: &MayerFunctions, n: usize, grid_size: usize) -> Result<f64> {
    if !(n == 2 || n == 3) {
        return Err(Error::Unsupported("zh_direct_small_n covers N in {2,3}".into()));
    }
    let g = grid_size;
    if g > mayer.grid_size || mayer.grid_size % g != 0 {
        return Err(Error::invalid("grid must divide the Mayer tabulation grid"));
    }
    let stride = mayer.grid_size / g;
    let h_at = |i: usize, j: usize| mayer.h_idx(i * stride, j * stride);
    let mut acc = 0.0;
    match n {
        2 => {
            for i in 0..g {
                acc += 1.0 + h_at(i, 0);
            }
            acc /= g as f64;
        }
        _ => {
            for i in 0..g {
                for j in 0..g {
                    acc += (1.0 + h_at(i, j)) * (1.0 + h_at(i, 0)) * (1.0 + h_at(j, 0));
                }
            }
            acc /= (g * g) as f64;
        }
    }
    Ok(acc)
}

/// Exact reconstruction check: (1 + c0)^{binom(N,2)} Z_h vs Zbar_{N,beta}.
pub fn reconstruction_check(
    kernel: &FourierKernel,
    n: usize,
    beta: f64,
    grid_size: usize,
) -> Result<(f64, f64)> {
    let mayer = mayer_functions(kernel, n, beta, grid_size)?;
    let zh = zh_direct_small_n(&mayer, n, grid_size)?;
    let lhs = (1.0 + mayer.c0).powf(binomial(n, 2)) * zh;
    let rhs = exact_z_small_n(kernel, n, beta, grid_size)?.z();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{make_kernel, KernelSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cosine() -> FourierKernel {
        make_kernel(&KernelSpec::cosine()).unwrap()
    }

    fn random_weights(k: usize, rng: &mut ChaCha8Rng) -> EdgeWeights {
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let v = rng.gen_range(-1.0..1.0);
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        EdgeWeights::new(k, h).unwrap()
    }

    #[test]
    fn connected_graph_counts() {
        assert_eq!(enumerate_connected_graphs(2).unwrap().len(), 1);
        assert_eq!(enumerate_connected_graphs(3).unwrap().len(), 4);
        assert_eq!(enumerate_connected_graphs(4).unwrap().len(), 38);
        assert_eq!(enumerate_connected_graphs(5).unwrap().len(), 728);
        assert!(enumerate_connected_graphs(6).is_err());
    }

    #[test]
    fn connected_sum_examples() {
        let w = EdgeWeights::new(2, vec![vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        assert_eq!(connected_graph_sum(&w).unwrap(), 0.3);
        // k=3, all h = h0: 3 h0^2 + h0^3.
        let h0 = 0.1;
        let w3 = EdgeWeights::new(3, vec![vec![0.0, h0, h0], vec![h0, 0.0, h0], vec![h0, h0, 0.0]])
            .unwrap();
        let s = connected_graph_sum(&w3).unwrap();
        assert!((s - (3.0 * h0 * h0 + h0 * h0 * h0)).abs() < 1e-15);
        assert!((s - 0.031).abs() < 1e-15);
        // all h = 1 at k=3: 3 paths + triangle = 4.
        let w31 = EdgeWeights::new(3, vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]])
            .unwrap();
        assert!((connected_graph_sum(&w31).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn cayley_counts_match_formula() {
        for k in 2..=7 {
            let count = cayley_count(k).unwrap();
            let expected = (k as u64).pow(k as u32 - 2);
            assert_eq!(count, expected, "k = {k}");
        }
        assert_eq!(cayley_count(7).unwrap(), 16807);
        assert!(cayley_count(8).is_err());
    }

    #[test]
    fn penrose_identity_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for k in 2..=5 {
            for _ in 0..100 {
                let w = random_weights(k, &mut rng);
                let conn = connected_graph_sum(&w).unwrap();
                let tree = penrose_tree_sum(&w).unwrap();
                assert!(
                    (conn - tree).abs() < 1e-12,
                    "k={k}: connected {conn} vs penrose {tree}"
                );
            }
        }
    }

    #[test]
    fn penrose_all_minus_one() {
        // all h = -1 at k=3: connected sum = 3 - 1 = 2; tree sum must agree.
        let w = EdgeWeights::new(
            3,
            vec![vec![0.0, -1.0, -1.0], vec![-1.0, 0.0, -1.0], vec![-1.0, -1.0, 0.0]],
        )
        .unwrap();
        assert!((connected_graph_sum(&w).unwrap() - 2.0).abs() < 1e-15);
        assert!((penrose_tree_sum(&w).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn penrose_k2_residual_empty() {
        let trees = enumerate_trees(2).unwrap();
        assert_eq!(trees.len(), 1);
        assert!(penrose_residual_edges(&trees[0]).is_empty());
    }

    #[test]
    fn mayer_functions_match_bessel_c0() {
        let k = cosine();
        let m = mayer_functions(&k, 2, 1.0, 1 << 13).unwrap();
        // c0 = I_0(beta/N) - 1 for the cosine kernel.
        let i0 = {
            let z: f64 = 0.5;
            let mut term = 1.0;
            let mut acc = 1.0;
            for kk in 1..40 {
                term *= (z * z / 4.0) / (kk as f64 * kk as f64);
                acc += term;
            }
            acc
        };
        assert!((m.c0 - (i0 - 1.0)).abs() < 1e-12, "c0 = {}", m.c0);
        assert!(m.c0 >= 0.0);
        assert!(m.h_mean().abs() < 1e-12);
        // beta = 0 degenerate case.
        let m0 = mayer_functions(&k, 2, 0.0, 256).unwrap();
        assert_eq!(m0.c0, 0.0);
        assert!(m0.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn c0_bound_random_parameters() {
        // c0 <= (beta^2 / 2 N^2) ||W||_2^2 e^{(beta/N)||W_-||_inf}.
        let k = cosine();
        let norms = k.norms(512).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let beta: f64 = rng.gen_range(0.05..2.0);
            let n = rng.gen_range(2..40usize);
            let m = mayer_functions(&k, n, beta, 2048).unwrap();
            let bound = beta * beta / (2.0 * (n * n) as f64)
                * norms.l2
                * norms.l2
                * ((beta / n as f64) * norms.neg_sup).exp();
            assert!(m.c0 <= bound + 1e-14, "beta={beta} n={n}: {} > {bound}", m.c0);
        }
    }

    #[test]
    fn phi2_vanishes_by_centering() {
        let k = cosine();
        let m = mayer_functions(&k, 3, 0.7, 1024).unwrap();
        let phi = phi_k(&m, 2, 512).unwrap();
        assert!(phi.connected_route.abs() < 1e-12);
        assert!(phi.tree_route.abs() < 1e-12);
    }

    #[test]
    fn phi_routes_agree_k3_k4() {
        let k = cosine();
        let m = mayer_functions(&k, 4, 1.0, 768).unwrap();
        let p3 = phi_k(&m, 3, 384).unwrap();
        assert!(
            (p3.connected_route - p3.tree_route).abs() < 1e-8,
            "{p3:?}"
        );
        let p4 = phi_k(&m, 4, 96).unwrap();
        assert!(
            (p4.connected_route - p4.tree_route).abs() < 1e-8,
            "{p4:?}"
        );
        // beta = 0: everything vanishes.
        let m0 = mayer_functions(&k, 4, 0.0, 256).unwrap();
        assert_eq!(phi_k(&m0, 3, 128).unwrap().connected_route, 0.0);
    }

    #[test]
    fn bare_tree_quadrature_vanishes() {
        let k = cosine();
        let m = mayer_functions(&k, 3, 0.9, 512).unwrap();
        for k_order in [3usize, 4] {
            let g = if k_order == 3 { 256 } else { 64 };
            let stride = m.grid_size / g;
            for tree in enumerate_trees(k_order).unwrap() {
                let mut acc = 0.0;
                let total = g.pow((k_order - 1) as u32);
                let mut idx = vec![0usize; k_order];
                for flat in 0..total {
                    let mut rem = flat;
                    for slot in idx.iter_mut().take(k_order - 1) {
                        *slot = rem % g;
                        rem /= g;
                    }
                    idx[k_order - 1] = 0;
                    let mut prod = 1.0;
                    for (i, j) in tree.edges() {
                        prod *= m.h[((idx[i] * stride + m.grid_size) - idx[j] * stride)
                            % m.grid_size];
                    }
                    acc += prod;
                }
                assert!((acc / total as f64).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn cycle_trace_bound() {
        let k = cosine();
        let m = mayer_functions(&k, 4, 1.2, 1024).unwrap();
        let g = 512usize;
        let stride = m.grid_size / g;
        let mut acc = 0.0;
        for i in 0..g {
            for j in 0..g {
                acc += m.h[(i * stride) % m.grid_size]
                    * m.h[((j + g - i) * stride) % m.grid_size]
                    * m.h[((g - j) * stride) % m.grid_size];
            }
        }
        let triangle = (acc / (g * g) as f64).abs();
        assert!(triangle <= m.h_l2 * m.h_l2 * m.h_l1 + 1e-14);
    }

    #[test]
    fn reconstruction_identity_small_n() {
        let k = cosine();
        for (n, beta) in [(2usize, 1.0), (3usize, 0.5), (3usize, 1.0)] {
            let grid = if n == 2 { 4096 } else { 512 };
            let (lhs, rhs) = reconstruction_check(&k, n, beta, grid).unwrap();
            assert!(
                (lhs - rhs).abs() < 1e-8,
                "N={n} beta={beta}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn truncated_series_exact_at_n3() {
        let k = cosine();
        let beta = 0.5;
        let m = mayer_functions(&k, 3, beta, 1024).unwrap();
        let trunc = log_zh_truncated(&m, 3, 3, 512).unwrap();
        let zh = zh_direct_small_n(&m, 3, 512).unwrap();
        // exp(binom(3,3) * triangle) vs 1 + triangle: relative error T^2/2.
        let rel = ((trunc.log_zh.exp() - zh) / zh).abs();
        assert!(rel < 1e-6, "rel = {rel:.2e}");
        // And against the independent partition quadrature.
        let zbar = exact_z_small_n(&k, 3, beta, 512).unwrap().z();
        let lhs = (1.0 + m.c0).powf(binomial(3, 2)) * trunc.log_zh.exp();
        assert!(((lhs - zbar) / zbar).abs() < 1e-6);
    }

    #[test]
    fn varphi_bound_reports_minimal_c() {
        let k = cosine();
        let m = mayer_functions(&k, 8, 0.5, 1024).unwrap();
        let b = varphi_bound_check(&m, &k, 3, 8.0, 256).unwrap();
        assert!(b.lhs <= b.rhs, "lhs {} rhs {}", b.lhs, b.rhs);
        assert!(b.minimal_c <= 8.0);
        // k = 2: lhs = binom(N,2)|phi_2| = 0 within rounding.
        let b2 = varphi_bound_check(&m, &k, 2, 1.0, 256).unwrap();
        assert!(b2.lhs < 1e-10);
    }
}
