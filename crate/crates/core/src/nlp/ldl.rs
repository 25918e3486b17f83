//! Sparse `LDLᵀ` of the KKT matrix
//!
//! ```text
//! ⎡ W + D_x   Jᵀ    ⎤
//! ⎣ J        −δ_c I ⎦
//! ```
//!
//! The factorization uses 1×1 pivots only, so the elimination order carries
//! the stability burden. Variables are ordered by reverse Cuthill–McKee with
//! high-degree variables moved to the end, and every constraint row is
//! placed right after the last of its (non-dense) variables. A constraint
//! pivot is then a Schur complement `−(J W⁻¹ Jᵀ)ᵢᵢ − δ_c` instead of the tiny
//! `−δ_c`.

use std::collections::VecDeque;

/// Fixed sparsity of the KKT matrix with the elimination order and the
/// symbolic factorization.
#[derive(Debug, Clone)]
pub struct KktPattern {
    n: usize,
    m: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Upper-triangular CSC of the permuted matrix (diagonal included).
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    hess_slot: Vec<usize>,
    jac_slot: Vec<usize>,
    diag_slot: Vec<usize>,
    parent: Vec<usize>,
    lp: Vec<usize>,
}

const NONE: usize = usize::MAX;

impl KktPattern {
    pub fn new(n: usize, m: usize, hess: &[(usize, usize)], jac: &[(usize, usize)]) -> Self {
        let dim = n + m;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for &(r, c) in hess {
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
        for &(r, c) in jac {
            adj[n + r].push(c);
            adj[c].push(n + r);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let perm = elimination_order(n, m, &adj);
        let mut iperm = vec![0; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // (row, col) in permuted upper triangle for each source entry
        let place = |a: usize, b: usize| {
            let (pa, pb) = (iperm[a], iperm[b]);
            if pa <= pb {
                (pa, pb)
            } else {
                (pb, pa)
            }
        };
        let hess_pos: Vec<(usize, usize)> = hess.iter().map(|&(r, c)| place(r, c)).collect();
        let jac_pos: Vec<(usize, usize)> = jac.iter().map(|&(r, c)| place(n + r, c)).collect();
        let diag_pos: Vec<(usize, usize)> = (0..dim).map(|i| (iperm[i], iperm[i])).collect();

        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); dim];
        for &(r, c) in hess_pos.iter().chain(&jac_pos).chain(&diag_pos) {
            cols[c].push(r);
        }
        let mut colptr = vec![0; dim + 1];
        let mut rowidx = Vec::new();
        for (c, rows) in cols.iter_mut().enumerate() {
            rows.sort_unstable();
            rows.dedup();
            rowidx.extend_from_slice(rows);
            colptr[c + 1] = rowidx.len();
        }
        let slot = |(r, c): (usize, usize)| colptr[c] + rowidx[colptr[c]..colptr[c + 1]].binary_search(&r).unwrap();
        let hess_slot = hess_pos.into_iter().map(slot).collect();
        let jac_slot = jac_pos.into_iter().map(slot).collect();
        let diag_slot = diag_pos.into_iter().map(slot).collect();

        let (parent, lnz) = symbolic(dim, &colptr, &rowidx);
        let mut lp = vec![0; dim + 1];
        for k in 0..dim {
            lp[k + 1] = lp[k] + lnz[k];
        }
        Self { n, m, perm, colptr, rowidx, hess_slot, jac_slot, diag_slot, parent, lp }
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Nonzeros of the factor `L`.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.dim()]
    }

    /// Assembles the matrix values: `hess` and `jac` aligned with the
    /// structures passed to [`KktPattern::new`], `diag_x` added to the
    /// variable diagonal and `−delta_c` on the constraint diagonal.
    pub fn assemble(&self, hess: &[f64], jac: &[f64], diag_x: &[f64], delta_c: f64, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.nnz(), 0.0);
        for (s, v) in self.hess_slot.iter().zip(hess) {
            out[*s] += v;
        }
        for (s, v) in self.jac_slot.iter().zip(jac) {
            out[*s] += v;
        }
        for i in 0..self.n {
            out[self.diag_slot[i]] += diag_x[i];
        }
        for i in 0..self.m {
            out[self.diag_slot[self.n + i]] -= delta_c;
        }
    }

    /// `K v` for assembled `values`, in the original ordering.
    pub fn multiply(&self, values: &[f64], v: &[f64]) -> Vec<f64> {
        let dim = self.dim();
        let vp: Vec<f64> = (0..dim).map(|k| v[self.perm[k]]).collect();
        let mut out = vec![0.0; dim];
        for c in 0..dim {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[p];
                out[r] += values[p] * vp[c];
                if r != c {
                    out[c] += values[p] * vp[r];
                }
            }
        }
        let mut res = vec![0.0; dim];
        for k in 0..dim {
            res[self.perm[k]] = out[k];
        }
        res
    }

    /// Numeric factorization. Returns the index of the first zero pivot on
    /// breakdown.
    pub fn factor(&self, values: &[f64]) -> Result<LdlFactor, usize> {
        let dim = self.dim();
        let lnz_total = self.factor_nnz();
        let mut li = vec![0usize; lnz_total];
        let mut lx = vec![0.0; lnz_total];
        let mut d = vec![0.0; dim];
        let mut y = vec![0.0; dim];
        let mut pattern = vec![0usize; dim];
        let mut flag = vec![NONE; dim];
        let mut lnz = vec![0usize; dim];
        for k in 0..dim {
            y[k] = 0.0;
            let mut top = dim;
            flag[k] = k;
            lnz[k] = 0;
            for p in self.colptr[k]..self.colptr[k + 1] {
                let mut i = self.rowidx[p];
                y[i] += values[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = self.parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..dim] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = self.lp[i] + lnz[i];
                for p in self.lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[k] -= l_ki * yi;
                li[p2] = k;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if d[k] == 0.0 || !d[k].is_finite() {
                return Err(k);
            }
        }
        Ok(LdlFactor { perm: self.perm.clone(), lp: self.lp.clone(), li, lx, d, n: self.n })
    }
}

/// Elimination tree and column counts of `L` (Liu's algorithm as used in
/// up-looking `LDLᵀ`).
fn symbolic(dim: usize, colptr: &[usize], rowidx: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut parent = vec![NONE; dim];
    let mut flag = vec![NONE; dim];
    let mut lnz = vec![0; dim];
    for k in 0..dim {
        flag[k] = k;
        for p in colptr[k]..colptr[k + 1] {
            let mut i = rowidx[p];
            if i < k {
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
    }
    (parent, lnz)
}

fn elimination_order(n: usize, m: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let dim = n + m;
    let threshold = 16usize.max((4.0 * (dim as f64).sqrt()) as usize);
    let dense: Vec<bool> = (0..dim).map(|i| i < n && adj[i].len() > threshold).collect();

    let rcm = reverse_cuthill_mckee(adj, &dense);
    let mut var_pos = vec![NONE; n];
    let mut vars: Vec<usize> = rcm.into_iter().filter(|&v| v < n).collect();
    vars.extend((0..n).filter(|&v| dense[v]));
    for (p, &v) in vars.iter().enumerate() {
        var_pos[v] = p;
    }
    // constraints keyed by the last non-dense variable they touch
    let mut after: Vec<Vec<usize>> = vec![Vec::new(); vars.len() + 1];
    for c in 0..m {
        let key = adj[n + c].iter().filter(|&&v| v < n && !dense[v]).map(|&v| var_pos[v]).max();
        match key {
            Some(p) => after[p].push(n + c),
            None => after[vars.len()].push(n + c),
        }
    }
    let mut order = Vec::with_capacity(dim);
    let mut dense_tail = Vec::new();
    for (p, &v) in vars.iter().enumerate() {
        if dense[v] {
            dense_tail.push(v);
            dense_tail.extend_from_slice(&after[p]);
        } else {
            order.push(v);
            order.extend_from_slice(&after[p]);
        }
    }
    order.extend(dense_tail);
    order.extend_from_slice(&after[vars.len()]);
    order
}

/// RCM over the graph with `skip` nodes removed; skipped nodes are not in
/// the output.
fn reverse_cuthill_mckee(adj: &[Vec<usize>], skip: &[bool]) -> Vec<usize> {
    let dim = adj.len();
    let degree: Vec<usize> = (0..dim).map(|i| adj[i].iter().filter(|&&j| !skip[j]).count()).collect();
    let mut visited = skip.to_vec();
    let mut order = Vec::with_capacity(dim);
    // start each component from a low-degree, far-away node
    while let Some(seed) = (0..dim).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)) {
        let start = pseudo_peripheral(adj, skip, &degree, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(adj: &[Vec<usize>], skip: &[bool], degree: &[usize], seed: usize) -> usize {
    let mut node = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(adj, skip, node);
        let depth = levels.iter().filter(|&&l| l != NONE).max().copied().unwrap_or(0);
        if depth <= ecc && ecc > 0 {
            break;
        }
        ecc = depth;
        node = (0..adj.len()).filter(|&i| levels[i] == depth).min_by_key(|&i| (degree[i], i)).unwrap();
    }
    node
}

fn bfs_levels(adj: &[Vec<usize>], skip: &[bool], start: usize) -> Vec<usize> {
    let mut level = vec![NONE; adj.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &j in &adj[v] {
            if !skip[j] && level[j] == NONE {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    n: usize,
}

impl LdlFactor {
    /// `(positive, negative)` pivot counts.
    pub fn inertia(&self) -> (usize, usize) {
        let neg = self.d.iter().filter(|&&v| v < 0.0).count();
        (self.d.len() - neg, neg)
    }

    /// Whether the inertia is `(n, m)` for `n` variables.
    pub fn has_correct_inertia(&self) -> bool {
        self.inertia().0 == self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let dim = self.d.len();
        let mut x: Vec<f64> = (0..dim).map(|k| b[self.perm[k]]).collect();
        for j in 0..dim {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..dim {
            x[j] /= self.d[j];
        }
        for j in (0..dim).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; dim];
        for k in 0..dim {
            out[self.perm[k]] = x[k];
        }
        out
    }
}
