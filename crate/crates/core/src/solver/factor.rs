//! Basis factorizations used by the simplex method.
//!
//! Vectors passed to `ftran` are indexed by constraint row on input and by
//! basis position on output; `btran` goes the other way.

/// Sparse column: parallel row indices and values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseCol {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseCol {
    pub fn unit(row: usize) -> SparseCol {
        SparseCol {
            idx: vec![row],
            val: vec![1.0],
        }
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(i, v)| v * y[*i]).sum()
    }

    pub fn scatter(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, v) in self.idx.iter().zip(&self.val) {
            out[*i] = *v;
        }
    }
}

/// Basis positions and rows left without a pivot by a failed factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

pub trait BasisFactor {
    /// Factor the basis whose position `k` holds column `cols[k]`.
    fn factor(&mut self, m: usize, cols: &[&SparseCol]) -> Result<(), Singular>;
    /// Solve `B x = b` in place.
    fn ftran(&mut self, x: &mut [f64]);
    /// Solve `B^T y = c` in place.
    fn btran(&mut self, y: &mut [f64]);
    /// Replace the column at `pos` given `alpha = B^{-1} a` of the entering column.
    fn update(&mut self, pos: usize, alpha: &[f64]);
    /// True once enough updates have accumulated that a fresh factorization pays off.
    fn wants_refactor(&self) -> bool;
}

const PIVOT_ABS_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const MARKOWITZ_SEARCH: usize = 4;
const MAX_UPDATES: usize = 64;

#[derive(Debug, Clone)]
struct URow {
    row: usize,
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

/// Markowitz LU with threshold pivoting and product-form updates.
#[derive(Debug, Clone, Default)]
pub struct SparseLu {
    m: usize,
    lower: Vec<(usize, Vec<(usize, f64)>)>,
    upper: Vec<URow>,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl SparseLu {
    pub fn new() -> SparseLu {
        SparseLu::default()
    }
}

/// Bucket lists keyed by count; stale entries are skipped on read.
struct Buckets {
    lists: Vec<Vec<usize>>,
}

impl Buckets {
    fn new(m: usize) -> Buckets {
        Buckets {
            lists: vec![Vec::new(); m + 2],
        }
    }

    fn push(&mut self, count: usize, item: usize) {
        let k = count.min(self.lists.len() - 1);
        self.lists[k].push(item);
    }
}

impl BasisFactor for SparseLu {
    fn factor(&mut self, m: usize, cols: &[&SparseCol]) -> Result<(), Singular> {
        self.m = m;
        self.lower.clear();
        self.upper.clear();
        self.etas.clear();
        self.work = vec![0.0; m];

        // Active submatrix: values by column, patterns by row.
        let mut col: Vec<Vec<(usize, f64)>> = cols
            .iter()
            .map(|c| c.idx.iter().copied().zip(c.val.iter().copied()).filter(|(_, v)| *v != 0.0).collect())
            .collect();
        let mut row_pat: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, c) in col.iter().enumerate() {
            for (i, _) in c {
                row_pat[*i].push(j);
            }
        }
        let mut row_live = vec![true; m];
        let mut col_live = vec![true; m];
        let mut row_nz: Vec<usize> = row_pat.iter().map(Vec::len).collect();
        let mut col_nz: Vec<usize> = col.iter().map(Vec::len).collect();
        let mut col_b = Buckets::new(m);
        let mut row_b = Buckets::new(m);
        for (j, &nz) in col_nz.iter().enumerate() {
            col_b.push(nz, j);
        }
        for (i, &nz) in row_nz.iter().enumerate() {
            row_b.push(nz, i);
        }
        let mut mark = vec![usize::MAX; m];

        for _ in 0..m {
            let pick = choose_pivot(&col, &row_pat, &row_live, &col_live, &row_nz, &col_nz, &mut col_b, &mut row_b);
            let Some((r, c)) = pick else { break };

            let pivot = col[c].iter().find(|(i, _)| *i == r).map(|(_, v)| *v).unwrap();
            // Row r of the active matrix becomes a row of U.
            let mut entries = Vec::new();
            for &j in &row_pat[r] {
                if j != c && col_live[j] {
                    if let Some(k) = col[j].iter().position(|(i, _)| *i == r) {
                        entries.push((j, col[j][k].1));
                        col[j].swap_remove(k);
                        col_nz[j] -= 1;
                        col_b.push(col_nz[j], j);
                    }
                }
            }
            entries.sort_by_key(|e| e.0);
            let mults: Vec<(usize, f64)> = col[c]
                .iter()
                .filter(|(i, _)| *i != r && row_live[*i])
                .map(|(i, v)| (*i, v / pivot))
                .collect();

            for &(j, urj) in &entries {
                for (k, (i, _)) in col[j].iter().enumerate() {
                    mark[*i] = k;
                }
                for &(i, l) in &mults {
                    let delta = -l * urj;
                    let k = mark[i];
                    if k != usize::MAX && k < col[j].len() && col[j][k].0 == i {
                        col[j][k].1 += delta;
                    } else {
                        col[j].push((i, delta));
                        row_pat[i].push(j);
                        row_nz[i] += 1;
                        col_nz[j] += 1;
                    }
                }
                for (i, _) in &col[j] {
                    mark[*i] = usize::MAX;
                }
                col_b.push(col_nz[j], j);
            }
            for &(i, _) in &mults {
                row_nz[i] -= 1;
                row_b.push(row_nz[i], i);
            }
            row_live[r] = false;
            col_live[c] = false;
            col[c].clear();
            if !mults.is_empty() {
                self.lower.push((r, mults));
            }
            self.upper.push(URow {
                row: r,
                pos: c,
                pivot,
                entries,
            });
        }

        if self.upper.len() < m {
            return Err(Singular {
                positions: (0..m).filter(|j| col_live[*j]).collect(),
                rows: (0..m).filter(|i| row_live[*i]).collect(),
            });
        }
        Ok(())
    }

    fn ftran(&mut self, x: &mut [f64]) {
        for (r, mults) in &self.lower {
            let xr = x[*r];
            if xr != 0.0 {
                for (i, l) in mults {
                    x[*i] -= l * xr;
                }
            }
        }
        let out = &mut self.work;
        for u in self.upper.iter().rev() {
            let mut s = x[u.row];
            for (j, a) in &u.entries {
                s -= a * out[*j];
            }
            out[u.pos] = s / u.pivot;
        }
        x.copy_from_slice(out);
        for e in &self.etas {
            let zp = x[e.pos] / e.pivot;
            if zp != 0.0 {
                for (i, a) in &e.others {
                    x[*i] -= a * zp;
                }
            }
            x[e.pos] = zp;
        }
    }

    fn btran(&mut self, y: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let s: f64 = e.others.iter().map(|(i, a)| a * y[*i]).sum();
            y[e.pos] = (y[e.pos] - s) / e.pivot;
        }
        let w = &mut self.work;
        for u in &self.upper {
            let wr = y[u.pos] / u.pivot;
            w[u.row] = wr;
            if wr != 0.0 {
                for (j, a) in &u.entries {
                    y[*j] -= a * wr;
                }
            }
        }
        y.copy_from_slice(w);
        for (r, mults) in self.lower.iter().rev() {
            let s: f64 = mults.iter().map(|(i, l)| l * y[*i]).sum();
            y[*r] -= s;
        }
    }

    fn update(&mut self, pos: usize, alpha: &[f64]) {
        let others = alpha
            .iter()
            .enumerate()
            .filter(|(i, a)| *i != pos && **a != 0.0)
            .map(|(i, a)| (i, *a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            others,
        });
    }

    fn wants_refactor(&self) -> bool {
        self.etas.len() >= MAX_UPDATES
    }
}

#[allow(clippy::too_many_arguments)]
fn choose_pivot(
    col: &[Vec<(usize, f64)>],
    row_pat: &[Vec<usize>],
    row_live: &[bool],
    col_live: &[bool],
    row_nz: &[usize],
    col_nz: &[usize],
    col_b: &mut Buckets,
    row_b: &mut Buckets,
) -> Option<(usize, usize)> {
    let col_max = |j: usize| col[j].iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);

    // Column singletons never need an eliminate step.
    while let Some(&j) = col_b.lists[1].last() {
        if col_live[j] && col_nz[j] == 1 {
            let (i, v) = col[j][0];
            if v.abs() > PIVOT_ABS_TOL {
                return Some((i, j));
            }
        }
        col_b.lists[1].pop();
    }
    // Row singletons avoid fill.
    while let Some(&i) = row_b.lists[1].last() {
        if row_live[i] && row_nz[i] == 1 {
            let j = row_pat[i].iter().copied().find(|j| col_live[*j] && col[*j].iter().any(|(r, _)| *r == i));
            if let Some(j) = j {
                let v = col[j].iter().find(|(r, _)| *r == i).unwrap().1;
                if v.abs() > PIVOT_ABS_TOL && v.abs() >= THRESHOLD * col_max(j) {
                    row_b.lists[1].pop();
                    return Some((i, j));
                }
            }
        }
        row_b.lists[1].pop();
    }

    // Markowitz search over the sparsest columns.
    let mut best: Option<(usize, usize, usize)> = None;
    let mut searched = 0;
    for count in 2..col_b.lists.len() {
        let mut k = 0;
        while k < col_b.lists[count].len() {
            let j = col_b.lists[count][k];
            if !col_live[j] || col_nz[j] != count {
                col_b.lists[count].swap_remove(k);
                continue;
            }
            k += 1;
            let cmax = col_max(j);
            for &(i, v) in &col[j] {
                if v.abs() <= PIVOT_ABS_TOL || v.abs() < THRESHOLD * cmax {
                    continue;
                }
                let cost = (row_nz[i] - 1) * (count - 1);
                let cand = (cost, j, i);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
            searched += 1;
            if searched >= MARKOWITZ_SEARCH && best.is_some() {
                return best.map(|(_, j, i)| (i, j));
            }
        }
        if best.is_some_and(|b| b.0 <= (count - 1) * (count - 1)) {
            break;
        }
    }
    if let Some((_, j, i)) = best {
        return Some((i, j));
    }
    // Whatever is left is numerically singular; a zero-count column may still
    // be live, which the caller reports.
    None
}

/// Explicit inverse kept up to date by Gauss-Jordan row operations.
#[derive(Debug, Clone, Default)]
pub struct DenseInverse {
    m: usize,
    inv: Vec<f64>,
    updates: usize,
    work: Vec<f64>,
}

impl DenseInverse {
    pub fn new() -> DenseInverse {
        DenseInverse::default()
    }
}

const DENSE_REFACTOR: usize = 100;

impl BasisFactor for DenseInverse {
    fn factor(&mut self, m: usize, cols: &[&SparseCol]) -> Result<(), Singular> {
        self.m = m;
        self.updates = 0;
        self.work = vec![0.0; m];
        // a: rows x positions; g: running inverse rows.
        let mut a = vec![0.0; m * m];
        for (k, c) in cols.iter().enumerate() {
            for (i, v) in c.idx.iter().zip(&c.val) {
                a[i * m + k] = *v;
            }
        }
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            g[i * m + i] = 1.0;
        }
        let mut row_of_pos = vec![usize::MAX; m];
        let mut used = vec![false; m];
        let mut missing = Vec::new();
        for k in 0..m {
            let mut best = None;
            let mut best_abs = PIVOT_ABS_TOL;
            for i in 0..m {
                if !used[i] && a[i * m + k].abs() > best_abs {
                    best_abs = a[i * m + k].abs();
                    best = Some(i);
                }
            }
            let Some(r) = best else {
                missing.push(k);
                continue;
            };
            used[r] = true;
            row_of_pos[k] = r;
            let p = a[r * m + k];
            for j in 0..m {
                a[r * m + j] /= p;
                g[r * m + j] /= p;
            }
            for i in 0..m {
                let f = a[i * m + k];
                if i != r && f != 0.0 {
                    for j in 0..m {
                        a[i * m + j] -= f * a[r * m + j];
                        g[i * m + j] -= f * g[r * m + j];
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Singular {
                positions: missing,
                rows: (0..m).filter(|i| !used[*i]).collect(),
            });
        }
        let mut inv = vec![0.0; m * m];
        for k in 0..m {
            let r = row_of_pos[k];
            inv[k * m..(k + 1) * m].copy_from_slice(&g[r * m..(r + 1) * m]);
        }
        self.inv = inv;
        Ok(())
    }

    fn ftran(&mut self, x: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let row = &self.inv[k * m..(k + 1) * m];
            self.work[k] = row.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
        }
        x.copy_from_slice(&self.work);
    }

    fn btran(&mut self, y: &mut [f64]) {
        let m = self.m;
        self.work.iter_mut().for_each(|v| *v = 0.0);
        for (k, &c) in y.iter().enumerate().take(m) {
            if c != 0.0 {
                let row = &self.inv[k * m..(k + 1) * m];
                for (w, a) in self.work.iter_mut().zip(row) {
                    *w += c * a;
                }
            }
        }
        y.copy_from_slice(&self.work);
    }

    fn update(&mut self, pos: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[pos];
        let (before, rest) = self.inv.split_at_mut(pos * m);
        let (prow, after) = rest.split_at_mut(m);
        prow.iter_mut().for_each(|v| *v /= p);
        for (k, a) in alpha.iter().enumerate() {
            if k == pos || *a == 0.0 {
                continue;
            }
            let row = if k < pos {
                &mut before[k * m..(k + 1) * m]
            } else {
                &mut after[(k - pos - 1) * m..(k - pos) * m]
            };
            for (v, pv) in row.iter_mut().zip(prow.iter()) {
                *v -= a * pv;
            }
        }
        self.updates += 1;
    }

    fn wants_refactor(&self) -> bool {
        self.updates >= DENSE_REFACTOR
    }
}
