//! Sparse LU factorization of simplex bases.
//!
//! Right-looking Gaussian elimination on rows with Markowitz pivot selection
//! and threshold partial pivoting. Singleton columns and rows are taken first,
//! which covers the (large) triangular part of typical LP bases without any
//! fill. Updates between refactorizations are handled by the caller through an
//! eta file.

const PIVOT_THRESHOLD: f64 = 0.1;
const ABS_PIVOT_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
const MARKOWITZ_CANDIDATES: usize = 4;

#[derive(Debug, Clone)]
pub(crate) struct Singular {
    /// Basis positions (columns) that could not be pivoted.
    pub cols: Vec<usize>,
    /// Rows left without a pivot, same length as `cols`.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactor {
    // Elimination steps: pivot row and the multipliers applied to other rows.
    l_steps: Vec<(usize, usize, usize)>,
    l_entries: Vec<(usize, f64)>,
    // U rows in pivot order: (pivot row, pivot col, pivot value, range).
    u_steps: Vec<(usize, usize, f64, usize, usize)>,
    u_entries: Vec<(usize, f64)>,
}

impl LuFactor {
    /// Factorizes the `m x m` matrix whose column `j` is `columns[j]`
    /// (sparse `(row, value)` lists).
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<LuFactor, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        let mut col_count = vec![0usize; m];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                if v.abs() > DROP_TOL {
                    rows[i].push((j, v));
                    col_rows[j].push(i);
                    col_count[j] += 1;
                }
            }
        }

        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut col_singletons: Vec<usize> = (0..m).rev().filter(|&j| col_count[j] == 1).collect();
        let mut row_singletons: Vec<usize> = (0..m).rev().filter(|&i| rows[i].len() == 1).collect();

        let mut f = LuFactor::default();

        // Dense scatter of the pivot row.
        let mut scatter = vec![0.0f64; m];
        let mut mark = vec![false; m];
        let mut seen = vec![false; m];
        let mut touched_cols: Vec<usize> = Vec::new();

        for _step in 0..m {
            let mut pivot: Option<(usize, usize)> = None;

            while let Some(j) = col_singletons.pop() {
                if col_done[j] || col_count[j] != 1 {
                    continue;
                }
                let i = col_rows[j]
                    .iter()
                    .copied()
                    .find(|&i| !row_done[i] && rows[i].iter().any(|&(c, _)| c == j));
                if let Some(i) = i {
                    let v = rows[i]
                        .iter()
                        .find(|&&(c, _)| c == j)
                        .map(|e| e.1)
                        .unwrap_or(0.0);
                    if v.abs() > ABS_PIVOT_TOL {
                        pivot = Some((i, j));
                        break;
                    }
                }
            }

            if pivot.is_none() {
                while let Some(i) = row_singletons.pop() {
                    if row_done[i] || rows[i].len() != 1 {
                        continue;
                    }
                    let (j, v) = rows[i][0];
                    if v.abs() <= ABS_PIVOT_TOL {
                        continue;
                    }
                    let col_max = active_col_max(j, &col_rows, &rows, &row_done);
                    if v.abs() >= PIVOT_THRESHOLD * col_max {
                        pivot = Some((i, j));
                        break;
                    }
                }
            }

            if pivot.is_none() {
                pivot = markowitz_search(&rows, &col_rows, &col_count, &row_done, &col_done);
            }

            let (p, q) = match pivot {
                Some(pq) => pq,
                None => {
                    let cols: Vec<usize> = (0..m).filter(|&j| !col_done[j]).collect();
                    let rows_left: Vec<usize> = (0..m).filter(|&i| !row_done[i]).collect();
                    return Err(Singular {
                        cols,
                        rows: rows_left,
                    });
                }
            };

            let pivot_row = std::mem::take(&mut rows[p]);
            let pivot_val = pivot_row
                .iter()
                .find(|&&(c, _)| c == q)
                .map(|e| e.1)
                .expect("pivot entry present");
            for &(c, v) in &pivot_row {
                if c != q {
                    scatter[c] = v;
                    mark[c] = true;
                }
            }

            // Eliminate column q from every other active row.
            let l_start = f.l_entries.len();
            let targets: Vec<usize> = col_rows[q]
                .iter()
                .copied()
                .filter(|&r| r != p && !row_done[r])
                .collect();
            for r in targets {
                let pos = match rows[r].iter().position(|&(c, _)| c == q) {
                    Some(pos) => pos,
                    None => continue,
                };
                let a_rq = rows[r][pos].1;
                rows[r].swap_remove(pos);
                let l = a_rq / pivot_val;
                f.l_entries.push((r, l));

                touched_cols.clear();
                let mut k = 0;
                while k < rows[r].len() {
                    let (c, v) = rows[r][k];
                    if mark[c] {
                        touched_cols.push(c);
                        seen[c] = true;
                        let nv = v - l * scatter[c];
                        if nv.abs() <= DROP_TOL {
                            rows[r].swap_remove(k);
                            col_count[c] -= 1;
                            if col_count[c] == 1 {
                                col_singletons.push(c);
                            }
                            continue;
                        }
                        rows[r][k].1 = nv;
                    }
                    k += 1;
                }
                // Fill-in for pivot-row columns not already present in row r.
                for &(c, _) in &pivot_row {
                    if c == q || seen[c] {
                        continue;
                    }
                    let nv = -l * scatter[c];
                    if nv.abs() > DROP_TOL {
                        rows[r].push((c, nv));
                        col_rows[c].push(r);
                        col_count[c] += 1;
                    }
                }
                for &c in &touched_cols {
                    seen[c] = false;
                }
                if rows[r].len() == 1 {
                    row_singletons.push(r);
                }
            }
            f.l_steps.push((p, l_start, f.l_entries.len()));

            // Retire the pivot row and column.
            let u_start = f.u_entries.len();
            for &(c, v) in &pivot_row {
                mark[c] = false;
                scatter[c] = 0.0;
                if c != q {
                    f.u_entries.push((c, v));
                    col_count[c] -= 1;
                    if col_count[c] == 1 {
                        col_singletons.push(c);
                    }
                }
            }
            f.u_steps
                .push((p, q, pivot_val, u_start, f.u_entries.len()));
            row_done[p] = true;
            col_done[q] = true;
            col_count[q] = 0;
            col_rows[q] = Vec::new();
        }
        Ok(f)
    }

    #[cfg(test)]
    pub fn nnz(&self) -> usize {
        self.l_entries.len() + self.u_entries.len() + self.u_steps.len()
    }

    /// Solves `B x = b` in place: on entry `rhs` is indexed by row, on exit
    /// the result is indexed by basis position.
    pub fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        for &(p, s, e) in &self.l_steps {
            let bp = rhs[p];
            if bp != 0.0 {
                for &(r, l) in &self.l_entries[s..e] {
                    rhs[r] -= l * bp;
                }
            }
        }
        for &(p, q, piv, s, e) in self.u_steps.iter().rev() {
            let mut acc = rhs[p];
            for &(j, u) in &self.u_entries[s..e] {
                acc -= u * out[j];
            }
            out[q] = acc / piv;
        }
    }

    /// Solves `B^T y = c`: `c` is indexed by basis position (consumed as
    /// workspace), the result `y` is indexed by row.
    pub fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for &(p, q, piv, s, e) in &self.u_steps {
            let w = c[q] / piv;
            y[p] = w;
            if w != 0.0 {
                for &(j, u) in &self.u_entries[s..e] {
                    c[j] -= u * w;
                }
            }
        }
        for &(p, s, e) in self.l_steps.iter().rev() {
            let mut acc = y[p];
            for &(r, l) in &self.l_entries[s..e] {
                acc -= l * y[r];
            }
            y[p] = acc;
        }
    }
}

fn active_col_max(
    j: usize,
    col_rows: &[Vec<usize>],
    rows: &[Vec<(usize, f64)>],
    row_done: &[bool],
) -> f64 {
    let mut best: f64 = 0.0;
    for &i in &col_rows[j] {
        if row_done[i] {
            continue;
        }
        if let Some(&(_, v)) = rows[i].iter().find(|&&(c, _)| c == j) {
            best = best.max(v.abs());
        }
    }
    best
}

fn markowitz_search(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_count: &[usize],
    row_done: &[bool],
    col_done: &[bool],
) -> Option<(usize, usize)> {
    // Candidate columns with the smallest active counts.
    let mut candidates: Vec<(usize, usize)> = Vec::with_capacity(MARKOWITZ_CANDIDATES + 1);
    for j in 0..col_count.len() {
        if col_done[j] || col_count[j] == 0 {
            continue;
        }
        let cnt = col_count[j];
        if candidates.len() < MARKOWITZ_CANDIDATES {
            candidates.push((cnt, j));
            candidates.sort_unstable();
        } else if cnt < candidates[MARKOWITZ_CANDIDATES - 1].0 {
            candidates[MARKOWITZ_CANDIDATES - 1] = (cnt, j);
            candidates.sort_unstable();
        }
    }

    let mut best: Option<(usize, f64, usize, usize)> = None;
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for &(cnt, j) in &candidates {
        entries.clear();
        for &i in &col_rows[j] {
            if row_done[i] {
                continue;
            }
            if let Some(&(_, v)) = rows[i].iter().find(|&&(c, _)| c == j) {
                if !entries.iter().any(|&(ei, _)| ei == i) {
                    entries.push((i, v));
                }
            }
        }
        let col_max = entries.iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));
        if col_max <= ABS_PIVOT_TOL {
            continue;
        }
        for &(i, v) in &entries {
            if v.abs() < PIVOT_THRESHOLD * col_max || v.abs() <= ABS_PIVOT_TOL {
                continue;
            }
            let cost = (rows[i].len() - 1) * (cnt - 1);
            let better = match best {
                None => true,
                Some((bc, bv, _, _)) => cost < bc || (cost == bc && v.abs() > bv),
            };
            if better {
                best = Some((cost, v.abs(), i, j));
            }
        }
    }
    best.map(|(_, _, i, j)| (i, j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| a[i][j] != 0.0)
                    .map(|i| (i, a[i][j]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn solves_small_dense_system() {
        let a = vec![
            vec![4.0, 1.0, 0.0, 2.0],
            vec![1.0, 3.0, 1.0, 0.0],
            vec![0.0, 1.0, 5.0, 1.0],
            vec![2.0, 0.0, 1.0, 6.0],
        ];
        let lu = LuFactor::factorize(4, &dense_to_cols(&a)).unwrap();
        let x_true = [1.0, -2.0, 0.5, 3.0];
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; 4];
        lu.ftran(&mut b, &mut x);
        for (u, v) in x.iter().zip(x_true) {
            assert!((u - v).abs() < 1e-12);
        }

        // B^T y = c
        let y_true = [0.3, 1.0, -1.0, 2.0];
        let at: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| a[j][i]).collect()).collect();
        let mut c = matvec(&at, &y_true);
        let mut y = vec![0.0; 4];
        lu.btran(&mut c, &mut y);
        for (u, v) in y.iter().zip(y_true) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn permuted_triangular_needs_no_fill() {
        let a = vec![
            vec![0.0, 2.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![3.0, 1.0, -1.0],
        ];
        let lu = LuFactor::factorize(3, &dense_to_cols(&a)).unwrap();
        assert_eq!(lu.nnz(), 5);
        let mut b = vec![2.0, 1.0, 3.0];
        let mut x = vec![0.0; 3];
        lu.ftran(&mut b, &mut x);
        let back = matvec(&a, &x);
        assert!((back[0] - 2.0).abs() < 1e-14);
        assert!((back[1] - 1.0).abs() < 1e-14);
        assert!((back[2] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_singular_basis() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let err = LuFactor::factorize(2, &dense_to_cols(&a)).unwrap_err();
        assert_eq!(err.cols.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
