//! Small dense elimination routines used by the RREF oracle and MDS decoding.

const PIVOT_EPS: f64 = 1e-9;

/// Reduced row echelon form in place; returns the pivot column of each nonzero row.
pub(crate) fn rref(rows: &mut Vec<Vec<f64>>, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len())
            .filter(|&i| rows[i][c].abs() > PIVOT_EPS)
            .max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs()))
        else {
            continue;
        };
        rows.swap(r, p);
        let lead = rows[r][c];
        for v in rows[r].iter_mut() {
            *v /= lead;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c];
            if factor != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
                row[c] = 0.0;
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    // round-off left by later eliminations
    for v in rows.iter_mut().flatten() {
        if v.abs() <= PIVOT_EPS {
            *v = 0.0;
        }
    }
    pivots
}

/// Solves `A X = B` for square `A` with partial pivoting; `B` holds one vector per row of `A`.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c] == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for i in c + 1..n {
            let factor = a[i][c] / a[c][c];
            if factor == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(i);
            for (v, p) in lower[0][c..].iter_mut().zip(&upper[c][c..]) {
                *v -= factor * p;
            }
            let (head, tail) = b.split_at_mut(i);
            for (v, p) in tail[0].iter_mut().zip(&head[c]) {
                *v -= factor * p;
            }
        }
    }
    for c in (0..n).rev() {
        let (head, tail) = b.split_at_mut(c + 1);
        let row = &mut head[c];
        for (k, solved) in tail.iter().enumerate() {
            let coef = a[c][c + 1 + k];
            for (v, s) in row.iter_mut().zip(solved) {
                *v -= coef * s;
            }
        }
        for v in row.iter_mut() {
            *v /= a[c][c];
        }
    }
    Some(b)
}
