//! Exact integer linear algebra over BigInt: Smith normal form with tracked
//! transforms, column-style Hermite normal form, integer kernels, and lattice
//! arithmetic (span, membership, index, intersection).
//!
//! Lattices are given by matrices whose *columns* span them. The canonical
//! Hermite form used throughout is column echelon with strictly increasing
//! pivot rows, positive pivots, and — for each pivot — the entries of earlier
//! columns in that pivot row reduced into `[0, pivot)`. For a full-rank
//! lattice in Z^n this is lower triangular with positive diagonal.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Euclid, One, Signed, Zero};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    a: Vec<BigInt>,
}

impl std::fmt::Debug for Mat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.at(i, j).to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, a: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged rows");
        Mat { rows: r, cols: c, a: rows.into_iter().flatten().collect() }
    }

    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Self {
        Mat::from_rows(rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect())
    }

    /// Matrix whose columns are the given vectors, inside Z^n.
    pub fn from_cols(n: usize, cols: &[Vec<BigInt>]) -> Self {
        let mut m = Mat::zero(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), n);
            for i in 0..n {
                m.set(i, j, col[i].clone());
            }
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.at(i, j).clone()).collect()
    }

    pub fn columns(&self) -> Vec<Vec<BigInt>> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|x| x.is_zero())
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    if i == j { self.at(i, j).is_one() } else { self.at(i, j).is_zero() }
                })
            })
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.at(i, j).clone());
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in mul");
        let mut out = Mat::zero(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let add = aik * rhs.at(k, j);
                    let cur = out.at(i, j) + add;
                    out.set(i, j, cur);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * &v[j]).sum())
            .collect()
    }

    /// Horizontal concatenation [self | rhs].
    pub fn hstack(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.rows, rhs.rows);
        let mut out = Mat::zero(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.at(i, j).clone());
            }
            for j in 0..rhs.cols {
                out.set(i, self.cols + j, rhs.at(i, j).clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &BigInt) -> Mat {
        let mut out = self.clone();
        for x in out.a.iter_mut() {
            *x = &*x * c;
        }
        out
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for k in 0..self.cols {
            self.a.swap(i * self.cols + k, j * self.cols + k);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for k in 0..self.rows {
            self.a.swap(k * self.cols + i, k * self.cols + j);
        }
    }

    /// row_i += c * row_j
    fn add_row(&mut self, i: usize, j: usize, c: &BigInt) {
        for k in 0..self.cols {
            let add = c * self.at(j, k);
            let cur = self.at(i, k) + add;
            self.set(i, k, cur);
        }
    }

    /// col_i += c * col_j
    fn add_col(&mut self, i: usize, j: usize, c: &BigInt) {
        for k in 0..self.rows {
            let add = c * self.at(k, j);
            let cur = self.at(k, i) + add;
            self.set(k, i, cur);
        }
    }

    fn negate_row(&mut self, i: usize) {
        for k in 0..self.cols {
            let v = -self.at(i, k);
            self.set(i, k, v);
        }
    }

    fn negate_col(&mut self, j: usize) {
        for k in 0..self.rows {
            let v = -self.at(k, j);
            self.set(k, j, v);
        }
    }
}

/// Smith normal form `u * a * v = d` with all four transform matrices
/// unimodular and the inverses tracked exactly.
pub struct SnfDecomp {
    pub d: Mat,
    pub u: Mat,
    pub u_inv: Mat,
    pub v: Mat,
    pub v_inv: Mat,
    /// Count of nonzero diagonal entries.
    pub rank: usize,
}

impl SnfDecomp {
    /// The nonzero diagonal entries d_1 | d_2 | ... (all positive).
    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rank).map(|i| self.d.at(i, i).clone()).collect()
    }
}

struct SnfWork {
    a: Mat,
    u: Mat,
    u_inv: Mat,
    v: Mat,
    v_inv: Mat,
}

impl SnfWork {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap_rows(i, j);
        self.u.swap_rows(i, j);
        self.u_inv.swap_cols(i, j);
    }
    fn swap_cols(&mut self, i: usize, j: usize) {
        self.a.swap_cols(i, j);
        self.v.swap_cols(i, j);
        self.v_inv.swap_rows(i, j);
    }
    /// row_i += c * row_j on a (left transform)
    fn add_row(&mut self, i: usize, j: usize, c: &BigInt) {
        self.a.add_row(i, j, c);
        self.u.add_row(i, j, c);
        let neg = -c;
        self.u_inv.add_col(j, i, &neg);
    }
    /// col_i += c * col_j on a (right transform)
    fn add_col(&mut self, i: usize, j: usize, c: &BigInt) {
        self.a.add_col(i, j, c);
        self.v.add_col(i, j, c);
        let neg = -c;
        self.v_inv.add_row(j, i, &neg);
    }
    fn negate_row(&mut self, i: usize) {
        self.a.negate_row(i);
        self.u.negate_row(i);
        self.u_inv.negate_col(i);
    }
}

pub fn smith_decompose(input: &Mat) -> SnfDecomp {
    let (rows, cols) = (input.rows, input.cols);
    let mut w = SnfWork {
        a: input.clone(),
        u: Mat::identity(rows),
        u_inv: Mat::identity(rows),
        v: Mat::identity(cols),
        v_inv: Mat::identity(cols),
    };
    let mut t = 0usize;
    while t < rows && t < cols {
        // Pivot: entry of minimal absolute value in the trailing block.
        let mut pivot: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if !w.a.at(i, j).is_zero()
                    && pivot.is_none_or(|(pi, pj)| w.a.at(i, j).abs() < w.a.at(pi, pj).abs())
                {
                    pivot = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = pivot else { break };
        w.swap_rows(t, pi);
        w.swap_cols(t, pj);

        'reduce: loop {
            // Clear column t below the pivot.
            for i in t + 1..rows {
                if w.a.at(i, t).is_zero() {
                    continue;
                }
                let q = w.a.at(i, t).div_euclid(w.a.at(t, t));
                let neg = -q;
                w.add_row(i, t, &neg);
                if !w.a.at(i, t).is_zero() {
                    // Remainder became the smaller pivot.
                    w.swap_rows(t, i);
                    continue 'reduce;
                }
            }
            // Clear row t right of the pivot.
            for j in t + 1..cols {
                if w.a.at(t, j).is_zero() {
                    continue;
                }
                let q = w.a.at(t, j).div_euclid(w.a.at(t, t));
                let neg = -q;
                w.add_col(j, t, &neg);
                if !w.a.at(t, j).is_zero() {
                    w.swap_cols(t, j);
                    continue 'reduce;
                }
            }
            // Divisibility fixup: the pivot must divide the trailing block.
            let mut fixed = true;
            'find: for i in t + 1..rows {
                for j in t + 1..cols {
                    if !w.a.at(i, j).is_zero() && !w.a.at(i, j).mod_floor(w.a.at(t, t)).is_zero() {
                        w.add_row(t, i, &BigInt::one());
                        fixed = false;
                        break 'find;
                    }
                }
            }
            if fixed {
                break;
            }
        }
        if w.a.at(t, t).is_negative() {
            w.negate_row(t);
        }
        t += 1;
    }
    SnfDecomp { rank: t, d: w.a, u: w.u, u_inv: w.u_inv, v: w.v, v_inv: w.v_inv }
}

/// Canonical column Hermite form of the lattice spanned by the columns.
/// Zero columns are dropped; the result has one column per pivot.
pub fn hnf_cols(input: &Mat) -> Mat {
    let (rows, cols) = (input.rows, input.cols);
    let mut a = input.clone();
    let mut next = 0usize; // next pivot column slot
    for row in 0..rows {
        if next == cols {
            break;
        }
        // Reduce columns >= next against each other in this row.
        loop {
            let mut best: Option<usize> = None;
            for j in next..cols {
                if !a.at(row, j).is_zero()
                    && best.is_none_or(|b| a.at(row, j).abs() < a.at(row, b).abs())
                {
                    best = Some(j);
                }
            }
            let Some(b) = best else { break };
            a.swap_cols(next, b);
            let mut clean = true;
            for j in next + 1..cols {
                if a.at(row, j).is_zero() {
                    continue;
                }
                let q = a.at(row, j).div_euclid(a.at(row, next));
                let neg = -q;
                a.add_col(j, next, &neg);
                if !a.at(row, j).is_zero() {
                    clean = false;
                }
            }
            if clean {
                break;
            }
        }
        if a.at(row, next).is_zero() {
            continue; // no pivot in this row
        }
        if a.at(row, next).is_negative() {
            a.negate_col(next);
        }
        // Reduce earlier columns' entries in this pivot row into [0, pivot).
        let pivot = a.at(row, next).clone();
        for j in 0..next {
            let q = a.at(row, j).div_euclid(&pivot);
            if !q.is_zero() {
                let neg = -q;
                a.add_col(j, next, &neg);
            }
        }
        next += 1;
    }
    // Keep only pivot columns.
    let mut out = Mat::zero(rows, next);
    for i in 0..rows {
        for j in 0..next {
            out.set(i, j, a.at(i, j).clone());
        }
    }
    out
}

/// Hermite form of the lattice spanned by a set of column vectors in Z^n.
pub fn lat_span(n: usize, vectors: &[Vec<BigInt>]) -> Mat {
    hnf_cols(&Mat::from_cols(n, vectors))
}

/// Does `v` lie in the lattice spanned by the columns of the Hermite form `h`?
pub fn lat_contains(h: &Mat, v: &[BigInt]) -> bool {
    assert_eq!(h.rows, v.len());
    let mut v = v.to_vec();
    let mut col = 0usize;
    for row in 0..h.rows {
        if col < h.cols && !h.at(row, col).is_zero() {
            let (q, r) = v[row].div_rem(h.at(row, col));
            if !r.is_zero() {
                return false;
            }
            if !q.is_zero() {
                for i in row..h.rows {
                    let sub = &q * h.at(i, col);
                    v[i] -= sub;
                }
            }
            col += 1;
        } else if !v[row].is_zero() {
            return false;
        }
    }
    v.iter().all(|x| x.is_zero())
}

/// Is every column of `b` inside the lattice of the Hermite form `h`?
pub fn lat_contains_all(h: &Mat, b: &Mat) -> bool {
    (0..b.cols).all(|j| lat_contains(h, &b.col(j)))
}

/// Index [Z^n : L] for a full-rank Hermite form (n columns): the diagonal product.
pub fn lat_index(h: &Mat) -> Option<BigInt> {
    if h.rows != h.cols {
        return None;
    }
    let mut idx = BigInt::one();
    for i in 0..h.rows {
        idx *= h.at(i, i);
    }
    Some(idx)
}

/// Basis of the integer kernel of `a` (columns of the result).
pub fn kernel_basis(a: &Mat) -> Mat {
    let snf = smith_decompose(a);
    // a * v has zero columns exactly at indices >= rank.
    let mut cols = Vec::new();
    for j in snf.rank..a.cols {
        cols.push(snf.v.col(j));
    }
    Mat::from_cols(a.cols, &cols)
}

/// Intersection of the lattices spanned by the columns of `a` and `b`.
pub fn lat_intersect(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.rows, b.rows);
    if a.cols == 0 || b.cols == 0 {
        return Mat::zero(a.rows, 0);
    }
    let neg_b = b.scale(&BigInt::from(-1));
    let stacked = a.hstack(&neg_b);
    let ker = kernel_basis(&stacked);
    // x-part of each kernel vector gives a * x in the intersection.
    let mut cols = Vec::new();
    for j in 0..ker.cols {
        let x: Vec<BigInt> = (0..a.cols).map(|i| ker.at(i, j).clone()).collect();
        let mut v = vec![BigInt::zero(); a.rows];
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = (0..a.cols).map(|k| a.at(i, k) * &x[k]).sum();
        }
        cols.push(v);
    }
    lat_span(a.rows, &cols)
}

/// Exact solution x of `h * x = v` where `h` is a full-rank Hermite form
/// (lower triangular, positive diagonal). None if v is outside the lattice.
pub fn hnf_solve(h: &Mat, v: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(h.rows, h.cols);
    assert_eq!(h.rows, v.len());
    let n = h.rows;
    let mut v = v.to_vec();
    let mut x = vec![BigInt::zero(); n];
    for row in 0..n {
        let (q, r) = v[row].div_rem(h.at(row, row));
        if !r.is_zero() {
            return None;
        }
        for i in row..n {
            let sub = &q * h.at(i, row);
            v[i] -= sub;
        }
        x[row] = q;
    }
    Some(x)
}

/// Exact integral solve `h * X = B` column by column (h a full-rank Hermite form).
pub fn hnf_solve_mat(h: &Mat, b: &Mat) -> Option<Mat> {
    let mut cols = Vec::new();
    for j in 0..b.cols {
        cols.push(hnf_solve(h, &b.col(j))?);
    }
    Some(Mat::from_cols(h.cols, &cols))
}

/// Some integer solution x of `a * x = b`, or None if none exists.
pub fn solve_integer(a: &Mat, b: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(a.rows, b.len());
    let s = smith_decompose(a);
    let ub = s.u.mul_vec(b);
    let mut w = vec![BigInt::zero(); a.cols];
    for (i, ubi) in ub.iter().enumerate() {
        if i < s.rank {
            let (q, r) = ubi.div_rem(s.d.at(i, i));
            if !r.is_zero() {
                return None;
            }
            w[i] = q;
        } else if !ubi.is_zero() {
            return None;
        }
    }
    Some(s.v.mul_vec(&w))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> Mat {
        Mat::from_i64_rows(rows)
    }

    fn check_decomp(a: &Mat) {
        let s = smith_decompose(a);
        assert_eq!(s.u.mul(a).mul(&s.v), s.d, "u*a*v != d");
        assert!(s.u.mul(&s.u_inv).is_identity(), "u_inv wrong");
        assert!(s.v.mul(&s.v_inv).is_identity(), "v_inv wrong");
        // Ascending divisibility chain, positive entries.
        let diag = s.diagonal();
        for i in 0..diag.len() {
            assert!(diag[i].is_positive());
            if i + 1 < diag.len() {
                assert!((&diag[i + 1] % &diag[i]).is_zero(), "chain broken");
            }
        }
    }

    #[test]
    fn snf_pinned_values() {
        let s = smith_decompose(&m(&[vec![2, 4], vec![6, 8]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(2), BigInt::from(4)]);
        check_decomp(&m(&[vec![2, 4], vec![6, 8]]));

        let s = smith_decompose(&m(&[vec![1, 0], vec![0, 1]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(1), BigInt::from(1)]);

        // One relation 3*x in Z^2: diagonal (3), free rank 1.
        let s = smith_decompose(&m(&[vec![3], vec![0]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(3)]);
        assert_eq!(s.d.rows - s.rank, 1);

        // Z/6 + Z/4 presented diagonally has invariant factors (2, 12).
        let s = smith_decompose(&m(&[vec![6, 0], vec![0, 4]]));
        assert_eq!(s.diagonal(), vec![BigInt::from(2), BigInt::from(12)]);
    }

    #[test]
    fn snf_random_shapes() {
        // Deterministic pseudo-random small matrices.
        let mut seed = 12345u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) % 19) as i64 - 9
        };
        for rows in 1..=5 {
            for cols in 1..=5 {
                for _ in 0..4 {
                    let a = Mat::from_i64_rows(
                        &(0..rows).map(|_| (0..cols).map(|_| rnd()).collect()).collect::<Vec<_>>(),
                    );
                    check_decomp(&a);
                }
            }
        }
    }

    #[test]
    fn hnf_canonical_and_membership() {
        // span{(2,0),(1,1)} is all of the lattice with index 2: basis (1,1),(0,2).
        let h = lat_span(2, &[vec![BigInt::from(2), BigInt::from(0)], vec![BigInt::from(1), BigInt::from(1)]]);
        assert_eq!(h, m(&[vec![1, 0], vec![1, 2]]));
        assert_eq!(lat_index(&h), Some(BigInt::from(2)));
        assert!(lat_contains(&h, &[BigInt::from(2), BigInt::from(0)]));
        assert!(!lat_contains(&h, &[BigInt::from(1), BigInt::from(0)]));

        // Same lattice from a redundant generating set.
        let h2 = lat_span(
            2,
            &[
                vec![BigInt::from(2), BigInt::from(0)],
                vec![BigInt::from(1), BigInt::from(1)],
                vec![BigInt::from(3), BigInt::from(1)],
            ],
        );
        assert_eq!(h, h2);
    }

    #[test]
    fn kernel_and_intersection() {
        let a = m(&[vec![2, 4]]);
        let k = kernel_basis(&a);
        assert_eq!(k.cols, 1);
        // kernel generated by (2, -1) up to sign
        let v = k.col(0);
        assert!((&v[0] * BigInt::from(2) + &v[1] * BigInt::from(4)).is_zero());
        assert!(v[0].abs() == BigInt::from(2) && v[1].abs() == BigInt::one());

        // 2Z intersect 3Z = 6Z.
        let a = m(&[vec![2]]);
        let b = m(&[vec![3]]);
        assert_eq!(lat_intersect(&a, &b), m(&[vec![6]]));

        // Intersection of two index-2 sublattices of Z^2.
        let a = m(&[vec![1, 0], vec![0, 2]]);
        let b = m(&[vec![2, 0], vec![0, 1]]);
        let c = lat_intersect(&a, &b);
        assert_eq!(c, m(&[vec![2, 0], vec![0, 2]]));
    }

    #[test]
    fn solve_exact() {
        let h = m(&[vec![2, 0], vec![1, 3]]);
        let x = hnf_solve(&h, &[BigInt::from(4), BigInt::from(8)]).unwrap();
        assert_eq!(x, vec![BigInt::from(2), BigInt::from(2)]);
        assert!(hnf_solve(&h, &[BigInt::from(3), BigInt::from(0)]).is_none());
    }
}
