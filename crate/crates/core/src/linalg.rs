//! Dense least squares for a real design matrix and complex right-hand sides.
//!
//! Because the design is real, `Qᵀ` and back-substitution act on the real and
//! imaginary parts independently; the factorizations never touch complex data.

use num_complex::Complex;

use crate::scalar::{cx_zero, scale, Cx, Scalar};

/// Solution of `min ‖A z − y‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct LsSolution<T: Scalar> {
    pub coeffs: Vec<Cx<T>>,
    pub residual: Vec<Cx<T>>,
    pub rank: usize,
    /// `true` when `A` was numerically rank deficient and the minimum-norm
    /// minimizer was returned.
    pub degenerate: bool,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn dot_cx<T: Scalar>(a: &[T], z: &[Cx<T>]) -> Cx<T> {
    let mut acc = cx_zero::<T>();
    for (&x, v) in a.iter().zip(z) {
        acc.re = acc.re + x * v.re;
        acc.im = acc.im + x * v.im;
    }
    acc
}

fn axpy_cx<T: Scalar>(alpha: Cx<T>, x: &[T], y: &mut [Cx<T>]) {
    for (&a, v) in x.iter().zip(y.iter_mut()) {
        v.re = v.re - alpha.re * a;
        v.im = v.im - alpha.im * a;
    }
}

fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Thin QR of a growing set of columns, `A = Q R`, maintained by classical
/// Gram-Schmidt with one full re-orthogonalization pass per appended column.
#[derive(Clone, Debug, Default)]
pub struct IncrementalQr<T: Scalar> {
    m: usize,
    q: Vec<Vec<T>>,
    /// Column `j` of `R`, holding its `j + 1` leading entries.
    r: Vec<Vec<T>>,
}

impl<T: Scalar> IncrementalQr<T> {
    pub fn new(m: usize) -> Self {
        IncrementalQr {
            m,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Appends a column. Returns `false`, leaving the factorization untouched,
    /// if the column is numerically in the span of the existing ones.
    pub fn push(&mut self, column: &[T]) -> bool {
        debug_assert_eq!(column.len(), self.m);
        let original = norm(column);
        if original == T::zero() || self.q.len() >= self.m {
            return false;
        }
        let mut v = column.to_vec();
        let mut coeffs = vec![T::zero(); self.q.len() + 1];
        for _ in 0..2 {
            for (qj, c) in self.q.iter().zip(coeffs.iter_mut()) {
                let h = dot(qj, &v);
                *c = *c + h;
                v.iter_mut().zip(qj).for_each(|(vi, &qi)| *vi = *vi - h * qi);
            }
        }
        let rest = norm(&v);
        let tol = T::rank_tolerance() * T::lit(self.m as f64).sqrt() * original;
        if rest <= tol {
            return false;
        }
        v.iter_mut().for_each(|x| *x = *x / rest);
        coeffs[self.q.len()] = rest;
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Least-squares coefficients and residual for right-hand side `y`.
    pub fn solve(&self, y: &[Cx<T>]) -> (Vec<Cx<T>>, Vec<Cx<T>>) {
        let mut residual = y.to_vec();
        let mut proj = vec![cx_zero::<T>(); self.q.len()];
        for _ in 0..2 {
            for (qj, p) in self.q.iter().zip(proj.iter_mut()) {
                let h = dot_cx(qj, &residual);
                *p = *p + h;
                axpy_cx(h, qj, &mut residual);
            }
        }
        let k = self.q.len();
        let mut z = proj;
        for j in (0..k).rev() {
            let zj = scale(z[j], T::one() / self.r[j][j]);
            z[j] = zj;
            for i in 0..j {
                z[i] = z[i] - scale(zj, self.r[j][i]);
            }
        }
        (z, residual)
    }
}

/// Householder reflector `H = I − β v vᵀ` with `v[0] = 1`, annihilating
/// `x[1..]`. Returns `(v, β, α)` where `H x = α e₁`.
fn householder<T: Scalar>(x: &[T]) -> (Vec<T>, T, T) {
    let sigma: T = x[1..].iter().map(|&t| t * t).sum();
    let mut v = x.to_vec();
    v[0] = T::one();
    if sigma == T::zero() {
        return (v, T::zero(), x[0]);
    }
    let mu = (x[0] * x[0] + sigma).sqrt();
    let v0 = if x[0] <= T::zero() {
        x[0] - mu
    } else {
        -sigma / (x[0] + mu)
    };
    let beta = T::lit(2.0) * v0 * v0 / (sigma + v0 * v0);
    for t in v[1..].iter_mut() {
        *t = *t / v0;
    }
    (v, beta, mu)
}

/// Column-major `rows × cols` scratch matrix.
struct Dense<T> {
    rows: usize,
    data: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }
}

/// Applies `I − β v vᵀ` to `col`.
fn reflect<T: Scalar>(v: &[T], beta: T, col: &mut [T]) {
    let s = beta * dot(v, col);
    col.iter_mut().zip(v).for_each(|(c, &vi)| *c = *c - s * vi);
}

fn reflect_cx<T: Scalar>(v: &[T], beta: T, col: &mut [Cx<T>]) {
    let s = scale(dot_cx(v, col), beta);
    axpy_cx(s, v, col);
}

/// Minimum-norm least squares via Householder QR with column pivoting and,
/// when the columns are rank deficient, a complete orthogonal decomposition.
pub fn least_squares<T: Scalar>(columns: &[&[T]], y: &[Cx<T>]) -> LsSolution<T> {
    let k = columns.len();
    let m = y.len();
    if k == 0 {
        return LsSolution {
            coeffs: Vec::new(),
            residual: y.to_vec(),
            rank: 0,
            degenerate: false,
        };
    }
    let mut a = Dense {
        rows: m,
        data: columns.iter().flat_map(|c| c.iter().copied()).collect(),
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut qty = y.to_vec();
    let steps = m.min(k);
    let mut largest = T::zero();
    let mut rank = 0;
    for step in 0..steps {
        let (pivot, pivot_norm) = (step..k)
            .map(|j| (j, norm(&a.col(j)[step..])))
            .fold((step, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if step == 0 {
            largest = pivot_norm;
        }
        if pivot_norm <= T::rank_tolerance() * T::lit(m.max(k) as f64) * largest
            || pivot_norm == T::zero()
        {
            break;
        }
        if pivot != step {
            perm.swap(step, pivot);
            for i in 0..m {
                a.data.swap(step * m + i, pivot * m + i);
            }
        }
        let (v, beta, alpha) = householder(&a.col(step)[step..]);
        {
            let c = a.col_mut(step);
            c[step] = alpha;
            c[step + 1..].iter_mut().for_each(|t| *t = T::zero());
        }
        for j in step + 1..k {
            reflect(&v, beta, &mut a.col_mut(j)[step..]);
        }
        reflect_cx(&v, beta, &mut qty[step..]);
        rank += 1;
    }

    let degenerate = rank < k;
    let mut z_perm = vec![cx_zero::<T>(); k];
    if !degenerate {
        for i in (0..k).rev() {
            let mut acc = qty[i];
            for j in i + 1..k {
                acc = acc - scale(z_perm[j], a.at(i, j));
            }
            z_perm[i] = scale(acc, T::one() / a.at(i, i));
        }
    } else if rank > 0 {
        // [R11 R12] (rank × k) = L Z with L lower triangular: factor its
        // transpose by Householder QR and solve L w = c, z = Zᵀ [w; 0].
        let mut w = Dense {
            rows: k,
            data: vec![T::zero(); k * rank],
        };
        for i in 0..rank {
            for j in i..k {
                w.data[i * k + j] = a.at(i, j);
            }
        }
        let mut second: Vec<(Vec<T>, T)> = Vec::with_capacity(rank);
        for step in 0..rank {
            let (v, beta, alpha) = householder(&w.col(step)[step..]);
            {
                let c = w.col_mut(step);
                c[step] = alpha;
                c[step + 1..].iter_mut().for_each(|t| *t = T::zero());
            }
            for j in step + 1..rank {
                reflect(&v, beta, &mut w.col_mut(j)[step..]);
            }
            second.push((v, beta));
        }
        // W = Q2 R2, so [R11 R12] = R2ᵀ Q2ᵀ; forward-substitute R2ᵀ u = c.
        let mut u = vec![cx_zero::<T>(); k];
        for i in 0..rank {
            let mut acc = qty[i];
            for j in 0..i {
                acc = acc - scale(u[j], w.at(j, i));
            }
            u[i] = scale(acc, T::one() / w.at(i, i));
        }
        for (step, (v, beta)) in second.iter().enumerate().rev() {
            reflect_cx(v, *beta, &mut u[step..]);
        }
        z_perm = u;
    }

    let mut coeffs = vec![cx_zero::<T>(); k];
    for (slot, &orig) in perm.iter().enumerate() {
        coeffs[orig] = z_perm[slot];
    }
    let mut residual = y.to_vec();
    for (c, col) in coeffs.iter().zip(columns) {
        axpy_cx(*c, col, &mut residual);
    }
    LsSolution {
        coeffs,
        residual,
        rank,
        degenerate,
    }
}

/// Convenience constructor for tests and callers with real data.
pub fn real_to_cx<T: Scalar>(x: &[T]) -> Vec<Cx<T>> {
    x.iter().map(|&r| Complex::new(r, T::zero())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cols(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<Vec<f64>> {
        (0..k)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    fn random_y(rng: &mut ChaCha8Rng, m: usize) -> Vec<Cx<f64>> {
        (0..m)
            .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Normal equations solved by Gauss-Jordan elimination, independent of
    /// both QR paths.
    fn normal_equations(cols: &[Vec<f64>], y: &[Cx<f64>]) -> Vec<Cx<f64>> {
        let k = cols.len();
        let mut g: Vec<Vec<Cx<f64>>> = (0..k)
            .map(|i| {
                let mut row: Vec<Cx<f64>> = (0..k)
                    .map(|j| Complex::new(dot(&cols[i], &cols[j]), 0.0))
                    .collect();
                row.push(dot_cx(&cols[i], y));
                row
            })
            .collect();
        for c in 0..k {
            let p = (c..k).max_by(|&a, &b| g[a][c].norm().total_cmp(&g[b][c].norm())).unwrap();
            g.swap(c, p);
            let d = g[c][c];
            for x in g[c].iter_mut() {
                *x /= d;
            }
            for r in 0..k {
                if r != c {
                    let f = g[r][c];
                    let pivot_row = g[c].clone();
                    for (x, p) in g[r].iter_mut().zip(pivot_row) {
                        *x -= f * p;
                    }
                }
            }
        }
        g.iter().map(|row| row[k]).collect()
    }

    #[test]
    fn identity_single_column() {
        let e2 = [0.0, 1.0, 0.0, 0.0];
        let y = real_to_cx(&[0.0, 3.0, 0.0, 0.0]);
        let sol = least_squares(&[&e2[..]], &y);
        assert_eq!(sol.coeffs, vec![Complex::new(3.0, 0.0)]);
        assert!(sol.residual.iter().all(|r| r.norm() == 0.0));
    }

    #[test]
    fn orthonormal_columns_project() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c0 = [s, s, 0.0];
        let c1 = [s, -s, 0.0];
        let y = vec![Complex::new(1.0, 2.0), Complex::new(-3.0, 0.5), Complex::new(7.0, 0.0)];
        let sol = least_squares(&[&c0[..], &c1[..]], &y);
        for (z, c) in sol.coeffs.iter().zip([&c0, &c1]) {
            let want = dot_cx(&c[..], &y);
            assert!((z - want).norm() < 1e-14);
        }
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let cols = random_cols(&mut rng, 8, 3);
            let y = random_y(&mut rng, 8);
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            let oracle = normal_equations(&cols, &y);
            let full = least_squares(&refs, &y);
            assert!(!full.degenerate);
            let mut inc = IncrementalQr::new(8);
            for c in &cols {
                assert!(inc.push(c));
            }
            let (z_inc, r_inc) = inc.solve(&y);
            for i in 0..3 {
                assert!((full.coeffs[i] - oracle[i]).norm() < 1e-10);
                assert!((z_inc[i] - oracle[i]).norm() < 1e-10);
            }
            for (a, b) in full.residual.iter().zip(&r_inc) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_deficient_returns_min_norm() {
        // Third column duplicates the first: min-norm splits weight evenly.
        let c0 = [1.0f64, 0.0, 0.0, 0.0];
        let c1 = [0.0, 1.0, 0.0, 0.0];
        let y = real_to_cx(&[4.0, 2.0, 1.0, 0.0]);
        let sol = least_squares(&[&c0[..], &c1[..], &c0[..]], &y);
        assert!(sol.degenerate);
        assert_eq!(sol.rank, 2);
        assert!((sol.coeffs[0].re - 2.0).abs() < 1e-12);
        assert!((sol.coeffs[1].re - 2.0).abs() < 1e-12);
        assert!((sol.coeffs[2].re - 2.0).abs() < 1e-12);
        assert!((sol.residual[2].re - 1.0).abs() < 1e-12);

        let mut inc = IncrementalQr::new(4);
        assert!(inc.push(&c0));
        assert!(inc.push(&c1));
        assert!(!inc.push(&c0));
        assert_eq!(inc.len(), 2);
    }

    #[test]
    fn rank_deficient_random_matches_pseudoinverse_norm() {
        // Columns 0..3 random, column 3 = col0 + col1: rank 3.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cols = random_cols(&mut rng, 6, 3);
        let dep: Vec<f64> = cols[0].iter().zip(&cols[1]).map(|(a, b)| a + b).collect();
        cols.push(dep);
        let y = random_y(&mut rng, 6);
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        let sol = least_squares(&refs, &y);
        assert!(sol.degenerate);
        assert_eq!(sol.rank, 3);
        // Same residual as the full-rank sub-problem.
        let base = least_squares(&refs[..3], &y);
        for (a, b) in sol.residual.iter().zip(&base.residual) {
            assert!((a - b).norm() < 1e-10);
        }
        // Minimum norm: orthogonal to the null vector (1, 1, 0, -1).
        let null_dot = sol.coeffs[0] + sol.coeffs[1] - sol.coeffs[3];
        assert!(null_dot.norm() < 1e-10);
    }

    #[test]
    fn empty_support() {
        let y = real_to_cx(&[1.0, 2.0]);
        let sol = least_squares::<f64>(&[], &y);
        assert!(sol.coeffs.is_empty());
        assert_eq!(sol.residual, y);
    }
}
