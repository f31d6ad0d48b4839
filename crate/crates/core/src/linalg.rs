//! Small dense helpers: non-Hermitian eigenpairs, polynomial interpolation and roots.

use nalgebra::Schur;

use crate::{CMat, CVec, Error, Result, C64};

/// Eigenvalues and unit eigenvectors of a general complex matrix.
///
/// Uses the complex Schur form `M = Q T Q†` and back-substitution on the
/// triangular factor, so it assumes a non-defective spectrum.
pub fn eig(m: &CMat) -> Result<(Vec<C64>, Vec<CVec>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::LinearAlgebra("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(1.0);
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut x = CVec::zeros(n);
        x[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                acc += t[(j, l)] * x[l];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < 1e-14 * scale {
                denom = C64::new(1e-14 * scale, 0.0);
            }
            x[j] = -acc / denom;
        }
        let v = &q * x;
        let norm = v.norm();
        values.push(lambda);
        vectors.push(v / C64::new(norm, 0.0));
    }
    Ok((values, vectors))
}

/// Eigenvalues only.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::LinearAlgebra("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..m.nrows()).map(|k| t[(k, k)]).collect())
}

/// Evaluates `Σ coeffs[k] y^k` by Horner's rule.
pub fn poly_eval(coeffs: &[C64], y: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &ck| acc * y + ck)
}

/// Interpolating polynomial (monomial coefficients, low to high) through
/// `(nodes[k], values[k])`.
pub fn interpolate(nodes: &[C64], values: &[C64]) -> Result<Vec<C64>> {
    let n = nodes.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            left: n,
            right: values.len(),
        });
    }
    let vander = CMat::from_fn(n, n, |i, j| nodes[i].powu(j as u32));
    let rhs = CVec::from_column_slice(values);
    let sol = vander
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearAlgebra("singular Vandermonde system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Matrix-valued interpolation: `samples[k]` is the matrix at `nodes[k]`.
pub fn interpolate_matrices(nodes: &[C64], samples: &[CMat]) -> Result<Vec<CMat>> {
    let n = nodes.len();
    let vander = CMat::from_fn(n, n, |i, j| nodes[i].powu(j as u32));
    let lu = vander.lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("singular Vandermonde system".into()))?;
    let (rows, cols) = samples[0].shape();
    let mut coeffs = vec![CMat::zeros(rows, cols); n];
    for (j, coeff) in coeffs.iter_mut().enumerate() {
        for (k, sample) in samples.iter().enumerate() {
            *coeff += sample * inv[(j, k)];
        }
    }
    Ok(coeffs)
}

/// Interpolation nodes for polynomials of degree `< count`: Chebyshev points
/// scaled to `[-radius, radius]` and nudged off the real axis.
pub fn sample_nodes(count: usize, radius: f64) -> Vec<C64> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
            C64::new(radius * theta.cos(), 0.05 * radius * (3.0 * theta).sin())
        })
        .collect()
}

/// Roots of the polynomial `Σ coeffs[k] y^k` (leading coefficient must be nonzero).
pub fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    if lead.norm() == 0.0 {
        return Err(Error::InvalidParameter("leading coefficient vanishes".into()));
    }
    let mut companion = CMat::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -coeffs[i] / lead;
    }
    let mut roots = eigenvalues(&companion)?;
    // Newton polish on the original polynomial.
    let deriv: Vec<C64> = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &ck)| ck * k as f64)
        .collect();
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let d = poly_eval(&deriv, *r);
            if d.norm() == 0.0 {
                break;
            }
            let step = poly_eval(coeffs, *r) / d;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r -= step;
        }
    }
    Ok(roots)
}

/// Coefficients of `Π (y - r)` (low to high).
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &ck) in coeffs.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * r;
        }
        coeffs = next;
    }
    coeffs
}

/// Sorts a root list into a canonical order (by real part, then imaginary part).
pub fn sort_roots(roots: &mut [C64]) {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Distance between two root multisets after optimal matching (greedy on sorted lists,
/// exact for the small sets used here via exhaustive permutation when `len <= 7`).
pub fn root_set_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    if n <= 7 {
        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            let d = p
                .iter()
                .enumerate()
                .map(|(i, &j)| (a[i] - b[j]).norm())
                .fold(0.0, f64::max);
            best = best.min(d);
        });
        best
    } else {
        let mut used = vec![false; n];
        let mut worst = 0.0f64;
        for &x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, &y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .expect("equal lengths");
            used[j] = true;
            worst = worst.max(d);
        }
        worst
    }
}

/// Calls `visit` with every permutation of `items[start..]` (Heap-style recursion).
pub fn permute<T: Clone>(items: &mut Vec<T>, start: usize, visit: &mut impl FnMut(&[T])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    permute(&mut items, 0, &mut |p| out.push(p.to_vec()));
    out
}
