//! Linear algebra over generalized numbers, carried out epsilon-wise.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jacobi;
use crate::net::{same_grid, EpsilonGrid, GeneralizedNumber, NetClass, Thresholds};
use crate::par;

/// An element of the generalized module of dimension `n`, one real vector per epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct GenVector {
    grid: Arc<EpsilonGrid>,
    data: Vec<DVector<f64>>,
}

/// An `n x n` generalized matrix, one real matrix per epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct GenMatrix {
    grid: Arc<EpsilonGrid>,
    data: Vec<DMatrix<f64>>,
}

fn check_finite<'a>(it: impl Iterator<Item = (usize, &'a [f64])>) -> Result<()> {
    for (index, s) in it {
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
    }
    Ok(())
}

impl GenVector {
    pub fn from_slices(grid: &Arc<EpsilonGrid>, data: Vec<DVector<f64>>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: data.len(),
            });
        }
        let n = data[0].len();
        if let Some(bad) = data.iter().find(|v| v.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: bad.len(),
            });
        }
        check_finite(data.iter().map(|v| v.as_slice()).enumerate())?;
        Ok(Self {
            grid: Arc::clone(grid),
            data,
        })
    }

    pub fn from_fn(
        grid: &Arc<EpsilonGrid>,
        n: usize,
        f: impl Fn(usize, f64) -> DVector<f64>,
    ) -> Result<Self> {
        let data = (0..grid.len())
            .map(|k| {
                let v = f(k, grid.eps(k));
                assert_eq!(v.len(), n);
                v
            })
            .collect();
        Self::from_slices(grid, data)
    }

    /// Assembles a vector from its component nets.
    pub fn from_components(components: &[GeneralizedNumber]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Precondition("empty component list".into()))?;
        let grid = first.grid();
        if components.iter().any(|c| !c.same_grid(first)) {
            return Err(Error::GridMismatch);
        }
        let data = (0..grid.len())
            .map(|k| DVector::from_iterator(components.len(), components.iter().map(|c| c.value(k))))
            .collect();
        Ok(Self {
            grid: Arc::clone(grid),
            data,
        })
    }

    /// The same real vector at every epsilon.
    pub fn constant(grid: &Arc<EpsilonGrid>, v: &[f64]) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: vec![DVector::from_column_slice(v); grid.len()],
        }
    }

    pub fn basis(grid: &Arc<EpsilonGrid>, n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Self::constant(grid, &v)
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.data[0].len()
    }

    pub fn at(&self, k: usize) -> &DVector<f64> {
        &self.data[k]
    }

    pub fn slices(&self) -> &[DVector<f64>] {
        &self.data
    }

    pub fn component(&self, i: usize) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(&self.grid, self.data.iter().map(|v| v[i]).collect())
            .expect("finite samples")
    }

    pub fn components(&self) -> Vec<GeneralizedNumber> {
        (0..self.dim()).map(|i| self.component(i)).collect()
    }

    /// Scales each epsilon slice by the matching sample of `s`.
    pub fn scale_by(&self, s: &GeneralizedNumber) -> Self {
        assert!(same_grid(&self.grid, s.grid()), "nets live on different epsilon grids");
        Self {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().zip(s.values()).map(|(v, &c)| v * c).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64>) -> Self {
        assert!(same_grid(&self.grid, &other.grid), "nets live on different epsilon grids");
        Self {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// The net `k -> max_i |v^i_k|`.
    pub fn max_abs_component(&self) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(&self.grid, self.data.iter().map(|v| v.amax()).collect())
            .expect("finite samples")
    }

    /// Every component negligible.
    pub fn is_negligible(&self, thresholds: &Thresholds) -> bool {
        thresholds.is_negligible(&self.max_abs_component())
    }
}

impl GenMatrix {
    pub fn from_slices(grid: &Arc<EpsilonGrid>, data: Vec<DMatrix<f64>>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                found: data.len(),
            });
        }
        let n = data[0].nrows();
        if let Some(bad) = data.iter().find(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::Dimension {
                expected: n,
                found: bad.nrows().max(bad.ncols()),
            });
        }
        check_finite(data.iter().map(|m| m.as_slice()).enumerate())?;
        Ok(Self {
            grid: Arc::clone(grid),
            data,
        })
    }

    pub fn from_fn(
        grid: &Arc<EpsilonGrid>,
        n: usize,
        f: impl Fn(usize, f64) -> DMatrix<f64>,
    ) -> Result<Self> {
        let data = (0..grid.len())
            .map(|k| {
                let m = f(k, grid.eps(k));
                assert_eq!((m.nrows(), m.ncols()), (n, n));
                m
            })
            .collect();
        Self::from_slices(grid, data)
    }

    /// Assembles a matrix from entry nets given row by row.
    pub fn from_entries(n: usize, entries: &[GeneralizedNumber]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                found: entries.len(),
            });
        }
        let grid = entries[0].grid();
        if entries.iter().any(|e| !e.same_grid(&entries[0])) {
            return Err(Error::GridMismatch);
        }
        let data = (0..grid.len())
            .map(|k| DMatrix::from_fn(n, n, |i, j| entries[i * n + j].value(k)))
            .collect();
        Ok(Self {
            grid: Arc::clone(grid),
            data,
        })
    }

    pub fn constant(grid: &Arc<EpsilonGrid>, m: &DMatrix<f64>) -> Self {
        Self {
            grid: Arc::clone(grid),
            data: vec![m.clone(); grid.len()],
        }
    }

    pub fn diagonal(entries: &[GeneralizedNumber]) -> Result<Self> {
        let grid = entries[0].grid();
        let zero = GeneralizedNumber::zero(grid);
        let n = entries.len();
        let all: Vec<GeneralizedNumber> = (0..n * n)
            .map(|idx| {
                if idx / n == idx % n {
                    entries[idx / n].clone()
                } else {
                    zero.clone()
                }
            })
            .collect();
        Self::from_entries(n, &all)
    }

    pub fn constant_diagonal(grid: &Arc<EpsilonGrid>, d: &[f64]) -> Self {
        Self::constant(grid, &DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn identity(grid: &Arc<EpsilonGrid>, n: usize) -> Self {
        Self::constant(grid, &DMatrix::identity(n, n))
    }

    /// Minkowski metric `diag(-1, 1, .., 1)`.
    pub fn minkowski(grid: &Arc<EpsilonGrid>, n: usize) -> Self {
        let mut d = vec![1.0; n];
        d[0] = -1.0;
        Self::constant_diagonal(grid, &d)
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.data[0].nrows()
    }

    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        &self.data[k]
    }

    pub fn slices(&self) -> &[DMatrix<f64>] {
        &self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(&self.grid, self.data.iter().map(|m| m[(i, j)]).collect())
            .expect("finite samples")
    }

    pub fn map(&self, f: impl Fn(usize, &DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().enumerate().map(|(k, m)| f(k, m)).collect(),
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>) -> Self {
        assert!(same_grid(&self.grid, &other.grid), "nets live on different epsilon grids");
        Self {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|_, m| m * c)
    }

    pub fn scale_by(&self, s: &GeneralizedNumber) -> Self {
        assert!(same_grid(&self.grid, s.grid()), "nets live on different epsilon grids");
        self.map(|k, m| m * s.value(k))
    }

    pub fn transpose(&self) -> Self {
        self.map(|_, m| m.transpose())
    }

    /// `A^T B A` per epsilon.
    pub fn congruence(&self, a: &Self) -> Self {
        a.transpose().mul(self).mul(a)
    }

    pub fn apply(&self, v: &GenVector) -> GenVector {
        assert!(same_grid(&self.grid, &v.grid), "nets live on different epsilon grids");
        GenVector {
            grid: Arc::clone(&self.grid),
            data: self.data.iter().zip(&v.data).map(|(m, x)| m * x).collect(),
        }
    }

    /// The bilinear form `u^T A v`.
    pub fn bilinear(&self, u: &GenVector, v: &GenVector) -> GeneralizedNumber {
        assert!(same_grid(&self.grid, &u.grid) && same_grid(&self.grid, &v.grid));
        let values = (0..self.grid.len())
            .map(|k| u.data[k].dot(&(&self.data[k] * &v.data[k])))
            .collect();
        GeneralizedNumber::from_samples(&self.grid, values).expect("finite samples")
    }

    pub fn det(&self) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(
            &self.grid,
            self.data.iter().map(|m| m.clone().determinant()).collect(),
        )
        .expect("finite samples")
    }

    /// Leading principal minor of order `r` (1-based size).
    pub fn leading_minor(&self, r: usize) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(
            &self.grid,
            self.data
                .iter()
                .map(|m| m.view((0, 0), (r, r)).clone_owned().determinant())
                .collect(),
        )
        .expect("finite samples")
    }

    /// Per-epsilon inverse; fails on the first singular slice.
    pub fn inverse(&self) -> Result<Self> {
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(index, m)| m.clone().try_inverse().ok_or(Error::Singular { index }))
            .collect::<Result<Vec<_>>>()?;
        Self::from_slices(&self.grid, data)
    }

    pub fn is_exactly_symmetric(&self) -> bool {
        self.symmetry_defect().is_none()
    }

    fn symmetry_defect(&self) -> Option<usize> {
        self.data.iter().position(|m| m != &m.transpose())
    }

    /// Frobenius norms per epsilon.
    pub fn frobenius(&self) -> Vec<f64> {
        self.data.iter().map(|m| m.norm()).collect()
    }

    pub fn max_abs_entry(&self) -> GeneralizedNumber {
        GeneralizedNumber::from_samples(&self.grid, self.data.iter().map(|m| m.amax()).collect())
            .expect("finite samples")
    }
}

/// `(A + A^T) / 2`, exactly symmetric.
pub fn symmetrize(a: &GenMatrix) -> GenMatrix {
    a.map(|_, m| {
        let n = m.nrows();
        let mut s = (m + m.transpose()) * 0.5;
        for i in 0..n {
            for j in i + 1..n {
                s[(j, i)] = s[(i, j)];
            }
        }
        s
    })
}

/// Epsilon-wise eigen-decomposition of a symmetric generalized matrix.
#[derive(Debug, Clone)]
pub struct GenEigen {
    /// Descending per epsilon.
    pub eigenvalues: Vec<GeneralizedNumber>,
    /// Orthogonal `U_eps` with `U A U^T = diag(eigenvalues)`.
    pub transform: GenMatrix,
}

pub fn eigen_sym(a: &GenMatrix) -> Result<GenEigen> {
    if let Some(index) = a.symmetry_defect() {
        return Err(Error::NotSymmetric { index });
    }
    let n = a.dim();
    let decomposed = par::try_map_indices(a.grid.len(), |k| {
        jacobi::decompose(&a.data[k]).ok_or(Error::EigenNonConvergence { index: k })
    })?;
    let eigenvalues = (0..n)
        .map(|i| {
            GeneralizedNumber::from_samples(&a.grid, decomposed.iter().map(|e| e.values[i]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let transform = GenMatrix::from_slices(&a.grid, decomposed.into_iter().map(|e| e.rows).collect())?;
    Ok(GenEigen {
        eigenvalues,
        transform,
    })
}

/// Outcome of comparing eigenvalues of `A` and `A + E`.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    /// Max over the tail of the matching distance.
    pub max_distance: f64,
    /// Per tail epsilon: (matching distance, `sqrt(2) ||E||_F`).
    pub tail: Vec<(f64, f64)>,
    pub within_bound: bool,
    /// Real parts of matched eigenvalue differences, one net per eigenvalue.
    pub differences: Vec<GeneralizedNumber>,
}

fn sorted_spectrum(m: &DMatrix<f64>, index: usize) -> Result<Vec<Complex<f64>>> {
    if m == &m.transpose() {
        let e = jacobi::decompose(m).ok_or(Error::EigenNonConvergence { index })?;
        return Ok(e.values.into_iter().map(|v| Complex::new(v, 0.0)).collect());
    }
    let mut values: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(values)
}

/// Eigenvalue matching between symmetric `A` and a (possibly non-symmetric)
/// perturbation `A + E`, sorted by real part.
pub fn well_definedness_check(a: &GenMatrix, perturbation: &GenMatrix) -> Result<PerturbationReport> {
    if let Some(index) = a.symmetry_defect() {
        return Err(Error::NotSymmetric { index });
    }
    let grid = &a.grid;
    let n = a.dim();
    let per_eps = par::try_map_indices(grid.len(), |k| {
        let base = sorted_spectrum(&a.data[k], k)?;
        let pert = sorted_spectrum(&(&a.data[k] + &perturbation.data[k]), k)?;
        let diffs: Vec<Complex<f64>> = pert.iter().zip(&base).map(|(p, b)| p - b).collect();
        let distance = diffs.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt();
        let bound = std::f64::consts::SQRT_2 * perturbation.data[k].norm();
        Ok((distance, bound, diffs.iter().map(|d| d.re).collect::<Vec<_>>()))
    })?;
    let tail: Vec<(f64, f64)> = grid.tail().map(|k| (per_eps[k].0, per_eps[k].1)).collect();
    let differences = (0..n)
        .map(|i| GeneralizedNumber::from_samples(grid, per_eps.iter().map(|p| p.2[i]).collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerturbationReport {
        max_distance: tail.iter().map(|t| t.0).fold(0.0, f64::max),
        within_bound: tail.iter().all(|(d, b)| d <= b),
        tail,
        differences,
    })
}

pub fn is_nondegenerate(a: &GenMatrix, m_inv: f64) -> bool {
    a.det().is_strictly_nonzero(m_inv)
}

/// Signature counts of a symmetric generalized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexReport {
    pub nu_plus: Option<usize>,
    pub nu_minus: Option<usize>,
    /// Sign pattern constant over the tail window.
    pub stable: bool,
    /// Number of strictly negative eigenvalues, present iff every eigenvalue is
    /// strictly signed and the pattern is stable.
    pub index: Option<usize>,
}

fn sign_of(v: f64, eps: f64, m_inv: f64) -> i8 {
    let floor = eps.powf(m_inv);
    if v >= floor {
        1
    } else if v <= -floor {
        -1
    } else {
        0
    }
}

pub fn index(a: &GenMatrix, m_inv: f64) -> Result<IndexReport> {
    let eig = eigen_sym(a)?;
    Ok(index_from_eigenvalues(&eig.eigenvalues, m_inv))
}

pub fn index_from_eigenvalues(eigenvalues: &[GeneralizedNumber], m_inv: f64) -> IndexReport {
    let grid = eigenvalues[0].grid();
    let mut pattern: Option<Vec<i8>> = None;
    let mut stable = true;
    for k in grid.tail() {
        let p: Vec<i8> = eigenvalues
            .iter()
            .map(|l| sign_of(l.value(k), grid.eps(k), m_inv))
            .collect();
        match &pattern {
            None => pattern = Some(p),
            Some(q) if *q != p => stable = false,
            _ => {}
        }
    }
    let pattern = pattern.unwrap_or_default();
    if !stable {
        return IndexReport {
            nu_plus: None,
            nu_minus: None,
            stable,
            index: None,
        };
    }
    let plus = pattern.iter().filter(|&&s| s > 0).count();
    let minus = pattern.iter().filter(|&&s| s < 0).count();
    IndexReport {
        nu_plus: Some(plus),
        nu_minus: Some(minus),
        stable,
        index: (plus + minus == eigenvalues.len()).then_some(minus),
    }
}

/// Every leading principal minor strictly positive.
pub fn is_positive_definite_minors(a: &GenMatrix, m_inv: f64) -> bool {
    (1..=a.dim()).all(|r| a.leading_minor(r).is_strictly_positive(m_inv))
}

pub fn is_free(v: &GenVector, m_inv: f64) -> bool {
    v.max_abs_component().is_strictly_nonzero(m_inv)
}

/// Basis matrix with `v` as first column and the remaining canonical vectors,
/// pivoting per epsilon on the largest-modulus coefficient of `v`.
pub fn extend_to_basis(v: &GenVector, m_inv: f64) -> Result<GenMatrix> {
    if !is_free(v, m_inv) {
        return Err(Error::NotFree);
    }
    let n = v.dim();
    let data = v
        .data
        .iter()
        .map(|x| {
            let pivot = x.iamax();
            let mut m = DMatrix::zeros(n, n);
            m.set_column(0, x);
            for (col, j) in (0..n).filter(|&j| j != pivot).enumerate() {
                m[(j, col + 1)] = 1.0;
            }
            m
        })
        .collect();
    GenMatrix::from_slices(&v.grid, data)
}

/// Columns form a basis orthogonal for `b`: `P^T B P` is diagonal.
pub fn orthogonal_basis(b: &GenMatrix) -> Result<GenMatrix> {
    Ok(eigen_sym(b)?.transform.transpose())
}

/// Orthogonal projection of `v` onto the span of `basis` with respect to `h`.
pub fn orthogonal_projection(
    basis: &[GenVector],
    h: &GenMatrix,
    v: &GenVector,
    thresholds: &Thresholds,
) -> Result<GenVector> {
    let m = basis.len();
    if m == 0 {
        return Err(Error::Precondition("empty basis".into()));
    }
    if basis.iter().any(|b| !is_free(b, thresholds.m_inv)) {
        return Err(Error::NotFree);
    }
    let grid = &h.grid;
    let gram = GenMatrix::from_fn(grid, m, |k, _| {
        DMatrix::from_fn(m, m, |i, j| basis[i].data[k].dot(&(&h.data[k] * &basis[j].data[k])))
    })?;
    if thresholds.classify(&gram.det()) == NetClass::ModerateIndeterminate
        || !gram.det().is_strictly_nonzero(thresholds.m_inv)
    {
        return Err(Error::DegenerateGram);
    }
    let data = (0..grid.len())
        .map(|k| {
            let rhs = DVector::from_fn(m, |i, _| basis[i].data[k].dot(&(&h.data[k] * &v.data[k])));
            let coeffs = gram.data[k]
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or(Error::DegenerateGram)?;
            Ok(basis
                .iter()
                .zip(coeffs.iter())
                .fold(DVector::zeros(v.dim()), |acc, (b, &c)| acc + &b.data[k] * c))
        })
        .collect::<Result<Vec<_>>>()?;
    GenVector::from_slices(grid, data)
}
