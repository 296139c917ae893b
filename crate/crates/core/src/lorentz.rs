//! Causality and energy conditions for generalized Lorentzian forms.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize, GenMatrix, GenVector, IndexReport};
use crate::net::{EpsilonGrid, GeneralizedNumber, NetClass, Thresholds};

/// Relative slack for sample-wise "nonnegative" checks.
pub const SIGN_TOLERANCE: f64 = 1e-9;

/// A symmetric generalized bilinear form with its cached index.
#[derive(Debug, Clone)]
pub struct GenBilinearForm {
    matrix: GenMatrix,
    index_report: IndexReport,
    thresholds: Thresholds,
}

impl GenBilinearForm {
    pub fn new(matrix: GenMatrix, thresholds: Thresholds) -> Result<Self> {
        let index_report = linalg::index(&matrix, thresholds.m_inv)?;
        Ok(Self {
            matrix,
            index_report,
            thresholds,
        })
    }

    /// Fails unless the form is nondegenerate of index 1.
    pub fn lorentzian(matrix: GenMatrix, thresholds: Thresholds) -> Result<Self> {
        let form = Self::new(matrix, thresholds)?;
        if !form.is_lorentzian() {
            return Err(Error::NotLorentzian);
        }
        Ok(form)
    }

    pub fn minkowski(grid: &Arc<EpsilonGrid>, n: usize, thresholds: Thresholds) -> Self {
        Self::lorentzian(GenMatrix::minkowski(grid, n), thresholds).expect("Minkowski is Lorentzian")
    }

    pub fn is_lorentzian(&self) -> bool {
        self.index_report.index == Some(1)
            && linalg::is_nondegenerate(&self.matrix, self.thresholds.m_inv)
    }

    pub fn matrix(&self) -> &GenMatrix {
        &self.matrix
    }

    pub fn index_report(&self) -> IndexReport {
        self.index_report
    }

    pub fn thresholds(&self) -> Thresholds {
        self.thresholds
    }

    pub fn grid(&self) -> &Arc<EpsilonGrid> {
        self.matrix.grid()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn eval(&self, u: &GenVector, v: &GenVector) -> GeneralizedNumber {
        self.matrix.bilinear(u, v)
    }

    /// Index lowering `u_a = g_ab u^b`.
    pub fn lower(&self, u: &GenVector) -> GenVector {
        self.matrix.apply(u)
    }

    pub fn inverse(&self) -> Result<GenMatrix> {
        Ok(symmetrize(&self.matrix.inverse()?))
    }

    fn require_lorentzian(&self) -> Result<()> {
        if self.is_lorentzian() {
            Ok(())
        } else {
            Err(Error::NotLorentzian)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalClass {
    Timelike,
    Spacelike,
    Null,
    Indeterminate,
}

impl fmt::Display for CausalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Timelike => "timelike",
            Self::Spacelike => "spacelike",
            Self::Null => "null",
            Self::Indeterminate => "indeterminate",
        })
    }
}

pub fn classify_causal(g: &GenBilinearForm, u: &GenVector) -> Result<CausalClass> {
    g.require_lorentzian()?;
    let t = g.thresholds;
    let q = g.eval(u, u);
    Ok(if q.is_strictly_negative(t.m_inv) {
        CausalClass::Timelike
    } else if q.is_strictly_positive(t.m_inv) {
        CausalClass::Spacelike
    } else if u.is_negligible(&t) || (linalg::is_free(u, t.m_inv) && t.is_negligible(&q)) {
        CausalClass::Null
    } else {
        CausalClass::Indeterminate
    })
}

fn require_timelike(g: &GenBilinearForm, u: &GenVector, name: &str) -> Result<()> {
    match classify_causal(g, u)? {
        CausalClass::Timelike => Ok(()),
        other => Err(Error::Precondition(format!("{name} is {other}, expected timelike"))),
    }
}

pub fn same_time_orientation(g: &GenBilinearForm, u: &GenVector, v: &GenVector) -> Result<bool> {
    require_timelike(g, u, "u")?;
    require_timelike(g, v, "v")?;
    Ok(g.eval(u, v).is_strictly_negative(g.thresholds.m_inv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapVerdict {
    Strict,
    Equality,
    Weak,
    Indeterminate,
}

impl fmt::Display for GapVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Strict => "strict",
            Self::Equality => "equality",
            Self::Weak => "weak",
            Self::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct InverseCsGap {
    /// `<u,v>^2 - <u,u><v,v>`.
    pub gap: GeneralizedNumber,
    pub verdict: GapVerdict,
    /// Smallest tail sample of the gap divided by its magnitude scale.
    pub min_normalized: f64,
}

impl InverseCsGap {
    pub fn contract_holds(&self) -> bool {
        self.min_normalized >= -SIGN_TOLERANCE
    }
}

fn min_normalized(grid: &EpsilonGrid, values: &[f64], scales: &[f64]) -> f64 {
    grid.tail()
        .map(|k| if values[k] == 0.0 { 0.0 } else { values[k] / scales[k].max(f64::MIN_POSITIVE) })
        .fold(f64::INFINITY, f64::min)
}

/// Computed through the Lagrange identity in an eigenbasis of `g`,
/// `-sum_{i<j} l_i l_j (u_i v_j - u_j v_i)^2`, which avoids the cancellation in
/// the direct formula when the gap is far below the size of its terms.
pub fn inverse_cs_gap(g: &GenBilinearForm, u: &GenVector, v: &GenVector) -> Result<InverseCsGap> {
    require_timelike(g, u, "u")?;
    require_timelike(g, v, "v")?;
    let eig = linalg::eigen_sym(&g.matrix)?;
    let n = g.dim();
    let per_eps: Vec<(f64, f64)> = (0..g.grid().len())
        .map(|k| {
            let rot = eig.transform.at(k);
            let (a, b) = (rot * u.at(k), rot * v.at(k));
            let (mut gap, mut scale) = (0.0, 0.0);
            for i in 0..n {
                for j in i + 1..n {
                    let ll = eig.eigenvalues[i].value(k) * eig.eigenvalues[j].value(k);
                    let minor = a[i] * b[j] - a[j] * b[i];
                    gap -= ll * minor * minor;
                    scale += ll.abs() * minor * minor;
                }
            }
            (gap, scale)
        })
        .collect();
    let gap = GeneralizedNumber::from_samples(g.grid(), per_eps.iter().map(|p| p.0).collect())?;
    let scales: Vec<f64> = per_eps.iter().map(|p| p.1).collect();
    let min_normalized = min_normalized(g.grid(), gap.values(), &scales);
    let t = g.thresholds;
    let verdict = if gap.is_strictly_positive(t.m_inv) {
        GapVerdict::Strict
    } else if t.is_negligible(&gap) {
        GapVerdict::Equality
    } else if min_normalized >= -SIGN_TOLERANCE {
        GapVerdict::Weak
    } else {
        GapVerdict::Indeterminate
    };
    Ok(InverseCsGap {
        gap,
        verdict,
        min_normalized,
    })
}

/// Rescales a timelike vector to `g(u,u) = -1` per epsilon.
pub fn normalize_timelike(g: &GenBilinearForm, u: &GenVector) -> Result<GenVector> {
    require_timelike(g, u, "u")?;
    let q = g.eval(u, u);
    Ok(u.scale_by(&q.map(|x| if x < 0.0 { 1.0 / (-x).sqrt() } else { 0.0 })))
}

fn require_unit(g: &GenBilinearForm, u: &GenVector, name: &str) -> Result<()> {
    require_timelike(g, u, name)?;
    let q = g.eval(u, u);
    if g.grid().tail().all(|k| (q.value(k) + 1.0).abs() <= SIGN_TOLERANCE) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} is not unit timelike")))
    }
}

/// The Lorentz transformation
/// `L = I - 2 eta xi_flat^T + (xi + eta)(xi + eta)_flat^T / (1 - <xi, eta>)`,
/// which maps `xi` to `eta` and preserves `g`.
pub fn lorentz_boost(g: &GenBilinearForm, xi: &GenVector, eta: &GenVector) -> Result<GenMatrix> {
    require_unit(g, xi, "xi")?;
    require_unit(g, eta, "eta")?;
    if !same_time_orientation(g, xi, eta)? {
        return Err(Error::Precondition("xi and eta have opposite time orientation".into()));
    }
    let one = GeneralizedNumber::one(g.grid());
    let denom = &one - &g.eval(xi, eta);
    if !denom.is_strictly_nonzero(g.thresholds.m_inv) {
        return Err(Error::Precondition("1 - <xi, eta> is not strictly nonzero".into()));
    }
    let n = g.dim();
    let xi_flat = g.lower(xi);
    let sum = xi.add(eta);
    let sum_flat = g.lower(&sum);
    GenMatrix::from_fn(g.grid(), n, |k, _| {
        DMatrix::identity(n, n) - eta.at(k) * xi_flat.at(k).transpose() * 2.0
            + sum.at(k) * sum_flat.at(k).transpose() / denom.value(k)
    })
}

/// `h = u_(a v_b) - <u,v> g / 2`, positive definite for same-oriented timelike `u, v`.
pub fn riemann_from_pair(g: &GenBilinearForm, u: &GenVector, v: &GenVector) -> Result<GenBilinearForm> {
    if !same_time_orientation(g, u, v)? {
        return Err(Error::Precondition("u and v have opposite time orientation".into()));
    }
    let uf = g.lower(u);
    let vf = g.lower(v);
    let uv = g.eval(u, v);
    let n = g.dim();
    let h = GenMatrix::from_fn(g.grid(), n, |k, _| {
        let outer = uf.at(k) * vf.at(k).transpose();
        (&outer + outer.transpose()) * 0.5 - g.matrix.at(k) * (0.5 * uv.value(k))
    })?;
    GenBilinearForm::new(symmetrize(&h), g.thresholds)
}

/// The Riemannian pair `k_ab = g_ab + 2 theta_a theta_b`, `k^ab = g^ab + 2 theta^a theta^b`.
pub fn flip_metric(g: &GenBilinearForm, theta: &GenVector) -> Result<(GenMatrix, GenMatrix)> {
    require_unit(g, theta, "theta")?;
    let n = g.dim();
    let flat = g.lower(theta);
    let g_inv = g.inverse()?;
    let lower = GenMatrix::from_fn(g.grid(), n, |k, _| {
        g.matrix.at(k) + flat.at(k) * flat.at(k).transpose() * 2.0
    })?;
    let upper = GenMatrix::from_fn(g.grid(), n, |k, _| {
        g_inv.at(k) + theta.at(k) * theta.at(k).transpose() * 2.0
    })?;
    Ok((symmetrize(&lower), symmetrize(&upper)))
}

/// The field entering an energy tensor: a scalar, a covector or a covariant 2-tensor.
#[derive(Debug, Clone)]
pub enum EnergySource {
    Scalar(GeneralizedNumber),
    Covector(GenVector),
    Rank2(GenMatrix),
}

impl EnergySource {
    pub fn rank(&self) -> usize {
        match self {
            Self::Scalar(_) => 0,
            Self::Covector(_) => 1,
            Self::Rank2(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnergyTensor {
    pub order: usize,
    /// Contravariant components `T^ab`.
    pub components: GenMatrix,
    /// The covector `W` when `order == 1`.
    pub source: Option<GenVector>,
}

/// `T^ab = -g^ab W^2 / 2` for `k = 0`, otherwise
/// `T^ab = (g^ac g^bd - g^ab g^cd / 2) M_cd` with `M_cd` the `e`-contraction of
/// `W_c.. W_d..` over the trailing indices.
pub fn energy_tensor(
    g: &GenBilinearForm,
    e_upper: &GenMatrix,
    w: &EnergySource,
    order: usize,
) -> Result<EnergyTensor> {
    if order > 2 || w.rank() != order {
        return Err(Error::RankMismatch {
            order,
            found: w.rank(),
        });
    }
    let g_inv = g.inverse()?;
    let n = g.dim();
    let contracted = |k: usize| -> DMatrix<f64> {
        match w {
            EnergySource::Scalar(_) => unreachable!(),
            EnergySource::Covector(v) => v.at(k) * v.at(k).transpose(),
            EnergySource::Rank2(m) => m.at(k) * e_upper.at(k) * m.at(k).transpose(),
        }
    };
    let components = GenMatrix::from_fn(g.grid(), n, |k, _| {
        let gi = g_inv.at(k);
        match w {
            EnergySource::Scalar(s) => gi * (-0.5 * s.value(k) * s.value(k)),
            _ => {
                let m = contracted(k);
                let trace = (gi * &m).trace();
                gi * &m * gi - gi * (0.5 * trace)
            }
        }
    })?;
    Ok(EnergyTensor {
        order,
        components: symmetrize(&components),
        source: match w {
            EnergySource::Covector(v) if order == 1 => Some(v.clone()),
            _ => None,
        },
    })
}

/// Outcome of the dominant-energy checks for `T` against observers `xi`, `eta`.
#[derive(Debug, Clone)]
pub struct DecReport {
    /// `T^ab xi_a xi_b`.
    pub s1: GeneralizedNumber,
    /// `T^ab xi_a eta_b`.
    pub s2: GeneralizedNumber,
    pub s1_min_normalized: f64,
    pub s2_min_normalized: f64,
    pub s2_class: NetClass,
    /// `T^ab xi_a`.
    pub flux: GenVector,
    pub flux_class: CausalClass,
    /// Max over epsilon of `|<flux, flux> - <theta,theta>^2 <xi,xi> / 4|`, present
    /// for first-order tensors.
    pub identity_residual: Option<f64>,
}

impl DecReport {
    pub fn nonnegative(&self) -> bool {
        self.s1_min_normalized >= -SIGN_TOLERANCE && self.s2_min_normalized >= -SIGN_TOLERANCE
    }
}

fn contraction_scale(t: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.abs().dot(&(t.abs() * b.abs()))
}

pub fn dec_check(t: &EnergyTensor, g: &GenBilinearForm, xi: &GenVector, eta: &GenVector) -> Result<DecReport> {
    if !same_time_orientation(g, xi, eta)? {
        return Err(Error::Precondition("xi and eta have opposite time orientation".into()));
    }
    let xf = g.lower(xi);
    let ef = g.lower(eta);
    let tm = &t.components;
    let s1 = tm.bilinear(&xf, &xf);
    let s2 = tm.bilinear(&xf, &ef);
    let len = g.grid().len();
    let sc1: Vec<f64> = (0..len).map(|k| contraction_scale(tm.at(k), xf.at(k), xf.at(k))).collect();
    let sc2: Vec<f64> = (0..len).map(|k| contraction_scale(tm.at(k), xf.at(k), ef.at(k))).collect();
    let flux = tm.apply(&xf);
    let flux_class = classify_causal(g, &flux)?;
    let identity_residual = match &t.source {
        Some(theta) => {
            let g_inv = g.inverse()?;
            let tt = g_inv.bilinear(theta, theta);
            let ff = g.eval(&flux, &flux);
            let xx = g.eval(xi, xi);
            Some(
                (0..len)
                    .map(|k| (ff.value(k) - 0.25 * tt.value(k).powi(2) * xx.value(k)).abs())
                    .fold(0.0, f64::max),
            )
        }
        None => None,
    };
    Ok(DecReport {
        s1_min_normalized: min_normalized(g.grid(), s1.values(), &sc1),
        s2_min_normalized: min_normalized(g.grid(), s2.values(), &sc2),
        s2_class: g.thresholds.classify(&s2),
        s1,
        s2,
        flux,
        flux_class,
        identity_residual,
    })
}
