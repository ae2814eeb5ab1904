//! Fisher information, the Cramér–Rao bound, minimum-eigenvalue
//! extraction with its directional derivative, and identifiability.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::csvio;
use crate::error::{Error, Result};
use crate::model::{MeasurementNoise, PlantModel};
use crate::numkit::{integrate_with_breakpoints, merge_times, DenseTrajectory, IntegratorConfig};
use crate::sensitivity::{output_sensitivity, psi_from_flat};

/// Relative gap below which the two smallest eigenvalues count as repeated.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Default threshold on `lambda_min / lambda_max` for identifiability.
pub const IDENTIFIABILITY_THRESHOLD: f64 = 1e-6;
/// `lambda_min <= SINGULARITY_REL * max(trace, 1)` counts as singular.
pub const SINGULARITY_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoKind {
    Discrete,
    Continuous,
}

/// Symmetric PSD information matrix with a cached eigendecomposition.
///
/// Eigenvalues are ascending; column `k` of the eigenvector matrices
/// belongs to `eigvals[k]`. Left and right eigenvectors coincide for a
/// symmetric matrix but both are kept for the eigenvalue-derivative formula.
#[derive(Debug, Clone)]
pub struct InfoMatrix {
    pub matrix: DMatrix<f64>,
    pub eigvals: Vec<f64>,
    pub left_eigvecs: DMatrix<f64>,
    pub right_eigvecs: DMatrix<f64>,
    pub kind: InfoKind,
}

impl InfoMatrix {
    /// Wraps a symmetric matrix; the stored matrix is the exact symmetric
    /// part so roundoff asymmetry never leaks into the eigenvectors.
    pub fn new(matrix: DMatrix<f64>, kind: InfoKind) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                what: "information matrix columns",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult("information matrix".into()));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidConfig("information matrix is not symmetric".into()));
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let p = sym.nrows();
        let eig = SymmetricEigen::new(sym.clone());
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigvals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vecs = DMatrix::zeros(p, p);
        for (col, &k) in order.iter().enumerate() {
            let mut v = eig.eigenvectors.column(k).into_owned();
            canonical_sign(&mut v);
            vecs.set_column(col, &v);
        }
        Ok(Self {
            matrix: sym,
            eigvals,
            left_eigvecs: vecs.clone(),
            right_eigvecs: vecs,
            kind,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigvals[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigvals.last().expect("non-empty")
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `lambda_min` at or below the singularity threshold.
    pub fn is_singular(&self) -> bool {
        self.lambda_min() <= SINGULARITY_REL * self.trace().max(1.0)
    }

    /// Fails with [`Error::SingularInformation`] when singular.
    pub fn require_nonsingular(&self) -> Result<()> {
        if self.is_singular() {
            return Err(Error::SingularInformation {
                lambda_min: self.lambda_min(),
                null_direction: self.right_eigvecs.column(0).iter().copied().collect(),
            });
        }
        Ok(())
    }

    /// Matrix as CSV rows, no header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for r in 0..self.dim() {
            w.write_record(self.matrix.row(r).iter().map(|v| csvio::fmt_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self, names: &[String], threshold: f64) -> InfoSummary {
        let verdict = identifiability_check(self, threshold);
        let (identifiable, null_direction) = match &verdict {
            Identifiability::Identifiable { .. } => (true, None),
            Identifiability::NonIdentifiable { null_direction, .. } => (false, Some(null_direction.iter().copied().collect())),
        };
        InfoSummary {
            kind: self.kind,
            parameters: names.to_vec(),
            matrix: (0..self.dim()).map(|r| self.matrix.row(r).iter().copied().collect()).collect(),
            eigenvalues: self.eigvals.clone(),
            lambda_min: self.lambda_min(),
            lambda_max: self.lambda_max(),
            eigenvalue_ratio: verdict.ratio(),
            identifiable,
            null_direction,
        }
    }
}

/// Serializable report block for an information matrix.
#[derive(Debug, Clone, Serialize)]
pub struct InfoSummary {
    pub kind: InfoKind,
    pub parameters: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eigenvalue_ratio: f64,
    pub identifiable: bool,
    pub null_direction: Option<Vec<f64>>,
}

/// Flips `v` so that its first non-negligible component is positive.
fn canonical_sign(v: &mut DVector<f64>) {
    let tol = 1e-12 * v.amax();
    if let Some(first) = v.iter().find(|c| c.abs() > tol) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

fn gamma_at(
    model: &dyn PlantModel,
    x: &DenseTrajectory,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    psi: &DenseTrajectory,
    t: f64,
) -> Result<DMatrix<f64>> {
    let d = model.dims();
    let psi_t = psi_from_flat(psi.eval(t)?.as_slice(), d.n, d.p);
    output_sensitivity(model, &x.eval(t)?, &u.eval(t)?, theta, &psi_t)
}

/// `sum_i Gamma(t_i)^T Sigma^-1 Gamma(t_i)` over the sample times.
pub fn fim_discrete(
    model: &dyn PlantModel,
    x: &DenseTrajectory,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    psi: &DenseTrajectory,
    times: &[f64],
    sigma: &MeasurementNoise,
) -> Result<InfoMatrix> {
    let w = sigma.inverse()?;
    let p = model.dims().p;
    let mut info = DMatrix::zeros(p, p);
    for &t in times {
        let g = gamma_at(model, x, u, theta, psi, t)?;
        info += g.transpose() * w * &g;
    }
    InfoMatrix::new(info, InfoKind::Discrete)
}

/// Upper-triangle index pairs `(j, k)`, `j <= k`, in row order.
pub fn upper_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|j| (j..p).map(move |k| (j, k))).collect()
}

/// Symmetric matrix from its packed upper triangle.
pub fn unpack_upper(packed: &[f64], p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for (idx, (j, k)) in upper_pairs(p).into_iter().enumerate() {
        m[(j, k)] = packed[idx];
        m[(k, j)] = packed[idx];
    }
    m
}

/// `integral Gamma^T Sigma^-1 Gamma dt` over the trajectory span, by
/// adaptive quadrature of the packed upper triangle.
pub fn fim_continuous(
    model: &dyn PlantModel,
    x: &DenseTrajectory,
    u: &DenseTrajectory,
    theta: &DVector<f64>,
    psi: &DenseTrajectory,
    sigma: &MeasurementNoise,
    cfg: &IntegratorConfig,
) -> Result<InfoMatrix> {
    let w = sigma.inverse()?.clone();
    let p = model.dims().p;
    let pairs = upper_pairs(p);
    let knots = merge_times(&merge_times(x.times(), psi.times(), 1e-12), u.times(), 1e-12);
    let mut failure = None;
    let acc = integrate_with_breakpoints(
        |t, _| match gamma_at(model, x, u, theta, psi, t) {
            Ok(g) => {
                let m = g.transpose() * &w * &g;
                DVector::from_iterator(pairs.len(), pairs.iter().map(|&(j, k)| m[(j, k)]))
            }
            Err(e) => {
                failure.get_or_insert(e);
                DVector::from_element(pairs.len(), f64::NAN)
            }
        },
        &DVector::zeros(pairs.len()),
        (x.t0(), x.tf()),
        &knots,
        cfg,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    InfoMatrix::new(unpack_upper(acc?.last().as_slice(), p), InfoKind::Continuous)
}

/// Cramér–Rao lower bound `I^-1`.
pub fn cramer_rao(info: &InfoMatrix) -> Result<DMatrix<f64>> {
    info.require_nonsingular()?;
    let inv = info
        .matrix
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SingularInformation {
            lambda_min: info.lambda_min(),
            null_direction: info.right_eigvecs.column(0).iter().copied().collect(),
        })?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Smallest eigenvalue with its unit left and right eigenvectors.
pub fn min_eigenpair(info: &InfoMatrix) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    check_simple(info)?;
    Ok((
        info.lambda_min(),
        info.left_eigvecs.column(0).into_owned(),
        info.right_eigvecs.column(0).into_owned(),
    ))
}

fn check_simple(info: &InfoMatrix) -> Result<()> {
    if info.dim() >= 2 {
        let gap = info.eigvals[1] - info.eigvals[0];
        if gap.abs() < DEGENERACY_GAP * info.lambda_max().abs().max(1.0) {
            return Err(Error::DegenerateEigenvalue { gap });
        }
    }
    Ok(())
}

/// Directional derivative of the simple eigenvalue with eigenvectors
/// `(omega, nu)` along the matrix perturbation `d_info`:
/// `omega^T dA nu / (omega^T nu)`.
pub fn eig_derivative(
    info: &InfoMatrix,
    d_info: &DMatrix<f64>,
    omega: &DVector<f64>,
    nu: &DVector<f64>,
) -> Result<f64> {
    check_simple(info)?;
    if d_info.shape() != info.matrix.shape() {
        return Err(Error::DimensionMismatch {
            what: "matrix perturbation",
            expected: info.dim(),
            got: d_info.nrows(),
        });
    }
    Ok((omega.transpose() * d_info * nu)[(0, 0)] / omega.dot(nu))
}

/// Outcome of the zero-eigenvalue test.
#[derive(Debug, Clone, PartialEq)]
pub enum Identifiability {
    Identifiable { ratio: f64 },
    /// `null_direction` is the locally unidentifiable parameter combination.
    NonIdentifiable { ratio: f64, null_direction: DVector<f64> },
}

impl Identifiability {
    pub fn ratio(&self) -> f64 {
        match self {
            Identifiability::Identifiable { ratio } | Identifiability::NonIdentifiable { ratio, .. } => *ratio,
        }
    }

    pub fn is_identifiable(&self) -> bool {
        matches!(self, Identifiability::Identifiable { .. })
    }
}

/// Non-identifiable iff `lambda_min / lambda_max < threshold`.
pub fn identifiability_check(info: &InfoMatrix, threshold: f64) -> Identifiability {
    let lmax = info.lambda_max();
    let ratio = if lmax > 0.0 { info.lambda_min() / lmax } else { 0.0 };
    if ratio < threshold {
        Identifiability::NonIdentifiable {
            ratio,
            null_direction: info.right_eigvecs.column(0).into_owned(),
        }
    } else {
        Identifiability::Identifiable { ratio }
    }
}
