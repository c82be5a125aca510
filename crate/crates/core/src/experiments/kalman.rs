use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filter::Schedule;
use crate::model::LinearGaussianModel;

/// Posterior variances `p(0..=T)` of the Kalman filter for the scalar
/// linear-Gaussian model, correcting only at scheduled times.
pub fn riccati_variances(model: &LinearGaussianModel, schedule: &Schedule) -> Result<Vec<f64>> {
    model.validate()?;
    check_schedule(schedule, model.horizon)?;
    let mut p = model.p0;
    let mut out = Vec::with_capacity(model.horizon + 1);
    for t in 0..=model.horizon {
        if t > 0 {
            p = model.a * model.a * p + model.q;
        }
        if schedule.contains(t) {
            let s = model.c * model.c * p + model.r;
            // a zero innovation variance means the measurement carries no
            // information (p = 0 or c = 0 with exact measurements)
            if s > 0.0 {
                p -= p * p * model.c * model.c / s;
            }
        }
        out.push(p.max(0.0));
    }
    Ok(out)
}

/// Expected cumulative squared filtering error `sum_t E|x(t) - xhat(t)|^2`
/// of the optimal filter for the scalar linear-Gaussian model.
pub fn kalman_oracle(model: &LinearGaussianModel, schedule: &Schedule) -> Result<f64> {
    Ok(riccati_variances(model, schedule)?.iter().sum())
}

/// Matrix version for `x(t+1) = A x + w`, `y = C x + v`, output `x`, with
/// covariances `Q`, `R` and prior covariance `P0`. Returns the summed trace
/// of the posterior covariance.
pub fn kalman_oracle_matrix(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p0: &DMatrix<f64>,
    schedule: &Schedule,
) -> Result<f64> {
    let n = a.nrows();
    let m = c.nrows();
    let shapes = [
        ("A", a.shape(), (n, n)),
        ("C", c.shape(), (m, n)),
        ("Q", q.shape(), (n, n)),
        ("R", r.shape(), (m, m)),
        ("P0", p0.shape(), (n, n)),
    ];
    for (name, got, want) in shapes {
        if got != want {
            return Err(Error::invalid(format!("{name} has shape {got:?}, expected {want:?}")));
        }
    }
    for (name, mat) in [("Q", q), ("R", r), ("P0", p0)] {
        check_covariance(name, mat)?;
    }
    check_schedule(schedule, schedule.horizon())?;
    let mut p = p0.clone();
    let mut total = 0.0;
    for t in 0..=schedule.horizon() {
        if t > 0 {
            p = a * &p * a.transpose() + q;
        }
        if schedule.contains(t) {
            let s = c * &p * c.transpose() + r;
            if s.iter().any(|v| *v != 0.0) {
                let chol = s.clone().cholesky().ok_or_else(|| {
                    Error::Numerical(format!("innovation covariance at t={t} is not positive definite"))
                })?;
                let pct = &p * c.transpose();
                let gain = chol.solve(&pct.transpose()).transpose();
                p = &p - &gain * c * &p;
                p = (&p + p.transpose()) * 0.5;
            }
        }
        check_covariance("posterior covariance", &p)?;
        total += p.trace();
    }
    Ok(total)
}

fn check_schedule(schedule: &Schedule, horizon: usize) -> Result<()> {
    if schedule.horizon() != horizon {
        return Err(Error::invalid(format!(
            "schedule horizon {} differs from the model horizon {horizon}",
            schedule.horizon()
        )));
    }
    Ok(())
}

fn check_covariance(name: &str, mat: &DMatrix<f64>) -> Result<()> {
    let scale = mat.amax().max(1.0);
    if (mat - mat.transpose()).amax() > 1e-9 * scale {
        return Err(Error::Numerical(format!("{name} is not symmetric")));
    }
    let eig = mat.clone().symmetric_eigenvalues();
    if eig.iter().any(|&v| v < -1e-9 * scale || !v.is_finite()) {
        return Err(Error::Numerical(format!("{name} is not positive semi-definite")));
    }
    Ok(())
}
