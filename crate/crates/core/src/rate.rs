//! Distance-versus-time observations and the least-squares clock fit.
//!
//! Time is measured in days since the reference date. Coefficients are
//! stored in ascending powers (`c0 + c1 x + ...`); the slope `c1` is the
//! substitution rate per day.

use std::fmt::Write as _;

use chrono::{Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateObservation {
    pub label: String,
    pub date: NaiveDate,
    pub elapsed_days: i64,
    pub distance: f64,
}

/// A year's chosen sequence and its (effective) collection date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Representative {
    pub year: i32,
    pub label: String,
    pub date: NaiveDate,
}

/// One observation per representative: its distance to the reference-year
/// representative against days since `reference_date`. The reference itself
/// contributes `(0, 0)`. Sorted by elapsed days.
pub fn build_observations(
    reps: &[Representative],
    reference_year: i32,
    reference_date: NaiveDate,
    d: &DistanceMatrix,
) -> Result<Vec<RateObservation>> {
    let reference = reps
        .iter()
        .find(|r| r.year == reference_year)
        .ok_or(Error::MissingReference(reference_year))?;
    let mut obs = Vec::with_capacity(reps.len());
    for r in reps {
        if r.year == reference_year {
            obs.push(RateObservation {
                label: r.label.clone(),
                date: reference_date,
                elapsed_days: 0,
                distance: 0.0,
            });
            continue;
        }
        if r.date < reference_date {
            return Err(Error::DateBeforeReference {
                date: r.date,
                reference: reference_date,
            });
        }
        let distance = d
            .get(&reference.label, &r.label)
            .ok_or_else(|| Error::UnknownLabel(r.label.clone()))?;
        obs.push(RateObservation {
            label: r.label.clone(),
            date: r.date,
            elapsed_days: (r.date - reference_date).num_days(),
            distance,
        });
    }
    obs.sort_by_key(|o| o.elapsed_days);
    Ok(obs)
}

pub fn observations_to_csv(obs: &[RateObservation]) -> String {
    let mut out = String::from("label,date,elapsed_days,distance\n");
    for o in obs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            o.label,
            o.date.format("%Y-%m-%d"),
            o.elapsed_days,
            o.distance
        );
    }
    out
}

pub fn observations_from_csv(text: &str) -> Result<Vec<RateObservation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::InvalidInput(format!("observations line {}: {line:?}", i + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad());
        }
        out.push(RateObservation {
            label: f[0].to_string(),
            date: NaiveDate::parse_from_str(f[1], "%Y-%m-%d").map_err(|_| bad())?,
            elapsed_days: f[2].parse().map_err(|_| bad())?,
            distance: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub fitted: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub degree: usize,
    /// Ascending powers of elapsed days.
    pub coefficients: Vec<f64>,
    pub xs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub n: usize,
    pub reference_date: NaiveDate,
    /// `(X^T X)^-1` of the design matrix, for mean-response intervals.
    pub unscaled_covariance: Vec<Vec<f64>>,
    /// 95% mean-response band at each observation, when residual degrees
    /// of freedom exist.
    pub ci95: Option<Vec<BandPoint>>,
}

impl RateFit {
    /// Substitutions per site per day.
    pub fn rate(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }

    pub fn rate_per_year(&self) -> f64 {
        self.rate() * DAYS_PER_YEAR
    }

    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn residual_dof(&self) -> usize {
        self.n - (self.degree + 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + c)
    }

    fn leverage(&self, x: f64) -> f64 {
        let v: Vec<f64> = (0..=self.degree).map(|k| x.powi(k as i32)).collect();
        let mut s = 0.0;
        for (i, vi) in v.iter().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                s += vi * self.unscaled_covariance[i][j] * vj;
            }
        }
        s.max(0.0)
    }

    pub fn x_range(&self) -> (f64, f64) {
        let lo = self.xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

fn vandermonde(xs: &[f64], degree: usize) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), degree + 1, |i, k| xs[i].powi(k as i32))
}

/// Least squares through Householder QR of the Vandermonde design.
pub fn fit_points(
    xs: &[f64],
    ys: &[f64],
    degree: usize,
    reference_date: NaiveDate,
) -> Result<RateFit> {
    let p = degree + 1;
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < p {
        return Err(Error::Underdetermined {
            degree,
            needed: p,
            got: xs.len(),
        });
    }
    let x = vandermonde(xs, degree);
    let y = DVector::from_column_slice(ys);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|d| d.abs() <= scale * 1e-12) {
        return Err(Error::Underdetermined {
            degree,
            needed: p,
            got: distinct_count(xs),
        });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::InvalidInput("singular design matrix".into()))?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular design matrix".into()))?;
    let cov = &r_inv * r_inv.transpose();
    let residuals: Vec<f64> = (y - &x * &beta).iter().copied().collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    let mut fit = RateFit {
        degree,
        coefficients: beta.iter().copied().collect(),
        xs: xs.to_vec(),
        residuals,
        rss,
        n: xs.len(),
        reference_date,
        unscaled_covariance: (0..p)
            .map(|i| (0..p).map(|j| cov[(i, j)]).collect())
            .collect(),
        ci95: None,
    };
    if fit.residual_dof() > 0 {
        fit.ci95 = Some(confidence_band(&fit, xs, 0.95)?);
    }
    Ok(fit)
}

fn distinct_count(xs: &[f64]) -> usize {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Fits distance against elapsed days.
pub fn fit_polynomial(obs: &[RateObservation], degree: usize) -> Result<RateFit> {
    let first = obs.first().ok_or(Error::Underdetermined {
        degree,
        needed: degree + 1,
        got: 0,
    })?;
    let reference_date = first.date - Duration::days(first.elapsed_days);
    let xs: Vec<f64> = obs.iter().map(|o| o.elapsed_days as f64).collect();
    let ys: Vec<f64> = obs.iter().map(|o| o.distance).collect();
    fit_points(&xs, &ys, degree, reference_date)
}

/// Two-sided Student t quantile at `level` with `dof` degrees of freedom.
pub fn t_quantile(level: f64, dof: usize) -> f64 {
    StudentsT::new(0.0, 1.0, dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// Pointwise mean-response band:
/// `fitted +- t(n - degree - 1, (1 + level) / 2) * se(fitted)`.
pub fn confidence_band(fit: &RateFit, xs: &[f64], level: f64) -> Result<Vec<BandPoint>> {
    let dof = fit.residual_dof();
    if dof == 0 {
        return Err(Error::ZeroDegreesOfFreedom);
    }
    let sigma2 = fit.rss / dof as f64;
    let t = t_quantile(level, dof);
    Ok(xs
        .iter()
        .map(|&x| {
            let fitted = fit.eval(x);
            let half = t * (sigma2 * fit.leverage(x)).sqrt();
            BandPoint {
                x,
                fitted,
                lower: fitted - half,
                upper: fitted + half,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub elapsed_days: i64,
    pub distance: f64,
    pub extrapolated: bool,
}

pub fn predict(fit: &RateFit, date: NaiveDate) -> Result<Prediction> {
    if date < fit.reference_date {
        return Err(Error::DateBeforeReference {
            date,
            reference: fit.reference_date,
        });
    }
    let days = (date - fit.reference_date).num_days();
    let (lo, hi) = fit.x_range();
    let x = days as f64;
    Ok(Prediction {
        elapsed_days: days,
        distance: fit.eval(x),
        extrapolated: x < lo || x > hi,
    })
}

/// Band over `xs`. With no residual degrees of freedom the fit interpolates
/// its points exactly and a zero-width band is returned, flagged by the
/// second value.
pub fn band_or_exact(fit: &RateFit, xs: &[f64]) -> Result<(Vec<BandPoint>, bool)> {
    if fit.residual_dof() > 0 {
        return Ok((confidence_band(fit, xs, 0.95)?, false));
    }
    let band = xs
        .iter()
        .map(|&x| {
            let y = fit.eval(x);
            BandPoint {
                x,
                fitted: y,
                lower: y,
                upper: y,
            }
        })
        .collect();
    Ok((band, true))
}

/// `count` evenly spaced points covering the observed x range.
pub fn grid(fit: &RateFit, count: usize) -> Vec<f64> {
    let (lo, hi) = fit.x_range();
    if count < 2 || hi <= lo {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Serialized fit summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub degree: usize,
    pub coefficient_order: String,
    pub coefficients: Vec<f64>,
    pub x_unit: String,
    pub rate_per_day: f64,
    pub rate_per_year: f64,
    pub intercept: f64,
    pub rss: f64,
    pub n: usize,
    pub residual_dof: usize,
    pub reference_date: NaiveDate,
    pub residuals: Vec<f64>,
    pub band_level: f64,
    pub band_kind: String,
    pub band_at_observations: Vec<BandPoint>,
    pub band: Vec<BandPoint>,
    pub note: String,
}

impl FitDocument {
    pub fn new(fit: &RateFit, grid_points: usize) -> Result<Self> {
        let (at_obs, exact) = band_or_exact(fit, &fit.xs)?;
        let (band, _) = band_or_exact(fit, &grid(fit, grid_points))?;
        Ok(FitDocument {
            degree: fit.degree,
            coefficient_order: "ascending".into(),
            coefficients: fit.coefficients.clone(),
            x_unit: "days since reference_date".into(),
            rate_per_day: fit.rate(),
            rate_per_year: fit.rate_per_year(),
            intercept: fit.intercept(),
            rss: fit.rss,
            n: fit.n,
            residual_dof: fit.residual_dof(),
            reference_date: fit.reference_date,
            residuals: fit.residuals.clone(),
            band_level: 0.95,
            band_kind: if exact {
                "zero-width: no residual degrees of freedom".into()
            } else {
                "mean response".into()
            },
            band_at_observations: at_obs,
            band,
            note: "rate_per_year = rate_per_day * 365.25; coefficients are c0 + c1*x + ... \
                   (reverse them for descending-power conventions)"
                .into(),
        })
    }
}
