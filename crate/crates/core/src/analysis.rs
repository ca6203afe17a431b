//! Trajectory measurement: space-time residual norms, power-law rate fits,
//! Monte Carlo aggregation with binomial confidence intervals, and a
//! coercivity check for the energy operator linearized at a given state.
//!
//! All measurements are pure functions of recorded trajectories. Time
//! integrals use the trapezoid rule on the snapshot cadence, so the cadence
//! is part of what a reported number means; refining it by 2x moves the
//! sup-in-time norms by well under a percent for smoothly varying paths.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::NoiseFamily;
use crate::profile::{double_well, potential_field, ProfileParams};
use crate::solver::{stopping_monitor, InitialData, SolverConfig, TrajectoryRecord};
use crate::spectral::{grid_integral, grid_points, kahan_sum, ModeIndex, SpectralField};

fn check_series(times: &[f64], fields: &[SpectralField]) -> Result<()> {
    if times.len() != fields.len() {
        return Err(Error::Config(format!(
            "snapshot series mismatch: {} times vs {} fields",
            times.len(),
            fields.len()
        )));
    }
    if fields.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let cutoff = fields[0].cutoff();
    for f in fields {
        if f.cutoff() != cutoff {
            return Err(Error::CutoffMismatch { left: cutoff, right: f.cutoff() });
        }
    }
    for w in times.windows(2) {
        if !(w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "snapshot times must be nondecreasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

fn check_time_integral(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::Config(format!(
            "time integrals need at least 2 snapshots, got {}",
            times.len()
        )));
    }
    Ok(())
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    kahan_sum(
        times
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])),
    )
}

/// Cubed spatial L^3 norm by midpoint quadrature on the dealiased grid.
fn cubed_l3(field: &SpectralField) -> Result<f64> {
    let grid = field.to_grid(2 * field.cutoff())?;
    Ok(grid_integral(&grid.mapv(|v| v.abs().powi(3))))
}

/// Space-time L^3 norm: cube root of the time integral of the cubed spatial
/// L^3 norm, sampled at the snapshot cadence.
pub fn l3_spacetime(times: &[f64], fields: &[SpectralField]) -> Result<f64> {
    check_series(times, fields)?;
    check_time_integral(times)?;
    let cubes = fields.iter().map(cubed_l3).collect::<Result<Vec<_>>>()?;
    Ok(trapezoid(times, &cubes).max(0.0).cbrt())
}

/// Sup over snapshots of the order -1 Sobolev norm (mean term included).
pub fn linf_hm1(times: &[f64], fields: &[SpectralField]) -> Result<f64> {
    check_series(times, fields)?;
    Ok(fields.iter().map(|f| f.sobolev_norm(-1.0)).fold(0.0, f64::max))
}

/// Time integral of the order -2 Sobolev norm at the snapshot cadence.
pub fn l1_hm2(times: &[f64], fields: &[SpectralField]) -> Result<f64> {
    check_series(times, fields)?;
    check_time_integral(times)?;
    let norms: Vec<f64> = fields.iter().map(|f| f.sobolev_norm(-2.0)).collect();
    Ok(trapezoid(times, &norms))
}

/// Header for [`write_report_csv`]; sigma and h are blank for runs where the
/// corresponding knob is inactive.
pub const REPORT_CSV_HEADER: &str =
    "run_id,eps,sigma,h,seed,L3_spacetime,Linf_Hm1,wres_L1_Hm2,stopping_triggered,mass_drift,energy_final";

/// Residual norms of one trajectory measured against the sharp-interface
/// reference, plus the bookkeeping needed to compare runs.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub run_id: String,
    pub eps: f64,
    /// Noise amplitude exponent; None for deterministic runs.
    pub sigma: Option<f64>,
    /// Mollifier width; None unless the divergence family is active.
    pub h: Option<f64>,
    pub seed: u64,
    pub l3_spacetime: f64,
    pub linf_hm1: f64,
    pub wres_l1_hm2: f64,
    pub stopping_triggered: bool,
    /// Largest deviation of the spatial mean from its initial value.
    pub mass_drift: f64,
    pub energy_final: f64,
}

impl ResidualReport {
    /// One CSV row matching [`REPORT_CSV_HEADER`]. Commas in the run id are
    /// replaced so the row always has eleven cells.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.17e}")).unwrap_or_default();
        format!(
            "{},{:.17e},{},{},{},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e}",
            self.run_id.replace(',', ";"),
            self.eps,
            opt(self.sigma),
            opt(self.h),
            self.seed,
            self.l3_spacetime,
            self.linf_hm1,
            self.wres_l1_hm2,
            self.stopping_triggered,
            self.mass_drift,
            self.energy_final,
        )
    }
}

/// Write residual reports as CSV with the schema of [`REPORT_CSV_HEADER`].
pub fn write_report_csv(path: &Path, reports: &[ResidualReport]) -> Result<()> {
    let mut text = String::with_capacity(128 * (reports.len() + 1));
    text.push_str(REPORT_CSV_HEADER);
    text.push('\n');
    for r in reports {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Measure a trajectory against the sharp-interface reference: the residual
/// is u minus the recorded initial transition profile, and the potential
/// residual is w minus the constant reference potential of the initial
/// geometry. The stopping monitor is evaluated at threshold eps^gamma.
///
/// Requires a transition-profile initial configuration so the geometry (and
/// hence the reference potential) is known.
pub fn residual_report(
    run_id: &str,
    record: &TrajectoryRecord,
    cfg: &SolverConfig,
    gamma: f64,
) -> Result<ResidualReport> {
    let geom = match &cfg.initial {
        InitialData::Profile(geom) => geom,
        _ => {
            return Err(Error::Config(
                "residual reports need a transition-profile initial datum".into(),
            ))
        }
    };
    if record.u_snapshots.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let params = ProfileParams::new(cfg.eps, cfg.lambda_formula);
    let w_a = potential_field(geom, &params, cfg.cutoff)?;
    let u_a = &record.u_snapshots[0];
    let r_series = record
        .u_snapshots
        .iter()
        .map(|u| u.axpy(-1.0, u_a))
        .collect::<Result<Vec<_>>>()?;
    let wres_series = record
        .w_snapshots
        .iter()
        .map(|w| w.axpy(-1.0, &w_a))
        .collect::<Result<Vec<_>>>()?;
    let (stopping_triggered, _) = stopping_monitor(record, gamma, cfg.eps);
    let mass0 = record.mass_series.first().copied().unwrap_or(0.0);
    let mass_drift = record
        .mass_series
        .iter()
        .map(|m| (m - mass0).abs())
        .fold(0.0, f64::max);
    let (sigma, h) = match &cfg.noise {
        Some(spec) => (
            Some(spec.sigma),
            matches!(spec.family, NoiseFamily::Divergence).then_some(spec.h),
        ),
        None => (None, None),
    };
    Ok(ResidualReport {
        run_id: run_id.to_owned(),
        eps: cfg.eps,
        sigma,
        h,
        seed: cfg.seed,
        l3_spacetime: l3_spacetime(&record.times, &r_series)?,
        linf_hm1: linf_hm1(&record.times, &r_series)?,
        wres_l1_hm2: l1_hm2(&record.times, &wres_series)?,
        stopping_triggered,
        mass_drift,
        energy_final: record.energy_series.last().copied().unwrap_or(f64::NAN),
    })
}

/// Minimal generalized Rayleigh quotient of the linearized energy operator
/// around `u_a` over the mean-zero test space spanned by modes with both
/// components at most `n_test`:
///
///   min_w [ eps |w|_1^2 + (1/eps) <f'(u_a) w, w> ] / |w|_{-1}^2
///
/// where |.|_a are the order-a Sobolev seminorms (the test space excludes
/// the constant mode, so the mean terms vanish). The quotient is bounded
/// below uniformly in eps for well-prepared transition profiles, which is
/// what the acceptance sweep checks.
///
/// Assembly: with A = diag(eps lambda) + G / eps, G_ij = integral of
/// f'(u_a) e_i e_j, and B = diag(1/lambda), the substitution c = B^{1/2} y
/// turns the pencil (A, B) into the ordinary symmetric matrix
/// C = diag(sqrt lambda) A diag(sqrt lambda). The Gram matrix G factors over
/// coordinates: products of 1D basis factors are tabulated once, so the cost
/// is O(P M^2 + P^2 M) for P = (n_test+1)^2 pair rows on the M-point grid
/// rather than O(P^2 M^2).
pub fn spectral_estimate_check(u_a: &SpectralField, eps: f64, n_test: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::NonPositive { what: "eps", value: eps });
    }
    if n_test == 0 {
        return Err(Error::ZeroCutoff);
    }
    if n_test > u_a.cutoff() {
        return Err(Error::CutoffMismatch { left: n_test, right: u_a.cutoff() });
    }
    let m = 2 * u_a.cutoff();
    let fprime = u_a.to_grid(m)?.mapv(|u| double_well(u).2);

    // 1D basis factors on the midpoint grid: phi_0 = 1, phi_p = sqrt(2) cos(pi p x).
    let pts = grid_points(m);
    let n1 = n_test + 1;
    let mut phi = vec![vec![0.0f64; m]; n1];
    for (p, row) in phi.iter_mut().enumerate() {
        for (a, x) in pts.iter().enumerate() {
            row[a] = if p == 0 { 1.0 } else { SQRT_2 * (PI * p as f64 * x).cos() };
        }
    }

    // Pair table: row (p, q) holds phi_p phi_q sampled along one coordinate.
    let pairs = n1 * n1;
    let mut pair_tab = DMatrix::<f64>::zeros(pairs, m);
    for p in 0..n1 {
        for q in 0..n1 {
            for a in 0..m {
                pair_tab[(p * n1 + q, a)] = phi[p][a] * phi[q][a];
            }
        }
    }

    // g2[(i1,j1),(i2,j2)] = sum_{a,b} phi_{i1}phi_{j1}(x_a) f'(x_a,x_b) phi_{i2}phi_{j2}(x_b) / m^2.
    let f_mat = DMatrix::from_fn(m, m, |a, b| fprime[[a, b]]);
    let g2 = (&pair_tab * f_mat * pair_tab.transpose()) / (m * m) as f64;

    let mut modes = Vec::with_capacity(pairs - 1);
    for k1 in 0..n1 {
        for k2 in 0..n1 {
            if k1 + k2 > 0 {
                modes.push(ModeIndex::new(k1, k2));
            }
        }
    }
    let dim = modes.len();
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for (i, ki) in modes.iter().enumerate() {
        let li = ki.eigenvalue();
        for (j, kj) in modes.iter().enumerate() {
            let g = g2[(ki.k1 * n1 + kj.k1, ki.k2 * n1 + kj.k2)];
            let mut a = g / eps;
            if i == j {
                a += eps * li;
            }
            c[(i, j)] = a * (li * kj.eigenvalue()).sqrt();
        }
    }
    // The assembly is symmetric up to summation order; average away roundoff
    // so the symmetric eigensolver sees one consistent triangle.
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Power-law fit of positive data via ordinary least squares on
/// (ln x, ln y).
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Fit y = exp(intercept) * x^slope through at least three positive points.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Config(format!(
            "rate fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x > 0.0) {
            return Err(Error::NonPositive { what: "rate-fit abscissa", value: x });
        }
        if !(y > 0.0) {
            return Err(Error::NonPositive { what: "rate-fit ordinate", value: y });
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = kahan_sum(logs.iter().map(|p| p.0)) / n;
    let my = kahan_sum(logs.iter().map(|p| p.1)) / n;
    let sxx = kahan_sum(logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)));
    let sxy = kahan_sum(logs.iter().map(|p| (p.0 - mx) * (p.1 - my)));
    let syy = kahan_sum(logs.iter().map(|p| (p.1 - my) * (p.1 - my)));
    if sxx == 0.0 {
        return Err(Error::Config(
            "rate fit needs at least two distinct abscissas".into(),
        ));
    }
    let slope = sxy / sxx;
    // A constant ordinate is fit perfectly by the zero slope.
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r2 })
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy)]
pub struct WilsonInterval {
    pub low: f64,
    pub high: f64,
}

/// Wilson score interval for `successes` out of `trials` at normal quantile
/// `z`. Zero trials carry no information and yield the full unit interval.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        low: (center - half).max(0.0),
        high: (center + half).min(1.0),
    }
}

/// How often the measurement exceeded the configured threshold.
#[derive(Debug, Clone, Copy)]
pub struct ExceedanceStats {
    pub threshold: f64,
    /// Completed measurements strictly above the threshold.
    pub count: usize,
    pub frequency: f64,
    /// 95% Wilson interval for the exceedance probability.
    pub interval: WilsonInterval,
}

/// Aggregate of a Monte Carlo batch.
#[derive(Debug, Clone)]
pub struct McOutcome {
    /// Replicas whose measurement completed.
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when fewer than two measurements landed.
    pub std: f64,
    pub std_is_defined: bool,
    /// (replica id, error message) for every replica that failed, blow-ups
    /// included; failures are recorded, never silently dropped.
    pub failures: Vec<(u64, String)>,
    pub exceedance: Option<ExceedanceStats>,
}

/// Standard normal quantile for the 95% Wilson intervals reported by
/// [`monte_carlo`].
const WILSON_Z: f64 = 1.959963984540054;

/// Run `measure` over replica ids 0..n_replicas in parallel and aggregate in
/// replica order. The measurement owns the seed policy: key any randomness on
/// the replica id (the noise streams take seed, replica, and step), so the
/// batch is reproducible and independent of the thread schedule.
pub fn monte_carlo<F>(n_replicas: u64, threshold: Option<f64>, measure: F) -> McOutcome
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    // Indexed parallel collect preserves replica order, and the fold below is
    // sequential, so aggregates are bit-identical for any thread count.
    let raw: Vec<(u64, std::result::Result<f64, String>)> = (0..n_replicas)
        .into_par_iter()
        .map(|r| (r, measure(r).map_err(|e| e.to_string())))
        .collect();
    let mut values = Vec::with_capacity(raw.len());
    let mut failures = Vec::new();
    for (r, res) in raw {
        match res {
            Ok(v) => values.push(v),
            Err(msg) => failures.push((r, msg)),
        }
    }
    let count = values.len();
    let mean = if count == 0 {
        f64::NAN
    } else {
        kahan_sum(values.iter().copied()) / count as f64
    };
    let std_is_defined = count >= 2;
    let std = if std_is_defined {
        let ss = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    let exceedance = threshold.map(|thr| {
        let k = values.iter().filter(|&&v| v > thr).count();
        ExceedanceStats {
            threshold: thr,
            count: k,
            frequency: if count == 0 { 0.0 } else { k as f64 / count as f64 },
            interval: wilson_interval(k, count, WILSON_Z),
        }
    });
    McOutcome { count, mean, std, std_is_defined, failures, exceedance }
}

/// Parameter axis of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Eps,
    Sigma,
    H,
    /// Per-mode sweeps indexed by the Laplacian eigenvalue of each mode.
    Lambda,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Eps => "eps",
            SweepAxis::Sigma => "sigma",
            SweepAxis::H => "h",
            SweepAxis::Lambda => "lambda",
        }
    }
}

/// One aggregated point of a parameter sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl SweepPoint {
    pub fn from_outcome(value: f64, outcome: &McOutcome) -> Self {
        Self {
            value,
            mean: outcome.mean,
            std: outcome.std,
            count: outcome.count,
        }
    }
}

/// A parameter sweep with an optional log-log slope fit over (value, mean).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    pub fitted_slope: f64,
    pub fit_r2: f64,
}

/// Header for [`SweepResult::write_csv`]; slope and r2 repeat on every row.
pub const SWEEP_CSV_HEADER: &str = "axis,value,mean,std,count,slope,r2";

impl SweepResult {
    fn check_points(points: &[SweepPoint]) -> Result<()> {
        if points.is_empty() {
            return Err(Error::Config("sweep needs at least one point".into()));
        }
        for p in points {
            if p.count == 0 {
                return Err(Error::Config(format!(
                    "sweep point at value {} has no completed replicas",
                    p.value
                )));
            }
        }
        Ok(())
    }

    /// Sweep with a power-law fit; needs at least three points with positive
    /// values and means.
    pub fn fit(axis: SweepAxis, points: Vec<SweepPoint>) -> Result<Self> {
        Self::check_points(&points)?;
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.value, p.mean)).collect();
        let fit = rate_fit(&xy)?;
        Ok(Self { axis, points, fitted_slope: fit.slope, fit_r2: fit.r2 })
    }

    /// Sweep without a power-law fit, for signed or non-monotone
    /// measurements; slope and r2 are recorded as NaN.
    pub fn without_fit(axis: SweepAxis, points: Vec<SweepPoint>) -> Result<Self> {
        Self::check_points(&points)?;
        Ok(Self {
            axis,
            points,
            fitted_slope: f64::NAN,
            fit_r2: f64::NAN,
        })
    }

    /// Write the sweep as CSV with the schema of [`SWEEP_CSV_HEADER`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        text.push_str(SWEEP_CSV_HEADER);
        text.push('\n');
        for p in &self.points {
            let _ = writeln!(
                text,
                "{},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e}",
                self.axis.label(),
                p.value,
                p.mean,
                p.std,
                p.count,
                self.fitted_slope,
                self.fit_r2
            );
        }
        fs::write(path, text)?;
        Ok(())
    }

    /// Emit a gnuplot script next to the CSV (same stem, .plt extension).
    /// Log-log axes are used only when every point supports them.
    pub fn write_plot_script(&self, csv_path: &Path) -> Result<()> {
        let csv_name = csv_path
            .file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("sweep.csv");
        let stem = csv_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("sweep");
        let mut s = String::new();
        let _ = writeln!(s, "# Render with: gnuplot {stem}.plt");
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set terminal pngcairo size 900,600");
        let _ = writeln!(s, "set output '{stem}.png'");
        let _ = writeln!(s, "set xlabel '{}'", self.axis.label());
        let _ = writeln!(s, "set ylabel 'mean'");
        let _ = writeln!(s, "set grid");
        if self.points.iter().all(|p| p.value > 0.0 && p.mean > 0.0) {
            let _ = writeln!(s, "set logscale xy");
        }
        let title = if self.fitted_slope.is_finite() {
            format!(
                "mean +/- std (slope {:.3}, r2 {:.3})",
                self.fitted_slope, self.fit_r2
            )
        } else {
            "mean +/- std".to_string()
        };
        let _ = writeln!(
            s,
            "plot '{csv_name}' every ::1 using 2:3:4 with yerrorlines pointtype 7 title '{title}'"
        );
        fs::write(csv_path.with_extension("plt"), s)?;
        Ok(())
    }
}
