//! Sharp-interface reference data: transition-layer profiles, interface
//! geometries, the limiting free-boundary chemical potential, and the
//! double-well potential driving the dynamics.
//!
//! The approximate solution built here is the leading-order matched
//! asymptotic: u_A(x) = theta(d(x) / eps) with theta(z) = tanh(z / sqrt(2)),
//! the standing wave of the bistable nonlinearity (theta'' = f(theta)
//! exactly). Higher-order correctors are out of scope; consumers should
//! compare residual trends across eps rather than absolute magnitudes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::spectral::{grid_points, SpectralField};

/// Coordinate whose offset from a reference position measures signed distance
/// for a flat interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripAxis {
    X1,
    X2,
}

/// Interface geometry on the unit square. Signed distance is positive outside
/// a circle and on the upper side (larger coordinate) of a flat strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterfaceGeometry {
    Circle { center: [f64; 2], radius: f64 },
    FlatStrip { position: f64, normal_axis: StripAxis },
}

impl InterfaceGeometry {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Self::Circle { center, radius }
    }

    pub fn strip(position: f64) -> Self {
        Self::FlatStrip { position, normal_axis: StripAxis::X1 }
    }

    /// Signed distance from x to the interface, positive outside the circle or
    /// above the strip position.
    pub fn signed_distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            Self::Circle { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                (dx * dx + dy * dy).sqrt() - radius
            }
            Self::FlatStrip { position, normal_axis } => match normal_axis {
                StripAxis::X1 => x[0] - position,
                StripAxis::X2 => x[1] - position,
            },
        }
    }

    /// Mean curvature of the interface; convex closed curves are positive.
    pub fn curvature(&self) -> f64 {
        match *self {
            Self::Circle { radius, .. } => 1.0 / radius,
            Self::FlatStrip { .. } => 0.0,
        }
    }

    /// Distance from the interface to the domain boundary.
    pub fn boundary_clearance(&self) -> f64 {
        match *self {
            Self::Circle { center, radius } => {
                let reach = center
                    .iter()
                    .map(|&c| c.min(1.0 - c))
                    .fold(f64::INFINITY, f64::min);
                reach - radius
            }
            Self::FlatStrip { position, .. } => position.min(1.0 - position),
        }
    }

    /// The transition layer must sit well inside the domain: clearance of at
    /// least four interaction lengths, and positive radius for circles.
    pub fn validate_clearance(&self, eps: f64) -> Result<()> {
        if let Self::Circle { radius, .. } = self {
            if !(*radius > 0.0) {
                return Err(Error::NonPositive { what: "radius", value: *radius });
            }
        }
        let clearance = self.boundary_clearance();
        let required = 4.0 * eps;
        if !(clearance >= required) {
            return Err(Error::ClearanceViolation { clearance, required });
        }
        Ok(())
    }
}

/// Double-well potential and its derivatives at u:
/// returns (F, f, f', f'') with F(u) = (u^2 - 1)^2 / 4 and f = F'.
pub fn double_well(u: f64) -> (f64, f64, f64, f64) {
    let s = u * u - 1.0;
    (0.25 * s * s, u * s, 3.0 * u * u - 1.0, 6.0 * u)
}

/// Choice of surface-tension constant entering the limiting chemical
/// potential v = lambda H. The three integrals over [-1, 1] disagree; all are
/// exposed so experiments can state which datum they compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaFormula {
    /// lambda = (1 / sqrt(2)) int F(s) ds = 2 sqrt(2) / 15.
    PotentialIntegral,
    /// lambda = int sqrt(2 F(s)) ds = 2 sqrt(2) / 3, the full interfacial
    /// energy of the standing wave.
    Classical,
    /// lambda = int sqrt(F(s) / 2) ds = sqrt(2) / 3, half the interfacial
    /// energy; the solvability condition for the layer pins the relaxed
    /// chemical potential on the interface at -lambda H with this constant.
    GibbsThomson,
}

impl LambdaFormula {
    /// Evaluate the constant by Simpson quadrature of its defining integral.
    pub fn value(&self) -> f64 {
        let integrand: fn(f64) -> f64 = match self {
            Self::PotentialIntegral => |s| double_well(s).0 / std::f64::consts::SQRT_2,
            Self::Classical => |s| (2.0 * double_well(s).0).sqrt(),
            Self::GibbsThomson => |s| (double_well(s).0 / 2.0).sqrt(),
        };
        simpson(integrand, -1.0, 1.0, 4000)
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0, "Simpson rule needs an even panel count");
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Interaction length and surface-tension constant for profile construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub eps: f64,
    pub lambda_const: f64,
}

impl ProfileParams {
    pub fn new(eps: f64, formula: LambdaFormula) -> Self {
        Self { eps, lambda_const: formula.value() }
    }
}

/// The standing-wave shape: theta(z) = tanh(z / sqrt(2)).
pub fn standing_wave(z: f64) -> f64 {
    (z / std::f64::consts::SQRT_2).tanh()
}

/// Leading-order transition profile u_A = theta(d(x) / eps), sampled on the
/// dealiased midpoint grid (twice the cutoff) and projected to coefficients.
pub fn profile_field(
    geom: &InterfaceGeometry,
    params: &ProfileParams,
    cutoff: usize,
) -> Result<SpectralField> {
    geom.validate_clearance(params.eps)?;
    let m = 2 * cutoff;
    let pts = grid_points(m);
    let grid = Array2::from_shape_fn((m, m), |(i, j)| {
        standing_wave(geom.signed_distance([pts[i], pts[j]]) / params.eps)
    });
    SpectralField::from_grid(&grid, cutoff)
}

/// Reference chemical potential of the limiting free-boundary problem: the
/// constant lambda H. For a circle the constant function lambda / R is
/// harmonic on both sides, satisfies the zero-flux outer condition, and has
/// zero normal-derivative jump, so the circle is stationary; for a strip the
/// curvature vanishes.
pub fn potential_field(
    geom: &InterfaceGeometry,
    params: &ProfileParams,
    cutoff: usize,
) -> Result<SpectralField> {
    geom.validate_clearance(params.eps)?;
    Ok(SpectralField::constant(cutoff, params.lambda_const * geom.curvature()))
}

/// Chemical-potential value selected on the interface by the layer's
/// solvability condition: -(sigma / 2) H with sigma the interfacial energy
/// of the standing wave, i.e. -lambda_gt H with the GibbsThomson constant.
/// With the -1 phase inside a circle this is negative: the relaxed potential
/// of a droplet sits below the far-field value.
pub fn gibbs_thomson_potential(geom: &InterfaceGeometry) -> f64 {
    -LambdaFormula::GibbsThomson.value() * geom.curvature()
}

/// Pure-phase indicator of the limit: +1 outside (d >= 0), -1 inside. The tie
/// at d = 0 is measure zero and resolved to +1.
pub fn limit_indicator(geom: &InterfaceGeometry, m: usize) -> Array2<f64> {
    let pts = grid_points(m);
    Array2::from_shape_fn((m, m), |(i, j)| {
        if geom.signed_distance([pts[i], pts[j]]) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Exact stationary data of the free-boundary problem for a circle: the
/// constant potential lambda / R and zero normal velocity.
pub fn hele_shaw_circle_check(
    geom: &InterfaceGeometry,
    lambda: f64,
) -> Result<(f64, f64)> {
    match geom {
        InterfaceGeometry::Circle { radius, .. } => Ok((lambda / radius, 0.0)),
        InterfaceGeometry::FlatStrip { .. } => Err(Error::NotACircle),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{grid_sup, ModeIndex};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn signed_distance_circle_cases() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        assert_eq!(geom.signed_distance([0.5, 0.5]), -0.25);
        assert_eq!(geom.signed_distance([0.75, 0.5]), 0.0);
        assert_eq!(geom.signed_distance([1.0, 0.5]), 0.25);
    }

    #[test]
    fn signed_distance_strip_cases() {
        let geom = InterfaceGeometry::strip(0.5);
        assert_eq!(geom.signed_distance([0.7, 0.1]), 0.7 - 0.5);
        let along_x2 =
            InterfaceGeometry::FlatStrip { position: 0.25, normal_axis: StripAxis::X2 };
        assert_eq!(along_x2.signed_distance([0.9, 0.1]), 0.1 - 0.25);
    }

    #[test]
    fn double_well_cases() {
        for u in [-1.0, 1.0] {
            let (big_f, f, _, _) = double_well(u);
            assert_eq!(big_f, 0.0);
            assert_eq!(f, 0.0);
        }
        let (big_f, f, fp, _) = double_well(0.0);
        assert_eq!(big_f, 0.25);
        assert_eq!(f, 0.0);
        assert_eq!(fp, -1.0);
        let (big_f, f, _, fpp) = double_well(2.0);
        assert_eq!(big_f, 2.25);
        assert_eq!(f, 6.0);
        assert_eq!(fpp, 12.0);
    }

    #[test]
    fn lambda_formulas_match_closed_forms() {
        assert_relative_eq!(
            LambdaFormula::PotentialIntegral.value(),
            2.0 * SQRT_2 / 15.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            LambdaFormula::Classical.value(),
            2.0 * SQRT_2 / 3.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            LambdaFormula::GibbsThomson.value(),
            SQRT_2 / 3.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn clearance_validation() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        assert!(geom.validate_clearance(0.04).is_ok());
        assert!(matches!(
            geom.validate_clearance(0.08),
            Err(Error::ClearanceViolation { .. })
        ));
        let tight = InterfaceGeometry::circle([0.5, 0.5], 0.15);
        assert!(tight.validate_clearance(0.08).is_ok());
    }

    #[test]
    fn profile_solves_standing_wave_equation_on_strip() {
        // -eps u'' + f(u) / eps vanishes identically for the exact profile;
        // what remains is spectral truncation plus the boundary tanh tail.
        let eps = 0.02;
        let cutoff = 256;
        let geom = InterfaceGeometry::strip(0.5);
        let params = ProfileParams::new(eps, LambdaFormula::PotentialIntegral);
        let u_a = profile_field(&geom, &params, cutoff).unwrap();
        let lap = u_a.frac_laplacian(1.0);
        let m = 2 * cutoff;
        let u_grid = u_a.to_grid(m).unwrap();
        let lap_grid = lap.to_grid(m).unwrap();
        // frac_laplacian applies the positive operator -Laplace
        let mut residual: f64 = 0.0;
        for (u, minus_lap) in u_grid.iter().zip(lap_grid.iter()) {
            let (_, f, _, _) = double_well(*u);
            residual = residual.max((eps * minus_lap + f / eps).abs());
        }
        assert!(residual <= 1e-6, "standing-wave residual {residual:.3e}");
    }

    #[test]
    fn profile_is_odd_across_a_centered_strip() {
        let geom = InterfaceGeometry::strip(0.5);
        let params = ProfileParams::new(0.02, LambdaFormula::PotentialIntegral);
        let u_a = profile_field(&geom, &params, 128).unwrap();
        for s in [0.01, 0.05, 0.2] {
            let plus = u_a.eval([0.5 + s, 0.3]);
            let minus = u_a.eval([0.5 - s, 0.3]);
            assert_relative_eq!(plus, -minus, max_relative = 1e-9, epsilon = 1e-12);
        }
        assert!(u_a.eval([0.5, 0.7]).abs() < 1e-9);
    }

    #[test]
    fn profile_stays_in_the_well_range() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let params = ProfileParams::new(0.02, LambdaFormula::PotentialIntegral);
        let u_a = profile_field(&geom, &params, 128).unwrap();
        let grid = u_a.to_grid(256).unwrap();
        assert!(grid_sup(&grid) <= 1.0 + 1e-6);
    }

    #[test]
    fn transition_band_area_scales_linearly_in_eps() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let mut areas = Vec::new();
        for eps in [0.04, 0.02, 0.01] {
            let params = ProfileParams::new(eps, LambdaFormula::PotentialIntegral);
            let grid = profile_field(&geom, &params, 256).unwrap().to_grid(512).unwrap();
            let cells = grid.iter().filter(|v| v.abs() < 0.9).count();
            areas.push(cells as f64 / (512.0 * 512.0));
        }
        for pair in areas.windows(2) {
            let ratio = pair[1] / pair[0];
            assert!(
                (0.4..=0.6).contains(&ratio),
                "area ratio {ratio} outside [0.4, 0.6], areas {areas:?}"
            );
        }
    }

    #[test]
    fn circle_profile_mean_matches_phase_areas() {
        let radius = 0.25;
        let geom = InterfaceGeometry::circle([0.5, 0.5], radius);
        let eps = 0.02;
        let params = ProfileParams::new(eps, LambdaFormula::PotentialIntegral);
        let u_a = profile_field(&geom, &params, 128).unwrap();
        let expect = 1.0 - 2.0 * std::f64::consts::PI * radius * radius;
        assert!((u_a.mean() - expect).abs() <= 5.0 * eps);
    }

    #[test]
    fn potential_field_is_the_constant_curvature_datum() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let params = ProfileParams::new(0.02, LambdaFormula::PotentialIntegral);
        let w_a = potential_field(&geom, &params, 64).unwrap();
        assert_relative_eq!(w_a.mean(), 0.7542472332656507, max_relative = 1e-12);
        assert_eq!(w_a.coeff(ModeIndex::new(1, 0)), 0.0);

        let strip = InterfaceGeometry::strip(0.5);
        let w_strip = potential_field(&strip, &params, 64).unwrap();
        assert_eq!(w_strip.mean(), 0.0);
    }

    #[test]
    fn gibbs_thomson_datum_is_negative_for_droplets() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        assert_relative_eq!(
            gibbs_thomson_potential(&geom),
            -SQRT_2 / 3.0 / 0.25,
            max_relative = 1e-12
        );
        assert_eq!(gibbs_thomson_potential(&InterfaceGeometry::strip(0.5)), 0.0);
    }

    #[test]
    fn limit_indicator_cases() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let ind = limit_indicator(&geom, 64);
        // center cell is inside, corner cell far outside
        assert_eq!(ind[[31, 31]], -1.0);
        assert_eq!(ind[[0, 0]], 1.0);
        assert!(ind.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn indicator_profile_distance_shrinks_with_eps() {
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let m = 512;
        let ind = limit_indicator(&geom, m);
        let mut dists = Vec::new();
        for eps in [0.04, 0.02] {
            let params = ProfileParams::new(eps, LambdaFormula::PotentialIntegral);
            let grid = profile_field(&geom, &params, 256).unwrap().to_grid(m).unwrap();
            let cubed: f64 = grid
                .iter()
                .zip(ind.iter())
                .map(|(u, i)| (u - i).abs().powi(3))
                .sum::<f64>()
                / (m * m) as f64;
            dists.push(cubed.cbrt());
        }
        assert!(dists[1] < dists[0]);
    }

    #[test]
    fn hele_shaw_circle_data() {
        let lambda = LambdaFormula::PotentialIntegral.value();
        let geom = InterfaceGeometry::circle([0.5, 0.5], 0.25);
        let (v, speed) = hele_shaw_circle_check(&geom, lambda).unwrap();
        assert_relative_eq!(v, 4.0 * lambda, max_relative = 1e-14);
        assert_eq!(speed, 0.0);

        let (v_half, _) =
            hele_shaw_circle_check(&InterfaceGeometry::circle([0.5, 0.5], 0.5), lambda).unwrap();
        assert_relative_eq!(v_half, 2.0 * lambda, max_relative = 1e-14);

        assert!(matches!(
            hele_shaw_circle_check(&InterfaceGeometry::strip(0.5), lambda),
            Err(Error::NotACircle)
        ));
    }

    proptest! {
        #[test]
        fn well_values_are_consistent_derivatives(u in -3.0f64..3.0) {
            let h = 1e-6;
            let (big_f, f, fp, fpp) = double_well(u);
            prop_assert!(big_f >= 0.0);
            let df = (double_well(u + h).0 - double_well(u - h).0) / (2.0 * h);
            prop_assert!((df - f).abs() < 1e-4 * (1.0 + f.abs()));
            let dfp = (double_well(u + h).1 - double_well(u - h).1) / (2.0 * h);
            prop_assert!((dfp - fp).abs() < 1e-4 * (1.0 + fp.abs()));
            let dfpp = (double_well(u + h).2 - double_well(u - h).2) / (2.0 * h);
            prop_assert!((dfpp - fpp).abs() < 1e-4 * (1.0 + fpp.abs()));
        }

        #[test]
        fn odd_symmetry_of_the_force(u in -3.0f64..3.0) {
            let (_, f, _, _) = double_well(u);
            let (_, f_neg, _, _) = double_well(-u);
            prop_assert_eq!(f, -f_neg);
        }

        #[test]
        fn circle_distance_is_radially_exact(
            r in 0.01f64..0.4,
            angle in 0.0f64..std::f64::consts::TAU,
            radius in 0.05f64..0.3,
        ) {
            let geom = InterfaceGeometry::circle([0.5, 0.5], radius);
            let x = [0.5 + r * angle.cos(), 0.5 + r * angle.sin()];
            let d = geom.signed_distance(x);
            prop_assert!((d - (r - radius)).abs() < 1e-12);
        }
    }
}
