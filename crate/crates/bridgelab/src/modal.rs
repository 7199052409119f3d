//! Spectral representation of fields on `[0,1]` with pinned ends.
//!
//! A field is stored by its coefficients in the orthonormal sine basis
//! `e_n(x) = sqrt(2) sin(n pi x)`, which automatically satisfies the pinned
//! boundary conditions. The bending operator `A = d^4/dx^4` acts diagonally
//! with eigenvalues `(n pi)^4`, and `A^{1/2} = -d^2/dx^2` with `(n pi)^2`,
//! so every norm of the Sobolev scale `||u||_r = ||A^{r/4} u||` is a plain
//! weighted sum of squared coefficients.
//!
//! The only non-diagonal operation is the positive part `u+`, which is
//! handled by pointwise clamping on an oversampled composite-Simpson grid
//! followed by projection back onto the first `N` modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{BridgeError, Result};

/// A field on `[0,1]` given by coefficients `a_1..a_N` in the basis
/// `e_n(x) = sqrt(2) sin(n pi x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalField {
    order: usize,
    coeffs: Vec<f64>,
}

impl ModalField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(BridgeError::InvalidField("order must be >= 1".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(BridgeError::InvalidField(format!(
                "non-finite coefficient {bad}"
            )));
        }
        Ok(Self { order: coeffs.len(), coeffs })
    }

    pub fn zeros(order: usize) -> Self {
        Self { order, coeffs: vec![0.0; order.max(1)] }
    }

    /// The basis mode `e_n` (1-based) as a field of the given order.
    pub fn basis(order: usize, n: usize) -> Result<Self> {
        if n == 0 || n > order {
            return Err(BridgeError::InvalidField(format!(
                "basis index {n} outside 1..={order}"
            )));
        }
        let mut coeffs = vec![0.0; order];
        coeffs[n - 1] = 1.0;
        Self::new(coeffs)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Squared Sobolev-scale norm `||u||_r^2 = sum_n (n pi)^{2r} a_n^2`.
    ///
    /// `r = 0` is the `L^2` norm, `r = 1` the `H^1_0` norm (axial strain),
    /// `r = 2` the `H^2` bending norm.
    pub fn sobolev_norm_sq(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| ((i + 1) as f64 * PI).powf(2.0 * r) * a * a)
            .sum()
    }

    /// `L^2` inner product, diagonal in the orthonormal basis.
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `<A u - p A^{1/2} u, u> = sum_n ((n pi)^4 - p (n pi)^2) a_n^2`.
    ///
    /// For `p < pi^2` this is bounded below by `C(p) ||u||_2^2` with
    /// `C(p) = 1` for `p <= 0` and `1 - p/pi^2` otherwise.
    pub fn fp_pairing(&self, p: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mu = ((i + 1) as f64 * PI).powi(2);
                (mu * mu - p * mu) * a * a
            })
            .sum()
    }

    /// Pointwise values `u(x_j) = sum_n a_n sqrt(2) sin(n pi x_j)`.
    pub fn evaluate(&self, points: &[f64]) -> Result<Vec<f64>> {
        for &x in points {
            if !(0.0..=1.0).contains(&x) {
                return Err(BridgeError::PointOutsideDomain(x));
            }
        }
        Ok(points.iter().map(|&x| self.eval_at(x)).collect())
    }

    /// Single-point evaluation without the domain check.
    pub fn eval_at(&self, x: f64) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * s2 * ((i + 1) as f64 * PI * x).sin())
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            order: self.order,
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.order != other.order {
            return Err(BridgeError::OrderMismatch(self.order, other.order));
        }
        Ok(Self {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Zero-pad or truncate to a new order.
    pub fn resized(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order.max(1), 0.0);
        Self { order: order.max(1), coeffs }
    }
}

/// Uniform composite-Simpson quadrature on `[0,1]` with `M` intervals
/// (`M` even, nodes include both endpoints, weights sum to 1).
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(BridgeError::InvalidParameter(format!(
                "Simpson grid needs an even M >= 2, got {m}"
            )));
        }
        let h = 1.0 / m as f64;
        let nodes: Vec<f64> = (0..=m).map(|j| j as f64 * h).collect();
        let weights: Vec<f64> = (0..=m)
            .map(|j| {
                if j == 0 || j == m {
                    h / 3.0
                } else if j % 2 == 1 {
                    4.0 * h / 3.0
                } else {
                    2.0 * h / 3.0
                }
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Aliasing guard: a field of order `N` may only be projected on a grid
    /// with `M >= 16 N` intervals.
    pub fn check_order(&self, order: usize) -> Result<()> {
        let m = self.intervals();
        if m < 16 * order {
            return Err(BridgeError::GridTooCoarse { m, order, required: 16 * order });
        }
        Ok(())
    }

    pub fn integrate(&self, samples: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(samples)
            .map(|(w, s)| w * s)
            .sum()
    }
}

/// Cached sine-basis samples on a quadrature grid: row `n-1` holds
/// `sqrt(2) sin(n pi x_j)` for every node `x_j`.
///
/// This is the workhorse behind projection and the positive part; the time
/// integrator evaluates it once per nonlinear stage.
#[derive(Debug, Clone)]
pub struct SineTable {
    order: usize,
    grid: QuadratureGrid,
    // row-major order x nodes
    basis: Vec<f64>,
}

impl SineTable {
    pub fn new(order: usize, grid: QuadratureGrid) -> Result<Self> {
        if order == 0 {
            return Err(BridgeError::InvalidParameter("order must be >= 1".into()));
        }
        grid.check_order(order)?;
        let s2 = std::f64::consts::SQRT_2;
        let nn = grid.nodes().len();
        let mut basis = vec![0.0; order * nn];
        for n in 1..=order {
            for (j, &x) in grid.nodes().iter().enumerate() {
                basis[(n - 1) * nn + j] = s2 * (n as f64 * PI * x).sin();
            }
        }
        Ok(Self { order, grid, basis })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// Samples of the orthonormal basis mode `n` (1-based) on all nodes.
    pub fn basis_row(&self, n: usize) -> &[f64] {
        let nn = self.grid.nodes().len();
        &self.basis[(n - 1) * nn..n * nn]
    }

    /// Field values on all grid nodes.
    pub fn evaluate(&self, field: &ModalField) -> Result<Vec<f64>> {
        if field.order() > self.order {
            return Err(BridgeError::OrderMismatch(field.order(), self.order));
        }
        let nn = self.grid.nodes().len();
        let mut out = vec![0.0; nn];
        for (i, &a) in field.coeffs().iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.basis[i * nn..(i + 1) * nn];
            for (o, b) in out.iter_mut().zip(row) {
                *o += a * b;
            }
        }
        Ok(out)
    }

    /// Galerkin projection of node samples onto the first `order` modes:
    /// `c_n = quadrature of integral u(x) sqrt(2) sin(n pi x) dx`.
    pub fn project(&self, samples: &[f64]) -> Result<ModalField> {
        if samples.len() != self.grid.nodes().len() {
            return Err(BridgeError::Contract(format!(
                "expected {} samples, got {}",
                self.grid.nodes().len(),
                samples.len()
            )));
        }
        let nn = samples.len();
        let w = self.grid.weights();
        let mut coeffs = vec![0.0; self.order];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let row = &self.basis[i * nn..(i + 1) * nn];
            *c = row
                .iter()
                .zip(w)
                .zip(samples)
                .map(|((b, w), s)| b * w * s)
                .sum();
        }
        ModalField::new(coeffs)
    }

    /// Projection of a callable defined on `[0,1]`.
    pub fn project_fn(&self, f: impl Fn(f64) -> f64) -> Result<ModalField> {
        let samples: Vec<f64> = self.grid.nodes().iter().map(|&x| f(x)).collect();
        self.project(&samples)
    }

    /// Positive part: clamp `u(x_j)` at zero on the grid, then project.
    pub fn positive_part(&self, field: &ModalField) -> Result<ModalField> {
        let samples = self.evaluate(field)?;
        let clamped: Vec<f64> = samples.iter().map(|&s| s.max(0.0)).collect();
        self.project(&clamped)
    }

    /// `||u+||_{L^2}^2` from the pre-projection clamped samples.
    pub fn positive_part_norm_sq(&self, field: &ModalField) -> Result<f64> {
        let samples = self.evaluate(field)?;
        let sq: Vec<f64> = samples.iter().map(|&s| s.max(0.0).powi(2)).collect();
        Ok(self.grid.integrate(&sq))
    }
}

/// Convenience: table with the default oversampling `M = 16 N`.
pub fn default_table(order: usize) -> Result<SineTable> {
    SineTable::new(order, QuadratureGrid::new(16 * order)?)
}

/// A phase-space point `z = (u, v)`: deflection and velocity of equal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: ModalField,
    pub velocity: ModalField,
}

impl State {
    pub fn new(position: ModalField, velocity: ModalField) -> Result<Self> {
        if position.order() != velocity.order() {
            return Err(BridgeError::OrderMismatch(
                position.order(),
                velocity.order(),
            ));
        }
        Ok(Self { position, velocity })
    }

    pub fn zeros(order: usize) -> Self {
        Self {
            position: ModalField::zeros(order),
            velocity: ModalField::zeros(order),
        }
    }

    pub fn order(&self) -> usize {
        self.position.order()
    }

    /// Squared phase-space norm `||z||_H^2 = ||u||_2^2 + ||v||^2`.
    pub fn h_norm_sq(&self) -> f64 {
        self.position.sobolev_norm_sq(2.0) + self.velocity.sobolev_norm_sq(0.0)
    }

    /// Phase-space distance to another state.
    pub fn h_distance(&self, other: &Self) -> Result<f64> {
        let du = self.position.sub(&other.position)?;
        let dv = self.velocity.sub(&other.velocity)?;
        Ok((du.sobolev_norm_sq(2.0) + dv.sobolev_norm_sq(0.0)).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pi() -> f64 {
        PI
    }

    #[test]
    fn norm_of_basis_mode() {
        let e1 = ModalField::basis(4, 1).unwrap();
        assert_relative_eq!(e1.sobolev_norm_sq(0.0), 1.0, max_relative = 1e-14);
        // ||e1||_4^2 = pi^8 = lambda_1^2
        assert_relative_eq!(e1.sobolev_norm_sq(4.0), pi().powi(8), max_relative = 1e-14);
    }

    #[test]
    fn norm_two_modes_r1() {
        let u = ModalField::new(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(u.sobolev_norm_sq(1.0), 5.0 * pi() * pi(), max_relative = 1e-14);
    }

    #[test]
    fn evaluate_basis_modes() {
        let e1 = ModalField::basis(2, 1).unwrap();
        let e2 = ModalField::basis(2, 2).unwrap();
        let v = e1.evaluate(&[0.5]).unwrap();
        assert_relative_eq!(v[0], 2f64.sqrt(), max_relative = 1e-14);
        let v = e2.evaluate(&[0.5]).unwrap();
        assert!(v[0].abs() < 1e-14);
        let u = ModalField::new(vec![1.0, 0.5]).unwrap();
        let expect = 2f64.sqrt() * ((PI / 4.0).sin() + 0.5 * (PI / 2.0).sin());
        assert_relative_eq!(u.eval_at(0.25), expect, max_relative = 1e-14);
    }

    #[test]
    fn evaluate_rejects_outside_domain() {
        let e1 = ModalField::basis(2, 1).unwrap();
        assert!(matches!(
            e1.evaluate(&[1.5]),
            Err(BridgeError::PointOutsideDomain(_))
        ));
    }

    #[test]
    fn simpson_weights_sum_to_one() {
        let g = QuadratureGrid::new(64).unwrap();
        let total: f64 = g.weights().iter().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn project_round_trip_on_basis_mode() {
        let table = default_table(8).unwrap();
        let e3 = ModalField::basis(8, 3).unwrap();
        let back = table.project(&table.evaluate(&e3).unwrap()).unwrap();
        for (i, c) in back.coeffs().iter().enumerate() {
            let expect = if i == 2 { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-10, "mode {i}: {c}");
        }
    }

    #[test]
    fn project_zero_function() {
        let table = default_table(4).unwrap();
        let z = table.project_fn(|_| 0.0).unwrap();
        assert!(z.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn project_parabola_matches_analytic_sine_series() {
        // x(1-x) has sine coefficients 4 sqrt(2) (1-(-1)^n) / (n pi)^3
        // in the orthonormal basis (0 for even n).
        // quadrature is exact only on sine products; the parabola needs a
        // fine grid for the O(h^4) Simpson error to clear the tolerance
        let table = SineTable::new(8, QuadratureGrid::new(2048).unwrap()).unwrap();
        let c = table.project_fn(|x| x * (1.0 - x)).unwrap();
        for n in 1..=8usize {
            let expect = if n % 2 == 1 {
                4.0 * 2f64.sqrt() / (n as f64 * PI).powi(3)
            } else {
                0.0
            };
            assert!(
                (c.coeffs()[n - 1] - expect).abs() < 1e-12,
                "mode {n}: got {} expected {expect}",
                c.coeffs()[n - 1]
            );
        }
    }

    #[test]
    fn grid_too_coarse_is_rejected() {
        let grid = QuadratureGrid::new(32).unwrap();
        assert!(matches!(
            SineTable::new(8, grid),
            Err(BridgeError::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn positive_part_of_signed_modes() {
        let table = default_table(4).unwrap();
        let e1 = ModalField::basis(4, 1).unwrap();
        // e1 >= 0 on [0,1] so u+ = u
        let p = table.positive_part(&e1).unwrap();
        assert!((p.coeffs()[0] - 1.0).abs() < 1e-10);
        // -e1 <= 0 so u+ = 0
        let m = table.positive_part(&e1.scaled(-1.0)).unwrap();
        assert!(m.coeffs().iter().all(|c| c.abs() < 1e-10));
    }

    #[test]
    fn positive_part_of_mode_two_matches_fine_quadrature() {
        // max(sqrt(2) sin(2 pi x), 0) projected on a 64x finer grid as oracle.
        let work = default_table(4).unwrap();
        let fine = SineTable::new(4, QuadratureGrid::new(64 * 64).unwrap()).unwrap();
        let e2 = ModalField::basis(4, 2).unwrap();
        let coarse = work.positive_part(&e2).unwrap();
        let oracle = fine.positive_part(&e2).unwrap();
        // the kink at x = 1/2 limits the default grid to ~1e-6 accuracy
        for (a, b) in coarse.coeffs().iter().zip(oracle.coeffs()) {
            assert!((a - b).abs() < 5e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn fp_pairing_examples() {
        let e1 = ModalField::basis(2, 1).unwrap();
        assert_relative_eq!(e1.fp_pairing(0.0), pi().powi(4), max_relative = 1e-14);
        assert!(e1.fp_pairing(pi() * pi()).abs() < 1e-10);
        let u = ModalField::new(vec![1.0, 1.0]).unwrap();
        assert_relative_eq!(
            u.fp_pairing(pi() * pi() / 2.0),
            14.5 * pi().powi(4),
            max_relative = 1e-12
        );
    }

    fn arb_field(order: usize) -> impl Strategy<Value = ModalField> {
        prop::collection::vec(-10.0_f64..10.0, order)
            .prop_map(|c| ModalField::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn parseval_l2_matches_quadrature(u in arb_field(6)) {
            let table = default_table(6).unwrap();
            let samples = table.evaluate(&u).unwrap();
            let sq: Vec<f64> = samples.iter().map(|s| s * s).collect();
            let quad = table.grid().integrate(&sq);
            let modal = u.sobolev_norm_sq(0.0);
            prop_assert!((quad - modal).abs() <= 1e-10 * (1.0 + modal));
        }

        #[test]
        fn generalized_poincare(u in arb_field(6), r in 0_usize..3) {
            let r = r as f64;
            let lower = u.sobolev_norm_sq(r).powi(2) * PI.powi(4);
            let upper = u.sobolev_norm_sq(r + 1.0).powi(2);
            prop_assert!(lower <= upper * (1.0 + 1e-12));
        }

        #[test]
        fn poincare_equality_only_on_mode_one(a in 0.1_f64..5.0) {
            let mut c = vec![0.0; 4];
            c[0] = a;
            let u = ModalField::new(c).unwrap();
            let lower = u.sobolev_norm_sq(1.0).powi(2) * PI.powi(4);
            let upper = u.sobolev_norm_sq(2.0).powi(2);
            prop_assert!((lower - upper).abs() <= 1e-10 * upper);
        }

        #[test]
        fn positive_part_contracts_and_is_idempotent(u in arb_field(6)) {
            let table = default_table(6).unwrap();
            let samples = table.evaluate(&u).unwrap();
            let clamped: Vec<f64> = samples.iter().map(|s| s.max(0.0)).collect();
            let norm_u: f64 = table.grid().integrate(
                &samples.iter().map(|s| s * s).collect::<Vec<_>>());
            let norm_p: f64 = table.grid().integrate(
                &clamped.iter().map(|s| s * s).collect::<Vec<_>>());
            prop_assert!(norm_p <= norm_u * (1.0 + 1e-12));
            let twice: Vec<f64> = clamped.iter().map(|s| s.max(0.0)).collect();
            prop_assert_eq!(clamped, twice);
        }

        #[test]
        fn fp_pairing_lower_bound(u in arb_field(6), p in -9.8_f64..9.8) {
            let cp = if p <= 0.0 { 1.0 } else { 1.0 - p / (PI * PI) };
            let lhs = u.fp_pairing(p);
            let rhs = cp * u.sobolev_norm_sq(2.0);
            prop_assert!(lhs >= rhs - 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn project_evaluate_round_trip(u in arb_field(6)) {
            let table = default_table(6).unwrap();
            let back = table.project(&table.evaluate(&u).unwrap()).unwrap();
            for (a, b) in u.coeffs().iter().zip(back.coeffs()) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
            }
        }
    }
}
