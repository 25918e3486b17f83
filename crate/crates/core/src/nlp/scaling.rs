//! Diagonal variable scaling `x = S x̃`.

use super::NlpProblem;

/// View of a problem in scaled variables `x̃ = x / s`.
pub struct Scaled<'a, P: NlpProblem + ?Sized> {
    inner: &'a P,
    scale: Vec<f64>,
    hess: Vec<(usize, usize)>,
    jac: Vec<(usize, usize)>,
}

impl<'a, P: NlpProblem + ?Sized> Scaled<'a, P> {
    /// `s_i = max(1, |guess_i|)`.
    pub fn from_guess(inner: &'a P, guess: &[f64]) -> Self {
        Self::new(inner, guess.iter().map(|g| g.abs().max(1.0)).collect())
    }

    pub fn new(inner: &'a P, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), inner.num_variables());
        assert!(scale.iter().all(|s| *s > 0.0 && s.is_finite()));
        Self { hess: inner.hessian_structure(), jac: inner.jacobian_structure(), inner, scale }
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(x, s)| x / s).collect()
    }

    pub fn to_unscaled(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().zip(&self.scale).map(|(x, s)| x * s).collect()
    }

    /// Bound multipliers transform with the inverse scale.
    pub fn multipliers_to_unscaled(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(z, s)| z / s).collect()
    }

    pub fn multipliers_to_scaled(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.scale).map(|(z, s)| z * s).collect()
    }
}

impl<P: NlpProblem + ?Sized> NlpProblem for Scaled<'_, P> {
    fn num_variables(&self) -> usize {
        self.inner.num_variables()
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self.inner.bounds();
        (self.to_scaled(&lo), self.to_scaled(&hi))
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.inner.objective(&self.to_unscaled(x))
    }
    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.inner.gradient(&self.to_unscaled(x), grad);
        for (g, s) in grad.iter_mut().zip(&self.scale) {
            *g *= s;
        }
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) {
        self.inner.constraints(&self.to_unscaled(x), c);
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac.clone()
    }
    fn jacobian_values(&self, x: &[f64], values: &mut [f64]) {
        self.inner.jacobian_values(&self.to_unscaled(x), values);
        for (v, &(_, c)) in values.iter_mut().zip(&self.jac) {
            *v *= self.scale[c];
        }
    }
    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess.clone()
    }
    fn hessian_values(&self, x: &[f64], obj_factor: f64, y: &[f64], values: &mut [f64]) {
        self.inner.hessian_values(&self.to_unscaled(x), obj_factor, y, values);
        for (v, &(r, c)) in values.iter_mut().zip(&self.hess) {
            *v *= self.scale[r] * self.scale[c];
        }
    }
}
