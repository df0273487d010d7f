use std::sync::Arc;

use super::profile::Profile;
use super::tensor::unflatten;
use super::SmoothMap;
use crate::error::{Error, Result};

/// Derivative order declared by the closed-form families. Higher orders are
/// available analytically but nothing in the crate asks for more.
pub const CLOSED_FORM_ORDER: usize = 6;

/// `h(t, x) = c`.
#[derive(Debug, Clone)]
pub struct Constant {
    input_dim: usize,
    value: Vec<f64>,
}

impl Constant {
    pub fn new(input_dim: usize, value: Vec<f64>) -> Self {
        assert!(input_dim > 0 && !value.is_empty(), "constant map needs positive dimensions");
        Self { input_dim, value }
    }

    pub fn zero(input_dim: usize, output_dim: usize) -> Self {
        Self::new(input_dim, vec![0.0; output_dim])
    }

    /// `scale · I_d` flattened row-major, as a `d → d²` map.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim * dim];
        for i in 0..dim {
            v[i * dim + i] = scale;
        }
        Self::new(dim, v)
    }
}

impl SmoothMap for Constant {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.value.len()
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "constant".into()
    }
    fn derivative_into(&self, _t: f64, _x: &[f64], order: usize, out: &mut [f64]) {
        if order == 0 {
            out.copy_from_slice(&self.value);
        } else {
            out.fill(0.0);
        }
    }
}

/// `h(x) = A x + b` with `A` an `o × d` matrix stored row-major.
#[derive(Debug, Clone)]
pub struct Affine {
    input_dim: usize,
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl Affine {
    pub fn new(matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let o = offset.len();
        if o == 0 || matrix.is_empty() || !matrix.len().is_multiple_of(o) {
            return Err(Error::DimensionMismatch(format!(
                "affine map: {} matrix entries do not form {o} rows",
                matrix.len()
            )));
        }
        Ok(Self { input_dim: matrix.len() / o, matrix, offset })
    }

    /// `h(x) = s · x` on ℝ^d.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = scale;
        }
        Self { input_dim: dim, matrix: m, offset: vec![0.0; dim] }
    }

    /// Scalar linear functional `x ↦ aᵀx + b`.
    pub fn linear_functional(a: Vec<f64>, b: f64) -> Self {
        Self { input_dim: a.len(), matrix: a, offset: vec![b] }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }
}

impl SmoothMap for Affine {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.offset.len()
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "affine".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.input_dim;
        let o = self.offset.len();
        match order {
            0 => {
                for k in 0..o {
                    let row = &self.matrix[k * d..(k + 1) * d];
                    out[k] = self.offset[k] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            1 => {
                for j in 0..d {
                    for k in 0..o {
                        out[j * o + k] = self.matrix[k * d + j];
                    }
                }
            }
            _ => out.fill(0.0),
        }
    }
}

/// `h(x) = s ‖x‖²`.
#[derive(Debug, Clone)]
pub struct SquaredNorm {
    dim: usize,
    scale: f64,
}

impl SquaredNorm {
    pub fn new(dim: usize, scale: f64) -> Self {
        Self { dim, scale }
    }
}

impl SmoothMap for SquaredNorm {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "squared norm".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        match order {
            0 => out[0] = self.scale * x.iter().map(|v| v * v).sum::<f64>(),
            1 => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = 2.0 * self.scale * v;
                }
            }
            2 => {
                out.fill(0.0);
                for i in 0..self.dim {
                    out[i * self.dim + i] = 2.0 * self.scale;
                }
            }
            _ => out.fill(0.0),
        }
    }
}

/// Scalar polynomial `Σ c · Π x_v^{e_v}` on ℝ^d.
#[derive(Debug, Clone)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("polynomial needs a positive dimension".into()));
        }
        for (_, e) in &terms {
            if e.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "monomial exponent vector has length {}, expected {dim}",
                    e.len()
                )));
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(_, e)| e.iter().sum::<u32>()).max().unwrap_or(0)
    }
}

fn falling(e: u32, c: u32) -> f64 {
    ((e - c + 1)..=e).map(f64::from).product()
}

impl SmoothMap for Polynomial {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "polynomial".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.dim;
        let mut idx = vec![0usize; order];
        let mut counts = vec![0u32; d];
        for (flat, slot) in out.iter_mut().enumerate() {
            unflatten(flat, d, &mut idx);
            counts.fill(0);
            for &j in &idx {
                counts[j] += 1;
            }
            let mut acc = 0.0;
            'terms: for (c, e) in &self.terms {
                let mut prod = *c;
                for v in 0..d {
                    if counts[v] > e[v] {
                        continue 'terms;
                    }
                    prod *= falling(e[v], counts[v]) * x[v].powi((e[v] - counts[v]) as i32);
                }
                acc += prod;
            }
            *slot = acc;
        }
    }
}

fn profile_table(profile: &Profile) -> Vec<Profile> {
    let mut table = Vec::with_capacity(CLOSED_FORM_ORDER + 2);
    let mut p = profile.clone();
    for _ in 0..=CLOSED_FORM_ORDER + 1 {
        let next = p.derivative();
        table.push(p);
        p = next;
    }
    table
}

/// `h(x)_i = φ(x_i)` on ℝ^d → ℝ^d.
#[derive(Debug, Clone)]
pub struct Componentwise {
    dim: usize,
    table: Vec<Profile>,
}

impl Componentwise {
    pub fn new(dim: usize, profile: Profile) -> Self {
        Self { dim, table: profile_table(&profile) }
    }
}

impl SmoothMap for Componentwise {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "componentwise".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.dim;
        if order == 0 {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = self.table[0].value(xi);
            }
            return;
        }
        out.fill(0.0);
        let diag_step: usize = (0..=order).map(|p| d.pow(p as u32)).sum();
        for k in 0..d {
            // entry (k, …, k; k)
            out[k * diag_step] = self.table[order].value(x[k]);
        }
    }
}

/// `σ(x) = diag(φ(x_1), …, φ(x_d))` as a `d → d²` map (row-major matrix).
#[derive(Debug, Clone)]
pub struct DiagonalMatrix {
    dim: usize,
    table: Vec<Profile>,
}

impl DiagonalMatrix {
    pub fn new(dim: usize, profile: Profile) -> Self {
        Self { dim, table: profile_table(&profile) }
    }
}

impl SmoothMap for DiagonalMatrix {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim * self.dim
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "diagonal matrix".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.dim;
        let o = d * d;
        out.fill(0.0);
        let mut idx_stride = 0;
        for p in 0..order {
            idx_stride += d.pow(p as u32);
        }
        for k in 0..d {
            let base = k * idx_stride * o;
            out[base + k * d + k] = self.table[order].value(x[k]);
        }
    }
}

/// `h(x) = s Σ_i φ(x_i)`, scalar.
#[derive(Debug, Clone)]
pub struct SeparableSum {
    dim: usize,
    scale: f64,
    table: Vec<Profile>,
}

impl SeparableSum {
    pub fn new(dim: usize, profile: Profile, scale: f64) -> Self {
        Self { dim, scale, table: profile_table(&profile) }
    }
}

impl SmoothMap for SeparableSum {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "separable sum".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.dim;
        if order == 0 {
            out[0] = self.scale * x.iter().map(|&v| self.table[0].value(v)).sum::<f64>();
            return;
        }
        out.fill(0.0);
        let diag_step: usize = (0..order).map(|p| d.pow(p as u32)).sum();
        for k in 0..d {
            out[k * diag_step] = self.scale * self.table[order].value(x[k]);
        }
    }
}

/// `h(x) = s Π_i φ(x_i)`, scalar.
#[derive(Debug, Clone)]
pub struct SeparableProduct {
    dim: usize,
    scale: f64,
    table: Vec<Profile>,
}

impl SeparableProduct {
    pub fn new(dim: usize, profile: Profile, scale: f64) -> Self {
        Self { dim, scale, table: profile_table(&profile) }
    }
}

impl SmoothMap for SeparableProduct {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn max_order(&self) -> usize {
        CLOSED_FORM_ORDER
    }
    fn label(&self) -> String {
        "separable product".into()
    }
    fn derivative_into(&self, _t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        let d = self.dim;
        // values[v][c] = φ^{(c)}(x_v)
        let values: Vec<Vec<f64>> = x
            .iter()
            .map(|&xv| (0..=order).map(|c| self.table[c].value(xv)).collect())
            .collect();
        let mut idx = vec![0usize; order];
        let mut counts = vec![0usize; d];
        for (flat, slot) in out.iter_mut().enumerate() {
            unflatten(flat, d, &mut idx);
            counts.fill(0);
            for &j in &idx {
                counts[j] += 1;
            }
            *slot = self.scale * (0..d).map(|v| values[v][counts[v]]).product::<f64>();
        }
    }
}

/// Scalar time profile multiplying a spatial map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    Constant(f64),
    /// `scale · e^{rate t}`
    Exp { scale: f64, rate: f64 },
    /// `intercept + slope t`
    Affine { intercept: f64, slope: f64 },
    /// `scale · t^exponent` for `t ≥ 0`
    Power { scale: f64, exponent: f64 },
}

impl TimeFactor {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant(c) => c,
            TimeFactor::Exp { scale, rate } => scale * (rate * t).exp(),
            TimeFactor::Affine { intercept, slope } => intercept + slope * t,
            TimeFactor::Power { scale, exponent } => scale * t.max(0.0).powf(exponent),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant(_) => 0.0,
            TimeFactor::Exp { scale, rate } => scale * rate * (rate * t).exp(),
            TimeFactor::Affine { slope, .. } => slope,
            TimeFactor::Power { scale, exponent } => {
                if exponent == 0.0 {
                    0.0
                } else {
                    scale * exponent * t.max(0.0).powf(exponent - 1.0)
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFactor::Constant(_))
            || matches!(self, TimeFactor::Exp { rate, .. } if *rate == 0.0)
            || matches!(self, TimeFactor::Affine { slope, .. } if *slope == 0.0)
            || matches!(self, TimeFactor::Power { exponent, .. } if *exponent == 0.0)
    }
}

/// `h(t, x) = a(t) · inner(t, x)`.
#[derive(Debug, Clone)]
pub struct TimeScaled {
    factor: TimeFactor,
    inner: Arc<dyn SmoothMap>,
}

impl TimeScaled {
    pub fn new(factor: TimeFactor, inner: Arc<dyn SmoothMap>) -> Self {
        Self { factor, inner }
    }
}

impl SmoothMap for TimeScaled {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }
    fn is_time_dependent(&self) -> bool {
        !self.factor.is_constant() || self.inner.is_time_dependent()
    }
    fn time_derivative_order(&self) -> Option<usize> {
        if self.inner.is_time_dependent() {
            self.inner.time_derivative_order()
        } else {
            Some(self.inner.max_order())
        }
    }
    fn label(&self) -> String {
        format!("time-scaled {}", self.inner.label())
    }
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.derivative_into(t, x, order, out);
        let a = self.factor.value(t);
        out.iter_mut().for_each(|v| *v *= a);
    }
    fn time_derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.derivative_into(t, x, order, out);
        let da = self.factor.derivative(t);
        out.iter_mut().for_each(|v| *v *= da);
        if self.inner.is_time_dependent() {
            let a = self.factor.value(t);
            let mut extra = vec![0.0; out.len()];
            self.inner.time_derivative_into(t, x, order, &mut extra);
            for (o, e) in out.iter_mut().zip(extra) {
                *o += a * e;
            }
        }
    }
}

/// `h = Σ_j c_j h_j` for maps sharing input and output dimensions.
#[derive(Debug, Clone)]
pub struct LinearCombination {
    terms: Vec<(f64, Arc<dyn SmoothMap>)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, Arc<dyn SmoothMap>)>) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::InvalidArgument("linear combination needs at least one term".into()));
        };
        let (din, dout) = (first.input_dim(), first.output_dim());
        for (_, h) in &terms {
            if h.input_dim() != din || h.output_dim() != dout {
                return Err(Error::DimensionMismatch(format!(
                    "cannot combine `{}` ({} → {}) with a {din} → {dout} map",
                    h.label(),
                    h.input_dim(),
                    h.output_dim()
                )));
            }
        }
        Ok(Self { terms })
    }

    /// `a − b`.
    pub fn difference(a: Arc<dyn SmoothMap>, b: Arc<dyn SmoothMap>) -> Result<Self> {
        Self::new(vec![(1.0, a), (-1.0, b)])
    }

    /// `a + b`.
    pub fn sum(a: Arc<dyn SmoothMap>, b: Arc<dyn SmoothMap>) -> Result<Self> {
        Self::new(vec![(1.0, a), (1.0, b)])
    }
}

impl SmoothMap for LinearCombination {
    fn input_dim(&self) -> usize {
        self.terms[0].1.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.terms[0].1.output_dim()
    }
    fn max_order(&self) -> usize {
        self.terms.iter().map(|(_, h)| h.max_order()).min().unwrap_or(0)
    }
    fn is_time_dependent(&self) -> bool {
        self.terms.iter().any(|(_, h)| h.is_time_dependent())
    }
    fn time_derivative_order(&self) -> Option<usize> {
        let mut best = self.max_order();
        for (_, h) in &self.terms {
            best = best.min(h.time_derivative_order()?);
        }
        Some(best)
    }
    fn label(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|(_, h)| h.label()).collect();
        format!("combination({})", parts.join(", "))
    }
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (c, h) in &self.terms {
            h.derivative_into(t, x, order, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += c * b;
            }
        }
    }
    fn time_derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (c, h) in &self.terms {
            h.time_derivative_into(t, x, order, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += c * b;
            }
        }
    }
}

/// Wraps a map and declares fewer available derivatives.
#[derive(Debug, Clone)]
pub struct OrderCapped {
    inner: Arc<dyn SmoothMap>,
    cap: usize,
}

impl OrderCapped {
    pub fn new(inner: Arc<dyn SmoothMap>, cap: usize) -> Self {
        Self { inner, cap }
    }
}

impl SmoothMap for OrderCapped {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn max_order(&self) -> usize {
        self.cap.min(self.inner.max_order())
    }
    fn is_time_dependent(&self) -> bool {
        self.inner.is_time_dependent()
    }
    fn time_derivative_order(&self) -> Option<usize> {
        self.inner.time_derivative_order().map(|o| o.min(self.max_order()))
    }
    fn label(&self) -> String {
        self.inner.label()
    }
    fn derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.derivative_into(t, x, order, out)
    }
    fn time_derivative_into(&self, t: f64, x: &[f64], order: usize, out: &mut [f64]) {
        self.inner.time_derivative_into(t, x, order, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::profile::TrigPoly;
    use approx::assert_relative_eq;

    fn fd_check(h: &dyn SmoothMap, t: f64, x: &[f64], order: usize) -> f64 {
        // Central differences of ∇^{order-1} against ∇^order along each axis.
        let step = 1e-5;
        let lower = h.derivative(t, x, order - 1).unwrap();
        let upper = h.derivative(t, x, order).unwrap();
        let block = lower.as_slice().len();
        let mut worst = 0.0f64;
        for j in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += step;
            xm[j] -= step;
            let fp = h.derivative(t, &xp, order - 1).unwrap();
            let fm = h.derivative(t, &xm, order - 1).unwrap();
            for e in 0..block {
                let fd = (fp.as_slice()[e] - fm.as_slice()[e]) / (2.0 * step);
                // ∂_j of entry e sits at leading index j in the layout of ∇^order,
                // and by symmetry equals index (e, j); we use the leading one.
                let exact = upper.as_slice()[j * block + e];
                worst = worst.max((fd - exact).abs() / (1.0 + exact.abs()));
            }
        }
        worst
    }

    fn families() -> Vec<Arc<dyn SmoothMap>> {
        let trig = Profile::Trig(TrigPoly::new(vec![0.5, 0.25], vec![0.0, -0.3, 0.1]));
        vec![
            Arc::new(Affine::new(vec![1.0, 2.0, -1.0, 0.5, 0.0, 3.0], vec![0.1, -0.2]).unwrap()),
            Arc::new(SquaredNorm::new(3, 0.7)),
            Arc::new(
                Polynomial::new(3, vec![(1.5, vec![2, 1, 0]), (-0.5, vec![0, 0, 4]), (2.0, vec![1, 1, 1])])
                    .unwrap(),
            ),
            Arc::new(Componentwise::new(3, trig.clone())),
            Arc::new(DiagonalMatrix::new(3, trig.clone())),
            Arc::new(SeparableSum::new(3, trig.clone(), 0.4)),
            Arc::new(SeparableProduct::new(3, Profile::Poly(vec![1.0, 0.5, -0.2, 0.1]), 1.3)),
            Arc::new(TimeScaled::new(
                TimeFactor::Exp { scale: 2.0, rate: -0.5 },
                Arc::new(SeparableProduct::new(3, Profile::cos(), 1.0)),
            )),
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.3, -0.7, 1.1];
        for h in families() {
            for order in 1..=4 {
                let defect = fd_check(h.as_ref(), 0.4, &x, order);
                assert!(defect < 1e-7, "{} order {order}: defect {defect}", h.label());
            }
        }
    }

    #[test]
    fn higher_derivatives_are_symmetric() {
        let x = [0.3, -0.7, 1.1];
        for h in families() {
            for order in 2..=4 {
                let t = h.derivative(0.2, &x, order).unwrap();
                assert!(t.symmetry_defect() < 1e-10, "{} order {order}", h.label());
            }
        }
    }

    #[test]
    fn time_derivative_of_scaled_map() {
        let h = TimeScaled::new(
            TimeFactor::Exp { scale: 1.0, rate: -1.0 },
            Arc::new(SeparableSum::new(2, Profile::sin(), 0.5)),
        );
        let x = [0.4, 1.2];
        let dt = h.time_derivative(0.3, &x, 0).unwrap();
        let v = h.value(0.3, &x).unwrap();
        assert_relative_eq!(dt.as_slice()[0], -v[0], epsilon = 1e-15);
    }

    #[test]
    fn order_cap_is_enforced() {
        let h = OrderCapped::new(Arc::new(SquaredNorm::new(2, 1.0)), 3);
        assert_eq!(h.max_order(), 3);
        assert!(h.derivative(0.0, &[0.0, 0.0], 4).is_err());
        assert!(h.derivative(0.0, &[0.0, 0.0, 0.0], 0).is_err());
    }

    #[test]
    fn combination_checks_dimensions() {
        let a: Arc<dyn SmoothMap> = Arc::new(SquaredNorm::new(2, 1.0));
        let b: Arc<dyn SmoothMap> = Arc::new(SquaredNorm::new(3, 1.0));
        assert!(LinearCombination::difference(a.clone(), b).is_err());
        let c = LinearCombination::difference(a.clone(), a).unwrap();
        assert_eq!(c.value(0.0, &[1.0, 2.0]).unwrap(), vec![0.0]);
    }
}
