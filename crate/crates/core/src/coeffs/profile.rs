use std::ops::{Add, Mul, Sub};

/// Real trigonometric polynomial `a_0 + Σ_{k≥1} (a_k cos(k s) + b_k sin(k s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigPoly {
    /// `cos[k]` multiplies `cos(k s)`, `sin[k]` multiplies `sin(k s)`; `sin[0]` is ignored.
    pub fn new(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        let n = cos.len().max(sin.len()).max(1);
        let mut c = cos;
        let mut s = sin;
        c.resize(n, 0.0);
        s.resize(n, 0.0);
        s[0] = 0.0;
        Self { cos: c, sin: s }.trimmed()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c], vec![])
    }

    pub fn sin_k(k: usize, amplitude: f64) -> Self {
        let mut s = vec![0.0; k + 1];
        s[k] = amplitude;
        Self::new(vec![], s)
    }

    pub fn cos_k(k: usize, amplitude: f64) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = amplitude;
        Self::new(c, vec![])
    }

    pub fn degree(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    fn trimmed(mut self) -> Self {
        while self.cos.len() > 1 && self.cos.last() == Some(&0.0) && self.sin.last() == Some(&0.0) {
            self.cos.pop();
            self.sin.pop();
        }
        self
    }

    pub fn derivative(&self) -> Self {
        let n = self.cos.len();
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        for k in 1..n {
            let kf = k as f64;
            c[k] = kf * self.sin[k];
            s[k] = -kf * self.cos[k];
        }
        Self::new(c, s)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(
            self.cos.iter().map(|v| a * v).collect(),
            self.sin.iter().map(|v| a * v).collect(),
        )
    }

    /// Sup norm bound `Σ |a_k| + |b_k|`.
    pub fn coefficient_l1(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|v| v.abs()).sum()
    }

    pub fn eval(&self, s: f64) -> f64 {
        let (s1, c1) = s.sin_cos();
        let mut acc = self.cos[0];
        let (mut ck, mut sk) = (1.0, 0.0);
        for k in 1..self.cos.len() {
            let next_c = ck * c1 - sk * s1;
            let next_s = sk * c1 + ck * s1;
            ck = next_c;
            sk = next_s;
            acc += self.cos[k] * ck + self.sin[k] * sk;
        }
        acc
    }
}

impl Add for &TrigPoly {
    type Output = TrigPoly;

    fn add(self, rhs: &TrigPoly) -> TrigPoly {
        let n = self.cos.len().max(rhs.cos.len());
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        for (k, (cv, sv)) in self.cos.iter().zip(&self.sin).enumerate() {
            c[k] += cv;
            s[k] += sv;
        }
        for (k, (cv, sv)) in rhs.cos.iter().zip(&rhs.sin).enumerate() {
            c[k] += cv;
            s[k] += sv;
        }
        TrigPoly::new(c, s)
    }
}

impl Sub for &TrigPoly {
    type Output = TrigPoly;

    fn sub(self, rhs: &TrigPoly) -> TrigPoly {
        self + &rhs.scaled(-1.0)
    }
}

impl Mul for &TrigPoly {
    type Output = TrigPoly;

    fn mul(self, rhs: &TrigPoly) -> TrigPoly {
        let n = self.cos.len() + rhs.cos.len() - 1;
        let mut c = vec![0.0; n];
        let mut s = vec![0.0; n];
        for i in 0..self.cos.len() {
            for j in 0..rhs.cos.len() {
                let (ai, bi) = (self.cos[i], self.sin[i]);
                let (aj, bj) = (rhs.cos[j], rhs.sin[j]);
                let sum = i + j;
                let diff = i.abs_diff(j);
                // cos·cos, sin·sin, sin·cos, cos·sin via product-to-sum.
                c[sum] += 0.5 * (ai * aj - bi * bj);
                c[diff] += 0.5 * (ai * aj + bi * bj);
                s[sum] += 0.5 * (bi * aj + ai * bj);
                // sin(i s)cos(j s) = ½[sin((i+j)s) + sin((i-j)s)]
                let sign = if i >= j { 1.0 } else { -1.0 };
                s[diff] += 0.5 * sign * (bi * aj - ai * bj);
            }
        }
        TrigPoly::new(c, s)
    }
}

/// Scalar profile `φ: ℝ → ℝ` used by the separable map families.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Trig(TrigPoly),
    /// Coefficients `c_0 + c_1 s + c_2 s² + …`.
    Poly(Vec<f64>),
}

impl Profile {
    pub fn sin() -> Self {
        Profile::Trig(TrigPoly::sin_k(1, 1.0))
    }

    pub fn cos() -> Self {
        Profile::Trig(TrigPoly::cos_k(1, 1.0))
    }

    /// Writes `φ(s), φ'(s), …, φ^{(k)}(s)` into `out[0..=k]`.
    pub fn derivatives(&self, s: f64, out: &mut [f64]) {
        match self {
            Profile::Trig(p) => {
                let mut q = p.clone();
                for slot in out.iter_mut() {
                    *slot = q.eval(s);
                    q = q.derivative();
                }
            }
            Profile::Poly(coeffs) => {
                for (order, slot) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    let mut pw = 1.0;
                    for (p, &c) in coeffs.iter().enumerate().skip(order) {
                        let falling: f64 = ((p - order + 1)..=p).map(|v| v as f64).product();
                        acc += c * falling * pw;
                        pw *= s;
                    }
                    *slot = acc;
                }
            }
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Trig(p) => p.eval(s),
            Profile::Poly(c) => c.iter().rev().fold(0.0, |acc, &v| acc * s + v),
        }
    }

    pub fn derivative(&self) -> Profile {
        match self {
            Profile::Trig(p) => Profile::Trig(p.derivative()),
            Profile::Poly(c) => {
                let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(p, &v)| p as f64 * v).collect();
                Profile::Poly(if d.is_empty() { vec![0.0] } else { d })
            }
        }
    }
}
