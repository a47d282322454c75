//! Sparse affine expressions in the decision variables, and vectors of them
//! indexed by lifted-disturbance position.

/// `Σ coeff · var + constant` with terms sorted by variable id and no zero
/// coefficients stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(id: usize) -> Self {
        Self::scaled_var(id, 1.0)
    }

    pub fn scaled_var(id: usize, coeff: f64) -> Self {
        let terms = if coeff == 0.0 { Vec::new() } else { vec![(id, coeff)] };
        Self { terms, constant: 0.0 }
    }

    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    /// No variable terms.
    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Identically zero.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    /// `self += s · other`
    pub fn add_scaled(&mut self, other: &AffineExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        if other.terms.is_empty() {
            return;
        }
        let mut merged = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() || j < other.terms.len() {
            let take_left = j == other.terms.len() || (i < self.terms.len() && self.terms[i].0 < other.terms[j].0);
            let take_right = i == self.terms.len() || (j < other.terms.len() && other.terms[j].0 < self.terms[i].0);
            if take_left {
                merged.push(self.terms[i]);
                i += 1;
            } else if take_right {
                merged.push((other.terms[j].0, s * other.terms[j].1));
                j += 1;
            } else {
                let c = self.terms[i].1 + s * other.terms[j].1;
                if c != 0.0 {
                    merged.push((self.terms[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        self.terms = merged;
    }

    pub fn scale(&mut self, s: f64) {
        if s == 0.0 {
            *self = Self::zero();
            return;
        }
        self.constant *= s;
        for t in &mut self.terms {
            t.1 *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut e = self.clone();
        e.scale(s);
        e
    }

    /// Value at `values` (indexed by variable id).
    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * values[j]).sum::<f64>()
    }

    /// Same expression with every variable id increased by `offset`.
    pub fn shifted(&self, offset: usize) -> Self {
        Self {
            terms: self.terms.iter().map(|&(j, c)| (j + offset, c)).collect(),
            constant: self.constant,
        }
    }
}

/// `coefᵀ z + constant` where every entry is affine in the decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedAffine {
    pub coef: Vec<AffineExpr>,
    pub constant: AffineExpr,
}

impl LiftedAffine {
    pub fn zero(dim: usize) -> Self {
        Self {
            coef: vec![AffineExpr::zero(); dim],
            constant: AffineExpr::zero(),
        }
    }

    pub fn add_scaled(&mut self, other: &LiftedAffine, s: f64) {
        if s == 0.0 {
            return;
        }
        for (a, b) in self.coef.iter_mut().zip(&other.coef) {
            if !b.is_zero() {
                a.add_scaled(b, s);
            }
        }
        self.constant.add_scaled(&other.constant, s);
    }

    /// Value for decision values `values` and lifted point `z`.
    pub fn eval(&self, values: &[f64], z: &[f64]) -> f64 {
        self.constant.eval(values)
            + self
                .coef
                .iter()
                .zip(z)
                .filter(|(_, &zi)| zi != 0.0)
                .map(|(c, &zi)| c.eval(values) * zi)
                .sum::<f64>()
    }

    /// Coefficients and constant with the decision values substituted.
    pub fn substitute(&self, values: &[f64]) -> (Vec<f64>, f64) {
        (self.coef.iter().map(|c| c.eval(values)).collect(), self.constant.eval(values))
    }
}
