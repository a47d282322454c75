//! Product-form basis inverse.
//!
//! `B⁻¹ = Eₖ⁻¹ ⋯ E₁⁻¹` where each elementary matrix `Eᵢ` is the identity with
//! one column replaced by a transformed basis column. Positions whose basic
//! variable is the row's own logical need no eta at all.

/// One elementary column transformation.
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct EtaFile {
    etas: Vec<Eta>,
    nnz: usize,
}

impl EtaFile {
    pub fn clear(&mut self) {
        self.etas.clear();
        self.nnz = 0;
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Appends the eta for pivoting the (already transformed) column `alpha`
    /// into position `pos`.
    pub fn push(&mut self, pos: usize, alpha: &[f64], drop_tol: f64) {
        let pivot = alpha[pos];
        let others: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > drop_tol)
            .map(|(i, &a)| (i, a))
            .collect();
        self.nnz += others.len() + 1;
        self.etas.push(Eta { pos, pivot, others });
    }

    /// `v ← B⁻¹ v`
    pub fn ftran(&self, v: &mut [f64]) {
        for eta in &self.etas {
            let vp = v[eta.pos];
            if vp == 0.0 {
                continue;
            }
            let vp = vp / eta.pivot;
            v[eta.pos] = vp;
            for &(i, a) in &eta.others {
                v[i] -= a * vp;
            }
        }
    }

    /// `y ← yᵀ B⁻¹`
    pub fn btran(&self, y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut s = y[eta.pos];
            for &(i, a) in &eta.others {
                s -= a * y[i];
            }
            y[eta.pos] = s / eta.pivot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ftran_btran_invert_a_two_by_two() {
        // B = [[2, 1], [1, 3]] built by pivoting columns into positions 0, 1.
        let mut f = EtaFile::default();
        let mut c0 = vec![2.0, 1.0];
        f.ftran(&mut c0);
        f.push(0, &c0, 0.0);
        let mut c1 = vec![1.0, 3.0];
        f.ftran(&mut c1);
        f.push(1, &c1, 0.0);

        // B x = (3, 4) → x = (1, 1)
        let mut v = vec![3.0, 4.0];
        f.ftran(&mut v);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);

        // yᵀ B = (5, 5) → y = (2, 1)
        let mut y = vec![5.0, 5.0];
        f.btran(&mut y);
        assert!((y[0] - 2.0).abs() < 1e-14 && (y[1] - 1.0).abs() < 1e-14);
    }
}
