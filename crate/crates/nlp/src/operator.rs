use nalgebra::{DMatrix, DVector};

/// A symmetric linear map `v -> B v`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;

    fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.apply(v))
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
}

/// `Q^T B Q` where `Q` selects the coordinates in `index`.
pub struct Restricted<'a, B: LinearOperator + ?Sized> {
    pub full: &'a B,
    pub index: &'a [usize],
}

impl<B: LinearOperator + ?Sized> LinearOperator for Restricted<'_, B> {
    fn dim(&self) -> usize {
        self.index.len()
    }

    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut embedded = DVector::zeros(self.full.dim());
        for (k, &i) in self.index.iter().enumerate() {
            embedded[i] = v[k];
        }
        let image = self.full.apply(&embedded);
        DVector::from_iterator(self.index.len(), self.index.iter().map(|&i| image[i]))
    }
}

/// Value of the quadratic model `g^T p + 0.5 p^T B p`.
pub fn model_value<B: LinearOperator + ?Sized>(b: &B, g: &DVector<f64>, p: &DVector<f64>) -> f64 {
    g.dot(p) + 0.5 * b.quad_form(p)
}
