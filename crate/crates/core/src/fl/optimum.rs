use nalgebra::{DMatrix, DVector};

use super::data::Dataset;
use super::model::{LogisticModel, ModelVector};

/// Minimizer of the full-batch regularized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub w: ModelVector,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Damped Newton iteration with Armijo backtracking, stopping once the
/// gradient norm drops below `tol` (or after 200 iterations).
pub fn minimize_full_batch(data: &Dataset, l2: f64, tol: f64) -> Optimum {
    let model = LogisticModel::for_dataset(data);
    let p = model.param_count();
    let mut w = ModelVector::zeros(p);
    let mut g = vec![0.0; p];
    let mut f = model.loss_grad(&w, data, None, l2, &mut g);
    let mut iterations = 0;
    loop {
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn < tol || iterations >= 200 {
            return Optimum {
                w,
                value: f,
                grad_norm: gn,
                iterations,
            };
        }
        iterations += 1;
        let h = DMatrix::from_row_slice(p, p, &model.hessian(&w, data, l2));
        let gv = DVector::from_column_slice(&g);
        let step = match h.cholesky() {
            Some(ch) => ch.solve(&gv),
            None => gv.clone(),
        };
        let slope: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
        let mut t = 1.0;
        let mut g_new = vec![0.0; p];
        loop {
            let mut trial = w.clone();
            for (wi, si) in trial.weights.iter_mut().zip(step.iter()) {
                *wi -= t * si;
            }
            let f_new = model.loss_grad(&trial, data, None, l2, &mut g_new);
            if f_new <= f - 1e-4 * t * slope || t < 1e-12 {
                w = trial;
                f = f_new;
                std::mem::swap(&mut g, &mut g_new);
                break;
            }
            t *= 0.5;
        }
    }
}
