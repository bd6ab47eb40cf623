use super::data::Dataset;

/// Flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector {
    pub weights: Vec<f64>,
}

impl ModelVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
        }
    }

    pub fn from_vec(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_vec(self.weights.iter().map(|w| w * s).collect())
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, s: f64, other: &ModelVector) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += s * b;
        }
    }

    pub fn distance_sq(&self, other: &ModelVector) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Multinomial logistic regression with a bias per class and L2 penalty
/// `(λ/2)‖w‖²` on all parameters. Layout: `classes` rows of `dim + 1`
/// entries, the last being the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogisticModel {
    pub classes: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Regularized objective (mean cross-entropy plus L2 term).
    pub loss: f64,
    pub accuracy: f64,
}

impl LogisticModel {
    pub fn for_dataset(data: &Dataset) -> Self {
        Self {
            classes: data.classes,
            dim: data.dim,
        }
    }

    pub fn param_count(&self) -> usize {
        self.classes * (self.dim + 1)
    }

    fn logits(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        let stride = self.dim + 1;
        for (c, o) in out.iter_mut().enumerate() {
            let row = &w[c * stride..(c + 1) * stride];
            *o = row[self.dim]
                + row[..self.dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
        }
    }

    /// Softmax probabilities in place; returns log-sum-exp.
    fn softmax(z: &mut [f64]) -> f64 {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in z.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in z.iter_mut() {
            *v /= sum;
        }
        max + sum.ln()
    }

    /// Cross-entropy of one row; adds `scale · ∇` into `grad` when given.
    fn accumulate(
        &self,
        w: &[f64],
        x: &[f64],
        y: usize,
        scale: f64,
        grad: Option<&mut [f64]>,
        buf: &mut [f64],
    ) -> f64 {
        self.logits(w, x, buf);
        let zy = buf[y];
        let lse = Self::softmax(buf);
        if let Some(g) = grad {
            let stride = self.dim + 1;
            for c in 0..self.classes {
                let r = scale * (buf[c] - if c == y { 1.0 } else { 0.0 });
                let row = &mut g[c * stride..(c + 1) * stride];
                for (gi, xi) in row[..self.dim].iter_mut().zip(x) {
                    *gi += r * xi;
                }
                row[self.dim] += r;
            }
        }
        lse - zy
    }

    /// Objective over `rows` (all rows when `None`) and its gradient.
    pub fn loss_grad(
        &self,
        w: &ModelVector,
        data: &Dataset,
        rows: Option<&[usize]>,
        l2: f64,
        grad: &mut [f64],
    ) -> f64 {
        grad.iter_mut()
            .zip(&w.weights)
            .for_each(|(g, wi)| *g = l2 * wi);
        let mut buf = vec![0.0; self.classes];
        let n = rows.map_or(data.len(), <[usize]>::len);
        let scale = 1.0 / n as f64;
        let mut loss = 0.0;
        let mut visit = |i: usize| {
            loss += self.accumulate(
                &w.weights,
                data.row(i),
                data.labels[i] as usize,
                scale,
                Some(grad),
                &mut buf,
            );
        };
        match rows {
            Some(r) => r.iter().for_each(|&i| visit(i)),
            None => (0..data.len()).for_each(&mut visit),
        }
        loss * scale + 0.5 * l2 * w.norm_sq()
    }

    pub fn objective(&self, w: &ModelVector, data: &Dataset, l2: f64) -> f64 {
        let mut buf = vec![0.0; self.classes];
        let ce: f64 = (0..data.len())
            .map(|i| {
                self.accumulate(
                    &w.weights,
                    data.row(i),
                    data.labels[i] as usize,
                    0.0,
                    None,
                    &mut buf,
                )
            })
            .sum();
        ce / data.len() as f64 + 0.5 * l2 * w.norm_sq()
    }

    pub fn gradient(&self, w: &ModelVector, data: &Dataset, l2: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.param_count()];
        self.loss_grad(w, data, None, l2, &mut g);
        g
    }

    /// Gradient of the regularized loss at a single row.
    pub fn row_gradient(
        &self,
        w: &ModelVector,
        data: &Dataset,
        i: usize,
        l2: f64,
        grad: &mut [f64],
    ) {
        self.loss_grad(w, data, Some(&[i]), l2, grad);
    }

    /// Full-batch Hessian, row-major `P × P`.
    pub fn hessian(&self, w: &ModelVector, data: &Dataset, l2: f64) -> Vec<f64> {
        let p = self.param_count();
        let stride = self.dim + 1;
        let mut h = vec![0.0; p * p];
        let mut prob = vec![0.0; self.classes];
        let mut xt = vec![1.0; stride];
        let scale = 1.0 / data.len() as f64;
        for i in 0..data.len() {
            let x = data.row(i);
            xt[..self.dim].copy_from_slice(x);
            self.logits(&w.weights, x, &mut prob);
            Self::softmax(&mut prob);
            for a in 0..self.classes {
                for b in 0..self.classes {
                    let s = scale * (if a == b { prob[a] } else { 0.0 } - prob[a] * prob[b]);
                    if s == 0.0 {
                        continue;
                    }
                    for (u, xu) in xt.iter().enumerate() {
                        let r = (a * stride + u) * p + b * stride;
                        for (v, xv) in xt.iter().enumerate() {
                            h[r + v] += s * xu * xv;
                        }
                    }
                }
            }
        }
        for d in 0..p {
            h[d * p + d] += l2;
        }
        h
    }

    pub fn predict(&self, w: &ModelVector, x: &[f64]) -> u32 {
        let mut z = vec![0.0; self.classes];
        self.logits(&w.weights, x, &mut z);
        let mut best = 0;
        for (c, v) in z.iter().enumerate() {
            if *v > z[best] {
                best = c;
            }
        }
        best as u32
    }
}

/// Regularized loss and top-1 accuracy of `w` on `data`.
pub fn evaluate(w: &ModelVector, data: &Dataset, l2: f64) -> Metrics {
    let model = LogisticModel::for_dataset(data);
    let correct = (0..data.len())
        .filter(|&i| model.predict(w, data.row(i)) == data.labels[i])
        .count();
    Metrics {
        loss: model.objective(w, data, l2),
        accuracy: correct as f64 / data.len().max(1) as f64,
    }
}
