//! Content-constrained factorization trained by SGD: article vectors are
//! always linear maps of their content, `x = Ψ_Xᵀ A_i`, `y = Ψ_Yᵀ A_j`.

use rand::seq::SliceRandom;

use super::als::gaussian_matrix;
use super::{check_finite, Hyperparams, TrainingInstance, TrainingSet};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::numerics::{self, dot, Matrix};
use crate::seed::{stage_rng, STAGE_INIT, STAGE_SGD};

// Fold the lazy decay scale back into the matrix below this magnitude.
const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ForbesParams {
    pub users: Matrix,
    pub psi_last: Matrix,
    pub psi_next: Matrix,
}

/// Gradient of [`instance_loss`] with respect to the instance's user row and
/// both mapping matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ForbesGradient {
    pub user: Vec<f64>,
    pub psi_last: Matrix,
    pub psi_next: Matrix,
}

impl ForbesParams {
    pub fn init(n_users: usize, feature_dim: usize, hyper: &Hyperparams) -> ForbesParams {
        let mut rng = stage_rng(hyper.seed, STAGE_INIT);
        let d = hyper.latent_dim;
        ForbesParams {
            users: gaussian_matrix(n_users, d, &mut rng),
            psi_last: gaussian_matrix(feature_dim, d, &mut rng),
            psi_next: gaussian_matrix(feature_dim, d, &mut rng),
        }
    }

    fn mapped(&self, inst: &TrainingInstance, features: &FeatureMatrix) -> (Vec<f64>, Vec<f64>) {
        let d = self.users.cols();
        let mut x = vec![0.0; d];
        let mut y = vec![0.0; d];
        features.map_row_into(inst.last, &self.psi_last, &mut x);
        features.map_row_into(inst.next, &self.psi_next, &mut y);
        (x, y)
    }
}

/// Per-instance loss
/// `½c(t − Ĉ)² + ½λ_U‖U_u‖² + ½λ_X‖Ψ_X‖² + ½λ_Y‖Ψ_Y‖²`.
pub fn instance_loss(
    params: &ForbesParams,
    inst: &TrainingInstance,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> f64 {
    let (x, y) = params.mapped(inst, features);
    let u = params.users.row(inst.user);
    let e = inst.target - numerics::score_unchecked(u, &x, &y);
    0.5 * inst.weight * e * e
        + 0.5 * hyper.reg_user * dot(u, u)
        + 0.5 * hyper.reg_last * params.psi_last.frobenius_norm_sq()
        + 0.5 * hyper.reg_next * params.psi_next.frobenius_norm_sq()
}

pub fn instance_gradient(
    params: &ForbesParams,
    inst: &TrainingInstance,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> ForbesGradient {
    let (x, y) = params.mapped(inst, features);
    let u = params.users.row(inst.user);
    let e = inst.weight * (inst.target - numerics::score_unchecked(u, &x, &y));

    let user = (0..u.len())
        .map(|k| -e * (x[k] + y[k]) + hyper.reg_user * u[k])
        .collect();

    let mut psi_last = params.psi_last.clone();
    psi_last.as_mut_slice().iter_mut().for_each(|v| *v *= hyper.reg_last);
    let u_plus_y: Vec<f64> = u.iter().zip(&y).map(|(a, b)| a + b).collect();
    features.for_each_entry(inst.last, |c, a| {
        numerics::axpy(-e * a, &u_plus_y, psi_last.row_mut(c));
    });

    let mut psi_next = params.psi_next.clone();
    psi_next.as_mut_slice().iter_mut().for_each(|v| *v *= hyper.reg_next);
    let u_plus_x: Vec<f64> = u.iter().zip(&x).map(|(a, b)| a + b).collect();
    features.for_each_entry(inst.next, |c, a| {
        numerics::axpy(-e * a, &u_plus_x, psi_next.row_mut(c));
    });

    ForbesGradient {
        user,
        psi_last,
        psi_next,
    }
}

/// `Ψ = scale · raw`, so the per-instance weight decay `Ψ ← (1 − lr·λ)Ψ` costs
/// one multiplication instead of a pass over the whole matrix.
struct ScaledMatrix {
    raw: Matrix,
    scale: f64,
}

impl ScaledMatrix {
    fn new(m: Matrix) -> Self {
        ScaledMatrix { raw: m, scale: 1.0 }
    }

    fn map_row_into(&self, features: &FeatureMatrix, r: usize, out: &mut [f64]) {
        features.map_row_into(r, &self.raw, out);
        if self.scale != 1.0 {
            out.iter_mut().for_each(|v| *v *= self.scale);
        }
    }

    fn decay(&mut self, factor: f64) {
        if factor == 0.0 {
            self.raw.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale.abs() < MIN_SCALE {
            self.fold();
        }
    }

    /// `Ψ[c] += coef · v`
    fn add_row(&mut self, c: usize, coef: f64, v: &[f64]) {
        numerics::axpy(coef / self.scale, v, self.raw.row_mut(c));
    }

    fn fold(&mut self) {
        let s = self.scale;
        self.raw.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        self.scale = 1.0;
    }

    fn into_matrix(mut self) -> Matrix {
        self.fold();
        self.raw
    }
}

/// SGD over shuffled instances for `epochs` epochs, learning rate
/// `lr · decay^epoch`. For each instance, with `e = c(t − Ĉ)` and `x, y`
/// evaluated before the update:
/// `U_u += lr(e(x+y) − λ_U U_u)`,
/// `Ψ_X += lr(e A_i ⊗ (U_u+y) − λ_X Ψ_X)`,
/// `Ψ_Y += lr(e A_j ⊗ (U_u+x) − λ_Y Ψ_Y)`.
///
/// `features` must be row-aligned with the training article index.
pub fn forbes_train(
    data: &TrainingSet,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> Result<ForbesParams> {
    hyper.validate()?;
    if data.instances.is_empty() {
        return Err(Error::EmptyInput("no training instances".into()));
    }
    if features.len() != data.n_articles {
        return Err(Error::Input(format!(
            "feature matrix has {} rows for {} training articles",
            features.len(),
            data.n_articles
        )));
    }
    let init = ForbesParams::init(data.n_users, features.dim(), hyper);
    let mut users = init.users;
    let mut psi_last = ScaledMatrix::new(init.psi_last);
    let mut psi_next = ScaledMatrix::new(init.psi_next);

    let d = hyper.latent_dim;
    let mut rng = stage_rng(hyper.seed, STAGE_SGD);
    let mut order: Vec<usize> = (0..data.instances.len()).collect();
    let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
    let (mut u_plus_x, mut u_plus_y) = (vec![0.0; d], vec![0.0; d]);

    let mut lr = hyper.learning_rate;
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let inst = &data.instances[k];
            psi_last.map_row_into(features, inst.last, &mut x);
            psi_next.map_row_into(features, inst.next, &mut y);
            let u = users.row_mut(inst.user);
            let e = inst.weight * (inst.target - numerics::score_unchecked(u, &x, &y));
            for q in 0..d {
                u_plus_x[q] = u[q] + x[q];
                u_plus_y[q] = u[q] + y[q];
            }
            for q in 0..d {
                u[q] += lr * (e * (x[q] + y[q]) - hyper.reg_user * u[q]);
            }
            psi_last.decay(1.0 - lr * hyper.reg_last);
            psi_next.decay(1.0 - lr * hyper.reg_next);
            if e != 0.0 {
                features.for_each_entry(inst.last, |c, a| {
                    psi_last.add_row(c, lr * e * a, &u_plus_y);
                });
                features.for_each_entry(inst.next, |c, a| {
                    psi_next.add_row(c, lr * e * a, &u_plus_x);
                });
            }
        }
        lr *= hyper.lr_decay;
        if !(users.is_finite() && psi_last.raw.is_finite() && psi_next.raw.is_finite()) {
            return Err(Error::Divergence {
                iteration: epoch + 1,
                message: "non-finite parameter after SGD epoch".into(),
            });
        }
    }
    let params = ForbesParams {
        users,
        psi_last: psi_last.into_matrix(),
        psi_next: psi_next.into_matrix(),
    };
    check_finite(&[&params.users, &params.psi_last, &params.psi_next])?;
    Ok(params)
}
