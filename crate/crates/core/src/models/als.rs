//! Alternating least squares over the triplet score, plus the content
//! mapping and refresh steps of the adaptive linear mapping model.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{check_finite, Hyperparams, TrainingInstance, TrainingSet};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::numerics::{self, cholesky_solve, dot, Matrix};
use crate::seed::{stage_rng, STAGE_INIT};

/// User, last-article and next-article factor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AlsFactors {
    pub users: Matrix,
    pub last: Matrix,
    pub next: Matrix,
}

/// Fitted factors and content mappings.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedFactors {
    pub factors: AlsFactors,
    pub psi_last: Matrix,
    pub psi_next: Matrix,
}

pub(crate) fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let sd = 0.1 / (cols as f64).sqrt();
    let normal = Normal::new(0.0, sd).expect("valid normal");
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches")
}

/// Which factor matrix a half-sweep solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Users,
    Last,
    Next,
}

impl AlsFactors {
    /// Gaussian `N(0, 0.1/√d)` initialization drawn in the order users, last,
    /// next from the seed's `init` substream.
    pub fn init(data: &TrainingSet, hyper: &Hyperparams) -> AlsFactors {
        let mut rng = stage_rng(hyper.seed, STAGE_INIT);
        let d = hyper.latent_dim;
        AlsFactors {
            users: gaussian_matrix(data.n_users, d, &mut rng),
            last: gaussian_matrix(data.n_articles, d, &mut rng),
            next: gaussian_matrix(data.n_articles, d, &mut rng),
        }
    }

    pub fn score(&self, inst: &TrainingInstance) -> f64 {
        numerics::score_unchecked(
            self.users.row(inst.user),
            self.last.row(inst.last),
            self.next.row(inst.next),
        )
    }

    /// `Σ c (t − Ĉ)² + λ_U‖U‖² + λ_X‖X‖² + λ_Y‖Y‖²`.
    pub fn objective(&self, instances: &[TrainingInstance], hyper: &Hyperparams) -> f64 {
        objective_terms(
            instances,
            |inst| self.score(inst),
            [
                (hyper.reg_user, &self.users),
                (hyper.reg_last, &self.last),
                (hyper.reg_next, &self.next),
            ],
        )
    }

    pub fn update_users(&mut self, data: &TrainingSet, hyper: &Hyperparams) -> Result<()> {
        self.half_sweep(Side::Users, data, hyper)
    }

    pub fn update_last(&mut self, data: &TrainingSet, hyper: &Hyperparams) -> Result<()> {
        self.half_sweep(Side::Last, data, hyper)
    }

    pub fn update_next(&mut self, data: &TrainingSet, hyper: &Hyperparams) -> Result<()> {
        self.half_sweep(Side::Next, data, hyper)
    }

    /// One full ALS pass: users, then last-article, then next-article rows.
    pub fn sweep(&mut self, data: &TrainingSet, hyper: &Hyperparams) -> Result<()> {
        self.update_users(data, hyper)?;
        self.update_last(data, hyper)?;
        self.update_next(data, hyper)
    }

    /// Re-solves every row of one factor matrix with the others fixed.
    ///
    /// Because `Ĉ = U·(X+Y) + X·Y` is linear in each factor, a row solves the
    /// weighted ridge problem with regressors `g` and residual targets `r`:
    /// users `g = X_i+Y_j, r = t − X_i·Y_j`; last `g = U_u+Y_j, r = t − U_u·Y_j`;
    /// next `g = U_u+X_i, r = t − U_u·X_i`. Rows without instances are kept.
    fn half_sweep(&mut self, side: Side, data: &TrainingSet, hyper: &Hyperparams) -> Result<()> {
        let d = hyper.latent_dim;
        let (n_rows, lambda) = match side {
            Side::Users => (self.users.rows(), hyper.reg_user),
            Side::Last => (self.last.rows(), hyper.reg_last),
            Side::Next => (self.next.rows(), hyper.reg_next),
        };
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for (k, inst) in data.instances.iter().enumerate() {
            let row = match side {
                Side::Users => inst.user,
                Side::Last => inst.last,
                Side::Next => inst.next,
            };
            groups[row].push(k);
        }

        let this = &*self;
        let solved: Vec<Option<Vec<f64>>> = groups
            .par_iter()
            .map(|members| {
                if members.is_empty() {
                    return Ok(None);
                }
                let mut gram = Matrix::zeros(d, d);
                let mut rhs = Matrix::zeros(d, 1);
                let mut g = vec![0.0; d];
                for &k in members {
                    let inst = &data.instances[k];
                    let u = this.users.row(inst.user);
                    let x = this.last.row(inst.last);
                    let y = this.next.row(inst.next);
                    let (a, b) = match side {
                        Side::Users => (x, y),
                        Side::Last => (u, y),
                        Side::Next => (u, x),
                    };
                    for ((gv, av), bv) in g.iter_mut().zip(a).zip(b) {
                        *gv = av + bv;
                    }
                    let r = inst.target - dot(a, b);
                    let c = inst.weight;
                    for p in 0..d {
                        let cgp = c * g[p];
                        if cgp == 0.0 {
                            continue;
                        }
                        let row = gram.row_mut(p);
                        for q in 0..d {
                            row[q] += cgp * g[q];
                        }
                        rhs.as_mut_slice()[p] += cgp * r;
                    }
                }
                numerics::add_diagonal(&mut gram, lambda);
                let sol = cholesky_solve(&gram, &rhs, true)?;
                Ok(Some(sol.as_slice().to_vec()))
            })
            .collect::<Result<_>>()?;

        let target = match side {
            Side::Users => &mut self.users,
            Side::Last => &mut self.last,
            Side::Next => &mut self.next,
        };
        for (row, sol) in solved.into_iter().enumerate() {
            if let Some(sol) = sol {
                target.row_mut(row).copy_from_slice(&sol);
            }
        }
        Ok(())
    }
}

pub(crate) fn objective_terms<'a>(
    instances: &[TrainingInstance],
    score: impl Fn(&TrainingInstance) -> f64,
    penalties: [(f64, &'a Matrix); 3],
) -> f64 {
    let loss: f64 = instances
        .iter()
        .map(|inst| {
            let e = inst.target - score(inst);
            inst.weight * e * e
        })
        .sum();
    loss + penalties
        .iter()
        .map(|(lambda, m)| lambda * m.frobenius_norm_sq())
        .sum::<f64>()
}

fn check_features(data: &TrainingSet, features: &FeatureMatrix) -> Result<()> {
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
    Ok(())
}

/// `M ← (1−α)M + α·mapped`, skipped entirely at `α = 0`.
fn refresh(target: &mut Matrix, mapped: &Matrix, alpha: f64) {
    if alpha == 0.0 {
        return;
    }
    for (t, m) in target.as_mut_slice().iter_mut().zip(mapped.as_slice()) {
        *t = (1.0 - alpha) * *t + alpha * m;
    }
}

/// Adaptive linear mapping model: each iteration runs an ALS sweep, refits
/// `Ψ_X, Ψ_Y` by ridge regression of the latent article vectors on the
/// content rows, and refreshes `X, Y` toward `AΨ` by the blend `α`.
///
/// `features` must be row-aligned with the training article index.
pub fn almm_train(
    data: &TrainingSet,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> Result<MappedFactors> {
    hyper.validate()?;
    check_features(data, features)?;
    let mut factors = AlsFactors::init(data, hyper);
    let mut psi = None;
    for iteration in 1..=hyper.iterations {
        factors.sweep(data, hyper)?;
        if hyper.refresh_blend > 0.0 {
            let psi_last = features.ridge_map(&factors.last, hyper.reg_mapping)?;
            let psi_next = features.ridge_map(&factors.next, hyper.reg_mapping)?;
            refresh(&mut factors.last, &features.map_all(&psi_last), hyper.refresh_blend);
            refresh(&mut factors.next, &features.map_all(&psi_next), hyper.refresh_blend);
            psi = Some((psi_last, psi_next));
        }
        let loss = factors.objective(&data.instances, hyper);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration,
                message: format!("objective is {loss}"),
            });
        }
    }
    // With α = 0 the refresh is a no-op, so the mapping only needs fitting once.
    let (psi_last, psi_next) = match psi {
        Some(p) => p,
        None => (
            features.ridge_map(&factors.last, hyper.reg_mapping)?,
            features.ridge_map(&factors.next, hyper.reg_mapping)?,
        ),
    };
    check_finite(&[&factors.users, &factors.last, &factors.next, &psi_last, &psi_next])?;
    Ok(MappedFactors {
        factors,
        psi_last,
        psi_next,
    })
}

/// Pure ALS on the triplet score, no content involved.
pub fn als_train(data: &TrainingSet, hyper: &Hyperparams) -> Result<AlsFactors> {
    hyper.validate()?;
    if data.instances.is_empty() {
        return Err(Error::EmptyInput("no training instances".into()));
    }
    let mut factors = AlsFactors::init(data, hyper);
    for iteration in 1..=hyper.iterations {
        factors.sweep(data, hyper)?;
        let loss = factors.objective(&data.instances, hyper);
        if !loss.is_finite() {
            return Err(Error::Divergence {
                iteration,
                message: format!("objective is {loss}"),
            });
        }
    }
    Ok(factors)
}

/// Two-stage model: latent factors from pure ALS, then `Ψ_X, Ψ_Y` fitted by
/// ridge regression of those factors on the content rows.
pub fn oord_train(
    data: &TrainingSet,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> Result<MappedFactors> {
    check_features(data, features)?;
    let factors = als_train(data, hyper)?;
    let psi_last = features.ridge_map(&factors.last, hyper.reg_mapping)?;
    let psi_next = features.ridge_map(&factors.next, hyper.reg_mapping)?;
    check_finite(&[&psi_last, &psi_next])?;
    Ok(MappedFactors {
        factors,
        psi_last,
        psi_next,
    })
}
