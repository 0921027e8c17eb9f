//! Content-aware latent-factor models over `(user, last, next)` triplets.
//!
//! All three trainers share the score `Ĉ = U_uᵀX_i + U_uᵀY_j + X_iᵀY_j`, the
//! same negative-sampled instance set, and the same hyperparameters:
//!
//! - [`ModelKind::Almm`]: ALS sweeps interleaved with ridge refits of the
//!   content mappings `Ψ_X, Ψ_Y` and a refresh of `X, Y` toward `AΨ`.
//! - [`ModelKind::Forbes`]: `X, Y` are always `AΨ`; `U, Ψ` learned by SGD.
//! - [`ModelKind::Oord`]: pure ALS, then `Ψ` fitted post hoc; predictions
//!   always go through the mapped content.

pub mod als;
pub mod forbes;
pub mod negatives;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use als::{almm_train, als_train, oord_train, AlsFactors, MappedFactors};
pub use forbes::{forbes_train, instance_gradient, instance_loss, ForbesGradient, ForbesParams};
pub use negatives::sample_negatives;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::numerics::{self, Matrix};
use crate::seed::{derive_seed, STAGE_NEGATIVES};
use crate::transitions::{IdIndex, TripletSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Almm,
    Forbes,
    Oord,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Almm, ModelKind::Forbes, ModelKind::Oord];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Almm => "almm",
            ModelKind::Forbes => "forbes",
            ModelKind::Oord => "oord",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Almm => "ALMM",
            ModelKind::Forbes => "Forbes",
            ModelKind::Oord => "Oord",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "almm" => Ok(ModelKind::Almm),
            "forbes" => Ok(ModelKind::Forbes),
            "oord" => Ok(ModelKind::Oord),
            other => Err(Error::Parameter(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub latent_dim: usize,
    /// λ_U
    pub reg_user: f64,
    /// λ_X
    pub reg_last: f64,
    /// λ_Y
    pub reg_next: f64,
    /// λ_Ψ
    pub reg_mapping: f64,
    /// α: weight of the mapped content in the refresh step.
    pub refresh_blend: f64,
    /// ν: sampled negatives per positive.
    pub negatives: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            latent_dim: 32,
            reg_user: 0.1,
            reg_last: 0.1,
            reg_next: 0.1,
            reg_mapping: 1.0,
            refresh_blend: 1.0,
            negatives: 4,
            iterations: 15,
            learning_rate: 0.01,
            lr_decay: 0.9,
            epochs: 30,
            seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        for (name, v) in [
            ("reg_user", self.reg_user),
            ("reg_last", self.reg_last),
            ("reg_next", self.reg_next),
            ("reg_mapping", self.reg_mapping),
            ("learning_rate", self.learning_rate),
            ("lr_decay", self.lr_decay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.refresh_blend) {
            return bad(format!(
                "refresh_blend must lie in [0, 1], got {}",
                self.refresh_blend
            ));
        }
        if self.negatives == 0 {
            return bad("negatives must be >= 1".into());
        }
        Ok(())
    }
}

/// One weighted regression target. Positives carry `target = 1` and the
/// triplet confidence; negatives carry `target = 0` and weight 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingInstance {
    pub user: usize,
    pub last: usize,
    pub next: usize,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub instances: Vec<TrainingInstance>,
    pub n_users: usize,
    pub n_articles: usize,
}

pub(crate) fn check_finite(ms: &[&Matrix]) -> Result<()> {
    if ms.iter().all(|m| m.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration: 0,
            message: "trained parameters contain non-finite values".into(),
        })
    }
}

/// A trained model: factors, content mappings and the id spaces they index.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub kind: ModelKind,
    pub hyper: Hyperparams,
    pub users: IdIndex,
    pub articles: IdIndex,
    /// `|users| × d`
    pub user_factors: Matrix,
    /// `|articles| × d`, last-article role
    pub last_factors: Matrix,
    /// `|articles| × d`, next-article role
    pub next_factors: Matrix,
    /// `m × d`
    pub psi_last: Matrix,
    /// `m × d`
    pub psi_next: Matrix,
}

/// Effective last/next vectors for every row of a catalog-level feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemVectors {
    pub last: Matrix,
    pub next: Matrix,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelManifest {
    kind: ModelKind,
    hyper: Hyperparams,
    latent_dim: usize,
    feature_dim: usize,
    users: Vec<String>,
    articles: Vec<String>,
}

const MATRIX_FILES: [&str; 5] = ["U.mat", "X.mat", "Y.mat", "PsiX.mat", "PsiY.mat"];

impl FactorModel {
    pub fn latent_dim(&self) -> usize {
        self.user_factors.cols()
    }

    /// Whether the model scores with stored vectors for trained articles.
    pub fn uses_stored_vectors(&self) -> bool {
        self.kind != ModelKind::Oord
    }

    pub fn user_vector(&self, user: &str) -> Vec<f64> {
        match self.users.get(user) {
            Some(u) => self.user_factors.row(u).to_vec(),
            None => vec![0.0; self.latent_dim()],
        }
    }

    /// `(Ψ_Xᵀ A_r, Ψ_Yᵀ A_r)` for feature row `r`.
    pub fn mapped_vectors(&self, features: &FeatureMatrix, r: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.latent_dim();
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        features.map_row_into(r, &self.psi_last, &mut x);
        features.map_row_into(r, &self.psi_next, &mut y);
        (x, y)
    }

    fn check_feature_dim(&self, features: &FeatureMatrix) -> Result<()> {
        if features.dim() != self.psi_last.rows() {
            return Err(Error::Input(format!(
                "model expects {}-dimensional features, got {}",
                self.psi_last.rows(),
                features.dim()
            )));
        }
        Ok(())
    }

    /// Last/next vectors for every feature row. Oord always maps content;
    /// ALMM and Forbes use stored vectors for trained articles and map the
    /// content of any other (cold) article.
    pub fn item_vectors(&self, features: &FeatureMatrix) -> Result<ItemVectors> {
        self.check_feature_dim(features)?;
        let d = self.latent_dim();
        let mut last = Matrix::zeros(features.len(), d);
        let mut next = Matrix::zeros(features.len(), d);
        for (r, id) in features.ids().iter().enumerate() {
            match self.articles.get(id).filter(|_| self.uses_stored_vectors()) {
                Some(a) => {
                    last.row_mut(r).copy_from_slice(self.last_factors.row(a));
                    next.row_mut(r).copy_from_slice(self.next_factors.row(a));
                }
                None => {
                    features.map_row_into(r, &self.psi_last, last.row_mut(r));
                    features.map_row_into(r, &self.psi_next, next.row_mut(r));
                }
            }
        }
        Ok(ItemVectors { last, next })
    }

    /// Ranks `candidates` for a user who just read `last`, best first. Ties
    /// go to the lower feature row. Unknown users score with `U_u = 0`.
    pub fn predict<S: AsRef<str>>(
        &self,
        user: &str,
        last: &str,
        candidates: &[S],
        features: &FeatureMatrix,
    ) -> Result<Vec<(String, f64)>> {
        self.check_feature_dim(features)?;
        if candidates.is_empty() {
            return Err(Error::Input("no candidates to rank".into()));
        }
        let row_of = |id: &str| {
            features
                .row_of(id)
                .ok_or_else(|| Error::Input(format!("article {id} has no feature row")))
        };
        let stored = |id: &str| self.articles.get(id).filter(|_| self.uses_stored_vectors());
        let u = self.user_vector(user);
        let x = match stored(last) {
            Some(a) => self.last_factors.row(a).to_vec(),
            None => self.mapped_vectors(features, row_of(last)?).0,
        };
        let mut scored = Vec::with_capacity(candidates.len());
        for c in candidates {
            let id = c.as_ref();
            let r = row_of(id)?;
            let y = match stored(id) {
                Some(a) => self.next_factors.row(a).to_vec(),
                None => self.mapped_vectors(features, r).1,
            };
            scored.push((r, id.to_string(), numerics::score_unchecked(&u, &x, &y)));
        }
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        Ok(scored.into_iter().map(|(_, id, s)| (id, s)).collect())
    }

    /// The squared-loss objective over `instances` (indexed by this model's
    /// user/article spaces) using the effective article vectors.
    /// `features` must be row-aligned with the model's article index.
    pub fn objective(&self, instances: &[TrainingInstance], features: &FeatureMatrix) -> Result<f64> {
        let (last, next) = if self.kind == ModelKind::Oord {
            if features.len() != self.articles.len() {
                return Err(Error::Input("features not aligned with model articles".into()));
            }
            (features.map_all(&self.psi_last), features.map_all(&self.psi_next))
        } else {
            (self.last_factors.clone(), self.next_factors.clone())
        };
        Ok(als::objective_terms(
            instances,
            |inst| {
                numerics::score_unchecked(
                    self.user_factors.row(inst.user),
                    last.row(inst.last),
                    next.row(inst.next),
                )
            },
            [
                (self.hyper.reg_user, &self.user_factors),
                (self.hyper.reg_last, &last),
                (self.hyper.reg_next, &next),
            ],
        ))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = ModelManifest {
            kind: self.kind,
            hyper: self.hyper.clone(),
            latent_dim: self.latent_dim(),
            feature_dim: self.psi_last.rows(),
            users: self.users.ids().to_vec(),
            articles: self.articles.ids().to_vec(),
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        let mats = [
            &self.user_factors,
            &self.last_factors,
            &self.next_factors,
            &self.psi_last,
            &self.psi_next,
        ];
        for (name, m) in MATRIX_FILES.iter().zip(mats) {
            m.save(&dir.join(name))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<FactorModel> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: ModelManifest = serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        let load = |name: &str| Matrix::load(&dir.join(name));
        let model = FactorModel {
            kind: manifest.kind,
            hyper: manifest.hyper,
            users: IdIndex::from_ids(manifest.users)?,
            articles: IdIndex::from_ids(manifest.articles)?,
            user_factors: load(MATRIX_FILES[0])?,
            last_factors: load(MATRIX_FILES[1])?,
            next_factors: load(MATRIX_FILES[2])?,
            psi_last: load(MATRIX_FILES[3])?,
            psi_next: load(MATRIX_FILES[4])?,
        };
        let d = manifest.latent_dim;
        let shapes_ok = model.user_factors.rows() == model.users.len()
            && model.last_factors.rows() == model.articles.len()
            && model.next_factors.rows() == model.articles.len()
            && model.psi_last.rows() == manifest.feature_dim
            && model.psi_next.rows() == manifest.feature_dim
            && [
                &model.user_factors,
                &model.last_factors,
                &model.next_factors,
                &model.psi_last,
                &model.psi_next,
            ]
            .iter()
            .all(|m| m.cols() == d);
        if !shapes_ok {
            return Err(Error::format(
                dir.display().to_string(),
                "matrix shapes disagree with manifest",
            ));
        }
        Ok(model)
    }
}

/// Samples negatives for `train`, aligns `features` (catalog level) to the
/// train article index, and runs the trainer for `kind`.
pub fn fit(
    kind: ModelKind,
    train: &TripletSet,
    features: &FeatureMatrix,
    hyper: &Hyperparams,
) -> Result<FactorModel> {
    hyper.validate()?;
    let data = sample_negatives(train, hyper.negatives, derive_seed(hyper.seed, STAGE_NEGATIVES))?;
    let aligned = features.select(train.articles.ids())?;
    let (user_factors, last_factors, next_factors, psi_last, psi_next) = match kind {
        ModelKind::Almm | ModelKind::Oord => {
            let fit = if kind == ModelKind::Almm {
                almm_train(&data, &aligned, hyper)?
            } else {
                oord_train(&data, &aligned, hyper)?
            };
            (
                fit.factors.users,
                fit.factors.last,
                fit.factors.next,
                fit.psi_last,
                fit.psi_next,
            )
        }
        ModelKind::Forbes => {
            let p = forbes_train(&data, &aligned, hyper)?;
            let last = aligned.map_all(&p.psi_last);
            let next = aligned.map_all(&p.psi_next);
            (p.users, last, next, p.psi_last, p.psi_next)
        }
    };
    Ok(FactorModel {
        kind,
        hyper: hyper.clone(),
        users: train.users.clone(),
        articles: train.articles.clone(),
        user_factors,
        last_factors,
        next_factors,
        psi_last,
        psi_next,
    })
}

/// Score of every candidate row for one query, identical to [`FactorModel::predict`].
pub(crate) fn score_rows(user: &[f64], last: &[f64], items: &ItemVectors, rows: &[usize]) -> Vec<f64> {
    rows.iter()
        .map(|&r| numerics::score_unchecked(user, last, items.next.row(r)))
        .collect()
}
