//! Per-article content matrices: TF-IDF fitted on the catalog, or dense
//! embeddings computed elsewhere and loaded from a text file.

mod tokenize;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use tokenize::{is_stopword, tokenize};

use crate::error::{Error, Result};
use crate::ingest::ArticleCatalog;
use crate::numerics::{self, add_diagonal, cholesky_solve, cosine_distance_from_parts, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub min_token_len: usize,
    pub max_vocab: usize,
    pub stopwords: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        TfidfConfig {
            min_token_len: 2,
            max_vocab: 5000,
            stopwords: true,
        }
    }
}

/// Fitted TF-IDF vocabulary. Column `c` holds `terms[c]` with weight `idf[c]`;
/// terms are stored in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vectorizer {
    pub config: TfidfConfig,
    pub n_documents: usize,
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    columns: HashMap<String, usize>,
}

impl Vectorizer {
    fn new(config: TfidfConfig, n_documents: usize, terms: Vec<String>, idf: Vec<f64>) -> Self {
        let columns = terms
            .iter()
            .enumerate()
            .map(|(c, t)| (t.clone(), c))
            .collect();
        Vectorizer {
            config,
            n_documents,
            terms,
            idf,
            columns,
        }
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.columns.get(term).copied()
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("vectorizer serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Vectorizer> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Vectorizer = serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        if raw.terms.len() != raw.idf.len() {
            return Err(Error::format(
                path.display().to_string(),
                "terms and idf lengths differ",
            ));
        }
        Ok(Vectorizer::new(raw.config, raw.n_documents, raw.terms, raw.idf))
    }

    fn tokens(&self, text: &str) -> Vec<String> {
        tokenize(text, self.config.min_token_len, self.config.stopwords)
    }
}

/// Fits document frequencies over `title + abstract` of every article and
/// keeps the `max_vocab` most frequent terms, ties broken lexicographically.
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
pub fn fit_tfidf(catalog: &ArticleCatalog, config: &TfidfConfig) -> Result<Vectorizer> {
    if catalog.is_empty() {
        return Err(Error::EmptyInput("cannot fit TF-IDF on an empty catalog".into()));
    }
    let mut df: HashMap<String, usize> = HashMap::new();
    for article in catalog.iter() {
        let mut tokens = tokenize(&article.document(), config.min_token_len, config.stopwords);
        tokens.sort_unstable();
        tokens.dedup();
        for t in tokens {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(config.max_vocab);
    ranked.sort_unstable_by(|a, b| a.0.cmp(&b.0));

    let n = catalog.len() as f64;
    let idf = ranked
        .iter()
        .map(|(_, d)| ((1.0 + n) / (1.0 + *d as f64)).ln() + 1.0)
        .collect();
    let terms = ranked.into_iter().map(|(t, _)| t).collect();
    Ok(Vectorizer::new(config.clone(), catalog.len(), terms, idf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Tfidf,
    External,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Tfidf => "tfidf",
            FeatureKind::External => "external",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(FeatureKind::Tfidf),
            "external" => Ok(FeatureKind::External),
            other => Err(Error::Parameter(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Sparse row: strictly increasing column indices with their values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn dot(&self, other: &SparseRow) -> f64 {
        let (mut a, mut b, mut s) = (0, 0, 0.0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Sparse(Vec<SparseRow>),
    Dense(Matrix),
}

/// Article-aligned content vectors `A`, one row per article.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    kind: FeatureKind,
    dim: usize,
    ids: Vec<String>,
    row_index: HashMap<String, usize>,
    storage: Storage,
}

impl FeatureMatrix {
    fn build(kind: FeatureKind, dim: usize, ids: Vec<String>, storage: Storage) -> Self {
        let row_index = ids.iter().enumerate().map(|(r, id)| (id.clone(), r)).collect();
        FeatureMatrix {
            kind,
            dim,
            ids,
            row_index,
            storage,
        }
    }

    /// Wraps a dense matrix whose rows belong to `ids`.
    pub fn from_dense(kind: FeatureKind, ids: Vec<String>, matrix: Matrix) -> Result<Self> {
        if ids.len() != matrix.rows() {
            return Err(Error::Input(format!(
                "{} ids for {} feature rows",
                ids.len(),
                matrix.rows()
            )));
        }
        let dim = matrix.cols();
        Ok(Self::build(kind, dim, ids, Storage::Dense(matrix)))
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.row_index.get(id).copied()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Calls `f(column, value)` for every stored entry of row `r`.
    #[inline]
    pub fn for_each_entry(&self, r: usize, mut f: impl FnMut(usize, f64)) {
        match &self.storage {
            Storage::Sparse(rows) => {
                let row = &rows[r];
                for (&c, &v) in row.indices.iter().zip(&row.values) {
                    f(c, v);
                }
            }
            Storage::Dense(m) => {
                for (c, &v) in m.row(r).iter().enumerate() {
                    f(c, v);
                }
            }
        }
    }

    pub fn dense_row(&self, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.for_each_entry(r, |c, v| out[c] = v);
        out
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        match &self.storage {
            Storage::Sparse(rows) => rows[r].norm(),
            Storage::Dense(m) => numerics::dot(m.row(r), m.row(r)).sqrt(),
        }
    }

    /// Cosine distance between two rows, with the zero-row convention of
    /// [`numerics::cosine_distance`].
    pub fn cosine_distance(&self, a: usize, b: usize) -> f64 {
        let ab = match &self.storage {
            Storage::Sparse(rows) => rows[a].dot(&rows[b]),
            Storage::Dense(m) => numerics::dot(m.row(a), m.row(b)),
        };
        cosine_distance_from_parts(ab, self.row_norm(a), self.row_norm(b))
    }

    /// `out = Ψᵀ A_r` for an `m × d` mapping `Ψ`.
    #[inline]
    pub fn map_row_into(&self, r: usize, psi: &Matrix, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.for_each_entry(r, |c, v| {
            if v != 0.0 {
                numerics::axpy(v, psi.row(c), out);
            }
        });
    }

    /// `A Ψ`, one mapped latent row per feature row.
    pub fn map_all(&self, psi: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.len(), psi.cols());
        for r in 0..self.len() {
            self.map_row_into(r, psi, out.row_mut(r));
        }
        out
    }

    /// Rows for `ids`, in that order.
    pub fn select<S: AsRef<str>>(&self, ids: &[S]) -> Result<FeatureMatrix> {
        let mut missing = Vec::new();
        let rows: Vec<usize> = ids
            .iter()
            .filter_map(|id| {
                let r = self.row_of(id.as_ref());
                if r.is_none() {
                    missing.push(id.as_ref().to_string());
                }
                r
            })
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingArticles(missing));
        }
        let storage = match &self.storage {
            Storage::Sparse(all) => Storage::Sparse(rows.iter().map(|&r| all[r].clone()).collect()),
            Storage::Dense(m) => {
                let mut out = Matrix::zeros(rows.len(), self.dim);
                for (k, &r) in rows.iter().enumerate() {
                    out.row_mut(k).copy_from_slice(m.row(r));
                }
                Storage::Dense(out)
            }
        };
        let ids = ids.iter().map(|s| s.as_ref().to_string()).collect();
        Ok(Self::build(self.kind, self.dim, ids, storage))
    }

    pub fn to_dense(&self) -> Matrix {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(_) => {
                let mut out = Matrix::zeros(self.len(), self.dim);
                for r in 0..self.len() {
                    self.for_each_entry(r, |c, v| out.set(r, c, v));
                }
                out
            }
        }
    }

    /// Ridge regression of `targets` (row-aligned with this matrix) on the
    /// feature rows: the mapping `Ψ` minimizing `‖AΨ − T‖² + λ‖Ψ‖²`.
    ///
    /// Sparse storage builds the Gram matrices from the nonzeros directly and
    /// follows the same primal/dual choice as [`numerics::ridge_solve`].
    pub fn ridge_map(&self, targets: &Matrix, lambda: f64) -> Result<Matrix> {
        let rows = match &self.storage {
            Storage::Dense(m) => return numerics::ridge_solve(m, targets, lambda),
            Storage::Sparse(rows) => rows,
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Input(format!("ridge lambda must be >= 0, got {lambda}")));
        }
        if rows.len() != targets.rows() {
            return Err(Error::Input(format!(
                "{} feature rows but {} target rows",
                rows.len(),
                targets.rows()
            )));
        }
        if !targets.is_finite() {
            return Err(Error::Input("ridge targets contain non-finite values".into()));
        }
        let (n, m, d) = (rows.len(), self.dim, targets.cols());
        if lambda > 0.0 && n < m {
            let mut kernel = Matrix::zeros(n, n);
            for a in 0..n {
                for b in a..n {
                    let v = rows[a].dot(&rows[b]);
                    kernel.set(a, b, v);
                    kernel.set(b, a, v);
                }
            }
            add_diagonal(&mut kernel, lambda);
            let alpha = cholesky_solve(&kernel, targets, true)?;
            let mut psi = Matrix::zeros(m, d);
            for (r, row) in rows.iter().enumerate() {
                for (&c, &v) in row.indices.iter().zip(&row.values) {
                    numerics::axpy(v, alpha.row(r), psi.row_mut(c));
                }
            }
            return Ok(psi);
        }
        let mut normal = Matrix::zeros(m, m);
        let mut rhs = Matrix::zeros(m, d);
        for (r, row) in rows.iter().enumerate() {
            for (ka, (&ca, &va)) in row.indices.iter().zip(&row.values).enumerate() {
                for (&cb, &vb) in row.indices[ka..].iter().zip(&row.values[ka..]) {
                    let cur = normal.get(ca, cb);
                    normal.set(ca, cb, cur + va * vb);
                }
                numerics::axpy(va, targets.row(r), rhs.row_mut(ca));
            }
        }
        for a in 0..m {
            for b in 0..a {
                let v = normal.get(b, a);
                normal.set(a, b, v);
            }
        }
        add_diagonal(&mut normal, lambda);
        cholesky_solve(&normal, &rhs, lambda > 0.0)
    }
}

/// Raw term counts times idf, then L2-normalized. Out-of-vocabulary terms are
/// ignored; an article with none left gets an all-zero row.
pub fn transform(vectorizer: &Vectorizer, catalog: &ArticleCatalog) -> FeatureMatrix {
    let rows = catalog
        .iter()
        .map(|article| {
            let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
            for t in vectorizer.tokens(&article.document()) {
                if let Some(c) = vectorizer.column(&t) {
                    *counts.entry(c).or_default() += 1.0;
                }
            }
            let mut row = SparseRow {
                indices: counts.keys().copied().collect(),
                values: counts.iter().map(|(&c, &n)| n * vectorizer.idf[c]).collect(),
            };
            let norm = row.norm();
            if norm > 0.0 {
                row.values.iter_mut().for_each(|v| *v /= norm);
            }
            row
        })
        .collect();
    FeatureMatrix::build(
        FeatureKind::Tfidf,
        vectorizer.dim(),
        catalog.ids().map(str::to_string).collect(),
        Storage::Sparse(rows),
    )
}

/// Loads `#dim <m>` followed by `news_id<TAB>v1 ... vm` rows, aligned to the
/// catalog order. Ids outside the catalog are ignored.
pub fn load_external_embeddings(path: &Path, catalog: &ArticleCatalog) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ctx = |line: usize| format!("{}:{}", path.display(), line);
    let mut lines = BufReader::new(file).lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(ctx(1), "empty embedding file")),
    };
    let dim: usize = header
        .trim()
        .strip_prefix("#dim")
        .and_then(|rest| rest.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::format(ctx(1), "expected header `#dim <m>`"))?;

    let mut matrix = Matrix::zeros(catalog.len(), dim);
    let mut filled = vec![false; catalog.len()];
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (id, values) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(ctx(n + 1), "expected `id<TAB>values`"))?;
        let parsed = values
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format(ctx(n + 1), format!("bad value: {e}")))?;
        if parsed.len() != dim {
            return Err(Error::format(
                ctx(n + 1),
                format!("row for {id} has {} values, header says {dim}", parsed.len()),
            ));
        }
        if parsed.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(ctx(n + 1), format!("non-finite value for {id}")));
        }
        let Some(r) = catalog.position(id) else {
            continue;
        };
        if filled[r] {
            return Err(Error::format(ctx(n + 1), format!("duplicate row for {id}")));
        }
        filled[r] = true;
        matrix.row_mut(r).copy_from_slice(&parsed);
    }
    let missing: Vec<String> = catalog
        .ids()
        .zip(&filled)
        .filter(|(_, &f)| !f)
        .map(|(id, _)| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArticles(missing));
    }
    FeatureMatrix::from_dense(
        FeatureKind::External,
        catalog.ids().map(str::to_string).collect(),
        matrix,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Article;

    fn catalog(docs: &[&str]) -> ArticleCatalog {
        let mut c = ArticleCatalog::new();
        for (k, d) in docs.iter().enumerate() {
            c.insert(Article {
                id: format!("N{k}"),
                category: "c".into(),
                subcategory: "s".into(),
                title: d.to_string(),
                abstract_text: String::new(),
            });
        }
        c
    }

    fn plain() -> TfidfConfig {
        TfidfConfig {
            stopwords: false,
            ..TfidfConfig::default()
        }
    }

    #[test]
    fn single_document_has_unit_idf() {
        let v = fit_tfidf(&catalog(&["alpha beta"]), &plain()).unwrap();
        assert_eq!(v.idf, vec![1.0, 1.0]);
    }

    #[test]
    fn idf_follows_smoothed_formula() {
        let v = fit_tfidf(&catalog(&["aa bb", "aa cc", "aa"]), &plain()).unwrap();
        assert_eq!(v.idf_of("aa"), Some(1.0));
        assert!((v.idf_of("bb").unwrap() - 1.6931471805599454).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_cap_breaks_ties_lexicographically() {
        let cfg = TfidfConfig {
            max_vocab: 2,
            ..plain()
        };
        let v = fit_tfidf(&catalog(&["aa bb cc", "aa bb cc", "aa"]), &cfg).unwrap();
        assert_eq!(v.terms, vec!["aa", "bb"]);
    }

    #[test]
    fn empty_catalog_rejected() {
        assert!(matches!(
            fit_tfidf(&ArticleCatalog::new(), &plain()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn transform_counts_and_normalizes() {
        let cat = catalog(&["aa aa bb", "zz"]);
        let mut v = fit_tfidf(&catalog(&["aa bb"]), &plain()).unwrap();
        v.idf = vec![1.0, 1.0];
        let a = transform(&v, &cat);
        let row = a.dense_row(0);
        let s5 = 5f64.sqrt();
        assert!((row[0] - 2.0 / s5).abs() < 1e-15 && (row[1] - 1.0 / s5).abs() < 1e-15);
        assert_eq!(a.dense_row(1), vec![0.0, 0.0]);
        assert_eq!(a.row_norm(1), 0.0);
    }

    #[test]
    fn sparse_ridge_matches_dense() {
        let cat = catalog(&["aa bb cc", "bb dd", "cc dd ee", "aa ee", "bb cc"]);
        let v = fit_tfidf(&cat, &plain()).unwrap();
        let a = transform(&v, &cat);
        let targets = Matrix::from_rows(&[
            vec![0.1, 0.2],
            vec![-0.3, 0.5],
            vec![0.7, -0.1],
            vec![0.0, 0.4],
            vec![0.2, 0.2],
        ])
        .unwrap();
        let dense = a.to_dense();
        for lambda in [0.5, 2.0] {
            let sparse = a.ridge_map(&targets, lambda).unwrap();
            let reference = numerics::ridge_solve(&dense, &targets, lambda).unwrap();
            for (x, y) in sparse.as_slice().iter().zip(reference.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        // fewer rows than columns: dual path
        let few = a.select(&["N0", "N1"]).unwrap();
        let t2 = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let sparse = few.ridge_map(&t2, 0.3).unwrap();
        let reference = numerics::ridge_solve(&few.to_dense(), &t2, 0.3).unwrap();
        for (x, y) in sparse.as_slice().iter().zip(reference.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn vectorizer_persists() {
        let dir = tempfile::tempdir().unwrap();
        let v = fit_tfidf(&catalog(&["aa bb", "bb cc"]), &plain()).unwrap();
        let path = dir.path().join("v.json");
        v.save(&path).unwrap();
        let back = Vectorizer::load(&path).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.column("cc"), Some(2));
    }
}
