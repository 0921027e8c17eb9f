use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TrainingInstance, TrainingSet};
use crate::error::{Error, Result};
use crate::transitions::TripletSet;

const MAX_TRIES: usize = 100;

/// Pairs every positive triplet with up to `per_positive` sampled negatives
/// `(u, i, j′)`, where `j′` is drawn uniformly from the set's articles with
/// `j′ ∉ {i, j}` and `(u, i, j′)` not itself a positive. A draw that keeps
/// failing for 100 tries is skipped.
///
/// Instances come out as each positive followed by its negatives.
pub fn sample_negatives(triplets: &TripletSet, per_positive: usize, seed: u64) -> Result<TrainingSet> {
    if per_positive == 0 {
        return Err(Error::Parameter("negatives per positive must be >= 1".into()));
    }
    let n_articles = triplets.articles.len();
    if n_articles < 3 {
        return Err(Error::DegenerateInput(format!(
            "negative sampling needs at least 3 articles, got {n_articles}"
        )));
    }
    let positives: HashSet<(usize, usize, usize)> = triplets
        .triplets
        .iter()
        .map(|t| (t.user, t.last, t.next))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut instances = Vec::with_capacity(triplets.len() * (per_positive + 1));
    for t in &triplets.triplets {
        instances.push(TrainingInstance {
            user: t.user,
            last: t.last,
            next: t.next,
            target: 1.0,
            weight: t.confidence,
        });
        for _ in 0..per_positive {
            for _ in 0..MAX_TRIES {
                let candidate = rng.random_range(0..n_articles);
                if candidate == t.next
                    || candidate == t.last
                    || positives.contains(&(t.user, t.last, candidate))
                {
                    continue;
                }
                instances.push(TrainingInstance {
                    user: t.user,
                    last: t.last,
                    next: candidate,
                    target: 0.0,
                    weight: 1.0,
                });
                break;
            }
        }
    }
    Ok(TrainingSet {
        instances,
        n_users: triplets.users.len(),
        n_articles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_articles() -> TripletSet {
        let mut set = TripletSet::from_rows([("u", "A0", "A1", 1.1)]).unwrap();
        for k in 2..10 {
            set.articles.intern(&format!("A{k}"));
        }
        set
    }

    #[test]
    fn negatives_respect_exclusions() {
        let set = ten_articles();
        let data = sample_negatives(&set, 4, 9).unwrap();
        assert_eq!(data.instances.len(), 5);
        let negs: Vec<_> = data.instances.iter().filter(|x| x.target == 0.0).collect();
        assert_eq!(negs.len(), 4);
        for n in negs {
            assert!(n.next != 0 && n.next != 1);
            assert_eq!(n.weight, 1.0);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let set = ten_articles();
        assert_eq!(
            sample_negatives(&set, 4, 5).unwrap(),
            sample_negatives(&set, 4, 5).unwrap()
        );
    }

    #[test]
    fn two_article_universe_is_degenerate() {
        let set = TripletSet::from_rows([("u", "A", "B", 1.1)]).unwrap();
        assert!(matches!(
            sample_negatives(&set, 1, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn exhausted_candidates_are_skipped() {
        // every admissible j' for (u, A) is already a positive
        let set = TripletSet::from_rows([("u", "A", "B", 1.1), ("u", "A", "C", 1.1)]).unwrap();
        let data = sample_negatives(&set, 3, 1).unwrap();
        assert!(data.instances.iter().all(|x| x.target == 1.0));
    }
}
