//! Rating aggregation and final selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bandit::{standard_error, BanditError};
use crate::domain::{IdeaId, Likert7, OpinionCategory, OpinionRecord};

pub const DEFAULT_SE_PENALTY: f64 = 1.0;

/// Aggregated ratings of one idea. `grand = mean - penalty * se`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdeaScore {
    pub idea: IdeaId,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub grand: f64,
}

pub fn grand_score(
    idea: IdeaId,
    ratings: &[Likert7],
    penalty: f64,
) -> Result<IdeaScore, BanditError> {
    let se = standard_error(ratings)?;
    let mut values: Vec<f64> = ratings.iter().map(|r| r.as_f64()).collect();
    values.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(IdeaScore {
        idea,
        n: ratings.len(),
        mean,
        se,
        grand: mean - penalty * se,
    })
}

/// Scores every idea that has at least one rating, in idea order.
pub fn score_all(records: &[OpinionRecord], penalty: f64) -> Vec<IdeaScore> {
    let mut by_idea: BTreeMap<IdeaId, Vec<Likert7>> = BTreeMap::new();
    for rec in records {
        by_idea.entry(rec.idea).or_default().push(rec.final_rating);
    }
    by_idea
        .into_iter()
        .map(|(idea, ratings)| grand_score(idea, &ratings, penalty).expect("non-empty group"))
        .collect()
}

/// Best `n` ideas by grand score; ties go to the idea with more ratings, then
/// to the earlier idea.
pub fn top_n(scores: &[IdeaScore], n: usize) -> Vec<IdeaId> {
    let mut ranked: Vec<&IdeaScore> = scores.iter().collect();
    ranked.sort_by(|a, b| {
        b.grand
            .total_cmp(&a.grand)
            .then(b.n.cmp(&a.n))
            .then(a.idea.cmp(&b.idea))
    });
    let mut seen = std::collections::BTreeSet::new();
    ranked
        .into_iter()
        .filter(|s| seen.insert(s.idea))
        .take(n)
        .map(|s| s.idea)
        .collect()
}

/// One representative opinion per category: the strongest support, the
/// strongest objection and the earliest neutral one. Records for other
/// ideas are ignored.
pub fn exemplary_opinions(
    idea: IdeaId,
    records: &[OpinionRecord],
) -> BTreeMap<OpinionCategory, OpinionRecord> {
    let mut best: BTreeMap<OpinionCategory, &OpinionRecord> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.idea == idea) {
        let replace = match best.get(&rec.category) {
            None => true,
            Some(cur) => match rec.category {
                OpinionCategory::Support => rec.final_rating > cur.final_rating,
                OpinionCategory::Against => rec.final_rating < cur.final_rating,
                OpinionCategory::Neutral => false,
            },
        };
        if replace {
            best.insert(rec.category, rec);
        }
    }
    best.into_iter().map(|(k, v)| (k, v.clone())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::CollaboratorId;
    use proptest::prelude::*;

    fn ratings(v: &[i64]) -> Vec<Likert7> {
        v.iter().map(|&x| Likert7::new(x).unwrap()).collect()
    }

    fn record(idea: u64, author: &str, rating: i64) -> OpinionRecord {
        OpinionRecord::new(
            IdeaId(idea),
            CollaboratorId::new(author),
            format!("{author} thinks"),
            format!("{author} thinks"),
            Likert7::new(rating).unwrap(),
            0,
        )
    }

    fn score(idea: u64, n: usize, grand: f64) -> IdeaScore {
        IdeaScore {
            idea: IdeaId(idea),
            n,
            mean: grand,
            se: 0.0,
            grand,
        }
    }

    #[test]
    fn grand_examples() {
        let s = grand_score(IdeaId(0), &ratings(&[7, 7]), 1.0).unwrap();
        assert_eq!(s.grand, 7.0);
        let s = grand_score(IdeaId(0), &ratings(&[7, 1]), 1.0).unwrap();
        assert_eq!(s.mean, 4.0);
        assert!((s.grand - 1.0).abs() < 1e-9);
        let single = grand_score(IdeaId(0), &ratings(&[7]), 1.0).unwrap();
        let many = grand_score(IdeaId(1), &ratings(&[6, 6, 6, 6]), 1.0).unwrap();
        assert_eq!(single.grand, 4.0);
        assert_eq!(many.grand, 6.0);
        assert!(single.grand < many.grand);
        assert_eq!(
            grand_score(IdeaId(0), &[], 1.0),
            Err(BanditError::EmptyRatings)
        );
    }

    #[test]
    fn top_n_examples() {
        let scores: Vec<IdeaScore> = [3.0, 6.0, 1.0, 5.5, 4.0]
            .iter()
            .enumerate()
            .map(|(i, &g)| score(i as u64, 2, g))
            .collect();
        assert_eq!(top_n(&scores, 3), vec![IdeaId(1), IdeaId(3), IdeaId(4)]);
        let tied = vec![score(0, 2, 5.0), score(1, 4, 5.0)];
        assert_eq!(top_n(&tied, 1), vec![IdeaId(1)]);
        let tied = vec![score(3, 2, 5.0), score(1, 2, 5.0)];
        assert_eq!(top_n(&tied, 2), vec![IdeaId(1), IdeaId(3)]);
        assert_eq!(top_n(&scores[..2], 3).len(), 2);
    }

    #[test]
    fn exemplar_examples() {
        let records = vec![
            record(0, "a", 7),
            record(0, "b", 6),
            record(0, "c", 4),
            record(0, "d", 2),
        ];
        let ex = exemplary_opinions(IdeaId(0), &records);
        assert_eq!(ex[&OpinionCategory::Support].author.as_str(), "a");
        assert_eq!(ex[&OpinionCategory::Neutral].author.as_str(), "c");
        assert_eq!(ex[&OpinionCategory::Against].author.as_str(), "d");

        let records = vec![record(0, "a", 5), record(0, "b", 5)];
        let ex = exemplary_opinions(IdeaId(0), &records);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[&OpinionCategory::Support].author.as_str(), "a");

        assert!(exemplary_opinions(IdeaId(0), &[]).is_empty());
        assert!(exemplary_opinions(IdeaId(9), &records).is_empty());
    }

    #[test]
    fn score_all_groups_by_idea() {
        let records = vec![record(1, "a", 7), record(0, "a", 4), record(1, "b", 1)];
        let scores = score_all(&records, 1.0);
        assert_eq!(scores.len(), 2);
        assert_eq!(scores[0].idea, IdeaId(0));
        assert_eq!(scores[1].n, 2);
    }

    proptest! {
        #[test]
        fn grand_permutation_invariant(mut v in prop::collection::vec(1i64..=7, 1..20)) {
            let a = grand_score(IdeaId(0), &ratings(&v), 1.0).unwrap();
            v.reverse();
            let half = v.len() / 2;
            v.rotate_left(half);
            let b = grand_score(IdeaId(0), &ratings(&v), 1.0).unwrap();
            prop_assert_eq!(a.grand.to_bits(), b.grand.to_bits());
        }

        #[test]
        fn adding_the_mean_never_lowers_grand(value in 1i64..=7, extra in prop::collection::vec(-2i64..=2, 0..6)) {
            // build a rating set with an integer mean
            let mut v = vec![value];
            for d in extra {
                let (a, b) = (value + d, value - d);
                if (1..=7).contains(&a) && (1..=7).contains(&b) {
                    v.push(a);
                    v.push(b);
                }
            }
            let before = grand_score(IdeaId(0), &ratings(&v), 1.0).unwrap();
            prop_assert_eq!(before.mean, value as f64);
            v.push(value);
            let after = grand_score(IdeaId(0), &ratings(&v), 1.0).unwrap();
            prop_assert!(after.grand >= before.grand - 1e-12);
        }

        #[test]
        fn grand_decreases_in_se(penalty in 0.01f64..5.0) {
            // same mean (4), growing spread
            let sets = [[4, 4], [3, 5], [2, 6], [1, 7]];
            let grands: Vec<f64> = sets.iter().map(|s| grand_score(IdeaId(0), &ratings(s), penalty).unwrap().grand).collect();
            for w in grands.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }

        #[test]
        fn top_n_length_and_uniqueness(grands in prop::collection::vec(0.0f64..7.0, 0..30), n in 1usize..10) {
            let scores: Vec<IdeaScore> = grands.iter().enumerate().map(|(i, &g)| score(i as u64, 1 + i % 3, g)).collect();
            let top = top_n(&scores, n);
            prop_assert_eq!(top.len(), n.min(scores.len()));
            let mut dedup = top.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), top.len());
        }
    }
}
