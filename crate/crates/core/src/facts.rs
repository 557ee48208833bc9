//! Per-fact scores: institutionness (temporal h-index against the
//! window's average fact rate) and burstiness (two-state cost improvement).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::corpus::{Fact, GroupId, Practice};
use crate::exec::ExecMode;
use crate::stream::CultureSet;

/// Upper clamp on the burst-state rate so that `ln(1 − p₁)` stays finite.
pub const BURST_RATE_EPSILON: f64 = 1e-9;

/// How a window's reference count is compared with the average rate `h0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstitutionVariant {
    /// Window qualifies for index `h` when `r ≥ h / h0`.
    #[default]
    Literal,
    /// Window qualifies for index `h` when `r / h0 ≥ h`.
    Normalized,
}

impl std::str::FromStr for InstitutionVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "literal" => Ok(InstitutionVariant::Literal),
            "normalized" => Ok(InstitutionVariant::Normalized),
            other => Err(format!(
                "unknown institutionness variant {other:?} (expected literal|normalized)"
            )),
        }
    }
}

impl InstitutionVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            InstitutionVariant::Literal => "literal",
            InstitutionVariant::Normalized => "normalized",
        }
    }

    /// Whether a window with `refs` references and average rate `h0`
    /// supports index `h`. Windows without a defined rate never do.
    pub fn qualifies(self, refs: u64, h0: Option<f64>, h: usize) -> bool {
        let Some(h0) = h0 else { return false };
        match self {
            InstitutionVariant::Literal => refs as f64 >= h as f64 / h0,
            InstitutionVariant::Normalized => refs as f64 / h0 >= h as f64,
        }
    }
}

/// References to one fact by one group, per window (`r`), against the
/// group's total references in that practice (`d`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactSeries {
    pub group: GroupId,
    pub practice: Practice,
    pub fact: Fact,
    pub r: Vec<u64>,
    pub d: Vec<u64>,
}

impl FactSeries {
    pub fn is_valid(&self) -> bool {
        self.r.len() == self.d.len() && self.r.iter().zip(&self.d).all(|(r, d)| r <= d)
    }
}

/// One series per (group, fact) referenced at least once in the practice.
pub fn fact_series(set: &CultureSet, practice: Practice) -> Vec<FactSeries> {
    let n = set.spec.count;
    let mut totals: BTreeMap<&GroupId, Vec<u64>> = BTreeMap::new();
    let mut refs: BTreeMap<(&GroupId, &Fact), Vec<u64>> = BTreeMap::new();
    for v in set.practice(practice) {
        totals.entry(&v.group).or_insert_with(|| vec![0; n])[v.window - 1] = v.total;
        for (fact, &c) in &v.counts {
            refs.entry((&v.group, fact)).or_insert_with(|| vec![0; n])[v.window - 1] = c;
        }
    }
    refs.into_iter()
        .map(|((group, fact), r)| FactSeries {
            group: group.clone(),
            practice,
            fact: fact.clone(),
            r,
            d: totals[group].clone(),
        })
        .collect()
}

/// Average references per distinct fact in window `t` (1-based), pooled
/// over all groups. `None` when nothing was referenced.
pub fn average_rate(series: &[FactSeries], window: usize) -> Option<f64> {
    let mut total = 0u64;
    let mut facts: BTreeSet<&Fact> = BTreeSet::new();
    for s in series {
        let r = s.r.get(window - 1).copied().unwrap_or(0);
        if r > 0 {
            total += r;
            facts.insert(&s.fact);
        }
    }
    (total > 0).then(|| total as f64 / facts.len() as f64)
}

pub fn average_rates(series: &[FactSeries], windows: usize) -> Vec<Option<f64>> {
    (1..=windows).map(|t| average_rate(series, t)).collect()
}

/// Largest `h` such that at least `h` windows qualify, scanning `h` from
/// the number of windows down to 0.
pub fn institutionness(r: &[u64], h0: &[Option<f64>], variant: InstitutionVariant) -> usize {
    let n = r.len();
    (0..=n)
        .rev()
        .find(|&h| {
            h == 0
                || r.iter()
                    .zip(h0)
                    .filter(|(&refs, &rate)| variant.qualifies(refs, rate, h))
                    .count()
                    >= h
        })
        .unwrap_or(0)
}

fn xlogy(k: u64, p: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * p.ln()
    }
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Base and burst-state rates `(p₀, p₁)` with `p_s = (R/D)·2^s`, `p₁`
/// clamped below 1. `None` when the fact was never referenced.
pub fn burst_rates(r: &[u64], d: &[u64]) -> Option<(f64, f64)> {
    let total_r: u64 = r.iter().sum();
    let total_d: u64 = d.iter().sum();
    if total_r == 0 || total_d == 0 {
        return None;
    }
    let p0 = total_r as f64 / total_d as f64;
    Some((p0, (2.0 * p0).min(1.0 - BURST_RATE_EPSILON)))
}

/// Negative log binomial likelihood of `r` out of `d` at rate `p`.
pub fn state_cost(r: u64, d: u64, p: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    -(ln_binomial(d, r) + xlogy(r, p) + xlogy(d - r, 1.0 - p))
}

/// Per-window `(γ₀, γ₁)` costs of the base and burst state.
pub fn burst_costs(series: &FactSeries) -> Option<Vec<(f64, f64)>> {
    let (p0, p1) = burst_rates(&series.r, &series.d)?;
    Some(
        series
            .r
            .iter()
            .zip(&series.d)
            .map(|(&r, &d)| (state_cost(r, d, p0), state_cost(r, d, p1)))
            .collect(),
    )
}

/// `γ₀ − γ₁` without the binomial coefficient, which cancels:
/// `r·ln(p₁/p₀) + (d − r)·ln((1 − p₁)/(1 − p₀))`.
pub fn improvement_closed_form(r: u64, d: u64, p0: f64, p1: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    let hits = if r == 0 {
        0.0
    } else {
        r as f64 * (p1 / p0).ln()
    };
    let misses = if d == r {
        0.0
    } else {
        (d - r) as f64 * ((1.0 - p1) / (1.0 - p0)).ln()
    };
    hits + misses
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BurstEpisode {
    pub fact: Fact,
    pub group: GroupId,
    pub practice: Practice,
    pub onset: usize,
    pub end: usize,
    pub weight: f64,
    /// Weight relative to the group's strongest burst in the practice.
    pub normalized: f64,
}

/// Maximal runs of strictly positive values, as 1-based inclusive
/// `(onset, end, sum)`.
pub fn positive_runs(values: &[f64]) -> Vec<(usize, usize, f64)> {
    let mut runs = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match (v > 0.0, current) {
            (true, None) => current = Some((i + 1, v)),
            (true, Some((start, sum))) => current = Some((start, sum + v)),
            (false, Some((start, sum))) => {
                runs.push((start, i, sum));
                current = None;
            }
            (false, None) => {}
        }
    }
    if let Some((start, sum)) = current {
        runs.push((start, values.len(), sum));
    }
    runs
}

/// Burst episodes of one fact with raw weights; `normalized` is left at 0.
pub fn burst_episodes(series: &FactSeries) -> Vec<BurstEpisode> {
    let Some(costs) = burst_costs(series) else {
        return Vec::new();
    };
    let improvement: Vec<f64> = costs.iter().map(|(g0, g1)| g0 - g1).collect();
    positive_runs(&improvement)
        .into_iter()
        .map(|(onset, end, weight)| BurstEpisode {
            fact: series.fact.clone(),
            group: series.group.clone(),
            practice: series.practice,
            onset,
            end,
            weight,
            normalized: 0.0,
        })
        .collect()
}

/// Divides each weight by the maximum weight within its (group, practice).
pub fn normalize_bursts(episodes: &mut [BurstEpisode]) {
    let mut max: BTreeMap<(GroupId, Practice), f64> = BTreeMap::new();
    for e in episodes.iter() {
        let m = max.entry((e.group.clone(), e.practice)).or_insert(0.0);
        *m = m.max(e.weight);
    }
    for e in episodes.iter_mut() {
        let m = max[&(e.group.clone(), e.practice)];
        e.normalized = if m > 0.0 { e.weight / m } else { 0.0 };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactScore {
    pub group: GroupId,
    pub practice: Practice,
    pub fact: Fact,
    pub institutionness: usize,
    pub episodes: Vec<BurstEpisode>,
}

impl FactScore {
    pub fn strongest(&self) -> Option<&BurstEpisode> {
        self.episodes
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
    }
}

/// Institutionness and normalized burst episodes for every (group, fact)
/// of a practice.
pub fn score_facts(
    set: &CultureSet,
    practice: Practice,
    variant: InstitutionVariant,
    exec: ExecMode,
) -> Vec<FactScore> {
    let series = fact_series(set, practice);
    let h0 = average_rates(&series, set.spec.count);
    let mut scores = exec.map(&series, |s| FactScore {
        group: s.group.clone(),
        practice,
        fact: s.fact.clone(),
        institutionness: institutionness(&s.r, &h0, variant),
        episodes: burst_episodes(s),
    });
    let mut flat: Vec<BurstEpisode> = scores
        .iter_mut()
        .flat_map(|s| s.episodes.drain(..))
        .collect();
    normalize_bursts(&mut flat);
    let mut it = flat.into_iter().peekable();
    for s in scores.iter_mut() {
        while let Some(e) = it.next_if(|e| e.group == s.group && e.fact == s.fact) {
            s.episodes.push(e);
        }
    }
    scores
}

/// Writes `group,practice,fact,I,B,onset,end`: one row per burst episode,
/// plus one row with empty onset/end for facts with I > 0 that never burst.
pub fn write_facts_csv<W: Write>(scores: &[FactScore], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "practice", "fact", "I", "B", "onset", "end"])?;
    for s in scores {
        let label = s.fact.label();
        let inst = s.institutionness.to_string();
        if s.episodes.is_empty() {
            if s.institutionness > 0 {
                w.write_record([
                    s.group.as_str(),
                    s.practice.as_str(),
                    &label,
                    &inst,
                    "0",
                    "",
                    "",
                ])?;
            }
            continue;
        }
        for e in &s.episodes {
            w.write_record([
                s.group.as_str(),
                s.practice.as_str(),
                &label,
                &inst,
                &e.normalized.to_string(),
                &e.onset.to_string(),
                &e.end.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{CultureVector, WindowSpec};
    use proptest::prelude::*;

    fn series(r: &[u64], d: &[u64]) -> FactSeries {
        FactSeries {
            group: GroupId::parse("G").unwrap(),
            practice: Practice::Tagging,
            fact: Fact::hashtag("x").unwrap(),
            r: r.to_vec(),
            d: d.to_vec(),
        }
    }

    fn brute_force(r: &[u64], h0: &[Option<f64>], v: InstitutionVariant) -> usize {
        (0..=r.len())
            .filter(|&h| {
                (0..r.len())
                    .filter(|&t| v.qualifies(r[t], h0[t], h))
                    .count()
                    >= h
            })
            .max()
            .unwrap()
    }

    #[test]
    fn average_rate_examples() {
        let one = [series(&[4], &[4])];
        assert_eq!(average_rate(&one, 1), Some(4.0));
        let mut b = series(&[2], &[4]);
        b.fact = Fact::hashtag("y").unwrap();
        assert_eq!(average_rate(&[series(&[2], &[4]), b.clone()], 1), Some(2.0));
        b.r = vec![1];
        assert_eq!(average_rate(&[series(&[3], &[4]), b], 1), Some(2.0));
        assert_eq!(average_rate(&[series(&[0], &[4])], 1), None);
    }

    #[test]
    fn average_rate_pools_groups() {
        let mut other = series(&[2], &[2]);
        other.group = GroupId::parse("H").unwrap();
        // same fact in two groups counts once in the denominator
        assert_eq!(average_rate(&[series(&[4], &[4]), other], 1), Some(6.0));
    }

    #[test]
    fn institutionness_examples() {
        let h0 = vec![Some(1.0); 13];
        assert_eq!(
            institutionness(&[0; 13], &h0, InstitutionVariant::Literal),
            0
        );
        let mut r = [0u64; 13];
        r[..5].copy_from_slice(&[5; 5]);
        assert_eq!(institutionness(&r, &h0, InstitutionVariant::Literal), 5);
        assert_eq!(brute_force(&r, &h0, InstitutionVariant::Literal), 5);
        assert_eq!(
            institutionness(&[100; 13], &h0, InstitutionVariant::Literal),
            13
        );
        assert_eq!(
            institutionness(&[100; 13], &h0, InstitutionVariant::Normalized),
            13
        );
    }

    #[test]
    fn variants_differ() {
        // h0 = 2: literal needs r >= h/2, normalized needs r >= 2h
        let h0 = vec![Some(2.0); 4];
        let r = [2, 2, 2, 2];
        assert_eq!(institutionness(&r, &h0, InstitutionVariant::Literal), 4);
        assert_eq!(institutionness(&r, &h0, InstitutionVariant::Normalized), 1);
    }

    #[test]
    fn undefined_rate_never_qualifies() {
        let h0 = [None, Some(1.0)];
        assert_eq!(
            institutionness(&[10, 10], &h0, InstitutionVariant::Literal),
            1
        );
    }

    #[test]
    fn baseline_rate_never_bursts() {
        let s = series(&[2, 4, 1, 3], &[20, 40, 10, 30]);
        for (g0, g1) in burst_costs(&s).unwrap() {
            assert!(g0 <= g1 + 1e-12);
        }
        assert!(burst_episodes(&s).is_empty());
    }

    #[test]
    fn hand_evaluated_improvement() {
        let s = series(&[1, 5], &[10, 10]);
        let costs = burst_costs(&s).unwrap();
        let imp = costs[1].0 - costs[1].1;
        let expected = 5.0 * 2f64.ln() + 5.0 * (4.0f64 / 7.0).ln();
        assert!((imp - 0.6675).abs() < 1e-3);
        assert!((imp - expected).abs() < 1e-12);
        assert!((improvement_closed_form(5, 10, 0.3, 0.6) - expected).abs() < 1e-12);
        let eps = burst_episodes(&s);
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].onset, eps[0].end), (2, 2));
    }

    #[test]
    fn saturated_rate_is_clamped() {
        let s = series(&[5, 5], &[5, 6]);
        let (p0, p1) = burst_rates(&s.r, &s.d).unwrap();
        assert!(p1 < 1.0 && p1 > p0);
        for (g0, g1) in burst_costs(&s).unwrap() {
            assert!(g0.is_finite() && g1.is_finite());
        }
        let full = series(&[3, 3], &[3, 3]);
        assert!(burst_costs(&full)
            .unwrap()
            .iter()
            .all(|(a, b)| a.is_finite() && b.is_finite()));
    }

    #[test]
    fn no_references_no_costs() {
        assert!(burst_costs(&series(&[0, 0], &[3, 3])).is_none());
        assert!(burst_episodes(&series(&[0, 0], &[3, 3])).is_empty());
    }

    #[test]
    fn empty_windows_cost_nothing() {
        let costs = burst_costs(&series(&[0, 3], &[0, 9])).unwrap();
        assert_eq!(costs[0], (0.0, 0.0));
    }

    #[test]
    fn runs() {
        assert_eq!(
            positive_runs(&[1.0, 2.0, -1.0, 0.5]),
            [(1, 2, 3.0), (4, 4, 0.5)]
        );
        assert_eq!(positive_runs(&[0.0, -1.0]), []);
        assert_eq!(positive_runs(&[-1.0, 3.0, -1.0]), [(2, 2, 3.0)]);
    }

    #[test]
    fn spike_gives_single_episode() {
        let s = series(&[1, 1, 1, 10, 1, 1], &[20; 6]);
        let eps = burst_episodes(&s);
        assert_eq!(eps.len(), 1);
        assert_eq!((eps[0].onset, eps[0].end), (4, 4));
    }

    #[test]
    fn normalization() {
        let mk = |w: f64, g: &str| BurstEpisode {
            fact: Fact::hashtag("x").unwrap(),
            group: GroupId::parse(g).unwrap(),
            practice: Practice::Tagging,
            onset: 1,
            end: 1,
            weight: w,
            normalized: 0.0,
        };
        let mut one = vec![mk(3.3, "A")];
        normalize_bursts(&mut one);
        assert_eq!(one[0].normalized, 1.0);
        let mut eps = vec![mk(2.0, "A"), mk(1.0, "A"), mk(7.0, "B")];
        normalize_bursts(&mut eps);
        assert_eq!(
            eps.iter().map(|e| e.normalized).collect::<Vec<_>>(),
            [1.0, 0.5, 1.0]
        );
        let mut none: Vec<BurstEpisode> = vec![];
        normalize_bursts(&mut none);
    }

    #[test]
    fn scoring_from_culture_set() {
        let spec = WindowSpec::weekly(0, 4).unwrap();
        let mut set = CultureSet::new(spec);
        let g = GroupId::parse("G").unwrap();
        for (w, pairs) in [
            (1, vec![("a", 5), ("b", 5)]),
            (2, vec![("a", 5), ("b", 5)]),
            (3, vec![("a", 5), ("b", 5), ("tv", 30)]),
            (4, vec![("a", 5), ("b", 5)]),
        ] {
            set.insert(CultureVector::from_counts(
                g.clone(),
                w,
                Practice::Tagging,
                pairs,
            ));
        }
        let scores = score_facts(
            &set,
            Practice::Tagging,
            InstitutionVariant::Literal,
            ExecMode::Sequential,
        );
        assert_eq!(scores.len(), 3);
        let tv = scores.iter().find(|s| s.fact.key == "tv").unwrap();
        assert_eq!(tv.episodes.len(), 1);
        assert_eq!((tv.episodes[0].onset, tv.episodes[0].end), (3, 3));
        assert_eq!(tv.episodes[0].normalized, 1.0);
        assert!(scores.iter().all(|s| s.institutionness <= 4));
        let par = score_facts(
            &set,
            Practice::Tagging,
            InstitutionVariant::Literal,
            ExecMode::Parallel,
        );
        assert_eq!(scores, par);
        let mut buf = Vec::new();
        write_facts_csv(&scores, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("group,practice,fact,I,B,onset,end\n"));
        assert!(text.contains("G,tagging,#tv,1,1,3,3\n"), "{text}");
    }

    proptest! {
        #[test]
        fn scan_matches_brute_force(
            r in proptest::collection::vec(0u64..=50, 13),
            h0 in proptest::collection::vec(proptest::option::weighted(0.9, 0.1f64..10.0), 13),
        ) {
            for v in [InstitutionVariant::Literal, InstitutionVariant::Normalized] {
                prop_assert_eq!(institutionness(&r, &h0, v), brute_force(&r, &h0, v));
            }
        }

        #[test]
        fn institutionness_monotone(
            r in proptest::collection::vec(0u64..=30, 1..13),
            h0 in 0.2f64..5.0,
            bump in 0usize..13,
            by in 1u64..10,
        ) {
            let rates = vec![Some(h0); r.len()];
            let mut up = r.clone();
            let i = bump % r.len();
            up[i] += by;
            for v in [InstitutionVariant::Literal, InstitutionVariant::Normalized] {
                prop_assert!(institutionness(&up, &rates, v) >= institutionness(&r, &rates, v));
            }
        }

        #[test]
        fn log_gamma_route_matches_closed_form(
            pairs in proptest::collection::vec((0u64..200, 0u64..200), 1..13),
        ) {
            let d: Vec<u64> = pairs.iter().map(|(a, b)| a + b).collect();
            let r: Vec<u64> = pairs.iter().map(|(a, _)| *a).collect();
            let s = series(&r, &d);
            if let Some(costs) = burst_costs(&s) {
                let (p0, p1) = burst_rates(&r, &d).unwrap();
                for (t, (g0, g1)) in costs.iter().enumerate() {
                    let cf = improvement_closed_form(r[t], d[t], p0, p1);
                    prop_assert!((g0 - g1 - cf).abs() < 1e-9, "t={} {} vs {}", t, g0 - g1, cf);
                }
            }
        }

        #[test]
        fn episodes_cover_positive_windows(vals in proptest::collection::vec(-3.0f64..3.0, 0..20)) {
            let runs = positive_runs(&vals);
            for (t, v) in vals.iter().enumerate() {
                let covering = runs.iter().filter(|(a, b, _)| *a <= t + 1 && t < *b).count();
                prop_assert_eq!(covering, usize::from(*v > 0.0));
            }
        }

        #[test]
        fn argmax_invariant_under_scaling(
            rows in proptest::collection::vec(proptest::collection::vec(0u64..15, 6), 2..5),
            k in 2u64..5,
        ) {
            let d: Vec<u64> = (0..6).map(|t| rows.iter().map(|r| r[t]).sum::<u64>() + 5).collect();
            let build = |scale: u64| {
                let mut eps = Vec::new();
                for (i, r) in rows.iter().enumerate() {
                    let mut s = series(&r.iter().map(|x| x * scale).collect::<Vec<_>>(), &d.iter().map(|x| x * scale).collect::<Vec<_>>());
                    s.fact = Fact::hashtag(&format!("f{i}")).unwrap();
                    eps.extend(burst_episodes(&s));
                }
                normalize_bursts(&mut eps);
                eps
            };
            let base = build(1);
            let scaled = build(k);
            let top = |eps: &[BurstEpisode]| eps.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).map(|e| (e.fact.clone(), e.onset, e.end));
            prop_assert!(base.iter().all(|e| e.normalized > 0.0 && e.normalized <= 1.0));
            // improvements scale linearly in k, so the sign pattern and argmax are preserved
            prop_assert_eq!(base.len(), scaled.len());
            let unique_max = {
                let m = base.iter().map(|e| e.weight).fold(0.0, f64::max);
                base.iter().filter(|e| (e.weight - m).abs() < 1e-9 * m.max(1.0)).count() == 1
            };
            if unique_max {
                prop_assert_eq!(top(&base), top(&scaled));
            }
        }
    }
}
