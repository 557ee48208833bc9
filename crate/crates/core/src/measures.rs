//! Per-group, per-window practice measures: cultural focus (normalized
//! entropy), cultural similarity (mean pairwise cosine) and cultural
//! reproduction (extended rank-biased overlap between consecutive windows),
//! plus the reference frequency and cross-group average curves.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GroupId, Practice};
use crate::exec::ExecMode;
use crate::stream::{rank, CultureSet, CultureVector, RankedVector};

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("RBO persistence must satisfy 0 <= p < 1, got {0}")]
    InvalidPersistence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Focus,
    Similarity,
    Reproduction,
    Frequency,
}

impl Measure {
    pub const ALL: [Measure; 4] = [
        Measure::Focus,
        Measure::Similarity,
        Measure::Reproduction,
        Measure::Frequency,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::Focus => "focus",
            Measure::Similarity => "similarity",
            Measure::Reproduction => "reproduction",
            Measure::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SeriesGroup {
    Group(GroupId),
    Average,
}

impl fmt::Display for SeriesGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesGroup::Group(g) => write!(f, "{g}"),
            SeriesGroup::Average => f.write_str("AVERAGE"),
        }
    }
}

/// A scalar time series. `None` marks windows where the measure is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSeries {
    pub measure: Measure,
    pub practice: Practice,
    pub group: SeriesGroup,
    pub points: Vec<(usize, Option<f64>)>,
    /// Per-window population standard deviation; only set for the average.
    pub dispersion: Option<Vec<Option<f64>>>,
}

impl MeasureSeries {
    pub fn value_at(&self, window: usize) -> Option<f64> {
        self.points
            .iter()
            .find(|(w, _)| *w == window)
            .and_then(|(_, v)| *v)
    }
}

/// Persistence of the rank-biased overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RboParams {
    p: f64,
}

impl RboParams {
    pub const DEFAULT_P: f64 = 0.9;

    pub fn new(p: f64) -> Result<Self, MeasureError> {
        if !(0.0..1.0).contains(&p) {
            return Err(MeasureError::InvalidPersistence(p));
        }
        Ok(RboParams { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Default for RboParams {
    fn default() -> Self {
        RboParams { p: Self::DEFAULT_P }
    }
}

/// `1 − H/log2(n)` over a frequency distribution. A single fact has focus 1;
/// an empty distribution has none.
pub fn focus_of_counts<I: IntoIterator<Item = u64>>(counts: I) -> Option<f64> {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    match counts.len() {
        0 => None,
        1 => Some(1.0),
        n => {
            let total: u64 = counts.iter().sum();
            let total = total as f64;
            let entropy: f64 = counts
                .iter()
                .map(|&c| {
                    let p = c as f64 / total;
                    -p * p.log2()
                })
                .sum();
            Some((1.0 - entropy / (n as f64).log2()).clamp(0.0, 1.0))
        }
    }
}

pub fn focus(vector: &CultureVector) -> Option<f64> {
    focus_of_counts(vector.counts.values().copied())
}

/// Cosine of two count vectors aligned on the union of their facts.
pub fn pair_similarity(a: &CultureVector, b: &CultureVector) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (small, large) = if a.distinct() <= b.distinct() {
        (a, b)
    } else {
        (b, a)
    };
    let dot: u128 = small
        .counts
        .iter()
        .map(|(f, &n)| n as u128 * large.count_of(f) as u128)
        .sum();
    if dot == 0 {
        return 0.0;
    }
    let sq = |v: &CultureVector| -> f64 {
        v.counts
            .values()
            .map(|&n| (n as u128 * n as u128) as f64)
            .sum()
    };
    (dot as f64 / (sq(a).sqrt() * sq(b).sqrt())).min(1.0)
}

/// Unweighted mean similarity of `group` to every other group active in
/// the same window. `None` when the group is inactive or alone.
pub fn group_similarity(
    set: &CultureSet,
    group: &GroupId,
    window: usize,
    practice: Practice,
) -> Option<f64> {
    let own = set.get(group, window, practice)?;
    let others: Vec<f64> = set
        .in_window(practice, window)
        .into_iter()
        .filter(|v| v.group != *group)
        .map(|v| pair_similarity(own, v))
        .collect();
    if others.is_empty() {
        return None;
    }
    Some(others.iter().sum::<f64>() / others.len() as f64)
}

/// Extended rank-biased overlap of two ranked lists.
///
/// Agreement at depth `d` is `2·|top_d(a) ∩ top_d(b)| / (|top_d(a)| + |top_d(b)|)`,
/// prefixes truncating at each list's length. Agreement is summed with
/// weights `(1−p)·p^(d−1)` up to the joint depth `D = max(len)`, and the
/// remaining geometric tail `p^D` carries the agreement at `D`. Identical
/// lists score exactly 1 and disjoint lists 0.
///
/// The sum is evaluated as `A_D − (1−p)·Σ p^(d−1)·(A_D − A_d)`, which is
/// algebraically equal and exact at both ends of the range.
pub fn reproduction(a: &RankedVector, b: &RankedVector, params: RboParams) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let p = params.p();
    let (la, lb) = (a.len(), b.len());
    let depth = la.max(lb);
    let mut seen_a = HashSet::with_capacity(la);
    let mut seen_b = HashSet::with_capacity(lb);
    let mut overlap = 0usize;
    let mut agreement = Vec::with_capacity(depth);
    for d in 1..=depth {
        if let Some((x, _)) = a.entries.get(d - 1) {
            if seen_b.contains(x) {
                overlap += 1;
            }
            seen_a.insert(x);
        }
        if let Some((y, _)) = b.entries.get(d - 1) {
            if seen_a.contains(y) {
                overlap += 1;
            }
            seen_b.insert(y);
        }
        agreement.push(2.0 * overlap as f64 / (d.min(la) + d.min(lb)) as f64);
    }
    let final_agreement = agreement[depth - 1];
    let mut weight = 1.0;
    let mut deficit = 0.0;
    for a_d in &agreement {
        deficit += weight * (final_agreement - a_d);
        weight *= p;
    }
    (final_agreement - (1.0 - p) * deficit).clamp(0.0, 1.0)
}

/// Share of the convergent RBO weight carried by depths `1..=depth`:
/// `(1−p)·Σ p^(d−1) = 1 − p^depth`. For p = 0.9 and depth 10 this is ≈ 0.651.
pub fn rbo_depth_weight(p: f64, depth: usize) -> f64 {
    1.0 - p.powi(depth as i32)
}

/// Share of RBO weight attributed to the top `depth` *ranks* when each
/// rank's contribution is spread over every depth it appears in:
/// `1 − p^(k−1) + (1−p)/p · k · (ln(1/(1−p)) − Σ_{i<k} p^i / i)`.
/// For p = 0.9 and k = 10 this is ≈ 0.856, against 0.651 from
/// [`rbo_depth_weight`].
pub fn rbo_rank_weight(p: f64, depth: usize) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    let k = depth as f64;
    let partial: f64 = (1..depth).map(|i| p.powi(i as i32) / i as f64).sum();
    1.0 - p.powi(depth as i32 - 1) + (1.0 - p) / p * k * ((1.0 / (1.0 - p)).ln() - partial)
}

/// Per-window mean and population standard deviation over non-null values.
/// Windows are taken from the first series; all inputs share them.
pub fn average_series(series: &[MeasureSeries]) -> Option<MeasureSeries> {
    let first = series.first()?;
    let mut points = Vec::with_capacity(first.points.len());
    let mut dispersion = Vec::with_capacity(first.points.len());
    for (i, &(window, _)) in first.points.iter().enumerate() {
        let values: Vec<f64> = series
            .iter()
            .filter_map(|s| s.points.get(i).and_then(|p| p.1))
            .collect();
        if values.is_empty() {
            points.push((window, None));
            dispersion.push(None);
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        points.push((window, Some(mean)));
        dispersion.push(Some(var.sqrt()));
    }
    Some(MeasureSeries {
        measure: first.measure,
        practice: first.practice,
        group: SeriesGroup::Average,
        points,
        dispersion: Some(dispersion),
    })
}

/// All series of one practice. Each list holds one series per active group
/// (sorted) followed by the average, when any group is active.
#[derive(Debug, Clone, PartialEq)]
pub struct PracticeSeries {
    pub practice: Practice,
    pub focus: Vec<MeasureSeries>,
    pub similarity: Vec<MeasureSeries>,
    pub reproduction: Vec<MeasureSeries>,
    pub frequency: Vec<MeasureSeries>,
}

impl PracticeSeries {
    pub fn get(&self, measure: Measure) -> &[MeasureSeries] {
        match measure {
            Measure::Focus => &self.focus,
            Measure::Similarity => &self.similarity,
            Measure::Reproduction => &self.reproduction,
            Measure::Frequency => &self.frequency,
        }
    }
}

struct GroupRow {
    focus: Vec<(usize, Option<f64>)>,
    similarity: Vec<(usize, Option<f64>)>,
    reproduction: Vec<(usize, Option<f64>)>,
    frequency: Vec<(usize, Option<f64>)>,
}

fn group_row(set: &CultureSet, group: &GroupId, practice: Practice, params: RboParams) -> GroupRow {
    let windows: Vec<usize> = set.spec.windows().collect();
    let ranked: Vec<Option<RankedVector>> = windows
        .iter()
        .map(|&w| set.get(group, w, practice).and_then(|v| rank(v).ok()))
        .collect();
    GroupRow {
        focus: windows
            .iter()
            .map(|&w| (w, set.get(group, w, practice).and_then(focus)))
            .collect(),
        similarity: windows
            .iter()
            .map(|&w| (w, group_similarity(set, group, w, practice)))
            .collect(),
        reproduction: windows
            .iter()
            .skip(1)
            .map(|&w| {
                let value = match (&ranked[w - 2], &ranked[w - 1]) {
                    (Some(prev), Some(cur)) => Some(reproduction(prev, cur, params)),
                    _ => None,
                };
                (w, value)
            })
            .collect(),
        frequency: windows
            .iter()
            .map(|&w| (w, set.get(group, w, practice).map(|v| v.total as f64)))
            .collect(),
    }
}

/// Computes focus, similarity, reproduction and frequency series for one
/// practice. Reproduction points are labelled with the later window of
/// each consecutive pair, so `n` windows give `n − 1` points.
pub fn practice_series(
    set: &CultureSet,
    practice: Practice,
    params: RboParams,
    exec: ExecMode,
) -> PracticeSeries {
    let groups = set.groups(practice);
    let rows = exec.map(&groups, |g| group_row(set, g, practice, params));
    let mut out = PracticeSeries {
        practice,
        focus: Vec::new(),
        similarity: Vec::new(),
        reproduction: Vec::new(),
        frequency: Vec::new(),
    };
    let wrap = |measure, group: &GroupId, points| MeasureSeries {
        measure,
        practice,
        group: SeriesGroup::Group(group.clone()),
        points,
        dispersion: None,
    };
    for (g, row) in groups.iter().zip(rows) {
        out.focus.push(wrap(Measure::Focus, g, row.focus));
        out.similarity
            .push(wrap(Measure::Similarity, g, row.similarity));
        out.reproduction
            .push(wrap(Measure::Reproduction, g, row.reproduction));
        out.frequency
            .push(wrap(Measure::Frequency, g, row.frequency));
    }
    for list in [
        &mut out.focus,
        &mut out.similarity,
        &mut out.reproduction,
        &mut out.frequency,
    ] {
        if let Some(avg) = average_series(list) {
            list.push(avg);
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `group,window,value,sd`. Empty value means null; `sd` is filled
/// only on AVERAGE rows.
pub fn write_series_csv<W: Write>(series: &[MeasureSeries], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "window", "value", "sd"])?;
    for s in series {
        let group = s.group.to_string();
        for (i, &(window, value)) in s.points.iter().enumerate() {
            let sd = s
                .dispersion
                .as_ref()
                .and_then(|d| d.get(i).copied().flatten());
            w.write_record([
                group.as_str(),
                &window.to_string(),
                &fmt_opt(value),
                &fmt_opt(sd),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Fact;
    use proptest::prelude::*;

    fn g(name: &str) -> GroupId {
        GroupId::parse(name).unwrap()
    }

    fn cv(pairs: &[(&str, u64)]) -> CultureVector {
        CultureVector::from_counts(g("G"), 1, Practice::Tagging, pairs.iter().copied())
    }

    fn ranked(keys: &[&str]) -> RankedVector {
        RankedVector {
            entries: keys
                .iter()
                .map(|k| (Fact::hashtag(k).unwrap(), 1))
                .collect(),
        }
    }

    /// Direct evaluation of the weighted agreement sum plus frozen tail.
    fn rbo_oracle(a: &[&str], b: &[&str], p: f64) -> f64 {
        let depth = a.len().max(b.len());
        let agree = |d: usize| {
            let ta: HashSet<_> = a.iter().take(d).collect();
            let tb: HashSet<_> = b.iter().take(d).collect();
            2.0 * ta.intersection(&tb).count() as f64 / (ta.len() + tb.len()) as f64
        };
        let head: f64 = (1..=depth).map(|d| agree(d) * p.powi(d as i32 - 1)).sum();
        (1.0 - p) * head + agree(depth) * p.powi(depth as i32)
    }

    #[test]
    fn focus_examples() {
        assert_eq!(focus(&cv(&[("a", 5)])), Some(1.0));
        assert_eq!(
            focus(&cv(&[("a", 1), ("b", 1), ("c", 1), ("d", 1)])),
            Some(0.0)
        );
        let f = focus(&cv(&[("a", 3), ("b", 1)])).unwrap();
        assert!((f - 0.188_721_875_540_867).abs() < 1e-12, "{f}");
        assert_eq!(focus(&cv(&[])), None);
    }

    #[test]
    fn focus_monotone_in_split() {
        let mut last = -1.0;
        for k in 50..100u64 {
            let f = focus_of_counts([k, 100 - k]).unwrap();
            assert!(f > last || k == 50);
            last = f;
        }
    }

    #[test]
    fn cosine_examples() {
        let a = cv(&[("a", 1), ("b", 1)]);
        assert!((pair_similarity(&a, &a) - 1.0).abs() < 1e-15);
        assert_eq!(pair_similarity(&a, &cv(&[("c", 4)])), 0.0);
        assert!(
            (pair_similarity(&a, &cv(&[("a", 1)])) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12
        );
        assert_eq!(pair_similarity(&a, &cv(&[])), 0.0);
    }

    fn three_groups(vs: [&[(&str, u64)]; 3]) -> CultureSet {
        let spec = crate::stream::WindowSpec::weekly(0, 1).unwrap();
        let mut set = CultureSet::new(spec);
        for (name, pairs) in ["A", "B", "C"].iter().zip(vs) {
            set.insert(CultureVector::from_counts(
                g(name),
                1,
                Practice::Tagging,
                pairs.iter().copied(),
            ));
        }
        set
    }

    #[test]
    fn group_similarity_examples() {
        let same: &[(&str, u64)] = &[("x", 2), ("y", 1)];
        let set = three_groups([same, same, same]);
        for name in ["A", "B", "C"] {
            let s = group_similarity(&set, &g(name), 1, Practice::Tagging).unwrap();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let set = three_groups([&[("z", 1)], same, same]);
        assert_eq!(
            group_similarity(&set, &g("A"), 1, Practice::Tagging),
            Some(0.0)
        );
        assert_eq!(group_similarity(&set, &g("D"), 1, Practice::Tagging), None);
        // B~A = 0, B~C = 1
        assert!(
            (group_similarity(&set, &g("B"), 1, Practice::Tagging).unwrap() - 0.5).abs() < 1e-12
        );
    }

    #[test]
    fn lone_group_has_no_similarity() {
        let spec = crate::stream::WindowSpec::weekly(0, 1).unwrap();
        let mut set = CultureSet::new(spec);
        set.insert(CultureVector::from_counts(
            g("A"),
            1,
            Practice::Tagging,
            [("x", 1)],
        ));
        assert_eq!(group_similarity(&set, &g("A"), 1, Practice::Tagging), None);
    }

    #[test]
    fn rbo_examples() {
        let p = RboParams::default();
        assert_eq!(
            reproduction(&ranked(&["a", "b", "c"]), &ranked(&["a", "b", "c"]), p),
            1.0
        );
        assert_eq!(
            reproduction(&ranked(&["a", "b"]), &ranked(&["c", "d"]), p),
            0.0
        );
        let r = reproduction(&ranked(&["a", "b"]), &ranked(&["b", "a"]), p);
        assert!((r - 0.90).abs() < 1e-12, "{r}");
        assert!((rbo_oracle(&["a", "b"], &["b", "a"], 0.9) - 0.90).abs() < 1e-12);
    }

    #[test]
    fn rbo_uneven_lengths_match_oracle() {
        let p = RboParams::new(0.8).unwrap();
        let a = ["a", "b", "c", "d", "e"];
        let b = ["c", "a", "x"];
        let r = reproduction(&ranked(&a), &ranked(&b), p);
        assert!((r - rbo_oracle(&a, &b, 0.8)).abs() < 1e-12);
    }

    #[test]
    fn rbo_params() {
        assert!(RboParams::new(1.0).is_err());
        assert!(RboParams::new(-0.1).is_err());
        assert!(RboParams::new(f64::NAN).is_err());
        assert_eq!(RboParams::new(0.0).unwrap().p(), 0.0);
    }

    #[test]
    fn rbo_weight_interpretations() {
        assert!((rbo_depth_weight(0.9, 10) - 0.651_321_559_9).abs() < 1e-9);
        assert!((rbo_rank_weight(0.9, 10) - 0.855_585_446_7).abs() < 1e-9);
        // depth weight plus frozen tail is the full mass on identical lists
        let ten: Vec<String> = (0..10).map(|i| format!("f{i}")).collect();
        let keys: Vec<&str> = ten.iter().map(String::as_str).collect();
        let r = reproduction(&ranked(&keys), &ranked(&keys), RboParams::default());
        assert_eq!(r, rbo_depth_weight(0.9, 10) + 0.9f64.powi(10));
    }

    fn series(values: &[Option<f64>]) -> MeasureSeries {
        MeasureSeries {
            measure: Measure::Focus,
            practice: Practice::Tagging,
            group: SeriesGroup::Group(g("G")),
            points: values
                .iter()
                .enumerate()
                .map(|(i, v)| (i + 1, *v))
                .collect(),
            dispersion: None,
        }
    }

    #[test]
    fn averages() {
        let avg = average_series(&[series(&[Some(0.7), None])]).unwrap();
        assert_eq!(avg.points, [(1, Some(0.7)), (2, None)]);
        assert_eq!(avg.dispersion.as_ref().unwrap()[0], Some(0.0));
        let avg =
            average_series(&[series(&[Some(0.2)]), series(&[Some(0.4)]), series(&[None])]).unwrap();
        assert!((avg.points[0].1.unwrap() - 0.3).abs() < 1e-12);
        assert!((avg.dispersion.unwrap()[0].unwrap() - 0.1).abs() < 1e-12);
        assert!(average_series(&[]).is_none());
    }

    #[test]
    fn series_over_windows() {
        let spec = crate::stream::WindowSpec::weekly(0, 3).unwrap();
        let mut set = CultureSet::new(spec);
        set.insert(CultureVector::from_counts(
            g("A"),
            1,
            Practice::Tagging,
            [("x", 3), ("y", 1)],
        ));
        set.insert(CultureVector::from_counts(
            g("A"),
            2,
            Practice::Tagging,
            [("x", 1), ("y", 3)],
        ));
        set.insert(CultureVector::from_counts(
            g("B"),
            2,
            Practice::Tagging,
            [("x", 1)],
        ));
        let s = practice_series(
            &set,
            Practice::Tagging,
            RboParams::default(),
            ExecMode::Sequential,
        );
        assert_eq!(s.focus.len(), 3);
        assert_eq!(s.reproduction[0].points.len(), 2);
        assert_eq!(s.reproduction[0].points[0].0, 2);
        // A: [x,y] -> [y,x]
        assert!((s.reproduction[0].points[0].1.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(s.reproduction[0].points[1].1, None);
        assert_eq!(
            s.frequency[0].points,
            [(1, Some(4.0)), (2, Some(4.0)), (3, None)]
        );
        assert_eq!(s.similarity[1].points[0].1, None);
        let par = practice_series(
            &set,
            Practice::Tagging,
            RboParams::default(),
            ExecMode::Parallel,
        );
        assert_eq!(s, par);
        let mut buf = Vec::new();
        write_series_csv(&s.frequency, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("group,window,value,sd\nA,1,4,\n"));
        assert!(text.contains("AVERAGE,2,2.5,1.5\n"));
        assert!(text.contains("AVERAGE,3,,\n"));
    }

    fn counts_strategy() -> impl Strategy<Value = Vec<(String, u64)>> {
        proptest::collection::btree_map("[a-h]", 1u64..30, 1..8)
            .prop_map(|m| m.into_iter().collect())
    }

    proptest! {
        #[test]
        fn focus_scale_invariant(c in counts_strategy(), k in 1u64..20) {
            let a = focus_of_counts(c.iter().map(|x| x.1)).unwrap();
            let b = focus_of_counts(c.iter().map(|x| x.1 * k)).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(a in counts_strategy(), b in counts_strategy(), k in 1u64..10) {
            let va = cv(&a.iter().map(|(s, n)| (s.as_str(), *n)).collect::<Vec<_>>());
            let vb = cv(&b.iter().map(|(s, n)| (s.as_str(), *n)).collect::<Vec<_>>());
            let vk = cv(&a.iter().map(|(s, n)| (s.as_str(), *n * k)).collect::<Vec<_>>());
            let s = pair_similarity(&va, &vb);
            prop_assert!((s - pair_similarity(&vb, &va)).abs() < 1e-15);
            prop_assert!((s - pair_similarity(&vk, &vb)).abs() < 1e-12);
            prop_assert!((pair_similarity(&va, &va) - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn rbo_bounds_symmetry_oracle(
            a in proptest::sample::subsequence(vec!["a","b","c","d","e","f","g","h"], 1..8).prop_shuffle(),
            b in proptest::sample::subsequence(vec!["a","b","c","d","e","f","g","h"], 1..8).prop_shuffle(),
            p in 0.0f64..0.99,
        ) {
            let params = RboParams::new(p).unwrap();
            let r = reproduction(&ranked(&a), &ranked(&b), params);
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((r - reproduction(&ranked(&b), &ranked(&a), params)).abs() < 1e-12);
            prop_assert!((r - rbo_oracle(&a, &b, p)).abs() < 1e-12);
            prop_assert_eq!(reproduction(&ranked(&a), &ranked(&a), params), 1.0);
        }

        #[test]
        fn average_within_range(vals in proptest::collection::vec(proptest::option::of(0.0f64..1.0), 1..7)) {
            let inputs: Vec<_> = vals.iter().map(|v| series(&[*v])).collect();
            let avg = average_series(&inputs).unwrap();
            let present: Vec<f64> = vals.iter().flatten().copied().collect();
            match avg.points[0].1 {
                None => prop_assert!(present.is_empty()),
                Some(m) => {
                    let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(lo - 1e-12 <= m && m <= hi + 1e-12);
                }
            }
        }
    }
}
