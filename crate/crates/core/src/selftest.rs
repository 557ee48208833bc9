//! Built-in oracle suite. Each check compares the library against a value
//! frozen here or recomputed by a separate, naive route.
//!
//! RBO expectations are frozen at p = 0.9, so running the suite with any
//! other persistence makes those checks fail.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Fact, GroupId, Practice};
use crate::facts::{
    burst_costs, burst_rates, improvement_closed_form, institutionness, positive_runs, FactSeries,
    InstitutionVariant,
};
use crate::measures::{
    focus, group_similarity, pair_similarity, rbo_rank_weight, reproduction, RboParams,
};
use crate::stream::{CultureSet, CultureVector, RankedVector, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<Check>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn close(&mut self, name: &'static str, got: f64, want: f64, tol: f64) {
        self.checks.push(Check {
            name,
            passed: (got - want).abs() <= tol,
            detail: format!("got {got:.10}, expected {want:.10} ± {tol:e}"),
        });
    }

    fn exact(&mut self, name: &'static str, ok: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed: ok,
            detail,
        });
    }
}

fn vector(pairs: &[(&str, u64)]) -> CultureVector {
    CultureVector::from_counts(
        GroupId::parse("G").unwrap(),
        1,
        Practice::Tagging,
        pairs.iter().copied(),
    )
}

fn ranked(keys: &[&str]) -> RankedVector {
    let n = keys.len() as u64;
    RankedVector {
        entries: keys
            .iter()
            .enumerate()
            .map(|(i, k)| (Fact::hashtag(k).expect("valid key"), n - i as u64))
            .collect(),
    }
}

fn naive_entropy_focus(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    let h: f64 = counts
        .iter()
        .map(|c| c / total)
        .map(|q| -q * q.log2())
        .sum();
    1.0 - h / (counts.len() as f64).log2()
}

fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn brute_institutionness(r: &[u64], h0: &[Option<f64>], normalized: bool) -> usize {
    let mut best = 0;
    for h in 0..=r.len() {
        let hits = r
            .iter()
            .zip(h0)
            .filter(|(&x, rate)| match rate {
                None => false,
                Some(v) if normalized => x as f64 / v >= h as f64,
                Some(v) => x as f64 * v >= h as f64 - 1e-12 * h as f64,
            })
            .count();
        if hits >= h {
            best = h;
        }
    }
    best
}

fn naive_binomial_cost(r: u64, d: u64, p: f64) -> f64 {
    let mut ln_choose = 0.0;
    for i in 0..r {
        ln_choose += ((d - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    -(ln_choose + r as f64 * p.ln() + (d - r) as f64 * (1.0 - p).ln())
}

/// Runs every check with the given RBO persistence.
pub fn selftest(rbo: RboParams) -> SelftestReport {
    let mut rep = SelftestReport::default();

    rep.close(
        "focus two-fact",
        focus(&vector(&[("a", 3), ("b", 1)])).unwrap_or(f64::NAN),
        naive_entropy_focus(&[3.0, 1.0]),
        1e-12,
    );
    rep.close(
        "focus two-fact frozen",
        focus(&vector(&[("a", 3), ("b", 1)])).unwrap_or(f64::NAN),
        0.1887,
        1e-4,
    );
    rep.close(
        "focus single fact",
        focus(&vector(&[("a", 7)])).unwrap_or(f64::NAN),
        1.0,
        0.0,
    );
    rep.close(
        "focus uniform",
        focus(&vector(&[("a", 2), ("b", 2), ("c", 2), ("d", 2)])).unwrap_or(f64::NAN),
        0.0,
        1e-12,
    );
    rep.close(
        "focus skewed",
        focus(&vector(&[("a", 9), ("b", 5), ("c", 1)])).unwrap_or(f64::NAN),
        naive_entropy_focus(&[9.0, 5.0, 1.0]),
        1e-12,
    );
    rep.exact(
        "focus empty",
        focus(&vector(&[])).is_none(),
        "empty vector must be undefined".into(),
    );

    rep.close(
        "cosine half-overlap",
        pair_similarity(&vector(&[("a", 1), ("b", 1)]), &vector(&[("a", 1)])),
        naive_cosine(&[1.0, 1.0], &[1.0, 0.0]),
        1e-12,
    );
    let (u, v) = (
        vector(&[("a", 4), ("b", 2), ("c", 7)]),
        vector(&[("b", 3), ("c", 1), ("d", 5)]),
    );
    rep.close(
        "cosine weighted",
        pair_similarity(&u, &v),
        naive_cosine(&[4.0, 2.0, 7.0, 0.0], &[0.0, 3.0, 1.0, 5.0]),
        1e-12,
    );
    rep.close("cosine self", pair_similarity(&u, &u), 1.0, 1e-12);
    rep.close(
        "cosine disjoint",
        pair_similarity(&vector(&[("a", 1)]), &vector(&[("z", 9)])),
        0.0,
        0.0,
    );

    let mut set = CultureSet::new(WindowSpec::weekly(0, 1).expect("valid spec"));
    let groups = [
        ("A", vec![("a", 2u64), ("b", 1)]),
        ("B", vec![("a", 1)]),
        ("C", vec![("b", 3), ("c", 4)]),
    ];
    for (g, pairs) in &groups {
        set.insert(CultureVector::from_counts(
            GroupId::parse(g).unwrap(),
            1,
            Practice::Tagging,
            pairs.iter().copied(),
        ));
    }
    let want = (naive_cosine(&[2.0, 1.0, 0.0], &[1.0, 0.0, 0.0])
        + naive_cosine(&[2.0, 1.0, 0.0], &[0.0, 3.0, 4.0]))
        / 2.0;
    let got = group_similarity(&set, &GroupId::parse("A").unwrap(), 1, Practice::Tagging)
        .unwrap_or(f64::NAN);
    rep.close("group similarity mean", got, want, 1e-12);

    rep.close(
        "rbo swapped pair",
        reproduction(&ranked(&["a", "b"]), &ranked(&["b", "a"]), rbo),
        0.9,
        1e-6,
    );
    rep.close(
        "rbo partial overlap",
        reproduction(
            &ranked(&["a", "b", "c", "d"]),
            &ranked(&["b", "a", "d", "e"]),
            rbo,
        ),
        0.69075,
        1e-9,
    );
    rep.close(
        "rbo uneven lengths",
        reproduction(
            &ranked(&["a", "b", "c", "d", "e"]),
            &ranked(&["c", "a"]),
            rbo,
        ),
        0.533_314_285_714_285_7,
        1e-9,
    );
    rep.close(
        "rbo identity",
        reproduction(&ranked(&["x", "y", "z"]), &ranked(&["x", "y", "z"]), rbo),
        1.0,
        0.0,
    );
    rep.close(
        "rbo disjoint",
        reproduction(&ranked(&["x", "y"]), &ranked(&["u", "v"]), rbo),
        0.0,
        0.0,
    );
    rep.close(
        "rbo top-10 weight",
        rbo_rank_weight(rbo.p(), 10),
        0.855_585_446_747_351_8,
        1e-9,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..300 {
        let r: Vec<u64> = (0..13).map(|_| rng.random_range(0..=50)).collect();
        let h0: Vec<Option<f64>> = (0..13)
            .map(|_| (rng.random_range(0..10) > 0).then(|| rng.random_range(0.2..8.0)))
            .collect();
        for (variant, normalized) in [
            (InstitutionVariant::Literal, false),
            (InstitutionVariant::Normalized, true),
        ] {
            if institutionness(&r, &h0, variant) != brute_institutionness(&r, &h0, normalized) {
                mismatches += 1;
            }
        }
    }
    rep.exact(
        "institutionness brute force",
        mismatches == 0,
        format!("{mismatches} mismatches over 600 series"),
    );
    let flat = [5u64; 13];
    let ones = [Some(1.0); 13];
    let got = institutionness(&flat, &ones, InstitutionVariant::Literal);
    rep.exact(
        "institutionness flat series",
        got == 5,
        format!("got {got}, expected 5"),
    );

    let series = FactSeries {
        group: GroupId::parse("G").unwrap(),
        practice: Practice::Tagging,
        fact: Fact::hashtag("x").expect("valid key"),
        r: vec![1, 5],
        d: vec![10, 10],
    };
    match (burst_costs(&series), burst_rates(&series.r, &series.d)) {
        (Some(costs), Some((p0, p1))) => {
            rep.close(
                "burst improvement log-gamma",
                costs[1].0 - costs[1].1,
                0.6675,
                1e-3,
            );
            rep.close(
                "burst improvement closed form",
                improvement_closed_form(5, 10, p0, p1),
                0.6675,
                1e-3,
            );
            let naive = naive_binomial_cost(5, 10, p0) - naive_binomial_cost(5, 10, p1);
            rep.close(
                "burst cost naive binomial",
                costs[1].0 - costs[1].1,
                naive,
                1e-9,
            );
        }
        _ => rep.exact(
            "burst improvement log-gamma",
            false,
            "no costs for a referenced fact".into(),
        ),
    }
    let runs = positive_runs(&[-1.0, 2.0, 3.0, 0.0, 4.0]);
    rep.exact(
        "burst episode runs",
        runs == [(2, 3, 5.0), (5, 5, 4.0)],
        format!("got {runs:?}"),
    );

    let spec = WindowSpec::weekly(1_000, 3).expect("valid spec");
    let starts: BTreeSet<Option<usize>> = [
        999,
        1_000,
        1_000 + crate::stream::WEEK,
        1_000 + 3 * crate::stream::WEEK,
    ]
    .into_iter()
    .map(|t| spec.window_of(t))
    .collect();
    rep.exact(
        "window binning half-open",
        starts == BTreeSet::from([None, Some(1), Some(2)]),
        format!("got {starts:?}"),
    );

    rep
}
