//! Synthetic transaction streams for validation.
//!
//! Per window, every member emits a Poisson number of transactions. A
//! tagging transaction references one hashtag chosen by a Simon/Yule urn:
//! a fresh hashtag with probability `alpha`, otherwise an earlier reference
//! drawn uniformly, so a hashtag's chance grows with its cumulative count.
//! The urn is shared by all groups. Retweets and mentions target a member
//! of the author's own group with probability `hom`, otherwise any other
//! member uniformly. Designated hashtags can be injected with a baseline
//! share whose odds are multiplied inside a window interval.
//!
//! Generation is single-threaded and fully determined by the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Fact, FactKind, GroupId, Practice, Roster, Transaction, UserHandle};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstInjection {
    /// Hashtag key; must not collide with generated `t<n>` keys.
    pub fact: String,
    /// First and last window of the elevated interval, inclusive.
    pub start: usize,
    pub end: usize,
    /// Odds multiplier applied inside the interval.
    pub multiplier: f64,
    /// Selection probability per tagging transaction outside the interval.
    #[serde(default = "default_base_share")]
    pub base_share: f64,
}

fn default_base_share() -> f64 {
    0.05
}

impl BurstInjection {
    pub fn new(fact: &str, start: usize, end: usize, multiplier: f64) -> Self {
        BurstInjection {
            fact: fact.to_string(),
            start,
            end,
            multiplier,
            base_share: default_base_share(),
        }
    }

    fn probability(&self, window: usize) -> f64 {
        if (self.start..=self.end).contains(&window) {
            let odds = self.multiplier * self.base_share / (1.0 - self.base_share);
            odds / (1.0 + odds)
        } else {
            self.base_share
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Group names and member counts.
    pub groups: Vec<(String, usize)>,
    pub windows: usize,
    pub epoch: i64,
    pub width: i64,
    /// Expected transactions per member per window.
    pub rate: f64,
    /// Relative weights of tagging, retweeting and mentioning transactions.
    pub practice_mix: [f64; 3],
    /// Probability that a tagging transaction introduces a new hashtag.
    pub alpha: f64,
    /// Probability that a user reference stays within the author's group.
    pub hom: f64,
    /// Urn draws made before the first window and not emitted.
    pub warmup: usize,
    pub bursts: Vec<BurstInjection>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            groups: ["A", "B", "C", "D", "E", "F"]
                .iter()
                .map(|g| (g.to_string(), 20))
                .collect(),
            windows: 13,
            // 2013-07-20T00:00:00Z
            epoch: 1_374_278_400,
            width: crate::stream::WEEK,
            rate: 6.0,
            practice_mix: [1.0, 1.0, 1.0],
            alpha: 0.1,
            hom: 0.8,
            warmup: 2000,
            bursts: Vec::new(),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if self.groups.is_empty() {
            return bad("no groups".into());
        }
        for (g, n) in &self.groups {
            if GroupId::parse(g).is_err() || *n == 0 {
                return bad(format!("group {g:?} needs a name and at least one member"));
            }
        }
        let mut names: Vec<&str> = self.groups.iter().map(|(g, _)| g.trim()).collect();
        names.sort();
        names.dedup();
        if names.len() != self.groups.len() {
            return bad("duplicate group names".into());
        }
        if self.windows == 0 || self.width <= 0 {
            return bad("windows and width must be positive".into());
        }
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return bad(format!("rate {} out of range", self.rate));
        }
        if self
            .practice_mix
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
            || self.practice_mix.iter().sum::<f64>() <= 0.0
        {
            return bad("practice_mix needs non-negative weights with a positive sum".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} not in (0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.hom) {
            return bad(format!("hom {} not in [0, 1]", self.hom));
        }
        for b in &self.bursts {
            if Fact::hashtag(&b.fact).is_err() {
                return bad(format!("burst fact {:?} is not a hashtag key", b.fact));
            }
            if b.start == 0 || b.start > b.end || b.end > self.windows {
                return bad(format!(
                    "burst interval [{}, {}] outside 1..={}",
                    b.start, b.end, self.windows
                ));
            }
            if !(b.multiplier.is_finite() && b.multiplier > 0.0)
                || !(b.base_share > 0.0 && b.base_share < 1.0)
            {
                return bad(format!(
                    "burst {:?} needs multiplier > 0 and base_share in (0, 1)",
                    b.fact
                ));
            }
        }
        Ok(())
    }

    pub fn roster(&self) -> Roster {
        let mut roster = Roster::default();
        for (gi, (g, n)) in self.groups.iter().enumerate() {
            let group = GroupId::parse(g).expect("validated group name");
            for i in 0..*n {
                let user = UserHandle::parse(&format!("g{gi}u{i:03}")).expect("generated handle");
                roster.insert(user, group.clone()).expect("fresh handle");
            }
        }
        roster
    }
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub roster: Roster,
    pub transactions: Vec<Transaction>,
}

struct Urn {
    draws: Vec<u32>,
    next: u32,
}

impl Urn {
    fn draw<R: Rng>(&mut self, rng: &mut R, alpha: f64) -> u32 {
        let id = if self.draws.is_empty() || rng.random::<f64>() < alpha {
            self.next += 1;
            self.next - 1
        } else {
            self.draws[rng.random_range(0..self.draws.len())]
        };
        self.draws.push(id);
        id
    }
}

pub fn generate(config: &SynthConfig) -> Result<Synthesized, SynthError> {
    config.validate()?;
    let roster = config.roster();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let members: Vec<(UserHandle, GroupId)> =
        roster.iter().map(|(u, g)| (u.clone(), g.clone())).collect();
    let by_group: Vec<(GroupId, Vec<usize>)> = roster
        .groups()
        .into_iter()
        .map(|g| {
            let idx = members
                .iter()
                .enumerate()
                .filter(|(_, (_, mg))| *mg == g)
                .map(|(i, _)| i)
                .collect();
            (g, idx)
        })
        .collect();
    let poisson = (config.rate > 0.0).then(|| Poisson::new(config.rate).expect("validated rate"));
    let mix_total: f64 = config.practice_mix.iter().sum();

    let mut urn = Urn {
        draws: Vec::new(),
        next: 0,
    };
    for _ in 0..config.warmup {
        urn.draw(&mut rng, config.alpha);
    }

    let mut out = Vec::new();
    let mut serial = 0usize;
    for window in 1..=config.windows {
        let start = config.epoch + (window as i64 - 1) * config.width;
        for (group, idx) in &by_group {
            for &mi in idx {
                let author = &members[mi].0;
                let k = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
                for _ in 0..k {
                    let timestamp = start + rng.random_range(0..config.width);
                    let roll = rng.random::<f64>() * mix_total;
                    let practice = if roll < config.practice_mix[0] {
                        Practice::Tagging
                    } else if roll < config.practice_mix[0] + config.practice_mix[1] {
                        Practice::Retweeting
                    } else {
                        Practice::Mentioning
                    };
                    let fact = match practice {
                        Practice::Tagging => {
                            let injected = config
                                .bursts
                                .iter()
                                .find(|b| rng.random::<f64>() < b.probability(window))
                                .map(|b| b.fact.clone());
                            let key = injected.unwrap_or_else(|| {
                                format!("t{}", urn.draw(&mut rng, config.alpha))
                            });
                            Fact::hashtag(&key).expect("generated hashtag")
                        }
                        _ => {
                            let own: Vec<usize> =
                                idx.iter().copied().filter(|&j| j != mi).collect();
                            let target = if !own.is_empty() && rng.random::<f64>() < config.hom {
                                own[rng.random_range(0..own.len())]
                            } else if members.len() > 1 {
                                let j = rng.random_range(0..members.len() - 1);
                                if j >= mi {
                                    j + 1
                                } else {
                                    j
                                }
                            } else {
                                continue;
                            };
                            let kind = if practice == Practice::Retweeting {
                                FactKind::Retweetee
                            } else {
                                FactKind::Mentionee
                            };
                            Fact::user(kind, &members[target].0)
                        }
                    };
                    out.push(Transaction {
                        id: format!("syn{serial:08}"),
                        author: author.clone(),
                        group: group.clone(),
                        timestamp,
                        practice,
                        facts: vec![fact],
                    });
                    serial += 1;
                }
            }
        }
    }
    Ok(Synthesized {
        roster,
        transactions: out,
    })
}
