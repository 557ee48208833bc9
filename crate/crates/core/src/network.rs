//! Aggregate directed practice graphs and their summary statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{GroupId, Practice, Roster, Transaction, UserHandle};

/// Directed weighted user→user graph over the whole observation span.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PracticeGraph {
    pub practice: Option<Practice>,
    pub nodes: BTreeMap<UserHandle, GroupId>,
    pub arcs: BTreeMap<(UserHandle, UserHandle), u64>,
}

impl PracticeGraph {
    pub fn new(practice: Practice) -> Self {
        PracticeGraph {
            practice: Some(practice),
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, user: UserHandle, group: GroupId) {
        self.nodes.entry(user).or_insert(group);
    }

    /// Adds `weight` to the arc; self-loops are ignored.
    pub fn add_arc(&mut self, source: &UserHandle, target: &UserHandle, weight: u64) {
        if source == target || weight == 0 {
            return;
        }
        *self
            .arcs
            .entry((source.clone(), target.clone()))
            .or_insert(0) += weight;
    }

    pub fn total_weight(&self) -> u64 {
        self.arcs.values().sum()
    }

    pub fn group_of(&self, user: &UserHandle) -> Option<&GroupId> {
        self.nodes.get(user)
    }

    fn members(&self, scope: &Scope) -> Vec<&UserHandle> {
        self.nodes
            .iter()
            .filter(|(_, g)| scope.includes(g))
            .map(|(u, _)| u)
            .collect()
    }

    /// Writes `source,target,weight,source_group,target_group`.
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source", "target", "weight", "source_group", "target_group"])?;
        for ((s, t), weight) in &self.arcs {
            let sg = self.nodes.get(s).map(GroupId::as_str).unwrap_or("");
            let tg = self.nodes.get(t).map(GroupId::as_str).unwrap_or("");
            w.write_record([s.as_str(), t.as_str(), &weight.to_string(), sg, tg])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the graph of one practice. Arc weight is the number of
/// transactions in which the source referenced the target. Nodes are the
/// roster members active in the practice, as author or as referenced user.
pub fn build_graph(
    transactions: &[Transaction],
    practice: Practice,
    roster: &Roster,
) -> PracticeGraph {
    let mut g = PracticeGraph::new(practice);
    for t in transactions.iter().filter(|t| t.practice == practice) {
        let Some(src_group) = roster.group_of(&t.author) else {
            continue;
        };
        g.add_node(t.author.clone(), src_group.clone());
        for fact in &t.facts {
            let Ok(target) = UserHandle::parse(&fact.key) else {
                continue;
            };
            let Some(tgt_group) = roster.group_of(&target) else {
                continue;
            };
            if target == t.author {
                continue;
            }
            g.add_node(target.clone(), tgt_group.clone());
            g.add_arc(&t.author, &target, 1);
        }
    }
    g
}

/// Unweighted following graph from an edge list plus any following
/// transactions. Every distinct arc has weight 1.
pub fn build_follow_graph(
    edges: &[(UserHandle, UserHandle)],
    transactions: &[Transaction],
    roster: &Roster,
) -> PracticeGraph {
    let mut g = build_graph(transactions, Practice::Following, roster);
    for (s, t) in edges {
        let (Some(sg), Some(tg)) = (roster.group_of(s), roster.group_of(t)) else {
            continue;
        };
        if s == t {
            continue;
        }
        g.add_node(s.clone(), sg.clone());
        g.add_node(t.clone(), tg.clone());
        g.add_arc(s, t, 1);
    }
    for w in g.arcs.values_mut() {
        *w = 1;
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Group(GroupId),
    Total,
}

impl Scope {
    fn includes(&self, g: &GroupId) -> bool {
        match self {
            Scope::Group(x) => x == g,
            Scope::Total => true,
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Group(g) => write!(f, "{g}"),
            Scope::Total => f.write_str("TOTAL"),
        }
    }
}

/// Which arcs count toward a group's degrees and weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeScope {
    /// Arcs to or from any node.
    #[default]
    AllArcs,
    /// Only arcs with both endpoints inside the scope.
    WithinGroup,
}

/// Distinct arcs inside the scope over `m·(m−1)`; `None` below two members.
pub fn density(graph: &PracticeGraph, scope: &Scope) -> Option<f64> {
    let m = graph.members(scope).len();
    if m < 2 {
        return None;
    }
    let inside = graph
        .arcs
        .keys()
        .filter(|(s, t)| {
            graph.group_of(s).is_some_and(|g| scope.includes(g))
                && graph.group_of(t).is_some_and(|g| scope.includes(g))
        })
        .count();
    Some(inside as f64 / (m * (m - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DegreeStats {
    pub k_out: f64,
    pub k_in: f64,
    pub w_out: f64,
    pub w_in: f64,
}

/// Mean in/out degree and weight over the scope's members.
pub fn degree_weight_stats(
    graph: &PracticeGraph,
    scope: &Scope,
    arcs: DegreeScope,
) -> Option<DegreeStats> {
    let members = graph.members(scope);
    if members.is_empty() {
        return None;
    }
    let in_scope = |u: &UserHandle| graph.group_of(u).is_some_and(|g| scope.includes(g));
    let mut sum = DegreeStats::default();
    for ((s, t), &w) in &graph.arcs {
        let (s_in, t_in) = (in_scope(s), in_scope(t));
        if arcs == DegreeScope::WithinGroup && !(s_in && t_in) {
            continue;
        }
        if s_in {
            sum.k_out += 1.0;
            sum.w_out += w as f64;
        }
        if t_in {
            sum.k_in += 1.0;
            sum.w_in += w as f64;
        }
    }
    let n = members.len() as f64;
    Some(DegreeStats {
        k_out: sum.k_out / n,
        k_in: sum.k_in / n,
        w_out: sum.w_out / n,
        w_in: sum.w_in / n,
    })
}

/// Per-node share of outgoing weight that stays in the node's own group,
/// for nodes with outgoing weight.
pub fn node_homophily(graph: &PracticeGraph) -> BTreeMap<&UserHandle, f64> {
    let mut acc: BTreeMap<&UserHandle, (u64, u64)> = BTreeMap::new();
    for ((s, t), &w) in &graph.arcs {
        let e = acc.entry(s).or_insert((0, 0));
        e.1 += w;
        if graph.group_of(s).is_some() && graph.group_of(s) == graph.group_of(t) {
            e.0 += w;
        }
    }
    acc.into_iter()
        .filter(|(_, (_, all))| *all > 0)
        .map(|(u, (same, all))| (u, same as f64 / all as f64))
        .collect()
}

/// Mean node homophily over active senders in the scope.
pub fn homophily(graph: &PracticeGraph, scope: &Scope) -> Option<f64> {
    let values: Vec<f64> = node_homophily(graph)
        .into_iter()
        .filter(|(u, _)| graph.group_of(u).is_some_and(|g| scope.includes(g)))
        .map(|(_, h)| h)
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupNetworkStats {
    pub scope: String,
    pub nodes: usize,
    pub density: Option<f64>,
    pub degrees: Option<DegreeStats>,
    pub homophily: Option<f64>,
}

/// One row per group present in the graph (sorted), then TOTAL.
pub fn network_stats(graph: &PracticeGraph, arcs: DegreeScope) -> Vec<GroupNetworkStats> {
    let mut groups: Vec<&GroupId> = graph.nodes.values().collect();
    groups.sort();
    groups.dedup();
    let mut scopes: Vec<Scope> = groups
        .into_iter()
        .map(|g| Scope::Group(g.clone()))
        .collect();
    scopes.push(Scope::Total);
    scopes
        .iter()
        .map(|scope| GroupNetworkStats {
            scope: scope.to_string(),
            nodes: graph.members(scope).len(),
            density: density(graph, scope),
            degrees: degree_weight_stats(graph, scope, arcs),
            homophily: homophily(graph, scope),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `group,nodes,D,k_out,k_in,w_out,w_in,H` at full precision.
pub fn write_stats_csv<W: Write>(stats: &[GroupNetworkStats], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "nodes", "D", "k_out", "k_in", "w_out", "w_in", "H"])?;
    for s in stats {
        let d = s.degrees;
        w.write_record([
            s.scope.clone(),
            s.nodes.to_string(),
            opt(s.density),
            opt(d.map(|d| d.k_out)),
            opt(d.map(|d| d.k_in)),
            opt(d.map(|d| d.w_out)),
            opt(d.map(|d| d.w_in)),
            opt(s.homophily),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Fact, FactKind};
    use proptest::prelude::*;

    fn h(s: &str) -> UserHandle {
        UserHandle::parse(s).unwrap()
    }

    fn roster(pairs: &[(&str, &str)]) -> Roster {
        let mut r = Roster::default();
        for (u, g) in pairs {
            r.insert(h(u), GroupId::parse(g).unwrap()).unwrap();
        }
        r
    }

    fn tx(
        id: usize,
        practice: Practice,
        author: &str,
        targets: &[&str],
        roster: &Roster,
    ) -> Transaction {
        Transaction {
            id: id.to_string(),
            author: h(author),
            group: roster.group_of(&h(author)).unwrap().clone(),
            timestamp: 0,
            practice,
            facts: targets
                .iter()
                .map(|t| Fact::user(practice.fact_kind(), &h(t)))
                .collect(),
        }
    }

    fn graph_of(arcs: &[(&str, &str, u64)], groups: &[(&str, &str)]) -> PracticeGraph {
        let mut g = PracticeGraph::new(Practice::Mentioning);
        for (u, grp) in groups {
            g.add_node(h(u), GroupId::parse(grp).unwrap());
        }
        for (s, t, w) in arcs {
            g.add_arc(&h(s), &h(t), *w);
        }
        g
    }

    #[test]
    fn repeated_retweets_accumulate() {
        let r = roster(&[("a", "X"), ("b", "X")]);
        let txs: Vec<_> = (0..3)
            .map(|i| tx(i, Practice::Retweeting, "a", &["b"], &r))
            .collect();
        let g = build_graph(&txs, Practice::Retweeting, &r);
        assert_eq!(g.arcs.len(), 1);
        assert_eq!(g.arcs[&(h("a"), h("b"))], 3);
    }

    #[test]
    fn self_mentions_dropped() {
        let r = roster(&[("a", "X")]);
        let g = build_graph(
            &[tx(0, Practice::Mentioning, "a", &["a"], &r)],
            Practice::Mentioning,
            &r,
        );
        assert!(g.arcs.is_empty());
        assert_eq!(g.nodes.len(), 1);
    }

    #[test]
    fn hand_counted_fixture() {
        let r = roster(&[("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")]);
        let txs = vec![
            tx(0, Practice::Mentioning, "a", &["b"], &r),
            tx(1, Practice::Mentioning, "b", &["c"], &r),
            tx(2, Practice::Mentioning, "c", &["d"], &r),
            tx(3, Practice::Mentioning, "d", &["a"], &r),
            tx(4, Practice::Mentioning, "d", &["d"], &r),
        ];
        let g = build_graph(&txs, Practice::Mentioning, &r);
        assert_eq!(g.arcs.len(), 4);
        assert_eq!(g.total_weight(), 4);
    }

    #[test]
    fn non_roster_targets_and_other_practices_ignored() {
        let r = roster(&[("a", "X"), ("b", "X")]);
        let mut t = tx(0, Practice::Mentioning, "a", &["b"], &r);
        t.facts.push(Fact {
            kind: FactKind::Mentionee,
            key: "zed".into(),
        });
        let other = tx(1, Practice::Retweeting, "b", &["a"], &r);
        let g = build_graph(&[t, other], Practice::Mentioning, &r);
        assert_eq!(g.arcs.len(), 1);
    }

    #[test]
    fn follow_graph_is_unweighted() {
        let r = roster(&[("a", "X"), ("b", "Y")]);
        let edges = vec![
            (h("a"), h("b")),
            (h("a"), h("b")),
            (h("b"), h("b")),
            (h("a"), h("q")),
        ];
        let g = build_follow_graph(&edges, &[tx(0, Practice::Following, "a", &["b"], &r)], &r);
        assert_eq!(g.arcs.len(), 1);
        assert_eq!(g.total_weight(), 1);
    }

    #[test]
    fn density_examples() {
        let nodes = [("a", "X"), ("b", "X"), ("c", "X")];
        let complete = graph_of(
            &[
                ("a", "b", 1),
                ("b", "a", 1),
                ("a", "c", 1),
                ("c", "a", 1),
                ("b", "c", 1),
                ("c", "b", 1),
            ],
            &nodes,
        );
        assert_eq!(density(&complete, &Scope::Total), Some(1.0));
        assert_eq!(density(&graph_of(&[], &nodes), &Scope::Total), Some(0.0));
        let four = [("a", "X"), ("b", "X"), ("c", "X"), ("d", "X")];
        let d = density(
            &graph_of(&[("a", "b", 5), ("c", "d", 1)], &four),
            &Scope::Total,
        )
        .unwrap();
        assert!((d - 2.0 / 12.0).abs() < 1e-15);
        assert_eq!(density(&graph_of(&[], &[("a", "X")]), &Scope::Total), None);
    }

    #[test]
    fn group_density_uses_induced_subgraph() {
        let g = graph_of(
            &[("a", "b", 1), ("a", "c", 1)],
            &[("a", "X"), ("b", "X"), ("c", "Y")],
        );
        assert_eq!(
            density(&g, &Scope::Group(GroupId::parse("X").unwrap())),
            Some(0.5)
        );
    }

    #[test]
    fn degree_examples() {
        let iso = graph_of(&[], &[("a", "X")]);
        assert_eq!(
            degree_weight_stats(&iso, &Scope::Total, DegreeScope::AllArcs),
            Some(DegreeStats::default())
        );
        let star = graph_of(
            &[("c", "x", 2), ("c", "y", 2), ("c", "z", 2)],
            &[("c", "C"), ("x", "L"), ("y", "L"), ("z", "L")],
        );
        let s = degree_weight_stats(
            &star,
            &Scope::Group(GroupId::parse("C").unwrap()),
            DegreeScope::AllArcs,
        )
        .unwrap();
        assert_eq!((s.k_out, s.w_out, s.k_in), (3.0, 6.0, 0.0));
        let within = degree_weight_stats(
            &star,
            &Scope::Group(GroupId::parse("C").unwrap()),
            DegreeScope::WithinGroup,
        )
        .unwrap();
        assert_eq!(within.k_out, 0.0);
        let t = degree_weight_stats(&star, &Scope::Total, DegreeScope::AllArcs).unwrap();
        assert_eq!(t.k_out, t.k_in);
        assert_eq!(t.w_out, t.w_in);
    }

    #[test]
    fn homophily_examples() {
        let groups = [("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")];
        let inside = graph_of(&[("a", "b", 1), ("c", "d", 4)], &groups);
        assert_eq!(homophily(&inside, &Scope::Total), Some(1.0));
        let across = graph_of(&[("a", "c", 1), ("d", "b", 2)], &groups);
        assert_eq!(homophily(&across, &Scope::Total), Some(0.0));
        let groups = [("u", "X"), ("p", "X"), ("q", "X"), ("r", "X"), ("z", "Y")];
        let mixed = graph_of(
            &[("u", "p", 1), ("u", "q", 1), ("u", "r", 1), ("u", "z", 1)],
            &groups,
        );
        assert_eq!(node_homophily(&mixed)[&h("u")], 0.75);
        assert_eq!(
            homophily(&mixed, &Scope::Group(GroupId::parse("Y").unwrap())),
            None
        );
    }

    #[test]
    fn stats_rows_and_csv() {
        let g = graph_of(
            &[("a", "b", 2), ("b", "c", 1)],
            &[("a", "X"), ("b", "X"), ("c", "Y")],
        );
        let stats = network_stats(&g, DegreeScope::AllArcs);
        assert_eq!(
            stats.iter().map(|s| s.scope.as_str()).collect::<Vec<_>>(),
            ["X", "Y", "TOTAL"]
        );
        let mut buf = Vec::new();
        write_stats_csv(&stats, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.starts_with("group,nodes,D,k_out,k_in,w_out,w_in,H\nX,2,0.5,1,0.5,1.5,1,0.5\n"),
            "{text}"
        );
        assert!(text.contains("Y,1,,0,1,0,1,\n"));
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "source,target,weight,source_group,target_group\na,b,2,X,X\nb,c,1,X,Y\n"
        );
    }

    proptest! {
        #[test]
        fn weight_conservation(arcs in proptest::collection::vec((0usize..6, 0usize..6, 1u64..5), 0..40)) {
            let names = ["a", "b", "c", "d", "e", "f"];
            let groups: Vec<(&str, &str)> = names.iter().enumerate().map(|(i, n)| (*n, if i % 2 == 0 { "X" } else { "Y" })).collect();
            let arcs: Vec<(&str, &str, u64)> = arcs.iter().map(|(s, t, w)| (names[*s], names[*t], *w)).collect();
            let g = graph_of(&arcs, &groups);
            let t = degree_weight_stats(&g, &Scope::Total, DegreeScope::AllArcs).unwrap();
            let n = g.nodes.len() as f64;
            prop_assert!((t.w_out * n - g.total_weight() as f64).abs() < 1e-9);
            prop_assert!((t.w_in * n - g.total_weight() as f64).abs() < 1e-9);
            prop_assert!((t.k_out - t.k_in).abs() < 1e-12);
            if let Some(h) = homophily(&g, &Scope::Total) {
                prop_assert!((0.0..=1.0).contains(&h));
            }
        }

        #[test]
        fn complete_subgraphs_have_unit_density(n in 2usize..7, k in 2usize..7) {
            let k = k.min(n);
            let names: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
            let mut g = PracticeGraph::new(Practice::Following);
            for (i, u) in names.iter().enumerate() {
                g.add_node(h(u), GroupId::parse(if i < k { "IN" } else { "OUT" }).unwrap());
            }
            for s in &names {
                for t in &names {
                    g.add_arc(&h(s), &h(t), 1);
                }
            }
            prop_assert_eq!(density(&g, &Scope::Total), Some(1.0));
            prop_assert_eq!(density(&g, &Scope::Group(GroupId::parse("IN").unwrap())), Some(1.0));
        }
    }
}
