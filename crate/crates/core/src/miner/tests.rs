use std::collections::BTreeSet;

use super::*;
use crate::warning::{Tool, WarningRecord, WarningType};

fn node(id: &str, parents: &[&str], ts: i64) -> CommitNode {
    CommitNode {
        id: id.to_string(),
        parents: parents.iter().map(|p| p.to_string()).collect(),
        children: Vec::new(),
        timestamp: ts,
        message: format!("commit {id}"),
    }
}

/// Eleven nodes, one two-parent merge at n10: three roots (n01, n02, n04),
/// chains n01->n03->n05->n08 and n02->n06->n09, stub n04->n07, merge n10 of
/// (n08, n09), then n10->n11.
pub(crate) fn three_root_merge_graph() -> CommitGraph {
    CommitGraph::from_nodes(vec![
        node("n01", &[], 1),
        node("n02", &[], 2),
        node("n03", &["n01"], 3),
        node("n04", &[], 4),
        node("n05", &["n03"], 5),
        node("n06", &["n02"], 6),
        node("n07", &["n04"], 7),
        node("n08", &["n05"], 8),
        node("n09", &["n06"], 9),
        node("n10", &["n08", "n09"], 10),
        node("n11", &["n10"], 11),
    ])
}

fn record(wtype: WarningType, file: &str, line: u32, ctx: &str) -> WarningRecord {
    WarningRecord::new(Tool::Infer, wtype, file, line, None, "f", "q", ctx)
}

fn simple_record(tag: u32) -> WarningRecord {
    record(WarningType::DeadStore, "a.c", tag, &format!("x{tag} = {tag};"))
}

#[test]
fn graph_links_are_consistent() {
    let g = three_root_merge_graph();
    assert_eq!(g.len(), 11);
    for n in g.nodes() {
        for p in &n.parents {
            assert!(g.node(p).unwrap().children.contains(&n.id), "{} -> {}", p, n.id);
        }
        for c in &n.children {
            assert!(g.node(c).unwrap().parents.contains(&n.id));
        }
    }
    assert!(g.node("n10").unwrap().is_merge());
    assert_eq!(g.node("n10").unwrap().parents.len(), 2);
}

#[test]
fn linearize_single_chain() {
    let g = CommitGraph::from_nodes(vec![
        node("c0", &[], 0),
        node("c1", &["c0"], 1),
        node("c2", &["c1"], 2),
    ]);
    let histories = linearize(&g).unwrap();
    assert_eq!(histories.len(), 1);
    assert_eq!(histories[0].commits, vec!["c0", "c1", "c2"]);
}

#[test]
fn linearize_three_root_merge_graph_yields_four_histories() {
    let g = three_root_merge_graph();
    let histories = linearize(&g).unwrap();
    assert_eq!(histories.len(), 4);
    let chains: BTreeSet<Vec<String>> =
        histories.iter().map(|h| h.commits.clone()).collect();
    let expect: BTreeSet<Vec<String>> = [
        vec!["n01", "n03", "n05", "n08"],
        vec!["n02", "n06", "n09"],
        vec!["n04", "n07"],
        vec!["n10", "n11"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    assert_eq!(chains, expect);
    // No merge edge (into n10) appears in any history.
    for h in &histories {
        for pair in h.commits.windows(2) {
            assert_ne!(pair[1], "n10");
        }
    }
}

#[test]
fn linearize_single_merge_of_two_branches() {
    let g = CommitGraph::from_nodes(vec![
        node("a1", &[], 1),
        node("a2", &["a1"], 2),
        node("b1", &[], 3),
        node("b2", &["b1"], 4),
        node("m", &["a2", "b2"], 5),
    ]);
    let histories = linearize(&g).unwrap();
    assert_eq!(histories.len(), 3);
    let chains: BTreeSet<Vec<String>> =
        histories.iter().map(|h| h.commits.clone()).collect();
    let expect: BTreeSet<Vec<String>> = [vec!["a1", "a2"], vec!["b1", "b2"], vec!["m"]]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
    assert_eq!(chains, expect);
}

#[test]
fn linearize_branch_point_spawns_history_per_edge() {
    // root -> fork, fork -> left..., fork -> right...
    let g = CommitGraph::from_nodes(vec![
        node("r", &[], 0),
        node("f", &["r"], 1),
        node("l1", &["f"], 2),
        node("l2", &["l1"], 3),
        node("r1", &["f"], 4),
    ]);
    let histories = linearize(&g).unwrap();
    let chains: BTreeSet<Vec<String>> =
        histories.iter().map(|h| h.commits.clone()).collect();
    let expect: BTreeSet<Vec<String>> = [vec!["r", "f"], vec!["f", "l1", "l2"], vec!["f", "r1"]]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
    assert_eq!(chains, expect);
}

#[test]
fn linearize_rejects_cycles() {
    let g = CommitGraph::from_nodes(vec![node("a", &["b"], 0), node("b", &["a"], 1)]);
    assert!(matches!(linearize(&g), Err(MinerError::CycleDetected)));
}

/// Edge partition: the histories' consecutive pairs reproduce the stripped
/// edge set exactly once each.
pub(crate) fn assert_edge_partition(graph: &CommitGraph, histories: &[LinearHistory]) {
    let mut stripped: Vec<(String, String)> = Vec::new();
    for n in graph.nodes() {
        if n.is_merge() {
            continue;
        }
        for p in &n.parents {
            stripped.push((p.clone(), n.id.clone()));
        }
    }
    stripped.sort();
    let mut covered: Vec<(String, String)> = histories
        .iter()
        .flat_map(|h| {
            h.commits
                .windows(2)
                .map(|w| (w[0].clone(), w[1].clone()))
                .collect::<Vec<_>>()
        })
        .collect();
    covered.sort();
    assert_eq!(covered, stripped, "edges must be partitioned across histories");
    for h in histories {
        assert!(!h.commits.is_empty());
        for pair in h.commits.windows(2) {
            let child = graph.node(&pair[1]).unwrap();
            assert!(child.parents.contains(&pair[0]), "{} -> {}", pair[0], pair[1]);
        }
    }
}

/// Deterministic pseudo-random DAG: node i may take parents among earlier
/// nodes.
pub(crate) fn random_dag(seed: u64, max_nodes: usize) -> CommitGraph {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let n = 2 + (next() % max_nodes as u64) as usize;
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("c{i:03}");
        let mut parents = Vec::new();
        if i > 0 {
            let roll = next() % 100;
            let parent_count = if roll < 15 && i >= 2 {
                2 // merge
            } else if roll < 25 {
                0 // orphan root
            } else {
                1
            };
            let mut picks = BTreeSet::new();
            while picks.len() < parent_count {
                picks.insert((next() % i as u64) as usize);
            }
            parents = picks.into_iter().map(|p| format!("c{p:03}")).collect();
        }
        nodes.push(CommitNode {
            id,
            parents,
            children: Vec::new(),
            timestamp: i as i64,
            message: String::new(),
        });
    }
    CommitGraph::from_nodes(nodes)
}

#[test]
fn linearize_edge_partition_on_random_dags() {
    for seed in 0..200u64 {
        let g = random_dag(seed.wrapping_mul(0x9e37_79b9).wrapping_add(seed), 40);
        let histories = linearize(&g).unwrap();
        assert_edge_partition(&g, &histories);
    }
}

fn memory_runner(sets: &[(&str, Vec<WarningRecord>)]) -> InMemoryRunner {
    InMemoryRunner::new(sets.iter().map(|(c, r)| (c.to_string(), r.clone())))
}

#[test]
fn warning_set_dedups_and_caches() {
    let a = simple_record(1);
    let b = simple_record(1); // same identity
    let c = simple_record(2);
    let runner = memory_runner(&[("c0", vec![a, b, c])]);
    let cache = WarningCache::new();
    let set = warning_set("c0", &runner, &cache).unwrap();
    assert_eq!(set.len(), 2);
    assert_eq!(runner.backend_calls(), 1);
    let again = warning_set("c0", &runner, &cache).unwrap();
    assert_eq!(again, set);
    assert_eq!(runner.backend_calls(), 1, "second call must hit the cache");
}

#[test]
fn warning_set_missing_commit() {
    let runner = memory_runner(&[]);
    let cache = WarningCache::new();
    assert!(matches!(
        warning_set("gone", &runner, &cache),
        Err(MinerError::MissingReplayData(_))
    ));
}

fn chain_history(n: usize) -> LinearHistory {
    LinearHistory { commits: (0..n).map(|i| format!("c{i:02}")).collect() }
}

/// Exhaustive adjacent-pair scan: the correctness oracle for the bisection.
pub(crate) fn exhaustive_scan(
    history: &LinearHistory,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<Vec<ActionableWarning>, MinerError> {
    let mut out = Vec::new();
    for pair in history.commits.windows(2) {
        let left = runner::warning_records(&pair[0], runner, cache)?;
        let right = runner::warning_records(&pair[1], runner, cache)?;
        for record in &left.records {
            if !right.identities.contains(&record.identity) {
                out.push(ActionableWarning {
                    warning: record.clone(),
                    last_present: pair[0].clone(),
                    fix_commit: pair[1].clone(),
                });
            }
        }
    }
    Ok(out)
}

#[test]
fn binary_search_identical_endpoints_yields_nothing() {
    let set: Vec<WarningRecord> = (1..=4).map(simple_record).collect();
    let history = chain_history(8);
    let runner = InMemoryRunner::new(
        history.commits.iter().map(|c| (c.clone(), set.clone())),
    );
    let cache = WarningCache::new();
    let found = binary_search_history(&history, &runner, &cache).unwrap();
    assert!(found.is_empty());
    // Only the two endpoints are ever fetched.
    assert_eq!(runner.backend_calls(), 2);
}

#[test]
fn binary_search_two_commit_history() {
    let a = simple_record(1);
    let b = simple_record(2);
    let history = chain_history(2);
    let runner = memory_runner(&[("c00", vec![a.clone(), b.clone()]), ("c01", vec![b])]);
    let cache = WarningCache::new();
    let found = binary_search_history(&history, &runner, &cache).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found[0].warning.identity, a.identity);
    assert_eq!(found[0].last_present, "c00");
    assert_eq!(found[0].fix_commit, "c01");
}

/// Monotone-shrinking warning sets along a chain: each step drops a few.
pub(crate) fn monotone_chain(seed: u64, len: usize) -> (LinearHistory, InMemoryRunner) {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut pool: Vec<WarningRecord> = (1..=(len as u32 * 2)).map(simple_record).collect();
    let history = LinearHistory { commits: (0..len).map(|i| format!("c{i:02}")).collect() };
    let mut sets = Vec::new();
    for commit in &history.commits {
        sets.push((commit.clone(), pool.clone()));
        let drops = (next() % 3) as usize;
        for _ in 0..drops {
            if pool.is_empty() {
                break;
            }
            let at = (next() % pool.len() as u64) as usize;
            pool.remove(at);
        }
    }
    (history, InMemoryRunner::new(sets))
}

#[test]
fn binary_search_matches_exhaustive_scan_on_monotone_chains() {
    for seed in 0..50u64 {
        let (history, runner) = monotone_chain(seed * 7 + 1, 16);
        let cache = WarningCache::new();
        let mut expect = exhaustive_scan(&history, &runner, &cache).unwrap();
        expect.sort_by_key(|a| (a.fix_commit.clone(), a.warning.identity));
        let mut got = binary_search_history(&history, &runner, &cache).unwrap();
        got.sort_by_key(|a| (a.fix_commit.clone(), a.warning.identity));
        assert_eq!(got, expect, "seed {seed}");
    }
}

#[test]
fn binary_search_misses_transient_warning_between_equal_endpoints() {
    // A warning that appears mid-history and vanishes again is invisible
    // when the endpoints agree: the documented lossiness of the approach.
    let base = vec![simple_record(1)];
    let with_extra = vec![simple_record(1), simple_record(99)];
    let history = chain_history(4);
    let runner = memory_runner(&[
        ("c00", base.clone()),
        ("c01", with_extra.clone()),
        ("c02", with_extra),
        ("c03", base),
    ]);
    let cache = WarningCache::new();
    let found = binary_search_history(&history, &runner, &cache).unwrap();
    assert!(found.is_empty(), "transient warning must be skipped, not found");
    // The oracle scan does see it.
    let scan = exhaustive_scan(&history, &runner, &cache).unwrap();
    assert_eq!(scan.len(), 1);
}

#[test]
fn binary_search_results_identical_with_cache_on_and_off() {
    for seed in [3u64, 11, 29] {
        let (history, runner) = monotone_chain(seed, 16);
        let with_cache = binary_search_history(&history, &runner, &WarningCache::new()).unwrap();
        let without = binary_search_history(&history, &runner, &WarningCache::disabled()).unwrap();
        assert_eq!(with_cache, without);
    }
}

#[test]
fn actionable_invariant_holds_for_every_item() {
    let (history, runner) = monotone_chain(5, 16);
    let cache = WarningCache::new();
    let found = binary_search_history(&history, &runner, &cache).unwrap();
    assert!(!found.is_empty());
    for aw in &found {
        let li = history.commits.iter().position(|c| c == &aw.last_present).unwrap();
        let fi = history.commits.iter().position(|c| c == &aw.fix_commit).unwrap();
        assert_eq!(fi, li + 1, "fix commit must be the child of last_present");
        let before = warning_set(&aw.last_present, &runner, &cache).unwrap();
        let after = warning_set(&aw.fix_commit, &runner, &cache).unwrap();
        assert!(before.contains(&aw.warning.identity));
        assert!(!after.contains(&aw.warning.identity));
    }
}

#[test]
fn mine_graph_rejects_an_empty_graph() {
    let g = CommitGraph::from_nodes(vec![]);
    let runner = memory_runner(&[]);
    let cache = WarningCache::new();
    assert!(matches!(
        mine_graph(&g, &runner, &cache),
        Err(MinerError::RepoAccess(_))
    ));
}

#[test]
fn warning_cache_supports_concurrent_readers_and_writers() {
    let records: Vec<(String, Vec<WarningRecord>)> = (0..32)
        .map(|i| (format!("c{i:02}"), vec![simple_record(i + 1), simple_record(i + 2)]))
        .collect();
    let runner = InMemoryRunner::new(records);
    let cache = WarningCache::new();
    std::thread::scope(|scope| {
        for t in 0..8 {
            let (runner, cache) = (&runner, &cache);
            scope.spawn(move || {
                for i in 0..32u32 {
                    let commit = format!("c{:02}", (i + t) % 32);
                    let set = warning_set(&commit, runner, cache).unwrap();
                    assert_eq!(set.len(), 2);
                }
            });
        }
    });
    // Duplicate concurrent computes are allowed; the values are identical.
    assert!(runner.backend_calls() >= 32);
}

#[test]
fn two_year_rule_boundaries() {
    let head_time = 1_700_000_000;
    let day = 86_400;
    let old = (simple_record(1), head_time - 3 * 365 * day);
    let young = (simple_record(2), head_time - day);
    let boundary = (simple_record(3), head_time - 730 * day);
    let (false_warnings, excluded) =
        apply_two_year_rule(vec![old.clone(), young, boundary], head_time, 730);
    assert_eq!(false_warnings.len(), 1);
    assert_eq!(false_warnings[0], old.0);
    assert_eq!(excluded.len(), 2, "exactly-730-days and younger survivors are excluded");
}

#[test]
fn mine_graph_on_branching_fixture_with_replay_sets() {
    // Warning w1 vanishes between n03 and n05; w2 survives everywhere on the
    // main line; w3 vanishes between n10 and n11.
    let w1 = simple_record(1);
    let w2 = simple_record(2);
    let w3 = simple_record(3);
    let g = three_root_merge_graph();
    let sets = vec![
        ("n01", vec![w1.clone(), w2.clone()]),
        ("n03", vec![w1.clone(), w2.clone()]),
        ("n05", vec![w2.clone()]),
        ("n08", vec![w2.clone()]),
        ("n02", vec![w2.clone()]),
        ("n06", vec![w2.clone()]),
        ("n09", vec![w2.clone()]),
        ("n04", vec![]),
        ("n07", vec![]),
        ("n10", vec![w2.clone(), w3.clone()]),
        ("n11", vec![w2.clone()]),
    ];
    let runner = memory_runner(&sets);
    let cache = WarningCache::new();
    let outcome = mine_graph(&g, &runner, &cache).unwrap();

    let mut vanished: Vec<(u64, &str, &str)> = outcome
        .actionable
        .iter()
        .map(|a| (a.warning.identity, a.last_present.as_str(), a.fix_commit.as_str()))
        .collect();
    vanished.sort();
    let mut expect = vec![
        (w1.identity, "n03", "n05"),
        (w3.identity, "n10", "n11"),
    ];
    expect.sort();
    assert_eq!(vanished, expect);

    assert_eq!(outcome.head, "n11");
    assert_eq!(outcome.head_time, 11);
    assert_eq!(outcome.survivors.len(), 1);
    assert_eq!(outcome.survivors[0].warning.identity, w2.identity);
    assert_eq!(outcome.survivors[0].first_seen, 1, "w2 first observed at n01");
}
