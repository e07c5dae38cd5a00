//! Git-history mining: build the commit graph, strip merges and decompose it
//! into linear histories, bisect each history's warning sets to find
//! actionable warnings, and classify long-lived survivors as false warnings.

mod runner;

pub use runner::{
    CommitWarnings, InMemoryRunner, LiveRunner, LiveRunnerConfig, ReplayRunner, ToolRunner,
    WarningCache,
};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::AdapterError;
use crate::warning::WarningRecord;

/// Seconds per day, for the survival threshold.
const DAY_SECONDS: i64 = 86_400;

/// Default survival threshold: warnings unaddressed longer than this are
/// false warnings.
pub const DEFAULT_FALSE_WARNING_DAYS: i64 = 730;

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("repository access failed: {0}")]
    RepoAccess(String),
    #[error("unresolved ref: {0}")]
    UnresolvedRef(String),
    #[error("commit graph contains a cycle")]
    CycleDetected,
    #[error("build timed out for commit {0}")]
    BuildTimeout(String),
    #[error("build failed for commit {commit}: {message}")]
    BuildFailure { commit: String, message: String },
    #[error("missing replay data: {0}")]
    MissingReplayData(String),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// One commit in the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitNode {
    pub id: String,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    /// Committer time, UTC seconds.
    pub timestamp: i64,
    pub message: String,
}

impl CommitNode {
    pub fn is_merge(&self) -> bool {
        self.parents.len() >= 2
    }
}

/// Commit DAG with consistent parent/child links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommitGraph {
    nodes: BTreeMap<String, CommitNode>,
}

impl CommitGraph {
    /// Build from nodes with `parents` filled in; `children` are derived.
    /// Parents outside the node set are dropped (history boundary).
    pub fn from_nodes(nodes: impl IntoIterator<Item = CommitNode>) -> CommitGraph {
        let mut map: BTreeMap<String, CommitNode> = nodes
            .into_iter()
            .map(|mut n| {
                n.children.clear();
                (n.id.clone(), n)
            })
            .collect();
        let ids: Vec<String> = map.keys().cloned().collect();
        for id in &ids {
            map.get_mut(id).unwrap().parents.retain(|p| ids.binary_search(p).is_ok());
        }
        let edges: Vec<(String, String)> = map
            .values()
            .flat_map(|n| n.parents.iter().map(|p| (p.clone(), n.id.clone())))
            .collect();
        for (parent, child) in edges {
            map.get_mut(&parent).unwrap().children.push(child);
        }
        for node in map.values_mut() {
            node.children.sort();
            node.children.dedup();
        }
        CommitGraph { nodes: map }
    }

    pub fn node(&self, id: &str) -> Option<&CommitNode> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CommitNode> {
        self.nodes.values()
    }

    /// Total number of parent->child edges.
    pub fn edge_count(&self) -> usize {
        self.nodes.values().map(|n| n.parents.len()).sum()
    }

    fn sorted_by_time<'a>(&'a self, ids: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
        let mut v: Vec<&str> = ids.into_iter().collect();
        v.sort_by_key(|id| (self.nodes[*id].timestamp, *id));
        v
    }
}

/// A merge-free chain of commits, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearHistory {
    pub commits: Vec<String>,
}

impl LinearHistory {
    pub fn start(&self) -> &str {
        self.commits.first().expect("history is non-empty")
    }

    pub fn end(&self) -> &str {
        self.commits.last().expect("history is non-empty")
    }
}

/// A warning plus the adjacent revision pair where it vanished.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionableWarning {
    pub warning: WarningRecord,
    pub last_present: String,
    pub fix_commit: String,
}

/// A warning still present at the head revision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivingWarning {
    pub warning: WarningRecord,
    /// Earliest observed occurrence, UTC seconds.
    pub first_seen: i64,
    /// Revision where it still exists.
    pub head: String,
}

fn git(repo: &Path, args: &[&str]) -> Result<String, MinerError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()
        .map_err(|e| MinerError::RepoAccess(format!("cannot run git: {e}")))?;
    if !out.status.success() {
        return Err(MinerError::RepoAccess(format!(
            "git {} failed: {}",
            args.first().unwrap_or(&""),
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Load all ancestors of the given tips from a git repository on disk.
pub fn build_commit_graph(repo: &Path, branch_tips: &[String]) -> Result<CommitGraph, MinerError> {
    if !repo.exists() {
        return Err(MinerError::RepoAccess(format!("{} does not exist", repo.display())));
    }
    git(repo, &["rev-parse", "--git-dir"])?;

    let mut resolved = Vec::new();
    for tip in branch_tips {
        let spec = format!("{tip}^{{commit}}");
        let out = Command::new("git")
            .arg("-C")
            .arg(repo)
            .args(["rev-parse", "--verify", "--quiet", &spec])
            .output()
            .map_err(|e| MinerError::RepoAccess(format!("cannot run git: {e}")))?;
        if !out.status.success() {
            return Err(MinerError::UnresolvedRef(tip.clone()));
        }
        resolved.push(String::from_utf8_lossy(&out.stdout).trim().to_string());
    }
    if resolved.is_empty() {
        return Err(MinerError::UnresolvedRef("no branch tips given".to_string()));
    }

    // Fields are unit-separated with the free-form message last; records are
    // NUL-terminated (git forbids NUL inside commit objects).
    let mut args: Vec<&str> = vec!["log", "--format=%H%x1f%ct%x1f%P%x1f%B%x00"];
    for tip in &resolved {
        args.push(tip);
    }
    let raw = git(repo, &args)?;

    let mut nodes = Vec::new();
    for record in raw.split('\0') {
        let record = record.trim_start_matches('\n');
        if record.is_empty() {
            continue;
        }
        let mut fields = record.splitn(4, '\x1f');
        let (Some(id), Some(ts), Some(parents), Some(message)) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(MinerError::RepoAccess(format!("unparseable git log record: {record:?}")));
        };
        nodes.push(CommitNode {
            id: id.to_string(),
            parents: parents.split_whitespace().map(str::to_string).collect(),
            children: Vec::new(),
            timestamp: ts.parse().map_err(|_| {
                MinerError::RepoAccess(format!("bad commit timestamp {ts:?} for {id}"))
            })?,
            message: message.to_string(),
        });
    }
    Ok(CommitGraph::from_nodes(nodes))
}

/// Verify the graph is a DAG via Kahn's algorithm.
fn check_acyclic(graph: &CommitGraph) -> Result<(), MinerError> {
    let mut indegree: HashMap<&str, usize> = graph
        .nodes()
        .map(|n| (n.id.as_str(), n.parents.len()))
        .collect();
    let mut queue: VecDeque<&str> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut seen = 0usize;
    while let Some(id) = queue.pop_front() {
        seen += 1;
        for child in &graph.nodes[id].children {
            let d = indegree.get_mut(child.as_str()).expect("child is a node");
            *d -= 1;
            if *d == 0 {
                queue.push_back(child);
            }
        }
    }
    if seen == graph.len() {
        Ok(())
    } else {
        Err(MinerError::CycleDetected)
    }
}

/// Decompose the graph into merge-free linear histories.
///
/// Every incoming edge of a merge commit is removed, making the merge a
/// start node and its parents end nodes along those edges. Start nodes are
/// parentless nodes and nodes with more than one child; a history follows
/// unique-child edges until it reaches a childless node or (inclusively) a
/// multi-child node, which seeds one new history per outgoing edge. Each
/// surviving edge lands in exactly one history.
pub fn linearize(graph: &CommitGraph) -> Result<Vec<LinearHistory>, MinerError> {
    check_acyclic(graph)?;

    // Merge-stripped adjacency.
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut parent_count: BTreeMap<&str, usize> = BTreeMap::new();
    for node in graph.nodes() {
        children.entry(node.id.as_str()).or_default();
        parent_count.entry(node.id.as_str()).or_insert(0);
    }
    for node in graph.nodes() {
        if node.is_merge() {
            continue; // all incoming edges of a merge are stripped
        }
        for parent in &node.parents {
            children.get_mut(parent.as_str()).unwrap().push(node.id.as_str());
            *parent_count.get_mut(node.id.as_str()).unwrap() += 1;
        }
    }
    for kids in children.values_mut() {
        kids.sort_by_key(|id| (graph.nodes[*id].timestamp, *id));
    }

    let starts: Vec<&str> = graph
        .sorted_by_time(graph.nodes.keys().map(String::as_str))
        .into_iter()
        .filter(|id| parent_count[id] == 0 || children[id].len() > 1)
        .collect();

    let mut histories = Vec::new();
    for start in starts {
        let kids = &children[start];
        if kids.is_empty() {
            if parent_count[start] == 0 {
                histories.push(LinearHistory { commits: vec![start.to_string()] });
            }
            // A childless multi-child node cannot exist; a childless node
            // with a parent is some history's end, not a start.
            continue;
        }
        for &first in kids {
            let mut commits = vec![start.to_string(), first.to_string()];
            let mut cur = first;
            loop {
                let next = &children[cur];
                if next.len() != 1 {
                    break;
                }
                cur = next[0];
                commits.push(cur.to_string());
            }
            histories.push(LinearHistory { commits });
        }
    }
    Ok(histories)
}

fn warnings_at(
    commit: &str,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<std::sync::Arc<CommitWarnings>, MinerError> {
    runner::warning_records(commit, runner, cache)
}

/// Deduplicated warning identity set of one commit, served through the
/// cache.
pub fn warning_set(
    commit: &str,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<BTreeSet<u64>, MinerError> {
    Ok(warnings_at(commit, runner, cache)?.identities.clone())
}

/// Bisect one linear history: intervals with identical endpoint warning
/// sets are skipped; adjacent pairs yield the warnings that vanish across
/// them. Output is ordered by fix-commit position, then identity.
pub fn binary_search_history(
    history: &LinearHistory,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<Vec<ActionableWarning>, MinerError> {
    let commits = &history.commits;
    let mut out = Vec::new();
    if commits.len() < 2 {
        return Ok(out);
    }
    search_interval(commits, 0, commits.len() - 1, runner, cache, &mut out)?;
    let position: HashMap<&str, usize> = commits
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    out.sort_by_key(|a| (position[a.fix_commit.as_str()], a.warning.identity));
    Ok(out)
}

fn search_interval(
    commits: &[String],
    lo: usize,
    hi: usize,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
    out: &mut Vec<ActionableWarning>,
) -> Result<(), MinerError> {
    let left = warnings_at(&commits[lo], runner, cache)?;
    let right = warnings_at(&commits[hi], runner, cache)?;
    if left.identities == right.identities {
        return Ok(());
    }
    if hi == lo + 1 {
        for record in &left.records {
            if !right.identities.contains(&record.identity) {
                out.push(ActionableWarning {
                    warning: record.clone(),
                    last_present: commits[lo].clone(),
                    fix_commit: commits[hi].clone(),
                });
            }
        }
        return Ok(());
    }
    let mid = (lo + hi) / 2;
    search_interval(commits, lo, mid, runner, cache, out)?;
    search_interval(commits, mid, hi, runner, cache, out)
}

/// Split surviving warnings by age: survivors older than the threshold are
/// false warnings, younger ones are excluded from the labeled dataset
/// entirely.
pub fn apply_two_year_rule(
    surviving: Vec<(WarningRecord, i64)>,
    head_time: i64,
    threshold_days: i64,
) -> (Vec<WarningRecord>, Vec<WarningRecord>) {
    let mut false_warnings = Vec::new();
    let mut excluded = Vec::new();
    for (warning, first_seen) in surviving {
        debug_assert!(first_seen <= head_time);
        if head_time - first_seen > threshold_days * DAY_SECONDS {
            false_warnings.push(warning);
        } else {
            excluded.push(warning);
        }
    }
    (false_warnings, excluded)
}

/// Full mining result for one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MineOutcome {
    pub actionable: Vec<ActionableWarning>,
    pub survivors: Vec<SurvivingWarning>,
    /// Newest end node across all histories.
    pub head: String,
    pub head_time: i64,
}

/// Mine every linear history of the graph.
///
/// Survivors are the warnings present at the newest end node that never
/// vanished anywhere; their `first_seen` is the earliest endpoint commit
/// observed to contain them (interior commits are only visited when the
/// bisection needs them, so this is an upper bound on true first
/// occurrence).
pub fn mine_graph(
    graph: &CommitGraph,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<MineOutcome, MinerError> {
    let histories = linearize(graph)?;
    if histories.is_empty() {
        return Err(MinerError::RepoAccess("commit graph is empty".to_string()));
    }
    let mut actionable = Vec::new();
    for history in &histories {
        actionable.extend(binary_search_history(history, runner, cache)?);
    }

    let mut endpoints: BTreeSet<&str> = BTreeSet::new();
    for h in &histories {
        endpoints.insert(h.start());
        endpoints.insert(h.end());
    }
    let mut first_seen: BTreeMap<u64, i64> = BTreeMap::new();
    for &commit in &endpoints {
        let ws = warnings_at(commit, runner, cache)?;
        let ts = graph.nodes[commit].timestamp;
        for &id in &ws.identities {
            first_seen
                .entry(id)
                .and_modify(|t| *t = (*t).min(ts))
                .or_insert(ts);
        }
    }

    let ends: Vec<&str> = histories.iter().map(|h| h.end()).collect();
    let head = *ends
        .iter()
        .max_by_key(|id| (graph.nodes[**id].timestamp, **id))
        .expect("at least one history");
    let head_time = graph.nodes[head].timestamp;

    let vanished: BTreeSet<u64> = actionable.iter().map(|a| a.warning.identity).collect();
    let head_warnings = warnings_at(head, runner, cache)?;
    let survivors = head_warnings
        .records
        .iter()
        .filter(|r| !vanished.contains(&r.identity))
        .map(|r| SurvivingWarning {
            warning: r.clone(),
            first_seen: first_seen[&r.identity],
            head: head.to_string(),
        })
        .collect();

    Ok(MineOutcome { actionable, survivors, head: head.to_string(), head_time })
}

#[cfg(test)]
mod tests;
