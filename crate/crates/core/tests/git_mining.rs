//! Mining against real git repositories built on the fly.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use tempfile::TempDir;

use warntriage_core::miner::{
    build_commit_graph, linearize, warning_set, LiveRunner, LiveRunnerConfig, MinerError,
    ReplayRunner, ToolRunner, WarningCache,
};

struct GitFixture {
    _tmp: TempDir,
    repo: PathBuf,
    tick: i64,
}

impl GitFixture {
    fn new() -> GitFixture {
        let tmp = TempDir::new().unwrap();
        let repo = tmp.path().join("repo");
        std::fs::create_dir(&repo).unwrap();
        let fx = GitFixture { _tmp: tmp, repo, tick: 1_600_000_000 };
        fx.git(&["init", "-q", "-b", "main"]);
        fx.git(&["config", "user.email", "fixture@example.com"]);
        fx.git(&["config", "user.name", "Fixture"]);
        fx.git(&["config", "commit.gpgsign", "false"]);
        fx
    }

    fn git(&self, args: &[&str]) -> String {
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(args)
            .env("GIT_AUTHOR_DATE", format!("{} +0000", self.tick))
            .env("GIT_COMMITTER_DATE", format!("{} +0000", self.tick))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "git {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).trim().to_string()
    }

    fn commit(&mut self, file: &str, content: &str, message: &str) -> String {
        self.tick += 60;
        std::fs::write(self.repo.join(file), content).unwrap();
        self.git(&["add", "-A"]);
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(["commit", "-q", "-m", message])
            .env("GIT_AUTHOR_DATE", format!("{} +0000", self.tick))
            .env("GIT_COMMITTER_DATE", format!("{} +0000", self.tick))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        self.git(&["rev-parse", "HEAD"])
    }

    fn orphan_branch(&self, name: &str) {
        self.git(&["checkout", "-q", "--orphan", name]);
        let _ = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(["rm", "-rfq", "."])
            .output();
    }

    fn merge(&mut self, branch: &str, message: &str) -> String {
        self.tick += 60;
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args([
                "merge",
                "-q",
                "--no-ff",
                "--allow-unrelated-histories",
                "-m",
                message,
                branch,
            ])
            .env("GIT_AUTHOR_DATE", format!("{} +0000", self.tick))
            .env("GIT_COMMITTER_DATE", format!("{} +0000", self.tick))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        self.git(&["rev-parse", "HEAD"])
    }
}

#[test]
fn single_commit_repo() {
    let mut fx = GitFixture::new();
    let c0 = fx.commit("a.txt", "1", "only");
    let graph = build_commit_graph(&fx.repo, std::slice::from_ref(&c0)).unwrap();
    assert_eq!(graph.len(), 1);
    assert_eq!(graph.edge_count(), 0);
    let n = graph.node(&c0).unwrap();
    assert!(n.parents.is_empty() && n.children.is_empty());
    assert_eq!(n.message.trim(), "only");
}

#[test]
fn three_commit_chain() {
    let mut fx = GitFixture::new();
    let c0 = fx.commit("a.txt", "1", "one");
    let c1 = fx.commit("a.txt", "2", "two");
    let c2 = fx.commit("a.txt", "3", "three");
    let graph = build_commit_graph(&fx.repo, &["main".to_string()]).unwrap();
    assert_eq!(graph.len(), 3);
    assert_eq!(graph.edge_count(), 2);
    assert_eq!(graph.node(&c2).unwrap().parents, vec![c1.clone()]);
    assert_eq!(graph.node(&c1).unwrap().parents, vec![c0.clone()]);
    assert_eq!(graph.node(&c1).unwrap().children, vec![c2.clone()]);
    let histories = linearize(&graph).unwrap();
    assert_eq!(histories.len(), 1);
    assert_eq!(histories[0].commits, vec![c0, c1, c2]);
}

/// Eleven commits, one two-parent merge, three roots: linearizes into four
/// merge-free histories.
#[test]
fn branching_fixture_mines_four_histories() {
    let mut fx = GitFixture::new();
    let n01 = fx.commit("a.txt", "1", "n01");
    let n03 = fx.commit("a.txt", "3", "n03");
    let n05 = fx.commit("a.txt", "5", "n05");
    let n08 = fx.commit("a.txt", "8", "n08");

    fx.orphan_branch("feature");
    let n02 = fx.commit("b.txt", "2", "n02");
    let n06 = fx.commit("b.txt", "6", "n06");
    let n09 = fx.commit("b.txt", "9", "n09");

    fx.orphan_branch("stub");
    let n04 = fx.commit("c.txt", "4", "n04");
    let n07 = fx.commit("c.txt", "7", "n07");

    fx.git(&["checkout", "-q", "main"]);
    let n10 = fx.merge("feature", "n10");
    let n11 = fx.commit("a.txt", "11", "n11");

    let graph = build_commit_graph(&fx.repo, &[n11.clone(), n07.clone()]).unwrap();
    assert_eq!(graph.len(), 11);
    let merge = graph.node(&n10).unwrap();
    assert_eq!(merge.parents.len(), 2, "merge must have two parents before stripping");
    assert!(merge.parents.contains(&n08) && merge.parents.contains(&n09));

    let histories = linearize(&graph).unwrap();
    assert_eq!(histories.len(), 4);
    let chains: std::collections::BTreeSet<Vec<String>> =
        histories.iter().map(|h| h.commits.clone()).collect();
    let expect: std::collections::BTreeSet<Vec<String>> = [
        vec![n01, n03, n05, n08.clone()],
        vec![n02, n06, n09.clone()],
        vec![n04, n07],
        vec![n10.clone(), n11],
    ]
    .into_iter()
    .collect();
    assert_eq!(chains, expect);
    for h in &histories {
        for pair in h.commits.windows(2) {
            assert_ne!(pair[1], n10, "merge edges must appear in no history");
        }
    }
}

#[test]
fn error_cases() {
    let err = build_commit_graph(Path::new("/nonexistent/nowhere"), &["HEAD".into()]);
    assert!(matches!(err, Err(MinerError::RepoAccess(_))));

    let mut fx = GitFixture::new();
    fx.commit("a.txt", "1", "c");
    let err = build_commit_graph(&fx.repo, &["no-such-branch".into()]);
    assert!(matches!(err, Err(MinerError::UnresolvedRef(_))));
}

#[test]
fn replay_runner_missing_dir_and_commit() {
    assert!(matches!(
        ReplayRunner::new("/nonexistent/replays"),
        Err(MinerError::MissingReplayData(_))
    ));
    let tmp = TempDir::new().unwrap();
    let runner = ReplayRunner::new(tmp.path()).unwrap();
    let cache = WarningCache::new();
    assert!(matches!(
        warning_set("0000", &runner, &cache),
        Err(MinerError::MissingReplayData(_))
    ));
}

#[test]
fn replay_runner_reads_and_dedups_jsonl() {
    let tmp = TempDir::new().unwrap();
    let line = |ctx: &str| {
        format!(
            r#"{{"tool":"Infer","wtype":"DeadStore","file":"a.c","line":3,"column":null,"procedure":"f","qualifier":"The value written to `x` is never used","context_code":"{ctx}"}}"#
        )
    };
    std::fs::write(
        tmp.path().join("abc.jsonl"),
        format!("{}\n{}\n{}\n", line("x = 1;"), line("x = 1;"), line("y = 2;")),
    )
    .unwrap();
    let runner = ReplayRunner::new(tmp.path()).unwrap();
    let cache = WarningCache::new();
    let set = warning_set("abc", &runner, &cache).unwrap();
    assert_eq!(set.len(), 2, "records sharing identity collapse");
    assert_eq!(runner.backend_calls(), 1);
    warning_set("abc", &runner, &cache).unwrap();
    assert_eq!(runner.backend_calls(), 1, "cache hit must not touch the backend");
}

fn live_config(fx: &GitFixture, build_cmd: &str, infer_cmd: &str) -> LiveRunnerConfig {
    LiveRunnerConfig {
        repo: fx.repo.clone(),
        build_cmd: build_cmd.to_string(),
        tool_cmds: vec![("infer".to_string(), infer_cmd.to_string())],
        timeout: Duration::from_secs(10),
    }
}

#[test]
fn live_runner_checks_out_builds_and_parses() {
    let mut fx = GitFixture::new();
    let report = r#"[{"bug_type":"DEAD_STORE","qualifier":"The value written to `x` is never used","file":"src.c","line":2,"column":3,"procedure":"main"}]"#;
    fx.commit("src.c", "int main(void) {\n    int x = 1;\n    return 0;\n}\n", "c0");
    std::fs::write(fx.repo.join("report.json"), report).unwrap();
    let head = fx.commit("report.json", report, "add report");

    // The "build" drops a marker proving it ran in the worktree; the "tool"
    // prints the canned report.
    let runner = LiveRunner::new(live_config(
        &fx,
        "test -f src.c && touch built.marker",
        "test -f built.marker && cat report.json",
    ));
    let cache = WarningCache::new();
    let set = warning_set(&head, &runner, &cache).unwrap();
    assert_eq!(set.len(), 1);
    let records = warntriage_core::miner::ToolRunner::records(&runner, &head).unwrap();
    assert_eq!(records.len(), 1);
    // Context code was filled from the checked-out source.
    assert_eq!(records[0].context_code, "int x = 1;");
}

#[test]
fn live_runner_build_failure_and_timeout() {
    let mut fx = GitFixture::new();
    let head = fx.commit("src.c", "int x;\n", "c0");

    let failing = LiveRunner::new(live_config(&fx, "exit 3", "echo []"));
    assert!(matches!(
        failing.records(&head),
        Err(MinerError::BuildFailure { .. })
    ));

    let mut slow_cfg = live_config(&fx, "sleep 5", "echo []");
    slow_cfg.timeout = Duration::from_millis(200);
    let slow = LiveRunner::new(slow_cfg);
    assert!(matches!(slow.records(&head), Err(MinerError::BuildTimeout(_))));
}
