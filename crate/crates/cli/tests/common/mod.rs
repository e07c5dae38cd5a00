//! Shared pipeline fixture: a small branching git repository with replay
//! warning data whose mining and labeling outcomes are known exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;
use warntriage_core::warning::{Tool, WarningRecord, WarningType};

pub struct GitFixture {
    pub repo: PathBuf,
    tick: i64,
}

impl GitFixture {
    pub fn init(repo: PathBuf, base_time: i64) -> GitFixture {
        std::fs::create_dir_all(&repo).unwrap();
        let fx = GitFixture { repo, tick: base_time };
        fx.git(&["init", "-q", "-b", "main"]);
        fx.git(&["config", "user.email", "fixture@example.com"]);
        fx.git(&["config", "user.name", "Fixture"]);
        fx.git(&["config", "commit.gpgsign", "false"]);
        fx
    }

    pub fn git(&self, args: &[&str]) -> String {
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

    pub fn advance(&mut self, seconds: i64) {
        self.tick += seconds;
    }

    pub fn write(&self, file: &str, content: &str) {
        let path = self.repo.join(file);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).unwrap();
        }
        std::fs::write(path, content).unwrap();
    }

    pub fn commit(&mut self, message: &str) -> String {
        self.advance(3600);
        self.git(&["add", "-A"]);
        let out = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(["commit", "-q", "--allow-empty", "-m", message])
            .env("GIT_AUTHOR_DATE", format!("{} +0000", self.tick))
            .env("GIT_COMMITTER_DATE", format!("{} +0000", self.tick))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        self.git(&["rev-parse", "HEAD"])
    }

    pub fn orphan_branch(&self, name: &str) {
        self.git(&["checkout", "-q", "--orphan", name]);
        let _ = Command::new("git")
            .arg("-C")
            .arg(&self.repo)
            .args(["rm", "-rfq", "."])
            .output();
    }

    pub fn merge(&mut self, branch: &str, message: &str) -> String {
        self.advance(3600);
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

fn padded_file(total_pad: usize, body: &[(usize, &str)]) -> String {
    // body: (1-based line, text); everything else is a pad comment.
    let max_line = body.iter().map(|(l, _)| *l).max().unwrap_or(0).max(total_pad);
    let map: BTreeMap<usize, &str> = body.iter().copied().collect();
    let mut out = String::new();
    for line in 1..=max_line {
        match map.get(&line) {
            Some(text) => {
                let _ = writeln!(out, "{text}");
            }
            None => {
                let _ = writeln!(out, "/* pad {line} */");
            }
        }
    }
    out
}

fn map_c(fixed: bool) -> String {
    let assignment = if fixed {
        "    UA_NodeMapSlot *slot = findOccupiedSlot(ns, &node->head.nodeId);"
    } else {
        "    UA_NodeMapSlot *slot = findOccupiedSlot(ns, &node->nodeId);"
    };
    padded_file(
        382,
        &[
            (367, "static UA_StatusCode"),
            (368, "UA_NodeMap_replaceNode(UA_Node *node) {"),
            (369, "    UA_NodeMap *ns = (UA_NodeMap*)context;"),
            (373, assignment),
            (374, "    if(!slot) {"),
            (375, "        return UA_STATUSCODE_BADNODEID;"),
            (376, "    }"),
            (380, "    UA_NodeMapEntry *oldEntry = slot->entry;"),
            (381, "    return UA_STATUSCODE_GOOD;"),
            (382, "}"),
        ],
    )
}

fn evhtp_c(fixed: bool) -> String {
    let mut body: Vec<(usize, &str)> = vec![
        (3645, "static int"),
        (3646, "evhtp_bind_sockaddr(evhtp_t * htp) {"),
        (3647, "    int fd;"),
        (3648, "    int rc;"),
        (3649, "    int backlog = 128;"),
        (3651, "    fd = socket(sa->sa_family, SOCK_STREAM, 0);"),
        (3668, "    rc = bind_sockaddr(htp, fd);"),
        (3669, "    if (rc != 0) {"),
    ];
    if fixed {
        body.extend([
            (3670, "        if (fd != -1)"),
            (3671, "            evutil_closesocket(fd);"),
            (3672, "        return -1;"),
            (3673, "    }"),
            (3675, "    return evhtp_accept_socket(htp, fd, backlog);"),
            (3676, "}"),
        ]);
    } else {
        body.extend([
            (3670, "        return -1;"),
            (3671, "    }"),
            (3673, "    return evhtp_accept_socket(htp, fd, backlog);"),
            (3674, "}"),
        ]);
    }
    padded_file(3676, &body)
}

fn parser_c(trailer: &str) -> String {
    let trailer_line = format!("    /* {trailer} */");
    let body: Vec<(usize, &str)> = vec![
        (18, "static void parse_all(void) {"),
        (19, "    int x;"),
        (20, "    x = compute();"),
        (21, "    run();"),
        (22, "    /* trailer one */"),
        (23, trailer_line.as_str()),
        (24, "}"),
    ];
    padded_file(24, &body)
}

pub fn warning_a() -> WarningRecord {
    WarningRecord::new(
        Tool::Infer,
        WarningType::NullDereference,
        "src/map.c",
        380,
        Some(5),
        "UA_NodeMap_replaceNode",
        "pointer `slot` last assigned on line 373 could be null and is dereferenced at line 380",
        "UA_NodeMapEntry *oldEntry = slot->entry;",
    )
}

pub fn warning_b() -> WarningRecord {
    WarningRecord::new(
        Tool::Infer,
        WarningType::ResourceLeak,
        "evhtp.c",
        3651,
        None,
        "",
        "Resource acquired to `fd` by call to `socket()` at line 3651 is not released after line 3673.",
        "fd = socket(sa->sa_family, SOCK_STREAM, 0);",
    )
}

pub fn warning_c() -> WarningRecord {
    WarningRecord::new(
        Tool::Infer,
        WarningType::DeadStore,
        "parser.c",
        20,
        None,
        "parse_all",
        "The value written to `x` is never used",
        "x = compute();",
    )
}

pub fn warning_d() -> WarningRecord {
    WarningRecord::new(
        Tool::Flawfinder,
        WarningType::BufferOverflow,
        "legacy.c",
        100,
        Some(3),
        "",
        "Does not check for buffer overflows when copying to destination (CWE-120)",
        "strcpy(dst, src);",
    )
}

pub fn warning_e() -> WarningRecord {
    WarningRecord::new(
        Tool::Infer,
        WarningType::UninitializedVariable,
        "src/map.c",
        369,
        None,
        "UA_NodeMap_replaceNode",
        "The value read from tmp was never initialized",
        "UA_NodeMap *ns = (UA_NodeMap*)context;",
    )
}

fn write_replay(dir: &Path, commit: &str, records: &[WarningRecord]) {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).unwrap());
        text.push('\n');
    }
    std::fs::write(dir.join(format!("{commit}.jsonl")), text).unwrap();
}

/// The full mining fixture: eleven commits across three roots and one merge,
/// replay warning sets, and the exact labels the pipeline must produce.
///
/// Mining finds three actionable warnings (one per fix commit n05, n08, n09)
/// labeling UTB, VTB, and LTB respectively, plus one long-lived false
/// warning; one young survivor is excluded by the survival rule.
pub struct PipelineFixture {
    pub tmp: TempDir,
    pub repo: PathBuf,
    pub replay: PathBuf,
    // Not every test target reads the commit map.
    #[allow(dead_code)]
    pub shas: BTreeMap<&'static str, String>,
}

impl PipelineFixture {
    #[allow(clippy::new_without_default)]
    pub fn new() -> PipelineFixture {
        let tmp = TempDir::new().unwrap();
        let repo = tmp.path().join("repo");
        let replay = tmp.path().join("replay");
        std::fs::create_dir(&replay).unwrap();
        let mut fx = GitFixture::init(repo.clone(), 1_500_000_000);
        let mut shas: BTreeMap<&'static str, String> = BTreeMap::new();

        // Main line.
        fx.write("src/map.c", &map_c(false));
        fx.write("evhtp.c", &evhtp_c(false));
        fx.write("docs.txt", "v1\n");
        shas.insert("n01", fx.commit("initial import"));
        fx.write("docs.txt", "v2\n");
        shas.insert("n03", fx.commit("update docs"));
        fx.write("src/map.c", &map_c(true));
        shas.insert(
            "n05",
            fx.commit("refactor(server): Use a union to avoid casting of node classes"),
        );
        fx.write("evhtp.c", &evhtp_c(true));
        shas.insert(
            "n08",
            fx.commit(
                "FIX: Socket leakage on error #6. Cleanup open file descriptors when bind_sockaddr fails.",
            ),
        );

        // Feature branch (orphan root).
        fx.orphan_branch("feature");
        fx.write("parser.c", &parser_c("trailer two"));
        shas.insert("n02", fx.commit("parser import"));
        fx.write("parser.c", &parser_c("trailer two")); // content unchanged
        shas.insert("n06", fx.commit("tidy parser notes"));
        fx.write("parser.c", &parser_c("trailer two, now handled by run"));
        shas.insert("n09", fx.commit("fix the parser glitch"));

        // Unmerged stub branch (orphan root).
        fx.orphan_branch("stub");
        fx.write("stub.txt", "s1\n");
        shas.insert("n04", fx.commit("stub import"));
        fx.write("stub.txt", "s2\n");
        shas.insert("n07", fx.commit("stub touch"));

        // Merge the feature branch, then one more commit. The gap makes the
        // early warnings old enough to fall under the survival rule.
        fx.git(&["checkout", "-q", "main"]);
        fx.advance(70_000_000);
        shas.insert("n10", fx.merge("feature", "merge feature line"));
        fx.write("docs.txt", "v3\n");
        shas.insert("n11", fx.commit("post-merge touch"));

        let (a, b, c, d, e) =
            (warning_a(), warning_b(), warning_c(), warning_d(), warning_e());
        let sets: &[(&str, Vec<&WarningRecord>)] = &[
            ("n01", vec![&a, &b, &d]),
            ("n03", vec![&a, &b, &d]),
            ("n05", vec![&b, &d]),
            ("n08", vec![&d]),
            ("n02", vec![&c, &d]),
            ("n06", vec![&c, &d]),
            ("n09", vec![&d]),
            ("n04", vec![&d]),
            ("n07", vec![&d]),
            ("n10", vec![&d, &e]),
            ("n11", vec![&d, &e]),
        ];
        for (name, records) in sets {
            let owned: Vec<WarningRecord> = records.iter().map(|r| (*r).clone()).collect();
            write_replay(&replay, &shas[name], &owned);
        }

        PipelineFixture { tmp, repo, replay, shas }
    }

    /// Config text for this fixture, writing artifacts under `out`.
    pub fn config_text(&self, out: &Path) -> String {
        format!(
            "repo = {}\n\
             branch_tips = main, stub\n\
             replay_dir = {}\n\
             out_dir = {}\n\
             seed = 7\n\
             encoder_dim = 512\n\
             hidden = 32\n\
             epochs = 6\n\
             batch_size = 8\n\
             eval_samples = 10\n\
             eval_sample_size = 3\n\
             eval_min_awhb = 1\n\
             recall_percents = 5, 50, 100\n",
            self.repo.display(),
            self.replay.display(),
            out.display()
        )
    }

    pub fn write_config(&self, name: &str, out: &Path) -> PathBuf {
        let path = self.tmp.path().join(name);
        std::fs::write(&path, self.config_text(out)).unwrap();
        path
    }
}
