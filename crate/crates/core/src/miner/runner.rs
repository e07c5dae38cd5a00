//! Warning-set backends for the miner. The replay backend serves
//! precomputed per-commit JSONL reports so whole repositories can be mined
//! without compiling anything; the live backend checks each commit out into
//! a scratch worktree, builds it, and runs the analyzers.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use crate::adapters::AdapterRegistry;
use crate::miner::MinerError;
use crate::warning::{dedup, WarningRecord};

/// Deduplicated warnings of one commit plus their identity set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitWarnings {
    pub records: Vec<WarningRecord>,
    pub identities: BTreeSet<u64>,
}

impl CommitWarnings {
    fn from_records(records: Vec<WarningRecord>) -> Self {
        let records = dedup(&records);
        let identities = records.iter().map(|r| r.identity).collect();
        CommitWarnings { records, identities }
    }
}

/// Produces the warning records of a commit. Implementations must be
/// deterministic per commit for a fixed backend state.
pub trait ToolRunner: Send + Sync {
    fn records(&self, commit: &str) -> Result<Vec<WarningRecord>, MinerError>;

    /// Distinguishes runners with different tool configurations in a shared
    /// cache.
    fn cache_tag(&self) -> String;

    /// Backend fetches performed so far; cache hits do not increment it.
    fn backend_calls(&self) -> usize;
}

type CacheMap = HashMap<(String, String), Arc<CommitWarnings>>;

/// Concurrent per-(commit, runner) cache of warning sets. Duplicate
/// concurrent computes are allowed; values are identical by determinism and
/// the last write wins.
pub struct WarningCache {
    inner: Option<RwLock<CacheMap>>,
}

impl Default for WarningCache {
    fn default() -> Self {
        WarningCache::new()
    }
}

impl WarningCache {
    pub fn new() -> Self {
        WarningCache { inner: Some(RwLock::new(HashMap::new())) }
    }

    /// A cache that never stores anything, for equivalence testing.
    pub fn disabled() -> Self {
        WarningCache { inner: None }
    }
}

/// Fetch a commit's warnings through the cache.
pub fn warning_records(
    commit: &str,
    runner: &dyn ToolRunner,
    cache: &WarningCache,
) -> Result<Arc<CommitWarnings>, MinerError> {
    let Some(lock) = &cache.inner else {
        return Ok(Arc::new(CommitWarnings::from_records(runner.records(commit)?)));
    };
    let key = (commit.to_string(), runner.cache_tag());
    if let Some(hit) = lock.read().expect("cache lock").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let computed = Arc::new(CommitWarnings::from_records(runner.records(commit)?));
    lock.write()
        .expect("cache lock")
        .insert(key, Arc::clone(&computed));
    Ok(computed)
}

/// Replay backend: one `<replay_dir>/<commit>.jsonl` file per commit, one
/// warning record object per line.
pub struct ReplayRunner {
    dir: PathBuf,
    calls: AtomicUsize,
}

impl ReplayRunner {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, MinerError> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(MinerError::MissingReplayData(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        Ok(ReplayRunner { dir, calls: AtomicUsize::new(0) })
    }
}

impl ToolRunner for ReplayRunner {
    fn records(&self, commit: &str) -> Result<Vec<WarningRecord>, MinerError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let path = self.dir.join(format!("{commit}.jsonl"));
        let text = std::fs::read_to_string(&path)
            .map_err(|_| MinerError::MissingReplayData(path.display().to_string()))?;
        let mut records = Vec::new();
        for (no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: WarningRecord = serde_json::from_str(line).map_err(|e| {
                MinerError::Adapter(crate::adapters::AdapterError::MalformedReport(format!(
                    "{}:{}: {e}",
                    path.display(),
                    no + 1
                )))
            })?;
            records.push(record);
        }
        Ok(records)
    }

    fn cache_tag(&self) -> String {
        format!("replay:{}", self.dir.display())
    }

    fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// In-memory backend for tests and programmatic pipelines.
#[derive(Default)]
pub struct InMemoryRunner {
    sets: HashMap<String, Vec<WarningRecord>>,
    calls: AtomicUsize,
}

impl InMemoryRunner {
    pub fn new(sets: impl IntoIterator<Item = (String, Vec<WarningRecord>)>) -> Self {
        InMemoryRunner { sets: sets.into_iter().collect(), calls: AtomicUsize::new(0) }
    }

    pub fn insert(&mut self, commit: impl Into<String>, records: Vec<WarningRecord>) {
        self.sets.insert(commit.into(), records);
    }
}

impl ToolRunner for InMemoryRunner {
    fn records(&self, commit: &str) -> Result<Vec<WarningRecord>, MinerError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.sets
            .get(commit)
            .cloned()
            .ok_or_else(|| MinerError::MissingReplayData(commit.to_string()))
    }

    fn cache_tag(&self) -> String {
        "in-memory".to_string()
    }

    fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Live backend configuration.
#[derive(Debug, Clone)]
pub struct LiveRunnerConfig {
    /// Repository whose commits are checked out.
    pub repo: PathBuf,
    /// Shell command building the checked-out tree (run with cwd at the
    /// worktree); empty skips the build step.
    pub build_cmd: String,
    /// (tool name, shell command) pairs; each command prints the tool's
    /// native report on stdout.
    pub tool_cmds: Vec<(String, String)>,
    pub timeout: Duration,
}

/// Live backend: detached checkout into a scratch worktree, configured
/// build command, then each tool command parsed through the adapter
/// registry. Warning context code is filled from the checked-out sources.
pub struct LiveRunner {
    config: LiveRunnerConfig,
    registry: AdapterRegistry,
    calls: AtomicUsize,
}

impl LiveRunner {
    pub fn new(config: LiveRunnerConfig) -> Self {
        LiveRunner { config, registry: AdapterRegistry::default(), calls: AtomicUsize::new(0) }
    }

    fn run_in(
        &self,
        cwd: &Path,
        shell_cmd: &str,
        commit: &str,
    ) -> Result<Vec<u8>, MinerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(shell_cmd)
            .current_dir(cwd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MinerError::BuildFailure {
                commit: commit.to_string(),
                message: format!("cannot spawn {shell_cmd:?}: {e}"),
            })?;

        let mut stdout = child.stdout.take().expect("stdout piped");
        let mut stderr = child.stderr.take().expect("stderr piped");
        let out_thread = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stdout.read_to_end(&mut buf);
            buf
        });
        let err_thread = std::thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = stderr.read_to_end(&mut buf);
            buf
        });

        let deadline = Instant::now() + self.config.timeout;
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Err(MinerError::BuildTimeout(commit.to_string()));
                    }
                    std::thread::sleep(Duration::from_millis(20));
                }
                Err(e) => {
                    return Err(MinerError::BuildFailure {
                        commit: commit.to_string(),
                        message: format!("wait failed: {e}"),
                    })
                }
            }
        };
        let stdout = out_thread.join().unwrap_or_default();
        let stderr = err_thread.join().unwrap_or_default();
        if !status.success() {
            return Err(MinerError::BuildFailure {
                commit: commit.to_string(),
                message: format!(
                    "{shell_cmd:?} exited with {status}: {}",
                    String::from_utf8_lossy(&stderr).trim()
                ),
            });
        }
        Ok(stdout)
    }
}

impl ToolRunner for LiveRunner {
    fn records(&self, commit: &str) -> Result<Vec<WarningRecord>, MinerError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let scratch = tempfile::tempdir().map_err(|e| MinerError::BuildFailure {
            commit: commit.to_string(),
            message: format!("cannot create scratch dir: {e}"),
        })?;
        let worktree = scratch.path().join("checkout");
        let add = Command::new("git")
            .arg("-C")
            .arg(&self.config.repo)
            .args(["worktree", "add", "--detach"])
            .arg(&worktree)
            .arg(commit)
            .output()
            .map_err(|e| MinerError::RepoAccess(format!("cannot run git: {e}")))?;
        if !add.status.success() {
            return Err(MinerError::RepoAccess(format!(
                "worktree add {commit} failed: {}",
                String::from_utf8_lossy(&add.stderr).trim()
            )));
        }

        let result = (|| {
            if !self.config.build_cmd.trim().is_empty() {
                self.run_in(&worktree, &self.config.build_cmd, commit)?;
            }
            let mut records = Vec::new();
            for (tool, cmd) in &self.config.tool_cmds {
                let payload = self.run_in(&worktree, cmd, commit)?;
                records.extend(self.registry.parse(tool, &payload)?);
            }
            // Fill context code from the checked-out sources.
            let mut by_file: HashMap<String, Option<Vec<String>>> = HashMap::new();
            let records = records
                .into_iter()
                .map(|r| {
                    if !r.context_code.is_empty() {
                        return r;
                    }
                    let lines = by_file.entry(r.file.clone()).or_insert_with(|| {
                        std::fs::read_to_string(worktree.join(&r.file))
                            .ok()
                            .map(|text| text.lines().map(str::to_string).collect())
                    });
                    match lines {
                        Some(lines) => {
                            let ctx = lines
                                .get(r.line as usize - 1)
                                .map(|l| l.trim().to_string())
                                .unwrap_or_default();
                            r.with_context_code(ctx)
                        }
                        None => r,
                    }
                })
                .collect();
            Ok(records)
        })();

        let _ = Command::new("git")
            .arg("-C")
            .arg(&self.config.repo)
            .args(["worktree", "remove", "--force"])
            .arg(&worktree)
            .output();
        result
    }

    fn cache_tag(&self) -> String {
        let tools: Vec<&str> = self.config.tool_cmds.iter().map(|(t, _)| t.as_str()).collect();
        format!("live:{}", tools.join("+"))
    }

    fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}
