//! Commit metadata access for the label stage: messages, diffs, and file
//! contents at a revision, served from a git repository or from a directory
//! of pre-extracted `<commit>.msg` / `<commit>.diff` files (with optional
//! `<commit>/<path>` tree snapshots).

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::CliError;

pub enum CommitSource {
    Git(PathBuf),
    Dir(PathBuf),
}

impl CommitSource {
    fn git(repo: &Path, args: &[&str]) -> Result<String, CliError> {
        let out = Command::new("git")
            .arg("-C")
            .arg(repo)
            .args(args)
            .output()
            .map_err(|e| CliError::DataAccess(format!("cannot run git: {e}")))?;
        if !out.status.success() {
            return Err(CliError::DataAccess(format!(
                "git {} failed: {}",
                args.first().unwrap_or(&""),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    pub fn message(&self, commit: &str) -> Result<String, CliError> {
        match self {
            CommitSource::Git(repo) => {
                Self::git(repo, &["log", "-1", "--format=%B", commit]).map(|m| m.trim_end().to_string())
            }
            CommitSource::Dir(dir) => {
                let path = dir.join(format!("{commit}.msg"));
                std::fs::read_to_string(&path)
                    .map(|m| m.trim_end().to_string())
                    .map_err(|e| CliError::DataAccess(format!("{}: {e}", path.display())))
            }
        }
    }

    pub fn diff(&self, parent: &str, commit: &str) -> Result<String, CliError> {
        match self {
            CommitSource::Git(repo) => Self::git(repo, &["diff", parent, commit]),
            CommitSource::Dir(dir) => {
                let path = dir.join(format!("{commit}.diff"));
                std::fs::read_to_string(&path)
                    .map_err(|e| CliError::DataAccess(format!("{}: {e}", path.display())))
            }
        }
    }

    /// File content at a revision; `None` degrades feature extraction to
    /// its fallback rather than failing the pipeline.
    pub fn file_at(&self, commit: &str, path: &str) -> Option<String> {
        match self {
            CommitSource::Git(repo) => {
                Self::git(repo, &["show", &format!("{commit}:{path}")]).ok()
            }
            CommitSource::Dir(dir) => std::fs::read_to_string(dir.join(commit).join(path)).ok(),
        }
    }
}
