//! Synthetic labeled corpus generator. Produces feature bundles with an
//! injected lexical signal per class so the full train/rank/eval path can be
//! exercised deterministically at desk scale, without mining real projects.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::features::{CodeInput, FeatureBundle, TextInput};
use crate::reranker::ClassLabel;
use crate::warning::{compute_identity, WarningType, ALL_WARNING_TYPES};

/// Corpus composition. The default mirrors the mined-dataset proportions:
/// tens of thousands of false warnings, a few percent actionable, and a
/// small AWHB core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub false_warnings: usize,
    pub utb: usize,
    pub ltb: usize,
    pub vtb: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { false_warnings: 40_000, utb: 1_612, ltb: 137, vtb: 151, seed: 17 }
    }
}

impl SynthSpec {
    /// A small corpus for unit tests.
    pub fn small(seed: u64) -> Self {
        SynthSpec { false_warnings: 400, utb: 120, ltb: 40, vtb: 40, seed }
    }

    pub fn total(&self) -> usize {
        self.false_warnings + self.utb + self.ltb + self.vtb
    }
}

/// One generated warning with its weak label.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEntry {
    pub identity: u64,
    pub bundle: FeatureBundle,
    pub label: ClassLabel,
    pub cm: u8,
    pub cc: u8,
}

impl SynthEntry {
    pub fn is_awhb(&self) -> bool {
        self.label.is_awhb()
    }
}

const NOISE: [&str; 24] = [
    "parser", "socket", "buffer", "node", "index", "cache", "queue", "table", "worker",
    "frame", "packet", "stream", "slot", "entry", "chunk", "batch", "lexer", "symbol",
    "branch", "handle", "cursor", "mutex", "signal", "config",
];

fn noise_words(rng: &mut ChaCha8Rng, count: usize) -> String {
    (0..count)
        .map(|_| NOISE[(rng.next_u64() % NOISE.len() as u64) as usize])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Class-indicative tokens woven into the qualifier text.
fn class_marker(label: ClassLabel) -> &'static str {
    match label {
        ClassLabel::FalseWarning => "",
        ClassLabel::UTB => "touched weakly unconfirmed",
        ClassLabel::LTB => "touched likely confirmed",
        ClassLabel::VTB => "touched verified confirmed",
    }
}

/// Plausible (cm, cc) pairs per class, consistent with the aggregation
/// thresholds.
fn weak_scores(label: ClassLabel, rng: &mut ChaCha8Rng) -> (u8, u8) {
    let pick = |options: &[(u8, u8)], rng: &mut ChaCha8Rng| {
        options[(rng.next_u64() % options.len() as u64) as usize]
    };
    match label {
        ClassLabel::FalseWarning => (0, 0),
        ClassLabel::UTB => pick(&[(0, 0), (1, 0), (0, 1)], rng),
        ClassLabel::LTB => pick(&[(1, 1), (2, 0), (2, 1), (3, 0), (1, 2)], rng),
        ClassLabel::VTB => pick(&[(3, 1), (2, 2), (3, 2)], rng),
    }
}

fn make_entry(index: usize, label: ClassLabel, rng: &mut ChaCha8Rng) -> SynthEntry {
    let wtype: WarningType = ALL_WARNING_TYPES[(rng.next_u64() % 5) as usize];
    let file = format!("src/unit_{:03}.c", rng.next_u64() % 400);
    let procedure = format!("routine_{}", rng.next_u64() % 900);
    let statement_var = format!("v{}", rng.next_u64() % 50);
    let qualifier = format!(
        "{} report {} near {} {}",
        wtype.label().to_lowercase(),
        noise_words(rng, 4),
        statement_var,
        class_marker(label),
    )
    .trim()
    .to_string();
    let statement = format!(
        "{statement_var} = {}({});",
        NOISE[(rng.next_u64() % NOISE.len() as u64) as usize],
        noise_words(rng, 1)
    );
    let bundle = FeatureBundle {
        text: TextInput {
            bug_type: wtype.label().to_string(),
            qualifier,
            procedure: procedure.clone(),
            filename: file.clone(),
        },
        code: CodeInput {
            statement: statement.clone(),
            parent: format!("if ({} != 0)", noise_words(rng, 1)),
            flow: vec![format!("static int {procedure}(void)")],
        },
    };
    let (cm, cc) = weak_scores(label, rng);
    SynthEntry {
        identity: compute_identity(wtype, &file, &procedure, &format!("{statement} // {index}")),
        bundle,
        label,
        cm,
        cc,
    }
}

/// Generate the corpus: deterministic for a given spec, shuffled so class
/// blocks do not leak ordering information.
pub fn generate(spec: &SynthSpec) -> Vec<SynthEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entries = Vec::with_capacity(spec.total());
    let blocks = [
        (ClassLabel::FalseWarning, spec.false_warnings),
        (ClassLabel::UTB, spec.utb),
        (ClassLabel::LTB, spec.ltb),
        (ClassLabel::VTB, spec.vtb),
    ];
    for (label, count) in blocks {
        for _ in 0..count {
            entries.push(make_entry(entries.len(), label, &mut rng));
        }
    }
    for i in (1..entries.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        entries.swap(i, j);
    }
    entries
}

/// (bundle, actionable) pairs for the warm-up stage.
pub fn warmup_data(entries: &[SynthEntry]) -> Vec<(FeatureBundle, bool)> {
    entries
        .iter()
        .map(|e| (e.bundle.clone(), e.label.is_actionable()))
        .collect()
}

/// (bundle, class, cm+cc) triples for the fine-tune stage.
pub fn finetune_data(entries: &[SynthEntry]) -> Vec<(FeatureBundle, ClassLabel, u8)> {
    entries
        .iter()
        .map(|e| (e.bundle.clone(), e.label, e.cm + e.cc))
        .collect()
}
