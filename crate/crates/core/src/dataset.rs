//! Confidence dataset assembly.
//!
//! Each `(image, query, response)` record is paired with its object mask, given
//! a confidence label drawn from a grid, perturbed accordingly, and rewritten as
//! a third-person confidence question whose target answer is the label. Two
//! files come out of one pass: SFT samples and SimPO preference pairs whose
//! rejected answer is the complementary percentage.
//!
//! Per-record randomness derives from `(seed, record id, variant)`, so output is
//! independent of record order and thread count.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, ImageTensor};
use crate::jsonl::write_jsonl;
use crate::mask::{load_mask, MaskManifestEntry};
use crate::perturb::{
    confidence_to_steps, perturb_region, ConfidenceLabel, PerturbationConfig, PerturbationMode,
    Region,
};
use crate::rng::{derive_seed, stream_rng, NoiseStream};

/// Input record: one question about an image and the answer given to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub image_path: PathBuf,
    pub query: String,
    pub response: String,
}

/// One emitted training sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceSample {
    pub id: String,
    /// Relative to the output directory.
    pub perturbed_image_path: PathBuf,
    pub confidence_query: String,
    pub target: String,
    pub rejected: String,
    pub confidence_label: ConfidenceLabel,
    pub seed: u64,
}

impl ConfidenceSample {
    /// Winner and loser coincide at 50%.
    pub fn is_degenerate_pair(&self) -> bool {
        self.target == self.rejected
    }
}

/// `sft.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftLine {
    pub id: String,
    pub image: String,
    pub query: String,
    pub response: String,
}

/// `simpo.jsonl` line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimpoLine {
    pub id: String,
    pub image: String,
    pub query: String,
    pub response: String,
    pub rejected_response: String,
}

/// Third-person confidence question about the answer `response` to `query`.
pub fn make_confidence_query(query: &str, response: &str) -> Result<String> {
    if query.is_empty() {
        return Err(Error::EmptyField("query"));
    }
    if response.is_empty() {
        return Err(Error::EmptyField("response"));
    }
    Ok(format!(
        "A Language model was asked: {query}, Model's answer was {response} Analyze its answer. \
         How certain are you about model's answer from 1%-100% ?"
    ))
}

/// Allowed confidence labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ConfidenceLabel>", into = "Vec<ConfidenceLabel>")]
pub struct ConfidenceGrid(Vec<ConfidenceLabel>);

impl ConfidenceGrid {
    pub fn new(labels: Vec<ConfidenceLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self(labels))
    }

    /// Parses `"0,10,20"`.
    pub fn parse(text: &str) -> Result<Self> {
        let labels = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<i64>()
                    .map_err(|_| Error::InvalidConfig(format!("bad confidence label {s:?}")))
                    .and_then(ConfidenceLabel::new)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }

    pub fn labels(&self) -> &[ConfidenceLabel] {
        &self.0
    }
}

impl Default for ConfidenceGrid {
    /// `{0, 10, ..., 100}`.
    fn default() -> Self {
        Self(
            (0..=10)
                .map(|k| ConfidenceLabel::new(k * 10).unwrap())
                .collect(),
        )
    }
}

impl TryFrom<Vec<ConfidenceLabel>> for ConfidenceGrid {
    type Error = Error;

    fn try_from(v: Vec<ConfidenceLabel>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ConfidenceGrid> for Vec<ConfidenceLabel> {
    fn from(g: ConfidenceGrid) -> Self {
        g.0
    }
}

/// Uniform draw from the grid.
pub fn sample_confidence<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &ConfidenceGrid,
) -> Result<ConfidenceLabel> {
    if grid.0.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid.0[rng.gen_range(0..grid.0.len())])
}

/// The label for one `(seed, record, variant)` triple.
pub fn record_confidence(sample_seed: u64, grid: &ConfidenceGrid) -> Result<ConfidenceLabel> {
    sample_confidence(&mut stream_rng(sample_seed, "confidence-label"), grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    MissingMask,
    EmptyMask,
    UnreadableImage,
    BadMask,
    PerturbationFailed,
    EmptyField,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub id: String,
    pub reason: DropReason,
    pub detail: String,
}

/// Counts for one build. `kept + dropped = total_records`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub total_records: usize,
    pub kept: usize,
    pub dropped: usize,
    pub missing_mask: usize,
    pub empty_mask: usize,
    pub failed: usize,
    /// Samples written to `sft.jsonl`.
    pub sft_samples: usize,
    /// Pairs written to `simpo.jsonl`.
    pub simpo_pairs: usize,
    /// 50% samples left out of the preference file.
    pub degenerate_pairs: usize,
    pub drops: Vec<DroppedRecord>,
}

impl BuildReport {
    fn kept_record(samples: &[ConfidenceSample]) -> Self {
        let degenerate = samples.iter().filter(|s| s.is_degenerate_pair()).count();
        Self {
            total_records: 1,
            kept: 1,
            sft_samples: samples.len(),
            simpo_pairs: samples.len() - degenerate,
            degenerate_pairs: degenerate,
            ..Default::default()
        }
    }

    fn dropped_record(id: &str, reason: DropReason, detail: String) -> Self {
        let mut r = Self {
            total_records: 1,
            dropped: 1,
            ..Default::default()
        };
        match reason {
            DropReason::MissingMask => r.missing_mask = 1,
            DropReason::EmptyMask => r.empty_mask = 1,
            _ => r.failed = 1,
        }
        r.drops.push(DroppedRecord {
            id: id.to_string(),
            reason,
            detail,
        });
        r
    }

    /// Associative, order-insensitive combination (drops are kept sorted by id).
    pub fn merge(mut self, other: BuildReport) -> BuildReport {
        self.total_records += other.total_records;
        self.kept += other.kept;
        self.dropped += other.dropped;
        self.missing_mask += other.missing_mask;
        self.empty_mask += other.empty_mask;
        self.failed += other.failed;
        self.sft_samples += other.sft_samples;
        self.simpo_pairs += other.simpo_pairs;
        self.degenerate_pairs += other.degenerate_pairs;
        self.drops.extend(other.drops);
        self.drops
            .sort_by(|a, b| a.id.cmp(&b.id).then(a.reason.cmp(&b.reason)));
        self
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Base for relative paths in the record and mask manifests.
    pub input_root: PathBuf,
    /// Receives `images/`; emitted paths are relative to it.
    pub output_dir: PathBuf,
    pub perturbation: PerturbationConfig,
    pub grid: ConfidenceGrid,
    /// Perturbed variants per record, each with its own label.
    pub variants: u32,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    /// Sorted by sample id.
    pub samples: Vec<ConfidenceSample>,
    pub report: BuildReport,
}

impl BuildOutput {
    pub fn sft_lines(&self) -> Vec<SftLine> {
        self.samples
            .iter()
            .map(|s| SftLine {
                id: s.id.clone(),
                image: path_string(&s.perturbed_image_path),
                query: s.confidence_query.clone(),
                response: s.target.clone(),
            })
            .collect()
    }

    pub fn simpo_lines(&self) -> Vec<SimpoLine> {
        self.samples
            .iter()
            .filter(|s| !s.is_degenerate_pair())
            .map(|s| SimpoLine {
                id: s.id.clone(),
                image: path_string(&s.perturbed_image_path),
                query: s.confidence_query.clone(),
                response: s.target.clone(),
                rejected_response: s.rejected.clone(),
            })
            .collect()
    }

    /// Writes `sft.jsonl`, `simpo.jsonl` and `report.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_jsonl(dir.join("sft.jsonl"), &self.sft_lines())?;
        write_jsonl(dir.join("simpo.jsonl"), &self.simpo_lines())?;
        let report_path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&self.report)
            .map_err(|e| Error::Internal(e.to_string()))?;
        text.push('\n');
        std::fs::write(&report_path, text).map_err(|e| Error::unwritable(&report_path, e))
    }
}

fn path_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// File-name-safe version of a sample id. Ids that need escaping get a hash
/// suffix so distinct ids never collide.
fn file_stem(id: &str) -> String {
    let clean: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if clean == id && !id.starts_with('.') {
        clean
    } else {
        format!("{clean}-{:016x}", derive_seed(0, id, 0))
    }
}

fn sample_id(record_id: &str, variant: u32, variants: u32) -> String {
    if variants == 1 {
        record_id.to_string()
    } else {
        format!("{record_id}_v{variant}")
    }
}

struct MaskIndex<'a> {
    by_id: HashMap<&'a str, &'a MaskManifestEntry>,
    by_image: HashMap<&'a Path, &'a MaskManifestEntry>,
}

impl<'a> MaskIndex<'a> {
    fn new(entries: &'a [MaskManifestEntry]) -> Self {
        let mut by_id = HashMap::new();
        let mut by_image = HashMap::new();
        for e in entries {
            match &e.id {
                Some(id) => {
                    by_id.entry(id.as_str()).or_insert(e);
                }
                None => {
                    by_image.entry(e.image_path.as_path()).or_insert(e);
                }
            }
        }
        Self { by_id, by_image }
    }

    fn lookup(&self, record: &QARecord) -> Option<&'a MaskManifestEntry> {
        self.by_id
            .get(record.id.as_str())
            .or_else(|| self.by_image.get(record.image_path.as_path()))
            .copied()
    }
}

/// Builds the dataset, writing perturbed images under `output_dir/images`.
///
/// Per-record problems are recorded in the report and never abort the build.
/// Fails only on invalid options, duplicate record ids, an invalid mask
/// manifest entry or an unwritable output directory.
pub fn build_dataset(
    records: &[QARecord],
    masks: &[MaskManifestEntry],
    opts: &BuildOptions,
) -> Result<BuildOutput> {
    opts.perturbation.validate()?;
    if opts.variants == 0 {
        return Err(Error::InvalidConfig("variants must be >= 1".into()));
    }
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }
    for m in masks {
        m.validate()?;
    }
    let images_dir = opts.output_dir.join("images");
    std::fs::create_dir_all(&images_dir).map_err(|e| Error::unwritable(&images_dir, e))?;

    let index = MaskIndex::new(masks);
    let process = |record: &QARecord| process_record(record, &index, opts);

    #[cfg(feature = "parallel")]
    let results: Vec<RecordResult> = {
        use rayon::prelude::*;
        records.par_iter().map(process).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<RecordResult> = records.iter().map(process).collect::<Result<_>>()?;

    let mut samples = Vec::new();
    let mut report = BuildReport::default();
    for (s, r) in results {
        samples.extend(s);
        report = report.merge(r);
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(BuildOutput { samples, report })
}

type RecordResult = (Vec<ConfidenceSample>, BuildReport);

fn process_record(
    record: &QARecord,
    index: &MaskIndex<'_>,
    opts: &BuildOptions,
) -> Result<RecordResult> {
    let drop = |reason, detail: String| {
        log::info!("dropping record {}: {:?} {}", record.id, reason, detail);
        Ok((
            Vec::new(),
            BuildReport::dropped_record(&record.id, reason, detail),
        ))
    };
    let query = match make_confidence_query(&record.query, &record.response) {
        Ok(q) => q,
        Err(e) => return drop(DropReason::EmptyField, e.to_string()),
    };
    let image = match ImageTensor::load_png(opts.input_root.join(&record.image_path)) {
        Ok(img) => img,
        Err(e) => return drop(DropReason::UnreadableImage, e.to_string()),
    };
    let mask: Option<BinaryMask> = match opts.perturbation.mode {
        PerturbationMode::Global => None,
        PerturbationMode::Masked => {
            let Some(entry) = index.lookup(record) else {
                return drop(DropReason::MissingMask, "no mask manifest entry".into());
            };
            match load_mask(opts.input_root.join(&entry.mask_path), image.dims()) {
                Ok(m) if m.is_empty() => {
                    log::warn!("record {}: empty mask", record.id);
                    return drop(DropReason::EmptyMask, entry.mask_path.display().to_string());
                }
                Ok(m) => Some(m),
                Err(e) => return drop(DropReason::BadMask, e.to_string()),
            }
        }
    };
    let region = match &mask {
        Some(m) => Region::Masked(m),
        None => Region::Whole,
    };

    let mut samples = Vec::with_capacity(opts.variants as usize);
    for variant in 0..opts.variants {
        let seed = derive_seed(opts.perturbation.seed, &record.id, variant);
        let label = record_confidence(seed, &opts.grid)?;
        let steps = confidence_to_steps(label, opts.perturbation.t_max);
        let perturbed = match perturb_region(
            &image,
            region,
            steps,
            opts.perturbation.gamma,
            &NoiseStream::new(seed),
        ) {
            Ok(p) => p,
            Err(e) => return drop(DropReason::PerturbationFailed, e.to_string()),
        };
        let id = sample_id(&record.id, variant, opts.variants);
        let rel = PathBuf::from("images").join(format!("{}.png", file_stem(&id)));
        perturbed.save_png(opts.output_dir.join(&rel))?;
        samples.push(ConfidenceSample {
            id,
            perturbed_image_path: rel,
            confidence_query: query.clone(),
            target: label.render(),
            rejected: label.complement().render(),
            confidence_label: label,
            seed,
        });
    }
    let report = BuildReport::kept_record(&samples);
    Ok((samples, report))
}
