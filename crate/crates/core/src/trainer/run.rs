//! Run directories: manifest, metrics, audit log, timings and checkpoints.
//!
//! ```text
//! <run_dir>/manifest.txt        resolved config + build id (parses as a config file)
//! <run_dir>/metrics.csv         one row per epoch
//! <run_dir>/audit.csv           augmentation dispatch counts and marker churn per epoch
//! <run_dir>/timing.csv          cumulative wall time per epoch
//! <run_dir>/checkpoints/epoch_NNNN.ckpt
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{params_from_checkpoint, AuditRecord, Precision, TrainConfig, Trainer};
use crate::data::{
    load_checkpoint, read_metrics, save_checkpoint, Checkpoint, Dataset, DatasetSource, MetricsRecord, MetricsWriter,
};
use crate::error::{Result, SaaError};
use crate::scalar::Scalar;
use crate::select::{otsu_threshold, DEFAULT_OTSU_BINS};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const AUDIT_FILE: &str = "audit.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn build_id() -> String {
    format!("saa-core {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    /// All metrics rows of the run, including rows written before a resume.
    pub records: Vec<MetricsRecord>,
}

impl RunOutcome {
    pub fn final_record(&self) -> &MetricsRecord {
        self.records.last().expect("a finished run has at least one epoch")
    }

    pub fn peak_accuracy(&self) -> f64 {
        self.records.iter().map(|r| r.test_acc).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TimingRecord {
    epoch: u64,
    wall_ms: u64,
}

struct CsvSink<R> {
    path: PathBuf,
    writer: csv::Writer<File>,
    _row: std::marker::PhantomData<R>,
}

impl<R: Serialize> CsvSink<R> {
    fn create(path: PathBuf, existing: &[R]) -> Result<Self> {
        let file = File::create(&path).map_err(|e| SaaError::io(&path, e))?;
        let mut sink = CsvSink { writer: csv::Writer::from_writer(file), path, _row: std::marker::PhantomData };
        for row in existing {
            sink.append(row)?;
        }
        Ok(sink)
    }

    fn append(&mut self, row: &R) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| SaaError::format("CSV", format!("{}: {e}", self.path.display())))?;
        self.writer.flush().map_err(|e| SaaError::io(&self.path, e))
    }
}

fn read_rows<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<R>, _>>()
        .map_err(|e| SaaError::format("CSV", format!("{}: {e}", path.display())))
}

pub fn read_audit(path: &Path) -> Result<Vec<AuditRecord>> {
    read_rows(path)
}

fn checkpoint_path(run_dir: &Path, epochs_done: u64) -> PathBuf {
    run_dir.join(CHECKPOINT_DIR).join(format!("epoch_{epochs_done:04}.ckpt"))
}

/// Checkpoint with the most completed epochs in `run_dir`, if any.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<PathBuf>> {
    let dir = run_dir.join(CHECKPOINT_DIR);
    if !dir.exists() {
        return Ok(None);
    }
    let mut best: Option<(u64, PathBuf)> = None;
    for entry in std::fs::read_dir(&dir).map_err(|e| SaaError::io(&dir, e))? {
        let path = entry.map_err(|e| SaaError::io(&dir, e))?.path();
        let epoch = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch_")?.strip_suffix(".ckpt")?.parse::<u64>().ok());
        if let Some(e) = epoch {
            if best.as_ref().is_none_or(|(b, _)| e > *b) {
                best = Some((e, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| SaaError::io(path, e))
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| SaaError::config(format!("`threads`: {e}")))?
        .install(f)
}

/// Called with every finished epoch's metrics row.
pub type EpochObserver<'a> = &'a (dyn Fn(&MetricsRecord) + Sync);

/// Trains from scratch into `run_dir`.
pub fn run(cfg: &TrainConfig, run_dir: &Path) -> Result<RunOutcome> {
    run_observed(cfg, run_dir, &|_| {})
}

pub fn run_observed(cfg: &TrainConfig, run_dir: &Path, observer: EpochObserver<'_>) -> Result<RunOutcome> {
    cfg.validate()?;
    let (train, test) = cfg.dataset_source().load()?;
    with_threads(cfg.threads, || match cfg.precision {
        Precision::F32 => {
            drive(Trainer::<f32>::with_data(cfg, &train, test)?, run_dir, Vec::new(), Vec::new(), Vec::new(), observer)
        }
        Precision::F64 => {
            drive(Trainer::<f64>::with_data(cfg, &train, test)?, run_dir, Vec::new(), Vec::new(), Vec::new(), observer)
        }
    })
}

/// Continues a run from `checkpoint`. Log files in `run_dir` are truncated to the
/// checkpoint's epoch before training resumes.
pub fn resume(cfg: &TrainConfig, run_dir: &Path, checkpoint: &Path) -> Result<RunOutcome> {
    resume_observed(cfg, run_dir, checkpoint, &|_| {})
}

pub fn resume_observed(
    cfg: &TrainConfig,
    run_dir: &Path,
    checkpoint: &Path,
    observer: EpochObserver<'_>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let ckpt = load_checkpoint(checkpoint)?;
    let (train, test) = cfg.dataset_source().load()?;
    with_threads(cfg.threads, || match cfg.precision {
        Precision::F32 => resume_with(Trainer::<f32>::with_data(cfg, &train, test)?, &ckpt, run_dir, observer),
        Precision::F64 => resume_with(Trainer::<f64>::with_data(cfg, &train, test)?, &ckpt, run_dir, observer),
    })
}

fn resume_with<T: Scalar>(
    mut trainer: Trainer<T>,
    ckpt: &Checkpoint,
    run_dir: &Path,
    observer: EpochObserver<'_>,
) -> Result<RunOutcome> {
    trainer.restore(ckpt)?;
    let done = trainer.state().epoch;
    let keep = |epoch: u64| epoch < done;
    let read_or_empty = |name: &str| -> Result<bool> { Ok(run_dir.join(name).exists()) };
    let metrics = if read_or_empty(METRICS_FILE)? { read_metrics(&run_dir.join(METRICS_FILE))? } else { Vec::new() };
    let audit = if read_or_empty(AUDIT_FILE)? { read_audit(&run_dir.join(AUDIT_FILE))? } else { Vec::new() };
    let timing: Vec<TimingRecord> =
        if read_or_empty(TIMING_FILE)? { read_rows(&run_dir.join(TIMING_FILE))? } else { Vec::new() };
    let metrics: Vec<MetricsRecord> = metrics.into_iter().filter(|r| keep(r.epoch)).collect();
    if metrics.len() as u64 != done {
        return Err(SaaError::format(
            "run directory",
            format!("{} metrics rows precede the checkpoint, expected {done}", metrics.len()),
        ));
    }
    drive(
        trainer,
        run_dir,
        metrics,
        audit.into_iter().filter(|r| keep(r.epoch)).collect(),
        timing.into_iter().filter(|r| keep(r.epoch)).collect(),
        observer,
    )
}

fn drive<T: Scalar>(
    mut trainer: Trainer<T>,
    run_dir: &Path,
    mut records: Vec<MetricsRecord>,
    audit: Vec<AuditRecord>,
    timing: Vec<TimingRecord>,
    observer: EpochObserver<'_>,
) -> Result<RunOutcome> {
    let cfg = trainer.config().clone();
    create_dir(run_dir)?;
    create_dir(&run_dir.join(CHECKPOINT_DIR))?;
    let manifest = format!("{}build_id = {}\n", cfg.to_text(), build_id());
    let manifest_path = run_dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest).map_err(|e| SaaError::io(&manifest_path, e))?;

    let mut metrics = MetricsWriter::create(&run_dir.join(METRICS_FILE))?;
    for r in &records {
        metrics.append(r)?;
    }
    let mut audit_sink = CsvSink::create(run_dir.join(AUDIT_FILE), &audit)?;
    let mut timing_sink = CsvSink::create(run_dir.join(TIMING_FILE), &timing)?;

    while trainer.state().epoch < cfg.epochs {
        let started = Instant::now();
        let (mut record, audit) = match trainer.run_epoch() {
            Ok(v) => v,
            Err(e) => {
                let dump = run_dir.join("abort.txt");
                let _ = std::fs::write(&dump, format!("{e}\n"));
                return Err(e);
            }
        };
        let state = trainer.state_mut();
        state.elapsed_ms += started.elapsed().as_millis() as u64;
        let elapsed = state.elapsed_ms;
        if cfg.record_wall_ms {
            record.wall_ms = elapsed;
        }
        metrics.append(&record)?;
        audit_sink.append(&audit)?;
        timing_sink.append(&TimingRecord { epoch: record.epoch, wall_ms: elapsed })?;
        observer(&record);
        records.push(record);
        let done = trainer.state().epoch;
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) || done == cfg.epochs {
            save_checkpoint(&checkpoint_path(run_dir, done), &trainer.to_checkpoint())?;
        }
    }
    Ok(RunOutcome { run_dir: run_dir.to_path_buf(), records })
}

fn checkpoint_bits(ckpt: &Checkpoint) -> Result<u32> {
    match ckpt.get("meta/scalar_bits")?.to_u32()[..] {
        [bits @ (32 | 64)] => Ok(bits),
        _ => Err(SaaError::format("checkpoint", "unknown scalar width")),
    }
}

/// Accuracy of a checkpoint's averaged parameters on the test split of `source`.
pub fn evaluate_checkpoint(checkpoint: &Path, source: &DatasetSource) -> Result<f64> {
    let ckpt = load_checkpoint(checkpoint)?;
    let (_, test) = source.load()?;
    evaluate_loaded(&ckpt, &test)
}

fn evaluate_loaded(ckpt: &Checkpoint, test: &Dataset) -> Result<f64> {
    let arch = Trainer::<f32>::arch_for(test)?;
    if arch.hash() != ckpt.arch_hash {
        return Err(SaaError::format("checkpoint", "architecture does not match the dataset"));
    }
    match checkpoint_bits(ckpt)? {
        32 => super::evaluate(&params_from_checkpoint::<f32>(ckpt, "ema/", arch)?, test),
        _ => super::evaluate(&params_from_checkpoint::<f64>(ckpt, "ema/", arch)?, test),
    }
}

/// Summary of the loss history stored in a run's latest checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySummary {
    pub checkpoint: PathBuf,
    pub epochs_done: u64,
    pub samples: usize,
    pub observed: usize,
    pub naive: usize,
    /// Minimum, median and maximum of `h` over observed samples.
    pub h_min: f64,
    pub h_median: f64,
    pub h_max: f64,
    /// Otsu threshold of the observed values at the default bin count.
    pub otsu_threshold: Option<f64>,
    /// Ten equal-width bins over `[h_min, h_max]`.
    pub histogram: Vec<usize>,
}

pub fn inspect_history(run_dir: &Path) -> Result<HistorySummary> {
    let path = latest_checkpoint(run_dir)?
        .ok_or_else(|| SaaError::invalid(format!("no checkpoints under {}", run_dir.display())))?;
    let ckpt = load_checkpoint(&path)?;
    let naive = ckpt.get("history/naive")?.to_u32();
    let n = naive.len();
    let h: Vec<f64> = match checkpoint_bits(&ckpt)? {
        32 => ckpt.get("history/h")?.to_scalars::<f32>(&[n])?.into_iter().map(f64::from).collect(),
        _ => ckpt.get("history/h")?.to_scalars::<f64>(&[n])?,
    };
    let observed = ckpt.get("history/observed")?.to_u64()?;
    let counters = ckpt.get("state/counters")?.to_u64()?;
    let mut values: Vec<f64> = (0..n).filter(|&i| observed[i] > 0).map(|i| h[i]).collect();
    values.sort_by(f64::total_cmp);
    let (h_min, h_max) = (values.first().copied().unwrap_or(0.0), values.last().copied().unwrap_or(0.0));
    let h_median = if values.is_empty() { 0.0 } else { values[values.len() / 2] };
    let mut histogram = vec![0usize; 10];
    for &v in &values {
        let bin = if h_max > h_min { (((v - h_min) / (h_max - h_min)) * 10.0) as usize } else { 0 };
        histogram[bin.min(9)] += 1;
    }
    let otsu = if values.is_empty() {
        None
    } else {
        let split = otsu_threshold(&values, DEFAULT_OTSU_BINS)?;
        (!split.degenerate).then_some(split.threshold)
    };
    Ok(HistorySummary {
        checkpoint: path,
        epochs_done: counters.first().copied().unwrap_or(0),
        samples: n,
        observed: values.len(),
        naive: naive.iter().filter(|&&v| v != 0).count(),
        h_min,
        h_median,
        h_max,
        otsu_threshold: otsu,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> TrainConfig {
        let mut cfg = TrainConfig::default();
        cfg.labeled_batch = 4;
        cfg.unlabeled_ratio = 2;
        cfg.epochs = 4;
        cfg.warmup_epochs = 1;
        cfg.iters_per_epoch = 2;
        cfg.labels_per_class = 2;
        cfg.checkpoint_every = 2;
        cfg.synthetic.n_train = 40;
        cfg.synthetic.n_test = 12;
        cfg.synthetic.side = 8;
        cfg
    }

    #[test]
    fn run_writes_artifacts_and_resumes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let a = run(&cfg, &dir.path().join("a")).unwrap();
        assert_eq!(a.records.len(), 4);
        for f in [MANIFEST_FILE, METRICS_FILE, AUDIT_FILE, TIMING_FILE] {
            assert!(dir.path().join("a").join(f).exists(), "{f}");
        }
        let manifest = TrainConfig::load(&dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest, cfg);

        let b_dir = dir.path().join("b");
        run(&cfg, &b_dir).unwrap();
        let mid = checkpoint_path(&b_dir, 2);
        resume(&cfg, &b_dir, &mid).unwrap();
        let read = |d: &Path| std::fs::read(d.join(METRICS_FILE)).unwrap();
        assert_eq!(read(&dir.path().join("a")), read(&b_dir));
        assert_eq!(
            read_audit(&dir.path().join("a").join(AUDIT_FILE)).unwrap(),
            read_audit(&b_dir.join(AUDIT_FILE)).unwrap()
        );

        let summary = inspect_history(&b_dir).unwrap();
        assert_eq!(summary.epochs_done, 4);
        assert_eq!(summary.samples, 40);
        assert_eq!(summary.histogram.iter().sum::<usize>(), summary.observed);
        let acc = evaluate_checkpoint(&latest_checkpoint(&b_dir).unwrap().unwrap(), &cfg.dataset_source()).unwrap();
        assert_eq!(acc, a.final_record().test_acc);
    }

    #[test]
    fn f64_runs_resume_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny();
        cfg.precision = Precision::F64;
        let full = run(&cfg, &dir.path().join("full")).unwrap();
        let part = dir.path().join("part");
        run(&cfg, &part).unwrap();
        let out = resume(&cfg, &part, &checkpoint_path(&part, 2)).unwrap();
        assert_eq!(out.records, full.records);
    }

    #[test]
    fn missing_checkpoint_dir() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(latest_checkpoint(dir.path()).unwrap(), None);
        assert!(inspect_history(dir.path()).is_err());
    }
}
