//! Training loop: warm-up as plain consistency training, then per-sample dispatch between
//! strong and diverse views by the naive markers, with a marker refresh every epoch.

mod ablate;
mod config;
mod run;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ablate::{ablate, method_label, read_ablation_csv, write_ablation_csv, AblationRow};
pub use config::{DatasetKind, Precision, TrainConfig, CONFIG_KEYS};
pub use run::{
    build_id, evaluate_checkpoint, inspect_history, latest_checkpoint, read_audit, resume, resume_observed, run,
    run_observed, EpochObserver, HistorySummary, RunOutcome, AUDIT_FILE, CHECKPOINT_DIR, MANIFEST_FILE, METRICS_FILE, TIMING_FILE,
};

use crate::augment::{student_view, weak_augment, AugKind, Image};
use crate::data::{split_labels, Checkpoint, Dataset, MetricsRecord, NamedTensor, SplitSpec};
use crate::error::{Result, SaaError};
use crate::model::{
    backward_from_logits, cosine_lr, ema_update_params, forward, forward_train, softmax, weighted_ce_with_grad,
    ArchConfig, ClassifierParams, LossSpec, Prediction, SgdMomentum, Tensor,
};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;
use crate::select::{SampleHistory, SampleRecord};
use crate::ssl_loss::{sup_loss, unsup_loss, LossReport};

/// Diverse iff the sample is marked naive and warm-up is over.
pub fn select_augmentation(naive: bool, epoch: u64, warmup_epochs: u64) -> AugKind {
    if naive && epoch >= warmup_epochs {
        AugKind::Diverse
    } else {
        AugKind::Strong
    }
}

/// Stacks images into an `[n, c, h, w]` tensor of raw pixel values.
pub fn images_to_tensor<T: Scalar>(images: &[&Image]) -> Result<Tensor<T>> {
    let first = images.first().ok_or_else(|| SaaError::invalid("empty image batch"))?;
    let (c, h, w) = first.shape();
    let mut data = Vec::with_capacity(images.len() * c * h * w);
    for img in images {
        if img.shape() != (c, h, w) {
            return Err(SaaError::Shape(format!("image shape {:?} vs {:?}", img.shape(), (c, h, w))));
        }
        data.extend(img.data().iter().map(|&v| T::lit(v as f64)));
    }
    Tensor::new(vec![images.len(), c, h, w], data)
}

const EVAL_CHUNK: usize = 256;

/// Top-1 accuracy over a labeled set, without augmentation.
pub fn evaluate<T: Scalar>(params: &ClassifierParams<T>, test: &Dataset) -> Result<f64> {
    let labels = test.labels().ok_or_else(|| SaaError::invalid("evaluation set has no labels"))?;
    if test.is_empty() {
        return Err(SaaError::invalid("evaluation set is empty"));
    }
    let mut correct = 0usize;
    for (chunk, chunk_labels) in test.images().chunks(EVAL_CHUNK).zip(labels.chunks(EVAL_CHUNK)) {
        let refs: Vec<&Image> = chunk.iter().collect();
        let logits = forward(params, &images_to_tensor(&refs)?)?;
        correct += logits.rows().zip(chunk_labels).filter(|(row, &y)| softmax(row).argmax() == y).count();
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Weakly augmented labeled examples.
#[derive(Clone, Debug)]
pub struct LabeledBatch {
    /// Positions in the labeled subset.
    pub indices: Vec<usize>,
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
}

/// Unlabeled draws with their weak and student views.
#[derive(Clone, Debug)]
pub struct UnlabeledBatch {
    pub ids: Vec<usize>,
    pub weak: Vec<Image>,
    pub strong: Vec<Image>,
    pub kinds: Vec<AugKind>,
}

/// Per-epoch record of augmentation dispatch and marker churn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub epoch: u64,
    pub strong_views: u64,
    pub diverse_views: u64,
    pub naive_count: u64,
    pub marker_flips: u64,
    pub degenerate: bool,
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct EpochTotals {
    sup: f64,
    unsup: f64,
    mask: f64,
    iters: u64,
    strong: u64,
    diverse: u64,
    last_lr: f64,
}

/// Everything that evolves during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState<T> {
    pub params: ClassifierParams<T>,
    pub ema_params: ClassifierParams<T>,
    pub optimizer: SgdMomentum<T>,
    pub history: SampleHistory<T>,
    pub epoch: u64,
    pub iteration: u64,
    /// Labeled examples are visited in shuffled passes; `labeled_cursor` is the offset
    /// into pass number `labeled_pass`.
    pub labeled_pass: u64,
    pub labeled_cursor: usize,
    /// Wall time spent in completed epochs, carried across resumes.
    pub elapsed_ms: u64,
    totals: EpochTotals,
}

impl<T: Scalar> RunState<T> {
    pub fn new(cfg: &TrainConfig, arch: ArchConfig, unlabeled: usize) -> Result<Self> {
        let params = ClassifierParams::init(arch, cfg.seed);
        Ok(RunState {
            ema_params: params.clone(),
            optimizer: SgdMomentum::new(&params, T::lit(cfg.momentum), T::lit(cfg.weight_decay)),
            params,
            history: SampleHistory::new(unlabeled, T::lit(cfg.history_decay))?,
            epoch: 0,
            iteration: 0,
            labeled_pass: 0,
            labeled_cursor: 0,
            elapsed_ms: 0,
            totals: EpochTotals::default(),
        })
    }
}

/// One optimizer step on `L_sup + λ·L_unsup`.
///
/// The weak views only produce pseudo-labels; gradients flow through the labeled rows and
/// the student views. Every unlabeled draw records its unmasked loss into the history.
pub fn train_iteration<T: Scalar>(
    state: &mut RunState<T>,
    cfg: &TrainConfig,
    labeled: &LabeledBatch,
    unlabeled: &UnlabeledBatch,
) -> Result<LossReport<T>> {
    let bx = labeled.images.len();
    let bu = unlabeled.ids.len();
    if bx == 0 || bu == 0 || labeled.labels.len() != bx || unlabeled.weak.len() != bu || unlabeled.strong.len() != bu {
        return Err(SaaError::Shape(format!(
            "batch sizes: {bx} labeled images, {} labels, {bu} ids, {} weak, {} strong",
            labeled.labels.len(),
            unlabeled.weak.len(),
            unlabeled.strong.len()
        )));
    }
    let lr = cosine_lr(state.iteration, cfg.total_iterations(), cfg.base_lr)?;

    let weak_refs: Vec<&Image> = unlabeled.weak.iter().collect();
    let weak_logits = forward(&state.params, &images_to_tensor(&weak_refs)?)?;
    let weak_preds: Vec<Prediction<T>> = weak_logits.rows().map(softmax).collect();

    let student_refs: Vec<&Image> = labeled.images.iter().chain(&unlabeled.strong).collect();
    let cache = forward_train(&state.params, &images_to_tensor(&student_refs)?)?;
    let preds: Vec<Prediction<T>> = cache.logits.rows().map(softmax).collect();

    let sup = sup_loss(&preds[..bx], &labeled.labels)?;
    let unsup = unsup_loss(&weak_preds, &preds[bx..], T::lit(cfg.tau_c))?;
    let lambda = T::lit(cfg.lambda_u);
    let report = LossReport::new(sup, &unsup, lambda);
    if !report.all_finite() {
        let mut ids: Vec<usize> = unlabeled
            .ids
            .iter()
            .zip(&unsup.raw)
            .filter(|(_, l)| !l.is_finite())
            .map(|(&id, _)| id)
            .collect();
        if ids.is_empty() {
            ids = unlabeled.ids.clone();
        }
        return Err(SaaError::NonFinite { iteration: state.iteration, sample_ids: ids });
    }

    let mut targets = labeled.labels.clone();
    targets.extend(unsup.labels.iter().map(|p| p.class));
    let wx = T::one() / T::from_usize_lossy(bx);
    let wu = lambda / T::from_usize_lossy(bu);
    let mut weights = vec![wx; bx];
    weights.extend(unsup.labels.iter().map(|p| if p.accepted { wu } else { T::zero() }));
    let (_, _, dlogits) = weighted_ce_with_grad(&cache.logits, &LossSpec { targets, weights })?;
    let grads = backward_from_logits(&state.params, &cache, &dlogits)?;
    state.optimizer.step(&mut state.params, &grads, T::lit(lr))?;
    ema_update_params(&mut state.ema_params, &state.params, T::lit(cfg.ema_decay))?;

    for (&id, &raw) in unlabeled.ids.iter().zip(&unsup.raw) {
        state.history.record_loss(id, raw)?;
    }

    let t = &mut state.totals;
    t.sup += report.sup_loss.to_f64().unwrap_or(f64::NAN);
    t.unsup += report.unsup_loss.to_f64().unwrap_or(f64::NAN);
    t.mask += report.mask_rate.to_f64().unwrap_or(f64::NAN);
    t.iters += 1;
    t.last_lr = lr;
    for kind in &unlabeled.kinds {
        match kind {
            AugKind::Strong => t.strong += 1,
            AugKind::Diverse => t.diverse += 1,
        }
    }
    state.iteration += 1;
    Ok(report)
}

/// A configured run: data, split and state.
pub struct Trainer<T: Scalar> {
    cfg: TrainConfig,
    labeled: Dataset,
    unlabeled: Dataset,
    test: Dataset,
    state: RunState<T>,
}

impl<T: Scalar> Trainer<T> {
    /// Loads the configured dataset and draws the label split.
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (train, test) = cfg.dataset_source().load()?;
        Self::with_data(cfg, &train, test)
    }

    pub fn with_data(cfg: &TrainConfig, train: &Dataset, test: Dataset) -> Result<Self> {
        cfg.validate()?;
        let split = split_labels(train, &SplitSpec { labels_per_class: cfg.labels_per_class, seed: cfg.seed })?;
        let arch = Self::arch_for(train)?;
        if test.image_shape() != train.image_shape() || test.classes() != train.classes() {
            return Err(SaaError::Shape("train and test sets differ in image shape or class count".into()));
        }
        Ok(Trainer {
            state: RunState::new(cfg, arch, split.unlabeled.len())?,
            cfg: cfg.clone(),
            labeled: split.labeled,
            unlabeled: split.unlabeled,
            test,
        })
    }

    pub fn arch_for(data: &Dataset) -> Result<ArchConfig> {
        let (c, h, w) = data.image_shape();
        ArchConfig::new(c, h, w, data.classes())
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RunState<T> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut RunState<T> {
        &mut self.state
    }

    pub fn labeled(&self) -> &Dataset {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &Dataset {
        &self.unlabeled
    }

    pub fn test(&self) -> &Dataset {
        &self.test
    }

    fn labeled_order(&self, pass: u64) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..self.labeled.len()).collect();
        order.shuffle(&mut stream(self.cfg.seed, Purpose::LabeledOrder, pass, 0));
        order
    }

    /// Next `|B_x|` labeled examples, weakly augmented. Advances the labeled cursor.
    pub fn labeled_batch(&mut self) -> Result<LabeledBatch> {
        let labels = self.labeled.labels().expect("labeled split keeps labels");
        let mut picks = Vec::with_capacity(self.cfg.labeled_batch);
        let mut order = self.labeled_order(self.state.labeled_pass);
        while picks.len() < self.cfg.labeled_batch {
            if self.state.labeled_cursor == order.len() {
                self.state.labeled_pass += 1;
                self.state.labeled_cursor = 0;
                order = self.labeled_order(self.state.labeled_pass);
            }
            picks.push(order[self.state.labeled_cursor]);
            self.state.labeled_cursor += 1;
        }
        let (seed, iteration) = (self.cfg.seed, self.state.iteration);
        let images = picks
            .par_iter()
            .enumerate()
            .map(|(slot, &i)| {
                weak_augment(self.labeled.image(i), &mut stream(seed, Purpose::LabeledAug, iteration, slot as u64))
            })
            .collect();
        Ok(LabeledBatch { images, labels: picks.iter().map(|&i| labels[i]).collect(), indices: picks })
    }

    /// `|B_u|` uniform draws with replacement, each with a weak view and a student view
    /// chosen by its marker.
    pub fn unlabeled_batch(&self) -> Result<UnlabeledBatch> {
        let (seed, iteration, epoch) = (self.cfg.seed, self.state.iteration, self.state.epoch);
        let n = self.unlabeled.len();
        let mut draw = stream(seed, Purpose::UnlabeledDraw, iteration, 0);
        let ids: Vec<usize> = (0..self.cfg.unlabeled_batch()).map(|_| draw.gen_range(0..n)).collect();
        let kinds: Vec<AugKind> = ids
            .iter()
            .map(|&id| select_augmentation(self.state.history.is_naive(id), epoch, self.cfg.warmup_epochs))
            .collect();
        let views = ids
            .par_iter()
            .zip(&kinds)
            .enumerate()
            .map(|(slot, (&id, &kind))| {
                let img = self.unlabeled.image(id);
                let slot = slot as u64;
                let weak = weak_augment(img, &mut stream(seed, Purpose::UnlabeledAug, iteration, 2 * slot));
                let strong = student_view(
                    img,
                    kind,
                    &self.cfg.aug,
                    &mut stream(seed, Purpose::UnlabeledAug, iteration, 2 * slot + 1),
                )?;
                Ok((weak, strong))
            })
            .collect::<Result<Vec<_>>>()?;
        let (weak, strong) = views.into_iter().unzip();
        Ok(UnlabeledBatch { ids, weak, strong, kinds })
    }

    /// Draws the next batches and trains on them.
    pub fn step(&mut self) -> Result<LossReport<T>> {
        let labeled = self.labeled_batch()?;
        let unlabeled = self.unlabeled_batch()?;
        train_iteration(&mut self.state, &self.cfg, &labeled, &unlabeled)
    }

    /// Refreshes markers, evaluates the averaged parameters and closes the epoch.
    /// `wall_ms` of the returned record is 0; the caller fills it in when recording time.
    pub fn end_epoch(&mut self) -> Result<(MetricsRecord, AuditRecord)> {
        let epoch = self.state.epoch;
        let mut rng = stream(self.cfg.seed, Purpose::Markers, epoch, 0);
        let update = self.state.history.update_markers(&self.cfg.policy, self.cfg.otsu_bins, &mut rng)?;
        let test_acc = evaluate(&self.state.ema_params, &self.test)?;
        let t = std::mem::take(&mut self.state.totals);
        let iters = t.iters.max(1) as f64;
        let record = MetricsRecord {
            epoch,
            iteration: self.state.iteration,
            test_acc,
            sup_loss: t.sup / iters,
            unsup_loss: t.unsup / iters,
            mask_rate: t.mask / iters,
            naive_fraction: self.state.history.naive_fraction(),
            lr: t.last_lr,
            wall_ms: 0,
        };
        let audit = AuditRecord {
            epoch,
            strong_views: t.strong,
            diverse_views: t.diverse,
            naive_count: update.naive_count as u64,
            marker_flips: update.flips as u64,
            degenerate: update.degenerate,
            threshold: update.threshold.and_then(|v| v.to_f64()),
        };
        self.state.epoch += 1;
        Ok((record, audit))
    }

    /// Runs all iterations of the current epoch, then [`Trainer::end_epoch`].
    pub fn run_epoch(&mut self) -> Result<(MetricsRecord, AuditRecord)> {
        for _ in 0..self.cfg.iters_per_epoch {
            self.step()?;
        }
        self.end_epoch()
    }

    /// Snapshot of the full run state. Only valid at an epoch boundary.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let s = &self.state;
        let mut tensors = Vec::new();
        for (prefix, p) in [("params/", &s.params), ("ema/", &s.ema_params), ("velocity/", &s.optimizer.velocity)] {
            for (name, t) in p.named() {
                tensors.push(NamedTensor::from_scalars(format!("{prefix}{name}"), t.shape(), t.data()));
            }
        }
        let records = s.history.records();
        let h: Vec<T> = records.iter().map(|r| r.h).collect();
        tensors.push(NamedTensor::from_scalars("history/h", &[h.len()], &h));
        tensors.push(NamedTensor::from_u32(
            "history/naive",
            &records.iter().map(|r| r.naive as u32).collect::<Vec<_>>(),
        ));
        tensors.push(NamedTensor::from_u64(
            "history/observed",
            &records.iter().map(|r| r.observed).collect::<Vec<_>>(),
        ));
        tensors.push(NamedTensor::from_u64(
            "state/counters",
            &[s.epoch, s.iteration, s.labeled_pass, s.labeled_cursor as u64, s.elapsed_ms],
        ));
        tensors.push(NamedTensor::from_u64("meta/config", &[self.cfg.fingerprint()]));
        tensors.push(NamedTensor::from_u32("meta/scalar_bits", &[T::BITS]));
        Checkpoint { arch_hash: s.params.arch().hash(), tensors }
    }

    /// Restores a snapshot taken by [`Trainer::to_checkpoint`] under the same configuration.
    pub fn restore(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let arch = self.state.params.arch();
        if ckpt.arch_hash != arch.hash() {
            return Err(SaaError::format("checkpoint", "architecture does not match the configured dataset"));
        }
        check_scalar_bits::<T>(ckpt)?;
        if ckpt.get("meta/config")?.to_u64()? != [self.cfg.fingerprint()] {
            return Err(SaaError::config("checkpoint was written under a different configuration"));
        }
        let params = params_from_checkpoint::<T>(ckpt, "params/", arch)?;
        let ema_params = params_from_checkpoint::<T>(ckpt, "ema/", arch)?;
        let velocity = params_from_checkpoint::<T>(ckpt, "velocity/", arch)?;
        let n = self.state.history.len();
        let h = ckpt.get("history/h")?.to_scalars::<T>(&[n])?;
        let naive = ckpt.get("history/naive")?.to_u32();
        let observed = ckpt.get("history/observed")?.to_u64()?;
        if naive.len() != n || observed.len() != n {
            return Err(SaaError::format("checkpoint", "history length does not match the unlabeled set"));
        }
        let records = (0..n)
            .map(|i| SampleRecord { h: h[i], naive: naive[i] != 0, observed: observed[i] })
            .collect();
        let counters = ckpt.get("state/counters")?.to_u64()?;
        let [epoch, iteration, pass, cursor, elapsed] = counters[..] else {
            return Err(SaaError::format("checkpoint", "state counters have the wrong length"));
        };
        if iteration != epoch * self.cfg.iters_per_epoch || cursor as usize > self.labeled.len() {
            return Err(SaaError::format("checkpoint", "state counters are inconsistent"));
        }
        let s = &mut self.state;
        s.history = SampleHistory::from_records(s.history.decay(), records)?;
        s.params = params;
        s.ema_params = ema_params;
        s.optimizer.velocity = velocity;
        s.epoch = epoch;
        s.iteration = iteration;
        s.labeled_pass = pass;
        s.labeled_cursor = cursor as usize;
        s.elapsed_ms = elapsed;
        s.totals = EpochTotals::default();
        Ok(())
    }
}

fn check_scalar_bits<T: Scalar>(ckpt: &Checkpoint) -> Result<()> {
    let bits = ckpt.get("meta/scalar_bits")?.to_u32();
    if bits != [T::BITS] {
        return Err(SaaError::format(
            "checkpoint",
            format!("stored scalar width {bits:?} does not match {}", T::NAME),
        ));
    }
    Ok(())
}

/// Rebuilds one parameter set (e.g. prefix `"ema/"`) from a checkpoint.
pub fn params_from_checkpoint<T: Scalar>(ckpt: &Checkpoint, prefix: &str, arch: ArchConfig) -> Result<ClassifierParams<T>> {
    check_scalar_bits::<T>(ckpt)?;
    let named = arch
        .layout()
        .into_iter()
        .map(|(name, shape)| {
            let data = ckpt.get(&format!("{prefix}{name}"))?.to_scalars::<T>(&shape)?;
            Ok((name.to_string(), Tensor::new(shape, data)?))
        })
        .collect::<Result<Vec<_>>>()?;
    ClassifierParams::from_named(arch, named)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_synthetic;
    use crate::select::SelectionPolicy;

    fn tiny_config() -> TrainConfig {
        let mut cfg = TrainConfig::default();
        cfg.labeled_batch = 4;
        cfg.unlabeled_ratio = 2;
        cfg.epochs = 3;
        cfg.warmup_epochs = 1;
        cfg.iters_per_epoch = 3;
        cfg.labels_per_class = 2;
        cfg.synthetic.n_train = 40;
        cfg.synthetic.n_test = 12;
        cfg.synthetic.side = 8;
        cfg
    }

    fn trainer(cfg: &TrainConfig) -> Trainer<f64> {
        Trainer::new(cfg).unwrap()
    }

    #[test]
    fn dispatch_rule() {
        assert_eq!(select_augmentation(true, 0, 1), AugKind::Strong);
        assert_eq!(select_augmentation(false, 5, 1), AugKind::Strong);
        assert_eq!(select_augmentation(true, 1, 1), AugKind::Diverse);
    }

    #[test]
    fn iteration_counter_tracks_epochs() {
        let cfg = tiny_config();
        let mut t = trainer(&cfg);
        t.run_epoch().unwrap();
        assert_eq!(t.state().iteration, cfg.iters_per_epoch);
        t.step().unwrap();
        assert_eq!(t.state().iteration, cfg.iters_per_epoch + 1);
    }

    #[test]
    fn every_draw_is_recorded() {
        let cfg = tiny_config();
        let mut t = trainer(&cfg);
        let draws = t.unlabeled_batch().unwrap().ids;
        t.step().unwrap();
        let total: u64 = t.state().history.records().iter().map(|r| r.observed).sum();
        assert_eq!(total, cfg.unlabeled_batch() as u64);
        for id in draws {
            assert!(t.state().history.records()[id].observed > 0);
        }
    }

    #[test]
    fn labeled_cycle_visits_every_example_once_per_pass() {
        let mut cfg = tiny_config();
        cfg.labeled_batch = 3;
        let mut t = trainer(&cfg);
        let n = t.labeled().len();
        let mut picks = Vec::new();
        for _ in 0..n {
            picks.extend(t.labeled_batch().unwrap().indices);
        }
        for pass in picks.chunks(n) {
            let mut sorted = pass.to_vec();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_lambda_ignores_unlabeled_gradients() {
        let mut cfg = tiny_config();
        cfg.lambda_u = 0.0;
        cfg.tau_c = 0.0;
        let mut a = trainer(&cfg);
        let lb = a.labeled_batch().unwrap();
        let ub = a.unlabeled_batch().unwrap();
        let mut other = a.unlabeled_batch().unwrap();
        other.strong.reverse();
        other.weak.reverse();
        let mut b_state = a.state().clone();
        let ra = train_iteration(&mut a.state, &cfg, &lb, &ub).unwrap();
        train_iteration(&mut b_state, &cfg, &lb, &other).unwrap();
        assert_eq!(a.state().params, b_state.params);
        assert!(ra.per_sample_raw_losses.iter().all(|v| *v > 0.0));
        assert!(a.state().history.records().iter().any(|r| r.observed > 0));
    }

    #[test]
    fn rejected_pseudo_labels_give_supervised_gradient() {
        let mut cfg = tiny_config();
        cfg.tau_c = 1.0;
        let mut a = trainer(&cfg);
        let lb = a.labeled_batch().unwrap();
        let ub = a.unlabeled_batch().unwrap();
        let before = a.state().clone();
        let report = train_iteration(&mut a.state, &cfg, &lb, &ub).unwrap();
        assert_eq!(report.mask_rate, 0.0);
        assert_eq!(report.unsup_loss, 0.0);

        let refs: Vec<&Image> = lb.images.iter().collect();
        let spec = LossSpec::uniform(lb.labels.clone(), 1.0 / lb.labels.len() as f64);
        let (_, grads) = crate::model::backward(&before.params, &images_to_tensor(&refs).unwrap(), &spec).unwrap();
        let mut expect = before.params.clone();
        let mut opt = before.optimizer.clone();
        opt.step(&mut expect, &grads, cosine_lr(0, cfg.total_iterations(), cfg.base_lr).unwrap()).unwrap();
        for (x, y) in expect.tensors().iter().zip(a.state().params.tensors()) {
            for (u, v) in x.data().iter().zip(y.data()) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn policy_none_never_marks() {
        let mut cfg = tiny_config();
        cfg.policy = SelectionPolicy::None;
        let mut t = trainer(&cfg);
        for _ in 0..cfg.epochs {
            let (rec, audit) = t.run_epoch().unwrap();
            assert_eq!(rec.naive_fraction, 0.0);
            assert_eq!(audit.diverse_views, 0);
        }
    }

    #[test]
    fn warmup_is_pure_under_policy_all() {
        let mut cfg = tiny_config();
        cfg.policy = SelectionPolicy::All;
        cfg.warmup_epochs = 2;
        let mut t = trainer(&cfg);
        let audits: Vec<AuditRecord> = (0..cfg.epochs).map(|_| t.run_epoch().unwrap().1).collect();
        assert_eq!(audits[0].diverse_views, 0);
        assert_eq!(audits[1].diverse_views, 0);
        assert_eq!(audits[2].strong_views, 0);
    }

    #[test]
    fn constant_model_scores_class_share() {
        let (_, test) = gen_synthetic(0, 4, 8, 10, 8).unwrap();
        let arch = ArchConfig::new(1, 8, 8, 4).unwrap();
        let mut params = ClassifierParams::<f64>::zeros(arch);
        let last = params.tensors().len() - 1;
        params.tensors_mut()[last].data_mut()[2] = 1.0;
        let share = test.labels().unwrap().iter().filter(|&&l| l == 2).count() as f64 / 10.0;
        assert_eq!(evaluate(&params, &test).unwrap(), share);
    }

    #[test]
    fn checkpoint_round_trip_restores_state() {
        let cfg = tiny_config();
        let mut t = trainer(&cfg);
        t.run_epoch().unwrap();
        let ckpt = Checkpoint::decode(&t.to_checkpoint().encode()).unwrap();
        let mut fresh = trainer(&cfg);
        fresh.restore(&ckpt).unwrap();
        assert_eq!(fresh.to_checkpoint().encode(), t.to_checkpoint().encode());
        assert_eq!(fresh.state().history, t.state().history);
        assert_eq!(fresh.run_epoch().unwrap(), t.run_epoch().unwrap());
        let mut other_cfg = cfg.clone();
        other_cfg.seed = 1;
        let mut mismatched = trainer(&other_cfg);
        assert!(mismatched.restore(&ckpt).is_err());
    }
}
