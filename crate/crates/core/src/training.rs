//! Optimizers, the slanted triangular schedule and the epoch loop.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::config::{parse_value, KeyValue};
use crate::dataset::Split;
use crate::error::{invalid, Error, Result};
use crate::model::{Model, ModelConfig, ParamStore, Vocab};
use crate::rng::{stream, Purpose};
use crate::tensor::{Graph, Mode, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub cut_frac: f64,
    pub ratio: f64,
    pub lr_max: f64,
    /// Constant rate for plain SGD.
    pub sgd_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            cut_frac: 0.1,
            ratio: 32.0,
            lr_max: 0.001,
            sgd_lr: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.cut_frac > 0.0 && self.cut_frac < 1.0) {
            return bad("cut_frac must lie in (0, 1)");
        }
        if !(self.ratio > 1.0) {
            return bad("ratio must exceed 1");
        }
        if !(self.lr_max > 0.0) || !(self.sgd_lr >= 0.0) {
            return bad("learning rates must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return bad("adam_beta1/adam_beta2 must lie in [0, 1) and adam_eps must be positive");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

impl KeyValue for TrainConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "optimizer" => self.optimizer = value.trim().parse()?,
            "adam_beta1" => self.adam_beta1 = parse_value(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam_eps = parse_value(key, value)?,
            "cut_frac" => self.cut_frac = parse_value(key, value)?,
            "ratio" => self.ratio = parse_value(key, value)?,
            "lr_max" => self.lr_max = parse_value(key, value)?,
            "sgd_lr" => self.sgd_lr = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("optimizer", self.optimizer.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("adam_eps", self.adam_eps.to_string()),
            ("cut_frac", self.cut_frac.to_string()),
            ("ratio", self.ratio.to_string()),
            ("lr_max", self.lr_max.to_string()),
            ("sgd_lr", self.sgd_lr.to_string()),
        ]
    }
}

/// `ceil(examples / batch_size)`; the short final batch counts.
pub fn batches_per_epoch(examples: usize, batch_size: usize) -> usize {
    examples.div_ceil(batch_size)
}

/// Slanted triangular schedule over `total` optimizer steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub total: usize,
    /// `floor(cut_frac · total)`
    pub cut: usize,
    pub cut_frac: f64,
    pub ratio: f64,
    pub lr_max: f64,
}

impl Schedule {
    pub fn new(total: usize, cut_frac: f64, ratio: f64, lr_max: f64) -> Result<Self> {
        if total == 0 {
            return Err(invalid("schedule needs at least one step"));
        }
        if !(cut_frac > 0.0 && cut_frac < 1.0) || !(ratio > 1.0) {
            return Err(invalid("cut_frac must lie in (0, 1) and ratio must exceed 1"));
        }
        let cut = (cut_frac * total as f64).floor() as usize;
        Ok(Schedule {
            total,
            cut,
            cut_frac,
            ratio,
            lr_max,
        })
    }

    pub fn for_training(examples: usize, cfg: &TrainConfig) -> Result<Self> {
        let total = cfg.epochs * batches_per_epoch(examples, cfg.batch_size);
        Schedule::new(total, cfg.cut_frac, cfg.ratio, cfg.lr_max)
    }

    /// Learning rate at step `t ∈ [0, total]`:
    ///
    /// ```text
    /// p = t / cut                                   t < cut
    /// p = 1 − (t − cut) / (cut · (1/cut_frac − 1))  otherwise
    /// η = η_max · (1 + p · (ratio − 1)) / ratio
    /// ```
    ///
    /// `p` is clamped to `[0, 1]`, and when `cut` is 0 the decay runs over
    /// `total` steps instead.
    pub fn lr(&self, t: usize) -> Result<f64> {
        if t > self.total {
            return Err(invalid(format!("step {t} beyond schedule length {}", self.total)));
        }
        let p = if t < self.cut {
            t as f64 / self.cut as f64
        } else if self.cut == 0 {
            1.0 - t as f64 / self.total as f64
        } else {
            let decay = self.cut as f64 * (1.0 / self.cut_frac - 1.0);
            1.0 - (t - self.cut) as f64 / decay
        };
        let p = p.clamp(0.0, 1.0);
        Ok(self.lr_max * ((1.0 + p * (self.ratio - 1.0)) / self.ratio))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        TrainConfig::default().adam()
    }
}

/// First and second moments per parameter, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<T>> = params.iter().map(|(_, p)| vec![T::zero(); p.len()]).collect();
        OptimizerState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

fn check_grads<T: Real>(params: &ParamStore<T>, grads: &[Option<Vec<T>>]) -> Result<()> {
    for id in params.ids() {
        match grads.get(id.index()) {
            Some(Some(g)) if g.len() == params.get(id).len() => {}
            _ => return Err(Error::MissingGradient(params.name(id).to_string())),
        }
    }
    Ok(())
}

/// One bias-corrected Adam update. `grads` is indexed like `params`.
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &[Option<Vec<T>>],
    state: &mut OptimizerState<T>,
    lr: f64,
    hp: AdamParams,
) -> Result<()> {
    check_grads(params, grads)?;
    state.t += 1;
    let (b1, b2) = (T::of(hp.beta1), T::of(hp.beta2));
    let one = T::one();
    let c1 = T::of(1.0 - hp.beta1.powi(state.t as i32));
    let c2 = T::of(1.0 - hp.beta2.powi(state.t as i32));
    let (lr, eps) = (T::of(lr), T::of(hp.eps));
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let k = id.index();
        let g = grads[k].as_ref().expect("checked");
        let w = params.get_mut(id).data_mut();
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..w.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// `w ← w − lr·g`
pub fn sgd_step<T: Real>(params: &mut ParamStore<T>, grads: &[Option<Vec<T>>], lr: f64) -> Result<()> {
    check_grads(params, grads)?;
    let lr = T::of(lr);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let g = grads[id.index()].as_ref().expect("checked");
        for (w, &d) in params.get_mut(id).data_mut().iter_mut().zip(g) {
            *w = *w - lr * d;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-example loss over the epoch, dropout active.
    pub train_loss: f64,
    pub val_accuracy: f64,
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,val_accuracy\n");
    for r in history {
        s.push_str(&format!("{},{:.6},{:.6}\n", r.epoch, r.train_loss, r.val_accuracy));
    }
    s
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the epoch with the highest validation accuracy.
    pub model: Model<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    /// Batch loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
}

pub fn accuracy(model: &Model<f32>, split: &Split) -> Result<f64> {
    use crate::proba::Classifier;
    let predicted = model.predict(&split.docs)?;
    let hits = predicted.iter().zip(&split.labels).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / split.len() as f64)
}

/// Builds a fresh model (and, for the lookup encoder, a vocabulary from the
/// training words) and trains it.
pub fn fit(train: &Split, val: &Split, model_cfg: &ModelConfig, cfg: &TrainConfig, seed: u64) -> Result<FitOutcome> {
    let vocab = match model_cfg.encoder {
        crate::model::EncoderKind::EmbeddingLookup => {
            let words: Vec<Vec<String>> = train.docs.iter().map(|d| model_cfg.words(d)).collect();
            Some(Vocab::build(words.iter().flatten().map(String::as_str), model_cfg.min_word_count))
        }
        crate::model::EncoderKind::CharCnn => None,
    };
    let model = Model::new(model_cfg.clone(), vocab, &mut stream(seed, Purpose::Init))?;
    fit_model(model, train, val, cfg, seed, &mut |_| {})
}

/// Trains `model` in place of a fresh one; `observe` sees each epoch record.
pub fn fit_model(
    mut model: Model<f32>,
    train: &Split,
    val: &Split,
    cfg: &TrainConfig,
    seed: u64,
    observe: &mut dyn FnMut(&EpochRecord),
) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let schedule = Schedule::for_training(train.len(), cfg)?;
    let words: Vec<Vec<String>> = train.docs.iter().map(|d| model.config().words(d)).collect();
    let targets = train.label_indices();
    let mut shuffle = stream(seed, Purpose::Shuffle);
    let mut dropout = stream(seed, Purpose::Dropout);
    let mut state = OptimizerState::new(model.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step_losses = Vec::with_capacity(schedule.total);
    let mut best: Option<(f64, usize, ParamStore<f32>)> = None;
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let docs: Vec<Vec<String>> = batch.iter().map(|&i| words[i].clone()).collect();
            let y: Vec<usize> = batch.iter().map(|&i| targets[i]).collect();
            let mut g = Graph::new();
            let bound = model.params().bind(&mut g, true);
            let f = model.forward(&mut g, &bound, &docs, Mode::Train, &mut dropout)?;
            let loss = g.softmax_cross_entropy(f.logits, &y)?;
            let value = g.value(loss).data()[0] as f64;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    step,
                    loss: value,
                });
            }
            let mut grads = g.backward(loss)?;
            let grads: Vec<Option<Vec<f32>>> = bound.vars().iter().map(|&v| grads.take(v)).collect();
            let lr = match cfg.optimizer {
                OptimizerKind::Adam => schedule.lr(step)?,
                OptimizerKind::Sgd => cfg.sgd_lr,
            };
            match cfg.optimizer {
                OptimizerKind::Adam => adam_step(model.params_mut(), &grads, &mut state, lr, cfg.adam())?,
                OptimizerKind::Sgd => sgd_step(model.params_mut(), &grads, lr)?,
            }
            total += value * batch.len() as f64;
            step_losses.push(value);
            step += 1;
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            val_accuracy: accuracy(&model, val)?,
        };
        observe(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(acc, _, _)| record.val_accuracy > *acc) {
            best = Some((record.val_accuracy, epoch, model.params().clone()));
        }
    }
    let (_, best_epoch, params) = best.expect("at least one epoch");
    *model.params_mut() = params;
    Ok(FitOutcome {
        model,
        best_epoch,
        history,
        step_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Emotion;
    use crate::model::uniform_init;
    use crate::tensor::Tensor;
    use crate::tokenizer::Token;

    fn full_schedule() -> Schedule {
        Schedule::new(23_970, 0.1, 32.0, 0.001).unwrap()
    }

    #[test]
    fn full_batch_accounting() {
        assert_eq!(batches_per_epoch(153_383, 64), 2397);
        assert_eq!(153_383 - 2396 * 64, 39);
        let cfg = TrainConfig::default();
        let s = Schedule::for_training(153_383, &cfg).unwrap();
        assert_eq!(s.total, 23_970);
        assert_eq!(s.cut, 2397);
    }

    #[test]
    fn schedule_endpoints() {
        let s = full_schedule();
        assert!((s.lr(0).unwrap() - 3.125e-5).abs() < 1e-12);
        assert!((s.lr(2397).unwrap() - 1.0e-3).abs() < 1e-12);
        assert_eq!(s.lr(2397).unwrap(), 0.001);
        assert!((s.lr(23_970).unwrap() - 3.125e-5).abs() < 1e-12);
        assert!(s.lr(23_971).is_err());
    }

    #[test]
    fn schedule_is_unimodal_with_exact_peak() {
        let s = full_schedule();
        let lrs: Vec<f64> = (0..=s.total).map(|t| s.lr(t).unwrap()).collect();
        assert!(lrs[..=s.cut].windows(2).all(|w| w[0] <= w[1]));
        assert!(lrs[s.cut..].windows(2).all(|w| w[0] >= w[1]));
        let max = lrs.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(max, 0.001);
        assert_eq!(lrs.iter().position(|&l| l == max), Some(s.cut));
    }

    #[test]
    fn tiny_schedules_stay_in_range() {
        for total in 1..30 {
            let s = Schedule::new(total, 0.1, 32.0, 0.01).unwrap();
            for t in 0..=total {
                let lr = s.lr(t).unwrap();
                assert!((0.01 / 32.0 - 1e-15..=0.01 + 1e-15).contains(&lr), "{total} {t} {lr}");
            }
        }
        assert!(Schedule::new(0, 0.1, 32.0, 0.01).is_err());
        assert!(Schedule::new(10, 1.0, 32.0, 0.01).is_err());
        assert!(Schedule::new(10, 0.1, 1.0, 0.01).is_err());
    }

    fn scalar_store(w: f64) -> ParamStore<f64> {
        let mut ps = ParamStore::default();
        ps.add("w", Tensor::scalar(w)).unwrap();
        ps
    }

    #[test]
    fn adam_single_step_moves_by_lr() {
        let mut ps = scalar_store(0.0);
        let mut st = OptimizerState::new(&ps);
        adam_step(&mut ps, &[Some(vec![0.5])], &mut st, 0.001, AdamParams::default()).unwrap();
        let w = ps.iter().next().unwrap().1.data()[0];
        assert!((w + 0.001).abs() < 1e-10, "{w}");
        assert_eq!(st.t, 1);
    }

    #[test]
    fn adam_matches_scalar_reference() {
        let (b1, b2, eps, lr, g) = (0.9f64, 0.999f64, 1e-8, 0.01, 0.3);
        let (mut w, mut m, mut v) = (1.5f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        let mut ps = scalar_store(1.5);
        let mut st = OptimizerState::new(&ps);
        for _ in 0..2 {
            adam_step(&mut ps, &[Some(vec![g])], &mut st, lr, AdamParams::default()).unwrap();
        }
        let got = ps.iter().next().unwrap().1.data()[0];
        assert!((got - w).abs() < 1e-12);
    }

    #[test]
    fn adam_zero_gradient_keeps_params_and_decays_moments() {
        let mut ps = scalar_store(2.0);
        let mut st = OptimizerState::new(&ps);
        adam_step(&mut ps, &[Some(vec![1.0])], &mut st, 0.1, AdamParams::default()).unwrap();
        let before = ps.clone();
        let (m0, v0) = (st.m[0][0], st.v[0][0]);
        let mut zero = ps.clone();
        let mut st_zero = st.clone();
        // a fresh state with zero gradients leaves parameters alone
        let mut fresh = OptimizerState::new(&zero);
        adam_step(&mut zero, &[Some(vec![0.0])], &mut fresh, 0.1, AdamParams::default()).unwrap();
        assert_eq!(zero, before);
        adam_step(&mut ps, &[Some(vec![0.0])], &mut st_zero, 0.1, AdamParams::default()).unwrap();
        assert!((st_zero.m[0][0] - 0.9 * m0).abs() < 1e-15);
        assert!((st_zero.v[0][0] - 0.999 * v0).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_reported() {
        let mut ps = scalar_store(0.0);
        let mut st = OptimizerState::new(&ps);
        assert!(matches!(
            adam_step(&mut ps, &[None], &mut st, 0.1, AdamParams::default()),
            Err(Error::MissingGradient(name)) if name == "w"
        ));
        assert!(sgd_step(&mut ps, &[], 0.1).is_err());
    }

    #[test]
    fn sgd_arithmetic() {
        let mut ps = scalar_store(1.0);
        sgd_step(&mut ps, &[Some(vec![2.0])], 0.1).unwrap();
        assert!((ps.iter().next().unwrap().1.data()[0] - 0.8).abs() < 1e-15);
        let before = ps.clone();
        sgd_step(&mut ps, &[Some(vec![2.0])], 0.0).unwrap();
        assert_eq!(ps, before);

        let mut a = scalar_store(0.0);
        let mut st = OptimizerState::new(&a);
        adam_step(&mut a, &[Some(vec![0.7])], &mut st, 0.01, AdamParams::default()).unwrap();
        let mut s = scalar_store(0.0);
        sgd_step(&mut s, &[Some(vec![0.7])], 0.01).unwrap();
        let (wa, ws) = (a.iter().next().unwrap().1.data()[0], s.iter().next().unwrap().1.data()[0]);
        assert_eq!(wa.signum(), ws.signum());
    }

    #[test]
    fn config_keys_round_trip() {
        let mut c = TrainConfig::default();
        assert!(c.set("optimizer", "sgd").unwrap());
        assert!(c.set("cut_frac", "0.2").unwrap());
        assert!(!c.set("lstm_hidden", "3").unwrap());
        let mut back = TrainConfig::default();
        for (k, v) in c.entries() {
            back.set(k, &v).unwrap();
        }
        assert_eq!(back, c);
        assert!(c.set("optimizer", "rmsprop").is_err());
        c.cut_frac = 1.0;
        assert!(c.validate().is_err());
    }

    /// Class `i` tweets are `cue_i` plus random filler words.
    fn cue_split(n: usize, seed: u64) -> Split {
        use rand::Rng as _;
        let mut rng = stream(seed, Purpose::Data);
        let filler = ["the", "a", "day", "was", "so", "it", "me", "and"];
        let mut split = Split::default();
        for i in 0..n {
            let label = Emotion::ALL[i % 6];
            let mut toks: Vec<Token> = (0..rng.random_range(1..5))
                .map(|_| Token::word(filler[rng.random_range(0..filler.len())]))
                .collect();
            let at = rng.random_range(0..=toks.len());
            toks.insert(at, Token::word(format!("cue{}", label.name())));
            split.docs.push(toks);
            split.labels.push(label);
        }
        split
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 8,
            lr_max: 0.02,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn same_seed_gives_identical_runs() {
        let data = cue_split(24, 1);
        let a = fit(&data, &data, &ModelConfig::toy(), &quick_config(), 9).unwrap();
        let b = fit(&data, &data, &ModelConfig::toy(), &quick_config(), 9).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.step_losses, b.step_losses);
        assert_eq!(a.model, b.model);
        assert_eq!(a.step_losses.len(), 9);
        let c = fit(&data, &data, &ModelConfig::toy(), &quick_config(), 10).unwrap();
        assert_ne!(a.step_losses, c.step_losses);
    }

    #[test]
    fn overfits_a_small_set() {
        let data = cue_split(32, 2);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 8,
            lr_max: 0.03,
            ..TrainConfig::default()
        };
        let out = fit(&data, &data, &ModelConfig::toy(), &cfg, 3).unwrap();
        assert_eq!(accuracy(&out.model, &data).unwrap(), 1.0);
        let first = out.history.iter().position(|r| r.val_accuracy == 1.0).unwrap();
        assert_eq!(out.best_epoch, first + 1);
        // smoothed loss trend
        let windows: Vec<f64> = out
            .step_losses
            .chunks(10)
            .map(|w| w.iter().sum::<f64>() / w.len() as f64)
            .collect();
        assert!(windows.last().unwrap() < &(windows[0] * 0.2));
    }

    #[test]
    fn lookup_encoder_trains_with_sgd() {
        let data = cue_split(30, 4);
        let model = ModelConfig {
            encoder: crate::model::EncoderKind::EmbeddingLookup,
            ..ModelConfig::toy()
        };
        let cfg = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            sgd_lr: 0.1,
            ..quick_config()
        };
        let out = fit(&data, &data, &model, &cfg, 5).unwrap();
        assert_eq!(out.history.len(), 3);
        assert!(out.model.vocab().unwrap().contains("cuejoy"));
    }

    #[test]
    fn non_finite_loss_aborts() {
        let data = cue_split(12, 6);
        let mut model: Model<f32> = Model::new(ModelConfig::toy(), None, &mut stream(1, Purpose::Init)).unwrap();
        let id = model.params().id("head.b2").unwrap();
        model.params_mut().get_mut(id).data_mut()[0] = f32::NAN;
        let err = fit_model(model, &data, &data, &quick_config(), 1, &mut |_| {}).unwrap_err();
        assert!(matches!(err, Error::NonFinite { epoch: 1, step: 0, .. }));
    }

    #[test]
    fn empty_sets_are_rejected() {
        let data = cue_split(6, 7);
        let empty = Split::default();
        assert!(matches!(fit(&empty, &data, &ModelConfig::toy(), &quick_config(), 1), Err(Error::Empty(_))));
        assert!(matches!(fit(&data, &empty, &ModelConfig::toy(), &quick_config(), 1), Err(Error::Empty(_))));
    }

    #[test]
    fn uniform_init_is_deterministic() {
        let a: Tensor<f32> = uniform_init(&[3, 3], 9, &mut stream(1, Purpose::Init));
        let b: Tensor<f32> = uniform_init(&[3, 3], 9, &mut stream(1, Purpose::Init));
        assert_eq!(a, b);
    }
}
