//! Count-based language model backend.
//!
//! Interpolated absolute discounting over a uniform base distribution. Counts
//! from several corpora are accumulated with per-corpus weights, which is how
//! pretraining on raw utterances followed by finetuning on flattened turns is
//! expressed. The `<EOS>` classifier is a logistic head over the standardized
//! mean token log-probability of the belief and response blocks.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    flatten, make_contrastive, BackendError, GeneratorBackend, TokenId, TurnSample, Vocab, EOB,
    EOKB, EOS, SOB,
};

const FORMAT: &str = "tod-ngram";
const VERSION: u32 = 1;
const BOS: TokenId = TokenId::MAX;
const BOS_TEXT: &str = "<s>";
const CACHE_LIMIT: usize = 8192;

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus weight must be positive, got {0}")]
    BadWeight(f64),
    #[error("n-gram order must be at least 1")]
    BadOrder,
    #[error("discount must lie in [0, 1), got {0}")]
    BadDiscount(f64),
    #[error("counts of order {found} cannot be merged into an order-{expected} model")]
    OrderMismatch { expected: usize, found: usize },
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format: {0}")]
    Format(String),
}

#[derive(Debug, Clone)]
pub struct NgramConfig {
    pub order: usize,
    pub discount: f64,
    pub seed: u64,
    pub eos_epochs: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 4,
            discount: 0.75,
            seed: 0,
            eos_epochs: 20,
            learning_rate: 0.001,
            warmup_steps: 500,
        }
    }
}

/// Raw weighted n-gram counts keyed by token strings, so they survive a
/// change of vocabulary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NgramCounts {
    pub order: usize,
    /// `(context, next, count)`; contexts are left-padded with `<s>`.
    pub entries: Vec<(Vec<String>, String, f64)>,
}

impl NgramCounts {
    /// Counts every n-gram of length 1..=order in `sequences`.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>], order: usize) -> Self {
        let mut acc: HashMap<(Vec<String>, String), f64> = HashMap::new();
        for seq in sequences {
            for (t, tok) in seq.iter().enumerate() {
                for k in 0..order {
                    let ctx: Vec<String> = (0..k)
                        .map(|j| {
                            let pos = t as isize - k as isize + j as isize;
                            if pos < 0 {
                                BOS_TEXT.to_string()
                            } else {
                                seq[pos as usize].as_ref().to_string()
                            }
                        })
                        .collect();
                    *acc.entry((ctx, tok.as_ref().to_string())).or_default() += 1.0;
                }
            }
        }
        let mut entries: Vec<_> = acc.into_iter().map(|((c, n), v)| (c, n, v)).collect();
        entries.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        NgramCounts { order, entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub enum NgramSource {
    Sequences { sequences: Vec<Vec<String>>, weight: f64 },
    Counts { counts: NgramCounts, weight: f64 },
}

#[derive(Debug, Clone, Default)]
struct Context {
    total: f64,
    discounted: f64,
    next: HashMap<TokenId, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EosHead {
    pub weight: f64,
    pub bias: f64,
    pub mean: f64,
    pub std: f64,
}

impl Default for EosHead {
    fn default() -> Self {
        EosHead {
            weight: 0.0,
            bias: 0.0,
            mean: 0.0,
            std: 1.0,
        }
    }
}

impl EosHead {
    fn score(&self, z: f64) -> f64 {
        sigmoid(self.weight * (z - self.mean) / self.std + self.bias)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub struct NgramModel {
    order: usize,
    discount: f64,
    vocab: Vocab,
    contexts: HashMap<Vec<TokenId>, Context>,
    counts: NgramCounts,
    eos: EosHead,
    cache: Mutex<HashMap<Vec<TokenId>, Arc<Vec<f64>>>>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: usize,
    discount: f64,
    vocab: Vocab,
    eos_head: EosHead,
    counts: NgramCounts,
}

/// Accumulates weighted counts from every source into one model.
pub fn train_ngram(sources: &[NgramSource], config: &NgramConfig) -> Result<NgramModel, NgramError> {
    if config.order == 0 {
        return Err(NgramError::BadOrder);
    }
    if !(0.0..1.0).contains(&config.discount) {
        return Err(NgramError::BadDiscount(config.discount));
    }
    let mut merged: HashMap<(Vec<String>, String), f64> = HashMap::new();
    for source in sources {
        let (counts, weight) = match source {
            NgramSource::Sequences { sequences, weight } => {
                (NgramCounts::from_sequences(sequences, config.order), *weight)
            }
            NgramSource::Counts { counts, weight } => {
                if counts.order != config.order {
                    return Err(NgramError::OrderMismatch {
                        expected: config.order,
                        found: counts.order,
                    });
                }
                (counts.clone(), *weight)
            }
        };
        if weight.is_nan() || weight <= 0.0 || weight.is_infinite() {
            return Err(NgramError::BadWeight(weight));
        }
        for (ctx, next, c) in counts.entries {
            *merged.entry((ctx, next)).or_default() += c * weight;
        }
    }
    if merged.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let mut entries: Vec<_> = merged.into_iter().map(|((c, n), v)| (c, n, v)).collect();
    entries.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let counts = NgramCounts {
        order: config.order,
        entries,
    };
    Ok(NgramModel::from_counts(counts, config.discount, EosHead::default()))
}

impl NgramModel {
    fn from_counts(counts: NgramCounts, discount: f64, eos: EosHead) -> Self {
        let mut vocab = Vocab::with_specials(std::iter::empty::<String>());
        for (_, next, _) in &counts.entries {
            vocab.insert(next.clone());
        }
        let id_of = |t: &str, vocab: &Vocab| {
            if t == BOS_TEXT {
                BOS
            } else {
                vocab.id(t).or_else(|| vocab.unk()).expect("vocab has <unk>")
            }
        };
        let mut contexts: HashMap<Vec<TokenId>, Context> = HashMap::new();
        for (ctx, next, c) in &counts.entries {
            let key: Vec<TokenId> = ctx.iter().map(|t| id_of(t, &vocab)).collect();
            let entry = contexts.entry(key).or_default();
            entry.total += c;
            entry.discounted += c.min(discount);
            *entry.next.entry(id_of(next, &vocab)).or_default() += c;
        }
        NgramModel {
            order: counts.order,
            discount,
            vocab,
            contexts,
            counts,
            eos,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn counts(&self) -> &NgramCounts {
        &self.counts
    }

    pub fn eos_head(&self) -> EosHead {
        self.eos
    }

    /// The last `order - 1` tokens of `prefix`, left-padded with BOS.
    fn context_of(&self, prefix: &[TokenId]) -> Vec<TokenId> {
        let k = self.order - 1;
        let mut ctx = vec![BOS; k.saturating_sub(prefix.len())];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(k)..]);
        ctx
    }

    fn probability(&self, ctx: &[TokenId], next: TokenId) -> f64 {
        let mut p = 1.0 / self.vocab.len() as f64;
        for k in 0..=ctx.len() {
            if let Some(c) = self.contexts.get(&ctx[ctx.len() - k..]) {
                let n = c.next.get(&next).copied().unwrap_or(0.0);
                p = (n - n.min(self.discount)) / c.total + c.discounted / c.total * p;
            }
        }
        p
    }

    fn distribution(&self, ctx: &[TokenId]) -> Arc<Vec<f64>> {
        if let Some(hit) = self.cache.lock().unwrap().get(ctx) {
            return hit.clone();
        }
        let n = self.vocab.len();
        let mut p = vec![1.0 / n as f64; n];
        for k in 0..=ctx.len() {
            if let Some(c) = self.contexts.get(&ctx[ctx.len() - k..]) {
                let gamma = c.discounted / c.total;
                for x in p.iter_mut() {
                    *x *= gamma;
                }
                for (id, cnt) in &c.next {
                    p[*id as usize] += (cnt - cnt.min(self.discount)) / c.total;
                }
            }
        }
        let p = Arc::new(p);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(ctx.to_vec(), p.clone());
        p
    }

    /// Mean token log-probability over the `<SOB>..<EOB>` and
    /// `<EOKB>`-exclusive `..<EOS>` blocks of a flattened sequence.
    pub fn block_mean_logprob(&self, sequence: &[TokenId]) -> f64 {
        let id = |t: &str| self.vocab.id(t).expect("special token");
        let (sob, eob, eokb, eos) = (id(SOB), id(EOB), id(EOKB), id(EOS));
        let mut in_block = false;
        let mut sum = 0.0;
        let mut n = 0usize;
        for (t, &tok) in sequence.iter().enumerate() {
            if tok == sob {
                in_block = true;
            }
            if in_block {
                sum += self.probability(&self.context_of(&sequence[..t]), tok).ln();
                n += 1;
            }
            if tok == eob || tok == eos {
                in_block = false;
            }
            if tok == eokb {
                in_block = true;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Fits the `<EOS>` head on each sample (positive) and one contrastive
    /// negative per sample, by SGD with linear learning-rate warm-up.
    pub fn fit_eos_head(&mut self, samples: &[TurnSample], config: &NgramConfig) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut data: Vec<(f64, f64)> = Vec::new();
        for s in samples {
            let Ok((neg, _)) = make_contrastive(s, samples, &mut rng) else {
                continue;
            };
            for (tokens, y) in [(flatten(s), 1.0), (neg.tokens, 0.0)] {
                let ids = self.vocab.encode(&tokens).expect("vocab has <unk>");
                data.push((self.block_mean_logprob(&ids), y));
            }
        }
        if data.is_empty() {
            return;
        }
        let mean = data.iter().map(|d| d.0).sum::<f64>() / data.len() as f64;
        let var = data.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / data.len() as f64;
        let mut head = EosHead {
            weight: 0.0,
            bias: 0.0,
            mean,
            std: var.sqrt().max(1e-6),
        };
        let mut step = 0usize;
        for _ in 0..config.eos_epochs {
            data.shuffle(&mut rng);
            for &(z, y) in &data {
                let lr = config.learning_rate
                    * ((step + 1) as f64 / config.warmup_steps.max(1) as f64).min(1.0);
                let x = (z - head.mean) / head.std;
                let err = sigmoid(head.weight * x + head.bias) - y;
                head.weight -= lr * err * x;
                head.bias -= lr * err;
                step += 1;
            }
        }
        self.eos = head;
    }

    /// `exp` of the mean per-token negative log-likelihood, each sequence
    /// scored from an empty context.
    pub fn perplexity<S: AsRef<str>>(&self, sequences: &[Vec<S>]) -> f64 {
        let mut nll = 0.0;
        let mut n = 0usize;
        for seq in sequences {
            let ids = self.vocab.encode(seq).expect("vocab has <unk>");
            for t in 0..ids.len() {
                nll -= self.probability(&self.context_of(&ids[..t]), ids[t]).ln();
                n += 1;
            }
        }
        if n == 0 {
            return 1.0;
        }
        (nll / n as f64).exp()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            order: self.order,
            discount: self.discount,
            vocab: self.vocab.clone(),
            eos_head: self.eos,
            counts: self.counts.clone(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NgramError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| NgramError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(NgramError::Format(format!(
                "expected {FORMAT} v{VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        let model = NgramModel::from_counts(file.counts, file.discount, file.eos_head);
        if model.vocab != file.vocab {
            return Err(NgramError::Format("vocabulary does not match counts".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NgramError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NgramError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

impl GeneratorBackend for NgramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let p = self.distribution(&self.context_of(prefix));
        Ok(p.iter().map(|x| x.ln()).collect())
    }

    fn token_logprob(&self, prefix: &[TokenId], next: TokenId) -> Result<f64, BackendError> {
        if next as usize >= self.vocab.len() {
            return Err(BackendError::BadTokenId(next));
        }
        Ok(self.probability(&self.context_of(prefix), next).ln())
    }

    fn eos_score(&self, sequence: &[TokenId]) -> Result<f64, BackendError> {
        Ok(self.eos.score(self.block_mean_logprob(sequence)))
    }

    fn describe(&self) -> String {
        format!(
            "ngram order {} discount {} over {} tokens",
            self.order,
            self.discount,
            self.vocab.len()
        )
    }
}
