use thiserror::Error;

use super::{TokenId, Vocab};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("token id {0} is out of range")]
    BadTokenId(TokenId),
    #[error("backend failure: {0}")]
    Failure(String),
}

/// Next-token scoring plus a sequence-level classifier on `<EOS>`.
///
/// Implementations must be immutable after construction so that scoring and
/// generation can run from many threads at once.
pub trait GeneratorBackend: Send + Sync {
    fn vocab(&self) -> &Vocab;

    /// Natural-log probabilities of every vocabulary token after `prefix`.
    /// Impossible tokens are `-inf`; the exponentiated values sum to 1.
    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, BackendError>;

    fn token_logprob(&self, prefix: &[TokenId], next: TokenId) -> Result<f64, BackendError> {
        self.next_logprobs(prefix)?
            .get(next as usize)
            .copied()
            .ok_or(BackendError::BadTokenId(next))
    }

    /// Probability that a complete flattened sequence is a positive sample.
    fn eos_score(&self, sequence: &[TokenId]) -> Result<f64, BackendError>;

    /// Short human-readable description for health checks.
    fn describe(&self) -> String;
}

/// Uniform next-token distribution with a constant classifier score.
#[derive(Debug, Clone)]
pub struct UniformBackend {
    vocab: Vocab,
    eos: f64,
}

impl UniformBackend {
    pub fn new(vocab: Vocab, eos: f64) -> Self {
        assert!(!vocab.is_empty(), "uniform backend needs a non-empty vocabulary");
        UniformBackend { vocab, eos }
    }
}

impl GeneratorBackend for UniformBackend {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_logprobs(&self, _prefix: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let n = self.vocab.len();
        Ok(vec![-(n as f64).ln(); n])
    }

    fn eos_score(&self, _sequence: &[TokenId]) -> Result<f64, BackendError> {
        Ok(self.eos)
    }

    fn describe(&self) -> String {
        format!("uniform over {} tokens", self.vocab.len())
    }
}

type NextFn = dyn Fn(&[TokenId]) -> Vec<f64> + Send + Sync;
type EosFn = dyn Fn(&[TokenId]) -> f64 + Send + Sync;

/// Backend defined by closures; used for toy distributions.
pub struct FnBackend {
    vocab: Vocab,
    next: Box<NextFn>,
    eos: Box<EosFn>,
}

impl FnBackend {
    /// `next` returns natural-log probabilities over the whole vocabulary.
    pub fn new(
        vocab: Vocab,
        next: impl Fn(&[TokenId]) -> Vec<f64> + Send + Sync + 'static,
        eos: impl Fn(&[TokenId]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnBackend {
            vocab,
            next: Box::new(next),
            eos: Box::new(eos),
        }
    }
}

impl GeneratorBackend for FnBackend {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_logprobs(&self, prefix: &[TokenId]) -> Result<Vec<f64>, BackendError> {
        let lp = (self.next)(prefix);
        if lp.len() != self.vocab.len() {
            return Err(BackendError::Failure(format!(
                "distribution has {} entries for a vocabulary of {}",
                lp.len(),
                self.vocab.len()
            )));
        }
        Ok(lp)
    }

    fn eos_score(&self, sequence: &[TokenId]) -> Result<f64, BackendError> {
        Ok((self.eos)(sequence))
    }

    fn describe(&self) -> String {
        format!("closure backend over {} tokens", self.vocab.len())
    }
}
