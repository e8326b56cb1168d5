//! Training objectives, reported as negative log-likelihoods.

use super::{
    belief_block, db_block, history_tokens, response_block, BackendError, ContrastiveSample,
    GeneratorBackend, TokenId, TurnSample,
};

/// Clipping applied to classifier scores before taking logs.
pub const EPSILON: f64 = 1e-12;

/// `-Σ log p(target_t | prefix, target_<t)`.
pub fn sequence_nll(
    backend: &dyn GeneratorBackend,
    prefix: &[TokenId],
    targets: &[TokenId],
) -> Result<f64, BackendError> {
    let mut context = prefix.to_vec();
    let mut total = 0.0;
    for &t in targets {
        total -= backend.token_logprob(&context, t)?;
        context.push(t);
    }
    Ok(total)
}

/// NLL of `<SOB> .. <EOB>` given the history.
pub fn loss_belief(backend: &dyn GeneratorBackend, sample: &TurnSample) -> Result<f64, BackendError> {
    let vocab = backend.vocab();
    let prefix = vocab.encode(&history_tokens(&sample.history))?;
    let targets = vocab.encode(&belief_block(sample.domain, &sample.belief))?;
    sequence_nll(backend, &prefix, &targets)
}

/// NLL of the template through `<EOS>` given history, belief and DB match.
pub fn loss_response(
    backend: &dyn GeneratorBackend,
    sample: &TurnSample,
) -> Result<f64, BackendError> {
    let vocab = backend.vocab();
    let mut prefix = history_tokens(&sample.history);
    prefix.extend(belief_block(sample.domain, &sample.belief));
    prefix.extend(db_block(sample.db));
    let prefix = vocab.encode(&prefix)?;
    let targets = vocab.encode(&response_block(&sample.response))?;
    sequence_nll(backend, &prefix, &targets)
}

/// Binary cross-entropy of the `<EOS>` classifier on one positive and one
/// negative sequence.
pub fn loss_contrastive(
    backend: &dyn GeneratorBackend,
    positive: &ContrastiveSample,
    negative: &ContrastiveSample,
) -> Result<f64, BackendError> {
    let vocab = backend.vocab();
    let p = backend.eos_score(&vocab.encode(&positive.tokens)?)?;
    let q = backend.eos_score(&vocab.encode(&negative.tokens)?)?;
    let p = p.clamp(EPSILON, 1.0 - EPSILON);
    let q = q.clamp(EPSILON, 1.0 - EPSILON);
    Ok(-(p.ln() + (1.0 - q).ln()))
}

pub fn total_loss(
    backend: &dyn GeneratorBackend,
    sample: &TurnSample,
    positive: &ContrastiveSample,
    negative: &ContrastiveSample,
) -> Result<f64, BackendError> {
    Ok(loss_belief(backend, sample)?
        + loss_response(backend, sample)?
        + loss_contrastive(backend, positive, negative)?)
}
