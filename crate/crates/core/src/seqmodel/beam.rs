use std::cmp::Ordering;

use super::{BackendError, GeneratorBackend, TokenId};

#[derive(Debug, Clone, PartialEq)]
pub struct BeamCandidate {
    /// Generated tokens, ending with the stop token when `finished`.
    pub tokens: Vec<TokenId>,
    pub logprob: f64,
    pub finished: bool,
}

impl BeamCandidate {
    /// Generated tokens without the trailing stop token.
    pub fn body(&self) -> &[TokenId] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

fn rank(a: &BeamCandidate, b: &BeamCandidate) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Length-capped beam search.
///
/// At every step each live hypothesis is extended by its `beam_size` best
/// tokens; the extensions compete with already finished hypotheses for the
/// `beam_size` slots. Search ends when no live hypothesis survives or after
/// `max_len` generated tokens. Candidates are returned best first by total
/// log-probability, ties broken by token ids. `beam_size = 1` is greedy
/// decoding.
pub fn beam_generate(
    backend: &dyn GeneratorBackend,
    prefix: &[TokenId],
    stop: TokenId,
    beam_size: usize,
    max_len: usize,
) -> Result<Vec<BeamCandidate>, BackendError> {
    let beam_size = beam_size.max(1);
    let mut beam = vec![BeamCandidate {
        tokens: Vec::new(),
        logprob: 0.0,
        finished: false,
    }];
    let mut context = prefix.to_vec();
    for _ in 0..max_len {
        if beam.iter().all(|c| c.finished) {
            break;
        }
        let mut pool: Vec<BeamCandidate> = Vec::new();
        for hyp in &beam {
            if hyp.finished {
                pool.push(hyp.clone());
                continue;
            }
            context.truncate(prefix.len());
            context.extend_from_slice(&hyp.tokens);
            let logprobs = backend.next_logprobs(&context)?;
            let mut options: Vec<(TokenId, f64)> = logprobs
                .iter()
                .enumerate()
                .filter(|(_, lp)| lp.is_finite())
                .map(|(id, lp)| (id as TokenId, *lp))
                .collect();
            let by_score = |a: &(TokenId, f64), b: &(TokenId, f64)| {
                b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
            };
            if options.len() > beam_size {
                options.select_nth_unstable_by(beam_size - 1, by_score);
                options.truncate(beam_size);
            }
            for (id, lp) in options {
                let mut tokens = hyp.tokens.clone();
                tokens.push(id);
                pool.push(BeamCandidate {
                    tokens,
                    logprob: hyp.logprob + lp,
                    finished: id == stop,
                });
            }
        }
        pool.sort_by(rank);
        pool.truncate(beam_size);
        if pool.is_empty() {
            break;
        }
        beam = pool;
    }
    beam.retain(|c| !c.tokens.is_empty());
    beam.sort_by(rank);
    Ok(beam)
}
