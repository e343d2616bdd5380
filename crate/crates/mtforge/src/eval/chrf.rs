//! Character n-gram F-score over whitespace-stripped text, at the
//! sentence level and pooled over a corpus.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
pub struct ChrfOptions {
    pub max_ngram: usize,
    pub beta: f64,
}

impl Default for ChrfOptions {
    fn default() -> Self {
        Self { max_ngram: 6, beta: 2.0 }
    }
}

fn significant_chars(text: &str) -> Vec<char> {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

fn gram_count(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    if n > 0 && chars.len() >= n {
        for gram in chars.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_matches(hypothesis: &[char], reference: &[char], n: usize) -> usize {
    let reference = ngram_counts(reference, n);
    ngram_counts(hypothesis, n)
        .iter()
        .map(|(gram, count)| (*count).min(reference.get(gram).copied().unwrap_or(0)))
        .sum()
}

/// F-score with recall weighted `beta` times as much as precision. Zero
/// whenever either side has no n-grams or nothing matches.
fn f_beta(matches: usize, hyp_total: usize, ref_total: usize, beta: f64) -> f64 {
    if hyp_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let precision = matches as f64 / hyp_total as f64;
    let recall = matches as f64 / ref_total as f64;
    let denominator = beta * beta * precision + recall;
    if denominator == 0.0 {
        0.0
    } else {
        (1.0 + beta * beta) * precision * recall / denominator
    }
}

/// Scores one hypothesis against one reference on a 0 to 100 scale.
///
/// Whitespace carries no signal: all of it is removed before n-grams are
/// counted. The score averages per-order F-scores over n = 1 to
/// `max_ngram`, skipping orders where neither side has any n-grams, so a
/// short pair is not penalized for orders longer than both strings. When
/// every order is skipped the strings are both empty and the score is 100;
/// an empty hypothesis against a non-empty reference scores 0.
pub fn sentence_chrf(hypothesis: &str, reference: &str, options: &ChrfOptions) -> f64 {
    let hyp = significant_chars(hypothesis);
    let reference = significant_chars(reference);
    let mut total = 0.0;
    let mut orders = 0usize;
    for n in 1..=options.max_ngram {
        let hyp_total = gram_count(hyp.len(), n);
        let ref_total = gram_count(reference.len(), n);
        if hyp_total == 0 && ref_total == 0 {
            continue;
        }
        total += f_beta(clipped_matches(&hyp, &reference, n), hyp_total, ref_total, options.beta);
        orders += 1;
    }
    if orders == 0 {
        100.0
    } else {
        100.0 * total / orders as f64
    }
}

/// Corpus-level accumulator that pools n-gram statistics across pairs
/// before computing F, rather than averaging per-sentence scores.
#[derive(Debug, Clone)]
pub struct ChrfStats {
    options: ChrfOptions,
    matches: Vec<usize>,
    hyp_totals: Vec<usize>,
    ref_totals: Vec<usize>,
    pairs: usize,
}

impl ChrfStats {
    pub fn new(options: ChrfOptions) -> Self {
        let orders = options.max_ngram;
        Self {
            options,
            matches: vec![0; orders],
            hyp_totals: vec![0; orders],
            ref_totals: vec![0; orders],
            pairs: 0,
        }
    }

    pub fn add(&mut self, hypothesis: &str, reference: &str) {
        let hyp = significant_chars(hypothesis);
        let reference = significant_chars(reference);
        for n in 1..=self.options.max_ngram {
            let hyp_total = gram_count(hyp.len(), n);
            let ref_total = gram_count(reference.len(), n);
            if hyp_total == 0 && ref_total == 0 {
                continue;
            }
            self.matches[n - 1] += clipped_matches(&hyp, &reference, n);
            self.hyp_totals[n - 1] += hyp_total;
            self.ref_totals[n - 1] += ref_total;
        }
        self.pairs += 1;
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// Pooled score over every order where any pair contributed n-grams.
    /// An accumulator that saw no text at all scores 0.
    pub fn score(&self) -> f64 {
        let mut total = 0.0;
        let mut orders = 0usize;
        for n in 0..self.options.max_ngram {
            if self.hyp_totals[n] == 0 && self.ref_totals[n] == 0 {
                continue;
            }
            total += f_beta(self.matches[n], self.hyp_totals[n], self.ref_totals[n], self.options.beta);
            orders += 1;
        }
        if orders == 0 {
            0.0
        } else {
            100.0 * total / orders as f64
        }
    }
}

pub fn corpus_chrf<'a, I>(pairs: I, options: &ChrfOptions) -> f64
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut stats = ChrfStats::new(options.clone());
    for (hypothesis, reference) in pairs {
        stats.add(hypothesis, reference);
    }
    stats.score()
}
