#pragma once

#include "genius/common.hpp"
#include "genius/foresight.hpp"
#include "genius/policy.hpp"

#include <functional>
#include <vector>

// Brute-force ground truth on tiny instances. Nothing here reuses the
// log-domain code paths of the policy or foresight modules: probabilities are
// formed directly as exp(logit) / sum(exp(logit)) and sequences are scored by
// explicit products.
namespace genius::oracle {

inline constexpr int kMaxTokens = 12;
inline constexpr int kMaxVocab = 5;
inline constexpr double kMaxPaths = 1e7;

struct EnumerationBudget {
    int max_tokens = 6;
    int vocab_cap = kMaxVocab;
    // When false, eos does not end a path; every length-max_tokens string is
    // returned.
    bool stop_at_eos = true;

    // Throws BudgetError when the caps would be exceeded.
    void check(const Vocab& vocab) const;
};

struct Path {
    TokenSeq tokens;
    double logprob = 0.0;
    bool truncated = false;   // reached max_tokens without eos
};

// Next-token probabilities straight from the logit row.
std::vector<double> next_probs(const TabularPolicy& policy, const TokenSeq& context);

std::vector<Path> enumerate_paths(const TabularPolicy& policy, const TokenSeq& prefix, const EnumerationBudget& budget);

// The greedy-decoding foresight score of `step` after `prefix`. The greedy
// continuation is recovered from the enumerated path tree by following the
// heaviest subtree at every depth, and scored from the enumerated path
// probability.
double exact_foresight(const TabularPolicy& policy, const TokenSeq& prefix, const TokenSeq& step,
                       const EnumerationBudget& budget, ScoreWindow window = ScoreWindow::step_and_continuation);

// exp(s / tau) / sum exp(s / tau), unshifted.
std::vector<double> exact_distribution(const std::vector<double>& scores, double tau);

using PolicyFn = std::function<double(const TabularPolicy&)>;

// Central differences over every entry of the rows keyed by `keys`.
LogitTable finite_diff_grad(const PolicyFn& fn, const TabularPolicy& params, const std::vector<LogitTable::Key>& keys,
                            double h = 1e-5);

// Context keys visited while scoring `continuation` after `prefix`.
std::vector<LogitTable::Key> visited_keys(const TabularPolicy& policy, const TokenSeq& prefix, const TokenSeq& continuation);

// max |a - b| / max(1, |b|) over all entries of either table.
double max_relative_error(const LogitTable& analytic, const LogitTable& reference);

using Evaluator = std::function<bool(const TokenSeq& query, const TokenSeq& response)>;

// Exhaustive argmax over eos-terminated responses of (correct, log-prob);
// ties go to the lexicographically smallest response. Empty when no
// enumerated response is correct.
TokenSeq best_response(const TabularPolicy& policy, const Evaluator& evaluator, const TokenSeq& query,
                       const EnumerationBudget& budget);

}  // namespace genius::oracle
