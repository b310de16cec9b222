#pragma once

#include "genius/common.hpp"
#include "genius/policy.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace genius {

enum class Strategy { full, no_foresight, greedy };
// How candidate steps and foresight continuations are decoded.
//   sampled: token-by-token draws at gen_temperature.
//   greedy:  candidate j of a beam starts with the j-th most likely token and
//            continues by argmax; continuations are argmax. Fully deterministic.
enum class Decoding { sampled, greedy };
// Which tokens the foresight score averages over.
enum class ScoreWindow { step_and_continuation, continuation_only };

std::string to_string(Strategy s);
std::string to_string(Decoding d);
std::string to_string(ScoreWindow w);
Strategy parse_strategy(const std::string& s);
Decoding parse_decoding(const std::string& s);
ScoreWindow parse_score_window(const std::string& s);

struct SamplingConfig {
    int beams = 2;           // M
    int rollouts = 4;        // N, per beam
    int timestamps = 4;      // K
    double tau = 1.0;        // sharpness of the score distribution
    double gen_temperature = 0.6;
    int max_step_tokens = 6;
    int max_foresight_tokens = 12;
    Strategy strategy = Strategy::full;
    Decoding decoding = Decoding::sampled;
    ScoreWindow window = ScoreWindow::step_and_continuation;

    void validate() const;
};

struct BeamState {
    TokenSeq prefix;         // query followed by the steps chosen so far
    std::size_t query_len = 0;
    double q_value = 0.0;    // value of the last chosen step; zero before the first
    bool terminal = false;

    TokenSeq response() const { return TokenSeq(prefix.begin() + static_cast<std::ptrdiff_t>(query_len), prefix.end()); }
};

struct ForesightCandidate {
    std::size_t origin_beam = 0;
    TokenSeq step;
    TokenSeq continuation;
    double fscore = 0.0;
    // Response part only (query excluded): beam steps, step, continuation.
    TokenSeq full_response;
    bool ends_in_eos = false;   // the step itself closes the response
};

struct PreferenceQuintuple {
    TokenSeq query;
    TokenSeq pos;
    double pos_adv = 0.0;
    TokenSeq neg;
    double neg_adv = 0.0;
    int timestamp = 0;
    double pos_fscore = 0.0;
    double neg_fscore = 0.0;
    Strategy strategy = Strategy::full;

    friend bool operator==(const PreferenceQuintuple&, const PreferenceQuintuple&) = default;
};

std::vector<BeamState> initial_beams(const TokenSeq& query);

// Samples up to N candidate steps per live beam, extends each with a foresight
// continuation and scores it by mean temperature-1 log-probability. Randomness
// comes from per-(beam, candidate) streams under `stream_root`.
std::vector<ForesightCandidate> rollout_candidates(const TabularPolicy& policy, const std::vector<BeamState>& beams,
                                                   const SamplingConfig& cfg, std::uint64_t stream_root);

// Softmax of scores / tau.
std::vector<double> build_distribution(const std::vector<double>& fscores, double tau);

// Draws min(M, |candidates|) distinct candidates from the distribution without
// replacement; each becomes a beam whose value is the candidate's score.
std::vector<BeamState> explore_resample(const std::vector<ForesightCandidate>& candidates,
                                        const std::vector<double>& dist, int beam_count,
                                        const std::vector<BeamState>& beams, Rng& rng);

// Positive = highest score (ties to lowest index). Negative is drawn from the
// distribution with the positive removed and the rest renormalized; candidates
// whose full response is identical to the positive carry no preference and are
// excluded too. nullopt when no valid negative exists.
std::optional<std::pair<std::size_t, std::size_t>> exploit_resample(const std::vector<ForesightCandidate>& candidates,
                                                                    const std::vector<double>& dist, Rng& rng);

std::vector<BeamState> explore_greedy(const std::vector<ForesightCandidate>& candidates, int beam_count,
                                      const std::vector<BeamState>& beams);
std::optional<std::pair<std::size_t, std::size_t>> exploit_greedy(const std::vector<ForesightCandidate>& candidates);

// Advantage = score minus the origin beam's previous value.
std::pair<double, double> compute_advantages(const ForesightCandidate& pos, const ForesightCandidate& neg,
                                             const std::vector<BeamState>& beams);

std::vector<PreferenceQuintuple> collect_quintuples(const TabularPolicy& policy, const TokenSeq& query,
                                                    const SamplingConfig& cfg, std::uint64_t stream_root);

// Quintuple dump: one JSON object per line with keys in the order
// query, pos_tokens, neg_tokens, pos_adv, neg_adv, timestamp, pos_fscore,
// neg_fscore, strategy.
std::string quintuple_to_line(const PreferenceQuintuple& q);
PreferenceQuintuple quintuple_from_line(const std::string& line);

}  // namespace genius
