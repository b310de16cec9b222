#include "genius/foresight.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace genius {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::full: return "full";
        case Strategy::no_foresight: return "no_foresight";
        case Strategy::greedy: return "greedy";
    }
    return "?";
}

std::string to_string(Decoding d) { return d == Decoding::sampled ? "sampled" : "greedy"; }

std::string to_string(ScoreWindow w) {
    return w == ScoreWindow::step_and_continuation ? "step_and_continuation" : "continuation_only";
}

Strategy parse_strategy(const std::string& s) {
    if (s == "full") return Strategy::full;
    if (s == "no_foresight") return Strategy::no_foresight;
    if (s == "greedy") return Strategy::greedy;
    throw InputError("unknown strategy '" + s + "'");
}

Decoding parse_decoding(const std::string& s) {
    if (s == "sampled") return Decoding::sampled;
    if (s == "greedy") return Decoding::greedy;
    throw InputError("unknown decoding '" + s + "'");
}

ScoreWindow parse_score_window(const std::string& s) {
    if (s == "step_and_continuation") return ScoreWindow::step_and_continuation;
    if (s == "continuation_only") return ScoreWindow::continuation_only;
    throw InputError("unknown score window '" + s + "'");
}

void SamplingConfig::validate() const {
    if (beams < 1 || rollouts < 1 || timestamps < 1) throw InputError("M, N and K must be at least 1");
    if (!(tau > 0.0)) throw InputError("tau must be positive");
    if (!(gen_temperature > 0.0)) throw InputError("gen_temperature must be positive");
    if (max_step_tokens < 1 || max_foresight_tokens < 1) throw InputError("token limits must be positive");
}

std::vector<BeamState> initial_beams(const TokenSeq& query) {
    if (query.empty()) throw InputError("query must be nonempty");
    return {BeamState{query, query.size(), 0.0, false}};
}

namespace {

bool step_done(const Vocab& v, const TokenSeq& step, int max_tokens) {
    return step.back() == v.step_sep || step.back() == v.eos || static_cast<int>(step.size()) >= max_tokens;
}

std::vector<Token> ranked_tokens(const TabularPolicy& policy, const TokenSeq& context) {
    const std::vector<double> lp = policy.step_logprobs(context);
    std::vector<Token> order(lp.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Token a, Token b) { return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(b)]; });
    return order;
}

double mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += v[i];
    return s / static_cast<double>(end - begin);
}

}  // namespace

std::vector<ForesightCandidate> rollout_candidates(const TabularPolicy& policy, const std::vector<BeamState>& beams,
                                                   const SamplingConfig& cfg, std::uint64_t stream_root) {
    cfg.validate();
    const Vocab& v = policy.vocab();
    std::vector<ForesightCandidate> out;
    for (std::size_t m = 0; m < beams.size(); ++m) {
        const BeamState& beam = beams[m];
        if (beam.terminal) continue;
        std::vector<Token> ranked;
        if (cfg.decoding == Decoding::greedy) ranked = ranked_tokens(policy, beam.prefix);
        for (int j = 0; j < cfg.rollouts; ++j) {
            if (cfg.decoding == Decoding::greedy && j >= v.size) break;
            Rng rng = Rng::stream(stream_root, {m, static_cast<std::uint64_t>(j)});
            auto next = [&](const TokenSeq& ctx) {
                return cfg.decoding == Decoding::greedy ? policy.greedy_token(ctx)
                                                        : policy.sample_token(ctx, cfg.gen_temperature, rng);
            };

            ForesightCandidate c;
            c.origin_beam = m;
            TokenSeq ctx = beam.prefix;
            do {
                const Token t = (cfg.decoding == Decoding::greedy && c.step.empty()) ? ranked[static_cast<std::size_t>(j)] : next(ctx);
                c.step.push_back(t);
                ctx.push_back(t);
            } while (!step_done(v, c.step, cfg.max_step_tokens));

            if (c.step.back() != v.eos) {
                while (static_cast<int>(c.continuation.size()) < cfg.max_foresight_tokens) {
                    const Token t = next(ctx);
                    c.continuation.push_back(t);
                    ctx.push_back(t);
                    if (t == v.eos) break;
                }
            }

            const TokenSeq window = concat(c.step, c.continuation);
            const std::vector<double> lp = policy.token_logprobs(beam.prefix, window);
            const std::size_t step_len = c.step.size();
            if (cfg.strategy == Strategy::no_foresight) {
                c.fscore = mean(lp, 0, step_len);
            } else if (cfg.window == ScoreWindow::continuation_only && !c.continuation.empty()) {
                c.fscore = mean(lp, step_len, lp.size());
            } else {
                c.fscore = mean(lp, 0, lp.size());
            }
            c.full_response = concat(beam.response(), window);
            c.ends_in_eos = c.step.back() == v.eos;
            out.push_back(std::move(c));
        }
    }
    return out;
}

std::vector<double> build_distribution(const std::vector<double>& fscores, double tau) {
    if (fscores.empty()) throw InputError("distribution needs at least one score");
    if (!(tau > 0.0)) throw InputError("tau must be positive");
    std::vector<double> scaled(fscores.size());
    for (std::size_t i = 0; i < fscores.size(); ++i) {
        if (!std::isfinite(fscores[i])) throw InputError("non-finite foresight score");
        scaled[i] = fscores[i] / tau;
    }
    const double lse = logsumexp(scaled);
    for (double& s : scaled) s = std::exp(s - lse);
    return scaled;
}

namespace {

BeamState extend(const BeamState& parent, const ForesightCandidate& c) {
    BeamState b;
    b.prefix = concat(parent.prefix, c.step);
    b.query_len = parent.query_len;
    b.q_value = c.fscore;
    b.terminal = c.ends_in_eos;
    return b;
}

std::size_t argmax_score(const std::vector<ForesightCandidate>& candidates) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        if (candidates[i].fscore > candidates[best].fscore) best = i;
    }
    return best;
}

void check_sizes(const std::vector<ForesightCandidate>& candidates, const std::vector<double>& dist) {
    if (candidates.empty()) throw InputError("no candidates to resample");
    if (dist.size() != candidates.size()) throw InputError("distribution size does not match candidates");
}

}  // namespace

std::vector<BeamState> explore_resample(const std::vector<ForesightCandidate>& candidates,
                                        const std::vector<double>& dist, int beam_count,
                                        const std::vector<BeamState>& beams, Rng& rng) {
    check_sizes(candidates, dist);
    std::vector<double> weights = dist;
    std::vector<bool> taken(candidates.size(), false);
    const std::size_t picks = std::min(static_cast<std::size_t>(beam_count), candidates.size());
    std::vector<BeamState> next;
    next.reserve(picks);
    for (std::size_t r = 0; r < picks; ++r) {
        double remaining = 0.0;
        for (double w : weights) remaining += w;
        std::size_t idx = 0;
        if (remaining > 0.0) {
            idx = rng.categorical(weights);
        } else {
            // All leftover mass underflowed: the tau -> 0 limit, highest score wins.
            bool found = false;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (taken[i]) continue;
                if (!found || candidates[i].fscore > candidates[idx].fscore) idx = i;
                found = true;
            }
        }
        taken[idx] = true;
        weights[idx] = 0.0;
        const ForesightCandidate& c = candidates[idx];
        next.push_back(extend(beams.at(c.origin_beam), c));
    }
    return next;
}

std::optional<std::pair<std::size_t, std::size_t>> exploit_resample(const std::vector<ForesightCandidate>& candidates,
                                                                    const std::vector<double>& dist, Rng& rng) {
    check_sizes(candidates, dist);
    if (candidates.size() < 2) return std::nullopt;
    const std::size_t pos = argmax_score(candidates);
    std::vector<double> weights = dist;
    std::optional<std::size_t> best_eligible;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i == pos || candidates[i].full_response == candidates[pos].full_response) {
            weights[i] = 0.0;
        } else if (!best_eligible || candidates[i].fscore > candidates[*best_eligible].fscore) {
            best_eligible = i;
        }
    }
    if (!best_eligible) return std::nullopt;
    double remaining = 0.0;
    for (double w : weights) remaining += w;
    const std::size_t neg = remaining > 0.0 ? rng.categorical(weights) : *best_eligible;
    return std::make_pair(pos, neg);
}

std::vector<BeamState> explore_greedy(const std::vector<ForesightCandidate>& candidates, int beam_count,
                                      const std::vector<BeamState>& beams) {
    if (candidates.empty()) throw InputError("no candidates to select");
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].fscore > candidates[b].fscore; });
    const std::size_t picks = std::min(static_cast<std::size_t>(beam_count), candidates.size());
    std::vector<BeamState> next;
    for (std::size_t r = 0; r < picks; ++r) {
        const ForesightCandidate& c = candidates[order[r]];
        next.push_back(extend(beams.at(c.origin_beam), c));
    }
    return next;
}

std::optional<std::pair<std::size_t, std::size_t>> exploit_greedy(const std::vector<ForesightCandidate>& candidates) {
    if (candidates.size() < 2) return std::nullopt;
    const std::size_t pos = argmax_score(candidates);
    std::optional<std::size_t> neg;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i == pos || candidates[i].full_response == candidates[pos].full_response) continue;
        if (!neg || candidates[i].fscore < candidates[*neg].fscore) neg = i;
    }
    if (!neg) return std::nullopt;
    return std::make_pair(pos, *neg);
}

std::pair<double, double> compute_advantages(const ForesightCandidate& pos, const ForesightCandidate& neg,
                                             const std::vector<BeamState>& beams) {
    return {pos.fscore - beams.at(pos.origin_beam).q_value, neg.fscore - beams.at(neg.origin_beam).q_value};
}

std::vector<PreferenceQuintuple> collect_quintuples(const TabularPolicy& policy, const TokenSeq& query,
                                                    const SamplingConfig& cfg, std::uint64_t stream_root) {
    cfg.validate();
    policy.validate_tokens(query);
    std::vector<BeamState> beams = initial_beams(query);
    std::vector<PreferenceQuintuple> out;
    for (int k = 1; k <= cfg.timestamps; ++k) {
        const auto ts = static_cast<std::uint64_t>(k);
        const std::vector<ForesightCandidate> candidates =
            rollout_candidates(policy, beams, cfg, stream_id(stream_root, {ts, 0}));
        if (candidates.empty()) break;

        std::vector<double> scores;
        scores.reserve(candidates.size());
        for (const auto& c : candidates) scores.push_back(c.fscore);
        const std::vector<double> dist = build_distribution(scores, cfg.tau);

        Rng exploit_rng = Rng::stream(stream_root, {ts, 1});
        const auto pair = cfg.strategy == Strategy::greedy ? exploit_greedy(candidates)
                                                           : exploit_resample(candidates, dist, exploit_rng);
        if (pair) {
            const ForesightCandidate& pos = candidates[pair->first];
            const ForesightCandidate& neg = candidates[pair->second];
            const auto [adv_w, adv_l] = compute_advantages(pos, neg, beams);
            out.push_back(PreferenceQuintuple{query, pos.full_response, adv_w, neg.full_response, adv_l, k,
                                              pos.fscore, neg.fscore, cfg.strategy});
        }

        Rng explore_rng = Rng::stream(stream_root, {ts, 2});
        beams = cfg.strategy == Strategy::greedy ? explore_greedy(candidates, cfg.beams, beams)
                                                 : explore_resample(candidates, dist, cfg.beams, beams, explore_rng);
    }
    return out;
}

std::string quintuple_to_line(const PreferenceQuintuple& q) {
    nlohmann::ordered_json j;
    j["query"] = q.query;
    j["pos_tokens"] = q.pos;
    j["neg_tokens"] = q.neg;
    j["pos_adv"] = q.pos_adv;
    j["neg_adv"] = q.neg_adv;
    j["timestamp"] = q.timestamp;
    j["pos_fscore"] = q.pos_fscore;
    j["neg_fscore"] = q.neg_fscore;
    j["strategy"] = to_string(q.strategy);
    return j.dump();
}

PreferenceQuintuple quintuple_from_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        PreferenceQuintuple q;
        q.query = j.at("query").get<TokenSeq>();
        q.pos = j.at("pos_tokens").get<TokenSeq>();
        q.neg = j.at("neg_tokens").get<TokenSeq>();
        q.pos_adv = j.at("pos_adv").get<double>();
        q.neg_adv = j.at("neg_adv").get<double>();
        q.timestamp = j.at("timestamp").get<int>();
        q.pos_fscore = j.at("pos_fscore").get<double>();
        q.neg_fscore = j.at("neg_fscore").get<double>();
        q.strategy = parse_strategy(j.at("strategy").get<std::string>());
        return q;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad quintuple record: ") + e.what());
    }
}

}  // namespace genius
