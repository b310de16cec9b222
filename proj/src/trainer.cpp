#include "genius/trainer.hpp"

#include "genius/parallel.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace genius {

void TrainConfig::validate() const {
    sampling.validate();
    loss.validate();
    if (rounds < 1 || steps_per_round < 0 || batch_size < 1) throw InputError("rounds/batch_size must be positive");
    if (!(learning_rate >= 0.0)) throw InputError("learning_rate must be nonnegative");
    if (checkpoint_every < 0) throw InputError("checkpoint_every must be nonnegative");
    if (threads < 1) throw InputError("threads must be positive");
}

std::string metrics_to_line(const MetricsRecord& r) {
    nlohmann::ordered_json j;
    j["round"] = r.round;
    j["step"] = r.step;
    j["loss"] = r.loss;
    j["mean_w"] = r.mean_w;
    j["mean_z"] = r.mean_z;
    j["accuracy"] = r.accuracy ? nlohmann::ordered_json(*r.accuracy) : nlohmann::ordered_json(nullptr);
    j["pairs"] = r.pairs;
    return j.dump();
}

std::vector<PreferenceQuintuple> collect_dataset(const TabularPolicy& policy, const std::vector<TokenSeq>& queries,
                                                 const SamplingConfig& sampling, std::uint64_t seed, int round,
                                                 int threads) {
    std::vector<std::vector<PreferenceQuintuple>> per_query(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        const auto root = stream_id(seed, {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(i)});
        per_query[i] = collect_quintuples(policy, queries[i], sampling, root);
    });
    std::vector<PreferenceQuintuple> out;
    for (auto& qs : per_query) {
        for (auto& q : qs) out.push_back(std::move(q));
    }
    return out;
}

DatasetStats dataset_stats(std::size_t queries, const std::vector<PreferenceQuintuple>& data) {
    DatasetStats s;
    s.queries = queries;
    s.quintuples = data.size();
    if (data.empty()) return s;
    std::size_t calibrated = 0;
    for (const auto& q : data) {
        s.mean_pos_adv += q.pos_adv;
        s.mean_neg_adv += q.neg_adv;
        if (q.neg_adv > q.pos_adv) ++calibrated;
    }
    const auto n = static_cast<double>(data.size());
    s.mean_pos_adv /= n;
    s.mean_neg_adv /= n;
    s.calibration_fraction = static_cast<double>(calibrated) / n;
    return s;
}

namespace {

LogitTable tree_sum_range(const std::vector<LogitTable>& parts, std::size_t begin, std::size_t end, int width) {
    if (end - begin == 1) return parts[begin];
    const std::size_t mid = begin + (end - begin) / 2;
    LogitTable left = tree_sum_range(parts, begin, mid, width);
    left.add_scaled(tree_sum_range(parts, mid, end, width), 1.0);
    return left;
}

double tree_sum_scalar(const std::vector<double>& v, std::size_t begin, std::size_t end) {
    if (end - begin == 1) return v[begin];
    const std::size_t mid = begin + (end - begin) / 2;
    return tree_sum_scalar(v, begin, mid) + tree_sum_scalar(v, mid, end);
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

}  // namespace

LogitTable tree_sum(const std::vector<LogitTable>& parts, int width) {
    if (parts.empty()) return LogitTable(width);
    return tree_sum_range(parts, 0, parts.size(), width);
}

RoundResult run_round(const TabularPolicy& policy, const std::vector<TokenSeq>& queries, const TrainConfig& cfg,
                      int round, const TrainHooks& hooks, int step_offset) {
    cfg.validate();
    if (queries.empty()) throw InputError("run_round needs at least one query");
    const auto started = std::chrono::steady_clock::now();

    RoundResult result{policy, {}, {}, {}};
    const TabularPolicy reference = policy.snapshot_reference();
    result.dataset = collect_dataset(reference, queries, cfg.sampling, cfg.seed, round, cfg.threads);
    result.stats = dataset_stats(queries.size(), result.dataset);
    if (result.dataset.empty()) throw RoundError("no preference pairs collected this round");
    if (hooks.on_dataset) hooks.on_dataset(round, result.dataset);

    const std::size_t n = result.dataset.size();
    const std::size_t batch = std::min(static_cast<std::size_t>(cfg.batch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::stream(cfg.seed, {static_cast<std::uint64_t>(round), 0x5u});
    shuffle(order, shuffle_rng);

    const int width = policy.vocab().size;
    std::size_t cursor = 0;
    std::size_t consumed = 0;
    for (int s = 0; s < cfg.steps_per_round; ++s) {
        std::vector<std::size_t> members;
        members.reserve(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == n) {
                shuffle(order, shuffle_rng);
                cursor = 0;
            }
            members.push_back(order[cursor++]);
        }

        std::vector<LogitTable> grads(batch);
        std::vector<double> losses(batch), zs(batch), ws(batch);
        parallel_for(batch, cfg.threads, [&](std::size_t b) {
            QuintupleLoss ql = quintuple_loss(result.policy, reference, result.dataset[members[b]], cfg.loss);
            grads[b] = std::move(ql.grad);
            losses[b] = ql.loss;
            zs[b] = ql.z;
            ws[b] = ql.w;
        });

        LogitTable g = tree_sum(grads, width);
        const double inv = 1.0 / static_cast<double>(batch);
        result.policy.logits().add_scaled(g, -cfg.learning_rate * inv);
        consumed += batch;

        MetricsRecord rec;
        rec.round = round;
        rec.step = step_offset + s + 1;
        rec.loss = tree_sum_scalar(losses, 0, batch) * inv;
        rec.mean_z = tree_sum_scalar(zs, 0, batch) * inv;
        rec.mean_w = tree_sum_scalar(ws, 0, batch) * inv;
        if (hooks.accuracy) rec.accuracy = hooks.accuracy(result.policy);
        rec.pairs = consumed;
        rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (hooks.on_metrics) hooks.on_metrics(rec);
        result.metrics.push_back(rec);

        if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && rec.step % cfg.checkpoint_every == 0) {
            hooks.on_checkpoint(rec.step, result.policy);
        }
    }
    return result;
}

TrainResult train(const TabularPolicy& policy, const std::vector<TokenSeq>& queries, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
    TrainResult out{policy, {}, {}};
    for (int r = 0; r < cfg.rounds; ++r) {
        RoundResult rr = run_round(out.policy, queries, cfg, r, hooks, r * cfg.steps_per_round);
        out.policy = std::move(rr.policy);
        out.metrics.insert(out.metrics.end(), rr.metrics.begin(), rr.metrics.end());
        out.rounds.push_back(rr.stats);
    }
    return out;
}

double evaluate(const TabularPolicy& policy, const tasks::TaskSpec& spec, const std::vector<TokenSeq>& queries,
                int max_response_tokens) {
    if (queries.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& q : queries) {
        if (tasks::check(spec, q, tasks::greedy_response(policy, q, max_response_tokens))) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(queries.size());
}

std::vector<CurvePoint> scaling_curve(const TabularPolicy& policy, const std::vector<TokenSeq>& queries,
                                      const TrainConfig& cfg, const std::vector<int>& checkpoints,
                                      const AccuracyFn& accuracy) {
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0 || (i > 0 && checkpoints[i] < checkpoints[i - 1])) {
            throw InputError("checkpoints must be nonnegative and ascending");
        }
    }
    std::vector<CurvePoint> out;
    for (int steps : checkpoints) {
        if (steps == 0) {
            out.push_back({0, accuracy(policy)});
            continue;
        }
        TrainConfig c = cfg;
        c.rounds = 1;
        c.steps_per_round = steps;
        c.checkpoint_every = 0;
        const RoundResult rr = run_round(policy, queries, c, 0);
        out.push_back({steps, accuracy(rr.policy)});
    }
    return out;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
    std::string out = "step,accuracy\n";
    for (const auto& p : curve) out += std::to_string(p.step) + "," + format_double(p.accuracy) + "\n";
    return out;
}

}  // namespace genius
