#pragma once

#include "genius/foresight.hpp"
#include "genius/losses.hpp"
#include "genius/policy.hpp"
#include "genius/tasks.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace genius {

struct TrainConfig {
    SamplingConfig sampling;
    LossConfig loss;
    int rounds = 1;
    int steps_per_round = 200;
    int batch_size = 32;
    double learning_rate = 0.05;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;   // 0 disables intermediate checkpoints
    int threads = 1;

    void validate() const;
};

struct MetricsRecord {
    int round = 0;
    int step = 0;               // global optimizer step, 1-based
    double loss = 0.0;          // batch mean, before the update
    double mean_w = 0.0;
    double mean_z = 0.0;
    std::optional<double> accuracy;   // after the update, when an evaluator is set
    std::size_t pairs = 0;      // pairs consumed so far in this round
    double wall_clock = 0.0;    // seconds since the round started
};

// Metrics line format (JSON, keys in this order):
//   round, step, loss, mean_w, mean_z, accuracy, pairs
// Wall-clock time is kept out of the line so reruns are byte-identical.
std::string metrics_to_line(const MetricsRecord& r);

struct DatasetStats {
    std::size_t queries = 0;
    std::size_t quintuples = 0;
    double mean_pos_adv = 0.0;
    double mean_neg_adv = 0.0;
    double calibration_fraction = 0.0;   // pairs with neg_adv > pos_adv
};

using AccuracyFn = std::function<double(const TabularPolicy&)>;

struct TrainHooks {
    AccuracyFn accuracy;
    std::function<void(const MetricsRecord&)> on_metrics;
    std::function<void(int step, const TabularPolicy&)> on_checkpoint;
    std::function<void(int round, const std::vector<PreferenceQuintuple>&)> on_dataset;
};

struct RoundResult {
    TabularPolicy policy;
    DatasetStats stats;
    std::vector<MetricsRecord> metrics;
    std::vector<PreferenceQuintuple> dataset;
};

// Quintuples for every query, in query order. Query i uses the stream
// (seed, round, i), so the result is independent of `threads`.
std::vector<PreferenceQuintuple> collect_dataset(const TabularPolicy& policy, const std::vector<TokenSeq>& queries,
                                                 const SamplingConfig& sampling, std::uint64_t seed, int round,
                                                 int threads);

DatasetStats dataset_stats(std::size_t queries, const std::vector<PreferenceQuintuple>& data);

// Pairwise tree sum, so the rounding pattern only depends on the count.
LogitTable tree_sum(const std::vector<LogitTable>& parts, int width);

// One self-training round: freeze the reference, collect quintuples, then run
// steps_per_round batch gradient-descent steps on the configured loss.
// Throws RoundError when no quintuple is collected.
RoundResult run_round(const TabularPolicy& policy, const std::vector<TokenSeq>& queries, const TrainConfig& cfg,
                      int round, const TrainHooks& hooks = {}, int step_offset = 0);

struct TrainResult {
    TabularPolicy policy;
    std::vector<MetricsRecord> metrics;
    std::vector<DatasetStats> rounds;
};

TrainResult train(const TabularPolicy& policy, const std::vector<TokenSeq>& queries, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// Fraction of queries whose greedy response the task marks correct.
double evaluate(const TabularPolicy& policy, const tasks::TaskSpec& spec, const std::vector<TokenSeq>& queries,
                int max_response_tokens = 12);

struct CurvePoint {
    int step = 0;
    double accuracy = 0.0;
};

// Accuracy of a fresh copy of `policy` trained for each checkpoint's number
// of steps (one round). Checkpoints must be nondecreasing.
std::vector<CurvePoint> scaling_curve(const TabularPolicy& policy, const std::vector<TokenSeq>& queries,
                                      const TrainConfig& cfg, const std::vector<int>& checkpoints,
                                      const AccuracyFn& accuracy);

// "step,accuracy" CSV.
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace genius
