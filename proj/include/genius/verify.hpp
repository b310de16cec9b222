#pragma once

#include "genius/config.hpp"
#include "genius/losses.hpp"
#include "genius/policy.hpp"

#include <functional>
#include <string>
#include <vector>

// Self-checks behind the gradcheck and oracle-verify subcommands.
namespace genius::verify {

struct CheckRow {
    std::string name;
    int instances = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string first_failure;   // serialized instance, empty when passing
};

bool all_pass(const std::vector<CheckRow>& rows);
// Fixed-width table, one line per check, worst offender last.
std::string format_report(const std::vector<CheckRow>& rows);

// Analytic gradient of one quintuple's loss with respect to the policy
// logits. Swappable so tests can plant a broken implementation.
using GradientImpl = std::function<LogitTable(const TabularPolicy& policy, const TabularPolicy& reference,
                                              const PreferenceQuintuple& q, const LossConfig& cfg)>;

LogitTable default_gradient(const TabularPolicy& policy, const TabularPolicy& reference, const PreferenceQuintuple& q,
                            const LossConfig& cfg);

struct GradInstance {
    TabularPolicy policy;
    TabularPolicy reference;
    PreferenceQuintuple quintuple;
    LossConfig loss;
};

// Random policy/reference tables with every context row filled, a random
// query, two distinct responses and advantages on both sides of the
// calibration boundary.
GradInstance random_grad_instance(const GradcheckOptions& opts, LossKind kind, Rng& rng);

// One row per loss kind: analytic vs central differences over every row the
// instance touches.
std::vector<CheckRow> run_gradcheck(const GradcheckOptions& opts, std::uint64_t seed,
                                    const GradientImpl& gradient = default_gradient);

// Greedy-mode foresight scores and score distributions against exhaustive
// enumeration, plus normalization, tau-additive-shift invariance and
// distinct-pair checks.
std::vector<CheckRow> run_oracle_suites(const OracleOptions& opts, std::uint64_t seed);

}  // namespace genius::verify
