#pragma once

#include "genius/config.hpp"
#include "genius/verify.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace genius::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kRuntimeError = 3 };

// Command-line flags; each one set wins over file and environment.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<std::string> loss;
    std::optional<int> threads;
    std::optional<std::string> out;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

// Starting policy, training queries and held-out queries for a run.
struct Experiment {
    TabularPolicy policy;
    std::vector<TokenSeq> train_queries;
    std::vector<TokenSeq> eval_queries;
};

Experiment prepare(const RunConfig& cfg);

// Each command writes its files under cfg.run_dir() and a short report to
// `out`. They throw on errors; run_command maps exceptions to exit codes.
int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out,
                  const verify::GradientImpl& gradient = verify::default_gradient);
int cmd_oracle_verify(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_curve(const RunConfig& cfg, std::ostream& out);
int cmd_dump_pairs(const RunConfig& cfg, std::ostream& out);

const std::vector<std::string>& command_names();

// Loads the config (file, then GENIUS_* environment, then flags), runs the
// subcommand and returns its exit code.
int run_command(const std::string& command, const std::string& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err, const EnvLookup& env = process_env);

}  // namespace genius::cli
