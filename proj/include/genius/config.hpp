#pragma once

#include "genius/tasks.hpp"
#include "genius/trainer.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace genius {

struct GradcheckOptions {
    int instances = 100;     // per loss kind
    double h = 1e-5;
    double tolerance = 1e-5;
    int vocab = 4;
    int order = 2;
};

struct OracleOptions {
    int instances = 200;
    int vocab = 4;
    int max_tokens = 6;      // foresight continuation budget, also the enumeration depth
    double tolerance = 1e-9;
};

// Everything a subcommand needs. Layered as defaults < config file <
// GENIUS_* environment < command-line flags.
struct RunConfig {
    std::string name = "run";
    std::string out = "runs";
    tasks::TaskSpec task;
    tasks::BaseModelOptions base;   // base.seed is ignored; see base_seed()
    std::uint64_t base_seed_offset = 1000;
    TrainConfig train;
    int train_queries = 500;
    int eval_queries = 300;
    std::string queries_file;       // overrides generated training queries when set
    std::string init_policy;        // checkpoint to start from instead of the base model
    int max_response_tokens = 12;
    std::vector<int> checkpoints{0, 50, 100, 150, 200};
    GradcheckOptions gradcheck;
    OracleOptions oracle;

    RunConfig();

    void validate() const;
    std::filesystem::path run_dir() const { return std::filesystem::path(out) / name; }
    std::uint64_t base_seed() const { return train.seed + base_seed_offset; }
};

nlohmann::ordered_json to_json(const RunConfig& cfg);
// Keys absent from `j` keep their defaults; unknown keys throw InputError.
RunConfig run_config_from_json(const nlohmann::ordered_json& j);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Every leaf key path a.b.c can be overridden by GENIUS_A_B_C. Values are
// parsed as JSON when possible, else taken as strings.
void apply_env_overrides(nlohmann::ordered_json& j, const EnvLookup& env);

// Defaults, then the file (when `path` is nonempty), then the environment.
RunConfig load_run_config(const std::string& path, const EnvLookup& env = process_env);

}  // namespace genius
