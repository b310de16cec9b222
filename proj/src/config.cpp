#include "genius/config.hpp"

#include "genius/oracle.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace genius {

using nlohmann::ordered_json;

RunConfig::RunConfig() {
    // Tabular logits need far larger steps than the trainer's library default.
    train.learning_rate = 2.0;
}

void RunConfig::validate() const {
    if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..") {
        throw InputError("name must be a plain directory name");
    }
    task.validate();
    train.validate();
    if (base.order < 1 || base.corpus_size < 1 || base.detour_steps < 1) throw InputError("base_model sizes must be positive");
    if (!(base.detour_rate >= 0.0 && base.detour_rate <= 1.0)) throw InputError("base_model.detour_rate must be in [0, 1]");
    if (!(base.smoothing > 0.0)) throw InputError("base_model.smoothing must be positive");
    if (train_queries < 1 || eval_queries < 1) throw InputError("query counts must be positive");
    if (max_response_tokens < 1) throw InputError("max_response_tokens must be positive");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0 || (i > 0 && checkpoints[i] < checkpoints[i - 1])) {
            throw InputError("curve.checkpoints must be nonnegative and ascending");
        }
    }
    if (gradcheck.instances < 1 || !(gradcheck.h > 0.0) || !(gradcheck.tolerance > 0.0)) {
        throw InputError("gradcheck instances, h and tolerance must be positive");
    }
    if (gradcheck.vocab < 3 || gradcheck.order < 1) throw InputError("gradcheck.vocab must be >= 3, order >= 1");
    if (oracle.instances < 1 || !(oracle.tolerance > 0.0)) throw InputError("oracle instances and tolerance must be positive");
    if (oracle.vocab < 3 || oracle.vocab > oracle::kMaxVocab) {
        throw InputError("oracle.vocab must be in [3, " + std::to_string(oracle::kMaxVocab) + "]");
    }
    if (oracle.max_tokens < 1 || oracle.max_tokens > oracle::kMaxTokens) {
        throw InputError("oracle.max_tokens must be in [1, " + std::to_string(oracle::kMaxTokens) + "]");
    }
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["name"] = c.name;
    j["out"] = c.out;
    j["seed"] = c.train.seed;
    j["threads"] = c.train.threads;
    j["task"] = {{"name", tasks::to_string(c.task.name)},
                 {"max_operand", c.task.max_operand},
                 {"num_ops", c.task.num_ops},
                 {"string_length", c.task.string_length},
                 {"grid_size", c.task.grid_size},
                 {"split_seed", c.task.split_seed}};
    j["base_model"] = {{"order", c.base.order},
                       {"corpus_size", c.base.corpus_size},
                       {"detour_rate", c.base.detour_rate},
                       {"detour_steps", c.base.detour_steps},
                       {"smoothing", c.base.smoothing},
                       {"seed_offset", c.base_seed_offset}};
    const SamplingConfig& s = c.train.sampling;
    j["sampling"] = {{"strategy", to_string(s.strategy)},
                     {"beams", s.beams},
                     {"rollouts", s.rollouts},
                     {"timestamps", s.timestamps},
                     {"tau", s.tau},
                     {"gen_temperature", s.gen_temperature},
                     {"max_step_tokens", s.max_step_tokens},
                     {"max_foresight_tokens", s.max_foresight_tokens},
                     {"decoding", to_string(s.decoding)},
                     {"window", to_string(s.window)}};
    const LossConfig& l = c.train.loss;
    j["loss"] = {{"kind", to_string(l.kind)}, {"beta", l.beta},   {"alpha", l.alpha},
                 {"epsilon", l.epsilon},      {"gamma", l.gamma}, {"eta", l.eta}};
    j["train"] = {{"rounds", c.train.rounds},
                  {"steps_per_round", c.train.steps_per_round},
                  {"batch_size", c.train.batch_size},
                  {"learning_rate", c.train.learning_rate},
                  {"checkpoint_every", c.train.checkpoint_every}};
    j["data"] = {{"train_queries", c.train_queries},
                 {"eval_queries", c.eval_queries},
                 {"queries_file", c.queries_file},
                 {"init_policy", c.init_policy},
                 {"max_response_tokens", c.max_response_tokens}};
    j["curve"] = {{"checkpoints", c.checkpoints}};
    j["gradcheck"] = {{"instances", c.gradcheck.instances},
                      {"h", c.gradcheck.h},
                      {"tolerance", c.gradcheck.tolerance},
                      {"vocab", c.gradcheck.vocab},
                      {"order", c.gradcheck.order}};
    j["oracle"] = {{"instances", c.oracle.instances},
                   {"vocab", c.oracle.vocab},
                   {"max_tokens", c.oracle.max_tokens},
                   {"tolerance", c.oracle.tolerance}};
    return j;
}

namespace {

bool same_kind(const ordered_json& a, const ordered_json& b) {
    if (a.is_number() && b.is_number()) return true;
    return a.type() == b.type();
}

void merge_strict(ordered_json& dst, const ordered_json& src, const std::string& where) {
    if (!src.is_object()) throw InputError((where.empty() ? std::string("config") : where) + " must be an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string path = where.empty() ? it.key() : where + "." + it.key();
        if (!dst.contains(it.key())) throw InputError("unknown config key: " + path);
        ordered_json& slot = dst[it.key()];
        if (slot.is_object()) {
            merge_strict(slot, it.value(), path);
        } else if (!same_kind(slot, it.value())) {
            throw InputError("config key " + path + " has the wrong type");
        } else {
            slot = it.value();
        }
    }
}

template <class T>
T get(const ordered_json& j, const char* section, const char* key) {
    const ordered_json& v = section ? j.at(section).at(key) : j.at(key);
    try {
        if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() && !v.is_number_unsigned()) throw InputError("");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_integer() && v.get<std::int64_t>() < 0) throw InputError("");
            }
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw InputError(std::string("config key ") + (section ? std::string(section) + "." : "") + key +
                         " has an invalid value");
    }
}

template <class F>
auto parse_enum(const ordered_json& j, const char* section, const char* key, F parse) {
    try {
        return parse(get<std::string>(j, section, key));
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string(section) + "." + key + ": " + e.what());
    }
}

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

void env_walk(ordered_json& node, const std::string& prefix, const EnvLookup& env) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string name = prefix + "_" + upper(it.key());
        if (it.value().is_object()) {
            env_walk(it.value(), name, env);
            continue;
        }
        const auto raw = env(name);
        if (!raw) continue;
        ordered_json parsed = ordered_json::parse(*raw, nullptr, false);
        if (!parsed.is_discarded() && same_kind(it.value(), parsed)) {
            it.value() = parsed;
        } else if (it.value().is_string()) {
            it.value() = *raw;
        } else {
            throw InputError("environment variable " + name + " has the wrong type");
        }
    }
}

}  // namespace

RunConfig run_config_from_json(const ordered_json& src) {
    ordered_json j = to_json(RunConfig{});
    merge_strict(j, src, "");

    RunConfig c;
    c.name = get<std::string>(j, nullptr, "name");
    c.out = get<std::string>(j, nullptr, "out");
    c.train.seed = get<std::uint64_t>(j, nullptr, "seed");
    c.train.threads = get<int>(j, nullptr, "threads");

    c.task.name = parse_enum(j, "task", "name", tasks::parse_task);
    c.task.max_operand = get<int>(j, "task", "max_operand");
    c.task.num_ops = get<int>(j, "task", "num_ops");
    c.task.string_length = get<int>(j, "task", "string_length");
    c.task.grid_size = get<int>(j, "task", "grid_size");
    c.task.split_seed = get<std::uint64_t>(j, "task", "split_seed");

    c.base.order = get<int>(j, "base_model", "order");
    c.base.corpus_size = get<int>(j, "base_model", "corpus_size");
    c.base.detour_rate = get<double>(j, "base_model", "detour_rate");
    c.base.detour_steps = get<int>(j, "base_model", "detour_steps");
    c.base.smoothing = get<double>(j, "base_model", "smoothing");
    c.base_seed_offset = get<std::uint64_t>(j, "base_model", "seed_offset");

    SamplingConfig& s = c.train.sampling;
    s.strategy = parse_enum(j, "sampling", "strategy", parse_strategy);
    s.beams = get<int>(j, "sampling", "beams");
    s.rollouts = get<int>(j, "sampling", "rollouts");
    s.timestamps = get<int>(j, "sampling", "timestamps");
    s.tau = get<double>(j, "sampling", "tau");
    s.gen_temperature = get<double>(j, "sampling", "gen_temperature");
    s.max_step_tokens = get<int>(j, "sampling", "max_step_tokens");
    s.max_foresight_tokens = get<int>(j, "sampling", "max_foresight_tokens");
    s.decoding = parse_enum(j, "sampling", "decoding", parse_decoding);
    s.window = parse_enum(j, "sampling", "window", parse_score_window);

    LossConfig& l = c.train.loss;
    l.kind = parse_enum(j, "loss", "kind", parse_loss_kind);
    l.beta = get<double>(j, "loss", "beta");
    l.alpha = get<double>(j, "loss", "alpha");
    l.epsilon = get<double>(j, "loss", "epsilon");
    l.gamma = get<double>(j, "loss", "gamma");
    l.eta = get<double>(j, "loss", "eta");

    c.train.rounds = get<int>(j, "train", "rounds");
    c.train.steps_per_round = get<int>(j, "train", "steps_per_round");
    c.train.batch_size = get<int>(j, "train", "batch_size");
    c.train.learning_rate = get<double>(j, "train", "learning_rate");
    c.train.checkpoint_every = get<int>(j, "train", "checkpoint_every");

    c.train_queries = get<int>(j, "data", "train_queries");
    c.eval_queries = get<int>(j, "data", "eval_queries");
    c.queries_file = get<std::string>(j, "data", "queries_file");
    c.init_policy = get<std::string>(j, "data", "init_policy");
    c.max_response_tokens = get<int>(j, "data", "max_response_tokens");

    try {
        c.checkpoints = j.at("curve").at("checkpoints").get<std::vector<int>>();
    } catch (const nlohmann::json::exception&) {
        throw InputError("curve.checkpoints must be a list of integers");
    }

    c.gradcheck.instances = get<int>(j, "gradcheck", "instances");
    c.gradcheck.h = get<double>(j, "gradcheck", "h");
    c.gradcheck.tolerance = get<double>(j, "gradcheck", "tolerance");
    c.gradcheck.vocab = get<int>(j, "gradcheck", "vocab");
    c.gradcheck.order = get<int>(j, "gradcheck", "order");

    c.oracle.instances = get<int>(j, "oracle", "instances");
    c.oracle.vocab = get<int>(j, "oracle", "vocab");
    c.oracle.max_tokens = get<int>(j, "oracle", "max_tokens");
    c.oracle.tolerance = get<double>(j, "oracle", "tolerance");

    c.validate();
    return c;
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
}

void apply_env_overrides(ordered_json& j, const EnvLookup& env) { env_walk(j, "GENIUS", env); }

RunConfig load_run_config(const std::string& path, const EnvLookup& env) {
    ordered_json j = to_json(RunConfig{});
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot read config file " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        const ordered_json file = ordered_json::parse(ss.str(), nullptr, false);
        if (file.is_discarded()) throw InputError("config file " + path + " is not valid JSON");
        merge_strict(j, file, "");
    }
    apply_env_overrides(j, env);
    return run_config_from_json(j);
}

}  // namespace genius
