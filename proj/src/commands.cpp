#include "genius/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

namespace genius::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void apply_overrides(RunConfig& cfg, const Overrides& o) {
    try {
        if (o.seed) cfg.train.seed = *o.seed;
        if (o.strategy) cfg.train.sampling.strategy = parse_strategy(*o.strategy);
        if (o.loss) cfg.train.loss.kind = parse_loss_kind(*o.loss);
    } catch (const std::invalid_argument& e) {
        throw InputError(e.what());
    }
    if (o.threads) cfg.train.threads = *o.threads;
    if (o.out) cfg.out = *o.out;
    cfg.validate();
}

Experiment prepare(const RunConfig& cfg) {
    const Vocab vocab = cfg.task.vocab();
    Experiment e;
    if (cfg.init_policy.empty()) {
        tasks::BaseModelOptions base = cfg.base;
        base.seed = cfg.base_seed();
        e.policy = tasks::base_policy(cfg.task, base);
    } else {
        e.policy = load_policy(cfg.init_policy);
        if (!(e.policy.vocab() == vocab)) throw InputError("init_policy vocabulary does not match the task");
    }
    Rng qr(cfg.train.seed);
    e.train_queries = tasks::gen_queries(cfg.task, static_cast<std::size_t>(cfg.train_queries), tasks::Split::train, qr);
    e.eval_queries = tasks::gen_queries(cfg.task, static_cast<std::size_t>(cfg.eval_queries), tasks::Split::eval, qr);
    if (!cfg.queries_file.empty()) {
        e.train_queries = tasks::read_queries(cfg.queries_file, cfg.task);
        if (e.train_queries.empty()) throw InputError("queries_file holds no queries");
    }
    return e;
}

namespace {

fs::path ensure_run_dir(const RunConfig& cfg) {
    const fs::path dir = cfg.run_dir();
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

void write_pairs(std::ostream& f, const std::vector<PreferenceQuintuple>& data) {
    for (const auto& q : data) f << quintuple_to_line(q) << '\n';
}

std::string checkpoint_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "step_%06d.policy", step);
    return buf;
}

AccuracyFn accuracy_on(const RunConfig& cfg, const std::vector<TokenSeq>& queries) {
    return [&cfg, &queries](const TabularPolicy& p) {
        return evaluate(p, cfg.task, queries, cfg.max_response_tokens);
    };
}

struct TrainOutcome {
    double base_accuracy = 0.0;
    double final_accuracy = 0.0;
    std::size_t quintuples = 0;
};

// Full training run with every artifact written to `dir`.
TrainOutcome train_into(const RunConfig& cfg, const Experiment& e, const fs::path& dir) {
    const AccuracyFn acc = accuracy_on(cfg, e.eval_queries);
    std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    std::ofstream pairs(dir / "pairs.jsonl", std::ios::binary | std::ios::trunc);
    if (!metrics || !pairs) throw std::runtime_error("cannot open output files in " + dir.string());
    if (cfg.train.checkpoint_every > 0) fs::create_directories(dir / "checkpoints");

    TrainHooks hooks;
    hooks.accuracy = acc;
    hooks.on_metrics = [&](const MetricsRecord& r) { metrics << metrics_to_line(r) << '\n'; };
    hooks.on_dataset = [&](int, const std::vector<PreferenceQuintuple>& d) { write_pairs(pairs, d); };
    hooks.on_checkpoint = [&](int step, const TabularPolicy& p) {
        save_policy((dir / "checkpoints" / checkpoint_name(step)).string(), p);
    };

    TrainOutcome o;
    o.base_accuracy = acc(e.policy);
    const TrainResult r = train(e.policy, e.train_queries, cfg.train, hooks);
    o.final_accuracy = acc(r.policy);
    for (const auto& s : r.rounds) o.quintuples += s.quintuples;
    save_policy((dir / "policy.final").string(), r.policy);
    return o;
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const fs::path dir = ensure_run_dir(cfg);
    const Experiment e = prepare(cfg);
    write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
    tasks::write_queries((dir / "queries.txt").string(), cfg.task, e.train_queries);

    const auto started = std::chrono::steady_clock::now();
    const TrainOutcome o = train_into(cfg, e, dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    ordered_json summary;
    summary["strategy"] = to_string(cfg.train.sampling.strategy);
    summary["loss"] = to_string(cfg.train.loss.kind);
    summary["quintuples"] = o.quintuples;
    summary["base_accuracy"] = o.base_accuracy;
    summary["final_accuracy"] = o.final_accuracy;
    write_text(dir / "summary.json", summary.dump(2) + "\n");

    out << "train " << cfg.name << ": " << o.quintuples << " pairs, accuracy " << format_double(o.base_accuracy)
        << " -> " << format_double(o.final_accuracy) << " (" << secs << " s)\n";
    return kOk;
}

int cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    const fs::path dir = ensure_run_dir(cfg);
    const Experiment e = prepare(cfg);
    std::string csv = "strategy,base_accuracy,final_accuracy\n";
    for (Strategy s : {Strategy::full, Strategy::no_foresight, Strategy::greedy}) {
        RunConfig c = cfg;
        c.train.sampling.strategy = s;
        const fs::path sub = dir / to_string(s);
        fs::create_directories(sub);
        const TrainOutcome o = train_into(c, e, sub);
        csv += to_string(s) + "," + format_double(o.base_accuracy) + "," + format_double(o.final_accuracy) + "\n";
    }
    write_text(dir / "ablation.csv", csv);
    out << csv;
    return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, const verify::GradientImpl& gradient) {
    const auto rows = verify::run_gradcheck(cfg.gradcheck, cfg.train.seed, gradient);
    out << verify::format_report(rows);
    return verify::all_pass(rows) ? kOk : kVerifyFailed;
}

int cmd_oracle_verify(const RunConfig& cfg, std::ostream& out) {
    const auto rows = verify::run_oracle_suites(cfg.oracle, cfg.train.seed);
    out << verify::format_report(rows);
    return verify::all_pass(rows) ? kOk : kVerifyFailed;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
    const fs::path dir = ensure_run_dir(cfg);
    const Experiment e = prepare(cfg);
    const double acc = evaluate(e.policy, cfg.task, e.eval_queries, cfg.max_response_tokens);
    ordered_json j;
    j["queries"] = e.eval_queries.size();
    j["accuracy"] = acc;
    write_text(dir / "eval.json", j.dump(2) + "\n");
    out << "accuracy " << format_double(acc) << "\n";
    return kOk;
}

int cmd_curve(const RunConfig& cfg, std::ostream& out) {
    if (cfg.checkpoints.empty()) throw InputError("curve.checkpoints is empty");
    const fs::path dir = ensure_run_dir(cfg);
    const Experiment e = prepare(cfg);
    const auto curve = scaling_curve(e.policy, e.train_queries, cfg.train, cfg.checkpoints,
                                     accuracy_on(cfg, e.eval_queries));
    const std::string csv = curve_to_csv(curve);
    write_text(dir / "curve.csv", csv);
    out << csv;
    return kOk;
}

int cmd_dump_pairs(const RunConfig& cfg, std::ostream& out) {
    const fs::path dir = ensure_run_dir(cfg);
    const Experiment e = prepare(cfg);
    const auto data = collect_dataset(e.policy, e.train_queries, cfg.train.sampling, cfg.train.seed, 0,
                                      cfg.train.threads);
    std::ofstream f(dir / "pairs.jsonl", std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write pairs.jsonl");
    write_pairs(f, data);
    const DatasetStats s = dataset_stats(e.train_queries.size(), data);
    out << s.quintuples << " pairs from " << s.queries << " queries, calibration region "
        << format_double(s.calibration_fraction) << "\n";
    return kOk;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"train", "ablate", "gradcheck", "oracle-verify",
                                                "eval",  "curve",  "dump-pairs"};
    return names;
}

int run_command(const std::string& command, const std::string& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err, const EnvLookup& env) {
    using Fn = int (*)(const RunConfig&, std::ostream&);
    static const std::map<std::string, Fn> table{
        {"train", cmd_train},
        {"ablate", cmd_ablate},
        {"gradcheck", [](const RunConfig& c, std::ostream& o) { return cmd_gradcheck(c, o); }},
        {"oracle-verify", cmd_oracle_verify},
        {"eval", cmd_eval},
        {"curve", cmd_curve},
        {"dump-pairs", cmd_dump_pairs},
    };
    const auto it = table.find(command);
    if (it == table.end()) {
        err << "unknown command: " << command << "\n";
        return kConfigError;
    }
    RunConfig cfg;
    try {
        cfg = load_run_config(config_path, env);
        apply_overrides(cfg, overrides);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        return it->second(cfg, out);
    } catch (const InputError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const BudgetError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
}

}  // namespace genius::cli
