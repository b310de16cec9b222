#include "genius/commands.hpp"

#include <iostream>
#include <map>

#include <CLI11.hpp>

int main(int argc, char** argv) {
    using namespace genius;
    CLI::App app{"Foresight re-sampling and advantage-calibrated self-training on toy tasks"};
    app.require_subcommand(1);

    std::string config;
    cli::Overrides ov;
    std::uint64_t seed = 0;
    std::string strategy, loss, out;
    int threads = 1;

    const std::map<std::string, std::string> help{
        {"train", "self-train the base policy and write metrics, pairs and checkpoints"},
        {"ablate", "train once per sampling strategy and write ablation.csv"},
        {"gradcheck", "analytic loss gradients vs central differences"},
        {"oracle-verify", "foresight scores and distributions vs exhaustive enumeration"},
        {"eval", "greedy accuracy of the starting policy on held-out queries"},
        {"curve", "accuracy after each budget in curve.checkpoints"},
        {"dump-pairs", "collect one round of preference pairs without training"},
    };
    for (const auto& name : cli::command_names()) {
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config, "JSON run config")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "seeds sampling, batching and query draws");
        sub->add_option("--strategy", strategy)->check(CLI::IsMember({"full", "no_foresight", "greedy"}));
        sub->add_option("--loss", loss)->check(CLI::IsMember({"aco", "dpo", "cdpo", "ropo", "sft"}));
        sub->add_option("--threads", threads)->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output root; runs land in <out>/<name>");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kOk : cli::kConfigError;
    }

    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) ov.seed = seed;
    if (sub->count("--strategy")) ov.strategy = strategy;
    if (sub->count("--loss")) ov.loss = loss;
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--out")) ov.out = out;
    return cli::run_command(sub->get_name(), config, ov, std::cout, std::cerr);
}
