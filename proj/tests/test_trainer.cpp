#include "genius/trainer.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace genius;

namespace {

TabularPolicy no_eos_policy() {
    TabularPolicy p(Vocab{4, 2, 3}, 0);
    p.logits().set_row({}, {0.3, -0.2, 0.1, -60.0});
    return p;
}

std::vector<TokenSeq> small_queries(std::size_t n) {
    std::vector<TokenSeq> qs;
    for (std::size_t i = 0; i < n; ++i) qs.push_back({static_cast<Token>(i % 2), static_cast<Token>(i % 3 == 0)});
    return qs;
}

TrainConfig fast_config() {
    TrainConfig cfg;
    cfg.steps_per_round = 20;
    cfg.batch_size = 8;
    cfg.learning_rate = 0.5;
    return cfg;
}

}  // namespace

TEST_CASE("zero learning rate leaves the policy alone") {
    const TabularPolicy p = testing::frozen_policy();
    TrainConfig cfg = fast_config();
    cfg.learning_rate = 0.0;
    cfg.batch_size = 1000;
    const RoundResult r = run_round(p, small_queries(6), cfg, 0);
    CHECK(r.policy == p);
    for (const auto& m : r.metrics) CHECK(m.loss == r.metrics.front().loss);
}

TEST_CASE("single pair descent is monotone") {
    const TabularPolicy p = testing::frozen_policy();
    TrainConfig cfg = fast_config();
    cfg.sampling.timestamps = 1;
    cfg.learning_rate = 0.05;
    cfg.steps_per_round = 100;
    const RoundResult r = run_round(p, {{0, 1}}, cfg, 0);
    REQUIRE(r.dataset.size() == 1);
    CHECK(r.metrics.front().mean_z == 0.0);
    for (std::size_t i = 1; i < r.metrics.size(); ++i) CHECK(r.metrics[i].loss < r.metrics[i - 1].loss);
}

TEST_CASE("pair accounting") {
    TrainConfig cfg = fast_config();
    const RoundResult r = run_round(no_eos_policy(), small_queries(100), cfg, 0);
    CHECK(r.stats.quintuples == 400);
    CHECK(r.stats.queries == 100);
    CHECK(r.metrics.size() == 20);
    CHECK(r.metrics.back().pairs == 160);
    CHECK(r.metrics.back().step == 20);
}

TEST_CASE("degenerate policy raises a round error") {
    TabularPolicy p(Vocab{4, 2, 3}, 0);
    p.logits().set_row({}, {-50.0, -50.0, -50.0, 50.0});
    CHECK_THROWS_AS(run_round(p, small_queries(5), fast_config(), 0), RoundError);
    CHECK_THROWS_AS(run_round(p, {}, fast_config(), 0), InputError);
}

TEST_CASE("metrics do not depend on the thread count") {
    const TabularPolicy p = testing::frozen_policy();
    TrainConfig cfg = fast_config();
    const RoundResult one = run_round(p, small_queries(40), cfg, 0);
    cfg.threads = 4;
    const RoundResult four = run_round(p, small_queries(40), cfg, 0);
    REQUIRE(one.metrics.size() == four.metrics.size());
    for (std::size_t i = 0; i < one.metrics.size(); ++i) {
        CHECK(metrics_to_line(one.metrics[i]) == metrics_to_line(four.metrics[i]));
    }
    CHECK(one.policy == four.policy);
    CHECK(one.dataset == four.dataset);
}

TEST_CASE("dpo and aco runs coincide when no pair is calibrated") {
    // With one beam every pair shares its origin, so the positive (the best
    // score) never has the lower advantage and w is always one.
    const TabularPolicy p = testing::frozen_policy();
    TrainConfig cfg = fast_config();
    cfg.sampling.beams = 1;
    const RoundResult aco = run_round(p, small_queries(20), cfg, 0);
    CHECK(aco.stats.calibration_fraction == 0.0);
    cfg.loss.kind = LossKind::dpo;
    const RoundResult dpo = run_round(p, small_queries(20), cfg, 0);
    for (std::size_t i = 0; i < aco.metrics.size(); ++i) {
        CHECK(metrics_to_line(aco.metrics[i]) == metrics_to_line(dpo.metrics[i]));
    }
}

TEST_CASE("reference stays frozen across a round") {
    const TabularPolicy p = testing::frozen_policy();
    TrainConfig cfg = fast_config();
    cfg.rounds = 2;
    std::vector<std::vector<PreferenceQuintuple>> data;
    TrainHooks hooks;
    hooks.on_dataset = [&](int, const std::vector<PreferenceQuintuple>& d) { data.push_back(d); };
    const TrainResult r = train(p, small_queries(10), cfg, hooks);
    REQUIRE(data.size() == 2);
    CHECK(r.metrics.size() == 40);
    CHECK(r.metrics[20].step == 21);
    CHECK(r.metrics[20].round == 1);
    // A fresh round starts at z = 0: the new reference equals the policy.
    CHECK(r.metrics[20].mean_z == 0.0);
    CHECK(r.metrics[19].mean_z != 0.0);
}

TEST_CASE("metrics line format") {
    MetricsRecord m;
    m.round = 1;
    m.step = 7;
    m.loss = 0.5;
    m.mean_w = 1.0;
    m.mean_z = -0.25;
    m.pairs = 64;
    m.wall_clock = 12.5;
    CHECK(metrics_to_line(m) ==
          "{\"round\":1,\"step\":7,\"loss\":0.5,\"mean_w\":1.0,\"mean_z\":-0.25,\"accuracy\":null,\"pairs\":64}");
    m.accuracy = 0.25;
    CHECK(metrics_to_line(m).find("\"accuracy\":0.25") != std::string::npos);
}

TEST_CASE("scaling curve") {
    tasks::TaskSpec spec;
    const TabularPolicy base = tasks::base_policy(spec, {});
    Rng rng(0);
    const auto train_q = tasks::gen_queries(spec, 30, tasks::Split::train, rng);
    const auto eval_q = tasks::gen_queries(spec, 30, tasks::Split::eval, rng);
    const AccuracyFn acc = [&](const TabularPolicy& p) { return evaluate(p, spec, eval_q); };
    TrainConfig cfg = fast_config();
    const auto c0 = scaling_curve(base, train_q, cfg, {0}, acc);
    REQUIRE(c0.size() == 1);
    CHECK(c0[0].accuracy == acc(base));
    const auto dup = scaling_curve(base, train_q, cfg, {5, 5}, acc);
    CHECK(dup[0].accuracy == dup[1].accuracy);
    CHECK_THROWS_AS(scaling_curve(base, train_q, cfg, {5, 2}, acc), InputError);
    CHECK(curve_to_csv({{0, 0.5}, {10, 0.25}}) == "step,accuracy\n0,0.5\n10,0.25\n");
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = {};
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = {};
    cfg.threads = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}
