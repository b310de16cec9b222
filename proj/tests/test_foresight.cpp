#include "genius/foresight.hpp"
#include "genius/oracle.hpp"
#include "helpers.hpp"

#include <cmath>
#include <map>
#include <set>

#include <doctest.h>

using namespace genius;
using doctest::Approx;

namespace {

// Order-0 policy that never emits eos, so every timestamp yields candidates.
TabularPolicy no_eos_policy() {
    TabularPolicy p(Vocab{4, 2, 3}, 0);
    p.logits().set_row({}, {0.3, -0.2, 0.1, -60.0});
    return p;
}

ForesightCandidate cand(std::size_t beam, TokenSeq response, double f) {
    ForesightCandidate c;
    c.origin_beam = beam;
    c.step = response;
    c.full_response = std::move(response);
    c.fscore = f;
    return c;
}

}  // namespace

TEST_CASE("uniform policy scores ln(1/4) everywhere") {
    const TabularPolicy p = testing::uniform_policy(4);
    SamplingConfig cfg;
    const auto cands = rollout_candidates(p, initial_beams({0, 1}), cfg, 9);
    REQUIRE(cands.size() == 4);
    for (const auto& c : cands) {
        CHECK(c.fscore == Approx(std::log(0.25)).epsilon(1e-14));
        CHECK(c.fscore == Approx(-1.3862944).epsilon(1e-7));
    }
}

TEST_CASE("two beams with four rollouts give eight candidates") {
    const TabularPolicy p = no_eos_policy();
    SamplingConfig cfg;
    std::vector<BeamState> beams{BeamState{{0, 1, 2}, 2, -0.5, false}, BeamState{{0, 1, 0, 2}, 2, -0.7, false}};
    const auto cands = rollout_candidates(p, beams, cfg, 1);
    CHECK(cands.size() == 8);
    for (std::size_t i = 0; i < cands.size(); ++i) CHECK(cands[i].origin_beam == i / 4);

    // A terminal beam keeps its slot but contributes nothing.
    beams[1].terminal = true;
    CHECK(rollout_candidates(p, beams, cfg, 1).size() == 4);
}

TEST_CASE("greedy-mode rollouts match the independent reference") {
    const TabularPolicy p = testing::frozen_policy();
    SamplingConfig cfg;
    cfg.decoding = Decoding::greedy;
    cfg.rollouts = 4;
    cfg.max_step_tokens = 1;
    for (const auto& r : testing::frozen().at("greedy_rollouts")) {
        cfg.max_foresight_tokens = r.at("max_tokens").get<int>();
        const auto want = r.at("fscore_by_first_token").get<std::vector<double>>();
        const auto cands = rollout_candidates(p, initial_beams(r.at("prefix").get<TokenSeq>()), cfg, 0);
        REQUIRE(cands.size() == 4);
        std::set<Token> seen;
        for (const auto& c : cands) {
            REQUIRE(c.step.size() == 1);
            seen.insert(c.step[0]);
            CHECK(std::abs(c.fscore - want[static_cast<std::size_t>(c.step[0])]) < 1e-12);
        }
        CHECK(seen.size() == 4);
        // Ranked order: the first candidate starts with the most likely token.
        CHECK(cands[0].step[0] == p.greedy_token(r.at("prefix").get<TokenSeq>()));
    }
}

TEST_CASE("exact foresight agrees with the independent reference") {
    const TabularPolicy p = testing::frozen_policy();
    for (const auto& c : testing::frozen().at("foresight_cases")) {
        oracle::EnumerationBudget b;
        b.max_tokens = c.at("max_tokens").get<int>();
        const double got = oracle::exact_foresight(p, c.at("prefix").get<TokenSeq>(), c.at("step").get<TokenSeq>(), b);
        CHECK(std::abs(got - c.at("fscore").get<double>()) < 1e-12);
    }
}

TEST_CASE("greedy-mode rollouts equal exhaustive enumeration on random tiny policies") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        TabularPolicy p = testing::uniform_policy(4);
        for (Token a = 0; a < 4; ++a) {
            std::vector<double> r1(4);
            for (auto& x : r1) x = 6.0 * rng.uniform() - 3.0;
            p.logits().set_row({a}, r1);
            for (Token b = 0; b < 4; ++b) {
                std::vector<double> row(4);
                for (auto& x : row) x = 6.0 * rng.uniform() - 3.0;
                p.logits().set_row({a, b}, row);
            }
        }
        SamplingConfig cfg;
        cfg.decoding = Decoding::greedy;
        cfg.rollouts = 4;
        cfg.max_step_tokens = 1 + static_cast<int>(rng.below(3));
        cfg.max_foresight_tokens = 1 + static_cast<int>(rng.below(6));
        const TokenSeq query{static_cast<Token>(rng.below(3))};
        oracle::EnumerationBudget b;
        b.max_tokens = cfg.max_foresight_tokens;
        for (const auto& c : rollout_candidates(p, initial_beams(query), cfg, 0)) {
            CHECK(std::abs(c.fscore - oracle::exact_foresight(p, query, c.step, b)) < 1e-12);
        }
    }
}

TEST_CASE("score distribution") {
    for (double c : {-700.0, 0.0, 3.5}) {
        const auto d = build_distribution({c, c}, 1.0);
        CHECK(d[0] == Approx(0.5));
        CHECK(d[1] == Approx(0.5));
    }
    const auto& f = testing::frozen();
    const auto d1 = build_distribution({std::log(2.0), 0.0}, 1.0);
    const auto w1 = f.at("softmax_ln2_0").get<std::vector<double>>();
    const auto d2 = build_distribution({1, 2, 3}, 1.0);
    const auto w2 = f.at("softmax_123").get<std::vector<double>>();
    for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(d1[i] - w1[i]) < 1e-15);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(d2[i] - w2[i]) < 1e-15);
    CHECK(d2[0] == Approx(0.0900306).epsilon(1e-6));
    CHECK(d2[2] == Approx(0.6652410).epsilon(1e-6));

    std::vector<double> scores;
    for (const auto& c : f.at("foresight_cases")) {
        if (scores.size() < 4) scores.push_back(c.at("fscore").get<double>());
    }
    const auto d3 = build_distribution(scores, 0.5);
    const auto w3 = f.at("foresight_distribution_tau05").get<std::vector<double>>();
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(d3[i] - w3[i]) < 1e-14);

    CHECK_THROWS_AS(build_distribution({}, 1.0), InputError);
    CHECK_THROWS_AS(build_distribution({0.0, std::nan("")}, 1.0), InputError);
}

TEST_CASE("categorical draws") {
    Rng rng(2024);
    const std::vector<double> w{0.5, 0.3, 0.2};
    std::vector<int> counts(3);
    for (int i = 0; i < 100000; ++i) ++counts[rng.categorical(w)];
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(counts[i] / 1e5 - w[i]) < 0.01);
}

TEST_CASE("exploration") {
    std::vector<BeamState> beams = initial_beams({0});
    std::vector<ForesightCandidate> cands{cand(0, {1}, -1.0), cand(0, {2}, -0.2), cand(0, {0}, -3.0)};
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto out = explore_resample(cands, {0.0, 1.0, 0.0}, 1, beams, rng);
        REQUIRE(out.size() == 1);
        CHECK(out[0].response() == TokenSeq{2});
        CHECK(out[0].q_value == -0.2);
    }
    // Asking for as many beams as candidates takes all of them.
    const auto all = explore_resample(cands, build_distribution({-1.0, -0.2, -3.0}, 1.0), 3, beams, rng);
    std::set<TokenSeq> got;
    for (const auto& b : all) got.insert(b.response());
    CHECK(got.size() == 3);

    const std::map<std::string, double> want = testing::frozen().at("without_replacement_pairs");
    std::map<std::string, int> counts;
    const std::vector<double> f{0.7, 0.2, 0.1};
    for (int i = 0; i < 100000; ++i) {
        const auto out = explore_resample(cands, f, 2, beams, rng);
        std::vector<int> ids;
        for (const auto& b : out) ids.push_back(b.response()[0] == 1 ? 0 : b.response()[0] == 2 ? 1 : 2);
        std::sort(ids.begin(), ids.end());
        ++counts[std::to_string(ids[0]) + "," + std::to_string(ids[1])];
    }
    CHECK(want.at("0,1") == Approx(0.64167).epsilon(1e-4));
    for (const auto& [k, p] : want) CHECK(std::abs(counts[k] / 1e5 - p) < 0.01);
}

TEST_CASE("exploitation") {
    Rng rng(8);
    std::vector<ForesightCandidate> cands{cand(0, {0}, -0.1), cand(0, {1}, -0.5), cand(0, {2}, -0.9)};
    const std::vector<double> f{0.7, 0.2, 0.1};
    int first = 0;
    for (int i = 0; i < 100000; ++i) {
        const auto pair = exploit_resample(cands, f, rng);
        REQUIRE(pair);
        CHECK(pair->first == 0);
        REQUIRE(pair->second != 0);
        first += pair->second == 1;
    }
    CHECK(std::abs(first / 1e5 - 2.0 / 3.0) < 0.01);

    std::vector<ForesightCandidate> two{cand(0, {0}, -0.4), cand(0, {1}, -0.3)};
    for (int i = 0; i < 100; ++i) {
        const auto pair = exploit_resample(two, {0.4, 0.6}, rng);
        CHECK(pair->first == 1);
        CHECK(pair->second == 0);
    }

    std::vector<ForesightCandidate> tied{cand(0, {0}, -1), cand(0, {1}, -1), cand(0, {2}, -1), cand(0, {3}, -1)};
    std::vector<int> negs(4);
    for (int i = 0; i < 30000; ++i) {
        const auto pair = exploit_resample(tied, build_distribution({-1, -1, -1, -1}, 1.0), rng);
        CHECK(pair->first == 0);
        ++negs[pair->second];
    }
    CHECK(negs[0] == 0);
    for (int k = 1; k < 4; ++k) CHECK(std::abs(negs[k] / 3e4 - 1.0 / 3.0) < 0.015);

    // Candidates repeating the positive's response are never the negative.
    std::vector<ForesightCandidate> dup{cand(0, {1}, -0.1), cand(1, {1}, -0.2), cand(0, {2}, -3.0)};
    for (int i = 0; i < 1000; ++i) CHECK(exploit_resample(dup, {0.5, 0.49, 0.01}, rng)->second == 2);
    std::vector<ForesightCandidate> same{cand(0, {1}, -0.1), cand(1, {1}, -0.2)};
    CHECK(!exploit_resample(same, {0.5, 0.5}, rng));
    CHECK(!exploit_greedy(same));
}

TEST_CASE("greedy strategy helpers") {
    std::vector<BeamState> beams = initial_beams({0});
    std::vector<ForesightCandidate> cands{cand(0, {0}, -0.4), cand(0, {1}, -0.1), cand(0, {2}, -0.9),
                                          cand(0, {3}, -0.1)};
    const auto pair = exploit_greedy(cands);
    CHECK(pair->first == 1);
    CHECK(pair->second == 2);
    const auto kept = explore_greedy(cands, 2, beams);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].response() == TokenSeq{1});
    CHECK(kept[1].response() == TokenSeq{3});
}

TEST_CASE("advantages") {
    std::vector<BeamState> beams{BeamState{{0, 1}, 1, -0.5, false}, BeamState{{0, 2}, 1, 0.0, false}};
    const auto a = compute_advantages(cand(0, {1}, -0.2), cand(1, {2}, -0.4), beams);
    CHECK(a.first == Approx(0.3));
    CHECK(a.second == Approx(-0.4));
    const auto same = compute_advantages(cand(0, {1}, -0.2), cand(0, {2}, -0.9), beams);
    CHECK(same.first - same.second == Approx(-0.2 - -0.9));
}

TEST_CASE("four quintuples per query without early termination") {
    const TabularPolicy p = no_eos_policy();
    SamplingConfig cfg;
    for (std::uint64_t root = 0; root < 20; ++root) {
        const auto qs = collect_quintuples(p, {0, 1}, cfg, root);
        REQUIRE(qs.size() == 4);
        for (int k = 0; k < 4; ++k) {
            CHECK(qs[static_cast<std::size_t>(k)].timestamp == k + 1);
            CHECK(qs[static_cast<std::size_t>(k)].pos != qs[static_cast<std::size_t>(k)].neg);
            CHECK(qs[static_cast<std::size_t>(k)].query == TokenSeq{0, 1});
        }
        CHECK(collect_quintuples(p, {0, 1}, cfg, root) == qs);
    }
}

TEST_CASE("policy that ends immediately") {
    TabularPolicy p(Vocab{4, 2, 3}, 0);
    p.logits().set_row({}, {-50.0, -50.0, -50.0, 50.0});
    SamplingConfig cfg;
    const auto qs = collect_quintuples(p, {0}, cfg, 4);
    CHECK(qs.size() <= 1);
}

TEST_CASE("greedy strategy with greedy decoding ignores the seed") {
    const TabularPolicy p = testing::frozen_policy();
    SamplingConfig cfg;
    cfg.strategy = Strategy::greedy;
    cfg.decoding = Decoding::greedy;
    const auto a = collect_quintuples(p, {0, 1}, cfg, 1);
    CHECK(!a.empty());
    for (std::uint64_t root : {2ULL, 99ULL, 123456789ULL}) CHECK(collect_quintuples(p, {0, 1}, cfg, root) == a);
    for (const auto& q : a) CHECK(q.strategy == Strategy::greedy);
}

TEST_CASE("quintuple lines round-trip") {
    const TabularPolicy p = no_eos_policy();
    SamplingConfig cfg;
    cfg.strategy = Strategy::no_foresight;
    for (const auto& q : collect_quintuples(p, {0, 1}, cfg, 3)) {
        const std::string line = quintuple_to_line(q);
        CHECK(line.find("\"strategy\":\"no_foresight\"") != std::string::npos);
        CHECK(line.rfind("{\"query\":", 0) == 0);
        CHECK(quintuple_from_line(line) == q);
    }
    CHECK_THROWS_AS(quintuple_from_line("{\"query\":[1]}"), InputError);
    CHECK_THROWS_AS(quintuple_from_line("not json"), InputError);
}

TEST_CASE("sampling config validation") {
    SamplingConfig cfg;
    cfg.beams = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    cfg = {};
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
    CHECK_THROWS_AS(parse_strategy("beam"), std::invalid_argument);
}
