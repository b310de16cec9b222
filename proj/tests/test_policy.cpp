#include "genius/oracle.hpp"
#include "genius/policy.hpp"
#include "helpers.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <doctest.h>

using namespace genius;
using doctest::Approx;

TEST_CASE("uniform and analytic rows") {
    TabularPolicy p = testing::uniform_policy(4);
    p.logits().set_row({0}, {0, 0, 0, 0});
    for (double lp : p.step_logprobs({0})) CHECK(lp == Approx(-1.3862944).epsilon(1e-7));

    p.logits().set_row({1}, {std::log(2.0), 0, 0, 0});
    const auto lp = p.step_logprobs({1});
    CHECK(std::exp(lp[0]) == Approx(0.4).epsilon(1e-12));
    for (int t = 1; t < 4; ++t) CHECK(std::exp(lp[t]) == Approx(0.2).epsilon(1e-12));

    // Unseen context reads as the all-zero row.
    CHECK(p.step_logprobs({3, 3}) == p.step_logprobs({0}));
}

TEST_CASE("context key uses the last order tokens") {
    TabularPolicy p = testing::uniform_policy(5, 2);
    CHECK(p.context_key({1, 2, 3}) == TokenSeq{2, 3});
    CHECK(p.context_key({4}) == TokenSeq{4});
    CHECK(p.context_key({}) == TokenSeq{});
    TabularPolicy p0 = testing::uniform_policy(5, 0);
    CHECK(p0.context_key({1, 2}) == TokenSeq{});
}

TEST_CASE("sampling frequencies") {
    TabularPolicy p = testing::uniform_policy(4);
    Rng rng(3);
    std::vector<int> counts(4);
    for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(p.sample_token({0}, 1.0, rng))];
    for (int c : counts) CHECK(c / 1e5 == Approx(0.25).epsilon(0.04));

    p.logits().set_row({1}, {10, 0, 0, 0});
    int zero = 0;
    for (int i = 0; i < 100000; ++i) zero += p.sample_token({1}, 1.0, rng) == 0;
    const double want = std::exp(10.0) / (std::exp(10.0) + 3.0);
    CHECK(want == Approx(0.99986).epsilon(1e-5));
    CHECK(std::abs(zero / 1e5 - want) < 0.001);

    // Near-zero temperature: the unique argmax every time.
    p.logits().set_row({2}, {0.1, 0.3, 0.2, 0.0});
    for (int i = 0; i < 1000; ++i) CHECK(p.sample_token({2}, 1e-4, rng) == 1);
    CHECK_THROWS_AS(p.sample_token({2}, 0.0, rng), InputError);
}

TEST_CASE("greedy token ties go to the lowest id") {
    TabularPolicy p = testing::uniform_policy(4);
    CHECK(p.greedy_token({0}) == 0);
    p.logits().set_row({0}, {0, 2, 2, 1});
    CHECK(p.greedy_token({0}) == 1);
}

TEST_CASE("sequence log-prob") {
    TabularPolicy p = testing::uniform_policy(4);
    CHECK(p.sequence_logprob({0}, {1, 2, 3}) == Approx(-4.1588831).epsilon(1e-8));

    p.logits().set_row({0}, {0, 800, 0, 0});
    CHECK(std::abs(p.sequence_logprob({0}, {1})) < 1e-12);

    const auto& f = testing::frozen().at("sequence_logprob");
    const TabularPolicy fp = testing::frozen_policy();
    const double got = fp.sequence_logprob(f.at("prefix").get<TokenSeq>(), f.at("seq").get<TokenSeq>());
    CHECK(std::abs(got - f.at("value").get<double>()) < 1e-12);

    CHECK_THROWS_AS(p.sequence_logprob({0}, {}), InputError);
    CHECK_THROWS_AS(p.sequence_logprob({0}, {7}), InputError);
}

TEST_CASE("sequence log-prob agrees with the enumerated path product") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        TabularPolicy p = testing::uniform_policy(4);
        for (Token a = 0; a < 4; ++a) {
            for (Token b = 0; b < 4; ++b) {
                std::vector<double> row(4);
                for (auto& x : row) x = 4.0 * rng.uniform() - 2.0;
                p.logits().set_row({a, b}, row);
            }
        }
        TokenSeq seq;
        for (int i = 0; i < 5; ++i) seq.push_back(static_cast<Token>(rng.below(4)));
        oracle::EnumerationBudget b;
        b.max_tokens = 5;
        b.stop_at_eos = false;
        const auto paths = oracle::enumerate_paths(p, {0, 1}, b);
        bool found = false;
        for (const auto& path : paths) {
            if (path.tokens != seq) continue;
            found = true;
            CHECK(std::abs(path.logprob - p.sequence_logprob({0, 1}, seq)) < 1e-12);
        }
        CHECK(found);
    }
}

TEST_CASE("sequence gradient") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        TabularPolicy p = testing::uniform_policy(4);
        TokenSeq prefix{static_cast<Token>(rng.below(3))};
        TokenSeq seq;
        for (int i = 0; i < 1 + static_cast<int>(rng.below(5)); ++i) seq.push_back(static_cast<Token>(rng.below(4)));
        const auto keys = oracle::visited_keys(p, prefix, seq);
        for (const auto& k : keys) {
            std::vector<double> row(4);
            for (auto& x : row) x = 4.0 * rng.uniform() - 2.0;
            p.logits().set_row(k, row);
        }
        const auto fn = [&](const TabularPolicy& q) { return q.sequence_logprob(prefix, seq); };
        const LogitTable analytic = p.grad_sequence_logprob(prefix, seq);
        CHECK(oracle::max_relative_error(analytic, oracle::finite_diff_grad(fn, p, keys)) < 1e-5);
        for (const auto& [key, row] : analytic.rows()) {
            double s = 0.0;
            for (double g : row) s += g;
            CHECK(std::abs(s) < 1e-12);
        }
    }

    // Saturated row: the observed token already has probability one.
    TabularPolicy p = testing::uniform_policy(4);
    p.logits().set_row({0}, {0, 60, 0, 0});
    const LogitTable g = p.grad_sequence_logprob({0}, {1});
    CHECK(g.max_abs() < 1e-20);
}

TEST_CASE("reference snapshot is independent") {
    TabularPolicy p = testing::frozen_policy();
    const TabularPolicy ref = p.snapshot_reference();
    CHECK(ref == p);
    const double before = ref.sequence_logprob({0}, {1, 2, 3});
    p.logits().row({0, 1})[2] += 1.5;
    CHECK(!(ref == p));
    CHECK(ref.sequence_logprob({0}, {1, 2, 3}) == before);
}

TEST_CASE("policy file round-trip is bit-exact") {
    TabularPolicy p(Vocab{6, 4, 5}, 3);
    p.logits().set_row({}, {0.1, -0.0, 1e-300, -2.5e17, 1.0 / 3.0, std::nextafter(1.0, 2.0)});
    p.logits().set_row({1, 2, 3}, {std::numeric_limits<double>::denorm_min(), 0, 0, 0, 0, -7});
    p.logits().set_row({5}, {1, 2, 3, 4, 5, 6});
    std::stringstream ss;
    write_policy(ss, p);
    const std::string text = ss.str();
    const TabularPolicy back = read_policy(ss);
    CHECK(back == p);
    for (const auto& [k, row] : p.logits().rows()) {
        const auto* other = back.logits().find(k);
        REQUIRE(other);
        for (std::size_t i = 0; i < row.size(); ++i) CHECK(std::signbit((*other)[i]) == std::signbit(row[i]));
    }
    std::stringstream again;
    write_policy(again, back);
    CHECK(again.str() == text);
    CHECK(text.rfind("genius-policy 1\n", 0) == 0);
}

TEST_CASE("malformed policy files are rejected") {
    const char* bad[] = {
        "",
        "genius-policy 2\nvocab 4 2 3\norder 2\nrows 0\n",
        "genius-policy 1\nvocab 4 2 3\norder 2\nrows 1\n1 0 : 1 2 3\n",
        "genius-policy 1\nvocab 4 2 3\norder 2\nrows 1\n1 9 : 1 2 3 4\n",
        "genius-policy 1\nvocab 4 2 3\norder 2\nrows 1\n1 0 : 1 2 x 4\n",
        "genius-policy 1\nvocab 2 0 1\norder 2\nrows 0\n",
    };
    for (const char* text : bad) {
        std::stringstream ss(text);
        CHECK_THROWS_AS(read_policy(ss), InputError);
    }
}

TEST_CASE("logit table validation") {
    LogitTable t(3);
    CHECK_THROWS_AS(t.set_row({0}, {1, 2}), InputError);
    CHECK_THROWS_AS(t.set_row({0}, {1, 2, std::nan("")}), InputError);
    CHECK_THROWS_AS(t.add_scaled(LogitTable(4), 1.0), InputError);
    CHECK_THROWS_AS((Vocab{4, 3, 3}.validate()), InputError);
}
