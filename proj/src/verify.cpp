#include "genius/verify.hpp"

#include "genius/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace genius::verify {

bool all_pass(const std::vector<CheckRow>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

std::string format_report(const std::vector<CheckRow>& rows) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %9s %14s %10s  %s\n", "check", "instances", "max_rel_error", "tolerance",
                  "result");
    out << line;
    const CheckRow* worst = nullptr;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-24s %9d %14.3e %10.1e  %s\n", r.name.c_str(), r.instances, r.max_error,
                      r.tolerance, r.pass ? "PASS" : "FAIL");
        out << line;
        if (!worst || r.max_error / r.tolerance > worst->max_error / worst->tolerance) worst = &r;
    }
    if (worst) out << "worst: " << worst->name << " (" << worst->max_error << ")\n";
    for (const auto& r : rows) {
        if (!r.pass && !r.first_failure.empty()) out << "first failing " << r.name << " instance:\n" << r.first_failure;
    }
    return out.str();
}

LogitTable default_gradient(const TabularPolicy& policy, const TabularPolicy& reference, const PreferenceQuintuple& q,
                            const LossConfig& cfg) {
    if (cfg.kind == LossKind::aco) {
        return aco_gradient(log_ratios(policy, reference, q), cfg, policy.grad_sequence_logprob(q.query, q.pos),
                            policy.grad_sequence_logprob(q.query, q.neg));
    }
    return quintuple_loss(policy, reference, q, cfg, true).grad;
}

namespace {

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

Vocab small_vocab(int size) { return Vocab{size, size - 2, size - 1}; }

// Every context of length 0..order gets a random row.
void fill_rows(TabularPolicy& p, Rng& rng, double scale) {
    const int v = p.vocab().size;
    std::vector<TokenSeq> frontier{{}};
    for (int len = 0; len <= p.order(); ++len) {
        std::vector<TokenSeq> next;
        for (const auto& ctx : frontier) {
            std::vector<double> row(static_cast<std::size_t>(v));
            for (auto& x : row) x = uniform(rng, -scale, scale);
            p.logits().set_row(ctx, std::move(row));
            for (Token t = 0; t < v; ++t) {
                TokenSeq c = ctx;
                c.push_back(t);
                next.push_back(std::move(c));
            }
        }
        frontier = std::move(next);
    }
}

TokenSeq random_seq(Rng& rng, const Vocab& v, int min_len, int max_len, bool allow_eos) {
    const auto len = min_len + static_cast<int>(rng.below(static_cast<std::size_t>(max_len - min_len + 1)));
    const auto range = static_cast<std::size_t>(allow_eos ? v.size : v.size - 1);
    TokenSeq s;
    for (int i = 0; i < len; ++i) s.push_back(static_cast<Token>(rng.below(range)));
    return s;
}

std::string serialize(const TabularPolicy& p) {
    std::ostringstream out;
    write_policy(out, p);
    return out.str();
}

std::string seq_text(const TokenSeq& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

std::vector<LogitTable::Key> union_keys(std::vector<LogitTable::Key> a, const std::vector<LogitTable::Key>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

void record(CheckRow& row, double err, const std::string& instance) {
    row.max_error = std::max(row.max_error, err);
    if (!(err <= row.tolerance) && row.pass) {
        row.pass = false;
        row.first_failure = instance;
    }
}

}  // namespace

GradInstance random_grad_instance(const GradcheckOptions& opts, LossKind kind, Rng& rng) {
    const Vocab v = small_vocab(opts.vocab);
    GradInstance g{TabularPolicy(v, opts.order), TabularPolicy(v, opts.order), {}, {}};
    fill_rows(g.policy, rng, 2.0);
    fill_rows(g.reference, rng, 2.0);

    PreferenceQuintuple& q = g.quintuple;
    q.query = random_seq(rng, v, 1, 3, false);
    q.pos = random_seq(rng, v, 1, 4, true);
    do {
        q.neg = random_seq(rng, v, 1, 4, true);
    } while (q.neg == q.pos);
    q.pos_adv = uniform(rng, -1.0, 1.0);
    q.neg_adv = uniform(rng, -1.0, 1.0);

    LossConfig& l = g.loss;
    l.kind = kind;
    l.beta = uniform(rng, 0.1, 1.0);
    l.alpha = uniform(rng, 0.2, 2.0);
    l.epsilon = uniform(rng, 0.0, 0.4);
    l.gamma = uniform(rng, 0.5, 1.5);
    l.eta = uniform(rng, 0.0, 1.0);
    return g;
}

std::vector<CheckRow> run_gradcheck(const GradcheckOptions& opts, std::uint64_t seed, const GradientImpl& gradient) {
    const LossKind kinds[] = {LossKind::aco, LossKind::dpo, LossKind::cdpo, LossKind::ropo, LossKind::sft};
    std::vector<CheckRow> rows;
    for (LossKind kind : kinds) {
        CheckRow row{to_string(kind), opts.instances, 0.0, opts.tolerance, true, {}};
        Rng rng = Rng::stream(seed, {0x67u, static_cast<std::uint64_t>(kind)});
        for (int i = 0; i < opts.instances; ++i) {
            const GradInstance g = random_grad_instance(opts, kind, rng);
            const auto& q = g.quintuple;
            const auto loss_of = [&](const TabularPolicy& p) {
                return quintuple_loss(p, g.reference, q, g.loss, false).loss;
            };
            const auto keys = union_keys(oracle::visited_keys(g.policy, q.query, q.pos),
                                         oracle::visited_keys(g.policy, q.query, q.neg));
            const LogitTable numeric = oracle::finite_diff_grad(loss_of, g.policy, keys, opts.h);
            const LogitTable analytic = gradient(g.policy, g.reference, q, g.loss);
            const double err = oracle::max_relative_error(analytic, numeric);
            if (!(err <= row.tolerance) && row.pass) {
                std::ostringstream inst;
                inst << "query " << seq_text(q.query) << " pos " << seq_text(q.pos) << " neg " << seq_text(q.neg)
                     << " pos_adv " << format_double(q.pos_adv) << " neg_adv " << format_double(q.neg_adv)
                     << " beta " << format_double(g.loss.beta) << " alpha " << format_double(g.loss.alpha) << "\n"
                     << "policy:\n" << serialize(g.policy) << "reference:\n" << serialize(g.reference);
                record(row, err, inst.str());
            } else {
                record(row, err, {});
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CheckRow> run_oracle_suites(const OracleOptions& opts, std::uint64_t seed) {
    CheckRow scores{"foresight_scores", opts.instances, 0.0, opts.tolerance, true, {}};
    CheckRow dists{"score_distribution", opts.instances, 0.0, opts.tolerance, true, {}};
    Rng rng = Rng::stream(seed, {0x6fu});
    const Vocab v = small_vocab(opts.vocab);
    oracle::EnumerationBudget budget;
    budget.max_tokens = opts.max_tokens;
    budget.check(v);

    for (int i = 0; i < opts.instances; ++i) {
        TabularPolicy policy(v, 2);
        fill_rows(policy, rng, 3.0);
        const TokenSeq query = random_seq(rng, v, 1, 3, false);
        BeamState beam = initial_beams(query).front();
        if (rng.below(2) == 1) {
            // Start from a beam that already holds one step.
            TokenSeq step = random_seq(rng, v, 0, 2, false);
            step.push_back(v.step_sep);
            beam.prefix = concat(beam.prefix, step);
        }

        SamplingConfig cfg;
        cfg.decoding = Decoding::greedy;
        cfg.rollouts = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(v.size)));
        cfg.max_step_tokens = 1 + static_cast<int>(rng.below(3));
        cfg.max_foresight_tokens = opts.max_tokens;
        cfg.window = rng.below(2) == 0 ? ScoreWindow::step_and_continuation : ScoreWindow::continuation_only;
        cfg.tau = uniform(rng, 0.2, 2.0);

        const auto cands = rollout_candidates(policy, {beam}, cfg, 0);
        std::vector<double> got, want;
        double worst = 0.0;
        for (const auto& c : cands) {
            got.push_back(c.fscore);
            want.push_back(oracle::exact_foresight(policy, beam.prefix, c.step, budget, cfg.window));
            worst = std::max(worst, std::abs(got.back() - want.back()) / std::max(1.0, std::abs(want.back())));
        }
        const auto describe = [&] {
            std::ostringstream inst;
            inst << "prefix " << seq_text(beam.prefix) << " rollouts " << cfg.rollouts << " max_step_tokens "
                 << cfg.max_step_tokens << " window " << to_string(cfg.window) << " tau " << format_double(cfg.tau)
                 << "\npolicy:\n" << serialize(policy);
            return inst.str();
        };
        record(scores, worst, worst <= scores.tolerance ? std::string() : describe());

        if (cands.empty()) continue;
        const auto d_got = build_distribution(got, cfg.tau);
        const auto d_want = oracle::exact_distribution(want, cfg.tau);
        double dworst = 0.0;
        for (std::size_t k = 0; k < d_got.size(); ++k) dworst = std::max(dworst, std::abs(d_got[k] - d_want[k]));
        record(dists, dworst, dworst <= dists.tolerance ? std::string() : describe());
    }

    CheckRow norm{"distribution_normalized", opts.instances, 0.0, opts.tolerance, true, {}};
    CheckRow shift{"tau_shift_invariance", opts.instances, 0.0, opts.tolerance, true, {}};
    for (int i = 0; i < opts.instances; ++i) {
        std::vector<double> s(1 + rng.below(12));
        const double spread = std::pow(10.0, uniform(rng, -2.0, 3.0));
        for (auto& x : s) x = -spread * rng.uniform();
        const double tau = uniform(rng, 0.05, 5.0);
        const auto d = build_distribution(s, tau);
        double total = 0.0;
        bool nonneg = true;
        for (double p : d) {
            total += p;
            nonneg = nonneg && p >= 0.0;
        }
        const double nerr = nonneg ? std::abs(total - 1.0) : 1.0;
        const std::string scores_text = [&] {
            std::ostringstream o;
            o << "scores";
            for (double x : s) o << " " << format_double(x);
            o << " tau " << format_double(tau) << "\n";
            return o.str();
        }();
        record(norm, nerr, nerr <= norm.tolerance ? std::string() : scores_text);

        const double c = uniform(rng, -50.0, 50.0);
        std::vector<double> shifted = s;
        for (auto& x : shifted) x += c;
        const auto d2 = build_distribution(shifted, tau);
        double serr = 0.0;
        for (std::size_t k = 0; k < d.size(); ++k) serr = std::max(serr, std::abs(d[k] - d2[k]));
        record(shift, serr, serr <= shift.tolerance ? std::string() : scores_text);
    }

    CheckRow distinct{"exploit_distinct_pair", opts.instances, 0.0, 0.0, true, {}};
    for (int i = 0; i < opts.instances; ++i) {
        std::vector<ForesightCandidate> cands(2 + rng.below(5));
        std::vector<double> s;
        for (auto& c : cands) {
            // Few distinct responses, so duplicates of the positive are common.
            c.full_response = {static_cast<Token>(rng.below(3))};
            c.step = c.full_response;
            c.fscore = -rng.uniform();
            s.push_back(c.fscore);
        }
        const auto pair = exploit_resample(cands, build_distribution(s, 1.0), rng);
        const bool bad = pair && (pair->first == pair->second ||
                                  cands[pair->first].full_response == cands[pair->second].full_response);
        record(distinct, bad ? 1.0 : 0.0, bad ? std::string("exploit returned identical responses\n") : std::string());
    }

    return {scores, dists, norm, shift, distinct};
}

}  // namespace genius::verify
