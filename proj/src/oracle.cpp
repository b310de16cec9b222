#include "genius/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace genius::oracle {

void EnumerationBudget::check(const Vocab& vocab) const {
    if (max_tokens < 1 || max_tokens > kMaxTokens) throw BudgetError("max_tokens outside [1, 12]");
    if (vocab_cap > kMaxVocab) throw BudgetError("vocab cap above 5");
    if (vocab.size > vocab_cap) throw BudgetError("vocab size above enumeration cap");
    if (std::pow(static_cast<double>(vocab.size), max_tokens) > kMaxPaths) throw BudgetError("path count above 1e7");
}

std::vector<double> next_probs(const TabularPolicy& policy, const TokenSeq& context) {
    const auto n = static_cast<std::size_t>(policy.vocab().size);
    const LogitTable::Row* row = policy.logits().find(policy.context_key(context));
    std::vector<double> p(n, 1.0);
    if (row != nullptr) {
        for (std::size_t i = 0; i < n; ++i) p[i] = std::exp((*row)[i]);
    }
    double total = 0.0;
    for (double v : p) total += v;
    for (double& v : p) v /= total;
    return p;
}

namespace {

void expand(const TabularPolicy& policy, const EnumerationBudget& budget, TokenSeq& context, TokenSeq& path,
            double prob, std::vector<Path>& out) {
    const std::vector<double> p = next_probs(policy, context);
    for (std::size_t t = 0; t < p.size(); ++t) {
        const Token tok = static_cast<Token>(t);
        const double q = prob * p[t];
        context.push_back(tok);
        path.push_back(tok);
        const bool ended = budget.stop_at_eos && tok == policy.vocab().eos;
        if (ended || static_cast<int>(path.size()) == budget.max_tokens) {
            out.push_back(Path{path, std::log(q), !ended});
        } else {
            expand(policy, budget, context, path, q, out);
        }
        context.pop_back();
        path.pop_back();
    }
}

double product_prob(const TabularPolicy& policy, TokenSeq context, const TokenSeq& tokens) {
    double p = 1.0;
    for (Token t : tokens) {
        p *= next_probs(policy, context)[static_cast<std::size_t>(t)];
        context.push_back(t);
    }
    return p;
}

}  // namespace

std::vector<Path> enumerate_paths(const TabularPolicy& policy, const TokenSeq& prefix, const EnumerationBudget& budget) {
    budget.check(policy.vocab());
    policy.validate_tokens(prefix);
    std::vector<Path> out;
    TokenSeq context = prefix;
    TokenSeq path;
    expand(policy, budget, context, path, 1.0, out);
    return out;
}

double exact_foresight(const TabularPolicy& policy, const TokenSeq& prefix, const TokenSeq& step,
                       const EnumerationBudget& budget, ScoreWindow window) {
    if (step.empty()) throw InputError("candidate step must be nonempty");
    const Vocab& v = policy.vocab();
    const double step_prob = product_prob(policy, prefix, step);

    TokenSeq continuation;
    double cont_prob = 1.0;
    if (step.back() != v.eos) {
        const TokenSeq context = concat(prefix, step);
        const std::vector<Path> paths = enumerate_paths(policy, context, budget);
        // Walk the path tree: at each depth keep the child with the largest
        // subtree mass, which is the argmax of the conditional next-token
        // distribution. Near-equal masses are ties, resolved to the lowest id.
        while (true) {
            std::map<Token, double> mass;
            for (const Path& p : paths) {
                if (p.tokens.size() <= continuation.size()) continue;
                if (!std::equal(continuation.begin(), continuation.end(), p.tokens.begin())) continue;
                const double pr = std::exp(p.logprob);
                mass[p.tokens[continuation.size()]] += pr;
            }
            if (mass.empty()) break;
            Token best = mass.begin()->first;
            for (const auto& [tok, m] : mass) {
                if (m > mass[best] * (1.0 + 1e-9)) best = tok;
            }
            continuation.push_back(best);
            if (best == v.eos) break;
        }
        cont_prob = product_prob(policy, context, continuation);
    }

    if (window == ScoreWindow::continuation_only && !continuation.empty()) {
        return std::log(cont_prob) / static_cast<double>(continuation.size());
    }
    return std::log(step_prob * cont_prob) / static_cast<double>(step.size() + continuation.size());
}

std::vector<double> exact_distribution(const std::vector<double>& scores, double tau) {
    if (scores.empty()) throw InputError("distribution needs at least one score");
    std::vector<double> p(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp(scores[i] / tau);
        total += p[i];
    }
    for (double& x : p) x /= total;
    return p;
}

LogitTable finite_diff_grad(const PolicyFn& fn, const TabularPolicy& params, const std::vector<LogitTable::Key>& keys,
                            double h) {
    if (!(h > 0.0)) throw InputError("finite-difference step must be positive");
    const int width = params.vocab().size;
    LogitTable grad(width);
    TabularPolicy probe = params;
    for (const LogitTable::Key& key : keys) {
        LogitTable::Row& g = grad.row(key);
        for (int i = 0; i < width; ++i) {
            LogitTable::Row& r = probe.logits().row(key);
            const double saved = r[static_cast<std::size_t>(i)];
            r[static_cast<std::size_t>(i)] = saved + h;
            const double up = fn(probe);
            probe.logits().row(key)[static_cast<std::size_t>(i)] = saved - h;
            const double down = fn(probe);
            probe.logits().row(key)[static_cast<std::size_t>(i)] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) throw NumericError("objective is not finite");
            g[static_cast<std::size_t>(i)] = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

std::vector<LogitTable::Key> visited_keys(const TabularPolicy& policy, const TokenSeq& prefix, const TokenSeq& continuation) {
    std::set<LogitTable::Key> keys;
    TokenSeq context = prefix;
    for (Token t : continuation) {
        keys.insert(policy.context_key(context));
        context.push_back(t);
    }
    return {keys.begin(), keys.end()};
}

double max_relative_error(const LogitTable& analytic, const LogitTable& reference) {
    double worst = 0.0;
    auto visit = [&](const LogitTable& a, const LogitTable& b, bool a_is_analytic) {
        for (const auto& [key, ra] : a.rows()) {
            const LogitTable::Row* rb = b.find(key);
            for (std::size_t i = 0; i < ra.size(); ++i) {
                const double bv = rb ? (*rb)[i] : 0.0;
                const double ref = a_is_analytic ? bv : ra[i];
                worst = std::max(worst, std::abs(ra[i] - bv) / std::max(1.0, std::abs(ref)));
            }
        }
    };
    visit(analytic, reference, true);
    visit(reference, analytic, false);
    return worst;
}

TokenSeq best_response(const TabularPolicy& policy, const Evaluator& evaluator, const TokenSeq& query,
                       const EnumerationBudget& budget) {
    const std::vector<Path> paths = enumerate_paths(policy, query, budget);
    const Path* best = nullptr;
    for (const Path& p : paths) {
        if (p.truncated || !evaluator(query, p.tokens)) continue;
        if (best == nullptr || p.logprob > best->logprob ||
            (p.logprob == best->logprob && p.tokens < best->tokens)) {
            best = &p;
        }
    }
    return best ? best->tokens : TokenSeq{};
}

}  // namespace genius::oracle
