#include "genius/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace genius::tasks {

std::string to_string(TaskName t) {
    switch (t) {
        case TaskName::arith_chain: return "arith_chain";
        case TaskName::string_rev: return "string_rev";
        case TaskName::grid_path: return "grid_path";
    }
    return "?";
}

TaskName parse_task(const std::string& s) {
    if (s == "arith_chain") return TaskName::arith_chain;
    if (s == "string_rev") return TaskName::string_rev;
    if (s == "grid_path") return TaskName::grid_path;
    throw InputError("unknown task '" + s + "'");
}

void TaskSpec::validate() const {
    switch (name) {
        case TaskName::arith_chain:
            if (max_operand < 1 || max_operand > 9) throw InputError("max_operand must be in [1, 9]");
            if (num_ops < 1 || num_ops > 4) throw InputError("num_ops must be in [1, 4]");
            break;
        case TaskName::string_rev:
            if (string_length < 1 || string_length > 3) throw InputError("string_length must be in [1, 3]");
            break;
        case TaskName::grid_path:
            if (grid_size < 2 || grid_size > 3) throw InputError("grid_size must be 2 or 3");
            break;
    }
}

std::string TaskSpec::alphabet() const {
    switch (name) {
        case TaskName::arith_chain: return "0123456789+-=;$";
        case TaskName::string_rev: return "abcd=;$";
        case TaskName::grid_path: return "012345678=;$";
    }
    return {};
}

Vocab TaskSpec::vocab() const {
    const int size = static_cast<int>(alphabet().size());
    return Vocab{size, size - 2, size - 1};
}

std::string render(const TaskSpec& spec, const TokenSeq& tokens) {
    const std::string a = spec.alphabet();
    std::string out;
    for (Token t : tokens) {
        if (t < 0 || t >= static_cast<Token>(a.size())) throw InputError("token outside task alphabet");
        out.push_back(a[static_cast<std::size_t>(t)]);
    }
    return out;
}

TokenSeq parse(const TaskSpec& spec, const std::string& text) {
    const std::string a = spec.alphabet();
    TokenSeq out;
    for (char ch : text) {
        const auto pos = a.find(ch);
        if (pos == std::string::npos) throw InputError(std::string("character '") + ch + "' outside task alphabet");
        out.push_back(static_cast<Token>(pos));
    }
    return out;
}

namespace {

constexpr Token kPlus = 10;
constexpr Token kMinus = 11;

Token equals_token(const TaskSpec& spec) { return spec.vocab().size - 3; }

void arith_queries(const TaskSpec& spec, TokenSeq& cur, int value, int ops_left, std::vector<TokenSeq>& out) {
    if (ops_left == 0) {
        cur.push_back(equals_token(spec));
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (Token op : {kPlus, kMinus}) {
        for (int b = 0; b <= spec.max_operand; ++b) {
            const int next = op == kPlus ? value + b : value - b;
            if (next < 0 || next > spec.max_operand) continue;
            cur.push_back(op);
            cur.push_back(b);
            arith_queries(spec, cur, next, ops_left - 1, out);
            cur.pop_back();
            cur.pop_back();
        }
    }
}

std::vector<int> arith_partials(const TokenSeq& query) {
    std::vector<int> partials;
    int value = query.at(0);
    for (std::size_t i = 1; i + 1 < query.size(); i += 2) {
        value = query[i] == kPlus ? value + query[i + 1] : value - query[i + 1];
        partials.push_back(value);
    }
    return partials;
}

int grid_distance(const TaskSpec& spec, Token s, Token g) {
    const int n = spec.grid_size;
    return std::abs(s / n - g / n) + std::abs(s % n - g % n);
}

// Intermediate steps of the worked solution, then the answer.
std::vector<TokenSeq> solution_steps(const TaskSpec& spec, const TokenSeq& query) {
    std::vector<TokenSeq> steps;
    switch (spec.name) {
        case TaskName::arith_chain:
            for (int v : arith_partials(query)) steps.push_back({static_cast<Token>(v)});
            break;
        case TaskName::string_rev: {
            TokenSeq letters(query.begin(), query.end() - 1);
            TokenSeq rev;
            for (auto it = letters.rbegin(); it != letters.rend(); ++it) {
                rev.push_back(*it);
                steps.push_back(rev);
            }
            break;
        }
        case TaskName::grid_path: {
            const int n = spec.grid_size;
            const Token s = query.at(0), g = query.at(1);
            steps.push_back({static_cast<Token>(std::abs(s / n - g / n))});
            steps.push_back({static_cast<Token>(std::abs(s % n - g % n))});
            steps.push_back({static_cast<Token>(grid_distance(spec, s, g))});
            break;
        }
    }
    return steps;
}

// Detour symbols: tokens that never appear in a worked solution, so the
// detour's bigrams stay disjoint from the solution bigrams.
std::vector<Token> detour_symbols(const TaskSpec& spec) {
    switch (spec.name) {
        case TaskName::arith_chain: return {kPlus, kMinus};
        case TaskName::string_rev: return {equals_token(spec)};
        case TaskName::grid_path: return {equals_token(spec)};
    }
    return {};
}

Token pick(const std::vector<Token>& from, Rng& rng) { return from[rng.below(from.size())]; }

// One filler step "s f f s" between symbol bookends; f is any non-special
// token.
void append_filler_step(const TaskSpec& spec, TokenSeq& out, Rng& rng) {
    const auto symbols = detour_symbols(spec);
    const auto content = static_cast<std::size_t>(spec.vocab().size - 3);
    out.push_back(pick(symbols, rng));
    out.push_back(static_cast<Token>(rng.below(content)));
    out.push_back(static_cast<Token>(rng.below(content)));
    out.push_back(pick(symbols, rng));
}

}  // namespace

std::vector<TokenSeq> all_queries(const TaskSpec& spec) {
    spec.validate();
    std::vector<TokenSeq> out;
    switch (spec.name) {
        case TaskName::arith_chain:
            for (int a = 0; a <= spec.max_operand; ++a) {
                TokenSeq cur{static_cast<Token>(a)};
                arith_queries(spec, cur, a, spec.num_ops, out);
            }
            break;
        case TaskName::string_rev: {
            std::size_t total = 1;
            for (int i = 0; i < spec.string_length; ++i) total *= 4;
            for (std::size_t code = 0; code < total; ++code) {
                TokenSeq q;
                std::size_t c = code;
                for (int i = 0; i < spec.string_length; ++i) {
                    q.push_back(static_cast<Token>(c % 4));
                    c /= 4;
                }
                q.push_back(equals_token(spec));
                out.push_back(q);
            }
            break;
        }
        case TaskName::grid_path: {
            const int cells = spec.grid_size * spec.grid_size;
            for (int s = 0; s < cells; ++s) {
                for (int g = 0; g < cells; ++g) {
                    if (s != g) out.push_back({static_cast<Token>(s), static_cast<Token>(g), equals_token(spec)});
                }
            }
            break;
        }
    }
    return out;
}

Split split_of(const TaskSpec& spec, const TokenSeq& query) {
    std::uint64_t h = mix64(spec.split_seed);
    for (Token t : query) h = mix64(h ^ static_cast<std::uint64_t>(t + 1));
    const auto bucket = h % 10;
    if (bucket < 3) return Split::pretrain;
    if (bucket < 7) return Split::train;
    return Split::eval;
}

std::vector<TokenSeq> gen_queries(const TaskSpec& spec, std::size_t n, Split split, Rng& rng) {
    if (n < 1) throw InputError("need at least one query");
    std::vector<TokenSeq> pool;
    for (auto& q : all_queries(spec)) {
        if (split_of(spec, q) == split) pool.push_back(std::move(q));
    }
    if (pool.empty()) throw InputError("task split has no queries");
    std::vector<TokenSeq> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.below(pool.size())]);
    return out;
}

TokenSeq answer(const TaskSpec& spec, const TokenSeq& query) { return solution_steps(spec, query).back(); }

TokenSeq worked_solution(const TaskSpec& spec, const TokenSeq& query) {
    const Vocab v = spec.vocab();
    const auto steps = solution_steps(spec, query);
    TokenSeq out;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        out.insert(out.end(), steps[i].begin(), steps[i].end());
        out.push_back(i + 1 == steps.size() ? v.eos : v.step_sep);
    }
    return out;
}

bool check(const TaskSpec& spec, const TokenSeq& query, const TokenSeq& response) {
    const Vocab v = spec.vocab();
    if (response.empty() || response.back() != v.eos) return false;
    if (std::count(response.begin(), response.end(), v.eos) != 1) return false;
    for (Token t : response) {
        if (!v.valid_token(t)) return false;
    }
    auto body_end = response.end() - 1;
    auto last_sep = std::find(std::make_reverse_iterator(body_end), response.rend(), v.step_sep);
    auto final_begin = last_sep == response.rend() ? response.begin() : last_sep.base();
    return TokenSeq(final_begin, body_end) == answer(spec, query);
}

TabularPolicy base_policy(const TaskSpec& spec, const BaseModelOptions& opts) {
    spec.validate();
    if (!(opts.detour_rate >= 0.0 && opts.detour_rate < 1.0)) throw InputError("detour_rate must be in [0, 1)");
    if (opts.detour_steps < 1) throw InputError("detour_steps must be positive");
    if (!(opts.smoothing > 0.0)) throw InputError("smoothing must be positive");
    const Vocab v = spec.vocab();
    TabularPolicy policy(v, opts.order);
    Rng rng(opts.seed);
    const std::vector<TokenSeq> queries =
        gen_queries(spec, static_cast<std::size_t>(opts.corpus_size), Split::pretrain, rng);

    std::map<LogitTable::Key, std::vector<double>> counts;
    for (const TokenSeq& q : queries) {
        TokenSeq response;
        if (rng.uniform() < opts.detour_rate) {
            response = {detour_symbols(spec).front(), v.step_sep};
            for (int k = 0; k < opts.detour_steps; ++k) {
                append_filler_step(spec, response, rng);
                response.push_back(k + 1 == opts.detour_steps ? v.eos : v.step_sep);
            }
        } else {
            response = worked_solution(spec, q);
        }

        TokenSeq context = q;
        for (Token t : response) {
            auto [it, inserted] = counts.try_emplace(policy.context_key(context));
            if (inserted) it->second.assign(static_cast<std::size_t>(v.size), 0.0);
            it->second[static_cast<std::size_t>(t)] += 1.0;
            context.push_back(t);
        }
    }
    for (auto& [key, c] : counts) {
        LogitTable::Row row(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) row[i] = std::log(c[i] + opts.smoothing);
        policy.logits().set_row(key, std::move(row));
    }
    return policy;
}

TokenSeq greedy_response(const TabularPolicy& policy, const TokenSeq& query, int max_tokens) {
    TokenSeq context = query;
    TokenSeq out;
    while (static_cast<int>(out.size()) < max_tokens) {
        const Token t = policy.greedy_token(context);
        out.push_back(t);
        context.push_back(t);
        if (t == policy.vocab().eos) break;
    }
    return out;
}

void write_queries(const std::string& path, const TaskSpec& spec, const std::vector<TokenSeq>& queries) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    for (const auto& q : queries) out << render(spec, q) << '\n';
}

std::vector<TokenSeq> read_queries(const std::string& path, const TaskSpec& spec) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    std::vector<TokenSeq> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(parse(spec, line));
    }
    return out;
}

}  // namespace genius::tasks
