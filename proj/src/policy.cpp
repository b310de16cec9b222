#include "genius/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace genius {

void Vocab::validate() const {
    if (size < 3) throw InputError("vocab size must be at least 3");
    if (!valid_token(step_sep) || !valid_token(eos)) throw InputError("step_sep/eos outside vocab");
    if (step_sep == eos) throw InputError("step_sep and eos must differ");
}

const LogitTable::Row* LogitTable::find(const Key& key) const {
    auto it = rows_.find(key);
    return it == rows_.end() ? nullptr : &it->second;
}

LogitTable::Row& LogitTable::row(const Key& key) {
    auto [it, inserted] = rows_.try_emplace(key);
    if (inserted) it->second.assign(static_cast<std::size_t>(width_), 0.0);
    return it->second;
}

void LogitTable::set_row(const Key& key, Row values) {
    if (static_cast<int>(values.size()) != width_) throw InputError("logit row has wrong width");
    for (double v : values) {
        if (!std::isfinite(v)) throw InputError("logit row has non-finite entry");
    }
    rows_[key] = std::move(values);
}

void LogitTable::add_scaled(const LogitTable& other, double factor) {
    if (other.width_ != width_) throw InputError("logit table width mismatch");
    for (const auto& [key, src] : other.rows_) {
        Row& dst = row(key);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += factor * src[i];
    }
}

void LogitTable::scale(double factor) {
    for (auto& [key, r] : rows_) {
        for (double& v : r) v *= factor;
    }
}

double LogitTable::max_abs_diff(const LogitTable& other) const {
    if (other.width_ != width_) throw InputError("logit table width mismatch");
    double worst = 0.0;
    auto visit = [&](const LogitTable& a, const LogitTable& b) {
        for (const auto& [key, ra] : a.rows_) {
            const Row* rb = b.find(key);
            for (std::size_t i = 0; i < ra.size(); ++i) {
                double bv = rb ? (*rb)[i] : 0.0;
                worst = std::max(worst, std::abs(ra[i] - bv));
            }
        }
    };
    visit(*this, other);
    visit(other, *this);
    return worst;
}

double LogitTable::max_abs() const {
    double worst = 0.0;
    for (const auto& [key, r] : rows_) {
        for (double v : r) worst = std::max(worst, std::abs(v));
    }
    return worst;
}

double logsumexp(const std::vector<double>& v) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : v) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

TabularPolicy::TabularPolicy(Vocab vocab, int order) : vocab_(vocab), order_(order), logits_(vocab.size) {
    vocab_.validate();
    if (order < 0) throw InputError("policy order must be nonnegative");
}

LogitTable::Key TabularPolicy::context_key(const TokenSeq& context) const {
    const std::size_t n = std::min(context.size(), static_cast<std::size_t>(order_));
    return LogitTable::Key(context.end() - static_cast<std::ptrdiff_t>(n), context.end());
}

void TabularPolicy::validate_tokens(const TokenSeq& seq) const {
    for (Token t : seq) {
        if (!vocab_.valid_token(t)) throw InputError("token id " + std::to_string(t) + " outside vocab");
    }
}

namespace {

std::vector<double> log_softmax(const std::vector<double>& row) {
    std::vector<double> out(row);
    const double lse = logsumexp(row);
    for (double& v : out) v -= lse;
    return out;
}

}  // namespace

std::vector<double> TabularPolicy::step_logprobs(const TokenSeq& context) const {
    validate_tokens(context);
    const LogitTable::Row* row = logits_.find(context_key(context));
    if (row == nullptr) {
        return std::vector<double>(static_cast<std::size_t>(vocab_.size), -std::log(static_cast<double>(vocab_.size)));
    }
    return log_softmax(*row);
}

Token TabularPolicy::sample_token(const TokenSeq& context, double gen_temperature, Rng& rng) const {
    if (!(gen_temperature > 0.0)) throw InputError("generation temperature must be positive");
    std::vector<double> lp = step_logprobs(context);
    for (double& v : lp) v /= gen_temperature;
    const double hi = *std::max_element(lp.begin(), lp.end());
    std::vector<double> w(lp.size());
    for (std::size_t i = 0; i < lp.size(); ++i) w[i] = std::exp(lp[i] - hi);
    return static_cast<Token>(rng.categorical(w));
}

Token TabularPolicy::greedy_token(const TokenSeq& context) const {
    const std::vector<double> lp = step_logprobs(context);
    return static_cast<Token>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

std::vector<double> TabularPolicy::token_logprobs(const TokenSeq& prefix, const TokenSeq& continuation) const {
    if (continuation.empty()) throw InputError("continuation must be nonempty");
    validate_tokens(continuation);
    TokenSeq context = prefix;
    std::vector<double> out;
    out.reserve(continuation.size());
    for (Token t : continuation) {
        out.push_back(step_logprobs(context)[static_cast<std::size_t>(t)]);
        context.push_back(t);
    }
    return out;
}

double TabularPolicy::sequence_logprob(const TokenSeq& prefix, const TokenSeq& continuation) const {
    double total = 0.0;
    for (double v : token_logprobs(prefix, continuation)) total += v;
    return total;
}

LogitTable TabularPolicy::grad_sequence_logprob(const TokenSeq& prefix, const TokenSeq& continuation) const {
    if (continuation.empty()) throw InputError("continuation must be nonempty");
    validate_tokens(continuation);
    LogitTable grad(vocab_.size);
    TokenSeq context = prefix;
    for (Token t : continuation) {
        const std::vector<double> lp = step_logprobs(context);
        LogitTable::Row& g = grad.row(context_key(context));
        for (std::size_t i = 0; i < lp.size(); ++i) g[i] -= std::exp(lp[i]);
        g[static_cast<std::size_t>(t)] += 1.0;
        context.push_back(t);
    }
    return grad;
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw NumericError("cannot format double");
    return std::string(buf, end);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) throw InputError("bad number '" + s + "'");
    return v;
}

void write_policy(std::ostream& out, const TabularPolicy& policy) {
    const Vocab& v = policy.vocab();
    out << "genius-policy 1\n";
    out << "vocab " << v.size << ' ' << v.step_sep << ' ' << v.eos << '\n';
    out << "order " << policy.order() << '\n';
    out << "rows " << policy.logits().num_rows() << '\n';
    for (const auto& [key, row] : policy.logits().rows()) {
        out << key.size();
        for (Token t : key) out << ' ' << t;
        out << " :";
        for (double x : row) out << ' ' << format_double(x);
        out << '\n';
    }
}

namespace {

void expect_word(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw InputError("policy file: expected '" + word + "'");
}

}  // namespace

TabularPolicy read_policy(std::istream& in) {
    expect_word(in, "genius-policy");
    int version = 0;
    if (!(in >> version) || version != 1) throw InputError("policy file: unsupported version");
    Vocab vocab;
    expect_word(in, "vocab");
    in >> vocab.size >> vocab.step_sep >> vocab.eos;
    int order = 0;
    expect_word(in, "order");
    in >> order;
    std::size_t count = 0;
    expect_word(in, "rows");
    in >> count;
    if (!in) throw InputError("policy file: truncated header");
    TabularPolicy policy(vocab, order);
    for (std::size_t r = 0; r < count; ++r) {
        std::size_t klen = 0;
        if (!(in >> klen)) throw InputError("policy file: truncated row");
        LogitTable::Key key(klen);
        for (Token& t : key) in >> t;
        expect_word(in, ":");
        LogitTable::Row row(static_cast<std::size_t>(vocab.size));
        for (double& x : row) {
            std::string word;
            if (!(in >> word)) throw InputError("policy file: truncated row");
            x = parse_double(word);
        }
        policy.validate_tokens(key);
        policy.logits().set_row(key, std::move(row));
    }
    return policy;
}

void save_policy(const std::string& path, const TabularPolicy& policy) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_policy(out, policy);
}

TabularPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    return read_policy(in);
}

}  // namespace genius
