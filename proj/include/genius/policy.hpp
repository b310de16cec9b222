#pragma once

#include "genius/common.hpp"
#include "genius/rng.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace genius {

struct Vocab {
    int size = 0;
    Token step_sep = 0;
    Token eos = 0;

    void validate() const;
    bool valid_token(Token t) const { return t >= 0 && t < size; }
    friend bool operator==(const Vocab&, const Vocab&) = default;
};

// Sparse table of logit rows keyed by context tuples. Used both for policy
// parameters and for gradients with respect to them: a missing row means an
// all-zero row.
class LogitTable {
public:
    using Key = TokenSeq;
    using Row = std::vector<double>;

    LogitTable() = default;
    explicit LogitTable(int width) : width_(width) {}

    int width() const { return width_; }
    std::size_t num_rows() const { return rows_.size(); }
    const std::map<Key, Row>& rows() const { return rows_; }

    const Row* find(const Key& key) const;
    // Inserts a zero row on first access.
    Row& row(const Key& key);
    void set_row(const Key& key, Row values);

    // this += scale * other
    void add_scaled(const LogitTable& other, double scale);
    void scale(double factor);
    // Entries present in either table; missing rows compare as zeros.
    double max_abs_diff(const LogitTable& other) const;
    double max_abs() const;

    friend bool operator==(const LogitTable&, const LogitTable&) = default;

private:
    int width_ = 0;
    std::map<Key, Row> rows_;
};

// Tabular n-gram softmax policy. The distribution over the next token is the
// softmax of the row keyed by the last `order` tokens of the context (or the
// whole context when it is shorter). Contexts without a row are uniform.
class TabularPolicy {
public:
    TabularPolicy() = default;
    TabularPolicy(Vocab vocab, int order);

    const Vocab& vocab() const { return vocab_; }
    int order() const { return order_; }
    const LogitTable& logits() const { return logits_; }
    LogitTable& logits() { return logits_; }

    LogitTable::Key context_key(const TokenSeq& context) const;
    void validate_tokens(const TokenSeq& seq) const;

    // Log-softmax of the context row; entries sum (in probability) to one.
    std::vector<double> step_logprobs(const TokenSeq& context) const;

    Token sample_token(const TokenSeq& context, double gen_temperature, Rng& rng) const;
    // Argmax of the context row, ties to the lowest token id.
    Token greedy_token(const TokenSeq& context) const;

    double sequence_logprob(const TokenSeq& prefix, const TokenSeq& continuation) const;
    // Per-token log-probabilities of `continuation` given `prefix`.
    std::vector<double> token_logprobs(const TokenSeq& prefix, const TokenSeq& continuation) const;

    // d/dlogits of sequence_logprob: one-hot minus softmax, accumulated per
    // visited context row.
    LogitTable grad_sequence_logprob(const TokenSeq& prefix, const TokenSeq& continuation) const;

    // Deep copy used as the frozen reference policy.
    TabularPolicy snapshot_reference() const { return *this; }

    friend bool operator==(const TabularPolicy&, const TabularPolicy&) = default;

private:
    Vocab vocab_;
    int order_ = 2;
    LogitTable logits_;
};

// Numerically stable log(sum(exp(v))).
double logsumexp(const std::vector<double>& v);

// Checkpoint text format:
//
//   genius-policy 1
//   vocab <size> <step_sep> <eos>
//   order <n>
//   rows <count>
//   <k> <key tokens...> : <size values>
//
// Values are written in shortest round-trip form, so reading a written file
// reproduces every double bit-exactly.
void write_policy(std::ostream& out, const TabularPolicy& policy);
TabularPolicy read_policy(std::istream& in);
void save_policy(const std::string& path, const TabularPolicy& policy);
TabularPolicy load_policy(const std::string& path);

std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace genius
