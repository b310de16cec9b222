#pragma once

#include "genius/common.hpp"
#include "genius/policy.hpp"
#include "genius/rng.hpp"

#include <string>
#include <vector>

// Toy query corpora. Training code only ever sees queries; `check` is for
// evaluation.
namespace genius::tasks {

enum class TaskName { arith_chain, string_rev, grid_path };

std::string to_string(TaskName t);
TaskName parse_task(const std::string& s);

enum class Split { pretrain, train, eval };

// Token alphabets (ids in order):
//   arith_chain: 0-9 digits, + - = ; $      (15 symbols)
//   string_rev:  a b c d, = ; $             (7 symbols)
//   grid_path:   0-8 digits, = ; $          (12 symbols)
// ';' is the step separator and '$' is eos in every task.
struct TaskSpec {
    TaskName name = TaskName::arith_chain;
    int max_operand = 5;      // arith_chain: operands and every partial result in [0, max_operand]
    int num_ops = 2;          // arith_chain
    int string_length = 3;    // string_rev
    int grid_size = 3;        // grid_path
    std::uint64_t split_seed = 17;

    void validate() const;
    Vocab vocab() const;
    std::string alphabet() const;
};

std::string render(const TaskSpec& spec, const TokenSeq& tokens);
TokenSeq parse(const TaskSpec& spec, const std::string& text);

// Every well-formed query of the task, in canonical order.
std::vector<TokenSeq> all_queries(const TaskSpec& spec);
// Deterministic assignment of a query to a split: 30% pretrain, 40% train,
// 30% eval by hashing the query with the split seed.
Split split_of(const TaskSpec& spec, const TokenSeq& query);

// n queries drawn with replacement from the given split.
std::vector<TokenSeq> gen_queries(const TaskSpec& spec, std::size_t n, Split split, Rng& rng);

// The expected final answer step (without separator or eos).
TokenSeq answer(const TaskSpec& spec, const TokenSeq& query);
// A worked multi-step solution ending in eos.
TokenSeq worked_solution(const TaskSpec& spec, const TokenSeq& query);

// True iff the response ends in eos, contains no earlier eos, and the tokens
// after the last step separator equal the answer.
bool check(const TaskSpec& spec, const TokenSeq& query, const TokenSeq& response);

// Base model for self-training: an n-gram table of smoothed log counts fit on
// worked solutions to pretrain-split queries. A `detour_rate` fraction of the
// corpus responses instead open with a one-symbol step (e.g. "+;") and trail
// off into `detour_steps` steps of random filler. Since the worked solutions spread
// their first token over many values while every detour starts the same way,
// greedy decoding of the base model takes the detour.
struct BaseModelOptions {
    int order = 2;
    int corpus_size = 2000;
    double detour_rate = 0.35;
    int detour_steps = 2;
    double smoothing = 0.5;
    std::uint64_t seed = 1;
};

TabularPolicy base_policy(const TaskSpec& spec, const BaseModelOptions& opts);

// Greedy decoding of a response, stopping at eos or max_tokens.
TokenSeq greedy_response(const TabularPolicy& policy, const TokenSeq& query, int max_tokens);

// Query corpus file: one query per line, rendered in the task alphabet.
void write_queries(const std::string& path, const TaskSpec& spec, const std::vector<TokenSeq>& queries);
std::vector<TokenSeq> read_queries(const std::string& path, const TaskSpec& spec);

}  // namespace genius::tasks
