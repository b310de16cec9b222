#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace genius {

using Token = std::int32_t;
using TokenSeq = std::vector<Token>;

// Bad caller input: invalid token ids, empty sequences, malformed configs.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An exhaustive oracle was asked for more than its hard cap.
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A self-training round produced no usable preference data.
class RoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline TokenSeq concat(const TokenSeq& a, const TokenSeq& b) {
    TokenSeq out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace genius
