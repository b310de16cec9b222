#pragma once

#include "genius/policy.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace testing {

inline const nlohmann::json& frozen() {
    static const nlohmann::json j = [] {
        std::ifstream in(GENIUS_FROZEN_PATH);
        std::stringstream ss;
        ss << in.rdbuf();
        return nlohmann::json::parse(ss.str());
    }();
    return j;
}

inline genius::TokenSeq key_of(const std::string& text) {
    genius::TokenSeq k;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) k.push_back(std::stoi(part));
    return k;
}

// The fixed tiny policy the reference values were computed on.
inline genius::TabularPolicy frozen_policy() {
    const auto& p = frozen().at("policy");
    genius::TabularPolicy policy(genius::Vocab{p.at("vocab").get<int>(), p.at("sep").get<int>(), p.at("eos").get<int>()},
                                 p.at("order").get<int>());
    for (const auto& [k, row] : p.at("rows").items()) policy.logits().set_row(key_of(k), row.get<std::vector<double>>());
    return policy;
}

inline genius::TabularPolicy uniform_policy(int size, int order = 2) {
    return genius::TabularPolicy(genius::Vocab{size, size - 2, size - 1}, order);
}

}  // namespace testing
