#pragma once

#include <string>

#include "ddiff/config.hpp"
#include "ddiff/model.hpp"
#include "ddiff/tokenizer.hpp"

namespace ddiff {

// Plain-text checkpoint: a [config] section, the tokenizer charset, and the
// logits table with %.17g entries so reloads are bit-exact.
struct Checkpoint {
    RunConfig config;
    CharTokenizer tokenizer;
    ModelParams params;

    void save(const std::string & path) const;
    static Checkpoint load(const std::string & path);
    std::string serialize() const;
    static Checkpoint deserialize(const std::string & text);
};

}  // namespace ddiff
