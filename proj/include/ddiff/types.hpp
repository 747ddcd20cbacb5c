#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddiff {

// Token ids are 0-based in storage; the mask id, when present, is always the
// last state (n - 1). User-facing documentation counts from 1.
using token_t = int32_t;
using TokenSequence = std::vector<token_t>;

struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

// Thrown when a conditional ratio divides by an exactly-zero transition
// probability (e.g. absorb with an unmasked token that differs from its
// origin). Loss kernels are structured so they never consult such entries.
struct unreachable_state_error : std::domain_error {
    using std::domain_error::domain_error;
};

struct VocabSpec {
    int V = 0;            // number of data tokens
    bool has_mask = false;

    int n() const { return has_mask ? V + 1 : V; }
    token_t mask_id() const { return V; }  // only meaningful when has_mask

    void validate() const {
        if (V < 2) {
            throw config_error("VocabSpec: V must be >= 2, got " + std::to_string(V));
        }
    }
};

inline void validate_sequence(const TokenSequence & x, const VocabSpec & vocab, bool allow_mask) {
    const int n = vocab.n();
    for (token_t id : x) {
        if (id < 0 || id >= n) {
            throw domain_error("token id out of range: " + std::to_string(id));
        }
        if (!allow_mask && vocab.has_mask && id == vocab.mask_id()) {
            throw domain_error("mask id not allowed in clean data");
        }
    }
}

}  // namespace ddiff
