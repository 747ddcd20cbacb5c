#pragma once

#include <string>
#include <vector>

#include "ddiff/types.hpp"

namespace ddiff {

// Character-level tokenizer. The charset is the sorted set of unique bytes
// seen when building; unknown bytes map to a reserved UNK id (the last data
// token) and are counted.
struct CharTokenizer {
    std::string charset;  // sorted unique characters; id = index
    bool has_unk = false;

    static CharTokenizer build(const std::string & text, bool with_unk = true);

    int vocab_size() const { return static_cast<int>(charset.size()) + (has_unk ? 1 : 0); }
    token_t unk_id() const { return static_cast<token_t>(charset.size()); }

    struct EncodeResult {
        TokenSequence ids;
        int64_t unknown_count = 0;
    };
    EncodeResult encode(const std::string & text) const;
    std::string decode(const TokenSequence & ids) const;
};

struct Corpus {
    CharTokenizer tokenizer;
    std::vector<TokenSequence> sequences;  // fixed length L each
    int L = 0;
    int64_t chars_total = 0;
    int64_t chars_dropped = 0;  // trailing remainder
    int64_t unknown_count = 0;

    // Chunk text into length-L sequences, dropping the remainder.
    static Corpus from_text(const std::string & text, int L);
    static Corpus from_text(const std::string & text, int L, const CharTokenizer & tok);
    static Corpus from_file(const std::string & path, int L);
};

std::string read_text_file(const std::string & path);

}  // namespace ddiff
