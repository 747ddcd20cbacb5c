#include "ddiff/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ddiff {

CharTokenizer CharTokenizer::build(const std::string & text, bool with_unk) {
    if (text.empty()) throw config_error("tokenizer: empty corpus");
    std::set<char> uniq(text.begin(), text.end());
    CharTokenizer tok;
    tok.charset.assign(uniq.begin(), uniq.end());
    tok.has_unk = with_unk;
    return tok;
}

CharTokenizer::EncodeResult CharTokenizer::encode(const std::string & text) const {
    EncodeResult out;
    out.ids.reserve(text.size());
    for (char c : text) {
        const auto it = std::lower_bound(charset.begin(), charset.end(), c);
        if (it != charset.end() && *it == c) {
            out.ids.push_back(static_cast<token_t>(it - charset.begin()));
        } else {
            if (!has_unk) throw domain_error("tokenizer: character outside charset and no UNK");
            out.ids.push_back(unk_id());
            ++out.unknown_count;
        }
    }
    return out;
}

std::string CharTokenizer::decode(const TokenSequence & ids) const {
    std::string out;
    out.reserve(ids.size());
    for (token_t id : ids) {
        if (id >= 0 && id < static_cast<token_t>(charset.size())) {
            out.push_back(charset[static_cast<size_t>(id)]);
        } else {
            out.push_back('?');  // UNK or mask
        }
    }
    return out;
}

Corpus Corpus::from_text(const std::string & text, int L) {
    return from_text(text, L, CharTokenizer::build(text, /*with_unk=*/true));
}

Corpus Corpus::from_text(const std::string & text, int L, const CharTokenizer & tok) {
    if (L < 1) throw config_error("corpus: L must be >= 1");
    Corpus c;
    c.tokenizer = tok;
    c.L = L;
    c.chars_total = static_cast<int64_t>(text.size());
    auto enc = tok.encode(text);
    c.unknown_count = enc.unknown_count;
    const size_t n_seq = enc.ids.size() / static_cast<size_t>(L);
    c.chars_dropped = static_cast<int64_t>(enc.ids.size() - n_seq * static_cast<size_t>(L));
    c.sequences.reserve(n_seq);
    for (size_t s = 0; s < n_seq; ++s) {
        c.sequences.emplace_back(enc.ids.begin() + static_cast<long>(s) * L,
                                 enc.ids.begin() + static_cast<long>(s + 1) * L);
    }
    if (c.sequences.empty()) throw config_error("corpus: shorter than one sequence");
    return c;
}

Corpus Corpus::from_file(const std::string & path, int L) {
    return from_text(read_text_file(path), L);
}

std::string read_text_file(const std::string & path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace ddiff
