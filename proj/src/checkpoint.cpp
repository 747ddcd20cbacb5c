#include "ddiff/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace ddiff {

static std::string escape_charset(const std::string & s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            case '\\': out += "\\\\"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

static std::string unescape_charset(const std::string & s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            ++i;
            switch (s[i]) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case '\\': out.push_back('\\'); break;
                default: out.push_back(s[i]);
            }
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string Checkpoint::serialize() const {
    std::ostringstream out;
    out << "ddiff-checkpoint v1\n";
    out << "# build = " << build_id() << "\n";
    out << config.serialize();
    out << "[tokenizer]\n";
    out << "charset = " << escape_charset(tokenizer.charset) << "\n";
    out << "has_unk = " << (tokenizer.has_unk ? 1 : 0) << "\n";
    out << "[model]\n";
    out << "mode = " << to_string(params.mode) << "\n";
    out << "n_obs = " << params.n_obs << "\n";
    out << "V = " << params.V << "\n";
    out << "B = " << params.B << "\n";
    out << "logits =";
    for (double v : params.logits) out << " " << format_double(v);
    out << "\n";
    return out.str();
}

void Checkpoint::save(const std::string & path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot write checkpoint: " + path);
    f << serialize();
}

Checkpoint Checkpoint::deserialize(const std::string & text) {
    Checkpoint ck;
    ck.config = RunConfig::parse(text);
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            section = line;
            continue;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        if (section == "[tokenizer]" || section == "[model]") {
            kv[line.substr(0, eq)] = line.substr(eq + 3);
        }
    }
    ck.tokenizer.charset = unescape_charset(kv.at("charset"));
    ck.tokenizer.has_unk = kv.at("has_unk") == "1";
    ck.params.mode = model_mode_from_string(kv.at("mode"));
    ck.params.n_obs = std::stoi(kv.at("n_obs"));
    ck.params.V = std::stoi(kv.at("V"));
    ck.params.B = std::stoi(kv.at("B"));
    {
        std::istringstream ls(kv.at("logits"));
        double v;
        while (ls >> v) ck.params.logits.push_back(v);
    }
    const size_t expect = static_cast<size_t>(ck.params.n_obs) * ck.params.B * ck.params.V;
    if (ck.params.logits.size() != expect) {
        throw config_error("checkpoint: logits table size mismatch");
    }
    return ck;
}

Checkpoint Checkpoint::load(const std::string & path) {
    return deserialize(read_text_file(path));
}

}  // namespace ddiff
