#include "ddiff/config.hpp"

#include <cstdio>
#include <sstream>

namespace ddiff {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

#ifndef DDIFF_GIT_REV
#define DDIFF_GIT_REV "unknown"
#endif

const char * build_id() {
    return "ddiff 0.1.0 (" DDIFF_GIT_REV ")";
}

MatrixSpec RunConfig::matrix_spec() const {
    MatrixSpec spec;
    spec.family = family;
    spec.vocab = {V, family != Family::uniform};
    spec.p_m = p_m;
    spec.eroulette_a = eroulette_a;
    return spec;
}

NoiseSchedule RunConfig::noise_schedule() const {
    NoiseSchedule s;
    s.kind = schedule;
    s.eps = eps;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.p_m = p_m;
    return s;
}

void RunConfig::validate() const {
    matrix_spec().validate();
    noise_schedule().validate();
    // reject the family/schedule pairings that have no analytic J2 constant
    if (family == Family::absorb && schedule != ScheduleKind::loglinear) {
        throw config_error("absorb family requires the loglinear schedule");
    }
    if (family == Family::roulette && schedule != ScheduleKind::roulette_loglinear) {
        throw config_error("roulette family requires the roulette_loglinear schedule");
    }
    if (family == Family::roulette && !(p_m > 0.0 && p_m <= 1.0)) {
        throw config_error("roulette p_m must be in (0,1]");
    }
    if (L < 1) throw config_error("L must be >= 1");
    if (buckets < 1) throw config_error("buckets must be >= 1");
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> kv;
    kv["family"] = to_string(family);
    kv["p_m"] = format_double(p_m);
    kv["eroulette_a"] = format_double(eroulette_a);
    kv["schedule"] = to_string(schedule);
    kv["eps"] = format_double(eps);
    kv["sigma_min"] = format_double(sigma_min);
    kv["sigma_max"] = format_double(sigma_max);
    kv["V"] = std::to_string(V);
    kv["L"] = std::to_string(L);
    kv["buckets"] = std::to_string(buckets);
    kv["weighting"] = to_string(weighting);
    kv["loss_mode"] = to_string(loss_mode);
    kv["sampler"] = to_string(sampler);
    kv["steps"] = std::to_string(steps);
    kv["seed"] = std::to_string(seed);
    kv["threads"] = std::to_string(threads);
    kv["n_samples"] = std::to_string(n_samples);
    kv["epochs"] = std::to_string(epochs);
    kv["batch_size"] = std::to_string(batch_size);
    kv["lr"] = format_double(lr);
    kv["optimizer"] = optimizer;
    kv["spellcheck_t"] = format_double(spellcheck_t);
    kv["spellcheck_replace_all"] = spellcheck_replace_all ? "1" : "0";
    kv["clamp_zero_probs"] = clamp_zero_probs ? "1" : "0";
    kv["stratified_t"] = stratified_t ? "1" : "0";
    kv["per_sequence_batching"] = per_sequence_batching ? "1" : "0";
    return kv;
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string> & kv) {
    RunConfig c;
    auto get = [&](const char * k) -> std::optional<std::string> {
        auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };
    if (auto v = get("family")) c.family = family_from_string(*v);
    if (auto v = get("p_m")) c.p_m = std::stod(*v);
    if (auto v = get("eroulette_a")) c.eroulette_a = std::stod(*v);
    if (auto v = get("schedule")) c.schedule = schedule_kind_from_string(*v);
    if (auto v = get("eps")) c.eps = std::stod(*v);
    if (auto v = get("sigma_min")) c.sigma_min = std::stod(*v);
    if (auto v = get("sigma_max")) c.sigma_max = std::stod(*v);
    if (auto v = get("V")) c.V = std::stoi(*v);
    if (auto v = get("L")) c.L = std::stoi(*v);
    if (auto v = get("buckets")) c.buckets = std::stoi(*v);
    if (auto v = get("weighting")) c.weighting = weight_kind_from_string(*v);
    if (auto v = get("loss_mode")) c.loss_mode = model_mode_from_string(*v);
    if (auto v = get("sampler")) c.sampler = sampler_kind_from_string(*v);
    if (auto v = get("steps")) c.steps = std::stoi(*v);
    if (auto v = get("seed")) c.seed = std::stoull(*v);
    if (auto v = get("threads")) c.threads = std::stoi(*v);
    if (auto v = get("n_samples")) c.n_samples = std::stoll(*v);
    if (auto v = get("epochs")) c.epochs = std::stoi(*v);
    if (auto v = get("batch_size")) c.batch_size = std::stoi(*v);
    if (auto v = get("lr")) c.lr = std::stod(*v);
    if (auto v = get("optimizer")) c.optimizer = *v;
    if (auto v = get("spellcheck_t")) c.spellcheck_t = std::stod(*v);
    if (auto v = get("spellcheck_replace_all")) c.spellcheck_replace_all = *v == "1";
    if (auto v = get("clamp_zero_probs")) c.clamp_zero_probs = *v == "1";
    if (auto v = get("stratified_t")) c.stratified_t = *v == "1";
    if (auto v = get("per_sequence_batching")) c.per_sequence_batching = *v == "1";
    return c;
}

std::string RunConfig::serialize(const std::string & section) const {
    std::ostringstream out;
    out << "[" << section << "]\n";
    for (const auto & [k, v] : to_map()) out << k << " = " << v << "\n";
    return out.str();
}

RunConfig RunConfig::parse(const std::string & text, const std::string & section) {
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> kv;
    bool in_section = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            in_section = line == "[" + section + "]";
            continue;
        }
        if (!in_section) continue;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return from_map(kv);
}

}  // namespace ddiff
