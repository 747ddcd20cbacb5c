#pragma once

#include <map>
#include <optional>
#include <string>

#include "ddiff/losses.hpp"
#include "ddiff/model.hpp"
#include "ddiff/process.hpp"
#include "ddiff/samplers.hpp"
#include "ddiff/schedule.hpp"

namespace ddiff {

// Flat key-value run configuration; embedded verbatim in every output
// artifact and round-trips bit-exactly (doubles serialized with %.17g).
struct RunConfig {
    Family family = Family::absorb;
    double p_m = 0.95;
    double eroulette_a = 4.0;
    ScheduleKind schedule = ScheduleKind::loglinear;
    double eps = 0.001;
    double sigma_min = 0.001;
    double sigma_max = 10.0;
    int V = 0;  // 0 = derive from corpus charset
    int L = 32;
    int buckets = 32;
    WeightKind weighting = WeightKind::cedd;
    ModelMode loss_mode = ModelMode::cedd;
    SamplerKind sampler = SamplerKind::analytic;
    int steps = 128;
    uint64_t seed = 1;
    int threads = 1;
    int64_t n_samples = 20000;
    int epochs = 4;
    int batch_size = 32;
    double lr = 0.5;
    std::string optimizer = "adam";
    double spellcheck_t = 0.15;
    bool spellcheck_replace_all = false;
    bool clamp_zero_probs = false;
    bool stratified_t = false;
    bool per_sequence_batching = false;

    MatrixSpec matrix_spec() const;
    NoiseSchedule noise_schedule() const;
    WeightSchedule weight_schedule() const { return {weighting, nullptr}; }

    void validate() const;

    std::map<std::string, std::string> to_map() const;
    static RunConfig from_map(const std::map<std::string, std::string> & kv);

    std::string serialize(const std::string & section = "config") const;
    static RunConfig parse(const std::string & text, const std::string & section = "config");
};

std::string format_double(double v);

// Build identifier embedded in every output artifact.
const char * build_id();

}  // namespace ddiff
