#pragma once

#include <optional>
#include <vector>

#include "ddiff/model.hpp"
#include "ddiff/process.hpp"
#include "ddiff/rng.hpp"
#include "ddiff/schedule.hpp"

namespace ddiff {

enum class SamplerKind { euler, analytic };

const char * to_string(SamplerKind k);
SamplerKind sampler_kind_from_string(const std::string & s);

struct SamplerConfig {
    SamplerKind kind = SamplerKind::analytic;
    int steps = 128;
    int L = 32;
    uint64_t seed = 0;
    std::optional<TokenSequence> prefix;  // clamped after every step
    bool use_sigma_rescale = false;       // CEDD-mode generation rescaling
    double t_lo = 0.018315638888734179;   // e^-4
    double t_hi = 1.0 - 0.018315638888734179;

    void validate() const {
        if (steps < 1) throw config_error("sampler: steps must be >= 1");
        if (L < 1) throw config_error("sampler: L must be >= 1");
        if (prefix && static_cast<int>(prefix->size()) >= L) {
            throw config_error("sampler: prefix must be shorter than L");
        }
    }
};

struct Trajectory {
    // (steps+1) x L states; mask families append one more for the final
    // noise-removal step.
    std::vector<TokenSequence> states;
    std::vector<int> unmask_step;  // first step at which a position left the mask, -1 if never
    int64_t clamped_rows = 0;      // per-position categoricals that needed clamping
};

// One tau-leaping Euler step: every position draws from
// {stay} + sigma'(t) Q^tok(x^i, y) s[y] dt simultaneously. Negative stay
// mass is clamped to zero and the row renormalized.
TokenSequence euler_step(const ScoreTable & s, const MatrixSpec & spec, double sigma,
                         double sigma_prime, double dt, const TokenSequence & xt, Rng & rng,
                         int64_t * clamp_counter = nullptr);

// One analytic step over the noise interval sigma_delta = sigma_t - sigma_prev:
//   p(x_prev | x_t) propto exp(sigma_delta Q)(x_t, x_prev)
//                        * sum_y exp(-sigma_delta Q)(x_prev, y) s[y]
// with the grouped per-family sums; negative sums are clamped at zero, and an
// all-zero row falls back to staying put.
TokenSequence analytic_step(const ScoreTable & s, const MatrixSpec & spec, double sigma_t,
                            double sigma_prev, double t, const TokenSequence & xt, Rng & rng,
                            int64_t * clamp_counter = nullptr);

struct GenerateResult {
    TokenSequence sequence;
    Trajectory trajectory;
};

// Full reverse-process generation on a uniform time grid from t_hi down to
// t_lo, starting from the reference distribution.
GenerateResult generate(const ScoreSource & source, const SamplerConfig & cfg,
                        const MatrixSpec & spec, const NoiseSchedule & schedule);

// Fraction of positions whose final token differs from the token first
// revealed at unmasking (positions never unmasked count as uncorrected).
double count_corrections(const Trajectory & traj, const MatrixSpec & spec);

}  // namespace ddiff
