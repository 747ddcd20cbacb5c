#pragma once

#include <vector>

#include "ddiff/losses.hpp"
#include "ddiff/model.hpp"
#include "ddiff/process.hpp"
#include "ddiff/rng.hpp"
#include "ddiff/schedule.hpp"

namespace ddiff {

enum class BoundKind { J1, J2 };

const char * to_string(BoundKind k);

struct BoundEstimate {
    BoundKind which = BoundKind::J2;
    double mean = 0.0;    // final per-token bound (constant included for J2)
    double stderr_of_mean = 0.0;
    int64_t n_samples = 0;
    double analytic_constant = 0.0;  // J2 only, already divided by L
    double perplexity = 0.0;         // exp(mean)
};

// Default evaluation window for the time integral.
inline constexpr double kEvalWindowLo = 0.018315638888734179;  // e^-4
inline constexpr double kEvalWindowHi = 1.0 - 0.018315638888734179;

// Closed-form H(p_r) - int_0^1 E sum_{y != x_t} Q_t(y, x_t) dt for the
// supported family/schedule pairings (whole-sequence value, length L).
double j2_constant(const MatrixSpec & spec, const NoiseSchedule & schedule, int L);

// One Monte Carlo draw of the per-token bound integrand at time t: corrupt
// x0, reconstruct scores, evaluate the grouped score-entropy sum. J1 keeps
// the K terms, J2 does not (its constant lives in j2_constant). Generation
// sigma-rescaling is never applied here.
double j1_integrand(const ScoreSource & source, const MatrixSpec & spec,
                    const NoiseSchedule & schedule, const TokenSequence & x0, double t, Rng & rng);
double j2_integrand(const ScoreSource & source, const MatrixSpec & spec,
                    const NoiseSchedule & schedule, const TokenSequence & x0, double t, Rng & rng);

enum class Batching { pooled, per_sequence };

struct EstimateOptions {
    Batching batching = Batching::pooled;
    int threads = 1;
    // per_sequence protocol: t draws per sequence, grouped into batches
    int per_sequence_draws = 1024;
    int per_sequence_batch = 16;
    bool stratified_t = false;  // variance reduction: stratify t over the window
    double t_lo = kEvalWindowLo;
    double t_hi = kEvalWindowHi;
};

// Monte Carlo estimate of a perplexity bound over a dataset. Deterministic
// for a given seed regardless of thread count: draws are partitioned into
// fixed chunks, each chunk owns a child RNG stream, and the reduction runs
// in chunk order.
BoundEstimate estimate_bound(BoundKind which, const ScoreSource & source, const MatrixSpec & spec,
                             const NoiseSchedule & schedule,
                             const std::vector<TokenSequence> & dataset, int64_t n_samples,
                             uint64_t seed, const EstimateOptions & opts = {});

}  // namespace ddiff
