#pragma once

#include <span>
#include <vector>

#include "ddiff/process.hpp"
#include "ddiff/types.hpp"

namespace ddiff {

// Row tables addressed [position][token]. ProbTable rows are simplices over
// the V data tokens; ScoreTable rows are nonnegative ratio estimates over
// all n states with the own-token entry fixed at 1.
using ProbTable = std::vector<std::vector<double>>;
using ScoreTable = std::vector<std::vector<double>>;

void validate_prob_table(const ProbTable & f, int V, double tol = 1e-9);

// Reconstruct a score row from a probability row via the conditional-ratio
// mixture, using the per-family grouped forms. For absorb the unmasked case
// is unreachable (the forward process cannot move between two distinct
// non-mask states) and throws.
std::vector<double> probs_to_scores(std::span<const double> f_row, const MatrixSpec & spec,
                                    double sigma, double t, token_t xt);

// Average conditional ratio sum_h (1/V) p(y|h)/p(xt|h) in closed form; the
// additive-log output scaling of score-entropy training.
double sedd_scale_factor(const MatrixSpec & spec, double sigma, double t, token_t xt, token_t y);

// Generation-time floor/compression of sigma used inside ratio
// reconstruction only, never inside bound evaluation.
double rescale_sigma_for_generation(Family family, double sigma);

}  // namespace ddiff
