#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "ddiff/process.hpp"
#include "ddiff/types.hpp"

namespace ddiff {

// Score-entropy kernels. K(0) = 0 by the a log a convention.
inline double kernel_K(double a) {
    if (a < 0.0) throw domain_error("kernel_K: a must be nonnegative");
    return a == 0.0 ? 0.0 : a * (std::log(a) - 1.0);
}

inline double kernel_ell_bar(double a, double b) {
    if (b <= 0.0) throw domain_error("kernel_ell_bar: b must be positive");
    return b - a * std::log(b);
}

inline double kernel_ell(double a, double b) {
    return kernel_ell_bar(a, b) + kernel_K(a);
}

enum class WeightKind {
    cedd,       // w(t) = 1
    cedd_star,  // w(t) = log(e + 0.3/t)
    custom,
};

struct WeightSchedule {
    WeightKind kind = WeightKind::cedd;
    double (*custom_fn)(double t) = nullptr;

    double weight(double t) const {
        switch (kind) {
            case WeightKind::cedd: return 1.0;
            case WeightKind::cedd_star: return std::log(std::exp(1.0) + 0.3 / t);
            case WeightKind::custom: return custom_fn ? custom_fn(t) : 1.0;
        }
        return 1.0;
    }
};

const char * to_string(WeightKind k);
WeightKind weight_kind_from_string(const std::string & s);

struct LossReport {
    double total = 0.0;
    std::vector<double> per_position;  // unweighted negative logs
    double weight = 1.0;
    double t = 0.0;
    bool hit_zero_prob = false;
};

// Score-entropy loss of a single position, computed with the per-family
// grouped sums instead of a full-vocabulary pass. Equals
//   sigma' * sum_{y != xt} Q^tok(xt, y) ell(cond_ratio(y, xt | x0), s[y])
// with ell_bar when include_K is false. eroulette is rejected (its rate
// weights are time-inhomogeneous).
double sedd_loss_position(const MatrixSpec & spec, double sigma, double sigma_prime,
                          std::span<const double> s_row, token_t x0, token_t xt, bool include_K);

struct CeddLossOptions {
    bool clamp_zero_probs = false;  // clamp f at 1e-30 instead of returning inf
};

// L_ll of one sequence: -w(t) * sum_i log f[i][x0^i].
LossReport cedd_loss(const std::vector<std::vector<double>> & f, const TokenSequence & x0, double t,
                     const WeightSchedule & weights, const CeddLossOptions & opts = {});

}  // namespace ddiff
