#include "ddiff/losses.hpp"

#include <cmath>
#include <limits>

namespace ddiff {

const char * to_string(WeightKind k) {
    switch (k) {
        case WeightKind::cedd: return "cedd";
        case WeightKind::cedd_star: return "cedd_star";
        case WeightKind::custom: return "custom";
    }
    return "?";
}

WeightKind weight_kind_from_string(const std::string & s) {
    if (s == "cedd") return WeightKind::cedd;
    if (s == "cedd_star") return WeightKind::cedd_star;
    if (s == "custom") return WeightKind::custom;
    throw config_error("unknown weight schedule: " + s);
}

static double checked_log(std::span<const double> s, int idx) {
    const double v = s[static_cast<size_t>(idx)];
    if (v <= 0.0) {
        throw domain_error("sedd loss: nonpositive score at index " + std::to_string(idx));
    }
    return std::log(v);
}

double sedd_loss_position(const MatrixSpec & spec, double sigma, double sigma_prime,
                          std::span<const double> s_row, token_t x0, token_t xt, bool include_K) {
    if (spec.family == Family::eroulette) {
        throw config_error("sedd_loss_position: eroulette unsupported");
    }
    const int n = spec.n_states();
    if (static_cast<int>(s_row.size()) != n) throw domain_error("sedd loss: score row size mismatch");
    const TransitionCoeffs k = spec.coeffs(sigma, 0.0);

    switch (spec.family) {
        case Family::absorb: {
            if (xt != spec.mask_id()) return 0.0;  // unmoved token: every rate weight is zero
            // weights Q(n, y != n) = 1; ratio is (1-a)/a at y = x0, else 0
            double lin = 0.0;
            for (int y = 0; y < n - 1; ++y) lin += s_row[static_cast<size_t>(y)];
            const double ratio = (1.0 - k.a) / k.a;
            double loss = lin - ratio * checked_log(s_row, x0);
            if (include_K) loss += kernel_K(ratio);
            return sigma_prime * loss;
        }
        case Family::uniform: {
            const int V = n;
            const double w = 1.0 / V;
            double lin = 0.0;
            double logsum = 0.0;
            for (int y = 0; y < V; ++y) {
                if (y == xt) continue;
                lin += s_row[static_cast<size_t>(y)];
                logsum += checked_log(s_row, y);
            }
            double loss;
            if (xt == x0) {
                const double ratio = k.b / k.c;
                loss = lin - ratio * logsum;
                if (include_K) loss += (V - 1) * kernel_K(ratio);
            } else {
                const double ratio_k = k.c / k.b;
                loss = lin - (logsum + (ratio_k - 1.0) * checked_log(s_row, x0));
                if (include_K) loss += (V - 2) * kernel_K(1.0) + kernel_K(ratio_k);
            }
            return sigma_prime * w * loss;
        }
        case Family::roulette: {
            const token_t mask = spec.mask_id();
            if (xt == mask) {
                // weights Q(n, y != n) = p_m
                double lin = 0.0;
                double logsum = 0.0;
                for (int y = 0; y < n - 1; ++y) {
                    lin += s_row[static_cast<size_t>(y)];
                    logsum += checked_log(s_row, y);
                }
                const double logk = checked_log(s_row, x0);
                double loss = lin - ((k.b / k.a) * (logsum - logk) + (k.c / k.a) * logk);
                if (include_K) loss += (n - 2) * kernel_K(k.b / k.a) + kernel_K(k.c / k.a);
                return sigma_prime * spec.p_m * loss;
            }
            // unmasked: weights Q(xt, y) = (1-p_m)/(n-1) over non-mask y != xt
            const double w = (1.0 - spec.p_m) / (n - 1);
            if (w == 0.0) return 0.0;  // p_m = 1 degenerates to absorb's zero rows
            double lin = 0.0;
            double logsum = 0.0;
            for (int y = 0; y < n - 1; ++y) {
                if (y == xt) continue;
                lin += s_row[static_cast<size_t>(y)];
                logsum += checked_log(s_row, y);
            }
            double loss;
            if (xt == x0) {
                const double ratio = k.b / k.c;
                loss = lin - ratio * logsum;
                if (include_K) loss += (n - 2) * kernel_K(ratio);
            } else {
                const double ratio_k = k.c / k.b;
                loss = lin - (logsum + (ratio_k - 1.0) * checked_log(s_row, x0));
                if (include_K) loss += (n - 3) * kernel_K(1.0) + kernel_K(ratio_k);
            }
            return sigma_prime * w * loss;
        }
        default:
            throw config_error("sedd_loss_position: unsupported family");
    }
}

LossReport cedd_loss(const std::vector<std::vector<double>> & f, const TokenSequence & x0, double t,
                     const WeightSchedule & weights, const CeddLossOptions & opts) {
    if (f.size() != x0.size()) throw domain_error("cedd_loss: table/sequence size mismatch");
    LossReport r;
    r.t = t;
    r.weight = weights.weight(t);
    r.per_position.resize(x0.size());
    double sum = 0.0;
    for (size_t i = 0; i < x0.size(); ++i) {
        double p = f[i][static_cast<size_t>(x0[i])];
        if (p <= 0.0) {
            if (opts.clamp_zero_probs) {
                p = 1e-30;
            } else {
                r.hit_zero_prob = true;
                r.per_position[i] = std::numeric_limits<double>::infinity();
                sum = std::numeric_limits<double>::infinity();
                continue;
            }
        }
        r.per_position[i] = -std::log(p);
        sum += r.per_position[i];
    }
    r.total = r.weight * sum;
    return r;
}

}  // namespace ddiff
