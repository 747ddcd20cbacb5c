#include "ddiff/scores.hpp"

#include <cmath>

namespace ddiff {

void validate_prob_table(const ProbTable & f, int V, double tol) {
    for (const auto & row : f) {
        if (static_cast<int>(row.size()) != V) throw domain_error("prob table: wrong row width");
        double sum = 0.0;
        for (double v : row) {
            if (v < 0.0) throw domain_error("prob table: negative entry");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > tol) throw domain_error("prob table: row does not sum to 1");
    }
}

std::vector<double> probs_to_scores(std::span<const double> f_row, const MatrixSpec & spec,
                                    double sigma, double t, token_t xt) {
    const int n = spec.n_states();
    const int V = spec.vocab.V;
    if (static_cast<int>(f_row.size()) != V) throw domain_error("probs_to_scores: row width mismatch");
    if (sigma <= 0.0) throw domain_error("probs_to_scores: sigma must be positive");

    const TransitionCoeffs k = spec.coeffs(sigma, t);
    std::vector<double> s(static_cast<size_t>(n), 0.0);

    switch (spec.family) {
        case Family::absorb: {
            if (xt != spec.mask_id()) {
                throw unreachable_state_error(
                    "probs_to_scores: absorb scores are defined only at masked positions");
            }
            const double inv = 1.0 / (std::exp(sigma) - 1.0);
            for (int y = 0; y < V; ++y) s[static_cast<size_t>(y)] = f_row[static_cast<size_t>(y)] * inv;
            s[static_cast<size_t>(spec.mask_id())] = 1.0;
            break;
        }
        case Family::uniform: {
            const double cb = k.c / k.b;
            const double bc = k.b / k.c;
            const double shift = f_row[static_cast<size_t>(xt)] * (bc - 1.0);
            for (int y = 0; y < V; ++y) {
                s[static_cast<size_t>(y)] = 1.0 + f_row[static_cast<size_t>(y)] * (cb - 1.0) + shift;
            }
            s[static_cast<size_t>(xt)] = 1.0;
            break;
        }
        case Family::roulette:
        case Family::eroulette: {
            const token_t mask = spec.mask_id();
            if (xt == mask) {
                // mixture of b/a (origin elsewhere) and c/a (origin = y)
                const double base = k.b / k.a;
                const double slope = (k.c - k.b) / k.a;
                for (int y = 0; y < V; ++y) {
                    s[static_cast<size_t>(y)] = base + f_row[static_cast<size_t>(y)] * slope;
                }
                s[static_cast<size_t>(mask)] = 1.0;
            } else {
                const double cb = k.c / k.b;
                const double bc = k.b / k.c;
                const double fxt = f_row[static_cast<size_t>(xt)];
                const double shift = fxt * (bc - 1.0);
                for (int y = 0; y < V; ++y) {
                    s[static_cast<size_t>(y)] = 1.0 + f_row[static_cast<size_t>(y)] * (cb - 1.0) + shift;
                }
                s[static_cast<size_t>(xt)] = 1.0;
                // ratio toward the mask: never consulted by kernels or
                // samplers, but defined by the same mixture
                s[static_cast<size_t>(mask)] = k.a * ((1.0 - fxt) / k.b + fxt / k.c);
            }
            break;
        }
    }
    return s;
}

double sedd_scale_factor(const MatrixSpec & spec, double sigma, double t, token_t xt, token_t y) {
    if (sigma <= 0.0) throw domain_error("sedd_scale_factor: sigma must be positive");
    const int n = spec.n_states();
    switch (spec.family) {
        case Family::absorb:
            return 1.0 / ((n - 1) * (std::exp(sigma) - 1.0));
        case Family::uniform: {
            const double e = std::exp(sigma) - 1.0;
            return 1.0 + 1.0 / e - 1.0 / (e + n);
        }
        case Family::roulette:
        case Family::eroulette: {
            const double pm = spec.p_m_at(t);
            if (xt == spec.mask_id()) {
                return 1.0 / ((n - 1) * (std::exp(sigma * pm) - 1.0));
            }
            (void)y;
            const double e = std::exp((1.0 - pm) * sigma) - 1.0;
            return 1.0 + 1.0 / e - 1.0 / (e + n - 1);
        }
    }
    return 1.0;
}

double rescale_sigma_for_generation(Family family, double sigma) {
    switch (family) {
        case Family::uniform:
            return sigma < 0.0015 ? 0.0015 : sigma;
        case Family::roulette:
        case Family::eroulette:
            return sigma < 0.5 ? std::log(1.1 * sigma + 1.1) : sigma;
        case Family::absorb:
            return sigma;
    }
    return sigma;
}

}  // namespace ddiff
