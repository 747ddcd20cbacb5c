#include "ddiff/process.hpp"

#include <cmath>

namespace ddiff {

const char * to_string(Family f) {
    switch (f) {
        case Family::uniform: return "uniform";
        case Family::absorb: return "absorb";
        case Family::roulette: return "roulette";
        case Family::eroulette: return "eroulette";
    }
    return "?";
}

Family family_from_string(const std::string & s) {
    if (s == "uniform") return Family::uniform;
    if (s == "absorb") return Family::absorb;
    if (s == "roulette") return Family::roulette;
    if (s == "eroulette") return Family::eroulette;
    throw config_error("unknown family: " + s);
}

void MatrixSpec::validate() const {
    vocab.validate();
    if (family == Family::uniform) {
        if (vocab.has_mask) throw config_error("uniform family requires has_mask=false");
    } else {
        if (!vocab.has_mask) throw config_error(std::string(to_string(family)) + " family requires has_mask=true");
    }
    if (family == Family::roulette && !(p_m >= 0.0 && p_m <= 1.0)) {
        throw config_error("roulette p_m must be in [0,1]");
    }
    if (family == Family::eroulette && !(eroulette_a > 0.0)) {
        throw config_error("eroulette_a must be positive");
    }
}

double MatrixSpec::p_m_at(double t) const {
    switch (family) {
        case Family::uniform: return 0.0;
        case Family::absorb: return 1.0;
        case Family::roulette: return p_m;
        case Family::eroulette:
            if (t <= 0.0) return 0.0;
            if (t >= 1.0) return 1.0;
            return std::exp(std::log(t) / (eroulette_a * t));
    }
    return 1.0;
}

TransitionCoeffs MatrixSpec::coeffs(double sigma, double t) const {
    TransitionCoeffs k;
    switch (family) {
        case Family::uniform: {
            const int V = vocab.V;
            k.a = 0.0;
            k.b = (1.0 / V) * (1.0 - std::exp(-sigma));
            k.c = 1.0 - (V - 1) * k.b;
            break;
        }
        case Family::absorb: {
            k.a = 1.0 - std::exp(-sigma);
            k.b = 0.0;
            k.c = std::exp(-sigma);
            break;
        }
        case Family::roulette:
        case Family::eroulette: {
            const int n = n_states();
            const double pm = p_m_at(t);
            const double em = std::exp(-sigma * pm);
            const double eu = std::exp(-(1.0 - pm) * sigma);
            k.a = 1.0 - em;
            k.b = em * (1.0 / (n - 1)) * (1.0 - eu);
            k.c = em * (1.0 - (double)(n - 2) / (n - 1) * (1.0 - eu));
            break;
        }
    }
    return k;
}

double MatrixSpec::transition_prob(double sigma, double t, token_t to, token_t from) const {
    const int n = n_states();
    if (to < 0 || to >= n || from < 0 || from >= n) {
        throw domain_error("transition_prob: token id out of range");
    }
    if (family == Family::uniform) {
        const TransitionCoeffs k = coeffs(sigma, t);
        return to == from ? k.c : k.b;
    }
    const token_t mask = mask_id();
    if (from == mask) return to == mask ? 1.0 : 0.0;
    const TransitionCoeffs k = coeffs(sigma, t);
    if (to == mask) return k.a;
    if (to == from) return k.c;
    if (family == Family::absorb) return 0.0;
    return k.b;
}

double MatrixSpec::rate_weight(double /*t*/, token_t x, token_t y) const {
    const int n = n_states();
    if (x == y) throw domain_error("rate_weight: x == y");
    switch (family) {
        case Family::uniform:
            return 1.0 / vocab.V;
        case Family::absorb:
            // Row x of Q_abs is zero off the diagonal unless x is the mask.
            if (x == mask_id()) return 1.0;
            return 0.0;
        case Family::roulette: {
            if (x == mask_id()) return p_m;
            if (y == mask_id()) return 0.0;
            return (1.0 - p_m) / (n - 1);
        }
        case Family::eroulette: {
            // Q(t) = d/dt[(1-p_m(t)) sigma(t)] Q_unif + d/dt[p_m(t) sigma(t)] Q_abs,
            // with the rates expressed per unit sigma by the caller. Loss and
            // bound kernels reject eroulette before reaching here.
            throw config_error("rate_weight: eroulette rates are time-inhomogeneous; unsupported");
        }
    }
    return 0.0;
}

double MatrixSpec::outflow_rate(double /*t*/, token_t x) const {
    const int n = n_states();
    switch (family) {
        case Family::uniform:
            return 1.0 - 1.0 / vocab.V;
        case Family::absorb:
            return x == mask_id() ? 0.0 : 1.0;
        case Family::roulette:
            if (x == mask_id()) return 0.0;
            return 1.0 - (1.0 - p_m) / (n - 1);
        case Family::eroulette:
            throw config_error("outflow_rate: unsupported for eroulette");
    }
    return 0.0;
}

double MatrixSpec::conditional_ratio(double sigma, double t, token_t y, token_t x, token_t h) const {
    if (has_mask() && h == mask_id()) {
        throw domain_error("conditional_ratio: h must be a non-mask token");
    }
    const double den = transition_prob(sigma, t, x, h);
    if (den == 0.0) {
        throw unreachable_state_error("conditional_ratio: p(x|h) = 0 (unreachable state)");
    }
    if (y == x) return 1.0;
    return transition_prob(sigma, t, y, h) / den;
}

std::vector<double> MatrixSpec::reference_distribution() const {
    std::vector<double> p(n_states(), 0.0);
    if (family == Family::uniform) {
        for (double & v : p) v = 1.0 / vocab.V;
    } else {
        p[mask_id()] = 1.0;
    }
    return p;
}

TokenSequence MatrixSpec::sample_reference(int L, Rng & rng) const {
    TokenSequence x(L);
    for (int i = 0; i < L; ++i) {
        x[i] = family == Family::uniform ? static_cast<token_t>(rng.uniform_int(vocab.V))
                                         : mask_id();
    }
    return x;
}

token_t MatrixSpec::corrupt_token(token_t x0, double sigma, double t, Rng & rng) const {
    const int V = vocab.V;
    const TransitionCoeffs k = coeffs(sigma, t);
    const double u = rng.uniform();
    if (family == Family::uniform) {
        if (u < k.c) return x0;
        // remaining mass (V-1) * b, uniform over the other tokens
        int j = static_cast<int>((u - k.c) / k.b);
        if (j >= V - 1) j = V - 2;
        return static_cast<token_t>(j < x0 ? j : j + 1);
    }
    if (u < k.a) return mask_id();
    if (family == Family::absorb || u < k.a + k.c) return x0;
    int j = static_cast<int>((u - k.a - k.c) / k.b);
    if (j >= V - 1) j = V - 2;
    return static_cast<token_t>(j < x0 ? j : j + 1);
}

TokenSequence MatrixSpec::corrupt_sequence(const TokenSequence & x0, double t,
                                           const NoiseSchedule & schedule, Rng & rng) const {
    validate_sequence(x0, vocab, /*allow_mask=*/false);
    const double sigma = schedule.eval(t).sigma;
    TokenSequence xt(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
        xt[i] = corrupt_token(x0[i], sigma, t, rng);
    }
    return xt;
}

double MatrixSpec::mask_hit_probability(double sigma_total) const {
    if (family != Family::roulette) {
        throw config_error("mask_hit_probability: roulette family only");
    }
    const int n = n_states();
    const double s1 = sigma_total;
    return (double)(n - 2) / (n - 1) *
           (std::exp(-s1) * p_m - std::exp(-s1 * p_m) + 1.0 - p_m);
}

}  // namespace ddiff
