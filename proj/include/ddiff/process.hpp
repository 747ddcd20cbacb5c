#pragma once

#include <string>

#include "ddiff/rng.hpp"
#include "ddiff/schedule.hpp"
#include "ddiff/types.hpp"

namespace ddiff {

enum class Family {
    uniform,
    absorb,
    roulette,
    eroulette,
};

const char * to_string(Family f);
Family family_from_string(const std::string & s);

// Per-token transition probabilities over a noise interval, grouped by role.
// For families with a mask state: a = P(mask | non-mask), b = P(other
// non-mask | non-mask), c = P(stay | non-mask). For uniform there is no
// mask and a = 0. All entries of exp(sigma Q) are one of {a, b, c, 0, 1}.
struct TransitionCoeffs {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

// A transition-rate matrix family over the token state space. Entries of
// exp(sigma Q) are produced lazily from closed forms; dense matrices exist
// only inside the oracle.
struct MatrixSpec {
    Family family = Family::absorb;
    VocabSpec vocab;
    double p_m = 1.0;        // roulette only
    double eroulette_a = 4.0;  // eroulette: p_m(t) = t^(1/(a t))

    void validate() const;

    int n_states() const { return vocab.n(); }
    token_t mask_id() const { return vocab.mask_id(); }
    bool has_mask() const { return vocab.has_mask; }

    // Mask probability p_m, resolved at time t for eroulette.
    double p_m_at(double t) const;

    // Grouped entries of exp(sigma Q^tok); sigma may be negative (used by the
    // analytic sampler, where the rows are no longer probabilities).
    TransitionCoeffs coeffs(double sigma, double t) const;

    // exp(sigma Q^tok)(to, from) == p_{t|0}(to | from).
    double transition_prob(double sigma, double t, token_t to, token_t from) const;

    // Q^tok(x, y): the rate weight attached to a reverse move toward y when
    // sitting at x (the w_{x,y} of the score-entropy loss).
    double rate_weight(double t, token_t x, token_t y) const;

    // Total outflow rate from state x: sum_{y != x} Q^tok(y, x).
    double outflow_rate(double t, token_t x) const;

    // p_{t|0}(y | h) / p_{t|0}(x | h), h a non-mask token. Throws
    // unreachable_state_error when the denominator is exactly zero.
    double conditional_ratio(double sigma, double t, token_t y, token_t x, token_t h) const;

    // The t=1 reference distribution: one-hot at mask, or uniform over V.
    std::vector<double> reference_distribution() const;

    TokenSequence sample_reference(int L, Rng & rng) const;

    // Forward corruption of a clean sequence at time t.
    TokenSequence corrupt_sequence(const TokenSequence & x0, double t,
                                   const NoiseSchedule & schedule, Rng & rng) const;
    token_t corrupt_token(token_t x0, double sigma, double t, Rng & rng) const;

    // Probability that a roulette token is displaced from its origin at the
    // moment it gets masked, for total noise sigma_total.
    double mask_hit_probability(double sigma_total) const;
};

}  // namespace ddiff
