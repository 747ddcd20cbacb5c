#include "ddiff/samplers.hpp"

#include <cmath>

namespace ddiff {

const char * to_string(SamplerKind k) {
    return k == SamplerKind::euler ? "euler" : "analytic";
}

SamplerKind sampler_kind_from_string(const std::string & s) {
    if (s == "euler") return SamplerKind::euler;
    if (s == "analytic") return SamplerKind::analytic;
    throw config_error("unknown sampler kind: " + s);
}

static token_t sample_row(std::vector<double> & w, token_t fallback, Rng & rng,
                          int64_t * clamp_counter) {
    bool clamped = false;
    double total = 0.0;
    for (double & v : w) {
        if (v < 0.0) {
            v = 0.0;
            clamped = true;
        }
        total += v;
    }
    if (clamped && clamp_counter) ++*clamp_counter;
    if (total <= 0.0) return fallback;
    return static_cast<token_t>(rng.categorical(w));
}

TokenSequence euler_step(const ScoreTable & s, const MatrixSpec & spec, double /*sigma*/,
                         double sigma_prime, double dt, const TokenSequence & xt, Rng & rng,
                         int64_t * clamp_counter) {
    const int n = spec.n_states();
    TokenSequence out(xt.size());
    std::vector<double> w(static_cast<size_t>(n));
    for (size_t i = 0; i < xt.size(); ++i) {
        const token_t x = xt[i];
        double move_mass = 0.0;
        for (int y = 0; y < n; ++y) {
            if (y == x) continue;
            const double q = spec.rate_weight(0.0, x, static_cast<token_t>(y));
            const double mass = q == 0.0 ? 0.0 : sigma_prime * q * s[i][static_cast<size_t>(y)] * dt;
            w[static_cast<size_t>(y)] = mass;
            move_mass += mass;
        }
        w[static_cast<size_t>(x)] = 1.0 - move_mass;
        out[i] = sample_row(w, x, rng, clamp_counter);
    }
    return out;
}

TokenSequence analytic_step(const ScoreTable & s, const MatrixSpec & spec, double sigma_t,
                            double sigma_prev, double t, const TokenSequence & xt, Rng & rng,
                            int64_t * clamp_counter) {
    if (!(sigma_t >= sigma_prev && sigma_prev >= 0.0)) {
        throw domain_error("analytic_step: requires sigma_t >= sigma_prev >= 0");
    }
    if (sigma_t == sigma_prev) return xt;  // both exponentials are the identity
    const double sd = sigma_t - sigma_prev;
    const int n = spec.n_states();
    // entries of exp(-sd Q): the closed forms evaluated at -sd
    const TransitionCoeffs inv = spec.coeffs(-sd, t);
    TokenSequence out(xt.size());
    std::vector<double> w(static_cast<size_t>(n));

    for (size_t i = 0; i < xt.size(); ++i) {
        const token_t x = xt[i];
        double S = 0.0;
        for (int y = 0; y < n; ++y) S += s[i][static_cast<size_t>(y)];
        const double s_mask = spec.has_mask() ? s[i][static_cast<size_t>(spec.mask_id())] : 0.0;
        for (int prev = 0; prev < n; ++prev) {
            const double fwd = spec.transition_prob(sd, t, x, static_cast<token_t>(prev));
            if (fwd == 0.0) {
                w[static_cast<size_t>(prev)] = 0.0;
                continue;
            }
            double group;
            if (spec.family == Family::uniform) {
                group = (inv.c - inv.b) * s[i][static_cast<size_t>(prev)] + inv.b * S;
            } else if (prev == spec.mask_id()) {
                group = inv.a * S + (1.0 - inv.a) * s_mask;
            } else if (spec.family == Family::absorb) {
                group = (1.0 - inv.a) * s[i][static_cast<size_t>(prev)];
            } else {
                group = (inv.c - inv.b) * s[i][static_cast<size_t>(prev)] + inv.b * (S - s_mask);
            }
            w[static_cast<size_t>(prev)] = fwd * group;
        }
        out[i] = sample_row(w, x, rng, clamp_counter);
    }
    return out;
}

// Final noise-removal step: one analytic jump from sigma(t_lo) to 0 with the
// mask candidate excluded, so terminal samples are clean sequences.
static TokenSequence denoise_step(const ScoreTable & s, const MatrixSpec & spec, double sigma_lo,
                                  double t, const TokenSequence & xt, Rng & rng,
                                  int64_t * clamp_counter) {
    const int n = spec.n_states();
    const TransitionCoeffs inv = spec.coeffs(-sigma_lo, t);
    TokenSequence out(xt.size());
    std::vector<double> w(static_cast<size_t>(n));
    for (size_t i = 0; i < xt.size(); ++i) {
        const token_t x = xt[i];
        double S = 0.0;
        for (int y = 0; y < n; ++y) S += s[i][static_cast<size_t>(y)];
        const double s_mask = s[i][static_cast<size_t>(spec.mask_id())];
        for (int prev = 0; prev < n; ++prev) {
            if (prev == spec.mask_id()) {
                w[static_cast<size_t>(prev)] = 0.0;  // x_0 carries no mask
                continue;
            }
            const double fwd = spec.transition_prob(sigma_lo, t, x, static_cast<token_t>(prev));
            double group;
            if (spec.family == Family::absorb) {
                group = (1.0 - inv.a) * s[i][static_cast<size_t>(prev)];
            } else {
                group = (inv.c - inv.b) * s[i][static_cast<size_t>(prev)] + inv.b * (S - s_mask);
            }
            w[static_cast<size_t>(prev)] = fwd * group;
        }
        out[i] = sample_row(w, x, rng, clamp_counter);
        if (out[i] == spec.mask_id()) out[i] = x == spec.mask_id() ? 0 : x;  // all-zero fallback
    }
    return out;
}

GenerateResult generate(const ScoreSource & source, const SamplerConfig & cfg,
                        const MatrixSpec & spec, const NoiseSchedule & schedule) {
    cfg.validate();
    Rng rng(cfg.seed);
    const token_t mask = spec.has_mask() ? spec.mask_id() : -1;

    GenerateResult res;
    res.trajectory.unmask_step.assign(static_cast<size_t>(cfg.L), -1);

    TokenSequence x = spec.sample_reference(cfg.L, rng);
    auto clamp_prefix = [&](TokenSequence & seq) {
        if (!cfg.prefix) return;
        for (size_t i = 0; i < cfg.prefix->size(); ++i) seq[i] = (*cfg.prefix)[i];
    };
    clamp_prefix(x);
    res.trajectory.states.push_back(x);

    const double dt_grid = (cfg.t_hi - cfg.t_lo) / cfg.steps;
    for (int step = 0; step < cfg.steps; ++step) {
        const double t = cfg.t_hi - step * dt_grid;
        const double t_next = t - dt_grid;
        const ScoreTable s = source.scores(x, t);
        TokenSequence next;
        if (cfg.kind == SamplerKind::euler) {
            const SigmaValue sv = schedule.eval(t);
            next = euler_step(s, spec, sv.sigma, sv.sigma_prime, dt_grid, x, rng,
                              &res.trajectory.clamped_rows);
        } else {
            const double sig_t = schedule.eval(t).sigma;
            const double sig_prev = schedule.eval(std::max(t_next, 0.0)).sigma;
            next = analytic_step(s, spec, sig_t, sig_prev, t, x, rng, &res.trajectory.clamped_rows);
        }
        clamp_prefix(next);
        for (int i = 0; i < cfg.L; ++i) {
            if (res.trajectory.unmask_step[static_cast<size_t>(i)] < 0 && spec.has_mask() &&
                next[static_cast<size_t>(i)] != mask) {
                res.trajectory.unmask_step[static_cast<size_t>(i)] = step;
            }
        }
        x = std::move(next);
        res.trajectory.states.push_back(x);
    }
    if (spec.has_mask()) {
        // noise removal: land on a clean sequence
        const ScoreTable s = source.scores(x, cfg.t_lo);
        TokenSequence next = denoise_step(s, spec, schedule.eval(cfg.t_lo).sigma, cfg.t_lo, x, rng,
                                          &res.trajectory.clamped_rows);
        clamp_prefix(next);
        for (int i = 0; i < cfg.L; ++i) {
            if (res.trajectory.unmask_step[static_cast<size_t>(i)] < 0 &&
                next[static_cast<size_t>(i)] != mask) {
                res.trajectory.unmask_step[static_cast<size_t>(i)] = cfg.steps;
            }
        }
        x = std::move(next);
        res.trajectory.states.push_back(x);
    }
    res.sequence = x;
    return res;
}

double count_corrections(const Trajectory & traj, const MatrixSpec & spec) {
    if (spec.family != Family::roulette) {
        throw config_error("count_corrections: roulette family only");
    }
    if (traj.states.empty()) return 0.0;
    const size_t L = traj.states.front().size();
    const size_t steps = traj.states.size() - 1;
    int corrected = 0;
    for (size_t i = 0; i < L; ++i) {
        const int u = traj.unmask_step[i];
        if (u < 0) continue;
        const token_t first = traj.states[static_cast<size_t>(u) + 1][i];
        const token_t last = traj.states[steps][i];
        if (last != first) ++corrected;
    }
    return static_cast<double>(corrected) / static_cast<double>(L);
}

}  // namespace ddiff
