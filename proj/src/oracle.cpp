#include "ddiff/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "ddiff/losses.hpp"

namespace ddiff::oracle {

DenseMatrix DenseMatrix::identity(int n) {
    DenseMatrix I(n);
    for (int i = 0; i < n; ++i) I.at(i, i) = 1.0;
    return I;
}

DenseMatrix matmul(const DenseMatrix & A, const DenseMatrix & B) {
    DenseMatrix C(A.n);
    for (int i = 0; i < A.n; ++i) {
        for (int k = 0; k < A.n; ++k) {
            const double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < A.n; ++j) {
                C.at(i, j) += aik * B.at(k, j);
            }
        }
    }
    return C;
}

static double max_abs(const DenseMatrix & M) {
    double m = 0.0;
    for (double v : M.a) m = std::max(m, std::fabs(v));
    return m;
}

DenseMatrix dense_rate_matrix(const MatrixSpec & spec, double t) {
    const int n = spec.n_states();
    if (n > kMaxDenseStates) throw domain_error("dense_rate_matrix: n too large");
    DenseMatrix P(n);
    switch (spec.family) {
        case Family::uniform:
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) P.at(i, j) = 1.0 / n;
            break;
        case Family::absorb:
            for (int j = 0; j < n; ++j) P.at(n - 1, j) = 1.0;
            break;
        case Family::roulette:
        case Family::eroulette: {
            const double pm = spec.p_m_at(t);
            const int V = n - 1;
            for (int i = 0; i < V; ++i)
                for (int j = 0; j < V; ++j) P.at(i, j) = (1.0 - pm) / V;
            for (int j = 0; j < V; ++j) P.at(n - 1, j) = pm;
            P.at(n - 1, n - 1) = 1.0;
            break;
        }
    }
    for (int i = 0; i < n; ++i) P.at(i, i) -= 1.0;
    return P;
}

DenseMatrix expm_series(const DenseMatrix & Q, double sigma) {
    const int n = Q.n;
    if (n > kMaxDenseStates) throw domain_error("expm_series: n too large");
    // scale so that |sigma| * ||Q|| / 2^s <= 0.5, then square back
    const double norm = std::fabs(sigma) * max_abs(Q) * n;
    int squarings = 0;
    while ((norm / std::pow(2.0, squarings)) > 0.5) {
        ++squarings;
        if (squarings > 60) throw domain_error("expm_series: scaling budget exceeded");
    }
    const double scale = sigma / std::pow(2.0, squarings);

    DenseMatrix X = DenseMatrix::identity(n);
    DenseMatrix term = DenseMatrix::identity(n);
    for (int k = 1; k <= 64; ++k) {
        DenseMatrix next = matmul(term, Q);
        for (double & v : next.a) v *= scale / k;
        term = next;
        for (size_t i = 0; i < X.a.size(); ++i) X.a[i] += term.a[i];
        if (max_abs(term) < 1e-16) break;
        if (k == 64) throw domain_error("expm_series: Taylor budget exceeded");
    }
    for (int s = 0; s < squarings; ++s) X = matmul(X, X);
    return X;
}

size_t JointDistribution::index_of(std::span<const token_t> x) const {
    size_t idx = 0;
    size_t mul = 1;
    for (int i = 0; i < L; ++i) {
        idx += static_cast<size_t>(x[i]) * mul;
        mul *= static_cast<size_t>(n);
    }
    return idx;
}

TokenSequence JointDistribution::sequence_at(size_t idx) const {
    TokenSequence x(L);
    for (int i = 0; i < L; ++i) {
        x[i] = static_cast<token_t>(idx % n);
        idx /= n;
    }
    return x;
}

double JointDistribution::entropy() const {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

static JointDistribution empty_joint(const MatrixSpec & spec, int L) {
    JointDistribution j;
    j.n = spec.n_states();
    j.L = L;
    size_t total = 1;
    for (int i = 0; i < L; ++i) {
        total *= static_cast<size_t>(j.n);
        if (total > kMaxJointStates) throw domain_error("joint distribution too large");
    }
    j.p.assign(total, 0.0);
    return j;
}

JointDistribution uniform_clean_joint(const MatrixSpec & spec, int L) {
    JointDistribution j = empty_joint(spec, L);
    const int V = spec.vocab.V;
    double mass = 1.0;
    for (int i = 0; i < L; ++i) mass /= V;
    for (size_t idx = 0; idx < j.size(); ++idx) {
        TokenSequence x = j.sequence_at(idx);
        bool clean = std::all_of(x.begin(), x.end(), [&](token_t c) { return c < V; });
        if (clean) j.p[idx] = mass;
    }
    return j;
}

JointDistribution random_clean_joint(const MatrixSpec & spec, int L, Rng & rng) {
    JointDistribution j = empty_joint(spec, L);
    const int V = spec.vocab.V;
    double total = 0.0;
    for (size_t idx = 0; idx < j.size(); ++idx) {
        TokenSequence x = j.sequence_at(idx);
        bool clean = std::all_of(x.begin(), x.end(), [&](token_t c) { return c < V; });
        if (clean) {
            j.p[idx] = 0.05 + rng.uniform();
            total += j.p[idx];
        }
    }
    for (double & v : j.p) v /= total;
    return j;
}

JointDistribution point_mass_joint(const MatrixSpec & spec, const TokenSequence & x0) {
    JointDistribution j = empty_joint(spec, static_cast<int>(x0.size()));
    j.p[j.index_of(x0)] = 1.0;
    return j;
}

JointDistribution pushforward_sigma(const JointDistribution & p0, const MatrixSpec & spec,
                                    double sigma, double t) {
    const int n = p0.n;
    DenseMatrix M = expm_series(dense_rate_matrix(spec, t), sigma);
    JointDistribution cur = p0;
    // contract one position at a time
    for (int pos = 0; pos < p0.L; ++pos) {
        JointDistribution next = cur;
        std::fill(next.p.begin(), next.p.end(), 0.0);
        size_t stride = 1;
        for (int i = 0; i < pos; ++i) stride *= static_cast<size_t>(n);
        for (size_t idx = 0; idx < cur.size(); ++idx) {
            const double mass = cur.p[idx];
            if (mass == 0.0) continue;
            const int from = static_cast<int>((idx / stride) % static_cast<size_t>(n));
            const size_t base = idx - static_cast<size_t>(from) * stride;
            for (int to = 0; to < n; ++to) {
                const double pr = M.at(to, from);
                if (pr != 0.0) next.p[base + static_cast<size_t>(to) * stride] += mass * pr;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

JointDistribution exact_sequence_distribution(const JointDistribution & p0, const MatrixSpec & spec,
                                              double t, const NoiseSchedule & schedule) {
    return pushforward_sigma(p0, spec, schedule.eval(t).sigma, t);
}

std::vector<std::vector<double>> exact_scores(const JointDistribution & pt, const TokenSequence & x) {
    const double px = pt.p[pt.index_of(x)];
    if (px <= 0.0) throw domain_error("exact_scores: p_t(x) is zero");
    std::vector<std::vector<double>> s(x.size(), std::vector<double>(pt.n, 0.0));
    TokenSequence y = x;
    for (size_t i = 0; i < x.size(); ++i) {
        for (int v = 0; v < pt.n; ++v) {
            y[i] = static_cast<token_t>(v);
            s[i][v] = pt.p[pt.index_of(y)] / px;
        }
        y[i] = x[i];
    }
    return s;
}

std::vector<std::vector<double>> exact_posterior(const JointDistribution & p0, const MatrixSpec & spec,
                                                 double sigma, double t, const TokenSequence & xt) {
    const int V = spec.vocab.V;
    const int L = p0.L;
    std::vector<std::vector<double>> post(L, std::vector<double>(V, 0.0));
    std::vector<double> norm(L, 0.0);
    for (size_t idx = 0; idx < p0.size(); ++idx) {
        const double prior = p0.p[idx];
        if (prior == 0.0) continue;
        const TokenSequence x0 = p0.sequence_at(idx);
        double like = prior;
        for (int i = 0; i < L; ++i) like *= spec.transition_prob(sigma, t, xt[i], x0[i]);
        if (like == 0.0) continue;
        for (int i = 0; i < L; ++i) {
            // marginal posterior of position i: reweight by removing and
            // re-adding nothing; the joint already factorizes over x0 draws
            post[i][x0[i]] += like;
            norm[i] += like;
        }
    }
    for (int i = 0; i < L; ++i) {
        if (norm[i] <= 0.0) throw domain_error("exact_posterior: x_t unreachable");
        for (double & v : post[i]) v /= norm[i];
    }
    return post;
}

EntropyIdentityResult entropy_identity_check(const JointDistribution & p0, const MatrixSpec & spec,
                                             const NoiseSchedule & schedule, int n_quad) {
    const int n = p0.n;
    const double s_lo = schedule.sigma_at_zero();
    const double s_hi = schedule.sigma_at_one();

    // For eroulette the pointwise formula is not a Kolmogorov solution, so
    // the identity is only checked for constant-p_m families.
    if (spec.family == Family::eroulette) throw config_error("entropy identity: eroulette unsupported");

    // Integrate over sigma rather than t (removes the sigma'(t) blow-up near
    // t=1), on a grid graded quadratically toward sigma=0 where masked-state
    // ratios give the integrand a log singularity.
    double integral = 0.0;
    for (int q = 0; q < n_quad; ++q) {
        const double w = (q + 0.5) / n_quad;
        const double u = s_lo + (s_hi - s_lo) * w * w;
        const double du = (s_hi - s_lo) * 2.0 * w / n_quad;
        JointDistribution pt = pushforward_sigma(p0, spec, u, 0.0);
        // E_{x_t} sum_y Q(x_t, y) K(p_t(y)/p_t(x_t)); Q per unit sigma
        double acc = 0.0;
        TokenSequence y;
        for (size_t idx = 0; idx < pt.size(); ++idx) {
            const double px = pt.p[idx];
            if (px <= 0.0) continue;
            const TokenSequence x = pt.sequence_at(idx);
            y = x;
            double inner = 0.0;
            for (int i = 0; i < pt.L; ++i) {
                for (int v = 0; v < n; ++v) {
                    if (v == x[i]) continue;
                    const double w = spec.rate_weight(0.0, x[i], static_cast<token_t>(v));
                    if (w == 0.0) continue;
                    y[i] = static_cast<token_t>(v);
                    inner += w * kernel_K(pt.p[pt.index_of(y)] / px);
                }
                y[i] = x[i];
                // diagonal of the sequence rate matrix: Q(x,x) K(1) = +outflow
                inner += spec.outflow_rate(0.0, x[i]);
            }
            acc += px * inner;
        }
        integral += acc * du;
    }
    JointDistribution p1 = pushforward_sigma(p0, spec, s_hi, 0.0);
    EntropyIdentityResult r;
    r.lhs = p0.entropy();
    r.rhs = p1.entropy() - integral;
    r.gap = std::fabs(r.lhs - r.rhs);
    return r;
}

McEstimate mc_integral_outflow(const MatrixSpec & spec, const NoiseSchedule & schedule, int L,
                               int64_t n_samples, Rng & rng) {
    MeanAccumulator acc;
    const int V = spec.vocab.V;
    for (int64_t k = 0; k < n_samples; ++k) {
        const double t = rng.uniform();
        const SigmaValue sv = schedule.eval(t);
        double val = 0.0;
        for (int i = 0; i < L; ++i) {
            const token_t x0 = static_cast<token_t>(rng.uniform_int(V));
            const token_t xt = spec.corrupt_token(x0, sv.sigma, t, rng);
            val -= sv.sigma_prime * spec.outflow_rate(t, xt);
        }
        acc.add(val);
    }
    McEstimate e;
    e.mean = acc.mean();
    e.stderr_of_mean = acc.stderr_of_mean();
    e.n = acc.count;
    return e;
}

std::vector<double> brute_force_score_row(std::span<const double> f_row, const MatrixSpec & spec,
                                          double sigma, double t, token_t xt) {
    const int n = spec.n_states();
    const int V = spec.vocab.V;
    std::vector<double> s(n, 0.0);
    for (int y = 0; y < n; ++y) {
        if (y == xt) {
            s[y] = 1.0;
            continue;
        }
        double acc = 0.0;
        for (int h = 0; h < V; ++h) {
            acc += spec.conditional_ratio(sigma, t, static_cast<token_t>(y), xt,
                                          static_cast<token_t>(h)) *
                   f_row[h];
        }
        s[y] = acc;
    }
    return s;
}

double brute_force_scale_factor(const MatrixSpec & spec, double sigma, double t, token_t xt, token_t y) {
    const int V = spec.vocab.V;
    double acc = 0.0;
    for (int h = 0; h < V; ++h) {
        acc += spec.conditional_ratio(sigma, t, y, xt, static_cast<token_t>(h)) / V;
    }
    return acc;
}

double brute_force_loss_row(const MatrixSpec & spec, double sigma, double sigma_prime,
                            std::span<const double> s_row, token_t x0, token_t xt, bool include_K) {
    const int n = spec.n_states();
    double acc = 0.0;
    for (int y = 0; y < n; ++y) {
        if (y == xt) continue;
        const double w = spec.rate_weight(0.0, xt, static_cast<token_t>(y));
        if (w == 0.0) continue;  // skipped exactly where the grouped kernels skip
        const double ratio = spec.conditional_ratio(sigma, 0.0, static_cast<token_t>(y), xt, x0);
        acc += w * (include_K ? kernel_ell(ratio, s_row[y]) : kernel_ell_bar(ratio, s_row[y]));
    }
    return sigma_prime * acc;
}

double reference_gap_tv(const JointDistribution & p0, const MatrixSpec & spec,
                        const NoiseSchedule & schedule, double t) {
    const double sigma = t >= 1.0 ? schedule.sigma_at_one() : schedule.eval(t).sigma;
    JointDistribution pt = pushforward_sigma(p0, spec, sigma, t);
    const std::vector<double> ref = spec.reference_distribution();
    double tv = 0.0;
    for (size_t idx = 0; idx < pt.size(); ++idx) {
        const TokenSequence x = pt.sequence_at(idx);
        double q = 1.0;
        for (token_t c : x) q *= ref[static_cast<size_t>(c)];
        tv += std::fabs(pt.p[idx] - q);
    }
    return 0.5 * tv;
}

}  // namespace ddiff::oracle
