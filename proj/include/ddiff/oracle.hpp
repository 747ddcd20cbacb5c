#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ddiff/process.hpp"
#include "ddiff/rng.hpp"
#include "ddiff/schedule.hpp"
#include "ddiff/types.hpp"

// Brute-force reference implementations, independent of the closed forms in
// process/scores/losses. Shipped with the library so `verify` can run them
// on user configs; all dense objects are capped at tiny sizes.

namespace ddiff::oracle {

inline constexpr int kMaxDenseStates = 64;
inline constexpr int kMaxJointStates = 4096;

struct DenseMatrix {
    int n = 0;
    std::vector<double> a;  // row-major

    DenseMatrix() = default;
    explicit DenseMatrix(int n_) : n(n_), a(static_cast<size_t>(n_) * n_, 0.0) {}
    double & at(int r, int c) { return a[static_cast<size_t>(r) * n + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * n + c]; }
    static DenseMatrix identity(int n);
};

DenseMatrix matmul(const DenseMatrix & A, const DenseMatrix & B);

// The explicit Q^tok for a family (p_m frozen at time t for eroulette).
DenseMatrix dense_rate_matrix(const MatrixSpec & spec, double t);

// exp(sigma Q) by scaling-and-squaring over a truncated Taylor series; terms
// are accumulated until their max-norm falls below 1e-16 of the running sum.
DenseMatrix expm_series(const DenseMatrix & Q, double sigma);

// Joint distribution over all n^L sequences of a tiny chain.
struct JointDistribution {
    int n = 0;  // states per position
    int L = 0;
    std::vector<double> p;  // size n^L, index = sum_i x[i] * n^i

    size_t size() const { return p.size(); }
    size_t index_of(std::span<const token_t> x) const;
    TokenSequence sequence_at(size_t idx) const;
    double entropy() const;
};

JointDistribution uniform_clean_joint(const MatrixSpec & spec, int L);
JointDistribution random_clean_joint(const MatrixSpec & spec, int L, Rng & rng);
JointDistribution point_mass_joint(const MatrixSpec & spec, const TokenSequence & x0);

// Push p0 through the forward process to time t (resp. raw noise sigma).
JointDistribution exact_sequence_distribution(const JointDistribution & p0, const MatrixSpec & spec,
                                              double t, const NoiseSchedule & schedule);
JointDistribution pushforward_sigma(const JointDistribution & p0, const MatrixSpec & spec,
                                    double sigma, double t);

// Concrete scores of a sequence under an exact joint: s[i][y] = p(x with
// position i set to y) / p(x).
std::vector<std::vector<double>> exact_scores(const JointDistribution & pt, const TokenSequence & x);

// Exact per-position posterior rows p^i(h | x_t), h over non-mask tokens.
std::vector<std::vector<double>> exact_posterior(const JointDistribution & p0, const MatrixSpec & spec,
                                                 double sigma, double t, const TokenSequence & xt);

struct EntropyIdentityResult {
    double lhs = 0.0;  // H(p0)
    double rhs = 0.0;  // H(p1) - integral of E sum_y Q K(ratio)
    double gap = 0.0;
};

// Checks H(p0) = H(p1) - int_0^1 E_{x_t} sum_y Q_t(x_t,y) K(p_t(y)/p_t(x_t)) dt
// with the integral taken in sigma (midpoint rule, n_quad panels), which
// removes the sigma'(t) blow-up near t=1.
EntropyIdentityResult entropy_identity_check(const JointDistribution & p0, const MatrixSpec & spec,
                                             const NoiseSchedule & schedule, int n_quad);

// Monte Carlo estimate of -int_0^1 E_{x_t} sum_{y != x_t} Q_t(y, x_t) dt
// over a length-L sequence (the integral half of the J2 constant).
struct McEstimate {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    int64_t n = 0;
};
McEstimate mc_integral_outflow(const MatrixSpec & spec, const NoiseSchedule & schedule, int L,
                               int64_t n_samples, Rng & rng);

// Naive full-vocabulary versions of the grouped kernels.
std::vector<double> brute_force_score_row(std::span<const double> f_row, const MatrixSpec & spec,
                                          double sigma, double t, token_t xt);
double brute_force_scale_factor(const MatrixSpec & spec, double sigma, double t, token_t xt, token_t y);
double brute_force_loss_row(const MatrixSpec & spec, double sigma, double sigma_prime,
                            std::span<const double> s_row, token_t x0, token_t xt, bool include_K);

// Total variation between the forward distribution at time t and the
// reference product distribution.
double reference_gap_tv(const JointDistribution & p0, const MatrixSpec & spec,
                        const NoiseSchedule & schedule, double t);

}  // namespace ddiff::oracle
