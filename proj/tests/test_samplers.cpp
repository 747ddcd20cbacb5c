#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <map>

#include "ddiff/oracle.hpp"
#include "ddiff/samplers.hpp"
#include "testutil.hpp"

using namespace ddiff;
using testutil::make_spec;
using testutil::random_positive_row;

TEST_CASE("euler step with dt=0 keeps the sequence") {
    Rng rng(1);
    const MatrixSpec spec = make_spec(Family::uniform, 4);
    ScoreTable s(3, std::vector<double>(4, 1.0));
    const TokenSequence x{0, 2, 3};
    CHECK(euler_step(s, spec, 0.5, 1.0, 0.0, x, rng) == x);
}

TEST_CASE("absorb euler step never moves a non-mask token") {
    Rng rng(2);
    const MatrixSpec spec = make_spec(Family::absorb, 4);
    ScoreTable s(4, std::vector<double>(5, 2.0));
    const TokenSequence x{0, 1, 2, 3};
    for (int k = 0; k < 200; ++k) {
        CHECK(euler_step(s, spec, 0.5, 2.0, 0.05, x, rng) == x);
    }
}

TEST_CASE("analytic step with zero noise interval stays put") {
    Rng rng(3);
    const MatrixSpec spec = make_spec(Family::roulette, 4, 0.5);
    ScoreTable s(2, std::vector<double>(5, 1.0));
    const TokenSequence x{1, spec.mask_id()};
    CHECK(analytic_step(s, spec, 1.0, 1.0, 0, x, rng) == x);
    CHECK_THROWS_AS(analytic_step(s, spec, 1.0, 2.0, 0, x, rng), domain_error);
    // tiny interval: overwhelmingly stays
    int stays = 0;
    for (int k = 0; k < 200; ++k) {
        stays += analytic_step(s, spec, 1.0 + 1e-12, 1.0, 0, x, rng) == x;
    }
    CHECK(stays == 200);
}

TEST_CASE("analytic grouped sums equal the dense oracle computation") {
    Rng rng(4);
    int done = 0;
    while (done < 200) {
        const int V = 2 + rng.uniform_int(6);
        const double pm = 0.05 + 0.9 * rng.uniform();
        const Family fam =
            std::array{Family::uniform, Family::absorb, Family::roulette, Family::eroulette}[rng.uniform_int(4)];
        const MatrixSpec spec = make_spec(fam, V, pm);
        const int n = spec.n_states();
        const double t = 0.15 + 0.7 * rng.uniform();
        const double sd = 0.02 + 2.0 * rng.uniform();
        const auto srow = random_positive_row(n, rng);
        const token_t xt = static_cast<token_t>(rng.uniform_int(n));

        // dense reference: exp(sd Q)(xt, prev) * sum_y exp(-sd Q)(prev, y) s[y]
        const auto Q = oracle::dense_rate_matrix(spec, t);
        const auto F = oracle::expm_series(Q, sd);
        const auto B = oracle::expm_series(Q, -sd);
        std::vector<double> expect(static_cast<size_t>(n));
        for (int prev = 0; prev < n; ++prev) {
            double group = 0.0;
            for (int y = 0; y < n; ++y) group += B.at(prev, y) * srow[static_cast<size_t>(y)];
            expect[static_cast<size_t>(prev)] = F.at(xt, prev) * group;
        }

        // grouped computation, reproduced through the public stepper by
        // forcing each candidate: compare via the internal formula instead
        const TransitionCoeffs inv = spec.coeffs(-sd, t);
        double S = 0.0;
        for (double v : srow) S += v;
        const double s_mask = spec.has_mask() ? srow[static_cast<size_t>(spec.mask_id())] : 0.0;
        for (int prev = 0; prev < n; ++prev) {
            const double fwd = spec.transition_prob(sd, t, xt, prev);
            double group;
            if (spec.family == Family::uniform) {
                group = (inv.c - inv.b) * srow[static_cast<size_t>(prev)] + inv.b * S;
            } else if (prev == spec.mask_id()) {
                group = inv.a * S + (1.0 - inv.a) * s_mask;
            } else if (spec.family == Family::absorb) {
                group = (1.0 - inv.a) * srow[static_cast<size_t>(prev)];
            } else {
                group = (inv.c - inv.b) * srow[static_cast<size_t>(prev)] + inv.b * (S - s_mask);
            }
            CHECK(std::fabs(fwd * group - expect[static_cast<size_t>(prev)]) < 1e-9);
        }
        ++done;
    }
}

TEST_CASE("per-position rows are valid simplices after clamping") {
    Rng rng(5);
    const MatrixSpec spec = make_spec(Family::uniform, 5);
    // scores large enough to push the Euler stay mass negative
    ScoreTable s(4, std::vector<double>(5, 40.0));
    const TokenSequence x{0, 1, 2, 3};
    int64_t clamps = 0;
    const TokenSequence out = euler_step(s, spec, 0.5, 1.0, 0.5, x, rng, &clamps);
    CHECK(clamps == 4);  // every row overshot and was renormalized
    for (token_t c : out) CHECK((c >= 0 && c < 5));
}

TEST_CASE("generation is deterministic for a fixed seed and across thread counts") {
    Rng rng(6);
    const MatrixSpec spec = make_spec(Family::absorb, 3);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    oracle::JointDistribution p0 = oracle::random_clean_joint(spec, 2, rng);
    ExactScoreSource src{p0, spec, sched};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::analytic;
    cfg.steps = 32;
    cfg.L = 2;
    cfg.seed = 99;
    const auto a = generate(src, cfg, spec, sched);
    const auto b = generate(src, cfg, spec, sched);
    CHECK(a.sequence == b.sequence);
    CHECK(a.trajectory.states == b.trajectory.states);
}

TEST_CASE("prefix clamping pins the prefix verbatim") {
    Rng rng(7);
    const MatrixSpec spec = make_spec(Family::absorb, 4);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    oracle::JointDistribution p0 = oracle::uniform_clean_joint(spec, 2);
    ExactScoreSource src{p0, spec, sched};
    SamplerConfig cfg;
    cfg.steps = 16;
    cfg.L = 2;
    cfg.seed = 5;
    cfg.prefix = TokenSequence{2};
    const auto g = generate(src, cfg, spec, sched);
    CHECK(g.sequence[0] == 2);
}

TEST_CASE("steps=1 still yields a valid sequence") {
    const MatrixSpec spec = make_spec(Family::uniform, 3);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    oracle::JointDistribution p0 = oracle::uniform_clean_joint(spec, 2);
    ExactScoreSource src{p0, spec, sched};
    SamplerConfig cfg;
    cfg.steps = 1;
    cfg.L = 2;
    cfg.seed = 3;
    const auto g = generate(src, cfg, spec, sched);
    for (token_t c : g.sequence) CHECK((c >= 0 && c < 3));
}

TEST_CASE("absorb generation with exact scores unmasks everything") {
    Rng rng(8);
    const MatrixSpec spec = make_spec(Family::absorb, 3);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    oracle::JointDistribution p0 = oracle::random_clean_joint(spec, 2, rng);
    ExactScoreSource src{p0, spec, sched};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::analytic;
    cfg.steps = 64;
    cfg.L = 2;
    cfg.t_hi = 1.0 - 1e-6;  // run the reverse nearly to the reference horizon
    int masked = 0;
    for (int k = 0; k < 200; ++k) {
        cfg.seed = 1000 + static_cast<uint64_t>(k);
        const auto g = generate(src, cfg, spec, sched);
        for (token_t c : g.sequence) masked += c == spec.mask_id();
    }
    CHECK(masked == 0);
}

TEST_CASE("euler step preserves the stationary law of the uniform family") {
    // stationary scores are all ones; one step keeps the uniform marginals
    Rng rng(9);
    const MatrixSpec spec = make_spec(Family::uniform, 3);
    const int N = 60000;
    ScoreTable s(1, std::vector<double>(3, 1.0));
    std::vector<int> counts(3, 0);
    for (int k = 0; k < N; ++k) {
        TokenSequence x{static_cast<token_t>(rng.uniform_int(3))};
        const TokenSequence y = euler_step(s, spec, 0.7, 1.3, 0.1, x, rng);
        ++counts[static_cast<size_t>(y[0])];
    }
    for (int v = 0; v < 3; ++v) {
        const double p = counts[static_cast<size_t>(v)] / static_cast<double>(N);
        CHECK(std::fabs(p - 1.0 / 3) < 4 * std::sqrt((1.0 / 3) * (2.0 / 3) / N));
    }
}

TEST_CASE("forward-reverse consistency on a tiny chain with exact scores") {
    Rng rng(10);
    const MatrixSpec spec = make_spec(Family::absorb, 3);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    oracle::JointDistribution p0 = oracle::random_clean_joint(spec, 2, rng);
    ExactScoreSource src{p0, spec, sched};
    SamplerConfig cfg;
    cfg.kind = SamplerKind::analytic;
    cfg.steps = 64;
    cfg.L = 2;
    cfg.t_hi = 1.0 - 1e-6;

    std::map<size_t, int> counts;
    const int N = 100000;
    for (int k = 0; k < N; ++k) {
        cfg.seed = 50000 + static_cast<uint64_t>(k);
        const auto g = generate(src, cfg, spec, sched);
        ++counts[p0.index_of(g.sequence)];
    }
    double tv = 0.0;
    for (size_t idx = 0; idx < p0.size(); ++idx) {
        const double emp = counts.count(idx) ? counts[idx] / static_cast<double>(N) : 0.0;
        tv += std::fabs(emp - p0.p[idx]);
    }
    tv *= 0.5;
    CHECK(tv < 0.05);
}

TEST_CASE("count_corrections: absorb-equivalent roulette never corrects") {
    const MatrixSpec spec = make_spec(Family::roulette, 3, 1.0);
    Trajectory traj;
    traj.states = {{3, 3}, {3, 1}, {0, 1}, {0, 1}};
    traj.unmask_step = {1, 0};
    CHECK(count_corrections(traj, spec) == 0.0);
    Trajectory corrected;
    corrected.states = {{3, 3}, {3, 1}, {0, 2}, {0, 2}};
    corrected.unmask_step = {1, 0};
    CHECK(count_corrections(corrected, spec) == doctest::Approx(0.5));
    CHECK_THROWS_AS(count_corrections(traj, make_spec(Family::absorb, 3)), config_error);
}
