// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "ddiff/app.hpp"
#include "ddiff/bounds.hpp"
#include "ddiff/oracle.hpp"
#include "ddiff/samplers.hpp"
#include "testutil.hpp"

using namespace ddiff;
using testutil::make_spec;
using testutil::random_positive_row;
using testutil::random_simplex;

namespace {

int g_failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int id, const char * name, bool pass, const std::string & detail, double secs,
            double budget_secs) {
    const bool in_budget = budget_secs <= 0.0 || secs < budget_secs;
    if (!pass || !in_budget) ++g_failures;
    std::printf("criterion %2d [%s]: %s (%s; %.2fs%s)\n", id, name,
                pass && in_budget ? "PASS" : "FAIL", detail.c_str(), secs,
                in_budget ? "" : " OVER BUDGET");
    std::fflush(stdout);
}

std::string fmt(const char * f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

const std::vector<Family> kAllFamilies{Family::uniform, Family::absorb, Family::roulette,
                                       Family::eroulette};

// 1. closed-form exponentials vs series oracle
void criterion1() {
    Timer timer;
    Rng rng(101);
    double worst_err = 0.0, worst_col = 0.0;
    for (Family fam : kAllFamilies) {
        for (int n : {3, 5, 8}) {
            const int V = fam == Family::uniform ? n : n - 1;
            for (int trial = 0; trial < 200; ++trial) {
                const double pm = 0.02 + 0.96 * rng.uniform();
                const MatrixSpec spec = make_spec(fam, V, pm);
                const double sigma = 0.001 + 10.0 * rng.uniform();
                const double t = 0.05 + 0.9 * rng.uniform();
                const auto M = oracle::expm_series(oracle::dense_rate_matrix(spec, t), sigma);
                for (int to = 0; to < n; ++to) {
                    for (int from = 0; from < n; ++from) {
                        worst_err = std::max(worst_err, std::fabs(M.at(to, from) -
                                                                  spec.transition_prob(sigma, t, to, from)));
                    }
                }
                for (int from = 0; from < n; ++from) {
                    double col = 0.0;
                    for (int to = 0; to < n; ++to) col += spec.transition_prob(sigma, t, to, from);
                    worst_col = std::max(worst_col, std::fabs(col - 1.0));
                }
            }
        }
    }
    report(1, "closed-form exponentials", worst_err <= 1e-9 && worst_col <= 1e-12,
           fmt("max err %.2e, col gap %.2e", worst_err, worst_col), timer.seconds(), 5.0);
}

// 2. interpolation identities at p_m = 1 and p_m = 0
void criterion2() {
    Timer timer;
    Rng rng(102);
    double worst = 0.0;
    for (int V : {2, 4, 7}) {
        const MatrixSpec abs = make_spec(Family::absorb, V);
        const MatrixSpec rou1 = make_spec(Family::roulette, V, 1.0);
        const MatrixSpec unif = make_spec(Family::uniform, V);
        const MatrixSpec rou0 = make_spec(Family::roulette, V, 0.0);
        for (int trial = 0; trial < 100; ++trial) {
            const double sigma = 0.001 + 9.0 * rng.uniform();
            for (int to = 0; to < V + 1; ++to) {
                for (int from = 0; from < V + 1; ++from) {
                    worst = std::max(worst, std::fabs(rou1.transition_prob(sigma, 0, to, from) -
                                                      abs.transition_prob(sigma, 0, to, from)));
                }
            }
            for (int to = 0; to < V; ++to) {
                for (int from = 0; from < V; ++from) {
                    worst = std::max(worst, std::fabs(rou0.transition_prob(sigma, 0, to, from) -
                                                      unif.transition_prob(sigma, 0, to, from)));
                }
            }
        }
    }
    report(2, "interpolation identities", worst <= 1e-12, fmt("max gap %.2e", worst),
           timer.seconds(), 0.0);
}

// 3. probs_to_scores vs brute-force mixture
void criterion3() {
    Timer timer;
    Rng rng(103);
    double worst = 0.0;
    for (Family fam : kAllFamilies) {
        for (int trial = 0; trial < 200; ++trial) {
            const int V = 2 + rng.uniform_int(6);
            const double pm = 0.05 + 0.9 * rng.uniform();
            const MatrixSpec spec = make_spec(fam, V, pm);
            const int n = spec.n_states();
            const double sigma = 0.05 + 6.0 * rng.uniform();
            const double t = 0.1 + 0.8 * rng.uniform();
            const token_t xt =
                fam == Family::absorb ? spec.mask_id() : static_cast<token_t>(rng.uniform_int(n));
            const auto f = random_simplex(V, rng);
            const auto closed = probs_to_scores(f, spec, sigma, t, xt);
            const auto brute = oracle::brute_force_score_row(f, spec, sigma, t, xt);
            for (int y = 0; y < n; ++y) {
                worst = std::max(worst, std::fabs(closed[static_cast<size_t>(y)] -
                                                  brute[static_cast<size_t>(y)]));
            }
        }
    }
    report(3, "score reconstruction", worst <= 1e-9, fmt("max gap %.2e", worst), timer.seconds(),
           5.0);
}

// 4. grouped score-entropy kernels vs naive sums
void criterion4() {
    Timer timer;
    Rng rng(104);
    double worst = 0.0;
    for (Family fam : {Family::uniform, Family::absorb, Family::roulette}) {
        for (int trial = 0; trial < 200; ++trial) {
            const int V = 2 + rng.uniform_int(6);
            const double pm = 0.05 + 0.9 * rng.uniform();
            const MatrixSpec spec = make_spec(fam, V, pm);
            const double sigma = 0.05 + 5.0 * rng.uniform();
            const double sp = 0.1 + 3.0 * rng.uniform();
            const token_t x0 = static_cast<token_t>(rng.uniform_int(V));
            const token_t xt = spec.corrupt_token(x0, sigma, 0.4, rng);
            const auto s = random_positive_row(spec.n_states(), rng);
            for (bool withK : {false, true}) {
                const double grouped = sedd_loss_position(spec, sigma, sp, s, x0, xt, withK);
                const double naive = oracle::brute_force_loss_row(spec, sigma, sp, s, x0, xt, withK);
                worst = std::max(worst, std::fabs(grouped - naive));
            }
        }
    }
    report(4, "efficient loss kernels", worst <= 1e-9, fmt("max gap %.2e", worst), timer.seconds(),
           5.0);
}

// 5. analytic bound constants vs Monte Carlo integral
void criterion5() {
    Timer timer;
    Rng rng(105);
    bool pass = true;
    std::string detail;
    struct Case {
        MatrixSpec spec;
        NoiseSchedule sched;
        const char * label;
    };
    const std::vector<Case> cases{
        {make_spec(Family::absorb, 4), {ScheduleKind::loglinear, 0.001}, "absorb"},
        {make_spec(Family::uniform, 4), {ScheduleKind::loglinear, 0.001}, "uniform"},
        {make_spec(Family::roulette, 4, 0.35),
         {ScheduleKind::roulette_loglinear, 0.001, 0, 0, 0.35},
         "roulette(0.35)"},
        {make_spec(Family::roulette, 4, 0.95),
         {ScheduleKind::roulette_loglinear, 0.001, 0, 0, 0.95},
         "roulette(0.95)"},
    };
    const int L = 3;
    for (const auto & c : cases) {
        const auto mc = oracle::mc_integral_outflow(c.spec, c.sched, L, 100000, rng);
        const double href = c.spec.family == Family::uniform
                                ? L * std::log(static_cast<double>(c.spec.vocab.V))
                                : 0.0;
        const double analytic = j2_constant(c.spec, c.sched, L);
        const double gap = std::fabs(analytic - (href + mc.mean));
        if (gap > 3.0 * mc.stderr_of_mean) {
            pass = false;
            detail += fmt("%s gap %.4f > 3se %.4f; ", c.label, gap, 3 * mc.stderr_of_mean);
        }
    }
    if (pass) detail = "all four pairings within 3 stderr at 1e5 samples";
    report(5, "analytic bound constants", pass, detail, timer.seconds(), 60.0);
}

// 6. data-entropy identity via quadrature
void criterion6() {
    Timer timer;
    Rng rng(106);
    bool pass = true;
    std::string detail;
    for (Family fam : {Family::absorb, Family::uniform}) {
        const MatrixSpec spec = make_spec(fam, 3);
        const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
        for (int rep = 0; rep < 3; ++rep) {
            const auto p0 = oracle::random_clean_joint(spec, 2, rng);
            const auto r = oracle::entropy_identity_check(p0, spec, sched, 2048);
            if (r.gap > 1e-3) {
                pass = false;
                detail += fmt("%s gap %.2e; ", to_string(fam), r.gap);
            }
        }
    }
    if (pass) detail = "|H(p0) - RHS| <= 1e-3 for absorb and uniform, 2048-point quadrature";
    report(6, "entropy identity", pass, detail, timer.seconds(), 120.0);
}

// 7. bound tightness with exact scores, plus the per-draw K-term identity
void criterion7() {
    Timer timer;
    Rng rng(107);
    const MatrixSpec spec = make_spec(Family::absorb, 3);
    const NoiseSchedule sched{ScheduleKind::loglinear, 0.001};
    const auto p0 = oracle::random_clean_joint(spec, 2, rng);
    const ExactScoreSource src{p0, spec, sched};
    const int L = 2;
    const double target = p0.entropy() / L;

    // cumulative p0 table for exact x0 draws
    std::vector<double> cum(p0.size());
    double acc = 0.0;
    for (size_t i = 0; i < p0.size(); ++i) cum[i] = (acc += p0.p[i]);

    MeanAccumulator j1_acc, j2_acc;
    double max_identity_gap = 0.0;
    const int64_t draws = 100000;
    for (int64_t k = 0; k < draws; ++k) {
        const double u = rng.uniform();
        size_t idx = 0;
        while (idx + 1 < cum.size() && cum[idx] <= u) ++idx;
        const TokenSequence x0 = p0.sequence_at(idx);
        const double t = rng.uniform(kEvalWindowLo, kEvalWindowHi);
        const uint64_t draw_seed = rng.next_u64();
        Rng r1(draw_seed), r2(draw_seed), r3(draw_seed);
        const double v1 = j1_integrand(src, spec, sched, x0, t, r1);
        const double v2 = j2_integrand(src, spec, sched, x0, t, r2);
        j1_acc.add(v1);
        j2_acc.add(v2);

        // shared-stream K-term identity
        const SigmaValue sv = sched.eval(t);
        TokenSequence xt(x0.size());
        for (size_t i = 0; i < x0.size(); ++i) xt[i] = spec.corrupt_token(x0[i], sv.sigma, t, r3);
        double kterm = 0.0;
        for (size_t i = 0; i < x0.size(); ++i) {
            if (xt[i] != spec.mask_id()) continue;
            kterm += sv.sigma_prime *
                     kernel_K(spec.conditional_ratio(sv.sigma, t, x0[i], xt[i], x0[i]));
        }
        kterm /= L;
        max_identity_gap = std::max(max_identity_gap, std::fabs((v1 - v2) - kterm));
    }
    const double j2_const = j2_constant(spec, sched, L) / L;
    const double j1 = j1_acc.mean();
    const double j2 = j2_acc.mean() + j2_const;
    const double se1 = j1_acc.stderr_of_mean(), se2 = j2_acc.stderr_of_mean();

    const bool p1 = std::fabs(std::exp(j1) - std::exp(target)) <= 3.0 * std::exp(j1) * se1;
    const bool p2 = std::fabs(std::exp(j2) - std::exp(target)) <= 3.0 * std::exp(j2) * se2;
    const bool pid = max_identity_gap <= 1e-12;
    report(7, "bound tightness at exact scores", p1 && p2 && pid,
           fmt("exp(H/L)=%.4f exp(J1)=%.4f+-%.4f exp(J2)=%.4f+-%.4f K-gap %.1e", std::exp(target),
               std::exp(j1), std::exp(j1) * se1, std::exp(j2), std::exp(j2) * se2,
               max_identity_gap),
           timer.seconds(), 0.0);
}

// 8. reverse-process correction fraction vs the forward closed form
void criterion8() {
    Timer timer;
    bool pass = true;
    std::string detail;
    for (double pm : {0.5, 0.95}) {
        Rng rng(108);
        const MatrixSpec spec = make_spec(Family::roulette, 3, pm);
        const NoiseSchedule sched{ScheduleKind::roulette_loglinear, 0.001, 0, 0, pm};
        const auto p0 = oracle::random_clean_joint(spec, 2, rng);
        const ExactScoreSource src{p0, spec, sched};
        SamplerConfig cfg;
        cfg.kind = SamplerKind::analytic;
        cfg.steps = 384;
        cfg.L = 2;
        cfg.t_hi = 1.0 - 1e-6;  // run nearly to the reference horizon
        MeanAccumulator frac;
        const int n_traj = 10000;
        for (int k = 0; k < n_traj; ++k) {
            cfg.seed = 40000 + static_cast<uint64_t>(k);
            const auto g = generate(src, cfg, spec, sched);
            frac.add(count_corrections(g.trajectory, spec));
        }
        const double expect = spec.mask_hit_probability(sched.sigma_at_one());
        const double gap = std::fabs(frac.mean() - expect);
        if (gap > 3.0 * frac.stderr_of_mean()) {
            pass = false;
            detail += fmt("p_m=%.2f: got %.4f want %.4f (3se %.4f); ", pm, frac.mean(), expect,
                          3 * frac.stderr_of_mean());
        } else {
            detail += fmt("p_m=%.2f: %.4f~%.4f; ", pm, frac.mean(), expect);
        }
    }
    report(8, "correction statistic", pass, detail, timer.seconds(), 0.0);
}

// 9. analytic-sampler grouped sums vs dense oracle
void criterion9() {
    Timer timer;
    Rng rng(109);
    double worst = 0.0;
    for (Family fam : kAllFamilies) {
        for (int trial = 0; trial < 200; ++trial) {
            const int V = 2 + rng.uniform_int(6);
            const double pm = 0.05 + 0.9 * rng.uniform();
            const MatrixSpec spec = make_spec(fam, V, pm);
            const int n = spec.n_states();
            const double t = 0.15 + 0.7 * rng.uniform();
            const double sd = 0.02 + 2.0 * rng.uniform();
            const auto srow = random_positive_row(n, rng);
            const token_t xt = static_cast<token_t>(rng.uniform_int(n));

            const auto Q = oracle::dense_rate_matrix(spec, t);
            const auto F = oracle::expm_series(Q, sd);
            const auto B = oracle::expm_series(Q, -sd);
            const TransitionCoeffs inv = spec.coeffs(-sd, t);
            double S = 0.0;
            for (double v : srow) S += v;
            const double s_mask = spec.has_mask() ? srow[static_cast<size_t>(spec.mask_id())] : 0.0;
            for (int prev = 0; prev < n; ++prev) {
                double dense_group = 0.0;
                for (int y = 0; y < n; ++y) dense_group += B.at(prev, y) * srow[static_cast<size_t>(y)];
                const double expect = F.at(xt, prev) * dense_group;

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
                worst = std::max(worst, std::fabs(fwd * group - expect));
            }
        }
    }
    report(9, "analytic sampler grouped sums", worst <= 1e-9, fmt("max gap %.2e", worst),
           timer.seconds(), 0.0);
}

// 10. end-to-end training shrinks the J2 bound; analytic gradients check out
void criterion10() {
    Timer timer;
    const std::string text = app::synth_corpus(100000, 1234);
    const Corpus corpus = Corpus::from_text(text, 32);

    RunConfig cfg;
    cfg.family = Family::absorb;
    cfg.schedule = ScheduleKind::loglinear;
    cfg.L = 32;
    cfg.buckets = 32;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.lr = 0.5;
    cfg.optimizer = "adam";
    cfg.seed = 21;
    cfg.n_samples = 20000;
    cfg.V = corpus.tokenizer.vocab_size();

    // untrained baseline: zero logits = uniform prediction
    Checkpoint base;
    base.config = cfg;
    base.tokenizer = corpus.tokenizer;
    base.params = ModelParams::zeros(cfg.V + 1, cfg.V, cfg.buckets);
    const auto row0 = app::cmd_eval_bound(cfg, base, corpus, BoundKind::J2, "train");

    const Timer train_timer;
    const auto tr = app::cmd_train(cfg, corpus);
    const double train_secs = train_timer.seconds();
    const auto row1 = app::cmd_eval_bound(cfg, tr.checkpoint, corpus, BoundKind::J2, "train");

    const double reduction = 1.0 - row1.estimate.mean / row0.estimate.mean;

    // analytic gradient vs central finite differences on the trained params
    Rng rng(110);
    ModelParams p = tr.checkpoint.params;
    const TokenSequence & x0 = corpus.sequences[0];
    const MatrixSpec spec = cfg.matrix_spec();
    const NoiseSchedule sched = cfg.noise_schedule();
    const double t = 0.4;
    Rng crng(5);
    const TokenSequence xt = spec.corrupt_sequence(x0, t, sched, crng);
    GradTable grad(p);
    accumulate_cedd_grad(p, grad, x0, xt, t, 1.0);
    auto loss_at = [&](const ModelParams & q) {
        const TabularModel m(q);
        double lacc = 0.0;
        const ProbTable f = m.predict(xt, t);
        for (size_t i = 0; i < x0.size(); ++i) lacc -= std::log(f[i][static_cast<size_t>(x0[i])]);
        return lacc;
    };
    double max_rel = 0.0;
    int checked = 0;
    while (checked < 20) {
        const size_t idx = static_cast<size_t>(rng.uniform_int(static_cast<int>(p.logits.size())));
        if (std::fabs(grad.g[idx]) < 1e-8) continue;
        // fourth-order central stencil
        const double h = 1e-4;
        ModelParams q = p;
        auto at = [&](double delta) {
            q.logits[idx] = p.logits[idx] + delta;
            return loss_at(q);
        };
        const double fd = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
        max_rel = std::max(max_rel, std::fabs(grad.g[idx] - fd) /
                                        std::max(std::fabs(fd), 1e-12));
        ++checked;
    }

    const bool pass = reduction >= 0.30 && train_secs < 60.0 && max_rel <= 1e-5;
    report(10, "end-to-end training", pass,
           fmt("J2 %.4f -> %.4f (%.0f%% reduction), train %.1fs, grad rel err %.1e",
               row0.estimate.mean, row1.estimate.mean, 100 * reduction, train_secs, max_rel),
           timer.seconds(), 0.0);
}

// 11. spellcheck beats the majority-character floor
void criterion11() {
    Timer timer;
    const std::string text = app::synth_corpus(130000, 77);
    const std::string train_text = text.substr(0, 100000);
    const std::string clean = text.substr(100000);
    const Corpus corpus = Corpus::from_text(train_text, 32);

    RunConfig cfg;
    cfg.family = Family::roulette;
    cfg.schedule = ScheduleKind::roulette_loglinear;
    cfg.p_m = 0.95;
    cfg.L = 32;
    cfg.buckets = 32;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.lr = 0.5;
    cfg.optimizer = "adam";
    cfg.seed = 33;
    cfg.V = corpus.tokenizer.vocab_size();
    const auto tr = app::cmd_train(cfg, corpus);

    // contaminate 5% of characters with uniform replacements
    Rng rng(111);
    std::string noisy = clean;
    const std::string & charset = corpus.tokenizer.charset;
    int64_t contaminated = 0;
    for (char & c : noisy) {
        if (rng.uniform() < 0.05) {
            c = charset[static_cast<size_t>(rng.uniform_int(static_cast<int>(charset.size())))];
            ++contaminated;
        }
    }
    const auto res = app::cmd_spellcheck(cfg, tr.checkpoint, noisy, clean);
    const bool pass = res.overall_accuracy >= res.majority_baseline;
    report(11, "spellcheck floor", pass,
           fmt("overall %.4f vs majority baseline %.4f ('%c'); corrupted-position %.4f over %lld",
               res.overall_accuracy, res.majority_baseline, res.majority_char,
               res.corrupted_accuracy, static_cast<long long>(res.corrupted_positions)),
           timer.seconds(), 0.0);
}

// 12. bit-identical runs for a fixed seed, independent of thread count
void criterion12() {
    Timer timer;
    const std::string text = app::synth_corpus(30000, 55);
    const Corpus corpus = Corpus::from_text(text, 16);
    RunConfig cfg;
    cfg.family = Family::absorb;
    cfg.schedule = ScheduleKind::loglinear;
    cfg.L = 16;
    cfg.buckets = 8;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.seed = 88;
    cfg.n_samples = 4000;
    cfg.V = corpus.tokenizer.vocab_size();

    const auto t1 = app::cmd_train(cfg, corpus);
    const auto t2 = app::cmd_train(cfg, corpus);
    const bool ck_ok = t1.checkpoint.serialize() == t2.checkpoint.serialize();

    RunConfig scfg = cfg;
    scfg.steps = 32;
    const auto s1 = app::cmd_sample(scfg, t1.checkpoint, 4);
    const auto s2 = app::cmd_sample(scfg, t1.checkpoint, 4);
    const bool sample_ok = s1.sequences == s2.sequences;

    RunConfig e1 = cfg, e4 = cfg;
    e1.threads = 1;
    e4.threads = 4;
    const auto r1 = app::cmd_eval_bound(e1, t1.checkpoint, corpus, BoundKind::J2, "d");
    const auto r4 = app::cmd_eval_bound(e4, t1.checkpoint, corpus, BoundKind::J2, "d");
    const bool est_ok =
        r1.estimate.mean == r4.estimate.mean && r1.estimate.stderr_of_mean == r4.estimate.stderr_of_mean;

    report(12, "determinism", ck_ok && sample_ok && est_ok,
           fmt("checkpoint %s, samples %s, estimates %s", ck_ok ? "ok" : "DIFFER",
               sample_ok ? "ok" : "DIFFER", est_ok ? "ok" : "DIFFER"),
           timer.seconds(), 0.0);
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    criterion11();
    criterion12();
    if (g_failures) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all 12 acceptance criteria passed\n");
    return 0;
}
