#include "ddiff/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace ddiff {

const char * to_string(BoundKind k) {
    return k == BoundKind::J1 ? "J1" : "J2";
}

double j2_constant(const MatrixSpec & spec, const NoiseSchedule & schedule, int L) {
    spec.validate();
    schedule.validate();
    const double eps = schedule.eps;
    switch (spec.family) {
        case Family::absorb:
            if (schedule.kind != ScheduleKind::loglinear) {
                throw config_error("j2_constant: absorb requires the loglinear schedule");
            }
            return L * (eps - 1.0);  // H(p_r) = 0
        case Family::roulette: {
            if (schedule.kind != ScheduleKind::roulette_loglinear ||
                std::fabs(schedule.p_m - spec.p_m) > 1e-12) {
                throw config_error("j2_constant: roulette requires roulette_loglinear with matching p_m");
            }
            const int n = spec.n_states();
            return (1.0 - (1.0 - spec.p_m) / (n - 1)) * (L / spec.p_m) * (eps - 1.0);
        }
        case Family::uniform: {
            const int V = spec.vocab.V;
            const double total_noise = schedule.sigma_at_one() - schedule.sigma_at_zero();
            return L * std::log(static_cast<double>(V)) -
                   (1.0 - 1.0 / V) * L * total_noise;
        }
        case Family::eroulette:
            throw config_error("j2_constant: eroulette unsupported");
    }
    return 0.0;
}

static double bound_integrand(const ScoreSource & source, const MatrixSpec & spec,
                              const NoiseSchedule & schedule, const TokenSequence & x0, double t,
                              Rng & rng, bool include_K) {
    const SigmaValue sv = schedule.eval(t);
    const int L = static_cast<int>(x0.size());
    TokenSequence xt(x0.size());
    for (size_t i = 0; i < x0.size(); ++i) {
        xt[i] = spec.corrupt_token(x0[i], sv.sigma, t, rng);
    }
    const ScoreTable s = source.scores(xt, t);
    double acc = 0.0;
    for (int i = 0; i < L; ++i) {
        acc += sedd_loss_position(spec, sv.sigma, sv.sigma_prime, s[static_cast<size_t>(i)], x0[i],
                                  xt[i], include_K);
    }
    return acc / L;
}

double j1_integrand(const ScoreSource & source, const MatrixSpec & spec,
                    const NoiseSchedule & schedule, const TokenSequence & x0, double t, Rng & rng) {
    return bound_integrand(source, spec, schedule, x0, t, rng, /*include_K=*/true);
}

double j2_integrand(const ScoreSource & source, const MatrixSpec & spec,
                    const NoiseSchedule & schedule, const TokenSequence & x0, double t, Rng & rng) {
    return bound_integrand(source, spec, schedule, x0, t, rng, /*include_K=*/false);
}

namespace {

struct Chunk {
    int64_t begin = 0;
    int64_t end = 0;
    MeanAccumulator acc;
};

}  // namespace

BoundEstimate estimate_bound(BoundKind which, const ScoreSource & source, const MatrixSpec & spec,
                             const NoiseSchedule & schedule,
                             const std::vector<TokenSequence> & dataset, int64_t n_samples,
                             uint64_t seed, const EstimateOptions & opts) {
    if (dataset.empty()) throw domain_error("estimate_bound: empty dataset");
    if (n_samples <= 0) throw domain_error("estimate_bound: empty estimate");
    const bool include_K = which == BoundKind::J1;
    const int L = static_cast<int>(dataset.front().size());

    std::vector<Chunk> chunks;
    if (opts.batching == Batching::pooled) {
        const int64_t chunk_size = 512;
        for (int64_t b = 0; b < n_samples; b += chunk_size) {
            chunks.push_back({b, std::min(n_samples, b + chunk_size), {}});
        }
    } else {
        // one chunk per sequence; n_samples caps the number of sequences used
        const int64_t n_seq = std::min<int64_t>(n_samples, static_cast<int64_t>(dataset.size()));
        for (int64_t i = 0; i < n_seq; ++i) chunks.push_back({i, i + 1, {}});
    }

    auto run_chunk = [&](size_t ci) {
        Chunk & ch = chunks[ci];
        Rng rng = Rng::child(seed, static_cast<uint64_t>(ci));
        if (opts.batching == Batching::pooled) {
            const int64_t count = ch.end - ch.begin;
            for (int64_t k = 0; k < count; ++k) {
                const auto & x0 = dataset[rng.uniform_int(static_cast<int>(dataset.size()))];
                double t;
                if (opts.stratified_t) {
                    const int64_t g = ch.begin + k;
                    const double frac = (static_cast<double>(g % 1024) + rng.uniform()) / 1024.0;
                    t = opts.t_lo + frac * (opts.t_hi - opts.t_lo);
                } else {
                    t = rng.uniform(opts.t_lo, opts.t_hi);
                }
                ch.acc.add(bound_integrand(source, spec, schedule, x0, t, rng, include_K));
            }
        } else {
            // per-sequence protocol: many t draws, averaged in small batches
            const auto & x0 = dataset[static_cast<size_t>(ch.begin)];
            const int n_batches = opts.per_sequence_draws / opts.per_sequence_batch;
            for (int b = 0; b < n_batches; ++b) {
                double batch_sum = 0.0;
                for (int j = 0; j < opts.per_sequence_batch; ++j) {
                    const double t = rng.uniform(opts.t_lo, opts.t_hi);
                    batch_sum += bound_integrand(source, spec, schedule, x0, t, rng, include_K);
                }
                ch.acc.add(batch_sum / opts.per_sequence_batch);
            }
        }
    };

    const int threads = std::max(1, opts.threads);
    if (threads == 1) {
        for (size_t ci = 0; ci < chunks.size(); ++ci) run_chunk(ci);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (size_t ci = next.fetch_add(1); ci < chunks.size(); ci = next.fetch_add(1)) {
                    run_chunk(ci);
                }
            });
        }
        for (auto & th : pool) th.join();
    }

    MeanAccumulator total;
    for (const Chunk & ch : chunks) total.merge(ch.acc);

    BoundEstimate est;
    est.which = which;
    est.n_samples = total.count;
    est.stderr_of_mean = total.stderr_of_mean();
    est.mean = total.mean();
    if (which == BoundKind::J2) {
        est.analytic_constant = j2_constant(spec, schedule, L) / L;
        est.mean += est.analytic_constant;
    }
    est.perplexity = std::exp(est.mean);
    return est;
}

}  // namespace ddiff
