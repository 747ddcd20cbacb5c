#include "ddiff/model.hpp"

#include <algorithm>
#include <cmath>

namespace ddiff {

const char * to_string(ModelMode m) {
    return m == ModelMode::cedd ? "cedd" : "sedd";
}

ModelMode model_mode_from_string(const std::string & s) {
    if (s == "cedd") return ModelMode::cedd;
    if (s == "sedd") return ModelMode::sedd;
    throw config_error("unknown model mode: " + s);
}

ModelParams ModelParams::zeros(int n_obs, int V, int B, ModelMode mode) {
    ModelParams p;
    p.n_obs = n_obs;
    p.V = V;
    p.B = B;
    p.mode = mode;
    p.logits.assign(static_cast<size_t>(n_obs) * B * V, 0.0);
    return p;
}

std::vector<double> softmax(std::span<const double> z) {
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    std::vector<double> out(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        sum += out[i];
    }
    for (double & v : out) v /= sum;
    return out;
}

ProbTable TabularModel::predict(const TokenSequence & xt, double t) const {
    const int b = params.bucket(t);
    ProbTable f(xt.size());
    for (size_t i = 0; i < xt.size(); ++i) {
        f[i] = softmax(params.row(xt[i], b));
    }
    return f;
}

ProbTable ExactPosteriorModel::predict(const TokenSequence & xt, double t) const {
    const double sigma = schedule.eval(t).sigma;
    return oracle::exact_posterior(p0, spec, sigma, t, xt);
}

void accumulate_cedd_grad(const ModelParams & params, GradTable & grad, const TokenSequence & x0,
                          const TokenSequence & xt, double t, double w_t) {
    const int b = params.bucket(t);
    for (size_t i = 0; i < xt.size(); ++i) {
        const size_t off = params.row_offset(xt[i], b);
        std::vector<double> p = softmax(params.row(xt[i], b));
        for (int y = 0; y < params.V; ++y) {
            grad.g[off + static_cast<size_t>(y)] += w_t * p[static_cast<size_t>(y)];
        }
        grad.g[off + static_cast<size_t>(x0[i])] -= w_t;
    }
}

void accumulate_sedd_grad(const ModelParams & params, GradTable & grad, const MatrixSpec & spec,
                          const NoiseSchedule & schedule, const TokenSequence & x0,
                          const TokenSequence & xt, double t) {
    const SigmaValue sv = schedule.eval(t);
    const int b = params.bucket(t);
    for (size_t i = 0; i < xt.size(); ++i) {
        if (spec.family == Family::absorb && xt[i] != spec.mask_id()) continue;
        const size_t off = params.row_offset(xt[i], b);
        const std::span<const double> z = params.row(xt[i], b);
        for (int y = 0; y < params.V; ++y) {
            if (static_cast<token_t>(y) == xt[i]) continue;
            const double w = spec.rate_weight(t, xt[i], static_cast<token_t>(y));
            if (w == 0.0) continue;
            const double scale = sedd_scale_factor(spec, sv.sigma, t, xt[i], static_cast<token_t>(y));
            const double s = std::exp(z[static_cast<size_t>(y)]) * scale;
            const double ratio =
                spec.conditional_ratio(sv.sigma, t, static_cast<token_t>(y), xt[i], x0[i]);
            grad.g[off + static_cast<size_t>(y)] += sv.sigma_prime * w * (s - ratio);
        }
    }
}

void Optimizer::step(ModelParams & params, const GradTable & grad) {
    ++step_count;
    if (cfg.kind == OptimizerConfig::Kind::sgd) {
        for (size_t i = 0; i < params.logits.size(); ++i) {
            params.logits[i] -= cfg.lr * grad.g[i];
        }
        return;
    }
    if (m.empty()) {
        m.assign(params.logits.size(), 0.0);
        v.assign(params.logits.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < params.logits.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad.g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad.g[i] * grad.g[i];
        params.logits[i] -= cfg.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
    }
}

void model_grad_step(ModelParams & params, const TokenSequence & x0, const TokenSequence & xt,
                     double t, double w_t, double lr) {
    GradTable grad(params);
    accumulate_cedd_grad(params, grad, x0, xt, t, w_t);
    Optimizer opt({.kind = OptimizerConfig::Kind::sgd, .lr = lr});
    opt.step(params, grad);
}

ScoreTable CeddScoreSource::scores(const TokenSequence & xt, double t) const {
    const double sigma = schedule.eval(t).sigma;
    const ProbTable f = model.predict(xt, t);
    ScoreTable s(xt.size());
    for (size_t i = 0; i < xt.size(); ++i) {
        const bool masked = spec.has_mask() && xt[i] == spec.mask_id();
        if (spec.family == Family::absorb && !masked) {
            // unmasked absorb positions never move and their ratios are never
            // consulted; the trivial row keeps callers total
            std::vector<double> row(static_cast<size_t>(spec.n_states()), 0.0);
            row[static_cast<size_t>(xt[i])] = 1.0;
            s[i] = std::move(row);
            continue;
        }
        double sig = sigma;
        if (rescale_sigma) {
            // roulette rescaling touches only the unmasked-position ratios
            if (spec.family == Family::uniform || !masked) {
                sig = rescale_sigma_for_generation(spec.family, sigma);
            }
        }
        s[i] = probs_to_scores(f[i], spec, sig, t, xt[i]);
    }
    return s;
}

ScoreTable SeddScoreSource::scores(const TokenSequence & xt, double t) const {
    const SigmaValue sv = schedule.eval(t);
    const int b = params.bucket(t);
    const int n = spec.n_states();
    ScoreTable s(xt.size());
    for (size_t i = 0; i < xt.size(); ++i) {
        const std::span<const double> z = params.row(xt[i], b);
        std::vector<double> row(static_cast<size_t>(n), 1.0);
        for (int y = 0; y < params.V; ++y) {
            const double scale = sedd_scale_factor(spec, sv.sigma, t, xt[i], static_cast<token_t>(y));
            row[static_cast<size_t>(y)] = std::exp(z[static_cast<size_t>(y)]) * scale;
        }
        row[static_cast<size_t>(xt[i])] = 1.0;
        if (spec.has_mask()) row[static_cast<size_t>(spec.mask_id())] = 1.0;
        s[i] = std::move(row);
    }
    return s;
}

ScoreTable ExactScoreSource::scores(const TokenSequence & xt, double t) const {
    oracle::JointDistribution pt;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(t);
        if (it == cache_.end()) {
            if (cache_.size() > 4096) cache_.clear();
            it = cache_.emplace(t, oracle::exact_sequence_distribution(p0, spec, t, schedule)).first;
        }
        pt = it->second;
    }
    auto rows = oracle::exact_scores(pt, xt);
    ScoreTable s(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        rows[i][static_cast<size_t>(xt[i])] = 1.0;
        s[i] = std::move(rows[i]);
    }
    return s;
}

std::unique_ptr<ScoreSource> make_score_source(const Model * model, const ModelParams * params,
                                               const MatrixSpec & spec, const NoiseSchedule & schedule,
                                               bool rescale_sigma) {
    if (params && params->mode == ModelMode::sedd) {
        return std::make_unique<SeddScoreSource>(*params, spec, schedule);
    }
    if (!model) throw config_error("make_score_source: no model");
    return std::make_unique<CeddScoreSource>(*model, spec, schedule, rescale_sigma);
}

}  // namespace ddiff
