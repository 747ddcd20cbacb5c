#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "ddiff/oracle.hpp"
#include "ddiff/process.hpp"
#include "ddiff/schedule.hpp"
#include "ddiff/scores.hpp"
#include "ddiff/types.hpp"

namespace ddiff {

enum class ModelMode {
    cedd,  // logits -> softmax posterior over clean tokens
    sedd,  // logits are log-scores; output is exp(logit + log scale)
};

const char * to_string(ModelMode m);
ModelMode model_mode_from_string(const std::string & s);

// Per-token, per-time-bucket table: row (observed state, bucket) holds V
// logits. The desk-scale stand-in for a sequence model; everything
// downstream only assumes the (x_t, t) -> ProbTable contract.
struct ModelParams {
    int n_obs = 0;  // observed states (V or V+1)
    int V = 0;
    int B = 32;
    ModelMode mode = ModelMode::cedd;
    std::vector<double> logits;  // [n_obs * B][V], flattened

    static ModelParams zeros(int n_obs, int V, int B, ModelMode mode = ModelMode::cedd);

    int bucket(double t) const {
        int b = static_cast<int>(t * B);
        return b < 0 ? 0 : (b >= B ? B - 1 : b);
    }
    size_t row_offset(token_t obs, int bucket) const {
        return (static_cast<size_t>(obs) * B + static_cast<size_t>(bucket)) * V;
    }
    std::span<const double> row(token_t obs, int bucket) const {
        return {logits.data() + row_offset(obs, bucket), static_cast<size_t>(V)};
    }
};

std::vector<double> softmax(std::span<const double> z);

struct Model {
    virtual ~Model() = default;
    virtual ProbTable predict(const TokenSequence & xt, double t) const = 0;
};

struct TabularModel final : Model {
    ModelParams params;

    explicit TabularModel(ModelParams p) : params(std::move(p)) {}
    ProbTable predict(const TokenSequence & xt, double t) const override;
};

// Exact per-position posterior of a tiny chain, for bound-tightness tests.
struct ExactPosteriorModel final : Model {
    oracle::JointDistribution p0;
    MatrixSpec spec;
    NoiseSchedule schedule;

    ExactPosteriorModel(oracle::JointDistribution p, MatrixSpec sp, NoiseSchedule sc)
        : p0(std::move(p)), spec(std::move(sp)), schedule(sc) {}
    ProbTable predict(const TokenSequence & xt, double t) const override;
};

// ---- gradients ----

struct GradTable {
    std::vector<double> g;  // same shape as ModelParams::logits
    explicit GradTable(const ModelParams & p) : g(p.logits.size(), 0.0) {}
    void clear() { std::fill(g.begin(), g.end(), 0.0); }
};

// d/dlogits of w_t * cedd cross-entropy for one (x0, xt, t) sample.
void accumulate_cedd_grad(const ModelParams & params, GradTable & grad, const TokenSequence & x0,
                          const TokenSequence & xt, double t, double w_t);

// d/dlogits of the score-entropy loss in sedd mode (logits = log-scores,
// scale folded in): per position, grad[y] = sigma' Q(xt,y) (s[y] - ratio[y]).
void accumulate_sedd_grad(const ModelParams & params, GradTable & grad, const MatrixSpec & spec,
                          const NoiseSchedule & schedule, const TokenSequence & x0,
                          const TokenSequence & xt, double t);

struct OptimizerConfig {
    enum class Kind { sgd, adam } kind = Kind::sgd;
    double lr = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
};

struct Optimizer {
    OptimizerConfig cfg;
    std::vector<double> m, v;
    int64_t step_count = 0;

    explicit Optimizer(OptimizerConfig c) : cfg(c) {}
    void step(ModelParams & params, const GradTable & grad);
};

// One-sample convenience wrapper: accumulate the cedd gradient and take a
// single SGD step.
void model_grad_step(ModelParams & params, const TokenSequence & x0, const TokenSequence & xt,
                     double t, double w_t, double lr);

// ---- score sources ----

struct ScoreSource {
    virtual ~ScoreSource() = default;
    // Score rows for every position of xt at time t. Rows are over all n
    // states with the own-token entry fixed to 1.
    virtual ScoreTable scores(const TokenSequence & xt, double t) const = 0;
};

// CEDD reconstruction: model posterior -> conditional-ratio mixture. When
// rescale_sigma is set, the sigma entering the ratio coefficients is passed
// through rescale_sigma_for_generation (roulette: unmasked positions only).
struct CeddScoreSource final : ScoreSource {
    const Model & model;
    MatrixSpec spec;
    NoiseSchedule schedule;
    bool rescale_sigma = false;

    CeddScoreSource(const Model & m, MatrixSpec sp, NoiseSchedule sc, bool rescale = false)
        : model(m), spec(std::move(sp)), schedule(sc), rescale_sigma(rescale) {}
    ScoreTable scores(const TokenSequence & xt, double t) const override;
};

// sedd-mode tabular model: scores = exp(logit) * closed-form scale factor.
struct SeddScoreSource final : ScoreSource {
    const ModelParams & params;
    MatrixSpec spec;
    NoiseSchedule schedule;

    SeddScoreSource(const ModelParams & p, MatrixSpec sp, NoiseSchedule sc)
        : params(p), spec(std::move(sp)), schedule(sc) {}
    ScoreTable scores(const TokenSequence & xt, double t) const override;
};

// Exact concrete scores from a tiny-chain joint; reference for tightness
// and sampler consistency tests.
struct ExactScoreSource final : ScoreSource {
    oracle::JointDistribution p0;
    MatrixSpec spec;
    NoiseSchedule schedule;

    ExactScoreSource(oracle::JointDistribution p, MatrixSpec sp, NoiseSchedule sc)
        : p0(std::move(p)), spec(std::move(sp)), schedule(sc) {}
    ScoreTable scores(const TokenSequence & xt, double t) const override;

  private:
    mutable std::map<double, oracle::JointDistribution> cache_;
    mutable std::mutex mu_;
};

std::unique_ptr<ScoreSource> make_score_source(const Model * model, const ModelParams * params,
                                               const MatrixSpec & spec, const NoiseSchedule & schedule,
                                               bool rescale_sigma);

}  // namespace ddiff
