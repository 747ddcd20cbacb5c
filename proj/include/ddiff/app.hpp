#pragma once

#include <string>
#include <vector>

#include "ddiff/bounds.hpp"
#include "ddiff/checkpoint.hpp"
#include "ddiff/config.hpp"
#include "ddiff/samplers.hpp"
#include "ddiff/tokenizer.hpp"

namespace ddiff::app {

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> step_losses;  // per-token, per optimizer step
    double first_loss = 0.0;
    double last_loss = 0.0;
};

// Cross-entropy (or score-entropy) training of the tabular model: sample a
// batch of (x0, t), corrupt, accumulate analytic gradients, step.
TrainResult cmd_train(const RunConfig & config, const Corpus & corpus,
                      const std::string & loss_csv_path = "");

struct SampleResult {
    std::vector<TokenSequence> sequences;
    std::vector<std::string> texts;
    int64_t clamped_rows = 0;
};

SampleResult cmd_sample(const RunConfig & config, const Checkpoint & ck, int n_sequences,
                        const std::string & prefix_text = "");
void write_samples(const SampleResult & res, const RunConfig & config, const std::string & path);

struct EvalRow {
    std::string dataset;
    BoundEstimate estimate;
    uint64_t seed = 0;
};

EvalRow cmd_eval_bound(const RunConfig & config, const Checkpoint & ck, const Corpus & eval_corpus,
                       BoundKind which, const std::string & dataset_name);
void append_results_csv(const std::string & path, const RunConfig & config, const EvalRow & row);

struct VerifyCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;
    double tol = 0.0;
    bool pass = false;
};

// Brute-force oracle checks on a tiny configuration derived from `config`.
std::vector<VerifyCheck> cmd_verify(const RunConfig & config);
std::string format_verify_table(const std::vector<VerifyCheck> & checks);

struct SpellcheckResult {
    std::string corrected;
    int64_t corrupted_positions = 0;
    int64_t corrupted_fixed = 0;       // corrupted positions restored to the reference
    int64_t total_positions = 0;
    int64_t total_correct = 0;         // output chars matching the reference
    double corrupted_accuracy = 0.0;
    double overall_accuracy = 0.0;
    double majority_baseline = 0.0;    // corpus frequency of the majority character
    char majority_char = ' ';
};

// Treats the noisy text as x_t at config.spellcheck_t, replaces positions by
// the model argmax (optionally only where the argmax disagrees), and scores
// against the clean reference.
SpellcheckResult cmd_spellcheck(const RunConfig & config, const Checkpoint & ck,
                                const std::string & noisy_text, const std::string & clean_text);

// Deterministic synthetic character corpus with a skewed letter
// distribution; used by tests and the demo configs.
std::string synth_corpus(size_t n_chars, uint64_t seed);

}  // namespace ddiff::app
