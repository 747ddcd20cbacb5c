// Desk-scale engine for continuous-time discrete-diffusion language models:
// train a tabular model, generate with reverse-process samplers, estimate
// perplexity bounds, and cross-check every closed form against a brute-force
// oracle.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "ddiff/app.hpp"
#include "ddiff/oracle.hpp"

using namespace ddiff;

static void add_common_flags(CLI::App * cmd, RunConfig & cfg, std::string & family,
                             std::string & schedule) {
    cmd->add_option("--family", family, "uniform | absorb | roulette | eroulette");
    cmd->add_option("--p-m", cfg.p_m, "roulette mask probability in (0,1]");
    cmd->add_option("--eroulette-a", cfg.eroulette_a, "eroulette p_m(t)=t^(1/(a t)) parameter");
    cmd->add_option("--schedule", schedule, "loglinear | geometric | roulette_loglinear");
    cmd->add_option("--eps", cfg.eps, "schedule floor epsilon");
    cmd->add_option("--sigma-min", cfg.sigma_min, "geometric schedule sigma_min");
    cmd->add_option("--sigma-max", cfg.sigma_max, "geometric schedule sigma_max");
    cmd->add_option("--seq-len,-L", cfg.L, "sequence length");
    cmd->add_option("--buckets,-B", cfg.buckets, "time buckets of the tabular model");
    cmd->add_option("--seed", cfg.seed, "master RNG seed");
    cmd->add_option("--threads", cfg.threads, "worker threads for estimation");
}

static void apply_enums(RunConfig & cfg, const std::string & family, const std::string & schedule) {
    if (!family.empty()) cfg.family = family_from_string(family);
    if (!schedule.empty()) cfg.schedule = schedule_kind_from_string(schedule);
    // pick the family's canonical schedule when none was given explicitly
    if (schedule.empty()) {
        switch (cfg.family) {
            case Family::roulette: cfg.schedule = ScheduleKind::roulette_loglinear; break;
            case Family::absorb:
            case Family::eroulette:
            case Family::uniform: cfg.schedule = ScheduleKind::loglinear; break;
        }
    }
}

int main(int argc, char ** argv) {
    CLI::App app{"ddiff: discrete-diffusion language modeling at desk scale"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string family_s, schedule_s;
    std::string corpus_path, out_path, checkpoint_path, loss_csv, eval_path, results_csv;
    std::string noisy_path, clean_path, prefix_text, weighting_s = "cedd", loss_mode_s = "cedd";
    std::string sampler_s = "analytic", estimator_s = "J2", dataset_name = "eval", batching_s = "pooled";
    int n_sequences = 4;

    auto * train = app.add_subcommand("train", "train the tabular model on a character corpus");
    add_common_flags(train, cfg, family_s, schedule_s);
    train->add_option("--corpus", corpus_path, "UTF-8 text corpus")->required();
    train->add_option("--out", out_path, "checkpoint output path")->required();
    train->add_option("--loss-csv", loss_csv, "per-step loss log");
    train->add_option("--weighting", weighting_s, "cedd | cedd_star");
    train->add_option("--loss", loss_mode_s, "cedd (cross-entropy) | sedd (score entropy)");
    train->add_option("--epochs", cfg.epochs, "training epochs");
    train->add_option("--batch-size", cfg.batch_size, "sequences per step");
    train->add_option("--lr", cfg.lr, "learning rate");
    train->add_option("--optimizer", cfg.optimizer, "sgd | adam");

    auto * sample = app.add_subcommand("sample", "generate sequences with the reverse process");
    add_common_flags(sample, cfg, family_s, schedule_s);
    sample->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    sample->add_option("--out", out_path, "sample file")->required();
    sample->add_option("--sampler", sampler_s, "euler | analytic");
    sample->add_option("--steps", cfg.steps, "reverse steps");
    sample->add_option("--n", n_sequences, "number of sequences");
    sample->add_option("--prefix", prefix_text, "conditional prefix text");

    auto * evalb = app.add_subcommand("eval-bound", "Monte Carlo perplexity bound on a test corpus");
    add_common_flags(evalb, cfg, family_s, schedule_s);
    evalb->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    evalb->add_option("--corpus", eval_path, "evaluation corpus")->required();
    evalb->add_option("--out", results_csv, "results CSV (appended)")->required();
    evalb->add_option("--estimator", estimator_s, "J1 | J2");
    evalb->add_option("--n-samples", cfg.n_samples, "Monte Carlo draws");
    evalb->add_option("--dataset-name", dataset_name, "label for the results row");
    evalb->add_option("--batching", batching_s, "pooled | per_sequence");
    evalb->add_flag("--stratified", cfg.stratified_t, "stratify t draws over the window");

    auto * verify = app.add_subcommand("verify", "run the brute-force oracle checks");
    add_common_flags(verify, cfg, family_s, schedule_s);

    auto * spell = app.add_subcommand("spellcheck", "correct a contaminated character file");
    add_common_flags(spell, cfg, family_s, schedule_s);
    spell->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    spell->add_option("--noisy", noisy_path, "contaminated text file")->required();
    spell->add_option("--clean", clean_path, "clean reference file")->required();
    spell->add_option("--out", out_path, "corrected text output");
    spell->add_option("--t-star", cfg.spellcheck_t,
                      "noise time the noisy text is assumed to sit at (default 0.15)");
    spell->add_flag("--replace-all", cfg.spellcheck_replace_all,
                    "replace every position with the argmax, not only disagreements");

    CLI11_PARSE(app, argc, argv);

    try {
        apply_enums(cfg, family_s, schedule_s);
        cfg.weighting = weight_kind_from_string(weighting_s);
        cfg.loss_mode = model_mode_from_string(loss_mode_s);
        cfg.sampler = sampler_kind_from_string(sampler_s);
        if (batching_s == "per_sequence") {
            cfg.per_sequence_batching = true;
        } else if (batching_s != "pooled") {
            throw config_error("unknown batching mode: " + batching_s);
        }

        if (train->parsed()) {
            // default for spellcheck-capable training: roulette p_m = 0.95
            const Corpus corpus = Corpus::from_file(corpus_path, cfg.L);
            cfg.V = corpus.tokenizer.vocab_size();
            cfg.validate();
            const auto res = app::cmd_train(cfg, corpus, loss_csv);
            res.checkpoint.save(out_path);
            std::printf("trained %zu steps: loss %.4f -> %.4f (per token)\n",
                        res.step_losses.size(), res.first_loss, res.last_loss);
            std::printf("checkpoint written to %s\n", out_path.c_str());
            if (corpus.unknown_count > 0) {
                std::printf("unknown characters mapped to UNK: %lld\n",
                            static_cast<long long>(corpus.unknown_count));
            }
        } else if (sample->parsed()) {
            const Checkpoint ck = Checkpoint::load(checkpoint_path);
            const auto res = app::cmd_sample(cfg, ck, n_sequences, prefix_text);
            app::write_samples(res, ck.config, out_path);
            std::printf("%d samples written to %s (clamped rows: %lld)\n", n_sequences,
                        out_path.c_str(), static_cast<long long>(res.clamped_rows));
        } else if (evalb->parsed()) {
            const Checkpoint ck = Checkpoint::load(checkpoint_path);
            const Corpus eval_corpus =
                Corpus::from_text(read_text_file(eval_path), ck.config.L, ck.tokenizer);
            const BoundKind which = estimator_s == "J1" ? BoundKind::J1 : BoundKind::J2;
            const auto row = app::cmd_eval_bound(cfg, ck, eval_corpus, which, dataset_name);
            app::append_results_csv(results_csv, ck.config, row);
            std::printf("%s = %.5f +- %.5f  (perplexity %.3f, %lld draws)\n",
                        to_string(row.estimate.which), row.estimate.mean,
                        row.estimate.stderr_of_mean, row.estimate.perplexity,
                        static_cast<long long>(row.estimate.n_samples));
        } else if (verify->parsed()) {
            cfg.V = cfg.V > 0 ? cfg.V : 5;
            const auto checks = app::cmd_verify(cfg);
            std::fputs(app::format_verify_table(checks).c_str(), stdout);
            for (const auto & c : checks) {
                if (!c.pass) return 1;
            }
        } else if (spell->parsed()) {
            const Checkpoint ck = Checkpoint::load(checkpoint_path);
            const std::string noisy = read_text_file(noisy_path);
            const std::string clean = read_text_file(clean_path);
            const auto res = app::cmd_spellcheck(cfg, ck, noisy, clean);
            if (!out_path.empty()) {
                std::ofstream f(out_path);
                f << res.corrected;
            }
            std::printf("positions: %lld, corrupted: %lld\n",
                        static_cast<long long>(res.total_positions),
                        static_cast<long long>(res.corrupted_positions));
            std::printf("corrupted-position accuracy: %.4f\n", res.corrupted_accuracy);
            std::printf("overall accuracy:            %.4f\n", res.overall_accuracy);
            std::printf("majority-char baseline:      %.4f ('%c')\n", res.majority_baseline,
                        res.majority_char);
        }
    } catch (const std::exception & e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
