#include "ddiff/app.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ddiff/oracle.hpp"

namespace ddiff::app {

TrainResult cmd_train(const RunConfig & config_in, const Corpus & corpus,
                      const std::string & loss_csv_path) {
    RunConfig config = config_in;
    if (config.V == 0) config.V = corpus.tokenizer.vocab_size();
    if (config.V != corpus.tokenizer.vocab_size()) {
        throw config_error("cmd_train: config V does not match corpus charset");
    }
    config.validate();
    const MatrixSpec spec = config.matrix_spec();
    const NoiseSchedule schedule = config.noise_schedule();
    const WeightSchedule weights = config.weight_schedule();

    ModelParams params = ModelParams::zeros(spec.n_states(), config.V, config.buckets, config.loss_mode);
    OptimizerConfig oc;
    oc.kind = config.optimizer == "adam" ? OptimizerConfig::Kind::adam : OptimizerConfig::Kind::sgd;
    oc.lr = config.lr;
    Optimizer opt(oc);

    Rng rng(config.seed);
    const int64_t steps_per_epoch =
        std::max<int64_t>(1, static_cast<int64_t>(corpus.sequences.size()) / config.batch_size);

    std::ofstream csv;
    if (!loss_csv_path.empty()) {
        csv.open(loss_csv_path);
        csv << "step,per_token_loss,weight,t\n";
    }

    TrainResult res;
    GradTable grad(params);
    int64_t step_idx = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (int64_t sb = 0; sb < steps_per_epoch; ++sb) {
            grad.clear();
            double batch_loss = 0.0;
            double last_t = 0.0;
            double last_w = 1.0;
            for (int b = 0; b < config.batch_size; ++b) {
                const TokenSequence & x0 =
                    corpus.sequences[static_cast<size_t>(rng.uniform_int(static_cast<int>(corpus.sequences.size())))];
                const double t = rng.uniform();  // training samples t over the full [0,1)
                const TokenSequence xt = spec.corrupt_sequence(x0, t, schedule, rng);
                last_t = t;
                if (config.loss_mode == ModelMode::cedd) {
                    const double w_t = weights.weight(t);
                    last_w = w_t;
                    const int bucket = params.bucket(t);
                    double seq_loss = 0.0;
                    for (size_t i = 0; i < xt.size(); ++i) {
                        const size_t off = params.row_offset(xt[i], bucket);
                        const std::vector<double> p = softmax(params.row(xt[i], bucket));
                        for (int y = 0; y < params.V; ++y) {
                            grad.g[off + static_cast<size_t>(y)] += w_t * p[static_cast<size_t>(y)];
                        }
                        grad.g[off + static_cast<size_t>(x0[i])] -= w_t;
                        double px = p[static_cast<size_t>(x0[i])];
                        if (config.clamp_zero_probs && px < 1e-30) px = 1e-30;
                        seq_loss -= w_t * std::log(px);
                    }
                    batch_loss += seq_loss / static_cast<double>(config.L);
                } else {
                    accumulate_sedd_grad(params, grad, spec, schedule, x0, xt, t);
                    const SigmaValue sv = schedule.eval(t);
                    const SeddScoreSource src(params, spec, schedule);
                    const ScoreTable s = src.scores(xt, t);
                    double ls = 0.0;
                    for (size_t i = 0; i < xt.size(); ++i) {
                        ls += sedd_loss_position(spec, sv.sigma, sv.sigma_prime, s[i], x0[i], xt[i],
                                                 /*include_K=*/false);
                    }
                    batch_loss += ls / static_cast<double>(config.L);
                }
            }
            const double scale = 1.0 / (static_cast<double>(config.batch_size) * config.L);
            for (double & g : grad.g) g *= scale;
            opt.step(params, grad);
            batch_loss /= config.batch_size;
            if (!std::isfinite(batch_loss)) {
                throw std::runtime_error("cmd_train: non-finite loss at step " +
                                         std::to_string(step_idx) + "; aborting");
            }
            if (step_idx == 0) res.first_loss = batch_loss;
            res.last_loss = batch_loss;
            res.step_losses.push_back(batch_loss);
            if (csv.is_open()) {
                csv << step_idx << "," << format_double(batch_loss) << "," << format_double(last_w)
                    << "," << format_double(last_t) << "\n";
            }
            ++step_idx;
        }
    }

    res.checkpoint.config = config;
    res.checkpoint.tokenizer = corpus.tokenizer;
    res.checkpoint.params = std::move(params);
    return res;
}

SampleResult cmd_sample(const RunConfig & config, const Checkpoint & ck, int n_sequences,
                        const std::string & prefix_text) {
    const MatrixSpec spec = ck.config.matrix_spec();
    const NoiseSchedule schedule = ck.config.noise_schedule();
    const TabularModel model(ck.params);
    const bool rescale = ck.params.mode == ModelMode::cedd;
    auto source = make_score_source(&model, &ck.params, spec, schedule, rescale);

    SamplerConfig scfg;
    scfg.kind = config.sampler;
    scfg.steps = config.steps;
    scfg.L = config.L;
    scfg.use_sigma_rescale = rescale;
    if (!prefix_text.empty()) {
        scfg.prefix = ck.tokenizer.encode(prefix_text).ids;
    }

    SampleResult out;
    for (int k = 0; k < n_sequences; ++k) {
        scfg.seed = Rng::child(config.seed, static_cast<uint64_t>(k)).next_u64();
        const GenerateResult g = generate(*source, scfg, spec, schedule);
        out.clamped_rows += g.trajectory.clamped_rows;
        out.sequences.push_back(g.sequence);
        out.texts.push_back(ck.tokenizer.decode(g.sequence));
    }
    return out;
}

void write_samples(const SampleResult & res, const RunConfig & config, const std::string & path) {
    std::ofstream f(path);
    if (!f) throw config_error("cannot write samples: " + path);
    f << "# build = " << build_id() << "\n";
    std::istringstream cfg(config.serialize());
    std::string line;
    while (std::getline(cfg, line)) f << "# " << line << "\n";
    f << "# clamped_rows = " << res.clamped_rows << "\n";
    for (size_t k = 0; k < res.texts.size(); ++k) {
        f << "# sample " << k << "\n" << res.texts[k] << "\n";
    }
}

EvalRow cmd_eval_bound(const RunConfig & config, const Checkpoint & ck, const Corpus & eval_corpus,
                       BoundKind which, const std::string & dataset_name) {
    const MatrixSpec spec = ck.config.matrix_spec();
    const NoiseSchedule schedule = ck.config.noise_schedule();
    const TabularModel model(ck.params);
    // bound evaluation never rescales sigma
    auto source = make_score_source(&model, &ck.params, spec, schedule, /*rescale=*/false);

    EstimateOptions opts;
    opts.threads = config.threads;
    opts.stratified_t = config.stratified_t;
    opts.batching = config.per_sequence_batching ? Batching::per_sequence : Batching::pooled;
    EvalRow row;
    row.dataset = dataset_name;
    row.seed = config.seed;
    row.estimate = estimate_bound(which, *source, spec, schedule, eval_corpus.sequences,
                                  config.n_samples, config.seed, opts);
    return row;
}

void append_results_csv(const std::string & path, const RunConfig & config, const EvalRow & row) {
    const bool fresh = !std::ifstream(path).good();
    std::ofstream f(path, std::ios::app);
    if (!f) throw config_error("cannot write results: " + path);
    if (fresh) {
        f << "# build = " << build_id() << "\n";
        std::istringstream cfg(config.serialize());
        std::string line;
        while (std::getline(cfg, line)) f << "# " << line << "\n";
        f << "dataset,estimator,seed,family,schedule,n_samples,mean,stderr,perplexity\n";
    }
    f << row.dataset << "," << to_string(row.estimate.which) << "," << row.seed << ","
      << to_string(config.family) << "," << to_string(config.schedule) << ","
      << row.estimate.n_samples << "," << format_double(row.estimate.mean) << ","
      << format_double(row.estimate.stderr_of_mean) << "," << format_double(row.estimate.perplexity)
      << "\n";
}

static VerifyCheck check(const std::string & name, double lhs, double rhs, double tol) {
    VerifyCheck c;
    c.name = name;
    c.lhs = lhs;
    c.rhs = rhs;
    c.gap = std::fabs(lhs - rhs);
    c.tol = tol;
    c.pass = c.gap <= tol;
    return c;
}

std::vector<VerifyCheck> cmd_verify(const RunConfig & config) {
    std::vector<VerifyCheck> out;
    Rng rng(config.seed ? config.seed : 1);

    // tiny stand-in for the configured family
    MatrixSpec spec = config.matrix_spec();
    spec.vocab.V = std::min(config.V > 0 ? config.V : 5, 5);
    NoiseSchedule schedule = config.noise_schedule();
    const int n = spec.n_states();
    const int L = 2;

    // closed-form exponential vs series oracle
    {
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const double sigma = rng.uniform(0.001, 10.0);
            const double t = rng.uniform(0.05, 0.95);
            const oracle::DenseMatrix M = oracle::expm_series(oracle::dense_rate_matrix(spec, t), sigma);
            for (int to = 0; to < n; ++to) {
                for (int from = 0; from < n; ++from) {
                    worst = std::max(worst, std::fabs(M.at(to, from) -
                                                      spec.transition_prob(sigma, t, to, from)));
                }
            }
        }
        out.push_back(check("transition_prob vs expm_series (max err)", worst, 0.0, 1e-9));
    }
    // column stochasticity
    {
        double worst = 0.0;
        for (double sigma : {0.01, 0.5, 1.0, 5.0, 50.0}) {
            for (int from = 0; from < n; ++from) {
                double col = 0.0;
                for (int to = 0; to < n; ++to) col += spec.transition_prob(sigma, 0.3, to, from);
                worst = std::max(worst, std::fabs(col - 1.0));
            }
        }
        out.push_back(check("column sums", worst + 1.0, 1.0, 1e-12));
    }
    // score reconstruction vs brute force
    if (spec.family != Family::eroulette) {
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const double sigma = rng.uniform(0.05, 6.0);
            std::vector<double> f(static_cast<size_t>(spec.vocab.V));
            double tot = 0.0;
            for (double & v : f) tot += (v = 0.05 + rng.uniform());
            for (double & v : f) v /= tot;
            token_t xt = spec.family == Family::absorb
                             ? spec.mask_id()
                             : static_cast<token_t>(rng.uniform_int(n));
            const auto closed = probs_to_scores(f, spec, sigma, 0.3, xt);
            const auto brute = oracle::brute_force_score_row(f, spec, sigma, 0.3, xt);
            for (int y = 0; y < n; ++y) worst = std::max(worst, std::fabs(closed[y] - brute[y]));
        }
        out.push_back(check("probs_to_scores vs mixture", worst, 0.0, 1e-9));
    }
    // grouped loss kernels vs naive sums
    if (spec.family != Family::eroulette) {
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            const double sigma = rng.uniform(0.05, 6.0);
            const double sp = rng.uniform(0.1, 3.0);
            std::vector<double> s(static_cast<size_t>(n));
            for (double & v : s) v = 0.05 + 2.0 * rng.uniform();
            const token_t x0 = static_cast<token_t>(rng.uniform_int(spec.vocab.V));
            const token_t xt = spec.corrupt_token(x0, sigma, 0.3, rng);
            for (bool withK : {false, true}) {
                const double a = sedd_loss_position(spec, sigma, sp, s, x0, xt, withK);
                const double b = oracle::brute_force_loss_row(spec, sigma, sp, s, x0, xt, withK);
                worst = std::max(worst, std::fabs(a - b));
            }
        }
        out.push_back(check("sedd kernels vs naive sums", worst, 0.0, 1e-9));
    }
    // J2 constant vs MC integral
    if (spec.family != Family::eroulette) {
        const auto mc = oracle::mc_integral_outflow(spec, schedule, L, 40000, rng);
        const double href =
            spec.family == Family::uniform ? L * std::log(static_cast<double>(spec.vocab.V)) : 0.0;
        const double analytic = j2_constant(spec, schedule, L);
        out.push_back(check("j2_constant vs MC integral", analytic, href + mc.mean,
                            3.0 * mc.stderr_of_mean));
    }
    // entropy identity on a tiny chain
    if (spec.family == Family::absorb || spec.family == Family::uniform) {
        MatrixSpec tiny = spec;
        tiny.vocab.V = 3;
        oracle::JointDistribution p0 = oracle::random_clean_joint(tiny, L, rng);
        const auto r = oracle::entropy_identity_check(p0, tiny, schedule, 2048);
        out.push_back(check("entropy identity", r.lhs, r.rhs, 1e-3));
    }
    // reference distribution gap at t = 1
    {
        MatrixSpec tiny = spec;
        tiny.vocab.V = 3;
        oracle::JointDistribution p0 = oracle::random_clean_joint(tiny, L, rng);
        const double tv = oracle::reference_gap_tv(p0, tiny, schedule, 1.0);
        out.push_back(check("reference gap TV at t=1", tv, 0.0, 0.01));
    }
    return out;
}

std::string format_verify_table(const std::vector<VerifyCheck> & checks) {
    std::ostringstream out;
    out << "check                                     lhs            rhs            gap        tol        result\n";
    for (const auto & c : checks) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-40s %14.8g %14.8g %10.3g %10.3g %s\n", c.name.c_str(),
                      c.lhs, c.rhs, c.gap, c.tol, c.pass ? "pass" : "FAIL");
        out << buf;
    }
    return out.str();
}

SpellcheckResult cmd_spellcheck(const RunConfig & config, const Checkpoint & ck,
                                const std::string & noisy_text, const std::string & clean_text) {
    if (ck.config.family == Family::absorb) {
        throw config_error("spellcheck: absorb has no unmasked-token dynamics; use uniform or roulette");
    }
    if (noisy_text.size() != clean_text.size()) {
        throw config_error("spellcheck: noisy and clean texts must align");
    }
    const TabularModel model(ck.params);

    const auto noisy = ck.tokenizer.encode(noisy_text);
    const auto clean = ck.tokenizer.encode(clean_text);

    SpellcheckResult res;
    res.total_positions = static_cast<int64_t>(noisy.ids.size());

    // majority character of the clean reference
    std::vector<int64_t> freq(static_cast<size_t>(ck.tokenizer.vocab_size()), 0);
    for (token_t c : clean.ids) ++freq[static_cast<size_t>(c)];
    const size_t argmax_char =
        static_cast<size_t>(std::max_element(freq.begin(), freq.end()) - freq.begin());
    res.majority_char = argmax_char < ck.tokenizer.charset.size()
                            ? ck.tokenizer.charset[argmax_char]
                            : '?';
    res.majority_baseline =
        static_cast<double>(freq[argmax_char]) / static_cast<double>(clean.ids.size());

    TokenSequence corrected = noisy.ids;
    const double t_star = config.spellcheck_t;
    // positions are independent under the tabular model; batch by chunks of L
    const size_t L = static_cast<size_t>(std::max(1, ck.config.L));
    for (size_t base = 0; base < corrected.size(); base += L) {
        const size_t len = std::min(L, corrected.size() - base);
        TokenSequence chunk(noisy.ids.begin() + static_cast<long>(base),
                            noisy.ids.begin() + static_cast<long>(base + len));
        const ProbTable f = model.predict(chunk, t_star);
        for (size_t i = 0; i < len; ++i) {
            const auto & row = f[i];
            const token_t am = static_cast<token_t>(
                std::max_element(row.begin(), row.end()) - row.begin());
            if (config.spellcheck_replace_all || am != chunk[i]) {
                corrected[base + i] = am;
            }
        }
    }

    for (size_t i = 0; i < corrected.size(); ++i) {
        const bool was_corrupted = noisy.ids[i] != clean.ids[i];
        const bool now_correct = corrected[i] == clean.ids[i];
        if (was_corrupted) {
            ++res.corrupted_positions;
            if (now_correct) ++res.corrupted_fixed;
        }
        if (now_correct) ++res.total_correct;
    }
    res.corrupted_accuracy = res.corrupted_positions
                                 ? static_cast<double>(res.corrupted_fixed) / res.corrupted_positions
                                 : 1.0;
    res.overall_accuracy =
        static_cast<double>(res.total_correct) / static_cast<double>(res.total_positions);
    res.corrected = ck.tokenizer.decode(corrected);
    return res;
}

std::string synth_corpus(size_t n_chars, uint64_t seed) {
    Rng rng(seed);
    // skewed letter distribution so the unigram entropy sits well below log V
    const std::string letters = "etaoinshrdlucmfwygpbvkxjqz";
    std::vector<double> lw(letters.size());
    double w = 1.0;
    for (size_t i = 0; i < lw.size(); ++i, w *= 0.60) lw[i] = w;

    auto draw_letter = [&]() { return letters[static_cast<size_t>(rng.categorical(lw))]; };

    // fixed word vocabulary, Zipf-weighted, plus rare coverage words that
    // guarantee every letter of the alphabet reaches the charset
    std::vector<std::string> words;
    for (int k = 0; k < 64; ++k) {
        const int len = 2 + rng.uniform_int(6);
        std::string word;
        for (int j = 0; j < len; ++j) word.push_back(draw_letter());
        words.push_back(word);
    }
    std::vector<double> ww(words.size());
    for (size_t i = 0; i < ww.size(); ++i) ww[i] = 1.0 / std::pow(static_cast<double>(i + 1), 1.15);
    for (size_t off = 0; off < letters.size(); off += 5) {
        words.push_back(letters.substr(off, 5));
        ww.push_back(0.003);
    }

    std::string text;
    text.reserve(n_chars + 64);
    int words_in_sentence = 0;
    int sentence_len = 6 + rng.uniform_int(7);
    while (text.size() < n_chars) {
        text += words[static_cast<size_t>(rng.categorical(ww))];
        ++words_in_sentence;
        if (words_in_sentence >= sentence_len) {
            text += ". ";
            words_in_sentence = 0;
            sentence_len = 6 + rng.uniform_int(7);
        } else {
            text += rng.uniform() < 0.06 ? ", " : " ";
        }
    }
    text.resize(n_chars);
    return text;
}

}  // namespace ddiff::app
