#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "bite/autograd.hpp"
#include "bite/data.hpp"
#include "bite/errors.hpp"
#include "bite/metrics.hpp"
#include "bite/model.hpp"
#include "bite/rng.hpp"
#include "bite/signal.hpp"
#include "bite/tensor.hpp"

namespace bite {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TrainConfig {
    Index epochs = 300;
    Index batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 2025;
    bool shuffle = true;

    static constexpr Index default_epochs_within_subject = 300;
    static constexpr Index default_epochs_loso = 100;

    void validate() const {
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch-size must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning-rate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("TrainConfig: beta1 and beta2 must lie in [0, 1)");
        }
        if (!(eps > 0.0)) throw ConfigError("TrainConfig: eps must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// Mean cross-entropy of logits [B, K] against integer labels, stabilized via
/// log-sum-exp. Backward rule: d/dlogits = (softmax - one_hot) / B.
inline Variable cross_entropy(Graph& g, const Variable& logits, const std::vector<Index>& labels) {
    const Tensor& lv = logits.value();
    if (lv.rank() != 2) {
        throw ConfigError("cross_entropy: logits must be [batch, classes], got shape " +
                          shape_str(lv.shape()));
    }
    const Index B = lv.dim(0), K = lv.dim(1);
    if (static_cast<Index>(labels.size()) != B) {
        throw ConfigError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(B));
    }
    for (Index b = 0; b < B; ++b) {
        if (labels[b] < 0 || labels[b] >= K) {
            throw ConfigError("cross_entropy: label " + std::to_string(labels[b]) + " at row " +
                              std::to_string(b) + " outside [0, " + std::to_string(K) + ")");
        }
    }

    auto probs = std::make_shared<Tensor>(Tensor::zeros({B, K}));
    double total = 0.0;
    for (Index b = 0; b < B; ++b) {
        double m = lv[b * K];
        for (Index k = 1; k < K; ++k) m = std::max(m, lv[b * K + k]);
        double sum = 0.0;
        for (Index k = 0; k < K; ++k) sum += std::exp(lv[b * K + k] - m);
        const double lse = m + std::log(sum);
        total += lse - lv[b * K + labels[b]];
        for (Index k = 0; k < K; ++k) (*probs)[b * K + k] = std::exp(lv[b * K + k] - lse);
    }
    Tensor y = Tensor::zeros(Shape{});
    y[0] = total / static_cast<double>(B);

    Variable out = Variable::leaf(std::move(y), logits.requires_grad());
    if (out.requires_grad()) {
        g.record("cross_entropy", [ln = logits.node(), on = out.node(), probs, labels, B, K] {
            const double go = on->grad[0];
            const double inv_b = 1.0 / static_cast<double>(B);
            for (Index b = 0; b < B; ++b) {
                for (Index k = 0; k < K; ++k) {
                    const double onehot = (k == labels[b]) ? 1.0 : 0.0;
                    ln->grad[b * K + k] += go * ((*probs)[b * K + k] - onehot) * inv_b;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

/// Adaptive-moment optimizer with bias correction. Holds one first/second
/// moment slot per parameter; parameters are updated in place from their
/// accumulated gradients.
class Adam {
public:
    Adam(std::vector<Variable> params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(lr_ > 0.0)) throw ConfigError("Adam: learning rate must be > 0");
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const Variable& p : params_) {
            m_.push_back(Tensor::zeros(p.value().shape()));
            v_.push_back(Tensor::zeros(p.value().shape()));
        }
    }

    Adam(std::vector<Variable> params, const TrainConfig& cfg)
        : Adam(std::move(params), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps) {}

    void zero_grad() {
        for (Variable& p : params_) p.zero_grad();
    }

    Index steps() const { return t_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& w = params_[i].value();
            const Tensor& grad = params_[i].grad();
            if (!w.same_shape(m_[i])) {
                throw ConfigError("Adam: parameter " + std::to_string(i) + " has shape " +
                                  shape_str(w.shape()) + " but its state slot has shape " +
                                  shape_str(m_[i].shape()));
            }
            for (Index j = 0; j < w.numel(); ++j) {
                const double gj = grad[j];
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * gj;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * gj * gj;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    std::vector<Variable> params_;
    std::vector<Tensor> m_, v_;
    Index t_ = 0;
    double lr_, beta1_, beta2_, eps_;
};

// ---------------------------------------------------------------------------
// Evaluation splits
// ---------------------------------------------------------------------------

/// One train/test partition. For the within-subject protocol a fold covers a
/// single subject's trials; for leave-one-subject-out the test half is the
/// held-out subject and the train half is everyone else.
struct Fold {
    Index id = 0;
    Index subject = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

namespace detail {

inline std::map<Index, std::vector<std::size_t>> by_subject(const TrialSet& set) {
    std::map<Index, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < set.trials.size(); ++i) {
        groups[set.trials[i].subject_id].push_back(i);
    }
    return groups;
}

inline void check_classes_in_train(const TrialSet& set, const Fold& fold) {
    std::vector<bool> seen(static_cast<std::size_t>(set.n_classes), false);
    for (std::size_t i : fold.train) seen[static_cast<std::size_t>(set.trials[i].label)] = true;
    for (Index c = 0; c < set.n_classes; ++c) {
        if (!seen[static_cast<std::size_t>(c)]) {
            throw DataError("split: class " + std::to_string(c) +
                            " is absent from the training partition of fold " +
                            std::to_string(fold.id) + " (subject " + std::to_string(fold.subject) +
                            ")");
        }
    }
}

} // namespace detail

/// Per-subject train/test split. When any trial carries a session tag, the
/// tags decide membership exactly ("train" / "test"); otherwise the split is
/// stratified per class at `ratio` under the run seed.
inline std::vector<Fold> split_within_subject(const TrialSet& set, double ratio,
                                              std::uint64_t seed) {
    set.validate();
    bool tagged = false;
    for (const Trial& t : set.trials) tagged = tagged || !t.session_tag.empty();
    if (!tagged && !(ratio > 0.0 && ratio < 1.0)) {
        throw ConfigError("split: ratio must lie in (0, 1), got " + std::to_string(ratio));
    }

    std::vector<Fold> folds;
    for (const auto& [subject, indices] : detail::by_subject(set)) {
        Fold fold;
        fold.id = static_cast<Index>(folds.size());
        fold.subject = subject;
        if (tagged) {
            for (std::size_t i : indices) {
                const std::string& tag = set.trials[i].session_tag;
                if (tag == "train") {
                    fold.train.push_back(i);
                } else if (tag == "test") {
                    fold.test.push_back(i);
                } else {
                    throw DataError("split: trial " + std::to_string(i) + " has session tag \"" +
                                    tag + "\"; session splits need every trial tagged \"train\" or "
                                    "\"test\"");
                }
            }
        } else {
            if (indices.size() < 2) {
                throw DataError("split: subject " + std::to_string(subject) + " has only " +
                                std::to_string(indices.size()) +
                                " trial(s); cannot stratify a single trial");
            }
            std::map<Index, std::vector<std::size_t>> by_class;
            for (std::size_t i : indices) by_class[set.trials[i].label].push_back(i);
            for (auto& [label, members] : by_class) {
                Rng rng = Rng::derived(seed, Stream::Split,
                                       {static_cast<std::uint64_t>(subject),
                                        static_cast<std::uint64_t>(label)});
                rng.shuffle(members);
                const Index n = static_cast<Index>(members.size());
                Index n_train = static_cast<Index>(std::llround(ratio * static_cast<double>(n)));
                n_train = std::max<Index>(n_train, 1);
                if (n >= 2) n_train = std::min(n_train, n - 1); // keep the class testable
                for (Index i = 0; i < n; ++i) {
                    (i < n_train ? fold.train : fold.test).push_back(members[static_cast<std::size_t>(i)]);
                }
            }
            std::sort(fold.train.begin(), fold.train.end());
            std::sort(fold.test.begin(), fold.test.end());
        }
        if (fold.train.empty()) {
            throw DataError("split: subject " + std::to_string(subject) +
                            " has no training trials");
        }
        if (fold.test.empty()) {
            throw DataError("split: subject " + std::to_string(subject) + " has no test trials");
        }
        detail::check_classes_in_train(set, fold);
        folds.push_back(std::move(fold));
    }
    return folds;
}

/// Leave-one-subject-out folds, ordered by held-out subject id.
inline std::vector<Fold> split_loso(const TrialSet& set) {
    set.validate();
    auto groups = detail::by_subject(set);
    if (groups.size() < 2) {
        throw DataError("split: leave-one-subject-out needs at least 2 subjects, got " +
                        std::to_string(groups.size()));
    }
    std::vector<Fold> folds;
    for (const auto& [subject, indices] : groups) {
        Fold fold;
        fold.id = static_cast<Index>(folds.size());
        fold.subject = subject;
        fold.test = indices;
        for (const auto& [other, members] : groups) {
            if (other == subject) continue;
            fold.train.insert(fold.train.end(), members.begin(), members.end());
        }
        std::sort(fold.train.begin(), fold.train.end());
        detail::check_classes_in_train(set, fold);
        folds.push_back(std::move(fold));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct SubjectResult {
    Index fold = 0;
    Index subject = 0;
    double accuracy = 0.0;
    double kappa = 0.0;
    Confusion confusion;
    Index train_trials = 0;
    Index test_trials = 0;
};

struct EvalReport {
    Index n_classes = 0;
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0; // population std across folds
    double kappa_mean = 0.0;
    double kappa_std = 0.0;
    Confusion confusion; // pooled over folds
    std::vector<SubjectResult> per_subject;
};

enum class Protocol { WithinSubject, Loso };

inline const char* protocol_name(Protocol p) {
    return p == Protocol::WithinSubject ? "within-subject" : "loso";
}

struct TrainOptions {
    Protocol protocol = Protocol::WithinSubject;
    double split_ratio = 0.8; // used when no session tags are present
    Index threads = 1;        // folds trained concurrently
    std::ostream* log = nullptr;
    bool keep_models = true;
};

/// What a fold leaves behind: the trained model, the whitener its training
/// partition was aligned with (within-subject only; LOSO aligns per subject,
/// so evaluation refits from the incoming subject's own trials), and the
/// buffered per-epoch log lines.
struct FoldArtifacts {
    Index fold = 0;
    Index subject = 0;
    std::optional<BiteModel> model;
    std::optional<AlignmentState> alignment;
    std::vector<std::string> log_lines;
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;
};

struct TrainResult {
    EvalReport report;
    std::vector<FoldArtifacts> folds;
};

// ---------------------------------------------------------------------------
// Train-and-eval
// ---------------------------------------------------------------------------

namespace detail {

inline void check_model_matches_data(const BiteConfig& cfg, const TrialSet& set) {
    if (cfg.channels != set.channels()) {
        throw ConfigError("train-and-eval: model expects " + std::to_string(cfg.channels) +
                          " channels but the data has " + std::to_string(set.channels()));
    }
    if (cfg.samples != set.samples()) {
        throw ConfigError("train-and-eval: model expects " + std::to_string(cfg.samples) +
                          " samples but the data has " + std::to_string(set.samples()));
    }
    if (cfg.n_classes != set.n_classes) {
        throw ConfigError("train-and-eval: model expects " + std::to_string(cfg.n_classes) +
                          " classes but the data declares " + std::to_string(set.n_classes));
    }
    if (cfg.fs != set.fs) {
        throw ConfigError("train-and-eval: model expects fs=" + std::to_string(cfg.fs) +
                          " but the data declares fs=" + std::to_string(set.fs));
    }
}

inline Index argmax_row(const Tensor& logits, Index row) {
    const Index k = logits.dim(1);
    Index best = 0;
    for (Index j = 1; j < k; ++j) {
        if (logits[row * k + j] > logits[row * k + best]) best = j;
    }
    return best;
}

/// Packs the selected trials (and their cached spectrograms) into one batch.
struct BatchBuffers {
    Tensor x;    // [n, 1, C, T]
    Tensor spec; // [n, F0, C, T] when the frequency stream is on
};

inline BatchBuffers make_batch(const std::vector<std::size_t>& order, std::size_t begin,
                               std::size_t end, const std::vector<Tensor>& aligned,
                               const std::vector<Tensor>& specs) {
    const Index n = static_cast<Index>(end - begin);
    const Index ct = aligned.front().numel();
    BatchBuffers out;
    out.x = Tensor::zeros({n, 1, aligned.front().dim(0), aligned.front().dim(1)});
    for (Index b = 0; b < n; ++b) {
        const Tensor& src = aligned[order[begin + static_cast<std::size_t>(b)]];
        for (Index i = 0; i < ct; ++i) out.x[b * ct + i] = src[i];
    }
    if (!specs.empty()) {
        const Tensor& first = specs.front();
        const Index fct = first.numel();
        out.spec = Tensor::zeros({n, first.dim(0), first.dim(1), first.dim(2)});
        for (Index b = 0; b < n; ++b) {
            const Tensor& src = specs[order[begin + static_cast<std::size_t>(b)]];
            for (Index i = 0; i < fct; ++i) out.spec[b * fct + i] = src[i];
        }
    }
    return out;
}

/// Serializes ordered emission of per-fold log lines: fold f's lines are
/// flushed only after every fold before it has flushed, so the byte stream is
/// identical no matter how fold workers are scheduled.
class OrderedLog {
public:
    OrderedLog(std::ostream* sink, std::size_t folds) : sink_(sink), done_(folds, false), lines_(folds) {}

    void finish(std::size_t fold, std::vector<std::string> lines) {
        if (sink_ == nullptr) return;
        std::lock_guard<std::mutex> lock(mu_);
        lines_[fold] = std::move(lines);
        done_[fold] = true;
        while (next_ < done_.size() && done_[next_]) {
            for (const std::string& line : lines_[next_]) *sink_ << line << '\n';
            sink_->flush();
            ++next_;
        }
    }

private:
    std::ostream* sink_;
    std::mutex mu_;
    std::vector<bool> done_;
    std::vector<std::vector<std::string>> lines_;
    std::size_t next_ = 0;
};

struct FoldRun {
    SubjectResult result;
    FoldArtifacts artifacts;
};

inline FoldRun run_fold(const BiteConfig& mcfg, const TrainConfig& tcfg, const TrialSet& set,
                        const Fold& fold, const std::vector<Tensor>& aligned,
                        const std::vector<Tensor>& specs,
                        std::optional<AlignmentState> alignment, bool keep_model) {
    FoldRun run;
    run.artifacts.fold = fold.id;
    run.artifacts.subject = fold.subject;
    run.result.fold = fold.id;
    run.result.subject = fold.subject;
    run.result.train_trials = static_cast<Index>(fold.train.size());
    run.result.test_trials = static_cast<Index>(fold.test.size());

    const std::uint64_t fold_key = static_cast<std::uint64_t>(fold.id);
    BiteModel model(mcfg, Rng::derive(tcfg.seed, {fold_key}));
    std::vector<Variable> params;
    params.reserve(model.parameters().size());
    for (auto& [name, v] : model.parameters()) params.push_back(v);
    Adam adam(std::move(params), tcfg);

    Rng shuffle_rng = Rng::derived(tcfg.seed, Stream::Shuffle, {fold_key});
    Rng dropout_rng = Rng::derived(tcfg.seed, Stream::Dropout, {fold_key});

    const std::size_t bs = static_cast<std::size_t>(tcfg.batch_size);
    std::vector<std::size_t> order = fold.train;
    for (Index epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        if (tcfg.shuffle) shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        Index correct = 0;
        Index batch_no = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += bs) {
            const std::size_t end = std::min(begin + bs, order.size());
            ++batch_no;
            BatchBuffers batch = make_batch(order, begin, end, aligned, specs);
            std::vector<Index> labels;
            labels.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                labels.push_back(set.trials[order[i]].label);
            }

            Graph g;
            adam.zero_grad();
            Variable logits = model.forward_with_spec(
                g, batch.x, specs.empty() ? nullptr : &batch.spec, Mode::Train, &dropout_rng);
            Variable loss = cross_entropy(g, logits, labels);
            const double lv = loss.value()[0];
            if (!std::isfinite(lv)) {
                throw DataError("train-and-eval: non-finite training loss (" + std::to_string(lv) +
                                ") at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_no) + " of fold " + std::to_string(fold.id));
            }
            g.backward(loss);
            adam.step();

            loss_sum += lv * static_cast<double>(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                if (argmax_row(logits.value(), static_cast<Index>(i - begin)) == labels[i - begin]) {
                    ++correct;
                }
            }
        }
        const double mean_loss = loss_sum / static_cast<double>(order.size());
        const double train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
        run.artifacts.epoch_loss.push_back(mean_loss);
        run.artifacts.epoch_accuracy.push_back(train_acc);
        std::ostringstream line;
        line << "epoch=" << epoch << " fold=" << fold.id << " loss=" << mean_loss
             << " acc=" << train_acc;
        run.artifacts.log_lines.push_back(line.str());
    }

    Confusion confusion = Confusion::zeros(set.n_classes);
    for (std::size_t begin = 0; begin < fold.test.size(); begin += bs) {
        const std::size_t end = std::min(begin + bs, fold.test.size());
        BatchBuffers batch = make_batch(fold.test, begin, end, aligned, specs);
        Graph g;
        g.set_recording(false);
        Variable logits =
            model.forward_with_spec(g, batch.x, specs.empty() ? nullptr : &batch.spec, Mode::Eval);
        for (std::size_t i = begin; i < end; ++i) {
            confusion.add(set.trials[fold.test[i]].label,
                          argmax_row(logits.value(), static_cast<Index>(i - begin)));
        }
    }
    run.result.accuracy = accuracy(confusion);
    run.result.kappa = kappa(confusion);
    run.result.confusion = std::move(confusion);

    if (keep_model) {
        run.artifacts.model.emplace(std::move(model));
        run.artifacts.alignment = std::move(alignment);
    }
    return run;
}

inline void mean_and_std(const std::vector<double>& xs, double& mean, double& std_out) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    std_out = std::sqrt(var / static_cast<double>(xs.size()));
}

} // namespace detail

/// Runs the full protocol: split, align, train one model per fold, evaluate
/// in eval mode, and aggregate mean +/- population std across folds. Fully
/// deterministic given the train seed, including with `threads > 1` (results
/// and logs are merged by fold index).
inline TrainResult train_and_eval(const BiteConfig& mcfg, const TrainConfig& tcfg,
                                  const TrialSet& set, const TrainOptions& opt = {}) {
    mcfg.validate();
    tcfg.validate();
    set.validate();
    detail::check_model_matches_data(mcfg, set);

    std::vector<Fold> folds = opt.protocol == Protocol::Loso
                                  ? split_loso(set)
                                  : split_within_subject(set, opt.split_ratio, tcfg.seed);

    // Alignment: each trial is whitened exactly once. Within-subject fits on
    // the fold's training partition only; LOSO aligns every subject with its
    // own statistics, which makes the whitening fold-independent.
    std::vector<Tensor> aligned(set.trials.size());
    std::vector<std::optional<AlignmentState>> fold_alignment(folds.size());
    if (opt.protocol == Protocol::WithinSubject) {
        for (const Fold& fold : folds) {
            std::vector<Tensor> train_signals;
            train_signals.reserve(fold.train.size());
            for (std::size_t i : fold.train) train_signals.push_back(set.trials[i].signal);
            AlignmentState state = ea_fit(train_signals);
            for (std::size_t i : fold.train) aligned[i] = ea_apply(state, set.trials[i].signal);
            for (std::size_t i : fold.test) aligned[i] = ea_apply(state, set.trials[i].signal);
            fold_alignment[static_cast<std::size_t>(fold.id)] = std::move(state);
        }
    } else {
        for (const auto& [subject, indices] : detail::by_subject(set)) {
            std::vector<Tensor> signals;
            signals.reserve(indices.size());
            for (std::size_t i : indices) signals.push_back(set.trials[i].signal);
            AlignmentState state = ea_fit(signals);
            for (std::size_t i : indices) aligned[i] = ea_apply(state, set.trials[i].signal);
        }
    }

    // Spectrograms are a pure function of the aligned signal; cache per trial.
    std::vector<Tensor> specs;
    if (mcfg.use_frequency) {
        StftPlan plan(mcfg.stft_window, mcfg.fs, mcfg.f_lo, mcfg.f_hi);
        specs.resize(set.trials.size());
        for (std::size_t i = 0; i < set.trials.size(); ++i) {
            specs[i] = stft_magnitude(aligned[i], plan).values;
        }
    }

    std::vector<detail::FoldRun> runs(folds.size());
    std::vector<std::exception_ptr> errors(folds.size());
    detail::OrderedLog log(opt.log, folds.size());
    const std::size_t workers =
        std::min<std::size_t>(folds.size(), static_cast<std::size_t>(std::max<Index>(opt.threads, 1)));

    auto work = [&](std::size_t f) {
        try {
            runs[f] = detail::run_fold(mcfg, tcfg, set, folds[f], aligned, specs,
                                       std::move(fold_alignment[f]), opt.keep_models);
            log.finish(f, runs[f].artifacts.log_lines);
        } catch (...) {
            errors[f] = std::current_exception();
            log.finish(f, {});
        }
    };
    if (workers <= 1) {
        for (std::size_t f = 0; f < folds.size(); ++f) work(f);
    } else {
        std::vector<std::thread> pool;
        std::mutex mu;
        std::size_t next = 0;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (;;) {
                    std::size_t f;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= folds.size()) return;
                        f = next++;
                    }
                    work(f);
                }
            });
        }
        for (std::thread& t : pool) t.join();
    }
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    TrainResult out;
    out.report.n_classes = set.n_classes;
    out.report.confusion = Confusion::zeros(set.n_classes);
    std::vector<double> accs, kappas;
    for (detail::FoldRun& run : runs) {
        accs.push_back(run.result.accuracy);
        kappas.push_back(run.result.kappa);
        out.report.confusion += run.result.confusion;
        out.report.per_subject.push_back(std::move(run.result));
        out.folds.push_back(std::move(run.artifacts));
    }
    detail::mean_and_std(accs, out.report.accuracy_mean, out.report.accuracy_std);
    detail::mean_and_std(kappas, out.report.kappa_mean, out.report.kappa_std);
    return out;
}

// ---------------------------------------------------------------------------
// Hyper-parameter sweep
// ---------------------------------------------------------------------------

/// Grid of mean accuracies over {tcn-kernel x dropout}, with per-kernel row
/// averages. Every cell is an independent train-and-eval under the same seed,
/// so the table is deterministic and insensitive to evaluation order.
struct SweepResult {
    std::vector<Index> kernels;
    std::vector<double> dropouts;
    std::vector<double> accuracy;    // row-major [kernels.size(), dropouts.size()]
    std::vector<double> kappa;       // same layout
    std::vector<double> row_average; // mean accuracy per kernel row

    double cell_accuracy(std::size_t ki, std::size_t di) const {
        return accuracy[ki * dropouts.size() + di];
    }
};

inline SweepResult hyper_sweep(const BiteConfig& base, const TrainConfig& tcfg,
                               const TrialSet& set, const std::vector<Index>& kernels,
                               const std::vector<double>& dropouts, const TrainOptions& opt = {}) {
    if (kernels.empty() || dropouts.empty()) {
        throw ConfigError("hyper-sweep: the kernel and dropout lists must be non-empty");
    }
    SweepResult out;
    out.kernels = kernels;
    out.dropouts = dropouts;
    TrainOptions cell_opt = opt;
    cell_opt.log = nullptr;       // per-epoch lines would not identify their cell
    cell_opt.keep_models = false; // only the metrics survive
    for (Index kernel : kernels) {
        for (double dropout : dropouts) {
            BiteConfig cfg = base;
            cfg.tcn_kernel = kernel;
            cfg.dropout = dropout;
            TrainResult run = train_and_eval(cfg, tcfg, set, cell_opt);
            out.accuracy.push_back(run.report.accuracy_mean);
            out.kappa.push_back(run.report.kappa_mean);
        }
    }
    for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
        double sum = 0.0;
        for (std::size_t di = 0; di < dropouts.size(); ++di) sum += out.cell_accuracy(ki, di);
        out.row_average.push_back(sum / static_cast<double>(dropouts.size()));
    }
    return out;
}

} // namespace bite
