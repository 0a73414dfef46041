// bite — command-line front end: data synthesis, training, evaluation,
// ablations, hyper-parameter sweeps, and the self-verification battery.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration error,
// 3 data error. stdout carries machine-readable output (JSON reports,
// per-epoch log lines, check lines); stderr carries diagnostics.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bite/data.hpp"
#include "bite/errors.hpp"
#include "bite/metrics.hpp"
#include "bite/model.hpp"
#include "bite/signal.hpp"
#include "bite/training.hpp"
#include "bite/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace bite;

// ---------------------------------------------------------------------------
// Config file parsing (strict: unknown keys are rejected with their path)
// ---------------------------------------------------------------------------

struct SynthSpec {
    std::string kind;
    Index subjects = 2;
    Index trials_per_class = 10;
    double fs = 256.0;
    Index samples = 256;
    Index channels = 8;
    std::uint64_t seed = 2025;
    double snr = 10.0;
    std::vector<double> freqs = {8.0, 12.0, 16.0, 20.0};
    Index classes = 4;
};

struct RunConfig {
    BiteConfig model;
    TrainConfig train;
    bool epochs_given = false;
    double split_ratio = 0.8;
    Protocol protocol = Protocol::WithinSubject;
    std::string data_path;
    std::optional<SynthSpec> synth;
    std::vector<std::string> ablation; // enabled components, canonical order
};

void reject_unknown(const ordered_json& obj, const std::string& prefix,
                    const std::vector<std::string>& known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
            throw ConfigError("config: unknown key '" + prefix + it.key() + "'");
        }
    }
}

double num_field(const ordered_json& obj, const std::string& prefix, const char* key,
                 double dflt) {
    if (!obj.contains(key)) return dflt;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
        throw ConfigError("config: key '" + prefix + key + "' must be a number");
    }
    return v.get<double>();
}

Index int_field(const ordered_json& obj, const std::string& prefix, const char* key, Index dflt) {
    if (!obj.contains(key)) return dflt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError("config: key '" + prefix + key + "' must be an integer");
    }
    return v.get<Index>();
}

std::uint64_t u64_field(const ordered_json& obj, const std::string& prefix, const char* key,
                        std::uint64_t dflt) {
    if (!obj.contains(key)) return dflt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError("config: key '" + prefix + key + "' must be an integer");
    }
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
        throw ConfigError("config: key '" + prefix + key + "' must be non-negative");
    }
    return v.get<std::uint64_t>();
}

bool bool_field(const ordered_json& obj, const std::string& prefix, const char* key, bool dflt) {
    if (!obj.contains(key)) return dflt;
    const auto& v = obj.at(key);
    if (!v.is_boolean()) {
        throw ConfigError("config: key '" + prefix + key + "' must be a boolean");
    }
    return v.get<bool>();
}

std::string str_field(const ordered_json& obj, const std::string& prefix, const char* key,
                      const std::string& dflt) {
    if (!obj.contains(key)) return dflt;
    const auto& v = obj.at(key);
    if (!v.is_string()) {
        throw ConfigError("config: key '" + prefix + key + "' must be a string");
    }
    return v.get<std::string>();
}

Protocol parse_protocol(const std::string& name) {
    if (name == "within-subject") return Protocol::WithinSubject;
    if (name == "loso") return Protocol::Loso;
    throw ConfigError("config: protocol must be \"within-subject\" or \"loso\", got \"" + name +
                      "\"");
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open for reading");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(path + ": config root must be a JSON object");
    reject_unknown(doc, "", {"model", "train", "data", "protocol", "ablation"});

    RunConfig rc;
    if (doc.contains("model")) {
        const auto& m = doc.at("model");
        if (!m.is_object()) throw ConfigError("config: 'model' must be an object");
        reject_unknown(m, "model.",
                       {"channels", "samples", "fs", "n-classes", "f1", "depth-mult",
                        "temporal-kernel", "pool", "stft-window", "f-lo", "f-hi", "tcn-blocks",
                        "tcn-kernel", "tcn-channels", "dropout"});
        BiteConfig& c = rc.model;
        c.channels = int_field(m, "model.", "channels", c.channels);
        c.samples = int_field(m, "model.", "samples", c.samples);
        c.fs = num_field(m, "model.", "fs", c.fs);
        c.n_classes = int_field(m, "model.", "n-classes", c.n_classes);
        c.f1 = int_field(m, "model.", "f1", c.f1);
        c.depth_mult = int_field(m, "model.", "depth-mult", c.depth_mult);
        c.temporal_kernel = int_field(m, "model.", "temporal-kernel", c.temporal_kernel);
        c.pool = int_field(m, "model.", "pool", c.pool);
        c.stft_window = int_field(m, "model.", "stft-window", c.stft_window);
        c.f_lo = num_field(m, "model.", "f-lo", c.f_lo);
        c.f_hi = num_field(m, "model.", "f-hi", c.f_hi);
        c.tcn_blocks = int_field(m, "model.", "tcn-blocks", c.tcn_blocks);
        c.tcn_kernel = int_field(m, "model.", "tcn-kernel", c.tcn_kernel);
        c.tcn_channels = int_field(m, "model.", "tcn-channels", c.tcn_channels);
        c.dropout = num_field(m, "model.", "dropout", c.dropout);
    }
    if (doc.contains("train")) {
        const auto& t = doc.at("train");
        if (!t.is_object()) throw ConfigError("config: 'train' must be an object");
        reject_unknown(t, "train.",
                       {"epochs", "batch-size", "learning-rate", "beta1", "beta2", "eps", "seed",
                        "shuffle", "split-ratio"});
        TrainConfig& c = rc.train;
        rc.epochs_given = t.contains("epochs");
        c.epochs = int_field(t, "train.", "epochs", c.epochs);
        c.batch_size = int_field(t, "train.", "batch-size", c.batch_size);
        c.learning_rate = num_field(t, "train.", "learning-rate", c.learning_rate);
        c.beta1 = num_field(t, "train.", "beta1", c.beta1);
        c.beta2 = num_field(t, "train.", "beta2", c.beta2);
        c.eps = num_field(t, "train.", "eps", c.eps);
        c.seed = u64_field(t, "train.", "seed", c.seed);
        c.shuffle = bool_field(t, "train.", "shuffle", c.shuffle);
        rc.split_ratio = num_field(t, "train.", "split-ratio", rc.split_ratio);
    }
    rc.protocol = parse_protocol(str_field(doc, "", "protocol", "within-subject"));

    if (doc.contains("ablation")) {
        const auto& a = doc.at("ablation");
        if (!a.is_array()) throw ConfigError("config: 'ablation' must be an array of strings");
        bool t = false, f = false, at = false, b = false;
        for (const auto& entry : a) {
            if (!entry.is_string()) {
                throw ConfigError("config: 'ablation' entries must be strings");
            }
            const std::string name = entry.get<std::string>();
            if (name == "temporal") {
                t = true;
            } else if (name == "frequency") {
                f = true;
            } else if (name == "attention") {
                at = true;
            } else if (name == "bitcn") {
                b = true;
            } else {
                throw ConfigError("config: unknown ablation component '" + name +
                                  "' (expected temporal, frequency, attention, bitcn)");
            }
        }
        rc.model.use_temporal = t;
        rc.model.use_frequency = f;
        rc.model.use_attention = at;
        rc.model.use_bitcn = b;
    }
    rc.ablation.clear();
    if (rc.model.use_temporal) rc.ablation.push_back("temporal");
    if (rc.model.use_frequency) rc.ablation.push_back("frequency");
    if (rc.model.use_attention) rc.ablation.push_back("attention");
    if (rc.model.use_bitcn) rc.ablation.push_back("bitcn");

    if (!doc.contains("data")) throw ConfigError("config: missing required section 'data'");
    const auto& d = doc.at("data");
    if (!d.is_object()) throw ConfigError("config: 'data' must be an object");
    reject_unknown(d, "data.", {"path", "synth"});
    const bool has_path = d.contains("path");
    const bool has_synth = d.contains("synth");
    if (has_path == has_synth) {
        throw ConfigError("config: 'data' must give exactly one of 'path' or 'synth'");
    }
    if (has_path) {
        rc.data_path = str_field(d, "data.", "path", "");
        if (rc.data_path.empty()) throw ConfigError("config: 'data.path' must be non-empty");
    } else {
        const auto& s = d.at("synth");
        if (!s.is_object()) throw ConfigError("config: 'data.synth' must be an object");
        reject_unknown(s, "data.synth.",
                       {"kind", "subjects", "trials-per-class", "fs", "samples", "channels",
                        "seed", "snr", "freqs", "classes"});
        SynthSpec spec;
        spec.kind = str_field(s, "data.synth.", "kind", "");
        if (spec.kind != "ssvep" && spec.kind != "mi") {
            throw ConfigError("config: 'data.synth.kind' must be \"ssvep\" or \"mi\", got \"" +
                              spec.kind + "\"");
        }
        spec.subjects = int_field(s, "data.synth.", "subjects", spec.subjects);
        spec.trials_per_class = int_field(s, "data.synth.", "trials-per-class",
                                          spec.trials_per_class);
        spec.fs = num_field(s, "data.synth.", "fs", spec.fs);
        spec.samples = int_field(s, "data.synth.", "samples", spec.samples);
        spec.channels = int_field(s, "data.synth.", "channels", spec.channels);
        spec.seed = u64_field(s, "data.synth.", "seed", spec.seed);
        spec.snr = num_field(s, "data.synth.", "snr", spec.snr);
        spec.classes = int_field(s, "data.synth.", "classes", spec.classes);
        if (s.contains("freqs")) {
            const auto& fr = s.at("freqs");
            if (!fr.is_array()) {
                throw ConfigError("config: 'data.synth.freqs' must be an array of numbers");
            }
            spec.freqs.clear();
            for (const auto& v : fr) {
                if (!v.is_number()) {
                    throw ConfigError("config: 'data.synth.freqs' must be an array of numbers");
                }
                spec.freqs.push_back(v.get<double>());
            }
        }
        rc.synth = std::move(spec);
    }
    return rc;
}

TrialSet make_synth(const SynthSpec& s) {
    if (s.kind == "ssvep") {
        return synth_ssvep(s.subjects, s.trials_per_class, s.freqs, s.fs, s.samples, s.snr,
                           s.seed, s.channels);
    }
    return synth_mi(s.subjects, s.trials_per_class, s.classes, s.fs, s.samples, s.channels,
                    s.seed);
}

TrialSet load_data(const RunConfig& rc) {
    if (!rc.data_path.empty()) return read_trials(rc.data_path);
    return make_synth(*rc.synth);
}

/// Shape fields left at 0 in the config take their values from the data.
void resolve_from_data(BiteConfig& cfg, const TrialSet& set) {
    if (cfg.channels == 0) cfg.channels = set.channels();
    if (cfg.samples == 0) cfg.samples = set.samples();
    if (cfg.fs == 0.0) cfg.fs = set.fs;
    if (cfg.n_classes == 0) cfg.n_classes = set.n_classes;
}

void resolve_epochs(RunConfig& rc) {
    if (!rc.epochs_given) {
        rc.train.epochs = rc.protocol == Protocol::Loso
                              ? TrainConfig::default_epochs_loso
                              : TrainConfig::default_epochs_within_subject;
    }
}

Index thread_budget() {
    if (const char* v = std::getenv("BITE_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(v, &end, 10);
        if (end == v || *end != '\0' || n < 1) {
            throw ConfigError(std::string("BITE_THREADS must be a positive integer, got '") + v +
                              "'");
        }
        return static_cast<Index>(n);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<Index>(hc);
}

// ---------------------------------------------------------------------------
// JSON writers
// ---------------------------------------------------------------------------

ordered_json confusion_json(const Confusion& c) {
    ordered_json rows = ordered_json::array();
    for (Index r = 0; r < c.classes; ++r) {
        ordered_json row = ordered_json::array();
        for (Index col = 0; col < c.classes; ++col) row.push_back(c.at(r, col));
        rows.push_back(std::move(row));
    }
    return rows;
}

ordered_json report_core_json(const EvalReport& r) {
    ordered_json j;
    j["accuracy"] = r.accuracy_mean;
    j["kappa"] = r.kappa_mean;
    j["accuracy_std"] = r.accuracy_std;
    j["kappa_std"] = r.kappa_std;
    ordered_json subjects = ordered_json::array();
    for (const SubjectResult& s : r.per_subject) {
        ordered_json row;
        row["id"] = s.subject;
        row["accuracy"] = s.accuracy;
        row["kappa"] = s.kappa;
        subjects.push_back(std::move(row));
    }
    j["per_subject"] = std::move(subjects);
    j["confusion"] = confusion_json(r.confusion);
    return j;
}

ordered_json config_echo_json(const RunConfig& rc) {
    const BiteConfig& c = rc.model;
    ordered_json model;
    model["channels"] = c.channels;
    model["samples"] = c.samples;
    model["fs"] = c.fs;
    model["n-classes"] = c.n_classes;
    model["f1"] = c.f1;
    model["depth-mult"] = c.depth_mult;
    model["temporal-kernel"] = c.kernel();
    model["pool"] = c.pool;
    model["stft-window"] = c.stft_window;
    model["f-lo"] = c.f_lo;
    model["f-hi"] = c.f_hi;
    model["tcn-blocks"] = c.tcn_blocks;
    model["tcn-kernel"] = c.tcn_kernel;
    model["tcn-channels"] = c.tc();
    model["dropout"] = c.dropout;

    ordered_json train;
    train["epochs"] = rc.train.epochs;
    train["batch-size"] = rc.train.batch_size;
    train["learning-rate"] = rc.train.learning_rate;
    train["beta1"] = rc.train.beta1;
    train["beta2"] = rc.train.beta2;
    train["eps"] = rc.train.eps;
    train["seed"] = rc.train.seed;
    train["shuffle"] = rc.train.shuffle;
    train["split-ratio"] = rc.split_ratio;

    ordered_json data;
    if (!rc.data_path.empty()) {
        data["path"] = rc.data_path;
    } else {
        const SynthSpec& s = *rc.synth;
        ordered_json synth;
        synth["kind"] = s.kind;
        synth["subjects"] = s.subjects;
        synth["trials-per-class"] = s.trials_per_class;
        synth["fs"] = s.fs;
        synth["samples"] = s.samples;
        synth["channels"] = s.channels;
        synth["seed"] = s.seed;
        if (s.kind == "ssvep") {
            synth["snr"] = s.snr;
            synth["freqs"] = s.freqs;
        } else {
            synth["classes"] = s.classes;
        }
        data["synth"] = std::move(synth);
    }

    ordered_json j;
    j["model"] = std::move(model);
    j["train"] = std::move(train);
    j["data"] = std::move(data);
    j["protocol"] = protocol_name(rc.protocol);
    j["ablation"] = rc.ablation;
    return j;
}

void write_json_file(const fs::path& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

RunConfig prepared_config(const CommonArgs& args, TrialSet& set_out) {
    RunConfig rc = parse_run_config(args.config_path);
    if (args.seed) rc.train.seed = *args.seed;
    resolve_epochs(rc);
    set_out = load_data(rc);
    resolve_from_data(rc.model, set_out);
    rc.model.validate();
    rc.train.validate();
    return rc;
}

int cmd_train(const CommonArgs& args) {
    TrialSet set;
    RunConfig rc = prepared_config(args, set);

    TrainOptions opt;
    opt.protocol = rc.protocol;
    opt.split_ratio = rc.split_ratio;
    opt.threads = thread_budget();
    opt.log = &std::cout;
    opt.keep_models = true;
    TrainResult result = train_and_eval(rc.model, rc.train, set, opt);

    fs::create_directories(args.out_dir);
    ordered_json report = report_core_json(result.report);
    report["protocol"] = protocol_name(rc.protocol);
    report["config_echo"] = config_echo_json(rc);
    report["seed"] = rc.train.seed;
    write_json_file(fs::path(args.out_dir) / "report.json", report);

    for (const FoldArtifacts& fold : result.folds) {
        const fs::path path =
            fs::path(args.out_dir) / ("weights-" + std::to_string(fold.fold) + ".bitw");
        save_weights(path.string(), *fold.model,
                     fold.alignment ? &*fold.alignment : nullptr);
    }
    return 0;
}

int cmd_eval(const std::string& weights_path, const std::string& data_path) {
    WeightArchive archive = load_archive(weights_path);
    BiteModel& model = archive.model;
    const BiteConfig& cfg = model.config();
    TrialSet set = read_trials(data_path);
    if (set.channels() != cfg.channels || set.samples() != cfg.samples) {
        throw ConfigError("eval: weights expect [" + std::to_string(cfg.channels) + " x " +
                          std::to_string(cfg.samples) + "] trials but the data has [" +
                          std::to_string(set.channels()) + " x " +
                          std::to_string(set.samples()) + "]");
    }
    if (set.n_classes != cfg.n_classes) {
        throw ConfigError("eval: weights were trained for " + std::to_string(cfg.n_classes) +
                          " classes but the data declares " + std::to_string(set.n_classes));
    }
    if (set.fs != cfg.fs) {
        throw ConfigError("eval: weights expect fs=" + std::to_string(cfg.fs) +
                          " but the data declares fs=" + std::to_string(set.fs));
    }

    // Alignment: a stored whitener (written by within-subject training)
    // reproduces the training-time preprocessing; otherwise each subject is
    // whitened with its own statistics, as leave-one-subject-out runs do.
    std::vector<Tensor> aligned(set.trials.size());
    if (archive.alignment) {
        for (std::size_t i = 0; i < set.trials.size(); ++i) {
            aligned[i] = ea_apply(*archive.alignment, set.trials[i].signal);
        }
    } else {
        std::map<Index, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < set.trials.size(); ++i) {
            groups[set.trials[i].subject_id].push_back(i);
        }
        for (const auto& [subject, indices] : groups) {
            std::vector<Tensor> signals;
            for (std::size_t i : indices) signals.push_back(set.trials[i].signal);
            AlignmentState state = ea_fit(signals);
            for (std::size_t i : indices) aligned[i] = ea_apply(state, set.trials[i].signal);
        }
    }

    std::vector<Tensor> specs;
    if (cfg.use_frequency) {
        StftPlan plan(cfg.stft_window, cfg.fs, cfg.f_lo, cfg.f_hi);
        specs.resize(set.trials.size());
        for (std::size_t i = 0; i < set.trials.size(); ++i) {
            specs[i] = stft_magnitude(aligned[i], plan).values;
        }
    }

    std::vector<std::size_t> order(set.trials.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<Index> predictions(set.trials.size());
    const std::size_t bs = 64;
    for (std::size_t begin = 0; begin < order.size(); begin += bs) {
        const std::size_t end = std::min(begin + bs, order.size());
        bite::detail::BatchBuffers batch =
            bite::detail::make_batch(order, begin, end, aligned, specs);
        Graph g;
        g.set_recording(false);
        Variable logits = model.forward_with_spec(
            g, batch.x, specs.empty() ? nullptr : &batch.spec, Mode::Eval);
        for (std::size_t i = begin; i < end; ++i) {
            predictions[i] =
                bite::detail::argmax_row(logits.value(), static_cast<Index>(i - begin));
        }
    }

    Confusion pooled = Confusion::zeros(cfg.n_classes);
    std::map<Index, Confusion> by_subject;
    for (std::size_t i = 0; i < set.trials.size(); ++i) {
        const Trial& t = set.trials[i];
        pooled.add(t.label, predictions[i]);
        auto [it, fresh] = by_subject.try_emplace(t.subject_id, Confusion::zeros(cfg.n_classes));
        it->second.add(t.label, predictions[i]);
    }

    ordered_json j;
    j["accuracy"] = accuracy(pooled);
    j["kappa"] = kappa(pooled);
    ordered_json subjects = ordered_json::array();
    for (const auto& [subject, confusion] : by_subject) {
        ordered_json row;
        row["id"] = subject;
        row["accuracy"] = accuracy(confusion);
        row["kappa"] = kappa(confusion);
        subjects.push_back(std::move(row));
    }
    j["per_subject"] = std::move(subjects);
    j["confusion"] = confusion_json(pooled);
    ordered_json echo;
    echo["weights"] = weights_path;
    echo["data"] = data_path;
    ordered_json model_echo;
    for (const auto& field : bite::detail::config_fields(cfg)) {
        model_echo[field.name] = field.value;
    }
    echo["model"] = std::move(model_echo);
    j["config_echo"] = std::move(echo);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    TrialSet set;
    RunConfig rc = prepared_config(args, set);

    TrainOptions opt;
    opt.protocol = rc.protocol;
    opt.split_ratio = rc.split_ratio;
    opt.threads = thread_budget();
    opt.keep_models = false;

    ordered_json results;
    for (const std::string& label : ablation_labels()) {
        BiteConfig cfg = rc.model;
        apply_ablation(cfg, label);
        TrainResult run = train_and_eval(cfg, rc.train, set, opt);
        results[label] = report_core_json(run.report);
    }

    fs::create_directories(args.out_dir);
    ordered_json j;
    j["seed"] = rc.train.seed;
    j["protocol"] = protocol_name(rc.protocol);
    j["config_echo"] = config_echo_json(rc);
    j["results"] = std::move(results);
    write_json_file(fs::path(args.out_dir) / "ablation.json", j);
    return 0;
}

int cmd_sweep(const CommonArgs& args, const std::vector<Index>& kernels,
              const std::vector<double>& dropouts) {
    TrialSet set;
    RunConfig rc = prepared_config(args, set);

    TrainOptions opt;
    opt.protocol = rc.protocol;
    opt.split_ratio = rc.split_ratio;
    opt.threads = thread_budget();
    SweepResult sweep = hyper_sweep(rc.model, rc.train, set, kernels, dropouts, opt);

    fs::create_directories(args.out_dir);
    ordered_json j;
    j["seed"] = rc.train.seed;
    j["protocol"] = protocol_name(rc.protocol);
    j["config_echo"] = config_echo_json(rc);
    j["kernels"] = sweep.kernels;
    j["dropouts"] = sweep.dropouts;
    ordered_json acc = ordered_json::array(), kap = ordered_json::array();
    for (std::size_t ki = 0; ki < sweep.kernels.size(); ++ki) {
        ordered_json acc_row = ordered_json::array(), kap_row = ordered_json::array();
        for (std::size_t di = 0; di < sweep.dropouts.size(); ++di) {
            acc_row.push_back(sweep.accuracy[ki * sweep.dropouts.size() + di]);
            kap_row.push_back(sweep.kappa[ki * sweep.dropouts.size() + di]);
        }
        acc.push_back(std::move(acc_row));
        kap.push_back(std::move(kap_row));
    }
    j["accuracy"] = std::move(acc);
    j["kappa"] = std::move(kap);
    j["row_average"] = sweep.row_average;
    write_json_file(fs::path(args.out_dir) / "sweep.json", j);
    return 0;
}

int cmd_verify(bool inject_fault) {
    VerifyOptions opt;
    opt.inject_gradient_fault = inject_fault;
    const std::vector<VerifyCheck> checks = run_verification(opt);
    for (const VerifyCheck& c : checks) std::cout << format_check(c) << '\n';
    if (!verification_passed(checks)) {
        for (const VerifyCheck& c : checks) {
            if (!c.pass) std::cerr << "verification failed: " << c.name << '\n';
        }
        return 1;
    }
    return 0;
}

int cmd_synth(const SynthSpec& spec, const std::string& out_path) {
    TrialSet set = make_synth(spec);
    write_trials(out_path, set);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BITE: bidirectional time-frequency pyramid EEG classifier toolkit"};
    app.require_subcommand(1);

    CommonArgs train_args;
    auto* train = app.add_subcommand("train", "Train per a JSON config; writes report.json and "
                                              "per-fold weight archives");
    train->add_option("--config", train_args.config_path, "Run configuration JSON")->required();
    train->add_option("--out", train_args.out_dir, "Output directory")->required();
    train->add_option("--seed", train_args.seed, "Override train.seed");

    std::string eval_weights, eval_data;
    auto* eval = app.add_subcommand("eval", "Evaluate a weight archive on a trial file; prints "
                                            "a JSON report to stdout");
    eval->add_option("--weights", eval_weights, "Weight archive (.bitw)")->required();
    eval->add_option("--data", eval_data, "Trial file (.bite1)")->required();

    CommonArgs ablate_args;
    auto* ablate = app.add_subcommand("ablate", "Train all six component combinations; writes "
                                                "ablation.json");
    ablate->add_option("--config", ablate_args.config_path, "Run configuration JSON")->required();
    ablate->add_option("--out", ablate_args.out_dir, "Output directory")->required();
    ablate->add_option("--seed", ablate_args.seed, "Override train.seed");

    CommonArgs sweep_args;
    std::vector<Index> sweep_kernels = {3, 6, 9, 12};
    std::vector<double> sweep_dropouts = {0.1, 0.2, 0.3, 0.4, 0.5};
    auto* sweep = app.add_subcommand("sweep", "Grid over sequence-kernel and dropout; writes "
                                              "sweep.json");
    sweep->add_option("--config", sweep_args.config_path, "Run configuration JSON")->required();
    sweep->add_option("--out", sweep_args.out_dir, "Output directory")->required();
    sweep->add_option("--seed", sweep_args.seed, "Override train.seed");
    sweep->add_option("--kernels", sweep_kernels, "Kernel lengths")->delimiter(',');
    sweep->add_option("--dropouts", sweep_dropouts, "Dropout rates")->delimiter(',');

    bool inject_fault = false;
    auto* verify = app.add_subcommand("verify", "Run the self-verification battery; exit 0 iff "
                                                "all checks pass");
    verify->add_flag("--inject-fault", inject_fault,
                     "Corrupt one analytic gradient (test fixture; forces a failure)");

    SynthSpec synth_spec;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic trial file");
    synth->add_option("--kind", synth_spec.kind, "Generator: ssvep or mi")
        ->required()
        ->check(CLI::IsMember({"ssvep", "mi"}));
    synth->add_option("--out", synth_out, "Output trial file")->required();
    synth->add_option("--subjects", synth_spec.subjects, "Subject count");
    synth->add_option("--trials-per-class", synth_spec.trials_per_class,
                      "Trials per class per subject");
    synth->add_option("--fs", synth_spec.fs, "Sample rate, Hz");
    synth->add_option("--samples", synth_spec.samples, "Samples per trial");
    synth->add_option("--channels", synth_spec.channels, "Channel count");
    synth->add_option("--seed", synth_spec.seed, "Generator seed");
    synth->add_option("--snr", synth_spec.snr, "Signal-to-noise ratio (ssvep)");
    synth->add_option("--freqs", synth_spec.freqs, "Class frequencies, Hz (ssvep)")
        ->delimiter(',');
    synth->add_option("--classes", synth_spec.classes, "Class count (mi)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (eval->parsed()) return cmd_eval(eval_weights, eval_data);
        if (ablate->parsed()) return cmd_ablate(ablate_args);
        if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_kernels, sweep_dropouts);
        if (verify->parsed()) return cmd_verify(inject_fault);
        if (synth->parsed()) return cmd_synth(synth_spec, synth_out);
        std::cerr << "error: no command given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
