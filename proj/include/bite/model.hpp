#pragma once

// The BITE network: a dual-stream (temporal + spectral) convolutional front
// end, pyramidal time-frequency attention, a bidirectional temporal
// convolutional network, learnable direction fusion, and a dense classifier.
// Every component can be switched off independently for ablation studies.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "bite/autograd.hpp"
#include "bite/errors.hpp"
#include "bite/rng.hpp"
#include "bite/signal.hpp"
#include "bite/tensor.hpp"

namespace bite {

/// Static description of a BITE network. All shapes derive from this struct;
/// nothing about the architecture depends on the data itself.
struct BiteConfig {
    Index channels = 0; // electrodes C
    Index samples = 0;  // samples per trial T
    double fs = 0.0;    // sample rate, Hz
    Index n_classes = 0;

    Index f1 = 8;              // temporal filter count
    Index depth_mult = 2;      // depth multiplier D; spatial filters F2 = f1 * D
    Index temporal_kernel = 0; // 0 -> stft_window (the two must match)
    Index pool = 8;            // average-pool factor; pooled length T' = T / pool
    Index stft_window = 64;    // STFT window length N
    double f_lo = 4.0;         // analysis band, Hz
    double f_hi = 40.0;
    Index tcn_blocks = 2;   // residual blocks per TCN direction (L)
    Index tcn_kernel = 6;   // TCN kernel length (k_t)
    Index tcn_channels = 0; // 0 -> f1 * depth_mult
    double dropout = 0.3;

    bool use_temporal = true;
    bool use_frequency = true;
    bool use_attention = true;
    bool use_bitcn = true;

    Index f2() const { return f1 * depth_mult; }
    Index kernel() const { return temporal_kernel > 0 ? temporal_kernel : stft_window; }
    Index tc() const { return tcn_channels > 0 ? tcn_channels : f1 * depth_mult; }
    Index t_prime() const { return pool > 0 ? samples / pool : 0; }
    Index f0() const {
        return static_cast<Index>(band_bins(fs, stft_window, f_lo, f_hi).size());
    }
    /// Channel count entering the sequence head (post-concatenation).
    Index cz() const {
        return (use_temporal ? f2() : 0) + (use_frequency ? f0() : 0);
    }

    void validate() const {
        auto fail = [](const std::string& msg) { throw ConfigError("BiteConfig: " + msg); };
        if (channels < 1) fail("channels must be >= 1, got " + std::to_string(channels));
        if (samples < 1) fail("samples must be >= 1, got " + std::to_string(samples));
        if (!(fs > 0.0)) fail("fs must be positive");
        if (n_classes < 2) fail("n_classes must be >= 2, got " + std::to_string(n_classes));
        if (f1 < 1) fail("f1 must be >= 1");
        if (depth_mult < 1) fail("depth_mult must be >= 1");
        if (pool < 1) fail("pool must be >= 1");
        if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
        if (!use_temporal && !use_frequency)
            fail("at least one of the temporal/frequency streams must be enabled");
        if (use_attention && !(use_temporal && use_frequency))
            fail("attention requires both streams enabled");
        if (kernel() != stft_window)
            fail("temporal_kernel (" + std::to_string(kernel()) +
                 ") must equal stft_window (" + std::to_string(stft_window) + ")");
        if (t_prime() < 1)
            fail("pooled length samples/pool = " + std::to_string(t_prime()) +
                 " must be >= 1");
        if (tc() < 1) fail("tcn_channels must be >= 1");
        if (use_frequency) {
            if (samples < stft_window)
                fail("samples (" + std::to_string(samples) + ") must be >= stft_window (" +
                     std::to_string(stft_window) + ")");
            (void)f0(); // throws ConfigError if the band selects no bins
        }
        if (use_bitcn) {
            if (tcn_blocks < 1) fail("tcn_blocks must be >= 1");
            if (tcn_kernel < 1) fail("tcn_kernel must be >= 1");
        }
    }
};

/// Known ablation presets: which components stay enabled.
inline const std::vector<std::string>& ablation_labels() {
    static const std::vector<std::string> labels = {"TB", "FB", "TF", "TFA", "TFB", "TFBA"};
    return labels;
}

inline void apply_ablation(BiteConfig& cfg, const std::string& label) {
    struct Row {
        const char* name;
        bool t, f, a, b;
    };
    static constexpr Row rows[] = {
        {"TB", true, false, false, true},  {"FB", false, true, false, true},
        {"TF", true, true, false, false},  {"TFA", true, true, true, false},
        {"TFB", true, true, false, true},  {"TFBA", true, true, true, true},
    };
    for (const Row& r : rows) {
        if (label == r.name) {
            cfg.use_temporal = r.t;
            cfg.use_frequency = r.f;
            cfg.use_attention = r.a;
            cfg.use_bitcn = r.b;
            return;
        }
    }
    throw ConfigError("unknown ablation label '" + label +
                      "' (expected one of TB, FB, TF, TFA, TFB, TFBA)");
}

/// H = sigmoid(alpha_raw) * h_f + (1 - sigmoid(alpha_raw)) * h_b.
inline Variable fuse(Graph& g, const Variable& h_f, const Variable& h_b,
                     const Variable& alpha_raw) {
    Variable a = sigmoid(g, alpha_raw);
    Variable b = affine_const(g, a, -1.0, 1.0); // 1 - a
    return add(g, mul_scalar(g, h_f, a), mul_scalar(g, h_b, b));
}

class BiteModel {
public:
    enum ParamKind { KWeight, KBias, KGamma, KBeta, KAlpha };
    struct ParamSpec {
        std::string name;
        Shape shape;
        Index fan_in;
        ParamKind kind;
    };
    struct BnSpec {
        std::string name;
        Index channels;
    };
    struct BnSite {
        std::string name;
        RunningStats stats;
    };

    explicit BiteModel(BiteConfig cfg, std::uint64_t seed = 0) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (cfg_.use_frequency) {
            plan_.emplace(cfg_.stft_window, cfg_.fs, cfg_.f_lo, cfg_.f_hi);
        }
        Rng rng = Rng::derived(seed, Stream::Init);
        for (const ParamSpec& ps : parameter_specs(cfg_)) {
            Tensor t = Tensor::zeros(ps.shape);
            switch (ps.kind) {
            case KGamma:
                t.fill(1.0);
                break;
            case KBeta:
            case KAlpha:
                break; // stays zero
            default: {
                const double bound = std::sqrt(1.0 / static_cast<double>(ps.fan_in));
                for (Index i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
                break;
            }
            }
            index_[ps.name] = params_.size();
            params_.emplace_back(ps.name, Variable::leaf(std::move(t), true));
        }
        for (const BnSpec& bs : bn_specs(cfg_)) {
            bn_index_[bs.name] = bn_.size();
            bn_.push_back(BnSite{bs.name, RunningStats::make(bs.channels)});
        }
    }

    const BiteConfig& config() const { return cfg_; }
    const StftPlan& plan() const {
        if (!plan_) throw ConfigError("model has no frequency stream, so no STFT plan");
        return *plan_;
    }

    std::vector<std::pair<std::string, Variable>>& parameters() { return params_; }
    const std::vector<std::pair<std::string, Variable>>& parameters() const { return params_; }
    std::vector<BnSite>& bn_sites() { return bn_; }
    const std::vector<BnSite>& bn_sites() const { return bn_; }

    Variable& param(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("no such parameter: " + name);
        return params_[it->second].second;
    }
    RunningStats& stats(const std::string& name) {
        auto it = bn_index_.find(name);
        if (it == bn_index_.end()) throw ConfigError("no such batch-norm site: " + name);
        return bn_[it->second].stats;
    }

    // -- per-component parameter/buffer enumeration (order fixes the
    //    initialization stream and the serialization layout) ---------------

    static std::vector<ParamSpec> parameter_specs(const BiteConfig& cfg) {
        std::vector<ParamSpec> out;
        const Index C = cfg.channels, F1 = cfg.f1, F2 = cfg.f2(), D = cfg.depth_mult;
        const Index K = cfg.kernel(), tc = cfg.tc(), nc = cfg.n_classes;
        auto weight = [&](std::string name, Shape shape, Index fan_in) {
            out.push_back({std::move(name), std::move(shape), fan_in, KWeight});
        };
        auto bias = [&](std::string name, Shape shape, Index fan_in) {
            out.push_back({std::move(name), std::move(shape), fan_in, KBias});
        };
        auto bn = [&](const std::string& name, Index ch) {
            out.push_back({name + ".gamma", {ch}, ch, KGamma});
            out.push_back({name + ".beta", {ch}, ch, KBeta});
        };

        if (cfg.use_temporal) {
            weight("temporal.conv_time.weight", {F1, 1, 1, K}, K);
            bn("temporal.bn1", F1);
            weight("temporal.conv_space.weight", {F2, 1, C, 1}, C);
            bn("temporal.bn2", F2);
        }
        if (cfg.use_frequency) {
            const Index F0 = cfg.f0();
            weight("frequency.conv.weight", {F0, 1, C, 1}, C);
            bn("frequency.bn", F0);
        }
        if (cfg.use_attention) {
            const Index F0 = cfg.f0();
            const Index gsz = F2 / D;
            for (Index i = 2; i <= D; ++i) {
                const Index k = 2 * i - 3;
                weight("ptfa.temporal.g" + std::to_string(i) + ".weight", {gsz, gsz, 1, k},
                       gsz * k);
            }
            for (Index i = 2; i <= D; ++i) {
                const Index k = 2 * i - 3;
                weight("ptfa.frequency.b" + std::to_string(i) + ".weight", {F0, 1, 1, k}, k);
            }
            weight("ptfa.attention.weight", {F2, D * F0, 1, 1}, D * F0);
            bias("ptfa.attention.bias", {F2}, D * F0);
        }
        if (cfg.use_bitcn) {
            const Index cz = cfg.cz(), kt = cfg.tcn_kernel;
            for (const char* dir : {"tcn.fwd", "tcn.bwd"}) {
                for (Index b = 0; b < cfg.tcn_blocks; ++b) {
                    const std::string pre = std::string(dir) + ".block" + std::to_string(b) + ".";
                    const Index cin = (b == 0) ? cz : tc;
                    weight(pre + "conv1.weight", {tc, cin, 1, kt}, cin * kt);
                    bn(pre + "bn1", tc);
                    weight(pre + "conv2.weight", {tc, tc, 1, kt}, tc * kt);
                    bn(pre + "bn2", tc);
                    if (b == 0 && cz != tc) {
                        weight(pre + "proj.weight", {tc, cz, 1, 1}, cz);
                    }
                }
            }
            out.push_back({"fusion.alpha_raw", Shape{}, 1, KAlpha});
        } else {
            const Index cz = cfg.cz();
            weight("head.avg_linear.weight", {cz, tc}, cz);
            bias("head.avg_linear.bias", {tc}, cz);
        }
        weight("classifier.weight", {tc, nc}, tc);
        bias("classifier.bias", {nc}, tc);
        return out;
    }

    static std::vector<BnSpec> bn_specs(const BiteConfig& cfg) {
        std::vector<BnSpec> out;
        if (cfg.use_temporal) {
            out.push_back({"temporal.bn1", cfg.f1});
            out.push_back({"temporal.bn2", cfg.f2()});
        }
        if (cfg.use_frequency) {
            out.push_back({"frequency.bn", cfg.f0()});
        }
        if (cfg.use_bitcn) {
            for (const char* dir : {"tcn.fwd", "tcn.bwd"}) {
                for (Index b = 0; b < cfg.tcn_blocks; ++b) {
                    const std::string pre = std::string(dir) + ".block" + std::to_string(b) + ".";
                    out.push_back({pre + "bn1", cfg.tc()});
                    out.push_back({pre + "bn2", cfg.tc()});
                }
            }
        }
        return out;
    }

    /// Total learnable scalars (batch-norm affine parameters and the fusion
    /// logit included); a pure function of the config.
    static Index parameter_count(const BiteConfig& cfg) {
        Index total = 0;
        for (const ParamSpec& ps : parameter_specs(cfg)) total += shape_numel(ps.shape);
        return total;
    }

    // -- components --------------------------------------------------------

    /// [B,1,C,T] -> [B,F2,1,T']: width-preserving temporal conv, batch norm,
    /// depthwise spatial conv over the electrode axis, batch norm, ELU,
    /// average pooling, dropout.
    Variable temporal_stream(Graph& g, const Variable& x, Mode mode, Rng* rng = nullptr) {
        check_input(x.value(), "temporal_stream");
        Variable h = conv2d(g, x, param("temporal.conv_time.weight"), 1, {1, 1},
                            Padding::same_width());
        h = batch_norm(g, h, param("temporal.bn1.gamma"), param("temporal.bn1.beta"),
                       stats("temporal.bn1"), mode);
        h = conv2d(g, h, param("temporal.conv_space.weight"), cfg_.f1);
        h = batch_norm(g, h, param("temporal.bn2.gamma"), param("temporal.bn2.beta"),
                       stats("temporal.bn2"), mode);
        h = elu(g, h);
        h = avg_pool_last_axis(g, h, cfg_.pool);
        return drop(g, h, mode, rng);
    }

    /// [B,F0,C,T] -> [B,F0,1,T']: per-bin grouped spatial conv, batch norm,
    /// ELU, average pooling, dropout.
    Variable frequency_stream(Graph& g, const Variable& spec, Mode mode, Rng* rng = nullptr) {
        const Tensor& v = spec.value();
        if (v.rank() != 4 || v.dim(1) != cfg_.f0() || v.dim(2) != cfg_.channels ||
            v.dim(3) != cfg_.samples) {
            throw ConfigError("frequency_stream: spectrogram shape " + shape_str(v.shape()) +
                              " does not match config [B," + std::to_string(cfg_.f0()) + "," +
                              std::to_string(cfg_.channels) + "," + std::to_string(cfg_.samples) +
                              "]");
        }
        Variable h = conv2d(g, spec, param("frequency.conv.weight"), cfg_.f0());
        h = batch_norm(g, h, param("frequency.bn.gamma"), param("frequency.bn.beta"),
                       stats("frequency.bn"), mode);
        h = elu(g, h);
        h = avg_pool_last_axis(g, h, cfg_.pool);
        return drop(g, h, mode, rng);
    }

    /// Pyramidal time-frequency attention. f_time [B,F2,1,T'] is split into
    /// depth groups convolved at growing scales; f_freq [B,F0,1,T'] feeds a
    /// matching pyramid whose concatenation drives a sigmoid gate over the
    /// multi-scale temporal map.
    Variable ptfa(Graph& g, const Variable& f_time, const Variable& f_freq) {
        const Index D = cfg_.depth_mult, gsz = cfg_.f2() / D;
        std::vector<Variable> groups;
        for (Index i = 1; i <= D; ++i) {
            Variable slice = slice_channels(g, f_time, (i - 1) * gsz, gsz);
            if (i == 1) {
                groups.push_back(slice);
            } else {
                const Index k = 2 * i - 3;
                groups.push_back(conv2d(g, slice,
                                        param("ptfa.temporal.g" + std::to_string(i) + ".weight"),
                                        1, {1, 1}, Padding::symmetric(0, (k - 1) / 2)));
            }
        }
        Variable xms = groups.size() == 1 ? groups[0] : concat_channels(g, groups);

        std::vector<Variable> branches;
        branches.push_back(f_freq);
        for (Index i = 2; i <= D; ++i) {
            const Index k = 2 * i - 3;
            branches.push_back(conv2d(g, f_freq,
                                      param("ptfa.frequency.b" + std::to_string(i) + ".weight"),
                                      cfg_.f0(), {1, 1}, Padding::symmetric(0, (k - 1) / 2)));
        }
        Variable fcat = branches.size() == 1 ? branches[0] : concat_channels(g, branches);
        Variable gate = conv2d(g, fcat, param("ptfa.attention.weight"), 1);
        gate = sigmoid(g, add_channel_bias(g, gate, param("ptfa.attention.bias")));
        return mul(g, xms, gate);
    }

    /// One TCN direction: L residual blocks of two causal dilated convs
    /// (dilation doubling per block), each conv -> batch norm -> ELU ->
    /// dropout. Returns the full sequence [B,tc,1,T'].
    Variable bitcn_stack(Graph& g, const Variable& z, bool backward_weights, Mode mode,
                         Rng* rng = nullptr) {
        if (z.value().dim(3) < 1) {
            throw ConfigError("bitcn_stack: sequence length must be >= 1");
        }
        const std::string dir = backward_weights ? "tcn.bwd" : "tcn.fwd";
        Variable u = z;
        for (Index b = 0; b < cfg_.tcn_blocks; ++b) {
            const std::string pre = dir + ".block" + std::to_string(b) + ".";
            const Index d = Index(1) << b;
            const Index pad = (cfg_.tcn_kernel - 1) * d;
            Variable h = conv2d(g, u, param(pre + "conv1.weight"), 1, {1, d},
                                Padding::causal_left(pad));
            h = batch_norm(g, h, param(pre + "bn1.gamma"), param(pre + "bn1.beta"),
                           stats(pre + "bn1"), mode);
            h = elu(g, h);
            h = drop(g, h, mode, rng);
            h = conv2d(g, h, param(pre + "conv2.weight"), 1, {1, d}, Padding::causal_left(pad));
            h = batch_norm(g, h, param(pre + "bn2.gamma"), param(pre + "bn2.beta"),
                           stats(pre + "bn2"), mode);
            h = elu(g, h);
            h = drop(g, h, mode, rng);
            Variable res = u;
            if (b == 0 && cfg_.cz() != cfg_.tc()) {
                res = conv2d(g, u, param(pre + "proj.weight"), 1);
            }
            u = add(g, h, res);
        }
        return u;
    }

    /// Receptive field (in pooled samples) of one TCN direction.
    Index bitcn_receptive_field() const {
        return 1 + 2 * (cfg_.tcn_kernel - 1) * ((Index(1) << cfg_.tcn_blocks) - 1);
    }

    // -- end-to-end forward --------------------------------------------------

    /// Spectrogram batch for raw input [B,1,C,T] -> [B,F0,C,T].
    Tensor spectrogram_batch(const Tensor& x) const {
        check_input(x, "spectrogram_batch");
        const Index B = x.dim(0), C = cfg_.channels, T = cfg_.samples, F0 = cfg_.f0();
        Tensor out = Tensor::zeros({B, F0, C, T});
        Tensor trial = Tensor::zeros({C, T});
        for (Index b = 0; b < B; ++b) {
            for (Index i = 0; i < C * T; ++i) trial[i] = x[b * C * T + i];
            Spectrogram sp = stft_magnitude(trial, plan());
            for (Index i = 0; i < F0 * C * T; ++i) out[b * F0 * C * T + i] = sp.values[i];
        }
        return out;
    }

    /// Full pipeline on a raw batch; computes spectrograms internally when the
    /// frequency stream is enabled.
    Variable forward(Graph& g, const Tensor& x, Mode mode, Rng* rng = nullptr) {
        if (cfg_.use_frequency) {
            Tensor spec = spectrogram_batch(x);
            return forward_with_spec(g, x, &spec, mode, rng);
        }
        return forward_with_spec(g, x, nullptr, mode, rng);
    }

    /// Forward with precomputed spectrograms (trainers cache them per trial).
    Variable forward_with_spec(Graph& g, const Tensor& x, const Tensor* spec, Mode mode,
                               Rng* rng = nullptr) {
        check_input(x, "forward");
        std::optional<Variable> t_out, f_out;
        if (cfg_.use_temporal) {
            t_out = temporal_stream(g, Variable::leaf(x), mode, rng);
        }
        if (cfg_.use_frequency) {
            if (spec == nullptr) {
                throw ConfigError("forward: frequency stream enabled but no spectrogram given");
            }
            f_out = frequency_stream(g, Variable::leaf(*spec), mode, rng);
        }
        std::vector<Variable> parts;
        if (t_out) {
            parts.push_back(cfg_.use_attention ? ptfa(g, *t_out, *f_out) : *t_out);
        }
        if (f_out) parts.push_back(*f_out);
        Variable z = parts.size() == 1 ? parts[0] : concat_channels(g, parts);

        Variable h = [&] {
            if (cfg_.use_bitcn) {
                Variable hf = last_timestep(g, bitcn_stack(g, z, false, mode, rng));
                Variable hb =
                    last_timestep(g, bitcn_stack(g, flip_last_axis(g, z), true, mode, rng));
                return fuse(g, hf, hb, param("fusion.alpha_raw"));
            }
            Variable avg = avg_pool_last_axis(g, z, cfg_.t_prime()); // [B,Cz,1,1]
            Variable v = last_timestep(g, avg);                      // [B,Cz]
            return add_channel_bias(g, matmul(g, v, param("head.avg_linear.weight")),
                                    param("head.avg_linear.bias"));
        }();
        return add_channel_bias(g, matmul(g, h, param("classifier.weight")),
                                param("classifier.bias"));
    }

private:
    BiteConfig cfg_;
    std::optional<StftPlan> plan_;
    std::vector<std::pair<std::string, Variable>> params_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<BnSite> bn_;
    std::unordered_map<std::string, std::size_t> bn_index_;

    void check_input(const Tensor& x, const char* where) const {
        if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.channels ||
            x.dim(3) != cfg_.samples) {
            throw ConfigError(std::string(where) + ": input shape " + shape_str(x.shape()) +
                              " does not match config [B,1," + std::to_string(cfg_.channels) +
                              "," + std::to_string(cfg_.samples) + "]");
        }
    }

    Variable drop(Graph& g, const Variable& v, Mode mode, Rng* rng) {
        if (mode == Mode::Eval || cfg_.dropout == 0.0) return v;
        if (rng == nullptr) {
            throw ConfigError("training-mode forward with dropout needs an RNG");
        }
        return dropout(g, v, cfg_.dropout, mode, *rng);
    }
};

} // namespace bite
