#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "bite/autograd.hpp"
#include "bite/metrics.hpp"
#include "bite/model.hpp"
#include "bite/rng.hpp"
#include "bite/signal.hpp"
#include "bite/tensor.hpp"
#include "bite/training.hpp"

namespace bite {

/// One entry of the self-verification battery.
struct VerifyCheck {
    std::string name;
    bool pass = false;
    double metric = 0.0;
};

struct VerifyOptions {
    /// Test fixture: corrupts one analytic gradient before the comparison.
    /// Exists to prove the battery can fail.
    bool inject_gradient_fault = false;
};

inline std::string format_check(const VerifyCheck& c) {
    std::ostringstream os;
    os << "check=" << c.name << " status=" << (c.pass ? "pass" : "fail") << " metric=" << c.metric;
    return os.str();
}

inline bool verification_passed(const std::vector<VerifyCheck>& checks) {
    for (const VerifyCheck& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

namespace detail {

inline BiteConfig verify_tiny_config() {
    BiteConfig cfg;
    cfg.channels = 3;
    cfg.samples = 64;
    cfg.fs = 64.0;
    cfg.n_classes = 2;
    cfg.f1 = 2;
    cfg.depth_mult = 2;
    cfg.stft_window = 16;
    cfg.f_lo = 4.0;
    cfg.f_hi = 16.0;
    cfg.pool = 8;
    cfg.tcn_blocks = 1;
    cfg.tcn_kernel = 3;
    cfg.dropout = 0.0;
    return cfg;
}

/// Full-model finite-difference check over every parameter coordinate.
inline VerifyCheck verify_gradients(bool inject_fault) {
    const BiteConfig cfg = verify_tiny_config();
    BiteModel model(cfg, 7);
    Rng rng(1234);
    Tensor x = Tensor::zeros({2, 1, cfg.channels, cfg.samples});
    for (Index i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    const Tensor spec = model.spectrogram_batch(x);
    const std::vector<Index> labels = {0, 1};

    auto eval_loss = [&](bool record) {
        Graph g;
        g.set_recording(record);
        Variable logits = model.forward_with_spec(g, x, &spec, Mode::Eval);
        Variable loss = cross_entropy(g, logits, labels);
        if (record) g.backward(loss);
        return loss.value()[0];
    };

    for (auto& [name, v] : model.parameters()) v.zero_grad();
    eval_loss(true);
    std::vector<Tensor> analytic;
    for (const auto& [name, v] : model.parameters()) analytic.push_back(v.grad());
    if (inject_fault && !analytic.empty()) analytic[0][0] += 1.0;

    const double eps = 1e-5;
    double max_rel = 0.0;
    std::size_t pi = 0;
    for (auto& [name, v] : model.parameters()) {
        for (Index i = 0; i < v.value().numel(); ++i) {
            const double saved = v.value()[i];
            v.value()[i] = saved + eps;
            const double lp = eval_loss(false);
            v.value()[i] = saved - eps;
            const double lm = eval_loss(false);
            v.value()[i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-4});
            max_rel = std::max(max_rel, rel);
        }
        ++pi;
    }
    return {"gradient-check", max_rel < 1e-4, max_rel};
}

/// Spot-checks STFT magnitudes against direct DFT sums at random
/// (channel, frame, bin) positions.
inline VerifyCheck verify_stft() {
    const Index n = 32, c_count = 2, t_count = 80;
    const double fs = 128.0;
    StftPlan plan(n, fs, 4.0, 64.0);
    Rng rng(77);
    Tensor x = Tensor::zeros({c_count, t_count});
    for (Index i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Spectrogram sp = stft_magnitude(x, plan);

    std::vector<double> window = hann_window(n);
    const Index pad = n / 2;
    double max_abs = 0.0;
    for (int probe = 0; probe < 40; ++probe) {
        const Index c = static_cast<Index>(rng.below(static_cast<std::uint64_t>(c_count)));
        const Index t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(t_count)));
        const Index bi = static_cast<Index>(rng.below(plan.bins().size()));
        const Index k = plan.bins()[static_cast<std::size_t>(bi)];
        std::complex<double> acc(0.0, 0.0);
        for (Index i = 0; i < n; ++i) {
            const Index src = t - pad + i;
            const double sample =
                (src >= 0 && src < t_count) ? x[c * t_count + src] : 0.0;
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k * i) /
                                 static_cast<double>(n);
            acc += window[static_cast<std::size_t>(i)] * sample *
                   std::complex<double>(std::cos(angle), std::sin(angle));
        }
        const double expected = std::abs(acc);
        const double got = sp.values[(bi * c_count + c) * t_count + t];
        max_abs = std::max(max_abs, std::abs(expected - got));
    }
    return {"stft-oracle", max_abs < 1e-9, max_abs};
}

/// After whitening, the mean trial covariance must be the identity.
inline VerifyCheck verify_alignment() {
    Rng rng(99);
    const Index c = 4, t = 64;
    std::vector<Tensor> trials;
    for (int i = 0; i < 6; ++i) {
        Tensor trial = Tensor::zeros({c, t});
        for (Index j = 0; j < trial.numel(); ++j) trial[j] = rng.normal();
        trials.push_back(std::move(trial));
    }
    AlignmentState state = ea_fit(trials);
    std::vector<Tensor> whitened;
    for (const Tensor& trial : trials) whitened.push_back(ea_apply(state, trial));
    AlignmentState check = ea_fit(whitened);
    double max_dev = 0.0;
    for (Index i = 0; i < c; ++i) {
        for (Index j = 0; j < c; ++j) {
            const double target = i == j ? 1.0 : 0.0;
            max_dev = std::max(max_dev, std::abs(check.mean_covariance[i * c + j] - target));
        }
    }
    return {"ea-identity", max_dev < 1e-6, max_dev};
}

struct TcnProbe {
    Tensor base;  // [1, tc, 1, T']
    Tensor probed;
};

/// Forward the dilated causal stack twice, with and without an impulse at
/// time `t0`, and return both responses.
inline TcnProbe tcn_probe(BiteModel& model, const Tensor& z_value, Index t0) {
    TcnProbe out;
    {
        Graph g;
        g.set_recording(false);
        out.base = model.bitcn_stack(g, Variable::leaf(z_value), false, Mode::Eval).value();
    }
    Tensor z2 = z_value;
    const Index t_len = z_value.dim(3);
    for (Index ch = 0; ch < z_value.dim(1); ++ch) z2[(ch * 1 + 0) * t_len + t0] += 0.5;
    {
        Graph g;
        g.set_recording(false);
        out.probed = model.bitcn_stack(g, Variable::leaf(z2), false, Mode::Eval).value();
    }
    return out;
}

inline double probe_delta(const TcnProbe& p, Index channel_count, Index t_len, Index s) {
    double d = 0.0;
    for (Index ch = 0; ch < channel_count; ++ch) {
        d = std::max(d, std::abs(p.probed[ch * t_len + s] - p.base[ch * t_len + s]));
    }
    return d;
}

inline BiteConfig verify_tcn_config() {
    BiteConfig cfg;
    cfg.channels = 2;
    cfg.samples = 384;
    cfg.fs = 128.0;
    cfg.n_classes = 2;
    cfg.f1 = 2;
    cfg.depth_mult = 2;
    cfg.pool = 8; // T' = 48, comfortably past the 31-step receptive field
    cfg.tcn_blocks = 2;
    cfg.tcn_kernel = 6;
    cfg.dropout = 0.0;
    cfg.use_frequency = false;
    cfg.use_attention = false;
    cfg.temporal_kernel = 16;
    cfg.stft_window = 16;
    return cfg;
}

/// An impulse in the middle of the sequence must leave every earlier output
/// bit-identical.
inline VerifyCheck verify_causality() {
    BiteConfig cfg = verify_tcn_config();
    BiteModel model(cfg, 11);
    Rng rng(12);
    const Index cz = cfg.cz(), tp = cfg.t_prime(), tc = cfg.tc();
    Tensor z = Tensor::zeros({1, cz, 1, tp});
    for (Index i = 0; i < z.numel(); ++i) z[i] = rng.uniform(-1.0, 1.0);
    const Index t0 = tp / 2;
    TcnProbe probe = tcn_probe(model, z, t0);
    double max_past = 0.0;
    for (Index s = 0; s < t0; ++s) max_past = std::max(max_past, probe_delta(probe, tc, tp, s));
    return {"causality", max_past == 0.0, max_past};
}

/// Impulse at t=0: the response must extend exactly 1 + 2(k_t-1)(2^L - 1)
/// steps (31 for kernel 6, two blocks).
inline VerifyCheck verify_receptive_field() {
    BiteConfig cfg = verify_tcn_config();
    BiteModel model(cfg, 11);
    Rng rng(13);
    const Index cz = cfg.cz(), tp = cfg.t_prime(), tc = cfg.tc();
    Tensor z = Tensor::zeros({1, cz, 1, tp});
    for (Index i = 0; i < z.numel(); ++i) z[i] = rng.uniform(-1.0, 1.0);
    TcnProbe probe = tcn_probe(model, z, 0);
    Index measured = 0;
    for (Index s = 0; s < tp; ++s) {
        if (probe_delta(probe, tc, tp, s) != 0.0) measured = s + 1;
    }
    const double expected = static_cast<double>(model.bitcn_receptive_field());
    return {"receptive-field", measured == static_cast<Index>(expected) && measured == 31,
            static_cast<double>(measured)};
}

/// Closed-form kappa on the balanced 4-class confusion at accuracy 0.8534.
inline VerifyCheck verify_kappa() {
    Confusion c = Confusion::zeros(4);
    for (Index r = 0; r < 4; ++r) {
        c.add(r, r, 8534);
        c.add(r, (r + 1) % 4, 488);
        c.add(r, (r + 2) % 4, 489);
        c.add(r, (r + 3) % 4, 489);
    }
    const double expected = (0.8534 - 0.25) / 0.75;
    const double dev = std::abs(kappa(c) - expected);
    Confusion diag = Confusion::zeros(3);
    for (Index k = 0; k < 3; ++k) diag.add(k, k, 5 + k);
    const double diag_dev = std::abs(kappa(diag) - 1.0);
    const double metric = std::max(dev, diag_dev);
    return {"kappa-form", metric < 1e-12, metric};
}

} // namespace detail

/// Runs the fast self-verification battery: analytic gradients against finite
/// differences on the tiny network, STFT against direct DFT sums, whitening
/// against the identity, causal-stack leakage and receptive-field probes, and
/// the kappa closed form. Deterministic; finishes in a few seconds.
inline std::vector<VerifyCheck> run_verification(const VerifyOptions& opt = {}) {
    std::vector<VerifyCheck> checks;
    checks.push_back(detail::verify_gradients(opt.inject_gradient_fault));
    checks.push_back(detail::verify_stft());
    checks.push_back(detail::verify_alignment());
    checks.push_back(detail::verify_causality());
    checks.push_back(detail::verify_receptive_field());
    checks.push_back(detail::verify_kappa());
    return checks;
}

} // namespace bite
