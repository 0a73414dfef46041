#pragma once

// Signal frontend: Hann-windowed short-time Fourier magnitudes with hop 1,
// frequency-band bin selection, and Euclidean Alignment of raw trials.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bite/errors.hpp"
#include "bite/tensor.hpp"

namespace bite {

/// Periodic Hann window: w[n] = 0.5*(1 - cos(2*pi*n/N)).
inline std::vector<double> hann_window(Index n) {
    if (n < 2) {
        throw ConfigError("hann_window: length must be >= 2, got " + std::to_string(n));
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) {
        w[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(step * static_cast<double>(i)));
    }
    return w;
}

/// DFT bins k with 1 <= k <= N/2 whose center frequency k*fs/N lies in
/// [f_lo, f_hi]. The DC bin is always excluded.
inline std::vector<Index> band_bins(double fs, Index n_fft, double f_lo, double f_hi) {
    if (n_fft < 2) {
        throw ConfigError("band_bins: window length must be >= 2, got " + std::to_string(n_fft));
    }
    if (!(f_lo > 0.0) || !(f_lo < f_hi) || !(f_hi <= fs / 2.0)) {
        std::ostringstream os;
        os << "band_bins: need 0 < f_lo < f_hi <= fs/2, got f_lo=" << f_lo << " f_hi=" << f_hi
           << " fs=" << fs;
        throw ConfigError(os.str());
    }
    std::vector<Index> bins;
    for (Index k = 1; k <= n_fft / 2; ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n_fft);
        if (f >= f_lo && f <= f_hi) bins.push_back(k);
    }
    if (bins.empty()) {
        std::ostringstream os;
        os << "band_bins: no DFT bin of N=" << n_fft << " at fs=" << fs << " falls inside ["
           << f_lo << ", " << f_hi << "] Hz";
        throw ConfigError(os.str());
    }
    return bins;
}

namespace detail {

inline bool is_pow2(Index n) { return n > 0 && (n & (n - 1)) == 0; }

} // namespace detail

/// Precomputed plan for hop-1 magnitude STFTs over a fixed window length,
/// sample rate, and frequency band.
class StftPlan {
public:
    StftPlan(Index window_length, double fs, double f_lo, double f_hi)
        : n_(window_length),
          fs_(fs),
          f_lo_(f_lo),
          f_hi_(f_hi),
          window_(hann_window(window_length)),
          bins_(band_bins(fs, window_length, f_lo, f_hi)) {
        if (detail::is_pow2(n_)) {
            build_fft_tables();
        } else {
            build_direct_tables();
        }
    }

    static constexpr Index hop = 1;

    Index window_length() const { return n_; }
    double fs() const { return fs_; }
    double f_lo() const { return f_lo_; }
    double f_hi() const { return f_hi_; }
    const std::vector<double>& window() const { return window_; }
    const std::vector<Index>& bins() const { return bins_; }
    Index n_bands() const { return static_cast<Index>(bins_.size()); }

    /// Magnitudes of the selected bins for one windowed frame (length N).
    /// Writes n_bands() values to `out`.
    void frame_magnitudes(const double* frame, double* out) const {
        if (!bitrev_.empty()) {
            fft_magnitudes(frame, out);
        } else {
            direct_magnitudes(frame, out);
        }
    }

private:
    Index n_;
    double fs_, f_lo_, f_hi_;
    std::vector<double> window_;
    std::vector<Index> bins_;

    // Radix-2 path (power-of-two window).
    std::vector<Index> bitrev_;
    std::vector<double> tw_re_, tw_im_; // e^{-2*pi*i*j/N}, j = 0..N/2-1
    mutable std::vector<double> re_, im_;

    // Direct path: per selected bin, cos/sin of -2*pi*k*t/N for t = 0..N-1.
    std::vector<double> dir_cos_, dir_sin_;

    void build_fft_tables() {
        bitrev_.assign(static_cast<std::size_t>(n_), 0);
        Index bits = 0;
        while ((Index(1) << bits) < n_) ++bits;
        for (Index i = 0; i < n_; ++i) {
            Index r = 0;
            for (Index b = 0; b < bits; ++b) {
                if (i & (Index(1) << b)) r |= Index(1) << (bits - 1 - b);
            }
            bitrev_[static_cast<std::size_t>(i)] = r;
        }
        const Index half = n_ / 2;
        tw_re_.resize(static_cast<std::size_t>(half));
        tw_im_.resize(static_cast<std::size_t>(half));
        for (Index j = 0; j < half; ++j) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n_);
            tw_re_[static_cast<std::size_t>(j)] = std::cos(ang);
            tw_im_[static_cast<std::size_t>(j)] = std::sin(ang);
        }
        re_.resize(static_cast<std::size_t>(n_));
        im_.resize(static_cast<std::size_t>(n_));
    }

    void build_direct_tables() {
        dir_cos_.resize(bins_.size() * static_cast<std::size_t>(n_));
        dir_sin_.resize(bins_.size() * static_cast<std::size_t>(n_));
        for (std::size_t b = 0; b < bins_.size(); ++b) {
            const double k = static_cast<double>(bins_[b]);
            for (Index t = 0; t < n_; ++t) {
                const double ang =
                    -2.0 * std::numbers::pi * k * static_cast<double>(t) / static_cast<double>(n_);
                dir_cos_[b * static_cast<std::size_t>(n_) + static_cast<std::size_t>(t)] =
                    std::cos(ang);
                dir_sin_[b * static_cast<std::size_t>(n_) + static_cast<std::size_t>(t)] =
                    std::sin(ang);
            }
        }
    }

    void fft_magnitudes(const double* frame, double* out) const {
        double* re = re_.data();
        double* im = im_.data();
        for (Index i = 0; i < n_; ++i) {
            re[bitrev_[static_cast<std::size_t>(i)]] = frame[i];
            im[bitrev_[static_cast<std::size_t>(i)]] = 0.0;
        }
        for (Index len = 2; len <= n_; len <<= 1) {
            const Index half = len >> 1;
            const Index step = n_ / len;
            for (Index start = 0; start < n_; start += len) {
                for (Index j = 0; j < half; ++j) {
                    const std::size_t tw = static_cast<std::size_t>(j * step);
                    const double wr = tw_re_[tw], wi = tw_im_[tw];
                    const Index a = start + j, b = start + j + half;
                    const double vr = re[b] * wr - im[b] * wi;
                    const double vi = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - vr;
                    im[b] = im[a] - vi;
                    re[a] += vr;
                    im[a] += vi;
                }
            }
        }
        for (std::size_t b = 0; b < bins_.size(); ++b) {
            const Index k = bins_[b];
            out[b] = std::sqrt(re[k] * re[k] + im[k] * im[k]);
        }
    }

    void direct_magnitudes(const double* frame, double* out) const {
        for (std::size_t b = 0; b < bins_.size(); ++b) {
            const double* ct = dir_cos_.data() + b * static_cast<std::size_t>(n_);
            const double* st = dir_sin_.data() + b * static_cast<std::size_t>(n_);
            double re = 0.0, im = 0.0;
            for (Index t = 0; t < n_; ++t) {
                re += frame[t] * ct[t];
                im += frame[t] * st[t];
            }
            out[b] = std::sqrt(re * re + im * im);
        }
    }
};

/// Magnitude spectrogram of one multi-channel trial: values[b, c, t] is the
/// magnitude of selected bin b on channel c at sample t. Center zero-padding
/// keeps the time axis the same length as the input.
struct Spectrogram {
    Tensor values; // [F0, C, T]
};

inline Spectrogram stft_magnitude(const Tensor& signal, const StftPlan& plan) {
    if (signal.rank() != 2) {
        throw DataError("stft_magnitude: expected a [channels, samples] input, got shape " +
                        shape_str(signal.shape()));
    }
    const Index C = signal.dim(0);
    const Index T = signal.dim(1);
    const Index N = plan.window_length();
    if (T < N) {
        throw DataError("stft_magnitude: input too short: " + std::to_string(T) +
                        " samples < window length " + std::to_string(N));
    }
    const Index F0 = plan.n_bands();
    const Index pad_left = N / 2;
    const std::vector<double>& w = plan.window();

    Tensor out = Tensor::zeros({F0, C, T});
    std::vector<double> frame(static_cast<std::size_t>(N));
    std::vector<double> mags(static_cast<std::size_t>(F0));
    for (Index c = 0; c < C; ++c) {
        const double* x = signal.data() + c * T;
        for (Index t = 0; t < T; ++t) {
            const Index base = t - pad_left;
            for (Index j = 0; j < N; ++j) {
                const Index idx = base + j;
                const double v = (idx >= 0 && idx < T) ? x[idx] : 0.0;
                frame[static_cast<std::size_t>(j)] = v * w[static_cast<std::size_t>(j)];
            }
            plan.frame_magnitudes(frame.data(), mags.data());
            for (Index b = 0; b < F0; ++b) {
                out[(b * C + c) * T + t] = mags[static_cast<std::size_t>(b)];
            }
        }
    }
    return Spectrogram{std::move(out)};
}

// ---------------------------------------------------------------------------
// Euclidean Alignment
// ---------------------------------------------------------------------------

/// Whitening state estimated from a set of trials: the mean trial covariance
/// and its inverse matrix square root.
struct AlignmentState {
    Tensor mean_covariance; // [C, C]
    Tensor whitener;        // [C, C], symmetric
    Index fit_count = 0;
};

namespace detail {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> as_matrix(const Tensor& t) {
    return Eigen::Map<const RowMajorMatrix>(t.data(), t.dim(0), t.dim(1));
}

} // namespace detail

/// Mean covariance over trials and its inverse square root. Eigenvalues are
/// clamped below at 1e-10 before inversion so rank-deficient covariances
/// stay finite.
inline AlignmentState ea_fit(const std::vector<Tensor>& trials) {
    if (trials.empty()) {
        throw DataError("ea_fit: need at least one trial");
    }
    const Index C = trials.front().dim(0);
    for (const Tensor& trial : trials) {
        if (trial.rank() != 2) {
            throw DataError("ea_fit: expected [channels, samples] trials, got shape " +
                            shape_str(trial.shape()));
        }
        if (trial.dim(0) != C) {
            throw DataError("ea_fit: inconsistent channel counts: " + std::to_string(C) +
                            " vs " + std::to_string(trial.dim(0)));
        }
    }

    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(C, C);
    for (const Tensor& trial : trials) {
        auto X = detail::as_matrix(trial);
        R.noalias() += X * X.transpose();
    }
    R /= static_cast<double>(trials.size());
    R = 0.5 * (R + R.transpose().eval()); // enforce exact symmetry

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(R);
    if (es.info() != Eigen::Success) {
        throw DataError("ea_fit: eigendecomposition of the mean covariance failed");
    }
    Eigen::VectorXd inv_sqrt = es.eigenvalues();
    for (Index i = 0; i < C; ++i) {
        inv_sqrt[i] = 1.0 / std::sqrt(std::max(inv_sqrt[i], 1e-10));
    }
    Eigen::MatrixXd W =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

    AlignmentState state;
    state.mean_covariance = Tensor::zeros({C, C});
    state.whitener = Tensor::zeros({C, C});
    for (Index i = 0; i < C; ++i) {
        for (Index j = 0; j < C; ++j) {
            state.mean_covariance[i * C + j] = R(i, j);
            state.whitener[i * C + j] = W(i, j);
        }
    }
    state.fit_count = static_cast<Index>(trials.size());
    return state;
}

/// Applies the whitener: returns whitener * trial.
inline Tensor ea_apply(const AlignmentState& state, const Tensor& trial) {
    const Index C = state.whitener.dim(0);
    if (trial.rank() != 2 || trial.dim(0) != C) {
        throw DataError("ea_apply: trial shape " + shape_str(trial.shape()) +
                        " does not match whitener channel count " + std::to_string(C));
    }
    const Index T = trial.dim(1);
    Tensor out = Tensor::zeros({C, T});
    auto W = detail::as_matrix(state.whitener);
    auto X = detail::as_matrix(trial);
    Eigen::Map<detail::RowMajorMatrix>(out.data(), C, T).noalias() = W * X;
    return out;
}

} // namespace bite
