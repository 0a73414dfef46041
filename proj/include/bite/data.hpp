#pragma once

// Trial container + binary formats + synthetic generators.
//
// BITE1 trial files (all little-endian):
//   magic "BITE", u16 version=1, u32 n-trials, u16 channels, u32 samples,
//   f32 fs, u16 n-classes; then per trial: u16 subject-id, u16 label,
//   u8 tag-length + tag bytes, channels*samples f32 samples (channel-major).
//
// BITW weight archives: magic "BITW", u16 version=1, a config snapshot,
// then named f64 parameter blobs and batch-norm running statistics.

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bite/errors.hpp"
#include "bite/model.hpp"
#include "bite/rng.hpp"
#include "bite/tensor.hpp"

namespace bite {

struct Trial {
    Index subject_id = 0;
    Index label = 0;
    std::string session_tag; // optional, <= 255 bytes
    Tensor signal;           // [C, T]
};

struct TrialSet {
    double fs = 0.0;
    Index n_classes = 0;
    std::vector<Trial> trials;

    Index channels() const { return trials.empty() ? 0 : trials.front().signal.dim(0); }
    Index samples() const { return trials.empty() ? 0 : trials.front().signal.dim(1); }

    void validate() const {
        if (trials.empty()) throw DataError("TrialSet: needs at least one trial");
        if (!(fs > 0.0)) throw DataError("TrialSet: fs must be positive");
        if (n_classes < 1) throw DataError("TrialSet: n_classes must be >= 1");
        const Index C = channels(), T = samples();
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const Trial& t = trials[i];
            if (t.signal.rank() != 2 || t.signal.dim(0) != C || t.signal.dim(1) != T) {
                throw DataError("TrialSet: trial " + std::to_string(i) + " has shape " +
                                shape_str(t.signal.shape()) + ", expected [" +
                                std::to_string(C) + "," + std::to_string(T) + "]");
            }
            if (t.label < 0 || t.label >= n_classes) {
                throw DataError("TrialSet: trial " + std::to_string(i) + " label " +
                                std::to_string(t.label) + " outside [0, " +
                                std::to_string(n_classes) + ")");
            }
            if (t.subject_id < 0 || t.subject_id > 65535) {
                throw DataError("TrialSet: trial " + std::to_string(i) + " subject id " +
                                std::to_string(t.subject_id) + " does not fit u16");
            }
            if (t.session_tag.size() > 255) {
                throw DataError("TrialSet: trial " + std::to_string(i) +
                                " session tag longer than 255 bytes");
            }
        }
    }

    /// Sorted unique subject ids.
    std::vector<Index> subject_ids() const {
        std::vector<Index> ids;
        for (const Trial& t : trials) {
            bool seen = false;
            for (Index id : ids) seen = seen || id == t.subject_id;
            if (!seen) ids.push_back(t.subject_id);
        }
        std::sort(ids.begin(), ids.end());
        return ids;
    }
};

// ---------------------------------------------------------------------------
// little-endian encode/decode
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_i64(std::string& out, std::int64_t v) {
    put_u64(out, static_cast<std::uint64_t>(v));
}

class ByteReader {
public:
    ByteReader(std::string buf, std::string origin)
        : buf_(std::move(buf)), origin_(std::move(origin)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (pos_ + n > buf_.size()) {
            throw DataError(origin_ + ": file truncated at byte offset " + std::to_string(pos_) +
                            " while reading " + what + ": expected " + std::to_string(n) +
                            " more bytes, only " + std::to_string(buf_.size() - pos_) +
                            " remain");
        }
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint16_t u16(const char* what) {
        need(2, what);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
            v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    std::int64_t i64(const char* what) { return static_cast<std::int64_t>(u64(what)); }
    std::string bytes(std::size_t n, const char* what) {
        need(n, what);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    const std::string& origin() const { return origin_; }

private:
    std::string buf_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open for reading");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

inline void spill(const std::string& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError(path + ": write failed");
}

} // namespace detail

// ---------------------------------------------------------------------------
// BITE1 trial files
// ---------------------------------------------------------------------------

inline void write_trials(const std::string& path, const TrialSet& set) {
    set.validate();
    std::string out;
    out += "BITE";
    detail::put_u16(out, 1);
    detail::put_u32(out, static_cast<std::uint32_t>(set.trials.size()));
    detail::put_u16(out, static_cast<std::uint16_t>(set.channels()));
    detail::put_u32(out, static_cast<std::uint32_t>(set.samples()));
    detail::put_f32(out, static_cast<float>(set.fs));
    detail::put_u16(out, static_cast<std::uint16_t>(set.n_classes));
    for (const Trial& t : set.trials) {
        detail::put_u16(out, static_cast<std::uint16_t>(t.subject_id));
        detail::put_u16(out, static_cast<std::uint16_t>(t.label));
        detail::put_u8(out, static_cast<std::uint8_t>(t.session_tag.size()));
        out += t.session_tag;
        for (Index i = 0; i < t.signal.numel(); ++i) {
            detail::put_f32(out, static_cast<float>(t.signal[i]));
        }
    }
    detail::spill(path, out);
}

inline TrialSet read_trials(const std::string& path) {
    detail::ByteReader r(detail::slurp(path), path);
    const std::string magic = r.bytes(4, "magic");
    if (magic != "BITE") {
        throw DataError(path + ": bad magic at byte offset 0: expected \"BITE\"");
    }
    const std::size_t version_at = r.offset();
    const std::uint16_t version = r.u16("version");
    if (version != 1) {
        throw DataError(path + ": unsupported version " + std::to_string(version) +
                        " at byte offset " + std::to_string(version_at) + " (expected 1)");
    }
    const std::uint32_t n_trials = r.u32("trial count");
    const Index C = r.u16("channel count");
    const Index T = r.u32("sample count");
    const double fs = static_cast<double>(r.f32("sample rate"));
    const Index n_classes = r.u16("class count");

    TrialSet set;
    set.fs = fs;
    set.n_classes = n_classes;
    set.trials.reserve(n_trials);
    for (std::uint32_t i = 0; i < n_trials; ++i) {
        Trial t;
        t.subject_id = r.u16("subject id");
        const std::size_t label_at = r.offset();
        t.label = r.u16("label");
        if (t.label >= n_classes) {
            throw DataError(path + ": label " + std::to_string(t.label) + " at byte offset " +
                            std::to_string(label_at) + " outside [0, " +
                            std::to_string(n_classes) + ")");
        }
        const std::uint8_t taglen = r.u8("session tag length");
        t.session_tag = r.bytes(taglen, "session tag");
        Tensor sig = Tensor::zeros({C, T});
        for (Index j = 0; j < C * T; ++j) {
            sig[j] = static_cast<double>(r.f32("sample payload"));
        }
        t.signal = std::move(sig);
        set.trials.push_back(std::move(t));
    }
    set.validate();
    return set;
}

// ---------------------------------------------------------------------------
// synthetic generators
// ---------------------------------------------------------------------------

/// Steady-state visually-evoked-potential analog: class k is a sinusoid at
/// class_freqs[k] with per-channel random phase, a per-subject per-channel
/// amplitude profile, and white noise at the given linear SNR.
inline TrialSet synth_ssvep(Index n_subjects, Index trials_per_class,
                            const std::vector<double>& class_freqs, double fs, Index samples,
                            double snr, std::uint64_t seed, Index channels = 8) {
    if (n_subjects < 1) throw ConfigError("synth_ssvep: n_subjects must be >= 1");
    if (trials_per_class < 1) throw ConfigError("synth_ssvep: trials_per_class must be >= 1");
    if (channels < 1) throw ConfigError("synth_ssvep: channels must be >= 1");
    if (samples < 2) throw ConfigError("synth_ssvep: samples must be >= 2");
    if (!(fs > 0.0)) throw ConfigError("synth_ssvep: fs must be positive");
    if (!(snr > 0.0)) throw ConfigError("synth_ssvep: snr must be positive");
    if (class_freqs.empty()) throw ConfigError("synth_ssvep: need at least one class frequency");
    const double resolution = fs / static_cast<double>(samples);
    for (std::size_t i = 0; i < class_freqs.size(); ++i) {
        if (!(class_freqs[i] > 0.0) || !(class_freqs[i] < fs / 2.0)) {
            throw ConfigError("synth_ssvep: class frequency " + std::to_string(class_freqs[i]) +
                              " Hz not inside (0, fs/2)");
        }
        for (std::size_t j = i + 1; j < class_freqs.size(); ++j) {
            if (std::abs(class_freqs[i] - class_freqs[j]) < resolution) {
                throw ConfigError("synth_ssvep: unresolvable frequency pair (" +
                                  std::to_string(class_freqs[i]) + ", " +
                                  std::to_string(class_freqs[j]) +
                                  ") Hz: spacing below fs/T = " + std::to_string(resolution));
            }
        }
    }

    Rng rng = Rng::derived(seed, Stream::Synth);
    // per-subject per-channel amplitude profiles, drawn up front
    std::vector<double> amp(static_cast<std::size_t>(n_subjects * channels));
    for (double& a : amp) a = rng.uniform(0.6, 1.4);

    TrialSet set;
    set.fs = fs;
    set.n_classes = static_cast<Index>(class_freqs.size());
    const double noise_scale = 1.0 / std::sqrt(2.0 * snr);
    for (Index s = 0; s < n_subjects; ++s) {
        for (Index cls = 0; cls < set.n_classes; ++cls) {
            for (Index k = 0; k < trials_per_class; ++k) {
                Trial t;
                t.subject_id = s;
                t.label = cls;
                Tensor sig = Tensor::zeros({channels, samples});
                const double w = 2.0 * std::numbers::pi * class_freqs[static_cast<std::size_t>(cls)] / fs;
                for (Index c = 0; c < channels; ++c) {
                    const double a = amp[static_cast<std::size_t>(s * channels + c)];
                    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    const double sigma = a * noise_scale;
                    for (Index n = 0; n < samples; ++n) {
                        sig[c * samples + n] =
                            a * std::sin(w * static_cast<double>(n) + phase) +
                            sigma * rng.normal();
                    }
                }
                t.signal = std::move(sig);
                set.trials.push_back(std::move(t));
            }
        }
    }
    return set;
}

/// Motor-imagery analog: every channel carries 8-30 Hz narrowband noise plus
/// white noise; trials of class c boost the narrowband power on the channel
/// group {ch : ch % n_classes == c}. Per-subject gain variation is applied
/// channel-wise.
inline TrialSet synth_mi(Index n_subjects, Index trials_per_class, Index n_classes, double fs,
                         Index samples, Index channels, std::uint64_t seed) {
    if (n_subjects < 1) throw ConfigError("synth_mi: n_subjects must be >= 1");
    if (trials_per_class < 1) throw ConfigError("synth_mi: trials_per_class must be >= 1");
    if (n_classes < 2) throw ConfigError("synth_mi: n_classes must be >= 2");
    if (channels < n_classes) {
        throw ConfigError("synth_mi: channels (" + std::to_string(channels) +
                          ") must be >= n_classes (" + std::to_string(n_classes) + ")");
    }
    if (samples < 2) throw ConfigError("synth_mi: samples must be >= 2");
    if (!(fs > 60.0)) {
        throw ConfigError("synth_mi: fs must exceed 60 Hz so the 8-30 Hz band is observable");
    }

    Rng rng = Rng::derived(seed, Stream::Synth, {1});
    std::vector<double> gain(static_cast<std::size_t>(n_subjects * channels));
    for (double& a : gain) a = rng.uniform(0.7, 1.3);

    constexpr Index n_components = 6;
    const double comp_scale = 1.0 / std::sqrt(static_cast<double>(n_components));
    TrialSet set;
    set.fs = fs;
    set.n_classes = n_classes;
    for (Index s = 0; s < n_subjects; ++s) {
        for (Index cls = 0; cls < n_classes; ++cls) {
            for (Index k = 0; k < trials_per_class; ++k) {
                Trial t;
                t.subject_id = s;
                t.label = cls;
                Tensor sig = Tensor::zeros({channels, samples});
                for (Index c = 0; c < channels; ++c) {
                    const bool boosted = (c % n_classes) == cls;
                    const double scale =
                        (boosted ? 1.5 : 0.5) * gain[static_cast<std::size_t>(s * channels + c)];
                    double freq[n_components], phase[n_components];
                    for (Index j = 0; j < n_components; ++j) {
                        freq[j] = rng.uniform(8.0, 30.0);
                        phase[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
                    }
                    for (Index n = 0; n < samples; ++n) {
                        double nb = 0.0;
                        for (Index j = 0; j < n_components; ++j) {
                            nb += std::sin(2.0 * std::numbers::pi * freq[j] *
                                               static_cast<double>(n) / fs +
                                           phase[j]);
                        }
                        sig[c * samples + n] =
                            scale * comp_scale * nb + 0.15 * rng.normal();
                    }
                }
                t.signal = std::move(sig);
                set.trials.push_back(std::move(t));
            }
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// BITW weight archives
// ---------------------------------------------------------------------------

namespace detail {

// Field-wise config snapshot; order defines both the binary layout and the
// mismatch reporting order. Resolved values are stored so that equivalent
// configs (e.g. tcn_channels given explicitly vs defaulted) compare equal.
struct ConfigField {
    const char* name;
    double value; // integers and booleans widen losslessly
};

inline std::vector<ConfigField> config_fields(const BiteConfig& c) {
    return {
        {"channels", double(c.channels)},
        {"samples", double(c.samples)},
        {"fs", c.fs},
        {"n-classes", double(c.n_classes)},
        {"f1", double(c.f1)},
        {"depth-mult", double(c.depth_mult)},
        {"temporal-kernel", double(c.kernel())},
        {"pool", double(c.pool)},
        {"stft-window", double(c.stft_window)},
        {"f-lo", c.f_lo},
        {"f-hi", c.f_hi},
        {"tcn-blocks", double(c.tcn_blocks)},
        {"tcn-kernel", double(c.tcn_kernel)},
        {"tcn-channels", double(c.tc())},
        {"dropout", c.dropout},
        {"use-temporal", double(c.use_temporal)},
        {"use-frequency", double(c.use_frequency)},
        {"use-attention", double(c.use_attention)},
        {"use-bitcn", double(c.use_bitcn)},
    };
}

} // namespace detail

/// Writes the model (config snapshot, parameters, batch-norm statistics) and,
/// when given, the whitener its training partition was aligned with, so that
/// later evaluation reproduces the training-time preprocessing exactly.
inline void save_weights(const std::string& path, const BiteModel& model,
                         const AlignmentState* alignment = nullptr) {
    std::string out;
    out += "BITW";
    detail::put_u16(out, 1);
    const auto fields = detail::config_fields(model.config());
    detail::put_u16(out, static_cast<std::uint16_t>(fields.size()));
    for (const auto& f : fields) detail::put_f64(out, f.value);

    detail::put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
    for (const auto& [name, v] : model.parameters()) {
        detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
        out += name;
        detail::put_u64(out, static_cast<std::uint64_t>(v.value().numel()));
        for (Index i = 0; i < v.value().numel(); ++i) detail::put_f64(out, v.value()[i]);
    }
    detail::put_u32(out, static_cast<std::uint32_t>(model.bn_sites().size()));
    for (const auto& site : model.bn_sites()) {
        detail::put_u16(out, static_cast<std::uint16_t>(site.name.size()));
        out += site.name;
        detail::put_u64(out, static_cast<std::uint64_t>(site.stats.mean.numel()));
        for (Index i = 0; i < site.stats.mean.numel(); ++i)
            detail::put_f64(out, site.stats.mean[i]);
        for (Index i = 0; i < site.stats.var.numel(); ++i)
            detail::put_f64(out, site.stats.var[i]);
    }
    detail::put_u8(out, alignment != nullptr ? 1 : 0);
    if (alignment != nullptr) {
        const Index c = alignment->whitener.dim(0);
        detail::put_u64(out, static_cast<std::uint64_t>(c));
        for (Index i = 0; i < c * c; ++i) detail::put_f64(out, alignment->whitener[i]);
        for (Index i = 0; i < c * c; ++i) detail::put_f64(out, alignment->mean_covariance[i]);
        detail::put_u64(out, static_cast<std::uint64_t>(alignment->fit_count));
    }
    detail::spill(path, out);
}

/// A deserialized weight archive: the reconstructed model plus the stored
/// whitener, when the archive carries one.
struct WeightArchive {
    BiteModel model;
    std::optional<AlignmentState> alignment;
};

namespace detail {

/// `expected == nullptr` reconstructs the config from the archived snapshot;
/// otherwise every archived field must match the requested config exactly.
inline WeightArchive load_archive_impl(const std::string& path, const BiteConfig* expected) {
    detail::ByteReader r(detail::slurp(path), path);
    if (r.bytes(4, "magic") != "BITW") {
        throw DataError(path + ": bad magic at byte offset 0: expected \"BITW\"");
    }
    const std::size_t version_at = r.offset();
    const std::uint16_t version = r.u16("version");
    if (version != 1) {
        throw DataError(path + ": unsupported version " + std::to_string(version) +
                        " at byte offset " + std::to_string(version_at) + " (expected 1)");
    }
    BiteConfig reference = expected != nullptr ? *expected : BiteConfig{};
    const auto fields = detail::config_fields(reference);
    const std::uint16_t n_fields = r.u16("config field count");
    if (n_fields != fields.size()) {
        throw ConfigError(path + ": weight archive config has " + std::to_string(n_fields) +
                          " fields, expected " + std::to_string(fields.size()));
    }
    std::vector<double> archived_values;
    for (const auto& f : fields) {
        const double archived = r.f64("config field");
        archived_values.push_back(archived);
        if (expected != nullptr && archived != f.value) {
            throw ConfigError(path + ": weight archive config mismatch at field '" +
                              std::string(f.name) + "': archive has " +
                              std::to_string(archived) + ", requested " +
                              std::to_string(f.value));
        }
    }
    BiteConfig cfg;
    if (expected != nullptr) {
        cfg = *expected;
    } else {
        // Positions follow config_fields(); resolved values round-trip as-is.
        cfg.channels = static_cast<Index>(archived_values[0]);
        cfg.samples = static_cast<Index>(archived_values[1]);
        cfg.fs = archived_values[2];
        cfg.n_classes = static_cast<Index>(archived_values[3]);
        cfg.f1 = static_cast<Index>(archived_values[4]);
        cfg.depth_mult = static_cast<Index>(archived_values[5]);
        cfg.temporal_kernel = static_cast<Index>(archived_values[6]);
        cfg.pool = static_cast<Index>(archived_values[7]);
        cfg.stft_window = static_cast<Index>(archived_values[8]);
        cfg.f_lo = archived_values[9];
        cfg.f_hi = archived_values[10];
        cfg.tcn_blocks = static_cast<Index>(archived_values[11]);
        cfg.tcn_kernel = static_cast<Index>(archived_values[12]);
        cfg.tcn_channels = static_cast<Index>(archived_values[13]);
        cfg.dropout = archived_values[14];
        cfg.use_temporal = archived_values[15] != 0.0;
        cfg.use_frequency = archived_values[16] != 0.0;
        cfg.use_attention = archived_values[17] != 0.0;
        cfg.use_bitcn = archived_values[18] != 0.0;
        cfg.validate();
    }

    BiteModel model(cfg, 0);
    const std::uint32_t n_params = r.u32("parameter count");
    if (n_params != model.parameters().size()) {
        throw DataError(path + ": archive holds " + std::to_string(n_params) +
                        " parameters, model expects " +
                        std::to_string(model.parameters().size()));
    }
    for (auto& [name, v] : model.parameters()) {
        const std::uint16_t len = r.u16("parameter name length");
        const std::string archived_name = r.bytes(len, "parameter name");
        if (archived_name != name) {
            throw DataError(path + ": parameter name mismatch: archive has '" + archived_name +
                            "', model expects '" + name + "'");
        }
        const std::uint64_t numel = r.u64("parameter size");
        if (numel != static_cast<std::uint64_t>(v.value().numel())) {
            throw DataError(path + ": parameter '" + name + "' holds " + std::to_string(numel) +
                            " values, model expects " + std::to_string(v.value().numel()));
        }
        for (Index i = 0; i < v.value().numel(); ++i) {
            v.node()->value[i] = r.f64("parameter payload");
        }
    }
    const std::uint32_t n_sites = r.u32("batch-norm site count");
    if (n_sites != model.bn_sites().size()) {
        throw DataError(path + ": archive holds " + std::to_string(n_sites) +
                        " batch-norm sites, model expects " +
                        std::to_string(model.bn_sites().size()));
    }
    for (auto& site : model.bn_sites()) {
        const std::uint16_t len = r.u16("batch-norm site name length");
        const std::string archived_name = r.bytes(len, "batch-norm site name");
        if (archived_name != site.name) {
            throw DataError(path + ": batch-norm site mismatch: archive has '" + archived_name +
                            "', model expects '" + site.name + "'");
        }
        const std::uint64_t ch = r.u64("batch-norm channel count");
        if (ch != static_cast<std::uint64_t>(site.stats.mean.numel())) {
            throw DataError(path + ": batch-norm site '" + site.name + "' holds " +
                            std::to_string(ch) + " channels, model expects " +
                            std::to_string(site.stats.mean.numel()));
        }
        for (Index i = 0; i < site.stats.mean.numel(); ++i)
            site.stats.mean[i] = r.f64("batch-norm mean");
        for (Index i = 0; i < site.stats.var.numel(); ++i)
            site.stats.var[i] = r.f64("batch-norm var");
    }

    WeightArchive archive{std::move(model), std::nullopt};
    if (r.u8("alignment flag") != 0) {
        const Index c = static_cast<Index>(r.u64("alignment channel count"));
        if (c != cfg.channels) {
            throw DataError(path + ": stored whitener covers " + std::to_string(c) +
                            " channels, model expects " + std::to_string(cfg.channels));
        }
        AlignmentState state;
        state.whitener = Tensor::zeros({c, c});
        state.mean_covariance = Tensor::zeros({c, c});
        for (Index i = 0; i < c * c; ++i) state.whitener[i] = r.f64("whitener");
        for (Index i = 0; i < c * c; ++i) state.mean_covariance[i] = r.f64("mean covariance");
        state.fit_count = static_cast<Index>(r.u64("alignment fit count"));
        archive.alignment = std::move(state);
    }
    return archive;
}

} // namespace detail

inline WeightArchive load_archive(const std::string& path) {
    return detail::load_archive_impl(path, nullptr);
}

inline WeightArchive load_archive(const std::string& path, const BiteConfig& expected) {
    expected.validate();
    return detail::load_archive_impl(path, &expected);
}

inline BiteModel load_weights(const std::string& path, const BiteConfig& expected) {
    return std::move(load_archive(path, expected).model);
}

} // namespace bite
