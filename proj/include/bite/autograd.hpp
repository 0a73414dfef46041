#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bite/errors.hpp"
#include "bite/rng.hpp"
#include "bite/tensor.hpp"

namespace bite {

enum class Mode { Train, Eval };

namespace detail {

struct VarNode {
    Tensor value;
    Tensor grad; // same shape as value, zero-initialized
    bool requires_grad = false;
    std::uint64_t id = 0;
};

inline std::uint64_t next_var_id() {
    static std::uint64_t counter = 0;
    return ++counter;
}

} // namespace detail

/// A tensor enrolled in a differentiation graph. Reference semantics: copies
/// share the underlying node, so a parameter's gradient survives across
/// training steps while graphs come and go.
class Variable {
public:
    Variable() = default;

    static Variable leaf(Tensor value, bool requires_grad = false) {
        Variable v;
        v.node_ = std::make_shared<detail::VarNode>();
        v.node_->grad = Tensor::zeros(value.shape());
        v.node_->value = std::move(value);
        v.node_->requires_grad = requires_grad;
        v.node_->id = detail::next_var_id();
        return v;
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& grad() { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    std::uint64_t id() const { return node_->id; }

    void zero_grad() { node_->grad.fill(0.0); }

    const std::shared_ptr<detail::VarNode>& node() const { return node_; }

private:
    std::shared_ptr<detail::VarNode> node_;
};

/// Reverse-mode tape. Append-only: the record order is the forward execution
/// order, and backward() replays the records exactly once in reverse. Nodes
/// capture the activations their backward rule needs.
class Graph {
public:
    struct Record {
        const char* op;
        std::function<void()> backward;
    };

    void record(const char* op, std::function<void()> fn) {
        if (recording_) tape_.push_back({op, std::move(fn)});
    }

    std::size_t size() const { return tape_.size(); }
    void clear() { tape_.clear(); }

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, accumulating
    /// into every reachable requires-grad variable. A second call without an
    /// intervening zero-grad accumulates a second full pass.
    void backward(const Variable& loss) {
        if (loss.value().numel() != 1) {
            throw ConfigError("backward requires a scalar loss, got shape " + shape_str(loss.value().shape()));
        }
        loss.node()->grad[0] = 1.0;
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) it->backward();
    }

private:
    std::vector<Record> tape_;
    bool recording_ = true;
};

namespace detail {

inline Variable result_of(const Tensor& value, bool requires_grad) {
    return Variable::leaf(value, requires_grad);
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

inline Variable add(Graph& g, const Variable& a, const Variable& b) {
    detail::check_same_shape(a.value(), b.value(), "add");
    Tensor y = a.value();
    for (Index i = 0; i < y.numel(); ++i) y[i] += b.value()[i];
    Variable out = Variable::leaf(std::move(y), a.requires_grad() || b.requires_grad());
    if (out.requires_grad()) {
        g.record("add", [an = a.node(), bn = b.node(), on = out.node()] {
            const Tensor& go = on->grad;
            if (an->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) an->grad[i] += go[i];
            if (bn->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) bn->grad[i] += go[i];
        });
    }
    return out;
}

inline Variable mul(Graph& g, const Variable& a, const Variable& b) {
    detail::check_same_shape(a.value(), b.value(), "mul");
    Tensor y = a.value();
    for (Index i = 0; i < y.numel(); ++i) y[i] *= b.value()[i];
    Variable out = Variable::leaf(std::move(y), a.requires_grad() || b.requires_grad());
    if (out.requires_grad()) {
        g.record("mul", [an = a.node(), bn = b.node(), on = out.node()] {
            const Tensor& go = on->grad;
            if (an->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) an->grad[i] += go[i] * bn->value[i];
            if (bn->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) bn->grad[i] += go[i] * an->value[i];
        });
    }
    return out;
}

/// y = scale * x + shift with compile-time constants (not learnable).
inline Variable affine_const(Graph& g, const Variable& x, double scale, double shift) {
    Tensor y = x.value();
    for (Index i = 0; i < y.numel(); ++i) y[i] = scale * y[i] + shift;
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("affine_const", [xn = x.node(), on = out.node(), scale] {
            for (Index i = 0; i < on->grad.numel(); ++i) xn->grad[i] += scale * on->grad[i];
        });
    }
    return out;
}

/// Broadcast-multiply by a one-element variable (e.g. a learnable gate).
inline Variable mul_scalar(Graph& g, const Variable& x, const Variable& s) {
    if (s.value().numel() != 1) {
        throw ConfigError("mul_scalar: scalar operand has shape " + shape_str(s.value().shape()));
    }
    const double sv = s.value()[0];
    Tensor y = x.value();
    for (Index i = 0; i < y.numel(); ++i) y[i] *= sv;
    Variable out = Variable::leaf(std::move(y), x.requires_grad() || s.requires_grad());
    if (out.requires_grad()) {
        g.record("mul_scalar", [xn = x.node(), sn = s.node(), on = out.node(), sv] {
            const Tensor& go = on->grad;
            if (xn->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) xn->grad[i] += go[i] * sv;
            if (sn->requires_grad) {
                double acc = 0.0;
                for (Index i = 0; i < go.numel(); ++i) acc += go[i] * xn->value[i];
                sn->grad[0] += acc;
            }
        });
    }
    return out;
}

/// Adds a per-channel bias over axis 1 (rank >= 2); for rank-2 inputs this is
/// the usual row-vector bias of a dense layer.
inline Variable add_channel_bias(Graph& g, const Variable& x, const Variable& b) {
    if (x.value().rank() < 2) throw ConfigError("add_channel_bias: input rank must be >= 2");
    const Index channels = x.value().dim(1);
    if (b.value().numel() != channels) {
        throw ConfigError("add_channel_bias: bias " + shape_str(b.value().shape()) +
                          " does not match channel count " + std::to_string(channels));
    }
    const Index batch = x.value().dim(0);
    const Index inner = x.value().numel() / (batch * channels);
    Tensor y = x.value();
    for (Index n = 0; n < batch; ++n)
        for (Index c = 0; c < channels; ++c) {
            const double bv = b.value()[c];
            double* row = y.data() + (n * channels + c) * inner;
            for (Index i = 0; i < inner; ++i) row[i] += bv;
        }
    Variable out = Variable::leaf(std::move(y), x.requires_grad() || b.requires_grad());
    if (out.requires_grad()) {
        g.record("add_channel_bias", [xn = x.node(), bn = b.node(), on = out.node(), batch, channels, inner] {
            const Tensor& go = on->grad;
            if (xn->requires_grad)
                for (Index i = 0; i < go.numel(); ++i) xn->grad[i] += go[i];
            if (bn->requires_grad)
                for (Index n = 0; n < batch; ++n)
                    for (Index c = 0; c < channels; ++c) {
                        const double* row = go.data() + (n * channels + c) * inner;
                        double acc = 0.0;
                        for (Index i = 0; i < inner; ++i) acc += row[i];
                        bn->grad[c] += acc;
                    }
        });
    }
    return out;
}

inline Variable sigmoid(Graph& g, const Variable& x) {
    Tensor y = x.value();
    for (Index i = 0; i < y.numel(); ++i) {
        const double v = y[i];
        if (v >= 0.0) {
            y[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            y[i] = e / (1.0 + e);
        }
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("sigmoid", [xn = x.node(), on = out.node()] {
            for (Index i = 0; i < on->grad.numel(); ++i) {
                const double yv = on->value[i];
                xn->grad[i] += on->grad[i] * yv * (1.0 - yv);
            }
        });
    }
    return out;
}

/// ELU with alpha = 1.
inline Variable elu(Graph& g, const Variable& x) {
    Tensor y = x.value();
    for (Index i = 0; i < y.numel(); ++i) {
        if (y[i] <= 0.0) y[i] = std::expm1(y[i]);
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("elu", [xn = x.node(), on = out.node()] {
            for (Index i = 0; i < on->grad.numel(); ++i) {
                const double yv = on->value[i];
                xn->grad[i] += on->grad[i] * (yv > 0.0 ? 1.0 : yv + 1.0);
            }
        });
    }
    return out;
}

inline Variable flip_last_axis(Graph& g, const Variable& x) {
    const Index w = x.value().rank() == 0 ? 1 : x.value().dim(x.value().rank() - 1);
    const Index rows = x.value().numel() / w;
    Tensor y(x.value().shape());
    for (Index r = 0; r < rows; ++r) {
        const double* src = x.value().data() + r * w;
        double* dst = y.data() + r * w;
        for (Index i = 0; i < w; ++i) dst[i] = src[w - 1 - i];
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("flip_last_axis", [xn = x.node(), on = out.node(), rows, w] {
            for (Index r = 0; r < rows; ++r) {
                const double* go = on->grad.data() + r * w;
                double* gx = xn->grad.data() + r * w;
                for (Index i = 0; i < w; ++i) gx[w - 1 - i] += go[i];
            }
        });
    }
    return out;
}

/// Concatenate along axis 1. All other dimensions must agree.
inline Variable concat_channels(Graph& g, const std::vector<Variable>& parts) {
    if (parts.empty()) throw ConfigError("concat_channels: no operands");
    const Shape& ref = parts[0].value().shape();
    if (ref.size() < 2) throw ConfigError("concat_channels: rank must be >= 2");
    Index total_c = 0;
    bool rg = false;
    for (const Variable& p : parts) {
        const Shape& s = p.value().shape();
        if (s.size() != ref.size()) {
            throw ConfigError("concat_channels: rank mismatch " + shape_str(s) + " vs " + shape_str(ref));
        }
        for (std::size_t a = 0; a < s.size(); ++a) {
            if (a != 1 && s[a] != ref[a]) {
                throw ConfigError("concat_channels: mismatched non-channel dims " + shape_str(s) +
                                  " vs " + shape_str(ref));
            }
        }
        total_c += s[1];
        rg = rg || p.requires_grad();
    }
    Shape out_shape = ref;
    out_shape[1] = total_c;
    const Index batch = ref[0];
    Index inner = 1;
    for (std::size_t a = 2; a < ref.size(); ++a) inner *= ref[a];

    Tensor y(out_shape);
    Index c_off = 0;
    for (const Variable& p : parts) {
        const Index pc = p.value().dim(1);
        for (Index n = 0; n < batch; ++n) {
            const double* src = p.value().data() + n * pc * inner;
            double* dst = y.data() + (n * total_c + c_off) * inner;
            std::copy(src, src + pc * inner, dst);
        }
        c_off += pc;
    }
    Variable out = Variable::leaf(std::move(y), rg);
    if (out.requires_grad()) {
        std::vector<std::shared_ptr<detail::VarNode>> nodes;
        nodes.reserve(parts.size());
        for (const Variable& p : parts) nodes.push_back(p.node());
        g.record("concat_channels", [nodes, on = out.node(), batch, total_c, inner] {
            Index off = 0;
            for (const auto& pn : nodes) {
                const Index pc = pn->value.shape()[1];
                if (pn->requires_grad) {
                    for (Index n = 0; n < batch; ++n) {
                        const double* src = on->grad.data() + (n * total_c + off) * inner;
                        double* dst = pn->grad.data() + n * pc * inner;
                        for (Index i = 0; i < pc * inner; ++i) dst[i] += src[i];
                    }
                }
                off += pc;
            }
        });
    }
    return out;
}

/// Slice `count` channels starting at `first` along axis 1.
inline Variable slice_channels(Graph& g, const Variable& x, Index first, Index count) {
    const Shape& s = x.value().shape();
    if (s.size() < 2) throw ConfigError("slice_channels: rank must be >= 2");
    const Index channels = s[1];
    if (first < 0 || count <= 0 || first + count > channels) {
        throw ConfigError("slice_channels: range [" + std::to_string(first) + "," +
                          std::to_string(first + count) + ") out of " + std::to_string(channels));
    }
    Shape out_shape = s;
    out_shape[1] = count;
    const Index batch = s[0];
    Index inner = 1;
    for (std::size_t a = 2; a < s.size(); ++a) inner *= s[a];
    Tensor y(out_shape);
    for (Index n = 0; n < batch; ++n) {
        const double* src = x.value().data() + (n * channels + first) * inner;
        std::copy(src, src + count * inner, y.data() + n * count * inner);
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("slice_channels", [xn = x.node(), on = out.node(), batch, channels, first, count, inner] {
            for (Index n = 0; n < batch; ++n) {
                const double* src = on->grad.data() + n * count * inner;
                double* dst = xn->grad.data() + (n * channels + first) * inner;
                for (Index i = 0; i < count * inner; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

/// Non-overlapping mean pooling over the last axis; remainder samples are
/// discarded (floor semantics).
inline Variable avg_pool_last_axis(Graph& g, const Variable& x, Index pool) {
    if (pool < 1) throw ConfigError("avg_pool_last_axis: pooling factor < 1");
    const Shape& s = x.value().shape();
    if (s.empty()) throw ConfigError("avg_pool_last_axis: scalar input");
    const Index w = s.back();
    const Index wo = w / pool;
    if (wo < 1) {
        throw ConfigError("avg_pool_last_axis: pooling factor " + std::to_string(pool) +
                          " exceeds axis length " + std::to_string(w));
    }
    Shape out_shape = s;
    out_shape.back() = wo;
    const Index rows = x.value().numel() / w;
    Tensor y(out_shape);
    const double inv = 1.0 / static_cast<double>(pool);
    for (Index r = 0; r < rows; ++r) {
        const double* src = x.value().data() + r * w;
        double* dst = y.data() + r * wo;
        for (Index o = 0; o < wo; ++o) {
            double acc = 0.0;
            for (Index k = 0; k < pool; ++k) acc += src[o * pool + k];
            dst[o] = acc * inv;
        }
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("avg_pool_last_axis", [xn = x.node(), on = out.node(), rows, w, wo, pool, inv] {
            for (Index r = 0; r < rows; ++r) {
                const double* go = on->grad.data() + r * wo;
                double* gx = xn->grad.data() + r * w;
                for (Index o = 0; o < wo; ++o) {
                    const double gv = go[o] * inv;
                    for (Index k = 0; k < pool; ++k) gx[o * pool + k] += gv;
                }
            }
        });
    }
    return out;
}

inline Variable softmax_last_axis(Graph& g, const Variable& x) {
    const Shape& s = x.value().shape();
    if (s.empty()) throw ConfigError("softmax_last_axis: scalar input");
    const Index w = s.back();
    const Index rows = x.value().numel() / w;
    Tensor y(s);
    for (Index r = 0; r < rows; ++r) {
        const double* src = x.value().data() + r * w;
        double* dst = y.data() + r * w;
        double m = src[0];
        for (Index i = 1; i < w; ++i) m = std::max(m, src[i]);
        double z = 0.0;
        for (Index i = 0; i < w; ++i) {
            dst[i] = std::exp(src[i] - m);
            z += dst[i];
        }
        const double inv = 1.0 / z;
        for (Index i = 0; i < w; ++i) dst[i] *= inv;
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("softmax_last_axis", [xn = x.node(), on = out.node(), rows, w] {
            for (Index r = 0; r < rows; ++r) {
                const double* yv = on->value.data() + r * w;
                const double* go = on->grad.data() + r * w;
                double* gx = xn->grad.data() + r * w;
                double dot = 0.0;
                for (Index i = 0; i < w; ++i) dot += go[i] * yv[i];
                for (Index i = 0; i < w; ++i) gx[i] += yv[i] * (go[i] - dot);
            }
        });
    }
    return out;
}

/// Inverted dropout: train mode zeroes each element with probability `rate`
/// and scales survivors by 1/(1-rate); eval mode is the identity.
inline Variable dropout(Graph& g, const Variable& x, double rate, Mode mode, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (mode == Mode::Eval || rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask(x.value().shape());
    Tensor y(x.value().shape());
    for (Index i = 0; i < y.numel(); ++i) {
        const double m = rng.uniform() < rate ? 0.0 : keep_scale;
        mask[i] = m;
        y[i] = x.value()[i] * m;
    }
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("dropout", [xn = x.node(), on = out.node(), mask = std::move(mask)] {
            for (Index i = 0; i < on->grad.numel(); ++i) xn->grad[i] += on->grad[i] * mask[i];
        });
    }
    return out;
}

inline Variable sum_all(Graph& g, const Variable& x) {
    double acc = 0.0;
    for (Index i = 0; i < x.value().numel(); ++i) acc += x.value()[i];
    Variable out = Variable::leaf(Tensor::scalar(acc), x.requires_grad());
    if (out.requires_grad()) {
        g.record("sum_all", [xn = x.node(), on = out.node()] {
            const double go = on->grad[0];
            for (Index i = 0; i < xn->grad.numel(); ++i) xn->grad[i] += go;
        });
    }
    return out;
}

inline Variable reshape(Graph& g, const Variable& x, Shape new_shape) {
    Tensor y = x.value().reshaped(std::move(new_shape));
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("reshape", [xn = x.node(), on = out.node()] {
            for (Index i = 0; i < on->grad.numel(); ++i) xn->grad[i] += on->grad[i];
        });
    }
    return out;
}

/// Last-moment extraction: [B,C,1,T] -> [B,C] taking the final time step.
inline Variable last_timestep(Graph& g, const Variable& x) {
    const Shape& s = x.value().shape();
    if (s.size() != 4 || s[2] != 1) {
        throw ConfigError("last_timestep: expected [B,C,1,T], got " + shape_str(s));
    }
    const Index batch = s[0], channels = s[1], w = s[3];
    Tensor y(Shape{batch, channels});
    for (Index n = 0; n < batch; ++n)
        for (Index c = 0; c < channels; ++c) y[n * channels + c] = x.value()[(n * channels + c) * w + w - 1];
    Variable out = Variable::leaf(std::move(y), x.requires_grad());
    if (out.requires_grad()) {
        g.record("last_timestep", [xn = x.node(), on = out.node(), batch, channels, w] {
            for (Index n = 0; n < batch; ++n)
                for (Index c = 0; c < channels; ++c)
                    xn->grad[(n * channels + c) * w + w - 1] += on->grad[n * channels + c];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Per-channel running statistics (buffers, not learnable).
struct RunningStats {
    Tensor mean;
    Tensor var;

    static RunningStats make(Index channels) {
        RunningStats rs;
        rs.mean = Tensor::zeros({channels});
        rs.var = Tensor::ones({channels});
        return rs;
    }
};

/// Batch normalization over (batch, spatial) per channel (axis 1).
/// Train mode normalizes with batch statistics and updates the running
/// buffers; eval mode normalizes with the running buffers.
inline Variable batch_norm(Graph& g, const Variable& x, const Variable& gamma, const Variable& beta,
                           RunningStats& stats, Mode mode, double eps = 1e-5, double momentum = 0.1) {
    const Shape& s = x.value().shape();
    if (s.size() < 2) throw ConfigError("batch_norm: rank must be >= 2");
    const Index batch = s[0], channels = s[1];
    if (gamma.value().numel() != channels || beta.value().numel() != channels ||
        stats.mean.numel() != channels) {
        throw ConfigError("batch_norm: parameter size does not match " + std::to_string(channels) +
                          " channels");
    }
    Index inner = 1;
    for (std::size_t a = 2; a < s.size(); ++a) inner *= s[a];
    const Index n = batch * inner;

    Tensor mean({channels});
    Tensor invstd({channels});
    if (mode == Mode::Train) {
        for (Index c = 0; c < channels; ++c) {
            double m = 0.0;
            for (Index b = 0; b < batch; ++b) {
                const double* row = x.value().data() + (b * channels + c) * inner;
                for (Index i = 0; i < inner; ++i) m += row[i];
            }
            m /= static_cast<double>(n);
            double v = 0.0;
            for (Index b = 0; b < batch; ++b) {
                const double* row = x.value().data() + (b * channels + c) * inner;
                for (Index i = 0; i < inner; ++i) {
                    const double d = row[i] - m;
                    v += d * d;
                }
            }
            v /= static_cast<double>(n);
            mean[c] = m;
            invstd[c] = 1.0 / std::sqrt(v + eps);
            const double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
            stats.mean[c] = (1.0 - momentum) * stats.mean[c] + momentum * m;
            stats.var[c] = (1.0 - momentum) * stats.var[c] + momentum * unbiased;
        }
    } else {
        for (Index c = 0; c < channels; ++c) {
            mean[c] = stats.mean[c];
            invstd[c] = 1.0 / std::sqrt(stats.var[c] + eps);
        }
    }

    Tensor xhat(s);
    Tensor y(s);
    for (Index b = 0; b < batch; ++b)
        for (Index c = 0; c < channels; ++c) {
            const double m = mean[c], is = invstd[c];
            const double gv = gamma.value()[c], bv = beta.value()[c];
            const double* row = x.value().data() + (b * channels + c) * inner;
            double* xh = xhat.data() + (b * channels + c) * inner;
            double* yr = y.data() + (b * channels + c) * inner;
            for (Index i = 0; i < inner; ++i) {
                xh[i] = (row[i] - m) * is;
                yr[i] = gv * xh[i] + bv;
            }
        }

    Variable out = Variable::leaf(std::move(y),
                                  x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
    if (out.requires_grad()) {
        const bool train = mode == Mode::Train;
        g.record("batch_norm",
                 [xn = x.node(), gn = gamma.node(), bn = beta.node(), on = out.node(),
                  xhat = std::move(xhat), invstd = std::move(invstd), batch, channels, inner, n, train] {
            for (Index c = 0; c < channels; ++c) {
                double sum_go = 0.0, sum_go_xhat = 0.0;
                for (Index b = 0; b < batch; ++b) {
                    const double* go = on->grad.data() + (b * channels + c) * inner;
                    const double* xh = xhat.data() + (b * channels + c) * inner;
                    for (Index i = 0; i < inner; ++i) {
                        sum_go += go[i];
                        sum_go_xhat += go[i] * xh[i];
                    }
                }
                if (bn->requires_grad) bn->grad[c] += sum_go;
                if (gn->requires_grad) gn->grad[c] += sum_go_xhat;
                if (xn->requires_grad) {
                    const double gv = gn->value[c], is = invstd[c];
                    if (train) {
                        const double inv_n = 1.0 / static_cast<double>(n);
                        for (Index b = 0; b < batch; ++b) {
                            const double* go = on->grad.data() + (b * channels + c) * inner;
                            const double* xh = xhat.data() + (b * channels + c) * inner;
                            double* gx = xn->grad.data() + (b * channels + c) * inner;
                            for (Index i = 0; i < inner; ++i) {
                                gx[i] += gv * is * (go[i] - inv_n * (sum_go + xh[i] * sum_go_xhat));
                            }
                        }
                    } else {
                        for (Index b = 0; b < batch; ++b) {
                            const double* go = on->grad.data() + (b * channels + c) * inner;
                            double* gx = xn->grad.data() + (b * channels + c) * inner;
                            for (Index i = 0; i < inner; ++i) gx[i] += gv * is * go[i];
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul and conv2d
// ---------------------------------------------------------------------------

inline Variable matmul(Graph& g, const Variable& a, const Variable& b) {
    const Shape& sa = a.value().shape();
    const Shape& sb = b.value().shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
        throw ConfigError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
    }
    const Index m = sa[0], k = sa[1], n = sb[1];
    Tensor y(Shape{m, n});
    for (Index i = 0; i < m; ++i) {
        const double* arow = a.value().data() + i * k;
        double* yrow = y.data() + i * n;
        for (Index p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b.value().data() + p * n;
            for (Index j = 0; j < n; ++j) yrow[j] += av * brow[j];
        }
    }
    Variable out = Variable::leaf(std::move(y), a.requires_grad() || b.requires_grad());
    if (out.requires_grad()) {
        g.record("matmul", [an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
            if (an->requires_grad) {
                // dA = dC * B^T
                for (Index i = 0; i < m; ++i) {
                    const double* go = on->grad.data() + i * n;
                    double* ga = an->grad.data() + i * k;
                    for (Index p = 0; p < k; ++p) {
                        const double* brow = bn->value.data() + p * n;
                        double acc = 0.0;
                        for (Index j = 0; j < n; ++j) acc += go[j] * brow[j];
                        ga[p] += acc;
                    }
                }
            }
            if (bn->requires_grad) {
                // dB = A^T * dC
                for (Index i = 0; i < m; ++i) {
                    const double* arow = an->value.data() + i * k;
                    const double* go = on->grad.data() + i * n;
                    for (Index p = 0; p < k; ++p) {
                        const double av = arow[p];
                        double* gb = bn->grad.data() + p * n;
                        for (Index j = 0; j < n; ++j) gb[j] += av * go[j];
                    }
                }
            }
        });
    }
    return out;
}

struct Dilation {
    Index h = 1;
    Index w = 1;
};

/// Zero-padding policy for conv2d.
///   none:        no padding.
///   symmetric:   p_h rows on top and bottom, p_w columns left and right.
///   causal_left: p_w columns on the leading edge of the last axis only.
///   same_width:  pads the last axis by the effective kernel extent minus one
///                (floor/ceil split) so output width equals input width.
struct Padding {
    enum class Kind { None, Symmetric, CausalLeft, SameWidth };
    Kind kind = Kind::None;
    Index h = 0;
    Index w = 0;

    static Padding none() { return {Kind::None, 0, 0}; }
    static Padding symmetric(Index ph, Index pw) { return {Kind::Symmetric, ph, pw}; }
    static Padding causal_left(Index pw) { return {Kind::CausalLeft, 0, pw}; }
    static Padding same_width() { return {Kind::SameWidth, 0, 0}; }
};

/// Grouped dilated 2-D convolution, cross-correlation semantics (no kernel
/// flip), stride 1. Weight layout [Cout, Cin/groups, kH, kW].
inline Variable conv2d(Graph& g, const Variable& input, const Variable& weight, Index groups,
                       Dilation dilation = {}, Padding padding = Padding::none()) {
    const Shape& si = input.value().shape();
    const Shape& sw = weight.value().shape();
    if (si.size() != 4 || sw.size() != 4) {
        throw ConfigError("conv2d: expected 4-D input and weight, got " + shape_str(si) + " and " +
                          shape_str(sw));
    }
    if (dilation.h < 1 || dilation.w < 1) throw ConfigError("conv2d: dilation components must be >= 1");
    if (groups < 1) throw ConfigError("conv2d: groups must be >= 1");
    const Index batch = si[0], cin = si[1], height = si[2], width = si[3];
    const Index cout = sw[0], kh = sw[2], kw = sw[3];
    if (cin % groups != 0 || cout % groups != 0 || sw[1] != cin / groups) {
        throw ConfigError("conv2d: channel grouping mismatch, input " + shape_str(si) + " weight " +
                          shape_str(sw) + " groups " + std::to_string(groups));
    }
    Index pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
    switch (padding.kind) {
        case Padding::Kind::None: break;
        case Padding::Kind::Symmetric:
            pad_top = pad_bottom = padding.h;
            pad_left = pad_right = padding.w;
            break;
        case Padding::Kind::CausalLeft:
            pad_left = padding.w;
            break;
        case Padding::Kind::SameWidth: {
            const Index extent = dilation.w * (kw - 1);
            pad_left = extent / 2;
            pad_right = extent - pad_left;
            break;
        }
    }
    const Index out_h = height + pad_top + pad_bottom - dilation.h * (kh - 1);
    const Index out_w = width + pad_left + pad_right - dilation.w * (kw - 1);
    if (out_h < 1 || out_w < 1) {
        throw ConfigError("conv2d: kernel " + shape_str(sw) + " does not fit input " + shape_str(si));
    }
    const Index icpg = cin / groups, ocpg = cout / groups;

    Tensor y(Shape{batch, cout, out_h, out_w});
    for (Index b = 0; b < batch; ++b)
        for (Index oc = 0; oc < cout; ++oc) {
            const Index grp = oc / ocpg;
            double* out_plane = y.data() + (b * cout + oc) * out_h * out_w;
            for (Index ic = 0; ic < icpg; ++ic) {
                const double* in_plane =
                    input.value().data() + (b * cin + grp * icpg + ic) * height * width;
                const double* w_plane = weight.value().data() + (oc * icpg + ic) * kh * kw;
                for (Index r = 0; r < kh; ++r)
                    for (Index q = 0; q < kw; ++q) {
                        const double wv = w_plane[r * kw + q];
                        const Index shift = q * dilation.w - pad_left;
                        const Index ow_lo = std::max<Index>(0, -shift);
                        const Index ow_hi = std::min<Index>(out_w, width - shift);
                        for (Index oh = 0; oh < out_h; ++oh) {
                            const Index ih = oh + r * dilation.h - pad_top;
                            if (ih < 0 || ih >= height) continue;
                            const double* in_row = in_plane + ih * width + shift;
                            double* out_row = out_plane + oh * out_w;
                            for (Index ow = ow_lo; ow < ow_hi; ++ow) out_row[ow] += wv * in_row[ow];
                        }
                    }
            }
        }

    Variable out = Variable::leaf(std::move(y), input.requires_grad() || weight.requires_grad());
    if (out.requires_grad()) {
        g.record("conv2d", [in = input.node(), wn = weight.node(), on = out.node(), batch, cin, cout,
                            height, width, kh, kw, out_h, out_w, icpg, ocpg, dilation, pad_top,
                            pad_left] {
            const bool need_din = in->requires_grad;
            const bool need_dw = wn->requires_grad;
            for (Index b = 0; b < batch; ++b)
                for (Index oc = 0; oc < cout; ++oc) {
                    const Index grp = oc / ocpg;
                    const double* go_plane = on->grad.data() + (b * cout + oc) * out_h * out_w;
                    for (Index ic = 0; ic < icpg; ++ic) {
                        const Index in_c = grp * icpg + ic;
                        const double* in_plane = in->value.data() + (b * cin + in_c) * height * width;
                        double* din_plane = need_din ? in->grad.data() + (b * cin + in_c) * height * width
                                                     : nullptr;
                        const double* w_plane = wn->value.data() + (oc * icpg + ic) * kh * kw;
                        double* dw_plane = need_dw ? wn->grad.data() + (oc * icpg + ic) * kh * kw
                                                   : nullptr;
                        for (Index r = 0; r < kh; ++r)
                            for (Index q = 0; q < kw; ++q) {
                                const double wv = w_plane[r * kw + q];
                                const Index shift = q * dilation.w - pad_left;
                                const Index ow_lo = std::max<Index>(0, -shift);
                                const Index ow_hi = std::min<Index>(out_w, width - shift);
                                double dw_acc = 0.0;
                                for (Index oh = 0; oh < out_h; ++oh) {
                                    const Index ih = oh + r * dilation.h - pad_top;
                                    if (ih < 0 || ih >= height) continue;
                                    const double* go_row = go_plane + oh * out_w;
                                    const double* in_row = in_plane + ih * width + shift;
                                    if (need_din) {
                                        double* din_row = din_plane + ih * width + shift;
                                        for (Index ow = ow_lo; ow < ow_hi; ++ow) {
                                            dw_acc += go_row[ow] * in_row[ow];
                                            din_row[ow] += wv * go_row[ow];
                                        }
                                    } else {
                                        for (Index ow = ow_lo; ow < ow_hi; ++ow)
                                            dw_acc += go_row[ow] * in_row[ow];
                                    }
                                }
                                if (need_dw) dw_plane[r * kw + q] += dw_acc;
                            }
                    }
                }
        });
    }
    return out;
}

} // namespace bite
