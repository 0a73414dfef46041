#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "bite/errors.hpp"

namespace bite {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense n-dimensional array of 64-bit reals, row-major. The shape is fixed
/// at construction; operations produce new tensors. Rank 0 is a scalar with
/// one element.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(check_shape(shape_))) {}

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (check_shape(shape_) != static_cast<Index>(data_.size())) {
            throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                              " does not match shape " + shape_str(shape_));
        }
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }

    static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

    static Tensor identity(Index n) {
        Tensor t(Shape{n, n});
        for (Index i = 0; i < n; ++i) t.data_[static_cast<std::size_t>(i * n + i)] = 1.0;
        return t;
    }

    const Shape& shape() const { return shape_; }
    Index rank() const { return static_cast<Index>(shape_.size()); }
    Index dim(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
    Index numel() const { return static_cast<Index>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

    double& at(std::initializer_list<Index> idx) { return data_[static_cast<std::size_t>(offset(idx))]; }
    double at(std::initializer_list<Index> idx) const { return data_[static_cast<std::size_t>(offset(idx))]; }

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(Shape new_shape) const {
        if (shape_numel(new_shape) != numel()) {
            throw ConfigError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
        }
        return Tensor(std::move(new_shape), data_);
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Index offset(std::initializer_list<Index> idx) const {
        Index off = 0;
        std::size_t axis = 0;
        for (Index i : idx) {
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

private:
    static Index check_shape(const Shape& shape) {
        for (Index d : shape) {
            if (d <= 0) throw ConfigError("tensor shape must be positive, got " + shape_str(shape));
        }
        return shape_numel(shape);
    }

    Shape shape_;
    std::vector<double> data_;
};

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ConfigError("shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    double m = 0.0;
    for (Index i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace bite
