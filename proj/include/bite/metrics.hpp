#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bite/errors.hpp"
#include "bite/tensor.hpp"

namespace bite {

/// Square confusion-count matrix; rows index the true label, columns the
/// predicted one.
struct Confusion {
    Index classes = 0;
    std::vector<std::int64_t> counts; // row-major [classes, classes]

    static Confusion zeros(Index k) {
        if (k < 1) throw ConfigError("Confusion: needs at least one class");
        Confusion c;
        c.classes = k;
        c.counts.assign(static_cast<std::size_t>(k * k), 0);
        return c;
    }

    std::int64_t at(Index truth, Index pred) const {
        check(truth, pred);
        return counts[static_cast<std::size_t>(truth * classes + pred)];
    }

    void add(Index truth, Index pred, std::int64_t n = 1) {
        check(truth, pred);
        counts[static_cast<std::size_t>(truth * classes + pred)] += n;
    }

    std::int64_t total() const {
        std::int64_t s = 0;
        for (std::int64_t v : counts) s += v;
        return s;
    }

    std::int64_t diagonal() const {
        std::int64_t s = 0;
        for (Index k = 0; k < classes; ++k) s += counts[static_cast<std::size_t>(k * classes + k)];
        return s;
    }

    Confusion& operator+=(const Confusion& other) {
        if (other.classes != classes) {
            throw ConfigError("Confusion: cannot pool " + std::to_string(other.classes) +
                              "-class counts into " + std::to_string(classes) + "-class counts");
        }
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
        return *this;
    }

private:
    void check(Index truth, Index pred) const {
        if (truth < 0 || truth >= classes || pred < 0 || pred >= classes) {
            throw ConfigError("Confusion: cell (" + std::to_string(truth) + "," +
                              std::to_string(pred) + ") outside " + std::to_string(classes) +
                              "x" + std::to_string(classes));
        }
    }
};

inline double accuracy(const Confusion& c) {
    const std::int64_t n = c.total();
    if (n <= 0) throw DataError("accuracy: empty confusion matrix");
    return static_cast<double>(c.diagonal()) / static_cast<double>(n);
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e) with p_o the observed agreement and
/// p_e the chance agreement from the row/column marginals. Returns 0 when the
/// marginals make chance agreement certain (p_e == 1).
inline double kappa(const Confusion& c) {
    const std::int64_t n = c.total();
    if (n <= 0) throw DataError("kappa: empty confusion matrix");
    const double dn = static_cast<double>(n);
    const double p_o = static_cast<double>(c.diagonal()) / dn;
    double p_e = 0.0;
    for (Index k = 0; k < c.classes; ++k) {
        std::int64_t row = 0, col = 0;
        for (Index j = 0; j < c.classes; ++j) {
            row += c.at(k, j);
            col += c.at(j, k);
        }
        p_e += (static_cast<double>(row) / dn) * (static_cast<double>(col) / dn);
    }
    if (p_e >= 1.0) return 0.0;
    return (p_o - p_e) / (1.0 - p_e);
}

} // namespace bite
