#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "bite/autograd.hpp"

namespace bite {

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = true;
};

namespace detail {

// Denominator floor 1e-4: coordinates whose true gradient is (near-)zero —
// which deep compositions produce exactly, e.g. a bias annihilated by a
// downstream mean subtraction — are then judged absolutely at tol * 1e-4,
// far above central-difference roundoff but below any genuinely missing term.
inline double rel_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

template <typename F>
double scalar_eval(F&& f, const Variable& x) {
    Graph g;
    g.set_recording(false);
    Variable loss = f(g, x);
    return loss.value()[0];
}

} // namespace detail

/// Central-difference gradient check of a deterministic scalar function
/// against the reverse-mode gradient, element by element. Relative error
/// uses |a-b| / max(|a|, |b|, 1e-4).
template <typename F>
GradCheckReport finite_diff_check(F&& f, Variable& x, double eps = 1e-5, double tol = 1e-4) {
    Graph g;
    x.zero_grad();
    Variable loss = f(g, x);
    if (loss.value().numel() != 1) {
        throw ConfigError("finite_diff_check: f must return a scalar");
    }
    g.backward(loss);
    Tensor analytic = x.grad();

    GradCheckReport report;
    for (Index i = 0; i < x.value().numel(); ++i) {
        const double saved = x.value()[i];
        x.value()[i] = saved + eps;
        const double lp = detail::scalar_eval(f, x);
        x.value()[i] = saved - eps;
        const double lm = detail::scalar_eval(f, x);
        x.value()[i] = saved;
        const double numeric = (lp - lm) / (2.0 * eps);
        report.max_rel_error = std::max(report.max_rel_error, detail::rel_error(analytic[i], numeric));
    }
    report.pass = report.max_rel_error < tol;
    return report;
}

/// Same check across a set of parameters (one reverse pass, 2 forward passes
/// per scalar). `f` must close over the parameters and ignore its Variable
/// argument's identity beyond reading current values.
template <typename F>
GradCheckReport finite_diff_check_params(F&& f, const std::vector<Variable>& params, double eps = 1e-5,
                                         double tol = 1e-4) {
    Graph g;
    for (const Variable& p : params) const_cast<Variable&>(p).zero_grad();
    Variable loss = f(g);
    if (loss.value().numel() != 1) {
        throw ConfigError("finite_diff_check_params: f must return a scalar");
    }
    g.backward(loss);

    GradCheckReport report;
    for (const Variable& p : params) {
        Variable& var = const_cast<Variable&>(p);
        const Tensor analytic = var.grad();
        for (Index i = 0; i < var.value().numel(); ++i) {
            const double saved = var.value()[i];
            var.value()[i] = saved + eps;
            Graph gp;
            gp.set_recording(false);
            const double lp = f(gp).value()[0];
            var.value()[i] = saved - eps;
            Graph gm;
            gm.set_recording(false);
            const double lm = f(gm).value()[0];
            var.value()[i] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            report.max_rel_error =
                std::max(report.max_rel_error, detail::rel_error(analytic[i], numeric));
        }
    }
    report.pass = report.max_rel_error < tol;
    return report;
}

} // namespace bite
