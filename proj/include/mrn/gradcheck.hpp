#pragma once

// Central finite-difference check of tape gradients, in double precision.

#include "mrn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mrn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_entry;  // "<name>[k]" of the worst coordinate
  bool passed = true;
  bool finite = true;
  std::string nonfinite_entry;
  std::size_t checked = 0;
  // Coordinates where x +/- step switched a relu mask or max argmax; the
  // function is not differentiable across them, so they are not scored.
  std::size_t kinks_skipped = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double abs_floor = 1e-6;
};

using ScalarFunction = std::function<Tensor<double>(Tape<double>&)>;

namespace detail {

inline void validate_step(double step) {
  if (!(step >= 1e-7 && step <= 1e-4)) throw std::invalid_argument("grad_check: step must lie in [1e-7, 1e-4]");
}

struct Probe {
  double value;
  std::vector<std::int64_t> signature;
};

inline Probe probe(const ScalarFunction& f) {
  Tape<double> tape(false);
  const auto out = f(tape);
  return {out.item(), tape.branch_signature()};
}

/// Perturbs every coordinate of every target matrix in place and compares
/// against the analytic gradient supplied for it.
inline void check_coordinates(const ScalarFunction& f, std::vector<Matrix<double>*> targets,
                              const std::vector<const Matrix<double>*>& analytic, const std::vector<std::string>& names,
                              const GradCheckOptions& opt, GradCheckReport& report) {
  const Probe base = probe(f);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Matrix<double>& x = *targets[t];
    for (Index k = 0; k < x.size(); ++k) {
      const double saved = x.data()[k];
      x.data()[k] = saved + opt.step;
      const Probe plus = probe(f);
      x.data()[k] = saved - opt.step;
      const Probe minus = probe(f);
      x.data()[k] = saved;
      const std::string entry = names[t] + "[" + std::to_string(k) + "]";
      const double numeric = (plus.value - minus.value) / (2.0 * opt.step);
      if (!std::isfinite(numeric)) {
        report.finite = false;
        report.passed = false;
        if (report.nonfinite_entry.empty()) report.nonfinite_entry = entry;
        continue;
      }
      if (plus.signature != base.signature || minus.signature != base.signature) {
        ++report.kinks_skipped;
        continue;
      }
      const double a = analytic[t]->data()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_entry.empty()) {
        report.max_rel_error = rel;
        report.worst_entry = entry;
      }
    }
  }
  report.passed = report.passed && report.max_rel_error < opt.tol;
}

}  // namespace detail

/// Gradient of a scalar function of one input matrix.
inline GradCheckReport grad_check(const std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)>& f,
                                  Matrix<double> x, const GradCheckOptions& opt = {}) {
  detail::validate_step(opt.step);
  Matrix<double> analytic;
  {
    Tape<double> tape(true);
    const auto input = tape.variable(x);
    const auto out = f(tape, input);
    tape.backward(out);
    analytic = input.grad();
  }
  const ScalarFunction g = [&](Tape<double>& tape) { return f(tape, tape.constant(x)); };
  GradCheckReport report;
  detail::check_coordinates(g, {&x}, {&analytic}, {"x"}, opt, report);
  return report;
}

/// Gradient of a scalar function with respect to a set of parameters. The
/// parameters' grad fields are overwritten.
inline GradCheckReport grad_check_parameters(const ScalarFunction& f, const std::vector<Parameter<double>*>& params,
                                             const GradCheckOptions& opt = {}) {
  detail::validate_step(opt.step);
  for (auto* p : params) p->zero_grad();
  {
    Tape<double> tape(true);
    const auto out = f(tape);
    tape.backward(out);
  }
  std::vector<Matrix<double>*> targets;
  std::vector<const Matrix<double>*> analytic;
  std::vector<std::string> names;
  std::vector<Matrix<double>> grads;
  grads.reserve(params.size());
  for (auto* p : params) grads.push_back(p->grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    targets.push_back(&params[i]->value);
    analytic.push_back(&grads[i]);
    names.push_back(params[i]->name);
  }
  GradCheckReport report;
  detail::check_coordinates(f, targets, analytic, names, opt, report);
  return report;
}

}  // namespace mrn
