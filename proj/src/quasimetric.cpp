#include "mrn/quasimetric.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mrn/csv.hpp"

namespace mrn {

DistanceTable::DistanceTable(Eigen::MatrixXd values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) throw std::invalid_argument("DistanceTable: matrix must be square");
}

namespace {

void record(AxiomResult& r, double margin, double tol, Eigen::Index i, Eigen::Index j, Eigen::Index k) {
  if (margin > tol) ++r.count;
  if (r.checked == 0 || margin > r.worst_margin) {
    r.worst_margin = margin;
    r.witness = {i, j, k};
  }
  ++r.checked;
}

template <typename Dist>
ViolationReport check_impl(const Dist& d, Eigen::Index n, const AxiomCheckOptions& opt) {
  if (opt.tol < 0.0) throw std::invalid_argument("check_axioms: tol must be >= 0");
  const auto value = [&](Eigen::Index i, Eigen::Index j) {
    const double v = d(i, j);
    if (std::isnan(v) || (opt.require_finite && !std::isfinite(v))) {
      throw std::domain_error("check_axioms: non-finite distance at (" + std::to_string(i) + ", " + std::to_string(j) +
                              ")");
    }
    return v;
  };

  ViolationReport report;
  report.tol = opt.tol;
  for (Eigen::Index i = 0; i < n; ++i) {
    record(report.identity, std::abs(value(i, i)), opt.tol, i, i, -1);
    for (Eigen::Index j = 0; j < n; ++j) record(report.non_negativity, -value(i, j), opt.tol, i, j, -1);
  }

  const auto triangle = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k) {
    const double via = value(i, j) + value(j, k);
    const double direct = value(i, k);
    double margin;
    if (std::isinf(via)) {
      margin = -kInf;
    } else if (std::isinf(direct)) {
      margin = kInf;
    } else {
      margin = direct - via;
    }
    record(report.triangle, margin, opt.tol, i, j, k);
  };

  if (n <= opt.exhaustive_limit) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = 0; k < n; ++k) triangle(i, j, k);
  } else {
    report.exhaustive = false;
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (std::size_t t = 0; t < opt.sampled_triples; ++t) {
      const auto i = pick(rng);
      const auto j = pick(rng);
      const auto k = pick(rng);
      triangle(i, j, k);
    }
  }
  return report;
}

}  // namespace

std::string ViolationReport::to_csv(bool header) const {
  std::ostringstream os;
  if (header) os << "axiom,count,worst_margin,witness_i,witness_j,witness_k\n";
  for (const auto* r : {&non_negativity, &identity, &triangle}) {
    os << r->axiom << ',' << r->count << ',' << format_double(r->worst_margin) << ',' << r->witness[0] << ','
       << r->witness[1] << ',' << r->witness[2] << '\n';
  }
  return os.str();
}

ViolationReport check_axioms(const DistanceTable& d, const AxiomCheckOptions& opt) {
  const auto& m = d.values();
  return check_impl([&m](Eigen::Index i, Eigen::Index j) { return m(i, j); }, d.size(), opt);
}

ViolationReport check_axioms(const std::function<double(Eigen::Index, Eigen::Index)>& d, Eigen::Index n,
                             const AxiomCheckOptions& opt) {
  return check_impl(d, n, opt);
}

DistanceTable LiftedTable::negated() const { return DistanceTable(Eigen::MatrixXd(-values_)); }

LiftedTable lift_qstar(const Eigen::MatrixXd& qstar, LiftRule rule) {
  if (qstar.rows() != qstar.cols()) throw std::invalid_argument("lift_qstar: Q* table must be square");
  const Eigen::Index n = qstar.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(qstar(i, j) <= 0.0)) {
        throw std::invalid_argument("lift_qstar: Q*(" + std::to_string(i) + ", " + std::to_string(j) +
                                    ") = " + std::to_string(qstar(i, j)) + " is not <= 0");
      }
    }
  }
  Eigen::MatrixXd lifted = Eigen::MatrixXd::Constant(2 * n, 2 * n, -kInf);
  for (Eigen::Index a = 0; a < 2 * n; ++a) lifted(a, a) = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a != b) lifted(a, b) = qstar(a, b);
      if (a == b || rule == LiftRule::Closed) lifted(a, b + n) = qstar(a, b);
    }
  }
  return LiftedTable(std::move(lifted));
}

}  // namespace mrn
