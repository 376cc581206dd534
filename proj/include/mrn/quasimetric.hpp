#pragma once

// Quasipseudometric axiom checks (non-negativity, identity, triangle
// inequality) over finite point sets, and the lift of a goal-conditioned
// optimal value table onto the doubled space Y = X + X^.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>

namespace mrn {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// n x n table of extended non-negative reals (+inf allowed).
class DistanceTable {
 public:
  DistanceTable() = default;
  explicit DistanceTable(Eigen::Index n) : values_(Eigen::MatrixXd::Zero(n, n)) {}
  explicit DistanceTable(Eigen::MatrixXd values);

  Eigen::Index size() const { return values_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
  double& operator()(Eigen::Index i, Eigen::Index j) { return values_(i, j); }
  const Eigen::MatrixXd& values() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

struct AxiomResult {
  std::string axiom;
  std::size_t checked = 0;
  std::size_t count = 0;      // cases with margin > tol
  double worst_margin = 0.0;  // largest violation amount seen (<= 0 means none)
  std::array<Eigen::Index, 3> witness{-1, -1, -1};
};

struct ViolationReport {
  AxiomResult non_negativity{"non_negativity"};
  AxiomResult identity{"identity"};
  AxiomResult triangle{"triangle"};
  double tol = 0.0;
  bool exhaustive = true;

  bool passed() const {
    return non_negativity.count == 0 && identity.count == 0 && triangle.count == 0;
  }
  /// Header plus one row per axiom: axiom,count,worst_margin,witness_i,witness_j,witness_k
  std::string to_csv(bool header = true) const;
};

struct AxiomCheckOptions {
  double tol = 0.0;
  // Triangles are checked over all n^3 ordered triples up to this many
  // points, otherwise over `sampled_triples` random ones.
  Eigen::Index exhaustive_limit = 64;
  std::size_t sampled_triples = 100000;
  std::uint64_t seed = 0;
  // Treat +inf entries as errors (NaN is always an error).
  bool require_finite = false;
};

/// Margins: non-negativity -d(x,y); identity |d(x,x)|; triangle
/// d(x,z) - d(x,y) - d(y,z) with inf + anything = inf on the right side.
ViolationReport check_axioms(const DistanceTable& d, const AxiomCheckOptions& opt = {});

/// Same checks on a callable distance over sample indices 0..n-1.
ViolationReport check_axioms(const std::function<double(Eigen::Index, Eigen::Index)>& d, Eigen::Index n,
                             const AxiomCheckOptions& opt = {});

/// Optimal values lifted onto Y = X + X^, size 2n x 2n. Index i < n is x_i,
/// index n + i is its marked copy x^_i.
class LiftedTable {
 public:
  LiftedTable() = default;
  explicit LiftedTable(Eigen::MatrixXd values) : values_(std::move(values)) {}

  Eigen::Index base_size() const { return values_.rows() / 2; }
  double operator()(Eigen::Index a, Eigen::Index b) const { return values_(a, b); }
  const Eigen::MatrixXd& values() const { return values_; }

  /// e(y) as seen from x: y itself when x != y, otherwise y^.
  Eigen::Index embed(Eigen::Index x, Eigen::Index y) const { return x == y ? y + base_size() : y; }

  /// -Q^ as a distance table (the -inf cells become +inf).
  DistanceTable negated() const;

 private:
  Eigen::MatrixXd values_;
};

/// How cells (a, c^) with a in X and c != a are filled.
enum class LiftRule {
  // Four cases: 0 if a == b; Q*(a, a) if b = a^; Q*(a, b) if a != b in X;
  // -inf otherwise. The negation breaks the triangle inequality on
  // (a, b, b^) whenever a != b, since d(a, b^) = inf.
  Literal,
  // As Literal, but (a, c^) holds Q*(a, c) for every a, c in X. The
  // negation is a quasipseudometric whenever Q* satisfies the triangle
  // inequality, and Q^(x, e(y)) = Q*(x, y) still holds.
  Closed,
};

/// Lifts Q*(x, y), all entries <= 0, onto the doubled space.
LiftedTable lift_qstar(const Eigen::MatrixXd& qstar, LiftRule rule = LiftRule::Closed);

}  // namespace mrn
