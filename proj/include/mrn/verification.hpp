#pragma once

// Batch checks shared by the command line tool and the acceptance binary.

#include <cstdint>
#include <string>
#include <vector>

#include "mrn/critics.hpp"
#include "mrn/gradcheck.hpp"

namespace mrn {

struct GradientSuiteOptions {
  int trials = 100;
  std::uint64_t seed = 0;
  GradCheckOptions check;
};

struct GradientSuiteRow {
  std::string target;  // critic kind name, or "actor-loss/<kind>"
  int trials = 0;
  int failures = 0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t kinks_skipped = 0;
};

/// Every critic variant's Q and the actor loss against central finite
/// differences, each over `trials` random small parameterizations and
/// random inputs (64-bit).
std::vector<GradientSuiteRow> run_gradient_suite(const GradientSuiteOptions& opt);
std::string gradient_suite_csv(const std::vector<GradientSuiteRow>& rows);

struct TheorySuiteOptions {
  std::uint64_t corpus_seed = 7;
  int mdps = 50;
  int aggregated_mdps = 20;
  int max_states = 6;
  int max_actions = 3;
  double vi_tol = 1e-10;
  double slack = 1e-9;
};

struct TheoryRow {
  int index = 0;
  std::string goals;  // "pairs" (G = S x A) or "aggregated"
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;
  // Goal space S x A only.
  std::size_t triangle_triples = 0;
  std::size_t triangle_violations = 0;
  double triangle_worst = 0.0;
  std::size_t lift_closed_violations = 0;
  std::size_t lift_literal_violations = 0;
  bool embedding_exact = true;
  // Aggregated goals only.
  double sup_discrepancy = 0.0;
  double sup_excess = 0.0;
};

struct TheoryReport {
  std::vector<TheoryRow> rows;
  double slack = 0.0;

  std::size_t triangle_violations() const;
  std::size_t closed_lift_violations() const;
  std::size_t literal_lift_violations() const;
  bool embeddings_exact() const;
  double max_sup_discrepancy() const;
  double max_sup_excess() const;
  /// The checks that hold in general: no triangle violations, the closed
  /// lift is a quasipseudometric, exact embedding, and the one-sided sup
  /// bound. The literal lift and sup equality are reported only.
  bool passed() const;
};

TheoryReport run_theory_suite(const TheorySuiteOptions& opt);
std::string theory_csv(const TheoryReport& report);

}  // namespace mrn
