#pragma once

// Asymmetric shortest-path toy world on the unit square.
//
// Nodes sit on a grid_n x grid_n lattice over [0,1]^2 with 8-connectivity.
// A node is white when it lies within eta of any border; the interior is
// indigo, where a step may not decrease the height (the y coordinate).
// Step cost is the Euclidean length of the grid step.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mrn/critics.hpp"
#include "mrn/quasimetric.hpp"

namespace mrn {

/// A shortest path as (straight, diagonal) step counts; its length is
/// step * (straight + sqrt(2) * diagonal). Unreachable: {-1, -1}.
struct PathSteps {
  int straight = 0;
  int diagonal = 0;
};

class ToyWorld {
 public:
  ToyWorld(double eta, int grid_n = 64);

  double eta() const { return eta_; }
  int grid_n() const { return grid_n_; }
  int node_count() const { return grid_n_ * grid_n_; }

  int node(int col, int row) const { return row * grid_n_ + col; }
  Eigen::Vector2d position(int node) const;
  bool is_white(int node) const { return white_[static_cast<std::size_t>(node)] != 0; }
  double white_fraction() const;

  /// Nearest grid node; throws std::invalid_argument outside [0,1]^2.
  int snap(const Eigen::Vector2d& p) const;

  /// Dijkstra distances from one node to all nodes (+inf if unreachable).
  /// A path and its reverse get bit-identical lengths.
  std::vector<double> distances_from(int source) const;
  /// The same shortest paths as exact step counts.
  std::vector<PathSteps> step_counts_from(int source) const;
  double path_length(PathSteps steps) const;

  /// d*(x0, xg) between the nodes nearest to the two points.
  double oracle_distance(const Eigen::Vector2d& x0, const Eigen::Vector2d& xg) const;

  /// All-pairs node distances (node_count^2 entries).
  DistanceTable node_distances() const;

 private:
  double eta_;
  int grid_n_;
  double step_;
  std::vector<char> white_;
};

struct ToyPairs {
  Eigen::MatrixXd x0;  // (n, 2)
  Eigen::MatrixXd xg;  // (n, 2)
  Eigen::VectorXd d;   // oracle distances

  Eigen::Index size() const { return x0.rows(); }
};

struct ToyDataset {
  ToyPairs train;
  ToyPairs eval;
};

struct ToyDatasetOptions {
  int n_train = 20;
  int n_eval = 10000;
  std::uint64_t seed = 0;
  // Append the reversed copy (xg, x0) of every training pair, so that a
  // symmetric model cannot fit the training set when d* is asymmetric.
  bool with_reversed = false;
};

/// Uniform pairs in [0,1]^2 labelled by the oracle. Evaluation pairs whose
/// snapped node pair occurs in the training set are redrawn.
ToyDataset make_toy_dataset(const ToyWorld& world, const ToyDatasetOptions& opt = {});

/// True iff no evaluation pair shares its snapped node pair with a training pair.
bool toy_sets_disjoint(const ToyWorld& world, const ToyDataset& data);

struct RegressionConfig {
  CriticConfig critic;
  int iterations = 2000;
  int eval_every = 50;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Network sizes used for the toy regression (smaller than the RL sizing).
CriticConfig toy_critic_config(CriticKind kind, Eigen::Index asym_dim = 16);

struct RegressionPoint {
  int iteration = 0;
  double train_mse = 0.0;
  double gen_mse = 0.0;
};

struct RegressionResult {
  std::vector<RegressionPoint> curve;  // one row per evaluation
  double min_gen_mse = 0.0;
  int min_gen_iteration = 0;
  double min_train_mse = 0.0;  // over every iteration, not only evaluated ones
};

/// Full-batch Adam regression of d_theta(x0, xg) = -Q(x0, xg) onto the
/// training targets. Generalization error is the MSE on the evaluation
/// pairs, measured at iteration 0, every eval_every iterations and at the
/// end. Throws NumericError if the loss becomes non-finite.
template <typename Scalar>
RegressionResult fit_regression(const ToyDataset& data, const RegressionConfig& config);

struct KStudyRow {
  Eigen::Index k = 0;
  std::uint64_t seed = 0;
  double min_train_mse = 0.0;
};

/// Best training MSE per asym width K (K = 0 is the sym-only model) and
/// seed, with a fixed iteration budget taken from `base`.
template <typename Scalar>
std::vector<KStudyRow> approximation_vs_k(const ToyDataset& data, const std::vector<Eigen::Index>& ks,
                                          const std::vector<std::uint64_t>& seeds, const RegressionConfig& base);

/// CSV header and rows: arch,eta,K,seed,iteration,train_mse,gen_mse
std::string toy_csv_header();
std::string toy_csv_rows(const std::string& arch, double eta, Eigen::Index k, std::uint64_t seed,
                         const RegressionResult& result);

}  // namespace mrn
