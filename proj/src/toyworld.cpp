#include "mrn/toyworld.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mrn/csv.hpp"

namespace mrn {

ToyWorld::ToyWorld(double eta, int grid_n) : eta_(eta), grid_n_(grid_n) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("ToyWorld: eta must lie in (0, 1]");
  if (grid_n < 2) throw std::invalid_argument("ToyWorld: grid_n must be >= 2");
  step_ = 1.0 / (grid_n - 1);
  white_.resize(static_cast<std::size_t>(node_count()));
  for (int v = 0; v < node_count(); ++v) {
    const Eigen::Vector2d p = position(v);
    const double border = std::min({p.x(), 1.0 - p.x(), p.y(), 1.0 - p.y()});
    white_[static_cast<std::size_t>(v)] = border < eta_ ? 1 : 0;
  }
}

Eigen::Vector2d ToyWorld::position(int node) const {
  return {(node % grid_n_) * step_, (node / grid_n_) * step_};
}

double ToyWorld::white_fraction() const {
  return static_cast<double>(std::count(white_.begin(), white_.end(), 1)) / node_count();
}

int ToyWorld::snap(const Eigen::Vector2d& p) const {
  if (!(p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0)) {
    std::ostringstream os;
    os << "ToyWorld: point (" << p.x() << ", " << p.y() << ") outside the unit square";
    throw std::invalid_argument(os.str());
  }
  const int col = static_cast<int>(std::lround(p.x() / step_));
  const int row = static_cast<int>(std::lround(p.y() / step_));
  return node(col, row);
}

std::vector<PathSteps> ToyWorld::step_counts_from(int source) const {
  if (source < 0 || source >= node_count()) throw std::invalid_argument("ToyWorld: source node out of range");
  const double root2 = std::sqrt(2.0);
  const auto length = [&](PathSteps c) { return c.straight + root2 * c.diagonal; };
  const std::size_t n = static_cast<std::size_t>(node_count());
  std::vector<PathSteps> best(n, PathSteps{-1, -1});
  std::vector<double> dist(n, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[static_cast<std::size_t>(source)] = 0.0;
  best[static_cast<std::size_t>(source)] = PathSteps{0, 0};
  open.emplace(0.0, source);
  while (!open.empty()) {
    const auto [du, u] = open.top();
    open.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    const int ucol = u % grid_n_;
    const int urow = u / grid_n_;
    const bool free_move = is_white(u);
    for (int dr = -1; dr <= 1; ++dr) {
      if (!free_move && dr < 0) continue;  // indigo: never lose height
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int col = ucol + dc;
        const int row = urow + dr;
        if (col < 0 || col >= grid_n_ || row < 0 || row >= grid_n_) continue;
        const auto v = static_cast<std::size_t>(node(col, row));
        PathSteps next = best[static_cast<std::size_t>(u)];
        (dr != 0 && dc != 0 ? next.diagonal : next.straight) += 1;
        const double alt = length(next);
        if (alt < dist[v]) {
          dist[v] = alt;
          best[v] = next;
          open.emplace(alt, static_cast<int>(v));
        }
      }
    }
  }
  return best;
}

double ToyWorld::path_length(PathSteps steps) const {
  if (steps.straight < 0) return kInf;
  return step_ * (steps.straight + std::sqrt(2.0) * steps.diagonal);
}

std::vector<double> ToyWorld::distances_from(int source) const {
  const auto steps = step_counts_from(source);
  std::vector<double> dist(steps.size());
  for (std::size_t v = 0; v < steps.size(); ++v) dist[v] = path_length(steps[v]);
  return dist;
}

double ToyWorld::oracle_distance(const Eigen::Vector2d& x0, const Eigen::Vector2d& xg) const {
  const int a = snap(x0);
  const int b = snap(xg);
  if (a == b) return 0.0;
  return distances_from(a)[static_cast<std::size_t>(b)];
}

DistanceTable ToyWorld::node_distances() const {
  DistanceTable table(node_count());
  for (int u = 0; u < node_count(); ++u) {
    const auto row = distances_from(u);
    for (int v = 0; v < node_count(); ++v) table(u, v) = row[static_cast<std::size_t>(v)];
  }
  return table;
}

namespace {

// Labels pairs with one Dijkstra run per distinct source node.
Eigen::VectorXd label(const ToyWorld& world, const std::vector<int>& from, const std::vector<int>& to) {
  std::vector<std::size_t> order(from.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return from[a] < from[b]; });
  Eigen::VectorXd d(static_cast<Eigen::Index>(from.size()));
  int current = -1;
  std::vector<double> row;
  for (std::size_t i : order) {
    if (from[i] != current) {
      current = from[i];
      row = world.distances_from(current);
    }
    d(static_cast<Eigen::Index>(i)) = row[static_cast<std::size_t>(to[i])];
  }
  return d;
}

ToyPairs build_pairs(const ToyWorld& world, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& xg) {
  std::vector<int> from(static_cast<std::size_t>(x0.rows()));
  std::vector<int> to(from.size());
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    from[static_cast<std::size_t>(i)] = world.snap(x0.row(i).transpose());
    to[static_cast<std::size_t>(i)] = world.snap(xg.row(i).transpose());
  }
  return {x0, xg, label(world, from, to)};
}

std::pair<int, int> node_pair(const ToyWorld& world, const ToyPairs& p, Eigen::Index i) {
  return {world.snap(p.x0.row(i).transpose()), world.snap(p.xg.row(i).transpose())};
}

}  // namespace

ToyDataset make_toy_dataset(const ToyWorld& world, const ToyDatasetOptions& opt) {
  if (opt.n_train <= 0 || opt.n_eval <= 0) throw std::invalid_argument("make_toy_dataset: sizes must be positive");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto draw = [&](Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) << u(rng), u(rng);
  };

  const int n_train = opt.with_reversed ? 2 * opt.n_train : opt.n_train;
  Eigen::MatrixXd t0(n_train, 2), tg(n_train, 2);
  Eigen::MatrixXd base0(opt.n_train, 2), baseg(opt.n_train, 2);
  draw(base0);
  draw(baseg);
  t0.topRows(opt.n_train) = base0;
  tg.topRows(opt.n_train) = baseg;
  if (opt.with_reversed) {
    t0.bottomRows(opt.n_train) = baseg;
    tg.bottomRows(opt.n_train) = base0;
  }

  ToyDataset data;
  data.train = build_pairs(world, t0, tg);
  std::set<std::pair<int, int>> seen;
  for (Eigen::Index i = 0; i < data.train.size(); ++i) seen.insert(node_pair(world, data.train, i));

  Eigen::MatrixXd e0(opt.n_eval, 2), eg(opt.n_eval, 2);
  for (Eigen::Index i = 0; i < opt.n_eval; ++i) {
    do {
      e0.row(i) << u(rng), u(rng);
      eg.row(i) << u(rng), u(rng);
    } while (seen.count({world.snap(e0.row(i).transpose()), world.snap(eg.row(i).transpose())}) != 0);
  }
  data.eval = build_pairs(world, e0, eg);
  if (!data.train.d.allFinite() || !data.eval.d.allFinite()) {
    throw std::runtime_error("make_toy_dataset: oracle returned an unreachable pair");
  }
  return data;
}

bool toy_sets_disjoint(const ToyWorld& world, const ToyDataset& data) {
  std::set<std::pair<int, int>> seen;
  for (Eigen::Index i = 0; i < data.train.size(); ++i) seen.insert(node_pair(world, data.train, i));
  for (Eigen::Index i = 0; i < data.eval.size(); ++i) {
    if (seen.count(node_pair(world, data.eval, i)) != 0) return false;
  }
  return true;
}

CriticConfig toy_critic_config(CriticKind kind, Eigen::Index asym_dim) {
  CriticConfig c;
  c.kind = kind;
  c.mono_hidden = 96;
  c.mono_layers = 3;
  c.bvn_hidden = 64;
  c.bvn_layers = 3;
  c.encoder_hidden = 64;
  c.head_hidden = 64;
  c.embed_dim = 16;
  c.asym_dim = asym_dim;
  return c;
}

template <typename Scalar>
RegressionResult fit_regression(const ToyDataset& data, const RegressionConfig& config) {
  if (config.iterations < 0 || config.eval_every <= 0) throw std::invalid_argument("fit_regression: bad schedule");
  if (!data.train.d.allFinite()) throw std::invalid_argument("fit_regression: training targets must be finite");
  Rng rng(config.seed);
  auto model = Critic<Scalar>::pair(config.critic, 2, 2, rng);
  Adam<Scalar> adam(model.parameters(), {config.lr});

  const Matrix<Scalar> tx0 = data.train.x0.cast<Scalar>();
  const Matrix<Scalar> txg = data.train.xg.cast<Scalar>();
  const Matrix<Scalar> ty = data.train.d.cast<Scalar>();
  const Matrix<Scalar> ex0 = data.eval.x0.cast<Scalar>();
  const Matrix<Scalar> exg = data.eval.xg.cast<Scalar>();

  const auto gen_mse = [&] {
    Tape<Scalar> tape(false);
    const auto q = model.pair_forward(tape, tape.constant(ex0), tape.constant(exg), false);
    return ((-q.value().template cast<double>()) - data.eval.d).squaredNorm() / static_cast<double>(data.eval.size());
  };

  RegressionResult result;
  result.min_train_mse = kInf;
  result.min_gen_mse = kInf;
  Tape<Scalar> tape(false);
  for (int it = 0;; ++it) {
    tape.clear();
    adam.zero_grad();
    const auto q = model.pair_forward(tape, tape.constant(tx0), tape.constant(txg));
    const auto loss = mean(square(q + tape.constant(ty)));  // (-q - d)^2
    const double train = static_cast<double>(loss.item());
    if (!std::isfinite(train)) {
      throw NumericError("fit_regression: non-finite training loss at iteration " + std::to_string(it));
    }
    result.min_train_mse = std::min(result.min_train_mse, train);
    if (it % config.eval_every == 0 || it == config.iterations) {
      const double gen = gen_mse();
      result.curve.push_back({it, train, gen});
      if (gen < result.min_gen_mse) {
        result.min_gen_mse = gen;
        result.min_gen_iteration = it;
      }
    }
    if (it == config.iterations) break;
    tape.backward(loss);
    adam.step();
  }
  return result;
}

template <typename Scalar>
std::vector<KStudyRow> approximation_vs_k(const ToyDataset& data, const std::vector<Eigen::Index>& ks,
                                          const std::vector<std::uint64_t>& seeds, const RegressionConfig& base) {
  if (!std::is_sorted(ks.begin(), ks.end())) throw std::invalid_argument("approximation_vs_k: K values must ascend");
  std::vector<KStudyRow> rows;
  for (Eigen::Index k : ks) {
    if (k < 0) throw std::invalid_argument("approximation_vs_k: K must be >= 0");
    for (std::uint64_t seed : seeds) {
      RegressionConfig cfg = base;
      cfg.seed = seed;
      cfg.critic.kind = k == 0 ? CriticKind::MrnSymOnly : CriticKind::Mrn;
      cfg.critic.asym_dim = k;
      cfg.eval_every = cfg.iterations > 0 ? cfg.iterations : 1;
      rows.push_back({k, seed, fit_regression<Scalar>(data, cfg).min_train_mse});
    }
  }
  return rows;
}

template RegressionResult fit_regression<float>(const ToyDataset&, const RegressionConfig&);
template RegressionResult fit_regression<double>(const ToyDataset&, const RegressionConfig&);
template std::vector<KStudyRow> approximation_vs_k<float>(const ToyDataset&, const std::vector<Eigen::Index>&,
                                                          const std::vector<std::uint64_t>&, const RegressionConfig&);
template std::vector<KStudyRow> approximation_vs_k<double>(const ToyDataset&, const std::vector<Eigen::Index>&,
                                                           const std::vector<std::uint64_t>&, const RegressionConfig&);

std::string toy_csv_header() { return "arch,eta,K,seed,iteration,train_mse,gen_mse\n"; }

std::string toy_csv_rows(const std::string& arch, double eta, Eigen::Index k, std::uint64_t seed,
                         const RegressionResult& result) {
  std::ostringstream os;
  for (const auto& p : result.curve) {
    os << csv_row({arch, format_double(eta), std::to_string(k), std::to_string(seed), std::to_string(p.iteration),
                   format_double(p.train_mse), format_double(p.gen_mse)});
  }
  return os.str();
}

}  // namespace mrn
