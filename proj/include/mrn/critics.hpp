#pragma once

// Goal-conditioned critics Q(s, a, g) and the deterministic actor.
//
// Every critic is evaluated as a function of a "left" input and a "right"
// input: monolithic (s|a, g), bilinear (s|a, s|g), metric residual
// (s|a, s|g) and its s|a|g variant. The toy regression task uses the same
// pair form with left = x0 and right = xg.

#include "mrn/autodiff.hpp"
#include "mrn/nn.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrn {

enum class CriticKind { Monolithic, Bvn, Mrn, MrnSymOnly, MrnAsymOnly, MrnSag };

// Mean: mean of squared differences (default). Sum: squared L2 distance.
// Norm: L2 distance, the only one of the three that is a metric.
enum class SymReduction { Mean, Sum, Norm };

inline const char* critic_kind_name(CriticKind kind) {
  switch (kind) {
    case CriticKind::Monolithic: return "monolithic";
    case CriticKind::Bvn: return "bvn";
    case CriticKind::Mrn: return "mrn";
    case CriticKind::MrnSymOnly: return "mrn-sym-only";
    case CriticKind::MrnAsymOnly: return "mrn-asym-only";
    case CriticKind::MrnSag: return "mrn-sag";
  }
  return "unknown";
}

inline CriticKind parse_critic_kind(const std::string& name) {
  for (auto k : {CriticKind::Monolithic, CriticKind::Bvn, CriticKind::Mrn, CriticKind::MrnSymOnly,
                 CriticKind::MrnAsymOnly, CriticKind::MrnSag}) {
    if (name == critic_kind_name(k)) return k;
  }
  throw std::invalid_argument("unknown critic variant '" + name + "'");
}

inline bool is_metric_residual(CriticKind kind) {
  return kind == CriticKind::Mrn || kind == CriticKind::MrnSymOnly || kind == CriticKind::MrnAsymOnly ||
         kind == CriticKind::MrnSag;
}

struct CriticConfig {
  CriticKind kind = CriticKind::Mrn;
  Index mono_hidden = 256;
  Index mono_layers = 3;
  Index bvn_hidden = 176;
  Index bvn_layers = 3;
  Index encoder_hidden = 176;  // e1/e2: [linear-relu] x 2, latent width = encoder_hidden
  Index head_hidden = 176;     // sym/asym: linear-relu-linear
  Index embed_dim = 16;        // output width of sym (and of the bilinear embeddings)
  Index asym_dim = 16;         // K, output width of asym; 0 disables the asymmetric term
  SymReduction sym_reduction = SymReduction::Mean;
};

/// Sizing used for the architecture comparison; the sym-only and asym-only
/// ablations are widened to 300 units.
inline CriticConfig default_sizing(CriticKind kind) {
  CriticConfig c;
  c.kind = kind;
  if (kind == CriticKind::MrnSymOnly || kind == CriticKind::MrnAsymOnly) {
    c.encoder_hidden = 300;
    c.head_hidden = 300;
  }
  return c;
}

/// Distances produced by the metric residual head, each (batch, 1).
template <typename Scalar>
struct ResidualDistance {
  std::optional<Tensor<Scalar>> sym;
  std::optional<Tensor<Scalar>> asym;
  Tensor<Scalar> total;
};

/// d(x, y) = reduce((sym(x) - sym(y))^2) + max_k relu(asym(x) - asym(y))_k
/// with sym and asym shared between both arguments. Either head may be
/// null (an ablation) but not both.
template <typename Scalar>
ResidualDistance<Scalar> metric_residual_distance(Tape<Scalar>& tape, Mlp<Scalar>* sym, Mlp<Scalar>* asym,
                                                  const Tensor<Scalar>& x, const Tensor<Scalar>& y,
                                                  SymReduction reduction, bool track = true) {
  if (sym == nullptr && asym == nullptr) throw std::invalid_argument("metric_residual_distance: no head enabled");
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError("metric_residual_distance: latent shapes " + shape_string(x.rows(), x.cols()) + " vs " +
                     shape_string(y.rows(), y.cols()));
  }
  ResidualDistance<Scalar> out;
  if (sym != nullptr) {
    const auto diff = square(sym->forward(tape, x, track) - sym->forward(tape, y, track));
    switch (reduction) {
      case SymReduction::Mean: out.sym = mean_last(diff); break;
      case SymReduction::Sum: out.sym = sum_last(diff); break;
      case SymReduction::Norm: out.sym = sqrt(sum_last(diff)); break;
    }
  }
  if (asym != nullptr) {
    out.asym = max_last(relu(asym->forward(tape, x, track) - asym->forward(tape, y, track)));
  }
  if (out.sym && out.asym) {
    out.total = *out.sym + *out.asym;
  } else {
    out.total = out.sym ? *out.sym : *out.asym;
  }
  return out;
}

template <typename Scalar>
class Critic {
 public:
  Critic() = default;

  /// Critic over goal-conditioned inputs of the given widths.
  Critic(const CriticConfig& config, Index state_dim, Index action_dim, Index goal_dim, Rng& rng)
      : config_(config), state_dim_(state_dim), action_dim_(action_dim), goal_dim_(goal_dim) {
    if (state_dim <= 0 || action_dim <= 0 || goal_dim <= 0) throw std::invalid_argument("Critic: dims must be positive");
    build(left_width(), right_width(), rng);
  }

  /// Critic over an explicit (left, right) pair with no state/action split.
  static Critic pair(const CriticConfig& config, Index left_dim, Index right_dim, Rng& rng) {
    Critic c;
    c.config_ = config;
    c.pair_left_ = left_dim;
    c.pair_right_ = right_dim;
    c.build(left_dim, right_dim, rng);
    return c;
  }

  /// Metric residual critic assembled from given networks; an identity Mlp
  /// is allowed for any part.
  static Critic from_parts(CriticKind kind, Mlp<Scalar> e1, Mlp<Scalar> e2, Mlp<Scalar> sym, Mlp<Scalar> asym,
                           Index left_dim, Index right_dim, SymReduction reduction = SymReduction::Mean) {
    if (!is_metric_residual(kind)) throw std::invalid_argument("Critic::from_parts: not a metric residual variant");
    Critic c;
    c.config_.kind = kind;
    c.config_.sym_reduction = reduction;
    c.pair_left_ = left_dim;
    c.pair_right_ = right_dim;
    c.e1_ = std::move(e1);
    c.e2_ = std::move(e2);
    c.sym_ = std::move(sym);
    c.asym_ = std::move(asym);
    return c;
  }

  /// Q as a (batch, 1) tensor from the pair form.
  Tensor<Scalar> pair_forward(Tape<Scalar>& tape, const Tensor<Scalar>& left, const Tensor<Scalar>& right,
                              bool track = true) {
    check_width("left input", left, left_width());
    check_width("right input", right, right_width());
    if (left.rows() != right.rows()) {
      throw ShapeError("critic: batch mismatch " + shape_string(left.rows(), left.cols()) + " vs " +
                       shape_string(right.rows(), right.cols()));
    }
    switch (config_.kind) {
      case CriticKind::Monolithic:
        return mono_.forward(tape, concat(left, right), track);
      case CriticKind::Bvn:
        return sum_last(f_.forward(tape, left, track) * phi_.forward(tape, right, track));
      default:
        return -latent_distance(tape, e1_.forward(tape, left, track), e2_.forward(tape, right, track), track).total;
    }
  }

  /// Q(s, a, g) as a (batch, 1) tensor.
  Tensor<Scalar> forward(Tape<Scalar>& tape, const Tensor<Scalar>& s, const Tensor<Scalar>& a,
                         const Tensor<Scalar>& g, bool track = true) {
    if (pair_left_ >= 0) throw std::logic_error("critic built in pair form; use pair_forward");
    if (s.rows() != a.rows() || s.rows() != g.rows()) {
      throw ShapeError("critic: batch sizes differ: s " + shape_string(s.rows(), s.cols()) + ", a " +
                       shape_string(a.rows(), a.cols()) + ", g " + shape_string(g.rows(), g.cols()));
    }
    check_width("state", s, state_dim_);
    check_width("action", a, action_dim_);
    check_width("goal", g, goal_dim_);
    const auto sa = concat(s, a);
    switch (config_.kind) {
      case CriticKind::Monolithic:
        return pair_forward(tape, sa, g, track);
      case CriticKind::MrnSag:
        return pair_forward(tape, sa, concat(sa, g), track);
      default:
        return pair_forward(tape, sa, concat(s, g), track);
    }
  }

  /// The metric residual head applied directly to latents (the d of the
  /// construction, before negation).
  ResidualDistance<Scalar> latent_distance(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>& y,
                                           bool track = true) {
    if (!is_metric_residual(config_.kind)) throw std::logic_error("latent_distance: not a metric residual critic");
    Mlp<Scalar>* sym = config_.kind == CriticKind::MrnAsymOnly ? nullptr : &sym_;
    Mlp<Scalar>* asym = (config_.kind == CriticKind::MrnSymOnly || !asym_enabled_) ? nullptr : &asym_;
    return metric_residual_distance(tape, sym, asym, x, y, config_.sym_reduction, track);
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto* m : {&mono_, &f_, &phi_, &e1_, &e2_, &sym_, &asym_}) {
      auto p = m->parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    std::vector<const Parameter<Scalar>*> out;
    for (const auto* m : {&mono_, &f_, &phi_, &e1_, &e2_, &sym_, &asym_}) {
      auto p = m->parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  const CriticConfig& config() const { return config_; }
  CriticKind kind() const { return config_.kind; }
  Index latent_dim() const { return e1_.is_identity() ? pair_left_ : e1_.out_dim(); }
  Mlp<Scalar>& sym() { return sym_; }
  Mlp<Scalar>& asym() { return asym_; }

  Index left_width() const {
    if (pair_left_ >= 0) return pair_left_;
    return state_dim_ + action_dim_;
  }

  Index right_width() const {
    if (pair_right_ >= 0) return pair_right_;
    switch (config_.kind) {
      case CriticKind::Monolithic: return goal_dim_;
      case CriticKind::MrnSag: return state_dim_ + action_dim_ + goal_dim_;
      default: return state_dim_ + goal_dim_;
    }
  }

 private:
  void build(Index left, Index right, Rng& rng) {
    const auto& c = config_;
    switch (c.kind) {
      case CriticKind::Monolithic: {
        std::vector<Index> dims{left + right};
        for (Index i = 0; i < c.mono_layers; ++i) dims.push_back(c.mono_hidden);
        dims.push_back(1);
        mono_ = Mlp<Scalar>("mono", dims, rng);
        break;
      }
      case CriticKind::Bvn: {
        std::vector<Index> fdims{left};
        std::vector<Index> pdims{right};
        for (Index i = 0; i < c.bvn_layers; ++i) {
          fdims.push_back(c.bvn_hidden);
          pdims.push_back(c.bvn_hidden);
        }
        fdims.push_back(c.embed_dim);
        pdims.push_back(c.embed_dim);
        f_ = Mlp<Scalar>("f", fdims, rng);
        phi_ = Mlp<Scalar>("phi", pdims, rng);
        break;
      }
      default: {
        const Index z = c.encoder_hidden;
        e1_ = Mlp<Scalar>("e1", {left, z, z}, rng);
        e2_ = Mlp<Scalar>("e2", {right, z, z}, rng);
        const bool use_sym = c.kind != CriticKind::MrnAsymOnly;
        asym_enabled_ = c.kind != CriticKind::MrnSymOnly && c.asym_dim > 0;
        if (!use_sym && !asym_enabled_) throw std::invalid_argument("critic: asym-only variant needs asym_dim > 0");
        if (use_sym) sym_ = Mlp<Scalar>("sym", {z, c.head_hidden, c.embed_dim}, rng);
        if (asym_enabled_) asym_ = Mlp<Scalar>("asym", {z, c.head_hidden, c.asym_dim}, rng);
        break;
      }
    }
  }

  static void check_width(const char* what, const Tensor<Scalar>& t, Index width) {
    if (t.cols() != width) {
      throw ShapeError(std::string("critic: ") + what + " has shape " + shape_string(t.rows(), t.cols()) +
                       ", expected width " + std::to_string(width));
    }
  }

  CriticConfig config_;
  Index state_dim_ = 0;
  Index action_dim_ = 0;
  Index goal_dim_ = 0;
  Index pair_left_ = -1;
  Index pair_right_ = -1;
  bool asym_enabled_ = true;
  Mlp<Scalar> mono_;
  Mlp<Scalar> f_;
  Mlp<Scalar> phi_;
  Mlp<Scalar> e1_;
  Mlp<Scalar> e2_;
  Mlp<Scalar> sym_;
  Mlp<Scalar> asym_;
};

/// Free-function form of Critic::forward.
template <typename Scalar>
Tensor<Scalar> critic_forward(Critic<Scalar>& critic, Tape<Scalar>& tape, const Tensor<Scalar>& s,
                              const Tensor<Scalar>& a, const Tensor<Scalar>& g, bool track = true) {
  return critic.forward(tape, s, a, g, track);
}

struct ActorConfig {
  Index hidden = 256;
  Index layers = 3;
};

/// Deterministic policy (s, g) -> a, squashed by tanh into [low, high].
template <typename Scalar>
class Actor {
 public:
  Actor() = default;
  Actor(const ActorConfig& config, Index state_dim, Index goal_dim, const RowVector<Scalar>& low,
        const RowVector<Scalar>& high, Rng& rng)
      : state_dim_(state_dim),
        goal_dim_(goal_dim),
        low_(low),
        high_(high),
        center_((low + high) / Scalar(2)),
        half_((high - low) / Scalar(2)) {
    if (low.cols() != high.cols() || low.cols() <= 0) throw std::invalid_argument("Actor: bad action box");
    if ((half_.array() < Scalar(0)).any()) throw std::invalid_argument("Actor: action box has low > high");
    std::vector<Index> dims{state_dim + goal_dim};
    for (Index i = 0; i < config.layers; ++i) dims.push_back(config.hidden);
    dims.push_back(low.cols());
    net_ = Mlp<Scalar>("actor", dims, rng);
  }

  Tensor<Scalar> forward(Tape<Scalar>& tape, const Tensor<Scalar>& s, const Tensor<Scalar>& g, bool track = true) {
    if (s.cols() != state_dim_ || g.cols() != goal_dim_ || s.rows() != g.rows()) {
      throw ShapeError("actor: inputs " + shape_string(s.rows(), s.cols()) + " and " +
                       shape_string(g.rows(), g.cols()) + " do not match state/goal widths " +
                       std::to_string(state_dim_) + "/" + std::to_string(goal_dim_));
    }
    // The clamp only absorbs rounding in center +- half.
    return clamp_columns(column_affine(tanh(net_.forward(tape, concat(s, g), track)), half_, center_), low_, high_);
  }

  /// Plain evaluation without gradient bookkeeping.
  Matrix<Scalar> act(const Matrix<Scalar>& s, const Matrix<Scalar>& g) {
    Tape<Scalar> tape(false);
    return forward(tape, tape.constant(s), tape.constant(g), false).value();
  }

  std::vector<Parameter<Scalar>*> parameters() { return net_.parameters(); }
  std::vector<const Parameter<Scalar>*> parameters() const { return net_.parameters(); }
  Index parameter_count() const { return net_.parameter_count(); }
  Index action_dim() const { return center_.cols(); }
  const RowVector<Scalar>& low() const { return low_; }
  const RowVector<Scalar>& high() const { return high_; }
  Mlp<Scalar>& net() { return net_; }

 private:
  Index state_dim_ = 0;
  Index goal_dim_ = 0;
  RowVector<Scalar> low_;
  RowVector<Scalar> high_;
  RowVector<Scalar> center_;
  RowVector<Scalar> half_;
  Mlp<Scalar> net_;
};

/// Free-function form of Actor::forward.
template <typename Scalar>
Tensor<Scalar> actor_forward(Actor<Scalar>& actor, Tape<Scalar>& tape, const Tensor<Scalar>& s,
                             const Tensor<Scalar>& g, bool track = true) {
  return actor.forward(tape, s, g, track);
}

}  // namespace mrn
