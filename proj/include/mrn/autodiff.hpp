#pragma once

// Tape-based reverse-mode differentiation over 2-D (batch x feature) dense
// arrays. A Tape owns every intermediate value of one forward pass; Tensors
// are lightweight handles into it.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

#ifdef NDEBUG
inline constexpr bool kCheckFiniteByDefault = false;
#else
inline constexpr bool kCheckFiniteByDefault = true;
#endif

/// A learnable array with an accumulated gradient of the same shape.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

enum class OpKind : std::uint8_t {
  Leaf,
  Affine,
  Relu,
  Tanh,
  Add,
  Sub,
  Mul,
  Square,
  MeanLast,
  MaxLast,
  SumLast,
  Sum,
  Concat,
  Neg,
  Scale,
  ColumnAffine,
  Sqrt,
  Clamp,
};

inline const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Affine: return "affine";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Square: return "square";
    case OpKind::MeanLast: return "mean_last";
    case OpKind::MaxLast: return "max_last";
    case OpKind::SumLast: return "sum_last";
    case OpKind::Sum: return "sum";
    case OpKind::Concat: return "concat";
    case OpKind::Neg: return "neg";
    case OpKind::Scale: return "scale";
    case OpKind::ColumnAffine: return "column_affine";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Clamp: return "clamp";
  }
  return "unknown";
}

template <typename Scalar>
class Tape;

template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  const Matrix<Scalar>& value() const { return tape().node(id_).value_ref(); }
  const Matrix<Scalar>& grad() const;
  bool has_grad() const { return tape().node(id_).grad_ready; }
  bool requires_grad() const { return tape().node(id_).requires_grad; }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Scalar item() const;

  Tape<Scalar>& tape() const {
    if (tape_ == nullptr) throw TapeError("tensor is not attached to a tape");
    return *tape_;
  }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Tensor(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

inline std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << "(" << rows << ", " << cols << ")";
  return os.str();
}

template <typename Scalar>
class Tape {
 public:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::array<std::size_t, 3> inputs{};
    int n_inputs = 0;
    Matrix<Scalar> value;
    const Matrix<Scalar>* external = nullptr;
    Matrix<Scalar> grad;
    bool requires_grad = false;
    bool grad_ready = false;
    Parameter<Scalar>* param = nullptr;
    std::vector<Index> argmax;
    Scalar factor = Scalar(0);
    RowVector<Scalar> col_scale;
    RowVector<Scalar> col_low;
    RowVector<Scalar> col_high;
    Index split = 0;

    const Matrix<Scalar>& value_ref() const { return external != nullptr ? *external : value; }
  };

  explicit Tape(bool check_finite = kCheckFiniteByDefault) : check_finite_(check_finite) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Tensor<Scalar> constant(Matrix<Scalar> value) { return leaf(std::move(value), false); }

  /// Leaf that receives a gradient on backward().
  Tensor<Scalar> variable(Matrix<Scalar> value) { return leaf(std::move(value), true); }

  /// Leaf viewing a Parameter; backward() adds into param.grad. The
  /// parameter must outlive the tape and must not be resized meanwhile.
  Tensor<Scalar> parameter(Parameter<Scalar>& param, bool track = true) {
    Node node;
    node.external = &param.value;
    node.requires_grad = track;
    node.param = track ? &param : nullptr;
    check_leaf(param.value, param.name.c_str());
    return push(std::move(node));
  }

  /// Reverse sweep from a scalar loss. Every node flagged requires_grad ends
  /// with a populated gradient (zero when unreachable from the loss).
  void backward(const Tensor<Scalar>& loss) {
    if (&loss.tape() != this) throw TapeError("backward: loss belongs to a different tape");
    if (backward_done_) throw TapeError("backward: called twice without re-running forward");
    const Node& root = nodes_[loss.id()];
    if (root.value_ref().size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " +
                       shape_string(root.value_ref().rows(), root.value_ref().cols()));
    }
    backward_done_ = true;
    accumulate(loss.id(), Matrix<Scalar>::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || !node.grad_ready) continue;
      propagate(i);
    }
    for (Node& node : nodes_) {
      if (!node.requires_grad) continue;
      if (!node.grad_ready) {
        node.grad.setZero(node.value_ref().rows(), node.value_ref().cols());
        node.grad_ready = true;
      }
      if (node.param != nullptr) node.param->grad += node.grad;
    }
  }

  /// Drops all nodes so the tape can record a fresh forward pass.
  void clear() {
    nodes_.clear();
    backward_done_ = false;
  }

  std::size_t size() const { return nodes_.size(); }
  bool check_finite() const { return check_finite_; }
  void set_check_finite(bool on) { check_finite_ = on; }

  /// Active relu units and max argmaxes of the recorded pass; two passes
  /// share a signature iff they took the same piecewise-linear branch.
  std::vector<std::int64_t> branch_signature() const {
    std::vector<std::int64_t> sig;
    for (const Node& node : nodes_) {
      if (node.kind == OpKind::Relu) {
        const auto& in = nodes_[node.inputs[0]].value_ref();
        for (Index k = 0; k < in.size(); ++k) sig.push_back(in.data()[k] > Scalar(0) ? 1 : 0);
      } else if (node.kind == OpKind::MaxLast) {
        sig.insert(sig.end(), node.argmax.begin(), node.argmax.end());
      } else if (node.kind == OpKind::Clamp) {
        const auto& in = nodes_[node.inputs[0]].value_ref();
        for (Index k = 0; k < in.size(); ++k) sig.push_back(in.data()[k] == node.value.data()[k] ? 1 : 0);
      }
    }
    return sig;
  }

  const Node& node(std::size_t id) const { return nodes_.at(id); }

  // Recording interface used by the op free functions.
  Tensor<Scalar> record(OpKind kind, std::initializer_list<Tensor<Scalar>> inputs, Matrix<Scalar> value,
                        Node extra = Node{}) {
    if (backward_done_) throw TapeError(std::string(op_name(kind)) + ": tape already consumed by backward");
    Node node = std::move(extra);
    node.kind = kind;
    node.n_inputs = 0;
    for (const auto& in : inputs) {
      if (&in.tape() != this) throw TapeError(std::string(op_name(kind)) + ": inputs recorded on different tapes");
      const Node& src = nodes_[in.id()];
      if (check_finite_ && !src.value_ref().allFinite()) {
        throw NumericError(std::string(op_name(kind)) + ": non-finite input of shape " +
                           shape_string(src.value_ref().rows(), src.value_ref().cols()));
      }
      node.requires_grad = node.requires_grad || src.requires_grad;
      node.inputs[node.n_inputs++] = in.id();
    }
    node.value = std::move(value);
    return push(std::move(node));
  }

 private:
  Tensor<Scalar> leaf(Matrix<Scalar> value, bool requires_grad) {
    check_leaf(value, "leaf");
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    return push(std::move(node));
  }

  void check_leaf(const Matrix<Scalar>& value, const char* what) const {
    if (value.rows() <= 0 || value.cols() <= 0) {
      throw ShapeError(std::string("leaf '") + what + "': empty shape " + shape_string(value.rows(), value.cols()));
    }
    if (check_finite_ && !value.allFinite()) throw NumericError(std::string("leaf '") + what + "': non-finite value");
  }

  Tensor<Scalar> push(Node&& node) {
    if (backward_done_) throw TapeError("tape already consumed by backward; call clear()");
    nodes_.push_back(std::move(node));
    return Tensor<Scalar>(this, nodes_.size() - 1);
  }

  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[id];
    if (!node.requires_grad) return;
    if (!node.grad_ready) {
      node.grad = g;
      node.grad_ready = true;
    } else {
      node.grad += g;
    }
  }

  void propagate(std::size_t id) {
    // Copy what the closures need: accumulate() may touch other nodes only.
    const Node& node = nodes_[id];
    const Matrix<Scalar>& gy = node.grad;
    const auto in = [&](int k) -> const Matrix<Scalar>& { return nodes_[node.inputs[k]].value_ref(); };
    const auto needs = [&](int k) { return nodes_[node.inputs[k]].requires_grad; };
    const std::size_t a = node.inputs[0];
    const std::size_t b = node.inputs[1];
    switch (node.kind) {
      case OpKind::Leaf:
        break;
      case OpKind::Affine: {
        if (needs(0)) accumulate(a, gy * in(1).transpose());
        if (needs(1)) accumulate(b, in(0).transpose() * gy);
        if (needs(2)) accumulate(node.inputs[2], gy.colwise().sum());
        break;
      }
      case OpKind::Relu:
        accumulate(a, (in(0).array() > Scalar(0)).template cast<Scalar>().matrix().cwiseProduct(gy));
        break;
      case OpKind::Tanh:
        accumulate(a, ((Scalar(1) - node.value.array().square()) * gy.array()).matrix());
        break;
      case OpKind::Add:
        accumulate(a, gy);
        accumulate(b, gy);
        break;
      case OpKind::Sub:
        accumulate(a, gy);
        if (needs(1)) accumulate(b, -gy);
        break;
      case OpKind::Mul:
        if (needs(0)) accumulate(a, gy.cwiseProduct(in(1)));
        if (needs(1)) accumulate(b, gy.cwiseProduct(in(0)));
        break;
      case OpKind::Square:
        accumulate(a, (Scalar(2) * in(0).array() * gy.array()).matrix());
        break;
      case OpKind::MeanLast: {
        const Index cols = in(0).cols();
        accumulate(a, (gy / Scalar(cols)).replicate(1, cols));
        break;
      }
      case OpKind::SumLast:
        accumulate(a, gy.replicate(1, in(0).cols()));
        break;
      case OpKind::MaxLast: {
        Matrix<Scalar> g = Matrix<Scalar>::Zero(in(0).rows(), in(0).cols());
        for (Index r = 0; r < g.rows(); ++r) g(r, node.argmax[static_cast<std::size_t>(r)]) = gy(r, 0);
        accumulate(a, g);
        break;
      }
      case OpKind::Sum:
        accumulate(a, Matrix<Scalar>::Constant(in(0).rows(), in(0).cols(), gy(0, 0)));
        break;
      case OpKind::Concat: {
        const Index split = node.split;
        if (needs(0)) accumulate(a, gy.leftCols(split));
        if (needs(1)) accumulate(b, gy.rightCols(gy.cols() - split));
        break;
      }
      case OpKind::Neg:
        accumulate(a, -gy);
        break;
      case OpKind::Scale:
        accumulate(a, node.factor * gy);
        break;
      case OpKind::ColumnAffine:
        accumulate(a, (gy.array().rowwise() * node.col_scale.array()).matrix());
        break;
      case OpKind::Sqrt:
        // Zero where the output is zero instead of +inf.
        accumulate(a, (node.value.array() > Scalar(0))
                          .select(gy.array() / (Scalar(2) * node.value.array()), Scalar(0))
                          .matrix());
        break;
      case OpKind::Clamp:
        accumulate(a, (in(0).array() == node.value.array()).select(gy.array(), Scalar(0)).matrix());
        break;
    }
  }

  std::vector<Node> nodes_;
  bool check_finite_;
  bool backward_done_ = false;
};

template <typename Scalar>
const Matrix<Scalar>& Tensor<Scalar>::grad() const {
  const auto& node = tape().node(id_);
  if (!node.grad_ready) throw TapeError("tensor has no gradient (not requiring grad, or backward not run)");
  return node.grad;
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("item: tensor of shape " + shape_string(v.rows(), v.cols()) + " is not scalar");
  return v(0, 0);
}

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
}

}  // namespace detail

/// x * weight + bias, with weight (in, out) and bias (1, out).
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (x.cols() != weight.rows()) {
    throw ShapeError("affine: input " + shape_string(x.rows(), x.cols()) + " does not match weight " +
                     shape_string(weight.rows(), weight.cols()));
  }
  if (bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw ShapeError("affine: bias " + shape_string(bias.rows(), bias.cols()) + " does not match weight " +
                     shape_string(weight.rows(), weight.cols()));
  }
  Matrix<Scalar> out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.tape().record(OpKind::Affine, {x, weight, bias}, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::Relu, {x}, x.value().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::Tanh, {x}, x.value().array().tanh().matrix());
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  return a.tape().record(OpKind::Add, {a, b}, a.value() + b.value());
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  return a.tape().record(OpKind::Sub, {a, b}, a.value() - b.value());
}

template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  return a.tape().record(OpKind::Mul, {a, b}, a.value().cwiseProduct(b.value()));
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::Neg, {x}, -x.value());
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::Square, {x}, x.value().cwiseAbs2());
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& x, Scalar factor) {
  typename Tape<Scalar>::Node extra;
  extra.factor = factor;
  return x.tape().record(OpKind::Scale, {x}, factor * x.value(), std::move(extra));
}

/// (batch, n) -> (batch, 1)
template <typename Scalar>
Tensor<Scalar> mean_last(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::MeanLast, {x}, x.value().rowwise().mean());
}

template <typename Scalar>
Tensor<Scalar> sum_last(const Tensor<Scalar>& x) {
  return x.tape().record(OpKind::SumLast, {x}, x.value().rowwise().sum());
}

/// (batch, n) -> (batch, 1); ties resolve to the lowest index.
template <typename Scalar>
Tensor<Scalar> max_last(const Tensor<Scalar>& x) {
  const auto& v = x.value();
  typename Tape<Scalar>::Node extra;
  extra.argmax.resize(static_cast<std::size_t>(v.rows()));
  Matrix<Scalar> out(v.rows(), 1);
  for (Index r = 0; r < v.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < v.cols(); ++c) {
      if (v(r, c) > v(r, best)) best = c;
    }
    extra.argmax[static_cast<std::size_t>(r)] = best;
    out(r, 0) = v(r, best);
  }
  return x.tape().record(OpKind::MaxLast, {x}, std::move(out), std::move(extra));
}

/// Sum of all entries -> (1, 1).
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.tape().record(OpKind::Sum, {x}, std::move(out));
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& x) {
  return scale(sum(x), Scalar(1) / static_cast<Scalar>(x.value().size()));
}

template <typename Scalar>
Tensor<Scalar> concat(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat: shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
  Matrix<Scalar> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  typename Tape<Scalar>::Node extra;
  extra.split = a.cols();
  return a.tape().record(OpKind::Concat, {a, b}, std::move(out), std::move(extra));
}

/// x * diag(scale) + shift, with constant row vectors scale and shift.
template <typename Scalar>
Tensor<Scalar> column_affine(const Tensor<Scalar>& x, const RowVector<Scalar>& scale_row,
                             const RowVector<Scalar>& shift_row) {
  if (scale_row.cols() != x.cols() || shift_row.cols() != x.cols()) {
    throw ShapeError("column_affine: input " + shape_string(x.rows(), x.cols()) + " vs scale " +
                     shape_string(1, scale_row.cols()) + " and shift " + shape_string(1, shift_row.cols()));
  }
  Matrix<Scalar> out = (x.value().array().rowwise() * scale_row.array()).matrix();
  out.rowwise() += shift_row;
  typename Tape<Scalar>::Node extra;
  extra.col_scale = scale_row;
  return x.tape().record(OpKind::ColumnAffine, {x}, std::move(out), std::move(extra));
}

/// Elementwise square root of a non-negative input. The gradient at 0 is 0.
template <typename Scalar>
Tensor<Scalar> sqrt(const Tensor<Scalar>& x) {
  if ((x.value().array() < Scalar(0)).any()) throw NumericError("sqrt: negative input");
  return x.tape().record(OpKind::Sqrt, {x}, x.value().array().sqrt().matrix());
}

/// Clamps column j into [low(j), high(j)]; gradient flows only through
/// entries left unchanged.
template <typename Scalar>
Tensor<Scalar> clamp_columns(const Tensor<Scalar>& x, const RowVector<Scalar>& low, const RowVector<Scalar>& high) {
  if (low.cols() != x.cols() || high.cols() != x.cols()) {
    throw ShapeError("clamp_columns: input " + shape_string(x.rows(), x.cols()) + " vs bounds " +
                     shape_string(1, low.cols()) + " and " + shape_string(1, high.cols()));
  }
  Matrix<Scalar> out = x.value();
  for (Index r = 0; r < out.rows(); ++r) out.row(r) = out.row(r).cwiseMax(low).cwiseMin(high);
  typename Tape<Scalar>::Node extra;
  extra.col_low = low;
  extra.col_high = high;
  return x.tape().record(OpKind::Clamp, {x}, std::move(out), std::move(extra));
}

}  // namespace mrn
