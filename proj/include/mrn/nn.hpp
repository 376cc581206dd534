#pragma once

#include "mrn/autodiff.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace mrn {

using Rng = std::mt19937_64;

template <typename Scalar>
struct Linear {
  Parameter<Scalar> weight;  // (in, out)
  Parameter<Scalar> bias;    // (1, out)

  Index in_dim() const { return weight.value.rows(); }
  Index out_dim() const { return weight.value.cols(); }
};

/// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
Linear<Scalar> make_linear(const std::string& name, Index in, Index out, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Matrix<Scalar> w(in, out);
  Matrix<Scalar> b(1, out);
  for (Index k = 0; k < w.size(); ++k) w.data()[k] = static_cast<Scalar>(bound * dist(rng));
  for (Index k = 0; k < b.size(); ++k) b.data()[k] = static_cast<Scalar>(bound * dist(rng));
  return {Parameter<Scalar>(name + ".weight", std::move(w)), Parameter<Scalar>(name + ".bias", std::move(b))};
}

/// Fully-connected stack: relu after every layer except the last. An Mlp
/// with no layers is the identity map.
template <typename Scalar>
class Mlp {
 public:
  Mlp() = default;

  /// dims = {in, hidden..., out}
  Mlp(const std::string& name, const std::vector<Index>& dims, Rng& rng) : name_(name) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp '" + name + "': needs at least input and output dims");
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      if (dims[i] <= 0 || dims[i + 1] <= 0) throw std::invalid_argument("Mlp '" + name + "': dims must be positive");
      layers_.push_back(make_linear<Scalar>(name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
    }
  }

  static Mlp identity(const std::string& name) {
    Mlp m;
    m.name_ = name;
    return m;
  }

  /// track=false views the weights as constants (no gradient recorded).
  Tensor<Scalar> forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, bool track = true) {
    Tensor<Scalar> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      auto& layer = layers_[i];
      h = affine(h, tape.parameter(layer.weight, track), tape.parameter(layer.bias, track));
      if (i + 1 < layers_.size()) h = relu(h);
    }
    return h;
  }

  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (auto& layer : layers_) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    std::vector<const Parameter<Scalar>*> out;
    for (const auto& layer : layers_) {
      out.push_back(&layer.weight);
      out.push_back(&layer.bias);
    }
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
  }

  bool is_identity() const { return layers_.empty(); }
  Index in_dim() const { return layers_.empty() ? -1 : layers_.front().in_dim(); }
  Index out_dim() const { return layers_.empty() ? -1 : layers_.back().out_dim(); }
  const std::string& name() const { return name_; }
  std::vector<Linear<Scalar>>& layers() { return layers_; }
  const std::vector<Linear<Scalar>>& layers() const { return layers_; }

 private:
  std::string name_;
  std::vector<Linear<Scalar>> layers_;
};

/// Adam with bias correction.
template <typename Scalar>
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(std::vector<Parameter<Scalar>*> params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    const Scalar lr_t = static_cast<Scalar>(opt_.lr * std::sqrt(c2) / c1);
    const Scalar b1 = static_cast<Scalar>(opt_.beta1);
    const Scalar b2 = static_cast<Scalar>(opt_.beta2);
    const Scalar eps_hat = static_cast<Scalar>(opt_.eps * std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= lr_t * m_[i].array() / (v_[i].array().sqrt() + eps_hat);
    }
  }

  /// Re-points the optimizer at a parameter list with identical shapes,
  /// e.g. after the owning network was copied or moved.
  void rebind(std::vector<Parameter<Scalar>*> params) {
    if (params.size() != params_.size()) throw std::invalid_argument("Adam::rebind: parameter count changed");
    params_ = std::move(params);
  }

  const Options& options() const { return opt_; }
  long steps() const { return t_; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  Options opt_;
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
  long t_ = 0;
};

/// target <- tau * target + (1 - tau) * online
template <typename Scalar>
void polyak_update(const std::vector<Parameter<Scalar>*>& target, const std::vector<Parameter<Scalar>*>& online,
                   double tau) {
  if (target.size() != online.size()) throw std::invalid_argument("polyak_update: parameter lists differ in length");
  const Scalar keep = static_cast<Scalar>(tau);
  for (std::size_t i = 0; i < target.size(); ++i) {
    target[i]->value = keep * target[i]->value + (Scalar(1) - keep) * online[i]->value;
  }
}

}  // namespace mrn
