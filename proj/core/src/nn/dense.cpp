#include "emix/nn/dense.hpp"

#include <cmath>

#include "emix/errors.hpp"

namespace emix::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kElu: return "elu";
    case Activation::kTanh: return "tanh";
    case Activation::kAbs: return "abs";
  }
  return "?";
}

void apply_activation(Activation a, const Matrix& pre, Matrix& out) {
  switch (a) {
    case Activation::kIdentity:
      out = pre;
      return;
    case Activation::kRelu:
      out = pre.cwiseMax(0.0);
      return;
    case Activation::kElu:
      out = pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
      return;
    case Activation::kTanh:
      out = pre.array().tanh().matrix();
      return;
    case Activation::kAbs:
      out = pre.cwiseAbs();
      return;
  }
}

void activation_backward(Activation a, const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre) {
  switch (a) {
    case Activation::kIdentity:
      grad_pre = grad_out;
      return;
    case Activation::kRelu:
      grad_pre = grad_out.binaryExpr(pre, [](double g, double x) { return x > 0.0 ? g : 0.0; });
      return;
    case Activation::kElu:
      grad_pre = grad_out.binaryExpr(pre, [](double g, double x) { return x > 0.0 ? g : g * std::exp(x); });
      return;
    case Activation::kTanh:
      grad_pre = grad_out.binaryExpr(pre, [](double g, double x) {
        const double t = std::tanh(x);
        return g * (1.0 - t * t);
      });
      return;
    case Activation::kAbs:
      grad_pre = grad_out.binaryExpr(pre, [](double g, double x) {
        return x > 0.0 ? g : (x < 0.0 ? -g : 0.0);
      });
      return;
  }
}

Dense::Dense(ParamSet& params, std::string name, DenseSpec spec)
    : name_(std::move(name)), spec_(spec) {
  if (spec.in_dim <= 0 || spec.out_dim <= 0) {
    throw ConfigError("layer '" + name_ + "': dimensions must be positive");
  }
  w_ = params.add(name_ + ".w", {spec.in_dim, spec.out_dim});
  b_ = params.add(name_ + ".b", {spec.out_dim});
}

void Dense::init(ParamSet& params, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.in_dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto* m : {&params[w_].value, &params[b_].value}) {
    for (Index i = 0; i < m->size(); ++i) m->data()[i] = u(rng);
  }
}

Matrix Dense::forward(const ParamSet& params, const Matrix& x, DenseTape* tape) const {
  if (x.cols() != spec_.in_dim) {
    throw DimensionError("layer '" + name_ + "': expected input width " +
                         std::to_string(spec_.in_dim) + ", got " + std::to_string(x.cols()));
  }
  const Matrix& w = params[w_].value;
  const Matrix& b = params[b_].value;
  Matrix pre = x * w;
  pre.rowwise() += b.row(0);
  Matrix out;
  apply_activation(spec_.activation, pre, out);
  if (tape != nullptr) {
    tape->input = x;
    tape->pre = std::move(pre);
    tape->filled = true;
  }
  return out;
}

Matrix Dense::backward(ParamSet& params, const Matrix& grad_out, const DenseTape& tape) const {
  if (!tape.filled) {
    throw UsageError("layer '" + name_ + "': backward called without a forward pass");
  }
  if (grad_out.rows() != tape.pre.rows() || grad_out.cols() != spec_.out_dim) {
    throw DimensionError("layer '" + name_ + "': gradient shape does not match forward output");
  }
  Matrix grad_pre;
  activation_backward(spec_.activation, tape.pre, grad_out, grad_pre);
  params[w_].grad.noalias() += tape.input.transpose() * grad_pre;
  params[b_].grad.row(0) += grad_pre.colwise().sum();
  return grad_pre * params[w_].value.transpose();
}

Mlp::Mlp(ParamSet& params, const std::string& name, const std::vector<Index>& dims,
         Activation hidden, Activation output) {
  if (dims.size() < 2) throw ConfigError("mlp '" + name + "' needs at least one layer");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    layers_.emplace_back(params, name + ".fc" + std::to_string(i + 1),
                         DenseSpec{dims[i], dims[i + 1], last ? output : hidden});
  }
}

void Mlp::init(ParamSet& params, Rng& rng) const {
  for (const auto& l : layers_) l.init(params, rng);
}

Matrix Mlp::forward(const ParamSet& params, const Matrix& x, MlpTape* tape) const {
  if (tape != nullptr) tape->layers.assign(layers_.size(), DenseTape{});
  Matrix h = layers_[0].forward(params, x, tape ? &tape->layers[0] : nullptr);
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    h = layers_[i].forward(params, h, tape ? &tape->layers[i] : nullptr);
  }
  return h;
}

Matrix Mlp::backward(ParamSet& params, const Matrix& grad_out, const MlpTape& tape) const {
  if (tape.layers.size() != layers_.size()) {
    throw UsageError("mlp backward called without a matching forward pass");
  }
  Matrix g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i].backward(params, g, tape.layers[i]);
  }
  return g;
}

}  // namespace emix::nn
