#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "emix/nn/param_set.hpp"
#include "emix/nn/types.hpp"

namespace emix::nn {

enum class Activation {
  kIdentity,
  kRelu,
  kElu,
  kTanh,
  // |x| applied to the affine output. Only hypernetwork heads that emit
  // mixing weights use this; it is what makes the QMIX mixer monotone.
  kAbs,
};

std::string_view to_string(Activation a);

struct DenseSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  Activation activation = Activation::kIdentity;
};

/// Intermediates cached by a forward pass.
struct DenseTape {
  Matrix input;
  Matrix pre;  // input * W + b, before the activation
  bool filled = false;
};

/// Fully connected layer y = act(x W + b) whose weight [in x out] and bias
/// [out] live in an external ParamSet as "<name>.w" / "<name>.b".
class Dense {
 public:
  Dense(ParamSet& params, std::string name, DenseSpec spec);

  const DenseSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }
  std::size_t weight_index() const { return w_; }
  std::size_t bias_index() const { return b_; }

  /// Uniform in [-1/sqrt(in_dim), 1/sqrt(in_dim)] for weight and bias.
  void init(ParamSet& params, Rng& rng) const;

  /// Throws DimensionError naming the layer when x has the wrong width.
  Matrix forward(const ParamSet& params, const Matrix& x, DenseTape* tape) const;

  /// Accumulates (+=) into the layer's grads and returns d loss / d input.
  /// Throws UsageError if the tape was never filled.
  Matrix backward(ParamSet& params, const Matrix& grad_out, const DenseTape& tape) const;

 private:
  std::string name_;
  DenseSpec spec_;
  std::size_t w_;
  std::size_t b_;
};

void apply_activation(Activation a, const Matrix& pre, Matrix& out);
/// grad_pre = grad_out .* act'(pre)
void activation_backward(Activation a, const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre);

struct MlpTape {
  std::vector<DenseTape> layers;
};

/// Stack of Dense layers. `dims` = {in, h1, ..., out}; `hidden` is applied
/// after every layer except the last, which uses `output`.
class Mlp {
 public:
  Mlp(ParamSet& params, const std::string& name, const std::vector<Index>& dims,
      Activation hidden, Activation output);

  Index in_dim() const { return layers_.front().spec().in_dim; }
  Index out_dim() const { return layers_.back().spec().out_dim; }
  const std::vector<Dense>& layers() const { return layers_; }

  void init(ParamSet& params, Rng& rng) const;
  Matrix forward(const ParamSet& params, const Matrix& x, MlpTape* tape) const;
  Matrix backward(ParamSet& params, const Matrix& grad_out, const MlpTape& tape) const;

 private:
  std::vector<Dense> layers_;
};

}  // namespace emix::nn
