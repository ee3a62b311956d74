#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "snad/tensor.hpp"

namespace snad {

/// A named trainable tensor. Owned by a ParameterSet; the set hands out
/// stable references.
struct Parameter {
  std::string name;
  Tensor value;
  std::string role;
};

/// Registry of trainable tensors. Insertion order is the canonical order
/// for checkpoints and optimizer state.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Throws if the name is already registered.
  Parameter& add(std::string name, Tensor value, std::string role);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::size_t index_of(const Parameter& p) const;

  /// Deep copy of all values, same names and roles.
  ParameterSet clone() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape. Records every op in execution order; nodes
/// are stored in a deque so references to values stay valid while recording.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf that receives a gradient.
  Var input(Tensor value);
  /// Leaf bound to a parameter. Repeated calls return the same node.
  Var param(Parameter& p);

  /// Records an op output. The backward rule is dropped when no input needs
  /// a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Adds g into the gradient accumulator of node id (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);
  /// Mutable accumulator, allocated on first use. Only valid for nodes that
  /// require a gradient.
  Tensor& grad_buffer(std::size_t id);

  /// Runs the recorded backward rules from a scalar loss.
  void backward(const Var& loss);

  /// Gradient of a node after backward(); zeros when nothing flowed into it.
  Tensor grad(const Var& v) const;
  /// Gradients for every parameter of the set, in set order. Parameters not
  /// touched by this tape get zeros.
  std::vector<Tensor> gradients(const ParameterSet& params) const;

  std::size_t size() const { return nodes_.size(); }
  /// Id the next recorded node will receive.
  std::size_t next_id() const { return nodes_.size(); }
  std::size_t op_count() const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
    const Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool backward_done_ = false;
};

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
/// Multiplies by a constant mask of shape (N,1,H,W) or (N,C,H,W).
Var mul_mask(const Var& a, const Tensor& mask);
/// Adds a constant tensor of the same shape.
Var add_constant(const Var& a, const Tensor& c);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var abs(const Var& a);
Var log(const Var& a);
Var square(const Var& a);

// ---- reductions ------------------------------------------------------------

Var sum(const Var& a);
Var mean(const Var& a);
/// Weighted sum of scalars.
Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights);

// ---- structure -------------------------------------------------------------

Var concat_channels(const std::vector<Var>& parts);
/// Bilinear resize with half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& x, std::size_t out_h, std::size_t out_w);

// ---- layers ----------------------------------------------------------------

/// Cross-correlation with zero padding. bias may be invalid (no bias).
Var conv2d(const Var& x, const Var& weight, const Var& bias, const ConvSpec& spec);
/// Transposed convolution; weight shape (in, out, k, k). Output extent is
/// (in - 1) * stride - 2 * padding + k.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride,
                     std::size_t padding);
/// Fully connected layer on the flattened (C,H,W) of each sample; weight
/// shape (out, C*H*W, 1, 1); output (N, out, 1, 1).
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Group-wise standardization (x - mean) / sqrt(var + eps) with biased
/// variance. group[i] is the group of element i, or kNoGroup to emit zero.
inline constexpr std::uint32_t kNoGroup = 0xffffffffu;
struct GroupStats {
  std::vector<double> mean;
  std::vector<double> var;
  std::vector<std::size_t> count;
};
Var standardize_groups(const Var& x, const std::vector<std::uint32_t>& group, std::size_t group_count,
                       double eps, GroupStats* stats = nullptr);

}  // namespace snad
