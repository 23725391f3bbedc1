#pragma once

// Reverse-mode automatic differentiation over dense float64 tensors.
//
// A Tape records primitive operations in creation order; every Var is a
// handle (tape pointer + node id) into exactly one tape. Tensors are stored
// row-major. Binary elementwise ops broadcast a scalar, or an operand whose
// shape is a suffix of the other's (e.g. a length-k bias over an N x k matrix).

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace footfit::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  double item() const;
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
  double item() const { return value().item(); }
  bool requires_grad() const;
  bool valid() const { return tape_ != nullptr; }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradient buffer for one input of a recorded op; empty when that input does
/// not need a gradient.
using GradSpan = std::span<double>;

/// Local backward rule: accumulate d(output)/d(input_k) * out_grad into in_grads[k].
/// out_value is the value recorded for the node itself.
using BackwardFn = std::function<void(const Tape&, const Tensor& out_value, std::span<const double> out_grad,
                                      std::span<const GradSpan> in_grads)>;

/// Gradients of a scalar output with respect to every requires-grad leaf.
class Gradients {
 public:
  /// Gradient of the given leaf; zeros shaped like the leaf when it had no path to the output.
  Tensor operator[](const Var& leaf) const;
  bool contains(const Var& leaf) const { return grads_.count(leaf.id()) != 0; }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::unordered_map<std::size_t, Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New leaf. Throws std::invalid_argument on non-finite values.
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records a primitive. The backward rule is only kept when an input needs a gradient.
  Var record(std::span<const Var> inputs, Tensor value, BackwardFn backward);
  Var record(std::initializer_list<Var> inputs, Tensor value, BackwardFn backward) {
    return record(std::span<const Var>(inputs.begin(), inputs.size()), std::move(value), std::move(backward));
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  const Tensor& value(const Var& v) const { return value(v.id()); }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar output. Does not mutate the tape, so repeated
  /// calls produce identical results.
  Gradients backward(const Var& output) const;

  /// Throws std::invalid_argument unless v was created on this tape.
  void check_owner(const Var& v) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var neg(const Var& a);

Var add(const Var& a, double b);
Var mul(const Var& a, double b);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator-(const Var& a) { return neg(a); }
inline Var operator+(const Var& a, double b) { return add(a, b); }
inline Var operator-(const Var& a, double b) { return add(a, -b); }
inline Var operator*(const Var& a, double b) { return mul(a, b); }
inline Var operator*(double a, const Var& b) { return mul(b, a); }

Var sum(const Var& a);
Var mean(const Var& a);
/// Inner product of two equally sized tensors (flattened).
Var dot(const Var& a, const Var& b);
/// (m x k) * (k x n). Rank-1 left operands are treated as 1 x k.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

/// Throws on non-positive input.
Var sqrt(const Var& a);
Var exp(const Var& a);
/// Throws on non-positive input.
Var log(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
/// Inputs are clamped to [-1, 1]; the gradient is zero where |x| > 1 - eps (eps = 1e-7).
Var arccos(const Var& a);
/// Gradient passes where lo <= x <= hi, zero elsewhere.
Var clamp(const Var& a, double lo, double hi);
/// Euclidean norm of the flattened tensor. Gradient is zero at the origin.
Var norm2(const Var& a);
/// Identity value, no gradient.
Var detach(const Var& a);

Var reshape(const Var& a, Shape shape);
/// Concatenates rank-1 tensors.
Var concat(std::span<const Var> parts);
/// Element i of the flattened tensor as a scalar.
Var element(const Var& a, std::size_t i);
/// Rows idx of an (N x k) tensor.
Var gather_rows(const Var& a, std::span<const std::size_t> idx);
/// Per-row inner product of two (N x k) tensors -> (N).
Var row_dot(const Var& a, const Var& b);
/// Per-row unit vectors of an (N x k) tensor. Zero rows stay zero with zero gradient.
Var row_normalize(const Var& a);

/// Central finite-difference check of a scalar function of several tensors.
/// Returns max over all input components of |analytic - numeric| / max(1, |numeric|).
double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& f, std::span<const Tensor> inputs,
                  double h = 1e-5);

}  // namespace footfit::ad
