#include "footfit/autodiff.hpp"

#include "footfit/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace footfit::ad {

namespace {

constexpr double kArccosEps = 1e-7;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

Tape& tape_of(const Var& v) {
  if (!v.valid()) throw std::invalid_argument("use of an uninitialised Var");
  return *v.tape();
}

Tape& common_tape(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  t.check_owner(b);
  return t;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

/// Output shape of a broadcasting binary op.
Shape broadcast_shape(const Shape& a, const Shape& b) {
  if (a == b) return a;
  const std::size_t na = shape_size(a), nb = shape_size(b);
  if (nb == 1) return a;
  if (na == 1) return b;
  if (is_suffix(b, a)) return a;
  if (is_suffix(a, b)) return b;
  throw DimensionError("cannot broadcast " + shape_string(a) + " with " + shape_string(b));
}

/// Elementwise binary op. dfa/dfb give the local partials at (x, y).
template <class F, class DA, class DB>
Var binary(const Var& a, const Var& b, F f, DA dfa, DB dfb) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  Tensor out(broadcast_shape(va.shape, vb.shape));
  const std::size_t n = out.size(), na = va.size(), nb = vb.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(va[i % na], vb[i % nb]);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({a, b}, std::move(out),
                     [ia, ib, dfa, dfb](const Tape& t, const Tensor&, std::span<const double> g,
                                        std::span<const GradSpan> gin) {
                       const Tensor& xa = t.value(ia);
                       const Tensor& xb = t.value(ib);
                       const std::size_t na = xa.size(), nb = xb.size();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double x = xa[i % na], y = xb[i % nb];
                         if (!gin[0].empty()) gin[0][i % na] += g[i] * dfa(x, y);
                         if (!gin[1].empty()) gin[1][i % nb] += g[i] * dfb(x, y);
                       }
                     });
}

/// Elementwise unary op; df(x, y) is the local derivative given input x and output y.
template <class F, class D>
Var unary(const Var& a, F f, D df) {
  Tape& tape = tape_of(a);
  const Tensor& va = a.value();
  Tensor out(va.shape);
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = f(va[i]);
  const std::size_t ia = a.id();
  return tape.record({a}, std::move(out),
                     [ia, df](const Tape& t, const Tensor& y, std::span<const double> g,
                              std::span<const GradSpan> gin) {
                       const Tensor& x = t.value(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i] * df(x[i], y[i]);
                     });
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape));
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) {
    throw DimensionError("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                         shape_string(shape));
  }
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

double Tensor::item() const {
  if (data.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape));
  return data[0];
}

const Tensor& Var::value() const { return tape_of(*this).value(id_); }

bool Var::requires_grad() const { return tape_of(*this).requires_grad(id_); }

Tensor Gradients::operator[](const Var& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it != grads_.end()) return it->second;
  if (tape_ == nullptr || leaf.tape() != tape_) throw std::invalid_argument("gradient query for a foreign Var");
  return Tensor(leaf.shape(), 0.0);
}

void Tape::check_owner(const Var& v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw std::invalid_argument("Var belongs to a different tape");
  }
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  for (double x : value.data) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite value in autodiff leaf");
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.is_leaf = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owner(in);
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& output) const {
  check_owner(output);
  if (value(output).size() != 1) {
    throw DimensionError("backward requires a scalar output, got shape " + shape_string(value(output).shape));
  }
  Gradients result;
  result.tape_ = this;
  const std::size_t top = output.id();
  std::vector<std::vector<double>> grads(top + 1);
  grads[top].assign(1, 1.0);

  std::vector<GradSpan> in_spans;
  for (std::size_t k = top + 1; k-- > 0;) {
    const Node& node = nodes_[k];
    if (!node.requires_grad || grads[k].empty() || node.is_leaf || !node.backward) continue;
    in_spans.clear();
    for (std::size_t in : node.inputs) {
      if (nodes_[in].requires_grad) {
        if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
        in_spans.emplace_back(grads[in]);
      } else {
        in_spans.emplace_back();
      }
    }
    node.backward(*this, node.value, grads[k], in_spans);
  }
  for (std::size_t k = 0; k <= top; ++k) {
    const Node& node = nodes_[k];
    if (!node.is_leaf || !node.requires_grad) continue;
    if (grads[k].empty()) {
      result.grads_.emplace(k, Tensor(node.value.shape, 0.0));
    } else {
      result.grads_.emplace(k, Tensor(node.value.shape, std::move(grads[k])));
    }
  }
  return result;
}

// ---- elementwise -------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var div(const Var& a, const Var& b) {
  for (double y : b.value().data) {
    if (y == 0.0) throw std::domain_error("division by zero in autodiff div");
  }
  return binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Var neg(const Var& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var add(const Var& a, double b) {
  return unary(a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}

Var mul(const Var& a, double b) {
  return unary(a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}

Var sqrt(const Var& a) {
  for (double x : a.value().data) {
    if (!(x > 0.0)) throw std::domain_error("sqrt of non-positive value");
  }
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  for (double x : a.value().data) {
    if (!(x > 0.0)) throw std::domain_error("log of non-positive value");
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sin(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(const Var& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var arccos(const Var& a) {
  static constexpr double lo = -1.0 + kArccosEps, hi = 1.0 - kArccosEps;
  return unary(
      a, [](double x) { return std::acos(std::clamp(x, -1.0, 1.0)); },
      [](double x, double) { return (x < lo || x > hi) ? 0.0 : -1.0 / std::sqrt(1.0 - x * x); });
}

Var clamp(const Var& a, double lo, double hi) {
  if (lo > hi) throw std::invalid_argument("clamp: lo > hi");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var detach(const Var& a) {
  Tape& tape = tape_of(a);
  return tape.constant(a.value());
}

// ---- reductions ---------------------------------------------------------------

Var sum(const Var& a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return tape.record({a}, Tensor::scalar(s),
                     [](const Tape&, const Tensor&, std::span<const double> g, std::span<const GradSpan> gin) {
                       for (double& x : gin[0]) x += g[0];
                     });
}

Var mean(const Var& a) {
  const std::size_t n = a.size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return mul(sum(a), 1.0 / static_cast<double>(n));
}

Var dot(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.size() != vb.size()) {
    throw DimensionError("dot: size mismatch " + shape_string(va.shape) + " vs " + shape_string(vb.shape));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) s += va[i] * vb[i];
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({a, b}, Tensor::scalar(s),
                     [ia, ib](const Tape& t, const Tensor&, std::span<const double> g,
                              std::span<const GradSpan> gin) {
                       const Tensor& xa = t.value(ia);
                       const Tensor& xb = t.value(ib);
                       for (std::size_t i = 0; i < xa.size(); ++i) {
                         if (!gin[0].empty()) gin[0][i] += g[0] * xb[i];
                         if (!gin[1].empty()) gin[1][i] += g[0] * xa[i];
                       }
                     });
}

Var norm2(const Var& a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double x : a.value().data) s += x * x;
  const std::size_t ia = a.id();
  return tape.record({a}, Tensor::scalar(std::sqrt(s)),
                     [ia](const Tape& t, const Tensor& y, std::span<const double> g,
                          std::span<const GradSpan> gin) {
                       if (y[0] == 0.0) return;
                       const Tensor& x = t.value(ia);
                       for (std::size_t i = 0; i < x.size(); ++i) gin[0][i] += g[0] * x[i] / y[0];
                     });
}

// ---- linear algebra -------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  require_rank(vb, 2, "matmul rhs");
  const bool vec = va.rank() == 1;
  if (!vec) require_rank(va, 2, "matmul lhs");
  const std::size_t m = vec ? 1 : va.shape[0];
  const std::size_t k = vec ? va.shape[0] : va.shape[1];
  const std::size_t n = vb.shape[1];
  if (vb.shape[0] != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(va.shape) + " x " +
                         shape_string(vb.shape));
  }
  Tensor out(vec ? Shape{n} : Shape{m, n});
  MatMap(out.data.data(), m, n).noalias() = ConstMatMap(va.data.data(), m, k) * ConstMatMap(vb.data.data(), k, n);
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({a, b}, std::move(out),
                     [ia, ib, m, k, n](const Tape& t, const Tensor&, std::span<const double> g,
                                       std::span<const GradSpan> gin) {
                       ConstMatMap gm(g.data(), m, n);
                       if (!gin[0].empty()) {
                         MatMap(gin[0].data(), m, k).noalias() +=
                             gm * ConstMatMap(t.value(ib).data.data(), k, n).transpose();
                       }
                       if (!gin[1].empty()) {
                         MatMap(gin[1].data(), k, n).noalias() +=
                             ConstMatMap(t.value(ia).data.data(), m, k).transpose() * gm;
                       }
                     });
}

Var transpose(const Var& a) {
  Tape& tape = tape_of(a);
  const Tensor& va = a.value();
  require_rank(va, 2, "transpose");
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor out({c, r});
  MatMap(out.data.data(), c, r) = ConstMatMap(va.data.data(), r, c).transpose();
  return tape.record({a}, std::move(out),
                     [r, c](const Tape&, const Tensor&, std::span<const double> g, std::span<const GradSpan> gin) {
                       MatMap(gin[0].data(), r, c) += ConstMatMap(g.data(), c, r).transpose();
                     });
}

// ---- structural -------------------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  Tape& tape = tape_of(a);
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().data);
  return tape.record({a}, std::move(out),
                     [](const Tape&, const Tensor&, std::span<const double> g, std::span<const GradSpan> gin) {
                       for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] += g[i];
                     });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat of nothing");
  Tape& tape = tape_of(parts[0]);
  std::vector<double> data;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    tape.check_owner(p);
    require_rank(p.value(), 1, "concat");
    data.insert(data.end(), p.value().data.begin(), p.value().data.end());
    sizes.push_back(p.size());
  }
  return tape.record(parts, Tensor::vector(std::move(data)),
                     [sizes](const Tape&, const Tensor&, std::span<const double> g,
                             std::span<const GradSpan> gin) {
                       std::size_t off = 0;
                       for (std::size_t p = 0; p < sizes.size(); ++p) {
                         if (!gin[p].empty()) {
                           for (std::size_t i = 0; i < sizes[p]; ++i) gin[p][i] += g[off + i];
                         }
                         off += sizes[p];
                       }
                     });
}

Var element(const Var& a, std::size_t i) {
  Tape& tape = tape_of(a);
  if (i >= a.size()) throw DimensionError("element index out of range");
  return tape.record({a}, Tensor::scalar(a.value()[i]),
                     [i](const Tape&, const Tensor&, std::span<const double> g, std::span<const GradSpan> gin) {
                       gin[0][i] += g[0];
                     });
}

Var gather_rows(const Var& a, std::span<const std::size_t> idx) {
  Tape& tape = tape_of(a);
  const Tensor& va = a.value();
  require_rank(va, 2, "gather_rows");
  const std::size_t rows = va.shape[0], k = va.shape[1];
  Tensor out({idx.size(), k});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) throw DimensionError("gather_rows index out of range");
    std::copy_n(va.data.begin() + static_cast<std::ptrdiff_t>(idx[r] * k), k,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * k));
  }
  std::vector<std::size_t> index(idx.begin(), idx.end());
  return tape.record({a}, std::move(out),
                     [index = std::move(index), k](const Tape&, const Tensor&, std::span<const double> g,
                                                   std::span<const GradSpan> gin) {
                       for (std::size_t r = 0; r < index.size(); ++r) {
                         for (std::size_t c = 0; c < k; ++c) gin[0][index[r] * k + c] += g[r * k + c];
                       }
                     });
}

Var row_dot(const Var& a, const Var& b) {
  Tape& tape = common_tape(a, b);
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  require_rank(va, 2, "row_dot");
  if (va.shape != vb.shape) {
    throw DimensionError("row_dot: " + shape_string(va.shape) + " vs " + shape_string(vb.shape));
  }
  const std::size_t n = va.shape[0], k = va.shape[1];
  Tensor out({n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += va[r * k + c] * vb[r * k + c];
    out[r] = s;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record({a, b}, std::move(out),
                     [ia, ib, n, k](const Tape& t, const Tensor&, std::span<const double> g,
                                    std::span<const GradSpan> gin) {
                       const Tensor& xa = t.value(ia);
                       const Tensor& xb = t.value(ib);
                       for (std::size_t r = 0; r < n; ++r) {
                         for (std::size_t c = 0; c < k; ++c) {
                           const std::size_t i = r * k + c;
                           if (!gin[0].empty()) gin[0][i] += g[r] * xb[i];
                           if (!gin[1].empty()) gin[1][i] += g[r] * xa[i];
                         }
                       }
                     });
}

Var row_normalize(const Var& a) {
  Tape& tape = tape_of(a);
  const Tensor& va = a.value();
  require_rank(va, 2, "row_normalize");
  const std::size_t n = va.shape[0], k = va.shape[1];
  Tensor out(va.shape);
  std::vector<double> norms(n);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += va[r * k + c] * va[r * k + c];
    norms[r] = std::sqrt(s);
    if (norms[r] > 0.0) {
      for (std::size_t c = 0; c < k; ++c) out[r * k + c] = va[r * k + c] / norms[r];
    }
  }
  return tape.record({a}, std::move(out),
                     [norms = std::move(norms), n, k](const Tape&, const Tensor& y, std::span<const double> g,
                                                      std::span<const GradSpan> gin) {
                       for (std::size_t r = 0; r < n; ++r) {
                         if (norms[r] == 0.0) continue;
                         double proj = 0.0;
                         for (std::size_t c = 0; c < k; ++c) proj += g[r * k + c] * y[r * k + c];
                         for (std::size_t c = 0; c < k; ++c) {
                           const std::size_t i = r * k + c;
                           gin[0][i] += (g[i] - proj * y[i]) / norms[r];
                         }
                       }
                     });
}

// ---- gradient checking --------------------------------------------------------------

double grad_check(const std::function<Var(Tape&, std::span<const Var>)>& f, std::span<const Tensor> inputs,
                  double h) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
    const Var out = f(tape, vars);
    const Gradients grads = tape.backward(out);
    for (const Var& v : vars) analytic.push_back(grads[v]);
  }
  auto evaluate = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : values) vars.push_back(tape.leaf(t, false));
    return f(tape, vars).item();
  };

  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double x0 = probe[k][i];
      probe[k][i] = x0 + h;
      const double fp = evaluate(probe);
      probe[k][i] = x0 - h;
      const double fm = evaluate(probe);
      probe[k][i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace footfit::ad
