#include "hyloc/autodiff.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "hyloc/errors.hpp"

namespace hyloc::nn {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
using Shape = std::vector<std::size_t>;

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_fail(const std::string& op, const Tensor& a, const Tensor& b) {
  throw ShapeError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

/// (rows, cols) view of a rank-1 or rank-2 tensor.
std::pair<Eigen::Index, Eigen::Index> as_matrix(const Tensor& t, const std::string& op) {
  if (t.rank() == 1) return {1, static_cast<Eigen::Index>(t.dim(0))};
  if (t.rank() == 2) return {static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
  throw ShapeError(op + ": expected rank 1 or 2, got " + t.shape_str());
}

CMapR cmap(const Tensor& t, Eigen::Index r, Eigen::Index c) { return CMapR(t.data(), r, c); }
MapR map(Tensor& t, Eigen::Index r, Eigen::Index c) { return MapR(t.data(), r, c); }

Eigen::Map<const Eigen::ArrayXd> carr(const Tensor& t) {
  return Eigen::Map<const Eigen::ArrayXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}
Eigen::Map<Eigen::ArrayXd> arr(Tensor& t) {
  return Eigen::Map<Eigen::ArrayXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

Tape& tape_of(Var a) {
  if (!a.tape) throw ArgumentError("variable is not attached to a tape");
  return *a.tape;
}

void same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw ArgumentError("variables live on different tapes");
}

}  // namespace

// --- Tensor ------------------------------------------------------------------------

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != product(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " + shape_str());
}

Tensor Tensor::vec(std::initializer_list<double> values) { return Tensor({values.size()}, std::vector<double>(values)); }

std::string Tensor::shape_str() const { return nn::shape_str(shape_); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// --- Tape ------------------------------------------------------------------------------

const Tensor& Var::value() const { return tape_of(*this).value(*this); }

Var Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Var Tape::leaf(Tensor value) {
  Var v = push(std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::push(Tensor value, std::vector<std::size_t> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_slot(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.grad.empty() ? Tensor(n.value.shape(), 0.0) : n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ArgumentError("backward: loss is not on this tape");
  if (nodes_[loss.id].value.size() != 1)
    throw ArgumentError("backward: loss must be scalar, got shape " + nodes_[loss.id].value.shape_str());
  for (auto& n : nodes_) n.grad = Tensor();
  grad_slot(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

// --- ops ----------------------------------------------------------------------------------

Var matmul_t(Var x, Var w) {
  same_tape(x, w);
  Tape& tp = tape_of(x);
  const Tensor& X = tp.value(x);
  const Tensor& W = tp.value(w);
  const auto [rows, n] = as_matrix(X, "matmul_t");
  if (W.rank() != 2 || static_cast<Eigen::Index>(W.dim(1)) != n) shape_fail("matmul_t", X, W);
  const auto m = static_cast<Eigen::Index>(W.dim(0));
  Tensor y(X.rank() == 1 ? Shape{W.dim(0)} : Shape{X.dim(0), W.dim(0)});
  map(y, rows, m).noalias() = cmap(X, rows, n) * cmap(W, m, n).transpose();
  return tp.push(std::move(y), {x.id, w.id}, [xi = x.id, wi = w.id, rows, n, m](Tape& t, std::size_t self) {
    const auto g = cmap(t.grad_of(self), rows, m);
    if (t.needs_grad(xi)) map(t.grad_slot(xi), rows, n).noalias() += g * cmap(t.value(Var{&t, wi}), m, n);
    if (t.needs_grad(wi)) map(t.grad_slot(wi), m, n).noalias() += g.transpose() * cmap(t.value(Var{&t, xi}), rows, n);
  });
}

Var dense(Var x, Var w, Var b) {
  same_tape(x, b);
  Tape& tp = tape_of(x);
  const Tensor& W = tp.value(w);
  const Tensor& B = tp.value(b);
  if (B.rank() != 1 || W.rank() != 2 || B.dim(0) != W.dim(0)) shape_fail("dense (bias)", W, B);
  Var xw = matmul_t(x, w);
  Tensor y = tp.value(xw);
  const auto m = static_cast<Eigen::Index>(B.dim(0));
  const auto rows = static_cast<Eigen::Index>(y.size()) / m;
  map(y, rows, m).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tp.value(b).data(), m);
  return tp.push(std::move(y), {xw.id, b.id}, [xwi = xw.id, bi = b.id, rows, m](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(xwi)) arr(t.grad_slot(xwi)) += carr(g);
    if (t.needs_grad(bi))
      Eigen::Map<Eigen::RowVectorXd>(t.grad_slot(bi).data(), m) += cmap(g, rows, m).colwise().sum();
  });
}

namespace {

template <class Fwd, class Bwd>
Var binary_elementwise(const char* name, Var a, Var b, Fwd fwd, Bwd bwd) {
  same_tape(a, b);
  Tape& tp = tape_of(a);
  const Tensor& A = tp.value(a);
  const Tensor& B = tp.value(b);
  if (A.shape() != B.shape()) shape_fail(name, A, B);
  Tensor y(A.shape());
  arr(y) = fwd(carr(A), carr(B));
  return tp.push(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id, bwd](Tape& t, std::size_t self) {
    bwd(t, self, ai, bi);
  });
}

template <class Fwd, class Deriv>
Var unary_elementwise(Var a, Fwd fwd, Deriv deriv) {
  Tape& tp = tape_of(a);
  Tensor y(tp.value(a).shape());
  arr(y) = fwd(carr(tp.value(a)));
  return tp.push(std::move(y), {a.id}, [ai = a.id, deriv](Tape& t, std::size_t self) {
    // deriv(input, output) -> d output / d input
    arr(t.grad_slot(ai)) += carr(t.grad_of(self)) * deriv(carr(t.value(Var{&t, ai})), carr(t.value(Var{&t, self})));
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      "add", a, b, [](const auto& x, const auto& y) { return x + y; },
      [](Tape& t, std::size_t self, std::size_t ai, std::size_t bi) {
        const auto g = carr(t.grad_of(self));
        if (t.needs_grad(ai)) arr(t.grad_slot(ai)) += g;
        if (t.needs_grad(bi)) arr(t.grad_slot(bi)) += g;
      });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      "sub", a, b, [](const auto& x, const auto& y) { return x - y; },
      [](Tape& t, std::size_t self, std::size_t ai, std::size_t bi) {
        const auto g = carr(t.grad_of(self));
        if (t.needs_grad(ai)) arr(t.grad_slot(ai)) += g;
        if (t.needs_grad(bi)) arr(t.grad_slot(bi)) -= g;
      });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      "mul", a, b, [](const auto& x, const auto& y) { return x * y; },
      [](Tape& t, std::size_t self, std::size_t ai, std::size_t bi) {
        const auto g = carr(t.grad_of(self));
        if (t.needs_grad(ai)) arr(t.grad_slot(ai)) += g * carr(t.value(Var{&t, bi}));
        if (t.needs_grad(bi)) arr(t.grad_slot(bi)) += g * carr(t.value(Var{&t, ai}));
      });
}

Var scale(Var a, double s) {
  return unary_elementwise(
      a, [s](const auto& x) { return x * s; },
      [s](const auto& x, const auto&) { return Eigen::ArrayXd::Constant(x.size(), s); });
}

Var sigmoid(Var a) {
  return unary_elementwise(
      a, [](const auto& x) { return 1.0 / (1.0 + (-x).exp()); },
      [](const auto&, const auto& y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_elementwise(
      a, [](const auto& x) { return x.tanh(); }, [](const auto&, const auto& y) { return 1.0 - y.square(); });
}

Var relu(Var a) {
  return unary_elementwise(
      a, [](const auto& x) { return x.max(0.0); },
      [](const auto& x, const auto&) { return (x > 0.0).template cast<double>(); });
}

Var concat(Var a, Var b) {
  same_tape(a, b);
  Tape& tp = tape_of(a);
  const Tensor& A = tp.value(a);
  const Tensor& B = tp.value(b);
  if (A.rank() == 0 || A.rank() != B.rank() ||
      !std::equal(A.shape().begin(), A.shape().end() - 1, B.shape().begin()))
    shape_fail("concat", A, B);
  const std::size_t p = A.shape().back();
  const std::size_t q = B.shape().back();
  const std::size_t rows = A.size() / p;
  Shape out_shape = A.shape();
  out_shape.back() = p + q;
  Tensor y(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * p, p, y.data() + r * (p + q));
    std::copy_n(B.data() + r * q, q, y.data() + r * (p + q) + p);
  }
  return tp.push(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id, p, q, rows](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    if (t.needs_grad(ai)) {
      Tensor& ga = t.grad_slot(ai);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < p; ++j) ga[r * p + j] += g[r * (p + q) + j];
    }
    if (t.needs_grad(bi)) {
      Tensor& gb = t.grad_slot(bi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < q; ++j) gb[r * q + j] += g[r * (p + q) + p + j];
    }
  });
}

Var slice_last(Var a, std::size_t begin, std::size_t end) {
  Tape& tp = tape_of(a);
  const Tensor& A = tp.value(a);
  if (A.rank() == 0 || begin >= end || end > A.shape().back())
    throw ShapeError("slice_last: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + A.shape_str());
  const std::size_t n = A.shape().back();
  const std::size_t w = end - begin;
  const std::size_t rows = A.size() / n;
  Shape out_shape = A.shape();
  out_shape.back() = w;
  Tensor y(out_shape);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(A.data() + r * n + begin, w, y.data() + r * w);
  return tp.push(std::move(y), {a.id}, [ai = a.id, n, w, begin, rows](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    Tensor& ga = t.grad_slot(ai);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) ga[r * n + begin + j] += g[r * w + j];
  });
}

Var conv1d(Var x, Var w, Var b) {
  same_tape(x, w);
  same_tape(x, b);
  Tape& tp = tape_of(x);
  const Tensor& X = tp.value(x);
  const Tensor& W = tp.value(w);
  const Tensor& Bias = tp.value(b);
  if (X.rank() != 2 && X.rank() != 3) throw ShapeError("conv1d: input must be [c_in x L] or [B x c_in x L], got " + X.shape_str());
  const bool batched = X.rank() == 3;
  const std::size_t batch = batched ? X.dim(0) : 1;
  const std::size_t ci = X.dim(batched ? 1 : 0);
  const std::size_t len = X.dim(batched ? 2 : 1);
  if (W.rank() != 3 || W.dim(1) != ci) shape_fail("conv1d", X, W);
  const std::size_t co = W.dim(0);
  const std::size_t k = W.dim(2);
  if (k % 2 == 0) throw ShapeError("conv1d: same padding needs an odd kernel, got " + W.shape_str());
  if (Bias.rank() != 1 || Bias.dim(0) != co) shape_fail("conv1d (bias)", W, Bias);
  const std::size_t pad = (k - 1) / 2;
  const std::size_t cols_n = batch * len;

  // im2col: cols(i*k + j, b*L + t) = x[b, i, t + j - pad]
  auto cols = std::make_shared<MatR>(MatR::Zero(static_cast<Eigen::Index>(ci * k), static_cast<Eigen::Index>(cols_n)));
  for (std::size_t bb = 0; bb < batch; ++bb)
    for (std::size_t i = 0; i < ci; ++i)
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t t = 0; t < len; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
          (*cols)(static_cast<Eigen::Index>(i * k + j), static_cast<Eigen::Index>(bb * len + t)) =
              X[(bb * ci + i) * len + static_cast<std::size_t>(src)];
        }
  const auto wmat = cmap(W, static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(ci * k));
  const MatR out = wmat * (*cols);

  Tensor y(batched ? Shape{batch, co, len} : Shape{co, len});
  for (std::size_t bb = 0; bb < batch; ++bb)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t t = 0; t < len; ++t)
        y[(bb * co + o) * len + t] = out(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(bb * len + t)) + Bias[o];

  return tp.push(std::move(y), {x.id, w.id, b.id},
                 [xi = x.id, wi = w.id, bi = b.id, cols, batch, ci, co, k, len, pad](Tape& t, std::size_t self) {
                   const Tensor& g = t.grad_of(self);
                   MatR gmat(static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(batch * len));
                   for (std::size_t bb = 0; bb < batch; ++bb)
                     for (std::size_t o = 0; o < co; ++o)
                       for (std::size_t tt = 0; tt < len; ++tt)
                         gmat(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(bb * len + tt)) =
                             g[(bb * co + o) * len + tt];
                   if (t.needs_grad(bi)) {
                     Tensor& gb = t.grad_slot(bi);
                     for (std::size_t o = 0; o < co; ++o) gb[o] += gmat.row(static_cast<Eigen::Index>(o)).sum();
                   }
                   if (t.needs_grad(wi))
                     map(t.grad_slot(wi), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(ci * k)).noalias() +=
                         gmat * cols->transpose();
                   if (t.needs_grad(xi)) {
                     const MatR gcols =
                         cmap(t.value(Var{&t, wi}), static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(ci * k))
                             .transpose() *
                         gmat;
                     Tensor& gx = t.grad_slot(xi);
                     for (std::size_t bb = 0; bb < batch; ++bb)
                       for (std::size_t i = 0; i < ci; ++i)
                         for (std::size_t j = 0; j < k; ++j)
                           for (std::size_t tt = 0; tt < len; ++tt) {
                             const std::ptrdiff_t src =
                                 static_cast<std::ptrdiff_t>(tt + j) - static_cast<std::ptrdiff_t>(pad);
                             if (src < 0 || src >= static_cast<std::ptrdiff_t>(len)) continue;
                             gx[(bb * ci + i) * len + static_cast<std::size_t>(src)] +=
                                 gcols(static_cast<Eigen::Index>(i * k + j), static_cast<Eigen::Index>(bb * len + tt));
                           }
                   }
                 });
}

Var channels_last(Var x) {
  Tape& tp = tape_of(x);
  const Tensor& X = tp.value(x);
  if (X.rank() != 2 && X.rank() != 3) throw ShapeError("channels_last: expected [C x L] or [B x C x L], got " + X.shape_str());
  const bool batched = X.rank() == 3;
  const std::size_t batch = batched ? X.dim(0) : 1;
  const std::size_t c = X.dim(batched ? 1 : 0);
  const std::size_t len = X.dim(batched ? 2 : 1);
  Tensor y({batch * len, c});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t t = 0; t < len; ++t) y[(b * len + t) * c + ch] = X[(b * c + ch) * len + t];
  return tp.push(std::move(y), {x.id}, [xi = x.id, batch, c, len](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t tt = 0; tt < len; ++tt) gx[(b * c + ch) * len + tt] += g[(b * len + tt) * c + ch];
  });
}

Var gather_step(Var x, std::size_t step, std::size_t steps) {
  Tape& tp = tape_of(x);
  const Tensor& X = tp.value(x);
  if (X.rank() != 2 || steps == 0 || X.dim(0) % steps != 0 || step >= steps)
    throw ShapeError("gather_step: step " + std::to_string(step) + " of " + std::to_string(steps) +
                     " invalid for shape " + X.shape_str());
  const std::size_t batch = X.dim(0) / steps;
  const std::size_t d = X.dim(1);
  Tensor y({batch, d});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(X.data() + (b * steps + step) * d, d, y.data() + b * d);
  return tp.push(std::move(y), {x.id}, [xi = x.id, batch, d, step, steps](Tape& t, std::size_t self) {
    const Tensor& g = t.grad_of(self);
    Tensor& gx = t.grad_slot(xi);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) gx[(b * steps + step) * d + j] += g[b * d + j];
  });
}

Var reshape(Var x, Shape shape) {
  Tape& tp = tape_of(x);
  const Tensor& X = tp.value(x);
  if (product(shape) != X.size())
    throw ShapeError("reshape: cannot view " + X.shape_str() + " as " + nn::shape_str(shape));
  Tensor y(std::move(shape), std::vector<double>(X.values().begin(), X.values().end()));
  return tp.push(std::move(y), {x.id}, [xi = x.id](Tape& t, std::size_t self) {
    arr(t.grad_slot(xi)) += carr(t.grad_of(self));
  });
}

Var flatten_batch(Var x) {
  const Tensor& X = tape_of(x).value(x);
  if (X.rank() != 3) throw ShapeError("flatten_batch: expected [B x C x L], got " + X.shape_str());
  return reshape(x, {X.dim(0), X.dim(1) * X.dim(2)});
}

Var unflatten_steps(Var x, std::size_t channels, std::size_t steps) {
  const Tensor& X = tape_of(x).value(x);
  if (X.rank() != 2 || X.dim(1) != channels * steps)
    throw ShapeError("unflatten_steps: " + X.shape_str() + " is not [B x " + std::to_string(channels) + "*" +
                     std::to_string(steps) + "]");
  return channels_last(reshape(x, {X.dim(0), channels, steps}));
}

Var sum(Var a) {
  Tape& tp = tape_of(a);
  Tensor y({1}, carr(tp.value(a)).sum());
  return tp.push(std::move(y), {a.id}, [ai = a.id](Tape& t, std::size_t self) {
    arr(t.grad_slot(ai)) += t.grad_of(self)[0];
  });
}

Var mean_squared_error(Var pred, Var target) {
  same_tape(pred, target);
  Tape& tp = tape_of(pred);
  const Tensor& P = tp.value(pred);
  const Tensor& T = tp.value(target);
  if (P.shape() != T.shape()) shape_fail("mean_squared_error", P, T);
  const double rows = P.rank() == 2 ? static_cast<double>(P.dim(0)) : 1.0;
  Tensor y({1}, (carr(P) - carr(T)).square().sum() / rows);
  return tp.push(std::move(y), {pred.id, target.id}, [pi = pred.id, ti = target.id, rows](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    const auto diff = carr(t.value(Var{&t, pi})) - carr(t.value(Var{&t, ti}));
    if (t.needs_grad(pi)) arr(t.grad_slot(pi)) += (2.0 * g / rows) * diff;
    if (t.needs_grad(ti)) arr(t.grad_slot(ti)) -= (2.0 * g / rows) * diff;
  });
}

std::pair<Var, Var> lstm_cell_projected(Var x_proj, Var h_prev, Var c_prev, const LstmParams& p) {
  const Tensor& wh = p.w_h.value();
  if (wh.rank() != 2 || wh.dim(0) != 4 * wh.dim(1)) throw ShapeError("lstm_cell: w_h must be [4H x H], got " + wh.shape_str());
  const std::size_t hidden = wh.dim(1);
  const Tensor& c0 = c_prev.value();
  if (c0.shape() != h_prev.value().shape() || c0.shape().back() != hidden)
    throw ShapeError("lstm_cell: state shapes " + h_prev.value().shape_str() + " / " + c0.shape_str() +
                     " do not match hidden size " + std::to_string(hidden));
  Var gates = add(x_proj, dense(h_prev, p.w_h, p.b));
  Var i = sigmoid(slice_last(gates, 0, hidden));
  Var f = sigmoid(slice_last(gates, hidden, 2 * hidden));
  Var g = tanh(slice_last(gates, 2 * hidden, 3 * hidden));
  Var o = sigmoid(slice_last(gates, 3 * hidden, 4 * hidden));
  Var c = add(mul(f, c_prev), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, const LstmParams& p) {
  const Tensor& wx = p.w_x.value();
  if (wx.rank() != 2 || wx.dim(0) != p.w_h.value().dim(0)) throw ShapeError("lstm_cell: w_x must be [4H x in], got " + wx.shape_str());
  return lstm_cell_projected(matmul_t(x, p.w_x), h_prev, c_prev, p);
}

// --- parameters -----------------------------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Tensor value) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter " + name);
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

std::size_t ParamStore::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ArgumentError("unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const { return values_[index(name)]; }
Tensor& ParamStore::get(const std::string& name) { return values_[index(name)]; }

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v.size();
  return n;
}

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ValidationError("parameter container truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

constexpr char kMagic[4] = {'H', 'Y', 'N', 'N'};
constexpr std::uint32_t kContainerVersion = 1;

}  // namespace

std::string ParamStore::serialize() const {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(names_[i].size()));
    out += names_[i];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(values_[i].rank()));
    for (auto d : values_[i].shape()) put<std::uint64_t>(out, d);
    for (double v : values_[i].values()) put<double>(out, v);
  }
  return out;
}

ParamStore ParamStore::deserialize(const std::string& in) {
  if (in.size() < 4 || in.compare(0, 4, kMagic, 4) != 0) throw ValidationError("not a parameter container");
  std::size_t pos = 4;
  if (take<std::uint32_t>(in, pos) != kContainerVersion) throw ValidationError("unsupported parameter container version");
  const auto count = take<std::uint32_t>(in, pos);
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = take<std::uint32_t>(in, pos);
    if (pos + len > in.size()) throw ValidationError("parameter container truncated");
    std::string name = in.substr(pos, len);
    pos += len;
    const auto rank = take<std::uint32_t>(in, pos);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<std::size_t>(take<std::uint64_t>(in, pos)));
    std::vector<double> data(product(shape));
    for (auto& v : data) v = take<double>(in, pos);
    store.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (pos != in.size()) throw ValidationError("trailing bytes in parameter container");
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {
  vars_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) vars_.push_back(tape.leaf(store.at(i)));
}

BoundParams::BoundParams(const ParamStore& store, std::vector<Var> vars)
    : tape_(vars.empty() ? nullptr : vars.front().tape), store_(&store), vars_(std::move(vars)) {
  if (vars_.size() != store.size())
    throw ArgumentError("BoundParams: " + std::to_string(vars_.size()) + " variables for " + std::to_string(store.size()) +
                        " parameters");
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].shape() != store.at(i).shape()) shape_fail("BoundParams", store.at(i), vars_[i].value());
}

std::vector<Tensor> BoundParams::grads() const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (auto v : vars_) out.push_back(tape_->grad(v));
  return out;
}

void adam_step(ParamStore& params, std::span<const Tensor> grads, AdamState& s) {
  if (grads.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) +
                     " parameters");
  if (s.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      s.m.emplace_back(params.at(i).shape(), 0.0);
      s.v.emplace_back(params.at(i).shape(), 0.0);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (grads[i].shape() != params.at(i).shape()) shape_fail("adam_step", params.at(i), grads[i]);
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = carr(grads[i]);
    auto m = arr(s.m[i]);
    auto v = arr(s.v[i]);
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.square();
    arr(params.at(i)) -= s.lr * (m / bc1) / ((v / bc2).sqrt() + s.eps);
  }
}

double clip_grad_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += carr(g).square().sum();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0)
    for (auto& g : grads) arr(g) *= max_norm / norm;
  return norm;
}

GradCheckResult gradient_check(const LossFn& fn, std::span<const Tensor> inputs, double eps, std::size_t max_entries) {
  auto evaluate = [&](const std::vector<Tensor>& in) {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& t : in) vars.push_back(tape.leaf(t));
    return tape.value(fn(tape, vars))[0];
  };

  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t));
  const Var loss = fn(tape, vars);
  tape.backward(loss);

  GradCheckResult res;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor analytic = tape.grad(vars[i]);
    const std::size_t n = inputs[i].size();
    const std::size_t stride = (max_entries == 0 || n <= max_entries) ? 1 : (n + max_entries - 1) / max_entries;
    for (std::size_t j = 0; j < n; j += stride) {
      const double orig = probe[i][j];
      probe[i][j] = orig + eps;
      const double up = evaluate(probe);
      probe[i][j] = orig - eps;
      const double down = evaluate(probe);
      probe[i][j] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      res.max_rel_error = std::max(res.max_rel_error, rel);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace hyloc::nn
