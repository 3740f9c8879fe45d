#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <map>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hyloc::nn {

/// Allocator with a fixed 64-byte alignment. Vectorized kernels pick their
/// code path from the buffer alignment, so a fixed alignment keeps results
/// bit-identical from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

/// Dense row-major float64 array.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vec(std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::string shape_str() const;
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  /// Copy, so it stays valid when the tape grows.
  std::vector<std::size_t> shape() const { return value().shape(); }
};

/// Reverse-mode recording. Nodes are appended in evaluation order, which is a
/// topological order, so backward simply walks the list in reverse.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  /// Input that never receives a gradient.
  Var constant(Tensor value);
  /// Differentiable leaf (a parameter).
  Var leaf(Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated by backward(); zeros when the node was not reached.
  Tensor grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// d loss / d node for every node feeding `loss`. Throws ArgumentError
  /// unless loss holds exactly one element. May be called repeatedly; each
  /// call starts from zeroed gradients.
  void backward(Var loss);

  // Used by op implementations.
  Var push(Tensor value, std::vector<std::size_t> parents, Backward backward);
  Tensor& grad_slot(std::size_t id);
  const Tensor& grad_of(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// --- ops ----------------------------------------------------------------------
// Shapes: a "batch" input is [B x n]; an unbatched input is [n]. Mismatches
// throw ShapeError naming both shapes.

/// x W^T + b; x [n] or [B x n], W [m x n], b [m].
Var dense(Var x, Var w, Var b);
/// x W^T without bias.
Var matmul_t(Var x, Var w);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
/// Concatenation along the last axis.
Var concat(Var a, Var b);
/// Columns [begin, end) of the last axis.
Var slice_last(Var a, std::size_t begin, std::size_t end);
/// Same-padded 1D cross-correlation, stride 1:
/// y[o, t] = b[o] + sum_{i, j} w[o, i, j] * x[i, t + j - (k - 1) / 2], zeros outside.
/// x [c_in x L] or [B x c_in x L]; w [c_out x c_in x k] with k odd; b [c_out].
Var conv1d(Var x, Var w, Var b);
/// [B x C x L] -> [B*L x C] with row b*L + t (a [C x L] input gives [L x C]).
Var channels_last(Var x);
/// Rows b*L + t of a [B*L x D] tensor -> [B x D].
Var gather_step(Var x, std::size_t t, std::size_t steps);
/// [B x C x L] -> [B x C*L].
Var flatten_batch(Var x);
/// [B x C*L] -> [B*L x C] with row b*L + t taking entries (c, t).
Var unflatten_steps(Var x, std::size_t channels, std::size_t steps);
Var reshape(Var x, std::vector<std::size_t> shape);
/// Sum of all elements -> [1].
Var sum(Var a);
/// mean over rows of the squared Euclidean row difference -> [1].
Var mean_squared_error(Var pred, Var target);

struct LstmParams {
  Var w_x;  // [4H x in], gate blocks i, f, g, o
  Var w_h;  // [4H x H]
  Var b;    // [4H]
};

/// Standard LSTM cell; returns (h, c). `x_proj`, when given, is the already
/// computed x W_x^T (used to batch the input projection over time).
std::pair<Var, Var> lstm_cell(Var x, Var h_prev, Var c_prev, const LstmParams& p);
std::pair<Var, Var> lstm_cell_projected(Var x_proj, Var h_prev, Var c_prev, const LstmParams& p);

// --- parameters -------------------------------------------------------------------

/// Ordered named tensors.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor value);
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t index(const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& at(std::size_t i) const { return values_[i]; }
  Tensor& at(std::size_t i) { return values_[i]; }
  /// Total scalar parameter count.
  std::size_t count() const;

  /// Binary container: "HYNN" magic, u32 version, u32 tensor count, then per
  /// tensor u32 name length, name bytes, u32 rank, u64 dims, f64 data; all
  /// little-endian.
  std::string serialize() const;
  static ParamStore deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

/// Parameters placed on a tape as leaves, in store order.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store);
  /// Uses existing tape variables (one per store entry, same order).
  BoundParams(const ParamStore& store, std::vector<Var> vars);
  Var operator[](const std::string& name) const { return vars_[store_->index(name)]; }
  Var at(std::size_t i) const { return vars_[i]; }
  /// Gradients after tape.backward, aligned with the store.
  std::vector<Tensor> grads() const;

 private:
  Tape* tape_;
  const ParamStore* store_;
  std::vector<Var> vars_;
};

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

/// Bias-corrected Adam update of every tensor in `params`.
void adam_step(ParamStore& params, std::span<const Tensor> grads, AdamState& state);

/// Scales gradients so their global L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_grad_norm(std::span<Tensor> grads, double max_norm);

// --- gradient checking ---------------------------------------------------------------

/// Builds a scalar loss from tape leaves holding the given inputs.
using LossFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients with central differences of step eps.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
/// `max_entries` caps the entries probed per input (evenly strided); 0 = all.
GradCheckResult gradient_check(const LossFn& fn, std::span<const Tensor> inputs, double eps = 1e-5,
                               std::size_t max_entries = 0);

}  // namespace hyloc::nn
