#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vt {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

// Dense 64-bit tensor. Copies share storage; ops on a Tape record
// provenance so backward() can fill grads of requires_grad leaves.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int size() const { return static_cast<int>(d_->v.size()); }
  int rows() const;
  int cols() const;

  std::vector<double>& values() { return d_->v; }
  const std::vector<double>& values() const { return d_->v; }
  double item() const;

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  bool has_grad() const { return !d_->g.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void ensure_grad();
  void zero_grad();

  // identity of the underlying storage, used by the tape
  const void* id() const { return d_.get(); }

 private:
  struct Data {
    Shape shape;
    std::vector<double> v;
    std::vector<double> g;
    bool requires_grad = false;
  };
  std::shared_ptr<Data> d_;
};

enum class Primitive {
  kMatmul,
  kAdd,
  kMul,
  kTanh,
  kSigmoid,
  kSoftmax,
  kLog,
  kConcat,
  kEmbeddingLookup,
  kLayerNorm,
  kLstmCell,
  kLinear,
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// Records forward primitives; backward() replays them in reverse.
// Single-threaded by contract.
class Tape {
 public:
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);  // same shape, or [m x n] + [n] row bias
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor tanh(const Tensor& x);
  Tensor sigmoid(const Tensor& x);
  Tensor softmax(const Tensor& x);  // over the last axis, rowwise for matrices
  Tensor log(const Tensor& x);
  Tensor concat(const std::vector<Tensor>& xs, int axis = 0);
  Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);
  Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
  LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                      const Tensor& w, const Tensor& b);
  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

  // non-spec helpers, recorded like any other primitive
  Tensor sum(const Tensor& x);
  Tensor scale(const Tensor& x, double c);
  Tensor add_const(const Tensor& x, double c);
  Tensor pick(const Tensor& x, int index);  // scalar x[index] from a vector
  Tensor reshape(const Tensor& x, Shape shape);
  Tensor min_elem(const Tensor& a, const Tensor& b);
  Tensor scatter_add(const Tensor& src, const std::vector<int>& ids, int size);
  Tensor mask_add(const Tensor& x, const std::vector<double>& mask);  // mask is constant
  Tensor transpose(const Tensor& x);
  Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);
  Tensor mul_scalar(const Tensor& x, const Tensor& s);  // s is a [1] tensor

  // dispatcher over the closed primitive set; ids for embedding_lookup are
  // passed as a tensor of integral values; lstm_cell yields [h'; c'] stacked
  Tensor forward(Primitive p, const std::vector<Tensor>& inputs);

  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  void record(std::function<void()> back) { nodes_.push_back(std::move(back)); }
  std::vector<std::function<void()>> nodes_;
};

// Max over components of |analytic - central difference| / (|cd| + 1e-8).
double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  Tensor x, double eps = 1e-5);

}  // namespace vt
