#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace skelcast::ad {

// Dense rank-1/rank-2 tensor of doubles, row-major. A tensor is either a
// plain value (node < 0) or additionally a handle into the tape that
// produced it. Detached tensors never receive gradients.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  int node = -1;
  std::uint64_t tape_id = 0;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<double> d);

  static Tensor zeros(std::vector<int> shape);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(int rows, int cols, std::vector<double> v);

  int rank() const { return static_cast<int>(shape.size()); }
  std::size_t size() const { return data.size(); }
  int rows() const { return shape.at(0); }
  int cols() const { return rank() == 2 ? shape[1] : 1; }
  bool is_scalar() const { return data.size() == 1; }
  double value() const;  // scalar accessor, throws on non-scalar
  double& at(int i, int j) { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  double at(int i, int j) const { return data[static_cast<std::size_t>(i) * shape[1] + j]; }
  bool attached() const { return node >= 0; }
  Tensor detached() const;
  std::string shape_str() const;
};

enum class Activation { kRelu, kSigmoid, kTanh };
enum class Elementwise { kAdd, kSub, kMul };

// Recorded computation graph. Nodes are appended in execution order, so
// insertion order is a topological order; the backward pass walks it
// once in reverse. Tensors from other tapes (or plain values) passed
// into an operation are promoted to constant leaves of this tape.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers an input/parameter value. Gradients can be queried for
  // the returned handle after backward().
  Tensor leaf(const Tensor& value);

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor elementwise(const Tensor& a, const Tensor& b, Elementwise kind);
  Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::kAdd); }
  Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::kSub); }
  Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, Elementwise::kMul); }
  // Elementwise a*x + b with constant coefficients (the only scalar
  // broadcasting supported).
  Tensor affine(const Tensor& x, double a, double b);
  Tensor activation(const Tensor& x, Activation kind);
  Tensor relu(const Tensor& x) { return activation(x, Activation::kRelu); }
  Tensor sigmoid(const Tensor& x) { return activation(x, Activation::kSigmoid); }
  Tensor tanh(const Tensor& x) { return activation(x, Activation::kTanh); }
  // Numerically stable softmax over a rank-1 tensor.
  Tensor softmax(const Tensor& z);
  Tensor concat(const Tensor& a, const Tensor& b);
  Tensor stack_rows(std::span<const Tensor> rows);
  Tensor row(const Tensor& m, int index);
  Tensor sum(const Tensor& x);
  Tensor reshape(const Tensor& x, std::vector<int> shape);

  // Populates the gradient store for every node reachable from `loss`
  // (a scalar node of this tape); everything else reads as zero.
  void backward(const Tensor& loss);

  // Gradient of the last backward() w.r.t. `t`, flattened. Detached or
  // unreachable tensors yield zeros.
  std::vector<double> grad(const Tensor& t) const;

  std::size_t num_nodes() const { return nodes_.size(); }
  std::uint64_t id() const { return id_; }

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kAdd,
    kSub,
    kMul,
    kAffine,
    kRelu,
    kSigmoid,
    kTanh,
    kSoftmax,
    kConcat,
    kStack,
    kRow,
    kSum,
    kReshape,
  };

  struct Node {
    Op op;
    std::array<int, 2> in{-1, -1};
    std::vector<int> multi_in;  // stack_rows inputs
    Tensor value;               // forward result
    double a = 0.0, b = 0.0;    // affine coefficients / row index
  };

  int use(const Tensor& t);  // node id, promoting foreign tensors to leaves
  Tensor push(Node node);
  std::vector<double>& grad_buffer(int node);

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;  // empty slot == zero
};

// --- gradient checking ---------------------------------------------------

// Scalar objective built on a fresh tape from leaf handles of the
// parameters, in the same order they were supplied.
using LossFn = std::function<Tensor(Tape&, std::span<const Tensor>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  int param = -1;  // worst parameter / flat entry
  int entry = -1;
};

std::vector<Tensor> analytic_gradients(const LossFn& f, const std::vector<Tensor>& params);
// Central differences; evaluates f twice per parameter entry.
std::vector<Tensor> numeric_gradients(const LossFn& f, std::vector<Tensor> params, double h);
// max over entries of |analytic - numeric| / max(1e-8, |analytic| + |numeric|)
GradCheckReport max_relative_error(const std::vector<Tensor>& analytic,
                                   const std::vector<Tensor>& numeric);
GradCheckReport grad_check(const LossFn& f, const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace skelcast::ad
