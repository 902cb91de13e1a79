#include "skelcast/tensor.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <sstream>

#include "skelcast/errors.hpp"

namespace skelcast::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

std::atomic<std::uint64_t> g_next_tape_id{1};

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int e : shape) n *= static_cast<std::size_t>(e);
  return n;
}

// Views a rank-1/rank-2 tensor as a matrix. Rank-1 tensors are read as a
// row (as_row) or column vector depending on their operand position.
ConstMatMap as_matrix(const Tensor& t, bool as_row) {
  if (t.rank() == 2) return ConstMatMap(t.data.data(), t.shape[0], t.shape[1]);
  const int n = t.shape[0];
  return as_row ? ConstMatMap(t.data.data(), 1, n) : ConstMatMap(t.data.data(), n, 1);
}

}  // namespace

Tensor::Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape.empty() || shape.size() > 2)
    throw ShapeError("tensor rank must be 1 or 2, got rank " + std::to_string(shape.size()));
  for (int e : shape)
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str());
  if (numel(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int> shape) {
  std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  int n = static_cast<int>(v.size());
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

double Tensor::value() const {
  if (!is_scalar()) throw ShapeError("expected a scalar tensor, got shape " + shape_str());
  return data[0];
}

Tensor Tensor::detached() const {
  Tensor t;
  t.shape = shape;
  t.data = data;
  return t;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

int Tape::use(const Tensor& t) {
  if (t.node >= 0 && t.tape_id == id_) return t.node;
  return leaf(t).node;
}

Tensor Tape::push(Node node) {
  Tensor out = node.value;  // value copy stays on the node for backward
  nodes_.push_back(std::move(node));
  out.node = static_cast<int>(nodes_.size()) - 1;
  out.tape_id = id_;
  return out;
}

Tensor Tape::leaf(const Tensor& value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = value.detached();
  return push(std::move(n));
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  auto am = as_matrix(a, /*as_row=*/true);
  auto bm = as_matrix(b, /*as_row=*/false);
  if (am.cols() != bm.rows())
    throw ShapeError("matmul: inner dimensions disagree: " + a.shape_str() + " vs " + b.shape_str());

  Node n;
  n.op = Op::kMatmul;
  n.in = {use(a), use(b)};
  std::vector<int> out_shape;
  if (a.rank() == 2 && b.rank() == 2)
    out_shape = {static_cast<int>(am.rows()), static_cast<int>(bm.cols())};
  else if (a.rank() == 2)
    out_shape = {static_cast<int>(am.rows())};  // (m,k)·(k) -> (m)
  else if (b.rank() == 2)
    out_shape = {static_cast<int>(bm.cols())};  // (k)·(k,n) -> (n)
  else
    out_shape = {1};  // dot product
  n.value = Tensor::zeros(std::move(out_shape));
  MatMap(n.value.data.data(), am.rows(), bm.cols()).noalias() = am * bm;
  return push(std::move(n));
}

Tensor Tape::elementwise(const Tensor& a, const Tensor& b, Elementwise kind) {
  if (a.shape != b.shape)
    throw ShapeError("elementwise: shapes disagree: " + a.shape_str() + " vs " + b.shape_str());
  Node n;
  n.op = kind == Elementwise::kAdd ? Op::kAdd : kind == Elementwise::kSub ? Op::kSub : Op::kMul;
  n.in = {use(a), use(b)};
  n.value = a.detached();
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    switch (kind) {
      case Elementwise::kAdd: n.value.data[i] = a.data[i] + b.data[i]; break;
      case Elementwise::kSub: n.value.data[i] = a.data[i] - b.data[i]; break;
      case Elementwise::kMul: n.value.data[i] = a.data[i] * b.data[i]; break;
    }
  }
  return push(std::move(n));
}

Tensor Tape::affine(const Tensor& x, double a, double b) {
  Node n;
  n.op = Op::kAffine;
  n.in = {use(x), -1};
  n.a = a;
  n.b = b;
  n.value = x.detached();
  for (double& v : n.value.data) v = a * v + b;
  return push(std::move(n));
}

Tensor Tape::activation(const Tensor& x, Activation kind) {
  Node n;
  n.op = kind == Activation::kRelu   ? Op::kRelu
         : kind == Activation::kSigmoid ? Op::kSigmoid
                                        : Op::kTanh;
  n.in = {use(x), -1};
  n.value = x.detached();
  for (double& v : n.value.data) {
    switch (kind) {
      case Activation::kRelu: v = v > 0.0 ? v : 0.0; break;
      case Activation::kSigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
      case Activation::kTanh: v = std::tanh(v); break;
    }
  }
  return push(std::move(n));
}

Tensor Tape::softmax(const Tensor& z) {
  if (z.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor, got " + z.shape_str());
  Node n;
  n.op = Op::kSoftmax;
  n.in = {use(z), -1};
  n.value = z.detached();
  double mx = n.value.data[0];
  for (double v : n.value.data) mx = std::max(mx, v);
  double total = 0.0;
  for (double& v : n.value.data) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : n.value.data) v /= total;
  return push(std::move(n));
}

Tensor Tape::concat(const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw ShapeError("concat expects rank-1 tensors, got " + a.shape_str() + " and " + b.shape_str());
  Node n;
  n.op = Op::kConcat;
  n.in = {use(a), use(b)};
  n.value = Tensor::zeros({a.shape[0] + b.shape[0]});
  std::copy(a.data.begin(), a.data.end(), n.value.data.begin());
  std::copy(b.data.begin(), b.data.end(), n.value.data.begin() + a.shape[0]);
  return push(std::move(n));
}

Tensor Tape::stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: needs at least one row");
  const int width = rows[0].shape[0];
  Node n;
  n.op = Op::kStack;
  n.value = Tensor::zeros({static_cast<int>(rows.size()), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].rank() != 1 || rows[i].shape[0] != width)
      throw ShapeError("stack_rows: row " + std::to_string(i) + " has shape " +
                       rows[i].shape_str() + ", expected [" + std::to_string(width) + "]");
    n.multi_in.push_back(use(rows[i]));
    std::copy(rows[i].data.begin(), rows[i].data.end(),
              n.value.data.begin() + static_cast<std::ptrdiff_t>(i) * width);
  }
  return push(std::move(n));
}

Tensor Tape::row(const Tensor& m, int index) {
  if (m.rank() != 2) throw ShapeError("row expects a rank-2 tensor, got " + m.shape_str());
  if (index < 0 || index >= m.shape[0])
    throw ShapeError("row index " + std::to_string(index) + " out of range for " + m.shape_str());
  Node n;
  n.op = Op::kRow;
  n.in = {use(m), -1};
  n.a = index;
  n.value = Tensor::zeros({m.shape[1]});
  std::copy(m.data.begin() + static_cast<std::ptrdiff_t>(index) * m.shape[1],
            m.data.begin() + static_cast<std::ptrdiff_t>(index + 1) * m.shape[1],
            n.value.data.begin());
  return push(std::move(n));
}

Tensor Tape::sum(const Tensor& x) {
  Node n;
  n.op = Op::kSum;
  n.in = {use(x), -1};
  double total = 0.0;
  for (double v : x.data) total += v;
  n.value = Tensor::scalar(total);
  return push(std::move(n));
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + x.shape_str() + " as " +
                     Tensor::zeros(shape).shape_str());
  Node n;
  n.op = Op::kReshape;
  n.in = {use(x), -1};
  n.value = Tensor(std::move(shape), x.data);
  return push(std::move(n));
}

std::vector<double>& Tape::grad_buffer(int node) {
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(node)].value.size(), 0.0);
  return g;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.attached() || loss.tape_id != id_)
    throw std::invalid_argument("backward: loss is not a node of this tape");
  if (!loss.is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got shape " + loss.shape_str());

  grads_.assign(nodes_.size(), {});
  grad_buffer(loss.node)[0] = 1.0;

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty()) continue;  // not reachable from the loss
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatmul: {
        const Tensor& a = nodes_[n.in[0]].value;
        const Tensor& b = nodes_[n.in[1]].value;
        auto am = as_matrix(a, true);
        auto bm = as_matrix(b, false);
        ConstMatMap gm(g.data(), am.rows(), bm.cols());
        MatMap(grad_buffer(n.in[0]).data(), am.rows(), am.cols()).noalias() += gm * bm.transpose();
        MatMap(grad_buffer(n.in[1]).data(), bm.rows(), bm.cols()).noalias() += am.transpose() * gm;
        break;
      }
      case Op::kAdd: {
        auto& ga = grad_buffer(n.in[0]);
        auto& gb = grad_buffer(n.in[1]);
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga[k] += g[k];
          gb[k] += g[k];
        }
        break;
      }
      case Op::kSub: {
        auto& ga = grad_buffer(n.in[0]);
        auto& gb = grad_buffer(n.in[1]);
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga[k] += g[k];
          gb[k] -= g[k];
        }
        break;
      }
      case Op::kMul: {
        const auto& a = nodes_[n.in[0]].value.data;
        const auto& b = nodes_[n.in[1]].value.data;
        auto& ga = grad_buffer(n.in[0]);
        auto& gb = grad_buffer(n.in[1]);
        for (std::size_t k = 0; k < g.size(); ++k) {
          ga[k] += g[k] * b[k];
          gb[k] += g[k] * a[k];
        }
        break;
      }
      case Op::kAffine: {
        auto& gx = grad_buffer(n.in[0]);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += n.a * g[k];
        break;
      }
      case Op::kRelu: {
        const auto& x = nodes_[n.in[0]].value.data;
        auto& gx = grad_buffer(n.in[0]);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += x[k] > 0.0 ? g[k] : 0.0;
        break;
      }
      case Op::kSigmoid: {
        const auto& y = n.value.data;
        auto& gx = grad_buffer(n.in[0]);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * y[k] * (1.0 - y[k]);
        break;
      }
      case Op::kTanh: {
        const auto& y = n.value.data;
        auto& gx = grad_buffer(n.in[0]);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k] * (1.0 - y[k] * y[k]);
        break;
      }
      case Op::kSoftmax: {
        const auto& y = n.value.data;
        auto& gx = grad_buffer(n.in[0]);
        double dot = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) dot += g[k] * y[k];
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += y[k] * (g[k] - dot);
        break;
      }
      case Op::kConcat: {
        auto& ga = grad_buffer(n.in[0]);
        auto& gb = grad_buffer(n.in[1]);
        for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k];
        for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g[ga.size() + k];
        break;
      }
      case Op::kStack: {
        const std::size_t width = static_cast<std::size_t>(n.value.shape[1]);
        for (std::size_t r = 0; r < n.multi_in.size(); ++r) {
          auto& gr = grad_buffer(n.multi_in[r]);
          for (std::size_t k = 0; k < width; ++k) gr[k] += g[r * width + k];
        }
        break;
      }
      case Op::kRow: {
        auto& gm = grad_buffer(n.in[0]);
        const std::size_t width = g.size();
        const std::size_t offset = static_cast<std::size_t>(n.a) * width;
        for (std::size_t k = 0; k < width; ++k) gm[offset + k] += g[k];
        break;
      }
      case Op::kSum: {
        auto& gx = grad_buffer(n.in[0]);
        for (double& v : gx) v += g[0];
        break;
      }
      case Op::kReshape: {
        auto& gx = grad_buffer(n.in[0]);
        for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
        break;
      }
    }
  }
}

std::vector<double> Tape::grad(const Tensor& t) const {
  if (!t.attached() || t.tape_id != id_) return std::vector<double>(t.size(), 0.0);
  const auto& g = grads_.at(static_cast<std::size_t>(t.node));
  if (g.empty()) return std::vector<double>(t.size(), 0.0);
  return g;
}

// --- gradient checking ---------------------------------------------------

std::vector<Tensor> analytic_gradients(const LossFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(p));
  Tensor loss = f(tape, leaves);
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    grads.push_back(Tensor(params[i].shape, tape.grad(leaves[i])));
  return grads;
}

namespace {
double evaluate(const LossFn& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Tensor> leaves;
  leaves.reserve(params.size());
  for (const auto& p : params) leaves.push_back(tape.leaf(p));
  return f(tape, leaves).value();
}
}  // namespace

std::vector<Tensor> numeric_gradients(const LossFn& f, std::vector<Tensor> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("numeric_gradients: step h must be positive");
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor g = Tensor::zeros(params[i].shape);
    for (std::size_t k = 0; k < params[i].data.size(); ++k) {
      const double saved = params[i].data[k];
      params[i].data[k] = saved + h;
      const double up = evaluate(f, params);
      params[i].data[k] = saved - h;
      const double down = evaluate(f, params);
      params[i].data[k] = saved;
      g.data[k] = (up - down) / (2.0 * h);
      if (!std::isfinite(g.data[k]))
        throw NumericError("numeric_gradients: non-finite difference at parameter " +
                           std::to_string(i) + " entry " + std::to_string(k));
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

GradCheckReport max_relative_error(const std::vector<Tensor>& analytic,
                                   const std::vector<Tensor>& numeric) {
  if (analytic.size() != numeric.size())
    throw std::invalid_argument("max_relative_error: gradient lists differ in length");
  GradCheckReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    for (std::size_t k = 0; k < analytic[i].data.size(); ++k) {
      const double a = analytic[i].data[k];
      const double n = numeric[i].data[k];
      if (!std::isfinite(a) || !std::isfinite(n))
        throw NumericError("max_relative_error: non-finite gradient at parameter " +
                           std::to_string(i) + " entry " + std::to_string(k));
      const double rel = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.param = static_cast<int>(i);
        report.entry = static_cast<int>(k);
      }
    }
  }
  return report;
}

GradCheckReport grad_check(const LossFn& f, const std::vector<Tensor>& params, double h) {
  return max_relative_error(analytic_gradients(f, params), numeric_gradients(f, params, h));
}

}  // namespace skelcast::ad
