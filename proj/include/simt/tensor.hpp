// Reverse-mode autodiff over dense Eigen matrices.
#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace simt {

using Scalar = double;
using Matrix = Eigen::MatrixXd;

// A named trainable weight. Gradients land in `grad` when a Tape that
// references the parameter runs backward().
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
  void zero_grad() { grad.setZero(); }
};

class Tape;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool seen_grad = false;
  std::function<void()> backprop;  // pushes this node's grad into its parents
};

}  // namespace detail

// Handle to a node owned by a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape* t, detail::Node* n) : tape(t), node(n) {}

  const Matrix& value() const { return node->value; }
  const Matrix& grad() const;   // throws if backward never reached this node
  Scalar scalar() const;        // value of a 1x1 tensor
  Eigen::Index rows() const { return node->value.rows(); }
  Eigen::Index cols() const { return node->value.cols(); }
  bool requires_grad() const { return node->requires_grad; }
  bool defined() const { return node != nullptr; }

  Tape* tape = nullptr;
  detail::Node* node = nullptr;
};

// Dynamic graph of eagerly evaluated ops. Nodes live in a deque so pointers
// stay stable; creation order is a topological order, so backward() is a
// single reverse sweep. One backward per tape.
class Tape {
 public:
  Tensor constant(Matrix v);
  Tensor leaf(Matrix v);     // requires-grad input, for gradient checks
  Tensor use(Parameter& p);  // leaf bound to a Parameter (cached per tape)

  // `loss` must be 1x1. Accumulates into every bound Parameter's grad.
  void backward(const Tensor& loss);

  Tensor make(Matrix value, bool requires_grad, std::function<void()> backprop);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<detail::Node> nodes_;
  std::vector<std::pair<Parameter*, detail::Node*>> bound_;
  bool used_ = false;
};

// Ops. Shape mismatches throw std::invalid_argument naming the op.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // broadcast 1xC over rows
Tensor mul(const Tensor& a, const Tensor& b);           // elementwise
Tensor scale(const Tensor& a, Scalar c);
Tensor add_scalar(const Tensor& a, Scalar c);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
// Element clamp to [lo, hi]; gradient passes only strictly inside.
Tensor clamp(const Tensor& a, Scalar lo, Scalar hi);
Tensor sigmoid(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor softmax_rows(const Tensor& z);
// Row-wise softmax with positive per-element weights:
// y_ij = w_ij exp(z_ij - max_i) / sum_k w_ik exp(z_ik - max_i).
Tensor weighted_softmax_rows(const Tensor& z, const Tensor& w);
// Adds -1e9 where keep == 0. Additive, so exp() downstream underflows to an
// exact zero and masked positions get exactly zero gradient through softmax.
Tensor masked_fill(const Tensor& a, const Matrix& keep);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias);
Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids);
Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index n);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor add_diag(const Tensor& a, const Tensor& d);     // d is kx1, a is kxk
Tensor tile_cols(const Tensor& col, Eigen::Index n);   // Rx1 -> RxN
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Mean over rows of -log p(target). Targets index columns of `logits`.
Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets,
                          Scalar label_smoothing = 0.0);

// First index of the row maximum; ties break toward the smaller index.
Eigen::Index argmax_row(const Matrix& row);

// Uniform Xavier/Glorot initialization.
Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

}  // namespace simt
