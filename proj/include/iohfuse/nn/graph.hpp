#pragma once

// Tape-based reverse-mode automatic differentiation over dense matrices.
//
// A Graph records every operation applied to its tensors in creation order;
// backward() replays the tape in reverse. Parameters enter a graph through
// Graph::param() and accumulate gradients directly into Parameter::grad, so a
// mini-batch is a sequence of graphs (one per sample) followed by a single
// optimizer step.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "iohfuse/nn/matrix.hpp"
#include "iohfuse/nn/param.hpp"

namespace iohfuse::nn {

class Graph;

class Tensor {
 public:
  Tensor() = default;
  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  /// Gradient after Graph::backward(); empty when not reached.
  const Matrix& grad() const;
  bool valid() const { return node_ != nullptr; }

 private:
  friend class Graph;
  struct Node;
  explicit Tensor(Node* n) : node_(n) {}
  Node* node_ = nullptr;
};

class Graph {
 public:
  /// With grad_enabled == false no backward closures are recorded.
  explicit Graph(bool grad_enabled = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  ~Graph();

  Tensor constant(Matrix value);
  Tensor param(Parameter& p);

  Tensor matmul(Tensor a, Tensor b);     // A * B
  Tensor matmul_nt(Tensor a, Tensor b);  // A * B^T
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);
  Tensor add_row(Tensor a, Tensor row);  // broadcast 1 x c over rows
  Tensor mul_row(Tensor a, Tensor row);
  Tensor scale(Tensor a, double s);
  Tensor add_scalar(Tensor a, double c);
  Tensor mul_const(Tensor a, const Matrix& m);

  Tensor gelu(Tensor a);
  Tensor silu(Tensor a);
  Tensor layer_norm(Tensor a, double eps = 1e-5);
  /// Row softmax of (a - penalty). +inf penalty entries get exactly zero
  /// weight; a row whose entries are all +inf yields a zero row.
  Tensor softmax_rows(Tensor a, const Matrix* penalty = nullptr);

  Tensor transpose(Tensor a);
  Tensor reshape(Tensor a, std::size_t rows, std::size_t cols);
  Tensor concat_rows(Tensor a, Tensor b);
  Tensor concat_cols(std::span<const Tensor> parts);
  Tensor slice_rows(Tensor a, std::size_t begin, std::size_t count);
  Tensor slice_cols(Tensor a, std::size_t begin, std::size_t count);
  /// Rows listed in `rows` are replaced by the 1 x c `token`.
  Tensor replace_rows(Tensor a, std::span<const std::size_t> rows, Tensor token);
  /// out[i] = table[ids[i]]
  Tensor gather_rows(Tensor table, std::span<const std::size_t> ids);

  /// sum(weights * (pred - target)^2) as a 1 x 1 tensor.
  Tensor weighted_sq_error(Tensor pred, const Matrix& target, const Matrix& weights);
  Tensor sum(Tensor a);

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1 x 1.
  void backward(Tensor loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  Tensor::Node* make_node(Matrix value, bool requires_grad);
  static bool needs(Tensor t);
  Matrix& grad_of(Tensor t);

  bool grad_enabled_;
  std::vector<std::unique_ptr<Tensor::Node>> nodes_;
};

}  // namespace iohfuse::nn
