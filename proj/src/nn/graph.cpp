#include "iohfuse/nn/graph.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "iohfuse/kernels/kernels.hpp"

namespace iohfuse::nn {

struct Tensor::Node {
  Matrix own_value;
  Matrix own_grad;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;
  bool requires_grad = false;
  std::function<void()> backward;

  Matrix& ensure_grad() {
    if (grad == &own_grad && own_grad.empty()) own_grad = Matrix(value->rows, value->cols);
    return *grad;
  }
};

namespace {

const Matrix kEmpty;

void check_same(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

const Matrix& Tensor::value() const { return *node_->value; }

const Matrix& Tensor::grad() const {
  if (node_->grad == &node_->own_grad && node_->own_grad.empty()) return kEmpty;
  return *node_->grad;
}

Graph::Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {}

Graph::~Graph() = default;

Tensor::Node* Graph::make_node(Matrix value, bool requires_grad) {
  auto n = std::make_unique<Tensor::Node>();
  n->own_value = std::move(value);
  n->value = &n->own_value;
  n->grad = &n->own_grad;
  n->requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

bool Graph::needs(Tensor t) { return t.node_->requires_grad; }

Matrix& Graph::grad_of(Tensor t) { return t.node_->ensure_grad(); }

Tensor Graph::constant(Matrix value) { return Tensor(make_node(std::move(value), false)); }

Tensor Graph::param(Parameter& p) {
  auto n = std::make_unique<Tensor::Node>();
  n->value = &p.value;
  n->grad = &p.grad;
  n->requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Tensor(nodes_.back().get());
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.rows) {
    throw std::invalid_argument("matmul: shape mismatch " + av.shape_string() + " * " + bv.shape_string());
  }
  Matrix out(av.rows, bv.cols);
  kernels::gemm_nn(av.rows, bv.cols, av.cols, av.data.data(), bv.data.data(), out.data.data());
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      const Matrix& bv = b.value();
      if (needs(a)) kernels::gemm_nt(av.rows, av.cols, bv.cols, g.data.data(), bv.data.data(), grad_of(a).data.data());
      if (needs(b)) kernels::gemm_tn(bv.rows, bv.cols, av.rows, av.data.data(), g.data.data(), grad_of(b).data.data());
    };
  }
  return Tensor(o);
}

Tensor Graph::matmul_nt(Tensor a, Tensor b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.cols) {
    throw std::invalid_argument("matmul_nt: shape mismatch " + av.shape_string() + " * " + bv.shape_string() + "^T");
  }
  Matrix out(av.rows, bv.rows);
  kernels::gemm_nt(av.rows, bv.rows, av.cols, av.data.data(), bv.data.data(), out.data.data());
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      const Matrix& bv = b.value();
      if (needs(a)) kernels::gemm_nn(av.rows, av.cols, bv.rows, g.data.data(), bv.data.data(), grad_of(a).data.data());
      if (needs(b)) kernels::gemm_tn(bv.rows, bv.cols, av.rows, g.data.data(), av.data.data(), grad_of(b).data.data());
    };
  }
  return Tensor(o);
}

Tensor Graph::add(Tensor a, Tensor b) {
  check_same(a.value(), b.value(), "add");
  Matrix out = a.value();
  kernels::axpy(1.0, b.value().data.data(), out.data.data(), out.size());
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      if (needs(a)) kernels::axpy(1.0, g.data.data(), grad_of(a).data.data(), g.size());
      if (needs(b)) kernels::axpy(1.0, g.data.data(), grad_of(b).data.data(), g.size());
    };
  }
  return Tensor(o);
}

Tensor Graph::sub(Tensor a, Tensor b) {
  check_same(a.value(), b.value(), "sub");
  Matrix out = a.value();
  kernels::axpy(-1.0, b.value().data.data(), out.data.data(), out.size());
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      if (needs(a)) kernels::axpy(1.0, g.data.data(), grad_of(a).data.data(), g.size());
      if (needs(b)) kernels::axpy(-1.0, g.data.data(), grad_of(b).data.data(), g.size());
    };
  }
  return Tensor(o);
}

Tensor Graph::mul(Tensor a, Tensor b) {
  check_same(a.value(), b.value(), "mul");
  Matrix out = a.value();
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      const Matrix& bv = b.value();
      if (needs(a)) {
        Matrix& ga = grad_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
      }
      if (needs(b)) {
        Matrix& gb = grad_of(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::add_row(Tensor a, Tensor row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows != 1 || rv.cols != av.cols) {
    throw std::invalid_argument("add_row: expected 1x" + std::to_string(av.cols) + " got " + rv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows; ++r) kernels::axpy(1.0, rv.data.data(), out.data.data() + r * out.cols, out.cols);
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(row));
  if (o->requires_grad) {
    o->backward = [this, a, row, o] {
      const Matrix& g = *o->grad;
      if (needs(a)) kernels::axpy(1.0, g.data.data(), grad_of(a).data.data(), g.size());
      if (needs(row)) {
        Matrix& gr = grad_of(row);
        for (std::size_t r = 0; r < g.rows; ++r) kernels::axpy(1.0, g.data.data() + r * g.cols, gr.data.data(), g.cols);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::mul_row(Tensor a, Tensor row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows != 1 || rv.cols != av.cols) {
    throw std::invalid_argument("mul_row: expected 1x" + std::to_string(av.cols) + " got " + rv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) *= rv.data[c];
  }
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(row));
  if (o->requires_grad) {
    o->backward = [this, a, row, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      const Matrix& rv = row.value();
      if (needs(a)) {
        Matrix& ga = grad_of(a);
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t c = 0; c < g.cols; ++c) ga(r, c) += g(r, c) * rv.data[c];
        }
      }
      if (needs(row)) {
        Matrix& gr = grad_of(row);
        for (std::size_t r = 0; r < g.rows; ++r) {
          for (std::size_t c = 0; c < g.cols; ++c) gr.data[c] += g(r, c) * av(r, c);
        }
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::scale(Tensor a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o, s] { kernels::axpy(s, o->grad->data.data(), grad_of(a).data.data(), o->grad->size()); };
  }
  return Tensor(o);
}

Tensor Graph::add_scalar(Tensor a, double c) {
  Matrix out = a.value();
  for (double& v : out.data) v += c;
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] { kernels::axpy(1.0, o->grad->data.data(), grad_of(a).data.data(), o->grad->size()); };
  }
  return Tensor(o);
}

Tensor Graph::mul_const(Tensor a, const Matrix& m) {
  check_same(a.value(), m, "mul_const");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= m.data[i];
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o, m] {
      const Matrix& g = *o->grad;
      Matrix& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * m.data[i];
    };
  }
  return Tensor(o);
}

Tensor Graph::gelu(Tensor a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av.data[i];
    const double u = kGeluC * (x + kGeluA * x * x * x);
    out.data[i] = 0.5 * x * (1.0 + std::tanh(u));
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      Matrix& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = av.data[i];
        const double u = kGeluC * (x + kGeluA * x * x * x);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        ga.data[i] += g.data[i] * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::silu(Tensor a) {
  const Matrix& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double x = av.data[i];
    out.data[i] = x / (1.0 + std::exp(-x));
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] {
      const Matrix& g = *o->grad;
      const Matrix& av = a.value();
      Matrix& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = av.data[i];
        const double s = 1.0 / (1.0 + std::exp(-x));
        ga.data[i] += g.data[i] * s * (1.0 + x * (1.0 - s));
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::layer_norm(Tensor a, double eps) {
  const Matrix& av = a.value();
  const std::size_t n = av.cols;
  Matrix out(av.rows, n);
  std::vector<double> inv_std(av.rows);
  for (std::size_t r = 0; r < av.rows; ++r) {
    const double* x = av.data.data() + r * n;
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += x[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) out(r, c) = (x[c] - mean) * inv_std[r];
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o, inv_std = std::move(inv_std)] {
      const Matrix& g = *o->grad;
      const Matrix& y = *o->value;
      Matrix& ga = grad_of(a);
      const std::size_t n = g.cols;
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < g.rows; ++r) {
        double mean_g = 0.0;
        double mean_gy = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          mean_g += g(r, c);
          mean_gy += g(r, c) * y(r, c);
        }
        mean_g *= inv_n;
        mean_gy *= inv_n;
        for (std::size_t c = 0; c < n; ++c) ga(r, c) += inv_std[r] * (g(r, c) - mean_g - y(r, c) * mean_gy);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::softmax_rows(Tensor a, const Matrix* penalty) {
  const Matrix& av = a.value();
  if (penalty != nullptr) check_same(av, *penalty, "softmax_rows penalty");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Matrix out(av.rows, av.cols);
  for (std::size_t r = 0; r < av.rows; ++r) {
    double mx = -kInf;
    for (std::size_t c = 0; c < av.cols; ++c) {
      const double p = penalty ? (*penalty)(r, c) : 0.0;
      if (p == kInf) continue;
      mx = std::max(mx, av(r, c) - p);
    }
    if (mx == -kInf) continue;  // fully masked row stays zero
    double z = 0.0;
    for (std::size_t c = 0; c < av.cols; ++c) {
      const double p = penalty ? (*penalty)(r, c) : 0.0;
      const double e = (p == kInf) ? 0.0 : std::exp(av(r, c) - p - mx);
      out(r, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < av.cols; ++c) out(r, c) /= z;
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] {
      const Matrix& g = *o->grad;
      const Matrix& y = *o->value;
      Matrix& ga = grad_of(a);
      for (std::size_t r = 0; r < g.rows; ++r) {
        const double s = kernels::dot(g.data.data() + r * g.cols, y.data.data() + r * g.cols, g.cols);
        for (std::size_t c = 0; c < g.cols; ++c) ga(r, c) += y(r, c) * (g(r, c) - s);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::transpose(Tensor a) {
  const Matrix& av = a.value();
  Matrix out(av.cols, av.rows);
  for (std::size_t r = 0; r < av.rows; ++r) {
    for (std::size_t c = 0; c < av.cols; ++c) out(c, r) = av(r, c);
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] {
      const Matrix& g = *o->grad;
      Matrix& ga = grad_of(a);
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) ga(c, r) += g(r, c);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::reshape(Tensor a, std::size_t rows, std::size_t cols) {
  const Matrix& av = a.value();
  if (rows * cols != av.size()) {
    throw std::invalid_argument("reshape: cannot view " + av.shape_string() + " as " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
  Tensor::Node* o = make_node(Matrix(rows, cols, av.data), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] { kernels::axpy(1.0, o->grad->data.data(), grad_of(a).data.data(), o->grad->size()); };
  }
  return Tensor(o);
}

Tensor Graph::concat_rows(Tensor a, Tensor b) {
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols != bv.cols) {
    throw std::invalid_argument("concat_rows: column mismatch " + av.shape_string() + " vs " + bv.shape_string());
  }
  Matrix out(av.rows + bv.rows, av.cols);
  std::copy(av.data.begin(), av.data.end(), out.data.begin());
  std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(av.size()));
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(b));
  if (o->requires_grad) {
    o->backward = [this, a, b, o] {
      const Matrix& g = *o->grad;
      const std::size_t na = a.value().size();
      if (needs(a)) kernels::axpy(1.0, g.data.data(), grad_of(a).data.data(), na);
      if (needs(b)) kernels::axpy(1.0, g.data.data() + na, grad_of(b).data.data(), b.value().size());
    };
  }
  return Tensor(o);
}

Tensor Graph::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool any = false;
  for (const Tensor& t : parts) {
    if (t.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += t.cols();
    any = any || needs(t);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const Tensor& t : parts) {
    const Matrix& tv = t.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(tv.data.begin() + static_cast<std::ptrdiff_t>(r * tv.cols),
                tv.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * tv.cols),
                out.data.begin() + static_cast<std::ptrdiff_t>(r * cols + off));
    }
    off += tv.cols;
  }
  Tensor::Node* o = make_node(std::move(out), any);
  if (o->requires_grad) {
    std::vector<Tensor> saved(parts.begin(), parts.end());
    o->backward = [this, saved = std::move(saved), o] {
      const Matrix& g = *o->grad;
      std::size_t off = 0;
      for (const Tensor& t : saved) {
        const std::size_t tc = t.cols();
        if (needs(t)) {
          Matrix& gt = grad_of(t);
          for (std::size_t r = 0; r < g.rows; ++r) {
            kernels::axpy(1.0, g.data.data() + r * g.cols + off, gt.data.data() + r * tc, tc);
          }
        }
        off += tc;
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::slice_rows(Tensor a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.rows) throw std::out_of_range("slice_rows: range exceeds " + av.shape_string());
  Matrix out(count, av.cols);
  std::copy(av.data.begin() + static_cast<std::ptrdiff_t>(begin * av.cols),
            av.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * av.cols), out.data.begin());
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o, begin] {
      const Matrix& g = *o->grad;
      kernels::axpy(1.0, g.data.data(), grad_of(a).data.data() + begin * g.cols, g.size());
    };
  }
  return Tensor(o);
}

Tensor Graph::slice_cols(Tensor a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols) throw std::out_of_range("slice_cols: range exceeds " + av.shape_string());
  Matrix out(av.rows, count);
  for (std::size_t r = 0; r < av.rows; ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  }
  Tensor::Node* o = make_node(std::move(out), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o, begin] {
      const Matrix& g = *o->grad;
      Matrix& ga = grad_of(a);
      for (std::size_t r = 0; r < g.rows; ++r) {
        kernels::axpy(1.0, g.data.data() + r * g.cols, ga.data.data() + r * ga.cols + begin, g.cols);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::replace_rows(Tensor a, std::span<const std::size_t> rows, Tensor token) {
  const Matrix& av = a.value();
  const Matrix& tv = token.value();
  if (tv.rows != 1 || tv.cols != av.cols) throw std::invalid_argument("replace_rows: token must be 1x" + std::to_string(av.cols));
  std::vector<char> replaced(av.rows, 0);
  for (std::size_t r : rows) {
    if (r >= av.rows) throw std::out_of_range("replace_rows: row index out of range");
    replaced[r] = 1;
  }
  Matrix out = av;
  for (std::size_t r = 0; r < av.rows; ++r) {
    if (replaced[r]) std::copy(tv.data.begin(), tv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(r * av.cols));
  }
  Tensor::Node* o = make_node(std::move(out), needs(a) || needs(token));
  if (o->requires_grad) {
    o->backward = [this, a, token, o, replaced = std::move(replaced)] {
      const Matrix& g = *o->grad;
      for (std::size_t r = 0; r < g.rows; ++r) {
        const double* gr = g.data.data() + r * g.cols;
        if (replaced[r]) {
          if (needs(token)) kernels::axpy(1.0, gr, grad_of(token).data.data(), g.cols);
        } else if (needs(a)) {
          kernels::axpy(1.0, gr, grad_of(a).data.data() + r * g.cols, g.cols);
        }
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::gather_rows(Tensor table, std::span<const std::size_t> ids) {
  const Matrix& tv = table.value();
  Matrix out(ids.size(), tv.cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows) throw std::out_of_range("gather_rows: id out of range");
    std::copy(tv.data.begin() + static_cast<std::ptrdiff_t>(ids[i] * tv.cols),
              tv.data.begin() + static_cast<std::ptrdiff_t>((ids[i] + 1) * tv.cols),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * tv.cols));
  }
  Tensor::Node* o = make_node(std::move(out), needs(table));
  if (o->requires_grad) {
    o->backward = [this, table, o, ids = std::vector<std::size_t>(ids.begin(), ids.end())] {
      const Matrix& g = *o->grad;
      Matrix& gt = grad_of(table);
      for (std::size_t i = 0; i < ids.size(); ++i) {
        kernels::axpy(1.0, g.data.data() + i * g.cols, gt.data.data() + ids[i] * g.cols, g.cols);
      }
    };
  }
  return Tensor(o);
}

Tensor Graph::weighted_sq_error(Tensor pred, const Matrix& target, const Matrix& weights) {
  const Matrix& pv = pred.value();
  check_same(pv, target, "weighted_sq_error target");
  check_same(pv, weights, "weighted_sq_error weights");
  double s = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv.data[i] - target.data[i];
    s += weights.data[i] * d * d;
  }
  Tensor::Node* o = make_node(Matrix(1, 1, s), needs(pred));
  if (o->requires_grad) {
    o->backward = [this, pred, o, target, weights] {
      const double g = o->grad->data[0];
      const Matrix& pv = pred.value();
      Matrix& gp = grad_of(pred);
      for (std::size_t i = 0; i < pv.size(); ++i) gp.data[i] += g * 2.0 * weights.data[i] * (pv.data[i] - target.data[i]);
    };
  }
  return Tensor(o);
}

Tensor Graph::sum(Tensor a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  Tensor::Node* o = make_node(Matrix(1, 1, s), needs(a));
  if (o->requires_grad) {
    o->backward = [this, a, o] {
      const double g = o->grad->data[0];
      for (double& v : grad_of(a).data) v += g;
    };
  }
  return Tensor(o);
}

void Graph::backward(Tensor loss) {
  if (!grad_enabled_) throw std::logic_error("backward on a graph built without gradients");
  const Matrix& lv = loss.value();
  if (lv.rows != 1 || lv.cols != 1) throw std::invalid_argument("backward: loss must be 1x1, got " + lv.shape_string());
  if (!needs(loss)) return;
  grad_of(loss).data[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Tensor::Node& n = **it;
    if (!n.backward) continue;
    if (n.grad == &n.own_grad && n.own_grad.empty()) continue;  // not on any path to the loss
    n.backward();
  }
}

}  // namespace iohfuse::nn
