#include "brca/ops.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "eigen_util.hpp"

namespace brca {

using detail::finish;
using detail::mat;
using detail::vec;

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  std::vector<Tensor<T>> in{a, b};
  check_op_inputs<T>(OpKind::add, in);
  Tensor<T> out(a.shape());
  vec(out.values()) = vec(a.values()) + vec(b.values());
  finish(g, OpKind::add, in, out, [a = a, b = b, out]() mutable {
    if (a.requires_grad()) vec(a.grad()) += vec(out.grad());
    if (b.requires_grad()) vec(b.grad()) += vec(out.grad());
  });
  return out;
}

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  std::vector<Tensor<T>> in{a, b};
  check_op_inputs<T>(OpKind::mul, in);
  Tensor<T> out(a.shape());
  vec(out.values()) = vec(a.values()).cwiseProduct(vec(b.values()));
  finish(g, OpKind::mul, in, out, [a = a, b = b, out]() mutable {
    if (a.requires_grad()) vec(a.grad()) += vec(out.grad()).cwiseProduct(vec(b.values()));
    if (b.requires_grad()) vec(b.grad()) += vec(out.grad()).cwiseProduct(vec(a.values()));
  });
  return out;
}

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& x, T factor) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::scale, in);
  Tensor<T> out(x.shape());
  vec(out.values()) = vec(x.values()) * factor;
  finish(g, OpKind::scale, in, out, [x = x, out, factor]() mutable {
    vec(x.grad()) += vec(out.grad()) * factor;
  });
  return out;
}

template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  std::vector<Tensor<T>> in{a, b};
  check_op_inputs<T>(OpKind::matmul, in);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor<T> out(Shape{m, n});
  mat(out.values(), m, n).noalias() = mat(a.values(), m, k) * mat(b.values(), k, n);
  finish(g, OpKind::matmul, in, out, [a = a, b = b, out, m, k, n]() mutable {
    auto dout = mat(out.grad(), m, n);
    if (a.requires_grad()) {
      mat(a.grad(), m, k).noalias() += dout * mat(b.values(), k, n).transpose();
    }
    if (b.requires_grad()) {
      mat(b.grad(), k, n).noalias() += mat(a.values(), m, k).transpose() * dout;
    }
  });
  return out;
}

template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& x) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::sigmoid, in);
  Tensor<T> out(x.shape());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    ov[i] = T{1} / (T{1} + std::exp(-xv[i]));
  }
  finish(g, OpKind::sigmoid, in, out, [x = x, out]() mutable {
    auto y = vec(out.values()).array();
    vec(x.grad()).array() += vec(out.grad()).array() * y * (T{1} - y);
  });
  return out;
}

template <typename T>
Tensor<T> tanh(Graph<T>& g, const Tensor<T>& x) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::tanh, in);
  Tensor<T> out(x.shape());
  vec(out.values()) = vec(x.values()).array().tanh().matrix();
  finish(g, OpKind::tanh, in, out, [x = x, out]() mutable {
    auto y = vec(out.values()).array();
    vec(x.grad()).array() += vec(out.grad()).array() * (T{1} - y * y);
  });
  return out;
}

template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& x, Shape shape) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::reshape, in);
  require(shape.numel() == x.numel(),
          "reshape: cannot view " + x.shape().str() + " as " + shape.str());
  Tensor<T> out(shape, std::vector<T>(x.values().begin(), x.values().end()));
  finish(g, OpKind::reshape, in, out, [x = x, out]() mutable {
    vec(x.grad()) += vec(out.grad());
  });
  return out;
}

template <typename T>
Tensor<T> concat(Graph<T>& g, std::span<const Tensor<T>> parts) {
  std::vector<Tensor<T>> in(parts.begin(), parts.end());
  check_op_inputs<T>(OpKind::concat, in);
  std::size_t total = 0;
  for (const Tensor<T>& p : parts) total += p.numel();
  Tensor<T> out(Shape{total});
  std::size_t offset = 0;
  for (const Tensor<T>& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.values().begin() + offset);
    offset += p.numel();
  }
  finish(g, OpKind::concat, in, out, [in, out]() mutable {
    std::size_t off = 0;
    for (Tensor<T>& p : in) {
      if (p.requires_grad()) {
        vec(p.grad()) += vec(out.grad().subspan(off, p.numel()));
      }
      off += p.numel();
    }
  });
  return out;
}

template <typename T>
Tensor<T> slice(Graph<T>& g, const Tensor<T>& x, std::size_t offset, std::size_t count) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::slice, in);
  require(x.shape().rank() == 1 && count > 0 && offset + count <= x.numel(),
          "slice: range out of bounds for " + x.shape().str());
  Tensor<T> out(Shape{count});
  auto src = x.values().subspan(offset, count);
  std::copy(src.begin(), src.end(), out.values().begin());
  finish(g, OpKind::slice, in, out, [x = x, out, offset, count]() mutable {
    vec(x.grad().subspan(offset, count)) += vec(out.grad());
  });
  return out;
}

template <typename T>
Tensor<T> stack_columns(Graph<T>& g, std::span<const Tensor<T>> columns) {
  std::vector<Tensor<T>> in(columns.begin(), columns.end());
  check_op_inputs<T>(OpKind::stack_columns, in);
  const std::size_t rows = columns[0].numel();
  const std::size_t cols = columns.size();
  Tensor<T> out(Shape{rows, cols});
  auto o = mat(out.values(), rows, cols);
  for (std::size_t c = 0; c < cols; ++c) {
    o.col(static_cast<Eigen::Index>(c)) = vec(columns[c].values());
  }
  finish(g, OpKind::stack_columns, in, out, [in, out, rows, cols]() mutable {
    auto d = mat(out.grad(), rows, cols);
    for (std::size_t c = 0; c < cols; ++c) {
      if (in[c].requires_grad()) {
        vec(in[c].grad()) += d.col(static_cast<Eigen::Index>(c));
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> embedding(Graph<T>& g, const Tensor<T>& table, std::size_t index) {
  std::vector<Tensor<T>> in{table};
  check_op_inputs<T>(OpKind::embedding, in);
  const std::size_t rows = table.shape()[0], dim = table.shape()[1];
  require(index < rows, "embedding: index " + std::to_string(index) + " out of range");
  Tensor<T> out(Shape{dim});
  auto row = table.values().subspan(index * dim, dim);
  std::copy(row.begin(), row.end(), out.values().begin());
  finish(g, OpKind::embedding, in, out, [table = table, out, index, dim]() mutable {
    vec(table.grad().subspan(index * dim, dim)) += vec(out.grad());
  });
  return out;
}

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::sum, in);
  Tensor<T> out(Shape{1});
  out.at(0) = vec(x.values()).sum();
  finish(g, OpKind::sum, in, out, [x = x, out]() mutable {
    vec(x.grad()).array() += out.grad()[0];
  });
  return out;
}

template <typename T>
Tensor<T> weighted_sum(Graph<T>& g, const Tensor<T>& x, std::vector<T> weights) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::weighted_sum, in);
  require(weights.size() == x.numel(), "weighted_sum: weight count does not match input");
  Tensor<T> out(Shape{1});
  out.at(0) = vec(x.values()).dot(vec(std::span<const T>(weights)));
  finish(g, OpKind::weighted_sum, in, out, [x = x, out, w = std::move(weights)]() mutable {
    vec(x.grad()) += vec(std::span<const T>(w)) * out.grad()[0];
  });
  return out;
}

namespace {

template <typename T>
Tensor<T> reduce_to_scalar(Graph<T>& g, const Tensor<T>& y) {
  if (y.numel() == 1 && y.shape().rank() == 1) {
    return y;
  }
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> w(y.numel());
  for (T& v : w) v = static_cast<T>(dist(rng));
  return weighted_sum(g, y, std::move(w));
}

template <typename T>
double evaluate(const TensorFunction<T>& f, const Tensor<T>& x) {
  Graph<T> g(false);
  Tensor<T> y = reduce_to_scalar(g, f(g, x));
  return static_cast<double>(y.at(0));
}

}  // namespace

template <typename T>
double grad_check(const TensorFunction<T>& f, Tensor<T> x, double eps,
                  std::span<const std::size_t> coords) {
  const bool had_flag = x.requires_grad();
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Graph<T> g;
    Tensor<T> loss = reduce_to_scalar(g, f(g, x));
    if (!std::isfinite(static_cast<double>(loss.at(0)))) {
      return std::numeric_limits<double>::infinity();
    }
    g.backward(loss);
  }
  std::vector<T> analytic(x.grad().begin(), x.grad().end());

  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.numel());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    coords = all;
  }

  double worst = 0.0;
  for (std::size_t i : coords) {
    require(i < x.numel(), "grad_check: coordinate out of range");
    const T saved = x.at(i);
    x.at(i) = static_cast<T>(static_cast<double>(saved) + eps);
    const double plus = evaluate(f, x);
    x.at(i) = static_cast<T>(static_cast<double>(saved) - eps);
    const double minus = evaluate(f, x);
    x.at(i) = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      return std::numeric_limits<double>::infinity();
    }
    const double dev = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, dev);
  }
  x.zero_grad();
  x.set_requires_grad(had_flag);
  return worst;
}

#define BRCA_INSTANTIATE_OPS(T)                                                          \
  template Tensor<T> add(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> mul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template Tensor<T> scale(Graph<T>&, const Tensor<T>&, T);                              \
  template Tensor<T> matmul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);              \
  template Tensor<T> sigmoid(Graph<T>&, const Tensor<T>&);                               \
  template Tensor<T> tanh(Graph<T>&, const Tensor<T>&);                                  \
  template Tensor<T> reshape(Graph<T>&, const Tensor<T>&, Shape);                        \
  template Tensor<T> concat(Graph<T>&, std::span<const Tensor<T>>);                      \
  template Tensor<T> slice(Graph<T>&, const Tensor<T>&, std::size_t, std::size_t);       \
  template Tensor<T> stack_columns(Graph<T>&, std::span<const Tensor<T>>);               \
  template Tensor<T> embedding(Graph<T>&, const Tensor<T>&, std::size_t);                \
  template Tensor<T> sum(Graph<T>&, const Tensor<T>&);                                   \
  template Tensor<T> weighted_sum(Graph<T>&, const Tensor<T>&, std::vector<T>);          \
  template double grad_check(const TensorFunction<T>&, Tensor<T>, double,                \
                             std::span<const std::size_t>);

BRCA_INSTANTIATE_OPS(float)
BRCA_INSTANTIATE_OPS(double)

}  // namespace brca
