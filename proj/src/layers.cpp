#include "brca/layers.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "brca/ops.hpp"
#include "eigen_util.hpp"

namespace brca {

using detail::finish;
using detail::mat;
using detail::MatR;
using detail::vec;

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> v(shape.numel());
  for (T& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(shape, std::move(v), true);
}

}  // namespace

template <typename T>
Conv1dParams<T> make_conv1d(std::size_t in_features, std::size_t out_features,
                            std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_features * kKernelSize));
  return {uniform_tensor<T>(Shape{out_features, in_features, kKernelSize}, bound, rng),
          Tensor<T>(Shape{out_features}, true)};
}

template <typename T>
LinearParams<T> make_linear(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim));
  return {uniform_tensor<T>(Shape{out_dim, in_dim}, bound, rng), Tensor<T>(Shape{out_dim}, true)};
}

template <typename T>
Tensor<T> conv1d(Graph<T>& g, const Tensor<T>& x, const Conv1dParams<T>& p) {
  std::vector<Tensor<T>> in{x, p.weight, p.bias};
  check_op_inputs<T>(OpKind::conv1d, in);
  require(p.weight.shape()[2] == kKernelSize, "conv1d: kernel size must be 3");
  const std::size_t fin = x.shape()[0], len = x.shape()[1], fout = p.weight.shape()[0];
  const auto rows = static_cast<Eigen::Index>(kKernelSize * fin);
  const auto L = static_cast<Eigen::Index>(len);

  // im2col: row g*3 + k holds x[g, t + k - 1], zero outside [0, L).
  auto col = std::make_shared<MatR<T>>(MatR<T>::Zero(rows, L));
  auto xm = mat(x.values(), fin, len);
  for (Eigen::Index gi = 0; gi < static_cast<Eigen::Index>(fin); ++gi) {
    if (L > 1) {
      col->row(3 * gi).segment(1, L - 1) = xm.row(gi).segment(0, L - 1);
      col->row(3 * gi + 2).segment(0, L - 1) = xm.row(gi).segment(1, L - 1);
    }
    col->row(3 * gi + 1) = xm.row(gi);
  }

  Tensor<T> out(Shape{fout, len});
  auto om = mat(out.values(), fout, len);
  om.noalias() = mat(p.weight.values(), fout, kKernelSize * fin) * (*col);
  om.colwise() += vec(p.bias.values());

  Tensor<T> xin = x, w = p.weight, b = p.bias;
  finish(g, OpKind::conv1d, in, out, [xin, w, b, out, col, fin, fout, len, L]() mutable {
    auto dout = mat(out.grad(), fout, len);
    if (w.requires_grad()) {
      mat(w.grad(), fout, kKernelSize * fin).noalias() += dout * col->transpose();
    }
    if (b.requires_grad()) {
      vec(b.grad()) += dout.rowwise().sum();
    }
    if (xin.requires_grad()) {
      MatR<T> dcol = mat(w.values(), fout, kKernelSize * fin).transpose() * dout;
      auto dx = mat(xin.grad(), fin, len);
      for (Eigen::Index gi = 0; gi < static_cast<Eigen::Index>(fin); ++gi) {
        if (L > 1) {
          dx.row(gi).segment(0, L - 1) += dcol.row(3 * gi).segment(1, L - 1);
          dx.row(gi).segment(1, L - 1) += dcol.row(3 * gi + 2).segment(0, L - 1);
        }
        dx.row(gi) += dcol.row(3 * gi + 1);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> linear(Graph<T>& g, const Tensor<T>& x, const LinearParams<T>& p) {
  std::vector<Tensor<T>> in{x, p.weight, p.bias};
  check_op_inputs<T>(OpKind::linear, in);
  const std::size_t din = p.in_dim(), dout_dim = p.out_dim();
  const std::size_t cols = x.shape().rank() == 2 ? x.shape()[1] : 1;
  Tensor<T> out(x.shape().rank() == 2 ? Shape{dout_dim, cols} : Shape{dout_dim});
  auto om = mat(out.values(), dout_dim, cols);
  om.noalias() = mat(p.weight.values(), dout_dim, din) * mat(x.values(), din, cols);
  om.colwise() += vec(p.bias.values());

  Tensor<T> xin = x, w = p.weight, b = p.bias;
  finish(g, OpKind::linear, in, out, [xin, w, b, out, din, dout_dim, cols]() mutable {
    auto dout = mat(out.grad(), dout_dim, cols);
    if (w.requires_grad()) {
      mat(w.grad(), dout_dim, din).noalias() += dout * mat(xin.values(), din, cols).transpose();
    }
    if (b.requires_grad()) {
      vec(b.grad()) += dout.rowwise().sum();
    }
    if (xin.requires_grad()) {
      mat(xin.grad(), din, cols).noalias() += mat(w.values(), dout_dim, din).transpose() * dout;
    }
  });
  return out;
}

template <typename T>
Tensor<T> relu(Graph<T>& g, const Tensor<T>& x) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::relu, in);
  Tensor<T> out(x.shape());
  vec(out.values()) = vec(x.values()).cwiseMax(T{0});
  finish(g, OpKind::relu, in, out, [x = x, out]() mutable {
    auto xv = x.values();
    auto go = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > T{0}) gx[i] += go[i];
    }
  });
  return out;
}

std::string to_string(PoolKind kind) {
  switch (kind) {
    case PoolKind::max: return "max";
    case PoolKind::average: return "average";
    case PoolKind::l2: return "l2";
  }
  return "max";
}

PoolKind parse_pool_kind(const std::string& text) {
  if (text == "max") return PoolKind::max;
  if (text == "average" || text == "avg") return PoolKind::average;
  if (text == "l2" || text == "L2") return PoolKind::l2;
  throw ContractViolation("unknown pool kind '" + text + "'");
}

template <typename T>
Tensor<T> pool2(Graph<T>& g, const Tensor<T>& x, PoolKind kind) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::pool2, in);
  const std::size_t features = x.shape()[0], len = x.shape()[1], half = len / 2;
  Tensor<T> out(Shape{features, half});
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t f = 0; f < features; ++f) {
    for (std::size_t t = 0; t < half; ++t) {
      const T a = xv[f * len + 2 * t], b = xv[f * len + 2 * t + 1];
      T& o = ov[f * half + t];
      switch (kind) {
        case PoolKind::max: o = std::max(a, b); break;
        case PoolKind::average: o = (a + b) / T{2}; break;
        case PoolKind::l2: o = std::sqrt((a * a + b * b) / T{2}); break;
      }
    }
  }
  finish(g, OpKind::pool2, in, out, [x = x, out, kind, features, len, half]() mutable {
    auto xv = x.values();
    auto ov = out.values();
    auto go = out.grad();
    auto gx = x.grad();
    for (std::size_t f = 0; f < features; ++f) {
      for (std::size_t t = 0; t < half; ++t) {
        const std::size_t ia = f * len + 2 * t, ib = ia + 1, io = f * half + t;
        const T d = go[io];
        switch (kind) {
          case PoolKind::max:
            // ties route the gradient to the first element of the window
            if (xv[ia] >= xv[ib]) gx[ia] += d; else gx[ib] += d;
            break;
          case PoolKind::average:
            gx[ia] += d / T{2};
            gx[ib] += d / T{2};
            break;
          case PoolKind::l2:
            if (ov[io] > T{0}) {
              gx[ia] += d * xv[ia] / (T{2} * ov[io]);
              gx[ib] += d * xv[ib] / (T{2} * ov[io]);
            }
            break;
        }
      }
    }
  });
  return out;
}

std::string to_string(ShuffleOrder order) {
  return order == ShuffleOrder::interleaved ? "interleaved" : "blocked";
}

ShuffleOrder parse_shuffle_order(const std::string& text) {
  if (text == "interleaved") return ShuffleOrder::interleaved;
  if (text == "blocked") return ShuffleOrder::blocked;
  throw ContractViolation("unknown shuffle order '" + text + "'");
}

template <typename T>
Tensor<T> pixel_shuffle_2(Graph<T>& g, const Tensor<T>& x, ShuffleOrder order) {
  std::vector<Tensor<T>> in{x};
  check_op_inputs<T>(OpKind::pixel_shuffle, in);
  const std::size_t features = x.shape()[0] / 2, len = x.shape()[1];
  auto source_row = [order, features](std::size_t c, std::size_t s) {
    return order == ShuffleOrder::interleaved ? 2 * c + s : c + s * features;
  };
  Tensor<T> out(Shape{features, 2 * len});
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t c = 0; c < features; ++c) {
    for (std::size_t s = 0; s < 2; ++s) {
      const std::size_t r = source_row(c, s);
      for (std::size_t t = 0; t < len; ++t) {
        ov[c * 2 * len + 2 * t + s] = xv[r * len + t];
      }
    }
  }
  finish(g, OpKind::pixel_shuffle, in, out, [x = x, out, features, len, source_row]() mutable {
    auto go = out.grad();
    auto gx = x.grad();
    for (std::size_t c = 0; c < features; ++c) {
      for (std::size_t s = 0; s < 2; ++s) {
        const std::size_t r = source_row(c, s);
        for (std::size_t t = 0; t < len; ++t) {
          gx[r * len + t] += go[c * 2 * len + 2 * t + s];
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> residual_pair(Graph<T>& g, const Tensor<T>& x, const LayerFn<T>& f1,
                        const LayerFn<T>& f2) {
  Tensor<T> branch = f2(g, relu(g, f1(g, relu(g, x))));
  require(branch.shape() == x.shape(), "residual_pair: branch shape " + branch.shape().str() +
                                           " does not match skip shape " + x.shape().str());
  return add(g, x, branch);
}

template <typename T>
Tensor<T> softmax_nll(Graph<T>& g, const Tensor<T>& logits, std::span<const int> targets,
                      std::span<const std::size_t> mask) {
  std::vector<Tensor<T>> in{logits};
  check_op_inputs<T>(OpKind::softmax_nll, in);
  require(!mask.empty(), "softmax_nll: empty mask");
  const std::size_t classes = logits.shape()[0], len = logits.shape()[1];
  for (std::size_t t : mask) {
    require(t < len && t < targets.size(), "softmax_nll: mask position out of range");
    require(targets[t] >= 0 && static_cast<std::size_t>(targets[t]) < classes,
            "softmax_nll: target out of range at position " + std::to_string(t));
  }
  auto lv = logits.values();
  // probabilities of the masked columns, [mask.size(), classes]
  auto probs = std::make_shared<std::vector<T>>(mask.size() * classes);
  double total = 0.0;
  for (std::size_t m = 0; m < mask.size(); ++m) {
    const std::size_t t = mask[m];
    T peak = lv[t];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, lv[c * len + t]);
    T z{0};
    for (std::size_t c = 0; c < classes; ++c) {
      const T e = std::exp(lv[c * len + t] - peak);
      (*probs)[m * classes + c] = e;
      z += e;
    }
    for (std::size_t c = 0; c < classes; ++c) (*probs)[m * classes + c] /= z;
    const T logp = lv[static_cast<std::size_t>(targets[t]) * len + t] - peak - std::log(z);
    total -= static_cast<double>(logp);
  }
  Tensor<T> out(Shape{1});
  out.at(0) = static_cast<T>(total / static_cast<double>(mask.size()));

  std::vector<std::size_t> positions(mask.begin(), mask.end());
  std::vector<int> labels(positions.size());
  for (std::size_t m = 0; m < positions.size(); ++m) labels[m] = targets[positions[m]];
  finish(g, OpKind::softmax_nll, in, out,
         [logits = logits, out, probs, positions, labels, classes, len]() mutable {
           const T scale = out.grad()[0] / static_cast<T>(positions.size());
           auto gl = logits.grad();
           for (std::size_t m = 0; m < positions.size(); ++m) {
             const std::size_t t = positions[m];
             for (std::size_t c = 0; c < classes; ++c) {
               gl[c * len + t] += scale * (*probs)[m * classes + c];
             }
             gl[static_cast<std::size_t>(labels[m]) * len + t] -= scale;
           }
         });
  return out;
}

#define BRCA_INSTANTIATE_LAYERS(T)                                                         \
  template Conv1dParams<T> make_conv1d<T>(std::size_t, std::size_t, std::mt19937_64&);     \
  template LinearParams<T> make_linear<T>(std::size_t, std::size_t, std::mt19937_64&);     \
  template Tensor<T> conv1d(Graph<T>&, const Tensor<T>&, const Conv1dParams<T>&);          \
  template Tensor<T> linear(Graph<T>&, const Tensor<T>&, const LinearParams<T>&);          \
  template Tensor<T> relu(Graph<T>&, const Tensor<T>&);                                    \
  template Tensor<T> pool2(Graph<T>&, const Tensor<T>&, PoolKind);                         \
  template Tensor<T> pixel_shuffle_2(Graph<T>&, const Tensor<T>&, ShuffleOrder);           \
  template Tensor<T> residual_pair(Graph<T>&, const Tensor<T>&, const LayerFn<T>&,         \
                                   const LayerFn<T>&);                                     \
  template Tensor<T> softmax_nll(Graph<T>&, const Tensor<T>&, std::span<const int>,        \
                                 std::span<const std::size_t>);

BRCA_INSTANTIATE_LAYERS(float)
BRCA_INSTANTIATE_LAYERS(double)

}  // namespace brca
