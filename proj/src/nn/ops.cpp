#include "asr/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asr::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

MatMap as_mat(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return MatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Gradient buffer of an input, or nullptr if that input is not differentiable.
std::vector<double>* grad_of(Node& self, std::size_t i) {
  Node& in = *self.inputs[i];
  return in.requires_grad ? &in.ensure_grad() : nullptr;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

std::vector<double> copy_values(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Rows/cols view over the last axis for the row-wise normalizations.
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& a, const char* op) {
  require(a.rank() == 1 || a.rank() == 2, std::string(op) + ": expected rank 1 or 2");
  if (a.rank() == 1) return {1, a.dim(0)};
  return {a.dim(0), a.dim(1)};
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdx_from_xy) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(a[i]);
  return make_op(a.shape(), y, {a}, [dfdx_from_xy](Node& self) {
    auto* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& x = self.inputs[0]->value;
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += self.grad[i] * dfdx_from_xy(x[i], self.value[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  return make_op(a.shape(), std::move(y), {a, b}, [](Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_op(a.shape(), std::move(y), {a, b}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  return make_op(a.shape(), std::move(y), {a, b}, [](Node& self) {
    const auto& av = self.inputs[0]->value;
    const auto& bv = self.inputs[1]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bv[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * factor;
  return make_op(a.shape(), std::move(y), {a}, [factor](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * factor;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op({1}, {s}, {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (auto& gi : *g) gi += self.grad[0];
    }
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_size(shape) == a.size(), "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  return make_op(std::move(shape), copy_values(a), {a}, [](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t offset, std::size_t length) {
  require(a.rank() == 1 && length > 0 && offset + length <= a.size(), "slice: out of range");
  std::vector<double> y(a.values().begin() + static_cast<std::ptrdiff_t>(offset),
                        a.values().begin() + static_cast<std::ptrdiff_t>(offset + length));
  return make_op({length}, std::move(y), {a}, [offset](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[offset + i] += self.grad[i];
    }
  });
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: expected rank 2");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y[j * m + i] = a[i * n + j];
  return make_op({n, m}, std::move(y), {a}, [m, n](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) (*g)[i * n + j] += self.grad[j * m + i];
    }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> y(m * n);
  as_mat(y, m, n).noalias() = as_mat(a.node()->value, m, k) * as_mat(b.node()->value, k, n);
  return make_op({m, n}, std::move(y), {a, b}, [m, k, n](Node& self) {
    auto dy = as_mat(self.grad, m, n);
    if (auto* g = grad_of(self, 0)) as_mat(*g, m, k).noalias() += dy * as_mat(self.inputs[1]->value, k, n).transpose();
    if (auto* g = grad_of(self, 1)) as_mat(*g, k, n).noalias() += as_mat(self.inputs[0]->value, m, k).transpose() * dy;
  });
}

Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require(weight.rank() == 2, "dense: weight must be [m,n]");
  const std::size_t m = weight.dim(0), n = weight.dim(1);
  require(x.rank() == 1 || x.rank() == 2, "dense: input must be [n] or [T,n]");
  require(x.shape().back() == n, "dense: input width " + shape_string(x.shape()) + " vs weight " +
                                     shape_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.rank() == 1 && bias.dim(0) == m, "dense: bias must be [m]");
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  Shape out_shape = x.rank() == 1 ? Shape{m} : Shape{rows, m};

  std::vector<double> y(rows * m);
  auto ym = as_mat(y, rows, m);
  ym.noalias() = as_mat(x.node()->value, rows, n) * as_mat(weight.node()->value, m, n).transpose();
  if (has_bias) ym.rowwise() += ConstVecMap(bias.values().data(), static_cast<Eigen::Index>(m)).transpose();

  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op(std::move(out_shape), std::move(y), std::move(inputs), [rows, m, n, has_bias](Node& self) {
    auto dy = as_mat(self.grad, rows, m);
    if (auto* g = grad_of(self, 0)) as_mat(*g, rows, n).noalias() += dy * as_mat(self.inputs[1]->value, m, n);
    if (auto* g = grad_of(self, 1)) as_mat(*g, m, n).noalias() += dy.transpose() * as_mat(self.inputs[0]->value, rows, n);
    if (has_bias) {
      if (auto* g = grad_of(self, 2)) VecMap(g->data(), static_cast<Eigen::Index>(m)) += dy.colwise().sum().transpose();
    }
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  require(input.rank() == 3 && kernels.rank() == 4 && bias.rank() == 1, "conv2d: expected [C,H,W], [O,C,kH,kW], [O]");
  const std::size_t ci = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t co = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  require(kernels.dim(1) == ci, "conv2d: channel mismatch " + shape_string(input.shape()) + " vs " +
                                    shape_string(kernels.shape()));
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel dims must be odd for same padding");
  require(bias.dim(0) == co, "conv2d: bias must have one entry per output channel");
  const std::size_t ph = kh / 2, pw = kw / 2, hw = h * w, patch = ci * kh * kw;

  // im2col: column (y*w + x) holds the zero-padded receptive field of output (y, x).
  auto cols = std::make_shared<std::vector<double>>(patch * hw, 0.0);
  const auto& in = input.node()->value;
  for (std::size_t c = 0; c < ci; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        double* row = cols->data() + ((c * kh + i) * kw + j) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + i) - static_cast<std::ptrdiff_t>(ph);
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = in.data() + (c * h + static_cast<std::size_t>(sy)) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) - static_cast<std::ptrdiff_t>(pw);
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) row[y * w + x] = src[sx];
          }
        }
      }

  std::vector<double> y(co * hw);
  auto ym = as_mat(y, co, hw);
  ym.noalias() = as_mat(kernels.node()->value, co, patch) * as_mat(*cols, patch, hw);
  ym.colwise() += ConstVecMap(bias.values().data(), static_cast<Eigen::Index>(co));

  return make_op({co, h, w}, std::move(y), {input, kernels, bias},
                 [=](Node& self) {
                   auto dy = as_mat(self.grad, co, hw);
                   if (auto* g = grad_of(self, 1)) as_mat(*g, co, patch).noalias() += dy * as_mat(*cols, patch, hw).transpose();
                   if (auto* g = grad_of(self, 2)) VecMap(g->data(), static_cast<Eigen::Index>(co)) += dy.rowwise().sum();
                   if (auto* g = grad_of(self, 0)) {
                     std::vector<double> dcols(patch * hw);
                     as_mat(dcols, patch, hw).noalias() = as_mat(self.inputs[1]->value, co, patch).transpose() * dy;
                     for (std::size_t c = 0; c < ci; ++c)
                       for (std::size_t i = 0; i < kh; ++i)
                         for (std::size_t j = 0; j < kw; ++j) {
                           const double* row = dcols.data() + ((c * kh + i) * kw + j) * hw;
                           for (std::size_t yy = 0; yy < h; ++yy) {
                             const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(yy + i) - static_cast<std::ptrdiff_t>(ph);
                             if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
                             double* dst = g->data() + (c * h + static_cast<std::size_t>(sy)) * w;
                             for (std::size_t x = 0; x < w; ++x) {
                               const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + j) - static_cast<std::ptrdiff_t>(pw);
                               if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += row[yy * w + x];
                             }
                           }
                         }
                   }
                 });
}

Tensor max_pool2d(const Tensor& input) {
  require(input.rank() == 3, "max_pool2d: expected [C,H,W]");
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  require(h >= 2 && w >= 2, "max_pool2d: input " + shape_string(input.shape()) + " smaller than one 2x2 window");
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> y(c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  const auto& in = input.node()->value;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (ch * h + 2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            std::size_t idx = (ch * h + 2 * i + di) * w + 2 * j + dj;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (ch * oh + i) * ow + j;
        y[o] = in[best];
        (*argmax)[o] = best;
      }
  return make_op({c, oh, ow}, std::move(y), {input}, [argmax](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t o = 0; o < argmax->size(); ++o) (*g)[(*argmax)[o]] += self.grad[o];
    }
  });
}

Tensor flatten_frames(const Tensor& input) {
  require(input.rank() == 3, "flatten_frames: expected [C,T,F]");
  const std::size_t c = input.dim(0), t = input.dim(1), f = input.dim(2);
  std::vector<double> y(input.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ti = 0; ti < t; ++ti)
      for (std::size_t fi = 0; fi < f; ++fi) y[ti * c * f + ch * f + fi] = input[(ch * t + ti) * f + fi];
  return make_op({t, c * f}, std::move(y), {input}, [c, t, f](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t ti = 0; ti < t; ++ti)
          for (std::size_t fi = 0; fi < f; ++fi) (*g)[(ch * t + ti) * f + fi] += self.grad[ti * c * f + ch * f + fi];
    }
  });
}

Tensor softmax(const Tensor& a) {
  auto [rows, cols] = rows_cols(a, "softmax");
  std::vector<double> y(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (y[r * cols + j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] /= z;
  }
  return make_op(a.shape(), std::move(y), {a}, [rows, cols](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yv = self.value.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * yv[j];
      for (std::size_t j = 0; j < cols; ++j) (*g)[r * cols + j] += yv[j] * (dy[j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  auto [rows, cols] = rows_cols(a, "log_softmax");
  std::vector<double> y(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.values().data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(x[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) y[r * cols + j] = x[j] - lse;
  }
  return make_op(a.shape(), std::move(y), {a}, [rows, cols](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* yv = self.value.data() + r * cols;
      const double* dy = self.grad.data() + r * cols;
      double total = 0.0;
      for (std::size_t j = 0; j < cols; ++j) total += dy[j];
      for (std::size_t j = 0; j < cols; ++j) (*g)[r * cols + j] += dy[j] - std::exp(yv[j]) * total;
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  require(logits.rank() == 1, "cross_entropy: logits must be rank 1");
  if (target >= logits.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  }
  const auto x = logits.values();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  return make_op({1}, {lse - x[target]}, {logits}, [target, lse](Node& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    const auto& xv = self.inputs[0]->value;
    for (std::size_t j = 0; j < xv.size(); ++j) {
      const double p = std::exp(xv[j] - lse);
      (*g)[j] += self.grad[0] * (p - (j == target ? 1.0 : 0.0));
    }
  });
}

Tensor embedding(const Tensor& table, std::size_t index) {
  require(table.rank() == 2, "embedding: table must be [V,d]");
  if (index >= table.dim(0)) throw std::out_of_range("embedding: index out of range");
  const std::size_t d = table.dim(1);
  std::vector<double> y(table.values().begin() + static_cast<std::ptrdiff_t>(index * d),
                        table.values().begin() + static_cast<std::ptrdiff_t>((index + 1) * d));
  return make_op({d}, std::move(y), {table}, [index, d](Node& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t j = 0; j < d; ++j) (*g)[index * d + j] += self.grad[j];
    }
  });
}

LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_ih, const Tensor& w_hh,
                    const Tensor& bias) {
  require(state.h.rank() == 1 && state.c.shape() == state.h.shape(), "lstm_cell: h and c must be [k]");
  const std::size_t k = state.h.dim(0);
  require(w_ih.rank() == 2 && w_ih.dim(0) == 4 * k && w_hh.rank() == 2 && w_hh.dim(0) == 4 * k && w_hh.dim(1) == k,
          "lstm_cell: gate weights must be [4k,d] and [4k,k]");
  auto gates = add(dense(x, w_ih, bias), dense(state.h, w_hh, Tensor{}));
  auto i = sigmoid(slice(gates, 0, k));
  auto f = sigmoid(slice(gates, k, k));
  auto g = tanh(slice(gates, 2 * k, k));
  auto o = sigmoid(slice(gates, 3 * k, k));
  auto c_next = add(mul(f, state.c), mul(i, g));
  auto h_next = mul(o, tanh(c_next));
  return {h_next, c_next};
}

Tensor attention_layer(const Tensor& seq, const Tensor& wq, const Tensor& wk, const Tensor& wv) {
  require(seq.rank() == 2, "attention_layer: expected [T,d]");
  const std::size_t d = seq.dim(1);
  for (const auto* w : {&wq, &wk, &wv}) {
    require(w->rank() == 2 && w->dim(0) == d && w->dim(1) == d, "attention_layer: projections must be [d,d]");
  }
  auto q = dense(seq, wq, Tensor{});
  auto kmat = dense(seq, wk, Tensor{});
  auto v = dense(seq, wv, Tensor{});
  auto scores = scale(matmul(q, transpose(kmat)), 1.0 / std::sqrt(static_cast<double>(d)));
  return add(seq, matmul(softmax(scores), v));
}

}  // namespace asr::nn
