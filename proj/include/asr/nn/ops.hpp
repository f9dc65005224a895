#pragma once

#include <cstddef>

#include "asr/nn/tensor.hpp"

// Differentiable operations. All are pure functions of their inputs that
// record a backward closure when any input requires grad.
namespace asr::nn {

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Scalar reductions.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
// 1-D slice [offset, offset + length).
Tensor slice(const Tensor& a, std::size_t offset, std::size_t length);
Tensor transpose(const Tensor& a);  // [m,n] -> [n,m]
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

// Affine map W·x + b for x of shape [n], or applied row-wise for x of shape [T,n].
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Same-padded stride-1 cross-correlation. input [C_in,H,W], kernels
// [C_out,C_in,kH,kW] with odd kH/kW, bias [C_out] -> [C_out,H,W].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

// 2x2 window, stride 2. A trailing odd row/column is dropped. Gradient goes to
// the first maximal element of each window.
Tensor max_pool2d(const Tensor& input);

// [C,T,F] -> [T, C*F]: one row per time step holding every channel's slice.
Tensor flatten_frames(const Tensor& input);

// Normalizations over the last axis (rank 1 or 2).
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// -log_softmax(logits)[target] for logits of shape [k].
Tensor cross_entropy(const Tensor& logits, std::size_t target);

// Row `index` of table [V,d] as a [d] tensor.
Tensor embedding(const Tensor& table, std::size_t index);

struct LstmState {
  Tensor h;
  Tensor c;
};

// Gate layout in the stacked weights is i, f, g, o (each k rows).
// w_ih [4k,d], w_hh [4k,k], bias [4k].
LstmState lstm_cell(const Tensor& x, const LstmState& state, const Tensor& w_ih, const Tensor& w_hh,
                    const Tensor& bias);

// Single-head scaled dot-product self-attention with a residual connection:
// seq + softmax((seq Wq^T)(seq Wk^T)^T / sqrt(d)) (seq Wv^T). seq is [T,d].
Tensor attention_layer(const Tensor& seq, const Tensor& wq, const Tensor& wk, const Tensor& wv);

}  // namespace asr::nn
