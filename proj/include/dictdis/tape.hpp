#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "dictdis/tensor.hpp"

namespace dictdis {

// Boolean mask shared between ops; 1 = position participates, 0 = masked out.
struct MaskMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;

  MaskMatrix() = default;
  MaskMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), keep(r * c, 1) {}
  std::uint8_t at(std::size_t r, std::size_t c) const { return keep[r * cols + c]; }
  void set(std::size_t r, std::size_t c, bool k) { keep[r * cols + c] = k ? 1 : 0; }
};
using MaskPtr = std::shared_ptr<const MaskMatrix>;

// Reverse-mode autodiff over a linear tape. One Tape per forward pass; the
// tape object must outlive every Var created on it and must not move.
class Tape {
 public:
  struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& val() const;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool wants_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  // Gradient buffer, allocated as zeros on first touch.
  Tensor& grad(int id);
  bool has_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad_set; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. Root must be a
  // scalar. Gradients of earlier backward() calls are kept (accumulate).
  void backward(Var root);

  // --- ops ------------------------------------------------------------
  Var add(Var a, Var b);
  Var affine(Var a, double k, double c);     // k*a + c, elementwise
  Var mul_const(Var a, Tensor mask);         // a .* mask
  Var matmul(Var a, Var b, bool ta, bool tb);
  Var vecmat(Var a, Var m);                  // [k] x [k,n] -> [n]
  Var vecmat_const(Var a, Tensor m);         // constant right factor
  Var add_bias(Var a, Var b);                // [r,n] + [n] per row, or [n]+[n]
  Var relu(Var a);
  Var sigmoid(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
  Var softmax_rows(Var a, MaskPtr mask);     // masked-out cells get exactly 0
  Var softmax_vec(Var a);
  Var rows_embed(Var table, std::vector<int> ids);
  Var slice_cols(Var a, std::size_t c0, std::size_t c1);
  Var row(Var a, std::size_t r);             // [r,n] -> [n]
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_vec(Var a, Var b);
  Var mean_rows_subset(Var a, std::vector<std::size_t> rows);
  Var dot(Var a, Var b);                     // [n],[n] -> scalar
  Var scalar_mul_vec(Var s, Var v);          // scalar * [n]
  Var normalize_sum(Var a);                  // a / sum(a)
  // Scatter-adds weights[p] onto out[token_ids[p]] for kept positions.
  Var attn_to_vocab(Var weights, std::vector<int> token_ids,
                    std::vector<std::uint8_t> keep, std::size_t vocab_size);
  // Label-smoothed negative log likelihood of one probability vector.
  Var nll_smoothed(Var probs, int gold, double smoothing);
  Var add_scalars(const std::vector<Var>& xs);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_set = false;
    std::function<void()> backward;
  };

  Var push(Tensor value, bool requires_grad, std::function<void()> bw);
  void accumulate(int id, const Tensor& g);

  std::vector<Node> nodes_;
};

using Var = Tape::Var;

}  // namespace dictdis
