#include "dictdis/tape.hpp"

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "dictdis/common.hpp"

namespace dictdis {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap map2(const Tensor& t) {
  return ConstMap(t.v.data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}

MutMap map2(Tensor& t) {
  return MutMap(t.v.data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCategory::State, "tape: " + what);
}

}  // namespace

const Tensor& Tape::Var::val() const { return tape->value(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  return push(std::move(value), requires_grad, nullptr);
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_set) {
    n.grad = Tensor(n.value.shape);
    n.grad_set = true;
  }
  return n.grad;
}

Var Tape::push(Tensor value, bool requires_grad, std::function<void()> bw) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Tensor& g) {
  Tensor& dst = grad(id);
  require(dst.same_shape(g), "gradient shape mismatch");
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += g.v[i];
}

void Tape::backward(Var root) {
  require(root.tape == this, "backward on foreign var");
  const Node& r = nodes_[static_cast<std::size_t>(root.id)];
  require(r.value.numel() == 1, "backward root must be scalar");
  grad(root.id).v[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad_set && n.backward) n.backward();
  }
}

Var Tape::add(Var a, Var b) {
  require(a.val().same_shape(b.val()), "add shape mismatch");
  Tensor out = a.val();
  const Tensor& bv = b.val();
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += bv.v[i];
  Var o = push(std::move(out), wants_grad(a.id) || wants_grad(b.id), nullptr);
  int ai = a.id, bi = b.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, bi, oi]() {
    const Tensor& g = grad(oi);
    if (wants_grad(ai)) accumulate(ai, g);
    if (wants_grad(bi)) accumulate(bi, g);
  };
  return o;
}

Var Tape::affine(Var a, double k, double c) {
  Tensor out = a.val();
  for (double& x : out.v) x = k * x + c;
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, k]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da(g.shape);
    for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] = k * g.v[i];
    accumulate(ai, da);
  };
  return o;
}

Var Tape::mul_const(Var a, Tensor mask) {
  require(a.val().same_shape(mask), "mul_const shape mismatch");
  Tensor out = a.val();
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask.v[i];
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  auto m = std::make_shared<Tensor>(std::move(mask));
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, m]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da(g.shape);
    for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] = g.v[i] * m->v[i];
    accumulate(ai, da);
  };
  return o;
}

Var Tape::matmul(Var a, Var b, bool ta, bool tb) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  require(A.rank() == 2 && B.rank() == 2, "matmul needs rank-2 inputs");
  std::size_t ar = ta ? A.cols() : A.rows();
  std::size_t ak = ta ? A.rows() : A.cols();
  std::size_t bk = tb ? B.cols() : B.rows();
  std::size_t bc = tb ? B.rows() : B.cols();
  require(ak == bk, "matmul inner dim mismatch " + A.shape_str() + " vs " + B.shape_str());
  Tensor out = Tensor::mat(ar, bc);
  {
    auto C = map2(out);
    auto Am = map2(A);
    auto Bm = map2(B);
    if (!ta && !tb)
      C.noalias() = Am * Bm;
    else if (!ta && tb)
      C.noalias() = Am * Bm.transpose();
    else if (ta && !tb)
      C.noalias() = Am.transpose() * Bm;
    else
      C.noalias() = Am.transpose() * Bm.transpose();
  }
  Var o = push(std::move(out), wants_grad(a.id) || wants_grad(b.id), nullptr);
  int ai = a.id, bi = b.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, bi, oi, ta, tb]() {
    auto G = map2(grad(oi));
    const Tensor& A = value(ai);
    const Tensor& B = value(bi);
    if (wants_grad(ai)) {
      Tensor da(A.shape);
      auto dA = map2(da);
      auto Bm = map2(B);
      if (!ta && !tb)
        dA.noalias() = G * Bm.transpose();
      else if (!ta && tb)
        dA.noalias() = G * Bm;
      else if (ta && !tb)
        dA.noalias() = Bm * G.transpose();
      else
        dA.noalias() = Bm.transpose() * G.transpose();
      accumulate(ai, da);
    }
    if (wants_grad(bi)) {
      Tensor db(B.shape);
      auto dB = map2(db);
      auto Am = map2(A);
      if (!ta && !tb)
        dB.noalias() = Am.transpose() * G;
      else if (!ta && tb)
        dB.noalias() = G.transpose() * Am;
      else if (ta && !tb)
        dB.noalias() = Am * G;
      else
        dB.noalias() = G.transpose() * Am.transpose();
      accumulate(bi, db);
    }
  };
  return o;
}

Var Tape::vecmat(Var a, Var m) {
  const Tensor& A = a.val();
  const Tensor& M = m.val();
  require(A.rank() == 1 && M.rank() == 2 && A.shape[0] == M.rows(), "vecmat shape mismatch");
  Tensor out = Tensor::vec(M.cols());
  for (std::size_t r = 0; r < M.rows(); ++r) {
    double w = A.v[r];
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < M.cols(); ++c) out.v[c] += w * M.at(r, c);
  }
  Var o = push(std::move(out), wants_grad(a.id) || wants_grad(m.id), nullptr);
  int ai = a.id, mi = m.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, mi, oi]() {
    const Tensor& g = grad(oi);
    const Tensor& A = value(ai);
    const Tensor& M = value(mi);
    if (wants_grad(ai)) {
      Tensor da(A.shape);
      for (std::size_t r = 0; r < M.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < M.cols(); ++c) s += M.at(r, c) * g.v[c];
        da.v[r] = s;
      }
      accumulate(ai, da);
    }
    if (wants_grad(mi)) {
      Tensor dm(M.shape);
      for (std::size_t r = 0; r < M.rows(); ++r) {
        double w = A.v[r];
        if (w == 0.0) continue;
        for (std::size_t c = 0; c < M.cols(); ++c) dm.at(r, c) = w * g.v[c];
      }
      accumulate(mi, dm);
    }
  };
  return o;
}

Var Tape::vecmat_const(Var a, Tensor m) {
  const Tensor& A = a.val();
  require(A.rank() == 1 && m.rank() == 2 && A.shape[0] == m.rows(),
          "vecmat_const shape mismatch");
  Tensor out = Tensor::vec(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double w = A.v[r];
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < m.cols(); ++c) out.v[c] += w * m.at(r, c);
  }
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  auto M = std::make_shared<Tensor>(std::move(m));
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, M]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da{M->rows()};
    for (std::size_t r = 0; r < M->rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < M->cols(); ++c) s += M->at(r, c) * g.v[c];
      da.v[r] = s;
    }
    accumulate(ai, da);
  };
  return o;
}

Var Tape::add_bias(Var a, Var b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  require(B.rank() == 1, "add_bias bias must be rank 1");
  Tensor out = A;
  if (A.rank() == 1) {
    require(A.shape == B.shape, "add_bias shape mismatch");
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
  } else {
    require(A.cols() == B.shape[0], "add_bias width mismatch");
    for (std::size_t r = 0; r < A.rows(); ++r)
      for (std::size_t c = 0; c < A.cols(); ++c) out.at(r, c) += B.v[c];
  }
  Var o = push(std::move(out), wants_grad(a.id) || wants_grad(b.id), nullptr);
  int ai = a.id, bi = b.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, bi, oi]() {
    const Tensor& g = grad(oi);
    if (wants_grad(ai)) accumulate(ai, g);
    if (wants_grad(bi)) {
      const Tensor& B = value(bi);
      Tensor db(B.shape);
      if (g.rank() == 1) {
        db = g;
      } else {
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) db.v[c] += g.at(r, c);
      }
      accumulate(bi, db);
    }
  };
  return o;
}

Var Tape::relu(Var a) {
  Tensor out = a.val();
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    const Tensor& x = value(ai);
    Tensor da(x.shape);
    for (std::size_t i = 0; i < x.v.size(); ++i) da.v[i] = x.v[i] > 0.0 ? g.v[i] : 0.0;
    accumulate(ai, da);
  };
  return o;
}

Var Tape::sigmoid(Var a) {
  Tensor out = a.val();
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    const Tensor& y = value(oi);
    Tensor da(y.shape);
    for (std::size_t i = 0; i < y.v.size(); ++i) da.v[i] = g.v[i] * y.v[i] * (1.0 - y.v[i]);
    accumulate(ai, da);
  };
  return o;
}

Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& X = x.val();
  const Tensor& G = gain.val();
  const Tensor& B = bias.val();
  std::size_t rows = X.rank() == 1 ? 1 : X.rows();
  std::size_t n = X.rank() == 1 ? X.shape[0] : X.cols();
  require(G.rank() == 1 && G.shape[0] == n && B.shape == G.shape, "layer_norm shape mismatch");
  Tensor out(X.shape);
  // Normalized rows are recomputed in backward; keeping inv-std is enough.
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  auto means = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.v.data() + r * n;
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += xr[i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(n);
    double is = 1.0 / std::sqrt(var + eps);
    (*means)[r] = mu;
    (*inv_std)[r] = is;
    double* yr = out.v.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) yr[i] = (xr[i] - mu) * is * G.v[i] + B.v[i];
  }
  bool rg = wants_grad(x.id) || wants_grad(gain.id) || wants_grad(bias.id);
  Var o = push(std::move(out), rg, nullptr);
  int xi = x.id, gi = gain.id, bi = bias.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, xi, gi, bi, oi, rows, n, means,
                                                   inv_std]() {
    const Tensor& g = grad(oi);
    const Tensor& X = value(xi);
    const Tensor& G = value(gi);
    Tensor dx(X.shape);
    Tensor dgain{n};
    Tensor dbias{n};
    std::vector<double> xhat(n);
    std::vector<double> dxh(n);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = X.v.data() + r * n;
      const double* gr = g.v.data() + r * n;
      double mu = (*means)[r];
      double is = (*inv_std)[r];
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        xhat[i] = (xr[i] - mu) * is;
        dxh[i] = gr[i] * G.v[i];
        dgain.v[i] += gr[i] * xhat[i];
        dbias.v[i] += gr[i];
        m1 += dxh[i];
        m2 += dxh[i] * xhat[i];
      }
      m1 /= static_cast<double>(n);
      m2 /= static_cast<double>(n);
      double* dxr = dx.v.data() + r * n;
      for (std::size_t i = 0; i < n; ++i) dxr[i] = is * (dxh[i] - m1 - xhat[i] * m2);
    }
    if (wants_grad(xi)) accumulate(xi, dx);
    if (wants_grad(gi)) accumulate(gi, dgain);
    if (wants_grad(bi)) accumulate(bi, dbias);
  };
  return o;
}

Var Tape::softmax_rows(Var a, MaskPtr mask) {
  const Tensor& A = a.val();
  require(A.rank() == 2, "softmax_rows needs rank 2");
  require(mask && mask->rows == A.rows() && mask->cols == A.cols(),
          "softmax_rows mask shape mismatch");
  Tensor out(A.shape);
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double mx = -1e300;
    bool any = false;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      if (!mask->at(r, c)) continue;
      any = true;
      mx = std::max(mx, A.at(r, c));
    }
    require(any, "softmax_rows: fully masked row");
    double z = 0.0;
    for (std::size_t c = 0; c < A.cols(); ++c) {
      if (!mask->at(r, c)) continue;
      double e = std::exp(A.at(r, c) - mx);
      out.at(r, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < A.cols(); ++c) {
      if (mask->at(r, c)) out.at(r, c) /= z;
    }
  }
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, mask]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    const Tensor& y = value(oi);
    Tensor da(y.shape);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dotv = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) {
        if (mask->at(r, c)) dotv += g.at(r, c) * y.at(r, c);
      }
      for (std::size_t c = 0; c < y.cols(); ++c) {
        if (mask->at(r, c)) da.at(r, c) = y.at(r, c) * (g.at(r, c) - dotv);
      }
    }
    accumulate(ai, da);
  };
  return o;
}

Var Tape::softmax_vec(Var a) {
  const Tensor& A = a.val();
  require(A.rank() == 1 && A.numel() > 0, "softmax_vec needs rank 1");
  Tensor out(A.shape);
  double mx = A.v[0];
  for (double x : A.v) mx = std::max(mx, x);
  double z = 0.0;
  for (std::size_t i = 0; i < A.v.size(); ++i) {
    out.v[i] = std::exp(A.v[i] - mx);
    z += out.v[i];
  }
  for (double& x : out.v) x /= z;
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    const Tensor& y = value(oi);
    double dotv = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) dotv += g.v[i] * y.v[i];
    Tensor da(y.shape);
    for (std::size_t i = 0; i < y.v.size(); ++i) da.v[i] = y.v[i] * (g.v[i] - dotv);
    accumulate(ai, da);
  };
  return o;
}

Var Tape::rows_embed(Var table, std::vector<int> ids) {
  const Tensor& T = table.val();
  require(T.rank() == 2, "rows_embed table must be rank 2");
  Tensor out = Tensor::mat(ids.size(), T.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    require(ids[r] >= 0 && static_cast<std::size_t>(ids[r]) < T.rows(),
            "rows_embed index out of range");
    for (std::size_t c = 0; c < T.cols(); ++c) out.at(r, c) = T.at(ids[r], c);
  }
  Var o = push(std::move(out), wants_grad(table.id), nullptr);
  int ti = table.id, oi = o.id;
  auto idp = std::make_shared<std::vector<int>>(std::move(ids));
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ti, oi, idp]() {
    if (!wants_grad(ti)) return;
    const Tensor& g = grad(oi);
    Tensor dt(value(ti).shape);
    for (std::size_t r = 0; r < idp->size(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) dt.at((*idp)[r], c) += g.at(r, c);
    accumulate(ti, dt);
  };
  return o;
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
  const Tensor& A = a.val();
  require(A.rank() == 2 && c0 < c1 && c1 <= A.cols(), "slice_cols out of range");
  Tensor out = Tensor::mat(A.rows(), c1 - c0);
  for (std::size_t r = 0; r < A.rows(); ++r)
    for (std::size_t c = c0; c < c1; ++c) out.at(r, c - c0) = A.at(r, c);
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, c0]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da(value(ai).shape);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) da.at(r, c0 + c) = g.at(r, c);
    accumulate(ai, da);
  };
  return o;
}

Var Tape::row(Var a, std::size_t r) {
  const Tensor& A = a.val();
  require(A.rank() == 2 && r < A.rows(), "row out of range");
  Tensor out = Tensor::vec(A.cols());
  for (std::size_t c = 0; c < A.cols(); ++c) out.v[c] = A.at(r, c);
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, r]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da(value(ai).shape);
    for (std::size_t c = 0; c < g.v.size(); ++c) da.at(r, c) = g.v[c];
    accumulate(ai, da);
  };
  return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  std::size_t rows = parts[0].val().rows();
  std::size_t total = 0;
  bool rg = false;
  for (const Var& p : parts) {
    require(p.val().rank() == 2 && p.val().rows() == rows, "concat_cols row mismatch");
    total += p.val().cols();
    rg = rg || wants_grad(p.id);
  }
  Tensor out = Tensor::mat(rows, total);
  std::size_t off = 0;
  std::vector<int> ids;
  std::vector<std::size_t> widths;
  for (const Var& p : parts) {
    const Tensor& P = p.val();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < P.cols(); ++c) out.at(r, off + c) = P.at(r, c);
    ids.push_back(p.id);
    widths.push_back(P.cols());
    off += P.cols();
  }
  Var o = push(std::move(out), rg, nullptr);
  int oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, oi, ids, widths, rows]() {
    const Tensor& g = grad(oi);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (wants_grad(ids[k])) {
        Tensor dp = Tensor::mat(rows, widths[k]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) dp.at(r, c) = g.at(r, off + c);
        accumulate(ids[k], dp);
      }
      off += widths[k];
    }
  };
  return o;
}

Var Tape::concat_vec(Var a, Var b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  require(A.rank() == 1 && B.rank() == 1, "concat_vec needs rank 1");
  const std::size_t na = A.numel();
  Tensor out = Tensor::vec(na + B.numel());
  std::copy(A.v.begin(), A.v.end(), out.v.begin());
  std::copy(B.v.begin(), B.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(na));
  Var o = push(std::move(out), wants_grad(a.id) || wants_grad(b.id), nullptr);
  int ai = a.id, bi = b.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, bi, oi, na]() {
    const Tensor& g = grad(oi);
    if (wants_grad(ai)) {
      Tensor da{na};
      std::copy(g.v.begin(), g.v.begin() + static_cast<std::ptrdiff_t>(na), da.v.begin());
      accumulate(ai, da);
    }
    if (wants_grad(bi)) {
      Tensor db{g.numel() - na};
      std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(na), g.v.end(), db.v.begin());
      accumulate(bi, db);
    }
  };
  return o;
}

Var Tape::mean_rows_subset(Var a, std::vector<std::size_t> rows) {
  const Tensor& A = a.val();
  require(A.rank() == 2 && !rows.empty(), "mean_rows_subset needs rows");
  Tensor out = Tensor::vec(A.cols());
  for (std::size_t r : rows) {
    require(r < A.rows(), "mean_rows_subset row out of range");
    for (std::size_t c = 0; c < A.cols(); ++c) out.v[c] += A.at(r, c);
  }
  double inv = 1.0 / static_cast<double>(rows.size());
  for (double& x : out.v) x *= inv;
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  auto rp = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, rp, inv]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    Tensor da(value(ai).shape);
    for (std::size_t r : *rp)
      for (std::size_t c = 0; c < g.v.size(); ++c) da.at(r, c) += inv * g.v[c];
    accumulate(ai, da);
  };
  return o;
}

Var Tape::dot(Var a, Var b) {
  const Tensor& A = a.val();
  const Tensor& B = b.val();
  require(A.rank() == 1 && A.shape == B.shape, "dot shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < A.v.size(); ++i) s += A.v[i] * B.v[i];
  Var o = push(Tensor::scalar(s), wants_grad(a.id) || wants_grad(b.id), nullptr);
  int ai = a.id, bi = b.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, bi, oi]() {
    double g = grad(oi).v[0];
    const Tensor& A = value(ai);
    const Tensor& B = value(bi);
    if (wants_grad(ai)) {
      Tensor da(A.shape);
      for (std::size_t i = 0; i < A.v.size(); ++i) da.v[i] = g * B.v[i];
      accumulate(ai, da);
    }
    if (wants_grad(bi)) {
      Tensor db(B.shape);
      for (std::size_t i = 0; i < B.v.size(); ++i) db.v[i] = g * A.v[i];
      accumulate(bi, db);
    }
  };
  return o;
}

Var Tape::scalar_mul_vec(Var s, Var v) {
  const Tensor& S = s.val();
  const Tensor& V = v.val();
  require(S.numel() == 1, "scalar_mul_vec scale must be scalar");
  Tensor out = V;
  for (double& x : out.v) x *= S.v[0];
  Var o = push(std::move(out), wants_grad(s.id) || wants_grad(v.id), nullptr);
  int si = s.id, vi = v.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, si, vi, oi]() {
    const Tensor& g = grad(oi);
    const Tensor& S = value(si);
    const Tensor& V = value(vi);
    if (wants_grad(si)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.v.size(); ++i) acc += g.v[i] * V.v[i];
      accumulate(si, Tensor::scalar(acc));
    }
    if (wants_grad(vi)) {
      Tensor dv(V.shape);
      for (std::size_t i = 0; i < g.v.size(); ++i) dv.v[i] = g.v[i] * S.v[0];
      accumulate(vi, dv);
    }
  };
  return o;
}

Var Tape::normalize_sum(Var a) {
  const Tensor& A = a.val();
  double s = A.sum();
  require(s > 0.0, "normalize_sum: nonpositive mass");
  Tensor out = A;
  for (double& x : out.v) x /= s;
  Var o = push(std::move(out), wants_grad(a.id), nullptr);
  int ai = a.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, ai, oi, s]() {
    if (!wants_grad(ai)) return;
    const Tensor& g = grad(oi);
    const Tensor& y = value(oi);
    double dotv = 0.0;
    for (std::size_t i = 0; i < g.v.size(); ++i) dotv += g.v[i] * y.v[i];
    Tensor da(y.shape);
    for (std::size_t i = 0; i < g.v.size(); ++i) da.v[i] = (g.v[i] - dotv) / s;
    accumulate(ai, da);
  };
  return o;
}

Var Tape::attn_to_vocab(Var weights, std::vector<int> token_ids,
                        std::vector<std::uint8_t> keep, std::size_t vocab_size) {
  const Tensor& W = weights.val();
  require(W.rank() == 1 && W.numel() == token_ids.size() && keep.size() == token_ids.size(),
          "attn_to_vocab shape mismatch");
  Tensor out = Tensor::vec(vocab_size);
  for (std::size_t p = 0; p < token_ids.size(); ++p) {
    if (!keep[p]) continue;
    require(token_ids[p] >= 0 && static_cast<std::size_t>(token_ids[p]) < vocab_size,
            "attn_to_vocab token id out of range");
    out.v[static_cast<std::size_t>(token_ids[p])] += W.v[p];
  }
  Var o = push(std::move(out), wants_grad(weights.id), nullptr);
  int wi = weights.id, oi = o.id;
  auto toks = std::make_shared<std::vector<int>>(std::move(token_ids));
  auto kp = std::make_shared<std::vector<std::uint8_t>>(std::move(keep));
  nodes_[static_cast<std::size_t>(oi)].backward = [this, wi, oi, toks, kp]() {
    if (!wants_grad(wi)) return;
    const Tensor& g = grad(oi);
    Tensor dw(value(wi).shape);
    for (std::size_t p = 0; p < toks->size(); ++p) {
      if ((*kp)[p]) dw.v[p] = g.v[static_cast<std::size_t>((*toks)[p])];
    }
    accumulate(wi, dw);
  };
  return o;
}

Var Tape::nll_smoothed(Var probs, int gold, double smoothing) {
  const Tensor& P = probs.val();
  require(P.rank() == 1 && P.numel() >= 2, "nll_smoothed needs a distribution");
  require(gold >= 0 && static_cast<std::size_t>(gold) < P.numel(), "nll_smoothed gold oob");
  const double floor = 1e-12;
  std::size_t n = P.numel();
  double off = smoothing / static_cast<double>(n - 1);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double q = (static_cast<int>(i) == gold) ? (1.0 - smoothing) : off;
    loss -= q * std::log(std::max(P.v[i], floor));
  }
  Var o = push(Tensor::scalar(loss), wants_grad(probs.id), nullptr);
  int pi = probs.id, oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, pi, oi, gold, smoothing, off,
                                                   floor]() {
    if (!wants_grad(pi)) return;
    double g = grad(oi).v[0];
    const Tensor& P = value(pi);
    Tensor dp(P.shape);
    for (std::size_t i = 0; i < P.v.size(); ++i) {
      if (P.v[i] < floor) continue;  // clamped region: flat
      double q = (static_cast<int>(i) == gold) ? (1.0 - smoothing) : off;
      dp.v[i] = -g * q / P.v[i];
    }
    accumulate(pi, dp);
  };
  return o;
}

Var Tape::add_scalars(const std::vector<Var>& xs) {
  require(!xs.empty(), "add_scalars: empty");
  double s = 0.0;
  bool rg = false;
  std::vector<int> ids;
  for (const Var& x : xs) {
    require(x.val().numel() == 1, "add_scalars: non-scalar term");
    s += x.val().v[0];
    rg = rg || wants_grad(x.id);
    ids.push_back(x.id);
  }
  Var o = push(Tensor::scalar(s), rg, nullptr);
  int oi = o.id;
  nodes_[static_cast<std::size_t>(oi)].backward = [this, oi, ids]() {
    double g = grad(oi).v[0];
    for (int id : ids) {
      if (wants_grad(id)) accumulate(id, Tensor::scalar(g));
    }
  };
  return o;
}

}  // namespace dictdis
