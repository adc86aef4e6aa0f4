#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "barcodelm/autodiff.hpp"
#include "barcodelm/errors.hpp"
#include "barcodelm/rng.hpp"
#include "barcodelm/tensor.hpp"

namespace barcodelm::nn {

using barcodelm::TensorData;
using barcodelm::Value;

namespace detail {

[[noreturn]] inline void shape_error(const std::string& op, const std::string& a,
                                     const std::string& b = std::string()) {
  throw MathError(op + ": incompatible shapes " + a + (b.empty() ? "" : " and " + b));
}

// C[m,n] += A[m,k] * B[k,n]
template <typename T>
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t l = 0; l < k; ++l) {
      const T av = arow[l];
      if (av == T(0)) continue;
      const T* brow = b + l * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B[n,k]^T
template <typename T>
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = T(0);
      for (std::int64_t l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] += acc;
    }
  }
}

// C[m,n] += A[k,m]^T * B[k,n]
template <typename T>
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const T* a, const T* b, T* c) {
  for (std::int64_t l = 0; l < k; ++l) {
    const T* arow = a + l * m;
    const T* brow = b + l * n;
    for (std::int64_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void softmax_rows(const T* x, T* y, std::int64_t rows, std::int64_t cols) {
  for (std::int64_t i = 0; i < rows; ++i) {
    const T* xi = x + i * cols;
    T* yi = y + i * cols;
    T m = xi[0];
    for (std::int64_t j = 1; j < cols; ++j) m = std::max(m, xi[j]);
    T sum = T(0);
    for (std::int64_t j = 0; j < cols; ++j) {
      yi[j] = std::exp(xi[j] - m);
      sum += yi[j];
    }
    const T inv = T(1) / sum;
    for (std::int64_t j = 0; j < cols; ++j) yi[j] *= inv;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

// a + b. b either matches a's shape or is a vector broadcast over the last
// dimension (bias add).
template <typename T>
Value<T> add(Value<T> a, Value<T> b) {
  Tape<T>& tape = *a.tape;
  const auto& av = a.data();
  const auto& bv = b.data();
  const bool same = same_shape(av.shape, bv.shape);
  const bool bias = bv.rank() == 1 && !av.shape.empty() && av.shape.back() == bv.shape[0];
  if (!same && !bias) detail::shape_error("add", av.shape_string(), bv.shape_string());

  TensorData<T> out = av;
  if (same) {
    for (std::int64_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i];
  } else {
    const std::int64_t n = bv.shape[0];
    for (std::int64_t i = 0; i < out.size(); ++i) out.v[i] += bv.v[i % n];
  }
  const int a_id = a.id;
  const int b_id = b.id;
  const int id = tape.add_node(std::move(out), {a_id, b_id}, nullptr);
  tape.node(id).backward = [id, a_id, b_id, same](Tape<T>& t) {
    const TensorData<T>& g = t.grad(id);
    if (t.node(a_id).requires_grad) {
      TensorData<T>& ga = t.grad(a_id);
      for (std::int64_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
    }
    if (t.node(b_id).requires_grad) {
      TensorData<T>& gb = t.grad(b_id);
      if (same) {
        for (std::int64_t i = 0; i < g.size(); ++i) gb.v[i] += g.v[i];
      } else {
        const std::int64_t n = gb.size();
        for (std::int64_t i = 0; i < g.size(); ++i) gb.v[i % n] += g.v[i];
      }
    }
  };
  return Value<T>{&tape, id};
}

template <typename T>
Value<T> scale(Value<T> x, T c) {
  Tape<T>& tape = *x.tape;
  TensorData<T> out = x.data();
  for (auto& v : out.v) v *= c;
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, c](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) gx.v[i] += c * g.v[i];
  };
  return Value<T>{&tape, id};
}

template <typename T>
Value<T> sum_all(Value<T> x) {
  Tape<T>& tape = *x.tape;
  T total = T(0);
  for (const T v : x.data().v) total += v;
  TensorData<T> out({}, {total});
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const T g = t.grad(id).v[0];
    TensorData<T>& gx = t.grad(x_id);
    for (auto& v : gx.v) v += g;
  };
  return Value<T>{&tape, id};
}

// [B, ...] -> [B, rest]; identical storage, new shape.
template <typename T>
Value<T> flatten(Value<T> x) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() < 2) detail::shape_error("flatten", xv.shape_string());
  TensorData<T> out = xv;
  const std::int64_t batch = xv.shape[0];
  out.shape = {batch, xv.size() / batch};
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// matmul: [m,k]x[k,n] -> [m,n]; [B,m,k]x[k,n] -> [B,m,n]
// ---------------------------------------------------------------------------

template <typename T>
Value<T> matmul(Value<T> a, Value<T> b) {
  Tape<T>& tape = *a.tape;
  const auto& av = a.data();
  const auto& bv = b.data();
  if (bv.rank() != 2 || (av.rank() != 2 && av.rank() != 3) || av.shape.back() != bv.shape[0]) {
    detail::shape_error("matmul", av.shape_string(), bv.shape_string());
  }
  const std::int64_t k = bv.shape[0];
  const std::int64_t n = bv.shape[1];
  const std::int64_t m = av.size() / k;  // rows across leading dims

  std::vector<std::int64_t> out_shape = av.shape;
  out_shape.back() = n;
  TensorData<T> out(out_shape);
  detail::gemm_nn(m, n, k, av.v.data(), bv.v.data(), out.v.data());

  const int a_id = a.id;
  const int b_id = b.id;
  const int id = tape.add_node(std::move(out), {a_id, b_id}, nullptr);
  tape.node(id).backward = [id, a_id, b_id, m, n, k](Tape<T>& t) {
    const TensorData<T>& g = t.grad(id);
    if (t.node(a_id).requires_grad) {
      // dA = dC * B^T
      detail::gemm_nt(m, k, n, g.v.data(), t.value(b_id).v.data(), t.grad(a_id).v.data());
    }
    if (t.node(b_id).requires_grad) {
      // dB = A^T * dC
      detail::gemm_tn(k, n, m, t.value(a_id).v.data(), g.v.data(), t.grad(b_id).v.data());
    }
  };
  return Value<T>{&tape, id};
}

// x [.., in] * W [in, out] + b [out]
template <typename T>
Value<T> linear(Value<T> x, Value<T> w, Value<T> b) {
  return add(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// embedding_lookup: table [V, d], ids [B, L] -> [B, L, d]
// ---------------------------------------------------------------------------

template <typename T>
Value<T> embedding_lookup(Value<T> table, const IntMatrix& ids) {
  Tape<T>& tape = *table.tape;
  const auto& tab = table.data();
  if (tab.rank() != 2) detail::shape_error("embedding_lookup", tab.shape_string());
  const std::int64_t vocab = tab.shape[0];
  const std::int64_t dim = tab.shape[1];
  TensorData<T> out({ids.rows, ids.cols, dim});
  for (std::int64_t i = 0; i < ids.rows; ++i) {
    for (std::int64_t j = 0; j < ids.cols; ++j) {
      const std::int32_t id = ids.at(i, j);
      if (id < 0 || id >= vocab) {
        throw MathError("embedding_lookup: token id " + std::to_string(id) +
                        " outside table with " + std::to_string(vocab) + " rows");
      }
      const T* src = tab.v.data() + static_cast<std::int64_t>(id) * dim;
      T* dst = out.v.data() + (i * ids.cols + j) * dim;
      for (std::int64_t c = 0; c < dim; ++c) dst[c] = src[c];
    }
  }
  const int tab_id = table.id;
  const int id = tape.add_node(std::move(out), {tab_id}, nullptr);
  IntMatrix ids_copy = ids;
  tape.node(id).backward = [id, tab_id, ids_copy, dim](Tape<T>& t) {
    if (!t.node(tab_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gt = t.grad(tab_id);
    for (std::int64_t i = 0; i < ids_copy.rows; ++i) {
      for (std::int64_t j = 0; j < ids_copy.cols; ++j) {
        const std::int64_t row = ids_copy.at(i, j);
        const T* src = g.v.data() + (i * ids_copy.cols + j) * dim;
        T* dst = gt.v.data() + row * dim;
        for (std::int64_t c = 0; c < dim; ++c) dst[c] += src[c];
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// layer_norm over the last dimension
// ---------------------------------------------------------------------------

template <typename T>
Value<T> layer_norm(Value<T> x, Value<T> gamma, Value<T> beta, T eps = T(1e-5)) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  const std::int64_t dim = xv.shape.back();
  if (gamma.data().size() != dim || beta.data().size() != dim) {
    detail::shape_error("layer_norm", xv.shape_string(), gamma.data().shape_string());
  }
  const std::int64_t rows = xv.size() / dim;

  auto x_hat = std::make_shared<TensorData<T>>(xv.shape);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(rows));
  TensorData<T> out(xv.shape);
  const T* g = gamma.data().v.data();
  const T* bb = beta.data().v.data();
  for (std::int64_t i = 0; i < rows; ++i) {
    const T* xi = xv.v.data() + i * dim;
    T mean = T(0);
    for (std::int64_t j = 0; j < dim; ++j) mean += xi[j];
    mean /= static_cast<T>(dim);
    T var = T(0);
    for (std::int64_t j = 0; j < dim; ++j) {
      const T d = xi[j] - mean;
      var += d * d;
    }
    var /= static_cast<T>(dim);
    const T istd = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(i)] = istd;
    T* xh = x_hat->v.data() + i * dim;
    T* yo = out.v.data() + i * dim;
    for (std::int64_t j = 0; j < dim; ++j) {
      xh[j] = (xi[j] - mean) * istd;
      yo[j] = g[j] * xh[j] + bb[j];
    }
  }

  const int x_id = x.id, g_id = gamma.id, b_id = beta.id;
  const int id = tape.add_node(std::move(out), {x_id, g_id, b_id}, nullptr);
  tape.node(id).backward = [id, x_id, g_id, b_id, x_hat, inv_std, rows, dim](Tape<T>& t) {
    const TensorData<T>& gy = t.grad(id);
    const T* gamma_v = t.value(g_id).v.data();
    if (t.node(g_id).requires_grad) {
      TensorData<T>& gg = t.grad(g_id);
      for (std::int64_t i = 0; i < rows; ++i) {
        const T* dy = gy.v.data() + i * dim;
        const T* xh = x_hat->v.data() + i * dim;
        for (std::int64_t j = 0; j < dim; ++j) gg.v[j] += dy[j] * xh[j];
      }
    }
    if (t.node(b_id).requires_grad) {
      TensorData<T>& gb = t.grad(b_id);
      for (std::int64_t i = 0; i < rows; ++i) {
        const T* dy = gy.v.data() + i * dim;
        for (std::int64_t j = 0; j < dim; ++j) gb.v[j] += dy[j];
      }
    }
    if (t.node(x_id).requires_grad) {
      TensorData<T>& gx = t.grad(x_id);
      for (std::int64_t i = 0; i < rows; ++i) {
        const T* dy = gy.v.data() + i * dim;
        const T* xh = x_hat->v.data() + i * dim;
        T* dx = gx.v.data() + i * dim;
        T mean_g = T(0), mean_gx = T(0);
        for (std::int64_t j = 0; j < dim; ++j) {
          const T gj = dy[j] * gamma_v[j];
          mean_g += gj;
          mean_gx += gj * xh[j];
        }
        mean_g /= static_cast<T>(dim);
        mean_gx /= static_cast<T>(dim);
        const T istd = (*inv_std)[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < dim; ++j) {
          const T gj = dy[j] * gamma_v[j];
          dx[j] += (gj - mean_g - xh[j] * mean_gx) * istd;
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// softmax over the last dimension
// ---------------------------------------------------------------------------

template <typename T>
Value<T> softmax(Value<T> x) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  const std::int64_t dim = xv.shape.back();
  const std::int64_t rows = xv.size() / dim;
  TensorData<T> out(xv.shape);
  detail::softmax_rows(xv.v.data(), out.v.data(), rows, dim);

  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, rows, dim](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& y = t.value(id);
    const TensorData<T>& gy = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < rows; ++i) {
      const T* yi = y.v.data() + i * dim;
      const T* dyi = gy.v.data() + i * dim;
      T dot = T(0);
      for (std::int64_t j = 0; j < dim; ++j) dot += yi[j] * dyi[j];
      T* dxi = gx.v.data() + i * dim;
      for (std::int64_t j = 0; j < dim; ++j) dxi[j] += yi[j] * (dyi[j] - dot);
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// scaled dot-product attention
// q, k, v: [G, L, dh] (G = batch*heads); key_mask: [G, L], true = attend.
// ---------------------------------------------------------------------------

template <typename T>
Value<T> scaled_dot_product_attention(Value<T> q, Value<T> k, Value<T> v,
                                      const BoolMatrix& key_mask) {
  Tape<T>& tape = *q.tape;
  const auto& qv = q.data();
  const auto& kv = k.data();
  const auto& vv = v.data();
  if (qv.rank() != 3 || !same_shape(qv.shape, kv.shape) || !same_shape(qv.shape, vv.shape)) {
    detail::shape_error("scaled_dot_product_attention", qv.shape_string(), kv.shape_string());
  }
  const std::int64_t groups = qv.shape[0];
  const std::int64_t len = qv.shape[1];
  const std::int64_t dh = qv.shape[2];
  if (key_mask.rows != groups || key_mask.cols != len) {
    detail::shape_error("scaled_dot_product_attention: mask",
                        TensorData<T>::shape_string({key_mask.rows, key_mask.cols}),
                        qv.shape_string());
  }
  const T scale_factor = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  auto attn = std::make_shared<TensorData<T>>(std::vector<std::int64_t>{groups, len, len});
  TensorData<T> out({groups, len, dh});
  std::vector<T> scores(static_cast<std::size_t>(len));
  for (std::int64_t g = 0; g < groups; ++g) {
    const T* qg = qv.v.data() + g * len * dh;
    const T* kg = kv.v.data() + g * len * dh;
    const T* vg = vv.v.data() + g * len * dh;
    T* ag = attn->v.data() + g * len * len;
    T* og = out.v.data() + g * len * dh;
    for (std::int64_t i = 0; i < len; ++i) {
      const T* qi = qg + i * dh;
      T max_score = -std::numeric_limits<T>::infinity();
      for (std::int64_t j = 0; j < len; ++j) {
        if (!key_mask.at(g, j)) continue;
        const T* kj = kg + j * dh;
        T s = T(0);
        for (std::int64_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        s *= scale_factor;
        scores[static_cast<std::size_t>(j)] = s;
        max_score = std::max(max_score, s);
      }
      T* arow = ag + i * len;
      T sum = T(0);
      for (std::int64_t j = 0; j < len; ++j) {
        if (key_mask.at(g, j)) {
          const T e = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
          arow[j] = e;
          sum += e;
        } else {
          arow[j] = T(0);
        }
      }
      if (sum > T(0)) {
        const T inv = T(1) / sum;
        for (std::int64_t j = 0; j < len; ++j) arow[j] *= inv;
      }
      T* orow = og + i * dh;
      for (std::int64_t j = 0; j < len; ++j) {
        const T a = arow[j];
        if (a == T(0)) continue;
        const T* vj = vg + j * dh;
        for (std::int64_t c = 0; c < dh; ++c) orow[c] += a * vj[c];
      }
    }
  }

  const int q_id = q.id, k_id = k.id, v_id = v.id;
  const int id = tape.add_node(std::move(out), {q_id, k_id, v_id}, nullptr);
  tape.node(id).backward = [id, q_id, k_id, v_id, attn, groups, len, dh,
                            scale_factor](Tape<T>& t) {
    const TensorData<T>& gy = t.grad(id);
    const TensorData<T>& qv2 = t.value(q_id);
    const TensorData<T>& kv2 = t.value(k_id);
    const TensorData<T>& vv2 = t.value(v_id);
    const bool need_q = t.node(q_id).requires_grad;
    const bool need_k = t.node(k_id).requires_grad;
    const bool need_v = t.node(v_id).requires_grad;
    TensorData<T>* gq = need_q ? &t.grad(q_id) : nullptr;
    TensorData<T>* gk = need_k ? &t.grad(k_id) : nullptr;
    TensorData<T>* gv = need_v ? &t.grad(v_id) : nullptr;

    std::vector<T> d_attn(static_cast<std::size_t>(len));
    for (std::int64_t g = 0; g < groups; ++g) {
      const T* ag = attn->v.data() + g * len * len;
      const T* dyg = gy.v.data() + g * len * dh;
      const T* qg = qv2.v.data() + g * len * dh;
      const T* kg = kv2.v.data() + g * len * dh;
      const T* vg = vv2.v.data() + g * len * dh;
      for (std::int64_t i = 0; i < len; ++i) {
        const T* arow = ag + i * len;
        const T* dyi = dyg + i * dh;
        // dV += A^T dOut (row i contributes a_ij * dy_i to dV_j)
        if (need_v) {
          T* gvg = gv->v.data() + g * len * dh;
          for (std::int64_t j = 0; j < len; ++j) {
            const T a = arow[j];
            if (a == T(0)) continue;
            T* gvj = gvg + j * dh;
            for (std::int64_t c = 0; c < dh; ++c) gvj[c] += a * dyi[c];
          }
        }
        if (!need_q && !need_k) continue;
        // dA_ij = dy_i . v_j ; dS = A o (dA - sum_j dA_ij A_ij)
        T dot = T(0);
        for (std::int64_t j = 0; j < len; ++j) {
          if (arow[j] == T(0)) {
            d_attn[static_cast<std::size_t>(j)] = T(0);
            continue;
          }
          const T* vj = vg + j * dh;
          T da = T(0);
          for (std::int64_t c = 0; c < dh; ++c) da += dyi[c] * vj[c];
          d_attn[static_cast<std::size_t>(j)] = da;
          dot += da * arow[j];
        }
        for (std::int64_t j = 0; j < len; ++j) {
          const T a = arow[j];
          if (a == T(0)) continue;
          const T ds = a * (d_attn[static_cast<std::size_t>(j)] - dot) * scale_factor;
          if (ds == T(0)) continue;
          if (need_q) {
            T* gqi = gq->v.data() + (g * len + i) * dh;
            const T* kj = kg + j * dh;
            for (std::int64_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
          }
          if (need_k) {
            T* gkj = gk->v.data() + (g * len + j) * dh;
            const T* qi = qg + i * dh;
            for (std::int64_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
          }
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

// Exact GELU: x * Phi(x).
template <typename T>
Value<T> gelu(Value<T> x) {
  Tape<T>& tape = *x.tape;
  constexpr double kInvSqrt2 = 0.7071067811865475244;
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  TensorData<T> out = x.data();
  for (auto& v : out.v) {
    const double xd = static_cast<double>(v);
    v = static_cast<T>(xd * 0.5 * (1.0 + std::erf(xd * kInvSqrt2)));
  }
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, kInvSqrt2, kInvSqrt2Pi](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& xin = t.value(x_id);
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const double xd = static_cast<double>(xin.v[i]);
      const double phi = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xd * xd);
      gx.v[i] += g.v[i] * static_cast<T>(phi + xd * pdf);
    }
  };
  return Value<T>{&tape, id};
}

template <typename T>
Value<T> tanh_act(Value<T> x) {
  Tape<T>& tape = *x.tape;
  TensorData<T> out = x.data();
  for (auto& v : out.v) v = std::tanh(v);
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& y = t.value(id);
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i] * (T(1) - y.v[i] * y.v[i]);
  };
  return Value<T>{&tape, id};
}

// Inverted dropout. Identity when not training or keep_prob == 1.
template <typename T>
Value<T> dropout(Value<T> x, double keep_prob, bool training, std::uint64_t seed) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("dropout: keep probability must be in (0, 1], got " +
                      std::to_string(keep_prob));
  }
  if (!training || keep_prob == 1.0) return x;
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  auto mask = std::make_shared<std::vector<T>>(xv.v.size());
  Rng rng(seed);
  const T inv_keep = static_cast<T>(1.0 / keep_prob);
  TensorData<T> out(xv.shape);
  for (std::size_t i = 0; i < xv.v.size(); ++i) {
    const T m = rng.next_double() < keep_prob ? inv_keep : T(0);
    (*mask)[i] = m;
    out.v[static_cast<std::int64_t>(i)] = xv.v[i] * m;
  }
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, mask](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      gx.v[i] += g.v[i] * (*mask)[static_cast<std::size_t>(i)];
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// 1-D convolution, stride 1, zero 'same' padding (odd kernel width)
// x: [B, L, Cin]; w: [K, Cin, Cout]; b: [Cout] -> [B, L, Cout]
// ---------------------------------------------------------------------------

template <typename T>
Value<T> conv1d_same(Value<T> x, Value<T> w, Value<T> b) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  const auto& wv = w.data();
  const auto& bv = b.data();
  if (xv.rank() != 3 || wv.rank() != 3 || xv.shape[2] != wv.shape[1] || bv.rank() != 1 ||
      bv.shape[0] != wv.shape[2]) {
    detail::shape_error("conv1d", xv.shape_string(), wv.shape_string());
  }
  if (wv.shape[0] % 2 == 0) {
    throw ConfigError("conv1d: kernel width must be odd, got " + std::to_string(wv.shape[0]));
  }
  const std::int64_t batch = xv.shape[0], len = xv.shape[1], cin = xv.shape[2];
  const std::int64_t kw = wv.shape[0], cout = wv.shape[2];
  const std::int64_t pad = (kw - 1) / 2;

  TensorData<T> out({batch, len, cout});
  for (std::int64_t bt = 0; bt < batch; ++bt) {
    for (std::int64_t t = 0; t < len; ++t) {
      T* orow = out.v.data() + (bt * len + t) * cout;
      for (std::int64_t c = 0; c < cout; ++c) orow[c] = bv.v[c];
      for (std::int64_t dk = 0; dk < kw; ++dk) {
        const std::int64_t s = t + dk - pad;
        if (s < 0 || s >= len) continue;
        const T* xrow = xv.v.data() + (bt * len + s) * cin;
        const T* wrow = wv.v.data() + dk * cin * cout;
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          const T xval = xrow[ci];
          if (xval == T(0)) continue;
          const T* wch = wrow + ci * cout;
          for (std::int64_t c = 0; c < cout; ++c) orow[c] += xval * wch[c];
        }
      }
    }
  }

  const int x_id = x.id, w_id = w.id, b_id = b.id;
  const int id = tape.add_node(std::move(out), {x_id, w_id, b_id}, nullptr);
  tape.node(id).backward = [id, x_id, w_id, b_id, batch, len, cin, kw, cout, pad](Tape<T>& t) {
    const TensorData<T>& g = t.grad(id);
    const TensorData<T>& xv2 = t.value(x_id);
    const TensorData<T>& wv2 = t.value(w_id);
    const bool need_x = t.node(x_id).requires_grad;
    const bool need_w = t.node(w_id).requires_grad;
    const bool need_b = t.node(b_id).requires_grad;
    if (need_b) {
      TensorData<T>& gb = t.grad(b_id);
      for (std::int64_t i = 0; i < g.size(); ++i) gb.v[i % cout] += g.v[i];
    }
    if (!need_x && !need_w) return;
    TensorData<T>* gx = need_x ? &t.grad(x_id) : nullptr;
    TensorData<T>* gw = need_w ? &t.grad(w_id) : nullptr;
    for (std::int64_t bt = 0; bt < batch; ++bt) {
      for (std::int64_t tt = 0; tt < len; ++tt) {
        const T* grow = g.v.data() + (bt * len + tt) * cout;
        for (std::int64_t dk = 0; dk < kw; ++dk) {
          const std::int64_t s = tt + dk - pad;
          if (s < 0 || s >= len) continue;
          const T* xrow = xv2.v.data() + (bt * len + s) * cin;
          for (std::int64_t ci = 0; ci < cin; ++ci) {
            const T* wch = wv2.v.data() + (dk * cin + ci) * cout;
            if (need_x) {
              T acc = T(0);
              for (std::int64_t c = 0; c < cout; ++c) acc += grow[c] * wch[c];
              gx->v[(bt * len + s) * cin + ci] += acc;
            }
            if (need_w) {
              const T xval = xrow[ci];
              if (xval == T(0)) continue;
              T* gwch = gw->v.data() + (dk * cin + ci) * cout;
              for (std::int64_t c = 0; c < cout; ++c) gwch[c] += xval * grow[c];
            }
          }
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// batch normalization
// x: [B, F] (per feature) or [B, L, C] (per channel over batch and length).
// Running statistics are caller-owned buffers, updated in training mode.
// ---------------------------------------------------------------------------

template <typename T>
Value<T> batch_norm(Value<T> x, Value<T> gamma, Value<T> beta, TensorData<T>& running_mean,
                    TensorData<T>& running_var, bool training, T momentum = T(0.1),
                    T eps = T(1e-5)) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() != 2 && xv.rank() != 3) detail::shape_error("batch_norm", xv.shape_string());
  const std::int64_t channels = xv.shape.back();
  if (gamma.data().size() != channels || beta.data().size() != channels ||
      running_mean.size() != channels || running_var.size() != channels) {
    detail::shape_error("batch_norm", xv.shape_string(), gamma.data().shape_string());
  }
  const std::int64_t rows = xv.size() / channels;

  auto x_hat = std::make_shared<TensorData<T>>(xv.shape);
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(channels));
  TensorData<T> out(xv.shape);
  const T* gptr = gamma.data().v.data();
  const T* bptr = beta.data().v.data();

  if (training) {
    for (std::int64_t c = 0; c < channels; ++c) {
      T mean = T(0);
      for (std::int64_t r = 0; r < rows; ++r) mean += xv.v[r * channels + c];
      mean /= static_cast<T>(rows);
      T var = T(0);
      for (std::int64_t r = 0; r < rows; ++r) {
        const T d = xv.v[r * channels + c] - mean;
        var += d * d;
      }
      var /= static_cast<T>(rows);  // biased, used for normalization
      const T istd = T(1) / std::sqrt(var + eps);
      (*inv_std)[static_cast<std::size_t>(c)] = istd;
      for (std::int64_t r = 0; r < rows; ++r) {
        const T xh = (xv.v[r * channels + c] - mean) * istd;
        x_hat->v[r * channels + c] = xh;
        out.v[r * channels + c] = gptr[c] * xh + bptr[c];
      }
      const T unbiased = rows > 1 ? var * static_cast<T>(rows) / static_cast<T>(rows - 1) : var;
      running_mean.v[c] = (T(1) - momentum) * running_mean.v[c] + momentum * mean;
      running_var.v[c] = (T(1) - momentum) * running_var.v[c] + momentum * unbiased;
    }
  } else {
    for (std::int64_t c = 0; c < channels; ++c) {
      const T istd = T(1) / std::sqrt(running_var.v[c] + eps);
      (*inv_std)[static_cast<std::size_t>(c)] = istd;
      const T mean = running_mean.v[c];
      for (std::int64_t r = 0; r < rows; ++r) {
        const T xh = (xv.v[r * channels + c] - mean) * istd;
        x_hat->v[r * channels + c] = xh;
        out.v[r * channels + c] = gptr[c] * xh + bptr[c];
      }
    }
  }

  const int x_id = x.id, g_id = gamma.id, b_id = beta.id;
  const int id = tape.add_node(std::move(out), {x_id, g_id, b_id}, nullptr);
  tape.node(id).backward = [id, x_id, g_id, b_id, x_hat, inv_std, rows, channels,
                            training](Tape<T>& t) {
    const TensorData<T>& gy = t.grad(id);
    const T* gamma_v = t.value(g_id).v.data();
    if (t.node(g_id).requires_grad) {
      TensorData<T>& gg = t.grad(g_id);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < channels; ++c) {
          gg.v[c] += gy.v[r * channels + c] * x_hat->v[r * channels + c];
        }
      }
    }
    if (t.node(b_id).requires_grad) {
      TensorData<T>& gb = t.grad(b_id);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < channels; ++c) gb.v[c] += gy.v[r * channels + c];
      }
    }
    if (!t.node(x_id).requires_grad) return;
    TensorData<T>& gx = t.grad(x_id);
    if (training) {
      for (std::int64_t c = 0; c < channels; ++c) {
        T sum_dy = T(0), sum_dy_xh = T(0);
        for (std::int64_t r = 0; r < rows; ++r) {
          const T dy = gy.v[r * channels + c];
          sum_dy += dy;
          sum_dy_xh += dy * x_hat->v[r * channels + c];
        }
        const T istd = (*inv_std)[static_cast<std::size_t>(c)];
        const T n = static_cast<T>(rows);
        for (std::int64_t r = 0; r < rows; ++r) {
          const T dy = gy.v[r * channels + c];
          const T xh = x_hat->v[r * channels + c];
          gx.v[r * channels + c] +=
              gamma_v[c] * istd * (dy - sum_dy / n - xh * sum_dy_xh / n);
        }
      }
    } else {
      for (std::int64_t c = 0; c < channels; ++c) {
        const T factor = gamma_v[c] * (*inv_std)[static_cast<std::size_t>(c)];
        for (std::int64_t r = 0; r < rows; ++r) {
          gx.v[r * channels + c] += gy.v[r * channels + c] * factor;
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// 1-D max pooling, non-overlapping windows; output length floor(L / width).
// x: [B, L, C]
// ---------------------------------------------------------------------------

template <typename T>
Value<T> max_pool1d(Value<T> x, std::int64_t width) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() != 3) detail::shape_error("max_pool1d", xv.shape_string());
  if (width < 1) throw ConfigError("max_pool1d: width must be >= 1");
  const std::int64_t batch = xv.shape[0], len = xv.shape[1], channels = xv.shape[2];
  const std::int64_t out_len = len / width;
  if (out_len == 0) {
    throw ConfigError("max_pool1d: input length " + std::to_string(len) +
                      " shorter than pool width " + std::to_string(width));
  }
  TensorData<T> out({batch, out_len, channels});
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(batch * out_len * channels));
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < out_len; ++t) {
      for (std::int64_t c = 0; c < channels; ++c) {
        std::int64_t best = t * width;
        T best_val = xv.v[(b * len + best) * channels + c];
        for (std::int64_t o = 1; o < width; ++o) {
          const std::int64_t pos = t * width + o;
          const T val = xv.v[(b * len + pos) * channels + c];
          if (val > best_val) {
            best_val = val;
            best = pos;
          }
        }
        out.v[(b * out_len + t) * channels + c] = best_val;
        (*argmax)[static_cast<std::size_t>((b * out_len + t) * channels + c)] =
            (b * len + best) * channels + c;
      }
    }
  }
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, argmax](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      gx.v[(*argmax)[static_cast<std::size_t>(i)]] += g.v[i];
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// head split/merge for multi-head attention
// ---------------------------------------------------------------------------

// [B, L, d] -> [B*H, L, d/H]
template <typename T>
Value<T> split_heads(Value<T> x, std::int64_t heads) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() != 3 || xv.shape[2] % heads != 0) {
    detail::shape_error("split_heads", xv.shape_string());
  }
  const std::int64_t batch = xv.shape[0], len = xv.shape[1], dim = xv.shape[2];
  const std::int64_t dh = dim / heads;
  TensorData<T> out({batch * heads, len, dh});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t l = 0; l < len; ++l) {
      const T* src = xv.v.data() + (b * len + l) * dim;
      for (std::int64_t h = 0; h < heads; ++h) {
        T* dst = out.v.data() + (((b * heads + h) * len) + l) * dh;
        for (std::int64_t c = 0; c < dh; ++c) dst[c] = src[h * dh + c];
      }
    }
  }
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, batch, len, dim, heads, dh](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t l = 0; l < len; ++l) {
        T* dst = gx.v.data() + (b * len + l) * dim;
        for (std::int64_t h = 0; h < heads; ++h) {
          const T* src = g.v.data() + (((b * heads + h) * len) + l) * dh;
          for (std::int64_t c = 0; c < dh; ++c) dst[h * dh + c] += src[c];
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// [B*H, L, dh] -> [B, L, H*dh]
template <typename T>
Value<T> merge_heads(Value<T> x, std::int64_t heads) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() != 3 || xv.shape[0] % heads != 0) {
    detail::shape_error("merge_heads", xv.shape_string());
  }
  const std::int64_t batch = xv.shape[0] / heads, len = xv.shape[1], dh = xv.shape[2];
  const std::int64_t dim = heads * dh;
  TensorData<T> out({batch, len, dim});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t l = 0; l < len; ++l) {
      T* dst = out.v.data() + (b * len + l) * dim;
      for (std::int64_t h = 0; h < heads; ++h) {
        const T* src = xv.v.data() + (((b * heads + h) * len) + l) * dh;
        for (std::int64_t c = 0; c < dh; ++c) dst[h * dh + c] = src[c];
      }
    }
  }
  const int x_id = x.id;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, batch, len, dim, heads, dh](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t l = 0; l < len; ++l) {
        const T* src = g.v.data() + (b * len + l) * dim;
        for (std::int64_t h = 0; h < heads; ++h) {
          T* dst = gx.v.data() + (((b * heads + h) * len) + l) * dh;
          for (std::int64_t c = 0; c < dh; ++c) dst[c] += src[h * dh + c];
        }
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// masked mean pooling: [B, L, d], mask [B, L] -> [B, d]
// ---------------------------------------------------------------------------

template <typename T>
Value<T> masked_mean_pool(Value<T> x, const BoolMatrix& mask) {
  Tape<T>& tape = *x.tape;
  const auto& xv = x.data();
  if (xv.rank() != 3 || mask.rows != xv.shape[0] || mask.cols != xv.shape[1]) {
    detail::shape_error("masked_mean_pool", xv.shape_string(),
                        TensorData<T>::shape_string({mask.rows, mask.cols}));
  }
  const std::int64_t batch = xv.shape[0], len = xv.shape[1], dim = xv.shape[2];
  auto counts = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(batch), 0);
  TensorData<T> out({batch, dim});
  for (std::int64_t b = 0; b < batch; ++b) {
    std::int64_t count = 0;
    T* orow = out.v.data() + b * dim;
    for (std::int64_t l = 0; l < len; ++l) {
      if (!mask.at(b, l)) continue;
      ++count;
      const T* xrow = xv.v.data() + (b * len + l) * dim;
      for (std::int64_t c = 0; c < dim; ++c) orow[c] += xrow[c];
    }
    if (count == 0) {
      throw MathError("masked_mean_pool: row " + std::to_string(b) + " has zero real tokens");
    }
    const T inv = T(1) / static_cast<T>(count);
    for (std::int64_t c = 0; c < dim; ++c) orow[c] *= inv;
    (*counts)[static_cast<std::size_t>(b)] = count;
  }
  const int x_id = x.id;
  BoolMatrix mask_copy = mask;
  const int id = tape.add_node(std::move(out), {x_id}, nullptr);
  tape.node(id).backward = [id, x_id, mask_copy, counts, batch, len, dim](Tape<T>& t) {
    if (!t.node(x_id).requires_grad) return;
    const TensorData<T>& g = t.grad(id);
    TensorData<T>& gx = t.grad(x_id);
    for (std::int64_t b = 0; b < batch; ++b) {
      const T inv = T(1) / static_cast<T>((*counts)[static_cast<std::size_t>(b)]);
      const T* grow = g.v.data() + b * dim;
      for (std::int64_t l = 0; l < len; ++l) {
        if (!mask_copy.at(b, l)) continue;
        T* xrow = gx.v.data() + (b * len + l) * dim;
        for (std::int64_t c = 0; c < dim; ++c) xrow[c] += grow[c] * inv;
      }
    }
  };
  return Value<T>{&tape, id};
}

// ---------------------------------------------------------------------------
// masked cross-entropy with mean reduction over mask-true positions.
// logits: [N, V] or [B, L, V]; targets/mask flattened to N entries.
// ---------------------------------------------------------------------------

template <typename T>
struct CrossEntropyResult {
  Value<T> loss;            // scalar
  double accuracy = 0.0;    // argmax == target over counted positions
  std::int64_t counted = 0; // number of positions contributing to the mean
};

template <typename T>
CrossEntropyResult<T> masked_cross_entropy(Value<T> logits, const std::vector<std::int32_t>& targets,
                                           const std::vector<std::uint8_t>& mask) {
  Tape<T>& tape = *logits.tape;
  const auto& lv = logits.data();
  const std::int64_t vocab = lv.shape.back();
  const std::int64_t n = lv.size() / vocab;
  if (static_cast<std::int64_t>(targets.size()) != n ||
      static_cast<std::int64_t>(mask.size()) != n) {
    detail::shape_error("masked_cross_entropy", lv.shape_string(),
                        "[" + std::to_string(targets.size()) + "]");
  }

  auto probs = std::make_shared<TensorData<T>>(std::vector<std::int64_t>{n, vocab});
  std::int64_t counted = 0;
  std::int64_t correct = 0;
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const std::int32_t target = targets[static_cast<std::size_t>(i)];
    if (target < 0 || target >= vocab) {
      throw MathError("masked_cross_entropy: target " + std::to_string(target) +
                      " outside [0, " + std::to_string(vocab) + ") at position " +
                      std::to_string(i));
    }
    const T* row = lv.v.data() + i * vocab;
    T m = row[0];
    std::int64_t arg = 0;
    for (std::int64_t j = 1; j < vocab; ++j) {
      if (row[j] > m) {
        m = row[j];
        arg = j;
      }
    }
    T sum = T(0);
    T* prow = probs->v.data() + i * vocab;
    for (std::int64_t j = 0; j < vocab; ++j) {
      prow[j] = std::exp(row[j] - m);
      sum += prow[j];
    }
    const T inv = T(1) / sum;
    for (std::int64_t j = 0; j < vocab; ++j) prow[j] *= inv;
    total += -std::log(static_cast<double>(prow[target]));
    ++counted;
    if (arg == target) ++correct;
  }
  if (counted == 0) throw MathError("masked_cross_entropy: loss mask is all false");

  TensorData<T> out({}, {static_cast<T>(total / static_cast<double>(counted))});
  const int l_id = logits.id;
  auto targets_copy = std::make_shared<std::vector<std::int32_t>>(targets);
  auto mask_copy = std::make_shared<std::vector<std::uint8_t>>(mask);
  const int id = tape.add_node(std::move(out), {l_id}, nullptr);
  tape.node(id).backward = [id, l_id, probs, targets_copy, mask_copy, n, vocab,
                            counted](Tape<T>& t) {
    if (!t.node(l_id).requires_grad) return;
    const T g = t.grad(id).v[0];
    const T factor = g / static_cast<T>(counted);
    TensorData<T>& gl = t.grad(l_id);
    for (std::int64_t i = 0; i < n; ++i) {
      if (!(*mask_copy)[static_cast<std::size_t>(i)]) continue;
      const T* prow = probs->v.data() + i * vocab;
      T* grow = gl.v.data() + i * vocab;
      for (std::int64_t j = 0; j < vocab; ++j) grow[j] += factor * prow[j];
      grow[(*targets_copy)[static_cast<std::size_t>(i)]] -= factor;
    }
  };

  CrossEntropyResult<T> result{Value<T>{&tape, id},
                               static_cast<double>(correct) / static_cast<double>(counted),
                               counted};
  return result;
}

}  // namespace barcodelm::nn
