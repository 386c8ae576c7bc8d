#include "textrev/tape.hpp"

#include <cassert>
#include <cmath>

namespace textrev {

Var Tape::new_node(int rows, int cols, bool requires) {
  Node n;
  n.rows = rows;
  n.cols = cols;
  n.requires = requires;
  n.val.assign(static_cast<size_t>(rows) * cols, 0.0f);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, rows, cols};
}

Var Tape::leaf(const Matrix& m, bool requires_grad) {
  Var v = new_node(m.rows, m.cols, requires_grad);
  nodes_[v.id].val = m.data;
  return v;
}

Var Tape::leaf_view(const Matrix* m, bool requires_grad) {
  Node n;
  n.rows = m->rows;
  n.cols = m->cols;
  n.requires = requires_grad;
  n.ext = m->data.data();
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, m->rows, m->cols};
}

Matrix Tape::value_matrix(Var v) const {
  Matrix m(v.rows, v.cols);
  const float* p = val(v);
  std::copy(p, p + m.size(), m.data.begin());
  return m;
}

Matrix Tape::grad_matrix(Var v) const {
  Matrix m(v.rows, v.cols);
  const Node& n = nodes_[v.id];
  if (!n.grad.empty()) std::copy(n.grad.begin(), n.grad.end(), m.data.begin());
  return m;
}

Var Tape::add(Var a, Var b) {
  assert(a.rows == b.rows && a.cols == b.cols);
  Var out = new_node(a.rows, a.cols, requires_grad(a) || requires_grad(b));
  const float* pa = val(a);
  const float* pb = val(b);
  float* po = nodes_[out.id].val.data();
  size_t n = nodes_[out.id].val.size();
  for (size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (nodes_[out.id].requires) {
    int oa = a.id, ob = b.id, oo = out.id;
    nodes_[out.id].back = [oa, ob, oo](Tape& t) {
      const float* g = t.nodes_[oo].grad.data();
      size_t n = t.nodes_[oo].grad.size();
      if (t.nodes_[oa].requires) {
        float* ga = t.ensure_grad(oa);
        for (size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (t.nodes_[ob].requires) {
        float* gb = t.ensure_grad(ob);
        for (size_t i = 0; i < n; ++i) gb[i] += g[i];
      }
    };
  }
  return out;
}

Var Tape::add_row(Var a, Var bias) {
  assert(bias.rows == 1 && bias.cols == a.cols);
  Var out = new_node(a.rows, a.cols, requires_grad(a) || requires_grad(bias));
  const float* pa = val(a);
  const float* pb = val(bias);
  float* po = nodes_[out.id].val.data();
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c)
      po[static_cast<size_t>(r) * a.cols + c] = pa[static_cast<size_t>(r) * a.cols + c] + pb[c];
  if (nodes_[out.id].requires) {
    int oa = a.id, ob = bias.id, oo = out.id;
    nodes_[out.id].back = [oa, ob, oo](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      if (t.nodes_[oa].requires) {
        float* ga = t.ensure_grad(oa);
        for (size_t i = 0; i < no.grad.size(); ++i) ga[i] += g[i];
      }
      if (t.nodes_[ob].requires) {
        float* gb = t.ensure_grad(ob);
        for (int r = 0; r < no.rows; ++r)
          for (int c = 0; c < no.cols; ++c) gb[c] += g[static_cast<size_t>(r) * no.cols + c];
      }
    };
  }
  return out;
}

Var Tape::affine(Var a, float k, float c) {
  Var out = new_node(a.rows, a.cols, requires_grad(a));
  const float* pa = val(a);
  float* po = nodes_[out.id].val.data();
  size_t n = nodes_[out.id].val.size();
  for (size_t i = 0; i < n; ++i) po[i] = k * pa[i] + c;
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo, k](Tape& t) {
      const float* g = t.nodes_[oo].grad.data();
      float* ga = t.ensure_grad(oa);
      size_t n = t.nodes_[oo].grad.size();
      for (size_t i = 0; i < n; ++i) ga[i] += k * g[i];
    };
  }
  return out;
}

Var Tape::hadamard(Var a, Var b) {
  assert(a.rows == b.rows && a.cols == b.cols);
  Var out = new_node(a.rows, a.cols, requires_grad(a) || requires_grad(b));
  const float* pa = val(a);
  const float* pb = val(b);
  float* po = nodes_[out.id].val.data();
  size_t n = nodes_[out.id].val.size();
  for (size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  if (nodes_[out.id].requires) {
    int oa = a.id, ob = b.id, oo = out.id;
    nodes_[out.id].back = [oa, ob, oo](Tape& t) {
      const float* g = t.nodes_[oo].grad.data();
      const float* pa = t.value_ptr(oa);
      const float* pb = t.value_ptr(ob);
      size_t n = t.nodes_[oo].grad.size();
      if (t.nodes_[oa].requires) {
        float* ga = t.ensure_grad(oa);
        for (size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
      }
      if (t.nodes_[ob].requires) {
        float* gb = t.ensure_grad(ob);
        for (size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
      }
    };
  }
  return out;
}

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const int m = trans_a ? a.cols : a.rows;
  const int k = trans_a ? a.rows : a.cols;
  const int kb = trans_b ? b.cols : b.rows;
  const int n = trans_b ? b.rows : b.cols;
  assert(k == kb);
  (void)kb;
  Var out = new_node(m, n, requires_grad(a) || requires_grad(b));
  gemm(trans_a, trans_b, m, n, k, 1.0f, val(a), a.cols, val(b), b.cols, 0.0f,
       nodes_[out.id].val.data(), n);
  if (nodes_[out.id].requires) {
    int oa = a.id, ob = b.id, oo = out.id;
    nodes_[out.id].back = [oa, ob, oo, trans_a, trans_b, m, n, k](Tape& t) {
      const float* g = t.nodes_[oo].grad.data();
      const float* pa = t.value_ptr(oa);
      const float* pb = t.value_ptr(ob);
      const int lda = t.nodes_[oa].cols;
      const int ldb = t.nodes_[ob].cols;
      if (t.nodes_[oa].requires) {
        float* ga = t.ensure_grad(oa);
        if (!trans_a) {
          // dA = dC * op(B)^T
          if (!trans_b)
            gemm(false, true, m, k, n, 1.0f, g, n, pb, ldb, 1.0f, ga, lda);
          else
            gemm(false, false, m, k, n, 1.0f, g, n, pb, ldb, 1.0f, ga, lda);
        } else {
          // A is (k x m) physically; dA = op(B) * dC^T -> computed as per form
          if (!trans_b)
            gemm(false, true, k, m, n, 1.0f, pb, ldb, g, n, 1.0f, ga, lda);
          else
            gemm(true, true, k, m, n, 1.0f, pb, ldb, g, n, 1.0f, ga, lda);
        }
      }
      if (t.nodes_[ob].requires) {
        float* gb = t.ensure_grad(ob);
        if (!trans_b) {
          // dB = op(A)^T * dC
          if (!trans_a)
            gemm(true, false, k, n, m, 1.0f, pa, lda, g, n, 1.0f, gb, ldb);
          else
            gemm(false, false, k, n, m, 1.0f, pa, lda, g, n, 1.0f, gb, ldb);
        } else {
          // B is (n x k) physically; dB = dC^T * op(A)
          if (!trans_a)
            gemm(true, false, n, k, m, 1.0f, g, n, pa, lda, 1.0f, gb, ldb);
          else
            gemm(true, true, n, k, m, 1.0f, g, n, pa, lda, 1.0f, gb, ldb);
        }
      }
    };
  }
  return out;
}

Var Tape::gather_rows(Var table, std::vector<int> ids) {
  Var out = new_node(static_cast<int>(ids.size()), table.cols, requires_grad(table));
  const float* pt = val(table);
  float* po = nodes_[out.id].val.data();
  for (size_t i = 0; i < ids.size(); ++i) {
    assert(ids[i] >= 0 && ids[i] < table.rows);
    const float* src = pt + static_cast<size_t>(ids[i]) * table.cols;
    std::copy(src, src + table.cols, po + i * table.cols);
  }
  if (nodes_[out.id].requires) {
    int ot = table.id, oo = out.id;
    auto idv = std::move(ids);
    nodes_[out.id].back = [ot, oo, idv](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      float* gt = t.ensure_grad(ot);
      const int cols = no.cols;
      for (size_t i = 0; i < idv.size(); ++i) {
        float* dst = gt + static_cast<size_t>(idv[i]) * cols;
        const float* src = g + i * cols;
        for (int c = 0; c < cols; ++c) dst[c] += src[c];
      }
    };
  }
  return out;
}

Var Tape::concat_rows(Var a, Var b) {
  assert(a.cols == b.cols);
  Var out = new_node(a.rows + b.rows, a.cols, requires_grad(a) || requires_grad(b));
  float* po = nodes_[out.id].val.data();
  std::copy(val(a), val(a) + static_cast<size_t>(a.rows) * a.cols, po);
  std::copy(val(b), val(b) + static_cast<size_t>(b.rows) * b.cols,
            po + static_cast<size_t>(a.rows) * a.cols);
  if (nodes_[out.id].requires) {
    int oa = a.id, ob = b.id, oo = out.id;
    int arows = a.rows;
    nodes_[out.id].back = [oa, ob, oo, arows](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      const int cols = no.cols;
      if (t.nodes_[oa].requires) {
        float* ga = t.ensure_grad(oa);
        size_t n = static_cast<size_t>(arows) * cols;
        for (size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (t.nodes_[ob].requires) {
        float* gb = t.ensure_grad(ob);
        size_t off = static_cast<size_t>(arows) * cols;
        size_t n = static_cast<size_t>(no.rows - arows) * cols;
        for (size_t i = 0; i < n; ++i) gb[i] += g[off + i];
      }
    };
  }
  return out;
}

Var Tape::slice_rows(Var a, int r0, int r1) {
  assert(0 <= r0 && r0 <= r1 && r1 <= a.rows);
  Var out = new_node(r1 - r0, a.cols, requires_grad(a));
  const float* pa = val(a) + static_cast<size_t>(r0) * a.cols;
  std::copy(pa, pa + static_cast<size_t>(r1 - r0) * a.cols, nodes_[out.id].val.data());
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo, r0](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      float* ga = t.ensure_grad(oa) + static_cast<size_t>(r0) * no.cols;
      size_t n = static_cast<size_t>(no.rows) * no.cols;
      for (size_t i = 0; i < n; ++i) ga[i] += g[i];
    };
  }
  return out;
}

Var Tape::slice_cols(Var a, int c0, int c1) {
  assert(0 <= c0 && c0 <= c1 && c1 <= a.cols);
  Var out = new_node(a.rows, c1 - c0, requires_grad(a));
  const float* pa = val(a);
  float* po = nodes_[out.id].val.data();
  for (int r = 0; r < a.rows; ++r)
    std::copy(pa + static_cast<size_t>(r) * a.cols + c0,
              pa + static_cast<size_t>(r) * a.cols + c1,
              po + static_cast<size_t>(r) * (c1 - c0));
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    int acols = a.cols;
    nodes_[out.id].back = [oa, oo, c0, acols](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      float* ga = t.ensure_grad(oa);
      for (int r = 0; r < no.rows; ++r)
        for (int c = 0; c < no.cols; ++c)
          ga[static_cast<size_t>(r) * acols + c0 + c] += g[static_cast<size_t>(r) * no.cols + c];
    };
  }
  return out;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  assert(!parts.empty());
  int total = 0;
  bool req = false;
  for (const Var& p : parts) {
    assert(p.rows == parts[0].rows);
    total += p.cols;
    req = req || requires_grad(p);
  }
  Var out = new_node(parts[0].rows, total, req);
  float* po = nodes_[out.id].val.data();
  int off = 0;
  for (const Var& p : parts) {
    const float* pp = val(p);
    for (int r = 0; r < p.rows; ++r)
      std::copy(pp + static_cast<size_t>(r) * p.cols, pp + static_cast<size_t>(r + 1) * p.cols,
                po + static_cast<size_t>(r) * total + off);
    off += p.cols;
  }
  if (req) {
    std::vector<int> ids;
    std::vector<int> widths;
    for (const Var& p : parts) {
      ids.push_back(p.id);
      widths.push_back(p.cols);
    }
    int oo = out.id;
    nodes_[out.id].back = [ids, widths, oo, total](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      int off = 0;
      for (size_t k = 0; k < ids.size(); ++k) {
        if (t.nodes_[ids[k]].requires) {
          float* gp = t.ensure_grad(ids[k]);
          for (int r = 0; r < no.rows; ++r)
            for (int c = 0; c < widths[k]; ++c)
              gp[static_cast<size_t>(r) * widths[k] + c] +=
                  g[static_cast<size_t>(r) * total + off + c];
        }
        off += widths[k];
      }
    };
  }
  return out;
}

Var Tape::softmax_rows(Var a) {
  Var out = new_node(a.rows, a.cols, requires_grad(a));
  const float* pa = val(a);
  float* po = nodes_[out.id].val.data();
  for (int r = 0; r < a.rows; ++r) {
    const float* x = pa + static_cast<size_t>(r) * a.cols;
    float* y = po + static_cast<size_t>(r) * a.cols;
    float mx = x[0];
    for (int c = 1; c < a.cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (int c = 0; c < a.cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      sum += y[c];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (int c = 0; c < a.cols; ++c) y[c] *= inv;
  }
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      const float* y = no.val.data();
      float* ga = t.ensure_grad(oa);
      for (int r = 0; r < no.rows; ++r) {
        const float* gr = g + static_cast<size_t>(r) * no.cols;
        const float* yr = y + static_cast<size_t>(r) * no.cols;
        float* gar = ga + static_cast<size_t>(r) * no.cols;
        double dot = 0.0;
        for (int c = 0; c < no.cols; ++c) dot += static_cast<double>(gr[c]) * yr[c];
        for (int c = 0; c < no.cols; ++c)
          gar[c] += yr[c] * (gr[c] - static_cast<float>(dot));
      }
    };
  }
  return out;
}

Var Tape::logc(Var a, float eps) {
  Var out = new_node(a.rows, a.cols, requires_grad(a));
  const float* pa = val(a);
  float* po = nodes_[out.id].val.data();
  size_t n = nodes_[out.id].val.size();
  for (size_t i = 0; i < n; ++i) po[i] = std::log(std::max(pa[i], eps));
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo, eps](Tape& t) {
      const float* g = t.nodes_[oo].grad.data();
      const float* pa = t.value_ptr(oa);
      float* ga = t.ensure_grad(oa);
      size_t n = t.nodes_[oo].grad.size();
      for (size_t i = 0; i < n; ++i)
        if (pa[i] > eps) ga[i] += g[i] / pa[i];
    };
  }
  return out;
}

Var Tape::sum_all(Var a) {
  Var out = new_node(1, 1, requires_grad(a));
  const float* pa = val(a);
  double acc = 0.0;
  size_t n = static_cast<size_t>(a.rows) * a.cols;
  for (size_t i = 0; i < n; ++i) acc += pa[i];
  nodes_[out.id].val[0] = static_cast<float>(acc);
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo](Tape& t) {
      const float g = t.nodes_[oo].grad[0];
      float* ga = t.ensure_grad(oa);
      size_t n = t.nodes_[oa].val.empty()
                     ? static_cast<size_t>(t.nodes_[oa].rows) * t.nodes_[oa].cols
                     : t.nodes_[oa].val.size();
      for (size_t i = 0; i < n; ++i) ga[i] += g;
    };
  }
  return out;
}

Var Tape::mean_rows(Var a) {
  Var out = new_node(1, a.cols, requires_grad(a));
  const float* pa = val(a);
  float* po = nodes_[out.id].val.data();
  for (int c = 0; c < a.cols; ++c) {
    double acc = 0.0;
    for (int r = 0; r < a.rows; ++r) acc += pa[static_cast<size_t>(r) * a.cols + c];
    po[c] = static_cast<float>(acc / a.rows);
  }
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    int arows = a.rows;
    nodes_[out.id].back = [oa, oo, arows](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      float* ga = t.ensure_grad(oa);
      const float inv = 1.0f / static_cast<float>(arows);
      for (int r = 0; r < arows; ++r)
        for (int c = 0; c < no.cols; ++c) ga[static_cast<size_t>(r) * no.cols + c] += g[c] * inv;
    };
  }
  return out;
}

Var Tape::pick(Var a, int r, int c) {
  assert(r < a.rows && c < a.cols);
  Var out = new_node(1, 1, requires_grad(a));
  nodes_[out.id].val[0] = val(a)[static_cast<size_t>(r) * a.cols + c];
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    int acols = a.cols;
    nodes_[out.id].back = [oa, oo, r, c, acols](Tape& t) {
      t.ensure_grad(oa)[static_cast<size_t>(r) * acols + c] += t.nodes_[oo].grad[0];
    };
  }
  return out;
}

Var Tape::layer_norm_rows(Var x, Var gain, Var bias, float eps) {
  assert(gain.rows == 1 && gain.cols == x.cols && bias.rows == 1 && bias.cols == x.cols);
  bool req = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
  Var out = new_node(x.rows, x.cols, req);
  Node& no = nodes_[out.id];
  // aux layout: per row [x_hat (cols), inv_sigma (1)]
  no.aux.assign(static_cast<size_t>(x.rows) * (x.cols + 1), 0.0f);
  const float* px = val(x);
  const float* pg = val(gain);
  const float* pb = val(bias);
  float* po = no.val.data();
  for (int r = 0; r < x.rows; ++r) {
    const float* xr = px + static_cast<size_t>(r) * x.cols;
    float* yr = po + static_cast<size_t>(r) * x.cols;
    float* hat = no.aux.data() + static_cast<size_t>(r) * (x.cols + 1);
    double mu = 0.0;
    for (int c = 0; c < x.cols; ++c) mu += xr[c];
    mu /= x.cols;
    double var = 0.0;
    for (int c = 0; c < x.cols; ++c) {
      double d = xr[c] - mu;
      var += d * d;
    }
    var /= x.cols;
    const float inv_sigma = static_cast<float>(1.0 / std::sqrt(var + eps));
    for (int c = 0; c < x.cols; ++c) {
      hat[c] = (xr[c] - static_cast<float>(mu)) * inv_sigma;
      yr[c] = hat[c] * pg[c] + pb[c];
    }
    hat[x.cols] = inv_sigma;
  }
  if (req) {
    int ox = x.id, og = gain.id, ob = bias.id, oo = out.id;
    nodes_[out.id].back = [ox, og, ob, oo](Tape& t) {
      const Node& no = t.nodes_[oo];
      const int cols = no.cols;
      const float* g = no.grad.data();
      const float* pg = t.value_ptr(og);
      for (int r = 0; r < no.rows; ++r) {
        const float* gr = g + static_cast<size_t>(r) * cols;
        const float* hat = no.aux.data() + static_cast<size_t>(r) * (cols + 1);
        const float inv_sigma = hat[cols];
        if (t.nodes_[og].requires) {
          float* gg = t.ensure_grad(og);
          for (int c = 0; c < cols; ++c) gg[c] += gr[c] * hat[c];
        }
        if (t.nodes_[ob].requires) {
          float* gb = t.ensure_grad(ob);
          for (int c = 0; c < cols; ++c) gb[c] += gr[c];
        }
        if (t.nodes_[ox].requires) {
          float* gx = t.ensure_grad(ox) + static_cast<size_t>(r) * cols;
          double m1 = 0.0, m2 = 0.0;
          for (int c = 0; c < cols; ++c) {
            const double gd = static_cast<double>(gr[c]) * pg[c];
            m1 += gd;
            m2 += gd * hat[c];
          }
          m1 /= cols;
          m2 /= cols;
          for (int c = 0; c < cols; ++c) {
            const double gd = static_cast<double>(gr[c]) * pg[c];
            gx[c] += static_cast<float>((gd - m1 - hat[c] * m2) * inv_sigma);
          }
        }
      }
    };
  }
  return out;
}

Var Tape::gelu(Var a) {
  Var out = new_node(a.rows, a.cols, requires_grad(a));
  Node& no = nodes_[out.id];
  no.aux.assign(static_cast<size_t>(a.rows) * a.cols, 0.0f);
  const float* pa = val(a);
  float* po = no.val.data();
  constexpr float c0 = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float c1 = 0.044715f;
  size_t n = no.val.size();
  for (size_t i = 0; i < n; ++i) {
    const float x = pa[i];
    const float th = std::tanh(c0 * (x + c1 * x * x * x));
    no.aux[i] = th;
    po[i] = 0.5f * x * (1.0f + th);
  }
  if (nodes_[out.id].requires) {
    int oa = a.id, oo = out.id;
    nodes_[out.id].back = [oa, oo](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float* g = no.grad.data();
      const float* pa = t.value_ptr(oa);
      float* ga = t.ensure_grad(oa);
      constexpr float c0 = 0.7978845608028654f;
      constexpr float c1 = 0.044715f;
      size_t n = no.grad.size();
      for (size_t i = 0; i < n; ++i) {
        const float x = pa[i];
        const float th = no.aux[i];
        const float sech2 = 1.0f - th * th;
        const float dy = 0.5f * (1.0f + th) + 0.5f * x * sech2 * c0 * (1.0f + 3.0f * c1 * x * x);
        ga[i] += g[i] * dy;
      }
    };
  }
  return out;
}

Var Tape::cross_entropy_from_logits(Var logits, std::vector<int> targets) {
  assert(static_cast<int>(targets.size()) == logits.rows);
  Var out = new_node(1, 1, requires_grad(logits));
  Node& no = nodes_[out.id];
  // aux: softmax probabilities, row-major
  no.aux.assign(static_cast<size_t>(logits.rows) * logits.cols, 0.0f);
  const float* pl = val(logits);
  double total = 0.0;
  for (int r = 0; r < logits.rows; ++r) {
    const float* x = pl + static_cast<size_t>(r) * logits.cols;
    float* p = no.aux.data() + static_cast<size_t>(r) * logits.cols;
    float mx = x[0];
    for (int c = 1; c < logits.cols; ++c) mx = std::max(mx, x[c]);
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) {
      p[c] = std::exp(x[c] - mx);
      sum += p[c];
    }
    const double lse = std::log(sum) + mx;
    const float inv = static_cast<float>(1.0 / sum);
    for (int c = 0; c < logits.cols; ++c) p[c] *= inv;
    assert(targets[r] >= 0 && targets[r] < logits.cols);
    total += lse - x[targets[r]];
  }
  no.val[0] = static_cast<float>(total / logits.rows);
  if (nodes_[out.id].requires) {
    int ol = logits.id, oo = out.id;
    auto tg = std::move(targets);
    nodes_[out.id].back = [ol, oo, tg](Tape& t) {
      const Node& no = t.nodes_[oo];
      const float g = no.grad[0];
      const Node& nl = t.nodes_[ol];
      float* gl = t.ensure_grad(ol);
      const float inv_rows = 1.0f / static_cast<float>(nl.rows);
      for (int r = 0; r < nl.rows; ++r) {
        const float* p = no.aux.data() + static_cast<size_t>(r) * nl.cols;
        float* gr = gl + static_cast<size_t>(r) * nl.cols;
        for (int c = 0; c < nl.cols; ++c) gr[c] += g * inv_rows * p[c];
        gr[tg[r]] -= g * inv_rows;
      }
    };
  }
  return out;
}

void Tape::backward(Var root) {
  assert(root.rows == 1 && root.cols == 1);
  ensure_grad(root.id)[0] = 1.0f;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.back && !n.grad.empty()) n.back(*this);
  }
}

}  // namespace textrev
