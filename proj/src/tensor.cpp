#include "vt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vt/check.hpp"

namespace vt {

namespace {
int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) {
    VT_CHECK(d > 0, "tensor dimension must be positive, got ", d);
    n *= d;
  }
  return n;
}
}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  int n = shape_numel(shape);
  VT_CHECK(n == static_cast<int>(values.size()), "tensor shape ", shape_str(shape),
           " does not match value count ", values.size());
  d_ = std::make_shared<Data>();
  d_->shape = std::move(shape);
  d_->v = std::move(values);
  d_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  int n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor({1}, {v}, requires_grad);
}

int Tensor::rows() const {
  VT_CHECK(d_->shape.size() == 2, "rows() on non-matrix ", shape_str(d_->shape));
  return d_->shape[0];
}

int Tensor::cols() const {
  VT_CHECK(d_->shape.size() == 2, "cols() on non-matrix ", shape_str(d_->shape));
  return d_->shape[1];
}

double Tensor::item() const {
  VT_CHECK(size() == 1, "item() on tensor of size ", size());
  return d_->v[0];
}

std::vector<double>& Tensor::grad() {
  VT_CHECK(has_grad(), "grad not populated");
  return d_->g;
}

const std::vector<double>& Tensor::grad() const {
  VT_CHECK(has_grad(), "grad not populated");
  return d_->g;
}

void Tensor::ensure_grad() {
  if (d_->g.empty()) d_->g.assign(d_->v.size(), 0.0);
}

void Tensor::zero_grad() { d_->g.assign(d_->v.size(), 0.0); }

// ---------------------------------------------------------------------------
// Tape primitives

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape().size() == 2 && b.shape().size() == 2,
           "matmul: expects matrices, got ", shape_str(a.shape()), " and ",
           shape_str(b.shape()));
  int m = a.rows(), k = a.cols(), n = b.cols();
  VT_CHECK(b.rows() == k, "matmul: inner dimensions differ: ", shape_str(a.shape()),
           " vs ", shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n});
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = ov.data() + i * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  Tensor ac = a, bc = b, oc = out;
  record([ac, bc, oc, m, k, n]() mutable {
    if (!oc.has_grad()) return;
    const auto& og = oc.grad();
    {
      ac.ensure_grad();
      auto& ag = ac.grad();
      const auto& bv = bc.values();
      // dA = dO * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double gij = og[i * n + j];
          if (gij == 0.0) continue;
          for (int p = 0; p < k; ++p) ag[i * k + p] += gij * bv[p * n + j];
        }
    }
    {
      bc.ensure_grad();
      auto& bg = bc.grad();
      const auto& av = ac.values();
      // dB = A^T * dO
      for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
          double aip = av[i * k + p];
          if (aip == 0.0) continue;
          const double* orow = og.data() + i * n;
          double* brow = bg.data() + p * n;
          for (int j = 0; j < n; ++j) brow[j] += aip * orow[j];
        }
    }
  });
  return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  bool bias_row = a.shape().size() == 2 && b.shape().size() == 1 &&
                  a.cols() == b.shape()[0];
  VT_CHECK(bias_row || a.shape() == b.shape(), "add: shape mismatch ",
           shape_str(a.shape()), " vs ", shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  if (bias_row) {
    int m = a.rows(), n = a.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) ov[i * n + j] = av[i * n + j] + bv[j];
  } else {
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
  }
  Tensor ac = a, bc = b, oc = out;
  record([ac, bc, oc, bias_row]() mutable {
    if (!oc.has_grad()) return;
    const auto& og = oc.grad();
    ac.ensure_grad();
    bc.ensure_grad();
    auto& ag = ac.grad();
    auto& bg = bc.grad();
    for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
    if (bias_row) {
      int n = ac.cols();
      for (std::size_t i = 0; i < og.size(); ++i) bg[i % n] += og[i];
    } else {
      for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
    }
  });
  return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape() == b.shape(), "mul: shape mismatch ", shape_str(a.shape()),
           " vs ", shape_str(b.shape()));
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  Tensor ac = a, bc = b, oc = out;
  record([ac, bc, oc]() mutable {
    if (!oc.has_grad()) return;
    const auto& og = oc.grad();
    ac.ensure_grad();
    bc.ensure_grad();
    for (std::size_t i = 0; i < og.size(); ++i) {
      ac.grad()[i] += og[i] * bc.values()[i];
      bc.grad()[i] += og[i] * ac.values()[i];
    }
  });
  return out;
}

Tensor Tape::tanh(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = std::tanh(x.values()[i]);
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) {
      double y = oc.values()[i];
      xc.grad()[i] += oc.grad()[i] * (1.0 - y * y);
    }
  });
  return out;
}

Tensor Tape::sigmoid(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    double v = x.values()[i];
    out.values()[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) {
      double y = oc.values()[i];
      xc.grad()[i] += oc.grad()[i] * y * (1.0 - y);
    }
  });
  return out;
}

Tensor Tape::softmax(const Tensor& x) {
  VT_CHECK(x.shape().size() == 1 || x.shape().size() == 2,
           "softmax: expects vector or matrix, got ", shape_str(x.shape()));
  int n = x.shape().back();
  int m = x.size() / n;
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * n;
    double* orow = out.values().data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) mx = std::max(mx, row[j]);
    VT_CHECK(std::isfinite(mx), "softmax: row ", i, " fully masked");
    double z = 0.0;
    for (int j = 0; j < n; ++j) {
      orow[j] = std::isinf(row[j]) && row[j] < 0 ? 0.0 : std::exp(row[j] - mx);
      z += orow[j];
    }
    for (int j = 0; j < n; ++j) orow[j] /= z;
  }
  Tensor xc = x, oc = out;
  record([xc, oc, m, n]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* y = oc.values().data() + i * n;
      const double* dy = oc.grad().data() + i * n;
      double* dx = xc.grad().data() + i * n;
      double dot = 0.0;
      for (int j = 0; j < n; ++j) dot += y[j] * dy[j];
      for (int j = 0; j < n; ++j) dx[j] += y[j] * (dy[j] - dot);
    }
  });
  return out;
}

Tensor Tape::log(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = std::log(x.values()[i]);
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i)
      xc.grad()[i] += oc.grad()[i] / xc.values()[i];
  });
  return out;
}

Tensor Tape::concat(const std::vector<Tensor>& xs, int axis) {
  VT_CHECK(!xs.empty(), "concat: empty input list");
  VT_CHECK(axis == 0 || axis == 1, "concat: axis must be 0 or 1");
  if (xs[0].shape().size() == 1) {
    VT_CHECK(axis == 0, "concat: vectors concatenate along axis 0");
    int total = 0;
    for (const auto& x : xs) {
      VT_CHECK(x.shape().size() == 1, "concat: rank mismatch");
      total += x.size();
    }
    Tensor out = Tensor::zeros({total});
    int off = 0;
    for (const auto& x : xs) {
      std::copy(x.values().begin(), x.values().end(), out.values().begin() + off);
      off += x.size();
    }
    auto parts = xs;
    Tensor oc = out;
    record([parts, oc]() mutable {
      if (!oc.has_grad()) return;
      int off = 0;
      for (auto& p : parts) {
        p.ensure_grad();
        for (int i = 0; i < p.size(); ++i) p.grad()[i] += oc.grad()[off + i];
        off += p.size();
      }
    });
    return out;
  }
  // matrices
  int rows0 = xs[0].rows(), cols0 = xs[0].cols();
  if (axis == 0) {
    int m = 0;
    for (const auto& x : xs) {
      VT_CHECK(x.cols() == cols0, "concat: column mismatch ", x.cols(), " vs ", cols0);
      m += x.rows();
    }
    Tensor out = Tensor::zeros({m, cols0});
    int off = 0;
    for (const auto& x : xs) {
      std::copy(x.values().begin(), x.values().end(), out.values().begin() + off);
      off += x.size();
    }
    auto parts = xs;
    Tensor oc = out;
    record([parts, oc]() mutable {
      if (!oc.has_grad()) return;
      int off = 0;
      for (auto& p : parts) {
        p.ensure_grad();
        for (int i = 0; i < p.size(); ++i) p.grad()[i] += oc.grad()[off + i];
        off += p.size();
      }
    });
    return out;
  }
  int n = 0;
  for (const auto& x : xs) {
    VT_CHECK(x.rows() == rows0, "concat: row mismatch ", x.rows(), " vs ", rows0);
    n += x.cols();
  }
  Tensor out = Tensor::zeros({rows0, n});
  int coff = 0;
  for (const auto& x : xs) {
    int xc = x.cols();
    for (int i = 0; i < rows0; ++i)
      for (int j = 0; j < xc; ++j)
        out.values()[i * n + coff + j] = x.values()[i * xc + j];
    coff += xc;
  }
  auto parts = xs;
  Tensor oc = out;
  record([parts, oc, rows0, n]() mutable {
    if (!oc.has_grad()) return;
    int coff = 0;
    for (auto& p : parts) {
      p.ensure_grad();
      int pc = p.cols();
      for (int i = 0; i < rows0; ++i)
        for (int j = 0; j < pc; ++j)
          p.grad()[i * pc + j] += oc.grad()[i * n + coff + j];
      coff += pc;
    }
  });
  return out;
}

Tensor Tape::embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  VT_CHECK(table.shape().size() == 2, "embedding_lookup: table must be a matrix");
  VT_CHECK(!ids.empty(), "embedding_lookup: empty id list");
  int v = table.rows(), d = table.cols();
  for (int id : ids)
    VT_CHECK(id >= 0 && id < v, "embedding_lookup: id ", id, " out of range [0,", v, ")");
  int m = static_cast<int>(ids.size());
  Tensor out = Tensor::zeros({m, d});
  for (int i = 0; i < m; ++i)
    std::copy(table.values().begin() + ids[i] * d,
              table.values().begin() + (ids[i] + 1) * d,
              out.values().begin() + i * d);
  Tensor tc = table, oc = out;
  record([tc, oc, ids, d]() mutable {
    if (!oc.has_grad()) return;
    tc.ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j)
        tc.grad()[ids[i] * d + j] += oc.grad()[i * d + j];
  });
  return out;
}

Tensor Tape::layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  VT_CHECK(x.shape().size() == 2, "layer_norm: expects a matrix");
  int m = x.rows(), n = x.cols();
  VT_CHECK(gain.shape() == Shape{n} && bias.shape() == Shape{n},
           "layer_norm: gain/bias must be [", n, "]");
  constexpr double kEps = 1e-10;
  Tensor out = Tensor::zeros(x.shape());
  std::vector<double> xhat(x.size()), inv_std(m);
  for (int i = 0; i < m; ++i) {
    const double* row = x.values().data() + i * n;
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= n;
    double is = 1.0 / std::sqrt(var + kEps);
    inv_std[i] = is;
    for (int j = 0; j < n; ++j) {
      double xh = (row[j] - mean) * is;
      xhat[i * n + j] = xh;
      out.values()[i * n + j] = xh * gain.values()[j] + bias.values()[j];
    }
  }
  Tensor xc = x, gc = gain, bc = bias, oc = out;
  record([xc, gc, bc, oc, xhat, inv_std, m, n]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    gc.ensure_grad();
    bc.ensure_grad();
    for (int i = 0; i < m; ++i) {
      const double* dy = oc.grad().data() + i * n;
      const double* xh = xhat.data() + i * n;
      double* dx = xc.grad().data() + i * n;
      double sum_dyg = 0.0, sum_dyg_xh = 0.0;
      for (int j = 0; j < n; ++j) {
        double dyg = dy[j] * gc.values()[j];
        sum_dyg += dyg;
        sum_dyg_xh += dyg * xh[j];
        gc.grad()[j] += dy[j] * xh[j];
        bc.grad()[j] += dy[j];
      }
      for (int j = 0; j < n; ++j) {
        double dyg = dy[j] * gc.values()[j];
        dx[j] += inv_std[i] * (dyg - sum_dyg / n - xh[j] * sum_dyg_xh / n);
      }
    }
  });
  return out;
}

LstmState Tape::lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c,
                          const Tensor& w, const Tensor& b) {
  VT_CHECK(x.shape().size() == 1 && h.shape().size() == 1 && c.shape().size() == 1,
           "lstm_cell: x/h/c must be vectors");
  int in = x.size(), hid = h.size();
  VT_CHECK(c.size() == hid, "lstm_cell: c size ", c.size(), " != h size ", hid);
  VT_CHECK(w.shape() == (Shape{4 * hid, in + hid}), "lstm_cell: weight must be ",
           shape_str({4 * hid, in + hid}), ", got ", shape_str(w.shape()));
  VT_CHECK(b.shape() == Shape{4 * hid}, "lstm_cell: bias must be [", 4 * hid, "]");

  std::vector<double> xh(in + hid);
  std::copy(x.values().begin(), x.values().end(), xh.begin());
  std::copy(h.values().begin(), h.values().end(), xh.begin() + in);

  // gate order: input, forget, cell candidate, output
  std::vector<double> z(4 * hid);
  for (int r = 0; r < 4 * hid; ++r) {
    double acc = b.values()[r];
    const double* wrow = w.values().data() + r * (in + hid);
    for (int j = 0; j < in + hid; ++j) acc += wrow[j] * xh[j];
    z[r] = acc;
  }
  auto sig = [](double v) {
    return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  };
  std::vector<double> gi(hid), gf(hid), gg(hid), go(hid);
  for (int j = 0; j < hid; ++j) {
    gi[j] = sig(z[j]);
    gf[j] = sig(z[hid + j]);
    gg[j] = std::tanh(z[2 * hid + j]);
    go[j] = sig(z[3 * hid + j]);
  }
  Tensor c_new = Tensor::zeros({hid});
  Tensor h_new = Tensor::zeros({hid});
  std::vector<double> tc(hid);
  for (int j = 0; j < hid; ++j) {
    c_new.values()[j] = gf[j] * c.values()[j] + gi[j] * gg[j];
    tc[j] = std::tanh(c_new.values()[j]);
    h_new.values()[j] = go[j] * tc[j];
  }
  Tensor xc = x, hc = h, cc = c, wc = w, bc = b, hn = h_new, cn = c_new;
  record([xc, hc, cc, wc, bc, hn, cn, xh, gi, gf, gg, go, tc, in, hid]() mutable {
    if (!hn.has_grad() && !cn.has_grad()) return;
    xc.ensure_grad();
    hc.ensure_grad();
    cc.ensure_grad();
    wc.ensure_grad();
    bc.ensure_grad();
    std::vector<double> dz(4 * hid, 0.0);
    for (int j = 0; j < hid; ++j) {
      double dh = hn.has_grad() ? hn.grad()[j] : 0.0;
      double dc_out = cn.has_grad() ? cn.grad()[j] : 0.0;
      double dc = dc_out + dh * go[j] * (1.0 - tc[j] * tc[j]);
      double d_go = dh * tc[j];
      dz[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
      dz[hid + j] = dc * cc.values()[j] * gf[j] * (1.0 - gf[j]);
      dz[2 * hid + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
      dz[3 * hid + j] = d_go * go[j] * (1.0 - go[j]);
      cc.grad()[j] += dc * gf[j];
    }
    for (int r = 0; r < 4 * hid; ++r) {
      double dzr = dz[r];
      if (dzr == 0.0) continue;
      bc.grad()[r] += dzr;
      double* wgrow = wc.grad().data() + r * (in + hid);
      const double* wrow = wc.values().data() + r * (in + hid);
      for (int j = 0; j < in; ++j) {
        wgrow[j] += dzr * xh[j];
        xc.grad()[j] += dzr * wrow[j];
      }
      for (int j = 0; j < hid; ++j) {
        wgrow[in + j] += dzr * xh[in + j];
        hc.grad()[j] += dzr * wrow[in + j];
      }
    }
  });
  return {h_new, c_new};
}

Tensor Tape::linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

Tensor Tape::sum(const Tensor& x) {
  double s = std::accumulate(x.values().begin(), x.values().end(), 0.0);
  Tensor out = Tensor::scalar(s);
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    double g = oc.grad()[0];
    for (auto& gi : xc.grad()) gi += g;
  });
  return out;
}

Tensor Tape::scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] * c;
  Tensor xc = x, oc = out;
  record([xc, oc, c]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) xc.grad()[i] += oc.grad()[i] * c;
  });
  return out;
}

Tensor Tape::add_const(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] + c;
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) xc.grad()[i] += oc.grad()[i];
  });
  return out;
}

Tensor Tape::pick(const Tensor& x, int index) {
  VT_CHECK(index >= 0 && index < x.size(), "pick: index ", index,
           " out of range for size ", x.size());
  Tensor out = Tensor::scalar(x.values()[index]);
  Tensor xc = x, oc = out;
  record([xc, oc, index]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    xc.grad()[index] += oc.grad()[0];
  });
  return out;
}

Tensor Tape::reshape(const Tensor& x, Shape shape) {
  int n = 1;
  for (int d : shape) n *= d;
  VT_CHECK(n == x.size(), "reshape: size mismatch ", shape_str(x.shape()), " -> ",
           shape_str(shape));
  Tensor out(shape, x.values());
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) xc.grad()[i] += oc.grad()[i];
  });
  return out;
}

Tensor Tape::min_elem(const Tensor& a, const Tensor& b) {
  VT_CHECK(a.shape() == b.shape(), "min_elem: shape mismatch");
  Tensor out = Tensor::zeros(a.shape());
  for (int i = 0; i < a.size(); ++i)
    out.values()[i] = std::min(a.values()[i], b.values()[i]);
  Tensor ac = a, bc = b, oc = out;
  record([ac, bc, oc]() mutable {
    if (!oc.has_grad()) return;
    ac.ensure_grad();
    bc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) {
      // subgradient: route to a on ties
      if (ac.values()[i] <= bc.values()[i])
        ac.grad()[i] += oc.grad()[i];
      else
        bc.grad()[i] += oc.grad()[i];
    }
  });
  return out;
}

Tensor Tape::scatter_add(const Tensor& src, const std::vector<int>& ids, int size) {
  VT_CHECK(src.shape().size() == 1, "scatter_add: src must be a vector");
  VT_CHECK(static_cast<int>(ids.size()) == src.size(),
           "scatter_add: ids size ", ids.size(), " != src size ", src.size());
  for (int id : ids)
    VT_CHECK(id >= 0 && id < size, "scatter_add: id ", id, " out of range [0,", size, ")");
  Tensor out = Tensor::zeros({size});
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.values()[ids[i]] += src.values()[i];
  Tensor sc = src, oc = out;
  record([sc, oc, ids]() mutable {
    if (!oc.has_grad()) return;
    sc.ensure_grad();
    for (std::size_t i = 0; i < ids.size(); ++i) sc.grad()[i] += oc.grad()[ids[i]];
  });
  return out;
}

Tensor Tape::mask_add(const Tensor& x, const std::vector<double>& mask) {
  VT_CHECK(static_cast<int>(mask.size()) == x.size(), "mask_add: mask size mismatch");
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] + mask[i];
  Tensor xc = x, oc = out;
  record([xc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < oc.grad().size(); ++i) xc.grad()[i] += oc.grad()[i];
  });
  return out;
}

Tensor Tape::transpose(const Tensor& x) {
  VT_CHECK(x.shape().size() == 2, "transpose: expects a matrix, got ",
           shape_str(x.shape()));
  int m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.values()[j * m + i] = x.values()[i * n + j];
  Tensor xc = x, oc = out;
  record([xc, oc, m, n]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) xc.grad()[i * n + j] += oc.grad()[j * m + i];
  });
  return out;
}

Tensor Tape::gather_rows(const Tensor& x, const std::vector<int>& rows) {
  VT_CHECK(x.shape().size() == 2, "gather_rows: expects a matrix");
  VT_CHECK(!rows.empty(), "gather_rows: empty row list");
  int m = x.rows(), n = x.cols();
  for (int r : rows) VT_CHECK(r >= 0 && r < m, "gather_rows: row ", r, " out of range");
  Tensor out = Tensor::zeros({static_cast<int>(rows.size()), n});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(x.values().begin() + rows[i] * n, x.values().begin() + (rows[i] + 1) * n,
              out.values().begin() + static_cast<int>(i) * n);
  Tensor xc = x, oc = out;
  record([xc, oc, rows, n]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int j = 0; j < n; ++j)
        xc.grad()[rows[i] * n + j] += oc.grad()[static_cast<int>(i) * n + j];
  });
  return out;
}

Tensor Tape::mul_scalar(const Tensor& x, const Tensor& s) {
  VT_CHECK(s.size() == 1, "mul_scalar: scalar operand must have size 1");
  double sv = s.values()[0];
  Tensor out = Tensor::zeros(x.shape());
  for (int i = 0; i < x.size(); ++i) out.values()[i] = x.values()[i] * sv;
  Tensor xc = x, sc = s, oc = out;
  record([xc, sc, oc]() mutable {
    if (!oc.has_grad()) return;
    xc.ensure_grad();
    sc.ensure_grad();
    double sv = sc.values()[0];
    double acc = 0.0;
    for (std::size_t i = 0; i < oc.grad().size(); ++i) {
      xc.grad()[i] += oc.grad()[i] * sv;
      acc += oc.grad()[i] * xc.values()[i];
    }
    sc.grad()[0] += acc;
  });
  return out;
}

Tensor Tape::forward(Primitive p, const std::vector<Tensor>& inputs) {
  auto need = [&](std::size_t n) {
    VT_CHECK(inputs.size() == n, "forward: primitive expects ", n, " inputs, got ",
             inputs.size());
  };
  switch (p) {
    case Primitive::kMatmul:
      need(2);
      return matmul(inputs[0], inputs[1]);
    case Primitive::kAdd:
      need(2);
      return add(inputs[0], inputs[1]);
    case Primitive::kMul:
      need(2);
      return mul(inputs[0], inputs[1]);
    case Primitive::kTanh:
      need(1);
      return tanh(inputs[0]);
    case Primitive::kSigmoid:
      need(1);
      return sigmoid(inputs[0]);
    case Primitive::kSoftmax:
      need(1);
      return softmax(inputs[0]);
    case Primitive::kLog:
      need(1);
      return log(inputs[0]);
    case Primitive::kConcat:
      return concat(inputs, 0);
    case Primitive::kEmbeddingLookup: {
      need(2);
      std::vector<int> ids;
      ids.reserve(inputs[1].size());
      for (double v : inputs[1].values()) ids.push_back(static_cast<int>(v));
      return embedding_lookup(inputs[0], ids);
    }
    case Primitive::kLayerNorm:
      need(3);
      return layer_norm(inputs[0], inputs[1], inputs[2]);
    case Primitive::kLstmCell: {
      need(5);
      auto st = lstm_cell(inputs[0], inputs[1], inputs[2], inputs[3], inputs[4]);
      int hid = st.h.size();
      return reshape(concat({st.h, st.c}, 0), {2, hid});
    }
    case Primitive::kLinear:
      need(3);
      return linear(inputs[0], inputs[1], inputs[2]);
  }
  VT_CHECK(false, "forward: unknown primitive");
  return Tensor();
}

void Tape::backward(const Tensor& loss) {
  VT_CHECK(loss.defined() && loss.size() == 1, "backward: loss must be a scalar");
  Tensor l = loss;
  l.ensure_grad();
  l.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                  double eps) {
  VT_CHECK(eps > 0 && eps <= 1e-2, "grad_check: eps must be in (0, 1e-2]");
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape tape;
    Tensor loss = f(tape, x);
    VT_CHECK(loss.size() == 1, "grad_check: f must be scalar-valued");
    tape.backward(loss);
  }
  std::vector<double> analytic = x.has_grad() ? x.grad() : std::vector<double>(x.size(), 0.0);
  double worst = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    double saved = x.values()[i];
    x.values()[i] = saved + eps;
    Tape tp;
    double fp = f(tp, x).item();
    x.values()[i] = saved - eps;
    Tape tm;
    double fm = f(tm, x).item();
    x.values()[i] = saved;
    VT_CHECK(std::isfinite(fp) && std::isfinite(fm),
             "grad_check: non-finite value at component ", i);
    double cd = (fp - fm) / (2.0 * eps);
    double err = std::abs(analytic[i] - cd) / (std::abs(cd) + 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace vt
