#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "hibehrt/error.hpp"
#include "hibehrt/rng.hpp"
#include "hibehrt/tensor.hpp"

namespace hibehrt {

// Reverse-mode autodiff tape. One tape per forward pass; operations append
// nodes, backward() walks them in reverse creation order. Gradients
// accumulate additively at fan-out. Nodes whose inputs are all constants
// skip gradient bookkeeping entirely.
template <typename T>
class Tape {
 public:
  struct Ref {
    std::uint32_t i = UINT32_MAX;
    bool valid() const { return i != UINT32_MAX; }
  };

  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<Mat>;
  using CMap = Eigen::Map<const Mat>;

  Ref constant(Tensor<T> v) { return push(std::move(v), false); }
  Ref leaf(Tensor<T> v) { return push(std::move(v), true); }

  const Tensor<T>& value(Ref r) const { return nodes_[r.i].value; }
  bool needs_grad(Ref r) const { return nodes_[r.i].needs_grad; }

  // Gradient of a node; zeros if nothing has flowed into it.
  const Tensor<T>& grad(Ref r) {
    ensure_grad(r.i);
    return nodes_[r.i].grad;
  }

  std::size_t node_count() const { return nodes_.size(); }

  void backward(Ref loss) {
    if (!value(loss).is_scalar()) throw NonScalarLoss();
    ensure_grad(loss.i);
    nodes_[loss.i].grad.data[0] = T(1);
    for (std::uint32_t i = loss.i + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back && n.needs_grad && !n.grad.data.empty()) n.back(*this);
    }
  }

  // ---- elementwise ----

  Ref add(Ref a, Ref b) {
    check_same(a, b, "add");
    Tensor<T> out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += value(b).data[k];
    return binary(std::move(out), a, b, [](Tape& t, std::uint32_t ai, std::uint32_t bi, const Tensor<T>& g) {
      t.accumulate(ai, g);
      t.accumulate(bi, g);
    });
  }

  Ref sub(Ref a, Ref b) {
    check_same(a, b, "sub");
    Tensor<T> out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= value(b).data[k];
    return binary(std::move(out), a, b, [](Tape& t, std::uint32_t ai, std::uint32_t bi, const Tensor<T>& g) {
      t.accumulate(ai, g);
      Tensor<T> neg = g;
      for (T& v : neg.data) v = -v;
      t.accumulate(bi, neg);
    });
  }

  Ref mul(Ref a, Ref b) {
    check_same(a, b, "mul");
    Tensor<T> out = value(a);
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= value(b).data[k];
    return binary(std::move(out), a, b, [](Tape& t, std::uint32_t ai, std::uint32_t bi, const Tensor<T>& g) {
      Tensor<T> da = g, db = g;
      const auto& av = t.nodes_[ai].value.data;
      const auto& bv = t.nodes_[bi].value.data;
      for (std::size_t k = 0; k < g.size(); ++k) {
        da.data[k] *= bv[k];
        db.data[k] *= av[k];
      }
      t.accumulate(ai, da);
      t.accumulate(bi, db);
    });
  }

  Ref scale(Ref a, double s) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v = static_cast<T>(v * s);
    return unary(std::move(out), a, [s](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      Tensor<T> da = g;
      for (T& v : da.data) v = static_cast<T>(v * s);
      t.accumulate(ai, da);
    });
  }

  // x + b with b broadcast over rows; b has length cols(x).
  Ref add_rowvec(Ref a, Ref b) {
    const Tensor<T>& x = value(a);
    const Tensor<T>& v = value(b);
    if (v.size() != x.cols()) throw ShapeMismatch("add_rowvec: bias length != cols");
    Tensor<T> out = x;
    const std::size_t R = x.rows(), C = x.cols();
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] += v.data[c];
    return binary(std::move(out), a, b, [](Tape& t, std::uint32_t ai, std::uint32_t bi, const Tensor<T>& g) {
      t.accumulate(ai, g);
      const std::size_t R = g.rows(), C = g.cols();
      Tensor<T> db = Tensor<T>::zeros({C});
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) db.data[c] += g.data[r * C + c];
      t.accumulate(bi, db);
    });
  }

  // Multiply row r by rowscale[r] (constant). Used to zero-mask segment rows.
  Ref scale_rows(Ref a, std::vector<T> rowscale) {
    const Tensor<T>& x = value(a);
    if (rowscale.size() != x.rows()) throw ShapeMismatch("scale_rows: size mismatch");
    Tensor<T> out = x;
    const std::size_t C = x.cols();
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] *= rowscale[r];
    return unary(std::move(out), a, [rs = std::move(rowscale)](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      Tensor<T> da = g;
      const std::size_t C = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < C; ++c) da.data[r * C + c] *= rs[r];
      t.accumulate(ai, da);
    });
  }

  // ---- linear algebra ----

  Ref matmul(Ref a, Ref b, bool trans_a = false, bool trans_b = false) {
    const Tensor<T>& ta = value(a);
    const Tensor<T>& tb = value(b);
    const std::size_t am = trans_a ? ta.cols() : ta.rows();
    const std::size_t ak = trans_a ? ta.rows() : ta.cols();
    const std::size_t bk = trans_b ? tb.cols() : tb.rows();
    const std::size_t bn = trans_b ? tb.rows() : tb.cols();
    if (ak != bk)
      throw ShapeMismatch("matmul: inner dims " + std::to_string(ak) + " vs " + std::to_string(bk));
    Tensor<T> out = Tensor<T>::zeros({am, bn});
    CMap A(ta.data.data(), ta.rows(), ta.cols());
    CMap B(tb.data.data(), tb.rows(), tb.cols());
    Map C(out.data.data(), am, bn);
    if (!trans_a && !trans_b) C.noalias() = A * B;
    else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
    else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
    else C.noalias() = A.transpose() * B.transpose();
    return binary(std::move(out), a, b,
                  [trans_a, trans_b](Tape& t, std::uint32_t ai, std::uint32_t bi, const Tensor<T>& g) {
      const Tensor<T>& ta = t.nodes_[ai].value;
      const Tensor<T>& tb = t.nodes_[bi].value;
      CMap A(ta.data.data(), ta.rows(), ta.cols());
      CMap B(tb.data.data(), tb.rows(), tb.cols());
      CMap G(g.data.data(), g.rows(), g.cols());
      if (t.nodes_[ai].needs_grad) {
        Tensor<T> da = Tensor<T>::zeros(ta.shape);
        Map DA(da.data.data(), ta.rows(), ta.cols());
        if (!trans_a && !trans_b) DA.noalias() = G * B.transpose();
        else if (!trans_a && trans_b) DA.noalias() = G * B;
        else if (trans_a && !trans_b) DA.noalias() = B * G.transpose();
        else DA.noalias() = B.transpose() * G.transpose();
        t.accumulate(ai, da);
      }
      if (t.nodes_[bi].needs_grad) {
        Tensor<T> db = Tensor<T>::zeros(tb.shape);
        Map DB(db.data.data(), tb.rows(), tb.cols());
        if (!trans_a && !trans_b) DB.noalias() = A.transpose() * G;
        else if (!trans_a && trans_b) DB.noalias() = G.transpose() * A;
        else if (trans_a && !trans_b) DB.noalias() = A * G;
        else DB.noalias() = G.transpose() * A.transpose();
        t.accumulate(bi, db);
      }
    });
  }

  Ref transpose(Ref a) {
    const Tensor<T>& x = value(a);
    Tensor<T> out = Tensor<T>::zeros({x.cols(), x.rows()});
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out.data[c * x.rows() + r] = x.data[r * x.cols() + c];
    return unary(std::move(out), a, [](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      const Tensor<T>& x = t.nodes_[ai].value;
      Tensor<T> da = Tensor<T>::zeros(x.shape);
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) da.data[r * x.cols() + c] = g.data[c * x.rows() + r];
      t.accumulate(ai, da);
    });
  }

  Ref slice_rows(Ref a, std::size_t r0, std::size_t r1) {
    const Tensor<T>& x = value(a);
    if (r1 > x.rows() || r0 > r1) throw ShapeMismatch("slice_rows: bad range");
    const std::size_t C = x.cols();
    Tensor<T> out = Tensor<T>::zeros({r1 - r0, C});
    std::copy(x.data.begin() + r0 * C, x.data.begin() + r1 * C, out.data.begin());
    return unary(std::move(out), a, [r0, C](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      for (std::size_t k = 0; k < g.size(); ++k) da.data[r0 * C + k] += g.data[k];
    });
  }

  Ref slice_cols(Ref a, std::size_t c0, std::size_t c1) {
    const Tensor<T>& x = value(a);
    if (c1 > x.cols() || c0 > c1) throw ShapeMismatch("slice_cols: bad range");
    const std::size_t R = x.rows(), C = x.cols(), W = c1 - c0;
    Tensor<T> out = Tensor<T>::zeros({R, W});
    for (std::size_t r = 0; r < R; ++r)
      std::copy(x.data.begin() + r * C + c0, x.data.begin() + r * C + c1, out.data.begin() + r * W);
    return unary(std::move(out), a, [c0, C, W](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < W; ++c) da.data[r * C + c0 + c] += g.data[r * W + c];
    });
  }

  Ref concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_rows: empty");
    const std::size_t C = value(parts[0]).cols();
    std::size_t R = 0;
    bool needs = false;
    for (Ref p : parts) {
      if (value(p).cols() != C) throw ShapeMismatch("concat_rows: column mismatch");
      R += value(p).rows();
      needs = needs || nodes_[p.i].needs_grad;
    }
    Tensor<T> out = Tensor<T>::zeros({R, C});
    std::size_t off = 0;
    for (Ref p : parts) {
      const auto& d = value(p).data;
      std::copy(d.begin(), d.end(), out.data.begin() + off);
      off += d.size();
    }
    Ref r = push(std::move(out), needs);
    if (needs) {
      std::vector<std::uint32_t> idx;
      for (Ref p : parts) idx.push_back(p.i);
      nodes_[r.i].back = [self = r.i, idx](Tape& t) {
        const Tensor<T>& g = t.nodes_[self].grad;
        std::size_t off = 0;
        for (std::uint32_t pi : idx) {
          const std::size_t n = t.nodes_[pi].value.size();
          if (t.nodes_[pi].needs_grad) {
            t.ensure_grad(pi);
            Tensor<T>& dg = t.nodes_[pi].grad;
            for (std::size_t k = 0; k < n; ++k) dg.data[k] += g.data[off + k];
          }
          off += n;
        }
      };
    }
    return r;
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: empty");
    const std::size_t R = value(parts[0]).rows();
    std::size_t C = 0;
    bool needs = false;
    for (Ref p : parts) {
      if (value(p).rows() != R) throw ShapeMismatch("concat_cols: row mismatch");
      C += value(p).cols();
      needs = needs || nodes_[p.i].needs_grad;
    }
    Tensor<T> out = Tensor<T>::zeros({R, C});
    std::size_t off = 0;
    for (Ref p : parts) {
      const Tensor<T>& x = value(p);
      for (std::size_t r = 0; r < R; ++r)
        std::copy(x.data.begin() + r * x.cols(), x.data.begin() + (r + 1) * x.cols(),
                  out.data.begin() + r * C + off);
      off += x.cols();
    }
    Ref res = push(std::move(out), needs);
    if (needs) {
      std::vector<std::uint32_t> idx;
      std::vector<std::size_t> widths;
      for (Ref p : parts) {
        idx.push_back(p.i);
        widths.push_back(value(p).cols());
      }
      nodes_[res.i].back = [self = res.i, idx, widths, C](Tape& t) {
        const Tensor<T>& g = t.nodes_[self].grad;
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < idx.size(); ++pi) {
          const std::size_t W = widths[pi];
          if (t.nodes_[idx[pi]].needs_grad) {
            t.ensure_grad(idx[pi]);
            Tensor<T>& dg = t.nodes_[idx[pi]].grad;
            for (std::size_t r = 0; r < g.rows(); ++r)
              for (std::size_t c = 0; c < W; ++c) dg.data[r * W + c] += g.data[r * C + off + c];
          }
          off += W;
        }
      };
    }
    return res;
  }

  // Row gather; doubles as embedding lookup (backward is scatter-add).
  Ref gather_rows(Ref table, const std::vector<std::int64_t>& ids) {
    const Tensor<T>& x = value(table);
    const std::size_t C = x.cols();
    for (std::int64_t id : ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= x.rows())
        throw IdOutOfRange("gather_rows: id " + std::to_string(id) + " out of range [0," +
                           std::to_string(x.rows()) + ")");
    }
    Tensor<T> out = Tensor<T>::zeros({ids.size(), C});
    for (std::size_t r = 0; r < ids.size(); ++r)
      std::copy(x.data.begin() + ids[r] * C, x.data.begin() + (ids[r] + 1) * C, out.data.begin() + r * C);
    return unary(std::move(out), table, [ids, C](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      for (std::size_t r = 0; r < ids.size(); ++r)
        for (std::size_t c = 0; c < C; ++c) da.data[ids[r] * C + c] += g.data[r * C + c];
    });
  }

  // ---- nonlinearities ----

  // Row-wise softmax with an optional boolean key mask (true = valid).
  // Invalid columns get probability exactly 0 and pass no gradient, so the
  // output is bit-independent of their content.
  Ref softmax_rows(Ref a, const std::vector<char>& keymask = {}) {
    const Tensor<T>& x = value(a);
    const std::size_t R = x.rows(), C = x.cols();
    if (!keymask.empty()) {
      if (keymask.size() != C) throw ShapeMismatch("softmax_rows: mask length != cols");
      bool any = false;
      for (char m : keymask) any = any || m;
      if (!any) throw AllMasked();
    }
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    for (std::size_t r = 0; r < R; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < C; ++c)
        if (keymask.empty() || keymask[c]) mx = std::max(mx, x.data[r * C + c]);
      T sum = 0;
      for (std::size_t c = 0; c < C; ++c) {
        if (keymask.empty() || keymask[c]) {
          T e = std::exp(x.data[r * C + c] - mx);
          out.data[r * C + c] = e;
          sum += e;
        }
      }
      for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] /= sum;
    }
    Ref res = push(std::move(out), nodes_[a.i].needs_grad);
    if (nodes_[res.i].needs_grad) {
      nodes_[res.i].back = [self = res.i, ai = a.i](Tape& t) {
        const Tensor<T>& y = t.nodes_[self].value;
        const Tensor<T>& g = t.nodes_[self].grad;
        t.ensure_grad(ai);
        Tensor<T>& da = t.nodes_[ai].grad;
        const std::size_t R = y.rows(), C = y.cols();
        for (std::size_t r = 0; r < R; ++r) {
          T dot = 0;
          for (std::size_t c = 0; c < C; ++c) dot += g.data[r * C + c] * y.data[r * C + c];
          for (std::size_t c = 0; c < C; ++c)
            da.data[r * C + c] += y.data[r * C + c] * (g.data[r * C + c] - dot);
        }
      };
    }
    return res;
  }

  Ref layer_norm_rows(Ref a, Ref gain, Ref bias, double eps) {
    const Tensor<T>& x = value(a);
    const std::size_t R = x.rows(), C = x.cols();
    if (value(gain).size() != C || value(bias).size() != C)
      throw ShapeMismatch("layer_norm_rows: gain/bias length != cols");
    Tensor<T> out = Tensor<T>::zeros(x.shape);
    auto xhat = std::make_shared<Tensor<T>>(Tensor<T>::zeros(x.shape));
    auto inv_std = std::make_shared<std::vector<T>>(R);
    const Tensor<T>& gv = value(gain);
    const Tensor<T>& bv = value(bias);
    for (std::size_t r = 0; r < R; ++r) {
      T mean = 0;
      for (std::size_t c = 0; c < C; ++c) mean += x.data[r * C + c];
      mean /= static_cast<T>(C);
      T var = 0;
      for (std::size_t c = 0; c < C; ++c) {
        T d = x.data[r * C + c] - mean;
        var += d * d;
      }
      var /= static_cast<T>(C);
      T is = T(1) / std::sqrt(var + static_cast<T>(eps));
      (*inv_std)[r] = is;
      for (std::size_t c = 0; c < C; ++c) {
        T h = (x.data[r * C + c] - mean) * is;
        xhat->data[r * C + c] = h;
        out.data[r * C + c] = h * gv.data[c] + bv.data[c];
      }
    }
    bool needs = nodes_[a.i].needs_grad || nodes_[gain.i].needs_grad || nodes_[bias.i].needs_grad;
    Ref res = push(std::move(out), needs);
    if (needs) {
      nodes_[res.i].back = [self = res.i, ai = a.i, gi = gain.i, bi = bias.i, xhat, inv_std](Tape& t) {
        const Tensor<T>& g = t.nodes_[self].grad;
        const Tensor<T>& gv = t.nodes_[gi].value;
        const std::size_t R = g.rows(), C = g.cols();
        if (t.nodes_[gi].needs_grad) {
          t.ensure_grad(gi);
          Tensor<T>& dg = t.nodes_[gi].grad;
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) dg.data[c] += g.data[r * C + c] * xhat->data[r * C + c];
        }
        if (t.nodes_[bi].needs_grad) {
          t.ensure_grad(bi);
          Tensor<T>& db = t.nodes_[bi].grad;
          for (std::size_t r = 0; r < R; ++r)
            for (std::size_t c = 0; c < C; ++c) db.data[c] += g.data[r * C + c];
        }
        if (t.nodes_[ai].needs_grad) {
          t.ensure_grad(ai);
          Tensor<T>& da = t.nodes_[ai].grad;
          for (std::size_t r = 0; r < R; ++r) {
            T sum_dh = 0, sum_dh_h = 0;
            for (std::size_t c = 0; c < C; ++c) {
              T dh = g.data[r * C + c] * gv.data[c];
              sum_dh += dh;
              sum_dh_h += dh * xhat->data[r * C + c];
            }
            const T is = (*inv_std)[r];
            for (std::size_t c = 0; c < C; ++c) {
              T dh = g.data[r * C + c] * gv.data[c];
              da.data[r * C + c] += is * (dh - (sum_dh + xhat->data[r * C + c] * sum_dh_h) / static_cast<T>(C));
            }
          }
        }
      };
    }
    return res;
  }

  // Exact Gaussian-CDF form: x * Phi(x).
  Ref gelu(Ref a) {
    const Tensor<T>& x = value(a);
    Tensor<T> out = x;
    for (T& v : out.data) {
      double xv = static_cast<double>(v);
      v = static_cast<T>(xv * 0.5 * (1.0 + std::erf(xv / std::sqrt(2.0))));
    }
    return unary(std::move(out), a, [](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      const Tensor<T>& x = t.nodes_[ai].value;
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      for (std::size_t k = 0; k < g.size(); ++k) {
        double xv = static_cast<double>(x.data[k]);
        double phi = 0.5 * (1.0 + std::erf(xv / std::sqrt(2.0)));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * xv * xv);
        da.data[k] += g.data[k] * static_cast<T>(phi + xv * pdf);
      }
    });
  }

  Ref tanh_op(Ref a) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v = std::tanh(v);
    Ref res = push(std::move(out), nodes_[a.i].needs_grad);
    if (nodes_[res.i].needs_grad) {
      nodes_[res.i].back = [self = res.i, ai = a.i](Tape& t) {
        const Tensor<T>& y = t.nodes_[self].value;
        const Tensor<T>& g = t.nodes_[self].grad;
        t.ensure_grad(ai);
        Tensor<T>& da = t.nodes_[ai].grad;
        for (std::size_t k = 0; k < g.size(); ++k) da.data[k] += g.data[k] * (T(1) - y.data[k] * y.data[k]);
      };
    }
    return res;
  }

  Ref sigmoid(Ref a) {
    Tensor<T> out = value(a);
    for (T& v : out.data) v = T(1) / (T(1) + std::exp(-v));
    Ref res = push(std::move(out), nodes_[a.i].needs_grad);
    if (nodes_[res.i].needs_grad) {
      nodes_[res.i].back = [self = res.i, ai = a.i](Tape& t) {
        const Tensor<T>& y = t.nodes_[self].value;
        const Tensor<T>& g = t.nodes_[self].grad;
        t.ensure_grad(ai);
        Tensor<T>& da = t.nodes_[ai].grad;
        for (std::size_t k = 0; k < g.size(); ++k) da.data[k] += g.data[k] * y.data[k] * (T(1) - y.data[k]);
      };
    }
    return res;
  }

  // Inverted dropout: survivors scaled by 1/(1-rate). Identity when not
  // training or rate == 0.
  Ref dropout(Ref a, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ShapeMismatch("dropout: rate must be in [0,1)");
    if (!train || rate == 0.0) return a;
    const Tensor<T>& x = value(a);
    auto mask = std::make_shared<std::vector<T>>(x.size());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> out = x;
    for (std::size_t k = 0; k < x.size(); ++k) {
      T m = rng.bernoulli(rate) ? T(0) : keep_scale;
      (*mask)[k] = m;
      out.data[k] *= m;
    }
    return unary(std::move(out), a, [mask](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      for (std::size_t k = 0; k < g.size(); ++k) da.data[k] += g.data[k] * (*mask)[k];
    });
  }

  // ---- reductions / losses ----

  Ref sum_all(Ref a) {
    T s = 0;
    for (const T& v : value(a).data) s += v;
    return unary(Tensor<T>::scalar(s), a, [](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      t.ensure_grad(ai);
      Tensor<T>& da = t.nodes_[ai].grad;
      for (T& v : da.data) v += g.data[0];
    });
  }

  Ref mean_all(Ref a) { return scale(sum_all(a), 1.0 / static_cast<double>(value(a).size())); }

  // Numerically stable binary cross-entropy on a scalar logit.
  Ref bce_with_logits(Ref logit, double label) {
    const Tensor<T>& z = value(logit);
    if (!z.is_scalar()) throw ShapeMismatch("bce_with_logits: logit must be scalar");
    const double zv = static_cast<double>(z.data[0]);
    const double loss = std::max(zv, 0.0) - zv * label + std::log1p(std::exp(-std::abs(zv)));
    return unary(Tensor<T>::scalar(static_cast<T>(loss)), logit,
                 [label](Tape& t, std::uint32_t ai, const Tensor<T>& g) {
      const double zv = static_cast<double>(t.nodes_[ai].value.data[0]);
      const double p = 1.0 / (1.0 + std::exp(-zv));
      t.ensure_grad(ai);
      t.nodes_[ai].grad.data[0] += g.data[0] * static_cast<T>(p - label);
    });
  }

  // Row-wise L2 normalization onto the unit sphere.
  Ref normalize_rows(Ref a, double min_norm = 1e-12) {
    const Tensor<T>& x = value(a);
    const std::size_t R = x.rows(), C = x.cols();
    auto norms = std::make_shared<std::vector<T>>(R);
    Tensor<T> out = x;
    for (std::size_t r = 0; r < R; ++r) {
      double n2 = 0;
      for (std::size_t c = 0; c < C; ++c) n2 += static_cast<double>(x.data[r * C + c]) * x.data[r * C + c];
      double n = std::sqrt(n2);
      if (n < min_norm) throw ZeroVector();
      (*norms)[r] = static_cast<T>(n);
      for (std::size_t c = 0; c < C; ++c) out.data[r * C + c] /= static_cast<T>(n);
    }
    bool needs = nodes_[a.i].needs_grad;
    Ref res = push(std::move(out), needs);
    if (needs) {
      nodes_[res.i].back = [self = res.i, ai = a.i, norms](Tape& t) {
        const Tensor<T>& y = t.nodes_[self].value;
        const Tensor<T>& g = t.nodes_[self].grad;
        t.ensure_grad(ai);
        Tensor<T>& da = t.nodes_[ai].grad;
        const std::size_t R = y.rows(), C = y.cols();
        for (std::size_t r = 0; r < R; ++r) {
          T dot = 0;
          for (std::size_t c = 0; c < C; ++c) dot += g.data[r * C + c] * y.data[r * C + c];
          for (std::size_t c = 0; c < C; ++c)
            da.data[r * C + c] += (g.data[r * C + c] - dot * y.data[r * C + c]) / (*norms)[r];
        }
      };
    }
    return res;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // lazily allocated
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };

  std::vector<Node> nodes_;

  Ref push(Tensor<T> v, bool needs_grad) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Ref{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  void ensure_grad(std::uint32_t i) {
    if (nodes_[i].grad.data.empty()) nodes_[i].grad = Tensor<T>::zeros(nodes_[i].value.shape);
  }

  void accumulate(std::uint32_t i, const Tensor<T>& g) {
    if (!nodes_[i].needs_grad) return;
    ensure_grad(i);
    Tensor<T>& dst = nodes_[i].grad;
    for (std::size_t k = 0; k < g.size(); ++k) dst.data[k] += g.data[k];
  }

  void check_same(Ref a, Ref b, const char* op) const {
    if (!value(a).same_shape(value(b)))
      throw ShapeMismatch(std::string(op) + ": shape " + shape_str(value(a).shape) + " vs " +
                          shape_str(value(b).shape));
  }

  template <typename F>
  Ref unary(Tensor<T> out, Ref a, F back_fn) {
    bool needs = nodes_[a.i].needs_grad;
    Ref r = push(std::move(out), needs);
    if (needs) {
      nodes_[r.i].back = [self = r.i, ai = a.i, fn = std::move(back_fn)](Tape& t) {
        fn(t, ai, t.nodes_[self].grad);
      };
    }
    return r;
  }

  template <typename F>
  Ref binary(Tensor<T> out, Ref a, Ref b, F back_fn) {
    bool needs = nodes_[a.i].needs_grad || nodes_[b.i].needs_grad;
    Ref r = push(std::move(out), needs);
    if (needs) {
      nodes_[r.i].back = [self = r.i, ai = a.i, bi = b.i, fn = std::move(back_fn)](Tape& t) {
        fn(t, ai, bi, t.nodes_[self].grad);
      };
    }
    return r;
  }
};

}  // namespace hibehrt
