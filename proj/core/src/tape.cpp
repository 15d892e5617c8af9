// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "earlydrop/error.hpp"

namespace earlydrop {

namespace kernels {

namespace {
constexpr double kGeluC = 0.7978845608028654; // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
} // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

} // namespace kernels

namespace {

void require_same_shape(const Tensor &a, const Tensor &b, std::string_view layer) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(layer), "shape mismatch " + shape_string(a.shape()) +
                                             " vs " + shape_string(b.shape()));
  }
}

} // namespace

Var Tape::push(Tensor value, bool needs_grad,
               std::function<void(Tape &, std::size_t)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, needs_grad, std::move(back)});
  return Var{nodes_.size() - 1};
}

Tensor &Tape::grad_ref(std::size_t id) {
  Node &n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node &n = nodes_.at(v.id);
  if (n.grad.shape() != n.value.shape()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Tensor value) { return push(std::move(value), true, nullptr); }

Var Tape::matmul(Var x, Var w, std::string_view layer) {
  const Tensor &X = value(x);
  const Tensor &W = value(w);
  if (W.rank() != 2 || X.cols() != W.shape()[0]) {
    throw ShapeError(std::string(layer), "cannot multiply " + shape_string(X.shape()) +
                                             " by " + shape_string(W.shape()));
  }
  const std::size_t n = X.rows(), k = X.cols(), m = W.cols();
  Tensor Y({n, m}, 0.0);
  {
    const double *xp = X.data().data();
    const double *wp = W.data().data();
    double *yp = Y.data().data();
    for (std::size_t i = 0; i < n; ++i) {
      double *yrow = yp + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const double xv = xp[i * k + p];
        const double *wrow = wp + p * m;
        for (std::size_t j = 0; j < m; ++j) yrow[j] += xv * wrow[j];
      }
    }
  }
  const std::size_t xid = x.id, wid = w.id;
  return push(std::move(Y), needs(x) || needs(w), [xid, wid, n, k, m](Tape &t, std::size_t self) {
    const double *dy = t.nodes_[self].grad.data().data();
    if (t.nodes_[xid].needs_grad) {
      const double *wp = t.nodes_[wid].value.data().data();
      double *dx = t.grad_ref(xid).data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double *dyrow = dy + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double *wrow = wp + p * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += dyrow[j] * wrow[j];
          dx[i * k + p] += s;
        }
      }
    }
    if (t.nodes_[wid].needs_grad) {
      const double *xp = t.nodes_[xid].value.data().data();
      double *dw = t.grad_ref(wid).data().data();
      for (std::size_t i = 0; i < n; ++i) {
        const double *dyrow = dy + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = xp[i * k + p];
          double *dwrow = dw + p * m;
          for (std::size_t j = 0; j < m; ++j) dwrow[j] += xv * dyrow[j];
        }
      }
    }
  });
}

Var Tape::add_bias(Var x, Var b, std::string_view layer) {
  const Tensor &X = value(x);
  const Tensor &B = value(b);
  if (B.size() != X.cols()) {
    throw ShapeError(std::string(layer), "bias " + shape_string(B.shape()) +
                                             " does not match " + shape_string(X.shape()));
  }
  Tensor Y = X;
  const std::size_t n = X.rows(), m = X.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) Y[i * m + j] += B[j];
  const std::size_t xid = x.id, bid = b.id;
  return push(std::move(Y), needs(x) || needs(b), [xid, bid, n, m](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    if (t.nodes_[xid].needs_grad) {
      Tensor &dx = t.grad_ref(xid);
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
    }
    if (t.nodes_[bid].needs_grad) {
      Tensor &db = t.grad_ref(bid);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) db[j] += dy[i * m + j];
    }
  });
}

Var Tape::add(Var a, Var b, std::string_view layer) {
  require_same_shape(value(a), value(b), layer);
  Tensor Y = value(a);
  const Tensor &B = value(b);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] += B[i];
  const std::size_t aid = a.id, bid = b.id;
  return push(std::move(Y), needs(a) || needs(b), [aid, bid](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    for (std::size_t id : {aid, bid}) {
      if (!t.nodes_[id].needs_grad) continue;
      Tensor &d = t.grad_ref(id);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i];
    }
  });
}

Var Tape::mul(Var a, Var b, std::string_view layer) {
  require_same_shape(value(a), value(b), layer);
  Tensor Y = value(a);
  const Tensor &B = value(b);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= B[i];
  const std::size_t aid = a.id, bid = b.id;
  return push(std::move(Y), needs(a) || needs(b), [aid, bid](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    if (t.nodes_[aid].needs_grad) {
      const Tensor &bv = t.nodes_[bid].value;
      Tensor &d = t.grad_ref(aid);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * bv[i];
    }
    if (t.nodes_[bid].needs_grad) {
      const Tensor &av = t.nodes_[aid].value;
      Tensor &d = t.grad_ref(bid);
      for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * av[i];
    }
  });
}

Var Tape::mask(Var x, Tensor m, std::string_view layer) {
  require_same_shape(value(x), m, layer);
  Tensor Y = value(x);
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] *= m[i];
  const std::size_t xid = x.id;
  return push(std::move(Y), needs(x), [xid, m = std::move(m)](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    Tensor &d = t.grad_ref(xid);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * m[i];
  });
}

Var Tape::relu(Var x) {
  Tensor Y = value(x);
  for (double &v : Y.data()) v = v > 0.0 ? v : 0.0;
  const std::size_t xid = x.id;
  return push(std::move(Y), needs(x), [xid](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    const Tensor &xv = t.nodes_[xid].value;
    Tensor &d = t.grad_ref(xid);
    for (std::size_t i = 0; i < dy.size(); ++i)
      if (xv[i] > 0.0) d[i] += dy[i];
  });
}

Var Tape::gelu(Var x) {
  Tensor Y = value(x);
  for (double &v : Y.data()) v = kernels::gelu(v);
  const std::size_t xid = x.id;
  return push(std::move(Y), needs(x), [xid](Tape &t, std::size_t self) {
    const Tensor &dy = t.nodes_[self].grad;
    const Tensor &xv = t.nodes_[xid].value;
    Tensor &d = t.grad_ref(xid);
    for (std::size_t i = 0; i < dy.size(); ++i) d[i] += dy[i] * kernels::gelu_grad(xv[i]);
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, std::string_view layer, double eps) {
  const Tensor &X = value(x);
  const std::size_t n = X.rows(), m = X.cols();
  if (value(gamma).size() != m || value(beta).size() != m) {
    throw ShapeError(std::string(layer), "layer norm affine parameters do not match width " +
                                             std::to_string(m));
  }
  const Tensor &G = value(gamma);
  const Tensor &Bt = value(beta);
  Tensor xhat(X.shape(), 0.0);
  std::vector<double> inv_std(n);
  Tensor Y(X.shape(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean += X[i * m + j];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = X[i * m + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(m);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      const double h = (X[i * m + j] - mean) * inv_std[i];
      xhat[i * m + j] = h;
      Y[i * m + j] = G[j] * h + Bt[j];
    }
  }
  const std::size_t xid = x.id, gid = gamma.id, bid = beta.id;
  const bool ng = needs(x) || needs(gamma) || needs(beta);
  return push(std::move(Y), ng,
              [xid, gid, bid, n, m, xhat = std::move(xhat),
               inv_std = std::move(inv_std)](Tape &t, std::size_t self) {
                const Tensor &dy = t.nodes_[self].grad;
                if (t.nodes_[gid].needs_grad) {
                  Tensor &dg = t.grad_ref(gid);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) dg[j] += dy[i * m + j] * xhat[i * m + j];
                }
                if (t.nodes_[bid].needs_grad) {
                  Tensor &db = t.grad_ref(bid);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) db[j] += dy[i * m + j];
                }
                if (t.nodes_[xid].needs_grad) {
                  const Tensor &G = t.nodes_[gid].value;
                  Tensor &dx = t.grad_ref(xid);
                  const double inv_m = 1.0 / static_cast<double>(m);
                  for (std::size_t i = 0; i < n; ++i) {
                    double sum_d = 0.0, sum_dh = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                      const double dh = dy[i * m + j] * G[j];
                      sum_d += dh;
                      sum_dh += dh * xhat[i * m + j];
                    }
                    for (std::size_t j = 0; j < m; ++j) {
                      const double dh = dy[i * m + j] * G[j];
                      dx[i * m + j] += inv_std[i] * (dh - inv_m * sum_d -
                                                     xhat[i * m + j] * inv_m * sum_dh);
                    }
                  }
                }
              });
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const std::uint32_t> labels,
                                std::string_view layer) {
  const Tensor &Z = value(logits);
  const std::size_t n = Z.rows(), c = Z.cols();
  if (labels.size() != n) {
    throw ShapeError(std::string(layer), std::to_string(labels.size()) + " labels for " +
                                             std::to_string(n) + " rows");
  }
  Tensor probs(Z.shape(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) {
      throw ShapeError(std::string(layer), "label " + std::to_string(labels[i]) +
                                               " out of range for " + std::to_string(c) +
                                               " classes");
    }
    const double *z = Z.data().data() + i * c;
    const double zmax = *std::max_element(z, z + c);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(z[j] - zmax);
      probs[i * c + j] = e;
      sum += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= sum;
    total += std::log(sum) + zmax - z[labels[i]];
  }
  const double loss = total / static_cast<double>(n);
  if (!std::isfinite(loss)) throw NonFiniteError(std::string(layer) + ": loss is not finite", -1);
  std::vector<std::uint32_t> lab(labels.begin(), labels.end());
  const std::size_t zid = logits.id;
  return push(Tensor({1}, loss), needs(logits),
              [zid, n, c, probs = std::move(probs), lab = std::move(lab)](Tape &t,
                                                                         std::size_t self) {
                const double scale = t.nodes_[self].grad[0] / static_cast<double>(n);
                Tensor &dz = t.grad_ref(zid);
                for (std::size_t i = 0; i < n; ++i) {
                  for (std::size_t j = 0; j < c; ++j) {
                    const double target = j == lab[i] ? 1.0 : 0.0;
                    dz[i * c + j] += scale * (probs[i * c + j] - target);
                  }
                }
              });
}

void Tape::backward(Var loss) {
  if (consumed_) throw Error("tape already consumed by a previous backward pass");
  if (value(loss).size() != 1) throw ShapeError("backward", "loss must be a scalar");
  consumed_ = true;
  grad_ref(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node &node = nodes_[id];
    if (!node.needs_grad || !node.back) continue;
    // Nodes nothing flowed into carry no gradient.
    if (node.grad.shape() != node.value.shape()) continue;
    node.back(*this, id);
  }
}

} // namespace earlydrop
