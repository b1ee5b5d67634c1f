#include "transsent/nn/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace transsent::nn {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw std::logic_error(std::string("tape shape error: ") + what);
}
}  // namespace

VarId Tape::push(Matrix v, bool rg, std::function<void(Tape&)> back) {
  nodes_.push_back(Node{std::move(v), Matrix(), rg, std::move(back)});
  return static_cast<VarId>(nodes_.size()) - 1;
}

Matrix& Tape::grad_buf(VarId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Matrix::zeros(n.val.rows(), n.val.cols());
  return n.grad;
}

VarId Tape::constant(Matrix v) { return push(std::move(v), false, nullptr); }

VarId Tape::leaf(Matrix v) { return push(std::move(v), true, nullptr); }

VarId Tape::add(VarId a, VarId b) {
  require(nodes_[a].val.same_shape(nodes_[b].val), "add operands differ");
  Matrix out = nodes_[a].val;
  out.add_(nodes_[b].val);
  bool rg = nodes_[a].rg || nodes_[b].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a, b](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      if (t.nodes_[a].rg) t.grad_buf(a).add_(g);
      if (t.nodes_[b].rg) t.grad_buf(b).add_(g);
    };
  }
  return id;
}

VarId Tape::sub(VarId a, VarId b) {
  require(nodes_[a].val.same_shape(nodes_[b].val), "sub operands differ");
  Matrix out = nodes_[a].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= nodes_[b].val.data()[i];
  bool rg = nodes_[a].rg || nodes_[b].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a, b](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      if (t.nodes_[a].rg) t.grad_buf(a).add_(g);
      if (t.nodes_[b].rg) {
        Matrix& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] -= g.data()[i];
      }
    };
  }
  return id;
}

VarId Tape::mul(VarId a, VarId b) {
  require(nodes_[a].val.same_shape(nodes_[b].val), "mul operands differ");
  Matrix out = nodes_[a].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= nodes_[b].val.data()[i];
  bool rg = nodes_[a].rg || nodes_[b].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a, b](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      if (t.nodes_[a].rg) {
        Matrix& ga = t.grad_buf(a);
        const Matrix& bv = t.nodes_[b].val;
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g.data()[i] * bv.data()[i];
      }
      if (t.nodes_[b].rg) {
        Matrix& gb = t.grad_buf(b);
        const Matrix& av = t.nodes_[a].val;
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data()[i] += g.data()[i] * av.data()[i];
      }
    };
  }
  return id;
}

VarId Tape::div(VarId a, VarId b) {
  require(nodes_[a].val.same_shape(nodes_[b].val), "div operands differ");
  Matrix out = nodes_[a].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= nodes_[b].val.data()[i];
  bool rg = nodes_[a].rg || nodes_[b].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a, b](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& av = t.nodes_[a].val;
      const Matrix& bv = t.nodes_[b].val;
      if (t.nodes_[a].rg) {
        Matrix& ga = t.grad_buf(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += g.data()[i] / bv.data()[i];
      }
      if (t.nodes_[b].rg) {
        Matrix& gb = t.grad_buf(b);
        for (std::size_t i = 0; i < gb.size(); ++i) {
          const double d = bv.data()[i];
          gb.data()[i] -= g.data()[i] * av.data()[i] / (d * d);
        }
      }
    };
  }
  return id;
}

VarId Tape::add_row(VarId x, VarId row) {
  const Matrix& xv = nodes_[x].val;
  const Matrix& rv = nodes_[row].val;
  require(rv.rows() == 1 && rv.cols() == xv.cols(), "add_row wants a 1xC row");
  Matrix out = xv;
  for (int i = 0; i < out.rows(); ++i) {
    double* orow = out.row(i);
    for (int j = 0; j < out.cols(); ++j) orow[j] += rv.at(0, j);
  }
  bool rg = nodes_[x].rg || nodes_[row].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x, row](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      if (t.nodes_[x].rg) t.grad_buf(x).add_(g);
      if (t.nodes_[row].rg) {
        Matrix& gr = t.grad_buf(row);
        for (int i = 0; i < g.rows(); ++i) {
          const double* grow = g.row(i);
          for (int j = 0; j < g.cols(); ++j) gr.at(0, j) += grow[j];
        }
      }
    };
  }
  return id;
}

VarId Tape::add_scalar(VarId x, double c) {
  Matrix out = nodes_[x].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += c;
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (t.nodes_[x].rg) t.grad_buf(x).add_(t.nodes_[id].grad);
    };
  }
  return id;
}

VarId Tape::scale(VarId x, double c) {
  Matrix out = nodes_[x].val;
  out.scale_(c);
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x, c](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += c * g.data()[i];
    };
  }
  return id;
}

VarId Tape::matmul(VarId a, VarId b) {
  require(nodes_[a].val.cols() == nodes_[b].val.rows(), "matmul inner dims differ");
  Matrix out = nn::matmul(nodes_[a].val, nodes_[b].val);
  bool rg = nodes_[a].rg || nodes_[b].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a, b](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      if (t.nodes_[a].rg) mm_acc_nt(t.grad_buf(a), g, t.nodes_[b].val);  // dA += dC * B^T
      if (t.nodes_[b].rg) mm_acc_tn(t.grad_buf(b), t.nodes_[a].val, g);  // dB += A^T * dC
    };
  }
  return id;
}

VarId Tape::transpose(VarId a) {
  Matrix out = nn::transpose(nodes_[a].val);
  bool rg = nodes_[a].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, a](Tape& t) {
      if (!t.nodes_[a].rg) return;
      const Matrix& g = t.nodes_[id].grad;
      Matrix& ga = t.grad_buf(a);
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) ga.at(j, i) += g.at(i, j);
    };
  }
  return id;
}

VarId Tape::relu(VarId x) {
  Matrix out = nodes_[x].val;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& xv = t.nodes_[x].val;
      for (std::size_t i = 0; i < gx.size(); ++i)
        if (xv.data()[i] > 0.0) gx.data()[i] += g.data()[i];
    };
  }
  return id;
}

VarId Tape::tanh_op(VarId x) {
  Matrix out = nodes_[x].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& y = t.nodes_[id].val;
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx.data()[i] += g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    };
  }
  return id;
}

VarId Tape::sigmoid(VarId x) {
  Matrix out = nodes_[x].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-out.data()[i]));
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& y = t.nodes_[id].val;
      for (std::size_t i = 0; i < gx.size(); ++i)
        gx.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
    };
  }
  return id;
}

VarId Tape::exp_op(VarId x) {
  Matrix out = nodes_[x].val;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(out.data()[i]);
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& y = t.nodes_[id].val;
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g.data()[i] * y.data()[i];
    };
  }
  return id;
}

VarId Tape::softmax_rows(VarId x) {
  Matrix out = nodes_[x].val;
  for (int i = 0; i < out.rows(); ++i) {
    double* r = out.row(i);
    double mx = r[0];
    for (int j = 1; j < out.cols(); ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (int j = 0; j < out.cols(); ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (int j = 0; j < out.cols(); ++j) r[j] /= sum;
  }
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& y = t.nodes_[id].val;
      for (int i = 0; i < y.rows(); ++i) {
        const double* yr = y.row(i);
        const double* gr = g.row(i);
        double dot = 0.0;
        for (int j = 0; j < y.cols(); ++j) dot += yr[j] * gr[j];
        double* gxr = gx.row(i);
        for (int j = 0; j < y.cols(); ++j) gxr[j] += yr[j] * (gr[j] - dot);
      }
    };
  }
  return id;
}

VarId Tape::layer_norm(VarId x, VarId gamma, VarId beta, double eps) {
  const Matrix& xv = nodes_[x].val;
  const Matrix& gv = nodes_[gamma].val;
  const Matrix& bv = nodes_[beta].val;
  require(gv.rows() == 1 && gv.cols() == xv.cols(), "layer_norm gamma shape");
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "layer_norm beta shape");
  const int c = xv.cols();
  Matrix out(xv.rows(), c);
  Matrix xhat(xv.rows(), c);   // cached for backward
  Matrix inv_std(xv.rows(), 1);
  for (int i = 0; i < xv.rows(); ++i) {
    const double* r = xv.row(i);
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += r[j];
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (r[j] - mean) * (r[j] - mean);
    var /= c;
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std.at(i, 0) = istd;
    for (int j = 0; j < c; ++j) {
      const double h = (r[j] - mean) * istd;
      xhat.at(i, j) = h;
      out.at(i, j) = h * gv.at(0, j) + bv.at(0, j);
    }
  }
  bool rg = nodes_[x].rg || nodes_[gamma].rg || nodes_[beta].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x, gamma, beta, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      const Matrix& gv = t.nodes_[gamma].val;
      const int c = g.cols();
      if (t.nodes_[gamma].rg) {
        Matrix& gg = t.grad_buf(gamma);
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < c; ++j) gg.at(0, j) += g.at(i, j) * xhat.at(i, j);
      }
      if (t.nodes_[beta].rg) {
        Matrix& gb = t.grad_buf(beta);
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < c; ++j) gb.at(0, j) += g.at(i, j);
      }
      if (t.nodes_[x].rg) {
        Matrix& gx = t.grad_buf(x);
        for (int i = 0; i < g.rows(); ++i) {
          double mean_dy = 0.0, mean_dyx = 0.0;
          for (int j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * gv.at(0, j);
            mean_dy += dy;
            mean_dyx += dy * xhat.at(i, j);
          }
          mean_dy /= c;
          mean_dyx /= c;
          const double istd = inv_std.at(i, 0);
          for (int j = 0; j < c; ++j) {
            const double dy = g.at(i, j) * gv.at(0, j);
            gx.at(i, j) += istd * (dy - mean_dy - xhat.at(i, j) * mean_dyx);
          }
        }
      }
    };
  }
  return id;
}

VarId Tape::concat_cols(const std::vector<VarId>& parts) {
  require(!parts.empty(), "concat_cols needs parts");
  const int rows = nodes_[parts[0]].val.rows();
  int cols = 0;
  bool rg = false;
  for (VarId p : parts) {
    require(nodes_[p].val.rows() == rows, "concat_cols row mismatch");
    cols += nodes_[p].val.cols();
    rg = rg || nodes_[p].rg;
  }
  Matrix out(rows, cols);
  int off = 0;
  for (VarId p : parts) {
    const Matrix& v = nodes_[p].val;
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < v.cols(); ++j) out.at(i, off + j) = v.at(i, j);
    off += v.cols();
  }
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, parts](Tape& t) {
      const Matrix& g = t.nodes_[id].grad;
      int off = 0;
      for (VarId p : parts) {
        const int pc = t.nodes_[p].val.cols();
        if (t.nodes_[p].rg) {
          Matrix& gp = t.grad_buf(p);
          for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, off + j);
        }
        off += pc;
      }
    };
  }
  return id;
}

VarId Tape::slice_cols(VarId x, int start, int len) {
  const Matrix& xv = nodes_[x].val;
  require(start >= 0 && len >= 0 && start + len <= xv.cols(), "slice_cols out of range");
  Matrix out(xv.rows(), len);
  for (int i = 0; i < xv.rows(); ++i)
    for (int j = 0; j < len; ++j) out.at(i, j) = xv.at(i, start + j);
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x, start, len](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < len; ++j) gx.at(i, start + j) += g.at(i, j);
    };
  }
  return id;
}

VarId Tape::reshape(VarId x, int rows, int cols) {
  const Matrix& xv = nodes_[x].val;
  require(static_cast<std::size_t>(rows) * cols == xv.size(), "reshape size mismatch");
  Matrix out(rows, cols);
  std::copy(xv.data(), xv.data() + xv.size(), out.data());
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g.data()[i];
    };
  }
  return id;
}

VarId Tape::gather_rows(VarId table, std::vector<int> ids) {
  const Matrix& tv = nodes_[table].val;
  Matrix out(static_cast<int>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), "gather_rows id out of range");
    const double* src = tv.row(ids[i]);
    std::copy(src, src + tv.cols(), out.row(static_cast<int>(i)));
  }
  bool rg = nodes_[table].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, table, ids = std::move(ids)](Tape& t) {
      if (!t.nodes_[table].rg) return;
      Matrix& gt = t.grad_buf(table);
      const Matrix& g = t.nodes_[id].grad;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        double* dst = gt.row(ids[i]);
        const double* src = g.row(static_cast<int>(i));
        for (int j = 0; j < g.cols(); ++j) dst[j] += src[j];
      }
    };
  }
  return id;
}

VarId Tape::dropout(VarId x, Rng& rng, double rate) {
  if (rate <= 0.0) return x;
  const Matrix& xv = nodes_[x].val;
  Matrix mask(xv.rows(), xv.cols());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Matrix out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x, mask = std::move(mask)](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const Matrix& g = t.nodes_[id].grad;
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g.data()[i] * mask.data()[i];
    };
  }
  return id;
}

VarId Tape::sum(VarId x) {
  const Matrix& xv = nodes_[x].val;
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += xv.data()[i];
  Matrix out(1, 1, s);
  bool rg = nodes_[x].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, x](Tape& t) {
      if (!t.nodes_[x].rg) return;
      Matrix& gx = t.grad_buf(x);
      const double g = t.nodes_[id].grad.at(0, 0);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data()[i] += g;
    };
  }
  return id;
}

VarId Tape::cross_entropy(VarId logits, int target) {
  const Matrix& lv = nodes_[logits].val;
  require(lv.rows() == 1 && target >= 0 && target < lv.cols(), "cross_entropy wants 1xC logits");
  double mx = lv.at(0, 0);
  for (int j = 1; j < lv.cols(); ++j) mx = std::max(mx, lv.at(0, j));
  double lse = 0.0;
  for (int j = 0; j < lv.cols(); ++j) lse += std::exp(lv.at(0, j) - mx);
  lse = mx + std::log(lse);
  Matrix out(1, 1, lse - lv.at(0, target));
  bool rg = nodes_[logits].rg;
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, logits, target, lse](Tape& t) {
      if (!t.nodes_[logits].rg) return;
      Matrix& gl = t.grad_buf(logits);
      const Matrix& lv = t.nodes_[logits].val;
      const double g = t.nodes_[id].grad.at(0, 0);
      for (int j = 0; j < lv.cols(); ++j) {
        double p = std::exp(lv.at(0, j) - lse);
        gl.at(0, j) += g * (p - (j == target ? 1.0 : 0.0));
      }
    };
  }
  return id;
}

VarId Tape::mean_stack(const std::vector<VarId>& scalars) {
  require(!scalars.empty(), "mean_stack needs inputs");
  double s = 0.0;
  bool rg = false;
  for (VarId v : scalars) {
    require(nodes_[v].val.rows() == 1 && nodes_[v].val.cols() == 1, "mean_stack wants scalars");
    s += nodes_[v].val.at(0, 0);
    rg = rg || nodes_[v].rg;
  }
  Matrix out(1, 1, s / static_cast<double>(scalars.size()));
  VarId id = push(std::move(out), rg, nullptr);
  if (rg) {
    nodes_[id].back = [id, scalars](Tape& t) {
      const double g = t.nodes_[id].grad.at(0, 0) / static_cast<double>(scalars.size());
      for (VarId v : scalars)
        if (t.nodes_[v].rg) t.grad_buf(v).at(0, 0) += g;
    };
  }
  return id;
}

void Tape::backward(VarId root) {
  if (!(nodes_[root].val.rows() == 1 && nodes_[root].val.cols() == 1))
    throw std::logic_error("backward root must be a scalar");
  if (!nodes_[root].rg) return;  // nothing on the tape wants gradients
  grad_buf(root).at(0, 0) = 1.0;
  for (VarId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.rg && !n.grad.empty() && n.back) n.back(*this);
  }
}

}  // namespace transsent::nn
