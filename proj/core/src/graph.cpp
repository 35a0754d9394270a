#include "ecgtta/graph.hpp"

#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace ecgtta::nn {

namespace {

// C += A(mxk) * B(kxn); ikj order with a 4-way k unroll keeps the inner loop
// contiguous and FMA-friendly.
void matmul_acc(const double* __restrict a, const double* __restrict b,
                double* __restrict c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<std::size_t>(i) * k;
    double* __restrict crow = c + static_cast<std::size_t>(i) * n;
    int kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const double a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
      const double* __restrict b0 = b + static_cast<std::size_t>(kk) * n;
      const double* __restrict b1 = b0 + n;
      const double* __restrict b2 = b1 + n;
      const double* __restrict b3 = b2 + n;
      for (int j = 0; j < n; ++j) crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
    }
    for (; kk < k; ++kk) {
      const double av = arow[kk];
      const double* __restrict brow = b + static_cast<std::size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A(mxk) * B(nxk)^T
void matmul_bt_acc(const double* __restrict a, const double* __restrict b,
                   double* __restrict c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* __restrict arow = a + static_cast<std::size_t>(i) * k;
    double* __restrict crow = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* __restrict brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      crow[j] += acc;
    }
  }
}

// C += A(kxm)^T * B(kxn)
void matmul_at_acc(const double* __restrict a, const double* __restrict b,
                   double* __restrict c, int m, int k, int n) {
  for (int kk = 0; kk < k; ++kk) {
    const double* __restrict arow = a + static_cast<std::size_t>(kk) * m;
    const double* __restrict brow = b + static_cast<std::size_t>(kk) * n;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      double* __restrict crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Graph::NodeId Graph::push(Tensor value, std::function<void(Graph&)> backfn) {
  Node n;
  n.value = std::move(value);
  if (record_) n.backfn = std::move(backfn);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size()) - 1;
}

Graph::NodeId Graph::input(Tensor value) { return push(std::move(value), {}); }

Graph::NodeId Graph::param(const Tensor& value, int grad_slot) {
  NodeId id = push(value, {});
  if (record_) nodes_.back().grad_slot = grad_slot;
  return id;
}

Graph::NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const int m = ta.rows(), k = ta.cols(), n = tb.cols();
  if (tb.rows() != k) throw std::invalid_argument("matmul: inner dimension mismatch");
  Tensor out({m, n});
  matmul_acc(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, b, id, m, k, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& ta2 = g.value(a);
      const Tensor& tb2 = g.value(b);
      // dA += dY B^T ; dB += A^T dY
      matmul_bt_acc(dy.data.data(), tb2.data.data(), g.grad(a).data.data(), m, n, k);
      matmul_at_acc(ta2.data.data(), dy.data.data(), g.grad(b).data.data(), k, m, n);
    };
  }
  return id;
}

Graph::NodeId Graph::transpose(NodeId a) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  Tensor out({n, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = ta.at(i, j);
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da.at(i, j) += dy.at(j, i);
    };
  }
  return id;
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, b, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      Tensor& db = g.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        da.data[i] += dy.data[i];
        db.data[i] += dy.data[i];
      }
    };
  }
  return id;
}

Graph::NodeId Graph::add_rowvec(NodeId a, NodeId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  const int m = ta.rows(), n = ta.cols();
  if (static_cast<int>(tv.size()) != n)
    throw std::invalid_argument("add_rowvec: vector length mismatch");
  Tensor out = ta;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += tv.data[static_cast<std::size_t>(j)];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, v, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      Tensor& dv = g.grad(v);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          da.at(i, j) += dy.at(i, j);
          dv.data[static_cast<std::size_t>(j)] += dy.at(i, j);
        }
    };
  }
  return id;
}

Graph::NodeId Graph::add_colvec(NodeId a, NodeId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  const int m = ta.rows(), n = ta.cols();
  if (static_cast<int>(tv.size()) != m)
    throw std::invalid_argument("add_colvec: vector length mismatch");
  Tensor out = ta;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) += tv.data[static_cast<std::size_t>(i)];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, v, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      Tensor& dv = g.grad(v);
      for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
          da.at(i, j) += dy.at(i, j);
          s += dy.at(i, j);
        }
        dv.data[static_cast<std::size_t>(i)] += s;
      }
    };
  }
  return id;
}

Graph::NodeId Graph::mul_rowvec(NodeId a, NodeId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  const int m = ta.rows(), n = ta.cols();
  if (static_cast<int>(tv.size()) != n)
    throw std::invalid_argument("mul_rowvec: vector length mismatch");
  Tensor out = ta;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) *= tv.data[static_cast<std::size_t>(j)];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, v, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& ta2 = g.value(a);
      const Tensor& tv2 = g.value(v);
      Tensor& da = g.grad(a);
      Tensor& dv = g.grad(v);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          da.at(i, j) += dy.at(i, j) * tv2.data[static_cast<std::size_t>(j)];
          dv.data[static_cast<std::size_t>(j)] += dy.at(i, j) * ta2.at(i, j);
        }
    };
  }
  return id;
}

Graph::NodeId Graph::mul_colvec(NodeId a, NodeId v) {
  const Tensor& ta = value(a);
  const Tensor& tv = value(v);
  const int m = ta.rows(), n = ta.cols();
  if (static_cast<int>(tv.size()) != m)
    throw std::invalid_argument("mul_colvec: vector length mismatch");
  Tensor out = ta;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) *= tv.data[static_cast<std::size_t>(i)];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, v, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& ta2 = g.value(a);
      const Tensor& tv2 = g.value(v);
      Tensor& da = g.grad(a);
      Tensor& dv = g.grad(v);
      for (int i = 0; i < m; ++i) {
        double s = 0.0;
        const double vi = tv2.data[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) {
          da.at(i, j) += dy.at(i, j) * vi;
          s += dy.at(i, j) * ta2.at(i, j);
        }
        dv.data[static_cast<std::size_t>(i)] += s;
      }
    };
  }
  return id;
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) throw std::invalid_argument("mul: shape mismatch");
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, b, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& ta2 = g.value(a);
      const Tensor& tb2 = g.value(b);
      Tensor& da = g.grad(a);
      Tensor& db = g.grad(b);
      for (std::size_t i = 0; i < dy.size(); ++i) {
        da.data[i] += dy.data[i] * tb2.data[i];
        db.data[i] += dy.data[i] * ta2.data[i];
      }
    };
  }
  return id;
}

Graph::NodeId Graph::scale(NodeId a, double c) {
  Tensor out = value(a);
  for (double& v : out.data) v *= c;
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, c, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += c * dy.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::relu(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& ta = g.value(a);
      Tensor& da = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (ta.data[i] > 0.0) da.data[i] += dy.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::softmax_rows(NodeId a) {
  Tensor out = value(a);
  const int m = out.rows(), n = out.cols();
  for (int i = 0; i < m; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, out.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      double e = std::exp(out.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= sum;
  }
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& y = g.value(id);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += dy.at(i, j) * y.at(i, j);
        for (int j = 0; j < n; ++j)
          da.at(i, j) += (dy.at(i, j) - dot) * y.at(i, j);
      }
    };
  }
  return id;
}

Graph::NodeId Graph::attention_pack(NodeId q, NodeId k, NodeId v, int n_seqs,
                                    int seq_len, double scale) {
  const Tensor& tq = value(q);
  const Tensor& tk = value(k);
  const Tensor& tv = value(v);
  const int c = tq.cols();
  if (!tq.same_shape(tk) || !tq.same_shape(tv) || tq.rows() != n_seqs * seq_len)
    throw std::invalid_argument("attention_pack: Q/K/V shape mismatch");

  // Softmax rows are kept for the backward pass.
  auto attn = std::make_shared<std::vector<double>>(
      static_cast<std::size_t>(n_seqs) * seq_len * seq_len);
  Tensor out({n_seqs * seq_len, c});
  std::vector<double> scores(static_cast<std::size_t>(seq_len) * seq_len);
  for (int s = 0; s < n_seqs; ++s) {
    const double* qs = tq.data.data() + static_cast<std::size_t>(s) * seq_len * c;
    const double* ks = tk.data.data() + static_cast<std::size_t>(s) * seq_len * c;
    const double* vs = tv.data.data() + static_cast<std::size_t>(s) * seq_len * c;
    double* as = attn->data() + static_cast<std::size_t>(s) * seq_len * seq_len;
    double* os = out.data.data() + static_cast<std::size_t>(s) * seq_len * c;

    std::fill(scores.begin(), scores.end(), 0.0);
    matmul_bt_acc(qs, ks, scores.data(), seq_len, c, seq_len);
    for (int i = 0; i < seq_len; ++i) {
      double* row = scores.data() + static_cast<std::size_t>(i) * seq_len;
      double mx = row[0] * scale;
      for (int j = 1; j < seq_len; ++j) mx = std::max(mx, row[j] * scale);
      double sum = 0.0;
      for (int j = 0; j < seq_len; ++j) {
        double e = std::exp(row[j] * scale - mx);
        row[j] = e;
        sum += e;
      }
      double* arow = as + static_cast<std::size_t>(i) * seq_len;
      for (int j = 0; j < seq_len; ++j) arow[j] = row[j] / sum;
    }
    matmul_acc(as, vs, os, seq_len, seq_len, c);
  }

  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [q, k, v, id, n_seqs, seq_len, c, scale, attn](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& tq2 = g.value(q);
      const Tensor& tk2 = g.value(k);
      const Tensor& tv2 = g.value(v);
      Tensor& dq = g.grad(q);
      Tensor& dk = g.grad(k);
      Tensor& dv = g.grad(v);
      std::vector<double> da(static_cast<std::size_t>(seq_len) * seq_len);
      std::vector<double> dz(static_cast<std::size_t>(seq_len) * seq_len);
      for (int s = 0; s < n_seqs; ++s) {
        const std::size_t row0 = static_cast<std::size_t>(s) * seq_len;
        const double* qs = tq2.data.data() + row0 * c;
        const double* ks = tk2.data.data() + row0 * c;
        const double* vs = tv2.data.data() + row0 * c;
        const double* as = attn->data() + static_cast<std::size_t>(s) * seq_len * seq_len;
        const double* dys = dy.data.data() + row0 * c;

        // dV += A^T dO
        matmul_at_acc(as, dys, dv.data.data() + row0 * c, seq_len, seq_len, c);
        // dA = dO V^T, then softmax backward rows into dZ (scaled).
        std::fill(da.begin(), da.end(), 0.0);
        matmul_bt_acc(dys, vs, da.data(), seq_len, c, seq_len);
        for (int i = 0; i < seq_len; ++i) {
          const double* arow = as + static_cast<std::size_t>(i) * seq_len;
          const double* darow = da.data() + static_cast<std::size_t>(i) * seq_len;
          double dot = 0.0;
          for (int j = 0; j < seq_len; ++j) dot += darow[j] * arow[j];
          double* dzrow = dz.data() + static_cast<std::size_t>(i) * seq_len;
          for (int j = 0; j < seq_len; ++j)
            dzrow[j] = (darow[j] - dot) * arow[j] * scale;
        }
        // dQ += dZ K ; dK += dZ^T Q
        matmul_acc(dz.data(), ks, dq.data.data() + row0 * c, seq_len, seq_len, c);
        matmul_at_acc(dz.data(), qs, dk.data.data() + row0 * c, seq_len, seq_len, c);
      }
    };
  }
  return id;
}

Graph::NodeId Graph::norm_rows(NodeId a, double eps) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  Tensor out({m, n});
  for (int i = 0; i < m; ++i) {
    double mean = 0.0;
    for (int j = 0; j < n; ++j) mean += ta.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int j = 0; j < n; ++j) {
      double d = ta.at(i, j) - mean;
      var += d * d;
    }
    var /= n;
    double istd = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < n; ++j) out.at(i, j) = (ta.at(i, j) - mean) * istd;
  }
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, m, n, eps](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& xhat = g.value(id);
      const Tensor& x = g.value(a);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
          double d = x.at(i, j) - mean;
          var += d * d;
        }
        var /= n;
        double istd = 1.0 / std::sqrt(var + eps);
        double mean_dy = 0.0, mean_dy_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
          mean_dy += dy.at(i, j);
          mean_dy_xhat += dy.at(i, j) * xhat.at(i, j);
        }
        mean_dy /= n;
        mean_dy_xhat /= n;
        for (int j = 0; j < n; ++j)
          da.at(i, j) += istd * (dy.at(i, j) - mean_dy - xhat.at(i, j) * mean_dy_xhat);
      }
    };
  }
  return id;
}

Graph::NodeId Graph::colmean(NodeId a) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  Tensor out({1, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(0, j) += ta.at(i, j) / m;
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da.at(i, j) += dy.at(0, j) / m;
    };
  }
  return id;
}

Graph::NodeId Graph::rowmean_vec(NodeId a) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  Tensor out({1, m});
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += ta.at(i, j);
    out.at(0, i) = s / n;
  }
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, m, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) da.at(i, j) += dy.at(0, i) / n;
    };
  }
  return id;
}

Graph::NodeId Graph::slice_rows(NodeId a, int r0, int r1) {
  const Tensor& ta = value(a);
  const int n = ta.cols();
  if (!(0 <= r0 && r0 < r1 && r1 <= ta.rows()))
    throw std::invalid_argument("slice_rows: bad range");
  Tensor out({r1 - r0, n});
  std::memcpy(out.data.data(), ta.data.data() + static_cast<std::size_t>(r0) * n,
              out.size() * sizeof(double));
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, r0, n](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      double* dst = da.data.data() + static_cast<std::size_t>(r0) * n;
      for (std::size_t i = 0; i < dy.size(); ++i) dst[i] += dy.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::slice_cols(NodeId a, int c0, int c1) {
  const Tensor& ta = value(a);
  const int m = ta.rows(), n = ta.cols();
  if (!(0 <= c0 && c0 < c1 && c1 <= n))
    throw std::invalid_argument("slice_cols: bad range");
  Tensor out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = ta.at(i, j);
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, c0, c1, m](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (int i = 0; i < m; ++i)
        for (int j = c0; j < c1; ++j) da.at(i, j) += dy.at(i, j - c0);
    };
  }
  return id;
}

Graph::NodeId Graph::concat_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  const int n = value(parts[0]).cols();
  int m = 0;
  for (NodeId p : parts) {
    if (value(p).cols() != n) throw std::invalid_argument("concat_rows: width mismatch");
    m += value(p).rows();
  }
  Tensor out({m, n});
  std::size_t off = 0;
  for (NodeId p : parts) {
    const Tensor& tp = value(p);
    std::memcpy(out.data.data() + off, tp.data.data(), tp.size() * sizeof(double));
    off += tp.size();
  }
  NodeId id = push(std::move(out), {});
  if (record_) {
    std::vector<NodeId> ps = parts;
    nodes_.back().backfn = [ps, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      std::size_t off2 = 0;
      for (NodeId p : ps) {
        Tensor& dp = g.grad(p);
        for (std::size_t i = 0; i < dp.size(); ++i) dp.data[i] += dy.data[off2 + i];
        off2 += dp.size();
      }
    };
  }
  return id;
}

Graph::NodeId Graph::concat_cols(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int m = value(parts[0]).rows();
  int n = 0;
  for (NodeId p : parts) {
    if (value(p).rows() != m) throw std::invalid_argument("concat_cols: height mismatch");
    n += value(p).cols();
  }
  Tensor out({m, n});
  int coff = 0;
  for (NodeId p : parts) {
    const Tensor& tp = value(p);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < tp.cols(); ++j) out.at(i, coff + j) = tp.at(i, j);
    coff += tp.cols();
  }
  NodeId id = push(std::move(out), {});
  if (record_) {
    std::vector<NodeId> ps = parts;
    nodes_.back().backfn = [ps, id, m](Graph& g) {
      const Tensor& dy = g.grad(id);
      int coff2 = 0;
      for (NodeId p : ps) {
        Tensor& dp = g.grad(p);
        const int pn = dp.cols();
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < pn; ++j) dp.at(i, j) += dy.at(i, coff2 + j);
        coff2 += pn;
      }
    };
  }
  return id;
}

Graph::NodeId Graph::gather(NodeId a, const std::vector<long>& indices,
                            std::vector<int> out_shape) {
  const Tensor& ta = value(a);
  Tensor out(std::move(out_shape));
  if (out.size() != indices.size())
    throw std::invalid_argument("gather: index count does not match output shape");
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.data[i] = indices[i] < 0 ? 0.0 : ta.data[static_cast<std::size_t>(indices[i])];
  NodeId id = push(std::move(out), {});
  if (record_) {
    const std::vector<long>* idx = &indices;  // caller keeps indices alive
    nodes_.back().backfn = [a, id, idx](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      const std::vector<long>& ix = *idx;
      for (std::size_t i = 0; i < ix.size(); ++i)
        if (ix[i] >= 0) da.data[static_cast<std::size_t>(ix[i])] += dy.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::pick(NodeId a, int flat_index) {
  const Tensor& ta = value(a);
  if (flat_index < 0 || static_cast<std::size_t>(flat_index) >= ta.size())
    throw std::invalid_argument("pick: index out of range");
  Tensor out({1, 1});
  out.data[0] = ta.data[static_cast<std::size_t>(flat_index)];
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, flat_index](Graph& g) {
      g.grad(a).data[static_cast<std::size_t>(flat_index)] += g.grad(id).data[0];
    };
  }
  return id;
}

Graph::NodeId Graph::log(NodeId a) {
  Tensor out = value(a);
  for (double& v : out.data) v = std::log(v);
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& x = g.value(a);
      Tensor& da = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i] / x.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::clamp_min(NodeId a, double floor) {
  Tensor out = value(a);
  for (double& v : out.data) v = v < floor ? floor : v;
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id, floor](Graph& g) {
      const Tensor& dy = g.grad(id);
      const Tensor& x = g.value(a);
      Tensor& da = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i)
        if (x.data[i] > floor) da.data[i] += dy.data[i];
    };
  }
  return id;
}

Graph::NodeId Graph::reshape(NodeId a, std::vector<int> shape) {
  const Tensor& ta = value(a);
  Tensor out(std::move(shape));
  if (out.size() != ta.size()) throw std::invalid_argument("reshape: element count mismatch");
  out.data = ta.data;
  NodeId id = push(std::move(out), {});
  if (record_) {
    nodes_.back().backfn = [a, id](Graph& g) {
      const Tensor& dy = g.grad(id);
      Tensor& da = g.grad(a);
      for (std::size_t i = 0; i < dy.size(); ++i) da.data[i] += dy.data[i];
    };
  }
  return id;
}

void Graph::backward(NodeId loss, std::span<double> grad_out, double seed_scale) {
  if (!record_) throw std::logic_error("backward on a non-recording graph");
  if (value(loss).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  for (Node& n : nodes_) {
    n.grad = Tensor(n.value.shape);
  }
  grad(loss).data[0] = seed_scale;
  for (int id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backfn) n.backfn(*this);
  }
  for (Node& n : nodes_) {
    if (n.grad_slot >= 0) {
      for (std::size_t i = 0; i < n.grad.size(); ++i)
        grad_out[static_cast<std::size_t>(n.grad_slot) + i] += n.grad.data[i];
    }
  }
}

}  // namespace ecgtta::nn
