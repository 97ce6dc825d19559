// Copyright 2026 The advgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "advgen/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace advgen::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Node& parent(Node& n, size_t i) { return *n.parents[i]; }

struct ConvGeometry {
  int channels, height, width, kernel, stride, pad, out_h, out_w;
  int patch() const { return channels * kernel * kernel; }
  int pixels() const { return out_h * out_w; }
};

void im2col(const double* in, const ConvGeometry& g, double* cols) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + static_cast<size_t>((c * k + ky) * k + kx) * g.pixels();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          double* dst = row + static_cast<size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = in + (static_cast<size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* out) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row =
            cols + static_cast<size_t>((c * k + ky) * k + kx) * g.pixels();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.height) continue;
          const double* src = row + static_cast<size_t>(oy) * g.out_w;
          double* dst = out + (static_cast<size_t>(c) * g.height + iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride,
           int pad) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require(x.rank() == 3, "conv2d input must be {C, H, W}, got " + x.shape_string());
  require(w.rank() == 4 && w.dim(2) == w.dim(3), "conv2d weight must be {O, C, k, k}");
  require(w.dim(1) == x.dim(0), "conv2d channel mismatch: input " +
                                    x.shape_string() + " weight " + w.shape_string());
  require(bias.value().size() == static_cast<size_t>(w.dim(0)), "conv2d bias size");
  require(stride >= 1 && pad >= 0, "conv2d stride/pad");

  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), w.dim(2), stride, pad, 0, 0};
  g.out_h = (g.height + 2 * pad - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * pad - g.kernel) / stride + 1;
  require(g.out_h > 0 && g.out_w > 0, "conv2d input smaller than kernel");
  const int out_c = w.dim(0);

  std::vector<double> cols(static_cast<size_t>(g.patch()) * g.pixels());
  im2col(x.data(), g, cols.data());

  Tensor out({out_c, g.out_h, g.out_w});
  MapMat o(out.data(), out_c, g.pixels());
  ConstMapMat wm(w.data(), out_c, g.patch());
  ConstMapMat cm(cols.data(), g.patch(), g.pixels());
  o.noalias() = wm * cm;
  o.colwise() += ConstMapVec(bias.value().data(), out_c);

  return make_result(
      std::move(out), {input, weight, bias},
      [g, out_c, cols = std::move(cols)](Node& n) {
        ConstMapMat go(n.grad.data(), out_c, g.pixels());
        Node& in_n = parent(n, 0);
        Node& w_n = parent(n, 1);
        Node& b_n = parent(n, 2);
        if (w_n.requires_grad) {
          ConstMapMat cm(cols.data(), g.patch(), g.pixels());
          MapMat gw(w_n.grad_buffer().data(), out_c, g.patch());
          gw.noalias() += go * cm.transpose();
        }
        if (b_n.requires_grad) {
          // Plain loops: Eigen's vectorised reductions peel by address
          // alignment, which would make the sum order allocation-dependent.
          double* gb = b_n.grad_buffer().data();
          const int pixels = g.pixels();
          for (int oc = 0; oc < out_c; ++oc) {
            const double* row = n.grad.data() + static_cast<size_t>(oc) * pixels;
            double s = 0.0;
            for (int i = 0; i < pixels; ++i) s += row[i];
            gb[oc] += s;
          }
        }
        if (in_n.requires_grad) {
          ConstMapMat wm(w_n.value.data(), out_c, g.patch());
          RowMat dcols = wm.transpose() * go;
          col2im_add(dcols.data(), g, in_n.grad_buffer().data());
        }
      });
}

Var relu(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return make_result(std::move(out), {x}, [](Node& n) {
    Node& in = parent(n, 0);
    Tensor& g = in.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) {
      if (in.value[i] > 0.0) g[i] += n.grad[i];
    }
  });
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::tanh(v);
  return make_result(std::move(out), {x}, [](Node& n) {
    Tensor& g = parent(n, 0).grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) {
      g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return make_result(std::move(out), {x}, [factor](Node& n) {
    Tensor& g = parent(n, 0).grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) g[i] += factor * n.grad[i];
  });
}

Var add(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "add: shape mismatch " +
                                               a.value().shape_string() + " vs " +
                                               b.value().shape_string());
  Tensor out = a.value();
  for (size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return make_result(std::move(out), {a, b}, [](Node& n) {
    for (size_t p = 0; p < 2; ++p) {
      Node& in = parent(n, p);
      if (!in.requires_grad) continue;
      Tensor& g = in.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  require(ta.rank() == 3 && tb.rank() == 3 && ta.dim(1) == tb.dim(1) &&
              ta.dim(2) == tb.dim(2),
          "concat_channels: spatial mismatch");
  Tensor out({ta.dim(0) + tb.dim(0), ta.dim(1), ta.dim(2)});
  std::copy(ta.data(), ta.data() + ta.size(), out.data());
  std::copy(tb.data(), tb.data() + tb.size(), out.data() + ta.size());
  const size_t split = ta.size();
  return make_result(std::move(out), {a, b}, [split](Node& n) {
    Node& na = parent(n, 0);
    Node& nb = parent(n, 1);
    if (na.requires_grad) {
      Tensor& g = na.grad_buffer();
      for (size_t i = 0; i < split; ++i) g[i] += n.grad[i];
    }
    if (nb.requires_grad) {
      Tensor& g = nb.grad_buffer();
      for (size_t i = 0; i < g.size(); ++i) g[i] += n.grad[split + i];
    }
  });
}

Var upsample2x(const Var& x) {
  const Tensor& t = x.value();
  require(t.rank() == 3, "upsample2x expects {C, H, W}");
  const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int xx = 0; xx < 2 * w; ++xx) out.at(ch, y, xx) = t.at(ch, y / 2, xx / 2);
    }
  }
  return make_result(std::move(out), {x}, [c, h, w](Node& n) {
    Tensor& g = parent(n, 0).grad_buffer();
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < 2 * h; ++y) {
        for (int xx = 0; xx < 2 * w; ++xx) g.at(ch, y / 2, xx / 2) += n.grad.at(ch, y, xx);
      }
    }
  });
}

Var clamp(const Var& x, double lo, double hi) {
  Tensor out = x.value();
  for (double& v : out.values()) v = std::clamp(v, lo, hi);
  return make_result(std::move(out), {x}, [lo, hi](Node& n) {
    Node& in = parent(n, 0);
    Tensor& g = in.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) {
      const double v = in.value[i];
      if (v >= lo && v <= hi) g[i] += n.grad[i];
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& tx = x.value();
  const Tensor& tw = weight.value();
  require(tx.rank() == 2 && tw.rank() == 2 && tx.dim(1) == tw.dim(1),
          "linear: shape mismatch " + tx.shape_string() + " x " + tw.shape_string());
  const int n_rows = tx.dim(0), in_dim = tx.dim(1), out_dim = tw.dim(0);
  Tensor out({n_rows, out_dim});
  if (n_rows > 0) {
    MapMat o(out.data(), n_rows, out_dim);
    o.noalias() = ConstMapMat(tx.data(), n_rows, in_dim) *
                  ConstMapMat(tw.data(), out_dim, in_dim).transpose();
    o.rowwise() += ConstMapVec(bias.value().data(), out_dim).transpose();
  }
  return make_result(std::move(out), {x, weight, bias},
                     [n_rows, in_dim, out_dim](Node& n) {
                       if (n_rows == 0) return;
                       ConstMapMat go(n.grad.data(), n_rows, out_dim);
                       Node& nx = parent(n, 0);
                       Node& nw = parent(n, 1);
                       Node& nb = parent(n, 2);
                       if (nx.requires_grad) {
                         MapMat gx(nx.grad_buffer().data(), n_rows, in_dim);
                         gx.noalias() += go * ConstMapMat(nw.value.data(), out_dim, in_dim);
                       }
                       if (nw.requires_grad) {
                         MapMat gw(nw.grad_buffer().data(), out_dim, in_dim);
                         gw.noalias() += go.transpose() *
                                         ConstMapMat(nx.value.data(), n_rows, in_dim);
                       }
                       if (nb.requires_grad) {
                         double* gb = nb.grad_buffer().data();
                         for (int r = 0; r < n_rows; ++r) {
                           const double* row = n.grad.data() + static_cast<size_t>(r) * out_dim;
                           for (int o = 0; o < out_dim; ++o) gb[o] += row[o];
                         }
                       }
                     });
}

Var roi_crop(const Var& features, std::span<const BoxCoords> boxes,
             double spatial_scale, int out_size) {
  const Tensor& f = features.value();
  require(f.rank() == 3, "roi_crop expects {C, H, W} features");
  require(out_size >= 1 && spatial_scale > 0.0, "roi_crop geometry");
  const int c = f.dim(0), fh = f.dim(1), fw = f.dim(2);
  const int bins = out_size * out_size;
  const int n = static_cast<int>(boxes.size());

  struct Tap {
    int offset[4];
    double weight[4];
  };
  std::vector<Tap> taps(static_cast<size_t>(n) * bins);
  for (int b = 0; b < n; ++b) {
    const auto& box = boxes[static_cast<size_t>(b)];
    const double bw = (box[2] - box[0]) / out_size;
    const double bh = (box[3] - box[1]) / out_size;
    for (int i = 0; i < out_size; ++i) {
      const double fy = std::clamp((box[1] + (i + 0.5) * bh) * spatial_scale - 0.5,
                                   0.0, static_cast<double>(fh - 1));
      const int y0 = static_cast<int>(std::floor(fy));
      const int y1 = std::min(y0 + 1, fh - 1);
      const double ly = fy - y0;
      for (int j = 0; j < out_size; ++j) {
        const double fx = std::clamp((box[0] + (j + 0.5) * bw) * spatial_scale - 0.5,
                                     0.0, static_cast<double>(fw - 1));
        const int x0 = static_cast<int>(std::floor(fx));
        const int x1 = std::min(x0 + 1, fw - 1);
        const double lx = fx - x0;
        Tap& t = taps[static_cast<size_t>(b) * bins + i * out_size + j];
        t.offset[0] = y0 * fw + x0;
        t.offset[1] = y0 * fw + x1;
        t.offset[2] = y1 * fw + x0;
        t.offset[3] = y1 * fw + x1;
        t.weight[0] = (1 - ly) * (1 - lx);
        t.weight[1] = (1 - ly) * lx;
        t.weight[2] = ly * (1 - lx);
        t.weight[3] = ly * lx;
      }
    }
  }

  const size_t plane = static_cast<size_t>(fh) * fw;
  const int row_len = c * bins;
  Tensor out({n, row_len});
  for (int b = 0; b < n; ++b) {
    double* row = out.data() + static_cast<size_t>(b) * row_len;
    for (int ch = 0; ch < c; ++ch) {
      const double* src = f.data() + ch * plane;
      for (int k = 0; k < bins; ++k) {
        const Tap& t = taps[static_cast<size_t>(b) * bins + k];
        row[ch * bins + k] = t.weight[0] * src[t.offset[0]] + t.weight[1] * src[t.offset[1]] +
                             t.weight[2] * src[t.offset[2]] + t.weight[3] * src[t.offset[3]];
      }
    }
  }

  return make_result(std::move(out), {features},
                     [taps = std::move(taps), n, c, bins, plane, row_len](Node& node) {
                       Tensor& g = parent(node, 0).grad_buffer();
                       for (int b = 0; b < n; ++b) {
                         const double* row = node.grad.data() + static_cast<size_t>(b) * row_len;
                         for (int ch = 0; ch < c; ++ch) {
                           double* dst = g.data() + ch * plane;
                           for (int k = 0; k < bins; ++k) {
                             const Tap& t = taps[static_cast<size_t>(b) * bins + k];
                             const double v = row[ch * bins + k];
                             for (int q = 0; q < 4; ++q) dst[t.offset[q]] += t.weight[q] * v;
                           }
                         }
                       }
                     });
}

Var gather_rows(const Var& x, std::span<const int> rows) {
  const Tensor& t = x.value();
  require(t.rank() == 2, "gather_rows expects a matrix");
  const int cols = t.dim(1);
  std::vector<int> idx(rows.begin(), rows.end());
  Tensor out({static_cast<int>(idx.size()), cols});
  for (size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < t.dim(0), "gather_rows index out of range");
    std::copy_n(t.data() + static_cast<size_t>(idx[r]) * cols, cols,
                out.data() + r * cols);
  }
  return make_result(std::move(out), {x}, [idx = std::move(idx), cols](Node& n) {
    Tensor& g = parent(n, 0).grad_buffer();
    for (size_t r = 0; r < idx.size(); ++r) {
      for (int k = 0; k < cols; ++k) {
        g[static_cast<size_t>(idx[r]) * cols + k] += n.grad[r * cols + k];
      }
    }
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return make_result(Tensor({1}, s), {x}, [](Node& n) {
    Tensor& g = parent(n, 0).grad_buffer();
    for (double& v : g.values()) v += n.grad[0];
  });
}

Var squared_distance(const Var& a, const Var& b) {
  require(a.value().same_shape(b.value()), "squared_distance: shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.value().size(); ++i) {
    const double d = a.value()[i] - b.value()[i];
    s += d * d;
  }
  return make_result(Tensor({1}, s), {a, b}, [](Node& n) {
    Node& na = parent(n, 0);
    Node& nb = parent(n, 1);
    const double go = n.grad[0];
    for (size_t i = 0; i < na.value.size(); ++i) {
      const double d = 2.0 * (na.value[i] - nb.value[i]) * go;
      if (na.requires_grad) na.grad_buffer()[i] += d;
      if (nb.requires_grad) nb.grad_buffer()[i] -= d;
    }
  });
}

Var face_margin_hinge(const Var& logits) {
  const Tensor& z = logits.value();
  require(z.rank() == 2 && z.dim(1) == 2, "face_margin_hinge expects {N, 2} logits");
  double s = 0.0;
  for (int i = 0; i < z.dim(0); ++i) {
    s += std::max(z[2 * i + 1] - z[2 * i], 0.0);
  }
  return make_result(Tensor({1}, s), {logits}, [](Node& n) {
    Node& in = parent(n, 0);
    Tensor& g = in.grad_buffer();
    const int rows = in.value.dim(0);
    for (int i = 0; i < rows; ++i) {
      if (in.value[2 * i + 1] - in.value[2 * i] > 0.0) {
        g[2 * i + 1] += n.grad[0];
        g[2 * i] -= n.grad[0];
      }
    }
  });
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> weights) {
  require(terms.size() == weights.size(), "weighted_sum arity");
  double s = 0.0;
  for (size_t i = 0; i < terms.size(); ++i) {
    require(terms[i].value().size() == 1, "weighted_sum expects scalars");
    s += weights[i] * terms[i].value()[0];
  }
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Tensor({1}, s), std::vector<Var>(terms.begin(), terms.end()),
                     [w = std::move(w)](Node& n) {
                       for (size_t i = 0; i < w.size(); ++i) {
                         Node& in = parent(n, i);
                         if (in.requires_grad) in.grad_buffer()[0] += w[i] * n.grad[0];
                       }
                     });
}

Var sigmoid_bce(const Var& logits, std::span<const int> indices,
                std::span<const double> targets) {
  require(indices.size() == targets.size(), "sigmoid_bce arity");
  const Tensor& z = logits.value();
  const double count = std::max<double>(1.0, static_cast<double>(indices.size()));
  double loss = 0.0;
  for (size_t k = 0; k < indices.size(); ++k) {
    const double v = z[static_cast<size_t>(indices[k])];
    // log(1 + exp(-|v|)) + max(v, 0) - v * t, stable for large |v|.
    loss += std::max(v, 0.0) - v * targets[k] + std::log1p(std::exp(-std::abs(v)));
  }
  std::vector<int> idx(indices.begin(), indices.end());
  std::vector<double> tgt(targets.begin(), targets.end());
  return make_result(Tensor({1}, loss / count), {logits},
                     [idx = std::move(idx), tgt = std::move(tgt), count](Node& n) {
                       Node& in = parent(n, 0);
                       Tensor& g = in.grad_buffer();
                       for (size_t k = 0; k < idx.size(); ++k) {
                         const double v = in.value[static_cast<size_t>(idx[k])];
                         const double p = 1.0 / (1.0 + std::exp(-v));
                         g[static_cast<size_t>(idx[k])] += (p - tgt[k]) * n.grad[0] / count;
                       }
                     });
}

Var smooth_l1(const Var& pred, std::span<const int> indices,
              std::span<const double> targets, double normalizer) {
  require(indices.size() == targets.size(), "smooth_l1 arity");
  require(normalizer > 0.0, "smooth_l1 normalizer");
  const Tensor& p = pred.value();
  double loss = 0.0;
  for (size_t k = 0; k < indices.size(); ++k) {
    const double d = p[static_cast<size_t>(indices[k])] - targets[k];
    const double a = std::abs(d);
    loss += a < 1.0 ? 0.5 * d * d : a - 0.5;
  }
  std::vector<int> idx(indices.begin(), indices.end());
  std::vector<double> tgt(targets.begin(), targets.end());
  return make_result(Tensor({1}, loss / normalizer), {pred},
                     [idx = std::move(idx), tgt = std::move(tgt), normalizer](Node& n) {
                       Node& in = parent(n, 0);
                       Tensor& g = in.grad_buffer();
                       for (size_t k = 0; k < idx.size(); ++k) {
                         const double d = in.value[static_cast<size_t>(idx[k])] - tgt[k];
                         const double dd = std::clamp(d, -1.0, 1.0);
                         g[static_cast<size_t>(idx[k])] += dd * n.grad[0] / normalizer;
                       }
                     });
}

Var softmax_cross_entropy(const Var& logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  require(z.rank() == 2 && z.dim(0) == static_cast<int>(labels.size()),
          "softmax_cross_entropy: one label per row");
  const int rows = z.dim(0), k = z.dim(1);
  Tensor probs({rows, k});
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* zr = z.data() + static_cast<size_t>(r) * k;
    const double m = *std::max_element(zr, zr + k);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) denom += std::exp(zr[j] - m);
    for (int j = 0; j < k; ++j) probs[static_cast<size_t>(r) * k + j] = std::exp(zr[j] - m) / denom;
    require(labels[static_cast<size_t>(r)] >= 0 && labels[static_cast<size_t>(r)] < k,
            "softmax_cross_entropy label out of range");
    loss += -(zr[labels[static_cast<size_t>(r)]] - m - std::log(denom));
  }
  const double count = std::max(1, rows);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result(Tensor({1}, loss / count), {logits},
                     [probs = std::move(probs), lab = std::move(lab), rows, k, count](Node& n) {
                       Tensor& g = parent(n, 0).grad_buffer();
                       for (int r = 0; r < rows; ++r) {
                         for (int j = 0; j < k; ++j) {
                           const double target = (j == lab[static_cast<size_t>(r)]) ? 1.0 : 0.0;
                           g[static_cast<size_t>(r) * k + j] +=
                               (probs[static_cast<size_t>(r) * k + j] - target) * n.grad[0] / count;
                         }
                       }
                     });
}

}  // namespace advgen::nn
