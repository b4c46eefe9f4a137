#pragma once

// Scalar-templated network internals. The public training path instantiates
// float; tests instantiate double to compare analytic gradients against
// central finite differences.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "usbt/common.hpp"
#include "usbt/model.hpp"
#include "usbt/rng.hpp"

namespace usbt {

template <typename S>
struct ParamTensor {
  std::string name;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> w;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> grad;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> adam_m;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> adam_v;
  bool l2 = false;  // convolution kernel, included in the L2 penalty
};

// Per-item inverted-dropout masks (0 or 1/(1-p)) for one batch.
template <typename S>
struct DropoutMasks {
  std::vector<std::vector<S>> pre_flatten;
  std::vector<std::vector<S>> penultimate;
};

template <typename S>
class Network {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

 public:
  explicit Network(const ModelConfig& cfg) : cfg_(cfg) {
    if (cfg.n_classes < 2) throw ConfigError("need at least two classes");
    int h = cfg.input_frames, w = cfg.input_coeffs, c = 1;
    if (cfg.architecture == Architecture::SmallConv) {
      for (size_t b = 0; b < cfg.conv_blocks.size(); ++b) {
        const auto& blk = cfg.conv_blocks[b];
        BlockDims d;
        d.c_in = c;
        d.h_in = h;
        d.w_in = w;
        d.k = blk.kernel;
        d.filters = blk.filters;
        d.h_conv = h - blk.kernel + 1;
        d.w_conv = w - blk.kernel + 1;
        if (d.h_conv <= 0 || d.w_conv <= 0) {
          throw ConfigError("conv output collapses to zero");
        }
        d.pool = blk.pool;
        d.h_out = d.h_conv / blk.pool;
        d.w_out = d.w_conv / blk.pool;
        if (d.h_out <= 0 || d.w_out <= 0) {
          throw ConfigError("pool output collapses to zero");
        }
        blocks_.push_back(d);
        add_param("conv" + std::to_string(b) + "_w", blk.filters,
                  c * blk.kernel * blk.kernel, true);
        add_param("conv" + std::to_string(b) + "_b", blk.filters, 1, false);
        c = blk.filters;
        h = d.h_out;
        w = d.w_out;
      }
      flat_dim_ = c * h * w;
      add_param("dense1_w", cfg.hidden_units, flat_dim_, false);
      add_param("dense1_b", cfg.hidden_units, 1, false);
      add_param("dense2_w", cfg.n_classes, cfg.hidden_units, false);
      add_param("dense2_b", cfg.n_classes, 1, false);
    } else {
      flat_dim_ = cfg.input_frames * cfg.input_coeffs;
      add_param("dense_w", cfg.n_classes, flat_dim_, false);
      add_param("dense_b", cfg.n_classes, 1, false);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  std::vector<ParamTensor<S>>& params() { return params_; }
  int flat_dim() const { return flat_dim_; }

  size_t n_params() const {
    size_t n = 0;
    for (const auto& p : params_) n += static_cast<size_t>(p.w.size());
    return n;
  }

  // Fan-in-scaled uniform init, biases zero. Draw order is fixed:
  // tensor by tensor, row-major within each tensor.
  void init_weights(SplitMix64& rng) {
    for (auto& p : params_) {
      if (p.name.ends_with("_b")) {
        p.w.setZero();
        continue;
      }
      const double limit = 1.0 / std::sqrt(static_cast<double>(p.w.cols()));
      for (Eigen::Index r = 0; r < p.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.w.cols(); ++c) {
          p.w(r, c) = static_cast<S>(rng.uniform(-limit, limit));
        }
      }
    }
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  DropoutMasks<S> make_masks(size_t batch, SplitMix64& rng) const {
    DropoutMasks<S> m;
    if (cfg_.architecture != Architecture::SmallConv) return m;
    m.pre_flatten.resize(batch);
    m.penultimate.resize(batch);
    for (size_t i = 0; i < batch; ++i) {
      m.pre_flatten[i] = draw_mask(flat_dim_, cfg_.dropout_pre_flatten, rng);
      m.penultimate[i] =
          draw_mask(cfg_.hidden_units, cfg_.dropout_penultimate, rng);
    }
    return m;
  }

  // Mean cross-entropy over the batch plus the L2 penalty. When grads is
  // true, accumulates parameter gradients (mean CE + penalty gradient).
  // masks == nullptr disables dropout. When probs_out is given it receives
  // per-item class probabilities as columns. Items are processed as one
  // concatenated GEMM per layer.
  S loss(const std::vector<const float*>& xs, const std::vector<int>& ys,
         const DropoutMasks<S>* masks, bool grads, bool include_l2 = true,
         Mat* probs_out = nullptr) {
    if (grads) zero_grads();
    const size_t batch = xs.size();
    const bool dropout = masks && !masks->pre_flatten.empty();
    const S ce_sum =
        cfg_.architecture == Architecture::LinearSoftmax
            ? linear_batch_pass(xs, ys, grads, probs_out)
            : conv_batch_pass(xs, ys, dropout ? masks : nullptr, grads,
                              probs_out);
    S total = ce_sum / static_cast<S>(batch);
    if (grads) {
      for (auto& p : params_) p.grad /= static_cast<S>(batch);
    }
    if (include_l2 && cfg_.l2_lambda > 0.0) {
      const S lambda = static_cast<S>(cfg_.l2_lambda);
      for (auto& p : params_) {
        if (!p.l2) continue;
        total += lambda * p.w.squaredNorm();
        if (grads) p.grad += S(2) * lambda * p.w;
      }
    }
    return total;
  }

  // Probabilities for one item, dropout off.
  std::vector<double> predict_proba(const float* x) const {
    Vec logits = forward_logits(x);
    Vec probs = softmax(logits);
    std::vector<double> out(probs.size());
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      out[i] = static_cast<double>(probs[i]);
    }
    return out;
  }

  std::vector<Tensor> export_tensors() const {
    std::vector<Tensor> out;
    for (const auto& p : params_) {
      Tensor t;
      t.name = p.name;
      t.shape = {static_cast<int>(p.w.rows()), static_cast<int>(p.w.cols())};
      t.data.resize(static_cast<size_t>(p.w.size()));
      size_t idx = 0;
      for (Eigen::Index r = 0; r < p.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.w.cols(); ++c) {
          t.data[idx++] = static_cast<float>(p.w(r, c));
        }
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  void import_tensors(const std::vector<Tensor>& tensors) {
    if (tensors.size() != params_.size()) {
      throw ShapeError("tensor count mismatch");
    }
    for (size_t i = 0; i < tensors.size(); ++i) {
      auto& p = params_[i];
      const auto& t = tensors[i];
      if (t.name != p.name || t.shape.size() != 2 ||
          t.shape[0] != p.w.rows() || t.shape[1] != p.w.cols()) {
        throw ShapeError("tensor shape mismatch for " + p.name);
      }
      size_t idx = 0;
      for (Eigen::Index r = 0; r < p.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.w.cols(); ++c) {
          p.w(r, c) = static_cast<S>(t.data[idx++]);
        }
      }
    }
  }

 private:
  struct BlockDims {
    int c_in, h_in, w_in, k, filters, pool;
    int h_conv, w_conv, h_out, w_out;
  };

  void add_param(const std::string& name, int rows, int cols, bool l2) {
    ParamTensor<S> p;
    p.name = name;
    p.w = Mat::Zero(rows, cols);
    p.grad = Mat::Zero(rows, cols);
    p.adam_m = Mat::Zero(rows, cols);
    p.adam_v = Mat::Zero(rows, cols);
    p.l2 = l2;
    params_.push_back(std::move(p));
  }

  static std::vector<S> draw_mask(int dim, double rate, SplitMix64& rng) {
    std::vector<S> m(dim);
    const S keep = static_cast<S>(1.0 / (1.0 - rate));
    for (int i = 0; i < dim; ++i) {
      m[i] = rng.uniform() < rate ? S(0) : keep;
    }
    return m;
  }

  static Vec softmax(const Vec& logits) {
    const S mx = logits.maxCoeff();
    Vec e = (logits.array() - mx).exp();
    return e / e.sum();
  }

  // channels-as-rows activation layout: act(c, y*w + x).
  static void im2col(const Mat& act, const BlockDims& d, Mat& col) {
    col.resize(d.c_in * d.k * d.k, d.h_conv * d.w_conv);
    for (int c = 0; c < d.c_in; ++c) {
      for (int dy = 0; dy < d.k; ++dy) {
        for (int dx = 0; dx < d.k; ++dx) {
          const int row = (c * d.k + dy) * d.k + dx;
          for (int y = 0; y < d.h_conv; ++y) {
            for (int x = 0; x < d.w_conv; ++x) {
              col(row, y * d.w_conv + x) = act(c, (y + dy) * d.w_in + x + dx);
            }
          }
        }
      }
    }
  }

  static void col2im_add(const Mat& dcol, const BlockDims& d, Mat& dact) {
    dact = Mat::Zero(d.c_in, d.h_in * d.w_in);
    for (int c = 0; c < d.c_in; ++c) {
      for (int dy = 0; dy < d.k; ++dy) {
        for (int dx = 0; dx < d.k; ++dx) {
          const int row = (c * d.k + dy) * d.k + dx;
          for (int y = 0; y < d.h_conv; ++y) {
            for (int x = 0; x < d.w_conv; ++x) {
              dact(c, (y + dy) * d.w_in + x + dx) +=
                  dcol(row, y * d.w_conv + x);
            }
          }
        }
      }
    }
  }

  Vec forward_logits(const float* x) const {
    if (cfg_.architecture == Architecture::LinearSoftmax) {
      Vec in(flat_dim_);
      for (int i = 0; i < flat_dim_; ++i) in[i] = static_cast<S>(x[i]);
      return params_[0].w * in + params_[1].w.col(0);
    }
    Mat act(1, cfg_.input_frames * cfg_.input_coeffs);
    for (int i = 0; i < cfg_.input_frames * cfg_.input_coeffs; ++i) {
      act(0, i) = static_cast<S>(x[i]);
    }
    Mat col, z, pooled;
    std::vector<int> argmax;
    for (size_t b = 0; b < blocks_.size(); ++b) {
      conv_forward(act, blocks_[b], params_[2 * b].w, params_[2 * b + 1].w,
                   col, z);
      z = z.cwiseMax(S(0));
      pool_forward(z, blocks_[b], pooled, argmax);
      act = pooled;
    }
    Vec f(flat_dim_);
    flatten(act, f);
    const auto& w1 = params_[2 * blocks_.size()].w;
    const auto& b1 = params_[2 * blocks_.size() + 1].w;
    const auto& w2 = params_[2 * blocks_.size() + 2].w;
    const auto& b2 = params_[2 * blocks_.size() + 3].w;
    Vec a1 = (w1 * f + b1.col(0)).cwiseMax(S(0));
    return w2 * a1 + b2.col(0);
  }

  static void flatten(const Mat& act, Vec& f) {
    int idx = 0;
    for (Eigen::Index c = 0; c < act.rows(); ++c) {
      for (Eigen::Index i = 0; i < act.cols(); ++i) f[idx++] = act(c, i);
    }
  }

  static void unflatten_add(const Vec& f, Mat& dact, Eigen::Index rows,
                            Eigen::Index cols) {
    dact.resize(rows, cols);
    int idx = 0;
    for (Eigen::Index c = 0; c < rows; ++c) {
      for (Eigen::Index i = 0; i < cols; ++i) dact(c, i) = f[idx++];
    }
  }

  void conv_forward(const Mat& act, const BlockDims& d, const Mat& w,
                    const Mat& bias, Mat& col, Mat& z) const {
    im2col(act, d, col);
    z.noalias() = w * col;
    z.colwise() += bias.col(0);
  }

  static void pool_forward(const Mat& z, const BlockDims& d, Mat& pooled,
                           std::vector<int>& argmax) {
    pooled.resize(d.filters, d.h_out * d.w_out);
    argmax.assign(static_cast<size_t>(d.filters) * d.h_out * d.w_out, 0);
    for (int c = 0; c < d.filters; ++c) {
      for (int yo = 0; yo < d.h_out; ++yo) {
        for (int xo = 0; xo < d.w_out; ++xo) {
          S best = std::numeric_limits<S>::lowest();
          int best_idx = 0;
          for (int dy = 0; dy < d.pool; ++dy) {
            for (int dx = 0; dx < d.pool; ++dx) {
              const int idx = (yo * d.pool + dy) * d.w_conv + xo * d.pool + dx;
              if (z(c, idx) > best) {
                best = z(c, idx);
                best_idx = idx;
              }
            }
          }
          pooled(c, yo * d.w_out + xo) = best;
          argmax[(static_cast<size_t>(c) * d.h_out + yo) * d.w_out + xo] =
              best_idx;
        }
      }
    }
  }

  // ---- batched passes: item i occupies a column range (spatial maps) or
  // a single column (dense stages) of each intermediate matrix.

  // Batched im2col: item i's patches land in columns
  // [i*h_conv*w_conv, (i+1)*h_conv*w_conv).
  static void im2col_batch(const Mat& act, const BlockDims& d, int n,
                           Mat& col) {
    const int hw_in = d.h_in * d.w_in;
    const int hw_conv = d.h_conv * d.w_conv;
    col.resize(d.c_in * d.k * d.k, static_cast<Eigen::Index>(n) * hw_conv);
    for (int c = 0; c < d.c_in; ++c) {
      for (int dy = 0; dy < d.k; ++dy) {
        for (int dx = 0; dx < d.k; ++dx) {
          const int row = (c * d.k + dy) * d.k + dx;
          for (int i = 0; i < n; ++i) {
            for (int y = 0; y < d.h_conv; ++y) {
              for (int x = 0; x < d.w_conv; ++x) {
                col(row, i * hw_conv + y * d.w_conv + x) =
                    act(c, i * hw_in + (y + dy) * d.w_in + x + dx);
              }
            }
          }
        }
      }
    }
  }

  static void col2im_add_batch(const Mat& dcol, const BlockDims& d, int n,
                               Mat& dact) {
    const int hw_in = d.h_in * d.w_in;
    const int hw_conv = d.h_conv * d.w_conv;
    dact = Mat::Zero(d.c_in, static_cast<Eigen::Index>(n) * hw_in);
    for (int c = 0; c < d.c_in; ++c) {
      for (int dy = 0; dy < d.k; ++dy) {
        for (int dx = 0; dx < d.k; ++dx) {
          const int row = (c * d.k + dy) * d.k + dx;
          for (int i = 0; i < n; ++i) {
            for (int y = 0; y < d.h_conv; ++y) {
              for (int x = 0; x < d.w_conv; ++x) {
                dact(c, i * hw_in + (y + dy) * d.w_in + x + dx) +=
                    dcol(row, i * hw_conv + y * d.w_conv + x);
              }
            }
          }
        }
      }
    }
  }

  // argmax stores absolute column indices into the batched z matrix.
  static void pool_forward_batch(const Mat& z, const BlockDims& d, int n,
                                 Mat& pooled, std::vector<int>& argmax) {
    const int hw_conv = d.h_conv * d.w_conv;
    const int hw_out = d.h_out * d.w_out;
    pooled.resize(d.filters, static_cast<Eigen::Index>(n) * hw_out);
    argmax.assign(static_cast<size_t>(d.filters) * n * hw_out, 0);
    for (int c = 0; c < d.filters; ++c) {
      for (int i = 0; i < n; ++i) {
        for (int yo = 0; yo < d.h_out; ++yo) {
          for (int xo = 0; xo < d.w_out; ++xo) {
            S best = std::numeric_limits<S>::lowest();
            int best_idx = 0;
            for (int dy = 0; dy < d.pool; ++dy) {
              for (int dx = 0; dx < d.pool; ++dx) {
                const int idx = i * hw_conv +
                                (yo * d.pool + dy) * d.w_conv + xo * d.pool +
                                dx;
                if (z(c, idx) > best) {
                  best = z(c, idx);
                  best_idx = idx;
                }
              }
            }
            pooled(c, i * hw_out + yo * d.w_out + xo) = best;
            argmax[(static_cast<size_t>(c) * n + i) * hw_out + yo * d.w_out +
                   xo] = best_idx;
          }
        }
      }
    }
  }

  S linear_batch_pass(const std::vector<const float*>& xs,
                      const std::vector<int>& ys, bool grads,
                      Mat* probs_out) {
    const int n = static_cast<int>(xs.size());
    Mat X(flat_dim_, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < flat_dim_; ++j) {
        X(j, i) = static_cast<S>(xs[static_cast<size_t>(i)][j]);
      }
    }
    Mat logits = params_[0].w * X;
    logits.colwise() += params_[1].w.col(0);
    Mat probs = softmax_cols(logits);
    const S ce_sum = ce_from_probs(probs, ys);
    if (probs_out) *probs_out = probs;
    if (grads) {
      Mat dl = probs;
      for (int i = 0; i < n; ++i) dl(ys[static_cast<size_t>(i)], i) -= S(1);
      params_[0].grad.noalias() += dl * X.transpose();
      params_[1].grad.col(0) += dl.rowwise().sum();
    }
    return ce_sum;
  }

  S conv_batch_pass(const std::vector<const float*>& xs,
                    const std::vector<int>& ys, const DropoutMasks<S>* masks,
                    bool grads, Mat* probs_out) {
    const int n = static_cast<int>(xs.size());
    const size_t nb = blocks_.size();
    std::vector<Mat> acts(nb + 1);      // block inputs, batched columns
    std::vector<Mat> cols(nb), zs(nb);  // im2col inputs, pre-relu outputs
    std::vector<std::vector<int>> argmaxes(nb);

    const int in_hw = cfg_.input_frames * cfg_.input_coeffs;
    acts[0].resize(1, static_cast<Eigen::Index>(n) * in_hw);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < in_hw; ++j) {
        acts[0](0, i * in_hw + j) = static_cast<S>(xs[static_cast<size_t>(i)][j]);
      }
    }
    for (size_t b = 0; b < nb; ++b) {
      im2col_batch(acts[b], blocks_[b], n, cols[b]);
      zs[b].noalias() = params_[2 * b].w * cols[b];
      zs[b].colwise() += params_[2 * b + 1].w.col(0);
      Mat relu = zs[b].cwiseMax(S(0));
      Mat pooled;
      pool_forward_batch(relu, blocks_[b], n, pooled, argmaxes[b]);
      acts[b + 1] = std::move(pooled);
    }

    // flatten each item's (channels x positions) block into a column
    const int last_hw = static_cast<int>(acts[nb].cols()) / n;
    Mat F(flat_dim_, n);
    for (int i = 0; i < n; ++i) {
      int idx = 0;
      for (Eigen::Index c = 0; c < acts[nb].rows(); ++c) {
        for (int p = 0; p < last_hw; ++p) {
          F(idx++, i) = acts[nb](c, i * last_hw + p);
        }
      }
    }
    Mat Fd = F;
    if (masks) {
      for (int i = 0; i < n; ++i) {
        const auto& m = masks->pre_flatten[static_cast<size_t>(i)];
        for (int j = 0; j < flat_dim_; ++j) Fd(j, i) *= m[static_cast<size_t>(j)];
      }
    }

    const auto& w1 = params_[2 * nb].w;
    const auto& b1 = params_[2 * nb + 1].w;
    const auto& w2 = params_[2 * nb + 2].w;
    const auto& b2 = params_[2 * nb + 3].w;

    Mat Z1 = w1 * Fd;
    Z1.colwise() += b1.col(0);
    Mat A1 = Z1.cwiseMax(S(0));
    Mat Ad = A1;
    if (masks) {
      for (int i = 0; i < n; ++i) {
        const auto& m = masks->penultimate[static_cast<size_t>(i)];
        for (int j = 0; j < cfg_.hidden_units; ++j) {
          Ad(j, i) *= m[static_cast<size_t>(j)];
        }
      }
    }
    Mat logits = w2 * Ad;
    logits.colwise() += b2.col(0);
    Mat probs = softmax_cols(logits);
    const S ce_sum = ce_from_probs(probs, ys);
    if (probs_out) *probs_out = probs;
    if (!grads) return ce_sum;

    // ---- backward ----
    Mat dlogits = probs;
    for (int i = 0; i < n; ++i) dlogits(ys[static_cast<size_t>(i)], i) -= S(1);
    params_[2 * nb + 2].grad.noalias() += dlogits * Ad.transpose();
    params_[2 * nb + 3].grad.col(0) += dlogits.rowwise().sum();

    Mat dA1 = w2.transpose() * dlogits;
    if (masks) {
      for (int i = 0; i < n; ++i) {
        const auto& m = masks->penultimate[static_cast<size_t>(i)];
        for (int j = 0; j < cfg_.hidden_units; ++j) {
          dA1(j, i) *= m[static_cast<size_t>(j)];
        }
      }
    }
    Mat dZ1 = (Z1.array() > S(0)).template cast<S>() * dA1.array();
    params_[2 * nb].grad.noalias() += dZ1 * Fd.transpose();
    params_[2 * nb + 1].grad.col(0) += dZ1.rowwise().sum();

    Mat dF = w1.transpose() * dZ1;
    if (masks) {
      for (int i = 0; i < n; ++i) {
        const auto& m = masks->pre_flatten[static_cast<size_t>(i)];
        for (int j = 0; j < flat_dim_; ++j) dF(j, i) *= m[static_cast<size_t>(j)];
      }
    }

    // unflatten to the batched activation layout
    Mat dact(acts[nb].rows(), acts[nb].cols());
    for (int i = 0; i < n; ++i) {
      int idx = 0;
      for (Eigen::Index c = 0; c < dact.rows(); ++c) {
        for (int p = 0; p < last_hw; ++p) {
          dact(c, i * last_hw + p) = dF(idx++, i);
        }
      }
    }

    for (size_t bi = nb; bi-- > 0;) {
      const BlockDims& d = blocks_[bi];
      const int hw_out = d.h_out * d.w_out;
      // pool backward: route each pooled gradient to its argmax location
      Mat dz = Mat::Zero(d.filters, static_cast<Eigen::Index>(n) * d.h_conv *
                                        d.w_conv);
      for (int c = 0; c < d.filters; ++c) {
        for (int i = 0; i < n; ++i) {
          for (int p = 0; p < hw_out; ++p) {
            const int src =
                argmaxes[bi][(static_cast<size_t>(c) * n + i) * hw_out + p];
            dz(c, src) += dact(c, i * hw_out + p);
          }
        }
      }
      // relu backward
      for (Eigen::Index c = 0; c < dz.rows(); ++c) {
        for (Eigen::Index i = 0; i < dz.cols(); ++i) {
          if (zs[bi](c, i) <= S(0)) dz(c, i) = S(0);
        }
      }
      params_[2 * bi].grad.noalias() += dz * cols[bi].transpose();
      params_[2 * bi + 1].grad.col(0) += dz.rowwise().sum();
      if (bi > 0) {
        Mat dcol = params_[2 * bi].w.transpose() * dz;
        col2im_add_batch(dcol, d, n, dact);
      }
    }
    return ce_sum;
  }

  static Mat softmax_cols(const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
      const S mx = logits.col(i).maxCoeff();
      Vec e = (logits.col(i).array() - mx).exp();
      out.col(i) = e / e.sum();
    }
    return out;
  }

  S ce_from_probs(const Mat& probs, const std::vector<int>& ys) const {
    S ce = S(0);
    for (size_t i = 0; i < ys.size(); ++i) {
      if (ys[i] < 0 || ys[i] >= cfg_.n_classes) {
        throw ShapeError("label out of range");
      }
      ce -= std::log(std::max(probs(ys[i], static_cast<Eigen::Index>(i)),
                              std::numeric_limits<S>::min()));
    }
    return ce;
  }

  ModelConfig cfg_;
  std::vector<BlockDims> blocks_;
  std::vector<ParamTensor<S>> params_;
  int flat_dim_ = 0;
};

}  // namespace usbt
