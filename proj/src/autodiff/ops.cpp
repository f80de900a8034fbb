#include "sparselab/ops.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sparselab/error.hpp"

namespace sparselab {
namespace {

using Vec = Eigen::Map<Eigen::VectorXd>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXd>;

Vec vec(Tensor& t) { return Vec(t.raw(), static_cast<Eigen::Index>(t.size())); }
ConstVec vec(const Tensor& t) { return ConstVec(t.raw(), static_cast<Eigen::Index>(t.size())); }

Tensor masked(const Tensor& w, const Tensor& mask) {
  Tensor out(w.shape());
  vec(out) = vec(w).cwiseProduct(vec(mask));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// MaskedLinearOp

void MaskedLinearOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  const Tensor& w = tape.value(inputs[1]);
  if (x.rank() != 2) throw ShapeError(fmt::format("masked_linear expects [B, n] input, got {}", shape_string(x.shape())));
  if (w.rank() != 2 || w.dim(1) != x.dim(1)) {
    throw ShapeError(fmt::format("masked_linear weight {} does not accept input {}", shape_string(w.shape()),
                                 shape_string(x.shape())));
  }
  if (mask_.size() != w.size()) throw ShapeError("masked_linear mask size differs from weight size");
  const std::size_t batch = x.dim(0), n_in = x.dim(1), n_out = w.dim(0);

  w_eff_ = masked(w, mask_);
  const auto we = w_eff_.matrix(n_out, n_in);
  const auto xm = x.matrix(batch, n_in);
  Tensor z({batch, n_out});
  auto zm = z.matrix(batch, n_out);
  zm.noalias() = xm * we.transpose();
  const Tensor* b = nullptr;
  if (has_bias_) {
    b = &tape.value(inputs[2]);
    if (b->size() != n_out) throw ShapeError("masked_linear bias size differs from output width");
    zm.rowwise() += ConstRowVec(b->raw(), static_cast<Eigen::Index>(n_out));
  }
  tape.mutable_value(output) = std::move(z);

  if (!tape.with_tangents()) return;
  const Tensor* xt = tape.tangent(inputs[0]);
  const Tensor* wt = tape.tangent(inputs[1]);
  const Tensor* bt = has_bias_ ? tape.tangent(inputs[2]) : nullptr;
  if (!xt && !wt && !bt) return;
  auto zt = tape.tangent_out(output).matrix(batch, n_out);
  if (xt) zt.noalias() += xt->matrix(batch, n_in) * we.transpose();
  if (wt) {
    w_eff_tangent_ = masked(*wt, mask_);
    zt.noalias() += xm * w_eff_tangent_.matrix(n_out, n_in).transpose();
  }
  if (bt) zt.rowwise() += ConstRowVec(bt->raw(), static_cast<Eigen::Index>(n_out));
}

void MaskedLinearOp::backward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  const std::size_t batch = x.dim(0), n_in = x.dim(1), n_out = w_eff_.dim(0);
  const bool tangents = tape.with_tangents();
  const auto g = tape.adjoint(output)->matrix(batch, n_out);
  const Tensor* gt = tangents ? tape.adjoint_tangent(output) : nullptr;
  const Tensor* xt = tangents ? tape.tangent(inputs[0]) : nullptr;
  const bool has_wt = tangents && !w_eff_tangent_.empty();
  const auto we = w_eff_.matrix(n_out, n_in);

  if (tape.requires_grad(inputs[0])) {
    tape.adjoint_acc(inputs[0]).matrix(batch, n_in).noalias() += g * we;
    if (tangents) {
      auto r = tape.adjoint_tangent_acc(inputs[0]).matrix(batch, n_in);
      if (gt) r.noalias() += gt->matrix(batch, n_out) * we;
      if (has_wt) r.noalias() += g * w_eff_tangent_.matrix(n_out, n_in);
    }
  }
  if (tape.requires_grad(inputs[1])) {
    tape.adjoint_acc(inputs[1]).matrix(n_out, n_in).noalias() += g.transpose() * x.matrix(batch, n_in);
    if (tangents) {
      auto r = tape.adjoint_tangent_acc(inputs[1]).matrix(n_out, n_in);
      if (gt) r.noalias() += gt->matrix(batch, n_out).transpose() * x.matrix(batch, n_in);
      if (xt) r.noalias() += g.transpose() * xt->matrix(batch, n_in);
    }
  }
  if (has_bias_ && tape.requires_grad(inputs[2])) {
    vec(tape.adjoint_acc(inputs[2])) += g.colwise().sum().transpose();
    if (tangents && gt) vec(tape.adjoint_tangent_acc(inputs[2])) += gt->matrix(batch, n_out).colwise().sum().transpose();
  }
}

// ---------------------------------------------------------------------------
// MaskedConv2dOp

MatrixRM MaskedConv2dOp::im2col(const Tensor& x) const {
  const auto& G = g_;
  MatrixRM cols = MatrixRM::Zero(static_cast<Eigen::Index>(G.rows()), static_cast<Eigen::Index>(G.cols()));
  const double* src = x.raw();
  const auto k = static_cast<std::ptrdiff_t>(G.kernel);
  const auto pad = static_cast<std::ptrdiff_t>(G.pad);
  const auto h = static_cast<std::ptrdiff_t>(G.height), w = static_cast<std::ptrdiff_t>(G.width);
  for (std::size_t b = 0; b < G.batch; ++b) {
    for (std::size_t oh = 0; oh < G.out_height; ++oh) {
      for (std::size_t ow = 0; ow < G.out_width; ++ow) {
        double* row = cols.data() + ((b * G.out_height + oh) * G.out_width + ow) * G.cols();
        for (std::size_t c = 0; c < G.channels; ++c) {
          const double* plane = src + (b * G.channels + c) * G.height * G.width;
          for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) + kh - pad;
            if (ih < 0 || ih >= h) continue;
            for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) + kw - pad;
              if (iw < 0 || iw >= w) continue;
              row[(c * G.kernel + static_cast<std::size_t>(kh)) * G.kernel + static_cast<std::size_t>(kw)] =
                  plane[ih * w + iw];
            }
          }
        }
      }
    }
  }
  return cols;
}

void MaskedConv2dOp::col2im(const MatrixRM& cols, Tensor& dx) const {
  const auto& G = g_;
  double* dst = dx.raw();
  const auto k = static_cast<std::ptrdiff_t>(G.kernel);
  const auto pad = static_cast<std::ptrdiff_t>(G.pad);
  const auto h = static_cast<std::ptrdiff_t>(G.height), w = static_cast<std::ptrdiff_t>(G.width);
  for (std::size_t b = 0; b < G.batch; ++b) {
    for (std::size_t oh = 0; oh < G.out_height; ++oh) {
      for (std::size_t ow = 0; ow < G.out_width; ++ow) {
        const double* row = cols.data() + ((b * G.out_height + oh) * G.out_width + ow) * G.cols();
        for (std::size_t c = 0; c < G.channels; ++c) {
          double* plane = dst + (b * G.channels + c) * G.height * G.width;
          for (std::ptrdiff_t kh = 0; kh < k; ++kh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) + kh - pad;
            if (ih < 0 || ih >= h) continue;
            for (std::ptrdiff_t kw = 0; kw < k; ++kw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow) + kw - pad;
              if (iw < 0 || iw >= w) continue;
              plane[ih * w + iw] +=
                  row[(c * G.kernel + static_cast<std::size_t>(kh)) * G.kernel + static_cast<std::size_t>(kw)];
            }
          }
        }
      }
    }
  }
}

MatrixRM MaskedConv2dOp::to_rows(const Tensor& nchw) const {
  const auto& G = g_;
  MatrixRM rows(static_cast<Eigen::Index>(G.rows()), static_cast<Eigen::Index>(G.out_channels));
  const std::size_t plane = G.out_height * G.out_width;
  for (std::size_t b = 0; b < G.batch; ++b)
    for (std::size_t o = 0; o < G.out_channels; ++o) {
      const double* src = nchw.raw() + (b * G.out_channels + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) rows(static_cast<Eigen::Index>(b * plane + p), static_cast<Eigen::Index>(o)) = src[p];
    }
  return rows;
}

Tensor MaskedConv2dOp::from_rows(const MatrixRM& rows) const {
  const auto& G = g_;
  Tensor out({G.batch, G.out_channels, G.out_height, G.out_width});
  const std::size_t plane = G.out_height * G.out_width;
  for (std::size_t b = 0; b < G.batch; ++b)
    for (std::size_t o = 0; o < G.out_channels; ++o) {
      double* dst = out.raw() + (b * G.out_channels + o) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = rows(static_cast<Eigen::Index>(b * plane + p), static_cast<Eigen::Index>(o));
    }
  return out;
}

void MaskedConv2dOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  const Tensor& w = tape.value(inputs[1]);
  if (x.rank() != 4) throw ShapeError(fmt::format("masked_conv2d expects [B, C, H, W] input, got {}", shape_string(x.shape())));
  if (w.rank() != 4 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3)) {
    throw ShapeError(fmt::format("masked_conv2d kernel {} does not accept input {}", shape_string(w.shape()),
                                 shape_string(x.shape())));
  }
  if (mask_.size() != w.size()) throw ShapeError("masked_conv2d mask size differs from kernel size");
  g_.batch = x.dim(0);
  g_.channels = x.dim(1);
  g_.height = x.dim(2);
  g_.width = x.dim(3);
  g_.out_channels = w.dim(0);
  g_.kernel = w.dim(2);
  if (padding_ == Padding::Same && g_.kernel % 2 == 0) throw ShapeError("same padding needs an odd kernel size");
  g_.pad = padding_ == Padding::Same ? (g_.kernel - 1) / 2 : 0;
  if (g_.height + 2 * g_.pad < g_.kernel || g_.width + 2 * g_.pad < g_.kernel) {
    throw ShapeError(fmt::format("masked_conv2d kernel {} larger than input {}", g_.kernel, shape_string(x.shape())));
  }
  g_.out_height = g_.height + 2 * g_.pad - g_.kernel + 1;
  g_.out_width = g_.width + 2 * g_.pad - g_.kernel + 1;

  w_eff_ = masked(w, mask_);
  const auto we = w_eff_.matrix(g_.out_channels, g_.cols());
  cols_ = im2col(x);
  MatrixRM z = cols_ * we.transpose();
  const Tensor* b = nullptr;
  if (has_bias_) {
    b = &tape.value(inputs[2]);
    if (b->size() != g_.out_channels) throw ShapeError("masked_conv2d bias size differs from output channels");
    z.rowwise() += ConstRowVec(b->raw(), static_cast<Eigen::Index>(g_.out_channels));
  }
  tape.mutable_value(output) = from_rows(z);

  if (!tape.with_tangents()) return;
  const Tensor* xt = tape.tangent(inputs[0]);
  const Tensor* wt = tape.tangent(inputs[1]);
  const Tensor* bt = has_bias_ ? tape.tangent(inputs[2]) : nullptr;
  if (!xt && !wt && !bt) return;
  MatrixRM zt = MatrixRM::Zero(static_cast<Eigen::Index>(g_.rows()), static_cast<Eigen::Index>(g_.out_channels));
  if (xt) {
    cols_tangent_ = im2col(*xt);
    zt.noalias() += cols_tangent_ * we.transpose();
  }
  if (wt) {
    w_eff_tangent_ = masked(*wt, mask_);
    zt.noalias() += cols_ * w_eff_tangent_.matrix(g_.out_channels, g_.cols()).transpose();
  }
  if (bt) zt.rowwise() += ConstRowVec(bt->raw(), static_cast<Eigen::Index>(g_.out_channels));
  tape.tangent_out(output) = from_rows(zt);
}

void MaskedConv2dOp::backward(Tape& tape) {
  const bool tangents = tape.with_tangents();
  const MatrixRM g = to_rows(*tape.adjoint(output));
  const Tensor* gt_t = tangents ? tape.adjoint_tangent(output) : nullptr;
  MatrixRM gt;
  if (gt_t) gt = to_rows(*gt_t);
  const bool has_xt = tangents && cols_tangent_.size() > 0;
  const bool has_wt = tangents && !w_eff_tangent_.empty();
  const auto we = w_eff_.matrix(g_.out_channels, g_.cols());

  if (tape.requires_grad(inputs[0])) {
    col2im(g * we, tape.adjoint_acc(inputs[0]));
    if (tangents) {
      MatrixRM r = MatrixRM::Zero(static_cast<Eigen::Index>(g_.rows()), static_cast<Eigen::Index>(g_.cols()));
      if (gt_t) r.noalias() += gt * we;
      if (has_wt) r.noalias() += g * w_eff_tangent_.matrix(g_.out_channels, g_.cols());
      col2im(r, tape.adjoint_tangent_acc(inputs[0]));
    }
  }
  if (tape.requires_grad(inputs[1])) {
    tape.adjoint_acc(inputs[1]).matrix(g_.out_channels, g_.cols()).noalias() += g.transpose() * cols_;
    if (tangents) {
      auto r = tape.adjoint_tangent_acc(inputs[1]).matrix(g_.out_channels, g_.cols());
      if (gt_t) r.noalias() += gt.transpose() * cols_;
      if (has_xt) r.noalias() += g.transpose() * cols_tangent_;
    }
  }
  if (has_bias_ && tape.requires_grad(inputs[2])) {
    vec(tape.adjoint_acc(inputs[2])) += g.colwise().sum().transpose();
    if (gt_t) vec(tape.adjoint_tangent_acc(inputs[2])) += gt.colwise().sum().transpose();
  }
}

// ---------------------------------------------------------------------------
// MaxPool2Op

void MaxPool2Op::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  if (x.rank() != 4) throw ShapeError(fmt::format("max_pool2 expects [B, C, H, W], got {}", shape_string(x.shape())));
  const std::size_t bc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0) throw ShapeError("max_pool2 input smaller than 2x2");
  Tensor y({x.dim(0), x.dim(1), oh, ow});
  argmax_.assign(y.size(), 0);
  for (std::size_t p = 0; p < bc; ++p) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = p * h * w + (2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = p * h * w + (2 * i + di) * w + (2 * j + dj);
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t o = (p * oh + i) * ow + j;
        argmax_[o] = best;
        y[o] = x[best];
      }
    }
  }
  tape.mutable_value(output) = std::move(y);
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) {
    Tensor& yt = tape.tangent_out(output);
    for (std::size_t o = 0; o < argmax_.size(); ++o) yt[o] = (*xt)[argmax_[o]];
  }
}

void MaxPool2Op::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const Tensor& g = *tape.adjoint(output);
  Tensor& dx = tape.adjoint_acc(inputs[0]);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dx[argmax_[o]] += g[o];
  if (!tape.with_tangents()) return;
  if (const Tensor* gt = tape.adjoint_tangent(output)) {
    Tensor& r = tape.adjoint_tangent_acc(inputs[0]);
    for (std::size_t o = 0; o < argmax_.size(); ++o) r[argmax_[o]] += (*gt)[o];
  }
}

// ---------------------------------------------------------------------------
// Elementwise activations

void ReluOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  tape.mutable_value(output) = std::move(y);
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) {
    Tensor& yt = tape.tangent_out(output);
    for (std::size_t i = 0; i < x.size(); ++i) yt[i] = x[i] > 0.0 ? (*xt)[i] : 0.0;
  }
}

void ReluOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const Tensor& x = tape.value(inputs[0]);
  const Tensor& g = *tape.adjoint(output);
  Tensor& dx = tape.adjoint_acc(inputs[0]);
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0) dx[i] += g[i];
  if (!tape.with_tangents()) return;
  if (const Tensor* gt = tape.adjoint_tangent(output)) {
    Tensor& r = tape.adjoint_tangent_acc(inputs[0]);
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0) r[i] += (*gt)[i];
  }
}

void TanhOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  tape.mutable_value(output) = std::move(y);
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) {
    const Tensor& yv = tape.value(output);
    Tensor& yt = tape.tangent_out(output);
    for (std::size_t i = 0; i < x.size(); ++i) yt[i] = (1.0 - yv[i] * yv[i]) * (*xt)[i];
  }
}

void TanhOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const Tensor& y = tape.value(output);
  const Tensor& g = *tape.adjoint(output);
  Tensor& dx = tape.adjoint_acc(inputs[0]);
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += (1.0 - y[i] * y[i]) * g[i];
  if (!tape.with_tangents()) return;
  const Tensor* gt = tape.adjoint_tangent(output);
  const Tensor* yt = tape.tangent(output);
  if (!gt && !yt) return;
  Tensor& r = tape.adjoint_tangent_acc(inputs[0]);
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = 0.0;
    if (gt) v += (1.0 - y[i] * y[i]) * (*gt)[i];
    if (yt) v -= 2.0 * y[i] * (*yt)[i] * g[i];
    r[i] += v;
  }
}

void FlattenOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  if (x.rank() < 1) throw ShapeError("flatten needs a batch dimension");
  const std::size_t batch = x.dim(0);
  const std::size_t rest = batch == 0 ? 0 : x.size() / batch;
  tape.mutable_value(output) = x.reshaped({batch, rest});
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) tape.tangent_out(output) = xt->reshaped({batch, rest});
}

void FlattenOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  vec(tape.adjoint_acc(inputs[0])) += vec(*tape.adjoint(output));
  if (!tape.with_tangents()) return;
  if (const Tensor* gt = tape.adjoint_tangent(output)) vec(tape.adjoint_tangent_acc(inputs[0])) += vec(*gt);
}

// ---------------------------------------------------------------------------
// Losses

void SoftmaxCrossEntropyOp::forward(Tape& tape) {
  const Tensor& z = tape.value(inputs[0]);
  if (z.rank() != 2) throw ShapeError(fmt::format("softmax_cross_entropy expects [B, C] logits, got {}", shape_string(z.shape())));
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  if (labels_.size() != batch) {
    throw ShapeError(fmt::format("softmax_cross_entropy got {} labels for a batch of {}", labels_.size(), batch));
  }
  if (batch == 0) throw ShapeError("softmax_cross_entropy on an empty batch");
  const auto zm = z.matrix(batch, classes);
  probs_.resize(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(classes));
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels_[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ShapeError(fmt::format("label {} outside [0, {})", y, classes));
    }
    const auto row = zm.row(static_cast<Eigen::Index>(b));
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    probs_.row(static_cast<Eigen::Index>(b)) = (row.array() - lse).exp();
    total += lse - row(y);
  }
  tape.mutable_value(output) = Tensor({1}, {total / static_cast<double>(batch)});

  has_probs_tangent_ = false;
  if (!tape.with_tangents()) return;
  const Tensor* zt = tape.tangent(inputs[0]);
  if (!zt) return;
  const auto ztm = zt->matrix(batch, classes);
  probs_tangent_.resize(probs_.rows(), probs_.cols());
  double lt = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto i = static_cast<Eigen::Index>(b);
    const double pz = probs_.row(i).dot(ztm.row(i));
    probs_tangent_.row(i) = probs_.row(i).cwiseProduct(ztm.row(i)) - pz * probs_.row(i);
    lt += pz - ztm(i, labels_[b]);
  }
  has_probs_tangent_ = true;
  tape.tangent_out(output)[0] = lt / static_cast<double>(batch);
}

void SoftmaxCrossEntropyOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const std::size_t batch = static_cast<std::size_t>(probs_.rows()), classes = static_cast<std::size_t>(probs_.cols());
  const double scale = 1.0 / static_cast<double>(batch);
  const double g = (*tape.adjoint(output))[0];
  MatrixRM residual = probs_;
  for (std::size_t b = 0; b < batch; ++b) residual(static_cast<Eigen::Index>(b), labels_[b]) -= 1.0;
  tape.adjoint_acc(inputs[0]).matrix(batch, classes) += (g * scale) * residual;
  if (!tape.with_tangents()) return;
  const Tensor* gt = tape.adjoint_tangent(output);
  if (!gt && !has_probs_tangent_) return;
  auto r = tape.adjoint_tangent_acc(inputs[0]).matrix(batch, classes);
  if (gt) r += ((*gt)[0] * scale) * residual;
  if (has_probs_tangent_) r += (g * scale) * probs_tangent_;
}

void ScaleOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  Tensor y(x.shape());
  vec(y) = factor_ * vec(x);
  tape.mutable_value(output) = std::move(y);
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) vec(tape.tangent_out(output)) = factor_ * vec(*xt);
}

void ScaleOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  vec(tape.adjoint_acc(inputs[0])) += factor_ * vec(*tape.adjoint(output));
  if (!tape.with_tangents()) return;
  if (const Tensor* gt = tape.adjoint_tangent(output)) vec(tape.adjoint_tangent_acc(inputs[0])) += factor_ * vec(*gt);
}

void SubtractConstantOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  if (x.size() != c_.size()) throw ShapeError("subtract_constant size mismatch");
  Tensor y(x.shape());
  vec(y) = vec(x) - vec(c_);
  tape.mutable_value(output) = std::move(y);
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) tape.tangent_out(output) = *xt;
}

void SubtractConstantOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  vec(tape.adjoint_acc(inputs[0])) += vec(*tape.adjoint(output));
  if (!tape.with_tangents()) return;
  if (const Tensor* gt = tape.adjoint_tangent(output)) vec(tape.adjoint_tangent_acc(inputs[0])) += vec(*gt);
}

void HalfSquaredNormOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  tape.mutable_value(output) = Tensor({1}, {0.5 * vec(x).squaredNorm()});
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) tape.tangent_out(output)[0] = vec(x).dot(vec(*xt));
}

void HalfSquaredNormOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const Tensor& x = tape.value(inputs[0]);
  const double g = (*tape.adjoint(output))[0];
  vec(tape.adjoint_acc(inputs[0])) += g * vec(x);
  if (!tape.with_tangents()) return;
  const Tensor* gt = tape.adjoint_tangent(output);
  const Tensor* xt = tape.tangent(inputs[0]);
  if (!gt && !xt) return;
  auto r = vec(tape.adjoint_tangent_acc(inputs[0]));
  if (gt) r += (*gt)[0] * vec(x);
  if (xt) r += g * vec(*xt);
}

QuadraticFormOp::QuadraticFormOp(MatrixRM a) {
  if (a.rows() != a.cols()) throw ShapeError("quadratic_form needs a square matrix");
  sym_ = 0.5 * (a + a.transpose());
}

void QuadraticFormOp::forward(Tape& tape) {
  const Tensor& x = tape.value(inputs[0]);
  if (static_cast<Eigen::Index>(x.size()) != sym_.rows()) throw ShapeError("quadratic_form dimension mismatch");
  const Eigen::VectorXd sx = sym_ * vec(x);
  tape.mutable_value(output) = Tensor({1}, {0.5 * vec(x).dot(sx)});
  if (!tape.with_tangents()) return;
  if (const Tensor* xt = tape.tangent(inputs[0])) tape.tangent_out(output)[0] = sx.dot(vec(*xt));
}

void QuadraticFormOp::backward(Tape& tape) {
  if (!tape.requires_grad(inputs[0])) return;
  const Tensor& x = tape.value(inputs[0]);
  const double g = (*tape.adjoint(output))[0];
  vec(tape.adjoint_acc(inputs[0])) += g * (sym_ * vec(x));
  if (!tape.with_tangents()) return;
  const Tensor* gt = tape.adjoint_tangent(output);
  const Tensor* xt = tape.tangent(inputs[0]);
  if (!gt && !xt) return;
  auto r = vec(tape.adjoint_tangent_acc(inputs[0]));
  if (gt) r += (*gt)[0] * (sym_ * vec(x));
  if (xt) r += g * (sym_ * vec(*xt));
}

}  // namespace sparselab
