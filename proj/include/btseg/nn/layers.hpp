// nn/layers.hpp
// Trainable 3D layers: convolution (via blocked im2col + GEMM), strided
// transposed convolution, 2x2x2 max pooling, per-channel PReLU, a
// normalization layer that always uses the statistics of the current
// input (batch size is 1 throughout), and inverted dropout.
//
// Every kernel is single-threaded with a fixed accumulation order, so
// results are bit-reproducible for a given seed.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "btseg/nn/core.hpp"
#include "btseg/rng.hpp"

namespace btseg::nn {

// f(x) = max(0,x) - alpha * max(0,-x)
template <typename T>
T prelu_scalar(T x, T alpha) {
    return std::max(T(0), x) - alpha * std::max(T(0), -x);
}

template <typename T>
class Conv3d {
  public:
    Conv3d(std::string name, int in_ch, int out_ch, int ksize)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch),
          ksize_(ksize) {
        if (ksize != 1 && ksize != 3)
            throw std::invalid_argument("Conv3d: kernel size must be 1 or 3");
        const int k3 = ksize * ksize * ksize;
        w_ = MatX<T>::Zero(out_ch, k3 * in_ch);
        b_ = VecX<T>::Zero(out_ch);
        gw_ = MatX<T>::Zero(out_ch, k3 * in_ch);
        gb_ = VecX<T>::Zero(out_ch);
    }

    void init(Rng& rng) {
        const double fan_in = static_cast<double>(w_.cols());
        normal_fill(rng, w_.data(), static_cast<size_t>(w_.size()), 0.0,
                    std::sqrt(2.0 / fan_in));
        b_.setZero();
    }

    FeatureMap<T> forward(const FeatureMap<T>& x, bool training) {
        if (x.channels() != in_ch_)
            throw std::runtime_error(name_ + ": channel mismatch");
        FeatureMap<T> y(x.sp, out_ch_);
        if (ksize_ == 1) {
            y.m.noalias() = w_ * x.m;
        } else {
            MatX<T> col;
            for_each_block(x.sp, [&](long r0, long nrows) {
                im2col(x, r0, nrows, col);
                const long c0 = r0 * x.sp[2];
                const long nc = nrows * x.sp[2];
                y.m.middleCols(c0, nc).noalias() = w_ * col.leftCols(nc);
            });
        }
        y.m.colwise() += b_;
        if (training) cached_x_ = x;
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        const FeatureMap<T>& x = cached_x_;
        FeatureMap<T> dx(x.sp, in_ch_);
        gb_ += dy.m.rowwise().sum();
        if (ksize_ == 1) {
            gw_.noalias() += dy.m * x.m.transpose();
            dx.m.noalias() = w_.transpose() * dy.m;
            return dx;
        }
        MatX<T> col, dcol;
        for_each_block(x.sp, [&](long r0, long nrows) {
            im2col(x, r0, nrows, col);
            const long c0 = r0 * x.sp[2];
            const long nc = nrows * x.sp[2];
            gw_.noalias() += dy.m.middleCols(c0, nc) *
                             col.leftCols(nc).transpose();
            dcol.resize(w_.cols(), nc);
            dcol.noalias() = w_.transpose() * dy.m.middleCols(c0, nc);
            col2im_add(dx, r0, nrows, dcol);
        });
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) {
        out.push_back({name_ + ".w", w_.data(), gw_.data(),
                       static_cast<size_t>(w_.size())});
        out.push_back({name_ + ".b", b_.data(), gb_.data(),
                       static_cast<size_t>(b_.size())});
    }

    void zero_grad() {
        gw_.setZero();
        gb_.setZero();
    }
    void release_cache() { cached_x_ = FeatureMap<T>(); }

  private:
    template <typename F>
    void for_each_block(const std::array<int, 3>& sp, F&& fn) const {
        const long total_rows = static_cast<long>(sp[0]) * sp[1];
        const long k = w_.cols();
        constexpr long kColBudgetBytes = 32l << 20;
        long rows_per_block = kColBudgetBytes /
                              (k * sp[2] * static_cast<long>(sizeof(T)));
        rows_per_block = std::max(1l, std::min(rows_per_block, total_rows));
        for (long r0 = 0; r0 < total_rows; r0 += rows_per_block)
            fn(r0, std::min(rows_per_block, total_rows - r0));
    }

    // col(o*in_ch + c, v) = x(c, v + offset_o) with zero padding.
    void im2col(const FeatureMap<T>& x, long r0, long nrows,
                MatX<T>& col) const {
        const int d1 = x.sp[1], d2 = x.sp[2], d0 = x.sp[0];
        col.resize(w_.cols(), nrows * d2);
        col.setZero();
        for (long r = r0; r < r0 + nrows; ++r) {
            const int i = static_cast<int>(r / d1);
            const int j = static_cast<int>(r % d1);
            const long dst_base = (r - r0) * d2;
            int o = 0;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk, ++o) {
                        const int si = i + di, sj = j + dj;
                        if (si < 0 || si >= d0 || sj < 0 || sj >= d1)
                            continue;
                        const int k0 = dk < 0 ? -dk : 0;
                        const int k1 = dk > 0 ? d2 - 1 - dk : d2 - 1;
                        if (k1 < k0) continue;
                        const long src =
                            (static_cast<long>(si) * d1 + sj) * d2 + k0 + dk;
                        col.block(o * in_ch_, dst_base + k0, in_ch_,
                                  k1 - k0 + 1) =
                            x.m.block(0, src, in_ch_, k1 - k0 + 1);
                    }
        }
    }

    void col2im_add(FeatureMap<T>& dx, long r0, long nrows,
                    const MatX<T>& dcol) const {
        const int d1 = dx.sp[1], d2 = dx.sp[2], d0 = dx.sp[0];
        for (long r = r0; r < r0 + nrows; ++r) {
            const int i = static_cast<int>(r / d1);
            const int j = static_cast<int>(r % d1);
            const long dst_base = (r - r0) * d2;
            int o = 0;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int dk = -1; dk <= 1; ++dk, ++o) {
                        const int si = i + di, sj = j + dj;
                        if (si < 0 || si >= d0 || sj < 0 || sj >= d1)
                            continue;
                        const int k0 = dk < 0 ? -dk : 0;
                        const int k1 = dk > 0 ? d2 - 1 - dk : d2 - 1;
                        if (k1 < k0) continue;
                        const long src =
                            (static_cast<long>(si) * d1 + sj) * d2 + k0 + dk;
                        dx.m.block(0, src, in_ch_, k1 - k0 + 1) +=
                            dcol.block(o * in_ch_, dst_base + k0, in_ch_,
                                       k1 - k0 + 1);
                    }
        }
    }

    std::string name_;
    int in_ch_, out_ch_, ksize_;
    MatX<T> w_, gw_;
    VecX<T> b_, gb_;
    FeatureMap<T> cached_x_;
};

// Stride-2 kernel-2 transposed convolution; exactly one kernel tap maps
// to each output voxel, so forward is 8 GEMMs plus a column scatter.
template <typename T>
class ConvTranspose3d {
  public:
    ConvTranspose3d(std::string name, int in_ch, int out_ch)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch) {
        w_ = MatX<T>::Zero(out_ch, 8 * in_ch);
        b_ = VecX<T>::Zero(out_ch);
        gw_ = MatX<T>::Zero(out_ch, 8 * in_ch);
        gb_ = VecX<T>::Zero(out_ch);
    }

    void init(Rng& rng) {
        normal_fill(rng, w_.data(), static_cast<size_t>(w_.size()), 0.0,
                    std::sqrt(2.0 / in_ch_));
        b_.setZero();
    }

    FeatureMap<T> forward(const FeatureMap<T>& x, bool training) {
        if (x.channels() != in_ch_)
            throw std::runtime_error(name_ + ": channel mismatch");
        FeatureMap<T> y({x.sp[0] * 2, x.sp[1] * 2, x.sp[2] * 2}, out_ch_);
        MatX<T> tmp(out_ch_, x.voxels());
        for (int o = 0; o < 8; ++o) {
            tmp.noalias() = w_.middleCols(o * in_ch_, in_ch_) * x.m;
            tmp.colwise() += b_;
            scatter(y, x.sp, o, tmp, /*gather=*/false);
        }
        if (training) cached_x_ = x;
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        const FeatureMap<T>& x = cached_x_;
        FeatureMap<T> dx(x.sp, in_ch_);
        gb_ += dy.m.rowwise().sum();
        MatX<T> dyo(out_ch_, x.voxels());
        for (int o = 0; o < 8; ++o) {
            scatter(const_cast<FeatureMap<T>&>(dy), x.sp, o, dyo,
                    /*gather=*/true);
            gw_.middleCols(o * in_ch_, in_ch_).noalias() +=
                dyo * x.m.transpose();
            dx.m.noalias() += w_.middleCols(o * in_ch_, in_ch_).transpose() *
                              dyo;
        }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) {
        out.push_back({name_ + ".w", w_.data(), gw_.data(),
                       static_cast<size_t>(w_.size())});
        out.push_back({name_ + ".b", b_.data(), gb_.data(),
                       static_cast<size_t>(b_.size())});
    }

    void zero_grad() {
        gw_.setZero();
        gb_.setZero();
    }
    void release_cache() { cached_x_ = FeatureMap<T>(); }

  private:
    // Moves columns between the dense per-offset matrix and the strided
    // positions (2i+a, 2j+b, 2k+c) of the doubled-resolution map.
    static void scatter(FeatureMap<T>& y, const std::array<int, 3>& in_sp,
                        int o, MatX<T>& tmp, bool gather) {
        const int a = o >> 2, b = (o >> 1) & 1, c = o & 1;
        const int d1 = in_sp[1], d2 = in_sp[2];
        const long od1 = 2l * d1, od2 = 2l * d2;
        long v = 0;
        for (int i = 0; i < in_sp[0]; ++i)
            for (int j = 0; j < d1; ++j) {
                const long out_row = (2l * i + a) * od1 + (2l * j + b);
                for (int k = 0; k < d2; ++k, ++v) {
                    const long oc = out_row * od2 + 2l * k + c;
                    if (gather)
                        tmp.col(v) = y.m.col(oc);
                    else
                        y.m.col(oc) = tmp.col(v);
                }
            }
    }

    std::string name_;
    int in_ch_, out_ch_;
    MatX<T> w_, gw_;
    VecX<T> b_, gb_;
    FeatureMap<T> cached_x_;
};

template <typename T>
class MaxPool3d {
  public:
    FeatureMap<T> forward(const FeatureMap<T>& x, bool training) {
        for (int a = 0; a < 3; ++a)
            if (x.sp[a] % 2 != 0)
                throw std::runtime_error(
                    "MaxPool3d: spatial dims must be even, got " +
                    shape_string(x.sp));
        const std::array<int, 3> osp{x.sp[0] / 2, x.sp[1] / 2, x.sp[2] / 2};
        FeatureMap<T> y(osp, x.channels());
        const int ch = x.channels();
        if (training)
            argmax_.assign(static_cast<size_t>(y.voxels()) * ch, 0);
        const int d1 = x.sp[1], d2 = x.sp[2];
        long vo = 0;
        for (int i = 0; i < osp[0]; ++i)
            for (int j = 0; j < osp[1]; ++j)
                for (int k = 0; k < osp[2]; ++k, ++vo) {
                    long first = -1;
                    for (int a = 0; a < 2; ++a)
                        for (int b = 0; b < 2; ++b)
                            for (int c = 0; c < 2; ++c) {
                                const long vi =
                                    ((2l * i + a) * d1 + (2l * j + b)) * d2 +
                                    (2l * k + c);
                                if (first < 0) {
                                    y.m.col(vo) = x.m.col(vi);
                                    if (training)
                                        for (int ci = 0; ci < ch; ++ci)
                                            argmax_[vo * ch + ci] = vi;
                                    first = vi;
                                    continue;
                                }
                                for (int ci = 0; ci < ch; ++ci) {
                                    const T v = x.m(ci, vi);
                                    if (v > y.m(ci, vo)) {
                                        y.m(ci, vo) = v;
                                        if (training)
                                            argmax_[vo * ch + ci] = vi;
                                    }
                                }
                            }
                }
        in_sp_ = x.sp;
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        FeatureMap<T> dx(in_sp_, dy.channels());
        const int ch = dy.channels();
        for (long vo = 0; vo < dy.voxels(); ++vo)
            for (int ci = 0; ci < ch; ++ci)
                dx.m(ci, argmax_[vo * ch + ci]) += dy.m(ci, vo);
        return dx;
    }

    void release_cache() { argmax_.clear(); }

  private:
    std::vector<long> argmax_;
    std::array<int, 3> in_sp_{};
};

template <typename T>
class PReLU {
  public:
    PReLU(std::string name, int channels, T alpha_init = T(0.25))
        : name_(std::move(name)),
          alpha_(VecX<T>::Constant(channels, alpha_init)),
          galpha_(VecX<T>::Zero(channels)) {}

    FeatureMap<T> forward(const FeatureMap<T>& x, bool training) {
        FeatureMap<T> y(x.sp, x.channels());
        const int ch = x.channels();
        for (long v = 0; v < x.voxels(); ++v)
            for (int c = 0; c < ch; ++c) {
                const T xv = x.m(c, v);
                y.m(c, v) = xv > 0 ? xv : alpha_[c] * xv;
            }
        if (training) cached_x_ = x;
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        const FeatureMap<T>& x = cached_x_;
        FeatureMap<T> dx(x.sp, x.channels());
        const int ch = x.channels();
        for (long v = 0; v < x.voxels(); ++v)
            for (int c = 0; c < ch; ++c) {
                const T xv = x.m(c, v);
                if (xv > 0) {
                    dx.m(c, v) = dy.m(c, v);
                } else {
                    dx.m(c, v) = dy.m(c, v) * alpha_[c];
                    galpha_[c] += dy.m(c, v) * xv;
                }
            }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) {
        out.push_back({name_ + ".alpha", alpha_.data(), galpha_.data(),
                       static_cast<size_t>(alpha_.size())});
    }

    void zero_grad() { galpha_.setZero(); }
    void release_cache() { cached_x_ = FeatureMap<T>(); }

  private:
    std::string name_;
    VecX<T> alpha_, galpha_;
    FeatureMap<T> cached_x_;
};

// Normalizes each feature channel by its own spatial mean and standard
// deviation, then applies a learned scale and shift. The same statistics
// are used in training and at inference; running averages are never kept.
template <typename T>
class ChannelNorm {
  public:
    static constexpr double kEps = 1e-5;

    ChannelNorm(std::string name, int channels)
        : name_(std::move(name)), gamma_(VecX<T>::Constant(channels, T(1))),
          beta_(VecX<T>::Zero(channels)), ggamma_(VecX<T>::Zero(channels)),
          gbeta_(VecX<T>::Zero(channels)) {}

    FeatureMap<T> forward(const FeatureMap<T>& x, bool training) {
        const int ch = x.channels();
        const long v = x.voxels();
        FeatureMap<T> y(x.sp, ch);
        xhat_.resize(ch, v);
        inv_std_.resize(ch);
        for (int c = 0; c < ch; ++c) {
            const T mu = x.m.row(c).mean();
            const T var = (x.m.row(c).array() - mu).square().sum() /
                          static_cast<T>(v);
            inv_std_[c] = T(1) / std::sqrt(var + static_cast<T>(kEps));
            xhat_.row(c) = (x.m.row(c).array() - mu) * inv_std_[c];
            y.m.row(c) = gamma_[c] * xhat_.row(c).array() + beta_[c];
        }
        if (!training) {
            xhat_.resize(0, 0);
            inv_std_.resize(0);
        }
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        const int ch = dy.channels();
        const long v = dy.voxels();
        FeatureMap<T> dx(dy.sp, ch);
        for (int c = 0; c < ch; ++c) {
            const T s1 = dy.m.row(c).sum();
            const T s2 = (dy.m.row(c).array() * xhat_.row(c).array()).sum();
            gbeta_[c] += s1;
            ggamma_[c] += s2;
            dx.m.row(c) = (gamma_[c] * inv_std_[c]) *
                          (dy.m.row(c).array() - s1 / static_cast<T>(v) -
                           xhat_.row(c).array() * (s2 / static_cast<T>(v)));
        }
        return dx;
    }

    void collect_params(std::vector<ParamView<T>>& out) {
        out.push_back({name_ + ".gamma", gamma_.data(), ggamma_.data(),
                       static_cast<size_t>(gamma_.size())});
        out.push_back({name_ + ".beta", beta_.data(), gbeta_.data(),
                       static_cast<size_t>(beta_.size())});
    }

    void zero_grad() {
        ggamma_.setZero();
        gbeta_.setZero();
    }
    void release_cache() {
        xhat_.resize(0, 0);
        inv_std_.resize(0);
    }

  private:
    std::string name_;
    VecX<T> gamma_, beta_, ggamma_, gbeta_;
    MatX<T> xhat_;
    VecX<T> inv_std_;
};

// Inverted dropout: active only in training, identity at inference.
template <typename T>
class Dropout {
  public:
    explicit Dropout(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0)
            throw std::invalid_argument("Dropout: rate must be in [0,1)");
    }

    FeatureMap<T> forward(const FeatureMap<T>& x, bool training, Rng* rng) {
        if (!training || rate_ == 0.0) return x;
        if (!rng)
            throw std::runtime_error("Dropout: training requires an rng");
        const double keep = 1.0 - rate_;
        const T scale = static_cast<T>(1.0 / keep);
        mask_.resize(x.m.rows(), x.m.cols());
        FeatureMap<T> y(x.sp, x.channels());
        for (long v = 0; v < x.voxels(); ++v)
            for (int c = 0; c < x.channels(); ++c) {
                const T m = uniform01(*rng) < keep ? scale : T(0);
                mask_(c, v) = m;
                y.m(c, v) = x.m(c, v) * m;
            }
        return y;
    }

    FeatureMap<T> backward(const FeatureMap<T>& dy) {
        if (rate_ == 0.0) return dy;
        FeatureMap<T> dx(dy.sp, dy.channels());
        dx.m = dy.m.cwiseProduct(mask_);
        return dx;
    }

    double rate() const { return rate_; }
    void release_cache() { mask_.resize(0, 0); }

  private:
    double rate_;
    MatX<T> mask_;
};

// Weighted softmax cross entropy, mean over voxels:
//   L = (1/V) * sum_v w[y_v] * (-log softmax(z_v)[y_v])
template <typename T>
struct LossResult {
    double loss = 0;
    MatX<T> dlogits;
};

template <typename T>
LossResult<T> softmax_cross_entropy(const MatX<T>& logits,
                                    const uint8_t* labels,
                                    const VecX<T>& class_weights,
                                    bool want_grad = true) {
    const int k = static_cast<int>(logits.rows());
    const long v = logits.cols();
    if (static_cast<int>(class_weights.size()) != k)
        throw std::runtime_error("softmax_cross_entropy: weight size");
    LossResult<T> r;
    if (want_grad) r.dlogits = MatX<T>::Zero(k, v);
    double loss = 0;
    VecX<T> p(k);
    for (long i = 0; i < v; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= k)
            throw std::runtime_error("softmax_cross_entropy: label out of range");
        const T zmax = logits.col(i).maxCoeff();
        p = (logits.col(i).array() - zmax).exp();
        const T denom = p.sum();
        p /= denom;
        const double w = static_cast<double>(class_weights[y]);
        loss += w * -(static_cast<double>(logits(y, i)) - zmax -
                      std::log(static_cast<double>(denom)));
        if (want_grad) {
            r.dlogits.col(i) = static_cast<T>(w / static_cast<double>(v)) * p;
            r.dlogits(y, i) -= static_cast<T>(w / static_cast<double>(v));
        }
    }
    r.loss = loss / static_cast<double>(v);
    return r;
}

template <typename T>
MatX<T> softmax_columns(const MatX<T>& logits) {
    MatX<T> p(logits.rows(), logits.cols());
    for (long i = 0; i < logits.cols(); ++i) {
        const T zmax = logits.col(i).maxCoeff();
        p.col(i) = (logits.col(i).array() - zmax).exp();
        p.col(i) /= p.col(i).sum();
    }
    return p;
}

}  // namespace btseg::nn
