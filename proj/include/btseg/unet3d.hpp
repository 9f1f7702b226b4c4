// unet3d.hpp
// Configurable 3D U-Net: M encoding blocks (two 3x3x3 convolutions, each
// followed by PReLU and a channel normalization), 2x2x2 max pooling
// between blocks, a bottleneck block with dropout, and symmetric decoding
// blocks whose transposed-convolution outputs are concatenated with the
// matching encoder features. Zero padding keeps the output spatial shape
// equal to the input; a 1x1x1 convolution produces the 4 class logits.

#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "btseg/model_config.hpp"
#include "btseg/nn/layers.hpp"

namespace btseg {

struct LayerShape {
    std::string name;
    std::array<int, 3> spatial;
    int channels;
};

template <typename T>
class UNet3D {
  public:
    UNet3D(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const int m = cfg_.num_blocks;
        const int f = cfg_.base_features;
        for (int b = 0; b < m; ++b) {
            const int in = b == 0 ? 4 : f * (1 << (b - 1));
            enc_.emplace_back("enc" + std::to_string(b), in, f * (1 << b));
            pool_.emplace_back();
        }
        bottleneck_ = std::make_unique<ConvBlock>(
            "bottleneck", f * (1 << (m - 1)), f * (1 << m));
        dropout_ = std::make_unique<nn::Dropout<T>>(0.5);
        // Decoder blocks in application order: deepest first.
        for (int t = 0; t < m; ++t) {
            const int level = m - 1 - t;
            dec_.emplace_back("dec" + std::to_string(level),
                              f * (1 << (level + 1)), f * (1 << level));
        }
        classifier_ = std::make_unique<nn::Conv3d<T>>("classifier", f,
                                                      kNumClasses, 1);
        Rng rng(seed);
        for (auto& e : enc_) e.init(rng);
        bottleneck_->init(rng);
        for (auto& d : dec_) d.init(rng);
        classifier_->init(rng);
    }

    const ModelConfig& config() const { return cfg_; }

    void set_dropout_rate(double rate) {
        dropout_ = std::make_unique<nn::Dropout<T>>(rate);
    }

    // x: (4 x V) feature map at any spatial shape divisible by 2^M.
    // Returns class logits at the same spatial shape.
    nn::FeatureMap<T> forward(const nn::FeatureMap<T>& x, bool training,
                              Rng* rng = nullptr) {
        if (x.channels() != 4)
            throw std::runtime_error("UNet3D: input must have 4 channels");
        for (int a = 0; a < 3; ++a)
            if (x.sp[a] % (1 << cfg_.num_blocks) != 0)
                throw std::runtime_error(
                    "UNet3D: input spatial shape " + shape_string(x.sp) +
                    " not divisible by 2^M");
        const int m = cfg_.num_blocks;
        skips_.assign(m, nn::FeatureMap<T>());
        nn::FeatureMap<T> t = x;
        for (int b = 0; b < m; ++b) {
            t = enc_[b].forward(t, training);
            skips_[b] = t;
            t = pool_[b].forward(t, training);
        }
        t = bottleneck_->forward(t, training);
        t = dropout_->forward(t, training, rng);
        for (int tix = 0; tix < m; ++tix) {
            const int level = m - 1 - tix;
            t = dec_[tix].forward(t, skips_[level], training);
            if (!training) skips_[level] = nn::FeatureMap<T>();
        }
        return classifier_->forward(t, training);
    }

    // Gradients accumulate into the layer grad buffers; call zero_grad()
    // before each step.
    void backward(const nn::FeatureMap<T>& dlogits) {
        const int m = cfg_.num_blocks;
        nn::FeatureMap<T> d = classifier_->backward(dlogits);
        std::vector<nn::FeatureMap<T>> dskip(m);
        for (int tix = m - 1; tix >= 0; --tix) {
            const int level = m - 1 - tix;
            auto [dup, dsk] = dec_[tix].backward(d);
            dskip[level] = std::move(dsk);
            d = std::move(dup);
        }
        d = dropout_->backward(d);
        d = bottleneck_->backward(d);
        for (int b = m - 1; b >= 0; --b) {
            d = pool_[b].backward(d);
            d.m += dskip[b].m;
            d = enc_[b].backward(d);
        }
    }

    void zero_grad() {
        for (auto& e : enc_) e.zero_grad();
        bottleneck_->zero_grad();
        for (auto& d : dec_) d.zero_grad();
        classifier_->zero_grad();
    }

    void release_caches() {
        for (auto& e : enc_) e.release_cache();
        for (auto& p : pool_) p.release_cache();
        bottleneck_->release_cache();
        dropout_->release_cache();
        for (auto& d : dec_) d.release_cache();
        classifier_->release_cache();
        skips_.clear();
    }

    std::vector<nn::ParamView<T>> params() {
        std::vector<nn::ParamView<T>> out;
        for (auto& e : enc_) e.collect_params(out);
        bottleneck_->collect_params(out);
        for (auto& d : dec_) d.collect_params(out);
        classifier_->collect_params(out);
        return out;
    }

    size_t param_count() {
        size_t n = 0;
        for (const auto& p : params()) n += p.size;
        return n;
    }

    // Walks the block structure symbolically; cheap shape introspection.
    static std::vector<LayerShape> shape_plan(const ModelConfig& cfg) {
        cfg.validate();
        const int m = cfg.num_blocks, f = cfg.base_features;
        int side = cfg.patch_size;
        std::vector<LayerShape> plan;
        plan.push_back({"input", {side, side, side}, 4});
        for (int b = 0; b < m; ++b) {
            plan.push_back({"enc" + std::to_string(b),
                            {side, side, side},
                            f * (1 << b)});
            side /= 2;
        }
        plan.push_back({"bottleneck", {side, side, side}, f * (1 << m)});
        for (int level = m - 1; level >= 0; --level) {
            side *= 2;
            plan.push_back({"dec" + std::to_string(level),
                            {side, side, side},
                            f * (1 << level)});
        }
        plan.push_back({"output", {side, side, side}, kNumClasses});
        return plan;
    }

  private:
    // conv -> PReLU -> norm, twice.
    struct ConvBlock {
        nn::Conv3d<T> c1, c2;
        nn::PReLU<T> a1, a2;
        nn::ChannelNorm<T> n1, n2;

        ConvBlock(const std::string& name, int in_ch, int out_ch)
            : c1(name + ".conv1", in_ch, out_ch, 3),
              c2(name + ".conv2", out_ch, out_ch, 3),
              a1(name + ".act1", out_ch), a2(name + ".act2", out_ch),
              n1(name + ".norm1", out_ch), n2(name + ".norm2", out_ch) {}

        void init(Rng& rng) {
            c1.init(rng);
            c2.init(rng);
        }

        nn::FeatureMap<T> forward(const nn::FeatureMap<T>& x, bool training) {
            auto t = n1.forward(a1.forward(c1.forward(x, training), training),
                                training);
            return n2.forward(a2.forward(c2.forward(t, training), training),
                              training);
        }

        nn::FeatureMap<T> backward(const nn::FeatureMap<T>& dy) {
            auto d = c2.backward(a2.backward(n2.backward(dy)));
            return c1.backward(a1.backward(n1.backward(d)));
        }

        void collect_params(std::vector<nn::ParamView<T>>& out) {
            c1.collect_params(out);
            a1.collect_params(out);
            n1.collect_params(out);
            c2.collect_params(out);
            a2.collect_params(out);
            n2.collect_params(out);
        }

        void zero_grad() {
            c1.zero_grad();
            a1.zero_grad();
            n1.zero_grad();
            c2.zero_grad();
            a2.zero_grad();
            n2.zero_grad();
        }

        void release_cache() {
            c1.release_cache();
            a1.release_cache();
            n1.release_cache();
            c2.release_cache();
            a2.release_cache();
            n2.release_cache();
        }
    };

    // up-convolution, concatenation with the encoder skip, then ConvBlock.
    struct DecBlock {
        nn::ConvTranspose3d<T> up;
        ConvBlock convs;
        int ch;  // feature count at this level

        DecBlock(const std::string& name, int in_ch, int out_ch)
            : up(name + ".up", in_ch, out_ch),
              convs(name, 2 * out_ch, out_ch), ch(out_ch) {}

        void init(Rng& rng) {
            up.init(rng);
            convs.init(rng);
        }

        nn::FeatureMap<T> forward(const nn::FeatureMap<T>& x,
                                  const nn::FeatureMap<T>& skip,
                                  bool training) {
            auto u = up.forward(x, training);
            if (u.sp != skip.sp)
                throw std::runtime_error("DecBlock: skip shape mismatch");
            nn::FeatureMap<T> cat(u.sp, 2 * ch);
            cat.m.topRows(ch) = u.m;
            cat.m.bottomRows(ch) = skip.m;
            return convs.forward(cat, training);
        }

        // Returns (gradient into the deeper path, gradient into the skip).
        std::pair<nn::FeatureMap<T>, nn::FeatureMap<T>> backward(
            const nn::FeatureMap<T>& dy) {
            auto dcat = convs.backward(dy);
            nn::FeatureMap<T> dup_out(dcat.sp, ch), dskip(dcat.sp, ch);
            dup_out.m = dcat.m.topRows(ch);
            dskip.m = dcat.m.bottomRows(ch);
            return {up.backward(dup_out), std::move(dskip)};
        }

        void collect_params(std::vector<nn::ParamView<T>>& out) {
            up.collect_params(out);
            convs.collect_params(out);
        }

        void zero_grad() {
            up.zero_grad();
            convs.zero_grad();
        }

        void release_cache() {
            up.release_cache();
            convs.release_cache();
        }
    };

    ModelConfig cfg_;
    std::vector<ConvBlock> enc_;
    std::vector<nn::MaxPool3d<T>> pool_;
    std::unique_ptr<ConvBlock> bottleneck_;
    std::unique_ptr<nn::Dropout<T>> dropout_;
    std::vector<DecBlock> dec_;
    std::unique_ptr<nn::Conv3d<T>> classifier_;
    std::vector<nn::FeatureMap<T>> skips_;
};

}  // namespace btseg
