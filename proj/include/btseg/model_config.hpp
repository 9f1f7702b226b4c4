// model_config.hpp
// Network hyper-parameters and the training schedule.

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace btseg {

enum class LossType { Uniform, Weighted };

inline const char* loss_type_name(LossType t) {
    return t == LossType::Uniform ? "uniform" : "weighted";
}

inline LossType parse_loss_type(const std::string& s) {
    if (s == "uniform") return LossType::Uniform;
    if (s == "weighted") return LossType::Weighted;
    throw std::runtime_error("unknown loss type '" + s +
                             "' (expected uniform|weighted)");
}

struct ModelConfig {
    std::string name = "model";
    int num_blocks = 3;     // M: encoding (= decoding) blocks
    int patch_size = 64;    // N: voxels per side
    int base_features = 96; // f: channels in the first encoding block
    LossType loss = LossType::Uniform;
    // 1.0 background; 2.0 per foreground class under the weighted loss.
    std::array<float, 4> class_weights{1.f, 1.f, 1.f, 1.f};

    void set_weights_from_loss() {
        class_weights = loss == LossType::Weighted
                            ? std::array<float, 4>{1.f, 2.f, 2.f, 2.f}
                            : std::array<float, 4>{1.f, 1.f, 1.f, 1.f};
    }

    void validate() const {
        if (num_blocks < 1)
            throw std::runtime_error(name + ": num_blocks must be >= 1");
        if (base_features < 1)
            throw std::runtime_error(name + ": base_features must be >= 1");
        if (patch_size < 1)
            throw std::runtime_error(name + ": patch_size must be >= 1");
        const int div = 1 << num_blocks;
        if (patch_size % div != 0)
            throw std::runtime_error(
                name + ": patch_size " + std::to_string(patch_size) +
                " not divisible by 2^M = " + std::to_string(div));
        for (float w : class_weights)
            if (!(w > 0.f))
                throw std::runtime_error(name + ": class weights must be > 0");
    }
};

// The six published model configurations.
inline std::vector<ModelConfig> standard_model_configs() {
    auto mk = [](std::string name, int m, int n, int f, LossType t) {
        ModelConfig c;
        c.name = std::move(name);
        c.num_blocks = m;
        c.patch_size = n;
        c.base_features = f;
        c.loss = t;
        c.set_weights_from_loss();
        return c;
    };
    return {
        mk("model1", 3, 64, 96, LossType::Uniform),
        mk("model2", 3, 64, 96, LossType::Weighted),
        mk("model3", 4, 64, 96, LossType::Uniform),
        mk("model4", 4, 96, 96, LossType::Weighted),
        mk("model5", 3, 80, 64, LossType::Uniform),
        mk("model6", 3, 80, 64, LossType::Weighted),
    };
}

struct TrainSchedule {
    int epochs = 640;
    int patches_per_subject_per_epoch = 1;
    double learning_rate = 5e-4;  // constant; no decay
    int batch_size = 1;
    double dropout_rate = 0.5;
    bool shuffle_subjects = true;

    void validate() const {
        if (epochs < 0) throw std::runtime_error("epochs must be >= 0");
        if (patches_per_subject_per_epoch < 1)
            throw std::runtime_error("patches_per_subject_per_epoch >= 1");
        if (!(learning_rate > 0))
            throw std::runtime_error("learning_rate must be > 0");
        if (batch_size != 1)
            throw std::runtime_error("only batch_size 1 is supported");
        if (dropout_rate < 0 || dropout_rate >= 1)
            throw std::runtime_error("dropout_rate must be in [0,1)");
    }
};

}  // namespace btseg
