// train.cpp

#include "btseg/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "btseg/nn/adam.hpp"

namespace btseg {

TrainResult train_model(UNet3D<float>& model,
                        std::span<const SamplerSubject> subjects,
                        const ChannelStats& stats, const TrainSchedule& sched,
                        Rng& rng, const StepCallback& on_step) {
    sched.validate();
    if (subjects.empty())
        throw std::runtime_error("train_model: no training subjects");
    for (const auto& s : subjects)
        if (!s.labels)
            throw std::runtime_error("train_model: subject without labels");

    model.set_dropout_rate(sched.dropout_rate);
    const ModelConfig& cfg = model.config();
    nn::VecX<float> weights(4);
    for (int c = 0; c < 4; ++c) weights[c] = cfg.class_weights[c];

    auto params = model.params();
    nn::Adam<float> adam(sched.learning_rate);

    std::vector<size_t> order(subjects.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainResult result;
    int step = 0;
    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        if (sched.shuffle_subjects) shuffle(order.begin(), order.end(), rng);
        for (size_t oi : order) {
            const auto& subj = subjects[oi];
            for (int r = 0; r < sched.patches_per_subject_per_epoch; ++r) {
                PatchSample patch = standardize(
                    sample_patch(rng, *subj.weights, *subj.volume,
                                 *subj.labels, cfg.patch_size),
                    stats);
                auto x = nn::from_grid(patch.image);
                auto logits = model.forward(x, /*training=*/true, &rng);
                auto loss = nn::softmax_cross_entropy(
                    logits.m, patch.labels.data.data(), weights);
                if (!std::isfinite(loss.loss))
                    throw std::runtime_error(
                        "train_model: non-finite loss at epoch " +
                        std::to_string(epoch) + " step " +
                        std::to_string(step));
                model.zero_grad();
                nn::FeatureMap<float> dl;
                dl.sp = logits.sp;
                dl.m = std::move(loss.dlogits);
                model.backward(dl);
                adam.step(params);
                result.loss_history.push_back(loss.loss);
                if (on_step) on_step(epoch, step, loss.loss);
                ++step;
            }
        }
    }
    model.release_caches();
    return result;
}

}  // namespace btseg
