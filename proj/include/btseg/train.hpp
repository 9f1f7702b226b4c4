// train.hpp
// Sequential training loop: one randomly drawn patch per subject per
// epoch, subject order reshuffled every epoch, Adam at a constant
// learning rate, batch size 1.

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "btseg/patch_sampler.hpp"
#include "btseg/unet3d.hpp"

namespace btseg {

struct TrainResult {
    std::vector<double> loss_history;  // one entry per gradient step
};

using StepCallback =
    std::function<void(int epoch, int step, double loss)>;

TrainResult train_model(UNet3D<float>& model,
                        std::span<const SamplerSubject> subjects,
                        const ChannelStats& stats, const TrainSchedule& sched,
                        Rng& rng, const StepCallback& on_step = {});

}  // namespace btseg
