// checkpoint.hpp
// Model checkpoints bundle the network parameters with the ModelConfig
// and ChannelStats they were trained with, so a checkpoint file is
// sufficient to run prediction.

#pragma once

#include <string>

#include "btseg/patch_sampler.hpp"
#include "btseg/unet3d.hpp"

namespace btseg {

struct Checkpoint {
    ModelConfig config;
    ChannelStats stats;
};

void save_checkpoint(const std::string& path, UNet3D<float>& model,
                     const ChannelStats& stats);

// Reconstructs the network and restores parameters; returns the bundled
// metadata through `out`.
std::unique_ptr<UNet3D<float>> load_checkpoint(const std::string& path,
                                               Checkpoint& out);

}  // namespace btseg
