// config_json.hpp
// JSON (de)serialization for configs and channel statistics.

#pragma once

#include <json.hpp>

#include "btseg/model_config.hpp"
#include "btseg/patch_sampler.hpp"

namespace btseg {

using Json = nlohmann::ordered_json;

inline Json to_json(const ModelConfig& c) {
    return Json{{"name", c.name},
                {"num_blocks", c.num_blocks},
                {"patch_size", c.patch_size},
                {"base_features", c.base_features},
                {"loss", loss_type_name(c.loss)},
                {"class_weights", c.class_weights}};
}

inline ModelConfig model_config_from_json(const Json& j) {
    ModelConfig c;
    c.name = j.value("name", c.name);
    c.num_blocks = j.at("num_blocks").get<int>();
    c.patch_size = j.at("patch_size").get<int>();
    c.base_features = j.at("base_features").get<int>();
    c.loss = parse_loss_type(j.at("loss").get<std::string>());
    c.set_weights_from_loss();
    if (j.contains("class_weights")) {
        const auto w = j.at("class_weights").get<std::vector<float>>();
        if (w.size() != 4)
            throw std::runtime_error(c.name + ": class_weights must have 4 "
                                              "entries");
        std::copy(w.begin(), w.end(), c.class_weights.begin());
    }
    c.validate();
    return c;
}

inline Json to_json(const TrainSchedule& s) {
    return Json{{"epochs", s.epochs},
                {"patches_per_subject_per_epoch",
                 s.patches_per_subject_per_epoch},
                {"learning_rate", s.learning_rate},
                {"batch_size", s.batch_size},
                {"dropout_rate", s.dropout_rate},
                {"shuffle_subjects", s.shuffle_subjects}};
}

inline TrainSchedule schedule_from_json(const Json& j) {
    TrainSchedule s;
    s.epochs = j.value("epochs", s.epochs);
    s.patches_per_subject_per_epoch = j.value(
        "patches_per_subject_per_epoch", s.patches_per_subject_per_epoch);
    s.learning_rate = j.value("learning_rate", s.learning_rate);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.dropout_rate = j.value("dropout_rate", s.dropout_rate);
    s.shuffle_subjects = j.value("shuffle_subjects", s.shuffle_subjects);
    s.validate();
    return s;
}

inline Json to_json(const ChannelStats& st) {
    return Json{{"mean", st.mean}, {"stddev", st.stddev}};
}

inline ChannelStats channel_stats_from_json(const Json& j) {
    ChannelStats st;
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto s = j.at("stddev").get<std::vector<double>>();
    if (m.size() != 4 || s.size() != 4)
        throw std::runtime_error("channel stats must have 4 entries");
    std::copy(m.begin(), m.end(), st.mean.begin());
    std::copy(s.begin(), s.end(), st.stddev.begin());
    for (double x : st.stddev)
        if (!(x > 0))
            throw std::runtime_error("channel stats: stddev must be > 0");
    return st;
}

}  // namespace btseg
