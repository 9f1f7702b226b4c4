// checkpoint.cpp

#include "btseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "btseg/config_json.hpp"

namespace btseg {

namespace {

constexpr char kMagic[8] = {'B', 'T', 'S', 'E', 'G', 'C', 'K', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, UNet3D<float>& model,
                     const ChannelStats& stats) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("checkpoint: cannot open " + path +
                                 " for writing");
    os.write(kMagic, sizeof(kMagic));
    const Json header{{"config", to_json(model.config())},
                      {"stats", to_json(stats)}};
    const std::string hs = header.dump();
    put(os, static_cast<uint64_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));

    const auto params = model.params();
    put(os, static_cast<uint64_t>(params.size()));
    for (const auto& p : params) {
        put(os, static_cast<uint32_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put(os, static_cast<uint64_t>(p.size));
        os.write(reinterpret_cast<const char*>(p.value),
                 static_cast<std::streamsize>(p.size * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::unique_ptr<UNet3D<float>> load_checkpoint(const std::string& path,
                                               Checkpoint& out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error(path + ": not a model checkpoint");

    const auto hlen = take<uint64_t>(is);
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw std::runtime_error("checkpoint: truncated header");
    const Json header = Json::parse(hs);
    out.config = model_config_from_json(header.at("config"));
    out.stats = channel_stats_from_json(header.at("stats"));

    auto model = std::make_unique<UNet3D<float>>(out.config, /*seed=*/0);
    auto params = model->params();
    const auto ntensors = take<uint64_t>(is);
    if (ntensors != params.size())
        throw std::runtime_error(path + ": checkpoint has " +
                                 std::to_string(ntensors) + " tensors, model "
                                 "expects " + std::to_string(params.size()));
    for (auto& p : params) {
        const auto nlen = take<uint32_t>(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        const auto count = take<uint64_t>(is);
        if (name != p.name || count != p.size)
            throw std::runtime_error(path + ": tensor mismatch: file has '" +
                                     name + "' (" + std::to_string(count) +
                                     "), model expects '" + p.name + "' (" +
                                     std::to_string(p.size) + ")");
        is.read(reinterpret_cast<char*>(p.value),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
    }
    return model;
}

}  // namespace btseg
