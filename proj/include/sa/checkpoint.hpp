#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sa/encoder.hpp"

namespace sa {

// Binary checkpoint: magic, format version, payload length, a flat key=value
// config blob, then named tensors as (name, rank, dims, little-endian float32
// values). Save -> load -> save is byte-identical.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::map<std::string, std::string> config;               // flat key=value
    std::vector<std::pair<std::string, std::vector<int>>> tensor_shapes;
    std::vector<std::vector<float>> tensor_values;           // parallel to shapes

    void set(const std::string& key, const std::string& value) { config[key] = value; }
    const std::string& get(const std::string& key) const;
    bool has(const std::string& key) const { return config.count(key) > 0; }

    void add_tensor(const std::string& name, const Tensor& t);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Copies checkpoint tensors into a ParamStore whose layout was already built
// by the init functions; every name and shape must match exactly.
void restore_params(const Checkpoint& ckpt, const ParamStore& params);

Checkpoint snapshot_params(const ParamStore& params);

}  // namespace sa
