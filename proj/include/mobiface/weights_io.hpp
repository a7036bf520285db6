#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mobiface/graph.hpp"
#include "mobiface/tensor.hpp"

namespace mobiface {

// Ordered name -> tensor map. Iteration order is insertion order, which is
// also the on-disk entry order.
class WeightStore {
public:
    using Entry = std::pair<std::string, Tensor>;

    void add(std::string name, Tensor t);  // rejects duplicate names
    bool contains(const std::string& name) const;
    const Tensor& get(const std::string& name) const;  // throws, naming the weight

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    std::size_t total_floats() const;

    const std::vector<Entry>& entries() const { return entries_; }

    // Format version is persisted; the architecture id is in-memory
    // bookkeeping only (the container has no arch field) and is inferred
    // from the key set on load.
    std::uint32_t format_version = 1;
    std::string arch_id;

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Binary container, all integers little-endian:
//   magic "MBFW" | u32 version=1 | u32 entry count
//   per entry: u16 name length, name bytes (UTF-8), u8 rank,
//              u32 dims[rank], f32 payload
// No compression or checksum in v1; load validates magic, version, name
// uniqueness, rank/dims, payload length, and rejects NaN/Inf payloads.
void save_weights(const WeightStore& store, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

// One tensor per weight name of the architecture, deterministic in `seed`.
// Convolution and FC weights draw from a fan-in-scaled Gaussian; FC biases
// are zero; batch norm starts as the identity (gamma 1, beta 0, mean 0,
// var 1); PReLU slopes start at 0.25.
WeightStore init_random(const Arch& arch, std::uint64_t seed);

// Checks that every weight the architecture binds exists with the expected
// shape. Extra tensors are permitted.
void validate_weights(const Arch& arch, const WeightStore& store);

}  // namespace mobiface
