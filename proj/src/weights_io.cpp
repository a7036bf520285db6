#include "mobiface/weights_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace mobiface {

void WeightStore::add(std::string name, Tensor t) {
    if (name.empty() || name.size() > 0xffff) {
        throw std::invalid_argument("weight name must be 1-65535 bytes");
    }
    if (index_.count(name)) {
        throw std::invalid_argument("duplicate weight name '" + name + "'");
    }
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(t));
}

bool WeightStore::contains(const std::string& name) const { return index_.count(name) > 0; }

const Tensor& WeightStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
        throw std::invalid_argument("missing weight '" + name + "'");
    }
    return entries_[it->second].second;
}

std::size_t WeightStore::total_floats() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.second.size();
    return n;
}

namespace {

constexpr char kMagic[4] = {'M', 'B', 'F', 'W'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

    void bytes(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw std::runtime_error("truncated weight file '" + path_ + "'");
        }
    }

    std::uint16_t u16() {
        unsigned char b[2];
        bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }

    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    std::istream& in_;
    const std::string& path_;
};

static_assert(sizeof(float) == 4, "f32 payload requires 4-byte float");

void write_floats(std::ostream& out, const float* src, std::size_t count,
                  const std::string& path) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(count * 4));
    } else {
        std::string buf;
        buf.reserve(count * 4);
        for (std::size_t i = 0; i < count; ++i) {
            put_u32(buf, std::bit_cast<std::uint32_t>(src[i]));
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw std::runtime_error("failed writing weight file '" + path + "'");
}

void read_floats(Reader& r, float* dst, std::size_t count) {
    r.bytes(dst, count * 4);
    if constexpr (std::endian::native != std::endian::little) {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t v = std::bit_cast<std::uint32_t>(dst[i]);
            v = ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
            dst[i] = std::bit_cast<float>(v);
        }
    }
}

}  // namespace

void save_weights(const WeightStore& store, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    std::string header;
    header.append(kMagic, 4);
    put_u32(header, kVersion);
    put_u32(header, static_cast<std::uint32_t>(store.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));

    for (const WeightStore::Entry& entry : store.entries()) {
        std::string meta;
        put_u16(meta, static_cast<std::uint16_t>(entry.first.size()));
        meta += entry.first;
        meta.push_back(static_cast<char>(entry.second.rank()));
        for (int d : entry.second.shape()) {
            put_u32(meta, static_cast<std::uint32_t>(d));
        }
        out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
        write_floats(out, entry.second.data(), entry.second.size(), path.string());
    }
    out.flush();
    if (!out) throw std::runtime_error("failed writing weight file '" + path.string() + "'");
}

WeightStore load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open weight file '" + path.string() + "'");
    }
    Reader r(in, path.string());

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("bad magic in '" + path.string() + "': not a MBFW weight file");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("unsupported weight format version " + std::to_string(version) +
                                 " in '" + path.string() + "' (expected " +
                                 std::to_string(kVersion) + ")");
    }
    const std::uint32_t count = r.u32();

    WeightStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        if (name_len == 0) {
            throw std::runtime_error("empty weight name in '" + path.string() + "'");
        }
        std::string name(name_len, '\0');
        r.bytes(name.data(), name_len);

        unsigned char rank;
        r.bytes(&rank, 1);
        if (rank < 1 || rank > 4) {
            throw std::runtime_error("weight '" + name + "' has unsupported rank " +
                                     std::to_string(rank));
        }
        std::vector<int> shape(rank);
        std::uint64_t elems = 1;
        for (unsigned char d = 0; d < rank; ++d) {
            const std::uint32_t dim = r.u32();
            if (dim == 0 || dim > (1u << 28)) {
                throw std::runtime_error("weight '" + name + "' has implausible dimension " +
                                         std::to_string(dim));
            }
            shape[d] = static_cast<int>(dim);
            elems *= dim;
            if (elems > (1ull << 31)) {
                throw std::runtime_error("weight '" + name + "' is implausibly large");
            }
        }

        Tensor t(shape);
        read_floats(r, t.data(), t.size());
        if (!all_finite(t)) {
            throw std::runtime_error("weight '" + name + "' contains NaN or Inf");
        }
        if (store.contains(name)) {
            throw std::runtime_error("duplicate weight name '" + name + "' in '" + path.string() +
                                     "'");
        }
        store.add(std::move(name), std::move(t));
    }
    if (!r.at_eof()) {
        throw std::runtime_error("trailing bytes after last entry in '" + path.string() + "'");
    }

    store.format_version = version;
    store.arch_id = store.contains("flip_head.fc1.weight") ? "mobiface-flipped" : "mobiface";
    return store;
}

namespace {

// Fan-in for the scaled Gaussian draw; the spatial kernel and input channel
// extent both feed one output value.
std::size_t weight_fan_in(const LayerSpec& layer) {
    switch (layer.kind) {
        case LayerKind::Conv:
            return static_cast<std::size_t>(layer.in_channels) * layer.kernel * layer.kernel;
        case LayerKind::DWConv:
            return static_cast<std::size_t>(layer.kernel) * layer.kernel;
        case LayerKind::FC:
            return static_cast<std::size_t>(layer.in_dim);
        default:
            return 1;
    }
}

Tensor constant_tensor(const std::vector<int>& shape, float value) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = value;
    return t;
}

Tensor gaussian_tensor(const std::vector<int>& shape, float stddev, std::mt19937& rng) {
    Tensor t(shape);
    std::normal_distribution<float> dist(0.0f, stddev);
    for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = dist(rng);
    return t;
}

void init_layer_weights(const LayerSpec& layer, std::mt19937& rng, WeightStore& store) {
    switch (layer.kind) {
        case LayerKind::Conv:
        case LayerKind::DWConv: {
            const std::string name = layer.name + ".weight";
            const float stddev =
                1.0f / std::sqrt(static_cast<float>(weight_fan_in(layer)));
            store.add(name, gaussian_tensor(weight_shape(layer, name), stddev, rng));
            break;
        }
        case LayerKind::BatchNorm: {
            const std::vector<int> shape{layer.out_channels};
            store.add(layer.name + ".gamma", constant_tensor(shape, 1.0f));
            store.add(layer.name + ".beta", constant_tensor(shape, 0.0f));
            store.add(layer.name + ".running_mean", constant_tensor(shape, 0.0f));
            store.add(layer.name + ".running_var", constant_tensor(shape, 1.0f));
            break;
        }
        case LayerKind::PReLU:
            store.add(layer.name + ".slopes",
                      constant_tensor({layer.out_channels}, 0.25f));
            break;
        case LayerKind::FC: {
            const float stddev =
                1.0f / std::sqrt(static_cast<float>(weight_fan_in(layer)));
            store.add(layer.name + ".weight",
                      gaussian_tensor({layer.out_dim, layer.in_dim}, stddev, rng));
            store.add(layer.name + ".bias", constant_tensor({layer.out_dim}, 0.0f));
            break;
        }
        default:
            break;
    }
}

}  // namespace

WeightStore init_random(const Arch& arch, std::uint64_t seed) {
    std::mt19937 rng(static_cast<std::mt19937::result_type>(seed));
    WeightStore store;
    store.arch_id = arch.id;
    for (const LayerSpec& layer : arch.net.layers) {
        init_layer_weights(layer, rng, store);
    }
    if (arch.flip_head) {
        const int dim = arch.flip_head->dim;
        const float stddev = 1.0f / std::sqrt(static_cast<float>(dim));
        for (const std::string& fc : {arch.flip_head->fc1_name, arch.flip_head->fc2_name}) {
            store.add(fc + ".weight", gaussian_tensor({dim, dim}, stddev, rng));
            store.add(fc + ".bias", constant_tensor({dim}, 0.0f));
        }
    }
    return store;
}

void validate_weights(const Arch& arch, const WeightStore& store) {
    auto check = [&store](const std::string& name, const std::vector<int>& expected) {
        const Tensor& t = store.get(name);  // throws if missing
        if (t.shape() != expected) {
            throw std::runtime_error("weight '" + name + "' has shape " +
                                     shape_string(t.shape()) + ", expected " +
                                     shape_string(expected));
        }
    };
    for (const LayerSpec& layer : arch.net.layers) {
        for (const std::string& name : layer_weight_names(layer)) {
            check(name, weight_shape(layer, name));
        }
    }
    if (arch.flip_head) {
        const int dim = arch.flip_head->dim;
        for (const std::string& fc : {arch.flip_head->fc1_name, arch.flip_head->fc2_name}) {
            check(fc + ".weight", {dim, dim});
            check(fc + ".bias", {dim});
        }
    }
}

}  // namespace mobiface
