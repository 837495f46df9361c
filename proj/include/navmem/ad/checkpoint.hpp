#pragma once

#include "navmem/ad/optim.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::ad {

// Checkpoint file: version byte, then little-endian records of
// (u32 name length, name bytes, u32 rank, u32 dims..., float32 payload),
// until EOF. Moments are not stored; a resumed optimizer starts fresh.
namespace detail {

constexpr std::uint8_t kCheckpointVersion = 1;

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF), static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
        (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return true;
}

inline void put_f32(std::ostream& os, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(os, v);
}

inline bool get_f32(std::istream& is, float& f) {
    std::uint32_t v;
    if (!get_u32(is, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

}  // namespace detail

inline void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for write: " + path);
    os.put(static_cast<char>(detail::kCheckpointVersion));
    for (const auto& p : store.all()) {
        detail::put_u32(os, static_cast<std::uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(p->value.shape.size()));
        for (int d : p->value.shape) detail::put_u32(os, static_cast<std::uint32_t>(d));
        for (double v : p->value.data) detail::put_f32(os, static_cast<float>(v));
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

// Loads into an existing store; every record must match a parameter of the
// same name and shape, and every parameter must be covered.
inline void load_checkpoint(ParamStore& store, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    int version = is.get();
    if (version != detail::kCheckpointVersion)
        throw std::runtime_error("checkpoint version mismatch in " + path);
    std::size_t loaded = 0;
    std::uint32_t name_len;
    while (detail::get_u32(is, name_len)) {
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len)) throw std::runtime_error("truncated checkpoint: " + path);
        std::uint32_t rank;
        if (!detail::get_u32(is, rank)) throw std::runtime_error("truncated checkpoint: " + path);
        std::vector<int> dims(rank);
        std::size_t n = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            std::uint32_t d;
            if (!detail::get_u32(is, d)) throw std::runtime_error("truncated checkpoint: " + path);
            dims[i] = static_cast<int>(d);
            n *= d;
        }
        Parameter& p = store.get(name);
        if (p.value.shape != dims)
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": file " + shape_str(dims) +
                                     " vs model " + shape_str(p.value.shape));
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            if (!detail::get_f32(is, f)) throw std::runtime_error("truncated checkpoint: " + path);
            p.value.data[i] = static_cast<double>(f);
        }
        ++loaded;
    }
    if (loaded != store.all().size())
        throw std::runtime_error("checkpoint covers " + std::to_string(loaded) + " of " +
                                 std::to_string(store.all().size()) + " parameters: " + path);
}

}  // namespace navmem::ad
