#pragma once

#include "navmem/attn/kv.hpp"

#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::mem {

// Fixed-size memory state: the per-layer key/value blocks of M sentinel
// tokens. Block shapes never change over an episode; the serialized size is
// therefore constant, which tests assert.
struct RecursiveMemory {
    int sentinel_count = 0;  // M
    std::vector<attn::KVCache::LayerKV> layers;
    int step_of_origin = -1;  // -1 for the initial (learned) state

    void validate() const {
        for (const auto& l : layers)
            if (l.k.rows() != sentinel_count || l.v.rows() != sentinel_count || l.k.shape != l.v.shape)
                throw std::invalid_argument("recursive memory: block shape does not match sentinel count");
    }

    std::vector<unsigned char> serialize() const {
        std::vector<unsigned char> bytes;
        auto put_double = [&](double d) {
            unsigned char b[8];
            std::memcpy(b, &d, 8);
            bytes.insert(bytes.end(), b, b + 8);
        };
        bytes.push_back(static_cast<unsigned char>(sentinel_count & 0xFF));
        bytes.push_back(static_cast<unsigned char>((sentinel_count >> 8) & 0xFF));
        for (const auto& l : layers) {
            for (double v : l.k.data) put_double(v);
            for (double v : l.v.data) put_double(v);
        }
        return bytes;
    }
};

}  // namespace navmem::mem
