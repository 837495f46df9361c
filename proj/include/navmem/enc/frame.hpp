#pragma once

#include <cstddef>
#include <vector>

namespace navmem::enc {

// One egocentric observation: an rgb grid in [0,1] plus a per-column
// ray-cast depth grid, both h x w. Row-major; rgb is interleaved r,g,b.
struct ObservationFrame {
    int h = 0;
    int w = 0;
    std::vector<double> rgb;    // h*w*3
    std::vector<double> depth;  // h*w, cell units, non-negative
    int step_index = 0;

    double& rgb_at(int r, int c, int ch) { return rgb[(static_cast<std::size_t>(r) * w + c) * 3 + ch]; }
    double rgb_at(int r, int c, int ch) const { return rgb[(static_cast<std::size_t>(r) * w + c) * 3 + ch]; }
    double& depth_at(int r, int c) { return depth[static_cast<std::size_t>(r) * w + c]; }
    double depth_at(int r, int c) const { return depth[static_cast<std::size_t>(r) * w + c]; }
};

}  // namespace navmem::enc
