#pragma once

#include "navmem/core/rng.hpp"

#include <cstdint>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::env {

enum class Heading : int { N = 0, E = 1, S = 2, W = 3 };

inline Heading rotate_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
inline Heading rotate_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }

inline int heading_dx(Heading h) { return h == Heading::E ? 1 : h == Heading::W ? -1 : 0; }
inline int heading_dy(Heading h) { return h == Heading::S ? 1 : h == Heading::N ? -1 : 0; }

inline char heading_char(Heading h) { return "NESW"[static_cast<int>(h)]; }
inline Heading heading_from_char(char c) {
    switch (c) {
        case 'N': return Heading::N;
        case 'E': return Heading::E;
        case 'S': return Heading::S;
        case 'W': return Heading::W;
        default: throw std::invalid_argument(std::string("bad heading character: ") + c);
    }
}

struct Cell {
    int x = 0;
    int y = 0;
    bool operator==(const Cell&) const = default;
};

struct Landmark {
    Cell cell;
    int color = 1;  // 1..9, indexes the marker palette
};

// Static navigation map. Border cells are always walls; the generator
// guarantees a path from start to goal.
struct GridWorld {
    std::string id;
    std::uint64_t seed = 0;
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> walls;  // row-major, 1 = wall
    Cell start;
    Heading start_heading = Heading::N;
    Cell goal;
    std::vector<Landmark> landmarks;

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    bool wall(int x, int y) const {
        if (!in_bounds(x, y)) return true;
        return walls[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set_wall(int x, int y, bool w) { walls[static_cast<std::size_t>(y) * width + x] = w ? 1 : 0; }

    const Landmark* landmark_at(int x, int y) const {
        for (const auto& l : landmarks)
            if (l.cell.x == x && l.cell.y == y) return &l;
        return nullptr;
    }
};

// BFS cell-connectivity (4-neighborhood over free cells).
inline int bfs_cell_distance(const GridWorld& w, Cell from, Cell to) {
    if (w.wall(from.x, from.y) || w.wall(to.x, to.y)) return -1;
    std::vector<int> dist(static_cast<std::size_t>(w.width) * w.height, -1);
    std::deque<Cell> queue{from};
    dist[static_cast<std::size_t>(from.y) * w.width + from.x] = 0;
    while (!queue.empty()) {
        Cell c = queue.front();
        queue.pop_front();
        int d = dist[static_cast<std::size_t>(c.y) * w.width + c.x];
        if (c == to) return d;
        const int dx[4] = {0, 1, 0, -1};
        const int dy[4] = {-1, 0, 1, 0};
        for (int k = 0; k < 4; ++k) {
            int nx = c.x + dx[k], ny = c.y + dy[k];
            if (w.wall(nx, ny)) continue;
            int& nd = dist[static_cast<std::size_t>(ny) * w.width + nx];
            if (nd >= 0) continue;
            nd = d + 1;
            queue.push_back({nx, ny});
        }
    }
    return -1;
}

struct WorldGenConfig {
    int width = 9;
    int height = 9;
    double wall_density = 0.18;
    int landmarks = 2;
    int min_goal_dist = 4;   // BFS cell distance lower bound
    int max_goal_dist = 64;  // and upper bound
};

// Rejection-samples a connected world. Start/goal/landmark cells are free
// and distinct; landmark cells never coincide with start or goal.
inline GridWorld generate_world(const WorldGenConfig& cfg, std::uint64_t seed, const std::string& id) {
    if (cfg.width < 5 || cfg.height < 5) throw std::invalid_argument("generate_world: map too small");
    Rng rng(seed);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        GridWorld w;
        w.id = id;
        w.seed = seed;
        w.width = cfg.width;
        w.height = cfg.height;
        w.walls.assign(static_cast<std::size_t>(cfg.width) * cfg.height, 0);
        for (int x = 0; x < cfg.width; ++x) {
            w.set_wall(x, 0, true);
            w.set_wall(x, cfg.height - 1, true);
        }
        for (int y = 0; y < cfg.height; ++y) {
            w.set_wall(0, y, true);
            w.set_wall(cfg.width - 1, y, true);
        }
        for (int y = 1; y < cfg.height - 1; ++y)
            for (int x = 1; x < cfg.width - 1; ++x)
                if (rng.uniform() < cfg.wall_density) w.set_wall(x, y, true);

        auto sample_free = [&](auto&& taken) -> Cell {
            for (int tries = 0; tries < 500; ++tries) {
                Cell c{1 + rng.uniform_int(cfg.width - 2), 1 + rng.uniform_int(cfg.height - 2)};
                if (!w.wall(c.x, c.y) && !taken(c)) return c;
            }
            return {-1, -1};
        };

        w.start = sample_free([](Cell) { return false; });
        if (w.start.x < 0) continue;
        w.goal = sample_free([&](Cell c) { return c == w.start; });
        if (w.goal.x < 0) continue;
        int d = bfs_cell_distance(w, w.start, w.goal);
        if (d < cfg.min_goal_dist || d > cfg.max_goal_dist) continue;
        w.start_heading = static_cast<Heading>(rng.uniform_int(4));

        bool ok = true;
        if (cfg.landmarks > 0) {
            // the first landmark marks the destination: it sits on a free
            // cell adjacent to the goal, and instructions reference it
            const int dx[4] = {0, 1, 0, -1};
            const int dy[4] = {-1, 0, 1, 0};
            int order = rng.uniform_int(4);
            Cell marker{-1, -1};
            for (int k = 0; k < 4; ++k) {
                int kk = (order + k) % 4;
                Cell c{w.goal.x + dx[kk], w.goal.y + dy[kk]};
                if (!w.wall(c.x, c.y) && !(c == w.start)) {
                    marker = c;
                    break;
                }
            }
            if (marker.x < 0) continue;  // goal walled in on all free sides
            w.landmarks.push_back({marker, 1 + rng.uniform_int(9)});
        }
        for (int i = 1; i < cfg.landmarks; ++i) {
            Cell c = sample_free([&](Cell cc) {
                if (cc == w.start || cc == w.goal) return true;
                return w.landmark_at(cc.x, cc.y) != nullptr;
            });
            if (c.x < 0) {
                ok = false;
                break;
            }
            w.landmarks.push_back({c, 1 + rng.uniform_int(9)});
        }
        if (!ok) continue;
        return w;
    }
    throw std::runtime_error("generate_world: could not sample a connected world for seed " + std::to_string(seed));
}

// ---- plain-text world format ----
// Header "id=<id> seed=<seed> heading=<NESW>" followed by one row per
// line: '#' wall, '.' free, 'S' start, 'G' goal, '1'..'9' landmark.

inline std::string world_to_text(const GridWorld& w) {
    std::ostringstream os;
    os << "id=" << w.id << " seed=" << w.seed << " heading=" << heading_char(w.start_heading) << "\n";
    for (int y = 0; y < w.height; ++y) {
        for (int x = 0; x < w.width; ++x) {
            char c = w.wall(x, y) ? '#' : '.';
            if (const Landmark* l = w.landmark_at(x, y)) c = static_cast<char>('0' + l->color);
            if (w.start.x == x && w.start.y == y) c = 'S';
            if (w.goal.x == x && w.goal.y == y) c = 'G';
            os << c;
        }
        os << "\n";
    }
    return os.str();
}

inline GridWorld world_from_text(const std::string& text) {
    std::istringstream is(text);
    std::string header;
    if (!std::getline(is, header)) throw std::invalid_argument("world text: missing header");
    GridWorld w;
    {
        std::istringstream hs(header);
        std::string field;
        bool have_heading = false;
        while (hs >> field) {
            auto eq = field.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("world header: bad field " + field);
            std::string key = field.substr(0, eq), val = field.substr(eq + 1);
            if (key == "id") w.id = val;
            else if (key == "seed") w.seed = std::stoull(val);
            else if (key == "heading") {
                if (val.size() != 1) throw std::invalid_argument("world header: bad heading " + val);
                w.start_heading = heading_from_char(val[0]);
                have_heading = true;
            } else throw std::invalid_argument("world header: unknown key " + key);
        }
        if (!have_heading) throw std::invalid_argument("world header: heading missing");
    }
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) break;
        rows.push_back(line);
    }
    if (rows.empty()) throw std::invalid_argument("world text: no grid rows");
    w.height = static_cast<int>(rows.size());
    w.width = static_cast<int>(rows[0].size());
    w.walls.assign(static_cast<std::size_t>(w.width) * w.height, 0);
    bool have_start = false, have_goal = false;
    for (int y = 0; y < w.height; ++y) {
        if (static_cast<int>(rows[static_cast<std::size_t>(y)].size()) != w.width)
            throw std::invalid_argument("world text: ragged grid row " + std::to_string(y));
        for (int x = 0; x < w.width; ++x) {
            char c = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
            switch (c) {
                case '#': w.set_wall(x, y, true); break;
                case '.': break;
                case 'S': w.start = {x, y}; have_start = true; break;
                case 'G': w.goal = {x, y}; have_goal = true; break;
                default:
                    if (c >= '1' && c <= '9') w.landmarks.push_back({{x, y}, c - '0'});
                    else throw std::invalid_argument(std::string("world text: bad cell character ") + c);
            }
        }
    }
    if (!have_start || !have_goal) throw std::invalid_argument("world text: start or goal missing");
    return w;
}

// Worlds file: blocks separated by a blank line.
inline void save_worlds(const std::vector<GridWorld>& worlds, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open worlds file for write: " + path);
    for (const auto& w : worlds) os << world_to_text(w) << "\n";
}

inline std::vector<GridWorld> load_worlds(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open worlds file: " + path);
    std::vector<GridWorld> worlds;
    std::string block, line;
    while (std::getline(is, line)) {
        if (line.empty()) {
            if (!block.empty()) worlds.push_back(world_from_text(block));
            block.clear();
        } else {
            block += line;
            block += "\n";
        }
    }
    if (!block.empty()) worlds.push_back(world_from_text(block));
    return worlds;
}

}  // namespace navmem::env
