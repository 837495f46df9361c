#pragma once

#include "navmem/core/rng.hpp"
#include "navmem/env/oracle.hpp"
#include "navmem/env/sim.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::env {

// ---- closed vocabulary ----

inline const std::vector<std::string>& color_names() {
    static const std::vector<std::string> names = {"red",     "blue",   "yellow", "cyan", "magenta",
                                                   "orange",  "purple", "white",  "brown"};
    return names;
}

inline const std::vector<std::string>& number_words() {
    static const std::vector<std::string> words = {
        "zero", "one", "two",  "three", "four",  "five",  "six",   "seven",    "eight",    "nine",    "ten",
        "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};
    return words;
}

// All instruction tokens, in a fixed order. The file format (one token per
// line) and policies' embedding tables index into this list.
inline std::vector<std::string> build_vocabulary() {
    std::vector<std::string> v = {
        // route keywords
        "turn", "left", "right", "around", "go", "forward", "stop",
        // landmark phrasing
        "at", "the", "marker", "near",
        // long-regime filler (none collide with keywords)
        "please", "you", "should", "first", "then", "after", "that", "next", "finally",
        "walk", "steps", "cells", "make", "a", "to", "your", "rotate", "ahead", "for",
        "straight", "proceed", "move", "until", "reach", "destination", "and", "halt",
        "there", "once", "done", "passing", "by", "keep", "going", "room", "along", "way",
    };
    for (const auto& c : color_names()) v.push_back(c);
    for (const auto& n : number_words()) v.push_back(n);
    return v;
}

class Vocabulary {
public:
    Vocabulary() : Vocabulary(build_vocabulary()) {}
    explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = static_cast<int>(i);
    }

    int id(const std::string& tok) const {
        auto it = index_.find(tok);
        if (it == index_.end()) throw std::out_of_range("token not in vocabulary: " + tok);
        return it->second;
    }
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    int size() const { return static_cast<int>(tokens_.size()); }
    bool contains(const std::string& tok) const { return index_.count(tok) != 0; }

    void save(const std::string& path) const {
        std::ofstream os(path, std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write vocabulary file: " + path);
        for (const auto& t : tokens_) os << t << "\n";
    }
    static Vocabulary load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::runtime_error("cannot open vocabulary file: " + path);
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) tokens.push_back(line);
        return Vocabulary(std::move(tokens));
    }

private:
    std::vector<std::string> tokens_;
    std::map<std::string, int> index_;
};

// ---- route description ----

enum class Turn { none = 0, left = 1, right = 2, around = 3 };

struct RouteSegment {
    Turn turn = Turn::none;
    int run = 0;  // forward cells after the turn
};

struct Route {
    std::vector<RouteSegment> segments;
    int landmark_color = 0;  // 0 = none; else 1..9, marker adjacent to goal
};

// Collapses an oracle action sequence (rotations are never wasted, so only
// L..L or R..R runs occur) into (turn, run) segments.
inline Route route_from_actions(const std::vector<Action>& actions) {
    Route route;
    int net = 0;  // quarter turns, +1 right
    int run = 0;
    auto flush = [&]() {
        net = ((net % 4) + 4) % 4;
        Turn t = net == 0 ? Turn::none : net == 1 ? Turn::right : net == 2 ? Turn::around : Turn::left;
        if (t != Turn::none || run > 0) route.segments.push_back({t, run});
        net = 0;
        run = 0;
    };
    for (Action a : actions) {
        switch (a) {
            case Action::left:
                if (run > 0) flush();
                net -= 1;
                break;
            case Action::right:
                if (run > 0) flush();
                net += 1;
                break;
            case Action::forward: run += 1; break;
            case Action::stop: break;
        }
    }
    flush();
    return route;
}

enum class InstructionRegime { brief = 0, verbose = 1 };

struct Instruction {
    std::vector<int> tokens;
    int template_id = 0;  // 0 = brief, 1 = verbose
};

namespace detail {

inline void emit(std::vector<int>& out, const Vocabulary& v, std::initializer_list<const char*> words) {
    for (const char* w : words) out.push_back(v.id(w));
}

inline const char* turn_word(Turn t) {
    switch (t) {
        case Turn::left: return "left";
        case Turn::right: return "right";
        case Turn::around: return "around";
        default: return nullptr;
    }
}

}  // namespace detail

// Marker color mentioned in the instruction: a landmark on a cell adjacent
// (4-neighborhood) to the goal, lowest color id if several.
inline int goal_marker_color(const GridWorld& w) {
    int best = 0;
    for (const auto& l : w.landmarks) {
        int manhattan = std::abs(l.cell.x - w.goal.x) + std::abs(l.cell.y - w.goal.y);
        if (manhattan == 1 && (best == 0 || l.color < best)) best = l.color;
    }
    return best;
}

// Templated route description over the closed vocabulary. The brief regime
// writes the canonical form; the verbose regime paraphrases with seeded
// choices but keeps every route keyword decodable.
inline Instruction generate_instruction(const GridWorld& w, const std::vector<Action>& oracle_actions,
                                        const Vocabulary& v, InstructionRegime regime, Rng& rng) {
    Route route = route_from_actions(oracle_actions);
    route.landmark_color = goal_marker_color(w);
    Instruction instr;
    instr.template_id = regime == InstructionRegime::brief ? 0 : 1;
    auto num = [&](int n) {
        if (n < 0 || n >= static_cast<int>(number_words().size()))
            throw std::out_of_range("run length beyond number vocabulary: " + std::to_string(n));
        return v.id(number_words()[static_cast<std::size_t>(n)]);
    };

    if (regime == InstructionRegime::brief) {
        for (const auto& seg : route.segments) {
            if (const char* tw = detail::turn_word(seg.turn)) detail::emit(instr.tokens, v, {"turn", tw});
            if (seg.run > 0) {
                detail::emit(instr.tokens, v, {"go", "forward"});
                instr.tokens.push_back(num(seg.run));
            }
        }
        instr.tokens.push_back(v.id("stop"));
        if (route.landmark_color > 0) {
            detail::emit(instr.tokens, v, {"at", "the"});
            instr.tokens.push_back(v.id(color_names()[static_cast<std::size_t>(route.landmark_color - 1)]));
            instr.tokens.push_back(v.id("marker"));
        }
        return instr;
    }

    // verbose regime
    switch (rng.uniform_int(3)) {
        case 0: detail::emit(instr.tokens, v, {"please", "make", "your", "way", "along", "the", "room"}); break;
        case 1: detail::emit(instr.tokens, v, {"you", "should", "move", "along", "the", "room"}); break;
        default: detail::emit(instr.tokens, v, {"first", "you", "should", "go", "along", "the", "way"}); break;
    }
    bool first = true;
    for (const auto& seg : route.segments) {
        switch (rng.uniform_int(3)) {
            case 0: detail::emit(instr.tokens, v, {"then"}); break;
            case 1: detail::emit(instr.tokens, v, {"after", "that"}); break;
            default: detail::emit(instr.tokens, v, {"next"}); break;
        }
        (void)first;
        first = false;
        if (const char* tw = detail::turn_word(seg.turn)) {
            switch (rng.uniform_int(3)) {
                case 0: detail::emit(instr.tokens, v, {"turn", "to", "your", tw}); break;
                case 1: detail::emit(instr.tokens, v, {"make", "a", "turn", tw}); break;
                default: detail::emit(instr.tokens, v, {"rotate", "to", "your", tw}); break;
            }
        }
        if (seg.run > 0) {
            switch (rng.uniform_int(3)) {
                case 0: {
                    detail::emit(instr.tokens, v, {"walk", "forward"});
                    instr.tokens.push_back(num(seg.run));
                    detail::emit(instr.tokens, v, {"steps", "ahead"});
                    break;
                }
                case 1: {
                    detail::emit(instr.tokens, v, {"keep", "going", "forward", "for"});
                    instr.tokens.push_back(num(seg.run));
                    detail::emit(instr.tokens, v, {"cells"});
                    break;
                }
                default: {
                    detail::emit(instr.tokens, v, {"proceed", "straight", "forward"});
                    instr.tokens.push_back(num(seg.run));
                    detail::emit(instr.tokens, v, {"steps"});
                    break;
                }
            }
        }
    }
    detail::emit(instr.tokens, v, {"finally", "stop", "once", "you", "reach", "the", "destination"});
    if (route.landmark_color > 0) {
        detail::emit(instr.tokens, v, {"near", "the"});
        instr.tokens.push_back(v.id(color_names()[static_cast<std::size_t>(route.landmark_color - 1)]));
        detail::emit(instr.tokens, v, {"marker", "there"});
    }
    detail::emit(instr.tokens, v, {"and", "halt"});
    return instr;
}

// Inverse of the templates: scans for route keywords, ignoring filler.
// Both regimes decode to the same Route.
inline Route decode_instruction(const std::vector<int>& tokens, const Vocabulary& v) {
    Route route;
    Turn pending = Turn::none;
    bool saw_forward = false;
    auto flush_turn_only = [&]() {
        if (pending != Turn::none) {
            route.segments.push_back({pending, 0});
            pending = Turn::none;
        }
    };
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = v.token(tokens[i]);
        if (tok == "left") pending = Turn::left;
        else if (tok == "right") pending = Turn::right;
        else if (tok == "around") pending = Turn::around;
        else if (tok == "forward" || tok == "straight" || tok == "ahead") saw_forward = true;
        else if (tok == "stop" || tok == "halt") {
            flush_turn_only();
        } else if (tok == "marker") {
            // color word precedes "marker"
            for (std::size_t j = i; j-- > 0;) {
                const std::string& prev = v.token(tokens[j]);
                auto it = std::find(color_names().begin(), color_names().end(), prev);
                if (it != color_names().end()) {
                    route.landmark_color = static_cast<int>(it - color_names().begin()) + 1;
                    break;
                }
            }
        } else {
            auto it = std::find(number_words().begin(), number_words().end(), tok);
            if (it != number_words().end() && saw_forward) {
                route.segments.push_back({pending, static_cast<int>(it - number_words().begin())});
                pending = Turn::none;
                saw_forward = false;
            }
        }
    }
    return route;
}

inline std::string instruction_text(const Instruction& instr, const Vocabulary& v) {
    std::string out;
    for (std::size_t i = 0; i < instr.tokens.size(); ++i) {
        if (i) out += " ";
        out += v.token(instr.tokens[i]);
    }
    return out;
}

}  // namespace navmem::env
