#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace navmem::dagger {

// Oracle-probability schedule for the mixed policy: a constant beta, or the
// dynamic rule beta_t = 1 - alpha^(t/T) that starts fully on the learned
// policy and hands over to the oracle as the episode progresses.
struct MixedPolicySchedule {
    enum class Mode { constant, dynamic };
    Mode mode = Mode::dynamic;
    double beta = 0.25;   // constant mode
    double alpha = 0.5;   // dynamic mode decay rate

    void validate() const {
        if (mode == Mode::constant) {
            if (beta < 0.0 || beta > 1.0)
                throw std::invalid_argument("schedule: constant beta must lie in [0,1], got " + std::to_string(beta));
        } else {
            if (!(alpha > 0.0) || !(alpha < 1.0))
                throw std::invalid_argument("schedule: dynamic alpha must lie in (0,1), got " + std::to_string(alpha));
        }
    }

    static MixedPolicySchedule constant(double beta) {
        MixedPolicySchedule s;
        s.mode = Mode::constant;
        s.beta = beta;
        s.validate();
        return s;
    }

    static MixedPolicySchedule dynamic(double alpha) {
        MixedPolicySchedule s;
        s.mode = Mode::dynamic;
        s.alpha = alpha;
        s.validate();
        return s;
    }

    std::string label() const {
        return mode == Mode::constant ? "constant beta=" + std::to_string(beta)
                                      : "dynamic alpha=" + std::to_string(alpha);
    }
};

// Oracle probability at decision t of an episode whose ground-truth path
// takes T decisions.
inline double beta_at(const MixedPolicySchedule& schedule, int t, int total) {
    if (total < 1) throw std::invalid_argument("beta_at: T must be >= 1");
    if (t < 0) throw std::invalid_argument("beta_at: t must be >= 0");
    schedule.validate();
    if (schedule.mode == MixedPolicySchedule::Mode::constant) return schedule.beta;
    return 1.0 - std::pow(schedule.alpha, static_cast<double>(t) / static_cast<double>(total));
}

}  // namespace navmem::dagger
