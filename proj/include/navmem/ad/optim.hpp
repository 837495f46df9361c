#pragma once

#include "navmem/ad/tape.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace navmem::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam update on one parameter. `step` is 1-based.
inline void adam_step(Parameter& p, int step, const AdamConfig& cfg) {
    if (step < 1) throw std::invalid_argument("adam_step: step must be >= 1");
    double bc1 = 1.0 - std::pow(cfg.beta1, step);
    double bc2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t i = 0; i < p.value.data.size(); ++i) {
        double g = p.grad[i];
        p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
        p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
        double mhat = p.adam_m[i] / bc1;
        double vhat = p.adam_v[i] / bc2;
        p.value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

// Linear warmup to `peak` over warmup_ratio * total steps, then linear
// decay to zero. Peak is hit exactly at step == warmup_steps.
inline double lr_at(int step, int total_steps, double peak, double warmup_ratio) {
    if (total_steps < 1) throw std::invalid_argument("lr_at: total_steps must be >= 1");
    int warmup = static_cast<int>(warmup_ratio * total_steps);
    if (warmup < 1) warmup = 1;
    if (step <= warmup) return peak * static_cast<double>(step) / warmup;
    if (step >= total_steps) return 0.0;
    return peak * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

// Owns all trainable parameters of a model; names are unique and are the
// checkpoint record keys.
class ParamStore {
public:
    Parameter& create(const std::string& name, Tensor init) {
        if (by_name_.count(name)) throw std::invalid_argument("parameter already exists: " + name);
        params_.push_back(std::make_unique<Parameter>(name, std::move(init)));
        by_name_[name] = params_.back().get();
        return *params_.back();
    }

    Parameter& get(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw std::out_of_range("no such parameter: " + name);
        return *it->second;
    }

    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

    std::size_t total_scalars() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_)
            for (double& g : p->grad) g = 0.0;
    }

    void reset_moments() {
        for (auto& p : params_) {
            std::fill(p->adam_m.begin(), p->adam_m.end(), 0.0);
            std::fill(p->adam_v.begin(), p->adam_v.end(), 0.0);
        }
    }

    void adam_step_all(int step, const AdamConfig& cfg) {
        for (auto& p : params_) adam_step(*p, step, cfg);
    }

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, Parameter*> by_name_;
};

}  // namespace navmem::ad
