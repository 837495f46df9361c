#pragma once

#include "navmem/ad/optim.hpp"
#include "navmem/ad/tape.hpp"
#include "navmem/core/rng.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace testutil {

using navmem::ad::NodeId;
using navmem::ad::ParamStore;
using navmem::ad::Tape;
using navmem::ad::Tensor;

inline Tensor random_tensor(std::vector<int> shape, navmem::Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

// Central finite differences against the tape gradient. `build` constructs
// a scalar root from the given parameter nodes; it is re-invoked on a fresh
// tape for every perturbed evaluation, so it must be a pure function of the
// parameter values.
inline double fd_max_rel_err(const std::function<NodeId(Tape&, const std::vector<NodeId>&)>& build,
                             std::vector<Tensor> inits, double eps = 1e-5) {
    ParamStore store;
    std::vector<navmem::ad::Parameter*> params;
    for (std::size_t i = 0; i < inits.size(); ++i)
        params.push_back(&store.create("p" + std::to_string(i), inits[i]));

    auto eval = [&]() {
        Tape tape;
        std::vector<NodeId> nodes;
        for (auto* p : params) nodes.push_back(tape.param(*p));
        NodeId root = build(tape, nodes);
        return tape.val(root).data[0];
    };

    // analytic gradients
    Tape tape;
    std::vector<NodeId> nodes;
    for (auto* p : params) nodes.push_back(tape.param(*p));
    NodeId root = build(tape, nodes);
    tape.backward(root);
    store.zero_grads();
    tape.add_grads_to_params();

    double max_rel = 0.0;
    for (auto* p : params) {
        for (std::size_t j = 0; j < p->value.data.size(); ++j) {
            double saved = p->value.data[j];
            p->value.data[j] = saved + eps;
            double fp = eval();
            p->value.data[j] = saved - eps;
            double fm = eval();
            p->value.data[j] = saved;
            double numeric = (fp - fm) / (2.0 * eps);
            double analytic = p->grad[j];
            double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-3});
            max_rel = std::max(max_rel, std::fabs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

}  // namespace testutil
