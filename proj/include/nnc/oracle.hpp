#pragma once

// Randomized cross-checks of the fast algorithms against exhaustive
// enumeration on tiny instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "nnc/channel.hpp"
#include "nnc/decoder.hpp"
#include "nnc/dtw.hpp"
#include "nnc/pore_model.hpp"
#include "nnc/random.hpp"

namespace nnc {

struct OracleReport {
    std::size_t fixtures = 0;
    double max_forward_error = 0.0;
    double max_conditional_error = 0.0;
    double max_dtw_error = 0.0;      // |dtw distance - exhaustive minimum|
    double max_backtrace_error = 0.0; // relative
    double max_posterior_error = 0.0; // |sum of APPs - 1|

    bool passed(double tol = 1e-9) const {
        return max_forward_error <= tol && max_conditional_error <= tol && max_dtw_error == 0.0 &&
               max_backtrace_error <= tol && max_posterior_error <= tol;
    }
};

// Calls fn on every de Bruijn path of length m whose first state follows q.
inline void for_each_path(const StateSpace& space, State q, std::size_t m,
                          const std::function<void(const std::vector<State>&)>& fn) {
    std::vector<State> path(m);
    std::function<void(std::size_t, State)> rec = [&](std::size_t i, State prev) {
        for (State s : space.successors(prev)) {
            path[i] = s;
            if (i + 1 == m) {
                fn(path);
            } else {
                rec(i + 1, s);
            }
        }
    };
    rec(0, q);
}

inline OracleReport run_oracle_checks(std::size_t fixtures, std::uint64_t seed,
                                      TransitionWeights weights = TransitionWeights::full) {
    OracleReport rep;
    Rng rng(seed);
    std::uniform_int_distribution<int> tau_pick(1, 2);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigmas[] = {0.3, 0.5, 1.0};
    const double durations[] = {1.5, 2.0, 5.0};
    for (std::size_t f = 0; f < fixtures; ++f) {
        const unsigned tau = static_cast<unsigned>(tau_pick(rng));
        const auto model = synth_pore_model(tau, rng());
        const auto& space = model.space();
        const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
        const std::size_t t = std::uniform_int_distribution<std::size_t>(m, 8)(rng);
        const NncParams params{durations[rng() % 3], sigmas[rng() % 3]};
        const State q = static_cast<State>(rng() % space.num_states());
        std::vector<double> y(t);
        for (auto& v : y) v = normal(rng);

        // Forward vs the exhaustive sum over all paths.
        double brute_total = kNegInf;
        std::vector<State> some_path;
        for_each_path(space, q, m, [&](const std::vector<State>& path) {
            const double lw = log_likelihood_bruteforce(params, model.levels_of(path), y) +
                              static_cast<double>(m) * space.log_transition();
            brute_total = lse(brute_total, lw);
            if (some_path.empty()) some_path = path;
        });
        const DecoderOptions opts{weights};
        const double offset = log_joint_offset(space, params, m, t, weights);
        const double fwd = forward(model, params, q, y, m, opts) + offset;
        rep.max_forward_error = std::max(rep.max_forward_error, std::abs(fwd - brute_total));

        // Conditional forward for one path.
        const double cond = conditional_forward(model, params, some_path, y, opts) + offset;
        const double brute_path = log_likelihood_bruteforce(params, model.levels_of(some_path), y) +
                                  static_cast<double>(m) * space.log_transition();
        rep.max_conditional_error = std::max(rep.max_conditional_error, std::abs(cond - brute_path));

        // DTW vs the exhaustive minimum, on its own slightly larger instance.
        const std::size_t dm = std::uniform_int_distribution<std::size_t>(1, 5)(rng);
        const std::size_t dt = std::uniform_int_distribution<std::size_t>(dm, 10)(rng);
        std::vector<double> x(dm), yd(dt);
        for (auto& v : x) v = normal(rng);
        for (auto& v : yd) v = normal(rng);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& seg : enumerate_segmentations(dm, dt)) best = std::min(best, stretched_squared_error(x, yd, seg));
        const auto dtw = dtw_align(x, yd);
        rep.max_dtw_error = std::max(rep.max_dtw_error, std::abs(dtw.distance - best));
        const double rebuilt = stretched_squared_error(x, yd, dtw.segmentation);
        const double rel = std::abs(rebuilt - dtw.distance) / std::max(1e-300, std::abs(dtw.distance));
        rep.max_backtrace_error = std::max(rep.max_backtrace_error, dtw.distance == 0.0 ? rebuilt : rel);

        // Posterior normalization for tau = 1, m <= 3.
        if (tau == 1 && m <= 3) {
            double total = 0.0;
            for_each_path(space, q, m, [&](const std::vector<State>& path) {
                total += std::exp(log_app(model, params, path, y, q, opts).log_app);
            });
            rep.max_posterior_error = std::max(rep.max_posterior_error, std::abs(total - 1.0));
        }
        ++rep.fixtures;
    }
    return rep;
}

}  // namespace nnc
