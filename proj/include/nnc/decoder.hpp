#pragma once

// Sequence-level a-posteriori probabilities for the noisy nanopore channel.
//
// Two trellis recursions over (segment index l, sample n):
//   forward              log sum_s alpha_{t_m}(m, s)   (APP denominator)
//   conditional_forward  log alpha_{t_m}(m)            (APP numerator)
// Both keep only two rolling rows over l. Row l stores samples
// n = l .. t_m - m + l, which are the only ones that can still end in
// segment m at n = t_m.
//
// Transition weights: with TransitionWeights::full each duplication step adds
// log(1 - 1/E[K]) and each jump adds log p(s|s') - log E[K]. With
// TransitionWeights::uniform both are zero, which is the plain proportional
// recursion. Every segmentation of t_m samples into m runs carries the same
// product of these weights, so the two modes give the same APP; they differ
// only in the additive constant reported by log_joint_offset().

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nnc/channel.hpp"
#include "nnc/errors.hpp"
#include "nnc/log_sum_exp.hpp"
#include "nnc/pore_model.hpp"

namespace nnc {

// A Markov source over states: successors/predecessors in ascending index
// order and a constant log-probability on every edge.
template <typename G>
concept TransitionGraph = requires(const G& g, State s) {
    { g.num_states() } -> std::convertible_to<std::size_t>;
    { g.valid(s) } -> std::convertible_to<bool>;
    { g.is_successor(s, s) } -> std::convertible_to<bool>;
    { g.log_transition() } -> std::convertible_to<double>;
    g.successors(s);
    g.predecessors(s);
};

// Graphs whose states partition into groups with identical predecessor sets.
template <typename G>
concept GroupedTransitionGraph = TransitionGraph<G> && requires(const G& g, State s) {
    { g.num_predecessor_groups() } -> std::convertible_to<std::size_t>;
    { g.predecessor_group(s) } -> std::convertible_to<std::size_t>;
};

enum class TransitionWeights { full, uniform };

inline std::string to_string(TransitionWeights w) { return w == TransitionWeights::full ? "full" : "uniform"; }

inline TransitionWeights transition_weights_from_string(const std::string& s) {
    if (s == "full") return TransitionWeights::full;
    if (s == "uniform") return TransitionWeights::uniform;
    throw DomainError("unknown transition weights '" + s + "' (expected full or uniform)");
}

struct DecoderOptions {
    TransitionWeights weights = TransitionWeights::full;
};

// Reusable buffers. `peak_elements()` reports the largest number of doubles
// held at once, for checking the rolling-memory contract.
class DecoderWorkspace {
public:
    std::vector<double> current;
    std::vector<double> previous;
    std::vector<double> emission;
    std::vector<double> group;

    void note_usage() {
        const std::size_t now = current.capacity() + previous.capacity() + emission.capacity() + group.capacity();
        peak_ = std::max(peak_, now);
    }
    std::size_t peak_elements() const noexcept { return peak_; }
    void reset_peak() noexcept { peak_ = 0; }

private:
    std::size_t peak_ = 0;
};

struct DecodeOutput {
    double log_numerator = 0.0;
    double log_denominator = 0.0;
    double log_app = 0.0;
};

namespace detail {

struct StepWeights {
    double log_dup;
    double log_jump;
};

template <TransitionGraph G>
StepWeights step_weights(const G& graph, const NncParams& params, TransitionWeights mode) {
    if (mode == TransitionWeights::uniform) return {0.0, 0.0};
    const double p_dup = params.duplication_probability();
    return {p_dup > 0.0 ? std::log(p_dup) : kNegInf, graph.log_transition() - std::log(params.mean_duration)};
}

inline void check_signal(std::span<const double> y, std::size_t m) {
    if (m == 0) throw DomainError("state count must be positive");
    if (y.size() < m) {
        throw InfeasibleError("signal of " + std::to_string(y.size()) + " samples cannot cover " +
                              std::to_string(m) + " states");
    }
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i])) throw InputError("signal sample " + std::to_string(i) + " is not finite");
    }
}

inline double emission(double y, double level, double inv_two_sigma2) noexcept {
    const double d = y - level;
    return -(d * d) * inv_two_sigma2;
}

}  // namespace detail

// log sum_{s} alpha_{t_m}(m, s) with the constant C'/4^m dropped (and, under
// TransitionWeights::full, the per-step weights kept).
template <TransitionGraph G>
double forward(const G& graph, std::span<const double> levels, const NncParams& params, State q,
               std::span<const double> y, std::size_t m, const DecoderOptions& opts = {},
               DecoderWorkspace* workspace = nullptr) {
    params.validate();
    detail::check_signal(y, m);
    const std::size_t S = graph.num_states();
    if (levels.size() != S) throw LengthError("level table does not match the state space");
    if (!graph.valid(q)) throw DomainError("initial state out of range");

    DecoderWorkspace local;
    DecoderWorkspace& ws = workspace ? *workspace : local;
    const std::size_t T = y.size();
    const std::size_t W = T - m + 1;  // samples per row
    const auto [log_dup, log_jump] = detail::step_weights(graph, params, opts.weights);
    const double inv2s2 = 1.0 / (2.0 * params.sigma * params.sigma);

    // emission[n * S + s] for sample n (0-based).
    ws.emission.assign(T * S, 0.0);
    for (std::size_t n = 0; n < T; ++n) {
        for (std::size_t s = 0; s < S; ++s) ws.emission[n * S + s] = detail::emission(y[n], levels[s], inv2s2);
    }
    ws.current.assign(W * S, kNegInf);
    ws.previous.assign(W * S, kNegInf);

    // Jump term into each state at row offset k: log-sum over its
    // predecessors in the previous row. On grouped graphs the reduction runs
    // once per predecessor group; for the de Bruijn graph the c-th
    // predecessor of group g is c * groups + g, so it is a contiguous sweep.
    std::size_t groups = S;
    if constexpr (GroupedTransitionGraph<G>) groups = graph.num_predecessor_groups();
    ws.group.assign(groups + S, kNegInf);
    ws.note_usage();
    double* agg = ws.group.data();
    double* jump = ws.group.data() + groups;

    constexpr bool de_bruijn = std::same_as<G, StateSpace>;
    std::vector<State> representative(groups, 0);
    std::vector<std::size_t> group_index(S, 0);
    {
        std::vector<bool> seen(groups, false);
        for (State s = 0; s < S; ++s) {
            std::size_t g = s;
            if constexpr (GroupedTransitionGraph<G>) g = graph.predecessor_group(s);
            group_index[s] = g;
            if (!seen[g]) {
                seen[g] = true;
                representative[g] = s;
            }
        }
    }

    auto reduce_predecessors = [&](const double* prev_row) {
        if constexpr (de_bruijn) {
            const std::size_t H = groups;
            for (std::size_t g = 0; g < H; ++g) {
                double acc = lse(prev_row[g], prev_row[H + g]);
                acc = lse(acc, prev_row[2 * H + g]);
                agg[g] = lse(acc, prev_row[3 * H + g]);
            }
            for (std::size_t s = 0; s < S; ++s) jump[s] = agg[s >> 2] + log_jump;
        } else {
            for (std::size_t g = 0; g < groups; ++g) {
                double acc = kNegInf;
                for (State p : graph.predecessors(representative[g])) acc = lse(acc, prev_row[p]);
                agg[g] = acc;
            }
            for (std::size_t s = 0; s < S; ++s) jump[s] = agg[group_index[s]] + log_jump;
        }
    };

    // Row 1: jumps out of the virtual start (l = 0, n = 0, state q).
    {
        double* cur = ws.current.data();
        for (State s = 0; s < S; ++s) {
            if (!graph.is_successor(q, s)) continue;
            double v = lse(kNegInf, 0.0 + log_jump) + ws.emission[s];
            cur[s] = v;
            for (std::size_t k = 1; k < W; ++k) {
                v = lse(v + log_dup, kNegInf) + ws.emission[k * S + s];
                cur[k * S + s] = v;
            }
        }
    }

    for (std::size_t l = 2; l <= m; ++l) {
        std::swap(ws.current, ws.previous);
        const double* prev = ws.previous.data();
        double* cur = ws.current.data();
        for (std::size_t k = 0; k < W; ++k) {
            const std::size_t n = k + l - 1;  // 0-based sample index
            reduce_predecessors(prev + k * S);
            const double* em = ws.emission.data() + n * S;
            double* row = cur + k * S;
            if (k == 0) {
                for (std::size_t s = 0; s < S; ++s) row[s] = lse(kNegInf, jump[s]) + em[s];
            } else {
                const double* left = cur + (k - 1) * S;
                for (std::size_t s = 0; s < S; ++s) row[s] = lse(left[s] + log_dup, jump[s]) + em[s];
            }
        }
    }

    const double* last = ws.current.data() + (W - 1) * S;
    double total = kNegInf;
    for (State s = 0; s < S; ++s) total = lse(total, last[s]);
    return total;
}

// log alpha_{t_m}(m) for the given state path, constants dropped as in forward().
template <TransitionGraph G>
double conditional_forward(const G& graph, std::span<const double> levels, const NncParams& params,
                           std::span<const State> states, std::span<const double> y, const DecoderOptions& opts = {},
                           DecoderWorkspace* workspace = nullptr) {
    params.validate();
    const std::size_t m = states.size();
    detail::check_signal(y, m);
    if (levels.size() != graph.num_states()) throw LengthError("level table does not match the state space");
    for (std::size_t i = 0; i < m; ++i) {
        if (!graph.valid(states[i])) throw DomainError("state " + std::to_string(i) + " out of range");
        if (i > 0 && !graph.is_successor(states[i - 1], states[i])) {
            throw DomainError("states " + std::to_string(i - 1) + " -> " + std::to_string(i) +
                              " are not connected in the state graph");
        }
    }

    DecoderWorkspace local;
    DecoderWorkspace& ws = workspace ? *workspace : local;
    const std::size_t T = y.size();
    const std::size_t W = T - m + 1;
    const auto [log_dup, log_jump] = detail::step_weights(graph, params, opts.weights);
    const double inv2s2 = 1.0 / (2.0 * params.sigma * params.sigma);

    ws.current.assign(W, kNegInf);
    ws.previous.assign(W, kNegInf);
    ws.note_usage();

    {
        const double level = levels[states[0]];
        double v = lse(kNegInf, 0.0 + log_jump) + detail::emission(y[0], level, inv2s2);
        ws.current[0] = v;
        for (std::size_t k = 1; k < W; ++k) {
            v = lse(v + log_dup, kNegInf) + detail::emission(y[k], level, inv2s2);
            ws.current[k] = v;
        }
    }
    for (std::size_t l = 2; l <= m; ++l) {
        std::swap(ws.current, ws.previous);
        const double level = levels[states[l - 1]];
        for (std::size_t k = 0; k < W; ++k) {
            const std::size_t n = k + l - 1;
            const double stay = k > 0 ? ws.current[k - 1] + log_dup : kNegInf;
            ws.current[k] = lse(stay, ws.previous[k] + log_jump) + detail::emission(y[n], level, inv2s2);
        }
    }
    return ws.current[W - 1];
}

// log V(s | y, q) = conditional_forward - forward.
template <TransitionGraph G>
DecodeOutput log_app(const G& graph, std::span<const double> levels, const NncParams& params,
                     std::span<const State> states, std::span<const double> y, State q,
                     const DecoderOptions& opts = {}, DecoderWorkspace* workspace = nullptr) {
    if (states.empty()) throw DomainError("empty state path");
    if (!graph.valid(q) || !graph.is_successor(q, states[0])) {
        throw DomainError("first state is not a successor of the initial state");
    }
    DecodeOutput out;
    out.log_numerator = conditional_forward(graph, levels, params, states, y, opts, workspace);
    out.log_denominator = forward(graph, levels, params, q, y, states.size(), opts, workspace);
    if (out.log_denominator == kNegInf) {
        throw InfeasibleError("signal has zero likelihood under every input path");
    }
    out.log_app = out.log_numerator - out.log_denominator;
    return out;
}

// Amount to add to forward()/conditional_forward() to obtain
// log sum_s U(s|q) W(y|s,q) (resp. log U(s|q) W(y|s,q)) with the source
// U(s|q) = exp(m * log_transition).
template <TransitionGraph G>
double log_joint_offset(const G& graph, const NncParams& params, std::size_t m, std::size_t t,
                        TransitionWeights mode) {
    const double gaussian = -0.5 * static_cast<double>(t) *
                            std::log(2.0 * std::numbers::pi * params.sigma * params.sigma);
    if (mode == TransitionWeights::full) return gaussian;
    return log_channel_constant(params, m, t) + static_cast<double>(m) * graph.log_transition();
}

// PoreModel conveniences over the de Bruijn graph.
inline double forward(const PoreModel& model, const NncParams& params, State q, std::span<const double> y,
                      std::size_t m, const DecoderOptions& opts = {}, DecoderWorkspace* ws = nullptr) {
    return forward(model.space(), model.levels(), params, q, y, m, opts, ws);
}

inline double conditional_forward(const PoreModel& model, const NncParams& params, std::span<const State> states,
                                  std::span<const double> y, const DecoderOptions& opts = {},
                                  DecoderWorkspace* ws = nullptr) {
    return conditional_forward(model.space(), model.levels(), params, states, y, opts, ws);
}

inline DecodeOutput log_app(const PoreModel& model, const NncParams& params, std::span<const State> states,
                            std::span<const double> y, State q, const DecoderOptions& opts = {},
                            DecoderWorkspace* ws = nullptr) {
    return log_app(model.space(), model.levels(), params, states, y, q, opts, ws);
}

}  // namespace nnc
