#pragma once

// The noisy nanopore channel: geometric sample duplications of the level
// sequence followed by additive white Gaussian noise. Includes a simulator
// and brute-force likelihood/segmentation oracles for small instances.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnc/errors.hpp"
#include "nnc/log_sum_exp.hpp"
#include "nnc/pore_model.hpp"
#include "nnc/random.hpp"

namespace nnc {

struct NncParams {
    double mean_duration = 10.0;  // E[K], samples per state
    double sigma = 0.5;           // noise standard deviation, normalized units

    // Probability that a sample repeats the current state: 1 - 1/E[K].
    double duplication_probability() const noexcept { return 1.0 - 1.0 / mean_duration; }

    void validate() const {
        if (!(mean_duration >= 1.0) || !std::isfinite(mean_duration)) {
            throw DomainError("mean duration must be >= 1, got " + std::to_string(mean_duration));
        }
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw DomainError("sigma must be > 0, got " + std::to_string(sigma));
        }
    }

    friend bool operator==(const NncParams&, const NncParams&) = default;
};

// Strictly increasing jump times t_1 < ... < t_m (1-based sample counts);
// t_m is the number of samples segmented.
struct Segmentation {
    std::vector<std::size_t> jump_times;

    std::size_t size() const noexcept { return jump_times.size(); }
    std::size_t total() const noexcept { return jump_times.empty() ? 0 : jump_times.back(); }

    std::vector<std::size_t> durations() const {
        std::vector<std::size_t> k(jump_times.size());
        std::size_t prev = 0;
        for (std::size_t i = 0; i < jump_times.size(); ++i) {
            k[i] = jump_times[i] - prev;
            prev = jump_times[i];
        }
        return k;
    }

    bool valid() const noexcept {
        std::size_t prev = 0;
        for (auto t : jump_times) {
            if (t <= prev) return false;
            prev = t;
        }
        return true;
    }

    static Segmentation from_durations(std::span<const std::size_t> durations) {
        Segmentation seg;
        seg.jump_times.reserve(durations.size());
        std::size_t t = 0;
        for (auto k : durations) {
            if (k < 1) throw DomainError("duration must be >= 1");
            t += k;
            seg.jump_times.push_back(t);
        }
        return seg;
    }

    friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

// Repeats values[i] durations[i] times, in order.
template <typename T>
std::vector<T> stretch(std::span<const T> values, std::span<const std::size_t> durations) {
    if (values.size() != durations.size()) {
        throw LengthError("stretch: " + std::to_string(values.size()) + " values but " +
                          std::to_string(durations.size()) + " durations");
    }
    std::size_t total = 0;
    for (auto k : durations) {
        if (k < 1) throw DomainError("stretch: duration must be >= 1");
        total += k;
    }
    std::vector<T> out;
    out.reserve(total);
    for (std::size_t i = 0; i < values.size(); ++i) out.insert(out.end(), durations[i], values[i]);
    return out;
}

template <typename T>
std::vector<T> stretch(const std::vector<T>& values, const std::vector<std::size_t>& durations) {
    return stretch(std::span<const T>(values), std::span<const std::size_t>(durations));
}

// Geometric durations on {1, 2, ...} with mean E[K], by inverse CDF:
// k = 1 + floor(ln U / ln(1 - 1/E[K])), U ~ Uniform(0, 1].
inline std::vector<std::size_t> sample_durations(std::size_t m, const NncParams& params, Rng& rng) {
    params.validate();
    std::vector<std::size_t> k(m, 1);
    const double p_dup = params.duplication_probability();
    if (p_dup <= 0.0) return k;
    const double log_dup = std::log(p_dup);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (auto& d : k) {
        const double u = 1.0 - uniform(rng);  // (0, 1]
        d = 1 + static_cast<std::size_t>(std::floor(std::log(u) / log_dup));
    }
    return k;
}

struct SimulatedRead {
    std::vector<State> states;
    std::vector<double> signal;
    Segmentation truth;
    NncParams params;
    State initial_state = 0;
    std::optional<std::vector<double>> noise;  // only when requested

    friend bool operator==(const SimulatedRead&, const SimulatedRead&) = default;
};

struct SimulateOptions {
    bool record_noise = false;
};

// Draws the initial state q uniformly among the predecessors of s_1, then
// durations, then the noise, all from `rng` in that order.
inline SimulatedRead simulate_read(const PoreModel& model, std::span<const Base> bases, const NncParams& params,
                                   Rng& rng, SimulateOptions options = {}) {
    params.validate();
    SimulatedRead read;
    read.params = params;
    read.states = model.space().states_from_bases(bases);
    std::uniform_int_distribution<int> pick(0, 3);
    read.initial_state = model.space().predecessors(read.states.front())[static_cast<std::size_t>(pick(rng))];
    const auto durations = sample_durations(read.states.size(), params, rng);
    read.truth = Segmentation::from_durations(durations);
    read.signal = stretch(model.levels_of(read.states), durations);
    std::normal_distribution<double> normal(0.0, params.sigma);
    std::vector<double> noise(read.signal.size());
    for (auto& n : noise) n = normal(rng);
    for (std::size_t i = 0; i < noise.size(); ++i) read.signal[i] += noise[i];
    if (options.record_noise) read.noise = std::move(noise);
    return read;
}

inline double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
           std::lgamma(static_cast<double>(n - k) + 1);
}

inline constexpr std::size_t kMaxEnumeratedSegmentations = 10'000'000;

// Every segmentation of `total` samples into m runs, in lexicographic order of
// jump times. C(total-1, m-1) entries.
inline std::vector<Segmentation> enumerate_segmentations(std::size_t m, std::size_t total,
                                                         std::size_t limit = kMaxEnumeratedSegmentations) {
    if (m == 0 || total < m) {
        throw InfeasibleError("no segmentation of " + std::to_string(total) + " samples into " +
                              std::to_string(m) + " runs");
    }
    const double log_count = log_binomial(total - 1, m - 1);
    if (log_count > std::log(static_cast<double>(limit)) + 1e-9) {
        throw CapacityError("segmentation enumeration exceeds the limit of " + std::to_string(limit));
    }
    std::vector<Segmentation> out;
    out.reserve(static_cast<std::size_t>(std::llround(std::exp(log_count))));
    // Choose m-1 cut points from {1, ..., total-1}.
    std::vector<std::size_t> cuts(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) cuts[i] = i + 1;
    while (true) {
        Segmentation seg;
        seg.jump_times = cuts;
        seg.jump_times.push_back(total);
        out.push_back(std::move(seg));
        // Advance to the next combination.
        std::size_t i = cuts.size();
        while (i > 0 && cuts[i - 1] == total - 1 - (cuts.size() - i)) --i;
        if (i == 0) break;
        ++cuts[i - 1];
        for (std::size_t j = i; j < cuts.size(); ++j) cuts[j] = cuts[j - 1] + 1;
    }
    return out;
}

// log C' = -(t/2) log(2 pi sigma^2) + (t - m) log(1 - 1/E[K]) + m log(1/E[K]).
// At E[K] = 1 the duplication factor is 0^(t-m): 1 when t = m, else -inf.
inline double log_channel_constant(const NncParams& params, std::size_t m, std::size_t t) {
    const double sigma2 = params.sigma * params.sigma;
    double value = -0.5 * static_cast<double>(t) * std::log(2.0 * std::numbers::pi * sigma2);
    value += static_cast<double>(m) * -std::log(params.mean_duration);
    const double p_dup = params.duplication_probability();
    if (t > m) value += p_dup > 0.0 ? static_cast<double>(t - m) * std::log(p_dup) : kNegInf;
    return value;
}

// -||y - stretch(x, seg)||^2 / (2 sigma^2), summed in sample order.
inline double log_gaussian_kernel(std::span<const double> x, std::span<const double> y, const Segmentation& seg,
                                  double sigma) {
    double sq = 0.0;
    std::size_t t = 0;
    for (std::size_t l = 0; l < x.size(); ++l) {
        for (; t < seg.jump_times[l]; ++t) {
            const double d = y[t] - x[l];
            sq += d * d;
        }
    }
    return -sq / (2.0 * sigma * sigma);
}

// log W(y | s, q) by explicit enumeration of every segmentation. Oracle for
// the decoder; only feasible for tiny m and t.
inline double log_likelihood_bruteforce(const NncParams& params, std::span<const double> levels,
                                        std::span<const double> signal) {
    params.validate();
    const auto segs = enumerate_segmentations(levels.size(), signal.size());
    const double log_c = log_channel_constant(params, levels.size(), signal.size());
    if (log_c == kNegInf) return kNegInf;
    double acc = kNegInf;
    for (const auto& seg : segs) acc = lse(acc, log_gaussian_kernel(levels, signal, seg, params.sigma));
    return log_c + acc;
}

}  // namespace nnc
