#pragma once

// Duplication-only dynamic time warping: the maximum-likelihood segmentation
// of a signal against a level sequence, and DTW-based chopping of a long read
// into fixed-length blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnc/channel.hpp"
#include "nnc/errors.hpp"
#include "nnc/pore_model.hpp"

namespace nnc {

struct DtwResult {
    double distance = 0.0;  // squared-Euclidean
    Segmentation segmentation;
    double normalized = 0.0;  // sqrt(distance / len(y))
};

struct DtwOptions {
    // Keep only cells with |t - l * len(y)/len(x)| <= band_width. Unset = exact.
    std::optional<double> band_width;
};

// Band used for long reads (more than 5000 states): 6 sqrt(m) sd(K), where
// sd(K) = sqrt(E[K](E[K] - 1)) for the geometric duration law.
inline DtwOptions default_dtw_options(std::size_t m, double mean_duration) {
    DtwOptions opts;
    if (m > 5000) {
        const double sd = std::sqrt(std::max(0.0, mean_duration * (mean_duration - 1.0)));
        opts.band_width = std::max(6.0 * std::sqrt(static_cast<double>(m)) * sd, mean_duration + 1.0);
    }
    return opts;
}

namespace detail {

// One bit per visited cell: 1 = jump from (l-1, t-1), 0 = stay at (l, t-1).
class ChoiceMatrix {
public:
    explicit ChoiceMatrix(std::size_t columns) : lo_(columns + 1), offset_(columns + 2, 0) {}

    void begin_column(std::size_t t, std::size_t lo, std::size_t hi) {
        lo_[t] = lo;
        offset_[t + 1] = offset_[t] + (hi >= lo ? hi - lo + 1 : 0);
        words_.resize((offset_[t + 1] + 63) / 64, 0);
    }
    void set_jump(std::size_t t, std::size_t l) {
        const std::size_t bit = offset_[t] + (l - lo_[t]);
        words_[bit / 64] |= std::uint64_t{1} << (bit % 64);
    }
    bool jump(std::size_t t, std::size_t l) const {
        const std::size_t bit = offset_[t] + (l - lo_[t]);
        return (words_[bit / 64] >> (bit % 64)) & 1u;
    }
    std::size_t bytes() const noexcept { return words_.size() * sizeof(std::uint64_t); }

private:
    std::vector<std::size_t> lo_;
    std::vector<std::size_t> offset_;
    std::vector<std::uint64_t> words_;
};

}  // namespace detail

// D(l, t) = (y_t - x_l)^2 + min{D(l, t-1), D(l-1, t-1)}. Ties keep the
// duplication branch, so the backtrace stays on each state for as long as it
// can: among optimal segmentations the one with the earliest jump times wins.
inline DtwResult dtw_align(std::span<const double> x, std::span<const double> y, const DtwOptions& opts = {}) {
    const std::size_t m = x.size();
    const std::size_t T = y.size();
    if (m == 0 || T < m) {
        throw InfeasibleError("DTW needs len(y) >= len(x) >= 1, got len(x) = " + std::to_string(m) +
                              ", len(y) = " + std::to_string(T));
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    const double slope = static_cast<double>(T) / static_cast<double>(m);

    // D[l] holds column t-1 on entry to step t; D[0] is the virtual start.
    std::vector<double> D(m + 1, inf);
    D[0] = 0.0;
    detail::ChoiceMatrix choice(T);
    std::size_t prev_lo = 1, prev_hi = 0;

    for (std::size_t t = 1; t <= T; ++t) {
        std::size_t lo = (t + m > T) ? t + m - T : 1;
        std::size_t hi = std::min(t, m);
        if (opts.band_width) {
            const double w = *opts.band_width;
            const double band_lo = std::ceil((static_cast<double>(t) - w) / slope);
            const double band_hi = std::floor((static_cast<double>(t) + w) / slope);
            lo = std::max(lo, static_cast<std::size_t>(std::max(1.0, band_lo)));
            hi = std::min(hi, static_cast<std::size_t>(std::max(0.0, band_hi)));
        }
        choice.begin_column(t, lo, hi);
        for (std::size_t l = hi; l >= lo && l >= 1; --l) {
            const double stay = D[l];
            const double jump = D[l - 1];
            const double d = y[t - 1] - x[l - 1];
            if (stay <= jump) {
                D[l] = d * d + stay;
            } else {
                D[l] = d * d + jump;
                choice.set_jump(t, l);
            }
        }
        // Cells that left the feasible window.
        for (std::size_t l = prev_lo; l < lo && l <= prev_hi; ++l) D[l] = inf;
        for (std::size_t l = std::max(hi + 1, prev_lo); l <= prev_hi; ++l) D[l] = inf;
        D[0] = inf;
        prev_lo = lo;
        prev_hi = hi;
    }

    if (!(D[m] < inf)) throw InfeasibleError("no DTW path within the band");

    DtwResult result;
    result.distance = D[m];
    result.normalized = std::sqrt(result.distance / static_cast<double>(T));
    auto& jt = result.segmentation.jump_times;
    jt.assign(m, 0);
    jt[m - 1] = T;
    std::size_t l = m;
    for (std::size_t t = T; t >= 1 && l >= 1; --t) {
        if (choice.jump(t, l)) {
            if (l > 1) jt[l - 2] = t - 1;
            --l;
        }
    }
    return result;
}

inline double normalized_dtw(std::span<const double> x, std::span<const double> y, const DtwOptions& opts = {}) {
    return dtw_align(x, y, opts).normalized;
}

// ||y - stretch(x, seg)||^2 accumulated in sample order.
inline double stretched_squared_error(std::span<const double> x, std::span<const double> y,
                                      const Segmentation& seg) {
    if (seg.size() != x.size() || seg.total() != y.size() || !seg.valid()) {
        throw DomainError("segmentation does not match the level and signal lengths");
    }
    double sq = 0.0;
    std::size_t t = 0;
    for (std::size_t l = 0; l < x.size(); ++l) {
        for (; t < seg.jump_times[l]; ++t) {
            const double d = y[t] - x[l];
            sq += d * d;
        }
    }
    return sq;
}

// A fixed-length piece of a read: m states, the samples DTW assigned to them,
// and the state immediately preceding them as side information.
struct Block {
    std::vector<State> states;
    std::vector<double> signal;
    State initial_state = 0;
    std::string read_id;
    std::int64_t channel_id = 0;
    std::size_t block_index = 0;  // 0-based within the read
    double mean_duration = 0.0;   // per-read E[K] estimate used to decode it

    friend bool operator==(const Block&, const Block&) = default;
};

// Blocks from a known segmentation of the whole read. Block j (0-based) holds
// states s[jm+1 .. jm+m], q = s[jm], and samples (t[jm], t[jm+m]]; the first
// state's run and the tail past the last full block are dropped.
inline std::vector<Block> chop_with_segmentation(std::span<const State> states, std::span<const double> signal,
                                                 const Segmentation& seg, std::size_t m) {
    if (m == 0) throw DomainError("block length must be positive");
    if (states.size() < m + 1) {
        throw LengthError("read has " + std::to_string(states.size()) + " states, need at least " +
                          std::to_string(m + 1) + " to form one block");
    }
    if (seg.size() != states.size() || seg.total() != signal.size() || !seg.valid()) {
        throw DomainError("segmentation does not match the read");
    }
    const std::size_t L = (states.size() - 1) / m;
    std::vector<Block> blocks;
    blocks.reserve(L);
    for (std::size_t j = 0; j < L; ++j) {
        Block b;
        b.block_index = j;
        b.initial_state = states[j * m];
        b.states.assign(states.begin() + static_cast<std::ptrdiff_t>(j * m + 1),
                        states.begin() + static_cast<std::ptrdiff_t>(j * m + m + 1));
        const auto begin = seg.jump_times[j * m];
        const auto end = seg.jump_times[j * m + m];
        b.signal.assign(signal.begin() + static_cast<std::ptrdiff_t>(begin),
                        signal.begin() + static_cast<std::ptrdiff_t>(end));
        blocks.push_back(std::move(b));
    }
    return blocks;
}

struct ChopResult {
    DtwResult alignment;
    std::vector<Block> blocks;
};

// Aligns the whole read with DTW and cuts at every m-th estimated jump time.
inline ChopResult chop_blocks(const PoreModel& model, std::span<const State> states, std::span<const double> signal,
                              std::size_t m, const DtwOptions& opts = {}) {
    if (m == 0) throw DomainError("block length must be positive");
    if (states.size() < m + 1) {
        throw LengthError("read has " + std::to_string(states.size()) + " states, need at least " +
                          std::to_string(m + 1) + " to form one block");
    }
    ChopResult out;
    const auto levels = model.levels_of(states);
    out.alignment = dtw_align(levels, signal, opts);
    out.blocks = chop_with_segmentation(states, signal, out.alignment.segmentation, m);
    return out;
}

}  // namespace nnc
