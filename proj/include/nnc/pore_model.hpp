#pragma once

// Base alphabet, the de Bruijn state space over tau-mers, and the pore model
// (tau-mer -> mean current level lookup).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nnc/errors.hpp"
#include "nnc/random.hpp"

namespace nnc {

// Canonical order A, T, C, G -> 0..3.
enum class Base : std::uint8_t { A = 0, T = 1, C = 2, G = 3 };

inline constexpr std::array<char, 4> kBaseSymbols{'A', 'T', 'C', 'G'};

constexpr char to_char(Base b) noexcept { return kBaseSymbols[static_cast<std::size_t>(b)]; }

constexpr std::optional<Base> base_from_char(char c) noexcept {
    switch (c) {
        case 'A': case 'a': return Base::A;
        case 'T': case 't': return Base::T;
        case 'C': case 'c': return Base::C;
        case 'G': case 'g': return Base::G;
        default: return std::nullopt;
    }
}

inline std::vector<Base> parse_bases(std::string_view text) {
    std::vector<Base> out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        auto b = base_from_char(text[i]);
        if (!b) {
            throw DomainError("invalid base '" + std::string(1, text[i]) + "' at position " +
                              std::to_string(i));
        }
        out.push_back(*b);
    }
    return out;
}

inline std::string bases_to_string(std::span<const Base> bases) {
    std::string s;
    s.reserve(bases.size());
    for (Base b : bases) s.push_back(to_char(b));
    return s;
}

using State = std::uint32_t;

inline constexpr unsigned kMaxTau = 8;

// De Bruijn graph on 4^tau tau-mers. A state index is the radix-4 code of its
// tau-mer with the oldest base most significant, so a successor is a
// shift-and-mask and the four predecessors of `s` are `c * 4^(tau-1) + (s >> 2)`.
class StateSpace {
public:
    explicit StateSpace(unsigned tau) : tau_(tau) {
        if (tau < 1) throw DomainError("tau must be at least 1");
        if (tau > kMaxTau) {
            throw DomainError("tau = " + std::to_string(tau) + " exceeds the supported maximum of " +
                              std::to_string(kMaxTau));
        }
        num_states_ = std::size_t{1} << (2 * tau);
        high_ = static_cast<State>(num_states_ >> 2);
    }

    unsigned tau() const noexcept { return tau_; }
    std::size_t num_states() const noexcept { return num_states_; }
    bool valid(State s) const noexcept { return s < num_states_; }

    std::array<State, 4> successors(State s) const noexcept {
        const State base = static_cast<State>((s % high_) << 2);
        return {base, base + 1, base + 2, base + 3};
    }

    // Ascending state index order.
    std::array<State, 4> predecessors(State s) const noexcept {
        const State low = s >> 2;
        return {low, high_ + low, 2 * high_ + low, 3 * high_ + low};
    }

    bool is_successor(State from, State to) const noexcept { return (to >> 2) == (from % high_); }

    // States sharing a group have identical predecessor sets; the decoder
    // reduces over each group's predecessors once.
    std::size_t num_predecessor_groups() const noexcept { return high_; }
    std::size_t predecessor_group(State s) const noexcept { return s >> 2; }

    // log p(s | s') on a de Bruijn edge under the uniform i.i.d. base source.
    double log_transition() const noexcept { return -std::log(4.0); }

    State kmer_to_state(std::span<const Base> kmer) const {
        if (kmer.size() != tau_) {
            throw LengthError("k-mer length " + std::to_string(kmer.size()) + " does not match tau = " +
                              std::to_string(tau_));
        }
        State s = 0;
        for (Base b : kmer) s = (s << 2) | static_cast<State>(b);
        return s;
    }

    std::vector<Base> state_to_kmer(State s) const {
        std::vector<Base> kmer(tau_);
        for (unsigned i = tau_; i-- > 0;) {
            kmer[i] = static_cast<Base>(s & 3u);
            s >>= 2;
        }
        return kmer;
    }

    std::string state_to_string(State s) const { return bases_to_string(state_to_kmer(s)); }

    // Sliding window of length tau: m = n - tau + 1 states.
    std::vector<State> states_from_bases(std::span<const Base> bases) const {
        if (bases.size() < tau_) {
            throw LengthError("need at least tau = " + std::to_string(tau_) + " bases, got " +
                              std::to_string(bases.size()));
        }
        std::vector<State> states;
        states.reserve(bases.size() - tau_ + 1);
        const State mask = static_cast<State>(num_states_ - 1);
        State s = kmer_to_state(bases.first(tau_));
        states.push_back(s);
        for (std::size_t i = tau_; i < bases.size(); ++i) {
            s = ((s << 2) | static_cast<State>(bases[i])) & mask;
            states.push_back(s);
        }
        return states;
    }

    // True when consecutive entries are de Bruijn successors.
    bool is_path(std::span<const State> states) const noexcept {
        for (std::size_t i = 0; i < states.size(); ++i) {
            if (!valid(states[i])) return false;
            if (i > 0 && !is_successor(states[i - 1], states[i])) return false;
        }
        return true;
    }

    friend bool operator==(const StateSpace&, const StateSpace&) = default;

private:
    unsigned tau_;
    std::size_t num_states_;
    State high_;
};

class PoreModel {
public:
    PoreModel(StateSpace space, std::vector<double> levels) : space_(space), levels_(std::move(levels)) {
        if (levels_.size() != space_.num_states()) {
            throw LengthError("pore model needs " + std::to_string(space_.num_states()) + " levels, got " +
                              std::to_string(levels_.size()));
        }
        for (double v : levels_) {
            if (!std::isfinite(v)) throw InputError("pore model level is not finite");
        }
    }

    const StateSpace& space() const noexcept { return space_; }
    unsigned tau() const noexcept { return space_.tau(); }
    std::size_t num_states() const noexcept { return space_.num_states(); }
    double level(State s) const noexcept { return levels_[s]; }
    std::span<const double> levels() const noexcept { return levels_; }

    std::vector<double> levels_of(std::span<const State> states) const {
        std::vector<double> x(states.size());
        for (std::size_t i = 0; i < states.size(); ++i) x[i] = levels_[states[i]];
        return x;
    }

    // Levels are expected on a roughly zero-mean, unit-scale axis.
    bool looks_normalized() const noexcept {
        double mean = 0.0;
        for (double v : levels_) mean += v;
        mean /= static_cast<double>(levels_.size());
        double var = 0.0;
        for (double v : levels_) var += (v - mean) * (v - mean);
        var /= static_cast<double>(levels_.size());
        return std::abs(mean) < 1.0 && var > 0.05 && var < 20.0;
    }

private:
    StateSpace space_;
    std::vector<double> levels_;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    return s;
}

}  // namespace detail

// Reads a TSV table with header `kmer<TAB>level_mean` (extra columns ignored).
// tau is inferred from the k-mer length; all 4^tau k-mers must appear once.
inline PoreModel load_pore_model(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::size_t kmer_col = 0, level_col = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = detail::split_tabs(t);
        std::optional<std::size_t> kc, lc;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            auto f = detail::trim(fields[i]);
            if (f == "kmer") kc = i;
            if (f == "level_mean") lc = i;
        }
        if (!kc || !lc) throw FormatError("header must contain 'kmer' and 'level_mean' columns", line_no);
        kmer_col = *kc;
        level_col = *lc;
        have_header = true;
        break;
    }
    if (!have_header) throw FormatError("empty pore-model table");

    std::optional<StateSpace> space;
    std::vector<double> levels;
    std::vector<bool> seen;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = detail::trim(line);
        if (t.empty()) continue;
        auto fields = detail::split_tabs(t);
        if (fields.size() <= std::max(kmer_col, level_col)) throw FormatError("missing column", line_no);
        auto kmer_text = detail::trim(fields[kmer_col]);
        auto level_text = std::string(detail::trim(fields[level_col]));

        std::vector<Base> kmer;
        try {
            kmer = parse_bases(kmer_text);
        } catch (const DomainError& e) {
            throw FormatError("bad k-mer '" + std::string(kmer_text) + "': " + e.what(), line_no);
        }
        if (!space) {
            if (kmer.empty() || kmer.size() > kMaxTau) {
                throw FormatError("unsupported k-mer length " + std::to_string(kmer.size()), line_no);
            }
            space.emplace(static_cast<unsigned>(kmer.size()));
            levels.assign(space->num_states(), 0.0);
            seen.assign(space->num_states(), false);
        }
        if (kmer.size() != space->tau()) {
            throw FormatError("k-mer '" + std::string(kmer_text) + "' has length " + std::to_string(kmer.size()) +
                                  ", expected " + std::to_string(space->tau()),
                              line_no);
        }
        double value = 0.0;
        std::size_t used = 0;
        try {
            value = std::stod(level_text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != level_text.size() || !std::isfinite(value)) {
            throw FormatError("non-numeric level '" + level_text + "'", line_no);
        }
        const State s = space->kmer_to_state(kmer);
        if (seen[s]) throw FormatError("duplicate k-mer '" + std::string(kmer_text) + "'", line_no);
        seen[s] = true;
        levels[s] = value;
    }
    if (!space) throw FormatError("pore-model table has no rows");
    for (State s = 0; s < space->num_states(); ++s) {
        if (!seen[s]) throw FormatError("missing k-mer '" + space->state_to_string(s) + "'");
    }
    return PoreModel(*space, std::move(levels));
}

inline PoreModel load_pore_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open pore model '" + path + "'");
    return load_pore_model(in);
}

inline void write_pore_model(std::ostream& out, const PoreModel& model) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "kmer\tlevel_mean\n";
    for (State s = 0; s < model.num_states(); ++s) {
        buf << model.space().state_to_string(s) << '\t' << model.level(s) << '\n';
    }
    out << buf.str();
}

// Test fixture: i.i.d. standard normal levels from a seeded generator.
inline PoreModel synth_pore_model(unsigned tau, std::uint64_t seed) {
    StateSpace space(tau);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> levels(space.num_states());
    for (auto& v : levels) v = normal(rng);
    return PoreModel(space, std::move(levels));
}

}  // namespace nnc
