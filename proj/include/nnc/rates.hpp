#pragma once

// Information densities, the DTW-chopped achievable-rate estimate, outage
// curves, dataset constraints and outlier-block removal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nnc/channel.hpp"
#include "nnc/dataset_io.hpp"
#include "nnc/decoder.hpp"
#include "nnc/dtw.hpp"
#include "nnc/parallel.hpp"
#include "nnc/pore_model.hpp"

namespace nnc {

// Bits per base: 2 + log2(V) / m. At most 2; 0 when V equals the uniform prior 4^-m.
inline double info_density(double log_app, std::size_t m) {
    return 2.0 + (log_app / std::numbers::ln2) / static_cast<double>(m);
}

// Largest loss from not knowing the initial state: log2(4^tau) / m.
inline double rate_loss_bound(unsigned tau, std::size_t m) { return 2.0 * tau / static_cast<double>(m); }

inline double estimate_mean_duration(std::size_t signal_length, std::size_t state_count) {
    if (signal_length == 0 || state_count == 0) throw DomainError("mean duration needs non-empty signal and states");
    return static_cast<double>(signal_length) / static_cast<double>(state_count);
}

// ---------------------------------------------------------------------------
// Dataset constraints

struct ReadConstraints {
    std::size_t min_bases = 8000;  // exclusive
    std::size_t max_bases = 12000; // exclusive
    double typicality = 0.01;      // |N_b / n - 1/4| < typicality for every base
    double max_mean_duration = 20.0;
};

struct ReadRejection {
    std::string read_id;
    std::string reason;
};

struct FilterResult {
    std::vector<Read> retained;
    std::vector<ReadRejection> rejected;
};

// Empty string when the read satisfies every constraint.
inline std::string check_read(const Read& read, const ReadConstraints& c, unsigned tau) {
    const std::size_t n = read.bases.size();
    if (!(n > c.min_bases && n < c.max_bases)) {
        return "length: " + std::to_string(n) + " bases outside (" + std::to_string(c.min_bases) + ", " +
               std::to_string(c.max_bases) + ")";
    }
    std::array<std::size_t, 4> counts{};
    for (Base b : read.bases) ++counts[static_cast<std::size_t>(b)];
    for (std::size_t b = 0; b < 4; ++b) {
        const double freq = static_cast<double>(counts[b]) / static_cast<double>(n);
        if (!(std::abs(freq - 0.25) < c.typicality)) {
            std::ostringstream os;
            os << "typicality: frequency of " << kBaseSymbols[b] << " is " << freq;
            return os.str();
        }
    }
    if (n < tau) return "length: fewer bases than tau";
    const double ek = estimate_mean_duration(read.signal.size(), n - tau + 1);
    if (!(ek < c.max_mean_duration)) {
        std::ostringstream os;
        os << "mean duration: " << ek << " >= " << c.max_mean_duration;
        return os.str();
    }
    return {};
}

inline FilterResult filter_reads(std::vector<Read> reads, const ReadConstraints& c, unsigned tau) {
    FilterResult out;
    for (auto& r : reads) {
        auto reason = check_read(r, c, tau);
        if (reason.empty()) {
            out.retained.push_back(std::move(r));
        } else {
            out.rejected.push_back({r.read_id, std::move(reason)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rate estimation

enum class ChopSource { dtw, truth };

struct RatePolicy {
    std::size_t block_length = 100;      // m, states per block
    double sigma = 0.5;                  // decoding noise level
    std::optional<double> mean_duration; // unset: estimated per read
    TransitionWeights weights = TransitionWeights::full;
    double outlier_threshold = 0.35;     // block sigma_dtw above this is an outlier
    ChopSource chop = ChopSource::dtw;
    // unset: exact DTW for reads up to 5000 states, banded beyond.
    // 0 disables the band, >0 forces that width.
    std::optional<double> band_width;
    unsigned threads = 0;
};

struct BlockResult {
    std::string read_id;
    std::int64_t channel_id = 0;
    std::size_t block_index = 0;
    std::size_t m = 0;
    std::size_t t = 0;
    double mean_duration = 0.0;
    double log_numerator = 0.0;
    double log_denominator = 0.0;
    double log_app = 0.0;
    double info_density = 0.0;
    double sigma_dtw = 0.0;
    bool ok = true;
    std::string error;
};

struct ChannelSummary {
    double rate = 0.0;                   // mean density, all decoded blocks
    double rate_without_outliers = 0.0;  // mean density after outlier removal
    std::size_t block_count = 0;
    std::size_t outlier_count = 0;
    double mean_sigma_dtw = 0.0;
    double mean_duration = 0.0;          // mean of per-read estimates
    std::size_t read_count = 0;
};

struct RateReport {
    std::map<std::int64_t, ChannelSummary> per_channel;
    double pooled_rate = 0.0;
    double pooled_rate_without_outliers = 0.0;
    std::size_t blocks = 0;  // N_s: decoded blocks
    std::size_t outliers_removed = 0;
    std::size_t failed_blocks = 0;
    std::size_t reads_used = 0;
    std::size_t reads_failed = 0;
    std::size_t block_length = 0;
    std::size_t bases_per_block = 0;  // m + tau - 1
    double outlier_threshold = 0.0;
    double rate_loss_bound = 0.0;
};

struct RateEstimate {
    RateReport report;
    std::vector<BlockResult> blocks;  // sorted by (read_id, block_index, channel_id)
    std::vector<ReadRejection> read_failures;
};

struct OutageCurve {
    std::vector<double> thresholds;
    std::vector<double> probabilities;
};

// Empirical P(density <= gamma) at each threshold.
inline OutageCurve outage_curve(std::span<const double> densities, std::span<const double> thresholds) {
    if (densities.empty()) throw DomainError("outage curve needs at least one density");
    std::vector<double> sorted(densities.begin(), densities.end());
    std::sort(sorted.begin(), sorted.end());
    OutageCurve curve;
    curve.thresholds.assign(thresholds.begin(), thresholds.end());
    std::sort(curve.thresholds.begin(), curve.thresholds.end());
    for (double g : curve.thresholds) {
        const auto count = std::upper_bound(sorted.begin(), sorted.end(), g) - sorted.begin();
        curve.probabilities.push_back(static_cast<double>(count) / static_cast<double>(sorted.size()));
    }
    return curve;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
    if (steps < 2) return {lo};
    std::vector<double> g(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
    }
    return g;
}

inline bool is_outlier(const BlockResult& b, double threshold) { return b.sigma_dtw > threshold; }

inline std::vector<BlockResult> filter_outlier_blocks(std::span<const BlockResult> blocks, double threshold) {
    if (!(threshold >= 0.0)) throw DomainError("outlier threshold must be non-negative");
    std::vector<BlockResult> kept;
    for (const auto& b : blocks) {
        if (!is_outlier(b, threshold)) kept.push_back(b);
    }
    return kept;
}

// 2 + sum(log V) / (ln 2 * m * N_s): the pooled estimate from summed log-APPs.
inline double pooled_rate_from_log_app(std::span<const BlockResult> blocks) {
    double sum = 0.0;
    std::size_t states = 0;
    for (const auto& b : blocks) {
        if (!b.ok) continue;
        sum += b.log_app;
        states += b.m;
    }
    if (states == 0) return 0.0;
    return 2.0 + sum / (std::numbers::ln2 * static_cast<double>(states));
}

inline double mean_density(std::span<const BlockResult> blocks) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& b : blocks) {
        if (!b.ok) continue;
        sum += b.info_density;
        ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

inline void sort_blocks(std::vector<BlockResult>& blocks) {
    std::stable_sort(blocks.begin(), blocks.end(), [](const BlockResult& a, const BlockResult& b) {
        return std::tie(a.read_id, a.block_index, a.channel_id) < std::tie(b.read_id, b.block_index, b.channel_id);
    });
}

// Aggregates sorted block results. Per-read mean durations come from the blocks.
inline RateReport summarize(const std::vector<BlockResult>& blocks, double outlier_threshold, std::size_t m,
                            unsigned tau) {
    RateReport report;
    report.block_length = m;
    report.bases_per_block = m + tau - 1;
    report.outlier_threshold = outlier_threshold;
    report.rate_loss_bound = rate_loss_bound(tau, m);

    std::map<std::int64_t, std::vector<const BlockResult*>> by_channel;
    double all_sum = 0.0, kept_sum = 0.0;
    std::size_t kept = 0;
    for (const auto& b : blocks) {
        if (!b.ok) {
            ++report.failed_blocks;
            continue;
        }
        by_channel[b.channel_id].push_back(&b);
        ++report.blocks;
        all_sum += b.info_density;
        if (is_outlier(b, outlier_threshold)) {
            ++report.outliers_removed;
        } else {
            kept_sum += b.info_density;
            ++kept;
        }
    }
    report.pooled_rate = report.blocks ? all_sum / static_cast<double>(report.blocks) : 0.0;
    report.pooled_rate_without_outliers = kept ? kept_sum / static_cast<double>(kept) : 0.0;

    for (const auto& [channel, list] : by_channel) {
        ChannelSummary cs;
        double sum = 0.0, sum_kept = 0.0, sum_sigma = 0.0;
        std::size_t n_kept = 0;
        std::map<std::string, double> read_durations;
        for (const auto* b : list) {
            sum += b->info_density;
            sum_sigma += b->sigma_dtw;
            read_durations.emplace(b->read_id, b->mean_duration);
            if (is_outlier(*b, outlier_threshold)) {
                ++cs.outlier_count;
            } else {
                sum_kept += b->info_density;
                ++n_kept;
            }
        }
        cs.block_count = list.size();
        cs.rate = sum / static_cast<double>(list.size());
        cs.rate_without_outliers = n_kept ? sum_kept / static_cast<double>(n_kept) : 0.0;
        cs.mean_sigma_dtw = sum_sigma / static_cast<double>(list.size());
        double dur = 0.0;
        for (const auto& [id, d] : read_durations) dur += d;
        cs.read_count = read_durations.size();
        cs.mean_duration = dur / static_cast<double>(read_durations.size());
        report.per_channel.emplace(channel, cs);
    }
    return report;
}

namespace detail {

struct PreparedBlock {
    Block block;
    double sigma_dtw = 0.0;
};

inline DtwOptions dtw_options_for(const RatePolicy& policy, std::size_t states, double mean_duration) {
    if (!policy.band_width) return default_dtw_options(states, mean_duration);
    DtwOptions opts;
    if (*policy.band_width > 0.0) opts.band_width = *policy.band_width;
    return opts;
}

}  // namespace detail

// Chops one read into blocks (DTW or its recorded true segmentation) and
// attaches the per-read E[K] estimate.
inline std::vector<Block> prepare_read_blocks(const Read& read, const PoreModel& model, const RatePolicy& policy) {
    const auto states = model.space().states_from_bases(read.bases);
    const double ek = policy.mean_duration ? *policy.mean_duration
                                           : estimate_mean_duration(read.signal.size(), states.size());
    std::vector<Block> blocks;
    if (policy.chop == ChopSource::truth) {
        if (!read.truth_jump_times) throw InputError("read '" + read.read_id + "' has no truth_jump_times");
        blocks = chop_with_segmentation(states, read.signal, Segmentation{*read.truth_jump_times},
                                        policy.block_length);
    } else {
        blocks = chop_blocks(model, states, read.signal, policy.block_length,
                             detail::dtw_options_for(policy, states.size(), ek))
                     .blocks;
    }
    for (auto& b : blocks) {
        b.read_id = read.read_id;
        b.channel_id = read.channel_id;
        b.mean_duration = ek;
    }
    return blocks;
}

// Decodes one block: log-APP, information density and the block's own sigma_dtw.
inline BlockResult decode_block(const Block& block, const PoreModel& model, double sigma, TransitionWeights weights,
                                DecoderWorkspace* ws = nullptr) {
    BlockResult r;
    r.read_id = block.read_id;
    r.channel_id = block.channel_id;
    r.block_index = block.block_index;
    r.m = block.states.size();
    r.t = block.signal.size();
    r.mean_duration = block.mean_duration;
    try {
        const NncParams params{block.mean_duration, sigma};
        const auto out = log_app(model, params, block.states, block.signal, block.initial_state,
                                 DecoderOptions{weights}, ws);
        r.log_numerator = out.log_numerator;
        r.log_denominator = out.log_denominator;
        r.log_app = std::min(out.log_app, 0.0);
        r.info_density = info_density(r.log_app, r.m);
        r.sigma_dtw = normalized_dtw(model.levels_of(block.states), block.signal);
        if (!std::isfinite(r.log_app)) throw InfeasibleError("log-APP is not finite");
    } catch (const Error& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

// Decodes many blocks on a worker pool; the result order matches `blocks`.
inline std::vector<BlockResult> decode_blocks(std::span<const Block> blocks, const PoreModel& model, double sigma,
                                              TransitionWeights weights, unsigned threads) {
    std::vector<BlockResult> results(blocks.size());
    parallel_for(blocks.size(), threads, [&](std::size_t i) {
        thread_local DecoderWorkspace ws;
        results[i] = decode_block(blocks[i], model, sigma, weights, &ws);
    });
    return results;
}

// Full pipeline: per read, levels -> DTW -> blocks; per block, log-APP ->
// information density; then the ordered reduction into a report.
inline RateEstimate estimate_rate(std::span<const Read> reads, const PoreModel& model, const RatePolicy& policy) {
    NncParams{policy.mean_duration.value_or(1.0), policy.sigma}.validate();
    if (policy.block_length == 0) throw DomainError("block length must be positive");

    std::vector<std::vector<Block>> per_read(reads.size());
    std::vector<std::string> failures(reads.size());
    parallel_for(reads.size(), policy.threads, [&](std::size_t i) {
        try {
            per_read[i] = prepare_read_blocks(reads[i], model, policy);
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });

    RateEstimate est;
    std::vector<Block> blocks;
    std::size_t used = 0;
    for (std::size_t i = 0; i < reads.size(); ++i) {
        if (!failures[i].empty()) {
            est.read_failures.push_back({reads[i].read_id, failures[i]});
            continue;
        }
        ++used;
        for (auto& b : per_read[i]) blocks.push_back(std::move(b));
    }
    est.blocks = decode_blocks(blocks, model, policy.sigma, policy.weights, policy.threads);
    sort_blocks(est.blocks);
    est.report = summarize(est.blocks, policy.outlier_threshold, policy.block_length, model.tau());
    est.report.reads_used = used;
    est.report.reads_failed = est.read_failures.size();
    return est;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json report_to_json(const RateReport& r) {
    Json j;
    j["pooled_rate"] = r.pooled_rate;
    j["pooled_rate_without_outliers"] = r.pooled_rate_without_outliers;
    j["N_s"] = r.blocks;
    j["outliers_removed"] = r.outliers_removed;
    j["failed_blocks"] = r.failed_blocks;
    j["reads_used"] = r.reads_used;
    j["reads_failed"] = r.reads_failed;
    j["block_length_states"] = r.block_length;
    j["block_length_bases"] = r.bases_per_block;
    j["outlier_threshold"] = r.outlier_threshold;
    j["rate_loss_bound"] = r.rate_loss_bound;
    Json channels = Json::array();
    for (const auto& [id, c] : r.per_channel) {
        Json cj;
        cj["channel_id"] = id;
        cj["rate"] = c.rate;
        cj["rate_without_outliers"] = c.rate_without_outliers;
        cj["block_count"] = c.block_count;
        cj["outlier_count"] = c.outlier_count;
        cj["mean_sigma_dtw"] = c.mean_sigma_dtw;
        cj["mean_duration"] = c.mean_duration;
        cj["read_count"] = c.read_count;
        channels.push_back(std::move(cj));
    }
    j["per_channel"] = std::move(channels);
    return j;
}

// Shortest representation that round-trips.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
    return Json(v).dump();
}

inline void write_blocks_csv(std::ostream& out, std::span<const BlockResult> blocks) {
    out << "read_id,channel_id,block_index,m,t,log_app,info_density_bits_per_base,sigma_dtw\n";
    for (const auto& b : blocks) {
        if (!b.ok) continue;
        out << b.read_id << ',' << b.channel_id << ',' << b.block_index << ',' << b.m << ',' << b.t << ','
            << format_double(b.log_app) << ',' << format_double(b.info_density) << ','
            << format_double(b.sigma_dtw) << '\n';
    }
}

// Reads the block CSV written above (lines starting with '#' are comments).
inline std::vector<BlockResult> read_blocks_csv(std::istream& in) {
    std::vector<BlockResult> out;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() < 8) throw FormatError("expected 8 columns", line_no);
        try {
            BlockResult b;
            b.read_id = f[0];
            b.channel_id = std::stoll(f[1]);
            b.block_index = std::stoull(f[2]);
            b.m = std::stoull(f[3]);
            b.t = std::stoull(f[4]);
            b.log_app = std::stod(f[5]);
            b.info_density = std::stod(f[6]);
            b.sigma_dtw = std::stod(f[7]);
            out.push_back(std::move(b));
        } catch (const std::exception& e) {
            throw FormatError(std::string("bad number: ") + e.what(), line_no);
        }
    }
    return out;
}

inline void write_outage_csv(std::ostream& out, const OutageCurve& curve) {
    out << "gamma,p_outage\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        out << format_double(curve.thresholds[i]) << ',' << format_double(curve.probabilities[i]) << '\n';
    }
}

// Minimal step plot of one or more outage curves.
inline void write_outage_svg(std::ostream& out, const std::vector<std::pair<std::string, OutageCurve>>& curves) {
    constexpr double W = 640, H = 420, left = 60, right = 20, top = 20, bottom = 50;
    double gmin = 0, gmax = 2;
    bool first = true;
    for (const auto& [name, c] : curves) {
        if (c.thresholds.empty()) continue;
        if (first) {
            gmin = c.thresholds.front();
            gmax = c.thresholds.back();
            first = false;
        }
        gmin = std::min(gmin, c.thresholds.front());
        gmax = std::max(gmax, c.thresholds.back());
    }
    if (gmax <= gmin) gmax = gmin + 1;
    auto px = [&](double g) { return left + (g - gmin) / (gmax - gmin) * (W - left - right); };
    auto py = [&](double p) { return top + (1.0 - p) * (H - top - bottom); };
    static const char* colors[] = {"#000000", "#c0392b", "#2471a3", "#239b56", "#7d3c98", "#b9770e"};
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << W - right << "\" y2=\"" << py(0)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << py(1)
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">"
       << "gamma (bits/base)</text>\n";
    os << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << H / 2
       << ")\" text-anchor=\"middle\">P(i &lt;= gamma)</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double g = gmin + (gmax - gmin) * i / 4.0;
        os << "<text x=\"" << px(g) << "\" y=\"" << py(0) + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << g
           << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(i / 4.0) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
           << i / 4.0 << "</text>\n";
    }
    std::size_t k = 0;
    for (const auto& [name, c] : curves) {
        os << "<polyline fill=\"none\" stroke=\"" << colors[k % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
            os << px(c.thresholds[i]) << ',' << py(c.probabilities[i]) << ' ';
        }
        os << "\"/>\n";
        os << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 * (k + 1) << "\" font-size=\"11\" fill=\""
           << colors[k % 6] << "\">" << name << "</text>\n";
        ++k;
    }
    os << "</svg>\n";
    out << os.str();
}

}  // namespace nnc
