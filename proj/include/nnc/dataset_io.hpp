#pragma once

// On-disk formats: reads and blocks as JSONL (gzip when the path ends in
// ".gz"), plus robust signal normalization.
//
// Read line:  {"read_id": str, "channel_id": int, "bases": "ATCG...",
//              "signal": [float...], "truth_jump_times": [int...]?, "q_score": float?}
// Block line: {"read_id", "channel_id", "block_index", "initial_state",
//              "mean_duration", "states": [int...], "signal": [float...]}
// A first line of the form {"_meta": {...}} carries provenance and is skipped
// by the readers.

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnc/channel.hpp"
#include "nnc/dtw.hpp"
#include "nnc/errors.hpp"
#include "nnc/pore_model.hpp"

namespace nnc {

using Json = nlohmann::ordered_json;

struct Read {
    std::string read_id;
    std::int64_t channel_id = 0;
    std::vector<Base> bases;
    std::vector<double> signal;
    std::optional<std::vector<std::size_t>> truth_jump_times;
    std::optional<double> q_score;

    friend bool operator==(const Read&, const Read&) = default;
};

inline bool has_gz_suffix(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// Line-oriented reader over a plain or gzip file.
class LineReader {
public:
    explicit LineReader(const std::string& path) : path_(path) {
        if (has_gz_suffix(path)) {
            gz_ = gzopen(path.c_str(), "rb");
            if (!gz_) throw InputError("cannot open '" + path + "'");
            gzbuffer(gz_, 1 << 17);
        } else {
            in_.open(path, std::ios::binary);
            if (!in_) throw InputError("cannot open '" + path + "'");
        }
    }
    ~LineReader() {
        if (gz_) gzclose(gz_);
    }
    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    bool next(std::string& line) {
        if (!gz_) {
            if (!std::getline(in_, line)) return false;
            strip_cr(line);
            return true;
        }
        line.clear();
        while (true) {
            if (pos_ == buf_.size()) {
                buf_.resize(1 << 16);
                const int got = gzread(gz_, buf_.data(), static_cast<unsigned>(buf_.size()));
                if (got < 0) throw InputError("gzip read error in '" + path_ + "'");
                buf_.resize(static_cast<std::size_t>(got));
                pos_ = 0;
                if (got == 0) {
                    if (line.empty() && !pending_) return false;
                    pending_ = false;
                    strip_cr(line);
                    return true;
                }
            }
            pending_ = true;
            const auto nl = buf_.find('\n', pos_);
            if (nl == std::string::npos) {
                line.append(buf_, pos_, std::string::npos);
                pos_ = buf_.size();
            } else {
                line.append(buf_, pos_, nl - pos_);
                pos_ = nl + 1;
                pending_ = false;
                strip_cr(line);
                return true;
            }
        }
    }

private:
    static void strip_cr(std::string& line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }

    std::string path_;
    std::ifstream in_;
    gzFile gz_ = nullptr;
    std::string buf_;
    std::size_t pos_ = 0;
    bool pending_ = false;
};

class LineWriter {
public:
    explicit LineWriter(const std::string& path) : path_(path) {
        if (has_gz_suffix(path)) {
            // gzopen writes no file name and a zero mtime, so output is byte-stable.
            gz_ = gzopen(path.c_str(), "wb6");
            if (!gz_) throw InputError("cannot write '" + path + "'");
        } else {
            out_.open(path, std::ios::binary | std::ios::trunc);
            if (!out_) throw InputError("cannot write '" + path + "'");
        }
    }
    ~LineWriter() {
        if (gz_) gzclose(gz_);
    }
    LineWriter(const LineWriter&) = delete;
    LineWriter& operator=(const LineWriter&) = delete;

    void write_line(const std::string& line) {
        if (gz_) {
            if (!line.empty() && gzwrite(gz_, line.data(), static_cast<unsigned>(line.size())) == 0) {
                throw InputError("gzip write error in '" + path_ + "'");
            }
            gzputc(gz_, '\n');
        } else {
            out_ << line << '\n';
            if (!out_) throw InputError("write error in '" + path_ + "'");
        }
    }

private:
    std::string path_;
    std::ofstream out_;
    gzFile gz_ = nullptr;
};

namespace detail {

inline bool is_meta_line(const Json& j) { return j.is_object() && j.contains("_meta"); }

template <typename T>
T require(const Json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'", line);
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw FormatError(std::string("bad field '") + key + "': " + e.what(), line);
    }
}

inline std::vector<double> require_finite_signal(const Json& j, const std::string& owner, std::size_t line) {
    if (!j.contains("signal") || !j.at("signal").is_array()) throw FormatError("missing field 'signal'", line);
    std::vector<double> signal;
    signal.reserve(j.at("signal").size());
    for (const auto& v : j.at("signal")) {
        if (!v.is_number()) throw InputError("read '" + owner + "': non-numeric signal sample (line " +
                                             std::to_string(line) + ")");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw InputError("read '" + owner + "': non-finite signal sample");
        signal.push_back(x);
    }
    return signal;
}

}  // namespace detail

inline Json read_to_json(const Read& r) {
    Json j;
    j["read_id"] = r.read_id;
    j["channel_id"] = r.channel_id;
    j["bases"] = bases_to_string(r.bases);
    j["signal"] = r.signal;
    if (r.truth_jump_times) j["truth_jump_times"] = *r.truth_jump_times;
    if (r.q_score) j["q_score"] = *r.q_score;
    return j;
}

inline Read read_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw FormatError("expected a JSON object", line);
    Read r;
    r.read_id = detail::require<std::string>(j, "read_id", line);
    r.channel_id = detail::require<std::int64_t>(j, "channel_id", line);
    const auto bases = detail::require<std::string>(j, "bases", line);
    try {
        r.bases = parse_bases(bases);
    } catch (const DomainError& e) {
        throw FormatError("read '" + r.read_id + "': " + e.what(), line);
    }
    // 1e999 parses as inf; rejected here.
    r.signal = detail::require_finite_signal(j, r.read_id, line);
    if (j.contains("truth_jump_times") && !j.at("truth_jump_times").is_null()) {
        r.truth_jump_times = detail::require<std::vector<std::size_t>>(j, "truth_jump_times", line);
    }
    if (j.contains("q_score") && !j.at("q_score").is_null()) r.q_score = detail::require<double>(j, "q_score", line);
    return r;
}

// Streams a read JSONL file, calling `sink` once per read in file order.
inline void for_each_read(const std::string& path, const std::function<void(Read&&)>& sink) {
    LineReader reader(path);
    std::string line;
    std::size_t line_no = 0;
    while (reader.next(line)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw FormatError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (detail::is_meta_line(j)) continue;
        sink(read_from_json(j, line_no));
    }
}

inline std::vector<Read> read_dataset(const std::string& path) {
    std::vector<Read> reads;
    for_each_read(path, [&](Read&& r) { reads.push_back(std::move(r)); });
    return reads;
}

inline void write_dataset(const std::string& path, std::span<const Read> reads, const Json* meta = nullptr) {
    LineWriter out(path);
    if (meta) out.write_line(Json{{"_meta", *meta}}.dump());
    for (const auto& r : reads) out.write_line(read_to_json(r).dump());
}

inline Json block_to_json(const Block& b) {
    Json j;
    j["read_id"] = b.read_id;
    j["channel_id"] = b.channel_id;
    j["block_index"] = b.block_index;
    j["initial_state"] = b.initial_state;
    j["mean_duration"] = b.mean_duration;
    j["states"] = b.states;
    j["signal"] = b.signal;
    return j;
}

inline Block block_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw FormatError("expected a JSON object", line);
    Block b;
    b.read_id = detail::require<std::string>(j, "read_id", line);
    b.channel_id = detail::require<std::int64_t>(j, "channel_id", line);
    b.block_index = detail::require<std::size_t>(j, "block_index", line);
    b.initial_state = detail::require<State>(j, "initial_state", line);
    b.mean_duration = detail::require<double>(j, "mean_duration", line);
    b.states = detail::require<std::vector<State>>(j, "states", line);
    b.signal = detail::require_finite_signal(j, b.read_id, line);
    return b;
}

inline std::vector<Block> read_blocks(const std::string& path) {
    LineReader reader(path);
    std::vector<Block> blocks;
    std::string line;
    std::size_t line_no = 0;
    while (reader.next(line)) {
        ++line_no;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw FormatError(std::string("malformed JSON: ") + e.what(), line_no);
        }
        if (detail::is_meta_line(j)) continue;
        blocks.push_back(block_from_json(j, line_no));
    }
    return blocks;
}

inline void write_blocks(const std::string& path, std::span<const Block> blocks, const Json* meta = nullptr) {
    LineWriter out(path);
    if (meta) out.write_line(Json{{"_meta", *meta}}.dump());
    for (const auto& b : blocks) out.write_line(block_to_json(b).dump());
}

namespace detail {

inline double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace detail

inline constexpr double kMadToSigma = 1.4826;
// sqrt(pi / 2): mean absolute deviation -> Gaussian sigma.
inline constexpr double kMeanAbsToSigma = 1.2533141373155003;

// (x - median) / (1.4826 * MAD). When more than half of the samples sit on
// the median (MAD = 0) the scale falls back to 1.2533 * mean |x - median|.
inline std::vector<double> normalize_signal(std::span<const double> raw) {
    if (raw.size() < 2) throw DomainError("normalization needs at least two samples");
    for (double x : raw) {
        if (!std::isfinite(x)) throw InputError("cannot normalize a non-finite sample");
    }
    const double med = detail::median_of(std::vector<double>(raw.begin(), raw.end()));
    std::vector<double> dev(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) dev[i] = std::abs(raw[i] - med);
    double scale = kMadToSigma * detail::median_of(dev);
    if (!(scale > 0.0)) {
        double mean_abs = 0.0;
        for (double d : dev) mean_abs += d;
        mean_abs /= static_cast<double>(dev.size());
        scale = kMeanAbsToSigma * mean_abs;
    }
    if (!(scale > 0.0)) throw DomainError("cannot normalize a constant signal");
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - med) / scale;
    return out;
}

}  // namespace nnc
