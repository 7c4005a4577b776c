// nnc: command-line front end for the noisy nanopore channel library.
//
//   nnc simulate  synthetic dataset from a pore model
//   nnc filter    apply the dataset constraints
//   nnc segment   DTW segmentations (and optional block export)
//   nnc decode    per-block log-APP
//   nnc rate      achievable-rate report
//   nnc outage    outage curve from per-block results
//   nnc oracle    brute-force cross-checks on tiny instances
//
// Exit status: 0 success, 1 input error, 2 infeasible (including "no reads retained").

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nnc/nnc.hpp"

namespace {

using nnc::Json;

// Everything that affects results; echoed into each output file.
Json collect_config(const CLI::App& sub) {
    Json cfg;
    cfg["subcommand"] = sub.get_name();
    for (const CLI::Option* opt : sub.get_options()) {
        const std::string key = opt->get_single_name();
        if (key.empty() || key == "help" || key == "threads") continue;
        const bool is_flag = opt->get_expected_max() == 0;
        if (opt->count() > 0) {
            const auto& res = opt->results();
            std::string joined;
            for (std::size_t i = 0; i < res.size(); ++i) joined += (i ? " " : "") + res[i];
            cfg[key] = is_flag ? std::string("true") : joined;
        } else {
            cfg[key] = is_flag ? std::string("false") : opt->get_default_str();
        }
    }
    return cfg;
}

Json make_meta(const CLI::App& sub) {
    Json meta;
    meta["tool"] = "nnc";
    meta["version"] = nnc::kVersion;
    meta["config"] = collect_config(sub);
    return meta;
}

std::string csv_meta_line(const Json& meta) { return "# " + meta.dump(); }

class Output {
public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_.open(path, std::ios::binary | std::ios::trunc);
        if (!file_) throw nnc::InputError("cannot write '" + path + "'");
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct ModelArgs {
    std::string path;
    unsigned tau = 5;
    std::uint64_t model_seed = 1;
};

void add_model_options(CLI::App* sub, ModelArgs& m, bool allow_synthetic) {
    sub->add_option("--pore-model", m.path, "pore-model TSV (kmer, level_mean)");
    if (allow_synthetic) {
        sub->add_option("--tau", m.tau, "memory length of the synthetic model when --pore-model is absent")
            ->check(CLI::Range(1u, nnc::kMaxTau))
            ->capture_default_str();
        sub->add_option("--model-seed", m.model_seed, "seed of the synthetic pore model")->capture_default_str();
    }
}

nnc::PoreModel resolve_model(const ModelArgs& m, bool allow_synthetic) {
    if (!m.path.empty()) {
        auto model = nnc::load_pore_model(m.path);
        if (!model.looks_normalized()) {
            std::cerr << "warning: pore-model levels do not look zero-mean/unit-scale\n";
        }
        return model;
    }
    if (!allow_synthetic) throw nnc::InputError("--pore-model is required");
    return nnc::synth_pore_model(m.tau, m.model_seed);
}

struct ConstraintArgs {
    nnc::ReadConstraints c;
    bool no_filter = false;
};

void add_constraint_options(CLI::App* sub, ConstraintArgs& a, bool with_switch) {
    sub->add_option("--min-bases", a.c.min_bases, "exclusive lower bound on read length (bases)")->capture_default_str();
    sub->add_option("--max-bases", a.c.max_bases, "exclusive upper bound on read length (bases)")->capture_default_str();
    sub->add_option("--typicality", a.c.typicality, "max |base frequency - 1/4|")->capture_default_str();
    sub->add_option("--max-mean-duration", a.c.max_mean_duration, "exclusive upper bound on len(y)/len(s)")
        ->capture_default_str();
    if (with_switch) sub->add_flag("--no-filter", a.no_filter, "skip the dataset constraints");
}

std::optional<double> parse_band(const std::string& band) {
    if (band == "auto") return std::nullopt;
    if (band == "off") return 0.0;
    try {
        const double w = std::stod(band);
        if (w > 0) return w;
    } catch (const std::exception&) {
    }
    throw nnc::InputError("--band must be auto, off, or a positive width");
}

nnc::ChopSource parse_chop(const std::string& s) {
    if (s == "dtw") return nnc::ChopSource::dtw;
    if (s == "truth") return nnc::ChopSource::truth;
    throw nnc::InputError("--chop must be dtw or truth");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noisy nanopore channel: simulation, DTW segmentation, decoding and rate estimation"};
    app.set_version_flag("--version", std::string(nnc::kVersion));
    app.set_config("--config", "", "TOML/INI config file; flags override it");
    app.require_subcommand(1);
    unsigned threads = 0;

    // simulate
    auto* sim = app.add_subcommand("simulate", "write a synthetic read dataset");
    ModelArgs sim_model;
    add_model_options(sim, sim_model, true);
    std::size_t sim_reads = 10, sim_bases = 1000;
    double sim_ek = 10.0, sim_sigma = 0.5;
    std::uint64_t sim_seed = 1;
    std::int64_t sim_channels = 1;
    std::string sim_out = "-", sim_model_out;
    sim->add_option("--reads", sim_reads, "number of reads")->capture_default_str();
    sim->add_option("--bases", sim_bases, "bases per read")->capture_default_str();
    sim->add_option("--mean-duration", sim_ek, "E[K], samples per state")->capture_default_str();
    sim->add_option("--sigma", sim_sigma, "noise standard deviation")->capture_default_str();
    sim->add_option("--seed", sim_seed, "master seed")->capture_default_str();
    sim->add_option("--channels", sim_channels, "reads are assigned to channels 1..N round-robin")
        ->capture_default_str();
    sim->add_option("--out,-o", sim_out, "output JSONL (.gz allowed), '-' = stdout")->capture_default_str();
    sim->add_option("--model-out", sim_model_out, "also write the pore model used as TSV");

    // filter
    auto* flt = app.add_subcommand("filter", "apply the read-length, typicality and mean-duration constraints");
    ModelArgs flt_model;
    add_model_options(flt, flt_model, true);
    ConstraintArgs flt_c;
    add_constraint_options(flt, flt_c, false);
    std::string flt_in, flt_out = "-", flt_report;
    flt->add_option("--dataset", flt_in, "input JSONL")->required();
    flt->add_option("--out,-o", flt_out, "retained reads JSONL")->capture_default_str();
    flt->add_option("--report", flt_report, "JSON list of rejected reads with reasons");

    // segment
    auto* seg = app.add_subcommand("segment", "DTW segmentation of each read");
    ModelArgs seg_model;
    add_model_options(seg, seg_model, true);
    std::string seg_in, seg_out = "-", seg_blocks, seg_band = "auto", seg_chop = "dtw";
    std::size_t seg_m = 100;
    std::optional<double> seg_ek;
    seg->add_option("--dataset", seg_in, "input JSONL")->required();
    seg->add_option("--out,-o", seg_out, "segmentation JSONL")->capture_default_str();
    seg->add_option("--band", seg_band, "auto | off | <width in samples>")->capture_default_str();
    seg->add_option("--blocks-out", seg_blocks, "also write fixed-length blocks JSONL");
    seg->add_option("--m", seg_m, "states per block for --blocks-out")->capture_default_str();
    seg->add_option("--mean-duration", seg_ek, "fixed E[K] recorded in blocks (default: per-read estimate)");
    seg->add_option("--chop", seg_chop, "blocks from dtw or truth segmentation")->capture_default_str();

    // decode
    auto* dec = app.add_subcommand("decode", "log-APP of each block");
    ModelArgs dec_model;
    add_model_options(dec, dec_model, true);
    std::string dec_in, dec_out = "-", dec_weights = "full";
    double dec_sigma = 0.5;
    dec->add_option("--blocks", dec_in, "blocks JSONL from 'segment --blocks-out'")->required();
    dec->add_option("--out,-o", dec_out, "per-block JSONL")->capture_default_str();
    dec->add_option("--sigma", dec_sigma, "decoding noise level")->capture_default_str();
    dec->add_option("--transition-weights", dec_weights, "full | uniform")->capture_default_str();
    dec->add_option("--threads", threads, "worker threads (0 = all cores)");

    // rate
    auto* rate = app.add_subcommand("rate", "achievable-rate estimate from DTW-chopped blocks");
    ModelArgs rate_model;
    add_model_options(rate, rate_model, true);
    ConstraintArgs rate_c;
    add_constraint_options(rate, rate_c, true);
    std::string rate_in, rate_report = "-", rate_csv, rate_format = "json", rate_weights = "full",
                          rate_band = "auto", rate_chop = "dtw";
    std::size_t rate_m = 100;
    double rate_sigma = 0.5, rate_outlier = 0.35;
    std::optional<double> rate_ek;
    rate->add_option("--dataset", rate_in, "input JSONL")->required();
    rate->add_option("--m", rate_m, "states per block")->capture_default_str();
    rate->add_option("--sigma", rate_sigma, "decoding noise level")->capture_default_str();
    rate->add_option("--mean-duration", rate_ek, "fixed E[K] (default: per-read estimate)");
    rate->add_option("--transition-weights", rate_weights, "full | uniform")->capture_default_str();
    rate->add_option("--outlier-threshold", rate_outlier, "block sigma_dtw above this is an outlier")
        ->capture_default_str();
    rate->add_option("--band", rate_band, "auto | off | <width in samples>")->capture_default_str();
    rate->add_option("--chop", rate_chop, "dtw | truth")->capture_default_str();
    rate->add_option("--report", rate_report, "report output path")->capture_default_str();
    rate->add_option("--format", rate_format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    rate->add_option("--blocks-csv", rate_csv, "per-block CSV output");
    rate->add_option("--threads", threads, "worker threads (0 = all cores)");

    // outage
    auto* out = app.add_subcommand("outage", "outage curve P(i <= gamma) from per-block results");
    std::string out_in, out_csv = "-", out_svg;
    double out_lo = -0.5, out_hi = 2.0;
    std::size_t out_steps = 251;
    std::optional<double> out_outlier;
    bool out_by_channel = false;
    out->add_option("--blocks-csv", out_in, "per-block CSV from 'rate'")->required();
    out->add_option("--gamma-min", out_lo, "smallest threshold")->capture_default_str();
    out->add_option("--gamma-max", out_hi, "largest threshold")->capture_default_str();
    out->add_option("--steps", out_steps, "number of thresholds")->capture_default_str();
    out->add_option("--outlier-threshold", out_outlier, "drop blocks with sigma_dtw above this first");
    out->add_option("--out,-o", out_csv, "curve CSV (gamma, p_outage)")->capture_default_str();
    out->add_option("--svg", out_svg, "also plot to SVG");
    out->add_flag("--by-channel", out_by_channel, "add one SVG curve per channel");

    // oracle
    auto* orc = app.add_subcommand("oracle", "cross-check decoder and DTW against brute force");
    std::size_t orc_n = 100;
    std::uint64_t orc_seed = 1;
    std::string orc_weights = "full";
    orc->add_option("--fixtures", orc_n, "random tiny instances")->capture_default_str();
    orc->add_option("--seed", orc_seed, "seed")->capture_default_str();
    orc->add_option("--transition-weights", orc_weights, "full | uniform")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            const auto model = resolve_model(sim_model, true);
            if (!sim_model_out.empty()) {
                std::ofstream mo(sim_model_out);
                if (!mo) throw nnc::InputError("cannot write '" + sim_model_out + "'");
                nnc::write_pore_model(mo, model);
            }
            if (sim_channels < 1) throw nnc::InputError("--channels must be >= 1");
            const nnc::NncParams params{sim_ek, sim_sigma};
            params.validate();
            std::vector<nnc::Read> reads;
            for (std::size_t i = 0; i < sim_reads; ++i) {
                nnc::Rng rng(nnc::derive_seed(sim_seed, i));
                std::uniform_int_distribution<int> base(0, 3);
                std::vector<nnc::Base> bases(sim_bases);
                for (auto& b : bases) b = static_cast<nnc::Base>(base(rng));
                const auto sr = nnc::simulate_read(model, bases, params, rng);
                nnc::Read r;
                r.read_id = "sim_" + std::to_string(i);
                r.channel_id = static_cast<std::int64_t>(i % static_cast<std::size_t>(sim_channels)) + 1;
                r.bases = std::move(bases);
                r.signal = sr.signal;
                r.truth_jump_times = sr.truth.jump_times;
                reads.push_back(std::move(r));
            }
            const Json meta = make_meta(*sim);
            if (sim_out == "-") {
                std::cout << Json{{"_meta", meta}}.dump() << '\n';
                for (const auto& r : reads) std::cout << nnc::read_to_json(r).dump() << '\n';
            } else {
                nnc::write_dataset(sim_out, reads, &meta);
            }
            std::cerr << "simulated " << reads.size() << " reads\n";
        } else if (flt->parsed()) {
            const auto model = resolve_model(flt_model, true);
            auto result = nnc::filter_reads(nnc::read_dataset(flt_in), flt_c.c, model.tau());
            const Json meta = make_meta(*flt);
            if (flt_out == "-") {
                std::cout << Json{{"_meta", meta}}.dump() << '\n';
                for (const auto& r : result.retained) std::cout << nnc::read_to_json(r).dump() << '\n';
            } else {
                nnc::write_dataset(flt_out, result.retained, &meta);
            }
            Json rej = Json::array();
            for (const auto& r : result.rejected) rej.push_back({{"read_id", r.read_id}, {"reason", r.reason}});
            if (!flt_report.empty()) {
                Output o(flt_report);
                o.stream() << Json{{"_meta", meta}, {"rejected", rej}}.dump(2) << '\n';
            }
            std::cerr << "retained " << result.retained.size() << ", rejected " << result.rejected.size() << '\n';
            for (const auto& r : result.rejected) std::cerr << "  " << r.read_id << ": " << r.reason << '\n';
        } else if (seg->parsed()) {
            const auto model = resolve_model(seg_model, true);
            const auto band = parse_band(seg_band);
            const auto chop = parse_chop(seg_chop);
            const Json meta = make_meta(*seg);
            Output o(seg_out);
            o.stream() << Json{{"_meta", meta}}.dump() << '\n';
            std::vector<nnc::Block> all_blocks;
            nnc::RatePolicy policy;
            policy.block_length = seg_m;
            policy.band_width = band;
            policy.mean_duration = seg_ek;
            policy.chop = chop;
            int status = 0;
            nnc::for_each_read(seg_in, [&](nnc::Read&& r) {
                const auto states = model.space().states_from_bases(r.bases);
                const double ek = seg_ek.value_or(nnc::estimate_mean_duration(r.signal.size(), states.size()));
                try {
                    const auto res = nnc::dtw_align(model.levels_of(states), r.signal,
                                                    nnc::detail::dtw_options_for(policy, states.size(), ek));
                    Json j;
                    j["read_id"] = r.read_id;
                    j["jump_times"] = res.segmentation.jump_times;
                    j["dtw_distance"] = res.distance;
                    j["sigma_dtw"] = res.normalized;
                    o.stream() << j.dump() << '\n';
                    if (!seg_blocks.empty()) {
                        auto blocks = nnc::prepare_read_blocks(r, model, policy);
                        for (auto& b : blocks) all_blocks.push_back(std::move(b));
                    }
                } catch (const nnc::InfeasibleError& e) {
                    std::cerr << r.read_id << ": " << e.what() << '\n';
                    status = 2;
                } catch (const nnc::LengthError& e) {
                    std::cerr << r.read_id << ": " << e.what() << '\n';
                }
            });
            if (!seg_blocks.empty()) nnc::write_blocks(seg_blocks, all_blocks, &meta);
            return status;
        } else if (dec->parsed()) {
            const auto model = resolve_model(dec_model, true);
            const auto weights = nnc::transition_weights_from_string(dec_weights);
            const auto blocks = nnc::read_blocks(dec_in);
            const auto results = nnc::decode_blocks(blocks, model, dec_sigma, weights, threads);
            Output o(dec_out);
            o.stream() << Json{{"_meta", make_meta(*dec)}}.dump() << '\n';
            int status = 0;
            for (const auto& r : results) {
                if (!r.ok) {
                    std::cerr << r.read_id << " block " << r.block_index << ": " << r.error << '\n';
                    status = 2;
                    continue;
                }
                Json j;
                j["read_id"] = r.read_id;
                j["block_index"] = r.block_index;
                j["log_app"] = r.log_app;
                j["m"] = r.m;
                j["t"] = r.t;
                o.stream() << j.dump() << '\n';
            }
            return status;
        } else if (rate->parsed()) {
            const auto model = resolve_model(rate_model, true);
            auto reads = nnc::read_dataset(rate_in);
            if (!rate_c.no_filter) {
                auto filtered = nnc::filter_reads(std::move(reads), rate_c.c, model.tau());
                for (const auto& r : filtered.rejected) std::cerr << "rejected " << r.read_id << ": " << r.reason << '\n';
                reads = std::move(filtered.retained);
            }
            if (reads.empty()) {
                std::cerr << "no reads retained\n";
                return 2;
            }
            nnc::RatePolicy policy;
            policy.block_length = rate_m;
            policy.sigma = rate_sigma;
            policy.mean_duration = rate_ek;
            policy.weights = nnc::transition_weights_from_string(rate_weights);
            policy.outlier_threshold = rate_outlier;
            policy.band_width = parse_band(rate_band);
            policy.chop = parse_chop(rate_chop);
            policy.threads = threads;
            const auto est = nnc::estimate_rate(reads, model, policy);
            for (const auto& f : est.read_failures) std::cerr << "skipped " << f.read_id << ": " << f.reason << '\n';
            if (est.report.blocks == 0) {
                std::cerr << "no blocks decoded\n";
                return 2;
            }
            const Json meta = make_meta(*rate);
            Output o(rate_report);
            if (rate_format == "json") {
                o.stream() << Json{{"_meta", meta}, {"report", nnc::report_to_json(est.report)}}.dump(2) << '\n';
            } else {
                auto& os = o.stream();
                os << csv_meta_line(meta) << '\n';
                os << "channel_id,rate,rate_without_outliers,block_count,outlier_count,mean_sigma_dtw,mean_duration\n";
                for (const auto& [id, c] : est.report.per_channel) {
                    os << id << ',' << nnc::format_double(c.rate) << ',' << nnc::format_double(c.rate_without_outliers)
                       << ',' << c.block_count << ',' << c.outlier_count << ',' << nnc::format_double(c.mean_sigma_dtw)
                       << ',' << nnc::format_double(c.mean_duration) << '\n';
                }
                os << "pooled," << nnc::format_double(est.report.pooled_rate) << ','
                   << nnc::format_double(est.report.pooled_rate_without_outliers) << ',' << est.report.blocks << ','
                   << est.report.outliers_removed << ",,\n";
            }
            if (!rate_csv.empty()) {
                Output c(rate_csv);
                c.stream() << csv_meta_line(meta) << '\n';
                nnc::write_blocks_csv(c.stream(), est.blocks);
            }
            std::cerr << "pooled rate " << est.report.pooled_rate << " bits/base over " << est.report.blocks
                      << " blocks\n";
        } else if (out->parsed()) {
            std::ifstream in(out_in);
            if (!in) throw nnc::InputError("cannot open '" + out_in + "'");
            auto blocks = nnc::read_blocks_csv(in);
            if (out_outlier) blocks = nnc::filter_outlier_blocks(blocks, *out_outlier);
            if (blocks.empty()) {
                std::cerr << "no blocks\n";
                return 2;
            }
            std::vector<double> densities;
            std::map<std::int64_t, std::vector<double>> per_channel;
            for (const auto& b : blocks) {
                densities.push_back(b.info_density);
                per_channel[b.channel_id].push_back(b.info_density);
            }
            const auto grid = nnc::linear_grid(out_lo, out_hi, out_steps);
            const auto curve = nnc::outage_curve(densities, grid);
            const Json meta = make_meta(*out);
            Output o(out_csv);
            o.stream() << csv_meta_line(meta) << '\n';
            nnc::write_outage_csv(o.stream(), curve);
            if (!out_svg.empty()) {
                std::vector<std::pair<std::string, nnc::OutageCurve>> curves{{"all blocks", curve}};
                if (out_by_channel) {
                    for (const auto& [id, d] : per_channel) {
                        curves.emplace_back("channel " + std::to_string(id), nnc::outage_curve(d, grid));
                    }
                }
                Output s(out_svg);
                s.stream() << "<!-- " << meta.dump() << " -->\n";
                nnc::write_outage_svg(s.stream(), curves);
            }
        } else if (orc->parsed()) {
            const auto rep = nnc::run_oracle_checks(orc_n, orc_seed, nnc::transition_weights_from_string(orc_weights));
            Json j;
            j["_meta"] = make_meta(*orc);
            j["fixtures"] = rep.fixtures;
            j["max_forward_error"] = rep.max_forward_error;
            j["max_conditional_forward_error"] = rep.max_conditional_error;
            j["max_dtw_error"] = rep.max_dtw_error;
            j["max_backtrace_relative_error"] = rep.max_backtrace_error;
            j["max_posterior_normalization_error"] = rep.max_posterior_error;
            j["passed"] = rep.passed();
            std::cout << j.dump(2) << '\n';
            return rep.passed() ? 0 : 1;
        }
    } catch (const nnc::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
