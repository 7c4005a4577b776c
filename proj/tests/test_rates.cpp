#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nnc/rates.hpp"

using namespace nnc;

namespace {

std::vector<Base> balanced_bases(std::size_t n, Rng& rng) {
    std::vector<Base> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<Base>(i % 4);
    std::shuffle(b.begin(), b.end(), rng);
    return b;
}

Read simulated(const PoreModel& model, std::size_t n, double E, double sigma, std::uint64_t seed,
               std::int64_t channel = 1) {
    Rng rng(seed);
    auto bases = balanced_bases(n, rng);
    const auto sr = simulate_read(model, bases, {E, sigma}, rng);
    Read r;
    r.read_id = "r" + std::to_string(seed);
    r.channel_id = channel;
    r.bases = std::move(bases);
    r.signal = sr.signal;
    r.truth_jump_times = sr.truth.jump_times;
    return r;
}

BlockResult result(std::string id, std::int64_t channel, std::size_t index, double density, double sigma_dtw) {
    BlockResult b;
    b.read_id = std::move(id);
    b.channel_id = channel;
    b.block_index = index;
    b.m = 100;
    b.t = 1000;
    b.info_density = density;
    b.log_app = (density - 2.0) * 100 * std::numbers::ln2;
    b.sigma_dtw = sigma_dtw;
    b.mean_duration = 10.0;
    return b;
}

}  // namespace

TEST(InfoDensity, Endpoints) {
    EXPECT_EQ(info_density(0.0, 100), 2.0);
    EXPECT_NEAR(info_density(100 * std::log(0.25), 100), 0.0, 1e-14);
    EXPECT_NEAR(info_density(-70.0, 100), 2.0 - 70.0 / (100 * std::numbers::ln2), 1e-15);
    EXPECT_NEAR(info_density(-70.0, 100), 0.990, 5e-4);
}

TEST(RateLossBound, Values) {
    EXPECT_EQ(rate_loss_bound(5, 100), 0.1);
    EXPECT_EQ(rate_loss_bound(0, 100), 0.0);
    double prev = rate_loss_bound(5, 1);
    for (std::size_t m = 2; m < 100000; m *= 3) {
        const double v = rate_loss_bound(5, m);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(MeanDuration, Estimates) {
    EXPECT_EQ(estimate_mean_duration(1000, 100), 10.0);
    const auto model = synth_pore_model(2, 1);
    Rng rng(3);
    const auto bases = balanced_bases(4001, rng);
    const auto r = simulate_read(model, bases, {12.4, 0.5}, rng);
    const double se = std::sqrt(12.4 * 11.4 / 4000.0);
    EXPECT_LT(std::abs(estimate_mean_duration(r.signal.size(), r.states.size()) - 12.4), 5 * se);
    const auto r1 = simulate_read(model, bases, {1.0, 1e-9}, rng);
    EXPECT_EQ(estimate_mean_duration(r1.signal.size(), r1.states.size()), 1.0);
    EXPECT_THROW(estimate_mean_duration(0, 3), DomainError);
}

TEST(Filter, Constraints) {
    const auto model = synth_pore_model(5, 2);
    const ReadConstraints c;
    auto good = simulated(model, 10000, 10.0, 0.5, 4);
    EXPECT_EQ(check_read(good, c, 5), "");

    auto short_read = good;
    short_read.bases.resize(7999);
    EXPECT_NE(check_read(short_read, c, 5).find("length"), std::string::npos);
    auto boundary = good;
    boundary.bases.resize(8000);
    EXPECT_NE(check_read(boundary, c, 5).find("length"), std::string::npos);

    auto all_a = good;
    std::fill(all_a.bases.begin(), all_a.bases.end(), Base::A);
    EXPECT_NE(check_read(all_a, c, 5).find("typicality"), std::string::npos);

    auto slow = good;
    slow.signal.resize(20 * 9996, 0.0);
    EXPECT_NE(check_read(slow, c, 5).find("mean duration"), std::string::npos);

    const auto res = filter_reads({good, all_a, short_read}, c, 5);
    ASSERT_EQ(res.retained.size(), 1u);
    EXPECT_EQ(res.rejected.size(), 2u);
}

TEST(Outage, Counting) {
    const std::vector<double> d{0.5, 1.0, 1.5};
    const auto c = outage_curve(d, std::vector<double>{0.0, 1.0, 2.0});
    EXPECT_EQ(c.probabilities, (std::vector<double>{0.0, 2.0 / 3.0, 1.0}));
    const auto grid = linear_grid(-1.0, 3.0, 41);
    const auto full = outage_curve(d, grid);
    EXPECT_TRUE(std::is_sorted(full.probabilities.begin(), full.probabilities.end()));
    EXPECT_THROW(outage_curve(std::vector<double>{}, grid), DomainError);
}

TEST(Outliers, Filtering) {
    std::vector<BlockResult> blocks{result("a", 1, 0, 1.0, 0.2), result("a", 1, 1, 1.2, 0.3)};
    EXPECT_EQ(filter_outlier_blocks(blocks, 0.35).size(), 2u);
    EXPECT_TRUE(filter_outlier_blocks(blocks, 0.0).empty());
    EXPECT_THROW(filter_outlier_blocks(blocks, -1.0), DomainError);
}

TEST(Outliers, InjectedLevelShiftRemoved) {
    const auto model = synth_pore_model(2, 6);
    RatePolicy policy;
    policy.sigma = 0.2;
    policy.chop = ChopSource::truth;
    std::vector<Block> blocks;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto r = simulated(model, 502, 6.0, 0.2, seed);
        for (auto& b : prepare_read_blocks(r, model, policy)) blocks.push_back(std::move(b));
    }
    ASSERT_EQ(blocks.size(), 20u);
    // One block in twenty (5%) gets a +2.0 level shift.
    auto corrupted = blocks[11];
    for (auto& v : blocks[11].signal) v += 2.0;
    const auto results = decode_blocks(blocks, model, 0.2, TransitionWeights::full, 2);
    EXPECT_GT(results[11].sigma_dtw, 0.35);
    const auto kept = filter_outlier_blocks(results, 0.35);
    EXPECT_EQ(kept.size(), 19u);
    for (const auto& b : kept) {
        EXPECT_FALSE(b.read_id == corrupted.read_id && b.block_index == corrupted.block_index);
    }
}

TEST(Summary, PerChannelAndPooled) {
    std::vector<BlockResult> blocks{result("a", 1, 0, 1.0, 0.2), result("a", 1, 1, 1.4, 0.5),
                                    result("b", 2, 0, 1.8, 0.1)};
    blocks.push_back(result("c", 2, 0, 0.0, 0.1));
    blocks.back().ok = false;
    const auto rep = summarize(blocks, 0.35, 100, 5);
    EXPECT_EQ(rep.blocks, 3u);
    EXPECT_EQ(rep.failed_blocks, 1u);
    EXPECT_EQ(rep.outliers_removed, 1u);
    EXPECT_DOUBLE_EQ(rep.pooled_rate, (1.0 + 1.4 + 1.8) / 3);
    EXPECT_DOUBLE_EQ(rep.pooled_rate_without_outliers, (1.0 + 1.8) / 2);
    EXPECT_EQ(rep.bases_per_block, 104u);
    EXPECT_EQ(rep.rate_loss_bound, 0.1);
    ASSERT_EQ(rep.per_channel.size(), 2u);
    EXPECT_DOUBLE_EQ(rep.per_channel.at(1).rate, 1.2);
    EXPECT_EQ(rep.per_channel.at(1).outlier_count, 1u);
    EXPECT_DOUBLE_EQ(rep.per_channel.at(2).rate_without_outliers, 1.8);
    EXPECT_NEAR(pooled_rate_from_log_app(blocks), rep.pooled_rate, 1e-12);
}

TEST(Pipeline, SmallEndToEnd) {
    const auto model = synth_pore_model(2, 9);
    std::vector<Read> reads;
    for (std::uint64_t s = 1; s <= 3; ++s) reads.push_back(simulated(model, 322, 8.0, 0.3, s, 1 + s % 2));
    RatePolicy policy;
    policy.block_length = 40;
    policy.sigma = 0.3;
    policy.threads = 2;
    const auto est = estimate_rate(reads, model, policy);
    EXPECT_EQ(est.report.blocks, 3u * 8u);
    EXPECT_EQ(est.report.reads_used, 3u);
    EXPECT_TRUE(std::is_sorted(est.blocks.begin(), est.blocks.end(), [](const auto& a, const auto& b) {
        return std::tie(a.read_id, a.block_index) < std::tie(b.read_id, b.block_index);
    }));
    double sum = 0.0;
    for (const auto& b : est.blocks) {
        EXPECT_TRUE(b.ok) << b.error;
        EXPECT_LE(b.info_density, 2.0);
        EXPECT_NEAR(b.info_density, info_density(b.log_app, 40), 0);
        EXPECT_LT(b.sigma_dtw, 1.0);
        sum += b.info_density;
    }
    EXPECT_DOUBLE_EQ(est.report.pooled_rate, sum / 24.0);
    EXPECT_GT(est.report.pooled_rate, 0.5);
    const auto json = report_to_json(est.report);
    EXPECT_EQ(json["N_s"].get<std::size_t>(), 24u);
    EXPECT_EQ(json["per_channel"].size(), 2u);
}

TEST(Pipeline, RateFallsWithNoise) {
    const auto model = synth_pore_model(2, 10);
    double prev = 3.0;
    for (double sigma : {0.1, 0.3, 0.5}) {
        std::vector<Read> reads;
        for (std::uint64_t s = 1; s <= 4; ++s) reads.push_back(simulated(model, 402, 10.0, sigma, s));
        RatePolicy policy;
        policy.sigma = sigma;
        policy.block_length = 50;
        const auto est = estimate_rate(reads, model, policy);
        EXPECT_LT(est.report.pooled_rate, prev) << sigma;
        prev = est.report.pooled_rate;
    }
}

TEST(Pipeline, TruthChopNeedsTruth) {
    const auto model = synth_pore_model(2, 9);
    auto r = simulated(model, 202, 5.0, 0.3, 1);
    r.truth_jump_times.reset();
    RatePolicy policy;
    policy.chop = ChopSource::truth;
    const auto est = estimate_rate(std::vector<Read>{r}, model, policy);
    EXPECT_EQ(est.report.reads_failed, 1u);
    EXPECT_EQ(est.report.blocks, 0u);
}

TEST(Csv, BlocksRoundTrip) {
    std::vector<BlockResult> blocks{result("a", 1, 0, 1.0 / 3.0, 0.2), result("b", 7, 2, 1.7, 0.123456789012345)};
    std::stringstream ss;
    ss << "# comment\n";
    write_blocks_csv(ss, blocks);
    const auto back = read_blocks_csv(ss);
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back[i].read_id, blocks[i].read_id);
        EXPECT_EQ(back[i].channel_id, blocks[i].channel_id);
        EXPECT_EQ(back[i].info_density, blocks[i].info_density);
        EXPECT_EQ(back[i].log_app, blocks[i].log_app);
        EXPECT_EQ(back[i].sigma_dtw, blocks[i].sigma_dtw);
    }
    std::stringstream bad("h\nx,1,2\n");
    EXPECT_THROW(read_blocks_csv(bad), FormatError);
}

TEST(Svg, Renders) {
    std::ostringstream os;
    write_outage_svg(os, {{"all", outage_curve(std::vector<double>{1.0, 1.2}, linear_grid(0, 2, 5))}});
    EXPECT_NE(os.str().find("<svg"), std::string::npos);
    EXPECT_NE(os.str().find("polyline"), std::string::npos);
}
