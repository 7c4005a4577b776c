#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nnc/dataset_io.hpp"

using namespace nnc;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("nnc_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

void write_text(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::vector<Read> sample_reads() {
    Read a;
    a.read_id = "read-a";
    a.channel_id = 12;
    a.bases = parse_bases("ACGTTGCA");
    a.signal = {0.1, -2.5, 1.0 / 3.0, 1e-17, 123456.789};
    a.truth_jump_times = std::vector<std::size_t>{1, 2, 3, 4, 5};
    Read b;
    b.read_id = "read-b";
    b.channel_id = 3;
    b.bases = parse_bases("GGA");
    b.signal = {0.0, 0.5};
    b.q_score = 11.25;
    return {a, b};
}

}  // namespace

TEST(Dataset, EmptyFile) {
    TempDir dir;
    write_text(dir.file("e.jsonl"), "");
    EXPECT_TRUE(read_dataset(dir.file("e.jsonl")).empty());
}

TEST(Dataset, RoundTripPlainAndGzip) {
    TempDir dir;
    const auto reads = sample_reads();
    Json meta{{"tool", "test"}};
    for (const char* name : {"d.jsonl", "d.jsonl.gz"}) {
        write_dataset(dir.file(name), reads, &meta);
        EXPECT_EQ(read_dataset(dir.file(name)), reads) << name;
    }
    std::ifstream gz(dir.file("d.jsonl.gz"), std::ios::binary);
    EXPECT_EQ(gz.get(), 0x1f);
    EXPECT_EQ(gz.get(), 0x8b);
}

TEST(Dataset, GzipIsByteStable) {
    TempDir dir;
    const auto reads = sample_reads();
    write_dataset(dir.file("a.jsonl.gz"), reads);
    write_dataset(dir.file("b.jsonl.gz"), reads);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    EXPECT_EQ(slurp(dir.file("a.jsonl.gz")), slurp(dir.file("b.jsonl.gz")));
}

TEST(Dataset, RejectsUnknownBase) {
    TempDir dir;
    write_text(dir.file("n.jsonl"),
               "{\"read_id\":\"ok\",\"channel_id\":1,\"bases\":\"ACGT\",\"signal\":[0.0]}\n"
               "{\"read_id\":\"bad-read\",\"channel_id\":1,\"bases\":\"ACNT\",\"signal\":[0.0]}\n");
    try {
        read_dataset(dir.file("n.jsonl"));
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("bad-read"), std::string::npos) << e.what();
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Dataset, ErrorsCarryLineNumbers) {
    TempDir dir;
    write_text(dir.file("m.jsonl"), "{\"_meta\":{}}\n\n{not json}\n");
    try {
        read_dataset(dir.file("m.jsonl"));
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    write_text(dir.file("f.jsonl"), "{\"read_id\":\"x\",\"bases\":\"A\",\"signal\":[1]}\n");
    EXPECT_THROW(read_dataset(dir.file("f.jsonl")), FormatError);
    write_text(dir.file("i.jsonl"), "{\"read_id\":\"x\",\"channel_id\":1,\"bases\":\"A\",\"signal\":[1e999]}\n");
    EXPECT_THROW(read_dataset(dir.file("i.jsonl")), FormatError);
    write_text(dir.file("s.jsonl"), "{\"read_id\":\"x\",\"channel_id\":1,\"bases\":\"A\",\"signal\":[1,\"a\"]}\n");
    EXPECT_THROW(read_dataset(dir.file("s.jsonl")), InputError);
    EXPECT_THROW(read_dataset(dir.file("missing.jsonl")), InputError);
}

TEST(Dataset, StreamingPreservesOrder) {
    TempDir dir;
    const auto reads = sample_reads();
    write_dataset(dir.file("s.jsonl"), reads);
    std::vector<std::string> ids;
    for_each_read(dir.file("s.jsonl"), [&](Read&& r) { ids.push_back(r.read_id); });
    EXPECT_EQ(ids, (std::vector<std::string>{"read-a", "read-b"}));
}

TEST(Blocks, RoundTrip) {
    TempDir dir;
    Block b;
    b.states = {1, 7, 12};
    b.signal = {0.25, -0.5, 1.0 / 7.0, 2.0};
    b.initial_state = 4;
    b.read_id = "r";
    b.channel_id = 5;
    b.block_index = 2;
    b.mean_duration = 9.75;
    write_blocks(dir.file("b.jsonl.gz"), std::vector<Block>{b, b});
    const auto back = read_blocks(dir.file("b.jsonl.gz"));
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0], b);
}

TEST(Normalize, FixedPoint) {
    const std::vector<double> raw{3.0, 7.5, -1.0, 4.2, 9.9, 0.3, 5.5};
    const auto once = normalize_signal(raw);
    const auto twice = normalize_signal(once);
    for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(twice[i], once[i], 1e-12);
}

TEST(Normalize, AffineInvariant) {
    const std::vector<double> x{3.0, 7.5, -1.0, 4.2, 9.9, 0.3, 5.5, 2.0};
    std::vector<double> ax;
    for (double v : x) ax.push_back(12.5 * v - 80.0);
    const auto a = normalize_signal(x), b = normalize_signal(ax);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Normalize, MedianMadByHand) {
    const std::vector<double> x{1.0, 2.0, 4.0, 8.0, 16.0};
    // median 4, |x - 4| = {3, 2, 0, 4, 12}, MAD 3.
    const auto out = normalize_signal(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(out[i], (x[i] - 4.0) / (1.4826 * 3.0));
}

TEST(Normalize, ZeroMadFallsBack) {
    const auto out = normalize_signal(std::vector<double>{0, 0, 0, 10});
    std::vector<double> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(0.5 * (sorted[1] + sorted[2]), 0.0);
    EXPECT_DOUBLE_EQ(out[3], 10.0 / (kMeanAbsToSigma * 2.5));
    EXPECT_TRUE(std::all_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); }));
}

TEST(Normalize, Errors) {
    EXPECT_THROW(normalize_signal(std::vector<double>{2.0, 2.0, 2.0}), DomainError);
    EXPECT_THROW(normalize_signal(std::vector<double>{1.0}), DomainError);
    EXPECT_THROW(normalize_signal(std::vector<double>{1.0, NAN}), InputError);
}
