#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "nnc/pore_model.hpp"
#include "oracles.hpp"

using namespace nnc;

namespace {

std::string random_bases(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back("ATCG"[rng() % 4]);
    return s;
}

std::string table_for(unsigned tau, bool drop_last = false) {
    StateSpace space(tau);
    std::ostringstream os;
    os << "kmer\tlevel_mean\tlevel_stdv\n";
    for (State s = 0; s < space.num_states(); ++s) {
        if (drop_last && s + 1 == space.num_states()) break;
        os << space.state_to_string(s) << '\t' << (0.01 * s - 0.5) << "\t0.1\n";
    }
    return os.str();
}

}  // namespace

TEST(StateSpace, EncodingEndpoints) {
    EXPECT_EQ(StateSpace(1).kmer_to_state(parse_bases("A")), 0u);
    EXPECT_EQ(StateSpace(2).kmer_to_state(parse_bases("AA")), 0u);
    EXPECT_EQ(StateSpace(2).kmer_to_state(parse_bases("GG")), 15u);
}

TEST(StateSpace, RoundTripTau5) {
    StateSpace space(5);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto kmer = parse_bases(random_bases(5, rng()));
        EXPECT_EQ(space.state_to_kmer(space.kmer_to_state(kmer)), kmer);
    }
}

TEST(StateSpace, WrongLengthKmer) {
    EXPECT_THROW(StateSpace(3).kmer_to_state(parse_bases("AT")), LengthError);
}

TEST(StateSpace, TauBounds) {
    EXPECT_THROW(StateSpace(0), DomainError);
    EXPECT_THROW(StateSpace(kMaxTau + 1), DomainError);
}

TEST(StateSpace, StatesFromBasesSingle) {
    StateSpace space(4);
    const auto b = parse_bases("GATC");
    const auto states = space.states_from_bases(b);
    ASSERT_EQ(states.size(), 1u);
    EXPECT_EQ(states[0], space.kmer_to_state(b));
}

TEST(StateSpace, StatesFromBasesSmall) {
    const auto states = StateSpace(2).states_from_bases(parse_bases("AATT"));
    EXPECT_EQ(states, (std::vector<State>{0, 1, 5}));
}

TEST(StateSpace, StatesFromBasesMatchesSlidingWindow) {
    StateSpace space(5);
    const auto text = random_bases(100, 11);
    const auto states = space.states_from_bases(parse_bases(text));
    const auto ref = oracle::sliding_window(text, 5);
    ASSERT_EQ(states.size(), 96u);
    for (std::size_t i = 0; i < states.size(); ++i) EXPECT_EQ(states[i], ref[i]);
    for (std::size_t i = 1; i < states.size(); ++i) EXPECT_TRUE(space.is_successor(states[i - 1], states[i]));
    EXPECT_TRUE(space.is_path(states));
}

TEST(StateSpace, ShortReadRejected) {
    EXPECT_THROW(StateSpace(5).states_from_bases(parse_bases("ACG")), LengthError);
}

TEST(StateSpace, MemorylessSuccessors) {
    StateSpace space(1);
    for (State s = 0; s < 4; ++s) EXPECT_EQ(space.successors(s), (std::array<State, 4>{0, 1, 2, 3}));
}

TEST(StateSpace, ShiftSuccessors) {
    StateSpace space(2);
    const auto succ = space.successors(space.kmer_to_state(parse_bases("AT")));
    std::set<std::string> names;
    for (State s : succ) names.insert(space.state_to_string(s));
    EXPECT_EQ(names, (std::set<std::string>{"TA", "TT", "TC", "TG"}));
}

TEST(StateSpace, InDegreeIsFour) {
    for (unsigned tau = 1; tau <= 5; ++tau) {
        StateSpace space(tau);
        std::vector<std::set<State>> parents(space.num_states());
        for (State p = 0; p < space.num_states(); ++p) {
            for (State s : space.successors(p)) parents[s].insert(p);
        }
        for (State s = 0; s < space.num_states(); ++s) {
            ASSERT_EQ(parents[s].size(), 4u) << "tau " << tau << " state " << s;
            const auto pred = space.predecessors(s);
            EXPECT_EQ(std::set<State>(pred.begin(), pred.end()), parents[s]);
            EXPECT_TRUE(std::is_sorted(pred.begin(), pred.end()));
            for (State p : pred) EXPECT_EQ(space.predecessor_group(s), space.predecessor_group(space.successors(p)[0]));
        }
    }
}

TEST(PoreModelTable, LoadsTau2) {
    std::istringstream in(table_for(2));
    const auto model = load_pore_model(in);
    EXPECT_EQ(model.num_states(), 16u);
    EXPECT_EQ(model.tau(), 2u);
    EXPECT_DOUBLE_EQ(model.level(StateSpace(2).kmer_to_state(parse_bases("GG"))), 0.01 * 15 - 0.5);
}

TEST(PoreModelTable, LoadsTau5) {
    std::istringstream in(table_for(5));
    EXPECT_EQ(load_pore_model(in).tau(), 5u);
}

TEST(PoreModelTable, MissingKmerNamed) {
    std::istringstream in(table_for(5, true));
    try {
        load_pore_model(in);
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("GGGGG"), std::string::npos) << e.what();
    }
}

TEST(PoreModelTable, MissingKmerAAAAC) {
    std::ostringstream os;
    os << "kmer\tlevel_mean\n";
    StateSpace space(5);
    const State gone = space.kmer_to_state(parse_bases("AAAAC"));
    for (State s = 0; s < space.num_states(); ++s) {
        if (s != gone) os << space.state_to_string(s) << "\t0.0\n";
    }
    std::istringstream in(os.str());
    try {
        load_pore_model(in);
        FAIL() << "expected a format error";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("AAAAC"), std::string::npos) << e.what();
    }
}

TEST(PoreModelTable, BadRows) {
    std::istringstream dup("kmer\tlevel_mean\nA\t0\nA\t1\nT\t0\nC\t0\nG\t0\n");
    EXPECT_THROW(load_pore_model(dup), FormatError);
    std::istringstream nan("kmer\tlevel_mean\nA\tx\nT\t0\nC\t0\nG\t0\n");
    EXPECT_THROW(load_pore_model(nan), FormatError);
    std::istringstream header("kmer\tmean\nA\t0\n");
    EXPECT_THROW(load_pore_model(header), FormatError);
}

TEST(PoreModelTable, WriteReadRoundTrip) {
    const auto model = synth_pore_model(3, 42);
    std::stringstream ss;
    write_pore_model(ss, model);
    const auto back = load_pore_model(ss);
    for (State s = 0; s < model.num_states(); ++s) EXPECT_EQ(back.level(s), model.level(s));
}

TEST(SynthModel, Deterministic) {
    const auto a = synth_pore_model(2, 7);
    const auto b = synth_pore_model(2, 7);
    EXPECT_TRUE(std::equal(a.levels().begin(), a.levels().end(), b.levels().begin()));
}

TEST(SynthModel, StandardMoments) {
    const auto model = synth_pore_model(5, 1);
    ASSERT_EQ(model.num_states(), 1024u);
    double mean = 0.0, var = 0.0;
    for (double v : model.levels()) mean += v;
    mean /= 1024.0;
    for (double v : model.levels()) var += (v - mean) * (v - mean);
    var /= 1023.0;
    EXPECT_LT(std::abs(mean), 5.0 / std::sqrt(1024.0));
    EXPECT_LT(std::abs(var - 1.0), 5.0 * std::sqrt(2.0 / 1023.0));
}

TEST(SynthModel, SeedsDiffer) {
    EXPECT_NE(synth_pore_model(5, 1).level(0), synth_pore_model(5, 2).level(0));
}

TEST(Alphabet, RejectsUnknown) {
    EXPECT_THROW(parse_bases("ACGN"), DomainError);
    EXPECT_EQ(bases_to_string(parse_bases("acgt")), "ACGT");
}
