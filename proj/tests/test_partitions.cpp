#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "pqv/pqv.hpp"

using namespace pqv;

namespace {

/// Sequence whose level n is the dyadic partition of level shift + scale * n.
PartitionSequence dyadic_reindexed(int lo, int hi, int scale, int shift, int M) {
    const Grid g{M, 1.0, 0.0};
    std::vector<PartitionLevel> out;
    for (int n = lo; n <= hi; ++n) out.push_back({n, dyadic_partition(scale * n + shift, g)});
    return PartitionSequence(std::move(out), "fixture", {});
}

void expect_well_formed(const Partition& p) {
    EXPECT_EQ(p.first(), 0u);
    EXPECT_EQ(p.last(), p.grid().intervals());
    for (std::size_t k = 1; k < p.points(); ++k) EXPECT_LT(p.index(k - 1), p.index(k));
}

}  // namespace

TEST(Partition, RejectsMalformedIndexSets) {
    const Grid g{4, 1.0, 0.0};
    EXPECT_THROW(Partition(g, {0}), ParameterError);
    EXPECT_THROW(Partition(g, {0, 5, 5, 16}), ParameterError);
    EXPECT_THROW(Partition(g, {0, 7, 3, 16}), ParameterError);
    EXPECT_THROW(Partition(g, {0, 17}), ParameterError);
}

TEST(Partition, MeshAndLookup) {
    const Partition p(Grid{4, 2.0, 0.0}, {0, 2, 6, 16});
    EXPECT_EQ(p.intervals(), 3u);
    EXPECT_DOUBLE_EQ(p.mesh(), 10 * 2.0 / 16);
    EXPECT_DOUBLE_EQ(p.min_step(), 2 * 2.0 / 16);
    EXPECT_DOUBLE_EQ(p.ratio(), 5.0);
    EXPECT_TRUE(p.contains(6));
    EXPECT_FALSE(p.contains(5));
    EXPECT_EQ(p.interval_of(0), 0u);
    EXPECT_EQ(p.interval_of(5), 1u);
    EXPECT_EQ(p.interval_of(6), 2u);
    EXPECT_EQ(p.interval_of(16), 2u);
}

TEST(Kadic, DyadicLevelThree) {
    const auto s = gen_dyadic(3, 3, 6, 1.0);
    const auto t = s.at(3).times();
    ASSERT_EQ(t.size(), 9u);
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(t[j], j / 8.0);
    EXPECT_EQ(s.at(3).ratio(), 1.0);
}

TEST(Kadic, LevelZeroIsOneInterval) {
    const auto s = gen_dyadic(0, 2, 6, 1.0);
    EXPECT_EQ(s.at(0).intervals(), 1u);
    EXPECT_EQ(s.at(0).mesh(), 1.0);
}

TEST(Kadic, DyadicRatioExactlyOneEverywhere) {
    const auto s = gen_dyadic(0, 12, 12, 3.0);
    for (const auto& l : s.levels()) {
        expect_well_formed(l.partition);
        EXPECT_EQ(l.partition.ratio(), 1.0);
        EXPECT_EQ(l.partition.mesh(), 3.0 * std::ldexp(1.0, -l.n));
        EXPECT_EQ(l.partition.intervals(), std::size_t{1} << l.n);
    }
}

TEST(Kadic, TriadicSnappedPointsMatchEnumeration) {
    const auto s = gen_kadic(3, 1, 3, 10, 1.0);
    for (const auto& l : s.levels()) {
        const std::uint64_t kn = static_cast<std::uint64_t>(std::pow(3, l.n));
        ASSERT_EQ(l.partition.intervals(), kn);
        for (std::uint64_t j = 0; j <= kn; ++j)
            EXPECT_EQ(l.partition.index(j), oracle::snapped_kadic(j, 10, kn)) << "n=" << l.n << " j=" << j;
    }
    EXPECT_LE(s.at(2).ratio(), 1.0 + std::ldexp(1.0, -10) * 9 * 2);
}

TEST(Kadic, PropertyAcrossBases) {
    for (int k : {3, 5, 6, 7}) {
        const auto s = gen_kadic(k, 0, 3, 14, 1.0);
        for (const auto& l : s.levels()) {
            expect_well_formed(l.partition);
            // snapping moves each point by at most half a step, so lengths differ by at most one step
            EXPECT_LE(l.partition.max_steps() - l.partition.min_steps(), 1u);
            EXPECT_LE(l.partition.ratio(), 1.0 + snapping_bound(double(l.partition.min_steps())));
        }
    }
}

TEST(Kadic, ResolutionErrors) {
    EXPECT_THROW(gen_kadic(3, 1, 5, 8, 1.0), ResolutionError);
    EXPECT_THROW(gen_dyadic(1, 9, 8, 1.0), ResolutionError);
    EXPECT_THROW(gen_kadic(1, 1, 2, 8, 1.0), ParameterError);
    EXPECT_THROW(gen_kadic(2, 3, 2, 8, 1.0), ParameterError);
}

TEST(Lebesgue, ConstantPathIsDegenerate) {
    const auto x = gen_deterministic(PathKind::constant, {{"c", 2}}, 10, 1.0);
    const auto r = gen_lebesgue(x, 3);
    EXPECT_TRUE(r.degenerate);
    EXPECT_EQ(r.partition.intervals(), 1u);
}

TEST(Lebesgue, LinearPathHitsQuarters) {
    const auto x = gen_deterministic(PathKind::linear, {}, 10, 1.0);
    const auto r = gen_lebesgue(x, 2);
    EXPECT_FALSE(r.degenerate);
    const auto t = r.partition.times();
    ASSERT_EQ(t.size(), 5u);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(t[j], 0.25 * j, 1.0 / 1024 + 1e-15);
}

TEST(Lebesgue, BrownianIncrementsMatchTheSpatialGrid) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto x = gen_brownian(seed, 16, 1.0);
        double osc = 0.0;
        for (std::size_t j = 1; j < x.points(); ++j) osc = std::max(osc, std::abs(x.value(j) - x.value(j - 1)));
        const auto r = gen_lebesgue(x, 4);
        ASSERT_FALSE(r.degenerate);
        const auto& p = r.partition;
        for (std::size_t k = 1; k + 1 < p.points(); ++k) {
            const double d = std::abs(x.value(p.index(k)) - x.value(p.index(k - 1)));
            EXPECT_GE(d, 1.0 / 16);
            EXPECT_LE(d, 1.0 / 16 + osc);
            // nothing earlier in the interval reached the threshold
            for (std::size_t j = p.index(k - 1) + 1; j < p.index(k); ++j)
                ASSERT_LT(std::abs(x.value(j) - x.value(p.index(k - 1))), 1.0 / 16);
        }
    }
}

TEST(Lebesgue, RejectsTooFineLevel) {
    EXPECT_THROW(gen_lebesgue(gen_brownian(1, 10, 1.0), 8), ParameterError);
    EXPECT_THROW(gen_lebesgue(gen_brownian(1, 10, 1.0, 2), 2), ParameterError);
}

TEST(RandomBalanced, UnitTargetIsUniform) {
    const auto r = gen_random_balanced(5, 2, 8, 12, 1.0, 1.0);
    const auto d = gen_dyadic(2, 8, 12, 1.0);
    for (const auto& l : r.levels()) EXPECT_EQ(l.partition, d.at(l.n));
}

TEST(RandomBalanced, RatioWithinSnappedTarget) {
    const auto s = gen_random_balanced(7, 8, 8, 16, 1.0, 3.0);
    const auto& p = s.at(8);
    EXPECT_EQ(p.intervals(), 256u);
    EXPECT_LE(p.ratio(), 3.0 * (1.0 + snapping_bound(double(p.min_steps()))));
    expect_well_formed(p);
}

TEST(RandomBalanced, SeedsDifferButCountsAgree) {
    const auto a = gen_random_balanced(1, 4, 10, 16, 1.0, 3.0);
    const auto b = gen_random_balanced(2, 4, 10, 16, 1.0, 3.0);
    const auto a2 = gen_random_balanced(1, 4, 10, 16, 1.0, 3.0);
    for (const auto& l : a.levels()) {
        EXPECT_EQ(l.partition.intervals(), b.at(l.n).intervals());
        EXPECT_FALSE(l.partition == b.at(l.n));
        EXPECT_EQ(l.partition, a2.at(l.n));
    }
    // each level is drawn from its own stream, so the range does not matter
    EXPECT_EQ(gen_random_balanced(1, 7, 7, 16, 1.0, 3.0).at(7), a.at(7));
}

TEST(RandomBalanced, LogSquaredMeshDecreases) {
    // (log n)^2 2^-n itself only starts decreasing at n = 3, so test from 4
    const auto s = gen_random_balanced(3, 4, 12, 16, 1.0, 3.0);
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double a = std::pow(std::log(s[i - 1].n), 2) * s[i - 1].partition.mesh();
        const double b = std::pow(std::log(s[i].n), 2) * s[i].partition.mesh();
        EXPECT_LT(b, a) << "level " << s[i].n;
    }
}

TEST(RandomBalanced, Infeasible) {
    EXPECT_THROW(gen_random_balanced(1, 2, 9, 10, 1.0, 3.0), ResolutionError);
    EXPECT_THROW(gen_random_balanced(1, 2, 4, 10, 1.0, 0.5), ParameterError);
}

TEST(Balance, DyadicAllOnes) {
    const auto r = balance_report(gen_dyadic(2, 10, 12, 1.0), 0.25);
    EXPECT_EQ(r.c_hat, 1.0);
    EXPECT_TRUE(r.balanced);
    EXPECT_TRUE(r.sandwich_holds);
    for (const auto& l : r.levels) {
        EXPECT_EQ(l.ratio, 1.0);
        ASSERT_TRUE(l.window_ratio.has_value());
        EXPECT_EQ(*l.window_ratio, 1.0);
        EXPECT_EQ(l.count_times_min, 1.0);
        EXPECT_EQ(l.count_times_mesh, 1.0);
    }
    EXPECT_EQ(r.max_count_growth, 2.0);
    EXPECT_EQ(r.max_mesh_growth, 2.0);
}

TEST(Balance, OneDoubleInterval) {
    const Grid g{6, 1.0, 0.0};
    std::vector<std::size_t> idx{0, 8};
    for (std::size_t j = 12; j <= 64; j += 4) idx.push_back(j);
    std::vector<PartitionLevel> lv{{1, dyadic_partition(2, g)}, {2, Partition(g, idx)}};
    const auto r = balance_report(PartitionSequence(lv, "fixture", {}), 0.5, 1.5);
    EXPECT_EQ(r.levels[1].ratio, 2.0);
    EXPECT_EQ(r.c_hat, 2.0);
    EXPECT_FALSE(r.balanced);
}

TEST(Balance, WindowCountsMatchBruteForce) {
    const auto s = gen_random_balanced(11, 3, 6, 10, 1.0, 3.0);
    const auto r = balance_report(s, 0.25);
    const std::size_t w = 256;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto& p = s[i].partition;
        std::size_t lo = SIZE_MAX, hi = 0;
        for (std::size_t t = 0; t + w <= 1024; ++t) {
            std::size_t c = 0;
            for (std::size_t j : p.indices()) c += (j >= t && j < t + w);
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        if (p.max_steps() > w) {
            EXPECT_FALSE(r.levels[i].window_ratio.has_value());
            continue;
        }
        ASSERT_TRUE(r.levels[i].window_ratio.has_value());
        EXPECT_EQ(r.levels[i].window_min, lo);
        EXPECT_EQ(r.levels[i].window_max, hi);
    }
}

TEST(Balance, SandwichHoldsForEveryGenerator) {
    std::vector<PartitionSequence> seqs{gen_dyadic(0, 12, 14, 1.0), gen_kadic(3, 0, 5, 14, 2.0),
                                        gen_kadic(5, 1, 4, 14, 1.0)};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        seqs.push_back(gen_random_balanced(seed, 2, 10, 14, 1.0, 1.0 + seed % 4));
        const auto x = gen_brownian(seed, 14, 1.0);
        std::vector<PartitionLevel> lv;
        for (int n = 1; n <= 3; ++n) lv.push_back({n, gen_lebesgue(x, n).partition});
        seqs.emplace_back(std::move(lv), "lebesgue", std::map<std::string, double>{});
    }
    for (const auto& s : seqs) {
        const auto r = balance_report(s, s.grid().horizon / 2);
        EXPECT_TRUE(r.sandwich_holds) << s.generator();
        EXPECT_GE(r.c_hat, 1.0);
        for (const auto& l : s.levels()) {
            const double span = s.grid().horizon;
            EXPECT_LE(l.partition.intervals() * l.partition.min_step(), span * (1 + 1e-15));
            EXPECT_GE(l.partition.intervals() * l.partition.mesh(), span * (1 - 1e-15));
        }
    }
}

TEST(Balance, ParameterErrors) {
    EXPECT_THROW(balance_report(gen_dyadic(2, 2, 8, 1.0), 0.5), ParameterError);
    EXPECT_THROW(balance_report(gen_dyadic(2, 4, 8, 1.0), 1.5), ParameterError);
    EXPECT_THROW(balance_report(gen_dyadic(2, 4, 8, 1.0), 0.0), ParameterError);
}


TEST(Comparability, SelfAndShifted) {
    const auto d = gen_dyadic(2, 10, 12, 1.0);
    const auto self = comparability(d, d);
    EXPECT_TRUE(self.comparable);
    for (const auto& l : self.levels) {
        EXPECT_EQ(l.mesh_ratio, 1.0);
        EXPECT_EQ(l.count_ratio, 1.0);
    }
    const auto shifted = comparability(d, dyadic_reindexed(2, 10, 1, -1, 12));
    EXPECT_TRUE(shifted.comparable);
    EXPECT_EQ(shifted.mesh_limsup, 2.0);
    EXPECT_TRUE(shifted.verdicts_agree);
}

TEST(Comparability, DyadicVersusTriadic) {
    const auto r = comparability(gen_dyadic(1, 6, 14, 1.0), gen_kadic(3, 1, 6, 14, 1.0));
    for (const auto& l : r.levels) EXPECT_NEAR(l.mesh_ratio, std::pow(2.0 / 3.0, l.n), 0.05 * l.mesh_ratio);
    EXPECT_FALSE(r.comparable);
    EXPECT_TRUE(r.verdicts_agree);
}

TEST(Comparability, BalancedVerdictsAgree) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = comparability(gen_dyadic(2, 10, 14, 1.0), gen_random_balanced(seed, 2, 10, 14, 1.0, 3.0));
        EXPECT_TRUE(r.comparable);
        EXPECT_TRUE(r.verdicts_agree);
    }
}

TEST(Comparability, Errors) {
    EXPECT_THROW(comparability(gen_dyadic(2, 4, 10, 1.0), gen_dyadic(2, 4, 10, 2.0)), ParameterError);
    EXPECT_THROW(comparability(gen_dyadic(2, 4, 10, 1.0), gen_dyadic(5, 6, 10, 1.0)), PairingError);
}

TEST(Adjust, ShiftedByOne) {
    const auto tau = gen_dyadic(1, 12, 14, 1.0);
    const auto sigma = dyadic_reindexed(1, 10, 1, 1, 14);
    const auto m = adjust_subsequence(tau, sigma, AdjustMode::i);
    EXPECT_TRUE(m.precondition_holds);
    EXPECT_TRUE(m.sandwich_holds);
    for (const auto& e : m.entries) EXPECT_EQ(e.mapped, e.n + 1);
}

TEST(Adjust, QuarteredMesh) {
    const auto tau = gen_dyadic(0, 16, 16, 1.0);
    const auto sigma = dyadic_reindexed(1, 8, 2, 0, 16);
    const auto m = adjust_subsequence(tau, sigma, AdjustMode::i);
    for (const auto& e : m.entries) {
        EXPECT_EQ(e.mapped, 2 * e.n);
        EXPECT_TRUE(e.sandwich);
    }
    // mode ii: tau/sigma grows like 2^n, so the identity branch is refused
    const auto m2 = adjust_subsequence(tau, sigma, AdjustMode::ii);
    EXPECT_FALSE(m2.ratio_bounded);
    for (const auto& e : m2.entries) EXPECT_EQ(e.mapped, 2 * e.n);
}

TEST(Adjust, ModeTwoIdentityWhenBounded) {
    const auto tau = gen_dyadic(1, 12, 14, 1.0);
    const auto sigma = dyadic_reindexed(1, 10, 1, 1, 14);
    const auto m = adjust_subsequence(tau, sigma, AdjustMode::ii);
    EXPECT_TRUE(m.ratio_bounded);
    for (const auto& e : m.entries) {
        EXPECT_EQ(e.mapped, e.n);
        EXPECT_EQ(e.ratio, 0.5);
    }
}

TEST(Adjust, ModeThreeMatchesBruteForce) {
    const auto tau = gen_dyadic(0, 16, 16, 1.0);
    const auto sigma = dyadic_reindexed(0, 8, 2, 0, 16);
    const auto m = adjust_subsequence(tau, sigma, AdjustMode::iii);
    for (const auto& e : m.entries) {
        const int n = e.n;
        int brute = n;  // |sigma^n| >= |tau^n| keeps n
        if (n < 17 && (n > 8 || std::ldexp(1.0, -2 * n) < std::ldexp(1.0, -n))) {
            brute = -1;
            for (int r = 0; r <= std::min(n, 8); ++r)
                if (std::ldexp(1.0, -2 * r) > std::ldexp(1.0, -n)) brute = r;
        }
        EXPECT_EQ(e.mapped, brute) << "n=" << n;
        if (n >= 1) EXPECT_EQ(e.mapped, (n - 1) / 2) << "n=" << n;
    }
    EXPECT_TRUE(m.sandwich_holds);
}

TEST(Adjust, ModeOneSandwichOnRandomPairs) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto tau = gen_random_balanced(seed, 2, 14, 16, 1.0, 3.0);
        const auto sigma = gen_random_balanced(seed + 100, 2, 10, 16, 1.0, 3.0);
        const auto m = adjust_subsequence(tau, sigma, AdjustMode::i);
        for (const auto& e : m.entries) {
            const double s = sigma.at(e.n).mesh();
            EXPECT_LE(tau.at(e.mapped).mesh(), s);
            if (e.mapped > e.n) EXPECT_GT(tau.at(e.mapped - 1).mesh(), s);
            for (int k = e.n; k < e.mapped; ++k) EXPECT_GT(tau.at(k).mesh(), s);
        }
        EXPECT_TRUE(m.sandwich_holds);
    }
}

TEST(Adjust, Exhaustion) {
    const auto tau = gen_dyadic(1, 6, 14, 1.0);
    const auto sigma = dyadic_reindexed(1, 6, 2, 0, 14);
    EXPECT_THROW(adjust_subsequence(tau, sigma, AdjustMode::i), ExhaustionError);
    const auto coarse = dyadic_reindexed(3, 6, 1, 0, 14);
    EXPECT_THROW(adjust_subsequence(gen_dyadic(1, 6, 14, 1.0), dyadic_reindexed(1, 3, 2, 0, 14), AdjustMode::iii),
                 ExhaustionError);
    (void)coarse;
}

TEST(MapPartition, Identity) {
    const auto d = gen_dyadic(2, 6, 10, 1.0);
    std::vector<double> g(d.grid().points());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = d.grid().time(j);
    const auto m = map_partition(d, g);
    for (const auto& l : d.levels()) EXPECT_EQ(m.sequence.at(l.n).indices().size(), l.partition.points());
    for (const auto& l : d.levels())
        for (std::size_t k = 0; k < l.partition.points(); ++k)
            EXPECT_EQ(m.sequence.at(l.n).index(k), l.partition.index(k));
}

TEST(MapPartition, Doubling) {
    const auto d = gen_dyadic(2, 6, 10, 1.0);
    std::vector<double> g(d.grid().points());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = 2 * d.grid().time(j);
    const auto m = map_partition(d, g);
    EXPECT_EQ(m.sequence.grid().horizon, 2.0);
    for (const auto& l : m.sequence.levels()) {
        EXPECT_EQ(l.partition.ratio(), 1.0);
        EXPECT_EQ(l.partition.mesh(), 2.0 * std::ldexp(1.0, -l.n));
    }
}

TEST(MapPartition, QuadraticSlopeBound) {
    const double T = 1.0;
    const auto d = gen_dyadic(6, 6, 12, T);
    std::vector<double> g(d.grid().points());
    for (std::size_t j = 0; j < g.size(); ++j) {
        const double t = d.grid().time(j);
        g[j] = t + t * t / 2;
    }
    const auto m = map_partition(d, g);
    for (const auto& l : m.levels) {
        EXPECT_TRUE(l.within_bound);
        EXPECT_LE(l.exact_ratio, 1 + T);
    }
    g[5] = g[4];
    EXPECT_THROW(map_partition(d, g), ParameterError);
}

TEST(Stop, FullIntervalIsIdentity) {
    const auto d = gen_dyadic(2, 6, 10, 1.0);
    const auto s = stop_partition(d, 0.0, 1.0);
    for (const auto& l : d.levels()) EXPECT_EQ(s.at(l.n), l.partition);
}

TEST(Stop, DyadicQuarters) {
    const auto s = stop_partition(gen_dyadic(3, 3, 6, 1.0), 0.25, 0.75);
    EXPECT_EQ(s.at(3).times(), (std::vector<double>{0.25, 0.375, 0.5, 0.625, 0.75}));
}

TEST(Stop, RandomBalancedBruteForceFilter) {
    const auto r = gen_random_balanced(4, 2, 8, 12, 1.0, 3.0);
    const auto s = stop_partition(r, 0.1, 0.9);
    const std::size_t a = r.grid().snap(0.1), b = r.grid().snap(0.9);
    for (const auto& l : r.levels()) {
        std::set<std::size_t> want{a, b};
        for (std::size_t j : l.partition.indices())
            if (j >= a && j <= b) want.insert(j);
        const auto got = s.at(l.n).indices();
        EXPECT_EQ(std::set<std::size_t>(got.begin(), got.end()), want);
    }
    const auto empty = stop_partition(gen_dyadic(1, 1, 8, 1.0), 0.1, 0.2);
    EXPECT_EQ(empty.at(1).intervals(), 1u);
    EXPECT_THROW(stop_partition(r, 0.5, 0.5), ParameterError);
}

TEST(PartitionFile, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "pqv_partition_rt";
    std::filesystem::create_directories(dir);
    const auto file = (dir / "parts.csv").string();
    const auto r = gen_random_balanced(9, 2, 7, 12, 2.0, 3.0);
    io::save_partitions(r, file);
    EXPECT_TRUE(std::filesystem::exists(dir / "parts.json"));
    const auto back = io::load_partitions(file);
    EXPECT_EQ(back.generator(), r.generator());
    EXPECT_EQ(back.params(), r.params());
    ASSERT_EQ(back.size(), r.size());
    for (const auto& l : r.levels()) EXPECT_EQ(back.at(l.n), l.partition);
    std::filesystem::remove_all(dir);
}
