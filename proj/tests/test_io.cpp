#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "pqv/pqv.hpp"

using namespace pqv;

TEST(Seeds, HashAndMixingAreStable) {
    EXPECT_EQ(fnv1a(""), 0xCBF29CE484222325ull);
    EXPECT_EQ(fnv1a("a"), 0xAF63DC4C8601EC8Cull);
    EXPECT_EQ(splitmix64(0), 0xE220A8397B1DCDAFull);
    EXPECT_EQ(derive_seed(7, "x"), splitmix64(7 ^ fnv1a("x")));
    EXPECT_NE(derive_seed(7, "fbm"), derive_seed(7, "brownian"));
}

TEST(Seeds, RngIsReproducible) {
    Rng a(3), b(3), c(4);
    for (int i = 0; i < 10; ++i) {
        const double x = a.normal();
        EXPECT_EQ(x, b.normal());
        EXPECT_NE(x, c.normal());
    }
    Rng u(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform(1.0, 3.0);
        EXPECT_GE(v, 1.0);
        EXPECT_LT(v, 3.0);
    }
}

TEST(Csv, DoublesRoundTripExactly) {
    const std::vector<double> vals{0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::nextafter(1.0, 2.0),
                                   std::numeric_limits<double>::denorm_min(), 0.0, -0.0};
    io::CsvWriter w({"v"});
    for (double v : vals) w.row(v);
    const auto t = io::parse_csv(w.str());
    ASSERT_EQ(t.rows.size(), vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double back = io::parse_double(t.rows[i][0]);
        EXPECT_EQ(std::memcmp(&back, &vals[i], sizeof(double)), 0) << t.rows[i][0];
    }
}

TEST(Csv, HeaderOnlyWhenEmpty) {
    io::CsvWriter w({"t", "i", "j", "value", "level"});
    EXPECT_EQ(w.str(), "t,i,j,value,level\n");
    const auto t = io::parse_csv(w.str());
    EXPECT_TRUE(t.rows.empty());
    EXPECT_EQ(t.column("level"), 4u);
    EXPECT_THROW(t.column("missing"), ParameterError);
}

TEST(Csv, MixedCellsAndErrors) {
    io::CsvWriter w({"a", "b", "c"});
    w.row(1, std::string("x"), 0.5);
    EXPECT_EQ(w.str(), "a,b,c\n1,x,0.5\n");
    EXPECT_THROW(io::parse_csv(""), ParameterError);
    EXPECT_THROW(io::parse_csv("a,b\n1\n"), ParameterError);
    EXPECT_THROW(io::parse_double("1.5x"), ParameterError);
    EXPECT_THROW(io::parse_int("3.0"), ParameterError);
    EXPECT_EQ(io::parse_int("-12"), -12);
    EXPECT_EQ(io::parse_csv("a,b\r\n1,2\r\n").rows[0][1], "2");
}

TEST(PartitionFile, TableLayoutAndSidecar) {
    const auto d = gen_dyadic(1, 2, 4, 1.0);
    EXPECT_EQ(io::partition_table(d).str(), "level,index\n1,0\n1,8\n1,16\n2,0\n2,4\n2,8\n2,12\n2,16\n");
    const auto j = io::partition_sidecar(d);
    EXPECT_EQ(j["generator"], "kadic");
    EXPECT_EQ(j["M"], 4);
    EXPECT_EQ(j["T"], 1.0);
    EXPECT_EQ(io::sidecar_path("dir/parts.csv"), "dir/parts.json");
}

TEST(PartitionFile, RejectsBadFiles) {
    const auto dir = std::filesystem::temp_directory_path() / "pqv_io_bad";
    std::filesystem::create_directories(dir);
    const auto csv = (dir / "p.csv").string();
    const auto d = gen_dyadic(1, 2, 4, 1.0);
    io::save_partitions(d, csv);
    {
        std::ofstream f(csv);
        f << "level,index\n1,0\n1,9\n1,8\n";
    }
    EXPECT_THROW(io::load_partitions(csv), ParameterError);
    {
        std::ofstream f(csv);
        f << "level,index\n1,0\n1,99\n";
    }
    EXPECT_THROW(io::load_partitions(csv), ParameterError);
    std::filesystem::remove(dir / "p.json");
    EXPECT_ANY_THROW(io::load_partitions(csv));
    std::filesystem::remove_all(dir);
}

TEST(PathFile, SaveAndLoad) {
    const auto dir = std::filesystem::temp_directory_path() / "pqv_io_path";
    std::filesystem::create_directories(dir);
    const auto f = (dir / "x.pqv").string();
    const auto x = gen_fbm(5, 9, 2.0, 0.3);
    io::save_path(x, f);
    const auto y = io::load_path(f);
    EXPECT_TRUE(std::equal(x.samples().begin(), x.samples().end(), y.samples().begin(), y.samples().end()));
    EXPECT_EQ(y.meta().params, x.meta().params);
    EXPECT_THROW(io::load_path((dir / "missing.pqv").string()), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(Stats, Basics) {
    const std::vector<double> v{3, 1, 2, 5, 4};
    EXPECT_EQ(stats::mean(v), 3.0);
    EXPECT_EQ(stats::variance(v), 2.5);
    EXPECT_EQ(stats::median(v), 3.0);
    EXPECT_EQ(stats::median({1, 2, 3, 4}), 2.5);
    EXPECT_EQ(stats::fraction_below(v, 3.0), 0.4);
    const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    const auto fit = stats::linear_fit(x, y);
    EXPECT_DOUBLE_EQ(fit.slope, 2.0);
    EXPECT_DOUBLE_EQ(fit.intercept, 1.0);
    EXPECT_DOUBLE_EQ(fit.r2, 1.0);
    EXPECT_TRUE(stats::linear_fit(std::vector<double>{1, 1}, std::vector<double>{0, 1}).degenerate);
}

TEST(Parallel, OrderedResultsAndErrors) {
    for (std::size_t w : {1u, 3u, 8u}) {
        const auto r = parallel_map(50, w, [](std::size_t i) {
            std::this_thread::sleep_for(std::chrono::microseconds((50 - i) * 10));
            return i * i;
        });
        ASSERT_EQ(r.size(), 50u);
        for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(r[i], i * i);
    }
    EXPECT_THROW(parallel_map(10, 4,
                              [](std::size_t i) -> int {
                                  if (i == 6) throw ParameterError("boom");
                                  return 0;
                              }),
                 ParameterError);
    EXPECT_TRUE(parallel_map(0, 4, [](std::size_t) { return 1; }).empty());
}

TEST(Parallel, PathGenerationIsThreadIndependent) {
    const auto a = parallel_map(8, 1, [](std::size_t i) { return gen_brownian(i + 1, 10, 1.0).value(1024); });
    const auto b = parallel_map(8, 4, [](std::size_t i) { return gen_brownian(i + 1, 10, 1.0).value(1024); });
    EXPECT_EQ(a, b);
}
