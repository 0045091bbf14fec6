#include <doctest.h>

#include "manydelta/mc.hpp"
#include "manydelta/rng.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace manydelta;

TEST_CASE("philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    // Reference vectors distributed with Random123.
    CHECK(philox4x32_10(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and keyed") {
    Stream a(42, 7), b(42, 7), c(42, 8), d(43, 7), e(42, 7, Substream::Auxiliary);
    for (int k = 0; k < 1000; ++k) {
        double x = a.normal();
        CHECK(x == b.normal());
        CHECK(x != c.normal());
        CHECK(x != d.normal());
        CHECK(x != e.normal());
    }
}

TEST_CASE("distinct keys give uncorrelated normals") {
    const int n = 20000;
    std::vector<StreamKey> keys = {{1, 0, Substream::Noise},     {1, 1, Substream::Noise},
                                   {2, 0, Substream::Noise},     {1, 0, Substream::Auxiliary},
                                   {1, 0, Substream::Reference}, {1ull << 32, 0, Substream::Noise},
                                   {1, 1ull << 32, Substream::Noise}};
    std::vector<std::vector<double>> xs;
    for (auto& k : keys) {
        Stream s(k);
        std::vector<double> v(n);
        for (auto& x : v) x = s.normal();
        xs.push_back(v);
    }
    for (size_t a = 0; a < xs.size(); ++a) {
        double m = 0, q = 0;
        for (double x : xs[a]) m += x, q += x * x;
        CHECK(std::abs(m / n) < 5 / std::sqrt(double(n)));
        CHECK(std::abs(q / n - 1) < 5 * std::sqrt(2.0 / n));
        for (size_t b = a + 1; b < xs.size(); ++b) {
            double c = 0;
            for (int k = 0; k < n; ++k) c += xs[a][k] * xs[b][k];
            CHECK(std::abs(c / n) < 5 / std::sqrt(double(n)));
        }
    }
}

TEST_CASE("uniform and exponential draws") {
    Stream s(9, 0);
    Welford u, e;
    for (int k = 0; k < 100000; ++k) {
        double x = s.uniform();
        CHECK((x >= 0 && x < 1));
        u.add(x);
        e.add(s.exponential(2.0));
    }
    CHECK(std::abs(u.mean() - 0.5) <= 3 * u.result().std_error);
    CHECK(std::abs(e.mean() - 0.5) <= 3 * e.result().std_error);
}

TEST_CASE("welford matches two-pass statistics and merges associatively") {
    std::mt19937_64 g(5);
    std::lognormal_distribution<double> dist(0, 1);
    std::vector<double> xs(5000);
    for (auto& x : xs) x = 1e6 + dist(g);
    double m = 0;
    for (double x : xs) m += x;
    m /= xs.size();
    double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= xs.size() - 1;
    auto r = summarize(xs);
    CHECK(r.mean == doctest::Approx(m).epsilon(1e-14));
    CHECK(r.std_error == doctest::Approx(std::sqrt(v / xs.size())).epsilon(1e-9));
    CHECK(r.ci_half_width == doctest::Approx(3 * r.std_error));

    for (int trial = 0; trial < 50; ++trial) {
        std::vector<size_t> cuts = {0, g() % 5000, g() % 5000, g() % 5000, 5000};
        std::sort(cuts.begin(), cuts.end());
        std::vector<Welford> parts(4);
        for (int p = 0; p < 4; ++p)
            for (size_t k = cuts[p]; k < cuts[p + 1]; ++k) parts[p].add(xs[k]);
        Welford left = parts[0], right = parts[3];
        left.merge(parts[1]);
        left.merge(parts[2]);
        left.merge(parts[3]);
        Welford mid = parts[2];
        mid.merge(parts[3]);
        Welford alt = parts[1];
        alt.merge(mid);
        right = parts[0];
        right.merge(alt);
        auto a = left.result(), b = right.result();
        CHECK(a.n == 5000);
        CHECK(std::abs(a.mean - b.mean) <= 1e-12 * std::abs(a.mean));
        CHECK(std::abs(a.std_error - b.std_error) <= 1e-12 * a.std_error);
        CHECK(std::abs(a.mean - r.mean) <= 1e-12 * std::abs(r.mean));
        CHECK(std::abs(a.std_error - r.std_error) <= 1e-9 * r.std_error);
    }
}

TEST_CASE("estimator examples") {
    auto c = run_estimator([](std::uint64_t, long) { return 2.5; }, 100, 2, 1);
    CHECK(c.mean == 2.5);
    CHECK(c.std_error == 0.0);
    CHECK(c.n == 100);

    auto u = run_estimator([](std::uint64_t seed, long i) { return Stream(seed, i).uniform(); }, 100000, 2, 3);
    CHECK(std::abs(u.mean - 0.5) <= 3 * u.std_error);

    CHECK_THROWS_AS(run_estimator([](std::uint64_t, long) { return 1.0; }, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("worker count does not change result bits") {
    PathTask task = [](std::uint64_t seed, long i) {
        Stream s(seed, i);
        double acc = 0;
        for (int k = 0; k < 50; ++k) acc += std::exp(0.1 * s.normal());
        return acc;
    };
    auto ref = run_estimator_serial(task, 4000, 11);
    for (int w : {1, 2, 4, 8}) {
        auto r = run_estimator(task, 4000, w, 11);
        CHECK(std::memcmp(&r.mean, &ref.mean, sizeof(double)) == 0);
        CHECK(std::memcmp(&r.std_error, &ref.std_error, sizeof(double)) == 0);
    }
}

TEST_CASE("path failures are aggregated with indices") {
    PathTask task = [](std::uint64_t, long i) -> double {
        if (i % 7 == 3) throw std::runtime_error("boom");
        return 1.0;
    };
    for (int w : {1, 4}) {
        try {
            run_estimator(task, 30, w, 1);
            FAIL("expected PathFailure");
        } catch (const PathFailure& f) {
            CHECK(f.indices == std::vector<long>{3, 10, 17, 24});
            CHECK(std::string(f.what()).find("boom") != std::string::npos);
        }
    }
}

TEST_CASE("agreement test") {
    EstimatorResult a{1.0, 0.1, 100, 0.3};
    auto same = agreement_test(a, a);
    CHECK(same.z == 0.0);
    CHECK(same.pass);
    EstimatorResult x{0.0, 1e-6, 100, 3e-6}, y{1.0, 1e-6, 100, 3e-6};
    CHECK_FALSE(agreement_test(x, y).pass);
    EstimatorResult p{0.0, 0.3, 10, 0.9}, q{1.0, 0.4, 10, 1.2};
    CHECK(agreement_test(p, q).z == doctest::Approx(2.0));
}

TEST_CASE("worker resolution") {
    CHECK(resolve_workers(3) == 3);
    setenv("DCS_WORKERS", "5", 1);
    CHECK(resolve_workers(0) == 5);
    setenv("DCS_WORKERS", "junk", 1);
    CHECK(resolve_workers(0) == 1);
    unsetenv("DCS_WORKERS");
    CHECK(resolve_workers(0) == 1);
}
