#include "doctest.h"
#include "random_configs.hpp"

#include "manydelta/model.hpp"
#include "manydelta/specfun.hpp"

#include <cmath>
#include <random>

using namespace manydelta;

namespace {

// Pairwise formula written directly in particle coordinates with std:: Bessel functions.
std::vector<Complex> brute_particle_drift(const Configuration& z, const ModelParams& p) {
    int n = static_cast<int>(z.size());
    double ksum = 0;
    for (int u = 1; u < n; ++u)
        for (int l = 0; l < u; ++l) {
            int e = edge_index({u, l});
            if (p.weight[e] > 0)
                ksum += p.weight[e] * std::cyl_bessel_k(0.0, std::sqrt(p.beta[e]) * std::abs(z[u] - z[l]));
        }
    std::vector<Complex> b(n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            if (k == j) continue;
            int e = edge_index({std::max(j, k), std::min(j, k)});
            double w = p.weight[e], sb = std::sqrt(p.beta[e]);
            Complex d = z[j] - z[k];
            b[j] -= w * sb * std::cyl_bessel_k(1.0, sb * std::abs(d)) * d / (ksum * std::abs(d));
        }
    return b;
}

double max_abs(const std::vector<Complex>& v) {
    double m = 0;
    for (auto c : v) m = std::max(m, std::abs(c));
    return m;
}

}  // namespace

TEST_CASE("edge indexing is a lexicographic bijection") {
    for (int n = 3; n <= 7; ++n) {
        auto es = all_edges(n);
        REQUIRE(static_cast<int>(es.size()) == edge_count(n));
        for (int k = 0; k < edge_count(n); ++k) {
            CHECK(edge_index(es[k]) == k);
            CHECK(edge_at(k) == es[k]);
            if (k > 0) {
                auto a = es[k - 1], b = es[k];
                CHECK((a.upper < b.upper || (a.upper == b.upper && a.lower < b.lower)));
            }
        }
    }
    CHECK(edge_key({1, 0}) == "2-1");
    CHECK(parse_edge_key("3-1", 3) == Edge{2, 0});
    CHECK_THROWS_AS(parse_edge_key("1-3", 3), ParamError);
    CHECK_THROWS_AS(parse_edge_key("4-1", 3), ParamError);
    CHECK_THROWS_AS(parse_edge_key("2_1", 3), ParamError);
    CHECK_THROWS_AS(parse_edge_key("2-1x", 3), ParamError);
}

TEST_CASE("sigma dot products") {
    CHECK(sigma_dot({1, 0}, {1, 0}) == 2);
    CHECK(sigma_dot({2, 0}, {1, 0}) == 1);
    CHECK(sigma_dot({2, 1}, {1, 0}) == -1);
    CHECK(sigma_dot({3, 2}, {1, 0}) == 0);
    for (auto a : all_edges(6))
        for (auto b : all_edges(6)) {
            CHECK(sigma_dot(a, b) == sigma_dot(b, a));
            // Direct vector enumeration.
            int v[6] = {0}, w[6] = {0};
            v[a.upper] += 1; v[a.lower] -= 1;
            w[b.upper] += 1; w[b.lower] -= 1;
            int dot = 0;
            for (int i = 0; i < 6; ++i) dot += v[i] * w[i];
            CHECK(sigma_dot(a, b) == dot);
        }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(ModelParams::create(2, {1.0}, {1.0}), ParamError);
    CHECK_THROWS_AS(ModelParams::create(3, {1, 1, 1}, {1, 0, 0}), ParamError);
    CHECK_THROWS_AS(ModelParams::create(3, {1, 0, 1}, {1, 1, 1}), ParamError);
    CHECK_THROWS_AS(ModelParams::create(3, {1, 1, 1}, {1, -1, 1}), ParamError);
    CHECK_THROWS_AS(ModelParams::create(3, {1, 1}, {1, 1}), ParamError);
    auto p = ModelParams::create(3, {1, 2, 1}, {1, 0, 1});
    CHECK(p.homogeneous());
    auto q = ModelParams::create(3, {1, 2, 1}, {1, 1, 1});
    CHECK_FALSE(q.homogeneous());
    CHECK(q.indicator(1).positive_count() == 1);
}

TEST_CASE("weighted K0 sum") {
    auto p = ModelParams::create(3, {1.0, 2.0, 0.5}, {1.0, 0.0, 1e-300});
    auto one = p.indicator(1);
    double r = 1 / std::sqrt(2 * 2.0);
    Configuration z = {{0, 0}, {5, 0}, {r * std::sqrt(2.0), 0}};
    CHECK(weighted_k0_sum(z, one) == doctest::Approx(specfun::k0(1.0)).epsilon(1e-14));

    double d = 0.7;
    Configuration tri = {{0, 0}, {d, 0}, {d / 2, d * std::sqrt(3.0) / 2}};
    auto h = ModelParams::uniform(3, 1.0);
    CHECK(weighted_k0_sum(tri, h) == doctest::Approx(3 * std::cyl_bessel_k(0.0, d)).epsilon(1e-13));
    auto h2 = ModelParams::uniform(3, 1.0, 2.0);
    CHECK(weighted_k0_sum(tri, h2) == doctest::Approx(2 * weighted_k0_sum(tri, h)).epsilon(1e-15));

    Configuration hit = {{0, 0}, {0, 0}, {1, 0}};
    CHECK_THROWS_AS(weighted_k0_sum(hit, h), SingularState);
    // Zero-weight pair at contact is harmless.
    auto skip = ModelParams::create(3, {1, 1, 1}, {0, 1, 1});
    CHECK(weighted_k0_sum(hit, skip) > 0);

    // Widely separated pairs stay finite in log form.
    Configuration wide = {{0, 0}, {3000, 0}, {0, 4000}};
    CHECK(std::isfinite(log_weighted_k0_sum(wide, h)));
    auto b = drift_particles(wide, h);
    for (auto c : b) CHECK(std::isfinite(std::abs(c)));
}

TEST_CASE("particle drift matches the pairwise formula") {
    std::mt19937_64 g(11);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 3 + trial % 3;
        auto p = testutil::random_params(g, n);
        auto z = testutil::random_config(g, n);
        auto b = drift_particles(z, p);
        auto ref = brute_particle_drift(z, p);
        double scale = max_abs(ref);
        for (int j = 0; j < n; ++j) CHECK(std::abs(b[j] - ref[j]) <= 1e-12 * scale);
    }
}

TEST_CASE("drift invariants on random configurations") {
    std::mt19937_64 g(5);
    for (int trial = 0; trial < 3000; ++trial) {
        int n = 3 + trial % 3;
        auto p = testutil::random_params(g, n);
        auto z = testutil::random_config(g, n);
        auto b = drift_particles(z, p);
        Complex s = 0;
        for (auto c : b) s += c;
        CHECK(std::abs(s) <= 1e-12 * max_abs(b));

        auto rel = drift_relative(z, p);
        for (auto e : all_edges(n)) {
            Complex lin = (b[e.upper] - b[e.lower]) / std::sqrt(2.0);
            CHECK(std::abs(rel[edge_index(e)] - lin) <= 1e-12 * std::max(1.0, max_abs(rel)));
        }

        auto scaled = p;
        for (auto& w : scaled.weight) w *= 3.7;
        auto b2 = drift_particles(z, scaled);
        for (int j = 0; j < n; ++j) CHECK(std::abs(b2[j] - b[j]) <= 1e-12 * max_abs(b));
    }
}

TEST_CASE("single weight reduces to the one-delta drift") {
    std::mt19937_64 g(9);
    for (int trial = 0; trial < 200; ++trial) {
        int n = 3 + trial % 3;
        auto p = testutil::random_params(g, n);
        int i = trial % edge_count(n);
        auto one = p.indicator(i);
        auto z = testutil::random_config(g, n);
        auto b = drift_particles(z, one);
        Edge e = edge_at(i);
        double sb = std::sqrt(p.beta[i]);
        Complex d = z[e.upper] - z[e.lower];
        double a = std::abs(d);
        Complex bu = -sb * std::cyl_bessel_k(1.0, sb * a) / std::cyl_bessel_k(0.0, sb * a) * d / a;
        for (int j = 0; j < n; ++j) {
            Complex want = j == e.upper ? bu : (j == e.lower ? -bu : Complex(0));
            CHECK(std::abs(b[j] - want) <= 1e-12 * std::abs(bu));
        }
        // Relative drift on the active edge: -ratio / conj(Z).
        auto rel = drift_relative(z, one);
        Complex zi = d / std::sqrt(2.0);
        Complex want = -specfun::ratio_khat1_k0(std::sqrt(2 * p.beta[i]) * std::abs(zi)) / std::conj(zi);
        CHECK(std::abs(rel[i] - want) <= 1e-12 * std::abs(want));
    }
}

TEST_CASE("equilateral homogeneous drift points at the centroid") {
    double d = 0.9, beta = 1.3;
    Configuration z = {{0, 0}, {d, 0}, {d / 2, d * std::sqrt(3.0) / 2}};
    Complex c = (z[0] + z[1] + z[2]) / 3.0;
    auto b = drift_particles(z, ModelParams::uniform(3, beta));
    double sb = std::sqrt(beta);
    // two unit pulls 60 degrees apart add up to sqrt(3)
    double mag = std::sqrt(3.0) * sb * std::cyl_bessel_k(1.0, sb * d) / (3 * std::cyl_bessel_k(0.0, sb * d));
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(b[j]) == doctest::Approx(mag).epsilon(1e-12));
        Complex dir = (c - z[j]) / std::abs(c - z[j]);
        CHECK(std::abs(b[j] / std::abs(b[j]) - dir) < 1e-12);
    }
}

TEST_CASE("relative drift against a loop over edges") {
    std::mt19937_64 g(21);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = testutil::random_params(g, 3);
        auto z = testutil::random_config(g, 3);
        auto seps = separations(z);
        double ks = 0;
        for (int k = 0; k < 3; ++k)
            if (p.weight[k] > 0) ks += p.weight[k] * std::cyl_bessel_k(0.0, std::sqrt(2 * p.beta[k]) * std::abs(seps[k]));
        auto rel = drift_relative(z, p);
        for (int j = 0; j < 3; ++j) {
            Complex want = 0;
            for (int k = 0; k < 3; ++k) {
                double x = std::sqrt(2 * p.beta[k]) * std::abs(seps[k]);
                double c = p.weight[k] * x * std::cyl_bessel_k(1.0, x) / ks;
                want -= 0.5 * sigma_dot(edge_at(j), edge_at(k)) * c * seps[k] / std::norm(seps[k]);
            }
            CHECK(std::abs(rel[j] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
    }
}

namespace {
double brute_phi(const std::vector<int>& S, int j, const Configuration& z, const ModelParams& p) {
    auto s = separations(z);
    int m = static_cast<int>(s.size());
    double ks = 0;
    for (int k = 0; k < m; ++k)
        if (p.weight[k] > 0) ks += p.weight[k] * std::cyl_bessel_k(0.0, std::sqrt(2 * p.beta[k]) * std::abs(s[k]));
    auto kh = [&](int k) {
        double x = std::sqrt(2 * p.beta[k]) * std::abs(s[k]);
        return p.weight[k] * x * std::cyl_bessel_k(1.0, x);
    };
    double v = 0;
    for (int k = 0; k < m; ++k) {
        bool in = std::find(S.begin(), S.end(), k) != S.end();
        double sd = sigma_dot(edge_at(j), edge_at(k));
        double re = std::real(s[k] / s[j]);
        if (in) v += std::abs(s[j]) / std::abs(s[k]) * re * sd * kh(j) / ks;
        else v += std::norm(s[j]) / std::norm(s[k]) * re * sd * kh(k) / ks;
    }
    return v;
}
}  // namespace

TEST_CASE("phi term") {
    std::mt19937_64 g(3);
    auto p = ModelParams::uniform(4, 1.0);
    auto z = testutil::random_config(g, 4);
    auto s = separations(z);
    KsumTerms t;
    evaluate_ksum(s, p, 0, t);
    // A subset holding only j has only the self term among in-subset terms,
    // and zero-weight outside edges remove the rest.
    auto only = p;
    std::fill(only.weight.begin(), only.weight.end(), 0.0);
    only.weight[2] = 1.0;
    only.weight[4] = 2.0;
    std::vector<int> all(edge_count(4));
    for (int k = 0; k < edge_count(4); ++k) all[k] = k;
    CHECK(phi_term({2}, 2, z, only) == doctest::Approx(brute_phi({2}, 2, z, only)).epsilon(1e-12));

    for (int trial = 0; trial < 200; ++trial) {
        auto q = testutil::random_params(g, 4);
        auto y = testutil::random_config(g, 4);
        std::vector<int> S = {0, 3, 5};
        for (int j : S) {
            double ref = brute_phi(S, j, y, q);
            CHECK(std::abs(phi_term(S, j, y, q) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
        }
    }
    CHECK_THROWS_AS(phi_term({0, 1}, 2, z, p), ParamError);
}

TEST_CASE("phi self term with the full edge set") {
    // When every edge but j has zero weight and lies outside the subset, only
    // the self term remains: 2 w_j Khat1_j / K-sum.
    auto p = ModelParams::uniform(3, 1.0);
    std::fill(p.weight.begin(), p.weight.end(), 0.0);
    p.weight[1] = 1.0;
    Configuration z = {{0, 0}, {1, 0.2}, {-0.3, 0.5}};
    auto s = separations(z);
    KsumTerms t;
    evaluate_ksum(s, p, 0, t);
    CHECK(phi_term({1}, 1, z, p) == doctest::Approx(2 * t.coeff[1]).epsilon(1e-14));
}

TEST_CASE("phi bound and radial drift sum") {
    std::mt19937_64 g(17);
    int violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        int n = 3 + trial % 3;
        auto p = testutil::random_params(g, n);
        auto z = testutil::random_config(g, n);
        int m = edge_count(n);
        std::vector<int> S;
        for (int k = 0; k < m; ++k)
            if ((trial >> (k % 8)) & 1 || k == trial % m) S.push_back(k);
        auto s = separations(z);
        KsumTerms t;
        evaluate_ksum(s, p, 0, t);
        double out = 0;
        for (int k = 0; k < m; ++k)
            if (std::find(S.begin(), S.end(), k) == S.end()) out += t.coeff[k] / t.radius[k];
        double lhs = 0, rhs = 0;
        for (int j : S) {
            double phi = phi_term(S, j, z, p);
            double bound = 2.0 * S.size() * t.coeff[j] + 2.0 * out * t.radius[j];
            if (std::abs(phi) > bound * (1 + 1e-12)) ++violations;
            lhs += (1 - phi) / (2 * t.radius[j]);
            // Radial component of the relative drift plus the Ito term.
            double radial = 1 / (2 * t.radius[j]);
            for (int k = 0; k < m; ++k)
                radial -= 0.5 * sigma_dot(edge_at(j), edge_at(k)) * t.coeff[k] *
                          std::real(s[j] / s[k]) / t.radius[j];
            rhs += radial;
        }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    CHECK(violations == 0);
}

TEST_CASE("state classification") {
    auto p = ModelParams::create(3, {1, 1, 1}, {1, 1, 0});
    CHECK(classify_state({{0, 0}, {1, 0}, {0, 1}}, p, 0).tag == StateClass::Tag::AllSeparated);
    auto c = classify_state({{0, 0}, {0, 0}, {0, 1}}, p, 0);
    CHECK(c.tag == StateClass::Tag::SingleContact);
    CHECK(c.edge == 0);
    CHECK(classify_state({{0, 0}, {0, 0}, {0, 0}}, p, 0).tag == StateClass::Tag::MultiContact);
    // Zero-weight edge at contact does not count.
    CHECK(classify_state({{0, 0}, {0, 1}, {0, 1}}, p, 0).tag == StateClass::Tag::AllSeparated);
    CHECK(classify_state({{0, 0}, {1e-4, 0}, {0, 1}}, p, 1e-3).tag == StateClass::Tag::SingleContact);
    CHECK(classify_state({{0, 0}, {1e-4, 0}, {0, 1}}, p, 0).tag == StateClass::Tag::AllSeparated);
}
