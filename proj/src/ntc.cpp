#include "manydelta/ntc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace manydelta {

double reciprocal_sum_gap(const std::vector<double>& xs) {
    if (xs.size() < 2) throw ParamError("reciprocal_sum_gap needs at least two values");
    double inv = 0.0, sum = 0.0;
    for (double x : xs) {
        if (!(x > 0)) throw ParamError("reciprocal_sum_gap needs positive values");
        inv += 1.0 / x;
        sum += x;
    }
    double n = static_cast<double>(xs.size());
    return std::max(0.0, inv - n * n / sum);
}

DimensionResult dimension_d(int n0, double alpha) {
    if (n0 < 2 || !(alpha >= 0)) throw ParamError("dimension_d needs n0 >= 2 and alpha >= 0");
    double n = n0;
    double first = n * n * (1 - 2 * alpha) / (n + n * (n - 1) / 2);
    return {first + 1, first >= 1};
}

std::vector<double> SubsetPaths::sum() const {
    std::vector<double> out(times.size(), 0.0);
    for (const auto& r : radius)
        for (size_t k = 0; k < r.size(); ++k) out[k] += r[k];
    return out;
}

SubsetPaths subset_paths(const PathRecord& path, const std::vector<int>& edges) {
    SubsetPaths sp;
    sp.times = path.times;
    sp.edges = edges;
    sp.radius.assign(edges.size(), std::vector<double>(path.times.size()));
    sp.dB.assign(edges.size(), std::vector<double>(path.steps()));
    std::vector<Complex> seps;
    for (size_t k = 0; k < path.times.size(); ++k) {
        Configuration z(path.state_ptr(k), path.state_ptr(k) + path.n);
        separations(z, seps);
        for (size_t a = 0; a < edges.size(); ++a) {
            sp.radius[a][k] = std::abs(seps[edges[a]]);
            if (k < path.steps()) {
                Complex dw = derive_relative_noise(path.noise_ptr(k), edge_at(edges[a]));
                sp.dB[a][k] = radial_noise_increment(seps[edges[a]], dw);
            }
        }
    }
    return sp;
}

ClockPath clock_process(const SubsetPaths& sp) {
    const size_t steps = sp.times.empty() ? 0 : sp.times.size() - 1;
    for (const auto& b : sp.dB)
        if (b.size() != steps) throw ParamError("clock_process: noise and grid sizes differ");
    for (const auto& r : sp.radius)
        if (r.size() != sp.times.size()) throw ParamError("clock_process: radius and grid sizes differ");
    ClockPath c;
    c.level.assign(sp.times.size(), 0.0);
    c.dB_sum.assign(steps, 0.0);
    for (size_t k = 0; k < steps; ++k) {
        double s = 0.0;
        for (const auto& b : sp.dB) s += b[k];
        c.dB_sum[k] = s;
        c.level[k + 1] = c.level[k] + s * s;
    }
    return c;
}

std::vector<double> time_changed_radius(const std::vector<double>& rho, const ClockPath& clock,
                                        const std::vector<double>& levels) {
    if (rho.size() != clock.level.size()) throw ParamError("time_changed_radius: size mismatch");
    std::vector<double> out;
    out.reserve(levels.size());
    for (double l : levels) {
        // last grid point with level <= l: the right end of a flat stretch
        auto it = std::upper_bound(clock.level.begin(), clock.level.end(), l);
        size_t idx = it == clock.level.begin() ? 0 : static_cast<size_t>(it - clock.level.begin()) - 1;
        out.push_back(rho[idx]);
    }
    return out;
}

ComparisonReport lower_bessel_compare(const std::vector<double>& rho, const ClockPath& clock,
                                      double dimension, int k, int m, const SimConfig& sim,
                                      double tol) {
    if (!(dimension >= 2)) throw ParamError("lower_bessel_compare: dimension must be at least 2");
    if (rho.size() != clock.level.size() || clock.dB_sum.size() + 1 != rho.size())
        throw ParamError("lower_bessel_compare: size mismatch");
    ComparisonReport rep;
    const double start_level = 1.0 / k, exit_level = 1.0 / m;
    size_t s = 0;
    while (s < rho.size() && rho[s] < start_level) ++s;
    if (s >= rho.size()) return rep;
    rep.started = true;
    rep.sigma_k = clock.level[s];
    std::vector<double> noise(clock.dB_sum.begin() + s, clock.dB_sum.end());
    std::vector<double> dl(noise.size());
    for (size_t q = 0; q < dl.size(); ++q) dl[q] = clock.level[s + q + 1] - clock.level[s + q];
    BesselPath bp = simulate_bessel(dimension, rho[s], rep.sigma_k, sim, nullptr, noise, dl);
    rep.clamps = bp.clamps;
    long good = 0;
    rep.tau_m = clock.level.back();
    for (size_t q = 0; q < bp.r.size(); ++q) {
        double r2 = rho[s + q], r1 = bp.r[q];
        ++rep.points;
        if (r1 <= r2 + tol) ++good;
        if (r1 <= exit_level || r2 <= exit_level) {
            rep.tau_m = clock.level[s + q];
            break;
        }
    }
    rep.fraction_dominated = rep.points ? double(good) / double(rep.points) : 1.0;
    return rep;
}

NscScanResult nsc_scan(const PathRecord& path, int j_level, double threshold) {
    const int m = edge_count(path.n);
    if (j_level < 2 || j_level > m) throw ParamError("nsc_scan: j_level must lie in [2, #edges]");
    NscScanResult out;
    out.j_level = j_level;
    out.min_sum = std::numeric_limits<double>::infinity();
    std::vector<Complex> seps;
    std::vector<double> r(m);
    for (size_t k = 0; k < path.times.size(); ++k) {
        Configuration z(path.state_ptr(k), path.state_ptr(k) + path.n);
        separations(z, seps);
        for (int e = 0; e < m; ++e) r[e] = std::abs(seps[e]);
        std::partial_sort(r.begin(), r.begin() + j_level, r.end());
        double s = 0.0;
        for (int q = 0; q < j_level; ++q) s += r[q];
        out.min_sum = std::min(out.min_sum, s);
        if (s < threshold) ++out.violation_count;
        ++out.grid_points;
    }
    return out;
}

}  // namespace manydelta
