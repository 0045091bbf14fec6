#pragma once

#include "manydelta/model.hpp"
#include "manydelta/sde.hpp"

#include <vector>

namespace manydelta {

double reciprocal_sum_gap(const std::vector<double>& xs);

struct DimensionResult {
    double d;
    bool admissible;
};
DimensionResult dimension_d(int n0, double alpha);

// Radii of a subset J of edges along a path, with their radial noise.
struct SubsetPaths {
    std::vector<double> times;
    std::vector<int> edges;
    std::vector<std::vector<double>> radius;  // [edge][grid point]
    std::vector<std::vector<double>> dB;      // [edge][step]
    std::vector<double> sum() const;          // rho = sum_j |Z^j|
};
SubsetPaths subset_paths(const PathRecord& path, const std::vector<int>& edges);

struct ClockPath {
    std::vector<double> level;    // clock value at each grid point
    std::vector<double> dB_sum;   // summed increments per step
};
// Cumulative squared increments of sum_j B^j.
ClockPath clock_process(const SubsetPaths& sp);

// rho2 at each requested level: rho at the last grid point whose clock is
// <= the level, which is the grid form of the right-continuous inverse.
std::vector<double> time_changed_radius(const std::vector<double>& rho, const ClockPath& clock,
                                        const std::vector<double>& levels);

struct ComparisonReport {
    double sigma_k = 0.0;
    double tau_m = 0.0;
    double fraction_dominated = 1.0;
    long points = 0;
    bool started = false;
    long clamps = 0;
};

// Runs the dimension-d Bessel process from (sigma_k, rho2(sigma_k)) on the
// clock grid, driven by the same summed increments, and counts the grid
// points up to tau_m where it stays <= rho2 + tol.
ComparisonReport lower_bessel_compare(const std::vector<double>& rho, const ClockPath& clock,
                                      double dimension, int k, int m, const SimConfig& sim,
                                      double tol = 1e-9);

struct NscScanResult {
    int j_level = 2;
    double min_sum = 0.0;
    long violation_count = 0;
    long grid_points = 0;
};
NscScanResult nsc_scan(const PathRecord& path, int j_level, double threshold);

}  // namespace manydelta
