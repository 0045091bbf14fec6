#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <omp.h>

namespace manydelta {

struct EstimatorResult {
    double mean = 0.0;
    double std_error = 0.0;
    long n = 0;
    double ci_half_width = 0.0;
};

// One-pass mean/variance accumulator with pairwise merge.
class Welford {
public:
    void add(double x);
    void merge(const Welford& o);
    long count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const;  // sample variance
    EstimatorResult result(double z = 3.0) const;

private:
    long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

EstimatorResult summarize(const std::vector<double>& xs, double z = 3.0);

struct Agreement {
    double z = 0.0;
    bool pass = true;
};
Agreement agreement_test(const EstimatorResult& a, const EstimatorResult& b, double zmax = 3.0);

class PathFailure : public std::runtime_error {
public:
    PathFailure(std::vector<long> idx, const std::string& first)
        : std::runtime_error(describe(idx, first)), indices(std::move(idx)) {}
    std::vector<long> indices;

private:
    static std::string describe(const std::vector<long>& idx, const std::string& first);
};

// Worker count resolution: positive request wins, otherwise DCS_WORKERS, otherwise 1.
int resolve_workers(int requested);

// Evaluates fn(i) for i in [0, budget), storing results by index. Failures
// are collected and rethrown together as PathFailure.
template <class T, class F>
std::vector<T> map_paths(long budget, int workers, F&& fn) {
    std::vector<T> out(budget);
    std::vector<std::string> errors(budget);
    std::vector<char> failed(budget, 0);
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
    for (long i = 0; i < budget; ++i) {
        try {
            out[i] = fn(i);
        } catch (const std::exception& e) {
            failed[i] = 1;
            errors[i] = e.what();
        }
    }
    std::vector<long> bad;
    std::string first;
    for (long i = 0; i < budget; ++i)
        if (failed[i]) {
            if (bad.empty()) first = errors[i];
            bad.push_back(i);
        }
    if (!bad.empty()) throw PathFailure(std::move(bad), first);
    return out;
}

// Serial reference of map_paths.
template <class T, class F>
std::vector<T> map_paths_serial(long budget, F&& fn) {
    std::vector<T> out(budget);
    std::vector<long> bad;
    std::string first;
    for (long i = 0; i < budget; ++i) {
        try {
            out[i] = fn(i);
        } catch (const std::exception& e) {
            if (bad.empty()) first = e.what();
            bad.push_back(i);
        }
    }
    if (!bad.empty()) throw PathFailure(std::move(bad), first);
    return out;
}

using PathTask = std::function<double(std::uint64_t seed, long path)>;

EstimatorResult run_estimator(const PathTask& task, long budget, int workers,
                              std::uint64_t master_seed, double z = 3.0);
EstimatorResult run_estimator_serial(const PathTask& task, long budget,
                                     std::uint64_t master_seed, double z = 3.0);

}  // namespace manydelta
