#include "manydelta/mc.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

namespace manydelta {

void Welford::add(double x) {
    ++n_;
    double d = x - mean_;
    mean_ += d / n_;
    m2_ += d * (x - mean_);
}

void Welford::merge(const Welford& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
        *this = o;
        return;
    }
    long n = n_ + o.n_;
    double d = o.mean_ - mean_;
    mean_ += d * double(o.n_) / double(n);
    m2_ += o.m2_ + d * d * double(n_) * double(o.n_) / double(n);
    n_ = n;
}

double Welford::variance() const { return n_ > 1 ? m2_ / double(n_ - 1) : 0.0; }

EstimatorResult Welford::result(double z) const {
    EstimatorResult r;
    r.mean = mean_;
    r.n = n_;
    r.std_error = n_ > 1 ? std::sqrt(variance() / double(n_)) : 0.0;
    r.ci_half_width = z * r.std_error;
    return r;
}

EstimatorResult summarize(const std::vector<double>& xs, double z) {
    Welford w;
    for (double x : xs) w.add(x);
    return w.result(z);
}

Agreement agreement_test(const EstimatorResult& a, const EstimatorResult& b, double zmax) {
    double diff = std::abs(a.mean - b.mean);
    double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    Agreement g;
    if (se > 0) g.z = diff / se;
    else g.z = diff == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    g.pass = g.z <= zmax;
    return g;
}

std::string PathFailure::describe(const std::vector<long>& idx, const std::string& first) {
    std::string s = std::to_string(idx.size()) + " path(s) failed, indices:";
    for (size_t k = 0; k < idx.size() && k < 20; ++k) s += " " + std::to_string(idx[k]);
    if (idx.size() > 20) s += " ...";
    return s + "; first error: " + first;
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DCS_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

EstimatorResult run_estimator(const PathTask& task, long budget, int workers,
                              std::uint64_t master_seed, double z) {
    if (budget < 2) throw std::invalid_argument("run_estimator: budget must be at least 2");
    auto xs = map_paths<double>(budget, workers, [&](long i) { return task(master_seed, i); });
    return summarize(xs, z);
}

EstimatorResult run_estimator_serial(const PathTask& task, long budget,
                                     std::uint64_t master_seed, double z) {
    if (budget < 2) throw std::invalid_argument("run_estimator: budget must be at least 2");
    auto xs = map_paths_serial<double>(budget, [&](long i) { return task(master_seed, i); });
    return summarize(xs, z);
}

}  // namespace manydelta
