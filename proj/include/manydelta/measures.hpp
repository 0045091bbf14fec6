#pragma once

#include "manydelta/mc.hpp"
#include "manydelta/model.hpp"
#include "manydelta/sde.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace manydelta {

inline constexpr size_t kPathEnd = std::numeric_limits<size_t>::max();

enum class LocalTimeMethod {
    Kernel,  // 1/2 kappa_eps(|Z^i|) ds occupation surrogate
    Tanaka,  // increments of the 1/K0 decomposition; valid under the one-delta law of edge i
};

struct WeightFunctional {
    double a_tilde = 0.0;
    double a_ring = 0.0;
    double exp_functional = 1.0;
    double n_ring = 0.0;
    double n_tilde = 0.0;
    double qv_n = 0.0;
};

// Functionals over the grid window [from, to] (state indices).
double a_tilde(const PathRecord& path, const ModelParams& p, int i, size_t to = kPathEnd,
               size_t from = 0);
double a_ring(const PathRecord& path, const ModelParams& p, int i, double eps,
              LocalTimeMethod method = LocalTimeMethod::Kernel, size_t to = kPathEnd, size_t from = 0);
double exp_functional(const PathRecord& path, const ModelParams& p, int i, double eps,
                      LocalTimeMethod method = LocalTimeMethod::Kernel, size_t to = kPathEnd,
                      size_t from = 0);
WeightFunctional weight_functional(const PathRecord& path, const ModelParams& p, int i, double eps,
                                   LocalTimeMethod method = LocalTimeMethod::Kernel,
                                   size_t to = kPathEnd, size_t from = 0);

// Terminal |log-ratio change - (A~ + A° + N - <N>/2)|. The midpoint flag
// evaluates the integrands at interval midpoints instead of left points.
double rn_identity_residual(const PathRecord& path, const ModelParams& p, int i, double eps,
                            bool midpoint = false, size_t to = kPathEnd);

enum class QvMode {
    Riemann,  // quadratic-variation terms as ds integrals, trapezoid rule
    Sampled,  // quadratic-variation terms against realised squared increments
};

struct ItoTerms {
    std::vector<double> terms;  // I(1)..I(k)
    double lhs = 0.0;           // F(end) - F(start)
    double residual() const;
};

// Five-term decomposition of log(w_i G0(2 beta_i (eps + R^i))).
ItoTerms ito_terms_one_delta(const PathRecord& path, const ModelParams& p, int i, double eps_reg,
                             QvMode mode = QvMode::Riemann, size_t to = kPathEnd);
double ito_residual_one_delta(const PathRecord& path, const ModelParams& p, int i, double eps_reg,
                              QvMode mode = QvMode::Riemann, size_t to = kPathEnd);
// Nine-term decomposition of log sum_j w_j G0(2 beta_j (eps_j + R^j)) under the one-delta law of i.
ItoTerms ito_terms_many(const PathRecord& path, const ModelParams& p, int i,
                        const std::vector<double>& eps_reg, QvMode mode = QvMode::Sampled,
                        size_t to = kPathEnd);
double ito_residual_many(const PathRecord& path, const ModelParams& p, int i,
                         const std::vector<double>& eps_reg, QvMode mode = QvMode::Sampled,
                         size_t to = kPathEnd);

enum class ResidualKind { ItoOneDelta, ItoMany, RN };

struct ResidualStudy {
    std::vector<double> coarse, fine;  // per path, steps dt and dt / 2
    double median_coarse = 0.0, median_fine = 0.0;
    double min_radius = 0.0;  // smallest positively weighted radius on the fine paths
};

// One-delta paths of edge i on [0, t], each simulated at dt and at dt / 2
// from the same Brownian increments. `eps` is the regularisation for the Ito
// kinds and the kernel width for RN.
ResidualStudy residual_study(const Configuration& z0, const ModelParams& p, int i, ResidualKind kind,
                             double dt, double t, double eps, QvMode mode, long paths, int workers,
                             std::uint64_t seed);

using ConfigFunctional = std::function<double(const Configuration&)>;

// exp(-int sum_j beta_j w_j K0_j / K-sum ds) K-sum(tau) / K-sum(0) along a
// free Brownian path, tau being the path end.
double girsanov_weight(const PathRecord& path, const ModelParams& p);

// Both estimators stop at the first grid time where a positively weighted
// radius is <= eta, capped at t_cap. The step size is sim.dt_max.
EstimatorResult girsanov_bm_estimator(const Configuration& z0, const ModelParams& p,
                                      const ConfigFunctional& f, double eta, double t_cap,
                                      const SimConfig& sim, long budget, int workers,
                                      std::uint64_t seed);
EstimatorResult direct_many_delta_estimator(const Configuration& z0, const ModelParams& p,
                                            const ConfigFunctional& f, double eta, double t_cap,
                                            const SimConfig& sim, long budget, int workers,
                                            std::uint64_t seed);

struct MassResult {
    EstimatorResult total;
    std::vector<int> edges;
    std::vector<double> start_weights;         // w_i K0_i(0) / K-sum(0)
    std::vector<EstimatorResult> per_edge;     // E^i[exp(-A~(tau))]
    long unfinished = 0;                       // paths capped by t_max before a contact
};

// Sum over positively weighted i of the start weight times E^i[exp(-A~)] at
// the first positively weighted contact (radius <= sim.contact_threshold),
// capped at sim.t_max. `budget` paths per edge.
MassResult weighted_average_mass(const Configuration& z0, const ModelParams& p,
                                 const SimConfig& sim, long budget, int workers, std::uint64_t seed);

struct MartingaleResult {
    EstimatorResult stopped;
    EstimatorResult unstopped;
    long stopped_early = 0;
};

// E^i of the exponential functional at t ^ T_eta (non-i positively weighted
// radii <= eta) and at t without stopping.
MartingaleResult stopped_martingale_test(const Configuration& z0, const ModelParams& p, int i,
                                         double t, double eta, double eps, const SimConfig& sim,
                                         long budget, int workers, std::uint64_t seed,
                                         LocalTimeMethod method = LocalTimeMethod::Kernel);

}  // namespace manydelta
