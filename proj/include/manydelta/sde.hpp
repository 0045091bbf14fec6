#pragma once

#include "manydelta/model.hpp"
#include "manydelta/rng.hpp"

#include <stdexcept>
#include <vector>

namespace manydelta {

class NumericalBlowup : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SimConfig {
    double dt_max = 1e-3;
    double dt_min = 1e-14;
    // Adaptive step: dt = clamp(rel_step * r_min^2, dt_min, dt_max).
    double rel_step = 0.05;
    double contact_threshold = 1e-3;
    double radius_floor = 1e-6;
    double taming_cap = 0.5;
    double t_max = 1.0;
    int max_contacts = 1000;
    long max_steps = 50'000'000;
    // Optional stop rule: end the path at the first grid time where a
    // selected edge has radius <= stop_radius (0 disables). An empty mask
    // selects every positively weighted edge.
    double stop_radius = 0.0;
    std::vector<char> stop_mask;

    void validate() const;
};

struct ContactEvent {
    double time;
    int edge;
    double pre_radius;
};

struct PathRecord {
    int n = 0;
    std::vector<double> times;    // rounded from a compensated sum; may repeat below ulp(t)
    std::vector<double> step_dt;  // exact step sizes
    std::vector<Complex> states;  // times.size() * n, row-major
    std::vector<Complex> noise;   // (times.size() - 1) * n particle increments
    std::vector<ContactEvent> contacts;
    bool absorbed = false;
    bool stopped = false;  // stop rule fired
    long projections = 0;  // steps where a pair was pushed back to radius_floor
    long tamed = 0;
    double radius_floor = 0.0;  // floor the path was simulated with

    size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
    Configuration state(size_t k) const;
    const Complex* state_ptr(size_t k) const { return states.data() + k * n; }
    const Complex* noise_ptr(size_t k) const { return noise.data() + k * n; }
    double dt(size_t k) const { return step_dt.empty() ? times[k + 1] - times[k] : step_dt[k]; }
};

// (dW^upper - dW^lower)/sqrt(2).
Complex derive_relative_noise(const Complex* increments, Edge e);
// Re(conj(Z)/|Z| * dW), the radial projection of a relative increment.
double radial_noise_increment(Complex edge_state, Complex relative_increment);

// Drift law used by the integrator.
enum class DriftMode { ManyDelta, OneDelta, Free };

struct StepWorkspace {
    std::vector<Complex> seps;
    std::vector<Complex> drift;
    KsumTerms terms;
};

// One adaptive tamed Euler step in place. `increments` are standard complex
// normals (unit variance per real component), scaled by sqrt(dt) inside;
// on return they hold the Brownian increments actually used. Returns dt.
double step_many_delta(Configuration& z, const ModelParams& drift_params, const SimConfig& sim,
                       std::vector<Complex>& increments, StepWorkspace& ws,
                       double t_remaining = 1e300, long* tamed = nullptr,
                       long* projections = nullptr);

PathRecord simulate_many_delta(const Configuration& z0, const ModelParams& p, const SimConfig& sim,
                               Stream& rng);
// Drift of the single pair `active_edge`; contacts are still recorded for
// every edge weighted positively in `p`. The active pair is stepped as log Z
// on the clock dt / |Z|^2, everything else as Brownian motion. Step sizes
// follow the same law as the many-delta integrator.
PathRecord simulate_one_delta(const Configuration& z0, const ModelParams& p, int active_edge,
                              const SimConfig& sim, Stream& rng);
// Independent Brownian particles with the same contact bookkeeping.
PathRecord simulate_free(const Configuration& z0, const ModelParams& p, const SimConfig& sim,
                         Stream& rng);

// Fixed steps of size dt driven by `normals` (n standard complex normals per
// step) under the drift of `drift_params`; no contact bookkeeping.
PathRecord simulate_on_grid(const Configuration& z0, const ModelParams& drift_params, double dt,
                            const std::vector<Complex>& normals, double radius_floor = 1e-6);
// Normals of the doubled step: (a + b) / sqrt(2) over consecutive step pairs.
std::vector<Complex> coarsen_normals(const std::vector<Complex>& normals, int n);

struct RadialPath {
    std::vector<double> times;  // rounded from a compensated sum
    std::vector<double> dt;     // exact step sizes
    std::vector<double> du;     // steps of the clock dt / r^2
    std::vector<double> r;
    std::vector<double> dB;     // radial Brownian increments
    long projections = 0;
};

// |Z^i| under the one-delta law, reflected at the radius floor. Steps are
// taken for log r on the clock dt / r^2 with du = clamp(rel_step r^2,
// dt_min, dt_max) / r^2.
RadialPath simulate_radial_one_delta(double r0, double beta, const SimConfig& sim, Stream& rng);

struct BesselPath {
    std::vector<double> times;
    std::vector<double> r;
    long clamps = 0;
};

// dr = (d-1)/(2r) dl + dB, stepped as r' = sqrt((r + dB)^2 + (d-1) dl), on the grid t_start + cumulative dl. With empty
// shared_noise the increments are drawn from rng on a dt_max grid up to t_max.
BesselPath simulate_bessel(double dimension, double r_start, double t_start, const SimConfig& sim,
                           Stream* rng, const std::vector<double>& shared_noise,
                           const std::vector<double>& dl);

}  // namespace manydelta
