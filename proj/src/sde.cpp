#include "manydelta/sde.hpp"

#include "manydelta/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace manydelta {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

// Kahan-compensated clock; steps near contact can be far below ulp(t).
struct Clock {
    double t = 0.0, c = 0.0;
    void add(double dt) {
        double y = dt - c;
        double s = t + y;
        c = (s - t) - y;
        t = s;
    }
    double value() const { return t - c; }
};

std::string describe_state(const Configuration& z, double t) {
    std::ostringstream os;
    os << "non-finite state at t=" << t << ":";
    for (auto c : z) os << " (" << c.real() << "," << c.imag() << ")";
    return os.str();
}

// Pushes pair e apart symmetrically so that its separation has radius rho.
void project_pair(Configuration& z, int e, double rho) {
    Edge ed = edge_at(e);
    Complex s = (z[ed.upper] - z[ed.lower]) * kInvSqrt2;
    double a = std::abs(s);
    Complex target = a > 0 ? s * (rho / a) : Complex(rho, 0.0);
    Complex shift = (target - s) * kInvSqrt2;
    z[ed.upper] += shift;
    z[ed.lower] -= shift;
}

}  // namespace

void SimConfig::validate() const {
    if (!(dt_min > 0 && dt_min <= dt_max)) throw ParamError("SimConfig: need 0 < dt_min <= dt_max");
    if (!(radius_floor > 0 && radius_floor < contact_threshold))
        throw ParamError("SimConfig: need 0 < radius_floor < contact_threshold");
    if (!(taming_cap > 0 && taming_cap < 1)) throw ParamError("SimConfig: taming_cap must be in (0,1)");
    if (!(rel_step > 0)) throw ParamError("SimConfig: rel_step must be positive");
    if (!(t_max >= 0)) throw ParamError("SimConfig: t_max must be nonnegative");
    if (max_contacts < 1 || max_steps < 1) throw ParamError("SimConfig: budgets must be positive");
    if (!(stop_radius >= 0)) throw ParamError("SimConfig: stop_radius must be nonnegative");
}

Configuration PathRecord::state(size_t k) const {
    return Configuration(states.begin() + k * n, states.begin() + (k + 1) * n);
}

Complex derive_relative_noise(const Complex* inc, Edge e) {
    return (inc[e.upper] - inc[e.lower]) * kInvSqrt2;
}

double radial_noise_increment(Complex s, Complex dw) {
    double a = std::abs(s);
    if (!(a > 0)) throw specfun::DomainError("radial_noise_increment: zero separation");
    return (std::conj(s) * dw).real() / a;
}

double step_many_delta(Configuration& z, const ModelParams& dp, const SimConfig& sim,
                       std::vector<Complex>& inc, StepWorkspace& ws, double t_remaining,
                       long* tamed, long* projections) {
    const int n = static_cast<int>(z.size());
    separations(z, ws.seps);
    evaluate_ksum(ws.seps, dp, sim.radius_floor, ws.terms);
    particle_drift_from_terms(ws.seps, ws.terms, n, ws.drift);
    double rmin = std::numeric_limits<double>::infinity();
    for (int e = 0; e < dp.edges(); ++e)
        if (dp.weight[e] > 0) rmin = std::min(rmin, ws.terms.radius[e]);
    double dt = std::clamp(sim.rel_step * rmin * rmin, sim.dt_min, sim.dt_max);
    dt = std::min(dt, t_remaining);
    double bmax = 0;
    for (auto b : ws.drift) bmax = std::max(bmax, std::abs(b));
    double scale = 1.0;
    if (bmax * dt > sim.taming_cap * rmin) {
        scale = sim.taming_cap * rmin / (bmax * dt);
        if (tamed) ++*tamed;
    }
    double sq = std::sqrt(dt);
    for (int j = 0; j < n; ++j) {
        inc[j] *= sq;
        z[j] += ws.drift[j] * (scale * dt) + inc[j];
    }
    for (int e = 0; e < dp.edges(); ++e) {
        if (dp.weight[e] <= 0) continue;
        Edge ed = edge_at(e);
        if (std::abs(z[ed.upper] - z[ed.lower]) * kInvSqrt2 < sim.radius_floor) {
            project_pair(z, e, sim.radius_floor);
            if (projections) ++*projections;
        }
    }
    return dt;
}

namespace {

// One-delta step: the active pair moves as log Z on the clock du = dt / |Z|^2,
// d log Z = -ratio du + sqrt(du) xi, its centre and the other particles as
// Brownian motions over the resulting dt. The real step is at most dt_cap. `inc` holds standard normals on
// entry and the particle increments on return.
double step_one_delta(Configuration& z, int active, double beta, const SimConfig& sim,
                      std::vector<Complex>& inc, double t_remaining, double dt_cap, long* projections) {
    const Edge ed = edge_at(active);
    const Complex zi = (z[ed.upper] - z[ed.lower]) * kInvSqrt2;
    const Complex mid = 0.5 * (z[ed.upper] + z[ed.lower]);
    const double r = std::max(std::abs(zi), sim.radius_floor);
    const double r2 = r * r;
    const double du = std::min(std::clamp(sim.rel_step * r2, sim.dt_min, dt_cap), t_remaining) / r2;
    const Complex xi = (inc[ed.upper] - inc[ed.lower]) * kInvSqrt2;
    const Complex eta = (inc[ed.upper] + inc[ed.lower]) * kInvSqrt2;
    const double sq_du = std::sqrt(du);
    double lr = std::log(r) - specfun::ratio_khat1_k0(std::sqrt(2 * beta) * r) * du + sq_du * xi.real();
    const double lf = std::log(sim.radius_floor);
    if (lr < lf) {
        lr = lf;
        if (projections) ++*projections;
    }
    const double r_new = std::exp(lr);
    const double dt = std::min(0.5 * du * (r2 + r_new * r_new), t_remaining);
    const Complex unit = zi == Complex(0.0) ? Complex(1.0, 0.0) : zi / std::abs(zi);
    const Complex zi_new = r_new * unit * std::polar(1.0, sq_du * xi.imag());
    const double sq = std::sqrt(dt);
    // recorded relative increment: Z sqrt(du) xi, whose radial part is r sqrt(du) xi_re
    const Complex dw_rel = r * unit * sq_du * xi;
    const Complex dmid = sq * eta * kInvSqrt2;
    for (size_t j = 0; j < z.size(); ++j) {
        if (static_cast<int>(j) == ed.upper || static_cast<int>(j) == ed.lower) continue;
        inc[j] *= sq;
        z[j] += inc[j];
    }
    inc[ed.upper] = dmid + dw_rel * kInvSqrt2;
    inc[ed.lower] = dmid - dw_rel * kInvSqrt2;
    z[ed.upper] = mid + dmid + zi_new * kInvSqrt2;
    z[ed.lower] = mid + dmid - zi_new * kInvSqrt2;
    return dt;
}

PathRecord integrate(const Configuration& z0, const ModelParams& cp, const ModelParams* dp,
                     const SimConfig& sim, Stream& rng, int active = -1) {
    sim.validate();
    if (static_cast<int>(z0.size()) != cp.n) throw ParamError("initial configuration has wrong size");
    for (auto c : z0)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw ParamError("initial configuration must be finite");
    if (!classify_state(z0, cp, 0.0).eligible())
        throw ParamError("initial configuration is not eligible (several pairs at contact)");

    const int n = cp.n, m = cp.edges();
    std::vector<char> mask = sim.stop_mask;
    if (mask.empty()) {
        mask.resize(m);
        for (int e = 0; e < m; ++e) mask[e] = cp.weight[e] > 0;
    }
    if (static_cast<int>(mask.size()) != m) throw ParamError("stop_mask has wrong size");

    PathRecord rec;
    rec.n = n;
    rec.radius_floor = dp ? sim.radius_floor : 0.0;
    Configuration z = z0;
    rec.times.push_back(0.0);
    rec.states.insert(rec.states.end(), z.begin(), z.end());

    std::vector<Complex> seps = separations(z);
    std::vector<char> armed(m, 0);
    for (int e = 0; e < m; ++e) armed[e] = cp.weight[e] > 0 && std::abs(seps[e]) > sim.contact_threshold;

    auto stop_hit = [&] {
        if (sim.stop_radius <= 0) return false;
        for (int e = 0; e < m; ++e)
            if (mask[e] && std::abs(seps[e]) <= sim.stop_radius) return true;
        return false;
    };
    if (stop_hit()) {
        rec.stopped = true;
        return rec;
    }

    StepWorkspace ws;
    std::vector<Complex> inc(n);
    Clock clock;
    long steps = 0;
    while (clock.value() < sim.t_max) {
        if (steps >= sim.max_steps) {
            rec.absorbed = true;
            break;
        }
        for (int j = 0; j < n; ++j) {
            double a = rng.normal();
            double b = rng.normal();
            inc[j] = {a, b};
        }
        double remaining = sim.t_max - clock.value();
        double dt;
        if (active >= 0) {
            // other positively weighted pairs move freely but still set the step
            double rmin = INFINITY;
            for (int e = 0; e < m; ++e)
                if (e != active && cp.weight[e] > 0) rmin = std::min(rmin, std::abs(seps[e]));
            double cap = std::clamp(sim.rel_step * rmin * rmin, sim.dt_min, sim.dt_max);
            dt = step_one_delta(z, active, cp.beta[active], sim, inc, remaining, cap, &rec.projections);
        } else if (dp) {
            dt = step_many_delta(z, *dp, sim, inc, ws, remaining, &rec.tamed, &rec.projections);
        } else {
            dt = std::min(sim.dt_max, remaining);
            double sq = std::sqrt(dt);
            for (int j = 0; j < n; ++j) {
                inc[j] *= sq;
                z[j] += inc[j];
            }
        }
        clock.add(dt);
        ++steps;
        for (auto c : z)
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw NumericalBlowup(describe_state(z, clock.value()));
        double t = clock.value();
        if (!(dt > 0)) throw NumericalBlowup("time grid stalled");
        rec.times.push_back(t);
        rec.step_dt.push_back(dt);
        rec.states.insert(rec.states.end(), z.begin(), z.end());
        rec.noise.insert(rec.noise.end(), inc.begin(), inc.end());

        separations(z, seps);
        // The pair of the latest contact stays disarmed until another pair
        // makes contact; the others re-arm above 2 * contact_threshold.
        bool full = false;
        int last = rec.contacts.empty() ? -1 : rec.contacts.back().edge;
        for (int e = 0; e < m; ++e) {
            if (cp.weight[e] <= 0) continue;
            double r = std::abs(seps[e]);
            if (armed[e] && r <= sim.contact_threshold) {
                rec.contacts.push_back({t, e, r});
                armed[e] = 0;
                if (static_cast<int>(rec.contacts.size()) >= sim.max_contacts) full = true;
            } else if (!armed[e] && e != last && r > 2 * sim.contact_threshold) {
                armed[e] = 1;
            }
        }
        if (full) {
            rec.absorbed = true;
            break;
        }
        if (stop_hit()) {
            rec.stopped = true;
            break;
        }
    }
    return rec;
}

}  // namespace

PathRecord simulate_many_delta(const Configuration& z0, const ModelParams& p, const SimConfig& sim,
                               Stream& rng) {
    return integrate(z0, p, &p, sim, rng);
}

PathRecord simulate_one_delta(const Configuration& z0, const ModelParams& p, int active_edge,
                              const SimConfig& sim, Stream& rng) {
    if (active_edge < 0 || active_edge >= p.edges() || p.weight[active_edge] <= 0)
        throw ParamError("active edge must carry a positive weight");
    ModelParams dp = p.indicator(active_edge);
    return integrate(z0, p, &dp, sim, rng, active_edge);
}

PathRecord simulate_free(const Configuration& z0, const ModelParams& p, const SimConfig& sim,
                         Stream& rng) {
    return integrate(z0, p, nullptr, sim, rng);
}

PathRecord simulate_on_grid(const Configuration& z0, const ModelParams& dp, double dt,
                            const std::vector<Complex>& normals, double radius_floor) {
    const int n = dp.n;
    if (static_cast<int>(z0.size()) != n) throw ParamError("initial configuration has wrong size");
    if (!(dt > 0) || normals.size() % n != 0) throw ParamError("grid: need dt > 0 and whole steps of normals");
    SimConfig sim;
    sim.dt_max = sim.dt_min = dt;
    sim.radius_floor = radius_floor;
    const size_t steps = normals.size() / n;
    PathRecord rec;
    rec.n = n;
    rec.radius_floor = radius_floor;
    rec.times.reserve(steps + 1);
    rec.states.reserve((steps + 1) * n);
    rec.noise.reserve(steps * n);
    Configuration z = z0;
    std::vector<Complex> inc(n);
    StepWorkspace ws;
    rec.times.push_back(0.0);
    rec.states.insert(rec.states.end(), z.begin(), z.end());
    for (size_t k = 0; k < steps; ++k) {
        std::copy(normals.begin() + k * n, normals.begin() + (k + 1) * n, inc.begin());
        step_many_delta(z, dp, sim, inc, ws, 1e300, &rec.tamed, &rec.projections);
        rec.times.push_back(static_cast<double>(k + 1) * dt);
        rec.step_dt.push_back(dt);
        rec.states.insert(rec.states.end(), z.begin(), z.end());
        rec.noise.insert(rec.noise.end(), inc.begin(), inc.end());
    }
    return rec;
}

std::vector<Complex> coarsen_normals(const std::vector<Complex>& normals, int n) {
    const size_t steps = normals.size() / n;
    std::vector<Complex> out((steps / 2) * n);
    for (size_t k = 0; k < steps / 2; ++k)
        for (int j = 0; j < n; ++j)
            out[k * n + j] = (normals[2 * k * n + j] + normals[(2 * k + 1) * n + j]) * kInvSqrt2;
    return out;
}

RadialPath simulate_radial_one_delta(double r0, double beta, const SimConfig& sim, Stream& rng) {
    if (!(r0 >= 0) || !(beta > 0)) throw ParamError("radial: need r0 >= 0 and beta > 0");
    if (!(sim.dt_min > 0 && sim.dt_min <= sim.dt_max && sim.radius_floor > 0 && sim.rel_step > 0))
        throw ParamError("radial: invalid step settings");
    // On the clock du = dt / r^2 the log radius is a Brownian motion with
    // drift -ratio(r); real time is the trapezoid of r^2 du.
    const double sb = std::sqrt(2 * beta);
    const double log_floor = std::log(sim.radius_floor);
    RadialPath out;
    double lr = std::log(std::max(r0, sim.radius_floor));
    double r = std::exp(lr);
    out.times.push_back(0.0);
    out.r.push_back(r);
    Clock clock;
    long steps = 0;
    while (clock.value() < sim.t_max) {
        if (steps++ >= sim.max_steps) break;
        double remaining = sim.t_max - clock.value();
        double dt_left = std::clamp(sim.rel_step * r * r, sim.dt_min, std::min(sim.dt_max, remaining));
        double du = dt_left / (r * r);
        double n1 = rng.normal();
        double db = std::sqrt(du) * n1;
        double next = lr - specfun::ratio_khat1_k0(sb * r) * du + db;
        if (next < log_floor) {
            next = log_floor;
            ++out.projections;
        }
        double r1 = std::exp(next);
        if (!std::isfinite(r1)) throw NumericalBlowup("radial path became non-finite");
        double dt = std::min(0.5 * du * (r * r + r1 * r1), remaining);
        out.du.push_back(du);
        out.dt.push_back(dt);
        out.dB.push_back(r * db);
        lr = next;
        r = r1;
        clock.add(dt);
        out.times.push_back(clock.value());
        out.r.push_back(r);
    }
    return out;
}

BesselPath simulate_bessel(double dimension, double r_start, double t_start, const SimConfig& sim,
                           Stream* rng, const std::vector<double>& shared_noise,
                           const std::vector<double>& dl) {
    if (!(dimension >= 2)) throw ParamError("Bessel dimension must be at least 2");
    if (!(r_start >= 0)) throw ParamError("Bessel start must be nonnegative");
    std::vector<double> steps = dl;
    std::vector<double> noise = shared_noise;
    if (noise.empty()) {
        if (!rng) throw ParamError("simulate_bessel: need shared noise or a stream");
        long k = static_cast<long>(std::ceil(sim.t_max / sim.dt_max - 1e-9));
        steps.assign(k, sim.dt_max);
        noise.resize(k);
        for (long i = 0; i < k; ++i) noise[i] = std::sqrt(sim.dt_max) * rng->normal();
    }
    if (steps.size() != noise.size()) throw ParamError("simulate_bessel: grid and noise sizes differ");
    BesselPath out;
    double r = r_start, t = t_start;
    out.times.push_back(t);
    out.r.push_back(r);
    // r' = sqrt((r + dB)^2 + (d-1) dl): positive, exact for zero noise, and
    // equal to the Euler step up to O(dl) terms away from 0.
    for (size_t k = 0; k < steps.size(); ++k) {
        double a = r + noise[k];
        r = std::sqrt(a * a + (dimension - 1) * steps[k]);
        if (r < sim.radius_floor) {
            r = sim.radius_floor;
            ++out.clamps;
        }
        t += steps[k];
        out.times.push_back(t);
        out.r.push_back(r);
    }
    return out;
}

}  // namespace manydelta
