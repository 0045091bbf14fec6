#include "manydelta/measures.hpp"

#include "manydelta/localtime.hpp"
#include "manydelta/specfun.hpp"

#include <algorithm>
#include <cmath>

namespace manydelta {

namespace {

struct Window {
    size_t from, to;
};

Window window(const PathRecord& path, size_t from, size_t to) {
    if (path.times.empty()) throw ParamError("empty path");
    size_t last = path.times.size() - 1;
    to = std::min(to, last);
    if (from > to) throw ParamError("window start after end");
    return {from, to};
}

void check_ref_edge(const ModelParams& p, int i) {
    if (i < 0 || i >= p.edges() || p.weight[i] <= 0)
        throw ParamError("reference edge must carry a positive weight");
}

// Per-state separations and K-sum shares, computed lazily; the K1 terms
// only when a stochastic integral needs them.
class StateCache {
public:
    StateCache(const PathRecord& path, const ModelParams& p)
        : path_(path), p_(p), m_(p.edges()), states_(path.times.size()) {
        seps_.resize(states_ * m_);
        radius_.resize(states_ * m_);
        share_.resize(states_ * m_);
        log_ksum_.resize(states_);
        done_.assign(states_, 0);
        full_.resize(states_);
        full_done_.assign(states_, 0);
    }
    const Complex* seps(size_t k) {
        fill(k);
        return seps_.data() + k * m_;
    }
    const double* radius(size_t k) {
        fill(k);
        return radius_.data() + k * m_;
    }
    const double* share(size_t k) {
        fill(k);
        return share_.data() + k * m_;
    }
    double log_ksum(size_t k) {
        fill(k);
        return log_ksum_[k];
    }
    const KsumTerms& terms(size_t k) {
        if (!full_done_[k]) {
            fill(k);
            std::vector<Complex> s(seps(k), seps(k) + m_);
            evaluate_ksum(s, p_, 0.0, full_[k]);
            full_done_[k] = 1;
        }
        return full_[k];
    }

private:
    void fill(size_t k) {
        if (done_[k]) return;
        const Complex* z = path_.state_ptr(k);
        Complex* s = seps_.data() + k * m_;
        double* r = radius_.data() + k * m_;
        double* w = share_.data() + k * m_;
        double top = -INFINITY;
        for (int e = 0; e < m_; ++e) {
            Edge ed = edge_at(e);
            s[e] = (z[ed.upper] - z[ed.lower]) / std::sqrt(2.0);
            r[e] = std::abs(s[e]);
            w[e] = 0.0;
            if (p_.weight[e] <= 0) continue;
            if (r[e] < kContactFloor) throw SingularState("positively weighted pair at contact");
            w[e] = std::log(p_.weight[e]) + specfun::log_k0(std::sqrt(2 * p_.beta[e]) * r[e]);
            top = std::max(top, w[e]);
        }
        double sum = 0.0;
        for (int e = 0; e < m_; ++e)
            if (p_.weight[e] > 0) sum += (w[e] = std::exp(w[e] - top));
        for (int e = 0; e < m_; ++e) w[e] /= sum;
        log_ksum_[k] = top + std::log(sum);
        done_[k] = 1;
    }
    const PathRecord& path_;
    const ModelParams& p_;
    const int m_;
    const size_t states_;
    std::vector<Complex> seps_;
    std::vector<double> radius_, share_, log_ksum_;
    std::vector<char> done_;
    std::vector<KsumTerms> full_;
    std::vector<char> full_done_;
};

double dB(const PathRecord& path, const Complex* seps, size_t k, int e) {
    Complex dw = derive_relative_noise(path.noise_ptr(k), edge_at(e));
    return radial_noise_increment(seps[e], dw);
}

double tilde_rate(const double* share, const ModelParams& p, int i) {
    double s = 0.0;
    for (int j = 0; j < p.edges(); ++j)
        if (p.weight[j] > 0 && j != i) s += (p.beta[j] - p.beta[i]) * share[j];
    return s;
}

struct Accum {
    double a_tilde = 0, a_ring = 0;
};

Accum finite_variation(StateCache& cache, const PathRecord& path, const ModelParams& p, int i,
                       double eps, LocalTimeMethod method, Window w) {
    Accum acc;
    const KernelParams kp{p.beta[i], eps};
    for (size_t k = w.from; k < w.to; ++k) {
        const double dt = path.dt(k);
        const double* sa = cache.share(k);
        acc.a_tilde += 0.5 * (tilde_rate(sa, p, i) + tilde_rate(cache.share(k + 1), p, i)) * dt;
        // sum_{j != i} (w_j / w_i) K0(sqrt(2 beta_j) |Z^j|)
        double others = std::exp(cache.log_ksum(k)) * (1 - sa[i]) / p.weight[i];
        if (!(others > 0)) continue;
        double ri = cache.radius(k)[i];
        if (method == LocalTimeMethod::Kernel) {
            acc.a_ring += others * kappa_eps(ri, kp) * dt;
        } else {
            double r1 = cache.radius(k + 1)[i];
            double du = 2 * dt / (ri * ri + r1 * r1);
            acc.a_ring += 2 * others * tanaka_increment(ri, r1, dt, du, dB(path, cache.seps(k), k, i), p.beta[i]);
        }
    }
    return acc;
}

// log(w_i K0_i / K-sum) with the contact convention.
double log_share(const PathRecord& path, StateCache& cache, size_t k, int i) {
    if (path.radius_floor > 0 && cache.radius(k)[i] <= path.radius_floor * (1 + 1e-9)) return 0.0;
    return std::log(cache.share(k)[i]);
}

double exp_functional_cached(StateCache& cache, const PathRecord& path, const ModelParams& p, int i,
                             double eps, LocalTimeMethod method, Window w, Accum* parts = nullptr) {
    Accum acc = finite_variation(cache, path, p, i, eps, method, w);
    if (parts) *parts = acc;
    if (classify_state(path.state(w.to), p, 0.0).tag == StateClass::Tag::MultiContact)
        throw SingularState("exp_functional: terminal state has several contacts");
    return std::exp(log_share(path, cache, w.from, i) - log_share(path, cache, w.to, i) - acc.a_tilde -
                    acc.a_ring);
}

}  // namespace

double a_tilde(const PathRecord& path, const ModelParams& p, int i, size_t to, size_t from) {
    check_ref_edge(p, i);
    Window w = window(path, from, to);
    StateCache cache(path, p);
    return finite_variation(cache, path, p, i, 1.0, LocalTimeMethod::Kernel, w).a_tilde;
}

double a_ring(const PathRecord& path, const ModelParams& p, int i, double eps,
              LocalTimeMethod method, size_t to, size_t from) {
    check_ref_edge(p, i);
    Window w = window(path, from, to);
    StateCache cache(path, p);
    return finite_variation(cache, path, p, i, eps, method, w).a_ring;
}

WeightFunctional weight_functional(const PathRecord& path, const ModelParams& p, int i, double eps,
                                   LocalTimeMethod method, size_t to, size_t from) {
    check_ref_edge(p, i);
    Window w = window(path, from, to);
    StateCache cache(path, p);
    WeightFunctional out;
    Accum acc;
    out.exp_functional = exp_functional_cached(cache, path, p, i, eps, method, w, &acc);
    out.a_tilde = acc.a_tilde;
    out.a_ring = acc.a_ring;
    for (size_t k = w.from; k < w.to; ++k) {
        const Complex* s = cache.seps(k);
        const KsumTerms& t = cache.terms(k);
        double ri = t.radius[i];
        double ratio = t.coeff[i] / t.k0_share[i];
        double dn_ring = ratio * (1 - t.k0_share[i]) / ri * dB(path, s, k, i);
        double dn_tilde = 0.0;
        for (int j = 0; j < p.edges(); ++j)
            if (j != i && p.weight[j] > 0) dn_tilde -= t.coeff[j] / t.radius[j] * dB(path, s, k, j);
        out.n_ring += dn_ring;
        out.n_tilde += dn_tilde;
        out.qv_n += (dn_ring + dn_tilde) * (dn_ring + dn_tilde);
    }
    return out;
}

double exp_functional(const PathRecord& path, const ModelParams& p, int i, double eps,
                      LocalTimeMethod method, size_t to, size_t from) {
    check_ref_edge(p, i);
    Window w = window(path, from, to);
    StateCache cache(path, p);
    return exp_functional_cached(cache, path, p, i, eps, method, w);
}

double rn_identity_residual(const PathRecord& path, const ModelParams& p, int i, double eps,
                            bool midpoint, size_t to) {
    check_ref_edge(p, i);
    Window w = window(path, 0, to);
    StateCache cache(path, p);
    Accum acc = finite_variation(cache, path, p, i, eps, LocalTimeMethod::Kernel, w);
    auto coeffs = [&](size_t k, std::vector<double>& c) {
        const KsumTerms& t = cache.terms(k);
        c.assign(p.edges(), 0.0);
        double ratio = t.coeff[i] / t.k0_share[i];
        c[i] = ratio * (1 - t.k0_share[i]) / t.radius[i];
        for (int j = 0; j < p.edges(); ++j)
            if (j != i && p.weight[j] > 0) c[j] = -t.coeff[j] / t.radius[j];
    };
    double n = 0.0, qv = 0.0;
    std::vector<double> c, c2;
    for (size_t k = w.from; k < w.to; ++k) {
        coeffs(k, c);
        if (midpoint) {
            coeffs(k + 1, c2);
            for (size_t e = 0; e < c.size(); ++e) c[e] = 0.5 * (c[e] + c2[e]);
        }
        const Complex* s = cache.seps(k);
        double dn = 0.0;
        for (int j = 0; j < p.edges(); ++j)
            if (c[j] != 0.0) dn += c[j] * dB(path, s, k, j);
        n += dn;
        qv += dn * dn;
    }
    double lhs = -std::log(cache.share(w.to)[i]) + std::log(cache.share(w.from)[i]);
    return std::abs(lhs - (acc.a_tilde + acc.a_ring + n - 0.5 * qv));
}

double ItoTerms::residual() const {
    double s = lhs;
    for (double v : terms) s -= v;
    return std::abs(s);
}

ItoTerms ito_terms_one_delta(const PathRecord& path, const ModelParams& p, int i, double eps_reg,
                             QvMode mode, size_t to) {
    check_ref_edge(p, i);
    if (!(eps_reg > 0)) throw ParamError("regularisation must be positive");
    Window w = window(path, 0, to);
    const Edge ei = edge_at(i);
    const double beta = p.beta[i], two_b = 2 * beta;
    struct Point {
        double R, Rp, F, a, g3, g4, g5;
        Complex z;
    };
    auto at = [&](size_t k) {
        const Complex* st = path.state_ptr(k);
        Point q;
        q.z = (st[ei.upper] - st[ei.lower]) / std::sqrt(2.0);
        q.R = std::norm(q.z);
        q.Rp = two_b * (eps_reg + q.R);
        double x = std::sqrt(q.Rp);
        double g0 = specfun::k0(x), g1 = specfun::khat(1, x);
        q.F = std::log(p.weight[i]) + specfun::log_k0(x);
        q.a = two_b * g1 / (2 * q.Rp * g0);
        q.g3 = 0.5 * two_b * two_b * (2 * g1 + q.Rp * g0) / (4 * q.Rp * q.Rp * g0) * 4 * q.R;
        q.g4 = -0.5 * q.a * q.a * 4 * q.R;
        q.g5 = 2 * q.a * specfun::ratio_khat1_k0(std::sqrt(two_b) * std::sqrt(q.R));
        return q;
    };
    ItoTerms out;
    out.terms.assign(5, 0.0);
    Point cur = at(w.from);
    const Point first = cur;
    for (size_t k = w.from; k < w.to; ++k) {
        Point nxt = at(k + 1);
        double dt = path.dt(k);
        Complex dw = derive_relative_noise(path.noise_ptr(k), ei);
        double db = radial_noise_increment(cur.z, dw);
        if (mode == QvMode::Riemann) {
            out.terms[0] += -0.5 * (2 * cur.a + 2 * nxt.a) * dt;
            out.terms[2] += 0.5 * (cur.g3 + nxt.g3) * dt;
            out.terms[3] += 0.5 * (cur.g4 + nxt.g4) * dt;
        } else {
            out.terms[0] += -cur.a * std::norm(dw);
            out.terms[2] += cur.g3 * db * db;
            out.terms[3] += cur.g4 * db * db;
        }
        out.terms[1] += -cur.a * 2 * std::sqrt(cur.R) * db;
        out.terms[4] += 0.5 * (cur.g5 + nxt.g5) * dt;
        cur = nxt;
    }
    out.lhs = cur.F - first.F;
    return out;
}

double ito_residual_one_delta(const PathRecord& path, const ModelParams& p, int i, double eps_reg,
                              QvMode mode, size_t to) {
    return ito_terms_one_delta(path, p, i, eps_reg, mode, to).residual();
}

ItoTerms ito_terms_many(const PathRecord& path, const ModelParams& p, int i,
                        const std::vector<double>& eps_reg, QvMode mode, size_t to) {
    check_ref_edge(p, i);
    const int m = p.edges();
    if (static_cast<int>(eps_reg.size()) != m) throw ParamError("need one regularisation per edge");
    for (double e : eps_reg)
        if (!(e > 0)) throw ParamError("regularisation must be positive");
    Window w = window(path, 0, to);
    std::vector<Edge> edges = all_edges(p.n);

    struct Point {
        std::vector<Complex> z;
        std::vector<double> r, a, g3;  // per edge
        double F = 0, ratio_i = 0;
    };
    auto at = [&](size_t k) {
        Point q;
        Configuration cfg(path.state_ptr(k), path.state_ptr(k) + path.n);
        q.z = separations(cfg);
        q.r.resize(m);
        q.a.assign(m, 0.0);
        q.g3.assign(m, 0.0);
        std::vector<double> lg0(m, 0.0), g1(m, 0.0), g0s(m, 0.0), rp(m, 0.0);
        double top = -INFINITY;
        for (int j = 0; j < m; ++j) {
            q.r[j] = std::abs(q.z[j]);
            if (p.weight[j] <= 0) continue;
            rp[j] = 2 * p.beta[j] * (eps_reg[j] + q.r[j] * q.r[j]);
            double x = std::sqrt(rp[j]);
            lg0[j] = std::log(p.weight[j]) + specfun::log_k0(x);
            top = std::max(top, lg0[j]);
        }
        double h = 0.0;  // H / exp(top)
        for (int j = 0; j < m; ++j)
            if (p.weight[j] > 0) h += std::exp(lg0[j] - top);
        q.F = top + std::log(h);
        for (int j = 0; j < m; ++j) {
            if (p.weight[j] <= 0) continue;
            double x = std::sqrt(rp[j]);
            double share = std::exp(lg0[j] - top) / h;  // w_j G0_j / H
            double ratio = specfun::ratio_khat1_k0(x);  // G1_j / G0_j
            double tb = 2 * p.beta[j];
            q.a[j] = tb * ratio / (2 * rp[j]) * share;
            q.g3[j] = 0.5 * tb * tb * (2 * ratio + rp[j]) / (4 * rp[j] * rp[j]) * share * 4 * q.r[j] * q.r[j];
        }
        q.ratio_i = specfun::ratio_khat1_k0(std::sqrt(2 * p.beta[i]) * q.r[i]);
        return q;
    };
    // Integrands of the ds terms given the point.
    auto ds_terms = [&](const Point& q, double out[9]) {
        std::fill(out, out + 9, 0.0);
        for (int j = 0; j < m; ++j) {
            if (p.weight[j] <= 0) continue;
            out[0] += -2 * q.a[j];
            out[2] += q.g3[j];
            double sq = -0.5 * q.a[j] * q.a[j] * 4 * q.r[j] * q.r[j];
            if (j != i) {
                out[3] += sq;
                out[7] += q.a[j] * sigma_dot(edges[j], edges[i]) * std::real(q.z[j] / q.z[i]) * q.ratio_i;
            } else {
                out[4] += sq;
                out[8] += 2 * q.a[i] * q.ratio_i;
            }
            for (int k = 0; k < m; ++k) {
                if (k == j || p.weight[k] <= 0) continue;
                double rate = 0.5 * sigma_dot(edges[j], edges[k]) *
                              std::real(q.z[j] * std::conj(q.z[k])) / (q.r[j] * q.r[k]);
                double v = q.a[j] * q.a[k] * 4 * q.r[j] * q.r[k] * rate;
                if (j != i && k != i) out[5] += -0.5 * v;
                else if (k == i) out[6] += -v;
            }
        }
    };
    ItoTerms out;
    out.terms.assign(9, 0.0);
    Point cur = at(w.from);
    const double f0 = cur.F;
    double lo[9], hi[9];
    ds_terms(cur, lo);
    std::vector<double> db(m), dw2(m);
    for (size_t k = w.from; k < w.to; ++k) {
        Point nxt = at(k + 1);
        ds_terms(nxt, hi);
        double dt = path.dt(k);
        for (int j = 0; j < m; ++j) {
            Complex dw = derive_relative_noise(path.noise_ptr(k), edges[j]);
            dw2[j] = std::norm(dw);
            db[j] = radial_noise_increment(cur.z[j], dw);
        }
        for (int j = 0; j < m; ++j) {
            if (p.weight[j] <= 0) continue;
            out.terms[1] += -2 * cur.a[j] * cur.r[j] * db[j];
        }
        for (int t : {7, 8}) out.terms[t] += 0.5 * (lo[t] + hi[t]) * dt;
        if (mode == QvMode::Riemann) {
            for (int t : {0, 2, 3, 4, 5, 6}) out.terms[t] += 0.5 * (lo[t] + hi[t]) * dt;
        } else {
            for (int j = 0; j < m; ++j) {
                if (p.weight[j] <= 0) continue;
                out.terms[0] += -cur.a[j] * dw2[j];
                out.terms[2] += cur.g3[j] * db[j] * db[j];
                double sq = -0.5 * cur.a[j] * cur.a[j] * 4 * cur.r[j] * cur.r[j] * db[j] * db[j];
                out.terms[j != i ? 3 : 4] += sq;
                for (int k = 0; k < m; ++k) {
                    if (k == j || p.weight[k] <= 0) continue;
                    double v = cur.a[j] * cur.a[k] * 4 * cur.r[j] * cur.r[k] * db[j] * db[k];
                    if (j != i && k != i) out.terms[5] += -0.5 * v;
                    else if (k == i) out.terms[6] += -v;
                }
            }
        }
        std::copy(hi, hi + 9, lo);
        cur = std::move(nxt);
    }
    out.lhs = cur.F - f0;
    return out;
}

double ito_residual_many(const PathRecord& path, const ModelParams& p, int i,
                         const std::vector<double>& eps_reg, QvMode mode, size_t to) {
    return ito_terms_many(path, p, i, eps_reg, mode, to).residual();
}

ResidualStudy residual_study(const Configuration& z0, const ModelParams& p, int i, ResidualKind kind,
                             double dt, double t, double eps, QvMode mode, long paths, int workers,
                             std::uint64_t seed) {
    check_ref_edge(p, i);
    if (!(dt > 0) || !(t >= dt)) throw ParamError("residual study: need 0 < dt <= t");
    if (paths < 1) throw ParamError("residual study: need at least one path");
    const int n = p.n;
    const size_t coarse_steps = static_cast<size_t>(std::llround(t / dt));
    const ModelParams dp = p.indicator(i);
    auto residual = [&](const PathRecord& path) {
        switch (kind) {
        case ResidualKind::ItoOneDelta: return ito_residual_one_delta(path, p, i, eps, mode);
        case ResidualKind::ItoMany:
            return ito_residual_many(path, p, i, std::vector<double>(p.edges(), eps), mode);
        case ResidualKind::RN: return rn_identity_residual(path, p, i, eps);
        }
        return 0.0;
    };
    struct Row {
        double coarse, fine, rmin;
    };
    auto rows = map_paths<Row>(paths, workers, [&](long idx) {
        Stream rng(seed, static_cast<std::uint64_t>(idx), Substream::Noise);
        std::vector<Complex> normals(2 * coarse_steps * n);
        for (auto& c : normals) {
            double re = rng.normal();
            c = Complex(re, rng.normal());
        }
        PathRecord fine = simulate_on_grid(z0, dp, 0.5 * dt, normals);
        PathRecord coarse = simulate_on_grid(z0, dp, dt, coarsen_normals(normals, n));
        double rmin = INFINITY;
        std::vector<Complex> seps;
        for (size_t k = 0; k <= fine.steps(); ++k) {
            Configuration z(fine.state_ptr(k), fine.state_ptr(k) + n);
            separations(z, seps);
            for (int e = 0; e < p.edges(); ++e)
                if (p.weight[e] > 0) rmin = std::min(rmin, std::abs(seps[e]));
        }
        return Row{residual(coarse), residual(fine), rmin};
    });
    ResidualStudy out;
    out.min_radius = INFINITY;
    for (auto& r : rows) {
        out.coarse.push_back(r.coarse);
        out.fine.push_back(r.fine);
        out.min_radius = std::min(out.min_radius, r.rmin);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        size_t h = v.size() / 2;
        return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
    };
    out.median_coarse = median(out.coarse);
    out.median_fine = median(out.fine);
    return out;
}

double girsanov_weight(const PathRecord& path, const ModelParams& p) {
    StateCache cache(path, p);
    double integral = 0.0;
    auto rate = [&](size_t k) {
        const double* share = cache.share(k);
        double s = 0.0;
        for (int j = 0; j < p.edges(); ++j)
            if (p.weight[j] > 0) s += p.beta[j] * share[j];
        return s;
    };
    size_t last = path.times.size() - 1;
    for (size_t k = 0; k < last; ++k) integral += 0.5 * (rate(k) + rate(k + 1)) * path.dt(k);
    return std::exp(-integral + cache.log_ksum(last) - cache.log_ksum(0));
}

namespace {

SimConfig fixed_step(SimConfig sim, double eta, double t_cap) {
    sim.dt_min = sim.dt_max;
    sim.t_max = t_cap;
    sim.stop_radius = eta;
    sim.stop_mask.clear();
    sim.max_contacts = 1 << 30;
    return sim;
}

void check_eta(const Configuration& z0, const ModelParams& p, double eta) {
    auto s = separations(z0);
    for (int e = 0; e < p.edges(); ++e)
        if (p.weight[e] > 0 && std::abs(s[e]) <= eta)
            throw ParamError("eta must be below every positively weighted initial radius");
}

}  // namespace

EstimatorResult girsanov_bm_estimator(const Configuration& z0, const ModelParams& p,
                                      const ConfigFunctional& f, double eta, double t_cap,
                                      const SimConfig& sim, long budget, int workers,
                                      std::uint64_t seed) {
    check_eta(z0, p, eta);
    if (t_cap == 0.0) return EstimatorResult{f(z0), 0.0, budget, 0.0};
    SimConfig s = fixed_step(sim, eta, t_cap);
    const bool homog = p.homogeneous();
    const double beta = p.min_positive_beta();
    const double log_k_start = log_weighted_k0_sum(z0, p);
    auto xs = map_paths<double>(budget, workers, [&](long idx) {
        Stream rng(seed, static_cast<std::uint64_t>(idx), Substream::Reference);
        PathRecord path = simulate_free(z0, p, s, rng);
        Configuration end = path.state(path.steps());
        double weight;
        if (homog) weight = std::exp(-beta * path.times.back() + log_weighted_k0_sum(end, p) - log_k_start);
        else weight = girsanov_weight(path, p);
        return f(end) * weight;
    });
    return summarize(xs);
}

EstimatorResult direct_many_delta_estimator(const Configuration& z0, const ModelParams& p,
                                            const ConfigFunctional& f, double eta, double t_cap,
                                            const SimConfig& sim, long budget, int workers,
                                            std::uint64_t seed) {
    check_eta(z0, p, eta);
    if (t_cap == 0.0) return EstimatorResult{f(z0), 0.0, budget, 0.0};
    SimConfig s = fixed_step(sim, eta, t_cap);
    auto xs = map_paths<double>(budget, workers, [&](long idx) {
        Stream rng(seed, static_cast<std::uint64_t>(idx), Substream::Noise);
        PathRecord path = simulate_many_delta(z0, p, s, rng);
        return f(path.state(path.steps()));
    });
    return summarize(xs);
}

MassResult weighted_average_mass(const Configuration& z0, const ModelParams& p, const SimConfig& sim,
                                 long budget, int workers, std::uint64_t seed) {
    if (classify_state(z0, p, 0.0).tag != StateClass::Tag::AllSeparated)
        throw ParamError("mass identity needs a fully separated start");
    SimConfig s = sim;
    s.stop_radius = sim.contact_threshold;
    s.stop_mask.clear();
    s.max_contacts = 1 << 30;
    KsumTerms t0;
    evaluate_ksum(separations(z0), p, 0.0, t0);
    MassResult out;
    double total = 0.0, var = 0.0;
    long n = 0;
    for (int i = 0; i < p.edges(); ++i) {
        if (p.weight[i] <= 0) continue;
        const std::uint64_t offset = static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(budget);
        auto xs = map_paths<std::pair<double, int>>(budget, workers, [&](long idx) {
            Stream rng(seed, offset + static_cast<std::uint64_t>(idx), Substream::Noise);
            PathRecord path = simulate_one_delta(z0, p, i, s, rng);
            return std::make_pair(std::exp(-a_tilde(path, p, i)), path.stopped ? 0 : 1);
        });
        std::vector<double> vals(budget);
        for (long k = 0; k < budget; ++k) {
            vals[k] = xs[k].first;
            out.unfinished += xs[k].second;
        }
        EstimatorResult r = summarize(vals);
        double wgt = t0.k0_share[i];
        out.edges.push_back(i);
        out.start_weights.push_back(wgt);
        out.per_edge.push_back(r);
        total += wgt * r.mean;
        var += wgt * wgt * r.std_error * r.std_error;
        n += r.n;
    }
    out.total.mean = total;
    out.total.std_error = std::sqrt(var);
    out.total.n = n;
    out.total.ci_half_width = 3 * out.total.std_error;
    return out;
}

MartingaleResult stopped_martingale_test(const Configuration& z0, const ModelParams& p, int i,
                                         double t, double eta, double eps, const SimConfig& sim,
                                         long budget, int workers, std::uint64_t seed,
                                         LocalTimeMethod method) {
    check_ref_edge(p, i);
    auto s0 = separations(z0);
    for (int e = 0; e < p.edges(); ++e)
        if (e != i && p.weight[e] > 0 && std::abs(s0[e]) <= eta)
            throw ParamError("eta must be below every non-reference initial radius");
    MartingaleResult out;
    if (t == 0.0) {
        out.stopped = out.unstopped = EstimatorResult{1.0, 0.0, budget, 0.0};
        return out;
    }
    SimConfig s = sim;
    s.t_max = t;
    s.stop_radius = 0.0;
    s.max_contacts = 1 << 30;
    struct Pair {
        double stopped, unstopped;
        int early;
    };
    auto xs = map_paths<Pair>(budget, workers, [&](long idx) {
        Stream rng(seed, static_cast<std::uint64_t>(idx), Substream::Noise);
        PathRecord path = simulate_one_delta(z0, p, i, s, rng);
        StateCache cache(path, p);
        size_t stop = path.steps();
        int early = 0;
        for (size_t k = 0; k <= path.steps() && !early; ++k) {
            const double* r = cache.radius(k);
            for (int e = 0; e < p.edges(); ++e)
                if (e != i && p.weight[e] > 0 && r[e] <= eta) early = 1;
            if (early) stop = k;
        }
        Pair r;
        r.stopped = exp_functional_cached(cache, path, p, i, eps, method, Window{0, stop});
        r.unstopped =
            early ? exp_functional_cached(cache, path, p, i, eps, method, Window{0, path.steps()}) : r.stopped;
        r.early = early;
        return r;
    });
    std::vector<double> a(budget), b(budget);
    for (long k = 0; k < budget; ++k) {
        a[k] = xs[k].stopped;
        b[k] = xs[k].unstopped;
        out.stopped_early += xs[k].early;
    }
    out.stopped = summarize(a);
    out.unstopped = summarize(b);
    return out;
}

}  // namespace manydelta
