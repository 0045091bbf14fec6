#include "manydelta/model.hpp"

#include "manydelta/specfun.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace manydelta {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

int edge_count(int n) { return n * (n - 1) / 2; }

int edge_index(Edge e) { return e.upper * (e.upper - 1) / 2 + e.lower; }

Edge edge_at(int index) {
    int u = 1;
    while ((u + 1) * u / 2 <= index) ++u;
    return {u, index - u * (u - 1) / 2};
}

std::vector<Edge> all_edges(int n) {
    std::vector<Edge> out;
    out.reserve(edge_count(n));
    for (int u = 1; u < n; ++u)
        for (int l = 0; l < u; ++l) out.push_back({u, l});
    return out;
}

std::string edge_key(Edge e) {
    return std::to_string(e.upper + 1) + "-" + std::to_string(e.lower + 1);
}

Edge parse_edge_key(const std::string& key, int n) {
    auto dash = key.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == key.size())
        throw ParamError("malformed edge key '" + key + "', expected \"j'-j\"");
    for (size_t k = 0; k < key.size(); ++k)
        if (k != dash && !std::isdigit(static_cast<unsigned char>(key[k])))
            throw ParamError("malformed edge key '" + key + "'");
    int u = 0, l = 0;
    try {
        size_t pos = 0;
        u = std::stoi(key.substr(0, dash), &pos);
        if (pos != dash) throw std::invalid_argument("");
        std::string rest = key.substr(dash + 1);
        l = std::stoi(rest, &pos);
        if (pos != rest.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ParamError("malformed edge key '" + key + "'");
    }
    if (!(1 <= l && l < u && u <= n))
        throw ParamError("edge key '" + key + "' needs 1 <= j < j' <= " + std::to_string(n));
    return {u - 1, l - 1};
}

int sigma_dot(Edge a, Edge b) {
    return int(a.upper == b.upper) - int(a.upper == b.lower) - int(a.lower == b.upper) +
           int(a.lower == b.lower);
}

ModelParams ModelParams::create(int n, std::vector<double> beta, std::vector<double> weight) {
    if (n < 3) throw ParamError("particle count must be at least 3");
    const auto m = static_cast<size_t>(edge_count(n));
    if (beta.size() != m || weight.size() != m)
        throw ParamError("beta and weight need one entry per edge (" + std::to_string(m) + ")");
    for (double b : beta)
        if (!(b > 0.0) || !std::isfinite(b)) throw ParamError("every beta must be positive");
    for (double w : weight)
        if (!(w >= 0.0) || !std::isfinite(w)) throw ParamError("weights must be nonnegative");
    ModelParams p{n, std::move(beta), std::move(weight)};
    if (p.positive_count() < 2) throw ParamError("at least two weights must be positive");
    return p;
}

ModelParams ModelParams::uniform(int n, double beta, double weight) {
    return create(n, std::vector<double>(edge_count(n), beta),
                  std::vector<double>(edge_count(n), weight));
}

ModelParams ModelParams::indicator(int edge) const {
    if (edge < 0 || edge >= edges()) throw ParamError("indicator edge out of range");
    ModelParams p = *this;
    std::fill(p.weight.begin(), p.weight.end(), 0.0);
    p.weight[edge] = 1.0;
    return p;
}

int ModelParams::positive_count() const {
    return static_cast<int>(std::count_if(weight.begin(), weight.end(), [](double w) { return w > 0; }));
}

bool ModelParams::homogeneous() const {
    double ref = -1.0;
    for (int e = 0; e < edges(); ++e) {
        if (weight[e] <= 0) continue;
        if (ref < 0) ref = beta[e];
        else if (beta[e] != ref) return false;
    }
    return true;
}

double ModelParams::min_positive_beta() const {
    double v = std::numeric_limits<double>::infinity();
    for (int e = 0; e < edges(); ++e)
        if (weight[e] > 0) v = std::min(v, beta[e]);
    return v;
}

double ModelParams::max_positive_beta() const {
    double v = 0.0;
    for (int e = 0; e < edges(); ++e)
        if (weight[e] > 0) v = std::max(v, beta[e]);
    return v;
}

void separations(const Configuration& z, std::vector<Complex>& out) {
    const int n = static_cast<int>(z.size());
    out.resize(edge_count(n));
    int k = 0;
    for (int u = 1; u < n; ++u)
        for (int l = 0; l < u; ++l) out[k++] = (z[u] - z[l]) * kInvSqrt2;
}

std::vector<Complex> separations(const Configuration& z) {
    std::vector<Complex> out;
    separations(z, out);
    return out;
}

void evaluate_ksum(const std::vector<Complex>& seps, const ModelParams& p, double radius_floor,
                   KsumTerms& out) {
    const int m = static_cast<int>(seps.size());
    out.radius.resize(m);
    out.k0_share.assign(m, 0.0);
    out.coeff.assign(m, 0.0);
    double xmax = 0.0;
    for (int e = 0; e < m; ++e) {
        double r = std::max(std::abs(seps[e]), radius_floor);
        out.radius[e] = r;
        if (p.weight[e] > 0) {
            if (r < kContactFloor)
                throw SingularState("positively weighted pair " + edge_key(edge_at(e)) +
                                    " is at contact");
            xmax = std::max(xmax, std::sqrt(2.0 * p.beta[e]) * r);
        }
    }
    if (xmax < specfun::kLogDomainThreshold) {
        double sum = 0.0;
        for (int e = 0; e < m; ++e) {
            if (p.weight[e] <= 0) continue;
            double x = std::sqrt(2.0 * p.beta[e]) * out.radius[e];
            double k0 = specfun::k0(x);
            out.k0_share[e] = p.weight[e] * k0;
            out.coeff[e] = p.weight[e] * k0 * specfun::ratio_khat1_k0(x);
            sum += out.k0_share[e];
        }
        for (int e = 0; e < m; ++e) {
            out.k0_share[e] /= sum;
            out.coeff[e] /= sum;
        }
        out.log_ksum = std::log(sum);
        return;
    }
    // Log-domain path: shift by the largest log term.
    double top = -std::numeric_limits<double>::infinity();
    for (int e = 0; e < m; ++e) {
        if (p.weight[e] <= 0) continue;
        double x = std::sqrt(2.0 * p.beta[e]) * out.radius[e];
        out.k0_share[e] = std::log(p.weight[e]) + specfun::log_k0(x);
        out.coeff[e] = out.k0_share[e] + std::log(specfun::ratio_khat1_k0(x));
        top = std::max(top, out.k0_share[e]);
    }
    double sum = 0.0;
    for (int e = 0; e < m; ++e)
        if (p.weight[e] > 0) sum += std::exp(out.k0_share[e] - top);
    for (int e = 0; e < m; ++e) {
        if (p.weight[e] <= 0) continue;
        out.k0_share[e] = std::exp(out.k0_share[e] - top) / sum;
        out.coeff[e] = std::exp(out.coeff[e] - top) / sum;
    }
    out.log_ksum = top + std::log(sum);
}

double log_weighted_k0_sum(const Configuration& z, const ModelParams& p) {
    KsumTerms t;
    evaluate_ksum(separations(z), p, 0.0, t);
    return t.log_ksum;
}

double weighted_k0_sum(const Configuration& z, const ModelParams& p) {
    return std::exp(log_weighted_k0_sum(z, p));
}

namespace {
// 1/conj(Z) evaluated at the (possibly floored) radius.
Complex inv_conj(Complex s, double radius) {
    double a = std::abs(s);
    Complex unit = a > 0 ? s / a : Complex(1.0, 0.0);
    return unit / radius;
}
}  // namespace

void particle_drift_from_terms(const std::vector<Complex>& seps, const KsumTerms& t, int n,
                               std::vector<Complex>& out) {
    out.assign(n, Complex(0.0, 0.0));
    const int m = static_cast<int>(seps.size());
    for (int e = 0; e < m; ++e) {
        if (t.coeff[e] == 0.0) continue;
        Edge ed = edge_at(e);
        Complex v = -kInvSqrt2 * t.coeff[e] * inv_conj(seps[e], t.radius[e]);
        out[ed.upper] += v;
        out[ed.lower] -= v;
    }
}

void relative_drift_from_terms(const std::vector<Complex>& seps, const KsumTerms& t,
                               std::vector<Complex>& out) {
    const int m = static_cast<int>(seps.size());
    out.assign(m, Complex(0.0, 0.0));
    for (int e = 0; e < m; ++e) {
        if (t.coeff[e] == 0.0) continue;
        Edge ee = edge_at(e);
        Complex v = t.coeff[e] * inv_conj(seps[e], t.radius[e]);
        for (int f = 0; f < m; ++f) {
            int sd = sigma_dot(edge_at(f), ee);
            if (sd != 0) out[f] -= 0.5 * sd * v;
        }
    }
}

std::vector<Complex> drift_particles(const Configuration& z, const ModelParams& p) {
    auto seps = separations(z);
    KsumTerms t;
    evaluate_ksum(seps, p, 0.0, t);
    std::vector<Complex> out;
    particle_drift_from_terms(seps, t, static_cast<int>(z.size()), out);
    return out;
}

std::vector<Complex> drift_relative(const Configuration& z, const ModelParams& p) {
    auto seps = separations(z);
    KsumTerms t;
    evaluate_ksum(seps, p, 0.0, t);
    std::vector<Complex> out;
    relative_drift_from_terms(seps, t, out);
    return out;
}

double phi_term(const std::vector<int>& subset, int edge_j, const Configuration& z,
                const ModelParams& p) {
    if (std::find(subset.begin(), subset.end(), edge_j) == subset.end())
        throw ParamError("phi_term: edge_j must belong to the subset");
    auto seps = separations(z);
    for (const auto& s : seps)
        if (std::abs(s) < kContactFloor) throw SingularState("phi_term: zero separation");
    KsumTerms t;
    evaluate_ksum(seps, p, 0.0, t);
    const int m = static_cast<int>(seps.size());
    std::vector<char> in(m, 0);
    for (int k : subset) in.at(k) = 1;
    const Edge ej = edge_at(edge_j);
    const double rj = t.radius[edge_j];
    double in_sum = 0.0, out_sum = 0.0;
    for (int k = 0; k < m; ++k) {
        int sd = sigma_dot(ej, edge_at(k));
        if (sd == 0) continue;
        double re = (seps[k] / seps[edge_j]).real();
        double rk = t.radius[k];
        if (in[k]) in_sum += (rj / rk) * re * sd;
        else out_sum += (rj * rj) / (rk * rk) * re * sd * t.coeff[k];
    }
    return in_sum * t.coeff[edge_j] + out_sum;
}

StateClass classify_state(const Configuration& z, const ModelParams& p, double contact_tol) {
    auto seps = separations(z);
    StateClass c;
    int contacts = 0;
    for (int e = 0; e < static_cast<int>(seps.size()); ++e) {
        if (p.weight[e] <= 0) continue;
        double r = std::abs(seps[e]);
        if (r <= contact_tol || r < kContactFloor) {
            ++contacts;
            c.edge = e;
        }
    }
    if (contacts == 0) {
        c.tag = StateClass::Tag::AllSeparated;
        c.edge = -1;
    } else if (contacts == 1) {
        c.tag = StateClass::Tag::SingleContact;
    } else {
        c.tag = StateClass::Tag::MultiContact;
        c.edge = -1;
    }
    return c;
}

}  // namespace manydelta
