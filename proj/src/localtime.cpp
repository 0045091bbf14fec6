#include "manydelta/localtime.hpp"

#include "manydelta/specfun.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace manydelta {

namespace {

constexpr size_t kQuadLimit = 2000;

std::vector<double> kernel_breaks(double scale, double support) {
    std::vector<double> b = {0.0};
    double lo = scale * 1e-12;
    if (lo < support) b.push_back(lo);
    for (double x = scale * 1e-11; x < support; x *= 4) b.push_back(x);
    b.push_back(support);
    return b;
}

}  // namespace

double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& breaks,
                        double tol) {
    // One workspace per call: integrands may themselves integrate.
    std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)> ws(
        gsl_integration_workspace_alloc(kQuadLimit), &gsl_integration_workspace_free);
    gsl_function gf;
    gf.function = [](double x, void* ctx) { return (*static_cast<const std::function<double(double)>*>(ctx))(x); };
    gf.params = const_cast<std::function<double(double)>*>(&f);
    // A coarse pass sets the absolute scale, so pieces that contribute
    // nothing are not pushed to a relative accuracy rounding cannot give.
    double scale = 0.0;
    size_t pieces = 0;
    for (size_t k = 0; k + 1 < breaks.size(); ++k) {
        double a = breaks[k], b = breaks[k + 1];
        if (!(b > a)) continue;
        double v, err, l1, lasc;
        gsl_integration_qk21(&gf, a, b, &v, &err, &l1, &lasc);
        scale += l1;
        ++pieces;
    }
    const double abs_tol = 0.1 * tol * scale / std::max<size_t>(pieces, 1);
    double total = 0.0, err_total = 0.0, abs_total = 0.0;
    for (size_t k = 0; k + 1 < breaks.size(); ++k) {
        double a = breaks[k], b = breaks[k + 1];
        if (!(b > a)) continue;
        double v = 0.0, err = 0.0;
        int status = gsl_integration_qags(&gf, a, b, abs_tol, tol, kQuadLimit, ws.get(), &v, &err);
        if (status != GSL_SUCCESS && status != GSL_EROUND && !(err <= 1e3 * std::max(tol * std::abs(v), abs_tol)))
            throw QuadratureError(std::string("quadrature failed on [") + std::to_string(a) + ", " +
                                  std::to_string(b) + "]: " + gsl_strerror(status));
        total += v;
        err_total += err;
        abs_total += std::abs(v);
    }
    if (!std::isfinite(total) || err_total > std::max(1e3 * tol * std::max(abs_total, scale), 1e-300))
        throw QuadratureError("quadrature did not converge (error estimate " +
                              std::to_string(err_total) + ")");
    return total;
}

void KernelParams::validate() const {
    if (!(beta > 0) || !(eps > 0)) throw ParamError("KernelParams: beta and eps must be positive");
}

double kappa_eps(double r, const KernelParams& kp) {
    kp.validate();
    if (!(r >= 0)) throw ParamError("kappa_eps: r must be nonnegative");
    double q = kp.eps + r * r;
    double k = specfun::k0_eval(std::sqrt(2 * kp.beta * q)).log_value;
    return std::exp(std::log(kp.eps) - 2 * std::log(q) - 2 * k);
}

double speed_density_m0(double r, double beta) {
    if (!(r > 0)) throw specfun::DomainError("speed_density_m0: r must be positive");
    double k = specfun::k0(std::sqrt(2 * beta) * r);
    return 4 * r * k * k;
}

double kernel_limit_quadrature(const std::function<double(double)>& f, double support,
                               const KernelParams& kp, double tol) {
    kp.validate();
    auto g = [&](double r) {
        if (r <= 0) return 0.0;
        return f(r) * kappa_eps(r, kp) * speed_density_m0(r, kp.beta);
    };
    return integrate_pieces(g, kernel_breaks(std::sqrt(kp.eps), support), tol);
}

double kernel_limit_quadrature_scaled(const std::function<double(double)>& f, double support,
                                      const KernelParams& kp, double tol) {
    kp.validate();
    const double s = std::sqrt(kp.eps), a = std::sqrt(2 * kp.beta * kp.eps);
    auto g = [&](double u) {
        if (u <= 0) return 0.0;
        double q = 1 + u * u;
        double num = specfun::k0(a * u);
        double den = specfun::k0(a * std::sqrt(q));
        return f(s * u) * 4 * u / (q * q) * (num / den) * (num / den);
    };
    return integrate_pieces(g, kernel_breaks(1.0, support / s), tol);
}

double vanishing_integrand(VanishingVariant v, double y, double eps) {
    if (y <= 0) return 0.0;
    double sy = std::sqrt(eps + y * y);
    double k0y = specfun::k0(y);
    double lead = v == VanishingVariant::First ? 1.0 / specfun::k0(sy) : 1.0 / k0y;
    double diff = specfun::ratio_khat1_k0(sy) - specfun::ratio_khat1_k0(y);
    return lead / (eps + y * y) * diff * y * k0y * k0y;
}

double vanishing_integral_oct(VanishingVariant v, double support, double eps, double tol) {
    if (!(support > 0) || !(eps > 0)) throw ParamError("vanishing_integral_oct: need M, eps > 0");
    auto f = [&](double y) { return vanishing_integrand(v, y, eps); };
    return integrate_pieces(f, kernel_breaks(std::sqrt(eps), support), tol);
}

namespace {

double log_g_integrand(double u, double t, double beta) {
    return u * std::log(beta) + (u - 1) * std::log(t) - std::lgamma(u);
}

}  // namespace

double local_time_density_g(double t, double beta, double tol) {
    if (!(t > 0) || !(beta > 0)) throw ParamError("g: need t, beta > 0");
    // Locate the peak of the log-integrand by golden-section search.
    double lo = 1e-300, hi = std::max(10.0, 4 * beta * t + 20);
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    for (int it = 0; it < 200; ++it) {
        if (log_g_integrand(c, t, beta) > log_g_integrand(d, t, beta)) b = d;
        else a = c;
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    double peak_u = 0.5 * (a + b);
    double peak = log_g_integrand(peak_u, t, beta);
    double cut = peak - std::log(1e16);
    double umax = std::max(peak_u, 1.0);
    while (log_g_integrand(umax, t, beta) > cut) umax *= 1.5;
    auto f = [&](double u) {
        if (u <= 0) return 0.0;
        return std::exp(log_g_integrand(u, t, beta) - peak);
    };
    std::vector<double> br = {0.0};
    if (peak_u > 0 && peak_u < umax) {
        for (double x = peak_u * 1e-6; x < peak_u; x *= 10) br.push_back(x);
        br.push_back(peak_u);
    }
    br.push_back(umax);
    double v = integrate_pieces(f, br, tol);
    return std::exp(peak - beta * t) * v;
}

double local_time_density_g_integral(double T, double beta, double tol) {
    if (!(T >= 0) || !(beta > 0)) throw ParamError("g integral: need T >= 0, beta > 0");
    if (T == 0) return 0.0;
    double x = beta * T;
    auto f = [&](double u) {
        if (u <= 0) return 1.0;
        return boost::math::gamma_p(u, x);
    };
    double umax = x + 20 + 10 * std::sqrt(x + 1);
    while (boost::math::gamma_p(umax, x) > 1e-17) umax *= 1.5;
    return integrate_pieces(f, {0.0, std::min(1.0, umax), umax}, tol);
}

namespace {

double pdf_kernel(double tau, double r, double beta, ExponentVariant v) {
    if (tau <= 0) return 0.0;
    double X = v == ExponentVariant::Linear ? r : r * r;
    return std::exp(-beta * tau - X / (2 * tau)) / (2 * tau);
}

}  // namespace

double radial_pdf_f(double r, double t, double beta, ExponentVariant v, double tol) {
    if (!(r > 0) || !(t > 0)) throw ParamError("radial_pdf_f: need r, t > 0");
    // int_0^t g(t-tau) phi(tau) dtau = int g(t-tau)[phi(tau) - phi(t)] dtau + phi(t) G(t);
    // the subtraction tames the 1/(s log^2 s) end of g at tau -> t.
    const double phit = pdf_kernel(t, r, beta, v);
    const double X = v == ExponentVariant::Linear ? r : r * r;
    auto f = [&](double tau) {
        if (tau <= 0 || tau >= t) return 0.0;
        double s = t - tau;
        // phi(tau) - phi(t) = phi(t) expm1(log(t/tau) + beta s - X s/(2 t tau))
        double d = std::log(t / tau) + beta * s - X * s / (2 * t * tau);
        double diff = d > 700 ? pdf_kernel(tau, r, beta, v) : phit * std::expm1(d);
        return local_time_density_g(s, beta, tol) * diff;
    };
    std::vector<double> br = {0.0, 0.5 * t, t};
    for (double x = 1e-6 * X; x < 0.5 * t; x *= 10) br.push_back(x);
    for (double x = 0.1 * t; x > 1e-12 * t; x /= 10) br.push_back(t - x);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    double inner = integrate_pieces(f, br, std::max(tol, 1e-9)) +
                   phit * local_time_density_g_integral(t, beta, tol);
    return 4 * r * specfun::k0(std::sqrt(2 * beta) * r) * inner;
}

double radial_pdf_cdf(double r, double t, double beta, ExponentVariant v, double tol) {
    if (!(t > 0)) throw ParamError("radial_pdf_cdf: need t > 0");
    if (!(r > 0)) return 0.0;
    // Radius integral first, then the time convolution, with the same
    // phi(tau) - phi(t) subtraction as the pointwise density.
    const double sb = std::sqrt(2 * beta);
    const double inner_tol = std::max(0.1 * tol, 1e-11);
    auto radius_breaks = [&](double tau) {
        std::vector<double> br = {0.0, r};
        for (double x = 1e-8; x < r; x *= 10) br.push_back(x);
        double scale = v == ExponentVariant::Linear ? tau : std::sqrt(tau);
        for (double m : {0.1, 1.0, 3.0, 10.0})
            if (m * scale < r) br.push_back(m * scale);
        std::sort(br.begin(), br.end());
        br.erase(std::unique(br.begin(), br.end()), br.end());
        return br;
    };
    auto mass_at = [&](double tau) {
        auto f = [&](double x) { return x > 0 ? 4 * x * specfun::k0(sb * x) * pdf_kernel(tau, x, beta, v) : 0.0; };
        return integrate_pieces(f, radius_breaks(tau), inner_tol);
    };
    auto mass_diff = [&](double tau) {
        auto f = [&](double x) {
            if (!(x > 0)) return 0.0;
            double X = v == ExponentVariant::Linear ? x : x * x;
            double d = std::log(t / tau) + beta * (t - tau) - X * (t - tau) / (2 * t * tau);
            double diff = d > 700 ? pdf_kernel(tau, x, beta, v) : pdf_kernel(t, x, beta, v) * std::expm1(d);
            return 4 * x * specfun::k0(sb * x) * diff;
        };
        return integrate_pieces(f, radius_breaks(tau), inner_tol);
    };
    auto outer = [&](double tau) {
        if (tau <= 0 || tau >= t) return 0.0;
        return local_time_density_g(t - tau, beta, tol) * mass_diff(tau);
    };
    std::vector<double> br = {0.0, 0.5 * t, t};
    for (double x = 1e-12 * t; x < 0.5 * t; x *= 10) br.push_back(x);
    for (double x = 0.1 * t; x > 1e-12 * t; x /= 10) br.push_back(t - x);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    return integrate_pieces(outer, br, std::max(tol, 1e-9)) + mass_at(t) * local_time_density_g_integral(t, beta, tol);
}

double radial_pdf_mass(double t, double beta, ExponentVariant v, double tol) {
    double upper = v == ExponentVariant::Linear ? 80.0 * t + 40.0 : 12.0 * std::sqrt(t) + 10.0;
    return radial_pdf_cdf(upper, t, beta, v, tol);
}

double occupation_local_time(const RadialPath& path, double beta, double eps) {
    KernelParams kp{beta, eps};
    // Trapezoid of kappa(r) r^2 on the du clock.
    double total = 0.0;
    double prev = kappa_eps(path.r[0], kp) * path.r[0] * path.r[0];
    for (size_t k = 0; k < path.dt.size(); ++k) {
        double next = kappa_eps(path.r[k + 1], kp) * path.r[k + 1] * path.r[k + 1];
        double scale = path.dt[k] / (0.5 * path.du[k] * (path.r[k] * path.r[k] + path.r[k + 1] * path.r[k + 1]));
        total += 0.5 * path.du[k] * (prev + next) * scale;
        prev = next;
    }
    return 0.5 * total;
}

double tanaka_increment(double r0, double r1, double dt, double du, double dB, double beta) {
    const double sb = std::sqrt(2 * beta);
    const double x0 = sb * r0, x1 = sb * r1;
    const double k0 = specfun::k0(x0), k1 = specfun::k0(x1);
    const double kh = specfun::khat(1, x0);
    // H(y) = 1/K0(sb e^y): H' = Khat1/K0^2, H'' = (2 Khat1^2/K0^2 - x^2)/K0
    const double h1 = kh / (k0 * k0);
    const double h2 = (2 * kh * kh / (k0 * k0) - x0 * x0) / k0;
    const double dy = dB / r0;
    return 0.5 * (1 / k1 - 1 / k0 + 0.5 * beta * dt * (1 / k0 + 1 / k1) - h1 * dy - 0.5 * h2 * (dy * dy - du));
}

double tanaka_local_time(const RadialPath& path, double beta) {
    double total = 0.0;
    for (size_t k = 0; k < path.dt.size(); ++k)
        total += tanaka_increment(path.r[k], path.r[k + 1], path.dt[k], path.du[k], path.dB[k], beta);
    return total;
}

}  // namespace manydelta
