#pragma once

#include "manydelta/sde.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace manydelta {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KernelParams {
    double beta = 1.0;
    double eps = 1e-4;
    void validate() const;
};

double kappa_eps(double r, const KernelParams& kp);
// 4 r K0(sqrt(2 beta) r)^2
double speed_density_m0(double r, double beta);

// int_0^M f(r) kappa_eps(r) m0(dr), split at the kernel scale sqrt(eps).
double kernel_limit_quadrature(const std::function<double(double)>& f, double support, const KernelParams& kp,
                               double tol = 1e-10);
// Same integral after r = sqrt(eps) r'.
double kernel_limit_quadrature_scaled(const std::function<double(double)>& f, double support,
                                      const KernelParams& kp, double tol = 1e-10);

enum class VanishingVariant { First, Second };
double vanishing_integrand(VanishingVariant v, double y, double eps);
double vanishing_integral_oct(VanishingVariant v, double support, double eps, double tol = 1e-10);

// e^{-beta t} int_0^inf beta^u t^{u-1} / Gamma(u) du
double local_time_density_g(double t, double beta, double tol = 1e-10);
// int_0^T g(t) dt, computed as int_0^inf P(u, beta T) du.
double local_time_density_g_integral(double T, double beta, double tol = 1e-10);

enum class ExponentVariant { Linear, Squared };
double radial_pdf_f(double r, double t, double beta, ExponentVariant v, double tol = 1e-9);
double radial_pdf_mass(double t, double beta, ExponentVariant v, double tol = 1e-8);
double radial_pdf_cdf(double r, double t, double beta, ExponentVariant v, double tol = 1e-8);

// Local time at 0 of a radial path: 1/2 int kappa_eps(r) dt, trapezoid on the du clock.
double occupation_local_time(const RadialPath& path, double beta, double eps);
// Local time from the Tanaka-type decomposition of h = 1/K0(sqrt(2 beta) r):
// L_t = [h(r_t) - h(r_0) + beta int h ds - int h' dB] / 2, summed per step in
// y = log r with the zero-mean second-order term H''(y) (dy^2 - du) / 2 removed.
double tanaka_increment(double r0, double r1, double dt, double du, double dB, double beta);
double tanaka_local_time(const RadialPath& path, double beta);

// Adaptive Gauss-Kronrod with extrapolation (QAGS) over consecutive breakpoints.
double integrate_pieces(const std::function<double(double)>& f, const std::vector<double>& breaks,
                        double tol);

}  // namespace manydelta
