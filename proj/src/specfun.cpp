#include "manydelta/specfun.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <cmath>
#include <string>

namespace manydelta::specfun {

namespace {

// GSL aborts on errors by default; we check status codes instead.
const bool kGslHandlerOff = [] {
    gsl_set_error_handler_off();
    return true;
}();

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError(std::string(name) + ": argument must be positive and finite, got " +
                          std::to_string(x));
    }
}

double checked(int status, const gsl_sf_result& r, const char* name, double x) {
    if (status != GSL_SUCCESS && status != GSL_EUNDRFLW) {
        throw DomainError(std::string(name) + ": evaluation failed at x=" + std::to_string(x) +
                          " (" + gsl_strerror(status) + ")");
    }
    return r.val;
}

double k0_scaled(double x) {
    gsl_sf_result r;
    return checked(gsl_sf_bessel_K0_scaled_e(x, &r), r, "k0", x);
}

double k1_scaled(double x) {
    gsl_sf_result r;
    return checked(gsl_sf_bessel_K1_scaled_e(x, &r), r, "k1", x);
}

}  // namespace

SpecValue k0_eval(double x) {
    require_positive(x, "k0");
    if (x >= kLogDomainThreshold) {
        double lv = std::log(k0_scaled(x)) - x;
        return {std::exp(lv), lv};
    }
    gsl_sf_result r;
    double v = checked(gsl_sf_bessel_K0_e(x, &r), r, "k0", x);
    return {v, std::log(v)};
}

SpecValue k1_eval(double x) {
    require_positive(x, "k1");
    if (x >= kLogDomainThreshold) {
        double lv = std::log(k1_scaled(x)) - x;
        return {std::exp(lv), lv};
    }
    gsl_sf_result r;
    double v = checked(gsl_sf_bessel_K1_e(x, &r), r, "k1", x);
    return {v, std::log(v)};
}

SpecValue khat1_eval(double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        throw DomainError("khat: argument must be nonnegative and finite");
    }
    // x K1(x) = 1 + O(x^2 log x); below 1e-150 the correction is invisible.
    if (x < 1e-150) return {1.0, 0.0};
    if (x >= kLogDomainThreshold) {
        double lv = std::log(x) + std::log(k1_scaled(x)) - x;
        return {std::exp(lv), lv};
    }
    gsl_sf_result r;
    double v = x * checked(gsl_sf_bessel_K1_e(x, &r), r, "khat", x);
    return {v, std::log(v)};
}

double k0(double x) { return k0_eval(x).value; }
double k1(double x) { return k1_eval(x).value; }
double log_k0(double x) { return k0_eval(x).log_value; }

double khat(int nu, double x) {
    if (nu == 0) {
        if (x == 0.0) throw DomainError("khat: nu=0 diverges at x=0");
        return k0(x);
    }
    if (nu == 1) return khat1_eval(x).value;
    throw DomainError("khat: nu must be 0 or 1");
}

double g_nu(int nu, double R) {
    if (!(R >= 0.0)) throw DomainError("g_nu: R must be nonnegative");
    return khat(nu, std::sqrt(R));
}

double ratio_khat1_k0(double x) {
    require_positive(x, "ratio_khat1_k0");
    if (x >= kLogDomainThreshold) return x * k1_scaled(x) / k0_scaled(x);
    if (x < 1e-150) return 1.0 / k0(x);
    gsl_sf_result a, b;
    double num = checked(gsl_sf_bessel_K1_e(x, &a), a, "ratio", x);
    double den = checked(gsl_sf_bessel_K0_e(x, &b), b, "ratio", x);
    return x * num / den;
}

}  // namespace manydelta::specfun
