#pragma once

#include <stdexcept>

namespace manydelta::specfun {

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A positive special-function value together with its natural log. For large
// arguments `value` may underflow to 0 while `log_value` stays accurate.
struct SpecValue {
    double value;
    double log_value;
};

// Arguments at or above this use the exponentially scaled evaluations.
inline constexpr double kLogDomainThreshold = 30.0;

SpecValue k0_eval(double x);
SpecValue k1_eval(double x);
// x*K1(x); the x == 0 extension is 1.
SpecValue khat1_eval(double x);

double k0(double x);
double k1(double x);
double log_k0(double x);

// x^nu K_nu(x) for nu in {0, 1}.
double khat(int nu, double x);

// khat(nu, sqrt(R)).
double g_nu(int nu, double R);

// khat(1, x) / k0(x).
double ratio_khat1_k0(double x);

}  // namespace manydelta::specfun
