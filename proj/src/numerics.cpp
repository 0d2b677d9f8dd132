#include "causaltab/numerics.hpp"

#include <cmath>
#include <limits>

#include "causaltab/errors.hpp"

namespace causaltab {
namespace {

constexpr int kMaxIterations = 1000;
constexpr double kEps = 1e-15;

// log of the common prefactor x^a e^-x / Gamma(a)
double log_prefactor(double a, double x) {
    return a * std::log(x) - x - std::lgamma(a);
}

// P(a, x) by the power series, valid for x < a + 1.
double lower_series(double a, double x) {
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < kMaxIterations; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(log_prefactor(a, x));
}

// Q(a, x) by the continued fraction (modified Lentz), valid for x >= a + 1.
double upper_continued_fraction(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / kEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kMaxIterations; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(log_prefactor(a, x)) * h;
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x)) {
        throw UsageError("regularized_gamma_p requires a > 0 and finite x >= 0");
    }
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return lower_series(a, x);
    return 1.0 - upper_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || !std::isfinite(a) || !std::isfinite(x)) {
        throw UsageError("regularized_gamma_q requires a > 0 and finite x >= 0");
    }
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - lower_series(a, x);
    return upper_continued_fraction(a, x);
}

double chi_squared_sf(double x, double df) {
    if (!(df > 0.0)) throw UsageError("chi_squared_sf requires df > 0");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(df / 2.0, x / 2.0);
}

}  // namespace causaltab
