#include "partod/rng.hpp"

#include <cmath>

namespace partod {

namespace {

// Knuth's multiplication method; O(lambda), fine for small means.
long poisson_small(Rng& rng, double lambda) {
    const double threshold = std::exp(-lambda);
    long k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= rng.uniform01();
    } while (p > threshold);
    return k - 1;
}

// Transformed rejection with squeeze (Hormann's PTRS) for lambda >= 10.
long poisson_ptrs(Rng& rng, double lambda) {
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        const double u = rng.uniform01() - 0.5;
        const double v = rng.uniform01();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        const double lhs = std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b);
        const double rhs = k * loglam - lambda - std::lgamma(k + 1.0);
        if (lhs <= rhs) return static_cast<long>(k);
    }
}

} // namespace

long Rng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 10.0) return poisson_small(*this, lambda);
    return poisson_ptrs(*this, lambda);
}

} // namespace partod
