#include "pspi/bounds.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <stdexcept>

namespace pspi {

double inc_beta(double x, double alpha, double beta) {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw std::domain_error("inc_beta: shape parameters must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::ibeta(alpha, beta, x);
}

double inc_beta_inv(double p, double alpha, double beta) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inc_beta_inv: p must lie in (0,1)");
    if (!(alpha > 0.0) || !(beta > 0.0)) throw std::domain_error("inc_beta_inv: shape parameters must be positive");
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double f = inc_beta(mid, alpha, beta);
        if (f == p) return mid;
        (f < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double zeta_bound(std::uint64_t n_wedge, double delta, double v_max, double gamma, double c,
                  std::uint64_t n_states, std::uint64_t n_actions) {
    const double s = static_cast<double>(n_states), a = static_cast<double>(n_actions);
    const double delta_t = delta / (2.0 * s * s * a * a);
    const double shape = static_cast<double>(n_wedge) / 2.0 + 1.0;
    return 4.0 * v_max / (1.0 - gamma) * (1.0 - 2.0 * inc_beta_inv(delta_t, shape, shape)) + c;
}

double n_wedge_closed_form(double zeta, double delta, double v_max, double gamma, std::uint64_t n_states,
                           std::uint64_t n_actions) {
    const double s = static_cast<double>(n_states), a = static_cast<double>(n_actions);
    return 32.0 * v_max * v_max / (zeta * (1.0 - gamma) * (1.0 - gamma)) * std::log(8.0 * s * s * a * a / delta);
}

NWedgeResult n_wedge_bound(double zeta, double delta, double v_max, double gamma, std::uint64_t n_states,
                           std::uint64_t n_actions) {
    if (!(zeta > 0.0)) throw std::domain_error("n_wedge_bound: zeta must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("n_wedge_bound: delta must lie in (0,1)");
    NWedgeResult r;
    r.upper_bound = n_wedge_closed_form(zeta, delta, v_max, gamma, n_states, n_actions);
    auto hi = static_cast<std::uint64_t>(std::floor(r.upper_bound));
    auto ok = [&](std::uint64_t n) { return zeta_bound(n, delta, v_max, gamma, 0.0, n_states, n_actions) <= zeta; };
    if (!ok(hi)) {
        r.n_wedge = hi;
        return r;
    }
    std::uint64_t lo = 0;
    if (ok(lo)) hi = lo;
    // Invariant: ok(hi) and (hi == lo or !ok(lo)).
    while (hi > lo + 1) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        (ok(mid) ? hi : lo) = mid;
    }
    r.n_wedge = hi;
    r.reachable = true;
    return r;
}

} // namespace pspi
