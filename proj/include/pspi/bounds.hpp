#pragma once

#include <cstdint>

namespace pspi {

/// Regularized incomplete beta I_x(alpha, beta).
double inc_beta(double x, double alpha, double beta);

/// x with I_x(alpha, beta) = p, by bisection. Throws std::domain_error on bad arguments.
double inc_beta_inv(double p, double alpha, double beta);

/// (4 v_max / (1 - gamma)) (1 - 2 I^{-1}_{dT}(n/2 + 1, n/2 + 1)) + c with
/// dT = delta / (2 |S|^2 |A|^2).
double zeta_bound(std::uint64_t n_wedge, double delta, double v_max, double gamma, double c,
                  std::uint64_t n_states, std::uint64_t n_actions);

/// (32 v_max^2 / (zeta (1 - gamma)^2)) log(8 |S|^2 |A|^2 / delta).
double n_wedge_closed_form(double zeta, double delta, double v_max, double gamma, std::uint64_t n_states,
                           std::uint64_t n_actions);

struct NWedgeResult {
    std::uint64_t n_wedge = 0;  // smallest count whose bound (c = 0) is <= zeta
    double upper_bound = 0.0;   // closed-form bound, the end of the search range
    bool reachable = false;     // false when even the upper bound misses zeta
};

NWedgeResult n_wedge_bound(double zeta, double delta, double v_max, double gamma, std::uint64_t n_states,
                           std::uint64_t n_actions);

} // namespace pspi
