#pragma once

#include <Eigen/Dense>

namespace ratebv
{

/// Result of projecting a point onto the box prod_i [-kappa_i, kappa_i].
struct BoxProjection
{
    Eigen::VectorXd point;   // minimizing sigma
    double distance{0.0};    // sqrt((xi - sigma)^T H (xi - sigma))
    int iterations{0};
};

/// Projects xi onto the symmetric box |sigma_i| <= kappa_i in the metric induced by
/// the SPD matrix `metric`:
///
///   min_sigma  1/2 (sigma - xi)^T H (sigma - xi)   s.t.  |sigma_i| <= kappa_i.
///
/// Diagonal metrics are clamped in closed form. Otherwise a projected Newton
/// iteration on the free variables runs until the projected gradient is below
/// `rel_tol * (1 + |xi|_inf)`. Throws NumericalError past `max_iterations`.
[[nodiscard]] BoxProjection project_onto_box(const Eigen::MatrixXd& metric,
                                             const Eigen::VectorXd& xi,
                                             const Eigen::VectorXd& kappa,
                                             double rel_tol = 1e-10,
                                             int max_iterations = 500);

[[nodiscard]] bool is_diagonal(const Eigen::MatrixXd& m);

}  // namespace ratebv
