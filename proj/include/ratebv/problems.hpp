#pragma once

#include "ratebv/model.hpp"

namespace ratebv::problems
{

/// Data of a complete rate-independent evolution problem.
struct Canonical
{
    ProblemSpec spec;
    LoadPath load;
    Vec z0;
};

/// Scalar play: A = V = kappa = 1, F = 0, l(t) = t on [0,2], z0 = 0.
/// Exact solution z(t) = max(0, t - 1).
[[nodiscard]] Canonical scalar_play();

/// Scalar double well: A = V = kappa = 1, F(z) = (z^2 - 1)^2 / 2 (beta = 2),
/// l(t) = t on [0,2], z0 = -1. The left branch loses stability at
/// l = 1 + 2/(3 sqrt 6) and the state jumps to the right well.
[[nodiscard]] Canonical double_well();

/// Load value at which the double well jumps.
[[nodiscard]] double double_well_jump_load();

/// Play operator max(0, t - 1) of the scalar play problem.
[[nodiscard]] double scalar_play_exact(double t);

}  // namespace ratebv::problems
