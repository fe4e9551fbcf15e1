#include "ratebv/problems.hpp"

#include <algorithm>
#include <cmath>

namespace ratebv::problems
{

namespace
{

Mat scalar(double value)
{
    return Mat::Constant(1, 1, value);
}

Vec vec1(double value)
{
    return Vec::Constant(1, value);
}

}  // namespace

Canonical scalar_play()
{
    return {ProblemSpec(scalar(1.0), scalar(1.0), vec1(1.0)), LoadPath::ramp(2.0, vec1(0.0), vec1(2.0)), vec1(0.0)};
}

Canonical double_well()
{
    return {ProblemSpec(scalar(1.0), scalar(1.0), vec1(1.0), Nonconvexity::double_well(2.0)),
            LoadPath::ramp(2.0, vec1(0.0), vec1(2.0)), vec1(-1.0)};
}

double double_well_jump_load()
{
    // DI(z) = 2 z^3 - z has its local maximum 2/(3 sqrt 6) at z = -1/sqrt 6.
    return 1.0 + 2.0 / (3.0 * std::sqrt(6.0));
}

double scalar_play_exact(double t)
{
    return std::max(0.0, t - 1.0);
}

}  // namespace ratebv::problems
