#include "oracles.hpp"

#include "ratebv/errors.hpp"
#include "ratebv/problems.hpp"
#include "ratebv/viscous.hpp"

#include <doctest.h>

#include <random>

using namespace ratebv;

namespace
{

Mat one(double x)
{
    return Mat::Constant(1, 1, x);
}

double edb_max(const problems::Canonical& p, double eps, double tau)
{
    return max_abs(edb_residual(p.spec, solve_viscous(p.spec, p.load, p.z0, eps, tau), p.load));
}

}  // namespace

TEST_SUITE("viscous")
{
    TEST_CASE("scalar play follows the play operator")
    {
        const auto p = problems::scalar_play();
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-3, 1e-4);
        CHECK(traj.steps() == 20000);
        double err = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k)
        {
            err = std::max(err, std::abs(traj.states[k](0) - oracle::play(traj.times[k])));
        }
        CHECK(err <= 5e-3);
        CHECK(traj.times.back() == 2.0);
        CHECK_NOTHROW(traj.validate());
    }

    TEST_CASE("energy-dissipation residual is second order in the step")
    {
        // Midpoint conjugate and trapezoidal work cancel the first-order error
        // of implicit Euler, so halving tau quarters the residual.
        for (const auto& p : {problems::scalar_play(), problems::double_well()})
        {
            const double coarse = edb_max(p, 1e-2, 1e-3);
            const double fine = edb_max(p, 1e-2, 5e-4);
            CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.1));
        }
    }

    TEST_CASE("each implicit step decreases the incremental functional")
    {
        const auto p = problems::double_well();
        const double eps = 1e-2;
        const double tau = 1e-3;
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, eps, tau);
        for (std::size_t k = 0; k < traj.steps(); ++k)
        {
            const Vec ell = p.load.value(traj.times[k + 1]);
            const Vec dz = traj.states[k + 1] - traj.states[k];
            const double dt = traj.durations[k];
            const double lhs = energy_E(p.spec, ell, traj.states[k + 1]) + R_value(p.spec, dz) +
                               eps / (2.0 * dt) * dz.dot(p.spec.V() * dz);
            CHECK(lhs <= energy_E(p.spec, ell, traj.states[k]) + 1e-9);
        }
    }

    TEST_CASE("paused steps freeze the load clock while the state relaxes")
    {
        const auto p = problems::double_well();
        ViscousOptions options;
        options.pause_gap = 1e-2;
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-2, 1e-4, options);
        CHECK(traj.paused_steps() > 0);
        for (std::size_t k = 0; k < traj.steps(); ++k)
        {
            if (traj.paused[k] != 0)
            {
                CHECK(traj.times[k + 1] == traj.times[k]);
            }
            else
            {
                CHECK(traj.times[k + 1] > traj.times[k]);
            }
        }
        CHECK(traj.final_state()(0) > 0.5);
        CHECK(max_abs(edb_residual(p.spec, traj, p.load)) < 1e-3);
    }

    TEST_CASE("non-finite data and degenerate steps are rejected")
    {
        const auto p = problems::scalar_play();
        CHECK_THROWS_AS((void)solve_viscous(p.spec, p.load, p.z0, 0.0, 1e-3), ArgumentError);
        CHECK_THROWS_AS((void)solve_viscous(p.spec, p.load, p.z0, 1e-3, -1.0), ArgumentError);
        CHECK_THROWS((void)solve_viscous(p.spec, p.load, Vec::Constant(1, std::nan("")), 1e-3, 1e-3));
    }

    TEST_CASE("autonomous relaxation matches its closed form")
    {
        const auto p = problems::scalar_play();
        AutonomousOptions options;
        options.tau = 1e-4;
        const ViscousTrajectory traj = solve_autonomous(p.spec, Vec::Constant(1, 3.0), Vec::Zero(1), options);
        double err = 0.0;
        for (std::size_t k = 0; k < traj.times.size(); ++k)
        {
            err = std::max(err, std::abs(traj.states[k](0) - oracle::relaxation(traj.times[k])));
        }
        CHECK(err <= 1e-3);
        CHECK(traj.converged);
        CHECK(traj.terminal_gap <= 1e-6);
    }

    TEST_CASE("autonomous runs at a stable state do not move")
    {
        const auto p = problems::double_well();
        const ViscousTrajectory traj = solve_autonomous(p.spec, Vec::Constant(1, -0.5), p.z0);
        CHECK(traj.converged);
        for (const Vec& z : traj.states)
        {
            CHECK(z(0) == p.z0(0));
        }
    }

    TEST_CASE("autonomous energy is nonincreasing and refinement converges at first order")
    {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 5; ++trial)
        {
            const int n = 1 + trial % 3;
            const ProblemSpec spec(oracle::random_spd(n, rng, 0.5), oracle::random_spd(n, rng, 0.5),
                                   oracle::random_kappa(n, rng), Nonconvexity::double_well(0.5));
            const Vec ell = oracle::random_vector(n, rng, 4.0);
            const Vec z0 = oracle::random_vector(n, rng, 1.0);
            AutonomousOptions coarse;
            coarse.tau = 2e-3;
            coarse.delta = 0.1;
            AutonomousOptions fine = coarse;
            fine.tau = 1e-3;
            AutonomousOptions finest = coarse;
            finest.tau = 5e-4;
            const ViscousTrajectory a = solve_autonomous(spec, ell, z0, coarse);
            const ViscousTrajectory b = solve_autonomous(spec, ell, z0, fine);
            const ViscousTrajectory c = solve_autonomous(spec, ell, z0, finest);
            for (std::size_t k = 0; k + 1 < a.energies.size(); ++k)
            {
                CHECK(a.energies[k + 1] <= a.energies[k] + coarse.tau);
            }
            // Compare on the coarse nodes over the common horizon.
            auto sup_difference = [&](const ViscousTrajectory& x, const ViscousTrajectory& y, std::size_t ratio) {
                double d = 0.0;
                for (std::size_t k = 0; k < x.states.size() && ratio * k < y.states.size(); ++k)
                {
                    d = std::max(d, spec.norm_V(x.states[k] - y.states[ratio * k]));
                }
                return d;
            };
            const double d1 = sup_difference(a, c, 4);
            const double d2 = sup_difference(b, c, 2);
            // Errors C tau give d1 / d2 = (1 - 1/4) / (1/2 - 1/4) = 3 = 2^p + 1.
            if (d1 > 1e-10)
            {
                CHECK(std::log2(d1 / d2 - 1.0) >= 0.9);
            }
        }
    }

    TEST_CASE("initial regularized speed obeys the distance bound")
    {
        std::mt19937_64 rng(22);
        const double deltas[] = {1e-2, 1.0, 10.0};
        for (int trial = 0; trial < 100; ++trial)
        {
            const int n = 1 + trial % 5;
            const ProblemSpec spec(oracle::random_spd(n, rng), oracle::random_spd(n, rng),
                                   oracle::random_kappa(n, rng), Nonconvexity::double_well(1.0));
            const NuDeltaBound nu = nu_delta_initial(spec, deltas[trial % 3], oracle::random_vector(n, rng, 4.0),
                                                     oracle::random_vector(n, rng));
            CHECK(nu.nu0 <= nu.bound + 1e-9);
        }
    }

    TEST_CASE("autonomous energy balance holds along the transient")
    {
        const ProblemSpec spec(one(1.0), one(1.0), Vec::Ones(1), Nonconvexity::double_well(2.0));
        AutonomousOptions options;
        options.tau = 1e-3;
        const ViscousTrajectory traj = solve_autonomous(spec, Vec::Constant(1, 1.3), Vec::Constant(1, -0.4), options);
        CHECK(traj.converged);
        CHECK(traj.final_state()(0) > 0.8);
        CHECK(max_abs(edb_residual(spec, traj)) < 1e-3);
    }
}
