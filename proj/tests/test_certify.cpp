#include "fixtures.hpp"
#include "oracles.hpp"

#include "ratebv/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace ratebv;

namespace
{

ParamTrajectory shifted_middle_third(ParamTrajectory p, double shift)
{
    const std::size_t m = p.size();
    for (std::size_t j = m / 3; j < 2 * m / 3; ++j)
    {
        p.z_hat[j](0) += shift;
    }
    return p;
}

/// Straight scalar path on a uniform arc-length grid, for the structural helpers.
ParamTrajectory synthetic(std::vector<double> gap)
{
    ParamTrajectory p;
    const std::size_t m = gap.size();
    p.S = static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j)
    {
        p.t_hat.push_back(static_cast<double>(j));
        p.z_hat.push_back(Vec::Constant(1, 0.5 * static_cast<double>(j)));
    }
    p.gap = std::move(gap);
    p.lambda.assign(m, 0.0);
    p.g_mask.assign(m, 0);
    return p;
}

}  // namespace

TEST_SUITE("certify")
{
    TEST_CASE("tolerance profiles")
    {
        const ToleranceProfile strict = ToleranceProfile::strict();
        CHECK(strict.normalization == 1e-3);
        CHECK(strict.complementarity == 1e-4);
        CHECK(strict.edb == 1e-2);
        const ToleranceProfile standard = ToleranceProfile::named("standard");
        CHECK(standard.normalization == 2e-2);
        CHECK(standard.complementarity == 1e-3);
        CHECK(standard.edb == 5e-2);
        CHECK_THROWS_AS((void)ToleranceProfile::named("lenient"), ArgumentError);
    }

    TEST_CASE("jump set detection drops isolated nodes")
    {
        const ParamTrajectory p = synthetic({0, 1, 0, 0, 1, 1, 1, 0, 0, 1});
        const GDetection g = detect_G(p, 0.5);
        REQUIRE(g.components.size() == 1);
        CHECK(g.components[0].first == 4);
        CHECK(g.components[0].last == 6);
        CHECK(g.mask[1] == 0);
        CHECK(g.mask[5] == 1);
        CHECK(g.mask[9] == 0);
    }

    TEST_CASE("differences are exact on affine data")
    {
        const ParamTrajectory p = synthetic(std::vector<double>(6, 0.0));
        const Derivatives d = differentiate(p);
        for (std::size_t j = 0; j < p.size(); ++j)
        {
            CHECK(d.t_prime[j] == doctest::Approx(1.0));
            CHECK(d.z_prime[j](0) == doctest::Approx(0.5));
        }
    }

    TEST_CASE("chain-rule residual converges quadratically for the double well")
    {
        // The midpoint rule is exact for a quadratic energy, so the rate is only
        // visible with the quartic term.
        const auto p = problems::double_well();
        auto residual = [&](std::size_t m) {
            std::vector<Vec> path;
            for (std::size_t j = 0; j <= m; ++j)
            {
                const double s = 2.0 * static_cast<double>(j) / static_cast<double>(m);
                path.push_back(Vec::Constant(1, std::sin(2.0 * s) - 0.3));
            }
            return chain_rule_residual(p.spec, std::span<const Vec>(path));
        };
        const double r1 = residual(100);
        const double r2 = residual(200);
        const double r3 = residual(400);
        CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.05));
        CHECK(r2 / r3 == doctest::Approx(4.0).epsilon(0.05));

        const auto play = problems::scalar_play();
        const ViscousTrajectory traj = solve_viscous(play.spec, play.load, play.z0, 1e-2, 1e-3);
        CHECK(chain_rule_residual(play.spec, traj) <= 1e-12);
    }

    TEST_CASE("extracted play trajectory passes both profiles")
    {
        const auto p = problems::scalar_play();
        const ParamTrajectory& c = play_extraction().candidate;
        const CertificateReport standard = certify(p.spec, p.load, p.z0, c);
        CHECK(standard.passed);
        CHECK(standard.failures.empty());
        CHECK(standard.g_components.empty());
        CHECK(standard.endpoint_time);
        CHECK(standard.endpoint_state);
        CHECK(standard.apriori.z_ok);
        CHECK(standard.apriori.S_ok);
        CHECK(standard.apriori.S_identity_ok);
        CHECK(standard.force_ok);

        CertifyOptions strict;
        strict.tolerances = ToleranceProfile::strict();
        CHECK(certify(p.spec, p.load, p.z0, c, strict).passed);
    }

    TEST_CASE("corrupted trajectories fail")
    {
        const auto p = problems::scalar_play();
        const ParamTrajectory& c = play_extraction().candidate;
        const CertificateReport shifted = certify(p.spec, p.load, p.z0, shifted_middle_third(c, 0.1));
        CHECK_FALSE(shifted.passed);
        CHECK_FALSE(shifted.failures.empty());

        ParamTrajectory wrong_start = c;
        for (Vec& z : wrong_start.z_hat)
        {
            z(0) += 0.05;
        }
        const CertificateReport start = certify(p.spec, p.load, p.z0, wrong_start);
        CHECK_FALSE(start.passed);
        CHECK_FALSE(start.endpoint_state);

        const auto dw = problems::double_well();
        const CertificateReport dw_shifted =
            certify(dw.spec, dw.load, dw.z0, shifted_middle_third(double_well_extraction().candidate, 0.1));
        CHECK_FALSE(dw_shifted.passed);
    }

    TEST_CASE("double-well candidate has a single jump on a load plateau")
    {
        const auto p = problems::double_well();
        ParamTrajectory c = double_well_extraction().candidate;
        const CertificateReport r = certify(p.spec, p.load, p.z0, c);
        CHECK(r.passed);
        REQUIRE(r.g_components.size() == 1);
        const GComponent& g = r.g_components.front();
        CHECK(g.t_variation <= 1e-10);
        CHECK(g.t_constant);
        CHECK(g.lambda_positive);
        CHECK(g.inverse_lambda_sum > 0.0);
        CHECK(r.force_ok);
        CHECK(r.apriori.S_identity_ok);

        // The plateau sits at the fold of the left well.
        const double plateau_load = p.load.value(c.t_hat[g.first])(0);
        CHECK(std::abs(plateau_load - oracle::double_well_fold_load()) <= 5e-3);

        // Multipliers: zero off the jump set, positive inside, and lambda |z'|_V = gap there.
        annotate(c, r);
        const Derivatives d = differentiate(c);
        for (std::size_t j = 0; j < c.size(); ++j)
        {
            CHECK(c.lambda[j] >= 0.0);
            if (c.g_mask[j] == 0)
            {
                CHECK(c.lambda[j] == 0.0);
            }
            else if (j > g.first && j < g.last)
            {
                CHECK(c.lambda[j] > 0.0);
                CHECK(std::abs(c.lambda[j] * p.spec.norm_V(d.z_prime[j]) - c.gap[j]) <= 1e-10);
            }
        }

        // The frozen-load transient from the component start lands at the component end,
        // which is the right-well state at the plateau load.
        const JumpCheck jc = check_jump(p.spec, p.load, c, g);
        CHECK(jc.transient.converged);
        CHECK(jc.mismatch <= 5e-3);
        CHECK(std::abs(jc.transient.z_b(0) - oracle::double_well_landing(plateau_load)) <= 5e-3);
    }

    TEST_CASE("annotate rejects a report from another trajectory")
    {
        const auto p = problems::scalar_play();
        ParamTrajectory c = play_extraction().candidate;
        const CertificateReport r = certify(p.spec, p.load, p.z0, c);
        ParamTrajectory other = synthetic(std::vector<double>(5, 0.0));
        CHECK_THROWS_AS(annotate(other, r), ConsistencyError);
    }

    TEST_CASE("jump transient with regularization reaches a stable state")
    {
        const auto p = problems::double_well();
        AutonomousOptions o;
        o.delta = 0.1;
        const JumpTransient jt = jump_transient(p.spec, Vec::Constant(1, oracle::double_well_fold_load()),
                                               Vec::Constant(1, -1.0 / std::sqrt(6.0) + 1e-3), o);
        CHECK(jt.converged);
        CHECK(stability_gap(p.spec, Vec::Constant(1, oracle::double_well_fold_load()), jt.z_b).gap <= o.stop_gap);
        CHECK(jt.z_b(0) == doctest::Approx(oracle::double_well_landing(oracle::double_well_fold_load())).epsilon(5e-3));
    }
}
