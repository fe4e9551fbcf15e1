#include "fixtures.hpp"
#include "oracles.hpp"

#include "ratebv/errors.hpp"
#include "ratebv/reparam.hpp"

#include <doctest.h>

#include <limits>

using namespace ratebv;

TEST_SUITE("reparam")
{
    TEST_CASE("arc length dominates the load clock and equals T plus the variation for the play")
    {
        const auto p = problems::scalar_play();
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-3, 1e-4);
        const std::vector<double> s = arclength(p.spec, traj, p.load);
        REQUIRE(s.size() == traj.times.size());
        CHECK(s.front() == 0.0);
        for (std::size_t k = 0; k + 1 < s.size(); ++k)
        {
            CHECK(s[k + 1] - traj.times[k + 1] >= s[k] - traj.times[k] - 1e-15);
        }
        CHECK(s.back() == doctest::Approx(oracle::play_arclength()).epsilon(1e-2));
    }

    TEST_CASE("reparametrized trajectory recomposes to the viscous one")
    {
        const auto p = problems::double_well();
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-2, 1e-4);
        const std::vector<double> s = arclength(p.spec, traj, p.load);
        const ParamTrajectory pt = reparametrize(p.spec, traj, p.load, 4001);
        double max_step = 0.0;
        for (std::size_t k = 0; k + 1 < traj.states.size(); ++k)
        {
            max_step = std::max(max_step, p.spec.norm_V(traj.states[k + 1] - traj.states[k]));
        }
        max_step = std::max(max_step, pt.h_s());
        for (std::size_t k = 0; k < traj.states.size(); k += 37)
        {
            CHECK(p.spec.norm_V(pt.z_at(s[k]) - traj.states[k]) <= 2.0 * max_step);
        }
        CHECK(pt.z_hat.front()(0) == p.z0(0));
        CHECK(pt.t_hat.back() == p.load.T());
        CHECK(pt.S == s.back());
        CHECK_NOTHROW(pt.validate());
    }

    TEST_CASE("pre-limit normalization holds at interior nodes")
    {
        const auto p = problems::scalar_play();
        const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-2, 1e-4);
        const ParamTrajectory pt = reparametrize(p.spec, traj, p.load, 2001);
        double defect = 0.0;
        for (std::size_t j = 1; j + 1 < pt.size(); ++j)
        {
            const double h = 2.0 * pt.h_s();
            const double t_prime = (pt.t_hat[j + 1] - pt.t_hat[j - 1]) / h;
            const Vec z_prime = (pt.z_hat[j + 1] - pt.z_hat[j - 1]) / h;
            const Vec xi = p.load.value(pt.t_hat[j]) - grad_I(p.spec, pt.z_hat[j]);
            defect = std::max(defect, std::abs(t_prime + contact_potential(p.spec, z_prime, xi) - 1.0));
        }
        CHECK(defect <= 2e-2);
    }

    TEST_CASE("play extraction reaches the oracle arc length and is Cauchy in epsilon")
    {
        const Extraction& ex = play_extraction();
        CHECK(std::abs(ex.candidate.S - oracle::play_arclength()) <= 1e-2);
        CHECK(ex.report.decreasing_affine);
        CHECK(ex.report.decreasing_constant);
        CHECK(ex.report.cauchy);
        REQUIRE(ex.report.distances_affine.size() == 2);
        CHECK(ex.report.distances_affine[1] < ex.report.distances_affine[0]);
        CHECK(ex.report.distances_constant[1] < ex.report.distances_constant[0]);
        CHECK(ex.candidate.provenance.size() == 3);

        // The candidate sits on the graph of the play operator.
        double err = 0.0;
        for (std::size_t j = 0; j < ex.candidate.size(); ++j)
        {
            err = std::max(err, std::abs(ex.candidate.z_hat[j](0) - oracle::play(ex.candidate.t_hat[j])));
        }
        CHECK(err <= 5e-3);
        for (double loc : ex.report.jump_locations)
        {
            CHECK(loc == -1.0);
        }
    }

    TEST_CASE("double-well extraction is Cauchy under both conventions and locates the jump")
    {
        const Extraction& ex = double_well_extraction();
        CHECK(ex.report.decreasing_affine);
        CHECK(ex.report.decreasing_constant);
        for (double loc : ex.report.jump_locations)
        {
            CHECK(loc > 0.0);
        }
        // Arc length is T plus the variation plus the viscous cost of the jump.
        const auto p = problems::double_well();
        const double variation_lower = std::abs(ex.candidate.z_hat.back()(0) - p.z0(0));
        CHECK(ex.candidate.S > p.load.T() + variation_lower);
    }

    TEST_CASE("sweep arguments are validated")
    {
        const auto p = problems::scalar_play();
        ExtractOptions o;
        o.eps_list = {1e-2, 1e-3};
        CHECK_THROWS_AS((void)extract_bv(p.spec, p.load, p.z0, o), ArgumentError);
        o.eps_list = {1e-2, 1e-2, 1e-3};
        CHECK_THROWS_AS((void)extract_bv(p.spec, p.load, p.z0, o), ArgumentError);

        const auto dw = problems::double_well();
        CHECK(max_stable_tau(p.spec, p.load, p.z0, 1e-2) == std::numeric_limits<double>::infinity());
        const double limit = max_stable_tau(dw.spec, dw.load, dw.z0, 1e-2);
        CHECK(limit < 1e-2);
        ExtractOptions coarse;
        coarse.eps_list = {1e-1, 1e-2, 1e-3};
        coarse.tau_rule = [](double eps) { return eps; };
        CHECK_THROWS_AS((void)extract_bv(dw.spec, dw.load, dw.z0, coarse), ArgumentError);
    }

    TEST_CASE("sweep result does not depend on the thread count")
    {
        const auto p = problems::double_well();
        ExtractOptions o;
        o.eps_list = {1e-1, 3e-2, 1e-2};
        o.s_samples = 301;
        o.threads = 1;
        const Extraction serial = extract_bv(p.spec, p.load, p.z0, o);
        o.threads = 3;
        const Extraction threaded = extract_bv(p.spec, p.load, p.z0, o);
        CHECK(serial.candidate.S == threaded.candidate.S);
        CHECK(serial.report.distances_affine == threaded.report.distances_affine);
        for (std::size_t j = 0; j < serial.candidate.size(); ++j)
        {
            CHECK(serial.candidate.z_hat[j](0) == threaded.candidate.z_hat[j](0));
        }
    }
}
