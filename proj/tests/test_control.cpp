#include "ratebv/control.hpp"
#include "ratebv/errors.hpp"
#include "ratebv/problems.hpp"

#include <doctest.h>

using namespace ratebv;

namespace
{

ControlObjective target(double z, double alpha)
{
    return {Vec::Constant(1, z), alpha};
}

LoadPath rest(std::size_t nodes)
{
    std::vector<double> t;
    for (std::size_t k = 0; k < nodes; ++k)
    {
        t.push_back(2.0 * static_cast<double>(k) / static_cast<double>(nodes - 1));
    }
    return LoadPath(t, Mat::Zero(static_cast<Eigen::Index>(nodes), 1));
}

OptimizeOptions quick(std::size_t budget)
{
    OptimizeOptions o;
    o.budget = budget;
    o.certify_final = false;
    return o;
}

void check_run_invariants(const ControlResult& r, double alpha)
{
    for (std::size_t k = 0; k + 1 < r.history.size(); ++k)
    {
        CHECK(r.history[k + 1].J <= r.history[k].J);
    }
    CHECK(std::abs(r.best_J - (r.best_j + alpha * r.best_h1)) <= 1e-12);
    CHECK(r.best_h1 <= r.J_init / alpha + 1e-12);
    CHECK(r.best_J <= r.J_init);
}

}  // namespace

TEST_SUITE("control")
{
    TEST_CASE("reduced objective on the documented examples")
    {
        const auto p = problems::scalar_play();
        const ControlObjective to_zero = target(0.0, 1e-3);
        const Evaluation still = reduced_objective(p.spec, p.z0, rest(2), to_zero);
        CHECK(still.J == 0.0);
        CHECK(still.h1 == 0.0);

        const Evaluation idle = reduced_objective(p.spec, p.z0, rest(2), target(1.0, 1e-3));
        CHECK(idle.J == doctest::Approx(1.0).epsilon(1e-14));

        // The play ends exactly at 1 in the limit; a viscous surrogate lags by epsilon.
        const Evaluation ramp = reduced_objective(p.spec, p.z0, p.load, target(1.0, 1e-3), Fidelity::surrogate(1e-3, 1e-4));
        CHECK(ramp.j <= 2e-3);
        CHECK(ramp.h1 == doctest::Approx(h1_norm(p.spec, p.load)));
        CHECK(std::abs(ramp.J - (ramp.j + 1e-3 * ramp.h1)) <= 1e-12);

        const Evaluation again = reduced_objective(p.spec, p.z0, p.load, target(1.0, 1e-3), Fidelity::surrogate(1e-3, 1e-4));
        CHECK(again.J == ramp.J);
    }

    TEST_CASE("failed state solves carry the load")
    {
        const auto p = problems::scalar_play();
        Fidelity broken = Fidelity::surrogate(1e-2, 1e-3);
        broken.s_samples = 1;
        CHECK_THROWS_AS((void)reduced_objective(p.spec, p.z0, p.load, target(1.0, 1e-3), broken), EvaluationError);
        OptimizeOptions o = quick(10);
        o.fidelity = broken;
        CHECK_THROWS_AS((void)optimize(p.spec, p.z0, target(1.0, 1e-3), p.load, o), NumericalError);
    }

    TEST_CASE("optimal initial load terminates immediately")
    {
        const auto p = problems::scalar_play();
        const ControlResult r = optimize(p.spec, p.z0, target(0.0, 1e-3), rest(3), quick(100));
        CHECK(r.best_J == 0.0);
        CHECK(r.J_init == 0.0);
        CHECK(r.evaluations == 1);
    }

    TEST_CASE("zero budget is a failure")
    {
        const auto p = problems::scalar_play();
        CHECK_THROWS_AS((void)optimize(p.spec, p.z0, target(1.0, 1e-3), rest(3), quick(0)), NumericalError);
    }

    TEST_CASE("simplex search improves on the resting load and is reproducible")
    {
        const auto p = problems::scalar_play();
        OptimizeOptions o = quick(120);
        o.seed = 42;
        const ControlResult a = optimize(p.spec, p.z0, target(1.0, 1e-3), rest(3), o);
        CHECK(a.J_init == doctest::Approx(1.0));
        CHECK(a.best_J < 0.5);
        CHECK(a.evaluations <= 120);
        CHECK(a.witness_checks > 0);
        check_run_invariants(a, 1e-3);

        const ControlResult b = optimize(p.spec, p.z0, target(1.0, 1e-3), rest(3), o);
        CHECK(a.best_J == b.best_J);
        CHECK(a.history.size() == b.history.size());
        CHECK(a.best_load.node_values() == b.best_load.node_values());

        o.threads = 3;
        const ControlResult c = optimize(p.spec, p.z0, target(1.0, 1e-3), rest(3), o);
        CHECK(a.best_J == c.best_J);
    }

    TEST_CASE("finite-difference descent improves from a ramp")
    {
        const auto p = problems::double_well();
        OptimizeOptions o = quick(80);
        o.method = OptimizeOptions::Method::fd_gradient_descent;
        const ControlResult r = optimize(p.spec, p.z0, target(0.5, 1e-2), p.load, o);
        CHECK(r.best_J < r.J_init);
        check_run_invariants(r, 1e-2);
    }

    TEST_CASE("doubling the Tikhonov weight does not increase the optimal load norm")
    {
        const auto p = problems::scalar_play();
        OptimizeOptions o = quick(200);
        // Weights on either side of the point where reaching the target stops paying off.
        const ControlResult weak = optimize(p.spec, p.z0, target(1.0, 0.3), rest(2), o);
        const ControlResult strong = optimize(p.spec, p.z0, target(1.0, 0.6), rest(2), o);
        check_run_invariants(weak, 0.3);
        check_run_invariants(strong, 0.6);
        CHECK(strong.best_h1 <= weak.best_h1 + 1e-6);
    }

    TEST_CASE("final incumbent is re-solved with a full sweep and certified")
    {
        const auto p = problems::scalar_play();
        OptimizeOptions o = quick(60);
        o.certify_final = true;
        const ControlResult r = optimize(p.spec, p.z0, target(1.0, 1e-3), rest(3), o);
        CHECK(r.certified);
        CHECK(r.certificate.passed);
        CHECK(r.final_J == doctest::Approx(r.final_j + 1e-3 * h1_norm(p.spec, r.best_load)).epsilon(1e-12));
        CHECK(r.state.provenance.size() == 3);
    }
}
