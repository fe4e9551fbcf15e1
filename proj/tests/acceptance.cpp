// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"

#include "ratebv/control.hpp"
#include "ratebv/problems.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

using namespace ratebv;

namespace
{

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome
{
    bool pass{false};
    std::string detail;
};

Outcome play_exactness()
{
    const auto p = problems::scalar_play();
    const auto start = Clock::now();
    const ViscousTrajectory traj = solve_viscous(p.spec, p.load, p.z0, 1e-3, 1e-4);
    const double elapsed = seconds_since(start);
    double err = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k)
    {
        err = std::max(err, std::abs(traj.states[k](0) - oracle::play(traj.times[k])));
    }
    std::ostringstream d;
    d << "sup error " << err << ", " << elapsed << " s";
    return {err <= 5e-3 && elapsed <= 5.0, d.str()};
}

Outcome arclength_limit(const Extraction& play)
{
    const double err = std::abs(play.candidate.S - oracle::play_arclength());
    std::ostringstream d;
    d << "S = " << play.candidate.S << " at eps = " << play.report.eps.back() << ", |S - 3| = " << err;
    return {err <= 1e-2, d.str()};
}

Outcome edb_order()
{
    bool pass = true;
    std::ostringstream d;
    for (const auto& [name, p] : {std::pair{"play", problems::scalar_play()}, std::pair{"double well", problems::double_well()}})
    {
        const double eps = 1e-2;
        const double coarse = max_abs(edb_residual(p.spec, solve_viscous(p.spec, p.load, p.z0, eps, 1e-3), p.load));
        const double fine = max_abs(edb_residual(p.spec, solve_viscous(p.spec, p.load, p.z0, eps, 5e-4), p.load));
        const double ratio = coarse / fine;
        pass = pass && ratio >= 1.7 && ratio <= 2.3;
        d << name << " ratio " << ratio << " (" << coarse << " -> " << fine << "); ";
    }
    d << "required [1.7, 2.3]";
    return {pass, d.str()};
}

ParamTrajectory corrupted(ParamTrajectory p)
{
    for (std::size_t j = p.size() / 3; j < 2 * p.size() / 3; ++j)
    {
        p.z_hat[j](0) += 0.1;
    }
    return p;
}

Outcome certificates(const Extraction& play, const Extraction& dw)
{
    const auto pp = problems::scalar_play();
    const auto pd = problems::double_well();
    const CertificateReport a = certify(pp.spec, pp.load, pp.z0, play.candidate);
    const CertificateReport b = certify(pd.spec, pd.load, pd.z0, dw.candidate);
    const CertificateReport ca = certify(pp.spec, pp.load, pp.z0, corrupted(play.candidate));
    const CertificateReport cb = certify(pd.spec, pd.load, pd.z0, corrupted(dw.candidate));
    std::ostringstream d;
    d << "play (norm " << a.normalization_defect << ", comp " << a.complementarity_defect << ", edb " << a.edb_defect
      << ") " << (a.passed ? "passed" : "failed") << "; double well (norm " << b.normalization_defect << ", comp "
      << b.complementarity_defect << ", edb " << b.edb_defect << ") " << (b.passed ? "passed" : "failed")
      << "; corrupted copies " << (ca.passed || cb.passed ? "accepted" : "rejected");
    return {a.passed && b.passed && !ca.passed && !cb.passed, d.str()};
}

Outcome jump_structure(const Extraction& dw)
{
    const auto p = problems::double_well();
    ParamTrajectory c = dw.candidate;
    const CertificateReport r = certify(p.spec, p.load, p.z0, c);
    std::ostringstream d;
    d << r.g_components.size() << " jump component(s)";
    if (r.g_components.size() != 1)
    {
        return {false, d.str()};
    }
    const GComponent& g = r.g_components.front();
    annotate(c, r);
    bool lambda_positive = true;
    for (std::size_t j = g.first + 1; j < g.last; ++j)
    {
        lambda_positive = lambda_positive && c.lambda[j] > 0.0;
    }
    const JumpCheck jc = check_jump(p.spec, p.load, c, g);
    d << ", t_hat variation " << g.t_variation << ", lambda > 0 inside: " << (lambda_positive ? "yes" : "no")
      << ", transient mismatch " << jc.mismatch;
    return {g.t_variation <= 1e-10 && lambda_positive && jc.transient.converged && jc.mismatch <= 5e-3, d.str()};
}

Outcome autonomous_closed_form()
{
    const auto p = problems::scalar_play();
    AutonomousOptions o;
    o.tau = 1e-4;
    const ViscousTrajectory traj = solve_autonomous(p.spec, Vec::Constant(1, 3.0), Vec::Zero(1), o);
    double err = 0.0;
    for (std::size_t k = 0; k < traj.times.size(); ++k)
    {
        err = std::max(err, std::abs(traj.states[k](0) - oracle::relaxation(traj.times[k])));
    }
    std::ostringstream d;
    d << "sup error " << err << ", terminal gap " << traj.terminal_gap;
    return {err <= 1e-3 && traj.terminal_gap <= 1e-6, d.str()};
}

Outcome nu_delta_bound()
{
    std::mt19937_64 rng(2024);
    const double deltas[] = {1e-2, 1.0, 10.0};
    int held = 0;
    double worst = -1e300;
    for (int trial = 0; trial < 100; ++trial)
    {
        const int n = 1 + trial % 5;
        const ProblemSpec spec(oracle::random_spd(n, rng), oracle::random_spd(n, rng), oracle::random_kappa(n, rng),
                               Nonconvexity::double_well(1.0));
        const Vec ell = oracle::random_vector(n, rng, 4.0);
        const Vec z0 = oracle::random_vector(n, rng);
        try
        {
            const NuDeltaBound nu = nu_delta_initial(spec, deltas[trial % 3], ell, z0);
            worst = std::max(worst, nu.nu0 - nu.bound);
            held += nu.nu0 <= nu.bound + 1e-9 ? 1 : 0;
        }
        catch (const InvariantViolation&)
        {
        }
    }
    std::ostringstream d;
    d << held << "/100 instances, max(nu0 - bound) = " << worst;
    return {held == 100, d.str()};
}

Outcome conjugate()
{
    std::mt19937_64 rng(2025);
    const double deltas[] = {1e-2, 1.0, 10.0};
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial)
    {
        const int n = 1 + trial % 2;
        const ProblemSpec spec(oracle::random_spd(n, rng), oracle::random_spd(n, rng), oracle::random_kappa(n, rng));
        const double delta = deltas[trial % 3];
        const Mat M = spec.V() + delta * spec.A();
        const Vec eta = oracle::random_vector(n, rng, 4.0);
        worst = std::max(worst, std::abs(conj_R_delta(spec, delta, eta) -
                                         oracle::box_distance_sq_half(M.inverse(), spec.kappa(), eta)));
    }
    std::ostringstream d;
    d << "max deviation from face enumeration " << worst << " over 50 instances";
    return {worst <= 1e-6, d.str()};
}

Outcome prox_properties()
{
    std::mt19937_64 rng(2026);
    const double deltas[] = {0.0, 1e-2, 1.0, 10.0};
    double worst_certificate = 0.0;
    double worst_lipschitz = 0.0;
    for (int trial = 0; trial < 1000; ++trial)
    {
        const int n = 1 + trial % 5;
        const ProblemSpec spec(oracle::random_spd(n, rng), oracle::random_spd(n, rng), oracle::random_kappa(n, rng));
        const double delta = deltas[trial % 4];
        const Mat M = spec.V() + delta * spec.A();
        const Vec xi1 = oracle::random_vector(n, rng, 4.0);
        const Vec xi2 = oracle::random_vector(n, rng, 4.0);
        const Vec w1 = prox_G_delta(spec, delta, xi1);
        const Vec w2 = prox_G_delta(spec, delta, xi2);
        const Vec force = xi1 - M * w1;
        for (int i = 0; i < n; ++i)
        {
            const double k = spec.kappa()(i);
            const double violation = w1(i) == 0.0 ? std::abs(force(i)) - k
                                                  : std::abs(force(i) - k * (w1(i) > 0.0 ? 1.0 : -1.0));
            worst_certificate = std::max(worst_certificate, violation);
        }
        const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues().minCoeff();
        const double lhs = (w1 - w2).norm();
        const double rhs = (xi1 - xi2).norm() / lmin;
        worst_lipschitz = std::max(worst_lipschitz, lhs - rhs * (1.0 + 1e-9));
    }
    std::ostringstream d;
    d << "worst certificate violation " << worst_certificate << ", worst Lipschitz excess " << worst_lipschitz;
    return {worst_certificate <= 1e-8 && worst_lipschitz <= 1e-12, d.str()};
}

Outcome compactness(const Extraction& play, const Extraction& dw)
{
    auto row = [](const std::vector<double>& v) {
        std::ostringstream s;
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            s << (i ? " > " : "") << v[i];
        }
        return s.str();
    };
    std::ostringstream d;
    d << "play affine " << row(play.report.distances_affine) << ", constant " << row(play.report.distances_constant)
      << "; double well affine " << row(dw.report.distances_affine) << ", constant "
      << row(dw.report.distances_constant);
    return {play.report.decreasing_affine && play.report.decreasing_constant && dw.report.decreasing_affine &&
                dw.report.decreasing_constant,
            d.str()};
}

bool nonincreasing(const ControlResult& r)
{
    for (std::size_t k = 0; k + 1 < r.history.size(); ++k)
    {
        if (r.history[k + 1].J > r.history[k].J)
        {
            return false;
        }
    }
    return true;
}

Outcome control_sanity()
{
    const auto p = problems::scalar_play();
    const LoadPath rest({0.0, 1.0, 2.0}, Mat::Zero(3, 1));
    std::ostringstream d;

    OptimizeOptions trivial_options;
    trivial_options.budget = 100;
    const ControlResult trivial = optimize(p.spec, p.z0, {Vec::Zero(1), 1e-3}, rest, trivial_options);
    const bool a = trivial.best_J == 0.0 && trivial.evaluations == 1;
    d << "(a) J = " << trivial.best_J << " after " << trivial.evaluations << " evaluation(s); ";

    OptimizeOptions options;
    options.budget = 500;
    const double alpha = 1e-3;
    const ControlResult r = optimize(p.spec, p.z0, {Vec::Ones(1), alpha}, rest, options);
    const bool b = r.best_J < 1.0 && r.certified;
    d << "(b) best_J = " << r.best_J << ", certificate " << (r.certified ? "passed" : "failed") << "; ";

    const bool c = nonincreasing(trivial) && nonincreasing(r);
    d << "(c) history " << (c ? "nonincreasing" : "increases") << "; ";

    // optimize() throws if any evaluation with J <= J_init violates the witness.
    const bool dd = r.witness_checks > 0 && r.best_h1 <= r.J_init / alpha;
    d << "(d) " << r.witness_checks << " witness checks, best h1 " << r.best_h1 << " <= " << r.J_init / alpha;
    return {a && b && c && dd, d.str()};
}

}  // namespace

int main()
{
    const auto start = Clock::now();
    int failures = 0;
    auto report = [&](int id, const char* title, const std::function<Outcome()>& run) {
        Outcome o;
        try
        {
            o = run();
        }
        catch (const std::exception& e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s  %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
        std::fflush(stdout);
    };

    const auto pp = problems::scalar_play();
    const auto pd = problems::double_well();
    const Extraction play = extract_bv(pp.spec, pp.load, pp.z0);
    const Extraction dw = extract_bv(pd.spec, pd.load, pd.z0);

    report(1, "scalar play exactness", play_exactness);
    report(2, "arc-length limit", [&] { return arclength_limit(play); });
    report(3, "energy-dissipation residual halves with tau", edb_order);
    report(4, "certificates", [&] { return certificates(play, dw); });
    report(5, "jump structure", [&] { return jump_structure(dw); });
    report(6, "autonomous closed form", autonomous_closed_form);
    report(7, "initial speed bound", nu_delta_bound);
    report(8, "conjugate", conjugate);
    report(9, "prox properties", prox_properties);
    report(10, "epsilon compactness", [&] { return compactness(play, dw); });
    report(11, "optimal control sanity", control_sanity);
    const double total = seconds_since(start);
    report(12, "pipeline runtime", [&] {
        std::ostringstream d;
        d << total << " s for criteria 1-11 (limit 600 s)";
        return Outcome{total < 600.0, d.str()};
    });
    return failures == 0 ? 0 : 1;
}
