#include "ratebv/viscous.hpp"

#include "ratebv/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ratebv
{

namespace
{

Vec soft_threshold(const Vec& x, const Vec& thresholds)
{
    Vec out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
    {
        const double shrink = std::abs(x(i)) - thresholds(i);
        out(i) = shrink > 0.0 ? std::copysign(shrink, x(i)) : 0.0;
    }
    return out;
}

double spectral_norm(const Mat& m)
{
    const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> uniform_grid(double horizon, double tau)
{
    const double ratio = horizon / tau;
    auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9));
    steps = std::max<std::size_t>(steps, 1);
    std::vector<double> times(steps + 1);
    for (std::size_t k = 0; k < steps; ++k)
    {
        times[k] = static_cast<double>(k) * tau;
    }
    times[steps] = horizon;
    return times;
}

/// One implicit step: minimize R(d) + c/2 <V d, d> + E(t1, z + d) over d by
/// proximal gradient with backtracking, started at d = 0.
class IncrementalStep
{
public:
    IncrementalStep(const ProblemSpec& spec, const ViscousOptions& options) : spec_(spec), options_(options) {}

    Vec solve(std::size_t step, const Vec& z, const Vec& ell1, double c)
    {
        const Eigen::Index n = spec_.n();
        double lipschitz = c * spec_.lambda_max_V() + spec_.lambda_max_A();
        if (spec_.F().kind() != Nonconvexity::Kind::zero && spec_.F().has_hessian())
        {
            lipschitz += spec_.F().kind() == Nonconvexity::Kind::double_well
                             ? std::abs(spec_.F().hessian(z).diagonal().maxCoeff())
                             : spectral_norm(spec_.F().hessian(z));
        }

        Vec d = Vec::Zero(n);
        Vec grad = smooth_gradient(z, d, ell1, c);
        double res = 0.0;
        for (int it = 0; it < options_.max_inner_iterations; ++it)
        {
            res = subdifferential_residual(spec_.kappa(), -grad, d);
            if (res <= options_.inner_tolerance)
            {
                return d;
            }
            // Backtracking on the local Lipschitz constant. The gradient-difference
            // form of the test stays meaningful when energy differences drown in roundoff.
            for (int bt = 0; bt < 60; ++bt)
            {
                const Vec trial = soft_threshold(d - grad / lipschitz, spec_.kappa() / lipschitz);
                const Vec diff = trial - d;
                const Vec grad_trial = smooth_gradient(z, trial, ell1, c);
                if ((grad_trial - grad).dot(diff) <= lipschitz * diff.squaredNorm())
                {
                    d = trial;
                    grad = grad_trial;
                    break;
                }
                lipschitz *= 2.0;
            }
            if (!grad.allFinite())
            {
                throw DomainError("solve_viscous: non-finite energy in step " + std::to_string(step));
            }
        }
        throw StepFailure(step, res);
    }

private:
    [[nodiscard]] Vec smooth_gradient(const Vec& z, const Vec& d, const Vec& ell1, double c) const
    {
        return c * (spec_.V() * d) + grad_I(spec_, z + d) - ell1;
    }

    const ProblemSpec& spec_;
    const ViscousOptions& options_;
};

}  // namespace

std::size_t ViscousTrajectory::paused_steps() const
{
    return static_cast<std::size_t>(std::count(paused.begin(), paused.end(), char{1}));
}

void ViscousTrajectory::validate() const
{
    if (times.empty() || states.size() != times.size() || energies.size() != times.size())
    {
        throw ConsistencyError("ViscousTrajectory: node arrays have inconsistent lengths");
    }
    const std::size_t n_steps = rates.size();
    if (n_steps + 1 != times.size() || diss_R.size() != n_steps || diss_visc.size() != n_steps ||
        durations.size() != n_steps || paused.size() != n_steps)
    {
        throw ConsistencyError("ViscousTrajectory: step arrays have inconsistent lengths");
    }
    for (std::size_t k = 0; k < n_steps; ++k)
    {
        const bool ok = paused[k] != 0 ? times[k + 1] == times[k] : times[k + 1] > times[k];
        if (!ok || !(durations[k] > 0.0))
        {
            throw ConsistencyError("ViscousTrajectory: times must increase on every unpaused step");
        }
    }
}

double working_radius(const ProblemSpec& spec, const LoadPath& load, const Vec& z0)
{
    double load_max = 0.0;
    for (Eigen::Index k = 0; k < load.node_values().rows(); ++k)
    {
        load_max = std::max(load_max, spec.dual_norm_A(load.node_values().row(k).transpose()));
    }
    // 1/2 |z|_A^2 <= I(z) <= I(z0) + 2 |l|_{A^-1} |z|_A along any energy-decreasing path.
    const double i0 = energy_I(spec, z0);
    return 1.0 + spec.norm_A(z0) + 4.0 * load_max + std::sqrt(2.0 * i0);
}

ViscousTrajectory solve_viscous(const ProblemSpec& spec, const LoadPath& load, const Vec& z0, double epsilon,
                                double tau, const ViscousOptions& options)
{
    if (load.dimension() != spec.n() || z0.size() != spec.n())
    {
        throw ArgumentError("solve_viscous: dimension mismatch between problem, load and initial state");
    }
    if (!(epsilon > 0.0) || !(tau > 0.0))
    {
        throw ArgumentError("solve_viscous: epsilon and tau must be positive");
    }
    if (tau > load.T() * (1.0 + 1e-12))
    {
        throw ArgumentError("solve_viscous: tau exceeds the horizon T");
    }
    if (!z0.allFinite())
    {
        throw DomainError("solve_viscous: non-finite initial state");
    }

    ViscousTrajectory traj;
    traj.epsilon = epsilon;
    traj.tau = tau;
    const std::vector<double> grid = uniform_grid(load.T(), tau);
    const std::size_t clock_steps = grid.size() - 1;
    traj.times.reserve(clock_steps + 1);
    traj.states.reserve(clock_steps + 1);
    traj.energies.reserve(clock_steps + 1);
    traj.rates.reserve(clock_steps);
    traj.durations.reserve(clock_steps);
    traj.paused.reserve(clock_steps);
    traj.diss_R.reserve(clock_steps);
    traj.diss_visc.reserve(clock_steps);

    const double lambda = convexity_defect(spec, working_radius(spec, load, z0));
    if (epsilon / tau < 2.0 * lambda)
    {
        std::ostringstream msg;
        msg << "eps/tau = " << epsilon / tau << " is below 2*lambda = " << 2.0 * lambda
            << "; incremental problems may be nonconvex";
        traj.warnings.push_back(msg.str());
    }

    traj.times.push_back(0.0);
    traj.states.push_back(z0);
    traj.energies.push_back(energy_E(spec, load.value(0.0), z0));

    const auto pause_cap = static_cast<std::size_t>(options.max_pause_factor * static_cast<double>(clock_steps)) + 1000;
    std::size_t pauses = 0;

    IncrementalStep stepper(spec, options);
    Vec z = z0;
    std::size_t clock = 0;
    while (clock < clock_steps)
    {
        const std::size_t k = traj.steps();
        const double t = grid[clock];
        bool pause = false;
        if (options.pause_gap > 0.0)
        {
            pause = stability_gap(spec, load.value(t), z).gap > options.pause_gap;
            if (pause && ++pauses > pause_cap)
            {
                throw StepFailure(k, stability_gap(spec, load.value(t), z).gap);
            }
        }
        const double t1 = pause ? t : grid[clock + 1];
        const double dt = pause ? tau : grid[clock + 1] - t;
        const Vec ell1 = load.value(t1);
        const Vec d = stepper.solve(k, z, ell1, epsilon / dt);
        z += d;
        const double energy = energy_E(spec, ell1, z);
        if (!std::isfinite(energy))
        {
            throw DomainError("solve_viscous: non-finite energy at step " + std::to_string(k));
        }
        traj.times.push_back(t1);
        traj.states.push_back(z);
        traj.energies.push_back(energy);
        traj.rates.push_back(d / dt);
        traj.durations.push_back(dt);
        traj.paused.push_back(pause ? 1 : 0);
        traj.diss_R.push_back(R_value(spec, d));
        traj.diss_visc.push_back(epsilon / dt * d.dot(spec.V() * d));
        if (!pause)
        {
            ++clock;
        }
    }
    return traj;
}

ViscousTrajectory solve_autonomous(const ProblemSpec& spec, const Vec& ell_star, const Vec& z0,
                                   const AutonomousOptions& options)
{
    if (ell_star.size() != spec.n() || z0.size() != spec.n())
    {
        throw ArgumentError("solve_autonomous: dimension mismatch");
    }
    if (!(options.delta >= 0.0) || !(options.tau > 0.0) || !(options.stop_gap > 0.0))
    {
        throw ArgumentError("solve_autonomous: need delta >= 0, tau > 0 and stop_gap > 0");
    }
    const double horizon =
        options.horizon_cap > 0.0 ? options.horizon_cap : 1e3 * spec.lambda_max_V() / spec.alpha();

    const Mat metric = options.delta == 0.0 ? spec.V() : Mat(spec.V() + options.delta * spec.A());

    ViscousTrajectory traj;
    traj.epsilon = 0.0;
    traj.delta = options.delta;
    traj.tau = options.tau;
    traj.ell_star = ell_star;

    Vec z = z0;
    double t = 0.0;
    traj.times.push_back(t);
    traj.states.push_back(z);
    traj.energies.push_back(energy_E(spec, ell_star, z));

    for (std::size_t k = 0;; ++k)
    {
        const Vec xi = -grad_I(spec, z) + ell_star;
        const double gap = distance_to_stable_set(spec, xi).gap;
        traj.terminal_gap = gap;
        if (gap <= options.stop_gap)
        {
            traj.converged = true;
            break;
        }
        if (t >= horizon)
        {
            traj.converged = false;
            std::ostringstream msg;
            msg << "horizon cap " << horizon << " reached with stability gap " << gap;
            traj.warnings.push_back(msg.str());
            break;
        }
        const Vec rate = prox_with_metric(metric, spec.kappa(), xi);
        z += options.tau * rate;
        t += options.tau;
        const double energy = energy_E(spec, ell_star, z);
        if (!std::isfinite(energy))
        {
            throw DomainError("solve_autonomous: non-finite energy at step " + std::to_string(k));
        }
        traj.times.push_back(t);
        traj.states.push_back(z);
        traj.energies.push_back(energy);
        traj.rates.push_back(rate);
        traj.durations.push_back(options.tau);
        traj.paused.push_back(0);
        traj.diss_R.push_back(options.tau * R_value(spec, rate));
        traj.diss_visc.push_back(options.tau * rate.dot(metric * rate));
    }
    return traj;
}

std::vector<double> edb_residual(const ProblemSpec& spec, const ViscousTrajectory& traj, const LoadPath& load)
{
    traj.validate();
    if (traj.autonomous())
    {
        throw ConsistencyError("edb_residual: autonomous trajectory passed with a time-dependent load");
    }
    if (load.dimension() != spec.n() || std::abs(traj.times.back() - load.T()) > 1e-9 * (1.0 + load.T()))
    {
        throw ConsistencyError("edb_residual: trajectory does not match the load horizon");
    }
    const double eps = traj.epsilon;
    std::vector<double> residual(traj.times.size(), 0.0);
    const double e0 = energy_E(spec, load.value(0.0), traj.states.front());
    double dissipated = 0.0;
    double work = 0.0;
    for (std::size_t k = 0; k < traj.steps(); ++k)
    {
        const double t0 = traj.times[k];
        const double t1 = traj.times[k + 1];
        const double dt = traj.durations[k];
        const Vec& z0 = traj.states[k];
        const Vec& z1 = traj.states[k + 1];
        const Vec z_mid = 0.5 * (z0 + z1);
        const Vec& rate = traj.rates[k];
        const Vec force_mid = -grad_I(spec, z_mid) + load.value(0.5 * (t0 + t1));
        const double dist = distance_to_stable_set(spec, force_mid).gap;
        // R(dz) + dt [eps/2 |z'|_V^2 + 1/(2 eps) dist_V^2]: the (eps V)-metric conjugate.
        dissipated += R_value(spec, z1 - z0) + dt * (0.5 * eps * rate.dot(spec.V() * rate) + 0.5 * dist * dist / eps);
        // -d/dt E = <l', z>; trapezoidal in z.
        work += (load.value(t1) - load.value(t0)).dot(z_mid);
        residual[k + 1] = energy_E(spec, load.value(t1), z1) + dissipated - e0 + work;
    }
    return residual;
}

std::vector<double> edb_residual(const ProblemSpec& spec, const ViscousTrajectory& traj)
{
    traj.validate();
    if (!traj.autonomous() || traj.ell_star.size() != spec.n())
    {
        throw ConsistencyError("edb_residual: expected an autonomous trajectory with a frozen load");
    }
    const Mat metric = traj.delta == 0.0 ? spec.V() : Mat(spec.V() + traj.delta * spec.A());
    std::vector<double> residual(traj.times.size(), 0.0);
    const double e0 = traj.energies.front();
    double dissipated = 0.0;
    for (std::size_t k = 0; k < traj.steps(); ++k)
    {
        const double dt = traj.durations[k];
        const Vec& rate = traj.rates[k];
        const Vec z_mid = 0.5 * (traj.states[k] + traj.states[k + 1]);
        const Vec force_mid = -grad_I(spec, z_mid) + traj.ell_star;
        // R_V(z') + delta/2 |z'|_A^2 + R*_delta(-DE).
        dissipated += dt * (R_value(spec, rate) + 0.5 * rate.dot(metric * rate) +
                            conj_with_metric(metric, spec.kappa(), force_mid));
        residual[k + 1] = energy_E(spec, traj.ell_star, traj.states[k + 1]) + dissipated - e0;
    }
    return residual;
}

double max_abs(const std::vector<double>& values)
{
    double m = 0.0;
    for (double v : values)
    {
        m = std::max(m, std::abs(v));
    }
    return m;
}

NuDeltaBound nu_delta_initial(const ProblemSpec& spec, double delta, const Vec& ell_star, const Vec& z0)
{
    if (!(delta > 0.0))
    {
        throw ArgumentError("nu_delta_initial: delta must be positive");
    }
    const Vec xi = -grad_I(spec, z0) + ell_star;
    const Vec rate = prox_G_delta(spec, delta, xi);
    NuDeltaBound out;
    out.nu0 = std::sqrt(rate.dot(spec.V() * rate) + delta * rate.dot(spec.A() * rate));
    out.bound = distance_to_stable_set(spec, xi).gap;
    if (out.nu0 > out.bound + 1e-9)
    {
        std::ostringstream msg;
        msg << "nu_delta(0) = " << out.nu0 << " exceeds dist_V = " << out.bound;
        throw InvariantViolation(msg.str());
    }
    return out;
}

}  // namespace ratebv
