#pragma once

#include "ratebv/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ratebv
{

/// Discrete solution of the epsilon-viscous system on [0,T] or of the
/// autonomous (delta-regularized) system at a frozen load.
///
/// Per-step quantities (`rates`, `durations`, `paused`, `diss_R`, `diss_visc`)
/// have one entry per step; node quantities (`times`, `states`, `energies`) one
/// entry per node.
///
/// A paused step advances the viscous clock by `durations[k]` while the load
/// time stays put (`times[k+1] == times[k]`); see ViscousOptions::pause_gap.
struct ViscousTrajectory
{
    std::vector<double> times;
    std::vector<Vec> states;
    /// (z_{k+1} - z_k) / durations[k].
    std::vector<Vec> rates;
    std::vector<double> durations;
    std::vector<char> paused;
    std::vector<double> energies;
    /// R(z_{k+1} - z_k).
    std::vector<double> diss_R;
    /// Quadratic viscous dissipation of the step: (eps/tau_k) |dz|_V^2 for the
    /// viscous system, tau_k (|zdot|_V^2 + delta |zdot|_A^2) for the autonomous one.
    std::vector<double> diss_visc;

    /// Viscosity parameter; 0 marks the autonomous system.
    double epsilon{0.0};
    double delta{0.0};
    /// Nominal step size.
    double tau{0.0};
    /// Frozen load of the autonomous system; empty for the viscous one.
    Vec ell_star;

    /// Autonomous runs: whether the stability gap dropped below the stop threshold.
    bool converged{true};
    double terminal_gap{0.0};
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t steps() const { return rates.size(); }
    [[nodiscard]] bool autonomous() const { return epsilon == 0.0; }
    [[nodiscard]] const Vec& final_state() const { return states.back(); }

    [[nodiscard]] std::size_t paused_steps() const;

    /// Throws ConsistencyError when the sizes do not match or times do not
    /// increase on unpaused steps.
    void validate() const;
};

struct ViscousOptions
{
    /// Inclusion residual accepted by the incremental solver.
    double inner_tolerance{1e-9};
    int max_inner_iterations{20000};
    /// When positive, a step that starts with stability gap above this value is
    /// taken at frozen load: the state relaxes along the viscous flow while the
    /// load clock waits. Zero gives the plain uniform grid.
    double pause_gap{0.0};
    /// Cap on paused steps, as a multiple of the number of clock steps.
    double max_pause_factor{50.0};
};

/// Implicit incremental minimization of the epsilon-viscous system
///   0 in dR(z') + eps V z' + DI(z) - l(t),  z(0) = z0
/// on a uniform grid of step tau (the last step is shortened to hit T).
/// With `options.pause_gap > 0` additional frozen-load steps are inserted
/// wherever the state is far from stable.
[[nodiscard]] ViscousTrajectory solve_viscous(const ProblemSpec& spec, const LoadPath& load, const Vec& z0,
                                              double epsilon, double tau, const ViscousOptions& options = {});

struct AutonomousOptions
{
    double delta{0.0};
    double tau{1e-3};
    double stop_gap{1e-8};
    /// Non-positive: 1e3 times the characteristic time lambda_max(V)/alpha.
    double horizon_cap{0.0};
};

/// Explicit Euler for z' = G_delta(-DI(z) + l*), stopped once the stability
/// gap is at most `stop_gap` or the horizon cap is exceeded (then `converged`
/// is false; the trajectory is still returned).
[[nodiscard]] ViscousTrajectory solve_autonomous(const ProblemSpec& spec, const Vec& ell_star, const Vec& z0,
                                                 const AutonomousOptions& options = {});

/// Per-node energy-dissipation balance residual of a viscous trajectory.
[[nodiscard]] std::vector<double> edb_residual(const ProblemSpec& spec, const ViscousTrajectory& traj,
                                               const LoadPath& load);
/// Same for an autonomous trajectory at its frozen load.
[[nodiscard]] std::vector<double> edb_residual(const ProblemSpec& spec, const ViscousTrajectory& traj);

[[nodiscard]] double max_abs(const std::vector<double>& values);

struct NuDeltaBound
{
    double nu0{0.0};
    double bound{0.0};
};

/// Initial regularized speed nu_delta(0) and its bound dist_V(-DI(z0) + l*, dR(0)).
/// Throws InvariantViolation if nu0 exceeds the bound by more than 1e-9.
[[nodiscard]] NuDeltaBound nu_delta_initial(const ProblemSpec& spec, double delta, const Vec& ell_star,
                                            const Vec& z0);

/// Heuristic radius of the A-ball visited by a run with these data.
[[nodiscard]] double working_radius(const ProblemSpec& spec, const LoadPath& load, const Vec& z0);

}  // namespace ratebv
