#pragma once

#include "ratebv/viscous.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ratebv
{

/// One viscous member that went into a parametrized trajectory.
struct Provenance
{
    double epsilon{0.0};
    double tau{0.0};
    double S{0.0};
    /// Frozen-load steps inserted by the solver (zero without pausing).
    std::size_t paused_steps{0};
};

/// A parametrized trajectory (S, t_hat, z_hat) sampled on the uniform grid
/// s_j = j S / (size() - 1).
///
/// `lambda` and `g_mask` are filled by the certification stage; until then
/// they are zero/false and `gap_threshold` is 0.
struct ParamTrajectory
{
    double S{0.0};
    std::vector<double> t_hat;
    std::vector<Vec> z_hat;
    std::vector<double> gap;
    std::vector<double> lambda;
    std::vector<char> g_mask;
    double gap_threshold{0.0};
    std::vector<Provenance> provenance;

    [[nodiscard]] std::size_t size() const { return t_hat.size(); }
    [[nodiscard]] double h_s() const { return S / static_cast<double>(size() - 1); }
    [[nodiscard]] double s(std::size_t j) const { return static_cast<double>(j) * h_s(); }
    [[nodiscard]] Eigen::Index dimension() const { return z_hat.empty() ? 0 : z_hat.front().size(); }

    /// Linear interpolation of z_hat at arc length s, clamped to [0,S].
    [[nodiscard]] Vec z_at(double s) const;
    [[nodiscard]] double t_at(double s) const;

    /// Throws ConsistencyError on size mismatches, S <= 0 or decreasing t_hat.
    void validate() const;
};

/// Contact-potential arc length at the nodes of a viscous trajectory:
///   s_{k+1} = s_k + dt_k + tau_k p(rate_k, -DE(t_{k+1/2}, z_{k+1/2})),
/// where dt_k is the load-clock increment (zero on paused steps) and tau_k the
/// step duration.
[[nodiscard]] std::vector<double> arclength(const ProblemSpec& spec, const ViscousTrajectory& traj,
                                            const LoadPath& load);

/// Inverts the arc length onto a uniform grid of `s_samples` nodes and fills
/// the stability gap at every node.
[[nodiscard]] ParamTrajectory reparametrize(const ProblemSpec& spec, const ViscousTrajectory& traj,
                                            const LoadPath& load, std::size_t s_samples);

/// Stability gap above which a node counts as part of the jump set when no
/// threshold is configured: max(1e-4, 30 eps_min) * max kappa.
[[nodiscard]] double default_gap_threshold(const ProblemSpec& spec, double eps_min);

struct ExtractOptions
{
    /// Strictly decreasing, at least three entries.
    std::vector<double> eps_list{1e-2, 1e-3, 1e-4};
    /// Step size for a given epsilon; empty means eps / 100.
    std::function<double(double)> tau_rule;
    std::size_t s_samples{2001};
    /// Compare members by constant extension to the longest S instead of affine rescaling.
    bool extend_constant{false};
    /// Stability gap at which the load clock pauses during a jump. Negative selects
    /// half of default_gap_threshold(eps) for each member; zero disables pausing.
    double pause_gap{-1.0};
    int threads{1};
    ViscousOptions viscous{};
};

/// Cauchy table of an epsilon sweep.
struct ConvergenceReport
{
    std::vector<double> eps;
    std::vector<double> tau;
    std::vector<double> S;
    /// sup_s ||z_i - z_{i+1}||_V after affine rescaling to a common grid.
    std::vector<double> distances_affine;
    /// Same after constant extension of every member to the longest S.
    std::vector<double> distances_constant;
    /// |S_i - S_{i+1}|.
    std::vector<double> S_differences;
    /// Arc length of the largest stability gap per member (-1 if the gap never
    /// exceeds default_gap_threshold at that member's epsilon).
    std::vector<double> jump_locations;
    bool decreasing_affine{false};
    bool decreasing_constant{false};
    /// "affine" or "constant": the convention selected for `cauchy`.
    std::string convention{"affine"};
    bool cauchy{false};
    /// Pause threshold of the finest member.
    double pause_gap{0.0};
    std::vector<std::string> warnings;
};

struct Extraction
{
    ParamTrajectory candidate;
    ConvergenceReport report;
};

/// Vanishing-viscosity sweep: one viscous solve and reparametrization per
/// epsilon (run concurrently), Cauchy table in epsilon order, finest member
/// returned as the candidate.
[[nodiscard]] Extraction extract_bv(const ProblemSpec& spec, const LoadPath& load, const Vec& z0,
                                    const ExtractOptions& options = {});

/// Largest step allowed for epsilon: eps / (2 lambda), infinite when the energy is convex.
[[nodiscard]] double max_stable_tau(const ProblemSpec& spec, const LoadPath& load, const Vec& z0, double epsilon);

}  // namespace ratebv
