#include "ratebv/reparam.hpp"

#include "ratebv/errors.hpp"
#include "ratebv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ratebv
{

namespace
{

std::size_t segment_index(double position, double step, std::size_t last)
{
    if (!(position > 0.0))
    {
        return 0;
    }
    const auto k = static_cast<std::size_t>(position / step);
    return std::min(k, last - 1);
}

bool strictly_decreasing(const std::vector<double>& values)
{
    for (std::size_t i = 1; i < values.size(); ++i)
    {
        if (!(values[i] < values[i - 1]))
        {
            return false;
        }
    }
    return !values.empty();
}

}  // namespace

Vec ParamTrajectory::z_at(double s_value) const
{
    const double h = h_s();
    const double clamped = std::clamp(s_value, 0.0, S);
    const std::size_t j = segment_index(clamped, h, size() - 1);
    const double w = std::clamp(clamped / h - static_cast<double>(j), 0.0, 1.0);
    return (1.0 - w) * z_hat[j] + w * z_hat[j + 1];
}

double ParamTrajectory::t_at(double s_value) const
{
    const double h = h_s();
    const double clamped = std::clamp(s_value, 0.0, S);
    const std::size_t j = segment_index(clamped, h, size() - 1);
    const double w = std::clamp(clamped / h - static_cast<double>(j), 0.0, 1.0);
    return (1.0 - w) * t_hat[j] + w * t_hat[j + 1];
}

void ParamTrajectory::validate() const
{
    const std::size_t m = t_hat.size();
    if (m < 2 || z_hat.size() != m || gap.size() != m || lambda.size() != m || g_mask.size() != m)
    {
        throw ConsistencyError("ParamTrajectory: per-node arrays have inconsistent lengths");
    }
    if (!(S > 0.0) || !std::isfinite(S))
    {
        throw ConsistencyError("ParamTrajectory: S must be positive");
    }
    for (std::size_t j = 1; j < m; ++j)
    {
        if (t_hat[j] < t_hat[j - 1] - 1e-12)
        {
            throw ConsistencyError("ParamTrajectory: t_hat decreases at node " + std::to_string(j));
        }
        if (z_hat[j].size() != z_hat[0].size())
        {
            throw ConsistencyError("ParamTrajectory: state dimension changes along the trajectory");
        }
    }
}

std::vector<double> arclength(const ProblemSpec& spec, const ViscousTrajectory& traj, const LoadPath& load)
{
    traj.validate();
    if (traj.autonomous() || load.dimension() != spec.n() || traj.states.front().size() != spec.n() ||
        std::abs(traj.times.back() - load.T()) > 1e-9 * (1.0 + load.T()))
    {
        throw ConsistencyError("arclength: trajectory does not belong to this problem and load");
    }
    std::vector<double> s(traj.times.size(), 0.0);
    for (std::size_t k = 0; k < traj.steps(); ++k)
    {
        const double t_mid = 0.5 * (traj.times[k] + traj.times[k + 1]);
        const Vec z_mid = 0.5 * (traj.states[k] + traj.states[k + 1]);
        const Vec force = -grad_I(spec, z_mid) + load.value(t_mid);
        const double clock = traj.times[k + 1] - traj.times[k];
        s[k + 1] = s[k] + clock + traj.durations[k] * contact_potential(spec, traj.rates[k], force);
    }
    return s;
}

ParamTrajectory reparametrize(const ProblemSpec& spec, const ViscousTrajectory& traj, const LoadPath& load,
                              std::size_t s_samples)
{
    if (s_samples < 2)
    {
        throw ArgumentError("reparametrize: need at least two arc-length samples");
    }
    const std::vector<double> s = arclength(spec, traj, load);

    ParamTrajectory out;
    out.S = s.back();
    if (!(out.S > 0.0))
    {
        throw ConsistencyError("reparametrize: zero arc length");
    }
    out.t_hat.resize(s_samples);
    out.z_hat.resize(s_samples);
    out.gap.resize(s_samples);
    out.lambda.assign(s_samples, 0.0);
    out.g_mask.assign(s_samples, 0);
    out.provenance.push_back({traj.epsilon, traj.tau, out.S, traj.paused_steps()});

    const double h = out.S / static_cast<double>(s_samples - 1);
    std::size_t k = 0;
    for (std::size_t j = 0; j < s_samples; ++j)
    {
        if (j + 1 == s_samples)
        {
            out.t_hat[j] = traj.times.back();
            out.z_hat[j] = traj.states.back();
        }
        else
        {
            const double target = static_cast<double>(j) * h;
            while (k + 1 < traj.steps() && s[k + 1] <= target)
            {
                ++k;
            }
            const double length = s[k + 1] - s[k];
            const double w = length > 0.0 ? std::clamp((target - s[k]) / length, 0.0, 1.0) : 0.0;
            const double t0 = traj.times[k];
            const double t1 = traj.times[k + 1];
            // On paused steps t0 == t1, so t_hat is exactly constant there.
            out.t_hat[j] = t0 == t1 ? t0 : t0 + w * (t1 - t0);
            out.z_hat[j] = (1.0 - w) * traj.states[k] + w * traj.states[k + 1];
        }
        out.gap[j] = stability_gap(spec, load.value(out.t_hat[j]), out.z_hat[j]).gap;
    }
    return out;
}

double default_gap_threshold(const ProblemSpec& spec, double eps_min)
{
    return std::max(1e-4, 30.0 * eps_min) * spec.kappa_max();
}

double max_stable_tau(const ProblemSpec& spec, const LoadPath& load, const Vec& z0, double epsilon)
{
    const double lambda = convexity_defect(spec, working_radius(spec, load, z0));
    return lambda > 0.0 ? epsilon / (2.0 * lambda) : std::numeric_limits<double>::infinity();
}

Extraction extract_bv(const ProblemSpec& spec, const LoadPath& load, const Vec& z0, const ExtractOptions& options)
{
    const auto& eps = options.eps_list;
    if (eps.size() < 3)
    {
        throw ArgumentError("extract_bv: eps_list needs at least three entries");
    }
    for (std::size_t i = 0; i < eps.size(); ++i)
    {
        if (!(eps[i] > 0.0) || (i > 0 && !(eps[i] < eps[i - 1])))
        {
            throw ArgumentError("extract_bv: eps_list must be positive and strictly decreasing");
        }
    }
    if (options.s_samples < 2)
    {
        throw ArgumentError("extract_bv: need at least two arc-length samples");
    }

    const double eps_min = eps.back();
    const double threshold = default_gap_threshold(spec, eps_min);

    const double lambda = convexity_defect(spec, working_radius(spec, load, z0));
    std::vector<double> taus(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i)
    {
        taus[i] = options.tau_rule ? options.tau_rule(eps[i]) : eps[i] / 100.0;
        taus[i] = std::min(taus[i], load.T());
        if (!(taus[i] > 0.0))
        {
            throw ArgumentError("extract_bv: tau_rule returned a non-positive step");
        }
        if (lambda > 0.0 && taus[i] > eps[i] / (2.0 * lambda) * (1.0 + 1e-12))
        {
            std::ostringstream msg;
            msg << "extract_bv: tau = " << taus[i] << " exceeds eps/(2 lambda) = " << eps[i] / (2.0 * lambda)
                << " for eps = " << eps[i];
            throw ArgumentError(msg.str());
        }
    }

    std::vector<ParamTrajectory> members(eps.size());
    std::vector<std::vector<std::string>> member_warnings(eps.size());
    parallel_for(eps.size(), options.threads, [&](std::size_t i) {
        try
        {
            // Each member pauses at half of its own jump threshold, so sliding at
            // speed O(1) never triggers a pause.
            ViscousOptions viscous = options.viscous;
            viscous.pause_gap =
                options.pause_gap < 0.0 ? 0.5 * default_gap_threshold(spec, eps[i]) : options.pause_gap;
            const ViscousTrajectory traj = solve_viscous(spec, load, z0, eps[i], taus[i], viscous);
            members[i] = reparametrize(spec, traj, load, options.s_samples);
            member_warnings[i] = traj.warnings;
        }
        catch (const NumericalError& e)
        {
            throw SweepFailure(eps[i], e.what(), e.residual());
        }
        catch (const Error& e)
        {
            throw SweepFailure(eps[i], e.what(), std::numeric_limits<double>::quiet_NaN());
        }
    });

    ConvergenceReport report;
    report.eps = eps;
    report.tau = taus;
    report.pause_gap = options.pause_gap < 0.0 ? 0.5 * threshold : options.pause_gap;
    report.convention = options.extend_constant ? "constant" : "affine";
    double s_max = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i)
    {
        report.S.push_back(members[i].S);
        s_max = std::max(s_max, members[i].S);
        for (const auto& w : member_warnings[i])
        {
            report.warnings.push_back("eps = " + std::to_string(eps[i]) + ": " + w);
        }
        const auto peak = std::max_element(members[i].gap.begin(), members[i].gap.end());
        report.jump_locations.push_back(
            *peak > default_gap_threshold(spec, eps[i]) ? members[i].s(static_cast<std::size_t>(peak - members[i].gap.begin())) : -1.0);
    }

    const std::size_t m = options.s_samples;
    const double h_common = s_max / static_cast<double>(m - 1);
    for (std::size_t i = 0; i + 1 < members.size(); ++i)
    {
        const ParamTrajectory& a = members[i];
        const ParamTrajectory& b = members[i + 1];
        double affine = 0.0;
        double constant = 0.0;
        for (std::size_t j = 0; j < m; ++j)
        {
            affine = std::max(affine, spec.norm_V(a.z_hat[j] - b.z_hat[j]));
            const double s_value = static_cast<double>(j) * h_common;
            constant = std::max(constant, spec.norm_V(a.z_at(s_value) - b.z_at(s_value)));
        }
        report.distances_affine.push_back(affine);
        report.distances_constant.push_back(constant);
        report.S_differences.push_back(std::abs(a.S - b.S));
    }
    report.decreasing_affine = strictly_decreasing(report.distances_affine);
    report.decreasing_constant = strictly_decreasing(report.distances_constant);
    report.cauchy = options.extend_constant ? report.decreasing_constant : report.decreasing_affine;
    if (!report.cauchy)
    {
        report.warnings.push_back("epsilon sweep is not Cauchy under the " + report.convention +
                                  " convention; the candidate is the finest member of a possibly non-convergent sequence");
    }

    std::vector<Provenance> provenance;
    for (const auto& member : members)
    {
        provenance.push_back(member.provenance.front());
    }
    Extraction out;
    out.candidate = std::move(members.back());
    out.candidate.provenance = std::move(provenance);
    out.report = std::move(report);
    return out;
}

}  // namespace ratebv
