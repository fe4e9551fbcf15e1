#include "ratebv/certify.hpp"

#include "ratebv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ratebv
{

namespace
{

std::string format_failure(const std::string& what, double value, double tolerance)
{
    std::ostringstream msg;
    msg << what << " = " << value << " exceeds " << tolerance;
    return msg.str();
}

/// Bounds of the a priori estimates in the A-norm: with
///   E(t,z) >= |z|_A^2 / 4 - |l|_{A^-1}^2  and  E(s) <= E0 + L1 sup |z|_A,
/// sup |z|_A solves Z^2/4 - L1 Z - (E0 + Linf^2) <= 0.
AprioriAudit apriori_bounds(const ProblemSpec& spec, const LoadPath& load, const Vec& z0)
{
    AprioriAudit audit;
    audit.energy_initial = energy_E(spec, load.value(0.0), z0);
    const auto times = load.node_times();
    const Mat& values = load.node_values();
    for (std::size_t i = 0; i + 1 < times.size(); ++i)
    {
        const Vec delta = (values.row(static_cast<Eigen::Index>(i) + 1) - values.row(static_cast<Eigen::Index>(i))).transpose();
        audit.load_l1 += spec.dual_norm_A(delta);
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i)
    {
        audit.load_sup = std::max(audit.load_sup, spec.dual_norm_A(values.row(i).transpose()));
    }
    const double l1 = audit.load_l1;
    const double c = std::max(0.0, audit.energy_initial + audit.load_sup * audit.load_sup);
    audit.z_bound = 2.0 * l1 + 2.0 * std::sqrt(l1 * l1 + c);
    // S = T + dissipation and dissipation <= E0 - E(S) + L1 Z.
    audit.S_bound = load.T() + c + l1 * audit.z_bound;
    return audit;
}

}  // namespace

ToleranceProfile ToleranceProfile::strict()
{
    ToleranceProfile p;
    p.name = "strict";
    p.normalization = 1e-3;
    p.complementarity = 1e-4;
    p.edb = 1e-2;
    return p;
}

ToleranceProfile ToleranceProfile::standard()
{
    return ToleranceProfile{};
}

ToleranceProfile ToleranceProfile::named(const std::string& name)
{
    if (name == "strict")
    {
        return strict();
    }
    if (name == "standard")
    {
        return standard();
    }
    throw ArgumentError("unknown tolerance profile '" + name + "' (expected strict or standard)");
}

GDetection detect_G(const ParamTrajectory& ptraj, double gap_threshold)
{
    const std::size_t m = ptraj.size();
    GDetection out;
    out.mask.assign(m, 0);
    for (std::size_t j = 0; j < m; ++j)
    {
        out.mask[j] = ptraj.gap[j] > gap_threshold ? 1 : 0;
    }
    std::size_t j = 0;
    while (j < m)
    {
        if (out.mask[j] == 0)
        {
            ++j;
            continue;
        }
        std::size_t last = j;
        while (last + 1 < m && out.mask[last + 1] != 0)
        {
            ++last;
        }
        if (last == j)
        {
            // A single node cannot witness an open set.
            out.mask[j] = 0;
        }
        else
        {
            GComponent c;
            c.first = j;
            c.last = last;
            c.s_start = ptraj.s(j);
            c.s_end = ptraj.s(last);
            const auto [lo, hi] = std::minmax_element(ptraj.t_hat.begin() + static_cast<std::ptrdiff_t>(j),
                                                      ptraj.t_hat.begin() + static_cast<std::ptrdiff_t>(last) + 1);
            c.t_variation = *hi - *lo;
            out.components.push_back(c);
        }
        j = last + 1;
    }
    return out;
}

Derivatives differentiate(const ParamTrajectory& ptraj)
{
    const std::size_t m = ptraj.size();
    const double h = ptraj.h_s();
    Derivatives d;
    d.t_prime.resize(m);
    d.z_prime.resize(m);
    for (std::size_t j = 0; j < m; ++j)
    {
        const std::size_t lo = j == 0 ? 0 : j - 1;
        const std::size_t hi = j + 1 == m ? j : j + 1;
        const double width = static_cast<double>(hi - lo) * h;
        d.t_prime[j] = (ptraj.t_hat[hi] - ptraj.t_hat[lo]) / width;
        d.z_prime[j] = (ptraj.z_hat[hi] - ptraj.z_hat[lo]) / width;
    }
    return d;
}

LambdaRecovery lambda_recover(const ProblemSpec& spec, const LoadPath& load, const ParamTrajectory& ptraj)
{
    const std::size_t m = ptraj.size();
    const Derivatives d = differentiate(ptraj);
    LambdaRecovery out;
    out.lambda.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j)
    {
        if (ptraj.g_mask[j] == 0)
        {
            continue;
        }
        const double speed = spec.norm_V(d.z_prime[j]);
        if (speed < 1e-12)
        {
            out.degenerate_nodes.push_back(j);
            continue;
        }
        out.lambda[j] = ptraj.gap[j] / speed;
        const bool interior = j > 0 && j + 1 < m && ptraj.g_mask[j - 1] != 0 && ptraj.g_mask[j + 1] != 0;
        if (interior)
        {
            const Vec force = grad_I(spec, ptraj.z_hat[j]) - load.value(ptraj.t_hat[j]);
            const Vec residual_force = -(out.lambda[j] * (spec.V() * d.z_prime[j]) + force);
            out.inclusion_residual =
                std::max(out.inclusion_residual, subdifferential_residual(spec.kappa(), residual_force, d.z_prime[j]));
        }
    }
    return out;
}

CertificateReport certify(const ProblemSpec& spec, const LoadPath& load, const Vec& z0,
                          const ParamTrajectory& input, const CertifyOptions& options)
{
    input.validate();
    if (input.dimension() != spec.n() || z0.size() != spec.n() || load.dimension() != spec.n())
    {
        throw ArgumentError("certify: dimension mismatch between problem, load, initial state and trajectory");
    }
    if (input.size() < 3)
    {
        throw ArgumentError("certify: need at least three arc-length nodes");
    }
    // The stored gaps are not trusted; they are recomputed from (t_hat, z_hat).
    ParamTrajectory ptraj = input;
    for (std::size_t j = 0; j < ptraj.size(); ++j)
    {
        ptraj.gap[j] = stability_gap(spec, load.value(ptraj.t_hat[j]), ptraj.z_hat[j]).gap;
    }

    CertificateReport report;
    report.tolerances = options.tolerances;
    const auto& tol = report.tolerances;
    if (options.gap_threshold > 0.0)
    {
        report.gap_threshold = options.gap_threshold;
    }
    else if (!ptraj.provenance.empty())
    {
        report.gap_threshold = default_gap_threshold(spec, ptraj.provenance.back().epsilon);
    }
    else
    {
        report.gap_threshold = 1e-4 * spec.kappa_max();
    }
    report.notes.push_back("jump set detected by thresholding the stability gap; the threshold is a heuristic");

    const double T = load.T();
    report.endpoint_time = std::abs(ptraj.t_hat.back() - T) <= 1e-9 * (1.0 + T) && ptraj.t_hat.front() == 0.0;
    report.endpoint_state = (ptraj.z_hat.front() - z0).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + z0.lpNorm<Eigen::Infinity>());

    // Jump set and multipliers.
    GDetection detection = detect_G(ptraj, report.gap_threshold);
    ptraj.g_mask = detection.mask;
    const LambdaRecovery recovery = lambda_recover(spec, load, ptraj);
    report.g_mask = detection.mask;
    report.lambda = recovery.lambda;
    report.inclusion_residual = recovery.inclusion_residual;
    const Derivatives d = differentiate(ptraj);
    const double h = ptraj.h_s();
    for (GComponent& c : detection.components)
    {
        c.t_constant = c.t_variation <= tol.plateau;
        c.lambda_positive = true;
        for (std::size_t j = c.first; j <= c.last; ++j)
        {
            const bool interior = j > c.first && j < c.last;
            if (interior && !(recovery.lambda[j] > 0.0))
            {
                c.lambda_positive = false;
            }
            if (recovery.lambda[j] > 0.0)
            {
                c.inverse_lambda_sum += h / recovery.lambda[j];
            }
            if (interior)
            {
                const Vec force = grad_I(spec, ptraj.z_hat[j]) - load.value(ptraj.t_hat[j]);
                const Vec residual_force = -(recovery.lambda[j] * (spec.V() * d.z_prime[j]) + force);
                c.inclusion_residual = std::max(c.inclusion_residual,
                                                subdifferential_residual(spec.kappa(), residual_force, d.z_prime[j]));
            }
        }
    }
    report.g_components = detection.components;
    const auto in_G = [&](std::size_t j) { return detection.mask[j] != 0; };

    // Normalization at interior nodes, complementarity everywhere.
    const std::size_t m = ptraj.size();
    for (std::size_t j = 0; j < m; ++j)
    {
        report.complementarity_defect = std::max(report.complementarity_defect, d.t_prime[j] * ptraj.gap[j]);
        if (j == 0 || j + 1 == m)
        {
            continue;
        }
        double density = d.t_prime[j] + R_value(spec, d.z_prime[j]);
        if (in_G(j))
        {
            density += spec.norm_V(d.z_prime[j]) * ptraj.gap[j];
        }
        report.normalization_defect = std::max(report.normalization_defect, std::abs(density - 1.0));
    }

    // Energy-dissipation balance, trapezoidal in s; the external work uses the
    // exact increment of l along each segment.
    const double e0 = energy_E(spec, load.value(0.0), z0);
    double dissipated = 0.0;
    double viscous = 0.0;
    double work = 0.0;
    report.edb_defect = std::abs(energy_E(spec, load.value(ptraj.t_hat[0]), ptraj.z_hat[0]) - e0);
    for (std::size_t j = 0; j + 1 < m; ++j)
    {
        const Vec dz = ptraj.z_hat[j + 1] - ptraj.z_hat[j];
        dissipated += R_value(spec, dz);
        const double g0 = in_G(j) ? ptraj.gap[j] : 0.0;
        const double g1 = in_G(j + 1) ? ptraj.gap[j + 1] : 0.0;
        viscous += spec.norm_V(dz) * 0.5 * (g0 + g1);
        const Vec dl = load.value(ptraj.t_hat[j + 1]) - load.value(ptraj.t_hat[j]);
        work += dl.dot(0.5 * (ptraj.z_hat[j] + ptraj.z_hat[j + 1]));
        const double energy = energy_E(spec, load.value(ptraj.t_hat[j + 1]), ptraj.z_hat[j + 1]);
        report.edb_defect = std::max(report.edb_defect, std::abs(energy + dissipated + viscous - e0 + work));
    }

    // Driving force: off the jump set it lies within the threshold of dR(0).
    const double radius = spec.stable_set_radius();
    report.force_bound = radius + report.gap_threshold;
    bool off_G_ok = true;
    for (std::size_t j = 0; j < m; ++j)
    {
        const double force = spec.dual_norm_V(grad_I(spec, ptraj.z_hat[j]) - load.value(ptraj.t_hat[j]));
        report.force_sup = std::max(report.force_sup, force);
        if (!in_G(j) && force > report.force_bound * (1.0 + 1e-9))
        {
            off_G_ok = false;
        }
    }
    report.force_ok = std::isfinite(report.force_sup) && off_G_ok;

    // A priori bounds and the integrated normalization.
    report.apriori = apriori_bounds(spec, load, z0);
    auto& audit = report.apriori;
    for (const Vec& z : ptraj.z_hat)
    {
        audit.z_sup = std::max(audit.z_sup, spec.norm_A(z));
    }
    audit.z_ok = audit.z_sup <= audit.z_bound;
    audit.S = ptraj.S;
    audit.S_ok = audit.S <= audit.S_bound;
    audit.S_identity_defect = std::abs(ptraj.S - (T + dissipated + viscous));
    audit.S_identity_ok = audit.S_identity_defect <= tol.normalization * ptraj.S;

    report.chain_rule_defect = chain_rule_residual(spec, load, ptraj);

    // Verdict.
    auto& f = report.failures;
    if (!report.endpoint_time)
    {
        f.push_back("t_hat(S) differs from T");
    }
    if (!report.endpoint_state)
    {
        f.push_back("z_hat(0) differs from z0");
    }
    if (report.normalization_defect > tol.normalization)
    {
        f.push_back(format_failure("normalization defect", report.normalization_defect, tol.normalization));
    }
    if (report.complementarity_defect > tol.complementarity)
    {
        f.push_back(format_failure("complementarity defect", report.complementarity_defect, tol.complementarity));
    }
    if (report.edb_defect > tol.edb)
    {
        f.push_back(format_failure("energy-dissipation defect", report.edb_defect, tol.edb));
    }
    if (report.chain_rule_defect > tol.edb)
    {
        f.push_back(format_failure("chain-rule defect", report.chain_rule_defect, tol.edb));
    }
    if (report.inclusion_residual > tol.inclusion)
    {
        f.push_back(format_failure("multiplier inclusion residual", report.inclusion_residual, tol.inclusion));
    }
    for (const GComponent& c : report.g_components)
    {
        if (!c.t_constant)
        {
            f.push_back(format_failure("t_hat variation on jump component starting at s = " + std::to_string(c.s_start),
                                       c.t_variation, tol.plateau));
        }
        if (!c.lambda_positive)
        {
            f.push_back("multiplier vanishes inside the jump component starting at s = " + std::to_string(c.s_start));
        }
    }
    if (!recovery.degenerate_nodes.empty())
    {
        f.push_back("state does not move at " + std::to_string(recovery.degenerate_nodes.size()) + " jump nodes");
    }
    if (!report.force_ok)
    {
        f.push_back("driving force exceeds the stable-set bound off the jump set");
    }
    if (!audit.z_ok)
    {
        f.push_back(format_failure("sup |z|_A", audit.z_sup, audit.z_bound));
    }
    if (!audit.S_ok)
    {
        f.push_back(format_failure("S", audit.S, audit.S_bound));
    }
    if (!audit.S_identity_ok)
    {
        f.push_back(format_failure("arc-length identity defect", audit.S_identity_defect, tol.normalization * ptraj.S));
    }
    report.passed = f.empty();
    return report;
}

void annotate(ParamTrajectory& ptraj, const CertificateReport& report)
{
    if (report.g_mask.size() != ptraj.size() || report.lambda.size() != ptraj.size())
    {
        throw ConsistencyError("annotate: report does not belong to this trajectory");
    }
    ptraj.g_mask = report.g_mask;
    ptraj.lambda = report.lambda;
    ptraj.gap_threshold = report.gap_threshold;
}

JumpTransient jump_transient(const ProblemSpec& spec, const Vec& ell_star, const Vec& z_a,
                             const AutonomousOptions& options)
{
    JumpTransient out;
    out.orbit = solve_autonomous(spec, ell_star, z_a, options);
    out.z_b = out.orbit.final_state();
    out.converged = out.orbit.converged;
    return out;
}

JumpCheck check_jump(const ProblemSpec& spec, const LoadPath& load, const ParamTrajectory& ptraj,
                     const GComponent& component, const AutonomousOptions& options, double nudge)
{
    if (component.last >= ptraj.size() || component.first > component.last)
    {
        throw ArgumentError("check_jump: component outside the trajectory");
    }
    JumpCheck out;
    const std::size_t a = component.first;
    const Vec& start = ptraj.z_hat[a];
    const Vec direction = ptraj.z_hat[std::min(a + 1, ptraj.size() - 1)] - start;
    const double length = direction.norm();
    out.z_a = length > 0.0 ? Vec(start + nudge * direction / length) : start;
    out.ell_time = ptraj.t_hat[a];
    out.z_end = ptraj.z_hat[component.last];
    out.transient = jump_transient(spec, load.value(out.ell_time), out.z_a, options);
    out.mismatch = spec.norm_V(out.transient.z_b - out.z_end);
    return out;
}

double chain_rule_residual(const ProblemSpec& spec, std::span<const Vec> path)
{
    if (path.empty())
    {
        return 0.0;
    }
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k)
    {
        sum += grad_I(spec, 0.5 * (path[k] + path[k + 1])).dot(path[k + 1] - path[k]);
    }
    return std::abs(energy_I(spec, path.back()) - energy_I(spec, path.front()) - sum);
}

double chain_rule_residual(const ProblemSpec& spec, const ViscousTrajectory& traj)
{
    return chain_rule_residual(spec, std::span<const Vec>(traj.states));
}

double chain_rule_residual(const ProblemSpec& spec, const LoadPath& load, const ParamTrajectory& ptraj)
{
    double out = chain_rule_residual(spec, std::span<const Vec>(ptraj.z_hat));
    for (std::size_t j = 0; j + 1 < ptraj.size(); ++j)
    {
        const double dt = ptraj.t_hat[j + 1] - ptraj.t_hat[j];
        if (dt == 0.0)
        {
            continue;
        }
        const Vec composed = load.value(ptraj.t_hat[j + 1]) - load.value(ptraj.t_hat[j]);
        const Vec slope = load.derivative(0.5 * (ptraj.t_hat[j] + ptraj.t_hat[j + 1]));
        out += spec.dual_norm_V(composed - slope * dt);
    }
    return out;
}

}  // namespace ratebv
