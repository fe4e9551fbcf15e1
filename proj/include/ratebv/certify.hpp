#pragma once

#include "ratebv/reparam.hpp"

#include <span>
#include <string>
#include <vector>

namespace ratebv
{

/// Tolerances of a certificate. The three headline defects come from the
/// named profile; the last two are shared by both profiles.
struct ToleranceProfile
{
    std::string name{"standard"};
    double normalization{2e-2};
    double complementarity{1e-3};
    double edb{5e-2};
    /// Multiplier inclusion residual on the jump set.
    double inclusion{1e-2};
    /// Variation of t_hat allowed on the closure of a jump component.
    double plateau{1e-10};

    static ToleranceProfile strict();
    static ToleranceProfile standard();
    /// "strict" or "standard"; anything else throws ArgumentError.
    static ToleranceProfile named(const std::string& name);
};

/// Maximal run of jump-set nodes [first, last].
struct GComponent
{
    std::size_t first{0};
    std::size_t last{0};
    double s_start{0.0};
    double s_end{0.0};
    /// max t_hat - min t_hat over the run.
    double t_variation{0.0};
    bool t_constant{false};
    bool lambda_positive{false};
    double inclusion_residual{0.0};
    /// Sum of h_s / lambda over the run. Diagnostic only: it should blow up
    /// as the grid resolves the component ends.
    double inverse_lambda_sum{0.0};
};

struct GDetection
{
    std::vector<char> mask;
    std::vector<GComponent> components;
};

/// Jump set {gap > threshold}; runs of a single node are dropped.
[[nodiscard]] GDetection detect_G(const ParamTrajectory& ptraj, double gap_threshold);

/// Discrete derivatives of a parametrized trajectory: central differences at
/// interior nodes, one-sided at the ends.
struct Derivatives
{
    std::vector<double> t_prime;
    std::vector<Vec> z_prime;
};
[[nodiscard]] Derivatives differentiate(const ParamTrajectory& ptraj);

struct LambdaRecovery
{
    std::vector<double> lambda;
    /// Largest residual of 0 in dR(z') + lambda V z' + DE over interior jump nodes.
    double inclusion_residual{0.0};
    /// Jump nodes where ||z'||_V < 1e-12 (lambda set to 0).
    std::vector<std::size_t> degenerate_nodes;
};

/// lambda = gap / ||z'||_V on the jump set (the mask of `ptraj`), 0 elsewhere.
[[nodiscard]] LambdaRecovery lambda_recover(const ProblemSpec& spec, const LoadPath& load,
                                            const ParamTrajectory& ptraj);

struct AprioriAudit
{
    double energy_initial{0.0};
    /// int |l'|_{A^-1} dt and max |l|_{A^-1}.
    double load_l1{0.0};
    double load_sup{0.0};
    double z_sup{0.0};
    double z_bound{0.0};
    bool z_ok{false};
    double S{0.0};
    double S_bound{0.0};
    bool S_ok{false};
    /// |S - T - sum R(dz) - sum_G |dz|_V gap|.
    double S_identity_defect{0.0};
    bool S_identity_ok{false};
};

struct CertifyOptions
{
    ToleranceProfile tolerances{};
    /// Non-positive: default_gap_threshold at the finest epsilon of the
    /// provenance, or 1e-4 max kappa without provenance.
    double gap_threshold{0.0};
};

struct CertificateReport
{
    ToleranceProfile tolerances;
    double gap_threshold{0.0};

    double normalization_defect{0.0};
    double complementarity_defect{0.0};
    double edb_defect{0.0};

    bool endpoint_time{false};
    bool endpoint_state{false};

    std::vector<GComponent> g_components;
    double inclusion_residual{0.0};

    double force_sup{0.0};
    /// Bound on the driving force off the jump set: radius of dR(0) plus the threshold.
    double force_bound{0.0};
    bool force_ok{false};

    AprioriAudit apriori;
    double chain_rule_defect{0.0};

    std::vector<char> g_mask;
    std::vector<double> lambda;

    std::vector<std::string> failures;
    std::vector<std::string> notes;
    bool passed{false};
};

/// Checks complementarity, normalization, the energy-dissipation balance, the
/// jump structure and the a priori bounds of a parametrized trajectory.
[[nodiscard]] CertificateReport certify(const ProblemSpec& spec, const LoadPath& load, const Vec& z0,
                                        const ParamTrajectory& ptraj, const CertifyOptions& options = {});

/// Copies the jump mask, multipliers and threshold of a report into the trajectory.
void annotate(ParamTrajectory& ptraj, const CertificateReport& report);

struct JumpTransient
{
    ViscousTrajectory orbit;
    Vec z_b;
    bool converged{false};
};

/// Autonomous viscous flow at the frozen load `ell_star` from `z_a`; the end
/// point of a jump.
[[nodiscard]] JumpTransient jump_transient(const ProblemSpec& spec, const Vec& ell_star, const Vec& z_a,
                                           const AutonomousOptions& options = {});

struct JumpCheck
{
    JumpTransient transient;
    Vec z_a;
    Vec z_end;
    double ell_time{0.0};
    /// ||z_b - z_hat(component end)||_V.
    double mismatch{0.0};
};

/// Runs jump_transient from the start of a jump component (nudged by `nudge`
/// towards the next node) at the plateau load and compares with the end.
[[nodiscard]] JumpCheck check_jump(const ProblemSpec& spec, const LoadPath& load, const ParamTrajectory& ptraj,
                                   const GComponent& component, const AutonomousOptions& options = {},
                                   double nudge = 1e-6);

/// |I(z_N) - I(z_0) - sum <DI(z_{k+1/2}), z_{k+1} - z_k>| along a path.
[[nodiscard]] double chain_rule_residual(const ProblemSpec& spec, std::span<const Vec> path);
[[nodiscard]] double chain_rule_residual(const ProblemSpec& spec, const ViscousTrajectory& traj);
/// Energy part plus the composed-load defect sum |l(t_{j+1}) - l(t_j) - l'(t_{j+1/2}) dt|_{V^-1}.
[[nodiscard]] double chain_rule_residual(const ProblemSpec& spec, const LoadPath& load,
                                         const ParamTrajectory& ptraj);

}  // namespace ratebv
