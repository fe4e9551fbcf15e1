#pragma once

#include "ratebv/control.hpp"
#include "ratebv/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ratebv
{

using json = nlohmann::ordered_json;

/// Schema violation in a configuration; `path()` names the offending field,
/// e.g. "model.kappa[0]".
class ConfigError : public Error
{
public:
    ConfigError(const std::string& path, const std::string& message)
        : Error(path.empty() ? message : path + ": " + message), path_(path)
    {
    }

    [[nodiscard]] const std::string& path() const { return path_; }

private:
    std::string path_;
};

/// A file could not be read or written.
class FileError : public Error
{
public:
    using Error::Error;
};

struct ModelConfig
{
    Mat A;
    Mat V;
    Vec kappa;
    /// "zero" or "double_well".
    std::string F{"zero"};
    double beta{0.0};
    double q{0.0};
};

struct LoadConfig
{
    std::vector<double> times;
    Mat values;
};

struct SolverConfig
{
    double epsilon{1e-3};
    double tau{1e-4};
    double delta{0.0};
    double stop_gap{1e-8};
    /// Non-positive: 1e3 lambda_max(V) / alpha.
    double horizon_cap{0.0};
    /// Frozen load of the autonomous system; defaults to l(0).
    std::optional<Vec> ell_star;
    double pause_gap{0.0};
    double inner_tolerance{1e-9};
    int max_inner_iterations{20000};
};

struct ReparamConfig
{
    std::vector<double> eps_list{1e-2, 1e-3, 1e-4};
    /// tau = tau_ratio * eps for every member.
    double tau_ratio{1e-2};
    std::size_t s_samples{2001};
    bool extend_constant{false};
};

struct CertifyConfig
{
    std::string profile{"standard"};
    /// Non-positive: derived from the finest epsilon.
    double gap_threshold{0.0};
    /// Trajectory file (CSV or JSON) to certify; empty extracts one first.
    std::string input;
};

struct TransientConfig
{
    /// Both empty: start from every jump component of an extraction.
    std::optional<Vec> z_a;
    std::optional<Vec> ell_star;
    double delta{0.0};
    double tau{1e-3};
    double stop_gap{1e-8};
    double horizon_cap{0.0};
    double nudge{1e-6};
};

struct ControlConfig
{
    /// Defaults to z0.
    std::optional<Vec> z_des;
    double alpha{1e-3};
    /// "nelder_mead" or "fd_gradient_descent".
    std::string method{"nelder_mead"};
    double initial_step{0.0};
    double h_fd{1e-4};
    double step{1.0};
    std::size_t budget{200};
    /// "surrogate" or "full".
    std::string fidelity{"surrogate"};
    double fidelity_epsilon{1e-2};
    double fidelity_tau{1e-3};
    bool certify_final{true};
};

struct OutputConfig
{
    std::string directory{"ratebv_out"};
    std::vector<std::string> formats{"csv", "json"};
};

/// Complete, validated run configuration with every default materialized.
struct RunConfig
{
    ModelConfig model;
    LoadConfig load;
    Vec z0;
    SolverConfig solver;
    ReparamConfig reparam;
    CertifyConfig certify;
    TransientConfig transient;
    ControlConfig control;
    OutputConfig output;

    [[nodiscard]] ProblemSpec spec() const;
    [[nodiscard]] LoadPath load_path() const;
    [[nodiscard]] ExtractOptions extract_options(int threads) const;
    [[nodiscard]] CertifyOptions certify_options() const;
    [[nodiscard]] OptimizeOptions optimize_options(std::uint64_t seed, int threads) const;
    [[nodiscard]] ControlObjective objective() const;
};

[[nodiscard]] RunConfig parse_config(const json& document);
/// Throws ConfigError on malformed JSON.
[[nodiscard]] RunConfig parse_config_text(const std::string& text);
/// Throws FileError if the file cannot be read.
[[nodiscard]] RunConfig parse_config_file(const std::filesystem::path& path);

/// Effective configuration; parse_config(to_json(c)) reproduces c.
[[nodiscard]] json to_json(const RunConfig& config);
/// FNV-1a hash (16 hex digits) of the compact effective configuration.
[[nodiscard]] std::string config_hash(const RunConfig& config);

[[nodiscard]] json to_json(const ProblemSpec& spec);
[[nodiscard]] json to_json(const LoadPath& load);
[[nodiscard]] LoadPath load_from_json(const json& document);
[[nodiscard]] json to_json(const ConvergenceReport& report);
[[nodiscard]] json to_json(const CertificateReport& report);
[[nodiscard]] json to_json(const ParamTrajectory& ptraj);
[[nodiscard]] json summary_json(const ViscousTrajectory& traj, const std::vector<double>& edb);
[[nodiscard]] json to_json(const ControlResult& result);

/// CSV with columns t, z_1..z_n, rate_1..rate_n, energy, diss_R, diss_visc.
/// Row k > 0 carries the rate and dissipation of the step ending at node k;
/// row 0 carries zeros.
[[nodiscard]] std::string viscous_csv(const ViscousTrajectory& traj, const std::string& hash);
/// CSV with columns s, t_hat, z_1..z_n, gap, lambda, in_G. Provenance and the
/// jump threshold travel in `#` comment lines ahead of the header.
[[nodiscard]] std::string param_csv(const ParamTrajectory& ptraj, const std::string& hash);

[[nodiscard]] ParamTrajectory param_from_json(const json& document);
[[nodiscard]] ParamTrajectory param_from_csv(const std::string& text);
/// Chooses the reader by extension (.json, otherwise CSV).
[[nodiscard]] ParamTrajectory read_param_trajectory(const std::filesystem::path& path);

[[nodiscard]] std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ratebv
