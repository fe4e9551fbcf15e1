#pragma once

#include "ratebv/certify.hpp"
#include "ratebv/errors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ratebv
{

/// How the state of a candidate load is computed.
struct Fidelity
{
    enum class Kind
    {
        /// One viscous solve at (epsilon, tau), reparametrized.
        surrogate,
        /// A full epsilon sweep (extract_bv).
        full
    };

    Kind kind{Kind::surrogate};
    double epsilon{1e-2};
    double tau{1e-3};
    std::size_t s_samples{501};
    ExtractOptions extraction{};

    static Fidelity surrogate(double epsilon, double tau);
    static Fidelity full(ExtractOptions extraction);
};

struct Evaluation
{
    double J{0.0};
    double j{0.0};
    double h1{0.0};
    ParamTrajectory state;
    /// False when a full sweep did not pass the Cauchy test.
    bool cauchy{true};
};

/// The state solve behind an evaluation failed; carries the offending load.
class EvaluationError : public Error
{
public:
    EvaluationError(const std::string& what, LoadPath load) : Error(what), load_(std::move(load)) {}

    [[nodiscard]] const LoadPath& load() const { return load_; }

private:
    LoadPath load_;
};

/// J = ||z_hat(S) - z_des||_V + alpha ||l||_{H^1}.
[[nodiscard]] Evaluation reduced_objective(const ProblemSpec& spec, const Vec& z0, const LoadPath& load,
                                           const ControlObjective& objective, const Fidelity& fidelity = {});

struct NelderMeadOptions
{
    /// Edge length of the initial simplex. Non-positive selects 2 max kappa:
    /// loads below the dissipation threshold do not move a state at rest, so a
    /// smaller simplex around a resting load sees a flat objective.
    double initial_step{0.0};
    /// Converged once the spread of J over the simplex falls below this.
    double f_tolerance{1e-10};
    double x_tolerance{1e-8};
};

struct GradientDescentOptions
{
    /// Central-difference step.
    double h_fd{1e-4};
    double initial_step{1.0};
    double shrink{0.5};
    int max_backtracks{30};
};

struct OptimizeOptions
{
    enum class Method
    {
        nelder_mead,
        fd_gradient_descent
    };

    Method method{Method::nelder_mead};
    NelderMeadOptions nelder_mead{};
    GradientDescentOptions gradient{};
    /// Cap on reduced-objective evaluations during the search.
    std::size_t budget{200};
    Fidelity fidelity{};
    /// Re-solve the final incumbent with a full sweep and certify it.
    bool certify_final{true};
    ExtractOptions final_extraction{};
    CertifyOptions certify{};
    /// Seed of the random restarts of the simplex search.
    std::uint64_t seed{0};
    int threads{1};
};

struct HistoryEntry
{
    std::size_t iteration{0};
    std::size_t evaluations{0};
    double J{0.0};
};

struct ControlResult
{
    LoadPath best_load{LoadPath::constant(1.0, Vec::Zero(1))};
    /// Values at the search fidelity.
    double best_J{0.0};
    double best_j{0.0};
    double best_h1{0.0};
    double J_init{0.0};
    std::vector<HistoryEntry> history;
    /// Search-fidelity state, replaced by the full extraction when it succeeds.
    ParamTrajectory state;
    /// The full extraction ran and its certificate passed.
    bool certified{false};
    /// Objective of the full extraction (equal to best_* without certification).
    double final_J{0.0};
    double final_j{0.0};
    CertificateReport certificate;
    std::size_t evaluations{0};
    std::size_t failed_evaluations{0};
    /// Evaluations with J <= J_init, each checked against h1 <= J_init / alpha.
    std::size_t witness_checks{0};
    std::vector<std::string> warnings;
};

/// Minimizes the reduced objective over the node values of `init_load` (node
/// times fixed). Throws NumericalError when no evaluation succeeds, including
/// a zero budget.
[[nodiscard]] ControlResult optimize(const ProblemSpec& spec, const Vec& z0, const ControlObjective& objective,
                                     const LoadPath& init_load, const OptimizeOptions& options = {});

}  // namespace ratebv
