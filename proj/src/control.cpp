#include "ratebv/control.hpp"

#include "ratebv/errors.hpp"
#include "ratebv/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace ratebv
{

Fidelity Fidelity::surrogate(double epsilon, double tau)
{
    Fidelity f;
    f.kind = Kind::surrogate;
    f.epsilon = epsilon;
    f.tau = tau;
    return f;
}

Fidelity Fidelity::full(ExtractOptions extraction)
{
    Fidelity f;
    f.kind = Kind::full;
    f.extraction = std::move(extraction);
    return f;
}

Evaluation reduced_objective(const ProblemSpec& spec, const Vec& z0, const LoadPath& load,
                             const ControlObjective& objective, const Fidelity& fidelity)
{
    objective.validate(spec.n());
    Evaluation out;
    try
    {
        if (fidelity.kind == Fidelity::Kind::surrogate)
        {
            const ViscousTrajectory traj = solve_viscous(spec, load, z0, fidelity.epsilon,
                                                         std::min(fidelity.tau, load.T()));
            out.state = reparametrize(spec, traj, load, fidelity.s_samples);
        }
        else
        {
            Extraction ex = extract_bv(spec, load, z0, fidelity.extraction);
            out.state = std::move(ex.candidate);
            out.cauchy = ex.report.cauchy;
        }
    }
    catch (const Error& e)
    {
        throw EvaluationError(std::string("reduced_objective: state solve failed: ") + e.what(), load);
    }
    out.j = spec.norm_V(out.state.z_hat.back() - objective.z_des);
    out.h1 = h1_norm(spec, load);
    out.J = out.j + objective.alpha * out.h1;
    return out;
}

namespace
{

/// Runs batches of evaluations and keeps the incumbent, the history and the
/// coercivity witness.
class Search
{
public:
    Search(const ProblemSpec& spec, const Vec& z0, const ControlObjective& objective, const LoadPath& init_load,
           const OptimizeOptions& options, ControlResult& result)
        : spec_(spec),
          z0_(z0),
          objective_(objective),
          times_(init_load.node_times().begin(), init_load.node_times().end()),
          rows_(init_load.node_values().rows()),
          cols_(init_load.node_values().cols()),
          options_(options),
          result_(result)
    {
    }

    [[nodiscard]] std::size_t remaining() const { return options_.budget - result_.evaluations; }
    [[nodiscard]] bool exhausted() const { return result_.evaluations >= options_.budget; }

    [[nodiscard]] LoadPath to_load(const Vec& x) const
    {
        Mat values(rows_, cols_);
        for (Eigen::Index i = 0; i < rows_; ++i)
        {
            values.row(i) = x.segment(i * cols_, cols_).transpose();
        }
        return LoadPath(times_, values);
    }

    /// Evaluates up to remaining() points concurrently; the incumbent update
    /// runs afterwards in index order. Points beyond the budget get +inf.
    std::vector<double> evaluate(const std::vector<Vec>& xs)
    {
        const std::size_t count = std::min(xs.size(), remaining());
        std::vector<double> values(xs.size(), std::numeric_limits<double>::infinity());
        std::vector<Evaluation> evals(count);
        std::vector<char> ok(count, 0);
        std::vector<std::string> errors(count);
        parallel_for(count, options_.threads, [&](std::size_t i) {
            try
            {
                evals[i] = reduced_objective(spec_, z0_, to_load(xs[i]), objective_, options_.fidelity);
                ok[i] = std::isfinite(evals[i].J) ? 1 : 0;
            }
            catch (const EvaluationError& e)
            {
                errors[i] = e.what();
            }
        });
        for (std::size_t i = 0; i < count; ++i)
        {
            ++result_.evaluations;
            if (ok[i] == 0)
            {
                ++result_.failed_evaluations;
                if (result_.warnings.size() < 20)
                {
                    result_.warnings.push_back(errors[i].empty() ? "non-finite objective" : errors[i]);
                }
                continue;
            }
            values[i] = evals[i].J;
            check_witness(evals[i]);
            if (!has_incumbent_ || evals[i].J < result_.best_J)
            {
                has_incumbent_ = true;
                best_x_ = xs[i];
                result_.best_J = evals[i].J;
                result_.best_j = evals[i].j;
                result_.best_h1 = evals[i].h1;
                result_.state = std::move(evals[i].state);
            }
        }
        return values;
    }

    double evaluate(const Vec& x) { return evaluate(std::vector<Vec>{x}).front(); }

    void set_reference(double J_init) { result_.J_init = J_init; }

    void record(std::size_t iteration)
    {
        if (has_incumbent_)
        {
            result_.history.push_back({iteration, result_.evaluations, result_.best_J});
        }
    }

    [[nodiscard]] bool has_incumbent() const { return has_incumbent_; }
    [[nodiscard]] const Vec& best_x() const { return best_x_; }

private:
    void check_witness(const Evaluation& e)
    {
        if (!std::isfinite(result_.J_init) || e.J > result_.J_init)
        {
            return;
        }
        ++result_.witness_checks;
        // inf j = 0 for the distance objective.
        const double bound = result_.J_init / objective_.alpha;
        if (e.h1 > bound * (1.0 + 1e-12) + 1e-12)
        {
            std::ostringstream msg;
            msg << "coercivity witness violated: h1 = " << e.h1 << " > J_init/alpha = " << bound;
            throw InvariantViolation(msg.str());
        }
    }

    const ProblemSpec& spec_;
    const Vec& z0_;
    const ControlObjective& objective_;
    std::vector<double> times_;
    Eigen::Index rows_;
    Eigen::Index cols_;
    const OptimizeOptions& options_;
    ControlResult& result_;
    bool has_incumbent_{false};
    Vec best_x_;
};

void nelder_mead(Search& search, const Vec& x0, double f0, double initial_step, const OptimizeOptions& options)
{
    const auto d = x0.size();
    const auto& nm = options.nelder_mead;
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> scale(0.5, 1.5);
    std::bernoulli_distribution flip(0.5);

    std::vector<Vec> simplex{x0};
    std::vector<double> f{f0};
    auto build = [&](const Vec& base, double base_value, bool randomized) {
        simplex.assign(1, base);
        f.assign(1, base_value);
        std::vector<Vec> vertices;
        for (Eigen::Index i = 0; i < d; ++i)
        {
            Vec v = base;
            double step = initial_step;
            if (randomized)
            {
                step *= scale(rng) * (flip(rng) ? -1.0 : 1.0);
            }
            v(i) += step;
            vertices.push_back(v);
        }
        const std::vector<double> values = search.evaluate(vertices);
        simplex.insert(simplex.end(), vertices.begin(), vertices.end());
        f.insert(f.end(), values.begin(), values.end());
    };
    build(x0, f0, false);

    std::size_t iteration = 0;
    while (!search.exhausted())
    {
        ++iteration;
        std::vector<std::size_t> order(simplex.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        {
            std::vector<Vec> s;
            std::vector<double> v;
            for (std::size_t i : order)
            {
                s.push_back(simplex[i]);
                v.push_back(f[i]);
            }
            simplex = std::move(s);
            f = std::move(v);
        }
        search.record(iteration);

        double spread = 0.0;
        for (std::size_t i = 1; i < simplex.size(); ++i)
        {
            spread = std::max(spread, (simplex[i] - simplex[0]).lpNorm<Eigen::Infinity>());
        }
        const bool flat = std::isfinite(f.back()) && f.back() - f.front() <= nm.f_tolerance;
        if (flat || spread <= nm.x_tolerance)
        {
            if (d == 0 || search.remaining() < static_cast<std::size_t>(d) + 1)
            {
                break;
            }
            build(simplex[0], f[0], true);
            continue;
        }

        const std::size_t worst = simplex.size() - 1;
        Vec centroid = Vec::Zero(d);
        for (std::size_t i = 0; i < worst; ++i)
        {
            centroid += simplex[i];
        }
        centroid /= static_cast<double>(worst);

        const Vec xr = centroid + (centroid - simplex[worst]);
        const double fr = search.evaluate(xr);
        if (fr < f[0])
        {
            const Vec xe = centroid + 2.0 * (centroid - simplex[worst]);
            const double fe = search.evaluate(xe);
            if (fe < fr)
            {
                simplex[worst] = xe;
                f[worst] = fe;
            }
            else
            {
                simplex[worst] = xr;
                f[worst] = fr;
            }
            continue;
        }
        if (fr < f[worst - 1])
        {
            simplex[worst] = xr;
            f[worst] = fr;
            continue;
        }
        const bool outside = fr < f[worst];
        const Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (simplex[worst] - centroid));
        const double fc = search.evaluate(xc);
        if (fc < std::min(fr, f[worst]))
        {
            simplex[worst] = xc;
            f[worst] = fc;
            continue;
        }
        std::vector<Vec> shrunk;
        for (std::size_t i = 1; i < simplex.size(); ++i)
        {
            shrunk.push_back(simplex[0] + 0.5 * (simplex[i] - simplex[0]));
        }
        const std::vector<double> values = search.evaluate(shrunk);
        for (std::size_t i = 1; i < simplex.size(); ++i)
        {
            simplex[i] = shrunk[i - 1];
            f[i] = values[i - 1];
        }
    }
    search.record(iteration + 1);
}

void gradient_descent(Search& search, const Vec& x0, double f0, const OptimizeOptions& options)
{
    const auto& gd = options.gradient;
    const auto d = x0.size();
    Vec x = x0;
    double fx = f0;
    double step = gd.initial_step;
    std::size_t iteration = 0;
    while (!search.exhausted() && std::isfinite(fx))
    {
        ++iteration;
        std::vector<Vec> probes;
        for (Eigen::Index i = 0; i < d; ++i)
        {
            Vec plus = x;
            Vec minus = x;
            plus(i) += gd.h_fd;
            minus(i) -= gd.h_fd;
            probes.push_back(plus);
            probes.push_back(minus);
        }
        const std::vector<double> values = search.evaluate(probes);
        Vec grad(d);
        for (Eigen::Index i = 0; i < d; ++i)
        {
            grad(i) = (values[2 * i] - values[2 * i + 1]) / (2.0 * gd.h_fd);
        }
        if (!grad.allFinite() || grad.norm() == 0.0)
        {
            break;
        }
        bool moved = false;
        for (int bt = 0; bt < gd.max_backtracks && !search.exhausted(); ++bt)
        {
            const Vec trial = x - step * grad;
            const double ft = search.evaluate(trial);
            if (ft <= fx - 1e-4 * step * grad.squaredNorm())
            {
                x = trial;
                fx = ft;
                moved = true;
                step /= gd.shrink;
                break;
            }
            step *= gd.shrink;
        }
        search.record(iteration);
        if (!moved)
        {
            break;
        }
    }
    search.record(iteration + 1);
}

}  // namespace

ControlResult optimize(const ProblemSpec& spec, const Vec& z0, const ControlObjective& objective,
                       const LoadPath& init_load, const OptimizeOptions& options)
{
    objective.validate(spec.n());
    if (init_load.dimension() != spec.n() || z0.size() != spec.n())
    {
        throw ArgumentError("optimize: dimension mismatch between problem, load and initial state");
    }

    ControlResult result;
    result.best_load = init_load;
    result.J_init = std::numeric_limits<double>::infinity();
    Search search(spec, z0, objective, init_load, options, result);

    const Mat& v0 = init_load.node_values();
    Vec x0(v0.size());
    for (Eigen::Index i = 0; i < v0.rows(); ++i)
    {
        x0.segment(i * v0.cols(), v0.cols()) = v0.row(i).transpose();
    }

    if (options.budget > 0)
    {
        const double f0 = search.evaluate(x0);
        search.set_reference(f0);
        search.record(0);
        if (f0 > 0.0 && !search.exhausted())
        {
            if (options.method == OptimizeOptions::Method::nelder_mead)
            {
                const double step = options.nelder_mead.initial_step > 0.0 ? options.nelder_mead.initial_step
                                                                            : 2.0 * spec.kappa_max();
                nelder_mead(search, x0, f0, step, options);
            }
            else
            {
                gradient_descent(search, x0, f0, options);
            }
        }
    }
    if (!search.has_incumbent())
    {
        throw NumericalError("optimize: no successful evaluation", std::numeric_limits<double>::quiet_NaN());
    }

    result.best_load = search.to_load(search.best_x());
    result.final_J = result.best_J;
    result.final_j = result.best_j;
    if (options.method == OptimizeOptions::Method::fd_gradient_descent)
    {
        result.warnings.push_back("finite-difference gradients are unreliable near jump-onset loads");
    }

    if (options.certify_final)
    {
        try
        {
            Evaluation full = reduced_objective(spec, z0, result.best_load, objective,
                                                Fidelity::full(options.final_extraction));
            result.certificate = certify(spec, result.best_load, z0, full.state, options.certify);
            annotate(full.state, result.certificate);
            result.state = std::move(full.state);
            result.final_J = full.J;
            result.final_j = full.j;
            result.certified = result.certificate.passed;
            if (!full.cauchy)
            {
                result.warnings.push_back("final sweep is not Cauchy; another limit may give a different objective");
            }
        }
        catch (const Error& e)
        {
            result.warnings.push_back(std::string("final extraction failed: ") + e.what());
            result.certificate.passed = false;
            result.certificate.failures.push_back(e.what());
        }
    }
    return result;
}

}  // namespace ratebv
