#include "ratebv/box_qp.hpp"

#include "ratebv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ratebv
{

namespace
{

Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const Eigen::VectorXd& kappa)
{
    return x.cwiseMax(-kappa).cwiseMin(kappa);
}

double quadratic(const Eigen::MatrixXd& h, const Eigen::VectorXd& x, const Eigen::VectorXd& xi)
{
    const Eigen::VectorXd d = x - xi;
    return 0.5 * d.dot(h * d);
}

}  // namespace

bool is_diagonal(const Eigen::MatrixXd& m)
{
    for (Eigen::Index j = 0; j < m.cols(); ++j)
    {
        for (Eigen::Index i = 0; i < m.rows(); ++i)
        {
            if (i != j && m(i, j) != 0.0)
            {
                return false;
            }
        }
    }
    return true;
}

BoxProjection project_onto_box(const Eigen::MatrixXd& metric,
                               const Eigen::VectorXd& xi,
                               const Eigen::VectorXd& kappa,
                               double rel_tol,
                               int max_iterations)
{
    const Eigen::Index n = xi.size();
    if (metric.rows() != n || metric.cols() != n || kappa.size() != n)
    {
        throw ArgumentError("project_onto_box: dimension mismatch");
    }

    BoxProjection out;
    if (is_diagonal(metric))
    {
        out.point = clamp_box(xi, kappa);
        const Eigen::VectorXd d = xi - out.point;
        out.distance = std::sqrt(std::max(0.0, d.dot(metric.diagonal().cwiseProduct(d))));
        return out;
    }

    const double tol = rel_tol * (1.0 + xi.lpNorm<Eigen::Infinity>());
    // Bound-tightness tolerance used to classify variables as active.
    const double edge = 1e-14 * (1.0 + kappa.maxCoeff());

    Eigen::VectorXd x = clamp_box(xi, kappa);
    std::vector<Eigen::Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(n));

    for (int it = 0; it < max_iterations; ++it)
    {
        const Eigen::VectorXd g = metric * (x - xi);
        const Eigen::VectorXd pg = x - clamp_box(x - g, kappa);
        const double pg_norm = pg.lpNorm<Eigen::Infinity>();
        if (pg_norm <= tol)
        {
            out.point = x;
            out.iterations = it;
            out.distance = std::sqrt(std::max(0.0, 2.0 * quadratic(metric, x, xi)));
            return out;
        }

        // Variables sitting on a bound whose gradient pushes outward stay fixed.
        free_idx.clear();
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const bool at_lower = x(i) <= -kappa(i) + edge && g(i) > 0.0;
            const bool at_upper = x(i) >= kappa(i) - edge && g(i) < 0.0;
            if (!at_lower && !at_upper)
            {
                free_idx.push_back(i);
            }
        }

        Eigen::VectorXd direction = Eigen::VectorXd::Zero(n);
        if (!free_idx.empty())
        {
            const auto m = static_cast<Eigen::Index>(free_idx.size());
            Eigen::MatrixXd h_ff(m, m);
            Eigen::VectorXd g_f(m);
            for (Eigen::Index a = 0; a < m; ++a)
            {
                g_f(a) = g(free_idx[a]);
                for (Eigen::Index b = 0; b < m; ++b)
                {
                    h_ff(a, b) = metric(free_idx[a], free_idx[b]);
                }
            }
            const Eigen::VectorXd d_f = h_ff.llt().solve(-g_f);
            for (Eigen::Index a = 0; a < m; ++a)
            {
                direction(free_idx[a]) = d_f(a);
            }
        }

        // Projection-arc backtracking; fall back to a projected gradient step.
        const double q0 = quadratic(metric, x, xi);
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls)
        {
            const Eigen::VectorXd trial = clamp_box(x + step * direction, kappa);
            if (quadratic(metric, trial, xi) < q0 - 1e-4 * g.dot(x - trial) || (trial - x).norm() == 0.0)
            {
                if ((trial - x).norm() > 0.0)
                {
                    x = trial;
                    accepted = true;
                }
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
        {
            const double lmax = metric.cwiseAbs().rowwise().sum().maxCoeff();
            x = clamp_box(x - g / lmax, kappa);
        }
    }

    const Eigen::VectorXd g = metric * (x - xi);
    throw NumericalError("box projection did not converge",
                         (x - clamp_box(x - g, kappa)).lpNorm<Eigen::Infinity>());
}

}  // namespace ratebv
