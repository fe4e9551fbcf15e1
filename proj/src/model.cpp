#include "ratebv/model.hpp"

#include "ratebv/box_qp.hpp"
#include "ratebv/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace ratebv
{

namespace
{

void require_finite(const Vec& z, const char* what)
{
    if (!z.allFinite())
    {
        throw DomainError(std::string(what) + ": non-finite input");
    }
}

void require_dimension(const Vec& z, Eigen::Index n, const char* what)
{
    if (z.size() != n)
    {
        throw ArgumentError(std::string(what) + ": expected dimension " + std::to_string(n) + ", got " +
                            std::to_string(z.size()));
    }
}

bool symmetric(const Mat& m)
{
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

Vec random_in_ball(const ProblemSpec& spec, double rho, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Vec dir(spec.n());
    for (Eigen::Index i = 0; i < dir.size(); ++i)
    {
        dir(i) = gauss(rng);
    }
    const double a_norm = spec.norm_A(dir);
    if (a_norm == 0.0)
    {
        return Vec::Zero(spec.n());
    }
    const double radius = rho * std::pow(uni(rng), 1.0 / static_cast<double>(spec.n()));
    return dir * (radius / a_norm);
}

}  // namespace

// ---------------------------------------------------------------------------
// Nonconvexity

Nonconvexity Nonconvexity::zero()
{
    return {};
}

Nonconvexity Nonconvexity::double_well(double beta)
{
    if (!(beta >= 0.0) || !std::isfinite(beta))
    {
        throw ArgumentError("double_well: beta must be a finite nonnegative number");
    }
    Nonconvexity f;
    f.kind_ = Kind::double_well;
    f.beta_ = beta;
    return f;
}

Nonconvexity Nonconvexity::custom(ValueFn value, GradientFn gradient, HessianFn hessian)
{
    if (!value || !gradient)
    {
        throw ArgumentError("custom nonconvexity requires value and gradient callbacks");
    }
    Nonconvexity f;
    f.kind_ = Kind::custom;
    f.value_ = std::move(value);
    f.gradient_ = std::move(gradient);
    f.hessian_ = std::move(hessian);
    return f;
}

double Nonconvexity::value(const Vec& z) const
{
    switch (kind_)
    {
    case Kind::zero:
        return 0.0;
    case Kind::double_well:
    {
        const Vec w = z.array().square() - 1.0;
        return 0.25 * beta_ * w.squaredNorm();
    }
    case Kind::custom:
    {
        const double f = value_(z);
        if (f < 0.0)
        {
            throw DomainError("custom nonconvexity returned a negative value");
        }
        return f;
    }
    }
    return 0.0;
}

Vec Nonconvexity::gradient(const Vec& z) const
{
    switch (kind_)
    {
    case Kind::zero:
        return Vec::Zero(z.size());
    case Kind::double_well:
        return beta_ * (z.array() * (z.array().square() - 1.0)).matrix();
    case Kind::custom:
        return gradient_(z);
    }
    return Vec::Zero(z.size());
}

Mat Nonconvexity::hessian(const Vec& z) const
{
    switch (kind_)
    {
    case Kind::zero:
        return Mat::Zero(z.size(), z.size());
    case Kind::double_well:
        return (beta_ * (3.0 * z.array().square() - 1.0)).matrix().asDiagonal();
    case Kind::custom:
        if (!hessian_)
        {
            throw ArgumentError("custom nonconvexity has no Hessian callback");
        }
        return hessian_(z);
    }
    return Mat::Zero(z.size(), z.size());
}

// ---------------------------------------------------------------------------
// ProblemSpec

ProblemSpec::ProblemSpec(Mat a, Mat v, Vec kappa, Nonconvexity f, double q)
    : a_(std::move(a)), v_(std::move(v)), kappa_(std::move(kappa)), f_(std::move(f)), q_(q)
{
    const Eigen::Index n = a_.rows();
    if (n <= 0 || a_.cols() != n || v_.rows() != n || v_.cols() != n || kappa_.size() != n)
    {
        throw ArgumentError("ProblemSpec: A, V and kappa must share the state dimension");
    }
    if (!a_.allFinite() || !v_.allFinite() || !kappa_.allFinite())
    {
        throw ArgumentError("ProblemSpec: non-finite operator entries");
    }
    if (!symmetric(a_))
    {
        throw ArgumentError("ProblemSpec: A is not symmetric");
    }
    if (!symmetric(v_))
    {
        throw ArgumentError("ProblemSpec: V is not symmetric");
    }
    if ((kappa_.array() <= 0.0).any())
    {
        throw ArgumentError("ProblemSpec: all kappa entries must be strictly positive");
    }
    if (!(q_ >= 0.0))
    {
        throw ArgumentError("ProblemSpec: growth exponent q must be nonnegative");
    }

    const Eigen::SelfAdjointEigenSolver<Mat> ea(a_, Eigen::EigenvaluesOnly);
    const Eigen::SelfAdjointEigenSolver<Mat> ev(v_, Eigen::EigenvaluesOnly);
    a_min_ = ea.eigenvalues().minCoeff();
    a_max_ = ea.eigenvalues().maxCoeff();
    v_min_ = ev.eigenvalues().minCoeff();
    v_max_ = ev.eigenvalues().maxCoeff();
    if (a_min_ <= 0.0)
    {
        throw ArgumentError("ProblemSpec: A is not positive definite");
    }
    if (v_min_ <= 0.0)
    {
        throw ArgumentError("ProblemSpec: V is not positive definite");
    }
    v_inv_ = v_.llt().solve(Mat::Identity(n, n));
    v_inv_ = 0.5 * (v_inv_ + v_inv_.transpose()).eval();
    a_inv_ = a_.llt().solve(Mat::Identity(n, n));
    a_inv_ = 0.5 * (a_inv_ + a_inv_.transpose()).eval();
}

double ProblemSpec::norm_V(const Vec& v) const
{
    return std::sqrt(std::max(0.0, v.dot(v_ * v)));
}

double ProblemSpec::norm_A(const Vec& v) const
{
    return std::sqrt(std::max(0.0, v.dot(a_ * v)));
}

double ProblemSpec::dual_norm_V(const Vec& xi) const
{
    return std::sqrt(std::max(0.0, xi.dot(v_inv_ * xi)));
}

double ProblemSpec::dual_norm_A(const Vec& xi) const
{
    return std::sqrt(std::max(0.0, xi.dot(a_inv_ * xi)));
}

double ProblemSpec::stable_set_radius() const
{
    // The maximum of a convex function over the box is attained at a vertex;
    // enumerate them for small n and fall back to the spectral bound otherwise.
    const Eigen::Index n = this->n();
    if (n <= 12)
    {
        double best = 0.0;
        const std::uint64_t vertices = std::uint64_t{1} << n;
        Vec sigma(n);
        for (std::uint64_t mask = 0; mask < vertices; ++mask)
        {
            for (Eigen::Index i = 0; i < n; ++i)
            {
                sigma(i) = ((mask >> i) & 1U) != 0U ? kappa_(i) : -kappa_(i);
            }
            best = std::max(best, dual_norm_V(sigma));
        }
        return best;
    }
    return kappa_.norm() / std::sqrt(v_min_);
}

// ---------------------------------------------------------------------------
// LoadPath

LoadPath::LoadPath(std::vector<double> node_times, Mat node_values)
    : times_(std::move(node_times)), values_(std::move(node_values))
{
    if (times_.size() < 2)
    {
        throw ArgumentError("LoadPath: at least two nodes are required");
    }
    if (static_cast<Eigen::Index>(times_.size()) != values_.rows() || values_.cols() < 1)
    {
        throw ArgumentError("LoadPath: one value row per node time is required");
    }
    if (times_.front() != 0.0)
    {
        throw ArgumentError("LoadPath: the first node time must be 0");
    }
    for (std::size_t i = 1; i < times_.size(); ++i)
    {
        if (!(times_[i] > times_[i - 1]) || !std::isfinite(times_[i]))
        {
            throw ArgumentError("LoadPath: node times must be finite and strictly increasing");
        }
    }
    if (!values_.allFinite())
    {
        throw ArgumentError("LoadPath: non-finite node values");
    }
}

LoadPath LoadPath::constant(double horizon, const Vec& value)
{
    Mat values(2, value.size());
    values.row(0) = value.transpose();
    values.row(1) = value.transpose();
    return {{0.0, horizon}, values};
}

LoadPath LoadPath::ramp(double horizon, const Vec& start, const Vec& end)
{
    Mat values(2, start.size());
    values.row(0) = start.transpose();
    values.row(1) = end.transpose();
    return {{0.0, horizon}, values};
}

std::size_t LoadPath::segment_of(double t) const
{
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin())
    {
        return 0;
    }
    const auto idx = static_cast<std::size_t>(std::distance(times_.begin(), it)) - 1;
    return std::min(idx, times_.size() - 2);
}

Vec LoadPath::value(double t) const
{
    t = std::clamp(t, 0.0, T());
    const std::size_t k = segment_of(t);
    const double t0 = times_[k];
    const double t1 = times_[k + 1];
    const double w = (t - t0) / (t1 - t0);
    return ((1.0 - w) * values_.row(static_cast<Eigen::Index>(k)) +
            w * values_.row(static_cast<Eigen::Index>(k + 1)))
        .transpose();
}

Vec LoadPath::derivative(double t) const
{
    const std::size_t k = segment_of(std::clamp(t, 0.0, T()));
    const double dt = times_[k + 1] - times_[k];
    return ((values_.row(static_cast<Eigen::Index>(k + 1)) - values_.row(static_cast<Eigen::Index>(k))) / dt)
        .transpose();
}

void ControlObjective::validate(Eigen::Index n) const
{
    if (z_des.size() != n)
    {
        throw ArgumentError("ControlObjective: z_des has the wrong dimension");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha))
    {
        throw ArgumentError("ControlObjective: alpha must be positive");
    }
}

// ---------------------------------------------------------------------------
// Pointwise primitives

double energy_I(const ProblemSpec& spec, const Vec& z)
{
    require_dimension(z, spec.n(), "energy_I");
    require_finite(z, "energy_I");
    return 0.5 * z.dot(spec.A() * z) + spec.F().value(z);
}

Vec grad_I(const ProblemSpec& spec, const Vec& z)
{
    require_dimension(z, spec.n(), "grad_I");
    require_finite(z, "grad_I");
    return spec.A() * z + spec.F().gradient(z);
}

double energy_E(const ProblemSpec& spec, const Vec& ell_value, const Vec& z)
{
    return energy_I(spec, z) - ell_value.dot(z);
}

GapResult distance_to_stable_set(const ProblemSpec& spec, const Vec& xi)
{
    require_dimension(xi, spec.n(), "distance_to_stable_set");
    BoxProjection p = project_onto_box(spec.V_inverse(), xi, spec.kappa());
    return {p.distance, std::move(p.point)};
}

GapResult stability_gap(const ProblemSpec& spec, const Vec& ell_value, const Vec& z)
{
    return distance_to_stable_set(spec, -grad_I(spec, z) + ell_value);
}

double R_value(const ProblemSpec& spec, const Vec& v)
{
    return spec.kappa().dot(v.cwiseAbs());
}

double contact_potential(const ProblemSpec& spec, const Vec& v, const Vec& xi)
{
    const double speed = spec.norm_V(v);
    if (speed == 0.0)
    {
        return 0.0;
    }
    return R_value(spec, v) + speed * distance_to_stable_set(spec, xi).gap;
}

double subdifferential_residual(const Vec& kappa, const Vec& force, const Vec& w)
{
    double res = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
    {
        if (w(i) == 0.0)
        {
            res = std::max(res, std::abs(force(i)) - kappa(i));
        }
        else
        {
            const double target = w(i) > 0.0 ? kappa(i) : -kappa(i);
            res = std::max(res, std::abs(force(i) - target));
        }
    }
    return res;
}

Vec prox_with_metric(const Mat& metric, const Vec& kappa, const Vec& xi)
{
    const Eigen::Index n = xi.size();
    if (metric.rows() != n || kappa.size() != n)
    {
        throw ArgumentError("prox: dimension mismatch");
    }
    auto soft = [&](const Vec& x, double step) {
        Vec out(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const double shrink = std::abs(x(i)) - step * kappa(i);
            out(i) = shrink > 0.0 ? std::copysign(shrink, x(i)) : 0.0;
        }
        return out;
    };

    if (is_diagonal(metric))
    {
        return soft(xi, 1.0).cwiseQuotient(metric.diagonal());
    }

    const double tol = 1e-10 * (1.0 + xi.norm());
    const Eigen::SelfAdjointEigenSolver<Mat> eig(metric, Eigen::EigenvaluesOnly);
    const double step = 1.0 / eig.eigenvalues().maxCoeff();

    Vec w = Vec::Zero(n);
    constexpr int kMaxIterations = 200000;
    double res = 0.0;
    for (int it = 0; it < kMaxIterations; ++it)
    {
        const Vec force = xi - metric * w;
        res = subdifferential_residual(kappa, force, w);
        if (res <= tol)
        {
            return w;
        }
        w = soft(w + step * force, step);

        // Once the sign pattern has settled the minimizer solves a linear system
        // on the support; try it and keep it if it certifies.
        if (it % 8 == 7)
        {
            std::vector<Eigen::Index> support;
            for (Eigen::Index i = 0; i < n; ++i)
            {
                if (w(i) != 0.0)
                {
                    support.push_back(i);
                }
            }
            if (!support.empty())
            {
                const auto m = static_cast<Eigen::Index>(support.size());
                Mat m_ss(m, m);
                Vec rhs(m);
                for (Eigen::Index a = 0; a < m; ++a)
                {
                    const Eigen::Index i = support[static_cast<std::size_t>(a)];
                    rhs(a) = xi(i) - std::copysign(kappa(i), w(i));
                    for (Eigen::Index b = 0; b < m; ++b)
                    {
                        m_ss(a, b) = metric(i, support[static_cast<std::size_t>(b)]);
                    }
                }
                const Vec w_s = m_ss.llt().solve(rhs);
                Vec candidate = Vec::Zero(n);
                bool signs_kept = true;
                for (Eigen::Index a = 0; a < m; ++a)
                {
                    const Eigen::Index i = support[static_cast<std::size_t>(a)];
                    candidate(i) = w_s(a);
                    signs_kept = signs_kept && (w_s(a) * w(i) > 0.0);
                }
                if (signs_kept && subdifferential_residual(kappa, xi - metric * candidate, candidate) <= tol)
                {
                    return candidate;
                }
            }
        }
    }
    throw NumericalError("prox_G_delta: proximal gradient hit the iteration cap", res);
}

Vec prox_G_delta(const ProblemSpec& spec, double delta, const Vec& xi)
{
    if (!(delta >= 0.0))
    {
        throw ArgumentError("prox_G_delta: delta must be nonnegative");
    }
    require_dimension(xi, spec.n(), "prox_G_delta");
    require_finite(xi, "prox_G_delta");
    const Mat metric = delta == 0.0 ? spec.V() : Mat(spec.V() + delta * spec.A());
    return prox_with_metric(metric, spec.kappa(), xi);
}

double conj_with_metric(const Mat& metric, const Vec& kappa, const Vec& eta)
{
    const Mat inverse = metric.llt().solve(Mat::Identity(metric.rows(), metric.cols()));
    const double d = project_onto_box(0.5 * (inverse + inverse.transpose()), eta, kappa).distance;
    return 0.5 * d * d;
}

double conj_R_delta(const ProblemSpec& spec, double delta, const Vec& eta)
{
    if (!(delta > 0.0))
    {
        throw ArgumentError("conj_R_delta: delta must be positive");
    }
    require_dimension(eta, spec.n(), "conj_R_delta");
    return conj_with_metric(spec.V() + delta * spec.A(), spec.kappa(), eta);
}

double variation(const ProblemSpec& spec, std::span<const Vec> path)
{
    if (path.empty())
    {
        throw ArgumentError("variation: empty path");
    }
    double total = 0.0;
    for (std::size_t k = 1; k < path.size(); ++k)
    {
        total += R_value(spec, path[k] - path[k - 1]);
    }
    return total;
}

double h1_norm(const ProblemSpec& spec, const LoadPath& load)
{
    if (load.dimension() != spec.n())
    {
        throw ArgumentError("h1_norm: load dimension does not match the problem");
    }
    const auto times = load.node_times();
    const Mat& values = load.node_values();
    const Mat& w = spec.V_inverse();
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
    {
        const double h = times[k + 1] - times[k];
        const Vec a = values.row(static_cast<Eigen::Index>(k)).transpose();
        const Vec b = values.row(static_cast<Eigen::Index>(k + 1)).transpose();
        // int_0^h |a + (b-a) s/h|^2 ds = h (|a|^2 + <a,b> + |b|^2) / 3 in the V^-1 inner product.
        const double aa = a.dot(w * a);
        const double ab = a.dot(w * b);
        const double bb = b.dot(w * b);
        const Vec slope = (b - a) / h;
        total += h * (aa + ab + bb) / 3.0 + h * slope.dot(w * slope);
    }
    return std::sqrt(std::max(0.0, total));
}

double convexity_defect(const ProblemSpec& spec, double rho, int samples, std::uint64_t seed)
{
    if (spec.F().kind() == Nonconvexity::Kind::zero)
    {
        return 0.0;
    }
    if (!spec.F().has_hessian())
    {
        throw ArgumentError("convexity_defect: nonconvexity has no Hessian");
    }
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    auto visit = [&](const Vec& z) {
        const Mat h = spec.F().hessian(z);
        const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (h + h.transpose()), Eigen::EigenvaluesOnly);
        worst = std::min(worst, eig.eigenvalues().minCoeff());
    };
    visit(Vec::Zero(spec.n()));
    for (int i = 0; i < samples; ++i)
    {
        visit(random_in_ball(spec, rho, rng));
    }
    // <DI(z1)-DI(z2), d> >= |d|_A^2 + worst |d|^2; the A-excess over alpha/2 |d|_A^2
    // only helps when alpha <= 2.
    const double excess = std::max(0.0, 0.5 * spec.alpha() - 1.0) * spec.lambda_max_A();
    return std::max(0.0, -worst + excess) / spec.gamma();
}

double hessian_growth_constant(const ProblemSpec& spec, double rho, int samples, std::uint64_t seed)
{
    if (spec.F().kind() == Nonconvexity::Kind::zero || !spec.F().has_hessian())
    {
        return 0.0;
    }
    std::mt19937_64 rng(seed);
    // |D^2F(z) v|_{V^-1} / |v|_A is the spectral norm of V^{-1/2} H A^{-1/2}.
    const Eigen::SelfAdjointEigenSolver<Mat> ev(spec.V());
    const Eigen::SelfAdjointEigenSolver<Mat> ea(spec.A());
    const Mat v_isqrt = ev.operatorInverseSqrt();
    const Mat a_isqrt = ea.operatorInverseSqrt();
    double best = 0.0;
    for (int i = 0; i <= samples; ++i)
    {
        const Vec z = i == 0 ? Vec::Zero(spec.n()) : random_in_ball(spec, rho, rng);
        const Mat scaled = v_isqrt * spec.F().hessian(z) * a_isqrt;
        const Eigen::JacobiSVD<Mat> svd(scaled);
        const double growth = 1.0 + std::pow(spec.norm_A(z), spec.q());
        best = std::max(best, svd.singularValues()(0) / growth);
    }
    return best;
}

}  // namespace ratebv
