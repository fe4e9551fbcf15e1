#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ratebv
{

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Lower-order (possibly nonconvex) energy term F >= 0.
class Nonconvexity
{
public:
    enum class Kind
    {
        zero,
        double_well,
        custom
    };

    using ValueFn = std::function<double(const Vec&)>;
    using GradientFn = std::function<Vec(const Vec&)>;
    using HessianFn = std::function<Mat(const Vec&)>;

    Nonconvexity() = default;

    static Nonconvexity zero();
    /// F(z) = beta * sum_i (z_i^2 - 1)^2 / 4.
    static Nonconvexity double_well(double beta);
    /// User callbacks. The gradient is mandatory; the Hessian is only used to
    /// estimate the convexity defect and may be left empty.
    static Nonconvexity custom(ValueFn value, GradientFn gradient, HessianFn hessian = {});

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double beta() const { return beta_; }

    [[nodiscard]] double value(const Vec& z) const;
    [[nodiscard]] Vec gradient(const Vec& z) const;
    [[nodiscard]] bool has_hessian() const { return kind_ != Kind::custom || static_cast<bool>(hessian_); }
    [[nodiscard]] Mat hessian(const Vec& z) const;

private:
    Kind kind_{Kind::zero};
    double beta_{0.0};
    ValueFn value_;
    GradientFn gradient_;
    HessianFn hessian_;
};

/// The rate-independent system: quadratic energy 1/2 <Az,z> + F(z), viscosity
/// metric V and weighted l1 dissipation R(v) = sum_i kappa_i |v_i| on R^n.
///
/// Construction validates symmetry and definiteness and caches the
/// factorizations every primitive needs, so a spec is immutable and can be
/// shared freely across threads.
class ProblemSpec
{
public:
    ProblemSpec(Mat a, Mat v, Vec kappa, Nonconvexity f = Nonconvexity::zero(), double q = 0.0);

    [[nodiscard]] Eigen::Index n() const { return a_.rows(); }
    [[nodiscard]] const Mat& A() const { return a_; }
    [[nodiscard]] const Mat& V() const { return v_; }
    [[nodiscard]] const Mat& V_inverse() const { return v_inv_; }
    [[nodiscard]] const Vec& kappa() const { return kappa_; }
    [[nodiscard]] const Nonconvexity& F() const { return f_; }
    [[nodiscard]] double q() const { return q_; }

    /// Smallest eigenvalue of A (ellipticity constant alpha).
    [[nodiscard]] double alpha() const { return a_min_; }
    [[nodiscard]] double lambda_max_A() const { return a_max_; }
    /// Smallest eigenvalue of V (gamma).
    [[nodiscard]] double gamma() const { return v_min_; }
    [[nodiscard]] double lambda_max_V() const { return v_max_; }
    [[nodiscard]] double kappa_min() const { return kappa_.minCoeff(); }
    [[nodiscard]] double kappa_max() const { return kappa_.maxCoeff(); }

    [[nodiscard]] double norm_V(const Vec& v) const;
    [[nodiscard]] double norm_A(const Vec& v) const;
    /// ||xi||_{V^-1} = sqrt(<xi, V^-1 xi>).
    [[nodiscard]] double dual_norm_V(const Vec& xi) const;
    [[nodiscard]] double dual_norm_A(const Vec& xi) const;

    /// Largest V^-1 norm over the box dR(0); bounds every stable force.
    [[nodiscard]] double stable_set_radius() const;

private:
    Mat a_;
    Mat v_;
    Mat v_inv_;
    Mat a_inv_;
    Vec kappa_;
    Nonconvexity f_;
    double q_{0.0};
    double a_min_{0.0};
    double a_max_{0.0};
    double v_min_{0.0};
    double v_max_{0.0};
};

/// Piecewise-linear load l: [0,T] -> R^n through the given nodes.
class LoadPath
{
public:
    /// node_values has one row per node.
    LoadPath(std::vector<double> node_times, Mat node_values);

    static LoadPath constant(double horizon, const Vec& value);
    static LoadPath ramp(double horizon, const Vec& start, const Vec& end);

    [[nodiscard]] double T() const { return times_.back(); }
    [[nodiscard]] std::span<const double> node_times() const { return times_; }
    [[nodiscard]] const Mat& node_values() const { return values_; }
    [[nodiscard]] Eigen::Index dimension() const { return values_.cols(); }
    [[nodiscard]] std::size_t segments() const { return times_.size() - 1; }

    /// Linear interpolant; t is clamped to [0,T].
    [[nodiscard]] Vec value(double t) const;
    /// Slope of the segment containing t (right-continuous, last segment at T).
    [[nodiscard]] Vec derivative(double t) const;

private:
    [[nodiscard]] std::size_t segment_of(double t) const;

    std::vector<double> times_;
    Mat values_;
};

/// Terminal-state tracking objective j(z) = ||z - z_des||_V with Tikhonov weight alpha.
struct ControlObjective
{
    Vec z_des;
    double alpha{1e-3};

    void validate(Eigen::Index n) const;
};

struct GapResult
{
    double gap{0.0};
    Vec projection;
};

[[nodiscard]] double energy_I(const ProblemSpec& spec, const Vec& z);
[[nodiscard]] Vec grad_I(const ProblemSpec& spec, const Vec& z);
/// E(t,z) = I(z) - <l(t), z> for a given load value.
[[nodiscard]] double energy_E(const ProblemSpec& spec, const Vec& ell_value, const Vec& z);

/// dist_V(xi, dR(0)) and the minimizing sigma in the box.
[[nodiscard]] GapResult distance_to_stable_set(const ProblemSpec& spec, const Vec& xi);
/// Stability gap m(l,z) = dist_V(-DI(z) + l, dR(0)).
[[nodiscard]] GapResult stability_gap(const ProblemSpec& spec, const Vec& ell_value, const Vec& z);

[[nodiscard]] double R_value(const ProblemSpec& spec, const Vec& v);
/// Vanishing-viscosity contact potential p(v,xi) = R(v) + ||v||_V dist_V(xi, dR(0)).
[[nodiscard]] double contact_potential(const ProblemSpec& spec, const Vec& v, const Vec& xi);

/// Residual of the inclusion force in dR(w), componentwise:
/// |force_i| - kappa_i (positive part) where w_i = 0, |force_i - kappa_i sign(w_i)| otherwise.
[[nodiscard]] double subdifferential_residual(const Vec& kappa, const Vec& force, const Vec& w);

/// The single-valued resolvent (dR_delta)^{-1}: the unique minimizer of
/// R(w) + 1/2 <(V + delta A) w, w> - <xi, w>.
[[nodiscard]] Vec prox_G_delta(const ProblemSpec& spec, double delta, const Vec& xi);
/// Same minimization with an explicit SPD metric M in place of V + delta A.
[[nodiscard]] Vec prox_with_metric(const Mat& metric, const Vec& kappa, const Vec& xi);

/// Convex conjugate of R_delta(v) = R(v) + 1/2 <(V + delta A) v, v>.
[[nodiscard]] double conj_R_delta(const ProblemSpec& spec, double delta, const Vec& eta);
/// Conjugate of R + 1/2 <M v, v> for an explicit metric M: half the squared
/// M^-1 distance of eta to the box.
[[nodiscard]] double conj_with_metric(const Mat& metric, const Vec& kappa, const Vec& eta);

/// Discrete R-variation sum_k R(z_{k+1} - z_k).
[[nodiscard]] double variation(const ProblemSpec& spec, std::span<const Vec> path);

/// H^1(0,T; V*) norm of a piecewise-linear load, exact per segment.
[[nodiscard]] double h1_norm(const ProblemSpec& spec, const LoadPath& load);

/// Sampled convexity defect of I on the ball ||z||_A <= rho: the smallest
/// lambda >= 0 such that <DI(z1)-DI(z2), z1-z2> >= alpha/2 ||z1-z2||_A^2 - lambda ||z1-z2||_V^2
/// is implied by the sampled Hessians of F. Zero for F = 0.
[[nodiscard]] double convexity_defect(const ProblemSpec& spec, double rho, int samples = 2000,
                                      std::uint64_t seed = 7);

/// Empirical constant C in |D^2F(z)v|_{V*} <= C (1 + ||z||_A^q) |v|_A over samples in the ball.
[[nodiscard]] double hessian_growth_constant(const ProblemSpec& spec, double rho, int samples = 2000,
                                             std::uint64_t seed = 11);

}  // namespace ratebv
