#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varbif/mesh.hpp"

namespace varbif {

/// How many derivative slots an evaluation must fill.
enum class DerivativeOrder { value = 0, first = 1, second = 2 };

/// Pointwise value and derivatives of F(x, u, p) for u in R^N, p in R^{N x 2}.
///
/// Gradient components p^i_mu are flattened to index 2 i + mu, so
/// hess_pp(2i+mu, 2j+nu) = d^2F / dp^i_mu dp^j_nu and
/// hess_up(i, 2j+nu) = d^2F / du^i dp^j_nu.
struct PointDerivatives {
    double value = 0.0;
    Eigen::VectorXd grad_u;   // N
    Eigen::MatrixXd grad_p;   // N x 2
    Eigen::MatrixXd hess_uu;  // N x N
    Eigen::MatrixXd hess_up;  // N x 2N
    Eigen::MatrixXd hess_pp;  // 2N x 2N

    static PointDerivatives zero(int components);
};

/// Callback filling every slot up to the requested order. Slots are
/// pre-sized and zeroed by the caller.
using LagrangianEvaluator = std::function<void(const Point2& x, const Eigen::VectorXd& u,
                                               const Eigen::MatrixXd& p, DerivativeOrder order,
                                               PointDerivatives& out)>;

/// A second-order Lagrangian F(x, u, Du) with closed-form derivatives.
/// Immutable; evaluation is a pure function of its arguments.
class LagrangianModel {
public:
    LagrangianModel(std::string name, int components, bool parity, LagrangianEvaluator evaluator);

    PointDerivatives evaluate(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p,
                              DerivativeOrder order = DerivativeOrder::second) const;

    double eval(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;
    Eigen::VectorXd grad_u(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;
    Eigen::MatrixXd grad_p(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;
    Eigen::MatrixXd hess_uu(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;
    Eigen::MatrixXd hess_up(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;
    Eigen::MatrixXd hess_pp(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const;

    const std::string& name() const { return name_; }
    int components() const { return components_; }
    /// True when F(x, -u, -p) = F(x, u, p) identically.
    bool parity() const { return parity_; }
    const LagrangianEvaluator& evaluator() const { return evaluator_; }

private:
    std::string name_;
    int components_;
    bool parity_;
    LagrangianEvaluator evaluator_;
};

/// Pointwise value and derivatives of K(x, u).
struct ConstraintDerivatives {
    double value = 0.0;
    Eigen::VectorXd grad_u;
    Eigen::MatrixXd hess_uu;
};

using ConstraintEvaluator = std::function<void(const Point2& x, const Eigen::VectorXd& u,
                                               DerivativeOrder order, ConstraintDerivatives& out)>;

/// Zeroth-order integrand K(x, u) generating the right-hand side of
/// F'(u) = lambda K'(u).
class ConstraintModel {
public:
    ConstraintModel(std::string name, int components, bool parity, ConstraintEvaluator evaluator);

    ConstraintDerivatives evaluate(const Point2& x, const Eigen::VectorXd& u,
                                   DerivativeOrder order = DerivativeOrder::second) const;

    const std::string& name() const { return name_; }
    int components() const { return components_; }
    bool parity() const { return parity_; }

    /// The same integrand seen as a Lagrangian with no gradient dependence.
    LagrangianModel lift() const;

private:
    std::string name_;
    int components_;
    bool parity_;
    ConstraintEvaluator evaluator_;
};

/// Closed-form background state u0 with its gradient.
struct BackgroundField {
    std::function<double(const Point2&)> value;
    std::function<Point2(const Point2&)> gradient;

    static BackgroundField zero();
    bool is_zero = false;
};

/// F = 1/2 |p|^2.
LagrangianModel make_dirichlet_energy(int components);

/// F = sqrt(1 + |p + Du0(x)|^2) - mu u, scalar.
LagrangianModel make_mean_curvature(double mu, const BackgroundField& u0 = BackgroundField::zero());

/// Coefficients of F = 1/2 A(x,u)[p, p] - G(x,u).
///
/// `tensor` returns A as a 2N x 2N matrix indexed like hess_pp, together
/// with dA/du^k (N entries) and d^2A/du^k du^l (N*N entries, row-major)
/// when the requested order needs them. `potential` returns G, dG/du and
/// d^2G/du^2.
struct QuasilinearCoefficients {
    struct Tensor {
        Eigen::MatrixXd a;
        std::vector<Eigen::MatrixXd> da;
        std::vector<Eigen::MatrixXd> d2a;
    };
    using TensorFn = std::function<void(const Point2& x, const Eigen::VectorXd& u, DerivativeOrder order,
                                        Tensor& out)>;
    using PotentialFn = std::function<void(const Point2& x, const Eigen::VectorXd& u, DerivativeOrder order,
                                           ConstraintDerivatives& out)>;

    int components = 1;
    TensorFn tensor;
    PotentialFn potential;
    bool parity = false;
    std::string name = "quasilinear";
};

/// F = 1/2 sum A^{ij}_{mu nu}(x,u) p^i_mu p^j_nu - G(x,u). Throws ModelError
/// when A is not symmetric at the deterministic probe points.
LagrangianModel make_quasilinear(const QuasilinearCoefficients& coefficients);

/// A = (1 + a |u|^2) delta, G = c/2 |u|^2. With a = 0 this is the
/// linear operator -Laplace - c.
LagrangianModel make_quasilinear_demo(double a, double c, int components = 1);

/// K = 1/2 |u|^2.
ConstraintModel make_constraint_half_usq(int components);

/// The pulled-back integrand t^2 F(t x, u, p / t) for planar domains.
LagrangianModel scale_lagrangian(const LagrangianModel& model, double t);
ConstraintModel scale_constraint(const ConstraintModel& model, double t);

/// Multiplies grad_p by (1 + relative_error). Used to exercise the audits.
LagrangianModel with_grad_p_fault(const LagrangianModel& model, double relative_error);

struct SampleState {
    Point2 x;
    Eigen::VectorXd u;
    Eigen::MatrixXd p;
};

struct EllipticityReport {
    /// Minimum over samples of the smallest eigenvalue of hess_pp.
    double min_eigenvalue = 0.0;
    int argmin_sample = -1;
    double c_floor = 0.0;
    bool elliptic = false;
    /// Minimum over sample positions of the smallest eigenvalue of hess_pp at
    /// the trivial state (u, p) = (0, 0): the strong-ellipticity constant of
    /// the linearization there.
    double trivial_state_constant = 0.0;
};

EllipticityReport check_ellipticity(const LagrangianModel& model, const std::vector<SampleState>& samples,
                                    double c_floor);

/// Deterministic samples with x in [0,1]^2, |u_i| <= u_bound, |p_ij| <= p_bound.
std::vector<SampleState> random_samples(int components, int count, std::uint64_t seed,
                                        double u_bound = 2.0, double p_bound = 2.0);

/// Largest discrepancy between closed-form derivative slots and central
/// differences (step 1e-5) of the next-lower slot, relative to
/// max(1, |finite difference|).
double verify_derivatives(const LagrangianModel& model, int n_samples, std::uint64_t seed);
double verify_derivatives(const ConstraintModel& model, int n_samples, std::uint64_t seed);

}  // namespace varbif
