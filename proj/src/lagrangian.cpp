#include "varbif/lagrangian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "varbif/errors.hpp"

namespace varbif {

namespace {

bool at_least(DerivativeOrder order, DerivativeOrder needed) {
    return static_cast<int>(order) >= static_cast<int>(needed);
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& p) {
    Eigen::VectorXd flat(p.size());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index mu = 0; mu < 2; ++mu) flat(2 * i + mu) = p(i, mu);
    }
    return flat;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& flat) {
    const Eigen::Index n = flat.size() / 2;
    Eigen::MatrixXd p(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index mu = 0; mu < 2; ++mu) p(i, mu) = flat(2 * i + mu);
    }
    return p;
}

double relative_gap(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

void require_components(int components, const char* who) {
    if (components < 1) throw std::invalid_argument(std::string(who) + ": components must be >= 1");
}

}  // namespace

PointDerivatives PointDerivatives::zero(int components) {
    PointDerivatives d;
    d.grad_u = Eigen::VectorXd::Zero(components);
    d.grad_p = Eigen::MatrixXd::Zero(components, 2);
    d.hess_uu = Eigen::MatrixXd::Zero(components, components);
    d.hess_up = Eigen::MatrixXd::Zero(components, 2 * components);
    d.hess_pp = Eigen::MatrixXd::Zero(2 * components, 2 * components);
    return d;
}

LagrangianModel::LagrangianModel(std::string name, int components, bool parity, LagrangianEvaluator evaluator)
    : name_(std::move(name)), components_(components), parity_(parity), evaluator_(std::move(evaluator)) {
    require_components(components_, "LagrangianModel");
    if (!evaluator_) throw std::invalid_argument("LagrangianModel: empty evaluator");
}

PointDerivatives LagrangianModel::evaluate(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p,
                                           DerivativeOrder order) const {
    PointDerivatives out = PointDerivatives::zero(components_);
    evaluator_(x, u, p, order, out);
    return out;
}

double LagrangianModel::eval(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p, DerivativeOrder::value).value;
}
Eigen::VectorXd LagrangianModel::grad_u(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p, DerivativeOrder::first).grad_u;
}
Eigen::MatrixXd LagrangianModel::grad_p(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p, DerivativeOrder::first).grad_p;
}
Eigen::MatrixXd LagrangianModel::hess_uu(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p).hess_uu;
}
Eigen::MatrixXd LagrangianModel::hess_up(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p).hess_up;
}
Eigen::MatrixXd LagrangianModel::hess_pp(const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p) const {
    return evaluate(x, u, p).hess_pp;
}

ConstraintModel::ConstraintModel(std::string name, int components, bool parity, ConstraintEvaluator evaluator)
    : name_(std::move(name)), components_(components), parity_(parity), evaluator_(std::move(evaluator)) {
    require_components(components_, "ConstraintModel");
    if (!evaluator_) throw std::invalid_argument("ConstraintModel: empty evaluator");
}

ConstraintDerivatives ConstraintModel::evaluate(const Point2& x, const Eigen::VectorXd& u,
                                                DerivativeOrder order) const {
    ConstraintDerivatives out;
    out.grad_u = Eigen::VectorXd::Zero(components_);
    out.hess_uu = Eigen::MatrixXd::Zero(components_, components_);
    evaluator_(x, u, order, out);
    return out;
}

LagrangianModel ConstraintModel::lift() const {
    auto self = *this;
    return LagrangianModel(name_, components_, parity_,
                           [self](const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd&,
                                  DerivativeOrder order, PointDerivatives& out) {
                               const auto k = self.evaluate(x, u, order);
                               out.value = k.value;
                               out.grad_u = k.grad_u;
                               out.hess_uu = k.hess_uu;
                           });
}

BackgroundField BackgroundField::zero() {
    BackgroundField f;
    f.value = [](const Point2&) { return 0.0; };
    f.gradient = [](const Point2&) { return Point2(0.0, 0.0); };
    f.is_zero = true;
    return f;
}

LagrangianModel make_dirichlet_energy(int components) {
    require_components(components, "make_dirichlet_energy");
    return LagrangianModel("dirichlet", components, true,
                           [](const Point2&, const Eigen::VectorXd&, const Eigen::MatrixXd& p, DerivativeOrder order,
                              PointDerivatives& out) {
                               out.value = 0.5 * p.squaredNorm();
                               if (at_least(order, DerivativeOrder::first)) out.grad_p = p;
                               if (at_least(order, DerivativeOrder::second)) out.hess_pp.setIdentity();
                           });
}

LagrangianModel make_mean_curvature(double mu, const BackgroundField& u0) {
    if (!u0.value || !u0.gradient) throw std::invalid_argument("make_mean_curvature: incomplete background field");
    const bool parity = (mu == 0.0) && u0.is_zero;
    auto gradient = u0.gradient;
    return LagrangianModel(
        "mean_curvature", 1, parity,
        [mu, gradient](const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p, DerivativeOrder order,
                       PointDerivatives& out) {
            const Eigen::Vector2d q = p.row(0).transpose() + gradient(x);
            const double w2 = 1.0 + q.squaredNorm();
            const double w = std::sqrt(w2);
            out.value = w - mu * u(0);
            if (at_least(order, DerivativeOrder::first)) {
                out.grad_u(0) = -mu;
                out.grad_p.row(0) = (q / w).transpose();
            }
            if (at_least(order, DerivativeOrder::second)) {
                out.hess_pp = (w2 * Eigen::Matrix2d::Identity() - q * q.transpose()) / (w2 * w);
            }
        });
}

LagrangianModel make_quasilinear(const QuasilinearCoefficients& coefficients) {
    const int n = coefficients.components;
    require_components(n, "make_quasilinear");
    if (!coefficients.tensor || !coefficients.potential) {
        throw std::invalid_argument("make_quasilinear: tensor and potential callbacks are required");
    }

    // Probe symmetry A^{ij}_{mu nu} = A^{ji}_{nu mu} on a fixed set of states.
    for (const auto& sample : random_samples(n, 8, 0x5eed)) {
        QuasilinearCoefficients::Tensor t;
        coefficients.tensor(sample.x, sample.u, DerivativeOrder::value, t);
        if (t.a.rows() != 2 * n || t.a.cols() != 2 * n) {
            throw ModelError("make_quasilinear: coefficient tensor must be 2N x 2N");
        }
        const double scale = std::max(1.0, t.a.cwiseAbs().maxCoeff());
        if ((t.a - t.a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ModelError("make_quasilinear: coefficient tensor is not symmetric (A^{ij}_{mu nu} != A^{ji}_{nu mu})");
        }
    }

    auto tensor = coefficients.tensor;
    auto potential = coefficients.potential;
    return LagrangianModel(
        coefficients.name, n, coefficients.parity,
        [n, tensor, potential](const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p,
                               DerivativeOrder order, PointDerivatives& out) {
            QuasilinearCoefficients::Tensor t;
            tensor(x, u, order, t);
            ConstraintDerivatives g;
            g.grad_u = Eigen::VectorXd::Zero(n);
            g.hess_uu = Eigen::MatrixXd::Zero(n, n);
            potential(x, u, order, g);

            const Eigen::VectorXd pf = flatten(p);
            const Eigen::VectorXd apf = t.a * pf;
            out.value = 0.5 * pf.dot(apf) - g.value;
            if (at_least(order, DerivativeOrder::first)) {
                out.grad_p = unflatten(apf);
                for (int k = 0; k < n; ++k) out.grad_u(k) = 0.5 * pf.dot(t.da[k] * pf) - g.grad_u(k);
            }
            if (at_least(order, DerivativeOrder::second)) {
                out.hess_pp = t.a;
                for (int k = 0; k < n; ++k) {
                    out.hess_up.row(k) = (t.da[k] * pf).transpose();
                    for (int l = 0; l < n; ++l) {
                        out.hess_uu(k, l) = 0.5 * pf.dot(t.d2a[k * n + l] * pf) - g.hess_uu(k, l);
                    }
                }
            }
        });
}

LagrangianModel make_quasilinear_demo(double a, double c, int components) {
    require_components(components, "make_quasilinear_demo");
    const int n = components;
    QuasilinearCoefficients q;
    q.components = n;
    q.parity = true;
    q.name = "quasilinear_demo";
    q.tensor = [a, n](const Point2&, const Eigen::VectorXd& u, DerivativeOrder order,
                      QuasilinearCoefficients::Tensor& out) {
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * n, 2 * n);
        out.a = (1.0 + a * u.squaredNorm()) * id;
        if (at_least(order, DerivativeOrder::first)) {
            out.da.resize(static_cast<std::size_t>(n));
            for (int k = 0; k < n; ++k) out.da[k] = 2.0 * a * u(k) * id;
        }
        if (at_least(order, DerivativeOrder::second)) {
            out.d2a.assign(static_cast<std::size_t>(n * n), Eigen::MatrixXd::Zero(2 * n, 2 * n));
            for (int k = 0; k < n; ++k) out.d2a[k * n + k] = 2.0 * a * id;
        }
    };
    q.potential = [c, n](const Point2&, const Eigen::VectorXd& u, DerivativeOrder order, ConstraintDerivatives& out) {
        out.value = 0.5 * c * u.squaredNorm();
        if (at_least(order, DerivativeOrder::first)) out.grad_u = c * u;
        if (at_least(order, DerivativeOrder::second)) out.hess_uu = c * Eigen::MatrixXd::Identity(n, n);
    };
    return make_quasilinear(q);
}

ConstraintModel make_constraint_half_usq(int components) {
    require_components(components, "make_constraint_half_usq");
    const int n = components;
    return ConstraintModel("half_usq", n, true,
                           [n](const Point2&, const Eigen::VectorXd& u, DerivativeOrder order,
                               ConstraintDerivatives& out) {
                               out.value = 0.5 * u.squaredNorm();
                               if (at_least(order, DerivativeOrder::first)) out.grad_u = u;
                               if (at_least(order, DerivativeOrder::second)) {
                                   out.hess_uu = Eigen::MatrixXd::Identity(n, n);
                               }
                           });
}

LagrangianModel scale_lagrangian(const LagrangianModel& model, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("scale_lagrangian: t must be positive");
    const auto inner = model.evaluator();
    const int n = model.components();
    return LagrangianModel(
        model.name(), n, model.parity(),
        [inner, t, n](const Point2& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& p, DerivativeOrder order,
                      PointDerivatives& out) {
            PointDerivatives base = PointDerivatives::zero(n);
            inner(t * x, u, p / t, order, base);
            const double t2 = t * t;
            out.value = t2 * base.value;
            if (at_least(order, DerivativeOrder::first)) {
                out.grad_u = t2 * base.grad_u;
                out.grad_p = t * base.grad_p;
            }
            if (at_least(order, DerivativeOrder::second)) {
                out.hess_uu = t2 * base.hess_uu;
                out.hess_up = t * base.hess_up;
                out.hess_pp = base.hess_pp;
            }
        });
}

ConstraintModel scale_constraint(const ConstraintModel& model, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("scale_constraint: t must be positive");
    auto self = model;
    return ConstraintModel(model.name(), model.components(), model.parity(),
                           [self, t](const Point2& x, const Eigen::VectorXd& u, DerivativeOrder order,
                                     ConstraintDerivatives& out) {
                               const auto base = self.evaluate(t * x, u, order);
                               const double t2 = t * t;
                               out.value = t2 * base.value;
                               out.grad_u = t2 * base.grad_u;
                               out.hess_uu = t2 * base.hess_uu;
                           });
}

LagrangianModel with_grad_p_fault(const LagrangianModel& model, double relative_error) {
    const auto inner = model.evaluator();
    return LagrangianModel(model.name(), model.components(), model.parity(),
                           [inner, relative_error](const Point2& x, const Eigen::VectorXd& u,
                                                   const Eigen::MatrixXd& p, DerivativeOrder order,
                                                   PointDerivatives& out) {
                               inner(x, u, p, order, out);
                               out.grad_p *= 1.0 + relative_error;
                           });
}

std::vector<SampleState> random_samples(int components, int count, std::uint64_t seed, double u_bound,
                                        double p_bound) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    std::vector<SampleState> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        SampleState state;
        state.x = Point2(unit(rng), unit(rng));
        state.u = Eigen::VectorXd(components);
        for (int i = 0; i < components; ++i) state.u(i) = u_bound * sym(rng);
        state.p = Eigen::MatrixXd(components, 2);
        for (int i = 0; i < components; ++i) {
            for (int mu = 0; mu < 2; ++mu) state.p(i, mu) = p_bound * sym(rng);
        }
        samples.push_back(std::move(state));
    }
    return samples;
}

EllipticityReport check_ellipticity(const LagrangianModel& model, const std::vector<SampleState>& samples,
                                    double c_floor) {
    if (samples.empty()) throw PreconditionError("check_ellipticity: empty sample list");
    EllipticityReport report;
    report.c_floor = c_floor;
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    report.trivial_state_constant = std::numeric_limits<double>::infinity();
    const int n = model.components();
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(n);
    const Eigen::MatrixXd p0 = Eigen::MatrixXd::Zero(n, 2);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& state = samples[s];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.hess_pp(state.x, state.u, state.p),
                                                           Eigen::EigenvaluesOnly);
        if (eig.eigenvalues()(0) < report.min_eigenvalue) {
            report.min_eigenvalue = eig.eigenvalues()(0);
            report.argmin_sample = static_cast<int>(s);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> trivial(model.hess_pp(state.x, u0, p0), Eigen::EigenvaluesOnly);
        report.trivial_state_constant = std::min(report.trivial_state_constant, trivial.eigenvalues()(0));
    }
    report.elliptic = report.min_eigenvalue >= c_floor;
    return report;
}

double verify_derivatives(const LagrangianModel& model, int n_samples, std::uint64_t seed) {
    constexpr double h = 1e-5;
    const int n = model.components();
    double worst = 0.0;
    for (const auto& s : random_samples(n, n_samples, seed)) {
        const auto exact = model.evaluate(s.x, s.u, s.p);

        Eigen::VectorXd fd_u(n);
        Eigen::MatrixXd fd_uu(n, n), fd_pu(n, 2 * n);
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd up = s.u, um = s.u;
            up(k) += h;
            um(k) -= h;
            const auto plus = model.evaluate(s.x, up, s.p, DerivativeOrder::first);
            const auto minus = model.evaluate(s.x, um, s.p, DerivativeOrder::first);
            fd_u(k) = (plus.value - minus.value) / (2 * h);
            fd_uu.col(k) = (plus.grad_u - minus.grad_u) / (2 * h);
            // d/du^k of grad_p gives hess_up(k, :) through the other ordering.
            fd_pu.row(k) = flatten((plus.grad_p - minus.grad_p) / (2 * h)).transpose();
        }
        Eigen::MatrixXd fd_p(n, 2), fd_pp(2 * n, 2 * n), fd_up(n, 2 * n);
        for (int j = 0; j < n; ++j) {
            for (int nu = 0; nu < 2; ++nu) {
                Eigen::MatrixXd pp = s.p, pm = s.p;
                pp(j, nu) += h;
                pm(j, nu) -= h;
                const auto plus = model.evaluate(s.x, s.u, pp, DerivativeOrder::first);
                const auto minus = model.evaluate(s.x, s.u, pm, DerivativeOrder::first);
                fd_p(j, nu) = (plus.value - minus.value) / (2 * h);
                fd_pp.col(2 * j + nu) = flatten((plus.grad_p - minus.grad_p) / (2 * h));
                fd_up.col(2 * j + nu) = (plus.grad_u - minus.grad_u) / (2 * h);
            }
        }
        worst = std::max({worst, relative_gap(exact.grad_u, fd_u), relative_gap(exact.grad_p, fd_p),
                          relative_gap(exact.hess_uu, fd_uu), relative_gap(exact.hess_pp, fd_pp),
                          relative_gap(exact.hess_up, fd_up), relative_gap(exact.hess_up, fd_pu)});
    }
    return worst;
}

double verify_derivatives(const ConstraintModel& model, int n_samples, std::uint64_t seed) {
    return verify_derivatives(model.lift(), n_samples, seed);
}

}  // namespace varbif
