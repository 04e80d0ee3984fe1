#include "varbif/deform.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "varbif/errors.hpp"

namespace varbif {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

struct Pencil {
    const FemSpace& space;
    const LagrangianModel& model;
    const ScanOptions& options;
    SymmetricOperator gram;

    SymmetricOperator at(double t) const { return scaled_hessian_at_zero(space, model, t, options.assembly); }

    /// #{sigma < 0}.
    int negative_count(double t) const { return count_below(at(t), gram, 0.0); }
};

void require_trivial_at(const FemSpace& space, const LagrangianModel& model, double t, const ScanOptions& options) {
    const Field zero = Field::Zero(space.dof_count());
    const double r = assemble_residual(space, scale_lagrangian(model, t), zero, options.assembly).norm();
    if (r > options.trivial_tolerance) {
        std::ostringstream msg;
        msg << "scaled model '" << model.name() << "' has |F_t'(0)| = " << r << " at t = " << t
            << ", exceeding " << options.trivial_tolerance;
        throw TrivialBranchError(msg.str());
    }
}

/// Eigenvector of (h, g) nearest to zero by a few inverse iterations.
Eigen::VectorXd near_null_vector(const SymmetricOperator& h, const SymmetricOperator& g) {
    const int n = h.dimension();
    Ldlt ldlt(h.matrix);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    if (ldlt.info() != Eigen::Success) return v;
    for (int it = 0; it < 6; ++it) {
        Eigen::VectorXd w = ldlt.solve(g.matrix * v);
        if (!w.allFinite() || w.norm() == 0.0) break;
        v = w / std::sqrt(std::abs(w.dot(g.matrix * w)));
    }
    return v;
}

double inf_norm(const SparseMatrix& m) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) rows(it.row()) += std::abs(it.value());
    }
    return rows.size() ? rows.maxCoeff() : 0.0;
}

/// Lowest eigenpair of (h, g) by shifted inverse iteration from a warm start.
/// Returns nothing when the shift is not below the spectrum or the
/// iteration stalls; the caller then falls back to the general solver.
std::optional<double> lowest_by_inverse_iteration(const SymmetricOperator& h, const SymmetricOperator& g,
                                                  double shift, Eigen::VectorXd& x) {
    SparseMatrix m = h.matrix - shift * g.matrix;
    m.makeCompressed();
    Ldlt ldlt(m);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) return std::nullopt;
    const double scale = inf_norm(h.matrix) + std::abs(shift) * inf_norm(g.matrix);
    for (int it = 0; it < 300; ++it) {
        Eigen::VectorXd y = ldlt.solve(g.matrix * x);
        const double norm = std::sqrt(y.dot(g.matrix * y));
        if (!(norm > 0.0) || !y.allFinite()) return std::nullopt;
        x = y / norm;
        const Eigen::VectorXd hx = h.matrix * x;
        const Eigen::VectorXd gx = g.matrix * x;
        const double sigma = x.dot(hx);
        if ((hx - sigma * gx).norm() <= 1e-11 * (scale + std::abs(sigma) * inf_norm(g.matrix)) * x.norm()) {
            return sigma;
        }
    }
    return std::nullopt;
}

/// Bisection of [lo, hi] keeping `inside(lo)` true and `inside(hi)` false.
template <class Pred>
void bisect(double& lo, double& hi, double width, Pred inside) {
    while (hi - lo > width) {
        const double mid = 0.5 * (lo + hi);
        if (inside(mid)) lo = mid;
        else hi = mid;
    }
}

/// Locates the first crossing after `left` that takes the negative count past
/// `level`, moving toward `right`. `increasing` gives the direction of the count.
ConjugatePoint locate(const Pencil& pencil, double left, double right, int level, bool increasing, double tol_t) {
    auto inside = [&](double t) {
        const int n0 = pencil.negative_count(t);
        return increasing ? n0 <= level : n0 >= level;
    };
    double lo = left;
    double hi = right;
    bisect(lo, hi, std::min(tol_t, pencil.options.nullity_width), inside);

    ConjugatePoint cp;
    cp.t = 0.5 * (lo + hi);
    cp.bracket_low = lo;
    cp.bracket_high = hi;

    // Eigenvalue uncertainty induced by the bracket: drift of the near-null
    // Rayleigh quotient across [lo, hi].
    const SymmetricOperator h_mid = pencil.at(cp.t);
    const Eigen::VectorXd v = near_null_vector(h_mid, pencil.gram);
    const double vg = v.dot(pencil.gram.matrix * v);
    const SparseMatrix dh = pencil.at(hi).matrix - pencil.at(lo).matrix;
    const double drift = std::abs(v.dot(dh * v)) / vg;
    const double tau = std::max(1e3 * drift, 1e-14);
    cp.eigenvalue_tolerance = tau;
    cp.nullity = count_below(h_mid, pencil.gram, tau) - count_below(h_mid, pencil.gram, -tau);
    return cp;
}

}  // namespace

SymmetricOperator scaled_hessian_at_zero(const FemSpace& space, const LagrangianModel& model, double t,
                                         const AssemblyOptions& assembly) {
    const Field zero = Field::Zero(space.dof_count());
    auto h = assemble_hessian(space, scale_lagrangian(model, t), zero, assembly);
    h.label = "scaled_hessian";
    return h;
}

ConjugatePoint refine_conjugate_point(const FemSpace& space, const LagrangianModel& model, double t_a, double t_b,
                                      double tol_t, const ScanOptions& options) {
    if (!(t_a > 0.0) || !(t_a < t_b)) throw std::invalid_argument("refine_conjugate_point: need 0 < t_a < t_b");
    if (!(tol_t > 0.0)) throw std::invalid_argument("refine_conjugate_point: tol_t must be positive");
    Pencil pencil{space, model, options, assemble_h_gram(space, options.assembly)};
    const int na = pencil.negative_count(t_a);
    const int nb = pencil.negative_count(t_b);
    if (na == nb) {
        std::ostringstream msg;
        msg << "refine_conjugate_point: no eigenvalue crossing in [" << t_a << ", " << t_b << "]";
        throw std::invalid_argument(msg.str());
    }
    return locate(pencil, t_a, t_b, na, nb > na, tol_t);
}

DeformationScan scan(const FemSpace& space, const LagrangianModel& model, double t_min, int grid_size,
                     const ScanOptions& options) {
    if (!(t_min > 0.0) || !(t_min < 1.0)) throw std::invalid_argument("scan: t_min must lie in (0, 1)");
    if (grid_size < 2) throw std::invalid_argument("scan: grid_size must be at least 2");
    require_trivial_at(space, model, t_min, options);
    require_trivial_at(space, model, 1.0, options);

    Pencil pencil{space, model, options, assemble_h_gram(space, options.assembly)};
    DeformationScan out;
    out.model_name = model.name();
    out.dof_count = space.dof_count();
    out.zero_tolerance = options.zero_tolerance;
    out.tol_t = options.tol_t;

    std::vector<int> n0;
    std::optional<double> previous;
    Eigen::VectorXd warm;
    for (int i = 0; i < grid_size; ++i) {
        const double t = i + 1 == grid_size ? 1.0 : t_min + (1.0 - t_min) * i / (grid_size - 1);
        const SymmetricOperator h = pencil.at(t);
        out.t_grid.push_back(t);
        const int mu = count_below(h, pencil.gram, -options.zero_tolerance);
        out.mu.push_back(mu);
        out.nu.push_back(count_below(h, pencil.gram, options.zero_tolerance) - mu);
        n0.push_back(count_below(h, pencil.gram, 0.0));

        std::optional<double> sigma;
        if (previous) {
            const double shift = *previous - 0.1 * std::max(1.0, std::abs(*previous));
            sigma = lowest_by_inverse_iteration(h, pencil.gram, shift, warm);
        }
        if (!sigma) {
            const auto pairs = lowest_eigenpairs(h, pencil.gram, 1, options.pencil);
            sigma = pairs.values.front();
            warm = pairs.vectors.col(0);
        }
        out.sigma_min.push_back(*sigma);
        previous = sigma;
    }

    if (!options.refine) return out;
    for (int i = 0; i + 1 < grid_size; ++i) {
        const int start = n0[static_cast<std::size_t>(i)];
        const int target = n0[static_cast<std::size_t>(i + 1)];
        if (start == target) continue;
        const bool increasing = target > start;
        double left = out.t_grid[static_cast<std::size_t>(i)];
        const double right = out.t_grid[static_cast<std::size_t>(i + 1)];
        int level = start;
        while (increasing ? level < target : level > target) {
            ConjugatePoint cp = locate(pencil, left, right, level, increasing, options.tol_t);
            const int step = std::max(cp.nullity, 1);
            level += increasing ? step : -step;
            left = cp.bracket_low;
            out.conjugate_points.push_back(cp);
        }
    }
    out.refined = true;
    return out;
}

int verify_smale(DeformationScan& scan) {
    if (!scan.refined) throw PreconditionError("verify_smale: scan has no refined conjugate points");
    if (scan.t_grid.empty()) throw PreconditionError("verify_smale: empty scan");
    const double t_low = scan.t_grid.front();
    const double t_high = scan.t_grid.back();
    int total = 0;
    for (const auto& cp : scan.conjugate_points) {
        if (cp.t >= t_low && cp.t < t_high) total += cp.nullity;
    }
    const int residual = scan.mu.back() - scan.mu.front() - total;
    scan.smale_residual = residual;
    return residual;
}

ScalingCrossCheck cross_check_scaling(const FemSpace& space, const LagrangianModel& model,
                                      const ConstraintModel& constraint, double t, int count,
                                      const PencilOptions& pencil) {
    if (!(t > 0.0)) throw std::invalid_argument("cross_check_scaling: t must be positive");
    const Field zero = Field::Zero(space.dof_count());
    const auto ha = assemble_hessian(space, scale_lagrangian(model, t), zero);
    const auto ka = assemble_constraint_hessian(space, scale_constraint(constraint, t), zero);

    const FemSpace scaled(std::make_shared<const Mesh>(scale_mesh(space.mesh(), t)), space.components(),
                          space.quadrature().degree);
    const auto hb = assemble_hessian(scaled, model, zero);
    const auto kb = assemble_constraint_hessian(scaled, constraint, zero);

    ScalingCrossCheck out;
    out.pulled_back = lowest_eigenpairs(ha, ka, count, pencil).values;
    out.rescaled = lowest_eigenpairs(hb, kb, count, pencil).values;
    for (int k = 0; k < count; ++k) {
        const double a = out.pulled_back[static_cast<std::size_t>(k)];
        const double b = out.rescaled[static_cast<std::size_t>(k)];
        out.discrepancy = std::max(out.discrepancy, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
    return out;
}

}  // namespace varbif
