#pragma once

#include <optional>
#include <string>
#include <vector>

#include "varbif/fem.hpp"
#include "varbif/lagrangian.hpp"
#include "varbif/spectrum.hpp"

namespace varbif {

/// A parameter t at which the scaled Hessian at u = 0 is degenerate.
struct ConjugatePoint {
    double t = 0.0;
    int nullity = 0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    /// Half-width of the eigenvalue window used to count the nullity.
    double eigenvalue_tolerance = 0.0;
};

struct ScanOptions {
    /// Zero threshold for sigma when counting mu and nu at grid nodes.
    double zero_tolerance = 1e-8;
    /// Bracket width requested for refined conjugate points.
    double tol_t = 1e-4;
    /// Bisection keeps going to this width before the nullity is read off, so
    /// the eigenvalue window stays far from neighbouring eigenvalues.
    double nullity_width = 1e-9;
    bool refine = true;
    double trivial_tolerance = 1e-9;
    AssemblyOptions assembly;
    PencilOptions pencil;
};

struct DeformationScan {
    std::vector<double> t_grid;
    std::vector<int> mu;
    std::vector<int> nu;
    std::vector<double> sigma_min;
    std::vector<ConjugatePoint> conjugate_points;
    bool refined = false;
    std::string model_name;
    int dof_count = 0;
    double zero_tolerance = 0.0;
    double tol_t = 0.0;
    /// Filled by verify_smale.
    std::optional<int> smale_residual;
};

/// Pencil (H_t, G) of the pulled-back problem at u = 0: H_t is the Hessian of
/// the scaled Lagrangian, G the H Gram matrix (t independent in the plane).
SymmetricOperator scaled_hessian_at_zero(const FemSpace& space, const LagrangianModel& model, double t,
                                         const AssemblyOptions& assembly = {});

/// Uniform grid of `grid_size` nodes on [t_min, 1]. Refines every cell where
/// the count of negative eigenvalues changes when options.refine is set.
DeformationScan scan(const FemSpace& space, const LagrangianModel& model, double t_min, int grid_size,
                     const ScanOptions& options = {});

/// Bisection on [t_a, t_b] for the first change in the negative count.
/// Throws std::invalid_argument when the count is the same at both ends.
ConjugatePoint refine_conjugate_point(const FemSpace& space, const LagrangianModel& model, double t_a, double t_b,
                                      double tol_t, const ScanOptions& options = {});

/// mu(t_high) - mu(t_low) - sum of refined nullities with t_low <= t* < t_high.
/// Throws PreconditionError on an unrefined scan.
int verify_smale(DeformationScan& scan);

struct ScalingCrossCheck {
    std::vector<double> pulled_back;
    std::vector<double> rescaled;
    double discrepancy = 0.0;
};

/// Lowest `count` eigenvalues of (F'', K'') at u = 0 computed on the fixed
/// mesh with scaled integrands and on the scaled mesh with the originals.
ScalingCrossCheck cross_check_scaling(const FemSpace& space, const LagrangianModel& model,
                                      const ConstraintModel& constraint, double t, int count = 5,
                                      const PencilOptions& pencil = {});

}  // namespace varbif
