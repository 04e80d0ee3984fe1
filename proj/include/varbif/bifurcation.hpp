#pragma once

#include <string>
#include <vector>

#include "varbif/fem.hpp"
#include "varbif/lagrangian.hpp"
#include "varbif/spectrum.hpp"

namespace varbif {

/// Problem F'(u) = lambda K'(u) on a fixed space.
struct BifurcationProblem {
    const FemSpace& space;
    const LagrangianModel& model;
    const ConstraintModel& constraint;
};

struct Candidate {
    double lambda = 0.0;
    int multiplicity = 0;
    /// Position of the first eigenvalue of the cluster in the ascending spectrum.
    int first_index = 0;
};

struct CandidateOptions {
    /// Eigenvalues closer than this relative distance form one cluster.
    double cluster_tolerance = 1e-6;
    /// Euclidean bound on F'(0) and K'(0) for u = 0 to count as critical.
    double trivial_tolerance = 1e-9;
    AssemblyOptions assembly;
    PencilOptions pencil;
};

/// Throws TrivialBranchError unless u = 0 is critical for both F and K.
void require_trivial_branch(const BifurcationProblem& problem, double tolerance = 1e-9,
                            const AssemblyOptions& assembly = {});

/// Clustered eigenvalues of (F''(0), K''(0)) inside the open window (lo, hi).
std::vector<Candidate> detect_candidates(const BifurcationProblem& problem, double lo, double hi,
                                         const CandidateOptions& options = {});

enum class Definiteness { positive, negative, indefinite };
const char* to_string(Definiteness d);

struct CriteriaReport {
    double lambda_star = 0.0;
    int nullity_at_lambda = 0;
    double nullity_tolerance = 0.0;
    /// Smallest eigenvalue of (F''(0), h_gram); positive means F''(0) is positive definite.
    bool hessian_positive_definite_at_u0 = false;
    double hessian_margin = 0.0;
    /// Extreme eigenvalues of (K''(0), h_gram).
    Definiteness constraint_semidefinite = Definiteness::indefinite;
    double constraint_min_eigenvalue = 0.0;
    double constraint_max_eigenvalue = 0.0;
    /// Distance from lambda_star to the nearest different eigenvalue of (F''(0), K''(0)).
    bool eigenvalue_isolated = false;
    double isolation_gap = 0.0;
};

/// Records every verdict; indefinite or degenerate cases never throw.
CriteriaReport check_criteria(const BifurcationProblem& problem, double lambda_star,
                              const CandidateOptions& options = {});

struct NewtonOptions {
    double tolerance = 1e-10;
    int max_iterations = 30;
    double min_step = 0x1p-20;
    AssemblyOptions assembly;
};

struct NewtonResult {
    bool converged = false;
    Field u;
    int iterations = 0;
    double residual_norm = 0.0;
    /// max|d| / min|d| over the LDL^T pivots of the last Jacobian.
    double condition_estimate = 0.0;
    std::string message;
};

/// Euclidean norm over free dofs of F'(u) - lambda K'(u), freshly assembled.
double equation_residual_norm(const BifurcationProblem& problem, double lambda, const Field& u,
                              const AssemblyOptions& assembly = {});

/// Damped Newton with a halving line search on the residual norm. Failures
/// (singular Jacobian, stalled line search, iteration limit) come back as
/// records, not exceptions.
NewtonResult newton_solve(const BifurcationProblem& problem, double lambda, const Field& u_init,
                          const NewtonOptions& options = {});

enum class BranchSide { below, above };
const char* to_string(BranchSide side);

struct BranchPoint {
    double lambda = 0.0;
    Field u;
    /// H-norm of u.
    double amplitude = 0.0;
    int newton_iterations = 0;
    double residual_norm = 0.0;
    /// (lambda, -u) also satisfies the equation within twice the tolerance.
    bool pair_verified = false;
};

struct Branch {
    std::vector<BranchPoint> points;
    double lambda_star = 0.0;
    int eigenfunction_index = 0;
    BranchSide side = BranchSide::below;
};

struct TraceOptions {
    NewtonOptions newton;
    /// Seed amplitudes tried per side: initial * 2^k for k = 0..seed_doublings.
    int seed_doublings = 8;
    /// A solution whose amplitude drops below this fraction of the seed amplitude
    /// is treated as the trivial one.
    double collapse_ratio = 1e-3;
};

struct TraceResult {
    bool found = false;
    Branch branch;
    /// Why marching stopped, or why no branch was found.
    std::string verdict;
    std::vector<std::string> notes;
};

/// Natural-parameter continuation from lambda_star along `eigenfunction`,
/// which should be normalized in the K''(0) inner product.
TraceResult trace_branch(const BifurcationProblem& problem, double lambda_star, const Field& eigenfunction,
                         int eigenfunction_index, double initial_amplitude, double lambda_step, int n_steps,
                         const TraceOptions& options = {});

struct PitchforkFit {
    double exponent = 0.0;
    double log_prefactor = 0.0;
    double r_squared = 0.0;
    int points = 0;
};

/// Least-squares slope of log(amplitude) against log|lambda - lambda_star|.
PitchforkFit pitchfork_exponent(const Branch& branch);

}  // namespace varbif
