#include "varbif/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "varbif/errors.hpp"

namespace varbif {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

Eigen::VectorXd equation_residual(const BifurcationProblem& problem, double lambda, const Field& u,
                                  const AssemblyOptions& assembly) {
    return assemble_residual(problem.space, problem.model, u, assembly) -
           lambda * assemble_constraint_gradient(problem.space, problem.constraint, u, assembly);
}

SparseMatrix equation_jacobian(const BifurcationProblem& problem, double lambda, const Field& u,
                               const AssemblyOptions& assembly) {
    SparseMatrix j = assemble_hessian(problem.space, problem.model, u, assembly).matrix -
                     lambda * assemble_constraint_hessian(problem.space, problem.constraint, u, assembly).matrix;
    j.makeCompressed();
    return j;
}

std::string format_double(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

struct LinearSolve {
    bool ok = false;
    Eigen::VectorXd x;
    double condition = std::numeric_limits<double>::infinity();
};

LinearSolve solve_jacobian(const SparseMatrix& j, const Eigen::VectorXd& rhs) {
    LinearSolve out;
    Ldlt ldlt(j);
    if (ldlt.info() == Eigen::Success) {
        const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
        const double lo = d.size() ? d.minCoeff() : 0.0;
        const double hi = d.size() ? d.maxCoeff() : 0.0;
        out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        if (lo > 0.0 && out.condition < 1e14) {
            out.x = ldlt.solve(rhs);
            if (out.x.allFinite() && (j * out.x - rhs).norm() <= 1e-8 * std::max(rhs.norm(), 1e-300)) {
                out.ok = true;
                return out;
            }
        }
    }
    // Symmetric indefinite pivot breakdown: fall back to partial pivoting.
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(j);
    if (lu.info() != Eigen::Success) return out;
    out.x = lu.solve(rhs);
    out.ok = lu.info() == Eigen::Success && out.x.allFinite();
    return out;
}

}  // namespace

void require_trivial_branch(const BifurcationProblem& problem, double tolerance, const AssemblyOptions& assembly) {
    const Field zero = Field::Zero(problem.space.dof_count());
    const double rf = assemble_residual(problem.space, problem.model, zero, assembly).norm();
    const double rk = assemble_constraint_gradient(problem.space, problem.constraint, zero, assembly).norm();
    if (rf > tolerance || rk > tolerance) {
        throw TrivialBranchError("u = 0 is not a common critical point: |F'(0)| = " + format_double(rf) +
                                 ", |K'(0)| = " + format_double(rk) + ", tolerance " + format_double(tolerance));
    }
}

std::vector<Candidate> detect_candidates(const BifurcationProblem& problem, double lo, double hi,
                                         const CandidateOptions& options) {
    if (!(lo < hi)) throw std::invalid_argument("detect_candidates: empty window");
    require_trivial_branch(problem, options.trivial_tolerance, options.assembly);
    const Field zero = Field::Zero(problem.space.dof_count());
    const auto hf = assemble_hessian(problem.space, problem.model, zero, options.assembly);
    const auto hk = assemble_constraint_hessian(problem.space, problem.constraint, zero, options.assembly);
    const auto pairs = eigenpairs_below(hf, hk, hi, options.pencil);

    std::vector<Candidate> out;
    for (int i = 0; i < static_cast<int>(pairs.values.size()); ++i) {
        const double v = pairs.values[static_cast<std::size_t>(i)];
        if (!(v > lo)) continue;
        if (!out.empty()) {
            Candidate& last = out.back();
            const double scale = std::max(std::abs(last.lambda), std::abs(v));
            if (std::abs(v - last.lambda) <= options.cluster_tolerance * scale) {
                ++last.multiplicity;
                continue;
            }
        }
        out.push_back(Candidate{v, 1, i});
    }
    return out;
}

const char* to_string(Definiteness d) {
    switch (d) {
        case Definiteness::positive: return "positive";
        case Definiteness::negative: return "negative";
        case Definiteness::indefinite: return "indefinite";
    }
    return "indefinite";
}

CriteriaReport check_criteria(const BifurcationProblem& problem, double lambda_star, const CandidateOptions& options) {
    const FemSpace& space = problem.space;
    const Field zero = Field::Zero(space.dof_count());
    const auto gram = assemble_h_gram(space, options.assembly);
    const auto hf = assemble_hessian(space, problem.model, zero, options.assembly);
    const auto hk = assemble_constraint_hessian(space, problem.constraint, zero, options.assembly);

    CriteriaReport report;
    report.lambda_star = lambda_star;

    SymmetricOperator linearized{SparseMatrix(hf.matrix - lambda_star * hk.matrix), "linearized"};
    const auto morse = morse_data(linearized, gram, options.pencil.zero_tolerance, options.pencil);
    report.nullity_at_lambda = morse.nullity;
    report.nullity_tolerance = morse.tolerance;

    report.hessian_margin = lowest_eigenpairs(hf, gram, 1, options.pencil).values.front();
    report.hessian_positive_definite_at_u0 = report.hessian_margin > 0.0;

    SymmetricOperator negated{SparseMatrix(-hk.matrix), "-" + hk.label};
    report.constraint_min_eigenvalue = lowest_eigenpairs(hk, gram, 1, options.pencil).values.front();
    report.constraint_max_eigenvalue = -lowest_eigenpairs(negated, gram, 1, options.pencil).values.front();
    const double scale = std::max(std::abs(report.constraint_min_eigenvalue), std::abs(report.constraint_max_eigenvalue));
    const double tol = 1e-10 * scale;
    if (report.constraint_min_eigenvalue >= -tol) report.constraint_semidefinite = Definiteness::positive;
    else if (report.constraint_max_eigenvalue <= tol) report.constraint_semidefinite = Definiteness::negative;
    else report.constraint_semidefinite = Definiteness::indefinite;

    report.isolation_gap = std::numeric_limits<double>::quiet_NaN();
    try {
        require_positive_definite(hk);
        const double band = options.cluster_tolerance * std::max(1.0, std::abs(lambda_star));
        const int n = hf.dimension();
        const int through = count_below(hf, hk, lambda_star + band);
        const int k = std::min(n, through + 1);
        const auto pairs = lowest_eigenpairs(hf, hk, k, options.pencil);
        double gap = std::numeric_limits<double>::infinity();
        for (double v : pairs.values) {
            if (std::abs(v - lambda_star) > band) gap = std::min(gap, std::abs(v - lambda_star));
        }
        if (std::isfinite(gap)) {
            report.isolation_gap = gap;
            report.eigenvalue_isolated = true;
        } else if (through == n) {
            // No other eigenvalue exists at all.
            report.isolation_gap = std::numeric_limits<double>::infinity();
            report.eigenvalue_isolated = true;
        }
    } catch (const PencilError&) {
        report.eigenvalue_isolated = false;
    }
    return report;
}

double equation_residual_norm(const BifurcationProblem& problem, double lambda, const Field& u,
                              const AssemblyOptions& assembly) {
    return equation_residual(problem, lambda, u, assembly).norm();
}

NewtonResult newton_solve(const BifurcationProblem& problem, double lambda, const Field& u_init,
                          const NewtonOptions& options) {
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("newton_solve: tolerance must be positive");
    if (u_init.size() != problem.space.dof_count()) throw std::invalid_argument("newton_solve: field size mismatch");

    NewtonResult out;
    out.u = u_init;
    Eigen::VectorXd r = equation_residual(problem, lambda, out.u, options.assembly);
    out.residual_norm = r.norm();
    while (true) {
        if (out.residual_norm <= options.tolerance) {
            out.converged = true;
            out.message = "converged";
            return out;
        }
        if (out.iterations >= options.max_iterations) {
            out.message = "iteration limit reached";
            return out;
        }
        const SparseMatrix j = equation_jacobian(problem, lambda, out.u, options.assembly);
        const LinearSolve step = solve_jacobian(j, -r);
        out.condition_estimate = step.condition;
        if (!step.ok) {
            out.message = "singular Newton matrix (condition estimate " + format_double(step.condition) + ")";
            return out;
        }
        double s = 1.0;
        while (true) {
            const Field trial = out.u + s * step.x;
            Eigen::VectorXd rt = equation_residual(problem, lambda, trial, options.assembly);
            const double nt = rt.norm();
            if (nt < out.residual_norm) {
                out.u = trial;
                r = std::move(rt);
                out.residual_norm = nt;
                break;
            }
            s *= 0.5;
            if (s < options.min_step) {
                out.message = "line search stalled at residual " + format_double(out.residual_norm);
                ++out.iterations;
                return out;
            }
        }
        ++out.iterations;
    }
}

const char* to_string(BranchSide side) { return side == BranchSide::below ? "below" : "above"; }

TraceResult trace_branch(const BifurcationProblem& problem, double lambda_star, const Field& eigenfunction,
                         int eigenfunction_index, double initial_amplitude, double lambda_step, int n_steps,
                         const TraceOptions& options) {
    if (!(initial_amplitude > 0.0)) throw std::invalid_argument("trace_branch: initial amplitude must be positive");
    if (!(lambda_step > 0.0)) throw std::invalid_argument("trace_branch: lambda step must be positive");
    if (n_steps < 1) throw std::invalid_argument("trace_branch: at least one step is required");
    if (eigenfunction.size() != problem.space.dof_count()) {
        throw std::invalid_argument("trace_branch: eigenfunction size mismatch");
    }

    const auto gram = assemble_h_gram(problem.space, options.newton.assembly);
    const double tol = options.newton.tolerance;
    const bool even = problem.model.parity() && problem.constraint.parity();

    TraceResult result;
    result.branch.lambda_star = lambda_star;
    result.branch.eigenfunction_index = eigenfunction_index;

    auto make_point = [&](double lambda, const NewtonResult& nr) {
        BranchPoint p;
        p.lambda = lambda;
        p.u = nr.u;
        p.amplitude = h_norm(gram, nr.u);
        p.newton_iterations = nr.iterations;
        p.residual_norm = equation_residual_norm(problem, lambda, nr.u, options.newton.assembly);
        const double mirrored = equation_residual_norm(problem, lambda, -nr.u, options.newton.assembly);
        p.pair_verified = mirrored <= 2.0 * tol;
        return p;
    };

    // Seeds: smallest amplitude first, both sides per amplitude.
    bool seeded = false;
    NewtonResult seed;
    for (int k = 0; k <= options.seed_doublings && !seeded; ++k) {
        const double a = std::ldexp(initial_amplitude, k);
        for (BranchSide side : {BranchSide::below, BranchSide::above}) {
            const double sign = side == BranchSide::below ? -1.0 : 1.0;
            const double lambda = lambda_star + sign * lambda_step;
            const Field guess = a * eigenfunction;
            NewtonResult nr = newton_solve(problem, lambda, guess, options.newton);
            const double amp = nr.converged ? h_norm(gram, nr.u) : 0.0;
            const double seed_amp = h_norm(gram, guess);
            std::ostringstream note;
            note << "seed " << to_string(side) << " amplitude " << a << ": ";
            if (!nr.converged) {
                note << "newton failed (" << nr.message << ")";
            } else if (amp < options.collapse_ratio * seed_amp) {
                note << "collapsed to the trivial solution";
            } else {
                note << "nontrivial solution, H-norm " << amp;
                seeded = true;
                seed = std::move(nr);
                result.branch.side = side;
            }
            result.notes.push_back(note.str());
            if (seeded) break;
        }
    }
    if (!seeded) {
        result.found = false;
        result.verdict =
            "no branch found: every seed failed or collapsed on both sides (isolated bifurcation cannot be told "
            "apart from a non-isolated trivial solution or a discretization limit)";
        return result;
    }

    const double sign = result.branch.side == BranchSide::below ? -1.0 : 1.0;
    const double floor_amplitude = options.collapse_ratio * initial_amplitude * h_norm(gram, eigenfunction);
    result.found = true;
    result.branch.points.push_back(make_point(lambda_star + sign * lambda_step, seed));
    result.verdict = "completed " + std::to_string(n_steps) + " steps";
    for (int step = 2; step <= n_steps; ++step) {
        const double lambda = lambda_star + sign * step * lambda_step;
        NewtonResult nr = newton_solve(problem, lambda, result.branch.points.back().u, options.newton);
        if (!nr.converged) {
            result.verdict = "stopped at step " + std::to_string(step) + ": newton failed (" + nr.message + ")";
            break;
        }
        BranchPoint p = make_point(lambda, nr);
        if (p.amplitude < floor_amplitude) {
            result.verdict = "stopped at step " + std::to_string(step) + ": amplitude collapsed";
            break;
        }
        result.branch.points.push_back(std::move(p));
    }
    if (!even) result.notes.push_back("model or constraint is not even; pair check is informational");
    return result;
}

PitchforkFit pitchfork_exponent(const Branch& branch) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : branch.points) {
        const double d = std::abs(p.lambda - branch.lambda_star);
        if (d > 0.0 && p.amplitude > 0.0) {
            xs.push_back(std::log(d));
            ys.push_back(std::log(p.amplitude));
        }
    }
    if (xs.size() < 3) throw PreconditionError("pitchfork_exponent: at least three points are required");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw PreconditionError("pitchfork_exponent: points share a single lambda distance");
    PitchforkFit fit;
    fit.points = static_cast<int>(xs.size());
    fit.exponent = sxy / sxx;
    fit.log_prefactor = my - fit.exponent * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace varbif
