#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "output.hpp"
#include "varbif/bifurcation.hpp"
#include "varbif/cli.hpp"
#include "varbif/deform.hpp"
#include "varbif/errors.hpp"
#include "varbif/spectrum.hpp"

namespace varbif::cli {

Mesh build_mesh(const DomainSpec& domain) {
    try {
        switch (domain.tag) {
            case DomainTag::disk: return generate_disk_mesh(domain.size, domain.refinement);
            case DomainTag::square: return generate_square_mesh(domain.size, domain.refinement);
            case DomainTag::polygon: {
                std::vector<Point2> scaled;
                for (const auto& v : domain.vertices) scaled.push_back(domain.size * v);
                return generate_polygon_mesh(scaled, domain.refinement);
            }
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("domain: ") + e.what(), 0, "domain");
    }
    throw ConfigError("domain: unknown type", 0, "domain.type");
}

double domain_diameter(const DomainSpec& domain) {
    switch (domain.tag) {
        case DomainTag::disk: return 2.0 * domain.size;
        case DomainTag::square: return std::sqrt(2.0) * domain.size;
        case DomainTag::polygon: {
            double d = 0.0;
            for (const auto& a : domain.vertices) {
                for (const auto& b : domain.vertices) d = std::max(d, (a - b).norm());
            }
            return domain.size * d;
        }
    }
    return 0.0;
}

LagrangianModel build_model(const ModelSpec& spec) {
    auto base = [&]() {
        if (spec.name == "mean_curvature") return make_mean_curvature(spec.mu);
        if (spec.name == "quasilinear_demo") return make_quasilinear_demo(spec.a, spec.c, spec.components);
        return make_dirichlet_energy(spec.components);
    }();
    if (spec.derivative_fault != 0.0) return with_grad_p_fault(base, spec.derivative_fault);
    return base;
}

ConstraintModel build_constraint(const std::string& name, int components) {
    if (name != "half_usq") throw ConfigError("unknown constraint '" + name + "'", 0, "constraint.name");
    return make_constraint_half_usq(components);
}

namespace {

struct Setup {
    std::shared_ptr<const Mesh> mesh;
    FemSpace space;
    LagrangianModel model;
    ConstraintModel constraint;
    AssemblyOptions assembly;
    PencilOptions pencil;
};

Setup make_setup(const RunConfig& config) {
    auto mesh = std::make_shared<const Mesh>(build_mesh(config.domain));
    FemSpace space(mesh, config.model.components, config.solver.quadrature);
    AssemblyOptions assembly{config.solver.workers};
    PencilOptions pencil;
    pencil.zero_tolerance = config.solver.zero_tol;
    return Setup{mesh, std::move(space), build_model(config.model),
                 build_constraint(config.constraint, config.model.components), assembly, pencil};
}

Json header(const RunConfig& config, const Setup& setup) {
    Json j;
    j["config_hash"] = config.hash;
    j["version"] = toolkit_version;
    j["analysis"] = to_string(config.analysis.type);
    j["domain"] = {{"type", to_string(config.domain.tag)},
                   {"size", config.domain.size},
                   {"refinement", config.domain.refinement},
                   {"vertices", setup.mesh->vertex_count()},
                   {"triangles", setup.mesh->triangle_count()}};
    j["model"] = {{"name", setup.model.name()}, {"components", setup.model.components()},
                  {"parity", setup.model.parity()}};
    j["constraint"] = setup.constraint.name();
    j["dof_count"] = setup.space.dof_count();
    return j;
}

std::filesystem::path output_path(const RunConfig& config, const std::string& suffix) {
    return config.output.directory / (config.output.prefix + suffix);
}

void emit(RunOutcome& outcome, const std::filesystem::path& path, const std::string& text) {
    write_text(path, text);
    outcome.files.push_back(path);
}

Json number_array(const std::vector<double>& values) {
    Json a = Json::array();
    for (double v : values) a.push_back(v);
    return a;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

RunOutcome run_eigen(const RunConfig& config) {
    Setup s = make_setup(config);
    const Field zero = Field::Zero(s.space.dof_count());
    auto a = assemble_hessian(s.space, s.model, zero, s.assembly);
    auto b = assemble_constraint_hessian(s.space, s.constraint, zero, s.assembly);
    const int count = std::min(config.analysis.count, s.space.dof_count());
    const auto report = solve_pencil(a, b, count, s.pencil);

    RunOutcome outcome;
    Json j = header(config, s);
    std::vector<double> lowest(report.eigenvalues.begin(), report.eigenvalues.begin() + count);
    j["pencil"] = {report.a_label, report.b_label};
    j["eigenvalues"] = number_array(lowest);
    j["morse_index"] = report.morse_index;
    j["nullity"] = report.nullity;
    j["tolerance"] = report.zero_tolerance;
    std::vector<double> residuals;
    for (int k = 0; k < count; ++k) {
        residuals.push_back(relative_residual(a, b, lowest[static_cast<std::size_t>(k)], report.eigenvectors.col(k)));
    }
    j["relative_residuals"] = number_array(residuals);
    emit(outcome, output_path(config, "_spectrum.json"), dump_json(j));

    std::vector<std::string> columns{"vertex", "x", "y"};
    for (int i = 0; i < s.space.components(); ++i) columns.push_back("u" + std::to_string(i));
    for (int k = 0; k < count; ++k) {
        const Eigen::MatrixXd values = vertex_values(s.space, report.eigenvectors.col(k));
        CsvWriter csv(columns, config.hash);
        for (int v = 0; v < s.mesh->vertex_count(); ++v) {
            const Point2& x = s.mesh->vertices()[static_cast<std::size_t>(v)];
            std::vector<std::string> row{std::to_string(v), fmt(x.x()), fmt(x.y())};
            for (int i = 0; i < s.space.components(); ++i) row.push_back(fmt(values(v, i)));
            csv.row(row);
        }
        emit(outcome, output_path(config, "_eigenfunction_" + std::to_string(k) + ".csv"), csv.text());
    }
    std::ostringstream mesh_text;
    mesh_text << "# config_hash=" << config.hash << ", version=" << toolkit_version << '\n';
    write_mesh(mesh_text, *s.mesh);
    emit(outcome, output_path(config, "_mesh.txt"), mesh_text.str());

    std::ostringstream summary;
    summary.precision(10);
    summary << "lowest eigenvalues:";
    for (double v : lowest) summary << ' ' << v;
    outcome.summary = summary.str();
    return outcome;
}

RunOutcome run_scan(const RunConfig& config) {
    Setup s = make_setup(config);
    ScanOptions options;
    options.tol_t = config.analysis.tol_t;
    if (config.solver.zero_tol) options.zero_tolerance = *config.solver.zero_tol;
    options.assembly = s.assembly;
    options.pencil = s.pencil;
    options.pencil.zero_tolerance.reset();
    DeformationScan result = scan(s.space, s.model, config.analysis.t_min, config.analysis.grid, options);
    const int residual = verify_smale(result);

    RunOutcome outcome;
    CsvWriter csv({"t", "mu", "sigma_min"}, config.hash);
    for (std::size_t i = 0; i < result.t_grid.size(); ++i) {
        csv.row({fmt(result.t_grid[i]), std::to_string(result.mu[i]), fmt(result.sigma_min[i])});
    }
    emit(outcome, output_path(config, "_scan.csv"), csv.text());

    Json j = header(config, s);
    j["t_min"] = config.analysis.t_min;
    j["t_max"] = 1.0;
    j["grid"] = config.analysis.grid;
    j["zero_tolerance"] = result.zero_tolerance;
    j["tol_t"] = result.tol_t;
    j["mu_low"] = result.mu.front();
    j["mu_high"] = result.mu.back();
    Json points = Json::array();
    for (const auto& cp : result.conjugate_points) {
        points.push_back({{"t", cp.t},
                          {"nullity", cp.nullity},
                          {"bracket", {cp.bracket_low, cp.bracket_high}},
                          {"eigenvalue_tolerance", cp.eigenvalue_tolerance}});
    }
    j["conjugate_points"] = points;
    j["smale_residual"] = residual;
    j["smale_verified"] = residual == 0;
    emit(outcome, output_path(config, "_scan.json"), dump_json(j));

    outcome.summary = std::to_string(result.conjugate_points.size()) + " conjugate point(s), Smale residual " +
                      std::to_string(residual);
    if (residual != 0) outcome.exit_code = 2;
    return outcome;
}

RunOutcome run_branch(const RunConfig& config) {
    Setup s = make_setup(config);
    const BifurcationProblem problem{s.space, s.model, s.constraint};
    require_trivial_branch(problem, 1e-9, s.assembly);
    const Field zero = Field::Zero(s.space.dof_count());
    const auto a = assemble_hessian(s.space, s.model, zero, s.assembly);
    const auto b = assemble_constraint_hessian(s.space, s.constraint, zero, s.assembly);
    const int index = config.analysis.lambda_index;
    const int n = s.space.dof_count();
    if (index >= n) throw ConfigError("analysis.lambda_index exceeds the number of dofs", 0, "analysis.lambda_index");

    // Enough eigenpairs to see the neighbours of the chosen eigenvalue.
    const int want = std::min(n, index + 8);
    const auto pairs = lowest_eigenpairs(a, b, want, s.pencil);
    const double lambda_star = pairs.values[static_cast<std::size_t>(index)];
    double gap = std::numeric_limits<double>::infinity();
    for (double v : pairs.values) {
        const double d = std::abs(v - lambda_star);
        if (d > 1e-6 * std::max(1.0, std::abs(lambda_star))) gap = std::min(gap, d);
    }
    if (!std::isfinite(gap)) gap = std::max(1.0, std::abs(lambda_star));

    const double amplitude = config.analysis.initial_amplitude.value_or(1e-2 * domain_diameter(config.domain));
    const double step = config.analysis.lambda_step.value_or(gap / 50.0);
    TraceOptions options;
    options.newton.tolerance = config.solver.newton_tol;
    options.newton.max_iterations = config.solver.max_iter;
    options.newton.assembly = s.assembly;
    const TraceResult trace =
        trace_branch(problem, lambda_star, pairs.vectors.col(index), index, amplitude, step, config.analysis.steps,
                     options);

    RunOutcome outcome;
    CsvWriter csv({"lambda", "amplitude", "newton_iters", "residual_norm"}, config.hash);
    bool pairs_ok = !trace.branch.points.empty();
    double worst = 0.0;
    for (const auto& p : trace.branch.points) {
        csv.row({fmt(p.lambda), fmt(p.amplitude), std::to_string(p.newton_iterations), fmt(p.residual_norm)});
        pairs_ok = pairs_ok && p.pair_verified;
        worst = std::max(worst, p.residual_norm);
    }
    emit(outcome, output_path(config, "_branch.csv"), csv.text());

    Json j = header(config, s);
    j["lambda_star"] = lambda_star;
    j["eigenfunction_index"] = index;
    j["isolation_gap"] = gap;
    j["initial_amplitude"] = amplitude;
    j["lambda_step"] = step;
    j["steps"] = config.analysis.steps;
    j["newton_tolerance"] = config.solver.newton_tol;
    j["found"] = trace.found;
    j["side"] = trace.found ? to_string(trace.branch.side) : "none";
    j["points"] = trace.branch.points.size();
    j["verdict"] = trace.verdict;
    j["notes"] = trace.notes;
    j["max_residual_norm"] = worst;
    j["pair_verified"] = pairs_ok;
    if (trace.branch.points.size() >= 3) {
        try {
            const auto fit = pitchfork_exponent(trace.branch);
            j["pitchfork"] = {{"exponent", fit.exponent}, {"log_prefactor", fit.log_prefactor},
                              {"r_squared", fit.r_squared}, {"points", fit.points}};
        } catch (const PreconditionError& e) {
            j["pitchfork"] = {{"error", e.what()}};
        }
    } else {
        j["pitchfork"] = nullptr;
    }
    emit(outcome, output_path(config, "_branch.json"), dump_json(j));

    outcome.summary = trace.found ? "branch " + std::string(to_string(trace.branch.side)) + " lambda* with " +
                                        std::to_string(trace.branch.points.size()) + " points; " + trace.verdict
                                  : trace.verdict;
    return outcome;
}

RunOutcome run_check(const RunConfig& config) {
    Setup s = make_setup(config);
    const std::uint64_t seed = config.analysis.seed;
    const int samples = config.analysis.samples;
    constexpr double derivative_tolerance = 1e-6;

    RunOutcome outcome;
    Json j = header(config, s);
    std::vector<std::string> failures;

    const double model_error = verify_derivatives(s.model, samples, seed);
    const double constraint_error = verify_derivatives(s.constraint, samples, seed);
    j["derivatives"] = {{"model_max_relative_error", model_error},
                        {"constraint_max_relative_error", constraint_error},
                        {"tolerance", derivative_tolerance},
                        {"samples", samples},
                        {"seed", seed},
                        {"pass", model_error < derivative_tolerance && constraint_error < derivative_tolerance}};
    if (!(model_error < derivative_tolerance)) failures.push_back("model derivatives disagree with finite differences");
    if (!(constraint_error < derivative_tolerance)) {
        failures.push_back("constraint derivatives disagree with finite differences");
    }

    const auto states = random_samples(s.model.components(), samples, seed);
    const auto ell = check_ellipticity(s.model, states, config.analysis.c_floor);
    j["ellipticity"] = {{"min_eigenvalue", ell.min_eigenvalue},
                        {"argmin_sample", ell.argmin_sample},
                        {"c_floor", ell.c_floor},
                        {"trivial_state_constant", ell.trivial_state_constant},
                        {"pass", ell.elliptic}};
    if (!ell.elliptic) failures.push_back("hess_pp falls below c_floor at a sampled state");

    const BifurcationProblem problem{s.space, s.model, s.constraint};
    try {
        require_trivial_branch(problem, 1e-9, s.assembly);
        const Field zero = Field::Zero(s.space.dof_count());
        const auto a = assemble_hessian(s.space, s.model, zero, s.assembly);
        const auto b = assemble_constraint_hessian(s.space, s.constraint, zero, s.assembly);
        const int index = std::min(config.analysis.lambda_index, s.space.dof_count() - 1);
        const double lambda_star = lowest_eigenpairs(a, b, index + 1, s.pencil).values.back();
        CandidateOptions co;
        co.assembly = s.assembly;
        co.pencil = s.pencil;
        const auto r = check_criteria(problem, lambda_star, co);
        j["criteria"] = {{"applicable", true},
                         {"lambda_star", r.lambda_star},
                         {"nullity_at_lambda", r.nullity_at_lambda},
                         {"nullity_tolerance", r.nullity_tolerance},
                         {"hessian_positive_definite_at_u0", r.hessian_positive_definite_at_u0},
                         {"hessian_margin", r.hessian_margin},
                         {"constraint_semidefinite", to_string(r.constraint_semidefinite)},
                         {"constraint_min_eigenvalue", r.constraint_min_eigenvalue},
                         {"constraint_max_eigenvalue", r.constraint_max_eigenvalue},
                         {"eigenvalue_isolated", r.eigenvalue_isolated},
                         {"isolation_gap", r.isolation_gap}};
    } catch (const TrivialBranchError& e) {
        j["criteria"] = {{"applicable", false}, {"reason", e.what()}};
    }

    j["failures"] = failures;
    j["pass"] = failures.empty();
    emit(outcome, output_path(config, "_check.json"), dump_json(j));
    if (!failures.empty()) {
        outcome.exit_code = 2;
        std::string list;
        for (const auto& f : failures) list += (list.empty() ? "" : "; ") + f;
        outcome.summary = "audit failed: " + list;
    } else {
        outcome.summary = "all audits passed";
    }
    return outcome;
}

RunOutcome run(const RunConfig& config) {
    switch (config.analysis.type) {
        case AnalysisType::eigen: return run_eigen(config);
        case AnalysisType::scan: return run_scan(config);
        case AnalysisType::branch: return run_branch(config);
        case AnalysisType::check: return run_check(config);
    }
    throw ConfigError("unknown analysis type", 0, "analysis.type");
}

}  // namespace varbif::cli
