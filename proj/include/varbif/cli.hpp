#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varbif/fem.hpp"
#include "varbif/lagrangian.hpp"
#include "varbif/mesh.hpp"

namespace varbif::cli {

inline constexpr const char* toolkit_version = "0.1.0";

/// Invalid configuration; line is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line, std::string key)
        : std::runtime_error(what), line_(line), key_(std::move(key)) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    int line_;
    std::string key_;
};

enum class AnalysisType { eigen, scan, branch, check };
const char* to_string(AnalysisType type);

struct DomainSpec {
    DomainTag tag = DomainTag::disk;
    /// Radius (disk), side length (square) or uniform scale (polygon).
    double size = 1.0;
    /// Refinement level (disk, polygon) or divisions per side (square).
    int refinement = 4;
    std::vector<Point2> vertices;
};

struct ModelSpec {
    std::string name = "dirichlet";
    int components = 1;
    double mu = 0.0;
    double a = 0.0;
    double c = 0.0;
    /// Relative error injected into grad_p; 0 leaves the model intact.
    double derivative_fault = 0.0;
};

struct AnalysisSpec {
    AnalysisType type = AnalysisType::eigen;
    int count = 5;
    double t_min = 0.5;
    int grid = 200;
    double tol_t = 1e-4;
    int lambda_index = 0;
    std::optional<double> initial_amplitude;
    std::optional<double> lambda_step;
    int steps = 20;
    int samples = 20;
    double c_floor = 1e-3;
    std::uint64_t seed = 0;
};

struct SolverSpec {
    double newton_tol = 1e-10;
    int max_iter = 30;
    std::optional<double> zero_tol;
    int quadrature = 2;
    int workers = 1;
};

struct OutputSpec {
    std::filesystem::path directory = ".";
    std::string prefix;
};

struct RunConfig {
    DomainSpec domain;
    ModelSpec model;
    std::string constraint = "half_usq";
    AnalysisSpec analysis;
    SolverSpec solver;
    OutputSpec output;
    /// FNV-1a of the canonical `section.key=value` listing without [output], hex.
    std::string hash;
};

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Unknown sections or keys and malformed values throw ConfigError.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

Mesh build_mesh(const DomainSpec& domain);
double domain_diameter(const DomainSpec& domain);
LagrangianModel build_model(const ModelSpec& model);
ConstraintModel build_constraint(const std::string& name, int components);

struct RunOutcome {
    int exit_code = 0;
    std::vector<std::filesystem::path> files;
    std::string summary;
};

RunOutcome run_eigen(const RunConfig& config);
RunOutcome run_scan(const RunConfig& config);
RunOutcome run_branch(const RunConfig& config);
RunOutcome run_check(const RunConfig& config);
/// Dispatches on config.analysis.type.
RunOutcome run(const RunConfig& config);

}  // namespace varbif::cli
