#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "output.hpp"
#include "varbif/cli.hpp"

namespace varbif::cli {

const char* to_string(AnalysisType type) {
    switch (type) {
        case AnalysisType::eigen: return "eigen";
        case AnalysisType::scan: return "scan";
        case AnalysisType::branch: return "branch";
        case AnalysisType::check: return "check";
    }
    return "eigen";
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Entry {
    std::string value;
    int line;
};

class Reader {
public:
    Reader(const std::map<std::string, Entry>& entries) : entries_(entries) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    int line(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& why) const {
        const int l = line(key);
        std::string where = l ? "line " + std::to_string(l) + ": " : "";
        throw ConfigError(where + "key '" + key + "': " + why, l, key);
    }

    std::string text(const std::string& key, std::string fallback) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? fallback : it->second.value;
    }

    double real(const std::string& key, double fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        return parse_real(key, it->second.value);
    }

    std::optional<double> optional_real(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return parse_real(key, it->second.value);
    }

    template <class Int>
    Int integer(const std::string& key, Int fallback) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        const std::string& s = it->second.value;
        Int v{};
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
        return v;
    }

    double parse_real(const std::string& key, const std::string& s) const {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail(key, "expected a finite real number, got '" + s + "'");
        }
        return v;
    }

private:
    const std::map<std::string, Entry>& entries_;
};

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> keys{
        {"domain", {"type", "size", "refinement", "vertices"}},
        {"model", {"name", "components", "mu", "a", "c", "derivative_fault"}},
        {"constraint", {"name"}},
        {"analysis",
         {"type", "count", "t_min", "grid", "tol_t", "lambda_index", "initial_amplitude", "lambda_step", "steps",
          "samples", "c_floor", "seed"}},
        {"solver", {"newton_tol", "max_iter", "zero_tol", "quadrature", "workers"}},
        {"output", {"directory", "prefix"}},
    };
    return keys;
}

std::vector<Point2> parse_vertices(const Reader& r, const std::string& key, const std::string& text) {
    std::vector<Point2> out;
    std::stringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
        std::istringstream xy(item);
        std::string xs;
        std::string ys;
        std::string extra;
        if (!(xy >> xs >> ys) || (xy >> extra)) r.fail(key, "expected 'x y' pairs separated by commas");
        out.emplace_back(r.parse_real(key, xs), r.parse_real(key, ys));
    }
    return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
    std::map<std::string, Entry> entries;
    std::string section;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty() || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header", line_no, "");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!known_keys().count(section)) {
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" + section + "]", line_no,
                                  section);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no, "");
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (section.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' appears before any section",
                              line_no, key);
        }
        const auto& allowed = known_keys().at(section);
        const std::string full = section + "." + key;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + full + "'", line_no, full);
        }
        if (value.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": key '" + full + "' has no value", line_no, full);
        }
        if (entries.count(full)) {
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + full + "'", line_no, full);
        }
        entries.emplace(full, Entry{value, line_no});
    }

    const Reader r(entries);
    RunConfig c;

    const std::string type = r.text("domain.type", "disk");
    if (type == "disk") c.domain.tag = DomainTag::disk;
    else if (type == "square") c.domain.tag = DomainTag::square;
    else if (type == "polygon") c.domain.tag = DomainTag::polygon;
    else r.fail("domain.type", "expected disk, square or polygon, got '" + type + "'");
    c.domain.size = r.real("domain.size", 1.0);
    if (!(c.domain.size > 0.0)) r.fail("domain.size", "must be positive");
    c.domain.refinement = r.integer<int>("domain.refinement", c.domain.tag == DomainTag::square ? 16 : 4);
    const bool square = c.domain.tag == DomainTag::square;
    if (c.domain.refinement < (square ? 1 : 0) || c.domain.refinement > (square ? 1024 : 8)) {
        r.fail("domain.refinement", square ? "divisions must lie in [1, 1024]" : "level must lie in [0, 8]");
    }
    if (r.has("domain.vertices")) {
        if (c.domain.tag != DomainTag::polygon) r.fail("domain.vertices", "only valid for domain.type = polygon");
        c.domain.vertices = parse_vertices(r, "domain.vertices", r.text("domain.vertices", ""));
    }
    if (c.domain.tag == DomainTag::polygon && c.domain.vertices.size() < 3) {
        r.fail("domain.vertices", "a polygon needs at least three vertices");
    }

    c.model.name = r.text("model.name", "dirichlet");
    if (c.model.name != "dirichlet" && c.model.name != "mean_curvature" && c.model.name != "quasilinear_demo") {
        r.fail("model.name", "expected dirichlet, mean_curvature or quasilinear_demo, got '" + c.model.name + "'");
    }
    c.model.components = r.integer<int>("model.components", 1);
    if (c.model.components < 1) r.fail("model.components", "must be at least 1");
    if (c.model.name == "mean_curvature" && c.model.components != 1) {
        r.fail("model.components", "mean_curvature is scalar");
    }
    c.model.mu = r.real("model.mu", 0.0);
    c.model.a = r.real("model.a", 0.0);
    c.model.c = r.real("model.c", 0.0);
    c.model.derivative_fault = r.real("model.derivative_fault", 0.0);
    for (const char* key : {"model.mu"}) {
        if (r.has(key) && c.model.name != "mean_curvature") r.fail(key, "only used by mean_curvature");
    }
    for (const char* key : {"model.a", "model.c"}) {
        if (r.has(key) && c.model.name != "quasilinear_demo") r.fail(key, "only used by quasilinear_demo");
    }

    c.constraint = r.text("constraint.name", "half_usq");
    if (c.constraint != "half_usq") r.fail("constraint.name", "expected half_usq, got '" + c.constraint + "'");

    if (!r.has("analysis.type")) throw ConfigError("missing required key 'analysis.type'", 0, "analysis.type");
    const std::string analysis = r.text("analysis.type", "");
    if (analysis == "eigen") c.analysis.type = AnalysisType::eigen;
    else if (analysis == "scan") c.analysis.type = AnalysisType::scan;
    else if (analysis == "branch") c.analysis.type = AnalysisType::branch;
    else if (analysis == "check") c.analysis.type = AnalysisType::check;
    else r.fail("analysis.type", "expected eigen, scan, branch or check, got '" + analysis + "'");
    c.analysis.count = r.integer<int>("analysis.count", 5);
    if (c.analysis.count < 1) r.fail("analysis.count", "must be at least 1");
    c.analysis.t_min = r.real("analysis.t_min", 0.5);
    if (!(c.analysis.t_min > 0.0 && c.analysis.t_min < 1.0)) r.fail("analysis.t_min", "must lie in (0, 1)");
    c.analysis.grid = r.integer<int>("analysis.grid", 200);
    if (c.analysis.grid < 2) r.fail("analysis.grid", "must be at least 2");
    c.analysis.tol_t = r.real("analysis.tol_t", 1e-4);
    if (!(c.analysis.tol_t > 0.0)) r.fail("analysis.tol_t", "must be positive");
    c.analysis.lambda_index = r.integer<int>("analysis.lambda_index", 0);
    if (c.analysis.lambda_index < 0) r.fail("analysis.lambda_index", "must be non-negative");
    c.analysis.initial_amplitude = r.optional_real("analysis.initial_amplitude");
    if (c.analysis.initial_amplitude && !(*c.analysis.initial_amplitude > 0.0)) {
        r.fail("analysis.initial_amplitude", "must be positive");
    }
    c.analysis.lambda_step = r.optional_real("analysis.lambda_step");
    if (c.analysis.lambda_step && !(*c.analysis.lambda_step > 0.0)) r.fail("analysis.lambda_step", "must be positive");
    c.analysis.steps = r.integer<int>("analysis.steps", 20);
    if (c.analysis.steps < 1) r.fail("analysis.steps", "must be at least 1");
    c.analysis.samples = r.integer<int>("analysis.samples", 20);
    if (c.analysis.samples < 1) r.fail("analysis.samples", "must be at least 1");
    c.analysis.c_floor = r.real("analysis.c_floor", 1e-3);
    if (!(c.analysis.c_floor > 0.0)) r.fail("analysis.c_floor", "must be positive");
    c.analysis.seed = r.integer<std::uint64_t>("analysis.seed", 0);

    c.solver.newton_tol = r.real("solver.newton_tol", 1e-10);
    if (!(c.solver.newton_tol > 0.0)) r.fail("solver.newton_tol", "must be positive");
    c.solver.max_iter = r.integer<int>("solver.max_iter", 30);
    if (c.solver.max_iter < 1) r.fail("solver.max_iter", "must be at least 1");
    c.solver.zero_tol = r.optional_real("solver.zero_tol");
    if (c.solver.zero_tol && !(*c.solver.zero_tol > 0.0)) r.fail("solver.zero_tol", "must be positive");
    c.solver.quadrature = r.integer<int>("solver.quadrature", 2);
    if (c.solver.quadrature < 2 || c.solver.quadrature > 4) r.fail("solver.quadrature", "must be 2, 3 or 4");
    c.solver.workers = r.integer<int>("solver.workers", 1);
    if (c.solver.workers < 1) r.fail("solver.workers", "must be at least 1");

    c.output.directory = r.text("output.directory", ".");
    c.output.prefix = r.text("output.prefix", to_string(c.analysis.type));
    if (c.output.prefix.find('/') != std::string::npos) r.fail("output.prefix", "must not contain '/'");

    // Output placement does not affect results, so it stays out of the hash.
    std::string canonical;
    for (const auto& [key, entry] : entries) {
        if (!key.starts_with("output.")) canonical += key + "=" + entry.value + "\n";
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
    c.hash = hex;
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path.string(), 0, "");
    return parse_config(f);
}

}  // namespace varbif::cli
