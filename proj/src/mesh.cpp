#include "varbif/mesh.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace varbif {

namespace {

std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

std::unordered_map<std::uint64_t, int> edge_counts(const std::vector<Triangle>& triangles) {
    std::unordered_map<std::uint64_t, int> counts;
    counts.reserve(triangles.size() * 3);
    for (const auto& tri : triangles) {
        for (int e = 0; e < 3; ++e) ++counts[edge_key(tri[e], tri[(e + 1) % 3])];
    }
    return counts;
}

}  // namespace

const char* to_string(DomainTag tag) {
    switch (tag) {
        case DomainTag::disk: return "disk";
        case DomainTag::square: return "square";
        case DomainTag::polygon: return "polygon";
    }
    return "unknown";
}

Mesh::Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles,
           std::vector<bool> boundary, DomainTag tag)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)),
      boundary_(std::move(boundary)), tag_(tag) {
    if (boundary_.size() != vertices_.size()) {
        throw std::invalid_argument("mesh: boundary flags and vertices differ in length");
    }
    const int n = vertex_count();
    for (std::size_t k = 0; k < triangles_.size(); ++k) {
        for (int v : triangles_[k]) {
            if (v < 0 || v >= n) {
                throw std::invalid_argument("mesh: triangle " + std::to_string(k) +
                                            " references vertex " + std::to_string(v));
            }
        }
        if (!(signed_area(static_cast<int>(k)) > 0.0)) {
            throw std::invalid_argument("mesh: triangle " + std::to_string(k) +
                                        " has non-positive signed area");
        }
    }
}

int Mesh::boundary_vertex_count() const {
    int count = 0;
    for (bool b : boundary_) count += b ? 1 : 0;
    return count;
}

double Mesh::signed_area(int triangle) const {
    const auto& tri = triangles_[static_cast<std::size_t>(triangle)];
    const Point2& a = vertices_[static_cast<std::size_t>(tri[0])];
    const Point2& b = vertices_[static_cast<std::size_t>(tri[1])];
    const Point2& c = vertices_[static_cast<std::size_t>(tri[2])];
    return 0.5 * cross(b - a, c - a);
}

double Mesh::area() const {
    double total = 0.0;
    for (int k = 0; k < triangle_count(); ++k) total += signed_area(k);
    return total;
}

double Mesh::max_edge_length() const {
    double longest = 0.0;
    for (const auto& tri : triangles_) {
        for (int e = 0; e < 3; ++e) {
            const Point2 d = vertices_[static_cast<std::size_t>(tri[e])] -
                             vertices_[static_cast<std::size_t>(tri[(e + 1) % 3])];
            longest = std::max(longest, d.norm());
        }
    }
    return longest;
}

bool Mesh::is_conforming() const {
    for (const auto& [key, count] : edge_counts(triangles_)) {
        if (count > 2) return false;
        if (count == 1) {
            const int a = static_cast<int>(key & 0xffffffffu);
            const int b = static_cast<int>(key >> 32);
            if (!is_boundary(a) || !is_boundary(b)) return false;
        }
    }
    return true;
}

Mesh generate_square_mesh(double side_length, int divisions_per_side) {
    if (!(side_length > 0.0)) throw std::invalid_argument("square mesh: side_length must be positive");
    if (divisions_per_side < 1) throw std::invalid_argument("square mesh: divisions_per_side must be >= 1");

    const int n = divisions_per_side;
    const double h = side_length / n;
    const double origin = -0.5 * side_length;
    std::vector<Point2> vertices;
    std::vector<bool> boundary;
    vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            // Endpoints are placed exactly so the boundary lies on the square.
            const double x = (i == n) ? -origin : origin + i * h;
            const double y = (j == n) ? -origin : origin + j * h;
            vertices.emplace_back(x, y);
            boundary.push_back(i == 0 || j == 0 || i == n || j == n);
        }
    }
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<Triangle> triangles;
    triangles.reserve(static_cast<std::size_t>(2 * n * n));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
            if ((i + j) % 2 == 0) {
                triangles.push_back({v00, v10, v11});
                triangles.push_back({v00, v11, v01});
            } else {
                triangles.push_back({v00, v10, v01});
                triangles.push_back({v10, v11, v01});
            }
        }
    }
    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary), DomainTag::square);
}

Mesh refine_uniform(const Mesh& mesh) {
    const auto counts = edge_counts(mesh.triangles());
    std::vector<Point2> vertices = mesh.vertices();
    std::vector<bool> boundary = mesh.boundary();
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(counts.size());

    auto midpoint_of = [&](int a, int b) {
        const auto key = edge_key(a, b);
        if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
        const Point2& pa = vertices[static_cast<std::size_t>(a)];
        const Point2& pb = vertices[static_cast<std::size_t>(b)];
        Point2 m = 0.5 * (pa + pb);
        const bool on_boundary = counts.at(key) == 1;
        if (on_boundary && mesh.domain_tag() == DomainTag::disk) {
            const double radius = 0.5 * (pa.norm() + pb.norm());
            m *= radius / m.norm();
        }
        const int index = static_cast<int>(vertices.size());
        vertices.push_back(m);
        boundary.push_back(on_boundary);
        midpoint.emplace(key, index);
        return index;
    };

    std::vector<Triangle> triangles;
    triangles.reserve(mesh.triangles().size() * 4);
    for (const auto& tri : mesh.triangles()) {
        const int a = tri[0], b = tri[1], c = tri[2];
        const int ab = midpoint_of(a, b), bc = midpoint_of(b, c), ca = midpoint_of(c, a);
        triangles.push_back({a, ab, ca});
        triangles.push_back({ab, b, bc});
        triangles.push_back({ca, bc, c});
        triangles.push_back({ab, bc, ca});
    }
    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary), mesh.domain_tag());
}

Mesh generate_disk_mesh(double radius, int refinement_level) {
    if (!(radius > 0.0)) throw std::invalid_argument("disk mesh: radius must be positive");
    if (refinement_level < 0) throw std::invalid_argument("disk mesh: refinement_level must be >= 0");

    std::vector<Point2> vertices{Point2::Zero()};
    std::vector<bool> boundary{false};
    for (int k = 0; k < 6; ++k) {
        const double angle = k * std::numbers::pi / 3.0;
        vertices.emplace_back(radius * std::cos(angle), radius * std::sin(angle));
        boundary.push_back(true);
    }
    std::vector<Triangle> triangles;
    for (int k = 0; k < 6; ++k) triangles.push_back({0, k + 1, (k + 1) % 6 + 1});

    Mesh mesh(std::move(vertices), std::move(triangles), std::move(boundary), DomainTag::disk);
    for (int level = 0; level < refinement_level; ++level) mesh = refine_uniform(mesh);
    return mesh;
}

Mesh generate_polygon_mesh(std::span<const Point2> polygon, int refinement_level) {
    if (polygon.size() < 3) throw std::invalid_argument("polygon mesh: need at least 3 vertices");
    if (refinement_level < 0) throw std::invalid_argument("polygon mesh: refinement_level must be >= 0");

    const std::size_t n = polygon.size();
    double winding = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const Point2& a = polygon[k];
        const Point2& b = polygon[(k + 1) % n];
        if (!(cross(a, b) > 0.0)) {
            throw std::invalid_argument(
                "polygon mesh: polygon must be counter-clockwise and strictly star-shaped "
                "with respect to the origin (edge " + std::to_string(k) + ")");
        }
        winding += std::atan2(cross(a, b), a.dot(b));
    }
    if (std::abs(winding - 2.0 * std::numbers::pi) > 1e-9) {
        throw std::invalid_argument("polygon mesh: polygon winds around the origin more than once");
    }

    std::vector<Point2> vertices{Point2::Zero()};
    std::vector<bool> boundary{false};
    for (const auto& p : polygon) {
        vertices.push_back(p);
        boundary.push_back(true);
    }
    std::vector<Triangle> triangles;
    for (std::size_t k = 0; k < n; ++k) {
        triangles.push_back({0, static_cast<int>(k + 1), static_cast<int>((k + 1) % n + 1)});
    }
    Mesh mesh(std::move(vertices), std::move(triangles), std::move(boundary), DomainTag::polygon);
    for (int level = 0; level < refinement_level; ++level) mesh = refine_uniform(mesh);
    return mesh;
}

Mesh scale_mesh(const Mesh& mesh, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("scale_mesh: t must be positive");
    std::vector<Point2> vertices = mesh.vertices();
    for (auto& v : vertices) v *= t;
    return Mesh(std::move(vertices), mesh.triangles(), mesh.boundary(), mesh.domain_tag());
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
    const auto old_precision = out.precision(17);
    out << "vertices " << mesh.vertex_count() << " triangles " << mesh.triangle_count() << '\n';
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        const auto& p = mesh.vertices()[static_cast<std::size_t>(v)];
        out << p.x() << ' ' << p.y() << ' ' << (mesh.is_boundary(v) ? 1 : 0) << '\n';
    }
    for (const auto& tri : mesh.triangles()) out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << '\n';
    out.precision(old_precision);
}

Mesh read_mesh(std::istream& in, DomainTag tag) {
    // Leading `#` lines are comments.
    while (in >> std::ws && in.peek() == '#') in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    std::string word_vertices, word_triangles;
    long long nv = -1, nt = -1;
    if (!(in >> word_vertices >> nv >> word_triangles >> nt) || word_vertices != "vertices" ||
        word_triangles != "triangles" || nv < 0 || nt < 0) {
        throw std::invalid_argument("read_mesh: malformed header");
    }
    std::vector<Point2> vertices(static_cast<std::size_t>(nv));
    std::vector<bool> boundary(static_cast<std::size_t>(nv));
    for (long long v = 0; v < nv; ++v) {
        double x = 0, y = 0;
        int flag = 0;
        if (!(in >> x >> y >> flag) || (flag != 0 && flag != 1)) {
            throw std::invalid_argument("read_mesh: malformed vertex line " + std::to_string(v));
        }
        vertices[static_cast<std::size_t>(v)] = Point2(x, y);
        boundary[static_cast<std::size_t>(v)] = flag == 1;
    }
    std::vector<Triangle> triangles(static_cast<std::size_t>(nt));
    for (long long k = 0; k < nt; ++k) {
        auto& tri = triangles[static_cast<std::size_t>(k)];
        if (!(in >> tri[0] >> tri[1] >> tri[2])) {
            throw std::invalid_argument("read_mesh: malformed triangle line " + std::to_string(k));
        }
    }
    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary), tag);
}

}  // namespace varbif
