#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace varbif {

using Point2 = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

enum class DomainTag { disk, square, polygon };

const char* to_string(DomainTag tag);

/// Conforming planar triangulation with a marked Dirichlet boundary.
///
/// Vertices and triangles are zero-based and fixed after construction.
/// Triangles are stored counter-clockwise. Every domain the toolkit
/// generates contains the origin in its interior and is star-shaped about
/// it, so the scaling x -> t x maps the domain onto a similar one.
class Mesh {
public:
    Mesh(std::vector<Point2> vertices, std::vector<Triangle> triangles,
         std::vector<bool> boundary, DomainTag tag);

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<bool>& boundary() const { return boundary_; }
    DomainTag domain_tag() const { return tag_; }

    int vertex_count() const { return static_cast<int>(vertices_.size()); }
    int triangle_count() const { return static_cast<int>(triangles_.size()); }
    int boundary_vertex_count() const;
    int interior_vertex_count() const { return vertex_count() - boundary_vertex_count(); }
    bool is_boundary(int v) const { return boundary_[static_cast<std::size_t>(v)]; }

    double signed_area(int triangle) const;
    double area() const;
    double max_edge_length() const;

    /// Every interior edge is shared by exactly two triangles, every boundary
    /// edge belongs to one, and boundary edges join boundary vertices.
    bool is_conforming() const;

private:
    std::vector<Point2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<bool> boundary_;
    DomainTag tag_;
};

/// Structured mesh of [-L/2, L/2]^2 with 2 n^2 triangles.
///
/// Cell diagonals alternate in a checkerboard pattern, so for even n the
/// triangulation carries the full symmetry group of the square.
Mesh generate_square_mesh(double side_length, int divisions_per_side);

/// Six-triangle fan around the origin, quadrisected `refinement_level`
/// times with new boundary vertices projected radially onto the circle.
Mesh generate_disk_mesh(double radius, int refinement_level);

/// Fan triangulation of a polygon from the origin, then quadrisected.
/// Throws std::invalid_argument unless the polygon is counter-clockwise and
/// strictly star-shaped with respect to the origin.
Mesh generate_polygon_mesh(std::span<const Point2> polygon, int refinement_level);

/// Split every triangle into four through its edge midpoints.
Mesh refine_uniform(const Mesh& mesh);

/// Image of the mesh under x -> t x.
Mesh scale_mesh(const Mesh& mesh, double t);

/// Plain-text format: `vertices N triangles M`, N lines `x y boundary_flag`,
/// M lines `i j k`. `read_mesh` skips leading `#` comment lines.
void write_mesh(std::ostream& out, const Mesh& mesh);
Mesh read_mesh(std::istream& in, DomainTag tag = DomainTag::polygon);

}  // namespace varbif
