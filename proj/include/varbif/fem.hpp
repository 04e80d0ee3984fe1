#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "varbif/lagrangian.hpp"
#include "varbif/mesh.hpp"

namespace varbif {

using SparseMatrix = Eigen::SparseMatrix<double>;
/// Coefficients on the free (interior) dofs of a FemSpace.
using Field = Eigen::VectorXd;

/// Triangle rule in barycentric coordinates; weights sum to one and are
/// multiplied by the triangle area.
struct QuadratureRule {
    int degree = 0;
    std::vector<Eigen::Vector3d> points;
    std::vector<double> weights;
};

/// order 2: three-point rule exact for quadratics; orders 3 and 4: six-point rule.
QuadratureRule triangle_quadrature(int order);

struct DofKey {
    int vertex;
    int component;
};

/// Vector-valued P1 space with homogeneous Dirichlet conditions imposed by
/// eliminating boundary vertices.
class FemSpace {
public:
    FemSpace(std::shared_ptr<const Mesh> mesh, int components, int quadrature_order = 2);

    const Mesh& mesh() const { return *mesh_; }
    int components() const { return components_; }
    int dof_count() const { return static_cast<int>(free_dofs_.size()); }
    const std::vector<DofKey>& free_dofs() const { return free_dofs_; }
    const QuadratureRule& quadrature() const { return quadrature_; }

    /// Free-dof index of (vertex, component), or -1 on the boundary.
    int dof(int vertex, int component) const {
        return dof_of_vertex_[static_cast<std::size_t>(vertex * components_ + component)];
    }

private:
    std::shared_ptr<const Mesh> mesh_;
    int components_;
    QuadratureRule quadrature_;
    std::vector<DofKey> free_dofs_;
    std::vector<int> dof_of_vertex_;
};

FemSpace build_space(const Mesh& mesh, int components, int quadrature_order = 2);

struct SymmetricOperator {
    SparseMatrix matrix;
    std::string label;

    int dimension() const { return static_cast<int>(matrix.rows()); }
};

/// Element loops run on `workers` threads; contributions are reduced in
/// triangle order, so results are bitwise independent of the worker count.
struct AssemblyOptions {
    int workers = 1;
};

/// Gram matrix of (u, v)_H = sum_i int Du^i . Dv^i.
SymmetricOperator assemble_h_gram(const FemSpace& space, const AssemblyOptions& options = {});
/// Discrete Hessian of K = 1/2 |u|^2 on free dofs.
SymmetricOperator assemble_mass(const FemSpace& space, const AssemblyOptions& options = {});
/// Mass matrix over every vertex dof, boundary included.
SymmetricOperator assemble_unconstrained_mass(const FemSpace& space);

double assemble_energy(const FemSpace& space, const LagrangianModel& model, const Field& u,
                       const AssemblyOptions& options = {});
/// Entries <F'(u_h), phi_j> over the free basis functions.
Eigen::VectorXd assemble_residual(const FemSpace& space, const LagrangianModel& model, const Field& u,
                                  const AssemblyOptions& options = {});
SymmetricOperator assemble_hessian(const FemSpace& space, const LagrangianModel& model, const Field& u,
                                   const AssemblyOptions& options = {});

/// P: principal (gradient-gradient) block; Q: every lower-order block.
struct PQSplit {
    SymmetricOperator p;
    SymmetricOperator q;
};
PQSplit assemble_pq_split(const FemSpace& space, const LagrangianModel& model, const Field& u,
                          const AssemblyOptions& options = {});

double assemble_constraint_value(const FemSpace& space, const ConstraintModel& constraint, const Field& u,
                                 const AssemblyOptions& options = {});
Eigen::VectorXd assemble_constraint_gradient(const FemSpace& space, const ConstraintModel& constraint,
                                             const Field& u, const AssemblyOptions& options = {});
SymmetricOperator assemble_constraint_hessian(const FemSpace& space, const ConstraintModel& constraint,
                                              const Field& u, const AssemblyOptions& options = {});

/// Nodal interpolant of f restricted to the free dofs.
Field interpolate(const FemSpace& space, const std::function<Eigen::VectorXd(const Point2&)>& f);
/// vertex_count x N table of nodal values, zero on the boundary.
Eigen::MatrixXd vertex_values(const FemSpace& space, const Field& u);

/// sqrt(u^T G u) for the H Gram matrix G.
double h_norm(const SymmetricOperator& h_gram, const Field& u);

/// `row col value` per stored entry of the lower triangle.
void write_coordinate(std::ostream& out, const SymmetricOperator& op);

}  // namespace varbif
