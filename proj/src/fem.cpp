#include "varbif/fem.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace varbif {

namespace {

enum Blocks : unsigned { principal = 1u, lower_order = 2u, all_blocks = 3u };

struct ElementGeometry {
    double area;
    Eigen::Matrix<double, 3, 2> grad;  // rows: gradients of the barycentric coordinates
    Eigen::Matrix<double, 3, 2> corners;
};

ElementGeometry geometry(const Mesh& mesh, int triangle) {
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(triangle)];
    ElementGeometry g;
    for (int a = 0; a < 3; ++a) g.corners.row(a) = mesh.vertices()[static_cast<std::size_t>(tri[a])].transpose();
    const Eigen::Vector2d e1 = (g.corners.row(1) - g.corners.row(0)).transpose();
    const Eigen::Vector2d e2 = (g.corners.row(2) - g.corners.row(0)).transpose();
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    g.area = 0.5 * det;
    // Columns of J^{-T} give the gradients of lambda_1 and lambda_2.
    g.grad.row(1) = Eigen::RowVector2d(e2.y(), -e2.x()) / det;
    g.grad.row(2) = Eigen::RowVector2d(-e1.y(), e1.x()) / det;
    g.grad.row(0) = -(g.grad.row(1) + g.grad.row(2));
    return g;
}

struct ElementContribution {
    double energy = 0.0;
    Eigen::VectorXd residual;
    Eigen::MatrixXd hessian;
};

enum class Want { energy, residual, hessian };

/// Local element quantities ordered (corner a, component i) -> a N + i.
ElementContribution element_kernel(const FemSpace& space, const LagrangianModel& model, const Eigen::VectorXd& nodal,
                                   int triangle, Want want, unsigned blocks) {
    const Mesh& mesh = space.mesh();
    const int n = space.components();
    const auto& tri = mesh.triangles()[static_cast<std::size_t>(triangle)];
    const ElementGeometry g = geometry(mesh, triangle);

    Eigen::MatrixXd local(3, n);
    for (int a = 0; a < 3; ++a) local.row(a) = nodal.segment(static_cast<Eigen::Index>(tri[a]) * n, n).transpose();
    const Eigen::MatrixXd p = local.transpose() * g.grad;  // N x 2, constant on the element

    ElementContribution out;
    if (want == Want::residual) out.residual = Eigen::VectorXd::Zero(3 * n);
    if (want == Want::hessian) out.hessian = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    const DerivativeOrder order = want == Want::energy     ? DerivativeOrder::value
                                  : want == Want::residual ? DerivativeOrder::first
                                                           : DerivativeOrder::second;

    const auto& rule = space.quadrature();
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const Eigen::Vector3d& lambda = rule.points[q];
        const double w = rule.weights[q] * g.area;
        const Point2 x = g.corners.transpose() * lambda;
        const Eigen::VectorXd u = local.transpose() * lambda;
        const PointDerivatives d = model.evaluate(x, u, p, order);

        if (want == Want::energy) {
            out.energy += w * d.value;
            continue;
        }
        if (want == Want::residual) {
            for (int a = 0; a < 3; ++a) {
                for (int i = 0; i < n; ++i) {
                    out.residual(a * n + i) += w * (d.grad_u(i) * lambda(a) + d.grad_p.row(i).dot(g.grad.row(a)));
                }
            }
            continue;
        }
        for (int a = 0; a < 3; ++a) {
            for (int i = 0; i < n; ++i) {
                for (int b = 0; b < 3; ++b) {
                    for (int j = 0; j < n; ++j) {
                        double v = 0.0;
                        if (blocks & principal) {
                            for (int mu = 0; mu < 2; ++mu) {
                                for (int nu = 0; nu < 2; ++nu) {
                                    v += d.hess_pp(2 * i + mu, 2 * j + nu) * g.grad(a, mu) * g.grad(b, nu);
                                }
                            }
                        }
                        if (blocks & lower_order) {
                            v += d.hess_uu(i, j) * lambda(a) * lambda(b);
                            for (int nu = 0; nu < 2; ++nu) {
                                v += d.hess_up(i, 2 * j + nu) * lambda(a) * g.grad(b, nu);
                                v += d.hess_up(j, 2 * i + nu) * g.grad(a, nu) * lambda(b);
                            }
                        }
                        out.hessian(a * n + i, b * n + j) += w * v;
                    }
                }
            }
        }
    }
    return out;
}

std::vector<ElementContribution> run_elements(const FemSpace& space, const LagrangianModel& model, const Field& u,
                                              Want want, unsigned blocks, const AssemblyOptions& options) {
    if (u.size() != space.dof_count()) {
        throw std::invalid_argument("assembly: field length " + std::to_string(u.size()) +
                                    " does not match dof_count " + std::to_string(space.dof_count()));
    }
    if (model.components() != space.components()) {
        throw std::invalid_argument("assembly: model and space have different component counts");
    }
    const Eigen::VectorXd nodal = vertex_values(space, u).transpose().reshaped();
    const int count = space.mesh().triangle_count();
    std::vector<ElementContribution> results(static_cast<std::size_t>(count));
    const int workers = std::clamp(options.workers, 1, std::max(1, count));

    auto work = [&](int begin, int end) {
        for (int k = begin; k < end; ++k) {
            results[static_cast<std::size_t>(k)] = element_kernel(space, model, nodal, k, want, blocks);
        }
    };
    if (workers == 1) {
        work(0, count);
    } else {
        std::vector<std::jthread> pool;
        const int chunk = (count + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(count, begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
    }
    return results;
}

std::vector<int> local_dofs(const FemSpace& space, int triangle) {
    const int n = space.components();
    const auto& tri = space.mesh().triangles()[static_cast<std::size_t>(triangle)];
    std::vector<int> dofs(static_cast<std::size_t>(3 * n));
    for (int a = 0; a < 3; ++a) {
        for (int i = 0; i < n; ++i) dofs[static_cast<std::size_t>(a * n + i)] = space.dof(tri[a], i);
    }
    return dofs;
}

SymmetricOperator symmetrized(SparseMatrix m, std::string label) {
    const SparseMatrix mt = m.transpose();
    const double norm = m.norm();
    const double correction = 0.5 * SparseMatrix(m - mt).norm();
    if (correction > 1e-10 * std::max(norm, 1e-300)) {
        throw std::runtime_error("assembly: " + label + " asymmetry " + std::to_string(correction) +
                                 " exceeds 1e-10 of its norm");
    }
    SparseMatrix sym = 0.5 * (m + mt);
    sym.makeCompressed();
    return SymmetricOperator{std::move(sym), std::move(label)};
}

SymmetricOperator hessian_blocks(const FemSpace& space, const LagrangianModel& model, const Field& u, unsigned blocks,
                                 std::string label, const AssemblyOptions& options) {
    const auto elements = run_elements(space, model, u, Want::hessian, blocks, options);
    std::vector<Eigen::Triplet<double>> triplets;
    const int n = space.components();
    triplets.reserve(elements.size() * static_cast<std::size_t>(9 * n * n));
    for (int k = 0; k < static_cast<int>(elements.size()); ++k) {
        const auto dofs = local_dofs(space, k);
        const auto& h = elements[static_cast<std::size_t>(k)].hessian;
        for (int r = 0; r < 3 * n; ++r) {
            const int row = dofs[static_cast<std::size_t>(r)];
            if (row < 0) continue;
            for (int c = 0; c < 3 * n; ++c) {
                const int col = dofs[static_cast<std::size_t>(c)];
                if (col < 0) continue;
                triplets.emplace_back(row, col, h(r, c));
            }
        }
    }
    SparseMatrix m(space.dof_count(), space.dof_count());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return symmetrized(std::move(m), std::move(label));
}

}  // namespace

QuadratureRule triangle_quadrature(int order) {
    QuadratureRule rule;
    if (order == 2) {
        rule.degree = 2;
        const double a = 2.0 / 3.0, b = 1.0 / 6.0;
        rule.points = {{a, b, b}, {b, a, b}, {b, b, a}};
        rule.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        return rule;
    }
    if (order == 3 || order == 4) {
        rule.degree = 4;
        const double a = 0.44594849091596488632, wa = 0.22338158967801146570;
        const double b = 0.09157621350977074346, wb = 0.10995174365532186764;
        rule.points = {{a, a, 1 - 2 * a}, {a, 1 - 2 * a, a}, {1 - 2 * a, a, a},
                       {b, b, 1 - 2 * b}, {b, 1 - 2 * b, b}, {1 - 2 * b, b, b}};
        rule.weights = {wa, wa, wa, wb, wb, wb};
        return rule;
    }
    throw std::invalid_argument("triangle_quadrature: order must be 2, 3 or 4");
}

FemSpace::FemSpace(std::shared_ptr<const Mesh> mesh, int components, int quadrature_order)
    : mesh_(std::move(mesh)), components_(components), quadrature_(triangle_quadrature(quadrature_order)) {
    if (!mesh_) throw std::invalid_argument("FemSpace: null mesh");
    if (components_ < 1) throw std::invalid_argument("FemSpace: components must be >= 1");
    if (!mesh_->is_conforming()) throw std::invalid_argument("FemSpace: mesh is not conforming");
    if (mesh_->interior_vertex_count() == 0) {
        throw std::invalid_argument("FemSpace: degenerate space, mesh has no interior vertex");
    }
    dof_of_vertex_.assign(static_cast<std::size_t>(mesh_->vertex_count() * components_), -1);
    for (int v = 0; v < mesh_->vertex_count(); ++v) {
        if (mesh_->is_boundary(v)) continue;
        for (int i = 0; i < components_; ++i) {
            dof_of_vertex_[static_cast<std::size_t>(v * components_ + i)] = static_cast<int>(free_dofs_.size());
            free_dofs_.push_back({v, i});
        }
    }
}

FemSpace build_space(const Mesh& mesh, int components, int quadrature_order) {
    return FemSpace(std::make_shared<const Mesh>(mesh), components, quadrature_order);
}

SymmetricOperator assemble_h_gram(const FemSpace& space, const AssemblyOptions& options) {
    const Field zero = Field::Zero(space.dof_count());
    return hessian_blocks(space, make_dirichlet_energy(space.components()), zero, principal, "h_gram", options);
}

SymmetricOperator assemble_mass(const FemSpace& space, const AssemblyOptions& options) {
    auto op = assemble_constraint_hessian(space, make_constraint_half_usq(space.components()),
                                          Field::Zero(space.dof_count()), options);
    op.label = "mass";
    return op;
}

SymmetricOperator assemble_unconstrained_mass(const FemSpace& space) {
    const Mesh& mesh = space.mesh();
    const int n = space.components();
    std::vector<Eigen::Triplet<double>> triplets;
    for (int k = 0; k < mesh.triangle_count(); ++k) {
        const auto& tri = mesh.triangles()[static_cast<std::size_t>(k)];
        const double area = mesh.signed_area(k);
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                const double v = area * (a == b ? 2.0 : 1.0) / 12.0;
                for (int i = 0; i < n; ++i) triplets.emplace_back(tri[a] * n + i, tri[b] * n + i, v);
            }
        }
    }
    const int size = mesh.vertex_count() * n;
    SparseMatrix m(size, size);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return SymmetricOperator{std::move(m), "mass_unconstrained"};
}

double assemble_energy(const FemSpace& space, const LagrangianModel& model, const Field& u,
                       const AssemblyOptions& options) {
    const auto elements = run_elements(space, model, u, Want::energy, all_blocks, options);
    double total = 0.0;
    for (const auto& e : elements) total += e.energy;
    return total;
}

Eigen::VectorXd assemble_residual(const FemSpace& space, const LagrangianModel& model, const Field& u,
                                  const AssemblyOptions& options) {
    const auto elements = run_elements(space, model, u, Want::residual, all_blocks, options);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(space.dof_count());
    for (int k = 0; k < static_cast<int>(elements.size()); ++k) {
        const auto dofs = local_dofs(space, k);
        const auto& local = elements[static_cast<std::size_t>(k)].residual;
        for (std::size_t a = 0; a < dofs.size(); ++a) {
            if (dofs[a] >= 0) r(dofs[a]) += local(static_cast<Eigen::Index>(a));
        }
    }
    return r;
}

SymmetricOperator assemble_hessian(const FemSpace& space, const LagrangianModel& model, const Field& u,
                                   const AssemblyOptions& options) {
    return hessian_blocks(space, model, u, all_blocks, "hessian", options);
}

PQSplit assemble_pq_split(const FemSpace& space, const LagrangianModel& model, const Field& u,
                          const AssemblyOptions& options) {
    return PQSplit{hessian_blocks(space, model, u, principal, "P", options),
                   hessian_blocks(space, model, u, lower_order, "Q", options)};
}

double assemble_constraint_value(const FemSpace& space, const ConstraintModel& constraint, const Field& u,
                                 const AssemblyOptions& options) {
    return assemble_energy(space, constraint.lift(), u, options);
}

Eigen::VectorXd assemble_constraint_gradient(const FemSpace& space, const ConstraintModel& constraint, const Field& u,
                                             const AssemblyOptions& options) {
    return assemble_residual(space, constraint.lift(), u, options);
}

SymmetricOperator assemble_constraint_hessian(const FemSpace& space, const ConstraintModel& constraint,
                                              const Field& u, const AssemblyOptions& options) {
    return hessian_blocks(space, constraint.lift(), u, lower_order, "constraint_hessian", options);
}

Field interpolate(const FemSpace& space, const std::function<Eigen::VectorXd(const Point2&)>& f) {
    Field u(space.dof_count());
    std::vector<Eigen::VectorXd> cache(static_cast<std::size_t>(space.mesh().vertex_count()));
    for (int d = 0; d < space.dof_count(); ++d) {
        const auto [v, i] = space.free_dofs()[static_cast<std::size_t>(d)];
        auto& value = cache[static_cast<std::size_t>(v)];
        if (value.size() == 0) value = f(space.mesh().vertices()[static_cast<std::size_t>(v)]);
        u(d) = value(i);
    }
    return u;
}

Eigen::MatrixXd vertex_values(const FemSpace& space, const Field& u) {
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(space.mesh().vertex_count(), space.components());
    for (int d = 0; d < space.dof_count(); ++d) {
        const auto [v, i] = space.free_dofs()[static_cast<std::size_t>(d)];
        values(v, i) = u(d);
    }
    return values;
}

double h_norm(const SymmetricOperator& h_gram, const Field& u) { return std::sqrt(u.dot(h_gram.matrix * u)); }

void write_coordinate(std::ostream& out, const SymmetricOperator& op) {
    const auto old_precision = out.precision(17);
    for (int col = 0; col < op.matrix.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(op.matrix, col); it; ++it) {
            if (it.row() >= it.col()) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
        }
    }
    out.precision(old_precision);
}

}  // namespace varbif
