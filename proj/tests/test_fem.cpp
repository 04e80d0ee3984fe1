#include <doctest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "support.hpp"
#include "varbif/fem.hpp"
#include "varbif/spectrum.hpp"

using namespace varbif;

namespace {

FemSpace square_space(int divisions, int components = 1, int order = 2) {
    return FemSpace(std::make_shared<const Mesh>(generate_square_mesh(1.0, divisions)), components, order);
}

FemSpace disk_space(int level, int components = 1, int order = 2) {
    return FemSpace(std::make_shared<const Mesh>(generate_disk_mesh(1.0, level)), components, order);
}

double max_abs(const SparseMatrix& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    }
    return out;
}

double relative_difference(const SparseMatrix& a, const SparseMatrix& b) {
    return max_abs(a - b) / std::max(max_abs(b), 1e-300);
}

bool bitwise_equal(const SparseMatrix& a, const SparseMatrix& b) {
    const Eigen::MatrixXd da(a);
    const Eigen::MatrixXd db(b);
    return da.rows() == db.rows() && da.cols() == db.cols() && (da.array() == db.array()).all();
}

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

TEST_CASE("dof counts") {
    CHECK(square_space(2).dof_count() == 1);
    CHECK(square_space(4).dof_count() == 9);
    CHECK(square_space(4, 2).dof_count() == 18);
    const FemSpace disk = disk_space(3, 2);
    CHECK(disk.dof_count() == 2 * disk.mesh().interior_vertex_count());
    for (const auto& key : disk.free_dofs()) CHECK_FALSE(disk.mesh().is_boundary(key.vertex));
    for (int v = 0; v < disk.mesh().vertex_count(); ++v) {
        if (disk.mesh().is_boundary(v)) CHECK(disk.dof(v, 1) == -1);
    }
}

TEST_CASE("degenerate space") {
    CHECK_THROWS_AS(square_space(1), std::invalid_argument);
    CHECK_THROWS_AS(square_space(2, 0), std::invalid_argument);
    CHECK_THROWS_AS(square_space(2, 1, 5), std::invalid_argument);
}

TEST_CASE("quadrature exactness") {
    for (int order : {2, 3, 4}) {
        const QuadratureRule rule = triangle_quadrature(order);
        CAPTURE(order);
        double total = 0.0;
        for (double w : rule.weights) total += w;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
        // Normalized reference integral of l1^a l2^b l3^c.
        for (int a = 0; a <= rule.degree; ++a) {
            for (int b = 0; a + b <= rule.degree; ++b) {
                for (int c = 0; a + b + c <= rule.degree; ++c) {
                    double sum = 0.0;
                    for (std::size_t q = 0; q < rule.points.size(); ++q) {
                        const auto& l = rule.points[q];
                        sum += rule.weights[q] * std::pow(l(0), a) * std::pow(l(1), b) * std::pow(l(2), c);
                    }
                    const double exact = 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
                    CHECK(sum == doctest::Approx(exact).epsilon(1e-13));
                }
            }
        }
    }
}

TEST_CASE("dirichlet energy hessian is the H gram") {
    const FemSpace space = disk_space(3);
    const auto model = make_dirichlet_energy(1);
    const auto gram = assemble_h_gram(space);
    for (unsigned seed : {1u, 2u}) {
        const Field u = test_support::random_field(space, seed, 3.0);
        CHECK(relative_difference(assemble_hessian(space, model, u).matrix, gram.matrix) <= 1e-12);
        const Eigen::VectorXd r = assemble_residual(space, model, u);
        CHECK((r - gram.matrix * u).norm() <= 1e-12 * (gram.matrix * u).norm());
        CHECK(assemble_energy(space, model, u) == doctest::Approx(0.5 * u.dot(gram.matrix * u)).epsilon(1e-12));
    }
}

TEST_CASE("two component gram is block diagonal") {
    const FemSpace scalar = square_space(6);
    const FemSpace vector = square_space(6, 2);
    const Eigen::MatrixXd g1(assemble_h_gram(scalar).matrix);
    const Eigen::MatrixXd g2(assemble_h_gram(vector).matrix);
    const Eigen::MatrixXd m2(assemble_mass(vector).matrix);
    const Eigen::MatrixXd m1(assemble_mass(scalar).matrix);
    for (int i = 0; i < vector.dof_count(); ++i) {
        for (int j = 0; j < vector.dof_count(); ++j) {
            const auto& a = vector.free_dofs()[static_cast<std::size_t>(i)];
            const auto& b = vector.free_dofs()[static_cast<std::size_t>(j)];
            const double g = a.component == b.component ? g1(scalar.dof(a.vertex, 0), scalar.dof(b.vertex, 0)) : 0.0;
            const double m = a.component == b.component ? m1(scalar.dof(a.vertex, 0), scalar.dof(b.vertex, 0)) : 0.0;
            CHECK(g2(i, j) == g);
            CHECK(m2(i, j) == m);
        }
    }
}

TEST_CASE("one interior vertex by hand") {
    // Stiffness of the centre hat on a uniform right-triangle mesh is 4 for
    // either diagonal orientation, so the hat has energy 2.
    const FemSpace space = square_space(2);
    const Field hat = Field::Ones(1);
    const auto gram = assemble_h_gram(space);
    CHECK(gram.matrix.coeff(0, 0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(assemble_energy(space, make_dirichlet_energy(1), hat) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(assemble_energy(space, make_dirichlet_energy(1), Field::Zero(1)) == 0.0);
}

TEST_CASE("square fundamental tone") {
    const FemSpace space = square_space(32);
    const auto pairs = lowest_eigenpairs(assemble_h_gram(space), assemble_mass(space), 1);
    const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
    CHECK(std::abs(pairs.values[0] - exact) / exact < 0.01);
    CHECK(pairs.values[0] > exact);
}

TEST_CASE("disk tones and mass") {
    const FemSpace space = disk_space(5);
    const auto gram = assemble_h_gram(space);
    const auto mass = assemble_mass(space);
    const auto pairs = lowest_eigenpairs(gram, mass, 3);
    const double j01 = 2.404825557695773;
    const double j11 = 3.831705970207512;
    CHECK(std::abs(pairs.values[0] - j01 * j01) / (j01 * j01) < 0.01);
    CHECK(std::abs(pairs.values[1] - j11 * j11) / (j11 * j11) < 0.01);
    CHECK(std::abs(pairs.values[2] - j11 * j11) / (j11 * j11) < 0.01);

    const SparseMatrix full = assemble_unconstrained_mass(space).matrix;
    CHECK(full.sum() == doctest::Approx(space.mesh().area()).epsilon(1e-12));
    const Field zero = Field::Zero(space.dof_count());
    CHECK(zero.dot(mass.matrix * zero) == 0.0);
}

TEST_CASE("mean curvature energy at zero is the area") {
    const FemSpace space = disk_space(3);
    const Field zero = Field::Zero(space.dof_count());
    CHECK(assemble_energy(space, make_mean_curvature(0.0), zero) == doctest::Approx(space.mesh().area()).epsilon(1e-13));
    CHECK(assemble_residual(space, make_mean_curvature(0.0), zero).norm() == 0.0);
}

TEST_CASE("finite difference consistency") {
    const FemSpace scalar = disk_space(3);
    const FemSpace pair = square_space(5, 2, 4);
    struct Case {
        const FemSpace* space;
        LagrangianModel model;
    };
    const std::vector<Case> cases{{&scalar, make_mean_curvature(0.0)},
                                  {&scalar, make_mean_curvature(0.8)},
                                  {&scalar, make_quasilinear_demo(1.0, 3.0)},
                                  {&pair, make_quasilinear_demo(0.5, 2.0, 2)},
                                  {&pair, make_dirichlet_energy(2)}};
    const double eps = 1e-5;
    for (const auto& c : cases) {
        CAPTURE(c.model.name());
        const FemSpace& space = *c.space;
        for (unsigned seed : {3u, 4u}) {
            const Field u = test_support::random_field(space, seed, 0.8);
            const Field v = test_support::random_field(space, seed + 100, 0.8);
            const double fd = (assemble_energy(space, c.model, u + eps * v) -
                               assemble_energy(space, c.model, u - eps * v)) / (2.0 * eps);
            const double exact = assemble_residual(space, c.model, u).dot(v);
            CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));

            const Eigen::VectorXd fd_h = (assemble_residual(space, c.model, u + eps * v) -
                                          assemble_residual(space, c.model, u - eps * v)) / (2.0 * eps);
            const Eigen::VectorXd hv = assemble_hessian(space, c.model, u).matrix * v;
            CHECK((fd_h - hv).norm() <= 1e-6 * std::max(1.0, hv.norm()));
        }
    }
}

TEST_CASE("hessians are symmetric") {
    const FemSpace space = disk_space(3);
    for (const auto& model : {make_mean_curvature(0.4), make_quasilinear_demo(1.0, 2.0)}) {
        const Field u = test_support::random_field(space, 9, 1.5);
        const SparseMatrix h = assemble_hessian(space, model, u).matrix;
        CHECK(max_abs(h - SparseMatrix(h.transpose())) <= 1e-12 * max_abs(h));
    }
}

TEST_CASE("linear quasilinear hessian") {
    const FemSpace space = square_space(8);
    const double c = 7.5;
    const Field zero = Field::Zero(space.dof_count());
    const auto h = assemble_hessian(space, make_quasilinear_demo(0.0, c), zero);
    const SparseMatrix expected = assemble_h_gram(space).matrix - c * assemble_mass(space).matrix;
    CHECK(relative_difference(h.matrix, expected) <= 1e-12);
}

TEST_CASE("P Q split examples") {
    const FemSpace space = square_space(8);
    const Field zero = Field::Zero(space.dof_count());
    const SparseMatrix gram = assemble_h_gram(space).matrix;
    const SparseMatrix mass = assemble_mass(space).matrix;
    const double scale = max_abs(gram);

    const Field u = test_support::random_field(space, 5, 1.0);
    const auto d = assemble_pq_split(space, make_dirichlet_energy(1), u);
    CHECK(relative_difference(d.p.matrix, gram) <= 1e-12);
    CHECK(max_abs(d.q.matrix) <= 1e-12 * scale);

    const double c = 4.0;
    const auto q = assemble_pq_split(space, make_quasilinear_demo(0.0, c), u);
    CHECK(relative_difference(q.p.matrix, gram) <= 1e-12);
    CHECK(relative_difference(q.q.matrix, SparseMatrix(-c * mass)) <= 1e-12);

    const auto mc = assemble_pq_split(space, make_mean_curvature(0.0), zero);
    CHECK(relative_difference(mc.p.matrix, gram) <= 1e-12);
    CHECK(max_abs(mc.q.matrix) <= 1e-12 * scale);
}

TEST_CASE("P plus Q is the hessian") {
    const FemSpace scalar = disk_space(3);
    const FemSpace pair = square_space(5, 2);
    for (unsigned seed : {7u, 8u, 9u}) {
        for (const auto& model : {make_mean_curvature(0.7), make_quasilinear_demo(1.0, 3.0)}) {
            const Field u = test_support::random_field(scalar, seed, 1.2);
            const auto split = assemble_pq_split(scalar, model, u);
            const SparseMatrix h = assemble_hessian(scalar, model, u).matrix;
            CHECK(max_abs(split.p.matrix + split.q.matrix - h) <= 1e-12 * max_abs(h));
        }
        const auto model = make_quasilinear_demo(0.5, 2.0, 2);
        const Field u = test_support::random_field(pair, seed, 1.2);
        const auto split = assemble_pq_split(pair, model, u);
        const SparseMatrix h = assemble_hessian(pair, model, u).matrix;
        CHECK(max_abs(split.p.matrix + split.q.matrix - h) <= 1e-12 * max_abs(h));
    }
}

TEST_CASE("principal part is coercive") {
    // For sqrt(1 + |p|^2) the smallest eigenvalue of hess_pp is
    // (1 + |p|^2)^(-3/2), so (P, gram) is bounded below by it uniformly.
    const double g = 1.5;
    const double bound = std::pow(1.0 + g * g, -1.5);
    for (int level : {2, 3, 4}) {
        const FemSpace space = disk_space(level);
        const auto gram = assemble_h_gram(space);
        const Field u = test_support::random_field(space, 11, g);
        const auto split = assemble_pq_split(space, make_mean_curvature(0.0), u);
        const double lowest = lowest_eigenpairs(split.p, gram, 1).values[0];
        CAPTURE(level);
        CHECK(lowest >= bound * (1.0 - 1e-9));
        CHECK(lowest <= 1.0);

        const auto d = assemble_pq_split(space, make_dirichlet_energy(1), u);
        CHECK(lowest_eigenpairs(d.p, gram, 1).values[0] == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("garding bound") {
    const FemSpace space = disk_space(3);
    const auto gram = assemble_h_gram(space);
    const auto mass = assemble_mass(space);
    for (const auto& model : {make_mean_curvature(0.5), make_quasilinear_demo(1.0, 3.0)}) {
        CAPTURE(model.name());
        const Field u = test_support::random_field(space, 13, 1.0);
        const auto h = assemble_hessian(space, model, u);
        double c2 = 0.0;
        for (int k = 0; k < 20; ++k) {
            SymmetricOperator shifted{SparseMatrix(h.matrix + c2 * mass.matrix), "shifted"};
            if (count_below(shifted, gram, -1e-10) == 0) break;
            c2 = c2 == 0.0 ? 1.0 : 2.0 * c2;
        }
        SymmetricOperator shifted{SparseMatrix(h.matrix + c2 * mass.matrix), "shifted"};
        CHECK(count_below(shifted, gram, -1e-10) == 0);
        CHECK(c2 < 1e4);
    }
}

TEST_CASE("scaled dirichlet data") {
    const FemSpace space = disk_space(3, 2);
    const Field zero = Field::Zero(space.dof_count());
    const SparseMatrix gram = assemble_h_gram(space).matrix;
    const SparseMatrix mass = assemble_mass(space).matrix;
    for (double t : {0.3, 0.5, 0.7, 1.0}) {
        CAPTURE(t);
        const auto ht = assemble_hessian(space, scale_lagrangian(make_dirichlet_energy(2), t), zero);
        const auto kt = assemble_constraint_hessian(space, scale_constraint(make_constraint_half_usq(2), t), zero);
        CHECK(relative_difference(ht.matrix, gram) <= 1e-12);
        CHECK(relative_difference(kt.matrix, SparseMatrix(t * t * mass)) <= 1e-12);
    }
}

TEST_CASE("constraint assembly") {
    const FemSpace space = disk_space(3);
    const auto k = make_constraint_half_usq(1);
    const Field u = test_support::random_field(space, 17, 1.0);
    const SparseMatrix mass = assemble_mass(space).matrix;
    CHECK(relative_difference(assemble_constraint_hessian(space, k, u).matrix, mass) <= 1e-12);
    CHECK((assemble_constraint_gradient(space, k, u) - mass * u).norm() <= 1e-12 * (mass * u).norm());
    CHECK(assemble_constraint_value(space, k, u) == doctest::Approx(0.5 * u.dot(mass * u)).epsilon(1e-12));
}

TEST_CASE("worker count does not change results") {
    const FemSpace space = disk_space(4);
    const auto model = make_quasilinear_demo(1.0, 2.0);
    const Field u = test_support::random_field(space, 19, 1.0);
    AssemblyOptions one;
    AssemblyOptions many;
    many.workers = 4;
    CHECK(bitwise_equal(assemble_hessian(space, model, u, one).matrix, assemble_hessian(space, model, u, many).matrix));
    CHECK(bitwise_equal(assemble_h_gram(space, one).matrix, assemble_h_gram(space, many).matrix));
    const Eigen::VectorXd r1 = assemble_residual(space, model, u, one);
    const Eigen::VectorXd r4 = assemble_residual(space, model, u, many);
    CHECK((r1.array() == r4.array()).all());
    CHECK(assemble_energy(space, model, u, one) == assemble_energy(space, model, u, many));
}

TEST_CASE("field length is checked") {
    const FemSpace space = square_space(4);
    CHECK_THROWS_AS(assemble_residual(space, make_dirichlet_energy(1), Field::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(assemble_energy(space, make_dirichlet_energy(2), Field::Zero(9)), std::invalid_argument);
}

TEST_CASE("interpolation and vertex values") {
    const FemSpace space = square_space(4, 2);
    const Field u = interpolate(space, [](const Point2& x) {
        Eigen::VectorXd v(2);
        v << x.x() + 2.0, x.y() * x.y();
        return v;
    });
    const Eigen::MatrixXd table = vertex_values(space, u);
    CHECK(table.rows() == space.mesh().vertex_count());
    for (int v = 0; v < space.mesh().vertex_count(); ++v) {
        const Point2& x = space.mesh().vertices()[static_cast<std::size_t>(v)];
        if (space.mesh().is_boundary(v)) {
            CHECK(table(v, 0) == 0.0);
            CHECK(table(v, 1) == 0.0);
        } else {
            CHECK(table(v, 0) == x.x() + 2.0);
            CHECK(table(v, 1) == x.y() * x.y());
        }
    }
    const auto gram = assemble_h_gram(space);
    CHECK(h_norm(gram, u) == doctest::Approx(std::sqrt(u.dot(gram.matrix * u))));
}

TEST_CASE("coordinate export") {
    const FemSpace space = square_space(4);
    const auto gram = assemble_h_gram(space);
    std::stringstream s;
    write_coordinate(s, gram);
    Eigen::MatrixXd back = Eigen::MatrixXd::Zero(space.dof_count(), space.dof_count());
    int row = 0;
    int col = 0;
    double value = 0.0;
    int lines = 0;
    while (s >> row >> col >> value) {
        CHECK(row >= col);
        back(row, col) = value;
        back(col, row) = value;
        ++lines;
    }
    CHECK(lines > 0);
    CHECK((back - Eigen::MatrixXd(gram.matrix)).cwiseAbs().maxCoeff() == 0.0);
}
