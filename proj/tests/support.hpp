#pragma once

// Shared helpers for the test binaries: random fields and an inertia
// oracle that is independent of the spectrum module.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "varbif/fem.hpp"
#include "varbif/spectrum.hpp"

namespace test_support {

/// Random field with coefficients in [-1, 1], rescaled so that the largest
/// elementwise gradient has Euclidean norm `max_gradient`.
inline varbif::Field random_field(const varbif::FemSpace& space, unsigned seed, double max_gradient) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    varbif::Field u(space.dof_count());
    for (int i = 0; i < u.size(); ++i) u(i) = unit(rng);

    const Eigen::MatrixXd nodal = varbif::vertex_values(space, u);
    const auto& mesh = space.mesh();
    double worst = 0.0;
    for (const auto& tri : mesh.triangles()) {
        const varbif::Point2& a = mesh.vertices()[static_cast<std::size_t>(tri[0])];
        const varbif::Point2& b = mesh.vertices()[static_cast<std::size_t>(tri[1])];
        const varbif::Point2& c = mesh.vertices()[static_cast<std::size_t>(tri[2])];
        Eigen::Matrix2d j;
        j << b - a, c - a;
        const Eigen::Matrix2d jit = j.inverse().transpose();
        for (int comp = 0; comp < space.components(); ++comp) {
            const Eigen::Vector2d diffs(nodal(tri[1], comp) - nodal(tri[0], comp), nodal(tri[2], comp) - nodal(tri[0], comp));
            worst = std::max(worst, (jit * diffs).norm());
        }
    }
    if (worst > 0.0) u *= max_gradient / worst;
    return u;
}

/// Negative count of A by Bunch-Kaufman style symmetric pivoting (dense,
/// test only). 2x2 pivots contribute one negative eigenvalue when their
/// determinant is negative, two when it is positive with negative trace.
inline int bunch_kaufman_negative_count(Eigen::MatrixXd a) {
    const int n = static_cast<int>(a.rows());
    const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;
    int negative = 0;
    int k = 0;
    auto swap_sym = [&](int i, int j) {
        if (i == j) return;
        a.row(i).swap(a.row(j));
        a.col(i).swap(a.col(j));
    };
    while (k < n) {
        const double akk = std::abs(a(k, k));
        int r = k;
        double colmax = 0.0;
        for (int i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > colmax) {
                colmax = std::abs(a(i, k));
                r = i;
            }
        }
        int size = 1;
        if (akk == 0.0 && colmax == 0.0) {
            ++k;
            continue;
        }
        if (akk < alpha * colmax) {
            double rowmax = 0.0;
            for (int j = k; j < n; ++j) {
                if (j != r) rowmax = std::max(rowmax, std::abs(a(r, j)));
            }
            if (akk * rowmax >= alpha * colmax * colmax) {
                size = 1;
            } else if (std::abs(a(r, r)) >= alpha * rowmax) {
                swap_sym(k, r);
                size = 1;
            } else {
                swap_sym(k + 1, r);
                size = 2;
            }
        }
        if (size == 1) {
            const double d = a(k, k);
            if (d < 0.0) ++negative;
            const Eigen::VectorXd l = a.col(k).tail(n - k - 1) / d;
            a.bottomRightCorner(n - k - 1, n - k - 1) -= l * a.col(k).tail(n - k - 1).transpose();
            k += 1;
        } else {
            const Eigen::Matrix2d d = a.block(k, k, 2, 2);
            const double det = d.determinant();
            if (det < 0.0) negative += 1;
            else if (d.trace() < 0.0) negative += 2;
            const int m = n - k - 2;
            const Eigen::MatrixXd c = a.block(k + 2, k, m, 2);
            a.bottomRightCorner(m, m) -= c * d.inverse() * c.transpose();
            k += 2;
        }
    }
    return negative;
}

/// #{sigma(A, B) < 0} by congruence: A is reduced by the Cholesky factor of B.
inline int congruence_negative_count(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::LLT<Eigen::MatrixXd> llt(b);
    const Eigen::MatrixXd l = llt.matrixL();
    const Eigen::MatrixXd x = l.triangularView<Eigen::Lower>().solve(a);
    const Eigen::MatrixXd c = l.triangularView<Eigen::Lower>().solve(x.transpose());
    return bunch_kaufman_negative_count(0.5 * (c + c.transpose()));
}

/// Random symmetric pencil with an indefinite A and a positive definite B,
/// both with a band of half-width `band`.
inline std::pair<varbif::SymmetricOperator, varbif::SymmetricOperator> random_pencil(int n, unsigned seed, int band = 4) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < std::min(n, i + band + 1); ++j) {
            a(i, j) = normal(rng);
            a(j, i) = a(i, j);
            r(i, j) = normal(rng);
        }
    }
    const Eigen::MatrixXd b = r.transpose() * r / static_cast<double>(band + 1) + 0.1 * Eigen::MatrixXd::Identity(n, n);
    return {varbif::SymmetricOperator{a.sparseView(), "A"}, varbif::SymmetricOperator{b.sparseView(), "B"}};
}

}  // namespace test_support
