#include "varbif/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <lapacke.h>

#include "varbif/errors.hpp"

namespace varbif {

namespace {

using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

void require_same_dimension(const SymmetricOperator& a, const SymmetricOperator& b, const char* who) {
    if (a.matrix.rows() != a.matrix.cols() || b.matrix.rows() != b.matrix.cols() || a.matrix.rows() != b.matrix.rows()) {
        throw std::invalid_argument(std::string(who) + ": pencil matrices must be square with equal dimension");
    }
}

double inf_norm(const SparseMatrix& m) {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(m.rows());
    for (int col = 0; col < m.outerSize(); ++col) {
        for (SparseMatrix::InnerIterator it(m, col); it; ++it) rows(it.row()) += std::abs(it.value());
    }
    return rows.size() ? rows.maxCoeff() : 0.0;
}

SparseMatrix shifted(const SparseMatrix& a, const SparseMatrix& b, double shift) {
    SparseMatrix m = a - shift * b;
    m.makeCompressed();
    return m;
}

struct DenseSolution {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};

/// Cholesky reduction of B followed by a divide-and-conquer symmetric solve.
DenseSolution dense_pencil(const SymmetricOperator& a, const SymmetricOperator& b, bool want_vectors) {
    const int n = a.dimension();
    Eigen::MatrixXd am = Eigen::MatrixXd(a.matrix);
    Eigen::MatrixXd bm = Eigen::MatrixXd(b.matrix);
    DenseSolution out;
    out.values.resize(n);
    if (n == 0) return out;

    lapack_int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, bm.data(), n);
    if (info > 0) {
        throw PencilError("pencil (" + a.label + ", " + b.label + "): " + b.label +
                              " is not positive definite; Cholesky pivot " + std::to_string(info - 1) + " failed",
                          static_cast<int>(info - 1));
    }
    if (info < 0) throw std::runtime_error("dense_pencil: dpotrf argument error");
    info = LAPACKE_dsygst(LAPACK_COL_MAJOR, 1, 'L', n, am.data(), n, bm.data(), n);
    if (info != 0) throw std::runtime_error("dense_pencil: dsygst failed");
    info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'L', n, am.data(), n, out.values.data());
    if (info != 0) throw std::runtime_error("dense_pencil: dsyevd failed to converge");
    if (want_vectors) {
        // Generalized eigenvectors x = L^{-T} z are B-orthonormal.
        info = LAPACKE_dtrtrs(LAPACK_COL_MAJOR, 'L', 'T', 'N', n, n, bm.data(), n, am.data(), n);
        if (info != 0) throw std::runtime_error("dense_pencil: dtrtrs failed");
        out.vectors = std::move(am);
    }
    return out;
}

bool factor_positive_definite(Ldlt& ldlt, const SparseMatrix& m) {
    ldlt.compute(m);
    if (ldlt.info() != Eigen::Success) return false;
    return (ldlt.vectorD().array() > 0.0).all();
}

/// B-orthonormalize the columns of y in place (two passes of modified Gram-Schmidt).
void b_orthonormalize(Eigen::MatrixXd& y, const SparseMatrix& b) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                const Eigen::VectorXd bi = b * y.col(i);
                y.col(j) -= bi.dot(y.col(j)) * y.col(i);
            }
            const double norm = std::sqrt(y.col(j).dot(b * y.col(j)));
            if (!(norm > 0.0)) throw std::runtime_error("subspace iteration: block lost rank");
            y.col(j) /= norm;
        }
    }
}

double shift_below_spectrum(const SparseMatrix& am, const SparseMatrix& bm, Ldlt& ldlt) {
    const auto n = am.rows();
    // Upper bound for sigma_1 from the Rayleigh quotients of unit vectors.
    double s_hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) s_hi = std::min(s_hi, am.coeff(i, i) / bm.coeff(i, i));
    while (factor_positive_definite(ldlt, shifted(am, bm, s_hi))) s_hi += std::max(std::abs(s_hi), 1.0);
    const double reach = std::max(std::abs(s_hi), 1e-12);
    double delta = 0.5 * reach;
    double s_lo = s_hi - delta;
    while (!factor_positive_definite(ldlt, shifted(am, bm, s_lo))) {
        delta *= 2.0;
        s_lo = s_hi - delta;
    }
    for (int it = 0; it < 60; ++it) {
        const double width = s_hi - s_lo;
        if (width <= 0.05 * std::max(std::abs(s_lo), std::abs(s_hi)) || width <= 1e-9 * reach) break;
        const double mid = 0.5 * (s_lo + s_hi);
        if (factor_positive_definite(ldlt, shifted(am, bm, mid))) s_lo = mid;
        else s_hi = mid;
    }
    if (!factor_positive_definite(ldlt, shifted(am, bm, s_lo))) {
        throw std::runtime_error("subspace iteration: shifted pencil failed to factor");
    }
    return s_lo;
}

Eigenpairs subspace_iteration(const SymmetricOperator& a, const SymmetricOperator& b, int k, int block,
                              std::optional<double> shift_hint) {
    const int n = a.dimension();
    const SparseMatrix& am = a.matrix;
    const SparseMatrix& bm = b.matrix;
    Ldlt ldlt;
    if (!shift_hint || !factor_positive_definite(ldlt, shifted(am, bm, *shift_hint))) {
        shift_below_spectrum(am, bm, ldlt);
    }

    const double norm_a = inf_norm(am), norm_b = inf_norm(bm);
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    Eigen::MatrixXd x(n, block);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = uniform(rng);
    }
    b_orthonormalize(x, bm);

    constexpr int max_iterations = 2000;
    constexpr double residual_tolerance = 1e-12;
    for (int it = 0; it < max_iterations; ++it) {
        Eigen::MatrixXd y = ldlt.solve(bm * x);
        b_orthonormalize(y, bm);
        const Eigen::MatrixXd ay = am * y;
        const Eigen::MatrixXd reduced = y.transpose() * ay;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (reduced + reduced.transpose()));
        x = y * small.eigenvectors();
        const Eigen::MatrixXd ax = ay * small.eigenvectors();
        bool converged = true;
        for (int j = 0; j < k && converged; ++j) {
            const double sigma = small.eigenvalues()(j);
            const double res = (ax.col(j) - sigma * (bm * x.col(j))).norm();
            converged = res <= residual_tolerance * (norm_a + std::abs(sigma) * norm_b) * x.col(j).norm();
        }
        if (converged) {
            Eigenpairs out;
            out.values.assign(small.eigenvalues().data(), small.eigenvalues().data() + k);
            out.vectors = x.leftCols(k);
            return out;
        }
    }
    throw std::runtime_error("subspace iteration: no convergence within " + std::to_string(max_iterations) +
                             " iterations");
}

}  // namespace

Inertia inertia(const SparseMatrix& a) {
    Ldlt ldlt(a);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("inertia: LDL^T factorization hit a zero pivot");
    Inertia out;
    for (Eigen::Index i = 0; i < ldlt.vectorD().size(); ++i) {
        const double d = ldlt.vectorD()(i);
        if (d < 0.0) ++out.negative;
        else if (d > 0.0) ++out.positive;
        else ++out.zero;
    }
    return out;
}

int count_below(const SymmetricOperator& a, const SymmetricOperator& b, double shift) {
    require_same_dimension(a, b, "count_below");
    return inertia(shifted(a.matrix, b.matrix, shift)).negative;
}

void require_positive_definite(const SymmetricOperator& b) {
    Ldlt ldlt(b.matrix);
    if (ldlt.info() != Eigen::Success) {
        throw PencilError(b.label + " is not positive definite: zero pivot in LDL^T", -1);
    }
    const auto& d = ldlt.vectorD();
    for (Eigen::Index k = 0; k < d.size(); ++k) {
        if (!(d(k) > 0.0)) {
            const int row = ldlt.permutationPinv().indices()(k);
            throw PencilError(b.label + " is not positive definite: pivot at row " + std::to_string(row) +
                                  " is " + std::to_string(d(k)),
                              row);
        }
    }
}

double relative_residual(const SymmetricOperator& a, const SymmetricOperator& b, double sigma,
                         const Eigen::VectorXd& v) {
    const double r = (a.matrix * v - sigma * (b.matrix * v)).norm();
    return r / ((inf_norm(a.matrix) + std::abs(sigma) * inf_norm(b.matrix)) * v.norm());
}

Eigenpairs lowest_eigenpairs(const SymmetricOperator& a, const SymmetricOperator& b, int k,
                             const PencilOptions& options) {
    require_same_dimension(a, b, "lowest_eigenpairs");
    const int n = a.dimension();
    if (k < 0 || k > n) throw std::invalid_argument("lowest_eigenpairs: k must lie in [0, dimension]");
    if (k == 0) return Eigenpairs{{}, Eigen::MatrixXd(n, 0)};
    if (n <= options.dense_limit || 2 * k + 10 >= n) {
        const auto dense = dense_pencil(a, b, true);
        Eigenpairs out;
        out.values.assign(dense.values.data(), dense.values.data() + k);
        out.vectors = dense.vectors.leftCols(k);
        return out;
    }
    require_positive_definite(b);

    int block = std::min(n - 1, k + std::max(k, 10));
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigenpairs pairs = subspace_iteration(a, b, k, block, options.shift_hint);
        // Every eigenvalue below the computed cluster must have been found.
        const double top = pairs.values.back();
        const double slack = 1e-7 * std::max({std::abs(top), std::abs(top - pairs.values.front()), 1e-300});
        const int below = count_below(a, b, top - slack);
        const auto found = std::count_if(pairs.values.begin(), pairs.values.end(),
                                         [&](double v) { return v < top - slack; });
        if (below == found) return pairs;
        block = std::min(n - 1, 2 * block);
    }
    throw std::runtime_error("lowest_eigenpairs: eigenvalues missed after enlarging the block");
}

Eigenpairs eigenpairs_below(const SymmetricOperator& a, const SymmetricOperator& b, double upper,
                            const PencilOptions& options) {
    require_same_dimension(a, b, "eigenpairs_below");
    if (a.dimension() <= options.dense_limit) {
        const auto dense = dense_pencil(a, b, true);
        int k = 0;
        while (k < dense.values.size() && dense.values(k) < upper) ++k;
        Eigenpairs out;
        out.values.assign(dense.values.data(), dense.values.data() + k);
        out.vectors = dense.vectors.leftCols(k);
        return out;
    }
    require_positive_definite(b);
    return lowest_eigenpairs(a, b, count_below(a, b, upper), options);
}

double spectral_radius(const SymmetricOperator& a, const SymmetricOperator& b, const PencilOptions& options) {
    require_same_dimension(a, b, "spectral_radius");
    if (a.dimension() <= options.dense_limit) {
        const auto dense = dense_pencil(a, b, false);
        return dense.values.size() ? dense.values.cwiseAbs().maxCoeff() : 0.0;
    }
    Ldlt ldlt(b.matrix);
    if (ldlt.info() != Eigen::Success) throw PencilError(b.label + " is not positive definite", -1);
    Eigen::VectorXd x = Eigen::VectorXd::Ones(a.dimension());
    double estimate = 0.0;
    for (int it = 0; it < 60; ++it) {
        Eigen::VectorXd y = ldlt.solve(a.matrix * x);
        const double norm = std::sqrt(y.dot(b.matrix * y));
        if (!(norm > 0.0)) break;
        x = y / norm;
        estimate = std::abs(x.dot(a.matrix * x));
    }
    return estimate;
}

SpectrumReport solve_pencil(const SymmetricOperator& a, const SymmetricOperator& b, std::optional<int> count,
                            const PencilOptions& options) {
    require_same_dimension(a, b, "solve_pencil");
    const int n = a.dimension();
    if (count && (*count < 0 || *count > n)) throw std::invalid_argument("solve_pencil: count out of range");

    SpectrumReport report;
    report.a_label = a.label;
    report.b_label = b.label;
    report.requested_count = count.value_or(n);

    if (!count || n <= options.dense_limit) {
        const auto dense = dense_pencil(a, b, true);
        report.full = true;
        report.eigenvalues.assign(dense.values.data(), dense.values.data() + n);
        report.eigenvectors = dense.vectors.leftCols(report.requested_count);
        const double radius = n ? dense.values.cwiseAbs().maxCoeff() : 0.0;
        report.zero_tolerance = options.zero_tolerance.value_or(1e-8 * radius);
        for (double s : report.eigenvalues) {
            if (s < -report.zero_tolerance) ++report.morse_index;
            else if (s <= report.zero_tolerance) ++report.nullity;
        }
        return report;
    }

    auto pairs = lowest_eigenpairs(a, b, *count, options);
    report.eigenvalues = pairs.values;
    report.eigenvectors = std::move(pairs.vectors);
    const double lowest = report.eigenvalues.empty() ? 0.0 : std::abs(report.eigenvalues.front());
    report.zero_tolerance =
        options.zero_tolerance.value_or(1e-8 * std::max(lowest, spectral_radius(a, b, options)));
    report.morse_index = count_below(a, b, -report.zero_tolerance);
    report.nullity = count_below(a, b, report.zero_tolerance) - report.morse_index;
    return report;
}

MorseData morse_data(const SymmetricOperator& hessian, const SymmetricOperator& h_gram,
                     std::optional<double> zero_tolerance, const PencilOptions& options) {
    require_same_dimension(hessian, h_gram, "morse_data");
    MorseData out;
    if (hessian.dimension() <= options.dense_limit) {
        const auto dense = dense_pencil(hessian, h_gram, false);
        const double radius = dense.values.size() ? dense.values.cwiseAbs().maxCoeff() : 0.0;
        out.tolerance = zero_tolerance.value_or(1e-8 * radius);
        for (Eigen::Index i = 0; i < dense.values.size(); ++i) {
            if (dense.values(i) < -out.tolerance) ++out.morse_index;
            else if (dense.values(i) <= out.tolerance) ++out.nullity;
        }
        return out;
    }
    require_positive_definite(h_gram);
    out.tolerance = zero_tolerance.value_or(1e-8 * spectral_radius(hessian, h_gram, options));
    out.morse_index = count_below(hessian, h_gram, -out.tolerance);
    out.nullity = count_below(hessian, h_gram, out.tolerance) - out.morse_index;
    return out;
}

}  // namespace varbif
