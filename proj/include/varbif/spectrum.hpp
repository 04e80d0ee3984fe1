#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varbif/fem.hpp"

namespace varbif {

/// Eigenvalues of A v = sigma B v with Morse index and nullity.
struct SpectrumReport {
    /// Ascending. Holds the whole spectrum when `full` is set, otherwise the
    /// lowest `requested_count` values.
    std::vector<double> eigenvalues;
    /// B-orthonormal eigenvectors for the lowest `requested_count` values.
    Eigen::MatrixXd eigenvectors;
    int requested_count = 0;
    bool full = false;
    /// Counts over the entire spectrum, never over the truncated list.
    int morse_index = 0;
    int nullity = 0;
    double zero_tolerance = 0.0;
    std::string a_label;
    std::string b_label;
};

struct Inertia {
    int negative = 0;
    int zero = 0;
    int positive = 0;
};

struct PencilOptions {
    /// Absolute threshold for "zero" eigenvalues; default 1e-8 max|sigma|.
    std::optional<double> zero_tolerance;
    /// Pencils up to this dimension are solved densely.
    int dense_limit = 800;
    /// Candidate shift below sigma_1 for the iterative path; used when the
    /// shifted pencil is positive definite, skipping the inertia bisection.
    std::optional<double> shift_hint;
};

/// Sylvester inertia from a sparse LDL^T factorization (fill-reducing
/// ordering, no pivoting). Throws std::runtime_error on a zero pivot.
Inertia inertia(const SparseMatrix& a);

/// #{sigma < shift} for the pencil (A, B), B positive definite.
int count_below(const SymmetricOperator& a, const SymmetricOperator& b, double shift);

/// Throws PencilError naming the first non-positive pivot if B is not
/// positive definite.
void require_positive_definite(const SymmetricOperator& b);

/// `count` = nullopt requests the whole spectrum (dense solve).
SpectrumReport solve_pencil(const SymmetricOperator& a, const SymmetricOperator& b, std::optional<int> count,
                            const PencilOptions& options = {});

struct Eigenpairs {
    std::vector<double> values;
    Eigen::MatrixXd vectors;
};

/// Lowest k eigenpairs of the pencil. Dense for small problems, otherwise
/// shift-invert subspace iteration with the shift placed below sigma_1 by
/// inertia bisection. The returned set is checked against inertia counts.
Eigenpairs lowest_eigenpairs(const SymmetricOperator& a, const SymmetricOperator& b, int k,
                             const PencilOptions& options = {});

/// Every eigenvalue of the pencil strictly below `upper`, ascending.
Eigenpairs eigenpairs_below(const SymmetricOperator& a, const SymmetricOperator& b, double upper,
                            const PencilOptions& options = {});

/// Estimate of max |sigma| (dense: exact).
double spectral_radius(const SymmetricOperator& a, const SymmetricOperator& b, const PencilOptions& options = {});

struct MorseData {
    int morse_index = 0;
    int nullity = 0;
    double tolerance = 0.0;
};

/// mu = #{sigma < -tol}, nu = #{|sigma| <= tol} over the full spectrum of
/// (hessian, h_gram).
MorseData morse_data(const SymmetricOperator& hessian, const SymmetricOperator& h_gram,
                     std::optional<double> zero_tolerance = std::nullopt, const PencilOptions& options = {});

/// |A v - sigma B v|_2 / ((|A|_inf + |sigma| |B|_inf) |v|_2).
double relative_residual(const SymmetricOperator& a, const SymmetricOperator& b, double sigma,
                         const Eigen::VectorXd& v);

}  // namespace varbif
