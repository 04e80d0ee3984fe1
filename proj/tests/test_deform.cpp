#include <doctest.h>

#include <cmath>
#include <memory>
#include <stdexcept>

#include "varbif/deform.hpp"
#include "varbif/errors.hpp"

using namespace varbif;

namespace {

FemSpace square_space(int divisions) {
    return FemSpace(std::make_shared<const Mesh>(generate_square_mesh(1.0, divisions)), 1);
}

/// Discrete eigenvalues of (h_gram, mass), the oracle for t* = sqrt(lambda / c).
std::vector<double> discrete_tones(const FemSpace& space, int count) {
    return lowest_eigenpairs(assemble_h_gram(space), assemble_mass(space), count).values;
}

int tones_in(const std::vector<double>& tones, double lo, double hi) {
    int n = 0;
    for (double s : tones) n += (s > lo && s <= hi) ? 1 : 0;
    return n;
}

void check_against_oracle(const FemSpace& space, double c, double t_min, int grid) {
    const auto model = make_quasilinear_demo(0.0, c);
    DeformationScan s = scan(space, model, t_min, grid);
    const auto tones = discrete_tones(space, 12);
    CAPTURE(c);

    CHECK(verify_smale(s) == 0);
    CHECK(s.mu.front() == tones_in(tones, 0.0, t_min * t_min * c));
    CHECK(s.mu.back() == tones_in(tones, 0.0, c));

    int total = 0;
    for (const auto& cp : s.conjugate_points) total += cp.nullity;
    CHECK(total == tones_in(tones, t_min * t_min * c, c));

    // Every conjugate point matches sqrt(lambda_k / c) with the cluster size as nullity.
    std::size_t k = 0;
    while (k < tones.size() && tones[k] <= t_min * t_min * c) ++k;
    for (const auto& cp : s.conjugate_points) {
        REQUIRE(k < tones.size());
        const double expected = std::sqrt(tones[k] / c);
        int cluster = 0;
        while (k + cluster < tones.size() && std::abs(tones[k + cluster] - tones[k]) <= 1e-8 * tones[k]) ++cluster;
        CHECK(std::abs(cp.t - expected) <= 1e-4);
        CHECK(cp.nullity == cluster);
        CHECK(cp.bracket_high - cp.bracket_low <= s.tol_t);
        k += static_cast<std::size_t>(cluster);
    }

    for (std::size_t i = 1; i < s.mu.size(); ++i) CHECK(s.mu[i] >= s.mu[i - 1]);
    for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
        if (s.t_grid[i] * s.t_grid[i] * c < tones.front()) CHECK(s.mu[i] == 0);
    }
    // Each conjugate point sits in a grid cell where mu changes, or on a node with a kernel.
    for (const auto& cp : s.conjugate_points) {
        bool placed = false;
        for (std::size_t i = 0; i + 1 < s.t_grid.size(); ++i) {
            if (cp.t >= s.t_grid[i] && cp.t <= s.t_grid[i + 1]) {
                placed = placed || s.mu[i] != s.mu[i + 1] || s.nu[i] > 0 || s.nu[i + 1] > 0;
            }
        }
        CHECK(placed);
    }
}

}  // namespace

TEST_CASE("dirichlet scan has no conjugate points") {
    const FemSpace space = square_space(12);
    DeformationScan s = scan(space, make_dirichlet_energy(1), 0.5, 20);
    CHECK(s.t_grid.size() == 20);
    CHECK(s.t_grid.front() == 0.5);
    CHECK(s.t_grid.back() == 1.0);
    for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
        CHECK(s.mu[i] == 0);
        CHECK(s.nu[i] == 0);
        CHECK(s.sigma_min[i] == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(s.conjugate_points.empty());
    CHECK(verify_smale(s) == 0);
    CHECK(s.smale_residual == 0);
}

TEST_CASE("shifted laplacian scans match the discrete spectrum") {
    const FemSpace space = square_space(32);
    check_against_oracle(space, 50.0, 0.5, 50);
    check_against_oracle(space, 25.0, 0.5, 50);
    check_against_oracle(space, 120.0, 0.3, 60);
}

TEST_CASE("c = 50 window reproduces the spectral table") {
    const FemSpace space = square_space(32);
    DeformationScan s = scan(space, make_quasilinear_demo(0.0, 50.0), 0.5, 40);
    CHECK(s.mu.front() == 0);
    CHECK(s.mu.back() == 3);
    REQUIRE(s.conjugate_points.size() == 2);
    CHECK(s.conjugate_points[0].nullity == 1);
    CHECK(s.conjugate_points[1].nullity == 2);
    CHECK(std::abs(s.conjugate_points[0].t - 0.6283) < 5e-3);
    CHECK(std::abs(s.conjugate_points[1].t - 0.9935) < 5e-3);
    CHECK(verify_smale(s) == 0);
}

TEST_CASE("sigma_min follows the scaling law") {
    // sigma_min(t) = 1 - t^2 c / lambda_1 for the pencil (h_gram - t^2 c mass, h_gram).
    const FemSpace space = square_space(16);
    const double c = 30.0;
    DeformationScan s = scan(space, make_quasilinear_demo(0.0, c), 0.4, 15);
    const double lambda1 = discrete_tones(space, 1).front();
    for (std::size_t i = 0; i < s.t_grid.size(); ++i) {
        const double t = s.t_grid[i];
        CHECK(s.sigma_min[i] == doctest::Approx(1.0 - t * t * c / lambda1).epsilon(1e-8));
    }
}

TEST_CASE("refine a single bracket") {
    const FemSpace space = square_space(32);
    const auto model = make_quasilinear_demo(0.0, 50.0);
    const auto tones = discrete_tones(space, 3);
    const double t1 = std::sqrt(tones[0] / 50.0);
    const double t2 = std::sqrt(tones[1] / 50.0);
    REQUIRE(t1 > 0.6);
    REQUIRE(t1 < 0.66);
    REQUIRE(t2 > 0.98);
    REQUIRE(t2 < 1.0);

    const ConjugatePoint a = refine_conjugate_point(space, model, 0.6, 0.66, 1e-4);
    CHECK(std::abs(a.t - t1) <= 1e-4);
    CHECK(a.nullity == 1);
    CHECK(a.bracket_low <= t1);
    CHECK(a.bracket_high >= t1);

    const ConjugatePoint b = refine_conjugate_point(space, model, 0.98, 1.0, 1e-4);
    CHECK(std::abs(b.t - t2) <= 1e-4);
    CHECK(b.nullity == 2);

    CHECK_THROWS_AS(refine_conjugate_point(space, model, 0.7, 0.8, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(refine_conjugate_point(space, model, 0.8, 0.7, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(refine_conjugate_point(space, model, 0.6, 0.66, 0.0), std::invalid_argument);
}

TEST_CASE("scan preconditions") {
    const FemSpace space = square_space(8);
    ScanOptions coarse;
    coarse.refine = false;
    DeformationScan s = scan(space, make_quasilinear_demo(0.0, 50.0), 0.5, 10, coarse);
    CHECK_FALSE(s.refined);
    CHECK(s.conjugate_points.empty());
    CHECK_THROWS_AS(verify_smale(s), PreconditionError);

    CHECK_THROWS_AS(scan(space, make_dirichlet_energy(1), 0.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(scan(space, make_dirichlet_energy(1), 1.0, 10), std::invalid_argument);
    CHECK_THROWS_AS(scan(space, make_dirichlet_energy(1), 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(scan(space, make_mean_curvature(1.0), 0.5, 10), TrivialBranchError);
}

TEST_CASE("scaled and rescaled routes agree") {
    const FemSpace square = square_space(10);
    const FemSpace disk(std::make_shared<const Mesh>(generate_disk_mesh(1.0, 3)), 1);
    const auto k = make_constraint_half_usq(1);

    const ScalingCrossCheck half = cross_check_scaling(square, make_dirichlet_energy(1), k, 0.5);
    CHECK(half.discrepancy < 1e-12);
    const ScalingCrossCheck unit = cross_check_scaling(square, make_dirichlet_energy(1), k, 1.0);
    CHECK(unit.discrepancy == 0.0);
    REQUIRE(half.pulled_back.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(half.pulled_back[i] == doctest::Approx(4.0 * unit.pulled_back[i]).epsilon(1e-12));
    }

    CHECK(cross_check_scaling(disk, make_mean_curvature(0.0), k, 0.7).discrepancy < 1e-12);
    CHECK(cross_check_scaling(disk, make_quasilinear_demo(0.0, 20.0), k, 0.6).discrepancy < 1e-12);
    for (double t : {0.3, 0.5, 0.7}) {
        const auto r = cross_check_scaling(disk, make_dirichlet_energy(1), k, t);
        const auto one = cross_check_scaling(disk, make_dirichlet_energy(1), k, 1.0);
        CAPTURE(t);
        CHECK(r.discrepancy < 1e-12);
        for (int i = 0; i < 5; ++i) CHECK(r.pulled_back[i] * t * t == doctest::Approx(one.pulled_back[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(cross_check_scaling(disk, make_dirichlet_energy(1), k, 0.0), std::invalid_argument);
}
