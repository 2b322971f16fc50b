#include "doctest.h"

#include "dxcast/transforms.hpp"

#include "test_support.hpp"

#include <cmath>
#include <random>

using namespace dxcast;

namespace {

Panel unchecked_panel(const Eigen::MatrixXd& counts, double radix) {
    Panel panel;
    panel.country = "TST";
    panel.sex = Sex::female;
    panel.radix = radix;
    panel.counts = counts;
    for (Eigen::Index t = 0; t < counts.rows(); ++t)
        panel.years.push_back(2000 + static_cast<int>(t));
    return panel;
}

}  // namespace

TEST_SUITE("transforms") {
    TEST_CASE("clr of a two-year one-age toy gives the hand logarithms") {
        Eigen::MatrixXd counts(2, 1);
        counts << std::exp(1.0), std::exp(3.0);
        const auto [beta, basis] = clr_forward(unchecked_panel(counts, 1.0));
        CHECK(basis.alpha[0] == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
        CHECK(beta.matrix(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(beta.matrix(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("clr of a time-constant panel is identically zero") {
        Eigen::MatrixXd counts(3, 4);
        counts << 1, 2, 3, 4, 1, 2, 3, 4, 1, 2, 3, 4;
        const auto [beta, basis] = clr_forward(unchecked_panel(counts, 10.0));
        CHECK(beta.matrix.cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((basis.alpha - Eigen::Vector4d(1, 2, 3, 4)).cwiseAbs().maxCoeff() <= 1e-12);
    }

    TEST_CASE("scaling every count leaves the clr coordinates unchanged") {
        std::mt19937_64 rng(3);
        const Panel panel = dxtest::random_positive_panel(rng, 5, 20);
        Panel scaled = panel;
        scaled.counts *= 3.7;
        scaled.radix *= 3.7;
        const auto [beta, basis] = clr_forward(panel);
        const auto [beta2, basis2] = clr_forward(scaled);
        CHECK((beta.matrix - beta2.matrix).cwiseAbs().maxCoeff() <= 1e-10);
    }

    TEST_CASE("clr rejects non-positive counts naming year and age") {
        Eigen::MatrixXd counts(2, 3);
        counts << 1, 2, 3, 1, 0, 3;
        CHECK_THROWS_WITH_AS(clr_forward(unchecked_panel(counts, 6.0)),
                             doctest::Contains("year 2001 age 1"), DomainError);
    }

    TEST_CASE("clr inverse of zero coordinates rescales the basis curve") {
        ClrBasis basis;
        basis.alpha = Eigen::Vector3d(2, 3, 5);
        basis.radix = 1.0;
        const DeathCurve curve = clr_inverse(Eigen::Vector3d::Zero(), basis);
        CHECK(curve.counts[0] == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(curve.counts[1] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(curve.counts[2] == doctest::Approx(0.5).epsilon(1e-12));
    }

    TEST_CASE("clr inverse doubles age-zero mass then renormalizes") {
        ClrBasis basis;
        basis.alpha = Eigen::Vector3d::Ones();
        basis.radix = 1.0;
        const DeathCurve curve = clr_inverse(Eigen::Vector3d(std::log(2.0), 0.0, 0.0), basis);
        CHECK(curve.counts[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(curve.counts[1] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(curve.counts[2] == doctest::Approx(0.25).epsilon(1e-12));
    }

    TEST_CASE("cdf forward computes the hand logit") {
        Eigen::MatrixXd counts(1, 3);
        counts << 0.5, 0.25, 0.25;
        const UnconstrainedMatrix z = cdf_forward(unchecked_panel(counts, 1.0));
        REQUIRE(z.matrix.cols() == 2);  // final cumulative point excluded
        CHECK(z.matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(z.matrix(0, 1) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }

    TEST_CASE("uniform two-age density maps to logit zero") {
        Eigen::MatrixXd counts(1, 2);
        counts << 0.5, 0.5;
        const UnconstrainedMatrix z = cdf_forward(unchecked_panel(counts, 1.0));
        REQUIRE(z.matrix.cols() == 1);
        CHECK(z.matrix(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    }

    TEST_CASE("cdf coordinates are nondecreasing along age") {
        std::mt19937_64 rng(5);
        for (int rep = 0; rep < 20; ++rep) {
            const Panel panel = dxtest::random_positive_panel(rng, 6, 50);
            const UnconstrainedMatrix z = cdf_forward(panel);
            for (Eigen::Index t = 0; t < z.matrix.rows(); ++t)
                for (Eigen::Index x = 0; x + 1 < z.matrix.cols(); ++x)
                    REQUIRE(z.matrix(t, x) <= z.matrix(t, x + 1));
        }
    }

    TEST_CASE("cdf inverse undoes the hand logit") {
        const DeathCurve curve = cdf_inverse(Eigen::Vector2d(0.0, std::log(3.0)), 1.0);
        CHECK(curve.counts[0] == doctest::Approx(0.5).epsilon(1e-9));
        CHECK(curve.counts[1] == doctest::Approx(0.25).epsilon(1e-9));
        CHECK(curve.counts[2] == doctest::Approx(0.25).epsilon(1e-9));
    }

    TEST_CASE("huge logit at age zero puts nearly all mass there") {
        const DeathCurve curve = cdf_inverse(Eigen::Vector2d(50.0, 51.0), 1e5);
        CHECK(curve.counts[0] / 1e5 > 0.999999);
    }

    TEST_CASE("non-monotone logit rows clip to a valid curve") {
        const DeathCurve curve = cdf_inverse(Eigen::Vector2d(1.0, 0.5), 1e5);
        CHECK(curve.counts.minCoeff() >= 0.0);
        CHECK(curve.counts.sum() == doctest::Approx(1e5).epsilon(1e-9));
        CHECK(curve.counts[1] == 0.0);  // the negative difference
    }

    TEST_CASE("both transforms round-trip random positive panels") {
        std::mt19937_64 rng(42);
        for (int rep = 0; rep < 100; ++rep) {
            const Panel panel = dxtest::random_positive_panel(rng, 8, kHmdAgeCount);

            const auto [beta, basis] = clr_forward(panel);
            CHECK(beta.matrix.colwise().mean().cwiseAbs().maxCoeff() <= 1e-10);
            for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
                const DeathCurve back = clr_inverse(beta.matrix.row(t), basis);
                const double rel_err =
                    ((back.counts - panel.counts.row(t).transpose()).cwiseAbs().array() /
                     panel.counts.row(t).transpose().array())
                        .maxCoeff();
                REQUIRE(rel_err <= 1e-9);
            }

            const UnconstrainedMatrix z = cdf_forward(panel);
            for (Eigen::Index t = 0; t < panel.n_years(); ++t) {
                const DeathCurve back = cdf_inverse(z.matrix.row(t), panel.radix);
                const double rel_err =
                    ((back.counts - panel.counts.row(t).transpose()).cwiseAbs().array() /
                     panel.counts.row(t).transpose().array())
                        .maxCoeff();
                REQUIRE(rel_err <= 1e-9);
            }
        }
    }

    TEST_CASE("inverses emit curves summing to the radix") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> unif(-3.0, 3.0);
        for (int rep = 0; rep < 50; ++rep) {
            Eigen::VectorXd z(10);
            for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = unif(rng);
            const DeathCurve curve = cdf_inverse(z, 1e5);
            CHECK(curve.counts.minCoeff() >= 0.0);
            CHECK(std::abs(curve.counts.sum() - 1e5) <= 1e-9 * 1e5);

            ClrBasis basis;
            basis.alpha = Eigen::VectorXd::Constant(10, 1.0);
            basis.radix = 1e5;
            const DeathCurve curve2 = clr_inverse(z, basis);
            CHECK(curve2.counts.minCoeff() >= 0.0);
            CHECK(std::abs(curve2.counts.sum() - 1e5) <= 1e-9 * 1e5);
        }
    }

    TEST_CASE("floor_panel lifts zero densities and keeps the radix") {
        Eigen::MatrixXd counts(2, 4);
        counts << 0.0, 40.0, 30.0, 30.0, 10.0, 40.0, 30.0, 20.0;
        Panel panel = unchecked_panel(counts, 100.0);
        const Panel floored = floor_panel(panel);
        CHECK(floored.counts.minCoeff() > 0.0);
        for (Eigen::Index t = 0; t < 2; ++t)
            CHECK(floored.counts.row(t).sum() == doctest::Approx(100.0).epsilon(1e-12));
        // The nonzero entries barely move.
        CHECK(floored.counts(0, 1) == doctest::Approx(40.0).epsilon(1e-9));
        // A floored panel passes the strictness gate of clr_forward.
        CHECK_NOTHROW(clr_forward(floored));
        CHECK_NOTHROW(cdf_forward(floored));
    }
}
