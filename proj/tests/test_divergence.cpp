#include <doctest.h>

#include <random>

#include "attnsense/divergence.hpp"
#include "test_support.hpp"

using namespace attnsense;
using attnsense::testing::naive_jsd;
using attnsense::testing::naive_kl;
using attnsense::testing::random_summary;
using attnsense::testing::rel_err;

namespace {

GaussianSummary g1(double mu, double sigma) {
    return {Eigen::VectorXd::Constant(1, mu), Eigen::VectorXd::Constant(1, sigma)};
}

}  // namespace

TEST_CASE("kl_diag_gauss closed form") {
    CHECK(kl_diag_gauss(g1(0, 1), g1(0, 1)) == 0.0);
    CHECK(kl_diag_gauss(g1(0, 1), g1(1, 1)) == doctest::Approx(0.5).epsilon(1e-15));

    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_summary(rng, 6), q = random_summary(rng, 6);
        CHECK(rel_err(kl_diag_gauss(p, q), naive_kl(p, q)) < 1e-12);
        CHECK(kl_diag_gauss(p, q) >= 0.0);
    }
    CHECK_THROWS_AS(kl_diag_gauss(g1(0, 1), random_summary(rng, 2)), ContractError);
}

TEST_CASE("kl_diag_gauss matches quadrature on random d=4 pairs") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const auto p = random_summary(rng, 4), q = random_summary(rng, 4);
        CHECK(rel_err(kl_diag_gauss(p, q), kl_numeric_oracle(p, q)) < 1e-6);
    }
}

TEST_CASE("kl_numeric_oracle reference cases") {
    CHECK(std::abs(kl_numeric_oracle(g1(0, 1), g1(0, 1))) < 1e-9);
    CHECK(kl_numeric_oracle(g1(0, 1), g1(1, 1)) == doctest::Approx(0.5).epsilon(2e-7));
}

TEST_CASE("sigma floor keeps zero-variance channels finite") {
    const auto zero = g1(0, 0);
    CHECK(jsd(zero, zero) == 0.0);
    const double v = kl_diag_gauss(zero, g1(0, 1));
    CHECK(std::isfinite(v));
    CHECK(jsd(zero, g1(1e-3, 0)) > 0.0);
    DivergenceConfig bad;
    bad.sigma_floor = 0.0;
    CHECK_THROWS_AS(jsd(zero, zero, bad), ContractError);
}

TEST_CASE("midpoint") {
    const auto m = midpoint(g1(0, 1), g1(2, 3));
    CHECK(m.mu[0] == 1.0);
    CHECK(m.sigma[0] == 2.0);
    std::mt19937_64 rng(4);
    const auto p = random_summary(rng, 5), q = random_summary(rng, 5);
    CHECK(midpoint(p, p) == p);
    CHECK(midpoint(p, q) == midpoint(q, p));
    const auto mv = midpoint(g1(0, 1), g1(0, 7), MidpointRule::average_variance);
    CHECK(mv.sigma[0] == doctest::Approx(5.0));
}

TEST_CASE("jsd") {
    CHECK(jsd(g1(0, 1), g1(0, 1)) == 0.0);
    CHECK(jsd(g1(0, 1), g1(2, 1)) == doctest::Approx(0.5).epsilon(1e-15));

    std::mt19937_64 rng(9);
    for (int i = 0; i < 500; ++i) {
        const auto p = random_summary(rng, 1 + i % 7), q = random_summary(rng, 1 + i % 7);
        const double a = jsd(p, q), b = jsd(q, p);
        CHECK(a == b);
        CHECK(a >= -1e-12);
        CHECK(rel_err(a, naive_jsd(p, q)) < 1e-10);
    }
}

TEST_CASE("translation and common scale invariance") {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 100; ++i) {
        auto p = random_summary(rng, 8), q = random_summary(rng, 8);
        const double kl = kl_diag_gauss(p, q), js = jsd(p, q);

        const Eigen::VectorXd shift = random_summary(rng, 8, -100, 100).mu;
        auto pt = p, qt = q;
        pt.mu += shift;
        qt.mu += shift;
        CHECK(rel_err(kl_diag_gauss(pt, qt), kl) < 1e-9);
        CHECK(rel_err(jsd(pt, qt), js) < 1e-9);

        const double a = std::uniform_real_distribution<double>(0.01, 100)(rng);
        auto ps = p, qs = q;
        ps.mu *= a;
        ps.sigma *= a;
        qs.mu *= a;
        qs.sigma *= a;
        DivergenceConfig scaled;
        scaled.sigma_floor = 1e-6 * a;
        CHECK(rel_err(kl_diag_gauss(ps, qs, scaled), kl) < 1e-9);
        CHECK(rel_err(jsd(ps, qs, scaled), js) < 1e-9);
    }
}

TEST_CASE("float scalar instantiation") {
    using SummaryF = BasicGaussianSummary<float>;
    SummaryF p{Eigen::VectorXf::Constant(3, 0.f), Eigen::VectorXf::Constant(3, 1.f)};
    SummaryF q{Eigen::VectorXf::Constant(3, 2.f), Eigen::VectorXf::Constant(3, 1.f)};
    CHECK(jsd(p, q) == doctest::Approx(1.5f));
    CHECK(kl_diag_gauss(p, q) == doctest::Approx(6.0f));
}

TEST_CASE("pairwise accumulation on long vectors") {
    const int d = 5000;
    GaussianSummary p{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
    GaussianSummary q{Eigen::VectorXd::Constant(d, 1e-3), Eigen::VectorXd::Ones(d)};
    CHECK(rel_err(kl_diag_gauss(p, q), d * 0.5e-6) < 1e-12);
}
