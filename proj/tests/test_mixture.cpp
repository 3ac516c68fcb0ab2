#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "flowbank/errors.hpp"
#include "flowbank/mixture.hpp"

using namespace flowbank;
using namespace flowbank::mix;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Gaussian unit_1d(double mean) {
    return Gaussian(Eigen::VectorXd::Constant(1, mean), Eigen::MatrixXd::Identity(1, 1));
}

}  // namespace

TEST_CASE("mixture construction normalizes and validates weights") {
    std::vector<Gaussian> comps{unit_1d(0.0), unit_1d(4.0)};
    Eigen::VectorXd w(2);
    w << 2.0, 6.0;
    GaussianMixture mixr(comps, w);
    CHECK(mixr.weights()[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(mixr.weights()[1] == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(mixr.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));

    w << -0.1, 1.1;
    CHECK_THROWS_AS(GaussianMixture(comps, w), std::invalid_argument);
    w << 0.0, 0.0;
    CHECK_THROWS_AS(GaussianMixture(comps, w), std::invalid_argument);
    CHECK_THROWS_AS(GaussianMixture({}, Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("mixture log-density equals the weighted component sum") {
    GaussianMixture mixr({unit_1d(0.0), unit_1d(4.0)}, Eigen::VectorXd::Constant(2, 0.5));
    Eigen::VectorXd x(1);
    x << 1.0;
    const double direct = std::log(
        0.5 * std::exp(mixr.component(0).log_density(x)) +
        0.5 * std::exp(mixr.component(1).log_density(x)));
    CHECK(mixr.log_density(x) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("state estimate is the weighted mean of component means") {
    Eigen::VectorXd w(2);
    SUBCASE("symmetric components cancel") {
        w << 0.5, 0.5;
        GaussianMixture mixr({unit_1d(-3.0), unit_1d(3.0)}, w);
        CHECK(state_estimate(mixr)[0] == doctest::Approx(0.0));
    }
    SUBCASE("weighted two-point form") {
        w << 0.75, 0.25;
        GaussianMixture mixr({unit_1d(0.0), unit_1d(4.0)}, w);
        CHECK(state_estimate(mixr)[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("single component returns its mean") {
        GaussianMixture mixr({unit_1d(2.5)}, Eigen::VectorXd::Ones(1));
        CHECK(state_estimate(mixr)[0] == doctest::Approx(2.5));
    }
}

TEST_CASE("log_sum_exp handles plain, empty-mass, and invalid inputs") {
    Eigen::VectorXd v(2);
    v << std::log(1.0), std::log(3.0);
    CHECK(log_sum_exp(v) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

    v << -kInf, -kInf;
    CHECK(log_sum_exp(v) == -kInf);

    v << 0.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS((void)log_sum_exp(v), NumericalError);
    v << 0.0, kInf;
    CHECK_THROWS_AS((void)log_sum_exp(v), NumericalError);
}

TEST_CASE("log_sum_exp survives scales that overflow exp") {
    Eigen::VectorXd v(2);
    v << 1000.0, 1000.0;
    CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("normalize_log_weights returns the pre-normalization mass") {
    Eigen::VectorXd lw(3);
    lw << std::log(1.0), std::log(2.0), std::log(5.0);
    const double total = normalize_log_weights(lw);
    CHECK(total == doctest::Approx(std::log(8.0)).epsilon(1e-14));
    CHECK(lw.array().exp().sum() == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd dead(2);
    dead << -kInf, -kInf;
    CHECK_THROWS_AS((void)normalize_log_weights(dead), DegenerateWeightsError);
}

TEST_CASE("effective sample size spans its endpoints") {
    Eigen::VectorXd lw = Eigen::VectorXd::Constant(100, -std::log(100.0));
    CHECK(effective_sample_size(lw) == doctest::Approx(100.0).epsilon(1e-10));

    Eigen::VectorXd onehot(4);
    onehot << 0.0, -kInf, -kInf, -kInf;
    CHECK(effective_sample_size(onehot) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("empirical moments: closed-form cases and input validation") {
    SUBCASE("two symmetric scalar particles") {
        Eigen::MatrixXd p(2, 1);
        p << -1.0, 1.0;
        Gaussian g = empirical_moments(p);
        CHECK(g.mean()[0] == doctest::Approx(0.0));
        CHECK(g.cov()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));  // 1/N normalization
    }
    SUBCASE("coincident particles collapse to a jittered point mass") {
        Eigen::MatrixXd p = Eigen::MatrixXd::Constant(5, 2, 3.0);
        Gaussian g = empirical_moments(p);
        CHECK(g.mean()[0] == doctest::Approx(3.0));
        CHECK(g.jitter() > 0.0);
    }
    SUBCASE("fewer than two particles is a caller error") {
        CHECK_THROWS_AS((void)empirical_moments(Eigen::MatrixXd::Zero(1, 2)),
                        std::invalid_argument);
    }
    SUBCASE("non-finite input is a numerical failure") {
        Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 1);
        p(1, 0) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS((void)empirical_moments(p), NumericalError);
    }
    SUBCASE("moments of 100 standard-normal draws land near the law") {
        Gaussian g(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
        rng::RandomStream rs(17);
        Gaussian fit = empirical_moments(g.sample(100, rs));
        CHECK(fit.mean().cwiseAbs().maxCoeff() < 0.5);
        CHECK((fit.cov() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.5);
    }
}

TEST_CASE("weighted moments: uniform weights reduce to empirical moments") {
    rng::RandomStream rs(4);
    Gaussian g(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
    const Eigen::MatrixXd p = g.sample(50, rs);
    const Eigen::VectorXd lw = Eigen::VectorXd::Constant(50, -std::log(50.0));
    Gaussian a = empirical_moments(p);
    Gaussian b = weighted_moments(p, lw);
    CHECK((a.mean() - b.mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.cov() - b.cov()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weighted moments: two-point closed form and point mass") {
    Eigen::MatrixXd p(2, 1);
    p << 0.0, 4.0;
    Eigen::VectorXd lw(2);
    lw << std::log(0.25), std::log(0.75);
    Gaussian g = weighted_moments(p, lw);
    CHECK(g.mean()[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(g.cov()(0, 0) == doctest::Approx(3.0).epsilon(1e-12));  // 0.25*9 + 0.75*1

    lw << 0.0, -kInf;
    Gaussian point = weighted_moments(p, lw);
    CHECK(point.mean()[0] == doctest::Approx(0.0));
    CHECK(point.jitter() > 0.0);
}

TEST_CASE("per-component weighted moments select and normalize within the component") {
    ParticleCloud cloud;
    cloud.particles = Eigen::MatrixXd(4, 1);
    cloud.particles << 0.0, 4.0, 100.0, 200.0;
    cloud.log_weights = Eigen::VectorXd(4);
    cloud.log_weights << std::log(0.25), std::log(0.75), -kInf, -kInf;
    cloud.component_ids = Eigen::VectorXi(4);
    cloud.component_ids << 0, 0, 1, 1;

    Gaussian g0 = weighted_moments(cloud, 0);
    CHECK(g0.mean()[0] == doctest::Approx(3.0).epsilon(1e-14));

    CHECK_THROWS_WITH_AS((void)weighted_moments(cloud, 1),
                         doctest::Contains("component 1"), DegenerateWeightsError);
}

TEST_CASE("mixing-proportion update follows the weighted-sum rule") {
    Eigen::VectorXd prev(2), sums(2);
    SUBCASE("direct substitution") {
        prev << 0.5, 0.5;
        sums << 3.0, 1.0;
        const Eigen::VectorXd a = update_mixture_weights(prev, sums);
        CHECK(a[0] == doctest::Approx(0.75).epsilon(1e-14));
        CHECK(a[1] == doctest::Approx(0.25).epsilon(1e-14));
    }
    SUBCASE("symmetry keeps uniform weights uniform") {
        prev << 0.5, 0.5;
        sums << 2.0, 2.0;
        const Eigen::VectorXd a = update_mixture_weights(prev, sums);
        CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("single component is always certain") {
        const Eigen::VectorXd a = update_mixture_weights(Eigen::VectorXd::Ones(1),
                                                         Eigen::VectorXd::Constant(1, 0.3));
        CHECK(a[0] == doctest::Approx(1.0));
    }
    SUBCASE("invariant to common rescaling of the sums") {
        prev << 0.3, 0.7;
        sums << 5.0, 2.0;
        const Eigen::VectorXd a = update_mixture_weights(prev, sums);
        const Eigen::VectorXd b = update_mixture_weights(prev, 1e6 * sums);
        CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
    }
    SUBCASE("all-zero sums are a degeneracy error") {
        prev << 0.5, 0.5;
        sums << 0.0, 0.0;
        CHECK_THROWS_AS((void)update_mixture_weights(prev, sums), DegenerateWeightsError);
    }
}

TEST_CASE("log-domain mixing update matches the linear-domain rule under underflow") {
    Eigen::VectorXd prev(2), log_sums(2);
    prev << 0.5, 0.5;
    log_sums << -800.0, -800.0 + std::log(3.0);  // exp underflows to 0
    const Eigen::VectorXd a = update_mixture_weights_log(prev, log_sums);
    CHECK(a[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(a[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("effective number of Gaussians endpoints and interior value") {
    Eigen::VectorXd onehot(5);
    onehot << 1.0, 0.0, 0.0, 0.0, 0.0;
    CHECK(effective_num_gaussians(onehot) == 1.0);

    CHECK(effective_num_gaussians(Eigen::VectorXd::Constant(4, 0.25)) == 4.0);

    Eigen::VectorXd half(5);
    half << 0.5, 0.5, 0.0, 0.0, 0.0;
    CHECK(effective_num_gaussians(half) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("per-component sampling stacks deterministic blocks") {
    GaussianMixture mixr({unit_1d(-50.0), unit_1d(50.0)}, Eigen::VectorXd::Constant(2, 0.5));
    rng::RandomStream rs(12);
    ParticleCloud cloud = sample_per_component(mixr, 10, rs);
    REQUIRE(cloud.size() == 20);
    for (int i = 0; i < 10; ++i) {
        CHECK(cloud.component_ids[i] == 0);
        CHECK(cloud.particles(i, 0) < 0.0);
    }
    for (int i = 10; i < 20; ++i) {
        CHECK(cloud.component_ids[i] == 1);
        CHECK(cloud.particles(i, 0) > 0.0);
    }
    CHECK(cloud.log_weights[0] == doctest::Approx(-std::log(20.0)).epsilon(1e-14));

    rng::RandomStream rs2(12);
    ParticleCloud again = sample_per_component(mixr, 10, rs2);
    CHECK((cloud.particles.array() == again.particles.array()).all());
}

TEST_CASE("systematic resampling respects proportional allocation") {
    rng::RandomStream rs(3);
    SUBCASE("uniform weights select every index exactly once") {
        Eigen::VectorXd lw = Eigen::VectorXd::Constant(8, -std::log(8.0));
        std::vector<int> idx = systematic_resample(lw, 8, rs);
        std::vector<int> counts(8, 0);
        for (int i : idx) ++counts[static_cast<std::size_t>(i)];
        for (int c : counts) CHECK(c == 1);
    }
    SUBCASE("a point mass is selected every time") {
        Eigen::VectorXd lw(3);
        lw << -kInf, 0.0, -kInf;
        for (int i : systematic_resample(lw, 5, rs)) CHECK(i == 1);
    }
    SUBCASE("counts deviate from expectation by at most one") {
        Eigen::VectorXd lw(2);
        lw << std::log(0.75), std::log(0.25);
        std::vector<int> idx = systematic_resample(lw, 1000, rs);
        int c0 = 0;
        for (int i : idx) c0 += (i == 0);
        CHECK(std::abs(c0 - 750) <= 1);
    }
}
