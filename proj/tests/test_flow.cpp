#include <doctest.h>

#include <cmath>

#include "flowbank/errors.hpp"
#include "flowbank/flow.hpp"
#include "flowbank/mixture.hpp"
#include "flowbank/scenarios.hpp"

using namespace flowbank;
using namespace flowbank::flow;

namespace {

/// 2-D model with a bent observation h(x) = (x0 + 0.1 x1^2, x1) so the
/// localized and exact flows genuinely differ.
ssm::StateSpaceModel bent_model() {
    ssm::StateSpaceModel m;
    m.dim_x = 2;
    m.dim_z = 2;
    m.sample_initial = [](rng::RandomStream& rs) {
        return Eigen::VectorXd(rs.normal_vector(2));
    };
    m.transition = [](const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
        return Eigen::VectorXd(x + v);
    };
    m.sample_process_noise = [](rng::RandomStream& rs) {
        return Eigen::VectorXd(0.1 * rs.normal_vector(2));
    };
    m.observation_mean = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd h(2);
        h << x[0] + 0.1 * x[1] * x[1], x[1];
        return h;
    };
    m.observation_jacobian = [](const Eigen::VectorXd& x) {
        Eigen::MatrixXd H(2, 2);
        H << 1.0, 0.2 * x[1], 0.0, 1.0;
        return H;
    };
    m.observation_cov = [](const Eigen::VectorXd&) {
        return Eigen::MatrixXd(0.5 * Eigen::MatrixXd::Identity(2, 2));
    };
    m.sample_observation = [obs = m.observation_mean](const Eigen::VectorXd& x,
                                                      rng::RandomStream& rs) {
        return Eigen::VectorXd(obs(x) + std::sqrt(0.5) * rs.normal_vector(2));
    };
    return m;
}

/// Same interface with a zero-information observation: H = 0 everywhere.
ssm::StateSpaceModel blind_model() {
    ssm::StateSpaceModel m = bent_model();
    m.observation_mean = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(2); };
    m.observation_jacobian = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(2, 2); };
    return m;
}

}  // namespace

TEST_CASE("geometric schedule hits the documented shapes") {
    SUBCASE("single step covers all of pseudo-time") {
        auto s = make_schedule(1, 1.0);
        REQUIRE(s.size() == 1);
        CHECK(s.epsilons[0] == 1.0);
        CHECK(s.lambdas[0] == 1.0);
    }
    SUBCASE("two uniform steps") {
        auto s = make_schedule(2, 1.0);
        CHECK(s.epsilons[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.lambdas[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(s.lambdas[1] == 1.0);
    }
    SUBCASE("default 29-step ratio-1.2 schedule") {
        auto s = make_schedule(29, 1.2);
        REQUIRE(s.size() == 29);
        CHECK(std::abs(s.epsilons.sum() - 1.0) < 1e-12);
        CHECK(s.lambdas[28] == 1.0);
        for (int l = 1; l < 29; ++l) {
            CHECK(s.lambdas[l] > s.lambdas[l - 1]);
            CHECK(s.epsilons[l] > 0.0);
        }
        // interior steps grow by the nominal ratio
        for (int l = 1; l < 28; ++l)
            CHECK(s.epsilons[l] / s.epsilons[l - 1] == doctest::Approx(1.2).epsilon(1e-9));
    }
    SUBCASE("invalid parameters are rejected") {
        CHECK_THROWS_AS((void)make_schedule(0, 1.2), std::invalid_argument);
        CHECK_THROWS_AS((void)make_schedule(5, 0.0), std::invalid_argument);
        CHECK_THROWS_AS((void)make_schedule(5, -1.0), std::invalid_argument);
    }
}

TEST_CASE("flow drift parameters: frozen scalar cases") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd onev = Eigen::VectorXd::Ones(1);

    SUBCASE("lambda near zero halves the prior-to-posterior drift") {
        auto fp = flow_params(one, zero, one, one, zero, zero, 1e-12);
        CHECK(fp.A(0, 0) == doctest::Approx(-0.5).epsilon(1e-9));
    }
    SUBCASE("no observation coupling means no drift") {
        auto fp = flow_params(Eigen::MatrixXd::Zero(1, 1), zero, one, one, onev, onev, 0.7);
        CHECK(fp.A(0, 0) == 0.0);
        CHECK(fp.b[0] == 0.0);
    }
    SUBCASE("unit scalar model at lambda 1 with z = e") {
        // A = -1/2 * (1 + 1)^-1 = -1/4; b = (1 + 2A)(0 + A * 1) = (1/2)(-1/4) = -1/8
        auto fp = flow_params(one, onev, one, one, onev, onev, 1.0);
        CHECK(fp.A(0, 0) == doctest::Approx(-0.25).epsilon(1e-12));
        CHECK(fp.b[0] == doctest::Approx(-0.125).epsilon(1e-12));
    }
    SUBCASE("shape mismatches and out-of-range lambda are rejected") {
        CHECK_THROWS_AS((void)flow_params(one, zero, one, one, zero, zero, 0.0),
                        std::invalid_argument);
        CHECK_THROWS_AS((void)flow_params(one, zero, one, one, zero, zero, 1.5),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            (void)flow_params(Eigen::MatrixXd::Ones(2, 1), zero, one, one, zero, zero, 0.5),
            std::invalid_argument);
    }
}

TEST_CASE("zero-information flow is the identity with zero log-Jacobian") {
    auto m = blind_model();
    rng::RandomStream rs(9);
    Eigen::MatrixXd eta0 = rs.normal_vector(20).reshaped(10, 2);
    mix::Gaussian pred = mix::empirical_moments(eta0);
    auto sched = make_schedule(8, 1.2);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(2);

    for (bool localized : {false, true}) {
        auto res = localized ? ledh_flow(m, eta0, pred, z, sched)
                             : edh_flow(m, eta0, pred, z, sched);
        CHECK((res.eta1.array() == eta0.array()).all());
        CHECK(res.log_jac_det.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("scalar flow matches an independent plain-double implementation") {
    // 1-D linear-Gaussian observation: H = 1, R = r, predictive (mu, p).
    const double mu = 0.4, p = 2.0, r = 0.5, zval = 1.3;
    auto sc = scenarios::build_linear_gaussian(1, 5);
    ssm::StateSpaceModel m = sc.model;
    m.observation_cov = [r](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Constant(1, 1, r);
    };

    Eigen::MatrixXd eta0(1, 1);
    eta0 << -0.7;
    mix::Gaussian pred(Eigen::VectorXd::Constant(1, mu), Eigen::MatrixXd::Constant(1, 1, p));
    auto sched = make_schedule(12, 1.2);
    auto res = ledh_flow(m, eta0, pred, Eigen::VectorXd::Constant(1, zval), sched);

    // independent scalar recursion in plain doubles
    double eta = -0.7, ljd = 0.0;
    for (int l = 0; l < sched.size(); ++l) {
        const double lam = sched.lambdas[l], eps = sched.epsilons[l];
        const double a = -0.5 * p / (lam * p + r);
        const double b = (1.0 + 2.0 * lam * a) * ((1.0 + lam * a) * (p / r) * zval + a * mu);
        eta += eps * (a * eta + b);
        ljd += std::log(1.0 + eps * a);
    }
    CHECK(res.eta1(0, 0) == doctest::Approx(eta).epsilon(1e-6));
    CHECK(res.log_jac_det[0] == doctest::Approx(ljd).epsilon(1e-6));
}

TEST_CASE("retained steps invert the flow to the pre-flow particles") {
    auto m = bent_model();
    rng::RandomStream rs(21);
    Eigen::MatrixXd eta0 = rs.normal_vector(12).reshaped(6, 2);
    mix::Gaussian pred = mix::empirical_moments(eta0);
    Eigen::VectorXd z(2);
    z << 0.8, -0.3;
    auto sched = make_schedule(15, 1.2);

    auto res = ledh_flow(m, eta0, pred, z, sched, true);
    REQUIRE(res.steps.size() == 6);
    for (int i = 0; i < 6; ++i) {
        Eigen::VectorXd back = invert_flow(res.steps[static_cast<std::size_t>(i)], sched,
                                           res.eta1.row(i).transpose());
        CHECK((back - eta0.row(i).transpose()).norm() < 1e-8);
    }
}

TEST_CASE("exact and localized flows coincide on a linear observation model") {
    auto sc = scenarios::build_linear_gaussian(3, 5);
    rng::RandomStream rs(5);
    Eigen::MatrixXd eta0 = rs.normal_vector(60).reshaped(20, 3);
    mix::Gaussian pred = mix::empirical_moments(eta0);
    Eigen::VectorXd z(3);
    z << 1.0, -0.5, 0.2;
    auto sched = make_schedule(10, 1.2);

    auto a = edh_flow(sc.model, eta0, pred, z, sched);
    auto b = ledh_flow(sc.model, eta0, pred, z, sched);
    CHECK((a.eta1.array() == b.eta1.array()).all());
    CHECK((a.log_jac_det.array() == b.log_jac_det.array()).all());
}

TEST_CASE("exact flow maps identical particles identically") {
    auto m = bent_model();
    Eigen::MatrixXd eta0 = Eigen::MatrixXd::Constant(4, 2, 0.3);
    mix::Gaussian pred(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd z(2);
    z << 0.5, 0.5;
    auto res = edh_flow(m, eta0, pred, z, make_schedule(6, 1.2));
    for (int i = 1; i < 4; ++i)
        CHECK((res.eta1.row(i).array() == res.eta1.row(0).array()).all());
}

TEST_CASE("flowed cloud converges to the Kalman posterior on a linear model") {
    // one assimilation of z from the exact predictive: flow moments should
    // approach the conjugate posterior as N grows
    auto sc = scenarios::build_linear_gaussian(2, 5);
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2) * 2.0;
    const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    mix::Gaussian pred(mu, P);

    Eigen::VectorXd z(2);
    z << 1.0, -2.0;
    rng::RandomStream rs(33);
    Eigen::MatrixXd eta0 = pred.sample(10000, rs);

    auto res = ledh_flow(sc.model, eta0, pred, z, make_schedule(29, 1.2));
    mix::Gaussian post = mix::empirical_moments(res.eta1);

    // conjugate posterior with H = I, R = I: cov = (P^-1 + I)^-1, mean = cov (P^-1 mu + z)
    const Eigen::MatrixXd cov_exact =
        (P.inverse() + Eigen::MatrixXd::Identity(2, 2)).inverse();
    const Eigen::VectorXd mean_exact = cov_exact * (P.inverse() * mu + z);

    CHECK((post.mean() - mean_exact).norm() < 0.05 * std::max(1.0, mean_exact.norm()));
    CHECK((post.cov() - cov_exact).norm() < 0.05 * cov_exact.norm());
}

TEST_CASE("halving the step size barely moves the destination") {
    auto sc = scenarios::build_linear_gaussian(2, 5);
    rng::RandomStream rs(14);
    Eigen::MatrixXd eta0 = rs.normal_vector(40).reshaped(20, 2);
    mix::Gaussian pred = mix::empirical_moments(eta0);
    Eigen::VectorXd z(2);
    z << 0.6, -0.1;

    auto coarse = ledh_flow(sc.model, eta0, pred, z, make_schedule(10, 1.0));
    auto fine = ledh_flow(sc.model, eta0, pred, z, make_schedule(20, 1.0));
    CHECK((coarse.eta1 - fine.eta1).norm() < 0.01 * fine.eta1.norm());
}

TEST_CASE("diagonal fast path agrees with the dense flow") {
    scenarios::SensorNetConfig cfg;
    cfg.grid_side = 3;  // 9-dimensional state keeps the dense path cheap
    cfg.horizon = 5;
    auto sc = scenarios::build_sensor_net(cfg);
    REQUIRE(sc.model.has_diagonal_observation());

    rng::RandomStream rs(6);
    mix::Gaussian prior = sc.prior;
    Eigen::MatrixXd eta0 = prior.sample(30, rs);
    mix::Gaussian pred = mix::empirical_moments(eta0);
    Eigen::VectorXd z = sc.model.sample_observation(prior.mean(), rs);
    auto sched = make_schedule(10, 1.2);

    auto diag = ledh_flow(sc.model, eta0, pred, z, sched, true);

    ssm::StateSpaceModel dense = sc.model;
    dense.observation_jacobian_diag = nullptr;
    dense.observation_cov_diag = nullptr;
    auto ref = ledh_flow(dense, eta0, pred, z, sched, true);

    CHECK((diag.eta1 - ref.eta1).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((diag.log_jac_det - ref.log_jac_det).cwiseAbs().maxCoeff() < 1e-7);

    // retained affine maps agree too (A is reconstructed column-wise on the
    // diagonal path)
    const auto& fa = diag.steps[0][3];
    const auto& fb = ref.steps[0][3];
    CHECK((fa.A - fb.A).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((fa.b - fb.b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("invert_flow solves a hand-built affine step exactly") {
    std::vector<FlowStepParams> steps(1);
    steps[0].A = Eigen::MatrixXd::Identity(1, 1) * -3.0;  // I + 1*A = -2
    steps[0].b = Eigen::VectorXd::Zero(1);
    auto sched = make_schedule(1, 1.0);
    Eigen::VectorXd eta1 = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd back = invert_flow(steps, sched, eta1);
    CHECK(back[0] == doctest::Approx(-0.5));
}
