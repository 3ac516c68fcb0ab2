#pragma once

#include <functional>
#include <optional>

#include <Eigen/Dense>

#include "flowbank/rng.hpp"

namespace flowbank::ssm {

/// Matrices of a linear-Gaussian model, attached when available so exact
/// oracles (Kalman) can run against the same model object:
///   x_t = F x_{t-1} + v,  v ~ N(0, V);   z_t = C x_t + w,  w ~ N(0, R).
struct LinearModelInfo {
    Eigen::MatrixXd transition;       // F
    Eigen::MatrixXd process_cov;      // V
    Eigen::MatrixXd observation;      // C
    Eigen::MatrixXd observation_cov;  // R
};

/// Nonlinear state-space model
///   x_t = g(x_{t-1}, v_t),   z_t = h(x_t, w_t)
/// expressed through the pieces the filters need. Instances are immutable
/// after construction and safe to share across threads; randomness enters
/// only through caller-supplied streams.
///
/// `observation_mean`, `observation_jacobian`, and `observation_cov` describe
/// the (possibly surrogate) Gaussian observation model driving the flow;
/// `log_likelihood`, when set, is the exact density used for weighting.
struct StateSpaceModel {
    int dim_x = 0;
    int dim_z = 0;

    std::function<Eigen::VectorXd(rng::RandomStream&)> sample_initial;

    /// x_t = transition(x_{t-1}, v) with v from sample_process_noise.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> transition;
    std::function<Eigen::VectorXd(rng::RandomStream&)> sample_process_noise;

    /// h(x, 0): noise-free observation.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> observation_mean;

    /// dh/dx at (x, 0), dim_z x dim_x.
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> observation_jacobian;

    /// R(x): observation covariance (surrogate when the true noise is not
    /// Gaussian), dim_z x dim_z, positive definite.
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> observation_cov;

    std::function<Eigen::VectorXd(const Eigen::VectorXd&, rng::RandomStream&)> sample_observation;

    /// log p(z | x). Empty means Gaussian with observation_mean/observation_cov.
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> log_likelihood;

    /// Structure hints for diagonal observation models (dim_z == dim_x, both
    /// the Jacobian and R diagonal). When set they must agree with the dense
    /// callables; the flow uses them to avoid dense solves.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> observation_jacobian_diag;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> observation_cov_diag;

    std::optional<LinearModelInfo> linear;

    [[nodiscard]] bool has_diagonal_observation() const {
        return static_cast<bool>(observation_jacobian_diag) &&
               static_cast<bool>(observation_cov_diag);
    }

    /// Exact log likelihood when provided, Gaussian fallback otherwise.
    [[nodiscard]] double observation_log_likelihood(const Eigen::VectorXd& x,
                                                    const Eigen::VectorXd& z) const;

    /// Throws std::invalid_argument naming the first missing or inconsistent
    /// piece.
    void validate() const;
};

/// Affine approximation of the observation at eta: h(x, 0) ~ H x + e, exact
/// at x = eta (e = h(eta, 0) - H eta).
struct Linearization {
    Eigen::MatrixXd H;
    Eigen::VectorXd e;
};

Linearization linearize(const StateSpaceModel& model, const Eigen::VectorXd& eta);

/// One simulated rollout. Row t of `states` is x_t for t = 0..horizon; row
/// t-1 of `observations` is z_t for t = 1..horizon.
struct Trajectory {
    Eigen::MatrixXd states;
    Eigen::MatrixXd observations;
};

Trajectory simulate(const StateSpaceModel& model, int horizon, rng::RandomStream& rs);

}  // namespace flowbank::ssm
