#pragma once

#include <vector>

#include <Eigen/Dense>

#include "flowbank/gaussian.hpp"
#include "flowbank/ssm.hpp"

namespace flowbank::flow {

struct ScheduleConfig {
    int n_steps = 29;
    double ratio = 1.2;
};

/// Pseudo-time discretization of (0, 1]: strictly increasing lambdas ending
/// exactly at 1, step sizes positive and summing to 1, with
/// lambdas[l] = lambdas[l-1] + epsilons[l].
struct FlowSchedule {
    Eigen::VectorXd lambdas;
    Eigen::VectorXd epsilons;

    [[nodiscard]] int size() const { return static_cast<int>(lambdas.size()); }
};

/// Geometric schedule: epsilons proportional to ratio^l, normalized.
/// ratio > 1 spends more pseudo-time near lambda = 1.
FlowSchedule make_schedule(int n_steps, double ratio);
FlowSchedule make_schedule(const ScheduleConfig& cfg);

/// Affine drift of one flow step: d eta = (A eta + b) d lambda.
struct FlowStepParams {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

/// Drift parameters at pseudo-time lambda for the linearized observation
/// z ~ N(H x + e, R) and predictive Gaussian (eta0_bar implicit in P):
///   A = -1/2 P H^T (lambda H P H^T + R)^{-1} H
///   b = (I + 2 lambda A) [ (I + lambda A) P H^T R^{-1} (z - e) + A eta0_bar ]
FlowStepParams flow_params(const Eigen::MatrixXd& H, const Eigen::VectorXd& e,
                           const Eigen::MatrixXd& P, const Eigen::MatrixXd& R,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& eta0_bar,
                           double lambda);

/// Outcome of migrating a particle set through the full schedule.
struct FlowResult {
    /// Migrated particles, one per row.
    Eigen::MatrixXd eta1;

    /// Per-particle accumulated log |det T'|, sum over steps of
    /// log det(I + eps_l A_l).
    Eigen::VectorXd log_jac_det;

    /// Per-particle, per-step affine maps; populated only when requested.
    std::vector<std::vector<FlowStepParams>> steps;
};

/// Exact-flow variant: one linearization per lambda step, taken at the flowed
/// mean trajectory (starts at pred.mean()), shared by all particles. The
/// log-Jacobian is therefore identical across particles.
FlowResult edh_flow(const ssm::StateSpaceModel& model,
                    const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                    const mix::Gaussian& pred, const Eigen::VectorXd& z,
                    const FlowSchedule& schedule, bool retain_steps = false);

/// Localized variant: each particle relinearizes at its own current position
/// every lambda step. Uses diagonal-observation hints when the model provides
/// them; otherwise runs the dense path.
FlowResult ledh_flow(const ssm::StateSpaceModel& model,
                     const Eigen::Ref<const Eigen::MatrixXd>& eta0,
                     const mix::Gaussian& pred, const Eigen::VectorXd& z,
                     const FlowSchedule& schedule, bool retain_steps = false);

/// Applies the retained per-step maps of one particle in reverse, recovering
/// the pre-flow state from the migrated one.
Eigen::VectorXd invert_flow(const std::vector<FlowStepParams>& steps,
                            const FlowSchedule& schedule,
                            const Eigen::VectorXd& eta1);

}  // namespace flowbank::flow
