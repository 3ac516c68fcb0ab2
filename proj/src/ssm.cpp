#include "flowbank/ssm.hpp"

#include <cmath>
#include <numbers>

#include "flowbank/errors.hpp"
#include "flowbank/gaussian.hpp"

namespace flowbank::ssm {

double StateSpaceModel::observation_log_likelihood(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& z) const {
    if (log_likelihood) return log_likelihood(x, z);
    mix::Gaussian g(observation_mean(x), observation_cov(x));
    return g.log_density(z);
}

void StateSpaceModel::validate() const {
    if (dim_x <= 0) throw std::invalid_argument("StateSpaceModel: dim_x must be positive");
    if (dim_z <= 0) throw std::invalid_argument("StateSpaceModel: dim_z must be positive");
    if (!sample_initial) throw std::invalid_argument("StateSpaceModel: sample_initial missing");
    if (!transition) throw std::invalid_argument("StateSpaceModel: transition missing");
    if (!sample_process_noise)
        throw std::invalid_argument("StateSpaceModel: sample_process_noise missing");
    if (!observation_mean) throw std::invalid_argument("StateSpaceModel: observation_mean missing");
    if (!observation_jacobian)
        throw std::invalid_argument("StateSpaceModel: observation_jacobian missing");
    if (!observation_cov) throw std::invalid_argument("StateSpaceModel: observation_cov missing");
    if (!sample_observation)
        throw std::invalid_argument("StateSpaceModel: sample_observation missing");
    if (static_cast<bool>(observation_jacobian_diag) != static_cast<bool>(observation_cov_diag))
        throw std::invalid_argument(
            "StateSpaceModel: diagonal hints must be provided together");
    if (has_diagonal_observation() && dim_z != dim_x)
        throw std::invalid_argument(
            "StateSpaceModel: diagonal observation hints require dim_z == dim_x");
}

Linearization linearize(const StateSpaceModel& model, const Eigen::VectorXd& eta) {
    if (eta.size() != model.dim_x)
        throw std::invalid_argument("linearize: state dimension mismatch");
    Linearization lin;
    lin.H = model.observation_jacobian(eta);
    if (lin.H.rows() != model.dim_z || lin.H.cols() != model.dim_x)
        throw std::invalid_argument("linearize: Jacobian shape mismatch");
    lin.e = model.observation_mean(eta) - lin.H * eta;
    if (!lin.H.allFinite() || !lin.e.allFinite())
        throw NumericalError("linearize: non-finite linearization");
    return lin;
}

Trajectory simulate(const StateSpaceModel& model, int horizon, rng::RandomStream& rs) {
    if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");
    Trajectory traj;
    traj.states.resize(horizon + 1, model.dim_x);
    traj.observations.resize(horizon, model.dim_z);
    Eigen::VectorXd x = model.sample_initial(rs);
    traj.states.row(0) = x.transpose();
    for (int t = 1; t <= horizon; ++t) {
        x = model.transition(x, model.sample_process_noise(rs));
        if (!x.allFinite()) throw NumericalError("simulate: non-finite state");
        traj.states.row(t) = x.transpose();
        traj.observations.row(t - 1) = model.sample_observation(x, rs).transpose();
    }
    return traj;
}

}  // namespace flowbank::ssm
