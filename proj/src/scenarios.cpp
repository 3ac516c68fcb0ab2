#include "flowbank/scenarios.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "flowbank/errors.hpp"

namespace flowbank::scenarios {

namespace {

Eigen::MatrixXd isotropic(int dim, double var) {
    return var * Eigen::MatrixXd::Identity(dim, dim);
}

}  // namespace

const char* to_string(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::linear_gaussian: return "linear_gaussian";
        case ScenarioKind::acoustic: return "acoustic";
        case ScenarioKind::sensor_net: return "sensor_net";
    }
    return "unknown";
}

std::optional<ScenarioKind> parse_scenario_kind(std::string_view name) {
    for (ScenarioKind k : {ScenarioKind::linear_gaussian, ScenarioKind::acoustic,
                           ScenarioKind::sensor_net})
        if (name == to_string(k)) return k;
    return std::nullopt;
}

ErrorMetric metric_for(ScenarioKind kind) {
    return kind == ScenarioKind::acoustic ? ErrorMetric::omat : ErrorMetric::mse;
}

void LinearGaussianConfig::validate() const {
    if (dim < 1) throw std::invalid_argument("linear_gaussian: dim must be >= 1");
    if (horizon < 1) throw std::invalid_argument("linear_gaussian: horizon must be >= 1");
    if (!(process_var > 0.0) || !(obs_var > 0.0) || !(prior_var > 0.0))
        throw std::invalid_argument("linear_gaussian: variances must be positive");
    if (!std::isfinite(transition_scale))
        throw std::invalid_argument("linear_gaussian: transition_scale must be finite");
}

void AcousticConfig::validate() const {
    if (n_targets < 1) throw std::invalid_argument("acoustic: n_targets must be >= 1");
    if (sensor_grid_side < 1) throw std::invalid_argument("acoustic: sensor_grid_side must be >= 1");
    if (!(region > 0.0)) throw std::invalid_argument("acoustic: region must be positive");
    if (!(amplitude > 0.0)) throw std::invalid_argument("acoustic: amplitude must be positive");
    if (!(range_offset > 0.0)) throw std::invalid_argument("acoustic: range_offset must be positive");
    if (!(obs_noise_var > 0.0) || !(velocity_noise_var > 0.0))
        throw std::invalid_argument("acoustic: noise variances must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("acoustic: dt must be positive");
    if (horizon < 1) throw std::invalid_argument("acoustic: horizon must be >= 1");
    if (!initial_targets.empty() &&
        static_cast<int>(initial_targets.size()) != n_targets)
        throw std::invalid_argument("acoustic: initial_targets size must equal n_targets");
    if (initial_targets.empty() && n_targets != 4)
        throw std::invalid_argument("acoustic: default initial states exist only for 4 targets");
    if (!(prior_cov_diag.array() > 0.0).all())
        throw std::invalid_argument("acoustic: prior_cov_diag must be positive");
}

void SensorNetConfig::validate() const {
    if (grid_side < 2) throw std::invalid_argument("sensor_net: grid_side must be >= 2");
    if (!(ar_coeff > 0.0) || !std::isfinite(ar_coeff))
        throw std::invalid_argument("sensor_net: ar_coeff must be positive and finite");
    if (!(kernel_length > 0.0)) throw std::invalid_argument("sensor_net: kernel_length must be positive");
    if (!(dof > 2.0)) throw std::invalid_argument("sensor_net: dof must exceed 2");
    if (!std::isfinite(skew)) throw std::invalid_argument("sensor_net: skew must be finite");
    if (!(count_scale > 0.0)) throw std::invalid_argument("sensor_net: count_scale must be positive");
    if (!std::isfinite(count_slope))
        throw std::invalid_argument("sensor_net: count_slope must be finite");
    if (!(surrogate_floor > 0.0))
        throw std::invalid_argument("sensor_net: surrogate_floor must be positive");
    if (horizon < 1) throw std::invalid_argument("sensor_net: horizon must be >= 1");
}

int ScenarioConfig::horizon() const {
    switch (kind) {
        case ScenarioKind::linear_gaussian: return linear_gaussian.horizon;
        case ScenarioKind::acoustic: return acoustic.horizon;
        case ScenarioKind::sensor_net: return sensor_net.horizon;
    }
    throw std::invalid_argument("ScenarioConfig: unknown kind");
}

void ScenarioConfig::validate() const {
    switch (kind) {
        case ScenarioKind::linear_gaussian: linear_gaussian.validate(); return;
        case ScenarioKind::acoustic: acoustic.validate(); return;
        case ScenarioKind::sensor_net: sensor_net.validate(); return;
    }
    throw std::invalid_argument("ScenarioConfig: unknown kind");
}

Scenario build_linear_gaussian(const LinearGaussianConfig& config) {
    config.validate();
    const int d = config.dim;
    const double s = config.transition_scale;
    const double sig_v = std::sqrt(config.process_var);
    const double sig_w = std::sqrt(config.obs_var);

    ssm::LinearModelInfo info{s * Eigen::MatrixXd::Identity(d, d),
                              isotropic(d, config.process_var),
                              Eigen::MatrixXd::Identity(d, d),
                              isotropic(d, config.obs_var)};

    mix::Gaussian prior(Eigen::VectorXd::Zero(d), isotropic(d, config.prior_var));

    ssm::StateSpaceModel model;
    model.dim_x = d;
    model.dim_z = d;
    model.sample_initial = [prior](rng::RandomStream& rs) { return prior.sample(rs); };
    model.transition = [s](const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
        return (s * x + v).eval();
    };
    model.sample_process_noise = [d, sig_v](rng::RandomStream& rs) {
        return (sig_v * rs.normal_vector(d)).eval();
    };
    model.observation_mean = [](const Eigen::VectorXd& x) { return x; };
    model.observation_jacobian = [d](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Identity(d, d).eval();
    };
    model.observation_cov = [d, var = config.obs_var](const Eigen::VectorXd&) {
        return isotropic(d, var);
    };
    model.sample_observation = [d, sig_w](const Eigen::VectorXd& x, rng::RandomStream& rs) {
        return (x + sig_w * rs.normal_vector(d)).eval();
    };
    model.linear = info;
    model.validate();

    return Scenario{ScenarioKind::linear_gaussian, metric_for(ScenarioKind::linear_gaussian), config.horizon,
                    std::move(model), std::move(prior), 0, nullptr};
}

Scenario build_linear_gaussian(int dim, int horizon) {
    LinearGaussianConfig config;
    config.dim = dim;
    config.horizon = horizon;
    return build_linear_gaussian(config);
}

namespace {

// Two pairs of tracks with close encounters (separation ~0.5 around steps 8
// and 14 of a 20-step horizon): superposed amplitudes make target identity
// ambiguous there, so the joint posterior is genuinely multimodal.
std::vector<Eigen::Vector4d> default_acoustic_targets() {
    return {Eigen::Vector4d(6.0, 14.0, 1.0, 1.0),
            Eigen::Vector4d(22.0, 13.5, -1.0, 1.0),
            Eigen::Vector4d(33.0, 28.0, -0.5, -1.0),
            Eigen::Vector4d(19.5, 7.0, 0.5, 0.5)};
}

}  // namespace

Scenario build_acoustic(const AcousticConfig& config) {
    config.validate();
    const int m = config.n_targets;
    const int d = 4 * m;
    const int side = config.sensor_grid_side;
    const int n_sensors = side * side;
    const double psi = config.amplitude;
    const double d0 = config.range_offset;
    const double sig_w = std::sqrt(config.obs_noise_var);
    const double sig_v = std::sqrt(config.velocity_noise_var);
    const double dt = config.dt;

    // Sensor grid at cell centers: spacing region/side, offset spacing/2.
    Eigen::MatrixXd sensors(n_sensors, 2);
    const double spacing = config.region / static_cast<double>(side);
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j) {
            sensors(i * side + j, 0) = spacing * (0.5 + i);
            sensors(i * side + j, 1) = spacing * (0.5 + j);
        }

    const std::vector<Eigen::Vector4d> targets =
        config.initial_targets.empty() ? default_acoustic_targets() : config.initial_targets;

    Eigen::VectorXd init(d);
    Eigen::MatrixXd prior_cov = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < m; ++k) {
        init.segment<4>(4 * k) = targets[static_cast<std::size_t>(k)];
        prior_cov.block<4, 4>(4 * k, 4 * k) = config.prior_cov_diag.asDiagonal();
    }
    mix::Gaussian prior(init, prior_cov);

    Eigen::Matrix4d f_target = Eigen::Matrix4d::Identity();
    f_target(0, 2) = dt;
    f_target(1, 3) = dt;

    ssm::StateSpaceModel model;
    model.dim_x = d;
    model.dim_z = n_sensors;
    model.sample_initial = [init](rng::RandomStream&) { return init; };
    model.transition = [m, f_target](const Eigen::VectorXd& x, const Eigen::VectorXd& v) {
        Eigen::VectorXd out(x.size());
        for (int k = 0; k < m; ++k)
            out.segment<4>(4 * k) = f_target * x.segment<4>(4 * k) + v.segment<4>(4 * k);
        return out;
    };
    model.sample_process_noise = [m, sig_v](rng::RandomStream& rs) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(4 * m);
        for (int k = 0; k < m; ++k) {
            v[4 * k + 2] = sig_v * rs.normal();
            v[4 * k + 3] = sig_v * rs.normal();
        }
        return v;
    };
    model.observation_mean = [m, n_sensors, sensors, psi, d0](const Eigen::VectorXd& x) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n_sensors);
        for (int s = 0; s < n_sensors; ++s)
            for (int k = 0; k < m; ++k) {
                const double dx = x[4 * k] - sensors(s, 0);
                const double dy = x[4 * k + 1] - sensors(s, 1);
                z[s] += psi / (std::sqrt(dx * dx + dy * dy) + d0);
            }
        return z;
    };
    model.observation_jacobian = [m, n_sensors, sensors, psi, d0](const Eigen::VectorXd& x) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_sensors, x.size());
        for (int s = 0; s < n_sensors; ++s)
            for (int k = 0; k < m; ++k) {
                const double dx = x[4 * k] - sensors(s, 0);
                const double dy = x[4 * k + 1] - sensors(s, 1);
                const double dist = std::sqrt(dx * dx + dy * dy);
                if (dist < 1e-12) continue;  // symmetric cusp: zero subgradient
                const double denom = dist * (dist + d0) * (dist + d0);
                h(s, 4 * k) = -psi * dx / denom;
                h(s, 4 * k + 1) = -psi * dy / denom;
            }
        return h;
    };
    model.observation_cov = [n_sensors, var = config.obs_noise_var](const Eigen::VectorXd&) {
        return isotropic(n_sensors, var);
    };
    model.sample_observation = [n_sensors, sig_w, obs = model.observation_mean](
                                   const Eigen::VectorXd& x, rng::RandomStream& rs) {
        return (obs(x) + sig_w * rs.normal_vector(n_sensors)).eval();
    };
    model.validate();

    Scenario scenario{ScenarioKind::acoustic, metric_for(ScenarioKind::acoustic), config.horizon,
                      std::move(model), std::move(prior), m, nullptr};
    scenario.target_positions = [m](const Eigen::VectorXd& x) {
        Eigen::MatrixXd p(m, 2);
        for (int k = 0; k < m; ++k) {
            p(k, 0) = x[4 * k];
            p(k, 1) = x[4 * k + 1];
        }
        return p;
    };
    return scenario;
}

Scenario build_sensor_net(const SensorNetConfig& config) {
    config.validate();
    const int side = config.grid_side;
    const int d = side * side;
    const double alpha = config.ar_coeff;
    const double nu = config.dof;
    const double m1 = config.count_scale;
    const double m2 = config.count_slope;
    const double r_min = config.surrogate_floor;

    // Exponential kernel over grid positions, distances in grid units.
    Eigen::MatrixXd kernel(d, d);
    for (int a = 0; a < d; ++a) {
        const double ax = static_cast<double>(a / side);
        const double ay = static_cast<double>(a % side);
        for (int b = 0; b < d; ++b) {
            const double bx = static_cast<double>(b / side);
            const double by = static_cast<double>(b % side);
            const double dist = std::hypot(ax - bx, ay - by);
            kernel(a, b) = std::exp(-dist / config.kernel_length);
        }
    }
    mix::Gaussian prior(Eigen::VectorXd::Zero(d), kernel);
    // Shared factor of the kernel for noise generation.
    const auto chol = std::make_shared<const Eigen::MatrixXd>(prior.chol());

    ssm::StateSpaceModel model;
    model.dim_x = d;
    model.dim_z = d;
    model.sample_initial = [prior](rng::RandomStream& rs) { return prior.sample(rs); };
    model.transition = [alpha](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        return (alpha * x + u).eval();
    };
    model.sample_process_noise = [d, nu, skew = config.skew, chol](rng::RandomStream& rs) {
        // Normal-mean-variance mixture: u = skew * W + sqrt(W) L n with
        // W ~ InvGamma(nu/2, nu/2), realized as (nu/2) / Gamma(nu/2, 1).
        const double w = (0.5 * nu) / rs.gamma(0.5 * nu, 1.0);
        Eigen::VectorXd u = (*chol) * rs.normal_vector(d);
        u *= std::sqrt(w);
        u.array() += skew * w;
        return u;
    };
    model.observation_mean = [m1, m2](const Eigen::VectorXd& x) {
        return (m1 * (m2 * x.array()).exp()).matrix().eval();
    };
    model.observation_jacobian_diag = [m1, m2](const Eigen::VectorXd& x) {
        return (m1 * m2 * (m2 * x.array()).exp()).matrix().eval();
    };
    model.observation_cov_diag = [m1, m2, r_min](const Eigen::VectorXd& x) {
        return (m1 * (m2 * x.array()).exp()).cwiseMax(r_min).matrix().eval();
    };
    model.observation_jacobian = [jac = model.observation_jacobian_diag](const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(jac(x).asDiagonal());
    };
    model.observation_cov = [cov = model.observation_cov_diag](const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(cov(x).asDiagonal());
    };
    model.sample_observation = [d, m1, m2](const Eigen::VectorXd& x, rng::RandomStream& rs) {
        Eigen::VectorXd z(d);
        for (int s = 0; s < d; ++s) {
            // Clamp the rate for the sampler; overflow here means the state
            // already diverged and the likelihood will reject it.
            const double rate = std::min(m1 * std::exp(m2 * x[s]), 1e12);
            z[s] = static_cast<double>(rs.poisson(rate));
        }
        return z;
    };
    model.log_likelihood = [d, m1, m2](const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
        // Exact Poisson log PMF; log-rate computed directly so large states
        // degrade to -inf instead of NaN.
        double total = 0.0;
        const double log_m1 = std::log(m1);
        for (int s = 0; s < d; ++s) {
            const double log_rate = log_m1 + m2 * x[s];
            const double rate = std::exp(log_rate);
            total += z[s] * log_rate - rate - std::lgamma(z[s] + 1.0);
        }
        return total;
    };
    model.validate();

    return Scenario{ScenarioKind::sensor_net, metric_for(ScenarioKind::sensor_net), config.horizon,
                    std::move(model), std::move(prior), 0, nullptr};
}

Scenario build(const ScenarioConfig& config) {
    switch (config.kind) {
        case ScenarioKind::linear_gaussian: return build_linear_gaussian(config.linear_gaussian);
        case ScenarioKind::acoustic: return build_acoustic(config.acoustic);
        case ScenarioKind::sensor_net: return build_sensor_net(config.sensor_net);
    }
    throw std::invalid_argument("build: unknown scenario kind");
}

}  // namespace flowbank::scenarios
