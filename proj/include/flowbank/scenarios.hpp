#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "flowbank/mixture.hpp"
#include "flowbank/ssm.hpp"

namespace flowbank::scenarios {

enum class ScenarioKind { linear_gaussian, acoustic, sensor_net };

const char* to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_scenario_kind(std::string_view name);

/// Which per-step error a scenario reports: position-set OMAT for tracking,
/// per-dimension MSE otherwise.
enum class ErrorMetric { mse, omat };

ErrorMetric metric_for(ScenarioKind kind);

/// Small linear-Gaussian oracle model: x_t = s x + v, z = x + w, isotropic
/// covariances. Defaults give the unit-variance model whose first Kalman gain
/// from prior variance 1 is 2/3.
struct LinearGaussianConfig {
    int dim = 4;
    int horizon = 20;
    double transition_scale = 1.0;
    double process_var = 1.0;
    double obs_var = 1.0;
    double prior_var = 1.0;

    void validate() const;
};

/// Multi-target acoustic amplitude tracking: M constant-velocity targets on a
/// square region, a sensor grid each reading the superposed amplitude
/// sum_m psi / (dist_m + range_offset) plus Gaussian noise.
struct AcousticConfig {
    int n_targets = 4;
    int sensor_grid_side = 5;
    double region = 40.0;
    double amplitude = 10.0;      // psi
    double range_offset = 0.1;    // additive distance offset, bounds readings
    double obs_noise_var = 0.01;
    double dt = 1.0;
    /// Per-axis velocity random-walk variance per step. The default makes
    /// targets maneuver noticeably against speeds of about 1, so tracking
    /// needs genuine per-step correction through the curved amplitude field.
    double velocity_noise_var = 0.25;
    int horizon = 20;

    /// Initial truth states (x, y, vx, vy) per target; empty selects the
    /// documented four-target default (requires n_targets == 4).
    std::vector<Eigen::Vector4d> initial_targets;

    /// Per-target prior covariance diagonal around the initial truth. The
    /// default is deliberately diffuse (position sd ~3 against a sensor
    /// spacing of 8, velocity sd 1 against speeds ~1), so initialization is
    /// genuinely uncertain and early posteriors can be multimodal.
    Eigen::Vector4d prior_cov_diag{10.0, 10.0, 1.0, 1.0};

    void validate() const;
};

/// Spatial sensor network on a square grid: AR(1) dynamics driven by
/// heavy-tailed skewed-t noise (normal-mean-variance mixture with an
/// inverse-gamma mixing weight and an exponential spatial kernel), observed
/// through per-node Poisson counts z^s ~ Poisson(count_scale *
/// exp(count_slope * x^s)). The Gaussian observation surrogate (mean,
/// diagonal Jacobian, R = diag(max(mean, floor))) drives the flow; weights
/// use the exact Poisson likelihood.
struct SensorNetConfig {
    int grid_side = 12;
    double ar_coeff = 0.9;
    double kernel_length = 3.0;  // in grid units
    double dof = 5.0;            // nu, must exceed 2
    double skew = 0.1;           // gamma, per dimension
    double count_scale = 1.0;    // m1
    double count_slope = 1.0 / 3.0;  // m2
    double surrogate_floor = 0.1;
    int horizon = 30;

    void validate() const;
};

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::linear_gaussian;
    LinearGaussianConfig linear_gaussian;
    AcousticConfig acoustic;
    SensorNetConfig sensor_net;

    [[nodiscard]] int horizon() const;
    void validate() const;
};

/// A built benchmark: the model, the filters' initial belief, and how to
/// score estimates against truth.
struct Scenario {
    ScenarioKind kind;
    ErrorMetric metric;
    int horizon;
    ssm::StateSpaceModel model;
    mix::Gaussian prior;

    /// Tracking scenarios only: target count and position extraction
    /// (n_targets x 2 matrix) from a joint state.
    int n_targets = 0;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> target_positions;
};

Scenario build_linear_gaussian(const LinearGaussianConfig& config);
Scenario build_linear_gaussian(int dim, int horizon);
Scenario build_acoustic(const AcousticConfig& config);
Scenario build_sensor_net(const SensorNetConfig& config);
Scenario build(const ScenarioConfig& config);

}  // namespace flowbank::scenarios
