#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace flowbank::metrics {

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting path with potentials, O(n^3)). Returns the column assigned to
/// each row.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Optimal mass transfer error of order p between equal-size 2-D point sets:
/// (min over permutations of (1/M) sum ||x_m - y_perm(m)||^p)^(1/p).
double omat(const Eigen::Ref<const Eigen::MatrixXd>& est_positions,
            const Eigen::Ref<const Eigen::MatrixXd>& true_positions,
            double p = 1.0);

/// One filter run against one simulated truth.
struct TrialRecord {
    int cell_id = 0;
    int trajectory = 0;
    int run = 0;
    std::uint64_t seed = 0;
    std::string config_fingerprint;

    Eigen::MatrixXd estimates;  // horizon x dim_x
    Eigen::MatrixXd truths;     // horizon x dim_x

    /// Per-step OMAT (tracking scenarios) or per-dimension mean squared
    /// error (state-reconstruction scenarios).
    Eigen::VectorXd step_error;

    Eigen::VectorXd step_geff;

    double wall_seconds = 0.0;
    bool failed = false;
    std::string failure;
};

/// True iff the trajectory-average error strictly exceeds the threshold.
bool lost_track(const TrialRecord& trial, double threshold = 2.0);

/// Trial-level error: per-step errors averaged over the horizon. For MSE
/// trials this is the squared error averaged over steps and dimensions.
double trial_error(const TrialRecord& trial);

/// Alias of trial_error for squared-error trials.
double mse(const TrialRecord& trial);

struct AggregateRow {
    int cell_id = 0;
    std::string algorithm;
    int g = 1;
    int np_star = 0;
    int np = 0;

    /// Mean and sample sd (n-1) of the trial error over included trials.
    double mean = 0.0;
    double sd = 0.0;

    int lost_tracks = 0;
    int failed = 0;
    int included = 0;

    /// Pointwise average G_eff over included trials.
    Eigen::VectorXd avg_geff;
};

/// Aggregates one cell's trials: failed trials are excluded and counted;
/// lost tracks are additionally excluded when exclude_lost is set (tracking
/// scenarios). Trials must all belong to the same cell.
AggregateRow aggregate(const std::vector<TrialRecord>& trials, bool exclude_lost,
                       double lost_threshold = 2.0);

}  // namespace flowbank::metrics
