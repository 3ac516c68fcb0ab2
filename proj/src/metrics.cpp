#include "flowbank/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace flowbank::metrics {

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    if (n == 0 || cost.cols() != n)
        throw std::invalid_argument("hungarian: cost matrix must be square and non-empty");
    if (!cost.allFinite())
        throw std::invalid_argument("hungarian: cost matrix must be finite");

    constexpr double kInf = std::numeric_limits<double>::infinity();
    // 1-indexed potentials/matching with column 0 as the staging slot.
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<int> match(static_cast<std::size_t>(n) + 1, 0);
    std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
        std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = match[static_cast<std::size_t>(j0)];
            double delta = kInf;
            int j1 = -1;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                                   v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (match[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (match[static_cast<std::size_t>(j)] != 0)
            row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

double omat(const Eigen::Ref<const Eigen::MatrixXd>& est_positions,
            const Eigen::Ref<const Eigen::MatrixXd>& true_positions,
            double p) {
    const Eigen::Index m = est_positions.rows();
    if (m < 1 || true_positions.rows() != m)
        throw std::invalid_argument("omat: point sets must be non-empty and of equal size");
    if (est_positions.cols() != true_positions.cols())
        throw std::invalid_argument("omat: point dimension mismatch");
    if (!(p >= 1.0)) throw std::invalid_argument("omat: order p must be >= 1");

    Eigen::MatrixXd cost(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            cost(i, j) = std::pow((est_positions.row(i) - true_positions.row(j)).norm(), p);
    const std::vector<int> assign = hungarian(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i)
        total += cost(i, assign[static_cast<std::size_t>(i)]);
    return std::pow(total / static_cast<double>(m), 1.0 / p);
}

bool lost_track(const TrialRecord& trial, double threshold) {
    if (trial.step_error.size() == 0)
        throw std::invalid_argument("lost_track: trial has no error series");
    return trial.step_error.mean() > threshold;
}

double trial_error(const TrialRecord& trial) {
    if (trial.step_error.size() == 0)
        throw std::invalid_argument("trial_error: trial has no error series");
    return trial.step_error.mean();
}

double mse(const TrialRecord& trial) { return trial_error(trial); }

AggregateRow aggregate(const std::vector<TrialRecord>& trials, bool exclude_lost,
                       double lost_threshold) {
    if (trials.empty()) throw std::invalid_argument("aggregate: empty trial set");

    AggregateRow row;
    row.cell_id = trials.front().cell_id;

    std::vector<double> values;
    Eigen::VectorXd geff_sum;
    for (const TrialRecord& t : trials) {
        if (t.cell_id != row.cell_id)
            throw std::invalid_argument("aggregate: trials span multiple cells");
        if (t.failed) {
            ++row.failed;
            continue;
        }
        if (exclude_lost && lost_track(t, lost_threshold)) {
            ++row.lost_tracks;
            continue;
        }
        values.push_back(trial_error(t));
        if (geff_sum.size() == 0) geff_sum = Eigen::VectorXd::Zero(t.step_geff.size());
        if (t.step_geff.size() != geff_sum.size())
            throw std::invalid_argument("aggregate: inconsistent horizon across trials");
        geff_sum += t.step_geff;
    }

    row.included = static_cast<int>(values.size());
    if (row.included > 0) {
        double sum = 0.0;
        for (double x : values) sum += x;
        row.mean = sum / static_cast<double>(row.included);
        if (row.included > 1) {
            double ss = 0.0;
            for (double x : values) ss += (x - row.mean) * (x - row.mean);
            row.sd = std::sqrt(ss / static_cast<double>(row.included - 1));
        }
        row.avg_geff = geff_sum / static_cast<double>(row.included);
    }
    return row;
}

}  // namespace flowbank::metrics
