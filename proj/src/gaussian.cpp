#include "flowbank/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flowbank::mix {

double factor_spd(Eigen::MatrixXd& m, Eigen::LLT<Eigen::MatrixXd>& llt,
                  const char* context) {
    const Eigen::Index d = m.rows();
    if (d == 0 || m.cols() != d)
        throw std::invalid_argument(std::string(context) + ": matrix must be square and non-empty");
    if (!m.allFinite())
        throw NumericalError(std::string(context) + ": non-finite covariance entries");

    m = ((m + m.transpose()) * 0.5).eval();

    llt.compute(m);
    if (llt.info() == Eigen::Success) return 0.0;

    const double tr = m.trace();
    double jitter = (tr > 0.0) ? 1e-9 * tr / static_cast<double>(d) : 1e-9;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Eigen::MatrixXd trial = m;
        trial.diagonal().array() += jitter;
        llt.compute(trial);
        if (llt.info() == Eigen::Success) {
            m = std::move(trial);
            return jitter;
        }
        jitter *= 2.0;
    }
    throw NumericalError(std::string(context) +
                         ": Cholesky failed after jitter escalation (final jitter " +
                         std::to_string(jitter / 2.0) + ")");
}

Gaussian::Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() == 0)
        throw std::invalid_argument("Gaussian: empty mean");
    if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
        throw std::invalid_argument("Gaussian: covariance shape does not match mean");
    if (!mean_.allFinite())
        throw NumericalError("Gaussian: non-finite mean");

    Eigen::LLT<Eigen::MatrixXd> llt;
    jitter_ = factor_spd(cov_, llt, "Gaussian");
    chol_ = llt.matrixL();

    const double d = static_cast<double>(mean_.size());
    log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi) -
                chol_.diagonal().array().log().sum();
}

double Gaussian::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != mean_.size())
        throw std::invalid_argument("Gaussian::log_density: dimension mismatch");
    // Solve L y = x - mean; quadratic form is |y|^2.
    Eigen::VectorXd y = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
    return log_norm_ - 0.5 * y.squaredNorm();
}

Eigen::VectorXd Gaussian::sample(rng::RandomStream& rs) const {
    return mean_ + chol_ * rs.normal_vector(mean_.size());
}

Eigen::MatrixXd Gaussian::sample(Eigen::Index n, rng::RandomStream& rs) const {
    Eigen::MatrixXd out(n, mean_.size());
    for (Eigen::Index i = 0; i < n; ++i)
        out.row(i) = (mean_ + chol_ * rs.normal_vector(mean_.size())).transpose();
    return out;
}

}  // namespace flowbank::mix
