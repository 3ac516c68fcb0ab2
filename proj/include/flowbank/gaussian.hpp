#pragma once

#include <Eigen/Dense>

#include "flowbank/errors.hpp"
#include "flowbank/rng.hpp"

namespace flowbank::mix {

/// Factors a symmetric matrix in place as L L^T. If the plain factorization
/// fails, adds diagonal jitter 1e-9 * trace/dim (scale 1.0 when trace <= 0),
/// doubling up to three times before throwing NumericalError. Returns the
/// jitter actually added (0 when none was needed). `m` is symmetrized first
/// and ends up holding the jittered matrix.
double factor_spd(Eigen::MatrixXd& m, Eigen::LLT<Eigen::MatrixXd>& llt,
                  const char* context);

/// Multivariate normal with a cached lower Cholesky factor. Construction
/// symmetrizes the covariance and applies the escalating jitter policy on
/// factorization failure; cov() reports the matrix actually factored.
class Gaussian {
public:
    Gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);

    [[nodiscard]] Eigen::Index dim() const { return mean_.size(); }
    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& cov() const { return cov_; }

    /// Lower-triangular factor L with cov = L L^T.
    [[nodiscard]] const Eigen::MatrixXd& chol() const { return chol_; }

    /// Diagonal jitter added during construction, 0 when none.
    [[nodiscard]] double jitter() const { return jitter_; }

    [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    [[nodiscard]] Eigen::VectorXd sample(rng::RandomStream& rs) const;

    /// n draws, one per row.
    [[nodiscard]] Eigen::MatrixXd sample(Eigen::Index n, rng::RandomStream& rs) const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd chol_;
    double log_norm_ = 0.0;  // -(d/2) log(2 pi) - sum_i log L_ii
    double jitter_ = 0.0;
};

}  // namespace flowbank::mix
