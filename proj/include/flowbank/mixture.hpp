#pragma once

#include <vector>

#include <Eigen/Dense>

#include "flowbank/gaussian.hpp"

namespace flowbank::mix {

/// Convex combination of Gaussians. Weights are validated non-negative with
/// a positive sum and normalized on construction.
class GaussianMixture {
public:
    GaussianMixture(std::vector<Gaussian> components, Eigen::VectorXd weights);

    [[nodiscard]] Eigen::Index size() const { return weights_.size(); }
    [[nodiscard]] Eigen::Index dim() const { return components_.front().dim(); }
    [[nodiscard]] const Gaussian& component(Eigen::Index j) const { return components_[static_cast<std::size_t>(j)]; }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

    [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    /// Mixture mean: sum_j alpha_j mu_j.
    [[nodiscard]] Eigen::VectorXd mean() const;

private:
    std::vector<Gaussian> components_;
    Eigen::VectorXd weights_;
};

/// Weighted particle set. Rows of `particles` are states; `log_weights` are
/// unnormalized; `component_ids` tags each particle with its mixture
/// component (all zero for single-component filters).
struct ParticleCloud {
    Eigen::MatrixXd particles;
    Eigen::VectorXd log_weights;
    Eigen::VectorXi component_ids;

    [[nodiscard]] Eigen::Index size() const { return particles.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return particles.cols(); }
};

/// log(sum_i exp(v_i)) guarded against overflow; -inf for an all -inf input.
double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v);

/// Normalizes log weights in place so exp sums to 1. Returns the log of the
/// pre-normalization sum. Throws NumericalError if any entry is NaN or +inf,
/// or if every entry is -inf.
double normalize_log_weights(Eigen::VectorXd& lw);

/// Effective sample size 1 / sum_i w_i^2 of normalized log weights.
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& normalized_lw);

/// Empirical mean and covariance of equally weighted rows, 1/N normalization.
/// Requires at least two rows.
Gaussian empirical_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles);

/// Weighted mean and covariance of rows under normalized log weights.
Gaussian weighted_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                          const Eigen::Ref<const Eigen::VectorXd>& normalized_lw);

/// Weighted moments of one component's particles; normalization happens
/// within the component. Throws DegenerateWeightsError naming the component
/// when all of its weights are zero.
Gaussian weighted_moments(const ParticleCloud& cloud, int component);

/// n draws from each component, stacked in component order with matching
/// component_ids and uniform log weights. Draw counts are deterministic per
/// component, not multinomial.
ParticleCloud sample_per_component(const GaussianMixture& mixture,
                                   Eigen::Index n_per_component,
                                   rng::RandomStream& rs);

/// Mixture-mean state estimate: sum_j alpha_j mu_j.
Eigen::VectorXd state_estimate(const GaussianMixture& mixture);

/// Mixing-proportion update: alpha_j proportional to prev_j * sums_j, then
/// normalized. `sums` are per-component totals of unnormalized particle
/// weights on a comparable scale.
Eigen::VectorXd update_mixture_weights(const Eigen::VectorXd& prev,
                                       const Eigen::VectorXd& sums);

/// Same update with per-component log sums; safe when sums underflow.
Eigen::VectorXd update_mixture_weights_log(const Eigen::VectorXd& prev,
                                           const Eigen::VectorXd& log_sums);

/// Effective number of mixture components 1 / sum_j alpha_j^2 for normalized
/// weights. Equals 1 for a point mass and G for uniform weights over G.
double effective_num_gaussians(const Eigen::Ref<const Eigen::VectorXd>& alpha);

/// Systematic (low-variance) resampling: n_out ancestor indices selected with
/// a single uniform offset against the cumulative normalized weights.
std::vector<int> systematic_resample(const Eigen::Ref<const Eigen::VectorXd>& normalized_lw,
                                     Eigen::Index n_out, rng::RandomStream& rs);

}  // namespace flowbank::mix
