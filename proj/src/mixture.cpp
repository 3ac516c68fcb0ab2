#include "flowbank/mixture.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace flowbank::mix {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

GaussianMixture::GaussianMixture(std::vector<Gaussian> components, Eigen::VectorXd weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
    if (components_.empty())
        throw std::invalid_argument("GaussianMixture: no components");
    if (weights_.size() != static_cast<Eigen::Index>(components_.size()))
        throw std::invalid_argument("GaussianMixture: weight count does not match components");
    const Eigen::Index d = components_.front().dim();
    for (const Gaussian& g : components_)
        if (g.dim() != d)
            throw std::invalid_argument("GaussianMixture: mixed component dimensions");
    if (!weights_.allFinite() || (weights_.array() < 0.0).any())
        throw std::invalid_argument("GaussianMixture: weights must be finite and non-negative");
    const double total = weights_.sum();
    if (!(total > 0.0))
        throw std::invalid_argument("GaussianMixture: weight sum must be positive");
    weights_ /= total;
}

double GaussianMixture::log_density(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd terms(size());
    for (Eigen::Index j = 0; j < size(); ++j)
        terms[j] = (weights_[j] > 0.0)
                       ? std::log(weights_[j]) + components_[static_cast<std::size_t>(j)].log_density(x)
                       : kNegInf;
    return log_sum_exp(terms);
}

Eigen::VectorXd GaussianMixture::mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
    for (Eigen::Index j = 0; j < size(); ++j)
        m += weights_[j] * components_[static_cast<std::size_t>(j)].mean();
    return m;
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    if (v.size() == 0)
        throw std::invalid_argument("log_sum_exp: empty input");
    if (v.hasNaN()) throw NumericalError("log_sum_exp: NaN entry");
    const double m = v.maxCoeff();
    if (m == kNegInf) return kNegInf;
    if (m == std::numeric_limits<double>::infinity())
        throw NumericalError("log_sum_exp: +inf entry");
    return m + std::log((v.array() - m).exp().sum());
}

double normalize_log_weights(Eigen::VectorXd& lw) {
    for (Eigen::Index i = 0; i < lw.size(); ++i)
        if (std::isnan(lw[i]) || lw[i] == std::numeric_limits<double>::infinity())
            throw NumericalError("normalize_log_weights: NaN or +inf weight");
    const double total = log_sum_exp(lw);
    if (total == kNegInf)
        throw DegenerateWeightsError("normalize_log_weights: all weights are zero");
    lw.array() -= total;
    return total;
}

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& normalized_lw) {
    // 1 / sum w^2 computed in the log domain for stability.
    Eigen::VectorXd doubled = 2.0 * normalized_lw;
    return std::exp(-log_sum_exp(doubled));
}

Gaussian empirical_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles) {
    const Eigen::Index n = particles.rows();
    if (n < 2)
        throw std::invalid_argument("empirical_moments: need at least two particles");
    if (!particles.allFinite())
        throw NumericalError("empirical_moments: non-finite particles");
    Eigen::VectorXd mean = particles.colwise().mean();
    Eigen::MatrixXd centered = particles.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
    return Gaussian(std::move(mean), std::move(cov));
}

Gaussian weighted_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                          const Eigen::Ref<const Eigen::VectorXd>& normalized_lw) {
    const Eigen::Index n = particles.rows();
    if (n < 1)
        throw std::invalid_argument("weighted_moments: empty particle set");
    if (normalized_lw.size() != n)
        throw std::invalid_argument("weighted_moments: weight count does not match particles");
    Eigen::VectorXd w = normalized_lw.array().exp();
    Eigen::VectorXd mean = particles.transpose() * w;
    Eigen::MatrixXd centered = particles.rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * w.asDiagonal() * centered;
    return Gaussian(std::move(mean), std::move(cov));
}

Gaussian weighted_moments(const ParticleCloud& cloud, int component) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if (cloud.component_ids[i] == component) rows.push_back(i);
    if (rows.empty())
        throw std::invalid_argument("weighted_moments: component " +
                                    std::to_string(component) + " has no particles");
    Eigen::MatrixXd particles(static_cast<Eigen::Index>(rows.size()), cloud.dim());
    Eigen::VectorXd lw(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        particles.row(static_cast<Eigen::Index>(k)) = cloud.particles.row(rows[k]);
        lw[static_cast<Eigen::Index>(k)] = cloud.log_weights[rows[k]];
    }
    if (lw.maxCoeff() == kNegInf)
        throw DegenerateWeightsError("weighted_moments: all weights zero in component " +
                                     std::to_string(component));
    normalize_log_weights(lw);
    return weighted_moments(particles, lw);
}

ParticleCloud sample_per_component(const GaussianMixture& mixture,
                                   Eigen::Index n_per_component,
                                   rng::RandomStream& rs) {
    if (n_per_component < 1)
        throw std::invalid_argument("sample_per_component: need at least one draw");
    const Eigen::Index g = mixture.size();
    const Eigen::Index n = g * n_per_component;
    ParticleCloud cloud;
    cloud.particles.resize(n, mixture.dim());
    cloud.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
    cloud.component_ids.resize(n);
    for (Eigen::Index j = 0; j < g; ++j) {
        cloud.particles.middleRows(j * n_per_component, n_per_component) =
            mixture.component(j).sample(n_per_component, rs);
        cloud.component_ids.segment(j * n_per_component, n_per_component).setConstant(static_cast<int>(j));
    }
    return cloud;
}

Eigen::VectorXd state_estimate(const GaussianMixture& mixture) { return mixture.mean(); }

Eigen::VectorXd update_mixture_weights(const Eigen::VectorXd& prev,
                                       const Eigen::VectorXd& sums) {
    if (prev.size() != sums.size() || prev.size() == 0)
        throw std::invalid_argument("update_mixture_weights: size mismatch");
    if (!sums.allFinite() || (sums.array() < 0.0).any())
        throw std::invalid_argument("update_mixture_weights: sums must be finite and non-negative");
    Eigen::VectorXd log_sums(sums.size());
    for (Eigen::Index j = 0; j < sums.size(); ++j)
        log_sums[j] = (sums[j] > 0.0) ? std::log(sums[j]) : kNegInf;
    return update_mixture_weights_log(prev, log_sums);
}

Eigen::VectorXd update_mixture_weights_log(const Eigen::VectorXd& prev,
                                           const Eigen::VectorXd& log_sums) {
    if (prev.size() != log_sums.size() || prev.size() == 0)
        throw std::invalid_argument("update_mixture_weights_log: size mismatch");
    if (!prev.allFinite() || (prev.array() < 0.0).any() || !(prev.sum() > 0.0))
        throw std::invalid_argument("update_mixture_weights_log: invalid previous weights");
    Eigen::VectorXd log_alpha(prev.size());
    for (Eigen::Index j = 0; j < prev.size(); ++j) {
        if (std::isnan(log_sums[j]) || log_sums[j] == std::numeric_limits<double>::infinity())
            throw NumericalError("update_mixture_weights_log: NaN or +inf component sum");
        log_alpha[j] = (prev[j] > 0.0) ? std::log(prev[j]) + log_sums[j] : kNegInf;
    }
    const double total = log_sum_exp(log_alpha);
    if (total == kNegInf)
        throw DegenerateWeightsError("update_mixture_weights_log: all component sums are zero");
    return (log_alpha.array() - total).exp();
}

std::vector<int> systematic_resample(const Eigen::Ref<const Eigen::VectorXd>& normalized_lw,
                                     Eigen::Index n_out, rng::RandomStream& rs) {
    const Eigen::Index n = normalized_lw.size();
    if (n < 1 || n_out < 1)
        throw std::invalid_argument("systematic_resample: empty input or output");
    Eigen::VectorXd w = normalized_lw.array().exp();
    std::vector<int> indices(static_cast<std::size_t>(n_out));
    double u = rs.uniform01() / static_cast<double>(n_out);
    double cum = w[0];
    Eigen::Index i = 0;
    for (Eigen::Index k = 0; k < n_out; ++k) {
        while (u > cum && i + 1 < n) cum += w[++i];
        indices[static_cast<std::size_t>(k)] = static_cast<int>(i);
        u += 1.0 / static_cast<double>(n_out);
    }
    return indices;
}

double effective_num_gaussians(const Eigen::Ref<const Eigen::VectorXd>& alpha) {
    if (alpha.size() == 0)
        throw std::invalid_argument("effective_num_gaussians: empty weights");
    const double ss = alpha.squaredNorm();
    if (!(ss > 0.0))
        throw std::invalid_argument("effective_num_gaussians: zero weight vector");
    return 1.0 / ss;
}

}  // namespace flowbank::mix
