#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowbank/flow.hpp"
#include "flowbank/mixture.hpp"
#include "flowbank/ssm.hpp"

namespace flowbank::filters {

enum class FilterKind {
    edh,
    ledh,
    pfpf_edh,
    pfpf_ledh,
    gpf,
    gspf,
    pfgpf,
    pfgspf,
    kalman,
    bootstrap_pf,
};

const char* to_string(FilterKind kind);
std::optional<FilterKind> parse_filter_kind(std::string_view name);

struct FilterConfig {
    FilterKind kind = FilterKind::pfgspf;

    /// Number of mixture components G. Must be 1 for non-sum filters.
    int n_components = 1;

    /// Particles per component N*_p; the filter uses G * N*_p in total.
    int particles_per_component = 100;

    flow::ScheduleConfig schedule;

    /// Weighted cloud filters resample when ESS < resample_fraction * N_p.
    double resample_fraction = 0.5;

    std::uint64_t seed = 0;

    [[nodiscard]] int total_particles() const { return n_components * particles_per_component; }
    [[nodiscard]] bool is_mixture_filter() const;
    [[nodiscard]] bool carries_cloud() const;
    void validate() const;
};

/// Per-step health report.
struct StepDiagnostics {
    double g_eff = 1.0;
    Eigen::VectorXd component_ess;
    std::vector<std::uint8_t> degenerate;

    /// Largest log ratio N(eta1)/N(eta0) under the predictive Gaussian seen
    /// this step; flags extreme flow-weight corrections.
    double max_log_prior_ratio = 0.0;

    bool resampled = false;
};

struct FilterState {
    mix::GaussianMixture posterior;

    /// Stable per-component stream ids; they follow components when the
    /// mixture is permuted, making steps permutation-equivariant.
    std::vector<std::uint64_t> component_streams;

    /// Weighted particle set, kept only by cloud-persistent filters
    /// (PFPF variants, raw EDH/LEDH, bootstrap PF).
    std::optional<mix::ParticleCloud> cloud;

    int time_index = 0;
    StepDiagnostics diagnostics;
};

/// Builds the time-0 state from the model's initial law: a moment-preserving
/// G-component split of the initial belief along its dominant uncertainty
/// axis (uniform mixture weights), plus the initial cloud for
/// cloud-persistent filters. The Kalman oracle requires model.linear and an
/// exact Gaussian prior via `prior`.
FilterState init_state(const ssm::StateSpaceModel& model, const FilterConfig& config,
                       rng::RandomStream& rs,
                       const std::optional<mix::Gaussian>& prior = std::nullopt);

/// One assimilation step; dispatches on config.kind.
FilterState step(const FilterState& state, const ssm::StateSpaceModel& model,
                 const Eigen::VectorXd& z, const FilterConfig& config,
                 rng::RandomStream& rs);

/// Bank-of-flow-filters step: per component, sample, propagate, fit the
/// predictive Gaussian, migrate through the localized flow, reweight with the
/// Jacobian-corrected importance weight, refit; then update the mixing
/// proportions from the component weight sums.
FilterState pfgspf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                        const Eigen::VectorXd& z, const FilterConfig& config,
                        rng::RandomStream& rs);

/// pfgspf_step restricted to G = 1.
FilterState pfgpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                       const Eigen::VectorXd& z, const FilterConfig& config,
                       rng::RandomStream& rs);

/// Gaussian sum particle filter: propagate prior-sampled particles, weight by
/// the observation likelihood, refit per component, update proportions.
FilterState gspf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs);

/// gspf_step restricted to G = 1.
FilterState gpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                     const Eigen::VectorXd& z, const FilterConfig& config,
                     rng::RandomStream& rs);

/// Particle flow particle filter: persistent weighted cloud, flow proposal,
/// Jacobian-corrected weight accumulation, systematic resampling below the
/// ESS threshold. `localized` selects the per-particle linearization.
FilterState pfpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs, bool localized);

/// Raw flow filters: migrate the uniform cloud, no weight correction.
FilterState edh_step(const FilterState& state, const ssm::StateSpaceModel& model,
                     const Eigen::VectorXd& z, const FilterConfig& config,
                     rng::RandomStream& rs);
FilterState ledh_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs);

/// Exact oracle on linear-Gaussian models; throws if model.linear is absent.
FilterState kalman_step(const FilterState& state, const ssm::StateSpaceModel& model,
                        const Eigen::VectorXd& z, const FilterConfig& config,
                        rng::RandomStream& rs);

/// Asymptotically exact oracle: prior proposal, likelihood weights,
/// systematic resampling.
FilterState bootstrap_pf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                              const Eigen::VectorXd& z, const FilterConfig& config,
                              rng::RandomStream& rs);

/// Mixture-mean point estimate of the current posterior.
Eigen::VectorXd state_estimate(const FilterState& state);

}  // namespace flowbank::filters
