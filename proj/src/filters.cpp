#include "flowbank/filters.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "flowbank/errors.hpp"

namespace flowbank::filters {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Weight-sum stand-in for a fully degenerate component: smallest positive
/// double, so the mixing-proportion update keeps the component alive at
/// (effectively) zero weight instead of aborting.
double log_tiny() { return std::log(std::numeric_limits<double>::min()); }

Eigen::MatrixXd propagate(const ssm::StateSpaceModel& model,
                          const Eigen::Ref<const Eigen::MatrixXd>& x,
                          rng::RandomStream& rs) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        out.row(i) =
            model.transition(x.row(i).transpose(), model.sample_process_noise(rs)).transpose();
    if (!out.allFinite()) throw NumericalError("propagate: non-finite particle");
    return out;
}

Eigen::VectorXd observation_log_weights(const ssm::StateSpaceModel& model,
                                        const Eigen::Ref<const Eigen::MatrixXd>& x,
                                        const Eigen::VectorXd& z) {
    Eigen::VectorXd lw(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        lw[i] = model.observation_log_likelihood(x.row(i).transpose(), z);
    return lw;
}

void check_log_weights(const Eigen::VectorXd& lw, const char* context) {
    for (Eigen::Index i = 0; i < lw.size(); ++i)
        if (std::isnan(lw[i]) || lw[i] == std::numeric_limits<double>::infinity())
            throw NumericalError(std::string(context) + ": NaN or +inf log weight");
}

struct ComponentOutcome {
    mix::Gaussian posterior;
    double log_weight_sum = 0.0;
    double ess = 0.0;
    bool degenerate = false;
    double max_log_prior_ratio = 0.0;
};

/// Shared tail of a component update: normalize, refit, or fall back to the
/// predictive Gaussian when every weight underflowed.
ComponentOutcome finish_component(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                                  Eigen::VectorXd lw, mix::Gaussian predictive,
                                  double max_log_prior_ratio) {
    check_log_weights(lw, "filter component");
    if (lw.maxCoeff() == kNegInf) {
        return ComponentOutcome{std::move(predictive), log_tiny(), 0.0, true,
                                max_log_prior_ratio};
    }
    const double total = mix::normalize_log_weights(lw);
    ComponentOutcome out{mix::weighted_moments(particles, lw), total,
                         mix::effective_sample_size(lw), false, max_log_prior_ratio};
    return out;
}

StepDiagnostics mixture_diagnostics(const std::vector<ComponentOutcome>& outcomes,
                                    const Eigen::VectorXd& alpha) {
    StepDiagnostics diag;
    diag.g_eff = mix::effective_num_gaussians(alpha);
    diag.component_ess.resize(static_cast<Eigen::Index>(outcomes.size()));
    diag.degenerate.resize(outcomes.size());
    diag.max_log_prior_ratio = kNegInf;
    for (std::size_t j = 0; j < outcomes.size(); ++j) {
        diag.component_ess[static_cast<Eigen::Index>(j)] = outcomes[j].ess;
        diag.degenerate[j] = outcomes[j].degenerate ? 1 : 0;
        diag.max_log_prior_ratio = std::max(diag.max_log_prior_ratio, outcomes[j].max_log_prior_ratio);
    }
    return diag;
}

void check_step_inputs(const FilterState& state, const ssm::StateSpaceModel& model,
                       const Eigen::VectorXd& z, const FilterConfig& config) {
    config.validate();
    if (z.size() != model.dim_z)
        throw std::invalid_argument("filter step: observation dimension mismatch");
    if (state.posterior.dim() != model.dim_x)
        throw std::invalid_argument("filter step: state dimension mismatch");
    if (state.posterior.size() != config.n_components)
        throw std::invalid_argument("filter step: component count does not match config");
    if (state.component_streams.size() != static_cast<std::size_t>(config.n_components))
        throw std::invalid_argument("filter step: missing component stream ids");
}

/// Core of the flow-proposal mixture filters. Each component is processed
/// with its own stream derived from (step key, component stream id), so
/// component order never affects the draws a component sees.
FilterState flow_mixture_step(const FilterState& state, const ssm::StateSpaceModel& model,
                              const Eigen::VectorXd& z, const FilterConfig& config,
                              rng::RandomStream& rs) {
    check_step_inputs(state, model, z, config);
    const int g = config.n_components;
    const Eigen::Index n_star = config.particles_per_component;
    const flow::FlowSchedule schedule = flow::make_schedule(config.schedule);
    const std::uint64_t step_key = rs.next_u64();

    std::vector<ComponentOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(g));
    Eigen::VectorXd log_sums(g);

    for (int j = 0; j < g; ++j) {
        rng::RandomStream comp_rs(rng::mix(step_key, state.component_streams[static_cast<std::size_t>(j)]));
        Eigen::MatrixXd drawn = state.posterior.component(j).sample(n_star, comp_rs);
        Eigen::MatrixXd eta0 = propagate(model, drawn, comp_rs);
        mix::Gaussian predictive = mix::empirical_moments(eta0);

        flow::FlowResult fr = flow::ledh_flow(model, eta0, predictive, z, schedule);

        Eigen::VectorXd lw(n_star);
        double max_ratio = kNegInf;
        for (Eigen::Index i = 0; i < n_star; ++i) {
            const double prior_ratio = predictive.log_density(fr.eta1.row(i).transpose()) -
                                       predictive.log_density(eta0.row(i).transpose());
            max_ratio = std::max(max_ratio, prior_ratio);
            lw[i] = prior_ratio + fr.log_jac_det[i] +
                    model.observation_log_likelihood(fr.eta1.row(i).transpose(), z);
        }
        ComponentOutcome out = finish_component(fr.eta1, std::move(lw), std::move(predictive), max_ratio);
        log_sums[j] = out.log_weight_sum;
        outcomes.push_back(std::move(out));
    }

    Eigen::VectorXd alpha = mix::update_mixture_weights_log(state.posterior.weights(), log_sums);

    std::vector<mix::Gaussian> components;
    components.reserve(outcomes.size());
    for (ComponentOutcome& o : outcomes) components.push_back(std::move(o.posterior));

    FilterState next{mix::GaussianMixture(std::move(components), alpha),
                     state.component_streams, std::nullopt, state.time_index + 1,
                     mixture_diagnostics(outcomes, alpha)};
    return next;
}

/// Core of the prior-proposal mixture filters: weights are plain observation
/// likelihoods of the propagated particles.
FilterState plain_mixture_step(const FilterState& state, const ssm::StateSpaceModel& model,
                               const Eigen::VectorXd& z, const FilterConfig& config,
                               rng::RandomStream& rs) {
    check_step_inputs(state, model, z, config);
    const int g = config.n_components;
    const Eigen::Index n_star = config.particles_per_component;
    const std::uint64_t step_key = rs.next_u64();

    std::vector<ComponentOutcome> outcomes;
    outcomes.reserve(static_cast<std::size_t>(g));
    Eigen::VectorXd log_sums(g);

    for (int j = 0; j < g; ++j) {
        rng::RandomStream comp_rs(rng::mix(step_key, state.component_streams[static_cast<std::size_t>(j)]));
        Eigen::MatrixXd drawn = state.posterior.component(j).sample(n_star, comp_rs);
        Eigen::MatrixXd xt = propagate(model, drawn, comp_rs);
        mix::Gaussian predictive = mix::empirical_moments(xt);
        Eigen::VectorXd lw = observation_log_weights(model, xt, z);
        ComponentOutcome out = finish_component(xt, std::move(lw), std::move(predictive), 0.0);
        log_sums[j] = out.log_weight_sum;
        outcomes.push_back(std::move(out));
    }

    Eigen::VectorXd alpha = mix::update_mixture_weights_log(state.posterior.weights(), log_sums);

    std::vector<mix::Gaussian> components;
    components.reserve(outcomes.size());
    for (ComponentOutcome& o : outcomes) components.push_back(std::move(o.posterior));

    FilterState next{mix::GaussianMixture(std::move(components), alpha),
                     state.component_streams, std::nullopt, state.time_index + 1,
                     mixture_diagnostics(outcomes, alpha)};
    return next;
}

const mix::ParticleCloud& require_cloud(const FilterState& state, const char* context) {
    if (!state.cloud)
        throw std::invalid_argument(std::string(context) + ": state carries no particle cloud");
    return *state.cloud;
}

FilterState make_cloud_state(mix::ParticleCloud cloud, const FilterState& prev,
                             StepDiagnostics diag) {
    mix::Gaussian post = mix::weighted_moments(cloud.particles, cloud.log_weights);
    std::vector<mix::Gaussian> comps;
    comps.push_back(std::move(post));
    FilterState next{mix::GaussianMixture(std::move(comps), Eigen::VectorXd::Ones(1)),
                     prev.component_streams, std::move(cloud), prev.time_index + 1,
                     std::move(diag)};
    return next;
}

}  // namespace

const char* to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::edh: return "edh";
        case FilterKind::ledh: return "ledh";
        case FilterKind::pfpf_edh: return "pfpf_edh";
        case FilterKind::pfpf_ledh: return "pfpf_ledh";
        case FilterKind::gpf: return "gpf";
        case FilterKind::gspf: return "gspf";
        case FilterKind::pfgpf: return "pfgpf";
        case FilterKind::pfgspf: return "pfgspf";
        case FilterKind::kalman: return "kalman";
        case FilterKind::bootstrap_pf: return "bootstrap_pf";
    }
    return "unknown";
}

std::optional<FilterKind> parse_filter_kind(std::string_view name) {
    static constexpr std::array<FilterKind, 10> kinds = {
        FilterKind::edh,     FilterKind::ledh,   FilterKind::pfpf_edh,
        FilterKind::pfpf_ledh, FilterKind::gpf,  FilterKind::gspf,
        FilterKind::pfgpf,   FilterKind::pfgspf, FilterKind::kalman,
        FilterKind::bootstrap_pf};
    for (FilterKind k : kinds)
        if (name == to_string(k)) return k;
    return std::nullopt;
}

bool FilterConfig::is_mixture_filter() const {
    return kind == FilterKind::gpf || kind == FilterKind::gspf ||
           kind == FilterKind::pfgpf || kind == FilterKind::pfgspf;
}

bool FilterConfig::carries_cloud() const {
    return kind == FilterKind::edh || kind == FilterKind::ledh ||
           kind == FilterKind::pfpf_edh || kind == FilterKind::pfpf_ledh ||
           kind == FilterKind::bootstrap_pf;
}

void FilterConfig::validate() const {
    if (n_components < 1)
        throw std::invalid_argument("FilterConfig: n_components must be >= 1");
    const bool sum_filter = kind == FilterKind::gspf || kind == FilterKind::pfgspf;
    if (!sum_filter && n_components != 1)
        throw std::invalid_argument(std::string("FilterConfig: ") + to_string(kind) +
                                    " requires n_components == 1");
    const int min_particles =
        (kind == FilterKind::bootstrap_pf || kind == FilterKind::kalman) ? 1 : 2;
    if (particles_per_component < min_particles)
        throw std::invalid_argument("FilterConfig: particles_per_component too small for " +
                                    std::string(to_string(kind)));
    if (!(resample_fraction >= 0.0) || resample_fraction > 1.0)
        throw std::invalid_argument("FilterConfig: resample_fraction must lie in [0, 1]");
    if (schedule.n_steps < 1 || !(schedule.ratio > 0.0))
        throw std::invalid_argument("FilterConfig: invalid flow schedule");
}

FilterState init_state(const ssm::StateSpaceModel& model, const FilterConfig& config,
                       rng::RandomStream& rs, const std::optional<mix::Gaussian>& prior) {
    config.validate();

    if (config.kind == FilterKind::kalman) {
        if (!model.linear)
            throw std::invalid_argument("init_state: Kalman oracle requires a linear model");
        if (!prior)
            throw std::invalid_argument("init_state: Kalman oracle requires an exact Gaussian prior");
        std::vector<mix::Gaussian> comps{*prior};
        return FilterState{mix::GaussianMixture(std::move(comps), Eigen::VectorXd::Ones(1)),
                           {0}, std::nullopt, 0, StepDiagnostics{}};
    }

    auto draw_initial = [&](Eigen::Index n) {
        Eigen::MatrixXd x(n, model.dim_x);
        for (Eigen::Index i = 0; i < n; ++i)
            x.row(i) = (prior ? prior->sample(rs) : model.sample_initial(rs)).transpose();
        return x;
    };

    if (config.carries_cloud()) {
        const Eigen::Index n = config.total_particles();
        mix::ParticleCloud cloud;
        cloud.particles = draw_initial(n);
        cloud.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
        cloud.component_ids = Eigen::VectorXi::Zero(n);
        mix::Gaussian post = (n >= 2) ? mix::empirical_moments(cloud.particles)
                                      : mix::weighted_moments(cloud.particles, cloud.log_weights);
        std::vector<mix::Gaussian> comps;
        comps.push_back(std::move(post));
        return FilterState{mix::GaussianMixture(std::move(comps), Eigen::VectorXd::Ones(1)),
                           {0}, std::move(cloud), 0, StepDiagnostics{}};
    }

    // Mixture filters: moment-preserving split of the initial belief along
    // its dominant uncertainty axis. Component means form a symmetric grid
    // carrying half the axis variance, component covariances keep the other
    // half, so the mixture reproduces the belief's mean and covariance
    // exactly; G = 1 keeps the belief untouched.
    const int g = config.n_components;
    const mix::Gaussian base =
        prior ? *prior : mix::empirical_moments(draw_initial(config.total_particles()));
    std::vector<mix::Gaussian> comps;
    comps.reserve(static_cast<std::size_t>(g));
    std::vector<std::uint64_t> streams;
    streams.reserve(static_cast<std::size_t>(g));
    if (g == 1) {
        comps.push_back(base);
        streams.push_back(0);
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(base.cov());
        const Eigen::Index top = base.dim() - 1;  // eigenvalues are ascending
        const double lam = es.eigenvalues()[top];
        const Eigen::VectorXd axis = es.eigenvectors().col(top);
        const double spread = std::sqrt(6.0 / (static_cast<double>(g) * g - 1.0));
        const Eigen::MatrixXd reduced = base.cov() - 0.5 * lam * axis * axis.transpose();
        for (int j = 0; j < g; ++j) {
            const double delta = spread * (j - 0.5 * (g - 1));
            comps.emplace_back(base.mean() + delta * std::sqrt(lam) * axis, reduced);
            streams.push_back(static_cast<std::uint64_t>(j));
        }
    }
    return FilterState{
        mix::GaussianMixture(std::move(comps),
                             Eigen::VectorXd::Constant(g, 1.0 / static_cast<double>(g))),
        std::move(streams), std::nullopt, 0, StepDiagnostics{}};
}

FilterState pfgspf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                        const Eigen::VectorXd& z, const FilterConfig& config,
                        rng::RandomStream& rs) {
    return flow_mixture_step(state, model, z, config, rs);
}

FilterState pfgpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                       const Eigen::VectorXd& z, const FilterConfig& config,
                       rng::RandomStream& rs) {
    if (config.n_components != 1)
        throw std::invalid_argument("pfgpf_step: requires n_components == 1");
    return flow_mixture_step(state, model, z, config, rs);
}

FilterState gspf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs) {
    return plain_mixture_step(state, model, z, config, rs);
}

FilterState gpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                     const Eigen::VectorXd& z, const FilterConfig& config,
                     rng::RandomStream& rs) {
    if (config.n_components != 1)
        throw std::invalid_argument("gpf_step: requires n_components == 1");
    return plain_mixture_step(state, model, z, config, rs);
}

FilterState pfpf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs, bool localized) {
    check_step_inputs(state, model, z, config);
    const mix::ParticleCloud& cloud = require_cloud(state, "pfpf_step");
    const flow::FlowSchedule schedule = flow::make_schedule(config.schedule);
    const Eigen::Index n = cloud.size();

    Eigen::MatrixXd eta0 = propagate(model, cloud.particles, rs);
    mix::Gaussian predictive = mix::weighted_moments(eta0, cloud.log_weights);

    flow::FlowResult fr = localized ? flow::ledh_flow(model, eta0, predictive, z, schedule)
                                    : flow::edh_flow(model, eta0, predictive, z, schedule);

    StepDiagnostics diag;
    diag.max_log_prior_ratio = kNegInf;
    Eigen::VectorXd lw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double prior_ratio = predictive.log_density(fr.eta1.row(i).transpose()) -
                                   predictive.log_density(eta0.row(i).transpose());
        diag.max_log_prior_ratio = std::max(diag.max_log_prior_ratio, prior_ratio);
        lw[i] = cloud.log_weights[i] + prior_ratio + fr.log_jac_det[i] +
                model.observation_log_likelihood(fr.eta1.row(i).transpose(), z);
    }
    check_log_weights(lw, "pfpf_step");

    mix::ParticleCloud next_cloud;
    next_cloud.particles = std::move(fr.eta1);
    next_cloud.component_ids = cloud.component_ids;

    bool degenerate = (lw.maxCoeff() == kNegInf);
    if (degenerate) {
        lw.setConstant(-std::log(static_cast<double>(n)));
    } else {
        mix::normalize_log_weights(lw);
    }
    double ess = mix::effective_sample_size(lw);
    diag.degenerate = {degenerate ? std::uint8_t{1} : std::uint8_t{0}};

    if (ess < config.resample_fraction * static_cast<double>(n)) {
        std::vector<int> idx = mix::systematic_resample(lw, n, rs);
        Eigen::MatrixXd resampled(n, next_cloud.particles.cols());
        for (Eigen::Index k = 0; k < n; ++k)
            resampled.row(k) = next_cloud.particles.row(idx[static_cast<std::size_t>(k)]);
        next_cloud.particles = std::move(resampled);
        lw.setConstant(-std::log(static_cast<double>(n)));
        diag.resampled = true;
        ess = static_cast<double>(n);
    }
    next_cloud.log_weights = std::move(lw);
    diag.component_ess = Eigen::VectorXd::Constant(1, ess);
    diag.g_eff = 1.0;

    return make_cloud_state(std::move(next_cloud), state, std::move(diag));
}

namespace {

FilterState raw_flow_step(const FilterState& state, const ssm::StateSpaceModel& model,
                          const Eigen::VectorXd& z, const FilterConfig& config,
                          rng::RandomStream& rs, bool localized) {
    check_step_inputs(state, model, z, config);
    const mix::ParticleCloud& cloud = require_cloud(state, "raw flow step");
    const flow::FlowSchedule schedule = flow::make_schedule(config.schedule);
    const Eigen::Index n = cloud.size();

    Eigen::MatrixXd eta0 = propagate(model, cloud.particles, rs);
    mix::Gaussian predictive = mix::empirical_moments(eta0);
    flow::FlowResult fr = localized ? flow::ledh_flow(model, eta0, predictive, z, schedule)
                                    : flow::edh_flow(model, eta0, predictive, z, schedule);

    mix::ParticleCloud next_cloud;
    next_cloud.particles = std::move(fr.eta1);
    next_cloud.log_weights = Eigen::VectorXd::Constant(n, -std::log(static_cast<double>(n)));
    next_cloud.component_ids = cloud.component_ids;

    StepDiagnostics diag;
    diag.g_eff = 1.0;
    diag.component_ess = Eigen::VectorXd::Constant(1, static_cast<double>(n));
    diag.degenerate = {0};
    diag.max_log_prior_ratio = 0.0;
    return make_cloud_state(std::move(next_cloud), state, std::move(diag));
}

}  // namespace

FilterState edh_step(const FilterState& state, const ssm::StateSpaceModel& model,
                     const Eigen::VectorXd& z, const FilterConfig& config,
                     rng::RandomStream& rs) {
    return raw_flow_step(state, model, z, config, rs, false);
}

FilterState ledh_step(const FilterState& state, const ssm::StateSpaceModel& model,
                      const Eigen::VectorXd& z, const FilterConfig& config,
                      rng::RandomStream& rs) {
    return raw_flow_step(state, model, z, config, rs, true);
}

FilterState kalman_step(const FilterState& state, const ssm::StateSpaceModel& model,
                        const Eigen::VectorXd& z, const FilterConfig& config,
                        rng::RandomStream& rs) {
    (void)rs;
    check_step_inputs(state, model, z, config);
    if (!model.linear)
        throw std::invalid_argument("kalman_step: model has no linear-Gaussian description");
    const ssm::LinearModelInfo& lin = *model.linear;
    const mix::Gaussian& post = state.posterior.component(0);

    Eigen::VectorXd mean_pred = lin.transition * post.mean();
    Eigen::MatrixXd cov_pred =
        lin.transition * post.cov() * lin.transition.transpose() + lin.process_cov;

    Eigen::MatrixXd pct = cov_pred * lin.observation.transpose();
    Eigen::MatrixXd s = lin.observation * pct + lin.observation_cov;
    Eigen::LLT<Eigen::MatrixXd> s_llt;
    mix::factor_spd(s, s_llt, "kalman_step: innovation");
    Eigen::MatrixXd gain = s_llt.solve(pct.transpose()).transpose();

    Eigen::VectorXd mean_new = mean_pred + gain * (z - lin.observation * mean_pred);
    // Joseph form keeps the covariance symmetric positive-definite.
    Eigen::MatrixXd ikc =
        Eigen::MatrixXd::Identity(model.dim_x, model.dim_x) - gain * lin.observation;
    Eigen::MatrixXd cov_new =
        ikc * cov_pred * ikc.transpose() + gain * lin.observation_cov * gain.transpose();

    std::vector<mix::Gaussian> comps;
    comps.emplace_back(std::move(mean_new), std::move(cov_new));
    StepDiagnostics diag;
    diag.g_eff = 1.0;
    return FilterState{mix::GaussianMixture(std::move(comps), Eigen::VectorXd::Ones(1)),
                       state.component_streams, std::nullopt, state.time_index + 1,
                       std::move(diag)};
}

FilterState bootstrap_pf_step(const FilterState& state, const ssm::StateSpaceModel& model,
                              const Eigen::VectorXd& z, const FilterConfig& config,
                              rng::RandomStream& rs) {
    check_step_inputs(state, model, z, config);
    const mix::ParticleCloud& cloud = require_cloud(state, "bootstrap_pf_step");
    const Eigen::Index n = cloud.size();

    mix::ParticleCloud next_cloud;
    next_cloud.particles = propagate(model, cloud.particles, rs);
    next_cloud.component_ids = cloud.component_ids;

    Eigen::VectorXd lw =
        cloud.log_weights + observation_log_weights(model, next_cloud.particles, z);
    check_log_weights(lw, "bootstrap_pf_step");

    StepDiagnostics diag;
    bool degenerate = (lw.maxCoeff() == kNegInf);
    if (degenerate) {
        lw.setConstant(-std::log(static_cast<double>(n)));
    } else {
        mix::normalize_log_weights(lw);
    }
    double ess = mix::effective_sample_size(lw);
    diag.degenerate = {degenerate ? std::uint8_t{1} : std::uint8_t{0}};

    if (ess < config.resample_fraction * static_cast<double>(n)) {
        std::vector<int> idx = mix::systematic_resample(lw, n, rs);
        Eigen::MatrixXd resampled(n, next_cloud.particles.cols());
        for (Eigen::Index k = 0; k < n; ++k)
            resampled.row(k) = next_cloud.particles.row(idx[static_cast<std::size_t>(k)]);
        next_cloud.particles = std::move(resampled);
        lw.setConstant(-std::log(static_cast<double>(n)));
        diag.resampled = true;
        ess = static_cast<double>(n);
    }
    next_cloud.log_weights = std::move(lw);
    diag.component_ess = Eigen::VectorXd::Constant(1, ess);
    diag.g_eff = 1.0;
    return make_cloud_state(std::move(next_cloud), state, std::move(diag));
}

FilterState step(const FilterState& state, const ssm::StateSpaceModel& model,
                 const Eigen::VectorXd& z, const FilterConfig& config,
                 rng::RandomStream& rs) {
    switch (config.kind) {
        case FilterKind::edh: return edh_step(state, model, z, config, rs);
        case FilterKind::ledh: return ledh_step(state, model, z, config, rs);
        case FilterKind::pfpf_edh: return pfpf_step(state, model, z, config, rs, false);
        case FilterKind::pfpf_ledh: return pfpf_step(state, model, z, config, rs, true);
        case FilterKind::gpf: return gpf_step(state, model, z, config, rs);
        case FilterKind::gspf: return gspf_step(state, model, z, config, rs);
        case FilterKind::pfgpf: return pfgpf_step(state, model, z, config, rs);
        case FilterKind::pfgspf: return pfgspf_step(state, model, z, config, rs);
        case FilterKind::kalman: return kalman_step(state, model, z, config, rs);
        case FilterKind::bootstrap_pf: return bootstrap_pf_step(state, model, z, config, rs);
    }
    throw std::invalid_argument("step: unknown filter kind");
}

Eigen::VectorXd state_estimate(const FilterState& state) {
    return mix::state_estimate(state.posterior);
}

}  // namespace flowbank::filters
