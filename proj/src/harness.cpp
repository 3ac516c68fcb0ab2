#include "flowbank/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "flowbank/errors.hpp"

namespace flowbank::harness {

namespace {

using nlohmann::json;

// Seed-derivation tags: truth streams are shared across cells and runs,
// init-jitter streams across cells, filter streams are per trial.
constexpr std::uint64_t kTagTruth = 1;
constexpr std::uint64_t kTagInit = 2;
constexpr std::uint64_t kTagFilter = 3;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
    throw std::runtime_error("config field '" + path + "': " + what);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known) fail_field(path + "." + item.key(), "unknown key");
    }
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail_field(path + "." + key, e.what());
    }
}

scenarios::LinearGaussianConfig parse_linear_gaussian(const json& j, const std::string& path) {
    check_keys(j, path,
               {"dim", "horizon", "transition_scale", "process_var", "obs_var", "prior_var"});
    scenarios::LinearGaussianConfig c;
    c.dim = get_or(j, path, "dim", c.dim);
    c.horizon = get_or(j, path, "horizon", c.horizon);
    c.transition_scale = get_or(j, path, "transition_scale", c.transition_scale);
    c.process_var = get_or(j, path, "process_var", c.process_var);
    c.obs_var = get_or(j, path, "obs_var", c.obs_var);
    c.prior_var = get_or(j, path, "prior_var", c.prior_var);
    return c;
}

scenarios::AcousticConfig parse_acoustic(const json& j, const std::string& path) {
    check_keys(j, path,
               {"n_targets", "sensor_grid_side", "region", "amplitude", "range_offset",
                "obs_noise_var", "dt", "velocity_noise_var", "horizon", "initial_targets",
                "prior_cov_diag"});
    scenarios::AcousticConfig c;
    c.n_targets = get_or(j, path, "n_targets", c.n_targets);
    c.sensor_grid_side = get_or(j, path, "sensor_grid_side", c.sensor_grid_side);
    c.region = get_or(j, path, "region", c.region);
    c.amplitude = get_or(j, path, "amplitude", c.amplitude);
    c.range_offset = get_or(j, path, "range_offset", c.range_offset);
    c.obs_noise_var = get_or(j, path, "obs_noise_var", c.obs_noise_var);
    c.dt = get_or(j, path, "dt", c.dt);
    c.velocity_noise_var = get_or(j, path, "velocity_noise_var", c.velocity_noise_var);
    c.horizon = get_or(j, path, "horizon", c.horizon);
    if (j.contains("initial_targets")) {
        const json& arr = j.at("initial_targets");
        if (!arr.is_array()) fail_field(path + ".initial_targets", "expected array of [x,y,vx,vy]");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const json& row = arr[k];
            if (!row.is_array() || row.size() != 4)
                fail_field(path + ".initial_targets[" + std::to_string(k) + "]",
                           "expected 4 numbers");
            Eigen::Vector4d v;
            for (int q = 0; q < 4; ++q) {
                try {
                    v[q] = row[static_cast<std::size_t>(q)].get<double>();
                } catch (const json::exception& e) {
                    fail_field(path + ".initial_targets[" + std::to_string(k) + "]", e.what());
                }
            }
            c.initial_targets.push_back(v);
        }
    }
    if (j.contains("prior_cov_diag")) {
        const json& arr = j.at("prior_cov_diag");
        if (!arr.is_array() || arr.size() != 4)
            fail_field(path + ".prior_cov_diag", "expected 4 numbers");
        for (int q = 0; q < 4; ++q) {
            try {
                c.prior_cov_diag[q] = arr[static_cast<std::size_t>(q)].get<double>();
            } catch (const json::exception& e) {
                fail_field(path + ".prior_cov_diag", e.what());
            }
        }
    }
    return c;
}

scenarios::SensorNetConfig parse_sensor_net(const json& j, const std::string& path) {
    check_keys(j, path,
               {"grid_side", "ar_coeff", "kernel_length", "dof", "skew", "count_scale",
                "count_slope", "surrogate_floor", "horizon"});
    scenarios::SensorNetConfig c;
    c.grid_side = get_or(j, path, "grid_side", c.grid_side);
    c.ar_coeff = get_or(j, path, "ar_coeff", c.ar_coeff);
    c.kernel_length = get_or(j, path, "kernel_length", c.kernel_length);
    c.dof = get_or(j, path, "dof", c.dof);
    c.skew = get_or(j, path, "skew", c.skew);
    c.count_scale = get_or(j, path, "count_scale", c.count_scale);
    c.count_slope = get_or(j, path, "count_slope", c.count_slope);
    c.surrogate_floor = get_or(j, path, "surrogate_floor", c.surrogate_floor);
    c.horizon = get_or(j, path, "horizon", c.horizon);
    return c;
}

scenarios::ScenarioConfig parse_scenario(const json& j, const std::string& path) {
    check_keys(j, path, {"kind", "linear_gaussian", "acoustic", "sensor_net"});
    scenarios::ScenarioConfig c;
    const std::string kind_name = get_or<std::string>(j, path, "kind", "linear_gaussian");
    const auto kind = scenarios::parse_scenario_kind(kind_name);
    if (!kind) fail_field(path + ".kind", "unknown scenario '" + kind_name + "'");
    c.kind = *kind;
    if (j.contains("linear_gaussian"))
        c.linear_gaussian = parse_linear_gaussian(j.at("linear_gaussian"), path + ".linear_gaussian");
    if (j.contains("acoustic")) c.acoustic = parse_acoustic(j.at("acoustic"), path + ".acoustic");
    if (j.contains("sensor_net"))
        c.sensor_net = parse_sensor_net(j.at("sensor_net"), path + ".sensor_net");
    return c;
}

json scenario_to_json(const scenarios::ScenarioConfig& c) {
    json j;
    j["kind"] = scenarios::to_string(c.kind);
    switch (c.kind) {
        case scenarios::ScenarioKind::linear_gaussian: {
            const auto& s = c.linear_gaussian;
            j["linear_gaussian"] = {{"dim", s.dim},
                                    {"horizon", s.horizon},
                                    {"transition_scale", s.transition_scale},
                                    {"process_var", s.process_var},
                                    {"obs_var", s.obs_var},
                                    {"prior_var", s.prior_var}};
            break;
        }
        case scenarios::ScenarioKind::acoustic: {
            const auto& s = c.acoustic;
            json targets = json::array();
            for (const Eigen::Vector4d& t : s.initial_targets)
                targets.push_back({t[0], t[1], t[2], t[3]});
            j["acoustic"] = {{"n_targets", s.n_targets},
                             {"sensor_grid_side", s.sensor_grid_side},
                             {"region", s.region},
                             {"amplitude", s.amplitude},
                             {"range_offset", s.range_offset},
                             {"obs_noise_var", s.obs_noise_var},
                             {"dt", s.dt},
                             {"velocity_noise_var", s.velocity_noise_var},
                             {"horizon", s.horizon},
                             {"initial_targets", targets},
                             {"prior_cov_diag",
                              {s.prior_cov_diag[0], s.prior_cov_diag[1], s.prior_cov_diag[2],
                               s.prior_cov_diag[3]}}};
            break;
        }
        case scenarios::ScenarioKind::sensor_net: {
            const auto& s = c.sensor_net;
            j["sensor_net"] = {{"grid_side", s.grid_side},
                               {"ar_coeff", s.ar_coeff},
                               {"kernel_length", s.kernel_length},
                               {"dof", s.dof},
                               {"skew", s.skew},
                               {"count_scale", s.count_scale},
                               {"count_slope", s.count_slope},
                               {"surrogate_floor", s.surrogate_floor},
                               {"horizon", s.horizon}};
            break;
        }
    }
    return j;
}

int resolve_threads(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("FLOWBANK_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

}  // namespace

void Campaign::validate() const {
    scenario.validate();
    if (cells.empty()) throw std::invalid_argument("campaign: at least one cell required");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        filters::FilterConfig cfg;
        cfg.kind = cells[i].kind;
        cfg.n_components = cells[i].g;
        cfg.particles_per_component = cells[i].np_star;
        cfg.schedule = schedule;
        cfg.resample_fraction = resample_fraction;
        try {
            cfg.validate();
        } catch (const std::exception& e) {
            throw std::invalid_argument("campaign cell " + std::to_string(i) + ": " + e.what());
        }
    }
    if (trajectories < 1) throw std::invalid_argument("campaign: trajectories must be >= 1");
    if (runs_per_trajectory < 1)
        throw std::invalid_argument("campaign: runs_per_trajectory must be >= 1");
    if (!(init_jitter_scale >= 0.0))
        throw std::invalid_argument("campaign: init_jitter_scale must be >= 0");
    if (!(lost_track_threshold > 0.0))
        throw std::invalid_argument("campaign: lost_track_threshold must be positive");
    if (!(omat_order >= 1.0)) throw std::invalid_argument("campaign: omat_order must be >= 1");
    if (threads < 0) throw std::invalid_argument("campaign: threads must be >= 0");
    if (output_dir.empty()) throw std::invalid_argument("campaign: output_dir must be set");
}

Campaign campaign_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config: top level must be an object");
    check_keys(j, "config",
               {"name", "scenario", "schedule", "cells", "trajectories", "runs_per_trajectory",
                "seed", "init_jitter_scale", "resample_fraction", "lost_track_threshold",
                "omat_order", "threads", "output_dir"});

    Campaign c;
    c.name = get_or<std::string>(j, "config", "name", c.name);
    if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario"), "config.scenario");
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        check_keys(s, "config.schedule", {"n_steps", "ratio"});
        c.schedule.n_steps = get_or(s, "config.schedule", "n_steps", c.schedule.n_steps);
        c.schedule.ratio = get_or(s, "config.schedule", "ratio", c.schedule.ratio);
    }
    if (j.contains("cells")) {
        const json& arr = j.at("cells");
        if (!arr.is_array()) fail_field("config.cells", "expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const json& cj = arr[i];
            const std::string path = "config.cells[" + std::to_string(i) + "]";
            if (!cj.is_object()) fail_field(path, "expected an object");
            check_keys(cj, path, {"filter", "g", "np_star"});
            Cell cell;
            const std::string fname = get_or<std::string>(cj, path, "filter", "");
            const auto kind = filters::parse_filter_kind(fname);
            if (!kind) fail_field(path + ".filter", "unknown filter '" + fname + "'");
            cell.kind = *kind;
            cell.g = get_or(cj, path, "g", cell.g);
            cell.np_star = get_or(cj, path, "np_star", cell.np_star);
            c.cells.push_back(cell);
        }
    }
    c.trajectories = get_or(j, "config", "trajectories", c.trajectories);
    c.runs_per_trajectory = get_or(j, "config", "runs_per_trajectory", c.runs_per_trajectory);
    c.master_seed = get_or(j, "config", "seed", c.master_seed);
    c.init_jitter_scale = get_or(j, "config", "init_jitter_scale", c.init_jitter_scale);
    c.resample_fraction = get_or(j, "config", "resample_fraction", c.resample_fraction);
    c.lost_track_threshold = get_or(j, "config", "lost_track_threshold", c.lost_track_threshold);
    c.omat_order = get_or(j, "config", "omat_order", c.omat_order);
    c.threads = get_or(j, "config", "threads", c.threads);
    c.output_dir = get_or<std::string>(j, "config", "output_dir", c.output_dir);
    c.validate();
    return c;
}

Campaign load_campaign(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return campaign_from_json(ss.str());
}

std::string campaign_to_json(const Campaign& c) {
    json cells = json::array();
    for (const Cell& cell : c.cells)
        cells.push_back({{"filter", filters::to_string(cell.kind)},
                         {"g", cell.g},
                         {"np_star", cell.np_star}});
    json j = {{"name", c.name},
              {"scenario", scenario_to_json(c.scenario)},
              {"schedule", {{"n_steps", c.schedule.n_steps}, {"ratio", c.schedule.ratio}}},
              {"cells", cells},
              {"trajectories", c.trajectories},
              {"runs_per_trajectory", c.runs_per_trajectory},
              {"seed", c.master_seed},
              {"init_jitter_scale", c.init_jitter_scale},
              {"resample_fraction", c.resample_fraction},
              {"lost_track_threshold", c.lost_track_threshold},
              {"omat_order", c.omat_order},
              {"threads", c.threads},
              {"output_dir", c.output_dir}};
    return j.dump(2);
}

std::string fingerprint(const Campaign& c) {
    // FNV-1a over the canonical form, minus fields that do not affect
    // results (threads, output_dir).
    Campaign normalized = c;
    normalized.threads = 0;
    normalized.output_dir = "-";
    const std::string s = campaign_to_json(normalized);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

metrics::TrialRecord run_trial(const Campaign& c, const scenarios::Scenario& scenario,
                               const ssm::Trajectory& truth, int cell_id, int traj, int run,
                               const std::string& fp) {
    const Cell& cell = c.cells[static_cast<std::size_t>(cell_id)];
    const int horizon = scenario.horizon;
    const int dim = scenario.model.dim_x;

    metrics::TrialRecord rec;
    rec.cell_id = cell_id;
    rec.trajectory = traj;
    rec.run = run;
    rec.seed = rng::derive(c.master_seed, {kTagFilter, static_cast<std::uint64_t>(cell_id),
                                           static_cast<std::uint64_t>(traj),
                                           static_cast<std::uint64_t>(run)});
    rec.config_fingerprint = fp;
    rec.estimates.resize(horizon, dim);
    rec.truths.resize(horizon, dim);
    rec.step_error.resize(horizon);
    rec.step_geff.resize(horizon);

    // Run-specific prior perturbation, shared across cells for fairness.
    mix::Gaussian prior = scenario.prior;
    if (c.init_jitter_scale > 0.0) {
        rng::RandomStream init_rs(rng::derive(
            c.master_seed,
            {kTagInit, static_cast<std::uint64_t>(traj), static_cast<std::uint64_t>(run)}));
        Eigen::VectorXd shift =
            c.init_jitter_scale * (prior.chol() * init_rs.normal_vector(dim));
        prior = mix::Gaussian(prior.mean() + shift, prior.cov());
    }

    filters::FilterConfig cfg;
    cfg.kind = cell.kind;
    cfg.n_components = cell.g;
    cfg.particles_per_component = cell.np_star;
    cfg.schedule = c.schedule;
    cfg.resample_fraction = c.resample_fraction;
    cfg.seed = rec.seed;

    int completed = 0;
    const auto t_start = std::chrono::steady_clock::now();
    try {
        rng::RandomStream rs(rec.seed);
        filters::FilterState state = filters::init_state(scenario.model, cfg, rs, prior);
        for (int t = 0; t < horizon; ++t) {
            state = filters::step(state, scenario.model, truth.observations.row(t).transpose(),
                                  cfg, rs);
            const Eigen::VectorXd est = filters::state_estimate(state);
            const Eigen::VectorXd truth_state = truth.states.row(t + 1).transpose();
            rec.estimates.row(t) = est.transpose();
            rec.truths.row(t) = truth_state.transpose();
            if (scenario.metric == scenarios::ErrorMetric::omat) {
                rec.step_error[t] = metrics::omat(scenario.target_positions(est),
                                                  scenario.target_positions(truth_state),
                                                  c.omat_order);
            } else {
                rec.step_error[t] =
                    (est - truth_state).squaredNorm() / static_cast<double>(dim);
            }
            rec.step_geff[t] = state.diagnostics.g_eff;
            completed = t + 1;
        }
    } catch (const NumericalError& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.estimates.conservativeResize(completed, dim);
        rec.truths.conservativeResize(completed, dim);
        rec.step_error.conservativeResize(completed);
        rec.step_geff.conservativeResize(completed);
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return rec;
}

}  // namespace

CampaignResult run_campaign(const Campaign& c) {
    c.validate();
    const scenarios::Scenario scenario = scenarios::build(c.scenario);
    const std::string fp = fingerprint(c);

    // Truth streams depend only on (seed, trajectory): every cell and run
    // sees identical data.
    std::vector<ssm::Trajectory> truths;
    truths.reserve(static_cast<std::size_t>(c.trajectories));
    for (int traj = 0; traj < c.trajectories; ++traj) {
        rng::RandomStream rs(rng::derive(c.master_seed, {kTagTruth, static_cast<std::uint64_t>(traj)}));
        truths.push_back(ssm::simulate(scenario.model, scenario.horizon, rs));
    }

    struct Task {
        int cell, traj, run;
    };
    std::vector<Task> tasks;
    for (int cell = 0; cell < static_cast<int>(c.cells.size()); ++cell)
        for (int traj = 0; traj < c.trajectories; ++traj)
            for (int run = 0; run < c.runs_per_trajectory; ++run)
                tasks.push_back({cell, traj, run});

    CampaignResult result;
    result.trials.resize(tasks.size());

    const int n_threads =
        std::min<int>(resolve_threads(c.threads), static_cast<int>(tasks.size()));
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::string fatal;

    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            const Task& task = tasks[k];
            try {
                result.trials[k] =
                    run_trial(c, scenario, truths[static_cast<std::size_t>(task.traj)],
                              task.cell, task.traj, task.run, fp);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (fatal.empty()) fatal = e.what();
                return;
            }
        }
    };

    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (!fatal.empty()) throw std::runtime_error("run_campaign: " + fatal);

    result.aggregates = aggregate_trials(c, result.trials);
    return result;
}

std::vector<metrics::AggregateRow> aggregate_trials(
    const Campaign& c, const std::vector<metrics::TrialRecord>& trials) {
    const bool exclude_lost =
        scenarios::metric_for(c.scenario.kind) == scenarios::ErrorMetric::omat;
    std::vector<metrics::AggregateRow> rows;
    for (int cell = 0; cell < static_cast<int>(c.cells.size()); ++cell) {
        std::vector<metrics::TrialRecord> group;
        for (const metrics::TrialRecord& t : trials)
            if (t.cell_id == cell) group.push_back(t);
        metrics::AggregateRow row =
            metrics::aggregate(group, exclude_lost, c.lost_track_threshold);
        row.algorithm = filters::to_string(c.cells[static_cast<std::size_t>(cell)].kind);
        row.g = c.cells[static_cast<std::size_t>(cell)].g;
        row.np_star = c.cells[static_cast<std::size_t>(cell)].np_star;
        row.np = row.g * row.np_star;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string trials_csv(const CampaignResult& result, int dim) {
    std::string out = "cell_id,traj,run,t,error,geff";
    for (int d = 0; d < dim; ++d) out += ",est_" + std::to_string(d);
    for (int d = 0; d < dim; ++d) out += ",truth_" + std::to_string(d);
    out += "\n";
    for (const metrics::TrialRecord& rec : result.trials) {
        for (Eigen::Index t = 0; t < rec.step_error.size(); ++t) {
            out += std::to_string(rec.cell_id) + ',' + std::to_string(rec.trajectory) + ',' +
                   std::to_string(rec.run) + ',' + std::to_string(t + 1) + ',' +
                   fmt_double(rec.step_error[t]) + ',' + fmt_double(rec.step_geff[t]);
            for (int d = 0; d < dim; ++d) out += ',' + fmt_double(rec.estimates(t, d));
            for (int d = 0; d < dim; ++d) out += ',' + fmt_double(rec.truths(t, d));
            out += '\n';
        }
    }
    return out;
}

std::string aggregate_csv(const std::vector<metrics::AggregateRow>& rows) {
    std::string out = "cell_id,algorithm,G,Np_star,Np,mean,sd,lost_tracks,failed\n";
    for (const metrics::AggregateRow& r : rows) {
        const double mean = r.included > 0 ? r.mean : std::nan("");
        const double sd = r.included > 0 ? r.sd : std::nan("");
        out += std::to_string(r.cell_id) + ',' + r.algorithm + ',' + std::to_string(r.g) + ',' +
               std::to_string(r.np_star) + ',' + std::to_string(r.np) + ',' + fmt_double(mean) +
               ',' + fmt_double(sd) + ',' + std::to_string(r.lost_tracks) + ',' +
               std::to_string(r.failed) + '\n';
    }
    return out;
}

}  // namespace

void write_outputs(const Campaign& c, const CampaignResult& result,
                   const std::filesystem::path& outdir) {
    std::filesystem::create_directories(outdir);
    const int dim = result.trials.empty() ? 0 : static_cast<int>(result.trials.front().estimates.cols());
    write_file(outdir / "trials.csv", trials_csv(result, dim));
    write_file(outdir / "aggregate.csv", aggregate_csv(result.aggregates));

    json trial_meta = json::array();
    for (const metrics::TrialRecord& rec : result.trials) {
        const auto steps = rec.step_error.size();
        trial_meta.push_back({{"cell_id", rec.cell_id},
                              {"traj", rec.trajectory},
                              {"run", rec.run},
                              {"seed", rec.seed},
                              {"steps", steps},
                              {"wall_seconds", rec.wall_seconds},
                              {"wall_per_step", steps > 0 ? rec.wall_seconds / static_cast<double>(steps) : 0.0},
                              {"failed", rec.failed},
                              {"failure", rec.failure}});
    }
    json manifest = {{"campaign", json::parse(campaign_to_json(c))},
                     {"fingerprint", fingerprint(c)},
                     {"dim_x", dim},
                     {"trials", trial_meta}};
    write_file(outdir / "manifest.json", manifest.dump(2) + "\n");
}

StoredResults read_results(const std::filesystem::path& outdir) {
    std::ifstream mf(outdir / "manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot open " + (outdir / "manifest.json").string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::parse_error& e) {
        throw std::runtime_error("manifest parse error: " + std::string(e.what()));
    }

    StoredResults stored{campaign_from_json(manifest.at("campaign").dump()), {}};
    const std::string fp = manifest.value("fingerprint", "");

    struct Key {
        int cell, traj, run;
        bool operator<(const Key& o) const {
            if (cell != o.cell) return cell < o.cell;
            if (traj != o.traj) return traj < o.traj;
            return run < o.run;
        }
    };
    std::map<Key, metrics::TrialRecord> records;
    for (const json& t : manifest.at("trials")) {
        Key key{t.at("cell_id").get<int>(), t.at("traj").get<int>(), t.at("run").get<int>()};
        metrics::TrialRecord rec;
        rec.cell_id = key.cell;
        rec.trajectory = key.traj;
        rec.run = key.run;
        rec.seed = t.at("seed").get<std::uint64_t>();
        rec.wall_seconds = t.at("wall_seconds").get<double>();
        rec.failed = t.at("failed").get<bool>();
        rec.failure = t.at("failure").get<std::string>();
        rec.config_fingerprint = fp;
        records.emplace(key, std::move(rec));
    }

    std::ifstream tf(outdir / "trials.csv", std::ios::binary);
    if (!tf) throw std::runtime_error("cannot open " + (outdir / "trials.csv").string());
    std::string line;
    if (!std::getline(tf, line)) throw std::runtime_error("trials.csv: missing header");
    const int dim = manifest.at("dim_x").get<int>();

    auto split = [](const std::string& s) {
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t pos = s.find(',', start);
            if (pos == std::string::npos) {
                fields.push_back(s.substr(start));
                return fields;
            }
            fields.push_back(s.substr(start, pos - start));
            start = pos + 1;
        }
    };

    struct Row {
        int t;
        double error, geff;
        Eigen::VectorXd est, truth;
    };
    std::map<Key, std::vector<Row>> rows;
    std::size_t line_no = 1;
    while (std::getline(tf, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split(line);
        if (static_cast<int>(f.size()) != 6 + 2 * dim)
            throw std::runtime_error("trials.csv line " + std::to_string(line_no) +
                                     ": wrong column count");
        Key key{std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2])};
        Row row;
        row.t = std::stoi(f[3]);
        row.error = std::strtod(f[4].c_str(), nullptr);
        row.geff = std::strtod(f[5].c_str(), nullptr);
        row.est.resize(dim);
        row.truth.resize(dim);
        for (int d = 0; d < dim; ++d) {
            row.est[d] = std::strtod(f[static_cast<std::size_t>(6 + d)].c_str(), nullptr);
            row.truth[d] = std::strtod(f[static_cast<std::size_t>(6 + dim + d)].c_str(), nullptr);
        }
        rows[key].push_back(std::move(row));
    }

    for (auto& [key, rec] : records) {
        auto it = rows.find(key);
        const std::size_t n = (it == rows.end()) ? 0 : it->second.size();
        rec.estimates.resize(static_cast<Eigen::Index>(n), dim);
        rec.truths.resize(static_cast<Eigen::Index>(n), dim);
        rec.step_error.resize(static_cast<Eigen::Index>(n));
        rec.step_geff.resize(static_cast<Eigen::Index>(n));
        for (std::size_t k = 0; k < n; ++k) {
            const Row& row = it->second[k];
            if (row.t != static_cast<int>(k) + 1)
                throw std::runtime_error("trials.csv: non-contiguous time steps for a trial");
            rec.estimates.row(static_cast<Eigen::Index>(k)) = row.est.transpose();
            rec.truths.row(static_cast<Eigen::Index>(k)) = row.truth.transpose();
            rec.step_error[static_cast<Eigen::Index>(k)] = row.error;
            rec.step_geff[static_cast<Eigen::Index>(k)] = row.geff;
        }
        stored.trials.push_back(std::move(rec));
    }
    return stored;
}

std::string render_table_text(const Campaign& c,
                              const std::vector<metrics::AggregateRow>& rows) {
    const bool omat = scenarios::metric_for(c.scenario.kind) == scenarios::ErrorMetric::omat;
    const int total = c.trajectories * c.runs_per_trajectory;
    std::ostringstream out;
    out << "campaign: " << c.name << "  (scenario " << scenarios::to_string(c.scenario.kind)
        << ", " << (omat ? "OMAT" : "MSE") << ", " << total << " trials per cell)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-12s %-9s %5s %8s %10s %10s %5s %8s %6s %8s\n", "cell",
                  "algorithm", "budget", "G", "Np", "mean", "sd", "LT", "LT_rate", "fail",
                  "included");
    out << buf;
    for (const metrics::AggregateRow& r : rows) {
        const std::string budget = std::to_string(r.np_star) + "x" + std::to_string(r.g);
        std::snprintf(buf, sizeof buf, "%-4d %-12s %-9s %5d %8d %10.4f %10.4f %5d %8.3f %6d %8d\n",
                      r.cell_id, r.algorithm.c_str(), budget.c_str(), r.g, r.np,
                      r.included > 0 ? r.mean : std::nan(""),
                      r.included > 0 ? r.sd : std::nan(""), r.lost_tracks,
                      total > 0 ? static_cast<double>(r.lost_tracks) / total : 0.0, r.failed,
                      r.included);
        out << buf;
    }
    return out.str();
}

std::string render_table_csv(const std::vector<metrics::AggregateRow>& rows) {
    return aggregate_csv(rows);
}

std::string render_table_json(const Campaign& c,
                              const std::vector<metrics::AggregateRow>& rows) {
    json arr = json::array();
    for (const metrics::AggregateRow& r : rows)
        arr.push_back({{"cell_id", r.cell_id},
                       {"algorithm", r.algorithm},
                       {"g", r.g},
                       {"np_star", r.np_star},
                       {"np", r.np},
                       {"mean", r.included > 0 ? json(r.mean) : json()},
                       {"sd", r.included > 0 ? json(r.sd) : json()},
                       {"lost_tracks", r.lost_tracks},
                       {"failed", r.failed},
                       {"included", r.included}});
    json j = {{"campaign", c.name}, {"rows", arr}};
    return j.dump(2) + "\n";
}

std::string render_geff_csv(const std::vector<metrics::AggregateRow>& rows) {
    std::string out = "cell_id,t,avg_geff\n";
    for (const metrics::AggregateRow& r : rows)
        for (Eigen::Index t = 0; t < r.avg_geff.size(); ++t)
            out += std::to_string(r.cell_id) + ',' + std::to_string(t + 1) + ',' +
                   fmt_double(r.avg_geff[t]) + '\n';
    return out;
}

std::string render_geff_json(const Campaign& c,
                             const std::vector<metrics::AggregateRow>& rows) {
    json arr = json::array();
    for (const metrics::AggregateRow& r : rows) {
        json series = json::array();
        for (Eigen::Index t = 0; t < r.avg_geff.size(); ++t) series.push_back(r.avg_geff[t]);
        arr.push_back({{"cell_id", r.cell_id},
                       {"algorithm", r.algorithm},
                       {"g", r.g},
                       {"np_star", r.np_star},
                       {"avg_geff", series}});
    }
    json j = {{"campaign", c.name}, {"cells", arr}};
    return j.dump(2) + "\n";
}

}  // namespace flowbank::harness
