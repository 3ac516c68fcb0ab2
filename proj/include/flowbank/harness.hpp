#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "flowbank/filters.hpp"
#include "flowbank/metrics.hpp"
#include "flowbank/scenarios.hpp"

namespace flowbank::harness {

/// One experiment cell: a filter at a fixed (G, N*_p) budget.
struct Cell {
    filters::FilterKind kind = filters::FilterKind::pfgspf;
    int g = 1;
    int np_star = 100;
};

/// A full sweep: scenario x cells x trajectories x runs under one master
/// seed. Truth/measurement streams depend only on (seed, trajectory), so all
/// cells see identical data; filter streams depend on (seed, cell,
/// trajectory, run).
struct Campaign {
    std::string name = "campaign";
    scenarios::ScenarioConfig scenario;
    flow::ScheduleConfig schedule;
    std::vector<Cell> cells;
    int trajectories = 1;
    int runs_per_trajectory = 1;
    std::uint64_t master_seed = 1;

    /// Scale of the per-run prior-mean perturbation (in units of the prior
    /// Cholesky factor); 0 disables it.
    double init_jitter_scale = 0.0;

    double resample_fraction = 0.5;
    double lost_track_threshold = 2.0;
    double omat_order = 1.0;

    /// 0 = resolve from FLOWBANK_THREADS, else 1.
    int threads = 0;

    std::string output_dir = "results";

    void validate() const;
};

/// Parses a campaign from JSON text. Unknown keys and type mismatches are
/// reported with their full field path.
Campaign campaign_from_json(const std::string& text);
Campaign load_campaign(const std::filesystem::path& file);

/// Canonical JSON echo of a campaign (sorted keys); basis of the fingerprint.
std::string campaign_to_json(const Campaign& campaign);

/// Stable 64-bit hex fingerprint of the canonical form.
std::string fingerprint(const Campaign& campaign);

struct CampaignResult {
    std::vector<metrics::TrialRecord> trials;       // sorted by (cell, traj, run)
    std::vector<metrics::AggregateRow> aggregates;  // one per cell
};

/// Executes every (cell, trajectory, run) trial. Numerical failures mark the
/// trial failed and the sweep continues. Identical (config, seed) inputs
/// reproduce identical results at any thread count.
CampaignResult run_campaign(const Campaign& campaign);

/// Writes trials.csv, aggregate.csv, and manifest.json into outdir. The CSVs
/// are byte-deterministic; the manifest carries wall times and failure
/// messages.
void write_outputs(const Campaign& campaign, const CampaignResult& result,
                   const std::filesystem::path& outdir);

/// Results read back from an output directory (campaign echo from the
/// manifest, trial records from trials.csv).
struct StoredResults {
    Campaign campaign;
    std::vector<metrics::TrialRecord> trials;
};

StoredResults read_results(const std::filesystem::path& outdir);

/// Recomputes per-cell aggregates from trial records (same path run_campaign
/// uses, so `table` reproduces aggregate.csv exactly).
std::vector<metrics::AggregateRow> aggregate_trials(const Campaign& campaign,
                                                    const std::vector<metrics::TrialRecord>& trials);

std::string render_table_text(const Campaign& campaign,
                              const std::vector<metrics::AggregateRow>& rows);
std::string render_table_csv(const std::vector<metrics::AggregateRow>& rows);
std::string render_table_json(const Campaign& campaign,
                              const std::vector<metrics::AggregateRow>& rows);

/// Per-step average G_eff series per cell, as CSV (cell_id, t, avg_geff) or
/// JSON.
std::string render_geff_csv(const std::vector<metrics::AggregateRow>& rows);
std::string render_geff_json(const Campaign& campaign,
                             const std::vector<metrics::AggregateRow>& rows);

}  // namespace flowbank::harness
