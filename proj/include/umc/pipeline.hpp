#pragma once

#include "umc/config.hpp"
#include "umc/metrics.hpp"
#include "umc/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace umc {

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<int> assignments;
    std::optional<MetricReport> metrics;  // only when labels are available
    std::vector<double> pretrain_losses;
    RunArtifacts artifacts;
};

/// pretrain -> curriculum_train -> infer for one seed. Labels are read only for scoring.
SeedResult run_seed(const Dataset& data, const RunConfig& cfg, std::uint64_t seed,
                    const BatchObserver& observer = {});

struct MetricSummary {
    double mean = 0, stddev = 0;  // population standard deviation over seeds
};

struct RunReport {
    std::string config_text;
    std::uint64_t config_hash = 0;
    std::vector<SeedResult> seeds;
    // Keyed by "nmi", "ari", "acc", "fmi", "avg"; empty when no labels were available.
    std::vector<std::pair<std::string, MetricSummary>> summary;

    std::optional<MetricSummary> find(const std::string& metric) const;
};

/// Runs every configured seed. Seeds own their random streams, so `threads` > 1 changes
/// wall time only, never results.
RunReport run_all(const Dataset& data, const RunConfig& cfg, int threads = 1);

/// Number of clusters: config override, else the dataset's K.
int resolve_k(const Dataset& data, const RunConfig& cfg);

/// Report as JSON text (config echo, hash, per-seed rows, mean/std, per-round logs).
std::string report_json(const RunReport& report);

/// One row per seed plus mean and std rows; scores x100 with 2 decimals.
std::string report_csv(const RunReport& report);

}  // namespace umc
