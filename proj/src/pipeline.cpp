#include "umc/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>
#include <cstdio>
#include <sstream>

namespace umc {

int resolve_k(const Dataset& data, const RunConfig& cfg) {
    int k = cfg.num_clusters > 0 ? cfg.num_clusters : data.num_classes;
    if (k < 1) throw Error(ErrorCode::BadK, "number of clusters is unknown; set data.num_clusters");
    if (static_cast<std::size_t>(k) > data.size()) throw Error(ErrorCode::TooFewSamples, "fewer samples than clusters");
    return k;
}

SeedResult run_seed(const Dataset& data, const RunConfig& cfg, std::uint64_t seed, const BatchObserver& observer) {
    cfg.validate();
    const int k = resolve_k(data, cfg);
    TrainConfig train = cfg.train;
    train.seed = seed;

    UmcModel<float> model(data.features.dims, cfg.encoder, seed);
    std::vector<double> pretrain_losses;
    if (train.ablation != Ablation::NoPretrain) pretrain_losses = pretrain(data.features, model, train, observer);
    RunArtifacts art = curriculum_train(data.features, std::move(model), train, cfg.selection, k, observer);
    std::vector<int> assignments = infer(data.features, art.model, train.variant, k, seed);

    std::optional<MetricReport> metrics;
    if (data.labels) metrics = evaluate(*data.labels, assignments, std::max(k, data.num_classes));
    return {seed, std::move(assignments), std::move(metrics), std::move(pretrain_losses), std::move(art)};
}

std::optional<MetricSummary> RunReport::find(const std::string& metric) const {
    for (const auto& [name, s] : summary) {
        if (name == metric) return s;
    }
    return std::nullopt;
}

RunReport run_all(const Dataset& data, const RunConfig& cfg, int threads) {
    RunReport report;
    report.config_text = serialize(cfg);
    report.config_hash = config_hash(cfg);
    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<std::optional<SeedResult>> results(n_seeds);
    std::vector<std::exception_ptr> errors(n_seeds);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n_seeds; i = next++) {
            try {
                results[i].emplace(run_seed(data, cfg, cfg.seeds[i]));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::clamp<long>(threads, 1, static_cast<long>(n_seeds)));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (std::size_t i = 0; i < n_seeds; ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        report.seeds.push_back(std::move(*results[i]));
    }

    if (data.labels && !report.seeds.empty()) {
        using Get = double (*)(const MetricReport&);
        const std::pair<const char*, Get> columns[] = {
            {"nmi", [](const MetricReport& m) { return m.nmi; }},
            {"ari", [](const MetricReport& m) { return m.ari; }},
            {"acc", [](const MetricReport& m) { return m.acc; }},
            {"fmi", [](const MetricReport& m) { return m.fmi; }},
            {"avg", [](const MetricReport& m) { return m.average() / 100.0; }},
        };
        const double n = static_cast<double>(report.seeds.size());
        for (const auto& [name, get] : columns) {
            double mean = 0;
            for (const auto& s : report.seeds) mean += get(*s.metrics);
            mean /= n;
            double var = 0;
            for (const auto& s : report.seeds) var += (get(*s.metrics) - mean) * (get(*s.metrics) - mean);
            report.summary.emplace_back(name, MetricSummary{mean, std::sqrt(var / n)});
        }
    }
    return report;
}

std::string report_json(const RunReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["config"] = report.config_text;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(report.config_hash));
    j["config_hash"] = hash;
    ordered_json seeds = ordered_json::array();
    for (const auto& s : report.seeds) {
        ordered_json row;
        row["seed"] = s.seed;
        if (s.metrics) {
            row["nmi"] = s.metrics->nmi;
            row["ari"] = s.metrics->ari;
            row["acc"] = s.metrics->acc;
            row["fmi"] = s.metrics->fmi;
            row["avg"] = s.metrics->average();
            row["mapping"] = s.metrics->mapping;
            row["confusion"] = s.metrics->confusion;
        }
        row["pretrain_losses"] = s.pretrain_losses;
        ordered_json rounds = ordered_json::array();
        for (const auto& r : s.artifacts.log) {
            rounds.push_back({{"round", r.round},
                              {"t", r.threshold},
                              {"inertia", r.inertia},
                              {"lloyd_iterations", r.lloyd_iterations},
                              {"selected", r.selected},
                              {"complement", r.complement},
                              {"k_near", r.k_near},
                              {"supervised_loss", r.supervised_loss},
                              {"unsupervised_loss", r.unsupervised_loss},
                              {"mse_loss", r.mse_loss}});
        }
        row["rounds"] = rounds;
        seeds.push_back(row);
    }
    j["seeds"] = seeds;
    ordered_json summary = ordered_json::object();
    for (const auto& [name, s] : report.summary) summary[name] = {{"mean", s.mean}, {"std", s.stddev}};
    j["summary"] = summary;
    return j.dump(2) + "\n";
}

std::string report_csv(const RunReport& report) {
    std::ostringstream out;
    out << "seed,nmi,ari,acc,fmi,avg\n";
    auto line = [&](const std::string& label, double nmi, double ari, double acc, double fmi, double avg) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f,%.2f,%.2f,%.2f\n", label.c_str(), 100 * nmi, 100 * ari, 100 * acc,
                      100 * fmi, 100 * avg);
        out << buf;
    };
    for (const auto& s : report.seeds) {
        if (!s.metrics) continue;
        const auto& m = *s.metrics;
        line(std::to_string(s.seed), m.nmi, m.ari, m.acc, m.fmi, m.average() / 100.0);
    }
    if (!report.summary.empty()) {
        auto get = [&](const char* name, bool stddev) {
            auto s = *report.find(name);
            return stddev ? s.stddev : s.mean;
        };
        for (bool stddev : {false, true}) {
            line(stddev ? "std" : "mean", get("nmi", stddev), get("ari", stddev), get("acc", stddev), get("fmi", stddev),
                 get("avg", stddev));
        }
    }
    return out.str();
}

}  // namespace umc
