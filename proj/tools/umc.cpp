#include "CLI11.hpp"
#include "json.hpp"

#include "umc/checkpoint.hpp"
#include "umc/config.hpp"
#include "umc/data_io.hpp"
#include "umc/grad_suite.hpp"
#include "umc/metrics.hpp"
#include "umc/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace umc;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::BadConfig:
        case ErrorCode::BadGrid:
        case ErrorCode::BadRate:
        case ErrorCode::BadK:
            return kUsage;
        case ErrorCode::NormZero:
        case ErrorCode::GradNonFinite:
            return kNumeric;
        default:
            return kData;
    }
}

int worker_threads() {
    const char* env = std::getenv("UMC_THREADS");
    if (!env) return 1;
    int n = std::atoi(env);
    return n > 0 ? n : 1;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<int> read_ints(const fs::path& path) { return read_labels(path); }

struct RunFlags {
    std::string config;
    std::string manifest;
    std::string seeds;
    std::string variant;
    std::string ablation;
    std::string out;
    std::vector<std::string> sets;
    bool checkpoint = false;
    bool embeddings = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "key=value config file");
    cmd->add_option("--manifest", f.manifest, "dataset manifest (overrides data.manifest)");
    cmd->add_option("--seeds", f.seeds, "seed list, e.g. 0-4 or 0,2,7");
    cmd->add_option("--variant", f.variant, "full | text_only");
    cmd->add_option("--ablation", f.ablation,
                    "none | no_pretrain | random_step2 | scl_only | step1_kmeans | step1_ucl | step1_mse");
    cmd->add_option("--out", f.out, "output directory (overrides run.output_dir)");
    cmd->add_option("--set", f.sets, "extra key=value override, repeatable");
}

RunConfig resolve_config(const RunFlags& f) {
    RunConfig cfg = f.config.empty() ? desk_defaults() : load_config(f.config);
    for (const auto& kv : f.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "--set expects key=value, got " + kv);
        set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!f.manifest.empty()) cfg.manifest = f.manifest;
    if (!f.seeds.empty()) set_value(cfg, "run.seeds", f.seeds);
    if (!f.variant.empty()) set_value(cfg, "run.variant", f.variant);
    if (!f.ablation.empty()) set_value(cfg, "run.ablation", f.ablation);
    if (!f.out.empty()) cfg.output_dir = f.out;
    if (cfg.manifest.empty()) throw Error(ErrorCode::BadConfig, "no dataset manifest given (--manifest or data.manifest)");
    if (!fs::exists(cfg.manifest)) throw Error(ErrorCode::IoError, "manifest not found: " + cfg.manifest.string());
    cfg.validate();
    return cfg;
}

RunReport execute_run(const RunConfig& cfg, const Dataset& data, bool checkpoint, bool embeddings) {
    if (!data.labels) std::cerr << "warning: no labels in manifest; metrics skipped, assignments still written\n";
    RunReport report = run_all(data, cfg, worker_threads());
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir / "config.txt", report.config_text);
    write_text(cfg.output_dir / "report.json", report_json(report));
    if (data.labels) write_text(cfg.output_dir / "summary.csv", report_csv(report));
    for (auto& s : report.seeds) {
        const std::string tag = "seed" + std::to_string(s.seed);
        write_labels(cfg.output_dir / ("assignments_" + tag + ".txt"), s.assignments);
        if (checkpoint) save_checkpoint(cfg.output_dir / ("model_" + tag + ".umck"), s.artifacts.model, report.config_hash);
        if (embeddings) write_embeddings(cfg.output_dir / ("embeddings_" + tag + ".umcf"), s.artifacts.embeddings);
    }
    return report;
}

void print_summary(const RunReport& report) {
    if (report.summary.empty()) return;
    std::cout << report_csv(report);
}

// "key=v1,v2,v3" -> (key, values)
std::pair<std::string, std::vector<std::string>> parse_grid(const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::BadGrid, "grid expects key=v1,v2,...: " + spec);
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) values.push_back(item);
    }
    if (values.empty()) throw Error(ErrorCode::BadGrid, "grid for " + spec.substr(0, eq) + " has no values");
    return {spec.substr(0, eq), values};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Unsupervised multimodal clustering"};
    app.require_subcommand(1);

    SynthSpec synth;
    std::string synth_out, ambiguous, preset;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic multimodal dataset");
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--preset", preset, "start from a named preset (ambiguous); later flags override it")
        ->check(CLI::IsMember({"ambiguous"}));
    synth_cmd->add_option("--classes", synth.num_classes, "number of classes");
    synth_cmd->add_option("--per-class", synth.samples_per_class, "samples per class");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--ambiguous", ambiguous, "class pairs sharing a text center, e.g. 0:1,2:3");
    synth_cmd->add_option("--text-dim", synth.dims.text_dim, "text feature dimension");
    synth_cmd->add_option("--audio-dim", synth.dims.audio_dim, "audio frame dimension");
    synth_cmd->add_option("--video-dim", synth.dims.video_dim, "video frame dimension");
    synth_cmd->add_option("--audio-len", synth.dims.audio_len, "audio sequence length");
    synth_cmd->add_option("--video-len", synth.dims.video_len, "video sequence length");
    synth_cmd->add_option("--text-sep", synth.text_separation, "std of text class centers");
    synth_cmd->add_option("--audio-sep", synth.audio_separation, "std of audio class centers");
    synth_cmd->add_option("--video-sep", synth.video_separation, "std of video class centers");
    synth_cmd->add_option("--noise", synth.noise, "per-coordinate noise std");
    synth_cmd->add_option("--min-length", synth.min_length_fraction, "shortest true length as a fraction of L");

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "train and evaluate over seeds");
    add_run_flags(run_cmd, run_flags);
    run_cmd->add_flag("--checkpoint", run_flags.checkpoint, "save trained parameters per seed");
    run_cmd->add_flag("--embeddings", run_flags.embeddings, "export final embeddings per seed");

    RunFlags sweep_flags;
    std::vector<std::string> grids;
    auto* sweep_cmd = app.add_subcommand("sweep", "run the Cartesian product of parameter grids");
    add_run_flags(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--grid", grids, "key=v1,v2,... (repeatable)");

    std::string assignments_path, labels_path;
    int eval_k = 0;
    auto* eval_cmd = app.add_subcommand("eval", "score an assignment file against labels");
    eval_cmd->add_option("--assignments", assignments_path)->required();
    eval_cmd->add_option("--labels", labels_path)->required();
    eval_cmd->add_option("--k", eval_k, "number of classes (default: largest label + 1)");

    double gc_tol = 1e-4;
    auto* gc_cmd = app.add_subcommand("grad-check", "check every trainable layer and loss against finite differences");
    gc_cmd->add_option("--tol", gc_tol, "maximum relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*synth_cmd) {
            if (!preset.empty()) {
                // re-parse so explicit flags land on top of the preset
                SynthSpec base = text_ambiguous_benchmark(0);
                synth = base;
                app.parse(argc, argv);
            }
            if (!ambiguous.empty() || preset.empty()) synth.text_ambiguity_pairs = parse_pairs(ambiguous);
            auto manifest = save_dataset(synth_out, generate_synthetic(synth));
            std::cout << manifest.string() << "\n";
            return kOk;
        }
        if (*run_cmd) {
            RunConfig cfg = resolve_config(run_flags);
            Dataset data = load_dataset(cfg.manifest, LoadOptions{cfg.normalize});
            print_summary(execute_run(cfg, data, run_flags.checkpoint, run_flags.embeddings));
            return kOk;
        }
        if (*sweep_cmd) {
            if (grids.empty()) throw Error(ErrorCode::BadGrid, "sweep needs at least one --grid");
            std::vector<std::pair<std::string, std::vector<std::string>>> axes;
            for (const auto& g : grids) axes.push_back(parse_grid(g));
            RunConfig base = resolve_config(sweep_flags);
            Dataset data = load_dataset(base.manifest, LoadOptions{base.normalize});

            std::ostringstream table;
            for (const auto& [key, values] : axes) table << key << ",";
            table << "nmi,ari,acc,fmi,avg\n";
            std::vector<std::size_t> idx(axes.size(), 0);
            for (int point = 0;; ++point) {
                RunConfig cfg = base;
                for (std::size_t a = 0; a < axes.size(); ++a) set_value(cfg, axes[a].first, axes[a].second[idx[a]]);
                cfg.output_dir = base.output_dir / ("point" + std::to_string(point));
                cfg.validate();
                RunReport report = execute_run(cfg, data, false, false);
                for (std::size_t a = 0; a < axes.size(); ++a) table << axes[a].second[idx[a]] << ",";
                if (report.summary.empty()) {
                    table << ",,,,\n";
                } else {
                    char buf[96];
                    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.2f,%.2f,%.2f\n", 100 * report.find("nmi")->mean,
                                  100 * report.find("ari")->mean, 100 * report.find("acc")->mean,
                                  100 * report.find("fmi")->mean, 100 * report.find("avg")->mean);
                    table << buf;
                }
                std::size_t a = 0;
                while (a < axes.size() && ++idx[a] == axes[a].second.size()) idx[a++] = 0;
                if (a == axes.size()) break;
            }
            fs::create_directories(base.output_dir);
            write_text(base.output_dir / "sweep_summary.csv", table.str());
            std::cout << table.str();
            return kOk;
        }
        if (*eval_cmd) {
            auto pred = read_ints(assignments_path);
            auto gt = read_ints(labels_path);
            if (pred.size() != gt.size()) {
                throw Error(ErrorCode::DimMismatch, "assignments and labels differ in length");
            }
            int k = eval_k;
            for (int v : gt) k = std::max(k, v + 1);
            for (int v : pred) k = std::max(k, v + 1);
            MetricReport rep = evaluate(gt, pred, k);
            nlohmann::ordered_json j;
            j["nmi"] = rep.nmi;
            j["ari"] = rep.ari;
            j["acc"] = rep.acc;
            j["fmi"] = rep.fmi;
            j["avg"] = rep.average();
            j["mapping"] = rep.mapping;
            j["confusion"] = rep.confusion;
            std::cout << j.dump(2) << "\n";
            return kOk;
        }
        if (*gc_cmd) {
            bool all = true;
            for (const auto& c : run_grad_suite(gc_tol)) {
                std::printf("%-32s %s  max_rel_error=%.3e  entries=%zu\n", c.name.c_str(),
                            c.result.pass ? "PASS" : "FAIL", c.result.max_rel_error, c.result.entries_checked);
                all = all && c.result.pass;
            }
            return all ? kOk : kNumeric;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kData;
    }
    return kUsage;
}
