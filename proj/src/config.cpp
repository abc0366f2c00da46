#include "umc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace umc {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& value) {
    throw Error(ErrorCode::BadConfig, "invalid value for " + key + ": '" + value + "'");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) bad(key, v);
        return d;
    } catch (const std::logic_error&) {
        bad(key, v);
    }
}

long long to_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v);
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(key, v);
}

std::string fmt(double d) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

struct Field {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
    static const std::map<std::string, Field> table = [] {
        std::map<std::string, Field> f;
        auto dbl = [&](const std::string& key, double& (*ref)(RunConfig&)) {
            f[key] = {[key, ref](RunConfig& c, const std::string& v) { ref(c) = to_double(key, v); },
                      [ref](const RunConfig& c) { return fmt(ref(const_cast<RunConfig&>(c))); }};
        };
        auto num = [&](const std::string& key, int& (*ref)(RunConfig&)) {
            f[key] = {[key, ref](RunConfig& c, const std::string& v) { ref(c) = static_cast<int>(to_int(key, v)); },
                      [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
        };
        auto flag = [&](const std::string& key, bool& (*ref)(RunConfig&)) {
            f[key] = {[key, ref](RunConfig& c, const std::string& v) { ref(c) = to_bool(key, v); },
                      [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
        };

        f["data.manifest"] = {[](RunConfig& c, const std::string& v) { c.manifest = v; },
                              [](const RunConfig& c) { return c.manifest.string(); }};
        flag("data.normalize", [](RunConfig& c) -> bool& { return c.normalize; });
        num("data.num_clusters", [](RunConfig& c) -> int& { return c.num_clusters; });

        f["run.output_dir"] = {[](RunConfig& c, const std::string& v) { c.output_dir = v; },
                               [](const RunConfig& c) { return c.output_dir.string(); }};
        f["run.seeds"] = {[](RunConfig& c, const std::string& v) {
                              std::vector<std::uint64_t> seeds;
                              std::stringstream ss(v);
                              std::string item;
                              while (std::getline(ss, item, ',')) {
                                  item = trim(item);
                                  auto dash = item.find('-');
                                  if (dash != std::string::npos && dash > 0) {
                                      long long lo = to_int("run.seeds", item.substr(0, dash));
                                      long long hi = to_int("run.seeds", item.substr(dash + 1));
                                      if (lo < 0 || hi < lo) bad("run.seeds", v);
                                      for (long long s = lo; s <= hi; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
                                  } else {
                                      long long s = to_int("run.seeds", item);
                                      if (s < 0) bad("run.seeds", v);
                                      seeds.push_back(static_cast<std::uint64_t>(s));
                                  }
                              }
                              if (seeds.empty()) bad("run.seeds", v);
                              c.seeds = seeds;
                          },
                          [](const RunConfig& c) {
                              std::string out;
                              for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                                  if (i) out += ',';
                                  out += std::to_string(c.seeds[i]);
                              }
                              return out;
                          }};
        f["run.variant"] = {[](RunConfig& c, const std::string& v) { c.train.variant = parse_variant(v); },
                            [](const RunConfig& c) { return std::string(to_string(c.train.variant)); }};
        f["run.ablation"] = {[](RunConfig& c, const std::string& v) { c.train.ablation = parse_ablation(v); },
                             [](const RunConfig& c) { return std::string(to_string(c.train.ablation)); }};

        num("model.d_h", [](RunConfig& c) -> int& { return c.encoder.d_h; });
        num("model.heads", [](RunConfig& c) -> int& { return c.encoder.heads; });
        num("model.layers", [](RunConfig& c) -> int& { return c.encoder.layers; });
        num("model.ff_dim", [](RunConfig& c) -> int& { return c.encoder.ff_dim; });
        num("model.d_p", [](RunConfig& c) -> int& { return c.encoder.d_p; });
        dbl("model.dropout", [](RunConfig& c) -> double& { return c.encoder.dropout; });

        dbl("train.t0", [](RunConfig& c) -> double& { return c.train.t0; });
        dbl("train.delta", [](RunConfig& c) -> double& { return c.train.delta; });
        num("train.batch_size", [](RunConfig& c) -> int& { return c.train.batch_size; });
        num("train.pretrain_epochs", [](RunConfig& c) -> int& { return c.train.pretrain_epochs; });
        num("train.round_epochs", [](RunConfig& c) -> int& { return c.train.round_epochs; });
        dbl("train.lr_pretrain", [](RunConfig& c) -> double& { return c.train.lr_pretrain; });
        dbl("train.lr_train", [](RunConfig& c) -> double& { return c.train.lr_train; });
        dbl("train.tau1", [](RunConfig& c) -> double& { return c.train.tau1; });
        dbl("train.tau2", [](RunConfig& c) -> double& { return c.train.tau2; });
        dbl("train.tau3", [](RunConfig& c) -> double& { return c.train.tau3; });
        dbl("train.beta1", [](RunConfig& c) -> double& { return c.train.adam.beta1; });
        dbl("train.beta2", [](RunConfig& c) -> double& { return c.train.adam.beta2; });
        dbl("train.eps", [](RunConfig& c) -> double& { return c.train.adam.eps; });
        dbl("train.weight_decay", [](RunConfig& c) -> double& { return c.train.adam.weight_decay; });
        flag("train.share_pretrain_head", [](RunConfig& c) -> bool& { return c.train.share_pretrain_head; });

        dbl("select.lower", [](RunConfig& c) -> double& { return c.selection.lower; });
        dbl("select.interval", [](RunConfig& c) -> double& { return c.selection.interval; });
        num("select.candidates", [](RunConfig& c) -> int& { return c.selection.candidates; });
        num("select.fixed_k_near", [](RunConfig& c) -> int& { return c.selection.fixed_k_near; });
        f["select.mode"] = {[](RunConfig& c, const std::string& v) {
                                if (v == "auto") c.selection.mode = SelectionMode::Auto;
                                else if (v == "fixed") c.selection.mode = SelectionMode::Fixed;
                                else if (v == "random") c.selection.mode = SelectionMode::Random;
                                else bad("select.mode", v);
                            },
                            [](const RunConfig& c) {
                                switch (c.selection.mode) {
                                    case SelectionMode::Auto: return std::string("auto");
                                    case SelectionMode::Fixed: return std::string("fixed");
                                    case SelectionMode::Random: return std::string("random");
                                }
                                return std::string("auto");
                            }};
        f["select.objective"] = {[](RunConfig& c, const std::string& v) {
                                     if (v == "max") c.selection.objective = CohesionObjective::Max;
                                     else if (v == "min") c.selection.objective = CohesionObjective::Min;
                                     else bad("select.objective", v);
                                 },
                                 [](const RunConfig& c) {
                                     return std::string(c.selection.objective == CohesionObjective::Max ? "max" : "min");
                                 }};
        return f;
    }();
    return table;
}

}  // namespace

void RunConfig::validate() const {
    encoder.validate();
    train.validate();
    selection.validate();
    if (num_clusters < 0) throw Error(ErrorCode::BadConfig, "data.num_clusters must be non-negative");
    if (seeds.empty()) throw Error(ErrorCode::BadConfig, "run.seeds must not be empty");
}

void set_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = fields();
    auto it = table.find(trim(key));
    if (it == table.end()) throw Error(ErrorCode::BadConfig, "unknown config key: " + key);
    it->second.set(cfg, trim(value));
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": expected key=value");
        }
        set_value(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = desk_defaults();
    apply_config_text(cfg, buf.str());
    // Relative manifest paths are taken relative to the config file.
    if (!cfg.manifest.empty() && cfg.manifest.is_relative()) cfg.manifest = path.parent_path() / cfg.manifest;
    return cfg;
}

std::string serialize(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, field] : fields()) out += key + "=" + field.get(cfg) + "\n";
    return out;
}

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(serialize(cfg)); }

RunConfig desk_defaults() {
    RunConfig c;
    c.encoder.d_h = 64;
    c.encoder.heads = 2;
    c.encoder.layers = 1;
    c.encoder.dropout = 0.1;
    c.train.batch_size = 128;
    c.train.pretrain_epochs = 10;
    c.train.round_epochs = 1;
    c.train.lr_pretrain = 1e-3;
    c.train.lr_train = 3e-4;
    c.train.tau1 = 0.2;
    c.train.tau2 = 1.4;
    c.train.tau3 = 1.0;
    return c;
}

}  // namespace umc
