#include "mmic/config.hpp"

#include "mmic/errors.hpp"
#include "mmic/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace mmic {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

struct Field {
    const char* key;
    const char* help;
    std::function<std::string(const SimConfig&)> get;
    std::function<void(SimConfig&, const std::string&)> set;
};

#define MMIC_SIZE(KEY, MEMBER, HELP)                                                                        \
    Field {                                                                                                 \
        KEY, HELP, [](const SimConfig& c) { return std::to_string(c.MEMBER); },                            \
            [](SimConfig& c, const std::string& v) { c.MEMBER = static_cast<std::size_t>(to_u64(KEY, v)); } \
    }
#define MMIC_SEED(KEY, MEMBER, HELP)                                                          \
    Field {                                                                                   \
        KEY, HELP, [](const SimConfig& c) { return std::to_string(c.MEMBER); },              \
            [](SimConfig& c, const std::string& v) { c.MEMBER = to_u64(KEY, v); }             \
    }
#define MMIC_REAL(KEY, MEMBER, HELP)                                                          \
    Field {                                                                                   \
        KEY, HELP, [](const SimConfig& c) { return format_double(c.MEMBER); },               \
            [](SimConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }          \
    }
#define MMIC_BOOL(KEY, MEMBER, HELP)                                                          \
    Field {                                                                                   \
        KEY, HELP, [](const SimConfig& c) { return from_bool(c.MEMBER); },                   \
            [](SimConfig& c, const std::string& v) { c.MEMBER = to_bool(KEY, v); }            \
    }

template <class E>
Field enum_field(const char* key, const char* help, E SimConfig::*member,
                 std::vector<std::pair<E, const char*>> names) {
    return Field{key, help,
                 [member, names](const SimConfig& c) {
                     for (const auto& [e, n] : names)
                         if (c.*member == e) return std::string(n);
                     return std::string("?");
                 },
                 [key, member, names](SimConfig& c, const std::string& v) {
                     std::string allowed;
                     for (const auto& [e, n] : names) {
                         if (v == n) {
                             c.*member = e;
                             return;
                         }
                         allowed += std::string(allowed.empty() ? "" : "|") + n;
                     }
                     throw ConfigError(std::string(key) + ": expected one of " + allowed + ", got '" + v + "'");
                 }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = [] {
        std::vector<Field> v;
        v.push_back(enum_field<Algorithm>("run.algorithm", "mmic | fedavg | fedadagrad", &SimConfig::algorithm,
                                          {{Algorithm::mmic, "mmic"},
                                           {Algorithm::fedavg, "fedavg"},
                                           {Algorithm::fedadagrad, "fedadagrad"}}));
        v.push_back(MMIC_SIZE("run.rounds", rounds, "global rounds"));
        v.push_back(MMIC_SIZE("run.warmup_rounds", warmup_rounds, "rounds of uniform selection before Banzhaf selection"));
        v.push_back(Field{"run.threads", "OpenMP threads, 0 = runtime default",
                          [](const SimConfig& c) { return std::to_string(c.threads); },
                          [](SimConfig& c, const std::string& s) { c.threads = static_cast<int>(to_u64("run.threads", s)); }});
        v.push_back(enum_field<Exec>("run.exec", "parallel | serial (reference path)", &SimConfig::exec,
                                     {{Exec::parallel, "parallel"}, {Exec::serial, "serial"}}));
        v.push_back(Field{"ablation.pps", "poverty parameter substitution (mmic only)",
                          [](const SimConfig& c) { return from_bool(c.ablation.pps); },
                          [](SimConfig& c, const std::string& s) { c.ablation.pps = to_bool("ablation.pps", s); }});
        v.push_back(Field{"ablation.bpi", "Banzhaf client selection (mmic only)",
                          [](const SimConfig& c) { return from_bool(c.ablation.bpi); },
                          [](SimConfig& c, const std::string& s) { c.ablation.bpi = to_bool("ablation.bpi", s); }});
        v.push_back(Field{"ablation.mpo", "portfolio-modulated global aggregation (mmic only)",
                          [](const SimConfig& c) { return from_bool(c.ablation.mpo); },
                          [](SimConfig& c, const std::string& s) { c.ablation.mpo = to_bool("ablation.mpo", s); }});
        v.push_back(MMIC_SIZE("data.clients", data.clients, "client count K"));
        v.push_back(MMIC_SIZE("data.classes", data.classes, "class count C"));
        v.push_back(MMIC_SIZE("data.dim_a", data.dim_a, "modality A input dim"));
        v.push_back(MMIC_SIZE("data.dim_b", data.dim_b, "modality B input dim"));
        v.push_back(MMIC_SIZE("data.samples_per_class", data.samples_per_class, "pool size per class"));
        v.push_back(MMIC_REAL("data.dirichlet_beta", data.dirichlet_beta, "Dirichlet concentration for the non-IID split"));
        v.push_back(MMIC_REAL("data.mm", data.mm, "missing-modality rate on designated clients"));
        v.push_back(MMIC_REAL("data.mc", data.mc, "fraction of clients designated to miss modalities"));
        v.push_back(MMIC_REAL("data.prototype_scale", data.prototype_scale, "std-dev of class prototypes"));
        v.push_back(MMIC_REAL("data.noise_sigma", data.noise_sigma, "sample noise std-dev"));
        v.push_back(MMIC_SIZE("data.min_samples", data.min_samples, "minimum shard size per client"));
        v.push_back(MMIC_REAL("data.local_test_fraction", data.local_test_fraction, "per-client stratified test split"));
        v.push_back(MMIC_REAL("data.global_test_fraction", data.global_test_fraction, "held-out global test split"));
        v.push_back(MMIC_SIZE("data.client_groups", data.client_groups, "feature-shift client groups, 0 = off"));
        v.push_back(MMIC_REAL("data.group_shift", data.group_shift, "norm of each group's feature offset"));
        v.push_back(MMIC_BOOL("data.stochastic_activation", stochastic_activation,
                              "activate missing data per round with probability mc"));
        v.push_back(MMIC_SIZE("model.hidden", hidden, "encoder width h"));
        v.push_back(MMIC_SIZE("train.batch_size", batch_size, "local batch size"));
        v.push_back(MMIC_SIZE("train.local_epochs", local_epochs, "local epochs E"));
        v.push_back(MMIC_SIZE("train.subset_size", subset_size, "per-round training subset cap"));
        v.push_back(MMIC_REAL("train.lr", client_lr, "client Adam learning rate"));
        v.push_back(MMIC_REAL("train.participation", participation, "selected fraction per cluster"));
        v.push_back(MMIC_REAL("server.lr", server.lr, "global learning rate eta"));
        v.push_back(MMIC_REAL("server.beta", server.beta, "FedAdagrad momentum beta"));
        v.push_back(MMIC_REAL("server.tau_a", server.tau_a, "FedAdagrad adaptivity constant"));
        v.push_back(Field{"server.combine", "summed | sequential cluster updates",
                          [](const SimConfig& c) { return std::string(c.server.combine == CombineMode::summed ? "summed" : "sequential"); },
                          [](SimConfig& c, const std::string& s) {
                              if (s == "summed") c.server.combine = CombineMode::summed;
                              else if (s == "sequential") c.server.combine = CombineMode::sequential;
                              else throw ConfigError("server.combine: expected summed|sequential, got '" + s + "'");
                          }});
        v.push_back(Field{"server.state", "per_cluster | pooled optimizer state",
                          [](const SimConfig& c) { return std::string(c.server.state == StateMode::per_cluster ? "per_cluster" : "pooled"); },
                          [](SimConfig& c, const std::string& s) {
                              if (s == "per_cluster") c.server.state = StateMode::per_cluster;
                              else if (s == "pooled") c.server.state = StateMode::pooled;
                              else throw ConfigError("server.state: expected per_cluster|pooled, got '" + s + "'");
                          }});
        v.push_back(MMIC_REAL("mpo.lambda", lambda, "risk tolerance in [0, 1]"));
        v.push_back(Field{"mpo.tau_s", "beta* smoothing temperature",
                          [](const SimConfig& c) { return format_double(c.server.tau_s); },
                          [](SimConfig& c, const std::string& s) { c.server.tau_s = to_double("mpo.tau_s", s); }});
        v.push_back(enum_field<RiskPath>("mpo.risk_path", "prefix | direct", &SimConfig::risk_path,
                                         {{RiskPath::prefix, "prefix"}, {RiskPath::direct, "direct"}}));
        v.push_back(MMIC_REAL("selection.tau", selection_tau, "Banzhaf selection temperature"));
        v.push_back(enum_field<ThresholdRule>("selection.threshold", "zero | running_mean", &SimConfig::threshold,
                                              {{ThresholdRule::zero, "zero"}, {ThresholdRule::running_mean, "running_mean"}}));
        v.push_back(enum_field<ClusteringBackend>("clustering.backend", "lsh_kmeans | svd_hierarchical", &SimConfig::backend,
                                                  {{ClusteringBackend::lsh_kmeans, "lsh_kmeans"},
                                                   {ClusteringBackend::svd_hierarchical, "svd_hierarchical"}}));
        v.push_back(Field{"clustering.sweep", "comma list of k (kmeans) or thresholds; 'auto' for defaults",
                          [](const SimConfig& c) {
                              if (c.sweep.empty()) return std::string("auto");
                              std::string out;
                              for (double s : c.sweep) out += (out.empty() ? "" : ",") + format_double(s);
                              return out;
                          },
                          [](SimConfig& c, const std::string& s) {
                              c.sweep.clear();
                              if (s == "auto") return;
                              std::stringstream ss(s);
                              std::string item;
                              while (std::getline(ss, item, ',')) c.sweep.push_back(to_double("clustering.sweep", trim(item)));
                              if (c.sweep.empty()) throw ConfigError("clustering.sweep: empty list");
                          }});
        v.push_back(MMIC_SIZE("clustering.lsh_planes", lsh_planes, "hyperplanes per LSH sketch"));
        v.push_back(MMIC_SIZE("clustering.svd_rank", svd_rank, "subspace rank q for SVD distances"));
        v.push_back(MMIC_SEED("seed.data", data.data_seed, "synthetic pool"));
        v.push_back(MMIC_SEED("seed.partition", data.partition_seed, "Dirichlet split and local test split"));
        v.push_back(MMIC_SEED("seed.missing", data.missing_seed, "missing designation"));
        v.push_back(MMIC_SEED("seed.model", model_seed, "model init"));
        v.push_back(MMIC_SEED("seed.selection", selection_seed, "client sampling"));
        v.push_back(MMIC_SEED("seed.clustering", clustering_seed, "LSH planes and k-means init"));
        v.push_back(MMIC_SEED("seed.training", training_seed, "per-round subsets and batch order"));
        return v;
    }();
    return f;
}

#undef MMIC_SIZE
#undef MMIC_SEED
#undef MMIC_REAL
#undef MMIC_BOOL

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (key == f.key) return &f;
    return nullptr;
}

} // namespace

void apply_override(SimConfig& config, const std::string& key, const std::string& value) {
    if (key == "seed") {
        // shorthand: one seed for every stream
        for (const char* k : {"seed.data", "seed.partition", "seed.missing", "seed.model", "seed.selection",
                              "seed.clustering", "seed.training"})
            find_field(k)->set(config, value);
        return;
    }
    const Field* f = find_field(key);
    if (!f && key.find('.') == std::string::npos) {
        // bare name: accepted when exactly one section has it
        std::vector<const Field*> hits;
        for (const auto& g : fields())
            if (std::string(g.key).ends_with("." + key)) hits.push_back(&g);
        if (hits.size() > 1) {
            std::string names;
            for (const auto* h : hits) names += std::string(names.empty() ? "" : ", ") + h->key;
            throw ConfigError("ambiguous config key '" + key + "': " + names);
        }
        if (hits.size() == 1) f = hits.front();
    }
    if (!f) throw ConfigError("unknown config key: " + key);
    f->set(config, trim(value));
}

std::pair<std::string, std::string> split_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value, got '" + kv + "'");
    return {trim(kv.substr(0, eq)), trim(kv.substr(eq + 1))};
}

SimConfig parse_config_text(const std::string& text) {
    SimConfig c;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::vector<std::string> errors;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        if (!section.empty()) key = section + "." + key;
        try {
            apply_override(c, key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            errors.push_back("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    for (auto& p : c.problems()) errors.push_back(std::move(p));
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw ConfigError(msg);
    }
    return c;
}

SimConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string emit_config(const SimConfig& config) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(config) + "\n";
    return out;
}

std::vector<ConfigKeyInfo> config_keys() {
    const SimConfig defaults;
    std::vector<ConfigKeyInfo> out;
    for (const auto& f : fields()) out.push_back({f.key, f.get(defaults), f.help});
    return out;
}

bool operator==(const SimConfig& a, const SimConfig& b) { return emit_config(a) == emit_config(b); }

} // namespace mmic
