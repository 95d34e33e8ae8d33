#include "mmic/runner.hpp"

#include "mmic/config.hpp"
#include "mmic/errors.hpp"
#include "mmic/metrics.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace mmic {

namespace fs = std::filesystem;

LogLevel log_level_from_env() {
    const char* v = std::getenv("MMIC_LOG");
    if (!v) return LogLevel::info;
    const std::string s(v);
    if (s == "quiet" || s == "0") return LogLevel::quiet;
    if (s == "debug" || s == "2") return LogLevel::debug;
    return LogLevel::info;
}

std::string run_id_for(const std::string& snapshot) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : snapshot) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_manifest(const fs::path& dir, const nlohmann::ordered_json& m) {
    std::ofstream out(dir / kManifestFile, std::ios::trunc);
    out << m.dump(2) << '\n';
}

} // namespace

int run(const RunOptions& opt, std::ostream& log, std::ostream& err) {
    SimConfig cfg;
    std::string snapshot;
    try {
        cfg = opt.config_path.empty() ? SimConfig{} : parse_config(opt.config_path);
        for (const auto& [k, v] : opt.overrides) apply_override(cfg, k, v);
        cfg.validate();
        snapshot = emit_config(cfg);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    }
    const std::string id = run_id_for(snapshot);

    try {
        fs::create_directories(opt.out_dir);
    } catch (const std::exception& e) {
        err << "cannot create output directory " << opt.out_dir << ": " << e.what() << '\n';
        return 2;
    }
    const fs::path dir = opt.out_dir;

    nlohmann::ordered_json manifest;
    manifest["run_id"] = id;
    manifest["status"] = "running";
    manifest["started_utc"] = utc_now();
    manifest["finished_utc"] = nullptr;
    manifest["config_source"] = opt.config_path.empty() ? "defaults" : opt.config_path;
    nlohmann::ordered_json ov = nlohmann::ordered_json::array();
    for (const auto& [k, v] : opt.overrides) ov.push_back(k + "=" + v);
    manifest["overrides"] = ov;
    manifest["metrics_schema"] = kMetricsSchemaVersion;
    manifest["outputs"] = {kConfigFile, kMetricsFile, kSummaryFile, kAssignmentFile, kTimingFile};
    write_manifest(dir, manifest);

    {
        std::ofstream c(dir / kConfigFile, std::ios::trunc);
        c << "# run_id: " << id << '\n' << snapshot;
    }

    std::ofstream metrics(dir / kMetricsFile, std::ios::trunc);
    std::ofstream summary(dir / kSummaryFile, std::ios::trunc);
    std::ofstream timing(dir / kTimingFile, std::ios::trunc);
    summary << "# run_id: " << id << '\n' << summary_csv_header() << '\n';
    timing << "# run_id: " << id << '\n' << "round,wall_seconds\n";

    if (opt.log >= LogLevel::info)
        log << "run " << id << ": " << to_string(cfg.algorithm) << ", " << cfg.rounds << " rounds -> " << dir.string()
            << '\n';

    std::size_t last_round = 0;
    auto on_round = [&](const MetricsRecord& r) {
        metrics << metrics_json_line(r, id) << '\n' << std::flush;
        summary << summary_csv_line(r) << '\n' << std::flush;
        timing << r.round << ',' << format_double(r.wall_seconds) << '\n';
        last_round = r.round;
        if (opt.log >= LogLevel::debug)
            log << "  round " << r.round << " global_acc=" << format_double(r.global_accuracy)
                << " personalized_acc=" << format_double(r.personalized_accuracy) << '\n';
    };

    try {
        const SimResult res = run_simulation(cfg, on_round);
        std::ofstream a(dir / kAssignmentFile, std::ios::trunc);
        a << "# run_id: " << id << '\n';
        write_assignment(a, res.setup.clustering.assignment);
        if (opt.log >= LogLevel::info && !res.records.empty())
            log << "run " << id << " done: M=" << res.setup.clustering.assignment.clusters
                << " final global_acc=" << format_double(res.records.back().global_accuracy) << '\n';
    } catch (const std::exception& e) {
        err << "run " << id << " aborted in round " << (last_round + 1) << ": " << e.what() << '\n';
        manifest["status"] = "aborted";
        manifest["aborted_round"] = last_round + 1;
        manifest["error"] = e.what();
        manifest["finished_utc"] = utc_now();
        write_manifest(dir, manifest);
        return 1;
    }
    manifest["status"] = "complete";
    manifest["finished_utc"] = utc_now();
    manifest["rounds_completed"] = last_round;
    write_manifest(dir, manifest);
    return 0;
}

int run_matrix(const RunOptions& opt, const std::string& key, const std::vector<std::string>& values,
               std::ostream& log, std::ostream& err) {
    if (values.empty()) {
        err << "matrix: no values for " << key << '\n';
        return 2;
    }
    const auto dot = key.rfind('.');
    const std::string tail = dot == std::string::npos ? key : key.substr(dot + 1);
    int worst = 0;
    for (const auto& v : values) {
        RunOptions o = opt;
        o.overrides.emplace_back(key, v);
        o.out_dir = opt.out_dir / (tail + "-" + v);
        worst = std::max(worst, run(o, log, err));
    }
    return worst;
}

WindowStats window_stats(const std::vector<double>& series, std::size_t window) {
    WindowStats s;
    if (series.empty() || window == 0) return s;
    const std::size_t n = std::min(window, series.size());
    const auto begin = series.end() - static_cast<std::ptrdiff_t>(n);
    // shifted by the first value so a constant window is exactly c +- 0
    const double shift = *begin;
    double sum = 0.0;
    for (auto it = begin; it != series.end(); ++it) sum += *it - shift;
    const double offset = sum / static_cast<double>(n);
    s.mean = shift + offset;
    double sq = 0.0;
    for (auto it = begin; it != series.end(); ++it) sq += (*it - shift - offset) * (*it - shift - offset);
    s.std = std::sqrt(sq / static_cast<double>(n));
    return s;
}

std::vector<CompareRow> compare_runs(const std::vector<fs::path>& dirs, std::size_t window, std::ostream& err) {
    std::vector<CompareRow> rows;
    for (const auto& d : dirs) {
        std::ifstream mf(d / kManifestFile);
        if (!mf) {
            err << "warning: skipping " << d.string() << ": no manifest\n";
            continue;
        }
        nlohmann::json manifest;
        try {
            manifest = nlohmann::json::parse(mf);
        } catch (const std::exception&) {
            err << "warning: skipping " << d.string() << ": unreadable manifest\n";
            continue;
        }
        if (manifest.value("status", "") != "complete") {
            err << "warning: skipping " << d.string() << ": run is not complete\n";
            continue;
        }
        std::ifstream in(d / kMetricsFile);
        std::vector<double> ga, gf, pa, pf;
        std::string line;
        bool bad = false;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            try {
                const auto r = parse_metrics_line(line);
                ga.push_back(r.global_accuracy);
                gf.push_back(r.global_f1);
                pa.push_back(r.personalized_accuracy);
                pf.push_back(r.personalized_f1);
            } catch (const std::exception& e) {
                err << "warning: skipping " << d.string() << ": " << e.what() << '\n';
                bad = true;
                break;
            }
        }
        if (bad) continue;
        if (ga.empty()) {
            err << "warning: skipping " << d.string() << ": empty metrics\n";
            continue;
        }
        CompareRow row;
        row.run = d.filename().empty() ? d.parent_path().filename().string() : d.filename().string();
        row.run_id = manifest.value("run_id", "");
        row.rounds = ga.size();
        row.global_accuracy = window_stats(ga, window);
        row.global_f1 = window_stats(gf, window);
        row.personalized_accuracy = window_stats(pa, window);
        row.personalized_f1 = window_stats(pf, window);
        rows.push_back(std::move(row));
    }
    return rows;
}

void print_compare_table(const std::vector<CompareRow>& rows, std::ostream& out) {
    auto cell = [](const WindowStats& s) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(2) << 100.0 * s.mean << " +- " << 100.0 * s.std;
        return os.str();
    };
    out << std::left << std::setw(24) << "run" << std::setw(8) << "rounds" << std::setw(18) << "global_acc"
        << std::setw(18) << "global_f1" << std::setw(18) << "personal_acc" << std::setw(18) << "personal_f1" << '\n';
    for (const auto& r : rows)
        out << std::left << std::setw(24) << r.run << std::setw(8) << r.rounds << std::setw(18) << cell(r.global_accuracy)
            << std::setw(18) << cell(r.global_f1) << std::setw(18) << cell(r.personalized_accuracy) << std::setw(18)
            << cell(r.personalized_f1) << '\n';
}

void write_compare_csv(const std::vector<CompareRow>& rows, std::ostream& out) {
    out << "run,run_id,rounds,global_acc_mean,global_acc_std,global_f1_mean,global_f1_std,"
           "personalized_acc_mean,personalized_acc_std,personalized_f1_mean,personalized_f1_std\n";
    for (const auto& r : rows)
        out << r.run << ',' << r.run_id << ',' << r.rounds << ',' << format_double(r.global_accuracy.mean) << ','
            << format_double(r.global_accuracy.std) << ',' << format_double(r.global_f1.mean) << ','
            << format_double(r.global_f1.std) << ',' << format_double(r.personalized_accuracy.mean) << ','
            << format_double(r.personalized_accuracy.std) << ',' << format_double(r.personalized_f1.mean) << ','
            << format_double(r.personalized_f1.std) << '\n';
}

} // namespace mmic
