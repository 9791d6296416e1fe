#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sean/config.hpp"
#include "sean/report.hpp"
#include "sean/synth.hpp"
#include "sean/trainer.hpp"
#include "sean/world.hpp"

namespace fs = std::filesystem;
using namespace sean;

namespace {

bool is_bool_key(const std::string& key) {
    static const std::vector<std::string> keys{"warm_start", "no_social", "no_social_attention", "one_hop", "no_cnn",
                                               "no_gru"};
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::string dashed(std::string s) {
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
}

/// Registers one option per config key. Values land in `overrides` and are
/// applied on top of --config afterwards, so flags always win.
struct RunFlags {
    std::string config_file;
    std::map<std::string, std::string> overrides;
    std::map<std::string, bool> flags;

    void attach(CLI::App& app) {
        app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
        for (const auto& key : config_keys()) {
            if (key == "data_dir") continue;
            std::string names = "--" + key;
            if (key.find('_') != std::string::npos) names += ",--" + dashed(key);
            if (is_bool_key(key) && key != "warm_start") {
                app.add_flag(names, flags[key], "ablation switch");
            } else {
                app.add_option(names, overrides[key]);
            }
        }
        app.add_option("--data,--data-dir,--data_dir", overrides["data_dir"], "dataset directory with the standard file names");
    }

    RunConfig resolve() const {
        RunConfig cfg = config_file.empty() ? RunConfig{} : load_config(config_file);
        // data_dir first so explicit file paths override it
        if (auto it = overrides.find("data_dir"); it != overrides.end() && !it->second.empty())
            set_config_value(cfg, "data_dir", it->second);
        for (const auto& [k, v] : overrides)
            if (k != "data_dir" && !v.empty()) set_config_value(cfg, k, v);
        for (const auto& [k, on] : flags)
            if (on) set_config_value(cfg, k, "true");
        cfg.validate();
        return cfg;
    }
};

/// "2..10", "2..10:2" or "5,10,15".
std::vector<std::string> parse_values(const std::string& spec) {
    std::vector<std::string> out;
    if (auto dots = spec.find(".."); dots != std::string::npos) {
        std::string lo_s = spec.substr(0, dots), rest = spec.substr(dots + 2), step_s = "1";
        if (auto colon = rest.find(':'); colon != std::string::npos) {
            step_s = rest.substr(colon + 1);
            rest = rest.substr(0, colon);
        }
        long lo = 0, hi = 0, step = 0;
        try {
            lo = std::stol(lo_s);
            hi = std::stol(rest);
            step = std::stol(step_s);
        } catch (const std::exception&) {
            throw ConfigError("bad range '" + spec + "'");
        }
        if (step <= 0 || hi < lo) throw ConfigError("bad range '" + spec + "'");
        for (long v = lo; v <= hi; v += step) out.push_back(std::to_string(v));
    } else {
        std::stringstream ss(spec);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) throw ConfigError("no values in '" + spec + "'");
    return out;
}

/// Applies a sweep parameter: L, B, lambda, h (hidden), K (kernel count), r (filters).
void apply_param(RunConfig& cfg, const std::string& param, const std::string& value) {
    if (param == "L" || param == "B" || param == "lambda") {
        set_config_value(cfg, param, value);
    } else if (param == "h") {
        set_config_value(cfg, "hidden", value);
    } else if (param == "r") {
        set_config_value(cfg, "filters", value);
    } else if (param == "K") {
        set_config_value(cfg, "kernels", value);
    } else {
        throw ConfigError("unknown sweep parameter '" + param + "' (use L, B, lambda, h, K or r)");
    }
    cfg.validate();
}

std::vector<DailyReport> run_stream(StreamTrainer& trainer, bool verbose) {
    return trainer.run([&](const DailyReport& r) {
        if (verbose)
            std::fprintf(stderr, "day %d -> %d  auc %s  f1 %s  gini %s\n", r.train_day, r.test_day,
                         fmt_metric(r.auc).c_str(), fmt_metric(r.f1).c_str(), fmt_metric(r.gini).c_str());
    });
}

std::ofstream open_out(const std::string& path) {
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Socially explorative document recommendation: generate, run, sweep, bench, report"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic world");
    std::string gen_out, gen_json;
    std::map<std::string, std::string> gen_values;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--world-config", gen_json, "JSON object with world settings")->check(CLI::ExistingFile);
    const nlohmann::json world_defaults = WorldConfig{};
    for (const auto& [key, _] : world_defaults.items()) {
        std::string names = "--" + key;
        if (key.find('_') != std::string::npos) names += ",--" + dashed(key);
        gen->add_option(names, gen_values[key]);
    }

    // run
    auto* run = app.add_subcommand("run", "train and evaluate one stream");
    RunFlags run_flags;
    run_flags.attach(*run);
    std::string run_out = "run_out";
    bool quiet = false;
    run->add_option("--out", run_out, "output directory");
    run->add_flag("--quiet", quiet, "no per-day progress on stderr");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "grid over one hyper-parameter");
    RunFlags sweep_flags;
    sweep_flags.attach(*sweep);
    std::string sweep_param, sweep_values, sweep_out;
    sweep->add_option("--param", sweep_param, "L, B, lambda, h, K or r")->required();
    sweep->add_option("--values", sweep_values, "range a..b[:step] or comma list")->required();
    sweep->add_option("--out", sweep_out, "CSV file (default stdout)");

    // bench
    auto* bench = app.add_subcommand("bench", "wall-clock of a short stream against L or B");
    RunFlags bench_flags;
    bench_flags.attach(*bench);
    std::string bench_param, bench_values, bench_out;
    int bench_repeats = 1;
    bench->add_option("--param", bench_param, "L or B")->required();
    bench->add_option("--values", bench_values, "range a..b[:step] or comma list")->required();
    bench->add_option("--repeats", bench_repeats, "timed runs per value (median kept)")->check(CLI::PositiveNumber);
    bench->add_option("--out", bench_out, "CSV file (default stdout)");

    // report
    auto* report = app.add_subcommand("report", "collect summary.csv files of earlier runs");
    std::vector<std::string> report_dirs;
    std::string report_out;
    report->add_option("runs", report_dirs, "run output directories")->required();
    report->add_option("--out", report_out, "CSV file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) {
            WorldConfig wc;
            if (!gen_json.empty()) {
                std::ifstream in(gen_json);
                wc = world_config_from_json(nlohmann::json::parse(in));
            }
            for (const auto& [k, v] : gen_values)
                if (!v.empty()) set_world_value(wc, k, v);
            auto stats = generate_world(wc, gen_out);
            std::cout << "users " << stats.users << "\nedges " << stats.edges << "\ndocuments " << stats.documents
                      << "\ninteractions " << stats.interactions << "\nvocabulary " << stats.vocabulary << '\n';
            return 0;
        }

        if (run->parsed()) {
            RunConfig cfg = run_flags.resolve();
            World world = load_world(cfg.data, cfg.limits);
            StreamTrainer trainer(world, cfg);
            auto reports = run_stream(trainer, !quiet);
            write_run_outputs(run_out, cfg, world, trainer, reports);
            write_csv_row(std::cout, summary_columns());
            write_csv_row(std::cout, summary_row(summarize(reports)));
            return 0;
        }

        if (sweep->parsed()) {
            RunConfig base = sweep_flags.resolve();
            World world = load_world(base.data, base.limits);
            std::ofstream file;
            if (!sweep_out.empty()) file = open_out(sweep_out);
            std::ostream& out = sweep_out.empty() ? std::cout : file;
            write_config(out, base, "# ");
            std::vector<std::string> header{"param", "value"};
            for (const auto& c : summary_columns()) header.push_back(c);
            write_csv_row(out, header);
            for (const auto& v : parse_values(sweep_values)) {
                RunConfig cfg = base;
                apply_param(cfg, sweep_param, v);
                StreamTrainer trainer(world, cfg);
                auto s = summarize(run_stream(trainer, false));
                std::vector<std::string> row{sweep_param, v};
                for (const auto& c : summary_row(s)) row.push_back(c);
                write_csv_row(out, row);
                out.flush();
            }
            return 0;
        }

        if (bench->parsed()) {
            if (bench_param != "L" && bench_param != "B") throw ConfigError("bench --param must be L or B");
            RunConfig base = bench_flags.resolve();
            if (base.days == 0) base.days = 2;
            World world = load_world(base.data, base.limits);
            std::ofstream file;
            if (!bench_out.empty()) file = open_out(bench_out);
            std::ostream& out = bench_out.empty() ? std::cout : file;
            write_config(out, base, "# ");
            write_csv_row(out, {"param", "value", "seconds"});
            for (const auto& v : parse_values(bench_values)) {
                RunConfig cfg = base;
                apply_param(cfg, bench_param, v);
                std::vector<double> times;
                for (int rep = 0; rep < bench_repeats; ++rep) {
                    auto t0 = std::chrono::steady_clock::now();
                    StreamTrainer trainer(world, cfg);
                    run_stream(trainer, false);
                    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
                }
                std::sort(times.begin(), times.end());
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.4f", times[times.size() / 2]);
                write_csv_row(out, {bench_param, v, buf});
                out.flush();
            }
            return 0;
        }

        if (report->parsed()) {
            std::ofstream file;
            if (!report_out.empty()) file = open_out(report_out);
            std::ostream& out = report_out.empty() ? std::cout : file;
            std::vector<std::string> header{"run", "strategy", "seed"};
            for (const auto& c : summary_columns()) header.push_back(c);
            write_csv_row(out, header);
            for (const auto& dir : report_dirs) {
                auto s = load_summary_csv((fs::path(dir) / "summary.csv").string());
                std::string strategy, seed;
                for (const auto& [k, v] : s.config) {
                    if (k == "strategy") strategy = v;
                    if (k == "seed") seed = v;
                }
                std::vector<std::string> row{dir, strategy, seed};
                for (const auto& c : summary_columns()) row.push_back(s.get(c));
                write_csv_row(out, row);
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
