#pragma once

#include "ddls/ddls.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace ddls::cli {

namespace fs = std::filesystem;

/// Writes `content` to `path` via a temporary file and a rename.
inline void write_atomic(const fs::path& path, const std::string& content)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " cannot be created");
}

inline std::shared_ptr<spdlog::logger> logger()
{
    static std::once_flag once;
    static std::shared_ptr<spdlog::logger> log;
    std::call_once(once, [] {
        log = spdlog::stderr_color_mt("ddls");
        log->set_pattern("[%l] %v");
        const char* level = std::getenv("DDLS_LOG");
        log->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    });
    return log;
}

struct CommonOptions {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> strategy;
    std::optional<int> schedulers;
    std::optional<int> lookahead;
};

inline ScenarioFile load_with_overrides(const CommonOptions& o)
{
    auto f = load_scenario_file(o.config);
    auto& c = f.scenario;
    if (o.seed) c.seed = *o.seed;
    if (o.strategy) c.strategy = parse_strategy(*o.strategy);
    if (o.schedulers) c.schedulers = *o.schedulers;
    if (o.lookahead) c.lookahead = *o.lookahead;
    c.validate();
    return f;
}

inline std::string metrics_csv(std::span<const RunMetrics> runs)
{
    std::ostringstream os;
    write_metrics_header(os);
    for (const auto& m : runs) write_metrics_row(os, m);
    return os.str();
}

inline int cmd_run(const CommonOptions& o, std::ostream& out)
{
    const auto f = load_with_overrides(o);
    const auto& c = f.scenario;
    logger()->info("running {} (seed {}, {} queues, {} epochs)", to_string(c.strategy), c.seed, c.queues(), c.run_epochs());
    const auto res = run_strategy(c);

    const fs::path dir(o.out);
    ensure_dir(dir);
    const RunMetrics runs[] = {res.metrics};
    write_atomic(dir / "metrics.csv", metrics_csv(runs));
    std::ostringstream tr;
    write_trajectory_csv(tr, res.trajectory, c.queues());
    write_atomic(dir / "trajectory.csv", tr.str());
    std::ostringstream fb;
    write_feedback_header(fb);
    for (const auto& msg : res.trajectory.feedback) write_feedback_rows(fb, msg);
    write_atomic(dir / "feedback.csv", fb.str());

    out << res.metrics.strategy << ": total cost " << csv::num(res.metrics.total_cost) << ", mean delay "
        << csv::num(res.metrics.mean_delay) << " epochs, peak " << csv::num(res.metrics.peak_load) << " kW, served "
        << res.metrics.served << '\n';
    return 0;
}

inline int cmd_compare(const CommonOptions& o, const std::vector<std::string>& strategies, int seeds, unsigned jobs,
                       std::ostream& out)
{
    const auto f = load_with_overrides(o);
    if (seeds < 1) throw ConfigError("--seeds must be at least 1");
    std::vector<Strategy> list;
    for (const auto& s : strategies) list.push_back(parse_strategy(s));
    if (list.empty()) throw ConfigError("no strategies to compare");

    struct Job {
        Strategy strategy;
        std::uint64_t seed;
    };
    std::vector<Job> work;
    for (int s = 0; s < seeds; ++s)
        for (auto st : list) work.push_back({st, f.scenario.seed + static_cast<std::uint64_t>(s)});

    std::vector<RunMetrics> results(work.size());
    std::vector<std::exception_ptr> errors(work.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < work.size(); i = next++) {
            try {
                auto c = f.scenario;
                c.seed = work[i].seed;
                c.strategy = work[i].strategy;
                // Parallelism comes from the job pool here.
                results[i] = c.strategy == Strategy::distributed ? run_distributed(c, scenario_arrivals(c), 1).metrics
                                                                 : run_strategy(c).metrics;
                logger()->info("{} seed {}: cost {}", results[i].strategy, results[i].seed, results[i].total_cost);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(work.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    const auto rows = compare(results);
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_atomic(dir / "metrics.csv", metrics_csv(results));
    std::ostringstream cmp;
    write_comparison_csv(cmp, rows);
    write_atomic(dir / "comparison.csv", cmp.str());
    out << cmp.str();
    return 0;
}

inline int cmd_codebook(const CommonOptions& o, std::ostream& out)
{
    const auto f = load_scenario_file(o.config);
    if (!f.design) throw ConfigError("config has no 'codebook_design' section");
    const auto& d = *f.design;
    const auto design = d.max_distortion
                            ? design_codebook_min_q(d.samples, *d.max_distortion, d.lambda_max, d.options)
                            : design_codebook_min_distortion(d.samples, *d.caps, d.lambda_max, d.interval_seconds, d.window,
                                                             d.options);
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_atomic(dir / "codebook.json", codebook_to_json(design.quantizer.codebook()).dump(2) + "\n");
    std::ostringstream cells;
    cells << "queue,rate_kw,duration_epochs,mass,distortion\n";
    const auto& book = design.quantizer.codebook();
    for (std::size_t q = 0; q < book.size(); ++q)
        cells << q + 1 << ',' << csv::num(book[q].rate_kw()) << ',' << book[q].duration() << ','
              << csv::num(design.cell_mass[q]) << ',' << csv::num(design.cell_distortion[q]) << '\n';
    write_atomic(dir / "cells.csv", cells.str());
    out << "codes " << book.size() << ", weighted distortion " << csv::num(design.weighted_distortion)
        << ", mean distortion " << csv::num(design.mean_distortion) << '\n';
    return 0;
}

inline int cmd_rates(const CommonOptions& o, std::ostream& out)
{
    const auto f = load_scenario_file(o.config);
    RatesConfig r;
    if (f.rates) {
        r = *f.rates;
    } else {
        const auto& c = f.scenario;
        c.validate();
        double total = 0.0;
        for (std::size_t q = 0; q < c.queues(); ++q)
            for (std::int64_t l = 0; l < c.horizon; ++l) total += c.arrivals_per_epoch(q, l);
        r.arrivals_per_interval = total / static_cast<double>(c.horizon);
        r.interval_seconds = c.interval_seconds;
        r.window = 1;
        r.queues = static_cast<std::int64_t>(c.queues());
    }
    out << "R_HEMS_bits_per_second," << csv::num(uplink_rate_hems(r.arrivals_per_interval, r.interval_seconds, r.window, r.queues))
        << '\n';
    out << "R_CEMS_bits_per_interval," << csv::num(uplink_rate_cems(r.arrivals_per_interval, r.queues)) << '\n';
    if (r.feedback) out << "feedback_bits_per_second," << csv::num(feedback_rate_bound(*r.feedback, r.interval_seconds)) << '\n';
    return 0;
}

inline int cmd_validate(const CommonOptions& o, std::ostream& out)
{
    load_with_overrides(o);
    out << "ok\n";
    return 0;
}

/// Entry point shared by the executable and the tests. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Digital direct load scheduling: simulate, compare and size scheduling experiments."};
    app.require_subcommand(1);

    CommonOptions o;
    std::vector<std::string> strategies{"uncontrolled", "ddls"};
    int seeds = 1;
    unsigned jobs = 0;

    auto add_common = [&](CLI::App* sub, bool run_flags) {
        sub->add_option("--config", o.config, "Scenario JSON file")->required();
        sub->add_option("--out", o.out, "Output directory (created if missing)");
        if (!run_flags) return;
        sub->add_option("--seed", o.seed, "Override the scenario seed");
        sub->add_option("--strategy", o.strategy, "ddls | uncontrolled | distributed | price")
            ->check(CLI::IsMember({"ddls", "uncontrolled", "distributed", "price"}));
        sub->add_option("--schedulers", o.schedulers, "Number of schedulers for the distributed strategy")
            ->check(CLI::PositiveNumber);
        sub->add_option("--lookahead", o.lookahead, "Lookahead window T in epochs")->check(CLI::NonNegativeNumber);
    };

    auto* run_cmd = app.add_subcommand("run", "Simulate one strategy; writes metrics.csv, trajectory.csv, feedback.csv");
    add_common(run_cmd, true);
    auto* cmp_cmd = app.add_subcommand("compare", "Run several strategies over consecutive seeds; writes metrics.csv, comparison.csv");
    add_common(cmp_cmd, true);
    cmp_cmd->add_option("--strategies", strategies, "Strategies to compare")->delimiter(',');
    cmp_cmd->add_option("--seeds", seeds, "Number of consecutive seeds, starting at the scenario seed");
    cmp_cmd->add_option("--jobs", jobs, "Worker threads (0 = one per core)");
    auto* book_cmd = app.add_subcommand("codebook", "Design a codebook from the config's codebook_design section");
    add_common(book_cmd, false);
    auto* rates_cmd = app.add_subcommand("rates", "Print uplink rates and the feedback rate bound");
    add_common(rates_cmd, false);
    auto* val_cmd = app.add_subcommand("validate", "Check a scenario file; prints ok or the first problem");
    add_common(val_cmd, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*run_cmd) return cmd_run(o, out);
        if (*cmp_cmd) return cmd_compare(o, strategies, seeds, jobs, out);
        if (*book_cmd) return cmd_codebook(o, out);
        if (*rates_cmd) return cmd_rates(o, out);
        if (*val_cmd) return cmd_validate(o, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

} // namespace ddls::cli
