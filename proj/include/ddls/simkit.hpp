#pragma once

// Seeded experiments: Poisson arrivals, the uncontrolled, DDLS, distributed
// and price-signal strategies, and run metrics.

#include "ddls/codec.hpp"
#include "ddls/core.hpp"
#include "ddls/csv.hpp"
#include "ddls/market.hpp"
#include "ddls/queues.hpp"
#include "ddls/scheduler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace ddls {

// ---------------------------------------------------------------------------
// Portable randomness. std::*_distribution output differs across standard
// libraries, so only the raw mt19937_64 stream (fully specified) is used.

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    /// Stream `stream` of the generator family rooted at `seed`.
    Rng(std::uint64_t seed, std::uint64_t stream)
    {
        std::uint64_t s = seed ^ (0x5851f42d4c957f2dULL * (stream + 1));
        std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s)),
                          static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s))};
        eng_.seed(seq);
    }

    std::uint64_t bits() { return eng_(); }

    /// Uniform on [0, 1) from the top 53 bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        if (n == 0) throw ConfigError("empty range");
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do x = eng_();
        while (x >= limit);
        return x % n;
    }

    /// Poisson(mean): multiplication method below 30, PTRS transformed rejection above.
    Count poisson(double mean)
    {
        if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("Poisson mean must be finite and nonnegative");
        if (mean == 0.0) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            double p = uniform();
            Count k = 0;
            while (p > limit) {
                ++k;
                p *= uniform();
            }
            return k;
        }
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<Count>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0))
                return static_cast<Count>(k);
        }
    }

private:
    std::mt19937_64 eng_;
};

// ---------------------------------------------------------------------------
// Scenario

enum class Strategy { uncontrolled, ddls, distributed, price };

inline const char* to_string(Strategy s) noexcept
{
    switch (s) {
    case Strategy::uncontrolled: return "uncontrolled";
    case Strategy::ddls: return "ddls";
    case Strategy::distributed: return "distributed";
    case Strategy::price: return "price";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s)
{
    if (s == "uncontrolled") return Strategy::uncontrolled;
    if (s == "ddls") return Strategy::ddls;
    if (s == "distributed") return Strategy::distributed;
    if (s == "price") return Strategy::price;
    throw ConfigError("unknown strategy '" + s + "' (expected ddls, uncontrolled, distributed or price)");
}

/// Supply side: P = bid + renewable bump - base load. The bid is either flat
/// or a multiple of the expected uncontrolled demand.
struct ZicSpec {
    double bid_kw = 0.0;
    /// When positive, the bid is this multiple of the expected uncontrolled load.
    double bid_demand_scale = 0.0;
    double base_load_kw = 0.0;
    double renewable_peak_kw = 0.0;
    double renewable_center_epoch = 48.0;
    double renewable_width_epochs = 12.0;
    /// Explicit profile; overrides the parametric fields when non-empty.
    std::optional<MarketProfile> explicit_profile;
};

enum class PriceShape { linear, logistic };

/// Broadcast price for the price-signal baseline, a decreasing function of
/// the ZIC power: linear c0 - k P, or c0 / (1 + exp(k (P - midpoint))).
struct PriceSignalSpec {
    PriceShape shape = PriceShape::linear;
    double slope = 1.0;
    /// Negative selects the smallest c0 that keeps every price positive.
    double offset = -1.0;
    double midpoint = 0.0;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    double interval_seconds = 900.0;
    /// Epochs in which appliances arrive; the run continues until all are served.
    std::int64_t horizon = 96;
    Codebook codebook;
    /// Expected arrivals per hour for each queue.
    std::vector<double> arrival_rate_per_hour;
    /// Optional per-epoch multiplier of the arrival rates.
    std::vector<double> arrival_profile;
    ZicSpec zic;
    double price_up = 1.0;
    double price_dn = 1.0;
    /// Waiting price per appliance per epoch, one per queue (or one for all).
    std::vector<double> delay_price{0.0};
    int lookahead = 32;
    int deadline = 32;
    int schedulers = 1;
    std::optional<Count> capacity_cap;
    PriceSignalSpec price_signal;
    PulseAlignment alignment = PulseAlignment::at_departure;
    int max_pulse = default_max_pulse_epochs;
    Strategy strategy = Strategy::ddls;

    std::size_t queues() const noexcept { return codebook.size(); }

    /// Arrival epochs plus enough drain time for every appliance to finish.
    std::int64_t run_epochs() const noexcept { return horizon + deadline + max_duration(codebook) + 1; }

    double arrivals_per_epoch(std::size_t q, std::int64_t epoch) const
    {
        if (epoch < 0 || epoch >= horizon) return 0.0;
        double m = 1.0;
        if (!arrival_profile.empty()) m = arrival_profile[static_cast<std::size_t>(epoch) % arrival_profile.size()];
        return arrival_rate_per_hour.at(q) * interval_seconds / 3600.0 * m;
    }

    DelayPrices delay_prices() const
    {
        if (delay_price.size() == 1) return DelayPrices::uniform(queues(), delay_price[0]);
        return DelayPrices{delay_price, {}};
    }

    void validate() const
    {
        if (!(interval_seconds > 0.0)) throw ConfigError("interval must be positive");
        if (horizon < 1) throw ConfigError("horizon must be at least one epoch");
        if (codebook.empty()) throw ConfigError("codebook is empty");
        validate_codebook(codebook, max_pulse);
        if (arrival_rate_per_hour.size() != queues())
            throw ConfigError("need one arrival rate per queue (" + std::to_string(queues()) + ")");
        for (double r : arrival_rate_per_hour)
            if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("arrival rates must be nonnegative");
        for (double m : arrival_profile)
            if (!(m >= 0.0) || !std::isfinite(m)) throw ConfigError("arrival profile must be nonnegative");
        if (!(price_up >= 0.0) || !(price_dn >= 0.0)) throw ConfigError("balancing prices must be nonnegative");
        if (delay_price.size() != 1 && delay_price.size() != queues())
            throw ConfigError("delay price needs one value or one per queue");
        for (double c : delay_price)
            if (!(c >= 0.0)) throw ConfigError("delay prices must be nonnegative");
        if (deadline < max_duration(codebook))
            throw ConfigError("deadline (" + std::to_string(deadline) + " epochs) is shorter than the longest pulse (" +
                              std::to_string(max_duration(codebook)) + " epochs)");
        if (lookahead < max_duration(codebook))
            throw ConfigError("lookahead (" + std::to_string(lookahead) + ") is shorter than the longest pulse (" +
                              std::to_string(max_duration(codebook)) + ")");
        if (schedulers < 1) throw ConfigError("scheduler count must be at least 1");
        if (capacity_cap && *capacity_cap < 0) throw ConfigError("capacity cap must be nonnegative");
        if (!(price_signal.slope > 0.0)) throw ConfigError("price signal slope must be positive");
        if (zic.explicit_profile) {
            if (static_cast<std::int64_t>(zic.explicit_profile->size()) < run_epochs())
                throw ConfigError("market profile covers " + std::to_string(zic.explicit_profile->size()) +
                                  " epochs but the run needs " + std::to_string(run_epochs()));
        } else if (!(zic.renewable_width_epochs > 0.0)) {
            throw ConfigError("renewable width must be positive");
        }
    }
};

/// Expected load if every appliance switched on at arrival.
inline std::vector<double> expected_uncontrolled_load(const ScenarioConfig& cfg)
{
    const int off = pulse_offset(cfg.alignment);
    std::vector<double> load(static_cast<std::size_t>(cfg.run_epochs()), 0.0);
    for (std::size_t q = 0; q < cfg.queues(); ++q) {
        const auto g = cfg.codebook[q].pulse();
        for (std::int64_t k = 0; k < cfg.horizon; ++k) {
            const double lam = cfg.arrivals_per_epoch(q, k);
            for (std::size_t j = 0; j < g.size(); ++j) {
                const auto l = k + off + static_cast<std::int64_t>(j);
                if (l < static_cast<std::int64_t>(load.size())) load[static_cast<std::size_t>(l)] += lam * g[j];
            }
        }
    }
    return load;
}

/// Market inputs over the whole run.
inline MarketProfile scenario_market(const ScenarioConfig& cfg)
{
    if (cfg.zic.explicit_profile) return *cfg.zic.explicit_profile;
    const auto n = static_cast<std::size_t>(cfg.run_epochs());
    std::vector<double> bid(n, cfg.zic.bid_kw), ren(n), base(n, cfg.zic.base_load_kw);
    if (cfg.zic.bid_demand_scale > 0.0) {
        const auto expect = expected_uncontrolled_load(cfg);
        for (std::size_t l = 0; l < n; ++l) bid[l] = cfg.zic.bid_kw + cfg.zic.bid_demand_scale * expect[l];
    }
    for (std::size_t l = 0; l < n; ++l) {
        const double x = (static_cast<double>(l) - cfg.zic.renewable_center_epoch) / cfg.zic.renewable_width_epochs;
        ren[l] = cfg.zic.renewable_peak_kw * std::exp(-0.5 * x * x);
    }
    return MarketProfile(std::move(bid), std::move(ren), std::move(base), std::vector<double>(n, cfg.price_up),
                         std::vector<double>(n, cfg.price_dn));
}

// ---------------------------------------------------------------------------
// Arrivals

/// Independent Poisson(rate[q][l]) counts per epoch and queue; queue q draws
/// from its own stream of `seed`. Events carry the queue's code parameters
/// and are ordered by epoch, then queue.
inline std::vector<ArrivalEvent> generate_arrivals(const std::vector<std::vector<double>>& rate, const Codebook& codebook,
                                                   std::int64_t horizon, std::uint64_t seed)
{
    if (rate.size() != codebook.size()) throw ConfigError("need one rate series per queue");
    std::vector<Counts> counts(codebook.size(), Counts(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)), 0));
    for (std::size_t q = 0; q < codebook.size(); ++q) {
        Rng rng(seed, q);
        for (std::int64_t l = 0; l < horizon; ++l) {
            const double lam = static_cast<std::size_t>(l) < rate[q].size() ? rate[q][static_cast<std::size_t>(l)] : 0.0;
            if (lam < 0.0) throw ConfigError("arrival rates must be nonnegative");
            counts[q][static_cast<std::size_t>(l)] = rng.poisson(lam);
        }
    }
    std::vector<ArrivalEvent> events;
    for (std::int64_t l = 0; l < horizon; ++l) {
        for (std::size_t q = 0; q < codebook.size(); ++q) {
            const RawRequest req{{codebook[q].rate_kw(), static_cast<double>(codebook[q].duration())}};
            for (Count i = 0; i < counts[q][static_cast<std::size_t>(l)]; ++i) events.push_back(ArrivalEvent{l, req});
        }
    }
    return events;
}

/// Arrival rate table [q][epoch] of a scenario.
inline std::vector<std::vector<double>> scenario_rates(const ScenarioConfig& cfg)
{
    std::vector<std::vector<double>> r(cfg.queues(), std::vector<double>(static_cast<std::size_t>(cfg.horizon)));
    for (std::size_t q = 0; q < cfg.queues(); ++q)
        for (std::int64_t l = 0; l < cfg.horizon; ++l) r[q][static_cast<std::size_t>(l)] = cfg.arrivals_per_epoch(q, l);
    return r;
}

/// Per-epoch, per-queue counts of quantized events.
inline std::vector<Counts> arrival_counts(std::span<const ArrivalEvent> events, const Quantizer& quant, std::int64_t epochs)
{
    std::vector<Counts> c(static_cast<std::size_t>(epochs), Counts(quant.codebook().size(), 0));
    for (const auto& ev : events) {
        if (ev.epoch < 0 || ev.epoch >= epochs) continue;
        ++c[static_cast<std::size_t>(ev.epoch)][static_cast<std::size_t>(quant.quantize(ev.request) - 1)];
    }
    return c;
}

// ---------------------------------------------------------------------------
// Runs

struct RunMetrics {
    std::string strategy;
    std::uint64_t seed = 0;
    int schedulers = 1;
    double total_cost = 0.0;
    double deviation_cost = 0.0;
    double delay_cost = 0.0;
    double mean_delay = 0.0;
    double peak_load = 0.0;
    Count served = 0;
    double energy_kwh = 0.0;
};

struct RunResult {
    RunMetrics metrics;
    Trajectory trajectory;
};

namespace detail {

inline RunMetrics summarize_run(const Trajectory& tr, const ScenarioConfig& cfg, const MarketProfile& market, Count served,
                                double delay_sum)
{
    RunMetrics m;
    m.seed = cfg.seed;
    m.schedulers = 1;
    for (const auto& r : tr.rows) {
        const double dev = market.price_up(r.epoch) * r.p_up + market.price_dn(r.epoch) * r.p_dn;
        m.deviation_cost += dev;
        m.delay_cost += r.stage_cost - dev;
        m.total_cost += r.stage_cost;
        m.peak_load = std::max(m.peak_load, r.ds_load);
        m.energy_kwh += r.ds_load * cfg.interval_seconds / 3600.0;
    }
    m.served = served;
    m.mean_delay = served > 0 ? delay_sum / static_cast<double>(served) : 0.0;
    return m;
}

/// Delay sum of a ledger: every backlog unit waits one epoch.
inline double ledger_delay_sum(const QueueLedger& ledger, std::int64_t epochs)
{
    double s = 0.0;
    for (std::int64_t l = 0; l < epochs; ++l)
        for (std::size_t q = 0; q < ledger.queues(); ++q) s += static_cast<double>(ledger.backlog(q, l));
    return s;
}

/// Trajectory of a fixed switch-on schedule `starts[l][q]`.
inline Trajectory schedule_trajectory(const ScenarioConfig& cfg, const MarketProfile& market,
                                      const std::vector<Counts>& arrivals, const std::vector<Counts>& starts,
                                      QueueLedger& ledger)
{
    const auto epochs = cfg.run_epochs();
    const auto delay = cfg.delay_prices();
    const Counts none(cfg.queues(), 0);
    LoadProfile load{0, {}};
    Trajectory tr;
    for (std::int64_t l = 0; l < epochs; ++l) {
        const auto i = static_cast<std::size_t>(l);
        ledger.record_arrivals(l, i < arrivals.size() ? arrivals[i] : none);
        const Counts& s = i < starts.size() ? starts[i] : none;
        ledger.apply_departures(l, s);
        load = fold_committed(std::move(load), s, l, cfg.codebook, cfg.alignment);
        Counts backlog(cfg.queues());
        for (std::size_t q = 0; q < cfg.queues(); ++q) backlog[q] = ledger.backlog(q, l);
        tr.rows.push_back(make_row(l, market, load.at(l), std::move(backlog), delay, tr.total_cost()));
    }
    return tr;
}

inline Count total_served(const QueueLedger& ledger, std::int64_t last_epoch) { return ledger.total_departures(last_epoch); }

} // namespace detail

/// Per-epoch arrival counts of a scenario's seeded arrival stream.
inline std::vector<Counts> scenario_arrivals(const ScenarioConfig& cfg)
{
    const auto events = generate_arrivals(scenario_rates(cfg), cfg.codebook, cfg.horizon, cfg.seed);
    return arrival_counts(events, Quantizer(cfg.codebook, DistortionMetric::pulse_squared_error, cfg.max_pulse), cfg.horizon);
}

/// Every appliance switches on at arrival.
inline RunResult run_uncontrolled(const ScenarioConfig& cfg, const std::vector<Counts>& arrivals)
{
    cfg.validate();
    const auto market = scenario_market(cfg);
    QueueLedger ledger(cfg.queues());
    auto tr = detail::schedule_trajectory(cfg, market, arrivals, arrivals, ledger);
    RunResult res;
    const auto last = cfg.run_epochs() - 1;
    res.metrics = detail::summarize_run(tr, cfg, market, detail::total_served(ledger, last), detail::ledger_delay_sum(ledger, last + 1));
    res.metrics.strategy = to_string(Strategy::uncontrolled);
    res.trajectory = std::move(tr);
    return res;
}

inline RunResult run_uncontrolled(const ScenarioConfig& cfg) { return run_uncontrolled(cfg, scenario_arrivals(cfg)); }

namespace detail {

inline RunResult run_single_scheduler(const ScenarioConfig& cfg, const MarketProfile& market,
                                      const std::vector<Counts>& arrivals, double forecast_scale)
{
    SchedulerConfig sc;
    sc.codebook = cfg.codebook;
    sc.lookahead = cfg.lookahead;
    sc.delay = cfg.delay_prices();
    sc.deadline = cfg.deadline;
    sc.capacity_cap = cfg.capacity_cap;
    sc.alignment = cfg.alignment;
    sc.max_pulse = cfg.max_pulse;
    auto rates = scenario_rates(cfg);
    for (auto& row : rates)
        for (double& x : row) x *= forecast_scale;
    Scheduler sched(sc, market, ArrivalForecast{std::move(rates)});
    auto tr = run_horizon(sched, arrivals, cfg.run_epochs());
    const auto last = cfg.run_epochs() - 1;
    for (std::size_t q = 0; q < cfg.queues(); ++q)
        if (sched.ledger().backlog(q, last) != 0)
            throw FeasibilityError("queue " + std::to_string(q + 1) + " still has waiting appliances at the end of the run");
    RunResult res;
    res.metrics = summarize_run(tr, cfg, market, total_served(sched.ledger(), last), ledger_delay_sum(sched.ledger(), last + 1));
    res.trajectory = std::move(tr);
    return res;
}

} // namespace detail

/// One scheduler controls every appliance; deadlines are hard constraints.
inline RunResult run_ddls(const ScenarioConfig& cfg, const std::vector<Counts>& arrivals)
{
    cfg.validate();
    auto res = detail::run_single_scheduler(cfg, scenario_market(cfg), arrivals, 1.0);
    res.metrics.strategy = to_string(Strategy::ddls);
    return res;
}

inline RunResult run_ddls(const ScenarioConfig& cfg) { return run_ddls(cfg, scenario_arrivals(cfg)); }

/// Splits arrivals uniformly at random across `cfg.schedulers` independent
/// schedulers, each planning against an equal share of the ZIC profile.
/// The trajectory is the summed load; delay costs add up across schedulers.
inline RunResult run_distributed(const ScenarioConfig& cfg, const std::vector<Counts>& arrivals, unsigned threads = 0)
{
    cfg.validate();
    const int m = cfg.schedulers;
    const auto market = scenario_market(cfg);
    if (m == 1) {
        auto res = detail::run_single_scheduler(cfg, market, arrivals, 1.0);
        res.metrics.strategy = to_string(Strategy::distributed);
        return res;
    }

    // Assignment stream is separate from the per-queue arrival streams.
    Rng rng(cfg.seed, 0x10000 + cfg.queues());
    std::vector<std::vector<Counts>> parts(static_cast<std::size_t>(m),
                                           std::vector<Counts>(arrivals.size(), Counts(cfg.queues(), 0)));
    for (std::size_t l = 0; l < arrivals.size(); ++l)
        for (std::size_t q = 0; q < cfg.queues(); ++q)
            for (Count i = 0; i < arrivals[l][q]; ++i) ++parts[rng.below(static_cast<std::uint64_t>(m))][l][q];

    const auto share = market.share(m);
    std::vector<RunResult> sub(static_cast<std::size_t>(m));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(m));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < m; i = next++) {
            try {
                sub[static_cast<std::size_t>(i)] =
                    detail::run_single_scheduler(cfg, share, parts[static_cast<std::size_t>(i)], 1.0 / m);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(m));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    // The area still settles with the market as one retailer: deviations are
    // charged on the summed load against the full ZIC profile.
    const auto delay = cfg.delay_prices();
    const auto epochs = cfg.run_epochs();
    RunResult res;
    Count served = 0;
    double delay_sum = 0.0;
    for (const auto& s : sub) {
        served += s.metrics.served;
        delay_sum += s.metrics.mean_delay * static_cast<double>(s.metrics.served);
    }
    for (std::int64_t l = 0; l < epochs; ++l) {
        const auto i = static_cast<std::size_t>(l);
        double load = 0.0;
        Counts backlog(cfg.queues(), 0);
        for (const auto& s : sub) {
            load += s.trajectory.rows[i].ds_load;
            for (std::size_t q = 0; q < backlog.size(); ++q) backlog[q] += s.trajectory.rows[i].backlog[q];
        }
        res.trajectory.rows.push_back(make_row(l, market, load, std::move(backlog), delay, res.trajectory.total_cost()));
    }
    // Cutoff messages of the parts refer to different ledgers and are not merged.
    res.metrics = detail::summarize_run(res.trajectory, cfg, market, served, delay_sum);
    res.metrics.strategy = to_string(Strategy::distributed);
    res.metrics.schedulers = m;
    return res;
}

inline RunResult run_distributed(const ScenarioConfig& cfg) { return run_distributed(cfg, scenario_arrivals(cfg)); }

/// Broadcast price per epoch for the price-signal baseline.
inline std::vector<double> price_signal(const ScenarioConfig& cfg, const MarketProfile& market)
{
    const auto n = static_cast<std::size_t>(cfg.run_epochs());
    const auto& ps = cfg.price_signal;
    std::vector<double> p(n);
    if (ps.shape == PriceShape::linear) {
        double c0 = ps.offset;
        if (c0 < 0.0) {
            double pmax = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < n; ++l) pmax = std::max(pmax, market.zic(static_cast<std::int64_t>(l)));
            c0 = ps.slope * pmax + 1.0;
        }
        for (std::size_t l = 0; l < n; ++l) p[l] = c0 - ps.slope * market.zic(static_cast<std::int64_t>(l));
    } else {
        const double c0 = ps.offset < 0.0 ? 1.0 : ps.offset;
        for (std::size_t l = 0; l < n; ++l)
            p[l] = c0 / (1.0 + std::exp(ps.slope * (market.zic(static_cast<std::int64_t>(l)) - ps.midpoint)));
    }
    return p;
}

/// Each appliance independently picks the start in [arrival, arrival + deadline]
/// minimizing sum price * pulse; ties go to the earliest start.
inline RunResult run_price_signal(const ScenarioConfig& cfg, const std::vector<Counts>& arrivals,
                                  const std::vector<double>& price)
{
    cfg.validate();
    const auto market = scenario_market(cfg);
    const auto epochs = cfg.run_epochs();
    if (static_cast<std::int64_t>(price.size()) < epochs) throw ConfigError("price signal shorter than the run");
    const int off = pulse_offset(cfg.alignment);
    std::vector<Counts> starts(static_cast<std::size_t>(epochs), Counts(cfg.queues(), 0));
    for (std::size_t q = 0; q < cfg.queues(); ++q) {
        const auto g = cfg.codebook[q].pulse();
        const auto u = static_cast<std::int64_t>(g.size());
        // Bill of starting at each epoch, computed once per queue.
        std::vector<double> bill(static_cast<std::size_t>(epochs), std::numeric_limits<double>::infinity());
        for (std::int64_t s = 0; s + off + u <= epochs; ++s) {
            double b = 0.0;
            for (std::int64_t j = 0; j < u; ++j) b += price[static_cast<std::size_t>(s + off + j)] * g[static_cast<std::size_t>(j)];
            bill[static_cast<std::size_t>(s)] = b;
        }
        for (std::size_t l = 0; l < arrivals.size(); ++l) {
            if (arrivals[l][q] == 0) continue;
            const auto a = static_cast<std::int64_t>(l);
            std::int64_t best = a;
            for (std::int64_t s = a + 1; s <= std::min<std::int64_t>(a + cfg.deadline, epochs - 1); ++s)
                if (bill[static_cast<std::size_t>(s)] < bill[static_cast<std::size_t>(best)]) best = s;
            starts[static_cast<std::size_t>(best)][q] += arrivals[l][q];
        }
    }
    QueueLedger ledger(cfg.queues());
    auto tr = detail::schedule_trajectory(cfg, market, arrivals, starts, ledger);
    RunResult res;
    const auto last = epochs - 1;
    res.metrics = detail::summarize_run(tr, cfg, market, detail::total_served(ledger, last), detail::ledger_delay_sum(ledger, last + 1));
    res.metrics.strategy = to_string(Strategy::price);
    res.trajectory = std::move(tr);
    return res;
}

inline RunResult run_price_signal(const ScenarioConfig& cfg)
{
    return run_price_signal(cfg, scenario_arrivals(cfg), price_signal(cfg, scenario_market(cfg)));
}

/// Dispatches on `cfg.strategy`.
inline RunResult run_strategy(const ScenarioConfig& cfg, const std::vector<Counts>& arrivals)
{
    switch (cfg.strategy) {
    case Strategy::uncontrolled: return run_uncontrolled(cfg, arrivals);
    case Strategy::ddls: return run_ddls(cfg, arrivals);
    case Strategy::distributed: return run_distributed(cfg, arrivals);
    case Strategy::price: return run_price_signal(cfg, arrivals, price_signal(cfg, scenario_market(cfg)));
    }
    throw ConfigError("unknown strategy");
}

inline RunResult run_strategy(const ScenarioConfig& cfg) { return run_strategy(cfg, scenario_arrivals(cfg)); }

// ---------------------------------------------------------------------------
// Reporting

inline void write_metrics_header(std::ostream& os)
{
    os << "strategy,seed,schedulers,total_cost,deviation_cost,delay_cost,mean_delay_epochs,peak_load_kw,served,energy_kwh\n";
}

inline void write_metrics_row(std::ostream& os, const RunMetrics& m)
{
    os << m.strategy << ',' << m.seed << ',' << m.schedulers << ',' << csv::num(m.total_cost) << ','
       << csv::num(m.deviation_cost) << ',' << csv::num(m.delay_cost) << ',' << csv::num(m.mean_delay) << ','
       << csv::num(m.peak_load) << ',' << m.served << ',' << csv::num(m.energy_kwh) << '\n';
}

struct ComparisonRow {
    std::string strategy;
    int schedulers = 1;
    std::size_t runs = 0;
    double mean_cost = 0.0;
    /// Relative reduction in operational costs, (cost_base - cost) / cost_base.
    double savings = 0.0;
    double mean_peak = 0.0;
    double peak_ratio = 0.0;
    double mean_delay = 0.0;
};

/// Groups runs by (strategy, schedulers) in first-seen order and reports
/// each group against `baseline` (matched by strategy name).
inline std::vector<ComparisonRow> compare(std::span<const RunMetrics> runs, const std::string& baseline = "uncontrolled")
{
    std::vector<ComparisonRow> rows;
    for (const auto& m : runs) {
        auto it = std::find_if(rows.begin(), rows.end(),
                               [&](const ComparisonRow& r) { return r.strategy == m.strategy && r.schedulers == m.schedulers; });
        if (it == rows.end()) {
            rows.push_back(ComparisonRow{m.strategy, m.schedulers});
            it = rows.end() - 1;
        }
        ++it->runs;
        it->mean_cost += m.total_cost;
        it->mean_peak += m.peak_load;
        it->mean_delay += m.mean_delay;
    }
    for (auto& r : rows) {
        const auto n = static_cast<double>(r.runs);
        r.mean_cost /= n;
        r.mean_peak /= n;
        r.mean_delay /= n;
    }
    const auto base = std::find_if(rows.begin(), rows.end(), [&](const ComparisonRow& r) { return r.strategy == baseline; });
    const auto ref = base != rows.end() ? *base : (rows.empty() ? ComparisonRow{} : rows.front());
    for (auto& r : rows) {
        r.savings = ref.mean_cost > 0.0 ? (ref.mean_cost - r.mean_cost) / ref.mean_cost : 0.0;
        r.peak_ratio = ref.mean_peak > 0.0 ? r.mean_peak / ref.mean_peak : 0.0;
    }
    return rows;
}

inline void write_comparison_csv(std::ostream& os, std::span<const ComparisonRow> rows)
{
    os << "strategy,schedulers,runs,mean_total_cost,relative_cost_reduction,mean_peak_kw,peak_ratio,mean_delay_epochs\n";
    for (const auto& r : rows)
        os << r.strategy << ',' << r.schedulers << ',' << r.runs << ',' << csv::num(r.mean_cost) << ','
           << csv::num(r.savings) << ',' << csv::num(r.mean_peak) << ',' << csv::num(r.peak_ratio) << ','
           << csv::num(r.mean_delay) << '\n';
}

} // namespace ddls
