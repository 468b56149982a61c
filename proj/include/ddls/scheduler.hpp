#pragma once

// Receding-horizon load scheduler. Each epoch the scheduler builds the
// relaxed scheduling LP over the lookahead window, solves it, rounds and
// commits the first-epoch departures, and folds their pulses into the
// committed load.

#include "ddls/core.hpp"
#include "ddls/csv.hpp"
#include "ddls/feedback.hpp"
#include "ddls/lp.hpp"
#include "ddls/market.hpp"
#include "ddls/queues.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ddls {

/// Expected arrivals per epoch and queue, indexed [q][epoch]; zero outside the table.
struct ArrivalForecast {
    std::vector<std::vector<double>> rate;

    double at(std::size_t q, std::int64_t epoch) const noexcept
    {
        if (q >= rate.size() || epoch < 0 || static_cast<std::size_t>(epoch) >= rate[q].size()) return 0.0;
        return rate[q][static_cast<std::size_t>(epoch)];
    }

    static ArrivalForecast constant(std::size_t queues, double per_epoch, std::int64_t epochs)
    {
        return {std::vector<std::vector<double>>(queues, std::vector<double>(static_cast<std::size_t>(epochs), per_epoch))};
    }
};

/// Partition of the lookahead: expected arrivals are used through
/// `imperfect`; later epochs assume no new arrivals. Negative means "whole window".
struct KnowledgeHorizons {
    int full = -1;
    int imperfect = -1;
};

/// Cumulative arrival matrix A (Q x (T+1)) for epochs l0..l0+T: observed counts
/// at l0, then expected increments.
inline std::vector<std::vector<double>> certainty_equivalent_arrivals(const QueueLedger& ledger,
                                                                      const ArrivalForecast& forecast, std::int64_t l0,
                                                                      int lookahead, KnowledgeHorizons k = {})
{
    if (lookahead < 0) throw ConfigError("lookahead must be nonnegative");
    const int t2 = k.imperfect < 0 ? lookahead : std::min(k.imperfect, lookahead);
    const int t1 = k.full < 0 ? t2 : std::min(k.full, t2);
    (void)t1; // expectations are used in both the full and imperfect intervals
    const auto w = static_cast<std::size_t>(lookahead) + 1;
    std::vector<std::vector<double>> a(ledger.queues(), std::vector<double>(w));
    for (std::size_t q = 0; q < ledger.queues(); ++q) {
        a[q][0] = static_cast<double>(ledger.arrivals(q, l0));
        for (std::size_t t = 1; t < w; ++t)
            a[q][t] = a[q][t - 1] + (static_cast<int>(t) <= t2 ? forecast.at(q, l0 + static_cast<std::int64_t>(t)) : 0.0);
    }
    return a;
}

/// Load operator over a (T+1)-epoch window: rows are epochs, columns follow
/// vec(D^T) (queue-major). Gamma * vec(D^T) is the load of the cumulative
/// departures D with D(-1) = 0.
inline lp::DenseMatrix build_gamma(const Codebook& codebook, int lookahead,
                                   PulseAlignment align = PulseAlignment::at_departure)
{
    if (lookahead < 0) throw ConfigError("lookahead must be nonnegative");
    for (const auto& c : codebook)
        if (c.duration() > lookahead)
            throw ConfigError("pulse of code " + std::to_string(c.id()) + " is longer than the lookahead");
    const auto w = static_cast<std::size_t>(lookahead) + 1;
    const int off = pulse_offset(align);
    lp::DenseMatrix gamma(w, codebook.size() * w);
    for (std::size_t q = 0; q < codebook.size(); ++q) {
        // Toeplitz block G_q[t][k] = g_q(t - k - off); column k of G_q J^T is G_q[:,k] - G_q[:,k+1].
        auto g = [&](std::size_t t, std::size_t k) {
            return t < k ? 0.0 : codebook[q].sample(static_cast<std::int64_t>(t - k) - off);
        };
        for (std::size_t t = 0; t < w; ++t)
            for (std::size_t k = 0; k < w; ++k)
                gamma(t, q * w + k) = g(t, k) - (k + 1 < w ? g(t, k + 1) : 0.0);
    }
    return gamma;
}

struct CommittedDecision {
    std::int64_t epoch = 0;
    Counts increments;
};

/// Everything the optimizer needs at epoch l0.
struct HorizonInputs {
    std::int64_t epoch = 0;
    int lookahead = 0;
    Codebook codebook;
    /// ZIC power P(l0..l0+T) before subtracting committed D-loads.
    std::vector<double> zic;
    std::vector<double> price_up;
    std::vector<double> price_dn;
    DelayPrices delay;
    /// Cumulative arrivals A, Q x (T+1).
    std::vector<std::vector<double>> arrivals;
    /// d_q(l0 - 1).
    Counts departed_before;
    /// Switch-on decisions of the last min(elapsed, S) epochs.
    std::vector<CommittedDecision> history;
    /// Optional per-epoch floor on cumulative departures (deadlines), Q x (T+1).
    std::vector<std::vector<double>> min_departures;
    PulseAlignment alignment = PulseAlignment::at_departure;
    int max_pulse = default_max_pulse_epochs;

    std::size_t window() const noexcept { return static_cast<std::size_t>(lookahead) + 1; }

    void validate() const
    {
        validate_codebook(codebook, max_pulse);
        const auto q = codebook.size();
        const auto w = window();
        if (lookahead < max_duration(codebook)) throw ConfigError("lookahead shorter than the longest pulse");
        if (zic.size() != w || price_up.size() != w || price_dn.size() != w)
            throw ConfigError("ZIC and price vectors must cover the T+1 epoch window");
        for (std::size_t t = 0; t < w; ++t)
            if (!(price_up[t] >= 0.0) || !(price_dn[t] >= 0.0))
                throw ConfigError("balancing prices must be nonnegative");
        delay.validate(q);
        if (arrivals.size() != q || departed_before.size() != q) throw ConfigError("arrival matrix must have Q rows");
        for (const auto& row : arrivals)
            if (row.size() != w) throw ConfigError("arrival matrix must have T+1 columns");
        if (!min_departures.empty()) {
            if (min_departures.size() != q) throw ConfigError("departure floors must have Q rows");
            for (const auto& row : min_departures)
                if (row.size() != w) throw ConfigError("departure floors must have T+1 columns");
        }
        if (static_cast<int>(history.size()) > max_pulse) throw ConfigError("history longer than the maximum pulse");
        for (const auto& h : history) {
            if (h.epoch >= epoch || h.epoch < epoch - max_pulse)
                throw ConfigError("history entry outside the last S epochs");
            if (h.increments.size() != q) throw ConfigError("history entry has wrong queue count");
        }
    }
};

/// The relaxed program plus its variable layout: vec(D^T), then P_up, then P_dn.
struct ScheduleProgram {
    lp::LinearProgram lp;
    std::size_t queues = 0;
    std::size_t window = 0;
    /// Effective floor on D after monotone tightening, Q x (T+1).
    std::vector<std::vector<double>> lower;
    /// Load of already-committed appliances over the window.
    std::vector<double> committed_load;

    std::size_t d_index(std::size_t q, std::size_t t) const noexcept { return q * window + t; }
    std::size_t up_index(std::size_t t) const noexcept { return queues * window + t; }
    std::size_t dn_index(std::size_t t) const noexcept { return queues * window + window + t; }
};

/// Relaxed scheduling LP:
///   min  sum_t C_up P_up + C_dn P_dn + sum_q C_I,q (A_q(t) - D_q(t))
///   s.t. D_q(t-1) <= D_q(t) <= A_q(t), D_q(-1) = departed_before
///        D_q(T - u_q) = A_q(T - u_q)                (finish inside the window)
///        L^S(t) - P_up(t) + P_dn(t) = P(t) - committed(t)
///        P_up, P_dn >= 0
/// The balance row follows P_up - P_dn + P = L^S, so P_up is the purchase
/// above the supply curve.
inline ScheduleProgram build_program(const HorizonInputs& in)
{
    in.validate();
    const std::size_t nq = in.codebook.size();
    const std::size_t w = in.window();
    const int off = pulse_offset(in.alignment);

    ScheduleProgram sp;
    sp.queues = nq;
    sp.window = w;
    sp.lp = lp::LinearProgram(nq * w + 2 * w);

    sp.committed_load.assign(w, 0.0);
    for (const auto& h : in.history) {
        for (std::size_t q = 0; q < nq; ++q) {
            if (h.increments[q] == 0) continue;
            const auto g = in.codebook[q].pulse();
            for (std::size_t j = 0; j < g.size(); ++j) {
                const std::int64_t t = h.epoch + off + static_cast<std::int64_t>(j) - in.epoch;
                if (t >= 0 && t < static_cast<std::int64_t>(w))
                    sp.committed_load[static_cast<std::size_t>(t)] += static_cast<double>(h.increments[q]) * g[j];
            }
        }
    }

    // Bounds on D.
    sp.lower.assign(nq, std::vector<double>(w, 0.0));
    for (std::size_t q = 0; q < nq; ++q) {
        const std::size_t tc = static_cast<std::size_t>(in.lookahead - in.codebook[q].duration());
        double floor = static_cast<double>(in.departed_before[q]);
        for (std::size_t t = 0; t < w; ++t) {
            double lo = floor;
            if (!in.min_departures.empty()) lo = std::max(lo, in.min_departures[q][t]);
            if (t == tc) lo = std::max(lo, in.arrivals[q][t]);
            const double hi = in.arrivals[q][t];
            if (lo > hi + 1e-9)
                throw SolverError("infeasible schedule at epoch " + std::to_string(in.epoch + static_cast<std::int64_t>(t)) +
                                  ", queue " + std::to_string(q + 1) + ": departures must reach " + std::to_string(lo) +
                                  " but only " + std::to_string(hi) + " have arrived");
            lo = std::min(lo, hi);
            floor = lo;
            sp.lower[q][t] = lo;
            const auto j = sp.d_index(q, t);
            sp.lp.lower[j] = lo;
            sp.lp.upper[j] = hi;
        }
    }

    // Objective.
    double constant = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
        sp.lp.objective[sp.up_index(t)] = in.price_up[t];
        sp.lp.objective[sp.dn_index(t)] = in.price_dn[t];
        for (std::size_t q = 0; q < nq; ++q) {
            const double ci = in.delay.at(q, in.epoch + static_cast<std::int64_t>(t));
            sp.lp.objective[sp.d_index(q, t)] = -ci;
            constant += ci * in.arrivals[q][t];
        }
    }
    sp.lp.objective_constant = constant;

    // Monotone departures.
    for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t t = 1; t < w; ++t) {
            const std::size_t idx[] = {sp.d_index(q, t), sp.d_index(q, t - 1)};
            const double co[] = {1.0, -1.0};
            sp.lp.add_ge(idx, co, 0.0);
        }
    }

    // Load balance.
    const auto gamma = build_gamma(in.codebook, in.lookahead, in.alignment);
    std::vector<std::size_t> idx;
    std::vector<double> co;
    for (std::size_t t = 0; t < w; ++t) {
        idx.clear();
        co.clear();
        double rhs = in.zic[t] - sp.committed_load[t];
        for (std::size_t q = 0; q < nq; ++q) {
            for (std::size_t k = 0; k < w; ++k) {
                const double a = gamma(t, q * w + k);
                if (a == 0.0) continue;
                idx.push_back(sp.d_index(q, k));
                co.push_back(a);
            }
            // The first increment is D_q(0) - departed_before.
            rhs += in.codebook[q].sample(static_cast<std::int64_t>(t) - off) * static_cast<double>(in.departed_before[q]);
        }
        idx.push_back(sp.up_index(t));
        co.push_back(-1.0);
        idx.push_back(sp.dn_index(t));
        co.push_back(1.0);
        sp.lp.add_eq(idx, co, rhs);
    }
    return sp;
}

struct SchedulePlan {
    /// Cumulative departures D, Q x (T+1).
    std::vector<std::vector<double>> departures;
    std::vector<double> p_up;
    std::vector<double> p_dn;
    double objective = 0.0;
};

/// Reads the plan out of an optimal solution; P_up/P_dn are netted so at
/// most one is positive per epoch.
inline SchedulePlan extract_plan(const ScheduleProgram& sp, const lp::LpSolution& sol)
{
    if (!sol.optimal()) throw SolverError(std::string("cannot extract a plan from a ") + lp::to_string(sol.status) + " solution");
    SchedulePlan plan;
    plan.departures.assign(sp.queues, std::vector<double>(sp.window));
    for (std::size_t q = 0; q < sp.queues; ++q)
        for (std::size_t t = 0; t < sp.window; ++t) plan.departures[q][t] = sol.values[sp.d_index(q, t)];
    plan.p_up.resize(sp.window);
    plan.p_dn.resize(sp.window);
    for (std::size_t t = 0; t < sp.window; ++t) {
        const double net = sol.values[sp.up_index(t)] - sol.values[sp.dn_index(t)];
        plan.p_up[t] = std::max(net, 0.0);
        plan.p_dn[t] = std::max(-net, 0.0);
    }
    plan.objective = sol.objective;
    return plan;
}

/// Integral cumulative departures for epoch l0: round half to even, then clamp
/// to [floor, a_q(l0)] where the floor covers d_q(l0-1) and any deadline.
inline Counts round_and_commit(const SchedulePlan& plan, const HorizonInputs& in)
{
    const std::size_t nq = in.codebook.size();
    if (plan.departures.size() != nq) throw ConfigError("plan does not match the queue count");
    Counts out(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        double lo = static_cast<double>(in.departed_before[q]);
        if (!in.min_departures.empty()) lo = std::max(lo, std::ceil(in.min_departures[q][0] - 1e-9));
        const double hi = std::floor(in.arrivals[q][0] + 1e-9);
        const double r = std::nearbyint(plan.departures[q][0]);
        out[q] = static_cast<Count>(std::clamp(r, std::min(lo, hi), hi));
    }
    return out;
}

/// Limits the total number of switch-ons in one epoch. Admissions are
/// handed out one at a time across queues, starting from queue 1.
inline Counts apply_capacity_cap(std::span<const Count> increments, std::optional<Count> cap)
{
    Counts in(increments.begin(), increments.end());
    if (!cap) return in;
    if (*cap < 0) throw ConfigError("capacity cap must be nonnegative");
    Count total = 0;
    for (Count c : in) total += c;
    if (total <= *cap) return in;
    Counts out(in.size(), 0);
    Count left = *cap;
    while (left > 0) {
        for (std::size_t q = 0; q < in.size() && left > 0; ++q) {
            if (out[q] < in[q]) {
                ++out[q];
                --left;
            }
        }
    }
    return out;
}

struct SchedulerConfig {
    Codebook codebook;
    int lookahead = 32;
    KnowledgeHorizons knowledge;
    DelayPrices delay;
    /// Maximum wait in epochs between arrival and switch-on.
    std::optional<int> deadline;
    /// Maximum switch-ons per epoch (distribution capacity).
    std::optional<Count> capacity_cap;
    PulseAlignment alignment = PulseAlignment::at_departure;
    int max_pulse = default_max_pulse_epochs;
    lp::SimplexOptions simplex;
};

struct StepResult {
    std::int64_t epoch = 0;
    /// Switch-ons committed at this epoch, per queue.
    Counts increments;
    SchedulePlan plan;
    std::size_t lp_iterations = 0;
    /// The plan's first-epoch stage cost (relaxed values).
    double planned_stage_cost = 0.0;
    ThresholdMessage feedback;
};

class Scheduler {
public:
    Scheduler(SchedulerConfig cfg, MarketProfile market, ArrivalForecast forecast)
        : cfg_(std::move(cfg)), market_(std::move(market)), forecast_(std::move(forecast)),
          ledger_(cfg_.codebook.size())
    {
        validate_codebook(cfg_.codebook, cfg_.max_pulse);
        cfg_.delay.validate(cfg_.codebook.size());
        if (cfg_.lookahead < max_duration(cfg_.codebook)) throw ConfigError("lookahead shorter than the longest pulse");
        if (cfg_.deadline && *cfg_.deadline < 0) throw ConfigError("deadline must be nonnegative");
    }

    const SchedulerConfig& config() const noexcept { return cfg_; }
    const MarketProfile& market() const noexcept { return market_; }
    const QueueLedger& ledger() const noexcept { return ledger_; }
    /// Load of all committed appliances.
    const LoadProfile& load() const noexcept { return load_; }
    std::int64_t next_epoch() const noexcept { return next_; }

    /// Optimizer inputs at the current epoch (arrivals at that epoch must already be recorded).
    HorizonInputs horizon_inputs() const
    {
        const std::int64_t l0 = next_;
        HorizonInputs in;
        in.epoch = l0;
        in.lookahead = cfg_.lookahead;
        in.codebook = cfg_.codebook;
        in.delay = cfg_.delay;
        in.alignment = cfg_.alignment;
        in.max_pulse = cfg_.max_pulse;
        const auto w = in.window();
        in.zic.resize(w);
        in.price_up.resize(w);
        in.price_dn.resize(w);
        for (std::size_t t = 0; t < w; ++t) {
            const auto l = l0 + static_cast<std::int64_t>(t);
            in.zic[t] = market_.zic(l);
            in.price_up[t] = market_.price_up(l);
            in.price_dn[t] = market_.price_dn(l);
        }
        in.arrivals = certainty_equivalent_arrivals(ledger_, forecast_, l0, cfg_.lookahead, cfg_.knowledge);
        in.departed_before.resize(cfg_.codebook.size());
        for (std::size_t q = 0; q < cfg_.codebook.size(); ++q) in.departed_before[q] = ledger_.departures(q, l0 - 1);
        in.history.assign(history_.begin(), history_.end());
        if (cfg_.deadline) {
            in.min_departures.assign(cfg_.codebook.size(), std::vector<double>(w, 0.0));
            for (std::size_t q = 0; q < cfg_.codebook.size(); ++q) {
                for (std::size_t t = 0; t < w; ++t) {
                    const auto e = l0 + static_cast<std::int64_t>(t) - *cfg_.deadline;
                    if (e < 0) continue;
                    in.min_departures[q][t] = e <= l0 ? static_cast<double>(ledger_.arrivals(q, e))
                                                      : in.arrivals[q][static_cast<std::size_t>(e - l0)];
                }
            }
        }
        return in;
    }

    /// Records this epoch's arrivals, plans over the lookahead, and commits the first epoch.
    StepResult step(std::span<const Count> arrivals)
    {
        const std::int64_t l0 = next_;
        ledger_.record_arrivals(l0, arrivals);
        const auto in = horizon_inputs();
        const auto program = build_program(in);
        const auto sol = lp::solve(program.lp, cfg_.simplex);
        if (!sol.optimal())
            throw SolverError("epoch " + std::to_string(l0) + ": scheduling LP " + lp::to_string(sol.status));

        StepResult res;
        res.epoch = l0;
        res.plan = extract_plan(program, sol);
        res.lp_iterations = sol.iterations;
        {
            double s = in.price_up[0] * res.plan.p_up[0] + in.price_dn[0] * res.plan.p_dn[0];
            for (std::size_t q = 0; q < in.codebook.size(); ++q)
                s += in.delay.at(q, l0) * (in.arrivals[q][0] - res.plan.departures[q][0]);
            res.planned_stage_cost = s;
        }

        const Counts cumulative = round_and_commit(res.plan, in);
        Counts inc(cumulative.size());
        for (std::size_t q = 0; q < inc.size(); ++q) inc[q] = cumulative[q] - in.departed_before[q];
        res.increments = apply_capacity_cap(inc, cfg_.capacity_cap);
        commit(l0, res.increments);

        Counts target(inc.size());
        for (std::size_t q = 0; q < inc.size(); ++q) target[q] = ledger_.departures(q, l0);
        res.feedback = encode_thresholds(ledger_, l0, target);
        return res;
    }

private:
    void commit(std::int64_t l0, const Counts& inc)
    {
        ledger_.apply_departures(l0, inc);
        load_ = fold_committed(std::move(load_), inc, l0, cfg_.codebook, cfg_.alignment);
        history_.push_back(CommittedDecision{l0, inc});
        while (static_cast<int>(history_.size()) > cfg_.max_pulse || (!history_.empty() && history_.front().epoch < l0 + 1 - cfg_.max_pulse))
            history_.pop_front();
        ++next_;
    }

    SchedulerConfig cfg_;
    MarketProfile market_;
    ArrivalForecast forecast_;
    QueueLedger ledger_;
    LoadProfile load_{0, {}};
    std::deque<CommittedDecision> history_;
    std::int64_t next_ = 0;
};

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryRow {
    std::int64_t epoch = 0;
    double base_load = 0.0;
    double ds_load = 0.0;
    double zic = 0.0;
    double p_up = 0.0;
    double p_dn = 0.0;
    Counts backlog;
    double stage_cost = 0.0;
    double cumulative_cost = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryRow> rows;
    std::vector<ThresholdMessage> feedback;
    /// Relaxed first-epoch stage cost per step (scheduled runs only).
    std::vector<double> planned_stage_cost;

    double total_cost() const noexcept { return rows.empty() ? 0.0 : rows.back().cumulative_cost; }
};

/// Fills a trajectory row for `epoch` from realized load and backlog.
inline TrajectoryRow make_row(std::int64_t epoch, const MarketProfile& market, double ds_load, Counts backlog,
                              const DelayPrices& delay, double cumulative_before)
{
    TrajectoryRow r;
    r.epoch = epoch;
    r.base_load = market.base_load(epoch);
    r.ds_load = ds_load;
    r.zic = market.zic(epoch);
    const auto dev = deviation(ds_load, r.zic);
    r.p_up = dev.up;
    r.p_dn = dev.dn;
    std::vector<double> ci(backlog.size());
    for (std::size_t q = 0; q < ci.size(); ++q) ci[q] = delay.at(q, epoch);
    r.stage_cost = stage_cost(ds_load, r.zic, market.price_up(epoch), market.price_dn(epoch), backlog, ci);
    r.cumulative_cost = cumulative_before + r.stage_cost;
    r.backlog = std::move(backlog);
    return r;
}

/// Drives `sched` for `epochs` epochs. `arrivals[l]` holds per-queue arrival
/// counts at epoch l; epochs past the table have none.
inline Trajectory run_horizon(Scheduler& sched, const std::vector<Counts>& arrivals, std::int64_t epochs)
{
    const std::size_t nq = sched.config().codebook.size();
    const Counts none(nq, 0);
    Trajectory tr;
    for (std::int64_t i = 0; i < epochs; ++i) {
        const std::int64_t l = sched.next_epoch();
        const Counts& a = static_cast<std::size_t>(l) < arrivals.size() ? arrivals[static_cast<std::size_t>(l)] : none;
        auto res = sched.step(a);
        Counts backlog(nq);
        for (std::size_t q = 0; q < nq; ++q) backlog[q] = sched.ledger().backlog(q, l);
        tr.rows.push_back(make_row(l, sched.market(), sched.load().at(l), std::move(backlog), sched.config().delay,
                                   tr.total_cost()));
        tr.feedback.push_back(std::move(res.feedback));
        tr.planned_stage_cost.push_back(res.planned_stage_cost);
    }
    return tr;
}

/// CSV columns: epoch,L_N,L_S,P,P_up,P_dn,backlog_1..backlog_Q,stage_cost,cumulative_cost.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, std::size_t queues)
{
    os << "epoch,L_N,L_S,P,P_up,P_dn";
    for (std::size_t q = 0; q < queues; ++q) os << ",backlog_" << q + 1;
    os << ",stage_cost,cumulative_cost\n";
    for (const auto& r : tr.rows) {
        os << r.epoch << ',' << csv::num(r.base_load) << ',' << csv::num(r.ds_load) << ',' << csv::num(r.zic) << ','
           << csv::num(r.p_up) << ',' << csv::num(r.p_dn);
        for (std::size_t q = 0; q < queues; ++q) os << ',' << (q < r.backlog.size() ? r.backlog[q] : 0);
        os << ',' << csv::num(r.stage_cost) << ',' << csv::num(r.cumulative_cost) << '\n';
    }
}

} // namespace ddls
