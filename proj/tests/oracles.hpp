#pragma once

// Slow, independent reference implementations used to check the library.

#include "ddls/ddls.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

using ddls::Codebook;
using ddls::Count;
using ddls::Counts;

/// Explicit sample vector of a (rate, duration) request, padded to `len`.
inline std::vector<double> request_samples(double rate, double dur, std::size_t len)
{
    std::vector<double> g(len, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
        const double left = dur - static_cast<double>(k);
        g[k] = left >= 1.0 ? rate : (left > 0.0 ? rate * left : 0.0);
    }
    return g;
}

inline double explicit_pulse_distance(const ddls::RawRequest& r, const ddls::ChargeCode& c)
{
    const auto len = std::max<std::size_t>(static_cast<std::size_t>(std::ceil(r.params[1])), c.pulse().size());
    const auto g = request_samples(r.params[0], r.params[1], len);
    double s = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
        const double d = g[k] - c.sample(static_cast<std::int64_t>(k));
        s += d * d;
    }
    return s;
}

/// Nearest code by scanning explicit vectors; ties keep the first (lowest id).
inline int nearest_code(const ddls::RawRequest& r, const Codebook& book)
{
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < book.size(); ++q) {
        const double d = explicit_pulse_distance(r, book[q]);
        if (d < bd - 1e-12) {
            bd = d;
            best = static_cast<int>(q) + 1;
        }
    }
    return best;
}

struct Switch {
    std::int64_t epoch;
    int queue; // 0-based
};

/// Load by summing every appliance's pulse individually.
inline std::vector<double> per_appliance_load(const std::vector<Switch>& on, const Codebook& book, std::int64_t horizon,
                                              ddls::PulseAlignment align)
{
    std::vector<double> load(static_cast<std::size_t>(horizon), 0.0);
    const int off = ddls::pulse_offset(align);
    for (const auto& s : on) {
        const auto& c = book[static_cast<std::size_t>(s.queue)];
        for (int j = 0; j < c.duration(); ++j) {
            const auto l = s.epoch + off + j;
            if (l >= 0 && l < horizon) load[static_cast<std::size_t>(l)] += c.sample(j);
        }
    }
    return load;
}

/// DCI by tracking individual appliances through FIFO queues.
inline double fifo_dci(const ddls::QueueLedger& ledger, std::int64_t from, std::int64_t horizon,
                       const ddls::DelayPrices& prices, std::int64_t last_epoch)
{
    double total = 0.0;
    for (std::size_t q = 0; q < ledger.queues(); ++q) {
        std::deque<std::int64_t> waiting;
        struct Stay {
            std::int64_t arrive, leave; // leave exclusive
        };
        std::vector<Stay> stays;
        for (std::int64_t l = 0; l <= last_epoch; ++l) {
            const Count new_arrivals = ledger.arrivals(q, l) - ledger.arrivals(q, l - 1);
            for (Count i = 0; i < new_arrivals; ++i) waiting.push_back(l);
            const Count leaving = ledger.departures(q, l) - ledger.departures(q, l - 1);
            for (Count i = 0; i < leaving; ++i) {
                stays.push_back({waiting.front(), l});
                waiting.pop_front();
            }
        }
        for (auto a : waiting) stays.push_back({a, std::numeric_limits<std::int64_t>::max()});
        for (const auto& s : stays)
            for (std::int64_t l = std::max(s.arrive, from); l <= from + horizon && l < s.leave; ++l) total += prices.at(q, l);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Small LP by vertex enumeration (bounded feasible region required).

struct LpOracleResult {
    bool feasible = false;
    double objective = 0.0;
    std::vector<double> x;
};

inline std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
        if (std::fabs(a[p][c]) < 1e-10) return std::nullopt;
        std::swap(a[p], a[c]);
        std::swap(b[p], b[c]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            if (f == 0.0) continue;
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

inline LpOracleResult enumerate_vertices(const ddls::lp::LinearProgram& p)
{
    const std::size_t n = p.variables();
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (std::size_t i = 0; i < p.eq.rows(); ++i) {
        rows.emplace_back(p.eq.row(i).begin(), p.eq.row(i).end());
        rhs.push_back(p.eq_rhs[i]);
    }
    const std::size_t n_eq = rows.size();
    for (std::size_t i = 0; i < p.ge.rows(); ++i) {
        rows.emplace_back(p.ge.row(i).begin(), p.ge.row(i).end());
        rhs.push_back(p.ge_rhs[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        if (std::isfinite(p.lower[j])) {
            rows.push_back(e);
            rhs.push_back(p.lower[j]);
        }
        if (std::isfinite(p.upper[j])) {
            rows.push_back(e);
            rhs.push_back(p.upper[j]);
        }
    }
    auto feasible = [&](const std::vector<double>& x) {
        for (std::size_t i = 0; i < p.eq.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += p.eq(i, j) * x[j];
            if (std::fabs(s - p.eq_rhs[i]) > 1e-6) return false;
        }
        for (std::size_t i = 0; i < p.ge.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += p.ge(i, j) * x[j];
            if (s < p.ge_rhs[i] - 1e-6) return false;
        }
        for (std::size_t j = 0; j < n; ++j)
            if (x[j] < p.lower[j] - 1e-6 || x[j] > p.upper[j] + 1e-6) return false;
        return true;
    };

    LpOracleResult best;
    best.objective = std::numeric_limits<double>::infinity();
    // Every vertex makes n rows tight, including all equality rows.
    std::vector<std::size_t> pick;
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (pick.size() == n) {
            for (std::size_t e = 0; e < n_eq; ++e)
                if (std::find(pick.begin(), pick.end(), e) == pick.end()) return;
            std::vector<std::vector<double>> a;
            std::vector<double> b;
            for (auto i : pick) {
                a.push_back(rows[i]);
                b.push_back(rhs[i]);
            }
            const auto x = solve_square(a, b);
            if (!x || !feasible(*x)) return;
            double obj = p.objective_constant;
            for (std::size_t j = 0; j < n; ++j) obj += p.objective[j] * (*x)[j];
            if (obj < best.objective) {
                best.objective = obj;
                best.x = *x;
                best.feasible = true;
            }
            return;
        }
        for (std::size_t i = start; i < rows.size(); ++i) {
            pick.push_back(i);
            rec(i + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return best;
}

// ---------------------------------------------------------------------------
// Exhaustive integer scheduling of a handful of appliances.

struct ToyAppliance {
    std::int64_t arrival;
    int queue; // 0-based
};

struct ToyProblem {
    Codebook book;
    int lookahead = 0;
    std::vector<ToyAppliance> apps;
    /// ZIC, C_up, C_dn over epochs 0..lookahead; zero ZIC afterwards.
    std::vector<double> zic, up, dn;
    std::vector<double> delay; // per queue
    ddls::PulseAlignment align = ddls::PulseAlignment::at_departure;

    double zic_at(std::int64_t l) const { return l < static_cast<std::int64_t>(zic.size()) ? zic[static_cast<std::size_t>(l)] : 0.0; }
    double up_at(std::int64_t l) const { return up[static_cast<std::size_t>(std::min<std::int64_t>(l, static_cast<std::int64_t>(up.size()) - 1))]; }
    double dn_at(std::int64_t l) const { return dn[static_cast<std::size_t>(std::min<std::int64_t>(l, static_cast<std::int64_t>(dn.size()) - 1))]; }
};

/// Cost of switching appliance i on at starts[i], over epochs [0, epochs).
inline double toy_cost(const ToyProblem& p, const std::vector<std::int64_t>& starts, std::int64_t epochs)
{
    std::vector<Switch> on;
    for (std::size_t i = 0; i < p.apps.size(); ++i) on.push_back({starts[i], p.apps[i].queue});
    const auto load = per_appliance_load(on, p.book, epochs, p.align);
    double cost = 0.0;
    for (std::int64_t l = 0; l < epochs; ++l) {
        const double diff = load[static_cast<std::size_t>(l)] - p.zic_at(l);
        cost += diff > 0 ? p.up_at(l) * diff : -p.dn_at(l) * diff;
        for (std::size_t i = 0; i < p.apps.size(); ++i)
            if (p.apps[i].arrival <= l && l < starts[i]) cost += p.delay[static_cast<std::size_t>(p.apps[i].queue)];
    }
    return cost;
}

struct ToyOptimum {
    double cost = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> starts;
    std::size_t schedules = 0;
};

/// Minimum over every integer schedule that finishes inside the window
/// (start <= T - u_q), costed over epochs 0..T.
inline ToyOptimum enumerate_schedules(const ToyProblem& p)
{
    ToyOptimum best;
    std::vector<std::int64_t> starts(p.apps.size());
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
        if (i == p.apps.size()) {
            ++best.schedules;
            const double c = toy_cost(p, starts, p.lookahead + 1);
            if (c < best.cost) {
                best.cost = c;
                best.starts = starts;
            }
            return;
        }
        const auto latest = p.lookahead - p.book[static_cast<std::size_t>(p.apps[i].queue)].duration();
        for (std::int64_t s = p.apps[i].arrival; s <= latest; ++s) {
            starts[i] = s;
            rec(i + 1);
        }
    };
    rec(0);
    return best;
}

/// The toy problem in the scheduler's own terms at epoch 0, with every arrival known.
inline ddls::HorizonInputs toy_inputs(const ToyProblem& p)
{
    ddls::HorizonInputs in;
    in.epoch = 0;
    in.lookahead = p.lookahead;
    in.codebook = p.book;
    in.zic = p.zic;
    in.price_up = p.up;
    in.price_dn = p.dn;
    in.delay = ddls::DelayPrices{p.delay, {}};
    in.alignment = p.align;
    const auto w = static_cast<std::size_t>(p.lookahead) + 1;
    in.arrivals.assign(p.book.size(), std::vector<double>(w, 0.0));
    for (const auto& a : p.apps)
        for (std::size_t t = static_cast<std::size_t>(a.arrival); t < w; ++t) in.arrivals[static_cast<std::size_t>(a.queue)][t] += 1.0;
    in.departed_before.assign(p.book.size(), 0);
    return in;
}

} // namespace oracle
