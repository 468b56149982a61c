#pragma once

// Per-queue cumulative arrival/departure ledgers and delay-cost accounting.

#include "ddls/core.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ddls {

/// One appliance as recorded on arrival. `seq` orders appliances that share
/// a (queue, epoch) pair; it is the within-epoch tie-break for admissions.
struct ArrivalRecord {
    std::int64_t epoch = 0;
    int queue = 0; // 0-based
    Count seq = 0;

    friend bool operator==(const ArrivalRecord&, const ArrivalRecord&) = default;
};

/// Cumulative a_q(l), d_q(l) step functions. Values past the last recorded
/// epoch hold their last level; values before epoch 0 are zero.
class QueueLedger {
public:
    explicit QueueLedger(std::size_t queues) : arrivals_(queues), departures_(queues)
    {
        if (queues == 0) throw ConfigError("ledger needs at least one queue");
    }

    std::size_t queues() const noexcept { return arrivals_.size(); }
    /// Last epoch touched by an update, -1 when empty.
    std::int64_t last_epoch() const noexcept { return last_; }

    void record_arrivals(std::int64_t epoch, std::span<const Count> counts)
    {
        check_update(epoch, counts);
        advance(epoch);
        for (std::size_t q = 0; q < queues(); ++q) {
            const Count before = arrivals_[q].back();
            for (Count s = 0; s < counts[q]; ++s)
                log_.push_back(ArrivalRecord{epoch, static_cast<int>(q), seq_in_epoch(q, epoch, before) + s});
            arrivals_[q].back() += counts[q];
        }
    }

    void apply_departures(std::int64_t epoch, std::span<const Count> counts)
    {
        check_update(epoch, counts);
        for (std::size_t q = 0; q < queues(); ++q) {
            if (departures(q, epoch) + counts[q] > arrivals(q, epoch))
                throw FeasibilityError("queue " + std::to_string(q + 1) + " at epoch " + std::to_string(epoch) +
                                       ": departing " + std::to_string(counts[q]) + " with backlog " +
                                       std::to_string(backlog(q, epoch)));
        }
        advance(epoch);
        for (std::size_t q = 0; q < queues(); ++q) departures_[q].back() += counts[q];
    }

    Count arrivals(std::size_t q, std::int64_t epoch) const { return level(arrivals_.at(q), epoch); }
    Count departures(std::size_t q, std::int64_t epoch) const { return level(departures_.at(q), epoch); }
    Count backlog(std::size_t q, std::int64_t epoch) const { return arrivals(q, epoch) - departures(q, epoch); }

    Count total_arrivals(std::int64_t epoch) const
    {
        Count n = 0;
        for (std::size_t q = 0; q < queues(); ++q) n += arrivals(q, epoch);
        return n;
    }
    Count total_departures(std::int64_t epoch) const
    {
        Count n = 0;
        for (std::size_t q = 0; q < queues(); ++q) n += departures(q, epoch);
        return n;
    }

    const std::vector<ArrivalRecord>& arrival_log() const noexcept { return log_; }

    /// CSV rows: epoch,queue,cumulative_arrivals,cumulative_departures (queue ids 1-based).
    void write_csv(std::ostream& os) const
    {
        os << "epoch,queue,cumulative_arrivals,cumulative_departures\n";
        for (std::int64_t l = 0; l <= last_; ++l)
            for (std::size_t q = 0; q < queues(); ++q)
                os << l << ',' << q + 1 << ',' << arrivals(q, l) << ',' << departures(q, l) << '\n';
    }

private:
    static Count level(const Counts& v, std::int64_t epoch) noexcept
    {
        if (epoch < 0 || v.empty()) return 0;
        const auto idx = std::min<std::int64_t>(epoch, static_cast<std::int64_t>(v.size()) - 1);
        return v[static_cast<std::size_t>(idx)];
    }

    void check_update(std::int64_t epoch, std::span<const Count> counts) const
    {
        if (counts.size() != queues()) throw ConfigError("count vector does not match queue count");
        if (epoch < 0) throw OrderingError("epochs start at 0");
        if (epoch < last_)
            throw OrderingError("update for epoch " + std::to_string(epoch) + " after epoch " + std::to_string(last_));
        for (Count c : counts)
            if (c < 0) throw ConfigError("counts must be nonnegative");
    }

    void advance(std::int64_t epoch)
    {
        for (std::size_t q = 0; q < queues(); ++q) {
            while (static_cast<std::int64_t>(arrivals_[q].size()) <= epoch)
                arrivals_[q].push_back(arrivals_[q].empty() ? 0 : arrivals_[q].back());
            while (static_cast<std::int64_t>(departures_[q].size()) <= epoch)
                departures_[q].push_back(departures_[q].empty() ? 0 : departures_[q].back());
        }
        last_ = epoch;
    }

    Count seq_in_epoch(std::size_t q, std::int64_t epoch, Count level_now) const
    {
        return level_now - arrivals(q, epoch - 1);
    }

    std::vector<Counts> arrivals_;
    std::vector<Counts> departures_;
    std::vector<ArrivalRecord> log_;
    std::int64_t last_ = -1;
};

/// Per-queue delay prices C_I,q (currency per waiting appliance per epoch),
/// optionally overridden per epoch.
struct DelayPrices {
    std::vector<double> per_queue;
    /// by_epoch[l][q]; epochs beyond the table fall back to per_queue.
    std::vector<std::vector<double>> by_epoch;

    double at(std::size_t q, std::int64_t epoch) const
    {
        if (epoch >= 0 && static_cast<std::size_t>(epoch) < by_epoch.size()) return by_epoch[static_cast<std::size_t>(epoch)].at(q);
        return per_queue.at(q);
    }

    void validate(std::size_t queues) const
    {
        if (per_queue.size() != queues) throw ConfigError("need one delay price per queue");
        for (double c : per_queue)
            if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("delay prices must be nonnegative");
        for (const auto& row : by_epoch) {
            if (row.size() != queues) throw ConfigError("per-epoch delay price row has wrong width");
            for (double c : row)
                if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("delay prices must be nonnegative");
        }
    }

    static DelayPrices uniform(std::size_t queues, double price) { return DelayPrices{std::vector<double>(queues, price), {}}; }
};

/// Delay cost increment: sum over l in [from, from + horizon] and queues of
/// C_I,q(l) * (a_q(l) - d_q(l)).
inline double dci(const QueueLedger& ledger, std::int64_t from_epoch, std::int64_t horizon, const DelayPrices& prices)
{
    prices.validate(ledger.queues());
    double total = 0.0;
    for (std::int64_t l = from_epoch; l <= from_epoch + horizon; ++l)
        for (std::size_t q = 0; q < ledger.queues(); ++q)
            total += prices.at(q, l) * static_cast<double>(ledger.backlog(q, l));
    return total;
}

} // namespace ddls
