#pragma once

// Anonymized downlink: per-queue admission cutoffs computed from the
// scheduler's cumulative departures, and their decoding at the HEMS side.

#include "ddls/queues.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ddls {

/// Admits every queue appliance that arrived at or before `epoch`, plus the
/// `tail` lowest sequence numbers of the following epoch. An empty `epoch`
/// means no whole epoch is admitted and the tail applies to epoch 0.
struct Cutoff {
    int queue = 0; // 0-based
    std::optional<std::int64_t> epoch;
    Count tail = 0;

    /// First epoch not fully admitted.
    std::int64_t tail_epoch() const noexcept { return epoch ? *epoch + 1 : 0; }

    friend bool operator==(const Cutoff&, const Cutoff&) = default;
};

/// Carries only (queue, cutoff) pairs; no appliance identifiers.
struct ThresholdMessage {
    std::int64_t epoch = 0;
    std::vector<Cutoff> cutoffs;

    friend bool operator==(const ThresholdMessage&, const ThresholdMessage&) = default;
};

/// T_q(l) = max{tau <= l : a_q(tau) <= d_q(l)}, refined with a within-epoch tail count.
inline ThresholdMessage encode_thresholds(const QueueLedger& ledger, std::int64_t epoch,
                                          std::span<const Count> target_departures)
{
    if (target_departures.size() != ledger.queues()) throw ConfigError("target departures do not match queue count");
    ThresholdMessage msg{epoch, {}};
    msg.cutoffs.reserve(ledger.queues());
    for (std::size_t q = 0; q < ledger.queues(); ++q) {
        const Count d = target_departures[q];
        if (d < 0 || d > ledger.arrivals(q, epoch))
            throw FeasibilityError("queue " + std::to_string(q + 1) + ": target departures " + std::to_string(d) +
                                   " outside [0, " + std::to_string(ledger.arrivals(q, epoch)) + "]");
        Cutoff c{static_cast<int>(q), std::nullopt, 0};
        for (std::int64_t tau = epoch; tau >= 0; --tau) {
            if (ledger.arrivals(q, tau) <= d) {
                c.epoch = tau;
                break;
            }
        }
        c.tail = d - (c.epoch ? ledger.arrivals(q, *c.epoch) : 0);
        msg.cutoffs.push_back(c);
    }
    return msg;
}

/// One appliance known to a home energy management system.
struct HemsAppliance {
    std::uint64_t id = 0;
    int queue = 0;
    std::int64_t arrival_epoch = 0;
    Count seq = 0;
    bool admitted = false;
};

class HemsLog {
public:
    void add(std::uint64_t id, const ArrivalRecord& rec)
    {
        appliances_.push_back(HemsAppliance{id, rec.queue, rec.epoch, rec.seq, false});
    }

    /// Switches on the not-yet-admitted appliances covered by `msg`. Replaying
    /// a message admits nothing new.
    std::vector<std::uint64_t> decode_and_admit(const ThresholdMessage& msg)
    {
        std::vector<std::uint64_t> on;
        for (const auto& c : msg.cutoffs) {
            for (auto& a : appliances_) {
                if (a.admitted || a.queue != c.queue || a.arrival_epoch > msg.epoch) continue;
                const bool whole = c.epoch && a.arrival_epoch <= *c.epoch;
                const bool tail = a.arrival_epoch == c.tail_epoch() && a.seq < c.tail;
                if (whole || tail) {
                    a.admitted = true;
                    on.push_back(a.id);
                }
            }
        }
        return on;
    }

    const std::vector<HemsAppliance>& appliances() const noexcept { return appliances_; }

private:
    std::vector<HemsAppliance> appliances_;
};

inline void write_feedback_header(std::ostream& os) { os << "epoch,queue,cutoff,tail\n"; }

/// Rows "epoch,queue,cutoff,tail"; cutoff -1 when no whole epoch is admitted.
inline void write_feedback_rows(std::ostream& os, const ThresholdMessage& msg)
{
    for (const auto& c : msg.cutoffs)
        os << msg.epoch << ',' << c.queue + 1 << ',' << (c.epoch ? *c.epoch : -1) << ',' << c.tail << '\n';
}

} // namespace ddls
