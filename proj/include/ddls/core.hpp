#pragma once

// Domain types for deferrable loads and the synthesis of aggregate demand
// from per-queue departure processes.

#include "ddls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ddls {

using Count = std::int64_t;
using Counts = std::vector<Count>;

/// Maximum number of epochs a pulse may span unless configured otherwise
/// (8 h at 15 min epochs).
inline constexpr int default_max_pulse_epochs = 32;

/// Where the first pulse sample lands relative to the switch-on epoch k.
///   at_departure: g_q[0] is drawn during epoch k.
///   next_epoch:   g_q[0] is drawn during epoch k + 1.
enum class PulseAlignment { at_departure, next_epoch };

constexpr int pulse_offset(PulseAlignment a) noexcept
{
    return a == PulseAlignment::at_departure ? 0 : 1;
}

struct Epoch {
    std::int64_t index = 0;
    double interval_seconds = 900.0;

    Epoch() = default;
    Epoch(std::int64_t idx, double delta) : index(idx), interval_seconds(delta)
    {
        if (idx < 0) throw ConfigError("epoch index must be nonnegative");
        if (!(delta > 0.0) || !std::isfinite(delta)) throw ConfigError("interval length must be positive");
    }

    double wall_seconds() const noexcept { return static_cast<double>(index) * interval_seconds; }
};

/// One quantization code: a finitely supported real power pulse (kW per epoch).
class ChargeCode {
public:
    ChargeCode(int id, std::vector<double> pulse, double nominal_rate_kw)
        : id_(id), pulse_(std::move(pulse)), rate_kw_(nominal_rate_kw)
    {
        if (id_ < 1) throw ConfigError("charge code ids start at 1");
        if (pulse_.empty()) throw ConfigError("charge code pulse must span at least one epoch");
        for (double s : pulse_) {
            if (!std::isfinite(s) || s < 0.0) throw ConfigError("pulse samples must be finite and nonnegative");
        }
    }

    /// Square pulse of `duration` epochs at `rate_kw`.
    static ChargeCode square(int id, double rate_kw, int duration)
    {
        if (duration < 1) throw ConfigError("pulse duration must be at least one epoch");
        return ChargeCode(id, std::vector<double>(static_cast<std::size_t>(duration), rate_kw), rate_kw);
    }

    int id() const noexcept { return id_; }
    int duration() const noexcept { return static_cast<int>(pulse_.size()); }
    double rate_kw() const noexcept { return rate_kw_; }
    std::span<const double> pulse() const noexcept { return pulse_; }
    double sample(std::int64_t k) const noexcept
    {
        return (k < 0 || k >= duration()) ? 0.0 : pulse_[static_cast<std::size_t>(k)];
    }
    bool is_square() const noexcept
    {
        return std::all_of(pulse_.begin(), pulse_.end(), [&](double s) { return s == rate_kw_; });
    }
    /// Sum of samples, i.e. energy in kW-epochs.
    double pulse_sum() const noexcept { return std::accumulate(pulse_.begin(), pulse_.end(), 0.0); }

    friend bool operator==(const ChargeCode&, const ChargeCode&) = default;

private:
    int id_;
    std::vector<double> pulse_;
    double rate_kw_;
};

using Codebook = std::vector<ChargeCode>;

/// Throws unless ids run 1..Q in order and every pulse fits in `max_pulse` epochs.
inline void validate_codebook(const Codebook& book, int max_pulse = default_max_pulse_epochs)
{
    if (book.empty()) throw ConfigError("codebook is empty");
    for (std::size_t i = 0; i < book.size(); ++i) {
        if (book[i].id() != static_cast<int>(i) + 1)
            throw ConfigError("codebook ids must be 1..Q in order (found id " + std::to_string(book[i].id()) +
                              " at position " + std::to_string(i + 1) + ")");
        if (book[i].duration() > max_pulse)
            throw ConfigError("code " + std::to_string(book[i].id()) + " exceeds the maximum pulse length");
    }
}

inline int max_duration(const Codebook& book) noexcept
{
    int u = 0;
    for (const auto& c : book) u = std::max(u, c.duration());
    return u;
}

/// Unquantized request parameters; for EV-style loads (rate_kw, duration_epochs).
struct RawRequest {
    std::vector<double> params;

    void validate() const
    {
        for (double p : params) {
            if (!std::isfinite(p) || p < 0.0) throw ConfigError("request parameters must be finite and nonnegative");
        }
    }
};

struct ArrivalEvent {
    std::int64_t epoch = 0;
    RawRequest request;
};

/// Power samples (kW) for consecutive epochs starting at `start`. Reads
/// outside the stored range are zero.
struct LoadProfile {
    std::int64_t start = 0;
    std::vector<double> samples;

    std::int64_t end() const noexcept { return start + static_cast<std::int64_t>(samples.size()); }
    double at(std::int64_t epoch) const noexcept
    {
        return (epoch < start || epoch >= end()) ? 0.0 : samples[static_cast<std::size_t>(epoch - start)];
    }
    double sum() const noexcept { return std::accumulate(samples.begin(), samples.end(), 0.0); }
    double peak() const noexcept
    {
        return samples.empty() ? 0.0 : *std::max_element(samples.begin(), samples.end());
    }
    /// Grow to cover [start, epoch].
    void extend_to(std::int64_t epoch)
    {
        if (epoch >= end()) samples.resize(static_cast<std::size_t>(epoch - start + 1), 0.0);
    }

    friend bool operator==(const LoadProfile&, const LoadProfile&) = default;
};

/// Discrete load synthesis: L(l) = sum_q sum_k inc_q(k) g_q(l - k - offset)
/// for l in [0, horizon). `increments[q][k]` is the number of queue-q
/// appliances switched on at epoch k.
inline LoadProfile synthesize_load(const std::vector<Counts>& increments, const Codebook& codebook,
                                   std::int64_t horizon, PulseAlignment align = PulseAlignment::at_departure)
{
    if (increments.size() != codebook.size())
        throw ConfigError("departure process has " + std::to_string(increments.size()) + " queues but codebook has " +
                          std::to_string(codebook.size()) + " codes");
    if (horizon < max_duration(codebook)) throw ConfigError("synthesis horizon shorter than the longest pulse");

    LoadProfile out{0, std::vector<double>(static_cast<std::size_t>(horizon), 0.0)};
    const int off = pulse_offset(align);
    for (std::size_t q = 0; q < codebook.size(); ++q) {
        const auto g = codebook[q].pulse();
        const auto& inc = increments[q];
        for (std::size_t k = 0; k < inc.size(); ++k) {
            if (inc[k] < 0) throw ConfigError("departure increments must be nonnegative");
            if (inc[k] == 0) continue;
            const double n = static_cast<double>(inc[k]);
            for (std::size_t j = 0; j < g.size(); ++j) {
                const auto l = static_cast<std::int64_t>(k + j) + off;
                if (l >= horizon) break;
                out.samples[static_cast<std::size_t>(l)] += n * g[j];
            }
        }
    }
    return out;
}

/// Per-queue increment matrix (Q x horizon) from a list of (epoch, queue index) switch-on events.
inline std::vector<Counts> increments_from_events(std::span<const std::pair<std::int64_t, int>> events, std::size_t queues,
                                                  std::int64_t horizon)
{
    std::vector<Counts> inc(queues, Counts(static_cast<std::size_t>(horizon), 0));
    for (const auto& [epoch, q] : events) {
        if (q < 0 || static_cast<std::size_t>(q) >= queues) throw ConfigError("queue index out of range");
        if (epoch >= 0 && epoch < horizon) ++inc[static_cast<std::size_t>(q)][static_cast<std::size_t>(epoch)];
    }
    return inc;
}

/// Demand if every appliance switched on at its arrival epoch. `quantize`
/// maps a RawRequest to a 1-based code id.
template <typename QuantizeFn>
LoadProfile unscheduled_load(std::span<const ArrivalEvent> arrivals, const Codebook& codebook, QuantizeFn&& quantize,
                             std::int64_t horizon, PulseAlignment align = PulseAlignment::at_departure)
{
    std::vector<std::pair<std::int64_t, int>> events;
    events.reserve(arrivals.size());
    std::int64_t last = 0;
    for (const auto& ev : arrivals) {
        if (ev.epoch < last) throw OrderingError("arrivals must be sorted by epoch");
        last = ev.epoch;
        events.emplace_back(ev.epoch, quantize(ev.request) - 1);
    }
    return synthesize_load(increments_from_events(events, codebook.size(), horizon), codebook, horizon, align);
}

/// Adds the pulses of appliances switched on at `epoch` to `base`. Samples
/// before the first affected epoch are left untouched; the profile grows
/// as needed to hold the full pulses.
inline LoadProfile fold_committed(LoadProfile base, std::span<const Count> committed, std::int64_t epoch,
                                  const Codebook& codebook, PulseAlignment align = PulseAlignment::at_departure)
{
    if (committed.size() != codebook.size()) throw ConfigError("committed counts do not match codebook size");
    const int off = pulse_offset(align);
    for (std::size_t q = 0; q < codebook.size(); ++q) {
        if (committed[q] < 0) throw ConfigError("committed counts must be nonnegative");
        if (committed[q] == 0) continue;
        const auto g = codebook[q].pulse();
        const std::int64_t first = epoch + off;
        if (first < base.start) throw ConfigError("cannot fold a pulse that starts before the profile");
        base.extend_to(first + static_cast<std::int64_t>(g.size()) - 1);
        const double n = static_cast<double>(committed[q]);
        for (std::size_t j = 0; j < g.size(); ++j)
            base.samples[static_cast<std::size_t>(first - base.start) + j] += n * g[j];
    }
    return base;
}

} // namespace ddls
