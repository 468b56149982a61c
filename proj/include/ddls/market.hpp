#pragma once

// Zero-incremental-cost supply profile and real-time cost evaluation.

#include "ddls/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace ddls {

/// P = B + R - L^N, pointwise.
inline std::vector<double> zic_profile(std::span<const double> bid, std::span<const double> renewable,
                                       std::span<const double> base_load)
{
    if (bid.size() != renewable.size() || bid.size() != base_load.size())
        throw ConfigError("bid, renewable and base load must have equal lengths");
    std::vector<double> p(bid.size());
    for (std::size_t l = 0; l < p.size(); ++l) p[l] = bid[l] + renewable[l] - base_load[l];
    return p;
}

/// Day-ahead bid, renewable forecast, base load and balancing prices per
/// epoch, starting at epoch 0. Reads past the end hold the last sample.
class MarketProfile {
public:
    MarketProfile() = default;
    MarketProfile(std::vector<double> bid, std::vector<double> renewable, std::vector<double> base_load,
                  std::vector<double> price_up, std::vector<double> price_dn)
        : bid_(std::move(bid)), renewable_(std::move(renewable)), base_(std::move(base_load)),
          c_up_(std::move(price_up)), c_dn_(std::move(price_dn))
    {
        const auto n = bid_.size();
        if (n == 0) throw ConfigError("market profile is empty");
        if (renewable_.size() != n || base_.size() != n || c_up_.size() != n || c_dn_.size() != n)
            throw ConfigError("market profile columns have different lengths");
        for (std::size_t l = 0; l < n; ++l) {
            if (!std::isfinite(bid_[l]) || !std::isfinite(renewable_[l]) || !std::isfinite(base_[l]))
                throw ConfigError("market profile has non-finite power values");
            if (!(c_up_[l] >= 0.0) || !(c_dn_[l] >= 0.0) || !std::isfinite(c_up_[l]) || !std::isfinite(c_dn_[l]))
                throw ConfigError("negative balancing price at epoch " + std::to_string(l));
        }
        zic_ = zic_profile(bid_, renewable_, base_);
    }

    std::size_t size() const noexcept { return bid_.size(); }
    double bid(std::int64_t l) const noexcept { return pick(bid_, l); }
    double renewable(std::int64_t l) const noexcept { return pick(renewable_, l); }
    double base_load(std::int64_t l) const noexcept { return pick(base_, l); }
    double zic(std::int64_t l) const noexcept { return pick(zic_, l); }
    double price_up(std::int64_t l) const noexcept { return pick(c_up_, l); }
    double price_dn(std::int64_t l) const noexcept { return pick(c_dn_, l); }
    std::span<const double> zic_samples() const noexcept { return zic_; }

    /// Each power column divided by `parts`; prices unchanged.
    MarketProfile share(int parts) const
    {
        if (parts < 1) throw ConfigError("profile share needs at least one part");
        auto div = [parts](std::vector<double> v) {
            for (double& x : v) x /= parts;
            return v;
        };
        return MarketProfile(div(bid_), div(renewable_), div(base_), c_up_, c_dn_);
    }

private:
    static double pick(const std::vector<double>& v, std::int64_t l) noexcept
    {
        if (v.empty()) return 0.0;
        const auto i = std::clamp<std::int64_t>(l, 0, static_cast<std::int64_t>(v.size()) - 1);
        return v[static_cast<std::size_t>(i)];
    }

    std::vector<double> bid_, renewable_, base_, c_up_, c_dn_, zic_;
};

/// Reads "epoch,B,R,L^N,C_up,C_dn" rows (header line required; epochs 0..n-1 in order).
inline MarketProfile load_market_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("market CSV is empty");
    std::vector<double> b, r, n, up, dn;
    std::int64_t expect = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ConfigError("market CSV: cannot parse '" + cell + "' on row for epoch " + std::to_string(expect));
            }
        }
        if (v.size() != 6) throw ConfigError("market CSV rows need 6 columns: epoch,B,R,L^N,C_up,C_dn");
        if (static_cast<std::int64_t>(v[0]) != expect) throw ConfigError("market CSV epochs must be 0,1,2,... in order");
        ++expect;
        b.push_back(v[1]);
        r.push_back(v[2]);
        n.push_back(v[3]);
        up.push_back(v[4]);
        dn.push_back(v[5]);
    }
    return MarketProfile(std::move(b), std::move(r), std::move(n), std::move(up), std::move(dn));
}

struct Deviation {
    double up = 0.0;
    double dn = 0.0;
};

/// Upward purchase when D-load exceeds the supply curve, downward otherwise.
inline Deviation deviation(double load, double zic) noexcept
{
    return {std::max(load - zic, 0.0), std::max(zic - load, 0.0)};
}

/// C_up P_up + C_dn P_dn + sum_q C_I,q * backlog_q for a single epoch.
inline double stage_cost(double load, double zic, double price_up, double price_dn, std::span<const std::int64_t> backlog,
                         std::span<const double> delay_prices)
{
    if (price_up < 0.0 || price_dn < 0.0) throw ConfigError("balancing prices must be nonnegative");
    if (backlog.size() != delay_prices.size()) throw ConfigError("backlog and delay prices differ in length");
    const auto dev = deviation(load, zic);
    double cost = price_up * dev.up + price_dn * dev.dn;
    for (std::size_t q = 0; q < backlog.size(); ++q) cost += delay_prices[q] * static_cast<double>(backlog[q]);
    return cost;
}

} // namespace ddls
