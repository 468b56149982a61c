#pragma once

// Request quantization, codebook design, arrival-time codes and the
// communication-rate calculators for the HEMS/CEMS links.

#include "ddls/core.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ddls {

/// gamma(g(.;C), g(.;C_q)) used to assign requests to codes.
enum class DistortionMetric {
    /// Squared error between the sampled request pulse and the code pulse, summed over epochs.
    pulse_squared_error,
    /// Squared Euclidean distance between (rate_kw, duration) and the code's nominal parameters.
    parameter_squared_error,
};

namespace detail {

inline void check_request_shape(const RawRequest& r)
{
    if (r.params.size() != 2) throw ConfigError("requests carry exactly two parameters: rate_kw, duration_epochs");
    r.validate();
}

/// Weight of epoch k in a pulse of (real) duration u: 1 for whole epochs, the fractional remainder in the last one.
inline double pulse_weight(double duration, std::int64_t k) noexcept
{
    return std::clamp(duration - static_cast<double>(k), 0.0, 1.0);
}

inline double request_energy_sq(double rate, double duration) noexcept
{
    const double whole = std::floor(duration);
    const double frac = duration - whole;
    return rate * rate * (whole + frac * frac);
}

} // namespace detail

/// Sampled pulse of a raw (rate_kw, duration_epochs) request.
inline std::vector<double> request_pulse(const RawRequest& r)
{
    detail::check_request_shape(r);
    const double rate = r.params[0];
    const double dur = r.params[1];
    const auto n = static_cast<std::size_t>(std::ceil(dur));
    std::vector<double> g(n);
    for (std::size_t k = 0; k < n; ++k) g[k] = rate * detail::pulse_weight(dur, static_cast<std::int64_t>(k));
    return g;
}

inline double distortion(const RawRequest& r, const ChargeCode& code, DistortionMetric metric)
{
    detail::check_request_shape(r);
    const double rate = r.params[0];
    const double dur = r.params[1];
    if (metric == DistortionMetric::parameter_squared_error) {
        const double dr = rate - code.rate_kw();
        const double du = dur - static_cast<double>(code.duration());
        return dr * dr + du * du;
    }
    // |g|^2 - 2<g, c> + |c|^2 without materializing g.
    double cross = 0.0;
    double code_sq = 0.0;
    const auto c = code.pulse();
    for (std::size_t k = 0; k < c.size(); ++k) {
        cross += detail::pulse_weight(dur, static_cast<std::int64_t>(k)) * c[k];
        code_sq += c[k] * c[k];
    }
    return std::max(0.0, detail::request_energy_sq(rate, dur) - 2.0 * rate * cross + code_sq);
}

/// Maps raw requests onto Q service classes. Immutable after construction.
class Quantizer {
public:
    explicit Quantizer(Codebook codebook, DistortionMetric metric = DistortionMetric::pulse_squared_error,
                       int max_pulse = default_max_pulse_epochs)
        : codebook_(std::move(codebook)), metric_(metric)
    {
        validate_codebook(codebook_, max_pulse);
    }

    /// Nearest code id (1-based); ties go to the lowest id.
    int quantize(const RawRequest& r) const
    {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < codebook_.size(); ++q) {
            const double d = distortion(r, codebook_[q], metric_);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(q) + 1;
            }
        }
        return best;
    }
    int operator()(const RawRequest& r) const { return quantize(r); }

    const Codebook& codebook() const noexcept { return codebook_; }
    DistortionMetric metric() const noexcept { return metric_; }
    std::size_t size() const noexcept { return codebook_.size(); }

    /// Parameters that quantize to `code` itself.
    static RawRequest params_of(const ChargeCode& code)
    {
        return RawRequest{{code.rate_kw(), static_cast<double>(code.duration())}};
    }

private:
    Codebook codebook_;
    DistortionMetric metric_;
};

/// Discrete stand-in for f_C: weighted request points (weights normalized on construction).
class RequestDistribution {
public:
    RequestDistribution(std::vector<RawRequest> points, std::vector<double> weights)
        : points_(std::move(points)), weights_(std::move(weights))
    {
        if (points_.empty() || points_.size() != weights_.size())
            throw ConfigError("request distribution needs one weight per point");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("distribution weights must be nonnegative");
            total += w;
        }
        if (!(total > 0.0)) throw ConfigError("distribution has zero mass");
        for (double& w : weights_) w /= total;
    }

    static RequestDistribution from_samples(std::vector<RawRequest> samples)
    {
        std::vector<double> w(samples.size(), 1.0);
        return RequestDistribution(std::move(samples), std::move(w));
    }

    /// Midpoint-rule quadrature of the uniform density on a (rate, duration) box.
    static RequestDistribution uniform_box(double rate_lo, double rate_hi, double dur_lo, double dur_hi, int n_rate,
                                           int n_dur)
    {
        if (n_rate < 1 || n_dur < 1 || !(rate_hi > rate_lo) || !(dur_hi > dur_lo))
            throw ConfigError("degenerate uniform box");
        std::vector<RawRequest> pts;
        pts.reserve(static_cast<std::size_t>(n_rate) * static_cast<std::size_t>(n_dur));
        for (int i = 0; i < n_rate; ++i) {
            for (int j = 0; j < n_dur; ++j) {
                const double r = rate_lo + (rate_hi - rate_lo) * (i + 0.5) / n_rate;
                const double u = dur_lo + (dur_hi - dur_lo) * (j + 0.5) / n_dur;
                pts.push_back(RawRequest{{r, u}});
            }
        }
        return from_samples(std::move(pts));
    }

    std::span<const RawRequest> points() const noexcept { return points_; }
    std::span<const double> weights() const noexcept { return weights_; }

private:
    std::vector<RawRequest> points_;
    std::vector<double> weights_;
};

/// Probability mass of each quantization cell.
inline std::vector<double> cell_masses(const RequestDistribution& dist, const Quantizer& quant)
{
    std::vector<double> mass(quant.size(), 0.0);
    const auto pts = dist.points();
    const auto w = dist.weights();
    for (std::size_t i = 0; i < pts.size(); ++i) mass[static_cast<std::size_t>(quant(pts[i]) - 1)] += w[i];
    return mass;
}

/// lambda_q(l) = lambda(l) * P(C in cell q). Result indexed [q][l].
inline std::vector<std::vector<double>> queue_arrival_rates(std::span<const double> total_rate,
                                                            const RequestDistribution& dist, const Quantizer& quant)
{
    const auto mass = cell_masses(dist, quant);
    std::vector<std::vector<double>> rates(quant.size(), std::vector<double>(total_rate.size()));
    for (std::size_t q = 0; q < mass.size(); ++q)
        for (std::size_t l = 0; l < total_rate.size(); ++l) rates[q][l] = total_rate[l] * mass[q];
    return rates;
}

// ---------------------------------------------------------------------------
// Arrival-time codes

struct ArrivalTimeCode {
    std::int64_t residue = 0;
    std::int64_t window = 1;
};

/// Residue of the arrival epoch within its D-window: l_a - D * floor(l_a / D).
inline ArrivalTimeCode encode_arrival_time(std::int64_t arrival_epoch, std::int64_t window)
{
    if (window < 1) throw ConfigError("network delay window must be at least one epoch");
    if (arrival_epoch < 0) throw ConfigError("arrival epoch must be nonnegative");
    return {arrival_epoch - window * (arrival_epoch / window), window};
}

/// Reconstruction is exact only when the notification falls in the same
/// D-window as the arrival; otherwise the result is meaningless.
inline std::int64_t decode_arrival_time(const ArrivalTimeCode& code, std::int64_t notification_epoch)
{
    if (code.window < 1 || code.residue < 0 || code.residue >= code.window)
        throw ConfigError("malformed arrival-time code");
    return code.window * (notification_epoch / code.window) + code.residue;
}

// ---------------------------------------------------------------------------
// Rates

/// HEMS uplink traffic in bit/s. `arrivals_per_interval` is the expected
/// number of arrivals per epoch.
inline double uplink_rate_hems(double arrivals_per_interval, double interval_seconds, std::int64_t window,
                               std::int64_t queues)
{
    if (!(interval_seconds > 0.0)) throw ConfigError("interval length must be positive");
    if (window < 1 || queues < 1) throw ConfigError("window and queue count must be positive");
    if (arrivals_per_interval < 0.0) throw ConfigError("arrival rate must be nonnegative");
    return arrivals_per_interval * std::log2(static_cast<double>(window) * static_cast<double>(queues)) /
           interval_seconds;
}

/// Bound on the aggregate arrival vector rate, bits per epoch (base-2 log).
inline double uplink_rate_cems(double arrivals_per_interval, std::int64_t queues)
{
    if (queues < 0) throw ConfigError("queue count must be nonnegative");
    if (queues == 0) return 0.0;
    if (!(arrivals_per_interval > 0.0)) throw ConfigError("CEMS rate needs a positive arrival rate");
    return 0.5 * static_cast<double>(queues) *
           std::log2(2.0 * std::numbers::pi * std::numbers::e * arrivals_per_interval);
}

struct FeedbackRateParams {
    std::vector<double> min_correlation;
    std::vector<double> delay_variance;

    void validate() const
    {
        if (min_correlation.size() != delay_variance.size())
            throw ConfigError("feedback parameters need one correlation and one variance per queue");
        for (double rho : min_correlation)
            if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("correlation must lie in [0, 1)");
        for (double v : delay_variance)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("delay variance must be positive");
    }
};

/// (1/Delta) sum_q 1/2 log2(e (1 - rho_q^2) sigma_q^2), with each term floored at zero.
inline double feedback_rate_bound(const FeedbackRateParams& p, double interval_seconds)
{
    p.validate();
    if (!(interval_seconds > 0.0)) throw ConfigError("interval length must be positive");
    double bits = 0.0;
    for (std::size_t q = 0; q < p.min_correlation.size(); ++q) {
        const double rho = p.min_correlation[q];
        const double term = 0.5 * std::log2(std::numbers::e * (1.0 - rho * rho) * p.delay_variance[q]);
        bits += std::max(0.0, term);
    }
    return bits / interval_seconds;
}

// ---------------------------------------------------------------------------
// Codebook design

struct CodebookDesignOptions {
    int max_codes = 64;
    int max_pulse = default_max_pulse_epochs;
    int max_iterations = 100;
    DistortionMetric metric = DistortionMetric::pulse_squared_error;
};

struct CodebookDesign {
    Quantizer quantizer;
    /// chi_q: sum of distortions of the cell's samples divided by the sample count.
    std::vector<double> cell_distortion;
    std::vector<double> cell_mass;
    /// sum_q lambda_q^max chi_q with lambda_q^max = lambda_max * mass_q.
    double weighted_distortion = 0.0;
    /// Average per-sample distortion.
    double mean_distortion = 0.0;
};

namespace detail {

/// Best square code for a set of requests. Pulse metric: for each integer
/// duration u the optimal rate is sum r_i min(u_i, u) / (n u).
inline ChargeCode centroid(std::span<const RawRequest* const> cell, int id, DistortionMetric metric, int max_pulse)
{
    const double n = static_cast<double>(cell.size());
    if (metric == DistortionMetric::parameter_squared_error) {
        double r = 0.0, u = 0.0;
        for (const auto* s : cell) {
            r += s->params[0];
            u += s->params[1];
        }
        const int dur = std::clamp(static_cast<int>(std::lround(u / n)), 1, max_pulse);
        return ChargeCode::square(id, r / n, dur);
    }
    int best_u = 1;
    double best_gain = -1.0;
    double best_rate = 0.0;
    for (int u = 1; u <= max_pulse; ++u) {
        double overlap = 0.0;
        for (const auto* s : cell) overlap += s->params[0] * std::min(s->params[1], static_cast<double>(u));
        const double gain = overlap * overlap / (n * u);
        if (gain > best_gain) {
            best_gain = gain;
            best_u = u;
            best_rate = overlap / (n * u);
        }
    }
    return ChargeCode::square(id, best_rate, best_u);
}

inline ChargeCode seed_code(const RawRequest& r, int id, int max_pulse)
{
    const int dur = std::clamp(static_cast<int>(std::lround(r.params[1])), 1, max_pulse);
    return ChargeCode::square(id, r.params[0], dur);
}

struct Assignment {
    std::vector<int> cell; // 0-based
    std::vector<double> dist;
    double total = 0.0;
};

inline Assignment assign(std::span<const RawRequest> samples, const Codebook& book, DistortionMetric metric)
{
    Assignment a{std::vector<int>(samples.size()), std::vector<double>(samples.size()), 0.0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < book.size(); ++q) {
            const double d = distortion(samples[i], book[q], metric);
            if (d < best) {
                best = d;
                a.cell[i] = static_cast<int>(q);
            }
        }
        a.dist[i] = best;
        a.total += best;
    }
    return a;
}

/// Lloyd refinement in place; never increases total distortion.
inline Assignment lloyd(std::span<const RawRequest> samples, Codebook& book, const CodebookDesignOptions& opt)
{
    Assignment a = assign(samples, book, opt.metric);
    for (int it = 0; it < opt.max_iterations; ++it) {
        std::vector<std::vector<const RawRequest*>> cells(book.size());
        for (std::size_t i = 0; i < samples.size(); ++i) cells[static_cast<std::size_t>(a.cell[i])].push_back(&samples[i]);
        Codebook next;
        next.reserve(book.size());
        for (std::size_t q = 0; q < book.size(); ++q) {
            const int id = static_cast<int>(q) + 1;
            if (cells[q].empty())
                next.push_back(book[q]); // empty cells keep their code
            else
                next.push_back(centroid(cells[q], id, opt.metric, opt.max_pulse));
        }
        Assignment b = assign(samples, next, opt.metric);
        if (b.total > a.total) break; // numerical guard
        const bool stable = b.cell == a.cell;
        book = std::move(next);
        a = std::move(b);
        if (stable) break;
    }
    return a;
}

inline CodebookDesign summarize(std::span<const RawRequest> samples, Codebook book, const Assignment& a,
                                double lambda_max, const CodebookDesignOptions& opt)
{
    const double n = static_cast<double>(samples.size());
    std::vector<double> chi(book.size(), 0.0), mass(book.size(), 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        chi[static_cast<std::size_t>(a.cell[i])] += a.dist[i] / n;
        mass[static_cast<std::size_t>(a.cell[i])] += 1.0 / n;
    }
    double weighted = 0.0;
    for (std::size_t q = 0; q < book.size(); ++q) weighted += lambda_max * mass[q] * chi[q];
    return CodebookDesign{Quantizer(std::move(book), opt.metric, opt.max_pulse), std::move(chi), std::move(mass),
                          weighted, a.total / n};
}

/// Codebooks for Q = 1..max_q grown by farthest-point seeding; `visit(Q, design)`
/// returns true to stop.
template <typename Visitor>
void grow_codebooks(std::span<const RawRequest> samples, double lambda_max, const CodebookDesignOptions& opt, int max_q,
                    Visitor&& visit)
{
    if (samples.empty()) throw ConfigError("codebook design needs at least one sample");
    for (const auto& s : samples) check_request_shape(s);
    std::vector<const RawRequest*> all;
    all.reserve(samples.size());
    for (const auto& s : samples) all.push_back(&s);
    Codebook book{centroid(all, 1, opt.metric, opt.max_pulse)};
    Assignment a = lloyd(samples, book, opt);
    for (int q = 1;; ++q) {
        if (visit(q, summarize(samples, book, a, lambda_max, opt))) return;
        if (q >= max_q) return;
        const auto far = static_cast<std::size_t>(std::max_element(a.dist.begin(), a.dist.end()) - a.dist.begin());
        book.push_back(seed_code(samples[far], q + 1, opt.max_pulse));
        a = lloyd(samples, book, opt);
    }
}

} // namespace detail

/// Smallest Q whose weighted distortion sum_q lambda_q^max chi_q is at most `max_distortion`.
inline CodebookDesign design_codebook_min_q(std::span<const RawRequest> samples, double max_distortion,
                                            double lambda_max, const CodebookDesignOptions& opt = {})
{
    if (!(max_distortion > 0.0)) throw ConfigError("target distortion must be positive");
    std::optional<CodebookDesign> found;
    detail::grow_codebooks(samples, lambda_max, opt, opt.max_codes, [&](int, CodebookDesign d) {
        if (d.weighted_distortion <= max_distortion) {
            found.emplace(std::move(d));
            return true;
        }
        return false;
    });
    if (!found)
        throw ConfigError("target distortion unattainable with at most " + std::to_string(opt.max_codes) + " codes");
    return std::move(*found);
}

struct RateCaps {
    double hems_bits_per_second = std::numeric_limits<double>::infinity();
    double cems_bits_per_interval = std::numeric_limits<double>::infinity();
};

/// Largest Q with R_HEMS and R_CEMS (at the peak arrival rate) under the caps.
inline int max_codes_for_rates(const RateCaps& caps, double lambda_max, double interval_seconds, std::int64_t window,
                               int max_codes)
{
    int best = 0;
    for (int q = 1; q <= max_codes; ++q) {
        const bool ok = uplink_rate_hems(lambda_max, interval_seconds, window, q) <= caps.hems_bits_per_second &&
                        uplink_rate_cems(lambda_max, q) <= caps.cems_bits_per_interval;
        if (ok) best = q;
    }
    return best;
}

/// Lowest-distortion codebook whose uplink rates respect the caps.
inline CodebookDesign design_codebook_min_distortion(std::span<const RawRequest> samples, const RateCaps& caps,
                                                     double lambda_max, double interval_seconds, std::int64_t window,
                                                     const CodebookDesignOptions& opt = {})
{
    const int q_max = max_codes_for_rates(caps, lambda_max, interval_seconds, window, opt.max_codes);
    if (q_max < 1) throw ConfigError("rate caps cannot accommodate even a single code");
    const int target = std::min<int>(q_max, static_cast<int>(samples.size()));
    std::optional<CodebookDesign> out;
    detail::grow_codebooks(samples, lambda_max, opt, target, [&](int q, CodebookDesign d) {
        if (q == target) {
            out.emplace(std::move(d));
            return true;
        }
        return false;
    });
    return std::move(*out);
}

// ---------------------------------------------------------------------------
// Codebook files: a JSON list of {id, rate_kw, duration_epochs}; non-square
// codes additionally carry "pulse".

inline nlohmann::json codebook_to_json(const Codebook& book)
{
    auto arr = nlohmann::json::array();
    for (const auto& c : book) {
        nlohmann::json j{{"id", c.id()}, {"rate_kw", c.rate_kw()}, {"duration_epochs", c.duration()}};
        if (!c.is_square()) j["pulse"] = std::vector<double>(c.pulse().begin(), c.pulse().end());
        arr.push_back(std::move(j));
    }
    return arr;
}

inline Codebook codebook_from_json(const nlohmann::json& j)
{
    if (!j.is_array()) throw ConfigError("codebook must be a JSON list");
    Codebook book;
    for (const auto& e : j) {
        try {
            const int id = e.at("id").get<int>();
            const double rate = e.at("rate_kw").get<double>();
            if (e.contains("pulse")) {
                auto pulse = e.at("pulse").get<std::vector<double>>();
                if (e.contains("duration_epochs") && e.at("duration_epochs").get<int>() != static_cast<int>(pulse.size()))
                    throw ConfigError("pulse length disagrees with duration_epochs for code " + std::to_string(id));
                book.emplace_back(id, std::move(pulse), rate);
            } else {
                book.push_back(ChargeCode::square(id, rate, e.at("duration_epochs").get<int>()));
            }
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(std::string("malformed codebook entry: ") + ex.what());
        }
    }
    return book;
}

} // namespace ddls
