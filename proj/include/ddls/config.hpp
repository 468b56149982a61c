#pragma once

// JSON scenario files (schema "ddls-scenario/1").

#include "ddls/codec.hpp"
#include "ddls/market.hpp"
#include "ddls/simkit.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace ddls {

inline constexpr const char* scenario_schema = "ddls-scenario/1";

/// Parameters of the `rates` report.
struct RatesConfig {
    double arrivals_per_interval = 0.0;
    double interval_seconds = 900.0;
    std::int64_t window = 1;
    std::int64_t queues = 1;
    std::optional<FeedbackRateParams> feedback;
};

/// Parameters of the `codebook` design run.
struct CodebookDesignConfig {
    std::vector<RawRequest> samples;
    double lambda_max = 1.0;
    std::optional<double> max_distortion;
    std::optional<RateCaps> caps;
    std::int64_t window = 1;
    double interval_seconds = 900.0;
    CodebookDesignOptions options;
};

struct ScenarioFile {
    ScenarioConfig scenario;
    std::optional<RatesConfig> rates;
    std::optional<CodebookDesignConfig> design;
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("field '") + key + "' has the wrong type");
    }
}

inline std::vector<double> number_or_list(const nlohmann::json& j, const char* key, std::size_t n)
{
    const auto& v = j.at(key);
    if (v.is_number()) return std::vector<double>(n, v.get<double>());
    if (v.is_array()) {
        auto out = v.get<std::vector<double>>();
        if (out.size() != n)
            throw ConfigError(std::string("field '") + key + "' needs " + std::to_string(n) + " values, got " +
                              std::to_string(out.size()));
        return out;
    }
    throw ConfigError(std::string("field '") + key + "' must be a number or a list");
}

inline Codebook parse_codebook(const nlohmann::json& j)
{
    if (j.is_array()) return codebook_from_json(j);
    if (j.is_object() && j.contains("square")) {
        const auto& s = j.at("square");
        const double rate = s.at("rate_kw").get<double>();
        const auto durations = s.at("durations_epochs").get<std::vector<int>>();
        Codebook book;
        for (std::size_t i = 0; i < durations.size(); ++i)
            book.push_back(ChargeCode::square(static_cast<int>(i) + 1, rate, durations[i]));
        return book;
    }
    throw ConfigError("codebook must be a list of codes or {\"square\": {...}}");
}

inline PulseAlignment parse_alignment(const std::string& s)
{
    if (s == "at_departure") return PulseAlignment::at_departure;
    if (s == "next_epoch") return PulseAlignment::next_epoch;
    throw ConfigError("pulse_alignment must be at_departure or next_epoch");
}

inline std::vector<RawRequest> parse_samples(const nlohmann::json& d)
{
    if (d.contains("samples")) {
        std::vector<RawRequest> out;
        for (const auto& s : d.at("samples")) out.push_back(RawRequest{s.get<std::vector<double>>()});
        return out;
    }
    if (d.contains("uniform_box")) {
        const auto& b = d.at("uniform_box");
        const auto dist = RequestDistribution::uniform_box(
            b.at("rate_lo_kw").get<double>(), b.at("rate_hi_kw").get<double>(), b.at("duration_lo_epochs").get<double>(),
            b.at("duration_hi_epochs").get<double>(), get_or(b, "rate_points", 8), get_or(b, "duration_points", 8));
        return {dist.points().begin(), dist.points().end()};
    }
    throw ConfigError("codebook_design needs 'samples' or 'uniform_box'");
}

} // namespace detail

/// Parses a scenario document. Relative file references resolve against `base_dir`.
inline ScenarioFile scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {})
{
    if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
    const auto schema = detail::get_or<std::string>(j, "schema", "");
    if (schema != scenario_schema)
        throw ConfigError("unsupported schema '" + schema + "' (expected " + scenario_schema + ")");

    ScenarioFile f;
    auto& c = f.scenario;
    try {
        c.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
        c.interval_seconds = detail::get_or(j, "interval_seconds", 900.0);
        c.horizon = detail::get_or<std::int64_t>(j, "horizon_epochs", 96);
        c.lookahead = detail::get_or(j, "lookahead_epochs", 32);
        c.deadline = detail::get_or(j, "deadline_epochs", 32);
        c.schedulers = detail::get_or(j, "schedulers", 1);
        c.max_pulse = detail::get_or(j, "max_pulse_epochs", default_max_pulse_epochs);
        c.strategy = parse_strategy(detail::get_or<std::string>(j, "strategy", "ddls"));
        c.alignment = detail::parse_alignment(detail::get_or<std::string>(j, "pulse_alignment", "at_departure"));
        if (j.contains("capacity_cap") && !j.at("capacity_cap").is_null()) c.capacity_cap = j.at("capacity_cap").get<Count>();

        if (!j.contains("codebook")) throw ConfigError("missing 'codebook'");
        c.codebook = detail::parse_codebook(j.at("codebook"));

        if (!j.contains("arrivals")) throw ConfigError("missing 'arrivals'");
        const auto& a = j.at("arrivals");
        c.arrival_rate_per_hour = detail::number_or_list(a, "rate_per_hour", c.queues());
        c.arrival_profile = detail::get_or(a, "profile", std::vector<double>{});

        if (j.contains("prices")) {
            const auto& p = j.at("prices");
            c.price_up = detail::get_or(p, "up", 1.0);
            c.price_dn = detail::get_or(p, "down", 1.0);
            if (p.contains("delay"))
                c.delay_price = p.at("delay").is_array() ? p.at("delay").get<std::vector<double>>()
                                                         : std::vector<double>{p.at("delay").get<double>()};
        }

        if (j.contains("zic")) {
            const auto& z = j.at("zic");
            if (z.contains("market_csv")) {
                auto path = std::filesystem::path(z.at("market_csv").get<std::string>());
                if (path.is_relative()) path = base_dir / path;
                std::ifstream in(path);
                if (!in) throw ConfigError("cannot open market CSV " + path.string());
                c.zic.explicit_profile = load_market_csv(in);
            } else {
                c.zic.bid_kw = detail::get_or(z, "bid_kw", 0.0);
                c.zic.bid_demand_scale = detail::get_or(z, "bid_demand_scale", 0.0);
                c.zic.base_load_kw = detail::get_or(z, "base_load_kw", 0.0);
                c.zic.renewable_peak_kw = detail::get_or(z, "renewable_peak_kw", 0.0);
                c.zic.renewable_center_epoch = detail::get_or(z, "renewable_center_epoch", 48.0);
                c.zic.renewable_width_epochs = detail::get_or(z, "renewable_width_epochs", 12.0);
            }
        }

        if (j.contains("price_signal")) {
            const auto& s = j.at("price_signal");
            const auto shape = detail::get_or<std::string>(s, "shape", "linear");
            if (shape == "linear") c.price_signal.shape = PriceShape::linear;
            else if (shape == "logistic") c.price_signal.shape = PriceShape::logistic;
            else throw ConfigError("price_signal.shape must be linear or logistic");
            c.price_signal.slope = detail::get_or(s, "slope", 1.0);
            c.price_signal.offset = detail::get_or(s, "offset", -1.0);
            c.price_signal.midpoint = detail::get_or(s, "midpoint", 0.0);
        }

        if (j.contains("rates")) {
            const auto& r = j.at("rates");
            RatesConfig rc;
            rc.arrivals_per_interval = r.at("arrivals_per_interval").get<double>();
            rc.interval_seconds = detail::get_or(r, "interval_seconds", c.interval_seconds);
            rc.window = detail::get_or<std::int64_t>(r, "arrival_window", 1);
            rc.queues = detail::get_or<std::int64_t>(r, "queues", static_cast<std::int64_t>(c.queues()));
            if (r.contains("feedback")) {
                const auto& fb = r.at("feedback");
                const auto n = static_cast<std::size_t>(rc.queues);
                rc.feedback = FeedbackRateParams{detail::number_or_list(fb, "min_correlation", n),
                                                 detail::number_or_list(fb, "delay_variance", n)};
            }
            f.rates = rc;
        }

        if (j.contains("codebook_design")) {
            const auto& d = j.at("codebook_design");
            CodebookDesignConfig dc;
            dc.samples = detail::parse_samples(d);
            dc.lambda_max = detail::get_or(d, "lambda_max", 1.0);
            if (d.contains("max_distortion")) dc.max_distortion = d.at("max_distortion").get<double>();
            if (d.contains("rate_caps")) {
                RateCaps caps;
                caps.hems_bits_per_second = detail::get_or(d.at("rate_caps"), "hems_bits_per_second", caps.hems_bits_per_second);
                caps.cems_bits_per_interval =
                    detail::get_or(d.at("rate_caps"), "cems_bits_per_interval", caps.cems_bits_per_interval);
                dc.caps = caps;
            }
            if (!dc.max_distortion == !dc.caps)
                throw ConfigError("codebook_design needs exactly one of 'max_distortion' or 'rate_caps'");
            dc.window = detail::get_or<std::int64_t>(d, "arrival_window", 1);
            dc.interval_seconds = c.interval_seconds;
            dc.options.max_codes = detail::get_or(d, "max_codes", dc.options.max_codes);
            dc.options.max_pulse = c.max_pulse;
            dc.options.max_iterations = detail::get_or(d, "max_iterations", dc.options.max_iterations);
            const auto metric = detail::get_or<std::string>(d, "metric", "pulse_squared_error");
            if (metric == "pulse_squared_error") dc.options.metric = DistortionMetric::pulse_squared_error;
            else if (metric == "parameter_squared_error") dc.options.metric = DistortionMetric::parameter_squared_error;
            else throw ConfigError("codebook_design.metric must be pulse_squared_error or parameter_squared_error");
            f.design = dc;
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed scenario: ") + ex.what());
    }
    return f;
}

inline ScenarioFile load_scenario_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& ex) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + ex.what());
    }
    return scenario_from_json(j, path.parent_path());
}

} // namespace ddls
