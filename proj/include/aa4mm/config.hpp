#ifndef AA4MM_CONFIG_HPP
#define AA4MM_CONFIG_HPP

// Experiment configuration from a JSON file plus command-line overrides.
//
// The file is one JSON object. Keys may be written flat ("micro.vision")
// or nested ({"micro": {"vision": ...}}); both spell the same setting.

#include "aa4mm/experiment.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>

namespace aa4mm {

struct ConfigOverrides {
    std::optional<std::string> variant;
    std::optional<std::size_t> birds;
    std::optional<SimTime> ticks;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;
    std::optional<SimTime> sample_interval;
    std::optional<std::string> out;
    std::optional<std::string> event_log;
};

namespace detail {

inline nlohmann::json flatten_config(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ConfigError("config: top level must be a JSON object");
    nlohmann::json flat = nlohmann::json::object();
    const nlohmann::json leaves = j.flatten();
    for (const auto& [pointer, value] : leaves.items()) {
        if (pointer.empty())
            continue; // the empty top-level object
        std::string key = pointer.substr(1);
        for (auto& c : key)
            if (c == '/')
                c = '.';
        if (flat.contains(key))
            throw ConfigError("config: key '" + key + "' given twice");
        flat[key] = value;
    }
    return flat;
}

inline double number(const nlohmann::json& v, const std::string& key)
{
    if (!v.is_number())
        throw ConfigError("config: '" + key + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t count(const nlohmann::json& v, const std::string& key)
{
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("config: '" + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

inline bool assign_boids(BoidsParams& p, const std::string& field, const nlohmann::json& v, const std::string& key)
{
    double* slot = field == "vision"              ? &p.vision
                   : field == "min_separation"    ? &p.min_separation
                   : field == "max_align_turn"    ? &p.max_align_turn
                   : field == "max_cohere_turn"   ? &p.max_cohere_turn
                   : field == "max_separate_turn" ? &p.max_separate_turn
                   : field == "speed"             ? &p.speed
                                                  : nullptr;
    if (!slot)
        return false;
    *slot = number(v, key);
    return true;
}

} // namespace detail

/// Build a validated configuration. Precedence: command line, then file,
/// then the variant's defaults.
inline ExperimentConfig resolve_config(const nlohmann::json& file, const ConfigOverrides& cli)
{
    const auto flat = file.is_null() ? nlohmann::json::object() : detail::flatten_config(file);

    std::string variant = "M";
    if (flat.contains("variant")) {
        if (!flat["variant"].is_string())
            throw ConfigError("config: 'variant' must be a string");
        variant = flat["variant"].get<std::string>();
    }
    if (cli.variant)
        variant = *cli.variant;

    ExperimentConfig cfg;
    cfg.variant = variant_spec(parse_variant(variant));
    double width = cfg.world.width(), height = cfg.world.height();

    for (const auto& [key, v] : flat.items()) {
        const auto dot = key.find('.');
        const std::string group = dot == std::string::npos ? "" : key.substr(0, dot);
        const std::string field = dot == std::string::npos ? key : key.substr(dot + 1);

        if (key == "variant")
            continue;
        if (key == "world.width")
            width = detail::number(v, key);
        else if (key == "world.height")
            height = detail::number(v, key);
        else if (group == "micro" && detail::assign_boids(cfg.micro, field, v, key))
            continue;
        else if (group == "macro" && detail::assign_boids(cfg.variant.macro_params, field, v, key))
            continue;
        else if (key == "cluster.d_prox")
            cfg.cluster.d_prox = detail::number(v, key);
        else if (key == "cluster.theta")
            cfg.cluster.theta = detail::number(v, key);
        else if (key == "cluster.min_size")
            cfg.cluster.min_size = detail::count(v, key);
        else if (key == "cluster.radius_mode") {
            if (!v.is_string())
                throw ConfigError("config: 'cluster.radius_mode' must be a string");
            try {
                cfg.cluster.radius_mode = parse_radius_mode(v.get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        } else if (key == "ratio") {
            if (detail::count(v, key) != cfg.variant.ratio)
                throw ConfigError("config: ratio " + v.dump() + " is invalid for variant " + variant);
        } else if (key == "birds")
            cfg.birds = detail::count(v, key);
        else if (key == "ticks")
            cfg.horizon = detail::count(v, key);
        else if (key == "reps")
            cfg.reps = detail::count(v, key);
        else if (key == "seed")
            cfg.base_seed = detail::count(v, key);
        else if (key == "sample_interval")
            cfg.sample_interval = detail::count(v, key);
        else
            throw ConfigError("config: unknown key '" + key + "'");
    }

    try {
        cfg.world = TorusWorld(width, height);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    if (cli.birds)
        cfg.birds = *cli.birds;
    if (cli.ticks)
        cfg.horizon = *cli.ticks;
    if (cli.reps)
        cfg.reps = *cli.reps;
    if (cli.seed)
        cfg.base_seed = *cli.seed;
    if (cli.sample_interval)
        cfg.sample_interval = *cli.sample_interval;
    if (cli.out)
        cfg.out_path = *cli.out;
    if (cli.event_log)
        cfg.event_log_path = *cli.event_log;

    try {
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

inline nlohmann::json load_config_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

} // namespace aa4mm

#endif // AA4MM_CONFIG_HPP
