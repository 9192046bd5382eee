#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arbmarl/io.hpp"
#include "arbmarl/market_data.hpp"
#include "arbmarl/trainer.hpp"

namespace arbmarl::scenario {

/// Shape of one aggregator's synthetic profiles, in MWh per hour.
struct ProfileShape {
    double gen_base = 0.0;      // dispatchable part, available all day
    double gen_solar = 0.0;     // daytime peak added on a half-sine between 06:00 and 18:00
    double demand_base = 0.0;
    double demand_daily = 0.2;  // relative amplitude of the evening-peaking demand cycle
    double s_headroom = 1.2;    // apparent capacity as a multiple of generation capacity
};

struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::size_t weeks = 52;
    std::size_t episode_hours = 168;
    double base_price = 50.0;
    double daily_amplitude = 0.25;
    double weekly_amplitude = 0.1;
    double price_noise = 0.05;
    double spread = 0.9;            // export price as a share of the import price
    double balancing_spread = 0.2;  // relative spread of imbalance prices around the import price
    double profile_noise = 0.05;    // relative uniform noise on generation and demand
    bool deterministic = false;     // repeat one noiseless day
    std::vector<std::pair<int, ProfileShape>> profiles;  // by aggregator id
};

struct SyntheticData {
    PriceSeries prices;
    std::vector<std::pair<int, io::Profile>> profiles;
};

/// Seeded daily and weekly price and profile cycles with bounded noise.
/// Export prices are exactly spread * import price; imbalance prices are
/// import prices perturbed by independent relative noise and kept >= 0.
SyntheticData generate_synthetic_data(const SyntheticSpec& spec);

struct AggregatorEntry {
    int id = 0;
    int node = 0;
    double marginal_cost = 0.0;
    Strategy strategy = Strategy::StandAlone;
};

enum class Variant { AsConfigured, StandAlone, OneArb, AllArb };
Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);

struct ScenarioConfig {
    grid::Network network;
    std::optional<std::filesystem::path> prices_path, profiles_path;  // resolved against the config directory
    std::optional<SyntheticSpec> synthetic;
    std::vector<AggregatorEntry> aggregators;
    train::TrainerConfig trainer;
    std::optional<train::WeekSplit> split;  // automatic when absent
    std::vector<std::uint64_t> seeds{1};
    lfm::SettlementMode settlement = lfm::SettlementMode::Margin;
    double price_cap = 1000.0;
    std::size_t episode_hours = 168;
    int arbitrageur = 5;  // aggregator made the arbitrageur by the one-arb variant
};

/// Built-in scenarios: "feeder11", "four_node", "two_bus".
std::vector<std::string> preset_names();
/// The preset's network, aggregators, synthetic data spec (with `seed`) and
/// trainer defaults. Throws ConfigError for unknown names.
ScenarioConfig preset(const std::string& name, std::uint64_t seed = 7);

/// Throws ConfigError (unknown keys, bad values) or the grid errors.
ScenarioConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig load_config(const std::filesystem::path& path);
/// Network inline; file paths written as given.
nlohmann::json config_to_json(const ScenarioConfig& config);

nlohmann::json trainer_to_json(const train::TrainerConfig& config);
train::TrainerConfig trainer_from_json(const nlohmann::json& doc);

/// Loads or generates the data and assembles the market for a strategy variant.
std::shared_ptr<MarketData> build_market(const ScenarioConfig& config, Variant variant = Variant::AsConfigured);

train::WeekSplit week_split(const ScenarioConfig& config, std::size_t weeks);

}  // namespace arbmarl::scenario
