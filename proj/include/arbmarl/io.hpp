#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "arbmarl/envgame.hpp"
#include "arbmarl/market_data.hpp"
#include "arbmarl/trainer.hpp"

namespace arbmarl::io {

/// Minimal CSV table: header names plus rows of raw cells. No quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws SchemaError if absent.
    std::size_t column(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);
/// Parses a numeric cell; throws NonFiniteValue or SchemaError.
double parse_number(const std::string& cell);
/// Shortest text that reads back to the same double.
std::string format_number(double x);

/// hour,p_im,p_ex,p_bal_pos,p_bal_neg. Length must be a multiple of
/// `episode_hours`. Throws SchemaError, NonFiniteValue or BadLength.
PriceSeries load_prices(const std::filesystem::path& path, std::size_t episode_hours = 168);
PriceSeries read_prices(std::istream& in, std::size_t episode_hours = 168);
void write_prices(std::ostream& out, const PriceSeries& prices);
void save_prices(const std::filesystem::path& path, const PriceSeries& prices);

struct Profile {
    std::vector<double> gen_cap, demand, s_cap;
};

/// hour,aggregator,gen_cap,demand[,s_cap] in long format. Returns one profile
/// per aggregator id in ascending id order together with the ids.
std::vector<std::pair<int, Profile>> read_profiles(std::istream& in);
std::vector<std::pair<int, Profile>> load_profiles(const std::filesystem::path& path);
void write_profiles(std::ostream& out, const std::vector<std::pair<int, Profile>>& profiles);
void save_profiles(const std::filesystem::path& path, const std::vector<std::pair<int, Profile>>& profiles);

/// week,hour,agent,lfm_feasible,a_lem,up_price,dw_price,schedule,generation,
/// g_up,g_dw,dlmp,c_lem,c_lem_ref,c_flx,c_bal,r_lem,r_lfm,r_pr
/// Agents are written by aggregator id.
void write_transition_log(std::ostream& out, const std::vector<env::HourLog>& log, const std::vector<int>& agent_ids);
std::vector<env::HourLog> read_transition_log(std::istream& in, const std::vector<int>& agent_ids);

void write_curve(std::ostream& out, const std::vector<train::CurvePoint>& curve);
/// week,agent,stage1,stage2,total
void write_scores(std::ostream& out, const std::vector<train::WeekScores>& scores, const std::vector<int>& agent_ids);

}  // namespace arbmarl::io
