#include "arbmarl/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "arbmarl/errors.hpp"

namespace arbmarl::io {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::size_t parse_index(const std::string& cell) {
    const double x = parse_number(cell);
    if (x < 0.0 || x != std::floor(x)) throw SchemaError("expected a non-negative integer, got '" + cell + "'");
    return static_cast<std::size_t>(x);
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (t.header.empty()) {
            t.header = split(line);
            continue;
        }
        auto cells = split(line);
        if (cells.size() != t.header.size())
            throw SchemaError("row " + std::to_string(t.rows.size() + 1) + " has " + std::to_string(cells.size()) +
                              " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw SchemaError("empty CSV input");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_csv(in);
}

double parse_number(const std::string& cell) {
    if (cell.empty()) throw SchemaError("empty numeric cell");
    errno = 0;
    char* end = nullptr;
    const double x = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size()) throw SchemaError("not a number: '" + cell + "'");
    if (!std::isfinite(x)) throw NonFiniteValue("non-finite value '" + cell + "'");
    return x;
}

std::string format_number(double x) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

PriceSeries read_prices(std::istream& in, std::size_t episode_hours) {
    const auto t = read_csv(in);
    const std::size_t ch = t.column("hour"), ci = t.column("p_im"), ce = t.column("p_ex"),
                      cp = t.column("p_bal_pos"), cn = t.column("p_bal_neg");
    PriceSeries p;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (parse_index(row[ch]) != r) throw SchemaError("hours must run 0, 1, 2, ... without gaps");
        p.p_im.push_back(parse_number(row[ci]));
        p.p_ex.push_back(parse_number(row[ce]));
        p.p_bal_pos.push_back(parse_number(row[cp]));
        p.p_bal_neg.push_back(parse_number(row[cn]));
    }
    p.validate();
    if (p.hours() == 0 || (episode_hours && p.hours() % episode_hours != 0))
        throw BadLength(std::to_string(p.hours()) + " price rows are not a whole number of " +
                        std::to_string(episode_hours) + "-hour weeks");
    return p;
}

PriceSeries load_prices(const std::filesystem::path& path, std::size_t episode_hours) {
    auto in = open_in(path);
    return read_prices(in, episode_hours);
}

void write_prices(std::ostream& out, const PriceSeries& p) {
    p.validate();
    out << "hour,p_im,p_ex,p_bal_pos,p_bal_neg\n";
    for (std::size_t h = 0; h < p.hours(); ++h)
        out << h << ',' << format_number(p.p_im[h]) << ',' << format_number(p.p_ex[h]) << ','
            << format_number(p.p_bal_pos[h]) << ',' << format_number(p.p_bal_neg[h]) << '\n';
}

void save_prices(const std::filesystem::path& path, const PriceSeries& prices) {
    auto out = open_out(path);
    write_prices(out, prices);
}

std::vector<std::pair<int, Profile>> read_profiles(std::istream& in) {
    const auto t = read_csv(in);
    const std::size_t ch = t.column("hour"), ca = t.column("aggregator"), cg = t.column("gen_cap"),
                      cd = t.column("demand");
    const bool has_s = t.has_column("s_cap");
    const std::size_t cs = has_s ? t.column("s_cap") : 0;
    std::map<int, std::map<std::size_t, std::array<double, 3>>> by_agent;
    for (const auto& row : t.rows) {
        const double id = parse_number(row[ca]);
        if (id != std::floor(id)) throw SchemaError("aggregator ids must be integers");
        const double g = parse_number(row[cg]), d = parse_number(row[cd]);
        if (!by_agent[static_cast<int>(id)].emplace(parse_index(row[ch]), std::array<double, 3>{g, d, has_s ? parse_number(row[cs]) : g}).second)
            throw SchemaError("duplicate profile row for aggregator " + row[ca] + " hour " + row[ch]);
    }
    std::vector<std::pair<int, Profile>> out;
    for (auto& [id, hours] : by_agent) {
        Profile p;
        std::size_t expect = 0;
        for (auto& [h, v] : hours) {
            if (h != expect++) throw SchemaError("profile of aggregator " + std::to_string(id) + " has a gap");
            p.gen_cap.push_back(v[0]);
            p.demand.push_back(v[1]);
            p.s_cap.push_back(v[2]);
        }
        out.emplace_back(id, std::move(p));
    }
    return out;
}

std::vector<std::pair<int, Profile>> load_profiles(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_profiles(in);
}

void write_profiles(std::ostream& out, const std::vector<std::pair<int, Profile>>& profiles) {
    out << "hour,aggregator,gen_cap,demand,s_cap\n";
    for (const auto& [id, p] : profiles)
        for (std::size_t h = 0; h < p.gen_cap.size(); ++h)
            out << h << ',' << id << ',' << format_number(p.gen_cap[h]) << ',' << format_number(p.demand[h]) << ','
                << format_number(p.s_cap.empty() ? p.gen_cap[h] : p.s_cap[h]) << '\n';
}

void save_profiles(const std::filesystem::path& path, const std::vector<std::pair<int, Profile>>& profiles) {
    auto out = open_out(path);
    write_profiles(out, profiles);
}

namespace {

const char* kLogColumns[] = {"week",      "hour",   "agent",   "lfm_feasible", "a_lem",    "up_price", "dw_price",
                             "schedule",  "generation", "g_up", "g_dw",         "dlmp",     "c_lem",    "c_lem_ref",
                             "c_flx",     "c_bal",  "r_lem",   "r_lfm",        "r_pr"};

}  // namespace

void write_transition_log(std::ostream& out, const std::vector<env::HourLog>& log, const std::vector<int>& ids) {
    for (std::size_t k = 0; k < std::size(kLogColumns); ++k) out << (k ? "," : "") << kLogColumns[k];
    out << '\n';
    auto f = [](double x) { return format_number(x); };
    for (const auto& h : log) {
        if (h.agents.size() != ids.size()) throw DimensionMismatch("log row does not match the aggregator list");
        for (std::size_t i = 0; i < h.agents.size(); ++i) {
            const auto& a = h.agents[i];
            out << h.week << ',' << h.hour << ',' << ids[i] << ',' << (h.lfm_feasible ? 1 : 0) << ',' << f(a.a_lem)
                << ',' << f(a.up_price) << ',' << f(a.dw_price) << ',' << f(a.schedule) << ',' << f(a.generation)
                << ',' << f(a.g_up) << ',' << f(a.g_dw) << ',' << f(a.dlmp) << ',' << f(a.c_lem) << ','
                << f(a.c_lem_ref) << ',' << f(a.c_flx) << ',' << f(a.c_bal) << ',' << f(a.r_lem) << ','
                << f(a.r_lfm) << ',' << f(a.r_pr) << '\n';
        }
    }
}

std::vector<env::HourLog> read_transition_log(std::istream& in, const std::vector<int>& ids) {
    const auto t = read_csv(in);
    std::vector<std::size_t> col;
    for (const char* name : kLogColumns) col.push_back(t.column(name));
    const std::size_t n = ids.size();
    if (n == 0 || t.rows.size() % n != 0) throw BadLength("log rows are not a whole number of hours");
    std::vector<env::HourLog> log;
    for (std::size_t r = 0; r < t.rows.size(); r += n) {
        env::HourLog h;
        h.week = parse_index(t.rows[r][col[0]]);
        h.hour = parse_index(t.rows[r][col[1]]);
        h.lfm_feasible = parse_number(t.rows[r][col[3]]) != 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& row = t.rows[r + i];
            if (parse_index(row[col[0]]) != h.week || parse_index(row[col[1]]) != h.hour ||
                parse_number(row[col[2]]) != ids[i])
                throw SchemaError("log rows must list every aggregator in id order for each hour");
            auto v = [&](std::size_t k) { return parse_number(row[col[k]]); };
            env::AgentHour a;
            a.a_lem = v(4);
            a.up_price = v(5);
            a.dw_price = v(6);
            a.schedule = v(7);
            a.generation = v(8);
            a.g_up = v(9);
            a.g_dw = v(10);
            a.dlmp = v(11);
            a.c_lem = v(12);
            a.c_lem_ref = v(13);
            a.c_flx = v(14);
            a.c_bal = v(15);
            a.r_lem = v(16);
            a.r_lfm = v(17);
            a.r_pr = v(18);
            h.agents.push_back(a);
        }
        log.push_back(std::move(h));
    }
    return log;
}

void write_curve(std::ostream& out, const std::vector<train::CurvePoint>& curve) {
    out << "episode,agent,eval_score\n";
    for (const auto& p : curve) out << p.episode << ',' << p.agent << ',' << format_number(p.score) << '\n';
}

void write_scores(std::ostream& out, const std::vector<train::WeekScores>& scores, const std::vector<int>& ids) {
    out << "week,agent,stage1,stage2,total\n";
    for (const auto& w : scores)
        for (std::size_t i = 0; i < w.agents.size(); ++i)
            out << w.week << ',' << ids.at(i) << ',' << format_number(w.agents[i].stage1) << ','
                << format_number(w.agents[i].stage2) << ',' << format_number(w.agents[i].total()) << '\n';
}

}  // namespace arbmarl::io
