#include "arbmarl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "arbmarl/errors.hpp"
#include "arbmarl/io.hpp"
#include "arbmarl/lem.hpp"
#include "arbmarl/lfm.hpp"
#include "arbmarl/scenario.hpp"
#include "arbmarl/trainer.hpp"

namespace arbmarl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

std::vector<int> agent_ids(const MarketData& m) {
    std::vector<int> ids;
    for (const auto& a : m.aggregators) ids.push_back(a.id);
    return ids;
}

// Solver output to ten significant digits, which hides interior-point round-off.
std::string solver_number(double x) {
    if (std::abs(x) < 1e-9) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

double num(const json& j, const char* key, double fallback) {
    const auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw SchemaError(std::string("'") + key + "' must be a number");
    return it->get<double>();
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
    std::string preset = "feeder11";
    std::uint64_t seed = 7;
    std::size_t weeks = 0;
    std::string out;
};

void gen_data(const GenDataArgs& a, std::ostream& out) {
    auto cfg = scenario::preset(a.preset, a.seed);
    if (a.weeks) cfg.synthetic->weeks = a.weeks;
    const auto data = scenario::generate_synthetic_data(*cfg.synthetic);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    grid::save_network(cfg.network, dir / "network.json");
    io::save_prices(dir / "prices.csv", data.prices);
    io::save_profiles(dir / "profiles.csv", data.profiles);

    cfg.synthetic.reset();
    cfg.prices_path = "prices.csv";
    cfg.profiles_path = "profiles.csv";
    auto doc = scenario::config_to_json(cfg);
    doc["network"] = "network.json";
    auto f = open_out(dir / "scenario.json");
    f << doc.dump(2) << '\n';
    out << "wrote " << data.prices.hours() << " hours (" << data.prices.hours() / cfg.episode_hours << " weeks) for "
        << data.profiles.size() << " aggregators to " << dir.string() << '\n';
}

// ---------------------------------------------------------------- clear-lem

lem::LemCell cell_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("each LEM cell must be an object");
    lem::LemCell c;
    c.marginal_cost = num(j, "marginal_cost", 0.0);
    c.demand = num(j, "demand", 0.0);
    c.gen_cap = num(j, "gen_cap", 0.0);
    c.apparent_cap = num(j, "apparent_cap", c.gen_cap);
    c.tan_theta = num(j, "tan_theta", 0.0);
    c.withhold_factor = num(j, "withhold_factor", 1.0);
    c.import_price = num(j, "import_price", 0.0);
    c.export_price = num(j, "export_price", 0.0);
    return c;
}

void clear_lem_cmd(const std::string& input, std::ostream& out) {
    const json doc = read_json(input);
    const json cells = doc.is_object() && doc.contains("cells") ? doc.at("cells") : json::array({doc});
    json result = json::array();
    for (const auto& j : cells) {
        const auto c = cell_from_json(j);
        const auto d = lem::clear_cell(c);
        result.push_back({{"generation", d.generation},
                          {"reactive", d.reactive},
                          {"import", d.import_},
                          {"export", d.export_},
                          {"demand", d.demand},
                          {"cost", d.cost},
                          {"reference_cost", lem::reference_cost(c)}});
    }
    out << result.dump(2) << '\n';
}

// ---------------------------------------------------------------- clear-lfm

struct ClearLfmArgs {
    std::string input, network, dump_lp, mode = "margin";
};

void clear_lfm_cmd(const ClearLfmArgs& a, std::ostream& out) {
    const json doc = read_json(a.input);
    grid::Network net;
    if (!a.network.empty())
        net = grid::load_network(a.network);
    else if (doc.contains("network"))
        net = doc.at("network").is_string()
                  ? grid::load_network(fs::path(a.input).parent_path() / doc.at("network").get<std::string>())
                  : grid::network_from_json(doc.at("network"));
    else
        throw SchemaError("no network given (use --network or a 'network' key)");
    const auto topo = grid::validate_and_order(net);

    lfm::LfmInput in;
    try {
        in.schedule = doc.at("schedule").get<std::vector<std::vector<double>>>();
        if (doc.contains("generation")) in.generation = doc.at("generation").get<std::vector<std::vector<double>>>();
        in.first_hour = doc.value("first_hour", std::size_t{0});
        in.price_cap = doc.value("price_cap", 1000.0);
        for (const auto& b : doc.at("bids")) {
            lfm::FlexBid bid;
            bid.node = b.at("node").get<int>();
            bid.hour = b.value("hour", 0);
            bid.up_price = num(b, "up_price", 0.0);
            bid.dw_price = num(b, "dw_price", 0.0);
            bid.up_cap = num(b, "up_cap", 0.0);
            bid.dw_cap = num(b, "dw_cap", 0.0);
            in.bids.push_back(bid);
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("LFM input: ") + e.what());
    }

    if (!a.dump_lp.empty()) {
        lfm::BuildOptions bo;
        bo.names = true;
        const auto model = lfm::build_lfm(net, topo, in, bo);
        auto f = open_out(a.dump_lp);
        lp::write_lp_format(model.problem, f);
    }
    lfm::ClearOptions opt;
    opt.mode = a.mode == "literal" ? lfm::SettlementMode::Literal : lfm::SettlementMode::Margin;
    const auto r = lfm::clear_lfm(net, topo, in, opt);
    out << "status " << lp::to_string(r.status) << '\n';
    for (std::size_t h = 0; h < in.hours(); ++h)
        for (std::size_t n = 0; n < net.nodes.size(); ++n) {
            if (n == topo.slack) continue;
            out << "hour " << h << " node " << net.nodes[n].id << " g_up=" << solver_number(r.up[h][n])
                << " g_dw=" << solver_number(r.dw[h][n]) << " dlmp=" << solver_number(r.dlmp[h][n]) << '\n';
        }
    for (std::size_t n = 0; n < net.nodes.size(); ++n)
        if (n != topo.slack)
            out << "settlement node " << net.nodes[n].id << " " << solver_number(r.settlement[n]) << '\n';
    out << "objective " << solver_number(r.objective) << '\n';
}

// ---------------------------------------------------------------- train / evaluate / test

struct RunArgs {
    std::string config, out, checkpoint, weeks = "eval", variant = "as_configured", log;
    std::uint64_t seed = 0;
    bool seed_set = false;
    long episodes = -1;
    unsigned jobs = 1;
    bool quiet = false;
};

std::uint64_t pick_seed(const RunArgs& a, const scenario::ScenarioConfig& cfg) {
    if (a.seed_set) return a.seed;
    return cfg.seeds.empty() ? 1 : cfg.seeds.front();
}

void train_cmd(const RunArgs& a, std::ostream& out, std::ostream& err) {
    auto cfg = scenario::load_config(a.config);
    if (a.episodes >= 0) cfg.trainer.episodes = static_cast<std::size_t>(a.episodes);
    const auto variant = scenario::variant_from_string(a.variant);
    const auto market = scenario::build_market(cfg, variant);
    const auto split = scenario::week_split(cfg, market->weeks());
    const auto seed = pick_seed(a, cfg);

    train::Trainer trainer(market, cfg.trainer, split, seed);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    const auto ids = agent_ids(*market);
    auto result = trainer.train(cfg.trainer.episodes, [&](std::size_t e) {
        if (!a.quiet && (e % cfg.trainer.eval_every == 0 || e == cfg.trainer.episodes))
            err << "episode " << e << "/" << cfg.trainer.episodes << " sigma " << trainer.sigma() << '\n';
    });
    trainer.save(dir / "checkpoints");
    {
        auto f = open_out(dir / "training_curve.csv");
        io::write_curve(f, result.curve);
    }
    {
        auto doc = scenario::config_to_json(cfg);
        doc["seeds"] = {seed};
        auto f = open_out(dir / "config.json");
        f << doc.dump(2) << '\n';
    }
    if (!split.eval.empty()) {
        const auto scores = trainer.evaluate(split.eval);
        auto f = open_out(dir / "eval_scores.csv");
        io::write_scores(f, scores, ids);
    }
    out << "trained " << cfg.trainer.episodes << " episodes (" << scenario::to_string(variant) << ", seed " << seed
        << "), " << result.infeasible_hours << " infeasible LFM hours; outputs in " << dir.string() << '\n';
}

std::vector<std::size_t> parse_weeks(const std::string& spec, const train::WeekSplit& split) {
    if (spec == "eval") return split.eval;
    if (spec == "test") return split.test;
    if (spec == "train") return split.train;
    std::vector<std::size_t> weeks;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            const long w = std::stol(item, &pos);
            if (pos != item.size() || w < 0) throw std::invalid_argument(item);
            weeks.push_back(static_cast<std::size_t>(w));
        } catch (const std::logic_error&) {
            throw ConfigError("bad week list '" + spec + "'");
        }
    }
    return weeks;
}

std::vector<train::WeekScores> run_weeks(const std::shared_ptr<const MarketData>& market,
                                         const train::JointPolicy& policy, const std::vector<std::size_t>& weeks,
                                         unsigned jobs, std::vector<env::HourLog>* log) {
    for (std::size_t w : weeks)
        if (w >= market->weeks()) throw UnknownWeek("week " + std::to_string(w) + " is not in the dataset");
    std::vector<train::WeekScores> scores(weeks.size());
    std::vector<std::vector<env::HourLog>> logs(weeks.size());
    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr failure;
    auto worker = [&] {
        env::Environment env(market);
        for (std::size_t k = next++; k < weeks.size(); k = next++) {
            try {
                scores[k] = train::rollout(env, weeks[k], policy, log ? &logs[k] : nullptr);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(weeks.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    if (log)
        for (auto& l : logs) log->insert(log->end(), l.begin(), l.end());
    return scores;
}

void print_table(std::ostream& out, const std::vector<train::WeekScores>& scores, const std::vector<int>& ids,
                 const MarketData& market) {
    out << std::left << std::setw(12) << "aggregator" << std::setw(14) << "strategy" << std::right << std::setw(18)
        << "first-stage" << std::setw(18) << "second-stage" << std::setw(18) << "total" << '\n';
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (const auto& w : scores) {
            s1 += w.agents[i].stage1;
            s2 += w.agents[i].stage2;
        }
        const double n = static_cast<double>(std::max<std::size_t>(1, scores.size()));
        out << std::left << std::setw(12) << ids[i] << std::setw(14) << to_string(market.aggregators[i].strategy)
            << std::right << std::fixed << std::setprecision(2) << std::setw(18) << s1 / n << std::setw(18) << s2 / n
            << std::setw(18) << (s1 + s2) / n << '\n';
        out.unsetf(std::ios::floatfield);
    }
    out << "mean over " << scores.size() << " week(s), EUR\n";
}

void evaluate_cmd(const RunArgs& a, bool test_mode, std::ostream& out) {
    const auto cfg = scenario::load_config(a.config);
    const auto market = scenario::build_market(cfg, scenario::variant_from_string(a.variant));
    const auto split = scenario::week_split(cfg, market->weeks());
    const auto weeks = parse_weeks(test_mode ? "test" : a.weeks, split);
    if (weeks.empty()) throw ConfigError("no weeks to evaluate");

    train::Trainer trainer(market, cfg.trainer, split, pick_seed(a, cfg));
    if (a.checkpoint.empty()) throw ConfigError("--checkpoint is required");
    trainer.load(a.checkpoint);
    std::vector<env::HourLog> log;
    const auto scores = run_weeks(market, trainer.greedy_policy(), weeks, a.jobs, a.log.empty() ? nullptr : &log);
    const auto ids = agent_ids(*market);
    if (!a.log.empty()) {
        auto f = open_out(a.log);
        io::write_transition_log(f, log, ids);
    }
    if (!a.out.empty()) {
        auto f = open_out(a.out);
        io::write_scores(f, scores, ids);
    }
    if (test_mode || a.out.empty()) {
        if (test_mode)
            print_table(out, scores, ids, *market);
        else
            io::write_scores(out, scores, ids);
    }
}

// ---------------------------------------------------------------- replay

bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

void replay_cmd(const RunArgs& a, std::ostream& out) {
    const auto cfg = scenario::load_config(a.config);
    const auto market = scenario::build_market(cfg, scenario::variant_from_string(a.variant));
    const auto ids = agent_ids(*market);
    std::ifstream in(a.log);
    if (!in) throw SchemaError("cannot read " + a.log);
    const auto log = io::read_transition_log(in, ids);

    env::Environment env(market);
    std::size_t hours = 0, mismatches = 0, identity_failures = 0;
    for (std::size_t k = 0; k < log.size(); ++k) {
        const auto& rec = log[k];
        if (rec.hour == 0) env.reset(rec.week);
        if (env.week() != rec.week || env.hour() != rec.hour)
            throw SchemaError("log is not a sequence of whole weeks starting at hour 0");
        std::vector<double> a1;
        std::vector<env::FlexAction> a2;
        for (const auto& ag : rec.agents) {
            a1.push_back(ag.a_lem);
            a2.push_back({ag.up_price, ag.dw_price});
        }
        env.step_stage1(a1);
        const auto s2 = env.step_stage2(a2);
        ++hours;
        if (s2.log.lfm_feasible != rec.lfm_feasible) ++mismatches;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& x = s2.log.agents[i];
            const auto& y = rec.agents[i];
            const double fx[] = {x.schedule, x.generation, x.g_up, x.g_dw, x.dlmp, x.c_lem, x.c_lem_ref,
                                 x.c_flx,    x.c_bal,      x.r_lem, x.r_lfm, x.r_pr};
            const double fy[] = {y.schedule, y.generation, y.g_up, y.g_dw, y.dlmp, y.c_lem, y.c_lem_ref,
                                 y.c_flx,    y.c_bal,      y.r_lem, y.r_lfm, y.r_pr};
            if (!std::equal(std::begin(fx), std::end(fx), std::begin(fy), same)) ++mismatches;
            if (y.r_lfm != -y.c_flx - y.c_bal || y.r_pr != -y.c_lem - y.c_flx - y.c_bal ||
                y.r_lem != y.c_lem_ref - y.c_lem)
                ++identity_failures;
        }
    }
    out << "replayed " << hours << " hours: " << mismatches << " mismatching agent-hours, " << identity_failures
        << " reward identity failures\n";
    if (mismatches || identity_failures) throw Error("replay does not reproduce the log");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Strategic bidding across a local energy market, a flexibility market and balancing", "arbmarl"};
    app.require_subcommand(1);

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset and scenario config");
    gen->add_option("--preset", gd.preset, "feeder11, four_node or two_bus")->capture_default_str();
    gen->add_option("--seed", gd.seed, "generator seed")->capture_default_str();
    gen->add_option("--weeks", gd.weeks, "number of weeks (default: preset)");
    gen->add_option("--out", gd.out, "output directory")->required();

    std::string lem_input;
    auto* clem = app.add_subcommand("clear-lem", "clear LEM cells given as JSON");
    clem->add_option("--input", lem_input, "JSON cell or {\"cells\": [...]}")->required()->check(CLI::ExistingFile);

    ClearLfmArgs cl;
    auto* clfm = app.add_subcommand("clear-lfm", "clear a flexibility market instance given as JSON");
    clfm->add_option("--input", cl.input, "JSON with schedule, bids and optionally network")
        ->required()
        ->check(CLI::ExistingFile);
    clfm->add_option("--network", cl.network, "network JSON (overrides the input's)")->check(CLI::ExistingFile);
    clfm->add_option("--dump-lp", cl.dump_lp, "write the LP in CPLEX LP format");
    clfm->add_option("--mode", cl.mode, "settlement mode")->check(CLI::IsMember({"margin", "literal"}));

    RunArgs ra;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", ra.config, "scenario config JSON")->required()->check(CLI::ExistingFile);
        sub->add_option("--scenario", ra.variant, "as_configured, stand_alone, one_arb or all_arb");
        auto* s = sub->add_option("--seed", ra.seed, "training seed (default: first config seed)");
        s->each([&](const std::string&) { ra.seed_set = true; });
    };
    auto* tr = app.add_subcommand("train", "train the agents of a scenario");
    add_common(tr);
    tr->add_option("--out", ra.out, "output directory")->required();
    tr->add_option("--episodes", ra.episodes, "override the configured episode count");
    tr->add_flag("--quiet", ra.quiet, "no progress output");

    auto* ev = app.add_subcommand("evaluate", "noise-free scores of a checkpoint");
    add_common(ev);
    ev->add_option("--checkpoint", ra.checkpoint, "checkpoint directory")->required();
    ev->add_option("--weeks", ra.weeks, "eval, test, train or a comma-separated list")->capture_default_str();
    ev->add_option("--jobs", ra.jobs, "weeks evaluated concurrently")->check(CLI::PositiveNumber);
    ev->add_option("--out", ra.out, "scores CSV (default: stdout)");
    ev->add_option("--log", ra.log, "write the transition log");

    auto* te = app.add_subcommand("test", "score a checkpoint on the test weeks");
    add_common(te);
    te->add_option("--checkpoint", ra.checkpoint, "checkpoint directory")->required();
    te->add_option("--jobs", ra.jobs, "weeks evaluated concurrently")->check(CLI::PositiveNumber);
    te->add_option("--out", ra.out, "scores CSV");
    te->add_option("--log", ra.log, "write the transition log");

    auto* rp = app.add_subcommand("replay", "re-settle a transition log and check reward identities");
    add_common(rp);
    rp->add_option("--log", ra.log, "transition log CSV")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*gen) gen_data(gd, out);
        else if (*clem) clear_lem_cmd(lem_input, out);
        else if (*clfm) clear_lfm_cmd(cl, out);
        else if (*tr) train_cmd(ra, out, err);
        else if (*ev) evaluate_cmd(ra, false, out);
        else if (*te) evaluate_cmd(ra, true, out);
        else if (*rp) replay_cmd(ra, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace arbmarl
