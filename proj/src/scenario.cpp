#include "arbmarl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "arbmarl/errors.hpp"
#include "json_util.hpp"

namespace arbmarl::scenario {

using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double solar(std::size_t hd) {
    if (hd < 6 || hd > 18) return 0.0;
    return std::max(0.0, std::sin(std::numbers::pi * (static_cast<double>(hd) - 6.0) / 12.0));
}

double demand_cycle(std::size_t hd) { return std::cos(kTwoPi * (static_cast<double>(hd) - 19.0) / 24.0); }

}  // namespace

SyntheticData generate_synthetic_data(const SyntheticSpec& s) {
    if (s.weeks == 0 || s.episode_hours == 0) throw ConfigError("synthetic data needs at least one week");
    if (!(s.spread > 0.0 && s.spread <= 1.0)) throw ConfigError("price spread must lie in (0, 1]");
    if (!(s.base_price > 0.0)) throw ConfigError("base price must be positive");
    for (double x : {s.daily_amplitude, s.weekly_amplitude, s.price_noise, s.balancing_spread, s.profile_noise})
        if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("synthetic amplitudes must be finite and >= 0");

    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto noise = [&](double scale) { return s.deterministic ? 0.0 : scale * u(rng); };

    const std::size_t hours = s.weeks * s.episode_hours;
    SyntheticData out;
    auto& p = out.prices;
    for (std::size_t h = 0; h < hours; ++h) {
        const std::size_t hd = h % 24;
        const std::size_t dow = (h / 24) % 7;
        const double weekly = s.deterministic ? 0.0 : (dow < 5 ? 1.0 : -1.0) * s.weekly_amplitude;
        double im = s.base_price * (1.0 + s.daily_amplitude * demand_cycle(hd) + weekly) * (1.0 + noise(s.price_noise));
        im = std::max(im, 1.0);
        double z1, z2;
        if (s.deterministic) {
            z1 = std::sin(kTwoPi * static_cast<double>(hd) / 24.0);
            z2 = -z1;
        } else {
            z1 = u(rng);
            z2 = u(rng);
        }
        p.p_im.push_back(im);
        p.p_ex.push_back(s.spread * im);
        p.p_bal_pos.push_back(std::max(0.0, im * (1.0 + s.balancing_spread * z1)));
        p.p_bal_neg.push_back(std::max(0.0, im * (1.0 + s.balancing_spread * z2)));
    }
    for (const auto& [id, shape] : s.profiles) {
        io::Profile prof;
        for (std::size_t h = 0; h < hours; ++h) {
            const std::size_t hd = h % 24;
            const double g = (shape.gen_base + shape.gen_solar * solar(hd)) * (1.0 + noise(s.profile_noise));
            const double d =
                shape.demand_base * (1.0 + shape.demand_daily * demand_cycle(hd)) * (1.0 + noise(s.profile_noise));
            prof.gen_cap.push_back(std::max(0.0, g));
            prof.demand.push_back(std::max(0.0, d));
            prof.s_cap.push_back(std::max(1.0, shape.s_headroom) * prof.gen_cap.back());
        }
        out.profiles.emplace_back(id, std::move(prof));
    }
    return out;
}

Variant variant_from_string(const std::string& s) {
    if (s == "as_configured") return Variant::AsConfigured;
    if (s == "stand_alone" || s == "s-a") return Variant::StandAlone;
    if (s == "one_arb" || s == "one-arb") return Variant::OneArb;
    if (s == "all_arb" || s == "all-arb") return Variant::AllArb;
    throw ConfigError("unknown scenario variant '" + s + "' (as_configured, stand_alone, one_arb, all_arb)");
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::StandAlone: return "stand_alone";
        case Variant::OneArb: return "one_arb";
        case Variant::AllArb: return "all_arb";
        default: return "as_configured";
    }
}

namespace {

struct NodeLoad {
    double gen_min = 0.0, gen_max = 0.0, demand_min = 0.0, demand_max = 0.0, q = 0.0;
};

// Sizes node and line limits so that truthful schedules never congest while
// withholding the dispatchable generation behind a line can.
void size_network(grid::Network& net, const std::vector<AggregatorEntry>& aggs,
                  const std::vector<std::pair<int, ProfileShape>>& shapes, double noise, double headroom) {
    std::map<int, NodeLoad> load;
    std::map<int, double> withholdable;
    for (const auto& a : aggs) {
        const auto it = std::find_if(shapes.begin(), shapes.end(), [&](const auto& s) { return s.first == a.id; });
        const ProfileShape& sh = it->second;
        NodeLoad l;
        l.gen_min = sh.gen_base * (1.0 - noise);
        l.gen_max = (sh.gen_base + sh.gen_solar) * (1.0 + noise);
        l.demand_min = sh.demand_base * (1.0 - sh.demand_daily) * (1.0 - noise);
        l.demand_max = sh.demand_base * (1.0 + sh.demand_daily) * (1.0 + noise);
        l.q = 0.1 * sh.demand_base;
        load[a.node] = l;
        withholdable[a.node] = l.gen_min;
        auto& node = net.nodes[net.index_of(a.node)];
        node.s_max = node.g_max = 3.0 * (l.gen_max + l.demand_max) + 1.0;
        node.q_demand = {l.q};
    }
    const auto topo = grid::validate_and_order(net);
    const double inscribed = std::cos(std::numbers::pi / lfm::kPolygonSides);
    for (std::size_t li : topo.closed_lines) {
        std::vector<std::size_t> stack{static_cast<std::size_t>(topo.line_child[li])};
        double imp = 0.0, exp = 0.0, q = 0.0, hold = 0.0;
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            const int id = net.nodes[n].id;
            if (load.count(id)) {
                const auto& l = load[id];
                imp += std::max(0.0, l.demand_max - l.gen_min);
                exp += std::max(0.0, l.gen_max - l.demand_min);
                q += l.q;
                hold += withholdable[id];
            }
            for (std::size_t c : topo.child_lines[n]) stack.push_back(static_cast<std::size_t>(topo.line_child[c]));
        }
        net.lines[li].s_max = std::hypot(std::max(imp, exp), q) / inscribed + headroom * hold;
    }
}

grid::Network make_network(const std::vector<std::pair<int, int>>& closed, const std::vector<std::pair<int, int>>& open,
                           int nodes, const std::string& description) {
    grid::Network net;
    net.slack = 1;
    net.base_mva = 1.0;
    net.description = description;
    for (int id = 1; id <= nodes; ++id) {
        grid::NodeSpec n;
        n.id = id;
        n.tan_theta = 0.3;
        n.s_max = n.g_max = 100.0;
        net.nodes.push_back(n);
    }
    for (auto [f, t] : closed) net.lines.push_back({f, t, 0.005, 0.01, 100.0, true});
    for (auto [f, t] : open) net.lines.push_back({f, t, 0.005, 0.01, 100.0, false});
    return net;
}

train::TrainerConfig desk_trainer() {
    train::TrainerConfig t;
    t.gamma = 0.0;
    t.critic_lr = 1e-3;
    t.actor_lr = 1e-4;
    t.tau = 0.01;
    t.sigma = 0.6;
    t.kappa = 0.997;
    t.reward_scale = 0.01;
    t.bid_price_max = 100.0;
    t.minibatch = 64;
    t.episodes = 1500;
    return t;
}

}  // namespace

std::vector<std::string> preset_names() { return {"feeder11", "four_node", "two_bus"}; }

ScenarioConfig preset(const std::string& name, std::uint64_t seed) {
    ScenarioConfig c;
    SyntheticSpec s;
    s.seed = seed;
    double headroom = 0.15;
    if (name == "feeder11") {
        c.network = make_network({{1, 2}, {2, 3}, {3, 4}, {4, 5}, {1, 6}, {6, 7}, {7, 8}, {8, 9}, {9, 10}, {4, 11}},
                                 {{3, 10}, {5, 6}}, 11, "11-bus radial feeder with two normally open switches");
        for (int id = 2; id <= 11; ++id) {
            c.aggregators.push_back({id, id, 15.0 + 1.0 * (id - 2), Strategy::StandAlone});
            ProfileShape sh;
            sh.gen_base = 0.4 + 0.05 * (id % 4);
            sh.gen_solar = 0.8 + 0.1 * (id % 3);
            sh.demand_base = 1.1 + 0.1 * (id % 5);
            s.profiles.emplace_back(id, sh);
        }
        c.arbitrageur = 5;
    } else if (name == "four_node") {
        c.network = make_network({{1, 2}, {2, 3}, {2, 4}}, {}, 4, "4-bus feeder, two laterals behind node 2");
        const double cost[] = {36.0, 35.0, 37.0};
        const double base[] = {1.0, 1.2, 0.9};
        const double sun[] = {0.8, 0.8, 1.0};
        const double dem[] = {1.9, 2.2, 1.8};
        for (int k = 0; k < 3; ++k) {
            c.aggregators.push_back({k + 2, k + 2, cost[k], Strategy::StandAlone});
            ProfileShape sh;
            sh.gen_base = base[k];
            sh.gen_solar = sun[k];
            sh.demand_base = dem[k];
            s.profiles.emplace_back(k + 2, sh);
        }
        s.weeks = 8;
        headroom = 0.02;
        c.arbitrageur = 3;
        c.trainer = desk_trainer();
    } else if (name == "two_bus") {
        c.network = make_network({{1, 2}}, {}, 2, "slack and one aggregator node");
        c.aggregators.push_back({2, 2, 35.0, Strategy::Arbitrage});
        ProfileShape sh;
        sh.gen_base = 1.2;
        sh.gen_solar = 1.6;
        sh.demand_base = 2.0;
        s.profiles.emplace_back(2, sh);
        s.deterministic = true;
        s.weeks = 2;
        headroom = 0.02;
        c.arbitrageur = 2;
        c.split = train::WeekSplit{{0}, {1}, {}};
        c.trainer = desk_trainer();
        c.trainer.actor_lr = 3e-5;
        c.trainer.updates_per_episode = 60;
        c.trainer.kappa = 0.99;
        c.trainer.episodes = 300;
    } else {
        throw ConfigError("unknown preset '" + name + "'");
    }
    size_network(c.network, c.aggregators, s.profiles, s.deterministic ? 0.0 : s.profile_noise, headroom);
    c.synthetic = s;
    return c;
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return detail::optional<T, ConfigError>(j, key, fallback, "config");
}

lfm::SettlementMode settlement_from_string(const std::string& s) {
    if (s == "margin") return lfm::SettlementMode::Margin;
    if (s == "literal") return lfm::SettlementMode::Literal;
    throw ConfigError("unknown settlement mode '" + s + "' (margin or literal)");
}

SyntheticSpec synthetic_from_json(const json& j) {
    detail::check_keys<ConfigError>(j,
                                    {"seed", "weeks", "episode_hours", "base_price", "daily_amplitude",
                                     "weekly_amplitude", "price_noise", "spread", "balancing_spread", "profile_noise",
                                     "deterministic", "profiles"},
                                    "synthetic");
    SyntheticSpec s;
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    s.weeks = get_or<std::size_t>(j, "weeks", s.weeks);
    s.episode_hours = get_or<std::size_t>(j, "episode_hours", s.episode_hours);
    s.base_price = get_or(j, "base_price", s.base_price);
    s.daily_amplitude = get_or(j, "daily_amplitude", s.daily_amplitude);
    s.weekly_amplitude = get_or(j, "weekly_amplitude", s.weekly_amplitude);
    s.price_noise = get_or(j, "price_noise", s.price_noise);
    s.spread = get_or(j, "spread", s.spread);
    s.balancing_spread = get_or(j, "balancing_spread", s.balancing_spread);
    s.profile_noise = get_or(j, "profile_noise", s.profile_noise);
    s.deterministic = get_or(j, "deterministic", s.deterministic);
    if (auto it = j.find("profiles"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("synthetic.profiles must be an array");
        for (const auto& p : *it) {
            detail::check_keys<ConfigError>(
                p, {"aggregator", "gen_base", "gen_solar", "demand_base", "demand_daily", "s_headroom"},
                "synthetic.profiles");
            ProfileShape sh;
            sh.gen_base = get_or(p, "gen_base", sh.gen_base);
            sh.gen_solar = get_or(p, "gen_solar", sh.gen_solar);
            sh.demand_base = get_or(p, "demand_base", sh.demand_base);
            sh.demand_daily = get_or(p, "demand_daily", sh.demand_daily);
            sh.s_headroom = get_or(p, "s_headroom", sh.s_headroom);
            s.profiles.emplace_back(detail::required<int, ConfigError>(p, "aggregator", "synthetic.profiles"), sh);
        }
    }
    return s;
}

json synthetic_to_json(const SyntheticSpec& s) {
    json profiles = json::array();
    for (const auto& [id, sh] : s.profiles)
        profiles.push_back({{"aggregator", id},
                            {"gen_base", sh.gen_base},
                            {"gen_solar", sh.gen_solar},
                            {"demand_base", sh.demand_base},
                            {"demand_daily", sh.demand_daily},
                            {"s_headroom", sh.s_headroom}});
    return {{"seed", s.seed},
            {"weeks", s.weeks},
            {"episode_hours", s.episode_hours},
            {"base_price", s.base_price},
            {"daily_amplitude", s.daily_amplitude},
            {"weekly_amplitude", s.weekly_amplitude},
            {"price_noise", s.price_noise},
            {"spread", s.spread},
            {"balancing_spread", s.balancing_spread},
            {"profile_noise", s.profile_noise},
            {"deterministic", s.deterministic},
            {"profiles", profiles}};
}

}  // namespace

train::TrainerConfig trainer_from_json(const json& j) {
    detail::check_keys<ConfigError>(j,
                                    {"gamma", "minibatch", "buffer_capacity", "critic_lr", "actor_lr", "tau",
                                     "updates_per_episode", "sigma", "kappa", "episodes", "eval_every", "hidden",
                                     "bid_price_max", "reward_scale"},
                                    "trainer");
    train::TrainerConfig t;
    t.gamma = get_or(j, "gamma", t.gamma);
    t.minibatch = get_or<std::size_t>(j, "minibatch", t.minibatch);
    t.buffer_capacity = get_or<std::size_t>(j, "buffer_capacity", t.buffer_capacity);
    t.critic_lr = get_or(j, "critic_lr", t.critic_lr);
    t.actor_lr = get_or(j, "actor_lr", t.actor_lr);
    t.tau = get_or(j, "tau", t.tau);
    t.updates_per_episode = get_or<std::size_t>(j, "updates_per_episode", t.updates_per_episode);
    t.sigma = get_or(j, "sigma", t.sigma);
    t.kappa = get_or(j, "kappa", t.kappa);
    t.episodes = get_or<std::size_t>(j, "episodes", t.episodes);
    t.eval_every = get_or<std::size_t>(j, "eval_every", t.eval_every);
    t.hidden = get_or<std::vector<int>>(j, "hidden", t.hidden);
    t.bid_price_max = get_or(j, "bid_price_max", t.bid_price_max);
    t.reward_scale = get_or(j, "reward_scale", t.reward_scale);
    t.validate();
    return t;
}

json trainer_to_json(const train::TrainerConfig& t) {
    return {{"gamma", t.gamma},
            {"minibatch", t.minibatch},
            {"buffer_capacity", t.buffer_capacity},
            {"critic_lr", t.critic_lr},
            {"actor_lr", t.actor_lr},
            {"tau", t.tau},
            {"updates_per_episode", t.updates_per_episode},
            {"sigma", t.sigma},
            {"kappa", t.kappa},
            {"episodes", t.episodes},
            {"eval_every", t.eval_every},
            {"hidden", t.hidden},
            {"bid_price_max", t.bid_price_max},
            {"reward_scale", t.reward_scale}};
}

ScenarioConfig config_from_json(const json& doc, const std::filesystem::path& base) {
    detail::check_keys<ConfigError>(doc,
                                    {"network", "prices", "profiles", "synthetic", "aggregators", "trainer", "split",
                                     "seeds", "settlement", "price_cap", "episode_hours", "arbitrageur"},
                                    "config");
    ScenarioConfig c;
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base.empty() ? path : base / path;
    };

    const auto net = doc.find("network");
    if (net == doc.end()) throw ConfigError("config: missing key 'network'");
    c.network = net->is_string() ? grid::load_network(resolve(net->get<std::string>())) : grid::network_from_json(*net);

    if (doc.contains("prices")) c.prices_path = resolve(detail::required<std::string, ConfigError>(doc, "prices", "config"));
    if (doc.contains("profiles"))
        c.profiles_path = resolve(detail::required<std::string, ConfigError>(doc, "profiles", "config"));
    if (doc.contains("synthetic")) c.synthetic = synthetic_from_json(doc.at("synthetic"));
    if (c.prices_path.has_value() != c.profiles_path.has_value())
        throw ConfigError("config: 'prices' and 'profiles' go together");
    if (c.prices_path.has_value() == c.synthetic.has_value())
        throw ConfigError("config: give either 'prices' and 'profiles' or 'synthetic'");

    const auto aggs = doc.find("aggregators");
    if (aggs == doc.end() || !aggs->is_array()) throw ConfigError("config: 'aggregators' must be an array");
    for (const auto& a : *aggs) {
        detail::check_keys<ConfigError>(a, {"id", "node", "marginal_cost", "strategy"}, "aggregator");
        AggregatorEntry e;
        e.id = detail::required<int, ConfigError>(a, "id", "aggregator");
        e.node = detail::required<int, ConfigError>(a, "node", "aggregator");
        e.marginal_cost = detail::required<double, ConfigError>(a, "marginal_cost", "aggregator");
        e.strategy = strategy_from_string(get_or<std::string>(a, "strategy", "stand_alone"));
        c.aggregators.push_back(e);
    }
    if (doc.contains("trainer")) c.trainer = trainer_from_json(doc.at("trainer"));
    if (auto it = doc.find("split"); it != doc.end() && !(it->is_string() && it->get<std::string>() == "auto")) {
        detail::check_keys<ConfigError>(*it, {"train", "eval", "test"}, "split");
        train::WeekSplit s;
        s.train = get_or<std::vector<std::size_t>>(*it, "train", {});
        s.eval = get_or<std::vector<std::size_t>>(*it, "eval", {});
        s.test = get_or<std::vector<std::size_t>>(*it, "test", {});
        c.split = s;
    }
    c.seeds = get_or<std::vector<std::uint64_t>>(doc, "seeds", c.seeds);
    c.settlement = settlement_from_string(get_or<std::string>(doc, "settlement", "margin"));
    c.price_cap = get_or(doc, "price_cap", c.price_cap);
    c.episode_hours = get_or<std::size_t>(doc, "episode_hours", c.episode_hours);
    c.arbitrageur = get_or(doc, "arbitrageur", c.arbitrageur);
    if (c.synthetic && c.synthetic->episode_hours != c.episode_hours)
        throw ConfigError("config: synthetic.episode_hours differs from episode_hours");
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return config_from_json(doc, path.parent_path());
}

json config_to_json(const ScenarioConfig& c) {
    json doc;
    doc["network"] = grid::network_to_json(c.network);
    if (c.prices_path) doc["prices"] = c.prices_path->string();
    if (c.profiles_path) doc["profiles"] = c.profiles_path->string();
    if (c.synthetic) doc["synthetic"] = synthetic_to_json(*c.synthetic);
    json aggs = json::array();
    for (const auto& a : c.aggregators)
        aggs.push_back(
            {{"id", a.id}, {"node", a.node}, {"marginal_cost", a.marginal_cost}, {"strategy", to_string(a.strategy)}});
    doc["aggregators"] = aggs;
    doc["trainer"] = trainer_to_json(c.trainer);
    if (c.split)
        doc["split"] = {{"train", c.split->train}, {"eval", c.split->eval}, {"test", c.split->test}};
    else
        doc["split"] = "auto";
    doc["seeds"] = c.seeds;
    doc["settlement"] = c.settlement == lfm::SettlementMode::Margin ? "margin" : "literal";
    doc["price_cap"] = c.price_cap;
    doc["episode_hours"] = c.episode_hours;
    doc["arbitrageur"] = c.arbitrageur;
    return doc;
}

std::shared_ptr<MarketData> build_market(const ScenarioConfig& c, Variant variant) {
    auto m = std::make_shared<MarketData>();
    m->network = c.network;
    m->episode_hours = c.episode_hours;
    m->price_cap = c.price_cap;
    m->settlement = c.settlement;

    std::vector<std::pair<int, io::Profile>> profiles;
    if (c.synthetic) {
        auto data = generate_synthetic_data(*c.synthetic);
        m->prices = std::move(data.prices);
        profiles = std::move(data.profiles);
    } else {
        m->prices = io::load_prices(*c.prices_path, c.episode_hours);
        profiles = io::load_profiles(*c.profiles_path);
    }

    const bool has_arbitrageur = std::any_of(c.aggregators.begin(), c.aggregators.end(),
                                             [&](const auto& a) { return a.id == c.arbitrageur; });
    if (variant == Variant::OneArb && !has_arbitrageur)
        throw ConfigError("arbitrageur " + std::to_string(c.arbitrageur) + " is not an aggregator");
    for (const auto& a : c.aggregators) {
        const auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.first == a.id; });
        if (it == profiles.end()) throw ConfigError("no profile for aggregator " + std::to_string(a.id));
        Aggregator agg;
        agg.id = a.id;
        agg.node = a.node;
        agg.marginal_cost = a.marginal_cost;
        switch (variant) {
            case Variant::AsConfigured: agg.strategy = a.strategy; break;
            case Variant::StandAlone: agg.strategy = Strategy::StandAlone; break;
            case Variant::AllArb: agg.strategy = Strategy::Arbitrage; break;
            case Variant::OneArb:
                agg.strategy = a.id == c.arbitrageur ? Strategy::Arbitrage : Strategy::StandAlone;
                break;
        }
        agg.gen_cap = it->second.gen_cap;
        agg.demand = it->second.demand;
        agg.s_cap = it->second.s_cap;
        m->aggregators.push_back(std::move(agg));
    }
    m->finalize();
    return m;
}

train::WeekSplit week_split(const ScenarioConfig& c, std::size_t weeks) {
    train::WeekSplit s = c.split ? *c.split : train::WeekSplit::automatic(weeks);
    s.validate(weeks);
    return s;
}

}  // namespace arbmarl::scenario
