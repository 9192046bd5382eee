// Acceptance suite: one PASS/FAIL line per criterion. Criteria can be
// selected by name on the command line; all of them run by default.
// `--report FILE` appends the lines to FILE as well.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "arbmarl/balancing.hpp"
#include "arbmarl/io.hpp"
#include "arbmarl/lem.hpp"
#include "arbmarl/lfm.hpp"
#include "arbmarl/neural.hpp"
#include "arbmarl/scenario.hpp"
#include "arbmarl/trainer.hpp"
#include "oracles/action_grid.hpp"
#include "oracles/lem_lp.hpp"
#include "oracles/simplex.hpp"
#include "support/gradcheck.hpp"
#include "support/networks.hpp"

using namespace arbmarl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Random radial feeder of 2..8 nodes with one bid per non-slack node. Line
// ratings are low enough that a good share of schedules congest.
struct RandomFeeder {
    grid::Network net;
    lfm::LfmInput input;
};

RandomFeeder random_feeder(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomFeeder f;
    auto& net = f.net;
    net.slack = 1;
    const int n = 2 + static_cast<int>(rng() % 7);
    for (int i = 1; i <= n; ++i) {
        auto nd = testnet::node(i, 0.8 + 2.0 * u(rng), 0.8 + 2.0 * u(rng), 0.5 * u(rng));
        nd.q_demand = {0.2 * u(rng)};
        nd.v_min = 0.9;
        nd.v_max = 1.1;
        net.nodes.push_back(nd);
    }
    for (int i = 2; i <= n; ++i)
        net.lines.push_back(testnet::line(1 + static_cast<int>(rng() % (i - 1)), i, 0.5 + 2.0 * u(rng),
                                          0.02 * u(rng), 0.02 * u(rng)));
    auto& in = f.input;
    in.schedule.assign(1, std::vector<double>(static_cast<std::size_t>(n), 0.0));
    in.generation.assign(1, std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 2; i <= n; ++i) {
        const auto k = static_cast<std::size_t>(i - 1);
        in.schedule[0][k] = -1.2 + 2.0 * u(rng);
        in.generation[0][k] = std::max(0.0, in.schedule[0][k]) + 0.3 * u(rng);
        in.bids.push_back({i, 0, 5.0 + 95.0 * u(rng), 5.0 + 95.0 * u(rng), 1.5 * u(rng), 0.5 * u(rng)});
    }
    return f;
}

Outcome lp_matches_reference() {
    std::mt19937_64 rng(101);
    int optimal = 0, infeasible = 0, mismatches = 0;
    double worst_obj = 0.0, worst_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto f = random_feeder(rng);
        const auto topo = grid::validate_and_order(f.net);
        const auto model = lfm::build_lfm(f.net, topo, f.input);
        const auto ipm = lp::solve_lp(model.problem);
        const auto ref = oracle::simplex_solve(model.problem);
        if (ref.status != oracle::SimplexStatus::Optimal) {
            ++infeasible;
            if (ipm.status != lp::LpStatus::Infeasible) ++mismatches;
            continue;
        }
        ++optimal;
        if (!ipm.optimal()) {
            ++mismatches;
            continue;
        }
        worst_obj = std::max(worst_obj, std::abs(ipm.objective - ref.objective) / std::max(1.0, std::abs(ref.objective)));
        worst_gap = std::max(worst_gap, ipm.duality_gap());
    }
    return {mismatches == 0 && worst_obj <= 1e-6 && worst_gap <= 1e-6,
            fmt("%d optimal, %d infeasible, %d status mismatches, worst objective rel err %.2e, worst gap %.2e",
                optimal, infeasible, mismatches, worst_obj, worst_gap)};
}

// Finite differences of the optimal LP objective, taken on the reference
// simplex so that solver tolerance does not enter the difference quotient.
Outcome dlmp_matches_finite_differences() {
    constexpr double eps = 1e-4;
    std::mt19937_64 rng(202);
    int found = 0, trials = 0, degenerate = 0;
    double worst = 0.0;
    while (found < 50 && trials < 5000) {
        ++trials;
        const auto f = random_feeder(rng);
        const auto topo = grid::validate_and_order(f.net);
        const auto model = lfm::build_lfm(f.net, topo, f.input);
        const auto sol = lp::solve_lp(model.problem);
        if (!sol.optimal() || sol.objective < 1e-3) continue;
        const auto base = oracle::simplex_solve(model.problem);
        if (base.status != oracle::SimplexStatus::Optimal) continue;
        const auto dlmp = lfm::extract_dlmp(model, sol);

        auto objective_at = [&](std::size_t k, double step) {
            auto in = f.input;
            in.schedule[0][k] += step;
            const auto r = oracle::simplex_solve(lfm::build_lfm(f.net, topo, in).problem);
            return r.status == oracle::SimplexStatus::Optimal ? r.objective : std::nan("");
        };
        bool clean = true;
        double local = 0.0;
        for (std::size_t k = 0; k < f.net.nodes.size() && clean; ++k) {
            if (static_cast<int>(k) == topo.slack) continue;
            const double fwd = (objective_at(k, eps) - base.objective) / eps;
            const double bwd = (base.objective - objective_at(k, -eps)) / eps;
            if (!std::isfinite(fwd) || !std::isfinite(bwd) || std::abs(fwd - bwd) > 1e-6 * std::max(1.0, std::abs(fwd))) {
                clean = false;
                break;
            }
            local = std::max(local, std::abs(0.5 * (fwd + bwd) - dlmp[0][k]));
        }
        if (!clean) {
            ++degenerate;
            continue;
        }
        ++found;
        worst = std::max(worst, local);
    }
    return {found == 50 && worst <= 1e-4,
            fmt("%d congested non-degenerate instances (%d kinked skipped, %d drawn), worst |fd - dlmp| %.2e EUR/MWh",
                found, degenerate, trials, worst)};
}

Outcome lem_matches_lp() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        lem::LemCell c;
        c.import_price = 20.0 + 80.0 * u(rng);
        c.export_price = c.import_price * (0.5 + 0.5 * u(rng));
        c.marginal_cost = 120.0 * u(rng);
        c.demand = 5.0 * u(rng);
        c.gen_cap = 5.0 * u(rng);
        c.apparent_cap = c.gen_cap * (1.0 + u(rng));
        c.tan_theta = u(rng);
        c.withhold_factor = u(rng);
        worst = std::max(worst, std::abs(lem::clear_cell(c).cost - oracle::lem_lp(c).cost));
    }
    return {worst <= 1e-9, fmt("1000 cells, worst cost difference %.2e EUR", worst)};
}

Outcome unit_identities() {
    std::vector<std::string> failed;
    auto expect = [&](const char* what, double got, double want) {
        if (std::abs(got - want) > 1e-12 * std::max(1.0, std::abs(want))) failed.push_back(fmt("%s=%g", what, got));
    };
    balancing::BalancePrices bp{30.0, 60.0};
    expect("imbalance zero", balancing::settle_imbalance(5.0, 5.0, bp), 0.0);
    expect("imbalance short", balancing::settle_imbalance(5.0, 4.0, bp), 60.0);
    expect("imbalance long", balancing::settle_imbalance(5.0, 6.0, bp), -30.0);

    const lfm::FlexBid bid{2, 0, 20.0, 10.0, 1.0, 1.0};
    expect("flex idle", lfm::settle_flex(100.0, bid, 0.0, 0.0), 0.0);
    expect("flex margin", lfm::settle_flex(100.0, bid, 0.5, 0.0), -40.0);
    expect("flex literal", lfm::settle_flex(100.0, bid, 0.0, 0.0, lfm::SettlementMode::Literal), 2500.0);

    auto l1 = [](double z) { return nn::smooth_l1(nn::Vec::Constant(1, z)).loss; };
    expect("l1(0)", l1(0.0), 0.0);
    expect("l1(0.5)", l1(0.5), 0.125);
    expect("l1(-2)", l1(-2.0), 1.5);
    expect("l1(1)", l1(1.0), 0.5);

    nn::Vec target = nn::Vec::Zero(1), source = nn::Vec::Ones(1);
    nn::soft_update(target, source, 0.001);
    expect("soft 0.001", target(0), 0.001);
    target << 0.25;
    nn::soft_update(target, source, 1.0);
    expect("soft tau=1", target(0), 1.0);
    target << 0.25;
    nn::soft_update(target, source, 0.0);
    expect("soft tau=0", target(0), 0.25);

    expect("td", train::td_residual(1.0, 0.99, 2.0, 2.5), 0.48);
    expect("td terminal", train::td_residual(1.0, 0.99, 7.0, 1.0, true), 0.0);
    expect("td fixed point", train::td_residual(0.0, 0.99, 3.0 / 0.99, 3.0), 0.0);

    expect("clip inside", nn::noisy_action(0.5, -0.2, 0.0, 1.0), 0.3);
    expect("clip upper", nn::noisy_action(0.9, 0.3, 0.0, 1.0), 1.0);

    std::string detail = failed.empty() ? "22 identities" : "failed:";
    for (const auto& f : failed) detail += " " + f;
    return {failed.empty(), detail};
}

train::SubAgent make_sub_agent(std::vector<int> actor_sizes, std::vector<int> critic_sizes, std::size_t index,
                               std::mt19937_64& rng) {
    train::SubAgent a;
    a.actor = nn::Mlp(std::move(actor_sizes), nn::OutputKind::Logistic);
    a.critic = nn::Mlp(std::move(critic_sizes), nn::OutputKind::Linear);
    a.actor.init(rng);
    a.critic.init(rng);
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.target_critic.params() *= 0.7;
    a.obs_dim = static_cast<std::size_t>(a.actor.input_dim());
    a.act_dim = static_cast<std::size_t>(a.actor.output_dim());
    a.obs_offset = index * a.obs_dim;
    a.act_offset = index * a.act_dim;
    return a;
}

nn::Batch random_batch(std::size_t obs_rows, std::size_t act_rows, std::size_t size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::Batch b;
    const auto cols = static_cast<Eigen::Index>(size);
    b.obs = nn::Mat::NullaryExpr(static_cast<Eigen::Index>(obs_rows), cols, [&] { return u(rng); });
    b.next_obs = nn::Mat::NullaryExpr(static_cast<Eigen::Index>(obs_rows), cols, [&] { return u(rng); });
    b.action = nn::Mat::NullaryExpr(static_cast<Eigen::Index>(act_rows), cols, [&] { return 0.5 + 0.5 * u(rng); });
    b.reward = nn::Vec::NullaryExpr(cols, [&] { return 3.0 * u(rng); });
    b.not_terminal = nn::Vec::NullaryExpr(cols, [&] { return u(rng) > -0.8 ? 1.0 : 0.0; });
    return b;
}

template <class Loss>
double worst_param_error(nn::Mlp& net, const nn::Vec& grad, Loss loss) {
    constexpr double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < net.params().size(); ++k) {
        const double keep = net.params()(k);
        net.params()(k) = keep + h;
        const double up = loss();
        net.params()(k) = keep - h;
        const double down = loss();
        net.params()(k) = keep;
        worst = std::max(worst, testnet::relative_error(grad(k), (up - down) / (2 * h)));
    }
    return worst;
}

Outcome gradient_suite() {
    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    int checked = 0;
    auto check_net = [&](std::vector<int> sizes, nn::OutputKind kind) {
        nn::Mlp net(std::move(sizes), kind);
        net.init(rng);
        const nn::Mat x = nn::Mat::NullaryExpr(net.input_dim(), 5, [&] { return u(rng); });
        const auto r = testnet::check_gradients(net, x, rng());
        worst = std::max({worst, r.params, r.inputs});
        ++checked;
    };
    check_net({static_cast<int>(env::kStageOneDim), 64, 64, 1}, nn::OutputKind::Logistic);
    check_net({static_cast<int>(env::kStageTwoDim), 64, 64, 2}, nn::OutputKind::Logistic);
    for (int n : {1, 3, 10}) {
        check_net({4 * n, 64, 64, 1}, nn::OutputKind::Linear);
        check_net({7 * n, 64, 64, 1}, nn::OutputKind::Linear);
    }

    // critic and actor losses of a three-agent team at both stages
    for (auto [obs, act] : {std::pair{3, 1}, std::pair{5, 2}}) {
        const std::size_t n = 3;
        std::vector<train::SubAgent> team;
        for (std::size_t i = 0; i < n; ++i)
            team.push_back(make_sub_agent({obs, 64, 64, act}, {(obs + act) * static_cast<int>(n), 64, 64, 1}, i, rng));
        std::vector<train::SubAgent*> peers;
        for (auto& a : team) peers.push_back(&a);
        const auto batch = random_batch(n * static_cast<std::size_t>(obs), n * static_cast<std::size_t>(act), 16, rng);
        nn::Vec grad, unused;
        train::critic_gradient(team[1], peers, batch, 0.95, grad);
        worst = std::max(worst, worst_param_error(team[1].critic, grad, [&] {
                             return train::critic_gradient(team[1], peers, batch, 0.95, unused);
                         }));
        train::actor_gradient(team[2], batch, grad);
        worst = std::max(worst, worst_param_error(team[2].actor, grad,
                                                  [&] { return train::actor_gradient(team[2], batch, unused); }));
        checked += 2;
    }
    return {worst <= 1e-5, fmt("%d configurations, worst relative error %.2e", checked, worst)};
}

std::size_t index_of(const MarketData& data, int id) {
    for (std::size_t i = 0; i < data.aggregators.size(); ++i)
        if (data.aggregators[i].id == id) return i;
    return 0;
}

Outcome reward_identity() {
    auto cfg = scenario::preset("four_node");
    const auto data = scenario::build_market(cfg, scenario::Variant::OneArb);
    const auto split = scenario::week_split(cfg, data->weeks());
    auto tc = cfg.trainer;
    tc.eval_every = 1000;
    train::Trainer trainer(data, tc, split, 9);
    trainer.train(20);

    env::Environment env(data);
    std::vector<env::HourLog> log;
    std::vector<train::WeekScores> scores;
    for (auto w : split.test) scores.push_back(train::rollout(env, w, trainer.greedy_policy(), &log));

    std::vector<int> ids;
    for (const auto& a : data->aggregators) ids.push_back(a.id);
    std::stringstream csv;
    io::write_transition_log(csv, log, ids);
    const auto back = io::read_transition_log(csv, ids);

    std::size_t violations = 0, checked = 0, flex_hours = 0;
    auto check_log = [&](const std::vector<env::HourLog>& hours) {
        for (const auto& h : hours)
            for (const auto& a : h.agents) {
                ++checked;
                if (a.r_pr != -a.c_lem - a.c_flx - a.c_bal) ++violations;
                if (a.r_lfm != -a.c_flx - a.c_bal) ++violations;
                if (a.g_up + a.g_dw > 1e-6) ++flex_hours;
            }
    };
    check_log(log);
    check_log(back);
    if (back.size() != log.size()) ++violations;
    for (std::size_t k = 0; k < std::min(back.size(), log.size()); ++k)
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (back[k].agents[i].r_pr != log[k].agents[i].r_pr || back[k].agents[i].r_lfm != log[k].agents[i].r_lfm)
                ++violations;

    // week scores are the hour sums of the two stage rewards, total is their sum
    std::size_t score_violations = 0, cursor = 0;
    for (const auto& w : scores) {
        std::vector<train::StageScore> sums(ids.size());
        for (; cursor < log.size() && log[cursor].week == w.week; ++cursor)
            for (std::size_t i = 0; i < ids.size(); ++i) {
                sums[i].stage1 += log[cursor].agents[i].r_lem;
                sums[i].stage2 += log[cursor].agents[i].r_lfm;
            }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& s = w.agents[i];
            if (s.stage1 != sums[i].stage1 || s.stage2 != sums[i].stage2 || s.total() != s.stage1 + s.stage2)
                ++score_violations;
        }
    }
    return {violations == 0 && score_violations == 0 && checked > 0,
            fmt("%zu agent-hours (%zu with flexibility) checked before and after a CSV round trip, %zu reward and %zu "
                "score violations",
                checked / 2, flex_hours / 2, violations, score_violations)};
}

Outcome toy_learning() {
    const auto cfg = scenario::preset("two_bus");
    const auto data = scenario::build_market(cfg);
    const auto split = *cfg.split;
    const std::size_t week = split.eval.front();
    const auto opt = oracle::action_grid_optimum(data, week);
    env::Environment env(data);
    const double truthful = train::rollout(env, week, train::truthful_policy(*data)).agents[0].total();

    std::vector<double> finals;
    std::string per_seed;
    for (std::uint64_t seed : {1, 2, 3}) {
        train::Trainer t(data, cfg.trainer, split, seed);
        t.train(300);
        finals.push_back(t.evaluate({week})[0].agents[0].total());
        per_seed += fmt(" %.1f", finals.back());
    }
    auto sorted = finals;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[1];
    const bool pass = median >= opt.score - 0.05 * std::abs(opt.score) && median > truthful;
    return {pass, fmt("grid optimum %.1f, truthful %.1f, seeds 1-3:%s, median %.1f (%.1f%% of optimum)", opt.score,
                      truthful, per_seed.c_str(), median, 100.0 * median / opt.score)};
}

Outcome directional() {
    const auto cfg = scenario::preset("four_node");
    int holding = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        double mean[3] = {0, 0, 0};
        train::StageScore arb[3];
        int v = 0;
        for (auto variant : {scenario::Variant::StandAlone, scenario::Variant::OneArb, scenario::Variant::AllArb}) {
            const auto data = scenario::build_market(cfg, variant);
            const auto split = scenario::week_split(cfg, data->weeks());
            train::Trainer t(data, cfg.trainer, split, seed);
            t.train(cfg.trainer.episodes);
            const auto scores = t.evaluate(split.test);
            const auto n = data->aggregators.size();
            const auto k = index_of(*data, cfg.arbitrageur);
            for (const auto& w : scores) {
                for (const auto& s : w.agents) mean[v] += s.total() / static_cast<double>(n * scores.size());
                arb[v].stage1 += w.agents[k].stage1 / static_cast<double>(scores.size());
                arb[v].stage2 += w.agents[k].stage2 / static_cast<double>(scores.size());
            }
            ++v;
        }
        const bool ok = mean[2] >= mean[1] && mean[1] >= mean[0] && arb[1].stage1 <= arb[0].stage1 &&
                        arb[1].stage2 >= arb[0].stage2;
        holding += ok;
        detail += fmt("; seed %d %s S-a %.1f one-arb %.1f all-arb %.1f, arbitrageur [%.1f %.1f] vs S-a [%.1f %.1f]",
                      static_cast<int>(seed), ok ? "ok" : "violated", mean[0], mean[1], mean[2], arb[1].stage1,
                      arb[1].stage2, arb[0].stage1, arb[0].stage2);
    }
    return {holding >= 4, fmt("ordering holds for %d of 5 seeds", holding) + detail};
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
    const auto cfg = scenario::preset("two_bus");
    const auto data = scenario::build_market(cfg);
    auto tc = cfg.trainer;
    tc.eval_every = 5;
    const auto root = fs::temp_directory_path() / "arbmarl_acceptance_determinism";
    fs::remove_all(root);
    std::vector<std::vector<train::CurvePoint>> curves;
    for (int run = 0; run < 2; ++run) {
        train::Trainer t(data, tc, *cfg.split, 42);
        curves.push_back(t.train(30).curve);
        t.save(root / std::to_string(run));
    }
    bool same_curve = curves[0].size() == curves[1].size() && !curves[0].empty();
    for (std::size_t k = 0; same_curve && k < curves[0].size(); ++k)
        same_curve = curves[0][k].episode == curves[1][k].episode && curves[0][k].score == curves[1][k].score;
    std::size_t files = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / "0")) {
        ++files;
        const auto other = root / "1" / entry.path().filename();
        if (!fs::exists(other) || file_bytes(entry.path()) != file_bytes(other)) ++differing;
    }
    fs::remove_all(root);
    return {same_curve && files > 0 && differing == 0,
            fmt("%zu curve points %s, %zu checkpoint files, %zu differing", curves[0].size(),
                same_curve ? "identical" : "differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"lp_reference", lp_matches_reference},
        {"dlmp_sensitivity", dlmp_matches_finite_differences},
        {"lem_oracle", lem_matches_lp},
        {"unit_identities", unit_identities},
        {"gradients", gradient_suite},
        {"reward_identity", reward_identity},
        {"toy_learning", toy_learning},
        {"directional", directional},
        {"determinism", determinism},
    };
    const double limit[] = {120, 60, 10, 10, 30, 300, 900, 1800, 300};
    std::vector<std::string> selected;
    std::string report;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--report" && i + 1 < argc)
            report = argv[++i];
        else
            selected.push_back(arg);
    }
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto& [name, run] = criteria[k];
        if (!selected.empty() && std::find(selected.begin(), selected.end(), name) == selected.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > limit[k]) {
            o.pass = false;
            o.detail += fmt(", over the %.0fs budget", limit[k]);
        }
        const auto line = fmt("%s %s (", o.pass ? "PASS" : "FAIL", name.c_str()) + o.detail + fmt(", %.1fs)\n", secs);
        std::fputs(line.c_str(), stdout);
        std::fflush(stdout);
        if (!report.empty()) std::ofstream(report, std::ios::app) << line;
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
