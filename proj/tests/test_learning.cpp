#include "spag/learning.hpp"

#include <cmath>
#include <sstream>

#include "doctest.h"
#include "spag/errors.hpp"
#include "spag/oracle.hpp"
#include "spag/registry.hpp"
#include "test_util.hpp"

using namespace spag;
using namespace spag_tests;

TEST_CASE("the instance size factor multiplies out") {
    CHECK(zeta(make_fixture("coin-persuasion-v1")) == doctest::Approx(4096.0));
    // H^5 = 243, |S|^2 = 4, joint actions cubed = 8, observation pairs
    // squared = 4.
    CHECK(zeta(make_fixture("mechanism-v1")) == doctest::Approx(31104.0));
}

TEST_CASE("the slack sweep on the coin matches the closed form") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    double prev = -1.0;
    for (double d : {0.0, 0.05, 0.2, 2.0}) {
        CAPTURE(d);
        DeltaIcResult r = solve_delta_ic(coin, 0.1, d);
        CHECK(r.vp == doctest::Approx(std::min(0.8 + d, 1.0)).epsilon(1e-6));
        CHECK(r.vp >= prev - 1e-9);
        // The promised best-deviation value never beats the truthful value
        // by more than the slack.
        CHECK(r.va_star - r.va <= d + 1e-8);
        prev = r.vp;
    }
}

TEST_CASE("slack does not help when the optimum is already compatible") {
    GameModel mech = make_fixture("mechanism-v1");
    CHECK(solve_delta_ic(mech, 0.1, 0.0).vp == doctest::Approx(1.75).epsilon(1e-6));
    CHECK(solve_delta_ic(mech, 0.1, 0.3).vp == doctest::Approx(1.75).epsilon(1e-6));
}

TEST_CASE("slack commitments forward-play to their root values") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    DeltaIcResult dic = solve_delta_ic(coin, 0.1, 0.2);
    PolicyHandle handle(coin, dic.solve, 3);
    auto [vp, va] = exact_policy_values(coin, as_policy(handle));
    CHECK(vp == doctest::Approx(dic.vp).epsilon(5e-6));
    CHECK(va == doctest::Approx(dic.va).epsilon(5e-6));
    // The realized incentive gap stays within the slack.
    double br = best_response_value(coin, as_policy(handle));
    CHECK(br - va <= 0.2 + 1e-6);
}

TEST_CASE("slack guards reject bad arguments") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    CHECK_THROWS_AS(solve_delta_ic(coin, 0.1, -0.1), ValidationError);
    GameModel mech = make_fixture("mechanism-v1");
    CHECK_THROWS_AS(solve_delta_ic(mech, 0.0, 0.1), ValidationError);
}

TEST_CASE("counts turn into frequencies with a uniform fallback") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    EstimatedModel est = EstimatedModel::from(coin);
    // No data yet: everything uniform.
    for (double p : est.model.initial) {
        CHECK(p == doctest::Approx(1.0 / coin.num_outcomes()));
    }

    Rng rng(2024);
    for (int t = 0; t < 2000; ++t) {
        auto [s, wp, wa] = coin.sample_step(1, StateActionKey::Root(), rng);
        est.record_initial(s, wp, wa);
    }
    est.refresh();
    double l1 = 0.0, total = 0.0;
    for (int k = 0; k < coin.num_outcomes(); ++k) {
        l1 += std::abs(est.model.initial[k] - coin.initial[k]);
        total += est.model.initial[k];
    }
    CHECK(l1 <= 0.1);
    CHECK(total == doctest::Approx(1.0));
    // Transition rows saw no data and stay uniform.
    CHECK(est.model.transitions[0] ==
          doctest::Approx(1.0 / coin.num_outcomes()));
    est.model.validate();
}

TEST_CASE("the exploration planner chases unvisited rows") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    EstimatedModel est = EstimatedModel::from(coin);
    std::vector<std::vector<double>> visit(1);
    visit[0].assign(coin.num_states() * coin.num_joint_actions(), 0.0);
    // Make every recommend-heads row look exhausted.
    for (int s = 0; s < coin.num_states(); ++s) {
        visit[0][(s * 1 + 0) * 2 + 0] = 1e6;
    }
    ExplorationPolicy pol = plan_exploration(coin, est, visit, 1.0);
    for (int wp = 0; wp < coin.num_wp(); ++wp) {
        CHECK(pol.action[0][wp * 1 + 0] == 1);  // recommend play_tails
    }
}

TEST_CASE("regret accounting keeps signs and floors") {
    RegretReport rep;
    for (int t = 0; t < 5; ++t) {
        EpisodeRecord r;
        r.episode = t + 1;
        r.benchmark_p = 0.8;
        r.vp_term = 1.0;  // overshoot: negative principal term
        r.benchmark_a = 0.6;
        r.va_term = 0.4;
        rep.episodes.push_back(r);
    }
    compute_regrets(rep);
    CHECK(rep.regp_cum.back() == doctest::Approx(-1.0));
    CHECK(rep.rega_cum.back() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < rep.rega_cum.size(); ++i) {
        CHECK(rep.rega_cum[i] >= rep.rega_cum[i - 1]);
    }
}

TEST_CASE("default budgets follow the size factor and cap at the run") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    LearningConfig cfg;
    cfg.episodes = 8;
    cfg.seed = 3;
    RegretReport rep = run_learning(coin, cfg);
    // ceil(16 * 8^(2/3)) = 64 caps at T = 8: the whole run explores.
    CHECK(rep.n0_used == 8);
    CHECK(rep.delta_used == doctest::Approx(8.0));
    CHECK(rep.episodes.size() == 8);
    for (const EpisodeRecord& r : rep.episodes) CHECK(r.explore);
    CHECK(rep.v_star == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("the commit phase stays near incentive compatible") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    LearningConfig cfg;
    cfg.episodes = 120;
    cfg.n0 = 60;
    cfg.delta = 0.1;
    cfg.seed = 5;
    RegretReport rep = run_learning(coin, cfg);
    CHECK(rep.n0_used == 60);
    REQUIRE(rep.episodes.size() == 120);
    bool any_commit = false;
    for (const EpisodeRecord& r : rep.episodes) {
        if (r.explore) continue;
        any_commit = true;
        CHECK(r.benchmark_a - r.va_term <= 2.0 * 0.1 + 0.05);
        CHECK(r.vp_term == r.vp_expected);
    }
    CHECK(any_commit);
}

TEST_CASE("learning runs are reproducible") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    LearningConfig cfg;
    cfg.episodes = 40;
    cfg.n0 = 20;
    cfg.delta = 0.05;
    cfg.seed = 17;
    RegretReport a = run_learning(coin, cfg);
    RegretReport b = run_learning(coin, cfg);
    REQUIRE(a.regp_cum.size() == b.regp_cum.size());
    for (std::size_t i = 0; i < a.regp_cum.size(); ++i) {
        CHECK(a.regp_cum[i] == b.regp_cum[i]);
        CHECK(a.rega_cum[i] == b.rega_cum[i]);
    }
    std::ostringstream csv_a, csv_b;
    write_report_csv(a, csv_a);
    write_report_csv(b, csv_b);
    CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("the report serializes one labeled row per episode") {
    GameModel coin = make_fixture("coin-persuasion-v1");
    LearningConfig cfg;
    cfg.episodes = 10;
    cfg.n0 = 4;
    cfg.delta = 0.5;
    cfg.seed = 9;
    RegretReport rep = run_learning(coin, cfg);
    std::ostringstream oss;
    write_report_csv(rep, oss);
    std::istringstream in(oss.str());
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "episode,phase,regP_cum,regA_cum,vP_expected,vA_expected");
    int rows = 0, explores = 0;
    while (std::getline(in, line)) {
        ++rows;
        if (line.find(",explore,") != std::string::npos) ++explores;
        CHECK(std::count(line.begin(), line.end(), ',') == 5);
    }
    CHECK(rows == 10);
    CHECK(explores == 4);
}
