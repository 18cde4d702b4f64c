// Command-line front end.  Four subcommands:
//
//   solve   backward pass; prints v_star, optionally dumps every value set
//   policy  committed-policy queries: action distributions and rollouts
//   oracle  audits: incentive check, exact values, two-step enumeration
//   learn   explore-then-commit run writing the regret series as CSV
//
// Exit codes: 0 success, 2 input/validation/usage error, 3 numerical failure.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spag/errors.hpp"
#include "spag/geometry.hpp"
#include "spag/learning.hpp"
#include "spag/model.hpp"
#include "spag/oracle.hpp"
#include "spag/policy_forward.hpp"
#include "spag/registry.hpp"
#include "spag/valueset_dp.hpp"

namespace {

using nlohmann::ordered_json;

struct CommonOpts {
  uint64_t seed = 0;
  double tol_feas = 1e-8;
  double tol_obj = 1e-7;
  bool quiet = false;

  spag::LpOptions lp() const {
    spag::LpOptions o;
    o.feas_tol = tol_feas;
    o.obj_tol = tol_obj;
    return o;
  }
};

void add_common(CLI::App* cmd, CommonOpts& g) {
  cmd->add_option("--seed", g.seed, "Random seed for any stochastic step");
  cmd->add_option("--tol-feas", g.tol_feas, "LP feasibility tolerance")
      ->capture_default_str();
  cmd->add_option("--tol-obj", g.tol_obj, "LP objective tolerance")
      ->capture_default_str();
  cmd->add_flag("--quiet", g.quiet, "Suppress informational stderr output");
}

void note(const CommonOpts& g, const std::string& msg) {
  if (!g.quiet) std::cerr << "note: " << msg << "\n";
}

// Writes to the given path, or to stdout when the path is empty.
void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw spag::ValidationError("cannot write to " + out_path);
  out << text;
}

std::string num10(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

// Accepts either an exact name from `names` or a numeric index.
int resolve_label(const std::string& text, const std::vector<std::string>& names,
                  const char* what) {
  for (int i = 0; i < static_cast<int>(names.size()); ++i)
    if (names[i] == text) return i;
  try {
    size_t pos = 0;
    int v = std::stoi(text, &pos);
    if (pos == text.size() && v >= 0 && v < static_cast<int>(names.size()))
      return v;
  } catch (const std::exception&) {
  }
  throw spag::ValidationError(std::string("unknown ") + what + ": " + text);
}

void check_range(int v, int n, const char* what) {
  if (v < 0 || v >= n)
    throw spag::ValidationError(std::string(what) + " index " +
                                std::to_string(v) + " out of range [0, " +
                                std::to_string(n) + ")");
}

ordered_json parse_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw spag::ParseError(std::string("cannot open ") + what + ": " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw spag::ParseError(std::string("invalid ") + what + " " + path + ": " +
                           e.what());
  }
}

// History file: a JSON array of steps, each either a 7-int array
// [s, wp, wa, wr, ap, aa, at] or an object with those keys.
spag::History load_history(const std::string& path, const spag::GameModel& m) {
  ordered_json j = parse_json_file(path, "history file");
  if (!j.is_array())
    throw spag::ParseError("history file must hold a JSON array of steps");
  spag::History h;
  try {
    for (const auto& e : j) {
      spag::StepInteraction st;
      if (e.is_array()) {
        if (e.size() != 7)
          throw spag::ParseError(
              "each history step array needs 7 entries [s, wp, wa, wr, ap, aa, at]");
        st.s = e.at(0).get<int>();
        st.omega_p = e.at(1).get<int>();
        st.omega_a = e.at(2).get<int>();
        st.report = e.at(3).get<int>();
        st.ap = e.at(4).get<int>();
        st.aa = e.at(5).get<int>();
        st.aa_played = e.at(6).get<int>();
      } else {
        st.s = e.at("s").get<int>();
        st.omega_p = e.at("wp").get<int>();
        st.omega_a = e.at("wa").get<int>();
        st.report = e.at("wr").get<int>();
        st.ap = e.at("ap").get<int>();
        st.aa = e.at("aa").get<int>();
        st.aa_played = e.at("at").get<int>();
      }
      check_range(st.s, m.num_states(), "state");
      check_range(st.omega_p, m.num_wp(), "principal observation");
      check_range(st.omega_a, m.num_wa(), "agent observation");
      check_range(st.report, m.num_wa(), "report");
      check_range(st.ap, m.num_ap(), "principal action");
      check_range(st.aa, m.num_aa(), "recommendation");
      check_range(st.aa_played, m.num_aa(), "played action");
      h.push_back(st);
    }
  } catch (const nlohmann::json::exception& e) {
    throw spag::ParseError(std::string("invalid history file ") + path + ": " +
                           e.what());
  }
  return h;
}

// Deviation plan file: optional "report" ([wr per wa]) and "act"
// ([[at per recommended aa] per wa]); missing parts default to honesty.
spag::DeviationPlan load_plan(const std::string& path, const spag::GameModel& m) {
  ordered_json j = parse_json_file(path, "deviation plan");
  spag::DeviationPlan plan;
  try {
    if (j.contains("report")) {
      auto report = j.at("report").get<std::vector<int>>();
      if (static_cast<int>(report.size()) != m.num_wa())
        throw spag::ParseError("deviation report map needs one entry per agent observation");
      for (int r : report) check_range(r, m.num_wa(), "report");
      plan.report = [report](int, const spag::History&, int wa) {
        return report[wa];
      };
    }
    if (j.contains("act")) {
      auto act = j.at("act").get<std::vector<std::vector<int>>>();
      if (static_cast<int>(act.size()) != m.num_wa())
        throw spag::ParseError("deviation action map needs one row per agent observation");
      for (const auto& row : act) {
        if (static_cast<int>(row.size()) != m.num_aa())
          throw spag::ParseError("deviation action rows need one entry per recommendation");
        for (int a : row) check_range(a, m.num_aa(), "played action");
      }
      plan.act = [act](int, const spag::History&, int wa, int, int aa) {
        return act[wa][aa];
      };
    }
  } catch (const nlohmann::json::exception& e) {
    throw spag::ParseError(std::string("invalid deviation plan ") + path + ": " +
                           e.what());
  }
  return plan;
}

// Deterministic ordering for the dump: step, then (s, ap, aa) with Root first.
std::vector<const spag::ValuePolytope*> sorted_polytopes(
    const std::vector<spag::PolytopeMap>& by_step) {
  std::vector<const spag::ValuePolytope*> all;
  for (const auto& step : by_step) {
    std::vector<spag::StateActionKey> keys;
    keys.reserve(step.size());
    for (const auto& [k, v] : step) keys.push_back(k);
    std::sort(keys.begin(), keys.end(),
              [](const spag::StateActionKey& a, const spag::StateActionKey& b) {
                return std::tie(a.s, a.ap, a.aa) < std::tie(b.s, b.ap, b.aa);
              });
    for (const auto& k : keys) all.push_back(&step.at(k));
  }
  return all;
}

struct SolveArgs {
  std::string model;
  double epsilon = 0.0;
  std::optional<double> delta;
  std::string out;
};

void cmd_solve(const SolveArgs& a, const CommonOpts& g) {
  spag::GameModel m = spag::load_model(a.model);
  auto t0 = std::chrono::steady_clock::now();
  double v_star = 0.0;
  double delta = 0.0;
  std::vector<double> argvec;
  const std::vector<spag::PolytopeMap>* by_step = nullptr;
  spag::SolveResult plain;
  spag::DeltaIcResult slack;
  if (a.delta) {
    delta = *a.delta;
    slack = spag::solve_delta_ic(m, a.epsilon, delta, g.lp());
    v_star = slack.vp;
    argvec = slack.solve.root_target;
    by_step = &slack.solve.by_step;
  } else {
    spag::ValueSetOptions vo;
    vo.epsilon = a.epsilon;
    vo.lp = g.lp();
    plain = spag::build_value_polytopes(m, vo);
    v_star = plain.root_vp;
    argvec = plain.root_target;
    by_step = &plain.by_step;
  }
  auto t1 = std::chrono::steady_clock::now();
  double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  std::printf("v_star=%.6f\n", v_star);
  std::ostringstream arg;
  for (size_t i = 0; i < argvec.size(); ++i)
    arg << (i ? ", " : "") << num10(argvec[i]);
  note(g, "argvec = (" + arg.str() + "), " + num10(ms) + " ms");

  if (!a.out.empty()) {
    ordered_json summary;
    summary["epsilon"] = a.epsilon;
    summary["delta"] = delta;
    summary["v_star"] = v_star;
    summary["argvec"] = argvec;
    summary["wall_time_ms"] = ms;
    ordered_json dump;
    dump["summary"] = summary;
    dump["polytopes"] = ordered_json::array();
    for (const spag::ValuePolytope* p : sorted_polytopes(*by_step))
      dump["polytopes"].push_back(
          ordered_json::parse(spag::polytope_to_json(*p)));
    emit(dump.dump(2) + "\n", a.out);
  }
}

struct PolicyArgs {
  std::string model;
  double epsilon = 0.0;
  std::string history;
  int rollout = 0;
  std::string deviation;
  std::string wp_label, wr_label;
  std::string out;
};

void cmd_policy(const PolicyArgs& a, const CommonOpts& g) {
  spag::GameModel m = spag::load_model(a.model);
  spag::ValueSetOptions vo;
  vo.epsilon = a.epsilon;
  vo.lp = g.lp();
  spag::SolveResult res = spag::build_value_polytopes(m, vo);
  spag::PolicyHandle handle(m, std::move(res), 2, g.lp());

  if (a.rollout > 0) {
    spag::DeviationPlan plan = a.deviation.empty()
                                   ? spag::DeviationPlan::truthful()
                                   : load_plan(a.deviation, m);
    std::vector<spag::Episode> eps =
        spag::rollout(m, handle, plan, a.rollout, g.seed);
    std::ostringstream csv;
    csv << "episode,vP,vA\n";
    double sum_p = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) {
      csv << (i + 1) << ',' << num10(eps[i].vp) << ',' << num10(eps[i].va)
          << '\n';
      sum_p += eps[i].vp;
    }
    emit(csv.str(), a.out);
    note(g, "mean vP over " + std::to_string(eps.size()) + " episodes: " +
                num10(sum_p / std::max<size_t>(1, eps.size())));
    return;
  }

  spag::History h =
      a.history.empty() ? spag::History{} : load_history(a.history, m);
  int step = static_cast<int>(h.size()) + 1;
  std::vector<std::pair<int, int>> pairs;
  if (!a.wp_label.empty() || !a.wr_label.empty()) {
    int wp = a.wp_label.empty()
                 ? 0
                 : resolve_label(a.wp_label, m.principal_obs, "principal observation");
    int wr = a.wr_label.empty()
                 ? 0
                 : resolve_label(a.wr_label, m.agent_obs, "report");
    pairs.emplace_back(wp, wr);
  } else {
    for (int wp = 0; wp < m.num_wp(); ++wp)
      for (int wr = 0; wr < m.num_wa(); ++wr) pairs.emplace_back(wp, wr);
  }
  ordered_json out;
  out["step"] = step;
  out["joint_actions"] = ordered_json::array();
  for (int ap = 0; ap < m.num_ap(); ++ap)
    for (int aa = 0; aa < m.num_aa(); ++aa)
      out["joint_actions"].push_back(m.principal_actions[ap] + "|" +
                                     m.agent_actions[aa]);
  out["rows"] = ordered_json::array();
  for (auto [wp, wr] : pairs) {
    ordered_json row;
    row["wp"] = m.principal_obs[wp];
    row["wr"] = m.agent_obs[wr];
    row["pi"] = handle.action_distribution(h, wp, wr);
    out["rows"].push_back(row);
  }
  emit(out.dump(2) + "\n", a.out);
}

struct OracleArgs {
  std::string model;
  double epsilon = 0.1;
  bool check_ic = false;
  bool exact_values = false;
  bool h2_optimum = false;
  std::string deviation;
  double ic_tol = 1e-6;
  double budget = 1e6;
};

void cmd_oracle(const OracleArgs& a, const CommonOpts& g) {
  int picked = int(a.check_ic) + int(a.exact_values) + int(a.h2_optimum);
  if (picked != 1)
    throw spag::ValidationError(
        "choose exactly one of --check-ic, --exact-values, --h2-optimum");
  spag::GameModel m = spag::load_model(a.model);
  ordered_json verdict;
  if (a.h2_optimum) {
    auto [vp, va] = spag::brute_force_optimum(m);
    verdict["vP"] = vp;
    verdict["vA"] = va;
  } else {
    spag::ValueSetOptions vo;
    vo.epsilon = a.epsilon;
    vo.lp = g.lp();
    spag::SolveResult res = spag::build_value_polytopes(m, vo);
    spag::PolicyHandle handle(m, std::move(res), 2, g.lp());
    spag::PrincipalPolicy pol = spag::as_policy(handle);
    if (a.check_ic) {
      spag::IcCheckResult r = spag::ic_check(m, pol, a.ic_tol, a.budget);
      verdict["pass"] = r.pass;
      verdict["gap"] = r.gap;
      verdict["best_response"] = r.best_response;
      verdict["truthful"] = r.truthful;
    } else {
      spag::DeviationPlan plan = a.deviation.empty()
                                     ? spag::DeviationPlan::truthful()
                                     : load_plan(a.deviation, m);
      auto [vp, va] = spag::exact_policy_values(m, pol, plan, a.budget);
      verdict["vP"] = vp;
      verdict["vA"] = va;
    }
  }
  std::cout << verdict.dump() << "\n";
}

struct LearnArgs {
  std::string model;
  int64_t episodes = 0;
  double q = 0.05;
  std::optional<int64_t> n0;
  std::optional<double> delta;
  double c_explore = 1.0;
  std::string out;
};

void cmd_learn(const LearnArgs& a, const CommonOpts& g) {
  spag::GameModel m = spag::load_model(a.model);
  spag::LearningConfig cfg;
  cfg.episodes = a.episodes;
  cfg.failure_prob = a.q;
  cfg.seed = g.seed;
  cfg.c_explore = a.c_explore;
  cfg.n0 = a.n0;
  cfg.delta = a.delta;
  spag::RegretReport rep = spag::run_learning(m, cfg);
  std::ostringstream csv;
  spag::write_report_csv(rep, csv);
  emit(csv.str(), a.out);
  note(g, "n0=" + std::to_string(rep.n0_used) + " delta=" +
              num10(rep.delta_used) + " v_star=" + num10(rep.v_star) +
              " regP=" + num10(rep.regp_cum.empty() ? 0.0 : rep.regp_cum.back()) +
              " regA=" + num10(rep.rega_cum.empty() ? 0.0 : rep.rega_cum.back()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Finite-horizon principal-agent commitment: value-set solver, committed "
      "policy, audit oracles, and an explore-then-commit learner.\n"
      "Models are JSON files or bundled fixture names (coin-persuasion-v1, "
      "matching-pennies-v1, mechanism-v1)."};
  app.require_subcommand(1);
  CommonOpts g;
  add_common(&app, g);

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand(
      "solve", "Run the backward pass and print the best principal value");
  solve->add_option("--model", sa.model, "Model file or fixture name")
      ->required();
  solve->add_option("--epsilon", sa.epsilon, "Slice spacing control (> 0)")
      ->required()
      ->check(CLI::PositiveNumber);
  solve->add_option("--delta", sa.delta,
                    "Relax incentive rows by this slack (>= 0)")
      ->check(CLI::NonNegativeNumber);
  solve->add_option("--out", sa.out,
                    "Write every value set plus a summary record as JSON");
  add_common(solve, g);
  solve->callback([&] { cmd_solve(sa, g); });

  PolicyArgs pa;
  CLI::App* policy = app.add_subcommand(
      "policy", "Query the committed policy or roll out episodes");
  policy->add_option("--model", pa.model, "Model file or fixture name")
      ->required();
  policy->add_option("--epsilon", pa.epsilon, "Slice spacing control (> 0)")
      ->required()
      ->check(CLI::PositiveNumber);
  CLI::Option* hist_opt = policy->add_option(
      "--history", pa.history,
      "History file (JSON array of [s, wp, wa, wr, ap, aa, at] steps); "
      "prints the next action distribution");
  CLI::Option* roll_opt =
      policy
          ->add_option("--rollout", pa.rollout,
                       "Simulate this many episodes and print episode,vP,vA")
          ->check(CLI::PositiveNumber);
  hist_opt->excludes(roll_opt);
  policy->add_option("--deviation", pa.deviation,
                     "Agent deviation plan file (JSON with report/act maps)");
  policy->add_option("--wp", pa.wp_label,
                     "Restrict the distribution to this principal observation");
  policy->add_option("--wr", pa.wr_label, "Restrict to this report");
  policy->add_option("--out", pa.out, "Write the output here instead of stdout");
  add_common(policy, g);
  policy->callback([&] { cmd_policy(pa, g); });

  OracleArgs oa;
  CLI::App* oracle = app.add_subcommand(
      "oracle", "Audit the solved commitment against exact enumeration");
  oracle->add_option("--model", oa.model, "Model file or fixture name")
      ->required();
  oracle->add_option("--epsilon", oa.epsilon, "Slice spacing control (> 0)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  oracle->add_flag("--check-ic", oa.check_ic,
                   "Audit truth-telling against the agent's best response");
  oracle->add_flag("--exact-values", oa.exact_values,
                   "Exact expected values of the solved commitment");
  oracle->add_flag("--h2-optimum", oa.h2_optimum,
                   "Independent two-step enumeration optimum");
  oracle->add_option("--deviation", oa.deviation,
                     "Deviation plan for --exact-values");
  oracle->add_option("--ic-tol", oa.ic_tol, "Pass threshold for --check-ic")
      ->capture_default_str();
  oracle->add_option("--budget", oa.budget, "Enumeration budget (tree leaves)")
      ->capture_default_str();
  add_common(oracle, g);
  oracle->callback([&] { cmd_oracle(oa, g); });

  LearnArgs la;
  CLI::App* learn = app.add_subcommand(
      "learn", "Explore-then-commit learning; writes the regret series as CSV");
  learn->add_option("--model", la.model, "Model file or fixture name")
      ->required();
  learn->add_option("--episodes", la.episodes, "Total episodes T")
      ->required()
      ->check(CLI::PositiveNumber);
  learn->add_option("--q", la.q, "Failure probability budget in (0, 1)")
      ->check(CLI::Range(1e-12, 1.0))
      ->capture_default_str();
  learn->add_option("--n0", la.n0, "Exploration episodes (default from T)");
  learn->add_option("--delta", la.delta,
                    "Commit-phase incentive slack (default from T)")
      ->check(CLI::NonNegativeNumber);
  learn->add_option("--c-explore", la.c_explore,
                    "Scale on the default exploration budget")
      ->capture_default_str();
  learn->add_option("--out", la.out, "Write the CSV here instead of stdout");
  add_common(learn, g);
  learn->callback([&] { cmd_learn(la, g); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const spag::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const spag::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const spag::BudgetExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const spag::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
