#include "spag/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "spag/errors.hpp"

namespace spag {

using nlohmann::json;

namespace {

constexpr double kProbTol = 1e-9;

std::vector<std::string> get_names(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw ParseError(std::string("missing or non-array field: ") + key);
  }
  std::vector<std::string> out;
  for (const auto& e : j.at(key)) {
    if (!e.is_string()) {
      throw ParseError(std::string("non-string entry in ") + key);
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<double> get_flat(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("expected array for ") + what);
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) {
      throw ParseError(std::string("non-numeric entry in ") + what);
    }
    out.push_back(e.get<double>());
  }
  return out;
}

void check_unique(const std::vector<std::string>& names, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw ValidationError(std::string("duplicate name '") + n + "' in " + what);
    }
  }
}

void check_row(const std::vector<double>& row, std::size_t begin, std::size_t len,
               const std::string& what) {
  double sum = 0.0;
  for (std::size_t i = begin; i < begin + len; ++i) {
    if (row[i] < -kProbTol) {
      throw ValidationError(what + ": negative probability " + std::to_string(row[i]));
    }
    sum += row[i];
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw ValidationError(what + ": row sums to " + std::to_string(sum));
  }
}

}  // namespace

double GameModel::outcome_prob(int h, const StateActionKey& o, int s, int wp,
                               int wa) const {
  int i = outcome_index(s, wp, wa);
  if (o.is_root()) {
    return initial[i];
  }
  std::size_t base =
      ((static_cast<std::size_t>(h - 2) * num_states() + o.s) * num_ap() + o.ap) *
          num_aa() +
      o.aa;
  return transitions[base * num_outcomes() + i];
}

std::vector<double> GameModel::outcome_row(int h, const StateActionKey& o) const {
  if (o.is_root()) return initial;
  std::size_t base =
      ((static_cast<std::size_t>(h - 2) * num_states() + o.s) * num_ap() + o.ap) *
          num_aa() +
      o.aa;
  auto first = transitions.begin() + base * num_outcomes();
  return std::vector<double>(first, first + num_outcomes());
}

double GameModel::reward_p(int h, int s, int ap, int aa) const {
  if (h >= horizon) return 0.0;
  std::size_t i =
      ((static_cast<std::size_t>(h - 1) * num_states() + s) * num_ap() + ap) *
          num_aa() +
      aa;
  return rewards_principal[i];
}

double GameModel::reward_a(int h, int s, int ap, int aa) const {
  if (h >= horizon) return 0.0;
  std::size_t i =
      ((static_cast<std::size_t>(h - 1) * num_states() + s) * num_ap() + ap) *
          num_aa() +
      aa;
  return rewards_agent[i];
}

ObsConditional GameModel::conditional_obs_prob(int h, const StateActionKey& o,
                                               int wa) const {
  ObsConditional out;
  for (int s = 0; s < num_states(); ++s) {
    for (int wp = 0; wp < num_wp(); ++wp) {
      out.marginal += outcome_prob(h, o, s, wp, wa);
    }
  }
  if (out.marginal <= kProbTol) {
    return out;  // undefined; no renormalization of a zero row
  }
  out.defined = true;
  out.cond.resize(static_cast<std::size_t>(num_states()) * num_wp());
  for (int s = 0; s < num_states(); ++s) {
    for (int wp = 0; wp < num_wp(); ++wp) {
      out.cond[s * num_wp() + wp] = outcome_prob(h, o, s, wp, wa) / out.marginal;
    }
  }
  return out;
}

std::tuple<int, int, int> GameModel::sample_step(int h, const StateActionKey& o,
                                                 Rng& rng) const {
  std::vector<double> row = outcome_row(h, o);
  int i = rng.categorical(row);
  int wa = i % num_wa();
  int wp = (i / num_wa()) % num_wp();
  int s = i / (num_wa() * num_wp());
  return {s, wp, wa};
}

void GameModel::validate() const {
  if (states.empty()) throw ValidationError("states must be nonempty");
  if (principal_actions.empty()) throw ValidationError("principal_actions must be nonempty");
  if (agent_actions.empty()) throw ValidationError("agent_actions must be nonempty");
  if (principal_obs.empty()) throw ValidationError("principal_obs must be nonempty");
  if (agent_obs.empty()) throw ValidationError("agent_obs must be nonempty");
  if (horizon < 1) throw ValidationError("horizon must be at least 1");
  check_unique(states, "states");
  check_unique(principal_actions, "principal_actions");
  check_unique(agent_actions, "agent_actions");
  check_unique(principal_obs, "principal_obs");
  check_unique(agent_obs, "agent_obs");

  std::size_t n_out = static_cast<std::size_t>(num_outcomes());
  if (initial.size() != n_out) {
    throw ValidationError("initial has " + std::to_string(initial.size()) +
                          " entries, expected " + std::to_string(n_out));
  }
  check_row(initial, 0, n_out, "initial");

  std::size_t rows = static_cast<std::size_t>(horizon - 1) * num_states() *
                     num_ap() * num_aa();
  if (transitions.size() != rows * n_out) {
    throw ValidationError("transitions has " + std::to_string(transitions.size()) +
                          " entries, expected " + std::to_string(rows * n_out));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    check_row(transitions, r * n_out, n_out, "transition row " + std::to_string(r));
  }
  for (const auto* rw : {&rewards_principal, &rewards_agent}) {
    if (rw->size() != rows) {
      throw ValidationError("reward table has " + std::to_string(rw->size()) +
                            " entries, expected " + std::to_string(rows));
    }
    for (double v : *rw) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("reward " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }
}

std::string GameModel::to_json() const {
  json j;
  j["states"] = states;
  j["principal_actions"] = principal_actions;
  j["agent_actions"] = agent_actions;
  j["principal_obs"] = principal_obs;
  j["agent_obs"] = agent_obs;
  j["horizon"] = horizon;
  j["initial"] = initial;

  // Transitions nest as [h-1][s][aP][aA] -> flat outcome row; rewards as
  // [h-1][s][aP][aA] scalars.
  json tr = json::array();
  json rp = json::array();
  json ra = json::array();
  std::size_t n_out = static_cast<std::size_t>(num_outcomes());
  std::size_t r = 0;
  for (int h = 0; h < horizon - 1; ++h) {
    json th = json::array(), rph = json::array(), rah = json::array();
    for (int s = 0; s < num_states(); ++s) {
      json ts = json::array(), rps = json::array(), ras = json::array();
      for (int ap = 0; ap < num_ap(); ++ap) {
        json ta = json::array(), rpa = json::array(), raa = json::array();
        for (int aa = 0; aa < num_aa(); ++aa, ++r) {
          auto first = transitions.begin() + r * n_out;
          ta.push_back(std::vector<double>(first, first + n_out));
          rpa.push_back(rewards_principal[r]);
          raa.push_back(rewards_agent[r]);
        }
        ts.push_back(std::move(ta));
        rps.push_back(std::move(rpa));
        ras.push_back(std::move(raa));
      }
      th.push_back(std::move(ts));
      rph.push_back(std::move(rps));
      rah.push_back(std::move(ras));
    }
    tr.push_back(std::move(th));
    rp.push_back(std::move(rph));
    ra.push_back(std::move(rah));
  }
  j["transitions"] = std::move(tr);
  j["rewards_principal"] = std::move(rp);
  j["rewards_agent"] = std::move(ra);
  return j.dump(2);
}

GameModel GameModel::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  GameModel m;
  m.states = get_names(j, "states");
  m.principal_actions = get_names(j, "principal_actions");
  m.agent_actions = get_names(j, "agent_actions");
  m.principal_obs = get_names(j, "principal_obs");
  m.agent_obs = get_names(j, "agent_obs");
  if (!j.contains("horizon") || !j.at("horizon").is_number_integer()) {
    throw ParseError("missing or non-integer horizon");
  }
  m.horizon = j.at("horizon").get<int>();
  if (!j.contains("initial")) throw ParseError("missing initial");
  m.initial = get_flat(j.at("initial"), "initial");

  auto walk = [&](const char* key, auto&& leaf) {
    if (!j.contains(key)) throw ParseError(std::string("missing ") + key);
    const json& top = j.at(key);
    if (!top.is_array()) throw ParseError(std::string("expected array for ") + key);
    for (const auto& lh : top) {
      for (const auto& ls : lh) {
        for (const auto& la : ls) {
          for (const auto& le : la) leaf(le);
        }
      }
    }
  };
  try {
    walk("transitions", [&](const json& row) {
      auto r = get_flat(row, "transition row");
      m.transitions.insert(m.transitions.end(), r.begin(), r.end());
    });
    walk("rewards_principal", [&](const json& v) {
      if (!v.is_number()) throw ParseError("non-numeric reward");
      m.rewards_principal.push_back(v.get<double>());
    });
    walk("rewards_agent", [&](const json& v) {
      if (!v.is_number()) throw ParseError("non-numeric reward");
      m.rewards_agent.push_back(v.get<double>());
    });
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed nested table: ") + e.what());
  }
  // The final step pays nothing, so a file may spell that block out or leave
  // it off.  When present it must be exactly zero: reject rather than zero it
  // silently.
  if (m.horizon >= 1) {
    std::size_t per_step = static_cast<std::size_t>(m.num_states()) *
                           m.num_ap() * m.num_aa();
    std::size_t want = static_cast<std::size_t>(m.horizon - 1) * per_step;
    for (auto* rw : {&m.rewards_principal, &m.rewards_agent}) {
      if (rw->size() != want + per_step) continue;
      for (std::size_t i = want; i < rw->size(); ++i) {
        if ((*rw)[i] != 0.0) {
          throw ValidationError(
              "step-" + std::to_string(m.horizon) +
              " rewards must be exactly 0 (the terminal step pays nothing), got " +
              std::to_string((*rw)[i]));
        }
      }
      rw->resize(want);
    }
  }
  m.validate();
  return m;
}

GameModel GameModel::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace spag
