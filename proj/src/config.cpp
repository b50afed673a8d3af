#include "s2d/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "s2d/csv.hpp"
#include "s2d/rng.hpp"

namespace s2d {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

[[noreturn]] void config_error(const std::string& source, const std::string& msg, int line = 0) {
  std::string where = source;
  if (line > 0) where += ":" + std::to_string(line);
  throw std::runtime_error("config error (" + where + "): " + msg);
}

}  // namespace

std::string ParsedConfig::require(const std::string& key) const {
  auto it = entries.find(key);
  if (it == entries.end())
    config_error(source_name, "missing required key '" + key + "'");
  it->second.used = true;
  return it->second.value;
}

std::string ParsedConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = entries.find(key);
  if (it == entries.end()) return fallback;
  it->second.used = true;
  return it->second.value;
}

double ParsedConfig::get_double(const std::string& key, double fallback) const {
  auto it = entries.find(key);
  if (it == entries.end()) return fallback;
  it->second.used = true;
  try {
    size_t pos = 0;
    double v = std::stod(it->second.value, &pos);
    if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(key, "expected a number, got '" + it->second.value + "'");
  }
}

long ParsedConfig::get_long(const std::string& key, long fallback) const {
  auto it = entries.find(key);
  if (it == entries.end()) return fallback;
  it->second.used = true;
  try {
    size_t pos = 0;
    long v = std::stol(it->second.value, &pos);
    if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + it->second.value + "'");
  }
}

bool ParsedConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = entries.find(key);
  if (it == entries.end()) return fallback;
  it->second.used = true;
  const std::string& v = it->second.value;
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  fail(key, "expected on/off, got '" + v + "'");
}

void ParsedConfig::fail(const std::string& key, const std::string& msg) const {
  auto it = entries.find(key);
  config_error(source_name, "key '" + key + "': " + msg,
               it != entries.end() ? it->second.line : 0);
}

void ParsedConfig::check_all_used() const {
  for (const auto& [key, entry] : entries)
    if (!entry.used)
      config_error(source_name, "unknown key '" + key + "'", entry.line);
}

ParsedConfig parse_config_text(const std::string& text, const std::string& source_name) {
  ParsedConfig pc;
  pc.source_name = source_name;
  std::stringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments: full-line or trailing after whitespace
    size_t hash = line.find('#');
    if (hash != std::string::npos &&
        (hash == 0 || line[hash - 1] == ' ' || line[hash - 1] == '\t'))
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(source_name, "malformed section header", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) config_error(source_name, "empty section name", lineno);
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      config_error(source_name, "expected key = value", lineno);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_error(source_name, "empty key", lineno);
    std::string full = section.empty() ? key : section + "." + key;
    if (pc.entries.count(full))
      config_error(source_name, "duplicate key '" + full + "'", lineno);
    pc.entries[full] = {value, lineno, false};
  }
  return pc;
}

ParsedConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

std::string canonical_config_hash(const ParsedConfig& pc) {
  std::string canon;
  for (const auto& [key, entry] : pc.entries) {  // std::map iterates sorted
    canon += key;
    canon += '=';
    std::string v = entry.value;
    v.erase(std::remove_if(v.begin(), v.end(),
                           [](unsigned char c) { return std::isspace(c); }),
            v.end());
    canon += v;
    canon += '\n';
  }
  uint64_t h = fnv1a64(canon);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

UnitKind unit_from(const ParsedConfig& pc, const std::string& key, UnitKind fallback) {
  std::string v = pc.get(key, "");
  if (v.empty()) return fallback;
  if (v == "episodes") return UnitKind::episodes;
  if (v == "steps") return UnitKind::steps;
  pc.fail(key, "expected 'episodes' or 'steps'");
}

std::vector<int> int_list(const ParsedConfig& pc, const std::string& key,
                          const std::vector<int>& fallback) {
  std::string v = pc.get(key, "");
  if (v.empty()) return fallback;
  std::vector<int> out;
  for (const std::string& t : split_list(v)) {
    try {
      out.push_back(std::stoi(t));
    } catch (const std::exception&) {
      pc.fail(key, "expected a comma list of integers");
    }
  }
  return out;
}

}  // namespace

ExperimentConfig bind_experiment_config(const ParsedConfig& pc) {
  ExperimentConfig cfg;
  cfg.config_hash = canonical_config_hash(pc);

  // [env]
  cfg.base.env.kind = env_kind_from_string(pc.get("env.kind", "fixed4"));
  cfg.base.env.max_steps = static_cast<int>(pc.get_long("env.max_steps", 50));
  cfg.base.env.living_penalty = pc.get_double("env.living_penalty", -0.1);
  cfg.base.env.goal_bonus = pc.get_double("env.goal_bonus", 1.0);
  cfg.base.env.goal_radius_p1 = static_cast<int>(pc.get_long("env.goal_radius_p1", 0));
  cfg.base.env.seed = static_cast<uint64_t>(pc.get_long("env.seed", 0));
  cfg.base.env.arm_length = static_cast<int>(pc.get_long("env.arm_length", 5));
  cfg.base.env.view_radius = static_cast<int>(pc.get_long("env.view_radius", 2));
  {
    std::string tg = pc.get("env.train_goals", "");
    if (!tg.empty()) {
      cfg.base.env.train_goals.clear();
      for (const std::string& t : split_list(tg)) cfg.base.env.train_goals.insert(std::stoi(t));
    }
  }
  cfg.base.env.validate();

  // [agent]
  std::string algo = pc.require("agent.algo");
  if (algo == "dqn")
    cfg.base.algo = Algo::dqn;
  else if (algo == "ppo")
    cfg.base.algo = Algo::ppo;
  else
    pc.fail("agent.algo", "expected 'dqn' or 'ppo'");

  cfg.base.dqn.lr = pc.get_double("agent.dqn.lr", cfg.base.dqn.lr);
  cfg.base.dqn.gamma = pc.get_double("agent.dqn.gamma", cfg.base.dqn.gamma);
  cfg.base.dqn.batch = static_cast<int>(pc.get_long("agent.dqn.batch", cfg.base.dqn.batch));
  cfg.base.dqn.replay_capacity =
      static_cast<int>(pc.get_long("agent.dqn.replay_capacity", cfg.base.dqn.replay_capacity));
  cfg.base.dqn.target_sync =
      static_cast<int>(pc.get_long("agent.dqn.target_sync", cfg.base.dqn.target_sync));
  cfg.base.dqn.eps_start = pc.get_double("agent.dqn.eps_start", cfg.base.dqn.eps_start);
  cfg.base.dqn.eps_end = pc.get_double("agent.dqn.eps_end", cfg.base.dqn.eps_end);
  cfg.base.dqn.hidden = int_list(pc, "agent.dqn.hidden", cfg.base.dqn.hidden);

  cfg.base.ppo.lr = pc.get_double("agent.ppo.lr", cfg.base.ppo.lr);
  cfg.base.ppo.gamma = pc.get_double("agent.ppo.gamma", cfg.base.ppo.gamma);
  cfg.base.ppo.clip = pc.get_double("agent.ppo.clip", cfg.base.ppo.clip);
  cfg.base.ppo.gae_lambda = pc.get_double("agent.ppo.gae_lambda", cfg.base.ppo.gae_lambda);
  cfg.base.ppo.entropy_coef = pc.get_double("agent.ppo.entropy_coef", cfg.base.ppo.entropy_coef);
  cfg.base.ppo.value_coef = pc.get_double("agent.ppo.value_coef", cfg.base.ppo.value_coef);
  cfg.base.ppo.update_every_episodes = static_cast<int>(
      pc.get_long("agent.ppo.update_every_episodes", cfg.base.ppo.update_every_episodes));
  cfg.base.ppo.epochs = static_cast<int>(pc.get_long("agent.ppo.epochs", cfg.base.ppo.epochs));
  cfg.base.ppo.minibatch =
      static_cast<int>(pc.get_long("agent.ppo.minibatch", cfg.base.ppo.minibatch));
  cfg.base.ppo.hidden = int_list(pc, "agent.ppo.hidden", cfg.base.ppo.hidden);
  cfg.base.ppo.rnn_truncation =
      static_cast<int>(pc.get_long("agent.ppo.rnn_truncation", cfg.base.ppo.rnn_truncation));

  // [curriculum]
  cfg.baselines = split_list(pc.get("curriculum.baselines", "s2d"));
  if (cfg.baselines.empty()) pc.fail("curriculum.baselines", "expected at least one baseline");
  for (const std::string& b : cfg.baselines)
    if (b != "only_sparse" && b != "only_dense" && b != "s2d" && b != "d2s" && b != "custom")
      pc.fail("curriculum.baselines",
              "unknown baseline '" + b + "' (only_sparse|only_dense|s2d|d2s|custom)");
  cfg.potential_p = static_cast<int>(pc.get_long("curriculum.p", 1));
  if (cfg.potential_p != 1 && cfg.potential_p != 2)
    pc.fail("curriculum.p", "norm order must be 1 or 2");
  if (pc.has("curriculum.gate_radius"))
    cfg.gate_radius = pc.get_double("curriculum.gate_radius", 0.0);
  cfg.progress_bonus = pc.get_bool("curriculum.progress_bonus", false);

  cfg.base.transition_unit = unit_from(pc, "curriculum.unit", UnitKind::episodes);

  std::string preset = pc.get("curriculum.transition_preset", "");
  std::string explicit_transitions = pc.get("curriculum.transitions", "");
  if (!preset.empty() && !explicit_transitions.empty())
    pc.fail("curriculum.transitions", "give either transitions or transition_preset, not both");
  if (!preset.empty()) {
    int idx = preset == "C1" ? 0 : preset == "C2" ? 1 : preset == "C3" ? 2 : -1;
    if (idx < 0) pc.fail("curriculum.transition_preset", "expected C1, C2 or C3");
    if (pc.get("curriculum.unit", "episodes") != "episodes")
      pc.fail("curriculum.transition_preset", "presets C1/C2/C3 are episode counts");
    if (cfg.base.env.kind == EnvKind::crossmaze)
      pc.fail("curriculum.transition_preset",
              "no preset defined for crossmaze; give explicit transitions");
    const long dqn_presets[3] = {100, 200, 300};
    const long ppo_presets[3] = {3000, 5000, 7000};
    cfg.transitions = {cfg.base.algo == Algo::dqn ? dqn_presets[idx] : ppo_presets[idx]};
    cfg.base.transition_unit = UnitKind::episodes;
  } else if (!explicit_transitions.empty()) {
    for (const std::string& t : split_list(explicit_transitions)) {
      try {
        cfg.transitions.push_back(std::stol(t));
      } catch (const std::exception&) {
        pc.fail("curriculum.transitions", "expected a comma list of integers");
      }
    }
  }

  // optional explicit stages for the custom baseline
  for (int k = 1;; ++k) {
    std::string prefix = "curriculum.stage" + std::to_string(k);
    bool any = false;
    for (const auto& [key, entry] : pc.entries)
      if (key.rfind(prefix + ".", 0) == 0) any = true;
    if (!any) break;
    RewardStage st;
    st.shaping_enabled = pc.get_bool(prefix + ".shaping", false);
    st.gamma = pc.get_double(prefix + ".gamma",
                             cfg.base.algo == Algo::dqn ? cfg.base.dqn.gamma : cfg.base.ppo.gamma);
    int p = static_cast<int>(pc.get_long(prefix + ".p", cfg.potential_p));
    if (pc.has(prefix + ".gate_radius"))
      st.gate_radius = pc.get_double(prefix + ".gate_radius", 0.0);
    st.progress_bonus_mode = pc.get_bool(prefix + ".progress_bonus", false);
    if (st.shaping_enabled)
      st.potential = PotentialSpec{p, GridPos{0, 0}, 1.0};  // placeholder, refreshed per episode
    cfg.custom_stages.push_back(st);
  }

  // [run]
  for (const std::string& s : split_list(pc.get("run.seeds", "1")))
    cfg.seeds.push_back(static_cast<uint64_t>(std::stoull(s)));
  if (cfg.seeds.empty()) pc.fail("run.seeds", "expected at least one seed");
  cfg.base.budget = pc.get_long("run.budget", 1000);
  cfg.base.budget_unit = unit_from(pc, "run.budget_unit", UnitKind::episodes);
  cfg.base.checkpoint_every = pc.get_long("run.checkpoint_every_steps", 0);
  for (const std::string& t : split_list(pc.get("run.checkpoint_at_steps", "")))
    cfg.base.checkpoint_at.push_back(std::stol(t));
  cfg.base.eval_episodes = static_cast<int>(pc.get_long("run.eval_episodes", 10));
  cfg.out_dir = pc.get("run.out_dir", "out");

  // [analyses]
  cfg.analyses.landscape = pc.get_bool("analyses.landscape", false);
  cfg.analyses.sharpness = pc.get_bool("analyses.sharpness", false);
  cfg.analyses.actions = pc.get_bool("analyses.actions", false);
  cfg.analyses.features = pc.get_bool("analyses.features", false);
  cfg.analyses.heatmap = pc.get_bool("analyses.heatmap", false);

  pc.check_all_used();

  // cross-field validation
  bool has_multistage = false;
  for (const std::string& b : cfg.baselines)
    if (b == "s2d" || b == "d2s" || (b == "custom" && cfg.custom_stages.size() > 1))
      has_multistage = true;
  if (has_multistage && cfg.transitions.empty())
    pc.fail("curriculum.transitions",
            "multi-stage baselines need transitions or a transition_preset");
  if (!cfg.transitions.empty() && cfg.base.transition_unit == cfg.base.budget_unit &&
      cfg.transitions.back() >= cfg.base.budget)
    pc.fail("run.budget", "budget must exceed the last transition");
  for (const std::string& b : cfg.baselines)
    if (b == "custom" && cfg.custom_stages.empty())
      pc.fail("curriculum.baselines", "custom baseline needs [curriculum.stageK] sections");

  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return bind_experiment_config(parse_config_file(path));
}

Curriculum make_curriculum(const ExperimentConfig& cfg, const std::string& baseline) {
  double gamma = cfg.base.algo == Algo::dqn ? cfg.base.dqn.gamma : cfg.base.ppo.gamma;
  GridEnv probe(cfg.base.env);
  PotentialSpec dense_potential =
      make_potential_spec(probe.free_cells(), cfg.potential_p, probe.goal());

  RewardStage sparse;
  sparse.shaping_enabled = false;
  sparse.gamma = gamma;

  RewardStage dense;
  dense.shaping_enabled = true;
  dense.potential = dense_potential;
  dense.gamma = gamma;
  dense.gate_radius = cfg.gate_radius;
  dense.progress_bonus_mode = cfg.progress_bonus;

  Curriculum c;
  if (baseline == "only_sparse") {
    c.stages = {sparse};
  } else if (baseline == "only_dense") {
    c.stages = {dense};
  } else if (baseline == "s2d") {
    c.stages = {sparse, dense};
    c.transitions = {cfg.transitions.at(0)};
  } else if (baseline == "d2s") {
    c.stages = {dense, sparse};
    c.transitions = {cfg.transitions.at(0)};
  } else if (baseline == "custom") {
    c.stages = cfg.custom_stages;
    for (RewardStage& st : c.stages)
      if (st.shaping_enabled) {
        int p = st.potential ? st.potential->p : cfg.potential_p;
        st.potential = make_potential_spec(probe.free_cells(), p, probe.goal());
      }
    c.transitions.assign(cfg.transitions.begin(),
                         cfg.transitions.begin() + (c.stages.size() - 1));
  } else {
    throw std::invalid_argument("unknown baseline: " + baseline);
  }
  c.validate();
  return c;
}

}  // namespace s2d
