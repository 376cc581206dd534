#include "mrn/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace mrn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::set<std::string>& section_names() {
  static const std::set<std::string> names = [] {
    std::set<std::string> out;
    for (const auto& k : config_schema()) out.insert(k.section);
    return out;
  }();
  return names;
}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"", "output_dir", "runs", "output directory, relative to MRN_OUTPUT_ROOT when that is set"},
      {"", "workers", "1", "parallel runs"},

      {"gradcheck", "trials", "100", "random parameterizations per architecture"},
      {"gradcheck", "seed", "0", "seed of the first trial"},
      {"gradcheck", "step", "1e-5", "central difference step"},
      {"gradcheck", "tol", "1e-4", "maximum relative error"},

      {"verify-theory", "corpus_seed", "7", "seed of the MDP corpus"},
      {"verify-theory", "mdps", "50", "MDPs with goal space S x A"},
      {"verify-theory", "aggregated_mdps", "20", "MDPs with an onto, non-injective goal map"},
      {"verify-theory", "max_states", "6", "largest state count"},
      {"verify-theory", "max_actions", "3", "largest action count"},
      {"verify-theory", "vi_tol", "1e-10", "value iteration tolerance"},
      {"verify-theory", "slack", "1e-9", "allowed triangle and identity slack"},

      {"toy", "arch", "mrn, mrn-sym-only", "critic variants"},
      {"toy", "eta", "0.1, 0.25, 0.5, 1.0", "white frame widths"},
      {"toy", "grid_n", "64", "grid nodes per side"},
      {"toy", "n_train", "20", "training pairs"},
      {"toy", "n_eval", "10000", "evaluation pairs"},
      {"toy", "iterations", "2000", "full-batch Adam steps"},
      {"toy", "eval_every", "50", "generalization error interval"},
      {"toy", "lr", "0.001", "learning rate"},
      {"toy", "seeds", "0, 1, 2, 3, 4", "run seeds (dataset and initialization)"},
      {"toy", "asym_dim", "16", "K of the asymmetric head"},
      {"toy", "precision", "float", "float or double"},
      {"toy", "k_values", "0, 1, 8, 64, 176", "K study widths, ascending; empty skips the study"},
      {"toy", "k_eta", "0.1", "K study frame width"},
      {"toy", "k_train", "100", "K study training pairs before reversal"},
      {"toy", "k_reversed", "true", "add the reversed copy of each K study pair"},
      {"toy", "k_dataset_seed", "0", "K study dataset seed"},
      {"toy", "k_iterations", "2000", "K study Adam steps"},

      {"train", "arch", "mrn", "critic variants"},
      {"train", "seeds", "100, 200, 300, 400, 500", "run seeds"},
      {"train", "epochs", "50", "epochs"},
      {"train", "cycles_per_epoch", "10", "collection/update cycles per epoch"},
      {"train", "episodes_per_cycle", "10", "episodes collected per cycle"},
      {"train", "updates_per_cycle", "40", "gradient updates per cycle"},
      {"train", "batch_size", "256", "transitions per update"},
      {"train", "buffer_episodes", "10000", "replay capacity in episodes"},
      {"train", "future_p", "0.8", "hindsight relabelling probability"},
      {"train", "lr", "0.001", "actor and critic learning rate"},
      {"train", "gamma", "0.98", "discount"},
      {"train", "polyak", "0.95", "target network averaging"},
      {"train", "noise_std", "0.2", "Gaussian exploration noise, in units of a_max"},
      {"train", "random_eps", "0.2", "probability of a uniform random action"},
      {"train", "normalize", "true", "running state/goal normalization"},
      {"train", "eval_rollouts", "100", "evaluation episodes per epoch"},
      {"train", "horizon", "50", "episode length"},
      {"train", "a_max", "0.05", "largest displacement per axis"},
      {"train", "eps_goal", "0.03", "goal tolerance"},
      {"train", "wall", "false", "enable the wall obstacle"},
      {"train", "precision", "float", "float or double"},
      {"train", "checkpoint", "true", "save the trained agent of every run"},
      {"train", "mono_hidden", "default", "sizing override"},
      {"train", "mono_layers", "default", "sizing override"},
      {"train", "bvn_hidden", "default", "sizing override"},
      {"train", "bvn_layers", "default", "sizing override"},
      {"train", "encoder_hidden", "default", "sizing override"},
      {"train", "head_hidden", "default", "sizing override"},
      {"train", "embed_dim", "default", "sizing override"},
      {"train", "asym_dim", "default", "sizing override (K)"},
      {"train", "sym_reduction", "mean", "mean, sum or norm"},
      {"train", "actor_hidden", "256", "actor width"},
      {"train", "actor_layers", "3", "actor hidden layers"},

      {"eval", "checkpoint", "", "agent file written by train"},
      {"eval", "arch", "mrn", "critic variant of the checkpoint"},
      {"eval", "rollouts", "100", "evaluation episodes"},
      {"eval", "seed", "0", "evaluation seed"},
  };
  return schema;
}

ExperimentConfig::ExperimentConfig() {
  for (const auto& k : config_schema()) values_[k.section][k.key] = k.default_value;
}

void ExperimentConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  const auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown section [" + section + "]");
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown key '" + qualified(section, key) + "'");
  k->second = value;
}

void ExperimentConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string lhs = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  // Section names may contain '-', keys never contain '.'.
  const auto dot = lhs.rfind('.');
  if (dot == std::string::npos) {
    set("", lhs, value);
  } else {
    set(lhs.substr(0, dot), lhs.substr(dot + 1), value);
  }
}

void ExperimentConfig::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string where = source + ":" + std::to_string(number) + ": ";
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section_names().count(section) == 0 || section.empty()) {
        throw ConfigError(where + "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    try {
      set(section, key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void ExperimentConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  merge_text(text.str(), path);
}

const std::string& ExperimentConfig::get(const std::string& section, const std::string& key) const {
  const auto s = values_.find(section);
  if (s == values_.end()) throw ConfigError("unknown section [" + section + "]");
  const auto k = s->second.find(key);
  if (k == s->second.end()) throw ConfigError("unknown key '" + qualified(section, key) + "'");
  return k->second;
}

double ExperimentConfig::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno != 0) {
    throw ConfigError("'" + qualified(section, key) + "' must be a number, got '" + v + "'");
  }
  return out;
}

long long ExperimentConfig::get_int(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  char* end = nullptr;
  errno = 0;
  const long long out = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno != 0) {
    throw ConfigError("'" + qualified(section, key) + "' must be an integer, got '" + v + "'");
  }
  return out;
}

bool ExperimentConfig::get_bool(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + qualified(section, key) + "' must be true or false, got '" + v + "'");
}

std::vector<std::string> ExperimentConfig::get_list(const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(section, key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& section, const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_list(section, key)) {
    char* end = nullptr;
    const double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) {
      throw ConfigError("'" + qualified(section, key) + "' must be a list of numbers, got '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::uint64_t> ExperimentConfig::get_seeds(const std::string& section, const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : get_list(section, key)) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(item.c_str(), &end, 10);
    if (item.front() == '-' || end != item.c_str() + item.size() || errno != 0) {
      throw ConfigError("'" + qualified(section, key) + "' must be a list of non-negative integers, got '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::string ExperimentConfig::to_text(const std::vector<std::string>& sections) const {
  std::ostringstream os;
  std::string current;
  bool first = true;
  for (const auto& k : config_schema()) {
    if (!k.section.empty() && !sections.empty() &&
        std::find(sections.begin(), sections.end(), k.section) == sections.end()) {
      continue;
    }
    if (k.section != current || first) {
      if (!k.section.empty()) os << (first ? "" : "\n") << "[" << k.section << "]\n";
      current = k.section;
      first = false;
    }
    os << k.key << " = " << get(k.section, k.key) << "\n";
  }
  return os.str();
}

namespace {

CriticKind kind_of(const std::string& arch) {
  try {
    return parse_critic_kind(arch);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void override_size(const ExperimentConfig& config, const std::string& key, Index& field) {
  if (config.get("train", key) == "default") return;
  const long long v = config.get_int("train", key);
  if (v < 0) throw ConfigError("'train." + key + "' must be non-negative");
  field = static_cast<Index>(v);
}

SymReduction reduction_of(const std::string& name) {
  if (name == "mean") return SymReduction::Mean;
  if (name == "sum") return SymReduction::Sum;
  if (name == "norm") return SymReduction::Norm;
  throw ConfigError("'train.sym_reduction' must be mean, sum or norm, got '" + name + "'");
}

}  // namespace

TrainConfig make_train_config(const ExperimentConfig& config, const std::string& arch, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  t.arch_label = arch;
  t.agent.critic = default_sizing(kind_of(arch));
  auto& c = t.agent.critic;
  override_size(config, "mono_hidden", c.mono_hidden);
  override_size(config, "mono_layers", c.mono_layers);
  override_size(config, "bvn_hidden", c.bvn_hidden);
  override_size(config, "bvn_layers", c.bvn_layers);
  override_size(config, "encoder_hidden", c.encoder_hidden);
  override_size(config, "head_hidden", c.head_hidden);
  override_size(config, "embed_dim", c.embed_dim);
  override_size(config, "asym_dim", c.asym_dim);
  c.sym_reduction = reduction_of(config.get("train", "sym_reduction"));
  t.agent.actor.hidden = static_cast<Index>(config.get_int("train", "actor_hidden"));
  t.agent.actor.layers = static_cast<Index>(config.get_int("train", "actor_layers"));
  t.agent.lr = config.get_double("train", "lr");
  t.agent.gamma = config.get_double("train", "gamma");
  t.agent.polyak = config.get_double("train", "polyak");
  t.agent.normalize = config.get_bool("train", "normalize");
  t.env.horizon = static_cast<int>(config.get_int("train", "horizon"));
  t.env.a_max = config.get_double("train", "a_max");
  t.env.eps_goal = config.get_double("train", "eps_goal");
  t.env.wall = config.get_bool("train", "wall");
  t.exploration.noise_std = config.get_double("train", "noise_std");
  t.exploration.random_eps = config.get_double("train", "random_eps");
  t.epochs = static_cast<int>(config.get_int("train", "epochs"));
  t.cycles_per_epoch = static_cast<int>(config.get_int("train", "cycles_per_epoch"));
  t.episodes_per_cycle = static_cast<int>(config.get_int("train", "episodes_per_cycle"));
  t.updates_per_cycle = static_cast<int>(config.get_int("train", "updates_per_cycle"));
  t.batch_size = static_cast<int>(config.get_int("train", "batch_size"));
  const long long buffer = config.get_int("train", "buffer_episodes");
  if (buffer <= 0) throw ConfigError("'train.buffer_episodes' must be positive");
  t.buffer_episodes = static_cast<std::size_t>(buffer);
  t.future_p = config.get_double("train", "future_p");
  t.eval_rollouts = static_cast<int>(config.get_int("train", "eval_rollouts"));
  uses_double(config, "train");
  return t;
}

std::string train_config_id(const ExperimentConfig& config) {
  std::ostringstream os;
  for (const auto& k : config_schema()) {
    if (k.section != "train" || k.key == "arch" || k.key == "seeds") continue;
    os << k.key << "=" << config.get("train", k.key) << ";";
  }
  return os.str();
}

RegressionConfig make_toy_regression(const ExperimentConfig& config, const std::string& arch, std::uint64_t seed) {
  RegressionConfig r;
  r.critic = toy_critic_config(kind_of(arch), static_cast<Index>(config.get_int("toy", "asym_dim")));
  r.iterations = static_cast<int>(config.get_int("toy", "iterations"));
  r.eval_every = static_cast<int>(config.get_int("toy", "eval_every"));
  r.lr = config.get_double("toy", "lr");
  r.seed = seed;
  return r;
}

bool uses_double(const ExperimentConfig& config, const std::string& section) {
  const std::string& p = config.get(section, "precision");
  if (p == "float") return false;
  if (p == "double") return true;
  throw ConfigError("'" + section + ".precision' must be float or double, got '" + p + "'");
}

}  // namespace mrn
