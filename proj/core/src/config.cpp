#include "gdmstack/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <istream>
#include <sstream>

namespace gdmstack {

namespace {

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

template <typename T>
std::string join_values(const std::vector<T>& items) {
  std::vector<std::string> parts;
  for (const auto& v : items) parts.push_back(fmt::format("{}", v));
  return join(parts);
}

std::string to_string(ReverseVariance v) {
  return v == ReverseVariance::beta ? "beta" : "posterior";
}

std::string to_string(DenoiserTarget t) {
  return t == DenoiserTarget::noise ? "noise" : "clean_action";
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig config;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string body = trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source, number));
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty())
      throw ConfigError(fmt::format("{}:{}: empty key", source, number));
    if (config.entries_.count(key))
      throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", source, number, key));
    config.entries_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in, path);
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::dump() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string current;
  std::istringstream in(value);
  while (std::getline(in, current, ',')) {
    std::string item = trim(current);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double parse_number(const std::string& text, const std::string& what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value))
    throw ConfigError(fmt::format("{}: '{}' is not a finite number", what, text));
  return value;
}

double ConfigReader::number(const std::string& key, double fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  return v ? parse_number(*v, key) : fallback;
}

int ConfigReader::integer(const std::string& key, int fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  if (!v) return fallback;
  int value = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), value);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, *v));
  return value;
}

std::uint64_t ConfigReader::unsigned_integer(const std::string& key,
                                             std::uint64_t fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  if (!v) return fallback;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), value);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ConfigError(fmt::format("{}: '{}' is not a non-negative integer", key, *v));
  return value;
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, *v));
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  consumed_.insert(key);
  return config_.find(key).value_or(fallback);
}

std::vector<std::string> ConfigReader::list(const std::string& key,
                                            const std::vector<std::string>& fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  return v ? split_list(*v) : fallback;
}

std::vector<int> ConfigReader::int_list(const std::string& key,
                                        const std::vector<int>& fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  if (!v) return fallback;
  std::vector<int> values;
  for (const auto& item : split_list(*v)) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError(fmt::format("{}: '{}' is not an integer", key, item));
    values.push_back(value);
  }
  return values;
}

std::vector<std::uint64_t> ConfigReader::seed_list(
    const std::string& key, const std::vector<std::uint64_t>& fallback) {
  consumed_.insert(key);
  auto v = config_.find(key);
  if (!v) return fallback;
  std::vector<std::uint64_t> values;
  for (const auto& item : split_list(*v)) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw ConfigError(fmt::format("{}: '{}' is not a seed", key, item));
    values.push_back(value);
  }
  return values;
}

void ConfigReader::reject_unknown() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : config_.entries())
    if (!consumed_.count(key)) unknown.push_back(key);
  if (!unknown.empty())
    throw ConfigError("unknown config keys: " + join(unknown));
}

RewardKind parse_reward_mode(const std::string& name) {
  if (name == "raw" || name == "raw_utility") return RewardKind::raw_utility;
  if (name == "binary" || name == "binary_improvement")
    return RewardKind::binary_improvement;
  throw ConfigError(fmt::format("unknown reward mode '{}' (expected raw or binary)", name));
}

std::string to_string(RewardKind kind) {
  return kind == RewardKind::raw_utility ? "raw" : "binary";
}

void ExperimentConfig::validate() const {
  try {
    ranges.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (solvers.empty()) throw ConfigError("at least one solver is required");
  for (const auto& s : solvers)
    if (std::find(known_solvers().begin(), known_solvers().end(), s) ==
        known_solvers().end())
      throw ConfigError(fmt::format("unknown solver '{}'", s));
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (reward_scale < 0.0) throw ConfigError("reward_scale must be >= 0");
  if (!(oracle_epsilon > 0.0)) throw ConfigError("oracle epsilon must be > 0");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

ExperimentConfig ExperimentConfig::from_kv(const KeyValueConfig& kv) {
  ConfigReader r(kv);
  ExperimentConfig c;
  int version = r.integer("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion)
    throw ConfigError(fmt::format("unsupported schema_version {}", version));

  auto& m = c.ranges.market;
  m.n_devices = r.integer("scenario.n_devices", m.n_devices);
  m.l_max = r.integer("scenario.l_max", m.l_max);
  m.coeff_A = r.number("scenario.coeff_A", m.coeff_A);
  m.coeff_B = r.number("scenario.coeff_B", m.coeff_B);
  m.revenue_F = r.number("scenario.revenue_F", m.revenue_F);
  m.beta = r.number("scenario.beta", m.beta);
  m.price_min = r.number("scenario.price_min", m.price_min);
  m.price_max = r.number("scenario.price_max", m.price_max);
  c.ranges.capacity_min = r.number("scenario.capacity_min", c.ranges.capacity_min);
  c.ranges.capacity_max = r.number("scenario.capacity_max", c.ranges.capacity_max);
  c.ranges.alpha_min = r.number("scenario.alpha_min", c.ranges.alpha_min);
  c.ranges.alpha_max = r.number("scenario.alpha_max", c.ranges.alpha_max);
  c.scenario_seed = r.unsigned_integer("scenario.seed", c.scenario_seed);

  c.solvers = r.list("experiment.solvers", c.solvers);
  c.seeds = r.seed_list("experiment.seeds", c.seeds);
  c.epochs = r.integer("experiment.epochs", c.epochs);
  c.reward_mode = parse_reward_mode(r.text("experiment.reward_mode", "raw"));
  c.reward_scale = r.number("experiment.reward_scale", c.reward_scale);
  c.horizon = r.integer("experiment.horizon", c.horizon);
  c.output_dir = r.text("experiment.output_dir", c.output_dir);
  c.jobs = r.integer("experiment.jobs", c.jobs);
  c.oracle_epsilon = r.number("oracle.epsilon", c.oracle_epsilon);

  auto& g = c.gdm;
  auto& p = g.policy;
  p.steps = r.integer("gdm.steps", p.steps);
  p.beta_start = r.number("gdm.beta_start", p.beta_start);
  p.beta_end = r.number("gdm.beta_end", p.beta_end);
  p.alpha_bar_target = r.number("gdm.alpha_bar_target", p.alpha_bar_target);
  {
    std::string v = r.text("gdm.variance", to_string(p.variance));
    if (v == "beta") p.variance = ReverseVariance::beta;
    else if (v == "posterior") p.variance = ReverseVariance::posterior;
    else throw ConfigError(fmt::format("gdm.variance: unknown value '{}'", v));
    std::string t = r.text("gdm.target", to_string(p.target));
    if (t == "clean_action") p.target = DenoiserTarget::clean_action;
    else if (t == "noise") p.target = DenoiserTarget::noise;
    else throw ConfigError(fmt::format("gdm.target: unknown value '{}'", t));
    p.hidden_activation = parse_activation(
        r.text("gdm.hidden_activation", std::string(to_string(p.hidden_activation))));
    p.output_activation = parse_activation(
        r.text("gdm.output_activation", std::string(to_string(p.output_activation))));
  }
  p.hidden = r.int_list("gdm.hidden", p.hidden);
  g.critic_hidden = r.int_list("gdm.critic_hidden", g.critic_hidden);
  g.buffer_capacity = r.unsigned_integer("gdm.buffer", g.buffer_capacity);
  g.batch_size = r.integer("gdm.batch", g.batch_size);
  g.warmup = r.integer("gdm.warmup", g.warmup);
  g.updates_per_epoch = r.integer("gdm.updates_per_epoch", g.updates_per_epoch);
  g.critic_updates_per_epoch =
      r.integer("gdm.critic_updates_per_epoch", g.critic_updates_per_epoch);
  g.actor_lr = r.number("gdm.actor_lr", g.actor_lr);
  g.critic_lr = r.number("gdm.critic_lr", g.critic_lr);
  g.max_grad_norm = r.number("gdm.max_grad_norm", g.max_grad_norm);
  g.explore_start = r.number("gdm.explore_start", g.explore_start);
  g.explore_end = r.number("gdm.explore_end", g.explore_end);
  g.explore_anneal_fraction =
      r.number("gdm.explore_anneal_fraction", g.explore_anneal_fraction);
  g.discount = r.number("gdm.discount", g.discount);

  auto& q = c.ppo;
  q.batch_size = r.integer("ppo.batch", q.batch_size);
  q.update_passes = r.integer("ppo.update_passes", q.update_passes);
  q.clip = r.number("ppo.clip", q.clip);
  q.entropy_coef = r.number("ppo.entropy_coef", q.entropy_coef);
  q.learning_rate = r.number("ppo.lr", q.learning_rate);
  q.initial_std = r.number("ppo.initial_std", q.initial_std);
  q.hidden = r.int_list("ppo.hidden", q.hidden);

  auto& pc = c.partition;
  pc.calibrate = r.boolean("partition.calibrate", pc.calibrate);
  pc.profile.layer_cost = r.number("partition.layer_cost", pc.profile.layer_cost);
  pc.profile.fixed_cost = r.number("partition.fixed_cost", pc.profile.fixed_cost);
  pc.profile.jitter = r.number("partition.jitter", pc.profile.jitter);
  pc.profile.token_count = r.integer("partition.token_count", pc.profile.token_count);
  pc.profile.hidden_dim = r.integer("partition.hidden_dim", pc.profile.hidden_dim);
  pc.profile.bytes_per_element =
      r.integer("partition.bytes_per_element", pc.profile.bytes_per_element);
  pc.seed = r.unsigned_integer("partition.seed", pc.seed);
  pc.profile.l_max = m.l_max;

  r.reject_unknown();
  c.gdm.epochs = c.epochs;
  c.ppo.epochs = c.epochs;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_kv(KeyValueConfig::load(path));
}

KeyValueConfig ExperimentConfig::to_kv() const {
  KeyValueConfig kv;
  auto num = [&](const std::string& key, double v) { kv.set(key, fmt::format("{}", v)); };
  auto integer = [&](const std::string& key, auto v) { kv.set(key, fmt::format("{}", v)); };
  const auto& m = ranges.market;
  integer("schema_version", kConfigSchemaVersion);
  integer("scenario.n_devices", m.n_devices);
  integer("scenario.l_max", m.l_max);
  num("scenario.coeff_A", m.coeff_A);
  num("scenario.coeff_B", m.coeff_B);
  num("scenario.revenue_F", m.revenue_F);
  num("scenario.beta", m.beta);
  num("scenario.price_min", m.price_min);
  num("scenario.price_max", m.price_max);
  num("scenario.capacity_min", ranges.capacity_min);
  num("scenario.capacity_max", ranges.capacity_max);
  num("scenario.alpha_min", ranges.alpha_min);
  num("scenario.alpha_max", ranges.alpha_max);
  integer("scenario.seed", scenario_seed);
  kv.set("experiment.solvers", join(solvers));
  kv.set("experiment.seeds", join_values(seeds));
  integer("experiment.epochs", epochs);
  kv.set("experiment.reward_mode", to_string(reward_mode));
  num("experiment.reward_scale", reward_scale);
  integer("experiment.horizon", horizon);
  kv.set("experiment.output_dir", output_dir);
  integer("experiment.jobs", jobs);
  num("oracle.epsilon", oracle_epsilon);
  const auto& p = gdm.policy;
  integer("gdm.steps", p.steps);
  num("gdm.beta_start", p.beta_start);
  num("gdm.beta_end", p.beta_end);
  num("gdm.alpha_bar_target", p.alpha_bar_target);
  kv.set("gdm.variance", to_string(p.variance));
  kv.set("gdm.target", to_string(p.target));
  kv.set("gdm.hidden_activation", std::string(to_string(p.hidden_activation)));
  kv.set("gdm.output_activation", std::string(to_string(p.output_activation)));
  kv.set("gdm.hidden", join_values(p.hidden));
  kv.set("gdm.critic_hidden", join_values(gdm.critic_hidden));
  integer("gdm.buffer", gdm.buffer_capacity);
  integer("gdm.batch", gdm.batch_size);
  integer("gdm.warmup", gdm.warmup);
  integer("gdm.updates_per_epoch", gdm.updates_per_epoch);
  integer("gdm.critic_updates_per_epoch", gdm.critic_updates_per_epoch);
  num("gdm.actor_lr", gdm.actor_lr);
  num("gdm.critic_lr", gdm.critic_lr);
  num("gdm.max_grad_norm", gdm.max_grad_norm);
  num("gdm.explore_start", gdm.explore_start);
  num("gdm.explore_end", gdm.explore_end);
  num("gdm.explore_anneal_fraction", gdm.explore_anneal_fraction);
  num("gdm.discount", gdm.discount);
  integer("ppo.batch", ppo.batch_size);
  integer("ppo.update_passes", ppo.update_passes);
  num("ppo.clip", ppo.clip);
  num("ppo.entropy_coef", ppo.entropy_coef);
  num("ppo.lr", ppo.learning_rate);
  num("ppo.initial_std", ppo.initial_std);
  kv.set("ppo.hidden", join_values(ppo.hidden));
  kv.set("partition.calibrate", partition.calibrate ? "true" : "false");
  num("partition.layer_cost", partition.profile.layer_cost);
  num("partition.fixed_cost", partition.profile.fixed_cost);
  num("partition.jitter", partition.profile.jitter);
  integer("partition.token_count", partition.profile.token_count);
  integer("partition.hidden_dim", partition.profile.hidden_dim);
  integer("partition.bytes_per_element", partition.profile.bytes_per_element);
  integer("partition.seed", partition.seed);
  return kv;
}

}  // namespace gdmstack
