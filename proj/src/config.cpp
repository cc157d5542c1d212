#include "lsnm/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lsnm/csv.hpp"

namespace lsnm {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int k = 15; k >= 0; --k, v >>= 4) s[static_cast<std::size_t>(k)] = digits[v & 0xf];
  return s;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view context) {
  KeyValueConfig c;
  c.bytes_ = std::string(text);
  std::istringstream in(c.bytes_);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = csv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = std::string(context) + ":" + std::to_string(number);
    if (eq == std::string_view::npos) throw ConfigInvalid(where + ": expected key = value");
    const std::string key(csv::trim(t.substr(0, eq)));
    const std::string value(csv::trim(t.substr(eq + 1)));
    if (key.empty()) throw ConfigInvalid(where + ": empty key");
    if (!c.values_.emplace(key, value).second) throw ConfigInvalid(where + ": duplicate key '" + key + "'");
  }
  return c;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigInvalid("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path);
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (!csv::is_number(it->second)) throw ConfigInvalid(key + ": expected a number, got '" + it->second + "'");
  return csv::parse_double(it->second, key);
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  const bool digits = !v.empty() && std::all_of(v.begin() + (v[0] == '-' ? 1 : 0), v.end(), ::isdigit) &&
                      v != "-";
  if (!digits) throw ConfigInvalid(key + ": expected an integer, got '" + v + "'");
  return std::stoll(v);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ConfigInvalid(key + ": expected true or false, got '" + it->second + "'");
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::string> out;
  for (const auto& s : csv::split(it->second)) {
    const std::string t(csv::trim(s));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

void KeyValueConfig::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigInvalid("unknown config key '" + k + "'");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "seed",
      "sim.scenario", "sim.n_subjects", "sim.n_regions", "sim.rho_true", "sim.tau_u_true", "sim.sigma_b_true",
      "sim.sigma_true", "sim.mu0", "sim.sd0", "sim.mu1", "sim.sd1", "sim.mu2", "sim.sd2", "sim.mu_quad",
      "sim.sd_quad", "sim.abnormal_fraction", "sim.extent", "sim.severity", "sim.delta", "sim.abnormal_regions",
      "sim.fixed_visits", "sim.min_visits", "sim.max_visits", "sim.dropout_intercept", "sim.dropout_age",
      "sim.dropout_burden", "sim.region_missing", "sim.topology",
      "sampler.chains", "sampler.warmup", "sampler.samples", "sampler.thin", "sampler.rho_step",
      "sampler.scale_step", "sampler.adapt", "sampler.center_u", "sampler.collapsed", "sampler.parallel_chains",
      "prior.sigma_beta", "prior.scale_sigma", "prior.scale_sigma_b", "prior.scale_tau_u", "prior.rho_a",
      "prior.rho_b",
      "em.max_iter", "em.tolerance",
      "score.mode", "score.draws",
      "study.scenarios", "study.models", "study.replicates"};
  return keys;
}

StudyPlan study_plan_from(const KeyValueConfig& c) {
  c.reject_unknown(config_keys());
  StudyPlan plan;
  plan.seed = static_cast<std::uint64_t>(c.get_int("seed", 1));

  ScenarioConfig& s = plan.base.scenario;
  if (c.has("sim.scenario")) s.scenario = parse_scenario(c.get("sim.scenario", ""));
  s.n_subjects = static_cast<int>(c.get_int("sim.n_subjects", s.n_subjects));
  s.n_regions = static_cast<int>(c.get_int("sim.n_regions", s.n_regions));
  if (c.has("sim.rho_true")) s.rho_true = c.get_double("sim.rho_true", 0.0);
  s.tau_u_true = c.get_double("sim.tau_u_true", s.tau_u_true);
  s.sigma_b_true = c.get_double("sim.sigma_b_true", s.sigma_b_true);
  s.sigma_true = c.get_double("sim.sigma_true", s.sigma_true);
  s.mu0 = c.get_double("sim.mu0", s.mu0);
  s.sd0 = c.get_double("sim.sd0", s.sd0);
  s.mu1 = c.get_double("sim.mu1", s.mu1);
  s.sd1 = c.get_double("sim.sd1", s.sd1);
  s.mu2 = c.get_double("sim.mu2", s.mu2);
  s.sd2 = c.get_double("sim.sd2", s.sd2);
  s.mu_quad = c.get_double("sim.mu_quad", s.mu_quad);
  s.sd_quad = c.get_double("sim.sd_quad", s.sd_quad);
  s.abnormal_fraction = c.get_double("sim.abnormal_fraction", s.abnormal_fraction);
  if (c.has("sim.extent")) s.extent = parse_extent(c.get("sim.extent", ""));
  if (c.has("sim.severity")) s.severity = parse_severity(c.get("sim.severity", ""));
  if (c.has("sim.delta")) s.delta = c.get_double("sim.delta", 0.0);
  for (const auto& r : c.get_list("sim.abnormal_regions", {})) {
    if (!csv::is_number(r)) throw ConfigInvalid("sim.abnormal_regions: expected region indices, got '" + r + "'");
    s.abnormal_regions.push_back(static_cast<int>(csv::parse_double(r, "sim.abnormal_regions")));
  }
  s.fixed_visits = static_cast<int>(c.get_int("sim.fixed_visits", s.fixed_visits));
  s.min_visits = static_cast<int>(c.get_int("sim.min_visits", s.min_visits));
  s.max_visits = static_cast<int>(c.get_int("sim.max_visits", s.max_visits));
  s.dropout_intercept = c.get_double("sim.dropout_intercept", s.dropout_intercept);
  s.dropout_age = c.get_double("sim.dropout_age", s.dropout_age);
  s.dropout_burden = c.get_double("sim.dropout_burden", s.dropout_burden);
  s.region_missing = c.get_double("sim.region_missing", s.region_missing);
  if (c.has("sim.topology")) s.topology = parse_topology(c.get("sim.topology", ""));
  s.seed = plan.seed;
  s.check();

  SamplerConfig& m = plan.base.sampler;
  m.n_chains = static_cast<int>(c.get_int("sampler.chains", m.n_chains));
  m.n_warmup = static_cast<int>(c.get_int("sampler.warmup", m.n_warmup));
  m.n_samples = static_cast<int>(c.get_int("sampler.samples", m.n_samples));
  m.thin = static_cast<int>(c.get_int("sampler.thin", m.thin));
  m.rho_step = c.get_double("sampler.rho_step", m.rho_step);
  m.scale_step = c.get_double("sampler.scale_step", m.scale_step);
  m.adapt = c.get_bool("sampler.adapt", m.adapt);
  m.center_u = c.get_bool("sampler.center_u", m.center_u);
  m.collapsed = c.get_bool("sampler.collapsed", m.collapsed);
  m.parallel_chains = c.get_bool("sampler.parallel_chains", m.parallel_chains);
  m.seed = plan.seed;
  m.check();

  PriorConfig& p = plan.base.prior;
  p.sigma_beta = c.get_double("prior.sigma_beta", p.sigma_beta);
  p.scale_sigma = c.get_double("prior.scale_sigma", p.scale_sigma);
  p.scale_sigma_b = c.get_double("prior.scale_sigma_b", p.scale_sigma_b);
  p.scale_tau_u = c.get_double("prior.scale_tau_u", p.scale_tau_u);
  p.rho_a = c.get_double("prior.rho_a", p.rho_a);
  p.rho_b = c.get_double("prior.rho_b", p.rho_b);
  p.check();

  plan.base.em.max_iter = static_cast<int>(c.get_int("em.max_iter", plan.base.em.max_iter));
  plan.base.em.tolerance = c.get_double("em.tolerance", plan.base.em.tolerance);
  if (plan.base.em.max_iter < 1 || !(plan.base.em.tolerance > 0.0))
    throw ConfigInvalid("em.max_iter and em.tolerance must be positive");

  if (c.has("score.mode")) plan.base.score_mode = parse_score_mode(c.get("score.mode", ""));
  const long long draws = c.get_int("score.draws", static_cast<long long>(plan.base.score_draws));
  if (draws < 0) throw ConfigInvalid("score.draws must be >= 0");
  plan.base.score_draws = static_cast<std::size_t>(draws);

  if (c.has("study.scenarios")) {
    for (const auto& name : c.get_list("study.scenarios", {})) plan.scenarios.push_back(parse_scenario(name));
  } else {
    plan.scenarios = all_scenarios();
  }
  if (c.has("study.models")) {
    plan.base.models.clear();
    for (const auto& name : c.get_list("study.models", {})) plan.base.models.push_back(parse_model_kind(name));
  }
  if (plan.scenarios.empty() || plan.base.models.empty())
    throw ConfigInvalid("study.scenarios and study.models must not be empty");
  plan.replicates = static_cast<int>(c.get_int("study.replicates", plan.replicates));
  if (plan.replicates < 1) throw ConfigInvalid("study.replicates must be >= 1");
  return plan;
}

std::uint64_t replicate_seed(std::uint64_t seed, Scenario scenario, int k) {
  return derive_seed(derive_seed(seed, 1000 + static_cast<std::uint64_t>(scenario)), static_cast<std::uint64_t>(k));
}

}  // namespace lsnm
