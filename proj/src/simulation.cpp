#include "lsnm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>

#include "json.hpp"
#include "lsnm/csv.hpp"

namespace lsnm {

namespace {

const std::vector<std::pair<Scenario, std::string>>& scenario_names() {
  static const std::vector<std::pair<Scenario, std::string>> names{
      {Scenario::none, "none"},
      {Scenario::moderate, "moderate"},
      {Scenario::strong, "strong"},
      {Scenario::variable_visits, "variable_visits"},
      {Scenario::missing_followup, "missing_followup"},
      {Scenario::nonlinear, "nonlinear"}};
  return names;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string padded_id(char prefix, int index, int total) {
  std::string digits = std::to_string(index);
  const std::size_t width = std::to_string(total).size();
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

Scenario parse_scenario(const std::string& s) {
  for (const auto& [value, name] : scenario_names())
    if (name == s) return value;
  throw ConfigInvalid(
      "scenario must be one of {none, moderate, strong, variable_visits, missing_followup, nonlinear}, got '" + s +
      "'");
}

std::string to_string(Scenario s) {
  for (const auto& [value, name] : scenario_names())
    if (value == s) return name;
  return "?";
}

const std::vector<Scenario>& all_scenarios() {
  static const std::vector<Scenario> all{Scenario::none,           Scenario::moderate,
                                         Scenario::strong,         Scenario::variable_visits,
                                         Scenario::missing_followup, Scenario::nonlinear};
  return all;
}

Topology parse_topology(const std::string& s) {
  if (s == "auto" || s == "automatic") return Topology::automatic;
  if (s == "path") return Topology::path;
  if (s == "grid") return Topology::grid;
  if (s == "random_geometric") return Topology::random_geometric;
  throw ConfigInvalid("topology must be one of {auto, path, grid, random_geometric}, got '" + s + "'");
}

Extent parse_extent(const std::string& s) {
  if (s == "localized") return Extent::localized;
  if (s == "diffuse") return Extent::diffuse;
  throw ConfigInvalid("abnormal extent must be one of {localized, diffuse}, got '" + s + "'");
}

Severity parse_severity(const std::string& s) {
  if (s == "mild") return Severity::mild;
  if (s == "severe") return Severity::severe;
  throw ConfigInvalid("abnormal severity must be one of {mild, severe}, got '" + s + "'");
}

double ScenarioConfig::rho() const {
  if (rho_true) return *rho_true;
  switch (scenario) {
    case Scenario::none:
      return 0.0;
    case Scenario::strong:
      return 0.9;
    default:
      return 0.5;
  }
}

double ScenarioConfig::delta_magnitude() const {
  if (delta) return *delta;
  return severity == Severity::mild ? 0.5 * sigma_true : 2.0 * sigma_true;
}

void ScenarioConfig::check() const {
  if (n_subjects < 1) throw ConfigInvalid("n_subjects must be at least 1");
  if (n_regions < 2 || n_regions > RegionGraph::max_regions) throw ConfigInvalid("n_regions must be in [2, 512]");
  if (!(tau_u_true > 0.0) || !(sigma_true > 0.0) || !(sigma_b_true >= 0.0))
    throw ConfigInvalid("generating scales must be positive (sigma_b may be zero)");
  if (!(sd0 >= 0.0) || !(sd1 >= 0.0) || !(sd2 >= 0.0) || !(sd_quad >= 0.0))
    throw ConfigInvalid("coefficient standard deviations must be nonnegative");
  if (!(abnormal_fraction >= 0.0 && abnormal_fraction < 1.0)) throw ConfigInvalid("abnormal_fraction must be in [0, 1)");
  if (fixed_visits < 1 || min_visits < 1 || max_visits < min_visits) throw ConfigInvalid("visit counts are invalid");
  if (!(region_missing >= 0.0 && region_missing < 1.0)) throw ConfigInvalid("region_missing must be in [0, 1)");
  for (int r : abnormal_regions)
    if (r < 0 || r >= n_regions) throw ConfigInvalid("abnormal region index out of range");
}

std::pair<int, int> grid_shape(int n) {
  for (int a = static_cast<int>(std::sqrt(static_cast<double>(n))); a >= 2; --a)
    if (n % a == 0) return {a, n / a};
  return {1, n};
}

RegionGraph make_region_graph(int n, Topology topology, std::uint64_t seed) {
  if (n < 2) throw ConfigInvalid("a region graph needs at least 2 regions");
  if (n > RegionGraph::max_regions) throw ConfigInvalid("at most 512 regions are supported");
  Matrix w = Matrix::Zero(n, n);
  auto link = [&](int a, int b) { w(a, b) = w(b, a) = 1.0; };
  auto [rows, cols] = grid_shape(n);
  if (topology == Topology::automatic) topology = rows >= 2 ? Topology::grid : Topology::path;
  if (topology == Topology::grid && rows < 2) throw ConfigInvalid(std::to_string(n) + " regions do not form a grid");

  std::vector<std::string> labels;
  for (int r = 0; r < n; ++r) labels.push_back("R" + std::to_string(r + 1));

  switch (topology) {
    case Topology::path:
    case Topology::automatic:
      for (int r = 0; r + 1 < n; ++r) link(r, r + 1);
      break;
    case Topology::grid:
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
          if (j + 1 < cols) link(i * cols + j, i * cols + j + 1);
          if (i + 1 < rows) link(i * cols + j, (i + 1) * cols + j);
        }
      break;
    case Topology::random_geometric: {
      RandomStream rng(seed);
      Matrix pts(n, 2);
      for (int r = 0; r < n; ++r) pts.row(r) << rng.uniform(), rng.uniform();
      double radius = 1.5 * std::sqrt(std::log(static_cast<double>(n)) / (std::numbers::pi * n));
      for (;;) {
        w.setZero();
        for (int a = 0; a < n; ++a)
          for (int b = a + 1; b < n; ++b)
            if ((pts.row(a) - pts.row(b)).norm() <= radius) link(a, b);
        if (RegionGraph(w, labels).is_connected()) break;
        radius *= 1.1;
      }
      break;
    }
  }
  return RegionGraph(w, labels);
}

std::vector<int> contiguous_regions(const RegionGraph& graph, int count) {
  const int n = graph.n_regions();
  count = std::clamp(count, 0, n);
  std::vector<int> order;
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty() && static_cast<int>(order.size()) < count) {
    const int r = q.front();
    q.pop();
    order.push_back(r);
    for (int s = 0; s < n; ++s)
      if (graph.adjacency()(r, s) > 0.0 && !seen[s]) {
        seen[s] = 1;
        q.push(s);
      }
  }
  for (int r = 0; r < n && static_cast<int>(order.size()) < count; ++r)
    if (!seen[r]) order.push_back(r);
  std::sort(order.begin(), order.end());
  return order;
}

Simulation generate(const ScenarioConfig& config) {
  config.check();
  RegionGraph graph = make_region_graph(config.n_regions, config.topology, derive_seed(config.seed, 7));
  const double rho = config.rho();
  if (!graph.admissible_interval().contains(rho))
    throw ConfigInvalid("rho_true = " + std::to_string(rho) + " is outside the admissible interval");

  const int n = config.n_subjects;
  const int r_count = config.n_regions;
  const bool nonlinear = config.scenario == Scenario::nonlinear;
  const bool ragged = config.scenario == Scenario::variable_visits || config.scenario == Scenario::missing_followup;
  const bool dropout = config.scenario == Scenario::missing_followup;
  RandomStream rng(config.seed);

  Simulation sim{LongDataset{}, SimTruth{}, graph};
  SimTruth& truth = sim.truth;
  LongDataset& data = sim.data;
  truth.rho = rho;
  truth.tau_u = config.tau_u_true;
  truth.sigma_b = config.sigma_b_true;
  truth.sigma = config.sigma_true;
  truth.design_names = {"(intercept)", "age", "sex"};
  if (nonlinear) truth.design_names.push_back("age_quad");
  const int p_true = static_cast<int>(truth.design_names.size());

  truth.B_true.resize(p_true, r_count);
  for (int r = 0; r < r_count; ++r) {
    truth.B_true(0, r) = config.mu0 + config.sd0 * rng.gaussian();
    truth.B_true(1, r) = config.mu1 + config.sd1 * rng.gaussian();
    truth.B_true(2, r) = config.mu2 + config.sd2 * rng.gaussian();
    if (nonlinear) truth.B_true(3, r) = config.mu_quad + config.sd_quad * rng.gaussian();
  }

  // exactly floor(fraction * n) abnormal subjects, chosen by a Fisher-Yates permutation
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = std::min(i, static_cast<int>(rng.uniform() * (i + 1)));
    std::swap(perm[i], perm[j]);
  }
  truth.abnormal.assign(n, 0);
  const int n_abnormal = static_cast<int>(std::floor(config.abnormal_fraction * n + 1e-9));
  for (int k = 0; k < n_abnormal; ++k) truth.abnormal[perm[k]] = 1;

  if (!config.abnormal_regions.empty()) {
    truth.abnormal_regions = config.abnormal_regions;
    std::sort(truth.abnormal_regions.begin(), truth.abnormal_regions.end());
  } else {
    const int size = config.extent == Extent::localized ? 3 : (r_count + 1) / 2;
    truth.abnormal_regions = contiguous_regions(graph, size);
  }
  const double delta = config.delta_magnitude();

  const auto q_factor = graph.factorize(rho);
  truth.b_true.resize(n);
  truth.u_true.resize(n, r_count);
  truth.delta = Matrix::Zero(n, r_count);
  data.raw_covariate_names = {"age", "sex"};
  for (int r = 0; r < r_count; ++r) data.region_labels.push_back(graph.labels()[r]);

  std::vector<double> ys, mus;
  std::vector<Vector> x_rows;
  for (int i = 0; i < n; ++i) {
    data.subject_ids.push_back(padded_id('S', i + 1, n));
    data.reference_flag.push_back(truth.abnormal[i]);
    int visits = config.fixed_visits;
    if (ragged)
      visits = config.min_visits +
               std::min(config.max_visits - config.min_visits,
                        static_cast<int>(rng.uniform() * (config.max_visits - config.min_visits + 1)));
    const double age0 = 60.0 + 25.0 * rng.uniform();
    const double sex = rng.uniform() < 0.5 ? 1.0 : 0.0;
    truth.b_true[i] = config.sigma_b_true * rng.gaussian();
    truth.u_true.row(i) = sample_gmrf(q_factor, config.tau_u_true, rng).transpose();
    if (truth.abnormal[i])
      for (int r : truth.abnormal_regions) truth.delta(i, r) = delta;

    double prior_burden = 0.0;
    bool dropped = false;
    for (int t = 1; t <= visits; ++t) {
      const double age = t == 1 ? age0 : age0 + 1.5 * (t - 1) + (rng.uniform() - 0.5);
      Vector x(p_true);
      x[0] = 1.0;
      x[1] = age;
      x[2] = sex;
      if (nonlinear) x[3] = std::pow((age - 72.5) / 10.0, 2);
      Vector y(r_count), mu(r_count);
      for (int r = 0; r < r_count; ++r) {
        mu[r] = x.dot(truth.B_true.col(r)) + truth.b_true[i] + truth.u_true(i, r) + truth.delta(i, r);
        y[r] = mu[r] + config.sigma_true * rng.gaussian();
      }
      std::vector<char> observed(r_count, 1);
      if (dropout && t > 1) {
        const double p_drop = logistic(config.dropout_intercept + config.dropout_age * (age - 70.0) +
                                       config.dropout_burden * prior_burden);
        if (rng.uniform() < p_drop) dropped = true;
        for (int r = 0; r < r_count; ++r) observed[r] = rng.uniform() >= config.region_missing;
      }
      if (dropped) break;  // monotone: nothing after the first dropped visit
      int n_seen = 0;
      double burden = 0.0;
      for (int r = 0; r < r_count; ++r)
        if (observed[r]) {
          ++n_seen;
          burden += std::abs(y[r] - x.head(p_true).dot(truth.B_true.col(r)));
        }
      if (n_seen == 0) continue;
      prior_burden = burden / n_seen;

      const int v = data.n_visits();
      data.visit_subject.push_back(i);
      data.visit_number.push_back(t);
      data.raw_covariates.push_back({csv::format_double(age), sex > 0.5 ? "1" : "0"});
      x_rows.push_back(x);
      for (int r = 0; r < r_count; ++r) {
        if (!observed[r]) continue;
        data.obs_visit.push_back(v);
        data.obs_region.push_back(r);
        ys.push_back(y[r]);
        mus.push_back(mu[r]);
      }
    }
  }
  data.y = Eigen::Map<Vector>(ys.data(), static_cast<Index>(ys.size()));
  truth.mu_true = Eigen::Map<Vector>(mus.data(), static_cast<Index>(mus.size()));
  truth.X_true.resize(static_cast<Index>(x_rows.size()), p_true);
  for (std::size_t v = 0; v < x_rows.size(); ++v) truth.X_true.row(static_cast<Index>(v)) = x_rows[v].transpose();
  build_design(data);
  data.build_index();
  data.validate();
  return sim;
}

void write_truth(const std::string& dir, const Simulation& sim) {
  const LongDataset& data = sim.data;
  const SimTruth& truth = sim.truth;
  {
    csv::Writer out(dir + "/truth_u.csv");
    out.row({"subject", "region", "u_true", "delta"});
    for (int i = 0; i < data.n_subjects(); ++i)
      for (int r = 0; r < data.n_regions(); ++r)
        out.row({data.subject_ids[i], data.region_labels[r], csv::format_double(truth.u_true(i, r)),
                 csv::format_double(truth.delta(i, r))});
  }
  {
    csv::Writer out(dir + "/truth_mu.csv");
    out.row({"subject", "visit", "region", "mu_true"});
    for (int k = 0; k < data.n_obs(); ++k)
      out.row({data.subject_ids[data.obs_subject(k)], std::to_string(data.visit_number[data.obs_visit[k]]),
                data.region_labels[data.obs_region[k]], csv::format_double(truth.mu_true[k])});
  }
  nlohmann::json j;
  j["rho"] = truth.rho;
  j["tau_u"] = truth.tau_u;
  j["sigma_b"] = truth.sigma_b;
  j["sigma"] = truth.sigma;
  j["design"] = truth.design_names;
  j["regions"] = data.region_labels;
  std::vector<std::vector<double>> rows;
  for (Index r = 0; r < truth.B_true.rows(); ++r) {
    const Vector row = truth.B_true.row(r).transpose();
    rows.emplace_back(row.data(), row.data() + row.size());
  }
  j["B"] = rows;
  std::vector<std::string> regions;
  for (int r : truth.abnormal_regions) regions.push_back(data.region_labels[r]);
  j["abnormal_regions"] = regions;
  nlohmann::json subjects = nlohmann::json::object();
  for (int i = 0; i < data.n_subjects(); ++i)
    subjects[data.subject_ids[i]] = {{"b", truth.b_true[i]}, {"abnormal", truth.abnormal[i]}};
  j["subjects"] = subjects;
  std::ofstream out(dir + "/truth.json");
  if (!out) throw ConfigInvalid("cannot write " + dir + "/truth.json");
  out << j.dump(2) << '\n';
}

SimTruth read_truth(const std::string& dir, const LongDataset& data) {
  SimTruth truth;
  std::map<std::string, int> subject, region;
  for (int i = 0; i < data.n_subjects(); ++i) subject[data.subject_ids[i]] = i;
  for (int r = 0; r < data.n_regions(); ++r) region[data.region_labels[r]] = r;
  auto find = [&](const std::map<std::string, int>& m, const std::string& key, const std::string& what) {
    auto it = m.find(key);
    if (it == m.end()) throw AlignmentError("truth refers to unknown " + what + " '" + key + "'");
    return it->second;
  };

  nlohmann::json j;
  {
    std::ifstream in(dir + "/truth.json");
    if (!in) throw ConfigInvalid("cannot open " + dir + "/truth.json");
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(dir + "/truth.json: " + e.what());
    }
  }
  try {
    truth.rho = j.at("rho").get<double>();
    truth.tau_u = j.at("tau_u").get<double>();
    truth.sigma_b = j.at("sigma_b").get<double>();
    truth.sigma = j.at("sigma").get<double>();
    truth.design_names = j.at("design").get<std::vector<std::string>>();
    const auto labels = j.at("regions").get<std::vector<std::string>>();
    const auto rows = j.at("B").get<std::vector<std::vector<double>>>();
    truth.B_true = Matrix::Zero(static_cast<Index>(rows.size()), data.n_regions());
    for (std::size_t a = 0; a < rows.size(); ++a)
      for (std::size_t c = 0; c < rows[a].size() && c < labels.size(); ++c)
        truth.B_true(static_cast<Index>(a), find(region, labels[c], "region")) = rows[a][c];
    for (const auto& label : j.at("abnormal_regions").get<std::vector<std::string>>())
      truth.abnormal_regions.push_back(find(region, label, "region"));
    std::sort(truth.abnormal_regions.begin(), truth.abnormal_regions.end());
    truth.b_true = Vector::Zero(data.n_subjects());
    truth.abnormal.assign(data.n_subjects(), 0);
    for (const auto& [id, entry] : j.at("subjects").items()) {
      const int i = find(subject, id, "subject");
      truth.b_true[i] = entry.at("b").get<double>();
      truth.abnormal[i] = entry.at("abnormal").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(dir + "/truth.json: " + e.what());
  }

  truth.u_true = Matrix::Zero(data.n_subjects(), data.n_regions());
  truth.delta = truth.u_true;
  const auto tu = csv::read(dir + "/truth_u.csv");
  const int cs = tu.require("subject", "truth_u.csv"), cr = tu.require("region", "truth_u.csv");
  const int cu = tu.require("u_true", "truth_u.csv"), cd = tu.require("delta", "truth_u.csv");
  for (const auto& row : tu.rows) {
    const int i = find(subject, row[cs], "subject"), r = find(region, row[cr], "region");
    truth.u_true(i, r) = csv::parse_double(row[cu], "u_true");
    truth.delta(i, r) = csv::parse_double(row[cd], "delta");
  }

  std::map<std::tuple<int, int, int>, int> obs_index;
  for (int k = 0; k < data.n_obs(); ++k)
    obs_index[{data.obs_subject(k), data.visit_number[data.obs_visit[k]], data.obs_region[k]}] = k;
  truth.mu_true = Vector::Constant(data.n_obs(), std::nan(""));
  const auto tm = csv::read(dir + "/truth_mu.csv");
  const int ms = tm.require("subject", "truth_mu.csv"), mv = tm.require("visit", "truth_mu.csv");
  const int mr = tm.require("region", "truth_mu.csv"), mm = tm.require("mu_true", "truth_mu.csv");
  for (const auto& row : tm.rows) {
    const int i = find(subject, row[ms], "subject"), r = find(region, row[mr], "region");
    const int t = static_cast<int>(csv::parse_int(row[mv], "visit"));
    auto it = obs_index.find({i, t, r});
    if (it == obs_index.end()) throw AlignmentError("truth_mu.csv has an observation missing from the dataset");
    truth.mu_true[it->second] = csv::parse_double(row[mm], "mu_true");
  }
  if (!truth.mu_true.allFinite()) throw AlignmentError("truth_mu.csv does not cover every observation");
  if (truth.design_names == data.covariate_names) truth.X_true = data.X;
  return truth;
}

}  // namespace lsnm
