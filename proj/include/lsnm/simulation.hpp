#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lsnm/dataset.hpp"
#include "lsnm/region_graph.hpp"

namespace lsnm {

enum class Scenario { none, moderate, strong, variable_visits, missing_followup, nonlinear };
Scenario parse_scenario(const std::string& s);
std::string to_string(Scenario s);
const std::vector<Scenario>& all_scenarios();

enum class Topology { automatic, path, grid, random_geometric };
Topology parse_topology(const std::string& s);

enum class Extent { localized, diffuse };
enum class Severity { mild, severe };
Extent parse_extent(const std::string& s);
Severity parse_severity(const std::string& s);

struct ScenarioConfig {
  Scenario scenario = Scenario::moderate;
  int n_subjects = 120;
  int n_regions = 20;
  std::optional<double> rho_true;  // default 0 / 0.5 / 0.9 for none / moderate / strong, else 0.5
  double tau_u_true = 1.0;
  double sigma_b_true = 0.8;
  double sigma_true = 1.0;

  // region coefficient hyperparameters: intercept, age (per year), sex, centred quadratic age
  double mu0 = 0.0, sd0 = 0.5;
  double mu1 = -0.03, sd1 = 0.01;
  double mu2 = 0.2, sd2 = 0.1;
  double mu_quad = -0.1, sd_quad = 0.05;

  double abnormal_fraction = 0.2;
  Extent extent = Extent::localized;
  Severity severity = Severity::mild;
  std::optional<double> delta;           // overrides the severity magnitude
  std::vector<int> abnormal_regions;     // overrides the extent-derived set

  int fixed_visits = 3;                  // none / moderate / strong / nonlinear
  int min_visits = 2, max_visits = 5;    // variable_visits / missing_followup
  double dropout_intercept = -2.0;
  double dropout_age = 0.03;
  double dropout_burden = 0.5;
  double region_missing = 0.05;

  Topology topology = Topology::automatic;
  std::uint64_t seed = 1;

  double rho() const;
  double delta_magnitude() const;
  void check() const;
};

/// Generating truth aligned with the dataset it produced.
struct SimTruth {
  Matrix B_true;                        // p_true x R
  std::vector<std::string> design_names;
  Matrix X_true;                        // visits x p_true, rows parallel to the dataset's visits
  Vector b_true;
  Matrix u_true;                        // n x R
  Matrix delta;                         // n x R abnormality shifts (zero for reference subjects)
  Vector mu_true;                       // per observation: x' beta_r + b_i + u_ir + delta_ir
  std::vector<int> abnormal;            // G_i
  std::vector<int> abnormal_regions;    // the region set shifted for abnormal subjects
  double rho = 0.0, tau_u = 1.0, sigma_b = 1.0, sigma = 1.0;

  /// u_true + delta: the deviation map a fitted model should recover.
  Matrix deviation_true() const { return u_true + delta; }
};

struct Simulation {
  LongDataset data;
  SimTruth truth;
  RegionGraph graph;
};

Simulation generate(const ScenarioConfig& config);

/// Connected graph on n regions. `automatic` picks the most square a x b grid
/// with a, b >= 2 when one exists and a path otherwise.
RegionGraph make_region_graph(int n_regions, Topology topology = Topology::automatic, std::uint64_t seed = 0);

/// Grid shape used by `automatic`, or {1, n} when n has no factor pair.
std::pair<int, int> grid_shape(int n_regions);

/// First `count` regions in breadth-first order from region 0.
std::vector<int> contiguous_regions(const RegionGraph& graph, int count);

void write_truth(const std::string& dir, const Simulation& sim);
/// Read truth written by write_truth, aligned to `data` by subject and region labels.
SimTruth read_truth(const std::string& dir, const LongDataset& data);

}  // namespace lsnm
