#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "lsnm/baselines.hpp"
#include "lsnm/evaluation.hpp"
#include "lsnm/inference.hpp"
#include "lsnm/simulation.hpp"

namespace lsnm {

/// What one fitted model contributes to evaluation.
struct ModelOutputs {
  Vector mu_fit;            // in-sample fitted mean per observation
  PredictiveMoments pred;   // scoring moments per observation
  Vector z;
  Matrix u_hat;             // n x R deviation map
  Matrix u_sd;              // n x R posterior sd of the map (empty for baselines)
  Matrix detection_score;   // n x R
};

/// Spatial model: fitted mean X B + b + u at posterior means; maps from the
/// sampler; detection score u_mean / u_sd. `score_draws` caps the parameter
/// draws used for predictive moments (0 = all).
ModelOutputs spatial_outputs(const LongDataset& data, const RegionGraph& graph, const PosteriorDraws& draws,
                             ScoreMode mode, std::size_t score_draws);

ModelOutputs baseline_outputs(const LongDataset& data, const BaselineFit& fit, ScoreMode mode);

/// Scores under known generating parameters (the oracle hook).
ModelOutputs oracle_outputs(const LongDataset& data, const RegionGraph& graph, const SimTruth& truth, ScoreMode mode);

/// Every metric of one model against generating truth. Calibration uses the
/// reference subgroup; detection uses the (subject, region) cells of abnormal
/// subjects, positive on the abnormal region set.
MetricReport evaluate_outputs(const LongDataset& data, const SimTruth& truth, const ModelOutputs& out);

struct StudyConfig {
  ScenarioConfig scenario;
  SamplerConfig sampler;
  PriorConfig prior;
  EmOptions em;
  ScoreMode score_mode = ScoreMode::conditional;
  std::size_t score_draws = 200;
  std::vector<ModelKind> models{ModelKind::spatial, ModelKind::longitudinal, ModelKind::cross_sectional};
};

/// Generate one replicate with `seed` and evaluate every configured model.
std::map<ModelKind, MetricReport> run_replicate(const StudyConfig& config, std::uint64_t seed);

}  // namespace lsnm
