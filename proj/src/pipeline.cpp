#include "lsnm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsnm {

namespace {

Vector spatial_fitted(const LongDataset& data, const Matrix& B, const Vector& b, const Matrix& u) {
  const Matrix xb = data.X * B;
  Vector mu(data.n_obs());
  for (int k = 0; k < data.n_obs(); ++k) {
    const int v = data.obs_visit[k], r = data.obs_region[k], i = data.visit_subject[v];
    mu[k] = xb(v, r) + b[i] + u(i, r);
  }
  return mu;
}

}  // namespace

ModelOutputs spatial_outputs(const LongDataset& data, const RegionGraph& graph, const PosteriorDraws& draws,
                             ScoreMode mode, std::size_t score_draws) {
  if (draws.n_covariates != data.n_covariates() || draws.n_regions != data.n_regions())
    throw IncompatibleFit("posterior draws do not match the dataset's design");
  ModelOutputs out;
  const ModelState mean = draws.posterior_mean();
  out.u_hat = mean.u;
  out.u_sd = draws.u_sd;
  out.mu_fit = spatial_fitted(data, mean.B, mean.b, mean.u);
  out.pred = spatial_predictive(data, graph, draws.global_draws(score_draws), mode);
  out.z = z_scores(data.y, out.pred.mean, out.pred.var);
  out.detection_score = draws.u_mean.cwiseQuotient(draws.u_sd.cwiseMax(1e-12));
  return out;
}

ModelOutputs baseline_outputs(const LongDataset& data, const BaselineFit& fit, ScoreMode mode) {
  ModelOutputs out;
  out.mu_fit = baseline_fitted(data, fit);
  out.pred = baseline_predictive(data, fit, mode);
  out.z = z_scores(data.y, out.pred.mean, out.pred.var);
  out.u_hat = baseline_deviation_map(data, fit);
  out.detection_score = baseline_detection_score(data, fit, out.u_hat);
  return out;
}

ModelOutputs oracle_outputs(const LongDataset& data, const RegionGraph& graph, const SimTruth& truth, ScoreMode mode) {
  if (truth.B_true.rows() != data.n_covariates() || truth.design_names != data.covariate_names)
    throw IncompatibleFit("generating design differs from the dataset's design");
  GlobalParams g{truth.B_true, truth.sigma, truth.sigma_b, truth.tau_u, truth.rho};
  const std::vector<GlobalParams> draws{g};
  ModelOutputs out;
  out.mu_fit = spatial_fitted(data, truth.B_true, truth.b_true, truth.u_true);
  out.pred = spatial_predictive(data, graph, draws, mode);
  out.z = z_scores(data.y, out.pred.mean, out.pred.var);
  Matrix sd;
  spatial_deviation_maps(data, graph, draws, out.u_hat, sd);
  out.detection_score = out.u_hat.cwiseQuotient(sd.cwiseMax(1e-12));
  out.u_sd = sd;
  return out;
}

MetricReport evaluate_outputs(const LongDataset& data, const SimTruth& truth, const ModelOutputs& out) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  MetricReport report;
  const auto acc = accuracy_metrics(out.mu_fit, truth.mu_true, out.u_hat, truth.deviation_true());
  report.set("bias", acc.bias);
  report.set("mse", acc.mse);
  report.set("map_mse", acc.map_mse);

  std::vector<double> ref;
  for (int k = 0; k < data.n_obs(); ++k)
    if (truth.abnormal[data.obs_subject(k)] == 0) ref.push_back(out.z[k]);
  if (ref.size() >= 2) {
    const auto cal = calibration_metrics(Eigen::Map<const Vector>(ref.data(), static_cast<Index>(ref.size())));
    report.set("z_mean", cal.z_mean);
    report.set("z_var", cal.z_var);
    report.set("tail_prob", cal.tail_prob);
  } else {
    for (const char* m : {"z_mean", "z_var", "tail_prob"}) report.set(m, nan);
  }

  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<char> in_set(data.n_regions(), 0);
  for (int r : truth.abnormal_regions) in_set[r] = 1;
  for (int i = 0; i < data.n_subjects(); ++i) {
    if (!truth.abnormal[i]) continue;
    for (int r = 0; r < data.n_regions(); ++r) {
      scores.push_back(out.detection_score(i, r));
      labels.push_back(in_set[r]);
    }
  }
  const bool both = std::find(labels.begin(), labels.end(), 1) != labels.end() &&
                    std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (both) {
    const auto det =
        detection_metrics(Eigen::Map<const Vector>(scores.data(), static_cast<Index>(scores.size())), labels);
    report.set("sensitivity", det.sensitivity);
    report.set("specificity", det.specificity);
    report.set("ppv", det.ppv);
    report.set("auc", det.auc);
  } else {
    for (const char* m : {"sensitivity", "specificity", "ppv", "auc"}) report.set(m, nan);
  }

  const auto res = residual_metrics(data.y, out.pred.mean);
  report.set("residual_sd", res.residual_sd);
  report.set("mae", res.mae);
  report.set("rmse", res.rmse);
  report.set("msll", data.n_obs() >= 2 ? msll(data.y, out.pred.mean, out.pred.var) : nan);
  return report;
}

std::map<ModelKind, MetricReport> run_replicate(const StudyConfig& config, std::uint64_t seed) {
  ScenarioConfig sc = config.scenario;
  sc.seed = seed;
  const Simulation sim = generate(sc);
  std::map<ModelKind, MetricReport> out;
  for (ModelKind kind : config.models) {
    ModelOutputs o;
    if (kind == ModelKind::spatial) {
      SamplerConfig sampler = config.sampler;
      sampler.seed = derive_seed(seed, 0x5a);
      const PosteriorDraws draws = run_sampler(sim.data, sim.graph, config.prior, sampler);
      o = spatial_outputs(sim.data, sim.graph, draws, config.score_mode, config.score_draws);
    } else if (kind == ModelKind::longitudinal) {
      o = baseline_outputs(sim.data, fit_longitudinal(sim.data, config.em), config.score_mode);
    } else {
      o = baseline_outputs(sim.data, fit_cross_sectional(sim.data), config.score_mode);
    }
    out[kind] = evaluate_outputs(sim.data, sim.truth, o);
  }
  return out;
}

}  // namespace lsnm
