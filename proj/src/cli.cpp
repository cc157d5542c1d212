#include "lsnm/cli.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsnm/config.hpp"
#include "lsnm/csv.hpp"
#include "lsnm/diagnostics.hpp"
#include "lsnm/report.hpp"

namespace lsnm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string config, out, data, graph, fit, truth, oracle, model = "spatial", models = "all", scenario, score_mode;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::optional<long long> score_draws;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(std::string command, const KeyValueConfig& config, std::uint64_t seed)
      : command_(std::move(command)), digest_(hex64(config.digest())), seed_(seed), started_(utc_now()) {}

  void input(const std::string& path) { inputs_.push_back(path); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const std::string& dir) const {
    ordered_json j;
    j["command"] = command_;
    j["config_digest"] = digest_;
    j["seed"] = seed_;
    j["version"] = std::string(version);
    j["started"] = started_;
    j["finished"] = utc_now();
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    std::ofstream(dir + "/manifest.json") << j.dump(2) << "\n";
  }

 private:
  std::string command_, digest_;
  std::uint64_t seed_;
  std::string started_;
  std::vector<std::string> inputs_, outputs_;
};

StudyPlan load_plan(const Options& o, KeyValueConfig& config) {
  config = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
  StudyPlan plan = study_plan_from(config);
  if (o.seed) {
    plan.seed = *o.seed;
    plan.base.scenario.seed = *o.seed;
    plan.base.sampler.seed = *o.seed;
  }
  if (!o.scenario.empty()) {
    plan.scenarios.clear();
    for (const auto& s : csv::split(o.scenario)) plan.scenarios.push_back(parse_scenario(std::string(csv::trim(s))));
    plan.base.scenario.scenario = plan.scenarios.front();
  }
  if (!o.score_mode.empty()) plan.base.score_mode = parse_score_mode(o.score_mode);
  if (o.score_draws) {
    if (*o.score_draws < 0) throw ConfigInvalid("--score-draws must be >= 0");
    plan.base.score_draws = static_cast<std::size_t>(*o.score_draws);
  }
  return plan;
}

void make_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigInvalid("--out is required");
  fs::create_directories(dir);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigInvalid(std::string(flag) + " is required");
}

// Every dataset region must appear in at least one edge.
RegionGraph load_graph_for(const std::string& path, const std::vector<std::string>& labels) {
  const csv::Table t = csv::read(path);
  const int ca = t.require("region_a", path), cb = t.require("region_b", path);
  std::set<std::string> seen;
  for (const auto& row : t.rows) {
    seen.insert(row[ca]);
    seen.insert(row[cb]);
  }
  for (const auto& l : labels)
    if (!seen.count(l)) throw SchemaError(path + ": region label '" + l + "' has no entry in the graph");
  return load_edge_list(path, labels);
}

ordered_json json_value(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json report_json(const MetricReport& r) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : r.values) j[k] = json_value(v);
  return j;
}

MetricReport report_from_json(const ordered_json& j) {
  MetricReport r;
  for (const auto& [k, v] : j.items()) r.set(k, v.is_null() ? std::nan("") : v.get<double>());
  return r;
}

ordered_json fit_header(const LongDataset& data, ModelKind kind) {
  ordered_json j;
  j["model"] = to_string(kind);
  j["covariates"] = data.covariate_names;
  j["regions"] = data.region_labels;
  j["subjects"] = data.subject_ids;
  return j;
}

ordered_json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

// --- simulate -------------------------------------------------------------

int cmd_simulate(const Options& o, std::ostream& out) {
  KeyValueConfig config;
  const StudyPlan plan = load_plan(o, config);
  make_dir(o.out);
  Manifest manifest("simulate", config, plan.seed);
  if (!o.config.empty()) manifest.input(o.config);
  const Simulation sim = generate(plan.base.scenario);
  write_dataset(o.out + "/data.csv", sim.data);
  write_edge_list(o.out + "/graph.csv", sim.graph);
  write_truth(o.out, sim);
  for (const char* f : {"data.csv", "graph.csv", "truth_u.csv", "truth_mu.csv", "truth.json"})
    manifest.output(o.out + "/" + f);
  manifest.write(o.out);
  out << "simulated " << to_string(plan.base.scenario.scenario) << ": " << sim.data.n_subjects() << " subjects, "
      << sim.data.n_regions() << " regions, " << sim.data.n_obs() << " observations\n";
  return 0;
}

// --- fit ------------------------------------------------------------------

int cmd_fit(const Options& o, std::ostream& out) {
  KeyValueConfig config;
  const StudyPlan plan = load_plan(o, config);
  require(o.data, "--data");
  make_dir(o.out);
  const ModelKind kind = parse_model_kind(o.model);
  Manifest manifest("fit", config, plan.seed);
  manifest.input(o.data);
  const LongDataset data = load_dataset(o.data);

  if (kind == ModelKind::spatial) {
    require(o.graph, "--graph");
    manifest.input(o.graph);
    const RegionGraph graph = load_graph_for(o.graph, data.region_labels);
    PosteriorDraws draws = run_sampler(data, graph, plan.base.prior, plan.base.sampler);
    write_draws_csv(o.out + "/draws.csv", draws);
    write_summary_json(o.out + "/summary.json", draws);
    write_u_summary_csv(o.out + "/u_summary.csv", data, draws.u_mean, draws.u_sd);
    write_edge_list(o.out + "/graph.csv", graph);

    ordered_json fit = fit_header(data, kind);
    const SamplerConfig& s = plan.base.sampler;
    fit["sampler"] = {{"chains", s.n_chains}, {"warmup", s.n_warmup}, {"samples", s.n_samples},
                      {"thin", s.thin},       {"seed", s.seed},         {"collapsed", s.collapsed}};
    const PriorConfig& p = plan.base.prior;
    fit["prior"] = {{"sigma_beta", p.sigma_beta},   {"scale_sigma", p.scale_sigma}, {"scale_sigma_b", p.scale_sigma_b},
                    {"scale_tau_u", p.scale_tau_u}, {"rho_a", p.rho_a},             {"rho_b", p.rho_b}};
    std::ofstream(o.out + "/fit.json") << fit.dump(2) << "\n";

    double max_rhat = 0.0, min_ess = std::numeric_limits<double>::infinity();
    ordered_json params = ordered_json::array();
    for (const auto& ps : draws.summaries) {
      if (std::isfinite(ps.rhat)) max_rhat = std::max(max_rhat, ps.rhat);
      if (std::isfinite(ps.ess_bulk)) min_ess = std::min(min_ess, ps.ess_bulk);
      params.push_back({{"name", ps.name}, {"rhat", json_value(ps.rhat)}, {"ess_bulk", json_value(ps.ess_bulk)}});
    }
    ordered_json diag;
    diag["max_rhat"] = json_value(max_rhat);
    diag["min_ess_bulk"] = json_value(min_ess);
    diag["acceptance"] = ordered_json::array();
    for (const auto& a : draws.acceptance)
      diag["acceptance"].push_back({{"sigma", a[0]}, {"sigma_b", a[1]}, {"tau_u", a[2]}, {"rho", a[3]}});
    diag["parameters"] = params;
    std::ofstream(o.out + "/diagnostics.json") << diag.dump(2) << "\n";
    for (const char* f : {"draws.csv", "summary.json", "u_summary.csv", "graph.csv", "fit.json", "diagnostics.json"})
      manifest.output(o.out + "/" + f);
    out << "spatial fit: " << draws.n_chains() << " chains x " << draws.n_kept() << " draws, max R-hat "
        << max_rhat << ", min bulk ESS " << min_ess << "\n";
  } else {
    const BaselineFit fit =
        kind == ModelKind::longitudinal ? fit_longitudinal(data, plan.base.em) : fit_cross_sectional(data);
    write_baseline_json(o.out + "/fit.json", fit);
    ordered_json summary;
    summary["model"] = to_string(kind);
    summary["sigma"] = fit.sigma;
    if (kind == ModelKind::longitudinal) summary["sigma_b"] = fit.sigma_b;
    std::ofstream(o.out + "/summary.json") << summary.dump(2) << "\n";
    ordered_json diag;
    diag["iterations"] = fit.iterations;
    diag["converged"] = fit.converged;
    diag["log_likelihood"] = json_value(fit.log_likelihood);
    diag["log_likelihood_trace"] = fit.log_likelihood_trace;
    std::ofstream(o.out + "/diagnostics.json") << diag.dump(2) << "\n";
    for (const char* f : {"fit.json", "summary.json", "diagnostics.json"}) manifest.output(o.out + "/" + f);
    out << to_string(kind) << " fit: sigma " << fit.sigma;
    if (kind == ModelKind::longitudinal) out << ", sigma_b " << fit.sigma_b << ", " << fit.iterations << " EM iterations";
    out << "\n";
  }
  manifest.write(o.out);
  return 0;
}

// --- score / evaluate -----------------------------------------------------

/// A fit directory (or the oracle) made ready to score one dataset.
struct LoadedFit {
  ModelKind kind = ModelKind::spatial;
  bool oracle = false;
  std::optional<RegionGraph> graph;
  PosteriorDraws draws;
  BaselineFit baseline;
  SimTruth truth;
  std::vector<std::string> subjects;  // subjects the sampler saw
};

LoadedFit load_fit(const Options& o, LongDataset& data, Manifest& manifest) {
  LoadedFit f;
  if (!o.oracle.empty()) {
    f.oracle = true;
    const std::string graph_path = o.graph.empty() ? o.oracle + "/graph.csv" : o.graph;
    manifest.input(o.oracle);
    f.graph.emplace(load_graph_for(graph_path, data.region_labels));
    f.truth = read_truth(o.oracle, data);
    return f;
  }
  require(o.fit, "--fit or --oracle");
  manifest.input(o.fit);
  const ordered_json header = read_json(o.fit + "/fit.json");
  f.kind = parse_model_kind(header.at("model").get<std::string>());
  align_regions(data, header.at("regions").get<std::vector<std::string>>());
  if (header.at("covariates").get<std::vector<std::string>>() != data.covariate_names)
    throw IncompatibleFit("dataset covariates differ from the fit's design");
  if (f.kind == ModelKind::spatial) {
    f.graph.emplace(load_edge_list(o.fit + "/graph.csv", data.region_labels));
    f.draws = read_draws_csv(o.fit + "/draws.csv");
    f.subjects = header.at("subjects").get<std::vector<std::string>>();
    if (f.draws.n_regions != data.n_regions() || f.draws.n_covariates != data.n_covariates())
      throw IncompatibleFit("draws do not match the dataset's design");
  } else {
    f.baseline = read_baseline_json(o.fit + "/fit.json");
  }
  return f;
}

ModelOutputs outputs_for(const LongDataset& data, LoadedFit& f, const Options& o, const StudyConfig& study) {
  if (f.oracle) return oracle_outputs(data, *f.graph, f.truth, study.score_mode);
  if (f.kind != ModelKind::spatial) return baseline_outputs(data, f.baseline, study.score_mode);
  const auto global = f.draws.global_draws(study.score_draws);
  f.draws.n_subjects = data.n_subjects();
  bool have_maps = false;
  if (!o.fit.empty() && fs::exists(o.fit + "/u_summary.csv")) {
    try {
      read_u_summary_csv(o.fit + "/u_summary.csv", data, f.draws.u_mean, f.draws.u_sd);
      have_maps = true;
    } catch (const AlignmentError&) {
    }
  }
  if (!have_maps) spatial_deviation_maps(data, *f.graph, global, f.draws.u_mean, f.draws.u_sd);
  ModelOutputs out;
  out.pred = spatial_predictive(data, *f.graph, global, study.score_mode);
  out.z = z_scores(data.y, out.pred.mean, out.pred.var);
  out.u_hat = f.draws.u_mean;
  out.u_sd = f.draws.u_sd;
  out.detection_score = f.draws.u_mean.cwiseQuotient(f.draws.u_sd.cwiseMax(1e-12));
  Matrix B = Matrix::Zero(data.n_covariates(), data.n_regions());
  for (const auto& g : global) B += g.B;
  B /= static_cast<double>(global.size());
  // b_i means only exist for the subjects the sampler saw
  Vector b = Vector::Zero(data.n_subjects());
  if (f.subjects == data.subject_ids)
    for (int i = 0; i < data.n_subjects(); ++i) b[i] = f.draws.param(b_name(i)).mean();
  const Matrix xb = data.X * B;
  out.mu_fit.resize(data.n_obs());
  for (int k = 0; k < data.n_obs(); ++k) {
    const int v = data.obs_visit[k], r = data.obs_region[k], i = data.visit_subject[v];
    out.mu_fit[k] = xb(v, r) + b[i] + out.u_hat(i, r);
  }
  return out;
}

int cmd_score(const Options& o, std::ostream& out) {
  KeyValueConfig config;
  const StudyPlan plan = load_plan(o, config);
  require(o.data, "--data");
  make_dir(o.out);
  Manifest manifest("score", config, plan.seed);
  manifest.input(o.data);
  LongDataset data = load_dataset(o.data);
  LoadedFit fit = load_fit(o, data, manifest);
  const ModelOutputs mo = outputs_for(data, fit, o, plan.base);
  const DeviationReport report = make_deviation_report(data, mo.pred);
  write_z_scores_csv(o.out + "/z_scores.csv", data, report);
  write_burden_csv(o.out + "/burden.csv", data, report);
  write_region_tail_csv(o.out + "/region_tail.csv", region_tail_table(data, report.z));
  for (const char* f : {"z_scores.csv", "burden.csv", "region_tail.csv"}) manifest.output(o.out + "/" + f);
  if (fit.oracle || fit.kind == ModelKind::spatial) {
    write_u_summary_csv(o.out + "/u_summary.csv", data, mo.u_hat, mo.u_sd);
    manifest.output(o.out + "/u_summary.csv");
  }
  manifest.write(o.out);
  const auto cal = calibration_metrics(report.z);
  out << "scored " << data.n_obs() << " observations (" << to_string(plan.base.score_mode)
      << "): z mean " << cal.z_mean << ", z var " << cal.z_var << ", P(|z| > 1.96) " << cal.tail_prob << "\n";
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  KeyValueConfig config;
  const StudyPlan plan = load_plan(o, config);
  require(o.data, "--data");
  require(o.truth.empty() ? o.oracle : o.truth, "--truth");
  make_dir(o.out);
  Manifest manifest("evaluate", config, plan.seed);
  manifest.input(o.data);
  LongDataset data = load_dataset(o.data);
  LoadedFit fit = load_fit(o, data, manifest);
  const std::string truth_dir = o.truth.empty() ? o.oracle : o.truth;
  manifest.input(truth_dir);
  const SimTruth truth = read_truth(truth_dir, data);
  const ModelOutputs mo = outputs_for(data, fit, o, plan.base);
  const MetricReport report = evaluate_outputs(data, truth, mo);
  ordered_json j;
  j["model"] = fit.oracle ? "oracle" : to_string(fit.kind);
  j["score_mode"] = to_string(plan.base.score_mode);
  j["metrics"] = report_json(report);
  std::ofstream(o.out + "/metrics.json") << j.dump(2) << "\n";
  std::vector<char> ref(static_cast<std::size_t>(data.n_obs()), 0);
  for (int k = 0; k < data.n_obs(); ++k) ref[static_cast<std::size_t>(k)] = truth.abnormal[data.obs_subject(k)] == 0;
  write_region_tail_csv(o.out + "/region_tail.csv", region_tail_table(data, mo.z, ref));
  manifest.output(o.out + "/metrics.json");
  manifest.output(o.out + "/region_tail.csv");
  manifest.write(o.out);
  for (const auto& [k, v] : report.values) out << k << " " << v << "\n";
  return 0;
}

// --- replicate ------------------------------------------------------------

std::string rep_path(const std::string& dir, Scenario s, int k) {
  return dir + "/rep_" + to_string(s) + "_" + std::to_string(k) + ".json";
}

std::optional<std::map<ModelKind, MetricReport>> load_rep(const std::string& path,
                                                          const std::vector<ModelKind>& models) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const ordered_json j = read_json(path);
    std::map<ModelKind, MetricReport> out;
    for (ModelKind m : models) out[m] = report_from_json(j.at("metrics").at(to_string(m)));
    return out;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_table(const std::string& path, const std::vector<std::string>& metrics,
                 const std::map<std::pair<Scenario, ModelKind>, std::map<std::string, MetricSummary>>& summaries) {
  csv::Writer w(path);
  std::vector<std::string> header{"scenario", "model"};
  for (const auto& m : metrics) {
    header.push_back(m);
    header.push_back(m + "_se");
  }
  header.push_back("n");
  w.row(header);
  for (const auto& [key, s] : summaries) {
    std::vector<std::string> row{to_string(key.first), to_string(key.second)};
    int n = 0;
    for (const auto& m : metrics) {
      auto it = s.find(m);
      row.push_back(csv::format_double(it == s.end() ? std::nan("") : it->second.mean));
      row.push_back(csv::format_double(it == s.end() ? std::nan("") : it->second.se));
      if (it != s.end()) n = std::max(n, it->second.n);
    }
    row.push_back(std::to_string(n));
    w.row(row);
  }
}

int cmd_replicate(const Options& o, std::ostream& out, std::ostream& err) {
  KeyValueConfig config;
  StudyPlan plan = load_plan(o, config);
  if (!o.models.empty() && o.models != "all") {
    plan.base.models.clear();
    for (const auto& m : csv::split(o.models)) plan.base.models.push_back(parse_model_kind(std::string(csv::trim(m))));
  }
  if (o.jobs < 1) throw ConfigInvalid("--jobs must be >= 1");
  if (o.jobs > 1) plan.base.sampler.parallel_chains = false;
  make_dir(o.out);
  Manifest manifest("replicate", config, plan.seed);
  if (!o.config.empty()) manifest.input(o.config);

  struct Job {
    Scenario scenario;
    int k;
  };
  std::vector<Job> jobs;
  for (Scenario s : plan.scenarios)
    for (int k = 0; k < plan.replicates; ++k) jobs.push_back({s, k});
  std::vector<std::optional<std::map<ModelKind, MetricReport>>> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<int> computed{0};

  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      const std::string path = rep_path(o.out, job.scenario, job.k);
      if ((results[j] = load_rep(path, plan.base.models))) continue;
      try {
        StudyConfig sc = plan.base;
        sc.scenario.scenario = job.scenario;
        const std::uint64_t seed = replicate_seed(plan.seed, job.scenario, job.k);
        auto r = run_replicate(sc, seed);
        ordered_json doc;
        doc["scenario"] = to_string(job.scenario);
        doc["replicate"] = job.k;
        doc["seed"] = seed;
        for (const auto& [m, rep] : r) doc["metrics"][to_string(m)] = report_json(rep);
        const std::string tmp = path + ".tmp";
        std::ofstream(tmp) << doc.dump(2) << "\n";
        fs::rename(tmp, path);
        // reload so resumed and fresh runs aggregate identical (JSON round-tripped) values
        results[j] = load_rep(path, plan.base.models);
        ++computed;
      } catch (const std::exception& e) {
        failures[j] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < o.jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::map<std::pair<Scenario, ModelKind>, std::vector<MetricReport>> pooled;
  std::ofstream fail_out(o.out + "/failures.txt");
  int n_failed = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!results[j]) {
      ++n_failed;
      fail_out << to_string(jobs[j].scenario) << " " << jobs[j].k << ": " << failures[j] << "\n";
      continue;
    }
    for (const auto& [m, rep] : *results[j]) pooled[{jobs[j].scenario, m}].push_back(rep);
  }
  std::map<std::pair<Scenario, ModelKind>, std::map<std::string, MetricSummary>> summaries;
  for (const auto& [key, reps] : pooled) summaries[key] = monte_carlo_summary(reps);

  write_table(o.out + "/table1.csv", {"bias", "mse", "map_mse"}, summaries);
  write_table(o.out + "/table2.csv", {"z_mean", "z_var", "tail_prob"}, summaries);
  write_table(o.out + "/detection.csv", {"sensitivity", "specificity", "ppv", "auc"}, summaries);
  {
    csv::Writer w(o.out + "/summary_long.csv");
    w.row({"scenario", "model", "metric", "mean", "se", "n"});
    for (const auto& [key, s] : summaries)
      for (const auto& [metric, ms] : s)
        w.row({to_string(key.first), to_string(key.second), metric, csv::format_double(ms.mean),
               csv::format_double(ms.se), std::to_string(ms.n)});
  }
  for (const char* f : {"table1.csv", "table2.csv", "detection.csv", "summary_long.csv", "failures.txt"})
    manifest.output(o.out + "/" + f);
  manifest.write(o.out);
  out << "replicates: " << jobs.size() << " total, " << computed << " computed, "
      << (jobs.size() - static_cast<std::size_t>(computed) - static_cast<std::size_t>(n_failed)) << " resumed, "
      << n_failed << " failed\n";
  if (n_failed > 0) {
    err << n_failed << " replicate(s) failed; see " << o.out << "/failures.txt\n";
    return 3;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Longitudinal spatial normative modelling"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--score-mode", o.score_mode, "conditional | marginal");
  };
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset with known truth");
  common(sim);
  sim->add_option("--scenario", o.scenario, "none | moderate | strong | variable_visits | missing_followup | nonlinear");

  auto* fit = app.add_subcommand("fit", "fit one model to a dataset");
  common(fit);
  fit->add_option("--data", o.data, "long-format dataset CSV")->required();
  fit->add_option("--graph", o.graph, "region edge list CSV (spatial model)");
  fit->add_option("--model", o.model, "spatial | longitudinal | cross_sectional");

  auto* score = app.add_subcommand("score", "deviation scores of a dataset under a fit");
  common(score);
  score->add_option("--data", o.data, "long-format dataset CSV")->required();
  score->add_option("--fit", o.fit, "directory written by fit");
  score->add_option("--oracle", o.oracle, "simulation directory; score with its generating parameters");
  score->add_option("--graph", o.graph, "edge list for --oracle (default: <oracle>/graph.csv)");
  score->add_option("--score-draws", o.score_draws, "posterior draws used for scoring (0 = all)");

  auto* eval = app.add_subcommand("evaluate", "metrics of a fit against simulation truth");
  common(eval);
  eval->add_option("--data", o.data, "long-format dataset CSV")->required();
  eval->add_option("--fit", o.fit, "directory written by fit");
  eval->add_option("--truth", o.truth, "simulation directory holding the truth files");
  eval->add_option("--oracle", o.oracle, "simulation directory; evaluate the generating parameters");
  eval->add_option("--graph", o.graph, "edge list for --oracle (default: <oracle>/graph.csv)");
  eval->add_option("--score-draws", o.score_draws, "posterior draws used for scoring (0 = all)");

  auto* rep = app.add_subcommand("replicate", "Monte Carlo study over scenarios and models");
  common(rep);
  rep->add_option("--scenario", o.scenario, "comma-separated scenarios (default: config or all six)");
  rep->add_option("--model", o.models, "comma-separated models or 'all' (default)");
  rep->add_option("--jobs", o.jobs, "worker threads (default 1)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (sim->parsed()) return cmd_simulate(o, out);
    if (fit->parsed()) return cmd_fit(o, out);
    if (score->parsed()) return cmd_score(o, out);
    if (eval->parsed()) return cmd_evaluate(o, out);
    return cmd_replicate(o, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace lsnm
