#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "r2d2/design.hpp"
#include "r2d2/inference.hpp"
#include "r2d2/mcmc.hpp"
#include "r2d2/random.hpp"

namespace r2d2::harness {

enum class Command { kFit, kPriorCheck, kSimulate };

// Flat run configuration. Every key has a default; `doc` holds the fully
// resolved document (echoed into meta.json and hashed).
struct RunConfig {
  nlohmann::json doc;
  std::set<std::string> given;  // keys present in the user document

  std::string data;
  std::string out;
  mcmc::HyperParams hyper;
  std::string kernel = "exponential";
  double nu = 0.5;
  int blocks = 1;
  mcmc::McmcConfig mcmc;
  bool likelihood = true;

  // prior-check
  int n_draws = 10000;
  int hist_bins = 50;
  int design_n = 100;
  int design_p = 5;
  std::optional<double> rho;
  std::optional<Eigen::VectorXd> phi;

  // simulate
  std::vector<int> sim_n{100};
  std::vector<double> sim_rho{0.1};
  int sim_p = 10;
  double sim_ar1_r = 0.8;
  double sim_sigma_sq = 1.0;
  double sim_sigma_beta_sq = 0.25;
  double sim_sigma_theta_sq = 0.25;
  int replicates = 20;
  std::vector<std::string> methods{"r2d2", "vague", "pc"};
  bool full_budget = false;
  bool write_datasets = false;
  int workers = 1;
};

// Throws kInput on unknown keys, wrong types or out-of-range values.
RunConfig parse_config(const nlohmann::json& doc, Command cmd);
nlohmann::json load_json_file(const std::string& path);
std::uint64_t config_hash(const nlohmann::json& resolved);
std::string hex64(std::uint64_t v);

// Parsed but untransformed data set.
struct RawTable {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::string> names;  // covariate column names (with the x_ prefix)
  Eigen::MatrixX2d coords;
  std::vector<std::string> group_labels;  // empty when there is no group column
};

RawTable read_raw(const std::string& path);
void write_raw(const std::string& path, const RawTable& raw);

struct Prepared {
  mcmc::ModelData data;
  Standardization standardization;
  bool rescaled = false;
  Eigen::Vector2d shift = Eigen::Vector2d::Zero();
  double scale = 1.0;
  std::vector<std::string> levels;  // group label of each level index
};

// Rescales coordinates into the unit square (identity when already inside),
// standardizes covariates and maps group labels to levels in order of
// first appearance.
Prepared prepare(const RawTable& raw, const spatial::CorrelationKernel& kernel);

spatial::CorrelationKernel make_kernel(const RunConfig& cfg, double rho);

struct FitOutput {
  mcmc::PosteriorSamples samples;
  std::vector<inference::SummaryRow> summary;
  nlohmann::json meta;
};

std::string prior_label(const mcmc::HyperParams& h);
FitOutput fit(const RunConfig& cfg, const Prepared& prepared);
void write_fit(const FitOutput& out, const std::string& dir);

// Report in the layout of a posterior summary table: one row per fit.
std::string report_header(int phi_components);
std::string report_row(const std::string& label, const FitOutput& f, int phi_components);
std::string report(const std::string& label, const FitOutput& f);

// Commands: read inputs, compute, write artifacts to cfg.out.
FitOutput cmd_fit(const RunConfig& cfg);

struct PriorCheckOutput {
  std::vector<double> r2;
  std::vector<double> w;
  double mean_r2 = 0.0;
  double target_mean = 0.0;
  double mean_gap = 0.0;
  double ks = 0.0;
  nlohmann::json info;
};
PriorCheckOutput cmd_prior_check(const RunConfig& cfg);

struct SimRow {
  int n = 0;
  double rho = 0.0;
  std::string method;
  std::string parameter;
  inference::SimMetric metric;
  int failures = 0;
};

struct SimStudyResult {
  std::vector<SimRow> rows;
  int fits = 0;
  int failures = 0;
};

// One replicate's generated data together with its true values.
struct SimDataset {
  RawTable raw;
  Eigen::VectorXd beta;
  double sigma_theta_sq = 0.0;
  double rho = 0.0;
  double r2 = 0.0;
};

SimDataset simulate_dataset(RandomStream& rs, int n, double rho, const RunConfig& cfg);
// Seed used for the fit of `method_index` on replicate `rep` of setting `setting`.
std::uint64_t simulation_fit_seed(std::uint64_t seed, int setting, int rep, int method_index);
// Hyperparameters and config used for one method inside the study.
RunConfig simulation_fit_config(const RunConfig& cfg, const std::string& method, double true_rho,
                                std::uint64_t fit_seed);
SimStudyResult run_simulation(const RunConfig& cfg);
SimStudyResult cmd_simulate(const RunConfig& cfg);

// A synthetic data set shaped like a published fisheries survey: n sites in
// L spatial clusters, p covariates including a cluster-level binary zone.
RawTable simulate_clustered_survey(RandomStream& rs, int n, int p, int levels);

}  // namespace r2d2::harness
