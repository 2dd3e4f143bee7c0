#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "r2d2/mcmc.hpp"

namespace r2d2::inference {

// v / (v + sigma2) with v the n-1 sample variance of eta.
double r2_from_eta(const Eigen::VectorXd& eta, double sigma_sq);
double r2_per_draw(const mcmc::ModelContext& ctx, const mcmc::ChainState& s);

// Linear interpolation between order statistics (R type 7).
double quantile(std::vector<double> x, double prob);
double quantile_sorted(const std::vector<double>& sorted, double prob);

// Initial-positive-sequence estimate; constant chains give N.
double ess(const Eigen::VectorXd& chain);

double prob_positive(const Eigen::VectorXd& chain);
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SummaryRow {
  std::string name;
  double median = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ess = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

SummaryRow summarize_column(const std::string& name, const Eigen::VectorXd& draws);
// One row per sampled quantity; requires at least 10 retained draws.
std::vector<SummaryRow> summarize(const mcmc::PosteriorSamples& samples);
const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const std::string& name);

struct SimMetric {
  double rmse = 0.0;
  double rmse_se = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  int replicates = 0;
};

// truths[r] and fits[r] describe the same components of replicate r; errors
// are averaged over components within a replicate, then over replicates.
SimMetric sim_metrics(const std::vector<Eigen::VectorXd>& truths, const std::vector<std::vector<SummaryRow>>& fits);

// sup_x |F_n(x) - F(x)|
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace r2d2::inference
