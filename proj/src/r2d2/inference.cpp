#include "r2d2/inference.hpp"

#include <algorithm>
#include <cmath>

#include "r2d2/error.hpp"

namespace r2d2::inference {

double r2_from_eta(const Eigen::VectorXd& eta, double sigma_sq) {
  const Eigen::Index n = eta.size();
  if (n < 2) fail(ErrorKind::kParameter, "r2 needs at least two observations");
  const double v = (eta.array() - eta.mean()).square().sum() / static_cast<double>(n - 1);
  return v / (v + sigma_sq);
}

double r2_per_draw(const mcmc::ModelContext& ctx, const mcmc::ChainState& s) {
  return r2_from_eta(ctx.linear_predictor(s), s.sigma_sq);
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) fail(ErrorKind::kParameter, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> x, double prob) {
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, prob);
}

double ess(const Eigen::VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 10) fail(ErrorKind::kParameter, "ess needs at least 10 draws");
  const Eigen::ArrayXd d = chain.array() - chain.mean();
  const double c0 = d.square().sum() / static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto rho = [&](Eigen::Index k) {
    return (d.head(n - k) * d.tail(n - k)).sum() / (static_cast<double>(n) * c0);
  };
  double sum = 0.0;
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    const double pair = rho(2 * k) + rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

double prob_positive(const Eigen::VectorXd& chain) {
  if (chain.size() == 0) fail(ErrorKind::kParameter, "prob_positive of an empty chain");
  return static_cast<double>((chain.array() > 0.0).count()) / static_cast<double>(chain.size());
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  return (da * db).sum() / std::sqrt(da.square().sum() * db.square().sum());
}

SummaryRow summarize_column(const std::string& name, const Eigen::VectorXd& draws) {
  if (draws.size() < 10) fail(ErrorKind::kParameter, "summaries need at least 10 retained draws");
  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  SummaryRow r;
  r.name = name;
  r.median = quantile_sorted(sorted, 0.5);
  r.ci_low = quantile_sorted(sorted, 0.025);
  r.ci_high = quantile_sorted(sorted, 0.975);
  r.ess = ess(draws);
  r.mean = draws.mean();
  r.sd = std::sqrt((draws.array() - r.mean).square().sum() / static_cast<double>(draws.size() - 1));
  return r;
}

std::vector<SummaryRow> summarize(const mcmc::PosteriorSamples& samples) {
  std::vector<SummaryRow> rows;
  rows.reserve(samples.names.size());
  for (std::size_t c = 0; c < samples.names.size(); ++c)
    rows.push_back(summarize_column(samples.names[c], samples.draws.col(static_cast<Eigen::Index>(c))));
  return rows;
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

SimMetric sim_metrics(const std::vector<Eigen::VectorXd>& truths, const std::vector<std::vector<SummaryRow>>& fits) {
  if (truths.size() != fits.size()) fail(ErrorKind::kParameter, "sim_metrics: replicate counts differ");
  SimMetric m;
  m.replicates = static_cast<int>(truths.size());
  if (truths.empty()) return m;
  std::vector<double> sq, cov;
  for (std::size_t r = 0; r < truths.size(); ++r) {
    const Eigen::VectorXd& t = truths[r];
    if (static_cast<std::size_t>(t.size()) != fits[r].size())
      fail(ErrorKind::kParameter, "sim_metrics: component counts differ");
    double e = 0.0, c = 0.0;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const SummaryRow& row = fits[r][static_cast<std::size_t>(k)];
      e += (row.median - t[k]) * (row.median - t[k]);
      c += (row.ci_low <= t[k] && t[k] <= row.ci_high) ? 1.0 : 0.0;
    }
    sq.push_back(e / static_cast<double>(t.size()));
    cov.push_back(c / static_cast<double>(t.size()));
  }
  const double reps = static_cast<double>(sq.size());
  auto mean_se = [reps](const std::vector<double>& v) {
    double mu = 0.0;
    for (double x : v) mu += x;
    mu /= reps;
    double ss = 0.0;
    for (double x : v) ss += (x - mu) * (x - mu);
    const double se = v.size() > 1 ? std::sqrt(ss / (reps - 1.0) / reps) : 0.0;
    return std::pair<double, double>{mu, se};
  };
  const auto [mse, mse_se] = mean_se(sq);
  const auto [cv, cv_se] = mean_se(cov);
  m.rmse = std::sqrt(mse);
  m.rmse_se = m.rmse > 0.0 ? mse_se / (2.0 * m.rmse) : 0.0;
  m.coverage = cv;
  m.coverage_se = cv_se;
  return m;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace r2d2::inference
