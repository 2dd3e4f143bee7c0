#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "r2d2/design.hpp"
#include "r2d2/linalg.hpp"
#include "r2d2/prior.hpp"
#include "r2d2/random.hpp"
#include "r2d2/spatial.hpp"

namespace r2d2::mcmc {

enum class PriorFamily { kR2D2, kVague, kPC };

const char* family_name(PriorFamily f);

struct ModelData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // standardized: column means 0, sum of squares n
  std::vector<std::string> covariate_names;
  GroupIndex groups;
  spatial::Locations locations;
  // Family and shape; for distance-based families rho is only the fallback
  // starting value.
  spatial::CorrelationKernel kernel = spatial::CorrelationKernel::exponential(0.1);

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  void validate() const;
};

struct HyperParams {
  PriorFamily family = PriorFamily::kR2D2;
  prior::R2Hyper r2{1.0, 1.0};
  Eigen::VectorXd xi;  // empty -> all ones
  bool equal_fixed = true;
  double mu0 = 0.0;
  double sigma0_sq = 100.0;
  double a0 = 0.1;
  double b0 = 0.1;
  double log_rho_mean = -2.0;
  double log_rho_var = 1.0;
  // baselines
  double sigma_beta_sq = 100.0;
  double vague_a = 0.1;
  double vague_b = 0.1;
  double pc_alpha = 0.05;
  double pc_sigma0 = 10.0;
  double pc_rho0 = 0.01;

  void validate() const;
  double pc_sigma_rate() const;  // rate of the exponential prior on sigma_theta
  double pc_rho_scale() const;   // scale of the IG(1, .) prior on rho
};

struct McmcConfig {
  int burnin = 10000;
  int iters = 100000;
  int thin = 5;
  std::uint64_t seed = 1;
  int chains = 1;
  double c1 = 100.0;
  double c2 = 0.5;
  double c3 = 0.5;  // log sigma_theta step for the PC sampler
  int adapt_interval = 100;
  bool store_theta = false;
  bool fix_rho = false;
  std::optional<double> rho_init;

  void validate() const;
};

// Correlation quantities tied to the current rho.
struct SpatialCache {
  double rho = 0.0;
  Eigen::MatrixXd sigma;
  CholeskyFactor chol;
  prior::MomentMatcher::SpatialTerms terms;
};

struct ChainState {
  double beta0 = 0.0;
  Eigen::VectorXd beta;
  Eigen::VectorXd u;
  Eigen::VectorXd theta;
  double sigma_sq = 1.0;
  // R2D2
  double U = 1.0;
  double V = 1.0;
  double gamma = 1.0;
  prior::VarianceSplit phi;
  prior::PriorShapeScale ss;
  // baselines
  double sigma_theta_sq = 1.0;
  double sigma_u_sq = 1.0;

  double rho = 0.1;
  SpatialCache cache;

  double w() const { return U * V; }
};

// Everything fixed for the duration of a fit. Owns a copy of the data so
// the response can be replaced (Geweke redraws).
class ModelContext {
 public:
  // likelihood = false drops the y | eta term, so the sampler targets the prior.
  ModelContext(ModelData data, HyperParams hyper, bool likelihood = true);

  const ModelData& data() const { return data_; }
  const HyperParams& hyper() const { return hyper_; }
  void set_response(const Eigen::VectorXd& y);

  Eigen::Index n() const { return data_.n(); }
  Eigen::Index p() const { return data_.p(); }
  int levels() const { return data_.groups.levels; }
  bool likelihood() const { return likelihood_; }
  bool rho_moves() const { return data_.kernel.distance_based(); }

  const Eigen::MatrixXd& xtx() const { return xtx_; }
  const std::vector<int>& counts() const { return counts_; }
  const prior::ShareLayout& layout() const { return layout_; }
  const prior::MomentMatcher& matcher() const { return matcher_; }
  const Eigen::VectorXd& xi() const { return xi_; }

  // Throws kSingularCovariance if Sigma(rho) cannot be factored.
  SpatialCache make_cache(double rho) const;
  std::optional<SpatialCache> try_make_cache(double rho) const;

  // y - beta0 - X beta - Z u - theta
  Eigen::VectorXd residual(const ChainState& s) const;
  Eigen::VectorXd linear_predictor(const ChainState& s) const;

 private:
  ModelData data_;
  HyperParams hyper_;
  bool likelihood_;
  Eigen::MatrixXd distances_;
  Eigen::MatrixXd xtx_;
  std::vector<int> counts_;
  prior::ShareLayout layout_;
  prior::MomentMatcher matcher_;
  Eigen::VectorXd xi_;
};

// Deterministic starting point (also used by the baselines).
ChainState initial_state(const ModelContext& ctx, const McmcConfig& cfg);

// Independent draw of every R2D2 parameter from its prior.
ChainState prior_draw(const ModelContext& ctx, RandomStream& rs, bool rho_random = true);

// --- R2D2 Gibbs / MH steps ----------------------------------------------

void step_beta0(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_beta(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_u(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_sigma2(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_U(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_V(const ModelContext& ctx, ChainState& s, RandomStream& rs);
void step_gamma(const ModelContext& ctx, ChainState& s, RandomStream& rs);
bool step_phi_mh(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c1);
bool step_rho_mh(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c2);

// Shared full conditional for theta ~ N(0, sigma2 c Sigma) with residual m.
void draw_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c, const Eigen::VectorXd& m);

// Log full conditional of phi / rho (up to a constant shared by every value)
// with the rest of the state held fixed.
double log_phi_target(const ModelContext& ctx, const ChainState& s, const Eigen::VectorXd& phi);
double log_rho_target(const ModelContext& ctx, const ChainState& s, const SpatialCache& cache,
                      const prior::PriorShapeScale& ss);

// Quadratic forms Q = beta' Phi^-1 beta + u'u / phi_g + theta' Sigma^-1 theta / phi_s.
double r2d2_quadratic(const ModelContext& ctx, const ChainState& s);

struct AcceptanceCounter {
  long proposed = 0;
  long accepted = 0;
  double rate() const { return proposed ? static_cast<double>(accepted) / proposed : 0.0; }
};

struct TuningState {
  double c1 = 100.0;
  double c2 = 0.5;
  double c3 = 0.5;
};

// Applies the acceptance-band rule to one window.
// A rate is passed only for moves that were proposed in the window.
void adapt_proposals(TuningState& t, std::optional<double> phi_rate, std::optional<double> rho_rate,
                     std::optional<double> sigma_rate = {});

struct SweepStats {
  AcceptanceCounter phi, rho, sigma_theta;
};

// One full sweep in the fixed step order.
void sweep(const ModelContext& ctx, ChainState& s, RandomStream& rs, const TuningState& t,
           const McmcConfig& cfg, SweepStats& stats);

// --- baselines -------------------------------------------------------------

void baseline_sweep(const ModelContext& ctx, ChainState& s, RandomStream& rs, const TuningState& t,
                    const McmcConfig& cfg, SweepStats& stats);

double r2_of(const ModelContext& ctx, const ChainState& s);

struct PosteriorSamples {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // one row per retained draw
  std::vector<int> chain;
  std::vector<int> iteration;
  std::vector<double> phi_acceptance;  // per chain, post burn-in
  std::vector<double> rho_acceptance;
  std::vector<double> sigma_theta_acceptance;
  std::vector<TuningState> final_tuning;

  Eigen::Index column(const std::string& name) const;  // -1 if absent
  Eigen::VectorXd values(const std::string& name) const;
};

std::vector<std::string> sample_names(const ModelContext& ctx, bool store_theta);
void record(const ModelContext& ctx, const ChainState& s, bool store_theta, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row);

// Burn-in with adaptation, then iters sweeps keeping every thin-th draw.
PosteriorSamples run_chain(const ModelContext& ctx, const McmcConfig& cfg, RandomStream& rs, int chain_index = 0);

// cfg.chains chains on sub-streams split(chain) of `seed`, merged by chain index.
PosteriorSamples run_chains(const ModelContext& ctx, const McmcConfig& cfg);

}  // namespace r2d2::mcmc
