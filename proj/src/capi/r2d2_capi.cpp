#include "r2d2/r2d2.h"

#include <cmath>
#include <exception>
#include <nlohmann/json.hpp>
#include <string>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/harness.hpp"
#include "r2d2/inference.hpp"
#include "r2d2/prior.hpp"

struct r2d2_config {
  nlohmann::json doc = nlohmann::json::object();
};

struct r2d2_fit {
  r2d2::harness::FitOutput out;
};

struct r2d2_dataset {
  r2d2::harness::Prepared prepared;
};

namespace {

thread_local std::string last_error;

r2d2_status status_of(r2d2::ErrorKind k) {
  switch (k) {
    case r2d2::ErrorKind::kParameter:
    case r2d2::ErrorKind::kConfiguration:
    case r2d2::ErrorKind::kDegeneratePrior:
    case r2d2::ErrorKind::kInput:
      return R2D2_ERR_INPUT;
    case r2d2::ErrorKind::kSingularCovariance:
    case r2d2::ErrorKind::kSampler:
      return R2D2_ERR_SAMPLER;
    case r2d2::ErrorKind::kSimulationFailures:
      return R2D2_ERR_SIMULATION;
  }
  return R2D2_ERR_INTERNAL;
}

template <class F>
r2d2_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return R2D2_OK;
  } catch (const r2d2::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("invalid JSON: ") + e.what();
    return R2D2_ERR_INPUT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return R2D2_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return R2D2_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) r2d2::fail(r2d2::ErrorKind::kInput, std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* r2d2_last_error(void) { return last_error.c_str(); }
const char* r2d2_version(void) { return "0.1.0"; }

r2d2_status r2d2_config_new(r2d2_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new r2d2_config;
  });
}

r2d2_status r2d2_config_load(const char* path, r2d2_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto cfg = std::make_unique<r2d2_config>();
    cfg->doc = r2d2::harness::load_json_file(path);
    if (!cfg->doc.is_object()) r2d2::fail(r2d2::ErrorKind::kInput, "config must be a JSON object");
    *out = cfg.release();
  });
}

r2d2_status r2d2_config_from_json(const char* text, r2d2_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    auto cfg = std::make_unique<r2d2_config>();
    cfg->doc = nlohmann::json::parse(text);
    if (!cfg->doc.is_object()) r2d2::fail(r2d2::ErrorKind::kInput, "config must be a JSON object");
    *out = cfg.release();
  });
}

r2d2_status r2d2_config_set_number(r2d2_config* cfg, const char* key, double value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    if (std::isfinite(value) && value == std::floor(value) && std::abs(value) < 9007199254740992.0)
      cfg->doc[key] = static_cast<long long>(value);
    else
      cfg->doc[key] = value;
  });
}

r2d2_status r2d2_config_set_string(r2d2_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    cfg->doc[key] = value;
  });
}

r2d2_status r2d2_config_set_bool(r2d2_config* cfg, const char* key, int value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    cfg->doc[key] = value != 0;
  });
}

r2d2_status r2d2_config_set_json(r2d2_config* cfg, const char* key, const char* json_value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(json_value, "json_value");
    cfg->doc[key] = nlohmann::json::parse(json_value);
  });
}

void r2d2_config_free(r2d2_config* cfg) { delete cfg; }

r2d2_status r2d2_run_fit(const r2d2_config* cfg, r2d2_fit** fit) {
  return guarded([&] {
    need(cfg, "cfg");
    const auto rc = r2d2::harness::parse_config(cfg->doc, r2d2::harness::Command::kFit);
    auto result = std::make_unique<r2d2_fit>();
    result->out = r2d2::harness::cmd_fit(rc);
    if (fit) *fit = result.release();
  });
}

r2d2_status r2d2_run_prior_check(const r2d2_config* cfg, double* mean_gap, double* ks_distance) {
  return guarded([&] {
    need(cfg, "cfg");
    const auto rc = r2d2::harness::parse_config(cfg->doc, r2d2::harness::Command::kPriorCheck);
    const auto out = r2d2::harness::cmd_prior_check(rc);
    if (mean_gap) *mean_gap = out.mean_gap;
    if (ks_distance) *ks_distance = out.ks;
  });
}

r2d2_status r2d2_run_simulate(const r2d2_config* cfg) {
  return guarded([&] {
    need(cfg, "cfg");
    const auto rc = r2d2::harness::parse_config(cfg->doc, r2d2::harness::Command::kSimulate);
    r2d2::harness::cmd_simulate(rc);
  });
}

size_t r2d2_fit_num_draws(const r2d2_fit* fit) { return fit ? static_cast<size_t>(fit->out.samples.draws.rows()) : 0; }

size_t r2d2_fit_num_params(const r2d2_fit* fit) { return fit ? fit->out.samples.names.size() : 0; }

const char* r2d2_fit_param_name(const r2d2_fit* fit, size_t index) {
  if (!fit || index >= fit->out.samples.names.size()) return nullptr;
  return fit->out.samples.names[index].c_str();
}

r2d2_status r2d2_fit_draw(const r2d2_fit* fit, size_t row, size_t param, double* value) {
  return guarded([&] {
    need(fit, "fit");
    need(value, "value");
    const auto& d = fit->out.samples.draws;
    if (row >= static_cast<size_t>(d.rows()) || param >= static_cast<size_t>(d.cols()))
      r2d2::fail(r2d2::ErrorKind::kInput, "draw index out of range");
    *value = d(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(param));
  });
}

r2d2_status r2d2_fit_summary(const r2d2_fit* fit, const char* param, double* median, double* ci_low,
                             double* ci_high, double* ess) {
  return guarded([&] {
    need(fit, "fit");
    need(param, "param");
    const auto* row = r2d2::inference::find_row(fit->out.summary, param);
    if (!row) r2d2::fail(r2d2::ErrorKind::kInput, std::string("no parameter named ") + param);
    if (median) *median = row->median;
    if (ci_low) *ci_low = row->ci_low;
    if (ci_high) *ci_high = row->ci_high;
    if (ess) *ess = row->ess;
  });
}

r2d2_status r2d2_fit_acceptance(const r2d2_fit* fit, size_t chain, double* phi_rate, double* rho_rate) {
  return guarded([&] {
    need(fit, "fit");
    const auto& s = fit->out.samples;
    if (chain >= s.phi_acceptance.size()) r2d2::fail(r2d2::ErrorKind::kInput, "chain index out of range");
    if (phi_rate) *phi_rate = s.phi_acceptance[chain];
    if (rho_rate) *rho_rate = s.rho_acceptance[chain];
  });
}

void r2d2_fit_free(r2d2_fit* fit) { delete fit; }

r2d2_status r2d2_dataset_load(const char* path, r2d2_dataset** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    auto ds = std::make_unique<r2d2_dataset>();
    ds->prepared = r2d2::harness::prepare(r2d2::harness::read_raw(path), r2d2::spatial::CorrelationKernel::exponential(0.5));
    *out = ds.release();
  });
}

size_t r2d2_dataset_n(const r2d2_dataset* ds) { return ds ? static_cast<size_t>(ds->prepared.data.n()) : 0; }
size_t r2d2_dataset_p(const r2d2_dataset* ds) { return ds ? static_cast<size_t>(ds->prepared.data.p()) : 0; }
size_t r2d2_dataset_levels(const r2d2_dataset* ds) {
  return ds ? static_cast<size_t>(ds->prepared.data.groups.levels) : 0;
}
void r2d2_dataset_free(r2d2_dataset* ds) { delete ds; }

r2d2_status r2d2_gbp_cdf(double x, double a, double b, double c, double d, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = r2d2::dist::gbp_cdf(x, {a, b, c, d});
  });
}

r2d2_status r2d2_w_prior_moments(double a, double b, double alpha, double beta, double* mean, double* variance) {
  return guarded([&] {
    r2d2::prior::PriorShapeScale ss;
    ss.alpha = alpha;
    ss.beta = beta;
    if (!(alpha > 0.0) || !(beta > 0.0)) r2d2::fail(r2d2::ErrorKind::kParameter, "alpha and beta must be positive");
    const auto m = r2d2::prior::w_prior_moments({a, b}, ss);
    if (mean) *mean = m.mean;
    if (variance) *variance = m.variance;
  });
}

r2d2_status r2d2_ess(const double* chain, size_t n, double* out) {
  return guarded([&] {
    need(chain, "chain");
    need(out, "out");
    *out = r2d2::inference::ess(Eigen::Map<const Eigen::VectorXd>(chain, static_cast<Eigen::Index>(n)));
  });
}

}  // extern "C"
