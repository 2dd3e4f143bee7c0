#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "r2d2/csv.hpp"
#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/harness.hpp"

namespace r2d2::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Method {
  std::string label;
  mcmc::PriorFamily family = mcmc::PriorFamily::kR2D2;
  double a = 1.0, b = 1.0;
};

Method parse_method(const std::string& m, const RunConfig& cfg) {
  Method out;
  if (m == "vague") {
    out.family = mcmc::PriorFamily::kVague;
    out.label = "Vague";
  } else if (m == "pc") {
    out.family = mcmc::PriorFamily::kPC;
    out.label = "PC";
  } else if (m == "r2d2") {
    out.a = cfg.hyper.r2.a;
    out.b = cfg.hyper.r2.b;
  } else if (m.rfind("r2d2(", 0) == 0 && m.back() == ')') {
    const std::string inner = m.substr(5, m.size() - 6);
    const auto comma = inner.find(',');
    if (comma == std::string::npos || !csv::parse_double(inner.substr(0, comma), out.a) ||
        !csv::parse_double(inner.substr(comma + 1), out.b) || !(out.a > 0.0) || !(out.b > 0.0))
      fail(ErrorKind::kInput, "cannot parse method '" + m + "'");
  } else {
    fail(ErrorKind::kInput, "unknown method '" + m + "' (use r2d2, r2d2(a,b), vague or pc)");
  }
  if (out.family == mcmc::PriorFamily::kR2D2) {
    mcmc::HyperParams h;
    h.r2 = {out.a, out.b};
    out.label = prior_label(h);
  }
  return out;
}

std::uint64_t task_key(int setting, int rep) {
  return static_cast<std::uint64_t>(setting) * 1000003ULL + static_cast<std::uint64_t>(rep);
}

Eigen::MatrixXd ar1_cholesky(int p, double r) {
  Eigen::MatrixXd s(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) s(i, j) = std::pow(r, std::abs(i - j));
  return robust_cholesky(s).lower();
}

struct ReplicateResult {
  bool generated = false;
  SimDataset data;
  // per method: summaries in the order beta_1..p, sigma_theta_sq, rho, R2
  std::vector<std::optional<std::vector<inference::SummaryRow>>> fits;
  std::vector<std::string> errors;
};

std::string setting_tag(int n, double rho, int rep) {
  std::ostringstream os;
  os << "n" << n << "_rho" << rho << "_rep" << rep + 1;
  return os.str();
}

}  // namespace

SimDataset simulate_dataset(RandomStream& rs, int n, double rho, const RunConfig& cfg) {
  const int p = cfg.sim_p;
  SimDataset d;
  RawTable& raw = d.raw;
  raw.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    raw.coords(i, 0) = rs.uniform();
    raw.coords(i, 1) = rs.uniform();
  }
  const Eigen::MatrixXd lx = ar1_cholesky(p, cfg.sim_ar1_r);
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = dist::standard_normal_vector(rs, p);
    x.row(i) = (lx * z).transpose();
  }
  Standardization st;
  Eigen::Index bad_col = -1;
  if (!standardize_columns(x, st, bad_col)) fail(ErrorKind::kSampler, "simulated covariate has zero variance");
  raw.x = x;
  for (int j = 0; j < p; ++j) raw.names.push_back("x_" + std::to_string(j + 1));

  const double s2 = cfg.sim_sigma_sq;
  d.beta.resize(p);
  for (int j = 0; j < p; ++j) d.beta[j] = std::sqrt(s2 * cfg.sim_sigma_beta_sq) * rs.normal();
  spatial::Locations locs{raw.coords};
  const Eigen::MatrixXd sigma = spatial::correlation_matrix(spatial::CorrelationKernel::exponential(rho), locs);
  const Eigen::VectorXd z = dist::standard_normal_vector(rs, n);
  Eigen::VectorXd theta = robust_cholesky(sigma).lower() * z;
  theta *= std::sqrt(s2 * cfg.sim_sigma_theta_sq);
  const Eigen::VectorXd eta = x * d.beta + theta;
  raw.y.resize(n);
  for (int i = 0; i < n; ++i) raw.y[i] = eta[i] + std::sqrt(s2) * rs.normal();

  d.sigma_theta_sq = cfg.sim_sigma_theta_sq;
  d.rho = rho;
  const double v = (eta.array() - eta.mean()).square().sum() / (n - 1.0);
  d.r2 = v / (v + s2);
  return d;
}

std::uint64_t simulation_fit_seed(std::uint64_t seed, int setting, int rep, int method_index) {
  return RandomStream(seed).split(task_key(setting, rep)).split(static_cast<std::uint64_t>(method_index) + 1).seed();
}

RunConfig simulation_fit_config(const RunConfig& cfg, const std::string& method, double true_rho,
                                std::uint64_t fit_seed) {
  const Method m = parse_method(method, cfg);
  RunConfig c = cfg;
  c.out.clear();
  c.kernel = "exponential";
  c.hyper.family = m.family;
  c.hyper.r2 = {m.a, m.b};
  if (m.family == mcmc::PriorFamily::kPC) {
    // tail calibration relative to the generating values
    if (!cfg.given.count("pc_sigma0")) c.hyper.pc_sigma0 = 10.0 * std::sqrt(cfg.sim_sigma_theta_sq);
    if (!cfg.given.count("pc_rho0")) c.hyper.pc_rho0 = true_rho / 10.0;
  }
  c.mcmc.seed = fit_seed;
  c.mcmc.chains = 1;
  c.doc["prior"] = mcmc::family_name(m.family);
  c.doc["a"] = m.a;
  c.doc["b"] = m.b;
  c.doc["seed"] = fit_seed;
  c.doc["pc_sigma0"] = c.hyper.pc_sigma0;
  c.doc["pc_rho0"] = c.hyper.pc_rho0;
  c.doc["kernel"] = "exponential";
  c.doc["out"] = "";
  return c;
}

SimStudyResult run_simulation(const RunConfig& cfg) {
  std::vector<Method> methods;
  for (const auto& m : cfg.methods) methods.push_back(parse_method(m, cfg));
  struct Setting {
    int n;
    double rho;
  };
  std::vector<Setting> settings;
  for (int n : cfg.sim_n)
    for (double rho : cfg.sim_rho) settings.push_back({n, rho});

  const int reps = cfg.replicates;
  const std::size_t tasks = settings.size() * static_cast<std::size_t>(reps);
  std::vector<ReplicateResult> results(tasks);
  if (cfg.write_datasets && !cfg.out.empty()) fs::create_directories(fs::path(cfg.out) / "datasets");

  auto run_task = [&](std::size_t t) {
    const int s = static_cast<int>(t / static_cast<std::size_t>(reps));
    const int rep = static_cast<int>(t % static_cast<std::size_t>(reps));
    const Setting& st = settings[static_cast<std::size_t>(s)];
    ReplicateResult& res = results[t];
    res.fits.resize(methods.size());
    res.errors.resize(methods.size());
    std::optional<Prepared> prep;
    try {
      RandomStream rs = RandomStream(cfg.mcmc.seed).split(task_key(s, rep)).split(0);
      res.data = simulate_dataset(rs, st.n, st.rho, cfg);
      prep = prepare(res.data.raw, spatial::CorrelationKernel::exponential(st.rho));
      res.generated = true;
    } catch (const Error& e) {
      for (auto& err : res.errors) err = std::string("data generation: ") + e.what();
      return;
    }
    const Prepared& prepared = *prep;
    json seeds = json::object();
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const std::uint64_t seed = simulation_fit_seed(cfg.mcmc.seed, s, rep, static_cast<int>(m));
      seeds[cfg.methods[m]] = seed;
      try {
        const RunConfig fc = simulation_fit_config(cfg, cfg.methods[m], st.rho, seed);
        const FitOutput f = fit(fc, prepared);
        std::vector<inference::SummaryRow> rows;
        for (const auto& nm : prepared.data.covariate_names) rows.push_back(*inference::find_row(f.summary, "beta_" + nm));
        for (const char* nm : {"sigma_theta_sq", "rho", "R2"}) rows.push_back(*inference::find_row(f.summary, nm));
        res.fits[m] = std::move(rows);
      } catch (const Error& e) {
        res.errors[m] = e.what();
      }
    }
    if (cfg.write_datasets && !cfg.out.empty()) {
      const std::string tag = setting_tag(st.n, st.rho, rep);
      write_raw((fs::path(cfg.out) / "datasets" / (tag + ".csv")).string(), res.data.raw);
      json truth = {{"beta", std::vector<double>(res.data.beta.data(), res.data.beta.data() + res.data.beta.size())},
                    {"sigma_theta_sq", res.data.sigma_theta_sq},
                    {"rho", res.data.rho},
                    {"r2", res.data.r2},
                    {"fit_seeds", seeds}};
      std::ofstream out(fs::path(cfg.out) / "datasets" / (tag + ".json"));
      out << truth.dump(2) << "\n";
    }
  };

  const int workers = std::max(1, std::min<int>(cfg.workers, static_cast<int>(tasks)));
  if (workers == 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_task(t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tasks; t = next++) run_task(t);
      });
    for (auto& th : pool) th.join();
  }

  SimStudyResult out;
  const int p = cfg.sim_p;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::vector<Eigen::VectorXd> tb, ts, tr, t2;
      std::vector<std::vector<inference::SummaryRow>> fb, fs_, fr, f2;
      int failures = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const ReplicateResult& res = results[s * static_cast<std::size_t>(reps) + static_cast<std::size_t>(rep)];
        ++out.fits;
        if (!res.fits[m]) {
          ++failures;
          continue;
        }
        const auto& rows = *res.fits[m];
        tb.push_back(res.data.beta);
        fb.emplace_back(rows.begin(), rows.begin() + p);
        ts.push_back(Eigen::VectorXd::Constant(1, res.data.sigma_theta_sq));
        fs_.push_back({rows[static_cast<std::size_t>(p)]});
        tr.push_back(Eigen::VectorXd::Constant(1, res.data.rho));
        fr.push_back({rows[static_cast<std::size_t>(p) + 1]});
        t2.push_back(Eigen::VectorXd::Constant(1, res.data.r2));
        f2.push_back({rows[static_cast<std::size_t>(p) + 2]});
      }
      out.failures += failures;
      auto add = [&](const char* param, const std::vector<Eigen::VectorXd>& t,
                     const std::vector<std::vector<inference::SummaryRow>>& f) {
        SimRow row;
        row.n = settings[s].n;
        row.rho = settings[s].rho;
        row.method = methods[m].label;
        row.parameter = param;
        row.metric = inference::sim_metrics(t, f);
        row.failures = failures;
        out.rows.push_back(row);
      };
      add("beta", tb, fb);
      add("sigma_theta_sq", ts, fs_);
      add("rho", tr, fr);
      add("R2", t2, f2);
    }
  }

  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    {
      std::ofstream f(fs::path(cfg.out) / "results.csv", std::ios::binary);
      csv::Writer w(f);
      for (const char* h : {"n", "rho", "method", "parameter", "rmse", "rmse_se", "coverage", "coverage_se",
                            "replicates", "failures"})
        w.field(h);
      w.end_row();
      for (const auto& r : out.rows) {
        w.field(r.n).field(r.rho).field(r.method).field(r.parameter).field(r.metric.rmse).field(r.metric.rmse_se);
        w.field(r.metric.coverage).field(r.metric.coverage_se).field(r.metric.replicates).field(r.failures);
        w.end_row();
      }
    }
    {
      std::ofstream f(fs::path(cfg.out) / "replicates.csv", std::ios::binary);
      csv::Writer w(f);
      for (const char* h : {"n", "rho", "replicate", "method", "parameter", "truth", "median", "ci_low", "ci_high", "error"})
        w.field(h);
      w.end_row();
      for (std::size_t t = 0; t < tasks; ++t) {
        const ReplicateResult& res = results[t];
        const Setting& st = settings[t / static_cast<std::size_t>(reps)];
        const int rep = static_cast<int>(t % static_cast<std::size_t>(reps)) + 1;
        for (std::size_t m = 0; m < methods.size(); ++m) {
          if (!res.fits[m]) {
            w.field(st.n).field(st.rho).field(rep).field(methods[m].label).field("").field("").field("").field("").field("");
            w.field(res.errors[m]);
            w.end_row();
            continue;
          }
          const auto& rows = *res.fits[m];
          for (std::size_t k = 0; k < rows.size(); ++k) {
            double truth = 0.0;
            if (k < static_cast<std::size_t>(p))
              truth = res.data.beta[static_cast<Eigen::Index>(k)];
            else if (k == static_cast<std::size_t>(p))
              truth = res.data.sigma_theta_sq;
            else if (k == static_cast<std::size_t>(p) + 1)
              truth = res.data.rho;
            else
              truth = res.data.r2;
            w.field(st.n).field(st.rho).field(rep).field(methods[m].label).field(rows[k].name).field(truth);
            w.field(rows[k].median).field(rows[k].ci_low).field(rows[k].ci_high).field("");
            w.end_row();
          }
        }
      }
    }
    std::ofstream f(fs::path(cfg.out) / "simulate_meta.json");
    f << json{{"config", cfg.doc},
              {"config_hash", hex64(config_hash(cfg.doc))},
              {"fits", out.fits},
              {"failures", out.failures}}
             .dump(2)
      << "\n";
  }
  return out;
}

SimStudyResult cmd_simulate(const RunConfig& cfg) {
  SimStudyResult r = run_simulation(cfg);
  if (r.fits > 0 && 5 * r.failures > r.fits) {
    std::ostringstream os;
    os << r.failures << " of " << r.fits << " fits failed (more than 20%)";
    fail(ErrorKind::kSimulationFailures, os.str());
  }
  return r;
}

RawTable simulate_clustered_survey(RandomStream& rs, int n, int p, int levels) {
  if (n < levels || levels < 2 || p < 1) fail(ErrorKind::kConfiguration, "survey simulation needs n >= L >= 2, p >= 1");
  RawTable raw;
  // sites in a 2.4 x 0.8 degree box, clustered around L reserve centres
  const double lon0 = 150.0, lat0 = -34.0, width = 2.4, height = 0.8;
  Eigen::MatrixX2d centres(levels, 2);
  for (int l = 0; l < levels; ++l) {
    centres(l, 0) = lon0 + width * rs.uniform();
    centres(l, 1) = lat0 + height * rs.uniform();
  }
  std::vector<int> level(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) level[static_cast<std::size_t>(i)] = i < levels ? i : static_cast<int>(rs.uniform() * levels);
  raw.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const int l = level[static_cast<std::size_t>(i)];
    raw.coords(i, 0) = centres(l, 0) + 0.04 * rs.normal();
    raw.coords(i, 1) = centres(l, 1) + 0.04 * rs.normal();
  }
  // zone: no-take (1) vs multiple-use (0), fixed per reserve, both present
  std::vector<int> zone(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) zone[static_cast<std::size_t>(l)] = l < 2 ? l : (rs.uniform() < 0.5 ? 1 : 0);
  raw.x.resize(n, p);
  raw.names.push_back("x_zone");
  for (int i = 0; i < n; ++i) raw.x(i, 0) = zone[static_cast<std::size_t>(level[static_cast<std::size_t>(i)])];
  for (int j = 1; j < p; ++j) {
    raw.names.push_back("x_env" + std::to_string(j));
    const double fa = 2.0 * rs.normal(), fb = 2.0 * rs.normal(), ph = 6.283185307179586 * rs.uniform();
    for (int i = 0; i < n; ++i)
      raw.x(i, j) = std::sin(fa * (raw.coords(i, 0) - lon0) + fb * (raw.coords(i, 1) - lat0) + ph) + 0.5 * rs.normal();
  }
  for (int i = 0; i < n; ++i) raw.group_labels.push_back("R" + std::to_string(level[static_cast<std::size_t>(i)] + 1));

  // response on the standardized / rescaled scale the fit will see
  raw.y = Eigen::VectorXd::Zero(n);
  const Prepared prep = prepare(raw, spatial::CorrelationKernel::exponential(0.1));
  Eigen::VectorXd beta(p);
  beta[0] = 0.15;
  for (int j = 1; j < p; ++j) beta[j] = 0.3 * rs.normal();
  Eigen::VectorXd u(levels);
  for (int l = 0; l < levels; ++l) u[l] = 0.3 * rs.normal();
  const Eigen::MatrixXd sigma = spatial::correlation_matrix(spatial::CorrelationKernel::exponential(0.05), prep.data.locations);
  Eigen::VectorXd theta = robust_cholesky(sigma).lower() * dist::standard_normal_vector(rs, n);
  theta *= std::sqrt(0.3);
  raw.y.resize(n);
  for (int i = 0; i < n; ++i)
    raw.y[i] = 2.0 + prep.data.x.row(i).dot(beta) + u[level[static_cast<std::size_t>(i)]] + theta[i] + rs.normal();
  return raw;
}

}  // namespace r2d2::harness
