#include "r2d2/harness.hpp"

#include <algorithm>
#include <boost/math/distributions/beta.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "r2d2/csv.hpp"
#include "r2d2/error.hpp"
#include "r2d2/prior.hpp"

namespace r2d2::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // model
      "data", "out", "prior", "a", "b", "xi", "phi_mode", "kernel", "nu", "blocks", "mu0", "sigma0_sq", "a0",
      "b0", "log_rho_mean", "log_rho_var", "sigma_beta_sq", "vague_a", "vague_b", "pc_alpha", "pc_sigma0",
      "pc_rho0", "likelihood",
      // mcmc
      "seed", "burnin", "iters", "thin", "chains", "c1", "c2", "c3", "adapt_interval", "store_theta", "fix_rho",
      "rho_init",
      // prior-check
      "n_draws", "hist_bins", "design_n", "design_p", "rho", "phi",
      // simulate
      "sim_n", "sim_rho", "sim_p", "sim_ar1_r", "sim_sigma_sq", "sim_sigma_beta_sq", "sim_sigma_theta_sq",
      "replicates", "methods", "full_budget", "write_datasets", "workers"};
  return keys;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  fail(ErrorKind::kInput, "config key '" + key + "': " + what);
}

class Reader {
 public:
  Reader(const json& doc, json& resolved) : doc_(doc), out_(resolved) {}

  double number(const std::string& key, double def) {
    double v = def;
    if (const json* j = find(key)) {
      if (!j->is_number()) bad(key, "expected a number");
      v = j->get<double>();
      if (!std::isfinite(v)) bad(key, "must be finite");
    }
    out_[key] = v;
    return v;
  }
  double positive(const std::string& key, double def) {
    const double v = number(key, def);
    if (!(v > 0.0)) bad(key, "must be positive");
    return v;
  }
  long integer(const std::string& key, long def, long min) {
    long v = def;
    if (const json* j = find(key)) {
      if (!j->is_number_integer()) bad(key, "expected an integer");
      v = j->get<long>();
    }
    if (v < min) bad(key, "must be >= " + std::to_string(min));
    out_[key] = v;
    return v;
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    std::uint64_t v = def;
    if (const json* j = find(key)) {
      if (!j->is_number_integer() || (j->is_number_integer() && !j->is_number_unsigned() && j->get<long>() < 0))
        bad(key, "expected a non-negative integer");
      v = j->get<std::uint64_t>();
    }
    out_[key] = v;
    return v;
  }
  bool boolean(const std::string& key, bool def) {
    bool v = def;
    if (const json* j = find(key)) {
      if (!j->is_boolean()) bad(key, "expected true or false");
      v = j->get<bool>();
    }
    out_[key] = v;
    return v;
  }
  std::string string(const std::string& key, const std::string& def, std::initializer_list<const char*> choices = {}) {
    std::string v = def;
    if (const json* j = find(key)) {
      if (!j->is_string()) bad(key, "expected a string");
      v = j->get<std::string>();
    }
    if (choices.size()) {
      bool ok = false;
      std::string list;
      for (const char* c : choices) {
        ok = ok || v == c;
        list += std::string(list.empty() ? "" : ", ") + c;
      }
      if (!ok) bad(key, "'" + v + "' is not one of " + list);
    }
    out_[key] = v;
    return v;
  }
  std::optional<double> optional_number(const std::string& key) {
    const json* j = find(key);
    if (!j || j->is_null()) {
      out_[key] = nullptr;
      return std::nullopt;
    }
    if (!j->is_number()) bad(key, "expected a number");
    out_[key] = j->get<double>();
    return j->get<double>();
  }
  std::optional<Eigen::VectorXd> optional_vector(const std::string& key) {
    const json* j = find(key);
    if (!j || j->is_null()) {
      out_[key] = nullptr;
      return std::nullopt;
    }
    if (!j->is_array()) bad(key, "expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j->size()));
    for (std::size_t i = 0; i < j->size(); ++i) {
      if (!(*j)[i].is_number()) bad(key, "expected an array of numbers");
      v[static_cast<Eigen::Index>(i)] = (*j)[i].get<double>();
    }
    out_[key] = *j;
    return v;
  }
  std::vector<double> number_list(const std::string& key, const std::vector<double>& def) {
    std::vector<double> v = def;
    if (const json* j = find(key)) {
      v.clear();
      if (j->is_number()) {
        v.push_back(j->get<double>());
      } else if (j->is_array() && !j->empty()) {
        for (const auto& e : *j) {
          if (!e.is_number()) bad(key, "expected a number or an array of numbers");
          v.push_back(e.get<double>());
        }
      } else {
        bad(key, "expected a number or a non-empty array of numbers");
      }
    }
    out_[key] = v;
    return v;
  }
  std::vector<std::string> string_list(const std::string& key, const std::vector<std::string>& def) {
    std::vector<std::string> v = def;
    if (const json* j = find(key)) {
      v.clear();
      if (!j->is_array() || j->empty()) bad(key, "expected a non-empty array of strings");
      for (const auto& e : *j) {
        if (!e.is_string()) bad(key, "expected a non-empty array of strings");
        v.push_back(e.get<std::string>());
      }
    }
    out_[key] = v;
    return v;
  }

 private:
  const json* find(const std::string& key) const {
    const auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }
  const json& doc_;
  json& out_;
};

}  // namespace

RunConfig parse_config(const json& doc, Command cmd) {
  if (!doc.is_object()) fail(ErrorKind::kInput, "config must be a JSON object");
  RunConfig c;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!known_keys().count(it.key())) fail(ErrorKind::kInput, "unknown config key '" + it.key() + "'");
    c.given.insert(it.key());
  }
  c.doc = json::object();
  Reader r(doc, c.doc);

  c.data = r.string("data", "");
  c.out = r.string("out", "");
  const std::string prior = r.string("prior", "r2d2", {"r2d2", "vague", "pc"});
  c.hyper.family = prior == "r2d2" ? mcmc::PriorFamily::kR2D2
                   : prior == "vague" ? mcmc::PriorFamily::kVague
                                      : mcmc::PriorFamily::kPC;
  c.hyper.r2.a = r.positive("a", 1.0);
  c.hyper.r2.b = r.positive("b", 1.0);
  if (auto xi = r.optional_vector("xi")) c.hyper.xi = *xi;
  const std::string default_mode = cmd == Command::kSimulate ? "full" : "equal";
  c.hyper.equal_fixed = r.string("phi_mode", default_mode, {"equal", "full"}) == "equal";
  c.kernel = r.string("kernel", "exponential", {"exponential", "matern", "cs", "blocked_cs"});
  c.nu = r.positive("nu", 0.5);
  c.blocks = static_cast<int>(r.integer("blocks", 1, 1));
  c.hyper.mu0 = r.number("mu0", 0.0);
  c.hyper.sigma0_sq = r.positive("sigma0_sq", 100.0);
  c.hyper.a0 = r.positive("a0", 0.1);
  c.hyper.b0 = r.positive("b0", 0.1);
  c.hyper.log_rho_mean = r.number("log_rho_mean", -2.0);
  c.hyper.log_rho_var = r.positive("log_rho_var", 1.0);
  c.hyper.sigma_beta_sq = r.positive("sigma_beta_sq", 100.0);
  c.hyper.vague_a = r.positive("vague_a", 0.1);
  c.hyper.vague_b = r.positive("vague_b", 0.1);
  c.hyper.pc_alpha = r.positive("pc_alpha", 0.05);
  c.hyper.pc_sigma0 = r.positive("pc_sigma0", 10.0);
  c.hyper.pc_rho0 = r.positive("pc_rho0", 0.01);
  c.likelihood = r.boolean("likelihood", true);

  c.full_budget = r.boolean("full_budget", false);
  int burnin = 10000, iters = 100000, thin = 5;
  if (cmd == Command::kSimulate) {
    burnin = c.full_budget ? 1000 : 500;
    iters = c.full_budget ? 10000 : 2000;
    thin = 1;
  }
  c.mcmc.seed = r.unsigned_integer("seed", 1);
  c.mcmc.burnin = static_cast<int>(r.integer("burnin", burnin, 0));
  c.mcmc.iters = static_cast<int>(r.integer("iters", iters, 1));
  c.mcmc.thin = static_cast<int>(r.integer("thin", thin, 1));
  c.mcmc.chains = static_cast<int>(r.integer("chains", 1, 1));
  c.mcmc.c1 = r.positive("c1", 100.0);
  c.mcmc.c2 = r.positive("c2", 0.5);
  c.mcmc.c3 = r.positive("c3", 0.5);
  c.mcmc.adapt_interval = static_cast<int>(r.integer("adapt_interval", 100, 1));
  c.mcmc.store_theta = r.boolean("store_theta", false);
  c.mcmc.fix_rho = r.boolean("fix_rho", false);
  c.mcmc.rho_init = r.optional_number("rho_init");

  c.n_draws = static_cast<int>(r.integer("n_draws", 10000, 1));
  c.hist_bins = static_cast<int>(r.integer("hist_bins", 50, 1));
  c.design_n = static_cast<int>(r.integer("design_n", 100, 3));
  c.design_p = static_cast<int>(r.integer("design_p", 5, 0));
  c.rho = r.optional_number("rho");
  c.phi = r.optional_vector("phi");

  std::vector<double> ns = r.number_list("sim_n", {100.0});
  c.sim_n.clear();
  for (double v : ns) {
    if (v < 3 || v != std::floor(v)) bad("sim_n", "entries must be integers >= 3");
    c.sim_n.push_back(static_cast<int>(v));
  }
  c.sim_rho = r.number_list("sim_rho", {0.1});
  for (double v : c.sim_rho)
    if (!(v > 0.0)) bad("sim_rho", "entries must be positive");
  c.sim_p = static_cast<int>(r.integer("sim_p", 10, 1));
  c.sim_ar1_r = r.number("sim_ar1_r", 0.8);
  if (!(c.sim_ar1_r >= 0.0 && c.sim_ar1_r < 1.0)) bad("sim_ar1_r", "must lie in [0, 1)");
  c.sim_sigma_sq = r.positive("sim_sigma_sq", 1.0);
  c.sim_sigma_beta_sq = r.positive("sim_sigma_beta_sq", 0.25);
  c.sim_sigma_theta_sq = r.positive("sim_sigma_theta_sq", 0.25);
  c.replicates = static_cast<int>(r.integer("replicates", 20, 1));
  c.methods = r.string_list("methods", {"r2d2", "vague", "pc"});
  c.write_datasets = r.boolean("write_datasets", false);
  c.workers = static_cast<int>(r.integer("workers", 1, 1));

  try {
    c.hyper.validate();
    c.mcmc.validate();
    make_kernel(c, c.rho.value_or(0.5));
  } catch (const Error& e) {
    fail(ErrorKind::kInput, std::string("invalid configuration: ") + e.what());
  }
  if (cmd == Command::kFit && c.data.empty()) fail(ErrorKind::kInput, "config key 'data' is required for fit");
  return c;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInput, "cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInput, "config " + path + " is not valid JSON: " + e.what());
  }
}

std::uint64_t config_hash(const json& resolved) {
  // FNV-1a over the canonical (sorted-key) dump
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : resolved.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

spatial::CorrelationKernel make_kernel(const RunConfig& cfg, double rho) {
  if (cfg.kernel == "matern") return spatial::CorrelationKernel::matern(cfg.nu, rho);
  if (cfg.kernel == "cs") return spatial::CorrelationKernel::compound_symmetry(rho);
  if (cfg.kernel == "blocked_cs") return spatial::CorrelationKernel::blocked_compound_symmetry(rho, cfg.blocks);
  return spatial::CorrelationKernel::exponential(rho);
}

// --- data --------------------------------------------------------------------

RawTable read_raw(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  for (const char* req : {"y", "s1", "s2"})
    if (t.column(req) < 0) fail(ErrorKind::kInput, path + ": missing required column '" + std::string(req) + "'");
  std::vector<int> xcols;
  RawTable raw;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].rfind("x_", 0) == 0) {
      xcols.push_back(static_cast<int>(j));
      raw.names.push_back(t.header[j]);
    }
  }
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  if (n < 2) fail(ErrorKind::kInput, path + ": need at least two data rows");
  raw.y.resize(n);
  raw.coords.resize(n, 2);
  raw.x.resize(n, static_cast<Eigen::Index>(xcols.size()));
  auto num = [&](Eigen::Index i, int col) {
    double v = 0.0;
    const std::string& cell = t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(col)];
    if (!csv::parse_double(cell, v)) {
      std::ostringstream os;
      os << path << ": data row " << i + 1 << " (line " << i + 2 << "), column '" << t.header[static_cast<std::size_t>(col)]
         << "': '" << cell << "' is not a finite number";
      fail(ErrorKind::kInput, os.str());
    }
    return v;
  };
  const int cy = t.column("y"), c1 = t.column("s1"), c2 = t.column("s2"), cg = t.column("group");
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.y[i] = num(i, cy);
    raw.coords(i, 0) = num(i, c1);
    raw.coords(i, 1) = num(i, c2);
    for (std::size_t k = 0; k < xcols.size(); ++k) raw.x(i, static_cast<Eigen::Index>(k)) = num(i, xcols[k]);
    if (cg >= 0) raw.group_labels.push_back(t.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(cg)]);
  }
  return raw;
}

void write_raw(const std::string& path, const RawTable& raw) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kInput, "cannot write " + path);
  csv::Writer w(out);
  w.field("y").field("s1").field("s2");
  for (const auto& nm : raw.names) w.field(nm);
  if (!raw.group_labels.empty()) w.field("group");
  w.end_row();
  for (Eigen::Index i = 0; i < raw.y.size(); ++i) {
    w.field(raw.y[i]).field(raw.coords(i, 0)).field(raw.coords(i, 1));
    for (Eigen::Index j = 0; j < raw.x.cols(); ++j) w.field(raw.x(i, j));
    if (!raw.group_labels.empty()) w.field(raw.group_labels[static_cast<std::size_t>(i)]);
    w.end_row();
  }
}

Prepared prepare(const RawTable& raw, const spatial::CorrelationKernel& kernel) {
  Prepared p;
  const Eigen::Index n = raw.y.size();
  mcmc::ModelData& d = p.data;
  d.y = raw.y;
  d.kernel = kernel;
  for (const auto& nm : raw.names) d.covariate_names.push_back(nm.rfind("x_", 0) == 0 ? nm.substr(2) : nm);

  Eigen::MatrixX2d coords = raw.coords;
  const bool inside = (coords.array() >= 0.0).all() && (coords.array() <= 1.0).all();
  if (!inside) {
    const Eigen::RowVector2d lo = coords.colwise().minCoeff();
    const Eigen::RowVector2d hi = coords.colwise().maxCoeff();
    const double side = (hi - lo).maxCoeff();
    if (!(side > 0.0)) fail(ErrorKind::kInput, "all locations coincide");
    coords = (coords.rowwise() - lo) / side;
    p.rescaled = true;
    p.shift = lo.transpose();
    p.scale = side;
  }
  d.locations.coords = coords;

  d.x = raw.x;
  Eigen::Index bad_col = -1;
  if (!standardize_columns(d.x, p.standardization, bad_col))
    fail(ErrorKind::kInput, "cannot standardize zero-variance column " + raw.names[static_cast<std::size_t>(bad_col)]);

  if (!raw.group_labels.empty()) {
    std::map<std::string, int> index;
    d.groups.level.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::string& g = raw.group_labels[static_cast<std::size_t>(i)];
      auto it = index.find(g);
      if (it == index.end()) {
        it = index.emplace(g, static_cast<int>(p.levels.size())).first;
        p.levels.push_back(g);
      }
      d.groups.level[static_cast<std::size_t>(i)] = it->second;
    }
    d.groups.levels = static_cast<int>(p.levels.size());
  }
  d.validate();
  return p;
}

// --- fit -----------------------------------------------------------------------

std::string prior_label(const mcmc::HyperParams& h) {
  switch (h.family) {
    case mcmc::PriorFamily::kVague:
      return "Vague";
    case mcmc::PriorFamily::kPC:
      return "PC";
    default: {
      std::ostringstream os;
      os << "R2D2(" << h.r2.a << "," << h.r2.b << ")";
      return os.str();
    }
  }
}

FitOutput fit(const RunConfig& cfg, const Prepared& prepared) {
  const mcmc::ModelContext ctx(prepared.data, cfg.hyper, cfg.likelihood);
  const auto t0 = std::chrono::steady_clock::now();
  FitOutput out;
  out.samples = mcmc::run_chains(ctx, cfg.mcmc);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.summary = inference::summarize(out.samples);

  json& m = out.meta;
  m["config"] = cfg.doc;
  m["config_hash"] = hex64(config_hash(cfg.doc));
  m["seed"] = cfg.mcmc.seed;
  m["prior"] = prior_label(cfg.hyper);
  m["n"] = ctx.n();
  m["p"] = ctx.p();
  m["levels"] = ctx.levels();
  m["retained_draws"] = out.samples.draws.rows();
  m["wall_time_seconds"] = wall;
  json chains = json::array();
  for (std::size_t c = 0; c < out.samples.final_tuning.size(); ++c) {
    const auto& t = out.samples.final_tuning[c];
    chains.push_back({{"chain", c},
                      {"phi_acceptance", out.samples.phi_acceptance[c]},
                      {"rho_acceptance", out.samples.rho_acceptance[c]},
                      {"sigma_theta_acceptance", out.samples.sigma_theta_acceptance[c]},
                      {"final_c1", t.c1},
                      {"final_c2", t.c2},
                      {"final_c3", t.c3}});
  }
  m["chains"] = chains;
  const Standardization& st = prepared.standardization;
  m["standardization"] = {{"rule", "center to mean 0, scale to sum of squares n"},
                          {"columns", prepared.data.covariate_names},
                          {"center", std::vector<double>(st.center.data(), st.center.data() + st.center.size())},
                          {"scale", std::vector<double>(st.scale.data(), st.scale.data() + st.scale.size())}};
  m["coordinates"] = {{"rule", "identity inside the unit square, else shift by the minimum and divide by the longer side"},
                      {"rescaled", prepared.rescaled},
                      {"shift", {prepared.shift[0], prepared.shift[1]}},
                      {"scale", prepared.scale}};
  m["group_levels"] = prepared.levels;
  return out;
}

namespace {

std::string cell(const inference::SummaryRow* r) {
  if (!r) return "-";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f, %.2f)", r->median, r->ci_low, r->ci_high);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); }

std::string first_beta(const FitOutput& f) {
  for (const auto& r : f.summary)
    if (r.name.rfind("beta_", 0) == 0) return r.name;
  return "";
}

}  // namespace

std::string report_header(int phi_components) {
  std::string h = pad("prior", 14);
  for (const char* c : {"R2_n", "beta_1", "W", "sigma2_theta", "rho"}) h += pad(c, 24);
  for (int k = 1; k <= phi_components; ++k) h += pad("phi_" + std::to_string(k), 24);
  return h;
}

std::string report_row(const std::string& label, const FitOutput& f, int phi_components) {
  using inference::find_row;
  std::string row = pad(label, 14);
  row += pad(cell(find_row(f.summary, "R2")), 24);
  row += pad(cell(find_row(f.summary, first_beta(f))), 24);
  row += pad(cell(find_row(f.summary, "W")), 24);
  row += pad(cell(find_row(f.summary, "sigma_theta_sq")), 24);
  row += pad(cell(find_row(f.summary, "rho")), 24);
  for (int k = 1; k <= phi_components; ++k) row += pad(cell(find_row(f.summary, "phi_" + std::to_string(k))), 24);
  return row;
}

std::string report(const std::string& label, const FitOutput& f) {
  int k = 0;
  while (inference::find_row(f.summary, "phi_" + std::to_string(k + 1))) ++k;
  std::ostringstream os;
  os << "Posterior median and 95% credible interval\n";
  os << report_header(k) << "\n" << report_row(label, f, k) << "\n\n";
  const std::string b = first_beta(f);
  if (!b.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "P(%s > 0 | y) = %.3f\n", b.c_str(),
                  inference::prob_positive(f.samples.values(b)));
    os << buf;
  }
  const double cor = inference::pearson(f.samples.values("sigma_theta_sq"), f.samples.values("rho"));
  char buf[128];
  std::snprintf(buf, sizeof buf, "cor(sigma2_theta, rho) = %.3f\n", cor);
  os << buf;
  return os.str();
}

void write_fit(const FitOutput& f, const std::string& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "samples.csv", std::ios::binary);
    csv::Writer w(out);
    w.field("chain").field("iteration");
    for (const auto& n : f.samples.names) w.field(n);
    w.end_row();
    for (Eigen::Index r = 0; r < f.samples.draws.rows(); ++r) {
      w.field(f.samples.chain[static_cast<std::size_t>(r)]).field(f.samples.iteration[static_cast<std::size_t>(r)]);
      for (Eigen::Index c = 0; c < f.samples.draws.cols(); ++c) w.field(f.samples.draws(r, c));
      w.end_row();
    }
  }
  {
    std::ofstream out(fs::path(dir) / "summary.csv", std::ios::binary);
    csv::Writer w(out);
    for (const char* h : {"parameter", "median", "ci_low", "ci_high", "ess", "mean", "sd"}) w.field(h);
    w.end_row();
    for (const auto& r : f.summary) {
      w.field(r.name).field(r.median).field(r.ci_low).field(r.ci_high).field(r.ess).field(r.mean).field(r.sd);
      w.end_row();
    }
  }
  {
    std::ofstream out(fs::path(dir) / "meta.json");
    out << f.meta.dump(2) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "report.txt");
    out << report(f.meta.value("prior", std::string("fit")), f);
  }
}

FitOutput cmd_fit(const RunConfig& cfg) {
  const RawTable raw = read_raw(cfg.data);
  const double rho0 = cfg.rho.value_or(0.5);
  const Prepared prepared = prepare(raw, make_kernel(cfg, rho0));
  FitOutput out = fit(cfg, prepared);
  if (!cfg.out.empty()) write_fit(out, cfg.out);
  return out;
}

// --- prior check ---------------------------------------------------------------

PriorCheckOutput cmd_prior_check(const RunConfig& cfg) {
  const double rho = cfg.rho.value_or(0.5);
  const spatial::CorrelationKernel kernel = make_kernel(cfg, rho);
  prior::PredictiveDesign design;
  design.kernel = kernel;
  design.equal_fixed = cfg.hyper.equal_fixed;
  RandomStream root(cfg.mcmc.seed);
  spatial::Locations locs;
  if (!cfg.data.empty()) {
    const Prepared p = prepare(read_raw(cfg.data), kernel);
    design.x = p.data.x;
    design.groups = p.data.groups;
    locs = p.data.locations;
  } else {
    RandomStream rs = root.split(1);
    const int n = cfg.design_n;
    locs.coords.resize(n, 2);
    for (int i = 0; i < n; ++i) {
      locs.coords(i, 0) = rs.uniform();
      locs.coords(i, 1) = rs.uniform();
    }
    design.x.resize(n, cfg.design_p);
    for (int j = 0; j < cfg.design_p; ++j)
      for (int i = 0; i < n; ++i) design.x(i, j) = rs.normal();
    Standardization st;
    Eigen::Index bad_col = -1;
    if (!standardize_columns(design.x, st, bad_col)) fail(ErrorKind::kInput, "simulated design is degenerate");
  }
  design.distances = spatial::distance_matrix(locs);

  prior::PredictiveOptions opts;
  opts.fixed_phi = cfg.phi;
  opts.xi = cfg.hyper.xi;
  opts.fixed_rho = true;
  opts.n_draws = cfg.n_draws;

  std::ostringstream kernel_desc;
  kernel_desc << "kernel " << cfg.kernel << " (rho = " << rho;
  if (cfg.kernel == "matern") kernel_desc << ", nu = " << cfg.nu;
  if (cfg.kernel == "blocked_cs") kernel_desc << ", blocks = " << cfg.blocks;
  kernel_desc << ")";

  PriorCheckOutput out;
  json info;
  RandomStream rs = root.split(2);
  try {
    if (opts.fixed_phi) {
      prior::ShareLayout layout{static_cast<int>(design.x.cols()), !design.groups.empty(), design.equal_fixed};
      const prior::MomentMatcher matcher(design.x, design.groups, layout);
      const Eigen::MatrixXd sigma = spatial::correlation_from_distances(kernel, design.distances);
      const prior::PriorShapeScale ss = matcher.match({layout, *opts.fixed_phi}, matcher.spatial_terms(sigma));
      info["mu_S"] = ss.mu_S;
      info["sigma2_S"] = ss.sigma2_S;
      info["alpha"] = ss.alpha;
      info["beta"] = ss.beta;
    }
    const prior::PredictiveDraws d = prior::prior_r2_simulate(rs, cfg.hyper.r2, design, opts);
    out.r2 = d.r2;
    out.w = d.w;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegeneratePrior) fail(ErrorKind::kDegeneratePrior, kernel_desc.str() + ": " + e.what());
    throw;
  }

  const double a = cfg.hyper.r2.a, b = cfg.hyper.r2.b;
  const boost::math::beta_distribution<double> target(a, b);
  double sum = 0.0;
  for (double v : out.r2) sum += v;
  out.mean_r2 = sum / static_cast<double>(out.r2.size());
  out.target_mean = a / (a + b);
  out.mean_gap = std::abs(out.mean_r2 - out.target_mean);
  out.ks = inference::ks_distance(out.r2, [&](double x) { return boost::math::cdf(target, std::clamp(x, 0.0, 1.0)); });

  info["a"] = a;
  info["b"] = b;
  info["n"] = design.distances.rows();
  info["p"] = design.x.cols();
  info["kernel"] = kernel_desc.str();
  info["n_draws"] = out.r2.size();
  info["mean_r2"] = out.mean_r2;
  info["target_mean"] = out.target_mean;
  info["mean_gap"] = out.mean_gap;
  info["ks_distance"] = out.ks;
  info["config"] = cfg.doc;
  info["config_hash"] = hex64(config_hash(cfg.doc));
  out.info = info;

  if (!cfg.out.empty()) {
    fs::create_directories(cfg.out);
    {
      std::ofstream f(fs::path(cfg.out) / "prior_draws.csv", std::ios::binary);
      csv::Writer w(f);
      w.field("draw").field("r2").field("w");
      w.end_row();
      for (std::size_t i = 0; i < out.r2.size(); ++i) {
        w.field(static_cast<long>(i + 1)).field(out.r2[i]).field(out.w[i]);
        w.end_row();
      }
    }
    const int bins = cfg.hist_bins;
    const double total = static_cast<double>(out.r2.size());
    {
      std::vector<long> counts(static_cast<std::size_t>(bins), 0);
      for (double v : out.r2) ++counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(v * bins)))];
      std::ofstream f(fs::path(cfg.out) / "prior_r2_hist.csv", std::ios::binary);
      csv::Writer w(f);
      for (const char* h : {"bin_low", "bin_high", "count", "density", "beta_density"}) w.field(h);
      w.end_row();
      for (int k = 0; k < bins; ++k) {
        const double lo = static_cast<double>(k) / bins, hi = static_cast<double>(k + 1) / bins;
        w.field(lo).field(hi).field(counts[static_cast<std::size_t>(k)]);
        w.field(counts[static_cast<std::size_t>(k)] / (total * (hi - lo)));
        w.field(boost::math::pdf(target, 0.5 * (lo + hi)));
        w.end_row();
      }
    }
    {
      const double top = inference::quantile(out.w, 0.99);
      std::vector<long> counts(static_cast<std::size_t>(bins), 0);
      const double width = top > 0.0 ? top / bins : 1.0;
      for (double v : out.w)
        if (v <= top) ++counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(v / width)))];
      std::ofstream f(fs::path(cfg.out) / "prior_w_hist.csv", std::ios::binary);
      csv::Writer w(f);
      for (const char* h : {"bin_low", "bin_high", "count", "density"}) w.field(h);
      w.end_row();
      for (int k = 0; k < bins; ++k) {
        w.field(k * width).field((k + 1) * width).field(counts[static_cast<std::size_t>(k)]);
        w.field(counts[static_cast<std::size_t>(k)] / (total * width));
        w.end_row();
      }
    }
    std::ofstream f(fs::path(cfg.out) / "prior_check.json");
    f << info.dump(2) << "\n";
  }
  return out;
}

}  // namespace r2d2::harness
