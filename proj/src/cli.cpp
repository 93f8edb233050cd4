#include "sicm/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "sicm/construct.hpp"
#include "sicm/rate.hpp"
#include "sicm/simulate.hpp"
#include "sicm/timescale.hpp"

namespace sicm::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// reads keys of one object and rejects the ones nobody asked for
class Params {
 public:
  Params(json j, std::string where) : j_(std::move(j)), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key);
  }
  template <typename T>
  T get(const std::string& key, T fallback) {
    return has(key) ? as<T>(key) : fallback;
  }
  template <typename T>
  T need(const std::string& key) {
    if (!has(key)) throw ValidationError(where_ + ": missing parameter '" + key + "'");
    return as<T>(key);
  }
  const json& raw(const std::string& key) {
    if (!has(key)) throw ValidationError(where_ + ": missing parameter '" + key + "'");
    return j_.at(key);
  }
  ProbVec vec(const std::string& key) { return vector_from_json(raw(key), key.c_str()); }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ValidationError(where_ + ": unknown parameter '" + it.key() + "'");
  }

 private:
  template <typename T>
  T as(const std::string& key) {
    const json& v = j_.at(key);
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!v.is_number_integer()) throw ValidationError(where_ + ": parameter '" + key + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)
          throw ValidationError(where_ + ": parameter '" + key + "' must be nonnegative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ValidationError(where_ + ": parameter '" + key + "' must be a number");
    }
    try {
      return v.get<T>();
    } catch (const json::exception&) {
      throw ValidationError(where_ + ": parameter '" + key + "' has the wrong type");
    }
  }

  json j_;
  std::string where_;
  std::set<std::string> used_;
};

// JSON has no infinity
json num(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void positive(std::int64_t v, const char* name) {
  if (v < 1) throw ValidationError(std::string(name) + " >= 1");
}

void in_range(double v, double lo, double hi, const char* name) {
  if (!(v > lo && v < hi)) throw ValidationError(std::string(name) + " in (" + g17(lo) + ", " + g17(hi) + ")");
}

void on_simplex_of(const ProbVec& m, int d, const char* name) {
  if (m.size() != d || !on_simplex(m)) throw ValidationError(std::string(name) + " must be a point of the simplex");
}

struct Output {
  json result = json::object();
  std::map<std::string, std::string> sidecars;  // file suffix -> contents
};

std::string path_csv(const std::vector<std::int64_t>& steps, const std::vector<double>& t,
                     const std::vector<ProbVec>& values) {
  std::string s = "step,t";
  const auto d = values.empty() ? 0 : values[0].size();
  for (Eigen::Index z = 0; z < d; ++z) s += ",m" + std::to_string(z);
  s += '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += std::to_string(steps[i]) + "," + g17(t[i]);
    for (Eigen::Index z = 0; z < d; ++z) s += "," + g17(values[i](z));
    s += '\n';
  }
  return s;
}

Output cmd_simulate(const ModelSpec& model, Params& p) {
  const int x0 = p.get<int>("x0", 0);
  const auto n = p.need<std::int64_t>("n");
  const auto seed = p.get<std::uint64_t>("seed", 0);
  const auto thinning = p.get<std::int64_t>("thinning", 0);
  p.finish();
  positive(n, "n");
  auto run = run_chain(model, x0, n, seed, thinning);
  Output o;
  o.result = {{"n", n},
              {"seed", seed},
              {"x0", x0},
              {"final_empirical", matrix_to_json(run.final_empirical)},
              {"pair_empirical", matrix_to_json(pair_empirical(run))}};
  TimeGrid grid(n);
  std::vector<double> t;
  for (auto k : run.path_steps) t.push_back(grid.t_of(k));
  o.sidecars["path.csv"] = path_csv(run.path_steps, t, run.empirical_path);
  return o;
}

Output cmd_fixed_point(const ModelSpec& model, Params& p) {
  const double alpha = p.get<double>("alpha", 1.0), tol = p.get<double>("tol", 1e-12);
  const int max_iter = p.get<int>("max_iter", 100000);
  p.finish();
  auto fp = fixed_point(model, alpha, tol, max_iter);
  Output o;
  o.result = {{"pi", matrix_to_json(fp.pi)},
              {"residual", num(fp.residual)},
              {"iterations", fp.iterations},
              {"positive", fp.positive}};
  std::string csv = "iteration,residual\n";
  for (std::size_t i = 0; i < fp.residuals.size(); ++i) csv += std::to_string(i) + "," + g17(fp.residuals[i]) + "\n";
  o.sidecars["residuals.csv"] = csv;
  return o;
}

Output cmd_dv_rate(const ModelSpec& model, Params& p) {
  ProbVec m = p.vec("m");
  p.finish();
  on_simplex_of(m, model.d, "m");
  auto dv = dv_solve(m, model, &model.adjacency);
  Output o;
  o.result = {{"value", num(dv.value)}, {"kernel", matrix_to_json(dv.kernel)}};
  o.result["gamma"] = std::isfinite(dv.value) ? matrix_to_json(dv.ipf.gamma) : json(nullptr);
  return o;
}

Output cmd_rate(const ModelSpec& model, Params& p) {
  ProbVec m = p.vec("m");
  const double T = p.get<double>("T", 8.0);
  const int N = p.get<int>("N", 80);
  RateOptions opts;
  opts.floor = p.get<double>("floor", opts.floor);
  opts.penalty = p.get<double>("penalty", opts.penalty);
  opts.max_iter = p.get<int>("max_iter", opts.max_iter);
  opts.grad_tol = p.get<double>("grad_tol", opts.grad_tol);
  p.finish();
  on_simplex_of(m, model.d, "m");
  auto cert = rate_upper(m, model, model.adjacency, T, N, opts);
  Output o;
  o.result = {{"value", num(cert.value)},
              {"head_cost", num(cert.head_cost)},
              {"terminal_dv", num(cert.terminal_dv)},
              {"tail_bound", num(cert.tail_bound)},
              {"tail_report", num(terminal_tail_report(T, opts.floor))},
              {"dv_rate", num(dv_rate(m, model, &model.adjacency))},
              {"T", T},
              {"N", N},
              {"iterations", cert.iterations},
              {"grad_norm", num(cert.grad_norm)},
              {"stalled", cert.stalled},
              {"feasible", cert.feasible},
              {"source", cert.source}};
  if (!cert.trajectory.M.empty()) {
    std::vector<std::int64_t> steps;
    std::vector<double> t;
    for (int j = 0; j <= N; ++j) {
      steps.push_back(j);
      t.push_back(j * T / N);
    }
    o.sidecars["trajectory.csv"] = path_csv(steps, t, cert.trajectory.M);
    std::string csv = "step,x,y,kernel,eta\n";
    for (int j = 0; j < cert.path.N; ++j) {
      PairMeasure eta = cert.path.pair_control(j);
      for (int x = 0; x < model.d; ++x)
        for (int y = 0; y < model.d; ++y)
          csv += std::to_string(j) + "," + std::to_string(x) + "," + std::to_string(y) + "," +
                 g17(cert.path.kernels[j](x, y)) + "," + g17(eta(x, y)) + "\n";
    }
    o.sidecars["kernels.csv"] = csv;
  }
  return o;
}

Output cmd_feasible(const std::optional<ModelSpec>& model, Params& p) {
  ProbVec m = p.vec("m");
  std::optional<AdjacencySpec> a;
  if (p.has("adjacency")) a = AdjacencySpec::from_matrix(nested_matrix(p.raw("adjacency"), "adjacency").cast<int>());
  p.finish();
  if (!a) {
    if (!model) throw ValidationError("feasible: needs a model or an adjacency parameter");
    a = model->adjacency;
  }
  on_simplex_of(m, a->dim(), "m");
  auto f = pstar_feasible(m, *a);
  Output o;
  o.result = {{"feasible", f.feasible}, {"flow", num(f.flow)}};
  o.result["witness"] = f.feasible ? matrix_to_json(f.witness) : json(nullptr);
  return o;
}

Output cmd_construct(const ModelSpec& model, Params& p) {
  ProbVec m = p.vec("m");
  const double T = p.get<double>("T", 2.0);
  int N = p.get<int>("N", 20);
  std::vector<Eigen::MatrixXd> kernels;
  if (p.has("kernels")) {
    const json& ks = p.raw("kernels");
    if (!ks.is_array() || ks.empty()) throw ValidationError("kernels: expected a nonempty array of matrices");
    for (const auto& k : ks) kernels.push_back(nested_matrix(k, "kernels"));
    N = static_cast<int>(kernels.size());
  }
  const double mix = p.get<double>("mix", 0.0);
  RateOptions opts;
  opts.floor = p.get<double>("floor", opts.floor);
  ScheduleConfig cfg;
  cfg.eps0 = p.get<double>("eps0", cfg.eps0);
  cfg.eps1 = p.get<double>("eps1", cfg.eps1);
  cfg.r1 = p.get<int>("r1", cfg.r1);
  cfg.a_star = p.get<double>("a_star", cfg.a_star);
  cfg.block_steps = p.get<int>("block_steps", cfg.block_steps);
  if (p.has("k0")) cfg.k0 = p.need<std::int64_t>("k0");
  if (p.has("k1")) cfg.k1 = p.need<std::int64_t>("k1");
  if (p.has("k_star")) cfg.k_star = p.need<std::int64_t>("k_star");
  cfg.calib_reps = p.get<int>("calib_reps", cfg.calib_reps);
  cfg.calib_horizon = p.get<std::int64_t>("calib_horizon", cfg.calib_horizon);
  cfg.calib_seed = p.get<std::uint64_t>("calib_seed", cfg.calib_seed);
  const std::string start = p.get<std::string>("block_start", "stationary");
  const int runs = p.get<int>("runs", 0);
  std::optional<std::int64_t> n;
  if (p.has("n")) n = p.need<std::int64_t>("n");
  const auto seed = p.get<std::uint64_t>("seed", 1);
  const int x0 = p.get<int>("x0", 0);
  p.finish();

  on_simplex_of(m, model.d, "m");
  if (!(T > 0)) throw ValidationError("T > 0");
  positive(N, "N");
  if (mix < 0 || mix > 1) throw ValidationError("mix in [0,1]");
  in_range(cfg.eps0, 0, 1, "eps0");
  in_range(cfg.eps1, 0, 1, "eps1");
  if (start != "stationary" && start != "continue") throw ValidationError("block_start in {stationary, continue}");
  if (cfg.calib_reps < 1 || cfg.calib_horizon < 2) throw ValidationError("calib_reps >= 1 and calib_horizon >= 2");
  if (runs < 0) throw ValidationError("runs >= 0");
  cfg.block_start = start == "stationary" ? BlockStart::stationary : BlockStart::continue_kernel;

  ControlPath path;
  std::string source = "kernels";
  if (!kernels.empty()) {
    for (const auto& k : kernels)
      if (k.rows() != model.d || k.cols() != model.d) throw ValidationError("kernels: each must be d x d");
    path = path_from_kernels(T, kernels);
  } else {
    auto cert = rate_upper(m, model, model.adjacency, T, N, opts);
    if (!cert.feasible) throw InfeasibleError("construct: no feasible control path from m");
    path = cert.path;
    source = "rate:" + cert.source;
  }
  ProbVec pi = fixed_point(model).pi;
  if (mix > 0) path = mix_with_fixed_point(path, pi, model, mix);
  auto s = build_schedule(path, m, model, pi, cfg);

  Output o;
  o.result["schedule"] = schedule_to_json(s);
  o.result["path_source"] = source;
  o.result["path_cost"] = num(discretized_cost(path, propagate(m, path), model));
  o.sidecars["betas.csv"] = betas_csv(s);
  if (runs > 0) {
    const std::int64_t steps = n ? *n : std::max<std::int64_t>(s.minimum_n, 100000);
    std::string csv = "seed,realized_cost,l1_to_target,N1,aborted\n";
    double mean_cost = 0, mean_gap = 0;
    int close = 0;
    for (int r = 0; r < runs; ++r) {
      auto run = run_controlled(model, s, x0, steps, seed + static_cast<std::uint64_t>(r));
      double gap = l1((run.final_empirical - s.target).eval());
      bool aborted = std::find(run.J.begin(), run.J.end(), 1) != run.J.end();
      mean_cost += run.realized_cost / runs;
      mean_gap += gap / runs;
      if (gap <= s.constants.d3 * s.eps0) ++close;
      csv += std::to_string(seed + r) + "," + g17(run.realized_cost) + "," + g17(gap) + "," +
             std::to_string(run.N1) + "," + (aborted ? "1" : "0") + "\n";
    }
    o.result["runs"] = {{"count", runs},
                        {"n", steps},
                        {"mean_realized_cost", num(mean_cost)},
                        {"mean_l1_to_target", num(mean_gap)},
                        {"within_d3_eps0", close}};
    o.sidecars["runs.csv"] = csv;
  }
  return o;
}

Output cmd_mc_prob(const ModelSpec& model, Params& p) {
  ProbVec target = p.vec("target");
  const double radius = p.need<double>("radius");
  const auto n = p.need<std::int64_t>("n");
  const auto reps = p.need<std::int64_t>("reps");
  const auto seed = p.get<std::uint64_t>("seed", 0);
  const int x0 = p.get<int>("x0", 0);
  const int threads = p.get<int>("threads", 0);
  p.finish();
  on_simplex_of(target, model.d, "target");
  positive(n, "n");
  positive(reps, "reps");
  auto h = mc_hit_probability(model, target, radius, n, reps, seed, x0, threads);
  Output o;
  o.result = {{"hits", h.hits},       {"reps", h.reps},       {"p_hat", num(h.p_hat)},
              {"ci_lo", num(h.ci_lo)}, {"ci_hi", num(h.ci_hi)}, {"n", n}};
  o.result["slope"] = h.slope ? num(*h.slope) : json(nullptr);
  return o;
}

Output cmd_check(const ModelSpec& model, Params& p) {
  const auto seed = p.get<std::uint64_t>("seed", 1);
  p.finish();
  auto r = check_assumptions(model, seed);
  Output o;
  o.result = {{"lipschitz", num(r.lipschitz)},
              {"delta0A_vertex", num(r.delta0A_vertex)},
              {"delta0A_vertex_holds", r.delta0A_vertex_holds},
              {"delta0A_max", num(r.delta0A_max)},
              {"delta0A_max_holds", r.delta0A_max_holds},
              {"delta0A_random_ok", r.delta0A_random_ok},
              {"product_attempted", r.product_attempted},
              {"product_positive", r.product_positive},
              {"product_min_k", r.product_min_k},
              {"irreducible", r.irreducible}};
  return o;
}

Output cmd_timescale(Params& p) {
  const auto n = p.need<std::int64_t>("n");
  const double t = p.get<double>("t", 5.0);
  p.finish();
  if (n < 2) throw ValidationError("n >= 2");
  TimeGrid grid(n);
  Output o;
  auto bad = harmonic_bracket_violation(n);
  o.result = {{"n", n}, {"t", t}, {"t_n", num(grid.t_n())}, {"psi_limit_gap", num(psi_limit_gap(grid, t))}};
  o.result["bracket_violation"] = bad ? json(*bad) : json(nullptr);
  return o;
}

const std::map<std::string, std::vector<std::string>>& required_keys() {
  static const std::map<std::string, std::vector<std::string>> k{
      {"simulate", {"n", "seed", "x0", "final_empirical", "pair_empirical"}},
      {"fixed-point", {"pi", "residual", "iterations", "positive"}},
      {"dv-rate", {"value", "kernel", "gamma"}},
      {"rate", {"value", "head_cost", "terminal_dv", "tail_bound", "T", "N", "source", "feasible"}},
      {"feasible", {"feasible", "flow", "witness"}},
      {"construct", {"schedule", "path_source", "path_cost"}},
      {"mc-prob", {"hits", "reps", "p_hat", "ci_lo", "ci_hi", "slope"}},
      {"check-assumptions", {"lipschitz", "delta0A_vertex", "delta0A_max", "product_min_k", "irreducible"}},
      {"timescale", {"n", "t", "t_n", "psi_limit_gap", "bracket_violation"}},
  };
  return k;
}

void write_atomic(const fs::path& target, const std::string& text) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << text;
    if (!f) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, target);
}

json read_config(const std::string& file) {
  std::ifstream f(file);
  if (!f) throw ValidationError("config: cannot open " + file);
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"simulate", "fixed-point",   "dv-rate",           "rate",     "feasible",
                                          "construct", "mc-prob", "check-assumptions", "timescale"};
  return c;
}

void check_result(const json& doc) {
  if (!doc.is_object() || !doc.contains("command") || !doc["command"].is_string())
    throw ValidationError("result: missing command");
  const auto& keys = required_keys();
  auto it = keys.find(doc["command"].get<std::string>());
  if (it == keys.end()) throw ValidationError("result: unknown command");
  for (const char* k : {"params", "result", "files"})
    if (!doc.contains(k)) throw ValidationError(std::string("result: missing '") + k + "'");
  if (!doc["result"].is_object()) throw ValidationError("result: result must be an object");
  for (const auto& k : it->second)
    if (!doc["result"].contains(k)) throw ValidationError("result: missing result key '" + k + "'");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Toolkit for self-interacting Markov chains"};
  app.require_subcommand(1);
  std::string config, out_dir;
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  double T = 0;
  int N = 0;
  struct Flags {
    CLI::Option *seed, *out, *n, *T, *N;
  };
  std::map<std::string, Flags> flags;
  for (const auto& name : commands()) {
    auto* sc = app.add_subcommand(name);
    sc->add_option("-c,--config", config, "JSON config file")->required();
    flags[name] = {sc->add_option("--seed", seed, "override params.seed"),
                   sc->add_option("--out", out_dir, "output directory"),
                   sc->add_option("--n", n, "override params.n"),
                   sc->add_option("--T", T, "override params.T"),
                   sc->add_option("--N", N, "override params.N")};
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  const Flags& f = flags.at(cmd);

  try {
    Params top(read_config(config), "config");
    json params = top.get<json>("params", json::object());
    if (top.has("command") && top.need<std::string>("command") != cmd)
      throw ValidationError("config: command '" + top.need<std::string>("command") + "' does not match '" + cmd + "'");
    std::optional<ModelSpec> model;
    if (top.has("model")) model = model_from_json(top.raw("model"));
    std::string dir = top.get<std::string>("out", "");
    top.finish();

    if (!params.is_object()) throw ValidationError("config: params must be an object");
    if (f.seed->count()) params["seed"] = seed;
    if (f.n->count()) params["n"] = n;
    if (f.T->count()) params["T"] = T;
    if (f.N->count()) params["N"] = N;
    if (f.out->count()) dir = out_dir;
    if (dir.empty()) {
      const char* env = std::getenv("SICM_OUT_DIR");
      dir = env ? env : ".";
    }

    Params p(params, cmd);
    auto need_model = [&]() -> const ModelSpec& {
      if (!model) throw ValidationError(cmd + ": config needs a model section");
      return *model;
    };
    Output o;
    if (cmd == "simulate") o = cmd_simulate(need_model(), p);
    else if (cmd == "fixed-point") o = cmd_fixed_point(need_model(), p);
    else if (cmd == "dv-rate") o = cmd_dv_rate(need_model(), p);
    else if (cmd == "rate") o = cmd_rate(need_model(), p);
    else if (cmd == "feasible") o = cmd_feasible(model, p);
    else if (cmd == "construct") o = cmd_construct(need_model(), p);
    else if (cmd == "mc-prob") o = cmd_mc_prob(need_model(), p);
    else if (cmd == "check-assumptions") o = cmd_check(need_model(), p);
    else o = cmd_timescale(p);

    json doc = {{"command", cmd}, {"params", params}, {"result", o.result}, {"files", json::array()}};
    fs::create_directories(dir);
    for (const auto& [suffix, text] : o.sidecars) {
      std::string name = cmd + "." + suffix;
      write_atomic(fs::path(dir) / name, text);
      doc["files"].push_back(name);
    }
    const std::string text = doc.dump(2) + "\n";
    write_atomic(fs::path(dir) / (cmd + ".json"), text);
    out << text;
    return kOk;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConvergenceError& e) {
    err << "convergence: " << e.what() << " (residual " << g17(e.residual) << ")\n";
    return kConvergence;
  } catch (const ValidationError& e) {
    err << "validation: " << e.what() << "\n";
    return kValidation;
  } catch (const json::exception& e) {
    err << "validation: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOther;
  }
}

}  // namespace sicm::cli
