#include "hysteresim/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hysteresim/errors.hpp"

namespace hysteresim {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& ctx,
                  std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError("unknown key '" + it.key() + "' in " + ctx);
  }
}

double num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ValidationError(std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

std::vector<double> num_array(const json& v, const std::string& ctx) {
  if (!v.is_array()) throw ValidationError(ctx + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) {
    if (!e.is_number()) throw ValidationError(ctx + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

Variant parse_variant(const std::string& name) {
  if (name == "representative") return Variant::representative;
  if (name == "sticky-bank") return Variant::sticky_bank;
  if (name == "multi-agent") return Variant::multi_agent;
  throw ValidationError("'model' must be representative, sticky-bank or multi-agent, got '" +
                        name + "'");
}

PiOperator parse_pi_operator(const json& obj, const std::string& ctx) {
  require_keys(obj, ctx, {"nu0", "agents", "nu", "rho", "beta"});
  PiOperator op;
  op.agents.clear();
  if (obj.contains("agents")) {
    if (!obj["agents"].is_array()) throw ValidationError(ctx + ".agents must be an array");
    for (const json& a : obj["agents"]) {
      require_keys(a, ctx + ".agents[]", {"nu", "rho", "beta"});
      PiAgent agent;
      agent.nu = num(a, "nu", 0.0);
      agent.rho = num(a, "rho", 0.0);
      agent.beta = num(a, "beta", 0.0);
      op.agents.push_back(agent);
    }
  } else {
    // parallel-array form: nu/rho/beta lists of equal length
    const std::vector<double> nus = obj.contains("nu") ? num_array(obj["nu"], ctx + ".nu")
                                                       : std::vector<double>{};
    const std::vector<double> rhos = obj.contains("rho") ? num_array(obj["rho"], ctx + ".rho")
                                                         : std::vector<double>{};
    std::vector<double> betas(nus.size(), 0.0);
    if (obj.contains("beta")) betas = num_array(obj["beta"], ctx + ".beta");
    if (nus.size() != rhos.size() || nus.size() != betas.size())
      throw ValidationError(ctx + ": nu, rho, beta must have equal lengths");
    for (std::size_t i = 0; i < nus.size(); ++i)
      op.agents.push_back(PiAgent{nus[i], rhos[i], betas[i]});
  }
  if (obj.contains("nu0")) {
    op.nu0 = num(obj, "nu0", 0.0);
  } else {
    double sum = 0.0;
    for (const PiAgent& a : op.agents) sum += a.nu;
    op.nu0 = 1.0 - sum;
  }
  try {
    op.validate();
  } catch (const InvalidPi& e) {
    throw ValidationError(ctx + ": " + e.what());
  }
  return op;
}

NoiseSpec parse_noise(const json& obj) {
  require_keys(obj, "noise",
               {"kind", "m", "m_eta", "m_eps", "m_xi", "seed", "eta", "eps", "xi", "path"});
  const bool scripted_input =
      obj.contains("path") || obj.contains("eta") || obj.contains("eps") || obj.contains("xi");
  NoiseSpec spec;
  const std::string kind = obj.value("kind", std::string("zero"));
  if (kind == "zero") spec.kind = NoiseKind::zero;
  else if (kind == "uniform") spec.kind = NoiseKind::uniform;
  else if (kind == "truncated-gaussian") spec.kind = NoiseKind::truncated_gaussian;
  else if (kind == "scripted") spec.kind = NoiseKind::scripted;
  else
    throw ValidationError("noise.kind must be zero, uniform, truncated-gaussian or scripted, got '" +
                          kind + "'");
  const double m = num(obj, "m", 0.0);
  spec.m_eta = num(obj, "m_eta", m);
  spec.m_eps = num(obj, "m_eps", m);
  spec.m_xi = num(obj, "m_xi", m);
  if (spec.m_eta < 0.0 || spec.m_eps < 0.0 || spec.m_xi < 0.0)
    throw ValidationError("noise bounds must be nonnegative");
  if (obj.contains("seed")) spec.seed = obj["seed"].get<std::uint64_t>();

  if (spec.kind == NoiseKind::scripted) {
    if (!scripted_input)
      throw ValidationError("scripted noise requires 'path' or inline eta/eps/xi tables");
    if (obj.contains("path")) {
      std::ifstream in(obj["path"].get<std::string>());
      if (!in) throw ValidationError("noise.path not readable: " + obj["path"].get<std::string>());
      std::string line;
      bool header = true;
      while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {  // expect eta,eps,xi
          header = false;
          continue;
        }
        std::istringstream row(line);
        std::string field;
        double vals[3] = {0, 0, 0};
        for (int c = 0; c < 3 && std::getline(row, field, ','); ++c) vals[c] = std::stod(field);
        spec.script_eta.push_back(vals[0]);
        spec.script_eps.push_back(vals[1]);
        spec.script_xi.push_back(vals[2]);
      }
    } else {
      if (obj.contains("eta")) spec.script_eta = num_array(obj["eta"], "noise.eta");
      if (obj.contains("eps")) spec.script_eps = num_array(obj["eps"], "noise.eps");
      if (obj.contains("xi")) spec.script_xi = num_array(obj["xi"], "noise.xi");
    }
    // declared bounds for scripted noise default to the observed sup
    auto tab_max = [](const std::vector<double>& v) {
      double m2 = 0.0;
      for (double e : v) m2 = std::max(m2, std::abs(e));
      return m2;
    };
    spec.m_eta = std::max(spec.m_eta, tab_max(spec.script_eta));
    spec.m_eps = std::max(spec.m_eps, tab_max(spec.script_eps));
    spec.m_xi = std::max(spec.m_xi, tab_max(spec.script_xi));
  }
  return spec;
}

SweepSpec parse_sweep(const json& obj, const RunConfig& cfg) {
  require_keys(obj, "sweep",
               {"axes", "horizon", "tol_distance", "tol_residual", "bounded_threshold"});
  SweepSpec spec;
  spec.base.params = cfg.params;
  spec.base.noise = cfg.noise;
  spec.base.x0 = cfg.x0;
  spec.base.y0 = cfg.y0;
  spec.base.p0 = cfg.p0;
  spec.base.r0 = cfg.r0;
  spec.base.horizon = obj.contains("horizon") ? obj["horizon"].get<std::int64_t>() : cfg.horizon;
  spec.tol_distance = num(obj, "tol_distance", cfg.tol_distance);
  spec.tol_residual = num(obj, "tol_residual", cfg.tol_residual);
  spec.bounded_threshold = num(obj, "bounded_threshold", 1e6);
  if (obj.contains("axes")) {
    if (!obj["axes"].is_array()) throw ValidationError("sweep.axes must be an array");
    for (const json& a : obj["axes"]) {
      require_keys(a, "sweep.axes[]", {"param", "values"});
      SweepAxis axis;
      if (!a.contains("param") || !a["param"].is_string())
        throw ValidationError("sweep axis needs a string 'param'");
      axis.param = a["param"].get<std::string>();
      axis.values = num_array(a.contains("values") ? a["values"] : json::array(), "sweep values");
      spec.axes.push_back(std::move(axis));
    }
  }
  return spec;
}

}  // namespace

SystemState RunConfig::initial_state() const {
  return make_initial_state(params, x0, y0, p0, r0, noise.sample(0));
}

namespace {

RunConfig parse_config_impl(const json& doc, const std::string& text);

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(source_name + ": " + e.what());
  }
  if (!doc.is_object()) throw ParseError(source_name + ": top-level JSON object expected");
  try {
    return parse_config_impl(doc, text);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    // wrong JSON value types, unparsable numerics and friends
    throw ValidationError(source_name + ": " + e.what());
  }
}

namespace {

RunConfig parse_config_impl(const json& doc, const std::string& text) {
  require_keys(doc, "config",
               {"model", "params", "rho", "sigma", "agents", "init", "horizon", "seed", "noise",
                "lyapunov", "convergence", "bounds", "pi", "minvar", "sweep", "output"});

  RunConfig cfg;
  cfg.config_hash = hex64(fnv1a64(text));
  cfg.params.variant = parse_variant(doc.value("model", std::string("representative")));

  if (doc.contains("params")) {
    const json& p = doc["params"];
    require_keys(p, "params", {"a1", "a2", "b1", "b2", "c1", "c2"});
    cfg.params.a1 = num(p, "a1", cfg.params.a1);
    cfg.params.a2 = num(p, "a2", cfg.params.a2);
    cfg.params.b1 = num(p, "b1", cfg.params.b1);
    cfg.params.b2 = num(p, "b2", cfg.params.b2);
    cfg.params.c1 = num(p, "c1", cfg.params.c1);
    cfg.params.c2 = num(p, "c2", cfg.params.c2);
  }
  cfg.params.rho = num(doc, "rho", cfg.params.rho);
  cfg.params.sigma = num(doc, "sigma", cfg.params.sigma);
  if (doc.contains("agents")) cfg.params.agents = parse_pi_operator(doc["agents"], "agents");
  if (cfg.params.variant == Variant::multi_agent && cfg.params.agents.agents.empty())
    throw ValidationError("multi-agent model requires an 'agents' block");

  if (doc.contains("init")) {
    const json& init = doc["init"];
    require_keys(init, "init", {"x", "y", "p", "r"});
    cfg.x0 = num(init, "x", 0.0);
    cfg.y0 = num(init, "y", 0.0);
    if (init.contains("p")) cfg.p0 = num(init, "p", 0.0);
    if (init.contains("r")) cfg.r0 = num(init, "r", 0.0);
  }
  if (doc.contains("horizon")) cfg.horizon = doc["horizon"].get<std::int64_t>();
  if (cfg.horizon < 0) throw ValidationError("'horizon' must be nonnegative");
  if (doc.contains("noise")) cfg.noise = parse_noise(doc["noise"]);
  if (doc.contains("seed")) cfg.noise.seed = doc["seed"].get<std::uint64_t>();

  if (doc.contains("lyapunov")) {
    require_keys(doc["lyapunov"], "lyapunov", {"lambda"});
    if (doc["lyapunov"].contains("lambda")) cfg.lambda = num(doc["lyapunov"], "lambda", 0.0);
  }
  if (doc.contains("convergence")) {
    require_keys(doc["convergence"], "convergence", {"tol_distance", "tol_residual"});
    cfg.tol_distance = num(doc["convergence"], "tol_distance", cfg.tol_distance);
    cfg.tol_residual = num(doc["convergence"], "tol_residual", cfg.tol_residual);
  }
  if (doc.contains("bounds")) {
    const json& b = doc["bounds"];
    require_keys(b, "bounds", {"rhos", "seeds", "seed_count", "horizon", "window_fraction"});
    if (b.contains("rhos")) cfg.bounds_rhos = num_array(b["rhos"], "bounds.rhos");
    if (b.contains("seeds")) {
      for (const json& s : b["seeds"]) cfg.bounds_seeds.push_back(s.get<std::uint64_t>());
    } else if (b.contains("seed_count")) {
      cfg.bounds_seed_count = b["seed_count"].get<std::uint64_t>();
    }
    if (b.contains("horizon")) cfg.bounds_horizon = b["horizon"].get<std::int64_t>();
    cfg.bounds_window_fraction = num(b, "window_fraction", cfg.bounds_window_fraction);
  }
  if (doc.contains("pi")) {
    const json& pi = doc["pi"];
    require_keys(pi, "pi", {"operator", "x", "v"});
    if (!pi.contains("operator")) throw ValidationError("pi block requires an 'operator'");
    cfg.pi_operator = parse_pi_operator(pi["operator"], "pi.operator");
    cfg.pi_operator_given = true;
    if (pi.contains("x")) cfg.pi_input_x = num_array(pi["x"], "pi.x");
    if (pi.contains("v")) cfg.pi_input_v = num_array(pi["v"], "pi.v");
    if (cfg.pi_input_x.empty() == cfg.pi_input_v.empty())
      throw ValidationError("pi block requires exactly one of 'x' or 'v'");
  }
  if (doc.contains("minvar")) {
    const json& mv = doc["minvar"];
    require_keys(mv, "minvar", {"v", "sigma", "r0", "grid", "budget"});
    if (!mv.contains("v")) throw ValidationError("minvar block requires 'v'");
    cfg.minvar_v = num_array(mv["v"], "minvar.v");
    cfg.minvar_sigma = num(mv, "sigma", 0.0);
    cfg.minvar_r0 = num(mv, "r0", cfg.minvar_v.empty() ? 0.0 : cfg.minvar_v.front());
    cfg.minvar_grid = mv.contains("grid") ? mv["grid"].get<int>() : 21;
    if (mv.contains("budget")) cfg.minvar_budget = mv["budget"].get<std::size_t>();
  }
  if (doc.contains("output")) {
    require_keys(doc["output"], "output", {"prefix"});
    cfg.output_prefix = doc["output"].value("prefix", cfg.output_prefix);
  }

  // Full structural validation happens at load time so that bad configs are
  // reported before any computation runs.
  cfg.params.validate();
  cfg.initial_state();
  if (doc.contains("sweep")) {
    cfg.sweep = parse_sweep(doc["sweep"], cfg);
    cfg.sweep_given = true;
  }
  return cfg;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace hysteresim
