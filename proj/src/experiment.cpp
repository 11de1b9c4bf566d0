#include "higgsflow/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "higgsflow/scenarios.hpp"

namespace higgsflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(key, "expected a number, got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError(key, "expected an integer, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

json failure(const std::string& reason, const std::string& message, const std::string& key = "") {
  json j{{"status", "error"}, {"reason", reason}, {"message", message}};
  if (!key.empty()) j["key"] = key;
  return j;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream os(p);
  os << j.dump(2) << "\n";
  if (!os) throw ConfigError("out.dir", "cannot write " + p.string());
}

template <class F>
void write_text(const fs::path& p, F&& fn) {
  std::ofstream os(p);
  fn(os);
  if (!os) throw ConfigError("out.dir", "cannot write " + p.string());
}

void write_state(const fs::path& p, const HiggsBundleState& st) {
  std::ofstream os(p, std::ios::binary);
  save_state(os, st);
  if (!os) throw ConfigError("out.dir", "cannot write " + p.string());
}

fs::path prepare_out(const ExperimentConfig& c) {
  fs::path p(c.out_dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw ConfigError("out.dir", "cannot create directory '" + c.out_dir + "'");
  return p;
}

struct Loaded {
  std::optional<Scenario> scenario;
  HiggsBundleState state;
};

Loaded load_input(const ExperimentConfig& c) {
  if (!c.state_file.empty()) {
    std::ifstream is(c.state_file, std::ios::binary);
    if (!is) throw ConfigError("state", "cannot open '" + c.state_file + "'");
    HiggsBundleState st = load_state(is);
    if (c.n != 0 && st.base().dim() != c.n) throw ConfigError("n", "does not match the state file");
    if (c.N != 0 && st.base().resolution() != c.N) throw ConfigError("N", "does not match the state file");
    return {std::nullopt, std::move(st)};
  }
  Scenario sc = make_scenario(c.scenario, c.n, c.N, c.seed);
  HiggsBundleState st = sc.state;
  return {std::move(sc), std::move(st)};
}

FlowOptions flow_options(const ExperimentConfig& c) {
  FlowOptions opt;
  opt.dt = c.dt;
  opt.T = c.flow_kind == "none" ? 0.0 : c.T;
  opt.samples = c.samples;
  return opt;
}

json validity_json(const ValidityReport& v) {
  return {{"integrability", v.integrability},
          {"holomorphicity", v.holomorphicity},
          {"symmetry", v.symmetry},
          {"tolerance", v.tolerance},
          {"valid", v.valid}};
}

json grid_json(const TorusBase& b) { return {{"n", b.dim()}, {"N", b.resolution()}}; }

// ------------------------------------------------------------ verbs

CommandResult cmd_catalog() {
  json list = json::array();
  for (const auto& s : scenario_catalog())
    list.push_back({{"name", s.name},
                    {"description", s.description},
                    {"rank", s.rank},
                    {"dims", s.dims},
                    {"default_n", s.default_n},
                    {"default_N", s.default_N},
                    {"needs_seed", s.needs_seed},
                    {"expected", s.expected}});
  return {kExitOk, {{"status", "ok"}, {"scenarios", list}}};
}

CommandResult cmd_validate(const ExperimentConfig& c) {
  const Loaded in = load_input(c);
  const ValidityReport v = validate(in.state.structure());
  json rep{{"status", v.valid ? "ok" : "invalid"}, {"grid", grid_json(in.state.base())}, {"validity", validity_json(v)}};
  if (in.scenario) {
    rep["scenario"] = in.scenario->info.name;
    rep["expected"] = in.scenario->info.expected;
    json subs = json::array();
    for (const auto& s : in.scenario->filtration) subs.push_back(subbundle_residuals(in.state, s).to_json());
    rep["filtration"] = subs;
    try {
      rep["subobjects"] = enumerate_constant_subobjects(in.state).to_json();
    } catch (const InvalidInput&) {
      rep["subobjects"] = nullptr;
    }
  }
  write_json(prepare_out(c) / "validate.json", rep);
  return {v.valid ? kExitOk : kExitTargetFailed, rep};
}

CommandResult cmd_run(const ExperimentConfig& c) {
  const Loaded in = load_input(c);
  const fs::path out = prepare_out(c);
  const ValidityReport v = validate(in.state.structure());
  if (!v.valid) {
    json rep = failure("invalid_state", "the initial Higgs structure fails validate()");
    rep["validity"] = validity_json(v);
    write_json(out / "summary.json", rep);
    return {kExitConfigError, rep};
  }
  write_state(out / "initial.hstate", in.state);
  const FlowOptions opt = flow_options(c);

  FlowTrace trace;
  std::optional<HiggsBundleState> final_state;
  try {
    if (c.flow_kind == "ymh") {
      YmhResult r = run_ymh(HiggsPair(in.state), opt);
      trace = std::move(r.trace);
      final_state = r.final_pair.as_state();
    } else {
      DonaldsonResult r = run_donaldson(in.state, opt);
      trace = std::move(r.trace);
      final_state = std::move(r.final_state);
    }
  } catch (const FlowBlowup& e) {
    write_state(out / "last_healthy.hstate", e.last_healthy);
    json rep = failure("flow_blowup", e.what());
    rep["time"] = e.time;
    rep["snapshot"] = (out / "last_healthy.hstate").string();
    write_json(out / "summary.json", rep);
    return {kExitBlowup, rep};
  }

  write_text(out / "trace.csv", [&](std::ostream& os) { trace.write_csv(os); });
  write_state(out / "final.hstate", *final_state);
  const FlatnessCertificate cert = flatness_certificate(*final_state, c.epsilon);
  json cj = cert.to_json();
  cj["verdict"] = cert.verdict_line();
  write_json(out / "certificate.json", cj);

  // sup|phi| relative to its initial value, and sup e after t = 1
  double phi_ratio = 0.0;
  bool e_monotone_after_1 = true;
  const double phi0 = trace.rows.empty() ? 0.0 : trace.rows.front().phi_sup;
  const TraceRow* prev = nullptr;
  for (const auto& r : trace.rows) {
    if (phi0 > 0.0) phi_ratio = std::max(phi_ratio, std::sqrt(r.phi_sup / phi0));
    if (r.t >= 1.0) {
      if (prev && r.e_sup > prev->e_sup) e_monotone_after_1 = false;
      prev = &r;
    }
  }
  json rep{{"status", cert.pass ? "ok" : "target_failed"},
           {"config", c.to_json()},
           {"grid", grid_json(in.state.base())},
           {"validity", validity_json(v)},
           {"trace", trace.summary()},
           {"phi_sup_ratio", phi_ratio},
           {"e_sup_monotone_after_t1", e_monotone_after_1},
           {"certificate", cj}};
  if (in.scenario) rep["scenario"] = {{"name", in.scenario->info.name}, {"expected", in.scenario->info.expected}};
  write_json(out / "summary.json", rep);
  return {cert.pass ? kExitOk : kExitTargetFailed, rep};
}

const Scenario& need_scenario(const Loaded& in, const char* what) {
  if (!in.scenario) throw ConfigError("scenario", std::string(what) + " needs a catalog scenario");
  return *in.scenario;
}

CommandResult cmd_sweep(const ExperimentConfig& c) {
  const Loaded in = load_input(c);
  const Scenario& sc = need_scenario(in, "sweep-rho");
  if (!sc.extension) throw ConfigError("scenario", "'" + sc.info.name + "' has no shipped sub-bundle");
  const fs::path out = prepare_out(c);
  const ExtensionData ext = split_extension(sc.state, *sc.extension);
  const RhoSweep sweep = rho_sweep(ext, c.rhos);
  write_text(out / "rho_sweep.csv", [&](std::ostream& os) { sweep.write_csv(os); });
  write_text(out / "rho_sweep_plot.csv", [&](std::ostream& os) { sweep.write_two_column_csv(os); });

  bool pass = true;
  json targets = json::array();
  if (!sc.rho_targets.empty()) {
    std::vector<double> rs;
    for (const auto& t : sc.rho_targets) rs.push_back(t.rho);
    const RhoSweep at = rho_sweep(ext, rs);
    for (std::size_t k = 0; k < rs.size(); ++k) {
      const bool ok = at.rows[k].sup_f < 3.0 * sc.rho_targets[k].epsilon;
      pass = pass && ok;
      targets.push_back({{"epsilon", sc.rho_targets[k].epsilon}, {"rho", rs[k]}, {"sup_F", at.rows[k].sup_f}, {"pass", ok}});
    }
  }
  json rep{{"status", pass ? "ok" : "target_failed"},
           {"scenario", sc.info.name},
           {"grid", grid_json(sc.state.base())},
           {"extension", ext.to_json()},
           {"sweep", sweep.to_json()},
           {"targets", targets}};
  write_json(out / "rho_sweep.json", rep);
  return {pass ? kExitOk : kExitTargetFailed, rep};
}

CommandResult cmd_filtration(const ExperimentConfig& c) {
  const Loaded in = load_input(c);
  const Scenario& sc = need_scenario(in, "verify-filtration");
  if (sc.filtration.empty()) throw ConfigError("scenario", "'" + sc.info.name + "' has no shipped filtration");
  const fs::path out = prepare_out(c);
  FiltrationReport fr = verify_filtration(sc.state, sc.filtration, c.epsilon, flow_options(c));
  const AssembledTotal tot = assemble_from_filtration(sc.state, fr, c.assemble_rho, c.assemble_epsilon);
  const bool additive = fr.c1_additivity < 1e-6 && fr.ch2_additivity < 1e-6;
  const bool pass = fr.pass && tot.certificate.pass && additive;
  json assembled = tot.certificate.to_json();
  assembled["rho"] = c.assemble_rho;
  assembled["verdict"] = tot.certificate.verdict_line();
  json rep{{"status", pass ? "ok" : "target_failed"},
           {"scenario", sc.info.name},
           {"grid", grid_json(sc.state.base())},
           {"filtration", fr.to_json()},
           {"additivity_ok", additive},
           {"assembled", assembled}};
  write_json(out / "filtration.json", rep);
  return {pass ? kExitOk : kExitTargetFailed, rep};
}

CommandResult cmd_equivalence(const ExperimentConfig& c) {
  const Loaded in = load_input(c);
  const fs::path out = prepare_out(c);
  const EquivalenceReport eq = flow_equivalence_check(in.state, c.T, c.dt);
  write_text(out / "equivalence.csv", [&](std::ostream& os) {
    os << "t,del_phi,curvature,contracted,conjugation,energy_metric,energy_pair\n";
    char buf[256];
    for (const auto& s : eq.samples) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.del_phi, s.curvature,
                    s.contracted, s.conjugation, s.energy_metric, s.energy_pair);
      os << buf;
    }
  });
  const bool pass = eq.max_norm_residual < c.tol;
  json rep{{"status", pass ? "ok" : "target_failed"},
           {"grid", grid_json(in.state.base())},
           {"tolerance", c.tol},
           {"equivalence", eq.to_json()}};
  write_json(out / "equivalence.json", rep);
  return {pass ? kExitOk : kExitTargetFailed, rep};
}

}  // namespace

// ------------------------------------------------------------ config

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k{"scenario",       "state",          "seed",         "n",
                                          "N",              "flow.kind",      "flow.dt",      "flow.T",
                                          "flow.samples",   "target.epsilon", "target.tol",   "sweep.rho",
                                          "assemble.rho",   "assemble.epsilon", "out.dir"};
  return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "scenario") {
    scenario = v;
  } else if (key == "state") {
    state_file = v;
  } else if (key == "seed") {
    const long long s = parse_int(key, v);
    if (s < 0) throw ConfigError(key, "must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "n") {
    n = static_cast<int>(parse_int(key, v));
  } else if (key == "N") {
    N = static_cast<int>(parse_int(key, v));
  } else if (key == "flow.kind") {
    flow_kind = v;
  } else if (key == "flow.dt") {
    dt = parse_double(key, v);
  } else if (key == "flow.T") {
    T = parse_double(key, v);
  } else if (key == "flow.samples") {
    samples = parse_list(key, v);
  } else if (key == "target.epsilon") {
    epsilon = parse_double(key, v);
  } else if (key == "target.tol") {
    tol = parse_double(key, v);
  } else if (key == "sweep.rho") {
    rhos = parse_list(key, v);
  } else if (key == "assemble.rho") {
    assemble_rho = parse_double(key, v);
  } else if (key == "assemble.epsilon") {
    assemble_epsilon = parse_double(key, v);
  } else if (key == "out.dir") {
    out_dir = v;
  } else {
    throw ConfigError(key, "unknown key");
  }
}

void ExperimentConfig::merge_text(std::istream& is, const std::string& origin) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", origin + ":" + std::to_string(lineno) + ": expected key = value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config", "cannot open '" + path + "'");
  ExperimentConfig c;
  c.merge_text(is, path);
  return c;
}

void ExperimentConfig::validate() const {
  if (scenario.empty() == state_file.empty()) throw ConfigError("scenario", "give exactly one of scenario or state");
  if (!scenario.empty()) {
    try {
      const ScenarioInfo& info = scenario_info(scenario);
      if (info.needs_seed && !seed) throw ConfigError("seed", "scenario '" + scenario + "' is random and needs a seed");
      if (n != 0 && std::find(info.dims.begin(), info.dims.end(), n) == info.dims.end())
        throw ConfigError("n", "scenario '" + scenario + "' does not support n = " + std::to_string(n));
    } catch (const InvalidInput& e) {
      throw ConfigError("scenario", e.what());
    }
  } else if (!fs::is_regular_file(state_file)) {
    throw ConfigError("state", "file '" + state_file + "' does not exist");
  }
  if (n != 0 && n != 1 && n != 2) throw ConfigError("n", "must be 1 or 2");
  if (N != 0 && (N < 8 || N % 2 != 0 || N > 256)) throw ConfigError("N", "must be even and in [8, 256]");
  if (flow_kind != "donaldson" && flow_kind != "ymh" && flow_kind != "none")
    throw ConfigError("flow.kind", "must be donaldson, ymh or none");
  if (!(dt > 0.0) || dt > 1.0) throw ConfigError("flow.dt", "must lie in (0, 1]");
  if (!(T >= 0.0) || T / dt > 1e7) throw ConfigError("flow.T", "must be non-negative with T/dt <= 1e7");
  for (double s : samples)
    if (!(s >= 0.0) || s > T) throw ConfigError("flow.samples", "sample times must lie in [0, T]");
  if (!(epsilon > 0.0)) throw ConfigError("target.epsilon", "must be positive");
  if (!(tol > 0.0)) throw ConfigError("target.tol", "must be positive");
  if (rhos.empty()) throw ConfigError("sweep.rho", "needs at least one value");
  for (double r : rhos)
    if (!(r > 0.0) || r > 1.0) throw ConfigError("sweep.rho", "values must lie in (0, 1]");
  if (!(assemble_rho > 0.0) || assemble_rho > 1.0) throw ConfigError("assemble.rho", "must lie in (0, 1]");
  if (!(assemble_epsilon > 0.0)) throw ConfigError("assemble.epsilon", "must be positive");
  if (out_dir.empty()) throw ConfigError("out.dir", "must not be empty");
}

json ExperimentConfig::to_json() const {
  json j{{"flow.kind", flow_kind},     {"flow.dt", dt},          {"flow.T", T},
         {"flow.samples", samples},    {"target.epsilon", epsilon}, {"target.tol", tol},
         {"sweep.rho", rhos},          {"assemble.rho", assemble_rho}, {"assemble.epsilon", assemble_epsilon},
         {"n", n},                     {"N", N},                 {"out.dir", out_dir}};
  if (!scenario.empty()) j["scenario"] = scenario;
  if (!state_file.empty()) j["state"] = state_file;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

const std::vector<std::string>& command_verbs() {
  static const std::vector<std::string> v{"run", "catalog", "validate", "sweep-rho", "verify-filtration",
                                          "flow-equivalence"};
  return v;
}

CommandResult run_command(const std::string& verb, const ExperimentConfig& config) {
  try {
    if (verb == "catalog") return cmd_catalog();
    if (std::find(command_verbs().begin(), command_verbs().end(), verb) == command_verbs().end())
      return {kExitConfigError, failure("unknown_command", "unknown command '" + verb + "'")};
    config.validate();
    if (verb == "run") return cmd_run(config);
    if (verb == "validate") return cmd_validate(config);
    if (verb == "sweep-rho") return cmd_sweep(config);
    if (verb == "verify-filtration") return cmd_filtration(config);
    return cmd_equivalence(config);
  } catch (const ConfigError& e) {
    return {kExitConfigError, failure("config", e.what(), e.key)};
  } catch (const FlowBlowup& e) {
    return {kExitBlowup, failure("flow_blowup", e.what())};
  } catch (const InvalidInput& e) {
    return {kExitConfigError, failure("invalid_input", e.what())};
  } catch (const std::exception& e) {
    return {kExitConfigError, failure("error", e.what())};
  }
}

}  // namespace higgsflow
