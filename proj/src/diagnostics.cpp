#include "higgsflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace higgsflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr cplx kI{0.0, 1.0};

// 1x1 field holding the pointwise trace of every component.
FormField trace_form(const FormField& f) {
  FormField out(f.base(), 1, 1, f.degree());
  for (int c = 0; c < f.components(); ++c)
    for (std::size_t pt = 0; pt < f.base().num_points(); ++pt) out.at(c, pt)(0, 0) = f.at(c, pt).trace();
  return out;
}

double integrate_top(const FormField& top) {
  const auto d = top_form_trace_density(top);
  return integrate(d, top.base()).real();
}

// int tr(X ^ Y) for complementary-degree End-valued forms.
double integrate_trace_wedge(const FormField& x, const FormField& y) {
  if (x.components() == 0 || y.components() == 0) return 0.0;
  return integrate_top(wedge(x, y));
}

}  // namespace

cplx top_form_volume_factor(int n) {
  // dz ^ dzbar = -2i (i/2) dz ^ dzbar, and sorting dz^1 dzbar^1 ... into
  // dz^{1..n} dzbar^{1..n} costs (-1)^{n(n-1)/2}.
  cplx f = 1.0;
  for (int k = 0; k < n; ++k) f *= cplx(0.0, -2.0);
  return ((n * (n - 1) / 2) % 2 == 0) ? f : -f;
}

std::vector<cplx> top_form_trace_density(const FormField& top) {
  const int n = top.base().dim();
  if (!(top.degree() == Bidegree{n, n}) || !top.square())
    throw InvalidInput("top form density: needs a square (n,n)-form");
  const cplx factor = top_form_volume_factor(n);
  std::vector<cplx> d(top.base().num_points());
  for (std::size_t pt = 0; pt < d.size(); ++pt) d[pt] = factor * top.at(0, pt).trace();
  return d;
}

double ChernWeilReport::relative_residual() const { return std::abs(residual) / std::max(1.0, std::abs(lhs)); }

nlohmann::json ChernWeilReport::to_json() const {
  return {{"lhs", lhs},
          {"deviation_term", deviation_term},
          {"topological_term", topological_term},
          {"lambda_term", lambda_term},
          {"residual", residual},
          {"relative_residual", relative_residual()}};
}

ChernWeilReport chern_weil_report(const HiggsBundleState& state) {
  const Evaluation ev = evaluate(state);
  ChernWeilReport r;
  r.lhs = ev.energy;
  // the unprojected i Lambda (F + [phi, phi^*]) - lambda: with it the n = 1 identity is exact
  FormField raw = kI * contract_lambda(ev.curvature.total_11());
  for (std::size_t pt = 0; pt < state.base().num_points(); ++pt)
    raw.at(0, pt) -= ev.lambda * Mat::Identity(state.rank(), state.rank());
  r.deviation_term = l2_norm_sq(raw, state.metric());
  r.topological_term = 4.0 * kPi * kPi * topological_integrals(state).c2_term;
  r.lambda_term = ev.lambda * ev.lambda * state.rank() * state.base().volume();
  r.residual = r.lhs - (r.deviation_term + r.topological_term + r.lambda_term);
  return r;
}

nlohmann::json TopologicalIntegrals::to_json() const {
  return {{"c1_omega", c1_omega}, {"c2_term", c2_term},    {"ch2_omega", ch2_omega},
          {"c1_squared", c1_squared}, {"c2_omega", c2_omega}};
}

TopologicalIntegrals topological_integrals(const HiggsBundleState& state) {
  const int n = state.base().dim();
  const ChernCurvature F = chern_curvature(state.metric(), state.a());
  TopologicalIntegrals t;
  // c1 = (i / 2pi) tr F
  if (n == 1) {
    t.c1_omega = integrate_top(kI * trace_form(F.f11)) / (2.0 * kPi);
    return t;
  }
  const FormField omega = omega_times(FormField::identity(state.base(), 1));
  const FormField trF = trace_form(F.f11);
  t.c1_omega = integrate_top(kI * wedge(trF, omega)) / (2.0 * kPi);
  const double trF_trF = integrate_trace_wedge(trF, trF) + integrate_trace_wedge(trace_form(F.f20), trace_form(F.f02)) +
                         integrate_trace_wedge(trace_form(F.f02), trace_form(F.f20));
  const double trFF = integrate_trace_wedge(F.f11, F.f11) + integrate_trace_wedge(F.f20, F.f02) +
                      integrate_trace_wedge(F.f02, F.f20);
  // c1^2 = -tr F ^ tr F / 4pi^2, c2 = (c1^2 + tr(F ^ F) / 4pi^2) / 2
  t.c1_squared = -trF_trF / (4.0 * kPi * kPi);
  t.c2_term = trFF / (4.0 * kPi * kPi);
  t.c2_omega = 0.5 * (t.c1_squared + t.c2_term);
  t.ch2_omega = 0.5 * t.c1_squared - t.c2_omega;
  return t;
}

std::vector<double> energy_density(const HiggsPair& pair) { return ymh_density(pair.as_state()); }

// ------------------------------------------------------------ parabolic

void DensityHistory::push(double t, std::vector<double> e) {
  if (e.size() != base.num_points()) throw InvalidInput("density history: field size does not match the grid");
  if (!times.empty() && !(t > times.back())) throw InvalidInput("density history: times must increase");
  times.push_back(t);
  fields.push_back(std::move(e));
}

void DensityHistory::attach(FlowOptions& opt, double t_from, double t_to) {
  auto prev = opt.on_step;
  opt.on_step = [this, prev, t_from, t_to](double t, const HiggsBundleState& s, const Evaluation& ev) {
    if (prev) prev(t, s, ev);
    if (t >= t_from - 1e-12 && t <= t_to + 1e-12) push(t, ev.density);
  };
}

std::vector<double> ball_weights(const TorusBase& base, const std::array<double, 4>& x0, double R) {
  const int d = base.real_dim();
  const double h = base.spacing();
  const int m = d == 2 ? 16 : 4;
  std::vector<double> w(base.num_points(), 0.0);
  for (std::size_t pt = 0; pt < w.size(); ++pt) {
    const auto x = base.position(pt);
    std::array<double, 4> off{};
    double near = 0.0, far = 0.0;
    for (int a = 0; a < d; ++a) {
      double dx = x[a] - x0[a];
      dx -= std::round(dx);
      off[a] = dx;
      near += std::pow(std::max(0.0, std::abs(dx) - 0.5 * h), 2);
      far += std::pow(std::abs(dx) + 0.5 * h, 2);
    }
    if (near >= R * R) continue;
    if (far <= R * R) {
      w[pt] = base.cell_volume();
      continue;
    }
    long long inside = 0, total = 1;
    for (int a = 0; a < d; ++a) total *= m;
    for (long long s = 0; s < total; ++s) {
      long long rest = s;
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const int k = static_cast<int>(rest % m);
        rest /= m;
        const double y = off[a] + ((k + 0.5) / m - 0.5) * h;
        r2 += y * y;
      }
      if (r2 < R * R) ++inside;
    }
    w[pt] = base.cell_volume() * static_cast<double>(inside) / static_cast<double>(total);
  }
  return w;
}

namespace {

void check_radius(const TorusBase& base, double t0, double R) {
  const double bound = std::min(base.injectivity_radius(), t0 > 0.0 ? 0.5 * std::sqrt(t0) : 0.0);
  if (!(R > 0.0) || !(R < bound))
    throw InvalidInput("parabolic energy: need 0 < R < min(injectivity radius, sqrt(t0)/2) = " +
                       std::to_string(bound) + ", got R = " + std::to_string(R));
}

// Trapezoidal integral over [a, b] of the piecewise-linear interpolant of (t, v).
double trapezoid(const std::vector<double>& t, const std::vector<double>& v, double a, double b) {
  const double tol = 1e-9 * std::max(1.0, std::abs(b));
  if (t.empty() || t.front() > a + tol || t.back() < b - tol)
    throw InvalidInput("parabolic energy: density snapshots do not cover [t0 - R^2, t0 + R^2]");
  auto value_at = [&](double s) {
    if (s <= t.front()) return v.front();
    if (s >= t.back()) return v.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t j = static_cast<std::size_t>(it - t.begin());
    const double th = (s - t[j - 1]) / (t[j] - t[j - 1]);
    return (1.0 - th) * v[j - 1] + th * v[j];
  };
  std::vector<double> nodes{a};
  for (double s : t)
    if (s > a && s < b) nodes.push_back(s);
  nodes.push_back(b);
  double acc = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k)
    acc += 0.5 * (nodes[k] - nodes[k - 1]) * (value_at(nodes[k]) + value_at(nodes[k - 1]));
  return acc;
}

double weighted_sum(const std::vector<double>& w, const std::vector<double>& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] != 0.0) s += w[i] * e[i];
  return s;
}

}  // namespace

double parabolic_energy(const DensityHistory& history, const std::array<double, 4>& x0, double t0, double R) {
  check_radius(history.base, t0, R);
  const std::vector<double> w = ball_weights(history.base, x0, R);
  std::vector<double> spatial(history.times.size());
  for (std::size_t k = 0; k < spatial.size(); ++k) spatial[k] = weighted_sum(w, history.fields[k]);
  const double integral = trapezoid(history.times, spatial, t0 - R * R, t0 + R * R);
  return std::pow(R, 2 - 2 * history.base.dim()) * integral;
}

// ------------------------------------------------------------- flatness

nlohmann::json FlatnessCertificate::to_json() const {
  return {{"achieved_epsilon", achieved},
          {"sup_curvature_plus_bracket", sup_curvature_bracket},
          {"sup_del_phi", sup_del_phi},
          {"sup_dbar_phi_adjoint", sup_dbar_phi_adjoint},
          {"sup_discretisation_residual", sup_discretisation},
          {"n", n},
          {"N", N},
          {"target_epsilon", target},
          {"pass", pass}};
}

std::string FlatnessCertificate::verdict_line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "flatness %s: sup|F_HS| = %.6e %s target %.6e (n=%d, N=%d)", pass ? "PASS" : "FAIL",
                achieved, pass ? "<" : ">=", target, n, N);
  return buf;
}

FlatnessCertificate flatness_certificate(const HiggsBundleState& state, double eps_target) {
  const HitchinSimpsonCurvature F = hitchin_simpson_curvature(state);
  const HermitianMetric& h = state.metric();
  FlatnessCertificate c;
  c.achieved = F.sup_norm(h);
  c.sup_curvature_bracket = sup_norm(F.total_11(), h);
  c.sup_del_phi = F.del_phi.components() ? sup_norm(F.del_phi, h) : 0.0;
  c.sup_dbar_phi_adjoint = F.dbar_phi_adjoint.components() ? sup_norm(F.dbar_phi_adjoint, h) : 0.0;
  if (F.chern_20.components()) c.sup_discretisation = sup_norm_of_sum({&F.chern_20, &F.chern_02}, h, h);
  c.n = state.base().dim();
  c.N = state.base().resolution();
  c.target = eps_target;
  c.pass = c.achieved < eps_target;
  return c;
}

// ------------------------------------------------------------ monitor

bool RegularityMonitor::qualitative_ok(double slack) const {
  for (std::size_t k = 1; k < records.size(); ++k) {
    const RegularityRecord &a = records[k - 1], &b = records[k];
    if (!std::isfinite(b.sup_e_after)) return false;
    if (b.parabolic_energy <= a.parabolic_energy * (1.0 + slack) && b.sup_e_after > a.sup_e_after * (1.0 + slack) + 1e-300)
      return false;
  }
  return true;
}

nlohmann::json RegularityMonitor::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : records)
    j.push_back({{"t0", r.t0}, {"R", r.R}, {"parabolic_energy", r.parabolic_energy}, {"sup_e_after", r.sup_e_after}});
  return {{"records", j}, {"qualitative_ok", qualitative_ok()}};
}

RegularityMonitor regularity_monitor(const DensityHistory& history, const std::vector<double>& t0s, double R,
                                     int per_axis) {
  if (per_axis < 1) throw InvalidInput("regularity monitor: need at least one centre per axis");
  const TorusBase& base = history.base;
  const int d = base.real_dim();
  std::vector<std::array<double, 4>> centres;
  long long total = 1;
  for (int a = 0; a < d; ++a) total *= per_axis;
  for (long long s = 0; s < total; ++s) {
    std::array<double, 4> x{};
    long long rest = s;
    for (int a = 0; a < d; ++a) {
      x[a] = static_cast<double>(rest % per_axis) / per_axis;
      rest /= per_axis;
    }
    centres.push_back(x);
  }
  std::vector<std::vector<double>> weights;
  for (const auto& x : centres) weights.push_back(ball_weights(base, x, R));

  RegularityMonitor mon;
  for (double t0 : t0s) {
    check_radius(base, t0, R);
    RegularityRecord rec;
    rec.t0 = t0;
    rec.R = R;
    for (const auto& w : weights) {
      std::vector<double> spatial(history.times.size());
      for (std::size_t k = 0; k < spatial.size(); ++k) spatial[k] = weighted_sum(w, history.fields[k]);
      rec.parabolic_energy = std::max(rec.parabolic_energy,
                                      std::pow(R, 2 - 2 * base.dim()) * trapezoid(history.times, spatial, t0 - R * R, t0 + R * R));
    }
    for (std::size_t k = 0; k < history.times.size(); ++k)
      if (history.times[k] >= t0 - 1e-12 && history.times[k] <= t0 + R * R + 1e-12)
        rec.sup_e_after = std::max(rec.sup_e_after, sup_value(history.fields[k]));
    mon.records.push_back(rec);
  }
  return mon;
}

}  // namespace higgsflow
