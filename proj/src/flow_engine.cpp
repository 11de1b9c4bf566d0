#include "higgsflow/flow_engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "higgsflow/pointwise.hpp"

namespace higgsflow {

namespace {

constexpr cplx kI{0.0, 1.0};

// [X, Y] for a (0,0)-form X on the left of a form Y.
FormField commutator0(const FormField& x, const FormField& y) { return left_multiply(x, y) - right_multiply(y, x); }

FormField full_curvature_plus_bracket(const HitchinSimpsonCurvature& F) { return F.total_11(); }

std::vector<double> density_from(const HitchinSimpsonCurvature& F, const HermitianMetric& h) {
  auto e = pointwise_norm_sq(F.total_11(), h);
  for (const FormField* part : {&F.chern_20, &F.chern_02}) {
    if (part->components() == 0) continue;
    const auto p = pointwise_norm_sq(*part, h);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += p[i];
  }
  if (F.del_phi.components() > 0) {
    const auto p = pointwise_norm_sq(F.del_phi, h);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += 2.0 * p[i];
  }
  return e;
}

std::vector<double> norm_sq_or_zero(const FormField& f, const HermitianMetric& h) {
  if (f.components() == 0) return std::vector<double>(f.base().num_points(), 0.0);
  return pointwise_norm_sq(f, h);
}

bool all_finite(const FormField& f) {
  for (const cplx& v : f.raw())
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

}  // namespace

HiggsPair::HiggsPair(HiggsStructure s, HermitianMetric h) : structure(std::move(s)), h0(std::move(h)) {
  if (h0.rank() != structure.rank()) throw InvalidInput("pair: background metric rank differs from bundle rank");
  if (!(h0.base() == structure.base())) throw InvalidInput("pair: background metric lives on a different grid");
}

Evaluation evaluate(const HiggsBundleState& state) {
  const HermitianMetric& h = state.metric();
  Evaluation ev{hitchin_simpson_curvature(state), FormField(state.base(), state.rank(), {0, 0}), 0.0, {}, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  ev.lambda = degree_slope_lambda(ev.curvature.chern).lambda;
  ev.deviation = kI * contract_lambda(full_curvature_plus_bracket(ev.curvature));
  double defect = 0.0, scale = 0.0;
  for (std::size_t pt = 0; pt < state.base().num_points(); ++pt) {
    auto k = ev.deviation.at(0, pt);
    k -= ev.lambda * Mat::Identity(state.rank(), state.rank());
    const Mat hk = h.at(pt) * k;
    defect = std::max(defect, (hk - hk.adjoint()).norm());
    scale = std::max(scale, hk.norm());
    // keep the H-self-adjoint part: (K + H^{-1} K^dagger H) / 2
    k = 0.5 * h.inverse_at(pt) * (hk + hk.adjoint());
  }
  ev.selfadjoint_defect = defect / (1.0 + scale);
  ev.density = density_from(ev.curvature, h);
  ev.energy = integrate(ev.density, state.base());
  const auto k2 = pointwise_norm_sq(ev.deviation, h);
  ev.dev_l2 = std::sqrt(std::max(0.0, integrate(k2, state.base())));
  ev.dev_sup = std::sqrt(std::max(0.0, sup_value(k2)));
  ev.e_sup = sup_value(ev.density);
  ev.phi_sup = sup_value(pointwise_norm_sq(state.phi(), h));
  return ev;
}

FormField einstein_deviation(const HiggsBundleState& state) {
  Evaluation ev = evaluate(state);
  if (ev.selfadjoint_defect > kDeviationDefectLimit)
    throw InvalidInput("einstein deviation: curvature is far from H-anti-self-adjoint (defect " +
                       std::to_string(ev.selfadjoint_defect) + "); the grid is too coarse for this metric");
  const HermitianMetric& h = state.metric();
  for (std::size_t pt = 0; pt < state.base().num_points(); ++pt) {
    const Mat hk = h.at(pt) * ev.deviation.at(0, pt);
    if ((hk - hk.adjoint()).norm() > 1e-10 * (1.0 + hk.norm()))
      throw InvalidInput("einstein deviation: K is not H-self-adjoint at grid point " + std::to_string(pt));
  }
  return std::move(ev.deviation);
}

std::vector<double> ymh_density(const HiggsBundleState& state) {
  return density_from(hitchin_simpson_curvature(state), state.metric());
}

double ymh_energy(const HiggsPair& pair) { return integrate(ymh_density(pair.as_state()), pair.base()); }

namespace {

HiggsBundleState donaldson_update(const HiggsBundleState& state, const FormField& K, double dt) {
  FormField h = state.metric().field();
  for (std::size_t pt = 0; pt < state.base().num_points(); ++pt) {
    const Mat hp = h.at(0, pt);
    h.at(0, pt) = pointwise::exponential_metric_update(hp, K.at(0, pt), dt);
  }
  return state.with_metric(HermitianMetric(std::move(h)));
}

FormField gauge_exponential(const HermitianMetric& h0, const FormField& K, double dt) {
  FormField sigma = zero_like(K);
  for (std::size_t pt = 0; pt < K.base().num_points(); ++pt)
    sigma.at(0, pt) =
        pointwise::metric_selfadjoint_function(h0.at(pt), K.at(0, pt), [dt](double x) { return std::exp(-dt * x); });
  return sigma;
}

Velocity velocity_from(const HiggsPair& pair, const FormField& K) {
  return {dbar_flat(K) + right_multiply(pair.a(), K) - left_multiply(K, pair.a()), -commutator0(K, pair.phi())};
}

HiggsPair pair_update(const HiggsPair& pair, const FormField& K, double dt, YmhScheme scheme) {
  if (scheme == YmhScheme::GaugeExponential) return complex_gauge_apply(gauge_exponential(pair.h0, K, dt), pair);
  Velocity v = velocity_from(pair, K);
  return {HiggsStructure(pair.a() + dt * v.a_dot, pair.phi() + dt * v.phi_dot), pair.h0};
}

}  // namespace

HiggsBundleState donaldson_step(const HiggsBundleState& state, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("donaldson step: dt must be positive");
  return donaldson_update(state, einstein_deviation(state), dt);
}

Velocity ymh_velocity(const HiggsPair& pair) { return velocity_from(pair, einstein_deviation(pair.as_state())); }

HiggsPair ymh_step(const HiggsPair& pair, double dt, YmhScheme scheme) {
  if (!(dt > 0.0)) throw InvalidInput("ymh step: dt must be positive");
  return pair_update(pair, einstein_deviation(pair.as_state()), dt, scheme);
}

OneForm kahler_codifferential(const FormField& f11, const HiggsPair& pair) {
  const FormField L = contract_lambda(f11);
  const FormField b = chern_connection(pair.h0, pair.a());
  return {kI * (del_flat(L) - commutator0(L, b)),
          -kI * (dbar_flat(L) - commutator0(L, pair.a()))};
}

HiggsPair complex_gauge_apply(const FormField& sigma, const HiggsPair& pair) {
  if (!(sigma.degree() == Bidegree{0, 0}) || sigma.rows() != pair.rank() || !sigma.square())
    throw InvalidInput("gauge action: sigma must be a rank-matching (0,0)-form");
  FormField inv = zero_like(sigma);
  for (std::size_t pt = 0; pt < sigma.base().num_points(); ++pt) {
    const Mat s = sigma.at(0, pt);
    Eigen::JacobiSVD<Mat> svd(s);
    const auto& sv = svd.singularValues();
    if (!s.allFinite() || !(sv(sv.size() - 1) > 1e-12 * sv(0)))
      throw InvalidInput("gauge action: sigma is singular at grid point " + std::to_string(pt));
    inv.at(0, pt) = s.inverse();
  }
  FormField a = right_multiply(left_multiply(sigma, pair.a()), inv) - right_multiply(dbar_flat(sigma), inv);
  FormField phi = right_multiply(left_multiply(sigma, pair.phi()), inv);
  return {HiggsStructure(std::move(a), std::move(phi)), pair.h0};
}

FormField gauge_from_metric(const HermitianMetric& h0, const HermitianMetric& h) {
  if (h0.rank() != h.rank() || !(h0.base() == h.base())) throw InvalidInput("gauge from metric: shape mismatch");
  FormField g(h.base(), h.rank(), {0, 0});
  for (std::size_t pt = 0; pt < h.base().num_points(); ++pt) {
    const Mat H0 = h0.at(pt);
    const Mat rel = h0.inverse_at(pt) * h.at(pt);
    const auto ge = pointwise::generalized_eigen(h.at(pt), H0);
    if (!(ge.values(0) > 0.0))
      throw InvalidInput("gauge from metric: H0^{-1} H has non-positive spectrum at grid point " + std::to_string(pt));
    const Mat s = pointwise::metric_selfadjoint_function(H0, rel, [](double x) { return std::sqrt(x); });
    // g^{*H0} g = H0^{-1} g^dagger H0 g
    const Mat check = h0.inverse_at(pt) * s.adjoint() * H0 * s;
    if ((check - rel).norm() > 1e-10 * (1.0 + rel.norm()))
      throw InvalidInput("gauge from metric: square root check failed at grid point " + std::to_string(pt));
    g.at(0, pt) = s;
  }
  return g;
}

// ---------------------------------------------------------------- traces

void FlowTrace::write_csv(std::ostream& os) const {
  os << "t,ymh_energy,dev_l2,dev_sup,e_sup,phi_sup,dt,residual_integrability,residual_holomorphy,residual_symmetry\n";
  char buf[64];
  auto put = [&](double v, bool last) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << (last ? '\n' : ',');
  };
  for (const TraceRow& r : rows) {
    put(r.t, false);
    put(r.ymh_energy, false);
    put(r.dev_l2, false);
    put(r.dev_sup, false);
    put(r.e_sup, false);
    put(r.phi_sup, false);
    put(r.dt, false);
    put(r.residual_integrability, false);
    put(r.residual_holomorphy, false);
    put(r.residual_symmetry, true);
  }
}

double FlowTrace::decay_exponent(double TraceRow::*column, double t_min) const {
  std::vector<std::pair<double, double>> pts;
  for (const TraceRow& r : rows)
    if (r.t >= t_min && r.t > 0.0 && r.*column > 0.0) pts.emplace_back(std::log(r.t), std::log(r.*column));
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : pts) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(pts.size());
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return -(m * sxy - sx * sy) / denom;
}

nlohmann::json FlowTrace::summary() const {
  nlohmann::json j;
  if (rows.empty()) return j;
  const TraceRow& f = rows.back();
  const TraceRow& i = rows.front();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  j["samples"] = rows.size();
  j["initial"] = {{"t", i.t}, {"ymh_energy", i.ymh_energy}, {"dev_sup", i.dev_sup}, {"phi_sup", i.phi_sup}};
  j["final"] = {{"t", f.t},
                {"ymh_energy", f.ymh_energy},
                {"dev_l2", f.dev_l2},
                {"dev_sup", f.dev_sup},
                {"e_sup", f.e_sup},
                {"phi_sup", f.phi_sup},
                {"dt", f.dt},
                {"residual_integrability", f.residual_integrability},
                {"residual_holomorphy", f.residual_holomorphy},
                {"residual_symmetry", f.residual_symmetry}};
  j["decay_exponent"] = {{"ymh_energy", num(decay_exponent(&TraceRow::ymh_energy))},
                         {"dev_sup", num(decay_exponent(&TraceRow::dev_sup))},
                         {"e_sup", num(decay_exponent(&TraceRow::e_sup))}};
  double worst = 0.0;
  for (std::size_t k = 1; k < step_energies.size(); ++k)
    worst = std::max(worst, step_energies[k] - step_energies[k - 1]);
  j["max_step_energy_increase"] = worst;
  return j;
}

double stable_step(const TorusBase& base) {
  const double N = base.resolution();
  return 0.9 / (base.dim() * N * N);
}

std::vector<long long> sample_steps(const FlowOptions& opt) {
  if (!(opt.dt > 0.0) || !(opt.T >= 0.0)) throw InvalidInput("flow: need dt > 0 and T >= 0");
  const long long total = std::llround(opt.T / opt.dt);
  if (std::abs(total * opt.dt - opt.T) > 1e-9 * std::max(1.0, opt.T))
    throw InvalidInput("flow: T must be an integer multiple of dt");
  std::vector<long long> steps{0};
  for (long long k = 1; k < total; k *= 2) steps.push_back(k);
  for (double s : opt.samples) {
    if (!(s >= 0.0) || s > opt.T) throw InvalidInput("flow: sample time outside [0, T]");
    steps.push_back(std::llround(s / opt.dt));
  }
  steps.push_back(total);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  return steps;
}

namespace {

// Shared driver: State is HiggsBundleState (metric flow) or HiggsPair.
template <class State, class ToBundle, class Update>
std::pair<FlowTrace, State> drive(const State& initial, const FlowOptions& opt, ToBundle to_bundle, Update update) {
  if (opt.growth_limit <= 1.0) throw InvalidInput("flow: growth limit must exceed 1");
  const std::vector<long long> samples = sample_steps(opt);
  const long long total = samples.back();
  constexpr double kFloor = 1e-8;

  FlowTrace trace;
  State state = initial;
  Evaluation ev = evaluate(to_bundle(state));
  double dt_used = opt.dt;
  std::size_t next_sample = 0;

  auto record = [&](long long k) {
    const ValidityReport v = validate(to_bundle(state).structure());
    trace.rows.push_back({k * opt.dt, ev.energy, ev.dev_l2, ev.dev_sup, ev.e_sup, ev.phi_sup, dt_used,
                          v.integrability, v.holomorphicity, v.symmetry});
  };
  auto finite = [](const Evaluation& e) {
    return std::isfinite(e.energy) && std::isfinite(e.dev_sup) && std::isfinite(e.e_sup) && std::isfinite(e.phi_sup);
  };

  // Advances by h from (state, ev), splitting into halves while the deviation grows too fast.
  std::function<void(double, int)> advance = [&](double h, int depth) {
    std::optional<State> next;
    try {
      next.emplace(update(state, ev.deviation, h));
    } catch (const InvalidInput&) {
      next.reset();
    }
    if (next) {
      Evaluation nev = evaluate(to_bundle(*next));
      if (finite(nev) && nev.dev_sup <= opt.growth_limit * std::max(ev.dev_sup, kFloor)) {
        state = std::move(*next);
        ev = std::move(nev);
        dt_used = std::min(dt_used, h);
        return;
      }
    }
    if (depth >= opt.max_halvings)
      throw FlowBlowup("flow: step rejected after " + std::to_string(depth) + " halvings", 0.0, to_bundle(state));
    advance(0.5 * h, depth + 1);
    advance(0.5 * h, depth + 1);
  };

  if (opt.on_step) opt.on_step(0.0, to_bundle(state), ev);
  record(0);
  ++next_sample;
  int substeps = 1;
  if (opt.stability_substeps) {
    const double limit = stable_step(to_bundle(state).base());
    while (opt.dt / substeps > limit) substeps *= 2;
  }
  for (long long k = 1; k <= total; ++k) {
    trace.step_energies.push_back(ev.energy);
    try {
      for (int s = 0; s < substeps; ++s) advance(opt.dt / substeps, 0);
    } catch (const FlowBlowup& b) {
      throw FlowBlowup(b.what(), (k - 1) * opt.dt, b.last_healthy);
    }
    if (opt.on_step) opt.on_step(k * opt.dt, to_bundle(state), ev);
    if (next_sample < samples.size() && samples[next_sample] == k) {
      record(k);
      dt_used = opt.dt;
      ++next_sample;
    }
  }
  trace.step_energies.push_back(ev.energy);
  return {std::move(trace), std::move(state)};
}

}  // namespace

DonaldsonResult run_donaldson(const HiggsBundleState& initial, const FlowOptions& opt) {
  auto [trace, state] = drive(
      initial, opt, [](const HiggsBundleState& s) -> const HiggsBundleState& { return s; },
      [](const HiggsBundleState& s, const FormField& K, double h) { return donaldson_update(s, K, h); });
  return {std::move(trace), std::move(state)};
}

YmhResult run_ymh(const HiggsPair& initial, const FlowOptions& opt) {
  auto [trace, pair] = drive(
      initial, opt, [](const HiggsPair& p) { return p.as_state(); },
      [&opt](const HiggsPair& p, const FormField& K, double h) {
        HiggsPair next = pair_update(p, K, h, opt.scheme);
        if (!all_finite(next.a()) || !all_finite(next.phi())) throw InvalidInput("ymh: non-finite pair");
        return next;
      });
  return {std::move(trace), std::move(pair)};
}

// ---------------------------------------------------------- equivalence

namespace {

struct SideNorms {
  std::vector<double> del_phi, dbar_phi_adj, curvature, contracted;
};

SideNorms side_norms(const HiggsBundleState& s) {
  const HitchinSimpsonCurvature F = hitchin_simpson_curvature(s);
  const FormField tot = F.total_11();
  return {norm_sq_or_zero(F.del_phi, s.metric()), norm_sq_or_zero(F.dbar_phi_adjoint, s.metric()),
          pointwise_norm_sq(tot, s.metric()), pointwise_norm_sq(kI * contract_lambda(tot), s.metric())};
}

double sup_gap(const std::vector<double>& x, const std::vector<double>& y) {
  double gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) gap = std::max(gap, std::abs(x[i] - y[i]));
  return gap;
}

double peak(const std::vector<double>& x) { return x.empty() ? 0.0 : *std::max_element(x.begin(), x.end()); }

struct Gaps {
  double del_phi, curvature, contracted;
};

Gaps gaps(const SideNorms& m, const SideNorms& p) {
  return {std::max({sup_gap(m.del_phi, p.del_phi), sup_gap(m.del_phi, m.dbar_phi_adj),
                    sup_gap(m.del_phi, p.dbar_phi_adj)}),
          sup_gap(m.curvature, p.curvature), sup_gap(m.contracted, p.contracted)};
}

double ratio_or_zero(double gap, double scale) { return scale > 1e-300 ? gap / scale : 0.0; }

double entry_gap(const FormField& x, const FormField& y) {
  double gap = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < x.raw().size(); ++i) {
    gap = std::max(gap, std::abs(x.raw()[i] - y.raw()[i]));
    scale = std::max({scale, std::abs(x.raw()[i]), std::abs(y.raw()[i])});
  }
  return gap / std::max(1.0, scale);
}

}  // namespace

EquivalenceReport flow_equivalence_check(const HiggsBundleState& initial, double T, double dt, YmhScheme scheme) {
  if (!validate(initial.structure()).valid) throw InvalidInput("flow equivalence: initial state is not valid");
  FlowOptions opt;
  opt.dt = dt;
  opt.T = T;
  opt.scheme = scheme;
  const std::vector<long long> samples = sample_steps(opt);
  const HiggsPair pair0(initial);

  std::vector<HiggsBundleState> metric_side;
  std::vector<HiggsPair> pair_side;
  std::size_t idx = 0;
  opt.on_step = [&](double t, const HiggsBundleState& s, const Evaluation&) {
    if (idx < samples.size() && std::llround(t / dt) == samples[idx]) {
      metric_side.push_back(s);
      ++idx;
    }
  };
  run_donaldson(initial, opt);
  idx = 0;
  opt.on_step = [&](double t, const HiggsBundleState& s, const Evaluation&) {
    if (idx < samples.size() && std::llround(t / dt) == samples[idx]) {
      pair_side.emplace_back(s);
      ++idx;
    }
  };
  run_ymh(pair0, opt);

  EquivalenceReport rep;
  std::vector<Gaps> direct, transported_gaps;
  double peak_del = 0.0, peak_curv = 0.0, peak_contr = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    EquivalenceSample e;
    e.t = samples[k] * dt;
    const HiggsBundleState& hs = metric_side[k];
    const FormField g = gauge_from_metric(initial.metric(), hs.metric());
    const HiggsPair transported = complex_gauge_apply(g, pair0);
    const SideNorms m = side_norms(hs);
    const SideNorms p = side_norms(pair_side[k].as_state());
    direct.push_back(gaps(m, p));
    transported_gaps.push_back(gaps(m, side_norms(transported.as_state())));
    peak_del = std::max({peak_del, peak(m.del_phi), peak(p.del_phi)});
    peak_curv = std::max({peak_curv, peak(m.curvature), peak(p.curvature)});
    peak_contr = std::max({peak_contr, peak(m.contracted), peak(p.contracted)});
    e.curvature_local = ratio_or_zero(direct.back().curvature, std::max(peak(m.curvature), peak(p.curvature)));

    FormField ginv = zero_like(g);
    for (std::size_t pt = 0; pt < g.base().num_points(); ++pt) ginv.at(0, pt) = Mat(g.at(0, pt)).inverse();
    const FormField conj = right_multiply(left_multiply(g, hitchin_simpson_curvature(hs).total_11()), ginv);
    const FormField pair_f = hitchin_simpson_curvature(transported.as_state()).total_11();
    e.conjugation = entry_gap(conj, pair_f);
    e.pair_discrepancy =
        std::max(entry_gap(transported.a(), pair_side[k].a()), entry_gap(transported.phi(), pair_side[k].phi()));
    e.energy_metric = ymh_energy(hs);
    e.energy_pair = ymh_energy(pair_side[k]);
    rep.samples.push_back(e);
  }
  for (std::size_t k = 0; k < rep.samples.size(); ++k) {
    EquivalenceSample& e = rep.samples[k];
    e.del_phi = ratio_or_zero(direct[k].del_phi, peak_del);
    e.curvature = ratio_or_zero(direct[k].curvature, peak_curv);
    e.contracted = ratio_or_zero(direct[k].contracted, peak_contr);
    e.transported_del_phi = ratio_or_zero(transported_gaps[k].del_phi, peak_del);
    e.transported_curvature = ratio_or_zero(transported_gaps[k].curvature, peak_curv);
    e.transported_contracted = ratio_or_zero(transported_gaps[k].contracted, peak_contr);
    rep.max_norm_residual = std::max({rep.max_norm_residual, e.del_phi, e.curvature, e.contracted});
    rep.max_transported_residual = std::max(
        {rep.max_transported_residual, e.transported_del_phi, e.transported_curvature, e.transported_contracted});
    rep.max_conjugation = std::max(rep.max_conjugation, e.conjugation);
    rep.max_pair_discrepancy = std::max(rep.max_pair_discrepancy, e.pair_discrepancy);
  }
  return rep;
}

nlohmann::json EquivalenceReport::to_json() const {
  nlohmann::json j;
  j["max_norm_residual"] = max_norm_residual;
  j["max_transported_residual"] = max_transported_residual;
  j["max_conjugation_residual"] = max_conjugation;
  j["max_pair_discrepancy"] = max_pair_discrepancy;
  for (const auto& s : samples)
    j["samples"].push_back({{"t", s.t},
                            {"del_phi", s.del_phi},
                            {"curvature", s.curvature},
                            {"contracted", s.contracted},
                            {"transported_del_phi", s.transported_del_phi},
                            {"transported_curvature", s.transported_curvature},
                            {"transported_contracted", s.transported_contracted},
                            {"curvature_local", s.curvature_local},
                            {"conjugation", s.conjugation},
                            {"pair_discrepancy", s.pair_discrepancy},
                            {"energy_metric", s.energy_metric},
                            {"energy_pair", s.energy_pair}});
  return j;
}

}  // namespace higgsflow
