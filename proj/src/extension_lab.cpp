#include "higgsflow/extension_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "higgsflow/pointwise.hpp"

namespace higgsflow {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// sup over points and components of the Frobenius norm of a per-point matrix expression.
template <class F>
double sup_over(const FormField& like, F&& fn) {
  double m = 0.0;
  for (int c = 0; c < like.components(); ++c)
    for (std::size_t pt = 0; pt < like.base().num_points(); ++pt) m = std::max(m, fn(c, pt));
  return m;
}

std::vector<double> norm_sq_parts(const std::vector<const FormField*>& parts, const HermitianMetric& row,
                                  const HermitianMetric& col) {
  std::vector<double> total(row.base().num_points(), 0.0);
  for (const FormField* f : parts) {
    if (f->components() == 0) continue;
    const auto p = pointwise_norm_sq(*f, row, col);
    for (std::size_t i = 0; i < total.size(); ++i) total[i] += p[i];
  }
  return total;
}

void add_into(std::vector<double>& acc, const std::vector<double>& x, double w = 1.0) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += w * x[i];
}

double sup_sqrt(const std::vector<double>& x) { return std::sqrt(std::max(0.0, sup_value(x))); }

// Scalar field tr((i / 2pi) Lambda X) for a square (1,1)-form.
std::vector<double> omega_trace(const FormField& x) {
  const auto tr = trace_field(contract_lambda(x));
  std::vector<double> out(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) out[i] = (kI * tr[i]).real() / kTwoPi;
  return out;
}

HermitianMetric block_metric(const std::vector<const FormField*>& diag, const BlockSplit& split,
                             const TorusBase& base, const std::vector<double>& scales) {
  FormField h(base, split.offsets.back() + split.sizes.back(), {0, 0});
  for (int k = 0; k < split.blocks(); ++k)
    for (std::size_t pt = 0; pt < base.num_points(); ++pt)
      h.at(0, pt).block(split.offsets[k], split.offsets[k], split.sizes[k], split.sizes[k]) =
          scales[k] * diag[k]->at(0, pt);
  return HermitianMetric(std::move(h));
}

// f^{-dagger} Ht f^{-1}
HermitianMetric push_forward_metric(const AdaptedPullback& pb, const HermitianMetric& ht) {
  FormField h = zero_like(ht.field());
  for (std::size_t pt = 0; pt < h.base().num_points(); ++pt) {
    const Mat fi = pb.frame_inv.at(0, pt);
    const Mat m = fi.adjoint() * Mat(ht.at(pt)) * fi;
    h.at(0, pt) = 0.5 * (m + m.adjoint());
  }
  return HermitianMetric(std::move(h));
}

FormField conjugate_into_frame(const AdaptedPullback& pb, const FormField& x) {
  if (x.components() == 0) return x;
  return right_multiply(left_multiply(pb.frame_inv, x), pb.frame);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

// ------------------------------------------------------------ sub-bundles

HiggsSubbundle::HiggsSubbundle(FormField projector, int p) : pi(std::move(projector)), rank(p) {
  if (!(pi.degree() == Bidegree{0, 0}) || !pi.square()) throw InvalidInput("sub-bundle: projector must be a square (0,0)-form");
  if (p < 0 || p > pi.rows()) throw InvalidInput("sub-bundle: rank out of range");
}

HiggsSubbundle HiggsSubbundle::from_span(const HermitianMetric& h, const Mat& V) {
  if (V.rows() != h.rank() || V.cols() < 1) throw InvalidInput("sub-bundle: spanning vectors have the wrong shape");
  FormField frame(h.base(), h.rank(), static_cast<int>(V.cols()), {0, 0});
  for (std::size_t pt = 0; pt < h.base().num_points(); ++pt) frame.at(0, pt) = V;
  return from_frame(h, frame);
}

HiggsSubbundle HiggsSubbundle::from_frame(const HermitianMetric& h, const FormField& frame) {
  if (!(frame.degree() == Bidegree{0, 0}) || frame.rows() != h.rank())
    throw InvalidInput("sub-bundle: frame must be an r x p (0,0)-form");
  FormField pi(h.base(), h.rank(), {0, 0});
  for (std::size_t pt = 0; pt < h.base().num_points(); ++pt) {
    const Mat V = frame.at(0, pt);
    const Mat H = h.at(pt);
    const Mat G = V.adjoint() * H * V;
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success)
      throw InvalidInput("sub-bundle: frame is degenerate at grid point " + std::to_string(pt));
    pi.at(0, pt) = V * llt.solve(Mat(V.adjoint() * H));
  }
  return {std::move(pi), static_cast<int>(frame.cols())};
}

double SubbundleResiduals::worst() const { return std::max({idempotency, selfadjoint, rank, invariance, holomorphy}); }

nlohmann::json SubbundleResiduals::to_json() const {
  return {{"idempotency", idempotency}, {"selfadjoint", selfadjoint}, {"rank", rank},
          {"invariance", invariance},   {"holomorphy", holomorphy}};
}

SubbundleResiduals subbundle_residuals(const HiggsBundleState& state, const HiggsSubbundle& sub) {
  const FormField& pi = sub.pi;
  if (pi.rows() != state.rank() || !(pi.base() == state.base()))
    throw InvalidInput("sub-bundle: projector does not match the bundle");
  const int r = state.rank();
  const Mat I = Mat::Identity(r, r);
  const HermitianMetric& h = state.metric();
  SubbundleResiduals out;
  out.idempotency = sup_over(pi, [&](int, std::size_t pt) {
    const Mat p = pi.at(0, pt);
    return (p * p - p).norm();
  });
  out.selfadjoint = sup_over(pi, [&](int, std::size_t pt) {
    const Mat p = pi.at(0, pt), H = h.at(pt);
    return (H * p - p.adjoint() * H).norm() / (1.0 + H.norm());
  });
  out.rank = sup_over(pi, [&](int, std::size_t pt) { return std::abs(pi.at(0, pt).trace() - double(sub.rank)); });
  const FormField& phi = state.phi();
  out.invariance = sup_over(phi, [&](int c, std::size_t pt) {
    const Mat p = pi.at(0, pt);
    return ((I - p) * phi.at(c, pt) * p).norm();
  });
  const FormField d = dbar_flat(pi) + wedge(state.a(), pi) - wedge(pi, state.a());
  out.holomorphy = sup_over(d, [&](int c, std::size_t pt) {
    const Mat p = pi.at(0, pt);
    return ((I - p) * d.at(c, pt) * p).norm();
  });
  return out;
}

double default_subbundle_tolerance(const HiggsBundleState& state) {
  return 1e-8 * (1.0 + std::max({sup_abs_entry(state.a()), sup_abs_entry(state.phi()),
                                 sup_abs_entry(state.metric().field())}));
}

// ------------------------------------------------------------ blocks

BlockSplit::BlockSplit(std::vector<int> s) : sizes(std::move(s)) {
  int o = 0;
  for (int k : sizes) {
    if (k < 1) throw InvalidInput("block split: empty block");
    offsets.push_back(o);
    o += k;
  }
}

FormField BlockSplit::block(const FormField& f, int i, int j) const {
  FormField out(f.base(), sizes[i], sizes[j], f.degree());
  for (int c = 0; c < f.components(); ++c)
    for (std::size_t pt = 0; pt < f.base().num_points(); ++pt)
      out.at(c, pt) = f.at(c, pt).block(offsets[i], offsets[j], sizes[i], sizes[j]);
  return out;
}

FormField BlockSplit::assemble(const std::vector<std::vector<const FormField*>>& blocks, const TorusBase& base,
                               Bidegree degree) const {
  const int r = offsets.back() + sizes.back();
  FormField out(base, r, r, degree);
  for (int i = 0; i < this->blocks(); ++i)
    for (int j = 0; j < this->blocks(); ++j) {
      const FormField* b = blocks[i][j];
      if (!b) continue;
      if (b->rows() != sizes[i] || b->cols() != sizes[j] || !(b->degree() == degree))
        throw InvalidInput("block assembly: block has the wrong shape");
      for (int c = 0; c < b->components(); ++c)
        for (std::size_t pt = 0; pt < base.num_points(); ++pt)
          out.at(c, pt).block(offsets[i], offsets[j], sizes[i], sizes[j]) = b->at(c, pt);
    }
  return out;
}

AdaptedPullback adapted_pullback(const HiggsBundleState& state, const std::vector<HiggsSubbundle>& levels) {
  const TorusBase& base = state.base();
  const int r = state.rank();
  const Mat I = Mat::Identity(r, r);
  std::vector<int> sizes;
  int prev_rank = 0;
  for (const auto& s : levels) {
    if (s.rank <= prev_rank || s.rank >= r) throw InvalidInput("adapted frame: ranks must increase strictly below r");
    sizes.push_back(s.rank - prev_rank);
    prev_rank = s.rank;
  }
  sizes.push_back(r - prev_rank);
  BlockSplit split(sizes);

  // columns of level k: (P_k - P_{k-1}) V_k with V_k fixed from the first grid point
  FormField frame(base, r, {0, 0});
  for (int k = 0; k < split.blocks(); ++k) {
    auto proj = [&](std::size_t pt) -> Mat {
      const Mat hi = k < static_cast<int>(levels.size()) ? Mat(levels[k].pi.at(0, pt)) : I;
      const Mat lo = k > 0 ? Mat(levels[k - 1].pi.at(0, pt)) : Mat(Mat::Zero(r, r));
      return hi - lo;
    };
    Eigen::JacobiSVD<Mat> svd(proj(0), Eigen::ComputeFullU);
    const Mat V = svd.matrixU().leftCols(split.sizes[k]);
    for (std::size_t pt = 0; pt < base.num_points(); ++pt)
      frame.at(0, pt).middleCols(split.offsets[k], split.sizes[k]) = proj(pt) * V;
  }
  FormField inv = zero_like(frame);
  for (std::size_t pt = 0; pt < base.num_points(); ++pt) {
    const Mat f = frame.at(0, pt);
    Eigen::JacobiSVD<Mat> svd(f);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-8 * sv(0)))
      throw InvalidInput("adapted frame: degenerate at grid point " + std::to_string(pt) +
                         " (sub-bundles not nested or rank not constant)");
    inv.at(0, pt) = f.inverse();
  }
  FormField a = left_multiply(inv, dbar_flat(frame) + wedge(state.a(), frame));
  FormField phi = right_multiply(left_multiply(inv, state.phi()), frame);
  FormField h(base, r, {0, 0});
  for (std::size_t pt = 0; pt < base.num_points(); ++pt) {
    const Mat f = frame.at(0, pt);
    const Mat m = f.adjoint() * Mat(state.metric().at(pt)) * f;
    h.at(0, pt) = 0.5 * (m + m.adjoint());
  }
  double lower = 0.0, off = 0.0;
  for (int i = 0; i < split.blocks(); ++i)
    for (int j = 0; j < split.blocks(); ++j) {
      if (i > j) lower = std::max({lower, sup_abs_entry(split.block(a, i, j)), sup_abs_entry(split.block(phi, i, j))});
      if (i != j) off = std::max(off, sup_abs_entry(split.block(h, i, j)));
    }
  off /= std::max(1.0, sup_abs_entry(h));
  return {std::move(split), std::move(frame), std::move(inv), std::move(a), std::move(phi), std::move(h), lower, off};
}

nlohmann::json ExtensionData::to_json() const {
  return {{"p", p},
          {"q", q},
          {"sup_gamma", sup_abs_entry(gamma)},
          {"sup_zeta", sup_abs_entry(zeta)},
          {"sup_phi_s", sup_abs_entry(phi_s)},
          {"sup_phi_q", sup_abs_entry(phi_q)},
          {"lower_residual", pullback.lower_residual},
          {"metric_offdiagonal", pullback.metric_offdiagonal},
          {"subbundle", residuals.to_json()}};
}

ExtensionData split_extension(const HiggsBundleState& state, const HiggsSubbundle& sub, std::optional<double> tolerance) {
  const double tol = tolerance.value_or(default_subbundle_tolerance(state));
  const SubbundleResiduals res = subbundle_residuals(state, sub);
  if (res.worst() > tol)
    throw InvalidInput("split extension: sub-bundle violates its invariants (" + res.to_json().dump() +
                       ", tolerance " + fmt(tol) + ")");
  AdaptedPullback pb = adapted_pullback(state, {sub});
  if (pb.lower_residual > tol || pb.metric_offdiagonal > tol)
    throw InvalidInput("split extension: pulled-back structure is not block triangular (lower block " +
                       fmt(pb.lower_residual) + ", metric off-diagonal " + fmt(pb.metric_offdiagonal) + ")");
  const BlockSplit& s = pb.split;
  FormField a_s = s.block(pb.a, 0, 0), a_q = s.block(pb.a, 1, 1), gamma = s.block(pb.a, 0, 1);
  FormField phi_s = s.block(pb.phi, 0, 0), phi_q = s.block(pb.phi, 1, 1), zeta = s.block(pb.phi, 0, 1);
  HermitianMetric h_s(s.block(pb.h, 0, 0)), h_q(s.block(pb.h, 1, 1));
  const int p = s.sizes[0], q = s.sizes[1];
  return {state.structure(), std::move(pb), p, q, std::move(a_s), std::move(a_q), std::move(gamma),
          std::move(phi_s), std::move(phi_q), std::move(zeta), std::move(h_s), std::move(h_q), res};
}

// ------------------------------------------------------------ Gauss-Codazzi

nlohmann::json GaussCodazziReport::to_json() const {
  return {{"residual", residual}, {"scale", scale}, {"relative", relative()}};
}

GaussCodazziReport gauss_codazzi_blocks(const HiggsBundleState& state, const HiggsSubbundle& sub) {
  const ExtensionData x = split_extension(state, sub);
  const TorusBase& base = state.base();
  const HermitianMetric &hs = x.h_s, &hq = x.h_q;
  const FormField &g = x.gamma, &z = x.zeta;
  const FormField bs = chern_connection(hs, x.a_s), bq = chern_connection(hq, x.a_q);
  const FormField gs = form_adjoint(g, hs, hq), zs = form_adjoint(z, hs, hq);
  const FormField ps = higgs_adjoint(x.phi_s, hs), pq = higgs_adjoint(x.phi_q, hq);
  const FormField fs = curvature(hs, x.a_s), fq = curvature(hq, x.a_q);

  // (1,1)
  const FormField tl11 = fs + graded_bracket(x.phi_s, ps) - wedge(g, gs) + wedge(z, zs);
  const FormField tr11 = covariant_del(g, bs, bq) + wedge(z, pq) + wedge(ps, z);
  const FormField bl11 = -covariant_dbar(gs, x.a_q, x.a_s) + wedge(zs, x.phi_s) + wedge(x.phi_q, zs);
  const FormField br11 = fq + graded_bracket(x.phi_q, pq) - wedge(gs, g) + wedge(zs, z);
  // (2,0)
  const FormField tl20 = covariant_del(x.phi_s, bs, bs) - wedge_or_empty(z, gs);
  const FormField tr20 = covariant_del(z, bs, bq);
  const FormField bl20 = -(wedge_or_empty(gs, x.phi_s) + wedge_or_empty(x.phi_q, gs));
  const FormField br20 = covariant_del(x.phi_q, bq, bq) - wedge_or_empty(gs, z);
  // (0,2)
  const FormField tl02 = covariant_dbar(ps, x.a_s, x.a_s) + wedge_or_empty(g, zs);
  const FormField tr02 = wedge_or_empty(g, pq) + wedge_or_empty(ps, g);
  const FormField bl02 = covariant_dbar(zs, x.a_q, x.a_s);
  const FormField br02 = covariant_dbar(pq, x.a_q, x.a_q) + wedge_or_empty(zs, g);

  const BlockSplit& s = x.pullback.split;
  GaussCodazziReport rep{
      {s.assemble({{&tl11, &tr11}, {&bl11, &br11}}, base, {1, 1}),
       s.assemble({{&tl20, &tr20}, {&bl20, &br20}}, base, {2, 0}),
       s.assemble({{&tl02, &tr02}, {&bl02, &br02}}, base, {0, 2})},
      {FormField(base, state.rank(), {1, 1}), FormField(base, state.rank(), {2, 0}),
       FormField(base, state.rank(), {0, 2})},
      0.0,
      0.0};
  const HitchinSimpsonCurvature F = hitchin_simpson_curvature(state);
  rep.ambient = {conjugate_into_frame(x.pullback, F.total_11()), conjugate_into_frame(x.pullback, F.del_phi),
                 conjugate_into_frame(x.pullback, F.dbar_phi_adjoint)};
  const HermitianMetric ht(x.pullback.h);
  const FormField d11 = rep.assembled.f11 - rep.ambient.f11;
  const FormField d20 = rep.assembled.f20 - rep.ambient.f20;
  const FormField d02 = rep.assembled.f02 - rep.ambient.f02;
  rep.residual = sup_sqrt(norm_sq_parts({&d11, &d20, &d02}, ht, ht));
  rep.scale = sup_sqrt(norm_sq_parts({&rep.ambient.f11, &rep.ambient.f20, &rep.ambient.f02}, ht, ht));
  return rep;
}

// ------------------------------------------------------------ rho scaling

ScaledMetric scaled_extension_metric(const ExtensionData& ext, const HermitianMetric& h_s,
                                     const HermitianMetric& h_q, double rho) {
  if (!(rho > 0.0)) throw InvalidInput("scaled metric: rho must be positive");
  if (h_s.rank() != ext.p || h_q.rank() != ext.q) throw InvalidInput("scaled metric: block metric ranks do not match");
  const BlockSplit& s = ext.pullback.split;
  const TorusBase& base = h_s.base();
  const double w = 1.0 / (rho * rho);
  const HermitianMetric ht = block_metric({&h_s.field(), &h_q.field()}, s, base, {1.0, w});
  ScaledMetric out{push_forward_metric(ext.pullback, ht), 0.0, 0.0};
  FormField hq_scaled = h_q.field();
  hq_scaled *= w;
  const HermitianMetric hq_rho(std::move(hq_scaled));
  for (auto [x, gap] : {std::pair{&ext.gamma, &out.gamma_adjoint_gap}, std::pair{&ext.zeta, &out.zeta_adjoint_gap}}) {
    const FormField scaled = form_adjoint(*x, h_s, hq_rho);
    const FormField one = form_adjoint(*x, h_s, h_q);
    double m = 0.0;
    for (std::size_t i = 0; i < scaled.raw().size(); ++i)
      m = std::max(m, std::abs(scaled.raw()[i] - rho * rho * one.raw()[i]));
    *gap = m;
  }
  return out;
}

void RhoSweep::write_csv(std::ostream& os) const {
  os << "rho,sup_A,sup_B1,sup_C1,sup_F,model\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.rho, r.sup_a, r.sup_b1, r.sup_c1,
                  r.sup_f, r.model);
    os << buf;
  }
}

void RhoSweep::write_two_column_csv(std::ostream& os) const {
  os << "rho,sup_F\n";
  char buf[80];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r.rho, r.sup_f);
    os << buf;
  }
}

nlohmann::json RhoSweep::to_json() const {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& r : rows)
    t.push_back({{"rho", r.rho}, {"sup_A", r.sup_a}, {"sup_B1", r.sup_b1}, {"sup_C1", r.sup_c1}, {"sup_F", r.sup_f},
                 {"model", r.model}});
  return {{"rows", t}, {"floor", floor}, {"slope", std::isfinite(slope) ? nlohmann::json(slope) : nlohmann::json(nullptr)}};
}

RhoSweep rho_sweep(const ExtensionData& ext, const HermitianMetric& h_s, const HermitianMetric& h_q,
                   const std::vector<double>& rhos) {
  const FormField &g = ext.gamma, &z = ext.zeta;
  const FormField bs = chern_connection(h_s, ext.a_s), bq = chern_connection(h_q, ext.a_q);
  const FormField gs = form_adjoint(g, h_s, h_q), zs = form_adjoint(z, h_s, h_q);
  const FormField ps = higgs_adjoint(ext.phi_s, h_s), pq = higgs_adjoint(ext.phi_q, h_q);

  // A: Hitchin-Simpson curvature of the two pieces
  std::vector<double> a2(h_s.base().num_points(), 0.0);
  for (const HiggsBundleState& piece : {HiggsBundleState(HiggsStructure(ext.a_s, ext.phi_s), h_s),
                                       HiggsBundleState(HiggsStructure(ext.a_q, ext.phi_q), h_q)}) {
    const HitchinSimpsonCurvature F = hitchin_simpson_curvature(piece);
    const FormField f11 = F.total_11();
    add_into(a2, norm_sq_parts({&f11, &F.del_phi, &F.dbar_phi_adjoint}, piece.metric(), piece.metric()));
  }
  // B_1: diag((zeta + gamma)(zeta^* - gamma^*), (zeta^* - gamma^*)(zeta + gamma))
  std::vector<double> b2(a2.size(), 0.0);
  {
    const FormField t11 = wedge(z, zs) - wedge(g, gs), t20 = -wedge_or_empty(z, gs), t02 = wedge_or_empty(g, zs);
    const FormField r11 = wedge(zs, z) - wedge(gs, g), r20 = -wedge_or_empty(gs, z), r02 = wedge_or_empty(zs, g);
    add_into(b2, norm_sq_parts({&t11, &t20, &t02}, h_s, h_s));
    add_into(b2, norm_sq_parts({&r11, &r20, &r02}, h_q, h_q));
  }
  // C_1: off-diagonal blocks
  std::vector<double> c2(a2.size(), 0.0);
  {
    const FormField t11 = covariant_del(g, bs, bq) + wedge(z, pq) + wedge(ps, z);
    const FormField t20 = covariant_del(z, bs, bq);
    const FormField t02 = wedge_or_empty(g, pq) + wedge_or_empty(ps, g);
    const FormField l11 = -covariant_dbar(gs, ext.a_q, ext.a_s) + wedge(zs, ext.phi_s) + wedge(ext.phi_q, zs);
    const FormField l20 = -(wedge_or_empty(gs, ext.phi_s) + wedge_or_empty(ext.phi_q, gs));
    const FormField l02 = covariant_dbar(zs, ext.a_q, ext.a_s);
    add_into(c2, norm_sq_parts({&t11, &t20, &t02}, h_s, h_q));
    add_into(c2, norm_sq_parts({&l11, &l20, &l02}, h_q, h_s));
  }

  RhoSweep sweep;
  sweep.floor = sup_sqrt(a2);
  for (double rho : rhos) {
    if (!(rho > 0.0) || rho > 1.0) throw InvalidInput("rho sweep: rho values must lie in (0, 1]");
    const ScaledMetric sm = scaled_extension_metric(ext, h_s, h_q, rho);
    RhoRow row;
    row.rho = rho;
    row.sup_a = sweep.floor;
    row.sup_b1 = sup_sqrt(b2);
    row.sup_c1 = sup_sqrt(c2);
    row.sup_f = hitchin_simpson_curvature({ext.ambient, sm.metric}).sup_norm(sm.metric);
    std::vector<double> m(a2.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = a2[i] + std::pow(rho, 4) * b2[i] + rho * rho * c2[i];
    row.model = sup_sqrt(m);
    sweep.rows.push_back(row);
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : sweep.rows)
    if (r.sup_f - sweep.floor > 0.0) pts.emplace_back(std::log(r.rho), std::log(r.sup_f - sweep.floor));
  sweep.slope = std::numeric_limits<double>::quiet_NaN();
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(pts.size());
    const double den = m * sxx - sx * sx;
    if (den != 0.0) sweep.slope = (m * sxy - sx * sy) / den;
  }
  return sweep;
}

// ------------------------------------------------------------ trace signs

nlohmann::json SecondFundamentalTraces::to_json() const {
  return {{"max_gamma_part", max_gamma_part},         {"min_zeta_part", min_zeta_part},
          {"min_combined", min_combined},             {"min_restriction_gap", min_restriction_gap},
          {"max_restricted_trace", max_restricted_trace}, {"epsilon", epsilon}};
}

SecondFundamentalTraces second_fundamental_traces(const HiggsBundleState& state, const HiggsSubbundle& sub) {
  const ExtensionData x = split_extension(state, sub);
  const FormField gs = form_adjoint(x.gamma, x.h_s, x.h_q), zs = form_adjoint(x.zeta, x.h_s, x.h_q);
  const auto gp = omega_trace(wedge(x.gamma, gs));
  const auto zp = omega_trace(wedge(x.zeta, zs));
  const HitchinSimpsonCurvature F = hitchin_simpson_curvature(state);
  const FormField restricted = x.pullback.split.block(conjugate_into_frame(x.pullback, F.total_11()), 0, 0);
  const auto rt = omega_trace(restricted);
  const auto fs = omega_trace(curvature(x.h_s, x.a_s));
  SecondFundamentalTraces t;
  t.max_gamma_part = *std::max_element(gp.begin(), gp.end());
  t.min_zeta_part = *std::min_element(zp.begin(), zp.end());
  t.min_combined = std::numeric_limits<double>::infinity();
  t.min_restriction_gap = std::numeric_limits<double>::infinity();
  t.max_restricted_trace = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gp.size(); ++i) {
    t.min_combined = std::min(t.min_combined, zp[i] - gp[i]);
    t.min_restriction_gap = std::min(t.min_restriction_gap, rt[i] - fs[i]);
    t.max_restricted_trace = std::max(t.max_restricted_trace, rt[i]);
  }
  t.epsilon = F.sup_norm(state.metric());
  return t;
}

// ------------------------------------------------------------ sections

nlohmann::json InvariantSectionReport::to_json() const {
  nlohmann::json eta = nlohmann::json::array();
  for (const cplx& e : eta_mean) eta.push_back({e.real(), e.imag()});
  return {{"holomorphy", holomorphy},       {"invariance", invariance}, {"invariance_relative", invariance_relative},
          {"eta_mean", eta},                {"positivity_min", positivity_min}, {"g_form_min", g_form_min},
          {"min_norm", min_norm},           {"positivity_ok", positivity_ok()}};
}

InvariantSectionReport invariant_section_check(const HiggsBundleState& state, const FormField& s) {
  if (!(s.degree() == Bidegree{0, 0}) || s.rows() != state.rank() || s.cols() != 1 || !(s.base() == state.base()))
    throw InvalidInput("invariant section: s must be an r x 1 (0,0)-form on the bundle's grid");
  if (sup_abs_entry(s) == 0.0) throw InvalidInput("invariant section: s is identically zero");
  const TorusBase& base = state.base();
  const HermitianMetric& h = state.metric();
  const HermitianMetric one = HermitianMetric::identity(base, 1);
  const int n = base.dim();
  const FormField& phi = state.phi();

  InvariantSectionReport rep;
  rep.holomorphy = sup_norm(dbar_flat(s) + wedge(state.a(), s), h, one);
  rep.eta_mean.assign(n, cplx(0.0));
  rep.positivity_min = std::numeric_limits<double>::infinity();
  rep.g_form_min = std::numeric_limits<double>::infinity();
  rep.min_norm = std::numeric_limits<double>::infinity();
  double sup_phi_s = 0.0;
  for (std::size_t pt = 0; pt < base.num_points(); ++pt) {
    const Mat H = h.at(pt), Hinv = h.inverse_at(pt);
    const Vec v = s.at(0, pt);
    const double ss = (v.adjoint() * H * v)(0, 0).real();
    rep.min_norm = std::min(rep.min_norm, std::sqrt(std::max(0.0, ss)));
    std::vector<Vec> G(n);
    std::vector<Mat> pj(n), pa(n);
    double res2 = 0.0, phis2 = 0.0;
    for (int j = 0; j < n; ++j) {
      pj[j] = phi.at(j, pt);
      pa[j] = Hinv * pj[j].adjoint() * H;
      const Vec w = pj[j] * v;
      const cplx eta = ss > 0.0 ? cplx((v.adjoint() * H * w)(0, 0)) / ss : cplx(0.0);
      rep.eta_mean[j] += eta / static_cast<double>(base.num_points());
      const Vec r = w - eta * v;
      // |dz|^2 = 2
      res2 += 2.0 * (r.adjoint() * H * r)(0, 0).real();
      phis2 += 2.0 * (w.adjoint() * H * w)(0, 0).real();
      G[j] = pa[j] * v - std::conj(eta) * v;
    }
    rep.invariance = std::max(rep.invariance, std::sqrt(std::max(0.0, res2)));
    sup_phi_s = std::max(sup_phi_s, std::sqrt(std::max(0.0, phis2)));
    Mat M(n, n), N(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        M(i, j) = (v.adjoint() * H * (pj[i] * pa[j] - pa[j] * pj[i]) * v)(0, 0);
        N(i, j) = (G[i].adjoint() * H * G[j])(0, 0);
      }
    // a unit tangent vector has coefficient norm^2 = 1 / |d/dz|^2 = 2
    rep.positivity_min = std::min(rep.positivity_min, 2.0 * pointwise::min_hermitian_eigenvalue(M));
    rep.g_form_min = std::min(rep.g_form_min, 2.0 * pointwise::min_hermitian_eigenvalue(N));
  }
  rep.invariance_relative = sup_phi_s > 0.0 ? rep.invariance / sup_phi_s : 0.0;
  return rep;
}

// ------------------------------------------------------------ filtrations

nlohmann::json QuotientCertificate::to_json() const {
  return {{"level", level},
          {"rank", rank},
          {"valid", validity.valid},
          {"subbundle", residuals.to_json()},
          {"initial", initial.to_json()},
          {"certificate", certificate.to_json()},
          {"verdict", certificate.verdict_line()}};
}

nlohmann::json FiltrationReport::to_json() const {
  nlohmann::json q = nlohmann::json::array();
  for (const auto& c : quotients) q.push_back(c.to_json());
  return {{"quotients", q},
          {"total", total.to_json()},
          {"quotient_sum", quotient_sum.to_json()},
          {"c1_additivity", c1_additivity},
          {"ch2_additivity", ch2_additivity},
          {"pass", pass}};
}

FiltrationReport verify_filtration(const HiggsBundleState& state, const std::vector<HiggsSubbundle>& subs,
                                   double eps_target, const FlowOptions& budget, std::optional<double> tolerance) {
  const double tol = tolerance.value_or(default_subbundle_tolerance(state));
  std::vector<SubbundleResiduals> residuals;
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const SubbundleResiduals r = subbundle_residuals(state, subs[k]);
    if (r.worst() > tol)
      throw InvalidInput("filtration level " + std::to_string(k + 1) + ": sub-bundle violates its invariants (" +
                         r.to_json().dump() + ", tolerance " + fmt(tol) + ")");
    if (k > 0) {
      const FormField &lo = subs[k - 1].pi, &hi = subs[k].pi;
      const double nest = sup_over(lo, [&](int, std::size_t pt) {
        const Mat a = lo.at(0, pt), b = hi.at(0, pt);
        return std::max((a * b - a).norm(), (b * a - a).norm());
      });
      if (nest > tol)
        throw InvalidInput("filtration level " + std::to_string(k + 1) + ": not nested in the next level (residual " +
                           fmt(nest) + ")");
    }
    residuals.push_back(r);
  }
  AdaptedPullback pb = adapted_pullback(state, subs);
  if (pb.lower_residual > tol)
    throw InvalidInput("filtration: pulled-back structure is not block triangular (residual " + fmt(pb.lower_residual) + ")");

  FiltrationReport rep{{}, pb, topological_integrals(state), {}, 0.0, 0.0, true};
  const BlockSplit& s = pb.split;
  for (int k = 0; k < s.blocks(); ++k) {
    HiggsBundleState q{HiggsStructure(s.block(pb.a, k, k), s.block(pb.phi, k, k)), HermitianMetric(s.block(pb.h, k, k))};
    const TopologicalIntegrals t = topological_integrals(q);
    rep.quotient_sum.c1_omega += t.c1_omega;
    rep.quotient_sum.c2_term += t.c2_term;
    rep.quotient_sum.ch2_omega += t.ch2_omega;
    rep.quotient_sum.c1_squared += t.c1_squared;
    rep.quotient_sum.c2_omega += t.c2_omega;
    const FlatnessCertificate initial = flatness_certificate(q, eps_target);
    HiggsBundleState final_state = q;
    if (budget.T > 0.0) final_state = run_donaldson(q, budget).final_state;
    QuotientCertificate c{k + 1,
                          s.sizes[k],
                          validate(q.structure()),
                          k < static_cast<int>(residuals.size()) ? residuals[k] : SubbundleResiduals{},
                          initial,
                          flatness_certificate(final_state, eps_target),
                          final_state};
    rep.pass = rep.pass && c.certificate.pass;
    rep.quotients.push_back(std::move(c));
  }
  rep.c1_additivity = std::abs(rep.total.c1_omega - rep.quotient_sum.c1_omega);
  rep.ch2_additivity = std::abs(rep.total.ch2_omega - rep.quotient_sum.ch2_omega);
  return rep;
}

AssembledTotal assemble_from_filtration(const HiggsBundleState& state, const FiltrationReport& report, double rho,
                                        double eps_target) {
  if (!(rho > 0.0)) throw InvalidInput("assembly: rho must be positive");
  const AdaptedPullback& pb = report.pullback;
  std::vector<const FormField*> diag;
  std::vector<double> scales;
  for (std::size_t k = 0; k < report.quotients.size(); ++k) {
    diag.push_back(&report.quotients[k].final_state.metric().field());
    scales.push_back(std::pow(rho, -2.0 * static_cast<double>(k)));
  }
  const HermitianMetric h = push_forward_metric(pb, block_metric(diag, pb.split, state.base(), scales));
  FlatnessCertificate cert = flatness_certificate(state.with_metric(h), eps_target);
  return {h, cert};
}

std::vector<HiggsSubbundle> suggest_filtration(const HermitianMetric& h0, const HermitianMetric& h, double min_log_gap) {
  if (h0.rank() != h.rank() || !(h0.base() == h.base())) throw InvalidInput("filtration suggestion: shape mismatch");
  const auto ge = pointwise::generalized_eigen(Mat(h.at(0)), Mat(h0.at(0)));
  std::vector<HiggsSubbundle> out;
  for (int k = 1; k < h.rank(); ++k) {
    if (!(ge.values(k - 1) > 0.0)) break;
    if (std::log(ge.values(k)) - std::log(ge.values(k - 1)) > min_log_gap)
      out.push_back(HiggsSubbundle::from_span(h0, ge.vectors.leftCols(k)));
  }
  return out;
}

}  // namespace higgsflow
