#include "higgsflow/scenarios.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "higgsflow/pointwise.hpp"

namespace higgsflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Mat unit(int r, int i, int j) {
  Mat m = Mat::Zero(r, r);
  m(i, j) = 1.0;
  return m;
}

Mat basis_vectors(int r, std::initializer_list<int> idx) {
  Mat v = Mat::Zero(r, static_cast<int>(idx.size()));
  int c = 0;
  for (int i : idx) v(i, c++) = 1.0;
  return v;
}

FormField constant_section(const TorusBase& b, const Mat& v) { return FormField::constant(b, {0, 0}, {v}); }

// the same matrix on dz^1 and zero on the other directions
FormField first_direction(const TorusBase& b, Bidegree deg, const Mat& m) {
  std::vector<Mat> comps(b.dim(), Mat::Zero(m.rows(), m.cols()));
  comps[0] = m;
  return FormField::constant(b, deg, comps);
}

HermitianMetric metric_from_generator(const TorusBase& b, int r, const std::function<Mat(const std::array<double, 4>&)>& s) {
  FormField h(b, r, {0, 0});
  for (std::size_t pt = 0; pt < b.num_points(); ++pt) h.at(0, pt) = pointwise::hermitian_exp(s(b.position(pt)));
  return HermitianMetric(std::move(h));
}

const std::vector<ScenarioInfo>& catalog() {
  using nlohmann::json;
  static const std::vector<ScenarioInfo> list = {
      {"flat-trivial-r1",
       "trivial line, a = 0, phi = 0, H = Id",
       1,
       {1, 2},
       1,
       16,
       false,
       {{"stability", "stable"}, {"flat", true}, {"energy", 0.0}, {"flows", "immediate pass"}}},
      {"flat-trivial-r2",
       "trivial rank-2 bundle, a = 0, phi = 0, H = Id",
       2,
       {1, 2},
       1,
       16,
       false,
       {{"stability", "polystable"}, {"flat", true}, {"energy", 0.0}, {"flows", "immediate pass"}}},
      {"nilpotent-r2",
       "a = 0, phi = e12 dz, H0 = Id",
       2,
       {1, 2},
       1,
       32,
       false,
       {{"stability", "strictly semistable"},
        {"filtration", "0 c span(e1) c E"},
        {"quotients", "trivial flat lines"},
        {"donaldson", "H = c diag(1, 1/u), u = 1/(1 + 8t); sup|F_HS| = 2 sqrt(2)/(1 + 8t)"},
        {"ymh_energy", "8/(1 + 8t)^2"},
        {"invariant_section", "e1, positivity 2"}}},
      {"chain-r3",
       "a = 0, phi = (e12 + e23) dz, H0 = Id",
       3,
       {1, 2},
       1,
       32,
       false,
       {{"stability", "strictly semistable"},
        {"filtration", "0 c span(e1) c span(e1, e2) c E"},
        {"quotients", "trivial flat lines"},
        {"invariant_section", "e1"}}},
      {"diagonal-polystable",
       "a = 0, phi = diag(alpha, -alpha) dz^1 with alpha = 0.5, H = Id",
       2,
       {1, 2},
       1,
       16,
       false,
       {{"stability", "polystable"},
        {"flat", true},
        {"invariant_section", "e1 and e2, positivity 0"}}},
      {"conformal-r1",
       "rank 1, a = 0, phi = 0, H0 = exp(u0), u0 = 0.05 cos(2 pi x) cos(2 pi y)",
       1,
       {1, 2},
       1,
       32,
       false,
       {{"stability", "stable"},
        {"donaldson", "log H -> mean of u0, flat limit, exponential decay"},
        {"flow_equivalence", "residual below 1e-3 at dt = 1e-3, T = 1"}}},
      {"t4-commuting",
       "n = 2 only: constant commuting a, phi built from one matrix, curved mode-one metric",
       2,
       {2},
       2,
       12,
       false,
       {{"stability", "polystable"},
        {"chern_weil", "residual O(h^2), characteristic integrals vanish"},
        {"flows", "Donaldson flow to a flat metric"}}},
      {"extension-sweep",
       "a = 0, phi = (Id + 0.5 e12) dz^1, H = Id, sub-bundle span(e1)",
       2,
       {1, 2},
       1,
       16,
       false,
       {{"stability", "strictly semistable"},
        {"rho_sweep", "C part vanishes; sup|F(rho)| = 0.5 sqrt(2) rho^2, slope 2"},
        {"rho_targets", json::array({{0.5, 0.5}, {0.1, 0.25}, {0.01, 0.0625}, {0.002, 0.03125}})},
        {"filtration", "0 c span(e1) c E"}}},
      {"extension-twisted",
       "a = 0.5 cos(2 pi x) e12 dzbar^1, phi = 0.1 e12 dz^1, H = Id, sub-bundle span(e1)",
       2,
       {1, 2},
       1,
       32,
       false,
       {{"stability", "strictly semistable"},
        {"rho_sweep", "C part dominates; slope 1"},
        {"filtration", "0 c span(e1) c E"},
        {"invariant_section", "e1"}}},
      {"random-valid",
       "seeded: a and phi are polynomials in one random matrix, mode-one random metric of amplitude 0.1",
       2,
       {1, 2},
       1,
       32,
       true,
       {{"stability", "depends on the seed"}, {"valid", true}, {"extension", "an eigenline of the generator"}}},
  };
  return list;
}

}  // namespace

std::vector<ScenarioInfo> scenario_catalog() { return catalog(); }

const ScenarioInfo& scenario_info(const std::string& name) {
  for (const auto& s : catalog())
    if (s.name == name) return s;
  std::string known;
  for (const auto& s : catalog()) known += (known.empty() ? "" : ", ") + s.name;
  throw InvalidInput("unknown scenario '" + name + "' (known: " + known + ")");
}

RandomState random_valid_state(const TorusBase& base, int rank, std::uint64_t seed, double metric_amplitude) {
  if (rank < 1 || rank > kMaxRank) throw InvalidInput("random state: rank out of range");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto z = [&] { return cplx(u(rng), u(rng)); };
  Mat M(rank, rank);
  for (int i = 0; i < rank; ++i)
    for (int j = 0; j < rank; ++j) M(i, j) = 0.5 * z();
  const Mat I = Mat::Identity(rank, rank);
  auto poly = [&] { return Mat(0.3 * z() * I + 0.5 * z() * M + 0.2 * z() * M * M); };
  std::vector<Mat> a, phi;
  for (int k = 0; k < base.dim(); ++k) a.push_back(poly());
  for (int k = 0; k < base.dim(); ++k) phi.push_back(poly());

  // S(x) = sum over axes of A cos(2 pi x) + B sin(2 pi x), A, B Hermitian
  auto herm = [&] {
    Mat m(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int j = 0; j < rank; ++j) m(i, j) = z();
    return Mat(0.5 * (m + m.adjoint()));
  };
  std::vector<Mat> A, B;
  for (int axis = 0; axis < base.real_dim(); ++axis) {
    A.push_back(herm());
    B.push_back(herm());
  }
  HermitianMetric h = metric_from_generator(base, rank, [&](const auto& x) {
    Mat s = Mat::Zero(rank, rank);
    for (int axis = 0; axis < base.real_dim(); ++axis)
      s += std::cos(kTwoPi * x[axis]) * A[axis] + std::sin(kTwoPi * x[axis]) * B[axis];
    return Mat(metric_amplitude * s);
  });

  Eigen::ComplexEigenSolver<Mat> es(M);
  const Mat v = es.eigenvectors().col(0);
  HiggsSubbundle line = HiggsSubbundle::from_span(h, v);
  HiggsBundleState st({FormField::constant(base, {0, 1}, a), FormField::constant(base, {1, 0}, phi)}, std::move(h));
  return {std::move(st), M, std::move(line)};
}

Scenario make_scenario(const std::string& name, int n, int N, std::optional<std::uint64_t> seed) {
  const ScenarioInfo& info = scenario_info(name);
  if (n == 0) n = info.default_n;
  if (N == 0) N = info.default_N;
  if (std::find(info.dims.begin(), info.dims.end(), n) == info.dims.end())
    throw InvalidInput("scenario '" + name + "' does not support n = " + std::to_string(n));
  if (info.needs_seed && !seed) throw InvalidInput("scenario '" + name + "' is random and needs a seed");
  const TorusBase b(n, N);
  const int r = info.rank;
  const HermitianMetric id = HermitianMetric::identity(b, r);
  const FormField a0(b, r, {0, 1});
  auto phi1 = [&](const Mat& m) { return first_direction(b, {1, 0}, m); };

  auto with = [&](HiggsBundleState st) { return Scenario{info, std::move(st), {}, std::nullopt, {}, {}}; };

  if (name == "flat-trivial-r1" || name == "flat-trivial-r2") return with({HiggsStructure::trivial(b, r), id});

  if (name == "nilpotent-r2" || name == "chain-r3") {
    const Mat phi = name == "nilpotent-r2" ? unit(2, 0, 1) : Mat(unit(3, 0, 1) + unit(3, 1, 2));
    Scenario sc = with({HiggsStructure(a0, phi1(phi)), id});
    sc.filtration.push_back(HiggsSubbundle::from_span(id, basis_vectors(r, {0})));
    if (r == 3) sc.filtration.push_back(HiggsSubbundle::from_span(id, basis_vectors(r, {0, 1})));
    sc.extension = sc.filtration[0];
    sc.sections.push_back(constant_section(b, basis_vectors(r, {0})));
    return sc;
  }

  if (name == "diagonal-polystable") {
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = 0.5;
    d(1, 1) = -0.5;
    Scenario sc = with({HiggsStructure(a0, phi1(d)), id});
    sc.sections = {constant_section(b, basis_vectors(2, {0})), constant_section(b, basis_vectors(2, {1}))};
    return sc;
  }

  if (name == "conformal-r1") {
    HermitianMetric h = metric_from_generator(b, 1, [](const auto& x) {
      Mat s(1, 1);
      s(0, 0) = 0.05 * std::cos(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]);
      return s;
    });
    return with({HiggsStructure::trivial(b, 1), std::move(h)});
  }

  if (name == "t4-commuting") {
    Mat M(2, 2);
    M << cplx(0.3, 0.1), 0.7, cplx(-0.2, 0.4), cplx(-0.5, 0.2);
    const Mat I = Mat::Identity(2, 2);
    const HiggsStructure s(FormField::constant(b, {0, 1}, {0.4 * M, 0.2 * I - 0.3 * M}),
                           FormField::constant(b, {1, 0}, {0.5 * M, 0.3 * I + 0.2 * M * M}));
    HermitianMetric h = metric_from_generator(b, 2, [](const auto& x) {
      Mat S(2, 2);
      const double c = std::cos(kTwoPi * x[0]), d = std::sin(kTwoPi * x[2]), w = std::cos(kTwoPi * x[3]);
      S << 0.1 * c, cplx(0.05 * d, 0.03 * w), cplx(0.05 * d, -0.03 * w), -0.1 * w;
      return S;
    });
    return with({s, std::move(h)});
  }

  if (name == "extension-sweep") {
    Scenario sc = with({HiggsStructure(a0, phi1(Mat(Mat::Identity(2, 2) + 0.5 * unit(2, 0, 1)))), id});
    sc.extension = HiggsSubbundle::from_span(id, basis_vectors(2, {0}));
    sc.filtration.push_back(*sc.extension);
    sc.rho_targets = {{0.5, 0.5}, {0.1, 0.25}, {0.01, 0.0625}, {0.002, 0.03125}};
    return sc;
  }

  if (name == "extension-twisted") {
    FormField a(b, 2, {0, 1});
    for (std::size_t pt = 0; pt < b.num_points(); ++pt)
      a.at(0, pt) = 0.5 * std::cos(kTwoPi * b.position(pt)[0]) * unit(2, 0, 1);
    Scenario sc = with({HiggsStructure(std::move(a), phi1(0.1 * unit(2, 0, 1))), id});
    sc.extension = HiggsSubbundle::from_span(id, basis_vectors(2, {0}));
    sc.filtration.push_back(*sc.extension);
    sc.sections.push_back(constant_section(b, basis_vectors(2, {0})));
    return sc;
  }

  // random-valid
  RandomState rs = random_valid_state(b, r, *seed);
  Scenario sc = with(std::move(rs.state));
  sc.extension = std::move(rs.eigenline);
  return sc;
}

// ------------------------------------------------------------ sub-objects

namespace {

Mat orthonormal_columns(const Mat& v, double tol) {
  if (v.cols() == 0) return v;
  Eigen::JacobiSVD<Mat> svd(v, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  int k = 0;
  while (k < sv.size() && sv(k) > tol * std::max(1.0, sv(0))) ++k;
  return svd.matrixU().leftCols(k);
}

Mat kernel(const Mat& m, double tol) {
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  int k = 0;
  while (k < sv.size() && sv(k) > tol * std::max(1.0, sv(0))) ++k;
  return svd.matrixV().rightCols(m.cols() - k);
}

Mat orth_projector(const Mat& q) { return q * q.adjoint(); }

}  // namespace

nlohmann::json SlopeEnumeration::to_json() const {
  nlohmann::json subs = nlohmann::json::array();
  for (const auto& s : subobjects) subs.push_back({{"rank", s.rank}, {"slope", s.slope}});
  return {{"subobjects", subs}, {"slope", slope}, {"verdict", verdict}};
}

SlopeEnumeration enumerate_constant_subobjects(const HiggsBundleState& state) {
  const int r = state.rank();
  const TorusBase& b = state.base();
  std::vector<Mat> comps;
  for (const FormField* f : {&state.a(), &state.phi()})
    for (int c = 0; c < f->components(); ++c) {
      const Mat m0 = f->at(c, 0);
      for (std::size_t pt = 1; pt < b.num_points(); ++pt)
        if ((Mat(f->at(c, pt)) - m0).norm() > 1e-12 * (1.0 + m0.norm()))
          throw InvalidInput("sub-object enumeration needs constant a and phi");
      comps.push_back(m0);
    }
  const double tol = 1e-7;

  // generalized eigenspace flags of a generic combination, plus coordinate spans
  Mat X = Mat::Zero(r, r);
  for (std::size_t k = 0; k < comps.size(); ++k) X += cplx(1.0 + 0.37 * k, 0.61 - 0.23 * k) * comps[k];
  std::vector<Mat> cand;
  Eigen::ComplexEigenSolver<Mat> es(X);
  std::vector<cplx> eig;
  for (int i = 0; i < r; ++i) {
    const cplx l = es.eigenvalues()(i);
    if (std::none_of(eig.begin(), eig.end(), [&](cplx m) { return std::abs(m - l) < 1e-5 * (1.0 + X.norm()); }))
      eig.push_back(l);
  }
  std::vector<Mat> gen;
  for (cplx l : eig) {
    Mat p = Mat::Identity(r, r);
    const Mat shifted = X - l * Mat::Identity(r, r);
    for (int k = 1; k <= r; ++k) {
      p = p * shifted;
      cand.push_back(kernel(p, tol));
    }
    gen.push_back(cand.back());
  }
  for (unsigned mask = 1; mask < (1u << gen.size()); ++mask) {
    Mat v(r, 0);
    for (std::size_t i = 0; i < gen.size(); ++i)
      if (mask & (1u << i)) {
        Mat w(r, v.cols() + gen[i].cols());
        w << v, gen[i];
        v = w;
      }
    cand.push_back(orthonormal_columns(v, tol));
  }
  for (unsigned mask = 1; mask + 1 < (1u << r); ++mask) {
    Mat v = Mat::Zero(r, std::popcount(mask));
    int c = 0;
    for (int i = 0; i < r; ++i)
      if (mask & (1u << i)) v(i, c++) = 1.0;
    cand.push_back(v);
  }

  SlopeEnumeration out;
  out.slope = degree_slope_lambda(state).slope;
  std::vector<Mat> seen;
  for (const Mat& c0 : cand) {
    const Mat q = orthonormal_columns(c0, tol);
    const int p = static_cast<int>(q.cols());
    if (p == 0 || p == r) continue;
    const Mat P = orth_projector(q);
    if (std::any_of(seen.begin(), seen.end(), [&](const Mat& s) { return s.rows() == P.rows() && (s - P).norm() < 1e-8; }))
      continue;
    const bool invariant = std::all_of(comps.begin(), comps.end(), [&](const Mat& m) {
      return ((Mat::Identity(r, r) - P) * m * P).norm() < 1e-9 * (1.0 + m.norm());
    });
    if (!invariant) continue;
    seen.push_back(P);
    const HiggsSubbundle sub = HiggsSubbundle::from_span(state.metric(), q);
    const double slope = degree_slope_lambda(split_extension(state, sub).sub_state()).slope;
    out.subobjects.push_back({q, p, slope});
  }

  const double stol = 1e-9;
  double max_slope = -std::numeric_limits<double>::infinity();
  for (const auto& s : out.subobjects) max_slope = std::max(max_slope, s.slope);
  if (out.subobjects.empty() || max_slope < out.slope - stol) {
    out.verdict = "stable";
  } else if (max_slope > out.slope + stol) {
    out.verdict = "unstable";
  } else {
    // polystable when the minimal invariant pieces of the same slope fill E as a direct sum
    std::vector<const SubobjectSlope*> minimal;
    for (const auto& s : out.subobjects) {
      if (std::abs(s.slope - out.slope) > stol) continue;
      const Mat Ps = orth_projector(s.basis);
      const bool has_smaller = std::any_of(out.subobjects.begin(), out.subobjects.end(), [&](const SubobjectSlope& t) {
        return t.rank < s.rank && std::abs(t.slope - out.slope) <= stol &&
               ((Mat::Identity(r, r) - Ps) * t.basis).norm() < 1e-8;
      });
      if (!has_smaller) minimal.push_back(&s);
    }
    Mat span(r, 0);
    for (const auto* s : minimal) {
      Mat w(r, span.cols() + s->basis.cols());
      w << span, s->basis;
      if (orthonormal_columns(w, tol).cols() == w.cols()) span = w;
    }
    out.verdict = span.cols() == r ? "polystable" : "strictly semistable";
  }
  return out;
}

}  // namespace higgsflow
