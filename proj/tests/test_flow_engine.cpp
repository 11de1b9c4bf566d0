#include <sstream>

#include "doctest.h"
#include "higgsflow/flow_engine.hpp"
#include "test_support.hpp"

using namespace higgsflow;
using namespace higgsflow::testing;

namespace {

HermitianMetric diagonal_metric(const TorusBase& b, double h1, double h2) {
  Mat h = Mat::Zero(2, 2);
  h(0, 0) = h1;
  h(1, 1) = h2;
  return HermitianMetric(FormField::constant(b, {0, 0}, {h}));
}

HiggsStructure nilpotent(const TorusBase& b) {
  return {FormField(b, 2, {0, 1}), FormField::constant(b, {1, 0}, {unit(2, 0, 1)})};
}

HiggsBundleState conformal(const TorusBase& b, double eps) {
  FormField h = sample_field(b, 1, 1, {0, 0}, [eps](int, const auto& x) -> Mat {
    return Mat::Constant(1, 1, std::exp(eps * std::cos(kTwoPi * x[0]) * std::cos(kTwoPi * x[1])));
  });
  return {HiggsStructure::trivial(b, 1), HermitianMetric(h)};
}

double ratio(const HermitianMetric& h, std::size_t pt = 0) { return (h.at(pt)(0, 0) / h.at(pt)(1, 1)).real(); }

}  // namespace

TEST_CASE("Einstein deviation oracles") {
  TorusBase b(1, 8);
  CHECK(sup_abs_entry(einstein_deviation({HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2)})) == 0.0);
  const Mat D = unit(2, 0, 0) - unit(2, 1, 1);
  const FormField K1 = einstein_deviation({nilpotent(b), HermitianMetric::identity(b, 2)});
  CHECK((K1.at(0, 3) - 2.0 * D).norm() < 1e-14);
  const double u = 0.3;
  const FormField Ku = einstein_deviation({nilpotent(b), diagonal_metric(b, 1.0, 1.0 / u)});
  CHECK((Ku.at(0, 3) - 2.0 * u * D).norm() < 1e-14);
}

TEST_CASE("Einstein deviation is self-adjoint for smooth metrics") {
  double defects[2];
  int k = 0;
  for (int N : {16, 32}) {
    TorusBase b(1, N);
    const HiggsBundleState st(nilpotent(b), smooth_metric(b, 2, 0.4, 0.1));
    const FormField K = einstein_deviation(st);
    for (std::size_t pt = 0; pt < b.num_points(); ++pt) {
      const Mat hk = st.metric().at(pt) * K.at(0, pt);
      CHECK((hk - hk.adjoint()).norm() < 1e-12);
    }
    double total = 0.0;
    for (const cplx t : trace_field(K)) total += t.real();
    CHECK(std::abs(total) / b.num_points() < 1e-10);
    defects[k++] = evaluate(st).selfadjoint_defect;
  }
  // the raw contraction is self-adjoint up to truncation error only
  CHECK(observed_order(defects[0], defects[1]) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("Donaldson step") {
  TorusBase b(1, 8);
  SUBCASE("fixed point") {
    const HiggsBundleState st(HiggsStructure::trivial(b, 2), diagonal_metric(b, 2.0, 3.0));
    CHECK(max_abs_diff(donaldson_step(st, 0.1).metric().field(), st.metric().field()) == 0.0);
  }
  SUBCASE("nilpotent closed form") {
    FlowOptions opt;
    opt.dt = 1e-3;
    opt.T = 1.0;
    const auto res = run_donaldson({nilpotent(b), HermitianMetric::identity(b, 2)}, opt);
    const double u = ratio(res.final_state.metric());
    CHECK(u == doctest::Approx(1.0 / 9.0).epsilon(0.01));
    CHECK(res.trace.rows.back().ymh_energy == doctest::Approx(8.0 / 81.0).epsilon(0.02));
    CHECK(res.final_state.metric().min_eigenvalue() > 0.0);
    // stays in the diagonal constant family
    CHECK(std::abs(res.final_state.metric().at(5)(0, 1)) == 0.0);
    CHECK(ratio(res.final_state.metric(), 5) == u);
  }
  CHECK_THROWS_AS(donaldson_step({nilpotent(b), HermitianMetric::identity(b, 2)}, 0.0), InvalidInput);
}

TEST_CASE("conformal Donaldson flow decays") {
  TorusBase b(1, 32);
  FlowOptions opt;
  opt.dt = 1e-4;
  opt.T = 0.02;
  const auto res = run_donaldson(conformal(b, 0.5), opt);
  CHECK(res.trace.rows.back().dev_sup < res.trace.rows.front().dev_sup);
  // heat equation: the deviation of a first mode decays like exp(-8 pi^2 t)
  const double expected = std::exp(-8.0 * std::numbers::pi * std::numbers::pi * opt.T);
  CHECK(res.trace.rows.back().dev_sup / res.trace.rows.front().dev_sup == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("YMH energy and velocity") {
  TorusBase b(1, 8);
  CHECK(ymh_energy(HiggsPair(HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2))) == 0.0);
  const HiggsPair p(nilpotent(b), HermitianMetric::identity(b, 2));
  CHECK(ymh_energy(p) == doctest::Approx(8.0));
  const HiggsPair rotated({p.a(), std::exp(cplx(0, 0.7)) * p.phi()}, p.h0);
  CHECK(ymh_energy(rotated) == doctest::Approx(8.0).epsilon(1e-14));
  const Velocity v = ymh_velocity(p);
  CHECK((v.phi_dot.at(0, 2) + 4.0 * unit(2, 0, 1)).norm() < 1e-14);
  CHECK(sup_abs_entry(v.a_dot) == 0.0);
  const HiggsPair flat(HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2));
  CHECK(max_abs_diff(ymh_step(flat, 0.1).phi(), flat.phi()) == 0.0);
}

TEST_CASE("YMH flow on the nilpotent example") {
  TorusBase b(1, 8);
  for (YmhScheme s : {YmhScheme::GaugeExponential, YmhScheme::ExplicitEuler}) {
    FlowOptions opt;
    opt.dt = 1e-3;
    opt.T = 1.0;
    opt.scheme = s;
    const auto res = run_ymh(HiggsPair(nilpotent(b), HermitianMetric::identity(b, 2)), opt);
    CHECK(res.trace.rows.back().ymh_energy == doctest::Approx(8.0 / 81.0).epsilon(0.02));
    for (std::size_t k = 1; k < res.trace.step_energies.size(); ++k)
      CHECK(res.trace.step_energies[k] <= res.trace.step_energies[k - 1] + opt.dt * opt.dt);
    CHECK(res.trace.rows.back().phi_sup <= res.trace.rows.front().phi_sup);
  }
}

TEST_CASE("Kahler codifferential is the adjoint of D_A on one-forms") {
  double gaps[2];
  int k = 0;
  for (int N : {16, 32}) {
    TorusBase b(1, N);
    const HermitianMetric h0 = smooth_metric(b, 2, 0.3, 0.5);
    const FormField a = sample_field(b, 2, 2, {0, 1}, [](int, const auto& x) -> Mat {
      return (Mat(2, 2) << 0.2 * std::cos(kTwoPi * x[1]), std::exp(cplx(0, kTwoPi * x[0])), 0.0, 0.1).finished();
    });
    const HiggsPair pair({a, FormField(b, 2, {1, 0})}, h0);
    const FormField F = sample_field(b, 2, 2, {1, 1}, [](int, const auto& x) -> Mat {
      return (Mat(2, 2) << std::sin(kTwoPi * x[0]), cplx(0.3, std::cos(kTwoPi * x[1])), 1.0, -0.5).finished();
    });
    const FormField b10 = sample_field(b, 2, 2, {1, 0}, [](int, const auto& x) -> Mat {
      return (Mat(2, 2) << std::cos(kTwoPi * (x[0] + x[1])), 0.5, cplx(0, std::sin(kTwoPi * x[0])), 0.2).finished();
    });
    const FormField b01 = sample_field(b, 2, 2, {0, 1}, [](int, const auto& x) -> Mat {
      return (Mat(2, 2) << 0.4, std::sin(kTwoPi * x[1]), 1.0, cplx(std::cos(kTwoPi * x[0]), 0.1)).finished();
    });
    const FormField bconn = chern_connection(h0, a);
    const FormField Dbeta = covariant_dbar(b10, a, a) + covariant_del(b01, bconn, bconn);
    const OneForm cod = kahler_codifferential(F, pair);
    const double lhs = l2_inner(F, Dbeta, h0);
    const double rhs = l2_inner(cod.part10, b10, h0) + l2_inner(cod.part01, b01, h0);
    gaps[k++] = std::abs(lhs - rhs);
  }
  MESSAGE("adjoint gaps " << gaps[0] << " " << gaps[1]);
  CHECK(gaps[1] < 1e-2);
  CHECK(observed_order(gaps[0], gaps[1]) > 1.7);
}

TEST_CASE("complex gauge action") {
  TorusBase b(1, 8);
  const HiggsPair p(nilpotent(b), HermitianMetric::identity(b, 2));
  const HiggsPair same = complex_gauge_apply(FormField::identity(b, 2), p);
  CHECK(max_abs_diff(same.phi(), p.phi()) == 0.0);
  CHECK(max_abs_diff(same.a(), p.a()) == 0.0);
  const double c = 1.7;
  Mat s = Mat::Zero(2, 2);
  s(0, 0) = c;
  s(1, 1) = 1.0 / c;
  const HiggsPair q = complex_gauge_apply(FormField::constant(b, {0, 0}, {s}), p);
  CHECK((q.phi().at(0, 1) - c * c * unit(2, 0, 1)).norm() < 1e-14);
  CHECK(sup_abs_entry(q.a()) == 0.0);
  // constant unitary: energy invariant
  Mat U(2, 2);
  U << std::cos(0.4), cplx(0, std::sin(0.4)), cplx(0, std::sin(0.4)), std::cos(0.4);
  const double e0 = ymh_energy(p);
  CHECK(std::abs(ymh_energy(complex_gauge_apply(FormField::constant(b, {0, 0}, {U}), p)) - e0) < 1e-13);
  Mat sing = unit(2, 0, 0);
  CHECK_THROWS_AS(complex_gauge_apply(FormField::constant(b, {0, 0}, {sing}), p), InvalidInput);
}

TEST_CASE("pointwise unitary gauges change the energy by truncation error only") {
  double gaps[2];
  int k = 0;
  for (int N : {32, 64}) {
    TorusBase b(1, N);
    const HiggsPair p(nilpotent(b), HermitianMetric::identity(b, 2));
    const FormField u = sample_field(b, 2, 2, {0, 0}, [](int, const auto& x) -> Mat {
      const double th = 0.3 * std::cos(kTwoPi * x[0]);
      return (Mat(2, 2) << std::exp(cplx(0, th)), 0.0, 0.0, std::exp(cplx(0, -2 * th))).finished();
    });
    gaps[k++] = std::abs(ymh_energy(complex_gauge_apply(u, p)) - ymh_energy(p));
  }
  CHECK(gaps[1] > 0.0);
  CHECK(observed_order(gaps[0], gaps[1]) > 1.7);
}

TEST_CASE("gauge from metric") {
  TorusBase b(1, 8);
  const HermitianMetric eye = HermitianMetric::identity(b, 2);
  CHECK(max_abs_diff(gauge_from_metric(eye, eye), FormField::identity(b, 2)) < 1e-14);
  const FormField g = gauge_from_metric(eye, diagonal_metric(b, 4.0, 9.0));
  CHECK(std::abs(g.at(0, 0)(0, 0) - 2.0) < 1e-14);
  CHECK(std::abs(g.at(0, 0)(1, 1) - 3.0) < 1e-14);
  const HermitianMetric h0 = smooth_metric(b, 3, 0.5, 0.1), h = smooth_metric(b, 3, 0.8, 1.9);
  const FormField G = gauge_from_metric(h0, h);
  for (std::size_t pt = 0; pt < b.num_points(); ++pt) {
    const Mat lhs = h0.inverse_at(pt) * G.at(0, pt).adjoint() * h0.at(pt) * G.at(0, pt);
    CHECK((lhs - h0.inverse_at(pt) * h.at(pt)).norm() < 1e-12);
  }
}

TEST_CASE("sample schedule") {
  FlowOptions opt;
  opt.dt = 0.5;
  opt.T = 5.0;
  opt.samples = {3.0};
  CHECK(sample_steps(opt) == std::vector<long long>{0, 1, 2, 4, 6, 8, 10});
  opt.T = 5.2;
  CHECK_THROWS_AS(sample_steps(opt), InvalidInput);
}

TEST_CASE("flow equivalence") {
  SUBCASE("T = 0") {
    TorusBase b(1, 8);
    const auto rep = flow_equivalence_check({nilpotent(b), HermitianMetric::identity(b, 2)}, 0.0, 1e-3);
    CHECK(rep.max_norm_residual == 0.0);
    CHECK(rep.max_pair_discrepancy == 0.0);
  }
  SUBCASE("nilpotent") {
    TorusBase b(1, 8);
    const auto rep = flow_equivalence_check({nilpotent(b), HermitianMetric::identity(b, 2)}, 1.0, 1e-3);
    CHECK(rep.max_norm_residual < 1e-3);
    CHECK(rep.max_transported_residual < 1e-3);
    CHECK(rep.max_conjugation < 1e-10);
  }
  SUBCASE("conformal") {
    TorusBase b(1, 32);
    const auto rep = flow_equivalence_check(conformal(b, 0.05), 0.25, 1e-3);
    CHECK(rep.max_norm_residual < 1e-3);
  }
}

TEST_CASE("trace export") {
  TorusBase b(1, 8);
  FlowOptions opt;
  opt.dt = 0.01;
  opt.T = 0.1;
  const auto r1 = run_donaldson({nilpotent(b), HermitianMetric::identity(b, 2)}, opt);
  const auto r2 = run_donaldson({nilpotent(b), HermitianMetric::identity(b, 2)}, opt);
  std::ostringstream s1, s2;
  r1.trace.write_csv(s1);
  r2.trace.write_csv(s2);
  CHECK(s1.str() == s2.str());
  CHECK(s1.str().rfind("t,ymh_energy,dev_l2,dev_sup,e_sup,phi_sup,dt,residual_integrability,residual_holomorphy,"
                       "residual_symmetry\n",
                       0) == 0);
  for (std::size_t k = 1; k < r1.trace.rows.size(); ++k) CHECK(r1.trace.rows[k].t > r1.trace.rows[k - 1].t);
  const auto j = r1.trace.summary();
  CHECK(j["final"]["t"].get<double>() == doctest::Approx(0.1));
}
