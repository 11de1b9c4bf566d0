#include <cmath>
#include <numbers>

#include "doctest.h"
#include "higgsflow/diagnostics.hpp"
#include "test_support.hpp"

using namespace higgsflow;
using namespace higgsflow::testing;

namespace {

HiggsStructure nilpotent(const TorusBase& b) {
  return {FormField(b, 2, {0, 1}), FormField::constant(b, {1, 0}, {unit(2, 0, 1)})};
}

// Commuting constant data built from one matrix, so it is valid for n = 2.
HiggsStructure commuting(const TorusBase& b) {
  Mat M(2, 2);
  M << cplx(0.3, 0.1), 0.7, cplx(-0.2, 0.4), cplx(-0.5, 0.2);
  const Mat I = Mat::Identity(2, 2);
  std::vector<Mat> a{0.4 * M, 0.2 * I - 0.3 * M}, phi{0.5 * M, 0.3 * I + 0.2 * M * M};
  if (b.dim() == 1) {
    a.resize(1);
    phi.resize(1);
  }
  return {FormField::constant(b, {0, 1}, a), FormField::constant(b, {1, 0}, phi)};
}

double relative(const ChernWeilReport& r) { return std::abs(r.residual) / std::max(1.0, std::abs(r.lhs)); }

}  // namespace

TEST_CASE("top form factor") {
  CHECK(top_form_volume_factor(1) == cplx(0, -2));
  CHECK(top_form_volume_factor(2) == cplx(4, 0));
  TorusBase b(2, 8);
  // omega ^ omega / 2 is the volume form
  const FormField w = omega_times(FormField::identity(b, 1));
  const auto d = top_form_trace_density(wedge(w, w));
  CHECK(std::abs(d[3] - 2.0) < 1e-15);
}

TEST_CASE("Chern-Weil report") {
  SUBCASE("flat trivial") {
    TorusBase b(2, 8);
    const auto r = chern_weil_report({HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2)});
    CHECK(r.lhs == 0.0);
    CHECK(r.deviation_term == 0.0);
    CHECK(r.topological_term == 0.0);
    CHECK(r.lambda_term == 0.0);
    CHECK(r.residual == 0.0);
  }
  SUBCASE("nilpotent") {
    TorusBase b(1, 16);
    const auto r = chern_weil_report({nilpotent(b), HermitianMetric::identity(b, 2)});
    CHECK(r.lhs == doctest::Approx(8.0).epsilon(1e-13));
    CHECK(r.deviation_term == doctest::Approx(8.0).epsilon(1e-13));
    CHECK(r.topological_term == 0.0);
    CHECK(std::abs(r.lambda_term) < 1e-20);
    CHECK(std::abs(r.residual) < 1e-13);
  }
  SUBCASE("n=1 with a curved metric holds to roundoff") {
    TorusBase b(1, 16);
    const auto r = chern_weil_report({commuting(b), smooth_metric(b, 2, 0.4, 0.3)});
    CHECK(r.lhs > 1.0);
    CHECK(relative(r) < 1e-12);
  }
  SUBCASE("n=2 refinement") {
    // N = 8 is still pre-asymptotic for mode-one data
    double res[2];
    int k = 0;
    for (int N : {12, 24}) {
      TorusBase b(2, N);
      const auto r = chern_weil_report({commuting(b), smooth_metric(b, 2, 0.1, 0.2)});
      MESSAGE(r.to_json().dump());
      res[k++] = std::abs(r.residual);
    }
    CHECK(observed_order(res[0], res[1]) == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("topological integrals") {
  TorusBase b(2, 8);
  const auto flat = topological_integrals({HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2)});
  CHECK(flat.c1_omega == 0.0);
  CHECK(flat.c2_term == 0.0);
  CHECK(flat.ch2_omega == 0.0);
  double gaps[2];
  int k = 0;
  for (int N : {8, 16}) {
    TorusBase bn(2, N);
    const auto t1 = topological_integrals({commuting(bn), smooth_metric(bn, 2, 0.3, 0.2)});
    const auto t2 = topological_integrals({commuting(bn), smooth_metric(bn, 2, 0.2, 1.1)});
    CHECK(std::abs(t1.c1_omega) < 1e-12);
    CHECK(t1.ch2_omega == doctest::Approx(0.5 * t1.c1_squared - t1.c2_omega));
    gaps[k++] = std::abs(t1.ch2_omega - t2.ch2_omega) + std::abs(t1.c2_term - t2.c2_term);
  }
  // the discrete integrals of a topologically trivial bundle vanish identically
  CHECK(gaps[0] < 1e-12);
  CHECK(gaps[1] < 1e-12);

  TorusBase b1(1, 8);
  const auto one = topological_integrals({nilpotent(b1), HermitianMetric::identity(b1, 2)});
  CHECK(one.c2_term == 0.0);
  CHECK(one.ch2_omega == 0.0);
}

TEST_CASE("energy density") {
  TorusBase b(1, 8);
  const auto flat = energy_density(HiggsPair(HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2)));
  for (double v : flat) CHECK(v == 0.0);
  const auto e = energy_density(HiggsPair(nilpotent(b), HermitianMetric::identity(b, 2)));
  for (double v : e) CHECK(v == doctest::Approx(8.0).epsilon(1e-14));
  for (double eps : {0.1, 0.3, 0.5}) {
    const HiggsPair p(commuting(b), smooth_metric(b, 2, eps, eps));
    const auto d = energy_density(p);
    for (double v : d) CHECK(v >= 0.0);
    CHECK(integrate(d, b) == ymh_energy(p));
  }
}

TEST_CASE("parabolic energy") {
  const double c = 3.0, R = 0.2, t0 = 1.0;
  TorusBase b(1, 64);
  DensityHistory hist(b);
  for (int k = 0; k <= 20; ++k) hist.push(0.8 + 0.02 * k, std::vector<double>(b.num_points(), c));
  const double vol = std::numbers::pi * R * R;
  CHECK(parabolic_energy(hist, {0.5, 0.5, 0, 0}, t0, R) == doctest::Approx(2.0 * c * R * R * vol).epsilon(1e-3));
  // centre across the periodic seam
  CHECK(parabolic_energy(hist, {0.02, 0.97, 0, 0}, t0, R) == doctest::Approx(2.0 * c * R * R * vol).epsilon(1e-3));
  CHECK_THROWS_AS(parabolic_energy(hist, {0, 0, 0, 0}, t0, 0.6), InvalidInput);
  CHECK_THROWS_AS(parabolic_energy(hist, {0, 0, 0, 0}, 0.1, 0.2), InvalidInput);
  CHECK_THROWS_AS(parabolic_energy(hist, {0, 0, 0, 0}, t0, 0.0), InvalidInput);
  // snapshots must cover the time window
  CHECK_THROWS_AS(parabolic_energy(hist, {0, 0, 0, 0}, 1.2, 0.3), InvalidInput);

  DensityHistory zero(b);
  for (int k = 0; k <= 4; ++k) zero.push(k * 0.5, std::vector<double>(b.num_points(), 0.0));
  CHECK(parabolic_energy(zero, {0.1, 0.1, 0, 0}, 1.0, 0.3) == 0.0);

  TorusBase b2(2, 8);
  double sum = 0.0;
  for (double v : ball_weights(b2, {0.5, 0.5, 0.5, 0.5}, 0.3)) sum += v;
  // volume of the 4-ball: pi^2 R^4 / 2
  CHECK(sum == doctest::Approx(0.5 * std::pow(std::numbers::pi, 2) * std::pow(0.3, 4)).epsilon(0.02));
}

TEST_CASE("parabolic energy decays along the nilpotent flow") {
  TorusBase b(1, 8);
  FlowOptions opt;
  opt.dt = 0.01;
  opt.T = 5.0;
  DensityHistory hist(b);
  hist.attach(opt);
  run_donaldson({nilpotent(b), HermitianMetric::identity(b, 2)}, opt);
  const double R = 0.25;
  const double p1 = parabolic_energy(hist, {0.3, 0.3, 0, 0}, 1.0, R);
  const double p4 = parabolic_energy(hist, {0.3, 0.3, 0, 0}, 4.0, R);
  CHECK(p1 > 0.0);
  CHECK(p4 < p1);
  // e(t) = 8 / (1 + 8t)^2 is constant in space
  auto E = [](double t) { return -1.0 / (1.0 + 8.0 * t); };
  const double exact = std::numbers::pi * R * R * (E(1.0 + R * R) - E(1.0 - R * R));
  CHECK(p1 == doctest::Approx(exact).epsilon(0.02));

  const RegularityMonitor mon = regularity_monitor(hist, {1.0, 2.0, 3.0, 4.0}, R, 2);
  CHECK(mon.records.size() == 4);
  CHECK(mon.qualitative_ok());
  for (std::size_t k = 1; k < mon.records.size(); ++k)
    CHECK(mon.records[k].parabolic_energy < mon.records[k - 1].parabolic_energy);
}

TEST_CASE("flatness certificate") {
  TorusBase b(1, 8);
  const auto flat = flatness_certificate({HiggsStructure::trivial(b, 2), HermitianMetric::identity(b, 2)}, 1e-6);
  CHECK(flat.pass);
  CHECK(flat.achieved == 0.0);
  const auto nil = flatness_certificate({nilpotent(b), HermitianMetric::identity(b, 2)}, 1.0);
  CHECK_FALSE(nil.pass);
  CHECK(nil.achieved == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(nil.verdict_line().rfind("flatness FAIL", 0) == 0);
  CHECK(nil.to_json()["pass"] == false);

  FlowOptions opt;
  opt.dt = 0.01;
  opt.T = 100.0;
  const auto res = run_donaldson({nilpotent(b), HermitianMetric::identity(b, 2)}, opt);
  const auto cert = flatness_certificate(res.final_state, 0.05);
  CHECK(cert.pass);
  CHECK(cert.achieved == doctest::Approx(2.0 * std::sqrt(2.0) / 801.0).epsilon(0.02));
}
