#include <sstream>

#include "doctest.h"
#include "higgsflow/kahler_grid.hpp"
#include "higgsflow/metric.hpp"
#include "higgsflow/snapshot.hpp"
#include "test_support.hpp"

using namespace higgsflow;
using namespace higgsflow::testing;

namespace {

// exp(2 pi i x_0) Id as a (0,0)-field.
FormField plane_wave(const TorusBase& base, int rank) {
  return sample_field(base, rank, rank, {0, 0}, [rank](int, const auto& x) -> Mat {
    return std::exp(cplx(0, kTwoPi * x[0])) * Mat::Identity(rank, rank);
  });
}

FormField smooth_field(const TorusBase& base, int rank, Bidegree deg, double phase) {
  return sample_field(base, rank, rank, deg, [&](int c, const auto& x) -> Mat {
    Mat m(rank, rank);
    for (int i = 0; i < rank; ++i)
      for (int j = 0; j < rank; ++j) {
        double s = phase + 0.3 * c + 0.7 * i - 0.4 * j;
        for (int a = 0; a < base.real_dim(); ++a) s += ((a + i + j) % 2) * x[a];
        m(i, j) = cplx(std::cos(kTwoPi * (x[0] + s)), std::sin(kTwoPi * (x[1] - s)) * 0.5);
        if (base.dim() == 2) m(i, j) *= std::cos(kTwoPi * x[2 + (c % 2)]) + 0.3 * (i + 1);
      }
    return m;
  });
}

}  // namespace

TEST_CASE("torus base invariants") {
  CHECK_THROWS_AS(TorusBase(3, 8), InvalidInput);
  CHECK_THROWS_AS(TorusBase(1, 6), InvalidInput);
  CHECK_THROWS_AS(TorusBase(1, 9), InvalidInput);
  for (int n : {1, 2}) {
    TorusBase b(n, 8);
    CHECK(b.volume() == doctest::Approx(1.0));
    CHECK(b.injectivity_radius() == 0.5);
    std::vector<double> ones(b.num_points(), 1.0);
    CHECK(integrate(ones, b) == doctest::Approx(b.volume()).epsilon(1e-14));
    for (int p = 0; p <= n; ++p)
      for (int q = 0; q <= n; ++q) CHECK(FormField(b, 2, {p, q}).components() == binomial(n, p) * binomial(n, q));
  }
}

TEST_CASE("dbar of a constant vanishes and derivatives reject overflow") {
  TorusBase b(1, 8);
  const FormField c = FormField::constant(b, {0, 0}, {Mat::Constant(2, 2, cplx(1.5, -0.5))});
  CHECK(sup_abs_entry(dbar_flat(c)) == 0.0);
  CHECK(sup_abs_entry(del_flat(c)) == 0.0);
  CHECK_THROWS_AS(dbar_flat(FormField(b, 2, {0, 1})), InvalidInput);
  CHECK_THROWS_AS(del_flat(FormField(b, 2, {1, 1})), InvalidInput);
}

TEST_CASE("dbar of a plane wave converges at second order") {
  double errs[2];
  int k = 0;
  for (int N : {32, 64}) {
    TorusBase b(1, N);
    const FormField d = dbar_flat(plane_wave(b, 2));
    double e = 0.0;
    for (std::size_t pt = 0; pt < b.num_points(); ++pt) {
      const cplx exact = cplx(0, std::numbers::pi) * std::exp(cplx(0, kTwoPi * b.position(pt)[0]));
      e = std::max(e, std::abs(d.at(0, pt)(0, 0) - exact));
      e = std::max(e, std::abs(d.at(0, pt)(0, 1)));
    }
    errs[k++] = e;
  }
  CHECK(errs[1] < 2e-2);
  CHECK(observed_order(errs[0], errs[1]) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("derivatives are linear and square to zero") {
  TorusBase b(2, 8);
  const FormField f = smooth_field(b, 2, {0, 0}, 0.1);
  const FormField g = smooth_field(b, 2, {0, 0}, 0.7);
  CHECK(max_abs_diff(dbar_flat(f + g), dbar_flat(f) + dbar_flat(g)) < 1e-12);
  CHECK(sup_abs_entry(dbar_flat(dbar_flat(f))) < 1e-10);
  CHECK(sup_abs_entry(del_flat(del_flat(f))) < 1e-10);
  const FormField one = smooth_field(b, 2, {1, 0}, 0.3);
  CHECK(sup_abs_entry(dbar_flat(dbar_flat(one))) < 1e-10);
  // del dbar + dbar del = 0 on functions
  CHECK(sup_abs_entry(del_flat(dbar_flat(f)) + dbar_flat(del_flat(f))) < 1e-10);
}

TEST_CASE("wedge sign conventions") {
  const Mat M = (Mat(2, 2) << 1.0, 2.0, cplx(0, 1), -1.0).finished();
  const Mat K = (Mat(2, 2) << 0.5, -1.0, 3.0, cplx(1, 1)).finished();
  SUBCASE("repeated one-form vanishes") {
    TorusBase b2(2, 8);
    const Mat Nil = unit(2, 0, 1);
    const FormField phi = FormField::constant(b2, {1, 0}, {Nil, Mat::Zero(2, 2)});
    CHECK(sup_abs_entry(wedge(phi, phi)) == 0.0);
    TorusBase b1(1, 8);
    const FormField phi1 = FormField::constant(b1, {1, 0}, {Nil});
    CHECK_THROWS_AS(wedge(phi1, phi1), InvalidInput);
    CHECK(wedge_or_empty(phi1, phi1).components() == 0);
  }
  SUBCASE("dz ^ dzbar versus dzbar ^ dz") {
    TorusBase b(1, 8);
    const FormField A = FormField::constant(b, {1, 0}, {M});
    const FormField B = FormField::constant(b, {0, 1}, {K});
    const FormField AB = wedge(A, B), BA = wedge(B, A);
    CHECK((AB.at(0, 3) - M * K).norm() < 1e-15);
    CHECK((BA.at(0, 3) + K * M).norm() < 1e-15);
    CHECK(sup_abs_entry(wedge(A, zero_like(B))) == 0.0);
  }
  SUBCASE("n = 2 mixed components") {
    TorusBase b(2, 8);
    const FormField A = FormField::constant(b, {1, 0}, {M, Mat::Zero(2, 2)});    // M dz1
    const FormField B = FormField::constant(b, {0, 1}, {Mat::Zero(2, 2), K});    // K dzbar2
    const FormField C = FormField::constant(b, {1, 0}, {Mat::Zero(2, 2), K});    // K dz2
    const FormField AB = wedge(A, B);
    CHECK((AB.at(AB.component_of(1, 2), 0) - M * K).norm() < 1e-15);
    const FormField AC = wedge(A, C), CA = wedge(C, A);
    CHECK((AC.at(0, 0) - M * K).norm() < 1e-15);
    CHECK((CA.at(0, 0) + K * M).norm() < 1e-15);
    // (dz1 ^ dzbar2) ^ dz2 = - dz1 ^ dz2 ^ dzbar2
    const FormField ABC = wedge(AB, C);
    CHECK((ABC.at(ABC.component_of(3, 2), 0) + M * K * K).norm() < 1e-14);
  }
}

TEST_CASE("contraction with the Kahler form") {
  for (int n : {1, 2}) {
    TorusBase b(n, 8);
    const FormField L = contract_lambda(omega_times(FormField::identity(b, 2)));
    CHECK((L.at(0, 5) - n * Mat::Identity(2, 2)).norm() < 1e-15);
  }
  TorusBase b1(1, 8);
  const Mat M = (Mat(2, 2) << 1.0, 2.0, cplx(0, 1), -1.0).finished();
  const FormField F = FormField::constant(b1, {1, 1}, {M});
  CHECK((contract_lambda(F).at(0, 0) - cplx(0, -2) * M).norm() < 1e-15);
  TorusBase b2(2, 8);
  FormField off(b2, 2, {1, 1});
  for (std::size_t pt = 0; pt < b2.num_points(); ++pt) off.at(off.component_of(1, 2), pt) = M;
  CHECK(sup_abs_entry(contract_lambda(off)) == 0.0);
  CHECK_THROWS_AS(contract_lambda(FormField(b1, 2, {1, 0})), InvalidInput);
}

TEST_CASE("pointwise norms") {
  TorusBase b(1, 8);
  const HermitianMetric eye = HermitianMetric::identity(b, 2);
  CHECK(pointwise_norm_sq(FormField::identity(b, 2), eye)[0] == doctest::Approx(2.0));
  const FormField F = FormField::constant(b, {1, 1}, {unit(2, 0, 0) - unit(2, 1, 1)});
  CHECK(pointwise_norm_sq(F, eye)[7] == doctest::Approx(8.0));
  CHECK(l2_norm_sq(zero_like(F), eye) == 0.0);
  // n = 1: |F|^2 = |Lambda F|^2 for any (1,1)-form and metric
  FormField h = sample_field(b, 2, 2, {0, 0}, [](int, const auto& x) -> Mat {
    Mat m(2, 2);
    m << 2.0 + std::cos(kTwoPi * x[0]), cplx(0.3, 0.2 * std::sin(kTwoPi * x[1])),
        cplx(0.3, -0.2 * std::sin(kTwoPi * x[1])), 1.5;
    return m;
  });
  const HermitianMetric H(h);
  const FormField G = smooth_field(b, 2, {1, 1}, 0.2);
  const auto lhs = pointwise_norm_sq(G, H);
  const auto rhs = pointwise_norm_sq(contract_lambda(G), H);
  for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
  FormField bad = FormField::identity(b, 2);
  bad.at(0, 4)(1, 1) = -1.0;
  CHECK_THROWS_AS(HermitianMetric{bad}, InvalidInput);
}

TEST_CASE("quadrature") {
  TorusBase b(1, 16);
  std::vector<double> ones(b.num_points(), 1.0), wave(b.num_points()), c(b.num_points(), 3.25);
  for (std::size_t pt = 0; pt < b.num_points(); ++pt) wave[pt] = std::cos(kTwoPi * b.position(pt)[0]);
  CHECK(integrate(ones, b) == doctest::Approx(1.0));
  CHECK(std::abs(integrate(wave, b)) < 1e-15);
  CHECK(integrate(c, b) == doctest::Approx(3.25 * b.volume()));
}

TEST_CASE("discrete Leibniz rule holds at second order") {
  double errs[2];
  int k = 0;
  for (int N : {16, 32}) {
    TorusBase b(2, N);
    const FormField A = smooth_field(b, 2, {1, 0}, 0.2);
    const FormField B = smooth_field(b, 2, {0, 1}, 0.9);
    const FormField lhs = dbar_flat(wedge(A, B));
    const FormField rhs = wedge(dbar_flat(A), B) - wedge(A, dbar_flat(B));
    errs[k++] = max_abs_diff(lhs, rhs);
  }
  CHECK(observed_order(errs[0], errs[1]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("integration by parts against the Kahler-identity adjoint") {
  // dbar^* beta = -i Lambda del beta for a (0,1)-form beta.
  for (int N : {16, 32}) {
    TorusBase b(2, N);
    const HermitianMetric eye = HermitianMetric::identity(b, 2);
    const FormField f = smooth_field(b, 2, {0, 0}, 0.4);
    const FormField beta = smooth_field(b, 2, {0, 1}, 1.1);
    const FormField adj = cplx(0, -1) * contract_lambda(del_flat(beta));
    const double lhs = l2_inner(dbar_flat(f), beta, eye);
    const double rhs = l2_inner(f, adj, eye);
    CHECK(std::abs(lhs - rhs) < 1e-11 * (1.0 + std::abs(lhs)));
  }
}

TEST_CASE("operations are bit-for-bit deterministic") {
  TorusBase b(2, 8);
  const FormField f = smooth_field(b, 3, {1, 0}, 0.25);
  const FormField g = smooth_field(b, 3, {0, 1}, 0.75);
  const FormField r1 = dbar_flat(wedge(f, g)), r2 = dbar_flat(wedge(f, g));
  CHECK(std::equal(r1.raw().begin(), r1.raw().end(), r2.raw().begin()));
}

TEST_CASE("snapshot container round trip") {
  TorusBase b(2, 8);
  const FormField f = smooth_field(b, 3, {1, 1}, 0.5);
  std::stringstream ss;
  write_field(ss, f);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "HFLD");
  CHECK(bytes.size() == 4 + 8 * 4 + f.raw().size() * 16);
  const FormField g = read_field(ss);
  CHECK(g.same_shape(f));
  CHECK(max_abs_diff(f, g) == 0.0);
  std::stringstream bad("HFLDxxxx");
  CHECK_THROWS_AS(read_field(bad), InvalidInput);
}
