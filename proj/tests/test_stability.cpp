#include "doctest.h"

#include <cmath>

#include <Eigen/SVD>

#include "dyndisc/stability.hpp"

using namespace dyndisc;

namespace {

double dense_kappa(const BandedLowerMatrix& A) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.to_dense());
  const auto& s = svd.singularValues();
  return s(0) / s(s.size() - 1);
}

}  // namespace

TEST_CASE("root classification of every family") {
  for (int M = 1; M <= 6; ++M) {
    CHECK(classify(build_scheme(SchemeFamily::AdamsBashforth, M)).classification == StabilityClass::Stable);
    const auto bdf = classify(build_scheme(SchemeFamily::BDF, M));
    CHECK(bdf.classification == StabilityClass::Stable);
    CHECK(bdf.roots.empty());
  }
  const auto am1 = classify(build_scheme(SchemeFamily::AdamsMoulton, 1));
  CHECK(am1.classification == StabilityClass::Marginal);
  REQUIRE(am1.roots.size() == 1u);
  CHECK(std::abs(am1.roots[0] - std::complex<double>(-1.0, 0.0)) < 1e-10);
  for (int M = 2; M <= 4; ++M) {
    CHECK(classify(build_scheme(SchemeFamily::AdamsMoulton, M)).classification == StabilityClass::Unstable);
  }
}

TEST_CASE("A-M 2 dominant root agrees with the quadratic formula") {
  // p(z) = (5 z² + 8 z - 1) / 12.
  const double oracle = (8.0 + std::sqrt(64.0 + 20.0)) / 10.0;
  const auto r = classify(build_scheme(SchemeFamily::AdamsMoulton, 2));
  CHECK(r.max_modulus == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(r.max_modulus == doctest::Approx(1.71652).epsilon(1e-3 / 1.71652));
}

TEST_CASE("characteristic polynomial vanishes at its roots") {
  for (auto f : {SchemeFamily::AdamsBashforth, SchemeFamily::AdamsMoulton}) {
    for (int M = 1; M <= 6; ++M) {
      const auto s = build_scheme(f, M);
      const auto poly = characteristic_polynomial(s);
      for (const auto& z : polynomial_roots(poly)) CHECK(std::abs(poly(z)) < 1e-9 * std::max(1.0, std::pow(std::abs(z), poly.degree)));
    }
  }
}

TEST_CASE("exact condition numbers agree with a dense SVD") {
  for (auto f : {SchemeFamily::AdamsBashforth, SchemeFamily::AdamsMoulton, SchemeFamily::BDF}) {
    for (int M : {1, 2, 4}) {
      const auto A = assemble_A(build_scheme(f, M), 40);
      const double ref = dense_kappa(A);
      if (!std::isfinite(ref) || ref > 1e12) continue;
      CHECK(condition_number_exact(A) == doctest::Approx(ref).epsilon(1e-8));
    }
  }
}

TEST_CASE("iterative and exact condition numbers agree") {
  for (auto f : {SchemeFamily::AdamsBashforth, SchemeFamily::BDF}) {
    const auto A = assemble_A(build_scheme(f, 3), 300);
    CHECK(condition_number_iterative(A, 1e-10) == doctest::Approx(condition_number_exact(A)).epsilon(1e-5));
  }
  const auto am1 = assemble_A(build_scheme(SchemeFamily::AdamsMoulton, 1), 200);
  CHECK(condition_number_iterative(am1, 1e-10) == doctest::Approx(condition_number_exact(am1)).epsilon(1e-4));
}

TEST_CASE("scan returns one sample per N in order") {
  const std::vector<int> Ns{16, 32, 64};
  const auto scan = boundedness_scan(build_scheme(SchemeFamily::BDF, 2), Ns);
  REQUIRE(scan.size() == 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(scan[i].N == Ns[i]);
    CHECK(scan[i].kappa2 == doctest::Approx(1.0));
  }
}

TEST_CASE("kappa of a stable scheme stays bounded while A-M 1 grows") {
  const auto ab = boundedness_scan(build_scheme(SchemeFamily::AdamsBashforth, 2), {64, 128, 256});
  CHECK(ab.back().kappa2 / ab.front().kappa2 < 1.25);
  const auto am = boundedness_scan(build_scheme(SchemeFamily::AdamsMoulton, 1), {64, 128, 256});
  CHECK(am[1].kappa2 / am[0].kappa2 == doctest::Approx(2.0).epsilon(0.3));
  CHECK(am[2].kappa2 / am[1].kappa2 == doctest::Approx(2.0).epsilon(0.3));
}
