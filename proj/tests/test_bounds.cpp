#include "doctest.h"

#include "topocirc/bounds.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

using namespace topocirc;

namespace {

MatrixXcd exp_oracle(const MatrixXcd& h, double t) { return MatrixXcd(cplx(0.0, -t) * h).exp(); }

MatrixXcd embed(const MatrixXcd& op, int first, int width, int n) {
  MatrixXcd left = MatrixXcd::Identity(std::int64_t{1} << first, std::int64_t{1} << first);
  MatrixXcd right = MatrixXcd::Identity(std::int64_t{1} << (n - first - width), std::int64_t{1} << (n - first - width));
  return kron(kron(left, op), right);
}

LocalHamiltonian commuting_chain(int n) {
  LocalHamiltonian h;
  h.n_sites = n;
  h.local_dim = 2;
  for (int j = 0; j + 1 < n; ++j) h.terms.push_back({{j, j + 1}, 0.7 * kron(pauli('z'), pauli('z'))});
  for (int j = 0; j < n; ++j) h.terms.push_back({{j}, 0.3 * pauli('z')});
  return h;
}

}  // namespace

TEST_CASE("evolve: constant Hamiltonians") {
  const LocalHamiltonian tfim = build_tfim(4, 0.8, Boundary::open);
  const MatrixXcd h = assemble_dense(tfim);
  CHECK((evolve(constant_hamiltonian(tfim), 0.7, 1) - exp_oracle(h, 0.7)).cwiseAbs().maxCoeff() < 1e-10);

  // Marked time-dependent, so the integrator runs; a constant H is exact per step.
  TimeDependentHamiltonian td = constant_hamiltonian(tfim);
  td.time_independent = false;
  CHECK((evolve(td, 0.7, 3) - exp_oracle(h, 0.7)).cwiseAbs().maxCoeff() < 1e-10);

  TimeDependentHamiltonian zero;
  zero.n_sites = 3;
  zero.local_dim = 2;
  CHECK((evolve(zero, 1.0, 2) - MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-14);

  TimeDependentHamiltonian big = constant_hamiltonian(build_tfim(14, 1.0, Boundary::open));
  CHECK_THROWS_AS(evolve(big, 1.0, 1), Error);
}

TEST_CASE("evolve: time-ordered integration converges at fourth order") {
  std::mt19937_64 rng(2);
  const auto [h0, h1] = random_bound_instance(0.5, rng);
  const MatrixXcd ref = evolve(h1, 1.0, 256);
  double previous = 0.0;
  for (int s : {4, 8, 16}) {
    const double err = spectral_norm(evolve(h1, 1.0, s) - ref);
    if (previous > 0.0) CHECK(previous / err > 10.0);
    previous = err;
  }
  const AdaptiveEvolution a = evolve_converged(h1, 1.0);
  CHECK(a.self_consistency <= 1e-9);
  CHECK(is_unitary(a.unitary, 1e-9));

  // Piecewise-constant oracle: fine midpoint products of exact exponentials.
  const int fine = 4000;
  MatrixXcd u = MatrixXcd::Identity(8, 8);
  for (int k = 0; k < fine; ++k) u = exp_oracle(h1.dense((k + 0.5) / fine), 1.0 / fine) * u;
  CHECK(spectral_norm(u - a.unitary) < 1e-6);
}

TEST_CASE("interaction-picture distance bound") {
  TimeDependentHamiltonian h0;
  h0.n_sites = 1;
  h0.local_dim = 2;
  h0.terms = [](double) { return std::vector<LocalOp>{{{0}, pauli('z')}}; };
  const TimeDependentHamiltonian h1 = add_drive(h0, {{{0}, pauli('x')}}, [](double) { return 0.1; });

  SUBCASE("identical Hamiltonians") {
    const DistanceBound b = check_interaction_picture_bound(h0, h0, 1.0, 0.0);
    CHECK(b.lhs < 1e-12);
    CHECK(b.pass);
  }
  SUBCASE("sigma^z against sigma^z + 0.1 sigma^x") {
    const DistanceBound b = check_interaction_picture_bound(h0, h1, 1.0, 0.1);
    const double oracle = spectral_norm(exp_oracle(pauli('z'), 1.0) - exp_oracle(pauli('z') + 0.1 * pauli('x'), 1.0));
    CHECK(std::abs(b.lhs - oracle) < 1e-9);
    CHECK(b.lhs <= 0.1);
    CHECK(b.pass);
  }
  SUBCASE("violated precondition") {
    try {
      check_interaction_picture_bound(h0, h1, 1.0, 0.05);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::input);
    }
  }
  SUBCASE("random three-site instances") {
    std::mt19937_64 rng(77);
    int passed = 0;
    for (int i = 0; i < 100; ++i) {
      const double delta = 0.05 + 0.01 * (i % 30);
      const auto [a, b] = random_bound_instance(delta, rng);
      const DistanceBound r = check_interaction_picture_bound(a, b, 1.0, delta);
      CHECK(r.sup_difference <= delta + 1e-12);
      if (r.pass) ++passed;
    }
    CHECK(passed == 100);
  }
}

TEST_CASE("Lieb-Robinson truncation decay") {
  const LocalHamiltonian tfim = build_tfim(10, 1.0, Boundary::open);
  const auto rows = lr_truncation_decay(tfim, pauli('z'), {2, 4, 6, 8, 10}, 1.0, 2);
  std::vector<double> x, y;
  for (const auto& r : rows) {
    CHECK(r.difference >= 0.0);
    if (r.l < 10) {
      x.push_back(r.l);
      y.push_back(r.difference);
    }
  }
  CHECK(rows.back().difference < 1e-9);
  const LogLinearFit fit = fit_log_linear(x, y);
  CHECK(fit.slope < 0.0);
  CHECK(fit.r_squared > 0.9);

  for (const auto& r : lr_truncation_decay(commuting_chain(6), pauli('z'), {2, 3, 4, 5, 6})) CHECK(r.difference < 1e-12);
  CHECK_THROWS_AS(lr_truncation_decay(build_tfim(6, 1.0, Boundary::periodic), pauli('z'), {2}), Error);
  CHECK_THROWS_AS(lr_truncation_decay(tfim, 2.0 * pauli('z'), {2}), Error);
}

TEST_CASE("first-order Trotter error") {
  for (const auto& r : trotter_error_scan(commuting_chain(5), 1.0, {1, 2, 8})) CHECK(r.error < 1e-12);

  const int n = 6;
  const LocalHamiltonian tfim = build_tfim(n, 1.0, Boundary::open);
  const auto rows = trotter_error_scan(tfim, 1.0, {8, 16, 32, 64, 128, 512}, 3);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].error <= rows[i - 1].error + 1e-10);
  for (std::size_t i = 1; i + 1 < 4; ++i) {
    const double ratio = rows[i].error / rows[i + 1].error;
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
  }

  // Leading-order bound t^2 |[A, B]| / (2 s) for the odd/even bond split.
  const auto bonds = bond_terms(tfim);
  const auto dim = std::int64_t{1} << n;
  MatrixXcd odd = MatrixXcd::Zero(dim, dim), even = MatrixXcd::Zero(dim, dim);
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    const auto& term = bonds[b];
    const MatrixXcd full = embed(term.matrix, term.sites.front(), static_cast<int>(term.sites.size()), n);
    (b % 2 == 1 ? odd : even) += full;
  }
  const double bound = spectral_norm(odd * even - even * odd) / (2.0 * 512);
  CHECK(rows.back().error <= bound * 1.01);
  CHECK(rows.back().error >= bound * 0.25);

  const auto threaded = trotter_error_scan(tfim, 1.0, {16, 32}, 2);
  const auto serial = trotter_error_scan(tfim, 1.0, {16, 32}, 1);
  CHECK(threaded[0].error == serial[0].error);
  CHECK(threaded[1].error == serial[1].error);
}

TEST_CASE("Trotter error at s=512 below 1e-3 on the n=6 chain") {
  // Same chain as the scaling check above: mu = 1, t = 1.
  const auto rows = trotter_error_scan(build_tfim(6, 1.0, Boundary::open), 1.0, {512});
  CHECK(rows.front().error < 1e-3);
}

TEST_CASE("time-dependent Trotter composition") {
  const auto h = interpolated_hamiltonian(build_tfim(5, 0.0, Boundary::open), build_tfim(5, 2.0, Boundary::open), 1.0);
  const auto rows = trotter_error_scan(h, 1.0, {16, 32, 64});
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double ratio = rows[i].error / rows[i + 1].error;
    CHECK(ratio >= 1.7);
    CHECK(ratio <= 2.3);
  }
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<int> hits(50, 0);
  parallel_for(50, 4, [&](int i) { hits[i] += 1; });
  for (int v : hits) CHECK(v == 1);
  CHECK_THROWS_AS(parallel_for(5, 2, [](int i) {
                    if (i == 3) throw Error(ErrorKind::input, "boom");
                  }),
                  Error);
}
