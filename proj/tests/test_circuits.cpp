#include "doctest.h"

#include "topocirc/circuits.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace topocirc;

namespace {

MatrixXcd embed(const MatrixXcd& op, int first, int width, int n, int d) {
  const auto left = checked_pow(d, first, 1 << 24), right = checked_pow(d, n - first - width, 1 << 24);
  return kron(kron(MatrixXcd(MatrixXcd::Identity(left, left)), op), MatrixXcd(MatrixXcd::Identity(right, right)));
}

// Applies one factor acting on sites [first, first + width) by reshaping the vector.
VectorXcd apply_block(const VectorXcd& psi, const MatrixXcd& op, int first, int width, int n, int d) {
  const auto mid = checked_pow(d, width, 1 << 24), right = checked_pow(d, n - first - width, 1 << 24);
  const auto left = psi.size() / (mid * right);
  VectorXcd out(psi.size());
  for (std::int64_t l = 0; l < left; ++l) {
    Eigen::Map<const MatrixXcd> in(psi.data() + l * mid * right, right, mid);
    Eigen::Map<MatrixXcd> res(out.data() + l * mid * right, right, mid);
    res = in * op.transpose();
  }
  return out;
}

// String operator applied factor by factor.
VectorXcd apply_string(const StringOperator& q, const VectorXcd& psi) {
  const int d = q.local_dim, n = q.n_sites;
  VectorXcd v = apply_block(psi, q.left_end.matrix, q.left_end.start, q.left_end.width, n, d);
  v = apply_block(v, q.right_end.matrix, q.right_end.start, q.right_end.width, n, d);
  for (int s = q.string_begin; s < q.string_end; ++s) v = apply_block(v, q.string_factor, s, 1, n, d);
  return v;
}

// Two spin-1/2 singlets pattern on 2n constituents (p first factor).
VectorXcd singlets(int halves, const std::vector<std::pair<int, int>>& pairs) {
  const std::int64_t dim = std::int64_t{1} << halves;
  VectorXcd v = VectorXcd::Zero(dim);
  for (std::int64_t idx = 0; idx < dim; ++idx) {
    double amp = 1.0;
    for (auto [p, q] : pairs) {
      const int bp = static_cast<int>((idx >> (halves - 1 - p)) & 1);
      const int bq = static_cast<int>((idx >> (halves - 1 - q)) & 1);
      amp *= (bp == bq) ? 0.0 : (bp == 0 ? 1.0 : -1.0) / std::sqrt(2.0);
    }
    v(idx) = amp;
  }
  return v;
}

}  // namespace

TEST_CASE("circuit validation") {
  std::mt19937_64 rng(1);
  LocalCircuit c = random_circuit(5, 2, 3, rng);
  CircuitReport r = validate_circuit(c);
  CHECK(r.valid);
  CHECK(r.depth == 3);
  CHECK(r.max_gate_size == 2);
  CHECK(c.gate_count() == 6);

  LocalCircuit bad = c;
  bad.layers[0].push_back({{1, 2}, random_unitary(4, rng)});
  CHECK_FALSE(validate_circuit(bad).valid);
  bad = c;
  bad.layers[0][0].matrix *= 2.0;
  CHECK_FALSE(validate_circuit(bad).valid);
  bad = c;
  bad.layers[0][0].sites = {0, 2};
  CHECK_FALSE(validate_circuit(bad).valid);
  bad = c;
  bad.layers[0][0].sites = {1, 0};
  CHECK_FALSE(validate_circuit(bad).valid);
  // Wrap-around gate on the pair left idle by the second layer.
  LocalCircuit wrap = random_circuit(6, 2, 2, rng);
  wrap.layers[1].push_back({{0, 5}, random_unitary(4, rng)});
  CHECK(validate_circuit(wrap).valid);
}

TEST_CASE("composition and adjoint") {
  std::mt19937_64 rng(2);
  const LocalCircuit a = random_circuit(4, 3, 2, rng);
  const LocalCircuit b = random_circuit(4, 3, 3, rng);
  const LocalCircuit ab = compose(a, b);
  CHECK(ab.depth() == 5);
  CHECK((circuit_unitary(ab) - circuit_unitary(b) * circuit_unitary(a)).cwiseAbs().maxCoeff() < 1e-12);
  const MatrixXcd id = circuit_unitary(compose(a, adjoint(a)));
  CHECK((id - MatrixXcd::Identity(81, 81)).cwiseAbs().maxCoeff() < 1e-12);

  const Statevector psi(4, 3, random_unit_vector(81, rng));
  CHECK((apply_circuit(ab, psi).amplitudes - circuit_unitary(ab) * psi.amplitudes).norm() < 1e-12);
}

TEST_CASE("symmetric gates") {
  const SymmetryRep rep = build_z2z2_rep(3);
  std::mt19937_64 rng(3);
  const MatrixXcd g = random_symmetric_gate(rep, 2, rng);
  CHECK(is_unitary(g));
  CHECK(is_symmetric(Gate{{0, 1}, g}, rep));
  CHECK_FALSE(is_symmetric(Gate{{0, 1}, random_unitary(9, rng)}, rep));
  const LocalCircuit c = random_symmetric_circuit(7, 3, rep, rng);
  CHECK(validate_circuit(c).valid);
  CHECK(is_symmetric(c, rep));
  // A gate picking up a global phase still counts as symmetric.
  CHECK(is_symmetric(Gate{{0}, MatrixXcd(cplx(0, 1) * rep.site_unitary[1])}, rep));
}

TEST_CASE("swap of right constituents") {
  const MatrixXcd s = swap_right_constituents();
  CHECK(is_unitary(s));
  CHECK(is_symmetric(Gate{{0, 1}, s}, build_z2z2_rep(4), 1e-12));
  // Constituent order (la, ra, lb, rb) -> (la, rb, lb, ra).
  for (int la = 0; la < 2; ++la)
    for (int ra = 0; ra < 2; ++ra)
      for (int lb = 0; lb < 2; ++lb)
        for (int rb = 0; rb < 2; ++rb) {
          const int in = 8 * la + 4 * ra + 2 * lb + rb;
          const int out = 8 * la + 4 * rb + 2 * lb + ra;
          CHECK(std::abs(s(out, in) - 1.0) < 1e-15);
        }
}

TEST_CASE("singlet swap circuit turns on-site singlets into bond singlets") {
  for (int n : {3, 4, 5}) {
    const LocalCircuit c = build_singlet_swap_circuit(n);
    CHECK(c.depth() == n - 1);
    CHECK(validate_circuit(c).valid);
    std::vector<std::pair<int, int>> onsite, bonds;
    for (int k = 0; k < n; ++k) {
      onsite.push_back({2 * k, 2 * k + 1});
      if (k + 1 < n) bonds.push_back({2 * k + 1, 2 * k + 2});
    }
    bonds.push_back({0, 2 * n - 1});
    const Statevector out = apply_circuit(c, Statevector(n, 4, singlets(2 * n, onsite)));
    const VectorXcd target = singlets(2 * n, bonds);
    CHECK(std::abs(std::norm(target.dot(out.amplitudes)) - 1.0) < 1e-12);
  }
}

TEST_CASE("string operators") {
  const SpinMatrices s = spin_matrices(3);
  const MatrixXcd rot = expi_hermitian(s.y, std::numbers::pi);
  const StringOperator q = make_string_operator(9, 3, 6, s.y, rot);
  CHECK(q.string_begin == 4);
  CHECK(q.string_end == 6);
  const ProductOp p = q.to_product_op();
  CHECK(p.size() == 4);
  std::mt19937_64 rng(4);
  const VectorXcd psi = random_unit_vector(19683, rng);
  CHECK((apply_product(psi, 9, 3, p) - apply_string(q, psi)).norm() < 1e-12);
  VectorXcd manual = apply_block(psi, s.y, 3, 1, 9, 3);
  manual = apply_block(manual, s.y, 6, 1, 9, 3);
  manual = apply_block(manual, rot, 4, 1, 9, 3);
  manual = apply_block(manual, rot, 5, 1, 9, 3);
  CHECK((apply_string(q, psi) - manual).norm() < 1e-12);
  const VectorXcd small = random_unit_vector(27, rng);
  CHECK((apply_block(small, rot, 1, 1, 3, 3) - embed(rot, 1, 1, 3, 3) * small).norm() < 1e-13);
  CHECK_THROWS_AS(make_string_operator(9, 6, 3, s.y, rot), Error);
  StringOperator broken = q;
  broken.string_begin = 2;
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("causal-cone reduction equals dense conjugation at n=9") {
  const SymmetryRep rep = build_z2z2_rep(3);
  const SpinMatrices s = spin_matrices(3);
  const StringOperator q = make_string_operator(9, 3, 6, s.y, expi_hermitian(s.y, std::numbers::pi));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    const LocalCircuit c = random_symmetric_circuit(9, 1, rep, rng);
    const ConeReduction red = causal_cone_reduce_detailed(c, q);
    CHECK(red.reduced.left_end.width == 2);
    CHECK(red.reduced.right_end.width == 2);
    CHECK(red.cancelled_gates == 2);
    for (int k = 0; k < 2; ++k) {
      const Statevector psi(9, 3, random_unit_vector(19683, rng));
      const VectorXcd reduced = apply_product(psi.amplitudes, 9, 3, red.reduced.to_product_op());
      const VectorXcd conj = apply_circuit(adjoint(c), Statevector(9, 3, apply_string(q, apply_circuit(c, psi).amplitudes))).amplitudes;
      CHECK((reduced - conj).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("causal-cone reduction on qubits with deeper circuits") {
  // Z2 generated by X on spin-1/2; string of X, ends Z.
  SymmetryRep rep;
  rep.labels = {"e", "x"};
  rep.table = {{0, 1}, {1, 0}};
  rep.site_unitary = {MatrixXcd::Identity(2, 2), pauli('x')};
  const StringOperator q = make_string_operator(12, 3, 9, pauli('z'), pauli('x'));
  std::mt19937_64 rng(6);
  const LocalCircuit c = random_symmetric_circuit(12, 2, rep, rng);
  const StringOperator red = causal_cone_reduce(c, q);
  const MatrixXcd u = circuit_unitary(c);
  for (int k = 0; k < 3; ++k) {
    const VectorXcd psi = random_unit_vector(4096, rng);
    CHECK((apply_string(red, psi) - u.adjoint() * apply_string(q, u * psi)).cwiseAbs().maxCoeff() < 1e-10);
  }

  LocalCircuit identity;
  identity.n_sites = 12;
  identity.local_dim = 2;
  const StringOperator same = causal_cone_reduce(identity, q);
  const VectorXcd phi = random_unit_vector(4096, rng);
  CHECK((apply_string(same, phi) - apply_string(q, phi)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("causal-cone reduction errors") {
  const SymmetryRep rep = build_z2z2_rep(3);
  const SpinMatrices s = spin_matrices(3);
  const StringOperator q = make_string_operator(9, 3, 6, s.y, expi_hermitian(s.y, std::numbers::pi));
  std::mt19937_64 rng(7);
  try {
    causal_cone_reduce(random_symmetric_circuit(9, 3, rep, rng), q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::reduction);
  }
  LocalCircuit c;
  c.n_sites = 9;
  c.local_dim = 3;
  c.layers = {{Gate{{4, 5}, random_unitary(9, rng)}}};
  try {
    causal_cone_reduce(c, q);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::symmetry);
  }
}

TEST_CASE("bond terms and Trotter circuits") {
  const int n = 6;
  const LocalHamiltonian h = build_tfim(n, 0.8, Boundary::periodic);
  MatrixXcd sum = MatrixXcd::Zero(64, 64);
  for (const auto& b : bond_terms(h)) {
    REQUIRE(b.sites.size() == 2);
    if (b.sites[1] == b.sites[0] + 1) {
      sum += embed(b.matrix, b.sites[0], 2, n, 2);
      continue;
    }
    // Wrap bond {0, n-1}: expand in matrix units, site 0 as first factor.
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
          for (int l = 0; l < 2; ++l) {
            MatrixXcd e0 = MatrixXcd::Zero(2, 2), e1 = MatrixXcd::Zero(2, 2);
            e0(i, j) = 1.0;
            e1(k, l) = 1.0;
            sum += b.matrix(2 * i + k, 2 * j + l) * embed(e0, 0, 1, n, 2) * embed(e1, n - 1, 1, n, 2);
          }
  }
  const MatrixXcd dense = assemble_dense(h);
  CHECK((sum - dense).cwiseAbs().maxCoeff() < 1e-14);

  const LocalCircuit c = trotterize(h, 0.5, 4);
  CHECK(c.depth() == 8);
  CHECK(validate_circuit(c).valid);
  const MatrixXcd exact = MatrixXcd(cplx(0, -0.5) * dense).exp();
  const double e4 = spectral_norm(exact - circuit_unitary(c));
  const double e8 = spectral_norm(exact - circuit_unitary(trotterize(h, 0.5, 8)));
  CHECK(e8 < e4);
  CHECK(e4 / e8 > 1.7);

  LocalHamiltonian commuting;
  commuting.n_sites = 4;
  commuting.local_dim = 2;
  for (int j = 0; j + 1 < 4; ++j) commuting.terms.push_back({{j, j + 1}, kron(pauli('z'), pauli('z'))});
  const MatrixXcd exact_c = MatrixXcd(cplx(0, -1.3) * assemble_dense(commuting)).exp();
  CHECK((circuit_unitary(trotterize(commuting, 1.3, 1)) - exact_c).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(trotterize(build_tfim(5, 1.0, Boundary::periodic), 1.0, 2), Error);
  CHECK_THROWS_AS(trotterize(h, 1.0, 0), Error);
}

TEST_CASE("circuit file round trip") {
  std::mt19937_64 rng(8);
  const LocalCircuit c = random_symmetric_circuit(5, 2, build_z2z2_rep(3), rng);
  std::stringstream ss;
  write_circuit(ss, c);
  const LocalCircuit back = read_circuit(ss);
  REQUIRE(back.depth() == c.depth());
  CHECK(back.n_sites == 5);
  CHECK((circuit_unitary(back) - circuit_unitary(c)).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream bad("topocirc-circuit 2\n");
  CHECK_THROWS_AS(read_circuit(bad), Error);
}
