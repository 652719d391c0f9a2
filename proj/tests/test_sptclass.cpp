#include "doctest.h"

#include "topocirc/sptclass.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace topocirc;

namespace {

constexpr double pi = std::numbers::pi;

double symmetry_residual(const MatrixProductState& mps, const MatrixXcd& u, const MatrixXcd& v, double theta) {
  const auto& a = mps.tensors.front();
  double r = 0.0;
  for (int i = 0; i < mps.local_dim; ++i) {
    MatrixXcd ua = MatrixXcd::Zero(a[i].rows(), a[i].cols());
    for (int j = 0; j < mps.local_dim; ++j) ua += u(i, j) * a[j];
    r = std::max(r, (ua - std::polar(1.0, theta) * v.adjoint() * a[i] * v).norm());
  }
  return r;
}

SymmetryRep pauli_group() {
  SymmetryRep g = build_z2z2_rep(3);
  g.site_unitary = {MatrixXcd::Identity(2, 2), pauli('x'), pauli('y'), pauli('z')};
  return g;
}

std::vector<MatrixXcd> paulis() { return {MatrixXcd::Identity(2, 2), pauli('x'), pauli('y'), pauli('z')}; }

// Translation-invariant circuit on the unblocked chain equal to a uniform
// brick on the chain blocked in pairs.
LocalCircuit paired_brick_circuit(int n, int d, const std::vector<MatrixXcd>& gates) {
  LocalCircuit c;
  c.n_sites = n;
  c.local_dim = d;
  MatrixXcd swap = MatrixXcd::Zero(d * d, d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) swap(b * d + a, a * d + b) = 1.0;
  for (std::size_t l = 0; l < gates.size(); ++l) {
    Layer layer;
    for (int k = 0; k < n / 2; ++k) {
      const int s = 2 * k + static_cast<int>(l % 2);
      if (s + 1 < n)
        layer.push_back({{s, s + 1}, gates[l]});
      else
        layer.push_back({{0, n - 1}, swap * gates[l] * swap});
    }
    c.layers.push_back(layer);
  }
  return c;
}

}  // namespace

TEST_CASE("Haldane string operator shape") {
  const StringOperator q = haldane_string_operator(30);
  CHECK(q.left_end.start == 10);
  CHECK(q.right_end.start == 20);
  CHECK(q.string_begin == 11);
  CHECK(q.string_end == 20);
  CHECK(is_hermitian(q.left_end.matrix));
  CHECK(is_hermitian(q.right_end.matrix));
  CHECK(is_unitary(q.string_factor));
  CHECK_THROWS_AS(haldane_string_operator(8), Error);
  CHECK_THROWS_AS(haldane_string_operator(30, 2), Error);
}

TEST_CASE("Haldane string order on reference states") {
  const StringOperator q4 = haldane_string_operator(60, 4);
  CHECK(std::abs(expect_string(fixed_point_state(FixedPointKind::trivial, 60), q4)) < 1e-10);
  CHECK(std::abs(expect_string(fixed_point_state(FixedPointKind::dimer, 60), q4)) >= 0.2);
  const StringOperator q3 = haldane_string_operator(60, 3);
  const cplx aklt = expect_string(aklt_state(60), q3);
  CHECK(std::abs(aklt) >= 0.4);
  CHECK(std::abs(aklt.real() + 4.0 / 9.0) < 1e-8);
  const cplx projected = expect_string(project_to_spin1(fixed_point_state(FixedPointKind::dimer, 60)), q3);
  CHECK(std::abs(projected) >= 0.4);
}

TEST_CASE("AKLT string order matches the dense periodic ground state at n=9") {
  const GroundState gs = ground_state(build_spin1_chain(9, Spin1Kind::aklt, Boundary::periodic));
  const StringOperator q = haldane_string_operator(9);
  const cplx dense = expect(gs.state, q.to_product_op());
  const cplx mps = expect_string(aklt_state(9), q);
  CHECK(std::abs(dense - mps) < 1e-8);
}

TEST_CASE("blocked string operator acts like the original") {
  std::mt19937_64 rng(11);
  for (int n : {10, 12}) {
    const StringOperator q = haldane_string_operator(n, 3);
    const StringOperator b = block_string_operator(q, 2);
    CHECK(b.local_dim == 9);
    CHECK(b.n_sites == n / 2);
    const VectorXcd psi = random_unit_vector(checked_pow(3, n, 1 << 20), rng);
    const VectorXcd lhs = apply_product(psi, n, 3, q.to_product_op());
    const VectorXcd rhs = apply_product(psi, n / 2, 9, b.to_product_op());
    CHECK((lhs - rhs).norm() < 1e-12);
  }
  CHECK_THROWS_AS(block_string_operator(haldane_string_operator(9, 3), 2), Error);
}

TEST_CASE("fermionic string operator") {
  const FermionicStringOperator f = fermionic_string_operator(9);
  CHECK(f.left_mode == 3);
  CHECK(f.right_mode == 6);
  const PauliSum image = jw_map(f.polynomial);
  REQUIRE(image.terms().size() == 1);
  PauliSum::String xx(9, 0);
  xx[3] = xx[6] = 1;
  CHECK(image.terms().begin()->first == xx);
  CHECK(std::abs(image.terms().begin()->second - 1.0) < 1e-14);
  CHECK_THROWS_AS(fermionic_string_operator(8), Error);

  const CovarianceMatrix inf = gaussian_ground_state(build_majorana_chain(9, std::numeric_limits<double>::infinity()));
  CHECK(std::abs(gaussian_expect(inf, f.polynomial)) < 1e-12);
  const CovarianceMatrix zero = gaussian_ground_state(build_majorana_chain(9, 0.0));
  const double gauss = gaussian_expect(zero, f.polynomial).real();
  CHECK(std::abs(std::abs(gauss) - 1.0) < 1e-10);

  // Dense oracle: even-sector ground state of the mapped chain.
  GroundStateOptions opt;
  opt.sector = even_parity_sector();
  const GroundState gs = ground_state(jw_map(build_majorana_chain(9, 0.0)), opt);
  const cplx dense = expect(gs.state, ProductOp{{{3}, pauli('x')}, {{6}, pauli('x')}});
  CHECK(std::abs(dense.real() - gauss) < 1e-10);
}

TEST_CASE("fermionic string operator equals sigma^x sigma^x on the even sector") {
  for (int n : {9, 10}) {
    const FermionicStringOperator f = fermionic_string_operator(n);
    // Dense Majorana product built from Kronecker products.
    auto majorana = [&](int idx) {
      const int j = idx / 2;
      const MatrixXcd local = (idx % 2 == 0) ? MatrixXcd(pauli('x')) : MatrixXcd(-pauli('y'));
      MatrixXcd m = MatrixXcd::Identity(1, 1);
      for (int l = 0; l < n; ++l) m = kron(m, l < j ? MatrixXcd(-pauli('z')) : (l == j ? local : MatrixXcd::Identity(2, 2)));
      return m;
    };
    const auto dim = std::int64_t{1} << n;
    MatrixXcd op = MatrixXcd::Zero(dim, dim);
    for (const auto& [mono, coef] : f.polynomial.terms()) {
      MatrixXcd m = MatrixXcd::Identity(dim, dim);
      for (int idx : mono) m = m * majorana(idx);
      op += coef * m;
    }
    MatrixXcd xx = MatrixXcd::Identity(1, 1);
    MatrixXcd parity = MatrixXcd::Identity(1, 1);
    for (int l = 0; l < n; ++l) {
      xx = kron(xx, (l == f.left_mode || l == f.right_mode) ? MatrixXcd(pauli('x')) : MatrixXcd::Identity(2, 2));
      parity = kron(parity, MatrixXcd(-pauli('z')));
    }
    const MatrixXcd even = (MatrixXcd::Identity(dim, dim) + parity) * 0.5;
    CHECK(((op - xx) * even).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("projective representation of a product state") {
  VectorXcd zero = VectorXcd::Zero(3);
  zero(1) = 1.0;
  const MatrixProductState mps = product_mps(12, zero);
  const SymmetryRep rep = build_z2z2_rep(3);
  const ProjectiveRep pr = extract_projective_rep(mps, rep);
  for (int g = 0; g < 4; ++g) {
    REQUIRE(pr.v[g].rows() == 1);
    CHECK(std::abs(pr.v[g](0, 0) - 1.0) < 1e-12);
    CHECK(pr.residual[g] < 1e-12);
  }
  CHECK(std::abs(std::cos(pr.theta[1]) + 1.0) < 1e-12);
}

TEST_CASE("AKLT projective representation is the Pauli group") {
  const MatrixProductState mps = aklt_state(20);
  const SymmetryRep rep = build_z2z2_rep(3);
  const ProjectiveRep pr = extract_projective_rep(mps, rep);
  const auto p = paulis();
  for (int g = 0; g < 4; ++g) {
    CHECK(is_unitary(pr.v[g], 1e-10));
    CHECK(std::abs(std::abs((p[g].adjoint() * pr.v[g]).trace()) / 2.0 - 1.0) < 1e-10);
    CHECK(pr.residual[g] < 1e-8);
    CHECK(symmetry_residual(mps, rep.site_unitary[g], pr.v[g], pr.theta[g]) < 1e-8);
  }
}

TEST_CASE("dimer fixed point carries anticommuting V") {
  const MatrixProductState mps = fixed_point_state(FixedPointKind::dimer, 10);
  const SymmetryRep rep = build_z2z2_rep(4);
  const ProjectiveRep pr = extract_projective_rep(mps, rep);
  for (int a = 1; a < 4; ++a) {
    CHECK(symmetry_residual(mps, rep.site_unitary[a], pr.v[a], pr.theta[a]) < 1e-8);
    for (int b = a + 1; b < 4; ++b) CHECK((pr.v[a] * pr.v[b] + pr.v[b] * pr.v[a]).norm() < 1e-10);
  }
}

TEST_CASE("factor systems") {
  SUBCASE("linear representation") {
    const SymmetryRep rep = build_z2z2_rep(3);
    const FactorSystem fs = factor_system(rep.site_unitary, rep);
    for (const auto& row : fs.omega)
      for (cplx w : row) CHECK(std::abs(w - 1.0) < 1e-10);
    CHECK(cocycle_residual(fs) < 1e-12);
    CHECK(cohomology_class_z2z2(fs).label == SptLabel::trivial);
  }
  SUBCASE("Pauli representation") {
    const SymmetryRep g = pauli_group();
    const FactorSystem fs = factor_system(paulis(), g);
    // XZ = -iY and ZX = iY.
    CHECK(std::abs(fs.omega[1][3] - cplx(0, -1)) < 1e-12);
    CHECK(std::abs(fs.omega[3][1] - cplx(0, 1)) < 1e-12);
    const ProjectiveClass pc = cohomology_class_z2z2(fs);
    CHECK(std::abs(pc.commutator_xz + 1.0) < 1e-12);
    CHECK(pc.label == SptLabel::nontrivial);
    CHECK(cocycle_residual(fs) < 1e-12);
    CHECK(std::abs(commutator_phase(pauli('x'), pauli('z')) + 1.0) < 1e-12);
  }
  SUBCASE("gauge invariance under rephasing") {
    const SymmetryRep g = pauli_group();
    const FactorSystem fs = factor_system(paulis(), g);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * pi);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<cplx> beta(4);
      std::vector<MatrixXcd> vs = paulis();
      for (int k = 0; k < 4; ++k) {
        beta[k] = std::polar(1.0, angle(rng));
        vs[k] *= beta[k];
      }
      const FactorSystem fs2 = factor_system(vs, g);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const cplx expected = fs.omega[a][b] * beta[a] * beta[b] / beta[g.table[a][b]];
          CHECK(std::abs(fs2.omega[a][b] - expected) < 1e-10);
        }
      const auto p1 = cohomology_class_z2z2(fs).invariant_phases;
      const auto p2 = cohomology_class_z2z2(fs2).invariant_phases;
      for (const auto& [key, value] : p1) CHECK(std::abs(p2.at(key) - value) < 1e-10);
    }
  }
  SUBCASE("inconsistent input") {
    const SymmetryRep g = pauli_group();
    std::vector<MatrixXcd> vs = paulis();
    vs[2] = pauli('x');
    try {
      factor_system(vs, g);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::inconsistent_rep);
    }
  }
  SUBCASE("phase that is not +-1") {
    FactorSystem fs = factor_system(paulis(), pauli_group());
    fs.omega[1][3] *= std::polar(1.0, 0.3);
    try {
      cohomology_class_z2z2(fs);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::classification);
    }
  }
  SUBCASE("group other than Z2 x Z2") {
    FactorSystem fs = factor_system(paulis(), pauli_group());
    fs.labels = {"e", "a", "b", "c"};
    CHECK_THROWS_AS(cohomology_class_z2z2(fs), Error);
  }
}

TEST_CASE("classification pipeline") {
  VectorXcd zero = VectorXcd::Zero(3);
  zero(1) = 1.0;
  const ClassificationReport product = classify(product_mps(60, zero), build_z2z2_rep(3), "product");
  CHECK(product.label == SptLabel::trivial);
  CHECK(std::abs(product.commutator_phases.at("x,z") - 1.0) < 1e-6);

  const ClassificationReport aklt =
      classify(aklt_state(60), build_z2z2_rep(3), "aklt", {{"haldane", haldane_string_operator(60)}});
  CHECK(aklt.label == SptLabel::nontrivial);
  CHECK(std::abs(aklt.commutator_phases.at("x,z") + 1.0) < 1e-6);
  CHECK(aklt.symmetry_residual < 1e-8);
  CHECK(aklt.cocycle_residual < 1e-8);
  CHECK(std::abs(aklt.string_order_values.at("haldane") + 4.0 / 9.0) < 1e-8);

  const ClassificationReport dimer = classify(fixed_point_state(FixedPointKind::dimer, 60), build_z2z2_rep(4), "dimer");
  CHECK(dimer.label == SptLabel::nontrivial);
  const ClassificationReport trivial = classify(fixed_point_state(FixedPointKind::trivial, 60), build_z2z2_rep(4), "trivial");
  CHECK(trivial.label == SptLabel::trivial);

  const nlohmann::json j = to_json(aklt);
  CHECK(j.at("class") == "nontrivial");
  CHECK(j.at("state_id") == "aklt");
  CHECK(j.at("residuals").contains("symmetry_condition"));
  CHECK(j.at("string_order_values").contains("haldane"));
}

TEST_CASE("classification rejects ill-posed inputs") {
  SUBCASE("state without the symmetry") {
    VectorXcd up = VectorXcd::Zero(3);
    up(0) = 1.0;
    try {
      extract_projective_rep(product_mps(12, up), build_z2z2_rep(3));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::symmetry);
    }
  }
  SUBCASE("long-range correlated state") {
    SiteTensor ghz(3, MatrixXcd::Zero(2, 2));
    ghz[0](0, 0) = 1.0;
    ghz[2](1, 1) = 1.0;
    try {
      extract_projective_rep(uniform_mps(12, ghz), build_z2z2_rep(3));
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ill_posed);
    }
  }
}

TEST_CASE("classification survives symmetric gates, dense-verified at n=10") {
  const SymmetryRep rep = build_z2z2_rep(3);
  std::mt19937_64 rng(21);
  const int n = 10;
  const MatrixProductState aklt = aklt_state(n);
  for (int trial = 0; trial < 2; ++trial) {
    std::vector<MatrixXcd> gates;
    for (int l = 0; l < 2; ++l) {
      gates.push_back(random_symmetric_gate(rep, 2, rng));
      CHECK(is_symmetric(Gate{{0, 1}, gates.back()}, rep));
    }
    const MatrixProductState evolved = canonicalize(apply_uniform_brick(block_sites(aklt, 2), gates, 3));
    const Statevector dense = apply_circuit(paired_brick_circuit(n, 3, gates), mps_to_statevector(aklt));
    const Statevector from_mps = mps_to_statevector(evolved);
    const double f = std::norm(dense.amplitudes.dot(from_mps.amplitudes)) /
                     (dense.amplitudes.squaredNorm() * from_mps.amplitudes.squaredNorm());
    CHECK(std::abs(f - 1.0) < 1e-10);
    CHECK(classify(evolved, block_rep(rep, 2), "aklt").label == SptLabel::nontrivial);
  }
}

TEST_CASE("string order vanishes in the trivial phase after symmetric circuits") {
  const SymmetryRep rep = build_z2z2_rep(4);
  const MatrixProductState trivial = fixed_point_state(FixedPointKind::trivial, 60);
  LocalCircuit identity;
  identity.n_sites = 60;
  identity.local_dim = 4;
  CHECK(verify_string_vanishing(trivial, identity) < 1e-10);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 2; ++trial)
    CHECK(verify_string_vanishing(trivial, random_symmetric_circuit(60, 2, rep, rng)) <= 1e-6);

  const MatrixProductState probe = perturbed_trivial_state(30, 0.5);
  CHECK(std::abs(correlation_gap(probe) - 0.3) < 0.05);
  CHECK(classify(probe, rep, "perturbed").label == SptLabel::trivial);
  std::vector<double> values;
  for (int n : {30, 60, 90}) {
    std::mt19937_64 r(17);
    values.push_back(verify_string_vanishing(perturbed_trivial_state(n, 0.5), random_symmetric_circuit(n, 2, rep, r)));
  }
  CHECK(values[1] < values[0]);
  CHECK(values[2] < values[1]);
}

TEST_CASE("invariance experiment") {
  const InvarianceReport none = invariance_experiment(aklt_state(12), build_z2z2_rep(3), 0, 3, 1, "aklt");
  CHECK(none.initial_label == SptLabel::nontrivial);
  CHECK(none.agreement_fraction == 1.0);
  for (const auto& s : none.samples) CHECK(std::abs(s.string_order - none.string_order_before) < 1e-10);

  const InvarianceReport aklt = invariance_experiment(aklt_state(12), build_z2z2_rep(3), 2, 3, 2, "aklt");
  CHECK(aklt.agreement_fraction == 1.0);
  const InvarianceReport trivial =
      invariance_experiment(fixed_point_state(FixedPointKind::trivial, 12), build_z2z2_rep(4), 2, 3, 2, "trivial");
  CHECK(trivial.initial_label == SptLabel::trivial);
  CHECK(trivial.agreement_fraction == 1.0);
  CHECK(to_json(trivial).at("samples").size() == 3);
}
