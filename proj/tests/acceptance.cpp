// Acceptance checks 1-9. One PASS/FAIL line per criterion; tolerances and
// time budgets are fixed below. Exits nonzero if any criterion fails.

#include "topocirc/bounds.hpp"
#include "topocirc/sptclass.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

using namespace topocirc;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs < budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("criterion %d: %s  %s | %s | %.1f s (limit %.0f s%s)\n", id, ok ? "PASS" : "FAIL", title.c_str(),
              o.detail.c_str(), secs, budget_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

Statevector even_tfim_ground(int n, double mu) {
  GroundStateOptions opt;
  opt.sector = even_parity_sector();
  return ground_state(build_tfim(n, mu, Boundary::periodic), opt).state;
}

cplx xx(const Statevector& psi, int i, int j) { return expect(psi, {{{i}, pauli('x')}, {{j}, pauli('x')}}); }

cplx dense_expect(const Statevector& psi, const StringOperator& q) {
  return psi.amplitudes.dot(apply_product(psi.amplitudes, psi.n_sites, psi.local_dim, q.to_product_op())) /
         psi.amplitudes.squaredNorm();
}

MatrixProductState random_mps(int n, int d, int bond, std::mt19937_64& rng) {
  MatrixProductState m;
  m.n_sites = n;
  m.local_dim = d;
  for (int k = 0; k < n; ++k) {
    SiteTensor t(d);
    for (auto& a : t) a = random_complex_matrix(bond, bond, rng);
    m.tensors.push_back(std::move(t));
  }
  m.validate();
  return m;
}

}  // namespace

int main() {
  // 1. Phase diagram of the Majorana chain at n = 200.
  criterion(1, "Majorana string order, n=200", 30.0, [] {
    const int n = 200;
    double min_topo = inf, max_trivial = 0.0;
    for (int k = 0; k <= 20; ++k) {
      const double mu = 0.1 * k;
      if (k == 10) continue;  // gapless point
      const double so = std::abs(string_order(gaussian_ground_state(build_majorana_chain(n, mu)), n / 3, 2 * n / 3));
      if (mu <= 0.7 + 1e-12) min_topo = std::min(min_topo, so);
      if (mu >= 1.5 - 1e-12) max_trivial = std::max(max_trivial, so);
    }
    return Outcome{min_topo >= 0.5 && max_trivial <= 1e-3,
                   "min |SO| (mu<=0.7) = " + num(min_topo) + ", max |SO| (mu>=1.5) = " + num(max_trivial)};
  });

  // 2. Gaussian string order against the dense spin correlator.
  criterion(2, "Jordan-Wigner consistency, n in {8,10}", 60.0, [] {
    double worst = 0.0;
    for (int n : {8, 10})
      for (double mu : {0.0, 0.5, 2.0}) {
        const double g = string_order(gaussian_ground_state(build_majorana_chain(n, mu)), n / 3, 2 * n / 3);
        worst = std::max(worst, std::abs(g - xx(even_tfim_ground(n, mu), n / 3, 2 * n / 3)));
      }
    return Outcome{worst <= 1e-9, "max |gaussian - dense| = " + num(worst)};
  });

  // 3. Fermionic swap circuit.
  criterion(3, "fermionic swap circuit", 10.0, [] {
    const int n = 100;
    const GaussianCircuit c = build_fermionic_swap_circuit(n);
    const CovarianceMatrix out = apply_gaussian(gaussian_ground_state(build_majorana_chain(n, inf)), c);
    const double err = max_abs(out.gamma - gaussian_ground_state(build_majorana_chain(n, 0.0)).gamma);

    const int m = 8;
    const GaussianCircuit small = build_fermionic_swap_circuit(m);
    GroundStateOptions opt;
    opt.sector = even_parity_sector();
    const Statevector start = ground_state(jw_map(build_majorana_chain(m, inf)), opt).state;
    const Statevector end = apply_circuit(jw_map(small), start);
    const double fid = std::norm(even_tfim_ground(m, 0.0).amplitudes.dot(end.amplitudes));
    const bool ok = c.depth() == n - 1 && err <= 1e-10 && std::abs(1.0 - fid) <= 1e-10;
    return Outcome{ok, "depth " + std::to_string(c.depth()) + ", covariance error " + num(err) +
                           ", dense 1 - fidelity (n=8) " + num(std::abs(1.0 - fid))};
  });

  // 4. Singlet swap circuit.
  criterion(4, "singlet swap circuit, n=100", 10.0, [] {
    const int n = 100;
    const LocalCircuit c = build_singlet_swap_circuit(n);
    const double f = fidelity(apply_circuit(c, fixed_point_state(FixedPointKind::trivial, n)),
                              fixed_point_state(FixedPointKind::dimer, n));
    const bool sym = is_symmetric(c, build_z2z2_rep(4), 1e-12);
    const bool ok = c.depth() == n - 1 && std::abs(1.0 - f) <= 1e-9 && sym;
    return Outcome{ok, "depth " + std::to_string(c.depth()) + ", 1 - fidelity " + num(std::abs(1.0 - f)) +
                           ", gates symmetric: " + (sym ? "yes" : "no")};
  });

  // 5. SPT classification.
  criterion(5, "SPT classification", 10.0, [] {
    const int n = 60;
    VectorXcd zero = VectorXcd::Zero(3);
    zero(1) = 1.0;
    const ClassificationReport product = classify(product_mps(n, zero), build_z2z2_rep(3), "product");
    const ClassificationReport aklt =
        classify(aklt_state(n), build_z2z2_rep(3), "aklt", {{"haldane", haldane_string_operator(n, 3)}});
    const ClassificationReport dimer =
        classify(fixed_point_state(FixedPointKind::dimer, n), build_z2z2_rep(4), "dimer");
    bool ok = product.label == SptLabel::trivial && aklt.label == SptLabel::nontrivial &&
              dimer.label == SptLabel::nontrivial;
    double phase_dev = 0.0, residual = 0.0;
    for (const auto* r : {&product, &aklt, &dimer}) {
      const double target = r->label == SptLabel::trivial ? 1.0 : -1.0;
      phase_dev = std::max(phase_dev, std::abs(r->commutator_phases.at("x,z") - target));
      for (const auto& [key, v] : r->commutator_phases) phase_dev = std::max(phase_dev, std::abs(std::abs(v) - 1.0));
      residual = std::max(residual, r->symmetry_residual);
    }
    const double so_err = std::abs(aklt.string_order_values.at("haldane") + 4.0 / 9.0);
    ok = ok && phase_dev <= 1e-6 && residual <= 1e-8 && so_err <= 1e-8;
    return Outcome{ok, std::string("product ") + to_string(product.label) + ", aklt " + to_string(aklt.label) +
                           ", dimer " + to_string(dimer.label) + ", phase deviation " + num(phase_dev) +
                           ", symmetry residual " + num(residual) + ", |SO + 4/9| " + num(so_err)};
  });

  // 6. Invariance under symmetric circuits and exact cone reduction.
  criterion(6, "classification invariance, n=60", 120.0, [] {
    const int n = 60;
    int total = 0, agree = 0;
    for (int depth = 1; depth <= 3; ++depth) {
      const InvarianceReport a =
          invariance_experiment(aklt_state(n), build_z2z2_rep(3), depth, 7, 100 + depth, "aklt");
      const InvarianceReport t = invariance_experiment(fixed_point_state(FixedPointKind::trivial, n),
                                                       build_z2z2_rep(4), depth, 7, 200 + depth, "trivial");
      for (const auto* r : {&a, &t})
        for (const auto& s : r->samples) {
          ++total;
          if (s.label == r->initial_label) ++agree;
        }
    }
    const SymmetryRep rep = build_z2z2_rep(3);
    const StringOperator q = haldane_string_operator(9, 3);
    std::mt19937_64 rng(61);
    double cone_err = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const LocalCircuit c = random_symmetric_circuit(9, 1, rep, rng);
      const StringOperator red = causal_cone_reduce(c, q);
      const Statevector psi(9, 3, random_unit_vector(19683, rng));
      const VectorXcd lhs = apply_product(psi.amplitudes, 9, 3, red.to_product_op());
      const Statevector mid(9, 3, apply_product(apply_circuit(c, psi).amplitudes, 9, 3, q.to_product_op()));
      const VectorXcd rhs = apply_circuit(adjoint(c), mid).amplitudes;
      cone_err = std::max(cone_err, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    const bool ok = total >= 40 && agree == total && cone_err <= 1e-10;
    return Outcome{ok, std::to_string(agree) + "/" + std::to_string(total) +
                           " samples unchanged (depths 1-3, aklt and trivial), cone error (n=9) " + num(cone_err)};
  });

  // 7. String order of the trivial fixed point after symmetric circuits.
  criterion(7, "string order vanishes on the trivial fixed point, n=60", 30.0, [] {
    const int n = 60;
    const MatrixProductState trivial = fixed_point_state(FixedPointKind::trivial, n);
    const SymmetryRep rep = build_z2z2_rep(4);
    std::mt19937_64 rng(71);
    double worst = 0.0;
    for (int k = 0; k < 10; ++k)
      worst = std::max(worst, verify_string_vanishing(trivial, random_symmetric_circuit(n, 2, rep, rng)));
    return Outcome{worst <= 1e-6, "max |<Q'>| over 10 depth-2 circuits = " + num(worst)};
  });

  // 8. Evolution bounds.
  criterion(8, "distance bound, Lieb-Robinson decay, Trotter scaling", 180.0, [] {
    std::mt19937_64 rng(81);
    int passed = 0;
    for (int i = 0; i < 100; ++i) {
      const double delta = 0.05 + 0.01 * (i % 30);
      const auto [h0, h1] = random_bound_instance(delta, rng);
      if (check_interaction_picture_bound(h0, h1, 1.0, delta).pass) ++passed;
    }
    const auto decay = lr_truncation_decay(build_tfim(10, 1.0, Boundary::open), pauli('z'), {2, 4, 6, 8}, 1.0);
    std::vector<double> x, y;
    for (const auto& r : decay) {
      x.push_back(r.l);
      y.push_back(r.difference);
    }
    const LogLinearFit fit = fit_log_linear(x, y);
    const auto trotter = trotter_error_scan(build_tfim(6, 1.0, Boundary::open), 1.0, {16, 32, 64});
    const double r16 = trotter[0].error / trotter[1].error, r32 = trotter[1].error / trotter[2].error;
    const bool ok = passed == 100 && fit.r_squared > 0.9 && r16 >= 1.7 && r16 <= 2.3 && r32 >= 1.7 && r32 <= 2.3;
    return Outcome{ok, std::to_string(passed) + "/100 bound instances, decay fit r^2 " + num(fit.r_squared) +
                           ", Trotter ratios " + num(r16) + ", " + num(r32)};
  });

  // 9. Dense and MPS expectations of generated string operators.
  criterion(9, "dense vs MPS string expectations, n=8", 120.0, [] {
    const int n = 8;
    std::mt19937_64 rng(91);
    int states = 0, operators = 0;
    double worst = 0.0;
    for (int d : {3, 4}) {
      const SpinMatrices s = spin_matrices(d);
      const SymmetryRep rep = build_z2z2_rep(d);
      const MatrixXcd ends[] = {s.x, s.y, s.z};
      for (int trial = 0; trial < (d == 3 ? 40 : 12); ++trial) {
        const MatrixProductState mps =
            trial % 2 == 0 ? random_mps(n, d, 2 + trial % 3, rng) : uniform_mps(n, random_mps(1, d, 3, rng).tensors[0]);
        const Statevector psi = mps_to_statevector(mps);
        ++states;
        std::vector<StringOperator> ops;
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            for (int a = 0; a < 3; ++a) ops.push_back(make_string_operator(n, i, j, ends[a], expi_hermitian(ends[a], std::numbers::pi)));
        const StringOperator base = make_string_operator(n, 2, 5, s.y, expi_hermitian(s.y, std::numbers::pi));
        ops.push_back(causal_cone_reduce(random_symmetric_circuit(n, 1, rep, rng), base));
        for (const auto& q : ops) {
          worst = std::max(worst, std::abs(expect_string(mps, q) - dense_expect(psi, q)));
          ++operators;
        }
      }
    }
    return Outcome{states >= 50 && worst <= 1e-9, std::to_string(states) + " states, " + std::to_string(operators) +
                                                       " operator evaluations, max difference " + num(worst)};
  });

  std::printf("acceptance: %d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
