// topocirc: batch runner for the library's experiments.
//
// Scans write CSV, reports write JSON, both to --out or stdout. Summaries go
// to stderr. Exit codes: 0 success, 1 numerical failure or failed check,
// 2 usage error.

#include "topocirc/bounds.hpp"
#include "topocirc/sptclass.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace topocirc;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();
constexpr double infinity = std::numeric_limits<double>::infinity();

struct Common {
  int threads = 1;
  std::uint64_t seed = 1;
  std::string config;
  std::string out;
  bool selftest = false;
};

int default_threads() {
  const char* env = std::getenv("TOPOCIRC_THREADS");
  if (env == nullptr) return 1;
  try {
    const int t = std::stoi(env);
    return t >= 1 ? t : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw UsageError("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw UsageError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

// "start:stop:step" (inclusive) or a comma-separated list.
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    const auto p = split(s, ':');
    if (p.size() != 3) throw UsageError("grid must be start:stop:step, got '" + s + "'");
    const double a = parse_double(p[0]), b = parse_double(p[1]), step = parse_double(p[2]);
    if (!(step > 0.0) || !(b >= a) || !std::isfinite(a) || !std::isfinite(b))
      throw UsageError("bad grid '" + s + "'");
    const auto count = static_cast<long>(std::floor((b - a) / step + 1e-9));
    if (count > 100000) throw UsageError("grid too large: '" + s + "'");
    for (long i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
  } else {
    for (const auto& item : split(s, ',')) out.push_back(parse_double(item));
  }
  if (out.empty()) throw UsageError("empty grid");
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& item : split(s, ',')) {
    const double v = parse_double(item);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw UsageError("not an integer: '" + item + "'");
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw UsageError("cannot open output file '" + c.out + "'");
  f << text;
}

void emit_json(const Common& c, const json& j) { emit(c, j.dump(2) + "\n"); }

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt(r[i]);
    os << "\n";
  }
  return os.str();
}

// Applies key=value lines from --config to options not given on the command line.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream probe(path);
  if (!probe) throw UsageError("cannot read config file '" + path + "'");
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    if (!item.parents.empty()) throw UsageError("config sections are not supported: '" + item.fullname() + "'");
    CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") throw UsageError("unknown config key '" + item.name + "'");
    if (opt->count() > 0) continue;
    // The INI reader splits comma lists; grids and lists are single string values here.
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    opt->add_result(value);
    opt->run_callback();
  }
}

// ---------------------------------------------------------------------------
// States and representations

int state_local_dim(const std::string& name) {
  if (name == "aklt" || name == "product") return 3;
  if (name == "trivial" || name == "dimer" || name == "perturbed") return 4;
  throw UsageError("unknown state '" + name + "'");
}

MatrixProductState make_state(const std::string& name, int n, double tau) {
  if (name == "aklt") return aklt_state(n);
  if (name == "product") {
    VectorXcd zero = VectorXcd::Zero(3);
    zero(1) = 1.0;
    return product_mps(n, zero);
  }
  if (name == "trivial") return fixed_point_state(FixedPointKind::trivial, n);
  if (name == "dimer") return fixed_point_state(FixedPointKind::dimer, n);
  if (name == "perturbed") return perturbed_trivial_state(n, tau);
  throw UsageError("unknown state '" + name + "'");
}

CovarianceMatrix majorana_ground(int n, double mu) { return gaussian_ground_state(build_majorana_chain(n, mu)); }

// Even-parity ground state of the spin chain equivalent to the Majorana chain.
Statevector even_spin_ground(int n, double mu) {
  GroundStateOptions opt;
  opt.sector = even_parity_sector();
  return ground_state(jw_map(build_majorana_chain(n, mu)), opt).state;
}

cplx xx_correlator(const Statevector& psi, int i, int j) {
  return expect(psi, {{{i}, pauli('x')}, {{j}, pauli('x')}});
}

// ---------------------------------------------------------------------------
// Self-tests: small oracle comparisons per module.

struct SelfTest {
  int failures = 0;

  void check(const std::string& name, double value, double tolerance) {
    const bool ok = std::isfinite(value) && value <= tolerance;
    if (!ok) ++failures;
    std::cout << "selftest " << name << ": " << (ok ? "PASS" : "FAIL") << " (" << fmt(value) << " <= " << fmt(tolerance)
              << ")\n";
  }

  int finish() const {
    std::cout << "selftest: " << (failures == 0 ? "all checks passed" : std::to_string(failures) + " failed") << "\n";
    return failures == 0 ? 0 : 1;
  }
};

void selftest_fermion(SelfTest& t) {
  const int n = 6;
  for (double mu : {0.3, 1.7}) {
    const auto h = build_majorana_chain(n, mu);
    const CovarianceMatrix g = gaussian_ground_state(h);
    GroundStateOptions opt;
    opt.sector = even_parity_sector();
    const GroundState dense = ground_state(jw_map(h), opt);
    t.check("fermion energy mu=" + fmt(mu), std::abs(gaussian_energy(h, g) - dense.energy), 1e-9);
    const cplx corr = xx_correlator(dense.state, n / 3, 2 * n / 3);
    t.check("fermion string order mu=" + fmt(mu), std::abs(string_order(g, n / 3, 2 * n / 3) - corr), 1e-9);
  }
  const CovarianceMatrix out = apply_gaussian(majorana_ground(n, infinity), build_fermionic_swap_circuit(n));
  t.check("fermion swap circuit covariance", (out.gamma - majorana_ground(n, 0.0).gamma).cwiseAbs().maxCoeff(), 1e-10);
}

void selftest_singlet(SelfTest& t) {
  const int n = 4;
  const LocalCircuit c = build_singlet_swap_circuit(n);
  const MatrixProductState mps_out = apply_circuit(c, fixed_point_state(FixedPointKind::trivial, n));
  const MatrixProductState target = fixed_point_state(FixedPointKind::dimer, n);
  t.check("singlet swap mps fidelity", std::abs(1.0 - fidelity(mps_out, target)), 1e-9);
  const Statevector dense_out = apply_circuit(c, mps_to_statevector(fixed_point_state(FixedPointKind::trivial, n)));
  const Statevector dense_target = mps_to_statevector(target);
  const double f = std::norm(dense_target.amplitudes.dot(dense_out.amplitudes)) /
                   (dense_target.amplitudes.squaredNorm() * dense_out.amplitudes.squaredNorm());
  t.check("singlet swap dense fidelity", std::abs(1.0 - f), 1e-10);
  t.check("singlet swap gates symmetric", is_symmetric(c, build_z2z2_rep(4), 1e-12) ? 0.0 : 1.0, 0.0);
}

void selftest_mps(SelfTest& t) {
  std::mt19937_64 rng(11);
  const int n = 6;
  SiteTensor a(3);
  for (auto& m : a) m = random_complex_matrix(3, 3, rng);
  const MatrixProductState mps = uniform_mps(n, a);
  const Statevector psi = mps_to_statevector(mps);
  const SpinMatrices s = spin_matrices(3);
  const StringOperator q6 = make_string_operator(n, 1, 4, s.y, expi_hermitian(s.y, std::numbers::pi));
  const cplx dense = expect(psi, q6.to_product_op()) / psi.amplitudes.squaredNorm();
  t.check("mps vs dense string expectation", std::abs(expect_string(mps, q6) - dense), 1e-9);
  const LocalCircuit c = random_symmetric_circuit(n, 1, build_z2z2_rep(3), rng);
  const StringOperator red = causal_cone_reduce(c, q6);
  const cplx dense_red = expect(psi, red.to_product_op()) / psi.amplitudes.squaredNorm();
  t.check("mps vs dense reduced string expectation", std::abs(expect_string(mps, red) - dense_red), 1e-9);
}

void selftest_spt(SelfTest& t) {
  const int n = 9;
  GroundStateOptions opt;
  const GroundState gs = ground_state(build_spin1_chain(n, Spin1Kind::aklt, Boundary::periodic), opt);
  const StringOperator q = haldane_string_operator(n, 3);
  const cplx dense = expect(gs.state, q.to_product_op());
  t.check("aklt string order dense vs mps", std::abs(expect_string(aklt_state(n), q) - dense), 1e-9);
  const ClassificationReport aklt = classify(aklt_state(12), build_z2z2_rep(3), "aklt");
  t.check("aklt class nontrivial", aklt.label == SptLabel::nontrivial ? 0.0 : 1.0, 0.0);
  t.check("aklt commutator phase", std::abs(aklt.commutator_phases.at("x,z") + 1.0), 1e-6);
  const ClassificationReport product = classify(make_state("product", 12, 0.0), build_z2z2_rep(3), "product");
  t.check("product class trivial", product.label == SptLabel::trivial ? 0.0 : 1.0, 0.0);
}

void selftest_bounds(SelfTest& t) {
  const LocalHamiltonian tfim = build_tfim(4, 0.8, Boundary::open);
  TimeDependentHamiltonian td = constant_hamiltonian(tfim);
  td.time_independent = false;
  const MatrixXcd exact = expm_hermitian(assemble_dense(tfim), 0.7);
  t.check("integrator vs exponential", (evolve(td, 0.7, 3) - exact).cwiseAbs().maxCoeff(), 1e-10);
  const auto rows = trotter_error_scan(tfim, 1.0, {64, 128});
  t.check("trotter first-order ratio", std::abs(rows[0].error / rows[1].error - 2.0), 0.3);
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 5; ++i) {
    const auto [h0, h1] = random_bound_instance(0.2, rng);
    const DistanceBound b = check_interaction_picture_bound(h0, h1, 1.0, 0.2);
    worst = std::max(worst, b.lhs - b.rhs);
  }
  t.check("distance bound lhs - rhs", worst, 1e-8);
}

int run_selftest(const std::vector<std::function<void(SelfTest&)>>& groups) {
  SelfTest t;
  for (const auto& g : groups) g(t);
  return t.finish();
}

// ---------------------------------------------------------------------------
// Subcommands

struct MajoranaScan {
  int n = 200;
  std::string mu = "0:2:0.1";

  int run(const Common& c) const {
    const auto grid = parse_grid(mu);
    std::vector<std::vector<double>> rows(grid.size());
    int skipped = 0;
    std::vector<int> gapless(grid.size(), 0);
    parallel_for(static_cast<int>(grid.size()), c.threads, [&](int k) {
      double value = nan_value;
      try {
        value = string_order(majorana_ground(n, grid[k]), n / 3, 2 * n / 3);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::degeneracy) throw;
        gapless[k] = 1;
      }
      rows[k] = {grid[k], value};
    });
    for (int g : gapless) skipped += g;
    emit(c, csv({"mu", "string_order"}, rows));
    std::cerr << "majorana-scan: n=" << n << ", " << grid.size() << " points";
    if (skipped) std::cerr << ", " << skipped << " gapless point(s) written as nan";
    std::cerr << "\n";
    return 0;
  }
};

struct TfimCorrelator {
  int n = 10;
  std::string mu = "0:2:0.25";
  std::string boundary = "periodic";
  bool even_sector = true;

  int run(const Common& c) const {
    const auto grid = parse_grid(mu);
    const Boundary b = boundary == "open" ? Boundary::open : Boundary::periodic;
    std::vector<std::vector<double>> rows(grid.size());
    parallel_for(static_cast<int>(grid.size()), c.threads, [&](int k) {
      GroundStateOptions opt;
      if (even_sector) opt.sector = even_parity_sector();
      const GroundState gs = ground_state(build_tfim(n, grid[k], b), opt);
      rows[k] = {grid[k], xx_correlator(gs.state, n / 3, 2 * n / 3).real(), gs.energy, gs.gap};
    });
    emit(c, csv({"mu", "xx_correlator", "energy", "gap"}, rows));
    std::cerr << "tfim-correlator: n=" << n << ", sites " << n / 3 << " and " << 2 * n / 3 << ", " << grid.size()
              << " points\n";
    return 0;
  }
};

struct JwCheck {
  std::string n = "8,10";
  std::string mu = "0,0.5,2";
  double tolerance = 1e-9;

  int run(const Common& c) const {
    const auto sizes = parse_int_list(n);
    const auto grid = parse_grid(mu);
    const int count = static_cast<int>(sizes.size() * grid.size());
    std::vector<std::vector<double>> rows(count);
    parallel_for(count, c.threads, [&](int k) {
      const int size = sizes[k / grid.size()];
      const double m = grid[k % grid.size()];
      const double gaussian = string_order(majorana_ground(size, m), size / 3, 2 * size / 3);
      const cplx dense = xx_correlator(even_spin_ground(size, m), size / 3, 2 * size / 3);
      rows[k] = {static_cast<double>(size), m, gaussian, dense.real(), std::abs(gaussian - dense)};
    });
    int failed = 0;
    for (const auto& r : rows)
      if (!(r[4] <= tolerance)) ++failed;
    emit(c, csv({"n", "mu", "gaussian_string_order", "dense_xx_correlator", "abs_difference"}, rows));
    std::cerr << "jw-check: " << count << " cases, " << failed << " above tolerance " << fmt(tolerance) << "\n";
    if (failed) throw CheckFailed("jw-check: Gaussian and dense values disagree");
    return 0;
  }
};

struct SwapCircuit {
  std::string kind = "dimer";
  int n = 8;
  std::string check;
  double tolerance = -1.0;

  int run(const Common& c) const {
    json j;
    j["kind"] = kind;
    j["n"] = n;
    bool pass = true;
    std::string mode = check;
    if (kind == "majorana") {
      if (mode.empty()) mode = "gaussian";
      const GaussianCircuit circuit = build_fermionic_swap_circuit(n);
      j["depth"] = circuit.depth();
      if (mode == "gaussian") {
        const double tol_used = tolerance > 0 ? tolerance : 1e-10;
        const CovarianceMatrix out = apply_gaussian(majorana_ground(n, infinity), circuit);
        const double err = (out.gamma - majorana_ground(n, 0.0).gamma).cwiseAbs().maxCoeff();
        j["covariance_error"] = err;
        j["tolerance"] = tol_used;
        pass = err <= tol_used;
      } else if (mode == "dense") {
        const double tol_used = tolerance > 0 ? tolerance : 1e-10;
        const Statevector out = apply_circuit(jw_map(circuit), even_spin_ground(n, infinity));
        const Statevector target = even_spin_ground(n, 0.0);
        const double f = std::norm(target.amplitudes.dot(out.amplitudes));
        j["fidelity"] = f;
        j["tolerance"] = tol_used;
        pass = std::abs(1.0 - f) <= tol_used;
      } else {
        throw UsageError("swap-circuit --kind majorana supports --check gaussian or dense");
      }
    } else if (kind == "dimer") {
      if (mode.empty()) mode = "mps";
      const LocalCircuit circuit = build_singlet_swap_circuit(n);
      const bool symmetric = is_symmetric(circuit, build_z2z2_rep(4), 1e-12);
      j["depth"] = circuit.depth();
      j["gates_symmetric"] = symmetric;
      const MatrixProductState start = fixed_point_state(FixedPointKind::trivial, n);
      const MatrixProductState target = fixed_point_state(FixedPointKind::dimer, n);
      double f = 0.0, tol_used = 0.0;
      if (mode == "mps") {
        tol_used = tolerance > 0 ? tolerance : 1e-9;
        f = fidelity(apply_circuit(circuit, start), target);
      } else if (mode == "dense") {
        tol_used = tolerance > 0 ? tolerance : 1e-10;
        const Statevector out = apply_circuit(circuit, mps_to_statevector(start));
        const Statevector ref = mps_to_statevector(target);
        f = std::norm(ref.amplitudes.dot(out.amplitudes)) /
            (ref.amplitudes.squaredNorm() * out.amplitudes.squaredNorm());
      } else {
        throw UsageError("swap-circuit --kind dimer supports --check mps or dense");
      }
      j["fidelity"] = f;
      j["tolerance"] = tol_used;
      pass = symmetric && std::abs(1.0 - f) <= tol_used;
    } else {
      throw UsageError("swap-circuit --kind must be majorana or dimer");
    }
    j["check"] = mode;
    j["pass"] = pass;
    emit_json(c, j);
    std::cerr << "swap-circuit: " << kind << " n=" << n << " check " << mode << ": " << (pass ? "pass" : "FAIL") << "\n";
    if (!pass) throw CheckFailed("swap-circuit check failed");
    return 0;
  }
};

struct StringOrder {
  std::string state = "aklt";
  int n = 60;
  std::string backend = "mps";
  int depth = 0;
  double tau = 0.5;

  int run(const Common& c) const {
    if (backend != "mps" && backend != "dense" && backend != "both")
      throw UsageError("string-order --backend must be mps, dense or both");
    const int d = state_local_dim(state);
    const MatrixProductState mps = make_state(state, n, tau);
    const StringOperator q = haldane_string_operator(n, d);
    json j;
    j["state"] = state;
    j["n"] = n;
    j["sites"] = {n / 3, 2 * n / 3};
    j["depth"] = depth;
    StringOperator measured = q;
    LocalCircuit circuit;
    if (depth > 0) {
      std::mt19937_64 rng(c.seed);
      circuit = random_symmetric_circuit(n, depth, build_z2z2_rep(d), rng);
      measured = causal_cone_reduce(circuit, q);
      j["reduced_window"] = {measured.left_end.start, measured.left_end.width, measured.right_end.start,
                             measured.right_end.width};
    }
    // With a circuit, the value is <psi| C^dag Q C |psi> evaluated as <psi|Q'|psi>.
    if (backend != "dense") {
      const cplx v = expect_string(mps, measured);
      j["mps"] = {v.real(), v.imag()};
    }
    if (backend != "mps") {
      Statevector psi = mps_to_statevector(mps);
      psi.normalize();
      if (depth > 0) psi = apply_circuit(circuit, psi);
      const cplx v = expect(psi, q.to_product_op());
      j["dense"] = {v.real(), v.imag()};
    }
    if (backend == "both") {
      const double diff = std::hypot(j["mps"][0].get<double>() - j["dense"][0].get<double>(),
                                     j["mps"][1].get<double>() - j["dense"][1].get<double>());
      j["abs_difference"] = diff;
    }
    emit_json(c, j);
    std::cerr << "string-order: " << state << " n=" << n << " depth " << depth << "\n";
    return 0;
  }
};

struct SptClass {
  std::string state = "aklt";
  int n = 60;
  double tau = 0.5;

  int run(const Common& c) const {
    const int d = state_local_dim(state);
    const ClassificationReport r =
        classify(make_state(state, n, tau), build_z2z2_rep(d), state, {{"haldane", haldane_string_operator(n, d)}});
    emit_json(c, to_json(r));
    std::cerr << "spt-class: " << state << " n=" << n << ": " << to_string(r.label) << "\n";
    return 0;
  }
};

struct Invariance {
  std::string state = "aklt";
  int n = 60;
  int depth = 2;
  int samples = 20;
  double tau = 0.5;

  int run(const Common& c) const {
    const int d = state_local_dim(state);
    const InvarianceReport r = invariance_experiment(make_state(state, n, tau), build_z2z2_rep(d), depth, samples,
                                                     c.seed, state);
    emit_json(c, to_json(r));
    std::cerr << "invariance: " << state << " n=" << n << " depth " << depth << ", " << samples
              << " samples, agreement " << fmt(r.agreement_fraction) << "\n";
    if (r.agreement_fraction < 1.0) throw CheckFailed("invariance: classification changed under a symmetric circuit");
    return 0;
  }
};

struct TrotterError {
  int n = 6;
  double mu = 1.0;
  double t = 1.0;
  std::string steps = "8,16,32,64,128";
  std::string boundary = "open";

  int run(const Common& c) const {
    const Boundary b = boundary == "open" ? Boundary::open : Boundary::periodic;
    const auto rows = trotter_error_scan(build_tfim(n, mu, b), t, parse_int_list(steps), c.threads);
    std::vector<std::vector<double>> table;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double ratio = nan_value;
      if (i + 1 < rows.size() && rows[i + 1].steps == 2 * rows[i].steps && rows[i + 1].error > 0.0)
        ratio = rows[i].error / rows[i + 1].error;
      table.push_back({static_cast<double>(rows[i].steps), rows[i].error, ratio});
    }
    emit(c, csv({"steps", "error", "ratio_to_doubled"}, table));
    std::cerr << "trotter-error: n=" << n << " mu=" << fmt(mu) << " t=" << fmt(t) << "\n";
    return 0;
  }
};

struct LrDecay {
  int n = 10;
  double mu = 1.0;
  double t = 1.0;
  std::string l;
  std::string op = "z";

  int run(const Common& c) const {
    if (op.size() != 1 || std::string("xyz").find(op[0]) == std::string::npos)
      throw UsageError("lr-decay --op must be x, y or z");
    std::vector<int> ls;
    if (l.empty())
      for (int k = 2; k <= n; k += 2) ls.push_back(k);
    else
      ls = parse_int_list(l);
    const auto rows = lr_truncation_decay(build_tfim(n, mu, Boundary::open), pauli(op[0]), ls, t, c.threads);
    std::vector<std::vector<double>> table;
    std::vector<double> x, y;
    for (const auto& r : rows) {
      table.push_back({static_cast<double>(r.l), r.difference});
      if (r.l < n && r.difference > 0.0) {
        x.push_back(r.l);
        y.push_back(r.difference);
      }
    }
    emit(c, csv({"l", "difference"}, table));
    std::cerr << "lr-decay: n=" << n << " mu=" << fmt(mu) << " t=" << fmt(t);
    if (x.size() >= 2) {
      const LogLinearFit fit = fit_log_linear(x, y);
      std::cerr << ", log-linear slope " << fmt(fit.slope) << ", r^2 " << fmt(fit.r_squared);
    }
    std::cerr << "\n";
    return 0;
  }
};

struct SchurBound {
  int instances = 100;
  double t = 1.0;
  double delta_min = 0.05;
  double delta_max = 0.35;

  int run(const Common& c) const {
    if (instances < 1) throw UsageError("schur-bound --instances must be positive");
    if (!(delta_min > 0.0) || !(delta_max >= delta_min)) throw UsageError("schur-bound: need 0 < delta-min <= delta-max");
    std::vector<std::vector<double>> rows(instances);
    parallel_for(instances, c.threads, [&](int i) {
      std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                        static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      const double delta =
          instances == 1 ? delta_min : delta_min + (delta_max - delta_min) * i / static_cast<double>(instances - 1);
      const auto [h0, h1] = random_bound_instance(delta, rng);
      const DistanceBound b = check_interaction_picture_bound(h0, h1, t, delta);
      rows[i] = {static_cast<double>(i), delta, b.sup_difference, b.lhs, b.rhs, b.pass ? 1.0 : 0.0};
    });
    int failed = 0;
    for (const auto& r : rows)
      if (r[5] != 1.0) ++failed;
    emit(c, csv({"instance", "delta", "sup_difference", "lhs", "rhs", "pass"}, rows));
    std::cerr << "schur-bound: " << instances << " instances, " << failed << " violations\n";
    if (failed) throw CheckFailed("schur-bound: distance bound violated");
    return 0;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_flag("--selftest", c.selftest, "Run this module's oracle-equivalence checks and exit");
  sub->add_option("--threads", c.threads, "Worker threads (default: $TOPOCIRC_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--config", c.config, "Flat key=value file; command-line flags take precedence");
  sub->add_option("--out", c.out, "Output file (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topocirc: experiments on 1D topological phases, circuits and order parameters"};
  app.require_subcommand(1);
  app.footer(
      "Config files hold one key=value per line using the long option names without dashes.\n"
      "Precedence: command-line flags > config file > defaults.\n"
      "Environment: TOPOCIRC_THREADS sets the default worker count.\n"
      "Exit codes: 0 success, 1 numerical failure or failed check, 2 usage error.");

  Common common;
  common.threads = default_threads();
  std::function<int()> action;
  std::vector<std::function<void(SelfTest&)>> selftests;
  CLI::App* chosen = nullptr;

  auto subcommand = [&](const std::string& name, const std::string& help, auto& job,
                        std::vector<std::function<void(SelfTest&)>> tests) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, common);
    sub->callback([&, sub, tests] {
      chosen = sub;
      action = [&job, &common] { return job.run(common); };
      selftests = tests;
    });
    return sub;
  };

  MajoranaScan majorana;
  auto* s = subcommand("majorana-scan", "String order of the Majorana chain ground state across mu (CSV)", majorana,
                       {selftest_fermion});
  s->add_option("--n", majorana.n, "Number of fermionic modes")->check(CLI::Range(6, 4000));
  s->add_option("--mu", majorana.mu, "mu grid: start:stop:step or comma list");

  TfimCorrelator tfim;
  s = subcommand("tfim-correlator", "Dense <sigma^x sigma^x> of the transverse-field Ising ground state (CSV)", tfim,
                 {selftest_fermion});
  s->add_option("--n", tfim.n, "Number of spins")->check(CLI::Range(3, 22));
  s->add_option("--mu", tfim.mu, "mu grid: start:stop:step or comma list");
  s->add_option("--boundary", tfim.boundary, "open or periodic")->check(CLI::IsMember({"open", "periodic"}));
  s->add_option("--even-sector", tfim.even_sector, "Restrict to even parity (true/false)");

  JwCheck jw;
  s = subcommand("jw-check", "Gaussian string order against the dense spin correlator (CSV)", jw, {selftest_fermion});
  s->add_option("--n", jw.n, "Comma list of chain lengths");
  s->add_option("--mu", jw.mu, "mu grid: start:stop:step or comma list");
  s->add_option("--tolerance", jw.tolerance, "Maximum allowed difference");

  SwapCircuit swap;
  s = subcommand("swap-circuit", "Depth n-1 swap circuit between fixed points (JSON)", swap,
                 {selftest_fermion, selftest_singlet});
  s->add_option("--kind", swap.kind, "majorana or dimer")->check(CLI::IsMember({"majorana", "dimer"}));
  s->add_option("--n", swap.n, "Number of sites")->check(CLI::Range(2, 100000));
  s->add_option("--check", swap.check, "majorana: gaussian|dense; dimer: mps|dense");
  s->add_option("--tolerance", swap.tolerance, "Fidelity / covariance tolerance");

  StringOrder so;
  s = subcommand("string-order", "Haldane-type string order on a named state, optionally after a circuit (JSON)", so,
                 {selftest_mps});
  s->add_option("--state", so.state, "aklt, product, trivial, dimer or perturbed")
      ->check(CLI::IsMember({"aklt", "product", "trivial", "dimer", "perturbed"}));
  s->add_option("--n", so.n, "Number of sites")->check(CLI::Range(9, 100000));
  s->add_option("--backend", so.backend, "mps, dense or both")->check(CLI::IsMember({"mps", "dense", "both"}));
  s->add_option("--depth", so.depth, "Depth of a random symmetric circuit (0 = none)")->check(CLI::Range(0, 50));
  s->add_option("--tau", so.tau, "Dressing strength of the perturbed state");

  SptClass spt;
  s = subcommand("spt-class", "Z2 x Z2 SPT classification report (JSON)", spt, {selftest_spt});
  s->add_option("--state", spt.state, "aklt, product, trivial, dimer or perturbed")
      ->check(CLI::IsMember({"aklt", "product", "trivial", "dimer", "perturbed"}));
  s->add_option("--n", spt.n, "Number of sites")->check(CLI::Range(9, 100000));
  s->add_option("--tau", spt.tau, "Dressing strength of the perturbed state");

  Invariance inv;
  s = subcommand("invariance", "Classification under random symmetric circuits (JSON)", inv, {selftest_spt});
  s->add_option("--state", inv.state, "aklt, product, trivial, dimer or perturbed")
      ->check(CLI::IsMember({"aklt", "product", "trivial", "dimer", "perturbed"}));
  s->add_option("--n", inv.n, "Number of sites (even)")->check(CLI::Range(10, 100000));
  s->add_option("--depth", inv.depth, "Circuit depth")->check(CLI::Range(0, 3));
  s->add_option("--samples", inv.samples, "Number of random circuits")->check(CLI::Range(1, 10000));
  s->add_option("--tau", inv.tau, "Dressing strength of the perturbed state");

  TrotterError trotter;
  s = subcommand("trotter-error", "First-order Trotter error of the transverse-field Ising chain (CSV)", trotter,
                 {selftest_bounds});
  s->add_option("--n", trotter.n, "Number of spins")->check(CLI::Range(2, 12));
  s->add_option("--mu", trotter.mu, "Transverse field");
  s->add_option("--t", trotter.t, "Evolution time");
  s->add_option("--steps", trotter.steps, "Comma list of step counts");
  s->add_option("--boundary", trotter.boundary, "open or periodic")->check(CLI::IsMember({"open", "periodic"}));

  LrDecay lr;
  s = subcommand("lr-decay", "Lieb-Robinson truncation error against window size (CSV)", lr, {selftest_bounds});
  s->add_option("--n", lr.n, "Number of spins")->check(CLI::Range(2, 12));
  s->add_option("--mu", lr.mu, "Transverse field");
  s->add_option("--t", lr.t, "Evolution time");
  s->add_option("--l", lr.l, "Comma list of window sizes (default 2,4,...,n)");
  s->add_option("--op", lr.op, "Pauli operator on site 0: x, y or z");

  SchurBound schur;
  s = subcommand("schur-bound", "Interaction-picture distance bound on random instances (CSV)", schur,
                 {selftest_bounds});
  s->add_option("--instances", schur.instances, "Number of random instances");
  s->add_option("--t", schur.t, "Evolution time");
  s->add_option("--delta-min", schur.delta_min, "Smallest perturbation strength");
  s->add_option("--delta-max", schur.delta_max, "Largest perturbation strength");

  try {
    app.parse(argc, argv);
    apply_config(chosen, common.config);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (common.selftest) return run_selftest(selftests);
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::input:
      case ErrorKind::invalid_size:
      case ErrorKind::out_of_range:
      case ErrorKind::unsupported:
      case ErrorKind::format:
        std::cerr << "usage error (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 2;
      default:
        std::cerr << "numerical failure (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  }
}
