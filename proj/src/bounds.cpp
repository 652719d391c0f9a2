#include "topocirc/bounds.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace topocirc {

namespace {

std::int64_t checked_dim(int n, int d, std::int64_t cap) {
  const auto dim = checked_pow(d, n, cap);
  if (dim < 0) throw Error(ErrorKind::resource, "dense dimension exceeds cap");
  return dim;
}

std::vector<LocalOp> scaled(const std::vector<LocalOp>& terms, double s) {
  std::vector<LocalOp> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back({t.sites, s * t.matrix});
  return out;
}

}  // namespace

LocalHamiltonian TimeDependentHamiltonian::at(double t) const {
  LocalHamiltonian h;
  h.n_sites = n_sites;
  h.local_dim = local_dim;
  h.boundary = boundary;
  h.terms = terms ? terms(t) : std::vector<LocalOp>{};
  return h;
}

MatrixXcd TimeDependentHamiltonian::dense(double t) const {
  const auto dim = checked_dim(n_sites, local_dim, std::int64_t{1} << 14);
  const LocalHamiltonian h = at(t);
  if (h.terms.empty()) return MatrixXcd::Zero(dim, dim);
  return assemble_dense(h);
}

void TimeDependentHamiltonian::validate(double t) const { at(t).validate(); }

TimeDependentHamiltonian constant_hamiltonian(const LocalHamiltonian& h) {
  TimeDependentHamiltonian out;
  out.n_sites = h.n_sites;
  out.local_dim = h.local_dim;
  out.boundary = h.boundary;
  out.terms = [terms = h.terms](double) { return terms; };
  out.smoothness = "constant";
  out.time_independent = true;
  return out;
}

TimeDependentHamiltonian interpolated_hamiltonian(const LocalHamiltonian& h0, const LocalHamiltonian& h1, double t_total) {
  if (h0.n_sites != h1.n_sites || h0.local_dim != h1.local_dim)
    throw Error(ErrorKind::invalid_size, "interpolated_hamiltonian: chain shapes differ");
  if (!(t_total > 0.0)) throw Error(ErrorKind::input, "interpolated_hamiltonian: total time must be positive");
  TimeDependentHamiltonian out;
  out.n_sites = h0.n_sites;
  out.local_dim = h0.local_dim;
  out.boundary = (h0.boundary == Boundary::periodic || h1.boundary == Boundary::periodic) ? Boundary::periodic : Boundary::open;
  out.terms = [a = h0.terms, b = h1.terms, t_total](double t) {
    const double s = std::clamp(t / t_total, 0.0, 1.0);
    std::vector<LocalOp> all = scaled(a, 1.0 - s);
    for (auto& term : scaled(b, s)) all.push_back(std::move(term));
    return all;
  };
  out.smoothness = "piecewise";
  return out;
}

TimeDependentHamiltonian add_drive(const TimeDependentHamiltonian& h, std::vector<LocalOp> w,
                                   std::function<double(double)> f) {
  TimeDependentHamiltonian out = h;
  out.terms = [base = h.terms, w = std::move(w), f = std::move(f)](double t) {
    std::vector<LocalOp> all = base ? base(t) : std::vector<LocalOp>{};
    for (auto& term : scaled(w, f(t))) all.push_back(std::move(term));
    return all;
  };
  out.time_independent = false;
  return out;
}

MatrixXcd evolve(const TimeDependentHamiltonian& h, double t, int steps, const EvolveOptions& opt) {
  const auto dim = checked_dim(h.n_sites, h.local_dim, opt.max_dim);
  if (steps < 1) throw Error(ErrorKind::input, "evolve: need at least one step");
  if (h.time_independent) {
    h.validate(0.0);
    return expm_hermitian(h.dense(0.0), t);
  }
  // Gauss-Legendre nodes and commutator-free weights.
  const double r3 = std::sqrt(3.0);
  const double c1 = 0.5 - r3 / 6.0, c2 = 0.5 + r3 / 6.0;
  const double a1 = 0.25 + r3 / 6.0, a2 = 0.25 - r3 / 6.0;
  const double dt = t / steps;
  MatrixXcd u = MatrixXcd::Identity(dim, dim);
  for (int k = 0; k < steps; ++k) {
    const double t0 = k * dt;
    const MatrixXcd h1 = h.dense(t0 + c1 * dt);
    const MatrixXcd h2 = h.dense(t0 + c2 * dt);
    if (!is_hermitian(h1) || !is_hermitian(h2)) throw Error(ErrorKind::input, "evolve: H(t) is not Hermitian");
    u = expm_hermitian(a2 * h1 + a1 * h2, dt) * expm_hermitian(a1 * h1 + a2 * h2, dt) * u;
  }
  const double defect = (u.adjoint() * u - MatrixXcd::Identity(dim, dim)).cwiseAbs().maxCoeff();
  if (defect > 1e-9) throw Error(ErrorKind::convergence, "evolve: unitarity defect above 1e-9");
  return u;
}

AdaptiveEvolution evolve_converged(const TimeDependentHamiltonian& h, double t, int initial_steps, const EvolveOptions& opt) {
  AdaptiveEvolution out;
  out.steps = std::max(1, initial_steps);
  out.unitary = evolve(h, t, out.steps, opt);
  if (h.time_independent) return out;
  for (int k = 0; k < opt.max_doublings; ++k) {
    MatrixXcd next = evolve(h, t, 2 * out.steps, opt);
    out.self_consistency = spectral_norm(next - out.unitary);
    out.unitary = std::move(next);
    out.steps *= 2;
    if (out.self_consistency <= opt.tolerance) return out;
  }
  throw Error(ErrorKind::convergence, "evolve_converged: step doubling did not reach the tolerance");
}

DistanceBound check_interaction_picture_bound(const TimeDependentHamiltonian& h0, const TimeDependentHamiltonian& h1,
                                              double t, double delta, int samples, const EvolveOptions& opt) {
  if (h0.n_sites != h1.n_sites || h0.local_dim != h1.local_dim)
    throw Error(ErrorKind::invalid_size, "check_interaction_picture_bound: chain shapes differ");
  if (samples < 2 || !(t >= 0.0) || !(delta >= 0.0)) throw Error(ErrorKind::input, "check_interaction_picture_bound: bad arguments");
  DistanceBound b;
  for (int k = 0; k < samples; ++k) {
    const double tau = t * k / (samples - 1);
    b.sup_difference = std::max(b.sup_difference, spectral_norm(h0.dense(tau) - h1.dense(tau)));
  }
  if (b.sup_difference > delta + 1e-12)
    throw Error(ErrorKind::input, "check_interaction_picture_bound: |H0 - H1| exceeds delta");
  const MatrixXcd u0 = evolve_converged(h0, t, 4, opt).unitary;
  const MatrixXcd u1 = evolve_converged(h1, t, 4, opt).unitary;
  b.lhs = spectral_norm(u0 - u1);
  b.rhs = delta * t;
  b.pass = b.lhs <= b.rhs + 1e-8;
  return b;
}

std::pair<TimeDependentHamiltonian, TimeDependentHamiltonian> random_bound_instance(double delta, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(0.5, 4.0), phase(0.0, 6.283185307179586);
  const std::vector<LocalOp> base = {{{0, 1}, random_hermitian(4, rng)}, {{1, 2}, random_hermitian(4, rng)}};
  const std::vector<LocalOp> drive = {{{0}, random_hermitian(2, rng)}, {{2}, random_hermitian(2, rng)}};
  std::vector<LocalOp> w = {{{1, 2}, delta * random_hermitian(4, rng)}};
  const double w0 = freq(rng), p0 = phase(rng), w1 = freq(rng), p1 = phase(rng);

  TimeDependentHamiltonian h0;
  h0.n_sites = 3;
  h0.local_dim = 2;
  h0.terms = [base, drive, w0, p0](double t) {
    std::vector<LocalOp> all = base;
    for (auto& term : scaled(drive, std::cos(w0 * t + p0))) all.push_back(std::move(term));
    return all;
  };
  TimeDependentHamiltonian h1 = add_drive(h0, std::move(w), [w1, p1](double t) { return std::sin(w1 * t + p1); });
  return {h0, h1};
}

std::vector<DecayRow> lr_truncation_decay(const LocalHamiltonian& h, const MatrixXcd& p, const std::vector<int>& l_values,
                                          double t, int threads) {
  if (h.boundary != Boundary::open) throw Error(ErrorKind::input, "lr_truncation_decay: open boundary required");
  h.validate();
  const int n = h.n_sites;
  const int d = h.local_dim;
  if (p.rows() != d || p.cols() != d) throw Error(ErrorKind::invalid_size, "lr_truncation_decay: P must act on one site");
  if (spectral_norm(p) > 1.0 + 1e-12) throw Error(ErrorKind::input, "lr_truncation_decay: |P| must not exceed 1");
  for (int l : l_values)
    if (l < 1 || l > n) throw Error(ErrorKind::out_of_range, "lr_truncation_decay: l outside [1, n]");
  const auto dim = checked_dim(n, d, std::int64_t{1} << 12);

  auto heisenberg = [&](int sites) {
    LocalHamiltonian sub;
    sub.n_sites = sites;
    sub.local_dim = d;
    for (const auto& term : h.terms)
      if (std::all_of(term.sites.begin(), term.sites.end(), [&](int s) { return s < sites; })) sub.terms.push_back(term);
    const auto sub_dim = checked_pow(d, sites, dim);
    const MatrixXcd p_full = kron(p, MatrixXcd::Identity(sub_dim / d, sub_dim / d));
    if (sub.terms.empty()) return p_full;
    const MatrixXcd u = expm_hermitian(assemble_dense(sub), t);
    return MatrixXcd(u.adjoint() * p_full * u);
  };

  const MatrixXcd full = heisenberg(n);
  std::vector<DecayRow> rows(l_values.size());
  parallel_for(static_cast<int>(l_values.size()), threads, [&](int i) {
    const int l = l_values[i];
    const auto rest = checked_pow(d, n - l, dim);
    const MatrixXcd truncated = kron(heisenberg(l), MatrixXcd::Identity(rest, rest));
    rows[i] = {l, spectral_norm(full - truncated)};
  });
  return rows;
}

std::vector<TrotterRow> trotter_error_scan(const LocalHamiltonian& h, double t, const std::vector<int>& s_values, int threads) {
  h.validate();
  checked_dim(h.n_sites, h.local_dim, std::int64_t{1} << 12);
  const MatrixXcd exact = expm_hermitian(assemble_dense(h), t);
  std::vector<TrotterRow> rows(s_values.size());
  parallel_for(static_cast<int>(s_values.size()), threads, [&](int i) {
    const int s = s_values[i];
    rows[i] = {s, spectral_norm(exact - circuit_unitary(trotterize(h, t, s)))};
  });
  return rows;
}

std::vector<TrotterRow> trotter_error_scan(const TimeDependentHamiltonian& h, double t, const std::vector<int>& s_values,
                                           int threads) {
  const MatrixXcd exact = evolve_converged(h, t).unitary;
  std::vector<TrotterRow> rows(s_values.size());
  parallel_for(static_cast<int>(s_values.size()), threads, [&](int i) {
    const int s = s_values[i];
    if (s < 1) throw Error(ErrorKind::input, "trotter_error_scan: step counts must be positive");
    const double dt = t / s;
    LocalCircuit c;
    c.n_sites = h.n_sites;
    c.local_dim = h.local_dim;
    for (int k = 0; k < s; ++k) c = compose(c, trotterize(h.at((k + 0.5) * dt), dt, 1));
    rows[i] = {s, spectral_norm(exact - circuit_unitary(c))};
  });
  return rows;
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace topocirc
