#pragma once

// Desk-scale checks of time-ordered evolution, interaction-picture distance,
// Lieb-Robinson truncation and Trotter error.

#include "topocirc/circuits.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace topocirc {

/// H(t) = sum of the local terms returned by `terms(t)`.
struct TimeDependentHamiltonian {
  int n_sites = 0;
  int local_dim = 2;
  Boundary boundary = Boundary::open;
  std::function<std::vector<LocalOp>(double)> terms;
  /// Free-form smoothness tag, e.g. "constant", "smooth", "piecewise".
  std::string smoothness = "smooth";
  bool time_independent = false;

  LocalHamiltonian at(double t) const;
  MatrixXcd dense(double t) const;
  /// Throws unless every term at time t is Hermitian.
  void validate(double t) const;
};

TimeDependentHamiltonian constant_hamiltonian(const LocalHamiltonian& h);

/// (1 - s(t)) H0 + s(t) H1 with s(t) = t / t_total clamped to [0, 1].
TimeDependentHamiltonian interpolated_hamiltonian(const LocalHamiltonian& h0, const LocalHamiltonian& h1, double t_total);

/// H(t) + f(t) W for a term list W.
TimeDependentHamiltonian add_drive(const TimeDependentHamiltonian& h, std::vector<LocalOp> w,
                                   std::function<double(double)> f);

struct EvolveOptions {
  std::int64_t max_dim = std::int64_t{1} << 12;
  double tolerance = 1e-9;  // self-consistency between step counts s and 2s
  int max_doublings = 14;
};

/// T exp(-i int_0^t H) with `steps` fixed steps of the fourth-order
/// commutator-free Magnus integrator (two exponentials per step at the
/// Gauss-Legendre nodes). Time-independent H uses one exact exponential.
MatrixXcd evolve(const TimeDependentHamiltonian& h, double t, int steps, const EvolveOptions& opt = {});

struct AdaptiveEvolution {
  MatrixXcd unitary;
  int steps = 0;
  double self_consistency = 0.0;  // |U_steps - U_{steps/2}|
};

/// Doubles the step count from `initial_steps` until successive results agree
/// within opt.tolerance.
AdaptiveEvolution evolve_converged(const TimeDependentHamiltonian& h, double t, int initial_steps = 4,
                                   const EvolveOptions& opt = {});

struct DistanceBound {
  double lhs = 0.0;    // |U0(t) - U1(t)|
  double rhs = 0.0;    // delta * t
  double sup_difference = 0.0;  // max over sampled times of |H0 - H1|
  bool pass = false;
};

/// |U0(t) - U1(t)| <= delta t given sup_tau |H0(tau) - H1(tau)| <= delta,
/// checked on `samples` equally spaced times.
DistanceBound check_interaction_picture_bound(const TimeDependentHamiltonian& h0, const TimeDependentHamiltonian& h1,
                                              double t, double delta, int samples = 65, const EvolveOptions& opt = {});

/// Random pair of 3-site time-dependent Hamiltonians whose difference is
/// g(t) W with |g| <= 1 and |W| = delta.
std::pair<TimeDependentHamiltonian, TimeDependentHamiltonian> random_bound_instance(double delta, std::mt19937_64& rng);

struct DecayRow {
  int l = 0;
  double difference = 0.0;
};

/// |U^dag P U - U_l^dag P U_l| for each l, where U_l keeps only the terms of h
/// inside sites [0, l) and P acts on site 0.
std::vector<DecayRow> lr_truncation_decay(const LocalHamiltonian& h, const MatrixXcd& p, const std::vector<int>& l_values,
                                          double t = 1.0, int threads = 1);

struct TrotterRow {
  int steps = 0;
  double error = 0.0;
};

/// |exp(-iHt) - C_s| for the first-order Trotter circuit with s steps.
std::vector<TrotterRow> trotter_error_scan(const LocalHamiltonian& h, double t, const std::vector<int>& s_values,
                                           int threads = 1);

/// Time-dependent version: step k uses the Trotter circuit of H at the step
/// midpoint; the reference is the converged time-ordered evolution.
std::vector<TrotterRow> trotter_error_scan(const TimeDependentHamiltonian& h, double t, const std::vector<int>& s_values,
                                           int threads = 1);

/// Runs fn(0..count-1) on up to `threads` workers. Results must be written to
/// per-index slots.
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace topocirc
