#include "topocirc/circuits.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace topocirc {

namespace {

MatrixXcd identity_power(int d, int k) {
  const auto dim = checked_pow(d, std::max(k, 0), std::int64_t{1} << 24);
  if (dim < 0) throw Error(ErrorKind::resource, "window too large");
  return MatrixXcd::Identity(dim, dim);
}

MatrixXcd tensor_power(const MatrixXcd& u, int k) {
  MatrixXcd out = MatrixXcd::Identity(1, 1);
  for (int i = 0; i < k; ++i) out = kron(out, u);
  return out;
}

// Two-site matrix with its tensor factors exchanged.
MatrixXcd swap_factors(const MatrixXcd& m, int d) {
  MatrixXcd out(m.rows(), m.cols());
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) out(b * d + a, e * d + c) = m(a * d + b, c * d + e);
  return out;
}

LocalOp sorted_support(const LocalOp& op, int d) {
  if (op.sites.size() == 2 && op.sites[0] > op.sites[1])
    return {{op.sites[1], op.sites[0]}, swap_factors(op.matrix, d)};
  return op;
}

bool ring_adjacent(int a, int b, int n) { return b == a + 1 || (a == 0 && b == n - 1 && n > 2); }

// Gate embedded into the window [w0, w0 + width).
MatrixXcd embed_in_window(const Gate& g, int w0, int width, int d) {
  const int s0 = g.sites.front();
  const int s1 = g.sites.back();
  if (s1 - s0 + 1 != static_cast<int>(g.sites.size()))
    throw Error(ErrorKind::unsupported, "causal_cone_reduce: wrap-around gate inside a cone");
  return kron(kron(identity_power(d, s0 - w0), g.matrix), identity_power(d, w0 + width - 1 - s1));
}

}  // namespace

std::size_t LocalCircuit::gate_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.size();
  return n;
}

LocalCircuit compose(const LocalCircuit& first, const LocalCircuit& second) {
  if (first.n_sites != second.n_sites || first.local_dim != second.local_dim)
    throw Error(ErrorKind::invalid_size, "compose: circuits act on different chains");
  LocalCircuit out = first;
  out.layers.insert(out.layers.end(), second.layers.begin(), second.layers.end());
  return out;
}

LocalCircuit adjoint(const LocalCircuit& c) {
  LocalCircuit out = c;
  std::reverse(out.layers.begin(), out.layers.end());
  for (auto& layer : out.layers)
    for (auto& g : layer) g.matrix = g.matrix.adjoint().eval();
  return out;
}

CircuitReport validate_circuit(const LocalCircuit& c, double tolerance) {
  CircuitReport report;
  report.depth = c.depth();
  auto fail = [&](int l, int g, std::string msg) {
    report.valid = false;
    report.violations.push_back({l, g, std::move(msg)});
  };
  for (int l = 0; l < c.depth(); ++l) {
    std::vector<int> owner(std::max(c.n_sites, 0), -1);
    const auto& layer = c.layers[l];
    for (int gi = 0; gi < static_cast<int>(layer.size()); ++gi) {
      const Gate& g = layer[gi];
      const int k = static_cast<int>(g.sites.size());
      report.max_gate_size = std::max(report.max_gate_size, k);
      if (k == 0 || k > 2) {
        fail(l, gi, "gate support must have one or two sites");
        continue;
      }
      bool in_range = true;
      for (int s : g.sites)
        if (s < 0 || s >= c.n_sites) in_range = false;
      if (!in_range) {
        fail(l, gi, "gate support outside chain");
        continue;
      }
      if (!std::is_sorted(g.sites.begin(), g.sites.end())) fail(l, gi, "gate support not sorted");
      if (k == 2 && !ring_adjacent(g.sites[0], g.sites[1], c.n_sites)) fail(l, gi, "two-site gate on non-neighbouring sites");
      const auto expected = checked_pow(c.local_dim, k, 1 << 20);
      if (g.matrix.rows() != expected || g.matrix.cols() != expected) {
        fail(l, gi, "gate matrix size does not match support");
        continue;
      }
      if (!is_unitary(g.matrix, tolerance)) fail(l, gi, "gate is not unitary");
      for (int s : g.sites) {
        if (owner[s] >= 0) {
          std::ostringstream os;
          os << "support overlaps gate " << owner[s] << " in the same layer";
          fail(l, gi, os.str());
        }
        owner[s] = gi;
      }
    }
  }
  return report;
}

bool is_symmetric(const Gate& gate, const SymmetryRep& rep, double tolerance) {
  const int k = static_cast<int>(gate.sites.size());
  if (rep.local_dim() <= 0) throw Error(ErrorKind::invalid_size, "is_symmetric: empty representation");
  if (gate.matrix.rows() != checked_pow(rep.local_dim(), k, 1 << 20))
    throw Error(ErrorKind::invalid_size, "is_symmetric: representation dimension does not match gate");
  const double dim = static_cast<double>(gate.matrix.rows());
  for (const auto& u : rep.site_unitary) {
    const MatrixXcd big = tensor_power(u, k);
    const MatrixXcd m = gate.matrix * big * gate.matrix.adjoint();
    const cplx phase = (big.adjoint() * m).trace() / dim;
    if (std::abs(std::abs(phase) - 1.0) > tolerance) return false;
    if ((m - phase * big).cwiseAbs().maxCoeff() > tolerance) return false;
  }
  return true;
}

bool is_symmetric(const LocalCircuit& c, const SymmetryRep& rep, double tolerance) {
  for (const auto& layer : c.layers)
    for (const auto& g : layer)
      if (!is_symmetric(g, rep, tolerance)) return false;
  return true;
}

MatrixXcd swap_right_constituents() {
  // Site basis index = 2 * left + right; two-site index = 4 * site_a + site_b.
  MatrixXcd m = MatrixXcd::Zero(16, 16);
  for (int la = 0; la < 2; ++la)
    for (int ra = 0; ra < 2; ++ra)
      for (int lb = 0; lb < 2; ++lb)
        for (int rb = 0; rb < 2; ++rb) {
          const int in = 4 * (2 * la + ra) + (2 * lb + rb);
          const int out = 4 * (2 * la + rb) + (2 * lb + ra);
          m(out, in) = 1.0;
        }
  return m;
}

LocalCircuit build_singlet_swap_circuit(int n) {
  if (n < 2) throw Error(ErrorKind::invalid_size, "build_singlet_swap_circuit: need n >= 2");
  LocalCircuit c;
  c.n_sites = n;
  c.local_dim = 4;
  const MatrixXcd swap = swap_right_constituents();
  for (int k = 0; k + 1 < n; ++k) c.layers.push_back({Gate{{k, k + 1}, swap}});
  return c;
}

Statevector apply_circuit(const LocalCircuit& c, const Statevector& state) {
  if (c.n_sites != state.n_sites || c.local_dim != state.local_dim)
    throw Error(ErrorKind::invalid_size, "apply_circuit: circuit and state disagree on chain shape");
  Statevector out = state;
  for (const auto& layer : c.layers)
    for (const auto& g : layer) out.amplitudes = apply_local(out.amplitudes, c.n_sites, c.local_dim, {g.sites, g.matrix});
  return out;
}

MatrixXcd circuit_unitary(const LocalCircuit& c) {
  const auto dim = checked_pow(c.local_dim, c.n_sites, 1 << 14);
  if (dim < 0) throw Error(ErrorKind::resource, "circuit_unitary: dimension too large");
  MatrixXcd u = MatrixXcd::Identity(dim, dim);
  for (Eigen::Index col = 0; col < dim; ++col) {
    VectorXcd v = u.col(col);
    for (const auto& layer : c.layers)
      for (const auto& g : layer) v = apply_local(v, c.n_sites, c.local_dim, {g.sites, g.matrix});
    u.col(col) = v;
  }
  return u;
}

void StringOperator::validate() const {
  auto window_ok = [&](const WindowOp& w) {
    const auto dim = checked_pow(local_dim, w.width, 1 << 24);
    return w.width >= 1 && w.start >= 0 && w.end() <= n_sites && w.matrix.rows() == dim && w.matrix.cols() == dim;
  };
  if (!window_ok(left_end) || !window_ok(right_end)) throw Error(ErrorKind::out_of_range, "StringOperator: end window outside chain or mis-sized");
  if (left_end.end() > right_end.start) throw Error(ErrorKind::input, "StringOperator: end windows overlap");
  if (string_begin > string_end || string_begin < left_end.end() || string_end > right_end.start)
    throw Error(ErrorKind::input, "StringOperator: string range must lie between the end windows");
  if (string_factor.rows() != local_dim || string_factor.cols() != local_dim)
    throw Error(ErrorKind::invalid_size, "StringOperator: string factor must be a single-site matrix");
}

ProductOp StringOperator::to_product_op() const {
  validate();
  ProductOp op;
  auto window_sites = [](const WindowOp& w) {
    std::vector<int> s(w.width);
    for (int i = 0; i < w.width; ++i) s[i] = w.start + i;
    return s;
  };
  op.push_back({window_sites(left_end), left_end.matrix});
  for (int k = string_begin; k < string_end; ++k) op.push_back({{k}, string_factor});
  op.push_back({window_sites(right_end), right_end.matrix});
  return op;
}

StringOperator make_string_operator(int n_sites, int left_site, int right_site, const MatrixXcd& end_op,
                                    const MatrixXcd& string_factor) {
  if (!(0 <= left_site && left_site < right_site && right_site < n_sites))
    throw Error(ErrorKind::out_of_range, "make_string_operator: need 0 <= left < right < n");
  StringOperator q;
  q.n_sites = n_sites;
  q.local_dim = static_cast<int>(end_op.rows());
  q.left_end = {left_site, 1, end_op};
  q.right_end = {right_site, 1, end_op};
  q.string_factor = string_factor;
  q.string_begin = left_site + 1;
  q.string_end = right_site;
  q.validate();
  return q;
}

ConeReduction causal_cone_reduce_detailed(const LocalCircuit& c, const StringOperator& q, double tolerance) {
  q.validate();
  if (c.n_sites != q.n_sites || c.local_dim != q.local_dim)
    throw Error(ErrorKind::invalid_size, "causal_cone_reduce: circuit and operator disagree on chain shape");
  if (q.string_begin != q.left_end.end() || q.string_end != q.right_end.start)
    throw Error(ErrorKind::input, "causal_cone_reduce: string must fill the gap between end windows");
  const int d = q.local_dim;

  int l0 = q.left_end.start, l1 = q.left_end.end() - 1;
  int r0 = q.right_end.start, r1 = q.right_end.end() - 1;
  cplx scalar = 1.0;
  std::vector<std::pair<int, const Gate*>> left_gates, right_gates;
  ConeReduction out;

  for (int l = c.depth() - 1; l >= 0; --l) {
    for (const Gate& g : c.layers[l]) {
      bool touches_left = false, touches_right = false, in_string = false, in_rest = false;
      for (int s : g.sites) {
        if (s >= l0 && s <= l1) touches_left = true;
        else if (s >= r0 && s <= r1) touches_right = true;
        else if (s > l1 && s < r0) in_string = true;
        else in_rest = true;
      }
      if (touches_left && touches_right) throw Error(ErrorKind::reduction, "causal_cone_reduce: causal cones overlap");
      if (touches_left || touches_right) {
        if (g.sites.size() == 2 && g.sites[1] != g.sites[0] + 1)
          throw Error(ErrorKind::unsupported, "causal_cone_reduce: wrap-around gate touches a cone");
        if (touches_left) {
          left_gates.emplace_back(l, &g);
          l0 = std::min(l0, g.sites.front());
          l1 = std::max(l1, g.sites.back());
        } else {
          right_gates.emplace_back(l, &g);
          r0 = std::min(r0, g.sites.front());
          r1 = std::max(r1, g.sites.back());
        }
        if (l1 >= r0) throw Error(ErrorKind::reduction, "causal_cone_reduce: causal cones overlap");
        continue;
      }
      if (in_string && in_rest) throw Error(ErrorKind::reduction, "causal_cone_reduce: gate straddles string end");
      if (in_string) {
        const MatrixXcd big = tensor_power(q.string_factor, static_cast<int>(g.sites.size()));
        const MatrixXcd m = g.matrix.adjoint() * big * g.matrix;
        const cplx phase = (big.adjoint() * m).trace() / static_cast<double>(big.rows());
        if (std::abs(std::abs(phase) - 1.0) > tolerance || (m - phase * big).cwiseAbs().maxCoeff() > tolerance)
          throw Error(ErrorKind::symmetry, "causal_cone_reduce: gate does not commute with the string factor");
        scalar *= phase;
      }
      ++out.cancelled_gates;
    }
  }

  // Cone gates must also commute with the string factor for the reduced
  // operator to keep its symmetry transformation law.
  for (const auto* list : {&left_gates, &right_gates})
    for (const auto& [layer, g] : *list) {
      const MatrixXcd big = tensor_power(q.string_factor, static_cast<int>(g->sites.size()));
      const MatrixXcd m = g->matrix.adjoint() * big * g->matrix;
      const cplx phase = (big.adjoint() * m).trace() / static_cast<double>(big.rows());
      if (std::abs(std::abs(phase) - 1.0) > tolerance || (m - phase * big).cwiseAbs().maxCoeff() > tolerance)
        throw Error(ErrorKind::symmetry, "causal_cone_reduce: cone gate does not commute with the string factor");
    }

  auto by_layer = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::stable_sort(left_gates.begin(), left_gates.end(), by_layer);
  std::stable_sort(right_gates.begin(), right_gates.end(), by_layer);

  const int lw = l1 - l0 + 1;
  const int rw = r1 - r0 + 1;
  MatrixXcd cl = identity_power(d, lw);
  for (const auto& [layer, g] : left_gates) cl = embed_in_window(*g, l0, lw, d) * cl;
  MatrixXcd cr = identity_power(d, rw);
  for (const auto& [layer, g] : right_gates) cr = embed_in_window(*g, r0, rw, d) * cr;

  const MatrixXcd ol = kron(kron(identity_power(d, q.left_end.start - l0), q.left_end.matrix),
                            tensor_power(q.string_factor, l1 - (q.left_end.end() - 1)));
  const MatrixXcd orr = kron(kron(tensor_power(q.string_factor, q.right_end.start - r0), q.right_end.matrix),
                             identity_power(d, r1 - (q.right_end.end() - 1)));

  out.left_cone_unitary = fix_phase_first_entry(cl);
  out.right_cone_unitary = fix_phase_first_entry(cr);
  out.left_cone_gates = static_cast<int>(left_gates.size());
  out.right_cone_gates = static_cast<int>(right_gates.size());

  StringOperator& red = out.reduced;
  red.n_sites = q.n_sites;
  red.local_dim = d;
  red.left_end = {l0, lw, scalar * (out.left_cone_unitary.adjoint() * ol * out.left_cone_unitary)};
  red.right_end = {r0, rw, out.right_cone_unitary.adjoint() * orr * out.right_cone_unitary};
  red.string_factor = q.string_factor;
  red.string_begin = l1 + 1;
  red.string_end = r0;
  red.validate();
  return out;
}

StringOperator causal_cone_reduce(const LocalCircuit& c, const StringOperator& q, double tolerance) {
  return causal_cone_reduce_detailed(c, q, tolerance).reduced;
}

std::vector<LocalOp> bond_terms(const LocalHamiltonian& h) {
  h.validate();
  const int n = h.n_sites;
  const int d = h.local_dim;
  const bool periodic = h.boundary == Boundary::periodic;
  const int n_bonds = periodic ? n : n - 1;
  if (n_bonds < 1) throw Error(ErrorKind::invalid_size, "bond_terms: need at least one bond");
  std::vector<LocalOp> bonds(n_bonds);
  for (int b = 0; b < n_bonds; ++b) {
    bonds[b].sites = (b == n - 1) ? std::vector<int>{0, n - 1} : std::vector<int>{b, b + 1};
    bonds[b].matrix = MatrixXcd::Zero(d * d, d * d);
  }
  const MatrixXcd id = MatrixXcd::Identity(d, d);
  for (const auto& raw : h.terms) {
    const LocalOp term = sorted_support(raw, d);
    if (term.sites.size() == 1) {
      const int j = term.sites[0];
      const int b = j == 0 ? 0 : j - 1;
      bonds[b].matrix += (bonds[b].sites[0] == j) ? kron(term.matrix, id) : kron(id, term.matrix);
    } else if (term.sites.size() == 2) {
      const int a = term.sites[0], c = term.sites[1];
      const int b = (c == a + 1) ? a : n - 1;
      if (b >= n_bonds) throw Error(ErrorKind::unsupported, "bond_terms: wrap term on open chain");
      bonds[b].matrix += term.matrix;
    } else {
      throw Error(ErrorKind::unsupported, "bond_terms: Hamiltonian is not 2-local");
    }
  }
  return bonds;
}

LocalCircuit trotterize(const LocalHamiltonian& h, double t, int steps) {
  if (steps < 1) throw Error(ErrorKind::input, "trotterize: need at least one step");
  const auto bonds = bond_terms(h);
  const int n = h.n_sites;
  if (h.boundary == Boundary::periodic && n % 2 == 1)
    throw Error(ErrorKind::unsupported, "trotterize: periodic chains need an even number of sites");
  Layer odd_layer, even_layer;
  for (int b = 0; b < static_cast<int>(bonds.size()); ++b) {
    if (bonds[b].matrix.cwiseAbs().maxCoeff() == 0.0) continue;
    Gate g{bonds[b].sites, expm_hermitian(bonds[b].matrix, t / steps)};
    (b % 2 == 1 ? odd_layer : even_layer).push_back(std::move(g));
  }
  LocalCircuit c;
  c.n_sites = n;
  c.local_dim = h.local_dim;
  for (int s = 0; s < steps; ++s) {
    c.layers.push_back(odd_layer);
    c.layers.push_back(even_layer);
  }
  return c;
}

MatrixXcd random_symmetric_gate(const SymmetryRep& rep, int support, std::mt19937_64& rng) {
  const int d = rep.local_dim();
  const auto dim = checked_pow(d, support, 1 << 16);
  const MatrixXcd h = random_hermitian(dim, rng);
  MatrixXcd sym = MatrixXcd::Zero(dim, dim);
  for (const auto& u : rep.site_unitary) {
    const MatrixXcd big = tensor_power(u, support);
    sym += big * h * big.adjoint();
  }
  sym /= static_cast<double>(rep.size());
  sym = (sym + sym.adjoint()) * 0.5;
  return expm_hermitian(sym, 2.0);
}

LocalCircuit random_symmetric_circuit(int n, int depth, const SymmetryRep& rep, std::mt19937_64& rng) {
  LocalCircuit c;
  c.n_sites = n;
  c.local_dim = rep.local_dim();
  for (int l = 0; l < depth; ++l) {
    Layer layer;
    for (int b = l % 2; b + 1 < n; b += 2) layer.push_back({{b, b + 1}, random_symmetric_gate(rep, 2, rng)});
    c.layers.push_back(std::move(layer));
  }
  return c;
}

LocalCircuit random_circuit(int n, int local_dim, int depth, std::mt19937_64& rng) {
  LocalCircuit c;
  c.n_sites = n;
  c.local_dim = local_dim;
  for (int l = 0; l < depth; ++l) {
    Layer layer;
    for (int b = l % 2; b + 1 < n; b += 2) layer.push_back({{b, b + 1}, random_unitary(local_dim * local_dim, rng)});
    c.layers.push_back(std::move(layer));
  }
  return c;
}

void write_circuit(std::ostream& os, const LocalCircuit& c) {
  os << "topocirc-circuit 1\n";
  os << "n_sites " << c.n_sites << "\n";
  os << "local_dim " << c.local_dim << "\n";
  os << "depth " << c.depth() << "\n";
  os << std::setprecision(17);
  for (int l = 0; l < c.depth(); ++l) {
    os << "layer " << l << " " << c.layers[l].size() << "\n";
    for (const auto& g : c.layers[l]) {
      os << "gate " << g.sites.size();
      for (int s : g.sites) os << " " << s;
      os << "\n";
      for (Eigen::Index i = 0; i < g.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < g.matrix.cols(); ++j)
          os << (j ? " " : "") << g.matrix(i, j).real() << " " << g.matrix(i, j).imag();
        os << "\n";
      }
    }
  }
}

LocalCircuit read_circuit(std::istream& is) {
  auto expect_word = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word) throw Error(ErrorKind::format, "read_circuit: expected '" + word + "', got '" + got + "'");
  };
  int version = 0;
  expect_word("topocirc-circuit");
  if (!(is >> version) || version != 1) throw Error(ErrorKind::format, "read_circuit: unsupported version");
  LocalCircuit c;
  int depth = 0;
  expect_word("n_sites");
  is >> c.n_sites;
  expect_word("local_dim");
  is >> c.local_dim;
  expect_word("depth");
  is >> depth;
  if (!is || c.n_sites < 1 || c.local_dim < 1 || depth < 0) throw Error(ErrorKind::format, "read_circuit: bad header");
  c.layers.resize(depth);
  for (int l = 0; l < depth; ++l) {
    int index = 0;
    std::size_t n_gates = 0;
    expect_word("layer");
    is >> index >> n_gates;
    if (!is || index != l) throw Error(ErrorKind::format, "read_circuit: bad layer header");
    for (std::size_t gi = 0; gi < n_gates; ++gi) {
      expect_word("gate");
      int k = 0;
      is >> k;
      if (!is || k < 1 || k > 2) throw Error(ErrorKind::format, "read_circuit: bad gate support size");
      Gate g;
      g.sites.resize(k);
      for (int& s : g.sites) is >> s;
      const auto dim = checked_pow(c.local_dim, k, 1 << 20);
      g.matrix.resize(dim, dim);
      for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) {
          double re = 0, im = 0;
          is >> re >> im;
          g.matrix(i, j) = cplx(re, im);
        }
      if (!is) throw Error(ErrorKind::format, "read_circuit: truncated gate matrix");
      c.layers[l].push_back(std::move(g));
    }
  }
  return c;
}

}  // namespace topocirc
