#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Exact state-vector simulation of an open chain of N qubits under the
// trapped-ion gate set: single-site x/z rotations and the all-to-all
// power-law XX entangling gate.
//
// Conventions used throughout the library:
//   - sites are numbered 1..N;
//   - site j occupies bit (j-1) of the amplitude index;
//   - bit value 0 is spin up (sigma_z eigenvalue +1), bit value 1 is down.

namespace dqs {

using cplx = std::complex<double>;

enum class Spin : int { Up = 0, Down = 1 };

class StateVector {
 public:
  // Initializes |up...up> (amplitude 1 at index 0).
  explicit StateVector(int n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > 30) {
      throw std::invalid_argument("StateVector: qubit count out of range: " +
                                  std::to_string(n_qubits));
    }
    amps_.assign(std::size_t{1} << n_qubits, cplx{0.0, 0.0});
    amps_[0] = cplx{1.0, 0.0};
  }

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }

  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }

  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }

  double norm() const {
    double s = 0.0;
    for (const cplx& a : amps_) s += std::norm(a);
    return std::sqrt(s);
  }

 private:
  int n_qubits_;
  std::vector<cplx> amps_;
};

/// <a|b>, conjugate-linear in the first argument.
inline cplx overlap(const StateVector& a, const StateVector& b) {
  if (a.n_qubits() != b.n_qubits()) {
    throw std::invalid_argument("overlap: qubit count mismatch");
  }
  cplx s{0.0, 0.0};
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

/// Product state with the given spin per site; pattern[j-1] is site j.
inline StateVector basis_state(int n_qubits, std::span<const Spin> pattern) {
  if (static_cast<int>(pattern.size()) != n_qubits) {
    throw std::invalid_argument("basis_state: pattern length " +
                                std::to_string(pattern.size()) +
                                " does not match N=" + std::to_string(n_qubits));
  }
  StateVector psi(n_qubits);
  std::size_t index = 0;
  for (int j = 0; j < n_qubits; ++j) {
    if (pattern[j] == Spin::Down) index |= std::size_t{1} << j;
  }
  psi[0] = cplx{0.0, 0.0};
  psi[index] = cplx{1.0, 0.0};
  return psi;
}

inline StateVector basis_state(int n_qubits, const std::vector<Spin>& pattern) {
  return basis_state(n_qubits, std::span<const Spin>(pattern));
}

/// Fully polarized |up...up>.
inline StateVector polarized_state(int n_qubits) { return StateVector(n_qubits); }

/// Neel state with sigma_z_j = -(-1)^j: odd sites up, even sites down.
/// This is the bare vacuum of the staggered-fermion mapping.
inline StateVector neel_state(int n_qubits) {
  std::vector<Spin> pattern(n_qubits);
  for (int j = 1; j <= n_qubits; ++j) {
    pattern[j - 1] = (j % 2 == 1) ? Spin::Up : Spin::Down;
  }
  return basis_state(n_qubits, pattern);
}

namespace detail {

inline void check_site(const StateVector& psi, int site, const char* op) {
  if (site < 1 || site > psi.n_qubits()) {
    throw std::out_of_range(std::string(op) + ": site " + std::to_string(site) +
                            " outside 1.." + std::to_string(psi.n_qubits()));
  }
}

}  // namespace detail

/// exp(-i theta sigma_x_j).
inline void apply_rx(StateVector& psi, int site, double theta) {
  detail::check_site(psi, site, "apply_rx");
  const double c = std::cos(theta);
  const cplx mis{0.0, -std::sin(theta)};
  const std::size_t mask = std::size_t{1} << (site - 1);
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    if (i & mask) continue;
    const cplx a0 = psi[i];
    const cplx a1 = psi[i | mask];
    psi[i] = c * a0 + mis * a1;
    psi[i | mask] = mis * a0 + c * a1;
  }
}

/// exp(-i theta sigma_z_j).
inline void apply_rz(StateVector& psi, int site, double theta) {
  detail::check_site(psi, site, "apply_rz");
  const cplx up_phase = std::polar(1.0, -theta);
  const cplx down_phase = std::polar(1.0, theta);
  const std::size_t mask = std::size_t{1} << (site - 1);
  for (std::size_t i = 0; i < psi.dim(); ++i) {
    psi[i] *= (i & mask) ? down_phase : up_phase;
  }
}

/// Couplings C(m) = sum_{j<k} s_j s_k / |k-j|^alpha over x-basis
/// configurations s in {+-1}^N, indexed so that bit (j-1) of m set means
/// s_j = -1. Shared by every application of the XX gate at fixed (N, alpha).
inline std::vector<double> xx_coupling_table(int n_qubits, double alpha) {
  if (n_qubits < 2) {
    throw std::invalid_argument("xx_coupling_table: need at least 2 qubits");
  }
  if (alpha < 0.0) {
    throw std::invalid_argument("xx_coupling_table: alpha must be >= 0");
  }
  std::vector<double> weight(n_qubits);
  for (int d = 1; d < n_qubits; ++d) {
    weight[d] = 1.0 / std::pow(static_cast<double>(d), alpha);
  }
  const std::size_t dim = std::size_t{1} << n_qubits;
  std::vector<double> table(dim);
  std::vector<double> spin(n_qubits);
  for (std::size_t m = 0; m < dim; ++m) {
    for (int j = 0; j < n_qubits; ++j) {
      spin[j] = (m >> j) & 1 ? -1.0 : 1.0;
    }
    double sum = 0.0;
    for (int j = 0; j < n_qubits; ++j) {
      for (int k = j + 1; k < n_qubits; ++k) {
        sum += spin[j] * spin[k] * weight[k - j];
      }
    }
    table[m] = sum;
  }
  return table;
}

namespace detail {

// In-place normalized Walsh-Hadamard transform, i.e. H applied to every qubit.
inline void walsh_hadamard(StateVector& psi) {
  static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const std::size_t dim = psi.dim();
  for (std::size_t h = 1; h < dim; h <<= 1) {
    for (std::size_t i = 0; i < dim; i += (h << 1)) {
      for (std::size_t j = i; j < i + h; ++j) {
        const cplx x = psi[j];
        const cplx y = psi[j + h];
        psi[j] = (x + y) * inv_sqrt2;
        psi[j + h] = (x - y) * inv_sqrt2;
      }
    }
  }
}

}  // namespace detail

/// XX gate with a precomputed coupling table (see xx_coupling_table).
/// All terms of the generator commute, so the gate is diagonal in the
/// x basis: transform, multiply phases, transform back.
inline void apply_xx_with_table(StateVector& psi, double theta,
                                std::span<const double> table) {
  if (table.size() != psi.dim()) {
    throw std::invalid_argument("apply_xx_with_table: table size mismatch");
  }
  detail::walsh_hadamard(psi);
  for (std::size_t m = 0; m < psi.dim(); ++m) {
    psi[m] *= std::polar(1.0, -theta * table[m]);
  }
  detail::walsh_hadamard(psi);
}

/// exp(-i theta sum_{j<k} sigma_x_j sigma_x_k / |k-j|^alpha).
inline void apply_xx(StateVector& psi, double theta, double alpha) {
  if (psi.n_qubits() < 2) {
    throw std::invalid_argument("apply_xx: need at least 2 qubits");
  }
  const std::vector<double> table = xx_coupling_table(psi.n_qubits(), alpha);
  apply_xx_with_table(psi, theta, table);
}

/// Angles of one circuit step: the XX knob plus per-site z and x knobs.
struct StepAngles {
  double theta_xx = 0.0;
  std::vector<double> theta_z;
  std::vector<double> theta_x;
  double alpha = 0.0;

  int n_sites() const { return static_cast<int>(theta_z.size()); }

  static StepAngles zeros(int n_qubits, double alpha) {
    StepAngles s;
    s.theta_z.assign(n_qubits, 0.0);
    s.theta_x.assign(n_qubits, 0.0);
    s.alpha = alpha;
    return s;
  }
};

/// One step U_t: x rotations on every site, then z rotations, then the
/// XX gate (single-site factors act on the state first). For a single
/// qubit there is no XX term and theta_xx is ignored.
inline void apply_step(StateVector& psi, const StepAngles& step) {
  const int n = psi.n_qubits();
  if (step.n_sites() != n || static_cast<int>(step.theta_x.size()) != n) {
    throw std::invalid_argument("apply_step: angle arrays do not match N=" +
                                std::to_string(n));
  }
  for (int j = 1; j <= n; ++j) apply_rx(psi, j, step.theta_x[j - 1]);
  for (int j = 1; j <= n; ++j) apply_rz(psi, j, step.theta_z[j - 1]);
  if (n >= 2) apply_xx(psi, step.theta_xx, step.alpha);
}

/// Full variational circuit: n steps of StepAngles sharing N and alpha.
struct CircuitParams {
  std::vector<StepAngles> steps;

  int n_gates() const { return static_cast<int>(steps.size()); }
  int n_sites() const { return steps.empty() ? 0 : steps.front().n_sites(); }
  double alpha() const { return steps.empty() ? 0.0 : steps.front().alpha; }
};

/// |psi_dqs> = U_n ... U_2 U_1 |psi_0>.
inline StateVector run_circuit(const StateVector& psi0,
                               const CircuitParams& params) {
  StateVector psi = psi0;
  if (params.steps.empty()) return psi;
  const int n = psi.n_qubits();
  for (const StepAngles& step : params.steps) {
    if (step.n_sites() != n || step.alpha != params.alpha()) {
      throw std::invalid_argument("run_circuit: inconsistent step angles");
    }
  }
  // All steps share alpha, so one phase table serves the whole circuit.
  std::vector<double> table;
  if (n >= 2) table = xx_coupling_table(n, params.alpha());
  for (const StepAngles& step : params.steps) {
    for (int j = 1; j <= n; ++j) apply_rx(psi, j, step.theta_x[j - 1]);
    for (int j = 1; j <= n; ++j) apply_rz(psi, j, step.theta_z[j - 1]);
    if (n >= 2) apply_xx_with_table(psi, step.theta_xx, table);
  }
  return psi;
}

}  // namespace dqs
