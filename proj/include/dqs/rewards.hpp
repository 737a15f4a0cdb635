#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "dqs/models.hpp"
#include "dqs/statevec.hpp"

// Scalar figures of merit: the global fidelity reward, the pairwise
// relative-entropy local reward, the observable error bound it implies,
// and the physical observables reported alongside.

namespace dqs {

/// Reduced state of the ordered site pair (j, k), j < k. Row/column index
/// r = 2*b_j + b_k with b = 0 for spin up.
struct PairDensityMatrix {
  Eigen::Matrix4cd entries;
  int site_j = 0;
  int site_k = 0;
};

enum class RewardKind { Fidelity, Local };

inline RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "fidelity") return RewardKind::Fidelity;
  if (s == "local") return RewardKind::Local;
  throw std::invalid_argument("unknown reward kind: " + s);
}

inline std::string to_string(RewardKind k) {
  return k == RewardKind::Fidelity ? "fidelity" : "local";
}

/// Eigenvalue floor applied to the second argument of the relative
/// entropy. Pair marginals of a pure global state are generically
/// rank-deficient, which would make the divergence infinite.
inline constexpr double kDefaultEntropyFloor = 1e-12;

/// rho^{jk} = Tr_{others} |psi><psi|.
inline PairDensityMatrix partial_trace_pair(const StateVector& psi, int j,
                                            int k) {
  const int n = psi.n_qubits();
  if (j < 1 || k <= j || k > n) {
    throw std::invalid_argument("partial_trace_pair: need 1 <= j < k <= N");
  }
  const std::size_t mask_j = std::size_t{1} << (j - 1);
  const std::size_t mask_k = std::size_t{1} << (k - 1);

  PairDensityMatrix rho;
  rho.site_j = j;
  rho.site_k = k;
  rho.entries.setZero();

  // Enumerate the other sites' configurations, then the 4x4 pair block.
  const int n_rest = n - 2;
  const std::size_t rest_dim = std::size_t{1} << n_rest;
  std::vector<std::size_t> rest_masks;
  rest_masks.reserve(n_rest);
  for (int q = 0; q < n; ++q) {
    const std::size_t m = std::size_t{1} << q;
    if (m != mask_j && m != mask_k) rest_masks.push_back(m);
  }
  std::array<std::size_t, 4> pair_bits = {0, mask_k, mask_j, mask_j | mask_k};
  for (std::size_t rest = 0; rest < rest_dim; ++rest) {
    std::size_t base = 0;
    for (int q = 0; q < n_rest; ++q) {
      if ((rest >> q) & 1) base |= rest_masks[q];
    }
    cplx amp[4];
    for (int r = 0; r < 4; ++r) amp[r] = psi[base | pair_bits[r]];
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        rho.entries(r, c) += amp[r] * std::conj(amp[c]);
      }
    }
  }
  return rho;
}

namespace detail {

inline void check_density(const PairDensityMatrix& rho, const char* who) {
  const double asym = (rho.entries - rho.entries.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) {
    throw std::invalid_argument(std::string(who) + ": matrix is not Hermitian");
  }
  if (std::abs(rho.entries.trace().real() - 1.0) > 1e-8 ||
      std::abs(rho.entries.trace().imag()) > 1e-8) {
    throw std::invalid_argument(std::string(who) + ": trace is not 1");
  }
}

}  // namespace detail

/// D(rho || sigma) = Tr rho (log rho - log sigma) in nats. Eigenvalues of
/// sigma are floored and its spectrum renormalized before taking logs, so
/// the result stays finite when supports mismatch. Clamped at 0 against
/// roundoff.
inline double relative_entropy(const PairDensityMatrix& rho,
                               const PairDensityMatrix& sigma,
                               double floor = kDefaultEntropyFloor) {
  detail::check_density(rho, "relative_entropy(rho)");
  detail::check_density(sigma, "relative_entropy(sigma)");

  // Identity of indiscernibles, kept exact: with bitwise-equal inputs the
  // floored divergence must be 0, not eigensolver noise (the local reward
  // of identical states has to clamp to exactly 1).
  bool identical = true;
  for (int r = 0; r < 4 && identical; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (rho.entries(r, c) != sigma.entries(r, c)) {
        identical = false;
        break;
      }
    }
  }
  if (identical) return 0.0;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es_rho(rho.entries);
  double tr_rho_log_rho = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double p = es_rho.eigenvalues()(i);
    if (p > 0.0) tr_rho_log_rho += p * std::log(p);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es_sigma(sigma.entries);
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q(i) = std::max(es_sigma.eigenvalues()(i), floor);
  q /= q.sum();

  // Tr rho log sigma in sigma's eigenbasis.
  const Eigen::Matrix4cd rho_in_sigma_basis =
      es_sigma.eigenvectors().adjoint() * rho.entries * es_sigma.eigenvectors();
  double tr_rho_log_sigma = 0.0;
  for (int i = 0; i < 4; ++i) {
    tr_rho_log_sigma += rho_in_sigma_basis(i, i).real() * std::log(q(i));
  }

  return std::max(tr_rho_log_rho - tr_rho_log_sigma, 0.0);
}

/// |<a|b>|^2.
inline double fidelity_reward(const StateVector& psi_dqs,
                              const StateVector& psi_target) {
  return std::norm(overlap(psi_dqs, psi_target));
}

/// 1 - (2 / N(N-1)) sum_{j<k} sqrt(D(rho_target^{jk} || rho_dqs^{jk})),
/// before clamping. Can be negative when pair marginals are far apart.
inline double local_reward_raw(const StateVector& psi_dqs,
                               const StateVector& psi_target,
                               double floor = kDefaultEntropyFloor) {
  const int n = psi_dqs.n_qubits();
  if (psi_target.n_qubits() != n) {
    throw std::invalid_argument("local_reward: qubit count mismatch");
  }
  if (n < 2) {
    throw std::invalid_argument("local_reward: need at least 2 qubits");
  }
  double sum = 0.0;
  for (int j = 1; j <= n; ++j) {
    for (int k = j + 1; k <= n; ++k) {
      const auto rho = partial_trace_pair(psi_target, j, k);
      const auto sigma = partial_trace_pair(psi_dqs, j, k);
      sum += std::sqrt(relative_entropy(rho, sigma, floor));
    }
  }
  return 1.0 - 2.0 / (double(n) * (n - 1)) * sum;
}

/// The local reward clamped to [0, 1].
inline double local_reward(const StateVector& psi_dqs,
                           const StateVector& psi_target,
                           double floor = kDefaultEntropyFloor) {
  return std::clamp(local_reward_raw(psi_dqs, psi_target, floor), 0.0, 1.0);
}

inline double reward_value(RewardKind kind, const StateVector& psi_dqs,
                           const StateVector& psi_target,
                           double floor = kDefaultEntropyFloor) {
  return kind == RewardKind::Fidelity ? fidelity_reward(psi_dqs, psi_target)
                                      : local_reward(psi_dqs, psi_target, floor);
}

/// Everything plotted against the exact dynamics: per-site magnetizations
/// and their averages, energy, Loschmidt echo, staggered particle density,
/// and nearest-neighbor connected zz correlators.
struct ObservableReport {
  std::vector<double> sx;   // <sigma_x_j>, j = 1..N
  std::vector<double> sz;   // <sigma_z_j>
  double mx_avg = 0.0;
  double mz_avg = 0.0;
  double energy = 0.0;
  double loschmidt = 0.0;   // |<psi0|psi>|^2
  double nu = 0.0;          // (1/2N) sum_j <(-1)^j sigma_z_j + 1>
  std::vector<double> czz;  // C_zz(j, j+1), j = 1..N-1
  double czz_mid = 0.0;     // C_zz(N/2, N/2+1)
};

inline ObservableReport observable_report(const StateVector& psi,
                                          const HamiltonianSpec& spec,
                                          const StateVector& psi0) {
  const int n = psi.n_qubits();
  if (spec.n_qubits != n || psi0.n_qubits() != n) {
    throw std::invalid_argument("observable_report: qubit count mismatch");
  }
  ObservableReport report;
  report.sx.assign(n, 0.0);
  report.sz.assign(n, 0.0);

  for (int j = 0; j < n; ++j) {
    const std::size_t mask = std::size_t{1} << j;
    double sx = 0.0;
    double sz = 0.0;
    for (std::size_t m = 0; m < psi.dim(); ++m) {
      const double w = std::norm(psi[m]);
      sz += (m & mask) ? -w : w;
      if (!(m & mask)) {
        sx += 2.0 * (std::conj(psi[m]) * psi[m | mask]).real();
      }
    }
    report.sx[j] = sx;
    report.sz[j] = sz;
  }
  report.mx_avg = 0.0;
  report.mz_avg = 0.0;
  for (int j = 0; j < n; ++j) {
    report.mx_avg += report.sx[j] / n;
    report.mz_avg += report.sz[j] / n;
  }

  report.energy = energy_expectation(spec, psi);
  report.loschmidt = std::norm(overlap(psi0, psi));

  double nu = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double sign = (j % 2 == 1) ? -1.0 : 1.0;
    nu += sign * report.sz[j - 1] + 1.0;
  }
  report.nu = nu / (2.0 * n);

  report.czz.assign(std::max(n - 1, 0), 0.0);
  for (int j = 0; j < n - 1; ++j) {
    const std::size_t mj = std::size_t{1} << j;
    const std::size_t mk = std::size_t{1} << (j + 1);
    double zz = 0.0;
    for (std::size_t m = 0; m < psi.dim(); ++m) {
      const double zjzk = (((m & mj) ? -1.0 : 1.0) * ((m & mk) ? -1.0 : 1.0));
      zz += zjzk * std::norm(psi[m]);
    }
    report.czz[j] = zz - report.sz[j] * report.sz[j + 1];
  }
  const int mid = n / 2;  // C_zz(N/2, N/2+1)
  report.czz_mid = (mid >= 1 && mid <= n - 1) ? report.czz[mid - 1] : 0.0;
  return report;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Checks |<O>_target - <O>_dqs| <= sqrt(2) max_{jk} ||O^{jk}||_inf * eps
/// for the two-body observable O = (2/N(N-1)) sum_{j<k} O^{jk}, with
/// eps = 1 - unclamped local reward. Blocks are ordered (1,2), (1,3), ...
/// lexicographically.
inline BoundCheck check_observable_bound(
    const StateVector& psi_dqs, const StateVector& psi_target,
    const std::vector<Eigen::Matrix4cd>& blocks,
    double floor = kDefaultEntropyFloor) {
  const int n = psi_dqs.n_qubits();
  if (psi_target.n_qubits() != n) {
    throw std::invalid_argument("check_observable_bound: qubit mismatch");
  }
  const std::size_t n_pairs = std::size_t(n) * (n - 1) / 2;
  if (blocks.size() != n_pairs) {
    throw std::invalid_argument("check_observable_bound: expected " +
                                std::to_string(n_pairs) + " blocks, got " +
                                std::to_string(blocks.size()));
  }
  for (const auto& block : blocks) {
    if ((block - block.adjoint()).cwiseAbs().maxCoeff() > 1e-8) {
      throw std::invalid_argument(
          "check_observable_bound: observable block is not Hermitian");
    }
  }

  const double scale = 2.0 / (double(n) * (n - 1));
  double expect_dqs = 0.0;
  double expect_target = 0.0;
  double max_norm = 0.0;
  std::size_t idx = 0;
  for (int j = 1; j <= n; ++j) {
    for (int k = j + 1; k <= n; ++k, ++idx) {
      const auto& block = blocks[idx];
      expect_dqs +=
          (partial_trace_pair(psi_dqs, j, k).entries * block).trace().real();
      expect_target +=
          (partial_trace_pair(psi_target, j, k).entries * block).trace().real();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(block);
      max_norm = std::max(max_norm, es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  BoundCheck result;
  result.lhs = std::abs(scale * (expect_target - expect_dqs));
  const double eps = 1.0 - local_reward_raw(psi_dqs, psi_target, floor);
  result.rhs = std::sqrt(2.0) * max_norm * eps;
  result.holds = result.lhs <= result.rhs + 1e-9;
  return result;
}

}  // namespace dqs
