#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dqs/rewards.hpp"
#include "oracles.hpp"

using namespace dqs;
using oracles::Mat;
using oracles::Vec;

namespace {

// Straight-line reimplementation of the pair reduction: dense outer
// product |psi><psi| followed by explicit index summation.
Eigen::Matrix4cd pair_marginal_oracle(const StateVector& psi, int j, int k) {
  const Vec v = oracles::to_eigen(psi);
  const Mat rho_full = v * v.adjoint();
  const int n = psi.n_qubits();
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  for (std::size_t row = 0; row < psi.dim(); ++row) {
    for (std::size_t col = 0; col < psi.dim(); ++col) {
      const std::size_t rest_row = row & ~((std::size_t{1} << (j - 1)) |
                                           (std::size_t{1} << (k - 1)));
      const std::size_t rest_col = col & ~((std::size_t{1} << (j - 1)) |
                                           (std::size_t{1} << (k - 1)));
      if (rest_row != rest_col) continue;
      const int r = 2 * int((row >> (j - 1)) & 1) + int((row >> (k - 1)) & 1);
      const int c = 2 * int((col >> (j - 1)) & 1) + int((col >> (k - 1)) & 1);
      out(r, c) += rho_full(Eigen::Index(row), Eigen::Index(col));
    }
  }
  (void)n;
  return out;
}

// Matrix logarithm of a floored, renormalized density matrix.
Eigen::Matrix4cd floored_log(const Eigen::Matrix4cd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m);
  Eigen::Vector4d vals;
  for (int i = 0; i < 4; ++i) vals(i) = std::max(es.eigenvalues()(i), floor);
  vals /= vals.sum();
  Eigen::Matrix4cd logd = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i) logd(i, i) = std::log(vals(i));
  return es.eigenvectors() * logd * es.eigenvectors().adjoint();
}

// Independent evaluation of the local-reward formula.
double local_reward_oracle(const StateVector& dqs_state,
                           const StateVector& target, double floor) {
  const int n = dqs_state.n_qubits();
  double sum = 0.0;
  for (int j = 1; j <= n; ++j) {
    for (int k = j + 1; k <= n; ++k) {
      const Eigen::Matrix4cd rho = pair_marginal_oracle(target, j, k);
      const Eigen::Matrix4cd sigma = pair_marginal_oracle(dqs_state, j, k);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho);
      double tr_rho_log_rho = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double p = es.eigenvalues()(i);
        if (p > 0.0) tr_rho_log_rho += p * std::log(p);
      }
      const double cross = (rho * floored_log(sigma, floor)).trace().real();
      sum += std::sqrt(std::max(tr_rho_log_rho - cross, 0.0));
    }
  }
  return 1.0 - 2.0 / (double(n) * (n - 1)) * sum;
}

double trace_norm(const Eigen::Matrix4cd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m);
  return es.eigenvalues().cwiseAbs().sum();
}

PairDensityMatrix random_density(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::Matrix4cd a;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a(r, c) = cplx(dist(rng), dist(rng));
  }
  Eigen::Matrix4cd rho = a * a.adjoint();
  rho /= rho.trace().real();
  return PairDensityMatrix{rho, 1, 2};
}

Eigen::Matrix4cd random_hermitian(std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::Matrix4cd a;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a(r, c) = cplx(dist(rng), dist(rng));
  }
  return 0.5 * (a + a.adjoint());
}

CircuitParams random_circuit(int n, int steps, double alpha,
                             std::mt19937_64& rng) {
  std::uniform_real_distribution<double> xx(-0.2, 0.2);
  std::uniform_real_distribution<double> single(-0.4, 0.4);
  CircuitParams params;
  for (int t = 0; t < steps; ++t) {
    StepAngles step = StepAngles::zeros(n, alpha);
    step.theta_xx = xx(rng);
    for (int j = 0; j < n; ++j) {
      step.theta_z[j] = single(rng);
      step.theta_x[j] = single(rng);
    }
    params.steps.push_back(step);
  }
  return params;
}

}  // namespace

TEST_CASE("partial trace of product states") {
  const auto psi = polarized_state(3);
  const auto rho = partial_trace_pair(psi, 1, 2);
  CHECK(std::abs(rho.entries(0, 0) - cplx(1.0, 0.0)) < 1e-14);
  CHECK(rho.entries.cwiseAbs().sum() == Catch::Approx(1.0));
}

TEST_CASE("partial trace of a Bell pair leaves the far qubit pure") {
  // (|uu> + |dd>)/sqrt(2) on sites 1,2; site 3 up. Pair (1,3) is
  // maximally mixed on the first slot.
  StateVector psi(3);
  psi[0] = cplx(1.0 / std::sqrt(2.0), 0.0);
  psi[3] = cplx(1.0 / std::sqrt(2.0), 0.0);  // sites 1,2 down, site 3 up
  const auto rho = partial_trace_pair(psi, 1, 3);
  Eigen::Matrix4cd expected = Eigen::Matrix4cd::Zero();
  expected(0, 0) = 0.5;  // (up, up)
  expected(2, 2) = 0.5;  // (down on site 1, up on site 3)
  CHECK((rho.entries - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("partial trace matches the dense outer-product oracle") {
  std::mt19937_64 rng(211);
  for (int rep = 0; rep < 20; ++rep) {
    const auto psi = oracles::random_state(4, rng);
    for (int j = 1; j <= 4; ++j) {
      for (int k = j + 1; k <= 4; ++k) {
        const auto rho = partial_trace_pair(psi, j, k);
        const auto expected = pair_marginal_oracle(psi, j, k);
        CHECK((rho.entries - expected).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
}

TEST_CASE("partial trace outputs are valid density matrices") {
  std::mt19937_64 rng(223);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 2 + int(rng() % 4);
    const auto psi = oracles::random_state(n, rng);
    const int j = 1 + int(rng() % (n - 1));
    const int k = j + 1 + int(rng() % (n - j));
    const auto rho = partial_trace_pair(psi, j, k);
    CHECK((rho.entries - rho.entries.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(rho.entries.trace().real() - 1.0) < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho.entries);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("partial trace rejects bad site pairs") {
  const auto psi = polarized_state(3);
  CHECK_THROWS_AS(partial_trace_pair(psi, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(partial_trace_pair(psi, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(partial_trace_pair(psi, 1, 4), std::invalid_argument);
}

TEST_CASE("relative entropy of identical states vanishes") {
  std::mt19937_64 rng(227);
  for (int rep = 0; rep < 10; ++rep) {
    const auto rho = random_density(rng);
    CHECK(relative_entropy(rho, rho) < 1e-10);
  }
}

TEST_CASE("relative entropy analytic value ln 4") {
  Eigen::Matrix4cd pure = Eigen::Matrix4cd::Zero();
  pure(0, 0) = 1.0;
  const PairDensityMatrix rho{pure, 1, 2};
  const PairDensityMatrix sigma{Eigen::Matrix4cd::Identity() * 0.25, 1, 2};
  CHECK(relative_entropy(rho, sigma) ==
        Catch::Approx(std::log(4.0)).margin(1e-10));
}

TEST_CASE("relative entropy rejects invalid inputs") {
  std::mt19937_64 rng(229);
  const auto good = random_density(rng);
  PairDensityMatrix not_hermitian = good;
  not_hermitian.entries(0, 1) += cplx(0.5, 0.5);
  CHECK_THROWS_AS(relative_entropy(not_hermitian, good), std::invalid_argument);
  PairDensityMatrix bad_trace = good;
  bad_trace.entries *= 2.0;
  CHECK_THROWS_AS(relative_entropy(good, bad_trace), std::invalid_argument);
}

TEST_CASE("relative entropy is nonnegative and satisfies Pinsker") {
  std::mt19937_64 rng(233);
  for (int rep = 0; rep < 100; ++rep) {
    const auto rho = random_density(rng);
    const auto sigma = random_density(rng);
    const double d = relative_entropy(rho, sigma);
    CHECK(d >= 0.0);
    const double tn = trace_norm(rho.entries - sigma.entries);
    CHECK(tn <= std::sqrt(2.0 * d) + 1e-9);
  }
}

TEST_CASE("Holder and Pinsker chain verified link by link") {
  std::mt19937_64 rng(239);
  for (int rep = 0; rep < 100; ++rep) {
    const auto rho = random_density(rng);
    const auto sigma = random_density(rng);
    const auto obs = random_hermitian(rng);
    const double lhs =
        std::abs(((rho.entries - sigma.entries) * obs).trace().real());
    const double tn = trace_norm(rho.entries - sigma.entries);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(obs);
    const double op_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    const double d = relative_entropy(rho, sigma);
    CHECK(lhs <= tn * op_norm + 1e-9);
    CHECK(tn * op_norm <= std::sqrt(2.0 * d) * op_norm + 1e-9);
  }
}

TEST_CASE("local reward of identical states is exactly 1") {
  std::mt19937_64 rng(241);
  const auto psi = oracles::random_state(4, rng);
  CHECK(local_reward(psi, psi) == 1.0);
}

TEST_CASE("local reward clamps on disjoint support") {
  const auto up = basis_state(2, std::vector<Spin>{Spin::Up, Spin::Up});
  const auto down = basis_state(2, std::vector<Spin>{Spin::Down, Spin::Down});
  CHECK(local_reward_raw(up, down) < 0.0);
  CHECK(local_reward(up, down) == 0.0);
}

TEST_CASE("local reward matches the straight-line oracle") {
  const auto spec = HamiltonianSpec::lri(4, {1.0, 2.0, 2.0, 3.0});
  const auto psi0 = polarized_state(4);
  EvolutionConfig cfg;
  cfg.tau = 0.2;
  const auto target = exact_evolve(spec, psi0, cfg);
  const auto dqs_state = run_circuit(psi0, trotter_params(spec, 0.2, 3));
  const double expected =
      local_reward_oracle(dqs_state, target, kDefaultEntropyFloor);
  CHECK(local_reward_raw(dqs_state, target) ==
        Catch::Approx(expected).margin(1e-10));
}

TEST_CASE("fidelity reward basics") {
  std::mt19937_64 rng(251);
  const auto a = oracles::random_state(3, rng);
  CHECK(fidelity_reward(a, a) == Catch::Approx(1.0));
  const auto up = basis_state(2, std::vector<Spin>{Spin::Up, Spin::Up});
  const auto down = basis_state(2, std::vector<Spin>{Spin::Down, Spin::Down});
  CHECK(fidelity_reward(up, down) == 0.0);
}

TEST_CASE("rewards are invariant under global phases") {
  std::mt19937_64 rng(257);
  const auto a = oracles::random_state(3, rng);
  const auto b = oracles::random_state(3, rng);
  auto a_phased = a;
  for (std::size_t i = 0; i < a_phased.dim(); ++i) {
    a_phased[i] *= std::polar(1.0, 1.234);
  }
  CHECK(fidelity_reward(a_phased, b) ==
        Catch::Approx(fidelity_reward(a, b)).margin(1e-12));
  CHECK(local_reward(a_phased, b) ==
        Catch::Approx(local_reward(a, b)).margin(1e-10));
}

TEST_CASE("observable report on the initial state") {
  const auto spec = HamiltonianSpec::schwinger(4);
  const auto psi0 = model_initial_state(spec);
  const auto report = observable_report(psi0, spec, psi0);
  CHECK(report.loschmidt == Catch::Approx(1.0));
  CHECK(std::abs(report.nu) < 1e-12);
  for (double c : report.czz) CHECK(std::abs(c) < 1e-12);  // product state
  CHECK(report.czz.size() == 3);
}

TEST_CASE("observable report magnetizations and midpoint correlator") {
  const auto spec = HamiltonianSpec::lri(4, {1.0, 2.0, 2.0, 3.0});
  const auto psi0 = polarized_state(4);
  const auto report = observable_report(psi0, spec, psi0);
  CHECK(report.mz_avg == Catch::Approx(1.0));
  CHECK(std::abs(report.mx_avg) < 1e-12);
  CHECK(report.energy == Catch::Approx(8.0).margin(1e-10));
  // midpoint pair for N=4 is (2,3)
  CHECK(report.czz_mid == report.czz[1]);
}

TEST_CASE("observable bound trivial cases") {
  std::mt19937_64 rng(263);
  const auto a = oracles::random_state(4, rng);
  const auto b = oracles::random_state(4, rng);
  const std::vector<Eigen::Matrix4cd> zero_blocks(6,
                                                  Eigen::Matrix4cd::Zero());
  const auto zero_check = check_observable_bound(a, b, zero_blocks);
  CHECK(zero_check.lhs == 0.0);
  CHECK(zero_check.rhs == 0.0);
  CHECK(zero_check.holds);

  std::vector<Eigen::Matrix4cd> blocks;
  for (int i = 0; i < 6; ++i) blocks.push_back(random_hermitian(rng));
  const auto same = check_observable_bound(a, a, blocks);
  CHECK(same.lhs < 1e-12);
  CHECK(same.holds);
}

TEST_CASE("observable bound rejects malformed blocks") {
  std::mt19937_64 rng(269);
  const auto a = oracles::random_state(3, rng);
  const auto b = oracles::random_state(3, rng);
  CHECK_THROWS_AS(
      check_observable_bound(a, b, std::vector<Eigen::Matrix4cd>(2)),
      std::invalid_argument);
  std::vector<Eigen::Matrix4cd> blocks(3, Eigen::Matrix4cd::Zero());
  blocks[1](0, 1) = cplx(1.0, 0.0);  // not Hermitian
  CHECK_THROWS_AS(check_observable_bound(a, b, blocks), std::invalid_argument);
}

TEST_CASE("observable bound holds on random circuits and observables") {
  std::mt19937_64 rng(271);
  const auto spec = HamiltonianSpec::lri(4, {1.0, 2.0, 2.0, 3.0});
  const auto psi0 = polarized_state(4);
  EvolutionConfig cfg;
  cfg.tau = 0.6;
  const auto target = exact_evolve(spec, psi0, cfg);
  for (int rep = 0; rep < 50; ++rep) {
    const auto dqs_state =
        run_circuit(psi0, random_circuit(4, 3, 3.0, rng));
    std::vector<Eigen::Matrix4cd> blocks;
    for (int i = 0; i < 6; ++i) blocks.push_back(random_hermitian(rng));
    const auto result = check_observable_bound(dqs_state, target, blocks);
    CHECK(result.holds);
  }
}
