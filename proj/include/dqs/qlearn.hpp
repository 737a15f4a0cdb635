#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dqs/models.hpp"
#include "dqs/neural_net.hpp"
#include "dqs/rewards.hpp"
#include "dqs/statevec.hpp"

// Modified deep Q-network over circuit steps: continuous actions chosen
// by projected Nesterov ascent on the network input, epsilon-scheduled
// Gaussian exploration, experience replay, and a periodically synchronized
// target network.

namespace dqs {

/// Raw agent output: 2N+1 components in [-1, 1]. Component 0 is the XX
/// knob; components 1.. hold (z, x) knob pairs for sites 1..N.
using ActionVector = std::vector<double>;

/// One-hot of the step index over n slots, concatenated with the previous
/// action (zeros at t = 0). The terminal state t = n carries no one-hot.
using EncodedState = std::vector<double>;

struct Transition {
  EncodedState state;
  ActionVector action;
  double reward = 0.0;
  EncodedState next_state;
  bool terminal = false;
  // bootstrap target memoized per target-network version
  double cached_target = 0.0;
  std::uint64_t cached_version = kNoVersion;

  static constexpr std::uint64_t kNoVersion = ~std::uint64_t{0};
};

struct TrainConfig {
  long episodes = 50000;
  int n_steps = 3;
  double eps_start = 1.0;
  double eps_end = 0.005;
  int ascent_restarts = 15;
  double ascent_momentum = 0.9;
  double ascent_lr = 0.6;
  int ascent_iters = 50;
  long target_sync_period = 50;
  double rescale_xx = 0.2;
  double rescale_single = 0.4;
  std::uint64_t seed = 1;
  RewardKind reward_kind = RewardKind::Local;
  double entropy_floor = kDefaultEntropyFloor;
  double adam_lr = 1e-3;
};

/// Exponential exploration schedule from eps_start at episode 0 down to
/// eps_end at the final episode.
inline double epsilon(long episode, const TrainConfig& cfg) {
  if (cfg.eps_start <= 0.0) return 0.0;
  if (cfg.episodes <= 0) return cfg.eps_end;
  const double fraction = double(episode) / double(cfg.episodes);
  return cfg.eps_start * std::pow(cfg.eps_end / cfg.eps_start, fraction);
}

/// Physical angles from a raw action: theta_xx = rescale_xx * a[0], then
/// (theta_z_j, theta_x_j) = rescale_single * (a[2j-1], a[2j]).
inline StepAngles rescale_action(const ActionVector& a, const TrainConfig& cfg,
                                 double gate_alpha) {
  if (a.size() < 3 || a.size() % 2 == 0) {
    throw std::invalid_argument("rescale_action: action length must be 2N+1");
  }
  const int n_sites = int(a.size() - 1) / 2;
  StepAngles step = StepAngles::zeros(n_sites, gate_alpha);
  step.theta_xx = cfg.rescale_xx * a[0];
  for (int j = 0; j < n_sites; ++j) {
    step.theta_z[j] = cfg.rescale_single * a[1 + 2 * j];
    step.theta_x[j] = cfg.rescale_single * a[2 + 2 * j];
  }
  return step;
}

/// The action whose rescaling reproduces `step`, clipped into the box.
inline ActionVector inverse_rescale_angles(const StepAngles& step,
                                           const TrainConfig& cfg) {
  const int n_sites = step.n_sites();
  ActionVector a(2 * n_sites + 1, 0.0);
  a[0] = std::clamp(step.theta_xx / cfg.rescale_xx, -1.0, 1.0);
  for (int j = 0; j < n_sites; ++j) {
    a[1 + 2 * j] = std::clamp(step.theta_z[j] / cfg.rescale_single, -1.0, 1.0);
    a[2 + 2 * j] = std::clamp(step.theta_x[j] / cfg.rescale_single, -1.0, 1.0);
  }
  return a;
}

inline EncodedState initial_encoded_state(int n_steps, int action_dim) {
  EncodedState s(std::size_t(n_steps) + action_dim, 0.0);
  s[0] = 1.0;
  return s;
}

/// State after taking action a at step t (0-based). Interior states carry
/// onehot(t+1); the terminal state t+1 = n has no one-hot slot.
inline EncodedState next_encoded_state(int n_steps, int t,
                                       const ActionVector& a) {
  EncodedState s(std::size_t(n_steps) + a.size(), 0.0);
  if (t + 1 < n_steps) s[std::size_t(t) + 1] = 1.0;
  std::copy(a.begin(), a.end(), s.begin() + n_steps);
  return s;
}

/// Ring buffer of episodes; eviction is oldest-first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity_episodes = 50)
      : capacity_(capacity_episodes) {}

  void push(std::vector<Transition> episode) {
    episodes_.push_back(std::move(episode));
    while (episodes_.size() > capacity_) episodes_.pop_front();
  }

  bool empty() const { return episodes_.empty(); }
  std::size_t episode_count() const { return episodes_.size(); }

  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& e : episodes_) n += e.size();
    return n;
  }

  /// Pointers to every stored transition, oldest episode first.
  std::vector<Transition*> all_transitions() {
    std::vector<Transition*> out;
    out.reserve(transition_count());
    for (auto& episode : episodes_) {
      for (auto& t : episode) out.push_back(&t);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::deque<std::vector<Transition>> episodes_;
};

/// Evaluator binding a Q network to a fixed encoded state; rows of the
/// action matrix are candidate actions. The state's contribution to the
/// first layer is folded in once, and workspace buffers are reused across
/// the ascent iterations.
class MlpActionEvaluator {
 public:
  MlpActionEvaluator(const Mlp& net, const EncodedState& state) : net_(net) {
    state_dim_ = int(state.size());
    action_dim_ = net.input_dim() - state_dim_;
    if (action_dim_ < 1) {
      throw std::invalid_argument("MlpActionEvaluator: state too wide");
    }
    Eigen::VectorXd s(state_dim_);
    for (int i = 0; i < state_dim_; ++i) s(i) = state[std::size_t(i)];
    const auto& first = net.layers().front();
    z1_state_ = first.weights.leftCols(state_dim_) * s + first.bias;
    const std::size_t depth = net.layers().size();
    zs_.resize(depth);
    as_.resize(depth);
  }

  int action_dim() const { return action_dim_; }

  void evaluate(const Eigen::MatrixXd& actions, Eigen::VectorXd& values,
                Eigen::MatrixXd& action_grads) const {
    forward_into(actions);
    const auto& layers = net_.layers();
    const std::size_t depth = layers.size();
    values = as_[depth - 1].col(0);
    detail::activate_grad_into(zs_[depth - 1], as_[depth - 1],
                               layers[depth - 1].act, delta_);
    for (std::size_t l = depth - 1; l > 0; --l) {
      back_.resize(actions.rows(), layers[l].weights.cols());
      back_.noalias() = delta_ * layers[l].weights;
      detail::backprop_through_activation(zs_[l - 1], as_[l - 1],
                                          layers[l - 1].act, back_, delta_);
    }
    action_grads.resize(actions.rows(), action_dim_);
    action_grads.noalias() =
        delta_ * layers.front().weights.rightCols(action_dim_);
  }

  Eigen::VectorXd values(const Eigen::MatrixXd& actions) const {
    forward_into(actions);
    return as_.back().col(0);
  }

 private:
  void forward_into(const Eigen::MatrixXd& actions) const {
    const auto& layers = net_.layers();
    const std::size_t depth = layers.size();
    zs_[0].resize(actions.rows(), z1_state_.size());
    zs_[0].noalias() =
        actions * layers.front().weights.rightCols(action_dim_).transpose();
    zs_[0].rowwise() += z1_state_.transpose();
    detail::activate_into(zs_[0], layers.front().act, as_[0]);
    for (std::size_t l = 1; l < depth; ++l) {
      zs_[l].resize(actions.rows(), layers[l].bias.size());
      zs_[l].noalias() = as_[l - 1] * layers[l].weights.transpose();
      zs_[l].rowwise() += layers[l].bias.transpose();
      detail::activate_into(zs_[l], layers[l].act, as_[l]);
    }
  }

  const Mlp& net_;
  int state_dim_ = 0;
  int action_dim_ = 0;
  Eigen::VectorXd z1_state_;
  mutable std::vector<Eigen::MatrixXd> zs_, as_;
  mutable Eigen::MatrixXd delta_, back_;
};

struct ArgmaxResult {
  ActionVector action;
  double value = 0.0;
};

/// argmax_a Q(s, a) over the box [-1, 1]^d by projected Nesterov ascent
/// from ascent_restarts uniform starts, run in one batch. Works with any
/// evaluator exposing action_dim/evaluate/values, so synthetic surfaces
/// are testable.
template <class Evaluator>
ArgmaxResult argmax_action_value(const Evaluator& q, const TrainConfig& cfg,
                                 std::mt19937_64& rng) {
  const int d = q.action_dim();
  const int restarts = cfg.ascent_restarts;
  if (d < 1 || restarts < 1) {
    throw std::invalid_argument("argmax_action: bad dimensions");
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd a(restarts, d);
  for (int r = 0; r < restarts; ++r) {
    for (int c = 0; c < d; ++c) a(r, c) = u(rng);
  }
  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(restarts, d);
  Eigen::MatrixXd lookahead(restarts, d);
  Eigen::VectorXd values;
  Eigen::MatrixXd grads;
  for (int it = 0; it < cfg.ascent_iters; ++it) {
    lookahead = a + cfg.ascent_momentum * velocity;
    q.evaluate(lookahead, values, grads);
    velocity = cfg.ascent_momentum * velocity + cfg.ascent_lr * grads;
    a = (a + velocity).cwiseMax(-1.0).cwiseMin(1.0);
  }
  values = q.values(a);
  Eigen::Index best_row = 0;
  values.maxCoeff(&best_row);
  ArgmaxResult result;
  result.value = values(best_row);
  result.action.resize(d);
  for (int c = 0; c < d; ++c) result.action[c] = a(best_row, c);
  return result;
}

inline ArgmaxResult argmax_action_value(const Mlp& net, const EncodedState& s,
                                        const TrainConfig& cfg,
                                        std::mt19937_64& rng) {
  return argmax_action_value(MlpActionEvaluator{net, s}, cfg, rng);
}

inline ActionVector argmax_action(const Mlp& net, const EncodedState& s,
                                  const TrainConfig& cfg,
                                  std::mt19937_64& rng) {
  return argmax_action_value(net, s, cfg, rng).action;
}

/// Fixed initial and target states of one training job; rewards are
/// computed against the precomputed target.
struct CircuitEnv {
  StateVector psi0;
  StateVector psi_target;
  double gate_alpha = 1.0;
  RewardKind reward_kind = RewardKind::Local;
  double entropy_floor = kDefaultEntropyFloor;

  int n_sites() const { return psi0.n_qubits(); }
  int action_dim() const { return 2 * n_sites() + 1; }

  CircuitParams to_circuit(const std::vector<ActionVector>& actions,
                           const TrainConfig& cfg) const {
    CircuitParams params;
    for (const auto& a : actions) {
      params.steps.push_back(rescale_action(a, cfg, gate_alpha));
    }
    return params;
  }

  double terminal_reward(const std::vector<ActionVector>& actions,
                         const TrainConfig& cfg) const {
    const StateVector psi = run_circuit(psi0, to_circuit(actions, cfg));
    return reward_value(reward_kind, psi, psi_target, entropy_floor);
  }
};

/// Entangler exponent used by the ansatz when none is configured: the
/// model's own alpha for the LRI chain, 1 for the Schwinger model.
inline double default_gate_alpha(const HamiltonianSpec& spec) {
  return spec.is_lri() ? spec.lri_params().alpha : 1.0;
}

inline CircuitEnv make_env(const HamiltonianSpec& spec, double tau,
                           const EvolutionConfig& evolution, double gate_alpha,
                           RewardKind kind, double entropy_floor) {
  EvolutionConfig evo = evolution;
  evo.tau = tau;
  CircuitEnv env{model_initial_state(spec), StateVector(spec.n_qubits),
                 gate_alpha, kind, entropy_floor};
  env.psi_target = exact_evolve(spec, env.psi0, evo);
  return env;
}

struct EpisodeResult {
  std::vector<Transition> transitions;
  std::vector<ActionVector> actions;
  double final_reward = 0.0;
};

/// One episode: argmax actions plus Gaussian exploration noise of
/// standard deviation epsilon/2, clipped into the box. Intermediate
/// rewards are 0; the terminal transition carries the circuit reward.
inline EpisodeResult run_episode(const CircuitEnv& env, const Mlp& behavior,
                                 const TrainConfig& cfg, long episode_index,
                                 std::mt19937_64& rng) {
  const int n = cfg.n_steps;
  const int d_a = env.action_dim();
  const double eps = epsilon(episode_index, cfg);
  std::normal_distribution<double> noise(0.0, 1.0);

  EpisodeResult result;
  EncodedState s = initial_encoded_state(n, d_a);
  for (int t = 0; t < n; ++t) {
    ActionVector a = argmax_action(behavior, s, cfg, rng);
    for (double& component : a) {
      component = std::clamp(component + 0.5 * eps * noise(rng), -1.0, 1.0);
    }
    EncodedState s_next = next_encoded_state(n, t, a);
    result.transitions.push_back(Transition{s, a, 0.0, s_next, t == n - 1});
    result.actions.push_back(std::move(a));
    s = std::move(s_next);
  }
  result.final_reward = env.terminal_reward(result.actions, cfg);
  result.transitions.back().reward = result.final_reward;
  return result;
}

/// One pass over the whole memory in shuffled order. Targets are
/// y = r for terminal transitions (no bootstrap past the horizon) and
/// y = r + max_a Q_target(s', a) otherwise, clamped to [0, 1]; one
/// backward + Adam step per transition.
///
/// When `target_version` is given, bootstrap targets are memoized on the
/// transition and reused until the version changes; the target network is
/// fixed between syncs, so only the stochastic restart noise differs.
inline void replay_sweep(Mlp& behavior, AdamState& adam, const Mlp& target_net,
                         ReplayMemory& memory, const TrainConfig& cfg,
                         std::mt19937_64& rng,
                         std::optional<std::uint64_t> target_version = {}) {
  if (memory.empty()) return;
  std::vector<Transition*> transitions = memory.all_transitions();
  std::shuffle(transitions.begin(), transitions.end(), rng);

  Eigen::VectorXd input(behavior.input_dim());
  for (Transition* tr : transitions) {
    double y;
    if (tr->terminal) {
      y = tr->reward;
    } else if (target_version && tr->cached_version == *target_version) {
      y = tr->cached_target;
    } else {
      const auto best =
          argmax_action_value(target_net, tr->next_state, cfg, rng);
      y = tr->reward + best.value;
      if (target_version) {
        tr->cached_target = y;
        tr->cached_version = *target_version;
      }
    }
    y = std::clamp(y, 0.0, 1.0);

    const std::size_t ns = tr->state.size();
    for (std::size_t i = 0; i < ns; ++i) input(Eigen::Index(i)) = tr->state[i];
    for (std::size_t i = 0; i < tr->action.size(); ++i) {
      input(Eigen::Index(ns + i)) = tr->action[i];
    }
    const auto back = behavior.backward(input, y);
    adam_step(behavior, adam, back.gradients);
  }
}

struct TrainJob {
  HamiltonianSpec spec;
  double tau = 1.0;
  double gate_alpha = 1.0;
  EvolutionConfig evolution;
  TrainConfig cfg;

  static TrainJob make(const HamiltonianSpec& spec, double tau,
                       TrainConfig cfg = {}) {
    TrainJob job{spec, tau, default_gate_alpha(spec), EvolutionConfig{}, cfg};
    job.evolution.method = default_method(spec.n_qubits);
    return job;
  }
};

struct TraceRow {
  double reward = 0.0;
  double best_reward = 0.0;
};

struct TrainResult {
  std::vector<ActionVector> best_actions;
  CircuitParams best_circuit;
  double best_reward = 0.0;
  std::vector<TraceRow> trace;
  Mlp behavior;
  AdamState adam;
  std::string rng_state;
};

using ProgressCallback =
    std::function<void(long episode, double reward, double best)>;

/// Full training run. The replay memory is seeded with one synthetic
/// episode: the inverse-rescaled Trotter angles (clipped into the box)
/// for the LRI model, a zero-action episode for the Schwinger model,
/// evaluated at its true terminal reward. The best-ever action sequence
/// is tracked across the seed episode and all training episodes.
inline TrainResult train(const TrainJob& job,
                         const ProgressCallback& progress = {}) {
  const TrainConfig& cfg = job.cfg;
  if (cfg.n_steps < 1) throw std::invalid_argument("train: n_steps must be >= 1");

  const CircuitEnv env = make_env(job.spec, job.tau, job.evolution,
                                  job.gate_alpha, cfg.reward_kind,
                                  cfg.entropy_floor);
  const int d_a = env.action_dim();
  const int input_dim = cfg.n_steps + 2 * d_a;

  std::mt19937_64 rng(cfg.seed);
  Mlp behavior = Mlp::make(
      {input_dim, 150, 40, 1},
      {Activation::Tanh, Activation::Relu, Activation::Sigmoid}, rng);
  AdamState adam = AdamState::init(behavior, cfg.adam_lr);
  Mlp target_net = behavior;
  std::uint64_t target_version = 0;

  ReplayMemory memory;

  // Seed episode.
  std::vector<ActionVector> seed_actions;
  if (job.spec.is_lri()) {
    const CircuitParams trotter =
        trotter_params(job.spec, job.tau, cfg.n_steps);
    for (const auto& step : trotter.steps) {
      seed_actions.push_back(inverse_rescale_angles(step, cfg));
    }
  } else {
    seed_actions.assign(cfg.n_steps, ActionVector(d_a, 0.0));
  }
  const double seed_reward = env.terminal_reward(seed_actions, cfg);
  {
    std::vector<Transition> seed_episode;
    EncodedState s = initial_encoded_state(cfg.n_steps, d_a);
    for (int t = 0; t < cfg.n_steps; ++t) {
      EncodedState s_next = next_encoded_state(cfg.n_steps, t, seed_actions[t]);
      seed_episode.push_back(Transition{s, seed_actions[t],
                                        t == cfg.n_steps - 1 ? seed_reward : 0.0,
                                        s_next, t == cfg.n_steps - 1});
      s = std::move(s_next);
    }
    memory.push(std::move(seed_episode));
  }

  TrainResult result;
  result.best_actions = seed_actions;
  result.best_reward = seed_reward;
  result.trace.reserve(std::size_t(std::max<long>(cfg.episodes, 0)));

  for (long e = 0; e < cfg.episodes; ++e) {
    EpisodeResult episode = run_episode(env, behavior, cfg, e, rng);
    memory.push(std::move(episode.transitions));
    if (episode.final_reward > result.best_reward) {
      result.best_reward = episode.final_reward;
      result.best_actions = episode.actions;
    }
    result.trace.push_back(TraceRow{episode.final_reward, result.best_reward});

    replay_sweep(behavior, adam, target_net, memory, cfg, rng, target_version);
    if ((e + 1) % cfg.target_sync_period == 0) {
      target_net = behavior;
      ++target_version;
    }
    if (progress) progress(e, episode.final_reward, result.best_reward);
  }

  result.best_circuit = env.to_circuit(result.best_actions, cfg);
  result.behavior = std::move(behavior);
  result.adam = std::move(adam);
  std::ostringstream rng_state;
  rng_state << rng;
  result.rng_state = rng_state.str();
  return result;
}

}  // namespace dqs
