// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "batchmc/nuts.hpp"
#include "batchmc/targets.hpp"
#include "support/nuts_recursive_reference.hpp"
#include "support/test_kernels.hpp"

using namespace batchmc;

namespace {

// Observer reconstructing, for chain 0, the candidate multiset the
// trajectory builder committed to (states of valid completed subtrees),
// plus memory and termination records.
class RecordingObserver : public NutsObserver<double> {
 public:
  void on_state_generated(Index depth, Index, const ChainState<double>& position,
                          const std::vector<Array<double>>&, const Array<double>& energy_change,
                          const Mask& integrating, const Mask& divergent) override {
    if (depth != current_depth_) {
      current_depth_ = depth;
      pending_.clear();
    }
    if (integrating[0] && !divergent[0]) {
      std::vector<double> flat;
      for (const auto& part : position.parts) {
        flat.insert(flat.end(), part.values().begin(), part.values().end());
      }
      pending_.push_back({std::move(flat), -energy_change[0]});
    }
  }

  void on_subtree_complete(Index, const Mask& active, const Mask& failed, const Mask&,
                           const Array<double>&) override {
    if (active[0] && !failed[0]) {
      candidates.insert(candidates.end(), pending_.begin(), pending_.end());
    }
    pending_.clear();
  }

  void on_finish(const Array<std::int64_t>&, const Array<std::int64_t>&,
                 Index checkpoint_pairs_peak) override {
    pairs_peak = checkpoint_pairs_peak;
  }

  std::vector<testing::RefCandidate> candidates;
  Index pairs_peak = 0;

 private:
  Index current_depth_ = -1;
  std::vector<testing::RefCandidate> pending_;
};

bool bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("nuts") {

TEST_CASE("has_u_turn basics and antithetic symmetry") {
  auto vec = [](double v) { return std::vector<Array<double>>{Array<double>::from_vector({v})}; };
  // 1-D: x- = 0, x+ = 1, p- = 1, p+ = 1: both dots positive, no U-turn.
  CHECK_FALSE(has_u_turn(vec(1.0), vec(1.0), vec(0.0), vec(1.0))[0]);
  // 1-D: p+ = -1: second dot negative, U-turn.
  CHECK(has_u_turn(vec(1.0), vec(-1.0), vec(0.0), vec(1.0))[0]);

  // Swapping endpoints and negating both momenta leaves the result unchanged.
  const RngKey key = make_key(808);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto draws = sample_standard_normal<double>(fold_in(key, t), {4, 3});
    std::vector<Array<double>> xp = {reshape(take_leading(draws, 0), {1, 3})};
    std::vector<Array<double>> pp = {reshape(take_leading(draws, 1), {1, 3})};
    std::vector<Array<double>> xm = {reshape(take_leading(draws, 2), {1, 3})};
    std::vector<Array<double>> pm = {reshape(take_leading(draws, 3), {1, 3})};
    const bool direct = has_u_turn(xp, pp, xm, pm)[0];
    std::vector<Array<double>> npp = {-pp[0]};
    std::vector<Array<double>> npm = {-pm[0]};
    const bool swapped = has_u_turn(xm, npm, xp, npp)[0];
    CHECK(direct == swapped);
  }
}

TEST_CASE("iterative builder matches the recursive oracle exhaustively") {
  // All 16 direction sequences of length 4 x 50 seeds x {1-D, 2-D} targets.
  // Step sizes are drawn wide enough to produce U-turns, divergences, and
  // depth caps; a third of the runs use a tight divergence threshold.
  auto t1 = make_std_normal<double>(1);
  auto t2 = make_correlated_gaussian<double>(0.7);
  Index outcome_counts[3] = {0, 0, 0};
  for (int target_id = 0; target_id < 2; ++target_id) {
    const Target<double>& target = target_id == 0 ? t1.target : t2.target;
    const Index dim = target_id == 0 ? 1 : 2;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      for (int dirbits = 0; dirbits < 16; ++dirbits) {
        const RngKey key = make_key(900 + seed * 37 + static_cast<std::uint64_t>(target_id));
        const auto keys = split(key, 4);
        const Shape ev = dim == 1 ? Shape{1} : Shape{1, dim};
        ChainState<double> state({sample_standard_normal<double>(keys[0], ev) * 1.5});
        const auto momentum = sample_momentum(state, keys[1]);
        const double u_eps = uniform_scalar<double>(keys[2]);
        const double eps = seed % 4 == 1 ? 0.01 + 0.05 * u_eps : 0.2 + 3.8 * u_eps;
        NutsConfig<double> config = nuts_config(eps, 4);
        if (seed % 3 == 0) config.max_energy_diff = 1.0;

        std::vector<bool> dirs;
        for (int d = 0; d < 4; ++d) dirs.push_back((dirbits >> d) & 1);

        // Iterative builder with injected directions and a recorder.
        RecordingObserver recorder;
        NutsControls<double> controls;
        controls.observer = &recorder;
        controls.direction_override = [&](Index depth) {
          return Mask(Shape{1}, dirs[static_cast<std::size_t>(depth)] ? 1 : 0);
        };
        const TlpAndGrads<double> initial = eval_tlp_with_grads(target, state);
        const auto traj = build_nuts_trajectory(target, state, momentum, initial, config,
                                                keys[3], &controls);

        // Reference recursive builder on identical inputs.
        const auto ref = testing::recursive_nuts_reference(target, state, momentum, dirs, config);

        REQUIRE(traj.depth_reached[0] == ref.depth_reached);
        REQUIRE(traj.stop_reason[0] == static_cast<std::int64_t>(ref.stop_reason));
        REQUIRE(traj.leapfrogs_taken[0] == ref.leapfrogs);

        // Candidate multiset: initial state plus all states of completed
        // subtrees, in generation order, weights bitwise.
        REQUIRE(recorder.candidates.size() + 1 == ref.candidates.size());
        CHECK(ref.candidates[0].log_weight == 0.0);
        for (std::size_t i = 0; i < recorder.candidates.size(); ++i) {
          const auto& got = recorder.candidates[i];
          const auto& want = ref.candidates[i + 1];
          REQUIRE(got.position.size() == want.position.size());
          for (std::size_t j = 0; j < got.position.size(); ++j) {
            REQUIRE(bits_equal(got.position[j], want.position[j]));
          }
          REQUIRE(bits_equal(got.log_weight, want.log_weight));
        }
        outcome_counts[static_cast<int>(ref.stop_reason)] += 1;
      }
    }
  }
  // The sweep must actually exercise all three stop reasons.
  CHECK(outcome_counts[0] > 0);  // depth cap
  CHECK(outcome_counts[1] > 0);  // U-turn
  CHECK(outcome_counts[2] > 0);  // divergence
}

TEST_CASE("depth-0 subtree is a single candidate with weight exp(-dH)") {
  auto t = make_std_normal<double>(1);
  ChainState<double> state({Array<double>::from_vector({0.4})});
  std::vector<Array<double>> momentum = {Array<double>::from_vector({0.7})};
  NutsConfig<double> config = nuts_config(0.3, 1);
  const auto ref = testing::recursive_nuts_reference(t.target, state, momentum, {true}, config);
  REQUIRE(ref.candidates.size() == 2);
  // Manually reproduce dH of the single leapfrog step.
  const auto initial = eval_tlp_with_grads(t.target, state);
  const auto lf = leapfrog_step(t.target, state, momentum, initial.grads,
                                {Array<double>::scalar(0.3)});
  const double h0 = hamiltonian_energy(initial.tlp, momentum)[0];
  const double dh = hamiltonian_energy(lf.tlp, lf.momentum)[0] - h0;
  CHECK(bits_equal(ref.candidates[1].log_weight, -dh));
}

TEST_CASE("forced divergence: huge step stops both builders at depth 0") {
  auto t = make_std_normal<double>(1);
  ChainState<double> state({Array<double>::from_vector({100.0})});
  std::vector<Array<double>> momentum = {Array<double>::from_vector({1.0})};
  NutsConfig<double> config = nuts_config(50.0, 4);
  const auto ref = testing::recursive_nuts_reference(t.target, state, momentum,
                                                     {true, true, true, true}, config);
  CHECK(ref.depth_reached == 0);
  CHECK(ref.stop_reason == NutsStopReason::divergence);

  NutsControls<double> controls;
  controls.direction_override = [](Index) { return Mask(Shape{1}, 1); };
  const auto initial = eval_tlp_with_grads(t.target, state);
  const auto traj = build_nuts_trajectory(t.target, state, momentum, initial, config,
                                          make_key(5), &controls);
  CHECK(traj.depth_reached[0] == 0);
  CHECK(traj.stop_reason[0] == static_cast<std::int64_t>(NutsStopReason::divergence));
  CHECK(traj.is_divergent[0]);
  // Candidate falls back to the initial state.
  CHECK(traj.state.parts[0][0] == 100.0);
}

TEST_CASE("max_tree_depth=1 reduces to one leapfrog plus a two-point multinomial choice") {
  auto t = make_std_normal<double>(1);
  ChainState<double> state({Array<double>::from_vector({0.9})});
  std::vector<Array<double>> momentum = {Array<double>::from_vector({-0.3})};
  NutsConfig<double> config = nuts_config(0.5, 1);
  const auto initial = eval_tlp_with_grads(t.target, state);
  const auto lf = leapfrog_step(t.target, state, momentum, initial.grads,
                                {Array<double>::scalar(0.5)});
  const double dh =
      hamiltonian_energy(lf.tlp, lf.momentum)[0] - hamiltonian_energy(initial.tlp, momentum)[0];
  const double p_move = std::exp(-dh) / (1.0 + std::exp(-dh));

  NutsControls<double> controls;
  controls.direction_override = [](Index) { return Mask(Shape{1}, 1); };
  Index moved = 0;
  const Index trials = 4000;
  for (Index i = 0; i < trials; ++i) {
    const auto traj = build_nuts_trajectory(t.target, state, momentum, initial, config,
                                            fold_in(make_key(31), static_cast<std::uint64_t>(i)),
                                            &controls);
    CHECK(traj.leapfrogs_taken[0] == 1);
    if (traj.state.parts[0][0] == lf.state.parts[0][0]) {
      ++moved;
    } else {
      CHECK(traj.state.parts[0][0] == 0.9);
    }
  }
  const double rate = static_cast<double>(moved) / static_cast<double>(trials);
  const double sigma = std::sqrt(p_move * (1 - p_move) / static_cast<double>(trials));
  CHECK(std::abs(rate - p_move) < 4.0 * sigma);
}

TEST_CASE("depth saturation on a near-flat target: full depth, bounded memory") {
  Target<double> flat;
  flat.log_prob_with_grads = [](const ChainState<double>& s) {
    TlpAndGrads<double> out;
    const auto& x = s.parts.at(0);
    out.tlp = dot_over_event_dims(x, x) * -1e-8;
    out.grads = {x * -2e-8};
    return out;
  };
  flat.log_prob = [fn = flat.log_prob_with_grads](const ChainState<double>& s) {
    return fn(s).tlp;
  };
  const Index mtd = 10;
  const Index chains = 3;
  testing::CountedTarget<double> counted(flat);

  class SaturationObserver : public NutsObserver<double> {
   public:
    void on_finish(const Array<std::int64_t>& depth_reached, const Array<std::int64_t>& reason,
                   Index pairs) override {
      depths = depth_reached;
      reasons = reason;
      pairs_peak = pairs;
    }
    Array<std::int64_t> depths, reasons;
    Index pairs_peak = 0;
  };
  auto observer = std::make_shared<SaturationObserver>();
  auto controls = std::make_shared<NutsControls<double>>();
  controls->observer = observer.get();

  NoUTurnSampler<double> kernel(counted.target, nuts_config(1e-3, mtd),
                                std::move(controls));
  ChainState<double> state({sample_standard_normal<double>(make_key(60), {chains})});
  const auto boot = kernel.bootstrap_results(state);
  const long calls_before = counted.calls->load();
  auto [next, results] = kernel.one_step(state, boot, make_key(61));

  for (Index c = 0; c < chains; ++c) {
    CHECK(results.int_at("depth_reached")[c] == mtd);
    CHECK(results.int_at("leapfrogs_taken")[c] == (Index(1) << mtd) - 1);
    CHECK(observer->reasons[c] == static_cast<std::int64_t>(NutsStopReason::depth_cap));
  }
  // O(max_tree_depth) trajectory storage: checkpoint slots + 2 endpoints.
  CHECK(observer->pairs_peak <= mtd + 2);

  // Operation-count uniformity: the batched step ran exactly the leapfrog
  // gradient evaluations of the longest-running chain, shared by every chain.
  const long evals = counted.calls->load() - calls_before;
  CHECK(evals == (long(1) << mtd) - 1);
}

TEST_CASE("terminated chains freeze while others keep expanding") {
  auto t = make_std_normal<double>(1);
  // Chain 0 diverges immediately (absurd step size); chain 1 integrates.
  NutsConfig<double> config;
  config.step_size = {Array<double>::from_vector({1e8, 0.05})};
  config.max_tree_depth = 6;

  class FreezeObserver : public NutsObserver<double> {
   public:
    void on_state_generated(Index depth, Index, const ChainState<double>&,
                            const std::vector<Array<double>>&, const Array<double>&,
                            const Mask& integrating, const Mask&) override {
      if (depth > 0 && integrating[0]) chain0_worked_after_depth0 = true;
      if (depth > 0 && integrating[1]) chain1_worked_after_depth0 = true;
    }
    bool chain0_worked_after_depth0 = false;
    bool chain1_worked_after_depth0 = false;
  };
  auto observer = std::make_shared<FreezeObserver>();
  auto controls = std::make_shared<NutsControls<double>>();
  controls->observer = observer.get();
  NoUTurnSampler<double> kernel(t.target, config, std::move(controls));

  ChainState<double> state({Array<double>::from_vector({0.5, -0.25})});
  const auto boot = kernel.bootstrap_results(state);
  auto [next, results] = kernel.one_step(state, boot, make_key(71));

  CHECK(results.mask_at("is_divergent")[0]);
  CHECK(results.int_at("depth_reached")[0] == 0);
  // Frozen: the diverged chain keeps its pre-step state bitwise.
  CHECK(bits_equal(next.parts[0][0], 0.5));
  CHECK_FALSE(observer->chain0_worked_after_depth0);
  CHECK(observer->chain1_worked_after_depth0);
  CHECK_FALSE(results.mask_at("is_divergent")[1]);
  CHECK(results.int_at("depth_reached")[1] > 0);
}

TEST_CASE("standard normal sampling: pooled moments over 64 chains") {
  auto t = make_std_normal<double>(1);
  auto kernel = nuts_kernel(t.target, nuts_config(0.3, 10));
  const Index chains = 64;
  ChainState<double> state({sample_standard_normal<double>(make_key(80), {chains})});
  auto results = kernel->bootstrap_results(state);
  const Index burnin = 200;
  const Index draws = 5000;
  double sum = 0, sum_sq = 0;
  const RngKey key = make_key(81);
  for (Index step = 0; step < burnin + draws; ++step) {
    auto [next, r] = kernel->one_step(state, results, fold_in(key, static_cast<std::uint64_t>(step)));
    state = next;
    results = std::move(r);
    if (step >= burnin) {
      for (Index c = 0; c < chains; ++c) {
        sum += state.parts[0][c];
        sum_sq += state.parts[0][c] * state.parts[0][c];
      }
    }
  }
  const double n = static_cast<double>(draws * chains);
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("nuts passes the generic kernel contract at C=7") {
  auto t = make_correlated_gaussian<double>(0.5);
  auto kernel = nuts_kernel(t.target, nuts_config(0.4, 5));
  ChainState<double> state({sample_standard_normal<double>(make_key(90), {7, 2})});
  testing::check_kernel_contract(*kernel, state, make_key(91));
}

TEST_CASE("float32 nuts smoke") {
  auto t = make_std_normal<float>(1);
  auto kernel = nuts_kernel<float>(t.target, nuts_config(0.3f, 6));
  const Index chains = 16;
  ChainState<float> state({Array<float>(Shape{chains}, 0.0f)});
  auto results = kernel->bootstrap_results(state);
  double sum = 0.0, sum_sq = 0.0;
  const Index draws = 2000;
  const RngKey key = make_key(95);
  for (Index step = 0; step < draws; ++step) {
    auto [next, r] = kernel->one_step(state, results, fold_in(key, static_cast<std::uint64_t>(step)));
    state = next;
    results = std::move(r);
    for (Index c = 0; c < chains; ++c) {
      sum += state.parts[0][c];
      sum_sq += static_cast<double>(state.parts[0][c]) * state.parts[0][c];
    }
  }
  const double n = static_cast<double>(draws * chains);
  CHECK(std::abs(sum / n) < 0.1);
  CHECK(sum_sq / n == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("config validation") {
  auto t = make_std_normal<double>(1);
  CHECK_THROWS_AS(NoUTurnSampler<double>(t.target, nuts_config(0.3, 0)), ArgumentError);
  NutsConfig<double> bad = nuts_config(0.3, 4);
  bad.max_energy_diff = 0.0;
  CHECK_THROWS_AS(NoUTurnSampler<double>(t.target, bad), ArgumentError);
  NutsConfig<double> neg;
  neg.step_size = {Array<double>::scalar(-0.1)};
  NoUTurnSampler<double> kernel(t.target, neg);
  ChainState<double> state({Array<double>(Shape{2})});
  CHECK_THROWS_AS((void)kernel.bootstrap_results(state), ArgumentError);
}

}  // TEST_SUITE
