// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "batchmc/hmc.hpp"
#include "batchmc/kernel.hpp"
#include "batchmc/metropolis.hpp"
#include "batchmc/results.hpp"
#include "batchmc/state.hpp"
#include "batchmc/targets.hpp"
#include "support/test_kernels.hpp"

using namespace batchmc;

TEST_SUITE("kernel-api") {

TEST_CASE("results trees: paths, fields, and error messages name the leaf") {
  auto tree = Results<double>::record({
      {"log_accept_ratio", Results<double>::leaf(Array<double>::from_vector({0.5}))},
      {"inner_results",
       Results<double>::record({
           {"step_size", Results<double>::leaf_list({Array<double>::scalar(1.5)})},
       })},
  });

  CHECK(tree.leaf_at<double>("log_accept_ratio")[0] == 0.5);
  CHECK(tree.leaf_at<double>("inner_results/step_size/0")[0] == 1.5);

  CHECK_THROWS_WITH_AS((void)tree.at("inner_results/missing"),
                       doctest::Contains("inner_results/missing"), ContractError);
  CHECK_THROWS_AS((void)tree.leaf_at<std::int64_t>("log_accept_ratio"), ContractError);
}

TEST_CASE("structure_mismatch reports the first offending path") {
  auto a = Results<double>::record({
      {"x", Results<double>::leaf(Array<double>::scalar(1.0))},
      {"nested", Results<double>::record({{"flag", Results<double>::leaf(Mask(Shape{2}))}})},
  });
  auto b = Results<double>::record({
      {"x", Results<double>::leaf(Array<double>::scalar(2.0))},
      {"nested",
       Results<double>::record({{"flag", Results<double>::leaf(Array<double>(Shape{2}))}})},
  });
  CHECK_FALSE(structure_mismatch(a, a).has_value());
  auto m = structure_mismatch(a, b);
  REQUIRE(m.has_value());
  CHECK(m->find("nested/flag") != std::string::npos);

  // Shapes may differ without breaking structure.
  auto c = Results<double>::record({
      {"x", Results<double>::leaf(Array<double>(Shape{7}))},
      {"nested", Results<double>::record({{"flag", Results<double>::leaf(Mask(Shape{5}))}})},
  });
  CHECK_FALSE(structure_mismatch(a, c).has_value());
}

TEST_CASE("select_results picks per-chain subtrees elementwise") {
  const Mask accept = Mask::from_data({2}, {1, 0});
  auto on_true = Results<double>::record({
      {"v", Results<double>::leaf(Array<double>::from_data({2, 2}, {1, 2, 3, 4}))},
      {"n", Results<double>::leaf(Array<std::int64_t>::from_data({2}, {10, 20}))},
  });
  auto on_false = Results<double>::record({
      {"v", Results<double>::leaf(Array<double>::from_data({2, 2}, {5, 6, 7, 8}))},
      {"n", Results<double>::leaf(Array<std::int64_t>::from_data({2}, {30, 40}))},
  });
  auto picked = select_results(accept, on_true, on_false);
  CHECK(picked.leaf_at<double>("v").at({0, 1}) == 2.0);
  CHECK(picked.leaf_at<double>("v").at({1, 1}) == 8.0);
  CHECK(picked.leaf_at<std::int64_t>("n")[0] == 10);
  CHECK(picked.leaf_at<std::int64_t>("n")[1] == 40);
}

TEST_CASE("chain state validation") {
  ChainState<double> ok({Array<double>(Shape{3}), Array<double>(Shape{3, 2})});
  validate_chain_state(ok);
  CHECK(ok.num_chains() == 3);

  ChainState<double> mismatched({Array<double>(Shape{3}), Array<double>(Shape{4})});
  CHECK_THROWS_AS(validate_chain_state(mismatched), ShapeError);

  ChainState<double> rank0({Array<double>::scalar(1.0)});
  CHECK_THROWS_AS(validate_chain_state(rank0), ShapeError);

  ChainState<double> with_nan({Array<double>::from_vector({1.0, std::nan("")})});
  CHECK_THROWS_AS(check_no_nan(with_nan), ArgumentError);
}

TEST_CASE("eval_tlp enforces batch semantics") {
  Target<double> bad;
  bad.log_prob = [](const ChainState<double>& s) {
    return Array<double>::scalar(sum_all(s.parts[0]));  // reduces over chains
  };
  ChainState<double> state({Array<double>(Shape{3}, 1.0)});
  CHECK_THROWS_AS((void)eval_tlp(bad, state), ShapeError);
}

TEST_CASE("finite-difference gradients match analytic gradients of shipped targets") {
  const RngKey key = make_key(99);
  auto check_target = [&](BuiltinTarget<double> t, const RngKey& k) {
    ChainState<double> state = initial_state(t, 5);
    // random strictly-interior positions
    for (auto& part : state.parts) {
      auto z = sample_standard_normal<double>(k, part.shape());
      part = t.name == "coin_flip_posterior" ? (Array<double>(part.shape(), 0.5) + z * 0.05)
                                             : z;
    }
    Target<double> no_grads;
    no_grads.log_prob = t.target.log_prob;
    const auto fd = eval_tlp_with_grads(no_grads, state);
    const auto analytic = eval_tlp_with_grads(t.target, state);
    for (std::size_t p = 0; p < fd.grads.size(); ++p) {
      for (Index i = 0; i < fd.grads[p].size(); ++i) {
        const double denom = std::max(1.0, std::abs(analytic.grads[p][i]));
        CHECK(std::abs(fd.grads[p][i] - analytic.grads[p][i]) / denom < 1e-6);
      }
    }
  };
  const auto keys = split(key, 6);
  check_target(make_std_normal<double>(3), keys[0]);
  check_target(make_mvn_diag<double>({1.0, -2.0}, {0.5, 3.0}), keys[1]);
  check_target(make_correlated_gaussian<double>(0.9), keys[2]);
  check_target(make_ill_conditioned_gaussian<double>(100.0, 4), keys[3]);
  check_target(make_bimodal_mixture<double>(8.0, 2), keys[4]);
  check_target(make_coin_flip_posterior<double>(7, 10), keys[5]);
}

TEST_CASE("identity kernel: empty record bootstrap, state unchanged for any key") {
  testing::IdentityKernel<double> kernel;
  ChainState<double> state({Array<double>::from_vector({1.0, 2.0, 3.0})});
  const auto boot = kernel.bootstrap_results(state);
  CHECK(boot.is_record());
  CHECK(boot.fields().empty());
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto [next, results] = kernel.one_step(state, boot, make_key(s));
    CHECK(states_bitwise_equal(next, state));
  }
}

TEST_CASE("HMC bootstrap caches the TLP: zeros state gives tlp [0, 0]") {
  auto t = make_std_normal<double>(3);
  UncalibratedHmc<double> kernel(t.target, hmc_config(0.5, 2));
  ChainState<double> state({Array<double>(Shape{2, 3}, 0.0)});
  const auto boot = kernel.bootstrap_results(state);
  const auto& tlp = boot.leaf_at<double>("target_log_prob");
  REQUIRE(tlp.shape() == Shape{2});
  CHECK(tlp[0] == 0.0);
  CHECK(tlp[1] == 0.0);
}

TEST_CASE("generic contract suite: identity, counting, MH-RWM, MH-HMC at C=7") {
  const RngKey key = make_key(1234);
  auto t = make_std_normal<double>(2);
  ChainState<double> state({sample_standard_normal<double>(key, {7, 2})});

  testing::IdentityKernel<double> identity;
  testing::check_kernel_contract(identity, state, split(key, 4)[0]);

  testing::CountingKernel<double> counting;
  testing::check_kernel_contract(counting, state, split(key, 4)[1]);

  auto rwm = random_walk_metropolis_kernel(t.target, 0.7);
  testing::check_kernel_contract(*rwm, state, split(key, 4)[2]);

  auto hmc = hmc_kernel(t.target, 0.4, 3);
  testing::check_kernel_contract(*hmc, state, split(key, 4)[3]);
}

TEST_CASE("batched == looped: RWM and HMC advance each chain from its own substream") {
  // Joint advance of C chains, then a manual single-chain replay of chain c
  // using the published key schedules; row c must match bitwise.
  const RngKey key = make_key(77177);
  auto t = make_std_normal<double>(2);
  const Index chains = 5;
  ChainState<double> state({sample_standard_normal<double>(fold_in(key, 1), {chains, 2})});

  SUBCASE("random walk metropolis") {
    auto kernel = random_walk_metropolis_kernel(t.target, 0.8);
    const auto boot = kernel->bootstrap_results(state);
    const auto [next, results] = kernel->one_step(state, boot, key);

    const auto [inner_key, accept_key] = mh_site_keys(key);
    const auto part_keys = split(inner_key, 1);
    const auto noise_keys = split(part_keys[0], chains);
    const auto accept_keys = split(accept_key, chains);
    for (Index c = 0; c < chains; ++c) {
      ChainState<double> one({Array<double>::from_data({1, 2},
                                                       {state.parts[0].at({c, 0}),
                                                        state.parts[0].at({c, 1})})});
      const auto eps = sample_standard_normal<double>(noise_keys[c], {2});
      ChainState<double> proposed = one;
      proposed.parts[0] = one.parts[0] + Array<double>::scalar(0.8) * reshape(eps, {1, 2});
      const double log_r = eval_tlp(t.target, proposed)[0] - eval_tlp(t.target, one)[0];
      const double u = uniform_scalar<double>(accept_keys[c]);
      const bool accept = std::log(u) < std::min(0.0, log_r);
      for (Index d = 0; d < 2; ++d) {
        const double expected = accept ? proposed.parts[0][d] : one.parts[0][d];
        CHECK(next.parts[0].at({c, d}) == expected);
      }
    }
  }

  SUBCASE("hmc") {
    const double step = 0.37;
    const Index leapfrog_steps = 3;
    auto kernel = hmc_kernel(t.target, step, leapfrog_steps);
    const auto boot = kernel->bootstrap_results(state);
    const auto [next, results] = kernel->one_step(state, boot, key);

    const auto [inner_key, accept_key] = mh_site_keys(key);
    const auto part_keys = split(inner_key, 1);
    const auto momentum_keys = split(part_keys[0], chains);
    const auto accept_keys = split(accept_key, chains);
    for (Index c = 0; c < chains; ++c) {
      ChainState<double> one({Array<double>::from_data({1, 2},
                                                       {state.parts[0].at({c, 0}),
                                                        state.parts[0].at({c, 1})})});
      const auto p0 = sample_standard_normal<double>(momentum_keys[c], {2});
      std::vector<Array<double>> momentum = {reshape(p0, {1, 2})};
      const auto lf = leapfrog(t.target, one, momentum, hmc_config(step, leapfrog_steps));
      const double correction =
          kinetic_energy(momentum)[0] - kinetic_energy(lf.momentum)[0];
      const double current_tlp = eval_tlp(t.target, one)[0];
      const double log_r = lf.tlp[0] - current_tlp + correction;
      const double u = uniform_scalar<double>(accept_keys[c]);
      const bool accept = std::log(u) < std::min(0.0, log_r);
      for (Index d = 0; d < 2; ++d) {
        const double expected = accept ? lf.state.parts[0][d] : one.parts[0][d];
        CHECK(next.parts[0].at({c, d}) == expected);
      }
    }
  }
}

}  // TEST_SUITE
