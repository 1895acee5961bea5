#include <gtest/gtest.h>

#include <iostream>

#include "test_util.hpp"

using namespace versabo;
using namespace versabo::testing;

namespace {

Sampler toy_sampler(const Model& model, const PosteriorHandle& h) {
  return [&model, h](const Input& x, std::size_t m, Seed s) { return model.predictive_draws(h, x, m, s); };
}

}  // namespace

TEST(SearchBox, NormalizeClipContains) {
  const SearchBox box({{-1.0, 1.0}, {0.0, 4.0}});
  const auto u = box.normalize(std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(u[0], 0.5);
  EXPECT_DOUBLE_EQ(u[1], 0.25);
  EXPECT_EQ(box.clip({3.0, -2.0}), (Input{1.0, 0.0}));
  EXPECT_TRUE(box.contains(Input{0.0, 4.0}));
  EXPECT_FALSE(box.contains(Input{0.0, 4.1}));
  EXPECT_THROW(SearchBox({{1.0, 1.0}}), Error);
}

TEST(FidelitySchedule, Validation) {
  FidelitySchedule s;
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.top(), 1000u);
  s.fidelities = {10, 10};
  EXPECT_THROW(s.validate(), Error);
  s.fidelities = {};
  EXPECT_THROW(s.validate(), Error);
}

TEST(EmpiricalQuantile, Type7) {
  EXPECT_DOUBLE_EQ(empirical_quantile({4, 1, 3, 2, 5}, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(empirical_quantile({1, 2, 3, 4, 5}, 0.1), 1.4);
  EXPECT_DOUBLE_EQ(empirical_quantile({7}, 0.3), 7.0);
}

TEST(AtFidelity, RescalesQuantileTradeoff) {
  const Acquisition acq{AcqType::ucb, EmpiricalQuantile{101.0}, 1000};
  const auto a = at_fidelity(acq, 10, 1000);
  EXPECT_EQ(a.fidelity, 10u);
  EXPECT_NEAR(std::get<EmpiricalQuantile>(a.lcb).b, 101.0 * 11.0 / 1001.0, 1e-12);
}

TEST(AcqMinState, NonIncreasing) {
  AcqMinState s;
  double prev = s.value();
  for (double v : {3.0, 5.0, -1.0, 2.0, -4.0, 0.0}) {
    s.offer(v);
    EXPECT_LE(s.value(), prev);
    prev = s.value();
  }
  EXPECT_EQ(s.value(), -4.0);
}

TEST(Bootstrap, LcbFallsBelowPointEstimate) {
  const GaussianToyModel model(0.0, 1.0);
  const auto h = model.infer(Dataset{}, Seed{0});
  const Acquisition acq{AcqType::pi, ParametricLcb{}, 100};
  int below = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto d = model.predictive_draws(h, Input{0.0}, 100, derive_seed(Seed{5}, {std::uint64_t(r)}));
    const double point = minimized_reduce(acq, d.objectives, 0.0);
    const double lcb = bootstrap_lcb(d.objectives, acq, 200, 0.1, 0.0, derive_seed(Seed{6}, {std::uint64_t(r)}));
    below += lcb < point ? 1 : 0;
  }
  std::cout << "bootstrap LCB below point estimate: " << below << "/" << reps << "\n";
  EXPECT_GE(below, 170);
}

TEST(AcqMf, NearOptimumCostsBothLevels) {
  const GaussianToyModel model(0.0, 1.0);
  const auto h = model.infer(Dataset{}, Seed{0});
  FidelitySchedule s;
  s.fidelities = {10, 1000};
  const Acquisition acq{AcqType::ei, ParametricLcb{}, 1000};
  AcqMinState state;
  state.reset(1e9);  // every LCB is <= a_min
  const auto r = acq_mf(Input{0.0}, toy_sampler(model, h), acq, s, state, 0.0, Seed{1});
  EXPECT_EQ(r.gen_calls, 1010u);
  EXPECT_EQ(r.post_calls, 1010u);
  EXPECT_EQ(r.fidelity_used, 1000u);
}

TEST(AcqMf, FarFromOptimumCostsFirstLevel) {
  const GaussianToyModel model(0.0, 1.0);
  const auto h = model.infer(Dataset{}, Seed{0});
  FidelitySchedule s;
  s.fidelities = {10, 1000};
  const Acquisition acq{AcqType::ei, ParametricLcb{}, 1000};
  AcqMinState state;
  state.reset(-1e9);  // every LCB exceeds a_min
  const auto r = acq_mf(Input{0.0}, toy_sampler(model, h), acq, s, state, 0.0, Seed{1});
  EXPECT_EQ(r.gen_calls, 10u);
  EXPECT_EQ(r.fidelity_used, 10u);
}

TEST(AcqMf, ThreeLevelsStopAtFirstExceedingLevel) {
  // a_min between the level-1 and level-2 bootstrap bounds of a rigged surface
  const auto sampler = [](const Input&, std::size_t m, Seed) {
    DrawBatch d;
    d.objectives.assign(m, m == 10 ? -1.0 : 1.0);  // EI per draw: 1 at level 1, 0 after
    d.calls.gen = m;
    return d;
  };
  FidelitySchedule s;
  s.fidelities = {10, 100, 1000};
  const Acquisition acq{AcqType::ei, ParametricLcb{}, 1000};
  AcqMinState state;
  state.reset(-0.5);
  const auto r = acq_mf(Input{0.0}, sampler, acq, s, state, 0.0, Seed{1});
  EXPECT_EQ(r.gen_calls, 110u);
  EXPECT_EQ(r.fidelity_used, 100u);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(state.value(), -0.5);
}

TEST(Optimizer, QuadraticRecovery) {
  const SearchBox box({{0.0, 1.0}});
  OptimizerConfig cfg;
  cfg.budget = 10000;
  const AcqFn acq = [](const Input& x, std::size_t) { return AcqEvalRecord{(x[0] - 0.3) * (x[0] - 0.3), 0, 0, 0}; };
  int hits = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto r = optimize_acq(acq, box, cfg, Seed{s});
    hits += std::abs(r.best[0] - 0.3) <= 0.02 ? 1 : 0;
  }
  std::cout << "optimizer within 0.02: " << hits << "/100\n";
  EXPECT_GE(hits, 95);
}

TEST(Optimizer, SkipsFailuresAndThrowsWhenAllFail) {
  const SearchBox box({{0.0, 1.0}});
  OptimizerConfig cfg;
  cfg.budget = 50;
  const AcqFn half = [](const Input& x, std::size_t) {
    if (x[0] < 0.5) throw Error("boom");
    return AcqEvalRecord{x[0], 1, 1, 1};
  };
  const auto r = optimize_acq(half, box, cfg, Seed{1});
  EXPECT_GT(r.failures, 0u);
  EXPECT_GE(r.best[0], 0.5);
  const AcqFn none = [](const Input&, std::size_t) -> AcqEvalRecord { throw Error("boom"); };
  EXPECT_THROW(optimize_acq(none, box, cfg, Seed{1}), AcquisitionFailure);
}

TEST(Optimizer, Deterministic) {
  const SearchBox box = SearchBox::cube(3, -2.0, 2.0);
  const AcqFn acq = [](const Input& x, std::size_t) {
    return AcqEvalRecord{std::sin(3 * x[0]) + x[1] * x[1] + std::cos(x[2]), 0, 0, 0};
  };
  const auto a = optimize_acq(acq, box, {}, Seed{9});
  const auto b = optimize_acq(acq, box, {}, Seed{9});
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.value, b.value);
}
