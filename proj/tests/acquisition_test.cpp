#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace versabo;
using namespace versabo::testing;

namespace {

/// post/gen closures over a fixed list of objective values: the m-th draw
/// returns values[m - 1] regardless of the seed content.
struct ListSource {
  std::vector<double> values;
  mutable std::size_t next = 0;

  auto post() const {
    return [this](Seed) { return LatentSample::from_values({{"i", {double(next++ % values.size())}}}); };
  }
  auto gen() const {
    return [this](const Input&, const LatentSample& z, Seed) {
      return Observation{values[static_cast<std::size_t>(z.as<NamedLatent>().scalar("i"))], {}};
    };
  }
};

struct ToyClosures {
  GaussianToyModel model;
  PosteriorHandle handle;
  explicit ToyClosures(double mu = 0.0, double sigma = 1.0) : model(mu, sigma), handle(model.infer(Dataset{}, Seed{0})) {}
  auto post() const {
    return [this](Seed s) { return model.post(handle, s); };
  }
  auto gen() const {
    return [this](const Input& x, const LatentSample& z, Seed s) { return model.gen(x, z, s); };
  }
};

}  // namespace

TEST(AcqEi, Fixtures) {
  ListSource src{{-1.0, 2.0, 3.0}};
  EXPECT_EQ(acq_ei(Input{0.0}, src.post(), src.gen(), 0.0, 3, Seed{1}).value, 1.0);
  ListSource above{{1.0, 2.0}};
  EXPECT_EQ(acq_ei(Input{0.0}, above.post(), above.gen(), 0.0, 2, Seed{1}).value, 0.0);
  EXPECT_THROW(acq_ei(Input{0.0}, src.post(), src.gen(), std::nan(""), 3, Seed{1}), Error);
}

TEST(AcqPi, Fixtures) {
  ListSource src{{-1.0, 2.0, 3.0}};
  EXPECT_EQ(acq_pi(Input{0.0}, src.post(), src.gen(), 0.0, 3, Seed{1}).value, 1.0);
  ListSource above{{1.0, 2.0}};
  EXPECT_EQ(acq_pi(Input{0.0}, above.post(), above.gen(), 0.0, 2, Seed{1}).value, 0.0);
  const std::vector<double> below(17, -3.0);
  EXPECT_EQ(lambda_reduce(Acquisition{AcqType::pi}, below, 0.0), 17.0);
}

TEST(AcqUcb, LcbFixtures) {
  const std::vector<double> v{1, 2, 3, 4, 5};
  EXPECT_EQ(lcb_empirical_quantile(v, 2.0), 2.0);
  EXPECT_EQ(lcb_empirical_quantile(v, 2.5), 2.5);
  EXPECT_EQ(lcb_empirical_quantile(std::vector<double>{1, 2, 3}, 0.5), 1.0);
  EXPECT_EQ(lcb_empirical_quantile(std::vector<double>{1, 2, 3}, 4.0), 3.0);
  // mean 1, unbiased sample variance 4
  const std::vector<double> p{-1.0, 1.0, 3.0};
  EXPECT_EQ(lcb_parametric(p, 0.5), -1.0);
  EXPECT_EQ(lcb_parametric(std::vector<double>{2.5, 2.5, 2.5}, 3.0), 2.5);
  EXPECT_NEAR(lcb_parametric(p, 1e-12), 1.0, 1e-10);
  EXPECT_EQ(lcb_parametric(p, 0.5, true), 0.0);
  EXPECT_THROW(lcb_parametric(std::vector<double>{1.0}, 1.0), Error);
  EXPECT_THROW(lcb_empirical_quantile(std::vector<double>{}, 1.0), Error);
}

TEST(AcqUcb, ThroughPostGen) {
  ListSource src{{5.0, 1.0, 4.0, 2.0, 3.0}};
  const auto r = acq_ucb(Input{0.0}, src.post(), src.gen(), EmpiricalQuantile{2.0}, 5, Seed{1});
  EXPECT_EQ(r.value, 2.0);
  EXPECT_EQ(r.post_calls, 5u);
  EXPECT_EQ(r.gen_calls, 5u);
}

TEST(AcqTs, ConstantGen) {
  const auto post = [](Seed) { return LatentSample::from_values({{"c", {1.5}}}); };
  const auto gen = [](const Input&, const LatentSample& z, Seed) {
    return Observation{z.as<NamedLatent>().scalar("c"), {}};
  };
  const auto r = acq_ts(Input{0.0}, post, gen, 40, Seed{1}, Seed{2});
  EXPECT_EQ(r.value, 40 * 1.5);
  EXPECT_EQ(r.post_calls, 1u);
  EXPECT_EQ(r.gen_calls, 40u);
}

TEST(AcqTs, LawOfLargeNumbers) {
  const ToyClosures toy(2.0, 1.0);
  const std::size_t m = 100000;
  const auto r = acq_ts(Input{0.0}, toy.post(), toy.gen(), m, Seed{11}, Seed{12});
  EXPECT_NEAR(r.value / double(m), 2.0, 3.0 / std::sqrt(double(m)));
}

TEST(AcqEi, GaussianOracle) {
  const ToyClosures toy;
  const std::size_t m = 100000;
  const double ei = std_normal_pdf(0.0);
  // per-draw improvement max(0, -Y) has variance E[Y^2; Y<0] - ei^2 = 0.5 - ei^2
  const double se = std::sqrt((0.5 - ei * ei) / double(m));
  const double v = acq_ei(Input{0.0}, toy.post(), toy.gen(), 0.0, m, Seed{77}).value / double(m);
  EXPECT_NEAR(v, ei, 3.0 * se);
}

TEST(AcqPi, GaussianOracle) {
  const ToyClosures toy;
  const std::size_t m = 100000;
  const double se = std::sqrt(0.25 / double(m));
  const double v = acq_pi(Input{0.0}, toy.post(), toy.gen(), 0.0, m, Seed{78}).value / double(m);
  EXPECT_NEAR(v, 0.5, 3.0 * se);
}

TEST(Acquisition, CallAccounting) {
  const ToyClosures toy;
  for (auto t : {AcqType::ei, AcqType::pi, AcqType::ucb}) {
    Acquisition acq{t, ParametricLcb{1.0}, 25};
    const DrawSource src{&toy.model, toy.handle, objective_of, Seed{3}};
    const auto r = evaluate_acquisition(src, acq, Input{0.0}, 0.0, Seed{4});
    EXPECT_EQ(r.post_calls, 25u);
    EXPECT_EQ(r.gen_calls, 25u);
  }
  Acquisition ts{AcqType::ts, ParametricLcb{}, 25};
  const DrawSource src{&toy.model, toy.handle, objective_of, Seed{3}};
  const auto r = evaluate_acquisition(src, ts, Input{0.0}, 0.0, Seed{4});
  EXPECT_EQ(r.post_calls, 1u);
  EXPECT_EQ(r.gen_calls, 25u);
}

TEST(Acquisition, ArgminInvariantToScale) {
  // candidates differ by their predictive mean (slope on x0)
  const GaussianToyModel model(0.0, 1.0, 1.0);
  const auto h = model.infer(Dataset{}, Seed{0});
  const DrawSource src{&model, h, objective_of, Seed{3}};
  for (auto t : {AcqType::ei, AcqType::pi}) {
    const Acquisition acq{t, ParametricLcb{}, 2000};
    std::vector<double> raw, scaled;
    for (int i = 0; i < 9; ++i) {
      const double v = evaluate_acquisition(src, acq, Input{-2.0 + 0.5 * i}, 0.0, Seed{10}).value;
      raw.push_back(v);
      scaled.push_back(v / double(acq.fidelity));
    }
    const auto a = std::min_element(raw.begin(), raw.end()) - raw.begin();
    const auto b = std::min_element(scaled.begin(), scaled.end()) - scaled.begin();
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, 0);  // lowest predictive mean
  }
}

TEST(Acquisition, Validation) {
  EXPECT_THROW((Acquisition{AcqType::ei, ParametricLcb{}, 0}.validate()), Error);
  EXPECT_THROW((Acquisition{AcqType::ucb, EmpiricalQuantile{12.0}, 10}.validate()), Error);
  EXPECT_NO_THROW((Acquisition{AcqType::ucb, EmpiricalQuantile{11.0}, 10}.validate()));
  EXPECT_THROW((Acquisition{AcqType::ucb, ParametricLcb{0.0}, 10}.validate()), Error);
  EXPECT_THROW((Acquisition{AcqType::ucb, ParametricLcb{1.0}, 1}.validate()), Error);
}

TEST(Acquisition, SeedStreams) {
  const ToyClosures toy;
  const DrawSource src{&toy.model, toy.handle, objective_of, Seed{3}};
  const Acquisition acq{AcqType::ei, ParametricLcb{}, 100};
  const auto a = src.draws(acq, Input{0.0}, 100, Seed{1}).objectives;
  const auto b = src.draws(acq, Input{0.0}, 100, Seed{1}).objectives;
  const auto c = src.draws(acq, Input{0.0}, 100, Seed{2}).objectives;
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}
