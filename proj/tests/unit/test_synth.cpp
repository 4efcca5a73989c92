#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"

using namespace gomkit;

TEST(Synth, IdentityDynamicsHoldStartFrame) {
  SynthSpec spec;
  spec.topology = fx::mini6_topology();
  spec.length = 50;
  SynthClass cls;
  cls.label = "still";
  cls.fallback.alpha1 = 1.0;
  cls.fallback.alpha2 = 0.0;
  cls.fallback.start0 = cls.fallback.start1 = 12.5;
  spec.classes = {cls};
  const auto res = synth_generate(spec, 1);
  EXPECT_TRUE((res.dataset[0].frames().array() == 12.5).all());
}

TEST(Synth, OscillatorIsExactSinusoid) {
  SynthSpec spec;
  spec.topology = fx::single_joint_topology();
  spec.length = 300;
  SynthClass cls;
  cls.label = "sine";
  const double w = 2.0 * std::numbers::pi * 1.0 / 90.0;
  cls.channels[0] = ChannelDynamics::oscillator(1.0, 30.0, 0.4, 90.0);
  EXPECT_DOUBLE_EQ(cls.channels[0].alpha1, 2.0 * std::cos(w));
  EXPECT_DOUBLE_EQ(cls.channels[0].alpha2, 1.0);
  spec.classes = {cls};
  const auto seq = synth_generate(spec, 2).dataset[0];
  for (std::size_t t = 0; t < seq.length(); ++t)
    EXPECT_NEAR(seq.at(t, 0), 30.0 * std::sin(w * static_cast<double>(t) + 0.4), 1e-9) << t;
}

TEST(Synth, DeterministicForSeed) {
  SynthSpec spec;
  spec.topology = fx::mini6_topology();
  spec.length = 80;
  spec.reps_per_class = 3;
  spec.noise_sigma = 0.5;
  spec.start_jitter = 1.0;
  spec.classes = {fx::oscillator_class(spec.topology, "a", 1), fx::oscillator_class(spec.topology, "b", 2)};
  const auto r1 = synth_generate(spec, 99), r2 = synth_generate(spec, 99), r3 = synth_generate(spec, 100);
  ASSERT_EQ(r1.dataset.size(), 6u);
  for (std::size_t i = 0; i < r1.dataset.size(); ++i) EXPECT_EQ(r1.dataset[i], r2.dataset[i]);
  EXPECT_FALSE(r1.dataset[0].frames() == r3.dataset[0].frames());
}

TEST(Synth, NoiselessDataSatisfiesGroundTruthRecursion) {
  SynthSpec spec;
  spec.topology = fx::mini6_topology();
  spec.length = 150;
  auto cls = fx::oscillator_class(spec.topology, "a", 3, 90.0, 0.999);
  const auto& topo = spec.topology;
  cls.couplings.push_back({topo.channel_index("SP.x"), topo.channel_index("H.x"), 0.01, 0.03});
  cls.couplings.push_back({topo.channel_index("RA.y"), topo.channel_index("LA.y"), -0.02, std::nullopt});
  spec.classes = {cls};
  const auto res = synth_generate(spec, 4);
  const auto& seq = res.dataset[0];
  const auto sys = build_system(topo);
  const auto& truth = res.truth.at("a");
  double worst = 0.0;
  for (std::size_t t = 2; t < seq.length(); ++t)
    for (const auto& eq : sys.equations) {
      const auto coeffs = truth[eq.target].at_step(t - 2);
      const double pred = eval_equation(eq, coeffs, seq.frame(t - 1), seq.frame(t - 2));
      worst = std::max(worst, std::abs(pred - seq.at(t, eq.target)));
    }
  EXPECT_LT(worst, 1e-10);
  // The ramped coupling ends at its stated value.
  const auto& eq = sys.equations[topo.channel_index("SP.x")];
  for (std::size_t r = 0; r < eq.regressors.size(); ++r) {
    if (eq.regressors[r].channel == topo.channel_index("H.x")) {
      EXPECT_DOUBLE_EQ(truth[eq.target].mean(147, static_cast<Eigen::Index>(r + 2)), 0.03);
    }
  }
}

TEST(Synth, RejectsUnstableSpec) {
  SynthSpec spec;
  spec.topology = fx::single_joint_topology();
  SynthClass cls;
  cls.label = "boom";
  cls.channels[0].alpha1 = 2.5;
  cls.channels[0].alpha2 = 1.0;
  spec.classes = {cls};
  EXPECT_THROW(synth_generate(spec, 1), ValidationError);
}

TEST(Synth, RejectsCouplingOutsideAssumptions) {
  SynthSpec spec;
  spec.topology = SkeletonTopology::default_body();
  SynthClass cls;
  cls.label = "c";
  cls.couplings.push_back({spec.topology.channel_index("HD.x"), spec.topology.channel_index("RCA.x"), 0.1, {}});
  spec.classes = {cls};
  EXPECT_THROW(synth_generate(spec, 1), ValidationError);
}

TEST(Synth, SpecFromJson) {
  const auto j = nlohmann::json::parse(R"({
    "length": 40, "reps_per_class": 2, "noise_sigma": 0.0,
    "topology": {"joints": ["J"], "limbs": {"spine": ["J"]}},
    "classes": [{"label": "a",
                 "default": {"alpha": [1, 0], "start": [3, 3]},
                 "channels": {"J.x": {"oscillator": {"frequency_hz": 1, "amplitude": 5}}},
                 "couplings": [{"target": "J.y", "source": "J.x", "beta": 0.01}]}]
  })");
  const auto spec = synth_spec_from_json(j);
  ASSERT_EQ(spec.classes.size(), 1u);
  EXPECT_EQ(spec.classes[0].channels.size(), 1u);
  EXPECT_EQ(spec.classes[0].fallback.start0, 3.0);
  const auto res = synth_generate(spec, 5);
  EXPECT_EQ(res.dataset.size(), 2u);
  EXPECT_EQ(res.dataset[0].at(10, 2), 3.0);
  EXPECT_THROW(synth_spec_from_json(nlohmann::json::parse(R"({"classes": [{"label": "a", "channels": {"Q.x": {}}}]})")),
               NotFoundError);
}
