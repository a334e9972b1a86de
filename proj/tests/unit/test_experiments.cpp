#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sllbar/experiments.hpp"

using namespace sllbar;

namespace {

ExperimentConfig small_sim1() {
  ExperimentConfig c;
  c.params = scenario_params(Profile::Sim1);
  c.samples = 2;
  c.T = 0.01;
  c.reference = {5, 8};
  c.run = {3, 4};
  c.threads = 1;
  return c;
}

ExperimentConfig noise_free(ExperimentConfig c) {
  c.noise = Profile::Zero;
  c.samples = 1;
  return c;
}

void expect_same(const ConvergenceReport& a, const ConvergenceReport& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    for (const char* col : {"E0_u", "E1_u", "E0_H", "E1_H"}) EXPECT_EQ(a.rows[i].column(col), b.rows[i].column(col));
}

}  // namespace

TEST(FitRate, ExactPowerLaws) {
  const RateFit a = fit_rate({{1.0, 1.0}, {2.0, 4.0}});
  EXPECT_NEAR(a.slope, 2.0, 1e-14);
  EXPECT_NEAR(a.residual, 0.0, 1e-14);
  EXPECT_NEAR(fit_rate({{1.0, 3.0}, {2.0, 3.0}}).slope, 0.0, 1e-14);
  const RateFit c = fit_rate({{4.0, 0.014}, {8.0, 0.0036}, {16.0, 0.00088}});
  EXPECT_NEAR(c.slope, -1.99, 0.02);
  EXPECT_LT(c.residual, 0.02);
}

TEST(FitRate, RejectsDegenerateInput) {
  EXPECT_THROW(fit_rate({{1.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(fit_rate({{1.0, 0.0}, {2.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(fit_rate({{-1.0, 1.0}, {2.0, 1.0}}), InvalidArgument);
  EXPECT_THROW(fit_rate({{2.0, 1.0}, {2.0, 3.0}}), InvalidArgument);
}

TEST(Convergence, ReferenceOnlySweepHasZeroErrors) {
  ExperimentConfig c = small_sim1();
  c.sweep = {c.reference};
  const ConvergenceReport r = run_spatial_convergence(c);
  ASSERT_EQ(r.rows.size(), 1u);
  for (const char* col : {"E0_u", "E1_u", "E0_H", "E1_H"}) EXPECT_EQ(r.rows[0].column(col), 0.0);
  EXPECT_TRUE(r.rates.empty());
}

TEST(Convergence, NoiseFreeSingleSampleIsBitIdentical) {
  ExperimentConfig c = noise_free(small_sim1());
  c.sweep = {{2, 8}, {3, 8}, {4, 8}};
  expect_same(run_spatial_convergence(c), run_spatial_convergence(c));
}

TEST(Convergence, RowsCarryTheSweepGeometry) {
  ExperimentConfig c = small_sim1();
  c.sweep = {{5, 2}, {5, 4}};
  const ConvergenceReport r = run_temporal_convergence(c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.axis, SweepAxis::Time);
  EXPECT_EQ(r.rows[0].steps, 2u);
  EXPECT_DOUBLE_EQ(r.rows[0].k, 0.005);
  EXPECT_DOUBLE_EQ(r.rows[1].h, 1.0 / 32.0);
  EXPECT_EQ(r.rows[1].M, 2u);
  EXPECT_EQ(r.rates.size(), 4u);
  EXPECT_NE(r.rate("E1_H"), nullptr);
}

TEST(Convergence, CoarseRunsSeeTheCoarsenedReferencePath) {
  // With the fine path as input, a sweep point equal to the reference in all
  // but name must reproduce the reference trajectory exactly.
  ExperimentConfig c = small_sim1();
  c.samples = 1;
  const SpacePtr ref_space = FeSpace::create(build_mesh(c.family, c.reference.level));
  const BrownianPath path = sample_path(sample_seed(c.base_seed, 0), c.T, c.reference.steps);
  const auto direct = simulate(c, ref_space, coarsen(path, 2)).final_state;
  c.sweep = {{5, 4}};
  const ConvergenceReport r = run_temporal_convergence(c);
  const auto ref = simulate(c, ref_space, path.increments).final_state;
  EXPECT_NEAR(r.rows[0].E0_u, strong_error(direct.u, ref.u, 0), 1e-14);
  EXPECT_NEAR(r.rows[0].E1_H, strong_error(direct.H, ref.H, 1), 1e-10);
}

TEST(Convergence, NonNestingSweepsAreRejected) {
  ExperimentConfig c = small_sim1();
  c.sweep = {{6, 8}};
  EXPECT_THROW(run_spatial_convergence(c), NonNestingSweep);
  c.sweep = {{5, 3}};
  EXPECT_THROW(run_temporal_convergence(c), NonNestingSweep);
  c.sweep = {{3, 4}};
  EXPECT_THROW(run_spatial_convergence(c), NonNestingSweep);
  EXPECT_THROW(run_temporal_convergence(c), NonNestingSweep);
}

TEST(Convergence, TighterSolverToleranceBarelyMovesErrors) {
  ExperimentConfig c = small_sim1();
  c.sweep = {{3, 8}, {4, 8}};
  c.solver.picard_tol = 1e-8;
  const ConvergenceReport loose = run_spatial_convergence(c);
  c.solver.picard_tol = 1e-10;
  const ConvergenceReport tight = run_spatial_convergence(c);
  for (std::size_t i = 0; i < 2; ++i)
    for (const char* col : {"E0_u", "E1_u", "E0_H", "E1_H"})
      EXPECT_LE(std::abs(loose.rows[i].column(col) - tight.rows[i].column(col)), 0.01 * tight.rows[i].column(col));
}

TEST(Convergence, ParallelSamplesMatchSerial) {
  ExperimentConfig c = small_sim1();
  c.samples = 3;
  c.sweep = {{3, 8}, {4, 8}};
  const ConvergenceReport serial = run_spatial_convergence(c);
  c.threads = 3;
  expect_same(serial, run_spatial_convergence(c));
}

TEST(Convergence, SampleFailuresNameTheSample) {
  ExperimentConfig c = small_sim1();
  c.solver.method = NonlinearMethod::Picard;
  c.solver.picard_max_iters = 1;
  c.sweep = {{3, 8}};
  try {
    run_spatial_convergence(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sample 0"), std::string::npos);
  }
}

TEST(ParallelFor, RethrowsLowestFailingIndex) {
  std::vector<int> hits(10, 0);
  try {
    parallel_for(10, 4, [&](std::size_t i) {
      hits[i] = 1;
      if (i == 3 || i == 7) throw InvalidArgument("test", std::to_string(i));
    });
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
  }
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(EnergyEnsemble, GradientFlowNeverIncreases) {
  ExperimentConfig c = small_sim1();
  c.noise = Profile::Zero;
  c.params.gamma = 0.0;
  c.params.beta1 = 0.0;
  c.params.beta2 = 0.0;
  c.samples = 1;
  c.T = 0.2;
  c.run = {4, 20};
  const EnergyEnsemble e = run_energy_ensemble(c);
  ASSERT_EQ(e.mean.size(), 21u);
  for (std::size_t n = 1; n < e.mean.size(); ++n) EXPECT_LE(e.mean[n].value, e.mean[n - 1].value + 1e-8);
  EXPECT_LT(e.mean.back().value, e.mean.front().value);
}

TEST(EnergyEnsemble, ConstantWellStaysAtZero) {
  ExperimentConfig c = small_sim1();
  c.initial = Profile::Constant;
  c.noise = Profile::Zero;
  c.params.nu = Vec2::Zero();
  c.samples = 2;
  const EnergyEnsemble e = run_energy_ensemble(c);
  ASSERT_EQ(e.traces.size(), 2u);
  for (const auto& s : e.mean) EXPECT_NEAR(s.value, 0.0, 1e-10);
  EXPECT_NEAR(e.max_pointwise_u, 1.0, 1e-8);
}

TEST(EnergyEnsemble, MeanAveragesTraces) {
  ExperimentConfig c = small_sim1();
  c.samples = 3;
  const EnergyEnsemble e = run_energy_ensemble(c);
  for (std::size_t n = 0; n < e.mean.size(); ++n) {
    const double avg = (e.traces[0][n].value + e.traces[1][n].value + e.traces[2][n].value) / 3.0;
    EXPECT_NEAR(e.mean[n].value, avg, 1e-12 * std::abs(avg));
    EXPECT_DOUBLE_EQ(e.mean[n].t, c.T * n / c.run.steps);
  }
}

TEST(Csv, ReportLayout) {
  ConvergenceReport r;
  r.rows.push_back({2, 0.25, 8, 0.125, 5, 1.0, 2.0, 3.0, 4.0});
  r.rates.push_back({"E0_u", 1.5, 0.01});
  std::ostringstream out;
  write_report_csv(out, r);
  EXPECT_EQ(out.str(), "level,h,steps,k,M,E0_u,E1_u,E0_H,E1_H\n2,0.25,8,0.125,5,1,2,3,4\n# rate E0_u 1.5 0.01\n");
}

TEST(Csv, EnergyLayout) {
  std::ostringstream out;
  write_energy_csv(out, {{0.0, 1.5}, {0.5, 0.25}}, "7");
  EXPECT_EQ(out.str(), "sample,t,energy\n7,0,1.5\n7,0.5,0.25\n");
  std::ostringstream bare;
  write_energy_csv(bare, {{0.0, 1.0}}, "mean", false);
  EXPECT_EQ(bare.str(), "mean,0,1\n");
}

TEST(ExperimentConfig, Validation) {
  ExperimentConfig c = small_sim1();
  EXPECT_NO_THROW(c.validate());
  c.norms = {2};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_sim1();
  c.T = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = small_sim1();
  c.sweep = {{4, 5}};
  EXPECT_THROW(c.validate(), NonNestingSweep);
}
