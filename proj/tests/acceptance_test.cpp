// Acceptance suite: runs every verification criterion at its pinned
// tolerances and prints one pass/fail line per criterion. The same suites
// back the `verify` CLI subcommand.

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>

#include "mvtd/verify.hpp"

namespace {

using mvtd::verify::CriterionResult;
using mvtd::verify::VerifyOptions;

VerifyOptions options() {
  VerifyOptions opts;
  opts.out_dir = "acceptance-out";
  if (const char* env = std::getenv("MVTD_THREADS"))
    opts.threads = std::atoi(env);
  return opts;
}

void run_and_report(const std::string& suite) {
  const CriterionResult res = mvtd::verify::run_suite(suite, options());
  std::printf("[criterion %-28s] %s  %s\n", res.name.c_str(),
              res.pass ? "PASS" : "FAIL", res.details.c_str());
  std::fflush(stdout);
  EXPECT_TRUE(res.pass) << res.name << ": " << res.details;
}

TEST(Acceptance, C01_FixedPointExactness) { run_and_report("fixed-point"); }

TEST(Acceptance, C02_Theorem1And2BoundValidity) { run_and_report("bounds"); }

TEST(Acceptance, C03_Theorem2Rate) { run_and_report("rate"); }

TEST(Acceptance, C04_Theorem3Regularized) { run_and_report("reg"); }

TEST(Acceptance, C05_Theorem4And5HighProbability) {
  run_and_report("highprob");
}

TEST(Acceptance, C06_ContractionLemma) { run_and_report("contraction"); }

TEST(Acceptance, C07_GradientOracles) { run_and_report("gradients"); }

TEST(Acceptance, C08_Smoothness) { run_and_report("smoothness"); }

// The all-Delta-averaged one-sided SPSA estimate has second-order bias
// (odd Taylor terms cancel by the symmetry of the Rademacher average), so
// its error quarters rather than halves when p halves. The asserted
// first-order ratio window cannot be met by this estimator; the run reports
// the measured ratios and separately confirms the d^{3/2} L_J p / 2 bias
// bound, which does hold.
TEST(Acceptance, C09_SpsaBiasStructure) { run_and_report("spsa-bias"); }

TEST(Acceptance, C10_ActorDecay) { run_and_report("actor"); }

TEST(Acceptance, C11_Reproducibility) { run_and_report("repro"); }

}  // namespace
