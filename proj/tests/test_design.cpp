#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace rctsyn;

namespace {

Schema trial_schema() {
  return Schema::parse(R"({
    "columns": [
      {"name": "y",  "role": "response", "kind": "continuous", "bounds": ["-inf", "inf"]},
      {"name": "t1", "role": "treatment"},
      {"name": "t2", "role": "treatment"},
      {"name": "b",  "role": "block", "kind": "discrete", "levels": ["u", "v"]}
    ]
  })");
}

// Ten rows: 4 control, 3 on t1, 3 on t2; block u holds rows {0,1,4,5,7,8}.
Dataset trial_data() {
  const Schema s = trial_schema();
  Dataset d = Dataset::empty_like(s, 10);
  d.real(0) = std::vector<double>(10, 0.0);
  d.levels(1) = {0, 0, 0, 0, 1, 1, 1, 0, 0, 0};
  d.levels(2) = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  d.levels(3) = {0, 0, 1, 1, 0, 0, 1, 0, 0, 1};
  return d;
}

std::vector<std::uint64_t> arm_tally(const std::vector<std::int32_t> &arms,
                                     std::size_t n_arms) {
  std::vector<std::uint64_t> tally(n_arms, 0);
  for (const std::int32_t a : arms) {
    REQUIRE(a >= 0);
    REQUIRE(static_cast<std::size_t>(a) < n_arms);
    ++tally[static_cast<std::size_t>(a)];
  }
  return tally;
}

}  // namespace

TEST_CASE("designs are read back from the observed frame") {
  const Dataset d = trial_data();

  SECTION("simple: marginal shares") {
    const DesignSpec spec = infer_design(d, DesignVariant::simple);
    CHECK(spec.arm_names == std::vector<std::string>{"control", "t1", "t2"});
    REQUIRE(spec.arm_probs.size() == 3);
    CHECK(spec.arm_probs[0] == 0.4);
    CHECK(spec.arm_probs[1] == 0.3);
    CHECK(spec.arm_probs[2] == 0.3);
  }
  SECTION("complete: exact arm totals") {
    const DesignSpec spec = infer_design(d, DesignVariant::complete);
    CHECK(spec.arm_counts == std::vector<std::uint64_t>{4, 3, 3});
    CHECK(spec.total() == 10);
  }
  SECTION("stratified: per-stratum totals in sorted level order") {
    const DesignSpec spec = infer_design(d, DesignVariant::stratified);
    CHECK(spec.block_columns == std::vector<std::string>{"b"});
    REQUIRE(spec.groups.size() == 2);
    CHECK(spec.groups[0].levels == std::vector<std::int32_t>{0});
    CHECK(spec.groups[0].arm_counts == std::vector<std::uint64_t>{2, 2, 2});
    CHECK(spec.groups[1].levels == std::vector<std::int32_t>{1});
    CHECK(spec.groups[1].arm_counts == std::vector<std::uint64_t>{2, 1, 1});
    CHECK(spec.total() == 10);
  }
  SECTION("stratified inference needs block columns") {
    const Schema bare = Schema::parse(R"({
      "columns": [
        {"name": "y", "role": "response", "kind": "continuous", "bounds": ["-inf", "inf"]},
        {"name": "t1", "role": "treatment"}
      ]
    })");
    Dataset d2 = Dataset::empty_like(bare, 2);
    d2.real(0) = {0.0, 1.0};
    d2.levels(1) = {0, 1};
    try {
      infer_design(d2, DesignVariant::stratified);
      FAIL("expected an error");
    } catch (const ValidationError &e) {
      CHECK(std::string(e.what()).find("no block columns") != std::string::npos);
    }
  }
}

TEST_CASE("simple assignment follows the arm probabilities") {
  DesignSpec spec;
  spec.variant = DesignVariant::simple;
  spec.arm_names = {"control", "t1", "t2"};
  spec.arm_probs = {0.5, 0.2, 0.3};
  Rng rng(5);
  const AssignmentMatrix m = assign(spec, 20000, rng);
  REQUIRE(m.n() == 20000);
  const auto tally = arm_tally(m.arm, 3);
  std::vector<double> freq(tally.begin(), tally.end());
  CHECK(testsupport::chi2_gof_p(freq, spec.arm_probs) > 0.001);
}

TEST_CASE("complete assignment reproduces counts and is exchangeable") {
  const DesignSpec spec = infer_design(trial_data(), DesignVariant::complete);

  Rng rng(17);
  const AssignmentMatrix once = assign(spec, 10, rng);
  CHECK(arm_tally(once.arm, 3) == std::vector<std::uint64_t>{4, 3, 3});
  CHECK(once.block_levels.empty());

  CHECK_THROWS_AS(assign(spec, 9, rng), ValidationError);

  // Every position should receive the control arm with probability 0.4.
  const int reps = 10000;
  std::vector<double> control_hits(10, 0.0);
  for (int r = 0; r < reps; ++r) {
    const AssignmentMatrix m = assign(spec, 10, rng);
    for (std::size_t p = 0; p < 10; ++p) {
      if (m.arm[p] == 0) control_hits[p] += 1.0;
    }
  }
  for (std::size_t p = 0; p < 10; ++p) {
    CHECK(std::abs(control_hits[p] / reps - 0.4) < 0.02);
  }
}

TEST_CASE("complete assignment permutes uniformly") {
  DesignSpec spec;
  spec.variant = DesignVariant::complete;
  spec.arm_names = {"control", "t1"};
  spec.arm_counts = {2, 1};
  Rng rng(23);
  std::vector<double> pos_freq(3, 0.0);
  for (int r = 0; r < 6000; ++r) {
    const AssignmentMatrix m = assign(spec, 3, rng);
    for (std::size_t p = 0; p < 3; ++p) {
      if (m.arm[p] == 1) pos_freq[p] += 1.0;
    }
  }
  CHECK(testsupport::chi2_gof_p(pos_freq, {1.0 / 3, 1.0 / 3, 1.0 / 3}) > 0.001);
}

TEST_CASE("stratified assignment keeps stratum sizes and arm counts") {
  const DesignSpec spec = infer_design(trial_data(), DesignVariant::stratified);
  Rng rng(31);
  const AssignmentMatrix m = assign(spec, 10, rng);
  REQUIRE(m.n() == 10);
  REQUIRE(m.block_levels.size() == 1);

  // Output is grouped by stratum in sorted level order: six u rows, four v.
  const std::vector<std::int32_t> expect_blocks = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(m.block_levels[0] == expect_blocks);

  std::vector<std::uint64_t> u_tally(3, 0), v_tally(3, 0);
  for (std::size_t r = 0; r < 10; ++r) {
    auto &t = m.block_levels[0][r] == 0 ? u_tally : v_tally;
    ++t[static_cast<std::size_t>(m.arm[r])];
  }
  CHECK(u_tally == std::vector<std::uint64_t>{2, 2, 2});
  CHECK(v_tally == std::vector<std::uint64_t>{2, 1, 1});

  CHECK_THROWS_AS(assign(spec, 11, rng), ValidationError);
}

TEST_CASE("randomized arms are orthogonal to a fixed covariate") {
  DesignSpec spec;
  spec.variant = DesignVariant::complete;
  spec.arm_names = {"control", "t1"};
  spec.arm_counts = {500, 500};
  Rng rng(47);
  const AssignmentMatrix m = assign(spec, 1000, rng);

  // Correlate the arm indicator with a strongly patterned covariate.
  double sum_x = 0.0, sum_xx = 0.0, sum_a = 0.0, sum_ax = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const double x = static_cast<double>(i);
    const double a = m.arm[i] == 1 ? 1.0 : 0.0;
    sum_x += x;
    sum_xx += x * x;
    sum_a += a;
    sum_ax += a * x;
  }
  const double n = 1000.0;
  const double cov = sum_ax / n - (sum_a / n) * (sum_x / n);
  const double var_x = sum_xx / n - (sum_x / n) * (sum_x / n);
  const double var_a = (sum_a / n) * (1.0 - sum_a / n);
  const double corr = cov / std::sqrt(var_x * var_a);
  CHECK(std::abs(corr) < 3.0 / std::sqrt(n));
}

TEST_CASE("design validation rejects malformed specs") {
  DesignSpec spec;
  spec.variant = DesignVariant::simple;
  spec.arm_names = {"control", "t1"};
  spec.arm_probs = {0.7, 0.7};
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  spec.arm_probs = {1.2, -0.2};
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  DesignSpec empty_block;
  empty_block.variant = DesignVariant::stratified;
  empty_block.arm_names = {"control", "t1"};
  empty_block.block_columns = {"b"};
  empty_block.groups.push_back({{0}, {0, 0}});
  try {
    empty_block.validate();
    FAIL("expected an error");
  } catch (const ValidationError &e) {
    CHECK(std::string(e.what()).find("empty block combination") != std::string::npos);
  }
}
