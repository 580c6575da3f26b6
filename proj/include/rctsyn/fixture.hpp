#pragma once

#include "rctsyn/design.hpp"
#include "rctsyn/rng.hpp"

namespace rctsyn {

/// A field-trial-shaped test frame: 999 participants, three treatment arms
/// plus control, two stratification columns (11 x 5 levels), two continuous
/// and five binary covariates, and a continuous behavioural score response.
/// The shape mirrors a real community trial closely enough to exercise
/// stratified re-randomization, level collapse, and multi-arm releases.
struct Fixture {
  Schema schema;
  Dataset data;
};

inline Schema fixture_schema() {
  Schema s;
  auto add = [&s](ColumnSpec c) { s.columns.push_back(std::move(c)); };

  ColumnSpec y;
  y.name = "asb_score";
  y.role = Role::response;
  y.kind = Kind::continuous;
  add(y);

  for (const char *arm : {"therapy_only", "cash_only", "therapy_cash"}) {
    ColumnSpec t;
    t.name = arm;
    t.role = Role::treatment;
    t.kind = Kind::discrete;
    t.levels = {"0", "1"};
    add(t);
  }

  auto block = [&](const char *name, int n_levels) {
    ColumnSpec b;
    b.name = name;
    b.role = Role::block;
    b.kind = Kind::discrete;
    for (int l = 1; l <= n_levels; ++l) b.levels.push_back(std::to_string(l));
    add(b);
  };
  block("therapy_block", 11);
  block("cash_block", 5);

  ColumnSpec age;
  age.name = "age";
  age.role = Role::covariate;
  age.kind = Kind::continuous;
  age.lower = 15.0;
  age.upper = 35.0;
  add(age);

  ColumnSpec asb;
  asb.name = "asb_baseline";
  asb.role = Role::covariate;
  asb.kind = Kind::continuous;
  asb.lower = -3.0;
  asb.upper = 3.0;
  add(asb);

  for (const char *name :
       {"sells_drugs", "drinks_alcohol", "smokes_grass", "hard_drugs", "steals"}) {
    ColumnSpec b;
    b.name = name;
    b.role = Role::covariate;
    b.kind = Kind::discrete;
    b.levels = {"0", "1"};
    add(b);
  }
  s.validate();
  return s;
}

inline Fixture make_fixture(std::uint64_t seed) {
  constexpr std::size_t kRows = 999;
  Fixture f;
  f.schema = fixture_schema();
  f.data = Dataset::empty_like(f.schema, kRows);
  Rng rng(derive_seed(seed, {7}));

  const std::size_t tb = f.schema.require("therapy_block");
  const std::size_t cb = f.schema.require("cash_block");

  // Strata: every (therapy_block, cash_block) combination occupied, sizes a
  // touch uneven, and each stratum's arms balanced by complete randomization.
  DesignSpec design;
  design.variant = DesignVariant::stratified;
  design.arm_names = {"control", "therapy_only", "cash_only", "therapy_cash"};
  design.block_columns = {"therapy_block", "cash_block"};
  std::size_t assigned = 0;
  const std::size_t n_groups = 11 * 5;
  for (int t = 0; t < 11; ++t) {
    for (int c = 0; c < 5; ++c) {
      const std::size_t g = static_cast<std::size_t>(t * 5 + c);
      std::size_t size = kRows / n_groups + (g < kRows % n_groups ? 1 : 0);
      DesignSpec::BlockGroup group;
      group.levels = {t, c};
      group.arm_counts.assign(4, 0);
      for (std::size_t a = 0; a < 4; ++a) {
        group.arm_counts[a] = size / 4 + (a < size % 4 ? 1 : 0);
      }
      design.groups.push_back(std::move(group));
      assigned += size;
    }
  }
  if (assigned != kRows) throw NumericError("fixture stratum sizes do not add up");

  const AssignmentMatrix asg = assign(design, kRows, rng);
  const auto treat_cols = f.schema.treatment_indices();
  for (std::size_t r = 0; r < kRows; ++r) {
    for (std::size_t k = 0; k < treat_cols.size(); ++k) {
      f.data.levels(treat_cols[k])[r] =
          (asg.arm[r] == static_cast<std::int32_t>(k) + 1) ? 1 : 0;
    }
  }
  f.data.levels(tb) = asg.block_levels[0];
  f.data.levels(cb) = asg.block_levels[1];

  const std::size_t age = f.schema.require("age");
  const std::size_t asb = f.schema.require("asb_baseline");
  for (std::size_t r = 0; r < kRows; ++r) {
    f.data.real(age)[r] = rng.uniform(15.5, 34.5);
    f.data.real(asb)[r] = rng.uniform(-2.8, 2.8);
  }
  const std::pair<const char *, double> binaries[] = {{"sells_drugs", 0.35},
                                                      {"drinks_alcohol", 0.5},
                                                      {"smokes_grass", 0.4},
                                                      {"hard_drugs", 0.25},
                                                      {"steals", 0.3}};
  for (const auto &[name, p] : binaries) {
    const std::size_t c = f.schema.require(name);
    for (std::size_t r = 0; r < kRows; ++r) {
      f.data.levels(c)[r] = rng.bernoulli(p) ? 1 : 0;
    }
  }

  const std::size_t yc = f.schema.require("asb_score");
  for (std::size_t r = 0; r < kRows; ++r) {
    double eta = 0.1;
    eta += -0.05 * f.data.levels(treat_cols[0])[r];
    eta += -0.02 * f.data.levels(treat_cols[1])[r];
    eta += -0.25 * f.data.levels(treat_cols[2])[r];
    eta += 0.01 * (f.data.real(age)[r] - 25.0);
    eta += 0.30 * f.data.real(asb)[r];
    eta += 0.10 * f.data.levels(f.schema.require("sells_drugs"))[r];
    eta += 0.08 * f.data.levels(f.schema.require("steals"))[r];
    f.data.real(yc)[r] = eta + 0.9 * rng.normal();
  }
  return f;
}

}  // namespace rctsyn
