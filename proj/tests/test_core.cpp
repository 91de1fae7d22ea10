#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sla/dataset.hpp"
#include "sla/error.hpp"
#include "sla/grade_scale.hpp"

using namespace sla;

TEST_CASE("score_of maps labels to their numeric scores") {
  auto scale = GradeScale::six_level();
  CHECK(scale.score_of("A") == 6.0);
  CHECK(scale.score_of("F") == 1.0);
  CHECK(scale.score_of("C") == 4.0);
  CHECK_THROWS_WITH_AS(scale.score_of("Z"), "unknown grade label 'Z'",
                       DomainError);
}

TEST_CASE("nearest_class rounds to the closest class, half points up") {
  auto scale = GradeScale::six_level();
  CHECK(scale.nearest_class(6.0) == "A");
  CHECK(scale.nearest_class(3.5) == "C");  // midpoint goes to the higher score
  CHECK(scale.nearest_class(1.2) == "F");
  CHECK(scale.nearest_class(5.5) == "A");
  CHECK_THROWS_AS(scale.nearest_class(0.9), DomainError);
  CHECK_THROWS_AS(scale.nearest_class(6.1), DomainError);
}

TEST_CASE("nearest_class round-trips exact class scores") {
  auto scale = GradeScale::six_level();
  for (const auto& label : scale.labels()) {
    CHECK(scale.nearest_class(scale.score_of(label)) == label);
  }
}

TEST_CASE("nearest_class never strays more than half a class score") {
  auto scale = GradeScale::six_level();
  for (double s = scale.min_score(); s <= scale.max_score(); s += 0.5) {
    double snapped = scale.score_of(scale.nearest_class(s));
    CHECK(std::abs(snapped - s) <= 0.5);
  }
}

TEST_CASE("onehot_target places the 1 at the rounded class") {
  auto scale = GradeScale::six_level();
  CHECK(scale.onehot_target(5.0) ==
        std::vector<double>{0, 1, 0, 0, 0, 0});
  CHECK(scale.onehot_target(3.5) ==
        std::vector<double>{0, 0, 1, 0, 0, 0});
  CHECK(scale.onehot_target(1.0) ==
        std::vector<double>{0, 0, 0, 0, 0, 1});
  CHECK_THROWS_AS(scale.onehot_target(3.25), DomainError);
}

TEST_CASE("onehot_target always sums to exactly 1 with 0/1 entries") {
  auto scale = GradeScale::six_level();
  for (double s = 1.0; s <= 6.0; s += 0.5) {
    auto t = scale.onehot_target(s);
    double sum = 0.0;
    for (double v : t) {
      CHECK((v == 0.0 || v == 1.0));
      sum += v;
    }
    CHECK(sum == 1.0);
  }
}

TEST_CASE("tiny scales are configurable") {
  GradeScale tiny({"X", "Y", "Z"}, {3.0, 2.0, 1.0}, 0.5);
  CHECK(tiny.num_classes() == 3);
  CHECK(tiny.min_score() == 1.0);
  CHECK(tiny.max_score() == 3.0);
  CHECK(tiny.nearest_class(2.5) == "X");  // midpoint rounds toward 3.0
  CHECK(tiny.on_grid(1.5));
  CHECK(!tiny.on_grid(1.25));
}

TEST_CASE("scale constructor rejects broken invariants") {
  CHECK_THROWS_AS(GradeScale({"A"}, {6.0}), DomainError);
  CHECK_THROWS_AS(GradeScale({"A", "B"}, {5.0, 6.0}), DomainError);
  CHECK_THROWS_AS(GradeScale({"A", "A"}, {6.0, 5.0}), DomainError);
  CHECK_THROWS_AS(GradeScale({"A", "B"}, {6.0}), DomainError);
  CHECK_THROWS_AS(GradeScale({"A", "B"}, {6.0, 5.0}, 0.0), DomainError);
}

namespace {

DatasetSplit well_formed_split() {
  DatasetSplit split;
  split.name = "train";
  split.feature_file = "train.features.bin";
  split.records = {
      {"s1", 3, "s1-p3", {0, 1}, 4.5},
      {"s1", 5, "s1-p5", {2}, 4.0},
      {"s2", 3, "s2-p3", {3, 4}, std::nullopt},
  };
  return split;
}

}  // namespace

TEST_CASE("validate_split accepts a well-formed split") {
  auto scale = GradeScale::six_level();
  CHECK(validate_split(well_formed_split(), 5, scale).empty());
}

TEST_CASE("validate_split flags out-of-bounds chunk rows") {
  auto scale = GradeScale::six_level();
  auto split = well_formed_split();
  auto violations = validate_split(split, 4, scale);  // row 4 now invalid
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].response_id == "s2-p3");
  CHECK(violations[0].rule.find("out of bounds") != std::string::npos);
}

TEST_CASE("validate_split flags duplicate response ids") {
  auto scale = GradeScale::six_level();
  auto split = well_formed_split();
  split.records.push_back({"s3", 5, "s1-p5", {0}, 3.0});
  auto violations = validate_split(split, 5, scale);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].response_id == "s1-p5");
  CHECK(violations[0].rule.find("duplicate response_id") != std::string::npos);
}

TEST_CASE("validate_split flags every record rule") {
  auto scale = GradeScale::six_level();
  DatasetSplit split;
  split.records = {
      {"s1", 6, "bad-part", {0}, 3.0},
      {"s1", 2, "no-chunks", {}, 3.0},
      {"s1", 2, "dup-chunk", {1, 1}, 3.0},
      {"s1", 2, "off-grid", {2}, 3.25},
  };
  auto violations = validate_split(split, 5, scale);
  REQUIRE(violations.size() == 4);
  CHECK(violations[0].rule.find("outside 1..5") != std::string::npos);
  CHECK(violations[1].rule.find("empty chunk_rows") != std::string::npos);
  CHECK(violations[2].rule.find("duplicate chunk row") != std::string::npos);
  CHECK(violations[3].rule.find("not on the grade grid") != std::string::npos);
}
