#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "sla/error.hpp"
#include "sla/format.hpp"
#include "sla/storage.hpp"
#include "test_util.hpp"

using namespace sla;
using slatest::TempDir;

namespace {

FloatMatrix random_features(SplitMix64& rng, std::size_t rows,
                            std::size_t cols) {
  FloatMatrix m(rows, cols);
  for (float& v : m.data) {
    v = static_cast<float>(4.0 * rng.next_double() - 2.0);
  }
  return m;
}

}  // namespace

TEST_CASE("feature files round-trip byte-identically") {
  TempDir tmp("slaf");
  SplitMix64 rng(1);
  auto m = random_features(rng, 3, 4);
  write_features(m, tmp.file("a.bin"));
  auto back = read_features(tmp.file("a.bin"));
  CHECK(back.rows == 3);
  CHECK(back.cols == 4);
  CHECK(back.data == m.data);
  write_features(back, tmp.file("b.bin"));
  CHECK(slatest::files_equal(tmp.file("a.bin"), tmp.file("b.bin")));
}

TEST_CASE("feature files round-trip on randomized shapes") {
  TempDir tmp("slaf");
  SplitMix64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto rows = rng.next_below(20);
    auto cols = 1 + rng.next_below(12);
    auto m = random_features(rng, rows, cols);
    auto path = tmp.file("t.bin");
    write_features(m, path);
    auto back = read_features(path);
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.data == m.data);
  }
}

TEST_CASE("empty feature matrix makes a 16-byte file") {
  TempDir tmp("slaf");
  write_features(FloatMatrix(0, 8), tmp.file("empty.bin"));
  CHECK(slatest::slurp(tmp.file("empty.bin")).size() == 16);
  auto back = read_features(tmp.file("empty.bin"));
  CHECK(back.rows == 0);
  CHECK(back.cols == 8);
}

TEST_CASE("feature reader rejects malformed files") {
  TempDir tmp("slaf");
  SUBCASE("bad magic") {
    std::ofstream out(tmp.file("bad.bin"), std::ios::binary);
    out << "XXXX0000" << std::string(8, '\0');
    out.close();
    CHECK_THROWS_WITH_AS(read_features(tmp.file("bad.bin")),
                         doctest::Contains("bad magic at offset 0"),
                         FormatError);
  }
  SUBCASE("truncated data") {
    auto path = tmp.file("trunc.bin");
    SplitMix64 rng(3);
    write_features(random_features(rng, 4, 4), path);
    auto bytes = slatest::slurp(path);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    out.close();
    CHECK_THROWS_AS(read_features(path), FormatError);
  }
  SUBCASE("zero dim") {
    std::ofstream out(tmp.file("dim0.bin"), std::ios::binary);
    out << "SLAF0001" << std::string(8, '\0');
    out.close();
    CHECK_THROWS_AS(read_features(tmp.file("dim0.bin")), FormatError);
  }
  SUBCASE("writer rejects zero dim") {
    CHECK_THROWS_AS(write_features(FloatMatrix(3, 0), tmp.file("x.bin")),
                    DomainError);
  }
}

TEST_CASE("manifest lines parse into records") {
  TempDir tmp("slam");
  {
    std::ofstream out(tmp.file("train.manifest.tsv"));
    out << "# a comment line\n";
    out << "s1\t3\ts1-p3\t0,1\t4.5\n";
    out << "s1\t1\ts1-p1-q3\t7\t-\n";
  }
  auto split = parse_manifest(tmp.file("train.manifest.tsv"));
  CHECK(split.name == "train");
  CHECK(split.feature_file.find("train.features.bin") != std::string::npos);
  REQUIRE(split.records.size() == 2);
  CHECK(split.records[0].part == 3);
  CHECK(split.records[0].chunk_rows == std::vector<std::size_t>{0, 1});
  CHECK(split.records[0].ref_score == 4.5);
  CHECK(split.records[1].part == 1);
  CHECK(split.records[1].chunk_rows == std::vector<std::size_t>{7});
  CHECK(!split.records[1].ref_score.has_value());
}

TEST_CASE("manifest parse errors carry line numbers") {
  TempDir tmp("slam");
  auto write_manifest_text = [&](const std::string& text) {
    std::ofstream out(tmp.file("bad.manifest.tsv"));
    out << text;
  };
  SUBCASE("part out of range") {
    write_manifest_text("s1\t6\tx\t0\t3.0\n");
    CHECK_THROWS_WITH_AS(parse_manifest(tmp.file("bad.manifest.tsv")),
                         doctest::Contains(":1: part out of 1..5"),
                         FormatError);
  }
  SUBCASE("wrong field count") {
    write_manifest_text("s1\t3\tx\t0\n");
    CHECK_THROWS_WITH_AS(parse_manifest(tmp.file("bad.manifest.tsv")),
                         doctest::Contains("expected 5 tab-separated fields"),
                         FormatError);
  }
  SUBCASE("non-integer part") {
    write_manifest_text("s1\tthree\tx\t0\t3.0\n");
    CHECK_THROWS_AS(parse_manifest(tmp.file("bad.manifest.tsv")), FormatError);
  }
  SUBCASE("off-grid score on a later line") {
    write_manifest_text("s1\t3\tx\t0\t3.0\ns1\t3\ty\t1\t3.3\n");
    CHECK_THROWS_WITH_AS(parse_manifest(tmp.file("bad.manifest.tsv")),
                         doctest::Contains(":2: off-grid score 3.3"),
                         FormatError);
  }
}

TEST_CASE("manifests round-trip through write and parse") {
  TempDir tmp("slam");
  SplitMix64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    DatasetSplit split;
    split.name = "dev";
    split.feature_file = "dev.features.bin";
    std::size_t n = 1 + rng.next_below(12);
    std::size_t next_row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ResponseRecord rec;
      rec.submission_id = "s" + std::to_string(rng.next_below(5));
      rec.part = static_cast<int>(1 + rng.next_below(5));
      rec.response_id = "r" + std::to_string(trial) + "-" + std::to_string(i);
      std::size_t chunks = 1 + rng.next_below(3);
      for (std::size_t c = 0; c < chunks; ++c) rec.chunk_rows.push_back(next_row++);
      if (rng.next_below(4) != 0) {
        rec.ref_score = 1.0 + 0.5 * static_cast<double>(rng.next_below(11));
      }
      split.records.push_back(rec);
    }
    auto path_a = tmp.file("a.manifest.tsv");
    auto path_b = tmp.file("b.manifest.tsv");
    write_manifest(split, path_a);
    auto parsed = parse_manifest(path_a, "dev", "dev.features.bin");
    REQUIRE(parsed.records.size() == split.records.size());
    write_manifest(parsed, path_b);
    CHECK(slatest::files_equal(path_a, path_b));
  }
}

TEST_CASE("model save/load preserves forward outputs bit-exactly") {
  TempDir tmp("slamod");
  SplitMix64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto head = trial % 3 == 0 ? HeadKind::CE
               : trial % 3 == 1 ? HeadKind::FA
                                : HeadKind::REG;
    std::size_t d = 1 + rng.next_below(8);
    std::size_t h = trial % 4 == 0 ? 0 : 1 + rng.next_below(6);
    auto m = random_model(head, d, h, GradeScale::six_level(),
                          1000 + static_cast<std::uint64_t>(trial));
    auto path = tmp.file("m.model");
    save_model(m, path, {{"seed", std::to_string(trial)}});
    auto loaded = load_model(path);
    CHECK(loaded.model.head == m.head);
    CHECK(loaded.model.w1.data == m.w1.data);
    CHECK(loaded.model.b1 == m.b1);
    CHECK(loaded.model.wout.data == m.wout.data);
    CHECK(loaded.model.bout == m.bout);
    CHECK(loaded.meta.at("seed") == std::to_string(trial));

    auto x = slatest::random_vector(rng, d, -3.0, 3.0);
    CHECK(forward(m, x) == forward(loaded.model, x));
  }
}

TEST_CASE("model loader rejects bad files") {
  TempDir tmp("slamod");
  auto m = random_model(HeadKind::FA, 4, 3, GradeScale::six_level(), 7);
  auto path = tmp.file("m.model");
  save_model(m, path);

  SUBCASE("wrong version") {
    auto text = slatest::slurp(path);
    text.replace(text.find("v1"), 2, "v9");
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("unsupported model header"),
                         FormatError);
  }
  SUBCASE("truncated weight block") {
    auto text = slatest::slurp(path);
    auto pos = text.find("[bout");
    std::ofstream out(path);
    out << text.substr(0, pos) << "[bout 6]\n" << double_to_hex(1.0) << "\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("truncated block bout"),
                         FormatError);
  }
  SUBCASE("block dimension mismatch") {
    auto text = slatest::slurp(path);
    auto pos = text.find("[W1 3 4]");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 8, "[W1 3 5]");
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("block W1 dimensions"),
                         FormatError);
  }
  SUBCASE("malformed hex") {
    auto text = slatest::slurp(path);
    auto pos = text.find('\n', text.find("[W1"));
    text.replace(pos + 1, 16, "zzzzzzzzzzzzzzzz");
    std::ofstream out(path);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_model(path), FormatError);
  }
}

TEST_CASE("prediction files write 6-decimal scores and distributions") {
  TempDir tmp("slap");
  PredictionRecord fa;
  fa.response_id = "r1";
  fa.part = 5;
  fa.mode = DecodeMode::Soft;
  fa.chunk_scores = {3.5};
  fa.response_score = 3.5;
  fa.chunk_probs = {std::vector<double>(6, 1.0 / 6)};
  PredictionRecord reg;
  reg.response_id = "r2";
  reg.part = 5;
  reg.mode = DecodeMode::Reg;
  reg.chunk_scores = {4.25};
  reg.response_score = 4.25;

  auto path = tmp.file("p.tsv");
  write_predictions(std::vector<PredictionRecord>{fa, reg}, path);
  auto text = slatest::slurp(path);
  CHECK(text.find("r1\t5\tsoft\t3.500000\t0.166667,0.166667,0.166667,"
                  "0.166667,0.166667,0.166667") != std::string::npos);
  CHECK(text.find("r2\t5\treg\t4.250000\t-") != std::string::npos);

  auto back = read_predictions(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].response_score == doctest::Approx(3.5));
  CHECK(back[1].chunk_probs.empty());
}

TEST_CASE("prediction files round-trip at written precision") {
  TempDir tmp("slap");
  SplitMix64 rng(6);
  std::vector<PredictionRecord> records;
  for (int i = 0; i < 100; ++i) {
    PredictionRecord rec;
    rec.response_id = "r" + std::to_string(i);
    rec.part = static_cast<int>(1 + rng.next_below(5));
    if (i % 3 == 2) {
      rec.mode = DecodeMode::Reg;
      rec.response_score = 8.0 * rng.next_double() - 1.0;
    } else {
      rec.mode = i % 3 == 0 ? DecodeMode::Hard : DecodeMode::Soft;
      std::size_t chunks = 1 + rng.next_below(3);
      auto logits = slatest::random_vector(rng, 6, -4.0, 4.0);
      for (std::size_t c = 0; c < chunks; ++c) {
        rec.chunk_probs.push_back(softmax(logits).probs);
      }
      rec.response_score = 1.0 + 5.0 * rng.next_double();
    }
    rec.chunk_scores = {rec.response_score};
    records.push_back(rec);
  }
  auto path_a = tmp.file("a.tsv");
  auto path_b = tmp.file("b.tsv");
  write_predictions(records, path_a);
  auto back = read_predictions(path_a);
  REQUIRE(back.size() == records.size());
  write_predictions(back, path_b);
  CHECK(slatest::files_equal(path_a, path_b));
}

TEST_CASE("calibration files are bit-exact") {
  TempDir tmp("slac");
  CalibrationParams params;
  params.slope = 0.8163265306122449;
  params.intercept = 0.7142857142857144;
  params.fitted_on = "dev:part5";
  params.n_fit = 400;
  auto path = tmp.file("c.txt");
  save_calibration(params, path);
  auto back = load_calibration(path);
  CHECK(back.slope == params.slope);
  CHECK(back.intercept == params.intercept);
  CHECK(back.fitted_on == params.fitted_on);
  CHECK(back.n_fit == params.n_fit);
}

TEST_CASE("format_fixed rounds decimal halves to even") {
  CHECK(format_fixed(0.8915, 3) == "0.892");
  CHECK(format_fixed(0.8925, 3) == "0.892");
  CHECK(format_fixed(0.1235, 3) == "0.124");
  CHECK(format_fixed(0.1245, 3) == "0.124");
  CHECK(format_fixed(1.0, 3) == "1.000");
  CHECK(format_fixed(-0.4565, 3) == "-0.456");
  CHECK(format_fixed(-0.0001, 3) == "0.000");
  CHECK(format_fixed(2.9996, 3) == "3.000");
}
