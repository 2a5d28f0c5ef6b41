#include <cmath>
#include <vector>

#include "catch_amalgamated.hpp"
#include "horq/perf_model.hpp"

using namespace horq;

namespace {

/// Same ratio derived without cancelling the output-position count: both
/// operation tallies scale by the positions, so any P must give the model.
double ratio_with_positions(const SpeedupQuery& q, double positions) {
  const double np = static_cast<double>(q.c_out) * static_cast<double>(q.c_in) *
                    static_cast<double>(q.w) * static_cast<double>(q.h) * positions;
  const double nn = positions;
  const double ww = static_cast<double>(q.word_width);
  const double k = static_cast<double>(q.order);
  return ww * np / (k * np + ww * (k + 1.0) * nn);
}

}  // namespace

TEST_CASE("speedup anchor configuration") {
  const SpeedupQuery q{64, 256, 3, 3, 2, 64};
  CHECK_THAT(speedup_ratio(q), Catch::Matchers::WithinAbs(31.97918022, 1e-6));
  SpeedupQuery k1 = q;
  k1.order = 1;
  CHECK_THAT(speedup_ratio(k1), Catch::Matchers::WithinAbs(63.94449263, 1e-6));
}

TEST_CASE("speedup matches the uncancelled derivation") {
  const std::vector<SpeedupQuery> queries{
      {64, 256, 3, 3, 2, 64}, {3, 10, 5, 5, 1, 64}, {17, 9, 3, 1, 4, 32},
      {256, 512, 7, 7, 3, 64}};
  for (const SpeedupQuery& q : queries) {
    const double eta = speedup_ratio(q);
    for (double positions : {1.0, 7.0, 900.0})
      CHECK_THAT(ratio_with_positions(q, positions),
                 Catch::Matchers::WithinRel(eta, 1e-12));
  }
}

TEST_CASE("speedup approaches word_width over order for large layers") {
  for (std::size_t k = 1; k <= 4; ++k) {
    const SpeedupQuery q{1000, 1000, 4, 4, k, 64};
    CHECK_THAT(speedup_ratio(q), Catch::Matchers::WithinAbs(64.0 / k, 0.1));
  }
}

TEST_CASE("speedup decreases in order and grows with layer size") {
  const std::vector<SweepRow> rows = sweep_order({64, 256, 3, 3, 1, 64}, 8);
  REQUIRE(rows.size() == 8);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].value == i + 1);
    if (i > 0) REQUIRE(rows[i].eta < rows[i - 1].eta);
  }
  const std::vector<double> frozen{63.94449263, 31.97918022, 21.32099479, 15.99132415};
  for (std::size_t i = 0; i < frozen.size(); ++i)
    CHECK_THAT(rows[i].eta, Catch::Matchers::WithinAbs(frozen[i], 1e-6));

  CHECK(speedup_ratio({128, 256, 3, 3, 2, 64}) > speedup_ratio({64, 256, 3, 3, 2, 64}));
}

TEST_CASE("filter sweep fixes the channels") {
  const std::vector<std::size_t> sides{1, 2, 3, 5, 9};
  const std::vector<SweepRow> rows = sweep_filter(sides, 2);
  REQUIRE(rows.size() == sides.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].value == sides[i]);
    CHECK_THAT(rows[i].eta,
               Catch::Matchers::WithinRel(
                   speedup_ratio({10, 10, sides[i], sides[i], 2, 64}), 1e-12));
    if (i > 0) REQUIRE(rows[i].eta > rows[i - 1].eta);
  }
}

TEST_CASE("channel sweep fixes the filter") {
  const std::vector<std::size_t> c_outs{8, 64, 512};
  const std::vector<SweepRow> rows = sweep_channels(c_outs, 1, 32);
  REQUIRE(rows.size() == c_outs.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(rows[i].value == c_outs[i]);
    CHECK_THAT(rows[i].eta,
               Catch::Matchers::WithinRel(speedup_ratio({3, c_outs[i], 3, 3, 1, 32}),
                                          1e-12));
    if (i > 0) REQUIRE(rows[i].eta > rows[i - 1].eta);
  }
}

TEST_CASE("speedup model rejects degenerate queries") {
  REQUIRE_THROWS_AS(speedup_ratio({0, 256, 3, 3, 1, 64}), DomainError);
  REQUIRE_THROWS_AS(speedup_ratio({64, 0, 3, 3, 1, 64}), DomainError);
  REQUIRE_THROWS_AS(speedup_ratio({64, 256, 0, 3, 1, 64}), DomainError);
  REQUIRE_THROWS_AS(speedup_ratio({64, 256, 3, 0, 1, 64}), DomainError);
  REQUIRE_THROWS_AS(speedup_ratio({64, 256, 3, 3, 0, 64}), DomainError);
  REQUIRE_THROWS_AS(speedup_ratio({64, 256, 3, 3, 1, 0}), DomainError);
  REQUIRE_THROWS_AS(sweep_order({64, 256, 3, 3, 1, 64}, 0), DomainError);
  REQUIRE_THROWS_AS(sweep_filter({}, 1), DomainError);
  REQUIRE_THROWS_AS(sweep_channels({}, 1), DomainError);
}

TEST_CASE("storage model on the reference layer") {
  const std::vector<LayerStorage> layers{{256, 1152, true}};
  const StorageReport rep = storage_model(layers);
  CHECK(rep.float_bytes == 4ull * 256 * 1152);
  CHECK(rep.binary_bytes == (256ull * 1152) / 8 + 4 * 256);
  CHECK_THAT(rep.ratio, Catch::Matchers::WithinAbs(31.13513514, 1e-6));
  CHECK(rep.ratio > 31.0);
  CHECK(rep.ratio < 32.0);
}

TEST_CASE("storage model hand cases") {
  SECTION("nothing binarized costs the same on both sides") {
    const std::vector<LayerStorage> layers{{8, 8, false}, {3, 7, false}};
    const StorageReport rep = storage_model(layers);
    CHECK(rep.float_bytes == rep.binary_bytes);
    CHECK(rep.ratio == 1.0);
  }

  SECTION("bit counts round up per layer") {
    const std::vector<LayerStorage> layers{{3, 3, true}};
    const StorageReport rep = storage_model(layers);
    CHECK(rep.float_bytes == 36);
    CHECK(rep.binary_bytes == 2 + 12);
  }

  SECTION("mixed layers add up") {
    const std::vector<LayerStorage> layers{{4, 16, true}, {2, 5, false}};
    const StorageReport rep = storage_model(layers);
    CHECK(rep.float_bytes == 256 + 40);
    CHECK(rep.binary_bytes == (8 + 16) + 40);
  }

  SECTION("ratio approaches 32 for wide binarized layers") {
    const std::vector<LayerStorage> layers{{1, 100000000, true}};
    CHECK(storage_model(layers).ratio > 31.99);
  }

  SECTION("float side counts four bytes per parameter") {
    const std::vector<LayerStorage> layers{{1000, 138000, false}};
    CHECK(storage_model(layers).float_bytes == 552000000ull);
  }
}

TEST_CASE("storage model rejects degenerate layers") {
  REQUIRE_THROWS_AS(storage_model({}), DomainError);
  const std::vector<LayerStorage> zero_rows{{0, 8, true}};
  REQUIRE_THROWS_AS(storage_model(zero_rows), DomainError);
  const std::vector<LayerStorage> zero_cols{{8, 0, true}};
  REQUIRE_THROWS_AS(storage_model(zero_cols), DomainError);
}

TEST_CASE("gemm benchmark produces coherent timings") {
  const BenchResult res = bench_gemm(128, 64, 128, 2, 3, 9);
  CHECK(res.m == 128);
  CHECK(res.n == 64);
  CHECK(res.k == 128);
  CHECK(res.order == 2);
  CHECK(res.reps == 3);
  CHECK(res.float_ms > 0.0);
  CHECK(res.binary_ms > 0.0);
  CHECK(res.quantize_ms > 0.0);
  CHECK(res.measured_ratio > 0.0);
  CHECK(std::isfinite(res.measured_ratio));
  CHECK_THAT(res.predicted_ratio,
             Catch::Matchers::WithinRel(
                 speedup_ratio({1, 128, 1, 128, 2, 64}), 1e-12));
}

TEST_CASE("gemm benchmark rejects degenerate sizes") {
  REQUIRE_THROWS_AS(bench_gemm(0, 8, 8, 1, 1), DomainError);
  REQUIRE_THROWS_AS(bench_gemm(8, 0, 8, 1, 1), DomainError);
  REQUIRE_THROWS_AS(bench_gemm(8, 8, 0, 1, 1), DomainError);
  REQUIRE_THROWS_AS(bench_gemm(8, 8, 8, 0, 1), DomainError);
  REQUIRE_THROWS_AS(bench_gemm(8, 8, 8, 1, 0), DomainError);
}
