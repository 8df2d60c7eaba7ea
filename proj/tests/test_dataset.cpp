#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "cspcr/dataset.hpp"

using namespace cspcr;

namespace {

SourceDataset make_dataset(int n, int p, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<LabeledSample> rows;
  for (int i = 0; i < n; ++i) {
    LabeledSample s;
    s.y = g(rng);
    s.x = g(rng);
    s.z.resize(p);
    s.v.resize(d);
    for (auto& z : s.z) z = g(rng);
    for (auto& v : s.v) v = g(rng);
    rows.push_back(std::move(s));
  }
  return SourceDataset::from_rows(rows);
}

// Multiset of rows keyed by their full contents.
std::multiset<std::vector<double>> row_multiset(const SourceDataset& d) {
  std::multiset<std::vector<double>> out;
  for (int i = 0; i < d.n(); ++i) {
    std::vector<double> key{d.y()[i], d.x()[i]};
    for (int k = 0; k < d.zdim(); ++k) key.push_back(d.z()(i, k));
    for (int k = 0; k < d.vdim(); ++k) key.push_back(d.v()(i, k));
    out.insert(std::move(key));
  }
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("validate passes well-formed rows through unchanged") {
  SourceDataset d = make_dataset(3, 2, 1, 7);
  const SourceDataset& same = validate_dataset(d);
  CHECK(&same == &d);
  CHECK(same.n() == 3);
}

TEST_CASE("validate reports the first offending row and field") {
  std::vector<LabeledSample> rows;
  for (int i = 0; i < 4; ++i)
    rows.push_back({1.0, 0.0, {0.5, 0.5}, {0.25}});
  rows[2].v[0] = std::numeric_limits<double>::quiet_NaN();
  SourceDataset d = SourceDataset::from_rows(rows);
  try {
    validate_dataset(d);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.kind == ValidationError::Kind::non_finite);
    CHECK(e.row == 2);
    CHECK(e.field == "v[0]");
  }
}

TEST_CASE("validate rejects the empty dataset") {
  SourceDataset d;
  try {
    validate_dataset(d);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.kind == ValidationError::Kind::empty);
  }
}

TEST_CASE("split produces the rounded sizes") {
  SourceDataset d10 = make_dataset(10, 2, 1, 1);
  auto [a, b] = split_dataset(d10, 0.5, 99);
  CHECK(a.n() == 5);
  CHECK(b.n() == 5);

  // 1131 rows at 50% gives the 565/566 split used in practice.
  SourceDataset big = make_dataset(1131, 1, 1, 2);
  auto [ba, bb] = split_dataset(big, 0.5, 99);
  CHECK((ba.n() == 565 || ba.n() == 566));
  CHECK(ba.n() + bb.n() == 1131);
}

TEST_CASE("split is deterministic given the seed") {
  SourceDataset d = make_dataset(40, 3, 2, 11);
  auto [a1, b1] = split_dataset(d, 0.3, 1234);
  auto [a2, b2] = split_dataset(d, 0.3, 1234);
  CHECK(a1.y() == a2.y());
  CHECK(b1.y() == b2.y());
  auto [a3, b3] = split_dataset(d, 0.3, 1235);
  CHECK(a1.y() != a3.y());
}

TEST_CASE("split rejects fractions that empty a part") {
  SourceDataset d = make_dataset(4, 1, 1, 3);
  CHECK_THROWS_AS(split_dataset(d, 0.01, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(d, 0.999, 1), ValidationError);
}

TEST_CASE("validate + split + concatenate preserves the row multiset") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SourceDataset d = make_dataset(37, 2, 2, 100 + seed);
    validate_dataset(d);
    auto [a, b] = split_dataset(d, 0.4, seed);
    auto combined = row_multiset(a);
    for (auto& key : row_multiset(b)) combined.insert(key);
    CHECK(combined == row_multiset(d));
  }
}

TEST_CASE("config validation enforces K, L, alpha and m_resample") {
  TestConfig c;
  c.K = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TestConfig{};
  c.L = 1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TestConfig{};
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = TestConfig{};
  c.method = Method::is;
  c.m_resample = 200;
  CHECK_THROWS_AS(c.validate(100), ValidationError);
  c.m_resample = 50;
  CHECK_NOTHROW(c.validate(100));
  CHECK(TestConfig{}.counterfeit_count() == 149);
}

TEST_SUITE_END();
