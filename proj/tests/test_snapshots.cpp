#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/io.hpp"
#include "qg2rom/snapshots.hpp"

using namespace qg2rom;

namespace {

SnapshotSet make_set(const std::vector<std::vector<double>>& cols, GridSpec spec) {
  SnapshotSet s;
  s.grid = spec;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    s.times.push_back(static_cast<double>(c));
    s.data.append_col(cols[c]);
  }
  return s;
}

SnapshotSet random_set(std::size_t rows, std::size_t n_t, std::size_t n_d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  SnapshotSet s;
  s.field = FieldId::psi2;
  s.grid = GridSpec{static_cast<int>(rows), 1};
  for (std::size_t p = 0; p < n_t; ++p) s.times.push_back(0.5 + 0.25 * static_cast<double>(p));
  if (n_d > 1) {
    for (std::size_t d = 0; d < n_d; ++d) s.params.push_back({0.1 + 0.2 * static_cast<double>(d), -1.0});
  }
  s.data = Matrix(rows, n_t * n_d);
  for (double& v : s.data.data()) v = n01(rng);
  return s;
}

bool bit_equal(const SnapshotSet& a, const SnapshotSet& b) {
  auto same = [](std::span<const double> x, std::span<const double> y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  };
  if (!same(a.times, b.times) || !same(a.data.data(), b.data.data())) return false;
  if (a.params.size() != b.params.size()) return false;
  for (std::size_t d = 0; d < a.params.size(); ++d)
    if (!same(a.params[d], b.params[d])) return false;
  return a.field == b.field && a.grid == b.grid && a.data.rows() == b.data.rows();
}

}  // namespace

TEST_SUITE("snapshots") {
  TEST_CASE("field names") {
    for (FieldId id : kAllFields) CHECK(field_from_string(to_string(id)) == id);
    CHECK(to_string(FieldId::psi1) == "psi1");
    CHECK_THROWS_AS(field_from_string("q3"), ConfigError);
  }

  TEST_CASE("time average examples") {
    const GridSpec g{4, 1};
    const TimeAverage one = time_average(make_set({{1, 2, 3, 4}}, g));
    CHECK(std::vector<double>(one.value.values().begin(), one.value.values().end()) == std::vector<double>{1, 2, 3, 4});

    const TimeAverage cancel = time_average(make_set({{1, -2, 3, 0.5}, {-1, 2, -3, -0.5}}, g));
    for (double v : cancel.value.values()) CHECK(v == 0.0);

    const TimeAverage m = time_average(make_set({{1, 2, 2, 2}, {3, 2, 0, 2}, {2, 2, 1, 2}}, g));
    const double expect[] = {2, 2, 1, 2};
    for (int k = 0; k < 4; ++k) CHECK(m.value[k] == doctest::Approx(expect[k]));

    SnapshotSet empty;
    empty.grid = g;
    CHECK_THROWS_AS(time_average(empty), DomainError);
    CHECK_THROWS_AS(time_average(make_set({{1, 2, 3, 4}}, g), 1), DomainError);
  }

  TEST_CASE("time average is invariant under column permutation") {
    SnapshotSet a = random_set(9, 6, 1, 3);
    SnapshotSet b = a;
    const int perm[] = {3, 0, 5, 1, 4, 2};
    for (std::size_t c = 0; c < 6; ++c) {
      auto src = a.data.col(static_cast<std::size_t>(perm[c]));
      std::copy(src.begin(), src.end(), b.data.col(c).begin());
    }
    const TimeAverage ma = time_average(a), mb = time_average(b);
    for (std::size_t k = 0; k < 9; ++k) CHECK(ma.value[k] == doctest::Approx(mb.value[k]).epsilon(1e-14));
  }

  TEST_CASE("fluctuation examples") {
    const GridSpec g{2, 1};
    const Matrix f = fluctuations(make_set({{1, 3}, {3, 1}}, g));
    CHECK(f(0, 0) == -1.0);
    CHECK(f(1, 0) == 1.0);
    CHECK(f(0, 1) == 1.0);
    CHECK(f(1, 1) == -1.0);

    const Matrix z = fluctuations(make_set({{5, 6}, {5, 6}, {5, 6}}, g));
    for (double v : z.data()) CHECK(v == 0.0);
  }

  TEST_CASE("fluctuations have zero row sums per block") {
    const SnapshotSet s = random_set(20, 7, 3, 8);
    const Matrix f = fluctuations(s);
    for (std::size_t d = 0; d < 3; ++d) {
      for (std::size_t r = 0; r < 20; ++r) {
        double sum = 0.0;
        for (std::size_t p = 0; p < 7; ++p) sum += f(r, d * 7 + p);
        CHECK(std::abs(sum) < 1e-12);
      }
    }
    std::vector<TimeAverage> wrong = time_averages(s);
    wrong.pop_back();
    CHECK_THROWS_AS(fluctuations(s, wrong), DomainError);
  }

  TEST_CASE("validation of invariants") {
    SnapshotSet s = random_set(4, 3, 1, 1);
    CHECK_NOTHROW(s.validate());
    SnapshotSet bad_times = s;
    bad_times.times[2] = bad_times.times[1];
    CHECK_THROWS_AS(bad_times.validate(), DomainError);
    SnapshotSet bad_value = s;
    bad_value.data(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(bad_value.validate(), DomainError);
    SnapshotSet bad_rows = s;
    bad_rows.grid = GridSpec{5, 1};
    CHECK_THROWS_AS(bad_rows.validate(), DomainError);
  }

  TEST_CASE("save and load are bit exact") {
    const auto dir = oracle::temp_dir("snap_roundtrip");
    for (std::size_t n_d : {1u, 3u}) {
      const SnapshotSet s = random_set(4, 3, n_d, 17 + static_cast<unsigned>(n_d));
      const auto path = dir / ("s" + std::to_string(n_d) + ".qgs");
      save(s, path, R"({"note": "x"})");
      CHECK(std::filesystem::exists(dir / ("s" + std::to_string(n_d) + ".meta.json")));
      const SnapshotSet r = load(path);
      CHECK(bit_equal(s, r));
    }
  }

  TEST_CASE("container layout") {
    const SnapshotSet s = random_set(4, 3, 1, 2);
    const auto bytes = encode(s);
    CHECK(bytes.size() == 8 + 4 * 8 + 3 * 8 + 12 * 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "QGSNAP01");
    // N^d = 1 and param_dim = 0 for a time-only set.
    CHECK(bytes[8 + 16] == 1);
    CHECK(bytes[8 + 24] == 0);
    const SnapshotSet d = decode(bytes);
    CHECK(d.times == s.times);
  }

  TEST_CASE("format errors name the failing part") {
    const SnapshotSet s = random_set(4, 3, 2, 2);
    auto bytes = encode(s);
    auto message = [](std::span<const unsigned char> b) {
      try {
        decode(b);
      } catch (const FormatError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message(std::span(bytes).first(bytes.size() - 3)).find("matrix payload") != std::string::npos);
    CHECK(message(std::span(bytes).first(20)).find("header") != std::string::npos);
    CHECK(message(std::span(bytes).first(8 + 32 + 8)).find("times") != std::string::npos);
    CHECK(message(std::span(bytes).first(8 + 32 + 24 + 8)).find("parameter vectors") != std::string::npos);
    auto extra = bytes;
    extra.push_back(0);
    CHECK(message(extra).find("trailing bytes") != std::string::npos);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(message(magic).find("magic") != std::string::npos);

    const auto dir = oracle::temp_dir("snap_bad");
    write_file_bytes(dir / "t.qgs", std::span(bytes).first(bytes.size() - 8));
    std::ofstream(dir / "t.meta.json") << "{}";
    try {
      load(dir / "t.qgs");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("matrix payload") != std::string::npos);
      CHECK(e.offset() > 0);
    }
    write_file_bytes(dir / "u.qgs", bytes);
    CHECK_THROWS_AS(load(dir / "u.qgs"), IoError);
    std::ofstream(dir / "u.meta.json") << "{}";
    try {
      load(dir / "u.qgs");
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("sidecar") != std::string::npos);
    }
    CHECK_THROWS_AS(load(dir / "none.qgs"), IoError);
  }

  TEST_CASE("concatenated blocks form a parametric set") {
    SnapshotSet a = random_set(5, 4, 1, 1), b = random_set(5, 4, 1, 2);
    a.params = {{0.1}};
    b.params = {{0.3}};
    const SnapshotSet c = concatenate_blocks({a, b});
    CHECK(c.n_d() == 2);
    CHECK(c.n_s() == 8);
    CHECK(c.data(2, 5) == b.data(2, 1));
    SnapshotSet single = random_set(5, 4, 1, 3);
    const SnapshotSet same = concatenate_blocks({single});
    CHECK(same.params.empty());
    CHECK(same.data == single.data);
  }

  TEST_CASE("collector records every field") {
    Grid g(GridSpec{3, 2});
    SnapshotCollector col(g.spec(), PhysParams{}, {0.5});
    State s = State::rest(g, 0.0);
    col(s);
    s.t = 0.1;
    s.psi2[3] = 7.0;
    col(s);
    CHECK(col.set(FieldId::q2).n_t() == 2);
    CHECK(col.set(FieldId::psi2).data(3, 1) == 7.0);
    CHECK(col.set(FieldId::q1).params == std::vector<std::vector<double>>{{0.5}});
    CHECK(col.set(FieldId::q1).times == std::vector<double>{0.0, 0.1});
  }

  TEST_CASE("column export") {
    const auto dir = oracle::temp_dir("snap_csv");
    const SnapshotSet s = random_set(4, 2, 1, 4);
    export_column_csv(s, 1, dir / "c.csv");
    const CsvTable t = read_csv(dir / "c.csv");
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[2][2] == s.data(2, 1));
  }
}
