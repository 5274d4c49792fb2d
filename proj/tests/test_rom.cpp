#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "qg2rom/errors.hpp"
#include "qg2rom/metrics.hpp"
#include "qg2rom/rom.hpp"

using namespace qg2rom;

namespace {

const GridSpec kSpec{4, 3};

// n columns of a smooth, slowly varying field on kSpec with times 0.1 p.
SnapshotSet synthetic(std::size_t n, FieldId id = FieldId::q1, double offset = 0.0) {
  const Grid g(kSpec);
  SnapshotSet s;
  s.field = id;
  s.grid = kSpec;
  s.data = Matrix(g.size(), n);
  for (std::size_t p = 0; p < n; ++p) {
    const double t = 0.1 * static_cast<double>(p);
    s.times.push_back(t);
    const Field f = Field::from_function(g, [&](double x, double y) {
      return offset + std::sin(3 * x + t) * y + 0.3 * std::cos(2 * y - 0.7 * t) + 0.1 * std::sin(5 * t) * x * x;
    });
    std::copy(f.values().begin(), f.values().end(), s.data.col(p).begin());
  }
  return s;
}

SnapshotSet head(const SnapshotSet& s, std::size_t n) {
  SnapshotSet out = s;
  out.times.resize(n);
  out.data = s.data.cols_range(0, n);
  return out;
}

FieldModel model_for(const SnapshotSet& train, std::size_t rank,
                     std::shared_ptr<const CoefficientPredictor> predictor) {
  PodRequest req;
  req.rank = rank;
  FieldModel fm;
  fm.basis = build_basis(train, req);
  fm.coeffs = modal_coefficients(fm.basis, train);
  fm.predictor = std::move(predictor);
  return fm;
}

Field column(const SnapshotSet& s, std::size_t c) {
  const auto v = s.data.col(c);
  return Field(Grid(s.grid), std::vector<double>(v.begin(), v.end()));
}

Field projection(const PodBasis& b, const Field& f) {
  Matrix fl(f.size(), 1);
  for (std::size_t k = 0; k < f.size(); ++k) fl(k, 0) = f[k] - b.means[0].value[k];
  const Matrix a = project(b.modes, fl);
  return reconstruct(b.means[0].value, b.modes, a.col(0));
}

}  // namespace

TEST_SUITE("rom") {
  TEST_CASE("nearest sample") {
    const std::vector<std::vector<double>> s{{0.1}, {0.3}, {0.5}, {0.7}, {0.9}};
    CHECK(nearest_sample(std::vector<double>{0.125}, s) == 0);
    CHECK(nearest_sample(std::vector<double>{0.7}, s) == 3);
    CHECK(nearest_sample(std::vector<double>{0.2}, s) == 0);
    CHECK(nearest_sample(std::vector<double>{0.4}, s) == 1);
    CHECK(nearest_sample(std::vector<double>{5.0}, s) == 4);
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(nearest_sample(s[k], s) == k);
    CHECK_THROWS_AS(nearest_sample(std::vector<double>{0.1, 0.2}, s), DomainError);
    CHECK_THROWS_AS(nearest_sample(std::vector<double>{0.1}, {}), DomainError);

    const std::vector<std::vector<double>> two{{0.0, 1.0}, {1.0, 0.0}};
    CHECK(nearest_sample(std::vector<double>{0.5, 0.5}, two) == 0);
    const std::vector<std::vector<double>> two_rev{{1.0, 0.0}, {0.0, 1.0}};
    CHECK(nearest_sample(std::vector<double>{0.5, 0.5}, two_rev) == 1);
  }

  TEST_CASE("nearest sample ignores ordering") {
    std::vector<std::vector<double>> s{{0.1}, {0.3}, {0.5}, {0.7}, {0.9}};
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    for (int trial = 0; trial < 30; ++trial) {
      const std::vector<double> mu{u(rng)};
      const std::vector<double> want = s[nearest_sample(mu, s)];
      auto shuffled = s;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      CHECK(shuffled[nearest_sample(mu, shuffled)] == want);
    }
    auto rev = s;
    std::reverse(rev.begin(), rev.end());
    CHECK(rev[nearest_sample(std::vector<double>{0.2}, rev)] == std::vector<double>{0.1});
  }

  TEST_CASE("sampling hull") {
    const std::vector<std::vector<double>> s{{0.1}, {0.9}};
    CHECK_FALSE(outside_sampling_hull(std::vector<double>{0.5}, s));
    CHECK_FALSE(outside_sampling_hull(std::vector<double>{0.9}, s));
    CHECK(outside_sampling_hull(std::vector<double>{0.05}, s));
    CHECK(outside_sampling_hull(std::vector<double>{1.2}, s));
  }

  TEST_CASE("zero predictor returns the mean field") {
    const SnapshotSet s = synthetic(20);
    RomArtifacts art;
    art.fields[0] = model_for(s, 3, std::make_shared<ConstantPredictor>(std::vector<double>(3, 0.0), 4));
    OnlineRequest req;
    req.t_start = s.times.back();
    req.t_end = req.t_start + 0.7;
    req.increment = 0.1;
    req.keep_fields = true;
    const std::array<FieldId, 1> only{FieldId::q1};
    const OnlineResult r = online(art, req, only);
    const FieldPrediction& p = *r.fields[0];
    CHECK(p.times.size() == 7);
    CHECK(p.coeffs.cols() == 7);
    CHECK(p.fields.size() == 7);
    CHECK(p.times.front() == doctest::Approx(s.times.back() + 0.1));
    const Field& mean = art.at(FieldId::q1).basis.means[0].value;
    for (const Field& f : p.fields)
      for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] == mean[k]);
    for (std::size_t k = 0; k < mean.size(); ++k) CHECK(p.time_average[k] == mean[k]);
    CHECK(p.energy[3] == doctest::Approx(enstrophy(mean)).epsilon(1e-14));
    CHECK_FALSE(r.fields[1].has_value());

    req.t_start = s.times.back() + 0.2;
    req.t_end = req.t_start + 0.3;
    const OnlineResult later = online(art, req, only);
    CHECK(later.fields[0]->times.size() == 3);
    CHECK(later.fields[0]->times.front() == doctest::Approx(req.t_start + 0.1));

    req.t_start = s.times.back() - 0.5;
    CHECK_THROWS_AS(online(art, req, only), UsageError);
    req.t_start = s.times.back();
    const std::array<FieldId, 1> missing{FieldId::psi2};
    CHECK_THROWS_AS(online(art, req, missing), UsageError);
    req.mu = {0.3};
    CHECK_THROWS_AS(online(art, req, only), DomainError);
  }

  TEST_CASE("injected true coefficients reproduce the POD projection") {
    const SnapshotSet all = synthetic(30);
    const SnapshotSet train = head(all, 20);
    FieldModel fm = model_for(train, 3, nullptr);
    CoefficientSeries truth = fm.coeffs;
    truth.times = all.times;
    PodBasis b = fm.basis;
    truth.coeffs = modal_coefficients(b, all).coeffs;
    fm.predictor = std::make_shared<SeriesLookupPredictor>(truth, 0, 5, 0);

    // Training interval.
    const FieldPrediction tf = teacher_forced(fm, 0, true);
    REQUIRE(tf.fields.size() == 15);
    for (std::size_t s = 0; s < 15; ++s) {
      const Field ref = column(train, s + 5);
      const Field proj = projection(b, ref);
      CHECK(std::abs(rel_l2(ref, tf.fields[s]) - rel_l2(ref, proj)) <= 1e-10);
      CHECK(tf.times[s] == train.times[s + 5]);
    }

    // Continuation.
    RomArtifacts art;
    art.fields[0] = fm;
    OnlineRequest req;
    req.t_start = train.times.back();
    req.t_end = all.times.back();
    req.increment = 0.1;
    req.keep_fields = true;
    const std::array<FieldId, 1> only{FieldId::q1};
    const FieldPrediction p = *online(art, req, only).fields[0];
    REQUIRE(p.fields.size() == 10);
    for (std::size_t s = 0; s < 10; ++s) {
      const Field ref = column(all, 20 + s);
      const Field proj = projection(b, ref);
      for (std::size_t k = 0; k < ref.size(); ++k) CHECK(p.fields[s][k] == doctest::Approx(proj[k]).epsilon(1e-12));
    }
  }

  TEST_CASE("seeding at an unseen parameter uses the nearest block") {
    SnapshotSet a = synthetic(12, FieldId::psi1, 0.0), b = synthetic(12, FieldId::psi1, 2.0);
    a.params = {{0.1}};
    b.params = {{0.3}};
    const SnapshotSet set = concatenate_blocks({a, b});
    RomArtifacts art;
    art.samples = {{0.1}, {0.3}};
    FieldModel fm = model_for(set, 2, std::make_shared<ConstantPredictor>(std::vector<double>(2, 0.0), 3));
    fm.param_dim = 1;
    art.fields[2] = fm;
    OnlineRequest req;
    req.mu = {0.26};
    req.t_start = set.times.back();
    req.t_end = req.t_start + 0.2;
    req.increment = 0.1;
    const std::array<FieldId, 1> only{FieldId::psi1};
    const OnlineResult r = online(art, req, only);
    CHECK(r.block == 1);
    CHECK(r.mu_c == std::vector<double>{0.3});
    CHECK_FALSE(r.outside_hull);
    const Field& m1 = fm.basis.means[1].value;
    for (std::size_t k = 0; k < m1.size(); ++k) CHECK(r.fields[2]->time_average[k] == m1[k]);
    CHECK(r.fields[2]->energy[0] == doctest::Approx(kinetic_energy(m1)).epsilon(1e-14));
    req.mu = {1.5};
    CHECK(online(art, req, only).outside_hull);
  }

  TEST_CASE("stream function from vorticity coefficients") {
    const Grid g(kSpec);
    const Field psi_mean = Field::from_function(g, [](double x, double y) { return x * y; });
    Matrix xi(g.size(), 1);
    for (std::size_t k = 0; k < g.size(); ++k) xi(k, 0) = 0.01 * static_cast<double>(k + 1);

    FieldPrediction q;
    q.field = FieldId::q1;
    q.times = {1.0, 1.1};
    q.coeffs = Matrix(1, 2);
    q.coeffs(0, 1) = 1.0;
    const FieldPrediction psi = remark1_stream(q, xi, psi_mean, FieldId::psi1, true);
    CHECK(psi.field == FieldId::psi1);
    CHECK(psi.times == q.times);
    for (std::size_t k = 0; k < g.size(); ++k) {
      CHECK(psi.fields[0][k] == psi_mean[k]);
      CHECK(psi.fields[1][k] == psi_mean[k] + xi(k, 0));
    }
    CHECK(psi.energy[0] == doctest::Approx(kinetic_energy(psi_mean)).epsilon(1e-14));
    CHECK_THROWS_AS(remark1_stream(q, Matrix(), psi_mean, FieldId::psi1), UsageError);
    CHECK_THROWS_AS(remark1_stream(q, Matrix(g.size(), 2), psi_mean, FieldId::psi1), DomainError);
  }

  TEST_CASE("field energy dispatch") {
    const Grid g(kSpec);
    const Field f = Field::from_function(g, [](double x, double) { return x; });
    CHECK(field_energy(FieldId::q2, f) == enstrophy(f));
    CHECK(field_energy(FieldId::psi2, f) == kinetic_energy(f));
  }
}
