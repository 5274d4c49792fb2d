#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "qg2rom/errors.hpp"
#include "qg2rom/lstm.hpp"

using namespace qg2rom;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Series of n_t steps per block with n_r coefficients.
CoefficientSeries series(std::size_t n_t, std::size_t n_r, std::size_t n_d = 1,
                         const std::function<double(std::size_t, std::size_t, std::size_t)>& f = {}) {
  CoefficientSeries c;
  for (std::size_t p = 0; p < n_t; ++p) c.times.push_back(0.1 * static_cast<double>(p));
  if (n_d > 1)
    for (std::size_t d = 0; d < n_d; ++d) c.params.push_back({0.1 + 0.2 * static_cast<double>(d)});
  c.coeffs = Matrix(n_r, n_t * n_d);
  for (std::size_t d = 0; d < n_d; ++d)
    for (std::size_t p = 0; p < n_t; ++p)
      for (std::size_t i = 0; i < n_r; ++i)
        c.coeffs(i, d * n_t + p) = f ? f(d, p, i) : static_cast<double>(1000 * d + 10 * p + i);
  return c;
}

LstmConfig small_config(int lookback, int cells = 2, int layers = 1) {
  LstmConfig c;
  c.layers = layers;
  c.cells = cells;
  c.lookback = lookback;
  c.epochs = 3;
  c.batch_size = 4;
  c.seed = 5;
  return c;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Returns the window [newest row first] of the previous-row echo stub.
class EchoPredictor : public CoefficientPredictor {
 public:
  EchoPredictor(int lookback, std::size_t features, std::size_t n) : lookback_(lookback), features_(features), n_(n) {}
  int lookback() const override { return lookback_; }
  std::vector<double> predict(std::span<const double> w) const override {
    return {w.begin() + static_cast<std::ptrdiff_t>(features_ - n_), w.begin() + static_cast<std::ptrdiff_t>(features_)};
  }

 private:
  int lookback_;
  std::size_t features_, n_;
};

}  // namespace

TEST_SUITE("lstm") {
  TEST_CASE("config defaults and validation") {
    const LstmConfig q = LstmConfig::q_defaults(), psi = LstmConfig::psi_defaults();
    CHECK(q.layers == 1);
    CHECK(q.cells == 100);
    CHECK(q.batch_size == 8);
    CHECK(q.epochs == 500);
    CHECK(q.learning_rate == 1e-2);
    CHECK(q.weight_decay == 1e-5);
    CHECK(q.dropout == 0.0);
    CHECK(q.validation_fraction == 0.2);
    CHECK(psi.layers == 3);
    CHECK(psi.cells == 50);
    CHECK(psi.batch_size == 16);
    CHECK(psi.dropout == 0.1);
    for (auto mutate : std::vector<std::function<void(LstmConfig&)>>{
             [](LstmConfig& c) { c.layers = 0; }, [](LstmConfig& c) { c.cells = 0; },
             [](LstmConfig& c) { c.validation_fraction = 1.0; }, [](LstmConfig& c) { c.lookback = 0; },
             [](LstmConfig& c) { c.learning_rate = 0.0; }, [](LstmConfig& c) { c.dropout = 1.0; }}) {
      LstmConfig c;
      mutate(c);
      CHECK_THROWS_AS(c.validate(), ConfigError);
    }
  }

  TEST_CASE("cell forward examples") {
    CellWeights w(1, 1);
    const std::vector<double> x{0.3}, h{0.0}, c0{0.0}, c1{1.0};
    const CellTrace zero = cell_forward(x, h, c0, w);
    CHECK(zero.c[0] == 0.0);
    CHECK(zero.h[0] == 0.0);
    const CellTrace one = cell_forward(x, h, c1, w);
    CHECK(one.i[0] == 0.5);
    CHECK(one.f[0] == 0.5);
    CHECK(one.o[0] == 0.5);
    CHECK(one.g[0] == 0.0);
    CHECK(one.c[0] == 0.5);
    CHECK(one.h[0] == doctest::Approx(0.231059).epsilon(1e-6));
    const std::vector<double> bad{1.0, 2.0};
    CHECK_THROWS_AS(cell_forward(bad, h, c0, w), DomainError);
  }

  TEST_CASE("gates stay in (0,1) and the state update is exact") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-3, 3);
    CellWeights w(4, 3);
    for (double& v : w.w) v = u(rng);
    for (double& v : w.b) v = u(rng);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> x(3), h(4), c(4);
      for (double& v : x) v = u(rng);
      for (double& v : h) v = u(rng);
      for (double& v : c) v = u(rng);
      const CellTrace t = cell_forward(x, h, c, w);
      for (int k = 0; k < 4; ++k) {
        for (double g : {t.i[k], t.f[k], t.o[k]}) {
          CHECK(g > 0.0);
          CHECK(g < 1.0);
        }
        CHECK(t.c[k] == t.f[k] * c[k] + t.i[k] * t.g[k]);
        CHECK(t.h[k] == doctest::Approx(t.o[k] * std::tanh(t.c[k])).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("zero-weight network outputs the head bias") {
    LstmModel m(small_config(3), 3, 2, 0);
    for (auto& layer : m.layers()) {
      std::fill(layer.w.begin(), layer.w.end(), 0.0);
      std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    std::fill(m.head_w().begin(), m.head_w().end(), 0.0);
    m.head_b() = {0.25, -0.75};
    const std::vector<double> window(9, 0.4);
    CHECK(m.forward_scaled(window) == std::vector<double>{0.25, -0.75});
  }

  TEST_CASE("single-cell network matches a hand trace") {
    LstmConfig cfg = small_config(2, 1);
    LstmModel m(cfg, 2, 1, 0);
    // Row layout of w: gates i, f, o, g; columns [h, x0, x1].
    const double w[4][3] = {{0.1, 0.2, -0.3}, {0.4, -0.5, 0.6}, {-0.7, 0.8, 0.9}, {1.0, -1.1, 1.2}};
    const double b[4] = {0.05, -0.1, 0.15, -0.2};
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 3; ++c) m.layers()[0].w[r * 3 + c] = w[r][c];
      m.layers()[0].b[r] = b[r];
    }
    m.head_w() = {1.5};
    m.head_b() = {-0.5};
    // Newest row first: the oldest row (x = 0.3, -0.2) is fed first.
    const std::vector<double> window{0.9, 0.1, 0.3, -0.2};
    double h = 0.0, c = 0.0;
    for (const double* x : {&window[2], &window[0]}) {
      auto pre = [&](int r) { return w[r][0] * h + w[r][1] * x[0] + w[r][2] * x[1] + b[r]; };
      const double i = sigmoid(pre(0)), f = sigmoid(pre(1)), o = sigmoid(pre(2)), g = std::tanh(pre(3));
      c = f * c + i * g;
      h = o * std::tanh(c);
    }
    CHECK(m.forward_scaled(window)[0] == doctest::Approx(1.5 * h - 0.5).epsilon(1e-14));
    const auto a = m.forward_scaled(window), b2 = m.forward_scaled(window);
    CHECK(same_bits(a, b2));
  }

  TEST_CASE("predict needs a fitted scaler") {
    LstmModel m(small_config(2), 2, 1, 0);
    const std::vector<double> window(4, 0.0);
    CHECK_THROWS_AS(m.predict(window), UsageError);
  }

  TEST_CASE("window construction") {
    const WindowDataset d = build_windows(series(5, 2), 2);
    CHECK(d.size() == 3);
    CHECK(d.features == 3);
    CHECK(d.param_dim == 0);
    // First pair: rows p = 1, 0 predicting p = 2.
    CHECK(d.inputs[0] == std::vector<double>{0.1, 10, 11, 0.0, 0, 1});
    CHECK(d.targets[0] == std::vector<double>{20, 21});
    CHECK(d.position[2] == 3);
    CHECK_THROWS_AS(build_windows(series(5, 2), 5), DomainError);

    const WindowDataset two = build_windows(series(12, 1, 2), 10);
    CHECK(two.size() == 4);
    CHECK(two.features == 3);
    for (std::size_t k = 0; k < two.size(); ++k) {
      const double mu = two.inputs[k][0];
      for (std::size_t r = 0; r < 10; ++r) CHECK(two.inputs[k][r * 3] == mu);
      CHECK(two.targets[k][0] >= 1000.0 * static_cast<double>(two.block[k]));
      CHECK(two.targets[k][0] < 1000.0 * static_cast<double>(two.block[k] + 1));
    }
    CHECK(two.block == std::vector<std::size_t>{0, 0, 1, 1});

    CoefficientSeries single = series(6, 1);
    single.params = {{0.3}};
    CHECK(build_windows(single, 2).features == 2);
  }

  TEST_CASE("scaler") {
    WindowDataset d;
    d.features = 2;
    d.lookback = 1;
    d.inputs = {{-2.0, 7.0}, {2.0, 7.0}, {0.5, 7.0}, {100.0, 7.0}};
    const std::vector<std::size_t> train{0, 1, 2};
    const Scaler s = fit_scaler(d, train);
    CHECK(s.apply(0, 2.0) == 1.0);
    CHECK(s.apply(0, -2.0) == -1.0);
    CHECK(s.invert(0, s.apply(0, 0.37)) == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(s.apply(1, 7.0) == 0.0);
    CHECK(s.invert(1, 0.0) == 7.0);
    CHECK_THROWS_AS(fit_scaler(d, std::vector<std::size_t>{}), DomainError);
  }

  TEST_CASE("adam") {
    std::vector<double> p{1.0, -2.0};
    AdamState st;
    const std::vector<double> zero{0.0, 0.0};
    adam_step(p, zero, st, 0.01, 0.0, 1);
    CHECK(p == std::vector<double>{1.0, -2.0});

    std::vector<double> s{0.0};
    AdamState ss;
    const std::vector<double> g{1.0};
    adam_step(s, g, ss, 0.01, 0.0, 1);
    CHECK(s[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));

    std::vector<double> a{0.5}, b{-1.5}, a2{0.5}, b2{-1.5};
    AdamState sa, sb, sa2, sb2;
    const std::vector<double> ga{0.3}, gb{-0.7};
    for (int t = 1; t <= 5; ++t) {
      adam_step(a, ga, sa, 0.01, 1e-3, t);
      adam_step(b, gb, sb, 0.01, 1e-3, t);
      adam_step(b2, gb, sb2, 0.01, 1e-3, t);
      adam_step(a2, ga, sa2, 0.01, 1e-3, t);
    }
    CHECK(a == a2);
    CHECK(b == b2);

    std::vector<double> decay{2.0};
    AdamState sd;
    adam_step(decay, std::vector<double>{0.0}, sd, 0.1, 0.5, 1);
    CHECK(decay[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));
  }

  TEST_CASE("chronological split per block") {
    const WindowDataset d = build_windows(series(15, 1, 2), 5);
    const auto [train_idx, val_idx] = split_pairs(d, 0.2);
    CHECK(train_idx == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 10, 11, 12, 13, 14, 15, 16, 17});
    CHECK(val_idx == std::vector<std::size_t>{8, 9, 18, 19});
  }

  TEST_CASE("gradient check on a 1-layer 2-cell model") {
    LstmModel m(small_config(3), 3, 2, 0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> window(9), target(2);
    for (double& v : window) v = u(rng);
    for (double& v : target) v = u(rng);
    CHECK(gradient_check(m, window, target) <= 1e-5);
  }

  TEST_CASE("zero-weight model bias gradients") {
    LstmModel m(small_config(3), 3, 2, 0);
    for (auto t : m.parameters()) std::fill(t.begin(), t.end(), 0.0);
    const std::vector<double> window{0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9};
    const std::vector<double> target{0.5, -0.25};
    std::vector<std::vector<double>> grads;
    m.loss_and_gradient(window, target, grads);
    auto params = m.parameters();
    for (std::size_t t : {std::size_t{1}, params.size() - 1}) {
      for (std::size_t k = 0; k < params[t].size(); ++k) {
        const double keep = params[t][k];
        const double h = 1e-6;
        std::vector<std::vector<double>> unused;
        params[t][k] = keep + h;
        const double lp = m.loss_and_gradient(window, target, unused);
        params[t][k] = keep - h;
        const double lm = m.loss_and_gradient(window, target, unused);
        params[t][k] = keep;
        CHECK(std::abs((lp - lm) / (2 * h) - grads[t][k]) <= 1e-7);
      }
    }
  }

  TEST_CASE("central difference error scales with the step squared") {
    LstmModel m(small_config(3), 2, 1, 0);
    std::vector<double> window(6, 0.3), target{0.8};
    window[3] = -0.5;
    std::vector<std::vector<double>> grads;
    m.loss_and_gradient(window, target, grads);
    auto params = m.parameters();
    double& w = params[0][0];
    const double keep = w;
    auto fd = [&](double h) {
      std::vector<std::vector<double>> unused;
      w = keep + h;
      const double lp = m.loss_and_gradient(window, target, unused);
      w = keep - h;
      const double lm = m.loss_and_gradient(window, target, unused);
      w = keep;
      return (lp - lm) / (2 * h);
    };
    const double e1 = std::abs(fd(0.02) - grads[0][0]);
    const double e2 = std::abs(fd(0.04) - grads[0][0]);
    CHECK(e2 / e1 == doctest::Approx(4.0).epsilon(0.15));
  }

  TEST_CASE("training learns a constant map") {
    const CoefficientSeries c = series(40, 2, 1, [](std::size_t, std::size_t, std::size_t i) {
      return i == 0 ? 0.7 : -0.3;
    });
    LstmConfig cfg = LstmConfig::q_defaults();
    cfg.cells = 10;
    cfg.lookback = 3;
    cfg.validation_fraction = 0.0;
    const WindowDataset d = build_windows(c, 3);
    const LstmModel m = train(d, cfg);
    REQUIRE(m.log().size() == 500);
    CHECK(m.log().back().train_mse <= 1e-6);
    CHECK(std::isnan(m.log().back().val_mse));
    const std::vector<double> w = seed_window(c, 0, 39, 3, 0);
    const std::vector<double> y = m.predict(w);
    CHECK(y[0] == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(y[1] == doctest::Approx(-0.3).epsilon(1e-6));
  }

  TEST_CASE("training is deterministic") {
    const CoefficientSeries c = series(30, 2, 1, [](std::size_t, std::size_t p, std::size_t i) {
      return std::sin(0.3 * static_cast<double>(p) + static_cast<double>(i));
    });
    LstmConfig cfg = small_config(4, 6, 2);
    cfg.dropout = 0.2;
    cfg.epochs = 5;
    const WindowDataset d = build_windows(c, 4);
    LstmModel a = train(d, cfg), b = train(d, cfg);
    const auto pa = a.parameters(), pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t t = 0; t < pa.size(); ++t) CHECK(same_bits(pa[t], pb[t]));
    cfg.seed += 1;
    LstmModel other = train(d, cfg);
    CHECK_FALSE(same_bits(other.parameters()[0], pa[0]));
  }

  TEST_CASE("non-finite loss is a training error") {
    CoefficientSeries c = series(12, 1);
    c.coeffs(0, 11) = std::numeric_limits<double>::infinity();
    LstmConfig cfg = small_config(2);
    cfg.validation_fraction = 0.0;
    try {
      train(build_windows(c, 2), cfg);
      FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
      CHECK(e.epoch() == 1);
    }
  }

  TEST_CASE("recursive prediction with stubs") {
    const int lookback = 3;
    const CoefficientSeries c = series(6, 2);
    const std::vector<double> seed = seed_window(c, 0, 5, lookback, 0);
    CHECK(seed.size() == 9);
    CHECK(seed[0] == 0.5);  // newest time first
    CHECK(seed[1] == 50.0);

    class Const : public CoefficientPredictor {
     public:
      int lookback() const override { return 3; }
      std::vector<double> predict(std::span<const double>) const override { return {4.0, 2.0}; }
    } constant;
    const PredictedSeries ps = predict_recursive(constant, seed, 3, 0, 4, 0.1);
    CHECK(ps.coeffs.cols() == 4);
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(ps.coeffs(0, s) == 4.0);
      CHECK(ps.coeffs(1, s) == 2.0);
      CHECK(ps.times[s] == doctest::Approx(0.5 + 0.1 * static_cast<double>(s + 1)).epsilon(1e-14));
    }

    const EchoPredictor echo(lookback, 3, 2);
    const PredictedSeries pe = predict_recursive(echo, seed, 3, 0, 5, 0.1);
    for (std::size_t s = 0; s < 5; ++s) {
      CHECK(pe.coeffs(0, s) == 50.0);
      CHECK(pe.coeffs(1, s) == 51.0);
    }
    CHECK_THROWS_AS(predict_recursive(constant, seed, 3, 0, 0, 0.1), DomainError);
    CHECK_THROWS_AS(predict_recursive(constant, std::span(seed).first(8), 3, 0, 2, 0.1), DomainError);
  }

  TEST_CASE("seed window replaces the parameter label") {
    const CoefficientSeries c = series(6, 1, 2);
    const std::vector<double> mu{0.125};
    const std::vector<double> w = seed_window(c, 1, 5, 2, 1, mu);
    CHECK(w == std::vector<double>{0.125, 0.5, 1050.0, 0.125, 0.4, 1040.0});
  }

  TEST_CASE("recursive suffix is reproducible from an intermediate window") {
    const CoefficientSeries c = series(30, 2, 1, [](std::size_t, std::size_t p, std::size_t i) {
      return std::cos(0.2 * static_cast<double>(p) * static_cast<double>(i + 1));
    });
    LstmConfig cfg = small_config(4, 5);
    const LstmModel m = train(build_windows(c, 4), cfg);
    const std::vector<double> seed = seed_window(c, 0, 29, 4, 0);
    const PredictedSeries full = predict_recursive(m, seed, 3, 0, 10, 0.1);
    // Window after six predictions, rebuilt from the outputs.
    std::vector<double> mid;
    for (int r = 0; r < 4; ++r) {
      const std::size_t s = static_cast<std::size_t>(5 - r);
      mid.push_back(full.times[s]);
      mid.push_back(full.coeffs(0, s));
      mid.push_back(full.coeffs(1, s));
    }
    const PredictedSeries tail = predict_recursive(m, mid, 3, 0, 4, 0.1);
    for (std::size_t s = 0; s < 4; ++s) {
      CHECK(tail.coeffs(0, s) == full.coeffs(0, s + 6));
      CHECK(tail.coeffs(1, s) == full.coeffs(1, s + 6));
    }
  }

  TEST_CASE("model persistence") {
    const auto dir = oracle::temp_dir("lstm_io");
    const CoefficientSeries c = series(20, 3, 2, [](std::size_t d, std::size_t p, std::size_t i) {
      return std::sin(0.1 * static_cast<double>(p + d) + static_cast<double>(i));
    });
    LstmConfig cfg = small_config(3, 4, 2);
    const LstmModel m = train(build_windows(c, 3), cfg);
    m.save(dir / "m.json");
    CHECK(std::filesystem::exists(dir / "m.weights.bin"));
    const LstmModel r = LstmModel::load(dir / "m.json");
    CHECK(r.param_dim() == 1);
    CHECK(r.features() == 5);
    const auto pa = m.parameters(), pb = r.parameters();
    for (std::size_t t = 0; t < pa.size(); ++t) CHECK(same_bits(pa[t], pb[t]));
    const std::vector<double> w = seed_window(c, 1, 19, 3, 1);
    CHECK(same_bits(m.predict(w), r.predict(w)));

    write_loss_csv(m.log(), dir / "loss.csv");
    std::ifstream in(dir / "loss.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,train_mse,val_mse");
    CHECK_THROWS(LstmModel::load(dir / "missing.json"));
  }
}
