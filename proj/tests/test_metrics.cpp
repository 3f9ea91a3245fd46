#include <doctest.h>

#include <cmath>

#include "freqattack/errors.hpp"
#include "freqattack/metrics.hpp"
#include "support.hpp"

using namespace freqattack;
using namespace testsupport;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

// Direct windowed SSIM: Gaussian weights evaluated per window position.
double brute_ssim(const Tensor& x, const Tensor& y) {
  const std::size_t h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[11][11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      total += g[i][j];
    }
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t r = 0; r + 11 <= h; ++r) {
      for (std::size_t col = 0; col + 11 <= w; ++col) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double wt = g[i][j] / total;
            const double a = x.at(r + i, col + j, ch), b = y.at(r + i, col + j, ch);
            mx += wt * a;
            my += wt * b;
            xx += wt * a * a;
            yy += wt * b * b;
            xy += wt * a * b;
          }
        }
        const double vx = xx - mx * mx, vy = yy - my * my, cov = xy - mx * my;
        sum += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  CHECK(cosine_similarity(vec({1, 2}), vec({2, 1})) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(cosine_similarity(vec({1, 0}), vec({0, 1})) == 0.0);
  CHECK(cosine_similarity(vec({3, -4}), vec({3, -4})) == doctest::Approx(1.0).epsilon(1e-15));
  // absolute numerator
  CHECK(cosine_similarity(vec({1, 2}), vec({-1, -2})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(vec({0, 0}), vec({0, 0})) == 1.0);
  CHECK(cosine_similarity(vec({0, 0}), vec({1, 0})) == 0.0);
  CHECK_THROWS_AS(cosine_similarity(vec({1, 2}), vec({1, 2, 3})), ConfigError);
}

TEST_CASE("cosine similarity is bounded and scale invariant") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Tensor f = random_tensor(rng, {20}, -1, 1);
    const Tensor g = random_tensor(rng, {20}, -1, 1);
    const double s = cosine_similarity(f, g);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    CHECK(cosine_similarity(f * 3.5, g * 0.2) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("lp metrics examples") {
  const Tensor x({2, 2, 1}, 0.5);
  LpNorms m = lp_metrics(x, x);
  CHECK(m.l2 == 0.0);
  CHECK(m.linf == 0.0);
  CHECK(m.l0 == 0.0);

  Tensor y = x;
  y[1] += 0.3;
  m = lp_metrics(x, y);
  CHECK(m.l2 == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(m.linf == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(m.l0 == 1.0);

  y[2] -= 0.3;
  m = lp_metrics(x, y);
  CHECK(m.l2 == doctest::Approx(0.3 * std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m.linf == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(m.l0 == 2.0);

  // differences at or below the threshold do not count toward L0
  Tensor z = x;
  z[0] += 1e-10;
  CHECK(lp_metrics(x, z).l0 == 0.0);
}

TEST_CASE("ndv examples") {
  const Tensor x({10, 10, 1}, 0.5);
  CHECK(ndv(x, x) == 0.0);

  Tensor one = x;
  one[17] += 0.5;
  CHECK(ndv(x, one) == doctest::Approx(1000.0 * 0.5 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(ndv(x, one) == doctest::Approx(500.0).epsilon(1e-7));

  Tensor spread = x;
  for (double& v : spread.values()) v += 0.05;
  CHECK(ndv(x, spread) == doctest::Approx(1000.0 * 0.05 * 10.0 / (100.0 + 1e-8)).epsilon(1e-12));
  CHECK(ndv(x, spread) == doctest::Approx(5.0).epsilon(1e-9));

  NdvConfig cfg;
  cfg.scale = 1.0;
  CHECK(ndv(x, one, cfg) == doctest::Approx(0.5).epsilon(1e-7));
  cfg.eps = -1.0;
  CHECK_THROWS_AS(ndv(x, one, cfg), ConfigError);
  CHECK_THROWS_AS(ndv(x, Tensor({100}, 0.5)), ConfigError);
}

TEST_CASE("ndv of equal-l2 perturbations scales with the touched count") {
  // Same L2 norm 0.5 spread over 1 or 100 elements: NDV = C * 0.5 / L0.
  const Tensor x({10, 10, 1}, 0.25);
  Tensor one = x, hundred = x;
  one[0] += 0.5;
  for (double& v : hundred.values()) v += 0.05;
  CHECK(lp_metrics(x, one).l2 == doctest::Approx(lp_metrics(x, hundred).l2).epsilon(1e-12));
  CHECK(ndv(x, one) / ndv(x, hundred) == doctest::Approx(100.0).epsilon(1e-6));
}

TEST_CASE("ssim examples") {
  Rng rng(9);
  const Image x = random_image(rng, 16, 16, 3);
  CHECK(ssim(x.tensor(), x.tensor()) == 1.0);

  const double c1 = 1e-4;
  CHECK(ssim(Tensor({16, 16, 1}, 0.0), Tensor({16, 16, 1}, 1.0)) ==
        doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));
  CHECK_THROWS_AS(ssim(Tensor({10, 16, 1}, 0.0), Tensor({10, 16, 1}, 0.0)), ConfigError);
}

TEST_CASE("ssim matches a direct windowed computation") {
  Rng rng(10);
  for (int i = 0; i < 3; ++i) {
    const Image x = random_image(rng, 14, 17, i == 0 ? 1 : 3);
    Tensor noisy = x.tensor();
    for (double& v : noisy.values()) v += rng.uniform(-0.1, 0.1);
    const Tensor y = clip01(noisy);
    const double s = ssim(x.tensor(), y);
    CHECK(s == doctest::Approx(brute_ssim(x.tensor(), y)).epsilon(1e-12));
    CHECK(s < 1.0);
    CHECK(ssim(y, x.tensor()) == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("pair metrics bundle") {
  Rng rng(12);
  const Image x = random_image(rng);
  Tensor t = x.tensor();
  t[0] = 1.0 - t[0];
  const Image y(t);
  const PairMetrics m = pair_metrics(x, y);
  const LpNorms n = lp_metrics(x.tensor(), y.tensor());
  CHECK(m.l2 == n.l2);
  CHECK(m.linf == n.linf);
  CHECK(m.l0 == n.l0);
  CHECK(m.ndv == ndv(x.tensor(), y.tensor()));
  CHECK(m.ssim == ssim(x.tensor(), y.tensor()));
}

TEST_CASE("aggregate statistics") {
  std::vector<AttackOutcome> outcomes{{true, 10, {}}, {false, 100, {}}, {true, 30, {}}, {true, 20, {}}};
  outcomes[0].metrics.l2 = 1.0;
  outcomes[2].metrics.l2 = 2.0;
  outcomes[3].metrics.l2 = 3.0;
  const AggregateReport r = aggregate(outcomes);
  CHECK(r.attempted == 4);
  CHECK(r.succeeded == 3);
  CHECK(r.asr == 0.75);
  CHECK(r.anq_successes == 20.0);
  CHECK(r.mnq_successes == 20.0);
  CHECK(r.anq_all == 40.0);
  CHECK(r.mnq_all == 25.0);
  CHECK(r.anq == r.anq_successes);
  CHECK(r.mean_metrics.l2 == 2.0);

  const AggregateReport all = aggregate(outcomes, QueryStatMode::kAllAttempted);
  CHECK(all.anq == 40.0);
  CHECK(all.mnq == 25.0);

  const AggregateReport none = aggregate({{false, 5, {}}});
  CHECK(none.asr == 0.0);
  CHECK(none.anq_successes == 0.0);
  CHECK_THROWS_AS(aggregate({}), ConfigError);

  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}
