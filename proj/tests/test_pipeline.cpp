#include <doctest.h>

#include <cmath>

#include "wpnode/random.hpp"
#include "wpnode/scaling.hpp"
#include "wpnode/windows.hpp"

using namespace wpnode;

TEST_CASE("minmax scaler: basic mapping") {
  Mat data(2, 1);
  data(0, 0) = 2.0;
  data(1, 0) = 4.0;
  const MinMaxScaler s = MinMaxScaler::fit(data);
  double out;
  s.apply(std::vector<double>{3.0}, std::span<double>(&out, 1));
  CHECK(out == doctest::Approx(0.5).epsilon(1e-15));
  s.apply(std::vector<double>{2.0}, std::span<double>(&out, 1));
  CHECK(out == 0.0);
  s.apply(std::vector<double>{4.0}, std::span<double>(&out, 1));
  CHECK(out == 1.0);
}

TEST_CASE("minmax scaler: round-trip is exact to 1e-12") {
  Rng rng(5);
  Mat data(100, 4);
  for (double& v : data.raw()) v = rng.uniform(-30.0, 30.0);
  const MinMaxScaler s = MinMaxScaler::fit(data);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(4), xs(4), back(4);
    for (double& v : x) v = rng.uniform(-40.0, 40.0);
    s.apply(x, xs);
    s.invert(xs, back);
    for (int j = 0; j < 4; ++j) CHECK(back[j] == doctest::Approx(x[j]).epsilon(1e-12));
  }
}

TEST_CASE("minmax scaler: no clipping outside the training range") {
  Mat data(2, 1);
  data(0, 0) = 0.0;
  data(1, 0) = 1.0;
  const MinMaxScaler s = MinMaxScaler::fit(data);
  double out;
  s.apply(std::vector<double>{2.0}, std::span<double>(&out, 1));
  CHECK(out == 2.0);
  s.apply(std::vector<double>{-1.0}, std::span<double>(&out, 1));
  CHECK(out == -1.0);
}

TEST_CASE("minmax scaler: degenerate dimension fails to fit") {
  Mat data(3, 2);
  data(0, 0) = 1.0;
  data(1, 0) = 2.0;
  data(2, 0) = 3.0;
  // column 1 constant
  CHECK_THROWS_AS(MinMaxScaler::fit(data), config_error);
}

TEST_CASE("minmax scaler JSON round-trip") {
  Mat data(3, 2);
  Rng rng(8);
  for (double& v : data.raw()) v = rng.uniform(-2.0, 2.0);
  const MinMaxScaler s = MinMaxScaler::fit(data);
  const MinMaxScaler t = MinMaxScaler::from_json(s.to_json());
  for (int j = 0; j < 2; ++j) {
    CHECK(t.min(j) == s.min(j));
    CHECK(t.max(j) == s.max(j));
  }
}

TEST_CASE("sliding_windows: counting contract") {
  // floor((N - T) / stride) + 1 windows
  CHECK(sliding_windows(10, 3, 1).count() == 8);
  CHECK(sliding_windows(10, 10, 1).count() == 1);
  const WindowSet w = sliding_windows(10, 3, 7);
  CHECK(w.starts == std::vector<int>{0, 7});
}

TEST_CASE("sliding_windows: every window lies inside the series") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + int(rng.integer(500));
    const int t = 2 + int(rng.integer(uint64_t(n - 1)));
    const int stride = 1 + int(rng.integer(9));
    const WindowSet w = sliding_windows(n, t, stride);
    REQUIRE(w.count() == (n - t) / stride + 1);
    for (int s : w.starts) {
      CHECK(s >= 0);
      CHECK(s + t <= n);
    }
  }
}

TEST_CASE("sliding_windows: oversized window is a configuration error") {
  CHECK_THROWS_AS(sliding_windows(5, 6, 1), config_error);
  CHECK_THROWS_AS(sliding_windows(5, 1, 1), config_error);
}

TEST_CASE("sliding_windows is pure") {
  const WindowSet a = sliding_windows(1000, 25, 3);
  const WindowSet b = sliding_windows(1000, 25, 3);
  CHECK(a.starts == b.starts);
}

TEST_CASE("make_subdomains: evenly spread starts") {
  const SubdomainLayout l = make_subdomains(100, 60, 3, 0.01);
  CHECK(l.starts == std::vector<int>{0, 20, 40});
  CHECK(make_subdomains(100, 60, 1, 0.01).starts == std::vector<int>{0});
}

TEST_CASE("make_subdomains: paper-scale layout") {
  const SubdomainLayout l = make_subdomains(10000, 60, 5000, 0.01);
  CHECK(l.count() == 5000);
  CHECK(l.starts.front() == 0);
  CHECK(l.starts.back() == 9940);
  CHECK(l.length == doctest::Approx(59.0 * 0.01).epsilon(1e-15));
  for (int k = 1; k < l.count(); ++k) CHECK(l.starts[k] > l.starts[k - 1]);
}

TEST_CASE("make_subdomains: K beyond the distinct starts is capped") {
  const SubdomainLayout l = make_subdomains(12, 10, 50, 0.1);
  CHECK(l.count() == 3);
  CHECK(l.starts == std::vector<int>{0, 1, 2});
}

TEST_CASE("make_subdomains: reference nodes hit the endpoints exactly") {
  for (int m : {2, 3, 60, 80, 200}) {
    const SubdomainLayout l = make_subdomains(500, m, 4, 0.01);
    CHECK(l.nodes.front() == -1.0);
    CHECK(l.nodes.back() == 1.0);
    for (int i = 1; i < m; ++i)
      CHECK(l.nodes[i] - l.nodes[i - 1] ==
            doctest::Approx(2.0 / double(m - 1)).epsilon(1e-12));
  }
}

TEST_CASE("make_subdomains: union covers the series when K is large enough") {
  const int n = 1000, m = 60;
  const int k = (n - m) / m + 2;
  const SubdomainLayout l = make_subdomains(n, m, k, 0.01);
  std::vector<bool> covered(n, false);
  for (int s : l.starts)
    for (int i = 0; i < m; ++i) covered[s + i] = true;
  for (int i = 0; i < n; ++i) CHECK(covered[i]);
}

TEST_CASE("to_reference: affine map basics") {
  CHECK(to_reference(2.0, 4.0, 0.0) == 3.0);
  CHECK(to_reference(2.0, 4.0, -1.0) == 2.0);
  CHECK(to_reference(2.0, 4.0, 1.0) == 4.0);
  // slope of the inverse map is 2 / (b - a)
  const double a = 1.5, b = 6.5;
  const double ds_dt = 2.0 / (b - a);
  const double t1 = to_reference(a, b, 0.25), t2 = to_reference(a, b, 0.75);
  CHECK((0.75 - 0.25) / (t2 - t1) == doctest::Approx(ds_dt).epsilon(1e-14));
}
