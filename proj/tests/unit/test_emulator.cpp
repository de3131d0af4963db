#include "nonstat/emulator.hpp"
#include "nonstat/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace nonstat;

namespace {

CalibrationTable iso_table() {
  // Calibrated kappa_S^-1 for kappa^-1 = 1..6 on the default lattice, nu = 1.
  const double sar[] = {1.0898, 2.1011, 3.0911, 4.0787, 5.0541, 5.9955};
  std::vector<CalibrationPoint> pts;
  for (int k = 0; k < 6; ++k) {
    CalibrationPoint p;
    p.matern_value = k + 1.0;
    p.sar_value = sar[k];
    pts.push_back(p);
  }
  return CalibrationTable(pts);
}

ParamFields constant_params(int nx, int ny, const LocalParams& p, double h1 = 1.0, double h2 = 1.0) {
  ParamFields f;
  f.grid = Grid{nx, ny, h1, h2, 0};
  f.nu = p.nu;
  f.params.assign(f.grid.interior_size(), p);
  f.converged.assign(f.grid.interior_size(), 1);
  f.estimated.assign(f.grid.interior_size(), 1);
  return f;
}

} // namespace

TEST_CASE("default buffer") {
  CHECK(default_buffer(constant_params(4, 4, LocalParams{3, 3, 0, 1, 0, Smoothness::One})) == 10);
  CHECK(default_buffer(constant_params(4, 4, LocalParams{7.2, 3, 0, 1, 0, Smoothness::One})) == 15);
  CHECK(default_buffer(constant_params(4, 4, LocalParams{3, 3, 0, 1, 0, Smoothness::One}, 0.25, 1.0)) == 24);
}

TEST_CASE("isotropic translation") {
  const SpecField s = translate_params(constant_params(5, 4, LocalParams{3, 3, 0, 1, 0, Smoothness::One}), iso_table(),
                                       nullptr, 2);
  CHECK(s.grid.buffer == 2);
  REQUIRE(s.specs.size() == 9 * 8);
  for (const auto& spec : s.specs) {
    CHECK(spec.kappa2 == doctest::Approx(1.0 / (3.0911 * 3.0911)));
    CHECK(spec.h11 == doctest::Approx(1.0));
    CHECK(spec.h12 == doctest::Approx(0.0).epsilon(1e-15));
  }
  const SpecField c = translate_params(constant_params(2, 2, LocalParams{9, 9, 0, 1, 0, Smoothness::One}), iso_table(),
                                       nullptr, 1);
  CHECK(c.clamped[0] == 1);
}

TEST_CASE("anisotropic translation has unit determinant and the right axis") {
  const double th = std::numbers::pi / 4;
  const SpecField s = translate_params(constant_params(3, 3, LocalParams{4, 1, th, 1, 0, Smoothness::One}),
                                       iso_table(), nullptr, 0);
  const SarSpec& spec = s.specs[4];
  CHECK(spec.h11 * spec.h22 - spec.h12 * spec.h12 == doctest::Approx(1.0));
  CHECK(spec.kappa2 == doctest::Approx(1.0 / (2.1011 * 2.1011)));
  // Eigenvalues 4 and 1/4 along 45 degrees.
  CHECK(spec.h12 == doctest::Approx(0.5 * (4.0 - 0.25)));
}

TEST_CASE("physical spacings map onto grid units") {
  // Isotropic range 2 at h1 = 0.5 is 4 nodes along s1 and 2 along s2.
  const SpecField s = translate_params(constant_params(3, 3, LocalParams{2, 2, 0, 1, 0, Smoothness::One}, 0.5, 1.0),
                                       iso_table(), nullptr, 0);
  const SarSpec& spec = s.specs[4];
  CHECK(spec.h11 / spec.h22 == doctest::Approx(4.0));
  CHECK(spec.kappa2 == doctest::Approx(1.0 / std::pow(iso_table().lookup(std::sqrt(8.0)).value, 2)));
}

TEST_CASE("post-scaled model has exact unit marginal variance") {
  ParamFields p = constant_params(12, 10, LocalParams{3, 1.5, 0.5, 2.0, 0.1, Smoothness::One});
  for (int k = 0; k < 60; ++k)
    p.params[std::size_t(k)].xi1 = 5.0;
  for (int order : {1, 2}) {
    ModelOptions o;
    o.order = order;
    const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, o, 3);
    const Eigen::VectorXd v = m.marginal_variance();
    CHECK((v.array() - 2.0).abs().maxCoeff() < 1e-10);
    CHECK(m.provenance.at("buffer") == "3");
  }
}

TEST_CASE("row-weighted model is close to unit variance") {
  const ParamFields p = constant_params(12, 12, LocalParams{3, 3, 0, 1.0, 0.0, Smoothness::One});
  ModelOptions o;
  o.normalization = Normalization::RowWeight;
  const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, o, 4);
  REQUIRE(m.weighted_factor() != nullptr);
  const Eigen::VectorXd v = m.marginal_variance();
  CHECK(v.minCoeff() > 0.5);
  CHECK(v.maxCoeff() < 1.5);
}

TEST_CASE("correlation map") {
  const ParamFields p = constant_params(15, 15, LocalParams{4, 2, 0.3, 1.0, 0.0, Smoothness::One});
  for (Normalization norm : {Normalization::PostScale, Normalization::RowWeight}) {
    ModelOptions o;
    o.normalization = norm;
    const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, o, 5);
    const std::size_t node = m.grid().interior().index(7, 7);
    const Field c = correlation_map(m, node);
    CHECK(c.values[node] == 1.0);
    for (double v : c.values) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    // Major axis at 0.3 rad from s1: correlation decays slower along it.
    CHECK(c.values[m.grid().interior().index(7, 9)] > c.values[m.grid().interior().index(9, 7)]);
    CHECK_THROWS_AS(correlation_map(m, 15 * 15), DomainError);
  }
}

TEST_CASE("simulation variance and determinism") {
  const ParamFields p = constant_params(10, 10, LocalParams{2, 2, 0, 1.5, 0.2, Smoothness::One});
  ModelOptions o;
  o.add_nugget = true;
  const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, o, 4);
  const FieldEnsemble a = simulate_ensemble(m, 400, 17, 1);
  const FieldEnsemble b = simulate_ensemble(m, 400, 17, 3);
  CHECK(a.replicates == b.replicates);
  CHECK(a.grid == p.grid);
  double s = 0.0;
  for (const auto& r : a.replicates)
    for (double v : r)
      s += v * v;
  // sigma2 + tau2 = 1.7 on average.
  CHECK(s / (400.0 * 100.0) == doctest::Approx(1.7).epsilon(0.08));
}

TEST_CASE("model construction errors") {
  const ParamFields p = constant_params(4, 4, LocalParams{2, 2, 0, 1, 0, Smoothness::One});
  const SpecField s = translate_params(p, iso_table(), nullptr, 1);
  const std::vector<double> short_sigma(3, 1.0);
  CHECK_THROWS_AS(build_global_model(s, short_sigma, {}, {}), ShapeError);
  const std::vector<double> sigma(16, 1.0);
  ModelOptions o;
  o.order = 3;
  CHECK_THROWS_AS(build_global_model(s, sigma, {}, o), DomainError);
  CHECK_THROWS_AS(translate_params(p, CalibrationTable(), nullptr), ConfigError);
  const CalibrationTable iso = iso_table();
  CHECK_THROWS_AS(translate_params(p, iso, &iso), ConfigError);
}

TEST_CASE("printed cross term loses diagonal dominance on skewed stencils") {
  const ParamFields p = constant_params(6, 6, LocalParams{6, 1, std::numbers::pi / 4, 1, 0, Smoothness::One});
  const SpecField s = translate_params(p, iso_table(), nullptr, 1);
  AssemblyOptions printed;
  printed.cross = CrossTerm::AsPrinted;
  CHECK_FALSE(strictly_diagonally_dominant(assemble_B(s.grid.with_buffer(1), s.specs, printed)));
}

TEST_CASE("equal ranges give a scalar H") {
  for (double theta : {0.0, 0.7, 2.5}) {
    const SpecField s = translate_params(constant_params(4, 4, LocalParams{3, 3, theta, 1, 0, Smoothness::One}),
                                         iso_table(), nullptr, 1);
    for (const auto& spec : s.specs) {
      CHECK(std::abs(spec.h12) < 1e-12);
      CHECK(spec.h11 == doctest::Approx(spec.h22));
    }
  }
}

TEST_CASE("two-region parameters give a piecewise constant spec field") {
  ParamFields p = constant_params(8, 6, LocalParams{2, 2, 0, 1, 0, Smoothness::One});
  for (int i = 0; i < 6; ++i)
    for (int j = 4; j < 8; ++j)
      p.params[p.grid.index(i, j)] = LocalParams{5, 5, 0, 1, 0, Smoothness::One};
  const SpecField s = translate_params(p, iso_table(), nullptr, 2);
  const Grid& g = s.grid;
  for (int i = 2; i < 8; ++i)
    for (int j = 2; j < 10; ++j) {
      const double sar = j - 2 < 4 ? 2.1011 : 5.0541;
      CHECK(s.specs[g.buffered_index(i, j)].kappa2 == doctest::Approx(1.0 / (sar * sar)));
      CHECK_FALSE(s.clamped[p.grid.index(i - 2, j - 2)]);
    }
}

TEST_CASE("scaled fields have variance sigma squared") {
  const ParamFields p = constant_params(8, 8, LocalParams{2, 2, 0, 4.0, 0, Smoothness::One});
  const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, {}, 4);
  const FieldEnsemble e = simulate_ensemble(m, 2000, 31);
  for (std::size_t k = 0; k < 64; ++k) {
    double s = 0.0;
    for (const auto& r : e.replicates)
      s += r[k] * r[k];
    CHECK(std::abs(s / 2000.0 / 4.0 - 1.0) < 0.1);
  }
  CHECK(simulate_ensemble(m, 0, 31).replicates.empty());
}

TEST_CASE("stationary correlation map is point symmetric") {
  const ParamFields p = constant_params(15, 15, LocalParams{3, 1.5, 0.6, 1, 0, Smoothness::One});
  const NonstatSarModel m = build_from_params(p, iso_table(), nullptr, {}, 8);
  const Grid g = m.grid().interior();
  const Field c = correlation_map(m, g.index(7, 7));
  for (int i = 3; i <= 11; ++i)
    for (int j = 3; j <= 11; ++j)
      CHECK(std::abs(c.values[g.index(i, j)] - c.values[g.index(14 - i, 14 - j)]) < 1e-8);
}
