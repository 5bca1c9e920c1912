#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mslu/spectral_library.hpp"
#include "support.hpp"

using namespace mslu;

namespace {

std::vector<MaterialSpectrum> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_spectra_csv(in, "inline.csv");
}

// Textbook two-pass Pearson correlation.
double two_pass_corr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (int i = 0; i < x.size(); ++i) {
    mx += x(i);
    my += y(i);
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < x.size(); ++i) {
    sxy += (x(i) - mx) * (y(i) - my);
    sxx += (x(i) - mx) * (x(i) - mx);
    syy += (y(i) - my) * (y(i) - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("CSV parsing") {
  auto s = parse("wavelength_nm,a,b\n400,0.1,0.2\n500,0.3,0.4\n600,0.5,0.6\n");
  REQUIRE(s.size() == 2);
  CHECK(s[0].name == "a");
  CHECK(s[1].reflectance[2] == doctest::Approx(0.6));
  CHECK(s[0].wavelengths == std::vector<double>{400, 500, 600});

  SUBCASE("non-increasing wavelengths") {
    CHECK_THROWS_AS(parse("wavelength_nm,a\n400,0.1\n400,0.2\n"), SpectraOrderError);
  }
  SUBCASE("reflectance out of range names the cell") {
    try {
      parse("wavelength_nm,a\n400,0.1\n500,1.2\n");
      FAIL("expected a range error");
    } catch (const SpectraRangeError& e) {
      CHECK(std::string(e.what()).find("1.2") != std::string::npos);
    }
  }
  SUBCASE("garbage number") { CHECK_THROWS_AS(parse("wavelength_nm,a\n400,abc\n500,0.2\n"), SpectraParseError); }
  SUBCASE("ragged row") { CHECK_THROWS_AS(parse("wavelength_nm,a,b\n400,0.1\n"), SpectraParseError); }
  SUBCASE("bad header") { CHECK_THROWS_AS(parse("lambda,a\n400,0.1\n500,0.1\n"), SpectraParseError); }
  SUBCASE("single sample") { CHECK_THROWS_AS(parse("wavelength_nm,a\n400,0.1\n"), ValidationError); }
}

TEST_CASE("CSV round trip") {
  auto dir = testing::scratch_dir("spectra_rt");
  auto spectra = load_spectra(testing::data_path("fixture_spectra.csv"));
  write_spectra_csv(dir / "s.csv", spectra);
  auto back = load_spectra(dir / "s.csv");
  REQUIRE(back.size() == spectra.size());
  for (std::size_t r = 0; r < spectra.size(); ++r) {
    CHECK(back[r].name == spectra[r].name);
    CHECK(back[r].wavelengths == spectra[r].wavelengths);
    CHECK(back[r].reflectance == spectra[r].reflectance);
  }
  CHECK_THROWS_AS(load_spectra(dir / "missing.csv"), IoError);
}

TEST_CASE("band grid") {
  auto g = band_grid(4, 400, 2500);
  REQUIRE(g.size() == 4);
  CHECK(g[0] == 400.0);
  CHECK(g[1] == doctest::Approx(1100.0));
  CHECK(g[3] == 2500.0);
  CHECK(band_grid(1, 400, 2500) == std::vector<double>{1450.0});
}

TEST_CASE("resampling interpolates linearly and refuses to extrapolate") {
  auto s = parse("wavelength_nm,a\n400,0.1\n500,0.3\n");
  auto lib = resample_at(s, {400, 425, 450, 500});
  CHECK(lib.M(1, 0) == doctest::Approx(0.15));
  CHECK(lib.M(2, 0) == doctest::Approx(0.2));
  CHECK_THROWS_AS(resample_at(s, {350.0}), ValidationError);
  CHECK_THROWS_AS(resample_at(s, {510.0}), ValidationError);
}

TEST_CASE("resampling at the library's own bands is the identity") {
  auto lib = testing::fixture_library(32);
  auto again = resample_at(library_spectra(lib), lib.band_wavelengths);
  CHECK((again.M - lib.M).cwiseAbs().maxCoeff() == 0.0);
  CHECK(again.material_names == lib.material_names);
}

TEST_CASE("pairwise correlation") {
  SpectralLibrary lib;
  lib.band_wavelengths = {1, 2, 3, 4};
  lib.material_names = {"a", "b", "c"};
  lib.M.resize(4, 3);
  lib.M.col(0) << 0.1, 0.4, 0.2, 0.9;
  lib.M.col(1) = lib.M.col(0);
  const double mean = lib.M.col(0).mean();
  lib.M.col(2) = (2.0 * mean - lib.M.col(0).array()).matrix();
  auto C = pairwise_correlation(lib);
  CHECK(C(0, 1) == doctest::Approx(1.0));
  CHECK(C(0, 2) == doctest::Approx(-1.0));
  CHECK(C(1, 1) == doctest::Approx(1.0));

  lib.M.col(2).setConstant(0.5);
  CHECK_THROWS_AS(pairwise_correlation(lib), NumericalError);
}

TEST_CASE("fixture library correlations against a two-pass computation") {
  auto lib = testing::fixture_library(32);
  REQUIRE(lib.materials() == 3);
  auto C = pairwise_correlation(lib);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(C(i, j) == doctest::Approx(two_pass_corr(lib.M.col(i), lib.M.col(j))).epsilon(1e-12));
  // needle/bark strongly similar, soil the brightest
  CHECK(C(0, 1) >= 0.9);
  CHECK(lib.M.col(2).mean() > lib.M.col(0).mean());
  CHECK(lib.M.col(2).mean() > lib.M.col(1).mean());
  CHECK(lib.M.minCoeff() >= 0.0);
  CHECK(lib.M.maxCoeff() <= 1.0);
}

TEST_CASE("synthetic libraries") {
  SUBCASE("single material") {
    auto lib = synth_library(1, 12, Eigen::MatrixXd::Identity(1, 1), 5);
    CHECK(lib.materials() == 1);
    CHECK(lib.bands() == 12);
    CHECK(pairwise_correlation(lib)(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("strongly correlated pair") {
    Eigen::MatrixXd target(3, 3);
    target << 1, 0.95, 0.4, 0.95, 1, 0.4, 0.4, 0.4, 1;
    auto lib = synth_library(3, 32, target, 9);
    auto C = pairwise_correlation(lib);
    CHECK(C(0, 1) >= 0.90);
    CHECK(C(0, 1) <= 1.0);
    CHECK((C - target).cwiseAbs().maxCoeff() <= 0.05);
    CHECK(lib.M.minCoeff() >= 0.0);
    CHECK(lib.M.maxCoeff() <= 1.0);
  }
  SUBCASE("uncorrelated pair") {
    Eigen::MatrixXd target = Eigen::MatrixXd::Identity(2, 2);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      auto lib = synth_library(2, 32, target, seed);
      CHECK(std::abs(pairwise_correlation(lib)(0, 1)) <= 0.05);
    }
  }
  SUBCASE("bit-identical per seed") {
    Eigen::MatrixXd target(2, 2);
    target << 1, 0.5, 0.5, 1;
    auto a = synth_library(2, 20, target, 77);
    auto b = synth_library(2, 20, target, 77);
    CHECK(a.M == b.M);
    auto c = synth_library(2, 20, target, 78);
    CHECK(a.M != c.M);
  }
  SUBCASE("invalid targets") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.5, 0.4, 1;
    CHECK_THROWS_AS(synth_library(2, 16, asym, 1), ValidationError);
    Eigen::MatrixXd not_psd(3, 3);
    not_psd << 1, 0.9, -0.9, 0.9, 1, 0.9, -0.9, 0.9, 1;
    CHECK_THROWS_AS(synth_library(3, 16, not_psd, 1), NumericalError);
  }
}

TEST_CASE("library JSON round trip") {
  auto lib = testing::fixture_library(8);
  auto back = library_from_json(library_to_json(lib));
  CHECK(back.M == lib.M);
  CHECK(back.band_wavelengths == lib.band_wavelengths);
  CHECK(back.material_names == lib.material_names);
  auto j = library_to_json(lib);
  REQUIRE(j["M"].size() == 8);
  CHECK(j["M"][3][1].get<double>() == lib.M(3, 1));
}
