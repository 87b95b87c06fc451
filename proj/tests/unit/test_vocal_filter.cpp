#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "synthetic.hpp"

#include "cantus/vocal_filter.hpp"

using namespace cantus;
using namespace cantus::testing;

namespace {

// Samples of N(mean, L L^T).
std::vector<BarkVector> draw(const FeatureVector& mean, const FeatureMatrix& l, std::size_t n, std::mt19937& rng) {
  std::normal_distribution<double> z;
  std::vector<BarkVector> out(n);
  for (auto& b : out) {
    FeatureVector e;
    for (int i = 0; i < 12; ++i) e(i) = z(rng);
    const FeatureVector x = mean + l * e;
    for (int i = 0; i < 12; ++i) b[static_cast<std::size_t>(i)] = x(i);
  }
  return out;
}

FeatureMatrix random_factor(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  FeatureMatrix l = FeatureMatrix::Zero();
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < i; ++j) l(i, j) = u(rng);
    l(i, i) = 1.0 + std::abs(u(rng));
  }
  return l;
}

PitchContour labels(const std::vector<bool>& voiced) {
  PitchContour c;
  c.f0.resize(voiced.size());
  for (std::size_t i = 0; i < voiced.size(); ++i) c.f0[i] = voiced[i] ? 300.0 : 0.0;
  c.rebuild();
  return c;
}

GaussianClassModel identity_model(const FeatureVector& plus, const FeatureVector& minus) {
  return {GaussianDensity(plus, FeatureMatrix::Identity()), GaussianDensity(minus, FeatureMatrix::Identity())};
}

}  // namespace

TEST_SUITE("vocal_filter") {
  TEST_CASE("fitted means recover well-separated classes") {
    std::mt19937 rng(21);
    FeatureVector mu_plus, mu_minus;
    for (int i = 0; i < 12; ++i) {
      mu_plus(i) = 10.0 + i;
      mu_minus(i) = -5.0 - 0.5 * i;
    }
    const FeatureMatrix l_plus = random_factor(rng);
    const FeatureMatrix l_minus = random_factor(rng);
    const auto plus = draw(mu_plus, l_plus, 800, rng);
    const auto minus = draw(mu_minus, l_minus, 600, rng);
    std::vector<BarkVector> features;
    std::vector<bool> voiced;
    for (std::size_t i = 0; i < 1400; ++i) {
      const bool v = (i % 7) < 4;
      voiced.push_back(v);
    }
    std::size_t ip = 0, im = 0;
    for (bool v : voiced) features.push_back(v ? plus[ip++] : minus[im++]);

    const auto fit = fit_models(features, labels(voiced));
    REQUIRE(fit.model);
    CHECK(fit.voiced_frames == 800);
    CHECK(fit.unvoiced_frames == 600);
    const FeatureMatrix cov_plus = l_plus * l_plus.transpose();
    const FeatureMatrix cov_minus = l_minus * l_minus.transpose();
    for (int i = 0; i < 12; ++i) {
      CHECK(std::abs(fit.model->voiced.mean()(i) - mu_plus(i)) < 3.0 * std::sqrt(cov_plus(i, i) / 800.0));
      CHECK(std::abs(fit.model->unvoiced.mean()(i) - mu_minus(i)) < 3.0 * std::sqrt(cov_minus(i, i) / 600.0));
    }

    // The fitted covariance is the sample covariance plus the ridge.
    FeatureVector mean = FeatureVector::Zero();
    for (const auto& b : plus) mean += Eigen::Map<const FeatureVector>(b.data());
    mean /= 800.0;
    FeatureMatrix cov = FeatureMatrix::Zero();
    for (const auto& b : plus) {
      const FeatureVector d = Eigen::Map<const FeatureVector>(b.data()) - mean;
      cov += d * d.transpose() / 800.0;
    }
    cov.diagonal().array() += 1e-6 * cov.trace() / 12.0;
    CHECK((fit.model->voiced.covariance() - cov).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("a class with too few frames disables filtering") {
    std::vector<BarkVector> features(100, BarkVector{});
    const auto all = fit_models(features, labels(std::vector<bool>(100, true)));
    CHECK_FALSE(all.model);
    CHECK_FALSE(all.warning.empty());
    std::vector<bool> few(100, true);
    for (int i = 0; i < 12; ++i) few[static_cast<std::size_t>(i)] = false;
    CHECK_FALSE(fit_models(features, labels(few)).model);
  }

  TEST_CASE("random labels on one distribution classify near chance") {
    std::mt19937 rng(22);
    const auto samples = draw(FeatureVector::Constant(3.0), random_factor(rng), 2000, rng);
    std::bernoulli_distribution coin(0.5);
    std::vector<bool> voiced(samples.size());
    for (std::size_t i = 0; i < voiced.size(); ++i) voiced[i] = coin(rng);
    const auto contour = labels(voiced);
    const auto fit = fit_models(samples, contour);
    REQUIRE(fit.model);
    const auto v = classify_frames(samples, *fit.model);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < v.size(); ++i) agree += (v[i] != 0) == voiced[i];
    const double accuracy = static_cast<double>(agree) / static_cast<double>(v.size());
    CHECK(accuracy > 0.4);
    CHECK(accuracy < 0.65);
    const auto smoothed = smooth_prediction(v, 1.0, kMelodyGrid.frame_rate());
    const auto filtered = filter_contours(contour, smoothed);
    CHECK(filtered.contour.f0.size() == contour.f0.size());
  }

  TEST_CASE("classification by density dominance") {
    FeatureVector far = FeatureVector::Zero();
    far(0) = 10.0;
    const auto model = identity_model(FeatureVector::Zero(), far);
    const auto to_bark = [](const FeatureVector& x) {
      BarkVector b;
      for (int i = 0; i < 12; ++i) b[static_cast<std::size_t>(i)] = x(i);
      return b;
    };
    FeatureVector half = FeatureVector::Zero();
    half(0) = 5.0;
    const std::vector<BarkVector> xs{to_bark(FeatureVector::Zero()), to_bark(far), to_bark(half)};
    CHECK(classify_frames(xs, model) == std::vector<std::uint8_t>{1, 0, 1});
  }

  TEST_CASE("log density matches the closed form") {
    std::mt19937 rng(23);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
      const FeatureMatrix l = random_factor(rng);
      const FeatureMatrix cov = l * l.transpose();
      FeatureVector mean, x;
      for (int i = 0; i < 12; ++i) {
        mean(i) = z(rng);
        x(i) = z(rng) * 2.0;
      }
      const GaussianDensity g(mean, cov);
      const FeatureVector d = x - mean;
      const double expect = -0.5 * std::log(std::pow(2.0 * std::numbers::pi, 12) * cov.determinant()) -
                            0.5 * d.dot(cov.inverse() * d);
      CHECK(g.log_density(x) == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  TEST_CASE("covariances must be symmetric positive-definite") {
    FeatureMatrix bad = FeatureMatrix::Identity();
    bad(3, 3) = -1.0;
    CHECK_THROWS_AS(GaussianDensity(FeatureVector::Zero(), bad), std::invalid_argument);
    FeatureMatrix skew = FeatureMatrix::Identity();
    skew(0, 1) = 0.5;
    CHECK_THROWS_AS(GaussianDensity(FeatureVector::Zero(), skew), std::invalid_argument);
  }

  TEST_CASE("constant features still fit through the ridge") {
    std::vector<BarkVector> same(50, BarkVector{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    CHECK_NOTHROW(fit_gaussian(same));
  }

  TEST_CASE("smoothing") {
    const double rate = kMelodyGrid.frame_rate();
    const std::vector<std::uint8_t> ones(500, 1);
    CHECK(smooth_prediction(ones, 1.0, rate) == ones);

    std::vector<std::uint8_t> isolated(346, 0);
    isolated[170] = 1;
    for (auto v : smooth_prediction(isolated, 1.0, rate)) CHECK(v == 0);

    std::vector<std::uint8_t> block(2000, 0);
    for (std::size_t i = 500; i < 1000; ++i) block[i] = 1;  // 1.45 s
    const auto s = smooth_prediction(block, 1.0, rate);
    for (std::size_t i = 500 + 20; i < 1000 - 20; ++i) CHECK(s[i] == 1);
    CHECK(s[100] == 0);
    CHECK(s[1900] == 0);
  }

  TEST_CASE("smoothing is a centred majority vote with truncated edges") {
    std::mt19937 rng(24);
    std::bernoulli_distribution coin(0.5);
    std::vector<std::uint8_t> v(300);
    for (auto& x : v) x = coin(rng);
    const long long width = 31;  // 0.09 s at the melody frame rate
    const auto s = smooth_prediction(v, 31.0 / kMelodyGrid.frame_rate(), kMelodyGrid.frame_rate());
    for (long long i = 0; i < 300; ++i) {
      int ones = 0, count = 0;
      for (long long j = i - (width - 1) / 2; j <= i + width / 2; ++j) {
        if (j < 0 || j >= 300) continue;
        ones += v[static_cast<std::size_t>(j)];
        ++count;
      }
      CHECK(s[static_cast<std::size_t>(i)] == (2 * ones >= count ? 1 : 0));
    }
  }

  TEST_CASE("contour deletion") {
    PitchContour c;
    c.f0 = {0, 200, 201, 202, 0, 0, 300, 301, 0, 400, 401, 402, 0};
    c.rebuild();
    std::vector<std::uint8_t> v{0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1};
    const auto r = filter_contours(c, v);
    // inside, outside, overlapping by one frame
    CHECK(r.contour.f0 == std::vector<double>{0, 200, 201, 202, 0, 0, 0, 0, 0, 400, 401, 402, 0});
    CHECK(r.deleted_contours == 1);
    CHECK(r.deleted_frames == 2);
    CHECK(r.contour.contours == std::vector<ContourSpan>{{1, 3}, {9, 11}});
  }

  TEST_CASE("deletion never alters kept pitches and counts deleted frames") {
    std::mt19937 rng(25);
    std::bernoulli_distribution coin(0.5), sparse(0.1);
    std::uniform_real_distribution<double> pitch(150.0, 600.0);
    for (int trial = 0; trial < 100; ++trial) {
      PitchContour c;
      c.f0.resize(200);
      for (auto& f : c.f0) f = coin(rng) ? pitch(rng) : 0.0;
      c.rebuild();
      std::vector<std::uint8_t> v(200);
      for (auto& x : v) x = sparse(rng);
      const auto r = filter_contours(c, v);
      std::size_t removed = 0;
      for (std::size_t n = 0; n < 200; ++n) {
        if (r.contour.f0[n] > 0.0) CHECK(r.contour.f0[n] == c.f0[n]);
        removed += c.f0[n] > 0.0 && r.contour.f0[n] == 0.0;
      }
      CHECK(removed == r.deleted_frames);
      std::size_t lengths = 0;
      for (const auto& s : c.contours) {
        bool any = false;
        for (std::size_t n = s.first; n <= s.last; ++n) any = any || v[n];
        if (!any) lengths += s.length();
      }
      CHECK(lengths == r.deleted_frames);
    }
  }

  TEST_CASE("rescaled features give the same predictions") {
    std::mt19937 rng(26);
    const auto plus = draw(FeatureVector::Constant(4.0), random_factor(rng), 300, rng);
    const auto minus = draw(FeatureVector::Constant(1.0), random_factor(rng), 300, rng);
    std::vector<BarkVector> features(plus);
    features.insert(features.end(), minus.begin(), minus.end());
    std::vector<bool> voiced(600, false);
    for (std::size_t i = 0; i < 300; ++i) voiced[i] = true;
    const auto contour = labels(voiced);
    const auto base = classify_frames(features, *fit_models(features, contour).model);
    for (double c : {0.01, 3.0, 250.0}) {
      auto scaled = features;
      for (auto& b : scaled) {
        for (auto& x : b) x *= c;
      }
      CHECK(classify_frames(scaled, *fit_models(scaled, contour).model) == base);
    }
  }

  TEST_CASE("voice-band tones survive and low guitar tones are removed") {
    // Alternating 3 s sections: a 300 Hz voice-like tone with harmonics to
    // 4 kHz, then a plucked 110 Hz tone with partials to 600 Hz. Fractions are
    // taken over every frame of each section, after melody extraction and
    // contour filtering.
    const double section = 3.0;
    const int sections = 8;
    const double total = section * sections;
    std::vector<Pluck> plucks;
    for (int s = 1; s < sections; s += 2) {
      for (double t = s * section; t < (s + 1) * section - 0.1; t += 0.2) plucks.push_back({t, 110.0, 0.14});
    }
    const auto guitar = synth_plucks(plucks, total);
    std::vector<Phrase> phrases;
    for (int s = 0; s < sections; s += 2) phrases.push_back({s * section + 0.05, {{section - 0.1, 62}}});
    VoiceSettings vs;
    vs.tuning_cents = 0.0;
    const auto voice = synth_voice(phrases, total, vs);
    std::vector<double> signal(voice.size());
    for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = voice[i] + guitar[i];
    const auto clip = mono(signal);

    const auto melody = extract_predominant(clip, 0);
    const auto bark = bark_energies(clip, 0);
    const auto fit = fit_models(bark, melody);
    REQUIRE(fit.model);
    const auto smoothed = smooth_prediction(classify_frames(bark, *fit.model), 1.0, melody.frame_rate());
    const auto filtered = filter_contours(melody, smoothed).contour;

    std::size_t voice_frames = 0, voice_kept = 0, guitar_frames = 0, guitar_kept = 0;
    for (std::size_t n = 0; n < filtered.f0.size(); ++n) {
      const bool in_voice = static_cast<int>(filtered.frame_time(n) / section) % 2 == 0;
      (in_voice ? voice_frames : guitar_frames) += 1;
      if (filtered.f0[n] > 0.0) (in_voice ? voice_kept : guitar_kept) += 1;
    }
    CHECK(static_cast<double>(guitar_kept) <= 0.1 * static_cast<double>(guitar_frames));
    CHECK(static_cast<double>(voice_kept) >= 0.9 * static_cast<double>(voice_frames));
  }
}
