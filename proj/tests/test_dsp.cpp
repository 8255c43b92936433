#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "pvad/dsp.hpp"
#include "pvad/errors.hpp"
#include "pvad/rng.hpp"

using namespace pvad;

namespace {

// Brute-force O(n^2) DFT magnitude oracle, independent of the fft path.
std::vector<double> naive_dft_mag(const std::vector<double>& x, int fft_len) {
    std::vector<double> mag(fft_len / 2 + 1);
    for (int k = 0; k <= fft_len / 2; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (int n = 0; n < static_cast<int>(x.size()); ++n) {
            double a = -2.0 * M_PI * k * n / fft_len;
            acc += x[n] * std::complex<double>{std::cos(a), std::sin(a)};
        }
        mag[k] = std::abs(acc);
    }
    return mag;
}

AudioClip make_clip(const std::vector<double>& samples) {
    AudioClip c;
    c.samples.reserve(samples.size());
    for (double v : samples) c.samples.push_back(static_cast<float>(v));
    return c;
}

} // namespace

TEST_CASE("frame_stream counts and offsets") {
    FrameConfig cfg;
    AudioClip c;

    c.samples.assign(319, 0.1f);
    CHECK(frame_stream(c, cfg).empty());

    c.samples.assign(320, 0.1f);
    CHECK(frame_stream(c, cfg).size() == 1);

    c.samples.assign(480, 0.0f);
    for (int i = 0; i < 480; ++i) c.samples[i] = static_cast<float>(i);
    auto frames = frame_stream(c, cfg);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0][0] == 0.0);
    CHECK(frames[1][0] == 160.0);

    c.samples.assign(16000, 0.1f);
    CHECK(frame_stream(c, cfg).size() == 99);
}

TEST_CASE("hamming window coefficients and symmetry") {
    FrameConfig cfg;
    const auto& w = hamming_coefficients(cfg.frame_len);
    CHECK(w[0] == doctest::Approx(0.08));
    CHECK(w[cfg.frame_len - 1] == doctest::Approx(0.08));
    for (int n = 0; n < cfg.frame_len; ++n)
        CHECK(w[n] == doctest::Approx(w[cfg.frame_len - 1 - n]).epsilon(1e-12));

    std::vector<double> ones(cfg.frame_len, 1.0);
    auto windowed = hamming_window(ones, cfg);
    for (int n = 0; n < cfg.frame_len; ++n)
        CHECK(windowed[n] == w[n]);

    std::vector<double> wrong(100, 1.0);
    CHECK_THROWS_AS(hamming_window(wrong, cfg), ShapeError);
}

TEST_CASE("rfft_mag of a unit impulse is flat") {
    FrameConfig cfg;
    std::vector<double> frame(cfg.frame_len, 0.0);
    frame[0] = 1.0;
    auto mag = rfft_mag(frame, cfg);
    REQUIRE(static_cast<int>(mag.size()) == cfg.n_bins());
    for (double m : mag) CHECK(m == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rfft_mag concentrates a bin-aligned cosine") {
    FrameConfig cfg;
    const int k = 32; // 1000 Hz at 31.25 Hz/bin
    // full fft_len cosine so the bin is exact (no zero-pad leakage)
    std::vector<double> frame(cfg.fft_len);
    for (int n = 0; n < cfg.fft_len; ++n)
        frame[n] = std::cos(2.0 * M_PI * k * n / cfg.fft_len);
    auto mag = rfft_mag(frame, cfg);
    int argmax = 0;
    for (int b = 0; b < cfg.n_bins(); ++b)
        if (mag[b] > mag[argmax]) argmax = b;
    CHECK(argmax == k);
    CHECK(mag[k] == doctest::Approx(cfg.fft_len / 2.0).epsilon(1e-9));
}

TEST_CASE("rfft_mag matches the naive DFT oracle") {
    FrameConfig cfg;
    Rng rng(41);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> frame(cfg.frame_len);
        for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
        auto fast = rfft_mag(frame, cfg);
        auto slow = naive_dft_mag(frame, cfg.fft_len);
        double num = 0.0, den = 0.0;
        for (int b = 0; b < cfg.n_bins(); ++b) {
            num += (fast[b] - slow[b]) * (fast[b] - slow[b]);
            den += slow[b] * slow[b];
        }
        CHECK(std::sqrt(num / den) < 1e-6);
    }
}

TEST_CASE("fft inverse round-trips") {
    Rng rng(5);
    std::vector<std::complex<double>> x(256);
    for (auto& v : x) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto orig = x;
    fft(x, false);
    fft(x, true);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(std::abs(x[i] - orig[i]) < 1e-12);
    std::vector<std::complex<double>> bad(100);
    CHECK_THROWS_AS(fft(bad, false), ShapeError);
}

TEST_CASE("mel scale formula") {
    CHECK(hz_to_mel(0.0) == doctest::Approx(0.0));
    CHECK(hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
    CHECK(mel_to_hz(hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-10));
}

TEST_CASE("mel filterbank structure") {
    FrameConfig cfg;
    MelFilterbank fb = build_mel_filterbank(cfg);
    REQUIRE(fb.n_mels == 32);
    REQUIRE(static_cast<int>(fb.band_edges_hz.size()) == 34);
    CHECK(fb.band_edges_hz.front() == doctest::Approx(0.0));
    CHECK(fb.band_edges_hz.back() == doctest::Approx(8000.0).epsilon(1e-9));
    for (std::size_t i = 1; i < fb.band_edges_hz.size(); ++i)
        CHECK(fb.band_edges_hz[i] > fb.band_edges_hz[i - 1]);

    for (double w : fb.weights) CHECK(w >= 0.0);

    // interior bins (strictly between first and last centers) sum to one
    const double bin_hz = static_cast<double>(cfg.sample_rate_hz) / cfg.fft_len;
    const double first_center = fb.center_hz(0);
    const double last_center = fb.center_hz(fb.n_mels - 1);
    int interior = 0;
    for (int b = 0; b < fb.n_bins; ++b) {
        double f = b * bin_hz;
        if (f <= first_center || f >= last_center) continue;
        double sum = 0.0;
        for (int m = 0; m < fb.n_mels; ++m)
            sum += fb.weights[static_cast<std::size_t>(m) * fb.n_bins + b];
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
        ++interior;
    }
    CHECK(interior > 200);
}

TEST_CASE("extract_features floors all-zero frames at log(eps)") {
    FrameConfig cfg;
    MelFilterbank fb = build_mel_filterbank(cfg);
    std::vector<double> frame(cfg.frame_len, 0.0);
    FeatureVector fv = extract_features(frame, fb, cfg);
    REQUIRE(fv.values.size() == 32);
    for (double v : fv.values)
        CHECK(v == doctest::Approx(std::log(1e-6)).epsilon(1e-9));
    CHECK(fv.energy_db == doctest::Approx(-60.0).epsilon(1e-9));
}

TEST_CASE("doubling the frame shifts log features by log 2") {
    FrameConfig cfg;
    MelFilterbank fb = build_mel_filterbank(cfg);
    Rng rng(17);
    std::vector<double> frame(cfg.frame_len), frame2(cfg.frame_len);
    for (int i = 0; i < cfg.frame_len; ++i) {
        frame[i] = rng.uniform(-0.5, 0.5);
        frame2[i] = 2.0 * frame[i];
    }
    FeatureVector a = extract_features(frame, fb, cfg);
    FeatureVector b = extract_features(frame2, fb, cfg);
    for (int m = 0; m < 32; ++m) {
        if (a.values[m] > std::log(1e-6) + 6.0) // mel magnitude well above eps
            CHECK(b.values[m] - a.values[m] == doctest::Approx(std::log(2.0)).epsilon(1e-3));
    }
}

TEST_CASE("a 1 kHz tone lands in the nearest mel filter") {
    FrameConfig cfg;
    MelFilterbank fb = build_mel_filterbank(cfg);
    std::vector<double> frame(cfg.frame_len);
    for (int n = 0; n < cfg.frame_len; ++n)
        frame[n] = std::sin(2.0 * M_PI * 1000.0 * n / cfg.sample_rate_hz);
    FeatureVector fv = extract_features(frame, fb, cfg);
    int argmax = 0;
    for (int m = 0; m < 32; ++m)
        if (fv.values[m] > fv.values[argmax]) argmax = m;
    int nearest = 0;
    for (int m = 0; m < 32; ++m)
        if (std::fabs(fb.center_hz(m) - 1000.0) < std::fabs(fb.center_hz(nearest) - 1000.0))
            nearest = m;
    CHECK(std::abs(argmax - nearest) <= 1);
}

TEST_CASE("spectral energy obeys Parseval") {
    FrameConfig cfg;
    Rng rng(29);
    std::vector<double> frame(cfg.frame_len);
    for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
    auto windowed = hamming_window(frame, cfg);
    auto mag = rfft_mag(windowed, cfg);

    double time_energy = 0.0;
    for (double v : windowed) time_energy += v * v;
    double spec_energy = mag.front() * mag.front() + mag.back() * mag.back();
    for (std::size_t b = 1; b + 1 < mag.size(); ++b) spec_energy += 2.0 * mag[b] * mag[b];
    spec_energy /= cfg.fft_len;

    CHECK(spec_energy == doctest::Approx(time_energy).epsilon(1e-6));
}

TEST_CASE("feature extraction is deterministic") {
    FrameConfig cfg;
    MelFilterbank fb = build_mel_filterbank(cfg);
    Rng rng(31);
    std::vector<double> frame(cfg.frame_len);
    for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
    FeatureVector a = extract_features(frame, fb, cfg, 3);
    FeatureVector b = extract_features(frame, fb, cfg, 3);
    CHECK(a.energy_db == b.energy_db);
    for (int m = 0; m < 32; ++m) CHECK(a.values[m] == b.values[m]);
}
