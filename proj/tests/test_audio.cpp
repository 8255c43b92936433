#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pvad/audio.hpp"
#include "pvad/errors.hpp"
#include "pvad/rng.hpp"

using namespace pvad;

namespace {

std::string temp_path(const std::string& name) {
    return std::string("pvad_test_") + name;
}

// Minimal PCM16 writer with exact sample words, independent of write_wav.
void write_raw_pcm16(const std::string& path, const std::vector<int16_t>& samples, uint32_t rate) {
    std::ofstream f(path, std::ios::binary);
    uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
    uint32_t riff_size = 36 + data_size;
    uint32_t byte_rate = rate * 2;
    uint16_t fmt16[2] = {1, 1};
    uint16_t block[2] = {2, 16};
    uint32_t fmt_size = 16;
    f.write("RIFF", 4);
    f.write(reinterpret_cast<char*>(&riff_size), 4);
    f.write("WAVEfmt ", 8);
    f.write(reinterpret_cast<char*>(&fmt_size), 4);
    f.write(reinterpret_cast<char*>(fmt16), 4);
    f.write(reinterpret_cast<char*>(&rate), 4);
    f.write(reinterpret_cast<char*>(&byte_rate), 4);
    f.write(reinterpret_cast<char*>(block), 4);
    f.write("data", 4);
    f.write(reinterpret_cast<char*>(&data_size), 4);
    f.write(reinterpret_cast<const char*>(samples.data()), data_size);
}

} // namespace

TEST_CASE("read_wav scales 16-bit PCM to [-1, 1]") {
    auto path = temp_path("pcm16.wav");
    write_raw_pcm16(path, {0, 16384, -32768}, 16000);
    AudioClip clip = read_wav(path);
    REQUIRE(clip.samples.size() == 3);
    CHECK(clip.samples[0] == doctest::Approx(0.0));
    CHECK(clip.samples[1] == doctest::Approx(0.5));
    CHECK(clip.samples[2] == doctest::Approx(-1.0));
    CHECK(clip.sample_rate_hz == 16000);
    std::remove(path.c_str());
}

TEST_CASE("read_wav returns header sample count and rate") {
    auto path = temp_path("onesec.wav");
    write_raw_pcm16(path, std::vector<int16_t>(16000, 123), 16000);
    AudioClip clip = read_wav(path);
    CHECK(clip.samples.size() == 16000);
    std::remove(path.c_str());
}

TEST_CASE("read_wav rejects malformed and unsupported files") {
    auto path = temp_path("bad.wav");
    {
        std::ofstream f(path, std::ios::binary);
        f << "not a wav at all";
    }
    CHECK_THROWS_AS(read_wav(path), FormatError);
    CHECK_THROWS_AS(read_wav("does_not_exist.wav"), FileError);
    std::remove(path.c_str());
}

TEST_CASE("write_wav clamps out-of-range samples") {
    auto path = temp_path("clamp.wav");
    AudioClip clip;
    clip.samples = {1.5f, -2.0f};
    write_wav(clip, path);
    AudioClip back = read_wav(path);
    CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
    CHECK(back.samples[1] == doctest::Approx(-1.0));
    std::remove(path.c_str());
}

TEST_CASE("write_wav stores silence as zero words") {
    auto path = temp_path("zeros.wav");
    AudioClip clip;
    clip.samples.assign(64, 0.0f);
    write_wav(clip, path);

    std::ifstream f(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    // find the data chunk payload and verify it is all-zero
    std::size_t pos = 12;
    bool checked = false;
    while (pos + 8 <= bytes.size()) {
        uint32_t size;
        std::memcpy(&size, bytes.data() + pos + 4, 4);
        if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            for (std::size_t i = 0; i < size; ++i)
                REQUIRE(bytes[pos + 8 + i] == 0);
            checked = true;
            break;
        }
        pos += 8 + size;
    }
    CHECK(checked);
    std::remove(path.c_str());
}

TEST_CASE("wav round-trip preserves samples within one quantization step") {
    auto path = temp_path("roundtrip.wav");
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        AudioClip clip;
        clip.samples.resize(200);
        for (auto& v : clip.samples) v = static_cast<float>(rng.uniform(-1.0, 1.0));
        write_wav(clip, path);
        AudioClip back = read_wav(path);
        REQUIRE(back.samples.size() == clip.samples.size());
        for (std::size_t i = 0; i < clip.samples.size(); ++i)
            CHECK(std::fabs(back.samples[i] - clip.samples[i]) <= 1.0f / 32768.0f);
    }
    std::remove(path.c_str());
}

TEST_CASE("resample_to_16k is identity at 16 kHz") {
    AudioClip clip;
    clip.sample_rate_hz = 16000;
    clip.samples = {0.1f, 0.2f, 0.3f};
    AudioClip out = resample_to_16k(clip);
    CHECK(out.samples == clip.samples);
}

TEST_CASE("resample_to_16k rejects unsupported rates") {
    AudioClip clip;
    clip.sample_rate_hz = 11025;
    clip.samples.assign(100, 0.0f);
    CHECK_THROWS_AS(resample_to_16k(clip), FormatError);
}

TEST_CASE("resample_to_16k preserves duration within one sample") {
    Rng rng(3);
    for (int rate : {8000, 22050, 44100, 48000}) {
        AudioClip clip;
        clip.sample_rate_hz = rate;
        clip.samples.resize(rate); // one second
        for (auto& v : clip.samples) v = static_cast<float>(rng.uniform(-0.5, 0.5));
        AudioClip out = resample_to_16k(clip);
        CHECK(std::llabs(static_cast<long long>(out.samples.size()) - 16000) <= 1);
        CHECK(out.sample_rate_hz == 16000);
    }
}

TEST_CASE("resampled 48 kHz sine matches the analytic 16 kHz sine") {
    const double f0 = 1000.0;
    AudioClip clip;
    clip.sample_rate_hz = 48000;
    clip.samples.resize(48000);
    for (std::size_t n = 0; n < clip.samples.size(); ++n)
        clip.samples[n] = static_cast<float>(0.7 * std::sin(2.0 * M_PI * f0 * n / 48000.0));

    AudioClip out = resample_to_16k(clip);
    REQUIRE(out.samples.size() >= 16000);
    // skip the filter transient at both ends (32-tap prototype)
    const std::size_t guard = 32;
    for (std::size_t n = guard; n + guard < 16000; ++n) {
        double expected = 0.7 * std::sin(2.0 * M_PI * f0 * n / 16000.0);
        CHECK(std::fabs(out.samples[n] - expected) < 1e-3);
    }
}

TEST_CASE("measure_level handles both conventions") {
    AudioClip ones;
    ones.samples.assign(256, 1.0f);
    CHECK(measure_level(ones, LevelMode::PeakDbfs) == doctest::Approx(0.0));
    CHECK(measure_level(ones, LevelMode::RmsDbfs) == doctest::Approx(0.0));

    AudioClip half;
    half.samples.assign(256, 0.5f);
    CHECK(measure_level(half, LevelMode::PeakDbfs) == doctest::Approx(-6.0206).epsilon(1e-4));

    AudioClip sine;
    sine.samples.resize(16000);
    for (std::size_t n = 0; n < sine.samples.size(); ++n)
        sine.samples[n] = static_cast<float>(std::sin(2.0 * M_PI * 100.0 * n / 16000.0));
    CHECK(measure_level(sine, LevelMode::RmsDbfs) == doctest::Approx(-3.0103).epsilon(1e-3));

    AudioClip zeros;
    zeros.samples.assign(10, 0.0f);
    CHECK_THROWS_AS(measure_level(zeros, LevelMode::PeakDbfs), NumericError);
    CHECK_THROWS_AS(measure_level(zeros, LevelMode::RmsDbfs), NumericError);
}

TEST_CASE("rescale_to_level hits the target and is idempotent") {
    Rng rng(7);
    AudioClip clip;
    clip.samples.resize(4000);
    for (auto& v : clip.samples) v = static_cast<float>(rng.uniform(-0.3, 0.3));

    AudioClip scaled = rescale_to_level(clip, -28.0, LevelMode::RmsDbfs);
    CHECK(measure_level(scaled, LevelMode::RmsDbfs) == doctest::Approx(-28.0).epsilon(1e-5));
    AudioClip again = rescale_to_level(scaled, -28.0, LevelMode::RmsDbfs);
    for (std::size_t i = 0; i < again.samples.size(); ++i)
        CHECK(again.samples[i] == doctest::Approx(scaled.samples[i]).epsilon(1e-6));

    AudioClip ones;
    ones.samples.assign(100, 1.0f);
    AudioClip peak = rescale_to_level(ones, -15.0, LevelMode::PeakDbfs);
    CHECK(peak.samples[0] == doctest::Approx(0.17783).epsilon(1e-4));
}

TEST_CASE("snr_gain closed forms") {
    AudioClip s, n;
    s.samples.assign(100, 1.0f);   // ||s||^2 = 100 exactly
    n.samples.assign(64, 0.125f);  // ||n||^2 = 1 exactly (0.125 is binary-exact)
    n.samples.resize(100, 0.0f);
    CHECK(snr_gain(s, n, 10.0) == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));

    AudioClip m = s;
    CHECK(snr_gain(s, m, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    AudioClip z;
    z.samples.assign(100, 0.0f);
    CHECK_THROWS_AS(snr_gain(s, z, 0.0), NumericError);
}

TEST_CASE("snr_gain followed by SNR measurement is the identity") {
    Rng rng(15);
    for (int trial = 0; trial < 50; ++trial) {
        AudioClip s, n;
        s.samples.resize(2048);
        n.samples.resize(2048);
        for (auto& v : s.samples) v = static_cast<float>(rng.uniform(-0.8, 0.8));
        for (auto& v : n.samples) v = static_cast<float>(rng.uniform(-0.8, 0.8));
        double target = rng.uniform(-20.0, 30.0);
        double gamma = snr_gain(s, n, target);
        CHECK(std::fabs(snr_db(s, n, gamma) - target) < 1e-9);
    }
}
