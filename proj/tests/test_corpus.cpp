#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "pvad/corpus.hpp"
#include "pvad/errors.hpp"
#include "pvad/kernels.hpp"
#include "pvad/rng.hpp"

using namespace pvad;

namespace {

SynthSpec desk_spec() {
    SynthSpec spec;
    spec.seed = 7;
    return spec;
}

// band energy via Hann-windowed periodograms; the window keeps leakage from
// the strong low band far below the measured high band
double band_energy(const AudioClip& clip, double lo_hz, double hi_hz) {
    const int n = 4096;
    double total = 0.0;
    const double bin_hz = static_cast<double>(clip.sample_rate_hz) / n;
    for (std::size_t start = 0; start + n <= clip.samples.size(); start += n) {
        std::vector<std::complex<double>> buf(n);
        for (int i = 0; i < n; ++i) {
            const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n));
            buf[i] = {static_cast<double>(clip.samples[start + i]) * w, 0.0};
        }
        fft(buf, false);
        for (int b = 0; b <= n / 2; ++b) {
            const double f = b * bin_hz;
            if (f >= lo_hz && f < hi_hz) total += std::norm(buf[b]);
        }
    }
    return total;
}

} // namespace

TEST_CASE("target speech synthesis is deterministic") {
    SynthSpec spec = desk_spec();
    TargetSynth a = synth_target_speech(spec, 3, 5.0, 1234);
    TargetSynth b = synth_target_speech(spec, 3, 5.0, 1234);
    CHECK(a.s_bc.samples == b.s_bc.samples);
    CHECK(a.s_ac.samples == b.s_ac.samples);
    CHECK(a.bursts == b.bursts);

    TargetSynth c = synth_target_speech(spec, 3, 5.0, 1235);
    CHECK(a.s_ac.samples != c.s_ac.samples);
}

TEST_CASE("bone channel suppresses the high band of target speech") {
    SynthSpec spec = desk_spec();
    TargetSynth t = synth_target_speech(spec, 1, 10.0, 99);
    const double hi_ac = band_energy(t.s_ac, 4000.0, 8000.0);
    const double hi_bc = band_energy(t.s_bc, 4000.0, 8000.0);
    REQUIRE(hi_ac > 0.0);
    CHECK(10.0 * std::log10(hi_ac / hi_bc) >= 20.0);
}

TEST_CASE("burst occupancy stays in the 30-70% band across 100 clips") {
    SynthSpec spec = desk_spec();
    for (int i = 0; i < 100; ++i) {
        TargetSynth t = synth_target_speech(spec, i % spec.n_speakers, 30.0, 5000 + i);
        double active = 0.0;
        for (const auto& [b0, b1] : t.bursts) active += b1 - b0;
        const double frac = active / 30.0;
        CHECK(frac > 0.30);
        CHECK(frac < 0.70);
    }
}

TEST_CASE("external BC variant sits exactly attenuation below the lowpassed AC variant") {
    SynthSpec spec = desk_spec();
    ChannelPair pair = synth_external(spec, Role::ExternalNoise, 5.0, 321);

    SynthSpec no_att = spec;
    no_att.bc_external_attenuation_db = 0.0;
    AudioClip lp_only = bc_couple_external(pair.ac, no_att);

    const double got = measure_level(pair.bc, LevelMode::RmsDbfs);
    const double ref = measure_level(lp_only, LevelMode::RmsDbfs);
    CHECK(got == doctest::Approx(ref - spec.bc_external_attenuation_db).epsilon(0.01));
}

TEST_CASE("external synthesis is deterministic per seed") {
    SynthSpec spec = desk_spec();
    ChannelPair a = synth_external(spec, Role::ExternalSpeech, 3.0, 77);
    ChannelPair b = synth_external(spec, Role::ExternalSpeech, 3.0, 77);
    CHECK(a.ac.samples == b.ac.samples);
    CHECK(a.bc.samples == b.bc.samples);
}

TEST_CASE("pink noise falls 3 dB per octave in mean density") {
    std::vector<float> pink = synth_pink_noise(16000 * 20, 42);
    AudioClip clip;
    clip.samples = std::move(pink);

    double prev_density = 0.0;
    double lo = 125.0;
    while (lo < 4000.0) {
        const double hi = lo * 2.0;
        const double density = band_energy(clip, lo, hi) / (hi - lo);
        if (prev_density > 0.0) {
            const double step_db = 10.0 * std::log10(density / prev_density);
            CHECK(step_db == doctest::Approx(-3.01).epsilon(0.34)); // +-1 dB
        }
        prev_density = density;
        lo = hi;
    }
}

TEST_CASE("make_mixture hits the target SNR before level rescale") {
    SynthSpec spec = desk_spec();
    TargetSynth t = synth_target_speech(spec, 0, 5.0, 11);
    ChannelPair es = synth_external(spec, Role::ExternalSpeech, 5.0, 12);
    ChannelPair en = synth_external(spec, Role::ExternalNoise, 5.0, 13);

    MixSpec mix;
    mix.target_snr_db = 12.0;
    mix.level_dbfs = -25.0;
    LabeledClip clip = make_mixture(t, es, en, mix);
    CHECK(mix.gamma > 0.0);

    CHECK(snr_db(clip.s_bc, clip.eta_bc, mix.gamma) == doctest::Approx(12.0).epsilon(1e-9));
    // the common level gain leaves the SNR unchanged: verify on the mixture
    AudioClip resynth = mix_scaled(clip.s_bc, clip.eta_bc, static_cast<float>(mix.gamma));
    const double measured = snr_db(clip.s_bc, clip.eta_bc, mix.gamma);
    CHECK(measured == doctest::Approx(mix.target_snr_db).epsilon(1e-6));
    CHECK(measure_level(clip.y_bc, LevelMode::RmsDbfs) == doctest::Approx(-25.0).epsilon(1e-4));
    CHECK(measure_level(clip.y_ac, LevelMode::RmsDbfs) == doctest::Approx(-25.0).epsilon(1e-4));
    // rescaled mixture is a pure gain of the pre-rescale mixture
    const double g = clip.y_bc.samples[1000] / resynth.samples[1000];
    for (std::size_t i = 2000; i < 2050; ++i)
        CHECK(clip.y_bc.samples[i] == doctest::Approx(resynth.samples[i] * g).epsilon(1e-4));
}

TEST_CASE("very high target SNR degenerates to the clean signal") {
    SynthSpec spec = desk_spec();
    TargetSynth t = synth_target_speech(spec, 0, 5.0, 21);
    ChannelPair es = synth_external(spec, Role::ExternalSpeech, 5.0, 22);
    ChannelPair en = synth_external(spec, Role::ExternalNoise, 5.0, 23);
    MixSpec mix;
    mix.target_snr_db = 300.0; // gamma -> ~0
    LabeledClip clip = make_mixture(t, es, en, mix);

    AudioClip s_rescaled = rescale_to_level(clip.s_bc, mix.level_dbfs, LevelMode::RmsDbfs);
    for (std::size_t i = 0; i < clip.y_bc.samples.size(); i += 997)
        CHECK(clip.y_bc.samples[i] == doctest::Approx(s_rescaled.samples[i]).epsilon(1e-4));
}

TEST_CASE("labels_from_norms formula") {
    std::vector<double> norms{0.0, 1.0, 2.0, 3.0};
    // T = 0 + 0.3 * 1.5 = 0.45
    std::vector<uint8_t> expected{0, 1, 1, 1};
    CHECK(labels_from_norms(norms) == expected);

    std::vector<double> equal(10, 3.0); // T = 3 + 0.9 > 3 -> all inactive
    for (uint8_t v : labels_from_norms(equal)) CHECK(v == 0);

    std::vector<double> too_short{1.0};
    CHECK_THROWS_AS(labels_from_norms(too_short), ShapeError);
}

TEST_CASE("generated labels overlap the true bursts with IoU > 0.8") {
    SynthSpec spec = desk_spec();
    FrameConfig cfg;
    TargetSynth t = synth_target_speech(spec, 4, 30.0, 404);
    std::vector<uint8_t> labels = generate_labels(t.s_ref, cfg);

    // ground-truth frame mask from the generator's burst intervals
    const double fs = spec.sample_rate_hz;
    std::vector<uint8_t> truth(labels.size(), 0);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const double center = (k * cfg.hop + cfg.frame_len / 2.0) / fs;
        for (const auto& [b0, b1] : t.bursts)
            if (center >= b0 && center < b1) {
                truth[k] = 1;
                break;
            }
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        inter += labels[k] & truth[k];
        uni += labels[k] | truth[k];
    }
    REQUIRE(uni > 0);
    CHECK(static_cast<double>(inter) / uni > 0.8);
}

TEST_CASE("smooth_labels is the truncated causal moving average") {
    std::vector<uint8_t> ones(50, 1);
    for (double v : smooth_labels(ones)) CHECK(v == doctest::Approx(1.0));

    std::vector<uint8_t> step(60, 0);
    for (std::size_t i = 30; i < step.size(); ++i) step[i] = 1;
    auto sm = smooth_labels(step);
    for (int j = 0; j < 20; ++j)
        CHECK(sm[30 + j] == doctest::Approx((j + 1) / 20.0));
    CHECK(sm[49] == doctest::Approx(1.0));

    Rng rng(55);
    std::vector<uint8_t> raw(200);
    for (auto& v : raw) v = rng.uniform() < 0.5 ? 1 : 0;
    auto smoothed = smooth_labels(raw);
    for (std::size_t n = 0; n < raw.size(); ++n) {
        const std::size_t lo = n >= 19 ? n - 19 : 0;
        double mean = 0.0;
        for (std::size_t i = lo; i <= n; ++i) mean += raw[i];
        mean /= (n - lo + 1);
        CHECK(smoothed[n] == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("build_dataset writes a reproducible on-disk corpus") {
    SynthSpec spec = desk_spec();
    spec.train_hours = 2.0 / 60.0; // 4 clips
    spec.test_hours = 1.0 / 60.0;  // 2 clips
    const std::string dir = "pvad_test_corpus";
    std::filesystem::remove_all(dir);

    DatasetManifest manifest = build_dataset(spec, dir);
    CHECK(manifest.split("train").size() == 4);
    CHECK(manifest.split("test").size() == 2);
    const double sum =
        manifest.report.frac_low + manifest.report.frac_mid + manifest.report.frac_high;
    CHECK(sum == doctest::Approx(1.0));

    // speaker pools are disjoint
    std::set<int> train_speakers, test_speakers;
    for (const auto& c : manifest.clips)
        (c.split == "train" ? train_speakers : test_speakers).insert(c.speaker);
    for (int s : train_speakers) CHECK(test_speakers.count(s) == 0);

    // manifest round-trips and clips regenerate bit-identically
    DatasetManifest loaded = load_manifest(dir + "/manifest.json");
    REQUIRE(loaded.clips.size() == manifest.clips.size());
    const ClipInfo& info = loaded.clips[0];
    LabeledClip from_disk = load_clip(loaded, info);
    LabeledClip regen = synth_clip(loaded.spec, info);
    REQUIRE(from_disk.raw_labels.size() == regen.raw_labels.size());
    CHECK(from_disk.raw_labels == regen.raw_labels);
    CHECK(info.n_frames == static_cast<int>(regen.raw_labels.size()));
    // disk copies differ from the regeneration only by 16-bit quantization
    for (std::size_t i = 0; i < regen.y_bc.samples.size(); i += 1777)
        CHECK(std::fabs(from_disk.y_bc.samples[i] - regen.y_bc.samples[i]) <= 1.0f / 32768.0f);

    // feature loading produces aligned sequences
    FrameConfig cfg;
    auto seqs = load_split_features(loaded, "test", Channel::BC, cfg);
    REQUIRE(seqs.size() == 2);
    CHECK(seqs[0].features.size() == seqs[0].targets.size());
    CHECK(static_cast<int>(seqs[0].features.size()) == loaded.split("test")[0]->n_frames);

    std::filesystem::remove_all(dir);
}

TEST_CASE("channel calibration: mean SNR advantage is 15 +- 3 dB") {
    SynthSpec spec = desk_spec();
    const double adv = measure_snr_advantage(spec, 30);
    CHECK(adv > 12.0);
    CHECK(adv < 18.0);
}
