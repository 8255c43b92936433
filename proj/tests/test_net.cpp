#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "pvad/errors.hpp"
#include "pvad/net.hpp"
#include "pvad/rng.hpp"

using namespace pvad;

namespace {

// Reduced configuration for the finite-difference oracle: same topology,
// small enough that perturbing every parameter stays cheap.
NetConfig reduced_config() {
    NetConfig cfg;
    cfg.n_mels = 8;
    cfg.conv1 = {1, 4, 3, 2};
    cfg.conv2 = {4, 8, 3, 2};
    cfg.gru1_units = 2;
    cfg.gru2_units = 2;
    cfg.fc1_out = 4;
    return cfg;
}

std::vector<std::vector<double>> random_frames(const NetConfig& cfg, int count, uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> frames(count);
    for (auto& f : frames) {
        f.resize(cfg.n_mels);
        for (auto& v : f) v = rng.uniform(-2.0, 2.0);
    }
    return frames;
}

double sequence_loss(const NetParams& params, const std::vector<std::vector<double>>& frames,
                     const std::vector<double>& targets) {
    GruState state;
    state.reset(params.cfg);
    std::vector<double> preds(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        preds[i] = forward_frame(params, state, frames[i]);
    return bce_loss(preds, targets);
}

} // namespace

TEST_CASE("parameter count matches the layer arithmetic") {
    NetConfig cfg;
    CHECK(cfg.conv1_out_len() == 15);
    CHECK(cfg.conv2_out_len() == 7);
    CHECK(cfg.flat_len() == 224);

    NetParams p = init_params(cfg, 1);
    CHECK(p.conv1_w.size() + p.conv1_b.size() == 64);
    CHECK(p.conv2_w.size() + p.conv2_b.size() == 1568);
    CHECK(param_count(p) == 4585);
    CHECK(param_count(p) >= 4000);
    CHECK(param_count(p) <= 6000);
}

TEST_CASE("init_params is seeded and respects the Glorot bounds") {
    NetConfig cfg;
    NetParams a = init_params(cfg, 42);
    NetParams b = init_params(cfg, 42);
    auto ta = tensor_list(a);
    auto tb = tensor_list(b);
    for (std::size_t i = 0; i < ta.size(); ++i)
        CHECK(*ta[i] == *tb[i]);

    const double bound_conv1 = std::sqrt(6.0 / (3 + 48));
    for (double w : a.conv1_w) CHECK(std::fabs(w) <= bound_conv1);
    const double bound_gru1_w = std::sqrt(6.0 / (224 + 4));
    for (double w : a.gru1.wz) CHECK(std::fabs(w) <= bound_gru1_w);
    for (double v : a.conv1_b) CHECK(v == 0.0);
    for (double v : a.gru1.bh) CHECK(v == 0.0);
}

TEST_CASE("all-zero parameters give the sigmoid fixed point") {
    NetConfig cfg;
    NetParams p = init_params(cfg, 1);
    p = zeros_like(p);
    GruState state;
    state.reset(cfg);
    std::vector<double> x(cfg.n_mels, 0.7);
    double out = forward_frame(p, state, x);
    CHECK(out == doctest::Approx(0.5).epsilon(1e-12));
    for (double h : state.h1) CHECK(h == 0.0);
    for (double h : state.h2) CHECK(h == 0.0);
}

TEST_CASE("outputs stay strictly inside (0, 1)") {
    NetConfig cfg;
    NetParams p = init_params(cfg, 9);
    GruState state;
    state.reset(cfg);
    Rng rng(10);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> x(cfg.n_mels);
        for (auto& v : x) v = rng.uniform(-10.0, 10.0);
        double out = forward_frame(p, state, x);
        CHECK(out > 0.0);
        CHECK(out < 1.0);
    }
}

TEST_CASE("forward_frame validates its input") {
    NetConfig cfg;
    NetParams p = init_params(cfg, 1);
    GruState state;
    state.reset(cfg);
    std::vector<double> wrong(cfg.n_mels - 1, 0.0);
    CHECK_THROWS_AS(forward_frame(p, state, wrong), ShapeError);
    std::vector<double> nan_in(cfg.n_mels, std::nan(""));
    CHECK_THROWS_AS(forward_frame(p, state, nan_in), NumericError);
}

TEST_CASE("stateful pass equals manual state threading bit-exactly") {
    NetConfig cfg;
    NetParams p = init_params(cfg, 3);
    auto frames = random_frames(cfg, 20, 4);

    GruState streaming;
    streaming.reset(cfg);
    std::vector<double> out_stream;
    for (const auto& f : frames)
        out_stream.push_back(forward_frame(p, streaming, f));

    GruState threaded;
    threaded.reset(cfg);
    std::vector<double> out_threaded;
    for (const auto& f : frames) {
        GruState copy = threaded; // hand the state through explicitly
        out_threaded.push_back(forward_frame(p, copy, f));
        threaded = copy;
    }
    CHECK(out_stream == out_threaded);
}

TEST_CASE("bce_loss reference values") {
    std::vector<double> p{0.5}, z{1.0};
    CHECK(bce_loss(p, z) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::vector<double> perfect_p{0.0, 1.0}, perfect_z{0.0, 1.0};
    CHECK(bce_loss(perfect_p, perfect_z) <= 2e-7);

    std::vector<double> soft_p{0.5}, soft_z{0.5};
    CHECK(bce_loss(soft_p, soft_z) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    std::vector<double> bad{0.5, 0.5};
    CHECK_THROWS_AS(bce_loss(bad, z), ShapeError);
}

TEST_CASE("gradient vanishes when predictions equal targets") {
    NetConfig cfg = reduced_config();
    NetParams p = init_params(cfg, 7);
    auto frames = random_frames(cfg, 5, 8);

    GruState state;
    state.reset(cfg);
    std::vector<FrameTrace> traces(frames.size());
    std::vector<double> targets(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        targets[i] = forward_frame(p, state, frames[i], &traces[i]);

    NetParams grads = backward(p, traces, targets);
    double norm = 0.0;
    for_each_tensor(grads, [&](const char*, const std::vector<double>& t) {
        for (double v : t) norm += v * v;
    });
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("BPTT gradient matches central finite differences") {
    NetConfig cfg = reduced_config();
    NetParams p = init_params(cfg, 21);
    auto frames = random_frames(cfg, 5, 22);
    Rng rng(23);
    std::vector<double> targets(frames.size());
    for (auto& t : targets) t = rng.uniform() < 0.5 ? 0.0 : 1.0;

    GruState state;
    state.reset(cfg);
    std::vector<FrameTrace> traces(frames.size());
    std::vector<double> preds(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        preds[i] = forward_frame(p, state, frames[i], &traces[i]);
    NetParams analytic = backward(p, traces, targets);

    const double delta = 1e-4;
    auto pt = tensor_list(p);
    auto gt = tensor_list(analytic);
    double max_rel = 0.0;
    for (std::size_t ti = 0; ti < pt.size(); ++ti) {
        for (std::size_t i = 0; i < pt[ti]->size(); ++i) {
            double saved = (*pt[ti])[i];
            (*pt[ti])[i] = saved + delta;
            double lp = sequence_loss(p, frames, targets);
            (*pt[ti])[i] = saved - delta;
            double lm = sequence_loss(p, frames, targets);
            (*pt[ti])[i] = saved;
            double fd = (lp - lm) / (2.0 * delta);
            double ga = (*gt[ti])[i];
            double rel = std::fabs(fd - ga) / std::max({std::fabs(fd), std::fabs(ga), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
    }
    INFO("max relative gradient error = " << max_rel);
    CHECK(max_rel < 1e-4);
}

TEST_CASE("mean normalization makes duplicated sequences a no-op") {
    NetConfig cfg = reduced_config();
    NetParams p = init_params(cfg, 31);
    auto frames = random_frames(cfg, 6, 32);
    std::vector<double> targets(frames.size(), 1.0);

    GruState state;
    state.reset(cfg);
    std::vector<FrameTrace> traces(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        forward_frame(p, state, frames[i], &traces[i]);
    NetParams g1 = backward(p, traces, targets);

    // batch mean of two identical members
    NetParams g2 = backward(p, traces, targets);
    auto t1 = tensor_list(g1);
    auto t2 = tensor_list(g2);
    for (std::size_t ti = 0; ti < t1.size(); ++ti)
        for (std::size_t i = 0; i < t1[ti]->size(); ++i) {
            double mean = 0.5 * ((*t1[ti])[i] + (*t2[ti])[i]);
            CHECK(mean == (*t1[ti])[i]);
        }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    NetConfig cfg = reduced_config();
    NetParams p = init_params(cfg, 41);
    NetParams before = p;
    NetParams zero_grad = zeros_like(p);
    AdamState st;
    AdamConfig ac;
    adam_step(p, zero_grad, st, ac);
    auto ta = tensor_list(p);
    auto tb = tensor_list(before);
    for (std::size_t ti = 0; ti < ta.size(); ++ti)
        CHECK(*ta[ti] == *tb[ti]);
}

TEST_CASE("adam: constant gradient reaches unit-scaled steps") {
    NetConfig cfg = reduced_config();
    NetParams p = init_params(cfg, 43);
    NetParams grad = zeros_like(p);
    for_each_tensor(grad, [](const char*, std::vector<double>& t) {
        std::fill(t.begin(), t.end(), 0.5);
    });
    AdamState st;
    AdamConfig ac;
    ac.lr = 1e-3;
    NetParams prev = p;
    for (int t = 0; t < 10; ++t) {
        prev = p;
        adam_step(p, grad, st, ac);
    }
    auto tp = tensor_list(p);
    auto tq = tensor_list(prev);
    for (std::size_t ti = 0; ti < tp.size(); ++ti)
        for (std::size_t i = 0; i < tp[ti]->size(); ++i) {
            double step = std::fabs((*tp[ti])[i] - (*tq[ti])[i]);
            CHECK(step == doctest::Approx(ac.lr).epsilon(0.01));
        }
}

TEST_CASE("adam trajectories are deterministic") {
    NetConfig cfg = reduced_config();
    auto run = [&]() {
        NetParams p = init_params(cfg, 2);
        NetParams g = zeros_like(p);
        Rng rng(77);
        for_each_tensor(g, [&](const char*, std::vector<double>& t) {
            for (double& v : t) v = rng.uniform(-1.0, 1.0);
        });
        AdamState st;
        AdamConfig ac;
        for (int t = 0; t < 5; ++t) adam_step(p, g, st, ac);
        return p;
    };
    NetParams a = run();
    NetParams b = run();
    auto ta = tensor_list(a);
    auto tb = tensor_list(b);
    for (std::size_t ti = 0; ti < ta.size(); ++ti)
        CHECK(*ta[ti] == *tb[ti]);
}

TEST_CASE("plateau scheduler halves and stops per the stated policy") {
    PlateauScheduler sched(1e-3, 3, 5);
    CHECK(sched.observe(1.0));
    CHECK(sched.observe(0.9));
    CHECK(sched.observe(0.91));
    CHECK(sched.lr() == doctest::Approx(1e-3));
    CHECK(sched.observe(0.92));
    CHECK(sched.lr() == doctest::Approx(1e-3));
    CHECK(sched.observe(0.93)); // third epoch without improvement over 0.9
    CHECK(sched.lr() == doctest::Approx(0.5e-3));
    CHECK(sched.observe(0.94));       // fourth
    CHECK_FALSE(sched.observe(0.95)); // fifth without improvement -> stop
}

TEST_CASE("training on a separable toy problem reduces the loss") {
    NetConfig cfg = reduced_config();

    // class 1: loud band pattern, class 0: quiet; alternate in blocks
    auto make_seq = [&](uint64_t seed) {
        Rng rng(seed);
        LabeledSequence seq;
        int t = 0;
        while (t < 120) {
            int block = static_cast<int>(rng.uniform_int(8, 20));
            double cls = rng.uniform() < 0.5 ? 1.0 : 0.0;
            for (int i = 0; i < block && t < 120; ++i, ++t) {
                FeatureVector fv;
                fv.frame_index = t;
                fv.values.resize(cfg.n_mels);
                for (int m = 0; m < cfg.n_mels; ++m)
                    fv.values[m] = cls > 0.5 ? 1.5 + 0.2 * rng.normal() : -1.5 + 0.2 * rng.normal();
                fv.energy_db = 0.0;
                seq.features.push_back(std::move(fv));
                seq.targets.push_back(cls);
            }
        }
        return seq;
    };

    std::vector<LabeledSequence> train_set, test_set;
    for (uint64_t i = 0; i < 6; ++i) train_set.push_back(make_seq(100 + i));
    for (uint64_t i = 0; i < 2; ++i) test_set.push_back(make_seq(200 + i));

    TrainConfig tc;
    tc.steps_per_epoch = 25;
    tc.max_epochs = 3;
    tc.batch_size = 4;
    tc.bptt_len = 60;
    tc.seed = 5;
    TrainResult result = train(cfg, train_set, test_set, tc);
    REQUIRE(!result.log.empty());
    CHECK(result.log.back().test_loss < result.initial_test_loss);
}

TEST_CASE("model files round-trip through save and load") {
    NetConfig cfg;
    NetParams p = init_params(cfg, 77);
    save_model(p, "pvad_test_model");
    NetParams q = load_model("pvad_test_model");
    CHECK(param_count(q) == param_count(p));
    auto tp = tensor_list(p);
    auto tq = tensor_list(q);
    for (std::size_t ti = 0; ti < tp.size(); ++ti)
        for (std::size_t i = 0; i < tp[ti]->size(); ++i)
            CHECK((*tq[ti])[i] == doctest::Approx((*tp[ti])[i]).epsilon(1e-7));

    // a version bump must be rejected
    {
        std::FILE* f = std::fopen("pvad_test_model.json", "r+");
        REQUIRE(f);
        std::fclose(f);
    }
    std::string manifest;
    {
        std::ifstream in("pvad_test_model.json");
        manifest.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    auto pos = manifest.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    manifest.replace(pos, 19, "\"format_version\": 9");
    {
        std::ofstream out("pvad_test_model.json");
        out << manifest;
    }
    CHECK_THROWS_AS(load_model("pvad_test_model"), FormatError);
    std::remove("pvad_test_model.json");
    std::remove("pvad_test_model.bin");
}
