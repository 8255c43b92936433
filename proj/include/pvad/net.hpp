#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pvad/dsp.hpp"

namespace pvad {

struct ConvSpec {
    int in_ch = 1;
    int out_ch = 1;
    int kernel = 3;
    int stride = 2; // valid convolution, no padding
};

struct NetConfig {
    int n_mels = 32;
    ConvSpec conv1{1, 16, 3, 2};
    ConvSpec conv2{16, 32, 3, 2};
    int gru1_units = 4;
    int gru2_units = 4;
    int fc1_out = 16;

    int conv1_out_len() const { return (n_mels - conv1.kernel) / conv1.stride + 1; }
    int conv2_out_len() const { return (conv1_out_len() - conv2.kernel) / conv2.stride + 1; }
    // conv output is flattened channel-major to a single vector per frame
    // before entering the first recurrent unit.
    int flat_len() const { return conv2.out_ch * conv2_out_len(); }
};

struct GruParams {
    int input = 0;
    int units = 0;
    // z: update gate, r: reset gate, h: candidate state
    std::vector<double> wz, wr, wh; // units x input
    std::vector<double> uz, ur, uh; // units x units
    std::vector<double> bz, br, bh; // units
};

struct NetParams {
    NetConfig cfg;
    std::vector<double> conv1_w, conv1_b; // out_ch x in_ch x k; out_ch
    std::vector<double> conv2_w, conv2_b;
    GruParams gru1, gru2;
    std::vector<double> fc1_w, fc1_b; // fc1_out x gru2_units
    std::vector<double> fc2_w, fc2_b; // 1 x fc1_out
};

// Applies fn(tensor) to every parameter tensor in a fixed order. Gradients,
// Adam moments and serialization all share this traversal.
template <typename P, typename Fn>
void for_each_tensor(P& params, Fn&& fn) {
    fn("conv1_w", params.conv1_w);
    fn("conv1_b", params.conv1_b);
    fn("conv2_w", params.conv2_w);
    fn("conv2_b", params.conv2_b);
    for (auto* g : {&params.gru1, &params.gru2}) {
        const char* tag = (g == &params.gru1) ? "gru1" : "gru2";
        std::string t(tag);
        fn((t + "_wz").c_str(), g->wz);
        fn((t + "_wr").c_str(), g->wr);
        fn((t + "_wh").c_str(), g->wh);
        fn((t + "_uz").c_str(), g->uz);
        fn((t + "_ur").c_str(), g->ur);
        fn((t + "_uh").c_str(), g->uh);
        fn((t + "_bz").c_str(), g->bz);
        fn((t + "_br").c_str(), g->br);
        fn((t + "_bh").c_str(), g->bh);
    }
    fn("fc1_w", params.fc1_w);
    fn("fc1_b", params.fc1_b);
    fn("fc2_w", params.fc2_w);
    fn("fc2_b", params.fc2_b);
}

struct GruState {
    std::vector<double> h1, h2;
    void reset(const NetConfig& cfg) {
        h1.assign(cfg.gru1_units, 0.0);
        h2.assign(cfg.gru2_units, 0.0);
    }
};

struct GruTrace {
    std::vector<double> h_prev, z, r, rh, hcand;
    std::vector<double> z_pre, r_pre, h_pre; // gate pre-activations (calibration)
};

// Intermediates retained by a stateful forward pass; backward() consumes
// one trace per frame, quantization calibration reads the pre-activations.
struct FrameTrace {
    std::vector<double> x;
    std::vector<double> conv1_out; // post-ReLU, [ch][pos]
    std::vector<double> flat;      // post-ReLU conv2 output, flattened
    GruTrace g1, g2;
    std::vector<double> fc1_out;   // post-ReLU
    double fc2_pre = 0.0;
    double p = 0.0;
};

NetParams init_params(const NetConfig& cfg, uint64_t seed);
std::size_t param_count(const NetParams& params);
NetParams zeros_like(const NetParams& params);

// Flat views over all tensors (for_each_tensor order); used by the
// optimizer and by tests that treat the parameter set as one vector.
std::vector<std::vector<double>*> tensor_list(NetParams& params);
std::vector<const std::vector<double>*> tensor_list(const NetParams& params);

// One streaming step: consumes a feature vector, updates the recurrent
// state, returns the speech probability in (0, 1).
double forward_frame(const NetParams& params, GruState& state, std::span<const double> x,
                     FrameTrace* trace = nullptr);

double bce_loss(std::span<const double> predictions, std::span<const double> targets);

// Exact gradient of the mean per-frame BCE over the traced sequence,
// backpropagated through both recurrent units across all time steps.
NetParams backward(const NetParams& params, const std::vector<FrameTrace>& traces,
                   std::span<const double> targets);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    NetParams m, v;
    int64_t t = 0;
};

void adam_step(NetParams& params, const NetParams& grads, AdamState& state,
               const AdamConfig& cfg);

// Halve-on-plateau schedule with early stopping, both driven by the test
// loss observed after each epoch.
class PlateauScheduler {
public:
    PlateauScheduler(double lr, int halve_patience, int stop_patience)
        : lr_(lr), halve_patience_(halve_patience), stop_patience_(stop_patience) {}

    // Returns true while training should continue.
    bool observe(double loss) {
        if (loss < best_) {
            best_ = loss;
            since_best_ = 0;
            return true;
        }
        ++since_best_;
        if (since_best_ >= stop_patience_) return false;
        if (since_best_ % halve_patience_ == 0) lr_ *= 0.5;
        return true;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }

private:
    double lr_;
    int halve_patience_;
    int stop_patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int since_best_ = 0;
};

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 8;
    int steps_per_epoch = 2000;
    int max_epochs = 50;
    int lr_halve_patience = 3;
    int early_stop_patience = 5;
    int bptt_len = 300; // frames per training excerpt (3 s)
    AdamConfig adam;
    uint64_t seed = 1;
    int threads = 0; // 0 = hardware concurrency
};

struct LabeledSequence {
    std::vector<FeatureVector> features;
    std::vector<double> targets; // soft labels in [0, 1]
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    NetParams params;
    std::vector<EpochLog> log;
    double initial_test_loss = 0.0;
};

TrainResult train(const NetConfig& cfg, const std::vector<LabeledSequence>& train_set,
                  const std::vector<LabeledSequence>& test_set, const TrainConfig& tc);

// Mean BCE of a stateful pass over each sequence (state reset per sequence).
double evaluate_loss(const NetParams& params, const std::vector<LabeledSequence>& set);

// Model file pair: <path>.json manifest + <path>.bin little-endian float32
// payload, tensors in for_each_tensor order.
void save_model(const NetParams& params, const std::string& path_prefix);
NetParams load_model(const std::string& path_prefix);

} // namespace pvad
