#include "pvad/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "pvad/errors.hpp"
#include "pvad/kernels.hpp"
#include "pvad/rng.hpp"

namespace pvad {

namespace {

constexpr double kProbClamp = 1e-7;
constexpr int kModelFormatVersion = 1;

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

void fill_glorot(std::vector<double>& w, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w) v = rng.uniform(-bound, bound);
}

GruParams make_gru(int input, int units) {
    GruParams g;
    g.input = input;
    g.units = units;
    const std::size_t wi = static_cast<std::size_t>(units) * input;
    const std::size_t uu = static_cast<std::size_t>(units) * units;
    g.wz.assign(wi, 0.0);
    g.wr.assign(wi, 0.0);
    g.wh.assign(wi, 0.0);
    g.uz.assign(uu, 0.0);
    g.ur.assign(uu, 0.0);
    g.uh.assign(uu, 0.0);
    g.bz.assign(units, 0.0);
    g.br.assign(units, 0.0);
    g.bh.assign(units, 0.0);
    return g;
}

// Valid 1D convolution with ReLU. in is [in_ch][in_len], out [out_ch][out_len],
// weights [out_ch][in_ch][kernel].
void conv1d_relu(const ConvSpec& c, int in_len, const double* in, const double* w,
                 const double* b, double* out) {
    const int out_len = (in_len - c.kernel) / c.stride + 1;
    for (int oc = 0; oc < c.out_ch; ++oc) {
        const double* wk = w + static_cast<std::size_t>(oc) * c.in_ch * c.kernel;
        for (int p = 0; p < out_len; ++p) {
            double acc = b[oc];
            const int base = p * c.stride;
            for (int ic = 0; ic < c.in_ch; ++ic) {
                const double* row = in + static_cast<std::size_t>(ic) * in_len + base;
                const double* wrow = wk + static_cast<std::size_t>(ic) * c.kernel;
                for (int k = 0; k < c.kernel; ++k) acc += wrow[k] * row[k];
            }
            out[static_cast<std::size_t>(oc) * out_len + p] = acc > 0.0 ? acc : 0.0;
        }
    }
}

// One GRU step; h is updated in place. Optionally records the trace.
void gru_step(const GruParams& g, const double* x, std::vector<double>& h, GruTrace* trace) {
    const int n = g.units;
    std::vector<double> z(n), r(n), rh(n), hc(n), tmp(n);

    kernels::matvec_f64(g.wz.data(), n, g.input, x, g.bz.data(), z.data());
    kernels::matvec_f64(g.uz.data(), n, n, h.data(), nullptr, tmp.data());
    for (int i = 0; i < n; ++i) z[i] += tmp[i];
    if (trace) trace->z_pre = z;
    for (int i = 0; i < n; ++i) z[i] = sigmoid(z[i]);

    kernels::matvec_f64(g.wr.data(), n, g.input, x, g.br.data(), r.data());
    kernels::matvec_f64(g.ur.data(), n, n, h.data(), nullptr, tmp.data());
    for (int i = 0; i < n; ++i) r[i] += tmp[i];
    if (trace) trace->r_pre = r;
    for (int i = 0; i < n; ++i) r[i] = sigmoid(r[i]);

    for (int i = 0; i < n; ++i) rh[i] = r[i] * h[i];
    kernels::matvec_f64(g.wh.data(), n, g.input, x, g.bh.data(), hc.data());
    kernels::matvec_f64(g.uh.data(), n, n, rh.data(), nullptr, tmp.data());
    for (int i = 0; i < n; ++i) hc[i] += tmp[i];
    if (trace) trace->h_pre = hc;
    for (int i = 0; i < n; ++i) hc[i] = std::tanh(hc[i]);

    if (trace) {
        trace->h_prev = h;
        trace->z = z;
        trace->r = r;
        trace->rh = rh;
        trace->hcand = hc;
    }
    for (int i = 0; i < n; ++i) h[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
}

// Backward through one GRU step. dh_out is the gradient on the new state;
// returns gradient on the previous state in dh_out and adds the input
// gradient into dx (if non-null) and parameter gradients into grads.
void gru_backward(const GruParams& g, const double* x, const GruTrace& t,
                  std::vector<double>& dh_out, GruParams& grads, double* dx) {
    const int n = g.units;
    std::vector<double> dz(n), dhc(n), dh_prev(n), dah(n), drh(n), dr(n), daz(n), dar(n);

    for (int i = 0; i < n; ++i) {
        dz[i] = dh_out[i] * (t.hcand[i] - t.h_prev[i]);
        dhc[i] = dh_out[i] * t.z[i];
        dh_prev[i] = dh_out[i] * (1.0 - t.z[i]);
        dah[i] = dhc[i] * (1.0 - t.hcand[i] * t.hcand[i]);
        daz[i] = dz[i] * t.z[i] * (1.0 - t.z[i]);
    }

    // candidate path
    for (int i = 0; i < n; ++i) {
        kernels::axpy_f64(dah[i], x, grads.wh.data() + static_cast<std::size_t>(i) * g.input, g.input);
        kernels::axpy_f64(dah[i], t.rh.data(), grads.uh.data() + static_cast<std::size_t>(i) * n, n);
        grads.bh[i] += dah[i];
    }
    std::fill(drh.begin(), drh.end(), 0.0);
    for (int i = 0; i < n; ++i)
        kernels::axpy_f64(dah[i], g.uh.data() + static_cast<std::size_t>(i) * n, drh.data(), n);
    for (int i = 0; i < n; ++i) {
        dr[i] = drh[i] * t.h_prev[i];
        dh_prev[i] += drh[i] * t.r[i];
        dar[i] = dr[i] * t.r[i] * (1.0 - t.r[i]);
    }

    // gate paths
    for (int i = 0; i < n; ++i) {
        kernels::axpy_f64(daz[i], x, grads.wz.data() + static_cast<std::size_t>(i) * g.input, g.input);
        kernels::axpy_f64(daz[i], t.h_prev.data(), grads.uz.data() + static_cast<std::size_t>(i) * n, n);
        grads.bz[i] += daz[i];
        kernels::axpy_f64(dar[i], x, grads.wr.data() + static_cast<std::size_t>(i) * g.input, g.input);
        kernels::axpy_f64(dar[i], t.h_prev.data(), grads.ur.data() + static_cast<std::size_t>(i) * n, n);
        grads.br[i] += dar[i];
    }
    for (int i = 0; i < n; ++i) {
        kernels::axpy_f64(daz[i], g.uz.data() + static_cast<std::size_t>(i) * n, dh_prev.data(), n);
        kernels::axpy_f64(dar[i], g.ur.data() + static_cast<std::size_t>(i) * n, dh_prev.data(), n);
    }

    if (dx) {
        for (int i = 0; i < n; ++i) {
            kernels::axpy_f64(daz[i], g.wz.data() + static_cast<std::size_t>(i) * g.input, dx, g.input);
            kernels::axpy_f64(dar[i], g.wr.data() + static_cast<std::size_t>(i) * g.input, dx, g.input);
            kernels::axpy_f64(dah[i], g.wh.data() + static_cast<std::size_t>(i) * g.input, dx, g.input);
        }
    }
    dh_out = dh_prev;
}

} // namespace

NetParams init_params(const NetConfig& cfg, uint64_t seed) {
    NetParams p;
    p.cfg = cfg;
    Rng rng(seed);

    p.conv1_w.assign(static_cast<std::size_t>(cfg.conv1.out_ch) * cfg.conv1.in_ch * cfg.conv1.kernel, 0.0);
    p.conv1_b.assign(cfg.conv1.out_ch, 0.0);
    p.conv2_w.assign(static_cast<std::size_t>(cfg.conv2.out_ch) * cfg.conv2.in_ch * cfg.conv2.kernel, 0.0);
    p.conv2_b.assign(cfg.conv2.out_ch, 0.0);
    p.gru1 = make_gru(cfg.flat_len(), cfg.gru1_units);
    p.gru2 = make_gru(cfg.gru1_units, cfg.gru2_units);
    p.fc1_w.assign(static_cast<std::size_t>(cfg.fc1_out) * cfg.gru2_units, 0.0);
    p.fc1_b.assign(cfg.fc1_out, 0.0);
    p.fc2_w.assign(cfg.fc1_out, 0.0);
    p.fc2_b.assign(1, 0.0);

    fill_glorot(p.conv1_w, cfg.conv1.in_ch * cfg.conv1.kernel, cfg.conv1.out_ch * cfg.conv1.kernel, rng);
    fill_glorot(p.conv2_w, cfg.conv2.in_ch * cfg.conv2.kernel, cfg.conv2.out_ch * cfg.conv2.kernel, rng);
    for (GruParams* g : {&p.gru1, &p.gru2}) {
        fill_glorot(g->wz, g->input, g->units, rng);
        fill_glorot(g->wr, g->input, g->units, rng);
        fill_glorot(g->wh, g->input, g->units, rng);
        fill_glorot(g->uz, g->units, g->units, rng);
        fill_glorot(g->ur, g->units, g->units, rng);
        fill_glorot(g->uh, g->units, g->units, rng);
    }
    fill_glorot(p.fc1_w, cfg.gru2_units, cfg.fc1_out, rng);
    fill_glorot(p.fc2_w, cfg.fc1_out, 1, rng);
    return p;
}

std::size_t param_count(const NetParams& params) {
    std::size_t n = 0;
    for_each_tensor(params, [&](const char*, const std::vector<double>& t) { n += t.size(); });
    return n;
}

NetParams zeros_like(const NetParams& params) {
    NetParams z = params;
    for_each_tensor(z, [](const char*, std::vector<double>& t) {
        std::fill(t.begin(), t.end(), 0.0);
    });
    return z;
}

std::vector<std::vector<double>*> tensor_list(NetParams& params) {
    std::vector<std::vector<double>*> out;
    for_each_tensor(params, [&](const char*, std::vector<double>& t) { out.push_back(&t); });
    return out;
}

std::vector<const std::vector<double>*> tensor_list(const NetParams& params) {
    std::vector<const std::vector<double>*> out;
    for_each_tensor(params, [&](const char*, const std::vector<double>& t) { out.push_back(&t); });
    return out;
}

double forward_frame(const NetParams& params, GruState& state, std::span<const double> x,
                     FrameTrace* trace) {
    const NetConfig& cfg = params.cfg;
    if (static_cast<int>(x.size()) != cfg.n_mels)
        throw ShapeError("forward_frame: expected " + std::to_string(cfg.n_mels) + " features");
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("forward_frame: non-finite input");

    const int len1 = cfg.conv1_out_len();
    const int len2 = cfg.conv2_out_len();
    std::vector<double> c1(static_cast<std::size_t>(cfg.conv1.out_ch) * len1);
    std::vector<double> flat(static_cast<std::size_t>(cfg.conv2.out_ch) * len2);

    conv1d_relu(cfg.conv1, cfg.n_mels, x.data(), params.conv1_w.data(), params.conv1_b.data(), c1.data());
    conv1d_relu(cfg.conv2, len1, c1.data(), params.conv2_w.data(), params.conv2_b.data(), flat.data());

    if (trace) {
        trace->x.assign(x.begin(), x.end());
        trace->conv1_out = c1;
        trace->flat = flat;
    }

    gru_step(params.gru1, flat.data(), state.h1, trace ? &trace->g1 : nullptr);
    gru_step(params.gru2, state.h1.data(), state.h2, trace ? &trace->g2 : nullptr);

    std::vector<double> f1(cfg.fc1_out);
    kernels::matvec_f64(params.fc1_w.data(), cfg.fc1_out, cfg.gru2_units, state.h2.data(),
                        params.fc1_b.data(), f1.data());
    for (double& v : f1) v = v > 0.0 ? v : 0.0;

    const double a2 = kernels::dot_f64(params.fc2_w.data(), f1.data(), cfg.fc1_out) + params.fc2_b[0];
    const double p = sigmoid(a2);

    if (trace) {
        trace->fc1_out = std::move(f1);
        trace->fc2_pre = a2;
        trace->p = p;
    }
    return p;
}

double bce_loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw ShapeError("bce_loss: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double p = std::clamp(predictions[i], kProbClamp, 1.0 - kProbClamp);
        acc += targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(predictions.size());
}

NetParams backward(const NetParams& params, const std::vector<FrameTrace>& traces,
                   std::span<const double> targets) {
    if (traces.size() != targets.size() || traces.empty())
        throw ShapeError("backward: traces/targets mismatch");
    for (const auto& t : traces)
        if (t.x.empty()) throw ShapeError("backward: trace missing intermediates");

    const NetConfig& cfg = params.cfg;
    NetParams grads = zeros_like(params);
    const double inv_n = 1.0 / static_cast<double>(traces.size());
    const int len1 = cfg.conv1_out_len();
    const int len2 = cfg.conv2_out_len();

    std::vector<double> dh2(cfg.gru2_units, 0.0);
    std::vector<double> dh1(cfg.gru1_units, 0.0);

    for (int t = static_cast<int>(traces.size()) - 1; t >= 0; --t) {
        const FrameTrace& tr = traces[t];

        // output head
        double da2 = 0.0;
        if (tr.p > kProbClamp && tr.p < 1.0 - kProbClamp)
            da2 = (tr.p - targets[t]) * inv_n;
        std::vector<double> df1(cfg.fc1_out);
        for (int i = 0; i < cfg.fc1_out; ++i) {
            grads.fc2_w[i] += da2 * tr.fc1_out[i];
            df1[i] = tr.fc1_out[i] > 0.0 ? da2 * params.fc2_w[i] : 0.0;
        }
        grads.fc2_b[0] += da2;
        // fc1's input is the post-step gru2 state; reconstruct it from the trace.
        std::vector<double> h2_new(cfg.gru2_units);
        for (int i = 0; i < cfg.gru2_units; ++i)
            h2_new[i] = (1.0 - tr.g2.z[i]) * tr.g2.h_prev[i] + tr.g2.z[i] * tr.g2.hcand[i];
        for (int i = 0; i < cfg.fc1_out; ++i) {
            kernels::axpy_f64(df1[i], h2_new.data(),
                              grads.fc1_w.data() + static_cast<std::size_t>(i) * cfg.gru2_units,
                              cfg.gru2_units);
            grads.fc1_b[i] += df1[i];
        }
        for (int i = 0; i < cfg.fc1_out; ++i)
            kernels::axpy_f64(df1[i], params.fc1_w.data() + static_cast<std::size_t>(i) * cfg.gru2_units,
                              dh2.data(), cfg.gru2_units);

        // recurrent units
        std::vector<double> dh1_from_g2(cfg.gru1_units, 0.0);
        // gru2's input at time t is gru1's new state at time t
        std::vector<double> h1_new(cfg.gru1_units);
        for (int i = 0; i < cfg.gru1_units; ++i)
            h1_new[i] = (1.0 - tr.g1.z[i]) * tr.g1.h_prev[i] + tr.g1.z[i] * tr.g1.hcand[i];
        gru_backward(params.gru2, h1_new.data(), tr.g2, dh2, grads.gru2, dh1_from_g2.data());

        for (int i = 0; i < cfg.gru1_units; ++i) dh1[i] += dh1_from_g2[i];
        std::vector<double> dflat(cfg.flat_len(), 0.0);
        gru_backward(params.gru1, tr.flat.data(), tr.g1, dh1, grads.gru1, dflat.data());

        // conv2 backward (through ReLU)
        std::vector<double> dc1(static_cast<std::size_t>(cfg.conv1.out_ch) * len1, 0.0);
        for (int oc = 0; oc < cfg.conv2.out_ch; ++oc) {
            for (int p = 0; p < len2; ++p) {
                const std::size_t oi = static_cast<std::size_t>(oc) * len2 + p;
                if (tr.flat[oi] <= 0.0) continue;
                const double g = dflat[oi];
                if (g == 0.0) continue;
                const int base = p * cfg.conv2.stride;
                for (int ic = 0; ic < cfg.conv2.in_ch; ++ic) {
                    const std::size_t wbase =
                        (static_cast<std::size_t>(oc) * cfg.conv2.in_ch + ic) * cfg.conv2.kernel;
                    const std::size_t ibase = static_cast<std::size_t>(ic) * len1 + base;
                    for (int k = 0; k < cfg.conv2.kernel; ++k) {
                        grads.conv2_w[wbase + k] += g * tr.conv1_out[ibase + k];
                        dc1[ibase + k] += g * params.conv2_w[wbase + k];
                    }
                }
                grads.conv2_b[oc] += g;
            }
        }

        // conv1 backward (input gradient not needed)
        for (int oc = 0; oc < cfg.conv1.out_ch; ++oc) {
            for (int p = 0; p < len1; ++p) {
                const std::size_t oi = static_cast<std::size_t>(oc) * len1 + p;
                if (tr.conv1_out[oi] <= 0.0) continue;
                const double g = dc1[oi];
                if (g == 0.0) continue;
                const int base = p * cfg.conv1.stride;
                const std::size_t wbase = static_cast<std::size_t>(oc) * cfg.conv1.kernel;
                for (int k = 0; k < cfg.conv1.kernel; ++k)
                    grads.conv1_w[wbase + k] += g * tr.x[base + k];
                grads.conv1_b[oc] += g;
            }
        }
    }
    return grads;
}

void adam_step(NetParams& params, const NetParams& grads, AdamState& state, const AdamConfig& cfg) {
    if (state.t == 0) {
        state.m = zeros_like(params);
        state.v = zeros_like(params);
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));

    auto ps = tensor_list(params);
    auto gs = tensor_list(grads);
    auto ms = tensor_list(state.m);
    auto vs = tensor_list(state.v);
    for (std::size_t ti = 0; ti < ps.size(); ++ti) {
        auto& p = *ps[ti];
        const auto& g = *gs[ti];
        auto& m = *ms[ti];
        auto& v = *vs[ti];
        if (p.size() != g.size()) throw ShapeError("adam_step: shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

double evaluate_loss(const NetParams& params, const std::vector<LabeledSequence>& set) {
    double total = 0.0;
    std::size_t frames = 0;
    for (const auto& seq : set) {
        GruState state;
        state.reset(params.cfg);
        std::vector<double> preds(seq.features.size());
        for (std::size_t i = 0; i < seq.features.size(); ++i)
            preds[i] = forward_frame(params, state, seq.features[i].values);
        // accumulate un-normalized so the result is frame-weighted
        const double n = static_cast<double>(preds.size());
        total += bce_loss(preds, seq.targets) * n;
        frames += preds.size();
    }
    if (frames == 0) throw ConfigError("evaluate_loss: empty set");
    return total / static_cast<double>(frames);
}

namespace {

struct Excerpt {
    const LabeledSequence* seq;
    std::size_t start;
    std::size_t len;
};

// Per-member forward+backward; members run on a small static thread pool and
// are reduced in index order so the result is independent of scheduling.
NetParams batch_gradient(const NetParams& params, const std::vector<Excerpt>& batch,
                         int threads, double* loss_out) {
    std::vector<NetParams> member_grads(batch.size());
    std::vector<double> member_loss(batch.size(), 0.0);

    auto work = [&](std::size_t b) {
        const Excerpt& e = batch[b];
        GruState state;
        state.reset(params.cfg);
        std::vector<FrameTrace> traces(e.len);
        std::vector<double> preds(e.len), targets(e.len);
        for (std::size_t i = 0; i < e.len; ++i) {
            preds[i] = forward_frame(params, state, e.seq->features[e.start + i].values, &traces[i]);
            targets[i] = e.seq->targets[e.start + i];
        }
        member_loss[b] = bce_loss(preds, targets);
        member_grads[b] = backward(params, traces, targets);
    };

    if (threads <= 1 || batch.size() == 1) {
        for (std::size_t b = 0; b < batch.size(); ++b) work(b);
    } else {
        std::vector<std::thread> pool;
        for (int tid = 0; tid < threads; ++tid) {
            pool.emplace_back([&, tid]() {
                for (std::size_t b = tid; b < batch.size(); b += threads) work(b);
            });
        }
        for (auto& th : pool) th.join();
    }

    NetParams grads = std::move(member_grads[0]);
    auto acc = tensor_list(grads);
    for (std::size_t b = 1; b < batch.size(); ++b) {
        auto add = tensor_list(member_grads[b]);
        for (std::size_t ti = 0; ti < acc.size(); ++ti)
            kernels::axpy_f64(1.0, add[ti]->data(), acc[ti]->data(), acc[ti]->size());
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (auto* t : acc)
        for (double& v : *t) v *= inv_b;
    if (loss_out) {
        double l = 0.0;
        for (double v : member_loss) l += v;
        *loss_out = l * inv_b;
    }
    return grads;
}

} // namespace

TrainResult train(const NetConfig& cfg, const std::vector<LabeledSequence>& train_set,
                  const std::vector<LabeledSequence>& test_set, const TrainConfig& tc) {
    if (train_set.empty() || test_set.empty())
        throw ConfigError("train: empty train or test split");
    for (const auto& s : train_set)
        if (s.features.size() != s.targets.size() || s.features.empty())
            throw ConfigError("train: malformed sequence");

    const int threads = tc.threads > 0 ? tc.threads
                                       : static_cast<int>(std::thread::hardware_concurrency());

    TrainResult result;
    result.params = init_params(cfg, tc.seed);
    result.initial_test_loss = evaluate_loss(result.params, test_set);

    AdamState adam;
    AdamConfig acfg = tc.adam;
    acfg.lr = tc.lr;
    PlateauScheduler sched(tc.lr, tc.lr_halve_patience, tc.early_stop_patience);
    Rng rng(tc.seed ^ 0x7261696eull);

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (int step = 0; step < tc.steps_per_epoch; ++step) {
            std::vector<Excerpt> batch(tc.batch_size);
            for (int b = 0; b < tc.batch_size; ++b) {
                const auto& seq = train_set[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<int64_t>(train_set.size()) - 1))];
                const std::size_t len =
                    std::min<std::size_t>(tc.bptt_len, seq.features.size());
                const std::size_t max_start = seq.features.size() - len;
                const std::size_t start = max_start == 0
                    ? 0
                    : static_cast<std::size_t>(rng.uniform_int(0, static_cast<int64_t>(max_start)));
                batch[b] = {&seq, start, len};
            }
            double step_loss = 0.0;
            NetParams grads = batch_gradient(result.params, batch, threads, &step_loss);
            if (!std::isfinite(step_loss))
                throw NumericError("train: non-finite loss (diverged)");
            epoch_loss += step_loss;
            acfg.lr = sched.lr();
            adam_step(result.params, grads, adam, acfg);
        }
        const double test_loss = evaluate_loss(result.params, test_set);
        if (!std::isfinite(test_loss))
            throw NumericError("train: non-finite test loss (diverged)");

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = epoch_loss / tc.steps_per_epoch;
        log.test_loss = test_loss;
        log.lr = sched.lr();
        result.log.push_back(log);

        if (!sched.observe(test_loss)) break;
    }
    return result;
}

void save_model(const NetParams& params, const std::string& path_prefix) {
    nlohmann::json manifest;
    manifest["format_version"] = kModelFormatVersion;
    manifest["kind"] = "float32";
    manifest["config"] = {
        {"n_mels", params.cfg.n_mels},
        {"conv1", {params.cfg.conv1.in_ch, params.cfg.conv1.out_ch, params.cfg.conv1.kernel, params.cfg.conv1.stride}},
        {"conv2", {params.cfg.conv2.in_ch, params.cfg.conv2.out_ch, params.cfg.conv2.kernel, params.cfg.conv2.stride}},
        {"gru1_units", params.cfg.gru1_units},
        {"gru2_units", params.cfg.gru2_units},
        {"fc1_out", params.cfg.fc1_out},
    };
    nlohmann::json layers = nlohmann::json::array();
    std::size_t offset = 0;
    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw FileError("cannot write " + path_prefix + ".bin");
    for_each_tensor(params, [&](const char* name, const std::vector<double>& t) {
        layers.push_back({{"name", name}, {"offset", offset}, {"count", t.size()}});
        for (double v : t) {
            float f = static_cast<float>(v);
            bin.write(reinterpret_cast<const char*>(&f), sizeof(f));
        }
        offset += t.size();
    });
    manifest["layers"] = layers;
    manifest["param_count"] = offset;

    std::ofstream js(path_prefix + ".json");
    if (!js) throw FileError("cannot write " + path_prefix + ".json");
    js << manifest.dump(2) << "\n";
}

NetParams load_model(const std::string& path_prefix) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw FileError("cannot open " + path_prefix + ".json");
    nlohmann::json manifest;
    try {
        js >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model manifest parse error: " + std::string(e.what()));
    }
    if (manifest.value("format_version", -1) != kModelFormatVersion)
        throw FormatError("model format version mismatch");
    if (manifest.value("kind", "") != "float32")
        throw FormatError("not a float32 model file");

    NetConfig cfg;
    const auto& jc = manifest.at("config");
    cfg.n_mels = jc.at("n_mels").get<int>();
    auto load_conv = [](const nlohmann::json& a) {
        return ConvSpec{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>(), a.at(3).get<int>()};
    };
    cfg.conv1 = load_conv(jc.at("conv1"));
    cfg.conv2 = load_conv(jc.at("conv2"));
    cfg.gru1_units = jc.at("gru1_units").get<int>();
    cfg.gru2_units = jc.at("gru2_units").get<int>();
    cfg.fc1_out = jc.at("fc1_out").get<int>();

    NetParams params = init_params(cfg, 0);
    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw FileError("cannot open " + path_prefix + ".bin");
    for_each_tensor(params, [&](const char*, std::vector<double>& t) {
        for (double& v : t) {
            float f;
            bin.read(reinterpret_cast<char*>(&f), sizeof(f));
            v = static_cast<double>(f);
        }
    });
    if (!bin) throw FormatError("model payload truncated: " + path_prefix + ".bin");
    return params;
}

} // namespace pvad
