// pvad: corpus synthesis, feature dumps, training, quantization, streaming
// inference, SNR evaluation harnesses, gate sweeps and power reports behind
// one command-line entry point.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvad/corpus.hpp"
#include "pvad/errors.hpp"
#include "pvad/eval.hpp"
#include "pvad/kernels.hpp"
#include "pvad/net.hpp"
#include "pvad/pipeline.hpp"
#include "pvad/power.hpp"
#include "pvad/quant.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_snapshot(const json& resolved, const std::string& path) {
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? "."
                               : fs::path(path).parent_path().string());
    std::ofstream f(path);
    if (!f) throw pvad::FileError("cannot write config snapshot: " + path);
    f << resolved.dump(2) << "\n";
}

pvad::Channel parse_channel(const std::string& name) {
    if (name == "bc") return pvad::Channel::BC;
    if (name == "ac") return pvad::Channel::AC;
    throw pvad::ConfigError("channel must be 'bc' or 'ac', got '" + name + "'");
}

pvad::SocProfile resolve_profile(const std::string& name, pvad::BatteryModel* bat) {
    if (fs::exists(name)) return pvad::load_soc_profile(name, bat);
    if (name == "apollo4") return pvad::apollo4_profile();
    if (name == "nrf5340") return pvad::nrf5340_profile();
    const std::string local = "profiles/" + name + ".toml";
    if (fs::exists(local)) return pvad::load_soc_profile(local, bat);
    throw pvad::ConfigError("unknown profile '" + name +
                            "' (builtin: apollo4, nrf5340; or pass a .toml path)");
}

struct SynthArgs {
    std::string out;
    double train_hours = 0.5;
    double test_hours = 0.1;
    uint64_t seed = 1;
    int n_speakers = 20;
    double clip_len_s = 30.0;
    double bc_cutoff_hz = 2000.0;
    double bc_attenuation_db = 14.7;
};

int cmd_synth(const SynthArgs& a) {
    pvad::SynthSpec spec;
    spec.seed = a.seed;
    spec.n_speakers = a.n_speakers;
    spec.clip_len_s = a.clip_len_s;
    spec.bc_lowpass_cutoff_hz = a.bc_cutoff_hz;
    spec.bc_external_attenuation_db = a.bc_attenuation_db;
    spec.train_hours = a.train_hours;
    spec.test_hours = a.test_hours;

    const pvad::DatasetManifest manifest = pvad::build_dataset(spec, a.out);
    std::printf("corpus at %s: %zu train clips, %zu test clips\n", a.out.c_str(),
                manifest.split("train").size(), manifest.split("test").size());
    std::printf("active-frame distribution: <25%%: %.2f  25-60%%: %.2f  >60%%: %.2f\n",
                manifest.report.frac_low, manifest.report.frac_mid, manifest.report.frac_high);

    write_snapshot({{"command", "synth"},
                    {"out", a.out},
                    {"train_hours", a.train_hours},
                    {"test_hours", a.test_hours},
                    {"seed", a.seed},
                    {"n_speakers", a.n_speakers},
                    {"clip_len_s", a.clip_len_s},
                    {"bc_cutoff_hz", a.bc_cutoff_hz},
                    {"bc_attenuation_db", a.bc_attenuation_db}},
                   a.out + "/run_config.json");
    return 0;
}

struct FeaturesArgs {
    std::string wav, manifest, clip_id, out;
    std::string channel = "bc";
};

int cmd_features(const FeaturesArgs& a) {
    pvad::AudioClip clip;
    if (!a.wav.empty()) {
        clip = pvad::read_wav(a.wav);
        if (clip.sample_rate_hz != 16000) clip = pvad::resample_to_16k(clip);
    } else {
        if (a.manifest.empty() || a.clip_id.empty())
            throw pvad::ConfigError("features: need --wav or --manifest together with --clip");
        const pvad::DatasetManifest m = pvad::load_manifest(a.manifest);
        const pvad::ClipInfo* info = nullptr;
        for (const auto& c : m.clips)
            if (c.id == a.clip_id) info = &c;
        if (!info) throw pvad::ConfigError("clip id not in manifest: " + a.clip_id);
        pvad::LabeledClip lc = pvad::load_clip(m, *info);
        clip = parse_channel(a.channel) == pvad::Channel::BC ? lc.y_bc : lc.y_ac;
    }

    const pvad::FrameConfig cfg;
    const pvad::MelFilterbank fb = pvad::build_mel_filterbank(cfg);
    const auto features = pvad::extract_clip_features(clip, fb, cfg);

    std::ofstream f(a.out);
    if (!f) throw pvad::FileError("cannot write " + a.out);
    f << "frame_index,energy_db";
    for (int m = 0; m < cfg.n_mels; ++m) f << ",mel" << m;
    f << "\n";
    for (const auto& fv : features) {
        f << fv.frame_index << "," << fv.energy_db;
        for (double v : fv.values) f << "," << v;
        f << "\n";
    }
    std::printf("wrote %zu feature frames to %s\n", features.size(), a.out.c_str());
    write_snapshot({{"command", "features"},
                    {"wav", a.wav},
                    {"manifest", a.manifest},
                    {"clip", a.clip_id},
                    {"channel", a.channel},
                    {"out", a.out}},
                   a.out + ".run_config.json");
    return 0;
}

struct TrainArgs {
    std::string manifest, out;
    std::string channel = "bc";
    int steps_per_epoch = 2000;
    int max_epochs = 50;
    int batch_size = 8;
    int bptt_len = 300;
    double lr = 1e-3;
    uint64_t seed = 1;
    int threads = 0;
};

int cmd_train(const TrainArgs& a) {
    const pvad::DatasetManifest manifest = pvad::load_manifest(a.manifest);
    const pvad::FrameConfig cfg;
    const pvad::Channel channel = parse_channel(a.channel);
    std::printf("loading %s-channel features...\n", a.channel.c_str());
    const auto train_set = pvad::load_split_features(manifest, "train", channel, cfg);
    const auto test_set = pvad::load_split_features(manifest, "test", channel, cfg);

    pvad::TrainConfig tc;
    tc.lr = a.lr;
    tc.batch_size = a.batch_size;
    tc.steps_per_epoch = a.steps_per_epoch;
    tc.max_epochs = a.max_epochs;
    tc.bptt_len = a.bptt_len;
    tc.seed = a.seed;
    tc.threads = a.threads;

    pvad::NetConfig net_cfg;
    std::printf("training %s-pVAD: %d epochs x %d steps, batch %d, kernels=%s\n",
                a.channel.c_str(), tc.max_epochs, tc.steps_per_epoch, tc.batch_size,
                pvad::kernels::backend_name());
    const pvad::TrainResult result = pvad::train(net_cfg, train_set, test_set, tc);

    pvad::save_model(result.params, a.out);
    {
        std::ofstream log(a.out + "_log.csv");
        if (!log) throw pvad::FileError("cannot write " + a.out + "_log.csv");
        log << "epoch,train_loss,test_loss,lr\n";
        for (const auto& e : result.log)
            log << e.epoch << "," << e.train_loss << "," << e.test_loss << "," << e.lr << "\n";
    }
    std::printf("params: %zu  initial test loss %.4f  final test loss %.4f\n",
                pvad::param_count(result.params), result.initial_test_loss,
                result.log.back().test_loss);

    write_snapshot({{"command", "train"},
                    {"manifest", a.manifest},
                    {"channel", a.channel},
                    {"out", a.out},
                    {"steps_per_epoch", a.steps_per_epoch},
                    {"max_epochs", a.max_epochs},
                    {"batch_size", a.batch_size},
                    {"bptt_len", a.bptt_len},
                    {"lr", a.lr},
                    {"seed", a.seed}},
                   a.out + "_run_config.json");
    return 0;
}

struct QuantizeArgs {
    std::string model, manifest, out;
    std::string channel = "bc";
    int calib_clips = 4;
};

int cmd_quantize(const QuantizeArgs& a) {
    const pvad::NetParams params = pvad::load_model(a.model);
    const pvad::DatasetManifest manifest = pvad::load_manifest(a.manifest);
    const pvad::FrameConfig cfg;
    const pvad::Channel channel = parse_channel(a.channel);

    auto train_seqs = pvad::load_split_features(manifest, "train", channel, cfg);
    if (train_seqs.empty()) throw pvad::ConfigError("quantize: manifest has no train split");
    train_seqs.resize(std::min<std::size_t>(train_seqs.size(), a.calib_clips));
    std::vector<std::vector<pvad::FeatureVector>> representative;
    for (auto& s : train_seqs) representative.push_back(std::move(s.features));

    const pvad::CalibrationStats stats = pvad::calibrate(params, representative);
    const pvad::QNetParams qp = pvad::quantize_net(params, stats, 8);
    pvad::save_qmodel(qp, a.out);

    const auto test_seqs = pvad::load_split_features(manifest, "test", channel, cfg);
    if (!test_seqs.empty()) {
        const pvad::AccuracyDelta d = pvad::accuracy_delta(params, qp, test_seqs);
        std::printf("binary accuracy: float %.4f  int8 %.4f  delta %.2f points  agreement %.3f\n",
                    d.acc_float, d.acc_quant, 100.0 * d.delta, d.decision_agreement);
    }
    std::printf("quantized model written to %s.{json,bin}\n", a.out.c_str());

    write_snapshot({{"command", "quantize"},
                    {"model", a.model},
                    {"manifest", a.manifest},
                    {"channel", a.channel},
                    {"calib_clips", a.calib_clips},
                    {"out", a.out}},
                   a.out + "_run_config.json");
    return 0;
}

struct InferArgs {
    std::string model, qmodel, wav, out;
    double gate_threshold_db = 0.0;
    bool gate = false;
    double skip_output = 0.0;
    double skip_state_decay = 1.0;
    std::string profile;
};

int cmd_infer(const InferArgs& a) {
    if (a.model.empty() == a.qmodel.empty())
        throw pvad::ConfigError("infer: pass exactly one of --model / --qmodel");

    pvad::AudioClip clip = pvad::read_wav(a.wav);
    if (clip.sample_rate_hz != 16000) clip = pvad::resample_to_16k(clip);

    pvad::GateConfig gate;
    gate.enabled = a.gate;
    gate.threshold_db = a.gate_threshold_db;
    gate.skip_output = a.skip_output;
    gate.skip_state_decay = a.skip_state_decay;

    std::unique_ptr<pvad::FrameScorer> scorer;
    if (!a.model.empty())
        scorer = pvad::make_scorer(pvad::load_model(a.model));
    else
        scorer = pvad::make_scorer(pvad::load_qmodel(a.qmodel));

    pvad::StreamEngine engine(std::move(scorer), pvad::FrameConfig{}, gate);
    if (!a.profile.empty()) engine.set_latency_profile(resolve_profile(a.profile, nullptr));

    const auto preds = engine.push_samples(clip.samples);
    std::ofstream f(a.out);
    if (!f) throw pvad::FileError("cannot write " + a.out);
    f << "frame_index,probability,label,skipped,energy_db\n";
    for (const auto& p : preds)
        f << p.frame_index << "," << p.probability << "," << p.label << ","
          << (p.skipped ? 1 : 0) << "," << p.energy_db << "\n";

    const auto& stats = engine.stats();
    std::printf("%ld frames, %ld skipped (%.1f%%)\n", stats.frames_total, stats.frames_skipped,
                stats.frames_total ? 100.0 * stats.frames_skipped / stats.frames_total : 0.0);

    write_snapshot({{"command", "infer"},
                    {"model", a.model},
                    {"qmodel", a.qmodel},
                    {"wav", a.wav},
                    {"out", a.out},
                    {"gate", a.gate},
                    {"gate_threshold_db", a.gate_threshold_db},
                    {"skip_output", a.skip_output},
                    {"skip_state_decay", a.skip_state_decay},
                    {"profile", a.profile}},
                   a.out + ".run_config.json");
    return 0;
}

struct EvalArgs {
    std::string model_bc, model_ac, manifest, out;
    std::string mode = "equal-env";
    std::vector<double> snr_grid{-10.0, 0.0, 10.0, 20.0};
};

int cmd_eval(const EvalArgs& a) {
    const pvad::NetParams bc = pvad::load_model(a.model_bc);
    const pvad::NetParams ac = pvad::load_model(a.model_ac);
    const pvad::DatasetManifest manifest = pvad::load_manifest(a.manifest);

    pvad::HarnessMode mode;
    if (a.mode == "equal-env") mode = pvad::HarnessMode::EqualEnvironment;
    else if (a.mode == "equal-snr") mode = pvad::HarnessMode::EqualSnr;
    else throw pvad::ConfigError("eval: mode must be equal-env or equal-snr");

    const pvad::HarnessResult res = pvad::run_harness(bc, ac, manifest, mode, a.snr_grid);
    pvad::write_harness_csv(res, a.out);

    std::printf("%8s %6s %8s %8s %8s %8s %8s\n", "snr_db", "model", "auc", "dcf", "acc", "miss",
                "fa");
    for (const auto& row : res.rows)
        std::printf("%8.1f %6s %8.4f %8.4f %8.4f %8.4f %8.4f\n", row.snr_db, row.model.c_str(),
                    row.metrics.auc, row.metrics.dcf, row.metrics.acc, row.metrics.miss_rate,
                    row.metrics.fa_rate);
    if (mode == pvad::HarnessMode::EqualEnvironment)
        std::printf("mean SNR advantage (BC over AC): %.2f dB\n", res.mean_snr_advantage_db);

    write_snapshot({{"command", "eval"},
                    {"model_bc", a.model_bc},
                    {"model_ac", a.model_ac},
                    {"manifest", a.manifest},
                    {"mode", a.mode},
                    {"snr_grid", a.snr_grid},
                    {"out", a.out}},
                   a.out + ".run_config.json");
    return 0;
}

struct SweepArgs {
    std::string model, qmodel, manifest, out;
    std::vector<double> thresholds;
    double snr_db = 10.0;
    double peak_dbfs = -15.0;
};

int cmd_gate_sweep(const SweepArgs& a) {
    if (a.model.empty() == a.qmodel.empty())
        throw pvad::ConfigError("gate-sweep: pass exactly one of --model / --qmodel");
    const pvad::DatasetManifest manifest = pvad::load_manifest(a.manifest);

    pvad::GateSweepConfig cfg;
    cfg.snr_db = a.snr_db;
    cfg.peak_dbfs = a.peak_dbfs;
    std::vector<pvad::GateSweepRow> rows;
    if (!a.qmodel.empty())
        rows = pvad::gate_sweep(pvad::load_qmodel(a.qmodel), manifest, a.thresholds, cfg);
    else
        rows = pvad::gate_sweep(pvad::load_model(a.model), manifest, a.thresholds, cfg);

    std::ofstream f(a.out);
    if (!f) throw pvad::FileError("cannot write " + a.out);
    f << "threshold_db,skip_fraction,accuracy\n";
    for (const auto& r : rows)
        f << r.threshold_db << "," << r.skip_fraction << "," << r.accuracy << "\n";

    std::printf("%14s %14s %10s\n", "threshold_db", "skip_fraction", "accuracy");
    for (const auto& r : rows)
        std::printf("%14.1f %14.3f %10.4f\n", r.threshold_db, r.skip_fraction, r.accuracy);

    write_snapshot({{"command", "gate-sweep"},
                    {"model", a.model},
                    {"qmodel", a.qmodel},
                    {"manifest", a.manifest},
                    {"thresholds", a.thresholds},
                    {"snr_db", a.snr_db},
                    {"peak_dbfs", a.peak_dbfs},
                    {"out", a.out}},
                   a.out + ".run_config.json");
    return 0;
}

struct PowerArgs {
    std::string profile = "apollo4";
    std::vector<double> skip{0.0};
    std::string out;
    double capacity_mah = 32.0;
    double voltage_v = 3.8;
    double efficiency = 0.95;
};

int cmd_power(const PowerArgs& a) {
    pvad::BatteryModel bat;
    bat.capacity_mah = a.capacity_mah;
    bat.voltage_v = a.voltage_v;
    bat.converter_efficiency = a.efficiency;
    const pvad::SocProfile soc = resolve_profile(a.profile, &bat);

    const auto rows = pvad::skip_sweep(soc, bat, a.skip);
    std::printf("%-10s %6s %6s %9s %9s %8s %9s %10s\n", "soc", "skip", "duty", "avg_mW",
                "avg_uA", "uJ/inf", "lat_ms", "life_h");
    for (const auto& r : rows)
        std::printf("%-10s %6.2f %6.3f %9.3f %9.1f %8.2f %9.2f %10.2f\n", r.soc.c_str(),
                    r.skip_fraction, r.duty_cycle, r.avg_power_mw, r.avg_current_ua,
                    r.energy_per_inference_uj, r.worst_latency_ms, r.battery_life_h);

    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) throw pvad::FileError("cannot write " + a.out);
        f << "soc,skip_fraction,duty_cycle,avg_power_mw,avg_current_ua,"
             "energy_per_inference_uj,worst_latency_ms,battery_life_h\n";
        for (const auto& r : rows)
            f << r.soc << "," << r.skip_fraction << "," << r.duty_cycle << "," << r.avg_power_mw
              << "," << r.avg_current_ua << "," << r.energy_per_inference_uj << ","
              << r.worst_latency_ms << "," << r.battery_life_h << "\n";
        write_snapshot({{"command", "power"},
                        {"profile", a.profile},
                        {"skip", a.skip},
                        {"capacity_mah", a.capacity_mah},
                        {"voltage_v", a.voltage_v},
                        {"efficiency", a.efficiency},
                        {"out", a.out}},
                       a.out + ".run_config.json");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pvad: personalized voice activity detection for bone-conduction earbuds"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value file providing flag defaults");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate the synthetic dual-channel corpus");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--train-hours", synth.train_hours);
    s->add_option("--test-hours", synth.test_hours);
    s->add_option("--seed", synth.seed);
    s->add_option("--n-speakers", synth.n_speakers);
    s->add_option("--clip-len", synth.clip_len_s, "clip length in seconds");
    s->add_option("--bc-cutoff", synth.bc_cutoff_hz, "bone-channel lowpass cutoff (Hz)");
    s->add_option("--bc-attenuation", synth.bc_attenuation_db,
                  "external-source bone-channel attenuation (dB)");

    FeaturesArgs feat;
    auto* ft = app.add_subcommand("features", "dump log-Mel features to CSV");
    ft->add_option("--wav", feat.wav, "input WAV (any supported rate)");
    ft->add_option("--manifest", feat.manifest, "dataset manifest JSON");
    ft->add_option("--clip", feat.clip_id, "clip id within the manifest");
    ft->add_option("--channel", feat.channel, "bc | ac (with --manifest)");
    ft->add_option("--out", feat.out, "output CSV")->required();

    TrainArgs train;
    auto* tr = app.add_subcommand("train", "train the detector from a corpus manifest");
    tr->add_option("--manifest", train.manifest)->required();
    tr->add_option("--channel", train.channel, "bc | ac");
    tr->add_option("--out", train.out, "model path prefix")->required();
    tr->add_option("--steps-per-epoch", train.steps_per_epoch);
    tr->add_option("--max-epochs", train.max_epochs);
    tr->add_option("--batch-size", train.batch_size);
    tr->add_option("--bptt", train.bptt_len, "frames per training excerpt");
    tr->add_option("--lr", train.lr);
    tr->add_option("--seed", train.seed);
    tr->add_option("--threads", train.threads, "0 = hardware concurrency");

    QuantizeArgs quant;
    auto* q = app.add_subcommand("quantize", "post-training int8 quantization");
    q->add_option("--model", quant.model, "float model path prefix")->required();
    q->add_option("--manifest", quant.manifest)->required();
    q->add_option("--channel", quant.channel, "bc | ac");
    q->add_option("--calib-clips", quant.calib_clips, "train clips used as representative data");
    q->add_option("--out", quant.out, "quantized model path prefix")->required();

    InferArgs infer;
    auto* in = app.add_subcommand("infer", "stream a WAV through the detector");
    in->add_option("--model", infer.model, "float model path prefix");
    in->add_option("--qmodel", infer.qmodel, "quantized model path prefix");
    in->add_option("--wav", infer.wav)->required();
    in->add_option("--out", infer.out, "predictions CSV")->required();
    in->add_flag("--gate", infer.gate, "enable energy gating");
    in->add_option("--gate-threshold-db", infer.gate_threshold_db);
    in->add_option("--skip-output", infer.skip_output, "probability emitted for skipped frames");
    in->add_option("--skip-state-decay", infer.skip_state_decay,
                   "recurrent state decay on skips (1 = hold, 0 = clear)");
    in->add_option("--profile", infer.profile, "SoC profile for modeled latency");

    EvalArgs eval;
    auto* ev = app.add_subcommand("eval", "run an SNR evaluation harness over the test split");
    ev->add_option("--model-bc", eval.model_bc)->required();
    ev->add_option("--model-ac", eval.model_ac)->required();
    ev->add_option("--manifest", eval.manifest)->required();
    ev->add_option("--mode", eval.mode, "equal-env | equal-snr");
    ev->add_option("--snr-grid", eval.snr_grid, "SNR grid in dB")->delimiter(',');
    ev->add_option("--out", eval.out, "metrics CSV")->required();

    SweepArgs sweep;
    auto* sw = app.add_subcommand("gate-sweep", "skip fraction and accuracy across thresholds");
    sw->add_option("--model", sweep.model, "float model path prefix");
    sw->add_option("--qmodel", sweep.qmodel, "quantized model path prefix");
    sw->add_option("--manifest", sweep.manifest)->required();
    sw->add_option("--thresholds", sweep.thresholds, "energy thresholds in dB")
        ->delimiter(',')
        ->required();
    sw->add_option("--snr", sweep.snr_db, "evaluation SNR on the BC channel");
    sw->add_option("--peak-dbfs", sweep.peak_dbfs, "peak normalization level");
    sw->add_option("--out", sweep.out, "sweep CSV")->required();

    PowerArgs power;
    auto* pw = app.add_subcommand("power", "duty-cycle power and battery-life model");
    pw->add_option("--profile", power.profile, "apollo4 | nrf5340 | path to .toml");
    pw->add_option("--skip", power.skip, "skip fractions")->delimiter(',');
    pw->add_option("--out", power.out, "report CSV (optional)");
    pw->add_option("--capacity-mah", power.capacity_mah);
    pw->add_option("--voltage", power.voltage_v);
    pw->add_option("--efficiency", power.efficiency);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // config error unless --help/--version
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (ft->parsed()) return cmd_features(feat);
        if (tr->parsed()) return cmd_train(train);
        if (q->parsed()) return cmd_quantize(quant);
        if (in->parsed()) return cmd_infer(infer);
        if (ev->parsed()) return cmd_eval(eval);
        if (sw->parsed()) return cmd_gate_sweep(sweep);
        if (pw->parsed()) return cmd_power(power);
    } catch (const pvad::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
