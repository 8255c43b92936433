#pragma once

#include <string>
#include <vector>

namespace pvad {

// Duty-cycled SoC power profile. t_fft_ms covers the always-on front end up
// to the gate decision; t_infer_ms is the stage a skipped frame avoids. The
// shipped profiles carry measured sleep/compute figures; the stage split is
// fitted to the battery-projection gains and marked as such in the files.
struct SocProfile {
    std::string name;
    double p_sleep_mw = 0.0;   // platform sleep incl. microphone
    double p_compute_mw = 0.0; // additional power while processing
    double t_fft_ms = 0.0;
    double t_infer_ms = 0.0;
    double hop_ms = 10.0;

    void validate() const;
    double total_processing_ms() const { return t_fft_ms + t_infer_ms; }
    double duty_cycle() const { return total_processing_ms() / hop_ms; }
};

struct BatteryModel {
    double capacity_mah = 32.0;
    double voltage_v = 3.8;
    double converter_efficiency = 0.95;
};

struct PowerReport {
    std::string soc;
    double skip_fraction = 0.0;
    double duty_cycle = 0.0;
    double avg_power_mw = 0.0;
    double avg_current_ua = 0.0;
    double energy_per_inference_uj = 0.0;
    double worst_latency_ms = 0.0;
    double battery_life_h = 0.0;
};

// p_sleep + (d_fft + (1-f) * d_infer) * p_compute, with d = t / hop.
double avg_power_mw(const SocProfile& soc, double skip_fraction);

// Compute-phase energy above sleep for one processed frame.
double energy_per_inference_uj(const SocProfile& soc);

// Battery current through the converter: I = P / (V * eta); life = Q / I.
double battery_life_h(double avg_power_mw, const BatteryModel& bat);

PowerReport power_report(const SocProfile& soc, const BatteryModel& bat, double skip_fraction);
std::vector<PowerReport> skip_sweep(const SocProfile& soc, const BatteryModel& bat,
                                    const std::vector<double>& fractions);

// Built-in profiles carrying the measured platform figures.
SocProfile apollo4_profile();
SocProfile nrf5340_profile();

// Key-value profile file (toml-style flat keys); battery keys optional.
SocProfile load_soc_profile(const std::string& path, BatteryModel* battery = nullptr);
void write_default_profiles(const std::string& dir);

} // namespace pvad
