#include "pvad/power.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>

#include "pvad/errors.hpp"

namespace pvad {

void SocProfile::validate() const {
    if (p_sleep_mw < 0 || p_compute_mw < 0 || t_fft_ms < 0 || t_infer_ms < 0 || hop_ms <= 0)
        throw ConfigError("SoC profile '" + name + "': negative timing or power");
    if (total_processing_ms() > hop_ms)
        throw ConfigError("SoC profile '" + name + "': processing exceeds the hop period");
}

double avg_power_mw(const SocProfile& soc, double skip_fraction) {
    soc.validate();
    if (skip_fraction < 0.0 || skip_fraction > 1.0)
        throw NumericError("skip fraction outside [0, 1]");
    const double d_fft = soc.t_fft_ms / soc.hop_ms;
    const double d_inf = (1.0 - skip_fraction) * soc.t_infer_ms / soc.hop_ms;
    return soc.p_sleep_mw + (d_fft + d_inf) * soc.p_compute_mw;
}

double energy_per_inference_uj(const SocProfile& soc) {
    soc.validate();
    return soc.p_compute_mw * soc.total_processing_ms(); // mW * ms = uJ
}

double battery_life_h(double power_mw, const BatteryModel& bat) {
    if (power_mw <= 0.0) throw NumericError("battery_life_h: power must be positive");
    if (bat.capacity_mah <= 0.0 || bat.converter_efficiency <= 0.0 ||
        bat.converter_efficiency > 1.0)
        throw ConfigError("battery model out of range");
    const double current_ma = power_mw / (bat.voltage_v * bat.converter_efficiency);
    return bat.capacity_mah / current_ma;
}

PowerReport power_report(const SocProfile& soc, const BatteryModel& bat, double skip_fraction) {
    PowerReport r;
    r.soc = soc.name;
    r.skip_fraction = skip_fraction;
    r.duty_cycle = soc.duty_cycle();
    r.avg_power_mw = avg_power_mw(soc, skip_fraction);
    r.avg_current_ua = r.avg_power_mw / (bat.voltage_v * bat.converter_efficiency) * 1000.0;
    r.energy_per_inference_uj = energy_per_inference_uj(soc);
    r.worst_latency_ms = soc.hop_ms + soc.total_processing_ms();
    r.battery_life_h = battery_life_h(r.avg_power_mw, bat);
    return r;
}

std::vector<PowerReport> skip_sweep(const SocProfile& soc, const BatteryModel& bat,
                                    const std::vector<double>& fractions) {
    std::vector<PowerReport> out;
    out.reserve(fractions.size());
    for (double f : fractions) out.push_back(power_report(soc, bat, f));
    return out;
}

SocProfile apollo4_profile() {
    SocProfile p;
    p.name = "apollo4";
    p.p_sleep_mw = 1.21;
    p.p_compute_mw = 5.01;
    p.t_fft_ms = 0.72; // fitted split of the measured 2.80 ms frame time
    p.t_infer_ms = 2.08;
    p.hop_ms = 10.0;
    return p;
}

SocProfile nrf5340_profile() {
    SocProfile p;
    p.name = "nrf5340";
    p.p_sleep_mw = 2.065;
    p.p_compute_mw = 24.64;
    p.t_fft_ms = 0.77; // same fitted ratio applied to the measured 2.99 ms
    p.t_infer_ms = 2.22;
    p.hop_ms = 10.0;
    return p;
}

namespace {

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FileError("cannot open profile: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        kv[key] = value;
    }
    return kv;
}

double kv_number(const std::map<std::string, std::string>& kv, const std::string& key,
                 const std::string& path) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(path + ": missing key '" + key + "'");
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw FormatError(path + ": key '" + key + "' is not a number");
    }
}

} // namespace

SocProfile load_soc_profile(const std::string& path, BatteryModel* battery) {
    const auto kv = parse_kv_file(path);
    SocProfile p;
    auto it = kv.find("name");
    p.name = it != kv.end() ? it->second : std::filesystem::path(path).stem().string();
    p.p_sleep_mw = kv_number(kv, "p_sleep_mw", path);
    p.p_compute_mw = kv_number(kv, "p_compute_mw", path);
    p.t_fft_ms = kv_number(kv, "t_fft_ms", path);
    p.t_infer_ms = kv_number(kv, "t_infer_ms", path);
    p.hop_ms = kv.count("hop_ms") ? kv_number(kv, "hop_ms", path) : 10.0;
    p.validate();
    if (battery) {
        if (kv.count("battery_capacity_mah"))
            battery->capacity_mah = kv_number(kv, "battery_capacity_mah", path);
        if (kv.count("battery_voltage_v"))
            battery->voltage_v = kv_number(kv, "battery_voltage_v", path);
        if (kv.count("converter_efficiency"))
            battery->converter_efficiency = kv_number(kv, "converter_efficiency", path);
    }
    return p;
}

void write_default_profiles(const std::string& dir) {
    std::filesystem::create_directories(dir);
    auto dump = [&](const SocProfile& p, const std::string& comment) {
        std::ofstream f(dir + "/" + p.name + ".toml");
        if (!f) throw FileError("cannot write profile under " + dir);
        f << "# " << comment << "\n";
        f << "# t_fft_ms / t_infer_ms: fitted split of the measured per-frame time\n";
        f << "name = \"" << p.name << "\"\n";
        f << "p_sleep_mw = " << p.p_sleep_mw << "\n";
        f << "p_compute_mw = " << p.p_compute_mw << "\n";
        f << "t_fft_ms = " << p.t_fft_ms << "\n";
        f << "t_infer_ms = " << p.t_infer_ms << "\n";
        f << "hop_ms = " << p.hop_ms << "\n";
        f << "battery_capacity_mah = 32\n";
        f << "battery_voltage_v = 3.8\n";
        f << "converter_efficiency = 0.95\n";
    };
    dump(apollo4_profile(), "Ambiq Apollo 4 Blue, measured mean figures");
    dump(nrf5340_profile(), "Nordic NRF5340, measured mean figures");
}

} // namespace pvad
