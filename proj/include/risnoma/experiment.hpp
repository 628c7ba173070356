#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "risnoma/ber_analytic.hpp"
#include "risnoma/mc_engine.hpp"
#include "risnoma/pa_optimizer.hpp"
#include "risnoma/system_config.hpp"

namespace risnoma {

inline constexpr const char* kVersionString = "risnoma 0.1.0";

enum class Scenario { noma, oma1, oma2 };
enum class RunMode { analytic, mc, both };

[[nodiscard]] inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::noma: return "noma";
        case Scenario::oma1: return "oma1";
        default: return "oma2";
    }
}

[[nodiscard]] inline const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::analytic: return "analytic";
        case RunMode::mc: return "mc";
        default: return "both";
    }
}

[[nodiscard]] inline Scenario scenario_from_string(const std::string& s) {
    if (s == "noma") return Scenario::noma;
    if (s == "oma1") return Scenario::oma1;
    if (s == "oma2") return Scenario::oma2;
    throw std::invalid_argument("preset field 'scenario': unknown value '" + s +
                                "' (expected noma|oma1|oma2)");
}

[[nodiscard]] inline RunMode mode_from_string(const std::string& s) {
    if (s == "analytic") return RunMode::analytic;
    if (s == "mc") return RunMode::mc;
    if (s == "both") return RunMode::both;
    throw std::invalid_argument("preset field 'mode': unknown value '" + s +
                                "' (expected analytic|mc|both)");
}

// One declarative experiment: a system, a power sweep, and how to evaluate
// it. Loaded from a flat JSON file, one file per preset.
struct ExperimentPreset {
    std::string name;
    Scenario scenario{Scenario::noma};
    SystemConfig cfg;  // P_dB is filled in per sweep point
    double sweep_start_dB{0.0};
    double sweep_stop_dB{60.0};
    double sweep_step_dB{5.0};
    std::vector<double> sweep_offset_dB;  // per-user shift from the swept value
    RunMode mode{RunMode::both};
    bool pa{false};
    std::uint64_t runs{100000};
    std::uint64_t target_errors{200};
    std::uint64_t seed{1};
    int threads{0};
    std::uint64_t hash{0};  // FNV-1a of the defining bytes
};

namespace detail {

[[nodiscard]] inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

[[nodiscard]] inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Stream seed for one sweep point, decorrelated from every other point of
// the same master seed.
[[nodiscard]] inline std::uint64_t point_seed(std::uint64_t master, std::size_t point) {
    return mix64(mix64(master) ^ mix64(static_cast<std::uint64_t>(point) + 1));
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        throw std::invalid_argument(std::string("preset field '") + key + "': missing");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("preset field '") + key + "': " + e.what());
    }
}

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return field<T>(j, key);
}

}  // namespace detail

[[nodiscard]] inline ExperimentPreset preset_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw std::invalid_argument("preset: top level must be a JSON object");
    static const std::vector<std::string> known = {
        "name",          "scenario",       "bits",          "L",
        "L_total",       "d_user_ris",     "d_ris_bs",      "psi",
        "sigma_n2",      "sweep_start_dB", "sweep_stop_dB", "sweep_step_dB",
        "sweep_offset_dB", "mode",         "pa",            "runs",
        "target_errors", "seed",           "threads"};
    for (const auto& [key, value] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::invalid_argument("preset field '" + key + "': unknown key");

    ExperimentPreset p;
    p.name = detail::field<std::string>(j, "name");
    p.scenario = scenario_from_string(detail::field_or<std::string>(j, "scenario", "noma"));
    p.cfg.bits = detail::field<std::vector<int>>(j, "bits");
    p.cfg.L = detail::field<std::vector<int>>(j, "L");
    p.cfg.d_user_ris = detail::field<std::vector<double>>(j, "d_user_ris");
    p.cfg.d_ris_bs = detail::field<double>(j, "d_ris_bs");
    p.cfg.psi = detail::field_or<double>(j, "psi", 2.2);
    p.cfg.sigma_n2 = detail::field_or<double>(j, "sigma_n2", 1.0);
    p.cfg.K = static_cast<int>(p.cfg.bits.size());
    if (j.contains("L_total")) {
        const auto lt = detail::field<int>(j, "L_total");
        if (lt != total_reflectors(p.cfg))
            throw std::invalid_argument(
                "preset field 'L_total': does not match the sum of L (" +
                std::to_string(lt) + " vs " + std::to_string(total_reflectors(p.cfg)) + ")");
    }
    p.sweep_start_dB = detail::field<double>(j, "sweep_start_dB");
    p.sweep_stop_dB = detail::field<double>(j, "sweep_stop_dB");
    p.sweep_step_dB = detail::field<double>(j, "sweep_step_dB");
    p.sweep_offset_dB =
        detail::field_or<std::vector<double>>(j, "sweep_offset_dB", {});
    p.mode = mode_from_string(detail::field_or<std::string>(j, "mode", "both"));
    p.pa = detail::field_or<bool>(j, "pa", false);
    p.runs = detail::field_or<std::uint64_t>(j, "runs", 100000);
    p.target_errors = detail::field_or<std::uint64_t>(j, "target_errors", 200);
    p.seed = detail::field_or<std::uint64_t>(j, "seed", 1);
    p.threads = detail::field_or<int>(j, "threads", 0);
    const std::string canon = j.dump();
    p.hash = detail::fnv1a64(canon.data(), canon.size());
    return p;
}

[[nodiscard]] inline ExperimentPreset load_preset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("preset '" + path + "': cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("preset '" + path + "': " + e.what());
    }
    ExperimentPreset p = preset_from_json(j);
    p.hash = detail::fnv1a64(bytes.data(), bytes.size());
    return p;
}

[[nodiscard]] inline std::vector<double> sweep_points(const ExperimentPreset& p) {
    std::vector<double> pts;
    for (double v = p.sweep_start_dB; v <= p.sweep_stop_dB + 1e-9; v += p.sweep_step_dB)
        pts.push_back(v);
    return pts;
}

// Full invariant check without running anything. Throws std::invalid_argument
// naming the offending field.
inline void validate_preset(const ExperimentPreset& p) {
    if (p.name.empty()) throw std::invalid_argument("preset field 'name': empty");
    if (!(p.sweep_step_dB > 0.0))
        throw std::invalid_argument("preset field 'sweep_step_dB': must be > 0");
    if (p.sweep_stop_dB < p.sweep_start_dB)
        throw std::invalid_argument(
            "preset field 'sweep_stop_dB': below sweep_start_dB, sweep is empty");
    if (!p.sweep_offset_dB.empty() &&
        p.sweep_offset_dB.size() != static_cast<std::size_t>(p.cfg.K))
        throw std::invalid_argument(
            "preset field 'sweep_offset_dB': must have one entry per user");
    if (p.mode != RunMode::analytic && p.runs < 1)
        throw std::invalid_argument("preset field 'runs': must be >= 1 when mc is requested");
    if (p.pa) {
        if (p.scenario != Scenario::noma)
            throw std::invalid_argument(
                "preset field 'pa': power allocation applies to the noma scenario only");
        for (const double o : p.sweep_offset_dB)
            if (o != 0.0)
                throw std::invalid_argument(
                    "preset field 'sweep_offset_dB': must be zero when pa is on "
                    "(the cap is the swept value)");
    }
    if (p.scenario == Scenario::oma2 && p.mode == RunMode::analytic)
        throw std::invalid_argument(
            "preset field 'mode': oma2 has no closed-form column, use mc or both");
    SystemConfig probe = p.cfg;
    probe.P_dB.assign(static_cast<std::size_t>(p.cfg.K), p.sweep_start_dB);
    for (std::size_t k = 0; k < p.sweep_offset_dB.size(); ++k)
        probe.P_dB[k] += p.sweep_offset_dB[k];
    validate(probe);
}

// Rate-matched single-user closed form for the fully steered orthogonal
// scheme: the lone user sees every reflector aligned and carries K times its
// bits per symbol.
[[nodiscard]] inline std::vector<double> analytic_oma1_ber(const SystemConfig& cfg) {
    std::vector<double> out;
    const int l_total = total_reflectors(cfg);
    for (int k = 0; k < cfg.K; ++k) {
        SystemConfig solo;
        solo.K = 1;
        solo.bits = {cfg.bits[static_cast<std::size_t>(k)] * cfg.K};
        solo.L = {l_total};
        solo.d_user_ris = {cfg.d_user_ris[static_cast<std::size_t>(k)]};
        solo.d_ris_bs = cfg.d_ris_bs;
        solo.psi = cfg.psi;
        solo.sigma_n2 = cfg.sigma_n2;
        solo.P_dB = {cfg.P_dB[static_cast<std::size_t>(k)]};
        out.push_back(analytic_ber(solo)[0]);
    }
    return out;
}

struct ExperimentRow {
    int user{0};  // 1-based; 0 marks a note row
    double power_dB{0.0};
    std::optional<double> ber_analytic;
    std::optional<double> ber_mc;
    std::optional<double> stderr_mc;
    std::optional<std::uint64_t> errors;
    std::optional<std::uint64_t> runs;
    std::string note;  // non-empty only on note rows
};

struct ExperimentResult {
    ExperimentPreset preset;
    std::vector<ExperimentRow> rows;
};

// Evaluates the sweep in deterministic point order. A failure at one point
// becomes a note row for that point; the remaining points still run.
[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentPreset& p) {
    validate_preset(p);
    ExperimentResult res;
    res.preset = p;
    const auto pts = sweep_points(p);
    const bool want_analytic = p.mode != RunMode::mc && p.scenario != Scenario::oma2;
    const bool want_mc = p.mode != RunMode::analytic;
    std::vector<double> warm;

    for (std::size_t t = 0; t < pts.size(); ++t) {
        const double v = pts[t];
        try {
            SystemConfig cfg = p.cfg;
            cfg.P_dB.assign(static_cast<std::size_t>(p.cfg.K), v);
            for (std::size_t k = 0; k < p.sweep_offset_dB.size(); ++k)
                cfg.P_dB[k] += p.sweep_offset_dB[k];

            std::vector<double> analytic;
            if (p.pa) {
                PaOptions po;
                po.p_max_dB = v;
                if (!warm.empty()) po.p0_dB = warm;
                const PaResult pr = optimize_power(cfg, po);
                warm = pr.p_dB;
                cfg.P_dB = pr.p_dB;
                if (want_analytic) analytic = pr.ber;
            } else if (want_analytic) {
                analytic = p.scenario == Scenario::oma1 ? analytic_oma1_ber(cfg)
                                                        : analytic_ber(cfg);
            }

            McResult mc;
            if (want_mc) {
                McOptions mo;
                mo.seed = detail::point_seed(p.seed, t);
                mo.max_runs = p.runs;
                mo.target_errors = p.target_errors;
                mo.threads = p.threads;
                const McMode mm = p.scenario == Scenario::noma  ? McMode::noma
                                  : p.scenario == Scenario::oma1 ? McMode::oma1
                                                                 : McMode::oma2;
                mc = simulate_links(cfg, mo, mm);
            }

            for (int k = 0; k < p.cfg.K; ++k) {
                ExperimentRow row;
                row.user = k + 1;
                row.power_dB = v;
                if (want_analytic) row.ber_analytic = analytic[static_cast<std::size_t>(k)];
                if (want_mc) {
                    row.ber_mc = mc.ber[static_cast<std::size_t>(k)];
                    row.stderr_mc = mc.ber_stderr[static_cast<std::size_t>(k)];
                    row.errors = mc.bit_errors[static_cast<std::size_t>(k)];
                    row.runs = mc.runs;
                }
                res.rows.push_back(std::move(row));
            }
        } catch (const std::exception& e) {
            ExperimentRow note;
            note.power_dB = v;
            note.note = e.what();
            res.rows.push_back(std::move(note));
        }
    }
    return res;
}

namespace detail {

inline void csv_num(std::ostream& os, double v, const char* fmt) {
    char buf[40];
    std::snprintf(buf, sizeof buf, fmt, v);
    os << buf;
}

}  // namespace detail

// Stable byte-for-byte rendering: fixed formats, no timestamps, metadata in
// leading comment lines.
inline void write_experiment_csv(const ExperimentResult& res, std::ostream& os) {
    const ExperimentPreset& p = res.preset;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(p.hash));
    os << "# " << kVersionString << "\n";
    os << "# preset " << p.name << " hash " << hash << "\n";
    os << "# seed " << p.seed << " runs " << p.runs << "\n";
    os << "preset,scenario,user,power_dB,ber_analytic,ber_mc,stderr_mc,errors,runs,seed\n";
    for (const ExperimentRow& r : res.rows) {
        if (!r.note.empty()) {
            os << "# error power=";
            detail::csv_num(os, r.power_dB, "%.10g");
            os << ": " << r.note << "\n";
            continue;
        }
        os << p.name << ',' << to_string(p.scenario) << ',' << r.user << ',';
        detail::csv_num(os, r.power_dB, "%.10g");
        os << ',';
        if (r.ber_analytic) detail::csv_num(os, *r.ber_analytic, "%.10e");
        os << ',';
        if (r.ber_mc) detail::csv_num(os, *r.ber_mc, "%.10e");
        os << ',';
        if (r.stderr_mc) detail::csv_num(os, *r.stderr_mc, "%.10e");
        os << ',';
        if (r.errors) os << *r.errors;
        os << ',';
        if (r.runs) os << *r.runs;
        os << ',' << p.seed << "\n";
    }
}

// Preset names (file stems) available in a directory, sorted.
[[nodiscard]] inline std::vector<std::string> list_presets(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json")
            names.push_back(entry.path().stem().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace risnoma
