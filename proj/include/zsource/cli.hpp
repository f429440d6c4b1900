#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "zsource/analysis.hpp"
#include "zsource/certificates.hpp"
#include "zsource/error.hpp"
#include "zsource/io.hpp"
#include "zsource/model.hpp"
#include "zsource/signals.hpp"
#include "zsource/sim.hpp"

#ifndef ZSOURCE_VERSION
#define ZSOURCE_VERSION "1.0.0"
#endif

namespace zsource::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* version = ZSOURCE_VERSION;
inline constexpr const char* default_output_dir = "zsource-out";

enum class Exit : int { ok = 0, verdict = 1, config = 2, internal = 3 };

struct Violation {
    std::string field;
    std::string message;
};

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

enum class FieldType { number, integer, boolean, string, vec4, number_array };

struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    bool contains(double v) const {
        if (!std::isfinite(v)) return false;
        if (lo_open ? !(v > lo) : !(v >= lo)) return false;
        if (hi_open ? !(v < hi) : !(v <= hi)) return false;
        return true;
    }

    std::string text() const {
        const bool has_lo = std::isfinite(lo), has_hi = std::isfinite(hi);
        if (!has_lo && !has_hi) return "finite";
        std::string s;
        if (has_lo) s += io::format_double(lo) + (lo_open ? " < " : " <= ");
        s += "value";
        if (has_hi) s += std::string(hi_open ? " < " : " <= ") + io::format_double(hi);
        return s;
    }
};

inline Range positive() { return {0.0, std::numeric_limits<double>::infinity(), true, false}; }
inline Range nonnegative() { return {0.0, std::numeric_limits<double>::infinity(), false, false}; }
inline Range any_finite() { return {}; }
inline Range at_least(double lo) { return {lo, std::numeric_limits<double>::infinity(), false, false}; }

struct Field {
    std::string name;
    FieldType type = FieldType::number;
    json fallback;
    Range range;
    std::vector<std::string> choices;
    std::string doc;
    std::string range_message;  // replaces the generic range text when set
};

inline Field num(std::string name, double d, Range r, std::string doc, std::string msg = {}) {
    return {std::move(name), FieldType::number, d, r, {}, std::move(doc), std::move(msg)};
}
inline Field integer(std::string name, long d, double lo, std::string doc) {
    return {std::move(name), FieldType::integer, d, at_least(lo), {}, std::move(doc), {}};
}
inline Field choice(std::string name, std::string d, std::vector<std::string> c, std::string doc) {
    return {std::move(name), FieldType::string, d, {}, std::move(c), std::move(doc), {}};
}
inline Field boolean(std::string name, bool d, std::string doc) {
    return {std::move(name), FieldType::boolean, d, {}, {}, std::move(doc), {}};
}
inline Field vec4(std::string name, json d, std::string doc) {
    return {std::move(name), FieldType::vec4, std::move(d), any_finite(), {}, std::move(doc), {}};
}

inline std::vector<Field> duty_fields(const std::string& kind, double omega) {
    return {
        choice("kind", kind, {"constant", "sinusoidal"}, "duty profile shape"),
        num("D", 0.5, {0.0, 1.0, true, true}, "constant duty cycle"),
        num("M", 0.5, {0.0, 1.0, false, true}, "modulation index",
            "modulation index M must satisfy 0 <= M < 1"),
        num("omega", omega, nonnegative(), "modulation frequency [rad/s]"),
        num("phase", 0.0, any_finite(), "modulation phase [rad]"),
        num("eps_d", 0.05, {0.0, 0.5, true, false}, "duty clamp margin"),
    };
}

inline std::vector<Field> append(std::vector<Field> a, const std::vector<Field>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline const std::vector<std::string>& commands() {
    static const std::vector<std::string> names{"simulate-averaged", "simulate-switched", "steady-state",
                                                "certify-averaged",  "certify-switched",  "monodromy",
                                                "orbit",             "demo",              "sweep",
                                                "diff"};
    return names;
}

inline const std::vector<Field>& command_fields(const std::string& cmd) {
    static const json zero = json::array({0.0, 0.0, 0.0, 0.0});
    static const std::map<std::string, std::vector<Field>> table = [] {
        std::map<std::string, std::vector<Field>> t;
        t["steady-state"] = {num("D", 0.5, {0.0, 1.0, true, true}, "duty cycle")};
        t["simulate-averaged"] = append(duty_fields("sinusoidal", 0.2),
                                        {vec4("x0", zero, "initial state"),
                                         choice("frame", "z", {"z", "x"}, "frame of x0"),
                                         num("horizon", 10.0, positive(), "simulated time [s]"),
                                         num("avg_step", 1e-2, positive(), "upper bound on the RK4 step [s]"),
                                         integer("stride", 1, 1, "emit every n-th step")});
        t["simulate-switched"] = append(
            duty_fields("sinusoidal", 0.2),
            {num("T", 1.0, positive(), "PWM period [s]"),
             num("eps", 0.1, positive(), "dwell time [s]"),
             integer("periods", 50, 1, "number of PWM periods"),
             choice("source", "duty", {"duty", "random", "explicit"}, "how switch times are produced"),
             {"switch_times", FieldType::number_array, json::array(), any_finite(), {}, "explicit switch times [s]", {}},
             vec4("x0", zero, "initial state"),
             choice("frame", "z", {"z", "x"}, "frame of x0"),
             num("sample_dt", 0.0, nonnegative(), "extra uniform output grid [s], 0 for none")});
        t["certify-averaged"] = {num("eps", 0.1, {0.0, 0.5, true, false}, "duty margin"),
                                 integer("grid", 101, 2, "mu grid points"),
                                 num("theta", 0.5, {0.0, 1.0, true, true}, "ISS split parameter")};
        t["certify-switched"] = {num("T", 2.0, positive(), "PWM period [s]"),
                                 num("eps", 0.2, positive(), "dwell time [s]"),
                                 integer("grid_n", 33, 3, "initial kappa3 grid points"),
                                 num("kappa_rel_tol", 1e-6, positive(), "kappa3 refinement tolerance"),
                                 integer("kappa_max_points", 65537, 3, "kappa3 grid cap"),
                                 num("theta", 0.5, {0.0, 1.0, true, true}, "ISS split parameter"),
                                 integer("gemp_signals", 8, 0, "random signals for the empirical gain"),
                                 integer("gemp_periods", 40, 1, "periods per empirical-gain run")};
        t["monodromy"] = {num("t_I", 1.0, positive(), "Mode I duration [s]"),
                       num("t_II", 1.0, positive(), "Mode II duration [s]"),
                       num("eps", 0.1, nonnegative(), "trailing Mode I segment [s]")};
        t["orbit"] = append(duty_fields("sinusoidal", 2.0 * std::numbers::pi / 20.0),
                            {choice("model", "switched", {"switched", "averaged"}, "model"),
                             num("T", 0.2, positive(), "PWM period [s]"),
                             num("eps", 0.02, positive(), "dwell time [s]"),
                             num("period", 0.0, nonnegative(), "orbit period [s], 0 for the modulation period"),
                             num("sample_dt", 0.0, nonnegative(), "extra uniform output grid [s]")});
        t["demo"] = {num("M", 0.5, {0.0, 1.0, false, true}, "modulation index",
                         "modulation index M must satisfy 0 <= M < 1"),
                     num("omega", 0.0, nonnegative(), "modulation frequency [rad/s], 0 for the default"),
                     num("T_pwm", 0.0, nonnegative(), "PWM period [s], 0 for the default"),
                     num("eps", 0.0, nonnegative(), "dwell time [s], 0 for T_pwm / 10"),
                     num("horizon_periods", 3.0, at_least(2.0), "modulation periods simulated"),
                     integer("samples_per_pwm", 4, 1, "output samples per PWM period"),
                     num("settle_rel_tol", 1e-3, positive(), "settle tolerance"),
                     num("eps_d", 0.05, {0.0, 0.5, true, false}, "duty clamp margin"),
                     num("rms_threshold", 0.05, positive(), "pass threshold on the relative RMS error"),
                     boolean("write_trajectory", true, "write trajectory.csv")};
        t["sweep"] = append(duty_fields("constant", 0.2),
                            {num("T0", std::numbers::pi / 10.0, positive(), "largest PWM period [s]"),
                             integer("levels", 4, 2, "number of halvings plus one"),
                             num("horizon", 20.0, positive(), "simulated time [s]"),
                             num("eps_ratio", 0.1, {0.0, 0.5, true, false}, "eps / T"),
                             integer("samples_per_period", 8, 1, "comparison samples per period"),
                             vec4("x0", zero, "initial state"),
                             choice("frame", "z", {"z", "x"}, "frame of x0")});
        t["diff"] = append(duty_fields("sinusoidal", 0.2),
                           {choice("model", "averaged", {"averaged", "switched"}, "model"),
                            num("T", 1.0, positive(), "PWM period [s]"),
                            num("eps", 0.1, positive(), "dwell time [s]"),
                            num("horizon", 200.0, positive(), "simulated time [s]"),
                            integer("stride", 10, 1, "averaged output stride"),
                            vec4("x0", nullptr, "first initial state (x-frame), random when null"),
                            vec4("y0", nullptr, "second initial state (x-frame), random when null")});
        return t;
    }();
    static const std::vector<Field> empty;
    const auto it = table.find(cmd);
    return it == table.end() ? empty : it->second;
}

inline std::vector<Field> param_fields() {
    return {num("L1", 1.0, positive(), "inductance L1 [H]"), num("L2", 1.0, positive(), "inductance L2 [H]"),
            num("C1", 1.0, positive(), "capacitance C1 [F]"), num("C2", 1.0, positive(), "capacitance C2 [F]"),
            num("R", 1.0, positive(), "load resistance [Ohm]"), num("Vin", 1.0, positive(), "source voltage [V]")};
}

inline bool is_command(const std::string& c) {
    for (const auto& n : commands())
        if (n == c) return true;
    return false;
}

inline void check_field(const json& v, const Field& f, const std::string& path, std::vector<Violation>& out) {
    auto bad = [&](const std::string& msg) { out.push_back({path, path + ": " + msg}); };
    auto check_number = [&](const json& x, const std::string& where) {
        if (!x.is_number()) {
            out.push_back({where, where + ": expected a number"});
            return;
        }
        const double d = x.get<double>();
        if (!f.range.contains(d))
            out.push_back({where, where + ": " + (f.range_message.empty() ? "must satisfy " + f.range.text()
                                                                          : f.range_message) +
                                      " (got " + io::format_double(d) + ")"});
    };
    switch (f.type) {
        case FieldType::number: check_number(v, path); break;
        case FieldType::integer:
            if (!v.is_number_integer()) bad("expected an integer");
            else if (!f.range.contains(static_cast<double>(v.get<long long>())))
                bad("must satisfy " + f.range.text());
            break;
        case FieldType::boolean:
            if (!v.is_boolean()) bad("expected true or false");
            break;
        case FieldType::string:
            if (!v.is_string()) {
                bad("expected a string");
            } else if (!f.choices.empty()) {
                bool ok = false;
                for (const auto& c : f.choices) ok = ok || v.get<std::string>() == c;
                if (!ok) {
                    std::string list;
                    for (const auto& c : f.choices) list += (list.empty() ? "" : ", ") + c;
                    bad("must be one of " + list);
                }
            }
            break;
        case FieldType::vec4:
            if (v.is_null() && f.fallback.is_null()) break;
            if (!v.is_array() || v.size() != 4) {
                bad("expected an array of 4 numbers");
                break;
            }
            for (std::size_t i = 0; i < 4; ++i) check_number(v[i], path + "[" + std::to_string(i) + "]");
            break;
        case FieldType::number_array:
            if (!v.is_array()) {
                bad("expected an array of numbers");
                break;
            }
            for (std::size_t i = 0; i < v.size(); ++i) check_number(v[i], path + "[" + std::to_string(i) + "]");
            break;
    }
}

inline void check_object(const json& obj, const std::vector<Field>& fields, const std::string& prefix,
                         std::vector<Violation>& out) {
    if (!obj.is_object()) {
        out.push_back({prefix, prefix + ": expected an object"});
        return;
    }
    for (const auto& [key, value] : obj.items()) {
        const Field* f = nullptr;
        for (const auto& cand : fields)
            if (cand.name == key) f = &cand;
        if (!f) {
            out.push_back({prefix + "." + key, prefix + "." + key + ": unknown field"});
            continue;
        }
        check_field(value, *f, prefix + "." + key, out);
    }
}

/// Copy of obj with every missing field set to its default.
inline json with_defaults(const json& obj, const std::vector<Field>& fields) {
    json out = json::object();
    for (const auto& f : fields) out[f.name] = obj.is_object() && obj.contains(f.name) ? obj.at(f.name) : f.fallback;
    return out;
}

inline CircuitParams params_from(const json& j) {
    CircuitParams p;
    p.L1 = j.at("L1").get<double>();
    p.L2 = j.at("L2").get<double>();
    p.C1 = j.at("C1").get<double>();
    p.C2 = j.at("C2").get<double>();
    p.R = j.at("R").get<double>();
    p.Vin = j.at("Vin").get<double>();
    return p;
}

inline DutyProfile duty_from(const json& s) {
    if (s.at("kind") == "constant") return DutyProfile::constant_duty(s.at("D").get<double>(), s.at("eps_d").get<double>());
    return DutyProfile::sinusoidal(s.at("M").get<double>(), s.at("omega").get<double>(), s.at("phase").get<double>(),
                                   s.at("eps_d").get<double>());
}

inline void check_pwm_pair(const json& s, const std::string& prefix, std::vector<Violation>& out) {
    if (!s.at("T").is_number() || !s.at("eps").is_number()) return;
    const double T = s.at("T").get<double>(), eps = s.at("eps").get<double>();
    if (T > 0.0 && eps > 0.0 && !(2.0 * eps <= T))
        out.push_back({prefix + ".eps", prefix + ".eps: the PWM class requires 2*eps <= T (got T=" +
                                            io::format_double(T) + ", eps=" + io::format_double(eps) + ")"});
}

/// Whole-document validation; cross-field checks run on the resolved command sub-object.
inline std::vector<Violation> validate_config(const json& cfg) {
    std::vector<Violation> out;
    if (!cfg.is_object()) {
        out.push_back({"", "configuration must be a JSON object"});
        return out;
    }
    for (const auto& [key, value] : cfg.items()) {
        if (key == "schema") {
            if (value != "zsource.config.v1")
                out.push_back({"schema", "schema: expected \"zsource.config.v1\""});
        } else if (key == "command") {
            if (!value.is_string() || !is_command(value.get<std::string>()))
                out.push_back({"command", "command: unknown command"});
        } else if (key == "params") {
            check_object(value, param_fields(), "params", out);
        } else if (key == "output_dir") {
            if (!value.is_string() || value.get<std::string>().empty())
                out.push_back({"output_dir", "output_dir: expected a non-empty string"});
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) out.push_back({"seed", "seed: expected a non-negative integer"});
        } else if (is_command(key)) {
            check_object(value, command_fields(key), key, out);
        } else {
            out.push_back({key, key + ": unknown field"});
        }
    }
    if (!cfg.contains("command")) out.push_back({"command", "command: missing"});
    if (!out.empty()) return out;

    const std::string cmd = cfg.at("command").get<std::string>();
    const json s = with_defaults(cfg.value(cmd, json::object()), command_fields(cmd));
    const CircuitParams p = params_from(with_defaults(cfg.value("params", json::object()), param_fields()));
    const double limit = p.resonance_half_period();
    if (cmd == "simulate-switched" || cmd == "orbit" || cmd == "diff") check_pwm_pair(s, cmd, out);
    if (cmd == "simulate-switched" && s.at("source") == "explicit") {
        PwmSignal sig{s.at("T").get<double>(), s.at("eps").get<double>(), s.at("switch_times").get<std::vector<double>>()};
        const auto v = validate_pwm(sig);
        if (!v.passed) out.push_back({cmd + ".switch_times", cmd + ".switch_times: " + v.message});
    }
    if (cmd == "certify-switched") {
        const double T = s.at("T").get<double>(), eps = s.at("eps").get<double>();
        if (!(2.0 * eps <= T && T < limit))
            out.push_back({cmd + ".T", cmd + ".T: requires 0 < 2*eps <= T < pi*sqrt(L1*C1) = " +
                                           io::format_double(limit) + " (got T=" + io::format_double(T) +
                                           ", eps=" + io::format_double(eps) + ")"});
    }
    if (cmd == "orbit") {
        const bool sinusoidal = s.at("kind") == "sinusoidal";
        if (sinusoidal && s.at("period").get<double>() == 0.0 && s.at("omega").get<double>() == 0.0)
            out.push_back({cmd + ".omega", cmd + ".omega: a sinusoidal orbit needs omega > 0 or an explicit period"});
        if (s.at("model") == "switched") {
            double period = s.at("period").get<double>();
            const double T = s.at("T").get<double>();
            if (period == 0.0) period = sinusoidal && s.at("omega").get<double>() > 0.0
                                            ? 2.0 * std::numbers::pi / s.at("omega").get<double>()
                                            : T;
            const double ratio = period / T;
            if (!(std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio && std::round(ratio) >= 1.0))
                out.push_back({cmd + ".period", cmd + ".period: the orbit period must be an integer multiple of T"});
        }
    }
    if (cmd == "demo") {
        DemoConfig dc;
        dc.omega = s.at("omega").get<double>();
        dc.T_pwm = s.at("T_pwm").get<double>();
        dc.eps = s.at("eps").get<double>();
        const auto r = dc.resolved(p);
        if (!(r.T_pwm < limit))
            out.push_back({cmd + ".T_pwm", cmd + ".T_pwm: requires T_pwm < pi*sqrt(L1*C1) = " + io::format_double(limit)});
        if (!(2.0 * r.eps <= r.T_pwm))
            out.push_back({cmd + ".eps", cmd + ".eps: the PWM class requires 2*eps <= T_pwm"});
    }
    return out;
}

/// Full default document for a command.
inline json resolve_config(const json& cfg) {
    const std::string cmd = cfg.at("command").get<std::string>();
    json out = json::object();
    out["schema"] = "zsource.config.v1";
    out["command"] = cmd;
    out["params"] = with_defaults(cfg.value("params", json::object()), param_fields());
    if (cfg.contains("output_dir")) out["output_dir"] = cfg.at("output_dir");
    out["seed"] = cfg.value("seed", 1u);
    out[cmd] = with_defaults(cfg.value(cmd, json::object()), command_fields(cmd));
    return out;
}

/// JSON Schema (draft 2020-12) for configuration documents.
inline json config_schema() {
    auto field_schema = [](const Field& f) {
        json s = json::object();
        auto range = [&](json& t) {
            if (std::isfinite(f.range.lo)) t[f.range.lo_open ? "exclusiveMinimum" : "minimum"] = f.range.lo;
            if (std::isfinite(f.range.hi)) t[f.range.hi_open ? "exclusiveMaximum" : "maximum"] = f.range.hi;
        };
        switch (f.type) {
            case FieldType::number: s["type"] = "number"; range(s); break;
            case FieldType::integer: s["type"] = "integer"; range(s); break;
            case FieldType::boolean: s["type"] = "boolean"; break;
            case FieldType::string:
                s["type"] = "string";
                if (!f.choices.empty()) s["enum"] = f.choices;
                break;
            case FieldType::vec4: {
                json arr = {{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 4}, {"maxItems", 4}};
                if (f.fallback.is_null()) s["oneOf"] = json::array({{{"type", "null"}}, arr});
                else s = arr;
                break;
            }
            case FieldType::number_array: s = {{"type", "array"}, {"items", {{"type", "number"}}}}; break;
        }
        s["default"] = f.fallback;
        s["description"] = f.doc;
        return s;
    };
    auto object_schema = [&](const std::vector<Field>& fields) {
        json props = json::object();
        for (const auto& f : fields) props[f.name] = field_schema(f);
        return json{{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
    };
    json props = json::object();
    props["schema"] = {{"const", "zsource.config.v1"}};
    props["command"] = {{"enum", commands()}};
    props["params"] = object_schema(param_fields());
    props["output_dir"] = {{"type", "string"}, {"minLength", 1}};
    props["seed"] = {{"type", "integer"}, {"minimum", 0}, {"default", 1}};
    for (const auto& c : commands()) props[c] = object_schema(command_fields(c));
    return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
            {"$id", "zsource.config.v1"},
            {"title", "zsource experiment configuration"},
            {"type", "object"},
            {"additionalProperties", false},
            {"required", {"command"}},
            {"properties", props}};
}

// ---------------------------------------------------------------------------
// Overrides
// ---------------------------------------------------------------------------

inline json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

inline void set_path(json& root, const std::string& path, json value) {
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError(path, "override " + path + ": empty path component");
        if (!node->is_object()) throw ConfigError(path, "override " + path + ": parent is not an object");
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

/// `--a.b v` sets a dotted path; a bare key goes to the top level when it names
/// a top-level field and to the command's sub-object otherwise.
inline void apply_overrides(json& cfg, const std::vector<std::string>& extras, const std::string& cmd) {
    for (std::size_t i = 0; i < extras.size(); ++i) {
        std::string key = extras[i];
        if (key.rfind("--", 0) != 0) throw ConfigError(key, "unexpected argument " + key);
        key = key.substr(2);
        std::string value;
        if (const auto eq = key.find('='); eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw ConfigError(key, "override --" + key + " needs a value");
            value = extras[++i];
        }
        const bool top = key == "seed" || key == "output_dir" || key == "params" || key == "schema";
        const std::string path = key.find('.') != std::string::npos || top || cmd.empty() ? key : cmd + "." + key;
        set_path(cfg, path, parse_value(value));
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct Artifact {
    std::string name;
    std::string content;
};

struct Outcome {
    json summary;  // printed on standard output
    std::vector<Artifact> artifacts;
    std::vector<std::pair<std::string, bool>> verdicts;
};

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json report_header(const std::string& cmd) {
    return {{"schema", "zsource.report.v1"}, {"command", cmd}};
}

inline StateVector state_from(const json& s, const char* key, const char* frame_key, const CircuitParams& p) {
    const auto v = s.at(key).get<std::vector<double>>();
    const Frame f = s.at(frame_key) == "x" ? Frame::x : Frame::z;
    return to_x(StateVector{{v[0], v[1], v[2], v[3]}, f}, p);
}

inline std::string trajectory_csv(const Trajectory& tr, const CircuitParams& p) {
    std::ostringstream os;
    io::write_trajectory_csv(os, tr, p);
    return os.str();
}

inline json final_state(const Trajectory& tr, const CircuitParams& p) {
    const auto& last = tr.samples.back();
    return {{"t", last.t}, {"z", io::to_json(to_z(last.state, p).values)}, {"x", io::to_json(to_x(last.state, p).values)}};
}

inline Outcome cmd_steady_state(const json& cfg, const CircuitParams& p) {
    const double D = cfg.at("steady-state").at("D").get<double>();
    const auto z = steady_state(p, D);
    const auto chk = steady_state_check(p, D);
    Outcome o;
    json rep = report_header("steady-state");
    rep["D"] = D;
    rep["gain"] = gain(D);
    rep["z"] = io::to_json(z.values);
    rep["x"] = io::to_json(to_x(z, p).values);
    rep["residual_closed_form"] = chk.residual_closed_form;
    rep["max_abs_difference"] = chk.max_abs_difference;
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"linear_system_residual", chk.residual_closed_form <= 1e-10});
    std::string line = "[";
    for (std::size_t i = 0; i < 4; ++i) line += (i ? "," : "") + io::format_double(z.values[i]);
    o.summary = line + "]";
    return o;
}

inline Outcome cmd_simulate_averaged(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("simulate-averaged");
    const auto m = build(p);
    SimConfig sc;
    sc.horizon = s.at("horizon").get<double>();
    sc.avg_step = s.at("avg_step").get<double>();
    sc.sample_stride = s.at("stride").get<std::size_t>();
    const auto tr = simulate_averaged(m, duty_from(s), state_from(s, "x0", "frame", p), sc);
    Outcome o;
    json rep = report_header("simulate-averaged");
    rep["samples"] = tr.samples.size();
    rep["step"] = averaged_step(m, sc.avg_step);
    rep["ccm_violations"] = tr.count(EventKind::ccm_violation);
    rep["final"] = final_state(tr, p);
    o.artifacts.push_back({"trajectory.csv", trajectory_csv(tr, p)});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"ccm", !tr.ccm_violated()});
    o.summary = rep["final"];
    return o;
}

inline PwmSignal signal_from(const json& s, std::uint64_t seed) {
    const double T = s.at("T").get<double>(), eps = s.at("eps").get<double>();
    const std::string source = s.value("source", "duty");
    if (source == "explicit") return PwmSignal{T, eps, s.at("switch_times").get<std::vector<double>>()};
    const auto periods = s.at("periods").get<std::size_t>();
    if (source == "random") {
        std::mt19937_64 rng(seed);
        return detail::random_class_signal(rng, T, eps, periods);
    }
    return pwm_from_duty(duty_from(s), T, eps, periods);
}

inline Outcome cmd_simulate_switched(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("simulate-switched");
    const auto m = build(p);
    const auto sig = signal_from(s, cfg.at("seed").get<std::uint64_t>());
    const auto pv = validate_pwm(sig);
    if (!pv.passed) throw ConfigError("simulate-switched.switch_times", pv.message);
    SimConfig sc;
    sc.horizon = sig.end_time();
    sc.sample_dt = s.at("sample_dt").get<double>();
    const auto tr = simulate_switched(m, sig, state_from(s, "x0", "frame", p), sc);
    Outcome o;
    json rep = report_header("simulate-switched");
    rep["periods"] = sig.horizon();
    rep["samples"] = tr.samples.size();
    rep["switchings"] = tr.count(EventKind::switching);
    rep["ccm_violations"] = tr.count(EventKind::ccm_violation);
    rep["final"] = final_state(tr, p);
    json pwm = {{"schema", "zsource.pwm.v1"}};
    pwm.update(io::to_json(sig));
    o.artifacts.push_back({"trajectory.csv", trajectory_csv(tr, p)});
    o.artifacts.push_back({"pwm.json", dump(pwm)});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"pwm_class", pv.passed});
    o.verdicts.push_back({"ccm", !tr.ccm_violated()});
    o.summary = rep["final"];
    return o;
}

inline Outcome cmd_certify_averaged(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("certify-averaged");
    const auto c = certify_averaged(p, s.at("eps").get<double>(), s.at("grid").get<std::size_t>(),
                                    s.at("theta").get<double>());
    json j = {{"schema", "zsource.certificate.v1"}};
    j.update(io::to_json(c));
    Outcome o;
    o.artifacts.push_back({"certificate.json", dump(j)});
    for (const auto& chk : j.at("checks")) o.verdicts.push_back({chk.at("name"), chk.at("passed").get<bool>()});
    o.summary = {{"xi", c.xi}, {"alpha", c.alpha}, {"K", c.K}, {"lambda", c.lambda}, {"G", c.G}};
    return o;
}

inline Outcome cmd_certify_switched(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("certify-switched");
    CertifySwitchedOptions opt;
    opt.grid_n = s.at("grid_n").get<std::size_t>();
    opt.kappa_rel_tol = s.at("kappa_rel_tol").get<double>();
    opt.kappa_max_points = s.at("kappa_max_points").get<std::size_t>();
    opt.theta = s.at("theta").get<double>();
    opt.gemp_signals = s.at("gemp_signals").get<std::size_t>();
    opt.gemp_periods = s.at("gemp_periods").get<std::size_t>();
    opt.seed = cfg.at("seed").get<std::uint64_t>();
    const auto c = certify_switched(p, s.at("T").get<double>(), s.at("eps").get<double>(), opt);
    json j = {{"schema", "zsource.certificate.v1"}};
    j.update(io::to_json(c));
    j["options"] = {{"grid_n", opt.grid_n},
                    {"kappa_rel_tol", opt.kappa_rel_tol},
                    {"kappa_max_points", opt.kappa_max_points},
                    {"gemp_signals", opt.gemp_signals},
                    {"gemp_periods", opt.gemp_periods},
                    {"seed", opt.seed}};
    Outcome o;
    o.artifacts.push_back({"certificate.json", dump(j)});
    for (const auto& chk : j.at("checks")) o.verdicts.push_back({chk.at("name"), chk.at("passed").get<bool>()});
    o.summary = {{"kappa3", c.kappa3}, {"r", c.r}, {"K", c.K}, {"lambda", c.lambda}, {"G", c.G}, {"G_emp", c.G_emp}};
    return o;
}

inline Outcome cmd_monodromy(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("monodromy");
    const auto r = monodromy_check(p, s.at("t_I").get<double>(), s.at("t_II").get<double>(), s.at("eps").get<double>());
    json j = report_header("monodromy");
    j.update(io::to_json(r));
    Outcome o;
    o.artifacts.push_back({"report.json", dump(j)});
    for (const auto& chk : j.at("checks")) o.verdicts.push_back({chk.at("name"), chk.at("passed").get<bool>()});
    if (o.verdicts.empty()) o.verdicts.push_back({"monodromy", r.passed()});
    o.summary = {{"rho_M0", r.rho_M0}, {"rho_M_eps", r.rho_M_eps}, {"below_resonance", r.below_resonance}};
    return o;
}

inline Outcome cmd_orbit(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("orbit");
    const auto m = build(p);
    const auto profile = duty_from(s);
    const double T = s.at("T").get<double>();
    double period = s.at("period").get<double>();
    if (period == 0.0) period = profile.period().value_or(T);
    PeriodicOrbit orbit;
    if (s.at("model") == "switched") {
        const auto n = static_cast<std::size_t>(std::llround(period / T));
        orbit = periodic_orbit(m, pwm_from_duty(profile, T, s.at("eps").get<double>(), n), s.at("sample_dt").get<double>());
    } else {
        orbit = periodic_orbit(m, profile, period);
    }
    json rep = report_header("orbit");
    rep["model"] = s.at("model");
    rep.update(io::to_json(orbit));
    Outcome o;
    o.artifacts.push_back({"trajectory.csv", trajectory_csv(orbit.orbit, p)});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"fixed_point_residual", orbit.residual <= 1e-9});
    o.verdicts.push_back({"return_error", orbit.return_error <= 1e-8});
    o.summary = {{"rho", orbit.rho}, {"residual", orbit.residual}, {"return_error", orbit.return_error}};
    return o;
}

inline Outcome cmd_demo(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("demo");
    DemoConfig dc;
    dc.M = s.at("M").get<double>();
    dc.omega = s.at("omega").get<double>();
    dc.T_pwm = s.at("T_pwm").get<double>();
    dc.eps = s.at("eps").get<double>();
    dc.horizon_periods = s.at("horizon_periods").get<double>();
    dc.samples_per_pwm = s.at("samples_per_pwm").get<std::size_t>();
    dc.settle_rel_tol = s.at("settle_rel_tol").get<double>();
    dc.eps_d = s.at("eps_d").get<double>();
    const auto d = inverter_demo(p, dc);
    const auto r = dc.resolved(p);
    json rep = report_header("demo");
    rep["T_pwm"] = r.T_pwm;
    rep["eps"] = r.eps;
    rep.update(io::to_json(d.report));
    Outcome o;
    if (s.at("write_trajectory").get<bool>()) o.artifacts.push_back({"trajectory.csv", trajectory_csv(d.trajectory, p)});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"settled", d.report.settled});
    o.verdicts.push_back({"tracking", d.report.rms_error_rel <= s.at("rms_threshold").get<double>()});
    o.verdicts.push_back({"ccm", d.report.ccm_violations == 0});
    o.summary = {{"rms_error_rel", d.report.rms_error_rel},
                 {"fundamental_amplitude", d.report.fundamental_amplitude},
                 {"settle_time", d.report.settle_time}};
    return o;
}

inline Outcome cmd_sweep(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("sweep");
    const auto m = build(p);
    std::vector<double> Ts;
    double T = s.at("T0").get<double>();
    for (std::size_t i = 0; i < s.at("levels").get<std::size_t>(); ++i, T /= 2.0) Ts.push_back(T);
    SweepConfig sc;
    sc.horizon = s.at("horizon").get<double>();
    sc.eps_ratio = s.at("eps_ratio").get<double>();
    sc.samples_per_period = s.at("samples_per_period").get<std::size_t>();
    const auto rows = averaging_sweep(m, duty_from(s), state_from(s, "x0", "frame", p), Ts, sc);
    bool decreasing = true;
    for (std::size_t i = 1; i < rows.size(); ++i) decreasing = decreasing && rows[i].gap < rows[i - 1].gap;
    const double ratio = rows.front().gap > 0.0 ? rows.back().gap / rows.front().gap : 0.0;
    json rep = report_header("sweep");
    rep["rows"] = io::to_json(rows);
    rep["final_over_initial"] = ratio;
    std::ostringstream csv;
    io::write_sweep_csv(csv, rows);
    Outcome o;
    o.artifacts.push_back({"sweep.csv", csv.str()});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"strictly_decreasing", decreasing});
    o.verdicts.push_back({"gap_ratio", ratio <= 0.25});
    o.summary = {{"gaps", io::to_json(rows)}, {"final_over_initial", ratio}};
    return o;
}

inline Outcome cmd_diff(const json& cfg, const CircuitParams& p) {
    const auto& s = cfg.at("diff");
    const auto m = build(p);
    std::mt19937_64 rng(cfg.at("seed").get<std::uint64_t>());
    std::normal_distribution<double> nd(0.0, 1.0);
    auto pick = [&](const char* key) {
        Vec4 v;
        for (auto& x : v) x = nd(rng);
        if (!s.at(key).is_null()) {
            const auto a = s.at(key).get<std::vector<double>>();
            v = {a[0], a[1], a[2], a[3]};
        }
        return StateVector{v, Frame::x};
    };
    const auto x0 = pick("x0");
    const auto y0 = pick("y0");
    const auto profile = duty_from(s);
    const double horizon = s.at("horizon").get<double>();
    DecayFit fit;
    if (s.at("model") == "averaged") {
        fit = trajectory_difference(m, profile, x0, y0, horizon, s.at("stride").get<std::size_t>());
    } else {
        const double T = s.at("T").get<double>();
        const auto n = static_cast<std::size_t>(std::ceil(horizon / T - 1e-9));
        fit = trajectory_difference(m, pwm_from_duty(profile, T, s.at("eps").get<double>(), n), x0, y0, horizon);
    }
    json rep = report_header("diff");
    rep["model"] = s.at("model");
    rep["x0"] = io::to_json(x0.values);
    rep["y0"] = io::to_json(y0.values);
    rep["fit"] = io::to_json(fit);
    std::ostringstream csv;
    csv << "t,norm\n";
    for (std::size_t i = 0; i < fit.times.size(); ++i)
        csv << io::format_double(fit.times[i]) << ',' << io::format_double(fit.norms[i]) << '\n';
    Outcome o;
    o.artifacts.push_back({"difference.csv", csv.str()});
    o.artifacts.push_back({"report.json", dump(rep)});
    o.verdicts.push_back({"decaying", fit.decaying()});
    o.summary = {{"lambda_fit", fit.lambda_fit}, {"K_fit", fit.K_fit}, {"residual", fit.residual}};
    return o;
}

inline Outcome dispatch(const json& cfg) {
    const std::string cmd = cfg.at("command").get<std::string>();
    const CircuitParams p = params_from(cfg.at("params"));
    p.validate();
    if (cmd == "steady-state") return cmd_steady_state(cfg, p);
    if (cmd == "simulate-averaged") return cmd_simulate_averaged(cfg, p);
    if (cmd == "simulate-switched") return cmd_simulate_switched(cfg, p);
    if (cmd == "certify-averaged") return cmd_certify_averaged(cfg, p);
    if (cmd == "certify-switched") return cmd_certify_switched(cfg, p);
    if (cmd == "monodromy") return cmd_monodromy(cfg, p);
    if (cmd == "orbit") return cmd_orbit(cfg, p);
    if (cmd == "demo") return cmd_demo(cfg, p);
    if (cmd == "sweep") return cmd_sweep(cfg, p);
    if (cmd == "diff") return cmd_diff(cfg, p);
    throw ConfigError("command", "command: unknown command " + cmd);
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline Exit exit_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::config:
        case ErrorKind::invalid_input:
        case ErrorKind::out_of_range:
        case ErrorKind::invalid_pwm:
        case ErrorKind::invalid_modulation:
        case ErrorKind::precondition: return Exit::config;
        case ErrorKind::certificate_not_found: return Exit::verdict;
        case ErrorKind::singular:
        case ErrorKind::divergence:
        case ErrorKind::no_contraction: return Exit::internal;
    }
    return Exit::internal;
}

inline int report_error(std::ostream& err, Exit code, std::string_view kind, const std::string& message,
                        const std::optional<std::string>& field, const json& extra = json::object()) {
    json e = {{"kind", kind}, {"message", message}, {"field", field ? json(*field) : json(nullptr)}};
    for (const auto& [k, v] : extra.items()) e[k] = v;
    err << json{{"error", e}}.dump() << '\n';
    return static_cast<int>(code);
}

inline json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read configuration file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", "configuration file " + path + " is not valid JSON: " + e.what());
    }
}

inline std::filesystem::path output_dir_for(const json& cfg) {
    if (cfg.contains("output_dir")) return cfg.at("output_dir").get<std::string>();
    if (const char* env = std::getenv("ZSOURCE_OUTPUT_DIR"); env && *env) return env;
    return default_output_dir;
}

inline int violations_error(std::ostream& err, const std::vector<Violation>& v) {
    json list = json::array();
    for (const auto& x : v) list.push_back({{"field", x.field}, {"message", x.message}});
    const std::string msg = v.size() == 1 ? v.front().message : std::to_string(v.size()) + " violations; first: " + v.front().message;
    return report_error(err, Exit::config, "config", msg, v.front().field, {{"violations", list}});
}

/// Runs one invocation; args exclude the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Semi-quasi-Z-source inverter models and stability certificates", "zsource"};
    app.usage("zsource <command> [--config path] [--key value ...]");
    app.allow_extras();
    std::string command, config_path;
    app.add_option("--config", config_path, "JSON experiment configuration");
    app.set_version_flag("--version", version);
    app.footer("Commands: validate, schema, " + [] {
        std::string s;
        for (const auto& c : commands()) s += (s.empty() ? "" : ", ") + c;
        return s;
    }() + "\nOverrides: --key value (command field) or --dotted.path value");
    try {
        // The command is the leading bare word; everything else is options.
        std::size_t first = 0;
        if (!args.empty() && !args[0].empty() && args[0][0] != '-') {
            command = args[0];
            first = 1;
        }
        std::vector<std::string> rev(args.rbegin(), args.rend() - static_cast<std::ptrdiff_t>(first));
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << version << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        return report_error(err, Exit::config, "config", e.what(), std::nullopt);
    }

    try {
        if (command == "schema") {
            out << config_schema().dump(2) << '\n';
            return 0;
        }
        const bool validate_only = command == "validate";
        json cfg = load_config(config_path);
        std::string cmd = validate_only ? "" : command;
        if (cmd.empty() && cfg.is_object() && cfg.contains("command") && cfg.at("command").is_string())
            cmd = cfg.at("command").get<std::string>();
        if (!cmd.empty() && !is_command(cmd)) throw ConfigError("command", "command: unknown command " + cmd);
        if (cfg.is_object() && !validate_only && !command.empty()) cfg["command"] = cmd;
        apply_overrides(cfg, app.remaining(), cmd);

        const auto violations = validate_config(cfg);
        if (!violations.empty()) return violations_error(err, violations);
        if (validate_only) {
            out << json{{"valid", true}, {"command", cfg.at("command")}}.dump() << '\n';
            return 0;
        }

        const json resolved = resolve_config(cfg);
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o = dispatch(resolved);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const auto dir = output_dir_for(resolved);
        std::filesystem::create_directories(dir);
        json names = json::array();
        for (const auto& a : o.artifacts) {
            std::ofstream f(dir / a.name, std::ios::binary);
            f << a.content;
            if (!f) throw Error(ErrorKind::invalid_input, "cannot write " + (dir / a.name).string());
            names.push_back(a.name);
        }
        bool passed = true;
        json verdicts = json::object();
        for (const auto& [name, ok] : o.verdicts) {
            verdicts[name] = ok;
            passed = passed && ok;
        }
        names.push_back("manifest.json");
        const json manifest = {{"schema", "zsource.manifest.v1"},
                               {"version", version},
                               {"command", cmd},
                               {"config", resolved},
                               {"artifacts", names},
                               {"verdicts", verdicts},
                               {"passed", passed},
                               {"wall_time_s", wall}};
        {
            std::ofstream f(dir / "manifest.json", std::ios::binary);
            f << dump(manifest);
        }
        if (o.summary.is_string()) out << o.summary.get<std::string>() << '\n';
        else out << json{{"command", cmd}, {"passed", passed}, {"verdicts", verdicts}, {"result", o.summary}}.dump() << '\n';
        if (!passed) {
            std::string failed;
            for (const auto& [name, ok] : o.verdicts)
                if (!ok) failed += (failed.empty() ? "" : ", ") + name;
            return report_error(err, Exit::verdict, "verdict", "failed checks: " + failed, std::nullopt);
        }
        return 0;
    } catch (const ConfigError& e) {
        return report_error(err, Exit::config, "config", e.what(), e.field());
    } catch (const Error& e) {
        return report_error(err, exit_for(e.kind()), to_string(e.kind()), e.what(), std::nullopt);
    } catch (const std::exception& e) {
        return report_error(err, Exit::internal, "internal", e.what(), std::nullopt);
    }
}

}  // namespace zsource::cli
