#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <variant>

namespace qkdsim {

namespace {

struct Field {
    const char* key;
    std::variant<double RunConfig::*, std::uint64_t RunConfig::*, std::string RunConfig::*> ptr;
};

// one table drives file loading, --set, validation messages and dumping
const Field kFields[] = {
    {"n_pulses", &RunConfig::n_pulses},
    {"test_fraction", &RunConfig::test_fraction},
    {"qber_abort_threshold", &RunConfig::qber_abort_threshold},
    {"seed", &RunConfig::seed},
    {"security_margin_bits", &RunConfig::security_margin_bits},
    {"preshared_auth_bits", &RunConfig::preshared_auth_bits},
    {"channel.distance_km", &RunConfig::channel_distance_km},
    {"channel.attenuation_db_per_km", &RunConfig::channel_attenuation_db_per_km},
    {"channel.misalignment_prob", &RunConfig::channel_misalignment_prob},
    {"detector.efficiency", &RunConfig::detector_efficiency},
    {"detector.dark_count_prob", &RunConfig::detector_dark_count_prob},
    {"detector.double_click_policy", &RunConfig::detector_double_click_policy},
    {"source.signal_mu", &RunConfig::source_signal_mu},
    {"source.decoy_mu", &RunConfig::source_decoy_mu},
    {"source.p_signal", &RunConfig::source_p_signal},
    {"source.p_decoy", &RunConfig::source_p_decoy},
    {"source.p_vacuum", &RunConfig::source_p_vacuum},
    {"attack.kind", &RunConfig::attack_kind},
    {"attack.fraction", &RunConfig::attack_fraction},
    {"attack.target_gain", &RunConfig::attack_target_gain},
    {"sweep.distance_min_km", &RunConfig::sweep_distance_min_km},
    {"sweep.distance_max_km", &RunConfig::sweep_distance_max_km},
    {"sweep.distance_step_km", &RunConfig::sweep_distance_step_km},
    {"sweep.attenuation_db_per_km", &RunConfig::sweep_attenuation_db_per_km},
    {"sweep.detector_efficiency", &RunConfig::sweep_detector_efficiency},
    {"sweep.y0", &RunConfig::sweep_y0},
    {"sweep.e_d", &RunConfig::sweep_e_d},
    {"sweep.f_ec", &RunConfig::sweep_f_ec},
    {"sweep.q", &RunConfig::sweep_q},
    {"sweep.decoy_nu_fraction", &RunConfig::sweep_decoy_nu_fraction},
    {"sweep.report_mode", &RunConfig::sweep_report_mode},
};

const Field* find_field(const std::string& key) {
    for (const auto& f : kFields)
        if (key == f.key) return &f;
    return nullptr;
}

void assign_json(RunConfig& c, const Field& f, const nlohmann::json& v) {
    if (std::holds_alternative<double RunConfig::*>(f.ptr)) {
        if (!v.is_number())
            throw ConfigError(std::string("config: key '") + f.key + "' expects a number");
        c.*std::get<double RunConfig::*>(f.ptr) = v.get<double>();
    } else if (std::holds_alternative<std::uint64_t RunConfig::*>(f.ptr)) {
        if (!v.is_number_unsigned())
            throw ConfigError(std::string("config: key '") + f.key +
                              "' expects a non-negative integer");
        c.*std::get<std::uint64_t RunConfig::*>(f.ptr) = v.get<std::uint64_t>();
    } else {
        if (!v.is_string())
            throw ConfigError(std::string("config: key '") + f.key + "' expects a string");
        c.*std::get<std::string RunConfig::*>(f.ptr) = v.get<std::string>();
    }
}

} // namespace

void RunConfig::apply_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        const Field* f = find_field(key);
        if (!f) throw ConfigError("config: unknown key '" + key + "'");
        assign_json(*this, *f, value);
        if (key == "seed") seed_set = true;
    }
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    apply_json(j);
}

void RunConfig::set_key(const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("config: unknown key '" + key + "'");
    try {
        if (std::holds_alternative<double RunConfig::*>(f->ptr)) {
            std::size_t used = 0;
            double d = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("");
            *this.*std::get<double RunConfig::*>(f->ptr) = d;
        } else if (std::holds_alternative<std::uint64_t RunConfig::*>(f->ptr)) {
            std::size_t used = 0;
            unsigned long long u = std::stoull(value, &used);
            if (used != value.size()) throw std::invalid_argument("");
            *this.*std::get<std::uint64_t RunConfig::*>(f->ptr) = u;
        } else {
            *this.*std::get<std::string RunConfig::*>(f->ptr) = value;
        }
    } catch (const std::logic_error&) {
        throw ConfigError("config: key '" + key + "' cannot parse value '" + value + "'");
    }
    if (key == "seed") seed_set = true;
}

nlohmann::json RunConfig::dump() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : kFields) {
        if (std::string_view(f.key) == "seed" && !seed_set) continue;
        if (std::holds_alternative<double RunConfig::*>(f.ptr))
            j[f.key] = *this.*std::get<double RunConfig::*>(f.ptr);
        else if (std::holds_alternative<std::uint64_t RunConfig::*>(f.ptr))
            j[f.key] = *this.*std::get<std::uint64_t RunConfig::*>(f.ptr);
        else
            j[f.key] = *this.*std::get<std::string RunConfig::*>(f.ptr);
    }
    return j;
}

qkd::protocol::SessionParams RunConfig::session_params() const {
    if (!seed_set) throw ConfigError("config: 'seed' is required (set it or pass --seed)");
    qkd::protocol::SessionParams p;
    p.n_pulses = n_pulses;
    p.test_fraction = test_fraction;
    p.qber_abort_threshold = qber_abort_threshold;
    p.seed = seed;
    p.security_margin_bits = static_cast<std::uint32_t>(security_margin_bits);
    p.preshared_auth_bits = preshared_auth_bits;
    p.channel.distance_km = channel_distance_km;
    p.channel.attenuation_db_per_km = channel_attenuation_db_per_km;
    p.channel.misalignment_prob = channel_misalignment_prob;
    p.detector.efficiency = detector_efficiency;
    p.detector.dark_count_prob = detector_dark_count_prob;
    if (detector_double_click_policy == "random_bit")
        p.detector.double_click_policy = qkd::photonics::DoubleClickPolicy::random_bit;
    else if (detector_double_click_policy == "discard")
        p.detector.double_click_policy = qkd::photonics::DoubleClickPolicy::discard;
    else
        throw ConfigError("config: key 'detector.double_click_policy' must be "
                          "'random_bit' or 'discard'");
    if (source_p_decoy > 0.0 || source_p_vacuum > 0.0) {
        p.source = qkd::photonics::SourceConfig::with_decoys(
            source_signal_mu, source_decoy_mu, source_p_signal, source_p_decoy, source_p_vacuum);
    } else {
        p.source = qkd::photonics::SourceConfig::single(source_signal_mu);
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return p;
}

qkd::adversary::AttackStrategy RunConfig::attack() const {
    auto kind = qkd::adversary::attack_kind_from_string(attack_kind);
    if (!kind)
        throw ConfigError("config: key 'attack.kind' must be one of passive, "
                          "intercept-resend, pns, beam-splitter");
    qkd::adversary::AttackStrategy s;
    s.kind = *kind;
    s.fraction = attack_fraction;
    if (attack_target_gain > 0.0) s.target_gain = attack_target_gain;
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return s;
}

qkd::keyrate::SweepSpec RunConfig::sweep_spec() const {
    qkd::keyrate::SweepSpec spec;
    spec.distance_min_km = sweep_distance_min_km;
    spec.distance_max_km = sweep_distance_max_km;
    spec.distance_step_km = sweep_distance_step_km;
    spec.attenuation_db_per_km = sweep_attenuation_db_per_km;
    spec.detector_efficiency = sweep_detector_efficiency;
    spec.y0 = sweep_y0;
    spec.e_d = sweep_e_d;
    spec.f_ec = sweep_f_ec;
    spec.q = sweep_q;
    spec.decoy_nu_fraction = sweep_decoy_nu_fraction;
    auto mode = qkd::keyrate::rate_mode_from_string(sweep_report_mode);
    if (!mode)
        throw ConfigError("config: key 'sweep.report_mode' must be one of "
                          "nondecoy, decoy-ideal, decoy-two");
    spec.report_mode = *mode;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return spec;
}

} // namespace qkdsim
