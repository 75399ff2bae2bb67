#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkd/adversary.hpp"
#include "qkd/keyrate.hpp"
#include "qkd/protocol.hpp"

namespace qkdsim {

// thrown for anything the user can fix: bad flags, bad config values,
// malformed input files; maps to exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Effective run configuration. Every field has a flat dotted key; a JSON
// config file, --set pairs and the named flags all write the same table.
struct RunConfig {
    std::uint64_t n_pulses = 1000000;
    double test_fraction = 0.25;
    double qber_abort_threshold = 0.11;
    std::uint64_t seed = 0;
    bool seed_set = false;  // seed has no default; refuses to run without one
    std::uint64_t security_margin_bits = 100;
    std::uint64_t preshared_auth_bits = 4096;

    double channel_distance_km = 20.0;
    double channel_attenuation_db_per_km = 0.2;
    double channel_misalignment_prob = 0.01;

    double detector_efficiency = 0.1;
    double detector_dark_count_prob = 1e-5;
    std::string detector_double_click_policy = "random_bit";

    double source_signal_mu = 0.1;
    double source_decoy_mu = 0.05;
    double source_p_signal = 1.0;
    double source_p_decoy = 0.0;
    double source_p_vacuum = 0.0;

    std::string attack_kind = "passive";
    double attack_fraction = 1.0;
    double attack_target_gain = 0.0;  // 0 means match the benign gain

    double sweep_distance_min_km = 0.0;
    double sweep_distance_max_km = 100.0;
    double sweep_distance_step_km = 1.0;
    double sweep_attenuation_db_per_km = 0.21;
    double sweep_detector_efficiency = 0.1;
    double sweep_y0 = 1e-5;
    double sweep_e_d = 0.01;
    double sweep_f_ec = 1.22;
    double sweep_q = 0.5;
    double sweep_decoy_nu_fraction = 0.2;
    std::string sweep_report_mode = "nondecoy";

    void load_file(const std::string& path);
    void apply_json(const nlohmann::json& j);           // flat object, dotted keys
    void set_key(const std::string& key, const std::string& value);
    nlohmann::json dump() const;

    qkd::protocol::SessionParams session_params() const;
    qkd::adversary::AttackStrategy attack() const;
    qkd::keyrate::SweepSpec sweep_spec() const;
};

} // namespace qkdsim
