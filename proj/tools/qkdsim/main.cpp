#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qkd/bits.hpp"
#include "qkd/postprocessing.hpp"
#include "run_config.hpp"

namespace {

using qkdsim::ConfigError;
using qkdsim::RunConfig;

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + out_path + "'");
    out << text;
}

// shared option plumbing: config file first, then --set pairs, then the
// named flags, so the most specific spelling wins
struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_path;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file with flat dotted keys");
        cmd->add_option("--set", sets, "override one config key, KEY=VALUE")
            ->type_name("KEY=VALUE");
        cmd->add_option("--out", out_path, "write output to this file instead of stdout");
    }

    RunConfig build() const {
        RunConfig c;
        if (!config_path.empty()) c.load_file(config_path);
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            c.set_key(kv.substr(0, eq), kv.substr(eq + 1));
        }
        return c;
    }
};

std::string method_name(qkd::keyrate::YieldBounds::Method m) {
    switch (m) {
        case qkd::keyrate::YieldBounds::Method::two_intensity_analytic:
            return "two-intensity-analytic";
        case qkd::keyrate::YieldBounds::Method::lp_oracle: return "lp-oracle";
        case qkd::keyrate::YieldBounds::Method::infinite_decoy_ideal:
            return "infinite-decoy-ideal";
    }
    return "two-intensity-analytic";
}

nlohmann::json bounds_json(const qkd::keyrate::YieldBounds& b) {
    return {{"y1_lower", b.y1_lower},
            {"e1_upper", b.e1_upper},
            {"method", method_name(b.method)},
            {"vacuous", b.vacuous},
            {"suppression", b.suppression}};
}

qkd::keyrate::DecoyObservations load_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open observations file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("observations: not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object() || !j.contains("observations"))
        throw ConfigError("observations: expected top-level object with key 'observations'");
    const auto& arr = j["observations"];
    if (!arr.is_array() || arr.empty())
        throw ConfigError("observations: 'observations' must be a non-empty array");

    qkd::keyrate::DecoyObservations obs;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& o = arr[i];
        std::string where = "observations[" + std::to_string(i) + "]";
        if (!o.is_object()) throw ConfigError(where + " must be an object");
        qkd::keyrate::IntensityObservation rec;
        auto need_number = [&](const char* field) {
            if (!o.contains(field) || !o[field].is_number())
                throw ConfigError(where + "." + field + " must be a number");
            return o[field].get<double>();
        };
        if (!o.contains("label") || !o["label"].is_string())
            throw ConfigError(where + ".label must be a string");
        rec.label = o["label"].get<std::string>();
        rec.mu = need_number("mu");
        rec.gain = need_number("gain");
        rec.qber = need_number("qber");
        for (const auto& [key, value] : o.items()) {
            (void)value;
            if (key != "label" && key != "mu" && key != "gain" && key != "qber")
                throw ConfigError(where + "." + key + " is not a recognized field");
        }
        obs.push_back(std::move(rec));
    }
    return obs;
}

int cmd_simulate(const CommonOpts& common, bool dump_config) {
    RunConfig c = common.build();
    if (dump_config) {
        emit(c.dump().dump(2) + "\n", common.out_path);
        return 0;
    }
    auto transcript = qkd::protocol::run_session(c.session_params(), c.attack());
    emit(transcript.to_json().dump(2) + "\n", common.out_path);
    return 0;
}

int cmd_sweep(const CommonOpts& common, bool dump_config) {
    RunConfig c = common.build();
    if (dump_config) {
        emit(c.dump().dump(2) + "\n", common.out_path);
        return 0;
    }
    auto result = qkd::keyrate::sweep_rates(c.sweep_spec());
    emit(qkd::keyrate::sweep_to_csv(result), common.out_path);
    auto note = [](const char* name, const std::optional<double>& d) {
        if (d)
            std::cerr << name << " cutoff at " << *d << " km\n";
        else
            std::cerr << name << " rate positive over the whole grid\n";
    };
    note("nondecoy", result.cutoff_nondecoy_km);
    note("decoy-ideal", result.cutoff_decoy_ideal_km);
    note("decoy-two", result.cutoff_decoy_two_km);
    return 0;
}

int cmd_optimize_mu(const CommonOpts& common, std::optional<double> eta,
                    std::optional<double> distance_km, bool printed_variant) {
    RunConfig c = common.build();
    double eta_value;
    if (eta) {
        eta_value = *eta;
    } else if (distance_km) {
        eta_value = c.detector_efficiency *
                    std::pow(10.0, -c.channel_attenuation_db_per_km * *distance_km / 10.0);
    } else {
        throw ConfigError("optimize-mu needs --eta or --distance-km");
    }
    if (!(eta_value > 0.0) || eta_value > 1.0)
        throw ConfigError("optimize-mu: eta must lie in (0, 1]");
    auto opt = qkd::keyrate::optimize_mu(eta_value, printed_variant);
    nlohmann::json j = {{"eta", eta_value},
                        {"mu_opt", opt.mu},
                        {"rate", opt.rate},
                        {"printed_variant", printed_variant}};
    emit(j.dump(2) + "\n", common.out_path);
    return 0;
}

int cmd_decoy_estimate(const CommonOpts& common, const std::string& obs_path,
                       const std::string& method) {
    auto obs = load_observations(obs_path);
    qkd::keyrate::YieldBounds::Method m;
    if (method == "analytic")
        m = qkd::keyrate::YieldBounds::Method::two_intensity_analytic;
    else if (method == "lp")
        m = qkd::keyrate::YieldBounds::Method::lp_oracle;
    else
        throw ConfigError("--method must be 'analytic' or 'lp'");
    qkd::keyrate::YieldBounds bounds;
    try {
        bounds = qkd::keyrate::decoy_bounds(obs, m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("observations: ") + e.what());
    }
    emit(bounds_json(bounds).dump(2) + "\n", common.out_path);
    return 0;
}

int cmd_demo_otp_reuse(const CommonOpts& common, const std::string& m1s,
                       const std::string& m2s, const std::string& keys) {
    qkd::Bits m1, m2, key;
    try {
        m1 = qkd::bits_from_string(m1s);
        m2 = qkd::bits_from_string(m2s);
        key = qkd::bits_from_string(keys);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("demo-otp-reuse: ") + e.what());
    }
    if (m1.size() != m2.size() || m1.size() != key.size())
        throw ConfigError("demo-otp-reuse: all three bit strings must have equal length");

    auto c1 = qkd::postprocessing::otp_encrypt(m1, key);
    auto c2 = qkd::postprocessing::otp_encrypt(m2, key);
    auto leak = qkd::postprocessing::key_reuse_leak(c1, c2);
    auto truth = qkd::xor_bits(m1, m2);

    nlohmann::json j = {{"m1", qkd::bits_to_string(m1)},
                        {"m2", qkd::bits_to_string(m2)},
                        {"key", qkd::bits_to_string(key)},
                        {"c1", qkd::bits_to_string(c1)},
                        {"c2", qkd::bits_to_string(c2)},
                        {"parity_leak", qkd::bits_to_string(leak)},
                        {"m1_xor_m2", qkd::bits_to_string(truth)},
                        {"identity_holds", leak == truth}};
    emit(j.dump(2) + "\n", common.out_path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"BB84 weak-coherent-pulse QKD simulator and key-rate toolkit"};
    app.require_subcommand(1);

    CommonOpts sim_opts;
    bool sim_dump = false;
    std::optional<std::uint64_t> sim_seed;
    std::optional<std::string> sim_attack;
    std::optional<double> sim_distance, sim_mu;
    auto* sim = app.add_subcommand("simulate", "run one protocol session, report JSON");
    sim_opts.attach(sim);
    sim->add_option("--seed", sim_seed, "session master seed");
    sim->add_option("--attack", sim_attack,
                    "eavesdropper: passive, intercept-resend, pns, beam-splitter");
    sim->add_option("--distance-km", sim_distance, "fiber length");
    sim->add_option("--mu", sim_mu, "signal mean photon number");
    sim->add_flag("--dump-config", sim_dump, "print the effective config and exit");

    CommonOpts sweep_opts;
    bool sweep_dump = false;
    std::optional<std::string> sweep_mode;
    auto* sweep = app.add_subcommand("sweep", "rate-vs-distance table, CSV");
    sweep_opts.attach(sweep);
    sweep->add_option("--mode", sweep_mode, "which mode fills mu_opt/Q/E: "
                                            "nondecoy, decoy-ideal, decoy-two");
    sweep->add_flag("--dump-config", sweep_dump, "print the effective config and exit");

    CommonOpts opt_opts;
    std::optional<double> opt_eta, opt_distance;
    bool opt_printed = false;
    auto* opt = app.add_subcommand("optimize-mu", "optimal mean photon number for a channel");
    opt_opts.attach(opt);
    opt->add_option("--eta", opt_eta, "total transmittance");
    opt->add_option("--distance-km", opt_distance,
                    "fiber length (transmittance from config attenuation and efficiency)");
    opt->add_flag("--printed-variant", opt_printed,
                  "use the 1 - mu*eta*exp(-mu*eta) received-probability variant");

    CommonOpts decoy_opts;
    std::string obs_path;
    std::string method = "analytic";
    auto* decoy = app.add_subcommand("decoy-estimate", "single-photon yield/error bounds "
                                                       "from observed gains");
    decoy_opts.attach(decoy);
    decoy->add_option("observations", obs_path, "JSON observations file")->required();
    decoy->add_option("--method", method, "analytic (closed form) or lp (feasibility oracle)");

    CommonOpts otp_opts;
    std::string otp_m1, otp_m2, otp_key;
    auto* otp = app.add_subcommand("demo-otp-reuse", "what pad reuse leaks: c1 xor c2");
    otp_opts.attach(otp);
    otp->add_option("m1", otp_m1, "first message, bit string")->required();
    otp->add_option("m2", otp_m2, "second message, bit string")->required();
    otp->add_option("key", otp_key, "shared pad, bit string")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            if (sim_seed) {
                sim_opts.sets.push_back("seed=" + std::to_string(*sim_seed));
            }
            if (sim_attack) sim_opts.sets.push_back("attack.kind=" + *sim_attack);
            if (sim_distance)
                sim_opts.sets.push_back("channel.distance_km=" + fmt_double(*sim_distance));
            if (sim_mu) sim_opts.sets.push_back("source.signal_mu=" + fmt_double(*sim_mu));
            return cmd_simulate(sim_opts, sim_dump);
        }
        if (sweep->parsed()) {
            if (sweep_mode) sweep_opts.sets.push_back("sweep.report_mode=" + *sweep_mode);
            return cmd_sweep(sweep_opts, sweep_dump);
        }
        if (opt->parsed()) return cmd_optimize_mu(opt_opts, opt_eta, opt_distance, opt_printed);
        if (decoy->parsed()) return cmd_decoy_estimate(decoy_opts, obs_path, method);
        if (otp->parsed()) return cmd_demo_otp_reuse(otp_opts, otp_m1, otp_m2, otp_key);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
