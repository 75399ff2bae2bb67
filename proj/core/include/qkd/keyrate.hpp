#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qkd::keyrate {

// fraction of non-empty pulses carrying more than one photon: 1 - (1+mu) e^-mu
double p_multi(double mu);

// receipt probability of the standard model: 1 - e^(-mu eta)
double p_rec(double mu, double eta);

// variant kept around for comparison only; see approx_rate
double p_rec_printed_variant(double mu, double eta);

// G = p_rec - p_multi. Negative means multi-photon pulses outnumber received
// ones and the regime supports no key under photon-number splitting.
double approx_rate(double mu, double eta, bool printed_prec_variant = false);

struct MuOpt {
    double mu = 0.0;
    double rate = 0.0;
};
MuOpt optimize_mu(double eta, bool printed_prec_variant = false);

// generic bracketed 1-D maximizer (coarse scan + golden-section refinement);
// exposed so callers can optimize their own rate functions the same way
double maximize_scalar(const std::function<double(double)>& f, double lo, double hi,
                       int scan_points = 512, int refine_iters = 120);

double binary_entropy(double x);       // H2, defined on [0,1], 0 at the endpoints
double single_photon_rate(double e);   // 1 - 2 H2(e)
double single_photon_error_threshold();  // root of 1 - 2 H2(e), about 0.110

struct RateModelParams {
    double mu = 0.1;
    double eta = 0.1;     // total transmittance: line times detector
    double y0 = 0.0;      // dark count probability per pulse
    double e_d = 0.0;     // misalignment error probability
    double f_ec = 1.22;   // error-correction inefficiency
    double q = 0.5;       // sifting factor; set to 1 for scaling checks

    void validate() const;
};

struct GainQber {
    double gain = 0.0;
    double qber = 0.0;
    bool qber_defined = false;  // false iff gain is exactly zero
};

// Q = 1 - (1-Y0) e^(-eta mu);  E Q = Y0/2 + e_d (1 - e^(-eta mu))
GainQber model_gain_qber(const RateModelParams& p);

struct IntensityObservation {
    std::string label;
    double mu = 0.0;
    double gain = 0.0;   // detections / pulses sent at this intensity
    double qber = 0.0;
    std::uint64_t sent = 0;
    std::uint64_t detected = 0;
    std::uint64_t tested = 0;
};
using DecoyObservations = std::vector<IntensityObservation>;

struct YieldBounds {
    enum class Method { two_intensity_analytic, lp_oracle, infinite_decoy_ideal };

    double y1_lower = 0.0;
    double e1_upper = 0.5;
    Method method = Method::two_intensity_analytic;
    bool vacuous = false;      // a bound clamped at its trivial value
    bool suppression = false;  // single-photon yield far below what the weak decoy implies
};

// Requires a vacuum intensity (mu == 0), one weak decoy nu and a signal mu
// with 0 < nu < mu; throws std::invalid_argument otherwise. The lp_oracle
// method replaces the analytic Y1 bound with an exhaustive feasibility search
// over per-photon-number yields and exists as an independent cross-check.
YieldBounds decoy_bounds(const DecoyObservations& obs,
                         YieldBounds::Method method = YieldBounds::Method::two_intensity_analytic);

// infinite-decoy limit: Y1 and e1 recovered exactly from the channel model
YieldBounds ideal_yield_bounds(const RateModelParams& p);

// noiseless benign-channel observations (vacuum, weak decoy nu, signal) drawn
// straight from the gain/QBER model; the estimation path's test fixture
DecoyObservations model_observations(const RateModelParams& signal_params, double nu);

// GLLP rate. Without bounds, multi-photon pulses are charged worst case
// (Q1 = Q - p_multi, all errors on single photons); with bounds, Q1 and e1
// come from the decoy estimate. Clamped at zero.
double gllp_rate(const RateModelParams& p, const std::optional<YieldBounds>& bounds = std::nullopt);

enum class RateMode { nondecoy, decoy_ideal, decoy_two };

std::string to_string(RateMode m);
std::optional<RateMode> rate_mode_from_string(const std::string& s);

struct SweepSpec {
    double distance_min_km = 0.0;
    double distance_max_km = 100.0;
    double distance_step_km = 1.0;
    double attenuation_db_per_km = 0.21;
    double detector_efficiency = 0.1;
    double y0 = 1e-5;
    double e_d = 0.01;
    double f_ec = 1.22;
    double q = 0.5;
    double decoy_nu_fraction = 0.2;  // weak decoy at nu = fraction * mu
    RateMode report_mode = RateMode::nondecoy;  // which mode fills mu_opt / Q / E

    void validate() const;
};

struct SweepRow {
    double distance_km = 0.0;
    double eta = 0.0;
    double mu_opt = 0.0;
    double gain = 0.0;
    double qber = 0.0;
    double r_nondecoy = 0.0;
    double r_decoy_ideal = 0.0;
    double r_decoy_two = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    // first grid distance where the mode's optimized rate hits zero
    std::optional<double> cutoff_nondecoy_km;
    std::optional<double> cutoff_decoy_ideal_km;
    std::optional<double> cutoff_decoy_two_km;
};

SweepResult sweep_rates(const SweepSpec& spec);

// header + one line per row; columns are part of the external interface:
// distance_km,eta,mu_opt,Q,E,R_nondecoy,R_decoy_ideal,R_decoy_two
std::string sweep_to_csv(const SweepResult& result);

} // namespace qkd::keyrate
