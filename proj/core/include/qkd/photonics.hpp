#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qkd/rng.hpp"

namespace qkd::photonics {

enum class Basis : std::uint8_t { rectilinear = 0, diagonal = 1 };

// Bit convention, fixed for the whole pipeline: horizontal and 45 degrees
// encode 0, vertical and 135 degrees encode 1.
enum class Polarization : std::uint8_t { horizontal = 0, vertical = 1, diag45 = 2, diag135 = 3 };

Polarization polarization_from(Basis basis, std::uint8_t bit);
Basis basis_of(Polarization pol);
std::uint8_t bit_of(Polarization pol);

enum class DoubleClickPolicy : std::uint8_t { random_bit, discard };

// Weak coherent pulse source: a set of labelled mean photon numbers and the
// probability of picking each label per pulse. Key material only ever comes
// from the "signal" label; other labels exist for channel estimation.
struct SourceConfig {
    std::map<std::string, double> intensities;
    std::map<std::string, double> selection_probabilities;

    void validate() const;  // throws std::invalid_argument
    double signal_mu() const;

    static SourceConfig single(double mu);
    static SourceConfig with_decoys(double signal_mu, double decoy_mu,
                                    double p_signal, double p_decoy, double p_vacuum);
};

struct ChannelConfig {
    double distance_km = 0.0;
    double attenuation_db_per_km = 0.2;
    double misalignment_prob = 0.0;  // independent bit flip on matched-basis detections

    void validate() const;
    double transmittance() const;  // 10^(-attenuation * distance / 10)
};

struct DetectorConfig {
    double efficiency = 1.0;        // in (0, 1]
    double dark_count_prob = 0.0;   // per-pulse dark count probability, in [0, 1)
    DoubleClickPolicy double_click_policy = DoubleClickPolicy::random_bit;

    void validate() const;
};

double total_transmittance(const ChannelConfig& channel, const DetectorConfig& detector);

// e^-mu mu^n / n!, evaluated in log space so large n does not overflow
double poisson_pmf(double mu, std::uint32_t n);

inline std::uint32_t sample_photon_number(double mu, Rng& rng) { return rng.poisson(mu); }

struct Pulse {
    std::uint64_t index = 0;
    std::uint32_t photon_count = 0;
    Basis basis = Basis::rectilinear;
    std::uint8_t bit = 0;
    std::uint8_t label = 0;  // index into the emitting train's label table
};

struct DetectionRecord {
    std::uint64_t index = 0;
    bool detected = false;
    bool double_click = false;
    Basis basis = Basis::rectilinear;  // Bob's measurement basis
    std::uint8_t bit = 0;              // outcome, meaningful only when detected
};

// Threshold detector behind a lossy line: each photon survives independently
// with probability arrival_prob, a dark count fires with dark_count_prob, and
// the detector clicks iff anything arrives. Surviving matched-basis photons
// all strike the detector selected by the (possibly flipped) pulse bit;
// conjugate-basis photons pick a detector uniformly, so two of them can
// produce a double click, as can a dark count next to a signal.
DetectionRecord detect_at_arrival(const Pulse& pulse, Basis bob_basis, double arrival_prob,
                                  double misalignment_prob, const DetectorConfig& detector,
                                  Rng& rng);

DetectionRecord detect(const Pulse& pulse, Basis bob_basis, const ChannelConfig& channel,
                       const DetectorConfig& detector, Rng& rng);

} // namespace qkd::photonics
