#include "qkd/photonics.hpp"

#include <cmath>
#include <stdexcept>

namespace qkd::photonics {

Polarization polarization_from(Basis basis, std::uint8_t bit) {
    if (basis == Basis::rectilinear)
        return bit ? Polarization::vertical : Polarization::horizontal;
    return bit ? Polarization::diag135 : Polarization::diag45;
}

Basis basis_of(Polarization pol) {
    return (pol == Polarization::horizontal || pol == Polarization::vertical)
               ? Basis::rectilinear
               : Basis::diagonal;
}

std::uint8_t bit_of(Polarization pol) {
    return (pol == Polarization::vertical || pol == Polarization::diag135) ? 1 : 0;
}

void SourceConfig::validate() const {
    if (intensities.empty())
        throw std::invalid_argument("source: no intensities configured");
    if (intensities.count("signal") == 0)
        throw std::invalid_argument("source: a \"signal\" intensity is required");
    double psum = 0.0;
    for (const auto& [label, mu] : intensities) {
        if (!(mu >= 0.0) || !std::isfinite(mu))
            throw std::invalid_argument("source: intensity \"" + label + "\" must be non-negative");
        auto it = selection_probabilities.find(label);
        if (it == selection_probabilities.end())
            throw std::invalid_argument("source: no selection probability for \"" + label + "\"");
        if (!(it->second >= 0.0) || it->second > 1.0)
            throw std::invalid_argument("source: selection probability for \"" + label +
                                        "\" outside [0,1]");
        psum += it->second;
    }
    if (selection_probabilities.size() != intensities.size())
        throw std::invalid_argument("source: selection probability without a matching intensity");
    if (std::abs(psum - 1.0) > 1e-12)
        throw std::invalid_argument("source: selection probabilities must sum to 1");
}

double SourceConfig::signal_mu() const {
    auto it = intensities.find("signal");
    if (it == intensities.end())
        throw std::logic_error("source: signal intensity missing");
    return it->second;
}

SourceConfig SourceConfig::single(double mu) {
    SourceConfig c;
    c.intensities["signal"] = mu;
    c.selection_probabilities["signal"] = 1.0;
    return c;
}

SourceConfig SourceConfig::with_decoys(double signal_mu, double decoy_mu, double p_signal,
                                       double p_decoy, double p_vacuum) {
    SourceConfig c;
    c.intensities["signal"] = signal_mu;
    c.intensities["decoy"] = decoy_mu;
    c.intensities["vacuum"] = 0.0;
    c.selection_probabilities["signal"] = p_signal;
    c.selection_probabilities["decoy"] = p_decoy;
    c.selection_probabilities["vacuum"] = p_vacuum;
    return c;
}

void ChannelConfig::validate() const {
    if (!(distance_km >= 0.0) || !std::isfinite(distance_km))
        throw std::invalid_argument("channel: distance_km must be non-negative");
    if (!(attenuation_db_per_km >= 0.0) || !std::isfinite(attenuation_db_per_km))
        throw std::invalid_argument("channel: attenuation_db_per_km must be non-negative");
    if (!(misalignment_prob >= 0.0) || misalignment_prob > 0.5)
        throw std::invalid_argument("channel: misalignment_prob outside [0, 0.5]");
}

double ChannelConfig::transmittance() const {
    return std::pow(10.0, -attenuation_db_per_km * distance_km / 10.0);
}

void DetectorConfig::validate() const {
    if (!(efficiency > 0.0) || efficiency > 1.0)
        throw std::invalid_argument("detector: efficiency outside (0, 1]");
    if (!(dark_count_prob >= 0.0) || dark_count_prob >= 1.0)
        throw std::invalid_argument("detector: dark_count_prob outside [0, 1)");
}

double total_transmittance(const ChannelConfig& channel, const DetectorConfig& detector) {
    return channel.transmittance() * detector.efficiency;
}

double poisson_pmf(double mu, std::uint32_t n) {
    if (mu < 0.0 || !std::isfinite(mu))
        throw std::invalid_argument("poisson_pmf: mean must be non-negative");
    if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
    double logp = -mu + n * std::log(mu) - std::lgamma(static_cast<double>(n) + 1.0);
    return std::exp(logp);
}

DetectionRecord detect_at_arrival(const Pulse& pulse, Basis bob_basis, double arrival_prob,
                                  double misalignment_prob, const DetectorConfig& detector,
                                  Rng& rng) {
    DetectionRecord rec;
    rec.index = pulse.index;
    rec.basis = bob_basis;

    std::uint32_t arrived = 0;
    for (std::uint32_t i = 0; i < pulse.photon_count; ++i)
        if (rng.bernoulli(arrival_prob)) ++arrived;
    bool dark = rng.bernoulli(detector.dark_count_prob);

    bool hit[2] = {false, false};
    if (arrived > 0) {
        if (bob_basis == pulse.basis) {
            // all surviving photons share one polarization; one flip per event
            std::uint8_t b = pulse.bit;
            if (rng.bernoulli(misalignment_prob)) b ^= 1;
            hit[b] = true;
        } else {
            for (std::uint32_t i = 0; i < arrived; ++i) hit[rng.bit()] = true;
        }
    }
    if (dark) hit[rng.bit()] = true;

    if (!hit[0] && !hit[1]) return rec;

    if (hit[0] && hit[1]) {
        rec.double_click = true;
        if (detector.double_click_policy == DoubleClickPolicy::discard) return rec;
        rec.detected = true;
        rec.bit = rng.bit();
        return rec;
    }
    rec.detected = true;
    rec.bit = hit[1] ? 1 : 0;
    return rec;
}

DetectionRecord detect(const Pulse& pulse, Basis bob_basis, const ChannelConfig& channel,
                       const DetectorConfig& detector, Rng& rng) {
    double arrival = channel.transmittance() * detector.efficiency;
    return detect_at_arrival(pulse, bob_basis, arrival, channel.misalignment_prob, detector, rng);
}

} // namespace qkd::photonics
