#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qkd/photonics.hpp"
#include "qkd/rng.hpp"

namespace qkd::protocol {
struct SessionTranscript;
}

namespace qkd::adversary {

struct AttackStrategy {
    enum class Kind { passive, intercept_resend, pns, beam_splitter };

    Kind kind = Kind::passive;
    double fraction = 1.0;                   // intercept-resend only
    std::optional<double> target_gain;       // pns: gain to mimic instead of the benign one

    void validate() const;

    static AttackStrategy passive();
    static AttackStrategy intercept_resend(double fraction);
    static AttackStrategy pns(std::optional<double> target_gain = std::nullopt);
    static AttackStrategy beam_splitter();
};

std::string to_string(AttackStrategy::Kind k);
std::optional<AttackStrategy::Kind> attack_kind_from_string(const std::string& s);

struct PnsPlan {
    double blocking_probability = 0.0;
    bool excess_gain = false;  // multi-photon pulses alone already exceed the target gain
};

// Single-photon blocking probability that makes the attacked line reproduce
// the target gain. Eve forwards surviving photons losslessly, keeps one
// photon of every multi-photon pulse, and cannot touch Bob's detector or its
// dark counts, so the match is solved at the arrival-probability level where
// the dark-count term cancels. Root found by bisection over b in [0,1]; if
// even b = 1 leaves too much light the excess_gain flag is set, and if b = 0
// cannot reach the target the plan degrades to b = 0 (nothing to hide).
PnsPlan pns_blocking_probability(double mu, double eta_total, double y0, double eta_det);
PnsPlan pns_plan_for_gain(double mu, double target_gain, double y0, double eta_det);

enum class EveNoteKind : std::uint8_t { untouched, measured, stored_photon, blocked };

struct EveNote {
    EveNoteKind kind = EveNoteKind::untouched;
    photonics::Basis basis = photonics::Basis::rectilinear;  // measured only
    std::uint8_t outcome = 0;                                // measured only
};

struct EveRecord {
    AttackStrategy strategy;
    std::vector<EveNote> notes;  // one per source pulse
    PnsPlan pns_plan;            // meaningful for pns only
};

// A pulse in flight after Eve. lossless marks pulses she re-injects through
// her own perfect line, bypassing fiber loss but not Bob's detector.
struct TransitPulse {
    photonics::Pulse pulse;
    bool lossless = false;
};

std::vector<TransitPulse> apply_attack(const std::vector<photonics::Pulse>& sent,
                                       const AttackStrategy& strategy,
                                       const photonics::ChannelConfig& channel,
                                       const photonics::DetectorConfig& detector,
                                       double signal_mu,
                                       Rng& eve_rng,
                                       EveRecord& record);

// Fraction of sifted key positions whose bit Eve knows with certainty once
// bases are public: stored photons always, intercept measurements only when
// her basis matched Alice's.
double eve_information(const EveRecord& record, const protocol::SessionTranscript& transcript);

} // namespace qkd::adversary
