#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkd/adversary.hpp"
#include "qkd/bits.hpp"
#include "qkd/keyrate.hpp"
#include "qkd/photonics.hpp"

namespace qkd::protocol {

struct SessionParams {
    std::uint64_t n_pulses = 0;
    double test_fraction = 0.25;        // per-position test sampling probability
    double qber_abort_threshold = 0.11;
    photonics::SourceConfig source;
    photonics::ChannelConfig channel;
    photonics::DetectorConfig detector;
    std::uint64_t seed = 0;

    std::uint32_t security_margin_bits = 100;
    std::uint64_t preshared_auth_bits = 4096;

    void validate() const;
};

// Alice-side truth for one emitted pulse
struct SignalRecord {
    photonics::Basis basis = photonics::Basis::rectilinear;
    std::uint8_t bit = 0;
    std::uint8_t label = 0;
};

struct SiftedKeyPair {
    std::vector<std::uint64_t> positions;  // pulse indices, ascending
    Bits alice_bits;
    Bits bob_bits;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> label_names;  // label id -> name
};

// detected positions with matching bases, order preserved
SiftedKeyPair sift(const std::vector<SignalRecord>& alice,
                   const std::vector<photonics::DetectionRecord>& bob,
                   const std::vector<std::string>& label_names);

struct QberEstimate {
    std::uint64_t tested = 0;
    std::uint64_t errors = 0;
    std::optional<double> qber;  // empty when tested == 0
};

struct QberReport {
    std::map<std::string, QberEstimate> per_label;
    std::vector<std::uint64_t> test_indices;  // indices into the sifted arrays
};

// i.i.d. per-position test selection with probability p from rng (Alice's coins)
QberReport estimate_qber(const SiftedKeyPair& pair, double p, Rng& rng);

enum class AbortReason { qber_above_threshold, reconciliation_failed, auth_budget_exhausted };

std::string to_string(AbortReason r);

struct LeakageLedger {
    std::uint64_t ec_bits_leaked = 0;
    std::uint64_t pa_output_length = 0;
    std::uint64_t auth_bits_consumed = 0;
    std::uint64_t test_bits_revealed = 0;
};

struct Message {
    enum class Dir { alice_to_bob, bob_to_alice };
    Dir dir;
    std::string kind;
    std::vector<std::uint8_t> payload;
};

struct SessionTranscript {
    SessionParams params;
    adversary::AttackStrategy attack;

    enum class Outcome { completed, aborted };
    Outcome outcome = Outcome::completed;
    std::optional<AbortReason> abort_reason;

    std::uint64_t detected_count = 0;
    std::uint64_t sifted_length = 0;         // all intensity labels
    std::uint64_t signal_sifted_length = 0;  // signal label only
    std::uint64_t reconciled_length = 0;     // signal sifted bits left after testing

    std::map<std::string, QberEstimate> qber;
    keyrate::DecoyObservations observations;
    double multiphoton_fraction = 0.0;  // delta used in the length budget
    bool decoy_bounds_used = false;

    LeakageLedger ledger;
    std::uint64_t final_length = 0;
    Bits alice_final_key;
    Bits bob_final_key;

    std::optional<double> eve_information;
    std::optional<adversary::PnsPlan> pns_plan;

    std::uint64_t seed = 0;

    // retained for inspection; summaries only in to_json
    std::vector<SignalRecord> alice_records;
    std::vector<std::uint64_t> sifted_positions;
    std::vector<std::uint64_t> test_positions;  // pulse indices revealed for testing
    std::vector<std::uint64_t> key_positions;   // pulse indices feeding the key
    std::vector<Message> messages;

    nlohmann::json to_json() const;
};

SessionTranscript run_session(const SessionParams& params, const adversary::AttackStrategy& attack);

} // namespace qkd::protocol
