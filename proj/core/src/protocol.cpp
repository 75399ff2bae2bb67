#include "qkd/protocol.hpp"

#include <algorithm>
#include <stdexcept>

#include "qkd/postprocessing.hpp"

namespace qkd::protocol {

void SessionParams::validate() const {
    source.validate();
    channel.validate();
    detector.validate();
    if (!(test_fraction > 0.0) || test_fraction >= 1.0)
        throw std::invalid_argument("session: test_fraction outside (0, 1)");
    if (!(qber_abort_threshold > 0.0) || qber_abort_threshold >= 0.5)
        throw std::invalid_argument("session: qber_abort_threshold outside (0, 0.5)");
}

SiftedKeyPair sift(const std::vector<SignalRecord>& alice,
                   const std::vector<photonics::DetectionRecord>& bob,
                   const std::vector<std::string>& label_names) {
    SiftedKeyPair out;
    out.label_names = label_names;
    for (const auto& d : bob) {
        if (!d.detected) continue;
        if (d.index >= alice.size())
            throw std::invalid_argument("sift: detection index beyond the pulse train");
        const auto& a = alice[d.index];
        if (a.basis != d.basis) continue;
        out.positions.push_back(d.index);
        out.alice_bits.push_back(a.bit);
        out.bob_bits.push_back(d.bit);
        out.labels.push_back(a.label);
    }
    return out;
}

QberReport estimate_qber(const SiftedKeyPair& pair, double p, Rng& rng) {
    if (!(p >= 0.0) || p > 1.0)
        throw std::invalid_argument("estimate_qber: p outside [0, 1]");
    QberReport report;
    for (const auto& name : pair.label_names) report.per_label[name] = QberEstimate{};
    for (std::size_t j = 0; j < pair.positions.size(); ++j) {
        if (!rng.bernoulli(p)) continue;
        report.test_indices.push_back(j);
        auto& est = report.per_label[pair.label_names.at(pair.labels[j])];
        ++est.tested;
        if (pair.alice_bits[j] != pair.bob_bits[j]) ++est.errors;
    }
    for (auto& [name, est] : report.per_label) {
        if (est.tested > 0)
            est.qber = static_cast<double>(est.errors) / static_cast<double>(est.tested);
    }
    return report;
}

std::string to_string(AbortReason r) {
    switch (r) {
        case AbortReason::qber_above_threshold: return "qber_above_threshold";
        case AbortReason::reconciliation_failed: return "reconciliation_failed";
        case AbortReason::auth_budget_exhausted: return "auth_budget_exhausted";
    }
    return "qber_above_threshold";
}

namespace {

void append_u64(std::vector<std::uint8_t>& v, std::uint64_t x) {
    for (int j = 0; j < 8; ++j) v.push_back(static_cast<std::uint8_t>((x >> (8 * j)) & 0xff));
}

// transcript messages routed into the session record as reconciliation runs
struct TranscriptSink final : postprocessing::MessageSink {
    SessionTranscript& t;
    explicit TranscriptSink(SessionTranscript& tr) : t(tr) {}
    void alice_to_bob(std::string_view kind, const std::vector<std::uint8_t>& payload) override {
        t.messages.push_back({Message::Dir::alice_to_bob, std::string(kind), payload});
    }
    void bob_to_alice(std::string_view kind, const std::vector<std::uint8_t>& payload) override {
        t.messages.push_back({Message::Dir::bob_to_alice, std::string(kind), payload});
    }
};

// One MAC per direction over the whole conversation, paid from the pre-shared
// pool. Tags go on the wire after the streams they cover, so they are not
// part of their own input. Returns false when the pool cannot cover both.
bool seal_transcript(SessionTranscript& t) {
    std::vector<std::uint8_t> ab, ba;
    for (const auto& m : t.messages) {
        auto& s = (m.dir == Message::Dir::alice_to_bob) ? ab : ba;
        s.insert(s.end(), m.kind.begin(), m.kind.end());
        s.push_back(0);
        append_u64(s, m.payload.size());
        s.insert(s.end(), m.payload.begin(), m.payload.end());
    }
    Rng auth_rng(derive_seed(t.params.seed, 4));
    postprocessing::KeyStore store(random_bits(auth_rng, t.params.preshared_auth_bits));

    auto tag_a = postprocessing::authenticate(ab, store);
    if (tag_a) t.ledger.auth_bits_consumed += tag_a->bits_consumed;
    std::optional<postprocessing::AuthTag> tag_b;
    if (tag_a) {
        tag_b = postprocessing::authenticate(ba, store);
        if (tag_b) t.ledger.auth_bits_consumed += tag_b->bits_consumed;
    }
    if (!tag_a || !tag_b) return false;

    std::vector<std::uint8_t> pa, pb;
    append_u64(pa, tag_a->tag);
    append_u64(pb, tag_b->tag);
    t.messages.push_back({Message::Dir::alice_to_bob, "auth-tag", std::move(pa)});
    t.messages.push_back({Message::Dir::bob_to_alice, "auth-tag", std::move(pb)});
    return true;
}

} // namespace

SessionTranscript run_session(const SessionParams& params,
                              const adversary::AttackStrategy& attack) {
    params.validate();
    attack.validate();

    SessionTranscript t;
    t.params = params;
    t.attack = attack;
    t.seed = params.seed;

    // independent streams: a shared master seed must not let one party's
    // draws shift another's
    Rng alice_rng(derive_seed(params.seed, 0));
    Rng bob_rng(derive_seed(params.seed, 1));
    Rng eve_rng(derive_seed(params.seed, 2));
    const std::uint64_t public_base = derive_seed(params.seed, 3);

    std::vector<std::string> label_names;
    std::vector<double> label_mu, label_prob;
    for (const auto& [name, mu] : params.source.intensities) {
        label_names.push_back(name);
        label_mu.push_back(mu);
        label_prob.push_back(params.source.selection_probabilities.at(name));
    }
    std::size_t signal_id = 0;
    while (label_names[signal_id] != "signal") ++signal_id;

    if (params.n_pulses == 0) return t;

    // Alice's side: label, basis, bit, photon number, in that draw order
    t.alice_records.reserve(params.n_pulses);
    std::vector<photonics::Pulse> sent;
    sent.reserve(params.n_pulses);
    std::vector<std::uint64_t> sent_per_label(label_names.size(), 0);
    for (std::uint64_t i = 0; i < params.n_pulses; ++i) {
        double u = alice_rng.uniform01();
        auto label = static_cast<std::uint8_t>(label_names.size() - 1);
        double cum = 0.0;
        for (std::size_t k = 0; k < label_prob.size(); ++k) {
            cum += label_prob[k];
            if (u < cum) {
                label = static_cast<std::uint8_t>(k);
                break;
            }
        }
        auto basis = alice_rng.bit() ? photonics::Basis::diagonal : photonics::Basis::rectilinear;
        std::uint8_t bit = alice_rng.bit();
        std::uint32_t photons = alice_rng.poisson(label_mu[label]);
        t.alice_records.push_back({basis, bit, label});
        sent.push_back({i, photons, basis, bit, label});
        ++sent_per_label[label];
    }

    adversary::EveRecord eve;
    auto transit = adversary::apply_attack(sent, attack, params.channel, params.detector,
                                           params.source.signal_mu(), eve_rng, eve);

    std::vector<photonics::DetectionRecord> detections;
    detections.reserve(transit.size());
    for (const auto& tp : transit) {
        auto bb = bob_rng.bit() ? photonics::Basis::diagonal : photonics::Basis::rectilinear;
        photonics::DetectionRecord d =
            tp.lossless ? photonics::detect_at_arrival(tp.pulse, bb, params.detector.efficiency,
                                                       params.channel.misalignment_prob,
                                                       params.detector, bob_rng)
                        : photonics::detect(tp.pulse, bb, params.channel, params.detector, bob_rng);
        if (d.detected) ++t.detected_count;
        detections.push_back(d);
    }

    auto add_msg = [&](Message::Dir dir, const char* kind, std::vector<std::uint8_t> payload) {
        t.messages.push_back({dir, kind, std::move(payload)});
    };

    std::vector<std::uint8_t> receipt;
    Bits bob_bases, alice_bases;
    std::vector<std::uint8_t> detected_labels;
    std::vector<std::uint64_t> detected_per_label(label_names.size(), 0);
    for (const auto& d : detections) {
        if (!d.detected) continue;
        append_u64(receipt, d.index);
        bob_bases.push_back(d.basis == photonics::Basis::diagonal);
        const auto& a = t.alice_records[d.index];
        alice_bases.push_back(a.basis == photonics::Basis::diagonal);
        detected_labels.push_back(a.label);
        ++detected_per_label[a.label];
    }
    add_msg(Message::Dir::bob_to_alice, "receipt", std::move(receipt));
    add_msg(Message::Dir::bob_to_alice, "bob-bases", bits_to_bytes(bob_bases));
    add_msg(Message::Dir::alice_to_bob, "alice-bases", bits_to_bytes(alice_bases));
    add_msg(Message::Dir::alice_to_bob, "alice-labels", std::move(detected_labels));
    std::vector<std::uint8_t> counts;
    for (auto c : sent_per_label) append_u64(counts, c);
    add_msg(Message::Dir::alice_to_bob, "label-counts", std::move(counts));

    SiftedKeyPair pair = sift(t.alice_records, detections, label_names);
    t.sifted_length = pair.positions.size();
    t.sifted_positions = pair.positions;
    for (auto l : pair.labels)
        if (l == signal_id) ++t.signal_sifted_length;

    if (attack.kind != adversary::AttackStrategy::Kind::passive) {
        t.eve_information = adversary::eve_information(eve, t);
        if (attack.kind == adversary::AttackStrategy::Kind::pns) t.pns_plan = eve.pns_plan;
    }

    // no sifted bits: nothing secret was at stake, stop before spending any
    // authentication key
    if (pair.positions.empty()) return t;

    QberReport report = estimate_qber(pair, params.test_fraction, alice_rng);
    t.qber = report.per_label;
    t.ledger.test_bits_revealed = report.test_indices.size();
    t.test_positions.reserve(report.test_indices.size());
    for (auto j : report.test_indices) t.test_positions.push_back(pair.positions[j]);

    std::vector<std::uint8_t> tpos;
    Bits tbits_a, tbits_b;
    for (auto j : report.test_indices) {
        append_u64(tpos, j);
        tbits_a.push_back(pair.alice_bits[j]);
        tbits_b.push_back(pair.bob_bits[j]);
    }
    add_msg(Message::Dir::alice_to_bob, "test-positions", std::move(tpos));
    add_msg(Message::Dir::alice_to_bob, "test-bits-alice", bits_to_bytes(tbits_a));
    add_msg(Message::Dir::bob_to_alice, "test-bits-bob", bits_to_bytes(tbits_b));

    for (std::size_t k = 0; k < label_names.size(); ++k) {
        keyrate::IntensityObservation o;
        o.label = label_names[k];
        o.mu = label_mu[k];
        o.sent = sent_per_label[k];
        o.detected = detected_per_label[k];
        o.gain = o.sent ? static_cast<double>(o.detected) / static_cast<double>(o.sent) : 0.0;
        const auto& est = t.qber.at(o.label);
        o.tested = est.tested;
        o.qber = est.qber.value_or(0.0);
        t.observations.push_back(std::move(o));
    }

    const auto& signal_est = t.qber.at("signal");
    double signal_qber = signal_est.qber.value_or(0.0);

    if (signal_est.qber && *signal_est.qber >= params.qber_abort_threshold) {
        t.outcome = SessionTranscript::Outcome::aborted;
        t.abort_reason = AbortReason::qber_above_threshold;
        seal_transcript(t);
        return t;
    }

    std::vector<std::uint8_t> is_test(pair.positions.size(), 0);
    for (auto j : report.test_indices) is_test[j] = 1;
    Bits alice_key, bob_key;
    for (std::size_t j = 0; j < pair.positions.size(); ++j) {
        if (is_test[j] || pair.labels[j] != signal_id) continue;
        alice_key.push_back(pair.alice_bits[j]);
        bob_key.push_back(pair.bob_bits[j]);
        t.key_positions.push_back(pair.positions[j]);
    }
    t.reconciled_length = alice_key.size();

    TranscriptSink sink(t);
    postprocessing::ReconcileOptions ropt;
    ropt.qber_hint = signal_qber;
    ropt.seed = derive_seed(public_base, 1);
    auto rec = postprocessing::reconcile(alice_key, bob_key, ropt, &sink);
    t.ledger.ec_bits_leaked = rec.leaked_total();
    if (!rec.success) {
        t.outcome = SessionTranscript::Outcome::aborted;
        t.abort_reason = AbortReason::reconciliation_failed;
        seal_transcript(t);
        return t;
    }

    // multi-photon fraction of the signal detections, from public data only:
    // decoy estimation when the source ran vacuum + weak decoy, otherwise the
    // worst case where every multi-photon pulse is presumed to have clicked
    double signal_mu = params.source.signal_mu();
    double signal_gain = 0.0;
    for (const auto& o : t.observations)
        if (o.label == "signal") signal_gain = o.gain;
    bool has_vacuum = false, has_weak = false;
    for (const auto& o : t.observations) {
        if (o.mu == 0.0) has_vacuum = true;
        if (o.mu > 0.0 && o.mu < signal_mu) has_weak = true;
    }
    double delta;
    if (has_vacuum && has_weak && signal_gain > 0.0) {
        auto bounds = keyrate::decoy_bounds(t.observations);
        t.decoy_bounds_used = true;
        double q1 = bounds.y1_lower * photonics::poisson_pmf(signal_mu, 1);
        delta = 1.0 - std::clamp(q1 / signal_gain, 0.0, 1.0);
    } else if (signal_gain > 0.0) {
        delta = std::min(1.0, keyrate::p_multi(signal_mu) / signal_gain);
    } else {
        delta = 1.0;
    }
    t.multiphoton_fraction = delta;

    t.final_length = postprocessing::final_length(t.reconciled_length, signal_qber, delta,
                                                  t.ledger.ec_bits_leaked,
                                                  params.security_margin_bits);

    if (t.final_length > 0) {
        std::uint64_t pa_seed = derive_seed(public_base, 2);
        std::vector<std::uint8_t> ps;
        append_u64(ps, pa_seed);
        add_msg(Message::Dir::alice_to_bob, "pa-seed", std::move(ps));
        t.alice_final_key = postprocessing::privacy_amplify(alice_key, t.final_length, pa_seed);
        t.bob_final_key = postprocessing::privacy_amplify(bob_key, t.final_length, pa_seed);
        t.ledger.pa_output_length = t.final_length;
    }

    if (!seal_transcript(t)) {
        t.outcome = SessionTranscript::Outcome::aborted;
        t.abort_reason = AbortReason::auth_budget_exhausted;
        t.final_length = 0;
        t.ledger.pa_output_length = 0;
        t.alice_final_key.clear();
        t.bob_final_key.clear();
        return t;
    }
    t.outcome = SessionTranscript::Outcome::completed;
    return t;
}

nlohmann::json SessionTranscript::to_json() const {
    nlohmann::json j;
    j["outcome"] = outcome == Outcome::completed ? "completed" : "aborted";
    j["abort_reason"] = abort_reason ? nlohmann::json(to_string(*abort_reason))
                                     : nlohmann::json(nullptr);
    j["seed"] = seed;
    j["n_pulses"] = params.n_pulses;
    j["detected_count"] = detected_count;
    j["sifted_length"] = sifted_length;
    j["signal_sifted_length"] = signal_sifted_length;
    j["reconciled_length"] = reconciled_length;

    nlohmann::json qj = nlohmann::json::object();
    for (const auto& [label, est] : qber) {
        qj[label] = {{"tested", est.tested},
                     {"errors", est.errors},
                     {"qber", est.qber ? nlohmann::json(*est.qber) : nlohmann::json(nullptr)}};
    }
    j["qber"] = qj;

    nlohmann::json obs = nlohmann::json::array();
    for (const auto& o : observations) {
        obs.push_back({{"label", o.label},
                       {"mu", o.mu},
                       {"gain", o.gain},
                       {"qber", o.qber},
                       {"sent", o.sent},
                       {"detected", o.detected},
                       {"tested", o.tested}});
    }
    j["observations"] = obs;

    j["multiphoton_fraction"] = multiphoton_fraction;
    j["decoy_bounds_used"] = decoy_bounds_used;
    j["ledger"] = {{"ec_bits_leaked", ledger.ec_bits_leaked},
                   {"pa_output_length", ledger.pa_output_length},
                   {"auth_bits_consumed", ledger.auth_bits_consumed},
                   {"test_bits_revealed", ledger.test_bits_revealed}};
    j["final_length"] = final_length;
    j["keys_match"] = alice_final_key == bob_final_key;
    j["final_key"] = bits_to_string(alice_final_key);
    j["net_key_growth"] = static_cast<std::int64_t>(final_length) -
                          static_cast<std::int64_t>(ledger.auth_bits_consumed);

    j["attack"] = {{"kind", adversary::to_string(attack.kind)}, {"fraction", attack.fraction}};
    if (attack.target_gain) j["attack"]["target_gain"] = *attack.target_gain;
    if (eve_information) j["eve_information"] = *eve_information;
    if (pns_plan) {
        j["pns_plan"] = {{"blocking_probability", pns_plan->blocking_probability},
                         {"excess_gain", pns_plan->excess_gain}};
    }

    j["message_count"] = messages.size();

    nlohmann::json src;
    src["intensities"] = params.source.intensities;
    src["selection_probabilities"] = params.source.selection_probabilities;
    j["params"] = {{"test_fraction", params.test_fraction},
                   {"qber_abort_threshold", params.qber_abort_threshold},
                   {"distance_km", params.channel.distance_km},
                   {"attenuation_db_per_km", params.channel.attenuation_db_per_km},
                   {"misalignment_prob", params.channel.misalignment_prob},
                   {"detector_efficiency", params.detector.efficiency},
                   {"dark_count_prob", params.detector.dark_count_prob},
                   {"double_click_policy",
                    params.detector.double_click_policy == photonics::DoubleClickPolicy::random_bit
                        ? "random_bit"
                        : "discard"},
                   {"security_margin_bits", params.security_margin_bits},
                   {"preshared_auth_bits", params.preshared_auth_bits},
                   {"source", src}};
    return j;
}

} // namespace qkd::protocol
