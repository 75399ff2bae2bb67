#include "qkd/adversary.hpp"

#include <cmath>
#include <stdexcept>

#include "qkd/protocol.hpp"

namespace qkd::adversary {

void AttackStrategy::validate() const {
    if (!(fraction >= 0.0) || fraction > 1.0)
        throw std::invalid_argument("attack: fraction outside [0, 1]");
    if (target_gain) {
        if (kind != Kind::pns)
            throw std::invalid_argument("attack: target_gain only applies to pns");
        if (!(*target_gain > 0.0) || *target_gain >= 1.0)
            throw std::invalid_argument("attack: target_gain outside (0, 1)");
    }
}

AttackStrategy AttackStrategy::passive() { return {}; }

AttackStrategy AttackStrategy::intercept_resend(double fraction) {
    AttackStrategy s;
    s.kind = Kind::intercept_resend;
    s.fraction = fraction;
    return s;
}

AttackStrategy AttackStrategy::pns(std::optional<double> target_gain) {
    AttackStrategy s;
    s.kind = Kind::pns;
    s.target_gain = target_gain;
    return s;
}

AttackStrategy AttackStrategy::beam_splitter() {
    AttackStrategy s;
    s.kind = Kind::beam_splitter;
    return s;
}

std::string to_string(AttackStrategy::Kind k) {
    switch (k) {
        case AttackStrategy::Kind::passive: return "passive";
        case AttackStrategy::Kind::intercept_resend: return "intercept-resend";
        case AttackStrategy::Kind::pns: return "pns";
        case AttackStrategy::Kind::beam_splitter: return "beam-splitter";
    }
    return "passive";
}

std::optional<AttackStrategy::Kind> attack_kind_from_string(const std::string& s) {
    if (s == "passive") return AttackStrategy::Kind::passive;
    if (s == "intercept-resend" || s == "intercept_resend")
        return AttackStrategy::Kind::intercept_resend;
    if (s == "pns") return AttackStrategy::Kind::pns;
    if (s == "beam-splitter" || s == "beam_splitter") return AttackStrategy::Kind::beam_splitter;
    return std::nullopt;
}

namespace {

// arrival probability of the attacked line: singles pass with probability
// (1-b) and then face only the detector, multi-photon pulses lose one photon
// to Eve's memory and forward the rest losslessly
double multiphoton_arrival(double mu, double eta_det) {
    double c = 0.0;
    for (std::uint32_t n = 2; n < 10000; ++n) {
        double p = photonics::poisson_pmf(mu, n);
        c += p * (1.0 - std::pow(1.0 - eta_det, n - 1.0));
        if (p < 1e-22 && n > mu) break;
    }
    return c;
}

PnsPlan plan_for_arrival(double mu, double arrival_target, double eta_det) {
    double p1 = photonics::poisson_pmf(mu, 1);
    double c = multiphoton_arrival(mu, eta_det);

    auto arrival = [&](double b) { return p1 * (1.0 - b) * eta_det + c; };

    PnsPlan plan;
    if (arrival(0.0) <= arrival_target) {
        // forwarding everything still falls short; nothing to hide
        plan.blocking_probability = 0.0;
        return plan;
    }
    if (arrival(1.0) > arrival_target + 1e-15) {
        // multi-photon light alone exceeds the target; the line is too bright
        plan.blocking_probability = 1.0;
        plan.excess_gain = true;
        return plan;
    }

    double lo = 0.0, hi = 1.0;  // arrival(lo) >= target >= arrival(hi)
    for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        (arrival(mid) >= arrival_target ? lo : hi) = mid;
    }
    plan.blocking_probability = 0.5 * (lo + hi);
    return plan;
}

} // namespace

PnsPlan pns_plan_for_gain(double mu, double target_gain, double y0, double eta_det) {
    if (!(mu > 0.0))
        throw std::invalid_argument("pns: mu must be positive");
    if (!(eta_det > 0.0) || eta_det > 1.0)
        throw std::invalid_argument("pns: eta_det outside (0, 1]");
    if (!(y0 >= 0.0) || y0 >= 1.0)
        throw std::invalid_argument("pns: y0 outside [0, 1)");
    if (!(target_gain >= 0.0) || target_gain >= 1.0)
        throw std::invalid_argument("pns: target_gain outside [0, 1)");
    // dark counts fire behind the line on both sides of the comparison, so
    // the gain constraint reduces to one on the arrival probability
    double arrival_target = 1.0 - (1.0 - target_gain) / (1.0 - y0);
    return plan_for_arrival(mu, arrival_target, eta_det);
}

PnsPlan pns_blocking_probability(double mu, double eta_total, double y0, double eta_det) {
    if (!(eta_total > 0.0) || eta_total > 1.0)
        throw std::invalid_argument("pns: eta_total outside (0, 1]");
    double benign_gain = 1.0 - (1.0 - y0) * std::exp(-eta_total * mu);
    return pns_plan_for_gain(mu, benign_gain, y0, eta_det);
}

std::vector<TransitPulse> apply_attack(const std::vector<photonics::Pulse>& sent,
                                       const AttackStrategy& strategy,
                                       const photonics::ChannelConfig& channel,
                                       const photonics::DetectorConfig& detector,
                                       double signal_mu,
                                       Rng& eve_rng,
                                       EveRecord& record) {
    strategy.validate();
    record.strategy = strategy;
    record.notes.assign(sent.size(), EveNote{});
    record.pns_plan = PnsPlan{};

    std::vector<TransitPulse> out;
    out.reserve(sent.size());

    switch (strategy.kind) {
        case AttackStrategy::Kind::passive: {
            for (const auto& p : sent) out.push_back({p, false});
            break;
        }
        case AttackStrategy::Kind::intercept_resend: {
            // per pulse with light: one coin for interception, one for the
            // measurement basis, and an outcome coin only on basis mismatch
            for (std::size_t i = 0; i < sent.size(); ++i) {
                const auto& p = sent[i];
                if (p.photon_count == 0 || !eve_rng.bernoulli(strategy.fraction)) {
                    out.push_back({p, false});
                    continue;
                }
                photonics::Basis eve_basis =
                    eve_rng.bit() ? photonics::Basis::diagonal : photonics::Basis::rectilinear;
                std::uint8_t outcome = (eve_basis == p.basis) ? p.bit : eve_rng.bit();
                record.notes[i] = {EveNoteKind::measured, eve_basis, outcome};

                photonics::Pulse resent = p;
                resent.photon_count = 1;
                resent.basis = eve_basis;
                resent.bit = outcome;
                out.push_back({resent, false});
            }
            break;
        }
        case AttackStrategy::Kind::pns: {
            double eta_total = photonics::total_transmittance(channel, detector);
            record.pns_plan =
                strategy.target_gain
                    ? pns_plan_for_gain(signal_mu, *strategy.target_gain,
                                        detector.dark_count_prob, detector.efficiency)
                    : pns_blocking_probability(signal_mu, eta_total, detector.dark_count_prob,
                                               detector.efficiency);
            double b = record.pns_plan.blocking_probability;
            for (std::size_t i = 0; i < sent.size(); ++i) {
                photonics::Pulse fwd = sent[i];
                if (fwd.photon_count == 1) {
                    if (eve_rng.bernoulli(b)) {
                        record.notes[i].kind = EveNoteKind::blocked;
                        fwd.photon_count = 0;
                    }
                } else if (fwd.photon_count >= 2) {
                    record.notes[i].kind = EveNoteKind::stored_photon;
                    fwd.photon_count -= 1;
                }
                out.push_back({fwd, true});
            }
            break;
        }
        case AttackStrategy::Kind::beam_splitter: {
            // tap exactly the fiber loss: keep each photon with 1 - eta_ch,
            // forward the rest over a lossless line, so Bob sees benign stats
            double eta_ch = channel.transmittance();
            for (std::size_t i = 0; i < sent.size(); ++i) {
                photonics::Pulse fwd = sent[i];
                std::uint32_t kept = 0;
                for (std::uint32_t k = 0; k < sent[i].photon_count; ++k)
                    if (eve_rng.bernoulli(1.0 - eta_ch)) ++kept;
                fwd.photon_count -= kept;
                if (kept > 0) record.notes[i].kind = EveNoteKind::stored_photon;
                out.push_back({fwd, true});
            }
            break;
        }
    }
    return out;
}

double eve_information(const EveRecord& record, const protocol::SessionTranscript& transcript) {
    if (transcript.sifted_positions.empty()) return 0.0;
    std::uint64_t known = 0;
    for (std::uint64_t pos : transcript.sifted_positions) {
        if (pos >= record.notes.size()) continue;
        const EveNote& note = record.notes[pos];
        if (note.kind == EveNoteKind::stored_photon) {
            // the stored photon is measured in the basis announced later
            ++known;
        } else if (note.kind == EveNoteKind::measured) {
            if (note.basis == transcript.alice_records[pos].basis) ++known;
        }
    }
    return static_cast<double>(known) / static_cast<double>(transcript.sifted_positions.size());
}

} // namespace qkd::adversary
