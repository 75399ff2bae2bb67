#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qkd/bits.hpp"

namespace qkd::postprocessing {

Bits otp_encrypt(const Bits& message, const Bits& key);  // throws if key shorter than message
Bits otp_decrypt(const Bits& ciphertext, const Bits& key);

// what an eavesdropper learns from two ciphertexts under the same pad:
// c1 xor c2 == m1 xor m2
Bits key_reuse_leak(const Bits& c1, const Bits& c2);

// Sink for the classical traffic of interactive post-processing. The session
// routes this into its authenticated transcript; standalone callers may pass
// nullptr.
struct MessageSink {
    virtual void alice_to_bob(std::string_view kind, const std::vector<std::uint8_t>& payload) = 0;
    virtual void bob_to_alice(std::string_view kind, const std::vector<std::uint8_t>& payload) = 0;
    virtual ~MessageSink() = default;
};

struct ReconcileOptions {
    double qber_hint = 0.05;  // drives the initial block size (~0.73/q)
    int passes = 4;
    int extra_passes = 2;     // rerun budget if verification fails after the regular passes
    std::uint64_t seed = 0;   // public coins: pass permutations and the verification hash point
};

struct ReconcileResult {
    bool success = false;
    std::uint64_t corrections = 0;
    std::uint64_t parity_bits_leaked = 0;  // reference-side parity bits put on the wire
    std::uint64_t verify_bits = 0;         // verification hash bits exchanged
    std::uint64_t messages = 0;

    std::uint64_t leaked_total() const { return parity_bits_leaked + verify_bits; }
};

// Cascade-style reconciliation: Alice's key is the reference, Bob's is fixed
// up in place. Iterated block parities with binary search on mismatches and
// backtracking through earlier passes; block size starts near 0.73/q and
// doubles each pass. Every parity bit Alice reveals and every verification
// hash bit counts as leakage. Bob's replies only expose where the keys
// differ, never the reference parities themselves.
ReconcileResult reconcile(const Bits& alice, Bits& bob, const ReconcileOptions& options,
                          MessageSink* sink = nullptr);

// ceil-free GLLP-style length budget:
//   l = floor(n (1-delta) (1 - H2(e1)) - ec_bits_leaked - security_margin), clamped at 0,
// with e1 = min(0.5, qber / (1-delta)): every observed error is charged to
// the untagged single-photon fraction.
std::uint64_t final_length(std::uint64_t n, double qber, double multiphoton_fraction,
                           std::uint64_t ec_bits_leaked, std::uint32_t security_margin_bits);

// Toeplitz universal hash keyed by a public seed; out_len must not exceed the
// input length.
Bits privacy_amplify(const Bits& key, std::uint64_t out_len, std::uint64_t public_seed);

// Pre-shared authentication pool plus grown key. Consumption only moves
// forward: no bit is ever handed out twice.
class KeyStore {
public:
    explicit KeyStore(Bits pre_shared);

    std::uint64_t available() const { return bits_.size() - offset_; }
    std::uint64_t consumed_offset() const { return offset_; }
    std::uint64_t preshared_bits() const { return preshared_; }
    std::uint64_t grown_bits() const { return grown_; }

    // nullopt when the pool cannot cover the request; never partial
    std::optional<Bits> take(std::uint64_t nbits);
    void deposit(const Bits& grown_key);

private:
    Bits bits_;
    std::uint64_t offset_ = 0;
    std::uint64_t preshared_ = 0;
    std::uint64_t grown_ = 0;
};

struct AuthTag {
    std::uint64_t tag = 0;
    std::uint64_t bits_consumed = 0;
    std::uint64_t eval_point = 0;  // retained so tests and the peer can verify
    std::uint64_t pad = 0;
};

// Wegman-Carter over GF(2^64): polynomial-evaluation hash at a secret point,
// tag blinded by a one-time pad. 128 key bits per message regardless of
// message size. nullopt when the store is exhausted.
std::optional<AuthTag> authenticate(std::span<const std::uint8_t> message, KeyStore& store);

std::uint64_t poly_mac(std::span<const std::uint8_t> message, std::uint64_t eval_point,
                       std::uint64_t pad);

} // namespace qkd::postprocessing
