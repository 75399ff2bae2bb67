#include "qkd/postprocessing.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "qkd/gf64.hpp"
#include "qkd/keyrate.hpp"
#include "qkd/rng.hpp"

namespace qkd::postprocessing {

Bits otp_encrypt(const Bits& message, const Bits& key) {
    if (key.size() < message.size())
        throw std::invalid_argument("otp: key shorter than message");
    Bits out(message.size());
    for (std::size_t i = 0; i < message.size(); ++i) out[i] = message[i] ^ key[i];
    return out;
}

Bits otp_decrypt(const Bits& ciphertext, const Bits& key) { return otp_encrypt(ciphertext, key); }

Bits key_reuse_leak(const Bits& c1, const Bits& c2) {
    std::size_t n = std::min(c1.size(), c2.size());
    Bits out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = c1[i] ^ c2[i];
    return out;
}

namespace {

constexpr std::uint64_t verify_stream_base = 1000;  // permutation streams stay below this

struct CascadePass {
    std::vector<std::uint32_t> perm;     // slot -> key position
    std::vector<std::uint32_t> slot_of;  // key position -> slot
    std::size_t block = 1;
    std::vector<std::uint8_t> alice_parity;  // announced once, never changes
    std::vector<std::uint8_t> bob_parity;    // maintained as Bob flips bits
};

struct Cascade {
    const Bits& alice;
    Bits& bob;
    const ReconcileOptions& opt;
    MessageSink* sink;
    ReconcileResult& res;
    std::vector<CascadePass> passes;
    std::deque<std::pair<std::size_t, std::size_t>> work;  // (pass, block)

    void send_ab(std::string_view kind, const std::vector<std::uint8_t>& payload) {
        ++res.messages;
        if (sink) sink->alice_to_bob(kind, payload);
    }
    void send_ba(std::string_view kind, const std::vector<std::uint8_t>& payload) {
        ++res.messages;
        if (sink) sink->bob_to_alice(kind, payload);
    }

    int range_parity(const Bits& key, const CascadePass& p, std::size_t lo, std::size_t hi) const {
        int acc = 0;
        for (std::size_t s = lo; s < hi; ++s) acc ^= key[p.perm[s]];
        return acc;
    }

    // flipping one bit flips the parity of its block in every pass built so
    // far; blocks whose announced parity now disagrees rejoin the queue
    void flip(std::size_t pos) {
        bob[pos] ^= 1;
        ++res.corrections;
        for (std::size_t pi = 0; pi < passes.size(); ++pi) {
            auto& p = passes[pi];
            std::size_t b = p.slot_of[pos] / p.block;
            p.bob_parity[b] ^= 1;
            if (p.bob_parity[b] != p.alice_parity[b]) work.push_back({pi, b});
        }
    }

    void binary_search_fix(std::size_t pi, std::size_t b) {
        const auto& p = passes[pi];
        std::size_t lo = b * p.block;
        std::size_t hi = std::min(alice.size(), lo + p.block);
        while (hi - lo > 1) {
            std::size_t mid = lo + (hi - lo + 1) / 2;
            int ap = range_parity(alice, p, lo, mid);
            res.parity_bits_leaked += 1;
            send_ab("ec-split", {static_cast<std::uint8_t>(ap)});
            int bp = range_parity(bob, p, lo, mid);
            bool in_left = ap != bp;
            send_ba("ec-side", {static_cast<std::uint8_t>(in_left)});
            if (in_left) hi = mid; else lo = mid;
        }
        flip(p.perm[lo]);
    }

    void drain() {
        while (!work.empty()) {
            auto [pi, b] = work.front();
            work.pop_front();
            if (passes[pi].alice_parity[b] == passes[pi].bob_parity[b]) continue;
            binary_search_fix(pi, b);
        }
    }

    void run_pass(std::uint64_t pass_index, std::size_t block) {
        const std::size_t n = alice.size();
        CascadePass p;
        p.block = std::clamp<std::size_t>(block, 1, n);
        p.perm.resize(n);
        std::iota(p.perm.begin(), p.perm.end(), 0u);
        if (pass_index > 0) {
            Rng prng(derive_seed(opt.seed, pass_index));
            for (std::size_t i = n; i > 1; --i)
                std::swap(p.perm[i - 1], p.perm[prng.below(i)]);
        }
        p.slot_of.resize(n);
        for (std::size_t s = 0; s < n; ++s) p.slot_of[p.perm[s]] = s;

        std::size_t nblocks = (n + p.block - 1) / p.block;
        p.alice_parity.resize(nblocks);
        p.bob_parity.resize(nblocks);
        Bits announced(nblocks);
        for (std::size_t b = 0; b < nblocks; ++b) {
            std::size_t lo = b * p.block, hi = std::min(n, lo + p.block);
            p.alice_parity[b] = static_cast<std::uint8_t>(range_parity(alice, p, lo, hi));
            p.bob_parity[b] = static_cast<std::uint8_t>(range_parity(bob, p, lo, hi));
            announced[b] = p.alice_parity[b];
        }
        res.parity_bits_leaked += nblocks;
        send_ab("ec-parities", bits_to_bytes(announced));

        std::vector<std::uint8_t> mismatch;
        std::size_t pi = passes.size();
        passes.push_back(std::move(p));
        const auto& stored = passes[pi];
        for (std::size_t b = 0; b < nblocks; ++b) {
            if (stored.alice_parity[b] != stored.bob_parity[b]) {
                for (int j = 0; j < 4; ++j)
                    mismatch.push_back(static_cast<std::uint8_t>((b >> (8 * j)) & 0xff));
                work.push_back({pi, b});
            }
        }
        send_ba("ec-mismatch", mismatch);
        drain();
    }

    bool verify(std::uint64_t attempt) {
        Rng vr(derive_seed(opt.seed, verify_stream_base + attempt));
        std::uint64_t point = vr.next_u64();
        while (point == 0) point = vr.next_u64();

        auto abytes = bits_to_bytes(alice);
        std::uint64_t ah = poly_hash64(abytes, point);
        res.verify_bits += 64;
        std::vector<std::uint8_t> payload(8);
        for (int j = 0; j < 8; ++j) payload[j] = static_cast<std::uint8_t>((ah >> (8 * j)) & 0xff);
        send_ab("ec-verify", payload);

        auto bbytes = bits_to_bytes(bob);
        bool ok = poly_hash64(bbytes, point) == ah;
        send_ba("ec-verify-ack", {static_cast<std::uint8_t>(ok)});
        return ok;
    }
};

std::size_t initial_block(double hint, std::size_t n) {
    double q = std::max(hint, 1e-3);
    auto k = static_cast<std::size_t>(std::ceil(0.73 / q));
    return std::min(n, std::max<std::size_t>(4, k));
}

} // namespace

ReconcileResult reconcile(const Bits& alice, Bits& bob, const ReconcileOptions& options,
                          MessageSink* sink) {
    if (alice.size() != bob.size())
        throw std::invalid_argument("reconcile: key length mismatch");
    if (!(options.qber_hint >= 0.0) || options.qber_hint > 0.5)
        throw std::invalid_argument("reconcile: qber_hint outside [0, 0.5]");

    ReconcileResult res;
    if (alice.empty()) {
        res.success = true;
        return res;
    }

    Cascade c{alice, bob, options, sink, res, {}, {}};
    const std::size_t n = alice.size();

    std::uint64_t pass_counter = 0;
    if (options.qber_hint > 0.0) {
        std::size_t block = initial_block(options.qber_hint, n);
        for (int i = 0; i < options.passes; ++i) {
            c.run_pass(pass_counter++, block);
            block = std::min(n, block * 2);
        }
    }

    std::uint64_t attempt = 0;
    if (c.verify(attempt++)) {
        res.success = true;
        return res;
    }

    // verification failed: errors slipped through (or the hint undersold the
    // error rate), so rerun from small blocks with fresh permutations
    std::size_t block = initial_block(options.qber_hint > 0.0 ? options.qber_hint : 0.05, n);
    for (int i = 0; i < options.extra_passes; ++i) {
        c.run_pass(pass_counter++, block);
        block = std::min(n, block * 2);
        if (c.verify(attempt++)) {
            res.success = true;
            return res;
        }
    }
    res.success = false;
    return res;
}

std::uint64_t final_length(std::uint64_t n, double qber, double multiphoton_fraction,
                           std::uint64_t ec_bits_leaked, std::uint32_t security_margin_bits) {
    if (!(qber >= 0.0) || qber > 1.0)
        throw std::invalid_argument("final_length: qber outside [0, 1]");
    if (!(multiphoton_fraction >= 0.0))
        throw std::invalid_argument("final_length: multiphoton fraction negative");
    if (n == 0 || multiphoton_fraction >= 1.0) return 0;

    double untagged = static_cast<double>(n) * (1.0 - multiphoton_fraction);
    double e1 = std::min(0.5, qber / (1.0 - multiphoton_fraction));
    double budget = untagged * (1.0 - keyrate::binary_entropy(e1)) -
                    static_cast<double>(ec_bits_leaked) -
                    static_cast<double>(security_margin_bits);
    if (budget <= 0.0) return 0;
    return static_cast<std::uint64_t>(std::floor(budget));
}

Bits privacy_amplify(const Bits& key, std::uint64_t out_len, std::uint64_t public_seed) {
    const std::uint64_t n = key.size();
    if (out_len > n)
        throw std::invalid_argument("privacy_amplify: output longer than input");
    if (out_len == 0) return {};

    // Toeplitz hash: out[i] = xor_j diag[i + (n-1-j)] & key[j]. Reversing the
    // key turns each output bit into a sliding dot product over the diagonal
    // array, which packed 64-bit words evaluate a word at a time.
    Rng rng(public_seed);
    Bits diag = random_bits(rng, n + out_len - 1);
    Bits reversed(n);
    for (std::uint64_t j = 0; j < n; ++j) reversed[j] = key[n - 1 - j];

    std::vector<std::uint64_t> dw = pack_bits(diag);
    std::vector<std::uint64_t> rw = pack_bits(reversed);
    dw.push_back(0);  // window reads may touch one word past the data

    Bits out(out_len);
    const std::size_t words = rw.size();
    for (std::uint64_t i = 0; i < out_len; ++i) {
        std::uint64_t acc = 0;
        std::size_t base = i >> 6;
        unsigned off = static_cast<unsigned>(i & 63);
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t window = dw[base + w] >> off;
            if (off != 0) window |= dw[base + w + 1] << (64 - off);
            acc ^= window & rw[w];
        }
        out[i] = static_cast<std::uint8_t>(__builtin_parityll(acc));
    }
    return out;
}

KeyStore::KeyStore(Bits pre_shared) : bits_(std::move(pre_shared)), preshared_(bits_.size()) {}

std::optional<Bits> KeyStore::take(std::uint64_t nbits) {
    if (nbits > available()) return std::nullopt;
    Bits out(bits_.begin() + static_cast<std::ptrdiff_t>(offset_),
             bits_.begin() + static_cast<std::ptrdiff_t>(offset_ + nbits));
    offset_ += nbits;
    return out;
}

void KeyStore::deposit(const Bits& grown_key) {
    bits_.insert(bits_.end(), grown_key.begin(), grown_key.end());
    grown_ += grown_key.size();
}

std::uint64_t poly_mac(std::span<const std::uint8_t> message, std::uint64_t eval_point,
                       std::uint64_t pad) {
    return poly_hash64(message, eval_point) ^ pad;
}

std::optional<AuthTag> authenticate(std::span<const std::uint8_t> message, KeyStore& store) {
    auto key = store.take(128);
    if (!key) return std::nullopt;
    auto words = pack_bits(*key);
    AuthTag tag;
    tag.eval_point = words[0];
    tag.pad = words[1];
    tag.bits_consumed = 128;
    tag.tag = poly_mac(message, tag.eval_point, tag.pad);
    return tag;
}

} // namespace qkd::postprocessing
