#pragma once

#include <optional>

#include "rangesim/types.hpp"

namespace rangesim {

/// Number of octets in a SYNC frame payload: id(4) | epoch(8) | tag(4).
inline constexpr std::size_t kSyncPayloadOctets = 16;
inline constexpr std::size_t kSyncPayloadSymbols = kSyncPayloadOctets * 8;
inline constexpr std::size_t kPostambleLength = 64;

/// Derive a secret L-symbol +-1 sequence from the shared key and label.
/// HMAC-SHA-256 in counter mode expanded to L bits; bit 0 -> +1, bit 1 -> -1.
/// Label encoding is fixed-width big-endian: role(1) | id(4) | epoch(8) [| n(4)].
/// Requests omit the counter, responses must carry it.
SymbolSequence derive_sequence(const SharedKey& key, const SequenceLabel& label, std::size_t length);

/// T_W = T * (PRF(key; reflector, epoch, n, W) mod W). Both sides of a session
/// compute identical values from the shared inputs.
WaitingPeriod derive_waiting_period(const SharedKey& key, std::uint32_t reflector_id,
                                    std::uint64_t epoch, std::uint32_t n, std::uint32_t window,
                                    double sample_period);

/// BPSK: one complex sample per symbol, bandwidth 1/T.
BasebandSignal modulate_bpsk(const SymbolSequence& seq, double sample_period);

/// Hard-decision inverse of modulate_bpsk (sign of the real part).
SymbolSequence demodulate_bpsk(const BasebandSignal& sig);

/// Zero-stuff by `factor` and low-pass with a polyphase windowed-sinc
/// (64 taps per branch, Hamming). Output length = factor * input length,
/// bandwidth = input bandwidth / factor, total energy preserved.
BasebandSignal upsample(const BasebandSignal& sig, unsigned factor);

/// The public 64-symbol postamble (m-sequence, degree 6, cyclically extended).
SymbolSequence postamble_sequence();

struct SyncPayload {
  std::uint32_t initiator_id = 0;
  std::uint64_t epoch = 0;
};

/// SYNC := { E_K(initiator, epoch) | postamble }, BPSK modulated.
/// The payload is encrypted with an HMAC-keystream stream cipher (nonce = epoch)
/// and carries a 4-octet tag so receivers can reject wrong-key frames.
BasebandSignal build_sync_frame(const SharedKey& key, std::uint32_t initiator_id,
                                const EpochIndex& epoch, const SymbolSequence& postamble,
                                double sample_period);

/// Decrypt and validate the 128 payload symbols of a SYNC frame. The nonce is
/// the epoch itself, so the receiver tries epoch_hint and its +-hint_range
/// neighbours; the embedded tag picks the right one (or rejects the frame).
std::optional<SyncPayload> decode_sync_payload(std::span<const cplx> payload_symbols,
                                               const SharedKey& key, std::uint64_t epoch_hint,
                                               std::uint64_t hint_range = 1);

}  // namespace rangesim
