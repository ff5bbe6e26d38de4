#include "rangesim/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rangesim/crypto.hpp"

namespace rangesim {

namespace {

std::vector<std::uint8_t> encode_label(const SequenceLabel& label) {
  std::vector<std::uint8_t> msg;
  msg.reserve(17);
  msg.push_back(static_cast<std::uint8_t>(label.role));
  crypto::put_be32(msg, label.node_id);
  crypto::put_be64(msg, label.epoch);
  if (label.counter) crypto::put_be32(msg, *label.counter);
  return msg;
}

}  // namespace

SymbolSequence derive_sequence(const SharedKey& key, const SequenceLabel& label,
                               std::size_t length) {
  if (length == 0) throw std::invalid_argument("derive_sequence: length must be >= 1");
  if (label.role == SequenceRole::kResponse && !label.counter)
    throw std::invalid_argument("derive_sequence: response label requires a counter");
  if (label.role == SequenceRole::kRequest && label.counter)
    throw std::invalid_argument("derive_sequence: request label must omit the counter");

  const auto msg = encode_label(label);
  const auto bits = crypto::expand(key.bytes(), msg, (length + 7) / 8);

  SymbolSequence seq;
  seq.label = label;
  seq.symbols.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    const int bit = (bits[i / 8] >> (7 - i % 8)) & 1;
    seq.symbols[i] = bit ? -1 : +1;
  }
  return seq;
}

WaitingPeriod derive_waiting_period(const SharedKey& key, std::uint32_t reflector_id,
                                    std::uint64_t epoch, std::uint32_t n, std::uint32_t window,
                                    double sample_period) {
  if (window == 0) throw std::invalid_argument("derive_waiting_period: window must be >= 1");
  if (sample_period <= 0.0)
    throw std::invalid_argument("derive_waiting_period: sample period must be positive");

  std::vector<std::uint8_t> msg;
  msg.reserve(21);
  msg.push_back(static_cast<std::uint8_t>(SequenceRole::kWaiting));
  crypto::put_be32(msg, reflector_id);
  crypto::put_be64(msg, epoch);
  crypto::put_be32(msg, n);
  crypto::put_be32(msg, window);

  const auto digest = crypto::hmac_sha256(key.bytes(), msg);
  std::uint64_t h = 0;
  for (int i = 0; i < 8; ++i) h = (h << 8) | digest[i];

  WaitingPeriod w;
  w.ticks = h % window;
  w.value = sample_period * static_cast<double>(w.ticks);
  w.window = window;
  w.index = n;
  return w;
}

BasebandSignal modulate_bpsk(const SymbolSequence& seq, double sample_period) {
  if (seq.symbols.empty()) throw std::invalid_argument("modulate_bpsk: empty sequence");
  if (sample_period <= 0.0) throw std::invalid_argument("modulate_bpsk: sample period must be positive");
  BasebandSignal sig;
  sig.sample_period = sample_period;
  sig.bandwidth = 1.0 / sample_period;
  sig.samples.resize(seq.symbols.size());
  std::transform(seq.symbols.begin(), seq.symbols.end(), sig.samples.begin(),
                 [](std::int8_t s) { return cplx(static_cast<double>(s), 0.0); });
  return sig;
}

SymbolSequence demodulate_bpsk(const BasebandSignal& sig) {
  SymbolSequence seq;
  seq.symbols.resize(sig.samples.size());
  std::transform(sig.samples.begin(), sig.samples.end(), seq.symbols.begin(),
                 [](const cplx& s) { return static_cast<std::int8_t>(s.real() < 0.0 ? -1 : +1); });
  return seq;
}

BasebandSignal upsample(const BasebandSignal& sig, unsigned factor) {
  if (factor == 0) throw std::invalid_argument("upsample: factor must be >= 1");
  if (factor == 1) return sig;
  if (sig.samples.empty()) throw std::invalid_argument("upsample: empty signal");

  const std::size_t in_len = sig.samples.size();
  const std::size_t out_len = in_len * factor;

  // Polyphase windowed-sinc interpolator, 64 taps per branch. Cutoff slightly
  // inside the new band edge so the transition band stays within B/2.
  constexpr std::size_t kTapsPerBranch = 64;
  const std::size_t n_taps = kTapsPerBranch * factor;
  const double fc = 0.96 / static_cast<double>(factor);  // fraction of Nyquist
  const double center = static_cast<double>(n_taps - 1) / 2.0;
  std::vector<double> h(n_taps);
  for (std::size_t m = 0; m < n_taps; ++m) {
    const double x = static_cast<double>(m) - center;
    const double arg = std::numbers::pi * fc * x;
    const double s = (std::abs(arg) < 1e-12) ? 1.0 : std::sin(arg) / arg;
    const double w = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(m) /
                                            static_cast<double>(n_taps - 1));
    h[m] = fc * s * w;
  }

  // Convolve the zero-stuffed input, compensating the filter group delay so
  // output sample j sits at input position j/factor.
  const auto group_delay = static_cast<std::ptrdiff_t>((n_taps - 1) / 2);
  BasebandSignal out;
  out.sample_period = sig.sample_period;
  out.bandwidth = sig.bandwidth / static_cast<double>(factor);
  out.samples.assign(out_len, cplx(0.0, 0.0));
  for (std::size_t j = 0; j < out_len; ++j) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(j) + group_delay;
    // only every `factor`-th input contributes (zero stuffing)
    cplx acc(0.0, 0.0);
    std::ptrdiff_t first_k = base - static_cast<std::ptrdiff_t>(n_taps - 1);
    if (first_k < 0) first_k = 0;
    // round up to a stuffed (nonzero) index
    first_k = ((first_k + static_cast<std::ptrdiff_t>(factor) - 1) / static_cast<std::ptrdiff_t>(factor)) *
              static_cast<std::ptrdiff_t>(factor);
    for (std::ptrdiff_t k = first_k; k <= base && k < static_cast<std::ptrdiff_t>(out_len); k += factor) {
      const std::ptrdiff_t tap = base - k;
      acc += sig.samples[static_cast<std::size_t>(k) / factor] * h[static_cast<std::size_t>(tap)];
    }
    out.samples[j] = acc;
  }

  // Preserve total burst energy across the rate change.
  const double e_in = sig.energy();
  const double e_out = out.energy();
  if (e_out > 0.0) {
    const double g = std::sqrt(e_in / e_out);
    for (cplx& s : out.samples) s *= g;
  }
  return out;
}

SymbolSequence postamble_sequence() {
  // Degree-6 m-sequence (x^6 + x^5 + 1), 63 chips, cyclically extended to 64.
  SymbolSequence seq;
  seq.label = SequenceLabel{SequenceRole::kPostamble, 0, 0, std::nullopt};
  seq.symbols.reserve(kPostambleLength);
  unsigned lfsr = 0x3F;
  for (int i = 0; i < 63; ++i) {
    const unsigned bit = (lfsr ^ (lfsr >> 5)) & 1u;
    seq.symbols.push_back((lfsr & 1u) ? -1 : +1);
    lfsr = ((lfsr >> 1) | (bit << 5)) & 0x3F;
  }
  seq.symbols.push_back(seq.symbols.front());
  return seq;
}

namespace {

std::vector<std::uint8_t> sync_keystream(const SharedKey& key, std::uint64_t epoch) {
  std::vector<std::uint8_t> msg;
  msg.push_back(static_cast<std::uint8_t>(SequenceRole::kSyncKeystream));
  crypto::put_be64(msg, epoch);
  return crypto::expand(key.bytes(), msg, kSyncPayloadOctets);
}

std::array<std::uint8_t, 4> sync_tag(const SharedKey& key, std::uint32_t id, std::uint64_t epoch) {
  std::vector<std::uint8_t> msg;
  msg.push_back(static_cast<std::uint8_t>(SequenceRole::kSyncTag));
  crypto::put_be32(msg, id);
  crypto::put_be64(msg, epoch);
  const auto digest = crypto::hmac_sha256(key.bytes(), msg);
  return {digest[0], digest[1], digest[2], digest[3]};
}

}  // namespace

BasebandSignal build_sync_frame(const SharedKey& key, std::uint32_t initiator_id,
                                const EpochIndex& epoch, const SymbolSequence& postamble,
                                double sample_period) {
  std::vector<std::uint8_t> plain;
  plain.reserve(kSyncPayloadOctets);
  crypto::put_be32(plain, initiator_id);
  crypto::put_be64(plain, epoch.value);
  const auto tag = sync_tag(key, initiator_id, epoch.value);
  plain.insert(plain.end(), tag.begin(), tag.end());

  const auto ks = sync_keystream(key, epoch.value);
  for (std::size_t i = 0; i < plain.size(); ++i) plain[i] ^= ks[i];

  SymbolSequence frame;
  frame.label = SequenceLabel{SequenceRole::kSyncKeystream, initiator_id, epoch.value, std::nullopt};
  frame.symbols.reserve(kSyncPayloadSymbols + postamble.length());
  for (std::size_t i = 0; i < kSyncPayloadSymbols; ++i) {
    const int bit = (plain[i / 8] >> (7 - i % 8)) & 1;
    frame.symbols.push_back(bit ? -1 : +1);
  }
  frame.symbols.insert(frame.symbols.end(), postamble.symbols.begin(), postamble.symbols.end());
  return modulate_bpsk(frame, sample_period);
}

std::optional<SyncPayload> decode_sync_payload(std::span<const cplx> payload_symbols,
                                               const SharedKey& key, std::uint64_t epoch_hint,
                                               std::uint64_t hint_range) {
  if (payload_symbols.size() != kSyncPayloadSymbols) return std::nullopt;

  std::vector<std::uint8_t> cipher(kSyncPayloadOctets, 0);
  for (std::size_t i = 0; i < kSyncPayloadSymbols; ++i) {
    if (payload_symbols[i].real() < 0.0) cipher[i / 8] |= static_cast<std::uint8_t>(1u << (7 - i % 8));
  }

  const std::uint64_t lo = epoch_hint >= hint_range ? epoch_hint - hint_range : 0;
  const std::uint64_t hi = epoch_hint + hint_range;
  for (std::uint64_t nonce = lo; nonce <= hi; ++nonce) {
    const auto ks = sync_keystream(key, nonce);
    std::array<std::uint8_t, kSyncPayloadOctets> plain{};
    for (std::size_t i = 0; i < kSyncPayloadOctets; ++i) plain[i] = cipher[i] ^ ks[i];

    std::uint32_t id = 0;
    for (int i = 0; i < 4; ++i) id = (id << 8) | plain[i];
    std::uint64_t epoch = 0;
    for (int i = 4; i < 12; ++i) epoch = (epoch << 8) | plain[i];
    if (epoch != nonce) continue;

    const auto tag = sync_tag(key, id, epoch);
    if (std::equal(tag.begin(), tag.end(), plain.begin() + 12)) return SyncPayload{id, epoch};
  }
  return std::nullopt;
}

}  // namespace rangesim
