#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dpmn/errors.hpp"
#include "dpmn/objective.hpp"
#include "dpmn/param.hpp"
#include "dpmn/topology.hpp"

namespace dpmn {

// Wire layout, all integers little-endian:
//
//   offset 0   u32 sender
//   offset 4   u32 round
//   offset 8   u32 count      number of retained coordinates
//   offset 12  ceil(d/8) B    mask, bit k at byte k/8, bit k%8 (LSB first); padding bits zero
//   then       count x 8 B    retained values as IEEE-754 binary64, ascending coordinate order
inline constexpr std::size_t kPayloadHeaderBytes = 12;

inline constexpr std::size_t mask_bytes(std::size_t d) noexcept { return (d + 7) / 8; }

inline constexpr std::size_t payload_size(std::size_t d, std::size_t ones) noexcept {
  return kPayloadHeaderBytes + mask_bytes(d) + 8 * ones;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t{in[offset + b]} << (8 * b);
  return v;
}

inline void put_f64(std::vector<std::uint8_t>& out, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
}

inline double get_f64(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= std::uint64_t{in[offset + b]} << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

struct Payload {
  std::vector<std::uint8_t> bytes;

  std::size_t byte_size() const noexcept { return bytes.size(); }
  std::uint32_t sender() const { return detail::get_u32(bytes, 0); }
  std::uint32_t round() const { return detail::get_u32(bytes, 4); }
  std::uint32_t count() const { return detail::get_u32(bytes, 8); }
  std::size_t value_bytes() const { return 8 * std::size_t{count()}; }
};

inline Payload encode(const ParamVector& x, const PruneMask& m, std::uint32_t sender, std::uint32_t round) {
  require_same_size(x.size(), m.size());
  const std::size_t d = x.size();
  const std::size_t ones = m.count();
  Payload p;
  p.bytes.reserve(payload_size(d, ones));
  detail::put_u32(p.bytes, sender);
  detail::put_u32(p.bytes, round);
  detail::put_u32(p.bytes, static_cast<std::uint32_t>(ones));
  const std::size_t mask_at = p.bytes.size();
  p.bytes.resize(mask_at + mask_bytes(d), 0);
  for (std::size_t k = 0; k < d; ++k) {
    if (m[k]) p.bytes[mask_at + k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (m[k]) detail::put_f64(p.bytes, x[k]);
  }
  return p;
}

// Inverse of encode for dimension d. Rejects any payload whose length,
// count field, or padding bits are inconsistent.
inline std::pair<ParamVector, PruneMask> decode(const Payload& p, std::size_t d) {
  const auto& b = p.bytes;
  if (b.size() < kPayloadHeaderBytes)
    throw DecodeError(-1, -1, "truncated header: " + std::to_string(b.size()) + " of 12 bytes");
  const std::int64_t sender = p.sender();
  const std::int64_t round = p.round();
  const std::size_t count = p.count();
  const std::size_t mb = mask_bytes(d);
  if (b.size() < kPayloadHeaderBytes + mb)
    throw DecodeError(sender, round,
                      "truncated mask: " + std::to_string(b.size()) + " bytes, need at least " +
                          std::to_string(kPayloadHeaderBytes + mb));
  PruneMask mask = PruneMask::zeros(d);
  std::size_t ones = 0;
  for (std::size_t k = 0; k < mb * 8; ++k) {
    const bool bit = (b[kPayloadHeaderBytes + k / 8] >> (k % 8)) & 1u;
    if (k >= d) {
      if (bit) throw DecodeError(sender, round, "nonzero padding bit " + std::to_string(k));
      continue;
    }
    mask.set(k, bit);
    ones += bit;
  }
  if (ones != count)
    throw DecodeError(sender, round,
                      "count field " + std::to_string(count) + " disagrees with mask popcount " + std::to_string(ones));
  const std::size_t expected = payload_size(d, count);
  if (b.size() != expected)
    throw DecodeError(sender, round,
                      "payload is " + std::to_string(b.size()) + " bytes, expected " + std::to_string(expected));
  ParamVector x(d);
  std::size_t at = kPayloadHeaderBytes + mb;
  for (std::size_t k = 0; k < d; ++k) {
    if (mask[k]) {
      x[k] = detail::get_f64(b, at);
      at += 8;
    }
  }
  return {std::move(x), std::move(mask)};
}

struct DeviceTraffic {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  std::uint64_t value_bytes_sent = 0;

  friend bool operator==(const DeviceTraffic&, const DeviceTraffic&) = default;
};

// Per-round, per-device byte counts for one exchange.
struct LedgerDelta {
  std::int64_t round = 0;
  std::vector<DeviceTraffic> devices;

  std::uint64_t total_sent() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : devices) s += t.sent;
    return s;
  }
  std::uint64_t total_received() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : devices) s += t.received;
    return s;
  }
  std::uint64_t total_value_bytes() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : devices) s += t.value_bytes_sent;
    return s;
  }
};

class BandwidthLedger {
 public:
  explicit BandwidthLedger(std::size_t num_devices = 0) : totals_(num_devices) {}

  void record(const LedgerDelta& delta) {
    require_same_size(totals_.size(), delta.devices.size());
    for (std::size_t i = 0; i < totals_.size(); ++i) {
      totals_[i].sent += delta.devices[i].sent;
      totals_[i].received += delta.devices[i].received;
      totals_[i].value_bytes_sent += delta.devices[i].value_bytes_sent;
    }
    rounds_.push_back(delta);
  }

  const std::vector<LedgerDelta>& rounds() const noexcept { return rounds_; }
  const std::vector<DeviceTraffic>& totals() const noexcept { return totals_; }

  std::uint64_t total_bytes() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : totals_) s += t.sent;
    return s;
  }
  std::uint64_t total_received() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : totals_) s += t.received;
    return s;
  }
  std::uint64_t total_value_bytes() const noexcept {
    std::uint64_t s = 0;
    for (const auto& t : totals_) s += t.value_bytes_sent;
    return s;
  }

 private:
  std::vector<DeviceTraffic> totals_;
  std::vector<LedgerDelta> rounds_;
};

struct ExchangeResult {
  // inboxes[i] holds one model per j in S_i, ascending j.
  std::vector<std::vector<NeighborModel>> inboxes;
  LedgerDelta delta;
};

// Synchronous pull exchange: device i receives exactly one payload from each
// j in S_i. Each sender encodes once per round; every directed edge is charged
// the full payload size to j (sent) and i (received).
inline ExchangeResult exchange(const NeighborGraph& graph, std::span<const ParamVector> models,
                               std::span<const PruneMask> masks, std::int64_t round) {
  const std::size_t n = models.size();
  require_same_size(n, masks.size());
  require_same_size(n, graph.num_devices());
  ExchangeResult r;
  r.inboxes.resize(n);
  r.delta.round = round;
  r.delta.devices.resize(n);

  std::vector<std::optional<Payload>> outbox(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : graph.adjacency[i]) {
      if (j >= n || j == i) throw PreconditionError("graph references invalid neighbor " + std::to_string(j));
      if (!outbox[j])
        outbox[j] = encode(models[j], masks[j], static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(round));
    }
  }
  // Barrier: every payload for the round exists before any inbox is filled.
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : graph.adjacency[i]) {
      const auto& payload = *outbox[j];
      auto [x, m] = decode(payload, models[j].size());
      r.inboxes[i].push_back(NeighborModel{static_cast<std::int64_t>(j), std::move(x), std::move(m)});
      r.delta.devices[j].sent += payload.byte_size();
      r.delta.devices[j].value_bytes_sent += payload.value_bytes();
      r.delta.devices[i].received += payload.byte_size();
    }
  }
  return r;
}

}  // namespace dpmn
