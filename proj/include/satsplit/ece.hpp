#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "satsplit/crypto.hpp"
#include "satsplit/time.hpp"

namespace satsplit {

// Encrypted Content-Encoding for HTTP, "aes128gcm" coding (RFC 8188).

using Salt = std::array<std::uint8_t, 16>;

inline constexpr std::uint32_t kDefaultRecordSize = 4096;
inline constexpr std::uint32_t kMinRecordSize = 18;
inline constexpr std::size_t kEceTagSize = 16;
inline constexpr SimTime kDefaultEpochLength = from_s(3600);

struct EceHeader {
  Salt salt{};
  std::uint32_t record_size = kDefaultRecordSize;
  Bytes keyid;

  std::size_t size() const { return 21 + keyid.size(); }
  Bytes serialize() const;
  /// Parses the header at the start of `wire`.  Throws FramingError on
  /// truncation and InvalidRecordSize when rs < 18.
  static EceHeader parse(ByteView wire);

  friend bool operator==(const EceHeader&, const EceHeader&) = default;
};

struct EceBody {
  EceHeader header;
  /// AEAD ciphertexts; all are exactly rs octets except possibly the last.
  std::vector<Bytes> records;

  std::size_t size() const;
  Bytes serialize() const;
  static EceBody parse(ByteView wire);

  friend bool operator==(const EceBody&, const EceBody&) = default;
};

/// Shared content-encryption keying material for one rotation epoch.
struct ContentKey {
  Bytes keyid;
  std::array<std::uint8_t, 16> ikm{};
  std::uint64_t epoch = 0;
  SimTime valid_from{0};
  SimTime valid_to = SimTime::max();

  bool valid_at(SimTime t) const { return valid_from <= t && t < valid_to; }
};

using KeyLookup = std::function<std::optional<ContentKey>(ByteView keyid)>;

/// Throws InvalidRecordSize if rs < 18.
EceBody ece_encrypt(ByteView plaintext, const ContentKey& key, std::uint32_t rs, const Salt& salt);

/// Variant that inserts `padding[i]` zero octets after the delimiter of record
/// i (missing entries mean no padding).  Padding shortens the data carried by
/// that record so the record still fits in rs; the final record may be filled
/// to capacity.
EceBody ece_encrypt_padded(ByteView plaintext, const ContentKey& key, std::uint32_t rs,
                           const Salt& salt, std::span<const std::size_t> padding);

/// Throws UnknownKeyId, AuthenticationFailure or FramingError.
Bytes ece_decrypt(const EceBody& body, const KeyLookup& lookup);
Bytes ece_decrypt(ByteView wire, const KeyLookup& lookup);

/// Derives the epoch's content key from the secret shared by the origin and
/// every authorized terminal.  Deterministic in (master, epoch).
ContentKey rotate_content_key(ByteView master, std::uint64_t epoch,
                              SimTime epoch_length = kDefaultEpochLength);

/// Epoch containing `t` for the given rotation period.
inline std::uint64_t epoch_at(SimTime t, SimTime epoch_length = kDefaultEpochLength) {
  return t.count() / epoch_length.count();
}

/// Content keys held by a node, indexed by keyid.
class KeyRing {
 public:
  void add(ContentKey key);
  std::optional<ContentKey> find(ByteView keyid) const;
  /// Drops keys whose validity ended at or before `now`.
  std::size_t drop_expired(SimTime now);
  std::size_t size() const { return keys_.size(); }
  KeyLookup lookup() const;

 private:
  std::map<Bytes, ContentKey> keys_;
};

}  // namespace satsplit
