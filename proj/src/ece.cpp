#include "satsplit/ece.hpp"

#include <algorithm>
#include <string>

#include "satsplit/error.hpp"

namespace satsplit {
namespace {

constexpr std::string_view kCekInfo{"Content-Encoding: aes128gcm\0", 28};
constexpr std::string_view kNonceInfo{"Content-Encoding: nonce\0", 24};
constexpr std::uint8_t kDelimiter = 0x01;
constexpr std::uint8_t kFinalDelimiter = 0x02;

struct RecordKeys {
  Bytes cek;
  Bytes nonce_base;
};

RecordKeys derive(const Salt& salt, ByteView ikm) {
  const auto prk = crypto::hkdf_extract(salt, ikm);
  return {crypto::hkdf_expand(prk, as_bytes(kCekInfo), 16),
          crypto::hkdf_expand(prk, as_bytes(kNonceInfo), 12)};
}

Bytes record_nonce(const Bytes& base, std::uint64_t seq) {
  Bytes nonce = base;
  for (int i = 0; i < 8; ++i) {
    nonce[11 - i] ^= static_cast<std::uint8_t>(seq >> (8 * i));
  }
  return nonce;
}

}  // namespace

Bytes EceHeader::serialize() const {
  if (keyid.size() > 255) throw InvalidParameter("keyid longer than 255 octets");
  Bytes out(salt.begin(), salt.end());
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(record_size >> shift));
  }
  out.push_back(static_cast<std::uint8_t>(keyid.size()));
  out.insert(out.end(), keyid.begin(), keyid.end());
  return out;
}

EceHeader EceHeader::parse(ByteView wire) {
  if (wire.size() < 21) throw FramingError("truncated header");
  EceHeader h;
  std::copy_n(wire.begin(), 16, h.salt.begin());
  h.record_size = static_cast<std::uint32_t>(wire[16]) << 24 |
                  static_cast<std::uint32_t>(wire[17]) << 16 |
                  static_cast<std::uint32_t>(wire[18]) << 8 | wire[19];
  if (h.record_size < kMinRecordSize) {
    throw InvalidRecordSize("record size " + std::to_string(h.record_size) + " < 18");
  }
  const std::size_t idlen = wire[20];
  if (wire.size() < 21 + idlen) throw FramingError("truncated keyid");
  h.keyid.assign(wire.begin() + 21, wire.begin() + 21 + static_cast<std::ptrdiff_t>(idlen));
  return h;
}

std::size_t EceBody::size() const {
  std::size_t n = header.size();
  for (const auto& r : records) n += r.size();
  return n;
}

Bytes EceBody::serialize() const {
  Bytes out = header.serialize();
  for (const auto& r : records) out.insert(out.end(), r.begin(), r.end());
  return out;
}

EceBody EceBody::parse(ByteView wire) {
  EceBody body;
  body.header = EceHeader::parse(wire);
  const auto rs = body.header.record_size;
  for (std::size_t off = body.header.size(); off < wire.size(); off += rs) {
    const auto len = std::min<std::size_t>(rs, wire.size() - off);
    body.records.emplace_back(wire.begin() + static_cast<std::ptrdiff_t>(off),
                              wire.begin() + static_cast<std::ptrdiff_t>(off + len));
  }
  return body;
}

namespace {

EceBody encode(ByteView plaintext, const ContentKey& key, std::uint32_t rs, const Salt& salt,
               std::span<const std::size_t> padding, bool final_may_fill) {
  if (rs < kMinRecordSize) {
    throw InvalidRecordSize("record size " + std::to_string(rs) + " < 18");
  }
  const auto keys = derive(salt, key.ikm);
  EceBody body;
  body.header = {salt, rs, key.keyid};

  const std::size_t capacity = rs - kEceTagSize - 1;
  std::size_t off = 0;
  for (std::uint64_t seq = 0;; ++seq) {
    const std::size_t pad = seq < padding.size() ? padding[seq] : 0;
    if (pad > capacity) throw InvalidParameter("padding exceeds record capacity");
    const std::size_t take = std::min(capacity - pad, plaintext.size() - off);
    const bool full = take > 0 && take == capacity - pad;
    const bool last = off + take == plaintext.size() && (final_may_fill || !full);
    Bytes record(plaintext.begin() + static_cast<std::ptrdiff_t>(off),
                 plaintext.begin() + static_cast<std::ptrdiff_t>(off + take));
    record.push_back(last ? kFinalDelimiter : kDelimiter);
    record.insert(record.end(), pad, 0x00);
    body.records.push_back(crypto::aes128gcm_seal(keys.cek, record_nonce(keys.nonce_base, seq), record));
    off += take;
    if (last) break;
  }
  return body;
}

}  // namespace

// Without explicit padding a record filled to capacity is never the final one,
// so n_records = floor(len / (rs - 17)) + 1.
EceBody ece_encrypt(ByteView plaintext, const ContentKey& key, std::uint32_t rs, const Salt& salt) {
  return encode(plaintext, key, rs, salt, {}, false);
}

EceBody ece_encrypt_padded(ByteView plaintext, const ContentKey& key, std::uint32_t rs,
                           const Salt& salt, std::span<const std::size_t> padding) {
  return encode(plaintext, key, rs, salt, padding, true);
}

Bytes ece_decrypt(const EceBody& body, const KeyLookup& lookup) {
  const auto& h = body.header;
  if (h.record_size < kMinRecordSize) throw InvalidRecordSize("record size < 18");
  const auto key = lookup ? lookup(h.keyid) : std::nullopt;
  if (!key) throw UnknownKeyId("no content key for keyid '" + to_hex(h.keyid) + "'");
  if (body.records.empty()) throw FramingError("body has no records");

  const auto keys = derive(h.salt, key->ikm);
  Bytes out;
  for (std::size_t seq = 0; seq < body.records.size(); ++seq) {
    const auto& rec = body.records[seq];
    const bool last = seq + 1 == body.records.size();
    if (!last && rec.size() != h.record_size) throw FramingError("non-final record is short");
    if (rec.size() > h.record_size) throw FramingError("record exceeds rs");
    if (rec.size() < kEceTagSize + 1) throw FramingError("record too short for delimiter");

    auto plain = crypto::aes128gcm_open(keys.cek, record_nonce(keys.nonce_base, seq), rec);
    while (!plain.empty() && plain.back() == 0x00) plain.pop_back();
    if (plain.empty()) throw FramingError("record has no delimiter");
    const auto delim = plain.back();
    if (delim != (last ? kFinalDelimiter : kDelimiter)) {
      throw FramingError(last ? "final record lacks 0x02 delimiter"
                              : "non-final record lacks 0x01 delimiter");
    }
    plain.pop_back();
    out.insert(out.end(), plain.begin(), plain.end());
  }
  return out;
}

Bytes ece_decrypt(ByteView wire, const KeyLookup& lookup) {
  return ece_decrypt(EceBody::parse(wire), lookup);
}

ContentKey rotate_content_key(ByteView master, std::uint64_t epoch, SimTime epoch_length) {
  if (epoch_length.count() == 0) throw InvalidParameter("epoch length must be > 0");
  static constexpr std::string_view kLabel = "satsplit content key";
  const auto prk = crypto::hkdf_extract(as_bytes(kLabel), master);
  Bytes info(as_bytes("epoch").begin(), as_bytes("epoch").end());
  for (int shift = 56; shift >= 0; shift -= 8) info.push_back(static_cast<std::uint8_t>(epoch >> shift));
  const auto okm = crypto::hkdf_expand(prk, info, 16);

  ContentKey key;
  const auto id = "epoch-" + std::to_string(epoch);
  key.keyid.assign(id.begin(), id.end());
  std::copy(okm.begin(), okm.end(), key.ikm.begin());
  key.epoch = epoch;
  key.valid_from = epoch_length * epoch;
  key.valid_to = epoch_length * (epoch + 1);
  return key;
}

void KeyRing::add(ContentKey key) {
  auto id = key.keyid;
  keys_.insert_or_assign(std::move(id), std::move(key));
}

std::optional<ContentKey> KeyRing::find(ByteView keyid) const {
  auto it = keys_.find(Bytes(keyid.begin(), keyid.end()));
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

std::size_t KeyRing::drop_expired(SimTime now) {
  return std::erase_if(keys_, [now](const auto& kv) { return kv.second.valid_to <= now; });
}

KeyLookup KeyRing::lookup() const {
  return [this](ByteView keyid) { return find(keyid); };
}

}  // namespace satsplit
